//! Gamma (scale-shape) and Weibull (scale-shape) families: densities,
//! moments, seeded sampling and maximum-likelihood fitting.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::raw;

/// Which statistical manifold a parameter pair lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gamma,
    Weibull,
}

impl Family {
    pub const ALL: [Family; 2] = [Family::Gamma, Family::Weibull];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gamma => "gamma",
            Family::Weibull => "weibull",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gamma" => Ok(Family::Gamma),
            "weibull" => Ok(Family::Weibull),
            other => Err(Error::Invalid(format!("unknown family '{other}'"))),
        }
    }
}

fn positive_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Gamma density with scale `alpha` and shape `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    alpha: f64,
    beta: f64,
}

impl GammaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        positive_finite("gamma scale", alpha)?;
        positive_finite("gamma shape", beta)?;
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Weibull density with scale `lambda` and shape `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    lambda: f64,
    mu: f64,
}

impl WeibullParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        positive_finite("weibull scale", lambda)?;
        positive_finite("weibull shape", mu)?;
        Ok(Self { lambda, mu })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// Observed positive data.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    /// Rejects empty input and any value that is not strictly positive and finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Invalid("sample is empty".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Domain(format!("sample value #{i} = {v} is not positive and finite")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Multiply every value by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        positive_finite("scale factor", c)?;
        Sample::new(self.values.iter().map(|v| v * c).collect())
    }
}

pub fn gamma_log_pdf(x: f64, p: &GammaParams) -> Result<f64> {
    positive_finite("x", x)?;
    Ok(gamma_log_pdf_unchecked(x, p))
}

pub(crate) fn gamma_log_pdf_unchecked(x: f64, p: &GammaParams) -> f64 {
    (p.beta - 1.0) * x.ln() - x / p.alpha - p.beta * p.alpha.ln() - raw::log_gamma(p.beta)
}

/// x^(β−1) e^(−x/α) / (α^β Γ(β)).
pub fn gamma_pdf(x: f64, p: &GammaParams) -> Result<f64> {
    gamma_log_pdf(x, p).map(f64::exp)
}

pub fn weibull_log_pdf(x: f64, p: &WeibullParams) -> Result<f64> {
    positive_finite("x", x)?;
    Ok(weibull_log_pdf_unchecked(x, p))
}

pub(crate) fn weibull_log_pdf_unchecked(x: f64, p: &WeibullParams) -> f64 {
    let z = x / p.lambda;
    (p.mu / p.lambda).ln() + (p.mu - 1.0) * z.ln() - z.powf(p.mu)
}

/// (μ/λ)(x/λ)^(μ−1) e^(−(x/λ)^μ).
pub fn weibull_pdf(x: f64, p: &WeibullParams) -> Result<f64> {
    weibull_log_pdf(x, p).map(f64::exp)
}

/// (mean, variance) = (αβ, βα²).
pub fn gamma_moments(p: &GammaParams) -> (f64, f64) {
    (p.alpha * p.beta, p.beta * p.alpha * p.alpha)
}

/// (mean, variance) = (λΓ(1+1/μ), λ²[Γ(1+2/μ) − Γ(1+1/μ)²]).
pub fn weibull_moments(p: &WeibullParams) -> (f64, f64) {
    let g1 = raw::gamma(1.0 + 1.0 / p.mu);
    let g2 = raw::gamma(1.0 + 2.0 / p.mu);
    (p.lambda * g1, p.lambda * p.lambda * (g2 - g1 * g1))
}

pub fn gamma_sample(p: &GammaParams, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::Invalid("sample size must be at least 1".into()));
    }
    let dist = rand_distr::Gamma::new(p.beta, p.alpha).map_err(|e| Error::Domain(format!("gamma sampler: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // The sampler can underflow to exactly 0 for tiny shapes; redraw.
    let values = (0..n)
        .map(|_| loop {
            let x: f64 = dist.sample(&mut rng);
            if x > 0.0 {
                break x;
            }
        })
        .collect();
    Sample::new(values)
}

/// Inverse of the Weibull survival function: the x with P(X > x) = u.
pub fn weibull_inverse_survival(p: &WeibullParams, u: f64) -> f64 {
    p.lambda * (-u.ln()).powf(1.0 / p.mu)
}

pub fn weibull_sample(p: &WeibullParams, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::Invalid("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n)
        .map(|_| loop {
            let u: f64 = rng.sample(Open01);
            let x = weibull_inverse_survival(p, u);
            if x > 0.0 && x.is_finite() {
                break x;
            }
        })
        .collect();
    Sample::new(values)
}

/// Iteration controls shared by both shape solvers.
#[derive(Debug, Clone, Copy)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Bound on the absolute residual of the shape equation at the returned estimate.
    pub tolerance: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { max_iterations: 200, tolerance: 1e-10 }
    }
}

struct LogStats {
    mean: f64,
    mean_ln: f64,
    max_ln: f64,
}

fn log_stats(s: &Sample) -> Result<LogStats> {
    if s.len() < 2 {
        return Err(Error::DegenerateSample(format!("need at least 2 values, got {}", s.len())));
    }
    let n = s.len() as f64;
    let mut mean_ln = 0.0;
    let mut min_ln = f64::INFINITY;
    let mut max_ln = f64::NEG_INFINITY;
    for &v in s.values() {
        let l = v.ln();
        mean_ln += l;
        min_ln = min_ln.min(l);
        max_ln = max_ln.max(l);
    }
    mean_ln /= n;
    if max_ln - min_ln <= 1e-9 * (1.0 + mean_ln.abs()) {
        return Err(Error::DegenerateSample(
            "log-values have (numerically) zero spread; shape is unidentifiable".into(),
        ));
    }
    Ok(LogStats { mean: s.mean(), mean_ln, max_ln })
}

/// Right-hand side of the Gamma shape equation: ln(mean) − mean(ln x).
fn gamma_shape_statistic(stats: &LogStats) -> f64 {
    stats.mean.ln() - stats.mean_ln
}

/// |ln β − ψ(β) − (ln(mean) − mean(ln x))| at the given estimate.
pub fn gamma_mle_residual(s: &Sample, p: &GammaParams) -> f64 {
    let n = s.len() as f64;
    let mean = s.mean();
    let mean_ln = s.values().iter().map(|v| v.ln()).sum::<f64>() / n;
    (p.beta.ln() - raw::digamma(p.beta) - (mean.ln() - mean_ln)).abs()
}

pub fn gamma_mle(s: &Sample) -> Result<GammaParams> {
    gamma_mle_with(s, MleOptions::default())
}

/// Newton iteration on ln β − ψ(β) = s, then α = mean / β.
pub fn gamma_mle_with(s: &Sample, opts: MleOptions) -> Result<GammaParams> {
    let stats = log_stats(s)?;
    let stat = gamma_shape_statistic(&stats);
    if !(stat.is_finite() && stat > 0.0) {
        return Err(Error::DegenerateSample(format!("shape statistic {stat:e} is not positive")));
    }
    let residual = |b: f64| b.ln() - raw::digamma(b) - stat;

    let mut beta = (3.0 - stat + ((stat - 3.0).powi(2) + 24.0 * stat).sqrt()) / (12.0 * stat);
    for _ in 0..opts.max_iterations {
        let f = residual(beta);
        let df = 1.0 / beta - raw::trigamma(beta);
        let mut next = beta - f / df;
        if !(next.is_finite() && next > 0.0) {
            next = beta / 2.0;
        }
        let converged = (next - beta).abs() <= 4.0 * f64::EPSILON * beta;
        beta = next;
        if converged && residual(beta).abs() <= opts.tolerance {
            return GammaParams::new(stats.mean / beta, beta);
        }
    }
    if residual(beta).abs() <= opts.tolerance {
        return GammaParams::new(stats.mean / beta, beta);
    }
    Err(Error::Convergence { solver: "gamma shape Newton", iterations: opts.max_iterations })
}

/// Shape-equation residual for the Weibull likelihood:
/// Σ xᵢ^μ ln xᵢ / Σ xᵢ^μ − 1/μ − mean(ln x).
pub fn weibull_mle_residual(s: &Sample, p: &WeibullParams) -> f64 {
    let logs: Vec<f64> = s.values().iter().map(|v| v.ln()).collect();
    let mean_ln = logs.iter().sum::<f64>() / logs.len() as f64;
    let max_ln = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    weibull_shape_equation(&logs, mean_ln, max_ln, p.mu).0.abs()
}

// Returns (g(μ), g'(μ), ln mean((x/x_max)^μ)).
fn weibull_shape_equation(logs: &[f64], mean_ln: f64, max_ln: f64, mu: f64) -> (f64, f64, f64) {
    let mut sw = 0.0;
    let mut swl = 0.0;
    let mut swll = 0.0;
    for &l in logs {
        let c = l - max_ln;
        let w = (mu * c).exp();
        sw += w;
        swl += w * c;
        swll += w * c * c;
    }
    let m1 = swl / sw;
    let var = (swll / sw - m1 * m1).max(0.0);
    let g = m1 + max_ln - 1.0 / mu - mean_ln;
    let dg = var + 1.0 / (mu * mu);
    (g, dg, (sw / logs.len() as f64).ln())
}

pub fn weibull_mle(s: &Sample) -> Result<WeibullParams> {
    weibull_mle_with(s, MleOptions::default())
}

/// Safeguarded Newton on the profile shape equation, then λ from
/// λ^μ = mean(xᵢ^μ). The equation is strictly increasing in μ, so a
/// bracket is maintained and bisection takes over whenever Newton leaves it.
pub fn weibull_mle_with(s: &Sample, opts: MleOptions) -> Result<WeibullParams> {
    let stats = log_stats(s)?;
    let logs: Vec<f64> = s.values().iter().map(|v| v.ln()).collect();
    let n = logs.len() as f64;
    let var_ln = logs.iter().map(|l| (l - stats.mean_ln).powi(2)).sum::<f64>() / n;
    let eq = |mu: f64| weibull_shape_equation(&logs, stats.mean_ln, stats.max_ln, mu);

    let mut mu = std::f64::consts::PI / (6f64.sqrt() * var_ln.sqrt());
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for _ in 0..opts.max_iterations {
        let (g, dg, _) = eq(mu);
        if g.abs() <= opts.tolerance * 1e-3 {
            break;
        }
        if g < 0.0 {
            lo = lo.max(mu);
        } else {
            hi = hi.min(mu);
        }
        let mut next = mu - g / dg;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * mu.max(lo) };
        }
        if (next - mu).abs() <= 4.0 * f64::EPSILON * mu {
            mu = next;
            break;
        }
        mu = next;
    }
    let (g, _, ln_mean_w) = eq(mu);
    if g.abs() > opts.tolerance {
        return Err(Error::Convergence { solver: "weibull shape Newton", iterations: opts.max_iterations });
    }
    let lambda = (stats.max_ln + ln_mean_w / mu).exp();
    WeibullParams::new(lambda, mu)
}
