//! Riemannian structure of the Gamma and Weibull manifolds under the Fisher
//! information metric.
//!
//! Coordinates are always (scale, shape): (α, β) for Gamma and (λ, μ) for
//! Weibull. Christoffel arrays of the second kind are indexed `[k][i][j]`
//! for Γᵏ_ij, arrays of the first kind `[i][j][k]` for Γ_ij,k.

use std::f64::consts::PI;

use crate::distributions::{Family, GammaParams, WeibullParams};
use crate::divergences;
use crate::error::{Error, Result};
use crate::specfun::{raw, EULER};

pub type Vec2 = [f64; 2];
pub type Symbols = [[[f64; 2]; 2]; 2];

/// Coordinates below this are treated as having left the open quadrant.
const DOMAIN_FLOOR: f64 = 1e-12;

/// A point on one of the two manifolds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldPoint {
    family: Family,
    theta: Vec2,
}

impl ManifoldPoint {
    pub fn new(family: Family, scale: f64, shape: f64) -> Result<Self> {
        for v in [scale, shape] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("manifold coordinates must be positive, got ({scale}, {shape})")));
            }
        }
        Ok(Self { family, theta: [scale, shape] })
    }

    pub fn gamma(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Family::Gamma, alpha, beta)
    }

    pub fn weibull(lambda: f64, mu: f64) -> Result<Self> {
        Self::new(Family::Weibull, lambda, mu)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> Vec2 {
        self.theta
    }

    pub fn scale(&self) -> f64 {
        self.theta[0]
    }

    pub fn shape(&self) -> f64 {
        self.theta[1]
    }

    pub fn as_gamma(&self) -> Result<GammaParams> {
        match self.family {
            Family::Gamma => GammaParams::new(self.theta[0], self.theta[1]),
            other => Err(Error::FamilyMismatch(Family::Gamma, other)),
        }
    }

    pub fn as_weibull(&self) -> Result<WeibullParams> {
        match self.family {
            Family::Weibull => WeibullParams::new(self.theta[0], self.theta[1]),
            other => Err(Error::FamilyMismatch(Family::Weibull, other)),
        }
    }

    fn with_theta(&self, theta: Vec2) -> Self {
        Self { family: self.family, theta }
    }
}

impl From<GammaParams> for ManifoldPoint {
    fn from(p: GammaParams) -> Self {
        Self { family: Family::Gamma, theta: [p.alpha(), p.beta()] }
    }
}

impl From<WeibullParams> for ManifoldPoint {
    fn from(p: WeibullParams) -> Self {
        Self { family: Family::Weibull, theta: [p.lambda(), p.mu()] }
    }
}

/// Symmetric 2×2 metric tensor g_ij.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTensor {
    pub g: [[f64; 2]; 2],
}

impl MetricTensor {
    pub fn det(&self) -> f64 {
        self.g[0][0] * self.g[1][1] - self.g[0][1] * self.g[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.g[0][0] + self.g[1][1]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let half = 0.5 * self.trace();
        let disc = (half * half - self.det()).max(0.0).sqrt();
        [half - disc, half + disc]
    }

    pub fn is_positive_definite(&self) -> bool {
        self.det() > 0.0 && self.trace() > 0.0
    }

    pub fn condition_number(&self) -> f64 {
        let [lo, hi] = self.eigenvalues();
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    pub fn inverse(&self) -> Result<MetricTensor> {
        let cond = self.condition_number();
        if cond.is_nan() || cond > 1e12 {
            return Err(Error::SingularMetric(cond));
        }
        let d = self.det();
        Ok(MetricTensor { g: [[self.g[1][1] / d, -self.g[0][1] / d], [-self.g[1][0] / d, self.g[0][0] / d]] })
    }

    /// vᵀ g v
    pub fn quadratic_form(&self, v: Vec2) -> f64 {
        self.g[0][0] * v[0] * v[0] + 2.0 * self.g[0][1] * v[0] * v[1] + self.g[1][1] * v[1] * v[1]
    }

    pub fn scaled(&self, c: f64) -> MetricTensor {
        let mut g = self.g;
        g.iter_mut().flatten().for_each(|x| *x *= c);
        MetricTensor { g }
    }
}

/// Fisher matrix of the scale-shape Gamma density:
/// g₁₁ = β/α², g₁₂ = 1/α, g₂₂ = ψ′(β).
///
/// In (mean, shape) coordinates m = αβ the same metric is
/// diag(β/m², ψ′(β) − 1/β); see [`fisher_gamma_mean_shape`].
pub fn fisher_gamma(p: &GammaParams) -> MetricTensor {
    let (a, b) = (p.alpha(), p.beta());
    MetricTensor { g: [[b / (a * a), 1.0 / a], [1.0 / a, raw::trigamma(b)]] }
}

/// The Gamma metric expressed in (mean, shape) coordinates, evaluated at the
/// mean m = αβ of `p`.
pub fn fisher_gamma_mean_shape(p: &GammaParams) -> MetricTensor {
    let (m, b) = (p.alpha() * p.beta(), p.beta());
    MetricTensor { g: [[b / (m * m), 0.0], [0.0, raw::trigamma(b) - 1.0 / b]] }
}

/// Weibull Fisher matrix, with ξ the Euler constant:
/// g₁₁ = μ²/λ², g₁₂ = (ξ − 1)/λ, g₂₂ = (ξ² − 2ξ + π²/6 + 1)/μ².
pub fn fisher_weibull(p: &WeibullParams) -> MetricTensor {
    let (l, m) = (p.lambda(), p.mu());
    let off = (EULER - 1.0) / l;
    MetricTensor { g: [[m * m / (l * l), off], [off, weibull_shape_constant() / (m * m)]] }
}

/// ξ² − 2ξ + π²/6 + 1
fn weibull_shape_constant() -> f64 {
    EULER * EULER - 2.0 * EULER + PI * PI / 6.0 + 1.0
}

pub fn fisher(p: &ManifoldPoint) -> MetricTensor {
    let [s, k] = p.theta;
    match p.family {
        // Coordinates are validated at construction.
        Family::Gamma => fisher_gamma(&GammaParams::new(s, k).expect("valid point")),
        Family::Weibull => fisher_weibull(&WeibullParams::new(s, k).expect("valid point")),
    }
}

/// Parameter of the α-connection family; `a = 0` is Levi-Civita, `a = 1` the
/// exponential connection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionParam(pub f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChristoffelSymbols {
    /// Γᵏ_ij, indexed `[k][i][j]`.
    pub second: Symbols,
    /// Γ_ij,k, indexed `[i][j][k]`, when the connection was given in that form.
    pub first: Option<Symbols>,
}

impl ChristoffelSymbols {
    /// Largest |Γᵏ_ij − Γᵏ_ji| over all k, i, j.
    pub fn lower_index_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..2 {
            worst = worst.max((self.second[k][0][1] - self.second[k][1][0]).abs());
        }
        worst
    }

    /// −Γᵏ_ij vⁱ vʲ, the geodesic acceleration.
    pub fn acceleration(&self, v: Vec2) -> Vec2 {
        let mut acc = [0.0; 2];
        for (k, out) in acc.iter_mut().enumerate() {
            let mut s = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    s += self.second[k][i][j] * v[i] * v[j];
                }
            }
            *out = -s;
        }
        acc
    }
}

fn raise(first: &Symbols, ginv: &MetricTensor) -> Symbols {
    std::array::from_fn(|k| {
        std::array::from_fn(|i| std::array::from_fn(|j| (0..2).map(|l| ginv.g[k][l] * first[i][j][l]).sum()))
    })
}

/// α-connection of the Gamma manifold from the potential
/// φ(α, β) = ln Γ(β) − β ln α: Γ_ij,k = ((1 − a)/2) ∂ᵢ∂ⱼ∂ₖ φ.
///
/// Non-zero components are Γ₁₁,₁ = −(1−a)β/α³, Γ₁₁,₂ = Γ₁₂,₁ = Γ₂₁,₁ =
/// (1−a)/(2α²) and Γ₂₂,₂ = (1−a)ψ″(β)/2; ∂α∂β∂β φ vanishes, so Γ₁₂,₂ = 0.
/// The second-kind array raises the last index with the Fisher metric.
pub fn christoffel_gamma_alpha(p: &GammaParams, c: ConnectionParam) -> ChristoffelSymbols {
    let (a, b) = (p.alpha(), p.beta());
    let f = (1.0 - c.0) / 2.0;
    let d111 = -2.0 * b / (a * a * a);
    let d112 = 1.0 / (a * a);
    let d222 = raw::tetragamma(b);
    let mut first = [[[0.0; 2]; 2]; 2];
    first[0][0][0] = f * d111;
    first[0][0][1] = f * d112;
    first[0][1][0] = f * d112;
    first[1][0][0] = f * d112;
    first[1][1][1] = f * d222;
    let ginv = fisher_gamma(p).inverse().expect("gamma Fisher metric is positive definite");
    ChristoffelSymbols { second: raise(&first, &ginv), first: Some(first) }
}

/// The closed-form second-kind Weibull symbols as commonly tabulated.
///
/// Five of the six components equal the Levi-Civita symbols of
/// [`fisher_weibull`]; the tabulated Γ²₁₁ = −μ³/(π²λ²) is smaller than the
/// Levi-Civita value −6μ³/(π²λ²) by a factor of 6. Geodesics are therefore
/// integrated with [`christoffel_from_metric`], not with this table.
pub fn christoffel_weibull(p: &WeibullParams) -> ChristoffelSymbols {
    let (l, m) = (p.lambda(), p.mu());
    let c = weibull_shape_constant();
    let pi2 = PI * PI;
    let mut s = [[[0.0; 2]; 2]; 2];
    s[0][0][0] = 6.0 * (EULER * m - m - pi2 / 6.0) / (pi2 * l);
    s[1][0][0] = -m.powi(3) / (pi2 * l * l);
    s[0][0][1] = 6.0 * c / (pi2 * m);
    s[0][1][0] = s[0][0][1];
    s[1][0][1] = 6.0 * m * (1.0 - EULER) / (pi2 * l);
    s[1][1][0] = s[1][0][1];
    s[0][1][1] = -6.0 * l * (1.0 - EULER) * c / (pi2 * m.powi(3));
    s[1][1][1] = -6.0 * c / (pi2 * m);
    ChristoffelSymbols { second: s, first: None }
}

/// Relative step for the central differences of the metric.
pub const METRIC_FD_STEP: f64 = 1e-6;

/// Levi-Civita symbols Γᵏ_μν = ½ g^{kρ}(∂_μ g_νρ + ∂_ν g_μρ − ∂_ρ g_μν), with
/// metric derivatives from central differences.
pub fn christoffel_from_metric(p: &ManifoldPoint) -> Result<ChristoffelSymbols> {
    christoffel_from_metric_fn(p, fisher)
}

/// Same as [`christoffel_from_metric`] for an arbitrary metric field.
pub fn christoffel_from_metric_fn<F>(p: &ManifoldPoint, metric: F) -> Result<ChristoffelSymbols>
where
    F: Fn(&ManifoldPoint) -> MetricTensor,
{
    let ginv = metric(p).inverse()?;
    // dg[r][i][j] = ∂_r g_ij
    let mut dg = [[[0.0; 2]; 2]; 2];
    for (r, slot) in dg.iter_mut().enumerate() {
        let h = METRIC_FD_STEP * p.theta[r];
        let mut plus = p.theta;
        let mut minus = p.theta;
        plus[r] += h;
        minus[r] -= h;
        let gp = metric(&p.with_theta(plus));
        let gm = metric(&p.with_theta(minus));
        *slot = std::array::from_fn(|i| std::array::from_fn(|j| (gp.g[i][j] - gm.g[i][j]) / (2.0 * h)));
    }
    Ok(ChristoffelSymbols { second: lower_to_second(&ginv, &dg), first: None })
}

fn lower_to_second(ginv: &MetricTensor, dg: &Symbols) -> Symbols {
    std::array::from_fn(|k| {
        std::array::from_fn(|m| {
            std::array::from_fn(|n| {
                0.5 * (0..2).map(|r| ginv.g[k][r] * (dg[m][n][r] + dg[n][m][r] - dg[r][m][n])).sum::<f64>()
            })
        })
    })
}

/// Levi-Civita symbols of [`fisher`] from exact metric derivatives. This is
/// what the geodesic integrator uses: the central-difference version carries
/// roundoff near 1e-10 that would cap the shooting accuracy.
pub fn levi_civita(p: &ManifoldPoint) -> Result<ChristoffelSymbols> {
    let [s, k] = p.theta;
    // dg[r][i][j] = ∂_r g_ij
    let dg = match p.family {
        Family::Gamma => {
            let (a2, a3) = (s * s, s * s * s);
            [[[-2.0 * k / a3, -1.0 / a2], [-1.0 / a2, 0.0]], [[1.0 / a2, 0.0], [0.0, raw::tetragamma(k)]]]
        }
        Family::Weibull => {
            let (l2, l3) = (s * s, s * s * s);
            let off = -(EULER - 1.0) / l2;
            [
                [[-2.0 * k * k / l3, off], [off, 0.0]],
                [[2.0 * k / l2, 0.0], [0.0, -2.0 * weibull_shape_constant() / (k * k * k)]],
            ]
        }
    };
    let ginv = fisher(p).inverse()?;
    Ok(ChristoffelSymbols { second: lower_to_second(&ginv, &dg), first: None })
}

/// √(gᵢⱼ dθⁱ dθʲ)
pub fn line_element(p: &ManifoldPoint, dtheta: Vec2) -> f64 {
    fisher(p).quadratic_form(dtheta).max(0.0).sqrt()
}

/// Samples θ(tᵢ) of a curve at uniform steps over [t_start, t_end].
#[derive(Debug, Clone)]
pub struct ParamPath {
    pub points: Vec<ManifoldPoint>,
    /// dθ/dt at each sample, when the producer knows it (e.g. an ODE solver).
    pub velocities: Option<Vec<Vec2>>,
    pub t_start: f64,
    pub t_end: f64,
}

impl ParamPath {
    pub fn new(points: Vec<ManifoldPoint>, t_start: f64, t_end: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Invalid("a path needs at least 2 samples".into()));
        }
        let family = points[0].family;
        if let Some(p) = points.iter().find(|p| p.family != family) {
            return Err(Error::FamilyMismatch(family, p.family));
        }
        Ok(Self { points, velocities: None, t_start, t_end })
    }

    /// Uniformly sampled straight line in coordinates from `a` to `b`.
    pub fn straight(a: &ManifoldPoint, b: &ManifoldPoint, samples: usize) -> Result<Self> {
        if a.family != b.family {
            return Err(Error::FamilyMismatch(a.family, b.family));
        }
        let n = samples.max(2);
        let points = (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                a.with_theta([a.theta[0] + t * (b.theta[0] - a.theta[0]), a.theta[1] + t * (b.theta[1] - a.theta[1])])
            })
            .collect();
        Self::new(points, 0.0, 1.0)
    }

    pub fn start(&self) -> &ManifoldPoint {
        &self.points[0]
    }

    pub fn end(&self) -> &ManifoldPoint {
        self.points.last().expect("path has at least 2 samples")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn speeds(&self) -> Option<Vec<f64>> {
        let v = self.velocities.as_ref()?;
        Some(self.points.iter().zip(v).map(|(p, v)| line_element(p, *v)).collect())
    }
}

/// Riemannian length ∫ √(gᵢⱼ θ̇ⁱ θ̇ʲ) dt along the sampled path.
///
/// With velocities the speed is integrated by composite Simpson (trapezoid
/// for an even sample count's last panel); without them each chord is
/// measured with the metric at its coordinate midpoint.
pub fn path_length(path: &ParamPath) -> f64 {
    if let Some(speeds) = path.speeds() {
        let n = speeds.len() - 1;
        let h = (path.t_end - path.t_start) / n as f64;
        let even = n - n % 2;
        let mut s = 0.0;
        for i in (0..even).step_by(2) {
            s += h / 3.0 * (speeds[i] + 4.0 * speeds[i + 1] + speeds[i + 2]);
        }
        if even < n {
            s += 0.5 * h * (speeds[n - 1] + speeds[n]);
        }
        return s.abs();
    }
    path.points
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].theta, w[1].theta);
            let mid = w[0].with_theta([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            line_element(&mid, [b[0] - a[0], b[1] - a[1]])
        })
        .sum()
}

type State = [f64; 4];

fn geodesic_rhs(family: Family, y: &State) -> Result<State> {
    let p = ManifoldPoint { family, theta: [y[0], y[1]] };
    let acc = levi_civita(&p)?.acceleration([y[2], y[3]]);
    Ok([y[2], y[3], acc[0], acc[1]])
}

fn in_domain(y: &State) -> bool {
    y[0] > DOMAIN_FLOOR && y[1] > DOMAIN_FLOOR && y.iter().all(|v| v.is_finite())
}

/// Integrate θ̈ᵏ + Γᵏ_ij θ̇ⁱ θ̇ʲ = 0 from `start` with initial `velocity` over
/// t ∈ [0, t_end] using classical fixed-step RK4. Returns `steps + 1` samples
/// with their velocities.
pub fn geodesic_shoot(start: &ManifoldPoint, velocity: Vec2, t_end: f64, steps: usize) -> Result<ParamPath> {
    if steps < 16 {
        return Err(Error::Invalid(format!("geodesic integration needs at least 16 steps, got {steps}")));
    }
    if !(t_end.is_finite() && velocity.iter().all(|v| v.is_finite())) {
        return Err(Error::Invalid("non-finite geodesic initial data".into()));
    }
    let family = start.family;
    let h = t_end / steps as f64;
    let mut y: State = [start.theta[0], start.theta[1], velocity[0], velocity[1]];
    let mut points = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);
    points.push(*start);
    velocities.push(velocity);

    let add = |y: &State, k: &State, c: f64| -> State { std::array::from_fn(|i| y[i] + c * k[i]) };
    let guard = |y: &State, t: f64| if in_domain(y) { Ok(()) } else { Err(Error::LeftDomain { t }) };

    for step in 0..steps {
        let t = step as f64 * h;
        let k1 = geodesic_rhs(family, &y)?;
        let y2 = add(&y, &k1, 0.5 * h);
        guard(&y2, t + 0.5 * h)?;
        let k2 = geodesic_rhs(family, &y2)?;
        let y3 = add(&y, &k2, 0.5 * h);
        guard(&y3, t + 0.5 * h)?;
        let k3 = geodesic_rhs(family, &y3)?;
        let y4 = add(&y, &k3, h);
        guard(&y4, t + h)?;
        let k4 = geodesic_rhs(family, &y4)?;
        y = std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        guard(&y, t + h)?;
        points.push(ManifoldPoint { family, theta: [y[0], y[1]] });
        velocities.push([y[2], y[3]]);
    }
    Ok(ParamPath { points, velocities: Some(velocities), t_start: 0.0, t_end })
}

/// Controls for the shooting solver.
#[derive(Debug, Clone, Copy)]
pub struct BvpOptions {
    pub steps: usize,
    /// Endpoint miss allowed, in coordinates (relative to max(1, |b|∞)).
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for BvpOptions {
    fn default() -> Self {
        Self { steps: 128, tolerance: 1e-8, max_iterations: 60 }
    }
}

/// Geodesic distance between `a` and `b` by shooting on the initial velocity.
pub fn geodesic_distance_bvp(a: &ManifoldPoint, b: &ManifoldPoint) -> Result<f64> {
    geodesic_bvp(a, b, BvpOptions::default()).map(|path| path_length(&path))
}

/// Solve the two-point problem and return the geodesic on t ∈ [0, 1].
///
/// Damped Newton on the endpoint residual with a forward-difference Jacobian.
/// A step that leaves the manifold or fails to reduce the residual is halved.
/// When Newton stalls the target is approached by continuation along the
/// coordinate segment from `a` to `b`.
pub fn geodesic_bvp(a: &ManifoldPoint, b: &ManifoldPoint, opts: BvpOptions) -> Result<ParamPath> {
    if a.family != b.family {
        return Err(Error::FamilyMismatch(a.family, b.family));
    }
    let delta = [b.theta[0] - a.theta[0], b.theta[1] - a.theta[1]];
    if delta == [0.0, 0.0] {
        return geodesic_shoot(a, [0.0, 0.0], 1.0, opts.steps);
    }
    match newton_shoot(a, b, delta, opts) {
        Ok(path) => Ok(path),
        Err(_) => {
            // Continuation: solve for a sequence of intermediate targets.
            let mut v = delta;
            let stages = 8;
            for s in 1..=stages {
                let frac = s as f64 / stages as f64;
                let target = a.with_theta([a.theta[0] + frac * delta[0], a.theta[1] + frac * delta[1]]);
                let guess = if s == 1 { [frac * delta[0], frac * delta[1]] } else { v };
                let path = newton_shoot(a, &target, guess, opts)?;
                v = path.velocities.as_ref().expect("shot paths carry velocities")[0];
                if s == stages {
                    return Ok(path);
                }
            }
            unreachable!("continuation returns on its final stage")
        }
    }
}

fn newton_shoot(a: &ManifoldPoint, b: &ManifoldPoint, guess: Vec2, opts: BvpOptions) -> Result<ParamPath> {
    let tol = opts.tolerance * b.theta[0].abs().max(b.theta[1].abs()).max(1.0);
    let miss = |path: &ParamPath| -> Vec2 {
        let e = path.end().theta;
        [e[0] - b.theta[0], e[1] - b.theta[1]]
    };
    let norm = |r: Vec2| r[0].abs().max(r[1].abs());

    let mut v = guess;
    let mut path = geodesic_shoot(a, v, 1.0, opts.steps)?;
    let mut r = miss(&path);
    for _ in 0..opts.max_iterations {
        if norm(r) <= tol {
            return Ok(path);
        }
        // Forward-difference Jacobian of the endpoint with respect to v.
        let mut jac = [[0.0; 2]; 2];
        for c in 0..2 {
            let h = 1e-7 * (v[0].abs() + v[1].abs()).max(1e-3);
            let mut vp = v;
            vp[c] += h;
            let rp = miss(&geodesic_shoot(a, vp, 1.0, opts.steps)?);
            jac[0][c] = (rp[0] - r[0]) / h;
            jac[1][c] = (rp[1] - r[1]) / h;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !det.is_finite() || det.abs() < 1e-300 {
            return Err(Error::NoConvergence("singular shooting Jacobian".into()));
        }
        let step = [-(jac[1][1] * r[0] - jac[0][1] * r[1]) / det, -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det];
        let mut damping = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = [v[0] + damping * step[0], v[1] + damping * step[1]];
            if let Ok(tp) = geodesic_shoot(a, trial, 1.0, opts.steps) {
                let tr = miss(&tp);
                if norm(tr) < norm(r) {
                    v = trial;
                    path = tp;
                    r = tr;
                    accepted = true;
                    break;
                }
            }
            damping *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence(format!("no descent step, endpoint miss {:.3e}", norm(r))));
        }
    }
    if norm(r) <= tol {
        return Ok(path);
    }
    Err(Error::NoConvergence(format!("endpoint miss {:.3e} after {} iterations", norm(r), opts.max_iterations)))
}

/// √(2·SKLD(a, b)), the local approximation of the geodesic distance.
pub fn gd_skld(a: &ManifoldPoint, b: &ManifoldPoint) -> Result<f64> {
    Ok((2.0 * divergences::skld(a, b)?.value()).sqrt())
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::distributions::gamma_log_pdf;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, family: Family) -> ManifoldPoint {
        let s = rng.random_range(0.5f64.ln()..4f64.ln()).exp();
        let k = rng.random_range(0.5f64.ln()..4f64.ln()).exp();
        ManifoldPoint::new(family, s, k).unwrap()
    }

    #[test]
    fn fisher_gamma_entries() {
        let g = fisher_gamma(&GammaParams::new(2.0, 3.0).unwrap());
        assert_eq!(g.g[0][0], 0.75);
        assert_eq!(g.g[0][1], 0.5);
        let g = fisher_gamma(&GammaParams::new(1.0, 1.0).unwrap());
        assert!((g.g[1][1] - PI * PI / 6.0).abs() < 1e-13);
        let g = fisher_gamma_mean_shape(&GammaParams::new(1.0, 1.0).unwrap());
        assert_eq!(g.g[0][1], 0.0);
        assert!((g.g[1][1] - (PI * PI / 6.0 - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn gamma_metric_is_pullback_of_mean_shape_form() {
        // (α, β) ↦ (αβ, β) has Jacobian [[β, α], [0, 1]].
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = random_point(&mut rng, Family::Gamma).as_gamma().unwrap();
            let (a, b) = (p.alpha(), p.beta());
            let d = fisher_gamma_mean_shape(&p).g;
            let jac = [[b, a], [0.0, 1.0]];
            let g = fisher_gamma(&p).g;
            for i in 0..2 {
                for j in 0..2 {
                    let pulled: f64 = (0..2).map(|k| jac[k][i] * d[k][k] * jac[k][j]).sum();
                    assert!((pulled - g[i][j]).abs() < 1e-12 * (1.0 + g[i][j].abs()));
                }
            }
        }
    }

    #[test]
    fn fisher_weibull_entries() {
        let g = fisher_weibull(&WeibullParams::new(1.0, 1.0).unwrap());
        assert_eq!(g.g[0][0], 1.0);
        assert!((g.g[0][1] - (-0.422_784_335_098_467_1)).abs() < 1e-12);
        assert!((g.g[1][1] - 1.823_680_660_852_567).abs() < 1e-9);
    }

    #[test]
    fn fisher_gamma_matches_hessian_of_log_likelihood() {
        // −E[∂² ln p] estimated by finite differences of the log density,
        // averaged over draws from the same distribution.
        let p = GammaParams::new(1.3, 2.2).unwrap();
        let s = crate::distributions::gamma_sample(&p, 200_000, 4).unwrap();
        let lp = |a: f64, b: f64, x: f64| gamma_log_pdf(x, &GammaParams::new(a, b).unwrap()).unwrap();
        let (a, b) = (p.alpha(), p.beta());
        let h = 1e-4;
        let mut hess = [[0.0; 2]; 2];
        for &x in s.values() {
            hess[0][0] += (lp(a + h, b, x) - 2.0 * lp(a, b, x) + lp(a - h, b, x)) / (h * h);
            hess[1][1] += (lp(a, b + h, x) - 2.0 * lp(a, b, x) + lp(a, b - h, x)) / (h * h);
            hess[0][1] +=
                (lp(a + h, b + h, x) - lp(a + h, b - h, x) - lp(a - h, b + h, x) + lp(a - h, b - h, x)) / (4.0 * h * h);
        }
        let n = s.len() as f64;
        let g = fisher_gamma(&p);
        for i in 0..2 {
            for j in i..2 {
                let est = -hess[i][j] / n;
                assert!((est - g.g[i][j]).abs() < 0.02 * g.g[i][j].abs(), "g{i}{j}: {est} vs {}", g.g[i][j]);
            }
        }
    }

    #[test]
    fn metrics_positive_definite_on_grid() {
        for family in Family::ALL {
            for i in 0..10 {
                for j in 0..10 {
                    let s = (0.1f64.ln() + (100f64.ln()) * i as f64 / 9.0).exp();
                    let k = (0.1f64.ln() + (100f64.ln()) * j as f64 / 9.0).exp();
                    let g = fisher(&ManifoldPoint::new(family, s, k).unwrap());
                    assert!(g.is_positive_definite(), "{family} ({s}, {k})");
                }
            }
        }
    }

    #[test]
    fn gamma_alpha_connection() {
        let p = GammaParams::new(1.0, 1.0).unwrap();
        let c = christoffel_gamma_alpha(&p, ConnectionParam(0.0));
        assert!((c.first.unwrap()[0][0][0] + 1.0).abs() < 1e-15);

        let flat = christoffel_gamma_alpha(&GammaParams::new(2.5, 0.7).unwrap(), ConnectionParam(1.0));
        assert!(flat.first.unwrap().iter().flatten().flatten().all(|v| *v == 0.0));
        assert!(flat.second.iter().flatten().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn gamma_alpha_connection_matches_potential_third_derivatives() {
        // Oracle: ((1 − a)/2) ∂ᵢ∂ⱼ∂ₖ φ by nested central differences of φ.
        let phi = |t: [f64; 3]| raw::log_gamma(t[1]) - t[1] * t[0].ln();
        let third_h = |x: [f64; 2], i: usize, j: usize, k: usize, h: f64| -> f64 {
            let mut total = 0.0;
            for si in [-1.0, 1.0] {
                for sj in [-1.0, 1.0] {
                    for sk in [-1.0, 1.0] {
                        let mut t = [x[0], x[1], 0.0];
                        t[i] += si * h;
                        t[j] += sj * h;
                        t[k] += sk * h;
                        total += si * sj * sk * phi(t);
                    }
                }
            }
            total / (8.0 * h * h * h)
        };
        // Richardson extrapolation removes the O(h²) term.
        let third = |x: [f64; 2], i: usize, j: usize, k: usize| -> f64 {
            let h = 2e-3;
            (4.0 * third_h(x, i, j, k, h / 2.0) - third_h(x, i, j, k, h)) / 3.0
        };
        for (alpha, beta, a) in [(1.3, 2.0, 0.0), (0.7, 3.5, -0.5), (2.0, 1.1, 0.4)] {
            let c = christoffel_gamma_alpha(&GammaParams::new(alpha, beta).unwrap(), ConnectionParam(a));
            let first = c.first.unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        let oracle = 0.5 * (1.0 - a) * third([alpha, beta], i, j, k);
                        assert!(
                            (first[i][j][k] - oracle).abs() < 1e-5,
                            "({i}{j},{k}) at ({alpha},{beta}): {} vs {oracle}",
                            first[i][j][k]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn exact_levi_civita_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for family in Family::ALL {
            for _ in 0..50 {
                let p = random_point(&mut rng, family);
                let exact = levi_civita(&p).unwrap().second;
                let fd = christoffel_from_metric(&p).unwrap().second;
                for k in 0..2 {
                    for i in 0..2 {
                        for j in 0..2 {
                            let (e, f) = (exact[k][i][j], fd[k][i][j]);
                            assert!((e - f).abs() <= 1e-6 * (1.0 + e.abs()), "{family} [{k}][{i}][{j}]: {e} vs {f}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn weibull_table_values_and_symmetry() {
        let c = christoffel_weibull(&WeibullParams::new(1.0, 1.0).unwrap());
        assert!((c.second[1][0][0] + 1.0 / (PI * PI)).abs() < 1e-12);
        assert!((c.second[1][0][0] - (-0.101_321_2)).abs() < 1e-7);
        assert_eq!(c.lower_index_asymmetry(), 0.0);
    }

    #[test]
    fn weibull_table_against_levi_civita() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = random_point(&mut rng, Family::Weibull);
            let table = christoffel_weibull(&p.as_weibull().unwrap()).second;
            let lc = christoffel_from_metric(&p).unwrap().second;
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let tol = 1e-4 * (1.0 + lc[k][i][j].abs());
                        if (k, i, j) == (1, 0, 0) {
                            // Tabulated Γ²₁₁ is off by exactly a factor of 6.
                            assert!((6.0 * table[k][i][j] - lc[k][i][j]).abs() < tol);
                        } else {
                            assert!((table[k][i][j] - lc[k][i][j]).abs() < tol, "Γ{k}{i}{j}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gamma_levi_civita_matches_analytic_derivatives() {
        // ∂α g = [[−2β/α³, −1/α²], [−1/α², 0]], ∂β g = [[1/α², 0], [0, ψ″(β)]].
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let p = random_point(&mut rng, Family::Gamma);
            let (a, b) = (p.scale(), p.shape());
            let dg = [
                [[-2.0 * b / a.powi(3), -1.0 / (a * a)], [-1.0 / (a * a), 0.0]],
                [[1.0 / (a * a), 0.0], [0.0, raw::tetragamma(b)]],
            ];
            let ginv = fisher(&p).inverse().unwrap().g;
            let lc = christoffel_from_metric(&p).unwrap().second;
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let oracle: f64 =
                            0.5 * (0..2).map(|r| ginv[k][r] * (dg[i][j][r] + dg[j][i][r] - dg[r][i][j])).sum::<f64>();
                        assert!((lc[k][i][j] - oracle).abs() < 1e-4 * (1.0 + oracle.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn christoffels_invariant_under_constant_metric_rescale() {
        let p = ManifoldPoint::weibull(1.7, 0.9).unwrap();
        let base = christoffel_from_metric(&p).unwrap().second;
        let scaled = christoffel_from_metric_fn(&p, |q| fisher(q).scaled(37.5)).unwrap().second;
        for (x, y) in base.iter().flatten().flatten().zip(scaled.iter().flatten().flatten()) {
            assert!((x - y).abs() < 1e-8 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn singular_metric_is_reported() {
        let p = ManifoldPoint::gamma(1.0, 1.0).unwrap();
        let err = christoffel_from_metric_fn(&p, |_| MetricTensor { g: [[1.0, 1.0], [1.0, 1.0]] });
        assert!(matches!(err, Err(Error::SingularMetric(_))));
    }

    #[test]
    fn line_element_basics() {
        let p = ManifoldPoint::gamma(2.0, 3.0).unwrap();
        assert_eq!(line_element(&p, [0.0, 0.0]), 0.0);
        let d = 0.01;
        assert!((line_element(&p, [d, 0.0]) - (3.0f64).sqrt() / 2.0 * d).abs() < 1e-15);
        let v = [0.3, -0.2];
        assert_eq!(line_element(&p, v), line_element(&p, [-v[0], -v[1]]));
    }

    #[test]
    fn straight_path_lengths_match_closed_forms() {
        let a = ManifoldPoint::gamma(0.5, 2.0).unwrap();
        let b = ManifoldPoint::gamma(3.0, 2.0).unwrap();
        let exact = 2f64.sqrt() * (3.0f64 / 0.5).ln();
        let len = path_length(&ParamPath::straight(&a, &b, 2000).unwrap());
        assert!((len - exact).abs() < 1e-6 * exact);

        let a = ManifoldPoint::weibull(0.5, 1.5).unwrap();
        let b = ManifoldPoint::weibull(4.0, 1.5).unwrap();
        let exact = 1.5 * (4.0f64 / 0.5).ln();
        let len = path_length(&ParamPath::straight(&a, &b, 2000).unwrap());
        assert!((len - exact).abs() < 1e-6 * exact);

        let c = ParamPath::new(vec![a; 5], 0.0, 1.0).unwrap();
        assert_eq!(path_length(&c), 0.0);
    }

    #[test]
    fn zero_velocity_geodesic_is_constant() {
        let p = ManifoldPoint::weibull(1.2, 2.0).unwrap();
        let path = geodesic_shoot(&p, [0.0, 0.0], 1.0, 16).unwrap();
        assert!(path.points.iter().all(|q| *q == p));
        assert!(geodesic_shoot(&p, [0.1, 0.1], 1.0, 8).is_err());
    }

    #[test]
    fn geodesics_have_constant_speed() {
        for family in Family::ALL {
            let p = ManifoldPoint::new(family, 1.5, 2.0).unwrap();
            let path = geodesic_shoot(&p, [0.8, -0.6], 1.0, 200).unwrap();
            let speeds = path.speeds().unwrap();
            let drift = speeds.iter().map(|s| (s - speeds[0]).abs()).fold(0.0, f64::max) / speeds[0];
            assert!(drift <= 1e-3, "{family}: {drift}");
        }
    }

    #[test]
    fn shooting_leaves_domain_loudly() {
        let p = ManifoldPoint::gamma(0.1, 1.0).unwrap();
        let err = geodesic_shoot(&p, [-20.0, 0.0], 1.0, 16);
        assert!(matches!(err, Err(Error::LeftDomain { .. })), "{err:?}");
    }

    #[test]
    fn bvp_distance_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for family in Family::ALL {
            let a = random_point(&mut rng, family);
            assert_eq!(geodesic_distance_bvp(&a, &a).unwrap(), 0.0);
            for _ in 0..5 {
                let b = random_point(&mut rng, family);
                let dab = geodesic_distance_bvp(&a, &b).unwrap();
                let dba = geodesic_distance_bvp(&b, &a).unwrap();
                assert!((dab - dba).abs() <= 1e-6 * dab, "{family} {dab} {dba}");
                let straight = path_length(&ParamPath::straight(&a, &b, 4000).unwrap());
                assert!(dab <= straight * (1.0 + 1e-9), "{family} {dab} > {straight}");
            }
        }
    }

    #[test]
    fn gd_skld_is_symmetric_and_zero_on_diagonal() {
        let a = ManifoldPoint::gamma(1.2, 0.8).unwrap();
        let b = ManifoldPoint::gamma(2.0, 1.9).unwrap();
        assert_eq!(gd_skld(&a, &a).unwrap(), 0.0);
        assert_eq!(gd_skld(&a, &b).unwrap(), gd_skld(&b, &a).unwrap());
    }

    #[test]
    fn gd_skld_agrees_with_line_element_locally() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for family in Family::ALL {
            for _ in 0..20 {
                let a = random_point(&mut rng, family);
                let dir = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let eps = 1e-3;
                let d = [eps * a.scale() * dir[0], eps * a.shape() * dir[1]];
                let b = ManifoldPoint::new(family, a.scale() + d[0], a.shape() + d[1]).unwrap();
                let ratio = gd_skld(&a, &b).unwrap() / line_element(&a, d);
                assert!((ratio - 1.0).abs() < 0.01, "{family}: {ratio}");
            }
        }
    }
}
