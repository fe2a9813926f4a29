//! Kullback-Leibler divergences between members of the same family.

use serde::{Deserialize, Serialize};

use crate::distributions::{gamma_log_pdf_unchecked, weibull_log_pdf_unchecked, Family, GammaParams, WeibullParams};
use crate::error::{Error, Result};
use crate::geometry::ManifoldPoint;
use crate::quadrature;
use crate::specfun::{raw, EULER};

/// A divergence in nats.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DivergenceValue(f64);

impl DivergenceValue {
    /// Rounding can push a closed form a few ulps below zero; those are clamped.
    pub fn new(v: f64) -> Self {
        Self(if v < 0.0 { 0.0 } else { v })
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Closed-form KL(p‖q) for scale-shape Gamma densities.
pub fn kld_gamma(p: &GammaParams, q: &GammaParams) -> DivergenceValue {
    let (ap, bp) = (p.alpha(), p.beta());
    let (aq, bq) = (q.alpha(), q.beta());
    if (ap, bp) == (aq, bq) {
        return DivergenceValue(0.0);
    }
    let v = (bp - bq) * raw::digamma(bp) - raw::log_gamma(bp)
        + raw::log_gamma(bq)
        + bq * (aq / ap).ln()
        + bp * (ap - aq) / aq;
    DivergenceValue::new(v)
}

/// Closed-form KL(p‖q) for scale-shape Weibull densities.
pub fn kld_weibull(p: &WeibullParams, q: &WeibullParams) -> DivergenceValue {
    let (lp, mp) = (p.lambda(), p.mu());
    let (lq, mq) = (q.lambda(), q.mu());
    if (lp, mp) == (lq, mq) {
        return DivergenceValue(0.0);
    }
    let (llp, llq) = (lp.ln(), lq.ln());
    let v = (mp.ln() - mp * llp) - (mq.ln() - mq * llq)
        + (mp - mq) * (llp - EULER / mp)
        + (mq * (llp - llq) + raw::log_gamma(mq / mp + 1.0)).exp()
        - 1.0;
    DivergenceValue::new(v)
}

fn same_family(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<Family> {
    if p.family() != q.family() {
        return Err(Error::FamilyMismatch(p.family(), q.family()));
    }
    Ok(p.family())
}

/// Closed-form KL(p‖q) dispatched on the family.
pub fn kld(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<DivergenceValue> {
    Ok(match same_family(p, q)? {
        Family::Gamma => kld_gamma(&p.as_gamma()?, &q.as_gamma()?),
        Family::Weibull => kld_weibull(&p.as_weibull()?, &q.as_weibull()?),
    })
}

/// Absolute tolerance used by [`kld_numeric`].
pub const NUMERIC_TOLERANCE: f64 = 1e-10;

/// KL(p‖q) by adaptive quadrature of f_p (ln f_p − ln f_q) over (0, ∞).
pub fn kld_numeric(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<DivergenceValue> {
    let log_pdf = |pt: &ManifoldPoint| -> Result<Box<dyn Fn(f64) -> f64>> {
        Ok(match pt.family() {
            Family::Gamma => {
                let g = pt.as_gamma()?;
                Box::new(move |x| gamma_log_pdf_unchecked(x, &g))
            }
            Family::Weibull => {
                let w = pt.as_weibull()?;
                Box::new(move |x| weibull_log_pdf_unchecked(x, &w))
            }
        })
    };
    same_family(p, q)?;
    let (log_p, log_q) = (log_pdf(p)?, log_pdf(q)?);
    let integrand = |x: f64| {
        let lp = log_p(x);
        let fp = lp.exp();
        if fp == 0.0 {
            return 0.0;
        }
        fp * (lp - log_q(x))
    };
    let v = quadrature::integrate_positive_line(integrand, NUMERIC_TOLERANCE)?;
    Ok(DivergenceValue(v))
}

/// Symmetrized divergence ½(KL(p‖q) + KL(q‖p)).
pub fn skld(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<DivergenceValue> {
    let forward = kld(p, q)?.value();
    let backward = kld(q, p)?.value();
    // Sum in a fixed order so the result is bitwise symmetric.
    let (lo, hi) = if forward <= backward { (forward, backward) } else { (backward, forward) };
    Ok(DivergenceValue::new(0.5 * (lo + hi)))
}
