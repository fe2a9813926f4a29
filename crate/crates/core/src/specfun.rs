//! Log-gamma and the polygamma functions used by the density, likelihood,
//! divergence and metric formulas.
//!
//! All functions shift the argument upward with the standard recurrences until
//! it reaches [`ASYMPTOTIC_THRESHOLD`], then sum the Bernoulli asymptotic
//! series. Eight terms at x >= 10 leave a truncation error below 1e-17.

use crate::error::{Error, Result};

/// Euler-Mascheroni constant.
pub const EULER: f64 = 0.577_215_664_901_532_860_606_512_090_082;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_406;

const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

// B_{2k} / (2k (2k - 1)), k = 1..8
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

// B_{2k} / (2k), k = 1..8
const DIGAMMA_SERIES: [f64; 8] =
    [1.0 / 12.0, -1.0 / 120.0, 1.0 / 252.0, -1.0 / 240.0, 1.0 / 132.0, -691.0 / 32_760.0, 1.0 / 12.0, -3617.0 / 8160.0];

// B_{2k}, k = 1..8
const TRIGAMMA_SERIES: [f64; 8] =
    [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0, -3617.0 / 510.0];

fn check(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} requires a finite positive argument, got {x}")))
    }
}

/// ln Γ(x) for x > 0.
pub fn log_gamma(x: f64) -> Result<f64> {
    check("log_gamma", x)?;
    Ok(raw::log_gamma(x))
}

/// Γ(x) for x > 0. Overflows to infinity above x ≈ 171.6.
pub fn gamma(x: f64) -> Result<f64> {
    check("gamma", x)?;
    Ok(raw::log_gamma(x).exp())
}

/// Digamma ψ(x) = d/dx ln Γ(x).
pub fn digamma(x: f64) -> Result<f64> {
    check("digamma", x)?;
    Ok(raw::digamma(x))
}

/// Trigamma ψ′(x).
pub fn trigamma(x: f64) -> Result<f64> {
    check("trigamma", x)?;
    Ok(raw::trigamma(x))
}

/// Tetragamma ψ″(x).
pub fn tetragamma(x: f64) -> Result<f64> {
    check("tetragamma", x)?;
    Ok(raw::tetragamma(x))
}

/// Unchecked versions for callers that already enforce x > 0 through their
/// parameter types.
pub(crate) mod raw {
    use super::*;

    pub fn log_gamma(x: f64) -> f64 {
        if x >= ASYMPTOTIC_THRESHOLD {
            return stirling(x);
        }
        let mut shifted = x;
        let mut product = 1.0;
        while shifted < ASYMPTOTIC_THRESHOLD {
            product *= shifted;
            shifted += 1.0;
        }
        stirling(shifted) - product.ln()
    }

    fn stirling(x: f64) -> f64 {
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        let mut series = 0.0;
        let mut power = inv;
        for c in STIRLING {
            series += c * power;
            power *= inv2;
        }
        (x - 0.5) * x.ln() - x + HALF_LN_2PI + series
    }

    pub fn gamma(x: f64) -> f64 {
        log_gamma(x).exp()
    }

    pub fn digamma(x: f64) -> f64 {
        let mut shifted = x;
        let mut acc = 0.0;
        while shifted < ASYMPTOTIC_THRESHOLD {
            acc -= 1.0 / shifted;
            shifted += 1.0;
        }
        let inv2 = 1.0 / (shifted * shifted);
        let mut power = inv2;
        let mut series = 0.0;
        for c in DIGAMMA_SERIES {
            series += c * power;
            power *= inv2;
        }
        acc + shifted.ln() - 0.5 / shifted - series
    }

    pub fn trigamma(x: f64) -> f64 {
        let mut shifted = x;
        let mut acc = 0.0;
        while shifted < ASYMPTOTIC_THRESHOLD {
            acc += 1.0 / (shifted * shifted);
            shifted += 1.0;
        }
        let inv = 1.0 / shifted;
        let inv2 = inv * inv;
        let mut power = inv2 * inv;
        let mut series = 0.0;
        for b in TRIGAMMA_SERIES {
            series += b * power;
            power *= inv2;
        }
        acc + inv + 0.5 * inv2 + series
    }

    pub fn tetragamma(x: f64) -> f64 {
        let mut shifted = x;
        let mut acc = 0.0;
        while shifted < ASYMPTOTIC_THRESHOLD {
            acc -= 2.0 / (shifted * shifted * shifted);
            shifted += 1.0;
        }
        let inv = 1.0 / shifted;
        let inv2 = inv * inv;
        let mut power = inv2 * inv2;
        let mut series = 0.0;
        for (k, b) in TRIGAMMA_SERIES.iter().enumerate() {
            series += (2 * k + 3) as f64 * b * power;
            power *= inv2;
        }
        acc - inv2 - inv2 * inv - series
    }
}
