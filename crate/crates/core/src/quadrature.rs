//! Adaptive Gauss-Kronrod (7/15) integration.

// Node and weight tables keep their published digits.
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_INTERVALS: usize = 4000;

/// Relative floor on the requested accuracy: an absolute tolerance below a
/// few dozen ulps of the result cannot be certified in double precision.
const RELATIVE_FLOOR: f64 = 50.0 * f64::EPSILON;

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Piece {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Piece { a, b, value: kron * h, error: ((kron - gauss) * h).abs() }
}

/// Integrate `f` over [a, b] to the absolute tolerance `abs_tol` (or
/// [`RELATIVE_FLOOR`] times the result, whichever is larger), starting from
/// `initial_pieces` equal subintervals.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, initial_pieces: usize) -> Result<f64> {
    let n = initial_pieces.max(1);
    let width = (b - a) / n as f64;
    let mut heap: BinaryHeap<Piece> =
        (0..n).map(|i| kronrod(&f, a + i as f64 * width, a + (i + 1) as f64 * width)).collect();
    loop {
        let (total, err) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        if !total.is_finite() {
            return Err(Error::QuadratureFailure { estimate: f64::NAN });
        }
        if err <= abs_tol.max(RELATIVE_FLOOR * total.abs()) {
            return Ok(total);
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureFailure { estimate: err });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        heap.push(kronrod(&f, worst.a, mid));
        heap.push(kronrod(&f, mid, worst.b));
    }
}

/// Integrate `f` over (0, ∞) through the substitution x = e^u. The support in
/// u is located on a coarse grid: everything outside the outermost grid
/// points where |f(e^u) e^u| exceeds `abs_tol * 1e-4` is dropped.
pub fn integrate_positive_line<F: Fn(f64) -> f64>(f: F, abs_tol: f64) -> Result<f64> {
    let g = |u: f64| {
        let x = u.exp();
        if x == 0.0 || !x.is_finite() {
            return 0.0;
        }
        let v = f(x) * x;
        if v.is_nan() {
            0.0
        } else {
            v
        }
    };
    const U_MAX: f64 = 700.0;
    const STEP: f64 = 0.25;
    let cutoff = abs_tol * 1e-4;
    let steps = (2.0 * U_MAX / STEP) as usize;
    let mut lo = None;
    let mut hi = None;
    for i in 0..=steps {
        let u = -U_MAX + i as f64 * STEP;
        if g(u).abs() > cutoff {
            lo.get_or_insert(u);
            hi = Some(u);
        }
    }
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return Ok(0.0);
    };
    let (a, b) = ((lo - 2.0).max(-U_MAX), (hi + 2.0).min(U_MAX));
    let pieces = ((b - a) / 0.5).ceil() as usize;
    integrate(g, a, b, abs_tol, pieces)
}
