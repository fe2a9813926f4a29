//! Image decoding, dual-tree complex wavelet decomposition and per-subband
//! distribution fitting.

use std::path::Path;

use ndarray::{s, Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{gamma_mle, weibull_mle, Family, Sample};
use crate::error::{Error, Result};
use crate::geometry::ManifoldPoint;

pub const MAX_LEVELS: usize = 5;
pub const MIN_SIDE: usize = 32;
pub const ORIENTATIONS: usize = 6;

/// Magnitudes at or below this are treated as zero coefficients.
pub const ZERO_MAGNITUDE: f64 = 1e-12;

/// Row-major grayscale image with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Invalid(format!("{} pixels for a {width}x{height} image", pixels.len())));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Invalid(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let pixels = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Rows × columns view as a matrix.
    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.height, self.width), self.pixels.clone()).expect("shape checked at construction")
    }

    pub fn energy(&self) -> f64 {
        self.pixels.iter().map(|v| v * v).sum()
    }

    /// Circular shift by (dx, dy) pixels.
    pub fn shifted(&self, dx: usize, dy: usize) -> Self {
        let (w, h) = (self.width, self.height);
        let pixels = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| self.get((x + w - dx % w) % w, (y + h - dy % h) % h))
            .collect();
        Self { width: w, height: h, pixels }
    }

    /// 8-bit grayscale PNG encoding, values rounded to the nearest level.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.pixels.iter().map(|v| (v * 255.0).round() as u8).collect();
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions");
        buf.save_with_format(path, image::ImageFormat::Png).map_err(|e| match e {
            image::ImageError::IoError(io) => Error::Io(io),
            other => Error::Invalid(other.to_string()),
        })
    }
}

/// Decode a PNG or PGM file. Color pixels are reduced with luma weights
/// 0.299 R + 0.587 G + 0.114 B; alpha is ignored.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    let decode_err = |reason: String| Error::Decode { path: path.to_path_buf(), reason };
    let reader = image::ImageReader::open(path)?.with_guessed_format()?;
    match reader.format() {
        Some(image::ImageFormat::Png | image::ImageFormat::Pnm) => {}
        Some(other) => return Err(Error::UnsupportedFormat(format!("{}: {other:?}", path.display()))),
        None => return Err(Error::UnsupportedFormat(format!("{}: unrecognized format", path.display()))),
    }
    let img = reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => Error::UnsupportedFormat(format!("{}: {u}", path.display())),
        other => decode_err(other.to_string()),
    })?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    use image::DynamicImage::*;
    let pixels: Vec<f64> = match img {
        ImageLuma8(_) | ImageLuma16(_) | ImageLumaA8(_) | ImageLumaA16(_) => {
            img.to_luma16().into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect()
        }
        _ => img
            .to_rgb16()
            .pixels()
            .map(|p| {
                // Weights in thousandths keep the sum exact: white maps to 1.
                let [r, g, b] = p.0.map(u64::from);
                (299 * r + 587 * g + 114 * b) as f64 / (1000.0 * 65535.0)
            })
            .collect(),
    };
    GrayImage::new(width, height, pixels)
}

/// Filter bank coefficients: Kingsbury's near-symmetric (13,19)-tap pair for
/// level 1 and the 14-tap Q-shift pair for deeper levels, as distributed in
/// `near_sym_b.npz` and `qshift_b.npz` of the `dtcwt` 0.12.0 package.
pub mod filters {
    pub const TABLE_VERSION: u32 = 1;

    pub const H0O: [f64; 13] = [
        -0.0017578125,
        0.0,
        0.022265625,
        -0.046875,
        -0.0482421875,
        0.296875,
        0.55546875,
        0.296875,
        -0.0482421875,
        -0.046875,
        0.022265625,
        0.0,
        -0.0017578125,
    ];

    pub const H1O: [f64; 19] = [
        -7.062639508928571e-05,
        0.0,
        0.0013419015066964285,
        -0.0018833705357142855,
        -0.007156808035714285,
        0.023856026785714284,
        0.05564313616071428,
        -0.05168805803571428,
        -0.29975760323660716,
        0.5594308035714286,
        -0.29975760323660716,
        -0.05168805803571428,
        0.05564313616071428,
        0.023856026785714284,
        -0.007156808035714285,
        -0.0018833705357142855,
        0.0013419015066964285,
        0.0,
        -7.062639508928571e-05,
    ];

    pub const H0A: [f64; 14] = [
        0.003253142763653182,
        -0.00388321199915849,
        0.03466034684485349,
        -0.03887280126882779,
        -0.11720388769911527,
        0.27529538466888204,
        0.7561456438925225,
        0.5688104207121227,
        0.011866092033797,
        -0.1067118046866654,
        0.023825384794920298,
        0.01702522388155399,
        -0.005439475937274115,
        -0.004556895628475491,
    ];

    pub const H1A: [f64; 14] = [
        -0.004556895628475491,
        0.005439475937274115,
        0.01702522388155399,
        -0.023825384794920298,
        -0.1067118046866654,
        -0.011866092033797,
        0.5688104207121227,
        -0.7561456438925225,
        0.27529538466888204,
        0.11720388769911527,
        -0.03887280126882779,
        -0.03466034684485349,
        -0.00388321199915849,
        -0.003253142763653182,
    ];

    pub const H1B: [f64; 14] = [
        -0.003253142763653182,
        -0.00388321199915849,
        -0.03466034684485349,
        -0.03887280126882779,
        0.11720388769911527,
        0.27529538466888204,
        -0.7561456438925225,
        0.5688104207121227,
        -0.011866092033797,
        -0.1067118046866654,
        -0.023825384794920298,
        0.01702522388155399,
        0.005439475937274115,
        -0.004556895628475491,
    ];

    /// h0b is h0a reversed.
    pub fn h0b() -> [f64; 14] {
        let mut h = H0A;
        h.reverse();
        h
    }

    /// SHA-256 over every coefficient as little-endian f64, in the order
    /// H0O, H1O, H0A, h0b, H1A, H1B.
    pub const TABLE_SHA256: &str = "cf027e3872d8f6611083d598be6c9fb48cddd5af930e867ca024fd7784e0adfe";

    pub fn table_digest() -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for table in [&H0O[..], &H1O[..], &H0A[..], &h0b()[..], &H1A[..], &H1B[..]] {
            for v in table {
                hasher.update(v.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// Half-sample symmetric index reflection into [0, n): -1 ↦ 0, n ↦ n - 1.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i.rem_euclid(2 * n);
    (if m >= n { 2 * n - 1 - m } else { m }) as usize
}

/// Convolve along axis 0 keeping only fully overlapped outputs, with the
/// input rows taken through `rows`.
fn convolve_rows(x: &ArrayView2<f64>, rows: &[usize], h: &[f64]) -> Array2<f64> {
    let m = h.len();
    let out_len = rows.len() + 1 - m;
    let mut y = Array2::zeros((out_len, x.ncols()));
    for (i, mut out) in y.axis_iter_mut(Axis(0)).enumerate() {
        for (k, &hk) in h.iter().enumerate() {
            if hk == 0.0 {
                continue;
            }
            out.scaled_add(hk, &x.row(rows[i + m - 1 - k]));
        }
    }
    y
}

/// Undecimated column filter with symmetric extension; output has the
/// input's shape for odd-length `h`.
fn colfilter(x: &ArrayView2<f64>, h: &[f64]) -> Array2<f64> {
    let r = x.nrows();
    let m2 = (h.len() / 2) as isize;
    let rows: Vec<usize> = (-m2..r as isize + m2).map(|i| reflect(i, r)).collect();
    convolve_rows(x, &rows, h)
}

/// Decimating column filter for the Q-shift trees. `ha` runs on one
/// polyphase, `hb` on the other; outputs are interleaved. Rows must be a
/// multiple of 4.
fn coldfilt(x: &ArrayView2<f64>, ha: &[f64], hb: &[f64]) -> Array2<f64> {
    let r = x.nrows();
    debug_assert!(r.is_multiple_of(4) && ha.len() == hb.len() && ha.len().is_multiple_of(2));
    let m = ha.len();
    let ext: Vec<usize> = (-(m as isize)..(r + m) as isize).map(|i| reflect(i, r)).collect();
    let even = |h: &[f64]| h.iter().step_by(2).copied().collect::<Vec<_>>();
    let odd = |h: &[f64]| h.iter().skip(1).step_by(2).copied().collect::<Vec<_>>();
    let (hao, hae, hbo, hbe) = (even(ha), odd(ha), even(hb), odd(hb));
    let t: Vec<usize> = (5..r + 2 * m - 2).step_by(4).collect();
    let pick = |off: usize| -> Vec<usize> { t.iter().map(|&ti| ext[ti - off]).collect() };

    let ya = convolve_rows(x, &pick(1), &hao) + convolve_rows(x, &pick(3), &hae);
    let yb = convolve_rows(x, &pick(0), &hbo) + convolve_rows(x, &pick(2), &hbe);

    let dot: f64 = ha.iter().zip(hb).map(|(a, b)| a * b).sum();
    let (first, second) = if dot > 0.0 { (&ya, &yb) } else { (&yb, &ya) };
    let mut y = Array2::zeros((r / 2, x.ncols()));
    y.slice_mut(s![0..;2, ..]).assign(first);
    y.slice_mut(s![1..;2, ..]).assign(second);
    y
}

/// Split 2×2 quads into the two complex subimages (p − q, p + q) with
/// p = (a + jb)/√2 and q = (d − jc)/√2.
fn q2c(y: &Array2<f64>) -> [Array2<Complex64>; 2] {
    let (r, c) = (y.nrows() / 2, y.ncols() / 2);
    let k = std::f64::consts::FRAC_1_SQRT_2;
    let mut minus = Array2::zeros((r, c));
    let mut plus = Array2::zeros((r, c));
    for i in 0..r {
        for j in 0..c {
            let (a, b) = (y[[2 * i, 2 * j]], y[[2 * i, 2 * j + 1]]);
            let (cc, d) = (y[[2 * i + 1, 2 * j]], y[[2 * i + 1, 2 * j + 1]]);
            let p = Complex64::new(a * k, b * k);
            let q = Complex64::new(d * k, -cc * k);
            minus[[i, j]] = p - q;
            plus[[i, j]] = p + q;
        }
    }
    [minus, plus]
}

/// Oriented complex subbands of a decomposition.
#[derive(Debug, Clone)]
pub struct SubbandSet {
    /// `subbands[level - 1][orientation]`
    pub subbands: Vec<[Array2<Complex64>; ORIENTATIONS]>,
    /// Lowpass residual of the deepest level (all four trees interleaved).
    pub lowpass: Array2<f64>,
}

impl SubbandSet {
    pub fn levels(&self) -> usize {
        self.subbands.len()
    }

    pub fn get(&self, level: usize, orientation: usize) -> Result<&Array2<Complex64>> {
        if level == 0 || level > self.levels() || orientation >= ORIENTATIONS {
            return Err(Error::Invalid(format!(
                "subband ({level}, {orientation}) out of range for {} levels",
                self.levels()
            )));
        }
        Ok(&self.subbands[level - 1][orientation])
    }

    pub fn highpass_energy(&self) -> f64 {
        self.subbands.iter().flatten().flat_map(|b| b.iter()).map(|z| z.norm_sqr()).sum()
    }

    pub fn lowpass_energy(&self) -> f64 {
        self.lowpass.iter().map(|v| v * v).sum()
    }
}

fn check_size(width: usize, height: usize, levels: usize) -> Result<()> {
    if levels == 0 || levels > MAX_LEVELS {
        return Err(Error::Invalid(format!("levels must be in 1..={MAX_LEVELS}, got {levels}")));
    }
    let need = MIN_SIDE.max(1 << (levels + 1));
    if width < need || height < need {
        return Err(Error::ImageTooSmall { width, height, levels });
    }
    Ok(())
}

fn assign_pairs(out: &mut [Array2<Complex64>], pair: (usize, usize), y: &Array2<f64>) {
    let [minus, plus] = q2c(y);
    out[pair.0] = minus;
    out[pair.1] = plus;
}

/// Forward 2-D dual-tree complex wavelet transform.
///
/// Orientation order per level is the conventional ≈ +15°, +45°, +75°, −75°,
/// −45°, −15°. Odd dimensions are padded by repeating the last row/column;
/// deeper levels extend the lowpass by one row/column on each side when
/// needed to keep sizes divisible by 4.
pub fn dtcwt_forward(img: &GrayImage, levels: usize) -> Result<SubbandSet> {
    check_size(img.width(), img.height(), levels)?;
    let mut x = img.to_array();
    if x.nrows() % 2 == 1 {
        let last = x.row(x.nrows() - 1).to_owned();
        x.push_row(last.view()).expect("matching width");
    }
    if x.ncols() % 2 == 1 {
        let last = x.column(x.ncols() - 1).to_owned();
        x.push_column(last.view()).expect("matching height");
    }

    let empty = || std::array::from_fn::<Array2<Complex64>, ORIENTATIONS, _>(|_| Array2::zeros((0, 0)));
    let mut subbands = Vec::with_capacity(levels);

    // Level 1: undecimated near-symmetric filters.
    let lo = colfilter(&x.view(), &filters::H0O).reversed_axes();
    let hi = colfilter(&x.view(), &filters::H1O).reversed_axes();
    let mut lolo = colfilter(&lo.view(), &filters::H0O).reversed_axes();
    let mut level = empty();
    assign_pairs(&mut level, (0, 5), &colfilter(&hi.view(), &filters::H0O).reversed_axes());
    assign_pairs(&mut level, (2, 3), &colfilter(&lo.view(), &filters::H1O).reversed_axes());
    assign_pairs(&mut level, (1, 4), &colfilter(&hi.view(), &filters::H1O).reversed_axes());
    subbands.push(level);

    let h0b = filters::h0b();
    for _ in 1..levels {
        if !lolo.nrows().is_multiple_of(4) {
            let (first, last) = (lolo.row(0).to_owned(), lolo.row(lolo.nrows() - 1).to_owned());
            let mut ext = Array2::zeros((lolo.nrows() + 2, lolo.ncols()));
            ext.row_mut(0).assign(&first);
            ext.slice_mut(s![1..=lolo.nrows(), ..]).assign(&lolo);
            ext.row_mut(lolo.nrows() + 1).assign(&last);
            lolo = ext;
        }
        if !lolo.ncols().is_multiple_of(4) {
            let (first, last) = (lolo.column(0).to_owned(), lolo.column(lolo.ncols() - 1).to_owned());
            let mut ext = Array2::zeros((lolo.nrows(), lolo.ncols() + 2));
            ext.column_mut(0).assign(&first);
            ext.slice_mut(s![.., 1..=lolo.ncols()]).assign(&lolo);
            ext.column_mut(lolo.ncols() + 1).assign(&last);
            lolo = ext;
        }
        let lo = coldfilt(&lolo.view(), &h0b, &filters::H0A).reversed_axes();
        let hi = coldfilt(&lolo.view(), &filters::H1B, &filters::H1A).reversed_axes();
        lolo = coldfilt(&lo.view(), &h0b, &filters::H0A).reversed_axes();
        let mut level = empty();
        assign_pairs(&mut level, (0, 5), &coldfilt(&hi.view(), &h0b, &filters::H0A).reversed_axes());
        assign_pairs(&mut level, (2, 3), &coldfilt(&lo.view(), &filters::H1B, &filters::H1A).reversed_axes());
        assign_pairs(&mut level, (1, 4), &coldfilt(&hi.view(), &filters::H1B, &filters::H1A).reversed_axes());
        subbands.push(level);
    }
    Ok(SubbandSet { subbands, lowpass: lolo.as_standard_layout().into_owned() })
}

/// Coefficient magnitudes of one subband as a sample, zeros removed.
pub fn subband_magnitudes(set: &SubbandSet, level: usize, orientation: usize) -> Result<Sample> {
    let band = set.get(level, orientation)?;
    let total = band.len();
    let values: Vec<f64> = band.iter().map(|z| z.norm()).filter(|m| *m > ZERO_MAGNITUDE).collect();
    let zeros = total - values.len();
    if total == 0 || 2 * zeros > total {
        return Err(Error::DegenerateSubband(format!(
            "level {level}, orientation {orientation}: {zeros} of {total} coefficients are zero"
        )));
    }
    Sample::new(values)
}

/// One fitted parameter pair per subband, level-major then orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    pub family: Family,
    pub levels: usize,
    pub params: Vec<[f64; 2]>,
}

impl Signature {
    pub fn new(family: Family, levels: usize, params: Vec<[f64; 2]>) -> Result<Self> {
        if params.len() != ORIENTATIONS * levels {
            return Err(Error::StructureMismatch(format!(
                "{} parameter pairs for {levels} levels (expected {})",
                params.len(),
                ORIENTATIONS * levels
            )));
        }
        for p in &params {
            ManifoldPoint::new(family, p[0], p[1])?;
        }
        Ok(Self { family, levels, params })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn points(&self) -> Vec<ManifoldPoint> {
        self.params
            .iter()
            .map(|p| ManifoldPoint::new(self.family, p[0], p[1]).expect("validated at construction"))
            .collect()
    }
}

/// Decompose and fit `family` to each subband's magnitudes.
pub fn extract_signature(img: &GrayImage, family: Family, levels: usize) -> Result<Signature> {
    let set = dtcwt_forward(img, levels)?;
    let params = (0..levels * ORIENTATIONS)
        .into_par_iter()
        .map(|idx| {
            let (level, orientation) = (idx / ORIENTATIONS + 1, idx % ORIENTATIONS);
            let fit = || -> Result<[f64; 2]> {
                let sample = subband_magnitudes(&set, level, orientation)?;
                Ok(match family {
                    Family::Gamma => {
                        let p = gamma_mle(&sample)?;
                        [p.alpha(), p.beta()]
                    }
                    Family::Weibull => {
                        let p = weibull_mle(&sample)?;
                        [p.lambda(), p.mu()]
                    }
                })
            };
            fit().map_err(|e| Error::Subband { level, orientation, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    Signature::new(family, levels, params)
}
