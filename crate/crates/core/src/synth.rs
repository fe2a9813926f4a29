//! Seeded synthetic texture datasets: spectrally shaped Gaussian noise, one
//! shaping per class.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::features::GrayImage;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub classes: usize,
    pub per_class: usize,
    /// Side length of the square images.
    pub size: usize,
    pub seed: u64,
    /// Spread of class spectra; 1 places classes far apart, values near 0
    /// make them overlap.
    pub separation: f64,
    /// Log-scale random variation of each image's spectrum around its class.
    pub jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { classes: 5, per_class: 8, size: 128, seed: 0, separation: 1.0, jitter: 0.05 }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.per_class == 0 {
            return Err(Error::Invalid("classes and per-class counts must be positive".into()));
        }
        if self.size < 32 {
            return Err(Error::Invalid(format!("image size {} is below 32", self.size)));
        }
        if !(self.separation.is_finite() && self.separation >= 0.0 && self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::Invalid("separation and jitter must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Band-pass shaping of one texture: radial center frequency (cycles per
/// pixel), radial bandwidth, dominant orientation and its spread, contrast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub frequency: f64,
    pub bandwidth: f64,
    pub orientation: f64,
    pub angular_spread: f64,
    pub contrast: f64,
}

/// Class spectra: frequency, orientation and contrast move apart with
/// `separation`.
pub fn class_spectrum(class: usize, classes: usize, separation: f64) -> Spectrum {
    let mid = (classes as f64 - 1.0) / 2.0;
    let offset = if classes > 1 { (class as f64 - mid) / mid.max(1.0) } else { 0.0 };
    Spectrum {
        frequency: 0.12 * (1.0 + 0.6 * separation * offset).max(0.2),
        bandwidth: 0.04,
        orientation: separation * PI * class as f64 / classes as f64,
        angular_spread: 0.5,
        contrast: 0.12 * (1.0 + 0.4 * separation * offset).max(0.2),
    }
}

fn image_rng(seed: u64, class: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((class as u64) << 32) | index as u64);
    rng
}

fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    for row in data.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for x in 0..n {
        for y in 0..n {
            col[y] = data[y * n + x];
        }
        fft.process(&mut col);
        for y in 0..n {
            data[y * n + x] = col[y];
        }
    }
}

/// Filtered noise image with the given spectrum, shifted to mean 0.5 and
/// clipped to [0, 1].
pub fn render(spectrum: &Spectrum, size: usize, rng: &mut impl Rng) -> GrayImage {
    let n = size;
    let mut data: Vec<Complex64> = (0..n * n).map(|_| Complex64::new(rng.sample(StandardNormal), 0.0)).collect();
    fft2(&mut data, n, false);
    let freq = |k: usize| if k <= n / 2 { k as f64 / n as f64 } else { k as f64 / n as f64 - 1.0 };
    for y in 0..n {
        for x in 0..n {
            let (fx, fy) = (freq(x), freq(y));
            let r = fx.hypot(fy);
            let radial = (-(r - spectrum.frequency).powi(2) / (2.0 * spectrum.bandwidth.powi(2))).exp();
            // Orientation is defined modulo π so the filter stays Hermitian.
            let mut dtheta = (fy.atan2(fx) - spectrum.orientation).rem_euclid(PI);
            if dtheta > PI / 2.0 {
                dtheta = PI - dtheta;
            }
            let angular = (-dtheta.powi(2) / (2.0 * spectrum.angular_spread.powi(2))).exp();
            data[y * n + x] *= if r == 0.0 { 0.0 } else { radial * angular };
        }
    }
    fft2(&mut data, n, true);
    let values: Vec<f64> = data.iter().map(|z| z.re).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt();
    let scale = if sd > 0.0 { spectrum.contrast / sd } else { 0.0 };
    let pixels = values.iter().map(|v| (0.5 + (v - mean) * scale).clamp(0.0, 1.0)).collect();
    GrayImage::new(n, n, pixels).expect("clamped to [0, 1]")
}

/// One generated image and its class.
#[derive(Debug, Clone)]
pub struct SynthImage {
    pub class: usize,
    pub index: usize,
    pub image: GrayImage,
}

/// Generate every image in memory, class-major.
pub fn generate(config: &SynthConfig) -> Result<Vec<SynthImage>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.classes * config.per_class);
    for class in 0..config.classes {
        let base = class_spectrum(class, config.classes, config.separation);
        for index in 0..config.per_class {
            let mut rng = image_rng(config.seed, class, index);
            let mut wobble = || (config.jitter * rng.sample::<f64, _>(StandardNormal)).exp();
            let spectrum =
                Spectrum { frequency: base.frequency * wobble(), contrast: base.contrast * wobble(), ..base };
            let image = render(&spectrum, config.size, &mut rng);
            out.push(SynthImage { class, index, image });
        }
    }
    Ok(out)
}

pub fn class_dir_name(class: usize) -> String {
    format!("class{class:02}")
}

/// Write the dataset as `<root>/classNN/imgNN.png`; returns the paths in
/// generation order.
pub fn write_dataset(config: &SynthConfig, root: &Path) -> Result<Vec<PathBuf>> {
    let images = generate(config)?;
    let mut paths = Vec::with_capacity(images.len());
    for img in &images {
        let dir = root.join(class_dir_name(img.class));
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(format!("img{:02}.png", img.index));
        img.image.save_png(&path)?;
        paths.push(path);
    }
    Ok(paths)
}
