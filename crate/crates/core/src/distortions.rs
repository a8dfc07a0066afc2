//! Image corruptions for metric-versus-distortion studies: additive Gaussian
//! noise, salt-and-pepper noise, Gaussian blur and black rectangular
//! occlusions.
//!
//! Randomness is drawn per image from ChaCha8 stream `image_index` of
//! `seed`, so results do not depend on how images are scheduled.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::io::{read_array, write_npy, NpyDtype};
use crate::synthetic::rng_for;

/// `n × h × w × c` images with values in `[0, 1]`, stored in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBatch {
    n: usize,
    h: usize,
    w: usize,
    c: usize,
    data: Vec<f64>,
}

impl ImageBatch {
    pub fn new(n: usize, h: usize, w: usize, c: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * h * w * c {
            return Err(Error::DimensionMismatch {
                expected: n * h * w * c,
                found: data.len(),
            });
        }
        if n == 0 || h == 0 || w == 0 || c == 0 {
            return Err(invalid("image batch dimensions must be positive"));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self { n, h, w, c, data })
    }

    pub fn filled(n: usize, h: usize, w: usize, c: usize, value: f64) -> Result<Self> {
        Self::new(n, h, w, c, vec![value; n * h * w * c])
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.h, self.w, self.c)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn image_len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let len = self.image_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn get(&self, i: usize, y: usize, x: usize, ch: usize) -> f64 {
        self.data[((i * self.h + y) * self.w + x) * self.c + ch]
    }

    fn map_images(&self, mut f: impl FnMut(usize, &mut [f64])) -> Self {
        let mut out = self.clone();
        let len = self.image_len();
        for (i, img) in out.data.chunks_exact_mut(len).enumerate() {
            f(i, img);
        }
        out
    }

    /// Loads a 4-D array file.
    pub fn load(path: &Path) -> Result<Self> {
        let arr = read_array(path)?;
        match arr.shape[..] {
            [n, h, w, c] => Self::new(n, h, w, c, arr.data),
            _ => Err(Error::Rank {
                expected: 4,
                found: arr.shape.len(),
            }),
        }
    }

    pub fn save(&self, path: &Path, dtype: NpyDtype) -> Result<()> {
        write_npy(path, &[self.n, self.h, self.w, self.c], &self.data, dtype)
    }
}

/// Adds i.i.d. `N(0, σ²)` noise to every entry and clamps to `[0, 1]`.
pub fn gaussian_noise(b: &ImageBatch, sigma: f64, seed: u64) -> Result<ImageBatch> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("noise sigma must be nonnegative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(b.clone());
    }
    Ok(b.map_images(|i, img| {
        let mut rng = rng_for(seed, i as u64);
        for v in img.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = (*v + sigma * z).clamp(0.0, 1.0);
        }
    }))
}

/// Sets a fraction `p` of the pixels to black or white with equal odds.
///
/// A pixel's channels change together. Every pixel consumes the same random
/// draws whatever `p` is, so with a fixed seed the corrupted pixel sets are
/// nested as `p` grows.
pub fn salt_pepper(b: &ImageBatch, p: f64, seed: u64) -> Result<ImageBatch> {
    salt_pepper_with(b, p, seed, false)
}

/// Like [`salt_pepper`]; with `per_channel` each channel is selected and
/// colored on its own.
pub fn salt_pepper_with(b: &ImageBatch, p: f64, seed: u64, per_channel: bool) -> Result<ImageBatch> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("salt-and-pepper fraction {p} outside [0, 1]")));
    }
    let unit = if per_channel { 1 } else { b.c };
    Ok(b.map_images(|i, img| {
        let mut rng = rng_for(seed, i as u64);
        for px in img.chunks_exact_mut(unit) {
            let u: f64 = rng.random();
            let white: bool = rng.random();
            if u < p {
                px.fill(if white { 1.0 } else { 0.0 });
            }
        }
    }))
}

/// Normalized discrete Gaussian kernel of odd length; a delta for `σ = 0`.
pub fn gaussian_kernel(sigma: f64, size: usize) -> Result<Vec<f64>> {
    if size % 2 == 0 {
        return Err(invalid(format!("kernel size must be odd, got {size}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("blur sigma must be nonnegative, got {sigma}")));
    }
    let r = (size / 2) as isize;
    let mut k = vec![0.0; size];
    if sigma == 0.0 {
        k[r as usize] = 1.0;
        return Ok(k);
    }
    for (t, v) in (-r..=r).zip(k.iter_mut()) {
        *v = (-((t * t) as f64) / (2.0 * sigma * sigma)).exp();
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    Ok(k)
}

/// Mirror index into `0..n` without repeating the edge sample.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Separable Gaussian blur per channel with reflective borders.
pub fn gaussian_blur(b: &ImageBatch, sigma: f64, kernel_size: usize) -> Result<ImageBatch> {
    let kernel = gaussian_kernel(sigma, kernel_size)?;
    if sigma == 0.0 {
        return Ok(b.clone());
    }
    let (_, h, w, c) = b.shape();
    let r = (kernel_size / 2) as isize;
    let mut tmp = vec![0.0; h * w * c];
    Ok(b.map_images(|_, img| {
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    let mut acc = 0.0;
                    for (t, kv) in (-r..=r).zip(&kernel) {
                        let xx = reflect(x as isize + t, w);
                        acc += kv * img[(y * w + xx) * c + ch];
                    }
                    tmp[(y * w + x) * c + ch] = acc;
                }
            }
        }
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    let mut acc = 0.0;
                    for (t, kv) in (-r..=r).zip(&kernel) {
                        let yy = reflect(y as isize + t, h);
                        acc += kv * tmp[(yy * w + x) * c + ch];
                    }
                    img[(y * w + x) * c + ch] = acc.clamp(0.0, 1.0);
                }
            }
        }
    }))
}

/// Paints `count` black `⌊scale·h⌋ × ⌊scale·w⌋` rectangles per image at
/// uniform positions fully inside the frame.
pub fn rect_occlusions(b: &ImageBatch, scale: f64, count: usize, seed: u64) -> Result<ImageBatch> {
    if !(0.0..=1.0).contains(&scale) {
        return Err(invalid(format!("occlusion scale {scale} outside [0, 1]")));
    }
    let (_, h, w, c) = b.shape();
    let rh = (scale * h as f64).floor() as usize;
    let rw = (scale * w as f64).floor() as usize;
    if rh == 0 || rw == 0 || count == 0 {
        return Ok(b.clone());
    }
    Ok(b.map_images(|i, img| {
        let mut rng = rng_for(seed, i as u64);
        for _ in 0..count {
            let top = rng.random_range(0..=h - rh);
            let left = rng.random_range(0..=w - rw);
            for y in top..top + rh {
                img[(y * w + left) * c..(y * w + left + rw) * c].fill(0.0);
            }
        }
    }))
}
