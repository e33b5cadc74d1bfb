//! Separable Gaussian smoother D(·) and residual extraction X − D(X).

use crate::error::{Error, Result};
use crate::image::{Image, Range};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Border {
    /// Whole-sample symmetric reflection (edge pixel repeated); mass-preserving.
    Reflect,
}

#[derive(Debug, Clone, Copy)]
pub struct DenoiseConfig {
    pub kernel: Kernel,
    pub sigma: f64,
    pub border: Border,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            kernel: Kernel::Gaussian,
            sigma: 1.0,
            border: Border::Reflect,
        }
    }
}

impl DenoiseConfig {
    pub fn with_sigma(sigma: f64) -> Self {
        DenoiseConfig {
            sigma,
            ..Default::default()
        }
    }

    pub fn radius(&self) -> usize {
        (3.0 * self.sigma).ceil() as usize
    }

    /// Normalized 1-D kernel weights for offsets -radius..=radius.
    pub fn weights(&self) -> Vec<f64> {
        let r = self.radius() as isize;
        let mut w: Vec<f64> = (-r..=r)
            .map(|k| (-(k * k) as f64 / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let sum: f64 = w.iter().sum();
        for v in &mut w {
            *v /= sum;
        }
        w
    }
}

#[inline]
fn reflect(i: isize, n: isize) -> usize {
    // symmetric: -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Separable Gaussian convolution per channel with reflect borders.
pub fn denoise(img: &Image, cfg: &DenoiseConfig) -> Result<Image> {
    if cfg.sigma <= 0.0 {
        return Err(Error::InvalidArg(format!(
            "sigma must be positive, got {}",
            cfg.sigma
        )));
    }
    let w = cfg.weights();
    let r = cfg.radius() as isize;
    let (h, wid, c) = (img.height, img.width, img.channels);
    // horizontal pass
    let mut tmp = vec![0.0; img.data.len()];
    for y in 0..h {
        for x in 0..wid {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, &wk) in w.iter().enumerate() {
                    let xi = reflect(x as isize + k as isize - r, wid as isize);
                    acc += wk * img.at(y, xi, ch);
                }
                tmp[(y * wid + x) * c + ch] = acc;
            }
        }
    }
    // vertical pass
    let mut out = Image::zeros(h, wid, c, img.range);
    for y in 0..h {
        for x in 0..wid {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, &wk) in w.iter().enumerate() {
                    let yi = reflect(y as isize + k as isize - r, h as isize);
                    acc += wk * tmp[(yi * wid + x) * c + ch];
                }
                *out.at_mut(y, x, ch) = acc;
            }
        }
    }
    Ok(out)
}

/// High-pass residual X − D(X); output is range-tagged Signed.
pub fn residual(img: &Image, cfg: &DenoiseConfig) -> Result<Image> {
    let smooth = denoise(img, cfg)?;
    let data = img
        .data
        .iter()
        .zip(&smooth.data)
        .map(|(a, b)| a - b)
        .collect();
    Ok(Image {
        height: img.height,
        width: img.width,
        channels: img.channels,
        data,
        range: Range::Signed,
    })
}
