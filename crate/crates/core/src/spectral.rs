//! Radix-2 2-D DFT, power spectrum, and complex distances.
//!
//! Convention: unnormalized forward transform,
//! `F[u,v] = Σ_y Σ_x f[y,x]·exp(-2πi(uy/H + vx/W))`.

use crate::error::{Error, Result};
use crate::image::{Image, Range};

/// One channel of a 2-D spectrum, row-major.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub height: usize,
    pub width: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Spectrum {
    pub fn same_shape(&self, other: &Spectrum) -> bool {
        self.height == other.height && self.width == other.width
    }
}

fn is_pow2(n: usize) -> bool {
    n > 0 && n & (n - 1) == 0
}

/// In-place iterative radix-2 Cooley–Tukey on interleaved (re, im) slices.
fn fft1d(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    if n <= 1 {
        return;
    }
    // bit-reversal permutation
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * std::f64::consts::PI / len as f64;
        let (wr, wi) = (ang.cos(), ang.sin());
        let mut i = 0;
        while i < n {
            let (mut cr, mut ci) = (1.0f64, 0.0f64);
            for k in 0..len / 2 {
                let (ur, ui) = (re[i + k], im[i + k]);
                let (vr, vi) = (
                    re[i + k + len / 2] * cr - im[i + k + len / 2] * ci,
                    re[i + k + len / 2] * ci + im[i + k + len / 2] * cr,
                );
                re[i + k] = ur + vr;
                im[i + k] = ui + vi;
                re[i + k + len / 2] = ur - vr;
                im[i + k + len / 2] = ui - vi;
                let ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
            i += len;
        }
        len <<= 1;
    }
}

/// Forward 2-D DFT of one real H×W channel via row-column radix-2 passes.
pub fn fft2d(matrix: &[f64], height: usize, width: usize) -> Result<Spectrum> {
    if matrix.len() != height * width {
        return Err(Error::ShapeMismatch(format!(
            "matrix length {} != {height}x{width}",
            matrix.len()
        )));
    }
    if !is_pow2(height) || !is_pow2(width) {
        return Err(Error::InvalidArg(format!(
            "fft2d requires power-of-two dims, got {height}x{width}"
        )));
    }
    let mut re = matrix.to_vec();
    let mut im = vec![0.0; matrix.len()];
    // rows
    for y in 0..height {
        fft1d(
            &mut re[y * width..(y + 1) * width],
            &mut im[y * width..(y + 1) * width],
        );
    }
    // columns
    let mut cr = vec![0.0; height];
    let mut ci = vec![0.0; height];
    for x in 0..width {
        for y in 0..height {
            cr[y] = re[y * width + x];
            ci[y] = im[y * width + x];
        }
        fft1d(&mut cr, &mut ci);
        for y in 0..height {
            re[y * width + x] = cr[y];
            im[y * width + x] = ci[y];
        }
    }
    Ok(Spectrum {
        height,
        width,
        re,
        im,
    })
}

/// Per-channel forward transforms of an image.
pub fn fft2d_image(img: &Image) -> Result<Vec<Spectrum>> {
    (0..img.channels)
        .map(|c| fft2d(&img.channel_matrix(c), img.height, img.width))
        .collect()
}

/// |𝓕(X)|² per channel, returned as a Signed image of the same shape.
pub fn power_spectrum(img: &Image) -> Result<Image> {
    let spectra = fft2d_image(img)?;
    let mut out = Image::zeros(img.height, img.width, img.channels, Range::Signed);
    for (c, sp) in spectra.iter().enumerate() {
        for y in 0..img.height {
            for x in 0..img.width {
                let i = y * img.width + x;
                *out.at_mut(y, x, c) = sp.re[i] * sp.re[i] + sp.im[i] * sp.im[i];
            }
        }
    }
    Ok(out)
}

/// ℓ2 norm of the complex difference, summed over a channel list.
pub fn complex_l2_distance(a: &[Spectrum], b: &[Spectrum]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "channel counts {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut acc = 0.0;
    for (sa, sb) in a.iter().zip(b) {
        if !sa.same_shape(sb) {
            return Err(Error::ShapeMismatch(format!(
                "spectrum {}x{} vs {}x{}",
                sa.height, sa.width, sb.height, sb.width
            )));
        }
        for i in 0..sa.re.len() {
            let dr = sa.re[i] - sb.re[i];
            let di = sa.im[i] - sb.im[i];
            acc += dr * dr + di * di;
        }
    }
    Ok(acc.sqrt())
}
