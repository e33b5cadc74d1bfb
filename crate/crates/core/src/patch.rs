//! Non-overlapping patch partition, seeded shuffle, reconstruction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone)]
pub struct PatchGrid {
    pub patches: Vec<Image>,
    /// Patches per side.
    pub k: usize,
    /// Patch side length in pixels.
    pub p: usize,
    pub source_shape: (usize, usize, usize),
}

/// Split a square image into K×K non-overlapping P×P tiles, row-major.
pub fn partition(img: &Image, p: usize) -> Result<PatchGrid> {
    if img.height != img.width {
        return Err(Error::InvalidArg(format!(
            "partition requires a square image, got {}x{}",
            img.height, img.width
        )));
    }
    if p == 0 || img.height % p != 0 {
        return Err(Error::InvalidArg(format!(
            "patch size {p} does not divide side {}",
            img.height
        )));
    }
    let k = img.height / p;
    let c = img.channels;
    let mut patches = Vec::with_capacity(k * k);
    for ty in 0..k {
        for tx in 0..k {
            let mut data = Vec::with_capacity(p * p * c);
            for y in 0..p {
                for x in 0..p {
                    for ch in 0..c {
                        data.push(img.at(ty * p + y, tx * p + x, ch));
                    }
                }
            }
            patches.push(Image {
                height: p,
                width: p,
                channels: c,
                data,
                range: img.range,
            });
        }
    }
    Ok(PatchGrid {
        patches,
        k,
        p,
        source_shape: (img.height, img.width, img.channels),
    })
}

/// Uniform seeded permutation of the tiles (Fisher–Yates).
pub fn shuffle_patches(grid: &PatchGrid, seed: u64) -> PatchGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.patches.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    let patches = perm.iter().map(|&i| grid.patches[i].clone()).collect();
    PatchGrid {
        patches,
        k: grid.k,
        p: grid.p,
        source_shape: grid.source_shape,
    }
}

/// Place the tiles back row-major into an image of the source shape.
pub fn reconstruct(grid: &PatchGrid) -> Result<Image> {
    let (h, w, c) = grid.source_shape;
    if grid.patches.len() != grid.k * grid.k || grid.k * grid.p != h || grid.k * grid.p != w {
        return Err(Error::ShapeMismatch(format!(
            "inconsistent grid: {} patches, k={}, p={}, source {h}x{w}",
            grid.patches.len(),
            grid.k,
            grid.p
        )));
    }
    let range = grid.patches.first().map(|t| t.range).unwrap();
    let mut out = Image::zeros(h, w, c, range);
    out.range = range;
    for (idx, tile) in grid.patches.iter().enumerate() {
        if tile.height != grid.p || tile.width != grid.p || tile.channels != c {
            return Err(Error::ShapeMismatch(format!("tile {idx} has wrong shape")));
        }
        let ty = idx / grid.k;
        let tx = idx % grid.k;
        for y in 0..grid.p {
            for x in 0..grid.p {
                for ch in 0..c {
                    *out.at_mut(ty * grid.p + y, tx * grid.p + x, ch) = tile.at(y, x, ch);
                }
            }
        }
    }
    Ok(out)
}

/// partition → shuffle(seed) → reconstruct in one call.
pub fn shuffle_image(img: &Image, p: usize, seed: u64) -> Result<Image> {
    reconstruct(&shuffle_patches(&partition(img, p)?, seed))
}
