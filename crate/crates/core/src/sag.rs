//! Semantic-agnostic transform: patch shuffle, residual extraction, and
//! frequency view composed in a configurable order, plus the pairwise
//! distance built on top of it.

use crate::denoise::{self, DenoiseConfig};
use crate::error::{Error, Result};
use crate::image::{self, Image};
use crate::patch;
use crate::spectral::{self, Spectrum};
use crate::synth::Triplet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Patch,
    Residual,
    Frequency,
}

impl Stage {
    pub fn parse(s: &str) -> Result<Stage> {
        match s.trim().to_ascii_lowercase().as_str() {
            "patch" => Ok(Stage::Patch),
            "residual" => Ok(Stage::Residual),
            "frequency" => Ok(Stage::Frequency),
            other => Err(Error::InvalidArg(format!("unknown stage '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Patch => "patch",
            Stage::Residual => "residual",
            Stage::Frequency => "frequency",
        }
    }
}

/// An ordering of the three pipeline stages, each appearing exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOrder(Vec<Stage>);

impl StageOrder {
    pub fn new(stages: Vec<Stage>) -> Result<StageOrder> {
        if stages.len() != 3 {
            return Err(Error::InvalidArg(format!(
                "stage order needs exactly 3 stages, got {}",
                stages.len()
            )));
        }
        for s in [Stage::Patch, Stage::Residual, Stage::Frequency] {
            if !stages.contains(&s) {
                return Err(Error::InvalidArg(format!("stage order missing {}", s.name())));
            }
        }
        Ok(StageOrder(stages))
    }

    /// Patch → Residual → Frequency.
    pub fn default_order() -> StageOrder {
        StageOrder(vec![Stage::Patch, Stage::Residual, Stage::Frequency])
    }

    /// Parse a comma list like `patch,residual,frequency`.
    pub fn parse(s: &str) -> Result<StageOrder> {
        let stages = s.split(',').map(Stage::parse).collect::<Result<Vec<_>>>()?;
        StageOrder::new(stages)
    }

    pub fn stages(&self) -> &[Stage] {
        &self.0
    }

    pub fn name(&self) -> String {
        self.0
            .iter()
            .map(|s| s.name())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// All six permutations, default order first.
    pub fn all_orders() -> Vec<StageOrder> {
        use Stage::*;
        [
            [Patch, Residual, Frequency],
            [Patch, Frequency, Residual],
            [Residual, Patch, Frequency],
            [Residual, Frequency, Patch],
            [Frequency, Patch, Residual],
            [Frequency, Residual, Patch],
        ]
        .iter()
        .map(|s| StageOrder(s.to_vec()))
        .collect()
    }
}

/// Output of the transform: complex per-channel spectra when Frequency is
/// the final stage, a real raster otherwise.
#[derive(Debug, Clone)]
pub enum SagRepr {
    Complex(Vec<Spectrum>),
    Real(Image),
}

impl SagRepr {
    pub fn is_complex(&self) -> bool {
        matches!(self, SagRepr::Complex(_))
    }
}

/// Distance between two transform outputs of the same kind.
pub fn repr_distance(a: &SagRepr, b: &SagRepr) -> Result<f64> {
    match (a, b) {
        (SagRepr::Complex(x), SagRepr::Complex(y)) => spectral::complex_l2_distance(x, y),
        (SagRepr::Real(x), SagRepr::Real(y)) => image::euclidean_distance(x, y),
        _ => Err(Error::ShapeMismatch(
            "mixed complex/real representations".into(),
        )),
    }
}

/// Apply an arbitrary stage sequence. Non-final Frequency stages hand the
/// real power spectrum to the stages after them.
pub fn transform_stages(
    img: &Image,
    stages: &[Stage],
    p: usize,
    cfg: &DenoiseConfig,
    batch_seed: u64,
) -> Result<SagRepr> {
    let mut cur = img.clone();
    for (i, stage) in stages.iter().enumerate() {
        let last = i + 1 == stages.len();
        match stage {
            Stage::Patch => {
                cur = patch::shuffle_image(&cur, p, batch_seed)?;
            }
            Stage::Residual => {
                cur = denoise::residual(&cur, cfg)?;
            }
            Stage::Frequency => {
                if last {
                    return Ok(SagRepr::Complex(spectral::fft2d_image(&cur)?));
                }
                cur = spectral::power_spectrum(&cur)?;
            }
        }
    }
    Ok(SagRepr::Real(cur))
}

/// The full three-stage transform in the configured order.
pub fn transform(
    img: &Image,
    order: &StageOrder,
    p: usize,
    cfg: &DenoiseConfig,
    batch_seed: u64,
) -> Result<SagRepr> {
    transform_stages(img, order.stages(), p, cfg, batch_seed)
}

/// Pairwise distance over transformed images; both sides share the batch
/// seed so patch shuffling applies the same permutation.
pub fn sag_distance(
    a: &Image,
    b: &Image,
    order: &StageOrder,
    p: usize,
    cfg: &DenoiseConfig,
    batch_seed: u64,
) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch("sag_distance inputs differ".into()));
    }
    let ra = transform(a, order, p, cfg, batch_seed)?;
    let rb = transform(b, order, p, cfg, batch_seed)?;
    repr_distance(&ra, &rb)
}

/// Everything the transform needs besides the image and the batch seed.
#[derive(Debug, Clone)]
pub struct SagConfig {
    pub order: StageOrder,
    pub patch: usize,
    pub denoise: DenoiseConfig,
}

impl SagConfig {
    pub fn new(order: StageOrder, patch: usize, denoise: DenoiseConfig) -> Self {
        SagConfig {
            order,
            patch,
            denoise,
        }
    }

    /// Default order with the patch size scaled to the image side (S/4).
    pub fn default_for_side(side: usize) -> Self {
        SagConfig {
            order: StageOrder::default_order(),
            patch: (side / 4).max(1),
            denoise: DenoiseConfig::default(),
        }
    }

    pub fn transform(&self, img: &Image, batch_seed: u64) -> Result<SagRepr> {
        transform(img, &self.order, self.patch, &self.denoise, batch_seed)
    }

    /// Transform with an explicit stage subset (component ablations).
    pub fn transform_subset(
        &self,
        img: &Image,
        stages: &[Stage],
        batch_seed: u64,
    ) -> Result<SagRepr> {
        transform_stages(img, stages, self.patch, &self.denoise, batch_seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMode {
    Pixel,
    Power,
    Sag,
}

impl DistanceMode {
    pub fn parse(s: &str) -> Result<DistanceMode> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pixel" => Ok(DistanceMode::Pixel),
            "power" => Ok(DistanceMode::Power),
            "sag" => Ok(DistanceMode::Sag),
            other => Err(Error::InvalidArg(format!("unknown mode '{other}'"))),
        }
    }
}

/// Average fake–target and target–donor distances over the first `count`
/// triplets, in the requested representation.
pub fn motivation_experiment(
    triplets: &[Triplet],
    mode: DistanceMode,
    count: usize,
    p: usize,
    cfg: &DenoiseConfig,
) -> Result<(f64, f64)> {
    if triplets.is_empty() {
        return Err(Error::InvalidArg("empty triplet list".into()));
    }
    if count == 0 || count > triplets.len() {
        return Err(Error::InvalidArg(format!(
            "count {count} outside 1..={}",
            triplets.len()
        )));
    }
    let order = StageOrder::default_order();
    let (mut d_ft, mut d_td) = (0.0, 0.0);
    for (i, t) in triplets.iter().take(count).enumerate() {
        let seed = t.seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(i as u64);
        let (ft, td) = match mode {
            DistanceMode::Pixel => (
                image::euclidean_distance(&t.fake, &t.target)?,
                image::euclidean_distance(&t.target, &t.donor)?,
            ),
            DistanceMode::Power => {
                let pf = spectral::power_spectrum(&t.fake)?;
                let pt = spectral::power_spectrum(&t.target)?;
                let pd = spectral::power_spectrum(&t.donor)?;
                (
                    image::euclidean_distance(&pf, &pt)?,
                    image::euclidean_distance(&pt, &pd)?,
                )
            }
            DistanceMode::Sag => (
                sag_distance(&t.fake, &t.target, &order, p, cfg, seed)?,
                sag_distance(&t.target, &t.donor, &order, p, cfg, seed)?,
            ),
        };
        d_ft += ft;
        d_td += td;
    }
    Ok((d_ft / count as f64, d_td / count as f64))
}
