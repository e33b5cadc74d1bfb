//! Reference-set management, anchor-tuple construction, batch-level masking.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{Image, Range};
use crate::synth::Sample;

#[derive(Debug, Clone)]
pub struct ReferenceSet {
    pub refs: Vec<Image>,
    pub ids: Vec<String>,
}

impl ReferenceSet {
    pub fn new(refs: Vec<Image>, ids: Vec<String>) -> Result<Self> {
        if refs.is_empty() || refs.len() != ids.len() {
            return Err(Error::InvalidArg(format!(
                "reference set needs matching nonempty refs/ids, got {}/{}",
                refs.len(),
                ids.len()
            )));
        }
        let shape = (refs[0].height, refs[0].width, refs[0].channels);
        for r in &refs {
            if (r.height, r.width, r.channels) != shape {
                return Err(Error::ShapeMismatch(
                    "reference set images must share one shape".into(),
                ));
            }
        }
        Ok(ReferenceSet { refs, ids })
    }

    pub fn from_samples(samples: &[Sample]) -> Result<Self> {
        ReferenceSet::new(
            samples.iter().map(|s| s.image.clone()).collect(),
            samples.iter().map(|s| s.id.clone()).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }
}

/// Batch of 2C-channel anchor inputs sharing one mask draw.
#[derive(Debug, Clone)]
pub struct AnchorBatch {
    pub inputs: Vec<Image>,
    pub mask: bool,
    pub ref_ids: Vec<String>,
    pub labels: Vec<u8>,
}

/// Channel-axis concatenation [r, x − r]; reference channels first.
pub fn make_anchor(x: &Image, r: &Image) -> Result<Image> {
    if !x.same_shape(r) {
        return Err(Error::ShapeMismatch("anchor input/reference shapes differ".into()));
    }
    anchor_with(x, Some(r))
}

/// Anchor with an optional reference: `None` zeroes the reference channels
/// and leaves x itself in the residual slot (the unanchored input layout).
pub fn anchor_with(x: &Image, r: Option<&Image>) -> Result<Image> {
    let c = x.channels;
    let mut out = Image::zeros(x.height, x.width, 2 * c, Range::Signed);
    for y in 0..x.height {
        for xx in 0..x.width {
            for ch in 0..c {
                match r {
                    Some(r) => {
                        *out.at_mut(y, xx, ch) = r.at(y, xx, ch);
                        *out.at_mut(y, xx, c + ch) = x.at(y, xx, ch) - r.at(y, xx, ch);
                    }
                    None => {
                        *out.at_mut(y, xx, c + ch) = x.at(y, xx, ch);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Anchor with a drawn reference but zeroed reference channels (the masked
/// configuration): concat([0, x − r]).
pub fn anchor_masked(x: &Image, r: &Image) -> Result<Image> {
    if !x.same_shape(r) {
        return Err(Error::ShapeMismatch("anchor input/reference shapes differ".into()));
    }
    let c = x.channels;
    let mut out = Image::zeros(x.height, x.width, 2 * c, Range::Signed);
    for y in 0..x.height {
        for xx in 0..x.width {
            for ch in 0..c {
                *out.at_mut(y, xx, c + ch) = x.at(y, xx, ch) - r.at(y, xx, ch);
            }
        }
    }
    Ok(out)
}

/// Uniform seeded draw over the references, skipping `exclude_id`.
pub fn sample_reference<'a>(
    set: &'a ReferenceSet,
    exclude_id: Option<&str>,
    seed: u64,
) -> Result<(&'a Image, &'a str)> {
    let feasible: Vec<usize> = (0..set.len())
        .filter(|&i| exclude_id.map_or(true, |ex| set.ids[i] != ex))
        .collect();
    if feasible.is_empty() {
        return Err(Error::InvalidArg("no feasible reference to draw".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = feasible[rng.gen_range(0..feasible.len())];
    Ok((&set.refs[pick], &set.ids[pick]))
}

/// Build an anchor batch: one Bernoulli(α) draw decides the mask for the
/// whole batch; references are drawn per sample from derived seeds and
/// recorded even when masked.
pub fn make_batch(
    samples: &[Sample],
    set: &ReferenceSet,
    alpha: f64,
    seed: u64,
) -> Result<AnchorBatch> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArg(format!("alpha {alpha} outside [0,1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa11c_e5ed);
    let mask = rng.gen::<f64>() < alpha;
    let mut inputs = Vec::with_capacity(samples.len());
    let mut ref_ids = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let draw_seed = seed
            .wrapping_mul(0x9e3779b97f4a7c15)
            .wrapping_add(i as u64 + 1);
        let (r, rid) = sample_reference(set, Some(&s.id), draw_seed)?;
        let input = if mask {
            anchor_masked(&s.image, r)?
        } else {
            make_anchor(&s.image, r)?
        };
        inputs.push(input);
        ref_ids.push(rid.to_string());
    }
    Ok(AnchorBatch {
        inputs,
        mask,
        ref_ids,
        labels: samples.iter().map(|s| s.label).collect(),
    })
}
