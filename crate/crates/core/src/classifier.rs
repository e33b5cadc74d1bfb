//! Small two-layer detector h(E(·)) with analytic forward/backward passes
//! on block-pooled anchor inputs, plus a binary checkpoint format.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::Image;

pub const POOLED_SIDE: usize = 32;
pub const N_CLASSES: usize = 2;
pub const DEFAULT_HIDDEN: usize = 128;

const CKPT_MAGIC: &[u8] = b"FAIRDET-CKPT1\n";

/// Flat parameter vector θ with layer-shape metadata.
///
/// Layout: W1 (in_dim×hidden, `[i*hidden + j]`), b1 (hidden),
/// W2 (hidden×2, `[j*2 + k]`), b2 (2).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub theta: Vec<f64>,
    pub in_dim: usize,
    pub hidden: usize,
}

impl ClassifierParams {
    pub fn n_params(in_dim: usize, hidden: usize) -> usize {
        in_dim * hidden + hidden + hidden * N_CLASSES + N_CLASSES
    }

    pub fn zeros(in_dim: usize, hidden: usize) -> Self {
        ClassifierParams {
            theta: vec![0.0; Self::n_params(in_dim, hidden)],
            in_dim,
            hidden,
        }
    }

    /// He-style init: normal with std sqrt(2/fan_in) for weights, zero biases.
    pub fn init(in_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1217_ca5e);
        let mut p = Self::zeros(in_dim, hidden);
        let n1 = Normal::new(0.0, (2.0 / in_dim as f64).sqrt()).unwrap();
        for i in 0..in_dim * hidden {
            p.theta[i] = n1.sample(&mut rng);
        }
        let n2 = Normal::new(0.0, (2.0 / hidden as f64).sqrt()).unwrap();
        let off = p.w2_off();
        for i in 0..hidden * N_CLASSES {
            p.theta[off + i] = n2.sample(&mut rng);
        }
        p
    }

    #[inline]
    fn b1_off(&self) -> usize {
        self.in_dim * self.hidden
    }
    #[inline]
    fn w2_off(&self) -> usize {
        self.b1_off() + self.hidden
    }
    #[inline]
    fn b2_off(&self) -> usize {
        self.w2_off() + self.hidden * N_CLASSES
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(CKPT_MAGIC).map_err(|e| Error::io(path, e))?;
        f.write_all(format!("{} {} {}\n", self.in_dim, self.hidden, N_CLASSES).as_bytes())
            .map_err(|e| Error::io(path, e))?;
        for v in &self.theta {
            f.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if !bytes.starts_with(CKPT_MAGIC) {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let rest = &bytes[CKPT_MAGIC.len()..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Checkpoint("missing shape header".into()))?;
        let header = std::str::from_utf8(&rest[..nl])
            .map_err(|_| Error::Checkpoint("non-utf8 shape header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Checkpoint(format!("bad dim '{t}'"))))
            .collect::<Result<_>>()?;
        if dims.len() != 3 || dims[2] != N_CLASSES {
            return Err(Error::Checkpoint(format!("bad shape header '{header}'")));
        }
        let (in_dim, hidden) = (dims[0], dims[1]);
        let n = Self::n_params(in_dim, hidden);
        let payload = &rest[nl + 1..];
        if payload.len() != n * 8 {
            return Err(Error::Checkpoint(format!(
                "payload holds {} bytes, expected {}",
                payload.len(),
                n * 8
            )));
        }
        let theta = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ClassifierParams {
            theta,
            in_dim,
            hidden,
        })
    }
}

/// Block-mean pool a (2C-channel) image to 32×32 and flatten row-major.
pub fn downsample(img: &Image) -> Result<Vec<f64>> {
    let h = img.height;
    if img.height != img.width {
        return Err(Error::InvalidArg("downsample requires square input".into()));
    }
    if h < POOLED_SIDE || h & (h - 1) != 0 {
        return Err(Error::InvalidArg(format!(
            "side {h} must be a power of two >= {POOLED_SIDE}"
        )));
    }
    let block = h / POOLED_SIDE;
    let c = img.channels;
    let mut out = vec![0.0; POOLED_SIDE * POOLED_SIDE * c];
    let inv = 1.0 / (block * block) as f64;
    for py in 0..POOLED_SIDE {
        for px in 0..POOLED_SIDE {
            for ch in 0..c {
                let mut acc = 0.0;
                for y in 0..block {
                    for x in 0..block {
                        acc += img.at(py * block + y, px * block + x, ch);
                    }
                }
                out[(py * POOLED_SIDE + px) * c + ch] = acc * inv;
            }
        }
    }
    Ok(out)
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub inputs: Vec<Vec<f64>>,
    pub pre_act: Vec<Vec<f64>>,
    pub hidden_act: Vec<Vec<f64>>,
    pub logits: Vec<[f64; N_CLASSES]>,
    pub probs: Vec<[f64; N_CLASSES]>,
}

fn softmax(logits: &[f64; N_CLASSES]) -> [f64; N_CLASSES] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

pub fn forward(params: &ClassifierParams, batch: &[Vec<f64>]) -> Result<ForwardCache> {
    let (d, h) = (params.in_dim, params.hidden);
    let w1 = &params.theta[..params.b1_off()];
    let b1 = &params.theta[params.b1_off()..params.w2_off()];
    let w2 = &params.theta[params.w2_off()..params.b2_off()];
    let b2 = &params.theta[params.b2_off()..];
    let mut cache = ForwardCache {
        inputs: Vec::with_capacity(batch.len()),
        pre_act: Vec::with_capacity(batch.len()),
        hidden_act: Vec::with_capacity(batch.len()),
        logits: Vec::with_capacity(batch.len()),
        probs: Vec::with_capacity(batch.len()),
    };
    for x in batch {
        if x.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "input length {} != in_dim {d}",
                x.len()
            )));
        }
        let mut pre = b1.to_vec();
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                let row = &w1[i * h..(i + 1) * h];
                for (p, &w) in pre.iter_mut().zip(row) {
                    *p += xi * w;
                }
            }
        }
        let act: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
        let mut logits = [b2[0], b2[1]];
        for (j, &a) in act.iter().enumerate() {
            if a != 0.0 {
                logits[0] += a * w2[j * N_CLASSES];
                logits[1] += a * w2[j * N_CLASSES + 1];
            }
        }
        cache.probs.push(softmax(&logits));
        cache.logits.push(logits);
        cache.pre_act.push(pre);
        cache.hidden_act.push(act);
        cache.inputs.push(x.clone());
    }
    Ok(cache)
}

/// Analytic gradients summed over the batch, given upstream dLoss/dlogits.
pub fn backward(
    params: &ClassifierParams,
    cache: &ForwardCache,
    dlogits: &[[f64; N_CLASSES]],
) -> Result<Vec<f64>> {
    if dlogits.len() != cache.inputs.len() {
        return Err(Error::ShapeMismatch(format!(
            "upstream for {} samples, cache holds {}",
            dlogits.len(),
            cache.inputs.len()
        )));
    }
    let (d, h) = (params.in_dim, params.hidden);
    let w2 = &params.theta[params.w2_off()..params.b2_off()];
    let mut grad = vec![0.0; params.theta.len()];
    let (b1_off, w2_off, b2_off) = (params.b1_off(), params.w2_off(), params.b2_off());
    let mut dpre = vec![0.0; h];
    for (s, dz) in dlogits.iter().enumerate() {
        let act = &cache.hidden_act[s];
        let pre = &cache.pre_act[s];
        let x = &cache.inputs[s];
        grad[b2_off] += dz[0];
        grad[b2_off + 1] += dz[1];
        for j in 0..h {
            grad[w2_off + j * N_CLASSES] += act[j] * dz[0];
            grad[w2_off + j * N_CLASSES + 1] += act[j] * dz[1];
            let dh = w2[j * N_CLASSES] * dz[0] + w2[j * N_CLASSES + 1] * dz[1];
            dpre[j] = if pre[j] > 0.0 { dh } else { 0.0 };
            grad[b1_off + j] += dpre[j];
        }
        for i in 0..d {
            let xi = x[i];
            if xi != 0.0 {
                let row = &mut grad[i * h..(i + 1) * h];
                for (g, &dp) in row.iter_mut().zip(dpre.iter()) {
                    *g += xi * dp;
                }
            }
        }
    }
    Ok(grad)
}

/// Softmax probability of class 1 ("real") for one pooled input.
pub fn predict_score(params: &ClassifierParams, input: &[f64]) -> Result<f64> {
    let cache = forward(params, std::slice::from_ref(&input.to_vec()))?;
    Ok(cache.probs[0][1])
}

/// Downsample then score an anchor image.
pub fn predict_score_image(params: &ClassifierParams, img: &Image) -> Result<f64> {
    predict_score(params, &downsample(img)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Range;
    use rand::{Rng, SeedableRng};

    #[test]
    fn downsample_constant_and_identity() {
        let img = Image::new(64, 64, 6, vec![0.7; 64 * 64 * 6], Range::Signed).unwrap();
        let v = downsample(&img).unwrap();
        assert_eq!(v.len(), 6 * 32 * 32);
        assert!(v.iter().all(|&x| (x - 0.7).abs() < 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<f64> = (0..32 * 32).map(|_| rng.gen::<f64>()).collect();
        let img = Image::new(32, 32, 1, data.clone(), Range::Unit01).unwrap();
        assert_eq!(downsample(&img).unwrap(), data);
    }

    #[test]
    fn downsample_block_mean() {
        let mut img = Image::zeros(64, 64, 1, Range::Signed);
        // fill one 2x2 pooling cell with ones
        *img.at_mut(10, 10, 0) = 1.0;
        *img.at_mut(10, 11, 0) = 1.0;
        *img.at_mut(11, 10, 0) = 1.0;
        *img.at_mut(11, 11, 0) = 1.0;
        let v = downsample(&img).unwrap();
        assert_eq!(v[5 * 32 + 5], 1.0);
        assert_eq!(v.iter().filter(|&&x| x != 0.0).count(), 1);
    }

    #[test]
    fn downsample_rejects_small() {
        let img = Image::zeros(16, 16, 1, Range::Unit01);
        assert!(downsample(&img).is_err());
    }

    #[test]
    fn zero_params_give_half_half() {
        let p = ClassifierParams::zeros(8, 4);
        let cache = forward(&p, &[vec![0.3; 8]]).unwrap();
        assert_eq!(cache.probs[0], [0.5, 0.5]);
        assert_eq!(predict_score(&p, &vec![0.1; 8]).unwrap(), 0.5);
    }

    #[test]
    fn bias_only_softmax() {
        let mut p = ClassifierParams::zeros(4, 3);
        let b2 = p.b2_off();
        p.theta[b2] = 2.0; // logits (2, 0)
        let cache = forward(&p, &[vec![0.0; 4]]).unwrap();
        let e2 = 2.0f64.exp();
        assert!((cache.probs[0][0] - e2 / (e2 + 1.0)).abs() < 1e-12);
        assert!((cache.probs[0][1] - 1.0 / (e2 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariance() {
        let a = softmax(&[1.3, -0.2]);
        let b = softmax(&[1.3 + 100.0, -0.2 + 100.0]);
        assert!((a[0] - b[0]).abs() < 1e-12);
        assert!((a[0] + a[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_upstream_zero_grad_and_linearity() {
        let p = ClassifierParams::init(8, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let batch: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..8).map(|_| rng.gen::<f64>() - 0.5).collect())
            .collect();
        let cache = forward(&p, &batch).unwrap();
        let g0 = backward(&p, &cache, &vec![[0.0, 0.0]; 3]).unwrap();
        assert!(g0.iter().all(|&v| v == 0.0));

        let up: Vec<[f64; 2]> = (0..3).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        let g_all = backward(&p, &cache, &up).unwrap();
        let mut g_sum = vec![0.0; p.theta.len()];
        for s in 0..3 {
            let c1 = forward(&p, &batch[s..s + 1]).unwrap();
            let g1 = backward(&p, &c1, &up[s..s + 1]).unwrap();
            for (a, b) in g_sum.iter_mut().zip(&g1) {
                *a += b;
            }
        }
        for (a, b) in g_all.iter().zip(&g_sum) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for draw in 0..3 {
            let mut p = ClassifierParams::init(10, 6, 100 + draw);
            let batch: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..10).map(|_| rng.gen::<f64>() - 0.5).collect())
                .collect();
            let up: Vec<[f64; 2]> = (0..4)
                .map(|_| [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5])
                .collect();
            let cache = forward(&p, &batch).unwrap();
            let grad = backward(&p, &cache, &up).unwrap();
            let loss = |p: &ClassifierParams| -> f64 {
                let c = forward(p, &batch).unwrap();
                c.logits
                    .iter()
                    .zip(&up)
                    .map(|(l, u)| l[0] * u[0] + l[1] * u[1])
                    .sum()
            };
            let n = p.theta.len();
            for _ in 0..40 {
                let i = rng.gen_range(0..n);
                let h = 1e-5;
                let orig = p.theta[i];
                p.theta[i] = orig + h;
                let lp = loss(&p);
                p.theta[i] = orig - h;
                let lm = loss(&p);
                p.theta[i] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let denom = fd.abs().max(grad[i].abs()).max(1e-6);
                assert!(
                    (fd - grad[i]).abs() / denom < 1e-4,
                    "coord {i}: fd {fd} vs analytic {}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn score_monotone_in_logit_margin() {
        let mut prev = -1.0;
        for margin in [-3.0, -1.0, 0.0, 1.0, 3.0] {
            let s = softmax(&[0.0, margin])[1];
            assert!(s > prev);
            prev = s;
        }
    }

    #[test]
    fn checkpoint_roundtrip_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = ClassifierParams::init(12, 5, 77);
        let path = dir.path().join("m.ckpt");
        p.save(&path).unwrap();
        let q = ClassifierParams::load(&path).unwrap();
        assert_eq!(p, q);

        // corrupt the payload length
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 8);
        let bad = dir.path().join("bad.ckpt");
        std::fs::write(&bad, bytes).unwrap();
        assert!(matches!(
            ClassifierParams::load(&bad),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn determinism() {
        let p = ClassifierParams::init(8, 4, 1);
        let batch = vec![vec![0.2; 8], vec![-0.1; 8]];
        let a = forward(&p, &batch).unwrap();
        let b = forward(&p, &batch).unwrap();
        assert_eq!(a.logits, b.logits);
        assert_eq!(a.probs, b.probs);
    }
}
