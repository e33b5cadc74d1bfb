//! SGD with the sharpness-aware perturbation and the full training loop:
//! anchored batches, masked cross-entropy, the pairwise fairness term, and
//! best-iterate selection.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::anchor::{self, ReferenceSet};
use crate::classifier::{self, ClassifierParams, DEFAULT_HIDDEN, N_CLASSES, POOLED_SIDE};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, InputMode};
use crate::image;
use crate::losses::{self, LossConfig};
use crate::sag::{SagConfig, SagRepr, Stage};
use crate::synth::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Plain cross-entropy on unanchored inputs.
    Ori,
    /// Cross-entropy plus the raw-distance fairness term.
    Naive,
    /// Anchoring, masked CE, semantic-agnostic fairness term, SAM.
    Ours,
}

impl Method {
    pub fn parse(s: &str) -> Result<Method> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ori" => Ok(Method::Ori),
            "naive" => Ok(Method::Naive),
            "ours" => Ok(Method::Ours),
            other => Err(Error::InvalidArg(format!("unknown method '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Ori => "ori",
            Method::Naive => "naive",
            Method::Ours => "ours",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Seeds {
    pub data: u64,
    pub init: u64,
    pub mask: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            data: 1,
            init: 2,
            mask: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub method: Method,
    pub epochs: usize,
    pub batch_size: usize,
    /// Learning rate β.
    pub lr: f64,
    /// SAM perturbation magnitude γ.
    pub gamma: f64,
    /// Batch-level mask probability α.
    pub alpha: f64,
    pub loss: LossConfig,
    /// Evaluation pipeline (also the training pipeline unless
    /// `train_stages` narrows or reorders it).
    pub sag: SagConfig,
    /// Stage sequence used for the training-time fairness distance.
    pub train_stages: Vec<Stage>,
    /// Whether inputs are anchored against drawn references.
    pub anchoring: bool,
    pub hidden: usize,
    pub seeds: Seeds,
}

impl TrainConfig {
    /// Paper-style defaults for a given method at the given image side.
    pub fn for_method(method: Method, side: usize) -> Self {
        let sag = SagConfig::default_for_side(side);
        let mut loss = LossConfig::default();
        match method {
            Method::Ori => loss.lambda = 0.0,
            Method::Naive => loss.tau_train = 0.0001,
            Method::Ours => {}
        }
        TrainConfig {
            method,
            epochs: 20,
            batch_size: 32,
            lr: 5e-4,
            gamma: if method == Method::Ours { 0.05 } else { 0.0 },
            alpha: if method == Method::Ours { 0.2 } else { 0.0 },
            loss,
            train_stages: sag.order.stages().to_vec(),
            sag,
            anchoring: method == Method::Ours,
            hidden: DEFAULT_HIDDEN,
            seeds: Seeds::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::InvalidArg(
                "batch_size must be >= 2 (pairwise terms need pairs)".into(),
            ));
        }
        if self.lr <= 0.0 {
            return Err(Error::InvalidArg("learning rate must be positive".into()));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidArg("gamma must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArg("alpha must lie in [0,1]".into()));
        }
        self.loss.validate()
    }

    /// Canonical key=value rendering, used for hashing and reproducibility.
    pub fn canonical(&self) -> String {
        format!(
            "method={}\nepochs={}\nbatch_size={}\nlr={}\ngamma={}\nalpha={}\nlambda={}\ntau_train={}\ntau_eval={}\norder={}\ntrain_stages={}\npatch={}\nsigma={}\nanchoring={}\nhidden={}\nseed_data={}\nseed_init={}\nseed_mask={}\n",
            self.method.name(),
            self.epochs,
            self.batch_size,
            self.lr,
            self.gamma,
            self.alpha,
            self.loss.lambda,
            self.loss.tau_train,
            self.loss.tau_eval,
            self.sag.order.name(),
            self.train_stages
                .iter()
                .map(|s| s.name())
                .collect::<Vec<_>>()
                .join(","),
            self.sag.patch,
            self.sag.denoise.sigma,
            self.anchoring,
            self.hidden,
            self.seeds.data,
            self.seeds.init,
            self.seeds.mask,
        )
    }

    pub fn config_hash(&self) -> String {
        crate::confighash(&self.canonical())
    }
}

#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total: f64,
    pub ce: f64,
    pub ind: f64,
    pub auc: f64,
    pub metric_naive: f64,
    pub metric_star: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// Index of the record with the lowest recorded total objective.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn csv_header() -> &'static str {
        "epoch,total,ce,ind,auc,metric_naive,metric_star"
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::csv_header());
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.epoch, r.total, r.ce, r.ind, r.auc, r.metric_naive, r.metric_star
            ));
        }
        out
    }
}

/// SAM perturbation: γ·g/‖g‖₂, zero at (numerically) zero gradients.
pub fn sam_epsilon(grad: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArg("non-finite gradient in sam_epsilon".into()));
    }
    let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Ok(vec![0.0; grad.len()]);
    }
    let scale = gamma / norm;
    Ok(grad.iter().map(|v| v * scale).collect())
}

/// θ − β·g elementwise.
pub fn sgd_step(theta: &[f64], grad: &[f64], beta: f64) -> Result<Vec<f64>> {
    if theta.len() != grad.len() {
        return Err(Error::ShapeMismatch(format!(
            "theta {} vs grad {}",
            theta.len(),
            grad.len()
        )));
    }
    Ok(theta.iter().zip(grad).map(|(t, g)| t - beta * g).collect())
}

/// One training batch frozen into an objective of θ: masked cross-entropy
/// plus the λ-weighted pairwise fairness hinge over fixed distances.
pub struct BatchObjective<'a> {
    pub pooled: &'a [Vec<f64>],
    pub labels: &'a [u8],
    pub mask: bool,
    /// Symmetric pairwise distances; `None` disables the fairness term.
    pub dists: Option<&'a [Vec<f64>]>,
    pub lambda: f64,
    pub tau: f64,
}

impl BatchObjective<'_> {
    pub fn value(&self, params: &ClassifierParams) -> Result<(f64, f64, f64)> {
        let cache = classifier::forward(params, self.pooled)?;
        let ce = losses::ce_star(&cache.probs, self.labels, self.mask)?;
        let ind = match self.dists {
            Some(d) if self.lambda != 0.0 => {
                let scores: Vec<f64> = cache.probs.iter().map(|p| p[1]).collect();
                losses::ind_with_distances(&scores, d, self.tau)?
            }
            _ => 0.0,
        };
        Ok((losses::total_loss(ce, ind, self.lambda), ce, ind))
    }

    /// Analytic ∇θ of the total objective plus its loss components.
    pub fn grad(&self, params: &ClassifierParams) -> Result<(Vec<f64>, f64, f64, f64)> {
        let cache = classifier::forward(params, self.pooled)?;
        let n = self.pooled.len() as f64;
        let ce = losses::ce_star(&cache.probs, self.labels, self.mask)?;
        let mut dlogits: Vec<[f64; N_CLASSES]> = Vec::with_capacity(self.pooled.len());
        for (p, &y) in cache.probs.iter().zip(self.labels) {
            let target = if self.mask {
                [0.5, 0.5]
            } else {
                let mut t = [0.0, 0.0];
                t[y as usize] = 1.0;
                t
            };
            dlogits.push([(p[0] - target[0]) / n, (p[1] - target[1]) / n]);
        }

        let mut ind = 0.0;
        if let Some(d) = self.dists {
            if self.lambda != 0.0 {
                let scores: Vec<f64> = cache.probs.iter().map(|p| p[1]).collect();
                ind = losses::ind_with_distances(&scores, d, self.tau)?;
                let m = scores.len();
                let pairs = (m * (m - 1) / 2) as f64;
                for i in 0..m {
                    let mut g = 0.0;
                    for j in 0..m {
                        if i == j {
                            continue;
                        }
                        let gap = scores[i] - scores[j];
                        if gap.abs() - self.tau * d[i][j] > 0.0 {
                            g += gap.signum();
                        }
                    }
                    g /= pairs;
                    // d p1 / d logits = p1·p0 · (−1, +1)
                    let pp = cache.probs[i][0] * cache.probs[i][1];
                    dlogits[i][0] -= self.lambda * g * pp;
                    dlogits[i][1] += self.lambda * g * pp;
                }
            }
        }
        let grad = classifier::backward(params, &cache, &dlogits)?;
        Ok((grad, losses::total_loss(ce, ind, self.lambda), ce, ind))
    }
}

/// Whether the gradient-direction perturbation raises the objective at
/// least as much as a random same-norm direction.
pub fn sam_ascent_check<F>(
    objective: F,
    theta: &[f64],
    grad: &[f64],
    gamma: f64,
    seed: u64,
) -> Result<bool>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let eps = sam_epsilon(grad, gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dir: Vec<f64> = (0..theta.len())
        .map(|_| {
            let u1: f64 = rng.gen::<f64>().max(1e-300);
            let u2: f64 = rng.gen::<f64>();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    for v in &mut dir {
        *v *= gamma / norm;
    }
    let at = |delta: &[f64]| {
        let p: Vec<f64> = theta.iter().zip(delta).map(|(t, d)| t + d).collect();
        objective(&p)
    };
    Ok(at(&eps)? >= at(&dir)?)
}

fn mix_seed(a: u64, b: u64, c: u64) -> u64 {
    let mut h = a ^ 0x9e3779b97f4a7c15;
    for v in [b, c] {
        h ^= v.wrapping_add(0x9e3779b97f4a7c15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
        h = h.wrapping_mul(0xff51afd7ed558ccd);
    }
    h
}

fn distance_matrix_from_reprs(reprs: &[SagRepr]) -> Result<Vec<Vec<f64>>> {
    let n = reprs.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n - 1 {
        for j in i + 1..n {
            let v = crate::sag::repr_distance(&reprs[i], &reprs[j])?;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    Ok(d)
}

fn distance_matrix_pixel(samples: &[&Sample]) -> Result<Vec<Vec<f64>>> {
    let n = samples.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n - 1 {
        for j in i + 1..n {
            let v = image::euclidean_distance(&samples[i].image, &samples[j].image)?;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    Ok(d)
}

/// The training loop: per batch, build anchored inputs, compute the
/// masked CE and fairness terms, take a SAM-perturbed SGD step; returns the
/// best iterate by lowest epoch-mean objective plus the per-epoch history.
pub fn train(
    config: &TrainConfig,
    train_set: &[Sample],
    reference_set: &ReferenceSet,
    eval_set: &[Sample],
) -> Result<(ClassifierParams, TrainHistory)> {
    config.validate()?;
    if train_set.is_empty() || eval_set.is_empty() {
        return Err(Error::InvalidArg("train and eval sets must be nonempty".into()));
    }
    let side = train_set[0].image.height;
    let channels = train_set[0].image.channels;
    let in_dim = 2 * channels * POOLED_SIDE * POOLED_SIDE;
    let mut params = ClassifierParams::init(in_dim, config.hidden, config.seeds.init);

    let mut history = TrainHistory::default();
    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let input_mode = if config.anchoring {
        InputMode::Anchored
    } else {
        InputMode::Raw
    };
    let eval_seed = mix_seed(config.seeds.data, 0xe7a1, 0);

    for epoch in 0..config.epochs {
        // epoch-shuffled data order
        let mut idx: Vec<usize> = (0..train_set.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seeds.data, epoch as u64, 0xda7a));
        for i in (1..idx.len()).rev() {
            let j = rng.gen_range(0..=i);
            idx.swap(i, j);
        }

        let (mut e_total, mut e_ce, mut e_ind, mut n_batches) = (0.0, 0.0, 0.0, 0usize);
        for (b, chunk) in idx.chunks(config.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let batch_seed = mix_seed(config.seeds.mask, epoch as u64, b as u64);

            // model inputs
            let (inputs, mask) = if config.anchoring {
                let owned: Vec<Sample> = batch.iter().map(|s| (*s).clone()).collect();
                let ab = anchor::make_batch(&owned, reference_set, config.alpha, batch_seed)?;
                (ab.inputs, ab.mask)
            } else {
                let inputs = batch
                    .iter()
                    .map(|s| anchor::anchor_with(&s.image, None))
                    .collect::<Result<Vec<_>>>()?;
                (inputs, false)
            };
            let pooled: Vec<Vec<f64>> = inputs
                .iter()
                .map(classifier::downsample)
                .collect::<Result<_>>()?;

            // fairness distances
            let dists = match config.method {
                Method::Ori => None,
                Method::Naive => Some(distance_matrix_pixel(&batch)?),
                Method::Ours => {
                    let shuffle_seed = mix_seed(config.seeds.data, epoch as u64 ^ 0x5fa9, b as u64);
                    let reprs: Vec<SagRepr> = batch
                        .iter()
                        .map(|s| config.sag.transform_subset(&s.image, &config.train_stages, shuffle_seed))
                        .collect::<Result<_>>()?;
                    Some(distance_matrix_from_reprs(&reprs)?)
                }
            };
            let labels: Vec<u8> = batch.iter().map(|s| s.label).collect();
            let objective = BatchObjective {
                pooled: &pooled,
                labels: &labels,
                mask,
                dists: dists.as_deref(),
                lambda: config.loss.lambda,
                tau: config.loss.tau_train,
            };

            let (g1, total, ce, ind) = objective.grad(&params)?;
            if !total.is_finite() {
                return Err(Error::NonFinite {
                    batch: b,
                    msg: format!("objective {total} at epoch {epoch}"),
                });
            }
            let g = if config.gamma > 0.0 {
                let eps = sam_epsilon(&g1, config.gamma)?;
                let perturbed = ClassifierParams {
                    theta: params.theta.iter().zip(&eps).map(|(t, e)| t + e).collect(),
                    in_dim: params.in_dim,
                    hidden: params.hidden,
                };
                objective.grad(&perturbed)?.0
            } else {
                g1
            };
            params.theta = sgd_step(&params.theta, &g, config.lr)?;

            e_total += total;
            e_ce += ce;
            e_ind += ind;
            n_batches += 1;
        }
        if n_batches == 0 {
            return Err(Error::InvalidArg("no usable training batches".into()));
        }
        let (e_total, e_ce, e_ind) = (
            e_total / n_batches as f64,
            e_ce / n_batches as f64,
            e_ind / n_batches as f64,
        );

        let report = eval::evaluate(
            &params,
            eval_set,
            reference_set,
            eval_seed,
            &config.loss,
            &config.sag,
            input_mode,
            config.batch_size,
            None,
        )?;
        history.records.push(EpochRecord {
            epoch,
            total: e_total,
            ce: e_ce,
            ind: e_ind,
            auc: report.auc,
            metric_naive: report.metric_naive,
            metric_star: report.metric_star,
        });
        if e_total < best.0 {
            best = (e_total, params.clone(), epoch);
        }
        let _ = side; // shape bookkeeping only
    }
    history.best_epoch = best.2;
    Ok((best.1, history))
}

/// Evaluate a trained model with the configuration it was trained under.
pub fn evaluate_with_config(
    params: &ClassifierParams,
    config: &TrainConfig,
    eval_set: &[Sample],
    reference_set: &ReferenceSet,
    seed: u64,
    perturbation: Option<(eval::PerturbKind, u8)>,
) -> Result<EvalReport> {
    eval::evaluate(
        params,
        eval_set,
        reference_set,
        seed,
        &config.loss,
        &config.sag,
        if config.anchoring {
            InputMode::Anchored
        } else {
            InputMode::Raw
        },
        config.batch_size,
        perturbation,
    )
}
