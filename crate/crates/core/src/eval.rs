//! Detection-utility AUC, the single-reference inference protocol, and
//! robustness perturbations.

use serde::Serialize;

use crate::anchor::{self, ReferenceSet};
use crate::classifier::{self, ClassifierParams};
use crate::denoise::{self, DenoiseConfig};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::losses::{self, LossConfig};
use crate::sag::{SagConfig, SagRepr};
use crate::synth::Sample;

/// How eval samples are presented to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    /// concat([r̄, x − r̄]) with the drawn reference.
    Anchored,
    /// concat([0, x]); the convention for detectors trained without anchoring.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbKind {
    BrightnessContrast,
    GaussianBlur,
}

impl PerturbKind {
    pub fn parse(s: &str) -> Result<PerturbKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "brightnesscontrast" => Ok(PerturbKind::BrightnessContrast),
            "gaussianblur" => Ok(PerturbKind::GaussianBlur),
            other => Err(Error::InvalidArg(format!("unknown perturbation '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PerturbKind::BrightnessContrast => "brightnesscontrast",
            PerturbKind::GaussianBlur => "gaussianblur",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub auc: f64,
    pub metric_naive: f64,
    pub metric_star: f64,
    pub n_eval: usize,
    pub reference_id: String,
    pub perturbation: Option<(String, u8)>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn csv_header() -> &'static str {
        "auc,metric_naive,metric_star,n_eval,reference_id,perturbation"
    }

    pub fn to_csv_row(&self) -> String {
        let pert = match &self.perturbation {
            Some((k, s)) => format!("{k}:{s}"),
            None => String::new(),
        };
        format!(
            "{},{},{},{},{},{}",
            self.auc, self.metric_naive, self.metric_star, self.n_eval, self.reference_id, pert
        )
    }
}

/// Mann–Whitney AUC: fraction of (positive, negative) pairs ranked
/// correctly, ties counted one half. Rank-based O(n log n).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::InvalidArg("scores/labels mismatch".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArg(
            "AUC needs both classes present".into(),
        ));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks over tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// Severity ladders are fixed tables: contrast 1.1..1.5 with shift
/// 0.05..0.25, blur sigma 0.5..2.5.
pub fn perturb(img: &Image, kind: PerturbKind, severity: u8, _seed: u64) -> Result<Image> {
    if !(1..=5).contains(&severity) {
        return Err(Error::InvalidArg(format!(
            "severity {severity} outside 1..=5"
        )));
    }
    let s = severity as f64;
    match kind {
        PerturbKind::BrightnessContrast => {
            let factor = 1.0 + 0.1 * s;
            let shift = 0.05 * s;
            let data = img
                .data
                .iter()
                .map(|&v| (factor * (v - 0.5) + 0.5 + shift).clamp(0.0, 1.0))
                .collect();
            Image::new(img.height, img.width, img.channels, data, img.range)
        }
        PerturbKind::GaussianBlur => {
            let cfg = DenoiseConfig::with_sigma(0.5 * s);
            let mut out = denoise::denoise(img, &cfg)?;
            for v in &mut out.data {
                *v = v.clamp(0.0, 1.0);
            }
            Ok(out)
        }
    }
}

/// Single-reference evaluation: draw one reference by seed, score every
/// eval sample, and compute AUC plus both adapted fairness metrics over
/// batches of `batch_size`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    params: &ClassifierParams,
    eval_set: &[Sample],
    reference_set: &ReferenceSet,
    seed: u64,
    loss_cfg: &LossConfig,
    sag_cfg: &SagConfig,
    input_mode: InputMode,
    batch_size: usize,
    perturbation: Option<(PerturbKind, u8)>,
) -> Result<EvalReport> {
    if eval_set.is_empty() {
        return Err(Error::InvalidArg("empty eval set".into()));
    }
    let (reference, reference_id) = anchor::sample_reference(reference_set, None, seed)?;

    let mut images = Vec::with_capacity(eval_set.len());
    for (i, s) in eval_set.iter().enumerate() {
        let img = match perturbation {
            Some((kind, sev)) => perturb(&s.image, kind, sev, seed.wrapping_add(i as u64))?,
            None => s.image.clone(),
        };
        images.push(img);
    }

    let mut scores = Vec::with_capacity(eval_set.len());
    for img in &images {
        let input = match input_mode {
            InputMode::Anchored => anchor::make_anchor(img, reference)?,
            InputMode::Raw => anchor::anchor_with(img, None)?,
        };
        scores.push(classifier::predict_score_image(params, &input)?);
    }
    let labels: Vec<u8> = eval_set.iter().map(|s| s.label).collect();
    let auc_val = auc(&scores, &labels)?;

    // per-batch metrics, then mean over batches
    let bs = batch_size.max(2);
    let (mut m_naive, mut m_star, mut n_batches) = (0.0, 0.0, 0usize);
    for (b, chunk) in (0..images.len()).collect::<Vec<_>>().chunks(bs).enumerate() {
        if chunk.len() < 2 {
            continue;
        }
        let batch_scores: Vec<f64> = chunk.iter().map(|&i| scores[i]).collect();
        let batch_imgs: Vec<Image> = chunk.iter().map(|&i| images[i].clone()).collect();
        m_naive += losses::metric_naive_adapted(&batch_scores, &batch_imgs, loss_cfg.tau_eval)?;
        let batch_seed = seed
            .wrapping_mul(0x9e3779b97f4a7c15)
            .wrapping_add(b as u64 + 1);
        let reprs: Vec<SagRepr> = batch_imgs
            .iter()
            .map(|im| sag_cfg.transform(im, batch_seed))
            .collect::<Result<_>>()?;
        m_star += losses::metric_star_adapted(&batch_scores, &reprs, loss_cfg.tau_eval)?;
        n_batches += 1;
    }
    if n_batches == 0 {
        return Err(Error::InvalidArg(
            "eval set too small for pairwise metrics".into(),
        ));
    }

    Ok(EvalReport {
        auc: auc_val,
        metric_naive: m_naive / n_batches as f64,
        metric_star: m_star / n_batches as f64,
        n_eval: eval_set.len(),
        reference_id: reference_id.to_string(),
        perturbation: perturbation.map(|(k, s)| (k.name().to_string(), s)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Range;

    /// O(n²) pair-counting oracle with ties at one half.
    pub fn auc_bruteforce(scores: &[f64], labels: &[u8]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] == 1 && labels[j] == 0 {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_known_values() {
        assert_eq!(
            auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(),
            1.0
        );
        assert_eq!(auc(&[0.5, 0.5, 0.5, 0.5], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert_eq!(
            auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(),
            0.75
        );
    }

    #[test]
    fn auc_single_class_rejected() {
        assert!(auc(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn auc_matches_bruteforce_with_ties() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.gen_range(4..30);
            let scores: Vec<f64> = (0..n).map(|_| (rng.gen::<f64>() * 8.0).round() / 8.0).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
            labels[0] = 0;
            labels[1] = 1;
            let fast = auc(&scores, &labels).unwrap();
            let slow = auc_bruteforce(&scores, &labels);
            assert!((fast - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let scores = [0.1, 0.4, 0.35, 0.8, 0.4];
        let labels = [0, 0, 1, 1, 1];
        let a = auc(&scores, &labels).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
        assert_eq!(a, auc(&mapped, &labels).unwrap());
    }

    #[test]
    fn perturb_ladders() {
        let img = Image::new(8, 8, 1, vec![0.5; 64], Range::Unit01).unwrap();
        // severity-1 blur of a constant image is unchanged
        let b = perturb(&img, PerturbKind::GaussianBlur, 1, 0).unwrap();
        for v in &b.data {
            assert!((v - 0.5).abs() < 1e-12);
        }
        assert!(perturb(&img, PerturbKind::GaussianBlur, 0, 0).is_err());
        assert!(perturb(&img, PerturbKind::GaussianBlur, 6, 0).is_err());
    }

    #[test]
    fn brightness_shift_moves_mean_exactly() {
        let img = Image::new(4, 4, 1, vec![0.4; 16], Range::Unit01).unwrap();
        let p = perturb(&img, PerturbKind::BrightnessContrast, 1, 0).unwrap();
        // factor 1.1, shift 0.05: 1.1*(0.4-0.5)+0.5+0.05 = 0.44
        for v in &p.data {
            assert!((v - 0.44).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbation_severity_monotone() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for kind in [PerturbKind::BrightnessContrast, PerturbKind::GaussianBlur] {
            for _ in 0..10 {
                let data: Vec<f64> = (0..256).map(|_| rng.gen::<f64>()).collect();
                let img = Image::new(16, 16, 1, data, Range::Unit01).unwrap();
                let mut prev = -1.0;
                for sev in 1..=5u8 {
                    let p = perturb(&img, kind, sev, 0).unwrap();
                    let d = crate::image::euclidean_distance(&p, &img).unwrap();
                    assert!(d >= prev - 1e-12, "{kind:?} severity {sev}");
                    prev = d;
                }
            }
        }
    }

    #[test]
    fn zero_params_report() {
        use crate::synth::{gen_triplets, triplets_to_samples, TripletCfg};
        let triplets = gen_triplets(4, 3, &TripletCfg::default()).unwrap();
        let samples = triplets_to_samples(&triplets);
        let refset = ReferenceSet::from_samples(&samples).unwrap();
        let params = ClassifierParams::zeros(6 * 32 * 32, 8);
        let report = evaluate(
            &params,
            &samples,
            &refset,
            7,
            &LossConfig::default(),
            &SagConfig::default_for_side(64),
            InputMode::Anchored,
            6,
            None,
        )
        .unwrap();
        assert_eq!(report.auc, 0.5);
        assert_eq!(report.metric_naive, 0.0);
        assert_eq!(report.metric_star, 0.0);
        let report2 = evaluate(
            &params,
            &samples,
            &refset,
            7,
            &LossConfig::default(),
            &SagConfig::default_for_side(64),
            InputMode::Anchored,
            6,
            None,
        )
        .unwrap();
        assert_eq!(report.to_json(), report2.to_json());
    }
}
