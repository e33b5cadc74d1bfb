//! Ablation drivers: stage-order permutations, component removals, and the
//! fairness-weight sweep. Each variant is trained from scratch over a few
//! seed repeats and summarized by medians.

use crate::anchor::ReferenceSet;
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::optim::{self, TrainConfig};
use crate::sag::{Stage, StageOrder};
use crate::synth::Sample;

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub config_hash: String,
    pub variant: String,
    pub auc: f64,
    pub metric_naive: f64,
    pub metric_star: f64,
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("config_hash,variant,auc,metric_naive,metric_star\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.config_hash, r.variant, r.auc, r.metric_naive, r.metric_star
        ));
    }
    out
}

fn median(mut vals: Vec<f64>) -> f64 {
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    }
}

/// Train `config` under `repeats` shifted seeds and reduce the evaluation
/// numbers to their medians.
pub fn run_variant(
    config: &TrainConfig,
    variant: &str,
    train_set: &[Sample],
    reference_set: &ReferenceSet,
    eval_set: &[Sample],
    repeats: usize,
) -> Result<AblationRow> {
    if repeats == 0 {
        return Err(Error::InvalidArg("repeats must be positive".into()));
    }
    let mut aucs = Vec::with_capacity(repeats);
    let mut naives = Vec::with_capacity(repeats);
    let mut stars = Vec::with_capacity(repeats);
    for r in 0..repeats as u64 {
        let mut cfg = config.clone();
        cfg.seeds.data = cfg.seeds.data.wrapping_add(1000 * r);
        cfg.seeds.init = cfg.seeds.init.wrapping_add(1000 * r);
        cfg.seeds.mask = cfg.seeds.mask.wrapping_add(1000 * r);
        let (params, _hist) = optim::train(&cfg, train_set, reference_set, eval_set)?;
        let report: EvalReport = optim::evaluate_with_config(
            &params,
            &cfg,
            eval_set,
            reference_set,
            cfg.seeds.data.wrapping_add(0x0e7a),
            None,
        )?;
        aucs.push(report.auc);
        naives.push(report.metric_naive);
        stars.push(report.metric_star);
    }
    Ok(AblationRow {
        config_hash: config.config_hash(),
        variant: variant.to_string(),
        auc: median(aucs),
        metric_naive: median(naives),
        metric_star: median(stars),
    })
}

/// All six stage orderings for the training-time fairness distance. The
/// evaluation metric keeps the default ordering so rows stay comparable.
pub fn run_order_ablation(
    base: &TrainConfig,
    train_set: &[Sample],
    reference_set: &ReferenceSet,
    eval_set: &[Sample],
    repeats: usize,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for order in StageOrder::all_orders() {
        let mut cfg = base.clone();
        cfg.train_stages = order.stages().to_vec();
        rows.push(run_variant(
            &cfg,
            &order.name().replace(',', "-"),
            train_set,
            reference_set,
            eval_set,
            repeats,
        )?);
    }
    Ok(rows)
}

/// The full method against single-component removals.
pub fn run_component_ablation(
    base: &TrainConfig,
    train_set: &[Sample],
    reference_set: &ReferenceSet,
    eval_set: &[Sample],
    repeats: usize,
) -> Result<Vec<AblationRow>> {
    let mut variants: Vec<(String, TrainConfig)> = vec![("full".into(), base.clone())];

    let mut no_sam = base.clone();
    no_sam.gamma = 0.0;
    variants.push(("no_sam".into(), no_sam));

    let mut no_anchor = base.clone();
    no_anchor.anchoring = false;
    no_anchor.alpha = 0.0;
    variants.push(("no_anchor".into(), no_anchor));

    for stage in [Stage::Patch, Stage::Residual, Stage::Frequency] {
        let mut cfg = base.clone();
        cfg.train_stages = base
            .train_stages
            .iter()
            .copied()
            .filter(|s| *s != stage)
            .collect();
        variants.push((format!("no_{}", stage.name()), cfg));
    }

    variants
        .iter()
        .map(|(name, cfg)| {
            run_variant(cfg, name, train_set, reference_set, eval_set, repeats)
        })
        .collect()
}

pub const LAMBDA_SWEEP: [f64; 5] = [0.0001, 0.0005, 0.001, 0.005, 0.01];

pub fn run_lambda_sweep(
    base: &TrainConfig,
    train_set: &[Sample],
    reference_set: &ReferenceSet,
    eval_set: &[Sample],
    repeats: usize,
) -> Result<Vec<AblationRow>> {
    LAMBDA_SWEEP
        .iter()
        .map(|&lambda| {
            let mut cfg = base.clone();
            cfg.loss.lambda = lambda;
            run_variant(
                &cfg,
                &format!("lambda_{lambda}"),
                train_set,
                reference_set,
                eval_set,
                repeats,
            )
        })
        .collect()
}
