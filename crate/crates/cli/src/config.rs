//! Config-file and flag resolution: defaults ← file ← --set ← named flags.

use std::path::Path;

use fairdet_core::error::{Error, Result};
use fairdet_core::optim::{Method, TrainConfig};
use fairdet_core::sag::StageOrder;

use crate::CommonCfg;

pub struct ResolvedConfig {
    pub train: TrainConfig,
    pub warnings: Vec<String>,
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArg(format!("bad value '{value}' for key '{key}'")))
}

/// Apply one dotted key; unknown keys are rejected by name.
fn apply_key(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "loss.lambda" => cfg.loss.lambda = parse_as(key, value)?,
        "loss.tau_train" => cfg.loss.tau_train = parse_as(key, value)?,
        "loss.tau_eval" => cfg.loss.tau_eval = parse_as(key, value)?,
        "train.epochs" => cfg.epochs = parse_as(key, value)?,
        "train.batch_size" => cfg.batch_size = parse_as(key, value)?,
        "train.lr" => cfg.lr = parse_as(key, value)?,
        "train.gamma" => cfg.gamma = parse_as(key, value)?,
        "train.alpha" => cfg.alpha = parse_as(key, value)?,
        "train.hidden" => cfg.hidden = parse_as(key, value)?,
        "sag.order" => {
            let order = StageOrder::parse(value)?;
            cfg.train_stages = order.stages().to_vec();
            cfg.sag.order = order;
        }
        "sag.patch" => cfg.sag.patch = parse_as(key, value)?,
        "denoise.sigma" => cfg.sag.denoise.sigma = parse_as(key, value)?,
        "seeds.data" => cfg.seeds.data = parse_as(key, value)?,
        "seeds.init" => cfg.seeds.init = parse_as(key, value)?,
        "seeds.mask" => cfg.seeds.mask = parse_as(key, value)?,
        other => {
            return Err(Error::InvalidArg(format!("unknown config key '{other}'")));
        }
    }
    Ok(())
}

fn apply_file(cfg: &mut TrainConfig, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::ParseLine {
                line: i + 1,
                msg: format!("expected key = value, got '{raw}'"),
            });
        };
        apply_key(cfg, key.trim(), value.trim()).map_err(|e| Error::ParseLine {
            line: i + 1,
            msg: e.to_string(),
        })?;
    }
    Ok(())
}

impl ResolvedConfig {
    pub fn load(common: &CommonCfg, method: Method, side: usize) -> Result<ResolvedConfig> {
        let mut cfg = TrainConfig::for_method(method, side);
        let mut warnings = Vec::new();

        if let Some(path) = &common.config {
            apply_file(&mut cfg, path)?;
        }
        for pair in &common.sets {
            let Some((key, value)) = pair.split_once('=') else {
                return Err(Error::InvalidArg(format!(
                    "--set wants KEY=VALUE, got '{pair}'"
                )));
            };
            apply_key(&mut cfg, key.trim(), value.trim())?;
        }

        let fairness_overridden = common.lambda.is_some()
            || common.tau_train.is_some()
            || common.sets.iter().any(|s| s.trim_start().starts_with("loss."));
        if let Some(order) = &common.order {
            let order = StageOrder::parse(order)?;
            cfg.train_stages = order.stages().to_vec();
            cfg.sag.order = order;
        }
        if let Some(v) = common.patch {
            cfg.sag.patch = v;
        }
        if let Some(v) = common.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = common.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = common.lr {
            cfg.lr = v;
        }
        if let Some(v) = common.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = common.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = common.lambda {
            cfg.loss.lambda = v;
        }
        if let Some(v) = common.tau_train {
            cfg.loss.tau_train = v;
        }
        if let Some(v) = common.tau_eval {
            cfg.loss.tau_eval = v;
        }
        if let Some(v) = common.hidden {
            cfg.hidden = v;
        }
        if let Some(v) = common.seed_data {
            cfg.seeds.data = v;
        }
        if let Some(v) = common.seed_init {
            cfg.seeds.init = v;
        }
        if let Some(v) = common.seed_mask {
            cfg.seeds.mask = v;
        }

        if method == Method::Ori {
            cfg.loss.lambda = 0.0;
            if fairness_overridden {
                warnings.push(
                    "method ori has no fairness term; lambda/tau settings are ignored".into(),
                );
            }
        }
        cfg.validate()?;
        Ok(ResolvedConfig {
            train: cfg,
            warnings,
        })
    }
}
