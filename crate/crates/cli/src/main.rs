//! `fairdet` — command-line interface over the fairness-aware detection
//! toolkit: dataset generation, the motivation distance experiment,
//! training, evaluation, and ablations.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fairdet_core::ablation;
use fairdet_core::anchor::ReferenceSet;
use fairdet_core::classifier::ClassifierParams;
use fairdet_core::error::Error;
use fairdet_core::eval::PerturbKind;
use fairdet_core::optim::{self, Method};
use fairdet_core::sag::DistanceMode;
use fairdet_core::synth::{self, Sample, Triplet, TripletCfg};

mod config;

#[derive(Parser)]
#[command(name = "fairdet", version, about = "fairness-aware deepfake detection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic triplet dataset.
    Gen(GenArgs),
    /// Average fake-target vs target-donor distances over a dataset.
    Motivate(MotivateArgs),
    /// Train a detector and write checkpoint + history.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Run an ablation family and write its CSV.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of triplets (three images each).
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory for PPM files and manifest.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    side: usize,
    #[arg(long, default_value_t = 0.25)]
    rho: f64,
    #[arg(long, default_value_t = 0.08)]
    amp: f64,
    #[arg(long, default_value_t = 4)]
    period: usize,
    #[arg(long, default_value_t = 0.01)]
    noise_std: f64,
}

#[derive(Args)]
struct MotivateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// pixel | power | sag
    #[arg(long)]
    mode: String,
    /// Number of triplets to average over (default: all).
    #[arg(long)]
    i: Option<usize>,
    /// Where to append the CSV row (default: motivation.csv beside the manifest).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonCfg,
}

/// Flags shared by the model-facing commands; every one of them overrides
/// the config file.
#[derive(Args, Default)]
struct CommonCfg {
    /// key = value config file; flags win on conflict.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra dotted-key overrides, repeatable: --set loss.lambda=0.005
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Stage order as a comma list, e.g. patch,residual,frequency.
    #[arg(long)]
    order: Option<String>,
    /// Patch side length for the shuffle stage.
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tau_train: Option<f64>,
    #[arg(long)]
    tau_eval: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    seed_data: Option<u64>,
    #[arg(long)]
    seed_init: Option<u64>,
    #[arg(long)]
    seed_mask: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// ori | naive | ours
    #[arg(long)]
    method: String,
    /// Directory receiving checkpoint.bin and history.csv.
    #[arg(long)]
    out_dir: PathBuf,
    /// Fraction of triplets used for training; the rest evaluate.
    #[arg(long, default_value_t = 0.7)]
    train_frac: f64,
    #[arg(long, default_value_t = 1)]
    split_seed: u64,
    #[command(flatten)]
    common: CommonCfg,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// kind:severity, e.g. gaussianblur:3 or brightnesscontrast:2.
    #[arg(long)]
    perturb: Option<String>,
    /// anchored | raw — how inputs are presented to the model.
    #[arg(long, default_value = "anchored")]
    input_mode: String,
    /// Optional CSV file to append the report row to.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonCfg,
}

#[derive(Args)]
struct AblateArgs {
    /// order | component | lambda
    #[arg(long)]
    which: String,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0.7)]
    train_frac: f64,
    #[arg(long, default_value_t = 1)]
    split_seed: u64,
    #[command(flatten)]
    common: CommonCfg,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 1,
        Error::InvalidArg(_) | Error::RangeContract(_) | Error::ShapeMismatch(_) => 2,
        Error::NonFinite { .. } => 3,
        Error::Parse { .. } | Error::ParseLine { .. } | Error::Checkpoint(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Motivate(a) => cmd_motivate(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn cmd_gen(a: GenArgs) -> Result<(), Error> {
    if a.n == 0 {
        return Err(Error::InvalidArg("--n must be positive".into()));
    }
    let cfg = TripletCfg {
        side: a.side,
        channels: 3,
        rho: a.rho,
        amp: a.amp,
        period: a.period,
        noise_std: a.noise_std,
    };
    let canonical = format!(
        "cmd=gen\nn={}\nseed={}\nside={}\nrho={}\namp={}\nperiod={}\nnoise_std={}\n",
        a.n, a.seed, cfg.side, cfg.rho, cfg.amp, cfg.period, cfg.noise_std
    );
    println!("config_hash={}", fairdet_core::confighash(&canonical));
    synth::gen_dataset(a.n, a.seed, &cfg, &a.out)?;
    println!("manifest={}", a.out.join("manifest.csv").display());
    Ok(())
}

/// Group manifest rows back into triplets for the motivation experiment.
fn load_triplets(manifest_path: &Path) -> Result<Vec<Triplet>, Error> {
    let manifest = synth::load_manifest(manifest_path)?;
    let dir = synth::manifest_dir(manifest_path);
    let samples = synth::load_samples(&manifest, &dir)?;
    let mut by_id: std::collections::BTreeMap<usize, [Option<(Sample, u64)>; 3]> =
        Default::default();
    for (row, sample) in manifest.rows.iter().zip(samples) {
        let slot = match row.role {
            synth::Role::Target => 0,
            synth::Role::Donor => 1,
            synth::Role::Fake => 2,
        };
        by_id.entry(row.triplet_id).or_default()[slot] = Some((sample, row.seed));
    }
    let mut out = Vec::with_capacity(by_id.len());
    for (id, slots) in by_id {
        let [t, d, f] = slots;
        let (Some(t), Some(d), Some(f)) = (t, d, f) else {
            return Err(Error::InvalidArg(format!(
                "triplet {id} is missing a role in the manifest"
            )));
        };
        out.push(Triplet {
            target: t.0.image,
            donor: d.0.image,
            fake: f.0.image,
            seed: t.1,
            cfg: TripletCfg::default(),
        });
    }
    Ok(out)
}

fn cmd_motivate(a: MotivateArgs) -> Result<(), Error> {
    let mode = DistanceMode::parse(&a.mode)?;
    let triplets = load_triplets(&a.manifest)?;
    let count = a.i.unwrap_or(triplets.len());
    if count == 0 || count > triplets.len() {
        return Err(Error::InvalidArg(format!(
            "--i {count} outside 1..={}",
            triplets.len()
        )));
    }
    let side = triplets[0].target.height;
    let resolved = config::ResolvedConfig::load(&a.common, Method::Ours, side)?;
    let canonical = format!(
        "cmd=motivate\nmode={}\ncount={}\npatch={}\nsigma={}\n",
        a.mode.trim().to_ascii_lowercase(),
        count,
        resolved.train.sag.patch,
        resolved.train.sag.denoise.sigma
    );
    println!("config_hash={}", fairdet_core::confighash(&canonical));
    let (ft, td) = fairdet_core::sag::motivation_experiment(
        &triplets,
        mode,
        count,
        resolved.train.sag.patch,
        &resolved.train.sag.denoise,
    )?;
    println!("d_fake_target={ft} d_target_donor={td}");
    let out = a
        .out
        .unwrap_or_else(|| synth::manifest_dir(&a.manifest).join("motivation.csv"));
    let mut text = if out.exists() {
        std::fs::read_to_string(&out).map_err(|e| Error::io(&out, e))?
    } else {
        String::from("mode,count,d_fake_target,d_target_donor\n")
    };
    text.push_str(&format!("{},{count},{ft},{td}\n", mode_name(mode)));
    std::fs::write(&out, text).map_err(|e| Error::io(&out, e))?;
    Ok(())
}

fn mode_name(mode: DistanceMode) -> &'static str {
    match mode {
        DistanceMode::Pixel => "pixel",
        DistanceMode::Power => "power",
        DistanceMode::Sag => "sag",
    }
}

fn load_split(
    manifest_path: &Path,
    train_frac: f64,
    split_seed: u64,
) -> Result<(Vec<Sample>, Vec<Sample>), Error> {
    let manifest = synth::load_manifest(manifest_path)?;
    let dir = synth::manifest_dir(manifest_path);
    let (train_m, eval_m) = synth::split(&manifest, train_frac, split_seed)?;
    Ok((
        synth::load_samples(&train_m, &dir)?,
        synth::load_samples(&eval_m, &dir)?,
    ))
}

fn cmd_train(a: TrainArgs) -> Result<(), Error> {
    let method = Method::parse(&a.method)?;
    let (train_set, eval_set) = load_split(&a.manifest, a.train_frac, a.split_seed)?;
    if train_set.is_empty() || eval_set.is_empty() {
        return Err(Error::InvalidArg(
            "--train-frac leaves an empty train or eval split".into(),
        ));
    }
    let side = train_set[0].image.height;
    let resolved = config::ResolvedConfig::load(&a.common, method, side)?;
    for w in &resolved.warnings {
        eprintln!("warning: {w}");
    }
    let cfg = &resolved.train;
    println!("config_hash={}", cfg.config_hash());

    let refs = ReferenceSet::from_samples(&train_set)?;
    let (params, history) = optim::train(cfg, &train_set, &refs, &eval_set)?;

    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let ckpt = a.out_dir.join("checkpoint.bin");
    params.save(&ckpt)?;
    let hist_path = a.out_dir.join("history.csv");
    std::fs::write(&hist_path, history.to_csv()).map_err(|e| Error::io(&hist_path, e))?;

    let report = optim::evaluate_with_config(&params, cfg, &eval_set, &refs, cfg.seeds.data, None)?;
    println!(
        "final auc={} metric_naive={} metric_star={} best_epoch={}",
        report.auc, report.metric_naive, report.metric_star, history.best_epoch
    );
    println!("checkpoint={}", ckpt.display());
    Ok(())
}

fn parse_perturb(s: &str) -> Result<(PerturbKind, u8), Error> {
    let (kind, sev) = s.split_once(':').ok_or_else(|| {
        Error::InvalidArg(format!("--perturb wants kind:severity, got '{s}'"))
    })?;
    let kind = PerturbKind::parse(kind)?;
    let sev: u8 = sev
        .parse()
        .map_err(|_| Error::InvalidArg(format!("bad severity '{sev}'")))?;
    Ok((kind, sev))
}

fn cmd_eval(a: EvalArgs) -> Result<(), Error> {
    let params = ClassifierParams::load(&a.checkpoint)?;
    let manifest = synth::load_manifest(&a.manifest)?;
    let dir = synth::manifest_dir(&a.manifest);
    let samples = synth::load_samples(&manifest, &dir)?;
    if samples.is_empty() {
        return Err(Error::InvalidArg("empty manifest".into()));
    }
    let side = samples[0].image.height;
    let input_mode = match a.input_mode.trim().to_ascii_lowercase().as_str() {
        "anchored" => fairdet_core::eval::InputMode::Anchored,
        "raw" => fairdet_core::eval::InputMode::Raw,
        other => {
            return Err(Error::InvalidArg(format!("unknown input mode '{other}'")));
        }
    };
    let expected_in_dim =
        2 * samples[0].image.channels * fairdet_core::classifier::POOLED_SIDE.pow(2);
    if params.in_dim != expected_in_dim {
        return Err(Error::Checkpoint(format!(
            "checkpoint in_dim {} does not match data in_dim {expected_in_dim}",
            params.in_dim
        )));
    }
    let resolved = config::ResolvedConfig::load(&a.common, Method::Ours, side)?;
    let cfg = &resolved.train;
    let perturbation = a.perturb.as_deref().map(parse_perturb).transpose()?;
    let canonical = format!(
        "cmd=eval\nseed={}\ninput_mode={}\nperturb={}\n{}",
        a.seed,
        a.input_mode.trim().to_ascii_lowercase(),
        a.perturb.as_deref().unwrap_or("none"),
        cfg.canonical()
    );
    println!("config_hash={}", fairdet_core::confighash(&canonical));

    let refs = ReferenceSet::from_samples(&samples)?;
    let report = fairdet_core::eval::evaluate(
        &params,
        &samples,
        &refs,
        a.seed,
        &cfg.loss,
        &cfg.sag,
        input_mode,
        cfg.batch_size,
        perturbation,
    )?;
    println!("{}", report.to_json());
    if let Some(out) = &a.out {
        let mut text = if out.exists() {
            std::fs::read_to_string(out).map_err(|e| Error::io(out, e))?
        } else {
            format!("{}\n", fairdet_core::eval::EvalReport::csv_header())
        };
        text.push_str(&report.to_csv_row());
        text.push('\n');
        std::fs::write(out, text).map_err(|e| Error::io(out, e))?;
    }
    Ok(())
}

fn cmd_ablate(a: AblateArgs) -> Result<(), Error> {
    let (train_set, eval_set) = load_split(&a.manifest, a.train_frac, a.split_seed)?;
    if train_set.is_empty() || eval_set.is_empty() {
        return Err(Error::InvalidArg("empty train or eval split".into()));
    }
    let side = train_set[0].image.height;
    let resolved = config::ResolvedConfig::load(&a.common, Method::Ours, side)?;
    let base = &resolved.train;
    println!("config_hash={}", base.config_hash());
    let refs = ReferenceSet::from_samples(&train_set)?;

    let rows = match a.which.trim().to_ascii_lowercase().as_str() {
        "order" => ablation::run_order_ablation(base, &train_set, &refs, &eval_set, a.repeats)?,
        "component" => {
            ablation::run_component_ablation(base, &train_set, &refs, &eval_set, a.repeats)?
        }
        "lambda" => ablation::run_lambda_sweep(base, &train_set, &refs, &eval_set, a.repeats)?,
        other => {
            return Err(Error::InvalidArg(format!(
                "--which must be order|component|lambda, got '{other}'"
            )));
        }
    };
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let out = a
        .out_dir
        .join(format!("ablation_{}.csv", a.which.trim().to_ascii_lowercase()));
    std::fs::write(&out, ablation::ablation_csv(&rows)).map_err(|e| Error::io(&out, e))?;
    for r in &rows {
        println!(
            "{} auc={} metric_naive={} metric_star={}",
            r.variant, r.auc, r.metric_naive, r.metric_star
        );
    }
    println!("csv={}", out.display());
    Ok(())
}
