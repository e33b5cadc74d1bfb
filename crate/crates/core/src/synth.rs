//! Seeded synthetic target/donor/fake generator and dataset manifests.
//!
//! Targets and donors are smooth low-frequency fields; a fake is its target
//! with the central square blended toward the donor plus a global
//! checkerboard artifact, so it sits close to the target in pixel space but
//! carries a spectrum-localized fingerprint.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{self, Image, Range};

#[derive(Debug, Clone, Copy)]
pub struct TripletCfg {
    /// Image side length (power of two).
    pub side: usize,
    pub channels: usize,
    /// Fraction of image area taken from the donor blend.
    pub rho: f64,
    /// Checkerboard artifact amplitude.
    pub amp: f64,
    /// Checkerboard artifact period in pixels (even).
    pub period: usize,
    /// Per-pixel sensor-noise standard deviation.
    pub noise_std: f64,
}

impl Default for TripletCfg {
    fn default() -> Self {
        TripletCfg {
            side: 64,
            channels: 3,
            rho: 0.25,
            amp: 0.08,
            period: 4,
            noise_std: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Triplet {
    pub target: Image,
    pub donor: Image,
    pub fake: Image,
    pub seed: u64,
    pub cfg: TripletCfg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Target,
    Donor,
    Fake,
}

impl Role {
    pub fn name(&self) -> &'static str {
        match self {
            Role::Target => "target",
            Role::Donor => "donor",
            Role::Fake => "fake",
        }
    }

    pub fn parse(s: &str) -> Result<Role> {
        match s {
            "target" => Ok(Role::Target),
            "donor" => Ok(Role::Donor),
            "fake" => Ok(Role::Fake),
            other => Err(Error::InvalidArg(format!("unknown role '{other}'"))),
        }
    }

    /// Labels follow the fake→0, real→1 convention.
    pub fn label(&self) -> u8 {
        match self {
            Role::Fake => 0,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ManifestRow {
    pub path: String,
    pub label: u8,
    pub role: Role,
    pub triplet_id: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

/// An image with its label and a stable identifier, as consumed by training.
#[derive(Debug, Clone)]
pub struct Sample {
    pub image: Image,
    pub label: u8,
    pub id: String,
}

/// Smooth random field: per-channel DC level plus low-frequency sinusoids
/// plus small white noise, snapped to the 1/255 grid.
fn smooth_field(cfg: &TripletCfg, rng: &mut ChaCha8Rng) -> Image {
    let s = cfg.side;
    let mut img = Image::zeros(s, s, cfg.channels, Range::Unit01);
    for c in 0..cfg.channels {
        let dc = 0.30 + 0.40 * rng.gen::<f64>();
        let mut waves = Vec::new();
        for _ in 0..3 {
            let fy = rng.gen_range(1..=4) as f64;
            let fx = rng.gen_range(1..=4) as f64;
            let phase = rng.gen::<f64>() * std::f64::consts::TAU;
            let amp = 0.04 + 0.05 * rng.gen::<f64>();
            waves.push((fy, fx, phase, amp));
        }
        for y in 0..s {
            for x in 0..s {
                let mut v = dc;
                for &(fy, fx, phase, amp) in &waves {
                    let arg = std::f64::consts::TAU
                        * (fy * y as f64 / s as f64 + fx * x as f64 / s as f64)
                        + phase;
                    v += amp * arg.sin();
                }
                v += cfg.noise_std * gaussian(rng);
                *img.at_mut(y, x, c) = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
            }
        }
    }
    img
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller keeps the stream layout explicit and stable.
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn gen_triplet(seed: u64, cfg: &TripletCfg) -> Result<Triplet> {
    if !(cfg.side > 0 && cfg.side & (cfg.side - 1) == 0) {
        return Err(Error::InvalidArg(format!(
            "side must be a power of two, got {}",
            cfg.side
        )));
    }
    if !(0.0..=1.0).contains(&cfg.rho) {
        return Err(Error::InvalidArg(format!("rho {} outside [0,1]", cfg.rho)));
    }
    if cfg.amp < 0.0 {
        return Err(Error::InvalidArg("amp must be nonnegative".into()));
    }
    if cfg.period == 0 || cfg.period % 2 != 0 {
        return Err(Error::InvalidArg(format!(
            "period must be a positive even number, got {}",
            cfg.period
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545f4914f6cdd1d).wrapping_add(1));
    let target = smooth_field(cfg, &mut rng);
    let donor = smooth_field(cfg, &mut rng);

    let s = cfg.side;
    let square = ((s as f64) * cfg.rho.sqrt()).round() as usize;
    let off = (s - square) / 2;
    let half = cfg.period / 2;
    let mut fake = target.clone();
    for y in 0..s {
        for x in 0..s {
            let inside = y >= off && y < off + square && x >= off && x < off + square;
            let cb = if (y / half + x / half) % 2 == 0 {
                cfg.amp
            } else {
                -cfg.amp
            };
            for c in 0..cfg.channels {
                let base = if inside {
                    0.5 * target.at(y, x, c) + 0.5 * donor.at(y, x, c)
                } else {
                    target.at(y, x, c)
                };
                let v = if cfg.amp == 0.0 { base } else { base + cb };
                *fake.at_mut(y, x, c) = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
            }
        }
    }
    Ok(Triplet {
        target,
        donor,
        fake,
        seed,
        cfg: *cfg,
    })
}

/// Generate `n` triplets with per-triplet derived seeds.
pub fn gen_triplets(n: usize, seed: u64, cfg: &TripletCfg) -> Result<Vec<Triplet>> {
    (0..n)
        .map(|i| gen_triplet(seed.wrapping_add(i as u64), cfg))
        .collect()
}

/// Write PPM files plus a `manifest.csv` into `out_dir`.
pub fn gen_dataset(n: usize, seed: u64, cfg: &TripletCfg, out_dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut manifest = Manifest::default();
    for i in 0..n {
        let t = gen_triplet(seed.wrapping_add(i as u64), cfg)?;
        for (img, role) in [
            (&t.target, Role::Target),
            (&t.donor, Role::Donor),
            (&t.fake, Role::Fake),
        ] {
            let name = format!("t{i}_{}.ppm", role.name());
            let byte = image::quantize(img)?;
            image::save_ppm(&byte, &out_dir.join(&name))?;
            manifest.rows.push(ManifestRow {
                path: name,
                label: role.label(),
                role,
                triplet_id: i,
                seed: t.seed,
            });
        }
    }
    save_manifest(&manifest, &out_dir.join("manifest.csv"))?;
    Ok(manifest)
}

pub fn save_manifest(m: &Manifest, path: &Path) -> Result<()> {
    let mut out = String::from("path,label,role,triplet_id,seed\n");
    for r in &m.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.path,
            r.label,
            r.role.name(),
            r.triplet_id,
            r.seed
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "path,label,role,triplet_id,seed" {
                return Err(Error::ParseLine {
                    line: 1,
                    msg: format!("bad manifest header: {line}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(Error::ParseLine {
                line: i + 1,
                msg: format!("expected 5 fields, got {}", parts.len()),
            });
        }
        let parse_err = |msg: String| Error::ParseLine { line: i + 1, msg };
        rows.push(ManifestRow {
            path: parts[0].to_string(),
            label: parts[1]
                .parse()
                .map_err(|_| parse_err(format!("bad label {}", parts[1])))?,
            role: Role::parse(parts[2]).map_err(|e| parse_err(e.to_string()))?,
            triplet_id: parts[3]
                .parse()
                .map_err(|_| parse_err(format!("bad triplet_id {}", parts[3])))?,
            seed: parts[4]
                .parse()
                .map_err(|_| parse_err(format!("bad seed {}", parts[4])))?,
        });
    }
    Ok(Manifest { rows })
}

/// Split at triplet granularity so no triplet straddles the boundary.
pub fn split(manifest: &Manifest, train_frac: f64, seed: u64) -> Result<(Manifest, Manifest)> {
    if !(0.0..=1.0).contains(&train_frac) {
        return Err(Error::InvalidArg(format!(
            "train_frac {train_frac} outside [0,1]"
        )));
    }
    let mut ids: Vec<usize> = manifest.rows.iter().map(|r| r.triplet_id).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    for i in (1..ids.len()).rev() {
        let j = rng.gen_range(0..=i);
        ids.swap(i, j);
    }
    let n_train = (ids.len() as f64 * train_frac).round() as usize;
    let train_ids: std::collections::HashSet<usize> = ids[..n_train].iter().copied().collect();
    let (mut train, mut eval) = (Manifest::default(), Manifest::default());
    for r in &manifest.rows {
        if train_ids.contains(&r.triplet_id) {
            train.rows.push(r.clone());
        } else {
            eval.rows.push(r.clone());
        }
    }
    Ok((train, eval))
}

/// Materialize manifest rows as normalized Unit01 samples.
pub fn load_samples(manifest: &Manifest, base_dir: &Path) -> Result<Vec<Sample>> {
    manifest
        .rows
        .iter()
        .map(|r| {
            let raw = image::load_ppm(&base_dir.join(&r.path))?;
            Ok(Sample {
                image: image::normalize(&raw)?,
                label: r.label,
                id: r.path.clone(),
            })
        })
        .collect()
}

/// In-memory equivalent of gen_dataset + load_samples, manifest-ordered.
pub fn triplets_to_samples(triplets: &[Triplet]) -> Vec<Sample> {
    let mut out = Vec::with_capacity(triplets.len() * 3);
    for (i, t) in triplets.iter().enumerate() {
        for (img, role) in [
            (&t.target, Role::Target),
            (&t.donor, Role::Donor),
            (&t.fake, Role::Fake),
        ] {
            out.push(Sample {
                image: img.clone(),
                label: role.label(),
                id: format!("t{i}_{}.ppm", role.name()),
            });
        }
    }
    out
}

pub fn manifest_dir(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}
