//! Individual-fairness deepfake-detection toolkit: synthetic face-swap
//! data, the semantic-agnostic transform (patch shuffle / residual /
//! frequency), anchored classification with masked cross-entropy, the
//! pairwise fairness losses, SAM-perturbed training, evaluation, and the
//! ablation drivers.

pub mod ablation;
pub mod anchor;
pub mod classifier;
pub mod denoise;
pub mod error;
pub mod eval;
pub mod image;
pub mod losses;
pub mod optim;
pub mod patch;
pub mod sag;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use image::{Image, Range};

use sha2::{Digest, Sha256};

/// First 12 hex characters of the SHA-256 of a canonical config rendering.
pub fn confighash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect::<String>()[..12].to_string()
}
