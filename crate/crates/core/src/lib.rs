//! Conditional GANs for tabular regression with differentiable fuzzy-logic
//! heads.
//!
//! The crate is layered bottom-up:
//!
//! - [`tensor`], [`autodiff`], [`init`], [`optim`]: a small dense tensor type
//!   with tape-based reverse-mode differentiation and Adam.
//! - [`fuzzy`]: product t-norm, t-conorm, sigmoidal Reichenbach implication
//!   and product aggregation, plus the head-to-truth-value pipeline.
//! - [`networks`]: the regression CGAN (plain and with fuzzy heads on the
//!   generator, the discriminator, or both) and a dense baseline.
//! - [`datasets`]: CSV ingestion, min-max scaling and train/test splits.
//! - [`harness`]: metrics, seeded experiment runs and result files.

pub mod autodiff;
pub mod datasets;
pub mod error;
pub mod fuzzy;
pub mod harness;
pub mod init;
pub mod networks;
pub mod optim;
pub mod tensor;

pub use error::{Error, Result};
pub use fuzzy::FuzzyPartition;
pub use networks::InjectionMode;
pub use tensor::Tensor;

/// Random source used for every initialization, shuffle, noise draw and
/// dropout mask. Seeded runs are reproducible across platforms.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
