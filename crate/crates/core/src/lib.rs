//! Supervised multi-modal fission learning (MMFL).
//!
//! MMFL decomposes a multi-modal dataset `X = [X_1, ..., X_m]` into a shared
//! low-rank latent representation `X ≈ U (V ∘ S)ᵀ` whose components are split
//! into a globally joint block (loading on every modality), partially joint
//! blocks (loading on strict subsets of modalities), and individual blocks
//! (loading on a single modality). The block layout is declared up front in a
//! [`StructureSpec`] and enforced through the binary mask `S`. A linear
//! predictor `y ≈ Uβ + b` is estimated jointly with the decomposition, so the
//! recovered components are both descriptive and predictive.
//!
//! The crate provides:
//!
//! - fitting for binary classification via alternating minimization of an
//!   augmented Lagrangian ([`solver::fit_classification`]),
//! - fitting for continuous responses ([`solver::fit_regression`]),
//! - training with whole-modality missingness per sample, alternating
//!   parameter estimation and pseudo-reconstruction
//!   ([`solver::fit_incomplete`]),
//! - test-time latent projection for complete and incomplete samples
//!   ([`algebra::project_complete`], [`algebra::project_incomplete`]),
//! - greedy per-block rank selection ([`rank`]),
//! - a synthetic benchmark generator with SNR-calibrated noise ([`sim`]),
//! - metrics, cross-validation, grid search, and the replication benchmark
//!   runner ([`eval`]).
//!
//! All numeric code is generic over the scalar type through the [`Real`]
//! trait; `f64` is the intended default and concrete aliases for it are
//! exported at the crate root.

pub mod algebra;
pub mod error;
pub mod eval;
pub mod rank;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod solver;
pub mod types;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Real;
pub use types::config::{FitConfig, TaskKind};
pub use types::dataset::{validate_dataset, LabelCodec, LabelData, MultiModalDataset};
pub use types::model::{FissionModel, FitDiagnostics};
pub use types::scaling::FeatureScaling;
pub use types::structure::{
    build_structure_mask, BlockSpec, Structure, StructureMask, StructureSpec, StructureSpecFile,
};

/// Double-precision aliases; the solvers, CLI, and benchmarks all use these.
pub type Mat64 = nalgebra::DMatrix<f64>;
pub type Vec64 = nalgebra::DVector<f64>;
pub type Dataset64 = MultiModalDataset<f64>;
pub type FitConfig64 = FitConfig<f64>;
pub type FissionModel64 = FissionModel<f64>;

/// Single-precision aliases for callers that trade accuracy for memory.
pub type Mat32 = nalgebra::DMatrix<f32>;
pub type Vec32 = nalgebra::DVector<f32>;
pub type Dataset32 = MultiModalDataset<f32>;
pub type FitConfig32 = FitConfig<f32>;
pub type FissionModel32 = FissionModel<f32>;
