//! Error types shared across the crate.

use thiserror::Error;

/// Coarse classification used by callers to map errors to process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed inputs: shapes, labels, configuration.
    Validation,
    /// Numerical degeneracy: rank deficiency, singular systems, failed search.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample count mismatch: modality {modality} has {found} rows, expected {expected}")]
    SampleCountMismatch {
        modality: usize,
        found: usize,
        expected: usize,
    },
    #[error("modality {modality} has no features")]
    EmptyModality { modality: usize },
    #[error("dataset has no modalities")]
    NoModalities,
    #[error("availability vector for modality {modality} has length {found}, expected {expected}")]
    AvailabilityLength {
        modality: usize,
        found: usize,
        expected: usize,
    },
    #[error("sample {sample} has no available modalities")]
    AllModalitiesMissing { sample: usize },
    #[error("label vector has length {found}, expected {expected}")]
    LabelLength { found: usize, expected: usize },
    #[error("classification labels must take exactly two distinct values, found {found}")]
    NonBinaryLabels { found: usize },
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
    #[error("block subset must be nonempty")]
    EmptySubset,
    #[error("block subset index {index} out of range for {modalities} modalities")]
    SubsetOutOfRange { index: usize, modalities: usize },
    #[error("duplicate block subset {subset:?}")]
    DuplicateSubset { subset: Vec<usize> },
    #[error("structure has total rank 0")]
    ZeroTotalRank,
    #[error("total rank {rank} exceeds min(n, p) = {limit}")]
    RankTooLarge { rank: usize, limit: usize },
    #[error("unknown modality name {name:?}")]
    UnknownModality { name: String },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("matrix is rank-deficient (sigma_min/sigma_max = {ratio:e}); reduce component ranks")]
    RankDeficient { ratio: f64 },
    #[error("normal matrix is singular even after ridge adjustment")]
    SingularSystem,
    #[error("singular value decomposition did not converge")]
    SvdFailed,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("fold {fold} lost a class under {folds}-fold stratification; dataset too small")]
    FoldMissingClass { fold: usize, folds: usize },
    #[error("modality {modality} has zero signal energy; cannot calibrate noise")]
    ZeroSignal { modality: usize },
    #[error("sample {sample} still has no modalities after {attempts} masking redraws")]
    MaskingInfeasible { sample: usize, attempts: usize },
    #[error("degenerate selection: no rank increment improved the metric ({evaluations} evaluations)")]
    DegenerateSelection { evaluations: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Maps the error onto the exit-code class used by the CLI
    /// (validation -> 2, numerical -> 3).
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::RankDeficient { .. }
            | Error::SingularSystem
            | Error::SvdFailed
            | Error::ZeroSignal { .. }
            | Error::MaskingInfeasible { .. }
            | Error::DegenerateSelection { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
