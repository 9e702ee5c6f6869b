//! Fitted model state.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;
use crate::types::config::FitConfig;
use crate::types::dataset::LabelCodec;
use crate::types::scaling::FeatureScaling;
use crate::types::structure::Structure;

/// Convergence record attached to every fitted model.
#[derive(Debug, Clone)]
pub struct FitDiagnostics<T: Real> {
    /// False when an iteration cap was hit before the objective settled; the
    /// model is still returned, flagged.
    pub converged: bool,
    /// Alternating-minimization iterations run (summed over outer passes for
    /// the incomplete solver).
    pub iterations: usize,
    /// Objective value at the end of each iteration.
    pub objective_history: Vec<T>,
    /// Outer pseudo-reconstruction passes (incomplete solver only).
    pub outer_iterations: Option<usize>,
    /// Masked objective at the end of each outer pass (incomplete solver only).
    pub outer_objective_history: Vec<T>,
}

/// Fitted fission model.
///
/// `latent` holds the per-training-sample components `U` (orthonormal
/// columns), `loadings` the masked `V` (entries outside the structure mask
/// are exact zeros), `coef`/`intercept` the linear predictor, and
/// `dual`/`slack` the classification solver state. Scaling parameters are
/// stored so test samples are standardized exactly as training data was.
#[derive(Debug, Clone)]
pub struct FissionModel<T: Real> {
    pub latent: DMatrix<T>,
    pub loadings: DMatrix<T>,
    pub coef: DVector<T>,
    pub intercept: T,
    pub dual: Option<DVector<T>>,
    pub slack: Option<DVector<T>>,
    pub structure: Structure,
    pub config: FitConfig<T>,
    pub scaling: FeatureScaling<T>,
    pub label_codec: Option<LabelCodec>,
    pub diagnostics: FitDiagnostics<T>,
}

impl<T: Real> FissionModel<T> {
    pub fn rank(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn total_features(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn modality_count(&self) -> usize {
        self.structure.mask.modality_count()
    }

    /// Fitted training scores `U beta + b` from the stored latent rows.
    pub fn fitted_scores(&self) -> DVector<T> {
        let mut s = &self.latent * &self.coef;
        s.add_scalar_mut(self.intercept);
        s
    }

    /// Loading rows of modality `k` (a `p_k x r` slice of `loadings`).
    pub fn loading_block(&self, k: usize) -> DMatrix<T> {
        let rows = self.structure.mask.modality_rows()[k].clone();
        self.loadings.rows(rows.start, rows.len()).into_owned()
    }
}
