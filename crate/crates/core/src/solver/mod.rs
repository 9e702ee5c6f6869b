//! Model fitting and prediction.

pub mod classification;
pub mod incomplete;
mod latent;
pub mod regression;

pub use classification::{
    fit_classification, fit_classification_traced, lagrangian_value, slack_target,
    update_coefficients, update_dual, update_intercept, update_latent_complete, update_slack,
    AlmState, IterationTrace, PrimalStep,
};
pub use incomplete::{
    fit_incomplete, masked_objective, pseudo_reconstruct, update_latent_row_incomplete,
    PseudoReconstruction,
};
pub use regression::{
    fit_regression, fit_regression_traced, regression_objective, update_coefficients_regression,
    update_latent_regression, update_latent_row_regression, RegressionStep, RegressionTrace,
};

use nalgebra::{DMatrix, DVector};

use crate::algebra::{project_complete, project_incomplete};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::types::dataset::MultiModalDataset;
use crate::types::model::FissionModel;

impl<T: Real> FissionModel<T> {
    /// Real-valued scores `u* beta + b` for every sample of `data`.
    ///
    /// Each sample is standardized with the model's stored scaling and
    /// projected into the latent space; samples with every modality observed
    /// go through the complete-sample projection, others through the
    /// observed-blocks projection. Classification thresholding is the
    /// caller's concern.
    pub fn predict(&self, data: &MultiModalDataset<T>) -> Result<DVector<T>> {
        self.predict_rows(data.modalities(), Some(data.availability()))
    }

    /// [`FissionModel::predict`] over raw matrices, for callers without
    /// labels at hand. `availability` defaults to fully observed.
    pub fn predict_rows(
        &self,
        modalities: &[DMatrix<T>],
        availability: Option<&[Vec<bool>]>,
    ) -> Result<DVector<T>> {
        let mask = &self.structure.mask;
        if modalities.len() != mask.modality_count() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "{} modalities supplied, model has {}",
                    modalities.len(),
                    mask.modality_count()
                ),
            });
        }
        let n = modalities.first().map_or(0, |x| x.nrows());
        for (k, (x, rows)) in modalities.iter().zip(mask.modality_rows()).enumerate() {
            if x.ncols() != rows.len() {
                return Err(Error::DimensionMismatch {
                    context: format!(
                        "modality {k} has {} features, model expects {}",
                        x.ncols(),
                        rows.len()
                    ),
                });
            }
            if x.nrows() != n {
                return Err(Error::SampleCountMismatch {
                    modality: k,
                    found: x.nrows(),
                    expected: n,
                });
            }
        }
        if let Some(avail) = availability {
            if avail.len() != modalities.len() {
                return Err(Error::DimensionMismatch {
                    context: "availability does not match modality count".into(),
                });
            }
            for (k, bits) in avail.iter().enumerate() {
                if bits.len() != n {
                    return Err(Error::AvailabilityLength {
                        modality: k,
                        found: bits.len(),
                        expected: n,
                    });
                }
            }
        }

        let m = modalities.len();
        let p = self.total_features();
        let mut scores = DVector::zeros(n);
        for i in 0..n {
            let omega: Vec<usize> = (0..m)
                .filter(|&k| availability.is_none_or(|a| a[k][i]))
                .collect();
            if omega.is_empty() {
                return Err(Error::AllModalitiesMissing { sample: i });
            }
            let projection = if omega.len() == m {
                let mut x = DVector::zeros(p);
                for (k, rows) in mask.modality_rows().iter().enumerate() {
                    let block = modalities[k].row(i);
                    for (j, feature) in rows.clone().enumerate() {
                        x[feature] = (block[j] - self.scaling.center[feature])
                            / self.scaling.scale[feature];
                    }
                }
                project_complete(&x, &self.loadings, &self.coef, self.config.lambda, mask)?
            } else {
                let parts: Vec<DVector<T>> = omega
                    .iter()
                    .map(|&k| {
                        let rows = &mask.modality_rows()[k];
                        let block = modalities[k].row(i);
                        DVector::from_iterator(
                            rows.len(),
                            rows.clone().enumerate().map(|(j, feature)| {
                                (block[j] - self.scaling.center[feature])
                                    / self.scaling.scale[feature]
                            }),
                        )
                    })
                    .collect();
                project_incomplete(
                    &parts,
                    &omega,
                    &self.loadings,
                    &self.coef,
                    self.config.lambda,
                    mask,
                )?
            };
            scores[i] = self.coef.dot(&projection.u) + self.intercept;
        }
        Ok(scores)
    }
}
