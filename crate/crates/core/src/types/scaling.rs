//! Per-feature centering and scaling.
//!
//! Features are standardized at fit time using statistics computed over the
//! rows where the feature's modality is observed; the parameters are stored
//! in the model so test samples go through the identical transform.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;
use crate::types::dataset::MultiModalDataset;

/// Threshold below which a feature is treated as constant and given scale 1.
const CONSTANT_SD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaling<T: Real> {
    pub center: DVector<T>,
    pub scale: DVector<T>,
}

impl<T: Real> FeatureScaling<T> {
    /// Computes per-feature mean and population standard deviation over the
    /// observed rows of each modality. Constant features get scale 1.
    pub fn fit(data: &MultiModalDataset<T>) -> Self {
        let p = data.total_features();
        let mut center = DVector::zeros(p);
        let mut scale = DVector::from_element(p, T::one());
        let mut offset = 0;
        for k in 0..data.modality_count() {
            let x = data.modality(k);
            let rows: Vec<usize> = (0..data.n()).filter(|&i| data.observed(k, i)).collect();
            let count = T::of(rows.len() as f64);
            for j in 0..x.ncols() {
                let mut mean = T::zero();
                for &i in &rows {
                    mean += x[(i, j)];
                }
                mean /= count;
                let mut var = T::zero();
                for &i in &rows {
                    let d = x[(i, j)] - mean;
                    var += d * d;
                }
                var /= count;
                let sd = var.sqrt();
                center[offset + j] = mean;
                scale[offset + j] = if sd.as_f64() > CONSTANT_SD { sd } else { T::one() };
            }
            offset += x.ncols();
        }
        Self { center, scale }
    }

    /// Per-feature centering only (all scales 1).
    pub fn center_only(data: &MultiModalDataset<T>) -> Self {
        let mut scaling = Self::fit(data);
        scaling.scale = DVector::from_element(scaling.scale.len(), T::one());
        scaling
    }

    /// Identity transform for `p` features.
    pub fn identity(p: usize) -> Self {
        Self {
            center: DVector::zeros(p),
            scale: DVector::from_element(p, T::one()),
        }
    }

    pub fn total_features(&self) -> usize {
        self.center.len()
    }

    /// Standardized concatenated feature matrix (all rows, observed or not;
    /// availability stays metadata).
    pub fn transform_concat(&self, data: &MultiModalDataset<T>) -> DMatrix<T> {
        let n = data.n();
        let p = self.total_features();
        let mut out = DMatrix::zeros(n, p);
        let mut offset = 0;
        for k in 0..data.modality_count() {
            let x = data.modality(k);
            for j in 0..x.ncols() {
                let c = self.center[offset + j];
                let s = self.scale[offset + j];
                for i in 0..n {
                    out[(i, offset + j)] = (x[(i, j)] - c) / s;
                }
            }
            offset += x.ncols();
        }
        out
    }

    /// Standardizes one sample's block of features for the modality occupying
    /// concatenated columns `offset..offset + len`.
    pub fn transform_block(&self, values: &[T], offset: usize) -> DVector<T> {
        DVector::from_iterator(
            values.len(),
            values
                .iter()
                .enumerate()
                .map(|(j, &v)| (v - self.center[offset + j]) / self.scale[offset + j]),
        )
    }

    /// Maps a standardized value back to the original feature scale.
    pub fn invert(&self, feature: usize, standardized: T) -> T {
        standardized * self.scale[feature] + self.center[feature]
    }
}
