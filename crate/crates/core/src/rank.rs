//! Per-block rank selection: sequential and incremental greedy search driven
//! by cross-validated performance, plus the top-down loading-magnitude
//! profile.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{cv_metric, fit_auto, plain_folds, stratified_folds};
use crate::rng::derive_seed;
use crate::scalar::Real;
use crate::types::config::{FitConfig, TaskKind};
use crate::types::dataset::MultiModalDataset;
use crate::types::structure::StructureSpec;

/// Search order policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchStrategy {
    /// Blocks are exhausted one at a time in a fixed order.
    Sequential,
    /// Every step grows whichever block improves the metric most.
    Incremental,
}

/// Cross-validated metric the search maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMetric {
    CvAuc,
    CvRmse,
}

/// Rank-search configuration.
#[derive(Debug, Clone)]
pub struct RankSearchConfig<T: Real> {
    pub strategy: SearchStrategy,
    /// Block visit order for the sequential strategy (indices into the
    /// candidate spec's canonical block list); defaults to canonical order.
    pub block_order: Option<Vec<usize>>,
    pub metric: SearchMetric,
    pub folds: usize,
    /// An increment is kept only when it improves the metric by at least this.
    pub min_improvement: f64,
    /// Per-block rank cap.
    pub r_max: usize,
    pub seed: u64,
    pub fit: FitConfig<T>,
}

impl<T: Real> RankSearchConfig<T> {
    pub fn validate(&self, data: &MultiModalDataset<T>) -> Result<()> {
        self.fit.validate()?;
        if self.folds < 2 {
            return Err(Error::InvalidConfig("folds must be >= 2".into()));
        }
        if self.folds > data.n() {
            return Err(Error::InvalidConfig(format!(
                "{} folds for {} samples",
                self.folds,
                data.n()
            )));
        }
        let limit = data.n().min(data.total_features());
        if self.r_max == 0 || self.r_max > limit {
            return Err(Error::InvalidConfig(format!(
                "r_max must lie in 1..={limit}"
            )));
        }
        if !(self.min_improvement >= 0.0) {
            return Err(Error::InvalidConfig(
                "min_improvement must be >= 0".into(),
            ));
        }
        let expected = match self.metric {
            SearchMetric::CvAuc => TaskKind::Classification,
            SearchMetric::CvRmse => TaskKind::Regression,
        };
        if self.fit.task != expected || data.labels().task() != expected {
            return Err(Error::InvalidConfig(
                "search metric does not match the task/labels".into(),
            ));
        }
        Ok(())
    }
}

/// One candidate evaluation in the search trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub step: usize,
    pub block: usize,
    pub rank_tried: usize,
    pub metric: f64,
    pub accepted: bool,
}

/// Search outcome: the chosen spec plus the full evaluation trace.
#[derive(Debug, Clone)]
pub struct RankSelection {
    pub spec: StructureSpec,
    pub trace: Vec<SelectionRecord>,
}

/// Baseline metric of the constant predictor evaluated with the same folds:
/// exactly 0.5 for AUC (constant scores tie everywhere under the midrank
/// convention), negative RMSE of the fold-mean prediction for regression.
fn baseline_metric<T: Real>(
    data: &MultiModalDataset<T>,
    metric: SearchMetric,
    folds: &[Vec<usize>],
) -> f64 {
    match metric {
        SearchMetric::CvAuc => 0.5,
        SearchMetric::CvRmse => {
            let y: Vec<f64> = data
                .labels()
                .targets()
                .iter()
                .map(|v| v.as_f64())
                .collect();
            let n = y.len();
            let mut fold_scores = Vec::with_capacity(folds.len());
            for fold in folds {
                let train_mean = {
                    let train: Vec<f64> = (0..n)
                        .filter(|i| !fold.contains(i))
                        .map(|i| y[i])
                        .collect();
                    train.iter().sum::<f64>() / train.len().max(1) as f64
                };
                let mse = fold
                    .iter()
                    .map(|&i| (y[i] - train_mean).powi(2))
                    .sum::<f64>()
                    / fold.len().max(1) as f64;
                fold_scores.push(-mse.sqrt());
            }
            fold_scores.iter().sum::<f64>() / fold_scores.len() as f64
        }
    }
}

fn make_folds<T: Real>(
    data: &MultiModalDataset<T>,
    config: &RankSearchConfig<T>,
) -> Result<Vec<Vec<usize>>> {
    match config.metric {
        SearchMetric::CvAuc => {
            let labels = data.labels().positives().ok_or(Error::InvalidConfig(
                "cv-auc metric requires binary labels".into(),
            ))?;
            stratified_folds(&labels, config.folds, derive_seed(config.seed, 0))
        }
        SearchMetric::CvRmse => plain_folds(data.n(), config.folds, derive_seed(config.seed, 0)),
    }
}

/// Cross-validated metric of one candidate spec; a candidate whose fit
/// degenerates (rank-deficient latent space, singular systems) is reported
/// as unacceptable rather than aborting the search.
fn evaluate_candidate<T: Real>(
    data: &MultiModalDataset<T>,
    spec: &StructureSpec,
    config: &RankSearchConfig<T>,
    folds: &[Vec<usize>],
) -> Result<f64> {
    match cv_metric(data, spec, &config.fit, folds) {
        Ok((mean, _)) => Ok(mean),
        Err(
            Error::RankDeficient { .. } | Error::SingularSystem | Error::SvdFailed,
        ) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Sequential search: visits blocks in the configured order, growing each
/// block's rank until the metric stops improving by `min_improvement` or
/// `r_max` is reached, then freezes it and moves on. Errors with
/// `DegenerateSelection` when no increment is ever accepted.
pub fn select_ranks_sequential<T: Real>(
    data: &MultiModalDataset<T>,
    candidates: &StructureSpec,
    config: &RankSearchConfig<T>,
) -> Result<RankSelection> {
    config.validate(data)?;
    let order: Vec<usize> = match &config.block_order {
        Some(order) => {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..candidates.blocks().len()).collect::<Vec<_>>() {
                return Err(Error::InvalidConfig(
                    "block_order must be a permutation of the candidate blocks".into(),
                ));
            }
            order.clone()
        }
        None => (0..candidates.blocks().len()).collect(),
    };

    let folds = make_folds(data, config)?;
    let mut spec = zero_ranks(candidates);
    let mut current = baseline_metric(data, config.metric, &folds);
    let mut trace = Vec::new();
    let mut step = 0;

    for &block in &order {
        loop {
            let rank = spec.blocks()[block].rank;
            if rank >= config.r_max {
                break;
            }
            let candidate = spec.with_rank(block, rank + 1);
            let metric = evaluate_candidate(data, &candidate, config, &folds)?;
            let accepted = metric - current >= config.min_improvement;
            trace.push(SelectionRecord {
                step,
                block,
                rank_tried: rank + 1,
                metric,
                accepted,
            });
            step += 1;
            if accepted {
                spec = candidate;
                current = metric;
            } else {
                break;
            }
        }
    }

    finish_selection(spec, trace)
}

/// Incremental search: every step evaluates growing each block by one and
/// keeps the best improvement of at least `min_improvement` (ties break
/// toward the canonical block order); stops when no block qualifies or all
/// blocks sit at `r_max`.
pub fn select_ranks_incremental<T: Real>(
    data: &MultiModalDataset<T>,
    candidates: &StructureSpec,
    config: &RankSearchConfig<T>,
) -> Result<RankSelection> {
    config.validate(data)?;
    let folds = make_folds(data, config)?;
    let mut spec = zero_ranks(candidates);
    let mut current = baseline_metric(data, config.metric, &folds);
    let mut trace = Vec::new();
    let mut step = 0;

    loop {
        let growable: Vec<usize> = (0..spec.blocks().len())
            .filter(|&b| spec.blocks()[b].rank < config.r_max)
            .collect();
        if growable.is_empty() {
            break;
        }
        let evaluations: Vec<(usize, Result<f64>)> = growable
            .par_iter()
            .map(|&block| {
                let candidate = spec.with_rank(block, spec.blocks()[block].rank + 1);
                (block, evaluate_candidate(data, &candidate, config, &folds))
            })
            .collect();

        let mut best: Option<(usize, f64)> = None;
        for (block, result) in evaluations {
            let metric = result?;
            trace.push(SelectionRecord {
                step,
                block,
                rank_tried: spec.blocks()[block].rank + 1,
                metric,
                accepted: false,
            });
            if metric - current >= config.min_improvement
                && best.is_none_or(|(_, m)| metric > m)
            {
                best = Some((block, metric));
            }
        }
        match best {
            Some((block, metric)) => {
                for record in trace.iter_mut().rev() {
                    if record.step == step && record.block == block {
                        record.accepted = true;
                        break;
                    }
                }
                spec = spec.with_rank(block, spec.blocks()[block].rank + 1);
                current = metric;
                step += 1;
            }
            None => break,
        }
    }

    finish_selection(spec, trace)
}

fn zero_ranks(candidates: &StructureSpec) -> StructureSpec {
    let mut spec = candidates.clone();
    for b in 0..spec.blocks().len() {
        spec = spec.with_rank(b, 0);
    }
    spec
}

fn finish_selection(spec: StructureSpec, trace: Vec<SelectionRecord>) -> Result<RankSelection> {
    if spec.total_rank() == 0 {
        return Err(Error::DegenerateSelection {
            evaluations: trace.len(),
        });
    }
    Ok(RankSelection { spec, trace })
}

/// Mean absolute loading per component column, computed over the block's
/// contributing feature rows only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadingProfileRow {
    pub block: usize,
    pub subset: Vec<usize>,
    pub column_in_block: usize,
    pub column: usize,
    pub mean_abs_loading: f64,
}

/// Fits at generous ranks and reports the mean absolute loading of every
/// component column over its contributing rows, grouped per block; the
/// top-down starting point for rank selection.
pub fn loading_profile<T: Real>(
    data: &MultiModalDataset<T>,
    spec_at_max: &StructureSpec,
    config: &FitConfig<T>,
) -> Result<Vec<LoadingProfileRow>> {
    let model = fit_auto(data, spec_at_max, config)?;
    Ok(loading_profile_of(&model))
}

/// The loading-magnitude profile of an already fitted model.
pub fn loading_profile_of<T: Real>(model: &crate::types::model::FissionModel<T>) -> Vec<LoadingProfileRow> {
    let mask = &model.structure.mask;
    let mut rows = Vec::new();
    for (block, cols) in mask.block_cols().iter().enumerate() {
        let subset = model.structure.spec.blocks()[block].subset.clone();
        let contributing: Vec<usize> = subset
            .iter()
            .flat_map(|&k| mask.modality_rows()[k].clone())
            .collect();
        for (column_in_block, col) in cols.clone().enumerate() {
            let mean_abs = contributing
                .iter()
                .map(|&i| model.loadings[(i, col)].as_f64().abs())
                .sum::<f64>()
                / contributing.len().max(1) as f64;
            rows.push(LoadingProfileRow {
                block,
                subset: subset.clone(),
                column_in_block,
                column: col,
                mean_abs_loading: mean_abs,
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeroed_candidates_keep_block_layout() {
        let spec = StructureSpec::full_family(2, 3).unwrap();
        let zeroed = zero_ranks(&spec);
        assert_eq!(zeroed.blocks().len(), 3);
        assert_eq!(zeroed.total_rank(), 0);
    }

    #[test]
    fn degenerate_selection_reports_evaluation_count() {
        let spec = StructureSpec::full_family(2, 1).unwrap();
        let zeroed = zero_ranks(&spec);
        let err = finish_selection(zeroed, vec![]).unwrap_err();
        assert!(matches!(err, Error::DegenerateSelection { evaluations: 0 }));
    }
}
