//! Metrics, cross-validation, hyperparameter grid search, and the
//! replication benchmark runner.

use std::time::Instant;


use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for};
use crate::scalar::Real;
use crate::sim::{build_test_cohorts, generate, mask_training_rows, SimulationConfig};
use crate::solver::{fit_classification, fit_incomplete};
use crate::types::config::{FitConfig, TaskKind};
use crate::types::dataset::MultiModalDataset;
use crate::types::model::FissionModel;
use crate::types::structure::StructureSpec;

/// Area under the ROC curve with tied scores handled by the midrank
/// convention, i.e. the probability a random positive outranks a random
/// negative with ties counted one half.
pub fn roc_auc<T: Real>(scores: &[T], labels: &[bool]) -> Result<T> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: format!("{} scores for {} labels", scores.len(), labels.len()),
        });
    }
    if scores.iter().any(|s| !s.as_f64().is_finite()) {
        return Err(Error::NonFinite {
            context: "scores".into(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // midranks over tie groups, then the rank-sum estimator
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j + 2) as f64 / 2.0; // ranks are 1-based
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let n_pos_f = n_pos as f64;
    let auc = (rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64);
    Ok(T::of(auc))
}

/// Threshold maximizing Youden's J = sensitivity + specificity - 1 over the
/// midpoints between consecutive distinct sorted scores (classification rule:
/// score >= threshold is positive). Ties break toward the smaller threshold;
/// with a single distinct score that score itself is returned.
pub fn youden_threshold<T: Real>(scores: &[T], labels: &[bool]) -> Result<T> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: format!("{} scores for {} labels", scores.len(), labels.len()),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut distinct: Vec<T> = scores.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    distinct.dedup();
    if distinct.len() == 1 {
        return Ok(distinct[0]);
    }

    let half = T::of(0.5);
    let mut best_threshold = T::zero();
    let mut best_j = f64::NEG_INFINITY;
    for pair in distinct.windows(2) {
        let threshold = (pair[0] + pair[1]) * half;
        let mut tp = 0usize;
        let mut fp = 0usize;
        for (score, &label) in scores.iter().zip(labels) {
            if *score >= threshold {
                if label {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        let j = tp as f64 / n_pos as f64 - fp as f64 / n_neg as f64;
        if j > best_j {
            best_j = j;
            best_threshold = threshold;
        }
    }
    Ok(best_threshold)
}

/// Fraction of labels matching the rule `score >= threshold` => positive.
pub fn accuracy_at<T: Real>(scores: &[T], labels: &[bool], threshold: T) -> T {
    if scores.is_empty() {
        return T::zero();
    }
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(s, &l)| (**s >= threshold) == l)
        .count();
    T::of(hits as f64 / scores.len() as f64)
}

/// Root mean squared error.
pub fn rmse<T: Real>(predictions: &[T], targets: &[T]) -> T {
    let n = predictions.len().max(1);
    let sum: T = predictions
        .iter()
        .zip(targets)
        .map(|(&p, &t)| (p - t) * (p - t))
        .fold(T::zero(), |acc, v| acc + v);
    (sum / T::of(n as f64)).sqrt()
}

/// Stratified k-fold assignment for binary labels: each class is shuffled and
/// dealt round-robin, so every sample lands in exactly one validation fold
/// and class counts per fold differ by at most one.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidConfig("folds must be >= 2".into()));
    }
    if folds > labels.len() {
        return Err(Error::InvalidConfig(format!(
            "{folds} folds for {} samples",
            labels.len()
        )));
    }
    let mut rng = rng_for(seed);
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let mut assignment = vec![Vec::new(); folds];
    for (slot, &i) in pos.iter().enumerate() {
        assignment[slot % folds].push(i);
    }
    for (slot, &i) in neg.iter().enumerate() {
        assignment[slot % folds].push(i);
    }
    for (f, members) in assignment.iter().enumerate() {
        let has_pos = members.iter().any(|&i| labels[i]);
        let has_neg = members.iter().any(|&i| !labels[i]);
        if !has_pos || !has_neg {
            return Err(Error::FoldMissingClass { fold: f, folds });
        }
    }
    Ok(assignment)
}

/// Plain shuffled k-fold assignment (regression).
pub fn plain_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidConfig("folds must be >= 2".into()));
    }
    if folds > n {
        return Err(Error::InvalidConfig(format!("{folds} folds for {n} samples")));
    }
    let mut rng = rng_for(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let mut assignment = vec![Vec::new(); folds];
    for (slot, &i) in indices.iter().enumerate() {
        assignment[slot % folds].push(i);
    }
    Ok(assignment)
}

/// Fits whichever solver the data's availability requires.
pub fn fit_auto<T: Real>(
    data: &MultiModalDataset<T>,
    spec: &StructureSpec,
    config: &FitConfig<T>,
) -> Result<FissionModel<T>> {
    // fit_incomplete dispatches to the complete solvers on complete data
    fit_incomplete(data, spec, config)
}

/// Mean cross-validated metric of `config` on `data`, higher is better
/// (negative RMSE for regression). Folds must be provided so every candidate
/// in a search shares them.
pub fn cv_metric<T: Real>(
    data: &MultiModalDataset<T>,
    spec: &StructureSpec,
    config: &FitConfig<T>,
    fold_assignment: &[Vec<usize>],
) -> Result<(f64, Vec<f64>)> {
    let n = data.n();
    let mut fold_scores = Vec::with_capacity(fold_assignment.len());
    for fold in fold_assignment {
        let train_rows: Vec<usize> = (0..n).filter(|i| !fold.contains(i)).collect();
        let train = data.subset_rows(&train_rows);
        let valid = data.subset_rows(fold);
        let model = fit_auto(&train, spec, config)?;
        let scores_vec = model.predict(&valid)?;
        let scores: Vec<T> = scores_vec.iter().copied().collect();
        let metric = match config.task {
            TaskKind::Classification => {
                let labels = valid.labels().positives().ok_or(Error::InvalidConfig(
                    "classification metric on continuous labels".into(),
                ))?;
                roc_auc(&scores, &labels)?.as_f64()
            }
            TaskKind::Regression => {
                let targets: Vec<T> = valid.labels().targets().iter().copied().collect();
                -rmse(&scores, &targets).as_f64()
            }
        };
        fold_scores.push(metric);
    }
    let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
    Ok((mean, fold_scores))
}

/// One grid-search evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvTableRow {
    pub lambda: f64,
    pub gamma: f64,
    pub mean_metric: f64,
    pub sd_metric: Option<f64>,
    pub fold_metrics: Vec<f64>,
}

/// Grid-search outcome: the winning configuration and the full table.
#[derive(Debug, Clone)]
pub struct GridSearchOutcome<T: Real> {
    pub best: FitConfig<T>,
    pub table: Vec<CvTableRow>,
}

/// Evaluates every (lambda, gamma) grid point by k-fold cross-validation
/// (stratified by class for classification) and returns the best
/// configuration; ties break toward smaller lambda, then smaller gamma.
pub fn grid_search_cv<T: Real>(
    data: &MultiModalDataset<T>,
    spec: &StructureSpec,
    lambdas: &[f64],
    gammas: &[f64],
    base: &FitConfig<T>,
    folds: usize,
    seed: u64,
) -> Result<GridSearchOutcome<T>> {
    if lambdas.is_empty() || gammas.is_empty() {
        return Err(Error::InvalidConfig("hyperparameter grids are empty".into()));
    }
    let fold_assignment = match base.task {
        TaskKind::Classification => {
            let labels = data.labels().positives().ok_or(Error::InvalidConfig(
                "classification grid search on continuous labels".into(),
            ))?;
            stratified_folds(&labels, folds, seed)?
        }
        TaskKind::Regression => plain_folds(data.n(), folds, seed)?,
    };

    let mut lambdas = lambdas.to_vec();
    let mut gammas = gammas.to_vec();
    lambdas.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    gammas.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));

    let points: Vec<(f64, f64)> = lambdas
        .iter()
        .flat_map(|&l| gammas.iter().map(move |&g| (l, g)))
        .collect();

    let rows: Vec<Result<CvTableRow>> = points
        .par_iter()
        .map(|&(lambda, gamma)| {
            let config = base.with_weights(T::of(lambda), T::of(gamma));
            let (mean, fold_metrics) = cv_metric(data, spec, &config, &fold_assignment)?;
            Ok(CvTableRow {
                lambda,
                gamma,
                mean_metric: mean,
                sd_metric: sample_sd(&fold_metrics),
                fold_metrics,
            })
        })
        .collect();

    let mut table = Vec::with_capacity(rows.len());
    for row in rows {
        table.push(row?);
    }

    let mut best_idx = 0;
    for (i, row) in table.iter().enumerate().skip(1) {
        if row.mean_metric > table[best_idx].mean_metric {
            best_idx = i;
        }
    }
    let best = base.with_weights(T::of(table[best_idx].lambda), T::of(table[best_idx].gamma));
    Ok(GridSearchOutcome { best, table })
}

fn sample_sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    Some(var.sqrt())
}

/// Benchmark scenario selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BenchmarkScenario {
    /// Complete-modality comparison: delta 0.25, no masking, one cohort.
    CompleteModality,
    /// Incomplete-modality comparison: delta 0.5, training masking
    /// (0, 0.2, 0.4), four test cohorts plus training ablations.
    IncompleteModality,
}

impl BenchmarkScenario {
    pub fn delta(self) -> f64 {
        match self {
            BenchmarkScenario::CompleteModality => 0.25,
            BenchmarkScenario::IncompleteModality => 0.5,
        }
    }
}

/// One replication outcome for one model/cohort cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub model: String,
    pub cohort: String,
    pub rep: usize,
    pub auc: f64,
    pub accuracy: f64,
    pub fit_seconds: f64,
    pub config_hash: String,
    pub error: Option<String>,
}

/// Aggregated mean/sd per model/cohort cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalCell {
    pub model: String,
    pub cohort: String,
    pub reps: usize,
    pub auc_mean: f64,
    pub auc_sd: Option<f64>,
    pub accuracy_mean: f64,
    pub accuracy_sd: Option<f64>,
    pub time_mean: f64,
    pub time_sd: Option<f64>,
}

/// Full benchmark report: per-replication records plus aggregates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: String,
    pub reps: usize,
    pub seed: u64,
    pub tuned_lambda: f64,
    pub tuned_gamma: f64,
    pub cv_table: Vec<CvTableRow>,
    pub records: Vec<EvalRecord>,
    pub cells: Vec<EvalCell>,
}

impl EvalReport {
    /// Recomputes the aggregate cells from the records (grouped by
    /// model/cohort in first-appearance order, failed records excluded).
    pub fn aggregate(records: &[EvalRecord]) -> Vec<EvalCell> {
        let mut cells: Vec<EvalCell> = Vec::new();
        let mut groups: Vec<(String, String, Vec<&EvalRecord>)> = Vec::new();
        for record in records {
            match groups
                .iter_mut()
                .find(|(m, c, _)| *m == record.model && *c == record.cohort)
            {
                Some((_, _, list)) => list.push(record),
                None => groups.push((record.model.clone(), record.cohort.clone(), vec![record])),
            }
        }
        for (model, cohort, list) in groups {
            let ok: Vec<&&EvalRecord> = list.iter().filter(|r| r.error.is_none()).collect();
            let reps = ok.len();
            let mean = |f: &dyn Fn(&EvalRecord) -> f64| {
                if reps == 0 {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / reps as f64
                }
            };
            let sd = |f: &dyn Fn(&EvalRecord) -> f64| {
                let values: Vec<f64> = ok.iter().map(|r| f(r)).collect();
                sample_sd(&values)
            };
            cells.push(EvalCell {
                model,
                cohort,
                reps,
                auc_mean: mean(&|r| r.auc),
                auc_sd: sd(&|r| r.auc),
                accuracy_mean: mean(&|r| r.accuracy),
                accuracy_sd: sd(&|r| r.accuracy),
                time_mean: mean(&|r| r.fit_seconds),
                time_sd: sd(&|r| r.fit_seconds),
            });
        }
        cells
    }
}

/// Hyperparameter grids used for tuning the benchmark fits.
pub const BENCHMARK_LAMBDAS: [f64; 3] = [0.1, 1.0, 10.0];
pub const BENCHMARK_GAMMAS: [f64; 2] = [0.001, 0.01];

const INCOMPLETE_MASK_RATES: [f64; 3] = [0.0, 0.2, 0.4];

/// Runs `reps` independent generate/fit/predict/score replications of the
/// chosen scenario with ground-truth ranks, tuning lambda and gamma once by
/// five-fold cross-validation on the first replication's training set.
///
/// Fit errors are recorded per replication rather than aborting the run.
/// Reports are bit-reproducible given (scenario, reps, seed); replications
/// run in parallel, each deriving its own seed.
pub fn run_benchmark(scenario: BenchmarkScenario, reps: usize, seed: u64) -> Result<EvalReport> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be >= 1".into()));
    }
    match scenario {
        BenchmarkScenario::CompleteModality => run_benchmark_complete(reps, seed),
        BenchmarkScenario::IncompleteModality => run_benchmark_incomplete(reps, seed),
    }
}

fn base_config(seed: u64) -> FitConfig<f64> {
    FitConfig {
        max_iter: 100,
        outer_max_iter: 20,
        epsilon: 1e-4,
        seed,
        ..FitConfig::default()
    }
}

fn scenario_sim_config(scenario: BenchmarkScenario, rep_seed: u64) -> SimulationConfig<f64> {
    SimulationConfig::standard_benchmark(scenario.delta(), rep_seed)
}

fn score_cell(
    model: &FissionModel<f64>,
    train: &MultiModalDataset<f64>,
    cohort: &MultiModalDataset<f64>,
) -> Result<(f64, f64)> {
    // The cutoff is estimated on training scores only, projected through the
    // cohort's modality pattern: scores from different modality subsets live
    // on different scales, so the threshold must be calibrated in the same
    // score space it will be applied to. Training samples that have none of
    // the cohort's modalities cannot be scored there and are skipped.
    let cohort_pattern: Vec<bool> = (0..cohort.modality_count())
        .map(|k| cohort.availability()[k].iter().all(|&b| b))
        .collect();
    let train_labels_all = train
        .labels()
        .positives()
        .ok_or(Error::InvalidConfig("benchmark needs binary labels".into()))?;
    let mut restricted = Vec::with_capacity(train.modality_count());
    for k in 0..train.modality_count() {
        let bits: Vec<bool> = (0..train.n())
            .map(|i| cohort_pattern[k] && train.observed(k, i))
            .collect();
        restricted.push(bits);
    }
    let scorable: Vec<usize> = (0..train.n())
        .filter(|&i| restricted.iter().any(|bits| bits[i]))
        .collect();
    let mut train_scores = Vec::with_capacity(scorable.len());
    let mut train_labels = Vec::with_capacity(scorable.len());
    {
        let availability: Vec<Vec<bool>> = restricted
            .iter()
            .map(|bits| scorable.iter().map(|&i| bits[i]).collect())
            .collect();
        let modalities: Vec<nalgebra::DMatrix<f64>> = (0..train.modality_count())
            .map(|k| {
                let x = train.modality(k);
                nalgebra::DMatrix::from_fn(scorable.len(), x.ncols(), |i, j| x[(scorable[i], j)])
            })
            .collect();
        let scores = model.predict_rows(&modalities, Some(&availability))?;
        for (slot, &i) in scorable.iter().enumerate() {
            train_scores.push(scores[slot]);
            train_labels.push(train_labels_all[i]);
        }
    }
    let threshold = youden_threshold(&train_scores, &train_labels)?;

    let scores_vec = model.predict(cohort)?;
    let scores: Vec<f64> = scores_vec.iter().copied().collect();
    let labels = cohort
        .labels()
        .positives()
        .ok_or(Error::InvalidConfig("benchmark needs binary labels".into()))?;
    let auc = roc_auc(&scores, &labels)?;
    let accuracy = accuracy_at(&scores, &labels, threshold);
    Ok((auc, accuracy))
}

fn record_ok(
    model: &str,
    cohort: &str,
    rep: usize,
    auc: f64,
    accuracy: f64,
    fit_seconds: f64,
    config: &FitConfig<f64>,
) -> EvalRecord {
    EvalRecord {
        model: model.to_string(),
        cohort: cohort.to_string(),
        rep,
        auc,
        accuracy,
        fit_seconds,
        config_hash: config.content_hash(),
        error: None,
    }
}

fn record_err(model: &str, cohort: &str, rep: usize, err: &Error, config: &FitConfig<f64>) -> EvalRecord {
    EvalRecord {
        model: model.to_string(),
        cohort: cohort.to_string(),
        rep,
        auc: f64::NAN,
        accuracy: f64::NAN,
        fit_seconds: f64::NAN,
        config_hash: config.content_hash(),
        error: Some(err.to_string()),
    }
}

fn run_benchmark_complete(reps: usize, seed: u64) -> Result<EvalReport> {
    let tuning_sim = scenario_sim_config(BenchmarkScenario::CompleteModality, derive_seed(seed, 0));
    let (tune_train, _, _) = generate(&tuning_sim)?;
    let outcome = grid_search_cv(
        &tune_train,
        &tuning_sim.spec,
        &BENCHMARK_LAMBDAS,
        &BENCHMARK_GAMMAS,
        &base_config(seed),
        5,
        derive_seed(seed, u64::MAX),
    )?;
    let tuned = outcome.best;

    let rep_records: Vec<Vec<EvalRecord>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let sim = scenario_sim_config(
                BenchmarkScenario::CompleteModality,
                derive_seed(seed, rep as u64),
            );
            let config = FitConfig {
                seed: sim.seed,
                ..tuned
            };
            let generated = match generate(&sim) {
                Ok(g) => g,
                Err(e) => return vec![record_err("MMFL", "complete", rep, &e, &config)],
            };
            let (train, test, _) = generated;
            let started = Instant::now();
            let model = match fit_classification(&train, &sim.spec, &config) {
                Ok(m) => m,
                Err(e) => return vec![record_err("MMFL", "complete", rep, &e, &config)],
            };
            let fit_seconds = started.elapsed().as_secs_f64();
            match score_cell(&model, &train, &test) {
                Ok((auc, accuracy)) => vec![record_ok(
                    "MMFL",
                    "complete",
                    rep,
                    auc,
                    accuracy,
                    fit_seconds,
                    &config,
                )],
                Err(e) => vec![record_err("MMFL", "complete", rep, &e, &config)],
            }
        })
        .collect();

    let records: Vec<EvalRecord> = rep_records.into_iter().flatten().collect();
    let cells = EvalReport::aggregate(&records);
    Ok(EvalReport {
        scenario: "complete".into(),
        reps,
        seed,
        tuned_lambda: tuned.lambda,
        tuned_gamma: tuned.gamma,
        cv_table: outcome.table,
        records,
        cells,
    })
}

const PAIR_COHORTS: [(&str, [usize; 2]); 3] = [
    ("X1X2", [0, 1]),
    ("X1X3", [0, 2]),
    ("X2X3", [1, 2]),
];

/// Per-variant tuned configurations for the incomplete-modality scenario.
struct IncompleteScenarioConfigs {
    incomplete: FitConfig<f64>,
    complete_samples: FitConfig<f64>,
    upper_bound: FitConfig<f64>,
    pairs: [FitConfig<f64>; 3],
}

fn run_benchmark_incomplete(reps: usize, seed: u64) -> Result<EvalReport> {
    // every model variant is tuned by five-fold CV on its own training
    // configuration, derived from the first replication's data
    let tuning_sim =
        scenario_sim_config(BenchmarkScenario::IncompleteModality, derive_seed(seed, 0));
    let (tune_train, _, _) = generate(&tuning_sim)?;
    let tune_masked = mask_training_rows(
        &tune_train,
        &INCOMPLETE_MASK_RATES,
        derive_seed(tuning_sim.seed, 1),
    )?;
    let base = base_config(seed);
    let fold_seed = derive_seed(seed, u64::MAX);
    let tune =
        |data: &MultiModalDataset<f64>, spec: &StructureSpec| -> Result<GridSearchOutcome<f64>> {
            grid_search_cv(
                data,
                spec,
                &BENCHMARK_LAMBDAS,
                &BENCHMARK_GAMMAS,
                &base,
                5,
                fold_seed,
            )
        };

    let main = tune(&tune_masked, &tuning_sim.spec)?;
    let complete_subset = tune_masked.subset_rows(&tune_masked.complete_rows());
    let complete_samples = tune(&complete_subset, &tuning_sim.spec)?.best;
    let upper_bound = tune(&tune_train, &tuning_sim.spec)?.best;
    let mut pairs = [base, base, base];
    for (slot, (_, pair)) in PAIR_COHORTS.iter().enumerate() {
        let keep_rows: Vec<usize> = (0..tune_masked.n())
            .filter(|&i| pair.iter().any(|&k| tune_masked.observed(k, i)))
            .collect();
        let reduced = tune_masked.subset_rows(&keep_rows).restrict_modalities(pair)?;
        let reduced_spec = tuning_sim.spec.restricted(pair)?;
        pairs[slot] = tune(&reduced, &reduced_spec)?.best;
    }
    let configs = IncompleteScenarioConfigs {
        incomplete: main.best,
        complete_samples,
        upper_bound,
        pairs,
    };

    let rep_records: Vec<Vec<EvalRecord>> = (0..reps)
        .into_par_iter()
        .map(|rep| run_incomplete_rep(rep, seed, &configs))
        .collect();

    let records: Vec<EvalRecord> = rep_records.into_iter().flatten().collect();
    let cells = EvalReport::aggregate(&records);
    Ok(EvalReport {
        scenario: "incomplete".into(),
        reps,
        seed,
        tuned_lambda: configs.incomplete.lambda,
        tuned_gamma: configs.incomplete.gamma,
        cv_table: main.table,
        records,
        cells,
    })
}

fn run_incomplete_rep(rep: usize, seed: u64, configs: &IncompleteScenarioConfigs) -> Vec<EvalRecord> {
    let sim = scenario_sim_config(
        BenchmarkScenario::IncompleteModality,
        derive_seed(seed, rep as u64),
    );
    let config = FitConfig {
        seed: sim.seed,
        ..configs.incomplete
    };
    let mut records = Vec::new();

    let (train, test, _) = match generate(&sim) {
        Ok(g) => g,
        Err(e) => {
            records.push(record_err("MMFL", "complete", rep, &e, &config));
            return records;
        }
    };
    let masked_train =
        match mask_training_rows(&train, &INCOMPLETE_MASK_RATES, derive_seed(sim.seed, 1)) {
            Ok(d) => d,
            Err(e) => {
                records.push(record_err("MMFL", "complete", rep, &e, &config));
                return records;
            }
        };
    let cohorts = match build_test_cohorts(
        &test,
        &[vec![0, 1, 2], vec![0, 1], vec![0, 2], vec![1, 2]],
    ) {
        Ok(c) => c,
        Err(e) => {
            records.push(record_err("MMFL", "complete", rep, &e, &config));
            return records;
        }
    };

    // Incomplete-training model, evaluated on every cohort.
    let started = Instant::now();
    match fit_incomplete(&masked_train, &sim.spec, &config) {
        Ok(model) => {
            let fit_seconds = started.elapsed().as_secs_f64();
            let names = ["complete", "X1X2", "X1X3", "X2X3"];
            for (cohort, name) in cohorts.iter().zip(names) {
                match score_cell(&model, &masked_train, cohort) {
                    Ok((auc, accuracy)) => records.push(record_ok(
                        "MMFL",
                        name,
                        rep,
                        auc,
                        accuracy,
                        fit_seconds,
                        &config,
                    )),
                    Err(e) => records.push(record_err("MMFL", name, rep, &e, &config)),
                }
            }
        }
        Err(e) => {
            for name in ["complete", "X1X2", "X1X3", "X2X3"] {
                records.push(record_err("MMFL", name, rep, &e, &config));
            }
        }
    }

    // Ablation: train only on the samples with every modality observed.
    let complete_rows = masked_train.complete_rows();
    let complete_subset = masked_train.subset_rows(&complete_rows);
    let config = FitConfig {
        seed: sim.seed,
        ..configs.complete_samples
    };
    let started = Instant::now();
    match fit_classification(&complete_subset, &sim.spec, &config) {
        Ok(model) => {
            let fit_seconds = started.elapsed().as_secs_f64();
            match score_cell(&model, &complete_subset, &cohorts[0]) {
                Ok((auc, accuracy)) => records.push(record_ok(
                    "MMFL-complete-samples",
                    "complete",
                    rep,
                    auc,
                    accuracy,
                    fit_seconds,
                    &config,
                )),
                Err(e) => {
                    records.push(record_err("MMFL-complete-samples", "complete", rep, &e, &config))
                }
            }
        }
        Err(e) => records.push(record_err("MMFL-complete-samples", "complete", rep, &e, &config)),
    }

    // Upper bound: fully complete training data, complete cohort.
    let config = FitConfig {
        seed: sim.seed,
        ..configs.upper_bound
    };
    let started = Instant::now();
    match fit_classification(&train, &sim.spec, &config) {
        Ok(model) => {
            let fit_seconds = started.elapsed().as_secs_f64();
            match score_cell(&model, &train, &cohorts[0]) {
                Ok((auc, accuracy)) => records.push(record_ok(
                    "MMFL-upper-bound",
                    "complete",
                    rep,
                    auc,
                    accuracy,
                    fit_seconds,
                    &config,
                )),
                Err(e) => records.push(record_err("MMFL-upper-bound", "complete", rep, &e, &config)),
            }
        }
        Err(e) => records.push(record_err("MMFL-upper-bound", "complete", rep, &e, &config)),
    }

    // Ablations: train with only the cohort's modality pair; samples with
    // neither modality observed contribute nothing and are dropped.
    for (pair_idx, (name, pair)) in PAIR_COHORTS.iter().enumerate() {
        let model_name = format!("MMFL-{name}");
        let config = FitConfig {
            seed: sim.seed,
            ..configs.pairs[pair_idx]
        };
        let result = (|| -> Result<(f64, f64, f64)> {
            let keep_rows: Vec<usize> = (0..masked_train.n())
                .filter(|&i| pair.iter().any(|&k| masked_train.observed(k, i)))
                .collect();
            let reduced_train = masked_train.subset_rows(&keep_rows).restrict_modalities(pair)?;
            let reduced_spec = sim.spec.restricted(pair)?;
            let reduced_cohort = cohorts[pair_idx + 1].restrict_modalities(pair)?;
            let started = Instant::now();
            let model = fit_auto(&reduced_train, &reduced_spec, &config)?;
            let fit_seconds = started.elapsed().as_secs_f64();
            let (auc, accuracy) = score_cell(&model, &reduced_train, &reduced_cohort)?;
            Ok((auc, accuracy, fit_seconds))
        })();
        match result {
            Ok((auc, accuracy, fit_seconds)) => records.push(record_ok(
                &model_name,
                name,
                rep,
                auc,
                accuracy,
                fit_seconds,
                &config,
            )),
            Err(e) => records.push(record_err(&model_name, name, rep, &e, &config)),
        }
    }

    records
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn perfect_ranking_gives_unit_auc() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        assert_relative_eq!(roc_auc(&scores, &labels).unwrap(), 1.0);
        let reversed = [false, false, true, true];
        assert_relative_eq!(roc_auc(&scores, &reversed).unwrap(), 0.0);
    }

    #[test]
    fn all_ties_give_half_auc() {
        let scores = [0.5, 0.5, 0.5, 0.5];
        let labels = [true, false, true, false];
        assert_relative_eq!(roc_auc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_rejected() {
        let scores = [0.1, 0.2];
        assert!(matches!(
            roc_auc(&scores, &[true, true]),
            Err(Error::SingleClass)
        ));
        assert!(matches!(
            youden_threshold(&scores, &[false, false]),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn youden_picks_separating_gap_midpoint() {
        let scores = [0.1, 0.2, 0.8, 0.9];
        let labels = [false, false, true, true];
        let t = youden_threshold(&scores, &labels).unwrap();
        assert_relative_eq!(t, 0.5);
        assert_relative_eq!(accuracy_at(&scores, &labels, t), 1.0);
    }

    #[test]
    fn youden_matches_hand_computed_example() {
        let scores = [0.1, 0.35, 0.4, 0.8];
        let labels = [false, true, false, true];
        // midpoints: 0.225 (J = 0.5), 0.375 (J = 0.0), 0.6 (J = 0.5);
        // ties break toward the smaller threshold.
        let t = youden_threshold(&scores, &labels).unwrap();
        assert_relative_eq!(t, 0.225);
    }

    #[test]
    fn youden_degenerates_to_the_single_score() {
        let scores = [0.3, 0.3, 0.3];
        let labels = [true, false, true];
        assert_relative_eq!(youden_threshold(&scores, &labels).unwrap(), 0.3);
    }

    #[test]
    fn accuracy_below_all_scores_is_prevalence() {
        let scores = [0.5, 0.6, 0.7, 0.8];
        let labels = [true, false, true, true];
        assert_relative_eq!(accuracy_at(&scores, &labels, 0.0), 0.75);
    }

    #[test]
    fn stratified_folds_partition_exactly() {
        let labels: Vec<bool> = (0..23).map(|i| i % 3 == 0).collect();
        let folds = stratified_folds(&labels, 4, 9).unwrap();
        let mut seen: Vec<usize> = folds.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..23).collect::<Vec<_>>());
        for fold in &folds {
            assert!(fold.iter().any(|&i| labels[i]));
            assert!(fold.iter().any(|&i| !labels[i]));
        }
    }

    #[test]
    fn stratified_folds_error_when_class_too_small() {
        let labels = [true, false, false, false, false];
        assert!(matches!(
            stratified_folds(&labels, 2, 1),
            Err(Error::FoldMissingClass { .. }) | Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn aggregates_mark_single_rep_sd_as_missing() {
        let config = FitConfig::<f64>::default();
        let records = vec![record_ok("m", "c", 0, 0.8, 0.7, 0.1, &config)];
        let cells = EvalReport::aggregate(&records);
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].reps, 1);
        assert_relative_eq!(cells[0].auc_mean, 0.8);
        assert!(cells[0].auc_sd.is_none());
    }
}
