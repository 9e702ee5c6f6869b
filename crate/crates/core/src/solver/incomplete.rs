//! Training with whole-modality missingness: masked reconstruction loss,
//! per-sample latent updates over observed blocks, and an outer loop that
//! alternates parameter estimation with pseudo-reconstruction of the missing
//! rows.
//!
//! The pseudo-reconstruction `U_mis V_kᵀ` is not an imputation of the missing
//! data; it is the partial reconstruction the shared components support, fed
//! back so the loading update sees a full matrix.

use nalgebra::{DMatrix, DVector};

use crate::algebra::orthogonalize;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solver::classification::{
    check_rank_bound, fit_classification, fit_classification_core, init_latent_from_svd,
    latent_target, run_alm, AlmState, LoopExit,
};
use crate::solver::latent::{solve_latent_row, LatentUpdater, RowwiseLatent};
use crate::solver::regression::{
    fit_regression, fit_regression_core, run_regression, RegressionState,
};
use crate::types::config::{FitConfig, TaskKind};
use crate::types::dataset::MultiModalDataset;
use crate::types::model::{FissionModel, FitDiagnostics};
use crate::types::scaling::FeatureScaling;
use crate::types::structure::{Structure, StructureMask, StructureSpec};

/// Inner alternating-minimization iterations allowed per outer pass.
const INNER_ITER_CAP: usize = 100;

/// Fallback initialization only runs when fewer complete samples than this
/// (or than the total rank) are available.
const COMPLETE_INIT_MIN: usize = 10;

/// Dataset copy whose missing rows were filled with the model's partial
/// reconstruction; observed rows are preserved bit-for-bit.
#[derive(Debug, Clone)]
pub struct PseudoReconstruction<T: Real> {
    /// Per-modality matrices with missing rows replaced by `U_mis V_kᵀ`
    /// (mapped back to the original feature scale).
    pub filled: Vec<DMatrix<T>>,
    /// True where a row was pseudo-reconstructed; the exact complement of the
    /// dataset's availability.
    pub provenance: Vec<Vec<bool>>,
}

/// Masked objective: the prediction and ridge terms run over all samples,
/// the reconstruction term only over observed (sample, modality) pairs.
///
/// For classification this is
/// `sum_i max(y_i z_i, 0)^2 + lambda sum_k ||P_k(X_k - U V_kᵀ)||_F^2 + gamma ||beta||^2`;
/// for regression the hinge term is replaced by `||y - U beta||^2` (pass the
/// centered response the solver optimizes).
pub fn masked_objective<T: Real>(
    state: &AlmState<T>,
    x: &DMatrix<T>,
    availability: &[Vec<bool>],
    mask: &StructureMask,
    y: &DVector<T>,
    config: &FitConfig<T>,
) -> T {
    let prediction = match config.task {
        TaskKind::Classification => {
            let mut hinge = T::zero();
            for i in 0..y.len() {
                let m = (y[i] * state.slack[i]).max(T::zero());
                hinge += m * m;
            }
            hinge
        }
        TaskKind::Regression => (y - &state.latent * &state.coef).norm_squared(),
    };

    let mut recon = T::zero();
    for (k, rows) in mask.modality_rows().iter().enumerate() {
        for i in 0..x.nrows() {
            if !availability[k][i] {
                continue;
            }
            for j in rows.clone() {
                let mut fitted = T::zero();
                for c in 0..state.latent.ncols() {
                    fitted += state.latent[(i, c)] * state.loadings[(j, c)];
                }
                let d = x[(i, j)] - fitted;
                recon += d * d;
            }
        }
    }

    prediction + config.lambda * recon + config.gamma * state.coef.norm_squared()
}

/// Per-sample latent update over the observed blocks,
/// `u_i = (lambda sum_k x_ik V_k + (mu/2)(y_i - b - z_i - q_i/mu) betaᵀ)
///        (lambda sum_k V_kᵀV_k + (mu/2) beta betaᵀ)⁻¹`.
///
/// The `mu/2` factors make the update the exact per-row minimizer of the
/// masked augmented Lagrangian, so with every modality observed it coincides
/// with the corresponding row of the matrix-form latent update.
#[allow(clippy::too_many_arguments)]
pub fn update_latent_row_incomplete<T: Real>(
    x_blocks: &[DVector<T>],
    omega: &[usize],
    loadings: &DMatrix<T>,
    mask: &StructureMask,
    y_i: T,
    intercept: T,
    z_i: T,
    q_i: T,
    coef: &DVector<T>,
    mu: T,
    lambda: T,
) -> Result<DVector<T>> {
    if omega.is_empty() {
        return Err(Error::AllModalitiesMissing { sample: 0 });
    }
    let w = T::of(0.5) * mu * (y_i - intercept - z_i - q_i / mu);
    solve_latent_row(
        x_blocks,
        omega,
        loadings,
        mask.modality_rows(),
        coef,
        w,
        lambda,
        T::of(0.5) * mu,
    )
}

/// Fills the missing rows of each modality with the model's reconstruction
/// `U_mis V_kᵀ`, mapped back to the original feature scale; observed rows are
/// copied through untouched.
pub fn pseudo_reconstruct<T: Real>(
    model: &FissionModel<T>,
    data: &MultiModalDataset<T>,
) -> Result<PseudoReconstruction<T>> {
    if data.n() != model.latent.nrows() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "dataset has {} samples but the model stores {} latent rows",
                data.n(),
                model.latent.nrows()
            ),
        });
    }
    if data.feature_dims()
        != model
            .structure
            .mask
            .modality_rows()
            .iter()
            .map(|r| r.len())
            .collect::<Vec<_>>()
    {
        return Err(Error::DimensionMismatch {
            context: "dataset feature dimensions do not match the model".into(),
        });
    }

    let mut filled = Vec::with_capacity(data.modality_count());
    let mut provenance = Vec::with_capacity(data.modality_count());
    for (k, rows) in model.structure.mask.modality_rows().iter().enumerate() {
        let mut block = data.modality(k).clone();
        let mut pseudo = vec![false; data.n()];
        for i in 0..data.n() {
            if data.observed(k, i) {
                continue;
            }
            pseudo[i] = true;
            for (j, feature) in rows.clone().enumerate() {
                let mut fitted = T::zero();
                for c in 0..model.latent.ncols() {
                    fitted += model.latent[(i, c)] * model.loadings[(feature, c)];
                }
                block[(i, j)] = model.scaling.invert(feature, fitted);
            }
        }
        filled.push(block);
        provenance.push(pseudo);
    }
    Ok(PseudoReconstruction { filled, provenance })
}

/// Fits on data with whole-modality missingness by alternating parameter
/// estimation (the complete-modality alternation with per-sample latent
/// updates over observed blocks) and pseudo-reconstruction of missing rows,
/// until the masked objective change drops to `epsilon` or `outer_max_iter`
/// passes have run. Inner passes are capped at 100 iterations.
///
/// Loadings and coefficients are initialized from a fit on the complete
/// samples when at least `max(r, 10)` of them exist, otherwise from the SVD
/// of the mean-filled data. With no missing rows at all this dispatches to
/// the complete-modality solver and reproduces it exactly.
pub fn fit_incomplete<T: Real>(
    data: &MultiModalDataset<T>,
    spec: &StructureSpec,
    config: &FitConfig<T>,
) -> Result<FissionModel<T>> {
    config.validate()?;
    match (config.task, data.labels().task()) {
        (TaskKind::Classification, TaskKind::Classification) => {}
        (TaskKind::Regression, TaskKind::Regression) => {}
        _ => {
            return Err(Error::InvalidConfig(
                "task in the configuration does not match the dataset labels".into(),
            ))
        }
    }
    if data.is_complete() {
        return match config.task {
            TaskKind::Classification => fit_classification(data, spec, config),
            TaskKind::Regression => fit_regression(data, spec, config),
        };
    }
    for (k, count) in data.observed_counts().iter().enumerate() {
        if *count == 0 {
            return Err(Error::InvalidConfig(format!(
                "modality {k} is never observed; it cannot be fit"
            )));
        }
    }

    let structure = Structure::new(spec.clone(), &data.feature_dims())?;
    let r = structure.mask.total_rank();
    check_rank_bound(r, data.n(), data.total_features())?;

    let scaling = FeatureScaling::identity(data.total_features());
    let x_observed = scaling.transform_concat(data);
    let inner_cap = config.max_iter.min(INNER_ITER_CAP);

    match config.task {
        TaskKind::Classification => fit_incomplete_classification(
            data,
            structure,
            scaling,
            x_observed,
            config,
            inner_cap,
        ),
        TaskKind::Regression => {
            fit_incomplete_regression(data, structure, scaling, x_observed, config, inner_cap)
        }
    }
}

/// Fills the feature blocks of unobserved (sample, modality) pairs with the
/// per-feature mean over observed rows: the neutral starting value before
/// any reconstruction exists.
fn mean_fill_missing<T: Real>(
    x: &mut DMatrix<T>,
    data: &MultiModalDataset<T>,
    mask: &StructureMask,
) {
    for (k, rows) in mask.modality_rows().iter().enumerate() {
        let observed: Vec<usize> = (0..data.n()).filter(|&i| data.observed(k, i)).collect();
        for j in rows.clone() {
            let mut mean = T::zero();
            for &i in &observed {
                mean += x[(i, j)];
            }
            mean /= T::of(observed.len() as f64);
            for i in 0..data.n() {
                if !data.observed(k, i) {
                    x[(i, j)] = mean;
                }
            }
        }
    }
}

/// Overwrites missing rows of `x` with the current reconstruction `U V_kᵀ`.
fn refill_missing<T: Real>(
    x: &mut DMatrix<T>,
    latent: &DMatrix<T>,
    loadings: &DMatrix<T>,
    data: &MultiModalDataset<T>,
    mask: &StructureMask,
) {
    for (k, rows) in mask.modality_rows().iter().enumerate() {
        for i in 0..data.n() {
            if data.observed(k, i) {
                continue;
            }
            for j in rows.clone() {
                let mut fitted = T::zero();
                for c in 0..latent.ncols() {
                    fitted += latent[(i, c)] * loadings[(j, c)];
                }
                x[(i, j)] = fitted;
            }
        }
    }
}

fn availability_patterns<T: Real>(data: &MultiModalDataset<T>) -> Vec<u32> {
    (0..data.n()).map(|i| data.pattern(i)).collect()
}

fn fit_incomplete_classification<T: Real>(
    data: &MultiModalDataset<T>,
    structure: Structure,
    scaling: FeatureScaling<T>,
    x_observed: DMatrix<T>,
    config: &FitConfig<T>,
    inner_cap: usize,
) -> Result<FissionModel<T>> {
    let n = data.n();
    let p = data.total_features();
    let r = structure.mask.total_rank();
    let y = data.labels().targets().clone();
    let patterns = availability_patterns(data);

    let mut x_work = x_observed.clone();
    mean_fill_missing(&mut x_work, data, &structure.mask);

    // Initialization of loadings/coefficients (and intercept when available).
    let mut state = AlmState::new(n, p, r, &y);
    let complete_rows = data.complete_rows();
    if complete_rows.len() >= r.max(COMPLETE_INIT_MIN) {
        let x_sub = gather_rows(&x_observed, &complete_rows);
        let y_sub = DVector::from_iterator(
            complete_rows.len(),
            complete_rows.iter().map(|&i| y[i]),
        );
        let (init, _) =
            fit_classification_core(&x_sub, &y_sub, &structure, config, inner_cap, None)?;
        state.loadings = init.loadings;
        state.coef = init.coef;
        state.intercept = init.intercept;
    } else {
        let u_tmp = init_latent_from_svd(&x_work, r)?;
        let mut v0 = x_work.transpose() * &u_tmp;
        crate::algebra::apply_mask_in_place(&mut v0, &structure.mask)?;
        state.loadings = v0;
    }

    // First latent estimate from the initialized loadings/coefficients.
    let target = latent_target(&y, state.intercept, &state.slack, &state.dual, config.mu);
    let mut updater = RowwiseLatent {
        patterns: &patterns,
        modality_rows: structure.mask.modality_rows(),
    };
    let latent_raw = updater.update(
        &x_work,
        &state.loadings,
        &state.coef,
        &target,
        config.lambda,
        T::of(0.5) * config.mu,
    )?;
    state.latent = orthogonalize(&latent_raw)?;

    let mut outer_history: Vec<T> = Vec::new();
    let mut converged = false;
    let mut outer_done = 0;
    for outer in 1..=config.outer_max_iter {
        outer_done = outer;
        let exit = run_alm(
            &mut state,
            &x_work,
            &y,
            &structure.mask,
            config,
            inner_cap,
            &mut updater,
            None,
        )?;
        let objective = masked_objective(
            &state,
            &x_observed,
            data.availability(),
            &structure.mask,
            &y,
            config,
        );
        outer_history.push(objective);
        // refill cycles can run the latent space degenerate long after the
        // masked objective has plateaued; the inner loop rolled back to the
        // last valid state, which is kept rather than discarded
        if matches!(exit, LoopExit::Degenerate(_)) {
            break;
        }
        if outer >= 2 {
            let prev = outer_history[outer - 2];
            if (objective - prev).abs() <= config.epsilon {
                converged = true;
                break;
            }
        }
        if outer < config.outer_max_iter {
            refill_missing(&mut x_work, &state.latent, &state.loadings, data, &structure.mask);
        }
    }

    Ok(FissionModel {
        latent: state.latent,
        loadings: state.loadings,
        coef: state.coef,
        intercept: state.intercept,
        dual: Some(state.dual),
        slack: Some(state.slack),
        structure,
        config: *config,
        scaling,
        label_codec: data.labels().codec().copied(),
        diagnostics: FitDiagnostics {
            converged,
            iterations: state.iteration,
            objective_history: state.lagrangian_history,
            outer_iterations: Some(outer_done),
            outer_objective_history: outer_history,
        },
    })
}

fn fit_incomplete_regression<T: Real>(
    data: &MultiModalDataset<T>,
    structure: Structure,
    scaling: FeatureScaling<T>,
    x_observed: DMatrix<T>,
    config: &FitConfig<T>,
    inner_cap: usize,
) -> Result<FissionModel<T>> {
    let n = data.n();
    let p = data.total_features();
    let r = structure.mask.total_rank();
    let y_raw = data.labels().targets();
    let y_mean = y_raw.sum() / T::of(n as f64);
    let y = y_raw.map(|v| v - y_mean);
    let patterns = availability_patterns(data);

    let mut x_work = x_observed.clone();
    mean_fill_missing(&mut x_work, data, &structure.mask);

    let mut state = RegressionState {
        latent: DMatrix::zeros(n, r),
        loadings: DMatrix::zeros(p, r),
        coef: DVector::zeros(r),
        iteration: 0,
        objective_history: Vec::new(),
    };
    let complete_rows = data.complete_rows();
    if complete_rows.len() >= r.max(COMPLETE_INIT_MIN) {
        let x_sub = gather_rows(&x_observed, &complete_rows);
        let y_sub =
            DVector::from_iterator(complete_rows.len(), complete_rows.iter().map(|&i| y[i]));
        let (init, _) = fit_regression_core(&x_sub, &y_sub, &structure, config, inner_cap, None)?;
        state.loadings = init.loadings;
        state.coef = init.coef;
    } else {
        let u_tmp = init_latent_from_svd(&x_work, r)?;
        let mut v0 = x_work.transpose() * &u_tmp;
        crate::algebra::apply_mask_in_place(&mut v0, &structure.mask)?;
        state.loadings = v0;
    }

    let mut updater = RowwiseLatent {
        patterns: &patterns,
        modality_rows: structure.mask.modality_rows(),
    };
    let latent_raw = updater.update(
        &x_work,
        &state.loadings,
        &state.coef,
        &y,
        config.lambda,
        T::one(),
    )?;
    state.latent = orthogonalize(&latent_raw)?;

    // The masked objective reuses the classification state container.
    let mut alm_view = AlmState::new(n, p, r, &y);

    let mut outer_history: Vec<T> = Vec::new();
    let mut converged = false;
    let mut outer_done = 0;
    for outer in 1..=config.outer_max_iter {
        outer_done = outer;
        let exit = run_regression(
            &mut state,
            &x_work,
            &y,
            &structure.mask,
            config,
            inner_cap,
            &mut updater,
            None,
        )?;
        alm_view.latent = state.latent.clone();
        alm_view.loadings = state.loadings.clone();
        alm_view.coef = state.coef.clone();
        let objective = masked_objective(
            &alm_view,
            &x_observed,
            data.availability(),
            &structure.mask,
            &y,
            config,
        );
        outer_history.push(objective);
        if matches!(exit, LoopExit::Degenerate(_)) {
            break;
        }
        if outer >= 2 {
            let prev = outer_history[outer - 2];
            if (objective - prev).abs() <= config.epsilon {
                converged = true;
                break;
            }
        }
        if outer < config.outer_max_iter {
            refill_missing(&mut x_work, &state.latent, &state.loadings, data, &structure.mask);
        }
    }

    Ok(FissionModel {
        latent: state.latent,
        loadings: state.loadings,
        coef: state.coef,
        intercept: y_mean,
        dual: None,
        slack: None,
        structure,
        config: *config,
        scaling,
        label_codec: None,
        diagnostics: FitDiagnostics {
            converged,
            iterations: state.iteration,
            objective_history: state.objective_history,
            outer_iterations: Some(outer_done),
            outer_objective_history: outer_history,
        },
    })
}

fn gather_rows<T: Real>(x: &DMatrix<T>, rows: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}
