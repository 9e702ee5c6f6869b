//! Continuous-response solver: alternating closed-form updates of
//! `||y - U beta||^2 + lambda ||X - UVᵀ||_F^2 + gamma ||beta||^2`
//! under `UᵀU = I` and `V = V ∘ S`.
//!
//! The response is centered at fit time and its mean stored as the model
//! intercept; the updates themselves carry no intercept term.

use nalgebra::{DMatrix, DVector};

use crate::algebra::{apply_mask_in_place, orthogonalize};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solver::classification::{check_rank_bound, init_latent_from_svd, LoopExit};
use crate::solver::latent::{solve_latent_row, FullLatent, LatentUpdater};
use crate::types::config::{FitConfig, TaskKind};
use crate::types::dataset::MultiModalDataset;
use crate::types::model::{FissionModel, FitDiagnostics};
use crate::types::scaling::FeatureScaling;
use crate::types::structure::{Structure, StructureMask, StructureSpec};

/// Steps of one regression iteration, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionStep {
    LoadingsMasked,
    Coefficients,
    LatentPreOrth,
}

/// Objective value after each coordinate step of one iteration.
#[derive(Debug, Clone)]
pub struct RegressionTrace<T: Real> {
    pub steps: Vec<(RegressionStep, T)>,
}

/// Solver state for the regression alternation.
#[derive(Debug, Clone)]
pub(crate) struct RegressionState<T: Real> {
    pub latent: DMatrix<T>,
    pub loadings: DMatrix<T>,
    pub coef: DVector<T>,
    pub iteration: usize,
    pub objective_history: Vec<T>,
}

/// `||y - U beta||^2 + lambda ||X - UVᵀ||_F^2 + gamma ||beta||^2`.
pub fn regression_objective<T: Real>(
    latent: &DMatrix<T>,
    loadings: &DMatrix<T>,
    coef: &DVector<T>,
    x: &DMatrix<T>,
    y: &DVector<T>,
    lambda: T,
    gamma: T,
) -> T {
    let pred = (y - latent * coef).norm_squared();
    let recon = (x - latent * loadings.transpose()).norm_squared();
    pred + lambda * recon + gamma * coef.norm_squared()
}

/// Matrix-form latent update
/// `U = (lambda XV + y betaᵀ)(lambda VᵀV + beta betaᵀ)⁻¹`, solved as a
/// linear system; the caller orthogonalizes the result.
pub fn update_latent_regression<T: Real>(
    x: &DMatrix<T>,
    loadings: &DMatrix<T>,
    coef: &DVector<T>,
    y: &DVector<T>,
    lambda: T,
) -> Result<DMatrix<T>> {
    FullLatent.update(x, loadings, coef, y, lambda, T::one())
}

/// Coefficient update `beta = (1 + gamma)^-1 Uᵀ y`, exact under `UᵀU = I`.
pub fn update_coefficients_regression<T: Real>(
    latent: &DMatrix<T>,
    y: &DVector<T>,
    gamma: T,
) -> DVector<T> {
    (latent.transpose() * y) / (T::one() + gamma)
}

/// Per-sample latent update over the observed modality blocks:
/// `u_i = (lambda sum_k x_ik V_k + y_i betaᵀ)(lambda sum_k V_kᵀV_k + beta betaᵀ)⁻¹`.
///
/// With every modality observed this is exactly row `i` of the matrix-form
/// update `U = (lambda XV + y betaᵀ)(lambda VᵀV + beta betaᵀ)⁻¹`.
#[allow(clippy::too_many_arguments)]
pub fn update_latent_row_regression<T: Real>(
    x_blocks: &[DVector<T>],
    omega: &[usize],
    loadings: &DMatrix<T>,
    mask: &StructureMask,
    y_i: T,
    coef: &DVector<T>,
    lambda: T,
) -> Result<DVector<T>> {
    if omega.is_empty() {
        return Err(Error::AllModalitiesMissing { sample: 0 });
    }
    solve_latent_row(
        x_blocks,
        omega,
        loadings,
        mask.modality_rows(),
        coef,
        y_i,
        lambda,
        T::one(),
    )
}

/// Runs the regression alternation on `state` until the objective change
/// drops to `epsilon` or `max_iter` is reached.
pub(crate) fn run_regression<T: Real>(
    state: &mut RegressionState<T>,
    x: &DMatrix<T>,
    y: &DVector<T>,
    mask: &StructureMask,
    config: &FitConfig<T>,
    max_iter: usize,
    updater: &mut dyn LatentUpdater<T>,
    mut trace: Option<&mut Vec<RegressionTrace<T>>>,
) -> Result<LoopExit> {
    let mut prev: Option<T> = None;
    for _ in 0..max_iter {
        let snapshot = state.clone();
        state.iteration += 1;
        let mut steps = Vec::new();

        state.loadings = x.transpose() * &state.latent;
        apply_mask_in_place(&mut state.loadings, mask)?;
        if trace.is_some() {
            steps.push((
                RegressionStep::LoadingsMasked,
                regression_objective(
                    &state.latent,
                    &state.loadings,
                    &state.coef,
                    x,
                    y,
                    config.lambda,
                    config.gamma,
                ),
            ));
        }

        state.coef = update_coefficients_regression(&state.latent, y, config.gamma);
        if trace.is_some() {
            steps.push((
                RegressionStep::Coefficients,
                regression_objective(
                    &state.latent,
                    &state.loadings,
                    &state.coef,
                    x,
                    y,
                    config.lambda,
                    config.gamma,
                ),
            ));
        }

        let latent_raw = match updater.update(x, &state.loadings, &state.coef, y, config.lambda, T::one())
        {
            Ok(u) => u,
            Err(e @ (Error::RankDeficient { .. } | Error::SingularSystem)) => {
                *state = snapshot;
                return Ok(LoopExit::Degenerate(e));
            }
            Err(e) => return Err(e),
        };
        if trace.is_some() {
            steps.push((
                RegressionStep::LatentPreOrth,
                regression_objective(
                    &latent_raw,
                    &state.loadings,
                    &state.coef,
                    x,
                    y,
                    config.lambda,
                    config.gamma,
                ),
            ));
        }
        state.latent = match orthogonalize(&latent_raw) {
            Ok(u) => u,
            Err(e @ Error::RankDeficient { .. }) => {
                *state = snapshot;
                return Ok(LoopExit::Degenerate(e));
            }
            Err(e) => return Err(e),
        };

        let value = regression_objective(
            &state.latent,
            &state.loadings,
            &state.coef,
            x,
            y,
            config.lambda,
            config.gamma,
        );
        state.objective_history.push(value);
        if let Some(records) = trace.as_deref_mut() {
            records.push(RegressionTrace { steps });
        }
        if let Some(p) = prev {
            if (value - p).abs() <= config.epsilon {
                return Ok(LoopExit::Converged);
            }
        }
        prev = Some(value);
    }
    Ok(LoopExit::IterCap)
}

/// Core fit on an already-standardized feature matrix with a pre-centered
/// response; used by the incomplete solver's initialization.
pub(crate) fn fit_regression_core<T: Real>(
    x: &DMatrix<T>,
    y_centered: &DVector<T>,
    structure: &Structure,
    config: &FitConfig<T>,
    max_iter: usize,
    trace: Option<&mut Vec<RegressionTrace<T>>>,
) -> Result<(RegressionState<T>, bool)> {
    let n = x.nrows();
    let p = x.ncols();
    let r = structure.mask.total_rank();
    check_rank_bound(r, n, p)?;
    let mut state = RegressionState {
        latent: init_latent_from_svd(x, r)?,
        loadings: DMatrix::zeros(p, r),
        coef: DVector::zeros(r),
        iteration: 0,
        objective_history: Vec::new(),
    };
    let exit = run_regression(
        &mut state,
        x,
        y_centered,
        &structure.mask,
        config,
        max_iter,
        &mut FullLatent,
        trace,
    )?;
    let converged = match exit {
        LoopExit::Converged => true,
        LoopExit::IterCap => false,
        LoopExit::Degenerate(e) => return Err(e),
    };
    Ok((state, converged))
}

/// Fits the regression model on complete-modality data.
pub fn fit_regression<T: Real>(
    data: &MultiModalDataset<T>,
    spec: &StructureSpec,
    config: &FitConfig<T>,
) -> Result<FissionModel<T>> {
    fit_regression_impl(data, spec, config, None)
}

/// [`fit_regression`] that also returns per-step objective values.
pub fn fit_regression_traced<T: Real>(
    data: &MultiModalDataset<T>,
    spec: &StructureSpec,
    config: &FitConfig<T>,
) -> Result<(FissionModel<T>, Vec<RegressionTrace<T>>)> {
    let mut trace = Vec::new();
    let model = fit_regression_impl(data, spec, config, Some(&mut trace))?;
    Ok((model, trace))
}

fn fit_regression_impl<T: Real>(
    data: &MultiModalDataset<T>,
    spec: &StructureSpec,
    config: &FitConfig<T>,
    trace: Option<&mut Vec<RegressionTrace<T>>>,
) -> Result<FissionModel<T>> {
    config.validate()?;
    if config.task != TaskKind::Regression {
        return Err(Error::InvalidConfig(
            "fit_regression requires a regression task".into(),
        ));
    }
    if data.labels().task() != TaskKind::Regression {
        return Err(Error::InvalidConfig(
            "dataset labels are binary; use the classification solver".into(),
        ));
    }
    if !data.is_complete() {
        return Err(Error::InvalidConfig(
            "complete-modality solver requires every modality observed; use the incomplete solver"
                .into(),
        ));
    }

    let structure = Structure::new(spec.clone(), &data.feature_dims())?;
    let scaling = FeatureScaling::identity(data.total_features());
    let x = scaling.transform_concat(data);
    let y = data.labels().targets();
    let y_mean = y.sum() / T::of(y.len() as f64);
    let y_centered = y.map(|v| v - y_mean);

    let (state, converged) =
        fit_regression_core(&x, &y_centered, &structure, config, config.max_iter, trace)?;

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
            outer_iterations: None,
            outer_objective_history: Vec::new(),
        },
    })
}
