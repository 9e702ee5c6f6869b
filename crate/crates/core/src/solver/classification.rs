//! Binary-classification solver: alternating minimization of the augmented
//! Lagrangian with closed-form coordinate updates, plus the mask and
//! orthogonality projections applied every iteration.
//!
//! The constrained problem minimizes
//! `sum_i max(y_i z_i, 0)^2 + lambda ||X - UVᵀ||_F^2 + gamma ||beta||^2`
//! subject to `UᵀU = I`, `V = V ∘ S`, and `z = y - (U beta + b)`; the slack
//! constraint is enforced through the multiplier `q` with penalty `mu`.

use nalgebra::{DMatrix, DVector};

use crate::algebra::{apply_mask_in_place, orthogonalize, thin_svd};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solver::latent::{FullLatent, LatentUpdater};
use crate::types::config::{FitConfig, TaskKind};
use crate::types::dataset::MultiModalDataset;
use crate::types::model::{FissionModel, FitDiagnostics};
use crate::types::scaling::FeatureScaling;
use crate::types::structure::{Structure, StructureMask, StructureSpec};

/// Mutable solver state for one alternating-minimization run.
#[derive(Debug, Clone)]
pub struct AlmState<T: Real> {
    pub latent: DMatrix<T>,
    pub loadings: DMatrix<T>,
    pub coef: DVector<T>,
    pub intercept: T,
    pub slack: DVector<T>,
    pub dual: DVector<T>,
    pub iteration: usize,
    pub lagrangian_history: Vec<T>,
}

impl<T: Real> AlmState<T> {
    /// Fresh state: `z = y`, everything else zero; the latent matrix is
    /// installed by the caller before iterating.
    pub fn new(n: usize, p: usize, r: usize, y: &DVector<T>) -> Self {
        Self {
            latent: DMatrix::zeros(n, r),
            loadings: DMatrix::zeros(p, r),
            coef: DVector::zeros(r),
            intercept: T::zero(),
            slack: y.clone(),
            dual: DVector::zeros(n),
            iteration: 0,
            lagrangian_history: Vec::new(),
        }
    }
}

/// Primal coordinate steps of one iteration, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimalStep {
    LoadingsMasked,
    Coefficients,
    Intercept,
    Slack,
    LatentPreOrth,
}

/// Objective value after each primal coordinate step of one iteration.
#[derive(Debug, Clone)]
pub struct IterationTrace<T: Real> {
    pub steps: Vec<(PrimalStep, T)>,
}

/// Augmented Lagrangian
/// `sum_i max(y_i z_i, 0)^2 + lambda ||X - UVᵀ||_F^2 + gamma ||beta||^2
///  + (mu/2) ||d||^2 + <q, d>` with `d = z - y + U beta + b`.
pub fn lagrangian_value<T: Real>(
    state: &AlmState<T>,
    x: &DMatrix<T>,
    y: &DVector<T>,
    config: &FitConfig<T>,
) -> T {
    lagrangian_parts(
        &state.latent,
        &state.loadings,
        &state.coef,
        state.intercept,
        &state.slack,
        &state.dual,
        x,
        y,
        config,
    )
}

#[allow(clippy::too_many_arguments)]
fn lagrangian_parts<T: Real>(
    latent: &DMatrix<T>,
    loadings: &DMatrix<T>,
    coef: &DVector<T>,
    intercept: T,
    slack: &DVector<T>,
    dual: &DVector<T>,
    x: &DMatrix<T>,
    y: &DVector<T>,
    config: &FitConfig<T>,
) -> T {
    let mut hinge = T::zero();
    for i in 0..y.len() {
        let m = (y[i] * slack[i]).max(T::zero());
        hinge += m * m;
    }
    let recon = {
        let residual = x - latent * loadings.transpose();
        residual.norm_squared()
    };
    let ridge = coef.norm_squared();
    let mut violation = latent * coef;
    violation.add_scalar_mut(intercept);
    violation += slack;
    violation -= y;
    let penalty = T::of(0.5) * config.mu * violation.norm_squared() + dual.dot(&violation);
    hinge + config.lambda * recon + config.gamma * ridge + penalty
}

/// Shrinkage target `s = y - U beta - b - q/mu`.
pub fn slack_target<T: Real>(
    y: &DVector<T>,
    latent: &DMatrix<T>,
    coef: &DVector<T>,
    intercept: T,
    dual: &DVector<T>,
    mu: T,
) -> DVector<T> {
    let mut s = y - latent * coef;
    s.add_scalar_mut(-intercept);
    s -= &(dual / mu);
    s
}

/// Element-wise slack update: `z_i = s_i / (1 + 2/mu)` where `y_i s_i > 0`,
/// else `z_i = s_i`.
pub fn update_slack<T: Real>(s: &DVector<T>, y: &DVector<T>, mu: T) -> DVector<T> {
    let shrink = T::one() / (T::one() + T::of(2.0) / mu);
    DVector::from_iterator(
        s.len(),
        s.iter()
            .zip(y.iter())
            .map(|(&si, &yi)| if yi * si > T::zero() { si * shrink } else { si }),
    )
}

/// Coefficient update `beta = (mu / (2 gamma + mu)) Uᵀ (y - b - q/mu - z)`.
pub fn update_coefficients<T: Real>(
    latent: &DMatrix<T>,
    y: &DVector<T>,
    intercept: T,
    dual: &DVector<T>,
    slack: &DVector<T>,
    mu: T,
    gamma: T,
) -> DVector<T> {
    let factor = mu / (T::of(2.0) * gamma + mu);
    let mut resid = y - dual / mu - slack;
    resid.add_scalar_mut(-intercept);
    (latent.transpose() * resid) * factor
}

/// Intercept update `b = mean(y - z - U beta - q/mu)`.
pub fn update_intercept<T: Real>(
    latent: &DMatrix<T>,
    coef: &DVector<T>,
    y: &DVector<T>,
    slack: &DVector<T>,
    dual: &DVector<T>,
    mu: T,
) -> T {
    let resid = y - slack - latent * coef - dual / mu;
    resid.sum() / T::of(resid.len() as f64)
}

/// Latent update
/// `U = (lambda XV + (mu/2)(y - b - z - q/mu) betaᵀ)(lambda VᵀV + (mu/2) beta betaᵀ)⁻¹`,
/// solved as a linear system. The caller orthogonalizes the result.
#[allow(clippy::too_many_arguments)]
pub fn update_latent_complete<T: Real>(
    x: &DMatrix<T>,
    loadings: &DMatrix<T>,
    coef: &DVector<T>,
    y: &DVector<T>,
    intercept: T,
    slack: &DVector<T>,
    dual: &DVector<T>,
    mu: T,
    lambda: T,
) -> Result<DMatrix<T>> {
    let target = latent_target(y, intercept, slack, dual, mu);
    FullLatent.update(x, loadings, coef, &target, lambda, T::of(0.5) * mu)
}

/// Per-sample weights `(mu/2)(y - b - z - q/mu)` multiplying `betaᵀ` in the
/// latent update.
pub(crate) fn latent_target<T: Real>(
    y: &DVector<T>,
    intercept: T,
    slack: &DVector<T>,
    dual: &DVector<T>,
    mu: T,
) -> DVector<T> {
    let mut t = y - slack - dual / mu;
    t.add_scalar_mut(-intercept);
    t * (T::of(0.5) * mu)
}

/// Dual ascent `q <- q + mu (z - y + U beta + b)`.
pub fn update_dual<T: Real>(
    dual: &DVector<T>,
    slack: &DVector<T>,
    y: &DVector<T>,
    latent: &DMatrix<T>,
    coef: &DVector<T>,
    intercept: T,
    mu: T,
) -> DVector<T> {
    let mut violation = latent * coef;
    violation.add_scalar_mut(intercept);
    violation += slack;
    violation -= y;
    dual + violation * mu
}

/// How an alternating-minimization loop ended.
pub(crate) enum LoopExit {
    /// Objective change dropped to the stopping tolerance.
    Converged,
    /// Iteration cap reached.
    IterCap,
    /// A latent update degenerated; the state was rolled back to the start
    /// of the failed iteration and iteration stopped there.
    Degenerate(Error),
}

/// Runs alternating-minimization iterations on `state` until the absolute
/// change in the augmented Lagrangian drops to `epsilon` or `max_iter` is
/// reached.
pub(crate) fn run_alm<T: Real>(
    state: &mut AlmState<T>,
    x: &DMatrix<T>,
    y: &DVector<T>,
    mask: &StructureMask,
    config: &FitConfig<T>,
    max_iter: usize,
    updater: &mut dyn LatentUpdater<T>,
    mut trace: Option<&mut Vec<IterationTrace<T>>>,
) -> Result<LoopExit> {
    let mu = config.mu;
    let mut prev: Option<T> = None;
    for _ in 0..max_iter {
        let snapshot = state.clone();
        state.iteration += 1;
        let mut steps = Vec::new();

        state.loadings = x.transpose() * &state.latent;
        apply_mask_in_place(&mut state.loadings, mask)?;
        if trace.is_some() {
            steps.push((PrimalStep::LoadingsMasked, lagrangian_value(state, x, y, config)));
        }

        state.coef = update_coefficients(
            &state.latent,
            y,
            state.intercept,
            &state.dual,
            &state.slack,
            mu,
            config.gamma,
        );
        if trace.is_some() {
            steps.push((PrimalStep::Coefficients, lagrangian_value(state, x, y, config)));
        }

        state.intercept =
            update_intercept(&state.latent, &state.coef, y, &state.slack, &state.dual, mu);
        if trace.is_some() {
            steps.push((PrimalStep::Intercept, lagrangian_value(state, x, y, config)));
        }

        let s = slack_target(y, &state.latent, &state.coef, state.intercept, &state.dual, mu);
        state.slack = update_slack(&s, y, mu);
        if trace.is_some() {
            steps.push((PrimalStep::Slack, lagrangian_value(state, x, y, config)));
        }

        let target = latent_target(y, state.intercept, &state.slack, &state.dual, mu);
        let latent_raw = match updater.update(
            x,
            &state.loadings,
            &state.coef,
            &target,
            config.lambda,
            T::of(0.5) * mu,
        ) {
            Ok(u) => u,
            Err(e @ (Error::RankDeficient { .. } | Error::SingularSystem)) => {
                *state = snapshot;
                return Ok(LoopExit::Degenerate(e));
            }
            Err(e) => return Err(e),
        };
        if trace.is_some() {
            let l = lagrangian_parts(
                &latent_raw,
                &state.loadings,
                &state.coef,
                state.intercept,
                &state.slack,
                &state.dual,
                x,
                y,
                config,
            );
            steps.push((PrimalStep::LatentPreOrth, l));
        }
        state.latent = match orthogonalize(&latent_raw) {
            Ok(u) => u,
            Err(e @ Error::RankDeficient { .. }) => {
                *state = snapshot;
                return Ok(LoopExit::Degenerate(e));
            }
            Err(e) => return Err(e),
        };

        state.dual = update_dual(
            &state.dual,
            &state.slack,
            y,
            &state.latent,
            &state.coef,
            state.intercept,
            mu,
        );

        let value = lagrangian_value(state, x, y, config);
        state.lagrangian_history.push(value);
        if let Some(records) = trace.as_deref_mut() {
            records.push(IterationTrace { steps });
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

/// Top-`r` left singular vectors of `x`, the orthonormal starting latent.
pub(crate) fn init_latent_from_svd<T: Real>(x: &DMatrix<T>, r: usize) -> Result<DMatrix<T>> {
    let (l, _, _) = thin_svd(x)?;
    Ok(l.columns(0, r).into_owned())
}

pub(crate) fn check_rank_bound(r: usize, n: usize, p: usize) -> Result<()> {
    let limit = n.min(p);
    if r > limit {
        return Err(Error::RankTooLarge { rank: r, limit });
    }
    Ok(())
}

/// Core fit on an already-standardized feature matrix; used directly by the
/// incomplete solver for its complete-samples initialization.
pub(crate) fn fit_classification_core<T: Real>(
    x: &DMatrix<T>,
    y: &DVector<T>,
    structure: &Structure,
    config: &FitConfig<T>,
    max_iter: usize,
    trace: Option<&mut Vec<IterationTrace<T>>>,
) -> Result<(AlmState<T>, bool)> {
    let n = x.nrows();
    let p = x.ncols();
    let r = structure.mask.total_rank();
    check_rank_bound(r, n, p)?;
    let mut state = AlmState::new(n, p, r, y);
    state.latent = init_latent_from_svd(x, r)?;
    let exit = run_alm(
        &mut state,
        x,
        y,
        &structure.mask,
        config,
        max_iter,
        &mut FullLatent,
        trace,
    )?;
    let converged = match exit {
        LoopExit::Converged => true,
        LoopExit::IterCap => false,
        // the complete-modality contract treats a degenerate latent space
        // as an error: the caller should reduce component ranks
        LoopExit::Degenerate(e) => return Err(e),
    };
    Ok((state, converged))
}

/// Fits the classification model on complete-modality data.
///
/// The latent matrix starts from the top singular vectors of the data;
/// iterations stop
/// when the augmented Lagrangian changes by at most `epsilon` or `max_iter`
/// is reached (the model is then returned flagged as unconverged).
pub fn fit_classification<T: Real>(
    data: &MultiModalDataset<T>,
    spec: &StructureSpec,
    config: &FitConfig<T>,
) -> Result<FissionModel<T>> {
    fit_classification_impl(data, spec, config, None)
}

/// [`fit_classification`] that also returns the objective value after every
/// primal coordinate step of every iteration.
pub fn fit_classification_traced<T: Real>(
    data: &MultiModalDataset<T>,
    spec: &StructureSpec,
    config: &FitConfig<T>,
) -> Result<(FissionModel<T>, Vec<IterationTrace<T>>)> {
    let mut trace = Vec::new();
    let model = fit_classification_impl(data, spec, config, Some(&mut trace))?;
    Ok((model, trace))
}

fn fit_classification_impl<T: Real>(
    data: &MultiModalDataset<T>,
    spec: &StructureSpec,
    config: &FitConfig<T>,
    trace: Option<&mut Vec<IterationTrace<T>>>,
) -> Result<FissionModel<T>> {
    config.validate()?;
    if config.task != TaskKind::Classification {
        return Err(Error::InvalidConfig(
            "fit_classification requires a classification task".into(),
        ));
    }
    if data.labels().task() != TaskKind::Classification {
        return Err(Error::InvalidConfig(
            "dataset labels are continuous; use the regression solver".into(),
        ));
    }
    if !data.is_complete() {
        return Err(Error::InvalidConfig(
            "complete-modality solver requires every modality observed; use the incomplete solver"
                .into(),
        ));
    }

    let structure = Structure::new(spec.clone(), &data.feature_dims())?;
    // features are consumed raw; the identity transform is stored so the
    // prediction path is uniform (see types::scaling)
    let scaling = FeatureScaling::identity(data.total_features());
    let x = scaling.transform_concat(data);
    let y = data.labels().targets().clone();

    let (state, converged) =
        fit_classification_core(&x, &y, &structure, config, config.max_iter, trace)?;

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
            outer_iterations: None,
            outer_objective_history: Vec::new(),
        },
    })
}
