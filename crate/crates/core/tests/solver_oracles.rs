//! Independent-oracle checks for the solvers: a literal re-implementation of
//! the augmented Lagrangian, finite-difference stationarity of every
//! closed-form update, per-step monotonicity on traced fits, and multi-start
//! projected-gradient comparisons.

mod common;

use common::*;
use mmfl_core::algebra::apply_mask;
use mmfl_core::solver::{
    fit_classification, fit_classification_traced, fit_regression, fit_regression_traced,
    lagrangian_value, regression_objective, slack_target, update_coefficients,
    update_coefficients_regression, update_dual, update_intercept, update_latent_complete,
    update_latent_row_regression, update_slack, AlmState,
};
use mmfl_core::types::structure::{BlockSpec, StructureSpec};
use mmfl_core::{FitConfig, MultiModalDataset, Structure, TaskKind};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Literal element-by-element evaluation of the augmented Lagrangian, kept
/// deliberately naive and separate from the library implementation.
fn lagrangian_by_hand(
    state: &AlmState<f64>,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    cfg: &FitConfig<f64>,
) -> f64 {
    let n = x.nrows();
    let p = x.ncols();
    let r = state.coef.len();
    let mut total = 0.0;
    for i in 0..n {
        let m = (y[i] * state.slack[i]).max(0.0);
        total += m * m;
    }
    for i in 0..n {
        for j in 0..p {
            let mut rec = 0.0;
            for c in 0..r {
                rec += state.latent[(i, c)] * state.loadings[(j, c)];
            }
            let d = x[(i, j)] - rec;
            total += cfg.lambda * d * d;
        }
    }
    for c in 0..r {
        total += cfg.gamma * state.coef[c] * state.coef[c];
    }
    for i in 0..n {
        let mut pred = state.intercept;
        for c in 0..r {
            pred += state.latent[(i, c)] * state.coef[c];
        }
        let viol = state.slack[i] - y[i] + pred;
        total += 0.5 * cfg.mu * viol * viol + state.dual[i] * viol;
    }
    total
}

struct Instance {
    x: DMatrix<f64>,
    y: DVector<f64>,
    state: AlmState<f64>,
    cfg: FitConfig<f64>,
}

/// Random small instance with the solver's in-loop invariants (orthonormal
/// latent, masked loadings) satisfied.
fn random_instance(seed: u64, n: usize, dims: &[usize], ranks: &[usize]) -> Instance {
    let mut r = rng(seed);
    let m = dims.len();
    let mut blocks = vec![BlockSpec::new((0..m).collect(), ranks[0])];
    for (k, &rank) in ranks.iter().enumerate().skip(1) {
        blocks.push(BlockSpec::new(vec![(k - 1) % m], rank));
    }
    let spec = StructureSpec::new(m, blocks).unwrap();
    let structure = Structure::new(spec, dims).unwrap();
    let p: usize = dims.iter().sum();
    let rank = structure.mask.total_rank();

    let x = rand_mat(&mut r, n, p, -1.0, 1.0);
    let y = rand_labels(&mut r, n);
    let mut state = AlmState::new(n, p, rank, &y);
    state.latent = rand_orthonormal(&mut r, n, rank);
    state.loadings =
        apply_mask(&rand_mat(&mut r, p, rank, -1.0, 1.0), &structure.mask).unwrap();
    state.coef = rand_vec(&mut r, rank, -1.0, 1.0);
    state.intercept = rand_vec(&mut r, 1, -0.5, 0.5)[0];
    state.slack = rand_vec(&mut r, n, -1.5, 1.5);
    state.dual = rand_vec(&mut r, n, -0.5, 0.5);
    let cfg = FitConfig {
        lambda: 0.8,
        gamma: 0.05,
        mu: 1.7,
        ..FitConfig::default()
    };
    Instance { x, y, state, cfg }
}

#[test]
fn lagrangian_matches_literal_reimplementation() {
    for seed in 0..5 {
        let inst = random_instance(100 + seed, 12, &[4, 3], &[1, 1, 1]);
        let ours = lagrangian_value(&inst.state, &inst.x, &inst.y, &inst.cfg);
        let oracle = lagrangian_by_hand(&inst.state, &inst.x, &inst.y, &inst.cfg);
        assert!(
            (ours - oracle).abs() <= 1e-10 * oracle.abs().max(1.0),
            "{ours} vs {oracle}"
        );
    }
}

#[test]
fn coefficient_update_zeroes_fd_gradient() {
    for seed in 0..5 {
        let inst = random_instance(200 + seed, 14, &[5, 4], &[2, 1, 1]);
        let beta = update_coefficients(
            &inst.state.latent,
            &inst.y,
            inst.state.intercept,
            &inst.state.dual,
            &inst.state.slack,
            inst.cfg.mu,
            inst.cfg.gamma,
        );
        let grad = fd_gradient_vec(
            |b| {
                let mut s = inst.state.clone();
                s.coef = b.clone();
                lagrangian_value(&s, &inst.x, &inst.y, &inst.cfg)
            },
            &beta,
        );
        assert!(grad.amax() <= 1e-5, "max |grad| = {}", grad.amax());
    }
}

#[test]
fn intercept_update_zeroes_fd_gradient() {
    for seed in 0..5 {
        let inst = random_instance(300 + seed, 11, &[4, 4], &[1, 2, 1]);
        let b = update_intercept(
            &inst.state.latent,
            &inst.state.coef,
            &inst.y,
            &inst.state.slack,
            &inst.state.dual,
            inst.cfg.mu,
        );
        let grad = fd_gradient_scalar(
            |bb| {
                let mut s = inst.state.clone();
                s.intercept = bb;
                lagrangian_value(&s, &inst.x, &inst.y, &inst.cfg)
            },
            b,
        );
        assert!(grad.abs() <= 1e-6, "grad = {grad}");
    }
}

#[test]
fn slack_update_zeroes_fd_gradient() {
    for seed in 0..5 {
        let inst = random_instance(400 + seed, 10, &[3, 3], &[1, 1, 1]);
        let s_vec = slack_target(
            &inst.y,
            &inst.state.latent,
            &inst.state.coef,
            inst.state.intercept,
            &inst.state.dual,
            inst.cfg.mu,
        );
        let z = update_slack(&s_vec, &inst.y, inst.cfg.mu);
        let grad = fd_gradient_vec(
            |zz| {
                let mut s = inst.state.clone();
                s.slack = zz.clone();
                lagrangian_value(&s, &inst.x, &inst.y, &inst.cfg)
            },
            &z,
        );
        assert!(grad.amax() <= 1e-5, "max |grad| = {}", grad.amax());
    }
}

#[test]
fn latent_update_zeroes_fd_gradient_pre_orthogonalization() {
    for seed in 0..5 {
        let inst = random_instance(500 + seed, 9, &[4, 3], &[1, 1, 1]);
        let u = update_latent_complete(
            &inst.x,
            &inst.state.loadings,
            &inst.state.coef,
            &inst.y,
            inst.state.intercept,
            &inst.state.slack,
            &inst.state.dual,
            inst.cfg.mu,
            inst.cfg.lambda,
        )
        .unwrap();
        let reference = fd_gradient_mat(
            |uu| {
                let mut s = inst.state.clone();
                s.latent = uu.clone();
                lagrangian_value(&s, &inst.x, &inst.y, &inst.cfg)
            },
            &inst.state.latent,
        )
        .amax();
        let grad = fd_gradient_mat(
            |uu| {
                let mut s = inst.state.clone();
                s.latent = uu.clone();
                lagrangian_value(&s, &inst.x, &inst.y, &inst.cfg)
            },
            &u,
        );
        assert!(
            grad.amax() <= 1e-4 * reference.max(1.0),
            "relative grad = {}",
            grad.amax() / reference.max(1.0)
        );
    }
}

#[test]
fn dual_update_is_exact_ascent_step() {
    let inst = random_instance(600, 8, &[3, 2], &[1, 1, 0]);
    let q1 = update_dual(
        &inst.state.dual,
        &inst.state.slack,
        &inst.y,
        &inst.state.latent,
        &inst.state.coef,
        inst.state.intercept,
        inst.cfg.mu,
    );
    let mut violation = &inst.state.latent * &inst.state.coef;
    violation.add_scalar_mut(inst.state.intercept);
    violation += &inst.state.slack;
    violation -= &inst.y;
    let expected = &inst.state.dual + violation * inst.cfg.mu;
    assert!((q1 - expected).amax() < 1e-14);
}

/// Separable noiseless rank-1 fixture: labels follow the sign of the single
/// latent component with a margin.
fn separable_rank1(seed: u64, n: usize, p: usize) -> (MultiModalDataset<f64>, StructureSpec) {
    let mut r = rng(seed);
    let mut u = DVector::zeros(n);
    let mut labels = vec![0.0f64; n];
    for i in 0..n {
        if i % 2 == 0 {
            u[i] = 1.0 + r.random::<f64>();
            labels[i] = 1.0;
        } else {
            u[i] = -1.0 - r.random::<f64>();
            labels[i] = 0.0;
        }
    }
    let v = rand_vec(&mut r, p, 0.5, 1.5);
    let x = &u * v.transpose();
    let data = MultiModalDataset::complete(vec![x], &labels, TaskKind::Classification).unwrap();
    let spec = StructureSpec::new(1, vec![BlockSpec::new(vec![0], 1)]).unwrap();
    (data, spec)
}

#[test]
fn separable_fit_reaches_perfect_training_accuracy() {
    let (data, spec) = separable_rank1(7, 30, 8);
    let cfg = FitConfig {
        task: TaskKind::Classification,
        ..FitConfig::default()
    };
    let model = fit_classification(&data, &spec, &cfg).unwrap();
    let scores: Vec<f64> = model.fitted_scores().iter().copied().collect();
    let labels = data.labels().positives().unwrap();
    let threshold = mmfl_core::eval::youden_threshold(&scores, &labels).unwrap();
    let accuracy = mmfl_core::eval::accuracy_at(&scores, &labels, threshold);
    assert_eq!(accuracy, 1.0);
}

#[test]
fn fitted_models_satisfy_structural_invariants() {
    let (data, spec) = separable_rank1(8, 24, 6);
    let cfg = FitConfig::default();
    let model = fit_classification(&data, &spec, &cfg).unwrap();
    let gram = model.latent.transpose() * &model.latent;
    assert!((gram - DMatrix::identity(1, 1)).amax() < 1e-8);
    let masked = apply_mask(&model.loadings, &model.structure.mask).unwrap();
    assert_eq!(masked, model.loadings);
}

#[test]
fn fit_is_bit_deterministic_across_runs() {
    let (data, spec) = separable_rank1(9, 20, 5);
    let cfg = FitConfig::default();
    let a = fit_classification(&data, &spec, &cfg).unwrap();
    let b = fit_classification(&data, &spec, &cfg).unwrap();
    assert_eq!(a.latent, b.latent);
    assert_eq!(a.loadings, b.loadings);
    assert_eq!(a.coef, b.coef);
    assert_eq!(a.intercept, b.intercept);
}

#[test]
fn primal_steps_never_increase_the_lagrangian() {
    let mut r = rng(42);
    let n = 26;
    let spec = StructureSpec::new(
        2,
        vec![
            BlockSpec::new(vec![0, 1], 1),
            BlockSpec::new(vec![0], 1),
            BlockSpec::new(vec![1], 1),
        ],
    )
    .unwrap();
    let x0 = rand_mat(&mut r, n, 11, -1.0, 1.0);
    let labels: Vec<f64> = (0..n).map(|i| f64::from(i % 2 == 0)).collect();
    let modalities = vec![
        x0.columns(0, 6).into_owned(),
        x0.columns(6, 5).into_owned(),
    ];
    let data = MultiModalDataset::complete(modalities, &labels, TaskKind::Classification).unwrap();
    let cfg = FitConfig {
        max_iter: 40,
        ..FitConfig::default()
    };
    let (_, trace) = fit_classification_traced(&data, &spec, &cfg).unwrap();
    assert!(!trace.is_empty());
    for (it, record) in trace.iter().enumerate() {
        let mut prev = f64::INFINITY;
        for (step, value) in &record.steps {
            assert!(
                *value <= prev + 1e-9,
                "iteration {it}: step {step:?} raised the objective from {prev} to {value}"
            );
            prev = *value;
        }
    }
}

#[test]
fn fit_matches_multistart_projected_gradient() {
    // small instance where the generator is inside the model class
    let mut r = rng(77);
    let n = 40;
    let dims = [6usize, 6];
    let spec = StructureSpec::new(
        2,
        vec![
            BlockSpec::new(vec![0, 1], 1),
            BlockSpec::new(vec![0], 1),
            BlockSpec::new(vec![1], 1),
        ],
    )
    .unwrap();
    let structure = Structure::new(spec.clone(), &dims).unwrap();
    let u_true = rand_orthonormal(&mut r, n, 3);
    let v_true =
        apply_mask(&rand_mat(&mut r, 12, 3, -1.0, 1.0), &structure.mask).unwrap() * 3.0;
    let x = &u_true * v_true.transpose();
    let labels: Vec<f64> = (0..n)
        .map(|i| f64::from(u_true[(i, 0)] > 0.0))
        .collect();
    if labels.iter().all(|&l| l == labels[0]) {
        panic!("degenerate label draw");
    }
    let modalities = vec![x.columns(0, 6).into_owned(), x.columns(6, 6).into_owned()];
    let data = MultiModalDataset::complete(modalities, &labels, TaskKind::Classification).unwrap();
    let cfg = FitConfig {
        lambda: 1.0,
        gamma: 0.01,
        epsilon: 1e-10,
        max_iter: 2000,
        ..FitConfig::default()
    };
    let model = fit_classification(&data, &spec, &cfg).unwrap();

    // evaluate our solution under the slack-eliminated primal objective on
    // the same raw matrix the fit consumed
    let y = data.labels().targets().clone();
    let ours = primal_classification_objective(
        &model.latent,
        &model.loadings,
        &model.coef,
        model.intercept,
        &x,
        &y,
        cfg.lambda,
        cfg.gamma,
    );

    let mut best_restart = f64::INFINITY;
    for restart in 0..50 {
        let init = rand_orthonormal(&mut rng(1000 + restart), n, 3);
        let value = projected_gradient_classification(
            &x,
            &y,
            &structure.mask,
            cfg.lambda,
            cfg.gamma,
            &init,
            400,
        );
        best_restart = best_restart.min(value);
    }
    assert!(
        ours <= best_restart + 1e-3,
        "alternating minimization {ours} vs best restart {best_restart}"
    );
}

#[test]
fn predict_with_zero_coefficients_returns_intercept() {
    let (data, spec) = separable_rank1(10, 20, 5);
    let cfg = FitConfig::default();
    let mut model = fit_classification(&data, &spec, &cfg).unwrap();
    model.coef = DVector::zeros(model.rank());
    let scores = model.predict(&data).unwrap();
    for &s in scores.iter() {
        assert!((s - model.intercept).abs() < 1e-12);
    }
}

#[test]
fn reprojected_training_scores_track_fitted_scores_on_noiseless_data() {
    let (data, spec) = separable_rank1(11, 40, 10);
    let cfg = FitConfig {
        epsilon: 1e-8,
        ..FitConfig::default()
    };
    let model = fit_classification(&data, &spec, &cfg).unwrap();
    let fitted: Vec<f64> = model.fitted_scores().iter().copied().collect();
    let reprojected: Vec<f64> = model.predict(&data).unwrap().iter().copied().collect();
    let corr = correlation(&fitted, &reprojected);
    assert!(corr > 0.99, "correlation {corr}");
}

// ---------------------------------------------------------------------------
// regression
// ---------------------------------------------------------------------------

#[test]
fn regression_objective_matches_term_by_term_evaluator() {
    let mut r = rng(900);
    for _ in 0..5 {
        let n = 9;
        let p = 7;
        let rank = 2;
        let latent = rand_mat(&mut r, n, rank, -1.0, 1.0);
        let loadings = rand_mat(&mut r, p, rank, -1.0, 1.0);
        let coef = rand_vec(&mut r, rank, -1.0, 1.0);
        let x = rand_mat(&mut r, n, p, -1.0, 1.0);
        let y = rand_vec(&mut r, n, -1.0, 1.0);
        let (lambda, gamma) = (0.6, 0.05);
        let ours = regression_objective(&latent, &loadings, &coef, &x, &y, lambda, gamma);
        let oracle = primal_regression_objective(&latent, &loadings, &coef, &x, &y, lambda, gamma);
        assert!((ours - oracle).abs() < 1e-10 * oracle.max(1.0));
    }
}

#[test]
fn regression_objective_edge_cases() {
    let latent = DMatrix::zeros(3, 2);
    let loadings = DMatrix::zeros(4, 2);
    let coef = DVector::zeros(2);
    let x = DMatrix::from_element(3, 4, 2.0);
    let y = DVector::from_element(3, 3.0);
    let value: f64 = regression_objective(&latent, &loadings, &coef, &x, &y, 0.5, 0.1);
    assert!((value - (27.0 + 0.5 * 48.0)).abs() < 1e-12);

    // exact fit with gamma = 0 vanishes
    let latent = DMatrix::identity(3, 2);
    let loadings = DMatrix::from_row_slice(4, 2, &[1., 0., 0., 1., 2., 0., 0., 2.]);
    let x = &latent * loadings.transpose();
    let coef = DVector::from_vec(vec![1.0, -1.0]);
    let y = &latent * &coef;
    let value: f64 = regression_objective(&latent, &loadings, &coef, &x, &y, 0.7, 0.0);
    assert!(value.abs() < 1e-12);
}

#[test]
fn regression_coefficients_are_ridge_normal_equations() {
    let mut r = rng(901);
    for _ in 0..5 {
        let latent = rand_orthonormal(&mut r, 12, 3);
        let y = rand_vec(&mut r, 12, -2.0, 2.0);
        let gamma = 0.3;
        let beta = update_coefficients_regression(&latent, &y, gamma);
        // (UᵀU + gamma I) beta = Uᵀ y
        let lhs = (latent.transpose() * &latent + DMatrix::identity(3, 3) * gamma) * &beta;
        let rhs = latent.transpose() * &y;
        assert!((lhs - rhs).amax() <= 1e-10);
        // gamma = 0 gives ordinary least squares under orthonormal U
        let ols = update_coefficients_regression(&latent, &y, 0.0);
        assert!((latent.transpose() * &y - &ols).amax() < 1e-12);
    }
}

#[test]
fn realizable_regression_reaches_high_r_squared() {
    let mut r = rng(902);
    let n = 40;
    let dims = [7usize, 6];
    let spec = StructureSpec::new(
        2,
        vec![
            BlockSpec::new(vec![0, 1], 2),
            BlockSpec::new(vec![0], 1),
            BlockSpec::new(vec![1], 1),
        ],
    )
    .unwrap();
    let structure = Structure::new(spec.clone(), &dims).unwrap();
    let u_true = rand_orthonormal(&mut r, n, 4);
    let v_true = apply_mask(&rand_mat(&mut r, 13, 4, -1.0, 1.0), &structure.mask).unwrap() * 2.0;
    let x = &u_true * v_true.transpose();
    // response with exactly zero mean inside the latent span: project the
    // coefficient draw orthogonal to the latent column means so the centered
    // target stays representable as U beta
    let mut beta_true = rand_vec(&mut r, 4, 0.5, 1.5);
    let col_means = u_true.transpose() * DVector::from_element(n, 1.0 / n as f64);
    beta_true -= &col_means * (col_means.dot(&beta_true) / col_means.norm_squared());
    let y = &u_true * &beta_true;
    let labels: Vec<f64> = y.iter().copied().collect();
    let modalities = vec![x.columns(0, 7).into_owned(), x.columns(7, 6).into_owned()];
    let data = MultiModalDataset::complete(modalities, &labels, TaskKind::Regression).unwrap();
    let cfg = FitConfig {
        task: TaskKind::Regression,
        gamma: 0.0,
        epsilon: 1e-12,
        max_iter: 3000,
        ..FitConfig::default()
    };
    let model = fit_regression(&data, &spec, &cfg).unwrap();
    let fitted = model.fitted_scores();
    let y_mean = labels.iter().sum::<f64>() / n as f64;
    let ss_res: f64 = labels
        .iter()
        .zip(fitted.iter())
        .map(|(&t, &f)| (t - f).powi(2))
        .sum();
    let ss_tot: f64 = labels.iter().map(|&t| (t - y_mean).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    assert!(r2 >= 0.999, "training R^2 = {r2}");
}

#[test]
fn regression_steps_never_increase_objective() {
    let mut r = rng(903);
    let n = 22;
    let spec = StructureSpec::global_only(1, 2).unwrap();
    let x = rand_mat(&mut r, n, 9, -1.0, 1.0);
    let labels: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
    let data = MultiModalDataset::complete(vec![x], &labels, TaskKind::Regression).unwrap();
    let cfg = FitConfig {
        task: TaskKind::Regression,
        max_iter: 30,
        ..FitConfig::default()
    };
    let (_, trace) = fit_regression_traced(&data, &spec, &cfg).unwrap();
    for record in &trace {
        let mut prev = f64::INFINITY;
        for (step, value) in &record.steps {
            assert!(*value <= prev + 1e-9, "step {step:?}: {prev} -> {value}");
            prev = *value;
        }
    }
}

#[test]
fn regression_row_update_matches_matrix_row_and_fd() {
    let mut r = rng(904);
    let dims = [4usize, 5];
    let spec = StructureSpec::new(
        2,
        vec![
            BlockSpec::new(vec![0, 1], 1),
            BlockSpec::new(vec![0], 1),
            BlockSpec::new(vec![1], 1),
        ],
    )
    .unwrap();
    let structure = Structure::new(spec, &dims).unwrap();
    let rank = 3;
    let loadings = apply_mask(&rand_mat(&mut r, 9, rank, -1.0, 1.0), &structure.mask).unwrap();
    let coef = rand_vec(&mut r, rank, -0.8, 0.8);
    let lambda = 1.1;

    // full-omega row equals the matrix update's row
    let x_row = rand_vec(&mut r, 9, -1.0, 1.0);
    let y_i = 0.37;
    let blocks = vec![x_row.rows(0, 4).into_owned(), x_row.rows(4, 5).into_owned()];
    let row = update_latent_row_regression(
        &blocks,
        &[0, 1],
        &loadings,
        &structure.mask,
        y_i,
        &coef,
        lambda,
    )
    .unwrap();
    let x_mat = DMatrix::from_fn(1, 9, |_, j| x_row[j]);
    let a = (loadings.transpose() * &loadings) * lambda + &coef * coef.transpose();
    let b = (&x_mat * &loadings) * lambda + DVector::from_element(1, y_i) * coef.transpose();
    let expected = nalgebra::Cholesky::new(a).unwrap().solve(&b.transpose());
    assert!((row.clone() - expected.column(0)).amax() <= 1e-10);

    // beta = 0, single modality with orthonormal block: u = x V
    let v0 = rand_orthonormal(&mut r, 4, 2);
    let mut v_single = DMatrix::zeros(9, 2);
    for i in 0..4 {
        for j in 0..2 {
            v_single[(i, j)] = v0[(i, j)];
        }
    }
    let spec_g = StructureSpec::global_only(2, 2).unwrap();
    let structure_g = Structure::new(spec_g, &dims).unwrap();
    let x0 = rand_vec(&mut r, 4, -1.0, 1.0);
    let row = update_latent_row_regression(
        std::slice::from_ref(&x0),
        &[0],
        &v_single,
        &structure_g.mask,
        0.0,
        &DVector::zeros(2),
        1.0,
    )
    .unwrap();
    assert!((row.clone() - v0.transpose() * &x0).amax() < 1e-10);

    // fd stationarity of the per-row objective
    let y_i = -0.6;
    let x1 = rand_vec(&mut r, 5, -1.0, 1.0);
    let v1 = structure.mask.modality_rows()[1].clone();
    let row = update_latent_row_regression(
        std::slice::from_ref(&x1),
        &[1],
        &loadings,
        &structure.mask,
        y_i,
        &coef,
        lambda,
    )
    .unwrap();
    let v_block = loadings.rows(v1.start, v1.len()).into_owned();
    let grad = fd_gradient_vec(
        |u| {
            (y_i - u.dot(&coef)).powi(2)
                + lambda * (&x1 - &v_block * u).norm_squared()
        },
        &row,
    );
    assert!(grad.amax() <= 1e-5, "max |grad| = {}", grad.amax());
}

#[test]
fn regression_matches_multistart_projected_gradient() {
    let mut r = rng(905);
    let n = 30;
    let dims = [5usize, 5];
    let spec = StructureSpec::new(
        2,
        vec![
            BlockSpec::new(vec![0, 1], 1),
            BlockSpec::new(vec![0], 1),
            BlockSpec::new(vec![1], 1),
        ],
    )
    .unwrap();
    let structure = Structure::new(spec.clone(), &dims).unwrap();
    let u_true = rand_orthonormal(&mut r, n, 3);
    let v_true = apply_mask(&rand_mat(&mut r, 10, 3, -1.0, 1.0), &structure.mask).unwrap() * 2.0;
    let x = &u_true * v_true.transpose();
    let mut beta_true = rand_vec(&mut r, 3, 0.5, 1.0);
    let col_means = u_true.transpose() * DVector::from_element(n, 1.0 / n as f64);
    beta_true -= &col_means * (col_means.dot(&beta_true) / col_means.norm_squared());
    let y = &u_true * &beta_true;
    let labels: Vec<f64> = y.iter().copied().collect();
    let modalities = vec![x.columns(0, 5).into_owned(), x.columns(5, 5).into_owned()];
    let data = MultiModalDataset::complete(modalities, &labels, TaskKind::Regression).unwrap();
    let cfg = FitConfig {
        task: TaskKind::Regression,
        lambda: 1.0,
        gamma: 0.01,
        epsilon: 1e-10,
        max_iter: 2000,
        ..FitConfig::default()
    };
    let model = fit_regression(&data, &spec, &cfg).unwrap();

    let y_mean = labels.iter().sum::<f64>() / n as f64;
    let y_c = DVector::from_iterator(n, labels.iter().map(|&v| v - y_mean));
    let ours = primal_regression_objective(
        &model.latent,
        &model.loadings,
        &model.coef,
        &x,
        &y_c,
        cfg.lambda,
        cfg.gamma,
    );
    let mut best_restart = f64::INFINITY;
    for restart in 0..50 {
        let init = rand_orthonormal(&mut rng(2000 + restart), n, 3);
        let value = projected_gradient_regression(
            &x,
            &y_c,
            &structure.mask,
            cfg.lambda,
            cfg.gamma,
            &init,
            400,
        );
        best_restart = best_restart.min(value);
    }
    assert!(
        ours <= best_restart + 1e-3,
        "alternating minimization {ours} vs best restart {best_restart}"
    );
}

#[test]
fn modality_rescaling_with_compensated_lambda_preserves_prediction_signs() {
    // scaling a modality's features by c > 0 while dividing lambda by c^2
    // reproduces the same trajectory up to the loading scale, so predicted
    // signs are unchanged on separable data
    let (data, spec) = separable_rank1(21, 30, 7);
    let c = 2.0;
    let scaled = MultiModalDataset::complete(
        vec![data.modality(0) * c],
        &data.labels().originals(),
        TaskKind::Classification,
    )
    .unwrap();
    let cfg = FitConfig {
        lambda: 1.0,
        ..FitConfig::default()
    };
    let cfg_scaled = FitConfig {
        lambda: cfg.lambda / (c * c),
        ..cfg
    };
    let base_model = fit_classification(&data, &spec, &cfg).unwrap();
    let scaled_model = fit_classification(&scaled, &spec, &cfg_scaled).unwrap();
    let base_scores = base_model.predict(&data).unwrap();
    let scaled_scores = scaled_model.predict(&scaled).unwrap();
    for (a, b) in base_scores.iter().zip(scaled_scores.iter()) {
        assert_eq!(a.signum(), b.signum(), "{a} vs {b}");
        assert!((a - b).abs() < 1e-8 * a.abs().max(1.0));
    }
}
