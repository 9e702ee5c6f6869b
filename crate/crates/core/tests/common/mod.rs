//! Shared helpers for the oracle test suites: deterministic random
//! instances, finite-difference gradients, and independent numerical
//! minimizers used to cross-check the closed-form updates.

#![allow(dead_code)]

use mmfl_core::algebra::orthogonalize;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| lo + (hi - lo) * rng.random::<f64>())
}

pub fn rand_vec(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(len, |_, _| lo + (hi - lo) * rng.random::<f64>())
}

/// Random matrix with orthonormal columns.
pub fn rand_orthonormal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    loop {
        let raw = rand_mat(rng, rows, cols, -1.0, 1.0);
        if let Ok(q) = orthogonalize(&raw) {
            return q;
        }
    }
}

/// Random +-1 label vector with both classes present.
pub fn rand_labels(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let y = DVector::from_fn(n, |_, _| if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 });
        if y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0) {
            return y;
        }
    }
}

/// Central-difference gradient of `f` with respect to a vector argument.
pub fn fd_gradient_vec(f: impl Fn(&DVector<f64>) -> f64, at: &DVector<f64>) -> DVector<f64> {
    let mut grad = DVector::zeros(at.len());
    for i in 0..at.len() {
        let h = 1e-5 * at[i].abs().max(1.0);
        let mut plus = at.clone();
        plus[i] += h;
        let mut minus = at.clone();
        minus[i] -= h;
        grad[i] = (f(&plus) - f(&minus)) / (2.0 * h);
    }
    grad
}

/// Central-difference gradient of `f` with respect to a matrix argument.
pub fn fd_gradient_mat(f: impl Fn(&DMatrix<f64>) -> f64, at: &DMatrix<f64>) -> DMatrix<f64> {
    let mut grad = DMatrix::zeros(at.nrows(), at.ncols());
    for j in 0..at.ncols() {
        for i in 0..at.nrows() {
            let h = 1e-5 * at[(i, j)].abs().max(1.0);
            let mut plus = at.clone();
            plus[(i, j)] += h;
            let mut minus = at.clone();
            minus[(i, j)] -= h;
            grad[(i, j)] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
    }
    grad
}

/// Central-difference derivative with respect to a scalar argument.
pub fn fd_gradient_scalar(f: impl Fn(f64) -> f64, at: f64) -> f64 {
    let h = 1e-6 * at.abs().max(1.0);
    (f(at + h) - f(at - h)) / (2.0 * h)
}

/// Minimizes the quadratic `lambda ||x - u Vᵀ||^2 + ||u beta||^2` over `u` by
/// steepest descent with exact line search; independent of the Cholesky
/// solve used by the library.
pub fn descend_projection_objective(
    x: &DVector<f64>,
    v: &DMatrix<f64>,
    beta: &DVector<f64>,
    lambda: f64,
    iters: usize,
) -> DVector<f64> {
    let r = v.ncols();
    // Hessian/2 = lambda VᵀV + beta betaᵀ
    let h = (v.transpose() * v) * lambda + beta * beta.transpose();
    let lin = (v.transpose() * x) * lambda; // gradient/2 = H u - lin
    let mut u = DVector::zeros(r);
    for _ in 0..iters {
        let grad = &h * &u - &lin;
        let hg = &h * &grad;
        let denom = grad.dot(&hg);
        if denom <= 0.0 || grad.norm() < 1e-14 {
            break;
        }
        let step = grad.dot(&grad) / denom;
        u -= grad * step;
    }
    u
}

/// Hinge-loss primal objective of the classification problem with the slack
/// variable eliminated:
/// `sum_i max(1 - y_i (u_i beta + b), 0)^2 + lambda ||X - UVᵀ||^2 + gamma ||beta||^2`.
pub fn primal_classification_objective(
    latent: &DMatrix<f64>,
    loadings: &DMatrix<f64>,
    coef: &DVector<f64>,
    intercept: f64,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    gamma: f64,
) -> f64 {
    let pred = latent * coef;
    let mut hinge = 0.0;
    for i in 0..y.len() {
        let margin = 1.0 - y[i] * (pred[i] + intercept);
        hinge += margin.max(0.0).powi(2);
    }
    let recon = (x - latent * loadings.transpose()).norm_squared();
    hinge + lambda * recon + gamma * coef.norm_squared()
}

/// Regression objective `||y - U beta||^2 + lambda ||X - UVᵀ||^2 + gamma ||beta||^2`.
pub fn primal_regression_objective(
    latent: &DMatrix<f64>,
    loadings: &DMatrix<f64>,
    coef: &DVector<f64>,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    gamma: f64,
) -> f64 {
    (y - latent * coef).norm_squared()
        + lambda * (x - latent * loadings.transpose()).norm_squared()
        + gamma * coef.norm_squared()
}

/// Projected-gradient minimizer of the primal classification objective under
/// `UᵀU = I` and the loading mask: gradient steps with backtracking, then
/// projection (orthonormalization / masking). Returns the final objective.
#[allow(clippy::too_many_arguments)]
pub fn projected_gradient_classification(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    mask: &mmfl_core::StructureMask,
    lambda: f64,
    gamma: f64,
    init_latent: &DMatrix<f64>,
    iters: usize,
) -> f64 {
    let n = x.nrows();
    let r = init_latent.ncols();
    let mut latent = init_latent.clone();
    let mut loadings =
        mmfl_core::algebra::apply_mask(&(x.transpose() * &latent), mask).expect("mask fits");
    let mut coef = DVector::zeros(r);
    let mut intercept = 0.0f64;

    let mut objective = primal_classification_objective(
        &latent, &loadings, &coef, intercept, x, y, lambda, gamma,
    );
    let mut step = 1e-3;
    for _ in 0..iters {
        let pred = &latent * &coef;
        let mut active = DVector::zeros(n);
        for i in 0..n {
            let margin = 1.0 - y[i] * (pred[i] + intercept);
            if margin > 0.0 {
                active[i] = margin;
            }
        }
        let recon = x - &latent * loadings.transpose();

        let mut grad_latent = -(&recon * &loadings) * (2.0 * lambda);
        for i in 0..n {
            if active[i] > 0.0 {
                for j in 0..r {
                    grad_latent[(i, j)] -= 2.0 * active[i] * y[i] * coef[j];
                }
            }
        }
        let grad_loadings = -(recon.transpose() * &latent) * (2.0 * lambda);
        let mut grad_coef = coef.clone() * (2.0 * gamma);
        let mut grad_intercept = 0.0;
        for i in 0..n {
            if active[i] > 0.0 {
                let w = 2.0 * active[i] * y[i];
                for j in 0..r {
                    grad_coef[j] -= w * latent[(i, j)];
                }
                grad_intercept -= w;
            }
        }

        // backtracking on the projected step
        let mut improved = false;
        for _ in 0..40 {
            let cand_latent_raw = &latent - &grad_latent * step;
            let cand_latent = match orthogonalize(&cand_latent_raw) {
                Ok(u) => u,
                Err(_) => {
                    step *= 0.5;
                    continue;
                }
            };
            let cand_loadings =
                mmfl_core::algebra::apply_mask(&(&loadings - &grad_loadings * step), mask)
                    .expect("mask fits");
            let cand_coef = &coef - &grad_coef * step;
            let cand_intercept = intercept - grad_intercept * step;
            let cand_objective = primal_classification_objective(
                &cand_latent,
                &cand_loadings,
                &cand_coef,
                cand_intercept,
                x,
                y,
                lambda,
                gamma,
            );
            if cand_objective < objective {
                latent = cand_latent;
                loadings = cand_loadings;
                coef = cand_coef;
                intercept = cand_intercept;
                objective = cand_objective;
                step *= 1.5;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved && step < 1e-16 {
            break;
        }
    }
    objective
}

/// Projected-gradient minimizer of the regression objective; returns the
/// final objective value.
#[allow(clippy::too_many_arguments)]
pub fn projected_gradient_regression(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    mask: &mmfl_core::StructureMask,
    lambda: f64,
    gamma: f64,
    init_latent: &DMatrix<f64>,
    iters: usize,
) -> f64 {
    let r = init_latent.ncols();
    let mut latent = init_latent.clone();
    let mut loadings =
        mmfl_core::algebra::apply_mask(&(x.transpose() * &latent), mask).expect("mask fits");
    let mut coef = DVector::zeros(r);

    let mut objective =
        primal_regression_objective(&latent, &loadings, &coef, x, y, lambda, gamma);
    let mut step = 1e-3;
    for _ in 0..iters {
        let resid_pred = y - &latent * &coef;
        let recon = x - &latent * loadings.transpose();
        let grad_latent =
            -(&resid_pred * coef.transpose()) * 2.0 - (&recon * &loadings) * (2.0 * lambda);
        let grad_loadings = -(recon.transpose() * &latent) * (2.0 * lambda);
        let grad_coef = -(latent.transpose() * &resid_pred) * 2.0 + coef.clone() * (2.0 * gamma);

        let mut improved = false;
        for _ in 0..40 {
            let cand_latent_raw = &latent - &grad_latent * step;
            let cand_latent = match orthogonalize(&cand_latent_raw) {
                Ok(u) => u,
                Err(_) => {
                    step *= 0.5;
                    continue;
                }
            };
            let cand_loadings =
                mmfl_core::algebra::apply_mask(&(&loadings - &grad_loadings * step), mask)
                    .expect("mask fits");
            let cand_coef = &coef - &grad_coef * step;
            let cand_objective = primal_regression_objective(
                &cand_latent,
                &cand_loadings,
                &cand_coef,
                x,
                y,
                lambda,
                gamma,
            );
            if cand_objective < objective {
                latent = cand_latent;
                loadings = cand_loadings;
                coef = cand_coef;
                objective = cand_objective;
                step *= 1.5;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved && step < 1e-16 {
            break;
        }
    }
    objective
}

/// Pearson correlation of two equal-length slices.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    cov / (va.sqrt() * vb.sqrt())
}
