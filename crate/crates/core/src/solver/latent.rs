//! Shared latent-update kernels.
//!
//! Both solvers update the latent matrix through systems of the form
//! `U (lambda VᵀV + a_scale beta betaᵀ) = lambda X V + target betaᵀ`,
//! differing only in the per-sample `target` weights and the `a_scale`
//! factor. The complete-modality path solves one matrix system; the
//! incomplete path solves one system per availability pattern, restricted to
//! the observed modality blocks of that pattern.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::scalar::Real;

pub(crate) trait LatentUpdater<T: Real> {
    fn update(
        &mut self,
        x: &DMatrix<T>,
        v: &DMatrix<T>,
        coef: &DVector<T>,
        target: &DVector<T>,
        lambda: T,
        a_scale: T,
    ) -> Result<DMatrix<T>>;
}

/// Matrix-form update over fully observed data.
pub(crate) struct FullLatent;

impl<T: Real> LatentUpdater<T> for FullLatent {
    fn update(
        &mut self,
        x: &DMatrix<T>,
        v: &DMatrix<T>,
        coef: &DVector<T>,
        target: &DVector<T>,
        lambda: T,
        a_scale: T,
    ) -> Result<DMatrix<T>> {
        solve_latent_block(x, v, coef, target, lambda, a_scale)
    }
}

/// Per-sample update restricted to each sample's observed modality blocks.
///
/// Samples sharing an availability pattern share the normal matrix, so rows
/// are grouped by pattern and solved in batches. A full-availability pattern
/// reproduces the matrix-form update bit-for-bit row by row.
pub(crate) struct RowwiseLatent<'a> {
    pub patterns: &'a [u32],
    pub modality_rows: &'a [Range<usize>],
}

impl<T: Real> LatentUpdater<T> for RowwiseLatent<'_> {
    fn update(
        &mut self,
        x: &DMatrix<T>,
        v: &DMatrix<T>,
        coef: &DVector<T>,
        target: &DVector<T>,
        lambda: T,
        a_scale: T,
    ) -> Result<DMatrix<T>> {
        let n = x.nrows();
        let r = v.ncols();
        debug_assert_eq!(self.patterns.len(), n);

        let mut groups: Vec<(u32, Vec<usize>)> = Vec::new();
        for (i, &pat) in self.patterns.iter().enumerate() {
            match groups.iter_mut().find(|(p, _)| *p == pat) {
                Some((_, rows)) => rows.push(i),
                None => groups.push((pat, vec![i])),
            }
        }

        let full_pattern = (1u32 << self.modality_rows.len()) - 1;
        let mut out = DMatrix::zeros(n, r);
        for (pattern, rows) in groups {
            let (x_g, v_g) = if pattern == full_pattern {
                (gather_rows(x, &rows), v.clone())
            } else {
                let cols = observed_columns(pattern, self.modality_rows);
                (
                    gather_rows_cols(x, &rows, &cols),
                    gather_rows_full(v, &cols),
                )
            };
            let target_g = DVector::from_iterator(rows.len(), rows.iter().map(|&i| target[i]));
            let u_g = solve_latent_block(&x_g, &v_g, coef, &target_g, lambda, a_scale)?;
            for (gi, &i) in rows.iter().enumerate() {
                for j in 0..r {
                    out[(i, j)] = u_g[(gi, j)];
                }
            }
        }
        Ok(out)
    }
}

/// Relative eigenvalue floor below which a direction of the normal matrix is
/// treated as dead and truncated out of the solve.
const TRUNCATION_RATIO: f64 = 1e-12;

/// Solves `U (lambda VᵀV + a_scale beta betaᵀ) = lambda X V + target betaᵀ`
/// via Cholesky on the symmetric normal matrix.
///
/// When components die (a loading column collapses toward zero) the normal
/// matrix turns near-singular in directions where the right-hand side is not
/// exactly zero, and a plain solve amplifies rounding noise by the inverse of
/// the dead eigenvalue. Those systems fall back to a truncated eigen-solve,
/// the minimum-norm reading of the closed-form inverse.
pub(crate) fn solve_latent_block<T: Real>(
    x: &DMatrix<T>,
    v: &DMatrix<T>,
    coef: &DVector<T>,
    target: &DVector<T>,
    lambda: T,
    a_scale: T,
) -> Result<DMatrix<T>> {
    let mut a = (v.transpose() * v) * lambda;
    a += (coef * coef.transpose()) * a_scale;
    let mut b = (x * v) * lambda;
    b += target * coef.transpose();

    if let Some(chol) = nalgebra::Cholesky::new(a.clone()) {
        let diag = chol.l_dirty().diagonal();
        let d_max = diag.iter().fold(T::zero(), |acc, &d| acc.max(d));
        let d_min = diag.iter().fold(d_max, |acc, &d| acc.min(d));
        // squared factor diagonals bound the eigenvalue spread
        if d_min > T::zero() && (d_min * d_min).as_f64() > TRUNCATION_RATIO * (d_max * d_max).as_f64()
        {
            return Ok(chol.solve(&b.transpose()).transpose());
        }
    }
    solve_truncated(a, &b)
}

/// Minimum-norm solve of `U A = B` for symmetric positive semi-definite `A`:
/// directions with eigenvalues below the truncation floor are dropped.
fn solve_truncated<T: Real>(a: DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>> {
    let r = a.nrows();
    let eigen = nalgebra::SymmetricEigen::new(a);
    let lambda_max = eigen
        .eigenvalues
        .iter()
        .fold(T::zero(), |acc, &l| acc.max(l));
    if lambda_max <= T::zero() {
        return Err(crate::error::Error::SingularSystem);
    }
    let floor = lambda_max * T::of(TRUNCATION_RATIO);
    let mut inv_diag = DVector::zeros(r);
    for (i, &l) in eigen.eigenvalues.iter().enumerate() {
        inv_diag[i] = if l > floor { T::one() / l } else { T::zero() };
    }
    // U = B Q diag(1/lambda) Qᵀ
    let bq = b * &eigen.eigenvectors;
    let mut scaled = bq;
    for j in 0..r {
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= inv_diag[j];
        }
    }
    Ok(scaled * eigen.eigenvectors.transpose())
}

fn observed_columns(pattern: u32, modality_rows: &[Range<usize>]) -> Vec<usize> {
    let mut cols = Vec::new();
    for (k, range) in modality_rows.iter().enumerate() {
        if pattern >> k & 1 == 1 {
            cols.extend(range.clone());
        }
    }
    cols
}

fn gather_rows<T: Real>(x: &DMatrix<T>, rows: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

fn gather_rows_cols<T: Real>(x: &DMatrix<T>, rows: &[usize], cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| x[(rows[i], cols[j])])
}

fn gather_rows_full<T: Real>(v: &DMatrix<T>, rows: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), v.ncols(), |i, j| v[(rows[i], j)])
}

/// Stacks the observed blocks of one sample and solves the same system for a
/// single row: `u (lambda V_ΩᵀV_Ω + a_scale beta betaᵀ) = lambda x_Ω V_Ω + w beta`.
pub(crate) fn solve_latent_row<T: Real>(
    x_blocks: &[DVector<T>],
    omega: &[usize],
    loadings: &DMatrix<T>,
    modality_rows: &[Range<usize>],
    coef: &DVector<T>,
    w: T,
    lambda: T,
    a_scale: T,
) -> Result<DVector<T>> {
    let p_omega: usize = omega.iter().map(|&k| modality_rows[k].len()).sum();
    let r = loadings.ncols();
    let mut x_stack = DMatrix::zeros(1, p_omega);
    let mut v_stack = DMatrix::zeros(p_omega, r);
    let mut offset = 0;
    for (block, &k) in x_blocks.iter().zip(omega) {
        let range = modality_rows[k].clone();
        for (i, &val) in block.iter().enumerate() {
            x_stack[(0, offset + i)] = val;
            for j in 0..r {
                v_stack[(offset + i, j)] = loadings[(range.start + i, j)];
            }
        }
        offset += range.len();
    }
    let target = DVector::from_element(1, w);
    let u = solve_latent_block(&x_stack, &v_stack, coef, &target, lambda, a_scale)?;
    Ok(u.row(0).transpose())
}
