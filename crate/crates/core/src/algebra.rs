//! Structure-aware linear-algebra primitives: mask application, nearest
//! column-orthonormal projection via SVD, and test-time latent projection for
//! complete and incomplete samples.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::types::structure::StructureMask;

/// Relative singular-value floor below which a matrix is treated as
/// rank-deficient.
const RANK_TOLERANCE: f64 = 1e-12;

/// One-shot diagonal ridge added when a normal matrix fails Cholesky.
const RIDGE_BUMP: f64 = 1e-10;

/// Latent row recovered for one test sample.
#[derive(Debug, Clone)]
pub struct LatentProjection<T: Real> {
    /// Length-r latent components for the sample.
    pub u: DVector<T>,
    /// Modalities consumed by the projection, ascending.
    pub used_modalities: Vec<usize>,
}

/// Element-wise mask application; masked entries become exact zeros and
/// unmasked entries are preserved bit-for-bit.
pub fn apply_mask<T: Real>(v: &DMatrix<T>, mask: &StructureMask) -> Result<DMatrix<T>> {
    let mut out = v.clone();
    apply_mask_in_place(&mut out, mask)?;
    Ok(out)
}

/// In-place variant of [`apply_mask`].
pub fn apply_mask_in_place<T: Real>(v: &mut DMatrix<T>, mask: &StructureMask) -> Result<()> {
    if v.nrows() != mask.total_features() || v.ncols() != mask.total_rank() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "loadings are {}x{} but the mask is {}x{}",
                v.nrows(),
                v.ncols(),
                mask.total_features(),
                mask.total_rank()
            ),
        });
    }
    for j in 0..v.ncols() {
        for i in 0..v.nrows() {
            if !mask.is_one(i, j) {
                v[(i, j)] = T::zero();
            }
        }
    }
    Ok(())
}

/// Thin SVD `M = L diag(sigma) Vt` with singular values sorted in decreasing
/// order and a deterministic sign convention: the leading nonzero entry of
/// each column of `L` is made positive (the matching row of `Vt` flips with
/// it, so the product is unchanged).
pub(crate) fn thin_svd<T: Real>(m: &DMatrix<T>) -> Result<(DMatrix<T>, DVector<T>, DMatrix<T>)> {
    let svd = m
        .clone()
        .try_svd(true, true, T::default_epsilon(), 0)
        .ok_or(Error::SvdFailed)?;
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let sigma = svd.singular_values;
    let k = sigma.len();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        sigma[b]
            .partial_cmp(&sigma[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut l_sorted = DMatrix::zeros(u.nrows(), k);
    let mut vt_sorted = DMatrix::zeros(k, vt.ncols());
    let mut s_sorted = DVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        let flip = u
            .column(src)
            .iter()
            .find(|&&x| x != T::zero())
            .is_some_and(|&x| x < T::zero());
        let sign = if flip { -T::one() } else { T::one() };
        for i in 0..u.nrows() {
            l_sorted[(i, dst)] = u[(i, src)] * sign;
        }
        for j in 0..vt.ncols() {
            vt_sorted[(dst, j)] = vt[(src, j)] * sign;
        }
        s_sorted[dst] = sigma[src];
    }
    Ok((l_sorted, s_sorted, vt_sorted))
}

/// Nearest column-orthonormal matrix in Frobenius norm: `LVt` from the thin
/// SVD `U = L diag(sigma) Vt`.
///
/// Requires at least as many rows as columns and full column rank; a
/// rank-deficient input signals a degenerate latent space and the caller
/// should reduce component ranks.
pub fn orthogonalize<T: Real>(u: &DMatrix<T>) -> Result<DMatrix<T>> {
    if u.nrows() < u.ncols() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "cannot orthogonalize a {}x{} matrix with fewer rows than columns",
                u.nrows(),
                u.ncols()
            ),
        });
    }
    let (l, sigma, vt) = thin_svd(u)?;
    let s_max = sigma[0];
    let s_min = sigma[sigma.len() - 1];
    if s_max <= T::zero() {
        return Err(Error::RankDeficient { ratio: 0.0 });
    }
    let ratio = (s_min / s_max).as_f64();
    if ratio <= RANK_TOLERANCE {
        return Err(Error::RankDeficient { ratio });
    }
    Ok(l * vt)
}

/// Cholesky of a symmetric positive (semi-)definite matrix with a single
/// ridge retry: if the factorization fails, `1e-10 I` is added once; a second
/// failure is reported as a singular system.
pub(crate) fn spd_cholesky<T: Real>(a: DMatrix<T>) -> Result<Cholesky<T, Dyn>> {
    let bumped = a.clone();
    match Cholesky::new(a) {
        Some(c) => Ok(c),
        None => {
            let mut b = bumped;
            for i in 0..b.nrows() {
                b[(i, i)] += T::of(RIDGE_BUMP);
            }
            Cholesky::new(b).ok_or(Error::SingularSystem)
        }
    }
}

/// Shared projection kernel: solves `u (lambda VᵀV + beta betaᵀ) = lambda x V`
/// through Cholesky rather than an explicit inverse.
fn project_kernel<T: Real>(
    x: &DVector<T>,
    v: &DMatrix<T>,
    coef: &DVector<T>,
    lambda: T,
) -> Result<DVector<T>> {
    let mut a = (v.transpose() * v) * lambda;
    a += coef * coef.transpose();
    let rhs = (v.transpose() * x) * lambda;
    let chol = spd_cholesky(a)?;
    let u = chol.solve(&rhs);
    if u.iter().any(|e| !e.as_f64().is_finite()) {
        return Err(Error::NonFinite {
            context: "latent projection".into(),
        });
    }
    Ok(u)
}

/// Latent components for a complete test sample:
/// `u = (lambda x V)(lambda VᵀV + beta betaᵀ)⁻¹`.
///
/// `x` must already be standardized with the model's stored scaling.
pub fn project_complete<T: Real>(
    x: &DVector<T>,
    loadings: &DMatrix<T>,
    coef: &DVector<T>,
    lambda: T,
    mask: &StructureMask,
) -> Result<LatentProjection<T>> {
    if x.len() != loadings.nrows() || x.len() != mask.total_features() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "sample has {} features, loadings have {} rows, mask has {}",
                x.len(),
                loadings.nrows(),
                mask.total_features()
            ),
        });
    }
    if coef.len() != loadings.ncols() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "coefficients have length {} but rank is {}",
                coef.len(),
                loadings.ncols()
            ),
        });
    }
    let u = project_kernel(x, loadings, coef, lambda)?;
    Ok(LatentProjection {
        u,
        used_modalities: (0..mask.modality_count()).collect(),
    })
}

/// Latent components for a sample with modalities `omega` observed:
/// `u = (lambda sum_k x_k V_k)(lambda sum_k V_kᵀV_k + beta betaᵀ)⁻¹`.
///
/// `parts[i]` holds the standardized features of modality `omega[i]`; `omega`
/// must be strictly ascending. The available blocks are stacked and pushed
/// through the complete-sample kernel, so with `omega` covering every
/// modality the result is bit-identical to [`project_complete`].
pub fn project_incomplete<T: Real>(
    parts: &[DVector<T>],
    omega: &[usize],
    loadings: &DMatrix<T>,
    coef: &DVector<T>,
    lambda: T,
    mask: &StructureMask,
) -> Result<LatentProjection<T>> {
    if omega.is_empty() {
        return Err(Error::AllModalitiesMissing { sample: 0 });
    }
    if parts.len() != omega.len() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "{} feature blocks for {} observed modalities",
                parts.len(),
                omega.len()
            ),
        });
    }
    if !omega.windows(2).all(|w| w[0] < w[1]) || *omega.last().unwrap() >= mask.modality_count() {
        return Err(Error::InvalidConfig(
            "observed modality indices must be strictly ascending and in range".into(),
        ));
    }
    if loadings.nrows() != mask.total_features() || loadings.ncols() != coef.len() {
        return Err(Error::DimensionMismatch {
            context: "loadings shape does not match mask/coefficients".into(),
        });
    }

    let rows = mask.modality_rows();
    let p_omega: usize = omega.iter().map(|&k| rows[k].len()).sum();
    let r = loadings.ncols();
    let mut x_stack = DVector::zeros(p_omega);
    let mut v_stack = DMatrix::zeros(p_omega, r);
    let mut offset = 0;
    for (part, &k) in parts.iter().zip(omega) {
        let range = rows[k].clone();
        if part.len() != range.len() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "modality {k} block has {} features, expected {}",
                    part.len(),
                    range.len()
                ),
            });
        }
        for (i, &val) in part.iter().enumerate() {
            x_stack[offset + i] = val;
            for j in 0..r {
                v_stack[(offset + i, j)] = loadings[(range.start + i, j)];
            }
        }
        offset += range.len();
    }

    let u = project_kernel(&x_stack, &v_stack, coef, lambda)?;
    Ok(LatentProjection {
        u,
        used_modalities: omega.to_vec(),
    })
}
