//! Dense symmetric matrix functions and small helpers on top of nalgebra.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mathf;

/// Averages `m` with its transpose; returns the result and the largest
/// asymmetry that was removed.
pub fn symmetrize(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let t = m.transpose();
    let asym = (m - &t).amax();
    ((m + t) * 0.5, asym)
}

/// Eigenvalues in ascending order with matching eigenvector columns.
pub fn eigen_sym(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Inverse, inverse square root and extreme eigenvalues of an SPD matrix.
#[derive(Debug, Clone)]
pub struct SpdFunctions {
    pub inverse: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
    pub lmin: f64,
    pub lmax: f64,
}

/// Matrix functions through the symmetric eigendecomposition.
pub fn spd_functions(m: &DMatrix<f64>) -> Result<SpdFunctions> {
    let n = m.nrows();
    if n == 0 {
        return Ok(SpdFunctions {
            inverse: DMatrix::zeros(0, 0),
            inv_sqrt: DMatrix::zeros(0, 0),
            lmin: f64::INFINITY,
            lmax: 0.0,
        });
    }
    let (values, vectors) = eigen_sym(m);
    let lmin = values[0];
    let lmax = values[n - 1];
    if !(lmin > f64::EPSILON * (n as f64) * lmax.abs().max(1e-300)) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: lmin,
        });
    }
    let apply = |f: &dyn Fn(f64) -> f64| {
        let mut scaled = vectors.clone();
        for (c, &v) in values.iter().enumerate() {
            let s = f(v);
            scaled.column_mut(c).scale_mut(s);
        }
        scaled * vectors.transpose()
    };
    let inverse = symmetrize(&apply(&|v| 1.0 / v)).0;
    let inv_sqrt = symmetrize(&apply(&|v| 1.0 / mathf::sqrt(v))).0;
    Ok(SpdFunctions {
        inverse,
        inv_sqrt,
        lmin,
        lmax,
    })
}

/// Result of the Neumann-series route `M = h (I - A)`.
#[derive(Debug, Clone)]
pub struct NeumannSeries {
    pub inverse: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
    /// `‖A‖ = (λmax - λmin) / (λmax + λmin)`.
    pub ratio: f64,
    pub terms: usize,
}

/// Largest number of series terms attempted before giving up.
pub const NEUMANN_MAX_TERMS: usize = 4000;

/// Inverse and inverse square root of an SPD matrix by power series.
///
/// With `h = (λmax + λmin)/2`, `A = I - M/h` has norm `r < 1`. Both series
/// are truncated once `r^(N+1) / (1 - r) < tol`; the square-root coefficients
/// `C(2n, n) / 4^n` are at most 1, so the same tail bound applies. Returns
/// `None` when more than [`NEUMANN_MAX_TERMS`] terms would be needed.
pub fn neumann_series(m: &DMatrix<f64>, lmin: f64, lmax: f64, tol: f64) -> Option<NeumannSeries> {
    let n = m.nrows();
    if !(lmin > 0.0) || !(lmax >= lmin) {
        return None;
    }
    let h = 0.5 * (lmax + lmin);
    let ratio = (lmax - lmin) / (lmax + lmin);
    let mut terms = 0;
    while mathf::powi(ratio, terms as i32 + 1) / (1.0 - ratio) >= tol {
        terms += 1;
        if terms > NEUMANN_MAX_TERMS {
            return None;
        }
    }
    let a = DMatrix::<f64>::identity(n, n) - m / h;
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut inv = power.clone();
    let mut sqrt = power.clone();
    let mut c = 1.0;
    for j in 1..=terms {
        power = &power * &a;
        c *= (2 * j - 1) as f64 / (2 * j) as f64;
        inv += &power;
        sqrt += &power * c;
    }
    Some(NeumannSeries {
        inverse: inv / h,
        inv_sqrt: sqrt / mathf::sqrt(h),
        ratio,
        terms,
    })
}

/// `M⁻¹ = Mᵀ (M Mᵀ)⁻¹` for a general invertible matrix.
pub fn inverse_via_normal(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = symmetrize(&(m * m.transpose())).0;
    let f = spd_functions(&gram)?;
    Ok(m.transpose() * f.inverse)
}

/// `max |A - I|`.
pub fn identity_residual(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    (a - DMatrix::<f64>::identity(n, a.ncols())).amax()
}

/// Largest singular value through the eigenvalues of `AᵀA`.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let ata = symmetrize(&(a.transpose() * a)).0;
    let (values, _) = eigen_sym(&ata);
    mathf::sqrt(values.last().copied().unwrap_or(0.0).max(0.0))
}

/// Norm on `L²(μ)` of the operator `f ↦ T f` given by the matrix `t`.
pub fn weighted_operator_norm(t: &DMatrix<f64>, weights: &[f64]) -> f64 {
    let n = t.nrows();
    let conj = DMatrix::from_fn(n, n, |i, j| {
        t[(i, j)] * mathf::sqrt(weights[i]) / mathf::sqrt(weights[j])
    });
    spectral_norm(&conj)
}

/// Min-plus product `(A ⊗ B)(i, j) = min_k A(i, k) + B(k, j)`.
pub fn min_plus(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m, p) = (a.nrows(), a.ncols(), b.ncols());
    DMatrix::from_fn(n, p, |i, j| {
        (0..m)
            .map(|k| a[(i, k)] + b[(k, j)])
            .fold(f64::INFINITY, f64::min)
    })
}
