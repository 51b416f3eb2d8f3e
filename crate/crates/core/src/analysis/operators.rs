//! Operators in the wavelet basis: paraproducts, coefficient matrices,
//! almost-diagonal and Schur bounds, Calderón–Zygmund kernel constants.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::bmo::{carleson_norm, CoefficientField};
use super::sums::{size_constant, wavelet_rows};
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, weighted_operator_norm};
use crate::mathf;
use crate::nets::NetHierarchy;
use crate::report::Report;
use crate::rng::{aux_stream, sign, symmetric_f64};
use crate::space::FiniteSpace;
use crate::splines::SplineTable;
use crate::wavelets::{Member, WaveletBasis};

/// Level, centre and `μ(B(y, δ^k))` of every wavelet, in basis order.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletIndex {
    pub levels: Vec<i32>,
    pub centers: Vec<usize>,
    pub masses: Vec<f64>,
}

pub fn wavelet_index(space: &FiniteSpace, basis: &WaveletBasis) -> WaveletIndex {
    let mut idx = WaveletIndex {
        levels: Vec::new(),
        centers: Vec::new(),
        masses: Vec::new(),
    };
    for m in basis.members() {
        if let Member::Wavelet { level, center, .. } = *m {
            idx.levels.push(level);
            idx.centers.push(center);
            idx.masses.push(space.volume_of_ball(center, mathf::powi(basis.delta(), level)));
        }
    }
    idx
}

fn check_square(space: &FiniteSpace, m: &DMatrix<f64>) -> Result<()> {
    let n = space.n();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if m.nrows() != n { m.nrows() } else { m.ncols() },
        });
    }
    Ok(())
}

/// Operator matrix of `f ↦ ∫ K(·,y) f(y) dμ(y)`.
pub fn kernel_to_operator(space: &FiniteSpace, kernel: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(space, kernel)?;
    let mut op = kernel.clone();
    for (y, &w) in space.weights().iter().enumerate() {
        op.column_mut(y).scale_mut(w);
    }
    Ok(op)
}

/// `C[b][a] = (T ψ_a, ψ_b)` over wavelets, `T` acting on vectors by `op`.
pub fn operator_wavelet_matrix(space: &FiniteSpace, basis: &WaveletBasis, op: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(space, op)?;
    let psi = wavelet_rows(basis);
    let mut weighted = psi.clone();
    for (x, &w) in space.weights().iter().enumerate() {
        weighted.column_mut(x).scale_mut(w);
    }
    Ok(weighted * op * psi.transpose())
}

/// The right-hand side of the almost-diagonal estimate with `C0 = 1`.
pub fn almost_diagonal_bound(space: &FiniteSpace, delta: f64, idx: &WaveletIndex, b: usize, a: usize, eps: f64) -> f64 {
    let (ka, kb) = (idx.levels[a], idx.levels[b]);
    let (ya, yb) = (idx.centers[a], idx.centers[b]);
    let (ma, mb) = (idx.masses[a], idx.masses[b]);
    let d = space.dist(ya, yb);
    let kmin = ka.min(kb);
    let decay = mathf::powf(delta, f64::from((ka - kb).abs()) * eps)
        * mathf::powf(1.0 + d / mathf::powi(delta, kmin), -eps);
    decay * mathf::sqrt(ma * mb) / (ma + mb + space.volume_of_ball(ya, d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchurStatistics {
    /// `sup_b Σ_a |C_ba| w_a / w_b`.
    pub row: f64,
    /// `sup_a Σ_b |C_ba| w_b / w_a`.
    pub col: f64,
}

impl SchurStatistics {
    /// `√(row · col)`, an upper bound for the `ℓ²` norm.
    pub fn bound(&self) -> f64 {
        mathf::sqrt(self.row * self.col)
    }

    pub fn max(&self) -> f64 {
        self.row.max(self.col)
    }
}

/// Schur test with weights `w = √μ(B(y, δ^k))`.
pub fn schur_statistic(coeffs: &DMatrix<f64>, idx: &WaveletIndex) -> SchurStatistics {
    let w: Vec<f64> = idx.masses.iter().map(|&m| mathf::sqrt(m)).collect();
    let n = coeffs.nrows();
    let mut row: f64 = 0.0;
    let mut col: f64 = 0.0;
    for b in 0..n {
        let s: f64 = (0..n).map(|a| coeffs[(b, a)].abs() * w[a]).sum();
        row = row.max(s / w[b]);
    }
    for a in 0..n {
        let s: f64 = (0..n).map(|b| coeffs[(b, a)].abs() * w[b]).sum();
        col = col.max(s / w[a]);
    }
    SchurStatistics { row, col }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorDiagnostics {
    pub coeffs: DMatrix<f64>,
    /// `sup |C_ba| / bound(b, a)`, the empirical `C0`.
    pub c0: f64,
    pub schur: SchurStatistics,
    /// Singular-value oracle `‖C‖₂`.
    pub norm: f64,
}

pub fn operator_diagnostics(
    space: &FiniteSpace,
    basis: &WaveletBasis,
    op: &DMatrix<f64>,
    eps: f64,
) -> Result<OperatorDiagnostics> {
    let coeffs = operator_wavelet_matrix(space, basis, op)?;
    let idx = wavelet_index(space, basis);
    let mut c0: f64 = 0.0;
    for b in 0..coeffs.nrows() {
        for a in 0..coeffs.ncols() {
            c0 = c0.max(coeffs[(b, a)].abs() / almost_diagonal_bound(space, basis.delta(), &idx, b, a, eps));
        }
    }
    let schur = schur_statistic(&coeffs, &idx);
    let norm = spectral_norm(&coeffs);
    Ok(OperatorDiagnostics { coeffs, c0, schur, norm })
}

/// `1/sin(π(x−y)/n)` on `Z/nZ` with a zero diagonal.
pub fn hilbert_kernel(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |x, y| {
        if x == y {
            0.0
        } else {
            let t = (x as f64 - y as f64) / n as f64;
            1.0 / mathf::sin(core::f64::consts::PI * t)
        }
    })
}

/// Matrix of `f ↦ Σ_{k,α} (f, s̄^{k+1}_α)(β, ψ^k_α) ψ^k_α` with `s̄` the
/// spline of the wavelet centre normalized in `L¹(μ)`.
pub fn paraproduct_matrix(
    space: &FiniteSpace,
    h: &NetHierarchy,
    table: &SplineTable,
    basis: &WaveletBasis,
    beta: &[f64],
) -> Result<DMatrix<f64>> {
    let coeffs = basis.analyze(beta)?;
    let n = space.n();
    let w = space.weights();
    let mut out = DMatrix::zeros(n, n);
    for (i, m) in basis.members().iter().enumerate() {
        let Member::Wavelet { level, center, .. } = *m else {
            continue;
        };
        if coeffs[i] == 0.0 {
            continue;
        }
        let alpha = h.index_of(level + 1, center).expect("wavelet centre lies in the next net");
        let s = table.spline(level + 1, alpha);
        let mass = space.integral(&s);
        let psi = basis.matrix().row(i);
        for y in 0..n {
            let c = coeffs[i] * s[y] * w[y] / mass;
            if c == 0.0 {
                continue;
            }
            for x in 0..n {
                out[(x, y)] += psi[x] * c;
            }
        }
    }
    Ok(out)
}

/// Empirical constants of a kernel; regularity constants are `None` when
/// no triple is admissible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CzConstants {
    pub size: f64,
    /// `|K(x,y) − K(x,y′)|` over `0 < d(y,y′) ≤ d(x,y)/(2A0)`.
    pub y_regularity: Option<f64>,
    /// `|K(x,y) − K(x′,y)|` over `0 < d(x,x′) ≤ d(x,y)/(2A0)`.
    pub x_regularity: Option<f64>,
}

pub fn cz_kernel_check(space: &FiniteSpace, a0: f64, kernel: &DMatrix<f64>, s: f64) -> Result<CzConstants> {
    check_square(space, kernel)?;
    let n = space.n();
    let size = size_constant(space, kernel).0;
    let mut yr: Option<f64> = None;
    let mut xr: Option<f64> = None;
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let dxy = space.dist(x, y);
            let v = space.volume_of_ball(x, dxy);
            let gate = dxy / (2.0 * a0);
            for z in 0..n {
                let dyz = space.dist(y, z);
                if dyz > 0.0 && dyz <= gate {
                    let r = (kernel[(x, y)] - kernel[(x, z)]).abs() * v * mathf::powf(dxy / dyz, s);
                    yr = Some(yr.map_or(r, |c| c.max(r)));
                }
                let dxz = space.dist(x, z);
                if dxz > 0.0 && dxz <= gate {
                    let r = (kernel[(x, y)] - kernel[(z, y)]).abs() * v * mathf::powf(dxy / dxz, s);
                    xr = Some(xr.map_or(r, |c| c.max(r)));
                }
            }
        }
    }
    Ok(CzConstants {
        size,
        y_regularity: yr,
        x_regularity: xr,
    })
}

/// `K(x,y) = Σ_{a,b} c_ba ψ_b(x) ψ_a(y)` with `c_ba` the almost-diagonal
/// bound (`C0 = 1`) times a random sign.
pub fn synthesized_kernel(space: &FiniteSpace, basis: &WaveletBasis, eps: f64, seed: u64) -> DMatrix<f64> {
    let idx = wavelet_index(space, basis);
    let psi = wavelet_rows(basis);
    let m = psi.nrows();
    let mut rng = aux_stream(seed, 0x7379_6e74);
    let c = DMatrix::from_fn(m, m, |b, a| {
        almost_diagonal_bound(space, basis.delta(), &idx, b, a, eps) * sign(&mut rng)
    });
    psi.transpose() * c * psi
}

/// Range of `‖Π_β‖ / ‖{(β, ψ)}‖_Car` over random `β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParaproductRatios {
    pub min: f64,
    pub max: f64,
}

/// Paraproduct identities and operator diagnostics for the identity, the
/// constant kernel and (on cycles) the Hilbert kernel.
pub fn verify_operators(
    space: &FiniteSpace,
    h: &NetHierarchy,
    table: &SplineTable,
    basis: &WaveletBasis,
    parents: &[Vec<usize>],
    samples: usize,
    seed: u64,
) -> Result<(Report, ParaproductRatios)> {
    let n = space.n();
    let w = space.weights();
    let mut report = Report::new();
    let mut rng = aux_stream(seed, 0x7061_7261);
    let mut one_err: f64 = 0.0;
    let mut col_err: f64 = 0.0;
    let mut ratios = ParaproductRatios {
        min: f64::INFINITY,
        max: 0.0,
    };
    let coarse = basis.coarse().transpose() * basis.coarse();
    for _ in 0..samples {
        let beta: Vec<f64> = (0..n).map(|_| symmetric_f64(&mut rng)).collect();
        let pi = paraproduct_matrix(space, h, table, basis, &beta)?;
        // Π(1) = β − P_coarse β, which is β − mean(β) for a single coarse point
        let mut expect = beta.clone();
        for (x, e) in expect.iter_mut().enumerate() {
            *e -= (0..n).map(|y| coarse[(x, y)] * beta[y] * w[y]).sum::<f64>();
        }
        for (x, e) in expect.iter().enumerate() {
            let v: f64 = pi.row(x).sum();
            one_err = one_err.max((v - e).abs());
        }
        for y in 0..n {
            let v: f64 = (0..n).map(|x| pi[(x, y)] * w[x]).sum();
            col_err = col_err.max(v.abs());
        }
        let field = CoefficientField::of_function(basis, &beta)?;
        let car = carleson_norm(space, h, basis, parents, &field).value;
        if car > 0.0 {
            let r = weighted_operator_norm(&pi, w) / car;
            ratios.min = ratios.min.min(r);
            ratios.max = ratios.max.max(r);
        }
    }
    report.within("paraproduct.one", "paraproduct maps 1 to β minus its mean", 1e-8, one_err);
    report.within("paraproduct.mean_zero", "paraproduct columns have mean zero", 1e-10, col_err);

    let eps = basis.eta() / 2.0;
    let ident = operator_diagnostics(space, basis, &DMatrix::identity(n, n), eps)?;
    report.within(
        "operator.identity",
        "identity has identity coefficients",
        1e-8,
        crate::linalg::identity_residual(&ident.coeffs),
    );
    report.within("operator.identity_schur", "Schur statistic of the identity is 1", 1e-8, (ident.schur.max() - 1.0).abs());
    let ones = kernel_to_operator(space, &DMatrix::from_element(n, n, 1.0))?;
    let cst = operator_diagnostics(space, basis, &ones, eps)?;
    report.within("operator.constant_kernel", "constant kernel has zero coefficients", 1e-10, cst.coeffs.amax());

    let mut schur_gap: f64 = f64::INFINITY;
    for d in [&ident, &cst] {
        schur_gap = schur_gap.min(d.schur.bound() - d.norm);
    }
    let hil = operator_diagnostics(space, basis, &kernel_to_operator(space, &hilbert_kernel(n))?, eps)?;
    schur_gap = schur_gap.min(hil.schur.bound() - hil.norm);
    report.margin(
        "operator.schur_bound",
        "Schur statistic bounds the operator norm",
        1e-8,
        schur_gap + 1e-8,
        alloc::format!(
            "hilbert-type kernel: norm {:.4}, schur {:.4}/{:.4}, C0 {:.4}",
            hil.norm,
            hil.schur.row,
            hil.schur.col,
            hil.c0
        ),
    );
    report.margin(
        "operator.almost_diagonal",
        "almost-diagonal ratios are finite",
        0.0,
        if hil.c0.is_finite() { 1.0 } else { -1.0 },
        alloc::format!("C0 {:.4}", hil.c0),
    );
    Ok((report, ratios))
}

/// Sizes constants of synthesized kernels for several sign draws; the
/// largest is returned.
pub fn size_redundancy(space: &FiniteSpace, basis: &WaveletBasis, draws: usize, seed: u64) -> f64 {
    let eps = basis.eta() / 2.0;
    (0..draws)
        .map(|i| size_constant(space, &synthesized_kernel(space, basis, eps, seed.wrapping_add(i as u64))).0)
        .fold(0.0, f64::max)
}

/// Helper for reports on a zero kernel.
pub fn zero_kernel(n: usize) -> DMatrix<f64> {
    DMatrix::zeros(n, n)
}

/// Ratio vector `|C_ba| / bound` flattened in row order, for export.
pub fn almost_diagonal_ratios(space: &FiniteSpace, basis: &WaveletBasis, coeffs: &DMatrix<f64>, eps: f64) -> Vec<f64> {
    let idx = wavelet_index(space, basis);
    let mut out = vec![0.0; coeffs.nrows() * coeffs.ncols()];
    for b in 0..coeffs.nrows() {
        for a in 0..coeffs.ncols() {
            out[b * coeffs.ncols() + a] = coeffs[(b, a)].abs() / almost_diagonal_bound(space, basis.delta(), &idx, b, a, eps);
        }
    }
    out
}
