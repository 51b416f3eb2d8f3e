//! Weighted `L²(μ)` structure on the spline spaces `V_k`: Gram matrices,
//! Riesz bounds, biorthogonal and orthonormal systems, and decay diagnostics
//! for the matrix functions involved.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::linalg::{identity_residual, min_plus, neumann_series, spd_functions, symmetrize};
use crate::mathf;
use crate::nets::NetHierarchy;
use crate::report::Report;
use crate::rng::{aux_stream, symmetric_f64};
use crate::space::FiniteSpace;
use crate::splines::{SplineTable, TransitionSystem};

/// Tail tolerance of the Neumann route.
pub const NEUMANN_TOL: f64 = 1e-13;

/// All per-level data of the spline MRA.
#[derive(Debug, Clone)]
pub struct GramLevel {
    pub level: i32,
    /// `μ^k_α = V(x^k_α, δ^k)`.
    pub volumes: Vec<f64>,
    /// `M_k(α,β) = ⟨s_α, s_β⟩ / √(μ_α μ_β)`.
    pub gram: DMatrix<f64>,
    /// Asymmetry removed when symmetrizing the raw Gram matrix.
    pub asymmetry: f64,
    pub inverse: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
    /// Extreme eigenvalues of `M_k`, the optimal Riesz constants.
    pub lower: f64,
    pub upper: f64,
    /// `s̃^k_α`, one row per `α`.
    pub biorthogonal: DMatrix<f64>,
    /// `φ^k_α`, one row per `α`.
    pub orthonormal: DMatrix<f64>,
}

/// Gram data for every level `k_coarse..=k_fine`.
#[derive(Debug, Clone)]
pub struct GramSystem {
    k_coarse: i32,
    levels: Vec<GramLevel>,
}

impl GramSystem {
    pub fn level(&self, k: i32) -> &GramLevel {
        &self.levels[(k - self.k_coarse) as usize]
    }

    pub fn levels(&self) -> &[GramLevel] {
        &self.levels
    }

    pub fn k_coarse(&self) -> i32 {
        self.k_coarse
    }
}

/// Rows of `a` weighted by `μ` times rows of `b`: `A W Bᵀ`.
pub(crate) fn weighted_products(a: &DMatrix<f64>, b: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let mut bw = b.clone();
    for (x, &w) in weights.iter().enumerate() {
        bw.column_mut(x).scale_mut(w);
    }
    a * bw.transpose()
}

/// `M_k`, the volumes `μ^k_α` and the removed asymmetry.
pub fn gram_matrix(space: &FiniteSpace, h: &NetHierarchy, table: &SplineTable, k: i32) -> (DMatrix<f64>, Vec<f64>, f64) {
    let s = table.level(k);
    let scale = h.scale(k);
    let volumes: Vec<f64> = h.level(k).iter().map(|&x| space.volume_of_ball(x, scale)).collect();
    let raw = weighted_products(s, s, space.weights());
    let m = raw.nrows();
    let normalized = DMatrix::from_fn(m, m, |a, b| raw[(a, b)] / mathf::sqrt(volumes[a] * volumes[b]));
    let (gram, asym) = symmetrize(&normalized);
    (gram, volumes, asym)
}

/// Gram system of one level.
pub fn gram_level(space: &FiniteSpace, h: &NetHierarchy, table: &SplineTable, k: i32) -> Result<GramLevel> {
    let (gram, volumes, asymmetry) = gram_matrix(space, h, table, k);
    let f = spd_functions(&gram)?;
    let s = table.level(k);
    let inv_sqrt_vol: Vec<f64> = volumes.iter().map(|&v| 1.0 / mathf::sqrt(v)).collect();
    // D^{-1/2} S
    let mut scaled = s.clone();
    for (a, &v) in inv_sqrt_vol.iter().enumerate() {
        scaled.row_mut(a).scale_mut(v);
    }
    let mut biorthogonal = &f.inverse * &scaled;
    for (a, &v) in inv_sqrt_vol.iter().enumerate() {
        biorthogonal.row_mut(a).scale_mut(v);
    }
    let orthonormal = &f.inv_sqrt * &scaled;
    Ok(GramLevel {
        level: k,
        volumes,
        gram,
        asymmetry,
        inverse: f.inverse,
        inv_sqrt: f.inv_sqrt,
        lower: f.lmin,
        upper: f.lmax,
        biorthogonal,
        orthonormal,
    })
}

pub fn build_gram_system(space: &FiniteSpace, h: &NetHierarchy, table: &SplineTable) -> Result<GramSystem> {
    let levels = h
        .level_range()
        .map(|k| gram_level(space, h, table, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(GramSystem {
        k_coarse: h.k_coarse(),
        levels,
    })
}

/// Optimal constants in `lower Σ|λ|²μ ≤ ‖Σ λ_α s_α‖² ≤ upper Σ|λ|²μ`.
pub fn riesz_bounds(gram: &DMatrix<f64>) -> Result<(f64, f64)> {
    let f = spd_functions(gram)?;
    Ok((f.lmin, f.lmax))
}

/// Worst relative violation of the Riesz sandwich over random coefficient
/// vectors (negative or zero when it holds).
pub fn riesz_sandwich_violation(
    space: &FiniteSpace,
    table: &SplineTable,
    level: &GramLevel,
    trials: usize,
    seed: u64,
) -> f64 {
    let s = table.level(level.level);
    let m = level.volumes.len();
    let mut rng = aux_stream(seed, 0x7269_6573 ^ (level.level as i64 as u64));
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let lambda: Vec<f64> = (0..m).map(|_| symmetric_f64(&mut rng)).collect();
        let f: Vec<f64> = (0..space.n())
            .map(|x| (0..m).map(|a| lambda[a] * s[(a, x)]).sum())
            .collect();
        let norm2 = space.inner(&f, &f);
        let energy: f64 = lambda.iter().zip(&level.volumes).map(|(l, v)| l * l * v).sum();
        if energy == 0.0 {
            continue;
        }
        let lo = (level.lower * energy - norm2) / energy;
        let hi = (norm2 - level.upper * energy) / energy;
        worst = worst.max(lo).max(hi);
    }
    worst
}

/// Checks every stated property of the Gram system.
pub fn verify_mra(
    space: &FiniteSpace,
    h: &NetHierarchy,
    ts: &TransitionSystem,
    table: &SplineTable,
    gs: &GramSystem,
    seed: u64,
) -> Report {
    let mut report = Report::new();
    let a0 = h.a0();
    let w = space.weights();
    let mut asym: f64 = 0.0;
    let mut band = Vec::new();
    let mut inv_res: f64 = 0.0;
    let mut sqrt_res: f64 = 0.0;
    let mut neumann: f64 = 0.0;
    let mut neumann_levels = 0;
    let mut biorth: f64 = 0.0;
    let mut ortho: f64 = 0.0;
    let mut mass: f64 = 0.0;
    let mut idem: f64 = 0.0;
    let mut riesz: f64 = f64::NEG_INFINITY;
    for lv in gs.levels() {
        let k = lv.level;
        let pts = h.level(k);
        let reach = 16.0 * mathf::powi(a0, 6) * h.scale(k);
        asym = asym.max(lv.asymmetry);
        for a in 0..pts.len() {
            for b in 0..pts.len() {
                if space.dist(pts[a], pts[b]) >= reach && lv.gram[(a, b)] != 0.0 {
                    band.push(format!("level {k}: M({a},{b}) = {:e}", lv.gram[(a, b)]));
                }
            }
        }
        inv_res = inv_res.max(identity_residual(&(&lv.inverse * &lv.gram)));
        sqrt_res = sqrt_res.max(identity_residual(&(&lv.inv_sqrt * &lv.inv_sqrt * &lv.gram)));
        if let Some(ns) = neumann_series(&lv.gram, lv.lower, lv.upper, NEUMANN_TOL) {
            neumann_levels += 1;
            neumann = neumann
                .max((&ns.inverse - &lv.inverse).amax())
                .max((&ns.inv_sqrt - &lv.inv_sqrt).amax());
        }
        let s = table.level(k);
        biorth = biorth.max(identity_residual(&weighted_products(s, &lv.biorthogonal, w)));
        ortho = ortho.max(identity_residual(&weighted_products(&lv.orthonormal, &lv.orthonormal, w)));
        for a in 0..pts.len() {
            let total: f64 = lv.biorthogonal.row(a).iter().zip(w).map(|(v, m)| v * m).sum();
            mass = mass.max((total - 1.0).abs());
        }
        // P_k as an operator on L²(μ): (P f)(x) = Σ_y P(x,y) f(y) μ(y)
        let mut op = lv.orthonormal.transpose() * &lv.orthonormal;
        for (y, &m) in w.iter().enumerate() {
            op.column_mut(y).scale_mut(m);
        }
        idem = idem.max((&op * &op - &op).amax());
        riesz = riesz.max(riesz_sandwich_violation(space, table, lv, 100, seed));
    }
    let mut nest: f64 = 0.0;
    for k in h.step_range() {
        let diff = table.level(k) - ts.p(k) * table.level(k + 1);
        for a in 0..diff.nrows() {
            let row: Vec<f64> = diff.row(a).iter().copied().collect();
            nest = nest.max(mathf::sqrt(space.inner(&row, &row)));
        }
    }
    let coarse = table.level(h.k_coarse());
    let mut coarse_bad = Vec::new();
    if coarse.nrows() == 1 && coarse.iter().any(|&v| v != 1.0) {
        coarse_bad.push(format!("s^{} is not identically one", h.k_coarse()));
    }
    report.within("mra.symmetry", "Gram matrices are symmetric", 1e-14, asym);
    report.exact(
        "mra.band",
        "M_k(α,β) = 0 when d(x_α, x_β) ≥ 16 A0^6 δ^k",
        band,
    );
    report.within("mra.inverse_residual", "M⁻¹ M = I", 1e-10, inv_res);
    report.within("mra.inv_sqrt_residual", "(M^-1/2)² M = I", 1e-10, sqrt_res);
    report.within(
        "mra.neumann_agreement",
        "Neumann series and eigendecomposition agree",
        1e-10,
        neumann,
    );
    if let Some(c) = report.checks.last_mut() {
        c.detail = format!("{} ({neumann_levels} level(s) converged)", c.detail);
    }
    report.within("mra.biorthogonality", "⟨s_α, s̃_β⟩ = δ_αβ", 1e-10, biorth);
    report.within("mra.orthonormality", "⟨φ_α, φ_β⟩ = δ_αβ", 1e-10, ortho);
    report.within("mra.mass_one", "∫ s̃_β dμ = 1", 1e-10, mass);
    report.within("mra.projection_idempotent", "P_k² = P_k", 1e-10, idem);
    report.within(
        "mra.riesz_sandwich",
        "lower Σ|λ|²μ ≤ ‖Σλs‖² ≤ upper Σ|λ|²μ on random coefficients",
        1e-10,
        riesz.max(0.0),
    );
    report.within("mra.nesting", "s^k_α = Σ_β p_αβ s^{k+1}_β in L²(μ)", 1e-10, nest);
    report.exact("mra.coarse_constants", "V at the coarsest level is the constants", coarse_bad);
    report
}

/// Least-squares fit of `ln|e| = ln C − γ (d/δ^k)^s` over entries above a
/// floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayProfile {
    pub exponent: f64,
    pub gamma: f64,
    pub c: f64,
    /// Largest amount by which `ln|e|` exceeds the fitted line.
    pub max_residual: f64,
    /// Residual sum of squares.
    pub rss: f64,
    pub entries: usize,
}

/// Default floor below which entries are ignored by the fits.
pub const DECAY_FLOOR: f64 = 1e-14;

/// Samples `(normalized distance, |entry|)` for the fits.
pub fn decay_samples(
    matrix: &DMatrix<f64>,
    dist: impl Fn(usize, usize) -> f64,
    scale: f64,
    floor: f64,
) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for a in 0..matrix.nrows() {
        for b in 0..matrix.ncols() {
            let v = matrix[(a, b)].abs();
            if v > floor {
                out.push((dist(a, b) / scale, v));
            }
        }
    }
    out
}

/// Fits the decay law at a fixed exponent.
pub fn fit_decay(samples: &[(f64, f64)], s: f64) -> Result<DecayProfile> {
    if samples.len() < 2 {
        return Err(Error::DegenerateFit("fewer than two entries above the floor"));
    }
    let xs: Vec<f64> = samples.iter().map(|&(d, _)| mathf::powf(d, s)).collect();
    let ys: Vec<f64> = samples.iter().map(|&(_, v)| mathf::ln(v)).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 1e-300) {
        return Err(Error::DegenerateFit("all entries at the same distance"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut rss = 0.0;
    let mut max_residual = f64::NEG_INFINITY;
    for (x, y) in xs.iter().zip(&ys) {
        let r = y - (intercept + slope * x);
        rss += r * r;
        max_residual = max_residual.max(r);
    }
    Ok(DecayProfile {
        exponent: s,
        gamma: -slope,
        c: mathf::exp(intercept),
        max_residual,
        rss,
        entries: samples.len(),
    })
}

/// Matrix-level decay fit against the distances between the centres.
pub fn decay_fit(
    space: &FiniteSpace,
    matrix: &DMatrix<f64>,
    centers: &[usize],
    scale: f64,
    s: f64,
) -> Result<DecayProfile> {
    let samples = decay_samples(matrix, |a, b| space.dist(centers[a], centers[b]), scale, DECAY_FLOOR);
    fit_decay(&samples, s)
}

/// Exponent in `[lo, hi]` minimizing the residual of the decay fit, by
/// golden-section search.
pub fn fit_decay_exponent(samples: &[(f64, f64)], lo: f64, hi: f64) -> Result<DecayProfile> {
    if !(0.0 < lo && lo < hi) {
        return Err(invalid("exponent range", "need 0 < lo < hi"));
    }
    let g = (mathf::sqrt(5.0) - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = fit_decay(samples, c)?.rss;
    let mut fd = fit_decay(samples, d)?.rss;
    for _ in 0..100 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = fit_decay(samples, c)?.rss;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = fit_decay(samples, d)?.rss;
        }
        if b - a < 1e-10 {
            break;
        }
    }
    fit_decay(samples, 0.5 * (a + b))
}

/// The sharp band example: `M(i,i) = 1`, `M(i,i+1) = −λ` on a window of
/// integers with the quasi-distance `|i−j|^r`.
#[derive(Debug, Clone)]
pub struct BandOracle {
    pub lambda: f64,
    pub r: f64,
    /// Window start; row `i` of the matrices is the integer `start + i`.
    pub start: i64,
    pub inverse: DMatrix<f64>,
    /// Worst deviation of interior entries from `λ^{j−i}` (`j ≥ i`, zero
    /// below the diagonal).
    pub upper_form_error: f64,
    /// Worst deviation of interior entries from `λ^{i−j}` in the same
    /// positions.
    pub lower_form_error: f64,
    /// Fit on interior entries with the exponent left free.
    pub fitted: DecayProfile,
}

/// Inverts the band matrix directly and compares both geometric forms on
/// `|i|, |j| ≤ interior`.
pub fn band_oracle(lambda: f64, r: f64, start: i64, end: i64, interior: i64) -> Result<BandOracle> {
    if !(0.0 < lambda && lambda < 1.0) {
        return Err(invalid("lambda", "must lie in (0, 1)"));
    }
    if !(r >= 1.0) || end <= start {
        return Err(invalid("window", "need r >= 1 and a nonempty window"));
    }
    let n = (end - start + 1) as usize;
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else if j == i + 1 {
            -lambda
        } else {
            0.0
        }
    });
    let inverse = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Internal("band matrix is singular".into()))?;
    let mut up: f64 = 0.0;
    let mut low: f64 = 0.0;
    let mut samples = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (zi, zj) = (start + i as i64, start + j as i64);
            if zi.abs() > interior || zj.abs() > interior {
                continue;
            }
            let v = inverse[(i, j)];
            let e = j as i32 - i as i32;
            let (u, l) = if e >= 0 {
                (mathf::powi(lambda, e), mathf::powi(lambda, -e))
            } else {
                (0.0, 0.0)
            };
            up = up.max((v - u).abs());
            low = low.max((v - l).abs());
            if v.abs() > DECAY_FLOOR && i != j {
                let d = mathf::powf((zi - zj).abs() as f64, r);
                samples.push((d, v.abs()));
            }
        }
    }
    let fitted = fit_decay_exponent(&samples, 0.05, 2.0)?;
    Ok(BandOracle {
        lambda,
        r,
        start,
        inverse,
        upper_form_error: up,
        lower_form_error: low,
        fitted,
    })
}

/// `κ_1..κ_{n_max}`: best constants in
/// `d(α_0, α_n) ≤ κ_n (d(α_0,α_1) + … + d(α_{n−1},α_n))`.
pub fn chain_constants(space: &FiniteSpace, n_max: usize) -> Result<Vec<f64>> {
    if n_max == 0 {
        return Err(invalid("n_max", "must be at least 1"));
    }
    let n = space.n();
    let d = DMatrix::from_fn(n, n, |i, j| space.dist(i, j));
    let mut chain = d.clone();
    let mut out = Vec::with_capacity(n_max);
    for step in 1..=n_max {
        if step > 1 {
            chain = min_plus(&chain, &d);
        }
        let mut best: f64 = 1.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    best = best.max(d[(i, j)] / chain[(i, j)]);
                }
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// `κ_1 = 1`, monotonicity, `κ_{m+n} ≤ A0 max(κ_m, κ_n)` and
/// `κ_n ≤ A0 n^{log₂ A0}`.
pub fn verify_chain_constants(kappa: &[f64], a0: f64) -> Report {
    let mut report = Report::new();
    let tol = 1e-12;
    let mut bad = Vec::new();
    if let Some(&k1) = kappa.first() {
        if (k1 - 1.0).abs() > tol {
            bad.push(format!("κ_1 = {k1}"));
        }
    }
    report.exact("chain.kappa1", "κ_1 = 1", bad);
    let mono: Vec<_> = kappa
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] < w[0] - tol)
        .map(|(i, w)| format!("κ_{} = {} > κ_{} = {}", i + 1, w[0], i + 2, w[1]))
        .collect();
    report.exact("chain.monotone", "κ_n is nondecreasing", mono);
    let mut sub = Vec::new();
    for m in 1..=kappa.len() {
        for n in 1..=kappa.len() - m {
            if m + n <= kappa.len() {
                let bound = a0 * kappa[m - 1].max(kappa[n - 1]);
                if kappa[m + n - 1] > bound * (1.0 + tol) {
                    sub.push(format!("κ_{} = {} > {bound}", m + n, kappa[m + n - 1]));
                }
            }
        }
    }
    report.exact("chain.submultiplicative", "κ_{m+n} ≤ A0 max(κ_m, κ_n)", sub);
    let growth: Vec<_> = kappa
        .iter()
        .enumerate()
        .filter_map(|(i, &k)| {
            let n = (i + 1) as f64;
            let bound = a0 * mathf::powf(n, mathf::log2(a0));
            (k > bound * (1.0 + tol)).then(|| format!("κ_{} = {k} > {bound}", i + 1))
        })
        .collect();
    report.exact("chain.growth", "κ_n ≤ A0 n^{log₂ A0}", growth);
    report
}

/// `sup_α exp(ε d(α,Ξ)/A0) Σ_{β∈Ξ} exp(−ε d(α,β))` for a 1-separated `Ξ`.
pub fn separated_sum(space: &FiniteSpace, xi: &[usize], eps: f64, a0: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    if xi.is_empty() {
        return Err(invalid("xi", "set must be nonempty"));
    }
    for (i, &a) in xi.iter().enumerate() {
        for &b in &xi[i + 1..] {
            if !(space.dist(a, b) >= 1.0) {
                return Err(invalid("xi", "set is not 1-separated"));
            }
        }
    }
    let mut sup: f64 = 0.0;
    for x in 0..space.n() {
        let to_set = space.dist_to_set(x, xi);
        let sum: f64 = xi.iter().map(|&b| mathf::exp(-eps * space.dist(x, b))).sum();
        sup = sup.max(mathf::exp(eps * to_set / a0) * sum);
    }
    Ok(sup)
}

/// Decay profiles of `M_k⁻¹` and `M_k^{-1/2}` at one level with the
/// exponent `s = (1 + log₂ A0)⁻¹`.
pub fn gram_decay(space: &FiniteSpace, h: &NetHierarchy, gs: &GramSystem, k: i32) -> Result<(DecayProfile, DecayProfile)> {
    let s = decay_exponent(h.a0());
    let lv = gs.level(k);
    let pts = h.level(k);
    let scale = h.scale(k);
    Ok((
        decay_fit(space, &lv.inverse, pts, scale, s)?,
        decay_fit(space, &lv.inv_sqrt, pts, scale, s)?,
    ))
}

/// `s = (1 + log₂ A0)⁻¹`, which is 1 for metrics.
pub fn decay_exponent(a0: f64) -> f64 {
    1.0 / (1.0 + mathf::log2(a0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{build_nets, Mode};
    use crate::order::build_reference_order;
    use crate::randomized::DyadicSampler;
    use crate::space::{fixture_a, fixture_b, SpaceSpec, WeightRule};
    use crate::splines::{compute_splines_exact, transition_probabilities};
    use approx::assert_abs_diff_eq;

    struct Built {
        space: FiniteSpace,
        h: NetHierarchy,
        ts: TransitionSystem,
        table: SplineTable,
        gs: GramSystem,
    }

    fn built(space: FiniteSpace, delta: f64) -> Built {
        let a0 = crate::space::quasi_triangle_constant(&space).0;
        let h = build_nets(&space, a0, delta, Mode::Relaxed).unwrap();
        let order = build_reference_order(&space, &h).unwrap();
        let sampler = DyadicSampler::new(&space, &h, &order).unwrap();
        let ts = transition_probabilities(&h, &sampler);
        let table = compute_splines_exact(&h, &ts);
        let gs = build_gram_system(&space, &h, &table).unwrap();
        Built { space, h, ts, table, gs }
    }

    #[test]
    fn fixture_a_gram() {
        let b = built(fixture_a(), 0.25);
        let top = b.gs.level(0);
        assert_eq!(top.gram, DMatrix::identity(4, 4));
        assert_eq!((top.lower, top.upper), (1.0, 1.0));
        assert_eq!(top.biorthogonal, DMatrix::identity(4, 4));
        assert_eq!(top.orthonormal, DMatrix::identity(4, 4));
        let coarse = b.gs.level(-1);
        assert_abs_diff_eq!(coarse.gram[(0, 0)], 1.0, epsilon = 1e-15);
        for x in 0..4 {
            assert_abs_diff_eq!(coarse.biorthogonal[(0, x)], 0.25, epsilon = 1e-15);
        }
        let r = verify_mra(&b.space, &b.h, &b.ts, &b.table, &b.gs, 1);
        assert!(r.all_passed(), "{:?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn fixture_b_and_cycle64_verify() {
        for (space, delta) in [
            (fixture_b(), 0.25),
            (SpaceSpec::Cycle { n: 64 }.generate(&WeightRule::Uniform).unwrap(), 0.125),
        ] {
            let b = built(space, delta);
            let r = verify_mra(&b.space, &b.h, &b.ts, &b.table, &b.gs, 3);
            assert!(r.all_passed(), "{:?}", r.failures().collect::<Vec<_>>());
            for lv in b.gs.levels() {
                assert!(lv.lower > 0.0 && lv.upper < f64::INFINITY);
                for a in 0..lv.gram.nrows() {
                    assert!(lv.gram[(a, a)] > 0.0);
                }
            }
        }
    }

    #[test]
    fn riesz_bounds_scale_invariant() {
        let b = built(fixture_b(), 0.25);
        let scaled = b.space.with_weights(b.space.weights().iter().map(|w| w * 7.0).collect()).unwrap();
        let gs2 = build_gram_system(&scaled, &b.h, &b.table).unwrap();
        for (l1, l2) in b.gs.levels().iter().zip(gs2.levels()) {
            assert_abs_diff_eq!(l1.lower, l2.lower, epsilon = 1e-12);
            assert_abs_diff_eq!(l1.upper, l2.upper, epsilon = 1e-12);
        }
    }

    #[test]
    fn band_oracle_orientation_and_exponent() {
        let o = band_oracle(0.5, 2.0, -32, 31, 16).unwrap();
        assert!(o.upper_form_error < 1e-9);
        assert!(o.lower_form_error > 0.1);
        assert!((o.fitted.exponent - 0.5).abs() < 0.05, "{:?}", o.fitted);
        assert_abs_diff_eq!(o.fitted.gamma, core::f64::consts::LN_2, epsilon = 1e-6);
    }

    #[test]
    fn diagonal_fit_is_degenerate() {
        let space = fixture_a();
        let m = DMatrix::<f64>::identity(4, 4);
        // only diagonal entries survive, all at distance zero
        assert!(matches!(
            decay_fit(&space, &m, &[0, 1, 2, 3], 1.0, 1.0),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn chain_constants_on_fixtures() {
        let k = chain_constants(&fixture_b(), 4).unwrap();
        assert!(k.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let p = SpaceSpec::PowerLine { n: 9, r: 2.0 }.generate(&WeightRule::Counting).unwrap();
        let k = chain_constants(&p, 6).unwrap();
        assert_eq!(k[0], 1.0);
        assert_eq!(k[1], 2.0);
        assert!(verify_chain_constants(&k, 2.0).all_passed());
    }

    #[test]
    fn separated_sums() {
        let line = SpaceSpec::Line { n: 16, normalized: false }.generate(&WeightRule::Counting).unwrap();
        assert!(separated_sum(&line, &[3], 1.0, 1.0).unwrap() <= 1.0 + 1e-12);
        let all: Vec<usize> = (0..16).collect();
        let v = separated_sum(&line, &all, 1.0, 1.0).unwrap();
        assert!(v.is_finite() && v > 1.0);
        let evens: Vec<usize> = (0..16).step_by(2).collect();
        let odds: Vec<usize> = (1..16).step_by(2).collect();
        let e = separated_sum(&line, &evens, 1.0, 1.0).unwrap();
        let o = separated_sum(&line, &odds, 1.0, 1.0).unwrap();
        assert!(v <= e + o + 1e-12);
        let half = line.scaled(0.5).unwrap();
        assert!(separated_sum(&half, &all, 1.0, 1.0).is_err());
    }

    #[test]
    fn neumann_matches_on_gram() {
        let b = built(SpaceSpec::Cycle { n: 64 }.generate(&WeightRule::Uniform).unwrap(), 0.125);
        let lv = b.gs.level(b.h.k_fine() - 1);
        let ns = neumann_series(&lv.gram, lv.lower, lv.upper, NEUMANN_TOL).unwrap();
        assert!(ns.ratio < 1.0);
        assert!((&ns.inverse - &lv.inverse).amax() < 1e-10);
    }
}
