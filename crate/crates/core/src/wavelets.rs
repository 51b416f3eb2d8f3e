//! Orthonormal spline wavelets: pre-wavelets in `V_{k+1} ⊖ V_k` indexed by
//! `𝒴^k`, their symmetric orthonormalization, the assembled basis, and the
//! Littlewood–Paley pieces and kernels it induces.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{identity_residual, spd_functions, symmetrize, weighted_operator_norm};
use crate::mathf;
use crate::mra::{fit_decay, weighted_products, DecayProfile, GramSystem};
use crate::nets::NetHierarchy;
use crate::report::Report;
use crate::rng::{aux_stream, sign, symmetric_f64};
use crate::space::FiniteSpace;
use crate::splines::SplineTable;

/// Wavelets of one level `k`, one row per `β ∈ 𝒴^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletLevel {
    pub level: i32,
    /// Point ids `y^k_β`.
    pub centers: Vec<usize>,
    /// `ψ̃^k_β`.
    pub pre: DMatrix<f64>,
    /// `μ^{k+1}_β = V(y^k_β, δ^{k+1})`.
    pub volumes: Vec<f64>,
    /// `M̃(α,β) = ⟨ψ̃_α, ψ̃_β⟩ / √(μ^{k+1}_α μ^{k+1}_β)`.
    pub gram: DMatrix<f64>,
    /// `ψ^k_β`.
    pub functions: DMatrix<f64>,
}

/// Index of one basis member.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Member {
    /// The normalized constant (or `φ^{k_coarse}_α` when the coarsest net
    /// is not a single point).
    Coarse { center: usize },
    Wavelet { level: i32, beta: usize, center: usize },
}

impl Member {
    pub fn center(&self) -> usize {
        match *self {
            Member::Coarse { center } | Member::Wavelet { center, .. } => center,
        }
    }

    pub fn level(&self) -> Option<i32> {
        match *self {
            Member::Coarse { .. } => None,
            Member::Wavelet { level, .. } => Some(level),
        }
    }
}

/// The coarse projection `P f` and the detail pieces `(k, Q_k f)`.
pub type LittlewoodPaley = (Vec<f64>, Vec<(i32, Vec<f64>)>);

/// An orthonormal basis of `L²(μ)`: coarse functions followed by the
/// wavelets of every level in increasing `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletBasis {
    k_coarse: i32,
    delta: f64,
    a0: f64,
    eta: f64,
    weights: Vec<f64>,
    coarse: DMatrix<f64>,
    coarse_centers: Vec<usize>,
    levels: Vec<WaveletLevel>,
    members: Vec<Member>,
    matrix: DMatrix<f64>,
}

impl WaveletBasis {
    /// Assembles a basis from its parts; the member matrix has the coarse
    /// rows first.
    pub fn from_parts(
        h: &NetHierarchy,
        eta: f64,
        weights: Vec<f64>,
        coarse: DMatrix<f64>,
        coarse_centers: Vec<usize>,
        levels: Vec<WaveletLevel>,
    ) -> Result<Self> {
        let n = weights.len();
        let count = coarse.nrows() + levels.iter().map(|l| l.functions.nrows()).sum::<usize>();
        if count != n {
            return Err(Error::DimensionMismatch { expected: n, got: count });
        }
        let mut members = Vec::with_capacity(n);
        let mut matrix = DMatrix::zeros(n, n);
        for (i, &c) in coarse_centers.iter().enumerate() {
            members.push(Member::Coarse { center: c });
            matrix.row_mut(i).copy_from(&coarse.row(i));
        }
        for lv in &levels {
            for (beta, &c) in lv.centers.iter().enumerate() {
                matrix.row_mut(members.len()).copy_from(&lv.functions.row(beta));
                members.push(Member::Wavelet {
                    level: lv.level,
                    beta,
                    center: c,
                });
            }
        }
        Ok(Self {
            k_coarse: h.k_coarse(),
            delta: h.delta(),
            a0: h.a0(),
            eta,
            weights,
            coarse,
            coarse_centers,
            levels,
            members,
            matrix,
        })
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    /// One row per member.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn member(&self, i: usize) -> Vec<f64> {
        self.matrix.row(i).iter().copied().collect()
    }

    pub fn coarse(&self) -> &DMatrix<f64> {
        &self.coarse
    }

    pub fn coarse_centers(&self) -> &[usize] {
        &self.coarse_centers
    }

    /// Levels in increasing `k`, including those with empty `𝒴^k`.
    pub fn levels(&self) -> &[WaveletLevel] {
        &self.levels
    }

    pub fn level(&self, k: i32) -> &WaveletLevel {
        &self.levels[(k - self.k_coarse) as usize]
    }

    pub fn k_coarse(&self) -> i32 {
        self.k_coarse
    }

    /// Exclusive upper end of the wavelet levels.
    pub fn k_fine(&self) -> i32 {
        self.k_coarse + self.levels.len() as i32
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    /// Hölder exponent of the splines.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Decay exponent `a = (1 + 2 log₂ A0)⁻¹`.
    pub fn decay_exponent(&self) -> f64 {
        wavelet_decay_exponent(self.a0)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Coefficients `⟨f, member⟩_μ`.
    pub fn analyze(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f.len())?;
        Ok((0..self.len())
            .map(|i| {
                self.matrix
                    .row(i)
                    .iter()
                    .zip(f)
                    .zip(&self.weights)
                    .map(|((b, v), w)| b * v * w)
                    .sum()
            })
            .collect())
    }

    /// `Σ c_i member_i`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs.len())?;
        let mut f = vec![0.0; self.n()];
        for (i, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (x, v) in f.iter_mut().enumerate() {
                *v += c * self.matrix[(i, x)];
            }
        }
        Ok(f)
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got,
            });
        }
        Ok(())
    }

    /// Member indices belonging to level `k`.
    pub fn level_members(&self, k: i32) -> core::ops::Range<usize> {
        let mut start = self.coarse.nrows();
        for lv in &self.levels {
            let len = lv.functions.nrows();
            if lv.level == k {
                return start..start + len;
            }
            start += len;
        }
        start..start
    }

    /// `P_{k_coarse} f` and `Q_k f` for every level.
    pub fn littlewood_paley(&self, f: &[f64]) -> Result<LittlewoodPaley> {
        let c = self.analyze(f)?;
        let piece = |range: core::ops::Range<usize>| {
            let mut g = vec![0.0; self.n()];
            for i in range {
                for (x, v) in g.iter_mut().enumerate() {
                    *v += c[i] * self.matrix[(i, x)];
                }
            }
            g
        };
        let coarse = piece(0..self.coarse.nrows());
        let pieces = self
            .levels
            .iter()
            .map(|lv| (lv.level, piece(self.level_members(lv.level))))
            .collect();
        Ok((coarse, pieces))
    }

    /// `Q_k(x,y) = Σ_β ψ^k_β(x) ψ^k_β(y)`.
    pub fn q_kernel(&self, k: i32) -> DMatrix<f64> {
        let f = &self.level(k).functions;
        f.transpose() * f
    }

    /// `P_k(x,y)` by telescoping `P_{k+1} = P_k + Q_k` from the coarse
    /// projector; valid for `k_coarse ≤ k ≤ k_fine`.
    pub fn p_kernel(&self, k: i32) -> DMatrix<f64> {
        let mut p = self.coarse.transpose() * &self.coarse;
        for j in self.k_coarse..k {
            p += self.q_kernel(j);
        }
        p
    }

    /// Matrix of `f ↦ ∫ K(·,y) f(y) dμ(y)`.
    pub fn kernel_operator(&self, kernel: &DMatrix<f64>) -> DMatrix<f64> {
        let mut op = kernel.clone();
        for (y, &w) in self.weights.iter().enumerate() {
            op.column_mut(y).scale_mut(w);
        }
        op
    }
}

/// `a = (1 + 2 log₂ A0)⁻¹`, equal to 1 for metrics.
pub fn wavelet_decay_exponent(a0: f64) -> f64 {
    1.0 / (1.0 + 2.0 * mathf::log2(a0))
}

/// Pre-wavelets `ψ̃^k_β = s^{k+1}_β − Σ_α ⟨s^{k+1}_β, s̃^k_α⟩ s^k_α` for
/// `β ∈ 𝒴^k`; rows follow `h.new_points(k)`.
pub fn pre_wavelets(space: &FiniteSpace, h: &NetHierarchy, table: &SplineTable, gs: &GramSystem, k: i32) -> (Vec<usize>, DMatrix<f64>) {
    let centers = h.new_points(k);
    let n = space.n();
    if centers.is_empty() {
        return (centers, DMatrix::zeros(0, n));
    }
    let fine = table.level(k + 1);
    let rows: Vec<usize> = centers
        .iter()
        .map(|&y| h.index_of(k + 1, y).expect("new points lie in the finer net"))
        .collect();
    let s_next = DMatrix::from_fn(rows.len(), n, |b, x| fine[(rows[b], x)]);
    let coeffs = weighted_products(&s_next, &gs.level(k).biorthogonal, space.weights());
    let pre = &s_next - coeffs * table.level(k);
    (centers, pre)
}

/// Symmetric orthonormalization of one level:
/// `ψ_α = Σ_β M̃^{-1/2}(α,β) ψ̃_β / √μ^{k+1}_β`.
pub fn orthonormalize_level(space: &FiniteSpace, h: &NetHierarchy, k: i32, centers: Vec<usize>, pre: DMatrix<f64>) -> Result<WaveletLevel> {
    let scale = h.scale(k + 1);
    let volumes: Vec<f64> = centers.iter().map(|&y| space.volume_of_ball(y, scale)).collect();
    let m = centers.len();
    let raw = weighted_products(&pre, &pre, space.weights());
    let gram = symmetrize(&DMatrix::from_fn(m, m, |a, b| raw[(a, b)] / mathf::sqrt(volumes[a] * volumes[b]))).0;
    let f = spd_functions(&gram)?;
    let mut scaled = pre.clone();
    for (b, &v) in volumes.iter().enumerate() {
        scaled.row_mut(b).scale_mut(1.0 / mathf::sqrt(v));
    }
    let functions = &f.inv_sqrt * scaled;
    Ok(WaveletLevel {
        level: k,
        centers,
        pre,
        volumes,
        gram,
        functions,
    })
}

/// Builds the full basis. `eta` is the spline Hölder exponent, kept for the
/// regularity report.
pub fn build_wavelet_basis(
    space: &FiniteSpace,
    h: &NetHierarchy,
    table: &SplineTable,
    gs: &GramSystem,
    eta: f64,
) -> Result<WaveletBasis> {
    let kc = h.k_coarse();
    let (coarse, coarse_centers) = if h.level(kc).len() == 1 {
        let c = 1.0 / mathf::sqrt(space.total_mass());
        (DMatrix::from_element(1, space.n(), c), h.level(kc).to_vec())
    } else {
        (gs.level(kc).orthonormal.clone(), h.level(kc).to_vec())
    };
    let mut levels = Vec::new();
    for k in h.step_range() {
        let (centers, pre) = pre_wavelets(space, h, table, gs, k);
        levels.push(orthonormalize_level(space, h, k, centers, pre)?);
    }
    WaveletBasis::from_parts(h, eta, space.weights().to_vec(), coarse, coarse_centers, levels)
}

/// Orthogonal projector in `L²(μ)` onto the span of the rows of `f`.
fn span_projector(f: &DMatrix<f64>, weights: &[f64]) -> Option<DMatrix<f64>> {
    let n = weights.len();
    if f.nrows() == 0 {
        return Some(DMatrix::zeros(n, n));
    }
    let g = symmetrize(&weighted_products(f, f, weights)).0;
    let inv = spd_functions(&g).ok()?.inverse;
    let mut op = f.transpose() * inv * f;
    for (y, &w) in weights.iter().enumerate() {
        op.column_mut(y).scale_mut(w);
    }
    Some(op)
}

/// Checks orthonormality, completeness, vanishing means, transforms and
/// projection kernels.
pub fn verify_wavelets(
    space: &FiniteSpace,
    h: &NetHierarchy,
    table: &SplineTable,
    gs: &GramSystem,
    basis: &WaveletBasis,
    seed: u64,
) -> Report {
    let mut report = Report::new();
    let n = space.n();
    let w = space.weights();
    let b = basis.matrix();
    let mut card = Vec::new();
    let expected = basis.coarse().nrows() + (h.k_coarse()..h.k_fine()).map(|k| h.new_points(k).len()).sum::<usize>();
    if basis.len() != n || expected != n {
        card.push(format!("{} members, {expected} indices, n = {n}", basis.len()));
    }
    report.exact("wavelets.cardinality", "the basis has exactly n members", card);
    report.within(
        "wavelets.gram_identity",
        "the full family is orthonormal",
        1e-8,
        identity_residual(&weighted_products(b, b, w)),
    );
    let mut mean: f64 = 0.0;
    let mut pre_orth: f64 = 0.0;
    let mut pre_mean: f64 = 0.0;
    let mut orth_v: f64 = 0.0;
    let mut level_on: f64 = 0.0;
    let mut span: f64 = 0.0;
    for lv in basis.levels() {
        let k = lv.level;
        for row in lv.functions.row_iter() {
            mean = mean.max(row.iter().zip(w).map(|(v, m)| v * m).sum::<f64>().abs());
        }
        for row in lv.pre.row_iter() {
            pre_mean = pre_mean.max(row.iter().zip(w).map(|(v, m)| v * m).sum::<f64>().abs());
        }
        if lv.centers.is_empty() {
            continue;
        }
        pre_orth = pre_orth.max(weighted_products(&lv.pre, table.level(k), w).amax());
        orth_v = orth_v.max(weighted_products(&lv.functions, table.level(k), w).amax());
        level_on = level_on.max(identity_residual(&weighted_products(&lv.functions, &lv.functions, w)));
        match (span_projector(&lv.pre, w), span_projector(&lv.functions, w)) {
            (Some(p1), Some(p2)) => span = span.max((p1 - p2).amax()),
            _ => span = f64::INFINITY,
        }
    }
    report.within("wavelets.vanishing_mean", "∫ ψ dμ = 0", 1e-10, mean);
    report.within("wavelets.pre_orthogonality", "⟨ψ̃^k_β, s^k_α⟩ = 0", 1e-10, pre_orth);
    report.within("wavelets.pre_mean", "∫ ψ̃ dμ = 0", 1e-10, pre_mean);
    report.within("wavelets.level_orthonormal", "each level family is orthonormal", 1e-10, level_on);
    report.within("wavelets.span_preserved", "orthonormalization keeps the span W_k", 1e-10, span);
    report.within("wavelets.orthogonal_to_v", "W_k ⟂ V_k", 1e-10, orth_v);

    // transforms on random functions
    let mut rng = aux_stream(seed, 0x7761_7665);
    let mut parseval: f64 = 0.0;
    let mut round: f64 = 0.0;
    let mut lp_sum: f64 = 0.0;
    let mut lp_energy: f64 = 0.0;
    for _ in 0..100 {
        let f: Vec<f64> = (0..n).map(|_| symmetric_f64(&mut rng)).collect();
        let norm2 = space.inner(&f, &f);
        let c = basis.analyze(&f).expect("length matches");
        let energy: f64 = c.iter().map(|v| v * v).sum();
        parseval = parseval.max((energy - norm2).abs() / norm2);
        let g = basis.synthesize(&c).expect("length matches");
        let diff: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a - b).collect();
        round = round.max(mathf::sqrt(space.inner(&diff, &diff) / norm2));
        let (p0, pieces) = basis.littlewood_paley(&f).expect("length matches");
        let mut total = p0.clone();
        let mut e = space.inner(&p0, &p0);
        for (_, q) in &pieces {
            for (t, v) in total.iter_mut().zip(q) {
                *t += v;
            }
            e += space.inner(q, q);
        }
        let diff: Vec<f64> = f.iter().zip(&total).map(|(a, b)| a - b).collect();
        lp_sum = lp_sum.max(mathf::sqrt(space.inner(&diff, &diff) / norm2));
        lp_energy = lp_energy.max((e - norm2).abs() / norm2);
    }
    report.within("wavelets.parseval", "Σ|⟨f,ψ⟩|² = ‖f‖² (relative)", 1e-8, parseval);
    report.within("wavelets.round_trip", "synthesize(analyze(f)) = f (relative)", 1e-8, round);
    report.within("wavelets.lp_sum", "f = P_{k_coarse} f + Σ_k Q_k f (relative)", 1e-8, lp_sum);
    report.within("wavelets.lp_energy", "‖f‖² = ‖P f‖² + Σ‖Q_k f‖² (relative)", 1e-8, lp_energy);

    // kernels
    let mut sym: f64 = 0.0;
    let mut p_mass: f64 = 0.0;
    let mut q_mass: f64 = 0.0;
    let mut consistency: f64 = 0.0;
    for k in h.level_range() {
        let p = basis.p_kernel(k);
        sym = sym.max((&p - p.transpose()).amax());
        for x in 0..n {
            let row: f64 = (0..n).map(|y| p[(x, y)] * w[y]).sum();
            p_mass = p_mass.max((row - 1.0).abs());
        }
        let phi = &gs.level(k).orthonormal;
        consistency = consistency.max((&p - phi.transpose() * phi).amax());
        if k < h.k_fine() {
            let q = basis.q_kernel(k);
            sym = sym.max((&q - q.transpose()).amax());
            for x in 0..n {
                let row: f64 = (0..n).map(|y| q[(x, y)] * w[y]).sum();
                q_mass = q_mass.max(row.abs());
            }
        }
    }
    let telescoped = basis.kernel_operator(&basis.p_kernel(h.k_fine()));
    report.within("wavelets.kernel_symmetry", "P_k and Q_k kernels are symmetric", 1e-12, sym);
    report.within("wavelets.p_mass", "∫ P_k(x,y) dμ(y) = 1", 1e-10, p_mass);
    report.within("wavelets.q_mass", "∫ Q_k(x,y) dμ(y) = 0", 1e-10, q_mass);
    report.within(
        "wavelets.p_consistency",
        "Σ_α φ_α(x)φ_α(y) equals the telescoped P_k",
        1e-10,
        consistency,
    );
    report.within(
        "wavelets.telescoping",
        "P_k + Σ_{j≥k} Q_j = I",
        1e-10,
        identity_residual(&telescoped),
    );

    // unconditional ℓ² contraction under sign multipliers
    let mut contraction: f64 = 0.0;
    for _ in 0..10 {
        let mut signed = b.clone();
        for mut row in signed.row_iter_mut() {
            let s = sign(&mut rng);
            row.scale_mut(s);
        }
        let t = b.transpose() * signed;
        let mut op = t;
        for (y, &m) in w.iter().enumerate() {
            op.column_mut(y).scale_mut(m);
        }
        contraction = contraction.max((weighted_operator_norm(&op, w) - 1.0).abs());
    }
    report.within(
        "wavelets.sign_multipliers",
        "f ↦ Σ ε ⟨f,ψ⟩ψ has norm 1",
        1e-8,
        contraction,
    );
    report
}

/// Decay fit and regularity ratio of one wavelet level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDecay {
    pub level: i32,
    pub members: usize,
    /// Fit of `|ψ(x)| √μ(B(y,δ^k)) ≤ C exp(−γ (d(y,x)/δ^k)^a)`.
    pub profile: Option<DecayProfile>,
    /// `sup |ψ(x)−ψ(x′)| √μ(B) (δ^k/d(x,x′))^η exp(γ (d(y,x)/δ^k)^a)` over
    /// `0 < d(x,x′) ≤ δ^k`; `None` when `η` is infinite or there are no
    /// such pairs.
    pub holder: Option<f64>,
}

/// Per-level decay and Hölder profiles.
pub fn decay_and_regularity(space: &FiniteSpace, basis: &WaveletBasis) -> Vec<LevelDecay> {
    let a = basis.decay_exponent();
    let eta = basis.eta();
    let mut out = Vec::new();
    for lv in basis.levels() {
        let k = lv.level;
        let scale = mathf::powi(basis.delta(), k);
        let mut samples = Vec::new();
        let norms: Vec<f64> = lv
            .centers
            .iter()
            .map(|&y| mathf::sqrt(space.volume_of_ball(y, scale)))
            .collect();
        for (beta, &y) in lv.centers.iter().enumerate() {
            for x in 0..space.n() {
                let v = lv.functions[(beta, x)].abs() * norms[beta];
                if v > crate::mra::DECAY_FLOOR {
                    samples.push((space.dist(y, x) / scale, v));
                }
            }
        }
        let profile = fit_decay(&samples, a).ok();
        let gamma = profile.map_or(0.0, |p| p.gamma.max(0.0));
        let mut holder = None;
        if eta.is_finite() {
            let mut best: f64 = 0.0;
            let mut any = false;
            for (beta, &y) in lv.centers.iter().enumerate() {
                for x in 0..space.n() {
                    let growth = mathf::exp(gamma * mathf::powf(space.dist(y, x) / scale, a));
                    for x2 in 0..space.n() {
                        let d = space.dist(x, x2);
                        if d == 0.0 || d > scale {
                            continue;
                        }
                        any = true;
                        let diff = (lv.functions[(beta, x)] - lv.functions[(beta, x2)]).abs();
                        best = best.max(diff * norms[beta] * mathf::powf(scale / d, eta) * growth);
                    }
                }
            }
            if any {
                holder = Some(best);
            }
        }
        out.push(LevelDecay {
            level: k,
            members: lv.centers.len(),
            profile,
            holder,
        });
    }
    out
}
