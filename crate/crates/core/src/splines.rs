//! Splines `s^k_α(x) = P_ω(x ∈ Q^k_α(ω))`, their refinement matrices and
//! bump functions built from them.
//!
//! Because the relation between levels `k+1` and `k` depends on `ω_k` alone
//! and the coordinates are independent, ancestor levels form a Markov chain
//! and `s^k = p^k s^{k+1}` with `p^k_{αβ} = P((k+1, β) ≤_ω (k, α))`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::mathf;
use crate::nets::NetHierarchy;
use crate::order::ReferenceOrder;
use crate::randomized::{draw_coord, DyadicSampler};
use crate::report::Report;
use crate::space::FiniteSpace;

/// Refinement matrices `p^k` (rows `𝒳^k`, columns `𝒳^{k+1}`) with the
/// integer outcome counts they come from.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSystem {
    k_coarse: i32,
    outcomes: u64,
    counts: Vec<DMatrix<u64>>,
    p: Vec<DMatrix<f64>>,
}

impl TransitionSystem {
    fn step(&self, k: i32) -> usize {
        (k - self.k_coarse) as usize
    }

    pub fn p(&self, k: i32) -> &DMatrix<f64> {
        &self.p[self.step(k)]
    }

    /// Number of `ω_k` values sending child `β` to parent `α`.
    pub fn counts(&self, k: i32) -> &DMatrix<u64> {
        &self.counts[self.step(k)]
    }

    /// `(L+1) M`.
    pub fn outcomes(&self) -> u64 {
        self.outcomes
    }

    pub fn steps(&self) -> usize {
        self.p.len()
    }
}

/// Exact `p^k` by enumerating all values of `ω_k`.
pub fn transition_probabilities(h: &NetHierarchy, sampler: &DyadicSampler) -> TransitionSystem {
    let outcomes = sampler.outcomes();
    let mut counts = Vec::new();
    let mut p = Vec::new();
    for k in h.step_range() {
        let mut c = DMatrix::<u64>::zeros(h.level(k).len(), h.level(k + 1).len());
        for o in 0..outcomes {
            for (beta, &alpha) in sampler.parents_for(k, o).iter().enumerate() {
                c[(alpha, beta)] += 1;
            }
        }
        p.push(c.map(|v| v as f64 / outcomes as f64));
        counts.push(c);
    }
    TransitionSystem {
        k_coarse: h.k_coarse(),
        outcomes: outcomes as u64,
        counts,
        p,
    }
}

/// Column sums and support of the refinement matrices.
pub fn verify_transitions(space: &FiniteSpace, h: &NetHierarchy, ts: &TransitionSystem) -> Report {
    let mut report = Report::new();
    let a0 = h.a0();
    let mut col_err: f64 = 0.0;
    let mut support = Vec::new();
    for k in h.step_range() {
        let p = ts.p(k);
        let counts = ts.counts(k);
        for beta in 0..p.ncols() {
            let total: u64 = counts.column(beta).iter().sum();
            if total != ts.outcomes() {
                col_err = col_err.max(1.0);
            }
            col_err = col_err.max((p.column(beta).sum() - 1.0).abs());
        }
        let reach = (2.0 * a0).max(a0 * (0.25 / (a0 * a0) + 2.0 * a0)) * h.scale(k);
        for alpha in 0..p.nrows() {
            for beta in 0..p.ncols() {
                if p[(alpha, beta)] > 0.0 {
                    let d = space.dist(h.point(k, alpha), h.point(k + 1, beta));
                    if !(d < reach) {
                        support.push(format!("level {k}: p({alpha},{beta}) > 0 at distance {d}"));
                    }
                }
            }
        }
    }
    report.within("splines.column_stochastic", "each child has total parent probability 1", 1e-12, col_err);
    report.exact("splines.transition_support", "p^k vanishes between distant points", support);
    report
}

/// Spline values `s^k_α(x)`, one `|𝒳^k| × n` matrix per level.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineTable {
    k_coarse: i32,
    levels: Vec<DMatrix<f64>>,
}

impl SplineTable {
    pub fn from_levels(k_coarse: i32, levels: Vec<DMatrix<f64>>) -> Self {
        Self { k_coarse, levels }
    }

    pub fn level(&self, k: i32) -> &DMatrix<f64> {
        &self.levels[(k - self.k_coarse) as usize]
    }

    pub fn levels(&self) -> &[DMatrix<f64>] {
        &self.levels
    }

    pub fn k_coarse(&self) -> i32 {
        self.k_coarse
    }

    pub fn k_fine(&self) -> i32 {
        self.k_coarse + self.levels.len() as i32 - 1
    }

    pub fn value(&self, k: i32, alpha: usize, x: usize) -> f64 {
        self.level(k)[(alpha, x)]
    }

    /// `s^k_α` as a vector over the space.
    pub fn spline(&self, k: i32, alpha: usize) -> Vec<f64> {
        self.level(k).row(alpha).iter().copied().collect()
    }
}

/// Integer numerators of the splines: `s^k_α(x) · ((L+1)M)^{k_fine - k}`.
/// `None` if some value does not fit in 128 bits.
pub fn exact_spline_counts(h: &NetHierarchy, ts: &TransitionSystem) -> Option<Vec<DMatrix<u128>>> {
    let n = h.n();
    let mut out = vec![DMatrix::<u128>::zeros(0, 0); h.levels().len()];
    let top = h.levels().len() - 1;
    out[top] = DMatrix::from_fn(n, n, |i, j| u128::from(i == j));
    for k in h.step_range().rev() {
        let s = (k - h.k_coarse()) as usize;
        let c = ts.counts(k);
        let next = &out[s + 1];
        let mut cur = DMatrix::<u128>::zeros(c.nrows(), n);
        for a in 0..c.nrows() {
            for b in 0..c.ncols() {
                let w = u128::from(c[(a, b)]);
                if w == 0 {
                    continue;
                }
                for x in 0..n {
                    let add = w.checked_mul(next[(b, x)])?;
                    cur[(a, x)] = cur[(a, x)].checked_add(add)?;
                }
            }
        }
        out[s] = cur;
    }
    Some(out)
}

/// Backward recursion from the finest level, `s^{k_fine} = I`.
///
/// Values are taken from the exact integer counts when they fit, so that
/// interpolation and the range `[0, 1]` hold without rounding; otherwise the
/// floating point product `p^k s^{k+1}` is used.
pub fn compute_splines_exact(h: &NetHierarchy, ts: &TransitionSystem) -> SplineTable {
    let n = h.n();
    let mut levels = vec![DMatrix::<f64>::zeros(0, 0); h.levels().len()];
    let top = levels.len() - 1;
    levels[top] = DMatrix::identity(n, n);
    for k in h.step_range().rev() {
        let s = (k - h.k_coarse()) as usize;
        levels[s] = ts.p(k) * &levels[s + 1];
    }
    if let Some(exact) = exact_spline_counts(h, ts) {
        for (s, counts) in exact.iter().enumerate() {
            let depth = (top - s) as i32;
            let denom = mathf::powi(ts.outcomes() as f64, depth);
            if denom.is_finite() && denom < 9.0e15 {
                levels[s] = counts.map(|v| v as f64 / denom);
            }
        }
    }
    SplineTable::from_levels(h.k_coarse(), levels)
}

/// Monte Carlo estimate of the splines with per-entry standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineEstimate {
    pub mean: SplineTable,
    pub stderr: Vec<DMatrix<f64>>,
    pub samples: u64,
}

/// Frequencies of cube membership over `nsamples` independent `ω`.
pub fn compute_splines_mc(
    h: &NetHierarchy,
    order: &ReferenceOrder,
    sampler: &DyadicSampler,
    nsamples: u64,
    seed: u64,
) -> Result<SplineEstimate> {
    if nsamples == 0 {
        return Err(invalid("nsamples", "must be at least 1"));
    }
    let n = h.n();
    let nlev = h.levels().len();
    let mut hits: Vec<Vec<u64>> = h.levels().iter().map(|l| vec![0u64; l.len() * n]).collect();
    let mut outcomes = vec![0usize; sampler.steps()];
    let mut current: Vec<usize> = Vec::with_capacity(n);
    for sample in 0..nsamples {
        for k in h.step_range() {
            let (l, m) = draw_coord(order, seed, sample, k);
            outcomes[(k - h.k_coarse()) as usize] = l * order.m() + (m - 1);
        }
        current.clear();
        current.extend(0..n);
        for s in (0..nlev).rev() {
            if s + 1 < nlev {
                let par = sampler.parents_for(h.k_coarse() + s as i32, outcomes[s]);
                for v in current.iter_mut() {
                    *v = par[*v];
                }
            }
            let row = &mut hits[s];
            for (x, &a) in current.iter().enumerate() {
                row[a * n + x] += 1;
            }
        }
    }
    let nf = nsamples as f64;
    let mut mean = Vec::with_capacity(nlev);
    let mut stderr = Vec::with_capacity(nlev);
    for (s, counts) in hits.iter().enumerate() {
        let rows = h.levels()[s].len();
        let m = DMatrix::from_fn(rows, n, |a, x| counts[a * n + x] as f64 / nf);
        stderr.push(m.map(|p| mathf::sqrt(p * (1.0 - p) / nf)));
        mean.push(m);
    }
    Ok(SplineEstimate {
        mean: SplineTable::from_levels(h.k_coarse(), mean),
        stderr,
        samples: nsamples,
    })
}

/// Partition of unity, interpolation, refinement, range, support and the
/// rational provenance of the exact table.
pub fn verify_splines(
    space: &FiniteSpace,
    h: &NetHierarchy,
    ts: &TransitionSystem,
    table: &SplineTable,
) -> Report {
    let mut report = Report::new();
    let a0 = h.a0();
    let n = space.n();
    let mut pou: f64 = 0.0;
    let mut interp = Vec::new();
    let mut refine: f64 = 0.0;
    let mut range = Vec::new();
    let mut support = Vec::new();
    for k in h.level_range() {
        let s = table.level(k);
        for x in 0..n {
            pou = pou.max((s.column(x).sum() - 1.0).abs());
        }
        let level = h.level(k);
        for (alpha, _) in level.iter().enumerate() {
            for (beta, &xb) in level.iter().enumerate() {
                let want = if alpha == beta { 1.0 } else { 0.0 };
                if s[(alpha, xb)] != want {
                    interp.push(format!("level {k}: s_{alpha}(x_{beta}) = {}", s[(alpha, xb)]));
                }
            }
        }
        if s.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            range.push(format!("level {k} has values outside [0,1]"));
        }
        if k < h.k_fine() {
            refine = refine.max((ts.p(k) * table.level(k + 1) - s).amax());
        }
        let inner = h.scale(k) / (8.0 * a0 * a0 * a0);
        let outer = 8.0 * mathf::powi(a0, 5) * h.scale(k);
        for (alpha, &xa) in level.iter().enumerate() {
            for x in 0..n {
                let d = space.dist(xa, x);
                let v = s[(alpha, x)];
                if d < inner && v != 1.0 {
                    support.push(format!("level {k}: s_{alpha}({x}) = {v} inside the inner ball"));
                }
                if !(d < outer) && v != 0.0 {
                    support.push(format!("level {k}: s_{alpha}({x}) = {v} outside the outer ball"));
                }
            }
        }
    }
    report.within("splines.partition_of_unity", "Σ_α s^k_α(x) = 1", 1e-12, pou);
    report.exact("splines.interpolation", "s^k_α(x^k_β) = δ_αβ exactly", interp);
    report.within("splines.refinement", "s^k = p^k s^{k+1}", 1e-12, refine);
    report.exact("splines.range", "spline values lie in [0, 1]", range);
    report.exact(
        "splines.support",
        "1 on B(x^k_α, A0^-3 δ^k / 8), 0 outside B(x^k_α, 8 A0^5 δ^k)",
        support,
    );
    if let Some(exact) = exact_spline_counts(h, ts) {
        let top = h.levels().len() - 1;
        let mut err: f64 = 0.0;
        for (s, counts) in exact.iter().enumerate() {
            let denom = mathf::powi(ts.outcomes() as f64, (top - s) as i32);
            let lev = &table.levels()[s];
            for (v, c) in lev.iter().zip(counts.iter()) {
                err = err.max((v * denom - *c as f64).abs() / denom.max(1.0));
            }
        }
        report.within(
            "splines.rational",
            "s^k values are integer multiples of ((L+1)M)^-(k_fine - k)",
            1e-12,
            err,
        );
    }
    report
}

/// `max |MC - exact|` and `max |MC - exact| / stderr` over all entries
/// (entries with zero standard error must match exactly).
pub fn mc_deviation(exact: &SplineTable, mc: &SplineEstimate) -> (f64, f64) {
    let mut dev: f64 = 0.0;
    let mut z: f64 = 0.0;
    for (s, e) in exact.levels().iter().enumerate() {
        let m = &mc.mean.levels()[s];
        let se = &mc.stderr[s];
        for i in 0..e.len() {
            let d = (m[i] - e[i]).abs();
            dev = dev.max(d);
            // binomial stderr of the exact probability
            let p = e[i];
            let sigma = mathf::sqrt(p * (1.0 - p) / mc.samples as f64).max(se[i]);
            if sigma > 0.0 {
                z = z.max(d / sigma);
            } else if d > 0.0 {
                z = f64::INFINITY;
            }
        }
    }
    (dev, z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderProfile {
    pub level: i32,
    pub exponent: f64,
    pub constant: f64,
    /// `(α, x, y)` attaining the constant.
    pub witness: Option<(usize, usize, usize)>,
}

/// `sup |s^k_α(x) - s^k_α(y)| / (d(x,y)/δ^k)^exponent` over `α` and pairs
/// `x ≠ y`, optionally only over pairs with `d(x, y) <= max_dist`.
pub fn holder_profile(
    space: &FiniteSpace,
    h: &NetHierarchy,
    table: &SplineTable,
    k: i32,
    exponent: f64,
    max_dist: Option<f64>,
) -> Result<HolderProfile> {
    if !h.level_range().contains(&k) {
        return Err(Error::LevelOutOfRange {
            level: k,
            k_coarse: h.k_coarse(),
            k_fine: h.k_fine(),
        });
    }
    let s = table.level(k);
    let scale = h.scale(k);
    let n = space.n();
    let mut best = 0.0;
    let mut witness = None;
    for x in 0..n {
        for y in (x + 1)..n {
            let d = space.dist(x, y);
            if max_dist.is_some_and(|m| d > m) {
                continue;
            }
            let denom = mathf::powf(d / scale, exponent);
            for alpha in 0..s.nrows() {
                let ratio = (s[(alpha, x)] - s[(alpha, y)]).abs() / denom;
                if ratio > best {
                    best = ratio;
                    witness = Some((alpha, x, y));
                }
            }
        }
    }
    Ok(HolderProfile {
        level: k,
        exponent,
        constant: best,
        witness,
    })
}

/// A function with `1_F <= φ <= 1_G`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub values: Vec<f64>,
    /// Spline level used, `None` when `φ = 1_F` below the finest level.
    pub level: Option<i32>,
    /// `d(F, X \ G)`.
    pub gap: f64,
}

/// Sum of the level-`k` splines whose support ball meets `F`, where `k` is
/// the first level with `16 A0^6 δ^k <= d(F, X \ G)`.
pub fn build_bump(
    space: &FiniteSpace,
    h: &NetHierarchy,
    table: &SplineTable,
    f: &[usize],
    g: &[usize],
) -> Result<Bump> {
    let n = space.n();
    let mut in_g = vec![false; n];
    for &y in g {
        if y >= n {
            return Err(invalid("G", format!("point {y} out of range")));
        }
        in_g[y] = true;
    }
    for &x in f {
        if x >= n || !in_g[x] {
            return Err(invalid("F", format!("point {x} is not in G")));
        }
    }
    let mut gap = f64::INFINITY;
    for &x in f {
        for (y, &inside) in in_g.iter().enumerate() {
            if !inside {
                gap = gap.min(space.dist(x, y));
            }
        }
    }
    if f.is_empty() {
        return Ok(Bump {
            values: vec![0.0; n],
            level: Some(h.k_coarse()),
            gap,
        });
    }
    let a0 = h.a0();
    let reach = 16.0 * mathf::powi(a0, 6);
    let mut k = if gap.is_infinite() {
        h.k_coarse()
    } else {
        let mut k = mathf::ceil(mathf::ln(gap / reach) / mathf::ln(h.delta())) as i32;
        while reach * h.scale(k - 1) <= gap {
            k -= 1;
        }
        while reach * h.scale(k) > gap {
            k += 1;
        }
        k
    };
    if k < h.k_coarse() {
        k = h.k_coarse();
    }
    if k > h.k_fine() {
        let mut values = vec![0.0; n];
        for &x in f {
            values[x] = 1.0;
        }
        return Ok(Bump {
            values,
            level: None,
            gap,
        });
    }
    let s = table.level(k);
    let radius = 8.0 * mathf::powi(a0, 5) * h.scale(k);
    let mut values = vec![0.0; n];
    for (alpha, &xa) in h.level(k).iter().enumerate() {
        if f.iter().any(|&x| space.dist(xa, x) < radius) {
            for (x, v) in values.iter_mut().enumerate() {
                *v += s[(alpha, x)];
            }
        }
    }
    Ok(Bump {
        values,
        level: Some(k),
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{build_nets, Mode};
    use crate::order::build_reference_order;
    use crate::randomized::theoretical_eta;
    use crate::space::{fixture_a, fixture_b, quasi_triangle_constant, SpaceSpec, WeightRule};

    struct Built {
        space: FiniteSpace,
        h: NetHierarchy,
        order: ReferenceOrder,
        sampler: DyadicSampler,
        ts: TransitionSystem,
        table: SplineTable,
    }

    fn built(space: FiniteSpace, delta: f64) -> Built {
        let a0 = quasi_triangle_constant(&space).0;
        let h = build_nets(&space, a0, delta, Mode::Relaxed).unwrap();
        let order = build_reference_order(&space, &h).unwrap();
        let sampler = DyadicSampler::new(&space, &h, &order).unwrap();
        let ts = transition_probabilities(&h, &sampler);
        let table = compute_splines_exact(&h, &ts);
        Built {
            space,
            h,
            order,
            sampler,
            ts,
            table,
        }
    }

    #[test]
    fn fixture_a_tables() {
        let b = built(fixture_a(), 0.25);
        assert_eq!(b.ts.p(-1), &DMatrix::from_element(1, 4, 1.0));
        assert_eq!(b.table.level(0), &DMatrix::<f64>::identity(4, 4));
        assert_eq!(b.table.level(-1), &DMatrix::from_element(1, 4, 1.0));
        assert!(verify_splines(&b.space, &b.h, &b.ts, &b.table).all_passed());
        let mc = compute_splines_mc(&b.h, &b.order, &b.sampler, 50, 3).unwrap();
        assert_eq!(mc.mean, b.table);
    }

    #[test]
    fn fixture_b_identities() {
        let b = built(fixture_b(), 0.25);
        let r = verify_splines(&b.space, &b.h, &b.ts, &b.table);
        assert!(r.all_passed(), "{:?}", r.failures().collect::<Vec<_>>());
        assert!(verify_transitions(&b.space, &b.h, &b.ts).all_passed());
    }

    #[test]
    fn cycle64_nontrivial_splines() {
        let b = built(SpaceSpec::Cycle { n: 64 }.generate(&WeightRule::Uniform).unwrap(), 0.125);
        let r = verify_splines(&b.space, &b.h, &b.ts, &b.table);
        assert!(r.all_passed(), "{:?}", r.failures().collect::<Vec<_>>());
        let fractional = b
            .table
            .levels()
            .iter()
            .flat_map(|m| m.iter())
            .any(|&v| v > 0.0 && v < 1.0);
        assert!(fractional);
        let mc = compute_splines_mc(&b.h, &b.order, &b.sampler, 20_000, 11).unwrap();
        let (dev, z) = mc_deviation(&b.table, &mc);
        assert!(dev < 0.02, "{dev}");
        assert!(z < 6.0, "{z}");
    }

    #[test]
    fn single_sample_partitions() {
        let b = built(SpaceSpec::Cycle { n: 64 }.generate(&WeightRule::Uniform).unwrap(), 0.125);
        let mc = compute_splines_mc(&b.h, &b.order, &b.sampler, 1, 2).unwrap();
        for lev in mc.mean.levels() {
            assert!(lev.iter().all(|&v| v == 0.0 || v == 1.0));
            for x in 0..64 {
                assert_eq!(lev.column(x).sum(), 1.0);
            }
        }
    }

    #[test]
    fn holder_monotone_in_exponent() {
        let b = built(SpaceSpec::Cycle { n: 64 }.generate(&WeightRule::Uniform).unwrap(), 0.125);
        let k = b.h.k_fine() - 1;
        let eta = theoretical_eta(&b.order, b.h.delta());
        let scale = b.h.scale(k);
        let full = holder_profile(&b.space, &b.h, &b.table, k, eta, Some(scale)).unwrap();
        let half = holder_profile(&b.space, &b.h, &b.table, k, eta / 2.0, Some(scale)).unwrap();
        assert!(full.constant.is_finite() && full.constant > 0.0);
        assert!(half.constant <= full.constant + 1e-15);
        let coarse = holder_profile(&b.space, &b.h, &b.table, b.h.k_coarse(), eta, None).unwrap();
        assert_eq!(coarse.constant, 0.0);
    }

    #[test]
    fn bumps() {
        let b = built(fixture_b(), 0.25);
        let f = b.space.ball(0, 2.0 / 16.0).unwrap();
        let g = b.space.ball(0, 8.0 / 16.0).unwrap();
        let bump = build_bump(&b.space, &b.h, &b.table, &f, &g).unwrap();
        for x in 0..16 {
            let lo = if f.contains(&x) { 1.0 } else { 0.0 };
            let hi = if g.contains(&x) { 1.0 } else { 0.0 };
            assert!(lo <= bump.values[x] && bump.values[x] <= hi);
        }
        let all: Vec<usize> = (0..16).collect();
        let whole = build_bump(&b.space, &b.h, &b.table, &all, &all).unwrap();
        assert!(whole.values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert_eq!(whole.level, Some(b.h.k_coarse()));
        assert!(build_bump(&b.space, &b.h, &b.table, &[3], &[4]).is_err());
    }
}
