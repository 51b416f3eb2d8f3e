//! Random dyadic systems: the probability space of labels, the new points
//! `z^k_α(ω)`, the order `≤_ω` and the resulting cubes.
//!
//! On a finite space the preliminary, closed and open cube families agree,
//! so one partition per level is stored.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::mathf;
use crate::nets::NetHierarchy;
use crate::order::ReferenceOrder;
use crate::report::Report;
use crate::rng;
use crate::space::FiniteSpace;

/// One point `ω` of the probability space, truncated to the step range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OmegaSample {
    pub seed: u64,
    pub sample: u64,
    pub k_coarse: i32,
    /// `(ℓ_k, m_k)` for `k = k_coarse, .., k_fine - 1`.
    pub coords: Vec<(usize, usize)>,
}

impl OmegaSample {
    pub fn coord(&self, k: i32) -> (usize, usize) {
        self.coords[(k - self.k_coarse) as usize]
    }

    /// Position of `ω_k` among the `(L+1) M` outcomes.
    pub fn outcome(&self, k: i32, m_max: usize) -> usize {
        let (l, m) = self.coord(k);
        l * m_max + (m - 1)
    }
}

/// Draws `ω_k` for one level from its own stream.
pub fn draw_coord(order: &ReferenceOrder, seed: u64, sample: u64, k: i32) -> (usize, usize) {
    let mut stream = rng::level_stream(seed, sample, k);
    let l = rng::below(&mut stream, order.l() as u64 + 1) as usize;
    let m = 1 + rng::below(&mut stream, order.m() as u64) as usize;
    (l, m)
}

/// Sample number `sample` of the stream keyed by `seed`.
pub fn sample_omega(order: &ReferenceOrder, seed: u64, sample: u64) -> OmegaSample {
    let steps = order.parents().len();
    let k0 = order.k_coarse();
    let coords = (0..steps)
        .map(|s| draw_coord(order, seed, sample, k0 + s as i32))
        .collect();
    OmegaSample {
        seed,
        sample,
        k_coarse: k0,
        coords,
    }
}

/// Precomputed new points and `≤_ω` parents for every level and every value
/// of `ω_k`; the relation between levels `k+1` and `k` depends on `ω_k` only.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicSampler {
    k_coarse: i32,
    l: usize,
    m: usize,
    /// `[step][outcome][α]` point id of `z^k_α`.
    z: Vec<Vec<Vec<usize>>>,
    /// `[step][outcome][β]` index of the `≤_ω` parent in `𝒳^k`.
    parents: Vec<Vec<Vec<usize>>>,
}

impl DyadicSampler {
    pub fn new(space: &FiniteSpace, h: &NetHierarchy, order: &ReferenceOrder) -> Result<Self> {
        let (l_max, m_max) = (order.l(), order.m());
        let a0 = h.a0();
        let mut z_all = Vec::new();
        let mut p_all = Vec::new();
        for k in h.step_range() {
            let coarse = h.level(k);
            let fine = h.level(k + 1);
            let threshold = 0.25 * h.scale(k) / (a0 * a0);
            let mut z_k = Vec::with_capacity(order.outcomes());
            let mut p_k = Vec::with_capacity(order.outcomes());
            for l in 0..=l_max {
                for m in 1..=m_max {
                    let z: Vec<usize> = (0..coarse.len())
                        .map(|alpha| {
                            if order.label1(k, alpha) == l {
                                if let Some(&beta) = order
                                    .children(k, alpha)
                                    .iter()
                                    .find(|&&b| order.label2(k, b) == m)
                                {
                                    return fine[beta];
                                }
                            }
                            coarse[alpha]
                        })
                        .collect();
                    let mut par = Vec::with_capacity(fine.len());
                    for (beta, &y) in fine.iter().enumerate() {
                        let mut found = None;
                        for (alpha, &za) in z.iter().enumerate() {
                            if space.dist(y, za) < threshold {
                                if found.is_some() {
                                    return Err(Error::GeometryViolation {
                                        level: k,
                                        what: format!(
                                            "point {y} has several new parents for ω_k = ({l}, {m}); decrease δ"
                                        ),
                                    });
                                }
                                found = Some(alpha);
                            }
                        }
                        par.push(found.unwrap_or_else(|| order.parent(k, beta)));
                    }
                    z_k.push(z);
                    p_k.push(par);
                }
            }
            z_all.push(z_k);
            p_all.push(p_k);
        }
        Ok(Self {
            k_coarse: h.k_coarse(),
            l: l_max,
            m: m_max,
            z: z_all,
            parents: p_all,
        })
    }

    pub fn outcomes(&self) -> usize {
        (self.l + 1) * self.m
    }

    pub fn steps(&self) -> usize {
        self.parents.len()
    }

    /// `z^k_α` point ids for outcome `o` of `ω_k`.
    pub fn z_for(&self, k: i32, outcome: usize) -> &[usize] {
        &self.z[(k - self.k_coarse) as usize][outcome]
    }

    /// `≤_ω` parent indices for outcome `o` of `ω_k`.
    pub fn parents_for(&self, k: i32, outcome: usize) -> &[usize] {
        &self.parents[(k - self.k_coarse) as usize][outcome]
    }

    /// Full system for one sample.
    pub fn system(&self, h: &NetHierarchy, omega: &OmegaSample) -> RandomizedSystem {
        let mut z = Vec::with_capacity(self.steps() + 1);
        let mut parents = Vec::with_capacity(self.steps());
        for k in h.step_range() {
            let o = omega.outcome(k, self.m);
            z.push(self.z_for(k, o).to_vec());
            parents.push(self.parents_for(k, o).to_vec());
        }
        z.push(h.level(h.k_fine()).to_vec());
        RandomizedSystem::from_parts(h, omega.clone(), z, parents)
    }

    /// Level-`k` cube index of every point for the given outcomes
    /// (`outcomes[s]` is the outcome of `ω_{k_coarse + s}`).
    pub fn cube_assignment(&self, h: &NetHierarchy, outcomes: &[usize], k: i32, out: &mut Vec<usize>) {
        out.clear();
        out.extend(0..h.n());
        let mut j = h.k_fine();
        while j > k {
            let s = (j - 1 - self.k_coarse) as usize;
            let par = &self.parents[s][outcomes[s]];
            for v in out.iter_mut() {
                *v = par[*v];
            }
            j -= 1;
        }
    }
}

/// New points, `≤_ω` parents and cubes for one `ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedSystem {
    pub omega: OmegaSample,
    k_coarse: i32,
    /// `z[k - k_coarse][α]` as a point id, including the finest level.
    z: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
    /// `cube_of[k - k_coarse][x]` is the `α` with `x ∈ Q^k_α`.
    cube_of: Vec<Vec<usize>>,
}

impl RandomizedSystem {
    /// Builds cubes as preimages of ancestor chains under `parents`.
    pub fn from_parts(
        h: &NetHierarchy,
        omega: OmegaSample,
        z: Vec<Vec<usize>>,
        parents: Vec<Vec<usize>>,
    ) -> Self {
        let cube_of = crate::order::ancestor_table(h, &parents);
        Self {
            omega,
            k_coarse: h.k_coarse(),
            z,
            parents,
            cube_of,
        }
    }

    pub fn z(&self, k: i32, alpha: usize) -> usize {
        self.z[(k - self.k_coarse) as usize][alpha]
    }

    pub fn z_level(&self, k: i32) -> &[usize] {
        &self.z[(k - self.k_coarse) as usize]
    }

    pub fn parents(&self) -> &[Vec<usize>] {
        &self.parents
    }

    pub fn parent(&self, k: i32, beta: usize) -> usize {
        self.parents[(k - self.k_coarse) as usize][beta]
    }

    pub fn cube_index(&self, k: i32, x: usize) -> usize {
        self.cube_of[(k - self.k_coarse) as usize][x]
    }

    /// `cube_of` table for level `k`.
    pub fn cube_map(&self, k: i32) -> &[usize] {
        &self.cube_of[(k - self.k_coarse) as usize]
    }

    /// Members of every cube of level `k`, sorted by id.
    pub fn cubes(&self, h: &NetHierarchy, k: i32) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); h.level(k).len()];
        for (x, &a) in self.cube_map(k).iter().enumerate() {
            out[a].push(x);
        }
        out
    }
}

/// Distance from `x` to the complement of `members` (sorted), `+inf` if the
/// complement is empty.
fn dist_to_complement(space: &FiniteSpace, x: usize, members: &[usize]) -> f64 {
    (0..space.n())
        .filter(|y| members.binary_search(y).is_err())
        .map(|y| space.dist(x, y))
        .fold(f64::INFINITY, f64::min)
}

/// Worst relative margins of `inner ⊆ cube ⊆ outer` around `centre`.
/// Returns `(inner_margin, outer_margin)`; both are nonnegative iff the
/// inclusions hold.
fn sandwich(
    space: &FiniteSpace,
    centre: usize,
    members: &[usize],
    inner: f64,
    outer: f64,
    closed_outer: bool,
) -> (f64, f64) {
    // inner: all points outside the cube are at distance >= inner
    let out_d = dist_to_complement(space, centre, members);
    let inner_margin = if out_d.is_infinite() {
        f64::INFINITY
    } else {
        out_d / inner - 1.0
    };
    let far = members
        .iter()
        .map(|&y| space.dist(centre, y))
        .fold(0.0, f64::max);
    let outer_margin = if closed_outer || far < outer {
        1.0 - far / outer
    } else {
        -f64::MIN_POSITIVE.max(far / outer - 1.0)
    };
    (inner_margin, outer_margin)
}

/// Verifies the partition, tiling and ball-comparison properties of one
/// sample.
pub fn verify_cubes(space: &FiniteSpace, h: &NetHierarchy, sys: &RandomizedSystem) -> Report {
    let mut report = Report::new();
    let a0 = h.a0();
    let mut part = Vec::new();
    let mut tiling = Vec::new();
    let mut z_sw = Vec::new();
    let mut z_margin = f64::INFINITY;
    let mut two = Vec::new();
    let mut iter = Vec::new();
    let mut zsep = Vec::new();
    let mut zcov = Vec::new();
    for k in h.level_range() {
        let cubes = sys.cubes(h, k);
        let total: usize = cubes.iter().map(Vec::len).sum();
        if total != space.n() {
            part.push(format!("level {k}: cubes hold {total} of {} points", space.n()));
        }
        for (alpha, c) in cubes.iter().enumerate() {
            if c.is_empty() {
                part.push(format!("level {k}: cube {alpha} is empty"));
            }
        }
        if k < h.k_fine() {
            let fine_cubes = sys.cubes(h, k + 1);
            let mut rebuilt = vec![Vec::new(); cubes.len()];
            for (beta, c) in fine_cubes.iter().enumerate() {
                rebuilt[sys.parent(k, beta)].extend_from_slice(c);
            }
            for (alpha, mut r) in rebuilt.into_iter().enumerate() {
                r.sort_unstable();
                if r != cubes[alpha] {
                    tiling.push(format!("level {k}: cube {alpha} is not the union of its children"));
                }
            }
        }
        let scale = h.scale(k);
        let zs = sys.z_level(k);
        let inner = scale / (6.0 * mathf::powi(a0, 5));
        let outer = 6.0 * mathf::powi(a0, 4) * scale;
        for (alpha, c) in cubes.iter().enumerate() {
            let (im, om) = sandwich(space, zs[alpha], c, inner, outer, false);
            z_margin = z_margin.min(im).min(om);
            if im < 0.0 {
                z_sw.push(format!("level {k}: inner ball around z={} leaves cube {alpha}", zs[alpha]));
            }
            if om < 0.0 {
                z_sw.push(format!("level {k}: cube {alpha} leaves the outer ball around z={}", zs[alpha]));
            }
        }
        // separation and covering of the new points
        let sep = scale / (2.0 * a0);
        for i in 0..zs.len() {
            for j in (i + 1)..zs.len() {
                if space.dist(zs[i], zs[j]) < sep {
                    zsep.push(format!("level {k}: z points {} and {} too close", zs[i], zs[j]));
                }
            }
        }
        let cov = 4.0 * a0 * a0 * scale;
        for x in 0..space.n() {
            if !(space.dist_to_set(x, zs) < cov) {
                zcov.push(format!("level {k}: point {x} far from all z"));
            }
        }
        if k < h.k_fine() {
            let zf = sys.z_level(k + 1);
            let upper = 5.0 * a0 * a0 * a0 * scale;
            let lower = scale / (5.0 * a0 * a0 * a0);
            for (beta, &zb) in zf.iter().enumerate() {
                let p = sys.parent(k, beta);
                for (alpha, &za) in zs.iter().enumerate() {
                    let d = space.dist(zb, za);
                    if alpha == p && !(d < upper) {
                        two.push(format!("level {k}: child {beta} at {d} from its parent's z"));
                    }
                    if alpha != p && d < lower {
                        two.push(format!("level {k}: child {beta} close to non-parent z {za}"));
                    }
                }
            }
        }
        // iterated version across all finer levels
        let upper = 6.0 * mathf::powi(a0, 4) * scale;
        let lower = scale / (6.0 * mathf::powi(a0, 4));
        for j in (k + 1)..=h.k_fine() {
            let zj = sys.z_level(j);
            for (beta, &zb) in zj.iter().enumerate() {
                let anc = crate::order::ancestor_of(h, sys.parents(), j, beta, k);
                for (alpha, &za) in zs.iter().enumerate() {
                    let d = space.dist(zb, za);
                    if alpha == anc && !(d < upper) {
                        iter.push(format!("levels {j}->{k}: descendant {beta} at {d} from ancestor z"));
                    }
                    if alpha != anc && d < lower {
                        iter.push(format!("levels {j}->{k}: node {beta} close to non-ancestor z {za}"));
                    }
                }
            }
        }
    }
    report.exact("cubes.partition", "cubes of each level are nonempty, disjoint and cover the space", part);
    report.exact("cubes.child_tiling", "each cube is the union of its children", tiling);
    report.exact(
        "cubes.ball_sandwich",
        "B(z, A0^-5 δ^k / 6) ⊆ Q ⊆ B(z, 6 A0^4 δ^k)",
        z_sw,
    );
    if let Some(c) = report.checks.last_mut() {
        if c.passed {
            c.margin = z_margin;
        }
    }
    report.extend(verify_center_sandwich(space, h, sys));
    report.exact(
        "cubes.parent_distance",
        "parent z within 5A0^3 δ^k; any z within A0^-3 δ^k / 5 is the parent",
        two,
    );
    report.exact(
        "cubes.ancestor_distance",
        "ancestor z within 6A0^4 δ^k; any z within A0^-4 δ^k / 6 is the ancestor",
        iter,
    );
    report.exact("cubes.z_separation", "new points are (2A0)^-1 δ^k separated", zsep);
    report.exact("cubes.z_covering", "every point is within 4A0^2 δ^k of a new point", zcov);
    report
}

/// `B(x^k_α, A0^-3 δ^k / 8) ⊆ Q^k_α ⊆ B̄(x^k_α, 8 A0^5 δ^k)` for every cube.
pub fn verify_center_sandwich(space: &FiniteSpace, h: &NetHierarchy, sys: &RandomizedSystem) -> Report {
    let a0 = h.a0();
    let mut viol = Vec::new();
    let mut worst = f64::INFINITY;
    for k in h.level_range() {
        let scale = h.scale(k);
        let inner = scale / (8.0 * a0 * a0 * a0);
        let outer = 8.0 * mathf::powi(a0, 5) * scale;
        for (alpha, c) in sys.cubes(h, k).iter().enumerate() {
            let x = h.point(k, alpha);
            let (im, _) = sandwich(space, x, c, inner, outer, true);
            let far = c.iter().map(|&y| space.dist(x, y)).fold(0.0, f64::max);
            let om = 1.0 - far / outer;
            worst = worst.min(im).min(om);
            if im < 0.0 {
                viol.push(format!("level {k}: inner ball around x={x} leaves cube {alpha}"));
            }
            if far > outer {
                viol.push(format!("level {k}: cube {alpha} leaves the closed ball around x={x}"));
            }
        }
    }
    let mut report = Report::new();
    report.exact(
        "cubes.centre_sandwich",
        "B(x, A0^-3 δ^k / 8) ⊆ Q ⊆ closed B(x, 8 A0^5 δ^k)",
        viol,
    );
    if let Some(c) = report.checks.last_mut() {
        if c.passed {
            c.margin = worst;
        }
    }
    report
}

/// `η = ln(1 - τ) / ln δ` with `τ = 1/((L+1) M)`; `+inf` when `τ = 1`.
pub fn theoretical_eta(order: &ReferenceOrder, delta: f64) -> f64 {
    eta_from(order.l(), order.m(), delta)
}

pub fn eta_from(l: usize, m: usize, delta: f64) -> f64 {
    let tau = 1.0 / ((l + 1) * m) as f64;
    if tau >= 1.0 {
        return f64::INFINITY;
    }
    mathf::ln(1.0 - tau) / mathf::ln(delta)
}

/// `(7 A0^6)^η ε^η`, with the `η = ∞` limit taken literally.
pub fn boundary_bound(a0: f64, eta: f64, eps: f64) -> f64 {
    let base = 7.0 * mathf::powi(a0, 6) * eps;
    if eta.is_infinite() {
        if base < 1.0 {
            0.0
        } else if base == 1.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        mathf::powf(base, eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEstimate {
    pub x: usize,
    pub eps: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub theory_bound: f64,
    pub samples: u64,
}

/// Monte Carlo frequency of `d(x, Q^c) < ε δ^k` where `Q` is the level-`k`
/// cube containing `x`, for every point in `xs` and every `ε` in `eps`.
/// Results are indexed `[point][eps]`.
#[allow(clippy::too_many_arguments)]
pub fn boundary_study(
    space: &FiniteSpace,
    h: &NetHierarchy,
    order: &ReferenceOrder,
    sampler: &DyadicSampler,
    xs: &[usize],
    k: i32,
    eps: &[f64],
    nsamples: u64,
    seed: u64,
) -> Result<Vec<Vec<BoundaryEstimate>>> {
    if nsamples == 0 {
        return Err(invalid("nsamples", "must be at least 1"));
    }
    if eps.iter().any(|&e| !(e > 0.0)) {
        return Err(invalid("eps", "must be positive"));
    }
    if !h.level_range().contains(&k) {
        return Err(Error::LevelOutOfRange {
            level: k,
            k_coarse: h.k_coarse(),
            k_fine: h.k_fine(),
        });
    }
    let scale = h.scale(k);
    let eta = theoretical_eta(order, h.delta());
    let mut hits = vec![vec![0u64; eps.len()]; xs.len()];
    let mut outcomes = vec![0usize; sampler.steps()];
    let mut assign = Vec::new();
    for sample in 0..nsamples {
        for j in k..h.k_fine() {
            let (l, m) = draw_coord(order, seed, sample, j);
            outcomes[(j - h.k_coarse()) as usize] = l * order.m() + (m - 1);
        }
        sampler.cube_assignment(h, &outcomes, k, &mut assign);
        for (i, &x) in xs.iter().enumerate() {
            let own = assign[x];
            let d = (0..space.n())
                .filter(|&y| assign[y] != own)
                .map(|y| space.dist(x, y))
                .fold(f64::INFINITY, f64::min);
            for (e, &eps_v) in eps.iter().enumerate() {
                if d < eps_v * scale {
                    hits[i][e] += 1;
                }
            }
        }
    }
    let nf = nsamples as f64;
    Ok(xs
        .iter()
        .zip(hits)
        .map(|(&x, row)| {
            row.into_iter()
                .zip(eps)
                .map(|(count, &e)| {
                    let p = count as f64 / nf;
                    BoundaryEstimate {
                        x,
                        eps: e,
                        estimate: p,
                        stderr: mathf::sqrt(p * (1.0 - p) / nf),
                        theory_bound: boundary_bound(h.a0(), eta, e),
                        samples: nsamples,
                    }
                })
                .collect()
        })
        .collect())
}

/// Single-point, single-`ε` version of [`boundary_study`].
#[allow(clippy::too_many_arguments)]
pub fn boundary_layer_probability(
    space: &FiniteSpace,
    h: &NetHierarchy,
    order: &ReferenceOrder,
    sampler: &DyadicSampler,
    x: usize,
    k: i32,
    eps: f64,
    nsamples: u64,
    seed: u64,
) -> Result<BoundaryEstimate> {
    Ok(boundary_study(space, h, order, sampler, &[x], k, &[eps], nsamples, seed)?[0][0])
}

/// Labels the event in a boundary study row for reports.
pub fn describe(e: &BoundaryEstimate) -> String {
    format!(
        "x={} eps={} estimate={:.5} ± {:.5} bound={:.5}",
        e.x, e.eps, e.estimate, e.stderr, e.theory_bound
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{build_nets, Mode};
    use crate::order::build_reference_order;
    use crate::space::{fixture_a, fixture_b, SpaceSpec, WeightRule};

    struct Built {
        space: FiniteSpace,
        h: NetHierarchy,
        order: ReferenceOrder,
        sampler: DyadicSampler,
    }

    fn built(space: FiniteSpace, delta: f64) -> Built {
        let a0 = crate::space::quasi_triangle_constant(&space).0;
        let h = build_nets(&space, a0, delta, Mode::Relaxed).unwrap();
        let order = build_reference_order(&space, &h).unwrap();
        let sampler = DyadicSampler::new(&space, &h, &order).unwrap();
        Built {
            space,
            h,
            order,
            sampler,
        }
    }

    #[test]
    fn omega_is_reproducible() {
        let b = built(fixture_b(), 0.25);
        assert_eq!(sample_omega(&b.order, 42, 0), sample_omega(&b.order, 42, 0));
        for s in 0..50 {
            let w = sample_omega(&b.order, 42, s);
            for &(l, m) in &w.coords {
                assert!(l <= b.order.l() && (1..=b.order.m()).contains(&m));
            }
        }
    }

    #[test]
    fn label_frequencies() {
        let b = built(fixture_b(), 0.25);
        let n = 100_000u64;
        let mut counts = vec![0u64; b.order.l() + 1];
        for s in 0..n {
            counts[draw_coord(&b.order, 5, s, 1).0] += 1;
        }
        let p = 1.0 / (b.order.l() + 1) as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - p).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn fixture_a_new_point_choice() {
        let b = built(fixture_a(), 0.25);
        // single coarse point with label1 0; children labelled 1..4 by id
        let o = 1;
        assert_eq!(b.sampler.z_for(-1, o), &[1]);
        let sys = b.sampler.system(
            &b.h,
            &OmegaSample {
                seed: 0,
                sample: 0,
                k_coarse: -1,
                coords: vec![(0, 2)],
            },
        );
        assert_eq!(sys.cubes(&b.h, -1), vec![vec![0, 1, 2, 3]]);
        assert!(verify_cubes(&b.space, &b.h, &sys).all_passed());
    }

    #[test]
    fn fixture_b_cubes_many_seeds() {
        let b = built(fixture_b(), 0.25);
        for seed in 0..100 {
            let sys = b.sampler.system(&b.h, &sample_omega(&b.order, seed, 0));
            let r = verify_cubes(&b.space, &b.h, &sys);
            assert!(r.all_passed(), "seed {seed}: {:?}", r.failures().collect::<Vec<_>>());
        }
    }

    #[test]
    fn finer_delta_gives_random_cubes() {
        let b = built(
            SpaceSpec::Cycle { n: 64 }.generate(&WeightRule::Uniform).unwrap(),
            0.125,
        );
        let mut distinct = Vec::new();
        for seed in 0..40 {
            let sys = b.sampler.system(&b.h, &sample_omega(&b.order, seed, 0));
            assert!(verify_cubes(&b.space, &b.h, &sys).all_passed());
            let map = sys.cube_map(b.h.k_fine() - 1).to_vec();
            if !distinct.contains(&map) {
                distinct.push(map);
            }
        }
        assert!(distinct.len() > 1);
    }

    #[test]
    fn omega_locality() {
        let b = built(
            SpaceSpec::Cycle { n: 64 }.generate(&WeightRule::Uniform).unwrap(),
            0.125,
        );
        let w1 = sample_omega(&b.order, 3, 0);
        let mut w2 = sample_omega(&b.order, 4, 0);
        let k = b.h.k_fine() - 1;
        let s = (k - b.h.k_coarse()) as usize;
        w2.coords[s] = w1.coords[s];
        let s1 = b.sampler.system(&b.h, &w1);
        let s2 = b.sampler.system(&b.h, &w2);
        assert_eq!(s1.parents()[s], s2.parents()[s]);
        assert_eq!(s1.z_level(k), s2.z_level(k));
    }

    #[test]
    fn corrupted_parent_map_is_caught() {
        let b = built(fixture_b(), 0.25);
        let sys = b.sampler.system(&b.h, &sample_omega(&b.order, 7, 0));
        let mut parents = sys.parents().to_vec();
        // move the centre 4 of cube 1 into cube 0
        parents[1][4] = 0;
        let z: Vec<Vec<usize>> = b.h.level_range().map(|k| sys.z_level(k).to_vec()).collect();
        let broken = RandomizedSystem::from_parts(&b.h, sys.omega.clone(), z, parents);
        let r = verify_center_sandwich(&b.space, &b.h, &broken);
        assert!(!r.all_passed());
        assert!(r.checks[0].detail.contains("inner ball"));
    }

    #[test]
    fn eta_values() {
        assert!(eta_from(0, 1, 0.25).is_infinite());
        let e = eta_from(1, 2, 0.25);
        assert!((e - (0.75f64).ln() / (0.25f64).ln()).abs() < 1e-15);
        assert!((e - 0.207_518_749).abs() < 1e-9);
        assert!(eta_from(3, 4, 0.25) < e);
        assert_eq!(boundary_bound(1.0, f64::INFINITY, 0.1), 0.0);
    }

    #[test]
    fn boundary_large_eps_is_vacuous() {
        let b = built(fixture_b(), 0.25);
        let est = boundary_layer_probability(&b.space, &b.h, &b.order, &b.sampler, 3, 1, 4.0, 200, 1)
            .unwrap();
        assert!(est.estimate <= 1.0 && est.theory_bound >= 1.0);
    }
}
