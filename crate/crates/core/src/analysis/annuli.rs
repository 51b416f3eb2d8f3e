//! Volume growth against empty annuli, the `k_j` level sequence and the
//! sum over large balls that replaces reverse doubling.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::mathf;
use crate::nets::NetHierarchy;
use crate::report::Report;
use crate::space::{doubling_constant, FiniteSpace};

/// Which alternative of the dichotomy holds for `(x, r, R)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dichotomy {
    /// `V(x,R) ≥ (1+ε) V(x,r)`.
    Growth,
    /// `B(x, R/(2A0)) \ B(x, 2A0 r) = ∅`.
    EmptyAnnulus,
    Both,
    Neither,
}

impl Dichotomy {
    pub fn holds(self) -> bool {
        self != Dichotomy::Neither
    }
}

/// `ε = 1 / C_μ(3 A0²)`.
pub fn growth_epsilon(space: &FiniteSpace, a0: f64) -> f64 {
    1.0 / doubling_constant(space, 3.0 * a0 * a0)
}

pub fn empty_annulus_dichotomy(space: &FiniteSpace, a0: f64, eps: f64, x: usize, r: f64, big_r: f64) -> Result<Dichotomy> {
    if !(big_r > r && r > 0.0) {
        return Err(invalid("radii", "need R > r > 0"));
    }
    let growth = space.volume_of_ball(x, big_r) >= (1.0 + eps) * space.volume_of_ball(x, r);
    let outer = big_r / (2.0 * a0);
    let inner = 2.0 * a0 * r;
    let empty = !space
        .by_distance(x)
        .iter()
        .any(|&(d, _)| d >= inner && d < outer);
    Ok(match (growth, empty) {
        (true, true) => Dichotomy::Both,
        (true, false) => Dichotomy::Growth,
        (false, true) => Dichotomy::EmptyAnnulus,
        (false, false) => Dichotomy::Neither,
    })
}

/// Outcome counts of a full `(x, r, R)` scan over canonical radii.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DichotomyScan {
    pub growth: usize,
    pub empty: usize,
    pub both: usize,
    pub failures: usize,
}

pub fn dichotomy_scan(space: &FiniteSpace, a0: f64) -> DichotomyScan {
    let eps = growth_epsilon(space, a0);
    let radii = space.canonical_radii();
    let mut scan = DichotomyScan::default();
    for x in 0..space.n() {
        for (i, &r) in radii.iter().enumerate() {
            for &big in &radii[i + 1..] {
                match empty_annulus_dichotomy(space, a0, eps, x, r, big).expect("radii are increasing") {
                    Dichotomy::Growth => scan.growth += 1,
                    Dichotomy::EmptyAnnulus => scan.empty += 1,
                    Dichotomy::Both => scan.both += 1,
                    Dichotomy::Neither => scan.failures += 1,
                }
            }
        }
    }
    scan
}

/// `d(x, 𝒴^k)`, infinite when `𝒴^k` is empty (in particular outside the
/// step range).
pub fn dist_to_new_points(space: &FiniteSpace, h: &NetHierarchy, x: usize, k: i32) -> f64 {
    space.dist_to_set(x, &h.new_points(k))
}

/// Largest `k` with `δ^k ≥ r`.
pub fn level_at_least(delta: f64, r: f64) -> i32 {
    let mut k = mathf::floor(mathf::ln(r) / mathf::ln(delta)) as i32;
    while mathf::powi(delta, k) < r {
        k -= 1;
    }
    while mathf::powi(delta, k + 1) >= r {
        k += 1;
    }
    k
}

/// The `k_j` level sequence with its certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct KjSequence {
    pub x: usize,
    pub r: f64,
    pub eps: f64,
    /// `k(0) > k(1) > …` as constructed.
    pub raw: Vec<i32>,
    /// `k_0 = k(0)`, `k_{j+1} = k(j) − 2`.
    pub relabeled: Vec<i32>,
    /// Volume constant `c = 1/(1+ε)`.
    pub c: f64,
    /// Distance constant `c′ = δ³/(2A0)`.
    pub c_prime: f64,
}

/// Builds `k(0)` = largest `k` with `δ^k ≥ r` and `k(j+1)` = largest `k`
/// with `V(x,δ^k) ≥ (1+ε) V(x,δ^{k(j)})`, stopping once `μ(X)` is too
/// small for another step.
pub fn kj_sequence(space: &FiniteSpace, h: &NetHierarchy, eps: f64, x: usize, r: f64) -> Result<KjSequence> {
    if !(r > 0.0) {
        return Err(invalid("r", "radius must be positive"));
    }
    let delta = h.delta();
    let total = space.total_mass();
    let mut raw = alloc::vec![level_at_least(delta, r)];
    loop {
        let last = *raw.last().expect("nonempty");
        let target = (1.0 + eps) * space.volume_of_ball(x, mathf::powi(delta, last));
        if total < target {
            break;
        }
        let mut k = last - 1;
        while space.volume_of_ball(x, mathf::powi(delta, k)) < target {
            k -= 1;
        }
        raw.push(k);
    }
    let mut relabeled = alloc::vec![raw[0]];
    relabeled.extend(raw.iter().map(|&k| k - 2));
    Ok(KjSequence {
        x,
        r,
        eps,
        c: 1.0 / (1.0 + eps),
        c_prime: mathf::powi(delta, 3) / (2.0 * h.a0()),
        raw,
        relabeled,
    })
}

/// Certificates of the raw sequence over `k(j+1)−1 ≤ k ≤ k(j)−2` and of
/// the relabeled sequence over `k_j ≥ k > k_{j+1}`.
pub fn verify_kj(space: &FiniteSpace, h: &NetHierarchy, seq: &KjSequence) -> Report {
    let delta = h.delta();
    let a0 = h.a0();
    let vr = space.volume_of_ball(seq.x, seq.r);
    let bottom = h.k_coarse() - 2;
    let vol = |k: i32| space.volume_of_ball(seq.x, mathf::powi(delta, k));
    let dy = |k: i32| dist_to_new_points(space, h, seq.x, k) + mathf::powi(delta, k);
    let growth = |j: usize| mathf::powi(1.0 + seq.eps, j as i32);
    let mut raw_bad = Vec::new();
    for j in 0..seq.raw.len() {
        let hi = seq.raw[j] - 2;
        let lo = seq.raw.get(j + 1).map_or(bottom, |&k| k - 1);
        for k in lo..=hi {
            if vol(k) < growth(j) * vr * (1.0 - 1e-12) {
                raw_bad.push(format!("j={j}, k={k}: volume"));
            }
            if let Some(&next) = seq.raw.get(j + 1) {
                let need = delta / (2.0 * a0) * mathf::powi(delta, next);
                if dy(k) < need * (1.0 - 1e-12) {
                    raw_bad.push(format!("j={j}, k={k}: d(x,𝒴^k)+δ^k = {} < {need}", dy(k)));
                }
            }
        }
    }
    let mut rel_bad = Vec::new();
    for j in 0..seq.relabeled.len() {
        let hi = seq.relabeled[j];
        let next = seq.relabeled.get(j + 1).copied();
        let lo = next.map_or(bottom, |k| k + 1);
        for k in lo..=hi {
            if vol(k) < seq.c * growth(j) * vr * (1.0 - 1e-12) {
                rel_bad.push(format!("j={j}, k={k}: volume"));
            }
            if let Some(nk) = next {
                let need = seq.c_prime * mathf::powi(delta, nk);
                if dy(k) < need * (1.0 - 1e-12) {
                    rel_bad.push(format!("j={j}, k={k}: distance {} < {need}", dy(k)));
                }
            }
        }
    }
    let mut report = Report::new();
    report.exact(
        "annuli.kj_raw",
        "V(x,δ^k) ≥ (1+ε)^j V(x,r) and d(x,𝒴^k)+δ^k ≥ (δ/2A0) δ^{k(j+1)} for k(j+1)−1 ≤ k ≤ k(j)−2",
        raw_bad,
    );
    report.exact(
        "annuli.kj_relabeled",
        "V(x,δ^k) ≥ c(1+ε)^j V(x,r) and d(x,𝒴^k)+δ^k ≥ c′δ^{k_{j+1}} for k_j ≥ k > k_{j+1}",
        rel_bad,
    );
    report
}

/// Parameters of the large-ball sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumParams {
    pub nu: f64,
    pub a: f64,
    pub gamma: f64,
}

impl Default for SumParams {
    fn default() -> Self {
        Self {
            nu: 1.0,
            a: 1.0,
            gamma: 1.0,
        }
    }
}

/// `V(x,r)^ν Σ_{δ^k ≥ r} V(x,δ^k)^{−ν} exp(−γ (d(x,𝒴^k)/δ^k)^a)`.
///
/// Only the step range contributes: elsewhere `𝒴^k` is empty.
pub fn large_ball_ratio(space: &FiniteSpace, h: &NetHierarchy, p: SumParams, x: usize, r: f64) -> f64 {
    let vr = space.volume_of_ball(x, r);
    let mut sum = 0.0;
    for k in h.step_range() {
        let scale = h.scale(k);
        if scale < r {
            continue;
        }
        let d = dist_to_new_points(space, h, x, k);
        if !d.is_finite() {
            continue;
        }
        let v = space.volume_of_ball(x, scale);
        sum += mathf::powf(vr / v, p.nu) * mathf::exp(-p.gamma * mathf::powf(d / scale, p.a));
    }
    sum
}

/// Supremum of [`large_ball_ratio`] over all points and all radii that are
/// either canonical or a level scale.
pub fn large_ball_sup(space: &FiniteSpace, h: &NetHierarchy, p: SumParams) -> (f64, usize, f64) {
    let mut radii = space.canonical_radii();
    radii.extend(h.level_range().map(|k| h.scale(k)));
    let mut best = (0.0, 0, 0.0);
    for x in 0..space.n() {
        for &r in &radii {
            let v = large_ball_ratio(space, h, p, x, r);
            if v > best.0 {
                best = (v, x, r);
            }
        }
    }
    best
}

/// Dichotomy scan, `k_j` certificates for every point and canonical radius,
/// and the large-ball sum with default parameters.
pub fn verify_annuli(space: &FiniteSpace, h: &NetHierarchy) -> Report {
    let a0 = h.a0();
    let scan = dichotomy_scan(space, a0);
    let mut report = Report::new();
    report.margin(
        "annuli.dichotomy",
        "volume grows by 1+ε or the annulus B(x,R/(2A0)) \\ B(x,2A0 r) is empty",
        0.0,
        -(scan.failures as f64),
        format!(
            "growth {}, empty annulus {}, both {}, neither {}",
            scan.growth, scan.empty, scan.both, scan.failures
        ),
    );
    let eps = growth_epsilon(space, a0);
    let mut raw = Vec::new();
    let mut rel = Vec::new();
    for x in 0..space.n() {
        for r in space.canonical_radii() {
            let seq = kj_sequence(space, h, eps, x, r).expect("canonical radii are positive");
            let sub = verify_kj(space, h, &seq);
            for c in sub.failures() {
                let entry = format!("x={x} r={r}: {}", c.detail);
                if c.name == "annuli.kj_raw" {
                    raw.push(entry);
                } else {
                    rel.push(entry);
                }
            }
        }
    }
    report.exact("annuli.kj_raw", "k(j) certificates over every (x, r)", raw);
    report.exact("annuli.kj_relabeled", "relabeled k_j certificates over every (x, r)", rel);
    let (sup, x, r) = large_ball_sup(space, h, SumParams::default());
    report.margin(
        "annuli.large_ball_sum",
        "Σ_{δ^k ≥ r} V(x,δ^k)^{-1} exp(-d(x,𝒴^k)/δ^k) ≲ V(x,r)^{-1}",
        0.0,
        if sup.is_finite() { 1.0 } else { -1.0 },
        format!("sup ratio {sup:.4} at x={x}, r={r}"),
    );
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{build_nets, Mode};
    use crate::space::{fixture_b, SpaceSpec, WeightRule};

    fn nets(space: &FiniteSpace) -> NetHierarchy {
        build_nets(space, 1.0, 0.25, Mode::Relaxed).unwrap()
    }

    #[test]
    fn verify_annuli_on_fixtures() {
        let two = SpaceSpec::TwoCluster { n: 8, gap: 100.0 }.generate(&WeightRule::Counting).unwrap();
        for space in [fixture_b(), two] {
            let r = verify_annuli(&space, &nets(&space));
            assert!(r.all_passed(), "{:#?}", r.failures().collect::<Vec<_>>());
        }
    }

    #[test]
    fn dichotomy_examples() {
        let tc = SpaceSpec::TwoCluster { n: 4, gap: 100.0 }.generate(&WeightRule::Counting).unwrap();
        let eps = growth_epsilon(&tc, 1.0);
        assert_eq!(empty_annulus_dichotomy(&tc, 1.0, eps, 0, 2.0, 50.0).unwrap(), Dichotomy::EmptyAnnulus);
        let b = fixture_b();
        let eps = growth_epsilon(&b, 1.0);
        let v = empty_annulus_dichotomy(&b, 1.0, eps, 0, 1.0 / 16.0, 0.5).unwrap();
        assert!(matches!(v, Dichotomy::Growth | Dichotomy::Both));
        // R ≤ 4 A0² r leaves no room for the annulus
        let v = empty_annulus_dichotomy(&b, 1.0, eps, 0, 0.1, 0.3).unwrap();
        assert!(matches!(v, Dichotomy::EmptyAnnulus | Dichotomy::Both));
        assert_eq!(dichotomy_scan(&b, 1.0).failures, 0);
        assert_eq!(dichotomy_scan(&tc, 1.0).failures, 0);
    }

    #[test]
    fn level_search() {
        assert_eq!(level_at_least(0.25, 1.0), 0);
        assert_eq!(level_at_least(0.25, 0.25), 1);
        assert_eq!(level_at_least(0.25, 0.2), 1);
        assert_eq!(level_at_least(0.25, 0.3), 0);
        assert_eq!(level_at_least(0.25, 5.0), -2);
    }

    #[test]
    fn kj_on_fixtures() {
        let b = fixture_b();
        let h = nets(&b);
        let eps = growth_epsilon(&b, 1.0);
        let seq = kj_sequence(&b, &h, eps, 0, 1.0 / 16.0).unwrap();
        assert_eq!(seq.raw[0], 2);
        assert!(seq.raw.windows(2).all(|w| w[1] < w[0]));
        let r = verify_kj(&b, &h, &seq);
        assert!(r.all_passed(), "{:?}", r.failures().collect::<Vec<_>>());

        let single = SpaceSpec::Line { n: 1, normalized: false }.generate(&WeightRule::Counting).unwrap();
        let hs = nets(&single);
        let seq = kj_sequence(&single, &hs, 0.5, 0, 1.0).unwrap();
        assert_eq!(seq.raw.len(), 1);
        assert!(verify_kj(&single, &hs, &seq).all_passed());
    }

    #[test]
    fn kj_two_cluster_sees_far_new_points() {
        let tc = SpaceSpec::TwoCluster { n: 8, gap: 300.0 }.generate(&WeightRule::Counting).unwrap();
        let h = nets(&tc);
        let eps = growth_epsilon(&tc, 1.0);
        for x in 0..8 {
            for r in [0.5, 1.0, 2.0, 10.0] {
                let seq = kj_sequence(&tc, &h, eps, x, r).unwrap();
                let rep = verify_kj(&tc, &h, &seq);
                assert!(rep.all_passed(), "x={x} r={r}: {:?}", rep.failures().collect::<Vec<_>>());
            }
        }
        // some level between the cluster scale and the gap has no new point
        // anywhere near x = 0
        let far = h
            .step_range()
            .map(|k| dist_to_new_points(&tc, &h, 0, k) / h.scale(k))
            .fold(0.0, f64::max);
        assert!(far >= 1.0);
    }

    #[test]
    fn large_ball_sums() {
        let b = fixture_b();
        let h = nets(&b);
        let (sup, _, _) = large_ball_sup(&b, &h, SumParams::default());
        assert!(sup.is_finite() && sup > 0.0);
        // one contributing level: the single term is at most 1
        let x = 5;
        let r = h.scale(h.k_coarse());
        assert!(large_ball_ratio(&b, &h, SumParams::default(), x, r) <= 1.0);
        let tc = SpaceSpec::TwoCluster { n: 8, gap: 300.0 }.generate(&WeightRule::Counting).unwrap();
        let ht = nets(&tc);
        assert!(large_ball_sup(&tc, &ht, SumParams::default()).0.is_finite());
    }
}
