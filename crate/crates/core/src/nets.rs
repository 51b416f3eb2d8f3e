//! Nested reference nets `𝒳^k`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::mathf;
use crate::report::Report;
use crate::space::FiniteSpace;

/// How the scale parameter is validated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// `δ <= A0^-10 / 1000`; all geometric guarantees then hold.
    Strict,
    /// `δ <= 1/4`; geometric conclusions are checked at runtime.
    Relaxed,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(Mode::Strict),
            "relaxed" => Ok(Mode::Relaxed),
            other => Err(invalid("mode", format!("expected strict or relaxed, got `{other}`"))),
        }
    }
}

/// Largest admissible `δ` in strict mode.
pub fn strict_delta_bound(a0: f64) -> f64 {
    mathf::powi(a0, -10) / 1000.0
}

/// Largest admissible `δ` in relaxed mode.
pub const RELAXED_DELTA_BOUND: f64 = 0.25;

/// Hard cap on the number of levels on either side of level 0.
pub const MAX_LEVELS: usize = 256;

/// Nets `𝒳^k` for `k_coarse <= k <= k_fine`, each a sorted list of point ids.
///
/// `𝒳^{k_fine}` is the whole space and `𝒳^{k_coarse}` is a single point.
/// Positions within a level are the indices `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetHierarchy {
    delta: f64,
    a0: f64,
    n: usize,
    k_coarse: i32,
    levels: Vec<Vec<usize>>,
}

impl NetHierarchy {
    /// Assembles a hierarchy from stored levels. Only the shape is checked
    /// here (ids in range, sorted, unique); use [`verify_nets`] for geometry.
    pub fn from_parts(
        delta: f64,
        a0: f64,
        n: usize,
        k_coarse: i32,
        levels: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid("delta", "must lie in (0, 1)"));
        }
        if levels.is_empty() {
            return Err(invalid("levels", "at least one level is required"));
        }
        for (i, level) in levels.iter().enumerate() {
            if level.is_empty() {
                return Err(invalid("levels", format!("level {} is empty", k_coarse + i as i32)));
            }
            if level.windows(2).any(|w| w[0] >= w[1]) || level.iter().any(|&p| p >= n) {
                return Err(invalid(
                    "levels",
                    format!("level {} must hold sorted distinct ids below {n}", k_coarse + i as i32),
                ));
            }
        }
        Ok(Self {
            delta,
            a0,
            n,
            k_coarse,
            levels,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_coarse(&self) -> i32 {
        self.k_coarse
    }

    pub fn k_fine(&self) -> i32 {
        self.k_coarse + self.levels.len() as i32 - 1
    }

    /// Levels `k_coarse..=k_fine`.
    pub fn level_range(&self) -> core::ops::RangeInclusive<i32> {
        self.k_coarse..=self.k_fine()
    }

    /// Levels that carry a refinement step, `k_coarse..k_fine`.
    pub fn step_range(&self) -> core::ops::Range<i32> {
        self.k_coarse..self.k_fine()
    }

    /// `δ^k`.
    pub fn scale(&self, k: i32) -> f64 {
        mathf::powi(self.delta, k)
    }

    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }

    /// `𝒳^k`, clamped to the stored range (the nets are constant beyond it
    /// at the fine end; below `k_coarse` the single coarse point is returned).
    pub fn level(&self, k: i32) -> &[usize] {
        let i = (k - self.k_coarse).clamp(0, self.levels.len() as i32 - 1);
        &self.levels[i as usize]
    }

    /// `x^k_α`.
    pub fn point(&self, k: i32, alpha: usize) -> usize {
        self.level(k)[alpha]
    }

    /// Index `α` of point `x` in `𝒳^k`, if present.
    pub fn index_of(&self, k: i32, x: usize) -> Option<usize> {
        self.level(k).binary_search(&x).ok()
    }

    /// `𝒴^k = 𝒳^{k+1} \ 𝒳^k` as sorted point ids; empty outside the step range.
    pub fn new_points(&self, k: i32) -> Vec<usize> {
        if !self.step_range().contains(&k) {
            return Vec::new();
        }
        let coarse = self.level(k);
        self.level(k + 1)
            .iter()
            .copied()
            .filter(|p| coarse.binary_search(p).is_err())
            .collect()
    }
}

/// Builds the nets by greedy selection in ascending id order.
pub fn build_nets(space: &FiniteSpace, a0: f64, delta: f64, mode: Mode) -> Result<NetHierarchy> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", "must lie in (0, 1)"));
    }
    match mode {
        Mode::Strict => {
            let bound = strict_delta_bound(a0);
            if delta > bound {
                return Err(Error::StrictDelta { delta, bound, a0 });
            }
        }
        Mode::Relaxed => {
            if delta > RELAXED_DELTA_BOUND {
                return Err(invalid("delta", "relaxed mode requires delta <= 1/4"));
            }
        }
    }
    let n = space.n();
    let greedy = |candidates: &[usize], seed: &[usize], sep: f64| -> Vec<usize> {
        let mut chosen = seed.to_vec();
        for &p in candidates {
            if chosen.binary_search(&p).is_ok() {
                continue;
            }
            if chosen.iter().all(|&q| space.dist(p, q) >= sep) {
                let at = chosen.partition_point(|&q| q < p);
                chosen.insert(at, p);
            }
        }
        chosen
    };
    let all: Vec<usize> = (0..n).collect();
    let level0 = greedy(&all, &[], 1.0);

    // coarse side: k = 0, -1, ... until a single point remains
    let mut coarse = vec![level0.clone()];
    let mut k = 0i32;
    while coarse.last().map_or(0, Vec::len) > 1 {
        if coarse.len() > MAX_LEVELS {
            return Err(invalid("delta", "too many coarse levels; space diameter is huge relative to 1"));
        }
        k -= 1;
        let prev = coarse.last().expect("nonempty");
        coarse.push(greedy(prev, &[], mathf::powi(delta, k)));
    }
    let k_coarse = k;
    coarse.reverse();

    // fine side: k = 1, 2, ... until the whole space is reached
    let mut levels = coarse;
    let mut k = 0i32;
    while levels.last().map_or(0, Vec::len) < n {
        if k as usize > MAX_LEVELS {
            return Err(invalid("delta", "too many fine levels; points are extremely close relative to 1"));
        }
        k += 1;
        let prev = levels.last().expect("nonempty").clone();
        levels.push(greedy(&all, &prev, mathf::powi(delta, k)));
    }
    // the whole space may already be reached below level 0
    let first_full = levels
        .iter()
        .position(|l| l.len() == n)
        .expect("the last level is the whole space");
    levels.truncate(first_full + 1);
    NetHierarchy::from_parts(delta, a0, n, k_coarse, levels)
}

/// Checks separation, covering, nesting and the two end conditions.
pub fn verify_nets(space: &FiniteSpace, h: &NetHierarchy) -> Report {
    let mut report = Report::new();
    let a0 = h.a0();
    let mut sep_viol = Vec::new();
    let mut cov_viol = Vec::new();
    let mut nest_viol = Vec::new();
    let mut sep_margin = f64::INFINITY;
    let mut cov_margin = f64::INFINITY;
    let mut worst_cover = String::new();
    for k in h.level_range() {
        let level = h.level(k);
        let scale = h.scale(k);
        for (i, &p) in level.iter().enumerate() {
            for &q in &level[i + 1..] {
                let d = space.dist(p, q);
                sep_margin = sep_margin.min(d / scale - 1.0);
                if d < scale {
                    sep_viol.push(format!("level {k}: points {p},{q} at {d}"));
                }
            }
        }
        let bound = 2.0 * a0 * scale;
        let mut radius: f64 = 0.0;
        for x in 0..space.n() {
            let d = space.dist_to_set(x, level);
            radius = radius.max(d);
            if !(d < bound) {
                cov_viol.push(format!("level {k}: point {x} at distance {d} >= {bound}"));
            }
        }
        cov_margin = cov_margin.min(1.0 - radius / bound);
        worst_cover.push_str(&format!("k={k}: {radius} < {bound}; "));
        if k > h.k_coarse() {
            let finer = level;
            for &p in h.level(k - 1) {
                if finer.binary_search(&p).is_err() {
                    nest_viol.push(format!("level {}: point {p} missing at level {k}", k - 1));
                }
            }
        }
    }
    report.exact("nets.separation", "distinct net points of level k are at least δ^k apart", sep_viol);
    if let Some(c) = report.checks.last_mut() {
        c.margin = if c.passed { sep_margin.min(f64::MAX) } else { c.margin };
    }
    report.exact("nets.covering", "every point lies within 2A0 δ^k of the level-k net", cov_viol);
    if let Some(c) = report.checks.last_mut() {
        if c.passed {
            c.margin = cov_margin;
        }
        c.detail = worst_cover;
    }
    report.exact("nets.nesting", "each net contains the previous one", nest_viol);

    let top = h.level(h.k_fine());
    let mut stab = Vec::new();
    if top.len() != space.n() {
        stab.push(format!("level {} has {} of {} points", h.k_fine(), top.len(), space.n()));
    }
    report.exact("nets.stabilization", "the finest net is the whole space", stab);
    let mut single = Vec::new();
    if h.level(h.k_coarse()).len() != 1 {
        single.push(format!("level {} has {} points", h.k_coarse(), h.level(h.k_coarse()).len()));
    }
    report.exact("nets.coarse_singleton", "the coarsest net is a single point", single);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{compute_constants, fixture_a, fixture_b, SpaceSpec, WeightRule};

    #[test]
    fn fixture_a_levels() {
        let a = fixture_a();
        let h = build_nets(&a, 1.0, 0.25, Mode::Relaxed).unwrap();
        assert_eq!(h.k_coarse(), -1);
        assert_eq!(h.k_fine(), 0);
        assert_eq!(h.level(-1), &[0]);
        assert_eq!(h.level(0), &[0, 1, 2, 3]);
        assert_eq!(h.new_points(-1), vec![1, 2, 3]);
        assert!(verify_nets(&a, &h).all_passed());
    }

    #[test]
    fn fixture_b_levels() {
        let b = fixture_b();
        let h = build_nets(&b, 1.0, 0.25, Mode::Relaxed).unwrap();
        assert_eq!(h.k_coarse(), 0);
        assert_eq!(h.k_fine(), 2);
        assert_eq!(h.level(0), &[0]);
        assert_eq!(h.level(1), &[0, 4, 8, 12]);
        assert_eq!(h.level(2).len(), 16);
        assert_eq!(h.new_points(0).len(), 3);
        assert_eq!(h.new_points(1).len(), 12);
        let r = verify_nets(&b, &h);
        assert!(r.all_passed(), "{r:?}");
        // worst covering radius at level 1 is 2/16
        assert!(r.get("nets.covering").unwrap().detail.contains("k=1: 0.125 < 0.5"));
    }

    #[test]
    fn single_point() {
        let s = SpaceSpec::Line { n: 1, normalized: false }
            .generate(&WeightRule::Counting)
            .unwrap();
        let h = build_nets(&s, 1.0, 0.25, Mode::Relaxed).unwrap();
        assert_eq!(h.k_coarse(), h.k_fine());
        assert!(verify_nets(&s, &h).all_passed());
    }

    #[test]
    fn strict_mode_rejects_quarter() {
        let b = fixture_b();
        let c = compute_constants(&b);
        assert!(matches!(
            build_nets(&b, c.a0, 0.25, Mode::Strict),
            Err(Error::StrictDelta { .. })
        ));
        assert!(build_nets(&b, c.a0, 0.5, Mode::Relaxed).is_err());
        assert!(build_nets(&b, c.a0, 0.0, Mode::Relaxed).is_err());
    }

    #[test]
    fn strict_mode_two_levels() {
        let b = fixture_b();
        let h = build_nets(&b, 1.0, 1e-3, Mode::Strict).unwrap();
        assert_eq!((h.k_coarse(), h.k_fine()), (0, 1));
        assert!(verify_nets(&b, &h).all_passed());
    }

    #[test]
    fn well_separated_space_has_negative_fine_level() {
        let s = fixture_a().scaled(10.0).unwrap();
        let h = build_nets(&s, 1.0, 0.25, Mode::Relaxed).unwrap();
        assert_eq!(h.k_fine(), -1);
        assert_eq!(h.level(h.k_coarse()).len(), 1);
        assert!(verify_nets(&s, &h).all_passed());
    }

    #[test]
    fn removed_point_is_reported() {
        let b = fixture_b();
        let h = build_nets(&b, 1.0, 0.25, Mode::Relaxed).unwrap();
        let mut levels = h.levels().to_vec();
        levels[2].retain(|&p| p != 5);
        let broken = NetHierarchy::from_parts(0.25, 1.0, 16, 0, levels).unwrap();
        let r = verify_nets(&b, &broken);
        assert!(!r.all_passed());
        assert!(!r.get("nets.stabilization").unwrap().passed);
    }
}
