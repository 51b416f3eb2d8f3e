//! Reference parent/child structure between consecutive nets, neighbours and
//! labels.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nets::NetHierarchy;
use crate::report::Report;
use crate::space::FiniteSpace;

/// Deterministic parent relation `(k+1, β) ≤ (k, α)` with labels.
///
/// All per-level tables are indexed by the step `k - k_coarse` for
/// `k_coarse <= k < k_fine`; children are indices into `𝒳^{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOrder {
    k_coarse: i32,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<Vec<usize>>>,
    neighbours: Vec<Vec<Vec<usize>>>,
    label1: Vec<Vec<usize>>,
    label2: Vec<Vec<usize>>,
    l: usize,
    m: usize,
}

impl ReferenceOrder {
    fn step(&self, k: i32) -> usize {
        let s = k - self.k_coarse;
        assert!(
            s >= 0 && (s as usize) < self.parents.len(),
            "level {k} outside the step range"
        );
        s as usize
    }

    /// Parent index in `𝒳^k` of child `β ∈ 𝒳^{k+1}`.
    pub fn parent(&self, k: i32, beta: usize) -> usize {
        self.parents[self.step(k)][beta]
    }

    /// Per step, the parent index of every child.
    pub fn parents(&self) -> &[Vec<usize>] {
        &self.parents
    }

    pub fn children(&self, k: i32, alpha: usize) -> &[usize] {
        &self.children[self.step(k)][alpha]
    }

    pub fn neighbours(&self, k: i32, alpha: usize) -> &[usize] {
        &self.neighbours[self.step(k)][alpha]
    }

    /// Colour in `0..=L`; neighbours differ.
    pub fn label1(&self, k: i32, alpha: usize) -> usize {
        self.label1[self.step(k)][alpha]
    }

    /// Rank `1..=M` of child `β ∈ 𝒳^{k+1}` among its siblings.
    pub fn label2(&self, k: i32, beta: usize) -> usize {
        self.label2[self.step(k)][beta]
    }

    /// Maximal number of neighbours.
    pub fn l(&self) -> usize {
        self.l
    }

    /// Maximal number of children.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of equally likely values of one coordinate `ω_k`.
    pub fn outcomes(&self) -> usize {
        (self.l + 1) * self.m
    }

    pub fn k_coarse(&self) -> i32 {
        self.k_coarse
    }

    /// `τ = 1 / ((L+1) M)`.
    pub fn tau(&self) -> f64 {
        1.0 / self.outcomes() as f64
    }
}

/// Builds parents (nearest coarse point, lowest id on ties), neighbours and
/// labels.
pub fn build_reference_order(space: &FiniteSpace, h: &NetHierarchy) -> Result<ReferenceOrder> {
    let a0 = h.a0();
    let mut parents = Vec::new();
    let mut children = Vec::new();
    let mut neighbours = Vec::new();
    let mut label1 = Vec::new();
    let mut label2 = Vec::new();
    let mut l = 0;
    let mut m = 1;
    for k in h.step_range() {
        let coarse = h.level(k);
        let fine = h.level(k + 1);
        let scale = h.scale(k);
        let close = scale / (2.0 * a0);
        let mut par = Vec::with_capacity(fine.len());
        for &y in fine {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            let mut close_count = 0;
            for (alpha, &x) in coarse.iter().enumerate() {
                let d = space.dist(y, x);
                if d < best_d {
                    best_d = d;
                    best = alpha;
                }
                if d < close {
                    close_count += 1;
                }
            }
            if close_count > 1 {
                return Err(Error::GeometryViolation {
                    level: k,
                    what: format!("point {y} has {close_count} coarse points within (2A0)^-1 δ^k"),
                });
            }
            if !(best_d < 2.0 * a0 * scale) {
                return Err(Error::GeometryViolation {
                    level: k,
                    what: format!("point {y} has no coarse point within 2A0 δ^k"),
                });
            }
            par.push(best);
        }
        let mut kids = vec![Vec::new(); coarse.len()];
        for (beta, &alpha) in par.iter().enumerate() {
            kids[alpha].push(beta);
        }
        let mut lab2 = vec![0; fine.len()];
        for list in &kids {
            for (rank, &beta) in list.iter().enumerate() {
                lab2[beta] = rank + 1;
            }
            m = m.max(list.len());
        }
        // neighbours: some children closer than (2A0)^-1 δ^k
        let mut nb = vec![Vec::new(); coarse.len()];
        for a in 0..coarse.len() {
            for b in (a + 1)..coarse.len() {
                let touching = kids[a].iter().any(|&g| {
                    kids[b]
                        .iter()
                        .any(|&e| space.dist(fine[g], fine[e]) < close)
                });
                if touching {
                    nb[a].push(b);
                    nb[b].push(a);
                }
            }
        }
        for list in &nb {
            l = l.max(list.len());
        }
        // greedy colouring in ascending id order
        let mut lab1 = vec![usize::MAX; coarse.len()];
        for a in 0..coarse.len() {
            let mut colour = 0;
            while nb[a].iter().any(|&b| lab1[b] == colour) {
                colour += 1;
            }
            lab1[a] = colour;
        }
        parents.push(par);
        children.push(kids);
        neighbours.push(nb);
        label1.push(lab1);
        label2.push(lab2);
    }
    Ok(ReferenceOrder {
        k_coarse: h.k_coarse(),
        parents,
        children,
        neighbours,
        label1,
        label2,
        l,
        m,
    })
}

/// For every level `k` of `h` and every point `x`, the index of the level-`k`
/// ancestor of `x` under the given parent maps (one map per step).
pub fn ancestor_table(h: &NetHierarchy, parents: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let levels = h.levels().len();
    let n = h.n();
    let mut table = vec![Vec::new(); levels];
    // the finest net is the whole space in id order
    table[levels - 1] = (0..n).collect();
    for s in (0..levels - 1).rev() {
        let next = &table[s + 1];
        table[s] = next.iter().map(|&beta| parents[s][beta]).collect();
    }
    table
}

/// Level-`target` ancestor of node `idx` at level `from` (`from >= target`).
pub fn ancestor_of(h: &NetHierarchy, parents: &[Vec<usize>], from: i32, idx: usize, target: i32) -> usize {
    let mut idx = idx;
    let mut k = from;
    while k > target {
        idx = parents[(k - 1 - h.k_coarse()) as usize][idx];
        k -= 1;
    }
    idx
}

/// Checks parent proximity, the neighbour distance bound and both labelings.
pub fn verify_order(space: &FiniteSpace, h: &NetHierarchy, order: &ReferenceOrder) -> Report {
    let mut report = Report::new();
    let a0 = h.a0();
    let mut prox = Vec::new();
    let mut nbd = Vec::new();
    let mut lab1 = Vec::new();
    let mut lab2 = Vec::new();
    let mut nb_margin = f64::INFINITY;
    for k in h.step_range() {
        let coarse = h.level(k);
        let fine = h.level(k + 1);
        let scale = h.scale(k);
        for (beta, &y) in fine.iter().enumerate() {
            let alpha = order.parent(k, beta);
            let d = space.dist(y, coarse[alpha]);
            if !(d < 2.0 * a0 * scale) {
                prox.push(format!("level {k}: child {y} at {d} from parent"));
            }
            for (gamma, &x) in coarse.iter().enumerate() {
                if gamma != alpha && space.dist(y, x) < scale / (2.0 * a0) {
                    prox.push(format!("level {k}: child {y} is close to non-parent {x}"));
                }
            }
        }
        let bound = 5.0 * a0 * a0 * a0 * scale;
        for alpha in 0..coarse.len() {
            for &b in order.neighbours(k, alpha) {
                let d = space.dist(coarse[alpha], coarse[b]);
                nb_margin = nb_margin.min(1.0 - d / bound);
                if !(d < bound) {
                    nbd.push(format!("level {k}: neighbours {} and {} at {d}", coarse[alpha], coarse[b]));
                }
                if order.label1(k, alpha) == order.label1(k, b) {
                    lab1.push(format!("level {k}: neighbours {} and {} share a label", coarse[alpha], coarse[b]));
                }
            }
            if order.label1(k, alpha) > order.l() {
                lab1.push(format!("level {k}: label of {} exceeds L", coarse[alpha]));
            }
            let kids = order.children(k, alpha);
            let mut seen: Vec<usize> = kids.iter().map(|&b| order.label2(k, b)).collect();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) || seen.iter().any(|&v| v == 0 || v > order.m()) {
                lab2.push(format!("level {k}: children of {} have clashing labels", coarse[alpha]));
            }
        }
    }
    report.exact(
        "order.parent_proximity",
        "parents lie within 2A0 δ^k and no other coarse point lies within (2A0)^-1 δ^k",
        prox,
    );
    report.exact("order.neighbour_distance", "neighbours are closer than 5A0^3 δ^k", nbd);
    if let Some(c) = report.checks.last_mut() {
        if c.passed && nb_margin.is_finite() {
            c.margin = nb_margin;
        }
    }
    report.exact("order.label1", "neighbours carry distinct first labels in 0..=L", lab1);
    report.exact("order.label2", "siblings carry distinct second labels in 1..=M", lab2);
    report
}
