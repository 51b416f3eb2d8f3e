//! Finite quasi-metric measure spaces, generators and structural constants.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand_core::SeedableRng;

use crate::error::{invalid, Error, Result};
use crate::mathf;

/// A finite set `{0, .., n-1}` with a quasi-distance and strictly positive
/// point masses.
///
/// Distances are stored as a dense symmetric matrix. Balls are open:
/// `B(x, r) = { y : d(x, y) < r }`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSpace {
    name: String,
    n: usize,
    coords: Option<Vec<Vec<f64>>>,
    dist: Vec<f64>,
    weights: Vec<f64>,
    // per point: (distance, id) sorted by distance, and prefix masses
    sorted: Vec<Vec<(f64, usize)>>,
    prefix_mass: Vec<Vec<f64>>,
}

impl FiniteSpace {
    /// Builds and validates a space from a row-major `n × n` distance matrix.
    pub fn from_matrix(
        name: impl Into<String>,
        n: usize,
        dist: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpace {
                invariant: "space must have at least one point",
                indices: Vec::new(),
            });
        }
        if dist.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: dist.len(),
            });
        }
        if weights.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: weights.len(),
            });
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidSpace {
                    invariant: "weight must be positive",
                    indices: vec![i],
                });
            }
        }
        for i in 0..n {
            for j in 0..n {
                let d = dist[i * n + j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidSpace {
                        invariant: "distances must be finite and nonnegative",
                        indices: vec![i, j],
                    });
                }
                if i == j && d != 0.0 {
                    return Err(Error::InvalidSpace {
                        invariant: "distance from a point to itself must be zero",
                        indices: vec![i],
                    });
                }
                if i != j && d == 0.0 {
                    return Err(Error::InvalidSpace {
                        invariant: "distinct points at distance zero",
                        indices: vec![i, j],
                    });
                }
                if d != dist[j * n + i] {
                    return Err(Error::InvalidSpace {
                        invariant: "distance matrix must be symmetric",
                        indices: vec![i, j],
                    });
                }
            }
        }
        let mut sorted = Vec::with_capacity(n);
        let mut prefix_mass = Vec::with_capacity(n);
        for x in 0..n {
            let mut row: Vec<(f64, usize)> = (0..n).map(|y| (dist[x * n + y], y)).collect();
            row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut acc = 0.0;
            let mut pm = Vec::with_capacity(n + 1);
            pm.push(0.0);
            for &(_, y) in &row {
                acc += weights[y];
                pm.push(acc);
            }
            sorted.push(row);
            prefix_mass.push(pm);
        }
        Ok(Self {
            name: name.into(),
            n,
            coords: None,
            dist,
            weights,
            sorted,
            prefix_mass,
        })
    }

    /// Builds a space whose distances are computed from coordinates.
    pub fn from_coords(
        name: impl Into<String>,
        coords: Vec<Vec<f64>>,
        weights: Vec<f64>,
        metric: impl Fn(&[f64], &[f64]) -> f64,
    ) -> Result<Self> {
        let n = coords.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = metric(&coords[i], &coords[j]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        let mut space = Self::from_matrix(name, n, dist, weights)?;
        space.coords = Some(coords);
        Ok(space)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    #[inline]
    pub fn dist(&self, x: usize, y: usize) -> f64 {
        self.dist[x * self.n + y]
    }

    /// Row-major distance matrix.
    pub fn distances(&self) -> &[f64] {
        &self.dist
    }

    #[inline]
    pub fn weight(&self, x: usize) -> f64 {
        self.weights[x]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.prefix_mass[0][self.n]
    }

    /// Open ball `{ y : d(x, y) < r }`, sorted by id.
    pub fn ball(&self, x: usize, r: f64) -> Result<Vec<usize>> {
        check_radius(r)?;
        let count = self.ball_len(x, r);
        let mut ids: Vec<usize> = self.sorted[x][..count].iter().map(|&(_, y)| y).collect();
        ids.sort_unstable();
        Ok(ids)
    }

    /// `V(x, r) = μ(B(x, r))`.
    pub fn volume(&self, x: usize, r: f64) -> Result<f64> {
        check_radius(r)?;
        Ok(self.volume_of_ball(x, r))
    }

    /// Ball mass without radius validation; returns 0 for `r <= 0`.
    #[inline]
    pub fn volume_of_ball(&self, x: usize, r: f64) -> f64 {
        self.prefix_mass[x][self.ball_len(x, r)]
    }

    /// Number of points in `B(x, r)`.
    #[inline]
    pub fn ball_len(&self, x: usize, r: f64) -> usize {
        self.sorted[x].partition_point(|&(d, _)| d < r)
    }

    /// Points ordered by distance from `x` (ties by id).
    pub fn by_distance(&self, x: usize) -> &[(f64, usize)] {
        &self.sorted[x]
    }

    pub fn diam(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest positive pairwise distance, `+inf` for a single point.
    pub fn min_sep(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                m = m.min(self.dist(i, j));
            }
        }
        m
    }

    /// Sorted distinct pairwise distances followed by one radius beyond the
    /// diameter. Every open ball of the space is `B(x, r)` for some `r` here.
    pub fn canonical_radii(&self) -> Vec<f64> {
        let mut radii: Vec<f64> = Vec::with_capacity(self.n * (self.n - 1) / 2 + 1);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                radii.push(self.dist(i, j));
            }
        }
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        let diam = radii.last().copied().unwrap_or(0.0);
        radii.push(if diam > 0.0 { 2.0 * diam } else { 1.0 });
        radii
    }

    /// `min_{y ∈ set} d(x, y)`, `+inf` when `set` is empty.
    pub fn dist_to_set(&self, x: usize, set: &[usize]) -> f64 {
        set.iter()
            .map(|&y| self.dist(x, y))
            .fold(f64::INFINITY, f64::min)
    }

    /// The same points and measure with distance `d^s`.
    pub fn powered(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(invalid("s", "exponent must be positive"));
        }
        let dist = self.dist.iter().map(|&d| mathf::powf(d, s)).collect();
        let mut out = Self::from_matrix(
            format!("{}^{}", self.name, s),
            self.n,
            dist,
            self.weights.clone(),
        )?;
        out.coords = self.coords.clone();
        Ok(out)
    }

    /// The same points and measure with distance `c · d`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(invalid("scale", "must be positive and finite"));
        }
        let dist = self.dist.iter().map(|&d| c * d).collect();
        Self::from_matrix(
            format!("{}*{}", self.name, c),
            self.n,
            dist,
            self.weights.clone(),
        )
    }

    /// Replaces the measure, keeping the distance.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        let mut out = Self::from_matrix(self.name.clone(), self.n, self.dist.clone(), weights)?;
        out.coords = self.coords.clone();
        Ok(out)
    }

    /// Weighted inner product `Σ f(x) g(x) μ({x})`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter()
            .zip(g)
            .zip(&self.weights)
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    /// `Σ f(x) μ({x})`.
    pub fn integral(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 {
        Ok(())
    } else {
        Err(invalid("r", "radius must be positive"))
    }
}

/// How point masses are assigned by the generators.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightRule {
    /// `μ({x}) = 1`.
    Counting,
    /// `μ({x}) = 1/n`.
    Uniform,
    /// Explicit per-point masses.
    List(Vec<f64>),
}

impl WeightRule {
    fn weights(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            WeightRule::Counting => Ok(vec![1.0; n]),
            WeightRule::Uniform => Ok(vec![1.0 / n as f64; n]),
            WeightRule::List(w) if w.len() == n => Ok(w.clone()),
            WeightRule::List(w) => Err(Error::DimensionMismatch {
                expected: n,
                got: w.len(),
            }),
        }
    }
}

impl FromStr for WeightRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "counting" => Ok(WeightRule::Counting),
            "uniform" => Ok(WeightRule::Uniform),
            other => {
                let list: core::result::Result<Vec<f64>, _> =
                    other.split(',').map(|t| t.trim().parse::<f64>()).collect();
                list.map(WeightRule::List)
                    .map_err(|_| invalid("weights", format!("unknown weight rule `{other}`")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridNorm {
    Max,
    Euclidean,
}

/// Descriptor for the built-in space generators.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceSpec {
    /// `{0..n-1}` with `|i-j|`, divided by `n` when `normalized`.
    Line { n: usize, normalized: bool },
    /// `Z/nZ` with circular distance divided by `n`.
    Cycle { n: usize },
    /// `{0..side-1}^dim` with the max or Euclidean norm.
    Grid {
        side: usize,
        dim: usize,
        norm: GridNorm,
    },
    /// `{0..n-1}` with `|i-j|^r`, `r >= 1`; quasi-triangle constant `2^(r-1)`.
    PowerLine { n: usize, r: f64 },
    /// Two unit-spaced clusters of `n/2` and `n - n/2` points with `gap`
    /// between the last point of the first and the first of the second.
    TwoCluster { n: usize, gap: f64 },
    /// Complete binary tree of the given depth with the path metric.
    Tree { depth: u32 },
    /// `n` uniform points in `[0,1)^dim`, Euclidean distance.
    RandomCloud { n: usize, dim: usize, seed: u64 },
}

impl SpaceSpec {
    pub fn generate(&self, weights: &WeightRule) -> Result<FiniteSpace> {
        let name = self.to_string();
        match *self {
            SpaceSpec::Line { n, normalized } => {
                check_n(n)?;
                let scale = if normalized { 1.0 / n as f64 } else { 1.0 };
                let coords = (0..n).map(|i| vec![i as f64]).collect();
                FiniteSpace::from_coords(name, coords, weights.weights(n)?, |a, b| {
                    scale * (a[0] - b[0]).abs()
                })
            }
            SpaceSpec::Cycle { n } => {
                check_n(n)?;
                let mut dist = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        let k = i.abs_diff(j);
                        dist[i * n + j] = k.min(n - k) as f64 / n as f64;
                    }
                }
                FiniteSpace::from_matrix(name, n, dist, weights.weights(n)?)
            }
            SpaceSpec::Grid { side, dim, norm } => {
                check_n(side)?;
                if dim == 0 {
                    return Err(invalid("dim", "must be at least 1"));
                }
                let total = side
                    .checked_pow(dim as u32)
                    .ok_or_else(|| invalid("side", "grid too large"))?;
                let coords: Vec<Vec<f64>> = (0..total)
                    .map(|mut idx| {
                        let mut c = vec![0.0; dim];
                        for slot in c.iter_mut() {
                            *slot = (idx % side) as f64;
                            idx /= side;
                        }
                        c
                    })
                    .collect();
                let w = weights.weights(total)?;
                match norm {
                    GridNorm::Max => FiniteSpace::from_coords(name, coords, w, |a, b| {
                        a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
                    }),
                    GridNorm::Euclidean => FiniteSpace::from_coords(name, coords, w, euclidean),
                }
            }
            SpaceSpec::PowerLine { n, r } => {
                check_n(n)?;
                if !(r >= 1.0) || !r.is_finite() {
                    return Err(invalid("r", "power must satisfy r >= 1"));
                }
                let coords = (0..n).map(|i| vec![i as f64]).collect();
                FiniteSpace::from_coords(name, coords, weights.weights(n)?, |a, b| {
                    mathf::powf((a[0] - b[0]).abs(), r)
                })
            }
            SpaceSpec::TwoCluster { n, gap } => {
                check_n(n)?;
                if !(gap > 0.0) || !gap.is_finite() {
                    return Err(invalid("gap", "must be positive and finite"));
                }
                let half = n / 2;
                let coords = (0..n)
                    .map(|i| {
                        if i < half {
                            vec![i as f64]
                        } else {
                            vec![half as f64 - 1.0 + gap + (i - half) as f64]
                        }
                    })
                    .collect();
                FiniteSpace::from_coords(name, coords, weights.weights(n)?, |a, b| {
                    (a[0] - b[0]).abs()
                })
            }
            SpaceSpec::Tree { depth } => {
                if depth > 12 {
                    return Err(invalid("depth", "at most 12"));
                }
                let n = (1usize << (depth + 1)) - 1;
                let mut dist = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        dist[i * n + j] = tree_distance(i, j) as f64;
                    }
                }
                FiniteSpace::from_matrix(name, n, dist, weights.weights(n)?)
            }
            SpaceSpec::RandomCloud { n, dim, seed } => {
                check_n(n)?;
                if dim == 0 {
                    return Err(invalid("dim", "must be at least 1"));
                }
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let coords = (0..n)
                    .map(|_| (0..dim).map(|_| crate::rng::unit_f64(&mut rng)).collect())
                    .collect();
                FiniteSpace::from_coords(name, coords, weights.weights(n)?, euclidean)
            }
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n >= 1 {
        Ok(())
    } else {
        Err(invalid("n", "must be at least 1"))
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    mathf::sqrt(a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum())
}

// heap-indexed nodes: parent of i is (i-1)/2
fn tree_distance(mut a: usize, mut b: usize) -> usize {
    let depth = |i: usize| (usize::BITS - (i + 1).leading_zeros() - 1) as usize;
    let mut steps = 0;
    while depth(a) > depth(b) {
        a = (a - 1) / 2;
        steps += 1;
    }
    while depth(b) > depth(a) {
        b = (b - 1) / 2;
        steps += 1;
    }
    while a != b {
        a = (a - 1) / 2;
        b = (b - 1) / 2;
        steps += 2;
    }
    steps
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceSpec::Line { n, normalized: false } => write!(f, "line({n})"),
            SpaceSpec::Line { n, normalized: true } => write!(f, "line({n},normalized)"),
            SpaceSpec::Cycle { n } => write!(f, "cycle({n})"),
            SpaceSpec::Grid { side, dim, norm } => {
                let norm = match norm {
                    GridNorm::Max => "max",
                    GridNorm::Euclidean => "l2",
                };
                write!(f, "grid({side},{dim},{norm})")
            }
            SpaceSpec::PowerLine { n, r } => write!(f, "power_line({n},{r})"),
            SpaceSpec::TwoCluster { n, gap } => write!(f, "two_cluster({n},{gap})"),
            SpaceSpec::Tree { depth } => write!(f, "tree({depth})"),
            SpaceSpec::RandomCloud { n, dim, seed } => write!(f, "random_cloud({n},{dim},{seed})"),
        }
    }
}

impl FromStr for SpaceSpec {
    type Err = Error;

    /// Parses `line(8)`, `line(8,normalized)`, `cycle(16)`, `grid(4,2,max)`,
    /// `power_line(129,2)`, `two_cluster(4,100)`, `tree(3)`,
    /// `random_cloud(32,2,7)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || invalid("space", format!("cannot parse generator `{s}`"));
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let head = &s[..open];
        let args: Vec<&str> = s[open + 1..s.len() - 1].split(',').map(str::trim).collect();
        let int = |i: usize| -> Result<usize> {
            args.get(i).and_then(|a| a.parse().ok()).ok_or_else(bad)
        };
        let real = |i: usize| -> Result<f64> {
            args.get(i).and_then(|a| a.parse().ok()).ok_or_else(bad)
        };
        let spec = match (head, args.len()) {
            ("line", 1) => SpaceSpec::Line { n: int(0)?, normalized: false },
            ("line", 2) if args[1] == "normalized" => SpaceSpec::Line { n: int(0)?, normalized: true },
            ("cycle", 1) => SpaceSpec::Cycle { n: int(0)? },
            ("grid", 2) | ("grid", 3) => {
                let norm = match args.get(2).copied().unwrap_or("max") {
                    "max" | "linf" => GridNorm::Max,
                    "l2" | "euclidean" => GridNorm::Euclidean,
                    _ => return Err(bad()),
                };
                SpaceSpec::Grid { side: int(0)?, dim: int(1)?, norm }
            }
            ("power_line", 2) => SpaceSpec::PowerLine { n: int(0)?, r: real(1)? },
            ("two_cluster", 2) => SpaceSpec::TwoCluster { n: int(0)?, gap: real(1)? },
            ("tree", 1) => SpaceSpec::Tree { depth: int(0)? as u32 },
            ("random_cloud", 3) => SpaceSpec::RandomCloud {
                n: int(0)?,
                dim: int(1)?,
                seed: args[2].parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        Ok(spec)
    }
}

/// `line(4)` with counting measure.
pub fn fixture_a() -> FiniteSpace {
    SpaceSpec::Line { n: 4, normalized: false }
        .generate(&WeightRule::Counting)
        .expect("fixture A is valid")
}

/// `cycle(16)` (distances in units of 1/16) with uniform weights 1/16.
pub fn fixture_b() -> FiniteSpace {
    SpaceSpec::Cycle { n: 16 }
        .generate(&WeightRule::Uniform)
        .expect("fixture B is valid")
}

/// Structural constants of a finite space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceConstants {
    /// Smallest `A0 >= 1` with `d(x,y) <= A0 (d(x,z) + d(z,y))`.
    pub a0: f64,
    /// An ordered triple `(x, y, z)` attaining `a0` when `a0 > 1`.
    pub a0_witness: Option<(usize, usize, usize)>,
    /// Largest number of points of a ball `B(x, r)` that are pairwise more
    /// than `r/2` apart.
    pub n_geo: usize,
    /// `false` when `n_geo` is only a greedy lower bound for some ball.
    pub n_geo_exact: bool,
    /// `C_μ(2)`.
    pub cmu2: f64,
    /// `C_μ(3 A0²)`, the constant behind the empty-annulus dichotomy.
    pub cmu_annulus: f64,
    pub diam: f64,
    pub min_sep: f64,
}

/// Radius limit for the exact packing search; larger balls use greedy.
const EXACT_PACKING_MAX_POINTS: usize = 2048;
const EXACT_PACKING_NODE_BUDGET: usize = 200_000;

pub fn compute_constants(space: &FiniteSpace) -> SpaceConstants {
    let (a0, a0_witness) = quasi_triangle_constant(space);
    let (n_geo, n_geo_exact) = geometric_doubling(space);
    SpaceConstants {
        a0,
        a0_witness,
        n_geo,
        n_geo_exact,
        cmu2: doubling_constant(space, 2.0),
        cmu_annulus: doubling_constant(space, 3.0 * a0 * a0),
        diam: space.diam(),
        min_sep: space.min_sep(),
    }
}

/// Exact scan over ordered triples with `z ∉ {x, y}`, clamped below at 1.
pub fn quasi_triangle_constant(space: &FiniteSpace) -> (f64, Option<(usize, usize, usize)>) {
    let n = space.n();
    let mut best = 1.0;
    let mut witness = None;
    for x in 0..n {
        for y in (x + 1)..n {
            let dxy = space.dist(x, y);
            for z in 0..n {
                if z == x || z == y {
                    continue;
                }
                let ratio = dxy / (space.dist(x, z) + space.dist(z, y));
                if ratio > best {
                    best = ratio;
                    witness = Some((x, y, z));
                }
            }
        }
    }
    (best, witness)
}

/// `C_μ(t) = max_{x, r} V(x, t r) / V(x, r)` over canonical radii.
pub fn doubling_constant(space: &FiniteSpace, t: f64) -> f64 {
    let radii = space.canonical_radii();
    let mut best: f64 = 1.0;
    for x in 0..space.n() {
        for &r in &radii {
            let ratio = space.volume_of_ball(x, t * r) / space.volume_of_ball(x, r);
            best = best.max(ratio);
        }
    }
    best
}

/// Geometric doubling count over all canonical balls.
pub fn geometric_doubling(space: &FiniteSpace) -> (usize, bool) {
    let radii = space.canonical_radii();
    let mut best = 1;
    let mut exact = true;
    for x in 0..space.n() {
        for &r in &radii {
            let ball = space.ball(x, r).expect("canonical radii are positive");
            if ball.len() <= best {
                continue;
            }
            let (count, was_exact) = max_separated_subset(space, &ball, r / 2.0);
            exact &= was_exact;
            best = best.max(count);
        }
    }
    (best, exact)
}

/// Largest subset of `points` with pairwise distances `> sep`.
///
/// Returns `(size, exact)`; falls back to the greedy lower bound when the
/// branch-and-bound search exceeds its node budget.
pub fn max_separated_subset(space: &FiniteSpace, points: &[usize], sep: f64) -> (usize, bool) {
    let m = points.len();
    let greedy = {
        let mut chosen: Vec<usize> = Vec::new();
        for &p in points {
            if chosen.iter().all(|&q| space.dist(p, q) > sep) {
                chosen.push(p);
            }
        }
        chosen.len()
    };
    if m > EXACT_PACKING_MAX_POINTS {
        return (greedy, false);
    }
    // conflict graph: edge when two points are too close
    let adj: Vec<Vec<usize>> = (0..m)
        .map(|i| {
            (0..m)
                .filter(|&j| j != i && space.dist(points[i], points[j]) <= sep)
                .collect()
        })
        .collect();
    let mut search = IndependentSetSearch {
        adj: &adj,
        best: greedy,
        nodes: 0,
        budget: EXACT_PACKING_NODE_BUDGET,
    };
    let mut alive = vec![true; m];
    search.run(&mut alive, m, 0);
    let exact = search.nodes <= search.budget;
    (search.best, exact)
}

struct IndependentSetSearch<'a> {
    adj: &'a [Vec<usize>],
    best: usize,
    nodes: usize,
    budget: usize,
}

impl IndependentSetSearch<'_> {
    fn run(&mut self, alive: &mut [bool], remaining: usize, taken: usize) {
        self.nodes += 1;
        if self.nodes > self.budget {
            return;
        }
        if taken + remaining <= self.best {
            return;
        }
        // pick the live vertex of maximum live degree
        let mut pick = None;
        let mut pick_deg = 0;
        for v in 0..alive.len() {
            if !alive[v] {
                continue;
            }
            let deg = self.adj[v].iter().filter(|&&u| alive[u]).count();
            if pick.is_none() || deg > pick_deg {
                pick = Some(v);
                pick_deg = deg;
            }
        }
        let Some(v) = pick else {
            self.best = self.best.max(taken);
            return;
        };
        if pick_deg == 0 {
            // all remaining vertices are independent
            self.best = self.best.max(taken + remaining);
            return;
        }
        // branch 1: take v, drop its neighbours
        let mut removed = vec![v];
        alive[v] = false;
        for &u in &self.adj[v] {
            if alive[u] {
                alive[u] = false;
                removed.push(u);
            }
        }
        self.run(alive, remaining - removed.len(), taken + 1);
        for &u in &removed {
            alive[u] = true;
        }
        // branch 2: skip v
        alive[v] = false;
        self.run(alive, remaining - 1, taken);
        alive[v] = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fixture_a_round_trip() {
        let a = fixture_a();
        assert_eq!(a.n(), 4);
        assert_eq!(a.dist(0, 3), 3.0);
        assert_eq!(a.weights(), &[1.0; 4]);
    }

    #[test]
    fn zero_weight_rejected() {
        let d = fixture_a().distances().to_vec();
        let err = FiniteSpace::from_matrix("w", 4, d, vec![1.0, 1.0, 0.0, 1.0]).unwrap_err();
        assert_eq!(
            err,
            Error::InvalidSpace {
                invariant: "weight must be positive",
                indices: vec![2]
            }
        );
    }

    #[test]
    fn coincident_points_rejected() {
        let mut d = fixture_a().distances().to_vec();
        d[4 + 2] = 0.0;
        d[2 * 4 + 1] = 0.0;
        let err = FiniteSpace::from_matrix("z", 4, d, vec![1.0; 4]).unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidSpace { invariant: "distinct points at distance zero", ref indices } if indices == &[1, 2]
        ));
    }

    #[test]
    fn asymmetric_rejected() {
        let mut d = fixture_a().distances().to_vec();
        d[1] = 1.5;
        let err = FiniteSpace::from_matrix("s", 4, d, vec![1.0; 4]).unwrap_err();
        assert!(matches!(err, Error::InvalidSpace { invariant: "distance matrix must be symmetric", .. }));
    }

    #[test]
    fn fixture_b_extent() {
        let b = fixture_b();
        assert_eq!(b.diam(), 0.5);
        assert_eq!(b.min_sep(), 1.0 / 16.0);
        assert_abs_diff_eq!(b.total_mass(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn open_balls() {
        let a = fixture_a();
        assert_eq!(a.ball(1, 1.0).unwrap(), vec![1]);
        assert_eq!(a.ball(1, 1.5).unwrap(), vec![0, 1, 2]);
        assert_eq!(a.volume(1, 1.5).unwrap(), 3.0);
        assert!(a.ball(1, 0.0).is_err());
        let b = fixture_b();
        assert_abs_diff_eq!(b.volume(0, 5.0 / 16.0).unwrap(), 9.0 / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn quasi_triangle_constants() {
        assert_eq!(compute_constants(&fixture_a()).a0, 1.0);
        let p = SpaceSpec::PowerLine { n: 129, r: 2.0 }
            .generate(&WeightRule::Counting)
            .unwrap();
        let (a0, w) = quasi_triangle_constant(&p);
        assert_eq!(a0, 2.0);
        let (x, y, z) = w.unwrap();
        assert_eq!(p.dist(x, y), 2.0 * (p.dist(x, z) + p.dist(z, y)));
    }

    #[test]
    fn fixture_b_doubling_by_enumeration() {
        // every ball of the 16-cycle is an arc of 2j-1 points (j <= 8) or the
        // whole cycle; doubling the radius maps 2j-1 points to min(4j-1, 16)
        let b = fixture_b();
        let mut expect: f64 = 1.0;
        for j in 1..=8usize {
            let small = (2 * j - 1) as f64;
            let big = (4 * j - 1).min(16) as f64;
            expect = expect.max(big / small);
        }
        assert_eq!(expect, 3.0);
        assert_abs_diff_eq!(doubling_constant(&b, 2.0), expect, epsilon = 1e-12);
    }

    #[test]
    fn single_point() {
        let s = SpaceSpec::Line { n: 1, normalized: false }
            .generate(&WeightRule::Counting)
            .unwrap();
        let c = compute_constants(&s);
        assert_eq!(c.a0, 1.0);
        assert_eq!(c.n_geo, 1);
    }

    #[test]
    fn generator_parsing() {
        for text in [
            "line(8)",
            "line(8,normalized)",
            "cycle(16)",
            "grid(3,2,max)",
            "grid(3,2,l2)",
            "power_line(9,2)",
            "two_cluster(4,100)",
            "tree(2)",
            "random_cloud(10,2,7)",
        ] {
            let spec: SpaceSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        assert!("hexagon(3)".parse::<SpaceSpec>().is_err());
        assert!(SpaceSpec::PowerLine { n: 4, r: 0.5 }
            .generate(&WeightRule::Counting)
            .is_err());
        assert!(SpaceSpec::Line { n: 0, normalized: false }
            .generate(&WeightRule::Counting)
            .is_err());
    }

    #[test]
    fn tree_metric() {
        let t = SpaceSpec::Tree { depth: 2 }.generate(&WeightRule::Counting).unwrap();
        assert_eq!(t.n(), 7);
        assert_eq!(t.dist(3, 4), 2.0);
        assert_eq!(t.dist(3, 6), 4.0);
        assert_eq!(t.dist(0, 6), 2.0);
        assert_eq!(compute_constants(&t).a0, 1.0);
    }

    #[test]
    fn two_cluster_layout() {
        let s = SpaceSpec::TwoCluster { n: 4, gap: 100.0 }
            .generate(&WeightRule::Counting)
            .unwrap();
        assert_eq!(s.dist(0, 1), 1.0);
        assert_eq!(s.dist(1, 2), 100.0);
        assert_eq!(s.dist(2, 3), 1.0);
    }

    #[test]
    fn packing_on_cycle() {
        // half-radius separation on the 16-cycle: at most 3 points fit in an
        // arc of radius r pairwise more than r/2 apart
        let b = fixture_b();
        let (n_geo, exact) = geometric_doubling(&b);
        assert!(exact);
        assert!(n_geo >= 3);
        let (count, _) = max_separated_subset(&b, &(0..16).collect::<Vec<_>>(), 0.25);
        // points pairwise > 4/16 apart on a 16-cycle: 3 (spacing 5,5,6)
        assert_eq!(count, 3);
    }
}
