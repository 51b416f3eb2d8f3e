//! BMO and Carleson norms on a finite space and the isomorphism between
//! them given by the wavelet coefficients.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mathf;
use crate::nets::NetHierarchy;
use crate::order::{ancestor_table, ReferenceOrder};
use crate::randomized::{sample_omega, DyadicSampler};
use crate::report::Report;
use crate::rng::{aux_stream, symmetric_f64};
use crate::space::FiniteSpace;
use crate::wavelets::{Member, WaveletBasis};

/// Wavelet coefficients `b^k_α` grouped by level, `α` indexing `𝒴^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    k_coarse: i32,
    values: Vec<Vec<f64>>,
}

impl CoefficientField {
    pub fn zeros(basis: &WaveletBasis) -> Self {
        Self {
            k_coarse: basis.k_coarse(),
            values: basis.levels().iter().map(|l| vec![0.0; l.centers.len()]).collect(),
        }
    }

    /// Field from the wavelet entries of a full coefficient vector (coarse
    /// entries first, as produced by [`WaveletBasis::analyze`]).
    pub fn from_coefficients(basis: &WaveletBasis, coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: coeffs.len(),
            });
        }
        let mut field = Self::zeros(basis);
        for (i, m) in basis.members().iter().enumerate() {
            if let Member::Wavelet { level, beta, .. } = *m {
                field.values[(level - field.k_coarse) as usize][beta] = coeffs[i];
            }
        }
        Ok(field)
    }

    /// `⟨b, ψ^k_α⟩` for every wavelet.
    pub fn of_function(basis: &WaveletBasis, b: &[f64]) -> Result<Self> {
        Self::from_coefficients(basis, &basis.analyze(b)?)
    }

    pub fn level(&self, k: i32) -> &[f64] {
        &self.values[(k - self.k_coarse) as usize]
    }

    pub fn get(&self, k: i32, alpha: usize) -> f64 {
        self.values[(k - self.k_coarse) as usize][alpha]
    }

    pub fn set(&mut self, k: i32, alpha: usize, v: f64) {
        self.values[(k - self.k_coarse) as usize][alpha] = v;
    }

    /// `(k, α, value)` in level order.
    pub fn iter(&self) -> impl Iterator<Item = (i32, usize, f64)> + '_ {
        self.values.iter().enumerate().flat_map(move |(s, row)| {
            row.iter()
                .enumerate()
                .map(move |(a, &v)| (self.k_coarse + s as i32, a, v))
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            k_coarse: self.k_coarse,
            values: self.values.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect(),
        }
    }
}

/// An open ball `B(x, r)` given by its centre, radius and member count in
/// distance order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallRef {
    pub x: usize,
    pub r: f64,
    pub len: usize,
}

/// Every distinct open ball once per centre, with the largest radius among
/// the canonical ones that produce it.
pub fn distinct_balls(space: &FiniteSpace) -> Vec<BallRef> {
    let far = if space.diam() > 0.0 { 2.0 * space.diam() } else { 1.0 };
    let mut out = Vec::new();
    for x in 0..space.n() {
        let sorted = space.by_distance(x);
        for (i, &(d, _)) in sorted.iter().enumerate().skip(1) {
            if d > sorted[i - 1].0 {
                out.push(BallRef { x, r: d, len: i });
            }
        }
        out.push(BallRef {
            x,
            r: far,
            len: sorted.len(),
        });
    }
    out
}

fn ball_members(space: &FiniteSpace, ball: BallRef) -> impl Iterator<Item = usize> + '_ {
    space.by_distance(ball.x)[..ball.len].iter().map(|&(_, y)| y)
}

/// `b_B`, the `μ`-average of `b` on the ball.
pub fn ball_average(space: &FiniteSpace, b: &[f64], ball: BallRef) -> f64 {
    let (mut s, mut m) = (0.0, 0.0);
    for y in ball_members(space, ball) {
        s += b[y] * space.weight(y);
        m += space.weight(y);
    }
    s / m
}

/// Minimizer of `Σ μ(y) |b(y) − c|` over the ball.
fn weighted_median(space: &FiniteSpace, b: &[f64], ball: BallRef) -> f64 {
    let mut vals: Vec<(f64, f64)> = ball_members(space, ball).map(|y| (b[y], space.weight(y))).collect();
    vals.sort_by(|p, q| p.0.total_cmp(&q.0));
    let total: f64 = vals.iter().map(|v| v.1).sum();
    let mut acc = 0.0;
    for &(v, w) in &vals {
        acc += w;
        if 2.0 * acc >= total {
            return v;
        }
    }
    vals.last().map_or(0.0, |v| v.0)
}

fn oscillation(space: &FiniteSpace, b: &[f64], ball: BallRef, c: f64) -> f64 {
    let (mut s, mut m) = (0.0, 0.0);
    for y in ball_members(space, ball) {
        s += (b[y] - c).abs() * space.weight(y);
        m += space.weight(y);
    }
    s / m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmoNorm {
    /// `sup_B μ(B)⁻¹ ∫_B |b − b_B| dμ`.
    pub value: f64,
    /// Same supremum with the optimal constant (weighted median).
    pub median: f64,
    pub witness: BallRef,
}

pub fn bmo_norm(space: &FiniteSpace, b: &[f64]) -> Result<BmoNorm> {
    if b.len() != space.n() {
        return Err(Error::DimensionMismatch {
            expected: space.n(),
            got: b.len(),
        });
    }
    let balls = distinct_balls(space);
    let mut best = BmoNorm {
        value: 0.0,
        median: 0.0,
        witness: balls[0],
    };
    for &ball in &balls {
        let v = oscillation(space, b, ball, ball_average(space, b, ball));
        if v > best.value {
            best.value = v;
            best.witness = ball;
        }
        best.median = best.median.max(oscillation(space, b, ball, weighted_median(space, b, ball)));
    }
    Ok(best)
}

/// Smallest `C` with `|b_{B1} − b_{B2}| ≤ C ‖b‖ (1 + ln((r1+r2+d)/min(r1,r2)))`
/// over all pairs of distinct balls; 0 when `‖b‖ = 0`.
pub fn average_drift_constant(space: &FiniteSpace, b: &[f64], norm: f64) -> f64 {
    if norm == 0.0 {
        return 0.0;
    }
    let balls = distinct_balls(space);
    let avg: Vec<f64> = balls.iter().map(|&ball| ball_average(space, b, ball)).collect();
    let mut worst: f64 = 0.0;
    for (i, b1) in balls.iter().enumerate() {
        for (j, b2) in balls.iter().enumerate().skip(i + 1) {
            let d = space.dist(b1.x, b2.x);
            let scale = 1.0 + mathf::ln((b1.r + b2.r + d) / b1.r.min(b2.r));
            worst = worst.max((avg[i] - avg[j]).abs() / (norm * scale));
        }
    }
    worst
}

/// `μ(Q^ℓ_β)` for every level and node, cubes being preimages of ancestor
/// chains under `parents`.
pub fn cube_masses(space: &FiniteSpace, h: &NetHierarchy, parents: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let table = ancestor_table(h, parents);
    table
        .iter()
        .enumerate()
        .map(|(s, row)| {
            let mut m = vec![0.0; h.levels()[s].len()];
            for (x, &a) in row.iter().enumerate() {
                m[a] += space.weight(x);
            }
            m
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlesonNorm {
    pub value: f64,
    /// `(ℓ, β)` attaining the supremum.
    pub witness: (i32, usize),
}

/// `sup_{ℓ,β} ( μ(Q^ℓ_β)⁻¹ Σ_{(k+1,α) ≤ (ℓ,β)} |b^k_α|² )^{1/2}`, the order
/// being reflexive.
pub fn carleson_norm(
    space: &FiniteSpace,
    h: &NetHierarchy,
    basis: &WaveletBasis,
    parents: &[Vec<usize>],
    field: &CoefficientField,
) -> CarlesonNorm {
    let masses = cube_masses(space, h, parents);
    let kc = h.k_coarse();
    let mut acc: Vec<Vec<f64>> = masses.iter().map(|m| vec![0.0; m.len()]).collect();
    for (k, alpha, v) in field.iter() {
        if v == 0.0 {
            continue;
        }
        let y = basis.level(k).centers[alpha];
        let mut idx = h.index_of(k + 1, y).expect("wavelet centre lies in the next net");
        let mut l = k + 1;
        loop {
            acc[(l - kc) as usize][idx] += v * v;
            if l == kc {
                break;
            }
            idx = parents[(l - 1 - kc) as usize][idx];
            l -= 1;
        }
    }
    let mut best = CarlesonNorm {
        value: 0.0,
        witness: (kc, 0),
    };
    for (s, row) in acc.iter().enumerate() {
        for (beta, &a) in row.iter().enumerate() {
            let v = mathf::sqrt(a / masses[s][beta]);
            if v > best.value {
                best = CarlesonNorm {
                    value: v,
                    witness: (kc + s as i32, beta),
                };
            }
        }
    }
    best
}

/// Range over `samples` draws of `ω` of the Carleson norm with `ω`-cubes
/// divided by the norm with reference cubes.
#[allow(clippy::too_many_arguments)]
pub fn omega_carleson_ratios(
    space: &FiniteSpace,
    h: &NetHierarchy,
    basis: &WaveletBasis,
    order: &ReferenceOrder,
    sampler: &DyadicSampler,
    field: &CoefficientField,
    samples: u64,
    seed: u64,
) -> (f64, f64) {
    let reference = carleson_norm(space, h, basis, order.parents(), field).value;
    let mut range = (f64::INFINITY, 0.0f64);
    if reference == 0.0 {
        return (1.0, 1.0);
    }
    for s in 0..samples {
        let sys = sampler.system(h, &sample_omega(order, seed, s));
        let r = carleson_norm(space, h, basis, sys.parents(), field).value / reference;
        range = (range.0.min(r), range.1.max(r));
    }
    range
}

/// `Σ b^k_α (ψ^k_α − 1_{δ^k > r0} ψ^k_α(x0))`.
pub fn bmo_from_carleson(basis: &WaveletBasis, field: &CoefficientField, x0: usize, r0: f64) -> Vec<f64> {
    let n = basis.n();
    let mut out = vec![0.0; n];
    for (i, m) in basis.members().iter().enumerate() {
        let Member::Wavelet { level, beta, .. } = *m else {
            continue;
        };
        let c = field.get(level, beta);
        if c == 0.0 {
            continue;
        }
        let row = basis.matrix().row(i);
        let shift = if mathf::powi(basis.delta(), level) > r0 { row[x0] } else { 0.0 };
        for (x, v) in out.iter_mut().enumerate() {
            *v += c * (row[x] - shift);
        }
    }
    out
}

/// `max − min` of `f − g`: zero iff they differ by a constant.
pub fn constant_offset_spread(f: &[f64], g: &[f64]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (a, b) in f.iter().zip(g) {
        lo = lo.min(a - b);
        hi = hi.max(a - b);
    }
    if lo.is_finite() { hi - lo } else { 0.0 }
}

/// Range of `‖coeffs‖_Car / ‖b‖_BMO` over random functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRatios {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

pub fn norm_ratios(
    space: &FiniteSpace,
    h: &NetHierarchy,
    basis: &WaveletBasis,
    parents: &[Vec<usize>],
    samples: usize,
    seed: u64,
) -> Result<NormRatios> {
    let mut rng = aux_stream(seed, 0x626d_6f72);
    let mut out = NormRatios {
        min: f64::INFINITY,
        max: 0.0,
        samples,
    };
    for _ in 0..samples {
        let b: Vec<f64> = (0..space.n()).map(|_| symmetric_f64(&mut rng)).collect();
        let field = CoefficientField::of_function(basis, &b)?;
        let ratio = carleson_norm(space, h, basis, parents, &field).value / bmo_norm(space, &b)?.value;
        out.min = out.min.min(ratio);
        out.max = out.max.max(ratio);
    }
    Ok(out)
}

/// Round trip, renormalization independence, uniqueness and the BMO
/// comparisons for `samples` random functions.
pub fn verify_bmo_carleson(
    space: &FiniteSpace,
    h: &NetHierarchy,
    basis: &WaveletBasis,
    parents: &[Vec<usize>],
    samples: usize,
    seed: u64,
) -> Result<Report> {
    let n = space.n();
    let mut rng = aux_stream(seed, 0x7274_7270);
    let mut round: f64 = 0.0;
    let mut shift: f64 = 0.0;
    let mut unique: f64 = 0.0;
    let mut median_low: f64 = f64::INFINITY;
    let mut median_high: f64 = f64::INFINITY;
    let mut homog: f64 = 0.0;
    let mut drift: f64 = 0.0;
    let r_far = 2.0 * space.diam().max(1.0);
    for _ in 0..samples {
        let b: Vec<f64> = (0..n).map(|_| symmetric_f64(&mut rng)).collect();
        let field = CoefficientField::of_function(basis, &b)?;
        let x0 = (crate::rng::below(&mut rng, n as u64)) as usize;
        let r0 = mathf::powi(basis.delta(), basis.k_coarse() + (n as i32 % 3));
        let back = bmo_from_carleson(basis, &field, x0, r0);
        round = round.max(constant_offset_spread(&back, &b));
        let other = bmo_from_carleson(basis, &field, 0, r_far);
        shift = shift.max(constant_offset_spread(&back, &other));

        let rest: Vec<f64> = b.iter().zip(&other).map(|(a, w)| a - w).collect();
        let mean = space.integral(&rest) / space.total_mass();
        unique = unique.max(rest.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max));

        let norm = bmo_norm(space, &b)?;
        median_low = median_low.min(norm.value - norm.median);
        median_high = median_high.min(2.0 * norm.median - norm.value);
        let scaled: Vec<f64> = b.iter().map(|v| -2.5 * v).collect();
        homog = homog.max((bmo_norm(space, &scaled)?.value - 2.5 * norm.value).abs() / norm.value.max(1e-300));
        drift = drift.max(average_drift_constant(space, &b, norm.value));
    }
    let mut report = Report::new();
    report.within("bmo.round_trip", "coefficients to function recovers b modulo constants", 1e-8, round);
    report.within(
        "bmo.renormalization",
        "reconstructions for two base points differ by a constant",
        1e-8,
        shift,
    );
    report.within(
        "bmo.uniqueness",
        "b minus its wavelet part is constant",
        1e-8,
        unique,
    );
    let tol = 1e-12;
    report.margin(
        "bmo.median_lower",
        "median-based oscillation is at most the average-based one",
        tol,
        median_low + tol,
        "",
    );
    report.margin(
        "bmo.median_upper",
        "average-based oscillation is at most twice the median-based one",
        tol,
        median_high + tol,
        "",
    );
    report.within("bmo.homogeneity", "norm of λb is |λ| times norm of b", 1e-12, homog);
    report.margin(
        "bmo.average_drift",
        "ball averages drift at most logarithmically",
        0.0,
        if drift.is_finite() { 1.0 } else { -1.0 },
        alloc::format!("empirical constant {drift:.4}"),
    );
    let zero = CoefficientField::zeros(basis);
    let z = carleson_norm(space, h, basis, parents, &zero).value;
    report.within("carleson.zero", "zero coefficients have zero norm", 0.0, z);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::Mode;
    use crate::pipeline::Pipeline;
    use crate::space::{fixture_b, SpaceSpec, WeightRule};
    use approx::assert_abs_diff_eq;

    fn cycle(n: usize) -> Pipeline {
        let space = SpaceSpec::Cycle { n }.generate(&WeightRule::Uniform).unwrap();
        Pipeline::build(space, 0.125, Mode::Relaxed).unwrap()
    }

    /// Plain scan over `space.ball` for every canonical radius.
    fn bmo_oracle(space: &FiniteSpace, b: &[f64]) -> f64 {
        let mut best: f64 = 0.0;
        for x in 0..space.n() {
            for r in space.canonical_radii() {
                let ball = space.ball(x, r).unwrap();
                let m: f64 = ball.iter().map(|&y| space.weight(y)).sum();
                let avg: f64 = ball.iter().map(|&y| b[y] * space.weight(y)).sum::<f64>() / m;
                let osc: f64 = ball.iter().map(|&y| (b[y] - avg).abs() * space.weight(y)).sum::<f64>() / m;
                best = best.max(osc);
            }
        }
        best
    }

    #[test]
    fn bmo_examples() {
        let space = fixture_b();
        assert_eq!(bmo_norm(&space, &[3.0; 16]).unwrap().value, 0.0);
        let ind: Vec<f64> = (0..16).map(|i| f64::from(u8::from(i < 8))).collect();
        let v = bmo_norm(&space, &ind).unwrap();
        assert_abs_diff_eq!(v.value, bmo_oracle(&space, &ind), epsilon = 1e-15);
        // a ball split evenly between the two halves gives 1/2
        assert_abs_diff_eq!(v.value, 0.5, epsilon = 1e-15);
        assert!(v.median <= v.value && v.value <= 2.0 * v.median);
    }

    #[test]
    fn bmo_matches_canonical_scan() {
        let p = cycle(16);
        let mut rng = aux_stream(9, 1);
        let b: Vec<f64> = (0..16).map(|_| symmetric_f64(&mut rng)).collect();
        assert_abs_diff_eq!(bmo_norm(&p.space, &b).unwrap().value, bmo_oracle(&p.space, &b), epsilon = 1e-14);
    }

    #[test]
    fn carleson_examples() {
        let p = Pipeline::build(fixture_b(), 0.25, Mode::Relaxed).unwrap();
        let parents = p.order.parents();
        let zero = CoefficientField::zeros(&p.basis);
        assert_eq!(carleson_norm(&p.space, &p.h, &p.basis, parents, &zero).value, 0.0);
        let constant = CoefficientField::of_function(&p.basis, &[2.0; 16]).unwrap();
        assert!(carleson_norm(&p.space, &p.h, &p.basis, parents, &constant).value < 1e-12);

        // single unit coefficient: the smallest ancestor cube is the node's own
        let masses = cube_masses(&p.space, &p.h, parents);
        for (k, alpha, _) in zero.iter() {
            let mut f = zero.clone();
            f.set(k, alpha, 1.0);
            let y = p.basis.level(k).centers[alpha];
            let idx = p.h.index_of(k + 1, y).unwrap();
            let own = masses[(k + 1 - p.h.k_coarse()) as usize][idx];
            let v = carleson_norm(&p.space, &p.h, &p.basis, parents, &f).value;
            assert_abs_diff_eq!(v, 1.0 / own.sqrt(), epsilon = 1e-14);
        }
    }

    #[test]
    fn roundtrip_on_fixture_b_and_cycles() {
        let p = Pipeline::build(fixture_b(), 0.25, Mode::Relaxed).unwrap();
        let r = verify_bmo_carleson(&p.space, &p.h, &p.basis, p.order.parents(), 5, 2).unwrap();
        assert!(r.all_passed(), "{:#?}", r.failures().collect::<Vec<_>>());
        let p = cycle(16);
        let r = verify_bmo_carleson(&p.space, &p.h, &p.basis, p.order.parents(), 5, 2).unwrap();
        assert!(r.all_passed(), "{:#?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn omega_cubes_change_norm_boundedly() {
        let p = cycle(32);
        let mut rng = aux_stream(4, 4);
        let b: Vec<f64> = (0..32).map(|_| symmetric_f64(&mut rng)).collect();
        let field = CoefficientField::of_function(&p.basis, &b).unwrap();
        let (lo, hi) = omega_carleson_ratios(&p.space, &p.h, &p.basis, &p.order, &p.sampler, &field, 10, 1);
        assert!(lo > 0.0 && hi.is_finite() && lo <= hi);
    }

    #[test]
    fn dimension_mismatch() {
        let p = Pipeline::build(fixture_b(), 0.25, Mode::Relaxed).unwrap();
        assert!(bmo_norm(&p.space, &[1.0; 3]).is_err());
        assert!(CoefficientField::of_function(&p.basis, &[1.0; 3]).is_err());
    }
}
