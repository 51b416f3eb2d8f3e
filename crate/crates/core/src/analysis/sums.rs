//! Exhaustive evaluation of the wavelet kernel sums
//! `Σ|ψ(x)ψ(y)|` and `Σ|[ψ(x)−ψ(x′)]ψ(y)|` against `1/V(x,y)`.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::mathf;
use crate::rng::{aux_stream, sign};
use crate::space::FiniteSpace;
use crate::wavelets::WaveletBasis;

/// Suprema of the normalized kernel sums.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSums {
    /// `sup_{x≠y} Σ_{k,α} |ψ(x)ψ(y)| V(x, d(x,y))`.
    pub size: f64,
    pub size_witness: (usize, usize),
    /// `sup Σ_{k,α} |[ψ(x)−ψ(x′)]ψ(y)| V(x,d(x,y)) (d(x,y)/d(x,x′))^η`
    /// over `0 < d(x,x′) < d(x,y)/(2A0)`; `None` when `η` is infinite or no
    /// triple is admissible.
    pub difference: Option<f64>,
    /// Largest size constant of `Σ c ψ(x)ψ(y)` over the sampled sign
    /// patterns `c ∈ {±1}`.
    pub modulated: f64,
    pub patterns: usize,
}

/// Rows of the basis matrix that are wavelets.
pub fn wavelet_rows(basis: &WaveletBasis) -> DMatrix<f64> {
    let start = basis.coarse().nrows();
    basis.matrix().rows(start, basis.len() - start).into_owned()
}

/// Size constant `sup_{x≠y} |K(x,y)| V(x, d(x,y))` of a kernel.
pub fn size_constant(space: &FiniteSpace, kernel: &DMatrix<f64>) -> (f64, (usize, usize)) {
    let n = space.n();
    let mut best = (0.0, (0, 0));
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let v = kernel[(x, y)].abs() * space.volume_of_ball(x, space.dist(x, y));
            if v > best.0 {
                best = (v, (x, y));
            }
        }
    }
    best
}

pub fn kernel_sums(space: &FiniteSpace, basis: &WaveletBasis, patterns: usize, seed: u64) -> KernelSums {
    let n = space.n();
    let a0 = basis.a0();
    let eta = basis.eta();
    let psi = wavelet_rows(basis);
    let abs = psi.abs();
    let sum_abs = abs.transpose() * &abs;
    let (size, size_witness) = size_constant(space, &sum_abs);

    let mut difference = None;
    if eta.is_finite() {
        let mut best: f64 = 0.0;
        let mut any = false;
        for x in 0..n {
            for y in 0..n {
                let dxy = space.dist(x, y);
                if x == y {
                    continue;
                }
                let v = space.volume_of_ball(x, dxy);
                for x2 in 0..n {
                    let dxx = space.dist(x, x2);
                    if dxx == 0.0 || !(dxx < dxy / (2.0 * a0)) {
                        continue;
                    }
                    any = true;
                    let s: f64 = (0..psi.nrows())
                        .map(|i| ((psi[(i, x)] - psi[(i, x2)]) * psi[(i, y)]).abs())
                        .sum();
                    best = best.max(s * v * mathf::powf(dxy / dxx, eta));
                }
            }
        }
        if any {
            difference = Some(best);
        }
    }

    let mut rng = aux_stream(seed, 0x6b73_756d);
    let mut modulated: f64 = 0.0;
    for _ in 0..patterns {
        let signs: Vec<f64> = (0..psi.nrows()).map(|_| sign(&mut rng)).collect();
        let mut signed = psi.clone();
        for (i, &s) in signs.iter().enumerate() {
            signed.row_mut(i).scale_mut(s);
        }
        let k = psi.transpose() * signed;
        modulated = modulated.max(size_constant(space, &k).0);
    }
    KernelSums {
        size,
        size_witness,
        difference,
        modulated,
        patterns,
    }
}
