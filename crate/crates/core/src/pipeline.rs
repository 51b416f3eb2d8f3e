//! All stages built once for a space and a scale parameter.

use crate::error::Result;
use crate::mra::{build_gram_system, verify_mra, GramSystem};
use crate::nets::{build_nets, verify_nets, Mode, NetHierarchy};
use crate::order::{build_reference_order, verify_order, ReferenceOrder};
use crate::randomized::{sample_omega, theoretical_eta, verify_center_sandwich, verify_cubes, DyadicSampler};
use crate::report::Report;
use crate::space::{compute_constants, FiniteSpace, SpaceConstants};
use crate::splines::{compute_splines_exact, transition_probabilities, verify_splines, verify_transitions};
use crate::splines::{SplineTable, TransitionSystem};
use crate::wavelets::{build_wavelet_basis, verify_wavelets, WaveletBasis};

/// Space, nets, orders, splines, Gram system and wavelet basis.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub space: FiniteSpace,
    pub constants: SpaceConstants,
    pub h: NetHierarchy,
    pub order: ReferenceOrder,
    pub sampler: DyadicSampler,
    pub ts: TransitionSystem,
    pub table: SplineTable,
    pub gs: GramSystem,
    pub basis: WaveletBasis,
    /// Spline Hölder exponent from `L`, `M` and `δ`.
    pub eta: f64,
}

impl Pipeline {
    pub fn build(space: FiniteSpace, delta: f64, mode: Mode) -> Result<Self> {
        let constants = compute_constants(&space);
        let h = build_nets(&space, constants.a0, delta, mode)?;
        let order = build_reference_order(&space, &h)?;
        let sampler = DyadicSampler::new(&space, &h, &order)?;
        let ts = transition_probabilities(&h, &sampler);
        let table = compute_splines_exact(&h, &ts);
        let gs = build_gram_system(&space, &h, &table)?;
        let eta = theoretical_eta(&order, delta);
        let basis = build_wavelet_basis(&space, &h, &table, &gs, eta)?;
        Ok(Self {
            space,
            constants,
            h,
            order,
            sampler,
            ts,
            table,
            gs,
            basis,
            eta,
        })
    }

    /// Every structural check of every stage; cubes are checked for `samples`
    /// draws of `ω`.
    pub fn verify(&self, seed: u64, samples: u64) -> Report {
        let mut report = verify_nets(&self.space, &self.h);
        report.extend(verify_order(&self.space, &self.h, &self.order));
        for s in 0..samples {
            let omega = sample_omega(&self.order, seed, s);
            let sys = self.sampler.system(&self.h, &omega);
            report.extend(verify_cubes(&self.space, &self.h, &sys));
            report.extend(verify_center_sandwich(&self.space, &self.h, &sys));
        }
        report.extend(verify_transitions(&self.space, &self.h, &self.ts));
        report.extend(verify_splines(&self.space, &self.h, &self.ts, &self.table));
        report.extend(verify_mra(&self.space, &self.h, &self.ts, &self.table, &self.gs, seed));
        report.extend(verify_wavelets(&self.space, &self.h, &self.table, &self.gs, &self.basis, seed));
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{fixture_a, fixture_b, SpaceSpec, WeightRule};
    use alloc::vec::Vec;

    #[test]
    fn fixtures_verify() {
        for space in [fixture_a(), fixture_b()] {
            let p = Pipeline::build(space, 0.25, Mode::Relaxed).unwrap();
            let r = p.verify(3, 4);
            assert!(r.all_passed(), "{:#?}", r.failures().collect::<Vec<_>>());
        }
    }

    #[test]
    fn cycle_verifies() {
        let space = SpaceSpec::Cycle { n: 32 }.generate(&WeightRule::Uniform).unwrap();
        let p = Pipeline::build(space, 0.125, Mode::Relaxed).unwrap();
        let r = p.verify(1, 3);
        assert!(r.all_passed(), "{:#?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn strict_rejects_quarter() {
        assert!(Pipeline::build(fixture_b(), 0.25, Mode::Strict).is_err());
    }
}
