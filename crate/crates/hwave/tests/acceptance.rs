//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use hwave_core::analysis::{annuli, bmo, operators, sums};
use hwave_core::linalg::identity_residual;
use hwave_core::mra::{band_oracle, riesz_sandwich_violation, verify_mra};
use hwave_core::randomized::{boundary_study, sample_omega, verify_center_sandwich, verify_cubes};
use hwave_core::rng::{aux_stream, symmetric_f64};
use hwave_core::space::{fixture_a, fixture_b};
use hwave_core::splines::{compute_splines_mc, mc_deviation, verify_splines};
use hwave_core::wavelets::verify_wavelets;
use hwave_core::{FiniteSpace, Mode, Pipeline, Report, SpaceSpec, WeightRule};
use nalgebra::DMatrix;

type Outcome = Result<String, String>;

fn pipeline(space: FiniteSpace, delta: f64) -> Pipeline {
    Pipeline::build(space, delta, Mode::Relaxed).expect("pipeline builds")
}

fn cycle(n: usize, delta: f64) -> Pipeline {
    pipeline(SpaceSpec::Cycle { n }.generate(&WeightRule::Uniform).unwrap(), delta)
}

fn check(report: &Report, names: &[&str]) -> Result<(), String> {
    for name in names {
        let hits: Vec<_> = report.checks.iter().filter(|c| c.name == *name).collect();
        if hits.is_empty() {
            return Err(format!("check {name} missing"));
        }
        if let Some(c) = hits.iter().find(|c| !c.passed) {
            return Err(format!("{name}: margin {:.3e} {}", c.margin, c.detail));
        }
    }
    Ok(())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn drift(a: f64, b: f64) -> f64 {
    (a / b).max(b / a)
}

fn criterion_1() -> Outcome {
    for (name, space) in [("FIX-A", fixture_a()), ("FIX-B", fixture_b())] {
        let p = pipeline(space, 0.25);
        let r = verify_splines(&p.space, &p.h, &p.ts, &p.table);
        check(
            &r,
            &["splines.partition_of_unity", "splines.interpolation", "splines.refinement", "splines.support"],
        )
        .map_err(|e| format!("{name}: {e}"))?;
        // interpolation is exact: compare bits
        for k in p.h.level_range() {
            for (b, &x) in p.h.level(k).iter().enumerate() {
                for a in 0..p.h.level(k).len() {
                    let v = p.table.value(k, a, x);
                    ensure(v == if a == b { 1.0 } else { 0.0 }, || format!("{name}: s^{k}_{a}(x_{b}) = {v}"))?;
                }
            }
        }
    }
    Ok("FIX-A and FIX-B: unity, interpolation, refinement, support".into())
}

fn criterion_2() -> Outcome {
    let p = pipeline(fixture_b(), 0.25);
    let est = compute_splines_mc(&p.h, &p.order, &p.sampler, 100_000, 11).map_err(|e| e.to_string())?;
    let (dev, z) = mc_deviation(&p.table, &est);
    ensure(dev <= 0.01, || format!("max deviation {dev:.4e} > 0.01"))?;
    Ok(format!("max deviation {dev:.3e}, max z {z:.2}"))
}

fn criterion_3() -> Outcome {
    let p = pipeline(fixture_b(), 0.25);
    for seed in 0..100 {
        let sys = p.sampler.system(&p.h, &sample_omega(&p.order, seed, 0));
        let mut r = verify_cubes(&p.space, &p.h, &sys);
        r.extend(verify_center_sandwich(&p.space, &p.h, &sys));
        check(
            &r,
            &["cubes.partition", "cubes.child_tiling", "cubes.ball_sandwich", "cubes.centre_sandwich"],
        )
        .map_err(|e| format!("seed {seed}: {e}"))?;
    }
    Ok("100 seeds, zero violations".into())
}

fn criterion_4() -> Outcome {
    let p = pipeline(fixture_b(), 0.25);
    let eps = [0.5, 0.25, 0.125, 0.0625];
    let rows = boundary_study(&p.space, &p.h, &p.order, &p.sampler, &[0, 3, 7], 1, &eps, 100_000, 5)
        .map_err(|e| e.to_string())?;
    let mut worst = f64::INFINITY;
    for row in &rows {
        for (i, e) in row.iter().enumerate() {
            let slack = e.theory_bound + 4.0 * e.stderr - e.estimate;
            worst = worst.min(slack);
            ensure(slack >= 0.0, || format!("x={} eps={} estimate {} bound {}", e.x, e.eps, e.estimate, e.theory_bound))?;
            if i > 0 {
                let prev = &row[i - 1];
                ensure(e.estimate <= prev.estimate + 4.0 * (e.stderr + prev.stderr), || {
                    format!("x={} not monotone at eps={}", e.x, e.eps)
                })?;
            }
        }
    }
    let est: Vec<String> = rows.iter().map(|r| format!("{:.4}", r[3].estimate)).collect();
    Ok(format!(
        "η = {:.4}, smallest slack {worst:.4}, estimates at ε=1/16: {}",
        p.eta,
        est.join("/")
    ))
}

fn criterion_5() -> Outcome {
    let mut detail = Vec::new();
    for (name, p) in [("FIX-B", pipeline(fixture_b(), 0.25)), ("cycle(64)", cycle(64, 0.125))] {
        let r = verify_wavelets(&p.space, &p.h, &p.table, &p.gs, &p.basis, 3);
        check(&r, &["wavelets.gram_identity", "wavelets.vanishing_mean", "wavelets.cardinality"])
            .map_err(|e| format!("{name}: {e}"))?;
        ensure(p.basis.len() == p.space.n(), || format!("{name}: {} members", p.basis.len()))?;
        let mut rng = aux_stream(21, 5);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let f: Vec<f64> = (0..p.space.n()).map(|_| symmetric_f64(&mut rng)).collect();
            let c = p.basis.analyze(&f).unwrap();
            let energy: f64 = c.iter().map(|v| v * v).sum();
            let norm = p.space.inner(&f, &f);
            worst = worst.max((energy - norm).abs() / norm);
        }
        ensure(worst <= 1e-8, || format!("{name}: Parseval error {worst:.3e}"))?;
        detail.push(format!("{name}: n={} Parseval {worst:.1e}", p.space.n()));
    }
    Ok(detail.join(", "))
}

fn criterion_6() -> Outcome {
    let o = band_oracle(0.5, 2.0, -32, 31, 16).map_err(|e| e.to_string())?;
    ensure(o.upper_form_error <= 1e-9, || format!("geometric form error {:.3e}", o.upper_form_error))?;
    let s = o.fitted.exponent;
    ensure((s - 0.5).abs() <= 0.05, || format!("fitted exponent {s:.4}"))?;
    Ok(format!(
        "M⁻¹(i,j) = λ^(j−i) to {:.1e} (other orientation off by {:.2}); fitted s = {s:.4}",
        o.upper_form_error, o.lower_form_error
    ))
}

fn criterion_7() -> Outcome {
    let mut converged = Vec::new();
    for (name, p) in [
        ("FIX-A", pipeline(fixture_a(), 0.25)),
        ("FIX-B", pipeline(fixture_b(), 0.25)),
        ("cycle(64)", cycle(64, 0.125)),
    ] {
        let r = verify_mra(&p.space, &p.h, &p.ts, &p.table, &p.gs, 1);
        check(&r, &["mra.inverse_residual", "mra.inv_sqrt_residual", "mra.neumann_agreement"])
            .map_err(|e| format!("{name}: {e}"))?;
        converged.push(format!("{name} {}", r.get("mra.neumann_agreement").unwrap().detail));
    }
    Ok(converged.join("; "))
}

fn criterion_8() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for p in [pipeline(fixture_b(), 0.25), cycle(64, 0.125)] {
        for lv in p.gs.levels() {
            let v = riesz_sandwich_violation(&p.space, &p.table, lv, 100, 8);
            worst = worst.max(v);
            ensure(v <= 1e-10, || format!("level {} violation {v:.3e}", lv.level))?;
        }
    }
    Ok(format!("worst relative violation {worst:.3e}"))
}

fn criterion_9() -> Outcome {
    let delta = 0.25;
    let mut stats = Vec::new();
    for n in [16, 32] {
        let p = cycle(n, delta);
        let lb = annuli::large_ball_sup(&p.space, &p.h, annuli::SumParams::default()).0;
        let ks = sums::kernel_sums(&p.space, &p.basis, 20, 1);
        ensure(ks.modulated <= ks.size * (1.0 + 1e-12), || format!("cycle({n}): modulated kernel above bound"))?;
        let diff = ks.difference.ok_or_else(|| format!("cycle({n}): no admissible triples"))?;
        stats.push((lb, ks.size, diff));
    }
    let (a, b) = (stats[0], stats[1]);
    for (what, x, y) in [("large-ball", a.0, b.0), ("size", a.1, b.1), ("difference", a.2, b.2)] {
        ensure(x.is_finite() && y.is_finite() && drift(x, y) <= 2.0, || {
            format!("{what} sum drifts {x:.4} -> {y:.4}")
        })?;
    }
    let two = SpaceSpec::TwoCluster { n: 16, gap: 100.0 }.generate(&WeightRule::Counting).unwrap();
    let small = SpaceSpec::TwoCluster { n: 4, gap: 100.0 }.generate(&WeightRule::Counting).unwrap();
    for space in [fixture_a(), fixture_b(), cycle(32, delta).space, two, small] {
        let a0 = hwave_core::space::quasi_triangle_constant(&space).0;
        let scan = annuli::dichotomy_scan(&space, a0);
        ensure(scan.failures == 0, || format!("dichotomy fails {} times on {}", scan.failures, space.name()))?;
    }
    Ok(format!(
        "16→32: large-ball {:.3}→{:.3}, size {:.3}→{:.3}, difference {:.3}→{:.3}; dichotomy holds",
        a.0, b.0, a.1, b.1, a.2, b.2
    ))
}

fn criterion_10() -> Outcome {
    let delta = 0.25;
    let mut intervals = Vec::new();
    for n in [16, 32] {
        let p = cycle(n, delta);
        let r = bmo::verify_bmo_carleson(&p.space, &p.h, &p.basis, p.order.parents(), 10, 4)
            .map_err(|e| e.to_string())?;
        check(&r, &["bmo.round_trip", "bmo.renormalization", "bmo.uniqueness"]).map_err(|e| format!("cycle({n}): {e}"))?;
        let nr = bmo::norm_ratios(&p.space, &p.h, &p.basis, p.order.parents(), 50, 6).map_err(|e| e.to_string())?;
        intervals.push((nr.min, nr.max));

        // zero coefficients reconstruct a constant exactly
        let zero = bmo::CoefficientField::zeros(&p.basis);
        let f = bmo::bmo_from_carleson(&p.basis, &zero, 0, 1.0);
        ensure(f.iter().all(|&v| v == f[0]), || "zero field is not constant".into())?;
        let coarse: Vec<f64> = p.basis.matrix().row(0).iter().copied().collect();
        ensure(coarse.iter().all(|&v| v == coarse[0]), || "coarse member is not constant".into())?;
    }
    let (a, b) = (intervals[0], intervals[1]);
    ensure(drift(a.0, b.0) <= 2.0 && drift(a.1, b.1) <= 2.0, || {
        format!("interval drifts [{:.3},{:.3}] -> [{:.3},{:.3}]", a.0, a.1, b.0, b.1)
    })?;
    Ok(format!(
        "round trip ok; Car/BMO in [{:.3},{:.3}] (16) and [{:.3},{:.3}] (32)",
        a.0, a.1, b.0, b.1
    ))
}

fn criterion_11() -> Outcome {
    let p = cycle(64, 0.125);
    let n = p.space.n();
    let eps = p.basis.eta() / 2.0;
    let id = operators::operator_diagnostics(&p.space, &p.basis, &DMatrix::identity(n, n), eps)
        .map_err(|e| e.to_string())?;
    let res = identity_residual(&id.coeffs);
    ensure(res <= 1e-8, || format!("identity coefficients off by {res:.3e}"))?;
    ensure((id.schur.max() - 1.0).abs() <= 1e-8, || format!("identity Schur {}", id.schur.max()))?;
    let ones = operators::kernel_to_operator(&p.space, &DMatrix::from_element(n, n, 1.0)).unwrap();
    let c = operators::operator_diagnostics(&p.space, &p.basis, &ones, eps).map_err(|e| e.to_string())?;
    ensure(c.coeffs.amax() <= 1e-10, || format!("constant kernel coefficient {:.3e}", c.coeffs.amax()))?;
    let hop = operators::kernel_to_operator(&p.space, &operators::hilbert_kernel(n)).unwrap();
    let h = operators::operator_diagnostics(&p.space, &p.basis, &hop, eps).map_err(|e| e.to_string())?;
    ensure(h.schur.bound() + 1e-8 >= h.norm && h.schur.max() + 1e-8 >= h.norm, || {
        format!("Schur {:.6} below norm {:.6}", h.schur.bound(), h.norm)
    })?;
    ensure(h.c0.is_finite(), || "almost-diagonal ratio not finite".into())?;
    let (r, _) = operators::verify_operators(&p.space, &p.h, &p.table, &p.basis, p.order.parents(), 5, 2)
        .map_err(|e| e.to_string())?;
    check(&r, &["paraproduct.one", "paraproduct.mean_zero"])?;
    Ok(format!(
        "Hilbert-type kernel on cycle(64): ‖C‖ = {:.4} ≤ Schur {:.4}; C0 = {:.4}",
        h.norm,
        h.schur.bound(),
        h.c0
    ))
}

fn criterion_12() -> Outcome {
    let sizes: Vec<f64> = [16, 32]
        .iter()
        .map(|&n| {
            let p = cycle(n, 0.25);
            operators::size_redundancy(&p.space, &p.basis, 3, 1)
        })
        .collect();
    let d = drift(sizes[0], sizes[1]);
    ensure(d <= 2.0, || format!("size constant {:.3} -> {:.3}, drift {d:.3}", sizes[0], sizes[1]))?;
    // informational: at delta = 1/8 both cycles have two wavelet levels
    let fine: Vec<f64> = [16, 32]
        .iter()
        .map(|&n| {
            let p = cycle(n, 0.125);
            operators::size_redundancy(&p.space, &p.basis, 3, 1)
        })
        .collect();
    Ok(format!(
        "size constant {:.3} -> {:.3}, drift {d:.3} (info, delta 1/8: {:.3} -> {:.3}, drift {:.3})",
        sizes[0],
        sizes[1],
        fine[0],
        fine[1],
        drift(fine[0], fine[1])
    ))
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 12] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
        (12, criterion_12),
    ];
    let mut failed = 0;
    for (id, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS ({secs:.1}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL ({secs:.1}s) {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
