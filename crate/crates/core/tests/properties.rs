use hwave_core::analysis::{annuli, bmo};
use hwave_core::space::{quasi_triangle_constant, FiniteSpace};
use hwave_core::splines::verify_splines;
use hwave_core::{Mode, Pipeline, SpaceSpec, WeightRule};
use proptest::prelude::*;

/// Distinct points of an 8×8 grid with positive weights, Euclidean distance
/// raised to `s`.
fn space_strategy() -> impl Strategy<Value = FiniteSpace> {
    (prop::collection::btree_set((0u8..8, 0u8..8), 3..10), 0.5f64..2.5)
        .prop_flat_map(|(pts, s)| {
            let n = pts.len();
            (Just(pts), Just(s), prop::collection::vec(0.1f64..3.0, n))
        })
        .prop_map(|(pts, s, weights)| {
            let coords = pts.into_iter().map(|(a, b)| vec![a as f64, b as f64]).collect();
            FiniteSpace::from_coords("grid", coords, weights, move |a, b| {
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt().powf(s)
            })
            .unwrap()
        })
}

fn pipeline_strategy() -> impl Strategy<Value = Pipeline> {
    space_strategy().prop_map(|s| Pipeline::build(s, 0.25, Mode::Relaxed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn a0_bounds_every_triple(space in space_strategy()) {
        let (a0, witness) = quasi_triangle_constant(&space);
        prop_assert!(a0 >= 1.0);
        let n = space.n();
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    let rhs = a0 * (space.dist(x, z) + space.dist(z, y));
                    prop_assert!(space.dist(x, y) <= rhs * (1.0 + 1e-12));
                }
            }
        }
        if let Some((x, y, z)) = witness {
            let ratio = space.dist(x, y) / (space.dist(x, z) + space.dist(z, y));
            prop_assert_eq!(ratio, a0);
        }
    }

    #[test]
    fn volume_is_monotone(space in space_strategy(), x in 0usize..3, r1 in 0.01f64..100.0, t in 1.0f64..4.0) {
        let v1 = space.volume(x, r1).unwrap();
        let v2 = space.volume(x, r1 * t).unwrap();
        prop_assert!(v1 <= v2);
        prop_assert!(v1 >= space.weight(x));
        prop_assert!(v2 <= space.total_mass() * (1.0 + 1e-12));
    }

    #[test]
    fn powered_constant_is_controlled(space in space_strategy(), s in 0.25f64..3.0) {
        let (a0, _) = quasi_triangle_constant(&space);
        let (a0s, _) = quasi_triangle_constant(&space.powered(s).unwrap());
        let bound = a0.powf(s) * if s > 1.0 { 2f64.powf(s - 1.0) } else { 1.0 };
        prop_assert!(a0s <= bound * (1.0 + 1e-12), "{a0s} > {bound}");
    }

    #[test]
    fn generators_are_deterministic(n in 2usize..30, dim in 1usize..4, seed in any::<u64>()) {
        let spec = SpaceSpec::RandomCloud { n, dim, seed };
        let a = spec.generate(&WeightRule::Uniform).unwrap();
        let b = spec.generate(&WeightRule::Uniform).unwrap();
        prop_assert_eq!(a.distances(), b.distances());
        prop_assert_eq!(a.weights(), b.weights());
    }

    #[test]
    fn dichotomy_never_fails(space in space_strategy()) {
        let (a0, _) = quasi_triangle_constant(&space);
        prop_assert_eq!(annuli::dichotomy_scan(&space, a0).failures, 0);
    }

    #[test]
    fn bmo_is_homogeneous(space in space_strategy(), c in -5.0f64..5.0, shift in -10.0f64..10.0, seed in any::<u64>()) {
        let n = space.n();
        let b: Vec<f64> = (0..n).map(|i| ((seed.rotate_left(i as u32 * 7) % 1000) as f64) / 100.0).collect();
        let g: Vec<f64> = b.iter().map(|v| c * v + shift).collect();
        let nb = bmo::bmo_norm(&space, &b).unwrap().value;
        let ng = bmo::bmo_norm(&space, &g).unwrap().value;
        prop_assert!((ng - c.abs() * nb).abs() <= 1e-9 * (1.0 + ng), "{ng} vs {}", c.abs() * nb);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spline_invariants_hold(p in pipeline_strategy()) {
        let r = verify_splines(&p.space, &p.h, &p.ts, &p.table);
        prop_assert!(r.all_passed(), "{:?}", r.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
        for k in p.h.level_range() {
            for x in 0..p.space.n() {
                let sum: f64 = (0..p.h.level(k).len()).map(|a| p.table.value(k, a, x)).sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn carleson_is_monotone_and_sign_invariant(p in pipeline_strategy(), seed in any::<u64>()) {
        let n = p.space.n();
        let f: Vec<f64> = (0..n).map(|i| ((seed.rotate_left(i as u32 * 5) % 997) as f64) / 97.0 - 5.0).collect();
        let field = bmo::CoefficientField::of_function(&p.basis, &f).unwrap();
        let parents = p.order.parents();
        let car = |fl: &bmo::CoefficientField| bmo::carleson_norm(&p.space, &p.h, &p.basis, parents, fl).value;
        let base = car(&field);
        let flipped = field.map(|v| -v);
        prop_assert_eq!(car(&flipped), base);
        // flip the sign of every other coefficient
        let mut mixed = field.clone();
        for (i, (k, a, v)) in field.iter().enumerate() {
            if i % 2 == 1 {
                mixed.set(k, a, -v);
            }
        }
        prop_assert_eq!(car(&mixed), base);
        let shrunk = field.map(|v| 0.5 * v);
        let grown = field.map(|v| 1.5 * v);
        prop_assert!(car(&shrunk) <= base && base <= car(&grown));
        // enlarging one coefficient cannot decrease the norm
        let first = field.iter().next();
        if let Some((k, a, v)) = first {
            let mut bigger = field.clone();
            bigger.set(k, a, 2.0 * v.abs() + 1.0);
            prop_assert!(car(&bigger) >= base);
        }
    }
}
