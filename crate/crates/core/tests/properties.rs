use ldpcl::density_evolution::{local_threshold, run_2d_de, DeOptions};
use ldpcl::ensembles::{DegreePolynomial, LdpclEnsemble, Perspective};
use ldpcl::finite_length::a_value;
use ldpcl::lp::{lp_solve, LpProblem, Sense};
use ldpcl::numfmt::round12;
use ldpcl::reproduce::random_ensemble;
use ldpcl::simulator::{round_counts, sample_regular};
use ldpcl::threshold::global_threshold;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn edge_poly() -> impl Strategy<Value = DegreePolynomial> {
    prop::collection::vec((1u32..12, 0.05f64..1.0), 1..4)
        .prop_map(|terms| DegreePolynomial::normalized(Perspective::Edge, terms).unwrap())
}

fn ensemble() -> impl Strategy<Value = LdpclEnsemble> {
    any::<u64>().prop_map(|seed| random_ensemble(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn edge_node_round_trip(p in edge_poly(), p0 in 0.0f64..0.9) {
        let node = p.edge_to_node(p0).unwrap();
        prop_assert!((node.value(1.0) - 1.0).abs() < 1e-12);
        prop_assert!((node.mass(0) - p0).abs() < 1e-12);
        let back = node.node_to_edge().unwrap();
        for x in [0.1, 0.5, 0.9] {
            prop_assert!((back.value(x) - p.value(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn maps_are_bounded_and_monotone(e in ensemble(), eps in 0.0f64..1.0, x in 0.0f64..1.0, y in 0.0f64..1.0, d in 0.0f64..0.2) {
        let (f, g) = (e.f_map(eps, x, y), e.g_map(eps, x, y));
        prop_assert!((0.0..=eps + 1e-15).contains(&f) && (0.0..=eps + 1e-15).contains(&g));
        let (x2, y2, eps2) = ((x + d).min(1.0), (y + d).min(1.0), (eps + d).min(1.0));
        prop_assert!(e.f_map(eps, x2, y) >= f - 1e-15 && e.f_map(eps, x, y2) >= f - 1e-15);
        prop_assert!(e.g_map(eps, x2, y) >= g - 1e-15 && e.g_map(eps, x, y2) >= g - 1e-15);
        prop_assert!(e.f_map(eps2, x, y) >= f - 1e-15 && e.g_map(eps2, x, y) >= g - 1e-15);
    }

    #[test]
    fn de_decreases_from_the_channel(e in ensemble(), eps in 0.05f64..0.95) {
        let trace = run_2d_de(&e, eps, DeOptions::fixed(200));
        for w in trace.points.windows(2) {
            prop_assert!(w[1].x <= w[0].x + 1e-15 && w[1].y <= w[0].y + 1e-15);
        }
    }

    #[test]
    fn thresholds_sit_between_local_and_capacity(e in ensemble()) {
        let eps_g = global_threshold(&e).eps_star;
        prop_assert!(eps_g >= local_threshold(&e.local) - 1e-6);
        prop_assert!(eps_g <= 1.0 - e.design_rate() + 1e-6, "eps_G {} above capacity {}", eps_g, 1.0 - e.design_rate());
    }

    #[test]
    fn rounding_is_idempotent(x in prop::num::f64::NORMAL) {
        let r = round12(x);
        prop_assert_eq!(round12(r), r);
        prop_assert!((r - x).abs() <= 5e-12 * x.abs());
    }

    #[test]
    fn enumerator_is_symmetric_for_even_checks(l in 1u32..4, half_r in 1u32..3, blocks in 1usize..4, w in 0usize..12) {
        let r = 2 * half_r;
        let n = blocks * r as usize;
        let w = w % (n + 1);
        let a = a_value(l, r, n, w).unwrap();
        prop_assert_eq!(&a, &a_value(l, r, n, n - w).unwrap());
        prop_assert!(a <= num_rational::BigRational::from_integer(1.into()));
    }

    #[test]
    fn simplex_optimum_beats_feasible_points(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..5),
        bounds in prop::collection::vec(0.1f64..2.0, 5),
        c in prop::collection::vec(-1.0f64..1.0, 3),
        probes in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 8),
    ) {
        let mut p = LpProblem::new(c.clone(), Sense::Maximize);
        for (a, &b) in rows.iter().zip(&bounds) {
            p.less_eq(a.clone(), b);
        }
        p.less_eq(vec![1.0; 3], 10.0);
        let x = lp_solve(&p).unwrap().expect("the origin is feasible and the box is bounded");
        let dot = |a: &[f64], v: &[f64]| a.iter().zip(v).map(|(a, v)| a * v).sum::<f64>();
        for con in &p.constraints {
            prop_assert!(dot(&con.coeffs, &x) <= con.bound + 1e-9);
        }
        prop_assert!(x.iter().all(|&v| v >= -1e-12));
        for probe in probes {
            // scale the probe into the feasible region
            let worst = p.constraints.iter().map(|con| dot(&con.coeffs, &probe) / con.bound).fold(0.0, f64::max);
            let s = if worst > 1.0 { 1.0 / worst } else { 1.0 };
            let q: Vec<f64> = probe.iter().map(|v| v * s).collect();
            prop_assert!(dot(&c, &x) >= dot(&c, &q) - 1e-9);
        }
    }

    #[test]
    fn rounded_counts_keep_the_total(p in edge_poly(), total in 1usize..5000) {
        let node = p.edge_to_node(0.0).unwrap();
        let counts = round_counts(&node, total);
        prop_assert_eq!(counts.iter().map(|c| c.1).sum::<usize>(), total);
    }

    #[test]
    fn sampled_graphs_have_the_requested_degrees(
        m in 1usize..5, n in 1usize..60, l_l in 1u32..5, r_l in 2u32..8, l_j in 0u32..4, r_j in 2u32..8, seed in any::<u64>(),
    ) {
        let g = sample_regular(m, n, l_l, r_l, l_j, r_j, seed).unwrap();
        let vars = m * n;
        prop_assert_eq!(g.local_edges().len(), vars * l_l as usize);
        prop_assert_eq!(g.joint_edges().len(), vars * l_j as usize);
        prop_assert!((0..vars).all(|v| g.local_degree(v) == l_l as usize && g.joint_degree(v) == l_j as usize));
        for &(v, c) in g.local_edges() {
            prop_assert_eq!(g.block_of_var(v as usize), g.block_of_local_check(c as usize));
        }
    }
}
