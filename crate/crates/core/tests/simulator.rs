use ldpcl::density_evolution::{run_2d_de, DeOptions};
use ldpcl::ensembles::{DegreePolynomial, JointEnsemble, LdpclEnsemble, LocalEnsemble, Perspective};
use ldpcl::scheduler::SchedulePolicy;
use ldpcl::simulator::{
    decode, flooding_bp, monte_carlo, peel_all, sample_irregular, sample_regular, DecodeMode, GraphSource, McConfig,
    McMode, Target, TwoSidedGraph,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn erasures(n: usize, eps: f64, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>() < eps).collect()
}

/// Largest stopping set inside the erased set, by checking every subset.
fn largest_stopping_set(g: &TwoSidedGraph, erased: &[bool]) -> Vec<bool> {
    let vars: Vec<usize> = (0..erased.len()).filter(|&v| erased[v]).collect();
    assert!(vars.len() <= 16);
    let edges: Vec<(usize, usize)> = g
        .local_edges()
        .iter()
        .map(|&(v, c)| (v as usize, c as usize))
        .chain(g.joint_edges().iter().map(|&(v, c)| (v as usize, c as usize + 1_000_000)))
        .collect();
    let mut best = 0u32;
    let mut best_mask = 0u32;
    for mask in 0u32..(1 << vars.len()) {
        if mask.count_ones() < best {
            continue;
        }
        let inside = |v: usize| vars.iter().position(|&u| u == v).is_some_and(|i| mask >> i & 1 == 1);
        let mut counts = std::collections::HashMap::new();
        for &(v, c) in &edges {
            if inside(v) {
                *counts.entry(c).or_insert(0) += 1;
            }
        }
        if counts.values().all(|&k| k >= 2) {
            best = mask.count_ones();
            best_mask = mask;
        }
    }
    let mut out = vec![false; erased.len()];
    for (i, &v) in vars.iter().enumerate() {
        out[v] = best_mask >> i & 1 == 1;
    }
    out
}

#[test]
fn peeling_stops_at_the_largest_stopping_set() {
    for seed in 0..20 {
        let g = sample_regular(2, 12, 2, 4, 1, 4, seed).unwrap();
        let erased = erasures(g.num_vars(), 0.55, seed + 100);
        if erased.iter().filter(|&&e| e).count() > 16 {
            continue;
        }
        assert_eq!(peel_all(&g, &erased), largest_stopping_set(&g, &erased), "seed {seed}");
    }
}

#[test]
fn scheduled_decoding_agrees_with_full_peeling() {
    let g = sample_regular(4, 200, 3, 6, 2, 8, 7).unwrap();
    for (k, eps) in [0.3, 0.42, 0.5, 0.6].into_iter().enumerate() {
        let erased = erasures(g.num_vars(), eps, k as u64);
        let residual = peel_all(&g, &erased).iter().filter(|&&e| e).count();
        for policy in [SchedulePolicy::Flooding, SchedulePolicy::Periodic(3), SchedulePolicy::Eta(1e-4)] {
            let out = decode(&g, &erased, Target::All, &policy, 100_000).unwrap();
            assert_eq!(out.block_residual, residual, "eps {eps}, {policy}");
            assert_eq!(out.mode == DecodeMode::Failure, residual > 0);
        }
    }
}

#[test]
fn flooding_tracks_density_evolution() {
    let e = LdpclEnsemble::regular(4, 5000, 3, 6, 2, 8).unwrap();
    let g = sample_regular(4, 5000, 3, 6, 2, 8, 3).unwrap();
    let eps = 0.35;
    let (_, trace) = flooding_bp(&g, &erasures(g.num_vars(), eps, 11), 8);
    let de = run_2d_de(&e, eps, DeOptions::fixed(8));
    for (t, &(x, y)) in trace.iter().enumerate().skip(1).take(6) {
        let p = de.points[t + 1];
        assert!((x - p.x).abs() < 0.01 && (y - p.y).abs() < 0.01, "iteration {t}: ({x}, {y}) vs ({}, {})", p.x, p.y);
    }
}

#[test]
fn zero_joint_degree_fraction_is_exact() {
    let local = LocalEnsemble::regular(3, 6).unwrap();
    let joint = JointEnsemble::new(
        DegreePolynomial::monomial(Perspective::Edge, 2),
        DegreePolynomial::monomial(Perspective::Edge, 5),
        0.25,
    )
    .unwrap();
    let e = LdpclEnsemble::new(4, 100, local, joint).unwrap();
    let g = sample_irregular(&e, 5).unwrap();
    assert_eq!(g.num_vars(), 400);
    assert_eq!(g.variable_joint_histogram(), vec![100, 0, 0, 300]);
    assert_eq!(g.variable_local_histogram(), vec![0, 0, 0, 400]);
}

#[test]
fn local_edges_stay_inside_their_sub_block() {
    let g = sample_regular(5, 60, 3, 6, 2, 4, 9).unwrap();
    for &(v, c) in g.local_edges() {
        assert_eq!(g.block_of_var(v as usize), g.block_of_local_check(c as usize));
    }
    assert_eq!(g.joint_check_histogram(), vec![0, 0, 0, 0, g.joint_edges().len() / 4]);
}

#[test]
fn failure_rates_are_nested_across_eps() {
    let cfg = McConfig {
        source: GraphSource::Regular { m_blocks: 4, n_sub: 100, degrees: [3, 6, 2, 8] },
        eps_grid: vec![0.3, 0.4, 0.5, 0.6],
        trials: 40,
        seed: 1,
        policy: SchedulePolicy::Flooding,
        mode: McMode::Both,
        max_iters: 100_000,
    };
    let rows = monte_carlo(&cfg).unwrap();
    assert_eq!(monte_carlo(&cfg).unwrap(), rows);
    for w in rows.windows(2) {
        assert!(w[0].global_fail <= w[1].global_fail);
        assert!(w[0].local_fail <= w[1].local_fail);
    }
    assert_eq!(rows[3].global_fail, 1.0);
}
