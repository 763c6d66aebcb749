//! Exact weight-enumerator terms against independent enumerations.

use ldpcl::finite_length::{a_value, ldpc_union_bound, ml_union_bound, MlParams};
use ldpcl::reproduce::brute_force_bound;
use num_bigint::BigInt;
use num_rational::BigRational;

/// Fraction of the `C(nl, wl)` socket subsets that meet every check an even
/// number of times.
fn socket_subsets(l: u32, r: u32, n: usize, w: usize) -> BigRational {
    let sockets = n * l as usize;
    let k = w * l as usize;
    let (mut good, mut total) = (0u64, 0u64);
    for mask in 0u64..(1u64 << sockets) {
        if mask.count_ones() as usize != k {
            continue;
        }
        total += 1;
        let check_bits = (1u64 << r) - 1;
        let even = (0..sockets / r as usize).all(|c| ((mask >> (c * r as usize)) & check_bits).count_ones().is_multiple_of(2));
        if even {
            good += 1;
        }
    }
    BigRational::new(BigInt::from(good), BigInt::from(total))
}

/// Fraction of all socket permutations under which the first `w` variables
/// sum to zero in every check.
fn permutations(l: u32, r: u32, n: usize, w: usize) -> BigRational {
    let sockets = n * l as usize;
    let mut perm: Vec<usize> = (0..sockets).collect();
    let (mut good, mut total) = (0u64, 0u64);
    let mut c = vec![0usize; sockets];
    let mut check = |perm: &[usize]| {
        let mut parity = vec![0u8; sockets / r as usize];
        for (socket, &target) in perm.iter().enumerate() {
            if socket / (l as usize) < w {
                parity[target / r as usize] ^= 1;
            }
        }
        total += 1;
        if parity.iter().all(|&p| p == 0) {
            good += 1;
        }
    };
    // Heap's algorithm
    check(&perm);
    let mut i = 0;
    while i < sockets {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            check(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    BigRational::new(BigInt::from(good), BigInt::from(total))
}

#[test]
fn a_matches_socket_subset_enumeration() {
    for (l, r, n) in [(2, 4, 4), (2, 4, 6), (3, 6, 4), (2, 3, 6), (3, 3, 4), (1, 2, 8)] {
        for w in 0..=n {
            assert_eq!(a_value(l, r, n, w).unwrap(), socket_subsets(l, r, n, w), "A({l},{r},{n},{w})");
        }
    }
}

#[test]
fn a_matches_permutation_enumeration() {
    for (l, r, n) in [(2, 4, 4), (2, 3, 3), (1, 2, 4)] {
        for w in 0..=n {
            assert_eq!(a_value(l, r, n, w).unwrap(), permutations(l, r, n, w), "A({l},{r},{n},{w})");
        }
    }
}

#[test]
fn bound_matches_direct_enumeration() {
    let params = MlParams { m_blocks: 2, n: 6, l_l: 2, r_l: 3, l_j: 1, r_j: 2 };
    let grid = [0.1, 0.25, 0.4];
    let curve = ml_union_bound(&params, &grid).unwrap();
    for p in &curve.points {
        let want = brute_force_bound(&params, p.eps).unwrap();
        assert!((p.bound - want).abs() <= 1e-12 * want, "{} vs {want}", p.bound);
    }
}

#[test]
fn bounds_grow_with_erasure_probability() {
    let grid: Vec<f64> = (1..10).map(|k| k as f64 * 0.05).collect();
    let curve = ldpc_union_bound(3, 6, 60, &grid).unwrap();
    for w in curve.points.windows(2) {
        assert!(w[0].bound <= w[1].bound + 1e-15);
    }
}

#[test]
fn indivisible_lengths_are_rejected() {
    assert!(a_value(3, 6, 5, 1).is_err());
    assert!(a_value(2, 4, 4, 5).is_err());
}
