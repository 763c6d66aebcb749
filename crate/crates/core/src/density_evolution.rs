//! Two-dimensional density evolution for the local/joint peeling decoder.
//!
//! `x` is the erasure probability of a variable-to-check message on a local
//! edge, `y` the same on a joint edge.

use std::fmt::Write as _;

use crate::ensembles::{DegreePolynomial, JointEnsemble, LdpclEnsemble, LocalEnsemble, Perspective};
use crate::error::{check_unit, Result};
use crate::numfmt::fmt12;

pub const DEFAULT_HALT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeOptions {
    pub max_iters: u64,
    pub halt_tol: f64,
}

impl Default for DeOptions {
    fn default() -> Self {
        Self {
            max_iters: DEFAULT_MAX_ITERS,
            halt_tol: DEFAULT_HALT_TOL,
        }
    }
}

impl DeOptions {
    /// Exactly `iters` iterations, never halting early.
    pub fn fixed(iters: u64) -> Self {
        Self {
            max_iters: iters,
            halt_tol: f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeStatus {
    /// `x` fell below the halting tolerance.
    Converged,
    /// Both sequences stopped moving at a nonzero point.
    Stuck,
    MaxIters,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DePoint {
    pub iter: i64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeTrace {
    pub epsilon: f64,
    /// Starts with the initial point `(-1, 1, 1)`.
    pub points: Vec<DePoint>,
    pub status: DeStatus,
}

impl DeTrace {
    pub fn converged(&self) -> bool {
        self.status == DeStatus::Converged
    }

    pub fn x_limit(&self) -> f64 {
        self.points.last().map_or(1.0, |p| p.x)
    }

    pub fn y_limit(&self) -> f64 {
        self.points.last().map_or(1.0, |p| p.y)
    }

    /// CSV with header `iter,x,y,eps_loc`.
    pub fn to_csv(&self, e: &LdpclEnsemble) -> String {
        let mut out = String::from("iter,x,y,eps_loc\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                p.iter,
                fmt12(p.x),
                fmt12(p.y),
                fmt12(e.epsilon_loc(self.epsilon, p.y))
            );
        }
        out
    }
}

/// Result of a DE run without the per-iteration history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeSummary {
    pub status: DeStatus,
    pub iterations: u64,
    pub x: f64,
    pub y: f64,
}

impl DeSummary {
    pub fn converged(&self) -> bool {
        self.status == DeStatus::Converged
    }
}

/// Iterates `step` from `(1, 1)`. Stuck means both coordinates moved by less
/// than `halt_tol` relative to their size; an absolute floor would misreport
/// slow linear convergence to zero as a fixed point.
fn iterate(
    opts: DeOptions,
    mut step: impl FnMut(f64, f64) -> (f64, f64),
    mut observe: impl FnMut(i64, f64, f64),
) -> DeSummary {
    let tol = opts.halt_tol;
    let (mut x, mut y) = (1.0, 1.0);
    observe(-1, x, y);
    let mut iter = 0u64;
    while iter < opts.max_iters {
        let (nx, ny) = step(x, y);
        observe(iter as i64, nx, ny);
        iter += 1;
        if nx < tol {
            return DeSummary {
                status: DeStatus::Converged,
                iterations: iter,
                x: nx,
                y: ny,
            };
        }
        let stalled = (x - nx).abs() <= tol * nx && (y - ny).abs() <= tol * ny.max(tol);
        x = nx;
        y = ny;
        if stalled {
            return DeSummary {
                status: DeStatus::Stuck,
                iterations: iter,
                x,
                y,
            };
        }
    }
    DeSummary {
        status: DeStatus::MaxIters,
        iterations: iter,
        x,
        y,
    }
}

fn traced(epsilon: f64, opts: DeOptions, step: impl FnMut(f64, f64) -> (f64, f64)) -> DeTrace {
    let mut points = Vec::new();
    let summary = iterate(opts, step, |iter, x, y| points.push(DePoint { iter, x, y }));
    DeTrace {
        epsilon,
        points,
        status: summary.status,
    }
}

impl LdpclEnsemble {
    /// `f(eps, x, y) = eps lambda_L(1 - rho_L(1 - x)) Lambda_J(1 - rho_J(1 - y))`.
    #[inline]
    pub fn f_map(&self, eps: f64, x: f64, y: f64) -> f64 {
        eps * self.local.response(x) * self.joint_node().value(1.0 - self.joint.rho.value(1.0 - y))
    }

    /// `g(eps, x, y) = eps Lambda_L(1 - rho_L(1 - x)) lambda_J(1 - rho_J(1 - y))`.
    #[inline]
    pub fn g_map(&self, eps: f64, x: f64, y: f64) -> f64 {
        eps * self.local_node().value(1.0 - self.local.rho.value(1.0 - x))
            * self.joint.lambda.value(1.0 - self.joint.rho.value(1.0 - y))
    }

    /// Erasure probability seen by the local decoder after joint step `y`.
    #[inline]
    pub fn epsilon_loc(&self, eps: f64, y: f64) -> f64 {
        eps * self.joint_node().value(1.0 - self.joint.rho.value(1.0 - y))
    }
}

pub fn f_map(e: &LdpclEnsemble, eps: f64, x: f64, y: f64) -> Result<f64> {
    check_args(eps, x, y)?;
    Ok(e.f_map(eps, x, y))
}

pub fn g_map(e: &LdpclEnsemble, eps: f64, x: f64, y: f64) -> Result<f64> {
    check_args(eps, x, y)?;
    Ok(e.g_map(eps, x, y))
}

fn check_args(eps: f64, x: f64, y: f64) -> Result<()> {
    check_unit("epsilon", eps)?;
    check_unit("x", x)?;
    check_unit("y", y)
}

pub fn epsilon_loc(eps: f64, y: f64, joint: &JointEnsemble) -> Result<f64> {
    check_unit("epsilon", eps)?;
    check_unit("y", y)?;
    let node = joint.lambda.edge_to_node(joint.p0)?;
    Ok(eps * node.value(1.0 - joint.rho.value(1.0 - y)))
}

pub fn run_2d_de(e: &LdpclEnsemble, eps: f64, opts: DeOptions) -> DeTrace {
    traced(eps, opts, |x, y| (e.f_map(eps, x, y), e.g_map(eps, x, y)))
}

pub fn de_summary(e: &LdpclEnsemble, eps: f64, opts: DeOptions) -> DeSummary {
    iterate(opts, |x, y| (e.f_map(eps, x, y), e.g_map(eps, x, y)), |_, _, _| {})
}

/// `x_l = eps lambda(1 - rho(1 - x_{l-1}))`; the `y` column repeats `x`.
pub fn run_1d_de(lambda: &DegreePolynomial, rho: &DegreePolynomial, eps: f64, opts: DeOptions) -> DeTrace {
    traced(eps, opts, |x, _| {
        let nx = eps * lambda.value(1.0 - rho.value(1.0 - x));
        (nx, nx)
    })
}

pub fn de_summary_1d(lambda: &DegreePolynomial, rho: &DegreePolynomial, eps: f64, opts: DeOptions) -> DeSummary {
    iterate(
        opts,
        |x, _| {
            let nx = eps * lambda.value(1.0 - rho.value(1.0 - x));
            (nx, nx)
        },
        |_, _, _| {},
    )
}

const THRESHOLD_GRID: usize = 10_000;

/// Golden-section minimization of `f` on `[a, b]` down to width `tol`.
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Uniform points on `(0, 1]` plus a geometric tail towards zero, ascending.
pub(crate) fn unit_grid(uniform: usize, smallest: f64) -> Vec<f64> {
    let first = 1.0 / uniform as f64;
    let mut grid = Vec::new();
    let mut t = smallest;
    while t < first {
        grid.push(t);
        t *= 1.5;
    }
    grid.extend((1..=uniform).map(|i| i as f64 / uniform as f64));
    grid
}

/// Infimum over `(0, 1]` of `x / r(x)`, where `r` is an ensemble response
/// such as `lambda(1 - rho(1 - x))`; `slope0` is `r'(0)`.
pub(crate) fn ratio_infimum(response: impl Fn(f64) -> f64, value0: f64, slope0: f64) -> f64 {
    if value0 > 0.0 {
        return 0.0;
    }
    let ratio = |x: f64| {
        let r = response(x);
        if r > 0.0 {
            x / r
        } else {
            f64::INFINITY
        }
    };
    // below ~1e-6 the subtraction in 1 - rho(1 - x) loses too many digits;
    // the x -> 0 limit is covered by `slope0`
    let grid = unit_grid(THRESHOLD_GRID, 1e-6);
    let (best, _) = grid
        .iter()
        .enumerate()
        .map(|(i, &x)| (i, ratio(x)))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (_, refined) = golden_min(ratio, lo, hi, 1e-9);
    let limit0 = if slope0 > 0.0 { 1.0 / slope0 } else { f64::INFINITY };
    refined.min(ratio(grid[best])).min(limit0)
}

/// Largest `x` in `[0, 1]` with `eps r(x) - x >= 0`, where `r` is an ensemble
/// response; zero when the map has no positive fixed point.
pub(crate) fn largest_fixed_point(response: impl Fn(f64) -> f64, eps: f64) -> f64 {
    let h = |x: f64| eps * response(x) - x;
    let grid = unit_grid(THRESHOLD_GRID, 1e-12);
    if h(1.0) >= 0.0 {
        return 1.0;
    }
    for i in (0..grid.len() - 1).rev() {
        if h(grid[i]) >= 0.0 {
            let (mut lo, mut hi) = (grid[i], grid[i + 1]);
            while hi - lo > 1e-15 * hi.max(1e-300) && hi - lo > 1e-300 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if h(mid) >= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return lo;
        }
    }
    0.0
}

/// `inf_{x in (0,1]} x / lambda_L(1 - rho_L(1 - x))`.
pub fn local_threshold(local: &LocalEnsemble) -> f64 {
    one_d_threshold(&local.lambda, &local.rho)
}

/// Threshold of the 1D recursion `x = eps lambda(1 - rho(1 - x))`.
pub fn one_d_threshold(lambda: &DegreePolynomial, rho: &DegreePolynomial) -> f64 {
    let slope0 = lambda.mass(1) * rho.derivative(1.0);
    ratio_infimum(|x| lambda.value(1.0 - rho.value(1.0 - x)), lambda.mass(0), slope0)
}

/// The equivalent 1D recursion when local and joint degrees are regular, the
/// check distributions agree and every variable has joint edges.
pub fn reduces_to_1d(e: &LdpclEnsemble) -> Option<(DegreePolynomial, DegreePolynomial)> {
    let monomial = |p: &DegreePolynomial| match p.terms() {
        [(exp, _)] => Some(*exp),
        _ => None,
    };
    let same_rho = e.local.rho.terms().len() == e.joint.rho.terms().len()
        && e
            .local
            .rho
            .terms()
            .iter()
            .zip(e.joint.rho.terms())
            .all(|(a, b)| a.0 == b.0 && (a.1 - b.1).abs() <= 1e-15);
    if !same_rho || e.p0() != 0.0 {
        return None;
    }
    let a = monomial(&e.local.lambda)?;
    let b = monomial(&e.joint.lambda)?;
    Some((
        DegreePolynomial::monomial(Perspective::Edge, a + b + 1),
        e.local.rho.clone(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn irregular_example() -> LdpclEnsemble {
        let text = r#"{"M":4,"n":100,"local":{"lambda":[[2,1.0]],"rho":[[10,1.0]]},
            "joint":{"lambda":[[2,0.3396],[5,0.6604]],"rho":[[10,1.0]],"p0":0.2667}}"#;
        LdpclEnsemble::from_json(text).unwrap()
    }

    #[test]
    fn local_thresholds() {
        let t = local_threshold(&LocalEnsemble::regular(2, 6).unwrap());
        assert!((t - 0.2).abs() < 1e-9);
        let t = local_threshold(&LocalEnsemble::regular(2, 10).unwrap());
        assert!((t - 1.0 / 9.0).abs() < 1e-9);
        let t = local_threshold(&LocalEnsemble::regular(2, 2).unwrap());
        assert!((t - 1.0).abs() < 1e-9);
        // (3,6): known value 0.4294
        let t = one_d_threshold(
            &DegreePolynomial::monomial(Perspective::Edge, 2),
            &DegreePolynomial::monomial(Perspective::Edge, 5),
        );
        assert!((t - 0.42944).abs() < 1e-4, "{t}");
    }

    #[test]
    fn trivial_map_values() {
        let e = LdpclEnsemble::regular(1, 10, 2, 6, 1, 6).unwrap();
        assert!((e.f_map(0.3, 1.0, 1.0) - 0.3).abs() < 1e-15);
        assert!((e.g_map(0.3, 1.0, 1.0) - 0.3).abs() < 1e-15);
        assert_eq!(e.f_map(0.3, 0.4, 0.0), 0.0);
        assert_eq!(e.g_map(0.3, 0.0, 0.4), 0.0);
    }

    #[test]
    fn epsilon_loc_by_hand() {
        let e = irregular_example();
        // Lambda_J(z) = p0 + (1 - p0)(0.3396 z^2 / 2 + 0.6604 z^5 / 5) / (0.3396 / 2 + 0.6604 / 5)
        let z = 1.0 - 0.5f64.powi(9);
        let norm = 0.3396 / 2.0 + 0.6604 / 5.0;
        let big = 0.2667 + 0.7333 * (0.1698 * z * z + 0.13208 * z.powi(5)) / norm;
        assert!((e.epsilon_loc(0.35, 0.5) - 0.35 * big).abs() < 1e-14);
        assert!((e.epsilon_loc(0.35, 1.0) - 0.35).abs() < 1e-15);
        assert!((e.epsilon_loc(0.35, 0.0) - 0.35 * 0.2667).abs() < 1e-15);
        assert!((epsilon_loc(0.35, 0.5, &e.joint).unwrap() - e.epsilon_loc(0.35, 0.5)).abs() < 1e-15);
    }

    #[test]
    fn irregular_example_traces() {
        let e = irregular_example();
        assert!(run_2d_de(&e, 0.33, DeOptions::default()).converged());
        let t = run_2d_de(&e, 0.37, DeOptions::default());
        assert_eq!(t.status, DeStatus::Stuck);
        assert!((t.x_limit() - 0.335).abs() < 2e-3, "{}", t.x_limit());
        assert!((t.y_limit() - 0.3202).abs() < 2e-3, "{}", t.y_limit());
    }

    #[test]
    fn zero_channel_converges_at_once() {
        let e = irregular_example();
        let t = run_2d_de(&e, 0.0, DeOptions::default());
        assert!(t.converged());
        assert_eq!(t.points.len(), 2);
        assert_eq!(t.points[0], DePoint { iter: -1, x: 1.0, y: 1.0 });
    }

    #[test]
    fn one_d_examples() {
        let lambda = DegreePolynomial::monomial(Perspective::Edge, 2);
        let rho = DegreePolynomial::monomial(Perspective::Edge, 5);
        assert!(run_1d_de(&lambda, &rho, 0.40, DeOptions::default()).converged());
        assert_eq!(run_1d_de(&lambda, &rho, 0.45, DeOptions::default()).status, DeStatus::Stuck);
    }

    #[test]
    fn reduction_to_1d() {
        let (l, r) = reduces_to_1d(&LdpclEnsemble::regular(1, 1, 2, 6, 1, 6).unwrap()).unwrap();
        assert_eq!(l.terms(), &[(2, 1.0)]);
        assert_eq!(r.terms(), &[(5, 1.0)]);
        let (l, _) = reduces_to_1d(&LdpclEnsemble::regular(1, 1, 3, 6, 2, 6).unwrap()).unwrap();
        assert_eq!(l.terms(), &[(4, 1.0)]);
        assert!(reduces_to_1d(&irregular_example()).is_none());
    }
}
