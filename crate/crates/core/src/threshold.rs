//! Global threshold from the fixed-point characterization, a DE bisection
//! oracle, and a fixed-point finder.

use serde::Serialize;

use crate::density_evolution::{de_summary, golden_min, largest_fixed_point, local_threshold, unit_grid, DeOptions};
use crate::ensembles::{JointEnsemble, LdpclEnsemble, LocalEnsemble};
use crate::error::{Error, Result};

const Q_GRID: usize = 10_000;
const Y_GRID: usize = 10_000;

/// `q_L(x) = x Lambda_L(u) / lambda_L(u)` with `u = 1 - rho_L(1 - x)`.
pub fn q_l(x: f64, local: &LocalEnsemble) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            name: "x",
            value: x,
            domain: "(0, 1]",
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let node = local.lambda.edge_to_node(0.0)?;
    q_l_with(x, local, &node)
}

fn q_l_with(x: f64, local: &LocalEnsemble, node: &crate::ensembles::DegreePolynomial) -> Result<f64> {
    let u = 1.0 - local.rho.value(1.0 - x);
    let l = local.lambda.value(u);
    if l <= 0.0 {
        return Err(Error::Degenerate(format!("lambda_L(1 - rho_L(1 - x)) = 0 at x = {x}")));
    }
    Ok(x * node.value(u) / l)
}

/// `q_J(y) = y Lambda_J(v) / lambda_J(v)` with `v = 1 - rho_J(1 - y)`; `+inf`
/// where the denominator vanishes.
pub fn q_j(y: f64, joint: &JointEnsemble) -> f64 {
    match joint.lambda.edge_to_node(joint.p0) {
        Ok(node) => q_j_with(y, joint, &node),
        Err(_) => f64::NAN,
    }
}

fn q_j_with(y: f64, joint: &JointEnsemble, node: &crate::ensembles::DegreePolynomial) -> f64 {
    let v = 1.0 - joint.rho.value(1.0 - y);
    let l = joint.lambda.value(v);
    let big = node.value(v);
    if l > 0.0 {
        y * big / l
    } else if big > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Precomputed `q_L` on a grid for repeated evaluation of `q(y)`.
pub struct QCurve<'a> {
    e: &'a LdpclEnsemble,
    grid: Vec<f64>,
    q_grid: Vec<f64>,
}

impl<'a> QCurve<'a> {
    pub fn new(e: &'a LdpclEnsemble) -> Self {
        let grid: Vec<f64> = (0..=Q_GRID).map(|i| i as f64 / Q_GRID as f64).collect();
        let q_grid = grid.iter().map(|&x| Self::q_l_raw(e, x)).collect();
        Self { e, grid, q_grid }
    }

    fn q_l_raw(e: &LdpclEnsemble, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        q_l_with(x, &e.local, e.local_node()).unwrap_or(f64::INFINITY)
    }

    pub fn q_l(&self, x: f64) -> f64 {
        Self::q_l_raw(self.e, x)
    }

    pub fn q_j(&self, y: f64) -> f64 {
        q_j_with(y, &self.e.joint, self.e.joint_node())
    }

    /// Largest `x` with `q_L(x) = q_J(y)`.
    pub fn q_of_y(&self, y: f64) -> Result<f64> {
        let t = self.q_j(y);
        if !(t <= 1.0) {
            return Err(Error::Precondition(format!("q_J({y}) = {t} exceeds 1")));
        }
        Ok(self.largest_root(t))
    }

    fn largest_root(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let n = self.grid.len();
        if self.q_grid[n - 1] - t <= 0.0 {
            return 1.0;
        }
        for i in (0..n - 1).rev() {
            let d = self.q_grid[i] - t;
            if d == 0.0 {
                return self.grid[i];
            }
            if d < 0.0 {
                let (mut lo, mut hi) = (self.grid[i], self.grid[i + 1]);
                while hi - lo > 1e-12 {
                    let mid = 0.5 * (lo + hi);
                    if self.q_l(mid) - t < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return 0.5 * (lo + hi);
            }
        }
        0.0
    }

    /// `y / g(1, q(y), y)`, or `+inf` outside `{q_J(y) <= 1}`.
    fn threshold_ratio(&self, y: f64) -> f64 {
        match self.q_of_y(y) {
            Ok(x) => {
                let g = self.e.g_map(1.0, x, y);
                if g > 0.0 {
                    y / g
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        }
    }

    /// `eps g(1, q(y), y) - y`; zero exactly at fixed points on the q-curve.
    fn fixed_point_gap(&self, eps: f64, y: f64) -> Option<f64> {
        self.q_of_y(y).ok().map(|x| eps * self.e.g_map(1.0, x, y) - y)
    }
}

pub fn q_of_y(y: f64, e: &LdpclEnsemble) -> Result<f64> {
    QCurve::new(e).q_of_y(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdBranch {
    QFormula,
    P0Branch,
    MinOfBoth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointKind {
    Trivial,
    /// Plain `(f, g)` iteration stays at the point.
    Attracting,
    /// Located by root finding only; iteration drifts away.
    Unpolished,
    /// Near-double root where the two fixed-point curves touch.
    Tangent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint {
    pub x: f64,
    pub y: f64,
    pub residual: f64,
    pub kind: FixedPointKind,
}

impl FixedPoint {
    pub fn is_trivial(&self) -> bool {
        self.kind == FixedPointKind::Trivial
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub eps_star: f64,
    pub branch: ThresholdBranch,
    /// Infimum of `y / g(1, q(y), y)`; absent when no `y` has `q_J(y) <= 1`.
    pub formula_value: Option<f64>,
    /// `eps*_L / p0`, when that branch applies.
    pub p0_value: Option<f64>,
    pub admissible_set_empty: bool,
    /// A nontrivial fixed point slightly above the threshold.
    pub witness: Option<FixedPoint>,
}

const WITNESS_OFFSET: f64 = 1e-3;

pub fn global_threshold(e: &LdpclEnsemble) -> ThresholdReport {
    let p0 = e.p0();
    let p0_branch_applies = p0 > 0.0 && e.joint.lambda.mass(0) == 0.0;
    let p0_value = p0_branch_applies.then(|| (local_threshold(&e.local) / p0).min(1.0));
    let formula_value = if p0 >= 1.0 { None } else { formula_infimum(e) };
    let (eps_star, branch) = match (formula_value, p0_value) {
        (Some(f), None) => (f, ThresholdBranch::QFormula),
        (None, Some(p)) => (p, ThresholdBranch::P0Branch),
        (Some(f), Some(p)) => (f.min(p), ThresholdBranch::MinOfBoth),
        (None, None) => (1.0, ThresholdBranch::QFormula),
    };
    let eps_star = eps_star.min(1.0);
    let witness = (eps_star + WITNESS_OFFSET <= 1.0)
        .then(|| {
            find_fixed_points(e, eps_star + WITNESS_OFFSET, 1000)
                .into_iter()
                .filter(|p| !p.is_trivial())
                .max_by(|a, b| a.x.total_cmp(&b.x))
        })
        .flatten();
    ThresholdReport {
        eps_star,
        branch,
        formula_value,
        p0_value,
        admissible_set_empty: formula_value.is_none(),
        witness,
    }
}

fn formula_infimum(e: &LdpclEnsemble) -> Option<f64> {
    let curve = QCurve::new(e);
    let grid = unit_grid(Y_GRID, 1e-6);
    let values: Vec<f64> = grid.iter().map(|&y| curve.threshold_ratio(y)).collect();
    let (best, best_value) = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    if !best_value.is_finite() {
        return None;
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (_, refined) = golden_min(|y| curve.threshold_ratio(y), lo, hi, 1e-10);
    Some(refined.min(best_value))
}

/// Bisection on `eps` using DE convergence from `(1, 1)`.
pub fn threshold_by_bisection(e: &LdpclEnsemble, tol: f64) -> f64 {
    bisect_threshold(|eps| de_summary(e, eps, DeOptions::default()).converged(), tol)
}

/// Bisection on `[0, 1]` for the boundary of a monotone success predicate.
pub fn bisect_threshold(succeeds: impl Fn(f64) -> bool, tol: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    if succeeds(hi) {
        return 1.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if succeeds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const POLISH_ITERS: usize = 2000;
/// A local maximum of the gap this close to zero is reported as a tangency;
/// at the threshold the double root cannot be resolved more finely.
const TANGENT_TOL: f64 = 1e-5;
const POLISH_TOL: f64 = 1e-7;

/// All solutions of `x = f(eps, x, y)`, `y = g(eps, x, y)`, starting with the
/// trivial point `(0, 0)`, ordered by decreasing `y`.
pub fn find_fixed_points(e: &LdpclEnsemble, eps: f64, grid: usize) -> Vec<FixedPoint> {
    let grid = grid.max(100);
    let curve = QCurve::new(e);
    let ys: Vec<f64> = (1..=grid).map(|k| k as f64 / grid as f64).collect();
    let gaps: Vec<Option<f64>> = ys.iter().map(|&y| curve.fixed_point_gap(eps, y)).collect();

    let mut roots: Vec<f64> = Vec::new();
    let mut tangents: Vec<f64> = Vec::new();
    for k in 0..ys.len() - 1 {
        let (Some(a), Some(b)) = (gaps[k], gaps[k + 1]) else {
            continue;
        };
        if a == 0.0 {
            roots.push(ys[k]);
        } else if a * b < 0.0 {
            roots.push(bisect_gap(&curve, eps, ys[k], ys[k + 1], a));
        }
        // a tangency shows up as a local maximum of the gap just below zero
        if k > 0 {
            if let Some(prev) = gaps[k - 1] {
                let local_max = b < 0.0 && a < 0.0 && prev < 0.0 && a >= prev && a >= b;
                if local_max {
                    let neg = |y: f64| -curve.fixed_point_gap(eps, y).unwrap_or(f64::NEG_INFINITY);
                    let (y_max, neg_max) = golden_min(neg, ys[k - 1], ys[k + 1], 1e-12);
                    if -neg_max >= -TANGENT_TOL {
                        tangents.push(y_max);
                    }
                }
            }
        }
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-6);

    let mut points = vec![FixedPoint {
        x: 0.0,
        y: 0.0,
        residual: 0.0,
        kind: FixedPointKind::Trivial,
    }];
    for y in roots {
        let x = curve.q_of_y(y).unwrap_or(0.0);
        if x > 0.0 {
            points.push(classify(e, eps, x, y));
        }
    }
    for y in tangents {
        let x = curve.q_of_y(y).unwrap_or(0.0);
        if x > 0.0 && !points.iter().any(|p| (p.y - y).abs() < 1e-6) {
            points.push(FixedPoint {
                x,
                y,
                residual: residual(e, eps, x, y),
                kind: FixedPointKind::Tangent,
            });
        }
    }
    points[1..].sort_by(|a, b| b.y.total_cmp(&a.y));
    // variables without joint edges can stall on their own when no joint
    // check can ever resolve them
    if e.p0() > 0.0 && e.joint.lambda.mass(0) == 0.0 {
        let x0 = largest_fixed_point(|x| e.local.response(x), eps * e.p0());
        if x0 > 0.0 {
            points.push(classify(e, eps, x0, 0.0));
        }
    }
    points
}

fn bisect_gap(curve: &QCurve<'_>, eps: f64, mut lo: f64, mut hi: f64, gap_lo: f64) -> f64 {
    let sign_lo = gap_lo.signum();
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        match curve.fixed_point_gap(eps, mid) {
            Some(g) if g.signum() == sign_lo => lo = mid,
            _ => hi = mid,
        }
    }
    0.5 * (lo + hi)
}

fn residual(e: &LdpclEnsemble, eps: f64, x: f64, y: f64) -> f64 {
    (x - e.f_map(eps, x, y)).abs().max((y - e.g_map(eps, x, y)).abs())
}

fn classify(e: &LdpclEnsemble, eps: f64, x: f64, y: f64) -> FixedPoint {
    let (mut px, mut py) = (x, y);
    for _ in 0..POLISH_ITERS {
        let nx = e.f_map(eps, px, py);
        let ny = e.g_map(eps, px, py);
        px = nx;
        py = ny;
    }
    let stays = (px - x).abs().max((py - y).abs()) < POLISH_TOL;
    let (x, y, kind) = if stays {
        (px, py, FixedPointKind::Attracting)
    } else {
        (x, y, FixedPointKind::Unpolished)
    };
    FixedPoint {
        x,
        y,
        residual: residual(e, eps, x, y),
        kind,
    }
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
    fn q_l_values() {
        let local = LocalEnsemble::regular(2, 10).unwrap();
        assert!((q_l(1.0, &local).unwrap() - 1.0).abs() < 1e-15);
        let expect = 0.5 * (1.0 - 0.5f64.powi(9));
        assert!((q_l(0.5, &local).unwrap() - expect).abs() < 1e-15);
        assert!(q_l(1e-9, &local).unwrap() < 1e-8);
    }

    #[test]
    fn q_j_diverges_with_p0() {
        use crate::ensembles::{DegreePolynomial, Perspective};
        let joint = JointEnsemble::new(
            DegreePolynomial::monomial(Perspective::Edge, 2),
            DegreePolynomial::monomial(Perspective::Edge, 3),
            0.3,
        )
        .unwrap();
        assert!((q_j(1.0, &joint) - 1.0).abs() < 1e-15);
        assert!(q_j(1e-6, &joint) > 1e3);
        assert_eq!(q_j(0.0, &joint), f64::INFINITY);
    }

    #[test]
    fn q_of_y_on_irregular_example() {
        let e = irregular_example();
        let curve = QCurve::new(&e);
        assert!((curve.q_of_y(1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((curve.q_of_y(0.3202).unwrap() - 0.335).abs() < 2e-3);
    }

    #[test]
    fn q_of_y_inverts_injective_q_l() {
        let e = LdpclEnsemble::regular(1, 1, 2, 6, 1, 6).unwrap();
        let curve = QCurve::new(&e);
        for y in [0.1, 0.3, 0.7] {
            let x = curve.q_of_y(y).unwrap();
            assert!((curve.q_l(x) - curve.q_j(y)).abs() < 1e-10);
        }
    }

    #[test]
    fn thresholds_of_examples() {
        let t = global_threshold(&LdpclEnsemble::regular(1, 1, 2, 6, 1, 6).unwrap());
        assert!((t.eps_star - 0.4294).abs() < 5e-4, "{t:?}");
        assert_eq!(t.branch, ThresholdBranch::QFormula);
        let t = global_threshold(&irregular_example());
        assert!((t.eps_star - 0.35).abs() < 1e-3, "{t:?}");
    }

    #[test]
    fn p0_one_leaves_the_local_code() {
        use crate::ensembles::{DegreePolynomial, Perspective};
        let joint = JointEnsemble::new(
            DegreePolynomial::monomial(Perspective::Edge, 1),
            DegreePolynomial::monomial(Perspective::Edge, 5),
            1.0,
        )
        .unwrap();
        let e = LdpclEnsemble::new(1, 1, LocalEnsemble::regular(2, 6).unwrap(), joint).unwrap();
        let t = global_threshold(&e);
        assert!((t.eps_star - 0.2).abs() < 1e-9);
        assert_eq!(t.branch, ThresholdBranch::P0Branch);
    }

    #[test]
    fn irregular_example_fixed_points() {
        let e = irregular_example();
        let pts = find_fixed_points(&e, 0.37, 1000);
        let nontrivial: Vec<_> = pts.iter().filter(|p| !p.is_trivial()).collect();
        assert_eq!(nontrivial.len(), 2, "{pts:?}");
        assert!((nontrivial[0].x - 0.335).abs() < 2e-3 && (nontrivial[0].y - 0.3202).abs() < 2e-3);
        assert!((nontrivial[1].x - 0.2266).abs() < 2e-3 && (nontrivial[1].y - 0.1795).abs() < 2e-3);
        assert_eq!(nontrivial[0].kind, FixedPointKind::Attracting);
        let pts = find_fixed_points(&e, 0.33, 1000);
        assert_eq!(pts.len(), 1);
        let pts = find_fixed_points(&e, 0.35, 1000);
        assert_eq!(pts.len(), 2, "{pts:?}");
        assert_eq!(pts[1].kind, FixedPointKind::Tangent);
        assert!((pts[1].x - 0.2719).abs() < 1e-3 && (pts[1].y - 0.2430).abs() < 1e-3);
    }
}
