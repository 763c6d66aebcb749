//! Local degree-distribution design by alternating linear programs: `lambda`
//! for fixed `rho`, then `rho` for fixed `lambda`, under the local threshold
//! constraint at `eps_L` and a stuck-point constraint at `eps_G`.

use rayon::prelude::*;
use serde::Serialize;

use crate::construction::{low_local_ensemble, optimize_rhat, rate_bound, stuck_point};
use crate::density_evolution::local_threshold;
use crate::ensembles::{DegreePolynomial, LocalEnsemble, Perspective};
use crate::error::{Error, Result};

use super::simplex::{solve, LpProblem, LpSolution, Sense};

pub const DEFAULT_GRID: usize = 512;
const MAX_ROUNDS: usize = 20;
const ROUND_TOL: f64 = 1e-9;
const VIOLATION_TOL: f64 = 1e-9;
const REFINEMENTS: usize = 6;

/// Chebyshev-Lobatto points on `[a, b]`; the left end is dropped when `a = 0`.
pub fn chebyshev_grid(a: f64, b: f64, points: usize) -> Vec<f64> {
    let start = usize::from(a == 0.0);
    (start..=points)
        .map(|k| {
            let t = (1.0 - (std::f64::consts::PI * k as f64 / points as f64).cos()) / 2.0;
            a + (b - a) * t
        })
        .collect()
}

fn check_design_args(eps_l: f64, eps_g: f64, x_s: f64) -> Result<()> {
    if !(0.0 < eps_l && eps_l < eps_g && eps_g < 1.0) {
        return Err(Error::Precondition(format!(
            "need 0 < eps_L < eps_G < 1, got ({eps_l}, {eps_g})"
        )));
    }
    if !(0.0 < x_s && x_s < 1.0) {
        return Err(Error::Domain {
            name: "x_s",
            value: x_s,
            domain: "(0, 1)",
        });
    }
    Ok(())
}

fn simplex_solution(p: &LpProblem, what: &str) -> Result<Vec<f64>> {
    match solve(p)? {
        LpSolution::Optimal { x, .. } => {
            let clean: Vec<f64> = x.into_iter().map(|v| v.max(0.0)).collect();
            let total: f64 = clean.iter().sum();
            Ok(clean.into_iter().map(|v| v / total).collect())
        }
        LpSolution::Infeasible => Err(Error::Infeasible(format!("{what} program is infeasible"))),
        LpSolution::Unbounded => Err(Error::Numerical(format!("{what} program is unbounded"))),
    }
}

/// Distribution over degrees `2..=max_degree` from LP variables.
fn polynomial(masses: &[f64]) -> Result<DegreePolynomial> {
    DegreePolynomial::normalized(
        Perspective::Edge,
        masses.iter().enumerate().map(|(k, &m)| (k as u32 + 1, m)),
    )
}

/// Rows `eps u(x)^{i-1} / x <= 1` for each `x`, with `u(x) = 1 - rho(1 - x)`.
fn lambda_rows(p: &mut LpProblem, rho: &DegreePolynomial, eps: f64, xs: &[f64]) {
    let n = p.num_vars();
    for &x in xs {
        let u = 1.0 - rho.value(1.0 - x);
        let mut power = u;
        let row = (0..n)
            .map(|_| {
                let v = eps * power / x;
                power *= u;
                v
            })
            .collect();
        p.less_eq(row, 1.0);
    }
}

/// Largest violation of `eps lambda(1 - rho(1 - x)) <= x` over `xs`, with the points that violate.
fn lambda_violations(
    lambda: &DegreePolynomial,
    rho: &DegreePolynomial,
    eps: f64,
    xs: &[f64],
) -> (f64, Vec<f64>) {
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for &x in xs {
        let h = eps * lambda.value(1.0 - rho.value(1.0 - x)) - x;
        worst = worst.max(h);
        if h > VIOLATION_TOL {
            bad.push(x);
        }
    }
    (worst, bad)
}

/// Maximizes `sum lambda_i / i` over degrees `2..=l_max` subject to
/// `eps_L lambda(1 - rho(1 - x)) <= x` on `(0, 1]` and the same with `eps_G`
/// on `(x_s, 1]`.
pub fn optimize_lambda(
    rho: &DegreePolynomial,
    eps_l: f64,
    eps_g: f64,
    x_s: f64,
    l_max: u32,
    grid: usize,
) -> Result<DegreePolynomial> {
    check_design_args(eps_l, eps_g, x_s)?;
    if l_max < 2 {
        return Err(Error::Precondition("l_max must be at least 2".into()));
    }
    let n = (l_max - 1) as usize;
    let objective: Vec<f64> = (2..=l_max).map(|i| 1.0 / i as f64).collect();
    let mut low: Vec<f64> = chebyshev_grid(0.0, 1.0, grid);
    let mut high: Vec<f64> = chebyshev_grid(x_s, 1.0, grid);
    let fine_low = chebyshev_grid(0.0, 1.0, 10 * grid);
    let fine_high = chebyshev_grid(x_s, 1.0, 10 * grid);
    for _ in 0..=REFINEMENTS {
        let mut p = LpProblem::new(objective.clone(), Sense::Maximize);
        p.equal(vec![1.0; n], 1.0);
        // x -> 0 limit of the threshold rows
        let mut stability = vec![0.0; n];
        stability[0] = eps_l * rho.derivative(1.0);
        p.less_eq(stability, 1.0);
        lambda_rows(&mut p, rho, eps_l, &low);
        lambda_rows(&mut p, rho, eps_g, &high);
        let lambda = polynomial(&simplex_solution(&p, "lambda")?)?;
        let (_, bad_low) = lambda_violations(&lambda, rho, eps_l, &fine_low);
        let (_, bad_high) = lambda_violations(&lambda, rho, eps_g, &fine_high);
        if bad_low.is_empty() && bad_high.is_empty() {
            return Ok(lambda);
        }
        low = refine(&low, &bad_low);
        high = refine(&high, &bad_high);
    }
    Err(Error::Numerical("lambda program still violates its constraints after refinement".into()))
}

/// Adds the violating points to a grid.
fn refine(grid: &[f64], bad: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = grid.to_vec();
    out.extend_from_slice(bad);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Rows `sum rho_i (1 - v(z)^{i-1}) / z <= 1` with `v(z) = 1 - eps lambda(z)`,
/// equivalent to `1 - z - rho(1 - eps lambda(z)) <= 0` on the simplex.
fn rho_rows(p: &mut LpProblem, lambda: &DegreePolynomial, eps: f64, zs: &[f64]) {
    let n = p.num_vars();
    for &z in zs {
        let v = 1.0 - eps * lambda.value(z);
        let mut power = v;
        let row = (0..n)
            .map(|_| {
                let r = (1.0 - power) / z;
                power *= v;
                r
            })
            .collect();
        p.less_eq(row, 1.0);
    }
}

fn rho_violations(lambda: &DegreePolynomial, rho: &DegreePolynomial, eps: f64, zs: &[f64]) -> Vec<f64> {
    zs.iter()
        .copied()
        .filter(|&z| 1.0 - z - rho.value(1.0 - eps * lambda.value(z)) > VIOLATION_TOL)
        .collect()
}

/// Inverse of a nondecreasing `lambda` on `[0, 1]` by bisection.
pub fn invert(lambda: &DegreePolynomial, target: f64) -> Result<f64> {
    if !(lambda.value(0.0)..=lambda.value(1.0)).contains(&target) {
        return Err(Error::Domain {
            name: "x_s / eps_G",
            value: target,
            domain: "range of lambda_L",
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if lambda.value(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Minimizes `sum rho_i / i` over degrees `2..=r_max` subject to
/// `1 - z - rho(1 - eps_L lambda(z)) <= 0` on `(0, 1]` and the same with
/// `eps_G` on `(lambda^{-1}(x_s / eps_G), 1]`.
pub fn optimize_rho(
    lambda: &DegreePolynomial,
    eps_l: f64,
    eps_g: f64,
    x_s: f64,
    r_max: u32,
    grid: usize,
) -> Result<DegreePolynomial> {
    check_design_args(eps_l, eps_g, x_s)?;
    if r_max < 2 {
        return Err(Error::Precondition("r_max must be at least 2".into()));
    }
    let z0 = invert(lambda, x_s / eps_g)?;
    let n = (r_max - 1) as usize;
    let objective: Vec<f64> = (2..=r_max).map(|i| 1.0 / i as f64).collect();
    let mut low = chebyshev_grid(0.0, 1.0, grid);
    let mut high = chebyshev_grid(z0, 1.0, grid);
    high.retain(|&z| z > 0.0);
    let fine_low = chebyshev_grid(0.0, 1.0, 10 * grid);
    let mut fine_high = chebyshev_grid(z0, 1.0, 10 * grid);
    fine_high.retain(|&z| z > 0.0);
    let slope0 = lambda.mass(1);
    for _ in 0..=REFINEMENTS {
        let mut p = LpProblem::new(objective.clone(), Sense::Minimize);
        p.equal(vec![1.0; n], 1.0);
        if slope0 > 0.0 {
            p.less_eq((0..n).map(|k| eps_l * slope0 * (k + 1) as f64).collect(), 1.0);
        }
        rho_rows(&mut p, lambda, eps_l, &low);
        rho_rows(&mut p, lambda, eps_g, &high);
        let rho = polynomial(&simplex_solution(&p, "rho")?)?;
        let bad_low = rho_violations(lambda, &rho, eps_l, &fine_low);
        let bad_high = rho_violations(lambda, &rho, eps_g, &fine_high);
        if bad_low.is_empty() && bad_high.is_empty() {
            return Ok(rho);
        }
        low = refine(&low, &bad_low);
        high = refine(&high, &bad_high);
    }
    Err(Error::Numerical("rho program still violates its constraints after refinement".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpLocalDesign {
    pub local: LocalEnsemble,
    pub x_s_target: f64,
    pub achieved_eps_l: f64,
    /// Stuck point of the design at `eps_G` (zero if it decodes there).
    pub achieved_x_s: f64,
    pub rate_bound: f64,
    /// Scores of the accepted alternation rounds, non-decreasing.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub label: String,
    pub x_s: f64,
    pub rate_bound: Option<f64>,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpDesignReport {
    pub best: LpLocalDesign,
    pub candidates: Vec<CandidateScore>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpDesignParams {
    pub eps_l: f64,
    pub eps_g: f64,
    pub l_max: u32,
    pub r_max: u32,
    pub grid: usize,
}

impl LpDesignParams {
    pub fn new(eps_l: f64, eps_g: f64, l_max: u32, r_max: u32) -> Self {
        Self {
            eps_l,
            eps_g,
            l_max,
            r_max,
            grid: DEFAULT_GRID,
        }
    }
}

/// Rate bound with `p0 = eps_L / eps_G` and joint threshold `eps_G a_s(eps_G)`,
/// or `None` if the design misses the local threshold.
pub fn score_design(local: &LocalEnsemble, eps_l: f64, eps_g: f64) -> Option<(f64, f64, f64)> {
    let achieved = local_threshold(local);
    if achieved < eps_l - 1e-4 {
        return None;
    }
    let (x_s, a_s) = match stuck_point(local, eps_g) {
        Ok(sp) => (sp.x_s, sp.a_s),
        Err(_) => (0.0, 0.0),
    };
    Some((rate_bound(local, eps_g * a_s, eps_l / eps_g), achieved, x_s))
}

fn evaluate(
    lambda: &DegreePolynomial,
    rho: &DegreePolynomial,
    params: &LpDesignParams,
    x_s_target: f64,
) -> Option<LpLocalDesign> {
    let local = LocalEnsemble::new(lambda.clone(), rho.clone()).ok()?;
    let (score, achieved_eps_l, achieved_x_s) = score_design(&local, params.eps_l, params.eps_g)?;
    Some(LpLocalDesign {
        local,
        x_s_target,
        achieved_eps_l,
        achieved_x_s,
        rate_bound: score,
        history: vec![score],
    })
}

/// Alternates the two programs from `rho`, scoring after every `lambda` step
/// and stopping at the first round that does not improve.
fn alternate_from(
    params: &LpDesignParams,
    x_s: f64,
    mut rho: DegreePolynomial,
    mut best: Option<LpLocalDesign>,
) -> (Option<LpLocalDesign>, usize) {
    let mut rounds = 0;
    for _ in 0..MAX_ROUNDS {
        let Ok(lambda) = optimize_lambda(&rho, params.eps_l, params.eps_g, x_s, params.l_max, params.grid) else {
            break;
        };
        rounds += 1;
        let Some(design) = evaluate(&lambda, &rho, params, x_s) else {
            break;
        };
        let previous = best.as_ref().map(|b| b.rate_bound);
        match previous {
            Some(prev) if design.rate_bound < prev + ROUND_TOL => {
                break;
            }
            _ => {
                let mut history = best.map(|b| b.history).unwrap_or_default();
                history.push(design.rate_bound);
                best = Some(LpLocalDesign { history, ..design });
            }
        }
        match optimize_rho(&lambda, params.eps_l, params.eps_g, x_s, params.r_max, params.grid) {
            Ok(next) => rho = next,
            Err(_) => break,
        }
    }
    (best, rounds)
}

/// Runs the alternation for every `x_s` candidate and returns the best design.
///
/// Each candidate starts from the densest feasible check monomial. When degrees 3 and 4 are
/// available, the best closed-form `lambda = x` design is added as a further
/// starting point, so the result is never worse than it.
pub fn alternate_optimize(params: &LpDesignParams, x_s_grid: &[f64]) -> Result<LpDesignReport> {
    if !(0.0 < params.eps_l && params.eps_l < params.eps_g && params.eps_g < 1.0) {
        return Err(Error::Precondition(format!(
            "need 0 < eps_L < eps_G < 1, got ({}, {})",
            params.eps_l, params.eps_g
        )));
    }
    let mut runs: Vec<(String, f64, Option<LpLocalDesign>, usize)> = x_s_grid
        .par_iter()
        .map(|&x_s| {
            let (design, rounds) = match feasible_start(params, x_s) {
                Some(rho) => alternate_from(params, x_s, rho, None),
                None => (None, 0),
            };
            (format!("x_s={x_s}"), x_s, design, rounds)
        })
        .collect();
    if params.r_max >= 4 {
        if let Some(seed) = low_degree_seed(params) {
            let x_s = seed.achieved_x_s;
            let rho = seed.local.rho.clone();
            let (design, rounds) = if x_s > 0.0 {
                alternate_from(params, x_s, rho, Some(seed))
            } else {
                (Some(seed), 0)
            };
            runs.push(("low-degree seed".into(), x_s, design, rounds));
        }
    }
    let candidates = runs
        .iter()
        .map(|(label, x_s, d, rounds)| CandidateScore {
            label: label.clone(),
            x_s: *x_s,
            rate_bound: d.as_ref().map(|d| d.rate_bound),
            rounds: *rounds,
        })
        .collect();
    let best = runs
        .into_iter()
        .filter_map(|r| r.2)
        .max_by(|a, b| a.rate_bound.total_cmp(&b.rate_bound))
        .ok_or_else(|| Error::Infeasible("no x_s candidate admits a feasible design".into()))?;
    Ok(LpDesignReport { best, candidates })
}

/// Highest-degree check monomial `x^{k}` for which the `lambda` program is
/// feasible. `rho = x` always is, since then the constraints read
/// `eps lambda(x) <= x`.
fn feasible_start(params: &LpDesignParams, x_s: f64) -> Option<DegreePolynomial> {
    (1..params.r_max).rev().map(|k| DegreePolynomial::monomial(Perspective::Edge, k)).find(|rho| {
        optimize_lambda(rho, params.eps_l, params.eps_g, x_s, params.l_max, params.grid).is_ok()
    })
}

/// The optimal `lambda = x` design with check degrees 2, 3 and 4.
fn low_degree_seed(params: &LpDesignParams) -> Option<LpLocalDesign> {
    let opt = optimize_rhat(params.eps_l, params.eps_g).ok()?;
    let local = low_local_ensemble(opt.rho3, opt.rho4).ok()?;
    let mut d = evaluate(&local.lambda, &local.rho, params, 0.0)?;
    d.x_s_target = d.achieved_x_s;
    Some(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l_max_two_forces_lambda_x() {
        let rho = DegreePolynomial::monomial(Perspective::Edge, 5);
        let lambda = optimize_lambda(&rho, 0.1, 0.2, 0.3, 2, 64).unwrap();
        assert_eq!(lambda.terms(), &[(1, 1.0)]);
    }

    #[test]
    fn r_max_two_forces_rho_x() {
        let lambda = DegreePolynomial::monomial(Perspective::Edge, 1);
        let rho = optimize_rho(&lambda, 0.2, 0.4, 0.3, 2, 64);
        // rho = x makes the local threshold 1, so the program is feasible
        assert_eq!(rho.unwrap().terms(), &[(1, 1.0)]);
    }

    #[test]
    fn inverse_of_identity() {
        let lambda = DegreePolynomial::monomial(Perspective::Edge, 1);
        assert!((invert(&lambda, 0.37).unwrap() - 0.37).abs() < 1e-15);
        assert!(invert(&lambda, 1.5).is_err());
    }
}
