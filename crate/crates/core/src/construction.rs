//! Stuck-point quantities and the joint-ensemble construction that turns a
//! local code with threshold `eps_L` into a two-sided code with global
//! threshold `eps_G`.

use serde::Serialize;

use crate::density_evolution::{largest_fixed_point, local_threshold, one_d_threshold};
use crate::ensembles::{DegreePolynomial, JointEnsemble, LdpclEnsemble, LocalEnsemble, Perspective};
use crate::error::{Error, Result};
use crate::threshold::global_threshold;

pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-12;

/// `h_eps(x) = eps lambda_L(1 - rho_L(1 - x)) - x`.
pub fn h_eps(local: &LocalEnsemble, eps: f64, x: f64) -> f64 {
    eps * local.response(x) - x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StuckPoint {
    pub epsilon: f64,
    /// Largest `x` with `h_eps(x) >= 0`: where the local decoder stops.
    pub x_s: f64,
    /// `Lambda_L(1 - rho_L(1 - x_s))`, the fraction of variables left erased.
    pub a_s: f64,
}

pub fn stuck_point(local: &LocalEnsemble, eps: f64) -> Result<StuckPoint> {
    let eps_l = local_threshold(local);
    if eps <= eps_l || eps > 1.0 {
        return Err(Error::Precondition(format!(
            "stuck point needs eps in ({eps_l}, 1], got {eps}"
        )));
    }
    Ok(stuck_point_unchecked(local, eps))
}

fn stuck_point_unchecked(local: &LocalEnsemble, eps: f64) -> StuckPoint {
    let x_s = largest_fixed_point(|x| local.response(x), eps);
    let node = local.lambda.edge_to_node(0.0).expect("edge polynomial");
    StuckPoint {
        epsilon: eps,
        x_s,
        a_s: node.value(1.0 - local.rho.value(1.0 - x_s)),
    }
}

/// Local codes with `lambda = x` and checks of degree 2, 3 and 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowLocal {
    pub eps_l: f64,
    pub x_s: f64,
    pub a_s: f64,
}

pub fn low_local_threshold(rho3: f64, rho4: f64) -> f64 {
    1.0 / (1.0 + rho3 + 2.0 * rho4)
}

/// Closed forms for `lambda = x`, `rho = (1 - rho3 - rho4) x + rho3 x^2 + rho4 x^3`.
pub fn low_local_closed_forms(rho3: f64, rho4: f64, eps: f64) -> Result<LowLocal> {
    if rho3 < 0.0 || rho4 < 0.0 || rho3 + rho4 > 1.0 + 1e-12 {
        return Err(Error::Domain {
            name: "rho3 + rho4",
            value: rho3 + rho4,
            domain: "rho3, rho4 >= 0 and rho3 + rho4 <= 1",
        });
    }
    let eps_l = low_local_threshold(rho3, rho4);
    if eps <= eps_l || eps > 1.0 {
        return Err(Error::Domain {
            name: "epsilon",
            value: eps,
            domain: "(eps_L, 1]",
        });
    }
    let x_s = low_local_x_s(rho3, rho4, eps);
    Ok(LowLocal {
        eps_l,
        x_s,
        a_s: (x_s / eps).powi(2),
    })
}

fn low_local_x_s(rho3: f64, rho4: f64, eps: f64) -> f64 {
    let c = 1.0 / eps - 1.0;
    if rho4 == 0.0 {
        1.0 - c / rho3
    } else {
        let s = rho3 + rho4;
        (rho3 + 3.0 * rho4 - (s * s + 4.0 * rho4 * c).sqrt()) / (2.0 * rho4)
    }
}

pub fn low_local_ensemble(rho3: f64, rho4: f64) -> Result<LocalEnsemble> {
    LocalEnsemble::new(
        DegreePolynomial::monomial(Perspective::Edge, 1),
        DegreePolynomial::normalized(
            Perspective::Edge,
            [(1, (1.0 - rho3 - rho4).max(0.0)), (2, rho3), (3, rho4)],
        )?,
    )
}

/// `1 - int rho_L / int lambda_L - eps_J (1 - p0)`.
pub fn rate_bound(local: &LocalEnsemble, eps_j: f64, p0: f64) -> f64 {
    local.design_rate() - eps_j * (1.0 - p0)
}

/// Rate bound of the low-degree local family as a function of `(rho3, rho4)`.
pub fn rhat(rho3: f64, rho4: f64, eps_l: f64, eps_g: f64) -> f64 {
    let x_s = if eps_g > low_local_threshold(rho3, rho4) {
        low_local_x_s(rho3, rho4, eps_g)
    } else {
        0.0
    };
    rho3 / 3.0 + rho4 / 2.0 - x_s * x_s / eps_g * (1.0 - eps_l / eps_g)
}

fn rhat_feasible(rho3: f64, rho4: f64, eps_l: f64) -> bool {
    rho3 >= 0.0 && rho4 >= 0.0 && rho3 + rho4 <= 1.0 && rho3 + 2.0 * rho4 <= 1.0 / eps_l - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhatOptimum {
    pub rho3: f64,
    pub rho4: f64,
    pub rhat: f64,
}

/// Maximizes [`rhat`] over the feasible triangle by a grid of step `step`
/// followed by a shrinking pattern search.
pub fn optimize_rhat_with_step(eps_l: f64, eps_g: f64, step: f64) -> Result<RhatOptimum> {
    if !(0.0 < eps_l && eps_l < eps_g && eps_g < 1.0) {
        return Err(Error::Precondition(format!(
            "need 0 < eps_L < eps_G < 1, got ({eps_l}, {eps_g})"
        )));
    }
    let n = (1.0 / step).round() as usize;
    let mut best = RhatOptimum {
        rho3: 0.0,
        rho4: 0.0,
        rhat: rhat(0.0, 0.0, eps_l, eps_g),
    };
    for i in 0..=n {
        let rho3 = i as f64 * step;
        for j in 0..=(n - i) {
            let rho4 = j as f64 * step;
            if !rhat_feasible(rho3, rho4, eps_l) {
                break;
            }
            let v = rhat(rho3, rho4, eps_l, eps_g);
            if v > best.rhat {
                best = RhatOptimum { rho3, rho4, rhat: v };
            }
        }
    }
    let mut h = step;
    while h > 1e-9 {
        let mut moved = false;
        for (d3, d4) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, -0.5), (-1.0, 0.5)] {
            let (r3, r4) = (best.rho3 + d3 * h, best.rho4 + d4 * h);
            if rhat_feasible(r3, r4, eps_l) {
                let v = rhat(r3, r4, eps_l, eps_g);
                if v > best.rhat {
                    best = RhatOptimum { rho3: r3, rho4: r4, rhat: v };
                    moved = true;
                }
            }
        }
        if !moved {
            h /= 2.0;
        }
    }
    Ok(best)
}

pub fn optimize_rhat(eps_l: f64, eps_g: f64) -> Result<RhatOptimum> {
    optimize_rhat_with_step(eps_l, eps_g, 1e-3)
}

pub fn harmonic(d: u32) -> f64 {
    (1..=d).map(|i| 1.0 / i as f64).sum()
}

/// Heavy-tail/Poisson pair: `lambda = (1/H(D)) sum_{i=1}^D x^i / i` and
/// `rho = e^{alpha (x - 1)}` with `alpha = H(D) / eps`, truncated once the
/// remaining mass is below `truncation_tol` and renormalized.
pub fn tornado_pair(d: u32, eps: f64, truncation_tol: f64) -> Result<(DegreePolynomial, DegreePolynomial)> {
    if d == 0 {
        return Err(Error::Domain {
            name: "D",
            value: 0.0,
            domain: "positive integers",
        });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain {
            name: "epsilon",
            value: eps,
            domain: "(0, 1)",
        });
    }
    let lambda = DegreePolynomial::normalized(Perspective::Edge, (1..=d).map(|i| (i, 1.0 / i as f64)))?;
    let alpha = harmonic(d) / eps;
    let ln_alpha = alpha.ln();
    let mut terms = Vec::new();
    let mut ln_p = -alpha;
    let mut i = 0u32;
    loop {
        let p = ln_p.exp();
        terms.push((i, p));
        let next = i as f64 + 1.0;
        // geometric bound on the mass beyond term i once past the mode
        if next > alpha && p * alpha / (next - alpha) < truncation_tol {
            break;
        }
        ln_p += ln_alpha - next.ln();
        i += 1;
    }
    let rho = DegreePolynomial::normalized(Perspective::Edge, terms)?;
    Ok((lambda, rho))
}

/// A family of single-sided LDPC ensembles that can be tuned to a requested
/// 1D threshold.
pub trait JointFamily {
    fn design(&self, target_threshold: f64) -> Result<JointDesign>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointDesign {
    pub lambda: DegreePolynomial,
    pub rho: DegreePolynomial,
    pub achieved_threshold: f64,
}

impl JointDesign {
    /// `1 - int rho / int lambda`.
    pub fn rate(&self) -> f64 {
        1.0 - self.rho.integral() / self.lambda.integral()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TornadoFamily {
    pub degree: u32,
    pub truncation_tol: f64,
}

impl TornadoFamily {
    pub fn new(degree: u32) -> Self {
        Self {
            degree,
            truncation_tol: DEFAULT_TRUNCATION_TOL,
        }
    }
}

impl JointFamily for TornadoFamily {
    fn design(&self, target: f64) -> Result<JointDesign> {
        let (lambda, rho) = tornado_pair(self.degree, target, self.truncation_tol)?;
        let achieved_threshold = one_d_threshold(&lambda, &rho);
        Ok(JointDesign {
            lambda,
            rho,
            achieved_threshold,
        })
    }
}

/// Regular `(l, r)` pairs with `2 <= l <= max_left`, `l < r <= max_right`;
/// picks the highest rate whose threshold reaches the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularFamily {
    pub max_left: u32,
    pub max_right: u32,
}

impl Default for RegularFamily {
    fn default() -> Self {
        Self {
            max_left: 8,
            max_right: 60,
        }
    }
}

impl JointFamily for RegularFamily {
    fn design(&self, target: f64) -> Result<JointDesign> {
        let mut best: Option<(f64, f64, u32, u32)> = None;
        for l in 2..=self.max_left {
            for r in (l + 1)..=self.max_right {
                let rate = 1.0 - l as f64 / r as f64;
                if best.is_some_and(|b| rate <= b.0) {
                    continue;
                }
                let t = one_d_threshold(
                    &DegreePolynomial::monomial(Perspective::Edge, l - 1),
                    &DegreePolynomial::monomial(Perspective::Edge, r - 1),
                );
                if t >= target {
                    best = Some((rate, t, l, r));
                }
            }
        }
        let (_, t, l, r) = best.ok_or_else(|| {
            Error::Infeasible(format!(
                "no regular pair with degrees up to ({}, {}) reaches threshold {target}",
                self.max_left, self.max_right
            ))
        })?;
        Ok(JointDesign {
            lambda: DegreePolynomial::monomial(Perspective::Edge, l - 1),
            rho: DegreePolynomial::monomial(Perspective::Edge, r - 1),
            achieved_threshold: t,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionResult {
    pub ensemble: LdpclEnsemble,
    /// Local threshold of the given local code.
    pub target_eps_l: f64,
    pub target_eps_g: f64,
    pub p0: f64,
    pub eps_j_target: f64,
    pub eps_j_achieved: f64,
    /// Global threshold of the assembled ensemble.
    pub eps_g_verified: f64,
    pub rate: f64,
    pub delta_l: f64,
    pub delta_j: f64,
    /// `delta_L + delta_J (1 - p0)`.
    pub gap_bound: f64,
    /// `1 - eps_g_verified - rate`.
    pub true_gap: f64,
}

impl ConstructionResult {
    pub fn gap_bound_holds(&self) -> bool {
        self.true_gap <= self.gap_bound + 1e-6
    }

    pub fn report_json(&self) -> serde_json::Value {
        use crate::numfmt::round12;
        serde_json::json!({
            "p0": round12(self.p0),
            "eps_J_target": round12(self.eps_j_target),
            "eps_J_achieved": round12(self.eps_j_achieved),
            "rate": round12(self.rate),
            "gap_bound": round12(self.gap_bound),
            "eps_G_verified": round12(self.eps_g_verified),
        })
    }
}

pub fn gap_bound(result: &ConstructionResult) -> f64 {
    result.delta_l + result.delta_j * (1.0 - result.p0)
}

/// Sets `p0 = eps*_L / eps_G` and attaches a joint code with threshold
/// `eps_G a_s(eps_G)`, which places the global threshold at `eps_G`.
pub fn construct_joint(local: &LocalEnsemble, eps_g: f64, family: &dyn JointFamily) -> Result<ConstructionResult> {
    let eps_l = local_threshold(local);
    let stuck = stuck_point(local, eps_g)?;
    if eps_g >= 1.0 {
        return Err(Error::Precondition("eps_G must be below 1".into()));
    }
    assemble(local, eps_l, eps_g, eps_g * stuck.a_s, family)
}

fn assemble(
    local: &LocalEnsemble,
    eps_l: f64,
    eps_g: f64,
    eps_j_target: f64,
    family: &dyn JointFamily,
) -> Result<ConstructionResult> {
    let p0 = eps_l / eps_g;
    let design = family.design(eps_j_target)?;
    let joint_rate = design.rate();
    let joint = JointEnsemble::new(design.lambda, design.rho, p0)?;
    let ensemble = LdpclEnsemble::new(1, 1, local.clone(), joint)?;
    let eps_g_verified = global_threshold(&ensemble).eps_star;
    let rate = ensemble.design_rate();
    let delta_l = 1.0 - eps_l - local.design_rate();
    let delta_j = 1.0 - design.achieved_threshold - joint_rate;
    Ok(ConstructionResult {
        ensemble,
        target_eps_l: eps_l,
        target_eps_g: eps_g,
        p0,
        eps_j_target,
        eps_j_achieved: design.achieved_threshold,
        eps_g_verified,
        rate,
        delta_l,
        delta_j,
        gap_bound: delta_l + delta_j * (1.0 - p0),
        true_gap: 1.0 - eps_g_verified - rate,
    })
}

/// Tornado local codes at `eps_L` paired with Tornado joint codes at `eps_G`,
/// one ensemble per `(D_L, D_J)` in `schedule`.
pub fn capacity_sequence(eps_l: f64, eps_g: f64, schedule: &[(u32, u32)]) -> Result<Vec<ConstructionResult>> {
    if !(0.0 < eps_l && eps_l < eps_g && eps_g < 1.0) {
        return Err(Error::Precondition(format!(
            "need 0 < eps_L < eps_G < 1, got ({eps_l}, {eps_g})"
        )));
    }
    schedule
        .iter()
        .map(|&(d_l, d_j)| {
            let (lambda, rho) = tornado_pair(d_l, eps_l, DEFAULT_TRUNCATION_TOL)?;
            let local = LocalEnsemble::new(lambda, rho)?;
            let achieved_l = local_threshold(&local);
            assemble(&local, achieved_l, eps_g, eps_g, &TornadoFamily::new(d_j))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_eps_endpoints() {
        let local = LocalEnsemble::regular(2, 6).unwrap();
        assert_eq!(h_eps(&local, 0.4, 0.0), 0.0);
        assert!((h_eps(&local, 0.4, 1.0) + 0.6).abs() < 1e-15);
    }

    #[test]
    fn closed_forms_examples() {
        let l = low_local_closed_forms(1.0, 0.0, 0.6).unwrap();
        assert!((l.x_s - 1.0 / 3.0).abs() < 1e-12);
        assert!((l.a_s - (1.0f64 / 3.0 / 0.6).powi(2)).abs() < 1e-12);
        let l = low_local_closed_forms(0.0, 1.0, 0.5).unwrap();
        assert!((l.x_s - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert_eq!(low_local_threshold(0.0, 0.0), 1.0);
        assert!(low_local_closed_forms(0.0, 1.0, 0.3).is_err());
    }

    #[test]
    fn closed_form_matches_scan() {
        for (r3, r4, eps) in [(1.0, 0.0, 0.6), (0.0, 1.0, 0.5), (0.3, 0.4, 0.7), (0.5, 0.2, 0.6)] {
            let closed = low_local_closed_forms(r3, r4, eps).unwrap();
            let sp = stuck_point(&low_local_ensemble(r3, r4).unwrap(), eps).unwrap();
            assert!((closed.x_s - sp.x_s).abs() < 1e-9, "{r3} {r4} {eps}");
            assert!((closed.a_s - sp.a_s).abs() < 1e-9);
        }
    }

    #[test]
    fn stuck_point_precondition() {
        let local = LocalEnsemble::regular(2, 6).unwrap();
        assert!(stuck_point(&local, 0.15).is_err());
        assert!(stuck_point(&local, 0.3).is_ok());
    }

    #[test]
    fn tornado_basics() {
        let (lambda, rho) = tornado_pair(1, 0.05, 1e-12).unwrap();
        assert_eq!(lambda.terms(), &[(1, 1.0)]);
        assert!((rho.derivative(1.0) - 20.0).abs() < 1e-6);
        for (d, gap) in [(1, 0.05), (2, 0.025), (5, 0.01)] {
            let (lambda, rho) = tornado_pair(d, 0.05, 1e-12).unwrap();
            let rate = 1.0 - rho.integral() / lambda.integral();
            assert!((1.0 - 0.05 - rate - gap).abs() < 1e-6, "D={d}");
        }
    }

    #[test]
    fn table_row_one() {
        let r = capacity_sequence(0.05, 0.2, &[(1, 1)]).unwrap();
        // the degree-1 check term e^{-5} of the joint code lifts the rate slightly
        assert!((r[0].rate - 0.6).abs() < 5e-3, "{}", r[0].rate);
        assert!((r[0].gap_bound - 0.2).abs() < 5e-3);
        assert!(r[0].gap_bound_holds());
    }

    #[test]
    fn rhat_optimum_is_feasible() {
        let o = optimize_rhat(0.1112, 0.35).unwrap();
        assert!(rhat_feasible(o.rho3, o.rho4, 0.1112));
        assert!(o.rhat >= rhat(0.0, 0.0, 0.1112, 0.35));
    }
}
