//! Scheduling of joint-check updates in the global decoding mode.
//!
//! A schedule decides in which iterations `y` is refreshed by `g`; every such
//! iteration costs one joint iteration (N_JI). Local iterations are free.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::construction::capacity_sequence;
use crate::density_evolution::{largest_fixed_point, local_threshold, DeOptions};
use crate::ensembles::LdpclEnsemble;
use crate::error::{Error, Result};
use crate::numfmt::fmt12;

pub const DEFAULT_PHASE_CAP: u64 = 100_000;
/// Slack on `eps_k < eps_L`; ties go to one more joint update.
const EPS_L_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum SchedulePolicy {
    /// Joint update in every iteration.
    Flooding,
    Never,
    /// Joint updates at these global-mode iteration indices.
    FixedSet(BTreeSet<u64>),
    /// Every `k`-th iteration.
    Periodic(u64),
    /// Update when the local side stalls (`|x_{l-2} - x_{l-1}| <= eta`) and
    /// the effective erasure probability is still at least `eps_L`.
    Eta(f64),
    /// The eta gate applied to the newest pair, `|x_{l-1} - x_l| <= eta`.
    EtaLatest(f64),
}

pub fn eta_policy(eta: f64) -> Result<SchedulePolicy> {
    if eta.is_nan() || eta <= 0.0 {
        return Err(Error::Domain {
            name: "eta",
            value: eta,
            domain: "(0, inf)",
        });
    }
    Ok(SchedulePolicy::Eta(eta))
}

impl SchedulePolicy {
    /// `xs` holds `x_{l-2}, x_{l-1}, x_l`.
    fn selects(&self, l: u64, xs: [f64; 3], eps_loc: f64, eps_l: f64) -> bool {
        match self {
            Self::Flooding => true,
            Self::Never => false,
            Self::FixedSet(set) => set.contains(&l),
            Self::Periodic(k) => l % k == k - 1,
            Self::Eta(eta) => (xs[0] - xs[1]).abs() <= *eta && eps_loc >= eps_l,
            Self::EtaLatest(eta) => (xs[1] - xs[2]).abs() <= *eta && eps_loc >= eps_l,
        }
    }

    fn may_update_after(&self, l: u64) -> bool {
        match self {
            Self::Never => false,
            Self::FixedSet(set) => set.range(l + 1..).next().is_some(),
            _ => true,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Periodic(0) => Err(Error::Domain {
                name: "period",
                value: 0.0,
                domain: "positive integers",
            }),
            Self::Eta(eta) | Self::EtaLatest(eta) => eta_policy(*eta).map(|_| ()),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SchedulePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Flooding => write!(f, "flooding"),
            Self::Never => write!(f, "never"),
            Self::FixedSet(set) => {
                let items: Vec<String> = set.iter().map(u64::to_string).collect();
                write!(f, "fixed:{}", items.join(","))
            }
            Self::Periodic(k) => write!(f, "period:{k}"),
            Self::Eta(eta) => write!(f, "eta:{eta}"),
            Self::EtaLatest(eta) => write!(f, "eta-latest:{eta}"),
        }
    }
}

/// Parses the `Display` form, e.g. `period:3`, `eta:1e-4`, `fixed:0,5,9`.
impl std::str::FromStr for SchedulePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("bad {what} in schedule policy '{s}'"));
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let policy = match kind {
            "flooding" if arg.is_empty() => Self::Flooding,
            "never" if arg.is_empty() => Self::Never,
            "period" => Self::Periodic(arg.parse().map_err(|_| bad("period"))?),
            "eta" => Self::Eta(arg.parse().map_err(|_| bad("eta"))?),
            "eta-latest" => Self::EtaLatest(arg.parse().map_err(|_| bad("eta"))?),
            "fixed" => Self::FixedSet(
                arg.split(',')
                    .filter(|t| !t.is_empty())
                    .map(|t| t.trim().parse().map_err(|_| bad("index")))
                    .collect::<Result<_>>()?,
            ),
            _ => return Err(bad("name")),
        };
        policy.validate()?;
        Ok(policy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleStatus {
    Decoded,
    Stuck,
    MaxIters,
    PhaseCap,
}

/// One joint update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchedulePhase {
    /// Effective erasure probability seen by the local side before the update.
    pub eps_k: f64,
    /// Local erasure level at the update.
    pub x_stuck: f64,
    pub y_before: f64,
    pub y_after: f64,
    /// Local iterations since the previous joint update.
    pub local_iters: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleResult {
    pub epsilon: f64,
    pub eps_l: f64,
    pub n_ji: u64,
    pub phases: Vec<SchedulePhase>,
    pub valid: bool,
    pub status: ScheduleStatus,
    pub total_local_iters: u64,
    pub final_x: f64,
    pub final_y: f64,
    /// Smallest effective erasure probability reached.
    pub min_eps_loc: f64,
}

impl ScheduleResult {
    /// `phase,eps_k,x_s,y_after,n_ji_cum`, one row per joint update.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,eps_k,x_s,y_after,n_ji_cum\n");
        for (k, p) in self.phases.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                k + 1,
                fmt12(p.eps_k),
                fmt12(p.x_stuck),
                fmt12(p.y_after),
                k + 1
            );
        }
        out
    }

    pub fn y_after(&self) -> Vec<f64> {
        self.phases.iter().map(|p| p.y_after).collect()
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain {
            name: "epsilon",
            value: eps,
            domain: "(0, 1)",
        });
    }
    Ok(())
}

/// Runs the decoder's DE under `policy`.
///
/// The local mode runs first with `y = 1`; if it decodes, no joint iteration
/// is spent. Otherwise the global mode continues from the local state and
/// refreshes `y` only in the iterations the policy selects.
pub fn run_schedule(e: &LdpclEnsemble, eps: f64, policy: &SchedulePolicy, opts: DeOptions) -> Result<ScheduleResult> {
    check_eps(eps)?;
    policy.validate()?;
    let eps_l = local_threshold(&e.local);
    run_schedule_with(e, eps, eps_l, policy, opts)
}

fn run_schedule_with(
    e: &LdpclEnsemble,
    eps: f64,
    eps_l: f64,
    policy: &SchedulePolicy,
    opts: DeOptions,
) -> Result<ScheduleResult> {
    let tol = opts.halt_tol;
    let stalled = |old: f64, new: f64| (old - new).abs() <= tol * new.max(tol);
    let mut result = ScheduleResult {
        epsilon: eps,
        eps_l,
        n_ji: 0,
        phases: Vec::new(),
        valid: false,
        status: ScheduleStatus::MaxIters,
        total_local_iters: 0,
        final_x: 1.0,
        final_y: 1.0,
        min_eps_loc: e.epsilon_loc(eps, 1.0),
    };
    let finish = |mut r: ScheduleResult, status, x, y| {
        r.status = status;
        r.valid = status == ScheduleStatus::Decoded;
        r.final_x = x;
        r.final_y = y;
        r
    };

    // local mode
    let mut x = 1.0;
    let mut x_prev;
    let y = 1.0;
    let mut iters = 0u64;
    loop {
        if iters >= opts.max_iters {
            result.total_local_iters = iters;
            return Ok(finish(result, ScheduleStatus::MaxIters, x, y));
        }
        let nx = e.f_map(eps, x, y);
        iters += 1;
        x_prev = x;
        x = nx;
        if x < tol {
            result.total_local_iters = iters;
            return Ok(finish(result, ScheduleStatus::Decoded, x, y));
        }
        if stalled(x_prev, x) {
            break;
        }
    }

    // global mode: l counts its iterations, x_prev / x are x_{l-2} / x_{l-1}
    let mut y = y;
    let mut since_update = 0u64;
    let mut l = 0u64;
    loop {
        if iters >= opts.max_iters {
            result.total_local_iters = iters;
            return Ok(finish(result, ScheduleStatus::MaxIters, x, y));
        }
        let eps_loc = e.epsilon_loc(eps, y);
        let nx = e.f_map(eps, x, y);
        let update = policy.selects(l, [x_prev, x, nx], eps_loc, eps_l);
        let ny = if update { e.g_map(eps, x, y) } else { y };
        iters += 1;
        since_update += 1;
        if update {
            result.n_ji += 1;
            result.phases.push(SchedulePhase {
                eps_k: eps_loc,
                x_stuck: x,
                y_before: y,
                y_after: ny,
                local_iters: since_update - 1,
            });
            since_update = 0;
            result.min_eps_loc = result.min_eps_loc.min(e.epsilon_loc(eps, ny));
        }
        let x_still = stalled(x, nx);
        let y_still = stalled(y, ny);
        x_prev = x;
        x = nx;
        y = ny;
        if x < tol {
            result.total_local_iters = iters;
            return Ok(finish(result, ScheduleStatus::Decoded, x, y));
        }
        let no_more = if update {
            y_still
        } else {
            !policy.may_update_after(l) || matches!(policy, SchedulePolicy::Eta(_) | SchedulePolicy::EtaLatest(_)) && eps_loc < eps_l
        };
        if x_still && no_more {
            result.total_local_iters = iters;
            return Ok(finish(result, ScheduleStatus::Stuck, x, y));
        }
        l += 1;
    }
}

/// The eta -> 0 limit of the eta policy, with exact stuck points: the local
/// side sits at `x_s(eps_k)` before each joint update,
/// `y_{k+1} = g(eps, x_s(eps_k), y_k)` and `eps_{k+1} = eps_loc(y_{k+1})`,
/// until `eps_{k+1} < eps_L`.
pub fn n_ji_ideal(e: &LdpclEnsemble, eps: f64) -> Result<ScheduleResult> {
    n_ji_ideal_capped(e, eps, DEFAULT_PHASE_CAP)
}

pub fn n_ji_ideal_capped(e: &LdpclEnsemble, eps: f64, phase_cap: u64) -> Result<ScheduleResult> {
    check_eps(eps)?;
    let eps_l = local_threshold(&e.local);
    let mut result = ScheduleResult {
        epsilon: eps,
        eps_l,
        n_ji: 0,
        phases: Vec::new(),
        valid: true,
        status: ScheduleStatus::Decoded,
        total_local_iters: 0,
        final_x: 0.0,
        final_y: 1.0,
        min_eps_loc: eps,
    };
    // y = 1 still lets degree-one joint checks through, so eps_1 = eps_loc(1)
    let (mut y, mut eps_k) = (1.0, e.epsilon_loc(eps, 1.0));
    result.min_eps_loc = eps_k;
    if eps_k <= eps_l {
        return Ok(result);
    }
    loop {
        if result.n_ji >= phase_cap {
            result.valid = false;
            result.status = ScheduleStatus::PhaseCap;
            break;
        }
        let x_s = largest_fixed_point(|x| e.local.response(x), eps_k);
        let next_y = e.g_map(eps, x_s, y);
        result.phases.push(SchedulePhase {
            eps_k,
            x_stuck: x_s,
            y_before: y,
            y_after: next_y,
            local_iters: 0,
        });
        result.n_ji += 1;
        let next_eps = e.epsilon_loc(eps, next_y);
        result.final_x = x_s;
        result.final_y = next_y;
        result.min_eps_loc = next_eps;
        if next_eps < eps_l - EPS_L_SLACK {
            result.final_x = 0.0;
            break;
        }
        if next_eps >= eps_k {
            // eps is at or above the global threshold
            result.valid = false;
            result.status = ScheduleStatus::Stuck;
            break;
        }
        y = next_y;
        eps_k = next_eps;
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyComparison {
    pub policy: String,
    pub n_ji: u64,
    pub valid: bool,
    /// `N_JI(ideal) <= N_JI(policy)`.
    pub fewer_updates: bool,
    /// First joint update `k` (1-based) where the ideal `y` exceeds this policy's.
    pub dominance_violation: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityReport {
    pub epsilon: f64,
    pub ideal_n_ji: u64,
    pub comparisons: Vec<PolicyComparison>,
}

impl OptimalityReport {
    /// Whether the ideal schedule is optimal against every valid policy.
    pub fn holds(&self) -> bool {
        self.comparisons
            .iter()
            .filter(|c| c.valid)
            .all(|c| c.fewer_updates && c.dominance_violation.is_none())
    }
}

/// Compares the ideal schedule with each policy: fewer joint updates, and at
/// every joint update `k` a `y` no larger than the policy's.
pub fn check_optimality(
    e: &LdpclEnsemble,
    eps: f64,
    policies: &[SchedulePolicy],
    opts: DeOptions,
) -> Result<OptimalityReport> {
    let ideal = n_ji_ideal(e, eps)?;
    let ideal_y = ideal.y_after();
    let comparisons = policies
        .iter()
        .map(|p| {
            let run = run_schedule_with(e, eps, ideal.eps_l, p, opts)?;
            let other_y = run.y_after();
            let dominance_violation = ideal_y
                .iter()
                .zip(&other_y)
                .position(|(a, b)| *a > b + 1e-12 * b.max(1e-300))
                .map(|k| k + 1);
            Ok(PolicyComparison {
                policy: p.to_string(),
                n_ji: run.n_ji,
                valid: run.valid,
                fewer_updates: ideal.n_ji <= run.n_ji,
                dominance_violation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OptimalityReport {
        epsilon: eps,
        ideal_n_ji: ideal.n_ji,
        comparisons,
    })
}

/// Tornado parameter `D` for an additive gap `delta = eps / D`, rounded up.
pub fn tornado_degree_for_gap(eps: f64, delta: f64) -> Result<u32> {
    if !(delta > 0.0 && eps > 0.0) {
        return Err(Error::Domain {
            name: "delta",
            value: delta,
            domain: "(0, inf)",
        });
    }
    let d = (eps / delta * (1.0 - 1e-12)).ceil();
    if d > u32::MAX as f64 {
        return Err(Error::ResourceGuard(format!("Tornado degree {d} is too large")));
    }
    Ok(d.max(1.0) as u32)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub d_l: u32,
    pub d_j: u32,
    pub delta_l: f64,
    pub delta_j: f64,
    pub rate: f64,
    pub n_ji: u64,
    pub valid: bool,
}

/// `N_JI` and design rate across local/joint gap pairs for the Tornado
/// capacity sequence with local threshold `eps_l` and global threshold
/// `eps_g`, evaluated at channel erasure probability `eps`.
pub fn n_ji_tradeoff(eps_l: f64, eps_g: f64, eps: f64, gaps: &[(f64, f64)]) -> Result<Vec<TradeoffPoint>> {
    gaps.par_iter()
        .map(|&(delta_l, delta_j)| {
            let d_l = tornado_degree_for_gap(eps_l, delta_l)?;
            let d_j = tornado_degree_for_gap(eps_g, delta_j)?;
            let built = capacity_sequence(eps_l, eps_g, &[(d_l, d_j)])?.remove(0);
            let run = n_ji_ideal(&built.ensemble, eps)?;
            Ok(TradeoffPoint {
                d_l,
                d_j,
                delta_l,
                delta_j,
                rate: built.rate,
                n_ji: run.n_ji,
                valid: run.valid,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_six() -> LdpclEnsemble {
        LdpclEnsemble::regular(1, 1, 2, 6, 1, 6).unwrap()
    }

    #[test]
    fn below_local_threshold_needs_no_joint_iterations() {
        let e = two_six();
        for p in [SchedulePolicy::Flooding, SchedulePolicy::Never, eta_policy(1e-4).unwrap()] {
            let r = run_schedule(&e, 0.15, &p, DeOptions::default()).unwrap();
            assert_eq!(r.n_ji, 0, "{p}");
            assert!(r.valid);
        }
        assert_eq!(n_ji_ideal(&e, 0.15).unwrap().n_ji, 0);
    }

    #[test]
    fn never_fails_between_thresholds() {
        let e = two_six();
        let r = run_schedule(&e, 0.3, &SchedulePolicy::Never, DeOptions::default()).unwrap();
        assert!(!r.valid);
        assert_eq!(r.status, ScheduleStatus::Stuck);
        assert_eq!(r.n_ji, 0);
    }

    #[test]
    fn flooding_counts_every_global_iteration() {
        let e = two_six();
        let r = run_schedule(&e, 0.3, &SchedulePolicy::Flooding, DeOptions::default()).unwrap();
        assert!(r.valid);
        assert!(r.n_ji > 0);
        assert!(r.phases.iter().all(|p| p.local_iters == 0));
    }

    #[test]
    fn ideal_eps_sequence_decreases() {
        let e = two_six();
        let r = n_ji_ideal(&e, 0.4).unwrap();
        assert!(r.valid);
        assert!(r.phases.windows(2).all(|w| w[1].eps_k < w[0].eps_k));
        assert!(r.min_eps_loc < r.eps_l);
        let above = n_ji_ideal(&e, 0.45).unwrap();
        assert!(!above.valid);
    }

    #[test]
    fn ideal_is_optimal_for_regular_pair() {
        let e = two_six();
        let policies = [
            SchedulePolicy::Flooding,
            SchedulePolicy::Periodic(5),
            eta_policy(1e-4).unwrap(),
            eta_policy(1e-2).unwrap(),
        ];
        let report = check_optimality(&e, 0.4, &policies, DeOptions::default()).unwrap();
        assert!(report.holds(), "{report:?}");
    }

    #[test]
    fn csv_layout() {
        let e = two_six();
        let r = n_ji_ideal(&e, 0.4).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("phase,eps_k,x_s,y_after,n_ji_cum\n1,0.4,"));
        assert_eq!(csv.lines().count() as u64, r.n_ji + 1);
    }

    #[test]
    fn gap_to_degree() {
        assert_eq!(tornado_degree_for_gap(0.05, 1e-2).unwrap(), 5);
        assert_eq!(tornado_degree_for_gap(0.2, 2.5e-4).unwrap(), 800);
        assert_eq!(tornado_degree_for_gap(0.2, 4e-2).unwrap(), 5);
        assert_eq!(tornado_degree_for_gap(0.05, 3e-2).unwrap(), 2);
    }

    #[test]
    fn bad_policies_rejected() {
        assert!(eta_policy(0.0).is_err());
        for text in ["flooding", "never", "period:3", "eta:0.0001", "eta-latest:0.01", "fixed:0,4,9"] {
            assert_eq!(text.parse::<SchedulePolicy>().unwrap().to_string(), text);
        }
        assert!("period:0".parse::<SchedulePolicy>().is_err());
        assert!("sometimes".parse::<SchedulePolicy>().is_err());
        let e = two_six();
        assert!(run_schedule(&e, 0.3, &SchedulePolicy::Periodic(0), DeOptions::default()).is_err());
    }
}
