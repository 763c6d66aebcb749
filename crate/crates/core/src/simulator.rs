//! Finite-length two-sided Tanner graphs, peeling decoding over the BEC in
//! local and global mode, and a Monte Carlo driver.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ensembles::{DegreePolynomial, LdpclEnsemble, Perspective};
use crate::error::{Error, Result};
use crate::numfmt::fmt12;
use crate::scheduler::SchedulePolicy;

pub const DEFAULT_DECODE_ITERS: usize = 100_000;

/// Compressed adjacency: the neighbours of node `i` are
/// `items[offsets[i]..offsets[i + 1]]`, repeated for multi-edges.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct Adjacency {
    offsets: Vec<u32>,
    items: Vec<u32>,
}

impl Adjacency {
    fn from_edges(nodes: usize, edges: &[(u32, u32)], key: impl Fn(&(u32, u32)) -> (u32, u32)) -> Self {
        let mut counts = vec![0u32; nodes + 1];
        for e in edges {
            counts[key(e).0 as usize + 1] += 1;
        }
        for i in 0..nodes {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; edges.len()];
        for e in edges {
            let (a, b) = key(e);
            items[fill[a as usize] as usize] = b;
            fill[a as usize] += 1;
        }
        Self { offsets: counts, items }
    }

    #[inline]
    fn of(&self, i: usize) -> &[u32] {
        &self.items[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    fn len(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// A sampled two-sided Tanner graph. Variables `b n .. (b + 1) n` form
/// sub-block `b`; local checks `b c .. (b + 1) c` belong to it, with `c`
/// local checks per sub-block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoSidedGraph {
    pub m_blocks: usize,
    pub n_sub: usize,
    pub local_checks_per_block: usize,
    pub joint_checks: usize,
    /// `(variable, local check)`.
    local_edges: Vec<(u32, u32)>,
    /// `(variable, joint check)`.
    joint_edges: Vec<(u32, u32)>,
    var_local: Adjacency,
    var_joint: Adjacency,
    check_local: Adjacency,
    check_joint: Adjacency,
}

impl TwoSidedGraph {
    fn assemble(
        m_blocks: usize,
        n_sub: usize,
        local_checks_per_block: usize,
        joint_checks: usize,
        local_edges: Vec<(u32, u32)>,
        joint_edges: Vec<(u32, u32)>,
    ) -> Self {
        let vars = m_blocks * n_sub;
        let local_checks = m_blocks * local_checks_per_block;
        Self {
            var_local: Adjacency::from_edges(vars, &local_edges, |&(v, c)| (v, c)),
            var_joint: Adjacency::from_edges(vars, &joint_edges, |&(v, c)| (v, c)),
            check_local: Adjacency::from_edges(local_checks, &local_edges, |&(v, c)| (c, v)),
            check_joint: Adjacency::from_edges(joint_checks, &joint_edges, |&(v, c)| (c, v)),
            m_blocks,
            n_sub,
            local_checks_per_block,
            joint_checks,
            local_edges,
            joint_edges,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.m_blocks * self.n_sub
    }

    pub fn local_edges(&self) -> &[(u32, u32)] {
        &self.local_edges
    }

    pub fn joint_edges(&self) -> &[(u32, u32)] {
        &self.joint_edges
    }

    pub fn block_of_var(&self, v: usize) -> usize {
        v / self.n_sub
    }

    pub fn block_of_local_check(&self, c: usize) -> usize {
        c / self.local_checks_per_block
    }

    pub fn local_degree(&self, v: usize) -> usize {
        self.var_local.of(v).len()
    }

    pub fn joint_degree(&self, v: usize) -> usize {
        self.var_joint.of(v).len()
    }

    /// `hist[d]` = number of nodes with degree `d`.
    fn histogram(adj: &Adjacency) -> Vec<usize> {
        let mut hist = Vec::new();
        for i in 0..adj.len() {
            let d = adj.of(i).len();
            if hist.len() <= d {
                hist.resize(d + 1, 0);
            }
            hist[d] += 1;
        }
        hist
    }

    pub fn variable_local_histogram(&self) -> Vec<usize> {
        Self::histogram(&self.var_local)
    }

    pub fn variable_joint_histogram(&self) -> Vec<usize> {
        Self::histogram(&self.var_joint)
    }

    pub fn local_check_histogram(&self) -> Vec<usize> {
        Self::histogram(&self.check_local)
    }

    pub fn joint_check_histogram(&self) -> Vec<usize> {
        Self::histogram(&self.check_joint)
    }
}

/// Uniformly random matching of variable sockets to check sockets.
fn match_sockets(var_degrees: &[usize], check_degrees: &[usize], var_base: u32, check_base: u32, rng: &mut ChaCha8Rng) -> Vec<(u32, u32)> {
    let mut check_sockets: Vec<u32> = check_degrees
        .iter()
        .enumerate()
        .flat_map(|(c, &d)| std::iter::repeat_n(check_base + c as u32, d))
        .collect();
    check_sockets.shuffle(rng);
    var_degrees
        .iter()
        .enumerate()
        .flat_map(|(v, &d)| std::iter::repeat_n(var_base + v as u32, d))
        .zip(check_sockets)
        .collect()
}

/// Regular two-sided graph: `M` independent `(l_L, r_L)` local graphs on `n`
/// variables each, plus one `(l_J, r_J)` joint graph on all `M n` variables.
/// When `r` does not divide the edge count, a few checks get degree `r ± 1`.
pub fn sample_regular(m_blocks: usize, n_sub: usize, l_l: u32, r_l: u32, l_j: u32, r_j: u32, seed: u64) -> Result<TwoSidedGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_regular_with(m_blocks, n_sub, [l_l, r_l, l_j, r_j], &mut rng)
}

fn sample_regular_with(m_blocks: usize, n_sub: usize, degrees: [u32; 4], rng: &mut ChaCha8Rng) -> Result<TwoSidedGraph> {
    let [l_l, r_l, l_j, r_j] = degrees;
    if m_blocks == 0 || n_sub == 0 {
        return Err(Error::Precondition("M and n must be positive".into()));
    }
    if r_l == 0 || r_j == 0 {
        return Err(Error::Precondition("check degrees must be positive".into()));
    }
    let local_vars = vec![l_l as usize; n_sub];
    let local_cks = check_degrees(&DegreePolynomial::monomial(Perspective::Node, r_l), n_sub * l_l as usize, "local")?;
    let joint_vars = vec![l_j as usize; m_blocks * n_sub];
    let joint_cks = check_degrees(&DegreePolynomial::monomial(Perspective::Node, r_j), m_blocks * n_sub * l_j as usize, "joint")?;
    Ok(sample_from_degrees(m_blocks, n_sub, &local_vars, &local_cks, &joint_vars, &joint_cks, rng))
}

/// `local_vars` and `local_checks` are the per-sub-block degree sequences.
fn sample_from_degrees(
    m_blocks: usize,
    n_sub: usize,
    local_vars: &[usize],
    local_checks: &[usize],
    joint_vars: &[usize],
    joint_checks: &[usize],
    rng: &mut ChaCha8Rng,
) -> TwoSidedGraph {
    let mut local_edges = Vec::new();
    for b in 0..m_blocks {
        let mut degrees = local_vars.to_vec();
        degrees.shuffle(rng);
        local_edges.extend(match_sockets(
            &degrees,
            local_checks,
            (b * n_sub) as u32,
            (b * local_checks.len()) as u32,
            rng,
        ));
    }
    // joint degrees go to uniformly random variables before merging
    let mut degrees = joint_vars.to_vec();
    degrees.shuffle(rng);
    let joint_edges = match_sockets(&degrees, joint_checks, 0, 0, rng);
    TwoSidedGraph::assemble(m_blocks, n_sub, local_checks.len(), joint_checks.len(), local_edges, joint_edges)
}

/// Node counts per degree for `total` nodes, by largest-remainder rounding of
/// `total * mass`; ties go to the lower degree.
pub fn round_counts(p: &DegreePolynomial, total: usize) -> Vec<(u32, usize)> {
    let exact: Vec<(u32, f64)> = p.terms().iter().map(|&(d, m)| (d, m * total as f64)).collect();
    let mut counts: Vec<(u32, usize)> = exact.iter().map(|&(d, x)| (d, x.floor() as usize)).collect();
    let assigned: usize = counts.iter().map(|c| c.1).sum();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a].1 - exact[a].1.floor();
        let fb = exact[b].1 - exact[b].1.floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i].1 += 1;
    }
    counts
}

fn expand(counts: &[(u32, usize)]) -> Vec<usize> {
    counts
        .iter()
        .flat_map(|&(d, c)| std::iter::repeat_n(d as usize, c))
        .collect()
}

/// Check degree sequence carrying exactly `edges` sockets, from the node
/// perspective check distribution `omega`. Rounding slack is spread one
/// socket at a time over the checks of the highest degree.
fn check_degrees(omega: &DegreePolynomial, edges: usize, what: &str) -> Result<Vec<usize>> {
    if edges == 0 {
        return Ok(Vec::new());
    }
    let mean: f64 = omega.terms().iter().map(|&(d, m)| d as f64 * m).sum();
    let count = ((edges as f64 / mean).round() as usize).max(1);
    let mut degrees = expand(&round_counts(omega, count));
    degrees.sort_unstable();
    let mut diff = edges as i64 - degrees.iter().sum::<usize>() as i64;
    let top = *degrees.last().unwrap_or(&0);
    let first_top = degrees.partition_point(|&d| d < top);
    let mut progress = true;
    while diff != 0 && progress {
        progress = false;
        for d in degrees[first_top..].iter_mut().rev() {
            if diff > 0 {
                *d += 1;
                diff -= 1;
                progress = true;
            } else if diff < 0 && *d > 1 {
                *d -= 1;
                diff += 1;
                progress = true;
            }
            if diff == 0 {
                break;
            }
        }
    }
    if diff != 0 {
        return Err(Error::Precondition(format!(
            "{what}: no check degree assignment matches {edges} edges"
        )));
    }
    Ok(degrees)
}

/// Samples from an irregular ensemble using its `M` and `n`.
pub fn sample_irregular(e: &LdpclEnsemble, seed: u64) -> Result<TwoSidedGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_irregular_with(e, &mut rng)
}

fn sample_irregular_with(e: &LdpclEnsemble, rng: &mut ChaCha8Rng) -> Result<TwoSidedGraph> {
    let (m, n) = (e.m_blocks, e.n_sub);
    let local_vars = expand(&round_counts(e.local_node(), n));
    let local_edges: usize = local_vars.iter().sum();
    let local_checks = check_degrees(&e.local.rho.edge_to_node(0.0)?, local_edges, "local")?;
    let (joint_vars, joint_checks) = if e.p0() >= 1.0 {
        (vec![0; m * n], Vec::new())
    } else {
        let vars = expand(&round_counts(e.joint_node(), m * n));
        let edges: usize = vars.iter().sum();
        let checks = check_degrees(&e.joint.rho.edge_to_node(0.0)?, edges, "joint")?;
        (vars, checks)
    };
    Ok(sample_from_degrees(m, n, &local_vars, &local_checks, &joint_vars, &joint_checks, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    LocalSuccess,
    GlobalSuccess,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Block(usize),
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DecodeOutcome {
    pub mode: DecodeMode,
    pub local_iters: usize,
    pub global_iters: usize,
    pub n_ji_empirical: usize,
    /// Erasures left in the target (the sub-block, or the whole block).
    pub residual_erasures: usize,
    /// Erasures left anywhere in the block.
    pub block_residual: usize,
}

/// Peeling state: per check, the number of erased edges and the sum of the
/// erased variable indices, so a check with one erased edge names its variable.
struct Peeler<'g> {
    g: &'g TwoSidedGraph,
    erased: Vec<bool>,
    erased_count: usize,
    local_count: Vec<u32>,
    local_sum: Vec<u64>,
    joint_count: Vec<u32>,
    joint_sum: Vec<u64>,
    /// Checks whose count dropped to one; may hold stale entries.
    local_front: Vec<u32>,
    joint_front: Vec<u32>,
    erased_local_edges: usize,
}

impl<'g> Peeler<'g> {
    fn new(g: &'g TwoSidedGraph, erased: &[bool]) -> Self {
        let mut p = Self {
            g,
            erased: erased.to_vec(),
            erased_count: erased.iter().filter(|&&e| e).count(),
            local_count: vec![0; g.check_local.len()],
            local_sum: vec![0; g.check_local.len()],
            joint_count: vec![0; g.check_joint.len()],
            joint_sum: vec![0; g.check_joint.len()],
            local_front: Vec::new(),
            joint_front: Vec::new(),
            erased_local_edges: 0,
        };
        for (v, _) in erased.iter().enumerate().filter(|(_, &e)| e) {
            for &c in g.var_local.of(v) {
                p.local_count[c as usize] += 1;
                p.local_sum[c as usize] += v as u64;
            }
            for &c in g.var_joint.of(v) {
                p.joint_count[c as usize] += 1;
                p.joint_sum[c as usize] += v as u64;
            }
            p.erased_local_edges += g.var_local.of(v).len();
        }
        p.local_front = (0..p.local_count.len() as u32).filter(|&c| p.local_count[c as usize] == 1).collect();
        p.joint_front = (0..p.joint_count.len() as u32).filter(|&c| p.joint_count[c as usize] == 1).collect();
        p
    }

    fn residual(&self, target: Target) -> usize {
        match target {
            Target::All => self.erased_count,
            Target::Block(b) => {
                let n = self.g.n_sub;
                self.erased[b * n..(b + 1) * n].iter().filter(|&&e| e).count()
            }
        }
    }

    /// One simultaneous peeling round over the local checks of `block` (all
    /// blocks if `None`) and, if `joint`, the joint checks. Returns how many
    /// variables were recovered.
    fn round(&mut self, block: Option<usize>, joint: bool) -> usize {
        let mut resolved = Vec::new();
        let per_block = self.g.local_checks_per_block;
        let mut keep = Vec::new();
        for c in std::mem::take(&mut self.local_front) {
            let ci = c as usize;
            if self.local_count[ci] != 1 {
                continue;
            }
            if block.is_some_and(|b| ci / per_block != b) {
                keep.push(c);
            } else {
                resolved.push(self.local_sum[ci] as usize);
                keep.push(c);
            }
        }
        self.local_front = keep;
        if joint {
            let mut keep = Vec::new();
            for c in std::mem::take(&mut self.joint_front) {
                let ci = c as usize;
                if self.joint_count[ci] == 1 {
                    resolved.push(self.joint_sum[ci] as usize);
                    keep.push(c);
                }
            }
            self.joint_front = keep;
        }
        let mut recovered = 0;
        for v in resolved {
            if !self.erased[v] {
                continue;
            }
            self.erased[v] = false;
            self.erased_count -= 1;
            recovered += 1;
            self.erased_local_edges -= self.g.var_local.of(v).len();
            for &c in self.g.var_local.of(v) {
                let ci = c as usize;
                self.local_count[ci] -= 1;
                self.local_sum[ci] -= v as u64;
                if self.local_count[ci] == 1 {
                    self.local_front.push(c);
                }
            }
            for &c in self.g.var_joint.of(v) {
                let ci = c as usize;
                self.joint_count[ci] -= 1;
                self.joint_sum[ci] -= v as u64;
                if self.joint_count[ci] == 1 {
                    self.joint_front.push(c);
                }
            }
        }
        // drop entries that are no longer degree one
        self.local_front.retain(|&c| self.local_count[c as usize] == 1);
        self.joint_front.retain(|&c| self.joint_count[c as usize] == 1);
        self.local_front.sort_unstable();
        self.local_front.dedup();
        self.joint_front.sort_unstable();
        self.joint_front.dedup();
        recovered
    }

    fn local_fraction(&self) -> f64 {
        let total = self.g.local_edges.len();
        if total == 0 {
            0.0
        } else {
            self.erased_local_edges as f64 / total as f64
        }
    }
}

fn gate(policy: &SchedulePolicy, l: usize, x_hist: &[f64], local_would_stall: bool) -> bool {
    match policy {
        SchedulePolicy::Flooding => true,
        SchedulePolicy::Never => false,
        SchedulePolicy::FixedSet(set) => set.contains(&(l as u64)),
        SchedulePolicy::Periodic(k) => *k > 0 && l as u64 % k == k - 1,
        SchedulePolicy::Eta(eta) => match x_hist {
            [.., a, b] => (a - b).abs() <= *eta,
            _ => false,
        },
        SchedulePolicy::EtaLatest(_) => local_would_stall,
    }
}

fn may_update_after(policy: &SchedulePolicy, l: usize) -> bool {
    match policy {
        SchedulePolicy::Never => false,
        SchedulePolicy::FixedSet(set) => set.range(l as u64 + 1..).next().is_some(),
        _ => true,
    }
}

/// Peeling decoder. The local mode peels with the target sub-block's local
/// checks only (all local checks for [`Target::All`]); if erasures remain in
/// the target it switches to the global mode, where every local check is used
/// in every round and the joint checks in the rounds `policy` selects.
pub fn decode(g: &TwoSidedGraph, erased: &[bool], target: Target, policy: &SchedulePolicy, max_iters: usize) -> Result<DecodeOutcome> {
    if erased.len() != g.num_vars() {
        return Err(Error::Precondition(format!(
            "erasure vector has {} entries for {} variables",
            erased.len(),
            g.num_vars()
        )));
    }
    if let Target::Block(b) = target {
        if b >= g.m_blocks {
            return Err(Error::Precondition(format!("sub-block {b} out of range")));
        }
    }
    let mut p = Peeler::new(g, erased);
    let local_block = match target {
        Target::Block(b) => Some(b),
        Target::All => None,
    };
    let mut out = DecodeOutcome {
        mode: DecodeMode::Failure,
        local_iters: 0,
        global_iters: 0,
        n_ji_empirical: 0,
        residual_erasures: 0,
        block_residual: 0,
    };
    let finish = |mut out: DecodeOutcome, p: &Peeler, mode| {
        out.mode = mode;
        out.residual_erasures = p.residual(target);
        out.block_residual = p.erased_count;
        out
    };
    while p.residual(target) > 0 && out.local_iters < max_iters {
        if p.round(local_block, false) == 0 {
            break;
        }
        out.local_iters += 1;
    }
    if p.residual(target) == 0 {
        return Ok(finish(out, &p, DecodeMode::LocalSuccess));
    }

    let mut x_hist = vec![p.local_fraction()];
    let mut l = 0;
    while out.local_iters + out.global_iters < max_iters {
        let local_ready = p.local_front.iter().any(|&c| p.local_count[c as usize] == 1);
        let joint = gate(policy, l, &x_hist, !local_ready);
        let recovered = p.round(None, joint);
        out.global_iters += 1;
        if joint {
            out.n_ji_empirical += 1;
        }
        x_hist.push(p.local_fraction());
        if p.residual(target) == 0 {
            return Ok(finish(out, &p, DecodeMode::GlobalSuccess));
        }
        if recovered == 0 && (joint || !may_update_after(policy, l)) {
            break;
        }
        l += 1;
    }
    Ok(finish(out, &p, DecodeMode::Failure))
}

/// Flooding belief propagation with explicit edge messages on the complete
/// graph. Returns the erased variables at the end and, per iteration, the
/// erased fractions of local and joint variable-to-check messages (entry 0
/// is the channel).
pub fn flooding_bp(g: &TwoSidedGraph, erased: &[bool], iters: usize) -> (Vec<bool>, Vec<(f64, f64)>) {
    let le = &g.local_edges;
    let je = &g.joint_edges;
    let frac = |m: &[bool]| {
        if m.is_empty() {
            0.0
        } else {
            m.iter().filter(|&&e| e).count() as f64 / m.len() as f64
        }
    };
    // var-to-check messages start as the channel
    let mut vc_l: Vec<bool> = le.iter().map(|&(v, _)| erased[v as usize]).collect();
    let mut vc_j: Vec<bool> = je.iter().map(|&(v, _)| erased[v as usize]).collect();
    let mut trace = vec![(frac(&vc_l), frac(&vc_j))];
    let mut decoded: Vec<bool> = erased.iter().map(|&e| !e).collect();
    for _ in 0..iters {
        // check side: erased iff another incoming edge is erased
        let mut cnt_l = vec![0u32; g.check_local.len()];
        for (k, &(_, c)) in le.iter().enumerate() {
            cnt_l[c as usize] += vc_l[k] as u32;
        }
        let mut cnt_j = vec![0u32; g.check_joint.len()];
        for (k, &(_, c)) in je.iter().enumerate() {
            cnt_j[c as usize] += vc_j[k] as u32;
        }
        let cv_l: Vec<bool> = le.iter().enumerate().map(|(k, &(_, c))| cnt_l[c as usize] - vc_l[k] as u32 > 0).collect();
        let cv_j: Vec<bool> = je.iter().enumerate().map(|(k, &(_, c))| cnt_j[c as usize] - vc_j[k] as u32 > 0).collect();
        // variable side: known incoming messages per variable
        let mut known = vec![0u32; g.num_vars()];
        for (k, &(v, _)) in le.iter().enumerate() {
            known[v as usize] += !cv_l[k] as u32;
        }
        for (k, &(v, _)) in je.iter().enumerate() {
            known[v as usize] += !cv_j[k] as u32;
        }
        let mut changed = false;
        for (v, d) in decoded.iter_mut().enumerate() {
            if !*d && known[v] > 0 {
                *d = true;
                changed = true;
            }
        }
        let next_l: Vec<bool> = le
            .iter()
            .enumerate()
            .map(|(k, &(v, _))| erased[v as usize] && known[v as usize] - !cv_l[k] as u32 == 0)
            .collect();
        let next_j: Vec<bool> = je
            .iter()
            .enumerate()
            .map(|(k, &(v, _))| erased[v as usize] && known[v as usize] - !cv_j[k] as u32 == 0)
            .collect();
        changed |= next_l != vc_l || next_j != vc_j;
        vc_l = next_l;
        vc_j = next_j;
        trace.push((frac(&vc_l), frac(&vc_j)));
        if !changed {
            break;
        }
    }
    (decoded.iter().map(|&d| !d).collect(), trace)
}

/// Peeling on the complete graph with every check in every round.
pub fn peel_all(g: &TwoSidedGraph, erased: &[bool]) -> Vec<bool> {
    let mut p = Peeler::new(g, erased);
    while p.round(None, true) > 0 {}
    p.erased
}

/// Where Monte Carlo graphs come from.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    Regular {
        m_blocks: usize,
        n_sub: usize,
        degrees: [u32; 4],
    },
    Ensemble(LdpclEnsemble),
}

impl GraphSource {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<TwoSidedGraph> {
        match self {
            Self::Regular {
                m_blocks,
                n_sub,
                degrees,
            } => sample_regular_with(*m_blocks, *n_sub, *degrees, rng),
            Self::Ensemble(e) => sample_irregular_with(e, rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum McMode {
    Local,
    Global,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub source: GraphSource,
    pub eps_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub policy: SchedulePolicy,
    pub mode: McMode,
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McRow {
    pub eps: f64,
    /// Fraction of trials in which sub-block 0 is not recovered in local mode.
    pub local_fail: f64,
    /// Fraction of trials in which the whole block is not recovered.
    pub global_fail: f64,
    /// Mean joint iterations spent on sub-block 0.
    pub mean_nji: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    local_fail: usize,
    global_fail: usize,
    nji: usize,
}

/// Failure rates per erasure probability. Trial `t` draws its graph and one
/// uniform variate per variable from stream `t` of the seeded generator;
/// variable `v` is erased at `eps` iff its variate is below `eps`, so the
/// patterns are nested across the grid.
pub fn monte_carlo(cfg: &McConfig) -> Result<Vec<McRow>> {
    if cfg.trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    for &eps in &cfg.eps_grid {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Domain {
                name: "epsilon",
                value: eps,
                domain: "[0, 1]",
            });
        }
    }
    let per_trial: Vec<Vec<Tally>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t as u64);
            let g = cfg.source.sample(&mut rng)?;
            let u: Vec<f64> = (0..g.num_vars()).map(|_| rng.random::<f64>()).collect();
            cfg.eps_grid
                .iter()
                .map(|&eps| {
                    let erased: Vec<bool> = u.iter().map(|&x| x < eps).collect();
                    let mut tally = Tally::default();
                    if cfg.mode != McMode::Global {
                        let out = decode(&g, &erased, Target::Block(0), &cfg.policy, cfg.max_iters)?;
                        tally.local_fail = (out.mode != DecodeMode::LocalSuccess) as usize;
                        tally.nji = out.n_ji_empirical;
                    }
                    if cfg.mode != McMode::Local {
                        let out = decode(&g, &erased, Target::All, &cfg.policy, cfg.max_iters)?;
                        tally.global_fail = (out.mode == DecodeMode::Failure) as usize;
                    }
                    Ok(tally)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(cfg
        .eps_grid
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            let sum = per_trial.iter().fold(Tally::default(), |acc, row| Tally {
                local_fail: acc.local_fail + row[k].local_fail,
                global_fail: acc.global_fail + row[k].global_fail,
                nji: acc.nji + row[k].nji,
            });
            let n = cfg.trials as f64;
            McRow {
                eps,
                local_fail: sum.local_fail as f64 / n,
                global_fail: sum.global_fail as f64 / n,
                mean_nji: sum.nji as f64 / n,
                trials: cfg.trials,
            }
        })
        .collect())
}

/// `eps,local_fail,global_fail,mean_nji,trials`.
pub fn mc_csv(rows: &[McRow]) -> String {
    let mut out = String::from("eps,local_fail,global_fail,mean_nji,trials\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt12(r.eps),
            fmt12(r.local_fail),
            fmt12(r.global_fail),
            fmt12(r.mean_nji),
            r.trials
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_counts() {
        let g = sample_regular(2, 12, 2, 6, 1, 6, 7).unwrap();
        assert_eq!(g.num_vars(), 24);
        assert_eq!(g.local_checks_per_block * g.m_blocks, 8);
        assert_eq!(g.joint_checks, 4);
        assert_eq!(g.variable_local_histogram(), vec![0, 0, 24]);
        assert_eq!(g.variable_joint_histogram(), vec![0, 24]);
        for &(v, c) in g.local_edges() {
            assert_eq!(g.block_of_var(v as usize), g.block_of_local_check(c as usize));
        }
        assert!(sample_regular(2, 7, 2, 0, 1, 6, 7).is_err());
        let odd = sample_regular(1, 7, 2, 6, 1, 6, 7).unwrap();
        assert_eq!(odd.local_check_histogram(), vec![0, 0, 0, 0, 0, 0, 0, 2]);
        assert_eq!(odd.local_edges().len(), 14);
    }

    #[test]
    fn seeded_sampling_is_deterministic() {
        let a = sample_regular(3, 30, 3, 6, 2, 6, 11).unwrap();
        let b = sample_regular(3, 30, 3, 6, 2, 6, 11).unwrap();
        let c = sample_regular(3, 30, 3, 6, 2, 6, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn largest_remainder_rounding() {
        let p = DegreePolynomial::new(Perspective::Node, [(0, 0.25), (2, 0.375), (3, 0.375)]).unwrap();
        assert_eq!(round_counts(&p, 400), vec![(0, 100), (2, 150), (3, 150)]);
        let counts = round_counts(&p, 10);
        assert_eq!(counts.iter().map(|c| c.1).sum::<usize>(), 10);
    }

    #[test]
    fn nothing_erased_is_local_success() {
        let g = sample_regular(2, 12, 2, 6, 1, 6, 1).unwrap();
        let out = decode(&g, &[false; 24], Target::Block(0), &SchedulePolicy::Flooding, 100).unwrap();
        assert_eq!(out.mode, DecodeMode::LocalSuccess);
        assert_eq!((out.local_iters, out.n_ji_empirical), (0, 0));
    }

    #[test]
    fn everything_erased_fails() {
        let g = sample_regular(2, 12, 2, 6, 1, 6, 1).unwrap();
        let out = decode(&g, &[true; 24], Target::All, &SchedulePolicy::Flooding, 100).unwrap();
        assert_eq!(out.mode, DecodeMode::Failure);
        assert_eq!(out.residual_erasures, 24);
    }

    #[test]
    fn peeling_matches_flooding_small() {
        let g = sample_regular(2, 30, 2, 6, 1, 6, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let erased: Vec<bool> = (0..60).map(|_| rng.random::<f64>() < 0.4).collect();
            let (bp, _) = flooding_bp(&g, &erased, 1000);
            assert_eq!(peel_all(&g, &erased), bp);
        }
    }

    #[test]
    fn csv_header() {
        let rows = [McRow {
            eps: 0.1,
            local_fail: 0.0,
            global_fail: 0.0,
            mean_nji: 0.0,
            trials: 3,
        }];
        assert_eq!(mc_csv(&rows), "eps,local_fail,global_fail,mean_nji,trials\n0.1,0,0,0,3\n");
    }
}
