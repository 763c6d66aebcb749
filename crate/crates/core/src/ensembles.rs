//! Degree distributions and the two-sided LDPC-L ensemble.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};

/// Masses must sum to one within this tolerance before renormalization.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perspective {
    Node,
    Edge,
}

/// Sparse polynomial `sum mass_i x^{e_i}` with nonnegative masses summing to one.
///
/// Terms are kept sorted by exponent with no duplicates and no zero masses.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreePolynomial {
    perspective: Perspective,
    terms: Vec<(u32, f64)>,
}

fn merge_terms(terms: impl IntoIterator<Item = (u32, f64)>) -> Result<Vec<(u32, f64)>> {
    let mut terms: Vec<(u32, f64)> = terms.into_iter().collect();
    for &(e, m) in &terms {
        if !m.is_finite() || m < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "mass {m} at exponent {e} is not a nonnegative number"
            )));
        }
    }
    terms.sort_by_key(|t| t.0);
    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(terms.len());
    for (e, m) in terms {
        match merged.last_mut() {
            Some(last) if last.0 == e => last.1 += m,
            _ => merged.push((e, m)),
        }
    }
    merged.retain(|t| t.1 > 0.0);
    Ok(merged)
}

impl DegreePolynomial {
    /// Builds a distribution whose masses already sum to one (within
    /// [`NORMALIZATION_TOL`]); small drift is renormalized away.
    pub fn new(perspective: Perspective, terms: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let terms = merge_terms(terms)?;
        let total: f64 = terms.iter().map(|t| t.1).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        Ok(Self::scaled(perspective, terms, total))
    }

    /// Builds a distribution from arbitrary positive weights, dividing by their total.
    pub fn normalized(perspective: Perspective, terms: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let terms = merge_terms(terms)?;
        let total: f64 = terms.iter().map(|t| t.1).sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("all masses are zero".into()));
        }
        Ok(Self::scaled(perspective, terms, total))
    }

    fn scaled(perspective: Perspective, terms: Vec<(u32, f64)>, total: f64) -> Self {
        let terms = if total == 1.0 {
            terms
        } else {
            terms.into_iter().map(|(e, m)| (e, m / total)).collect()
        };
        Self { perspective, terms }
    }

    pub fn monomial(perspective: Perspective, exponent: u32) -> Self {
        Self {
            perspective,
            terms: vec![(exponent, 1.0)],
        }
    }

    /// Edge-perspective distribution given as `(degree, mass)` pairs, i.e. `x^{degree-1}`.
    pub fn from_edge_degrees(pairs: &[(u32, f64)]) -> Result<Self> {
        if pairs.iter().any(|p| p.0 == 0) {
            return Err(Error::InvalidDistribution("edge degree 0 is meaningless".into()));
        }
        Self::new(Perspective::Edge, pairs.iter().map(|&(d, m)| (d - 1, m)))
    }

    pub fn edge_degrees(&self) -> Vec<(u32, f64)> {
        self.terms.iter().map(|&(e, m)| (e + 1, m)).collect()
    }

    pub fn perspective(&self) -> Perspective {
        self.perspective
    }

    pub fn terms(&self) -> &[(u32, f64)] {
        &self.terms
    }

    pub fn max_exponent(&self) -> u32 {
        self.terms.last().map_or(0, |t| t.0)
    }

    pub fn mass(&self, exponent: u32) -> f64 {
        self.terms
            .binary_search_by_key(&exponent, |t| t.0)
            .map_or(0.0, |i| self.terms[i].1)
    }

    /// Evaluates at `x`, rejecting arguments outside `[0, 1]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        Ok(self.value(x))
    }

    /// Unchecked evaluation for inner loops.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let mut sum = 0.0;
        let mut power = 1.0;
        let mut prev = 0u32;
        for &(e, m) in &self.terms {
            power *= pow_u(x, e - prev);
            prev = e;
            sum += m * power;
        }
        sum
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.0 > 0)
            .map(|&(e, m)| m * e as f64 * pow_u(x, e - 1))
            .sum()
    }

    /// `int_0^1 p(x) dx`.
    pub fn integral(&self) -> f64 {
        self.terms.iter().map(|&(e, m)| m / (e as f64 + 1.0)).sum()
    }

    /// `lambda(x) = Lambda'(x) / Lambda'(1)`.
    pub fn node_to_edge(&self) -> Result<Self> {
        if self.perspective != Perspective::Node {
            return Err(Error::InvalidDistribution("expected a node-perspective polynomial".into()));
        }
        let terms: Vec<(u32, f64)> = self
            .terms
            .iter()
            .filter(|t| t.0 > 0)
            .map(|&(e, m)| (e - 1, m * e as f64))
            .collect();
        if terms.is_empty() {
            return Err(Error::Degenerate("node distribution has no edges".into()));
        }
        Self::normalized(Perspective::Edge, terms)
    }

    /// `Lambda(x) = p0 + (1 - p0) int_0^x lambda / int_0^1 lambda`.
    pub fn edge_to_node(&self, p0: f64) -> Result<Self> {
        if self.perspective != Perspective::Edge {
            return Err(Error::InvalidDistribution("expected an edge-perspective polynomial".into()));
        }
        check_unit("p0", p0)?;
        let norm = self.integral();
        let mut terms: Vec<(u32, f64)> = self
            .terms
            .iter()
            .map(|&(e, m)| (e + 1, (1.0 - p0) * m / (e as f64 + 1.0) / norm))
            .collect();
        terms.push((0, p0));
        Ok(Self {
            perspective: Perspective::Node,
            terms: merge_terms(terms)?,
        })
    }
}

#[inline]
fn pow_u(x: f64, e: u32) -> f64 {
    match e {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(e as i32),
    }
}

/// Local (sub-block) code: `lambda_L`, `rho_L`, both edge perspective.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEnsemble {
    pub lambda: DegreePolynomial,
    pub rho: DegreePolynomial,
    pub allow_degree_one: bool,
}

impl LocalEnsemble {
    pub fn new(lambda: DegreePolynomial, rho: DegreePolynomial) -> Result<Self> {
        Self::with_options(lambda, rho, false)
    }

    pub fn with_options(lambda: DegreePolynomial, rho: DegreePolynomial, allow_degree_one: bool) -> Result<Self> {
        if lambda.perspective() != Perspective::Edge || rho.perspective() != Perspective::Edge {
            return Err(Error::InvalidDistribution("local polynomials must be edge perspective".into()));
        }
        if !allow_degree_one && lambda.mass(0) > 0.0 {
            return Err(Error::InvalidDistribution(
                "local variables of degree 1 are not allowed".into(),
            ));
        }
        if rho.max_exponent() == 0 {
            // rho(1 - x) == 1 everywhere, so the local decoder never makes progress
            return Err(Error::Degenerate("all local checks have degree 1".into()));
        }
        Ok(Self {
            lambda,
            rho,
            allow_degree_one,
        })
    }

    pub fn regular(l: u32, r: u32) -> Result<Self> {
        if l < 2 || r < 2 {
            return Err(Error::InvalidDistribution(format!("regular local degrees ({l}, {r})")));
        }
        Self::new(
            DegreePolynomial::monomial(Perspective::Edge, l - 1),
            DegreePolynomial::monomial(Perspective::Edge, r - 1),
        )
    }

    /// `1 - int rho / int lambda`.
    pub fn design_rate(&self) -> f64 {
        1.0 - self.rho.integral() / self.lambda.integral()
    }

    /// `lambda(1 - rho(1 - x))`, the local check-then-variable map without the channel.
    #[inline]
    pub fn response(&self, x: f64) -> f64 {
        self.lambda.value(1.0 - self.rho.value(1.0 - x))
    }
}

/// Joint code: `lambda_J`, `rho_J` and the fraction `p0` of variables without joint edges.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEnsemble {
    pub lambda: DegreePolynomial,
    pub rho: DegreePolynomial,
    pub p0: f64,
}

impl JointEnsemble {
    pub fn new(lambda: DegreePolynomial, rho: DegreePolynomial, p0: f64) -> Result<Self> {
        if lambda.perspective() != Perspective::Edge || rho.perspective() != Perspective::Edge {
            return Err(Error::InvalidDistribution("joint polynomials must be edge perspective".into()));
        }
        check_unit("p0", p0)?;
        Ok(Self { lambda, rho, p0 })
    }

    pub fn regular(l: u32, r: u32) -> Result<Self> {
        if l < 1 || r < 2 {
            return Err(Error::InvalidDistribution(format!("regular joint degrees ({l}, {r})")));
        }
        Self::new(
            DegreePolynomial::monomial(Perspective::Edge, l - 1),
            DegreePolynomial::monomial(Perspective::Edge, r - 1),
            0.0,
        )
    }

    /// `(int rho / int lambda)(1 - p0)`, the joint share of the rate loss.
    pub fn rate_loss(&self) -> f64 {
        if self.p0 >= 1.0 {
            0.0
        } else {
            self.rho.integral() / self.lambda.integral() * (1.0 - self.p0)
        }
    }
}

/// Two-sided ensemble: `m_blocks` sub-blocks of `n_sub` variables each.
#[derive(Debug, Clone)]
pub struct LdpclEnsemble {
    pub m_blocks: usize,
    pub n_sub: usize,
    pub local: LocalEnsemble,
    pub joint: JointEnsemble,
    local_node: DegreePolynomial,
    joint_node: DegreePolynomial,
}

impl PartialEq for LdpclEnsemble {
    fn eq(&self, other: &Self) -> bool {
        self.m_blocks == other.m_blocks
            && self.n_sub == other.n_sub
            && self.local == other.local
            && self.joint == other.joint
    }
}

impl LdpclEnsemble {
    pub fn new(m_blocks: usize, n_sub: usize, local: LocalEnsemble, joint: JointEnsemble) -> Result<Self> {
        if m_blocks == 0 || n_sub == 0 {
            return Err(Error::InvalidDistribution("M and n must be positive".into()));
        }
        let local_node = local.lambda.edge_to_node(0.0)?;
        let joint_node = joint.lambda.edge_to_node(joint.p0)?;
        Ok(Self {
            m_blocks,
            n_sub,
            local,
            joint,
            local_node,
            joint_node,
        })
    }

    pub fn regular(m_blocks: usize, n_sub: usize, l_l: u32, r_l: u32, l_j: u32, r_j: u32) -> Result<Self> {
        Self::new(
            m_blocks,
            n_sub,
            LocalEnsemble::regular(l_l, r_l)?,
            JointEnsemble::regular(l_j, r_j)?,
        )
    }

    /// `Lambda_L`, node perspective.
    pub fn local_node(&self) -> &DegreePolynomial {
        &self.local_node
    }

    /// `Lambda_J`, node perspective, including the `p0` constant term.
    pub fn joint_node(&self) -> &DegreePolynomial {
        &self.joint_node
    }

    pub fn p0(&self) -> f64 {
        self.joint.p0
    }

    /// `1 - int rho_L / int lambda_L - (int rho_J / int lambda_J)(1 - p0)`; may be negative.
    pub fn design_rate(&self) -> f64 {
        self.local.design_rate() - self.joint.rate_loss()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: EnsembleFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&EnsembleFile::from(self)).expect("ensemble serializes")
    }
}

/// On-disk ensemble description; degrees are edge-perspective node degrees.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleFile {
    #[serde(rename = "M")]
    pub m: usize,
    pub n: usize,
    pub local: LocalFile,
    pub joint: JointFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalFile {
    pub lambda: Vec<(u32, f64)>,
    pub rho: Vec<(u32, f64)>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_degree_one: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointFile {
    pub lambda: Vec<(u32, f64)>,
    pub rho: Vec<(u32, f64)>,
    pub p0: f64,
}

impl TryFrom<EnsembleFile> for LdpclEnsemble {
    type Error = Error;

    fn try_from(f: EnsembleFile) -> Result<Self> {
        let local = LocalEnsemble::with_options(
            DegreePolynomial::from_edge_degrees(&f.local.lambda)?,
            DegreePolynomial::from_edge_degrees(&f.local.rho)?,
            f.local.allow_degree_one,
        )?;
        let joint = JointEnsemble::new(
            DegreePolynomial::from_edge_degrees(&f.joint.lambda)?,
            DegreePolynomial::from_edge_degrees(&f.joint.rho)?,
            f.joint.p0,
        )?;
        LdpclEnsemble::new(f.m, f.n, local, joint)
    }
}

impl From<&LdpclEnsemble> for EnsembleFile {
    fn from(e: &LdpclEnsemble) -> Self {
        Self {
            m: e.m_blocks,
            n: e.n_sub,
            local: LocalFile {
                lambda: e.local.lambda.edge_degrees(),
                rho: e.local.rho.edge_degrees(),
                allow_degree_one: e.local.allow_degree_one,
            },
            joint: JointFile {
                lambda: e.joint.lambda.edge_degrees(),
                rho: e.joint.rho.edge_degrees(),
                p0: e.joint.p0,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(pairs: &[(u32, f64)]) -> DegreePolynomial {
        DegreePolynomial::from_edge_degrees(pairs).unwrap()
    }

    #[test]
    fn regular_rate() {
        let e = LdpclEnsemble::regular(4, 100, 2, 6, 1, 6).unwrap();
        assert!((e.design_rate() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn node_edge_round_trip() {
        let lambda = edge(&[(2, 0.3), (3, 0.5), (7, 0.2)]);
        let node = lambda.edge_to_node(0.0).unwrap();
        let back = node.node_to_edge().unwrap();
        for (a, b) in lambda.terms().iter().zip(back.terms()) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn p0_enters_as_constant_term() {
        let node = edge(&[(2, 1.0)]).edge_to_node(0.25).unwrap();
        assert_eq!(node.value(0.0), 0.25);
        assert!((node.value(1.0) - 1.0).abs() < 1e-15);
        assert!((node.value(0.5) - (0.25 + 0.75 * 0.25)).abs() < 1e-15);
    }

    #[test]
    fn normalization_tolerance() {
        assert!(DegreePolynomial::new(Perspective::Edge, [(1, 0.5), (2, 0.5 + 1e-13)]).is_ok());
        assert!(DegreePolynomial::new(Perspective::Edge, [(1, 0.5), (2, 0.5 + 1e-9)]).is_err());
        assert!(DegreePolynomial::new(Perspective::Edge, [(1, -0.1), (2, 1.1)]).is_err());
    }

    #[test]
    fn degree_one_local_rejected_by_default() {
        let lambda = edge(&[(1, 0.1), (2, 0.9)]);
        let rho = edge(&[(6, 1.0)]);
        assert!(LocalEnsemble::new(lambda.clone(), rho.clone()).is_err());
        assert!(LocalEnsemble::with_options(lambda, rho, true).is_ok());
    }

    #[test]
    fn eval_rejects_outside_unit_interval() {
        let p = edge(&[(3, 1.0)]);
        assert!(p.eval(1.5).is_err());
        assert!(p.eval(-0.1).is_err());
        assert_eq!(p.eval(0.5).unwrap(), 0.25);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"M":4,"n":100,"local":{"lambda":[[2,1.0]],"rho":[[3,0.5],[4,0.5]]},
                       "joint":{"lambda":[[2,0.3396],[3,0.6604]],"rho":[[6,1.0]],"p0":0.25}}"#;
        let e = LdpclEnsemble::from_json(text).unwrap();
        let again = LdpclEnsemble::from_json(&e.to_json()).unwrap();
        assert_eq!(e, again);
        assert_eq!(e.joint.lambda.mass(2), 0.6604);
    }
}
