//! Dense simplex method in dictionary form with Bland's anti-cycling rule.
//!
//! Variables are implicitly nonnegative. The dictionary keeps one row per
//! basic variable, `x_B = b - A x_N`, so a pivot costs `O(rows * cols)` with
//! `cols` the number of structural variables rather than rows + columns.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub constraints: Vec<Constraint>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, sense: Sense) -> Self {
        Self {
            objective,
            sense,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn less_eq(&mut self, coeffs: Vec<f64>, bound: f64) -> &mut Self {
        self.constraints.push(Constraint {
            coeffs,
            relation: Relation::Le,
            bound,
        });
        self
    }

    pub fn equal(&mut self, coeffs: Vec<f64>, bound: f64) -> &mut Self {
        self.constraints.push(Constraint {
            coeffs,
            relation: Relation::Eq,
            bound,
        });
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

/// Solves `p`; `None` when it is infeasible or unbounded.
pub fn lp_solve(p: &LpProblem) -> Result<Option<Vec<f64>>> {
    Ok(match solve(p)? {
        LpSolution::Optimal { x, .. } => Some(x),
        _ => None,
    })
}

const EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

struct Dictionary {
    /// `rows x (cols + 1)`; the last column holds `b`.
    a: Vec<f64>,
    rows: usize,
    cols: usize,
    /// Objective `z = v + sum c_j x_{N(j)}`.
    c: Vec<f64>,
    v: f64,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    pivots: usize,
}

impl Dictionary {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.cols + 1) + j]
    }

    #[inline]
    fn b(&self, i: usize) -> f64 {
        self.a[i * (self.cols + 1) + self.cols]
    }

    /// Exchanges basic row `r` with nonbasic column `s`.
    fn pivot(&mut self, r: usize, s: usize) -> Result<()> {
        self.pivots += 1;
        if self.pivots > MAX_PIVOTS {
            return Err(Error::Numerical("simplex pivot limit exceeded".into()));
        }
        let w = self.cols + 1;
        let p = self.at(r, s);
        if p.abs() < 1e-12 {
            return Err(Error::Numerical(format!("pivot element {p:e} too small")));
        }
        // new row r expresses the entering variable
        let row_r: Vec<f64> = {
            let row = &mut self.a[r * w..(r + 1) * w];
            for (j, val) in row.iter_mut().enumerate() {
                if j == s {
                    *val = 1.0 / p;
                } else {
                    *val /= p;
                }
            }
            row.to_vec()
        };
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.a[i * w + s];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.a[i * w..(i + 1) * w];
            for j in 0..w {
                if j == s {
                    row[j] = -f * row_r[s];
                } else {
                    row[j] -= f * row_r[j];
                }
            }
        }
        let cs = self.c[s];
        self.v += cs * row_r[self.cols];
        for j in 0..self.cols {
            if j == s {
                self.c[j] = -cs * row_r[s];
            } else {
                self.c[j] -= cs * row_r[j];
            }
        }
        std::mem::swap(&mut self.basic[r], &mut self.nonbasic[s]);
        Ok(())
    }

    /// Runs the simplex method on the current objective; `false` if unbounded.
    fn optimize(&mut self) -> Result<bool> {
        loop {
            // Bland: lowest-labelled improving variable enters
            let entering = (0..self.cols)
                .filter(|&j| self.c[j] > EPS)
                .min_by_key(|&j| self.nonbasic[j]);
            let Some(s) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, s);
                if a > EPS {
                    let ratio = self.b(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            let tie = (ratio - best).abs() <= 1e-12 * best.abs().max(1.0);
                            if ratio < best && !tie || tie && self.basic[i] < self.basic[k] {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, s)?;
        }
    }
}

pub fn solve(p: &LpProblem) -> Result<LpSolution> {
    let n = p.num_vars();
    if n == 0 {
        return Err(Error::Precondition("LP without variables".into()));
    }
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &p.constraints {
        if c.coeffs.len() != n {
            return Err(Error::Precondition(format!(
                "constraint has {} coefficients, expected {n}",
                c.coeffs.len()
            )));
        }
        rows.push((c.coeffs.clone(), c.bound));
        if c.relation == Relation::Eq {
            rows.push((c.coeffs.iter().map(|v| -v).collect(), -c.bound));
        }
    }
    let m = rows.len();
    let sign = if p.sense == Sense::Maximize { 1.0 } else { -1.0 };
    let objective: Vec<f64> = p.objective.iter().map(|v| sign * v).collect();

    // labels: 0..n structural, n..n+m slacks, n+m auxiliary
    let aux = n + m;
    let cols = n + 1;
    let mut a = vec![0.0; m * (cols + 1)];
    for (i, (coeffs, b)) in rows.iter().enumerate() {
        let row = &mut a[i * (cols + 1)..(i + 1) * (cols + 1)];
        row[..n].copy_from_slice(coeffs);
        row[n] = -1.0;
        row[cols] = *b;
    }
    let mut d = Dictionary {
        a,
        rows: m,
        cols,
        c: vec![0.0; cols],
        v: 0.0,
        basic: (n..n + m).collect(),
        nonbasic: (0..=n).map(|j| if j == n { aux } else { j }).collect(),
        pivots: 0,
    };

    let most_negative = (0..m).min_by(|&i, &k| d.b(i).total_cmp(&d.b(k)));
    if let Some(r) = most_negative.filter(|&r| d.b(r) < 0.0) {
        // phase 1: maximize -x_aux
        d.c[n] = -1.0;
        d.pivot(r, n)?;
        d.optimize()?;
        if d.v < -1e-9 * (1.0 + rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max)) {
            return Ok(LpSolution::Infeasible);
        }
        if let Some(r) = d.basic.iter().position(|&l| l == aux) {
            // degenerate: the auxiliary variable is basic at level zero
            let s = (0..d.cols)
                .filter(|&j| d.at(r, j).abs() > 1e-12)
                .max_by(|&x, &y| d.at(r, x).abs().total_cmp(&d.at(r, y).abs()))
                .ok_or_else(|| Error::Numerical("cannot drive auxiliary variable out".into()))?;
            d.pivot(r, s)?;
        }
    }

    // drop the auxiliary column and install the real objective
    let aux_col = d.nonbasic.iter().position(|&l| l == aux).expect("auxiliary is nonbasic");
    let mut reduced = Dictionary {
        a: Vec::with_capacity(m * (n + 1)),
        rows: m,
        cols: n,
        c: vec![0.0; n],
        v: 0.0,
        basic: d.basic.clone(),
        nonbasic: d.nonbasic.iter().copied().filter(|&l| l != aux).collect(),
        pivots: d.pivots,
    };
    for i in 0..m {
        for j in 0..=d.cols {
            if j != aux_col {
                reduced.a.push(d.at(i, j));
            }
        }
    }
    for (j, &label) in reduced.nonbasic.iter().enumerate() {
        if label < n {
            reduced.c[j] += objective[label];
        }
    }
    for i in 0..m {
        let label = reduced.basic[i];
        if label < n {
            let cl = objective[label];
            reduced.v += cl * reduced.b(i);
            for j in 0..n {
                reduced.c[j] -= cl * reduced.at(i, j);
            }
        }
    }
    if !reduced.optimize()? {
        return Ok(LpSolution::Unbounded);
    }
    let mut x = vec![0.0; n];
    for i in 0..m {
        let label = reduced.basic[i];
        if label < n {
            x[label] = reduced.b(i).max(0.0);
        }
    }
    Ok(LpSolution::Optimal {
        objective: sign * reduced.v,
        x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable() {
        let mut p = LpProblem::new(vec![1.0], Sense::Maximize);
        p.less_eq(vec![1.0], 1.0);
        assert_eq!(lp_solve(&p).unwrap(), Some(vec![1.0]));
    }

    #[test]
    fn infeasible_pair() {
        let mut p = LpProblem::new(vec![1.0], Sense::Maximize);
        p.less_eq(vec![1.0], 0.0).less_eq(vec![-1.0], -1.0);
        assert_eq!(lp_solve(&p).unwrap(), None);
    }

    #[test]
    fn unbounded() {
        let mut p = LpProblem::new(vec![1.0, 1.0], Sense::Maximize);
        p.less_eq(vec![1.0, -1.0], 1.0);
        assert_eq!(solve(&p).unwrap(), LpSolution::Unbounded);
    }

    #[test]
    fn textbook_example() {
        // max 3x + y + 2z; x + y + 3z <= 30; 2x + 2y + 5z <= 24; 4x + y + 2z <= 36
        let mut p = LpProblem::new(vec![3.0, 1.0, 2.0], Sense::Maximize);
        p.less_eq(vec![1.0, 1.0, 3.0], 30.0)
            .less_eq(vec![2.0, 2.0, 5.0], 24.0)
            .less_eq(vec![4.0, 1.0, 2.0], 36.0);
        match solve(&p).unwrap() {
            LpSolution::Optimal { x, objective } => {
                assert!((objective - 28.0).abs() < 1e-9);
                assert!((x[0] - 8.0).abs() < 1e-9 && (x[1] - 4.0).abs() < 1e-9 && x[2].abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equality_and_minimize() {
        // min x + 2y s.t. x + y = 1, x <= 0.3
        let mut p = LpProblem::new(vec![1.0, 2.0], Sense::Minimize);
        p.equal(vec![1.0, 1.0], 1.0).less_eq(vec![1.0, 0.0], 0.3);
        let x = lp_solve(&p).unwrap().unwrap();
        assert!((x[0] - 0.3).abs() < 1e-12 && (x[1] - 0.7).abs() < 1e-12);
    }
}
