//! Union bounds on the block erasure probability of ML decoding for regular
//! codes of finite length, with exact rational weight-enumerator terms.
//!
//! `A(l, r, n, w)` is the probability that a fixed set of `w` variables of a
//! random `(l, r)`-regular code of length `n` sums to zero in every check,
//! i.e. `coef(((1+x)^r + (1-x)^r)/2)^{nl/r}, x^{wl}) / C(nl, wl)`.

use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numfmt::fmt12;

/// Default cap on the estimated floating-point work of one bound evaluation.
pub const DEFAULT_MAX_OPS: f64 = 5e10;
/// Largest sub-block length for which `f64` binomials stay finite.
const MAX_LENGTH: usize = 1000;

/// Coefficients of `(((1+x)^r + (1-x)^r)/2)^power` in `u = x^2`.
fn even_power(r: u32, power: u64) -> Vec<BigUint> {
    let base: Vec<BigUint> = (0..=r / 2).map(|k| binomial(r as u64, 2 * k as u64)).collect();
    let mut acc = vec![BigUint::one()];
    for _ in 0..power {
        let mut next = vec![BigUint::zero(); acc.len() + base.len() - 1];
        for (i, a) in acc.iter().enumerate() {
            for (j, b) in base.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        acc = next;
    }
    acc
}

/// Coefficient of `x^target` in `(((1+x)^r + (1-x)^r)/2)^power`.
pub fn poly_power_coef(r: u32, power: u64, target: u64) -> BigUint {
    if target % 2 == 1 {
        return BigUint::zero();
    }
    even_power(r, power)
        .into_iter()
        .nth((target / 2) as usize)
        .unwrap_or_default()
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut c = BigUint::one();
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

fn check_lengths(l: u32, r: u32, n: usize) -> Result<u64> {
    if l == 0 || r == 0 || n == 0 {
        return Err(Error::Precondition(format!("need l, r, n >= 1, got ({l}, {r}, {n})")));
    }
    let edges = n as u64 * l as u64;
    if !edges.is_multiple_of(r as u64) {
        return Err(Error::Precondition(format!("r = {r} does not divide n l = {edges}")));
    }
    Ok(edges / r as u64)
}

/// Exact `A(l, r, n, w)`.
pub fn a_value(l: u32, r: u32, n: usize, w: usize) -> Result<BigRational> {
    let checks = check_lengths(l, r, n)?;
    if w > n {
        return Err(Error::Precondition(format!("w = {w} exceeds n = {n}")));
    }
    let edges = n as u64 * l as u64;
    let wl = w as u64 * l as u64;
    Ok(BigRational::new(
        BigInt::from(poly_power_coef(r, checks, wl)),
        BigInt::from(binomial(edges, wl)),
    ))
}

/// Nearest `f64`; zero on underflow.
pub fn ratio_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

fn ln_big(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().map_or(f64::NAN, f64::ln);
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::NAN);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a positive rational without overflow or underflow.
pub fn ratio_ln(q: &BigRational) -> f64 {
    if q.is_zero() {
        return f64::NEG_INFINITY;
    }
    let v = ratio_to_f64(q);
    if v.is_normal() {
        return v.ln();
    }
    ln_big(q.numer()) - ln_big(q.denom())
}

/// `A(l, r, n, w)` for `w = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ATable {
    pub l: u32,
    pub r: u32,
    pub n: usize,
    values: Vec<BigRational>,
}

impl ATable {
    pub fn compute(l: u32, r: u32, n: usize) -> Result<Self> {
        let checks = check_lengths(l, r, n)?;
        let coefs = even_power(r, checks);
        let edges = n as u64 * l as u64;
        // C(edges, k) for every k, built incrementally
        let mut row = Vec::with_capacity(edges as usize + 1);
        let mut c = BigUint::one();
        row.push(c.clone());
        for k in 0..edges {
            c = c * (edges - k) / (k + 1);
            row.push(c.clone());
        }
        let values = (0..=n)
            .map(|w| {
                let wl = w as u64 * l as u64;
                let num = if wl.is_multiple_of(2) {
                    coefs.get((wl / 2) as usize).cloned().unwrap_or_default()
                } else {
                    BigUint::zero()
                };
                BigRational::new(BigInt::from(num), BigInt::from(row[wl as usize].clone()))
            })
            .collect();
        Ok(Self { l, r, n, values })
    }

    pub fn get(&self, w: usize) -> Option<&BigRational> {
        self.values.get(w)
    }

    pub fn values(&self) -> &[BigRational] {
        &self.values
    }

    pub fn to_f64s(&self) -> Vec<f64> {
        self.values.iter().map(ratio_to_f64).collect()
    }

    /// One `w,numerator,denominator` line per weight.
    pub fn to_cache_string(&self) -> String {
        self.values
            .iter()
            .enumerate()
            .map(|(w, q)| format!("{w},{},{}\n", q.numer(), q.denom()))
            .collect()
    }

    pub fn from_cache_str(l: u32, r: u32, n: usize, text: &str) -> Result<Self> {
        check_lengths(l, r, n)?;
        let mut values = Vec::with_capacity(n + 1);
        for (i, line) in text.lines().filter(|s| !s.trim().is_empty()).enumerate() {
            let parts: Vec<&str> = line.trim().split(',').collect();
            let bad = || Error::Parse(format!("A-table cache line {}: {line:?}", i + 1));
            let [w, num, den] = parts[..] else {
                return Err(bad());
            };
            if w.parse::<usize>().map_err(|_| bad())? != i {
                return Err(bad());
            }
            let num: BigInt = num.parse().map_err(|_| bad())?;
            let den: BigInt = den.parse().map_err(|_| bad())?;
            if den.is_zero() {
                return Err(bad());
            }
            values.push(BigRational::new(num, den));
        }
        if values.len() != n + 1 {
            return Err(Error::Parse(format!(
                "A-table cache has {} rows, expected {}",
                values.len(),
                n + 1
            )));
        }
        Ok(Self { l, r, n, values })
    }

    pub fn cache_path(dir: &Path, l: u32, r: u32, n: usize) -> PathBuf {
        dir.join(format!("a_l{l}_r{r}_n{n}.csv"))
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = Self::cache_path(dir, self.l, self.r, self.n);
        fs::write(&path, self.to_cache_string())?;
        Ok(path)
    }

    /// Reads the table from `dir` if cached, otherwise computes and stores it.
    pub fn load_or_compute(dir: &Path, l: u32, r: u32, n: usize) -> Result<Self> {
        let path = Self::cache_path(dir, l, r, n);
        if path.exists() {
            return Self::from_cache_str(l, r, n, &fs::read_to_string(&path)?);
        }
        let table = Self::compute(l, r, n)?;
        table.save(dir)?;
        Ok(table)
    }
}

/// `(M, n, l_L, r_L, l_J, r_J)` of a regular two-sided code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MlParams {
    #[serde(rename = "M")]
    pub m_blocks: usize,
    pub n: usize,
    pub l_l: u32,
    pub r_l: u32,
    pub l_j: u32,
    pub r_j: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlOptions {
    /// Clamp each pattern's union bound at 1.
    pub clamp: bool,
    pub max_ops: f64,
}

impl Default for MlOptions {
    fn default() -> Self {
        Self {
            clamp: true,
            max_ops: DEFAULT_MAX_OPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundPoint {
    pub eps: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlBoundCurve {
    pub label: String,
    pub points: Vec<BoundPoint>,
}

impl MlBoundCurve {
    pub fn bounds(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.bound).collect()
    }
}

/// `eps,bound_ldpcl,bound_baseline`; the baseline column is empty when absent.
pub fn bound_csv(ldpcl: &MlBoundCurve, baseline: Option<&MlBoundCurve>) -> String {
    let mut out = String::from("eps,bound_ldpcl,bound_baseline\n");
    for (i, p) in ldpcl.points.iter().enumerate() {
        let b = baseline.and_then(|c| c.points.get(i)).map_or(String::new(), |q| fmt12(q.bound));
        out.push_str(&format!("{},{},{b}\n", fmt12(p.eps), fmt12(p.bound)));
    }
    out
}

fn check_grid(eps_grid: &[f64]) -> Result<()> {
    for &eps in eps_grid {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Domain {
                name: "epsilon",
                value: eps,
                domain: "[0, 1]",
            });
        }
    }
    Ok(())
}

/// `ln C(n, e) + e ln eps + (n - e) ln(1 - eps)` for `e = 0..=n`.
fn ln_pattern_weights(n: usize, eps: f64) -> Vec<f64> {
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=n).scan(0.0, |acc, i| {
            *acc += (i as f64).ln();
            Some(*acc)
        }))
        .collect();
    let (le, lb) = (eps.ln(), (1.0 - eps).ln());
    (0..=n)
        .map(|e| {
            let mut v = ln_fact[n] - ln_fact[e] - ln_fact[n - e];
            // 0 * ln 0 = 0
            if e > 0 {
                v += e as f64 * le;
            }
            if e < n {
                v += (n - e) as f64 * lb;
            }
            v
        })
        .collect()
}

/// `C(e, w)` as `f64` for `0 <= w <= e <= n`.
fn binomial_rows(n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = vec![vec![1.0]];
    for e in 1..=n {
        let prev = &rows[e - 1];
        let row = (0..=e)
            .map(|w| {
                let a = if w > 0 { prev[w - 1] } else { 0.0 };
                let b = if w < e { prev[w] } else { 0.0 };
                a + b
            })
            .collect();
        rows.push(row);
    }
    rows
}

fn ln_binomial_f64(n: usize, k: usize) -> f64 {
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

fn estimated_ops(m: usize, n: usize) -> f64 {
    // sorted vectors times the closing dot product, plus prefix convolutions
    let sorted = |k: usize| (ln_binomial_f64(n + k - 1, k)).exp();
    let mut ops = sorted(m) * n as f64;
    if m >= 2 {
        ops += sorted(m - 1) * (m * n * n) as f64;
    }
    ops
}

struct Kernel<'a> {
    n: usize,
    m: usize,
    /// `T_e(w) = C(e, w) A_L(w)`.
    t: Vec<Vec<f64>>,
    /// `A_J` with `A_J(0) = 0`, which removes the all-zero word.
    a_j: &'a [f64],
    clamp: bool,
    /// Per epsilon: `ln C(n, e) eps^e (1-eps)^{n-e}` for each `e`.
    ln_w: &'a [Vec<f64>],
    /// Per epsilon: `ln C(M, m) + (M - m) n ln(1 - eps)`.
    ln_const: &'a [f64],
    ln_fact: Vec<f64>,
}

impl Kernel<'_> {
    fn convolve(&self, p: &[f64], e: usize) -> Vec<f64> {
        let t = &self.t[e];
        let mut out = vec![0.0; p.len() + t.len() - 1];
        for (i, &a) in p.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in t.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    }

    /// `Q(w) = sum_V P(V) A_J(V + w)` for `w = 0..=n`.
    fn correlate(&self, p: &[f64]) -> Vec<f64> {
        (0..=self.n)
            .map(|w| {
                p.iter()
                    .enumerate()
                    .filter_map(|(v, &pv)| self.a_j.get(v + w).map(|a| pv * a))
                    .sum()
            })
            .collect()
    }

    /// Ordered arrangements of a sorted vector.
    fn ln_multiplicity(&self, es: &[usize]) -> f64 {
        let mut ln = self.ln_fact[es.len()];
        let mut run = 1;
        for i in 1..=es.len() {
            if i < es.len() && es[i] == es[i - 1] {
                run += 1;
            } else {
                ln -= self.ln_fact[run];
                run = 1;
            }
        }
        ln
    }

    fn accumulate(&self, es: &[usize], inner: f64, acc: &mut [f64]) {
        let value = if self.clamp { inner.clamp(0.0, 1.0) } else { inner };
        if value == 0.0 {
            return;
        }
        let ln_mult = self.ln_multiplicity(es);
        for (k, slot) in acc.iter_mut().enumerate() {
            let ln_p: f64 = self.ln_const[k] + ln_mult + es.iter().map(|&e| self.ln_w[k][e]).sum::<f64>();
            *slot += ln_p.exp() * value;
        }
    }

    /// Depth-first walk over non-decreasing `e_1 <= ... <= e_m`, carrying the
    /// convolution of the prefix arrays.
    fn walk(&self, es: &mut Vec<usize>, prefix: &[f64], acc: &mut [f64]) {
        let start = es.last().copied().unwrap_or(1);
        if es.len() + 1 == self.m {
            let q = self.correlate(prefix);
            for e in start..=self.n {
                let inner: f64 = self.t[e].iter().zip(&q).map(|(a, b)| a * b).sum();
                es.push(e);
                self.accumulate(es, inner, acc);
                es.pop();
            }
        } else {
            for e in start..=self.n {
                let next = self.convolve(prefix, e);
                es.push(e);
                self.walk(es, &next, acc);
                es.pop();
            }
        }
    }
}

/// Union bound on the expected ML block erasure probability of the regular
/// two-sided ensemble, for every `eps` in `eps_grid`.
pub fn ml_union_bound(params: &MlParams, eps_grid: &[f64]) -> Result<MlBoundCurve> {
    ml_union_bound_with(params, eps_grid, &MlOptions::default(), None)
}

/// As [`ml_union_bound`], optionally with precomputed `(A_L, A_J)` tables.
pub fn ml_union_bound_with(
    params: &MlParams,
    eps_grid: &[f64],
    opts: &MlOptions,
    tables: Option<(&ATable, &ATable)>,
) -> Result<MlBoundCurve> {
    check_grid(eps_grid)?;
    let MlParams {
        m_blocks: big_m,
        n,
        l_l,
        r_l,
        l_j,
        r_j,
    } = *params;
    if big_m == 0 {
        return Err(Error::Precondition("M must be positive".into()));
    }
    if n > MAX_LENGTH {
        return Err(Error::ResourceGuard(format!("sub-block length {n} exceeds {MAX_LENGTH}")));
    }
    let ops = estimated_ops(big_m, n);
    if ops > opts.max_ops {
        return Err(Error::ResourceGuard(format!(
            "bound needs about {ops:.2e} operations, budget is {:.2e}",
            opts.max_ops
        )));
    }
    let owned;
    let (table_l, table_j) = match tables {
        Some(t) => t,
        None => {
            owned = (ATable::compute(l_l, r_l, n)?, ATable::compute(l_j, r_j, big_m * n)?);
            (&owned.0, &owned.1)
        }
    };
    if (table_l.l, table_l.r, table_l.n) != (l_l, r_l, n) || (table_j.l, table_j.r, table_j.n) != (l_j, r_j, big_m * n) {
        return Err(Error::Precondition("A-tables do not match the parameters".into()));
    }
    let a_l = table_l.to_f64s();
    let mut a_j = table_j.to_f64s();
    a_j[0] = 0.0;
    let rows = binomial_rows(n);
    let t: Vec<Vec<f64>> = (0..=n).map(|e| (0..=e).map(|w| rows[e][w] * a_l[w]).collect()).collect();
    let ln_w: Vec<Vec<f64>> = eps_grid.iter().map(|&eps| ln_pattern_weights(n, eps)).collect();
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=big_m).scan(0.0, |acc, i| {
            *acc += (i as f64).ln();
            Some(*acc)
        }))
        .collect();

    let mut totals = vec![0.0; eps_grid.len()];
    for m in 1..=big_m {
        let ln_const: Vec<f64> = eps_grid
            .iter()
            .map(|&eps| {
                let idle = (big_m - m) * n;
                let lb = if idle == 0 { 0.0 } else { idle as f64 * (1.0 - eps).ln() };
                ln_binomial_f64(big_m, m) + lb
            })
            .collect();
        let kernel = Kernel {
            n,
            m,
            t: t.clone(),
            a_j: &a_j,
            clamp: opts.clamp,
            ln_w: &ln_w,
            ln_const: &ln_const,
            ln_fact: ln_fact.clone(),
        };
        // one task per first coordinate; partial sums are added in order
        let partials: Vec<Vec<f64>> = (1..=n)
            .into_par_iter()
            .map(|e1| {
                let mut acc = vec![0.0; eps_grid.len()];
                let mut es = vec![e1];
                if m == 1 {
                    let inner: f64 = kernel.t[e1].iter().zip(kernel.a_j).map(|(a, b)| a * b).sum();
                    kernel.accumulate(&es, inner, &mut acc);
                } else {
                    let prefix = kernel.t[e1].clone();
                    kernel.walk(&mut es, &prefix, &mut acc);
                }
                acc
            })
            .collect();
        for p in partials {
            for (tot, v) in totals.iter_mut().zip(p) {
                *tot += v;
            }
        }
    }
    Ok(MlBoundCurve {
        label: format!(
            "LDPCL M={big_m} n={n} ({l_l},{r_l},{l_j},{r_j})"
        ),
        points: eps_grid
            .iter()
            .zip(totals)
            .map(|(&eps, bound)| BoundPoint { eps, bound })
            .collect(),
    })
}

/// Union bound for a plain `(l, r)`-regular code of length `n`.
pub fn ldpc_union_bound(l: u32, r: u32, n: usize, eps_grid: &[f64]) -> Result<MlBoundCurve> {
    ldpc_union_bound_with(&ATable::compute(l, r, n)?, eps_grid, true)
}

pub fn ldpc_union_bound_with(table: &ATable, eps_grid: &[f64], clamp: bool) -> Result<MlBoundCurve> {
    check_grid(eps_grid)?;
    let n = table.n;
    if n > MAX_LENGTH {
        return Err(Error::ResourceGuard(format!("block length {n} exceeds {MAX_LENGTH}")));
    }
    let a = table.to_f64s();
    let rows = binomial_rows(n);
    let inner: Vec<f64> = (0..=n)
        .map(|e| {
            let v: f64 = (1..=e).map(|w| rows[e][w] * a[w]).sum();
            if clamp {
                v.min(1.0)
            } else {
                v
            }
        })
        .collect();
    let points = eps_grid
        .iter()
        .map(|&eps| {
            let ln_w = ln_pattern_weights(n, eps);
            let bound = (1..=n).map(|e| ln_w[e].exp() * inner[e]).sum();
            BoundPoint { eps, bound }
        })
        .collect();
    Ok(MlBoundCurve {
        label: format!("LDPC n={n} ({},{})", table.l, table.r),
        points,
    })
}

/// `a, a + step, ...` up to `b` inclusive (within rounding).
pub fn eps_range(a: f64, b: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || b < a {
        return Err(Error::Precondition(format!("bad range {a}:{b}:{step}")));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| a + k as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_examples() {
        assert_eq!(poly_power_coef(4, 2, 4), BigUint::from(38u32));
        assert_eq!(poly_power_coef(4, 2, 3), BigUint::zero());
        assert_eq!(poly_power_coef(2, 1, 0), BigUint::one());
        assert_eq!(poly_power_coef(4, 2, 8), BigUint::one());
        assert_eq!(poly_power_coef(4, 2, 10), BigUint::zero());
    }

    #[test]
    fn a_value_examples() {
        assert_eq!(a_value(2, 4, 4, 2).unwrap(), BigRational::new(19.into(), 35.into()));
        assert_eq!(a_value(3, 6, 12, 0).unwrap(), BigRational::one());
        assert!(a_value(3, 6, 7, 0).is_err());
        let table = ATable::compute(2, 4, 4).unwrap();
        assert_eq!(table.get(2).unwrap(), &a_value(2, 4, 4, 2).unwrap());
    }

    #[test]
    fn cache_round_trip() {
        let table = ATable::compute(2, 6, 12).unwrap();
        let back = ATable::from_cache_str(2, 6, 12, &table.to_cache_string()).unwrap();
        assert_eq!(back, table);
        assert!(ATable::from_cache_str(2, 6, 12, "0,1,1\n").is_err());
    }

    #[test]
    fn ln_of_tiny_ratio() {
        let q = BigRational::new(BigInt::one(), BigInt::from(10u32).pow(400));
        assert!((ratio_ln(&q) + 400.0 * 10f64.ln()).abs() < 1e-9);
        assert_eq!(ratio_to_f64(&q), 0.0);
    }

    #[test]
    fn zero_erasure_gives_zero() {
        let p = MlParams {
            m_blocks: 2,
            n: 8,
            l_l: 2,
            r_l: 4,
            l_j: 2,
            r_j: 4,
        };
        assert_eq!(ml_union_bound(&p, &[0.0]).unwrap().points[0].bound, 0.0);
        assert_eq!(ldpc_union_bound(3, 6, 12, &[0.0]).unwrap().points[0].bound, 0.0);
    }

    #[test]
    fn range_parsing() {
        assert_eq!(eps_range(0.3, 0.3, 0.1).unwrap(), vec![0.3]);
        assert_eq!(eps_range(0.05, 0.5, 0.05).unwrap().len(), 10);
        assert!(eps_range(0.5, 0.1, 0.1).is_err());
    }

    #[test]
    fn resource_guard() {
        let p = MlParams {
            m_blocks: 6,
            n: 300,
            l_l: 2,
            r_l: 6,
            l_j: 1,
            r_j: 6,
        };
        assert!(matches!(ml_union_bound(&p, &[0.1]), Err(Error::ResourceGuard(_))));
    }
}
