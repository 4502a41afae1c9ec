//! Multi-product newsvendor: loss, worst-case subgradients, scenario
//! regularizer and exact/heuristic solvers.
//!
//! The empirical cost is separable across products and the regularizer only
//! depends on which side of each scenario threshold every order quantity
//! lies. The box is therefore cut into cells (one threshold interval per
//! product), each cell is solved in closed form, and the best cell wins.

use std::path::Path;

use rand::Rng as _;
use serde_json::json;

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::par;
use crate::rng;
use crate::scenarios::{csv_err, Aggregation, RegularizerSpec};

/// Unit cost `c`, price `v`, salvage `g`, shortage penalty `b`, capacity `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct NewsvendorParams {
    pub c: Vec<f64>,
    pub v: Vec<f64>,
    pub g: Vec<f64>,
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

impl NewsvendorParams {
    pub fn new(c: Vec<f64>, v: Vec<f64>, g: Vec<f64>, b: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        let p = Self { c, v, g, b, a };
        p.validate()?;
        Ok(p)
    }

    /// Five-product instance used throughout the experiments.
    pub fn reference() -> Self {
        Self {
            c: vec![4.0, 5.5, 6.0, 8.0, 9.0],
            v: vec![11.0, 13.0, 14.0, 17.0, 19.0],
            g: vec![1.0, 1.5, 1.5, 2.0, 2.5],
            b: vec![12.0, 13.5, 14.5, 17.0, 18.5],
            a: vec![12.0, 18.0, 24.0, 30.0, 36.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// Checks `v > g`, `b >= 0`, `b >= v - g`, `a > 0` and positivity.
    pub fn validate(&self) -> Result<()> {
        let d = self.c.len();
        if d == 0 {
            return Err(Error::EmptyInput);
        }
        for (name, vec) in [("v", &self.v), ("g", &self.g), ("b", &self.b), ("a", &self.a)] {
            if vec.len() != d {
                return Err(Error::InvalidParams(format!("{name} has length {} but c has {d}", vec.len())));
            }
        }
        for k in 0..d {
            let (c, v, g, b, a) = (self.c[k], self.v[k], self.g[k], self.b[k], self.a[k]);
            if ![c, v, g, b, a].iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidParams(format!("non-finite parameter for product {k}")));
            }
            if c <= 0.0 || v <= 0.0 || g <= 0.0 || b <= 0.0 || a <= 0.0 {
                return Err(Error::InvalidParams(format!("parameters of product {k} must be positive")));
            }
            if v <= g {
                return Err(Error::InvalidParams(format!("product {k}: need v > g")));
            }
            if b < v - g {
                return Err(Error::InvalidParams(format!("product {k}: need b >= v - g")));
            }
        }
        Ok(())
    }

    /// Reads a CSV with header `c,v,g,b,a` and one row per product.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(csv_err)?;
        let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
        if header != ["c", "v", "g", "b", "a"] {
            return Err(Error::Parse {
                line: 1,
                col: None,
                msg: "expected header c,v,g,b,a".into(),
            });
        }
        let mut cols: [Vec<f64>; 5] = Default::default();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                line: i + 2,
                col: None,
                msg: e.to_string(),
            })?;
            if rec.len() != 5 {
                return Err(Error::Parse {
                    line: i + 2,
                    col: None,
                    msg: format!("expected 5 fields, found {}", rec.len()),
                });
            }
            for (j, cell) in rec.iter().enumerate() {
                cols[j].push(cell.parse().map_err(|_| Error::Parse {
                    line: i + 2,
                    col: Some(j + 1),
                    msg: format!("not a number: '{cell}'"),
                })?);
            }
        }
        let [c, v, g, b, a] = cols;
        Self::new(c, v, g, b, a)
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        for (k, (&xk, &ak)) in x.iter().zip(&self.a).enumerate() {
            if !(0.0..=ak).contains(&xk) {
                return Err(Error::InfeasibleDecision(format!("x[{k}] = {xk} outside [0, {ak}]")));
            }
        }
        Ok(())
    }
}

/// Cost `(c-g)'x + b'xi + (g-v-b)' min(x, xi)`.
pub fn loss(params: &NewsvendorParams, x: &[f64], xi: &[f64]) -> Result<f64> {
    params.check_x(x)?;
    if xi.len() != x.len() {
        return Err(Error::DimMismatch {
            expected: x.len(),
            got: xi.len(),
        });
    }
    Ok(loss_unchecked(params, x, xi))
}

pub(crate) fn loss_unchecked(p: &NewsvendorParams, x: &[f64], xi: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..x.len() {
        s += (p.c[k] - p.g[k]) * x[k] + p.b[k] * xi[k] + (p.g[k] - p.v[k] - p.b[k]) * x[k].min(xi[k]);
    }
    s
}

/// Cost in its four-term form: ordering cost minus revenue minus salvage
/// plus shortage penalty.
pub fn loss_original(params: &NewsvendorParams, x: &[f64], xi: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..x.len() {
        let sold = x[k].min(xi[k]);
        s += params.c[k] * x[k] - params.v[k] * sold - params.g[k] * (x[k] - sold) + params.b[k] * (xi[k] - sold);
    }
    s
}

/// Largest-norm subgradient of the loss in `xi` at `xi = zeta`: `b_k` where
/// `x_k <= zeta_k` (kink included), `g_k - v_k` otherwise.
pub fn worst_subgradient_xi(params: &NewsvendorParams, x: &[f64], zeta: &[f64]) -> Result<Vec<f64>> {
    params.check_x(x)?;
    if zeta.len() != x.len() {
        return Err(Error::DimMismatch {
            expected: x.len(),
            got: zeta.len(),
        });
    }
    Ok((0..x.len())
        .map(|k| if x[k] <= zeta[k] { params.b[k] } else { params.g[k] - params.v[k] })
        .collect())
}

/// Lipschitz modulus of the loss in `xi`: `||b||_2`.
pub fn lipschitz_modulus(params: &NewsvendorParams) -> f64 {
    params.b.iter().map(|b| b * b).sum::<f64>().sqrt()
}

fn check_spec(params: &NewsvendorParams, spec: &RegularizerSpec) -> Result<()> {
    if spec.aggregation() != Aggregation::Quadratic {
        return Err(Error::UnsupportedVariant(
            "the newsvendor regularizer uses quadratic aggregation only".into(),
        ));
    }
    if spec.dim() != params.dim() {
        return Err(Error::DimMismatch {
            expected: params.dim(),
            got: spec.dim(),
        });
    }
    Ok(())
}

/// `(sum_j r_j ||worst subgradient at zeta_j||^2)^(1/2)`.
pub fn regularizer(params: &NewsvendorParams, spec: &RegularizerSpec, x: &[f64]) -> Result<f64> {
    check_spec(params, spec)?;
    params.check_x(x)?;
    let mut acc = 0.0;
    for (z, r) in spec.scenarios().iter().zip(spec.weights()) {
        let s = worst_subgradient_xi(params, x, z)?;
        acc += r * s.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(acc.sqrt())
}

fn check_train(params: &NewsvendorParams, train: &DiscreteMeasure) -> Result<()> {
    if train.dim() != params.dim() {
        return Err(Error::DimMismatch {
            expected: params.dim(),
            got: train.dim(),
        });
    }
    Ok(())
}

/// Empirical expected cost.
pub fn saa_objective(params: &NewsvendorParams, train: &DiscreteMeasure, x: &[f64]) -> Result<f64> {
    check_train(params, train)?;
    params.check_x(x)?;
    Ok(train.expect(|xi| loss_unchecked(params, x, xi)))
}

/// Empirical cost plus `eps` times the scenario regularizer.
pub fn sbr_objective(
    params: &NewsvendorParams,
    train: &DiscreteMeasure,
    spec: &RegularizerSpec,
    eps: f64,
    x: &[f64],
) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidParams(format!("eps must be nonnegative, got {eps}")));
    }
    let saa = saa_objective(params, train, x)?;
    if eps == 0.0 {
        return Ok(saa);
    }
    Ok(saa + eps * regularizer(params, spec, x)?)
}

/// A newsvendor decision with its objective and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct NewsvendorSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub eps: f64,
    pub method: String,
    pub cells_visited: u64,
}

impl NewsvendorSolution {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "x": self.x,
            "objective": self.objective,
            "eps": self.eps,
            "method": self.method,
            "cells_visited": self.cells_visited,
        })
    }
}

/// Sample of one product's demand, sorted, with prefix sums.
struct Marginal {
    sorted: Vec<f64>,
    /// `cum_w[i]` = weight of the first `i` sorted atoms.
    cum_w: Vec<f64>,
    /// `cum_wx[i]` = weighted sum of the first `i` sorted atoms.
    cum_wx: Vec<f64>,
    lin: f64,
    kink: f64,
}

impl Marginal {
    fn new(params: &NewsvendorParams, train: &DiscreteMeasure, k: usize) -> Self {
        let mut pairs: Vec<(f64, f64)> = train
            .points()
            .iter()
            .zip(train.weights())
            .map(|(p, &w)| (p[k], w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cum_w = vec![0.0];
        let mut cum_wx = vec![0.0];
        for &(x, w) in &pairs {
            cum_w.push(cum_w.last().unwrap() + w);
            cum_wx.push(cum_wx.last().unwrap() + w * x);
        }
        Self {
            sorted: pairs.iter().map(|p| p.0).collect(),
            cum_w,
            cum_wx,
            lin: params.c[k] - params.g[k],
            kink: params.g[k] - params.v[k] - params.b[k],
        }
    }

    /// `(c-g) x + (g-v-b) E[min(x, xi)]` for this product.
    fn h(&self, x: f64) -> f64 {
        let i = self.sorted.partition_point(|&s| s <= x);
        let above = self.cum_w[self.sorted.len()] - self.cum_w[i];
        self.lin * x + self.kink * (self.cum_wx[i] + x * above)
    }

    /// Right derivative of `h` at `x`.
    fn right_slope(&self, x: f64) -> f64 {
        let i = self.sorted.partition_point(|&s| s <= x);
        let above = self.cum_w[self.sorted.len()] - self.cum_w[i];
        self.lin + self.kink * above
    }

    /// Smallest minimizer of `h` on `[lo, hi]` and the minimum.
    ///
    /// `h` is convex piecewise linear with breakpoints at the atoms, so the
    /// minimizer is the first candidate point whose right slope is
    /// nonnegative.
    fn argmin(&self, lo: f64, hi: f64) -> (f64, f64) {
        let tol = 1e-12 * (self.lin.abs() + self.kink.abs());
        let start = self.sorted.partition_point(|&s| s <= lo);
        let end = self.sorted.partition_point(|&s| s < hi);
        let mut x = lo;
        if self.right_slope(x) < -tol {
            x = hi;
            for &s in &self.sorted[start..end] {
                if self.right_slope(s) >= -tol {
                    x = s;
                    break;
                }
            }
        }
        (x, self.h(x))
    }
}

/// Options for the exact solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellOptions {
    /// Largest number of cells to enumerate.
    pub budget: usize,
    /// Gap between a threshold and the start of the next interval.
    pub delta: f64,
}

impl Default for CellOptions {
    fn default() -> Self {
        Self {
            budget: 2_000_000,
            delta: 1e-6,
        }
    }
}

/// Candidate intervals of one product with their cell data.
#[derive(Debug, Clone)]
struct Interval {
    lo: f64,
    hi: f64,
    x: f64,
    h: f64,
    /// `sum_j r_j z_jk^2` on this interval.
    q: f64,
}

fn intervals(
    params: &NewsvendorParams,
    spec: &RegularizerSpec,
    marg: &Marginal,
    k: usize,
    delta: f64,
) -> Vec<Interval> {
    let a = params.a[k];
    let mut t: Vec<f64> = spec
        .scenarios()
        .iter()
        .map(|z| z[k])
        .filter(|&z| z >= 0.0 && z < a)
        .collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    let below = params.b[k] * params.b[k];
    let above = (params.g[k] - params.v[k]).powi(2);
    let mut out = Vec::with_capacity(t.len() + 1);
    for i in 0..=t.len() {
        let lo = if i == 0 { 0.0 } else { t[i - 1] + delta };
        let hi = if i == t.len() { a } else { t[i] };
        if lo > hi {
            continue;
        }
        let q: f64 = spec
            .scenarios()
            .iter()
            .zip(spec.weights())
            .map(|(z, r)| {
                let passed = z[k] < 0.0 || (i > 0 && z[k] <= t[i - 1]);
                r * if passed { above } else { below }
            })
            .sum();
        let (x, h) = marg.argmin(lo, hi);
        out.push(Interval { lo, hi, x, h, q });
    }
    out
}

struct CellSetup {
    ivals: Vec<Vec<Interval>>,
    /// Mean of `b' xi` over the sample.
    constant: f64,
}

fn setup(
    params: &NewsvendorParams,
    train: &DiscreteMeasure,
    spec: &RegularizerSpec,
    delta: f64,
) -> CellSetup {
    let d = params.dim();
    let ivals = (0..d)
        .map(|k| {
            let m = Marginal::new(params, train, k);
            intervals(params, spec, &m, k, delta)
        })
        .collect();
    let constant = train.expect(|xi| xi.iter().zip(&params.b).map(|(x, b)| x * b).sum());
    CellSetup { ivals, constant }
}

impl CellSetup {
    fn value(&self, eps: f64, idx: &[usize]) -> f64 {
        let mut h = self.constant;
        let mut q = 0.0;
        for (k, &i) in idx.iter().enumerate() {
            let iv = &self.ivals[k][i];
            h += iv.h;
            q += iv.q;
        }
        h + eps * q.sqrt()
    }

    fn point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().enumerate().map(|(k, &i)| self.ivals[k][i].x).collect()
    }

    /// Interval containing `x`, or the nearest one when `x` falls in a gap.
    fn locate(&self, k: usize, x: f64) -> usize {
        let iv = &self.ivals[k];
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (i, v) in iv.iter().enumerate() {
            let dist = if x < v.lo { v.lo - x } else if x > v.hi { x - v.hi } else { 0.0 };
            if dist < bd {
                bd = dist;
                best = i;
            }
        }
        best
    }
}

/// Classical per-product quantile solution (smallest minimizer).
pub fn solve_saa(params: &NewsvendorParams, train: &DiscreteMeasure) -> Result<NewsvendorSolution> {
    check_train(params, train)?;
    let x: Vec<f64> = (0..params.dim())
        .map(|k| Marginal::new(params, train, k).argmin(0.0, params.a[k]).0)
        .collect();
    Ok(NewsvendorSolution {
        objective: saa_objective(params, train, &x)?,
        x,
        eps: 0.0,
        method: "saa".into(),
        cells_visited: 0,
    })
}

const BLOCK: usize = 1 << 14;

/// Global minimizer of the regularized objective by cell enumeration.
///
/// At a threshold `x_k = zeta_jk` the scenario counts as not yet passed, and
/// the next interval starts at `zeta_jk + delta`. Among cells with equal
/// objective the lexicographically smallest decision is returned.
pub fn solve_exact_cells(
    params: &NewsvendorParams,
    train: &DiscreteMeasure,
    spec: &RegularizerSpec,
    eps: f64,
    opts: CellOptions,
) -> Result<NewsvendorSolution> {
    check_train(params, train)?;
    check_spec(params, spec)?;
    if !(eps >= 0.0) {
        return Err(Error::InvalidParams(format!("eps must be nonnegative, got {eps}")));
    }
    let cs = setup(params, train, spec, opts.delta);
    let radix: Vec<usize> = cs.ivals.iter().map(Vec::len).collect();
    let cells_f: f64 = radix.iter().map(|&r| r as f64).product();
    if cells_f > opts.budget as f64 {
        return Err(Error::CellBudgetExceeded {
            cells: cells_f,
            budget: opts.budget,
        });
    }
    let cells = cells_f as usize;
    let d = radix.len();
    let blocks = cells.div_ceil(BLOCK);
    let best_per_block = par::map_range(blocks, |bi| {
        let start = bi * BLOCK;
        let end = (start + BLOCK).min(cells);
        // Decode the start index; coordinate 0 is the most significant digit.
        let mut idx = vec![0usize; d];
        let mut rem = start;
        for k in (0..d).rev() {
            idx[k] = rem % radix[k];
            rem /= radix[k];
        }
        let mut best = (f64::INFINITY, start);
        for lin in start..end {
            let v = cs.value(eps, &idx);
            if v < best.0 {
                best = (v, lin);
            }
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < radix[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        best
    });
    let mut best = (f64::INFINITY, 0usize);
    for b in best_per_block {
        if b.0 < best.0 {
            best = b;
        }
    }
    let mut idx = vec![0usize; d];
    let mut rem = best.1;
    for k in (0..d).rev() {
        idx[k] = rem % radix[k];
        rem /= radix[k];
    }
    let x = cs.point(&idx);
    Ok(NewsvendorSolution {
        objective: sbr_objective(params, train, spec, eps, &x)?,
        x,
        eps,
        method: "sbr-exact".into(),
        cells_visited: cells as u64,
    })
}

/// Local search over cells from given starting points.
///
/// From each start: take the cell containing it, then repeatedly move one
/// product to the interval that lowers the objective most while the others
/// stay fixed, until no move helps or `max_iter` sweeps have run.
pub fn solve_alternating_from(
    params: &NewsvendorParams,
    train: &DiscreteMeasure,
    spec: &RegularizerSpec,
    eps: f64,
    starts: &[Vec<f64>],
    max_iter: usize,
    delta: f64,
) -> Result<NewsvendorSolution> {
    check_train(params, train)?;
    check_spec(params, spec)?;
    if starts.is_empty() {
        return Err(Error::InvalidParams("need at least one start".into()));
    }
    for s in starts {
        params.check_x(s)?;
    }
    let cs = setup(params, train, spec, delta);
    let d = params.dim();
    let results = par::map_slice(starts, |x0| {
        let mut idx: Vec<usize> = (0..d).map(|k| cs.locate(k, x0[k])).collect();
        let mut cur = cs.value(eps, &idx);
        let mut sweeps = 0;
        while sweeps < max_iter {
            sweeps += 1;
            let mut moved = false;
            for k in 0..d {
                let keep = idx[k];
                let mut best_i = keep;
                let mut best_v = cur;
                for i in 0..cs.ivals[k].len() {
                    if i == keep {
                        continue;
                    }
                    idx[k] = i;
                    let v = cs.value(eps, &idx);
                    if v < best_v {
                        best_v = v;
                        best_i = i;
                    }
                }
                idx[k] = best_i;
                if best_i != keep {
                    cur = best_v;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        (cur, idx)
    });
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in results {
        let better = match &best {
            None => true,
            Some(b) => r.0 < b.0 || (r.0 == b.0 && cs.point(&r.1) < cs.point(&b.1)),
        };
        if better {
            best = Some(r);
        }
    }
    let x = cs.point(&best.unwrap().1);
    Ok(NewsvendorSolution {
        objective: sbr_objective(params, train, spec, eps, &x)?,
        x,
        eps,
        method: "sbr-alternating".into(),
        cells_visited: 0,
    })
}

/// Multi-start local search: the SAA solution plus `starts - 1` uniform
/// random points of the box drawn from `seed`.
pub fn solve_alternating(
    params: &NewsvendorParams,
    train: &DiscreteMeasure,
    spec: &RegularizerSpec,
    eps: f64,
    starts: usize,
    seed: u64,
    max_iter: usize,
) -> Result<NewsvendorSolution> {
    if starts == 0 {
        return Err(Error::InvalidParams("starts must be at least 1".into()));
    }
    let mut pts = vec![solve_saa(params, train)?.x];
    for s in 1..starts {
        let mut r = rng::substream(seed, "newsvendor-start", s as u64);
        pts.push(params.a.iter().map(|&a| r.random_range(0.0..=a)).collect());
    }
    solve_alternating_from(params, train, spec, eps, &pts, max_iter, CellOptions::default().delta)
}

/// Exact cells when the budget allows, otherwise multi-start local search.
pub fn solve_sbr(
    params: &NewsvendorParams,
    train: &DiscreteMeasure,
    spec: &RegularizerSpec,
    eps: f64,
    opts: CellOptions,
    seed: u64,
) -> Result<NewsvendorSolution> {
    match solve_exact_cells(params, train, spec, eps, opts) {
        Err(Error::CellBudgetExceeded { .. }) => solve_alternating(params, train, spec, eps, 16, seed, 100),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, LogNormal};

    fn one_d() -> NewsvendorParams {
        NewsvendorParams::new(vec![4.0], vec![11.0], vec![1.0], vec![12.0], vec![12.0]).unwrap()
    }

    fn demand(n: usize, d: usize, seed: u64) -> DiscreteMeasure {
        let mut r = rng::from_seed(seed);
        let ln = LogNormal::new(2.0, 0.5).unwrap();
        DiscreteMeasure::uniform((0..n).map(|_| (0..d).map(|_| ln.sample(&mut r)).collect()).collect()).unwrap()
    }

    #[test]
    fn loss_examples() {
        let p = NewsvendorParams::reference();
        let x = vec![3.0, 4.0, 5.0, 6.0, 7.0];
        let cv: f64 = (0..5).map(|k| (p.c[k] - p.v[k]) * x[k]).sum();
        assert!((loss(&p, &x, &x).unwrap() - cv).abs() < 1e-12);
        let xi = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let bx: f64 = (0..5).map(|k| p.b[k] * xi[k]).sum();
        assert!((loss(&p, &[0.0; 5], &xi).unwrap() - bx).abs() < 1e-12);
        let q = one_d();
        assert_eq!(loss(&q, &[2.0], &[1.0]).unwrap(), -4.0);
        assert_eq!(loss_original(&q, &[2.0], &[1.0]), -4.0);
        assert!(matches!(loss(&q, &[13.0], &[1.0]), Err(Error::InfeasibleDecision(_))));
    }

    #[test]
    fn subgradient_branches() {
        let p = NewsvendorParams::reference();
        let gv: Vec<f64> = (0..5).map(|k| p.g[k] - p.v[k]).collect();
        assert_eq!(worst_subgradient_xi(&p, &[1.0; 5], &[2.0; 5]).unwrap(), p.b);
        assert_eq!(worst_subgradient_xi(&p, &[3.0; 5], &[2.0; 5]).unwrap(), gv);
        assert_eq!(worst_subgradient_xi(&p, &[2.0; 5], &[2.0; 5]).unwrap(), p.b);
    }

    #[test]
    fn lipschitz_values() {
        // 12^2 + 13.5^2 + 14.5^2 + 17^2 + 18.5^2 = 1167.75
        let l = lipschitz_modulus(&NewsvendorParams::reference());
        assert!((l - 1167.75f64.sqrt()).abs() < 1e-12);
        assert!((l - 34.1724).abs() < 1e-4);
        let p = NewsvendorParams::new(vec![1.0; 2], vec![3.0; 2], vec![1.0; 2], vec![3.0, 4.0], vec![1.0; 2]).unwrap();
        assert_eq!(lipschitz_modulus(&p), 5.0);
        let mut bad = NewsvendorParams::reference();
        bad.b = vec![0.0; 5];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn regularizer_examples() {
        let p = NewsvendorParams::reference();
        let spec = RegularizerSpec::uniform(vec![vec![20.0; 5], vec![40.0; 5]], Aggregation::Quadratic).unwrap();
        assert!((regularizer(&p, &spec, &[1.0; 5]).unwrap() - lipschitz_modulus(&p)).abs() < 1e-12);
        let low = RegularizerSpec::uniform(vec![vec![0.5; 5]], Aggregation::Quadratic).unwrap();
        let gv: f64 = (0..5).map(|k| (p.g[k] - p.v[k]).powi(2)).sum::<f64>().sqrt();
        assert!((regularizer(&p, &low, &[1.0; 5]).unwrap() - gv).abs() < 1e-12);
        // Mixed regions for a single scenario.
        let one = RegularizerSpec::uniform(vec![vec![2.0, 0.0, 5.0, 0.0, 9.0]], Aggregation::Quadratic).unwrap();
        let x = [1.0, 1.0, 5.0, 0.0, 10.0];
        let y = [0.0, 1.0, 0.0, 0.0, 1.0];
        let z: Vec<f64> = (0..5).map(|k| p.b[k] + (p.g[k] - p.v[k] - p.b[k]) * y[k]).collect();
        let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((regularizer(&p, &one, &x).unwrap() - zn).abs() < 1e-12);
        let lin = one.clone().with_aggregation(Aggregation::Linear);
        assert!(matches!(regularizer(&p, &lin, &x), Err(Error::UnsupportedVariant(_))));
    }

    #[test]
    fn objective_examples() {
        let p = NewsvendorParams::reference();
        let train = demand(20, 5, 1);
        let spec = RegularizerSpec::uniform(vec![vec![50.0; 5]], Aggregation::Quadratic).unwrap();
        let x = [0.5; 5];
        let saa = saa_objective(&p, &train, &x).unwrap();
        assert_eq!(sbr_objective(&p, &train, &spec, 0.0, &x).unwrap(), saa);
        let s1 = sbr_objective(&p, &train, &spec, 1.0, &x).unwrap();
        assert!((s1 - saa - lipschitz_modulus(&p)).abs() < 1e-9);
    }

    /// Smallest sample value whose empirical CDF reaches the critical ratio.
    fn quantile_oracle(p: &NewsvendorParams, train: &DiscreteMeasure, k: usize) -> f64 {
        let q = (p.v[k] + p.b[k] - p.c[k]) / (p.v[k] + p.b[k] - p.g[k]);
        let mut vals: Vec<f64> = train.points().iter().map(|x| x[k]).collect();
        vals.sort_by(f64::total_cmp);
        let n = vals.len();
        for (i, &v) in vals.iter().enumerate() {
            if (i + 1) as f64 / n as f64 >= q - 1e-12 {
                return v.clamp(0.0, p.a[k]);
            }
        }
        p.a[k]
    }

    #[test]
    fn saa_is_critical_quantile() {
        let p = NewsvendorParams::reference();
        let train = demand(50, 5, 9);
        let sol = solve_saa(&p, &train).unwrap();
        for k in 0..5 {
            assert!((sol.x[k] - quantile_oracle(&p, &train, k)).abs() < 1e-6);
        }
        let spec = RegularizerSpec::uniform(vec![vec![5.0; 5]], Aggregation::Quadratic).unwrap();
        let ex = solve_exact_cells(&p, &train, &spec, 0.0, CellOptions::default()).unwrap();
        assert_eq!(ex.x, sol.x);
    }

    fn grid_opt(p: &NewsvendorParams, train: &DiscreteMeasure, spec: &RegularizerSpec, eps: f64, h: f64) -> f64 {
        let steps: Vec<usize> = p.a.iter().map(|a| (a / h).round() as usize).collect();
        let mut best = f64::INFINITY;
        if p.dim() == 1 {
            for i in 0..=steps[0] {
                best = best.min(sbr_objective(p, train, spec, eps, &[i as f64 * h]).unwrap());
            }
        } else {
            for i in 0..=steps[0] {
                for j in 0..=steps[1] {
                    let x = [i as f64 * h, j as f64 * h];
                    best = best.min(sbr_objective(p, train, spec, eps, &x).unwrap());
                }
            }
        }
        best
    }

    #[test]
    fn one_product_matches_grid() {
        let p = one_d();
        let train = demand(15, 1, 4);
        let spec = RegularizerSpec::uniform(vec![vec![6.3]], Aggregation::Quadratic).unwrap();
        for eps in [0.0, 0.05, 0.3, 1.0, 5.0] {
            let ex = solve_exact_cells(&p, &train, &spec, eps, CellOptions::default()).unwrap();
            let g = grid_opt(&p, &train, &spec, eps, 1e-3);
            assert!(ex.objective <= g + 1e-9, "eps {eps}: {} vs {}", ex.objective, g);
            // Slope bound of the objective times the grid step.
            assert!(g - ex.objective <= 25.0 * 1e-3, "eps {eps}");
        }
    }

    #[test]
    fn budget_is_enforced() {
        let p = NewsvendorParams::reference();
        let train = demand(30, 5, 2);
        let spec = crate::scenarios::compress(&train, 15, 0, Aggregation::Quadratic).unwrap();
        let opts = CellOptions { budget: 1000, ..Default::default() };
        assert!(matches!(
            solve_exact_cells(&p, &train, &spec, 0.1, opts),
            Err(Error::CellBudgetExceeded { .. })
        ));
        let alt = solve_sbr(&p, &train, &spec, 0.1, opts, 3).unwrap();
        assert_eq!(alt.method, "sbr-alternating");
    }

    #[test]
    fn alternating_fixpoint_and_dominance() {
        let p = NewsvendorParams::reference();
        let train = demand(40, 5, 5);
        let spec = crate::scenarios::compress(&train, 4, 0, Aggregation::Quadratic).unwrap();
        for eps in [0.01, 0.2, 1.0] {
            let ex = solve_exact_cells(&p, &train, &spec, eps, CellOptions::default()).unwrap();
            let alt = solve_alternating(&p, &train, &spec, eps, 4, 11, 100).unwrap();
            assert!(alt.objective >= ex.objective - 1e-9);
            let fix = solve_alternating_from(&p, &train, &spec, eps, &[ex.x.clone()], 100, 1e-6).unwrap();
            assert_eq!(fix.x, ex.x);
        }
    }

    #[test]
    fn exact_bounded_by_saa_plus_lipschitz() {
        let p = NewsvendorParams::reference();
        let train = demand(50, 5, 8);
        let spec = crate::scenarios::compress(&train, 5, 0, Aggregation::Quadratic).unwrap();
        let saa = solve_saa(&p, &train).unwrap();
        for eps in [0.001, 0.1, 2.0, 9.0] {
            let ex = solve_exact_cells(&p, &train, &spec, eps, CellOptions::default()).unwrap();
            assert!(ex.objective <= saa.objective + eps * lipschitz_modulus(&p) + 1e-9);
        }
    }

    #[test]
    fn lower_semicontinuous_at_threshold() {
        let p = one_d();
        let train = demand(10, 1, 6);
        let spec = RegularizerSpec::uniform(vec![vec![5.0]], Aggregation::Quadratic).unwrap();
        let at = sbr_objective(&p, &train, &spec, 1.0, &[5.0]).unwrap();
        let left = sbr_objective(&p, &train, &spec, 1.0, &[5.0 - 1e-9]).unwrap();
        let right = sbr_objective(&p, &train, &spec, 1.0, &[5.0 + 1e-9]).unwrap();
        assert!((at - left).abs() < 1e-6);
        // The regularizer drops across the threshold, so the right limit is lower.
        assert!(right < at);
    }

    proptest! {
        #[test]
        fn compact_equals_original(x in prop::collection::vec(0.0..12.0f64, 5), xi in prop::collection::vec(0.0..40.0f64, 5)) {
            let p = NewsvendorParams::reference();
            let a = loss(&p, &x, &xi).unwrap();
            prop_assert!((a - loss_original(&p, &x, &xi)).abs() < 1e-9);
        }

        #[test]
        fn subgradient_bounded_by_lipschitz(x in prop::collection::vec(0.0..12.0f64, 5), z in prop::collection::vec(0.0..40.0f64, 5)) {
            let p = NewsvendorParams::reference();
            let s = worst_subgradient_xi(&p, &x, &z).unwrap();
            let n = s.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(n <= lipschitz_modulus(&p) + 1e-12);
            if x.iter().zip(&z).all(|(a, b)| a <= b) {
                prop_assert!((n - lipschitz_modulus(&p)).abs() < 1e-12);
            }
        }

        #[test]
        fn two_products_match_grid(seed in 0u64..200, eps in 0.0..3.0f64, m in 1usize..=3) {
            let p = NewsvendorParams::new(vec![4.0, 5.5], vec![11.0, 13.0], vec![1.0, 1.5], vec![12.0, 13.5], vec![3.0, 4.0]).unwrap();
            let mut r = rng::from_seed(seed);
            let pts: Vec<Vec<f64>> = (0..8).map(|_| vec![r.random_range(0.0..3.5), r.random_range(0.0..4.5)]).collect();
            let train = DiscreteMeasure::uniform(pts).unwrap();
            let spec = crate::scenarios::compress(&train, m, seed, Aggregation::Quadratic).unwrap();
            let ex = solve_exact_cells(&p, &train, &spec, eps, CellOptions::default()).unwrap();
            let g = grid_opt(&p, &train, &spec, eps, 0.01);
            prop_assert!(ex.objective <= g + 1e-9);
            prop_assert!(g - ex.objective <= 40.0 * 0.01);
        }
    }
}
