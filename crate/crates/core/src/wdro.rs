//! Wasserstein-DRO benchmarks and numerical checks of the dual
//! reformulation.
//!
//! The portfolio loss is max-affine in `xi`, which gives finite convex
//! programs for type-1 and type-2 balls over an unbounded support. For the
//! newsvendor the type-1 problem keeps the SAA decision and shifts the
//! objective by `eps * ||b||_2`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::newsvendor::{self, NewsvendorParams, NewsvendorSolution};
use crate::portfolio::{
    self, check_eps, decision_from, reduce_grad, simplex_box, solve_fixed_regions, unreduce,
    ConvexSettings, PortfolioDecision, PortfolioParams, PortfolioSolution,
};
use crate::scenarios::csv_err;
use crate::solve::{dot, ellipsoid, norm2, ConvexProblem, Halfspace};

/// Wasserstein order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Order {
    One,
    Two,
}

impl Order {
    pub fn exponent(self) -> f64 {
        match self {
            Order::One => 1.0,
            Order::Two => 2.0,
        }
    }
}

/// Ball order and radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WdroConfig {
    pub p: Order,
    pub eps: f64,
}

impl WdroConfig {
    pub fn new(p: Order, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        Ok(Self { p, eps })
    }
}

/// Type-1 WDRO portfolio: `saa + eps (1 + rho/alpha) ||w||_2`.
pub fn solve_portfolio_1wdro(params: &PortfolioParams, train: &DiscreteMeasure, eps: f64) -> Result<PortfolioSolution> {
    let (dec, objective) = solve_fixed_regions(params, train, params.tail_factor(), eps)?;
    Ok(PortfolioSolution {
        w: dec.w,
        tau: dec.tau,
        objective,
        eps,
        variant: "wdro1".into(),
        mode: "convex".into(),
        regions: Vec::new(),
    })
}

/// Type-2 WDRO portfolio solution with its multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct Wdro2Solution {
    pub solution: PortfolioSolution,
    /// Optimal multiplier; infinite at `eps = 0`.
    pub lambda: f64,
}

/// `lambda eps^2 + sum_i p_i max_k (a_k^2 ||w||^2 / (4 lambda) + a_k w'xi_i + b_k tau)`.
pub fn wdro2_objective(
    params: &PortfolioParams,
    train: &DiscreteMeasure,
    eps: f64,
    dec: &PortfolioDecision,
    lambda: f64,
) -> Result<f64> {
    dec.check(params)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParams(format!("lambda must be positive, got {lambda}")));
    }
    Ok(wdro2_value_grad(params, train, eps, &dec.w, dec.tau, lambda).0)
}

fn wdro2_value_grad(
    params: &PortfolioParams,
    train: &DiscreteMeasure,
    eps: f64,
    w: &[f64],
    tau: f64,
    lambda: f64,
) -> (f64, Vec<f64>, f64, f64) {
    let pieces = params.affine_pieces();
    let ww = dot(w, w);
    let mut f = lambda * eps * eps;
    let mut gl = eps * eps;
    let mut gt = 0.0;
    let mut gw = vec![0.0; w.len()];
    for (xi, &pi) in train.points().iter().zip(train.weights()) {
        let s = dot(w, xi);
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
        for (k, (a, b)) in pieces.iter().enumerate() {
            let v = a * a * ww / (4.0 * lambda) + a * s + b * tau;
            if v > best {
                best = v;
                arg = k;
            }
        }
        let (a, b) = pieces[arg];
        f += pi * best;
        gt += pi * b;
        gl -= pi * a * a * ww / (4.0 * lambda * lambda);
        for ((g, x), wi) in gw.iter_mut().zip(xi).zip(w) {
            *g += pi * (a * a * wi / (2.0 * lambda) + a * x);
        }
    }
    (f, gw, gt, gl)
}

pub const LAMBDA_MIN: f64 = 1e-6;
const WIDEN: f64 = 1e3;

/// Type-2 WDRO portfolio, jointly convex in `(w, tau, lambda)`.
pub fn solve_portfolio_2wdro(params: &PortfolioParams, train: &DiscreteMeasure, eps: f64) -> Result<Wdro2Solution> {
    solve_portfolio_2wdro_with(params, train, eps, &ConvexSettings::default())
}

pub fn solve_portfolio_2wdro_with(
    params: &PortfolioParams,
    train: &DiscreteMeasure,
    eps: f64,
    settings: &ConvexSettings,
) -> Result<Wdro2Solution> {
    params.validate()?;
    check_eps(eps)?;
    if eps == 0.0 {
        let (dec, objective) = solve_fixed_regions(params, train, 0.0, 0.0)?;
        return Ok(Wdro2Solution {
            solution: wdro2_solution(dec, objective, eps),
            lambda: f64::INFINITY,
        });
    }
    let amax = params.tail_factor();
    let mut lo = LAMBDA_MIN;
    let mut hi = 1e6 * amax.max(1.0);
    let mut widened = false;
    loop {
        let (dec, lambda, objective) = solve_2wdro_box(params, train, eps, lo, hi, settings)?;
        let at_hi = lambda >= hi * (1.0 - 1e-6);
        let at_lo = lambda <= lo * (1.0 + 1e-6);
        if !at_hi && !at_lo {
            return Ok(Wdro2Solution {
                solution: wdro2_solution(dec, objective, eps),
                lambda,
            });
        }
        if widened {
            return Err(Error::BoundaryWarning { lambda });
        }
        widened = true;
        if at_hi {
            hi *= WIDEN;
        } else {
            lo /= WIDEN;
        }
    }
}

fn wdro2_solution(dec: PortfolioDecision, objective: f64, eps: f64) -> PortfolioSolution {
    PortfolioSolution {
        w: dec.w,
        tau: dec.tau,
        objective,
        eps,
        variant: "wdro2".into(),
        mode: "convex".into(),
        regions: Vec::new(),
    }
}

fn solve_2wdro_box(
    params: &PortfolioParams,
    train: &DiscreteMeasure,
    eps: f64,
    lo: f64,
    hi: f64,
    settings: &ConvexSettings,
) -> Result<(PortfolioDecision, f64, f64)> {
    let d = train.dim();
    let k = d + 1;
    let objective = move |y: &[f64]| {
        let (w, tau) = unreduce(y, d);
        let (f, gw, gt, gl) = wdro2_value_grad(params, train, eps, &w, tau, y[d]);
        let mut g = vec![0.0; k];
        reduce_grad(&gw, &mut g);
        g[d - 1] = gt;
        g[d] = gl;
        (f, g)
    };
    let mut constraints = simplex_box(d, k, params.tau_bound);
    let mut up = vec![0.0; k];
    up[d] = 1.0;
    constraints.push(Halfspace::new(up, hi));
    let mut down = vec![0.0; k];
    down[d] = -1.0;
    constraints.push(Halfspace::new(down, -lo));
    let problem = ConvexProblem::new(k, Box::new(objective)).with_constraints(constraints);
    let mut center = vec![0.5; k];
    let mut axes = vec![0.5; k];
    center[d - 1] = 0.0;
    axes[d - 1] = params.tau_bound;
    center[d] = 0.5 * (lo + hi);
    axes[d] = 0.5 * (hi - lo);
    let sol = portfolio::certify(ellipsoid(&problem, &center, &axes, settings.ellipsoid)?, settings)?;
    let dec = decision_from(&sol.x, d, params.tau_bound);
    let lambda = sol.x[d].clamp(lo, hi);
    let value = wdro2_value_grad(params, train, eps, &dec.w, dec.tau, lambda).0;
    Ok((dec, lambda, value))
}

/// Type-1 WDRO newsvendor: the SAA decision, objective shifted by
/// `eps * ||b||_2`.
pub fn solve_newsvendor_1wdro(params: &NewsvendorParams, train: &DiscreteMeasure, eps: f64) -> Result<NewsvendorSolution> {
    check_eps(eps)?;
    let mut s = newsvendor::solve_saa(params, train)?;
    s.objective += eps * newsvendor::lipschitz_modulus(params);
    s.eps = eps;
    s.method = "wdro1".into();
    Ok(s)
}

/// Type-2 WDRO for the newsvendor is NP-hard and is not offered.
pub fn solve_newsvendor_2wdro(_params: &NewsvendorParams, _train: &DiscreteMeasure, _eps: f64) -> Result<NewsvendorSolution> {
    Err(Error::UnsupportedVariant(
        "type-2 Wasserstein DRO for the newsvendor is NP-hard in general".into(),
    ))
}

/// Multiplier and support grids for [`dual_sup_mean_1d`].
#[derive(Debug, Clone, PartialEq)]
pub struct DualGrids {
    pub lambda: Vec<f64>,
    pub xi: Vec<f64>,
}

const LAMBDA_DECADES: i64 = 4;

impl DualGrids {
    /// Default resolution: 200 multipliers per decade over `[1e-4, 1e4]`,
    /// support step `1e-3` times the data scale near the atoms, then a
    /// geometric tail past `mean + 10 eps + 10 / lambda_min`.
    pub fn default_for(values: &[f64], eps: f64) -> Self {
        Self::with_refinement(values, eps, 1)
    }

    /// Grids `factor` times finer than the default in both directions.
    pub fn with_refinement(values: &[f64], eps: f64, factor: usize) -> Self {
        let per_decade = 200 * factor as i64;
        let lambda: Vec<f64> = (-LAMBDA_DECADES * per_decade..=LAMBDA_DECADES * per_decade)
            .map(|k| 10f64.powf(k as f64 / per_decade as f64))
            .collect();
        let lambda_min = lambda[0];
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scale = (hi - lo).max(eps).max(1.0);
        let h = 1e-3 * scale / factor as f64;
        let pad = scale + 4.0 * eps;
        let (a, b) = (lo - pad, hi + pad);
        let steps = ((b - a) / h).ceil() as usize;
        let mut xi: Vec<f64> = (0..=steps).map(|i| a + i as f64 * h).collect();
        xi.extend_from_slice(values);
        let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
        let reach = mean.abs() + 10.0 * eps + 10.0 / lambda_min;
        let mut step = h;
        let (mut up, mut down) = (b, a);
        while up < reach || -down < reach {
            step *= 1.05;
            up += step;
            down -= step;
            xi.push(up);
            xi.push(down);
        }
        xi.sort_by(f64::total_cmp);
        xi.dedup();
        Self { lambda, xi }
    }
}

/// Maximum of a concave sequence by bisection on its differences.
fn concave_argmax(n: usize, f: impl Fn(usize) -> f64) -> usize {
    let (mut lo, mut hi) = (0, n - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if f(mid + 1) > f(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Worst-case mean over the type-`p` Wasserstein ball of radius `eps`
/// around the uniform measure on `values`, computed from the dual
/// `inf_lambda lambda eps^p + mean_i sup_xi (xi - lambda |xi - v_i|^p)` on
/// the given grids.
///
/// Returns `GridWarning` when the optimal multiplier sits on the edge of its
/// grid or the inner maximizer on the edge of the support grid.
pub fn dual_sup_mean_1d(values: &[f64], p: Order, eps: f64, grids: &DualGrids) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_eps(eps)?;
    let n = values.len() as f64;
    if eps == 0.0 {
        return Ok(values.iter().sum::<f64>() / n);
    }
    if grids.lambda.is_empty() || grids.xi.len() < 2 {
        return Err(Error::InvalidParams("empty dual grid".into()));
    }
    let e = p.exponent();
    let xi = &grids.xi;
    let g = xi.len();
    let inner = |lambda: f64, v: f64| -> (f64, bool) {
        let f = |j: usize| xi[j] - lambda * (xi[j] - v).abs().powf(e);
        let j = concave_argmax(g, f);
        let edge = (j == g - 1 && f(j) > f(j - 1)) || (j == 0 && f(0) > f(1));
        (f(j), edge)
    };
    let mut best = (f64::INFINITY, 0usize, false);
    for (l, &lambda) in grids.lambda.iter().enumerate() {
        let mut s = 0.0;
        let mut edge = false;
        for &v in values {
            let (val, e) = inner(lambda, v);
            s += val;
            edge |= e;
        }
        let total = lambda * eps.powf(e) + s / n;
        if total < best.0 {
            best = (total, l, edge);
        }
    }
    let (value, l, edge) = best;
    if edge {
        return Err(Error::GridWarning {
            value,
            reason: "inner maximizer on the support grid boundary".into(),
        });
    }
    if l == 0 || l == grids.lambda.len() - 1 {
        return Err(Error::GridWarning {
            value,
            reason: "optimal multiplier on the grid boundary".into(),
        });
    }
    Ok(value)
}

/// Direct and dual sides of the regularization identity for a loss sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceReport {
    /// `mean + eps * R`.
    pub lhs: f64,
    /// Worst-case mean over the ball of radius `eps * R`.
    pub rhs: f64,
    pub gap: f64,
}

/// Compares `mean(loss) + eps R` with the worst-case mean of the loss
/// distribution over a ball of radius `eps R`.
pub fn check_equivalence_identity(values: &[f64], r: f64, eps: f64, p: Order) -> Result<EquivalenceReport> {
    check_equivalence_identity_on(values, r, eps, p, 1)
}

/// As [`check_equivalence_identity`] with grids refined by `factor`.
pub fn check_equivalence_identity_on(values: &[f64], r: f64, eps: f64, p: Order, factor: usize) -> Result<EquivalenceReport> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::InvalidParams(format!("R must be nonnegative, got {r}")));
    }
    check_eps(eps)?;
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let lhs = mean + eps * r;
    let radius = eps * r;
    let rhs = if radius == 0.0 {
        mean
    } else {
        dual_sup_mean_1d(values, p, radius, &DualGrids::with_refinement(values, radius, factor))?
    };
    Ok(EquivalenceReport {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

/// One radius of a first-order expansion check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorRow {
    pub eps: f64,
    /// Exact type-1 worst case, `saa + eps (1 + rho/alpha) ||w||_2`.
    pub worst_case: f64,
    /// `saa + eps * max_i f_i ||w||_2`.
    pub first_order: f64,
    pub residual: f64,
    /// `residual / eps` (zero at `eps = 0`).
    pub ratio: f64,
}

/// First-order expansion of the type-1 worst-case portfolio loss at a fixed
/// decision. The correction is the essential supremum of the gradient norm
/// over the training atoms.
pub fn taylor_check(
    params: &PortfolioParams,
    dec: &PortfolioDecision,
    train: &DiscreteMeasure,
    eps_list: &[f64],
) -> Result<Vec<TaylorRow>> {
    dec.check(params)?;
    for (i, xi) in train.points().iter().enumerate() {
        if -dot(&dec.w, xi) == dec.tau {
            return Err(Error::KinkDegenerate(i));
        }
    }
    let saa = portfolio::saa_objective(params, train, dec)?;
    let n = norm2(&dec.w);
    let ess_sup = train
        .points()
        .iter()
        .zip(train.weights())
        .filter(|(_, &p)| p > 0.0)
        .map(|(xi, _)| portfolio::grad_norm_factor(params, dec, xi))
        .fold(0.0_f64, f64::max)
        * n;
    eps_list
        .iter()
        .map(|&eps| {
            check_eps(eps)?;
            let worst_case = saa + eps * params.tail_factor() * n;
            let first_order = saa + eps * ess_sup;
            let residual = (worst_case - first_order).abs();
            Ok(TaylorRow {
                eps,
                worst_case,
                first_order,
                residual,
                ratio: if eps > 0.0 { residual / eps } else { 0.0 },
            })
        })
        .collect()
}

/// Row of a radius sweep report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub eps: f64,
    pub objective: f64,
    pub gap: f64,
}

/// Writes `eps,objective,gap` rows.
pub fn write_report_csv(rows: &[ReportRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["eps", "objective", "gap"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.eps.to_string(), r.objective.to_string(), r.gap.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
