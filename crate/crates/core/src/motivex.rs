//! One-dimensional example in which 1- and 2-Wasserstein models pick
//! different minimizers of the same stochastic program.
//!
//! The decision is `x` in `[beta, beta + 1]`, the disturbance is
//! `xi ~ N(0, sigma^2)` and the loss is
//! `F(x, xi) = max{-l(x)(xi + 1), r(x), l(x)(xi - 1)} + (a x + b)(x - beta)`.
//! The constants make both endpoints minimize `E F(x, xi)`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::eval::svg::{render_series_svg, Series};
use crate::measure::{cvar, weighted_mean, LossSample};
use crate::par;
use crate::rng;
use crate::scenarios::csv_err;
use crate::wdro::Order;

/// Truncation of the disturbance support, in standard deviations.
pub const SUPPORT_SIGMAS: f64 = 12.0;
const QUAD_TOL: f64 = 1e-10;
const QUAD_MAX_DEPTH: u32 = 40;
const OUTER_GRID: usize = 400;
const GOLDEN_TOL: f64 = 1e-11;

/// Lower endpoint `beta`, noise scale `sigma` and shift `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotivExParams {
    pub beta: f64,
    pub sigma: f64,
    pub r: f64,
}

impl Default for MotivExParams {
    fn default() -> Self {
        Self { beta: 0.5, sigma: 0.5, r: 0.5 }
    }
}

impl MotivExParams {
    pub fn new(beta: f64, sigma: f64, r: f64) -> Result<Self> {
        let p = Self { beta, sigma, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("sigma", self.sigma), ("R", self.r)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotivExConstants {
    pub big_a: f64,
    pub big_b: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Density of `N(0, sigma^2)`.
pub fn normal_pdf(t: f64, sigma: f64) -> f64 {
    (-0.5 * (t / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Distribution function of `N(0, sigma^2)`.
pub fn normal_cdf(t: f64, sigma: f64) -> f64 {
    0.5 * libm::erfc(-t / (sigma * SQRT_2))
}

pub fn constants(params: &MotivExParams) -> MotivExConstants {
    let MotivExParams { beta, sigma, r } = *params;
    let sb = beta.sqrt();
    let sb1 = (beta + 1.0).sqrt();
    let gap = sb1 - sb;
    let big_a = beta * (sigma * (2.0 / PI).sqrt() - 1.0);
    let big_b = 2.0 * (beta + 1.0) * (sigma * sigma * normal_pdf(1.0, sigma) - normal_cdf(-1.0, sigma));
    let a = ((big_a - big_b) * sb * gap - r) / ((beta * (beta + 1.0)).sqrt() * gap * gap);
    let b = big_a - big_b - a * (beta + 1.0);
    let c = -sb / gap * (r / (gap * beta * sb1) + 1.0);
    MotivExConstants { big_a, big_b, a, b, c }
}

/// The example with its constants evaluated once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotivEx {
    pub params: MotivExParams,
    pub consts: MotivExConstants,
}

/// Loss as `max(slope * |xi| + intercept, floor) + shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Section {
    slope: f64,
    floor: f64,
    shift: f64,
}

impl Section {
    fn eval(&self, xi: f64) -> f64 {
        (self.slope * (xi.abs() - 1.0)).max(self.floor) + self.shift
    }
}

impl MotivEx {
    pub fn new(params: MotivExParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, consts: constants(&params) })
    }

    pub fn lo(&self) -> f64 {
        self.params.beta
    }

    pub fn hi(&self) -> f64 {
        self.params.beta + 1.0
    }

    /// `l(x)`: vanishes at `sqrt(beta (beta + 1))`.
    pub fn ell(&self, x: f64) -> f64 {
        let beta = self.params.beta;
        let k = ((beta + 1.0).sqrt() + beta.sqrt()).powi(2);
        k * (x - (beta * (beta + 1.0)).sqrt()).powi(2)
    }

    /// `r(x)`: the flat middle branch.
    pub fn middle(&self, x: f64) -> f64 {
        let (beta, c) = (self.params.beta, self.consts.c);
        (c * x + beta * (1.0 - c)) * (x - beta - 1.0)
    }

    fn shift(&self, x: f64) -> f64 {
        (self.consts.a * x + self.consts.b) * (x - self.params.beta)
    }

    fn check(&self, x: f64) -> Result<()> {
        if !(x.is_finite() && x >= self.lo() - 1e-12 && x <= self.hi() + 1e-12) {
            return Err(Error::InfeasibleDecision(format!(
                "x = {x} outside [{}, {}]",
                self.lo(),
                self.hi()
            )));
        }
        Ok(())
    }

    fn section(&self, x: f64) -> Section {
        Section { slope: self.ell(x), floor: self.middle(x), shift: self.shift(x) }
    }

    pub fn loss(&self, x: f64, xi: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.loss_unchecked(x, xi))
    }

    /// Three-branch form, kept literal for cross-checks.
    pub fn loss_unchecked(&self, x: f64, xi: f64) -> f64 {
        let l = self.ell(x);
        (-l * (xi + 1.0)).max(self.middle(x)).max(l * (xi - 1.0)) + self.shift(x)
    }

    /// `E F(x, xi)` by adaptive Gauss-Legendre quadrature between the kinks
    /// on `[-12 sigma, 12 sigma]`.
    pub fn true_expectation(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let s = self.section(x);
        let sigma = self.params.sigma;
        let edge = SUPPORT_SIGMAS * sigma;
        let mut cuts = vec![-edge, 0.0, edge];
        if s.slope > 0.0 {
            let k = 1.0 + s.floor / s.slope;
            for t in [-k, k] {
                if t.abs() < edge {
                    cuts.push(t);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let f = |t: f64| s.eval(t) * normal_pdf(t, sigma);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += adaptive_gl(&f, w[0], w[1], QUAD_TOL, 0)?;
        }
        Ok(total)
    }

    /// Empirical WDRO objective at a fixed `x`, with its optimal multiplier.
    ///
    /// Each branch is affine in `xi`, so the inner supremum is available in
    /// closed form: for order 1 it is finite iff `lambda >= l(x)`, for
    /// order 2 it adds `s^2 / (4 lambda)` to a branch of slope `s`. The
    /// remaining minimization over `lambda` is exact.
    pub fn wdro_objective(&self, order: Order, eps: f64, train: &LossSample, x: f64) -> Result<(f64, f64)> {
        self.check(x)?;
        check_radius(eps)?;
        if train.is_empty() {
            return Err(Error::EmptyInput);
        }
        let s = self.section(x);
        let saa = (0..train.len())
            .map(|i| train.weight(i) * s.eval(train.values()[i]))
            .sum::<f64>();
        if eps == 0.0 {
            return Ok((saa, if order == Order::One { s.slope } else { f64::INFINITY }));
        }
        match order {
            Order::One => Ok((saa + eps * s.slope, s.slope)),
            Order::Two => Ok(order_two_dual(&s, eps, train)),
        }
    }

    /// Minimizes the WDRO objective over `[beta, beta + 1]`: a uniform grid
    /// followed by golden-section refinement around the best local minima.
    pub fn wdro_1d(&self, order: Order, eps: f64, train: &LossSample) -> Result<MotivExSolution> {
        check_radius(eps)?;
        if train.is_empty() {
            return Err(Error::EmptyInput);
        }
        let f = |x: f64| self.wdro_objective(order, eps, train, x).map(|v| v.0);
        let (x, objective) = minimize_on_interval(&f, self.lo(), self.hi())?;
        let lambda = self.wdro_objective(order, eps, train, x)?.1;
        Ok(MotivExSolution { x, objective, lambda })
    }

    /// Worst-case loss over `|xi| <= half_width`. The loss is convex in
    /// `xi`, so the maximum sits at an end.
    pub fn robust_value(&self, x: f64, half_width: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.section(x).eval(half_width))
    }

    /// Minimizer of the worst case over `|xi| <= half_width`. As the width
    /// grows it tends to the zero of `l`, the limit of both WDRO models.
    pub fn robust_argmin(&self, half_width: f64) -> Result<(f64, f64)> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidParams(format!("half width must be positive, got {half_width}")));
        }
        minimize_on_interval(&|x| self.robust_value(x, half_width), self.lo(), self.hi())
    }
}

fn check_radius(eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidParams(format!("radius must be finite and nonnegative, got {eps}")));
    }
    Ok(())
}

/// `min_{lambda > 0} lambda eps^2 + sum_i w_i max(l(|xi_i| - 1) + l^2/(4 lambda), r)`.
///
/// Convex in `lambda`; between breakpoints where a term switches branch it
/// reads `lambda eps^2 + K + l^2 W / (4 lambda)`, so the minimum is at a
/// breakpoint or at a segment's stationary point.
fn order_two_dual(s: &Section, eps: f64, train: &LossSample) -> (f64, f64) {
    let e2 = eps * eps;
    let l = s.slope;
    let n = train.len();
    let value = |lambda: f64| -> f64 {
        let bonus = l * l / (4.0 * lambda);
        lambda * e2
            + (0..n)
                .map(|i| {
                    let xi = train.values()[i];
                    train.weight(i) * ((l * (xi.abs() - 1.0) + bonus).max(s.floor) + s.shift)
                })
                .sum::<f64>()
    };
    if l == 0.0 {
        let v = (0..n).map(|i| train.weight(i) * (s.floor + s.shift)).sum::<f64>();
        return (v, 0.0);
    }
    // Term i is on its sloped branch iff lambda <= l^2 / (4 h_i).
    let mut breaks: Vec<f64> = (0..n)
        .filter_map(|i| {
            let h = s.floor - l * (train.values()[i].abs() - 1.0);
            (h > 0.0).then(|| l * l / (4.0 * h))
        })
        .collect();
    breaks.sort_by(f64::total_cmp);
    let mut cands = breaks.clone();
    let mut lo = 0.0;
    for k in 0..=breaks.len() {
        let hi = breaks.get(k).copied().unwrap_or(f64::INFINITY);
        let mid = if hi.is_finite() { 0.5 * (lo + hi) } else { lo + 1.0 };
        let w: f64 = (0..n)
            .filter(|&i| {
                let h = s.floor - l * (train.values()[i].abs() - 1.0);
                h <= 0.0 || mid <= l * l / (4.0 * h)
            })
            .map(|i| train.weight(i))
            .sum();
        if w > 0.0 {
            let stat = 0.5 * l * w.sqrt() / eps;
            if stat > lo && stat < hi {
                cands.push(stat);
            }
        }
        lo = hi;
    }
    cands
        .into_iter()
        .filter(|&c| c > 0.0 && c.is_finite())
        .map(|c| (value(c), c))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .unwrap_or((f64::INFINITY, f64::INFINITY))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotivExSolution {
    pub x: f64,
    pub objective: f64,
    pub lambda: f64,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn gl_nodes() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(15))
}

fn gl(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * gl_nodes().iter().map(|&(t, w)| w * f(c + h * t)).sum::<f64>()
}

fn adaptive_gl(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let whole = gl(f, a, b);
    let m = 0.5 * (a + b);
    let halves = gl(f, a, m) + gl(f, m, b);
    let err = (whole - halves).abs();
    if err <= tol {
        return Ok(halves);
    }
    if depth >= QUAD_MAX_DEPTH {
        return Err(Error::QuadFailure { estimate: halves, error: err });
    }
    Ok(adaptive_gl(f, a, m, 0.5 * tol, depth + 1)? + adaptive_gl(f, m, b, 0.5 * tol, depth + 1)?)
}

fn golden(f: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > GOLDEN_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// Grid search plus golden refinement of the three best local minima.
/// Ties go to the smaller `x`.
fn minimize_on_interval(f: &dyn Fn(f64) -> Result<f64>, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let xs: Vec<f64> = (0..=OUTER_GRID)
        .map(|i| lo + (hi - lo) * i as f64 / OUTER_GRID as f64)
        .collect();
    let vals = xs.iter().map(|&x| f(x)).collect::<Result<Vec<f64>>>()?;
    let mut locals: Vec<usize> = (0..xs.len())
        .filter(|&i| (i == 0 || vals[i] <= vals[i - 1]) && (i == OUTER_GRID || vals[i] <= vals[i + 1]))
        .collect();
    locals.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]).then(i.cmp(&j)));
    locals.truncate(3);
    let mut best = (xs[locals[0]], vals[locals[0]]);
    for &i in &locals {
        let a = xs[i.saturating_sub(1)];
        let b = xs[(i + 1).min(OUTER_GRID)];
        for cand in [golden(f, a, b)?, (xs[i], vals[i])] {
            if cand.1 < best.1 || (cand.1 == best.1 && cand.0 < best.0) {
                best = cand;
            }
        }
    }
    Ok(best)
}

/// Settings of the out-of-sample tail comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct TailConfig {
    pub eps_list: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_reps: usize,
    pub alpha: f64,
    pub seed: u64,
}

/// Twenty radii from 0.02 to 0.4; the moderate radius 0.2 sits mid-range.
pub fn default_eps_list() -> Vec<f64> {
    (1..=20).map(|k| 0.02 * k as f64).collect()
}

impl TailConfig {
    pub fn new(n_reps: usize, seed: u64) -> Self {
        Self {
            eps_list: default_eps_list(),
            n_train: 30,
            n_test: 20_000,
            n_reps,
            alpha: 0.05,
            seed,
        }
    }
}

/// One solve evaluated out of sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub eps: f64,
    pub rep: usize,
    pub p: u8,
    pub x: f64,
    pub oos_mean: f64,
    pub oos_premium: f64,
}

/// Per `(eps, p)` averages and 10%/90% quantiles across replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeRow {
    pub eps: f64,
    pub p: u8,
    pub mean: f64,
    pub mean_q10: f64,
    pub mean_q90: f64,
    pub premium: f64,
    pub premium_q10: f64,
    pub premium_q90: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    pub tubes: Vec<TubeRow>,
}

fn normal_draws(sigma: f64, n: usize, seed: u64, label: &str, index: u64) -> Result<Vec<f64>> {
    let dist = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let mut r = rng::substream(seed, label, index);
    Ok((0..n).map(|_| dist.sample(&mut r)).collect())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let (i, frac) = (h.floor() as usize, h - h.floor());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Solves 1- and 2-WDRO on each replication's training sample for every
/// radius and evaluates mean and `CVaR_alpha - mean` on a common test set.
pub fn tail_comparison(ex: &MotivEx, cfg: &TailConfig) -> Result<TailReport> {
    if cfg.eps_list.is_empty() || cfg.n_train == 0 || cfg.n_test == 0 || cfg.n_reps == 0 {
        return Err(Error::EmptyInput);
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::BadAlpha(cfg.alpha));
    }
    for &e in &cfg.eps_list {
        check_radius(e)?;
    }
    let sigma = ex.params.sigma;
    let test = normal_draws(sigma, cfg.n_test, cfg.seed, "motivex-test", 0)?;
    let trains = (0..cfg.n_reps)
        .map(|rep| LossSample::uniform(normal_draws(sigma, cfg.n_train, cfg.seed, "motivex-train", rep as u64)?))
        .collect::<Result<Vec<_>>>()?;
    let n_eps = cfg.eps_list.len();
    let jobs = n_eps * cfg.n_reps * 2;
    let rows = par::map_range(jobs, |j| -> Result<TailRow> {
        let (ei, rest) = (j / (cfg.n_reps * 2), j % (cfg.n_reps * 2));
        let (rep, pi) = (rest / 2, rest % 2);
        let order = if pi == 0 { Order::One } else { Order::Two };
        let eps = cfg.eps_list[ei];
        let sol = ex.wdro_1d(order, eps, &trains[rep])?;
        let losses = LossSample::uniform(test.iter().map(|&t| ex.loss_unchecked(sol.x, t)).collect())?;
        let mean = weighted_mean(&losses)?;
        let tail = cvar(&losses, cfg.alpha)?;
        Ok(TailRow {
            eps,
            rep,
            p: pi as u8 + 1,
            x: sol.x,
            oos_mean: mean,
            oos_premium: (tail - mean).max(0.0),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut tubes = Vec::with_capacity(n_eps * 2);
    for (ei, &eps) in cfg.eps_list.iter().enumerate() {
        for p in [1u8, 2] {
            let sel: Vec<&TailRow> = rows
                .iter()
                .enumerate()
                .filter(|(j, r)| j / (cfg.n_reps * 2) == ei && r.p == p)
                .map(|(_, r)| r)
                .collect();
            let mut means: Vec<f64> = sel.iter().map(|r| r.oos_mean).collect();
            let mut prems: Vec<f64> = sel.iter().map(|r| r.oos_premium).collect();
            let k = means.len() as f64;
            let (mm, pm) = (means.iter().sum::<f64>() / k, prems.iter().sum::<f64>() / k);
            means.sort_by(f64::total_cmp);
            prems.sort_by(f64::total_cmp);
            tubes.push(TubeRow {
                eps,
                p,
                mean: mm,
                mean_q10: quantile(&means, 0.1),
                mean_q90: quantile(&means, 0.9),
                premium: pm,
                premium_q10: quantile(&prems, 0.1),
                premium_q90: quantile(&prems, 0.9),
            });
        }
    }
    Ok(TailReport { rows, tubes })
}

/// Writes `eps,rep,p,oos_mean,oos_premium` rows.
pub fn write_report_csv(rows: &[TailRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["eps", "rep", "p", "oos_mean", "oos_premium"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.eps.to_string(),
            r.rep.to_string(),
            r.p.to_string(),
            r.oos_mean.to_string(),
            r.oos_premium.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the tube summary, one row per `(eps, p)`.
pub fn write_tubes_csv(tubes: &[TubeRow], path: &Path) -> Result<()> {
    if tubes.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "eps",
        "p",
        "mean",
        "mean_q10",
        "mean_q90",
        "premium",
        "premium_q10",
        "premium_q90",
    ])
    .map_err(csv_err)?;
    for t in tubes {
        w.write_record([
            t.eps.to_string(),
            t.p.to_string(),
            t.mean.to_string(),
            t.mean_q10.to_string(),
            t.mean_q90.to_string(),
            t.premium.to_string(),
            t.premium_q10.to_string(),
            t.premium_q90.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and premium charts: average curve per order with dashed 10%/90%
/// quantile bands.
pub fn tube_svgs(tubes: &[TubeRow]) -> Result<(String, String)> {
    let chart = |pick: fn(&TubeRow) -> (f64, f64, f64), title: &str, y: &str| -> Result<String> {
        let mut series = Vec::new();
        for p in [1u8, 2] {
            let rows: Vec<&TubeRow> = tubes.iter().filter(|t| t.p == p).collect();
            let line = |k: usize| -> Vec<(f64, f64)> {
                rows.iter()
                    .map(|t| {
                        let v = pick(t);
                        (t.eps, [v.0, v.1, v.2][k])
                    })
                    .collect()
            };
            series.push(Series { name: format!("{p}-WDRO"), points: line(0), markers: true, dashed: false });
            series.push(Series { name: format!("{p}-WDRO q10"), points: line(1), markers: false, dashed: true });
            series.push(Series { name: format!("{p}-WDRO q90"), points: line(2), markers: false, dashed: true });
        }
        render_series_svg(&series, title, "radius", y)
    };
    let mean = chart(|t| (t.mean, t.mean_q10, t.mean_q90), "Out-of-sample mean", "mean")?;
    let prem = chart(
        |t| (t.premium, t.premium_q10, t.premium_q90),
        "Out-of-sample CVaR - mean",
        "CVaR - mean",
    )?;
    Ok((mean, prem))
}

/// Human-readable constants, one `name = value` per line.
pub fn describe_constants(c: &MotivExConstants) -> String {
    let mut s = String::new();
    for (k, v) in [("A", c.big_a), ("B", c.big_b), ("a", c.a), ("b", c.b), ("c", c.c)] {
        let _ = writeln!(s, "{k} = {v:.10}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn ex() -> MotivEx {
        MotivEx::new(MotivExParams::default()).unwrap()
    }

    /// `E max(l(|xi| - 1), r)` through the half-normal partial expectation.
    fn closed_form(e: &MotivEx, x: f64) -> f64 {
        let s = e.section(x);
        let sigma = e.params.sigma;
        let base = if s.slope == 0.0 {
            s.floor
        } else {
            let k = 1.0 + s.floor / s.slope;
            let partial = if k >= 0.0 {
                2.0 * (sigma * sigma * normal_pdf(k, sigma) - k * normal_cdf(-k, sigma))
            } else {
                sigma * (2.0 / PI).sqrt() - k
            };
            s.floor + s.slope * partial
        };
        base + s.shift
    }

    #[test]
    fn constants_at_defaults() {
        let c = constants(&MotivExParams::default());
        let direct_a = 0.5 * (0.5 * (2.0 / PI).sqrt() - 1.0);
        assert!((c.big_a - direct_a).abs() < 1e-15);
        assert!((c.big_a + 0.3005288598).abs() < 1e-9);
        assert!((c.big_b - 0.0127360539).abs() < 1e-9);
        assert!((c.a + 2.6488290344).abs() < 1e-9);
        assert!((c.b - 3.6599786378).abs() < 1e-9);
        assert!((c.c + 3.5207259422).abs() < 1e-9);
        assert!((c.b - (c.big_a - c.big_b - c.a * 1.5)).abs() < 1e-14);
    }

    /// `B / (2 (beta + 1))` is `E (xi - 1)_+`; check it by quadrature.
    #[test]
    fn big_b_matches_quadrature() {
        let c = constants(&MotivExParams::default());
        let f = |t: f64| (t - 1.0) * normal_pdf(t, 0.5);
        let q = adaptive_gl(&f, 1.0, 6.0, 1e-13, 0).unwrap();
        assert!((c.big_b - 3.0 * q).abs() < 1e-11, "{} vs {}", c.big_b, 3.0 * q);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let nodes = gauss_legendre(15);
        let s: f64 = nodes.iter().map(|&(_, w)| w).sum();
        assert!((s - 2.0).abs() < 1e-14);
        let x28: f64 = nodes.iter().map(|&(t, w)| w * t.powi(28)).sum();
        assert!((x28 - 2.0 / 29.0).abs() < 1e-14);
    }

    #[test]
    fn loss_special_points() {
        let e = ex();
        let x0 = (0.5f64 * 1.5).sqrt();
        assert!(e.ell(x0).abs() < 1e-15);
        let c = e.consts;
        for xi in [-2.0, 0.0, 0.3] {
            let want = e.middle(x0) + (c.a * x0 + c.b) * (x0 - 0.5);
            assert!((e.loss(x0, xi).unwrap() - want).abs() < 1e-12);
            // x = beta: the shift term vanishes, F = beta (|xi| - 1).
            assert!((e.loss(0.5, xi).unwrap() - 0.5 * (xi.abs() - 1.0)).abs() < 1e-12);
            // x = beta + 1: r = 0, F = (beta+1)(|xi|-1)_+ + A - B.
            let want = 1.5 * (xi.abs() - 1.0).max(0.0) + c.big_a - c.big_b;
            assert!((e.loss(1.5, xi).unwrap() - want).abs() < 1e-12);
        }
        assert!(e.middle(1.5).abs() < 1e-15);
        assert!(matches!(e.loss(0.49, 0.0), Err(Error::InfeasibleDecision(_))));
        assert!(matches!(e.loss(1.6, 0.0), Err(Error::InfeasibleDecision(_))));
    }

    #[test]
    fn endpoints_have_equal_expectation() {
        let e = ex();
        let lo = e.true_expectation(0.5).unwrap();
        let hi = e.true_expectation(1.5).unwrap();
        assert!((lo - hi).abs() < 5e-6, "{lo} vs {hi}");
        assert!((lo - e.consts.big_a).abs() < 1e-8);
        for i in 1..100 {
            let x = 0.5 + i as f64 / 100.0;
            assert!(e.true_expectation(x).unwrap() >= lo.min(hi) - 1e-9, "x = {x}");
        }
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let e = ex();
        for i in 0..=50 {
            let x = 0.5 + i as f64 / 50.0;
            let q = e.true_expectation(x).unwrap();
            assert!((q - closed_form(&e, x)).abs() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn quadrature_matches_monte_carlo() {
        let e = ex();
        let draws = normal_draws(0.5, 1_000_000, 11, "mc", 0).unwrap();
        for x in [0.6, 0.9, 1.3] {
            let v: Vec<f64> = draws.iter().map(|&t| e.loss_unchecked(x, t)).collect();
            let n = v.len() as f64;
            let m = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let q = e.true_expectation(x).unwrap();
            assert!((m - q).abs() < (3.0 * sd / n.sqrt()).max(1e-9), "x = {x}: {m} vs {q}");
        }
    }

    fn sample(n: usize, seed: u64) -> LossSample {
        LossSample::uniform(normal_draws(0.5, n, seed, "t", 0).unwrap()).unwrap()
    }

    /// Brute-force dual: dense grids over xi and lambda.
    fn grid_dual(e: &MotivEx, order: Order, eps: f64, train: &LossSample, x: f64) -> f64 {
        let p = order.exponent();
        let lambdas: Vec<f64> = (0..=600).map(|k| 10f64.powf(-3.0 + k as f64 / 100.0)).collect();
        // Far points stop order 1 from exploiting a truncated support.
        let mut xis: Vec<f64> = (0..=24_000).map(|k| -12.0 + k as f64 * 1e-3).collect();
        xis.extend([-1e4, 1e4]);
        lambdas
            .iter()
            .map(|&lam| {
                lam * eps.powf(p)
                    + (0..train.len())
                        .map(|i| {
                            let z = train.values()[i];
                            train.weight(i)
                                * xis
                                    .iter()
                                    .map(|&t| e.loss_unchecked(x, t) - lam * (t - z).abs().powf(p))
                                    .fold(f64::NEG_INFINITY, f64::max)
                        })
                        .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn closed_form_dual_matches_grid() {
        let e = ex();
        let train = sample(6, 3);
        for (order, eps) in [(Order::Two, 0.2), (Order::Two, 0.05), (Order::One, 0.2)] {
            for x in [0.55, 0.9, 1.4] {
                let exact = e.wdro_objective(order, eps, &train, x).unwrap().0;
                let grid = grid_dual(&e, order, eps, &train, x);
                assert!(grid >= exact - 1e-5, "{order:?} x={x}: grid {grid} below {exact}");
                assert!((grid - exact).abs() < 2e-3 * (1.0 + exact.abs()), "{order:?} x={x}: {grid} vs {exact}");
            }
        }
    }

    #[test]
    fn order_two_lambda_is_optimal() {
        let e = ex();
        let train = sample(30, 4);
        let x = 1.2;
        let (v, lam) = e.wdro_objective(Order::Two, 0.3, &train, x).unwrap();
        let s = e.section(x);
        let at = |l: f64| {
            l * 0.09
                + (0..30)
                    .map(|i| train.weight(i) * ((s.slope * (train.values()[i].abs() - 1.0) + s.slope.powi(2) / (4.0 * l)).max(s.floor) + s.shift))
                    .sum::<f64>()
        };
        assert!((at(lam) - v).abs() < 1e-12);
        for f in [0.9, 0.99, 1.01, 1.1] {
            assert!(at(lam * f) >= v - 1e-12);
        }
    }

    #[test]
    fn zero_radius_is_saa_for_both_orders() {
        let e = ex();
        let train = sample(30, 5);
        let a = e.wdro_1d(Order::One, 0.0, &train).unwrap();
        let b = e.wdro_1d(Order::Two, 0.0, &train).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.objective, b.objective);
        let grid_best = (0..=10_000)
            .map(|i| 0.5 + i as f64 / 10_000.0)
            .map(|x| (0..30).map(|i| e.loss_unchecked(x, train.values()[i])).sum::<f64>() / 30.0)
            .fold(f64::INFINITY, f64::min);
        assert!(a.objective <= grid_best + 1e-12);
        assert!(a.objective >= grid_best - 1e-6);
    }

    #[test]
    fn objective_nondecreasing_in_radius() {
        let e = ex();
        let train = sample(30, 6);
        for order in [Order::One, Order::Two] {
            let mut prev = f64::NEG_INFINITY;
            for k in 0..15 {
                let v = e.wdro_1d(order, 0.03 * k as f64, &train).unwrap().objective;
                assert!(v >= prev - 1e-10, "{order:?} k={k}");
                prev = v;
            }
        }
    }

    #[test]
    fn large_radius_approaches_robust_solution() {
        let e = ex();
        let (x_box, _) = e.robust_argmin(SUPPORT_SIGMAS * 0.5).unwrap();
        assert!(x_box > 0.6 && x_box < 1.4, "{x_box}");
        // The middle branch holds the minimizer left of the zero of l by
        // about sqrt(r / (k G)).
        let x0 = 0.75f64.sqrt();
        assert!((e.robust_argmin(1e7).unwrap().0 - x0).abs() < 1e-3);
        let (x_ro, _) = e.robust_argmin(1e3).unwrap();
        assert!((x_ro - x0).abs() < 0.02, "{x_ro}");
        let train = sample(30, 7);
        for order in [Order::One, Order::Two] {
            let d = |eps: f64| (e.wdro_1d(order, eps, &train).unwrap().x - x0).abs();
            let (d1, d2) = (d(1.0), d(1e3));
            assert!(d2 < 0.02, "{order:?}: {d2}");
            assert!(d2 <= d1 + 1e-9, "{order:?}: {d1} then {d2}");
        }
    }

    #[test]
    fn orders_disagree_on_some_samples() {
        let e = ex();
        let mut differ = 0;
        for seed in 0..10 {
            let train = sample(30, 100 + seed);
            let a = e.wdro_1d(Order::One, 0.2, &train).unwrap().x;
            let b = e.wdro_1d(Order::Two, 0.2, &train).unwrap().x;
            if (a - b).abs() > 0.25 {
                differ += 1;
            }
        }
        assert!(differ > 0);
    }

    #[test]
    fn tail_comparison_deterministic() {
        let e = ex();
        let mut cfg = TailConfig::new(1, 9);
        cfg.eps_list = vec![0.0, 0.2];
        cfg.n_test = 2_000;
        let a = tail_comparison(&e, &cfg).unwrap();
        let b = tail_comparison(&e, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 4);
        assert_eq!(a.tubes.len(), 4);
        assert_eq!(a.rows[0].x, a.rows[1].x);
        assert!(a.rows.iter().all(|r| r.oos_premium >= 0.0));
        let dir = tempfile::tempdir().unwrap();
        write_report_csv(&a.rows, &dir.path().join("r.csv")).unwrap();
        let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
        assert!(text.starts_with("eps,rep,p,oos_mean,oos_premium\n"));
        assert_eq!(text.lines().count(), 5);
        let (m, p) = tube_svgs(&a.tubes).unwrap();
        assert!(m.contains("1-WDRO") && p.contains("2-WDRO q90"));
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0];
        assert_eq!(quantile(&v, 0.1), 2.0);
        assert_eq!(quantile(&v, 0.9), 10.0);
        assert_eq!(quantile(&[3.0], 0.9), 3.0);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(MotivExParams::new(0.0, 0.5, 0.5).is_err());
        assert!(MotivExParams::new(0.5, -1.0, 0.5).is_err());
        assert!(MotivExParams::new(0.5, 0.5, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn branch_form_agrees(x in 0.5f64..1.5, xi in -6.0f64..6.0) {
            let e = ex();
            prop_assert!((e.loss_unchecked(x, xi) - e.section(x).eval(xi)).abs() < 1e-12);
        }

        #[test]
        fn continuous_at_branch_boundaries(x in 0.5f64..1.5, side in prop::bool::ANY) {
            let e = ex();
            let s = e.section(x);
            prop_assume!(s.slope > 1e-6);
            let k = (1.0 + s.floor / s.slope) * if side { 1.0 } else { -1.0 };
            prop_assume!(k.abs() <= SUPPORT_SIGMAS * 0.5);
            let mut r = rng::from_seed(x.to_bits());
            for kink in [k, 0.0] {
                for _ in 0..5 {
                    let dxi: f64 = r.random_range(-1e-8..1e-8);
                    prop_assert!((e.loss_unchecked(x, kink + dxi) - e.loss_unchecked(x, kink)).abs() < 1e-7);
                }
            }
        }
    }
}
