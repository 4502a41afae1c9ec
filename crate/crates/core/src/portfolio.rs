//! Mean-CVaR portfolio: loss, max-affine form, gradient-norm factors,
//! both regularizer aggregations and SBR solvers over the simplex.
//!
//! Decisions are `(w, tau)` with `w` in the probability simplex and `tau`
//! the CVaR auxiliary variable. For a fixed assignment of scenarios to the
//! tail or non-tail regime the regularizer is `kappa * ||w||_2`, so each
//! region pattern gives a convex program solved by the ellipsoid method in
//! reduced coordinates `(w_1, ..., w_{d-1}, tau)`.

use rand::Rng as _;
use serde_json::json;

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::par;
use crate::rng;
use crate::scenarios::RegularizerSpec;
use crate::solve::{dot, ellipsoid, norm2, ConvexProblem, ConvexSolution, EllipsoidOptions, Halfspace};

/// Risk aversion `rho`, CVaR level `alpha`, bound `C` on `|tau|` and kink
/// tolerance `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioParams {
    pub rho: f64,
    pub alpha: f64,
    pub tau_bound: f64,
    pub delta: f64,
}

pub const DEFAULT_DELTA: f64 = 1e-6;

impl PortfolioParams {
    pub fn new(rho: f64, alpha: f64, tau_bound: f64, delta: f64) -> Result<Self> {
        let p = Self {
            rho,
            alpha,
            tau_bound,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Sets `C` to three times the largest absolute return in the training
    /// sample and scenario set (at least 1e-3).
    pub fn with_default_bound(rho: f64, alpha: f64, train: &DiscreteMeasure, spec: Option<&RegularizerSpec>) -> Result<Self> {
        let k = data_bound(train, spec);
        Self::new(rho, alpha, 3.0 * k.max(1e-3), DEFAULT_DELTA)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParams(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::BadAlpha(self.alpha));
        }
        if !(self.tau_bound > 0.0 && self.tau_bound.is_finite()) {
            return Err(Error::InvalidParams(format!("tau bound must be positive, got {}", self.tau_bound)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParams(format!("delta must be positive, got {}", self.delta)));
        }
        Ok(())
    }

    /// Gradient-norm factor of a tail scenario, `1 + rho/alpha`.
    pub fn tail_factor(&self) -> f64 {
        1.0 + self.rho / self.alpha
    }

    /// Slopes and intercept coefficients `(a_k, b_k)` of the max-affine form.
    pub fn affine_pieces(&self) -> [(f64, f64); 2] {
        [
            (-1.0, self.rho),
            (-1.0 - self.rho / self.alpha, self.rho * (1.0 - 1.0 / self.alpha)),
        ]
    }
}

/// `K`: largest absolute entry over training atoms and scenarios.
pub fn data_bound(train: &DiscreteMeasure, spec: Option<&RegularizerSpec>) -> f64 {
    train.max_abs().max(spec.map_or(0.0, RegularizerSpec::max_abs))
}

/// Portfolio weights on the simplex and CVaR threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioDecision {
    pub w: Vec<f64>,
    pub tau: f64,
}

const SIMPLEX_TOL: f64 = 1e-10;

impl PortfolioDecision {
    pub fn new(w: Vec<f64>, tau: f64) -> Self {
        Self { w, tau }
    }

    pub fn check(&self, params: &PortfolioParams) -> Result<()> {
        if self.w.is_empty() {
            return Err(Error::EmptyInput);
        }
        if self.w.iter().any(|&x| !(x >= -SIMPLEX_TOL) || !x.is_finite()) {
            return Err(Error::InfeasibleDecision("negative weight".into()));
        }
        let s: f64 = self.w.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InfeasibleDecision(format!("weights sum to {s}")));
        }
        if !self.tau.is_finite() || self.tau.abs() > params.tau_bound * (1.0 + 1e-12) {
            return Err(Error::InfeasibleDecision(format!(
                "|tau| = {} exceeds {}",
                self.tau.abs(),
                params.tau_bound
            )));
        }
        Ok(())
    }
}

fn check_dim(dec: &PortfolioDecision, xi: &[f64]) -> Result<()> {
    if xi.len() != dec.w.len() {
        return Err(Error::DimMismatch {
            expected: dec.w.len(),
            got: xi.len(),
        });
    }
    Ok(())
}

/// `-w'xi + rho (tau + (1/alpha) (-w'xi - tau)_+)`.
pub fn loss(params: &PortfolioParams, dec: &PortfolioDecision, xi: &[f64]) -> Result<f64> {
    dec.check(params)?;
    check_dim(dec, xi)?;
    Ok(loss_unchecked(params, &dec.w, dec.tau, xi))
}

pub(crate) fn loss_unchecked(p: &PortfolioParams, w: &[f64], tau: f64, xi: &[f64]) -> f64 {
    let s = dot(w, xi);
    -s + p.rho * (tau + (-s - tau).max(0.0) / p.alpha)
}

/// `max_k (a_k w'xi + b_k tau)`.
pub fn loss_max_affine(params: &PortfolioParams, dec: &PortfolioDecision, xi: &[f64]) -> Result<f64> {
    dec.check(params)?;
    check_dim(dec, xi)?;
    let s = dot(&dec.w, xi);
    Ok(params
        .affine_pieces()
        .iter()
        .map(|(a, b)| a * s + b * dec.tau)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// True when `zeta` is in the tail regime, `-w'zeta >= tau`.
pub fn is_tail(dec: &PortfolioDecision, zeta: &[f64]) -> bool {
    -dot(&dec.w, zeta) >= dec.tau
}

/// `1` for a non-tail scenario, `1 + rho/alpha` in the tail (kink included).
/// The chosen subgradient in `xi` is `-w` times this factor.
pub fn grad_norm_factor(params: &PortfolioParams, dec: &PortfolioDecision, zeta: &[f64]) -> f64 {
    if is_tail(dec, zeta) {
        params.tail_factor()
    } else {
        1.0
    }
}

/// Tail flags of every scenario at `dec`.
pub fn regions(dec: &PortfolioDecision, spec: &RegularizerSpec) -> Vec<bool> {
    spec.scenarios().iter().map(|z| is_tail(dec, z)).collect()
}

/// Aggregated factor `kappa` for a tail pattern.
pub fn kappa(params: &PortfolioParams, spec: &RegularizerSpec, tail: &[bool]) -> f64 {
    let f = params.tail_factor();
    spec.aggregation()
        .combine(spec.weights(), tail.iter().map(|&t| if t { f } else { 1.0 }))
}

fn check_spec(dec: &PortfolioDecision, spec: &RegularizerSpec) -> Result<()> {
    if spec.dim() != dec.w.len() {
        return Err(Error::DimMismatch {
            expected: dec.w.len(),
            got: spec.dim(),
        });
    }
    Ok(())
}

/// `kappa(regions(dec)) * ||w||_2`.
pub fn regularizer(params: &PortfolioParams, spec: &RegularizerSpec, dec: &PortfolioDecision) -> Result<f64> {
    dec.check(params)?;
    check_spec(dec, spec)?;
    Ok(kappa(params, spec, &regions(dec, spec)) * norm2(&dec.w))
}

fn check_train(dec: &PortfolioDecision, train: &DiscreteMeasure) -> Result<()> {
    if train.dim() != dec.w.len() {
        return Err(Error::DimMismatch {
            expected: dec.w.len(),
            got: train.dim(),
        });
    }
    Ok(())
}

/// Empirical mean-CVaR objective at `dec`.
pub fn saa_objective(params: &PortfolioParams, train: &DiscreteMeasure, dec: &PortfolioDecision) -> Result<f64> {
    dec.check(params)?;
    check_train(dec, train)?;
    Ok(train.expect(|xi| loss_unchecked(params, &dec.w, dec.tau, xi)))
}

/// `saa_objective + eps * regularizer`.
pub fn sbr_objective(
    params: &PortfolioParams,
    train: &DiscreteMeasure,
    spec: &RegularizerSpec,
    eps: f64,
    dec: &PortfolioDecision,
) -> Result<f64> {
    check_eps(eps)?;
    Ok(saa_objective(params, train, dec)? + eps * regularizer(params, spec, dec)?)
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParams(format!("eps must be finite and nonnegative, got {eps}")));
    }
    Ok(())
}

/// Maps reduced coordinates `(w_1..w_{d-1}, tau, extra...)` to `(w, tau)`.
pub(crate) fn unreduce(y: &[f64], d: usize) -> (Vec<f64>, f64) {
    let mut w: Vec<f64> = y[..d - 1].to_vec();
    let last = 1.0 - w.iter().sum::<f64>();
    w.push(last);
    (w, y[d - 1])
}

/// Chain rule from a gradient in `w` to the reduced coordinates.
pub(crate) fn reduce_grad(gw: &[f64], out: &mut [f64]) {
    let d = gw.len();
    for i in 0..d - 1 {
        out[i] = gw[i] - gw[d - 1];
    }
}

/// Half-spaces `w_i >= 0`, `sum_{i<d} w_i <= 1`, `|tau| <= C` in reduced
/// coordinates of total dimension `k >= d`.
pub(crate) fn simplex_box(d: usize, k: usize, c: f64) -> Vec<Halfspace> {
    let mut hs = Vec::new();
    for i in 0..d - 1 {
        let mut a = vec![0.0; k];
        a[i] = -1.0;
        hs.push(Halfspace::new(a, 0.0));
    }
    if d > 1 {
        let mut a = vec![0.0; k];
        a[..d - 1].iter_mut().for_each(|x| *x = 1.0);
        hs.push(Halfspace::new(a, 1.0));
    }
    for s in [1.0, -1.0] {
        let mut a = vec![0.0; k];
        a[d - 1] = s;
        hs.push(Halfspace::new(a, c));
    }
    hs
}

/// Empirical mean-CVaR value and `w`/`tau` gradient.
pub(crate) fn saa_value_grad(p: &PortfolioParams, train: &DiscreteMeasure, w: &[f64], tau: f64) -> (f64, Vec<f64>, f64) {
    let d = w.len();
    let mut f = 0.0;
    let mut gw = vec![0.0; d];
    let mut gt = 0.0;
    let hinge = p.rho / p.alpha;
    for (xi, &pi) in train.points().iter().zip(train.weights()) {
        let s = dot(w, xi);
        let active = -s - tau > 0.0;
        let (slope, tslope) = if active { (1.0 + hinge, p.rho - hinge) } else { (1.0, p.rho) };
        f += pi * (-s + p.rho * tau + if active { hinge * (-s - tau) } else { 0.0 });
        for (g, x) in gw.iter_mut().zip(xi) {
            *g -= pi * slope * x;
        }
        gt += pi * tslope;
    }
    (f, gw, gt)
}

/// Convex solver settings shared by the portfolio and WDRO solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexSettings {
    pub ellipsoid: EllipsoidOptions,
    /// Accept a non-converged run when its certificate gap is below
    /// `accept_gap * max(1, |value|)`.
    pub accept_gap: f64,
}

impl Default for ConvexSettings {
    fn default() -> Self {
        Self {
            ellipsoid: EllipsoidOptions {
                max_iter: 400_000,
                tol_abs: 1e-10,
                tol_rel: 1e-9,
            },
            accept_gap: 1e-5,
        }
    }
}

pub(crate) fn certify(sol: ConvexSolution, settings: &ConvexSettings) -> Result<ConvexSolution> {
    if sol.converged || sol.gap <= settings.accept_gap * sol.value.abs().max(1.0) {
        Ok(sol)
    } else {
        Err(Error::MaxIterWithCertificateGap {
            point: sol.x,
            value: sol.value,
            gap: sol.gap,
        })
    }
}

/// Strict-side margin for non-tail region constraints.
const NONTAIL_MARGIN: f64 = 1e-9;

/// Minimizes `saa + weight * ||w||_2` over simplex x [-C, C], optionally
/// restricted to a tail pattern over `spec`.
fn solve_convex(
    params: &PortfolioParams,
    train: &DiscreteMeasure,
    weight: f64,
    pattern: Option<(&RegularizerSpec, &[bool])>,
    settings: &ConvexSettings,
) -> Result<ConvexSolution> {
    let d = train.dim();
    let objective = move |y: &[f64]| {
        let (w, tau) = unreduce(y, d);
        let (mut f, mut gw, gt) = saa_value_grad(params, train, &w, tau);
        let n = norm2(&w);
        if weight > 0.0 && n > 0.0 {
            f += weight * n;
            for (g, x) in gw.iter_mut().zip(&w) {
                *g += weight * x / n;
            }
        }
        let mut g = vec![0.0; d];
        reduce_grad(&gw, &mut g);
        g[d - 1] = gt;
        (f, g)
    };
    let mut constraints = simplex_box(d, d, params.tau_bound);
    if let Some((spec, tail)) = pattern {
        for (z, &t) in spec.scenarios().iter().zip(tail) {
            // w'zeta in reduced coordinates: sum_{i<d} (z_i - z_d) y_i + z_d.
            let mut a = vec![0.0; d];
            for i in 0..d - 1 {
                a[i] = z[i] - z[d - 1];
            }
            a[d - 1] = 1.0;
            let base = z[d - 1];
            if t {
                // w'zeta + tau <= delta
                constraints.push(Halfspace::new(a, params.delta - base));
            } else {
                // -w'zeta - tau <= -margin
                constraints.push(Halfspace::new(a.iter().map(|x| -x).collect(), base - NONTAIL_MARGIN));
            }
        }
    }
    let problem = ConvexProblem::new(d, Box::new(objective)).with_constraints(constraints);
    let mut center = vec![0.5; d];
    let mut axes = vec![0.5; d];
    center[d - 1] = 0.0;
    axes[d - 1] = params.tau_bound;
    let sol = ellipsoid(&problem, &center, &axes, settings.ellipsoid)?;
    certify(sol, settings)
}

/// Outcome of a portfolio solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSolution {
    pub w: Vec<f64>,
    pub tau: f64,
    pub objective: f64,
    pub eps: f64,
    /// Method tag, e.g. `saa`, `sbr-quadratic`, `wdro1`.
    pub variant: String,
    pub mode: String,
    /// Tail flags of the regularization scenarios at the solution.
    pub regions: Vec<bool>,
}

impl PortfolioSolution {
    pub fn decision(&self) -> PortfolioDecision {
        PortfolioDecision::new(self.w.clone(), self.tau)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "w": self.w,
            "tau": self.tau,
            "objective": self.objective,
            "eps": self.eps,
            "variant": self.variant,
            "mode": self.mode,
            "regions": self.regions,
        })
    }
}

/// Cleans round-off from the reduced-coordinate solution.
pub(crate) fn decision_from(y: &[f64], d: usize, c: f64) -> PortfolioDecision {
    let (w, tau) = unreduce(y, d);
    let w = w.iter().map(|x| x.max(0.0)).collect::<Vec<_>>();
    let s: f64 = w.iter().sum();
    PortfolioDecision::new(w.iter().map(|x| x / s).collect(), tau.clamp(-c, c))
}

/// Convex subproblem `saa + eps * kappa * ||w||_2` with region constraints
/// dropped.
pub fn solve_fixed_regions(
    params: &PortfolioParams,
    train: &DiscreteMeasure,
    kappa: f64,
    eps: f64,
) -> Result<(PortfolioDecision, f64)> {
    solve_fixed_regions_with(params, train, kappa, eps, &ConvexSettings::default())
}

pub fn solve_fixed_regions_with(
    params: &PortfolioParams,
    train: &DiscreteMeasure,
    kappa: f64,
    eps: f64,
    settings: &ConvexSettings,
) -> Result<(PortfolioDecision, f64)> {
    params.validate()?;
    check_eps(eps)?;
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParams(format!("kappa must be nonnegative, got {kappa}")));
    }
    let sol = solve_convex(params, train, eps * kappa, None, settings)?;
    let dec = decision_from(&sol.x, train.dim(), params.tau_bound);
    let obj = saa_objective(params, train, &dec)? + eps * kappa * norm2(&dec.w);
    Ok((dec, obj))
}

/// Empirical mean-CVaR minimizer.
pub fn solve_saa(params: &PortfolioParams, train: &DiscreteMeasure) -> Result<PortfolioSolution> {
    let (dec, obj) = solve_fixed_regions(params, train, 0.0, 0.0)?;
    Ok(PortfolioSolution {
        w: dec.w,
        tau: dec.tau,
        objective: obj,
        eps: 0.0,
        variant: "saa".into(),
        mode: "convex".into(),
        regions: Vec::new(),
    })
}

/// How [`solve_sbr`] handles the region patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SbrMode {
    /// Every tail pattern, each a convex program with region constraints.
    ExactEnum,
    /// Alternate between fixing regions and re-solving, from several starts.
    Alternating,
}

impl SbrMode {
    pub fn tag(self) -> &'static str {
        match self {
            SbrMode::ExactEnum => "exact",
            SbrMode::Alternating => "alternating",
        }
    }
}

impl std::str::FromStr for SbrMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SbrMode::ExactEnum),
            "alternating" => Ok(SbrMode::Alternating),
            _ => Err(Error::InvalidParams(format!("unknown mode '{s}'"))),
        }
    }
}

/// Limits for [`solve_sbr_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbrOptions {
    pub max_enum_m: usize,
    /// Random starting patterns on top of all-non-tail, all-tail and the
    /// SAA pattern.
    pub random_starts: usize,
    pub max_rounds: usize,
    pub convex: ConvexSettings,
}

impl Default for SbrOptions {
    fn default() -> Self {
        Self {
            max_enum_m: 12,
            random_starts: 4,
            max_rounds: 30,
            convex: ConvexSettings::default(),
        }
    }
}

fn variant_tag(spec: &RegularizerSpec) -> String {
    format!("sbr-{}", spec.aggregation().tag())
}

struct Candidate {
    dec: PortfolioDecision,
    objective: f64,
}

/// Lowest objective, ties by lexicographic `w` then `tau`.
fn better(a: &Candidate, b: &Candidate) -> bool {
    if a.objective != b.objective {
        return a.objective < b.objective;
    }
    for (x, y) in a.dec.w.iter().zip(&b.dec.w) {
        if x != y {
            return x < y;
        }
    }
    a.dec.tau < b.dec.tau
}

fn pick_best(cands: impl IntoIterator<Item = Candidate>) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    for c in cands {
        if best.as_ref().map_or(true, |b| better(&c, b)) {
            best = Some(c);
        }
    }
    best
}

/// SBR-SAA with default options.
pub fn solve_sbr(
    params: &PortfolioParams,
    train: &DiscreteMeasure,
    spec: &RegularizerSpec,
    eps: f64,
    mode: SbrMode,
    seed: u64,
) -> Result<PortfolioSolution> {
    solve_sbr_with(params, train, spec, eps, mode, seed, &SbrOptions::default())
}

pub fn solve_sbr_with(
    params: &PortfolioParams,
    train: &DiscreteMeasure,
    spec: &RegularizerSpec,
    eps: f64,
    mode: SbrMode,
    seed: u64,
    opts: &SbrOptions,
) -> Result<PortfolioSolution> {
    params.validate()?;
    check_eps(eps)?;
    if spec.dim() != train.dim() {
        return Err(Error::DimMismatch {
            expected: train.dim(),
            got: spec.dim(),
        });
    }
    let m = spec.len();
    let true_obj = |dec: &PortfolioDecision| sbr_objective(params, train, spec, eps, dec);
    let best = if eps == 0.0 {
        let (dec, _) = solve_fixed_regions_with(params, train, 0.0, 0.0, &opts.convex)?;
        let objective = true_obj(&dec)?;
        Candidate { dec, objective }
    } else {
        match mode {
            SbrMode::ExactEnum => {
                if m > opts.max_enum_m {
                    return Err(Error::ModeUnavailable(format!(
                        "exact enumeration needs m <= {}, got {m}",
                        opts.max_enum_m
                    )));
                }
                exact_enum(params, train, spec, eps, opts)?
            }
            SbrMode::Alternating => alternating(params, train, spec, eps, seed, opts)?,
        }
    };
    Ok(PortfolioSolution {
        regions: regions(&best.dec, spec),
        w: best.dec.w,
        tau: best.dec.tau,
        objective: best.objective,
        eps,
        variant: variant_tag(spec),
        mode: mode.tag().into(),
    })
}

fn exact_enum(
    params: &PortfolioParams,
    train: &DiscreteMeasure,
    spec: &RegularizerSpec,
    eps: f64,
    opts: &SbrOptions,
) -> Result<Candidate> {
    let m = spec.len();
    let results = par::map_range(1usize << m, |bits| {
        let tail: Vec<bool> = (0..m).map(|j| bits >> j & 1 == 1).collect();
        constrained_candidate(params, train, spec, eps, &tail, &opts.convex)
    });
    let mut cands = Vec::new();
    for r in results {
        if let Some(c) = r? {
            cands.push(c);
        }
    }
    pick_best(cands).ok_or(Error::Infeasible)
}

fn alternating(
    params: &PortfolioParams,
    train: &DiscreteMeasure,
    spec: &RegularizerSpec,
    eps: f64,
    seed: u64,
    opts: &SbrOptions,
) -> Result<Candidate> {
    let m = spec.len();
    let (saa, _) = solve_fixed_regions_with(params, train, 0.0, 0.0, &opts.convex)?;
    let mut starts = vec![vec![false; m], vec![true; m], regions(&saa, spec)];
    let mut r = rng::substream(seed, "portfolio-start", 0);
    for _ in 0..opts.random_starts {
        starts.push((0..m).map(|_| r.random_bool(0.5)).collect());
    }
    let runs = par::map_slice(&starts, |start| -> Result<Candidate> {
        let mut tail = start.clone();
        let mut seen: Vec<Vec<bool>> = Vec::new();
        let mut best: Option<Candidate> = None;
        for _ in 0..opts.max_rounds {
            let k = kappa(params, spec, &tail);
            let (dec, _) = solve_fixed_regions_with(params, train, k, eps, &opts.convex)?;
            let objective = sbr_objective(params, train, spec, eps, &dec)?;
            let next = regions(&dec, spec);
            let cand = Candidate { dec, objective };
            if best.as_ref().map_or(true, |b| better(&cand, b)) {
                best = Some(cand);
            }
            seen.push(tail);
            if seen.contains(&next) {
                break;
            }
            tail = next;
        }
        Ok(best.expect("at least one round"))
    });
    let mut cands = Vec::with_capacity(runs.len() + 1);
    let saa_obj = sbr_objective(params, train, spec, eps, &saa)?;
    cands.push(Candidate {
        dec: saa,
        objective: saa_obj,
    });
    for r in runs {
        cands.push(r?);
    }
    let best = pick_best(cands).expect("nonempty");
    polish(params, train, spec, eps, best, opts)
}

/// Solves the region-constrained program for one tail pattern.
fn constrained_candidate(
    params: &PortfolioParams,
    train: &DiscreteMeasure,
    spec: &RegularizerSpec,
    eps: f64,
    tail: &[bool],
    settings: &ConvexSettings,
) -> Result<Option<Candidate>> {
    let weight = eps * kappa(params, spec, tail);
    match solve_convex(params, train, weight, Some((spec, tail)), settings) {
        Ok(sol) => {
            let dec = decision_from(&sol.x, train.dim(), params.tau_bound);
            let objective = sbr_objective(params, train, spec, eps, &dec)?;
            Ok(Some(Candidate { dec, objective }))
        }
        Err(Error::Infeasible) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Local search over tail patterns: the unconstrained fixed-region solves
/// never land on a kink, so single-bit flips with region constraints are
/// tried until no flip improves.
fn polish(
    params: &PortfolioParams,
    train: &DiscreteMeasure,
    spec: &RegularizerSpec,
    eps: f64,
    start: Candidate,
    opts: &SbrOptions,
) -> Result<Candidate> {
    let m = spec.len();
    let mut best = start;
    let mut tail = regions(&best.dec, spec);
    for _ in 0..opts.max_rounds {
        let flips = par::map_range(m, |j| {
            let mut t = tail.clone();
            t[j] = !t[j];
            constrained_candidate(params, train, spec, eps, &t, &opts.convex)
        });
        let mut round: Option<Candidate> = None;
        for c in flips {
            if let Some(c) = c? {
                if round.as_ref().map_or(true, |r| better(&c, r)) {
                    round = Some(c);
                }
            }
        }
        match round {
            Some(c) if c.objective < best.objective - 1e-12 * best.objective.abs().max(1.0) => {
                tail = regions(&c.dec, spec);
                best = c;
            }
            _ => break,
        }
    }
    Ok(best)
}
