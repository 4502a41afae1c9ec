//! Out-of-sample metrics, performance-robustness frontiers and the
//! newsvendor replication study.

use std::path::Path;

use crate::error::{Error, Result};
use crate::measure::{cvar, weighted_mean, DiscreteMeasure, LossSample};
use crate::newsvendor::{self, CellOptions, NewsvendorParams};
use crate::par;
use crate::portfolio::{self, PortfolioParams, PortfolioSolution, SbrMode, SbrOptions};
use crate::rng;
use crate::scenarios::{compress, csv_err, Aggregation, RegularizerSpec};
use crate::wdro;

use super::generate::gen_newsvendor_demand;

/// Out-of-sample mean, CVaR and tail premium `cvar - mean`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OosMetrics {
    pub mean: f64,
    pub cvar: f64,
    pub premium: f64,
}

/// Evaluates `loss` on every test atom and summarizes.
pub fn oos_metrics<F>(loss: F, test: &DiscreteMeasure, alpha: f64) -> Result<OosMetrics>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let values = par::map_slice(test.points(), |xi| loss(xi));
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite out-of-sample loss".into()));
    }
    let w = test.weights();
    let sample = if w.iter().all(|&x| x == w[0]) {
        LossSample::uniform(values)?
    } else {
        LossSample::new(values, Some(w.to_vec()))?
    };
    let mean = weighted_mean(&sample)?;
    let c = cvar(&sample, alpha)?;
    Ok(OosMetrics {
        mean,
        cvar: c,
        premium: c - mean,
    })
}

/// One solved radius evaluated out of sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub eps: f64,
    pub method: String,
    pub mean: f64,
    pub cvar: f64,
    pub premium: f64,
}

/// A radius whose solve failed.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierFailure {
    pub eps: f64,
    pub method: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Frontier {
    pub points: Vec<FrontierPoint>,
    pub failures: Vec<FrontierFailure>,
}

impl Frontier {
    /// The `eps = 0` point.
    pub fn saa(&self) -> Option<&FrontierPoint> {
        self.points.iter().find(|p| p.eps == 0.0)
    }

    pub fn extend(&mut self, other: Frontier) {
        self.points.extend(other.points);
        self.failures.extend(other.failures);
    }
}

/// The grid with `0` added, sorted ascending without duplicates.
pub fn frontier_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidParams("empty radius grid".into()));
    }
    if grid.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(Error::InvalidParams("radii must be finite and nonnegative".into()));
    }
    let mut g = grid.to_vec();
    g.push(0.0);
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

/// Solves at every radius (plus zero) and evaluates on `test`. Solver
/// errors are recorded per radius.
pub fn frontier<D, S, L>(method: &str, solver: S, loss: L, test: &DiscreteMeasure, grid: &[f64], alpha: f64) -> Result<Frontier>
where
    D: Send + Sync,
    S: Fn(f64) -> Result<D> + Sync,
    L: Fn(&D, &[f64]) -> f64 + Sync,
{
    let grid = frontier_grid(grid)?;
    let results = par::map_slice(&grid, |&eps| solver(eps).and_then(|d| oos_metrics(|xi| loss(&d, xi), test, alpha)));
    let mut out = Frontier::default();
    for (&eps, r) in grid.iter().zip(results) {
        match r {
            Ok(m) => out.points.push(FrontierPoint {
                eps,
                method: method.to_string(),
                mean: m.mean,
                cvar: m.cvar,
                premium: m.premium,
            }),
            Err(e) => out.failures.push(FrontierFailure {
                eps,
                method: method.to_string(),
                error: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Newsvendor decision rules compared on a frontier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewsvendorMethod {
    Saa,
    Sbr,
    Wdro1,
}

impl NewsvendorMethod {
    pub fn tag(self, m: usize) -> String {
        match self {
            NewsvendorMethod::Saa => "saa".into(),
            NewsvendorMethod::Sbr => format!("sbr-m{m}"),
            NewsvendorMethod::Wdro1 => "wdro1".into(),
        }
    }
}

/// Frontier of one newsvendor method. At `eps = 0` every method uses the
/// SAA solve.
pub fn newsvendor_frontier(
    params: &NewsvendorParams,
    train: &DiscreteMeasure,
    spec: &RegularizerSpec,
    test: &DiscreteMeasure,
    grid: &[f64],
    alpha: f64,
    method: NewsvendorMethod,
    seed: u64,
) -> Result<Frontier> {
    let saa = newsvendor::solve_saa(params, train)?.x;
    let solver = |eps: f64| -> Result<Vec<f64>> {
        if eps == 0.0 {
            return Ok(saa.clone());
        }
        match method {
            NewsvendorMethod::Saa => Ok(saa.clone()),
            NewsvendorMethod::Sbr => Ok(newsvendor::solve_sbr(params, train, spec, eps, CellOptions::default(), seed)?.x),
            NewsvendorMethod::Wdro1 => Ok(wdro::solve_newsvendor_1wdro(params, train, eps)?.x),
        }
    };
    let grid: Vec<f64> = if method == NewsvendorMethod::Saa { vec![0.0] } else { grid.to_vec() };
    frontier(
        &method.tag(spec.len()),
        solver,
        |x: &Vec<f64>, xi: &[f64]| newsvendor::loss_unchecked(params, x, xi),
        test,
        &grid,
        alpha,
    )
}

/// Portfolio decision rules compared on a frontier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PortfolioMethod {
    Saa,
    Wdro1,
    Wdro2,
    Sbr { aggregation: Aggregation, mode: SbrMode },
}

impl PortfolioMethod {
    pub fn tag(self) -> String {
        match self {
            PortfolioMethod::Saa => "saa".into(),
            PortfolioMethod::Wdro1 => "wdro1".into(),
            PortfolioMethod::Wdro2 => "wdro2".into(),
            PortfolioMethod::Sbr { aggregation, .. } => format!("sbr-{}", aggregation.tag()),
        }
    }
}

/// Frontier of one portfolio method on the full loss `F(w, tau, xi)`.
#[allow(clippy::too_many_arguments)]
pub fn portfolio_frontier(
    params: &PortfolioParams,
    train: &DiscreteMeasure,
    spec: Option<&RegularizerSpec>,
    test: &DiscreteMeasure,
    grid: &[f64],
    alpha: f64,
    method: PortfolioMethod,
    seed: u64,
    opts: &SbrOptions,
) -> Result<Frontier> {
    let saa = portfolio::solve_saa(params, train)?;
    let solver = |eps: f64| -> Result<PortfolioSolution> {
        if eps == 0.0 {
            return Ok(saa.clone());
        }
        match method {
            PortfolioMethod::Saa => Ok(saa.clone()),
            PortfolioMethod::Wdro1 => wdro::solve_portfolio_1wdro(params, train, eps),
            PortfolioMethod::Wdro2 => Ok(wdro::solve_portfolio_2wdro(params, train, eps)?.solution),
            PortfolioMethod::Sbr { aggregation, mode } => {
                let spec = spec
                    .ok_or_else(|| Error::InvalidParams("SBR frontier needs a scenario set".into()))?
                    .clone()
                    .with_aggregation(aggregation);
                portfolio::solve_sbr_with(params, train, &spec, eps, mode, seed, opts)
            }
        }
    };
    let grid: Vec<f64> = if method == PortfolioMethod::Saa { vec![0.0] } else { grid.to_vec() };
    frontier(
        &method.tag(),
        solver,
        |s: &PortfolioSolution, xi: &[f64]| portfolio::loss_unchecked(params, &s.w, s.tau, xi),
        test,
        &grid,
        alpha,
    )
}

/// True when `p` is strictly below and left of `reference`.
pub fn strictly_south_west(p: &FrontierPoint, reference: &FrontierPoint) -> bool {
    p.premium < reference.premium && p.mean < reference.mean
}

/// Problem family of a replication study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Newsvendor,
    Portfolio,
}

/// Change of the selected SBR point relative to SAA.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelPoint {
    pub d_tail: f64,
    pub d_mean: f64,
    /// Selected radius.
    pub eps: f64,
}

/// Summary of a replication study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominanceStats {
    /// Fraction with `d_mean < 0`.
    pub mean_better: f64,
    /// Fraction with `d_mean < 0` and `d_tail < 0`.
    pub south_west: f64,
    /// Least-squares slope of `d_mean` on `d_tail`; `None` when `d_tail`
    /// does not vary.
    pub slope: Option<f64>,
    pub mean_d_mean: f64,
    pub mean_d_tail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationConfig {
    pub n_reps: usize,
    pub n: usize,
    pub m: usize,
    pub grid: Vec<f64>,
    pub test_size: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl ReplicationConfig {
    /// 50 replications, `n = 50`, test size `1e4`.
    pub fn newsvendor(m: usize, seed: u64) -> Self {
        Self {
            n_reps: 50,
            n: 50,
            m,
            grid: crate::measure::epsilon_grid(),
            test_size: 10_000,
            alpha: 0.05,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub points: Vec<RelPoint>,
    pub stats: DominanceStats,
}

/// Shared test set of a replication study.
pub fn replication_test_set(cfg: &ReplicationConfig) -> Result<DiscreteMeasure> {
    gen_newsvendor_demand(cfg.test_size, rng::derive_seed(cfg.seed, "test", 0))
}

/// Training sample of replication `rep`.
pub fn replication_train_set(cfg: &ReplicationConfig, rep: usize) -> Result<DiscreteMeasure> {
    gen_newsvendor_demand(cfg.n, rng::derive_seed(cfg.seed, "train", rep as u64))
}

/// Replications of the newsvendor experiment: fresh training sample,
/// k-medoids scenarios with fitted weights, frontier on a shared test set,
/// and the radius with the lowest out-of-sample mean compared with SAA.
pub fn replication_study(family: Family, cfg: &ReplicationConfig) -> Result<ReplicationResult> {
    if family != Family::Newsvendor {
        return Err(Error::UnsupportedVariant(
            "replications are defined for the synthetic newsvendor only".into(),
        ));
    }
    if cfg.n_reps == 0 {
        return Err(Error::InvalidParams("n_reps must be at least 1".into()));
    }
    if cfg.m > cfg.n {
        return Err(Error::TooManyMedoids { m: cfg.m, n: cfg.n });
    }
    let params = NewsvendorParams::reference();
    let test = replication_test_set(cfg)?;
    let results = par::map_range(cfg.n_reps, |rep| -> Result<RelPoint> {
        let train = replication_train_set(cfg, rep)?;
        let spec = compress(&train, cfg.m, rng::derive_seed(cfg.seed, "kmedoids", rep as u64), Aggregation::Quadratic)?;
        let f = newsvendor_frontier(
            &params,
            &train,
            &spec,
            &test,
            &cfg.grid,
            cfg.alpha,
            NewsvendorMethod::Sbr,
            rng::derive_seed(cfg.seed, "solve", rep as u64),
        )?;
        if let Some(fail) = f.failures.first() {
            return Err(Error::NumericalFailure(format!("eps {}: {}", fail.eps, fail.error)));
        }
        let saa = f.saa().expect("zero radius is always solved").clone();
        let best = f
            .points
            .iter()
            .fold(&saa, |b, p| if p.mean < b.mean { p } else { b });
        Ok(RelPoint {
            d_tail: best.premium - saa.premium,
            d_mean: best.mean - saa.mean,
            eps: best.eps,
        })
    });
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    let stats = dominance_stats(&points);
    Ok(ReplicationResult { points, stats })
}

pub fn dominance_stats(points: &[RelPoint]) -> DominanceStats {
    let n = points.len() as f64;
    let mean_better = points.iter().filter(|p| p.d_mean < 0.0).count() as f64 / n;
    let south_west = points.iter().filter(|p| p.d_mean < 0.0 && p.d_tail < 0.0).count() as f64 / n;
    let mx = points.iter().map(|p| p.d_tail).sum::<f64>() / n;
    let my = points.iter().map(|p| p.d_mean).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.d_tail - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.d_tail - mx) * (p.d_mean - my)).sum();
    DominanceStats {
        mean_better,
        south_west,
        slope: if sxx > 0.0 { Some(sxy / sxx) } else { None },
        mean_d_mean: my,
        mean_d_tail: mx,
    }
}

/// Writes `eps,method,mean,cvar,premium` rows; refuses an empty list.
pub fn write_frontier_csv(points: &[FrontierPoint], path: &Path) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["eps", "method", "mean", "cvar", "premium"]).map_err(csv_err)?;
    for p in points {
        w.write_record([
            p.eps.to_string(),
            p.method.clone(),
            p.mean.to_string(),
            p.cvar.to_string(),
            p.premium.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_frontier_csv(path: &Path) -> Result<Vec<FrontierPoint>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            col: None,
            msg: e.to_string(),
        })?;
        if rec.len() != 5 {
            return Err(Error::Parse {
                line,
                col: None,
                msg: format!("expected 5 fields, found {}", rec.len()),
            });
        }
        let num = |j: usize| -> Result<f64> {
            rec[j].parse().map_err(|_| Error::Parse {
                line,
                col: Some(j + 1),
                msg: format!("not a number: '{}'", &rec[j]),
            })
        };
        out.push(FrontierPoint {
            eps: num(0)?,
            method: rec[1].to_string(),
            mean: num(2)?,
            cvar: num(3)?,
            premium: num(4)?,
        });
    }
    Ok(out)
}

/// Writes `d_tail,d_mean,eps` rows.
pub fn write_relpoints_csv(points: &[RelPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["d_tail", "d_mean", "eps"]).map_err(csv_err)?;
    for p in points {
        w.write_record([p.d_tail.to_string(), p.d_mean.to_string(), p.eps.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
