//! Oracle checks shared by the integration tests and the acceptance run.
//! Each check returns a one-line summary on success and the first
//! violation on failure.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::Rng;
use sbr_core::eval::data::load_returns_csv;
use sbr_core::newsvendor::{self, CellOptions, NewsvendorParams};
use sbr_core::portfolio::{self, PortfolioDecision, PortfolioParams, SbrMode};
use sbr_core::rng;
use sbr_core::scenarios::{fit_weights, kmedoids};
use sbr_core::transport::w1_distance;
use sbr_core::wdro::{self, check_equivalence_identity, check_equivalence_identity_on, Order};
use sbr_core::{cvar, Aggregation, DiscreteMeasure, LossSample, RegularizerSpec};

pub type Check = std::result::Result<String, String>;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn fail<T>(msg: String) -> std::result::Result<T, String> {
    Err(msg)
}

fn uniform_box(n: usize, d: usize, lo: f64, hi: f64, seed: u64) -> DiscreteMeasure {
    let mut r = rng::from_seed(seed);
    let pts = (0..n).map(|_| (0..d).map(|_| r.random_range(lo..hi)).collect()).collect();
    DiscreteMeasure::uniform(pts).unwrap()
}

/// `min_t t + E(L - t)_+ / alpha` over a grid holding every sample value,
/// which contains a minimizer of the piecewise-linear function.
fn ru_value(values: &[f64], weights: &[f64], alpha: f64) -> f64 {
    values
        .iter()
        .map(|&t| t + values.iter().zip(weights).map(|(v, w)| w * (v - t).max(0.0)).sum::<f64>() / alpha)
        .fold(f64::INFINITY, f64::min)
}

pub fn cvar_vs_rockafellar_uryasev() -> Check {
    let mut r = rng::from_seed(11);
    let mut worst = 0.0_f64;
    for case in 0..300 {
        let n = r.random_range(1..=50usize);
        let values: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / s).collect();
        let alpha = [0.01, 0.05, 0.1, 0.3, 0.5, 1.0][case % 6];
        let got = cvar(&LossSample::new(values.clone(), Some(weights.clone())).unwrap(), alpha).unwrap();
        let gap = (got - ru_value(&values, &weights, alpha)).abs();
        worst = worst.max(gap);
        if gap > 1e-6 {
            return fail(format!("case {case} (n {n}, alpha {alpha}): gap {gap:.3e}"));
        }
    }
    Ok(format!("300 samples, max gap {worst:.1e}"))
}

/// Smallest W1 over simplex weights with step `1/steps`.
fn simplex_grid_min(sample: &DiscreteMeasure, medoids: &[usize], steps: usize) -> f64 {
    let pts: Vec<Vec<f64>> = medoids.iter().map(|&j| sample.points()[j].clone()).collect();
    let mut best = f64::INFINITY;
    let mut eval = |w: Vec<f64>| {
        let nu = DiscreteMeasure::new(pts.clone(), w).unwrap();
        best = best.min(w1_distance(sample, &nu).unwrap());
    };
    let st = steps as f64;
    match medoids.len() {
        1 => eval(vec![1.0]),
        2 => (0..=steps).for_each(|a| eval(vec![a as f64 / st, 1.0 - a as f64 / st])),
        _ => {
            for a in 0..=steps {
                for b in 0..=steps - a {
                    let c = (steps - a - b) as f64 / st;
                    eval(vec![a as f64 / st, b as f64 / st, c]);
                }
            }
        }
    }
    best
}

pub fn fit_weights_vs_w1_grid() -> Check {
    let mut worst = 0.0_f64;
    for case in 0..40u64 {
        let n = 3 + (case as usize % 10);
        let m = 1 + (case as usize % 3);
        let sample = uniform_box(n, 2, -3.0, 3.0, 500 + case);
        let med = kmedoids(&sample, m, case).unwrap();
        let r = fit_weights(&sample, &med).unwrap();
        let pts = med.iter().map(|&j| sample.points()[j].clone()).collect();
        let fitted = w1_distance(&sample, &DiscreteMeasure::new(pts, r).unwrap()).unwrap();
        // Uniform weights 1/n put the optimum on the grid.
        let grid = simplex_grid_min(&sample, &med, n);
        let gap = (fitted - grid).abs();
        worst = worst.max(gap);
        if gap > 1e-8 {
            return fail(format!("case {case} (n {n}, m {m}): fitted {fitted} vs grid {grid}"));
        }
    }
    Ok(format!("40 instances, max gap {worst:.1e}"))
}

fn two_product() -> NewsvendorParams {
    NewsvendorParams::new(vec![3.0, 2.0], vec![5.0, 4.5], vec![1.0, 0.5], vec![4.5, 4.5], vec![5.0, 5.0]).unwrap()
}

fn newsvendor_grid_min(p: &NewsvendorParams, train: &DiscreteMeasure, spec: &RegularizerSpec, eps: f64, h: f64) -> f64 {
    let steps: Vec<usize> = p.a.iter().map(|a| (a / h).round() as usize).collect();
    let mut best = f64::INFINITY;
    for i in 0..=steps[0] {
        for j in 0..=steps[1] {
            let x = [i as f64 * h, j as f64 * h];
            best = best.min(newsvendor::sbr_objective(p, train, spec, eps, &x).unwrap());
        }
    }
    best
}

pub fn newsvendor_exact_vs_grid() -> Check {
    let p = two_product();
    let h = 0.01;
    // Slope bound of the objective inside a cell, summed over coordinates.
    let slope: f64 = (0..2)
        .map(|k| (p.c[k] - p.g[k]).abs().max((p.c[k] - p.v[k] - p.b[k]).abs()))
        .sum();
    let mut worst = 0.0_f64;
    for case in 0..4u64 {
        let train = uniform_box(12, 2, 0.0, 5.0, 700 + case);
        // Scenarios on a 0.1 lattice keep every cell wider than the grid step.
        let mut r = rng::from_seed(800 + case);
        let m = 1 + case as usize % 3;
        let scen = (0..m)
            .map(|_| (0..2).map(|_| (r.random_range(1.0..4.9) * 10.0_f64).round() / 10.0).collect())
            .collect();
        let spec = RegularizerSpec::uniform(scen, Aggregation::Quadratic).unwrap();
        for eps in [0.0, 0.1, 0.5, 2.0] {
            let ex = newsvendor::solve_exact_cells(&p, &train, &spec, eps, CellOptions::default()).unwrap();
            let g = newsvendor_grid_min(&p, &train, &spec, eps, h);
            if ex.objective > g + 1e-9 {
                return fail(format!("case {case} eps {eps}: exact {} above grid {g}", ex.objective));
            }
            let gap = g - ex.objective;
            worst = worst.max(gap);
            if gap > slope * h + 1e-9 {
                return fail(format!("case {case} eps {eps}: grid {g} exceeds exact {} by more than {}", ex.objective, slope * h));
            }
        }
    }
    Ok(format!("16 solves, max grid excess {worst:.2e} (resolution {:.2e})", slope * h))
}

fn portfolio_grid_min(p: &PortfolioParams, train: &DiscreteMeasure, spec: &RegularizerSpec, eps: f64) -> f64 {
    let (nw, nt) = (400, 800);
    let mut best = f64::INFINITY;
    for i in 0..=nw {
        let w1 = i as f64 / nw as f64;
        for j in 0..=nt {
            let tau = -0.2 + 0.4 * j as f64 / nt as f64;
            let d = PortfolioDecision::new(vec![w1, 1.0 - w1], tau);
            best = best.min(portfolio::sbr_objective(p, train, spec, eps, &d).unwrap());
        }
    }
    best
}

pub fn portfolio_exact_vs_grid() -> Check {
    let p = PortfolioParams::new(2.0, 0.2, 0.5, portfolio::DEFAULT_DELTA).unwrap();
    let mut worst = 0.0_f64;
    for m in 1..=3usize {
        let train = uniform_box(10, 2, -0.1, 0.1, 900 + m as u64);
        let sc = uniform_box(m, 2, -0.1, 0.1, 950 + m as u64);
        for agg in [Aggregation::Quadratic, Aggregation::Linear] {
            let spec = RegularizerSpec::uniform(sc.points().to_vec(), agg).unwrap();
            for eps in [0.0, 0.01, 0.05] {
                let s = portfolio::solve_sbr(&p, &train, &spec, eps, SbrMode::ExactEnum, 0).unwrap();
                let g = portfolio_grid_min(&p, &train, &spec, eps);
                if s.objective > g + 1e-9 {
                    return fail(format!("m {m} eps {eps}: exact {} above grid {g}", s.objective));
                }
                let gap = g - s.objective;
                worst = worst.max(gap);
                if gap > 1e-3 {
                    return fail(format!("m {m} eps {eps}: grid {g} vs exact {}", s.objective));
                }
            }
        }
    }
    Ok(format!("18 solves, max grid excess {worst:.2e}"))
}

pub fn newsvendor_compact_vs_original() -> Check {
    let p = NewsvendorParams::reference();
    let mut r = rng::from_seed(21);
    let mut worst = 0.0_f64;
    for i in 0..10_000 {
        let x: Vec<f64> = p.a.iter().map(|&a| r.random_range(0.0..=a)).collect();
        let xi: Vec<f64> = (0..p.dim()).map(|_| r.random_range(0.0..60.0)).collect();
        let a = newsvendor::loss(&p, &x, &xi).unwrap();
        let b = newsvendor::loss_original(&p, &x, &xi);
        let gap = (a - b).abs();
        worst = worst.max(gap);
        if gap > 1e-9 {
            return fail(format!("pair {i}: {a} vs {b}"));
        }
    }
    Ok(format!("1e4 pairs, max gap {worst:.1e}"))
}

fn random_decision(r: &mut rng::Rng, d: usize, c: f64) -> PortfolioDecision {
    let raw: Vec<f64> = (0..d).map(|_| r.random_range(0.0..1.0)).collect();
    let s: f64 = raw.iter().sum();
    PortfolioDecision::new(raw.iter().map(|v| v / s).collect(), r.random_range(-c..c))
}

pub fn portfolio_max_affine_vs_direct() -> Check {
    let p = PortfolioParams::new(10.0, 0.05, 0.5, portfolio::DEFAULT_DELTA).unwrap();
    let mut r = rng::from_seed(22);
    let mut worst = 0.0_f64;
    for i in 0..10_000 {
        let dec = random_decision(&mut r, 4, 0.5);
        let xi: Vec<f64> = (0..4).map(|_| r.random_range(-0.2..0.2)).collect();
        let a = portfolio::loss(&p, &dec, &xi).unwrap();
        let b = portfolio::loss_max_affine(&p, &dec, &xi).unwrap();
        let gap = (a - b).abs();
        worst = worst.max(gap);
        if gap > 1e-10 {
            return fail(format!("pair {i}: {a} vs {b}"));
        }
    }
    Ok(format!("1e4 pairs, max gap {worst:.1e}"))
}

pub fn wdro1_newsvendor_is_saa() -> Check {
    let p = NewsvendorParams::reference();
    for seed in 0..5u64 {
        let train = sbr_core::eval::generate::gen_newsvendor_demand(50, seed).unwrap();
        let saa = newsvendor::solve_saa(&p, &train).unwrap();
        for eps in [0.01, 0.3, 1.0, 10.0, 1e3] {
            let w = wdro::solve_newsvendor_1wdro(&p, &train, eps).unwrap();
            if w.x != saa.x {
                return fail(format!("seed {seed} eps {eps}: {:?} vs {:?}", w.x, saa.x));
            }
        }
    }
    Ok("5 samples x 5 radii, identical decisions".into())
}

pub fn equivalence_identity() -> Check {
    let mut r = rng::from_seed(23);
    let (mut worst, mut coarse_sum, mut fine_sum) = (0.0_f64, 0.0, 0.0);
    let mut cases = 0;
    for case in 0..12 {
        let n = 5 + case * 3;
        let values: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let lip = r.random_range(0.5..3.0);
        let eps = [0.05, 0.2, 1.0][case % 3];
        for order in [Order::One, Order::Two] {
            let coarse = check_equivalence_identity(&values, lip, eps, order).map_err(|e| format!("case {case}: {e}"))?;
            let fine = check_equivalence_identity_on(&values, lip, eps, order, 4).map_err(|e| format!("case {case}: {e}"))?;
            worst = worst.max(coarse.gap);
            if coarse.gap > 2e-3 {
                return fail(format!("case {case} {order:?}: gap {:.3e}", coarse.gap));
            }
            // Single cases may move by grid noise once both gaps are tiny.
            if fine.gap > coarse.gap + 1e-6 {
                return fail(format!("case {case} {order:?}: refined gap {:.3e} above {:.3e}", fine.gap, coarse.gap));
            }
            coarse_sum += coarse.gap;
            fine_sum += fine.gap;
            cases += 1;
        }
    }
    if fine_sum >= coarse_sum {
        return fail(format!("refinement did not reduce the total gap ({fine_sum:.3e} vs {coarse_sum:.3e})"));
    }
    Ok(format!("{cases} cases, max gap {worst:.1e}, total gap {coarse_sum:.1e} -> {fine_sum:.1e} under 4x refinement"))
}

fn central_gradient(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    (0..at.len())
        .map(|k| {
            let mut up = at.to_vec();
            let mut dn = at.to_vec();
            up[k] += h;
            dn[k] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn newsvendor_subgradient_fd() -> Check {
    let p = NewsvendorParams::reference();
    let mut r = rng::from_seed(31);
    let mut worst = 0.0_f64;
    let mut done = 0;
    while done < 2000 {
        let x: Vec<f64> = p.a.iter().map(|&a| r.random_range(0.0..=a)).collect();
        let zeta: Vec<f64> = (0..p.dim()).map(|_| r.random_range(0.0..60.0)).collect();
        if x.iter().zip(&zeta).any(|(a, b)| (a - b).abs() < 1e-3) {
            continue;
        }
        let g = newsvendor::worst_subgradient_xi(&p, &x, &zeta).unwrap();
        let fd = central_gradient(|xi| newsvendor::loss(&p, &x, xi).unwrap(), &zeta, 1e-6);
        let e = max_diff(&g, &fd);
        worst = worst.max(e);
        if e > 1e-4 {
            return fail(format!("x {x:?} zeta {zeta:?}: {g:?} vs {fd:?}"));
        }
        done += 1;
    }
    Ok(format!("2000 points, max error {worst:.1e}"))
}

pub fn portfolio_subgradient_fd() -> Check {
    let p = PortfolioParams::new(10.0, 0.05, 0.5, portfolio::DEFAULT_DELTA).unwrap();
    let mut r = rng::from_seed(32);
    let mut worst = 0.0_f64;
    let mut done = 0;
    while done < 2000 {
        let dec = random_decision(&mut r, 4, 0.1);
        let zeta: Vec<f64> = (0..4).map(|_| r.random_range(-0.2..0.2)).collect();
        let s: f64 = dec.w.iter().zip(&zeta).map(|(a, b)| a * b).sum();
        if (-s - dec.tau).abs() < 1e-3 {
            continue;
        }
        let f = portfolio::grad_norm_factor(&p, &dec, &zeta);
        let g: Vec<f64> = dec.w.iter().map(|w| -w * f).collect();
        let fd = central_gradient(|xi| portfolio::loss(&p, &dec, xi).unwrap(), &zeta, 1e-7);
        let e = max_diff(&g, &fd);
        worst = worst.max(e);
        if e > 1e-4 {
            return fail(format!("w {:?} tau {} zeta {zeta:?}: {g:?} vs {fd:?}", dec.w, dec.tau));
        }
        done += 1;
    }
    Ok(format!("2000 points, max error {worst:.1e}"))
}

/// Training year, test year and adverse scenarios of the bundled market.
pub struct MarketCase {
    pub train: DiscreteMeasure,
    pub test: DiscreteMeasure,
    pub spec: RegularizerSpec,
    pub params: PortfolioParams,
}

pub fn market_case(threshold: f64) -> MarketCase {
    let f = fixtures();
    let adverse = load_returns_csv(&f.join("returns_2020.csv")).unwrap();
    let index = load_returns_csv(&f.join("index_2020.csv")).unwrap();
    let train = load_returns_csv(&f.join("returns_2021.csv")).unwrap().to_measure().unwrap();
    let test = load_returns_csv(&f.join("returns_2022.csv")).unwrap().to_measure().unwrap();
    let spec = sbr_core::scenarios::adverse_from_threshold(&index.column().unwrap(), &adverse.matrix, threshold, Aggregation::Quadratic)
        .unwrap();
    let params = PortfolioParams::with_default_bound(10.0, 0.05, &train, Some(&spec)).unwrap();
    MarketCase { train, test, spec, params }
}
