//! Synthetic data: correlated lognormal newsvendor demand and a
//! heavy-tailed daily return panel with injected crisis days.

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, StudentT};

use super::data::Returns;
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::rng;

pub const DEMAND_MEANS: [f64; 5] = [8.0, 12.0, 16.0, 20.0, 24.0];
pub const DEMAND_CV: [f64; 5] = [0.4, 0.5, 0.5, 0.6, 0.4];
pub const DEMAND_CORRELATION: f64 = 0.3;

/// `n` demand vectors: lognormal marginals with the reference means and
/// coefficients of variation, coupled by a one-factor Gaussian copula with
/// common correlation 0.3.
pub fn gen_newsvendor_demand(n: usize, seed: u64) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let params: Vec<(f64, f64)> = DEMAND_MEANS
        .iter()
        .zip(DEMAND_CV)
        .map(|(&m, cv)| {
            let s2 = (1.0 + cv * cv).ln();
            (m.ln() - 0.5 * s2, s2.sqrt())
        })
        .collect();
    let (a, b) = (DEMAND_CORRELATION.sqrt(), (1.0 - DEMAND_CORRELATION).sqrt());
    let mut r = rng::substream(seed, "newsvendor-demand", 0);
    let rows = (0..n)
        .map(|_| {
            let common: f64 = StandardNormal.sample(&mut r);
            params
                .iter()
                .map(|&(mu, sigma)| {
                    let own: f64 = StandardNormal.sample(&mut r);
                    (mu + sigma * (a * common + b * own)).exp()
                })
                .collect()
        })
        .collect();
    DiscreteMeasure::uniform(rows)
}

/// Settings of the synthetic market.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketConfig {
    pub days: usize,
    pub assets: usize,
    /// Index days below -2%, -3.5% and -5% (nested counts).
    pub crisis_counts: [usize; 3],
    pub start_date: (i32, u32, u32),
    pub seed: u64,
}

impl MarketConfig {
    /// A stressed year of 23 assets with 26/11/5 index days below
    /// -2%/-3.5%/-5%, used to pick adverse scenarios.
    pub fn adverse(seed: u64) -> Self {
        Self {
            days: 252,
            assets: 23,
            crisis_counts: [26, 11, 5],
            start_date: (2020, 1, 2),
            seed,
        }
    }

    /// A calm year with no index day below -2%.
    pub fn training(seed: u64) -> Self {
        Self {
            days: 252,
            assets: 23,
            crisis_counts: [0, 0, 0],
            start_date: (2021, 1, 4),
            seed,
        }
    }

    /// A second stressed year for out-of-sample evaluation.
    pub fn testing(seed: u64) -> Self {
        Self {
            days: 252,
            assets: 23,
            crisis_counts: [30, 12, 5],
            start_date: (2022, 1, 3),
            seed,
        }
    }
}

/// Index drops used to place crisis days.
pub const CRISIS_THRESHOLDS: [f64; 3] = [-0.02, -0.035, -0.05];

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Asset panel and market index. Asset `k` has beta rising from 0.2 to 1.8
/// with `k`, Student-t(3) idiosyncratic noise, and a crisis beta that is
/// half again as large for assets with beta above one. Values are rounded
/// to six decimals so a written file reads back exactly.
pub fn gen_market(cfg: &MarketConfig) -> Result<(Returns, Returns)> {
    let [c2, c35, c5] = cfg.crisis_counts;
    if cfg.days == 0 || cfg.assets == 0 {
        return Err(Error::EmptyInput);
    }
    if !(c2 >= c35 && c35 >= c5 && c2 <= cfg.days) {
        return Err(Error::InvalidParams("crisis counts must be nested and fit the horizon".into()));
    }
    let mut r = rng::substream(cfg.seed, "market", 0);
    let crisis = sample_indices(&mut r, cfg.days, c2).into_vec();
    let mut index = vec![0.0; cfg.days];
    let mut is_crisis = vec![false; cfg.days];
    for (rank, &day) in crisis.iter().enumerate() {
        let (lo, hi) = if rank < c5 {
            (-0.09, -0.0502)
        } else if rank < c35 {
            (-0.0498, -0.0352)
        } else {
            (-0.0348, -0.0202)
        };
        index[day] = round6(r.random_range(lo..hi));
        is_crisis[day] = true;
    }
    for day in 0..cfg.days {
        if !is_crisis[day] {
            loop {
                let z: f64 = StandardNormal.sample(&mut r);
                let v = round6(0.0006 + 0.008 * z);
                if v > -0.0195 {
                    index[day] = v;
                    break;
                }
            }
        }
    }
    let t3 = StudentT::new(3.0).map_err(|e| Error::NumericalFailure(e.to_string()))?;
    let t_scale = (1.0f64 / 3.0).sqrt();
    let k = cfg.assets;
    let betas: Vec<f64> = (0..k)
        .map(|i| if k == 1 { 1.0 } else { 0.2 + 1.6 * i as f64 / (k - 1) as f64 })
        .collect();
    let matrix: Vec<Vec<f64>> = (0..cfg.days)
        .map(|day| {
            betas
                .iter()
                .enumerate()
                .map(|(i, &beta)| {
                    let vol = 0.006 + 0.014 * (i % 5) as f64 / 4.0;
                    let drift = 0.0001 + 0.0005 * beta;
                    let noise: f64 = t3.sample(&mut r) * t_scale * vol;
                    let b = if is_crisis[day] && beta > 1.0 { 1.5 * beta } else { beta };
                    round6((drift + b * index[day] + noise).clamp(-0.5, 0.5))
                })
                .collect()
        })
        .collect();
    let dates = business_days(cfg.start_date, cfg.days);
    let tickers = (0..k).map(|i| format!("A{i:02}")).collect();
    Ok((
        Returns {
            dates: dates.clone(),
            matrix,
            tickers,
        },
        Returns {
            dates,
            matrix: index.into_iter().map(|v| vec![v]).collect(),
            tickers: vec!["INDEX".into()],
        },
    ))
}

/// Days since 1970-01-01 of a proleptic Gregorian date.
fn days_from_civil(y: i32, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y - 1 } else { y } as i64;
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (m as i64 + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    let y = yoe + era * 400 + if m <= 2 { 1 } else { 0 };
    (y, m, d)
}

/// `count` weekdays starting at `start` (inclusive when a weekday).
pub fn business_days(start: (i32, u32, u32), count: usize) -> Vec<String> {
    let mut day = days_from_civil(start.0, start.1, start.2);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        // 1970-01-01 was a Thursday.
        let weekday = (day + 3).rem_euclid(7);
        if weekday < 5 {
            let (y, m, d) = civil_from_days(day);
            out.push(format!("{y:04}-{m:02}-{d:02}"));
        }
        day += 1;
    }
    out
}
