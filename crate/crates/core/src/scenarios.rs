//! Regularization scenario sets: data compression by k-medoids with
//! Wasserstein-optimal weights, and adverse-day extraction by index threshold.

use std::path::Path;

use rand::seq::index::sample as sample_indices;

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::par;
use crate::rng;
use crate::transport::euclid;

/// How per-scenario gradient norms are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregation {
    /// `(sum_j r_j f_j^2)^(1/2)`
    Quadratic,
    /// `sum_j r_j f_j`
    Linear,
}

impl Aggregation {
    pub fn tag(self) -> &'static str {
        match self {
            Aggregation::Quadratic => "quadratic",
            Aggregation::Linear => "linear",
        }
    }

    /// Combines per-scenario norms with weights `r`.
    pub fn combine(self, r: &[f64], norms: impl Iterator<Item = f64>) -> f64 {
        match self {
            Aggregation::Quadratic => r
                .iter()
                .zip(norms)
                .map(|(r, f)| r * f * f)
                .sum::<f64>()
                .sqrt(),
            Aggregation::Linear => r.iter().zip(norms).map(|(r, f)| r * f).sum(),
        }
    }
}

impl std::str::FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(Aggregation::Quadratic),
            "linear" => Ok(Aggregation::Linear),
            _ => Err(Error::InvalidParams(format!("unknown aggregation '{s}'"))),
        }
    }
}

/// Scenario set `{zeta_j}` with weights `{r_j}` and aggregation rule.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerSpec {
    scenarios: Vec<Vec<f64>>,
    weights: Vec<f64>,
    aggregation: Aggregation,
}

impl RegularizerSpec {
    pub fn new(scenarios: Vec<Vec<f64>>, weights: Vec<f64>, aggregation: Aggregation) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::BadM);
        }
        // Reuse the measure checks for weights and ragged rows.
        DiscreteMeasure::new(scenarios.clone(), weights.clone())?;
        Ok(Self {
            scenarios,
            weights,
            aggregation,
        })
    }

    pub fn uniform(scenarios: Vec<Vec<f64>>, aggregation: Aggregation) -> Result<Self> {
        let m = scenarios.len();
        if m == 0 {
            return Err(Error::BadM);
        }
        Self::new(scenarios, vec![1.0 / m as f64; m], aggregation)
    }

    pub fn scenarios(&self) -> &[Vec<f64>] {
        &self.scenarios
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation
    }

    pub fn with_aggregation(mut self, aggregation: Aggregation) -> Self {
        self.aggregation = aggregation;
        self
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.scenarios[0].len()
    }

    pub fn max_abs(&self) -> f64 {
        self.scenarios
            .iter()
            .flatten()
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Writes one row per scenario with a trailing `weight` column.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header: Vec<String> = (0..self.dim()).map(|k| format!("x{k}")).collect();
        header.push("weight".into());
        w.write_record(&header).map_err(csv_err)?;
        for (z, r) in self.scenarios.iter().zip(&self.weights) {
            let row: Vec<String> = z.iter().chain(std::iter::once(r)).map(|v| v.to_string()).collect();
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a scenario CSV with a header row. A last column named `weight`
    /// supplies `r_j`; otherwise weights are uniform.
    pub fn read_csv(path: &Path, aggregation: Aggregation) -> Result<Self> {
        let (header, rows) = crate::eval::data::read_numeric_csv(path, true)?;
        let header = header.unwrap_or_default();
        let weighted = header.last().map(|h| h.trim() == "weight").unwrap_or(false);
        if rows.is_empty() {
            return Err(Error::BadM);
        }
        if weighted {
            let mut scen = Vec::with_capacity(rows.len());
            let mut wts = Vec::with_capacity(rows.len());
            for mut r in rows {
                wts.push(r.pop().unwrap());
                scen.push(r);
            }
            let s: f64 = wts.iter().sum();
            // Accept weights written with limited precision.
            if (s - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidMeasure(format!("scenario weights sum to {s}")));
            }
            let wts = wts.iter().map(|w| w / s).collect();
            Self::new(scen, wts, aggregation)
        } else {
            Self::uniform(rows, aggregation)
        }
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Above this many points the SWAP candidates are drawn from a seeded subsample.
const FULL_PAM_LIMIT: usize = 2000;
const SWAP_CANDIDATES: usize = 400;

fn distance_matrix(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    par::map_slice(points, |p| points.iter().map(|q| euclid(p, q)).collect())
}

/// Weighted k-medoids objective for a medoid set.
pub fn kmedoids_cost(sample: &DiscreteMeasure, medoids: &[usize]) -> f64 {
    let pts = sample.points();
    pts.iter()
        .zip(sample.weights())
        .map(|(p, w)| {
            w * medoids
                .iter()
                .map(|&j| euclid(p, &pts[j]))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// PAM clustering: greedy BUILD then best-improvement SWAP until no single
/// exchange lowers the weighted total distance. Ties go to the lowest index.
pub fn kmedoids(sample: &DiscreteMeasure, m: usize, seed: u64) -> Result<Vec<usize>> {
    let n = sample.len();
    if m == 0 {
        return Err(Error::BadM);
    }
    if m > n {
        return Err(Error::TooManyMedoids { m, n });
    }
    if m == n {
        return Ok((0..n).collect());
    }
    let dist = distance_matrix(sample.points());
    let w = sample.weights();

    let candidates: Vec<usize> = if n > FULL_PAM_LIMIT {
        let mut r = rng::substream(seed, "kmedoids", 0);
        let mut c = sample_indices(&mut r, n, SWAP_CANDIDATES).into_vec();
        c.sort_unstable();
        c
    } else {
        (0..n).collect()
    };

    // BUILD
    let mut medoids: Vec<usize> = Vec::with_capacity(m);
    let mut near = vec![f64::INFINITY; n];
    for _ in 0..m {
        let gains = par::map_slice(&candidates, |&c| {
            if medoids.contains(&c) {
                return f64::NEG_INFINITY;
            }
            (0..n)
                .map(|i| {
                    let cur = if near[i].is_finite() { near[i] } else { 0.0 };
                    if near[i].is_finite() {
                        w[i] * (cur - dist[i][c]).max(0.0)
                    } else {
                        -w[i] * dist[i][c]
                    }
                })
                .sum::<f64>()
        });
        let mut best = usize::MAX;
        let mut best_gain = f64::NEG_INFINITY;
        for (k, &g) in gains.iter().enumerate() {
            if g > best_gain {
                best_gain = g;
                best = candidates[k];
            }
        }
        medoids.push(best);
        for i in 0..n {
            near[i] = near[i].min(dist[i][best]);
        }
    }

    // SWAP
    let mut cost: f64 = (0..n).map(|i| w[i] * near[i]).sum();
    loop {
        // Nearest and second-nearest medoid distances per point.
        let mut d1 = vec![f64::INFINITY; n];
        let mut d2 = vec![f64::INFINITY; n];
        let mut nearest = vec![0usize; n];
        for i in 0..n {
            for (h, &j) in medoids.iter().enumerate() {
                let d = dist[i][j];
                if d < d1[i] {
                    d2[i] = d1[i];
                    d1[i] = d;
                    nearest[i] = h;
                } else if d < d2[i] {
                    d2[i] = d;
                }
            }
        }
        let pairs: Vec<(usize, usize)> = (0..m)
            .flat_map(|h| candidates.iter().map(move |&c| (h, c)))
            .filter(|&(_, c)| !medoids.contains(&c))
            .collect();
        let deltas = par::map_slice(&pairs, |&(h, c)| {
            (0..n)
                .map(|i| {
                    let keep = if nearest[i] == h { d2[i] } else { d1[i] };
                    w[i] * (keep.min(dist[i][c]) - d1[i])
                })
                .sum::<f64>()
        });
        let mut best = None;
        let mut best_delta = -1e-12 * cost.max(1e-300);
        for (k, &dlt) in deltas.iter().enumerate() {
            if dlt < best_delta {
                best_delta = dlt;
                best = Some(pairs[k]);
            }
        }
        match best {
            Some((h, c)) => {
                medoids[h] = c;
                cost += best_delta;
            }
            None => break,
        }
    }
    Ok(medoids)
}

/// Index (into `medoids`) of the nearest medoid, lowest index on ties.
fn nearest_medoid(p: &[f64], pts: &[Vec<f64>], medoids: &[usize]) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (h, &j) in medoids.iter().enumerate() {
        let d = euclid(p, &pts[j]);
        if d < bd {
            bd = d;
            best = h;
        }
    }
    best
}

/// W1-optimal weights on the medoids: each medoid receives the sample mass
/// of the points for which it is the nearest medoid.
pub fn fit_weights(sample: &DiscreteMeasure, medoid_indices: &[usize]) -> Result<Vec<f64>> {
    if medoid_indices.is_empty() {
        return Err(Error::BadM);
    }
    if let Some(&bad) = medoid_indices.iter().find(|&&j| j >= sample.len()) {
        return Err(Error::InvalidParams(format!("medoid index {bad} out of range")));
    }
    let pts = sample.points();
    let mut r = vec![0.0; medoid_indices.len()];
    for (p, w) in pts.iter().zip(sample.weights()) {
        r[nearest_medoid(p, pts, medoid_indices)] += w;
    }
    let s: f64 = r.iter().sum();
    Ok(r.iter().map(|x| x / s).collect())
}

/// k-medoids followed by weight fitting.
pub fn compress(
    sample: &DiscreteMeasure,
    m: usize,
    seed: u64,
    aggregation: Aggregation,
) -> Result<RegularizerSpec> {
    let med = kmedoids(sample, m, seed)?;
    let r = fit_weights(sample, &med)?;
    let scen = med.iter().map(|&j| sample.points()[j].clone()).collect();
    RegularizerSpec::new(scen, r, aggregation)
}

/// Asset-return rows on days where the index return is strictly below
/// `threshold`, with uniform weights.
pub fn adverse_from_threshold(
    index_returns: &[f64],
    asset_returns: &[Vec<f64>],
    threshold: f64,
    aggregation: Aggregation,
) -> Result<RegularizerSpec> {
    if index_returns.len() != asset_returns.len() {
        return Err(Error::DimMismatch {
            expected: asset_returns.len(),
            got: index_returns.len(),
        });
    }
    let scen: Vec<Vec<f64>> = index_returns
        .iter()
        .zip(asset_returns)
        .filter(|(r, _)| **r < threshold)
        .map(|(_, row)| row.clone())
        .collect();
    if scen.is_empty() {
        return Err(Error::EmptyScenarioSet(threshold));
    }
    RegularizerSpec::uniform(scen, aggregation)
}
