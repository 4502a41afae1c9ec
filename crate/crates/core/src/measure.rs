//! Discrete probability measures and empirical risk functionals.

use crate::error::{Error, Result};

/// Weights below this are treated as empty atoms.
pub const ZERO_WEIGHT: f64 = 1e-15;

const SUM_TOL: f64 = 1e-12;

/// Weighted point cloud in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if points.len() != weights.len() {
            return Err(Error::DimMismatch {
                expected: points.len(),
                got: weights.len(),
            });
        }
        let d = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(Error::DimMismatch {
                expected: d,
                got: p.len(),
            });
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite coordinate".into()));
        }
        check_weights(&weights)?;
        Ok(Self { points, weights })
    }

    /// Empirical measure with weight 1/n on each point.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Weighted mean of `f` over the atoms.
    pub fn expect<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    /// Largest absolute coordinate over all atoms.
    pub fn max_abs(&self) -> f64 {
        self.points
            .iter()
            .flatten()
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidMeasure("negative or non-finite weight".into()));
    }
    let s = compensated_sum(weights);
    if (s - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidMeasure(format!("weights sum to {s}")));
    }
    Ok(())
}

/// Neumaier summation; plain summation of `n` copies of `1/n` drifts past
/// the weight tolerance for large `n`.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for &x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

/// Scalar outcomes with optional weights (uniform when absent).
#[derive(Debug, Clone, PartialEq)]
pub struct LossSample {
    values: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl LossSample {
    pub fn new(values: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite loss value".into()));
        }
        if let Some(w) = &weights {
            if w.len() != values.len() {
                return Err(Error::DimMismatch {
                    expected: values.len(),
                    got: w.len(),
                });
            }
            if !values.is_empty() {
                check_weights(w)?;
            }
        }
        Ok(Self { values, weights })
    }

    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        Self::new(values, None)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.values.len() as f64,
        }
    }
}

pub fn weighted_mean(sample: &LossSample) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(match &sample.weights {
        Some(w) => sample.values.iter().zip(w).map(|(v, w)| v * w).sum(),
        None => sample.values.iter().sum::<f64>() / sample.len() as f64,
    })
}

/// Conditional value-at-risk of the upper `alpha` tail.
///
/// Sorts the atoms in decreasing order and averages the first `alpha` mass,
/// splitting the atom that straddles the quantile.
pub fn cvar(sample: &LossSample, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    if sample.is_empty() {
        return Err(Error::EmptyInput);
    }
    if alpha == 1.0 {
        return weighted_mean(sample);
    }
    let first = sample.values[0];
    if sample.values.iter().all(|&v| v == first) {
        return Ok(first);
    }
    let mut idx: Vec<usize> = (0..sample.len()).collect();
    idx.sort_by(|&i, &j| sample.values[j].total_cmp(&sample.values[i]));
    let mut mass = 0.0;
    let mut acc = 0.0;
    for &i in &idx {
        let w = sample.weight(i);
        if w < ZERO_WEIGHT {
            continue;
        }
        let take = w.min(alpha - mass);
        acc += take * sample.values[i];
        mass += take;
        if mass >= alpha {
            break;
        }
    }
    // Rounding can leave the accumulated mass a hair short of alpha; the
    // remainder sits on the smallest value reached.
    if mass < alpha {
        let last = idx
            .iter()
            .rev()
            .find(|&&i| sample.weight(i) >= ZERO_WEIGHT)
            .map(|&i| sample.values[i])
            .unwrap_or(0.0);
        acc += (alpha - mass) * last;
    }
    Ok(acc / alpha)
}

/// Value-at-risk: the smallest `t` with `P(loss > t) <= alpha`.
pub fn var(sample: &LossSample, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    if sample.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut idx: Vec<usize> = (0..sample.len()).collect();
    idx.sort_by(|&i, &j| sample.values[j].total_cmp(&sample.values[i]));
    let mut mass = 0.0;
    for &i in &idx {
        mass += sample.weight(i);
        if mass > alpha + 1e-12 {
            return Ok(sample.values[i]);
        }
    }
    Ok(sample.values[*idx.last().unwrap()])
}

/// The logarithmic grid `{i * 10^j : i = 1..9, j = -3..0}` in ascending order.
pub fn epsilon_grid() -> Vec<f64> {
    let mut out = Vec::with_capacity(36);
    for j in -3..=0 {
        for i in 1..=9 {
            // Parsing the decimal literal gives the nearest double, which
            // `i as f64 * 10f64.powi(j)` does not always do.
            out.push(format!("{i}e{j}").parse::<f64>().unwrap());
        }
    }
    out
}
