//! Exact 1-Wasserstein distance between discrete measures.
//!
//! The transportation LP is solved by successive shortest augmenting paths
//! with Johnson potentials on the dense bipartite residual graph. Each
//! augmentation saturates a supply, a demand or a reverse arc, so the
//! method terminates at an optimal vertex without any regularization.

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, ZERO_WEIGHT};

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Optimal coupling cost with Euclidean ground cost.
pub fn w1_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    let cost: Vec<Vec<f64>> = mu
        .points()
        .iter()
        .map(|p| nu.points().iter().map(|q| euclid(p, q)).collect())
        .collect();
    Ok(transport_cost(&cost, mu.weights(), nu.weights()))
}

/// Minimum cost of moving `supply` onto `demand` under `cost` (rows x cols).
///
/// Both vectors are assumed to carry the same total mass.
pub fn transport_cost(cost: &[Vec<f64>], supply: &[f64], demand: &[f64]) -> f64 {
    let plan = transport_plan(cost, supply, demand);
    plan.iter()
        .zip(cost)
        .map(|(row, c)| row.iter().zip(c).map(|(f, c)| f * c).sum::<f64>())
        .sum()
}

/// Optimal flow matrix for the transportation problem.
pub fn transport_plan(cost: &[Vec<f64>], supply: &[f64], demand: &[f64]) -> Vec<Vec<f64>> {
    let n = supply.len();
    let m = demand.len();
    let mut flow = vec![vec![0.0; m]; n];
    let mut sup: Vec<f64> = supply
        .iter()
        .map(|&s| if s < ZERO_WEIGHT { 0.0 } else { s })
        .collect();
    let mut dem: Vec<f64> = demand
        .iter()
        .map(|&s| if s < ZERO_WEIGHT { 0.0 } else { s })
        .collect();

    // Node layout: 0..n sources, n..n+m sinks. The super source and sink are
    // implicit: sources with remaining supply start at distance 0 (plus
    // potential), sinks with remaining demand terminate a path.
    let nodes = n + m;
    let mut pot = vec![0.0; nodes];
    let mut dist = vec![0.0; nodes];
    let mut prev = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];

    loop {
        let remaining: f64 = sup.iter().sum();
        if remaining <= ZERO_WEIGHT || dem.iter().all(|&d| d <= 0.0) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        for i in 0..n {
            if sup[i] > 0.0 {
                dist[i] = 0.0;
            }
        }
        // Dense Dijkstra on reduced costs.
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < n {
                for j in 0..m {
                    let v = n + j;
                    let rc = (cost[u][j] + pot[u] - pot[v]).max(0.0);
                    if dist[u] + rc < dist[v] {
                        dist[v] = dist[u] + rc;
                        prev[v] = u;
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if flow[i][j] > 0.0 {
                        let rc = (-cost[i][j] + pot[u] - pot[i]).max(0.0);
                        if dist[u] + rc < dist[i] {
                            dist[i] = dist[u] + rc;
                            prev[i] = u;
                        }
                    }
                }
            }
        }
        // Closest sink with remaining demand.
        let mut sink = usize::MAX;
        let mut best = f64::INFINITY;
        for j in 0..m {
            if dem[j] > 0.0 && dist[n + j] < best {
                best = dist[n + j];
                sink = n + j;
            }
        }
        if sink == usize::MAX {
            break;
        }
        for v in 0..nodes {
            pot[v] += dist[v].min(best);
        }
        // Bottleneck along the path.
        let mut bottleneck = dem[sink - n];
        let mut v = sink;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                bottleneck = bottleneck.min(flow[v][u - n]);
            }
            v = u;
        }
        let source = v;
        bottleneck = bottleneck.min(sup[source]);
        let mut v = sink;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < n {
                flow[u][v - n] += bottleneck;
            } else {
                let f = &mut flow[v][u - n];
                *f -= bottleneck;
                if *f < ZERO_WEIGHT {
                    *f = 0.0;
                }
            }
            v = u;
        }
        sup[source] -= bottleneck;
        if sup[source] < ZERO_WEIGHT {
            sup[source] = 0.0;
        }
        dem[sink - n] -= bottleneck;
        if dem[sink - n] < ZERO_WEIGHT {
            dem[sink - n] = 0.0;
        }
    }
    flow
}
