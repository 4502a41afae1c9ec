use super::{dot, ConvexProblem, ConvexSolution};
use crate::error::{Error, Result};

const MAX_DEPTH: f64 = 0.5;

/// Settings for [`ellipsoid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipsoidOptions {
    pub max_iter: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
}

impl Default for EllipsoidOptions {
    fn default() -> Self {
        Self {
            max_iter: 200_000,
            tol_abs: 1e-10,
            tol_rel: 1e-10,
        }
    }
}

impl EllipsoidOptions {
    fn done(&self, best: f64, lower: f64) -> bool {
        best - lower <= self.tol_abs + self.tol_rel * best.abs()
    }
}

/// Deep-cut ellipsoid method over the half-spaces of `problem`.
///
/// Starts from the axis-aligned ellipsoid with the given center and
/// semi-axes, which must contain the feasible set. Every objective cut
/// yields a lower bound `f(c) - sqrt(g' P g)` valid over the current
/// ellipsoid, so the returned gap certifies the distance to the optimum.
/// The projector of `problem` is not used.
pub fn ellipsoid(
    problem: &ConvexProblem<'_>,
    center: &[f64],
    semi_axes: &[f64],
    opts: EllipsoidOptions,
) -> Result<ConvexSolution> {
    let k = problem.dim;
    if center.len() != k || semi_axes.len() != k {
        return Err(Error::DimMismatch {
            expected: k,
            got: center.len().min(semi_axes.len()),
        });
    }
    if k == 1 {
        return interval_search(problem, center[0], semi_axes[0], opts);
    }
    let kf = k as f64;
    let mut c = center.to_vec();
    // The ellipsoid is {c + B u : |u| <= 1}; keeping the factor B instead of
    // P = B B' avoids the cancellation in g' P g on elongated ellipsoids.
    let mut bm = vec![0.0; k * k];
    for i in 0..k {
        bm[i * k + i] = kf.sqrt() * semi_axes[i];
    }
    let mut best_x: Option<Vec<f64>> = None;
    let mut best_f = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut u = vec![0.0; k];
    let mut v = vec![0.0; k];
    let mut it = 0;
    while it < opts.max_iter {
        it += 1;
        // Feasibility cut on the most violated constraint.
        let mut worst: Option<(usize, f64)> = None;
        for (idx, h) in problem.constraints.iter().enumerate() {
            let e = h.excess(&c);
            if e > 0.0 && worst.map_or(true, |(_, w)| e > w) {
                worst = Some((idx, e));
            }
        }
        let (norm, alpha) = match worst {
            Some((idx, e)) => {
                let n = project(&bm, &problem.constraints[idx].a, &mut u, k);
                if n <= 0.0 {
                    break;
                }
                let alpha = e / n;
                if alpha >= 1.0 {
                    // The ellipsoid misses the half-space entirely.
                    if best_x.is_none() {
                        return Err(Error::Infeasible);
                    }
                    break;
                }
                (n, alpha)
            }
            None => {
                let (f, g) = problem.eval(&c);
                if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NumericalFailure("non-finite objective in ellipsoid".into()));
                }
                if f < best_f {
                    best_f = f;
                    best_x = Some(c.clone());
                }
                if g.iter().all(|&x| x == 0.0) {
                    lower = lower.max(f);
                    break;
                }
                let n = project(&bm, &g, &mut u, k);
                if n <= 0.0 {
                    break;
                }
                lower = lower.max(f - n);
                if opts.done(best_f, lower) {
                    break;
                }
                let alpha = (f - best_f) / n;
                if alpha >= 1.0 {
                    break;
                }
                (n, alpha)
            }
        };
        // Deep cuts close to 1 flatten the ellipsoid to a sliver that rounding
        // can push off the optimum; a shallower cut keeps a superset.
        let alpha = alpha.min(MAX_DEPTH);
        for x in u.iter_mut() {
            *x /= norm;
        }
        for i in 0..k {
            v[i] = dot(&bm[i * k..(i + 1) * k], &u);
        }
        let tau = (1.0 + kf * alpha) / (kf + 1.0);
        for i in 0..k {
            c[i] -= tau * v[i];
        }
        let sigma = 2.0 * (1.0 + kf * alpha) / ((kf + 1.0) * (1.0 + alpha));
        let delta = kf * kf * (1.0 - alpha * alpha) / (kf * kf - 1.0);
        let beta = 1.0 - (1.0 - sigma).max(0.0).sqrt();
        let scale = delta.sqrt();
        for i in 0..k {
            for j in 0..k {
                bm[i * k + j] = scale * (bm[i * k + j] - beta * v[i] * u[j]);
            }
        }
        if bm.iter().any(|x| !x.is_finite() || x.abs() > 1e150) {
            break;
        }
    }
    match best_x {
        Some(x) => {
            let gap = (best_f - lower).max(0.0);
            Ok(ConvexSolution {
                converged: opts.done(best_f, lower),
                x,
                value: best_f,
                gap,
                iterations: it,
            })
        }
        None => Err(Error::Infeasible),
    }
}

/// Writes `B' a` into `out` and returns its norm, `sqrt(a' P a)`.
fn project(bm: &[f64], a: &[f64], out: &mut [f64], k: usize) -> f64 {
    for j in 0..k {
        out[j] = (0..k).map(|i| bm[i * k + j] * a[i]).sum();
    }
    dot(out, out).sqrt()
}

/// One-dimensional variant: the ellipsoid is an interval.
fn interval_search(
    problem: &ConvexProblem<'_>,
    center: f64,
    half: f64,
    opts: EllipsoidOptions,
) -> Result<ConvexSolution> {
    let mut lo = center - half;
    let mut hi = center + half;
    for h in &problem.constraints {
        let a = h.a[0];
        if a > 0.0 {
            hi = hi.min(h.b / a);
        } else if a < 0.0 {
            lo = lo.max(h.b / a);
        } else if h.b < 0.0 {
            return Err(Error::Infeasible);
        }
    }
    if lo > hi {
        return Err(Error::Infeasible);
    }
    let mut best_x = f64::NAN;
    let mut best_f = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut it = 0;
    while it < opts.max_iter {
        it += 1;
        let c = 0.5 * (lo + hi);
        let (f, g) = problem.eval(&[c]);
        if !f.is_finite() || !g[0].is_finite() {
            return Err(Error::NumericalFailure("non-finite objective".into()));
        }
        if f < best_f {
            best_f = f;
            best_x = c;
        }
        let g = g[0];
        lower = lower.max(f - g.abs() * 0.5 * (hi - lo));
        if g == 0.0 || opts.done(best_f, lower) {
            if g == 0.0 {
                lower = lower.max(f);
            }
            break;
        }
        // Keep {x : f(c) + g (x - c) <= best_f}.
        let edge = c + (best_f - f) / g;
        if g > 0.0 {
            hi = hi.min(edge);
        } else {
            lo = lo.max(edge);
        }
        if lo > hi {
            break;
        }
    }
    // Endpoints are cheap to check and settle kinks at the boundary.
    for x in [lo, hi] {
        let (f, _) = problem.eval(&[x]);
        if problem.constraints.iter().all(|h| h.excess(&[x]) <= 1e-12) && f < best_f {
            best_f = f;
            best_x = x;
        }
    }
    Ok(ConvexSolution {
        converged: opts.done(best_f, lower),
        x: vec![best_x],
        value: best_f,
        gap: (best_f - lower).max(0.0),
        iterations: it,
    })
}
