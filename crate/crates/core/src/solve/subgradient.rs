use super::{norm2, ConvexProblem, ConvexSolution};
use crate::error::{Error, Result};

/// Step size schedule for [`projected_subgradient`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `c / sqrt(t)`.
    InvSqrt(f64),
    /// `c / sqrt(t)` with `c` set from the first subgradient norm so the
    /// first step has length `scale`.
    Calibrated { scale: f64 },
}

/// Projected subgradient descent with diminishing steps and best-iterate
/// memory. Half-space constraints are not enforced here; pass them as
/// penalties or fold them into the projector.
///
/// The returned gap is a heuristic: the best value minus the best value
/// seen in the first half of the run.
pub fn projected_subgradient(
    problem: &ConvexProblem<'_>,
    x0: &[f64],
    max_iter: usize,
    step_rule: StepRule,
) -> Result<ConvexSolution> {
    let project = |x: &[f64]| match &problem.projector {
        Some(p) => p(x),
        None => x.to_vec(),
    };
    let mut x = project(x0);
    let (mut f, mut g) = problem.eval(&x);
    check(f, &g)?;
    let c = match step_rule {
        StepRule::InvSqrt(c) => c,
        StepRule::Calibrated { scale } => {
            let gn = norm2(&g);
            if gn > 0.0 {
                scale / gn
            } else {
                scale
            }
        }
    };
    let mut best_x = x.clone();
    let mut best_f = f;
    let mut half_best = f;
    for t in 1..=max_iter {
        if t == max_iter / 2 {
            half_best = best_f;
        }
        let gn = norm2(&g);
        if gn == 0.0 {
            return Ok(ConvexSolution {
                x,
                value: f,
                gap: 0.0,
                iterations: t,
                converged: true,
            });
        }
        let step = c / (t as f64).sqrt();
        let y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
        x = project(&y);
        let r = problem.eval(&x);
        f = r.0;
        g = r.1;
        check(f, &g)?;
        if f < best_f {
            best_f = f;
            best_x.clone_from(&x);
        }
    }
    Ok(ConvexSolution {
        x: best_x,
        value: best_f,
        gap: (half_best - best_f).max(0.0),
        iterations: max_iter,
        converged: false,
    })
}

fn check(f: f64, g: &[f64]) -> Result<()> {
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite objective or subgradient".into()));
    }
    Ok(())
}
