//! Mixed-integer second-order cone models of the regularized problems, for
//! certification by external solvers.

use super::model::{Affine, ConicModel, Sense, VarKind};
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::newsvendor::NewsvendorParams;
use crate::portfolio::{data_bound, PortfolioParams};
use crate::scenarios::{Aggregation, RegularizerSpec};

/// Gate tolerance used when none is given.
pub const DEFAULT_GATE_DELTA: f64 = 1e-6;

const INF: f64 = f64::INFINITY;

fn check_common(dim: usize, train: &DiscreteMeasure, spec: &RegularizerSpec, eps: f64) -> Result<()> {
    if train.is_empty() {
        return Err(Error::EmptyInput);
    }
    if train.dim() != dim {
        return Err(Error::DimMismatch { expected: dim, got: train.dim() });
    }
    if spec.dim() != dim {
        return Err(Error::DimMismatch { expected: dim, got: spec.dim() });
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidParams(format!("radius must be finite and nonnegative, got {eps}")));
    }
    Ok(())
}

/// Smallest big-M per product: the `y = 0` gate must stay slack at `x_k = 0`
/// and the `y = 1` gate at `x_k = a_k`.
pub fn newsvendor_required_big_m(params: &NewsvendorParams, spec: &RegularizerSpec, deltas: &[f64]) -> Vec<f64> {
    (0..params.dim())
        .map(|k| {
            spec.scenarios()
                .iter()
                .map(|z| z[k] + deltas[k])
                .fold(params.a[k], f64::max)
        })
        .collect()
}

/// Newsvendor model. Variables: `x_k`, `w_i_k` (the componentwise minimum),
/// binaries `y_j_k` (1 when `x_k > zeta_j_k`), worst-case subgradient
/// entries `z_j_k`, per-scenario norms `t_j` and the aggregate `s`.
pub fn export_newsvendor_misocp(
    params: &NewsvendorParams,
    train: &DiscreteMeasure,
    spec: &RegularizerSpec,
    eps: f64,
    deltas: Option<&[f64]>,
    big_m: Option<&[f64]>,
) -> Result<ConicModel> {
    params.validate()?;
    let d = params.dim();
    check_common(d, train, spec, eps)?;
    if spec.aggregation() != Aggregation::Quadratic {
        return Err(Error::UnsupportedVariant(
            "the newsvendor regularizer uses quadratic aggregation only".into(),
        ));
    }
    let deltas: Vec<f64> = match deltas {
        Some(v) if v.len() != d => return Err(Error::DimMismatch { expected: d, got: v.len() }),
        Some(v) => v.to_vec(),
        None => vec![DEFAULT_GATE_DELTA; d],
    };
    if deltas.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidParams("gate tolerances must be positive".into()));
    }
    let required = newsvendor_required_big_m(params, spec, &deltas);
    let big_m: Vec<f64> = match big_m {
        Some(v) if v.len() != d => return Err(Error::DimMismatch { expected: d, got: v.len() }),
        Some(v) => v.to_vec(),
        None => required.clone(),
    };
    for k in 0..d {
        if !(big_m[k] >= required[k]) {
            return Err(Error::BadBigM { index: k, value: big_m[k], required: required[k] });
        }
    }

    let n = train.len();
    let m = spec.len();
    let x = |k: usize| format!("x_{k}");
    let w = |i: usize, k: usize| format!("w_{i}_{k}");
    let y = |j: usize, k: usize| format!("y_{j}_{k}");
    let z = |j: usize, k: usize| format!("z_{j}_{k}");
    let t = |j: usize| format!("t_{j}");

    let mut model = ConicModel::new();
    for k in 0..d {
        model.add_var(x(k), 0.0, params.a[k], VarKind::Continuous);
    }
    for i in 0..n {
        for k in 0..d {
            model.add_var(w(i, k), -INF, INF, VarKind::Continuous);
        }
    }
    for j in 0..m {
        for k in 0..d {
            model.add_var(y(j, k), 0.0, 1.0, VarKind::Binary);
        }
    }
    for j in 0..m {
        for k in 0..d {
            model.add_var(z(j, k), -INF, INF, VarKind::Continuous);
        }
    }
    for j in 0..m {
        model.add_var(t(j), 0.0, INF, VarKind::Continuous);
    }
    model.add_var("s", 0.0, INF, VarKind::Continuous);

    let mut obj = Affine::default();
    for k in 0..d {
        obj.terms.push((x(k), params.c[k] - params.g[k]));
    }
    for (i, (xi, &p)) in train.points().iter().zip(train.weights()).enumerate() {
        for k in 0..d {
            obj.terms.push((w(i, k), p * (params.g[k] - params.v[k] - params.b[k])));
            obj.constant += p * params.b[k] * xi[k];
        }
    }
    obj.terms.push(("s".into(), eps));
    model.objective = obj;

    for (i, xi) in train.points().iter().enumerate() {
        for k in 0..d {
            model.add_linear(format!("min_x_{i}_{k}"), vec![(w(i, k), 1.0), (x(k), -1.0)], Sense::Le, 0.0);
            model.add_linear(format!("min_xi_{i}_{k}"), vec![(w(i, k), 1.0)], Sense::Le, xi[k]);
        }
    }
    for (j, zeta) in spec.scenarios().iter().enumerate() {
        for k in 0..d {
            // x_k - M y >= zeta + delta - M
            model.add_linear(
                format!("gate_above_{j}_{k}"),
                vec![(x(k), 1.0), (y(j, k), -big_m[k])],
                Sense::Ge,
                zeta[k] + deltas[k] - big_m[k],
            );
            model.add_linear(
                format!("gate_below_{j}_{k}"),
                vec![(x(k), 1.0), (y(j, k), -big_m[k])],
                Sense::Le,
                zeta[k],
            );
        }
    }
    for j in 0..m {
        for k in 0..d {
            model.add_linear(
                format!("grad_{j}_{k}"),
                vec![(z(j, k), 1.0), (y(j, k), -(params.g[k] - params.v[k] - params.b[k]))],
                Sense::Eq,
                params.b[k],
            );
        }
    }
    for (j, &r) in spec.weights().iter().enumerate() {
        let args = (0..d).map(|k| Affine { constant: 0.0, terms: vec![(z(j, k), r.sqrt())] }).collect();
        model.add_soc(format!("norm_{j}"), args, Affine::var(t(j)));
    }
    model.add_soc("aggregate", (0..m).map(|j| Affine::var(t(j))).collect(), Affine::var("s"));
    model.validate()?;
    Ok(model)
}

/// Big-M constants `(M1, M2, M3)` of the portfolio model.
pub fn portfolio_big_m(params: &PortfolioParams, train: &DiscreteMeasure, spec: &RegularizerSpec) -> (f64, f64, f64) {
    let k = data_bound(train, Some(spec));
    (2.0 * (k + params.tau_bound) + params.delta, 1.0 + k, params.tail_factor())
}

/// Mean-CVaR model. Variables: weights `w_k`, threshold `tau` in
/// `[-C, C]`, CVaR excess `u_i`, binaries `z_j` (1 outside the tail at
/// scenario j), gradient-norm bounds `gamma_j` and, for quadratic
/// aggregation, `s`.
pub fn export_portfolio_misocp(
    params: &PortfolioParams,
    train: &DiscreteMeasure,
    spec: &RegularizerSpec,
    eps: f64,
) -> Result<ConicModel> {
    params.validate()?;
    let d = train.dim();
    check_common(d, train, spec, eps)?;
    let (m1, m2, m3) = portfolio_big_m(params, train, spec);
    let quadratic = spec.aggregation() == Aggregation::Quadratic;
    let (rho, alpha, c, delta) = (params.rho, params.alpha, params.tau_bound, params.delta);
    let w = |k: usize| format!("w_{k}");
    let u = |i: usize| format!("u_{i}");
    let z = |j: usize| format!("z_{j}");
    let gamma = |j: usize| format!("gamma_{j}");

    let mut model = ConicModel::new();
    for k in 0..d {
        model.add_var(w(k), 0.0, INF, VarKind::Continuous);
    }
    model.add_var("tau", -c, c, VarKind::Continuous);
    for i in 0..train.len() {
        model.add_var(u(i), 0.0, INF, VarKind::Continuous);
    }
    for j in 0..spec.len() {
        model.add_var(z(j), 0.0, 1.0, VarKind::Binary);
    }
    for j in 0..spec.len() {
        model.add_var(gamma(j), -INF, INF, VarKind::Continuous);
    }
    if quadratic {
        model.add_var("s", 0.0, INF, VarKind::Continuous);
    }

    let mut obj = Affine::default();
    let mean: Vec<f64> = (0..d)
        .map(|k| train.points().iter().zip(train.weights()).map(|(x, p)| p * x[k]).sum())
        .collect();
    for k in 0..d {
        obj.terms.push((w(k), -mean[k]));
    }
    obj.terms.push(("tau".into(), rho));
    for (i, &p) in train.weights().iter().enumerate() {
        obj.terms.push((u(i), rho / alpha * p));
    }
    if quadratic {
        obj.terms.push(("s".into(), eps));
    } else {
        for (j, &r) in spec.weights().iter().enumerate() {
            obj.terms.push((gamma(j), eps * r));
        }
    }
    model.objective = obj;

    model.add_linear("budget", (0..d).map(|k| (w(k), 1.0)).collect(), Sense::Eq, 1.0);
    for (i, xi) in train.points().iter().enumerate() {
        // u_i >= -w.xi - tau
        let mut terms: Vec<(String, f64)> = vec![(u(i), 1.0)];
        terms.extend((0..d).map(|k| (w(k), xi[k])));
        terms.push(("tau".into(), 1.0));
        model.add_linear(format!("excess_{i}"), terms, Sense::Ge, 0.0);
    }
    for (j, zeta) in spec.scenarios().iter().enumerate() {
        // -w.zeta - tau + M1 z <= M1
        let mut terms: Vec<(String, f64)> = (0..d).map(|k| (w(k), -zeta[k])).collect();
        terms.push(("tau".into(), -1.0));
        terms.push((z(j), m1));
        model.add_linear(format!("region_body_{j}"), terms, Sense::Le, m1);
        // w.zeta + tau - M1 z <= delta
        let mut terms: Vec<(String, f64)> = (0..d).map(|k| (w(k), zeta[k])).collect();
        terms.push(("tau".into(), 1.0));
        terms.push((z(j), -m1));
        model.add_linear(format!("region_tail_{j}"), terms, Sense::Le, delta);
    }
    for (j, &r) in spec.weights().iter().enumerate() {
        let scale = if quadratic { r.sqrt() } else { 1.0 };
        let args = |f: f64| -> Vec<Affine> {
            (0..d).map(|k| Affine { constant: 0.0, terms: vec![(w(k), f * scale)] }).collect()
        };
        // ||w|| <= gamma + M2 (1 - z)
        model.add_soc(
            format!("grad_body_{j}"),
            args(1.0),
            Affine::var(gamma(j)).term(z(j), -m2).plus(m2),
        );
        // (1 + rho/alpha) ||w|| <= gamma + M3 z
        model.add_soc(
            format!("grad_tail_{j}"),
            args(params.tail_factor()),
            Affine::var(gamma(j)).term(z(j), m3),
        );
    }
    if quadratic {
        model.add_soc("aggregate", (0..spec.len()).map(|j| Affine::var(gamma(j))).collect(), Affine::var("s"));
    }
    model.validate()?;
    Ok(model)
}
