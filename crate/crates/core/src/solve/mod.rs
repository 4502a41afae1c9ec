//! Convex optimization engines and the conic model exporter.

mod ellipsoid;
pub mod export;
pub mod model;
mod subgradient;

pub use ellipsoid::{ellipsoid, EllipsoidOptions};
pub use subgradient::{projected_subgradient, StepRule};

/// Half-space `a . x <= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Halfspace {
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        Self { a, b }
    }

    /// `a . x - b`; positive when violated.
    pub fn excess(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) - self.b
    }
}

pub type Objective<'a> = Box<dyn Fn(&[f64]) -> (f64, Vec<f64>) + Sync + 'a>;
pub type Projector<'a> = Box<dyn Fn(&[f64]) -> Vec<f64> + Sync + 'a>;

/// Nonsmooth convex program over R^k.
///
/// The feasible set is the intersection of the projector's range (when given)
/// and the listed half-spaces. Penalty terms add `coef * max(0, a.x - b)^2`
/// to the objective.
pub struct ConvexProblem<'a> {
    pub dim: usize,
    pub objective: Objective<'a>,
    pub projector: Option<Projector<'a>>,
    pub constraints: Vec<Halfspace>,
    pub penalties: Vec<(Halfspace, f64)>,
}

impl<'a> ConvexProblem<'a> {
    pub fn new(dim: usize, objective: Objective<'a>) -> Self {
        Self {
            dim,
            objective,
            projector: None,
            constraints: Vec::new(),
            penalties: Vec::new(),
        }
    }

    pub fn with_projector(mut self, p: Projector<'a>) -> Self {
        self.projector = Some(p);
        self
    }

    pub fn with_constraints(mut self, c: Vec<Halfspace>) -> Self {
        self.constraints = c;
        self
    }

    pub fn with_penalties(mut self, p: Vec<(Halfspace, f64)>) -> Self {
        self.penalties = p;
        self
    }

    /// Objective plus penalties, with a subgradient.
    pub fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (mut f, mut g) = (self.objective)(x);
        for (h, coef) in &self.penalties {
            let e = h.excess(x);
            if e > 0.0 {
                f += coef * e * e;
                for (gi, ai) in g.iter_mut().zip(&h.a) {
                    *gi += 2.0 * coef * e * ai;
                }
            }
        }
        (f, g)
    }
}

/// Outcome of a convex solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Upper bound on `value - optimum` (certified for the ellipsoid method,
    /// heuristic for subgradient runs).
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(p: &[f64]) -> Vec<f64> {
    let d = p.len();
    if d == 0 {
        return Vec::new();
    }
    let mut u = p.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    p.iter().map(|&x| (x - theta).max(0.0)).collect()
}
