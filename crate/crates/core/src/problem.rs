//! Convex objectives and the built-in test problems.
//!
//! Objectives are immutable after construction and cheap to clone; solvers
//! treat them as read-only, so sweeps can evaluate them concurrently.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Point = DVector<f64>;

type ValueFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
type ProxFn = Arc<dyn Fn(f64, &Point) -> Point + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    Smooth,
    NonsmoothWithProx,
}

/// Structural representation of f(x) = ½ xᵀ M x − bᵀ x + c with M symmetric
/// positive semidefinite. Solvers route quadratics to direct linear solves.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub matrix: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl QuadraticForm {
    pub fn value(&self, x: &Point) -> f64 {
        0.5 * x.dot(&(&self.matrix * x)) - self.linear.dot(x) + self.constant
    }

    pub fn gradient(&self, x: &Point) -> Point {
        &self.matrix * x - &self.linear
    }
}

#[derive(Clone)]
enum Kind {
    Quadratic(QuadraticForm),
    Smooth {
        value: ValueFn,
        gradient: GradientFn,
    },
    NonsmoothProx {
        value: ValueFn,
        prox: ProxFn,
    },
}

/// A convex objective with value, gradient and optional proximal map.
#[derive(Clone)]
pub struct Objective {
    dimension: usize,
    kind: Kind,
    known_min_value: Option<f64>,
    known_min_norm_solution: Option<Point>,
    strong_convexity_modulus: Option<f64>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Quadratic(_) => "quadratic",
            Kind::Smooth { .. } => "smooth",
            Kind::NonsmoothProx { .. } => "nonsmooth-with-prox",
        };
        f.debug_struct("Objective")
            .field("dimension", &self.dimension)
            .field("kind", &kind)
            .field("known_min_value", &self.known_min_value)
            .finish()
    }
}

impl Objective {
    /// Build a smooth objective from closures. Used for synthesized
    /// objectives such as Moreau envelopes and test inputs.
    pub fn from_smooth_parts(
        dimension: usize,
        value: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Point) -> Point + Send + Sync + 'static,
        known_min_value: Option<f64>,
        known_min_norm_solution: Option<Point>,
    ) -> Self {
        Objective {
            dimension,
            kind: Kind::Smooth {
                value: Arc::new(value),
                gradient: Arc::new(gradient),
            },
            known_min_value,
            known_min_norm_solution,
            strong_convexity_modulus: None,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn smoothness(&self) -> Smoothness {
        match self.kind {
            Kind::NonsmoothProx { .. } => Smoothness::NonsmoothWithProx,
            _ => Smoothness::Smooth,
        }
    }

    pub fn is_smooth(&self) -> bool {
        self.smoothness() == Smoothness::Smooth
    }

    pub fn quadratic_form(&self) -> Option<&QuadraticForm> {
        match &self.kind {
            Kind::Quadratic(q) => Some(q),
            _ => None,
        }
    }

    pub fn known_min_value(&self) -> Option<f64> {
        self.known_min_value
    }

    pub fn known_min_norm_solution(&self) -> Option<&Point> {
        self.known_min_norm_solution.as_ref()
    }

    pub fn strong_convexity_modulus(&self) -> Option<f64> {
        self.strong_convexity_modulus
    }

    pub fn value(&self, x: &Point) -> f64 {
        assert_eq!(x.len(), self.dimension, "point dimension mismatch");
        match &self.kind {
            Kind::Quadratic(q) => q.value(x),
            Kind::Smooth { value, .. } => value(x),
            Kind::NonsmoothProx { value, .. } => value(x),
        }
    }

    pub fn gradient(&self, x: &Point) -> Result<Point> {
        assert_eq!(x.len(), self.dimension, "point dimension mismatch");
        match &self.kind {
            Kind::Quadratic(q) => Ok(q.gradient(x)),
            Kind::Smooth { gradient, .. } => Ok(gradient(x)),
            Kind::NonsmoothProx { .. } => Err(Error::GradientUnavailable),
        }
    }

    /// prox_{θf}(x) = argmin_ξ f(ξ) + ‖x − ξ‖²/(2θ), when a closed-form
    /// proximal map was attached at construction.
    pub fn prox(&self, theta: f64, x: &Point) -> Result<Point> {
        if theta <= 0.0 {
            return Err(Error::invalid("theta", "must be positive"));
        }
        match &self.kind {
            Kind::NonsmoothProx { prox, .. } => Ok(prox(theta, x)),
            _ => Err(Error::ProxUnavailable),
        }
    }

    pub fn has_prox(&self) -> bool {
        matches!(self.kind, Kind::NonsmoothProx { .. })
    }
}

/// The 2n-dimensional test objective ½ Σ (x_{2i−1} + x_{2i} − 1)².
///
/// Convex but not strongly convex; the solution set is the affine subspace
/// of pairwise sums equal to one, and its minimum-norm element is the
/// all-half vector.
pub fn make_pair_sum_quadratic(n_pairs: usize) -> Objective {
    assert!(n_pairs >= 1, "need at least one pair");
    let dim = 2 * n_pairs;
    let mut matrix = DMatrix::zeros(dim, dim);
    for i in 0..n_pairs {
        let (a, b) = (2 * i, 2 * i + 1);
        matrix[(a, a)] = 1.0;
        matrix[(a, b)] = 1.0;
        matrix[(b, a)] = 1.0;
        matrix[(b, b)] = 1.0;
    }
    let linear = DVector::from_element(dim, 1.0);
    let constant = n_pairs as f64 / 2.0;
    Objective {
        dimension: dim,
        kind: Kind::Quadratic(QuadraticForm {
            matrix,
            linear,
            constant,
        }),
        known_min_value: Some(0.0),
        known_min_norm_solution: Some(DVector::from_element(dim, 0.5)),
        strong_convexity_modulus: None,
    }
}

/// f(x) = ½ ⟨A(x − s), x − s⟩ for symmetric positive definite A.
pub fn make_strongly_convex_quadratic(matrix: DMatrix<f64>, shift: DVector<f64>) -> Result<Objective> {
    let n = shift.len();
    if matrix.nrows() != n || matrix.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: matrix.nrows(),
        });
    }
    let scale = matrix.amax().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::NotPositiveDefinite);
            }
        }
    }
    if matrix.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let eigen = matrix.clone().symmetric_eigen();
    let min_eig = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_eig > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let linear = &matrix * &shift;
    let constant = 0.5 * shift.dot(&linear);
    Ok(Objective {
        dimension: n,
        kind: Kind::Quadratic(QuadraticForm {
            matrix,
            linear,
            constant,
        }),
        known_min_value: Some(0.0),
        known_min_norm_solution: Some(shift),
        strong_convexity_modulus: Some(min_eig),
    })
}

/// One-dimensional |x| with its soft-threshold proximal map.
pub fn make_abs_value() -> Objective {
    let soft_threshold = |theta: f64, x: &Point| -> Point {
        DVector::from_iterator(
            x.len(),
            x.iter().map(|&v| v.signum() * (v.abs() - theta).max(0.0)),
        )
    };
    Objective {
        dimension: 1,
        kind: Kind::NonsmoothProx {
            value: Arc::new(|x: &Point| x[0].abs()),
            prox: Arc::new(soft_threshold),
        },
        known_min_value: Some(0.0),
        known_min_norm_solution: Some(DVector::from_element(1, 0.0)),
        strong_convexity_modulus: None,
    }
}

/// Max over coordinates of |central difference − gradient| / max(1, |gradient_i|).
pub fn check_gradient(obj: &Objective, point: &Point, step: f64) -> Result<f64> {
    if !obj.is_smooth() {
        return Err(Error::GradientUnavailable);
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid("step", "must be positive and finite"));
    }
    let grad = obj.gradient(point)?;
    let mut worst: f64 = 0.0;
    let mut probe = point.clone();
    for i in 0..point.len() {
        let xi = point[i];
        probe[i] = xi + step;
        let fp = obj.value(&probe);
        probe[i] = xi - step;
        let fm = obj.value(&probe);
        probe[i] = xi;
        let cd = (fp - fm) / (2.0 * step);
        worst = worst.max((cd - grad[i]).abs() / grad[i].abs().max(1.0));
    }
    Ok(worst)
}

/// Built-in problems addressable by string identifier.
///
/// `paper-quadratic-20` is the 20-dimensional pairwise-sum objective,
/// `paper-quadratic-<2n>` its other even dimensions, `sc-quadratic` a
/// strongly convex diag(1, 4) quadratic centered at the origin, and `abs`
/// the one-dimensional absolute value.
pub fn by_id(id: &str) -> Result<Objective> {
    match id {
        "sc-quadratic" => make_strongly_convex_quadratic(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
            DVector::zeros(2),
        ),
        "abs" => Ok(make_abs_value()),
        _ => {
            if let Some(dim) = id.strip_prefix("paper-quadratic-") {
                let dim: usize = dim.parse().map_err(|_| {
                    Error::config("problem", format!("unknown problem id `{id}`"))
                })?;
                if dim == 0 || !dim.is_multiple_of(2) {
                    return Err(Error::config(
                        "problem",
                        "paper-quadratic dimension must be a positive even integer",
                    ));
                }
                Ok(make_pair_sum_quadratic(dim / 2))
            } else {
                Err(Error::config(
                    "problem",
                    format!("unknown problem id `{id}` (try paper-quadratic-20, sc-quadratic, abs)"),
                ))
            }
        }
    }
}
