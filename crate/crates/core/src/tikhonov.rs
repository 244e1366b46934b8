//! Tikhonov-regularized objective, viscosity points and Moreau envelope.
//!
//! The viscosity point x_ε is the unique minimizer of
//! φ_ε(x) = f(x) + (ε/2)‖x‖²; the curve ε ↦ x_ε converges to the
//! minimum-norm minimizer as ε → 0. Quadratic objectives take a direct
//! linear-solve route, everything else runs strongly convex gradient
//! descent with a backtracked Lipschitz estimate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{Objective, Point};
use crate::util::fmt_g17;

/// Default gradient-norm tolerance for inner solves. The Lyapunov
/// diagnostics consume x_ε, so its error has to sit well below the
/// inequality slack tolerances.
pub const DEFAULT_INNER_TOL: f64 = 1e-10;

/// Inner-iteration cap. ε-strong convexity gives linear convergence, so
/// the cap only triggers on misuse.
pub const DEFAULT_INNER_CAP: usize = 100_000;

#[derive(Debug, Clone)]
pub struct ViscosityPoint {
    pub epsilon: f64,
    pub point: Point,
    /// ‖∇f(x_ε) + ε·x_ε‖ at the returned point.
    pub residual: f64,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct MoreauEvaluation {
    pub theta: f64,
    pub input: Point,
    pub envelope_value: f64,
    pub prox_point: Point,
    pub envelope_gradient: Point,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub warm_start: Option<Point>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_INNER_TOL,
            max_iterations: DEFAULT_INNER_CAP,
            warm_start: None,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions {
            tol,
            ..Default::default()
        }
    }
}

/// φ_ε(x) = f(x) + (ε/2)‖x‖².
pub fn phi(obj: &Objective, epsilon: f64, x: &Point) -> f64 {
    obj.value(x) + 0.5 * epsilon * x.norm_squared()
}

/// Minimize f(ξ) + (ρ/2)‖ξ − z‖² to gradient-norm tolerance.
///
/// Covers both the viscosity point (ρ = ε, z = 0) and the smooth-route
/// Moreau prox (ρ = 1/θ, z = x). Returns (minimizer, residual, iterations).
fn solve_shifted_regularized(
    obj: &Objective,
    rho: f64,
    center: &Point,
    opts: &SolveOptions,
) -> Result<(Point, f64, usize)> {
    if let Some(q) = obj.quadratic_form() {
        // (M + ρI) ξ = b + ρz, with one round of iterative refinement to
        // push the residual to the rounding floor.
        let n = obj.dimension();
        let mut m = q.matrix.clone();
        for i in 0..n {
            m[(i, i)] += rho;
        }
        let chol = m
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?;
        let rhs = &q.linear + center * rho;
        let mut x = chol.solve(&rhs);
        let r = &rhs - &m * &x;
        x += chol.solve(&r);
        let residual = (&m * &x - &rhs).norm();
        return Ok((x, residual, 0));
    }

    if !obj.is_smooth() {
        return Err(Error::GradientUnavailable);
    }

    let grad_reg = |x: &Point| -> Result<Point> {
        Ok(obj.gradient(x)? + (x - center) * rho)
    };

    // Gradient descent with step 2/(L̂ + ρ), the strongly convex optimum
    // once L̂ covers the regularized curvature. L̂ is estimated by
    // backtracking on the residual: ρ-strong convexity makes the gradient
    // norm contract whenever the step is admissible, and gradients are free
    // of the catastrophic cancellation that function-value tests hit near
    // the floating-point floor.
    let mut x = opts
        .warm_start
        .clone()
        .unwrap_or_else(|| DVector::zeros(obj.dimension()));
    let mut lipschitz = rho.max(1.0);
    let mut g = grad_reg(&x)?;
    let mut residual = g.norm();
    let mut iterations = 0usize;

    while residual > opts.tol {
        if iterations >= opts.max_iterations || !lipschitz.is_finite() {
            return Err(Error::InnerSolveStalled {
                rho,
                residual,
                iterations,
            });
        }
        let step = 2.0 / (lipschitz + rho);
        let next = &x - &g * step;
        let g_next = grad_reg(&next)?;
        let res_next = g_next.norm();
        iterations += 1;
        if res_next.is_finite() && res_next <= residual {
            x = next;
            g = g_next;
            residual = res_next;
            lipschitz = (lipschitz * 0.9).max(rho);
        } else {
            lipschitz *= 2.0;
        }
    }
    Ok((x, residual, iterations))
}

/// Solve ∇f(x_ε) + ε·x_ε = 0 to the given gradient-norm tolerance.
pub fn solve_viscosity_point(obj: &Objective, epsilon: f64, tol: f64) -> Result<ViscosityPoint> {
    solve_viscosity_point_with(obj, epsilon, &SolveOptions::with_tol(tol))
}

pub fn solve_viscosity_point_with(
    obj: &Objective,
    epsilon: f64,
    opts: &SolveOptions,
) -> Result<ViscosityPoint> {
    validate_viscosity_args(obj, epsilon, opts.tol)?;
    let origin = DVector::zeros(obj.dimension());
    let (point, residual, inner_iterations) =
        solve_shifted_regularized(obj, epsilon, &origin, opts)?;
    Ok(ViscosityPoint {
        epsilon,
        point,
        residual,
        inner_iterations,
    })
}

/// Iterative route regardless of quadratic structure; the direct solve's
/// independent counterpart in the quadratic-oracle equivalence check.
pub fn solve_viscosity_point_iterative(
    obj: &Objective,
    epsilon: f64,
    opts: &SolveOptions,
) -> Result<ViscosityPoint> {
    validate_viscosity_args(obj, epsilon, opts.tol)?;
    let stripped = match obj.quadratic_form() {
        Some(q) => {
            let q = q.clone();
            Objective::from_smooth_parts(
                obj.dimension(),
                move |x| q.value(x),
                {
                    let q = obj.quadratic_form().unwrap().clone();
                    move |x| q.gradient(x)
                },
                obj.known_min_value(),
                obj.known_min_norm_solution().cloned(),
            )
        }
        None => obj.clone(),
    };
    let origin = DVector::zeros(obj.dimension());
    let (point, residual, inner_iterations) =
        solve_shifted_regularized(&stripped, epsilon, &origin, opts)?;
    Ok(ViscosityPoint {
        epsilon,
        point,
        residual,
        inner_iterations,
    })
}

fn validate_viscosity_args(obj: &Objective, epsilon: f64, tol: f64) -> Result<()> {
    if !obj.is_smooth() && obj.quadratic_form().is_none() {
        return Err(Error::GradientUnavailable);
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid("epsilon", "must be positive and finite"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    Ok(())
}

/// Solve the viscosity curve along a strictly descending ε list,
/// warm-starting each solve from the previous point.
pub fn viscosity_curve(obj: &Objective, epsilons: &[f64], tol: f64) -> Result<Vec<ViscosityPoint>> {
    if epsilons.is_empty() {
        return Err(Error::invalid("epsilons", "must be nonempty"));
    }
    for pair in epsilons.windows(2) {
        if pair[1] >= pair[0] {
            return Err(Error::invalid("epsilons", "must be strictly descending"));
        }
    }
    let mut points = Vec::with_capacity(epsilons.len());
    let mut opts = SolveOptions::with_tol(tol);
    for &eps in epsilons {
        validate_viscosity_args(obj, eps, tol)?;
        let vp = solve_viscosity_point_with(obj, eps, &opts)?;
        opts.warm_start = Some(vp.point.clone());
        points.push(vp);
    }
    Ok(points)
}

/// CSV rows (epsilon, residual, norm, distance to x* when known, optional
/// coordinates), 17 significant digits.
pub fn viscosity_curve_csv(
    points: &[ViscosityPoint],
    min_norm_solution: Option<&Point>,
    include_coordinates: bool,
) -> String {
    let mut out = String::new();
    out.push_str("epsilon,residual,norm,dist_to_min_norm");
    if include_coordinates {
        if let Some(first) = points.first() {
            for i in 0..first.point.len() {
                out.push_str(&format!(",x_{i}"));
            }
        }
    }
    out.push('\n');
    for vp in points {
        let dist = min_norm_solution
            .map(|xs| fmt_g17((&vp.point - xs).norm()))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}",
            fmt_g17(vp.epsilon),
            fmt_g17(vp.residual),
            fmt_g17(vp.point.norm()),
            dist
        ));
        if include_coordinates {
            for v in vp.point.iter() {
                out.push(',');
                out.push_str(&fmt_g17(*v));
            }
        }
        out.push('\n');
    }
    out
}

/// Evaluate the Moreau envelope f_θ at x:
/// f_θ(x) = f(prox_{θf}(x)) + ‖x − prox‖²/(2θ), ∇f_θ(x) = (x − prox)/θ.
pub fn moreau(obj: &Objective, theta: f64, x: &Point) -> Result<MoreauEvaluation> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::invalid("theta", "must be positive and finite"));
    }
    let prox_point = if obj.has_prox() {
        obj.prox(theta, x)?
    } else if obj.is_smooth() {
        let (p, _residual, _iters) =
            solve_shifted_regularized(obj, 1.0 / theta, x, &SolveOptions::default())?;
        p
    } else {
        return Err(Error::ProxUnavailable);
    };
    let gap = x - &prox_point;
    Ok(MoreauEvaluation {
        theta,
        input: x.clone(),
        envelope_value: obj.value(&prox_point) + gap.norm_squared() / (2.0 * theta),
        prox_point,
        envelope_gradient: gap / theta,
    })
}

/// Smooth surrogate objective whose value/gradient are the Moreau envelope
/// calculus; the gradient is (1/θ)-Lipschitz and minimizers (and the
/// minimum value) are preserved.
pub fn moreau_objective(obj: &Objective, theta: f64) -> Result<Objective> {
    if !obj.has_prox() {
        return Err(Error::ProxUnavailable);
    }
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::invalid("theta", "must be positive and finite"));
    }
    let value_obj = obj.clone();
    let grad_obj = obj.clone();
    Ok(Objective::from_smooth_parts(
        obj.dimension(),
        move |x| {
            let p = value_obj.prox(theta, x).expect("prox available");
            value_obj.value(&p) + (x - &p).norm_squared() / (2.0 * theta)
        },
        move |x| {
            let p = grad_obj.prox(theta, x).expect("prox available");
            (x - p) / theta
        },
        obj.known_min_value(),
        obj.known_min_norm_solution().cloned(),
    ))
}

/// Direct (A + εI)x = b solve for a quadratic objective, used as the
/// linear-algebra oracle against the iterative route.
pub fn quadratic_viscosity_direct(obj: &Objective, epsilon: f64) -> Result<Point> {
    let q = obj
        .quadratic_form()
        .ok_or_else(|| Error::Unsupported("objective is not structurally quadratic".into()))?;
    let n = obj.dimension();
    let mut m = q.matrix.clone();
    for i in 0..n {
        m[(i, i)] += epsilon;
    }
    DMatrix::cholesky(m)
        .map(|c| c.solve(&q.linear))
        .ok_or(Error::NotPositiveDefinite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{
        make_abs_value, make_pair_sum_quadratic, make_strongly_convex_quadratic,
    };
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn phi_hand_values() {
        let obj = make_pair_sum_quadratic(10);
        assert_relative_eq!(phi(&obj, 1.0, &DVector::zeros(20)), 5.0, max_relative = 1e-15);

        let id = make_strongly_convex_quadratic(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert_relative_eq!(phi(&id, 1.0, &x), 1.0, max_relative = 1e-15);
        assert_relative_eq!(phi(&id, 123.0, &DVector::zeros(2)), 0.0, epsilon = 1e-300);
    }

    #[test]
    fn viscosity_point_closed_form() {
        // By pairwise symmetry x_ε = (s, …, s) with (2s − 1) + εs = 0.
        let obj = make_pair_sum_quadratic(10);
        let vp = solve_viscosity_point(&obj, 0.1, 1e-10).unwrap();
        let s = 1.0 / 2.1;
        for v in vp.point.iter() {
            assert_relative_eq!(*v, s, epsilon = 1e-10);
        }
        assert!(vp.residual <= 1e-10);
    }

    #[test]
    fn viscosity_point_identity_quadratic() {
        let s = DVector::from_vec(vec![3.0, -1.0]);
        let obj = make_strongly_convex_quadratic(DMatrix::identity(2, 2), s.clone()).unwrap();
        for eps in [1.0, 0.25, 0.01] {
            let vp = solve_viscosity_point(&obj, eps, 1e-12).unwrap();
            let expected = &s / (1.0 + eps);
            assert!((vp.point - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn viscosity_point_approaches_min_norm_solution() {
        let obj = make_pair_sum_quadratic(10);
        let xstar = obj.known_min_norm_solution().unwrap().clone();
        let mut last = f64::INFINITY;
        for eps in [1.0, 0.1, 0.01] {
            let vp = solve_viscosity_point(&obj, eps, 1e-10).unwrap();
            let d = (&vp.point - &xstar).norm();
            assert!(d <= last + 1e-9, "distance to x* must not increase");
            assert!(vp.point.norm() <= xstar.norm() + 1e-9);
            last = d;
        }
        // |s - 1/2|*sqrt(20) = eps*sqrt(20)/(2(2+eps)) ~ 0.011 at eps 0.01.
        assert!(last < 0.012);
    }

    #[test]
    fn viscosity_iterative_matches_direct() {
        // A gradient-norm tolerance of 1e-12 pins the point error below
        // 1e-12/eps, well under the 1e-8 equivalence requirement.
        let obj = make_pair_sum_quadratic(10);
        for eps in [1.0, 0.1, 0.01] {
            let direct = quadratic_viscosity_direct(&obj, eps).unwrap();
            let iter =
                solve_viscosity_point_iterative(&obj, eps, &SolveOptions::with_tol(1e-12))
                    .unwrap();
            assert!(
                (direct - iter.point).norm() <= 1e-8,
                "routes disagree at eps {eps}"
            );
            assert!(iter.inner_iterations > 0);
        }
    }

    #[test]
    fn viscosity_curve_warm_start_and_bounds() {
        let obj = make_pair_sum_quadratic(10);
        let points = viscosity_curve(&obj, &[1.0, 0.5, 0.1], 1e-10).unwrap();
        let sqrt5 = 5.0_f64.sqrt();
        let mut last_norm = 0.0;
        for vp in &points {
            let s = 1.0 / (2.0 + vp.epsilon);
            assert_relative_eq!(vp.point.norm(), s * 20.0_f64.sqrt(), epsilon = 1e-9);
            assert!(vp.point.norm() <= sqrt5 + 1e-9);
            assert!(vp.point.norm() >= last_norm);
            last_norm = vp.point.norm();
        }
    }

    #[test]
    fn viscosity_curve_rejects_bad_lists() {
        let obj = make_pair_sum_quadratic(2);
        assert!(viscosity_curve(&obj, &[1.0, 0.5, 0.0], 1e-10).is_err());
        assert!(viscosity_curve(&obj, &[0.5, 1.0], 1e-10).is_err());
        assert!(viscosity_curve(&obj, &[], 1e-10).is_err());
        let single = viscosity_curve(&obj, &[0.3], 1e-10).unwrap();
        let lone = solve_viscosity_point(&obj, 0.3, 1e-10).unwrap();
        assert!((single[0].point.clone() - lone.point).norm() < 1e-12);
    }

    #[test]
    fn moreau_abs_matches_huber() {
        let obj = make_abs_value();
        let at = |x: f64| moreau(&obj, 1.0, &DVector::from_element(1, x)).unwrap();

        let m3 = at(3.0);
        assert_relative_eq!(m3.envelope_value, 2.5, max_relative = 1e-15);
        assert_relative_eq!(m3.prox_point[0], 2.0, max_relative = 1e-15);
        assert_relative_eq!(m3.envelope_gradient[0], 1.0, max_relative = 1e-15);

        let mh = at(0.5);
        assert_relative_eq!(mh.envelope_value, 0.125, max_relative = 1e-15);
        assert_eq!(mh.prox_point[0], 0.0);
        assert_relative_eq!(mh.envelope_gradient[0], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn moreau_fixed_point_at_minimizer() {
        let obj = make_abs_value();
        let m = moreau(&obj, 2.5, &DVector::zeros(1)).unwrap();
        assert_eq!(m.prox_point[0], 0.0);
        assert_eq!(m.envelope_gradient[0], 0.0);
        assert_eq!(m.envelope_value, 0.0);
    }

    #[test]
    fn moreau_identity_exact_for_closed_form_prox() {
        let obj = make_abs_value();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = DVector::from_element(1, rng.gen_range(-10.0..10.0));
            let theta = rng.gen_range(0.1..5.0);
            let m = moreau(&obj, theta, &x).unwrap();
            let lhs = m.envelope_value
                - obj.value(&m.prox_point)
                - (&x - &m.prox_point).norm_squared() / (2.0 * theta);
            // Zero up to one rounding of the envelope sum.
            assert!(lhs.abs() <= 1e-15 * m.envelope_value.abs().max(1.0));
        }
    }

    #[test]
    fn moreau_smooth_route_matches_quadratic_closed_form() {
        // For f = ½‖x − s‖², prox_{θf}(x) = (x + θs)/(1 + θ).
        let s = DVector::from_vec(vec![1.0, 2.0]);
        let obj = make_strongly_convex_quadratic(DMatrix::identity(2, 2), s.clone()).unwrap();
        let x = DVector::from_vec(vec![4.0, 0.0]);
        let theta = 0.7;
        let m = moreau(&obj, theta, &x).unwrap();
        let expected = (&x + &s * theta) / (1.0 + theta);
        assert!((m.prox_point - expected).norm() < 1e-10);
    }

    #[test]
    fn moreau_objective_is_huber() {
        let obj = make_abs_value();
        let smooth = moreau_objective(&obj, 1.0).unwrap();
        assert!(smooth.is_smooth());
        assert_eq!(smooth.known_min_value(), Some(0.0));

        let g3 = smooth.gradient(&DVector::from_element(1, 3.0)).unwrap();
        assert_relative_eq!(g3[0], 1.0, max_relative = 1e-15);
        let g0 = smooth.gradient(&DVector::zeros(1)).unwrap();
        assert_eq!(g0[0], 0.0);

        let err =
            crate::problem::check_gradient(&smooth, &DVector::from_element(1, 0.3), 1e-5).unwrap();
        assert!(err <= 1e-5, "synthesized gradient fd error {err}");
    }

    #[test]
    fn moreau_objective_requires_prox() {
        let obj = make_pair_sum_quadratic(1);
        assert!(matches!(
            moreau_objective(&obj, 1.0),
            Err(Error::ProxUnavailable)
        ));
    }

    #[test]
    fn envelope_gradient_is_lipschitz() {
        let obj = make_abs_value();
        let smooth = moreau_objective(&obj, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let x = DVector::from_element(1, rng.gen_range(-5.0..5.0));
            let y = DVector::from_element(1, rng.gen_range(-5.0..5.0));
            let gx = smooth.gradient(&x).unwrap();
            let gy = smooth.gradient(&y).unwrap();
            assert!((gx - gy).norm() <= (&x - &y).norm() / 0.5 + 1e-9);
        }
    }

    #[test]
    fn curve_csv_shape() {
        let obj = make_pair_sum_quadratic(2);
        let pts = viscosity_curve(&obj, &[1.0, 0.1], 1e-10).unwrap();
        let csv = viscosity_curve_csv(&pts, obj.known_min_norm_solution(), true);
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("epsilon,residual,norm,dist_to_min_norm,x_0"));
        assert_eq!(lines.count(), 2);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            // The viscosity point never exceeds the minimum-norm solution
            // in norm (up to solver tolerance).
            #[test]
            fn viscosity_norm_bounded_by_min_norm(eps in 1e-4f64..100.0) {
                let obj = make_pair_sum_quadratic(5);
                let vp = solve_viscosity_point(&obj, eps, 1e-10).unwrap();
                let xstar = obj.known_min_norm_solution().unwrap();
                prop_assert!(vp.point.norm() <= xstar.norm() + 1e-9);
            }

            // Moreau envelope never exceeds the function and is exact at
            // prox fixed points.
            #[test]
            fn envelope_below_function(x in -10.0f64..10.0, theta in 0.05f64..5.0) {
                let obj = make_abs_value();
                let m = moreau(&obj, theta, &DVector::from_element(1, x)).unwrap();
                prop_assert!(m.envelope_value <= x.abs() + 1e-12);
                prop_assert!(m.envelope_value >= 0.0);
            }
        }
    }
}
