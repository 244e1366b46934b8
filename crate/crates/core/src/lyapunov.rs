//! Lyapunov machinery: the anchored energy E(t), the admissibility logic
//! for (δ, λ, a, c), the decay conditions on ε(t), the sign terms of the
//! differential inequality, and the integrated energy bound.
//!
//! Products of exponentially large factors appear throughout (γ(t) grows
//! like exp(C·t^{(2−p)/2})), so γ is stored and combined in log space.

use serde::Serialize;

use crate::dynamics::{DynamicsState, RegularizationSchedule, Trajectory};
use crate::error::{Error, Result};
use crate::problem::Objective;
use crate::tikhonov::{phi, ViscosityPoint};
use crate::util::{log_add_exp, simpson};

/// Parameter pack (δ, λ, a, c) with b = cλ derived, plus the time t₁ from
/// which the decay condition has been verified.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LyapunovParams {
    pub delta: f64,
    pub lambda: f64,
    pub a: f64,
    pub c: f64,
    t1: Option<f64>,
}

impl LyapunovParams {
    /// Validates λ against the admissible open interval for (δ, a, c).
    pub fn new(delta: f64, lambda: f64, a: f64, c: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::invalid("delta", "must be positive"));
        }
        if !(a > 1.0) {
            return Err(Error::invalid("a", "must exceed 1"));
        }
        if !(c > 1.0) {
            return Err(Error::invalid("c", "must exceed 1"));
        }
        match admissible_lambda_interval(delta, a, c) {
            Some((lo, hi)) if lambda > lo && lambda < hi => Ok(LyapunovParams {
                delta,
                lambda,
                a,
                c,
                t1: None,
            }),
            Some((lo, hi)) => Err(Error::invalid(
                "lambda",
                format!("lambda {lambda} outside the admissible interval ({lo}, {hi}) for delta={delta}, a={a}, c={c}"),
            )),
            None => Err(Error::invalid(
                "lambda",
                format!("admissible interval is empty for delta={delta}, a={a}, c={c}"),
            )),
        }
    }

    pub fn b(&self) -> f64 {
        self.c * self.lambda
    }

    pub fn t1(&self) -> Option<f64> {
        self.t1
    }

    pub fn with_t1(mut self, t1: f64) -> Self {
        self.t1 = Some(t1);
        self
    }

    /// min(2λ − δ, δ − (a+1)λ/a), positive on the admissible interval.
    pub fn h1_threshold(&self) -> f64 {
        (2.0 * self.lambda - self.delta).min(self.delta - (self.a + 1.0) / self.a * self.lambda)
    }
}

/// Open interval of admissible λ for given δ and a, c > 1; None when empty.
pub fn admissible_lambda_interval(delta: f64, a: f64, c: f64) -> Option<(f64, f64)> {
    let upper = a * delta / (a + 1.0);
    let lower = if delta <= 2.0 - 1.0 / c {
        delta / 2.0
    } else {
        let s = delta + 1.0 / c;
        0.5 * (s + (s * s - 4.0).sqrt())
    };
    if lower < upper {
        Some((lower, upper))
    } else {
        None
    }
}

/// Earliest t₁ ≤ t_max from which d/dt(1/√ε) stays below `threshold`.
///
/// For power laws the growth quantity g(t) = (p/2)·t^{p/2−1}/√c₀ is
/// monotone (decreasing for p < 2, constant for p = 2), so the crossing is
/// solved analytically rather than scanned on a grid.
fn earliest_decay_time(
    reg: &RegularizationSchedule,
    threshold: f64,
    t_max: f64,
) -> Result<f64> {
    let t_start = reg.t_start();
    match reg.as_power_law() {
        Some((c0, p)) => {
            let g = |t: f64| reg.inv_sqrt_eps_derivative(t);
            if threshold <= 0.0 {
                return Err(Error::DecayConditionNotMet {
                    t_max,
                    margin: g(t_max) - threshold,
                });
            }
            if p == 2.0 {
                // g is constant 1/√c₀.
                let g0 = 1.0 / c0.sqrt();
                if g0 <= threshold {
                    Ok(t_start)
                } else {
                    Err(Error::DecayConditionNotMet {
                        t_max,
                        margin: g0 - threshold,
                    })
                }
            } else {
                let t_root = (0.5 * p / (threshold * c0.sqrt())).powf(2.0 / (2.0 - p));
                let t1 = t_root.max(t_start);
                if t1 <= t_max {
                    Ok(t1)
                } else {
                    Err(Error::DecayConditionNotMet {
                        t_max,
                        margin: g(t_max) - threshold,
                    })
                }
            }
        }
        None => match reg {
            RegularizationSchedule::Constant { epsilon0, .. } if *epsilon0 > 0.0 => {
                if threshold >= 0.0 {
                    Ok(t_start)
                } else {
                    Err(Error::DecayConditionNotMet {
                        t_max,
                        margin: -threshold,
                    })
                }
            }
            _ => Err(Error::Unsupported(
                "decay conditions need a strictly positive regularization schedule".into(),
            )),
        },
    }
}

/// Earliest t₁ for the two-sided condition with threshold
/// min(2λ−δ, δ−(a+1)λ/a).
pub fn check_h1(
    reg: &RegularizationSchedule,
    params: &LyapunovParams,
    t_max: f64,
) -> Result<f64> {
    earliest_decay_time(reg, params.h1_threshold(), t_max)
}

/// Earliest t₁ for the controlled-decay condition with threshold
/// min(2λ−δ, δ−λ); the limit of the (a, c) condition as both grow.
pub fn check_cd(
    reg: &RegularizationSchedule,
    delta: f64,
    lambda: f64,
    t_max: f64,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", "must be positive"));
    }
    let lower = if delta <= 2.0 {
        delta / 2.0
    } else {
        0.5 * (delta + (delta * delta - 4.0).sqrt())
    };
    // The upper boundary λ = δ is admitted so the degenerate threshold-0
    // case can be reported as a decay failure rather than a bad argument.
    if !(lambda > lower && lambda <= delta) {
        return Err(Error::invalid(
            "lambda",
            format!("lambda must exceed delta/2 (controlled decay needs lambda in ({lower}, {delta}))"),
        ));
    }
    let threshold = (2.0 * lambda - delta).min(delta - lambda);
    earliest_decay_time(reg, threshold, t_max)
}

/// Per-sample Lyapunov diagnostics. γ is held as log γ.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovSample {
    pub t: f64,
    pub epsilon: f64,
    pub eps_dot: f64,
    /// E(t) = (φ_t(x) − φ_t(x_ε)) + ½‖v‖².
    pub e: f64,
    pub v_norm: f64,
    pub phi_gap: f64,
    /// Global energy W(t).
    pub w: f64,
    pub mu: f64,
    pub log_gamma: f64,
    pub a_term: f64,
    pub b_term: f64,
    pub c_term: f64,
    /// Right side of the differential inequality, ½[(λc+a)λ ε̇²/ε^{3/2} − ε̇]‖x*‖²;
    /// None when the minimum-norm solution is unknown.
    pub bound_rhs: Option<f64>,
    /// E + (ε/2)‖x*‖² − (f(x) − min f); nonnegative up to solver error.
    pub keybb_slack: Option<f64>,
    /// 2E/ε − ‖x − x_ε‖²; nonnegative up to solver error.
    pub est_basic1_slack: f64,
    pub f_gap: Option<f64>,
    pub dist2_viscosity: f64,
    pub dist2_min_norm: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LyapunovSeries {
    pub samples: Vec<LyapunovSample>,
    pub t1: f64,
    /// Index of the first sample at or after t₁; γ is anchored there
    /// (γ = 1). None when the trajectory ends before t₁.
    pub anchor: Option<usize>,
    pub x_star_norm2: Option<f64>,
    pub max_viscosity_residual: f64,
}

/// log γ(t) = ∫_{t₁}^t μ(s) ds in closed form. For power laws this is the
/// (p/2)·ln(t/t₁) + 2(δ−λ)√c₀/(2−p)·(t^{(2−p)/2} − t₁^{(2−p)/2}) formula;
/// constant schedules integrate the constant μ exactly.
pub fn log_gamma_closed(
    reg: &RegularizationSchedule,
    delta: f64,
    lambda: f64,
    t1: f64,
    t: f64,
) -> f64 {
    match reg.as_power_law() {
        Some((c0, p)) => {
            let log_part = 0.5 * p * (t / t1).ln();
            let sqrt_part = if p == 2.0 {
                (delta - lambda) * c0.sqrt() * (t / t1).ln()
            } else {
                let q = 0.5 * (2.0 - p);
                (delta - lambda) * c0.sqrt() * (t.powf(q) - t1.powf(q)) / q
            };
            log_part + sqrt_part
        }
        None => (delta - lambda) * reg.eps(t).sqrt() * (t - t1),
    }
}

/// Independent Simpson quadrature of ∫ μ for cross-checking the closed form.
pub fn log_gamma_quadrature(
    reg: &RegularizationSchedule,
    delta: f64,
    lambda: f64,
    t1: f64,
    t: f64,
    panels: usize,
) -> f64 {
    let mu = |s: f64| {
        let eps = reg.eps(s);
        -reg.eps_dot(s) / (2.0 * eps) + (delta - lambda) * eps.sqrt()
    };
    simpson(mu, t1, t, panels)
}

/// Evaluate the Lyapunov diagnostics along a trajectory, given viscosity
/// points solved at each sample time.
pub fn evaluate(
    traj: &Trajectory,
    obj: &Objective,
    reg: &RegularizationSchedule,
    params: &LyapunovParams,
    viscosity: &[ViscosityPoint],
) -> Result<LyapunovSeries> {
    let t1 = params
        .t1()
        .ok_or_else(|| Error::invalid("params", "t1 not set; run check_h1 first"))?;
    if viscosity.len() != traj.samples.len() {
        return Err(Error::DimensionMismatch {
            expected: traj.samples.len(),
            got: viscosity.len(),
        });
    }
    let x_star = obj.known_min_norm_solution();
    let x_star_norm2 = x_star.map(|x| x.norm_squared());
    let f_min = obj.known_min_value();
    let anchor = traj.samples.iter().position(|s| s.t >= t1);
    let t_anchor = anchor.map(|i| traj.samples[i].t);
    let lambda = params.lambda;
    let delta = params.delta;

    let mut samples = Vec::with_capacity(traj.samples.len());
    let mut max_residual: f64 = 0.0;
    for (state, visc) in traj.samples.iter().zip(viscosity) {
        let t = state.t;
        let eps = reg.eps(t);
        let eps_dot = reg.eps_dot(t);
        if !(eps > 0.0) {
            return Err(Error::Unsupported(
                "Lyapunov diagnostics need a strictly positive regularization".into(),
            ));
        }
        max_residual = max_residual.max(visc.residual);
        let xe = &visc.point;
        let phi_gap = phi(obj, eps, &state.x) - phi(obj, eps, xe);
        let diff = &state.x - xe;
        let v = &diff * (lambda * eps.sqrt()) + &state.v;
        let v_norm = v.norm();
        let e = phi_gap + 0.5 * v_norm * v_norm;
        let w = 0.5 * state.v.norm_squared() + obj.value(&state.x)
            + 0.5 * eps * state.x.norm_squared();
        let mu = -eps_dot / (2.0 * eps) + (delta - lambda) * eps.sqrt();
        let eps32 = eps.powf(1.5);
        let a_term = -eps_dot + 2.0 * (delta - 2.0 * lambda) * eps32;
        let b_term = 2.0 * ((1.0 + 1.0 / params.a) * lambda - delta) * eps32 - eps_dot;
        let c_term = lambda * eps_dot
            + 2.0 * ((delta + 1.0 / params.c) * lambda - lambda * lambda - 1.0) * eps32;
        let bound_rhs = x_star_norm2.map(|xs2| {
            0.5 * ((lambda * params.c + params.a) * lambda * eps_dot * eps_dot / eps32 - eps_dot)
                * xs2
        });
        let log_gamma = match t_anchor {
            Some(ta) if t >= ta => log_gamma_closed(reg, delta, lambda, ta, t),
            _ => 0.0,
        };
        let f_gap = f_min.map(|fm| obj.value(&state.x) - fm);
        let dist2_viscosity = diff.norm_squared();
        let keybb_slack = match (x_star_norm2, f_gap) {
            (Some(xs2), Some(fg)) => Some(e + 0.5 * eps * xs2 - fg),
            _ => None,
        };
        let est_basic1_slack = 2.0 * e / eps - dist2_viscosity;
        let dist2_min_norm = x_star.map(|xs| (&state.x - xs).norm_squared());
        samples.push(LyapunovSample {
            t,
            epsilon: eps,
            eps_dot,
            e,
            v_norm,
            phi_gap,
            w,
            mu,
            log_gamma,
            a_term,
            b_term,
            c_term,
            bound_rhs,
            keybb_slack,
            est_basic1_slack,
            f_gap,
            dist2_viscosity,
            dist2_min_norm,
        });
    }
    Ok(LyapunovSeries {
        samples,
        t1,
        anchor,
        x_star_norm2,
        max_viscosity_residual: max_residual,
    })
}

/// Right side of the integrated bound
/// E(t) ≤ (‖x*‖²/2)·[∫_{t₁}^t rhs(s)γ(s)ds]/γ(t) + γ(t₁)E(t₁)/γ(t),
/// evaluated by trapezoidal quadrature on the sample grid, accumulated in
/// log space. Entries before the anchor are None.
pub fn theoretical_bound(
    series: &LyapunovSeries,
    params: &LyapunovParams,
) -> Result<Vec<Option<f64>>> {
    let anchor = series.anchor.ok_or_else(|| {
        Error::Unsupported("decay condition not verified within the trajectory span".into())
    })?;
    let xs2 = series
        .x_star_norm2
        .ok_or_else(|| Error::Unsupported("minimum-norm solution unknown".into()))?;
    let lambda = params.lambda;
    // Integrand of the bound without the ‖x*‖²/2 prefactor.
    let integrand = |s: &LyapunovSample| -> f64 {
        let eps32 = s.epsilon.powf(1.5);
        (lambda * params.c + params.a) * lambda * s.eps_dot * s.eps_dot / eps32 - s.eps_dot
    };
    let e1 = series.samples[anchor].e;
    let mut out = vec![None; series.samples.len()];
    out[anchor] = Some(e1);
    let mut log_integral = f64::NEG_INFINITY;
    let mut prev_log_term = {
        let s = &series.samples[anchor];
        safe_ln(integrand(s)) + s.log_gamma
    };
    for (w, slot) in series.samples[anchor..]
        .windows(2)
        .zip(out[anchor + 1..].iter_mut())
    {
        let (prev, s) = (&w[0], &w[1]);
        let dt = s.t - prev.t;
        let log_term = safe_ln(integrand(s)) + s.log_gamma;
        let seg = (0.5 * dt).ln() + log_add_exp(prev_log_term, log_term);
        log_integral = log_add_exp(log_integral, seg);
        prev_log_term = log_term;
        let first = ((0.5 * xs2).ln() + log_integral - s.log_gamma).exp();
        let second = e1 * (-s.log_gamma).exp();
        *slot = Some(first + second);
    }
    Ok(out)
}

fn safe_ln(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Slacks of the two basic gap inequalities at one sample:
/// (E + (ε/2)‖x*‖² − (f(x) − min f), 2E/ε − ‖x − x_ε‖²).
pub fn lemma_basic_gaps(
    sample: &LyapunovSample,
    state: &DynamicsState,
    visc: &ViscosityPoint,
    obj: &Objective,
) -> Result<(f64, f64)> {
    let f_min = obj
        .known_min_value()
        .ok_or_else(|| Error::Unsupported("known minimum value required".into()))?;
    let xs = obj
        .known_min_norm_solution()
        .ok_or_else(|| Error::Unsupported("minimum-norm solution required".into()))?;
    let keybb = sample.e + 0.5 * sample.epsilon * xs.norm_squared() - (obj.value(&state.x) - f_min);
    let est = 2.0 * sample.e / sample.epsilon - (&state.x - &visc.point).norm_squared();
    Ok((keybb, est))
}
