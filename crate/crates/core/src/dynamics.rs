//! Regularization/damping schedules and the second-order dynamics
//! ẍ + γ(t)ẋ + ∇f(x) + ε(t)x = 0, integrated in first-order form
//! (ẋ = y, ẏ = −γ(t)y − ∇f(x) − ε(t)x).
//!
//! The integrator is an embedded Dormand–Prince 5(4) pair with per-step
//! tolerance control, plus a fixed-step classical RK4 mode used by the
//! order-verification checks.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::{make_strongly_convex_quadratic, Objective, Point};
use crate::util::{linear_fit, linear_grid, log_grid};

/// ε(t) families: exact power law c₀/tᵖ, constant, or identically zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegularizationSchedule {
    PowerLaw {
        coefficient: f64,
        exponent: f64,
        t_start: f64,
    },
    Constant {
        epsilon0: f64,
        t_start: f64,
    },
    Zero {
        t_start: f64,
    },
}

impl RegularizationSchedule {
    /// ε(t) = c₀/tᵖ with p ∈ (0, 2]. Power laws are singular at 0, so
    /// t_start must be positive (default 1, normalizing ε(t₀) = c₀).
    pub fn power_law(coefficient: f64, exponent: f64, t_start: f64) -> Result<Self> {
        if !(coefficient > 0.0) || !coefficient.is_finite() {
            return Err(Error::invalid("c0", "must be positive and finite"));
        }
        if !(exponent > 0.0 && exponent <= 2.0) {
            return Err(Error::invalid("p", "p must lie in (0, 2]"));
        }
        if !(t_start > 0.0) {
            return Err(Error::invalid("t0", "must be positive for power-law schedules"));
        }
        Ok(RegularizationSchedule::PowerLaw {
            coefficient,
            exponent,
            t_start,
        })
    }

    pub fn constant(epsilon0: f64, t_start: f64) -> Result<Self> {
        if !(epsilon0 >= 0.0) || !epsilon0.is_finite() {
            return Err(Error::invalid("epsilon0", "must be nonnegative and finite"));
        }
        Ok(RegularizationSchedule::Constant { epsilon0, t_start })
    }

    pub fn zero(t_start: f64) -> Self {
        RegularizationSchedule::Zero { t_start }
    }

    pub fn t_start(&self) -> f64 {
        match *self {
            RegularizationSchedule::PowerLaw { t_start, .. }
            | RegularizationSchedule::Constant { t_start, .. }
            | RegularizationSchedule::Zero { t_start } => t_start,
        }
    }

    pub fn eps(&self, t: f64) -> f64 {
        match *self {
            RegularizationSchedule::PowerLaw {
                coefficient,
                exponent,
                ..
            } => coefficient / t.powf(exponent),
            RegularizationSchedule::Constant { epsilon0, .. } => epsilon0,
            RegularizationSchedule::Zero { .. } => 0.0,
        }
    }

    pub fn eps_dot(&self, t: f64) -> f64 {
        match *self {
            RegularizationSchedule::PowerLaw {
                coefficient,
                exponent,
                ..
            } => -exponent * coefficient / t.powf(exponent + 1.0),
            _ => 0.0,
        }
    }

    pub fn as_power_law(&self) -> Option<(f64, f64)> {
        match *self {
            RegularizationSchedule::PowerLaw {
                coefficient,
                exponent,
                ..
            } => Some((coefficient, exponent)),
            _ => None,
        }
    }

    /// d/dt (1/√ε(t)), the growth quantity bounded by the decay conditions.
    /// Zero for constant schedules, undefined (infinite) for the zero
    /// schedule.
    pub fn inv_sqrt_eps_derivative(&self, t: f64) -> f64 {
        match *self {
            RegularizationSchedule::PowerLaw {
                coefficient,
                exponent,
                ..
            } => 0.5 * exponent * t.powf(0.5 * exponent - 1.0) / coefficient.sqrt(),
            RegularizationSchedule::Constant { .. } => 0.0,
            RegularizationSchedule::Zero { .. } => f64::INFINITY,
        }
    }
}

/// Viscous damping coefficient γ(t): δ√ε(t) slaved to the regularization
/// schedule, a plain constant (heavy ball), or α/t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DampingSchedule {
    SqrtReg {
        delta: f64,
        schedule: RegularizationSchedule,
    },
    Constant {
        gamma: f64,
    },
    Avd {
        alpha: f64,
    },
}

impl DampingSchedule {
    pub fn sqrt_reg(delta: f64, schedule: RegularizationSchedule) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid("delta", "must be positive and finite"));
        }
        Ok(DampingSchedule::SqrtReg { delta, schedule })
    }

    pub fn constant(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid("gamma", "must be positive and finite"));
        }
        Ok(DampingSchedule::Constant { gamma })
    }

    pub fn avd(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid("alpha", "must be positive and finite"));
        }
        Ok(DampingSchedule::Avd { alpha })
    }

    pub fn coefficient(&self, t: f64) -> f64 {
        match *self {
            DampingSchedule::SqrtReg { delta, schedule } => delta * schedule.eps(t).sqrt(),
            DampingSchedule::Constant { gamma } => gamma,
            DampingSchedule::Avd { alpha } => alpha / t,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DynamicsState {
    pub t: f64,
    pub x: Point,
    pub v: Point,
}

#[derive(Debug, Clone, Default)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected_steps: usize,
    pub step_sizes: Vec<f64>,
    /// Largest accepted scaled local error estimate (≤ 1 under tolerance).
    pub max_error_estimate: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<DynamicsState>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleGrid {
    Log,
    Linear,
}

#[derive(Debug, Clone)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub min_step: f64,
    pub samples: usize,
    /// Some(h) switches to the fixed-step classical RK4 mode.
    pub fixed_step: Option<f64>,
    pub grid: SampleGrid,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            min_step: 1e-12,
            samples: 400,
            fixed_step: None,
            grid: SampleGrid::Log,
            max_steps: 20_000_000,
        }
    }
}

/// Right-hand side of the first-order system: dx = v,
/// dv = −γ(t)v − ∇f(x) − ε(t)x.
pub fn rhs(
    obj: &Objective,
    damping: &DampingSchedule,
    reg: &RegularizationSchedule,
    state: &DynamicsState,
) -> Result<(Point, Point)> {
    if state.t < reg.t_start() {
        return Err(Error::BeforeScheduleStart {
            t: state.t,
            t_start: reg.t_start(),
        });
    }
    if state.x.len() != obj.dimension() || state.v.len() != obj.dimension() {
        return Err(Error::DimensionMismatch {
            expected: obj.dimension(),
            got: state.x.len(),
        });
    }
    let grad = obj.gradient(&state.x)?;
    let eps = reg.eps(state.t);
    let gamma = damping.coefficient(state.t);
    let dv = -&state.v * gamma - grad - &state.x * eps;
    Ok((state.v.clone(), dv))
}

/// Integration failure carrying whatever samples were produced before
/// the abort.
#[derive(Debug)]
pub struct IntegrationError {
    pub error: Error,
    pub partial: Box<Trajectory>,
}

impl std::fmt::Display for IntegrationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (partial trajectory with {} samples)",
            self.error,
            self.partial.samples.len()
        )
    }
}

impl std::error::Error for IntegrationError {}

struct Dopri5 {
    a: [[f64; 6]; 6],
    c: [f64; 6],
    b5: [f64; 7],
    err: [f64; 7],
}

const DP: Dopri5 = Dopri5 {
    a: [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ],
    c: [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0],
    b5: [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ],
    err: [
        35.0 / 384.0 - 5179.0 / 57600.0,
        0.0,
        500.0 / 1113.0 - 7571.0 / 16695.0,
        125.0 / 192.0 - 393.0 / 640.0,
        -2187.0 / 6784.0 + 92097.0 / 339200.0,
        11.0 / 84.0 - 187.0 / 2100.0,
        -1.0 / 40.0,
    ],
};

/// Integrate from (x0, v0) at t0 up to t_end, sampling on the control's
/// grid. Sample times are hit exactly by clamping steps; the first sample
/// is the initial condition verbatim.
#[allow(clippy::too_many_arguments)]
pub fn integrate(
    obj: &Objective,
    damping: &DampingSchedule,
    reg: &RegularizationSchedule,
    x0: &Point,
    v0: &Point,
    t0: f64,
    t_end: f64,
    control: &StepControl,
) -> std::result::Result<Trajectory, IntegrationError> {
    let fail_empty = |error: Error| IntegrationError {
        error,
        partial: Box::new(Trajectory {
            samples: vec![],
            stats: IntegratorStats::default(),
        }),
    };
    if !obj.is_smooth() {
        return Err(fail_empty(Error::GradientUnavailable));
    }
    if x0.len() != obj.dimension() || v0.len() != obj.dimension() {
        return Err(fail_empty(Error::DimensionMismatch {
            expected: obj.dimension(),
            got: x0.len(),
        }));
    }
    if t_end < t0 {
        return Err(fail_empty(Error::invalid("t_end", "must be >= t0")));
    }
    if t0 < reg.t_start() {
        return Err(fail_empty(Error::BeforeScheduleStart {
            t: t0,
            t_start: reg.t_start(),
        }));
    }

    let n = obj.dimension();
    let sample_times = match control.grid {
        SampleGrid::Log => {
            if t0 <= 0.0 {
                return Err(fail_empty(Error::invalid(
                    "t0",
                    "log-spaced sampling needs t0 > 0; use a linear grid",
                )));
            }
            log_grid(t0, t_end, control.samples)
        }
        SampleGrid::Linear => linear_grid(t0, t_end, control.samples),
    };

    // Stacked state (x; v) so the stage arithmetic is uniform.
    let stack = |x: &Point, v: &Point| {
        let mut y = DVector::zeros(2 * n);
        y.rows_mut(0, n).copy_from(x);
        y.rows_mut(n, n).copy_from(v);
        y
    };
    let split = |y: &DVector<f64>, t: f64| DynamicsState {
        t,
        x: y.rows(0, n).into_owned(),
        v: y.rows(n, n).into_owned(),
    };
    let deriv = |t: f64, y: &DVector<f64>| -> DVector<f64> {
        let x = y.rows(0, n);
        let v = y.rows(n, n);
        let grad = obj
            .gradient(&x.into_owned())
            .expect("smoothness checked before integration");
        let eps = reg.eps(t);
        let gamma = damping.coefficient(t);
        let mut dy = DVector::zeros(2 * n);
        dy.rows_mut(0, n).copy_from(&v);
        let dv = -v * gamma - grad - x * eps;
        dy.rows_mut(n, n).copy_from(&dv);
        dy
    };

    let mut samples = Vec::with_capacity(sample_times.len());
    let mut stats = IntegratorStats::default();
    samples.push(DynamicsState {
        t: t0,
        x: x0.clone(),
        v: v0.clone(),
    });
    if sample_times.len() == 1 {
        return Ok(Trajectory { samples, stats });
    }

    let mut t = t0;
    let mut y = stack(x0, v0);
    let mut h = match control.fixed_step {
        Some(h) => {
            if !(h > 0.0) {
                return Err(fail_empty(Error::invalid("fixed_step", "must be positive")));
            }
            h
        }
        None => ((t_end - t0) * 0.01).min(0.1).max(control.min_step),
    };
    let mut k1 = deriv(t, &y);
    let mut next_sample = 1usize;

    let fail = |error: Error, samples: Vec<DynamicsState>, stats: IntegratorStats| {
        IntegrationError {
            error,
            partial: Box::new(Trajectory { samples, stats }),
        }
    };

    while next_sample < sample_times.len() {
        if stats.steps + stats.rejected_steps >= control.max_steps {
            return Err(fail(
                Error::StepBudgetExhausted {
                    t,
                    max_steps: control.max_steps,
                },
                samples,
                stats,
            ));
        }
        let target = sample_times[next_sample];
        let gap = target - t;
        // Absorb float drift: a step landing within a relative hair of the
        // sample time is clamped onto it.
        let clamped = h >= gap - 1e-9 * h;
        let h_eff = if clamped { gap } else { h };
        if h_eff < control.min_step {
            return Err(fail(
                Error::StepSizeUnderflow {
                    t,
                    h: h_eff,
                    min_step: control.min_step,
                },
                samples,
                stats,
            ));
        }

        let (y_new, err_norm, k_last) = match control.fixed_step {
            Some(_) => (rk4_step(&deriv, t, &y, h_eff, &k1), 0.0, None),
            None => {
                let mut k = [(); 7].map(|_| DVector::<f64>::zeros(2 * n));
                k[0] = k1.clone();
                for stage in 0..6 {
                    let mut ys = y.clone();
                    for (j, kj) in k.iter().enumerate().take(stage + 1) {
                        let a = DP.a[stage][j];
                        if a != 0.0 {
                            ys += kj * (a * h_eff);
                        }
                    }
                    k[stage + 1] = deriv(t + DP.c[stage] * h_eff, &ys);
                }
                let mut y5 = y.clone();
                let mut err_vec = DVector::zeros(2 * n);
                for (j, kj) in k.iter().enumerate() {
                    if DP.b5[j] != 0.0 {
                        y5 += kj * (DP.b5[j] * h_eff);
                    }
                    if DP.err[j] != 0.0 {
                        err_vec += kj * (DP.err[j] * h_eff);
                    }
                }
                let mut acc = 0.0;
                for i in 0..2 * n {
                    let scale = control.abs_tol + control.rel_tol * y[i].abs().max(y5[i].abs());
                    let e = err_vec[i] / scale;
                    acc += e * e;
                }
                let err_norm = (acc / (2 * n) as f64).sqrt();
                let [.., k7] = k;
                (y5, err_norm, Some(k7))
            }
        };

        if !err_norm.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            return Err(fail(Error::NonFiniteState { t }, samples, stats));
        }
        let accepted = control.fixed_step.is_some() || err_norm <= 1.0;
        if accepted {
            t = if clamped { target } else { t + h_eff };
            y = y_new;
            stats.steps += 1;
            stats.step_sizes.push(h_eff);
            stats.max_error_estimate = stats.max_error_estimate.max(err_norm);
            // FSAL: the seventh Dormand-Prince stage is the derivative at
            // the accepted point; fixed-step RK4 recomputes it.
            k1 = match k_last {
                Some(k7) => k7,
                None => deriv(t, &y),
            };
            if clamped {
                samples.push(split(&y, t));
                next_sample += 1;
            }
            if control.fixed_step.is_none() {
                let grow = if err_norm > 0.0 {
                    (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
                } else {
                    5.0
                };
                let proposal = (h_eff * grow).max(control.min_step);
                h = if clamped { h.max(proposal) } else { proposal };
            }
        } else {
            stats.rejected_steps += 1;
            let shrink = (0.9 * err_norm.powf(-0.2)).clamp(0.2, 1.0);
            h = h_eff * shrink;
            if h < control.min_step {
                return Err(fail(
                    Error::StepSizeUnderflow {
                        t,
                        h,
                        min_step: control.min_step,
                    },
                    samples,
                    stats,
                ));
            }
        }
    }

    Ok(Trajectory { samples, stats })
}

fn rk4_step<F: Fn(f64, &DVector<f64>) -> DVector<f64>>(
    deriv: &F,
    t: f64,
    y: &DVector<f64>,
    h: f64,
    k1: &DVector<f64>,
) -> DVector<f64> {
    let k2 = deriv(t + 0.5 * h, &(y + k1 * (0.5 * h)));
    let k3 = deriv(t + 0.5 * h, &(y + &k2 * (0.5 * h)));
    let k4 = deriv(t + h, &(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

#[derive(Debug, Clone)]
pub struct RateProbe {
    /// Least-squares slope of log(f − min f) versus t.
    pub rate: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Values within this margin of the known minimum are at the double
/// rounding floor and are dropped from rate fits.
pub const VALUE_FLOOR: f64 = 1e-14;

/// Integrate ẍ + 2√μ ẋ + ∇f(x) = 0 on a one-dimensional quadratic with
/// modulus μ from x₀ = 1, v₀ = 0 and fit the exponential value-decay rate
/// over the last half of the floor-truncated span.
pub fn heavy_ball_rate_probe(mu: f64, t_span: (f64, f64)) -> Result<RateProbe> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::invalid("mu", "must be positive and finite"));
    }
    let (t0, t_end) = t_span;
    if !(t_end > t0) {
        return Err(Error::invalid("t_span", "must be nonempty"));
    }
    let obj = make_strongly_convex_quadratic(
        nalgebra::DMatrix::from_element(1, 1, mu),
        DVector::zeros(1),
    )?;
    let damping = DampingSchedule::constant(2.0 * mu.sqrt())?;
    let reg = RegularizationSchedule::zero(t0);
    let control = StepControl {
        samples: 801,
        grid: SampleGrid::Linear,
        ..Default::default()
    };
    let traj = integrate(
        &obj,
        &damping,
        &reg,
        &DVector::from_element(1, 1.0),
        &DVector::zeros(1),
        t0,
        t_end,
        &control,
    )
    .map_err(|e| e.error)?;

    // Truncate where f − min reaches the rounding floor, then fit over the
    // last half of what survives.
    let usable: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .map(|s| (s.t, obj.value(&s.x)))
        .take_while(|&(_, v)| v > VALUE_FLOOR)
        .collect();
    let t_last = usable
        .last()
        .ok_or(Error::InsufficientData {
            usable: 0,
            needed: 10,
        })?
        .0;
    let t_lo = t0 + 0.5 * (t_last - t0);
    let pts: Vec<(f64, f64)> = usable.into_iter().filter(|&(t, _)| t >= t_lo).collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientData {
            usable: pts.len(),
            needed: 10,
        });
    }
    let ts: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let logs: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, _, _) = linear_fit(&ts, &logs);
    Ok(RateProbe {
        rate: slope,
        window: (t_lo, t_last),
        points: pts.len(),
    })
}

/// Global energy W(t) = ½‖ẋ‖² + f(x) + ½ε(t)‖x‖², nonincreasing along
/// trajectories.
pub fn global_energy(obj: &Objective, reg: &RegularizationSchedule, state: &DynamicsState) -> f64 {
    0.5 * state.v.norm_squared() + obj.value(&state.x) + 0.5 * reg.eps(state.t) * state.x.norm_squared()
}

/// Trapezoidal ∫ √ε ‖ẋ‖² dt over the trajectory samples.
pub fn damping_energy_integral(reg: &RegularizationSchedule, traj: &Trajectory) -> f64 {
    let mut acc = 0.0;
    for w in traj.samples.windows(2) {
        let f0 = reg.eps(w[0].t).sqrt() * w[0].v.norm_squared();
        let f1 = reg.eps(w[1].t).sqrt() * w[1].v.norm_squared();
        acc += 0.5 * (w[1].t - w[0].t) * (f0 + f1);
    }
    acc
}
