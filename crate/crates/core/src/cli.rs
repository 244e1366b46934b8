//! Command-line surface: run/sweep experiments, parameter admissibility
//! reports, viscosity-curve and Moreau-envelope exports, and a built-in
//! closed-form oracle suite.
//!
//! Exit codes are a stable contract: 0 success, 1 check failure,
//! 2 configuration error.

use std::fs;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::dynamics::{
    integrate, DampingSchedule, RegularizationSchedule, SampleGrid, StepControl,
};
use crate::error::{Error, Result};
use crate::harness::{
    nonsmooth_experiment, resolve_lyapunov, run_experiment, tradeoff_sweep, trajectory_csv,
    write_run_outputs, write_tradeoff_outputs, ExperimentConfig, LyapunovChoice, RunBundle,
};
use crate::lyapunov::{admissible_lambda_interval, check_h1, LyapunovParams};
use crate::problem::by_id;
use crate::tikhonov::{
    moreau, quadratic_viscosity_direct, solve_viscosity_point_iterative, viscosity_curve,
    viscosity_curve_csv, SolveOptions,
};
use crate::util::fmt_g17;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILURE: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;

#[derive(Parser)]
#[command(
    name = "tikflow",
    version,
    about = "Inertial gradient dynamics with vanishing Tikhonov regularization"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the dynamics and run the full diagnostic suite
    Run(RunArgs),
    /// Run one experiment per exponent p and tabulate the rate trade-off
    Sweep(SweepArgs),
    /// Report the admissible lambda interval and the earliest valid t1
    CheckParams(CheckParamsArgs),
    /// Solve the regularization path and export it as CSV
    ViscosityCurve(ViscosityCurveArgs),
    /// Evaluate the Moreau envelope of a proximable problem
    Moreau(MoreauArgs),
    /// Run the built-in closed-form oracle suite
    Validate(ValidateArgs),
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Flat key = value configuration file; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in problem id (paper-quadratic-20, sc-quadratic, abs)
    #[arg(long)]
    problem: Option<String>,
    /// Power-law exponent of the regularization schedule
    #[arg(long)]
    p: Option<f64>,
    /// Power-law coefficient c0 of eps(t) = c0/t^p
    #[arg(long)]
    c0: Option<f64>,
    /// Origin of time (power laws are singular at 0)
    #[arg(long)]
    t0: Option<f64>,
    /// End of the integration span
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Damping strength delta
    #[arg(long)]
    delta: Option<f64>,
    /// Lyapunov lambda (defaults to the validated auto pack)
    #[arg(long)]
    lambda: Option<f64>,
    /// Lyapunov parameter a > 1
    #[arg(long)]
    a: Option<f64>,
    /// Lyapunov parameter c > 1
    #[arg(long)]
    c: Option<f64>,
    /// Moreau smoothing parameter for nonsmooth problems
    #[arg(long)]
    theta: Option<f64>,
    /// Initial position, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// Initial velocity, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    v0: Option<Vec<f64>>,
    /// Integrator relative tolerance
    #[arg(long = "rel-tol")]
    rel_tol: Option<f64>,
    /// Integrator absolute tolerance
    #[arg(long = "abs-tol")]
    abs_tol: Option<f64>,
    /// Abort threshold for the adaptive step size
    #[arg(long = "min-step")]
    min_step: Option<f64>,
    /// Number of log-spaced samples
    #[arg(long)]
    samples: Option<usize>,
    /// Fixed-step classical RK4 mode with the given step
    #[arg(long = "fixed-step")]
    fixed_step: Option<f64>,
    /// Output directory (default: runs/<command>-<unix time>)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Exponents to sweep, comma separated, each in (0, 2)
    #[arg(long = "p-list", value_delimiter = ',')]
    p_list: Option<Vec<f64>>,
}

#[derive(Args)]
struct CheckParamsArgs {
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    a: f64,
    #[arg(long, default_value_t = 10.0)]
    c: f64,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    #[arg(long, default_value_t = 1.0)]
    t0: f64,
    /// Latest admissible t1
    #[arg(long = "t-max", default_value_t = 1.0e6)]
    t_max: f64,
}

#[derive(Args)]
struct ViscosityCurveArgs {
    #[arg(long, default_value = "paper-quadratic-20")]
    problem: String,
    /// Strictly descending epsilon list, comma separated
    #[arg(long = "eps-list", value_delimiter = ',')]
    eps_list: Vec<f64>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Include the solution coordinates in the CSV
    #[arg(long)]
    coords: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MoreauArgs {
    #[arg(long, default_value = "abs")]
    problem: String,
    #[arg(long)]
    theta: f64,
    /// Evaluation point, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    /// One-dimensional evaluation grid lo,hi,n
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Print check names without running them
    #[arg(long)]
    list: bool,
    #[arg(long = "rel-tol")]
    rel_tol: Option<f64>,
    #[arg(long = "abs-tol")]
    abs_tol: Option<f64>,
}

/// Entry point returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version with success exits.
            let code = if e.use_stderr() { EXIT_CONFIG_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run_command(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::InvalidArgument { .. } => EXIT_CONFIG_ERROR,
                _ => EXIT_CHECK_FAILURE,
            }
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}

fn run_command(command: Command) -> Result<i32> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::CheckParams(args) => cmd_check_params(args),
        Command::ViscosityCurve(args) => cmd_viscosity_curve(args),
        Command::Moreau(args) => cmd_moreau(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn default_out_dir(kind: &str) -> PathBuf {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    PathBuf::from("runs").join(format!("{kind}-{stamp}"))
}

fn parse_num(key: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}` as a number")))
}

fn parse_vec(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| parse_num(key, v))
        .collect::<Result<Vec<_>>>()
}

/// Merge a flat key = value file under the flag overrides (flags win).
fn apply_config_file(common: &mut CommonArgs, p_list: &mut Option<Vec<f64>>) -> Result<()> {
    let Some(path) = common.config.clone() else {
        return Ok(());
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(
                "config",
                format!("line {} is not `key = value`: `{raw}`", lineno + 1),
            ));
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "problem" => fill(&mut common.problem, value.to_string()),
            "p" => fill(&mut common.p, parse_num(key, value)?),
            "c0" => fill(&mut common.c0, parse_num(key, value)?),
            "t0" => fill(&mut common.t0, parse_num(key, value)?),
            "t-end" => fill(&mut common.t_end, parse_num(key, value)?),
            "delta" => fill(&mut common.delta, parse_num(key, value)?),
            "lambda" => fill(&mut common.lambda, parse_num(key, value)?),
            "a" => fill(&mut common.a, parse_num(key, value)?),
            "c" => fill(&mut common.c, parse_num(key, value)?),
            "theta" => fill(&mut common.theta, parse_num(key, value)?),
            "x0" => fill(&mut common.x0, parse_vec(key, value)?),
            "v0" => fill(&mut common.v0, parse_vec(key, value)?),
            "rel-tol" => fill(&mut common.rel_tol, parse_num(key, value)?),
            "abs-tol" => fill(&mut common.abs_tol, parse_num(key, value)?),
            "min-step" => fill(&mut common.min_step, parse_num(key, value)?),
            "samples" => fill(
                &mut common.samples,
                value.parse::<usize>().map_err(|_| {
                    Error::config("samples", format!("cannot parse `{value}` as an integer"))
                })?,
            ),
            "fixed-step" => fill(&mut common.fixed_step, parse_num(key, value)?),
            "p-list" => fill(p_list, parse_vec(key, value)?),
            "out" => fill(&mut common.out, PathBuf::from(value)),
            other => {
                return Err(Error::config(
                    other,
                    "unknown configuration key".to_string(),
                ))
            }
        }
    }
    Ok(())
}

fn fill<T>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

/// Assemble and validate the effective experiment configuration.
fn build_config(common: &CommonArgs) -> Result<ExperimentConfig> {
    let defaults = ExperimentConfig::default();
    let p = common.p.unwrap_or(defaults.exponent_p);
    if !(p > 0.0 && p <= 2.0) {
        return Err(Error::config("p", "p must lie in (0, 2]"));
    }
    let delta = common.delta.unwrap_or(defaults.delta);
    let lyapunov = match common.lambda {
        Some(lambda) => LyapunovChoice::Explicit {
            lambda,
            a: common.a.unwrap_or(2.0),
            c: common.c.unwrap_or(10.0),
        },
        None => match (common.a, common.c) {
            (None, None) => LyapunovChoice::Auto,
            (a, c) => LyapunovChoice::Explicit {
                lambda: 0.6 * delta,
                a: a.unwrap_or(2.0),
                c: c.unwrap_or(10.0),
            },
        },
    };
    // Surface admissibility problems before any integration work.
    resolve_lyapunov(&lyapunov, delta).map_err(|e| match e {
        Error::InvalidArgument { name, reason } => Error::config(name, reason),
        other => other,
    })?;
    let problem = common.problem.clone().unwrap_or(defaults.problem);
    by_id(&problem)?;

    let mut control = StepControl::default();
    if let Some(v) = common.rel_tol {
        control.rel_tol = v;
    }
    if let Some(v) = common.abs_tol {
        control.abs_tol = v;
    }
    if let Some(v) = common.min_step {
        control.min_step = v;
    }
    if let Some(v) = common.samples {
        control.samples = v;
    }
    control.fixed_step = common.fixed_step;

    Ok(ExperimentConfig {
        problem,
        exponent_p: p,
        coefficient: common.c0.unwrap_or(defaults.coefficient),
        t0: common.t0.unwrap_or(defaults.t0),
        t_end: common.t_end.unwrap_or(defaults.t_end),
        delta,
        lyapunov,
        theta: common.theta,
        x0: common.x0.clone(),
        v0: common.v0.clone(),
        control,
    })
}

fn print_check_table(bundle: &RunBundle) {
    for c in &bundle.checks {
        let status = if c.skipped {
            "skip"
        } else if c.passed {
            "pass"
        } else {
            "FAIL"
        };
        println!("{:-<40} {} ({})", format!("{} ", c.name), status, c.detail);
    }
    for r in &bundle.rates {
        match (&r.estimate, r.target_exponent) {
            (Some(e), Some(t)) => println!(
                "rate {:-<30} slope {:+.4} (target {:+.4}, r2 {:.4})",
                format!("{} ", r.quantity),
                e.slope,
                t,
                e.r_squared
            ),
            (Some(e), None) => println!(
                "rate {:-<30} slope {:+.4} (no target, r2 {:.4})",
                format!("{} ", r.quantity),
                e.slope,
                e.r_squared
            ),
            (None, _) => println!(
                "rate {:-<30} unavailable ({})",
                format!("{} ", r.quantity),
                r.note.as_deref().unwrap_or("")
            ),
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<i32> {
    let mut common = args.common;
    let mut unused = None;
    apply_config_file(&mut common, &mut unused)?;
    let config = build_config(&common)?;
    let out_dir = common.out.clone().unwrap_or_else(|| default_out_dir("run"));

    let nonsmooth = !by_id(&config.problem)?.is_smooth();
    let outcome = if nonsmooth {
        nonsmooth_experiment(&config).map(|b| b.run)
    } else {
        run_experiment(&config)
    };
    match outcome {
        Ok(bundle) => {
            write_run_outputs(&bundle, &out_dir)?;
            print_check_table(&bundle);
            println!("outputs written to {}", out_dir.display());
            if bundle.all_passed() {
                Ok(EXIT_OK)
            } else {
                Ok(EXIT_CHECK_FAILURE)
            }
        }
        Err(failure) => {
            if failure.stage == "config" {
                return Err(failure.error);
            }
            // Partial outputs still get written.
            if let Some(partial) = &failure.partial_trajectory {
                fs::create_dir_all(&out_dir)?;
                fs::write(out_dir.join("trajectory.csv"), trajectory_csv(partial))?;
                eprintln!(
                    "partial trajectory ({} samples) written to {}",
                    partial.samples.len(),
                    out_dir.display()
                );
            }
            eprintln!("error: {failure}");
            Ok(EXIT_CHECK_FAILURE)
        }
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<i32> {
    let mut common = args.common;
    let mut p_list = args.p_list;
    apply_config_file(&mut common, &mut p_list)?;
    let base = build_config(&common)?;
    let ps = p_list.unwrap_or_else(|| vec![1.0 / 3.0, 0.5, 2.0 / 3.0, 0.9]);
    for &p in &ps {
        if !(p > 0.0 && p < 2.0) {
            return Err(Error::config("p-list", "sweep exponents must lie in (0, 2)"));
        }
    }
    let out_dir = common.out.clone().unwrap_or_else(|| default_out_dir("sweep"));
    eprintln!("[sweep] running {} experiments", ps.len());
    let sweep = tradeoff_sweep(&ps, &base);
    write_tradeoff_outputs(&sweep, &out_dir)?;
    let mut failures = 0;
    for row in &sweep.rows {
        match &row.error {
            None => println!(
                "p {:.4}: value slope {} (target -{:.4}), trajectory slope {} (target -{:.4})",
                row.p,
                row.value_slope.map_or("n/a".into(), |s| format!("{s:+.4}")),
                row.value_target_exponent,
                row.trajectory_slope.map_or("n/a".into(), |s| format!("{s:+.4}")),
                row.trajectory_target_exponent,
            ),
            Some(e) => {
                failures += 1;
                println!("p {:.4}: failed ({e})", row.p);
            }
        }
    }
    println!("tradeoff table written to {}", out_dir.display());
    Ok(if failures == 0 { EXIT_OK } else { EXIT_CHECK_FAILURE })
}

fn cmd_check_params(args: CheckParamsArgs) -> Result<i32> {
    if !(args.delta > 0.0) {
        return Err(Error::config("delta", "must be positive"));
    }
    let interval = admissible_lambda_interval(args.delta, args.a, args.c);
    match interval {
        Some((lo, hi)) => println!(
            "admissible lambda interval for delta={}, a={}, c={}: ({lo}, {hi})",
            args.delta, args.a, args.c
        ),
        None => {
            println!(
                "admissible lambda interval for delta={}, a={}, c={} is empty",
                args.delta, args.a, args.c
            );
            return Ok(EXIT_CHECK_FAILURE);
        }
    }
    let (lo, hi) = interval.unwrap();
    let lambda = args.lambda.unwrap_or(0.6 * args.delta);
    if lambda <= lo {
        let cond = if args.delta <= 2.0 - 1.0 / args.c {
            "lambda must exceed delta/2".to_string()
        } else {
            format!("lambda must exceed (delta + 1/c + sqrt((delta + 1/c)^2 - 4))/2 = {lo}")
        };
        println!("{cond} (got {lambda})");
        return Ok(EXIT_CHECK_FAILURE);
    }
    if lambda >= hi {
        println!("lambda must stay below a*delta/(a+1) = {hi} (got {lambda})");
        return Ok(EXIT_CHECK_FAILURE);
    }
    let params = LyapunovParams::new(args.delta, lambda, args.a, args.c)?;
    println!(
        "threshold min(2*lambda - delta, delta - (a+1)*lambda/a) = {}",
        params.h1_threshold()
    );
    let reg = RegularizationSchedule::power_law(args.c0, args.p, args.t0)?;
    match check_h1(&reg, &params, args.t_max) {
        Ok(t1) => {
            println!("decay condition holds from t1 = {t1}");
            Ok(EXIT_OK)
        }
        Err(e) => {
            println!("decay condition fails: {e}");
            Ok(EXIT_CHECK_FAILURE)
        }
    }
}

fn cmd_viscosity_curve(args: ViscosityCurveArgs) -> Result<i32> {
    let obj = by_id(&args.problem)?;
    if args.eps_list.is_empty() {
        return Err(Error::config("eps-list", "need at least one epsilon"));
    }
    let points = viscosity_curve(&obj, &args.eps_list, args.tol)?;
    let csv = viscosity_curve_csv(&points, obj.known_min_norm_solution(), args.coords);
    let out_dir = args.out.unwrap_or_else(|| default_out_dir("viscosity"));
    fs::create_dir_all(&out_dir)?;
    let path = out_dir.join("viscosity.csv");
    fs::write(&path, csv)?;
    for vp in &points {
        println!(
            "epsilon {:.6e}: norm {:.12}, residual {:.3e}, {} inner iterations",
            vp.epsilon,
            vp.point.norm(),
            vp.residual,
            vp.inner_iterations
        );
    }
    println!("curve written to {}", path.display());
    Ok(EXIT_OK)
}

fn cmd_moreau(args: MoreauArgs) -> Result<i32> {
    let obj = by_id(&args.problem)?;
    match (&args.x, &args.grid) {
        (Some(x), None) => {
            let point = DVector::from_vec(x.clone());
            if point.len() != obj.dimension() {
                return Err(Error::config(
                    "x",
                    format!("expected {} components", obj.dimension()),
                ));
            }
            let m = moreau(&obj, args.theta, &point)?;
            println!("envelope {}", fmt_g17(m.envelope_value));
            println!(
                "prox     [{}]",
                m.prox_point
                    .iter()
                    .map(|v| fmt_g17(*v))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            println!(
                "gradient [{}]",
                m.envelope_gradient
                    .iter()
                    .map(|v| fmt_g17(*v))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            Ok(EXIT_OK)
        }
        (None, Some(grid)) => {
            if obj.dimension() != 1 {
                return Err(Error::config("grid", "grids are one-dimensional"));
            }
            if grid.len() != 3 {
                return Err(Error::config("grid", "expected lo,hi,n"));
            }
            let (lo, hi, n) = (grid[0], grid[1], grid[2] as usize);
            if !(hi > lo) || n < 2 {
                return Err(Error::config("grid", "need lo < hi and n >= 2"));
            }
            let mut csv = String::from("x,envelope,prox,gradient\n");
            for k in 0..n {
                let x = lo + (hi - lo) * k as f64 / (n - 1) as f64;
                let m = moreau(&obj, args.theta, &DVector::from_element(1, x))?;
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_g17(x),
                    fmt_g17(m.envelope_value),
                    fmt_g17(m.prox_point[0]),
                    fmt_g17(m.envelope_gradient[0]),
                ));
            }
            let out_dir = args.out.unwrap_or_else(|| default_out_dir("moreau"));
            fs::create_dir_all(&out_dir)?;
            let path = out_dir.join("moreau.csv");
            fs::write(&path, csv)?;
            println!("envelope table written to {}", path.display());
            Ok(EXIT_OK)
        }
        _ => Err(Error::config("x", "give exactly one of --x or --grid")),
    }
}

const VALIDATE_CHECKS: [&str; 4] = [
    "critically-damped-oscillator",
    "viscosity-closed-form",
    "huber-envelope",
    "integrator-order",
];

fn cmd_validate(args: ValidateArgs) -> Result<i32> {
    if args.list {
        for name in VALIDATE_CHECKS {
            println!("{name}");
        }
        return Ok(EXIT_OK);
    }
    let mut control = StepControl::default();
    if let Some(v) = args.rel_tol {
        control.rel_tol = v;
    }
    if let Some(v) = args.abs_tol {
        control.abs_tol = v;
    }
    let mut all_ok = true;
    for name in VALIDATE_CHECKS {
        let outcome = run_validation_check(name, &control);
        let (ok, detail) = match outcome {
            Ok(detail) => (true, detail),
            Err(detail) => (false, detail),
        };
        all_ok &= ok;
        println!(
            "{:-<34} {} ({detail})",
            format!("{name} "),
            if ok { "pass" } else { "FAIL" }
        );
    }
    Ok(if all_ok { EXIT_OK } else { EXIT_CHECK_FAILURE })
}

/// Closed-form oracle suite. Each check returns a detail string either way.
fn run_validation_check(
    name: &str,
    control: &StepControl,
) -> std::result::Result<String, String> {
    match name {
        "critically-damped-oscillator" => {
            let obj = by_id("sc-quadratic").map_err(|e| e.to_string())?;
            // Use only the mu = 1 coordinate: start on the slow eigenvector.
            let reg = RegularizationSchedule::zero(0.0);
            let damping = DampingSchedule::constant(2.0).map_err(|e| e.to_string())?;
            // Two samples only: forced sample points would clamp the step
            // size and mask a degraded tolerance.
            let control = StepControl {
                grid: SampleGrid::Linear,
                samples: 2,
                fixed_step: None,
                ..control.clone()
            };
            let traj = integrate(
                &obj,
                &damping,
                &reg,
                &DVector::from_vec(vec![1.0, 0.0]),
                &DVector::from_vec(vec![-1.0, 0.0]),
                0.0,
                5.0,
                &control,
            )
            .map_err(|e| e.to_string())?;
            let got = traj.samples.last().unwrap().x[0];
            let want = (-5.0f64).exp();
            let err = (got - want).abs();
            if err <= 1e-6 {
                Ok(format!("terminal error {err:.3e}"))
            } else {
                Err(format!("terminal error {err:.3e} exceeds 1e-6"))
            }
        }
        "viscosity-closed-form" => {
            let obj = by_id("paper-quadratic-20").map_err(|e| e.to_string())?;
            let mut worst: f64 = 0.0;
            for eps in [1.0, 0.1, 0.01] {
                let want = DVector::from_element(20, 1.0 / (2.0 + eps));
                let direct = quadratic_viscosity_direct(&obj, eps).map_err(|e| e.to_string())?;
                let iter =
                    solve_viscosity_point_iterative(&obj, eps, &SolveOptions::with_tol(1e-12))
                        .map_err(|e| e.to_string())?;
                worst = worst
                    .max((direct - &want).norm())
                    .max((iter.point - &want).norm());
            }
            if worst <= 1e-8 {
                Ok(format!("max deviation {worst:.3e}"))
            } else {
                Err(format!("max deviation {worst:.3e} exceeds 1e-8"))
            }
        }
        "huber-envelope" => {
            let obj = by_id("abs").map_err(|e| e.to_string())?;
            let huber = |x: f64| {
                if x.abs() <= 1.0 {
                    0.5 * x * x
                } else {
                    x.abs() - 0.5
                }
            };
            let mut worst: f64 = 0.0;
            for k in 0..100 {
                let x = -5.0 + 10.0 * k as f64 / 99.0;
                let m = moreau(&obj, 1.0, &DVector::from_element(1, x))
                    .map_err(|e| e.to_string())?;
                worst = worst.max((m.envelope_value - huber(x)).abs());
            }
            if worst <= 1e-12 {
                Ok(format!("max deviation {worst:.3e}"))
            } else {
                Err(format!("max deviation {worst:.3e} exceeds 1e-12"))
            }
        }
        "integrator-order" => {
            let obj = by_id("sc-quadratic").map_err(|e| e.to_string())?;
            let reg = RegularizationSchedule::zero(0.0);
            let damping = DampingSchedule::constant(2.0).map_err(|e| e.to_string())?;
            let want = (-5.0f64).exp();
            let mut errors = Vec::new();
            for h in [0.1, 0.05, 0.025] {
                let control = StepControl {
                    fixed_step: Some(h),
                    grid: SampleGrid::Linear,
                    samples: 2,
                    ..control.clone()
                };
                let traj = integrate(
                    &obj,
                    &damping,
                    &reg,
                    &DVector::from_vec(vec![1.0, 0.0]),
                    &DVector::from_vec(vec![-1.0, 0.0]),
                    0.0,
                    5.0,
                    &control,
                )
                .map_err(|e| e.to_string())?;
                errors.push((traj.samples.last().unwrap().x[0] - want).abs());
            }
            let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
            let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
            if min_order >= 3.7 {
                Ok(format!("measured order {min_order:.2}"))
            } else {
                Err(format!("measured order {min_order:.2} below 3.7"))
            }
        }
        other => Err(format!("unknown check {other}")),
    }
}
