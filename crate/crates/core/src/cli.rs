//! The `sphere-flow` command line: every command writes CSV to `--out` or stdout.
//!
//! Exit status is 0 on success, 1 when the arguments are invalid and 2 when a
//! solver or I/O step fails.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use thiserror::Error;

use crate::analytic::{evolve_trajectory, vanishing_time, FlowError, FlowParams};
use crate::inverse::{fit_linear, fit_nonlinear, FitError, FitResult};
use crate::levelset::{evolve_detailed, GridSpec, LevelSetError, DEFAULT_SAFETY};
use crate::trajectory::{fmt_f64, RadiusTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Closed-form radius sampled every `--dt-sample`.
    Analytic,
    /// Level-set run compared against the closed form.
    Levelset,
    /// Vanishing time of the sphere.
    Vanish,
    /// Fit `(a, b)` to the trajectory in `--in`.
    Invert,
    /// Level-set error at `n/4`, `n/2` and `n` cells per axis.
    Convergence,
    /// `dr/dt` against `r`.
    Phase,
}

#[derive(Debug, Clone, PartialEq, Parser)]
#[command(
    name = "sphere-flow",
    version,
    about = "Sphere radius under advection and mean curvature flow"
)]
pub struct RunConfig {
    #[arg(long = "cmd", value_enum)]
    pub command: Command,
    /// Initial radius.
    #[arg(long, default_value_t = 9.0, allow_negative_numbers = true)]
    pub r0: f64,
    /// Advection rate.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub a: f64,
    /// Curvature rate, at least zero.
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, default_value_t = 15.0, allow_negative_numbers = true)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub dt_sample: f64,
    /// Cells per axis for the level-set commands.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Half-width of the level-set domain; by default twice the largest radius reached.
    #[arg(long, allow_negative_numbers = true)]
    pub extent: Option<f64>,
    /// Input trajectory CSV with header `t,r`.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long = "out")]
    pub output: Option<PathBuf>,
    /// Also write the final level-set field here as a binary snapshot.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid arguments: {0}")]
    Invalid(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Invalid(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<LevelSetError> for CliError {
    fn from(e: LevelSetError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

impl RunConfig {
    /// Parses and validates command-line arguments (the first item is the program name).
    pub fn from_args<I, T>(args: I) -> Result<Self, CliError>
    where
        I: IntoIterator<Item = T>,
        T: Into<OsString> + Clone,
    {
        let config = Self::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for (name, v) in [
            ("r0", self.r0),
            ("a", self.a),
            ("b", self.b),
            ("t-end", self.t_end),
            ("dt-sample", self.dt_sample),
        ] {
            if !v.is_finite() {
                return Err(invalid(format!("--{name} must be finite, got {v}")));
            }
        }
        if self.b < 0.0 {
            return Err(invalid(format!("--b must be non-negative, got {}", self.b)));
        }
        let uses_flow = !matches!(self.command, Command::Invert);
        if uses_flow && self.r0 <= 0.0 {
            return Err(invalid(format!("--r0 must be positive, got {}", self.r0)));
        }
        let sampled = matches!(self.command, Command::Analytic | Command::Levelset);
        if sampled && self.dt_sample <= 0.0 {
            return Err(invalid(format!(
                "--dt-sample must be positive, got {}",
                self.dt_sample
            )));
        }
        let timed = matches!(
            self.command,
            Command::Analytic | Command::Levelset | Command::Convergence
        );
        if timed && self.t_end < 0.0 {
            return Err(invalid(format!(
                "--t-end must be non-negative, got {}",
                self.t_end
            )));
        }
        if matches!(self.command, Command::Levelset | Command::Convergence) {
            let least = if self.command == Command::Convergence {
                32
            } else {
                8
            };
            if self.n < least {
                return Err(invalid(format!(
                    "--n must be at least {least}, got {}",
                    self.n
                )));
            }
            if let Some(e) = self.extent {
                if !(e.is_finite() && e > 0.0) {
                    return Err(invalid(format!("--extent must be positive, got {e}")));
                }
            }
        } else if self.extent.is_some() {
            return Err(invalid("--extent only applies to levelset and convergence"));
        }
        if self.snapshot.is_some() && self.command != Command::Levelset {
            return Err(invalid("--snapshot only applies to levelset"));
        }
        match (self.command, &self.input) {
            (Command::Invert, None) => Err(invalid("invert needs --in")),
            (Command::Invert, Some(_)) | (_, None) => Ok(()),
            (_, Some(_)) => Err(invalid("--in only applies to invert")),
        }
    }

    fn params(&self) -> Result<FlowParams, CliError> {
        FlowParams::new(self.a, self.b).map_err(|e| invalid(e.to_string()))
    }
}

/// `0, dt, 2dt, …` below `t_end`, then `t_end` itself, with `extra` merged in.
fn sample_times(t_end: f64, dt: f64, extra: Option<f64>) -> Vec<f64> {
    let mut times: Vec<f64> = (0..)
        .map(|k| k as f64 * dt)
        .take_while(|&t| t < t_end * (1.0 - 1e-12))
        .collect();
    if times.is_empty() {
        times.push(0.0);
    }
    if t_end > 0.0 {
        times.push(t_end);
    }
    if let Some(x) = extra.filter(|&x| x > 0.0 && x < t_end) {
        let at = times.partition_point(|&t| t < x);
        if times[at] != x {
            times.insert(at, x);
        }
    }
    times
}

fn finite_vanish(params: FlowParams, r0: f64) -> Result<Option<f64>, FlowError> {
    if params.a() == 0.0 && params.b() == 0.0 {
        return Ok(None);
    }
    Ok(vanishing_time(params, r0)?.finite())
}

/// Default level-set half-width: twice the largest radius the closed form reaches.
fn auto_extent(params: FlowParams, r0: f64, t_end: f64) -> Result<f64, FlowError> {
    let ends = evolve_trajectory(params, r0, &[0.0, t_end.max(f64::MIN_POSITIVE)])?;
    Ok(2.0 * ends.radii().fold(0.0f64, f64::max))
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::Writer::from_writer(out)
}

fn write_fit<W: Write>(out: W, fit: &FitResult) -> Result<(), CliError> {
    let mut wtr = csv_writer(out);
    wtr.write_record(["a", "b", "residual", "condition", "warning"])?;
    wtr.write_record([
        fmt_f64(fit.params.a()),
        fmt_f64(fit.params.b()),
        fmt_f64(fit.residual),
        fmt_f64(fit.condition),
        fit.dominant_term_warning.to_string(),
    ])?;
    wtr.flush()?;
    Ok(())
}

/// Level-set error `|r_numeric(t_end) - r_analytic(t_end)|` at `n` cells per axis.
fn levelset_error(
    config: &RunConfig,
    params: FlowParams,
    n: usize,
    extent: f64,
) -> Result<f64, CliError> {
    let spec = GridSpec::new(n, extent)?;
    let every = if config.t_end > 0.0 {
        config.t_end
    } else {
        1.0
    };
    let run = evolve_detailed(
        spec,
        [0.0; 3],
        config.r0,
        params,
        config.t_end,
        every,
        DEFAULT_SAFETY,
    )?;
    let (t, r) = run.trajectory.last();
    let exact = if t > 0.0 {
        evolve_trajectory(params, config.r0, &[0.0, t])?.last().1
    } else {
        config.r0
    };
    Ok((r - exact).abs())
}

/// Runs `config`, writing its CSV to `out`.
pub fn run_to<W: Write>(config: &RunConfig, out: W) -> Result<(), CliError> {
    let params = config.params()?;
    match config.command {
        Command::Analytic => {
            let tv = finite_vanish(params, config.r0)?;
            let times = sample_times(config.t_end, config.dt_sample, tv);
            evolve_trajectory(params, config.r0, &times)?
                .write_csv(out)
                .map_err(|e| CliError::Runtime(e.to_string()))
        }
        Command::Levelset => {
            let extent = match config.extent {
                Some(e) => e,
                None => auto_extent(params, config.r0, config.t_end)?,
            };
            let spec = GridSpec::new(config.n, extent)?;
            let run = evolve_detailed(
                spec,
                [0.0; 3],
                config.r0,
                params,
                config.t_end,
                config.dt_sample,
                DEFAULT_SAFETY,
            )?;
            let times: Vec<f64> = run.trajectory.times().collect();
            let exact = evolve_trajectory(params, config.r0, &times)?;
            let mut wtr = csv_writer(out);
            wtr.write_record(["t", "r_numeric", "r_analytic", "abs_error"])?;
            for (&(t, r), r_exact) in run.trajectory.samples().iter().zip(exact.radii()) {
                wtr.write_record([
                    fmt_f64(t),
                    fmt_f64(r),
                    fmt_f64(r_exact),
                    fmt_f64((r - r_exact).abs()),
                ])?;
            }
            wtr.flush()?;
            if let Some(path) = &config.snapshot {
                run.field
                    .write_snapshot(BufWriter::new(File::create(path)?))?;
            }
            Ok(())
        }
        Command::Vanish => {
            let value = match finite_vanish(params, config.r0)? {
                Some(t) => fmt_f64(t),
                None => "inf".to_string(),
            };
            let mut out = out;
            writeln!(out, "vanishing_time,{value}")?;
            out.flush()?;
            Ok(())
        }
        Command::Invert => {
            let path = config.input.as_ref().expect("validated");
            let file = File::open(path)
                .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
            let traj =
                RadiusTrajectory::read_csv(file).map_err(|e| CliError::Runtime(e.to_string()))?;
            invert(&traj, out)
        }
        Command::Convergence => {
            let extent = match config.extent {
                Some(e) => e,
                None => auto_extent(params, config.r0, config.t_end)?,
            };
            let mut wtr = csv_writer(out);
            wtr.write_record(["n", "h", "error", "observed_order"])?;
            let mut prev: Option<(f64, f64)> = None;
            for n in [config.n / 4, config.n / 2, config.n] {
                let h = 2.0 * extent / n as f64;
                let err = levelset_error(config, params, n, extent)?;
                let order = match prev {
                    Some((h0, e0)) if err > 0.0 && e0 > 0.0 => {
                        fmt_f64((e0 / err).ln() / (h0 / h).ln())
                    }
                    _ => String::new(),
                };
                wtr.write_record([n.to_string(), fmt_f64(h), fmt_f64(err), order])?;
                prev = Some((h, err));
            }
            wtr.flush()?;
            Ok(())
        }
        Command::Phase => {
            let mut wtr = csv_writer(out);
            wtr.write_record(["r", "dr_dt"])?;
            let radii: Vec<f64> = if params.a() > 0.0 && params.b() > 0.0 {
                // the fixed point b/a sits exactly at k = 100
                let r_star = params.b() / params.a();
                (1..=200).map(|k| r_star * k as f64 / 100.0).collect()
            } else {
                (1..=200)
                    .map(|k| 2.0 * config.r0 * k as f64 / 200.0)
                    .collect()
            };
            for r in radii {
                wtr.write_record([fmt_f64(r), fmt_f64(params.rate(r))])?;
            }
            wtr.flush()?;
            Ok(())
        }
    }
}

fn invert<W: Write>(traj: &RadiusTrajectory, out: W) -> Result<(), CliError> {
    let seed = match fit_linear(traj) {
        Ok(fit) => fit,
        Err(FitError::DegenerateData(fit)) => {
            eprintln!("warning: constant trajectory; a and b cannot be separated");
            return write_fit(out, &fit);
        }
        Err(FitError::InsufficientData(n)) => {
            return Err(invalid(format!(
                "trajectory has {n} samples; at least 4 are needed"
            )))
        }
        Err(FitError::InvalidData(msg)) => return Err(invalid(msg)),
        Err(e) => return Err(CliError::Runtime(e.to_string())),
    };
    match fit_nonlinear(traj, seed.params) {
        Ok(fit) => write_fit(out, &fit),
        Err(FitError::NoConvergence(best)) => {
            write_fit(
                out,
                &FitResult {
                    dominant_term_warning: true,
                    ..*best
                },
            )?;
            Err(CliError::Runtime(format!(
                "nonlinear fit did not converge in {} iterations; wrote the best estimate",
                best.iterations
            )))
        }
        Err(e) => Err(CliError::Runtime(e.to_string())),
    }
}

/// Runs `config`, writing to `--out` or stdout.
pub fn run(config: &RunConfig) -> Result<(), CliError> {
    match &config.output {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
            run_to(config, BufWriter::new(file))
        }
        None => run_to(config, io::stdout().lock()),
    }
}

/// Parses `args`, runs, reports any error on stderr and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    match config.validate().and_then(|()| run(&config)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sphere-flow: {e}");
            e.exit_code()
        }
    }
}
