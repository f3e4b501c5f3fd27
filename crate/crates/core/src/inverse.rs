//! Recovering `(a, b)` from an observed radius trajectory.
//!
//! [`fit_linear`] exploits that `r' = a - b/r` is linear in the rates once
//! `r'` is estimated from the data. [`fit_nonlinear`] refines that seed by
//! least squares on the closed-form radius, with the initial radius fixed to
//! the first sample.

use thiserror::Error;

use crate::analytic::{evolve_trajectory, radius_at, vanishing_time, FlowError, FlowParams};
use crate::trajectory::RadiusTrajectory;

/// Normal matrices with a larger condition number trigger the warning.
pub const CONDITION_LIMIT: f64 = 1e6;

/// Trajectories whose radii vary by less than this fraction trigger the warning.
pub const MIN_RELATIVE_SPAN: f64 = 0.01;

/// Relative parameter perturbation for finite-difference derivatives.
pub const JACOBIAN_STEP: f64 = 1e-6;

/// Sensitivity ratios beyond this factor (either way) flag the weaker term.
pub const DOMINANCE_RATIO: f64 = 1e3;

const MAX_ITERATIONS: usize = 100;
const STEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: FlowParams,
    /// Root-mean-square misfit between the fitted closed form and the observed radii.
    pub residual: f64,
    /// Condition number of the 2×2 normal matrix of the fit.
    pub condition: f64,
    /// Set when the data cannot separate the two rates reliably.
    pub dominant_term_warning: bool,
    /// Gauss–Newton iterations taken; zero for the linear fit.
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least 4 samples, got {0}")]
    InsufficientData(usize),
    #[error("invalid data: {0}")]
    InvalidData(String),
    /// Every radius is equal, so any `(a, b)` with `a = b/r` fits; carries the
    /// minimum-norm estimate.
    #[error("constant trajectory: a and b are not separately identifiable")]
    DegenerateData(Box<FitResult>),
    /// Carries the best estimate found.
    #[error("no convergence after {} iterations", .0.iterations)]
    NoConvergence(Box<FitResult>),
    #[error(transparent)]
    ForwardModel(#[from] FlowError),
}

fn validate(traj: &RadiusTrajectory) -> Result<(), FitError> {
    if traj.len() < 4 {
        return Err(FitError::InsufficientData(traj.len()));
    }
    if let Some((t, r)) = traj.samples().iter().find(|s| s.1 <= 0.0) {
        return Err(FitError::InvalidData(format!(
            "radius {r} at t = {t} is not positive"
        )));
    }
    Ok(())
}

/// Derivative at `x` of the quadratic through three points.
fn quadratic_slope(ts: [f64; 3], rs: [f64; 3], x: f64) -> f64 {
    let [t0, t1, t2] = ts;
    let [r0, r1, r2] = rs;
    r0 * ((x - t1) + (x - t2)) / ((t0 - t1) * (t0 - t2))
        + r1 * ((x - t0) + (x - t2)) / ((t1 - t0) * (t1 - t2))
        + r2 * ((x - t0) + (x - t1)) / ((t2 - t0) * (t2 - t1))
}

/// Second-order estimates of `r'` at every sample: centred inside,
/// one-sided at both ends.
fn slopes(traj: &RadiusTrajectory) -> Vec<f64> {
    let s = traj.samples();
    let m = s.len();
    let window = |i: usize| {
        (
            [s[i].0, s[i + 1].0, s[i + 2].0],
            [s[i].1, s[i + 1].1, s[i + 2].1],
        )
    };
    (0..m)
        .map(|i| {
            let start = i.saturating_sub(1).min(m - 3);
            let (ts, rs) = window(start);
            quadratic_slope(ts, rs, s[i].0)
        })
        .collect()
}

/// `λmax/λmin` of a symmetric positive semi-definite 2×2 matrix.
///
/// `λmin` is floored at `ε·λmax`, so a numerically singular matrix reports
/// `1/ε ≈ 4.5e15` rather than infinity.
fn condition_2x2(n: [[f64; 2]; 2]) -> f64 {
    let tr = n[0][0] + n[1][1];
    let disc = ((n[0][0] - n[1][1]).powi(2) + 4.0 * n[0][1] * n[0][1]).sqrt();
    let hi = 0.5 * (tr + disc);
    let lo = (0.5 * (tr - disc)).max(hi * f64::EPSILON);
    if hi <= 0.0 {
        return 1.0 / f64::EPSILON;
    }
    (hi / lo).max(1.0)
}

fn relative_span(traj: &RadiusTrajectory) -> f64 {
    let (lo, hi) = traj.radii().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
        (lo.min(r), hi.max(r))
    });
    (hi - lo) / hi
}

fn needs_warning(condition: f64, traj: &RadiusTrajectory) -> bool {
    condition.is_nan() || condition > CONDITION_LIMIT || relative_span(traj) < MIN_RELATIVE_SPAN
}

/// Closed-form radii at the trajectory's times, clamped to zero after vanishing.
fn forward(params: FlowParams, r0: f64, times: &[f64]) -> Result<Vec<f64>, FlowError> {
    Ok(evolve_trajectory(params, r0, times)?.radii().collect())
}

fn rms_misfit(model: &[f64], traj: &RadiusTrajectory) -> f64 {
    let sum: f64 = model
        .iter()
        .zip(traj.radii())
        .map(|(m, r)| (m - r).powi(2))
        .sum();
    (sum / model.len() as f64).sqrt()
}

/// Least squares for `r' = a·1 - b·(1/r)` with `r'` from finite differences.
///
/// A negative `b` estimate is projected to `b = 0`, refitting `a` alone.
pub fn fit_linear(traj: &RadiusTrajectory) -> Result<FitResult, FitError> {
    validate(traj)?;
    let times: Vec<f64> = traj.times().collect();
    let r0 = traj.initial_radius();
    let dr = slopes(traj);
    let u: Vec<f64> = traj.radii().map(|r| 1.0 / r).collect();
    let m = u.len() as f64;
    let su: f64 = u.iter().sum();
    let suu: f64 = u.iter().map(|x| x * x).sum();
    let sy: f64 = dr.iter().sum();
    let suy: f64 = u.iter().zip(&dr).map(|(x, y)| x * y).sum();
    // columns [1, -u]
    let normal = [[m, -su], [-su, suu]];
    let condition = condition_2x2(normal);

    if traj.radii().all(|r| r == r0) {
        // a - b·u = mean slope, minimum norm
        let y = sy / m;
        let u0 = u[0];
        let scale = y / (1.0 + u0 * u0);
        let (a, b) = if -u0 * scale >= 0.0 {
            (scale, -u0 * scale)
        } else {
            (y, 0.0)
        };
        let params = FlowParams::new(a, b)?;
        let model = forward(params, r0, &times)?;
        return Err(FitError::DegenerateData(Box::new(FitResult {
            params,
            residual: rms_misfit(&model, traj),
            condition,
            dominant_term_warning: true,
            iterations: 0,
        })));
    }

    let det = normal[0][0] * normal[1][1] - normal[0][1] * normal[1][0];
    let rhs = [sy, -suy];
    let mut a = (rhs[0] * normal[1][1] - normal[0][1] * rhs[1]) / det;
    let mut b = (normal[0][0] * rhs[1] - normal[1][0] * rhs[0]) / det;
    if b.is_nan() || b < 0.0 {
        a = sy / m;
        b = 0.0;
    }
    let params = FlowParams::new(a, b)?;
    let model = forward(params, r0, &times)?;
    Ok(FitResult {
        params,
        residual: rms_misfit(&model, traj),
        condition,
        dominant_term_warning: needs_warning(condition, traj),
        iterations: 0,
    })
}

fn fd_step(x: f64) -> f64 {
    JACOBIAN_STEP * x.abs().max(1e-2)
}

/// Finite-difference derivatives `[∂r/∂a, ∂r/∂b]` of the closed-form radius
/// at each time, using relative step `rel_step`.
///
/// Differences are central except in `b` when the backward point would be
/// negative, where a forward difference is used.
pub fn jacobian(
    params: FlowParams,
    r0: f64,
    times: &[f64],
    rel_step: f64,
) -> Result<Vec<[f64; 2]>, FlowError> {
    let (a, b) = (params.a(), params.b());
    let ha = rel_step * a.abs().max(1e-2);
    let hb = rel_step * b.abs().max(1e-2);
    let at = |a: f64, b: f64| -> Result<Vec<f64>, FlowError> {
        forward(FlowParams::new(a, b)?, r0, times)
    };
    let (ap, am) = (at(a + ha, b)?, at(a - ha, b)?);
    let col_a: Vec<f64> = ap
        .iter()
        .zip(&am)
        .map(|(p, m)| (p - m) / (2.0 * ha))
        .collect();
    let col_b: Vec<f64> = if b - hb >= 0.0 {
        let (bp, bm) = (at(a, b + hb)?, at(a, b - hb)?);
        bp.iter()
            .zip(&bm)
            .map(|(p, m)| (p - m) / (2.0 * hb))
            .collect()
    } else {
        let (bp, base) = (at(a, b + hb)?, at(a, b)?);
        bp.iter().zip(&base).map(|(p, m)| (p - m) / hb).collect()
    };
    Ok(col_a.into_iter().zip(col_b).map(|(x, y)| [x, y]).collect())
}

/// Gauss–Newton with Levenberg damping on the closed-form radius, `b ≥ 0` by projection.
pub fn fit_nonlinear(traj: &RadiusTrajectory, init: FlowParams) -> Result<FitResult, FitError> {
    validate(traj)?;
    let times: Vec<f64> = traj.times().collect();
    let data: Vec<f64> = traj.radii().collect();
    let r0 = traj.initial_radius();
    let objective = |p: FlowParams| -> Option<f64> {
        let model = forward(p, r0, &times).ok()?;
        let sse: f64 = model.iter().zip(&data).map(|(m, r)| (m - r).powi(2)).sum();
        sse.is_finite().then_some(sse)
    };

    let mut p = init;
    let mut f = objective(p).ok_or_else(|| {
        FitError::ForwardModel(FlowError::Domain(format!(
            "closed form cannot be evaluated at the initial guess {p:?}"
        )))
    })?;
    let mut lambda = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    let mut normal = [[0.0; 2]; 2];

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let model = forward(p, r0, &times)?;
        let jac = jacobian(p, r0, &times, JACOBIAN_STEP)?;
        let mut g = [0.0; 2];
        normal = [[0.0; 2]; 2];
        for (row, (m, r)) in jac.iter().zip(model.iter().zip(&data)) {
            let res = m - r;
            for x in 0..2 {
                g[x] += row[x] * res;
                for y in 0..2 {
                    normal[x][y] += row[x] * row[y];
                }
            }
        }
        if f == 0.0 {
            converged = true;
            break;
        }
        // inner loop: raise the damping until the objective decreases
        loop {
            let mut lhs = normal;
            lhs[0][0] *= 1.0 + lambda;
            lhs[1][1] *= 1.0 + lambda;
            let det = lhs[0][0] * lhs[1][1] - lhs[0][1] * lhs[1][0];
            let step = if det != 0.0 && det.is_finite() {
                [
                    -(g[0] * lhs[1][1] - lhs[0][1] * g[1]) / det,
                    -(lhs[0][0] * g[1] - lhs[1][0] * g[0]) / det,
                ]
            } else {
                // singular normal matrix: fall back to a scaled gradient step
                let scale = 1.0 / (1.0 + lambda) / normal[0][0].max(normal[1][1]).max(1e-300);
                [-g[0] * scale, -g[1] * scale]
            };
            let candidate = FlowParams::new(p.a() + step[0], (p.b() + step[1]).max(0.0))?;
            let moved = ((candidate.a() - p.a()).powi(2) + (candidate.b() - p.b()).powi(2)).sqrt();
            let size = (p.a().powi(2) + p.b().powi(2))
                .sqrt()
                .max(f64::MIN_POSITIVE);
            let improved = objective(candidate).filter(|&fc| fc <= f);
            if let Some(fc) = improved {
                p = candidate;
                f = fc;
                lambda = if lambda < 1e-8 { 0.0 } else { lambda * 0.1 };
            } else {
                lambda = if lambda == 0.0 { 1e-6 } else { lambda * 10.0 };
            }
            if moved / size < STEP_TOL {
                converged = true;
                break;
            }
            if improved.is_some() || lambda > 1e16 {
                break;
            }
        }
        if converged {
            break;
        }
    }

    let model = forward(p, r0, &times)?;
    let condition = condition_2x2(normal);
    let result = FitResult {
        params: p,
        residual: rms_misfit(&model, traj),
        condition,
        dominant_term_warning: needs_warning(condition, traj),
        iterations,
    };
    if converged {
        Ok(result)
    } else {
        Err(FitError::NoConvergence(Box::new(result)))
    }
}

/// Scaled sensitivities of a trajectory to each rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Identifiability {
    /// `‖a·∂r/∂a‖₂` over the sampled times.
    pub advection: f64,
    /// `‖b·∂r/∂b‖₂` over the sampled times.
    pub curvature: f64,
}

impl Identifiability {
    /// Advection over curvature sensitivity.
    pub fn ratio(&self) -> f64 {
        self.advection / self.curvature
    }

    /// True when one term is too weak to be recovered alongside the other.
    pub fn non_dominant_risk(&self) -> bool {
        let q = self.ratio();
        !(1.0 / DOMINANCE_RATIO..=DOMINANCE_RATIO).contains(&q)
    }
}

const REPORT_SAMPLES: usize = 200;

/// Sensitivity of `r(t)` on `[0, t_end]` to each rate, scaled by the rate
/// itself so both are in units of radius per unit relative change.
pub fn identifiability_report(
    params: FlowParams,
    r0: f64,
    t_end: f64,
) -> Result<Identifiability, FlowError> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(FlowError::Domain(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    if !(params.a() == 0.0 && params.b() == 0.0) {
        if let Some(tv) = vanishing_time(params, r0)?.finite() {
            if t_end >= tv {
                return Err(FlowError::Domain(format!(
                    "t_end = {t_end} is not before the vanishing time {tv}"
                )));
            }
        }
    }
    let (a, b) = (params.a(), params.b());
    let times: Vec<f64> = (1..=REPORT_SAMPLES)
        .map(|k| t_end * k as f64 / REPORT_SAMPLES as f64)
        .collect();
    let norm = |theta: f64, perturb: &dyn Fn(f64) -> Result<FlowParams, FlowError>| {
        if theta == 0.0 {
            return Ok(0.0);
        }
        let h = fd_step(theta);
        // only b is constrained, and it is positive here
        let (lo_at, span) = if theta - h < 0.0 {
            (theta, h)
        } else {
            (theta - h, 2.0 * h)
        };
        let mut sum = 0.0;
        for &t in &times {
            let hi = radius_at(perturb(theta + h)?, r0, t)?;
            let lo = radius_at(perturb(lo_at)?, r0, t)?;
            sum += (theta * (hi - lo) / span).powi(2);
        }
        Ok::<f64, FlowError>(sum.sqrt())
    };
    Ok(Identifiability {
        advection: norm(a, &|x| FlowParams::new(x, b))?,
        curvature: norm(b, &|x| FlowParams::new(a, x))?,
    })
}
