//! Closed-form evolution of a sphere under `∂M/∂t = (a - bκ) n̂`.
//!
//! On a sphere the mean curvature is `1/r` everywhere, so the surface flow
//! collapses to the scalar initial value problem `r' = a - b/r`, `r(0) = r0`.
//! Its solution is
//!
//! ```text
//! r(t) = (b/a) · (W_k[ x0·exp(x0)·exp(a²t/b) ] + 1),   x0 = (a·r0 - b)/b
//! ```
//!
//! with `W₋₁` for `a < 0` and `W₀` for `a > 0`. The pure advection (`b = 0`)
//! and pure mean curvature (`a = 0`) cases are dispatched exactly rather than
//! through the limit of the general formula.
//!
//! The Lambert W argument is never formed directly. For shrinking spheres the
//! code works with `eta = 1 + e·z = -expm1(ln(1 - u) + u + a²t/b)`, `u = a·r0/b`,
//! which keeps `W + 1` accurate as `a → 0` and near the vanishing time. For
//! growing spheres the argument is passed in log space so it cannot overflow.
//!
//! [`reference_integrate`] is an adaptive RK4 integrator of the same ODE that
//! shares no code with the closed form; the test suites use it as an oracle.

use std::f64::consts::E;

use thiserror::Error;

use crate::lambert_w::{
    lambert_w, lambert_w0_exp, lambert_w_branch_offset, lambert_wm1_neg_exp, LambertBranch,
    LambertError,
};
use crate::trajectory::{RadiusTrajectory, TrajectoryError};

/// Distance below `-1/e` (in `z`) that is still read as the branch point.
const BRANCH_CLAMP: f64 = 1e-12;

/// Below this `eta` the branch-offset evaluation of W is used.
const OFFSET_BAND: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("sphere vanished at t = {vanishing_time}; radius at t = {t} is undefined")]
    Vanished { t: f64, vanishing_time: f64 },
    #[error("step size underflow at t = {t} (r = {r}); estimated crossing time {crossing:?}")]
    Stiffness {
        t: f64,
        r: f64,
        crossing: Option<f64>,
    },
    #[error(transparent)]
    Lambert(#[from] LambertError),
}

impl From<TrajectoryError> for FlowError {
    fn from(e: TrajectoryError) -> Self {
        FlowError::Domain(e.to_string())
    }
}

/// Advection rate `a` and curvature rate `b` (`b ≥ 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    a: f64,
    b: f64,
}

impl FlowParams {
    pub fn new(a: f64, b: f64) -> Result<Self, FlowError> {
        if !a.is_finite() || !b.is_finite() {
            return Err(FlowError::Domain(format!(
                "non-finite flow rates a={a}, b={b}"
            )));
        }
        if b < 0.0 {
            return Err(FlowError::Domain(format!(
                "curvature rate b must be non-negative, got {b}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// The prescribed mean curvature `a/b` at which the flow is stationary.
    pub fn prescribed_curvature(&self) -> Result<f64, FlowError> {
        prescribed_curvature(*self)
    }

    /// Normal speed `a - b/r` of a sphere of radius `r`.
    pub fn rate(&self, r: f64) -> f64 {
        self.a - self.b / r
    }

    fn is_static(&self) -> bool {
        self.a == 0.0 && self.b == 0.0
    }
}

/// Long-time behaviour of a sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowRegime {
    ShrinkToZero,
    MetaStable,
    GrowUnbounded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VanishingTime {
    Finite(f64),
    Never,
}

impl VanishingTime {
    pub fn finite(self) -> Option<f64> {
        match self {
            VanishingTime::Finite(t) => Some(t),
            VanishingTime::Never => None,
        }
    }
}

pub fn prescribed_curvature(params: FlowParams) -> Result<f64, FlowError> {
    if params.b == 0.0 {
        return Err(FlowError::Domain(
            "prescribed curvature a/b is undefined for b = 0".into(),
        ));
    }
    Ok(params.a / params.b)
}

fn check_radius(r0: f64) -> Result<(), FlowError> {
    if r0.is_finite() && r0 > 0.0 {
        Ok(())
    } else {
        Err(FlowError::Domain(format!(
            "initial radius must be positive and finite, got {r0}"
        )))
    }
}

/// Classifies the flow by comparing `r0` against the fixed point `b/a`.
///
/// The comparison is the sign of `a·r0 - b` evaluated with a single rounding,
/// so only an exact fixed point is reported as [`FlowRegime::MetaStable`].
pub fn classify_regime(params: FlowParams, r0: f64) -> Result<FlowRegime, FlowError> {
    check_radius(r0)?;
    if params.is_static() {
        return Ok(FlowRegime::MetaStable);
    }
    if params.a <= 0.0 {
        return Ok(FlowRegime::ShrinkToZero);
    }
    let excess = params.a.mul_add(r0, -params.b);
    Ok(if excess < 0.0 {
        FlowRegime::ShrinkToZero
    } else if excess == 0.0 {
        FlowRegime::MetaStable
    } else {
        FlowRegime::GrowUnbounded
    })
}

/// `ln(1 - u) + u` for `u < 1`, where `x0 = u - 1` is passed separately
/// because it is known more accurately than `1 - u` when `u` is close to one.
fn log_gap(u: f64, x0: f64) -> f64 {
    if u.abs() < 0.1 {
        // -(u²/2 + u³/3 + …)
        let mut term = u;
        let mut sum = 0.0;
        for k in 2..=18 {
            term *= u;
            sum += term / k as f64;
        }
        -sum
    } else if u >= 0.5 {
        (-x0).ln() + u
    } else {
        (-u).ln_1p() + u
    }
}

/// Radius at time `t`.
///
/// Returns [`FlowError::Vanished`] once `t` is past the vanishing time.
pub fn radius_at(params: FlowParams, r0: f64, t: f64) -> Result<f64, FlowError> {
    check_radius(r0)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(FlowError::Domain(format!(
            "time must be finite and non-negative, got {t}"
        )));
    }
    let FlowParams { a, b } = params;
    let vanished = || FlowError::Vanished {
        t,
        vanishing_time: vanishing_time(params, r0)
            .ok()
            .and_then(VanishingTime::finite)
            .unwrap_or(f64::NAN),
    };

    if b == 0.0 {
        let r = r0 + a * t;
        return if r < 0.0 { Err(vanished()) } else { Ok(r) };
    }
    if a == 0.0 {
        let sq = r0 * r0 - 2.0 * b * t;
        return if sq < 0.0 {
            Err(vanished())
        } else {
            Ok(sq.sqrt())
        };
    }

    let x0 = a.mul_add(r0, -b) / b;
    if x0 == 0.0 {
        return Ok(r0);
    }
    let s = a * a * t / b;
    let scale = b / a;

    let w = if x0 > 0.0 {
        lambert_w0_exp(x0.ln() + x0 + s)?
    } else {
        let branch = if a > 0.0 {
            LambertBranch::Principal
        } else {
            LambertBranch::Secondary
        };
        let q = log_gap(a * r0 / b, x0) + s;
        let eta = -q.exp_m1();
        if eta < 0.0 {
            if eta >= -E * BRANCH_CLAMP {
                return Ok(0.0);
            }
            return Err(vanished());
        }
        if eta < OFFSET_BAND {
            lambert_w_branch_offset(branch, eta)?
        } else {
            match branch {
                LambertBranch::Principal => lambert_w(branch, -(q - 1.0).exp())?,
                LambertBranch::Secondary => lambert_wm1_neg_exp(q - 1.0)?,
            }
        }
    };
    Ok((scale * (w + 1.0)).max(0.0))
}

/// Time at which the radius reaches zero, if it ever does.
pub fn vanishing_time(params: FlowParams, r0: f64) -> Result<VanishingTime, FlowError> {
    check_radius(r0)?;
    let FlowParams { a, b } = params;
    if params.is_static() {
        return Err(FlowError::Domain(
            "vanishing time is undefined for a = b = 0".into(),
        ));
    }
    if b == 0.0 {
        return Ok(if a < 0.0 {
            VanishingTime::Finite(-r0 / a)
        } else {
            VanishingTime::Never
        });
    }
    if a == 0.0 {
        return Ok(VanishingTime::Finite(r0 * r0 / (2.0 * b)));
    }
    let x0 = a.mul_add(r0, -b) / b;
    if x0 >= 0.0 {
        return Ok(VanishingTime::Never);
    }
    // (b/a²)·ln(b/(b - a·r0)) - r0/a, written as -(b/a²)·(ln(1 - u) + u)
    Ok(VanishingTime::Finite(
        -(b / (a * a)) * log_gap(a * r0 / b, x0),
    ))
}

/// Samples the closed form at `times`, reporting `r = 0` after the sphere vanishes.
pub fn evolve_trajectory(
    params: FlowParams,
    r0: f64,
    times: &[f64],
) -> Result<RadiusTrajectory, FlowError> {
    check_radius(r0)?;
    let t_vanish = if params.is_static() {
        None
    } else {
        vanishing_time(params, r0)?.finite()
    };
    let mut samples = Vec::with_capacity(times.len());
    for &t in times {
        let r = match t_vanish {
            Some(tv) if t >= tv => 0.0,
            _ => match radius_at(params, r0, t) {
                Ok(r) => r,
                Err(FlowError::Vanished { .. }) => 0.0,
                Err(e) => return Err(e),
            },
        };
        samples.push((t, r));
    }
    Ok(RadiusTrajectory::new(samples)?)
}

/// Output of [`reference_integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    /// Accepted RK4 steps, ending with `(crossing, 0)` if the sphere vanished.
    pub trajectory: RadiusTrajectory,
    pub vanished_at: Option<f64>,
}

/// Integrates `r' = a - b/r` with step-doubling RK4.
///
/// Local error is held below `tol` per unit time. When the radius falls under
/// `10·tol`, or the step size underflows while the sphere is collapsing, the
/// remaining time to `r = 0` is obtained by quadrature of `dt/dr = r/(a·r - b)`
/// and reported as the crossing time.
pub fn reference_integrate(
    params: FlowParams,
    r0: f64,
    t_end: f64,
    tol: f64,
) -> Result<ReferenceSolution, FlowError> {
    check_radius(r0)?;
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(FlowError::Domain(format!(
            "t_end must be non-negative, got {t_end}"
        )));
    }
    let oracle = Rk4Oracle::new(params, tol)?;
    let mut samples = vec![(0.0, r0)];
    let seg = oracle.run(0.0, r0, t_end, oracle.initial_step(r0, t_end), |t, r| {
        samples.push((t, r))
    })?;
    let vanished_at = match seg {
        Segment::Reached { .. } => None,
        Segment::Vanished { at } => {
            let last = samples.last_mut().expect("seeded with the initial sample");
            if at > last.0 {
                samples.push((at, 0.0));
            } else {
                last.1 = 0.0;
            }
            Some(at)
        }
    };
    Ok(ReferenceSolution {
        trajectory: RadiusTrajectory::new(samples)?,
        vanished_at,
    })
}

/// Runs the same integrator as [`reference_integrate`], landing exactly on each requested time.
pub fn reference_sample(
    params: FlowParams,
    r0: f64,
    times: &[f64],
    tol: f64,
) -> Result<RadiusTrajectory, FlowError> {
    check_radius(r0)?;
    let oracle = Rk4Oracle::new(params, tol)?;
    let mut samples = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut r = r0;
    let mut h = oracle.initial_step(r0, times.last().copied().unwrap_or(0.0));
    let mut gone = false;
    for &target in times {
        if !gone && target > t {
            match oracle.run(t, r, target, h, |_, _| {})? {
                Segment::Reached { r: rn, h: hn } => {
                    r = rn;
                    h = hn;
                }
                Segment::Vanished { .. } => gone = true,
            }
            t = target;
        }
        samples.push((target, if gone { 0.0 } else { r }));
    }
    Ok(RadiusTrajectory::new(samples)?)
}

enum Segment {
    Reached { r: f64, h: f64 },
    Vanished { at: f64 },
}

struct Rk4Oracle {
    a: f64,
    b: f64,
    tol: f64,
    floor: f64,
}

impl Rk4Oracle {
    fn new(params: FlowParams, tol: f64) -> Result<Self, FlowError> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(FlowError::Domain(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        Ok(Self {
            a: params.a,
            b: params.b,
            tol,
            floor: 10.0 * tol,
        })
    }

    fn initial_step(&self, r0: f64, span: f64) -> f64 {
        span.min(1e-3 * r0.max(1.0)).max(f64::MIN_POSITIVE)
    }

    fn rate(&self, r: f64) -> f64 {
        self.a - self.b / r
    }

    /// One classical RK4 step; `None` if any stage leaves `r > 0`.
    fn rk4(&self, r: f64, h: f64) -> Option<f64> {
        let k1 = self.rate(r);
        let r2 = r + 0.5 * h * k1;
        if r2 <= 0.0 {
            return None;
        }
        let k2 = self.rate(r2);
        let r3 = r + 0.5 * h * k2;
        if r3 <= 0.0 {
            return None;
        }
        let k3 = self.rate(r3);
        let r4 = r + h * k3;
        if r4 <= 0.0 {
            return None;
        }
        let k4 = self.rate(r4);
        let next = r + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        (next.is_finite() && next > 0.0).then_some(next)
    }

    fn run(
        &self,
        t0: f64,
        r0: f64,
        t_end: f64,
        h0: f64,
        mut on_step: impl FnMut(f64, f64),
    ) -> Result<Segment, FlowError> {
        let mut t = t0;
        let mut r = r0;
        let mut h = h0;
        while t < t_end {
            let remaining = t_end - t;
            let last = h >= remaining;
            let h_try = if last { remaining } else { h };
            if h_try <= 1e-15 * t.abs().max(1.0) {
                return self.crossing(t, r, t_end);
            }
            let full = self.rk4(r, h_try);
            let half = self
                .rk4(r, 0.5 * h_try)
                .and_then(|mid| self.rk4(mid, 0.5 * h_try));
            let (Some(full), Some(half)) = (full, half) else {
                h = 0.5 * h_try;
                continue;
            };
            let err = (half - full).abs() / 15.0;
            let budget = self.tol * h_try;
            if err <= budget {
                t = if last { t_end } else { t + h_try };
                r = half + (half - full) / 15.0;
                on_step(t, r);
                if r < self.floor && t < t_end {
                    return self.crossing(t, r, t_end);
                }
                let factor = if err == 0.0 {
                    4.0
                } else {
                    (0.9 * (budget / err).powf(0.25)).clamp(0.2, 4.0)
                };
                // keep the unclipped step when the last one was shortened to land on t_end
                h = if last {
                    h.max(h_try * factor)
                } else {
                    h_try * factor
                };
            } else {
                h = h_try * (0.9 * (budget / err).powf(0.25)).clamp(0.2, 0.9);
            }
        }
        Ok(Segment::Reached { r, h })
    }

    /// Time from `(t, r)` to `r = 0`, by Simpson quadrature of `dt/dr`.
    fn crossing(&self, t: f64, r: f64, t_end: f64) -> Result<Segment, FlowError> {
        let collapsing = self.b - self.a * r > 0.0;
        if !collapsing {
            return Err(FlowError::Stiffness {
                t,
                r,
                crossing: None,
            });
        }
        let remaining = if self.b == 0.0 {
            r / -self.a
        } else {
            // integrand rho / (b - a·rho) is smooth on [0, r]
            let f = |rho: f64| rho / (self.b - self.a * rho);
            let panels = 64;
            let dr = r / panels as f64;
            let mut sum = f(0.0) + f(r);
            for i in 1..panels {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                sum += w * f(i as f64 * dr);
            }
            sum * dr / 3.0
        };
        let at = t + remaining;
        if at <= t_end || r < self.floor {
            Ok(Segment::Vanished { at })
        } else {
            Err(FlowError::Stiffness {
                t,
                r,
                crossing: Some(at),
            })
        }
    }
}
