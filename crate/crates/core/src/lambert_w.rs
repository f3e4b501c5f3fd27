//! Real branches of the Lambert W function.
//!
//! `W(z)` is the inverse of `w ↦ w·exp(w)`. Over the reals it has two
//! branches meeting at the branch point `z = -1/e`, `w = -1`:
//!
//! - [`LambertBranch::Principal`] (`W₀`): defined for `z ≥ -1/e`, returns `w ≥ -1`.
//! - [`LambertBranch::Secondary`] (`W₋₁`): defined for `-1/e ≤ z < 0`, returns `w ≤ -1`.
//!
//! Values are found by Halley iteration on `f(w) = w·exp(w) - z` from
//! branch-specific starting points. Close to the branch point the iteration
//! stalls, so there the square-root series in `p = sqrt(2(e·z + 1))` is
//! evaluated directly. Two log-space entry points, [`lambert_w0_exp`] and
//! [`lambert_wm1_neg_exp`], cover arguments whose magnitude would over- or
//! underflow as an `f64`.

use std::f64::consts::E;
use std::fmt;

use thiserror::Error;

/// Head of `1/e`; `INV_E_HI + INV_E_LO` carries about 32 significant digits.
const INV_E_HI: f64 = 0.367_879_441_171_442_33;
const INV_E_LO: f64 = -1.242_875_367_278_836_3e-17;

/// Arguments within this distance of `-1/e` are treated as the branch point itself.
const BRANCH_SNAP: f64 = 4.0 * f64::EPSILON * INV_E_HI;

/// Below this distance from `-1/e` the series is used instead of Halley iteration.
const SERIES_BAND: f64 = 1e-6;

/// Relative residual accepted for `|w·exp(w) - z|`, scaled by `max(1, |z|)`.
pub const RESIDUAL_TOL: f64 = 1e-12;

const MAX_ITER: usize = 50;

/// Principal-branch arguments above this are solved in log form.
const LARGE_Z: f64 = 1e100;

/// Largest `y` for which `exp(y)` is passed through the direct evaluation.
const LOG_SPACE_SWITCH: f64 = 700.0;

/// One of the two real branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LambertBranch {
    /// `k = 0`, the branch with `W ≥ -1`.
    Principal,
    /// `k = -1`, the branch with `W ≤ -1`.
    Secondary,
}

impl LambertBranch {
    /// Conventional branch index `k`.
    pub fn index(self) -> i32 {
        match self {
            LambertBranch::Principal => 0,
            LambertBranch::Secondary => -1,
        }
    }

    fn sign(self) -> f64 {
        match self {
            LambertBranch::Principal => 1.0,
            LambertBranch::Secondary => -1.0,
        }
    }
}

impl fmt::Display for LambertBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W{}", self.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LambertError {
    #[error("argument {z} is outside the real domain of branch {branch}")]
    Domain { branch: LambertBranch, z: f64 },
    #[error("non-finite argument {0}")]
    NonFiniteInput(f64),
    #[error("no convergence for z = {z} after {iterations} iterations (residual {residual:e})")]
    Convergence {
        z: f64,
        iterations: usize,
        residual: f64,
    },
}

/// Evaluates `W_k(z)` on the requested real branch.
///
/// The returned `w` satisfies `|w·exp(w) - z| ≤ 1e-12·max(1, |z|)`.
pub fn lambert_w(branch: LambertBranch, z: f64) -> Result<f64, LambertError> {
    if !z.is_finite() {
        return Err(LambertError::NonFiniteInput(z));
    }
    // z + 1/e, with the low part of 1/e restored
    let gap = (z + INV_E_HI) + INV_E_LO;
    if gap < -BRANCH_SNAP {
        return Err(LambertError::Domain { branch, z });
    }
    if branch == LambertBranch::Secondary && z >= 0.0 {
        return Err(LambertError::Domain { branch, z });
    }
    if gap <= BRANCH_SNAP {
        return Ok(-1.0);
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if gap < SERIES_BAND {
        return Ok(branch_point_series(branch.sign() * (2.0 * E * gap).sqrt()));
    }
    if z > LARGE_Z {
        // Halley iterates can overshoot into exp overflow; iterate on w + ln w = ln z
        let y = z.ln();
        let ly = y.ln();
        let w = newton_log_space(y, y - ly + ly / y, |w| w.ln(), branch)?;
        let residual = (w * w.exp() - z).abs();
        return if residual <= RESIDUAL_TOL * z {
            Ok(w)
        } else {
            Err(LambertError::Convergence {
                z,
                iterations: MAX_ITER,
                residual,
            })
        };
    }
    halley(branch, z, initial_guess(branch, z))
}

/// Evaluates `W_k` at `z = (eta - 1)/e`, where `eta = 1 + e·z ≥ 0` is the
/// scaled distance from the branch point.
///
/// Callers that can form `eta` without cancellation keep full relative
/// accuracy in `W + 1` as the argument approaches `-1/e`.
pub fn lambert_w_branch_offset(branch: LambertBranch, eta: f64) -> Result<f64, LambertError> {
    if !eta.is_finite() {
        return Err(LambertError::NonFiniteInput(eta));
    }
    let z = (eta - 1.0) * INV_E_HI;
    if eta < 0.0 || (branch == LambertBranch::Secondary && eta >= 1.0) {
        return Err(LambertError::Domain { branch, z });
    }
    if eta < E * SERIES_BAND {
        return Ok(branch_point_series(branch.sign() * (2.0 * eta).sqrt()));
    }
    lambert_w(branch, z)
}

/// `W₀(exp(y))` for any finite `y`, without forming `exp(y)` when it would overflow.
pub fn lambert_w0_exp(y: f64) -> Result<f64, LambertError> {
    if !y.is_finite() {
        return Err(LambertError::NonFiniteInput(y));
    }
    if y <= LOG_SPACE_SWITCH {
        return lambert_w(LambertBranch::Principal, y.exp());
    }
    // w + ln w = y, w > 1
    let ly = y.ln();
    let start = y - ly + ly / y;
    newton_log_space(y, start, |w| w.ln(), LambertBranch::Principal)
}

/// `W₋₁(-exp(y))` for `y ≤ -1`, without forming `exp(y)` when it would underflow.
pub fn lambert_wm1_neg_exp(y: f64) -> Result<f64, LambertError> {
    if !y.is_finite() {
        return Err(LambertError::NonFiniteInput(y));
    }
    if y >= -LOG_SPACE_SWITCH {
        return lambert_w(LambertBranch::Secondary, -y.exp());
    }
    // w + ln(-w) = y, w < -1
    let l2 = (-y).ln();
    let start = y - l2 + l2 / y;
    newton_log_space(y, start, |w| (-w).ln(), LambertBranch::Secondary)
}

fn newton_log_space(
    y: f64,
    start: f64,
    log_term: impl Fn(f64) -> f64,
    branch: LambertBranch,
) -> Result<f64, LambertError> {
    let mut w = start;
    for _ in 0..MAX_ITER {
        let g = w + log_term(w) - y;
        let step = g * w / (w + 1.0);
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w.abs() {
            break;
        }
    }
    let residual = (w + log_term(w) - y).abs();
    if w.is_finite() && residual <= RESIDUAL_TOL * y.abs().max(1.0) {
        Ok(w)
    } else {
        Err(LambertError::Convergence {
            z: branch.sign() * y.exp(),
            iterations: MAX_ITER,
            residual,
        })
    }
}

/// `-1 + p - p²/3 + 11p³/72 - …`, the expansion of `W` about `z = -1/e`.
fn branch_point_series(p: f64) -> f64 {
    const C: [f64; 7] = [
        -1.0,
        1.0,
        -1.0 / 3.0,
        11.0 / 72.0,
        -43.0 / 540.0,
        769.0 / 17280.0,
        -221.0 / 8505.0,
    ];
    C.iter().rev().fold(0.0, |acc, &c| acc * p + c)
}

fn initial_guess(branch: LambertBranch, z: f64) -> f64 {
    match branch {
        LambertBranch::Principal if z < -0.25 => {
            let gap = (z + INV_E_HI) + INV_E_LO;
            branch_point_series((2.0 * E * gap).sqrt())
        }
        LambertBranch::Principal => {
            // Winitzki's approximation, within a few percent on the whole branch
            let l = z.ln_1p();
            l * (1.0 - l.ln_1p() / (2.0 + l))
        }
        LambertBranch::Secondary if z < -0.25 => {
            let gap = (z + INV_E_HI) + INV_E_LO;
            branch_point_series(-(2.0 * E * gap).sqrt())
        }
        LambertBranch::Secondary => {
            let l1 = (-z).ln();
            let l2 = (-l1).ln();
            l1 - l2 + l2 / l1
        }
    }
}

fn halley(branch: LambertBranch, z: f64, start: f64) -> Result<f64, LambertError> {
    let mut w = start;
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - z;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let mut next = w - step;
        // an iterate that crosses w = -1 has jumped branches; pull it back halfway
        let crossed = match branch {
            LambertBranch::Principal => next <= -1.0,
            LambertBranch::Secondary => next >= -1.0,
        };
        if crossed {
            next = 0.5 * (w - 1.0);
        }
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * next.abs();
        w = next;
        if done {
            break;
        }
    }
    let residual = (w * w.exp() - z).abs();
    if w.is_finite() && residual <= RESIDUAL_TOL * z.abs().max(1.0) {
        Ok(w)
    } else {
        Err(LambertError::Convergence {
            z,
            iterations: MAX_ITER,
            residual,
        })
    }
}
