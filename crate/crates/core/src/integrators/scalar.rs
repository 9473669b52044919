//! Safeguarded Newton for the scalar consistency condition.

use super::StepError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarTolerances {
    /// Absolute residual tolerance (MPa).
    pub residual: f64,
    /// Step-size tolerance on `ξ`.
    pub step: f64,
    /// Upper limit of the bracket search.
    pub xi_max: f64,
    pub max_iterations: usize,
}

impl ScalarTolerances {
    /// Defaults scaled by the trial overstress.
    pub fn for_trial(f_trial: f64) -> Self {
        Self { residual: 1e-10 * f_trial.max(1.0), step: 1e-14, xi_max: 1.0, max_iterations: 50 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarSolution {
    pub xi: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Finds the root of a residual that is positive at `ξ = 0` and decreasing
/// through its root.
///
/// Newton steps use a central-difference slope (one-sided next to zero) and
/// fall back to bisection whenever they leave the current bracket. Without a
/// known upper end the bracket grows by doubling from `seed` up to
/// `tol.xi_max`.
pub fn solve_scalar(
    mut residual: impl FnMut(f64) -> Result<f64, StepError>,
    seed: f64,
    tol: &ScalarTolerances,
) -> Result<ScalarSolution, StepError> {
    let r0 = residual(0.0)?;
    if !(r0 > 0.0) {
        return Ok(ScalarSolution { xi: 0.0, iterations: 0, residual: r0 });
    }

    let mut lo = 0.0_f64;
    let mut hi: Option<f64> = None;
    let mut x = if seed > 0.0 && seed.is_finite() { seed.min(tol.xi_max) } else { 1e-6 * tol.xi_max };
    let mut rx = 0.0;

    for iteration in 1..=tol.max_iterations {
        rx = residual(x)?;
        if !rx.is_finite() {
            return Err(StepError::NoConvergence { iterations: iteration, residual: rx });
        }
        if rx.abs() < tol.residual {
            return Ok(ScalarSolution { xi: x, iterations: iteration, residual: rx });
        }
        if rx > 0.0 {
            lo = x;
        } else {
            hi = Some(x);
        }
        if rx > 0.0 && hi.is_none() && x >= tol.xi_max {
            return Err(StepError::NoBracket { xi_max: tol.xi_max });
        }

        let h = (1e-6 * x).max(1e-8);
        let slope = if x - h > 0.0 {
            (residual(x + h)? - residual(x - h)?) / (2.0 * h)
        } else {
            (residual(x + h)? - rx) / h
        };
        let newton = x - rx / slope;
        let upper = hi.unwrap_or(tol.xi_max);
        let inside = newton.is_finite() && newton > lo && newton < upper;
        let next = if inside {
            newton
        } else if let Some(h) = hi {
            0.5 * (lo + h)
        } else {
            (2.0 * x).min(tol.xi_max)
        };

        if (next - x).abs() < tol.step {
            return Ok(ScalarSolution { xi: next, iterations: iteration, residual: rx });
        }
        if let Some(h) = hi {
            if h - lo < tol.step {
                return Ok(ScalarSolution { xi: 0.5 * (lo + h), iterations: iteration, residual: rx });
            }
        }
        x = next;
    }
    Err(StepError::NoConvergence { iterations: tol.max_iterations, residual: rx })
}
