//! Bisection on the mean extracted ensemble size so that a realization
//! delivers a prescribed number of single atoms to the buffer section.

use super::config::ResolvedExperiment;
use super::{run_experiment, HarnessError};

/// Search interval for `mean_ensemble_at_full`.
pub const CALIBRATION_BRACKET: (f64, f64) = (1.0, 40.0);

const MAX_EVALUATIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub mean_ensemble_at_full: f64,
    /// Ensemble-mean delivered atoms per realization at that value.
    pub achieved: f64,
    pub evaluations: usize,
    /// `false` when the bracket collapsed before reaching the tolerance; the
    /// best point found is returned.
    pub converged: bool,
}

/// Finds `mean_ensemble_at_full` with mean delivered atoms within
/// `tolerance` of `target_delivered`.
///
/// Every evaluation reuses the experiment's seed, so the objective is a
/// deterministic function of the parameter. The midpoint is evaluated first;
/// only if it misses are the bracket ends checked for a sign change.
pub fn calibrate_depletion(
    exp: &ResolvedExperiment,
    target_delivered: f64,
    tolerance: f64,
) -> Result<Calibration, HarnessError> {
    if target_delivered.is_nan() || tolerance.is_nan() || tolerance < 0.0 {
        return Err(HarnessError::config("calibration", "target and tolerance must be numbers, tolerance nonnegative"));
    }
    let evaluations = std::cell::Cell::new(0usize);
    let eval = |m: f64| -> Result<f64, HarnessError> {
        evaluations.set(evaluations.get() + 1);
        Ok(run_experiment(&exp.with_mean_ensemble(m)?, false)?.stats.delivered_mean)
    };

    let (mut lo, mut hi) = CALIBRATION_BRACKET;
    let mut mid = 0.5 * (lo + hi);
    let mut at_mid = eval(mid)?;
    let mut best = (mid, at_mid);
    if (at_mid - target_delivered).abs() <= tolerance {
        return Ok(Calibration { mean_ensemble_at_full: mid, achieved: at_mid, evaluations: evaluations.get(), converged: true });
    }

    let at_lo = eval(lo)?;
    let at_hi = eval(hi)?;
    for (m, v) in [(lo, at_lo), (hi, at_hi)] {
        if (v - target_delivered).abs() <= tolerance {
            return Ok(Calibration { mean_ensemble_at_full: m, achieved: v, evaluations: evaluations.get(), converged: true });
        }
    }
    let mut f_lo = at_lo - target_delivered;
    if f_lo.signum() == (at_hi - target_delivered).signum() {
        return Err(HarnessError::NoRoot { target: target_delivered, lo, hi, at_lo, at_hi });
    }

    while evaluations.get() < MAX_EVALUATIONS {
        let f_mid = at_mid - target_delivered;
        if f_mid.abs() < (best.1 - target_delivered).abs() {
            best = (mid, at_mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
        mid = 0.5 * (lo + hi);
        at_mid = eval(mid)?;
        if (at_mid - target_delivered).abs() <= tolerance {
            return Ok(Calibration { mean_ensemble_at_full: mid, achieved: at_mid, evaluations: evaluations.get(), converged: true });
        }
    }
    if (at_mid - target_delivered).abs() < (best.1 - target_delivered).abs() {
        best = (mid, at_mid);
    }
    Ok(Calibration { mean_ensemble_at_full: best.0, achieved: best.1, evaluations: evaluations.get(), converged: false })
}
