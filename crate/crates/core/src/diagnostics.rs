//! Numerical checks of the structural properties of `R(n)` and of the density
//! sequence: convex decay, monotone likelihood ratio between densities at two
//! steps, first-order stochastic dominance, and the long-range ratio bound
//! `R(n2) / R(n1) <= (N0 - n2) / (N0 - n1)`.

use serde::{Deserialize, Serialize};

use crate::density::{PopulationState, RTrajectory};
use crate::error::{Error, Result};

/// Absolute slack for analytic identities.
pub const ANALYTIC_TOLERANCE: f64 = 1e-9;
/// Slack for equality cases.
pub const EQUALITY_TOLERANCE: f64 = 1e-12;
/// Masses at or below this are ignored by the likelihood-ratio check.
pub const NEGLIGIBLE_MASS: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    /// `max_n [(R(n+1) - R(n+2)) - (R(n) - R(n+1))]`.
    pub max_violation: f64,
    /// Step `n` where the maximum is attained.
    pub location: u64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Convexity of a unit-step sequence `R(0), R(1), ...`.
pub fn check_convexity(values: &[f64]) -> Result<ConvexityReport> {
    let steps: Vec<u64> = (0..values.len() as u64).collect();
    check_convexity_sampled(&steps, values)
}

pub fn check_trajectory_convexity(traj: &RTrajectory) -> Result<ConvexityReport> {
    check_convexity(&traj.values)
}

/// Convexity of `R` sampled at strictly increasing steps. The per-step decrease
/// `(R(a) - R(b)) / (b - a)` must not grow from one interval to the next; on a
/// unit grid this is exactly the second-difference test.
pub fn check_convexity_sampled(steps: &[u64], values: &[f64]) -> Result<ConvexityReport> {
    if steps.len() != values.len() {
        return Err(Error::invalid("values", "steps and values differ in length"));
    }
    if values.len() < 3 {
        return Err(Error::OutOfRange(format!(
            "convexity needs at least 3 values, got {}",
            values.len()
        )));
    }
    if steps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("steps", "must be strictly increasing"));
    }
    let rate = |i: usize| (values[i] - values[i + 1]) / (steps[i + 1] - steps[i]) as f64;
    let mut max_violation = f64::NEG_INFINITY;
    let mut location = steps[0];
    for (i, &step) in steps.iter().enumerate().take(values.len() - 2) {
        let violation = rate(i + 1) - rate(i);
        if violation > max_violation {
            max_violation = violation;
            location = step;
        }
    }
    Ok(ConvexityReport {
        max_violation,
        location,
        tolerance: ANALYTIC_TOLERANCE,
        passed: max_violation <= ANALYTIC_TOLERANCE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlrpReport {
    pub step_a: u64,
    pub step_b: u64,
    /// Largest relative decrease of `w_a / w_b` between consecutive atoms.
    pub max_ratio_violation: f64,
    pub ratio_location: Option<usize>,
    /// Largest `CDF_a - CDF_b` over the atom grid.
    pub max_dominance_violation: f64,
    pub dominance_location: Option<usize>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks that `w_a / w_b` is non-decreasing in `s` and that `a` first-order
/// stochastically dominates `b`.
pub fn check_mlrp(state_a: &PopulationState, state_b: &PopulationState) -> Result<MlrpReport> {
    let a = state_a.weights();
    let b = state_b.weights();
    if a.len() != b.len() {
        return Err(Error::GridMismatch {
            left: a.len(),
            right: b.len(),
        });
    }

    let mut max_ratio_violation = 0.0;
    let mut ratio_location = None;
    let mut previous: Option<f64> = None;
    for i in 0..a.len() {
        if a[i] <= NEGLIGIBLE_MASS || b[i] <= NEGLIGIBLE_MASS {
            continue;
        }
        let ratio = a[i] / b[i];
        if let Some(prev) = previous {
            let violation = (prev - ratio) / prev.max(ratio);
            if violation > max_ratio_violation {
                max_ratio_violation = violation;
                ratio_location = Some(i);
            }
        }
        previous = Some(ratio);
    }

    let mut max_dominance_violation = 0.0;
    let mut dominance_location = None;
    let (mut cdf_a, mut cdf_b) = (0.0, 0.0);
    for i in 0..a.len() {
        cdf_a += a[i];
        cdf_b += b[i];
        let violation = cdf_a - cdf_b;
        if violation > max_dominance_violation {
            max_dominance_violation = violation;
            dominance_location = Some(i);
        }
    }

    Ok(MlrpReport {
        step_a: state_a.step(),
        step_b: state_b.step(),
        max_ratio_violation,
        ratio_location,
        max_dominance_violation,
        dominance_location,
        tolerance: ANALYTIC_TOLERANCE,
        passed: max_ratio_violation <= ANALYTIC_TOLERANCE && max_dominance_violation <= ANALYTIC_TOLERANCE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioBoundReport {
    pub n1: u64,
    pub n2: u64,
    pub ratio: f64,
    pub bound: f64,
    pub slack: f64,
    pub passed: bool,
}

/// `R(n2) / R(n1) <= (N0 - n2) / (N0 - n1)`, for `0 < n1 < n2 < N0`.
pub fn check_ratio_bound(traj: &RTrajectory, n1: u64, n2: u64) -> Result<RatioBoundReport> {
    ratio_bound(traj.n0, &traj.values, n1, n2)
}

/// Same check on a bare unit-step `R` sequence.
pub fn ratio_bound(n0: u64, values: &[f64], n1: u64, n2: u64) -> Result<RatioBoundReport> {
    if !(0 < n1 && n1 < n2 && n2 < n0) {
        return Err(Error::OutOfRange(format!(
            "need 0 < n1 < n2 < n0, got n1={n1} n2={n2} n0={n0}"
        )));
    }
    if n2 as usize >= values.len() {
        return Err(Error::OutOfRange(format!(
            "n2 = {n2} beyond trajectory of length {}",
            values.len()
        )));
    }
    let ratio = values[n2 as usize] / values[n1 as usize];
    let bound = (n0 - n2) as f64 / (n0 - n1) as f64;
    Ok(RatioBoundReport {
        n1,
        n2,
        ratio,
        bound,
        slack: bound - ratio,
        passed: ratio <= bound + ANALYTIC_TOLERANCE,
    })
}

/// Non-increasing within [`ANALYTIC_TOLERANCE`]; returns the worst increase.
pub fn max_increase(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}
