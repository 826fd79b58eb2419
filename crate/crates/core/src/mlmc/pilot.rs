//! Estimation of the multilevel constants from a pilot run.

use serde::{Deserialize, Serialize};

use super::{LevelStats, MlmcConstants};
use crate::stats::least_squares;
use crate::{Error, Result};

/// Minimum number of pilot levels and samples per level.
pub const MIN_PILOT_LEVELS: usize = 3;
pub const MIN_PILOT_SAMPLES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotEstimate {
    pub constants: MlmcConstants,
    /// Regression slope of the variances before the `β ≤ 2α` cap.
    pub beta_fitted: f64,
    /// Set when `β` was lowered to `2α`.
    pub beta_capped: bool,
}

/// Exponents imposed on a pilot fit instead of regressing them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedRates {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

/// Fits the power laws `|mean_l| ≈ c1 (M^α − 1) h_l^α` and
/// `var_l ≈ c2 h_l^β` over levels `l ≥ 1`; `c2′` is the level-0 variance
/// and `c3` the measured seconds per scheme step (1 when no time was
/// recorded). `meshes[l]` is `h_l`.
pub fn estimate_constants(pilot: &[LevelStats], meshes: &[f64], refinement: u32) -> Result<PilotEstimate> {
    estimate_constants_with(pilot, meshes, refinement, FixedRates::default())
}

/// As [`estimate_constants`], with any exponent in `fixed` held at the given
/// value; only the matching constant is then fitted.
pub fn estimate_constants_with(
    pilot: &[LevelStats],
    meshes: &[f64],
    refinement: u32,
    fixed: FixedRates,
) -> Result<PilotEstimate> {
    Error::check_dim("estimate_constants", pilot.len(), meshes.len())?;
    if pilot.len() < MIN_PILOT_LEVELS {
        return Err(Error::InsufficientPilot(format!(
            "{} levels given, at least {MIN_PILOT_LEVELS} needed",
            pilot.len()
        )));
    }
    if let Some(s) = pilot.iter().find(|s| s.samples < MIN_PILOT_SAMPLES) {
        return Err(Error::InsufficientPilot(format!(
            "level {} has {} samples, at least {MIN_PILOT_SAMPLES} needed",
            s.level, s.samples
        )));
    }
    let upper = &pilot[1..];
    let log_h: Vec<f64> = meshes[1..].iter().map(|h| h.ln()).collect();

    let log_var: Vec<f64> = upper.iter().map(|s| s.sample_variance.ln()).collect();
    if log_var.iter().any(|v| !v.is_finite()) {
        return Err(Error::InsufficientPilot("a level variance is zero".into()));
    }
    let (beta_fitted, log_c2) = fit_power_law(&log_h, &log_var, fixed.beta)?;

    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (x, s) in log_h.iter().zip(upper) {
        if s.mean != 0.0 {
            xs.push(*x);
            ys.push(s.mean.abs().ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientPilot("fewer than two nonzero level means".into()));
    }
    let (alpha, log_mean_scale) = fit_power_law(&xs, &ys, fixed.alpha)?;
    if !(alpha > 0.0) {
        return Err(Error::numerical(
            "estimate_constants",
            format!("fitted weak rate {alpha} is not positive"),
        ));
    }
    let c1 = log_mean_scale.exp() / ((refinement as f64).powf(alpha) - 1.0);

    if !(beta_fitted > 0.0) {
        return Err(Error::numerical(
            "estimate_constants",
            format!("fitted variance rate {beta_fitted} is not positive"),
        ));
    }
    let beta_capped = beta_fitted > 2.0 * alpha;
    let beta = if beta_capped { 2.0 * alpha } else { beta_fitted };

    let units: f64 = pilot.iter().map(|s| s.cost_units).sum();
    let seconds: f64 = pilot.iter().map(|s| s.wall_seconds).sum();
    let c3 = if seconds > 0.0 && units > 0.0 { seconds / units } else { 1.0 };

    let constants = MlmcConstants::new(
        c1,
        pilot[0].sample_variance,
        log_c2.exp(),
        c3,
        alpha,
        beta,
    )?;
    Ok(PilotEstimate {
        constants,
        beta_fitted,
        beta_capped,
    })
}

/// `(slope, intercept)` of `y ≈ intercept + slope x`; with a fixed slope the
/// intercept is the mean residual.
fn fit_power_law(x: &[f64], y: &[f64], slope: Option<f64>) -> Result<(f64, f64)> {
    match slope {
        Some(b) => {
            let n = x.len() as f64;
            Ok((b, x.iter().zip(y).map(|(x, y)| y - b * x).sum::<f64>() / n))
        }
        None => {
            let fit = least_squares(x, y)?;
            Ok((fit.slope, fit.intercept))
        }
    }
}
