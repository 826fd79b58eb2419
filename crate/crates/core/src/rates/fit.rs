//! Log-log regression of error ladders.

use serde::{Deserialize, Serialize};

use super::ErrorLadder;
use crate::stats::least_squares;
use crate::{Error, Result};

/// Ladder points entering a rate fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitWindow {
    All,
    /// Points with mesh at most this value.
    MaxMesh(f64),
    /// Index range `start..end` into the ladder.
    Indices(usize, usize),
}

impl FitWindow {
    /// Meshes at or below which the asymptotic regime is assumed to start for
    /// the sphere benchmark: 0.02 from `H = 0.4` up, 0.01 below.
    pub fn asymptotic(hurst: f64) -> Self {
        if hurst >= 0.4 - 1e-12 {
            FitWindow::MaxMesh(0.02)
        } else {
            FitWindow::MaxMesh(0.01)
        }
    }

    /// Resolves the window to an index range of `ladder`.
    pub fn indices(&self, ladder: &ErrorLadder) -> Result<(usize, usize)> {
        let (start, end) = match *self {
            FitWindow::All => (0, ladder.len()),
            FitWindow::Indices(a, b) => (a, b),
            FitWindow::MaxMesh(h) => {
                // meshes decrease, so the window is a suffix
                let start = ladder.meshes.iter().position(|&m| m <= h * (1.0 + 1e-12));
                (start.unwrap_or(ladder.len()), ladder.len())
            }
        };
        if end > ladder.len() || start + 2 > end {
            return Err(Error::domain(
                "fit_rate",
                format!("fit window {start}..{end} has fewer than two of {} points", ladder.len()),
            ));
        }
        Ok((start, end))
    }
}

/// Least-squares line through `(log mesh, log error)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Empirical convergence rate.
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    /// Ladder indices `start..end` used.
    pub window: (usize, usize),
}

impl RateFit {
    /// Error predicted by the fitted power law at `mesh`.
    pub fn predict(&self, mesh: f64) -> f64 {
        (self.intercept + self.slope * mesh.ln()).exp()
    }
}

pub fn fit_rate(ladder: &ErrorLadder, window: FitWindow) -> Result<RateFit> {
    let (start, end) = window.indices(ladder)?;
    let errors = &ladder.errors[start..end];
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::domain(
            "fit_rate",
            format!("errors in the fit window must be positive, found {e}"),
        ));
    }
    let x: Vec<f64> = ladder.meshes[start..end].iter().map(|h| h.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let fit = least_squares(&x, &y)?;
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        slope_std_error: fit.slope_std_error,
        window: (start, end),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn ladder(errors: impl Fn(f64) -> f64, n: usize) -> ErrorLadder {
        let steps: Vec<usize> = (0..n).map(|k| 4usize << k).collect();
        let meshes: Vec<f64> = steps.iter().map(|&s| 1.0 / s as f64).collect();
        let errs = meshes.iter().map(|&h| errors(h)).collect();
        ErrorLadder::new(steps, meshes, errs, vec![0.0; n], 100).unwrap()
    }

    #[test]
    fn exact_power_law() {
        let l = ladder(|h| 2.5 * h.powf(0.3), 7);
        let fit = fit_rate(&l, FitWindow::All).unwrap();
        assert!((fit.slope - 0.3).abs() < 1e-12);
        assert!((fit.intercept - 2.5f64.ln()).abs() < 1e-12);
        assert!(fit.slope_std_error < 1e-12);
        assert!((fit.predict(0.01) - 2.5 * 0.01f64.powf(0.3)).abs() < 1e-12);
    }

    #[test]
    fn two_point_slope() {
        let l = ladder(|h| if h > 0.2 { 1.0 } else { 0.5 }, 2);
        let fit = fit_rate(&l, FitWindow::All).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_power_law() {
        let mut u = RngStream::new(8, 0).uniforms(0);
        let noise: Vec<f64> = (0..9).map(|_| 0.1 * (u.closed_open() - 0.5)).collect();
        let steps: Vec<usize> = (0..9).map(|k| 4usize << k).collect();
        let meshes: Vec<f64> = steps.iter().map(|&s| 1.0 / s as f64).collect();
        let errs = meshes.iter().zip(&noise).map(|(h, xi)| h.powf(0.3) * (1.0 + xi)).collect();
        let l = ErrorLadder::new(steps, meshes, errs, vec![0.0; 9], 1).unwrap();
        let fit = fit_rate(&l, FitWindow::All).unwrap();
        assert!((0.25..=0.35).contains(&fit.slope), "{}", fit.slope);
    }

    #[test]
    fn windows() {
        let l = ladder(|h| h, 6);
        assert_eq!(FitWindow::MaxMesh(0.02).indices(&l).unwrap(), (4, 6));
        assert_eq!(FitWindow::Indices(1, 3).indices(&l).unwrap(), (1, 3));
        assert!(FitWindow::Indices(2, 3).indices(&l).is_err());
        assert!(FitWindow::MaxMesh(0.001).indices(&l).is_err());
        let zero = ladder(|h| if h < 0.05 { 0.0 } else { h }, 6);
        assert!(fit_rate(&zero, FitWindow::All).is_err());
    }
}
