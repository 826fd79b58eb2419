//! Path-regularity diagnostics for discrete (level-1) paths.
//!
//! All suprema are taken over dissections made of grid points of the given
//! path, so the results are exact for the piecewise-linear interpolation
//! only up to that restriction.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Values of an `R^dim`-valued path at strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePath {
    times: Vec<f64>,
    dim: usize,
    /// Row-major `len × dim`.
    values: Vec<f64>,
}

impl DiscretePath {
    pub fn new(times: Vec<f64>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::domain("DiscretePath", "path needs at least one point"));
        }
        if dim == 0 {
            return Err(Error::domain("DiscretePath", "dimension must be positive"));
        }
        Error::check_dim("DiscretePath values", times.len() * dim, values.len())?;
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("DiscretePath", "times must be strictly increasing"));
        }
        Ok(Self { times, dim, values })
    }

    /// Scalar path from its values.
    pub fn scalar(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(times, 1, values)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        self.value(i)
            .iter()
            .zip(self.value(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("p_variation", format!("p must be >= 1, got {p}")))
    }
}

/// `max_{D} Σ |x_{t_{i+1}} - x_{t_i}|^p` over dissections `D` of the index
/// range `from..=to`, via dynamic programming on the last dissection point.
fn variation_power(path: &DiscretePath, p: f64, from: usize, to: usize) -> f64 {
    let mut best = vec![0.0; to - from + 1];
    for j in from + 1..=to {
        best[j - from] = (from..j)
            .map(|i| best[i - from] + path.distance(i, j).powf(p))
            .fold(0.0, f64::max);
    }
    best[to - from]
}

/// p-variation `(sup_D Σ |Δx|^p)^{1/p}` over dissections of the grid.
pub fn p_variation(path: &DiscretePath, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(variation_power(path, p, 0, path.len() - 1).powf(1.0 / p))
}

/// `sup_{u<v} |x_v - x_u| / (v - u)^exponent` over grid pairs.
pub fn holder_norm(path: &DiscretePath, exponent: f64) -> Result<f64> {
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(Error::domain(
            "holder_norm",
            format!("exponent must lie in (0,1], got {exponent}"),
        ));
    }
    let n = path.len();
    let t = path.times();
    let mut sup = 0.0f64;
    for u in 0..n {
        for v in u + 1..n {
            sup = sup.max(path.distance(u, v) / (t[v] - t[u]).powf(exponent));
        }
    }
    Ok(sup)
}

/// Number of greedy stopping times strictly inside the time range.
///
/// With control `ω(s,t) = ‖x‖^p_{p-var;[s,t]}`, set `τ_0 = t_0` and let
/// `τ_{i+1}` be the first grid time `u` with `ω(τ_i, u) ≥ alpha`. The result
/// counts the `τ_i`, `i ≥ 1`, that fall before the final grid time.
pub fn greedy_count(path: &DiscretePath, p: f64, alpha: f64) -> Result<usize> {
    check_p(p)?;
    if !(alpha > 0.0) {
        return Err(Error::domain("greedy_count", format!("alpha must be > 0, got {alpha}")));
    }
    let last = path.len() - 1;
    let mut start = 0;
    let mut count = 0;
    'outer: while start < last {
        // incremental DP for ω(start, u), u = start+1, start+2, ...
        let mut best = vec![0.0; last - start + 1];
        for u in start + 1..=last {
            best[u - start] = (start..u)
                .map(|i| best[i - start] + path.distance(i, u).powf(p))
                .fold(0.0, f64::max);
            if best[u - start] >= alpha {
                if u == last {
                    break 'outer;
                }
                count += 1;
                start = u;
                continue 'outer;
            }
        }
        break;
    }
    Ok(count)
}

/// Summary emitted by the `diagnostics` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathDiagnostics {
    pub p: f64,
    pub alpha: f64,
    pub p_variation: f64,
    /// Hölder norm with exponent `1/p`.
    pub holder_norm: f64,
    pub greedy_count: usize,
}

pub fn diagnose(path: &DiscretePath, p: f64, alpha: f64) -> Result<PathDiagnostics> {
    Ok(PathDiagnostics {
        p,
        alpha,
        p_variation: p_variation(path, p)?,
        holder_norm: holder_norm(path, (1.0 / p).min(1.0))?,
        greedy_count: greedy_count(path, p, alpha)?,
    })
}
