//! A-priori cost models for comparing multilevel and single-level runs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-sample cost of a level, in units of grid steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostModel {
    /// Size of the finer grid of the level (`M_l`).
    #[default]
    Linear,
    /// Squared size of the finer grid (`M_l²`), for an O(n²) noise generator.
    Quadratic,
    /// Both grids of the level are simulated: `M_l + M_{l-1}`, `M_0` at level 0.
    Giles,
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostModel::Linear => "linear",
            CostModel::Quadratic => "quadratic",
            CostModel::Giles => "giles",
        })
    }
}

impl FromStr for CostModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(CostModel::Linear),
            "quadratic" => Ok(CostModel::Quadratic),
            "giles" => Ok(CostModel::Giles),
            _ => Err(Error::domain(
                "cost_model",
                format!("unknown cost model '{s}' (expected linear, quadratic or giles)"),
            )),
        }
    }
}

/// Cost of one sample at `level`.
pub fn level_cost(model: CostModel, level: u32, coarse_steps: usize, refinement: u32) -> f64 {
    let steps = coarse_steps as f64 * (refinement as f64).powi(level as i32);
    match model {
        CostModel::Linear => steps,
        CostModel::Quadratic => steps * steps,
        CostModel::Giles if level == 0 => steps,
        CostModel::Giles => steps * (1.0 + 1.0 / refinement as f64),
    }
}

/// Multilevel cost and the matched single-level comparator on the finest grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub model: CostModel,
    pub mlmc_cost: f64,
    /// Equal to `mlmc_cost` by construction.
    pub classical_cost: f64,
    /// Paths on the finest grid affordable at the multilevel cost (real-valued).
    pub classical_paths: f64,
    /// `Σ N_l M_l² / Σ N_l M_l`: the factor by which an O(n²) generator
    /// inflates the per-path cost relative to a linear one.
    pub grid_ratio: f64,
}

/// Evaluates `model` for per-level sample counts `samples` (may be real).
pub fn cost_model(
    samples: &[f64],
    coarse_steps: usize,
    refinement: u32,
    model: CostModel,
) -> Result<CostReport> {
    if samples.is_empty() {
        return Err(Error::domain("cost_model", "need at least one level"));
    }
    if coarse_steps == 0 || refinement < 2 {
        return Err(Error::domain("cost_model", "need coarse_steps > 0 and M >= 2"));
    }
    let finest = (samples.len() - 1) as u32;
    let total = |m: CostModel| -> f64 {
        samples
            .iter()
            .enumerate()
            .map(|(l, n)| n * level_cost(m, l as u32, coarse_steps, refinement))
            .sum()
    };
    let mlmc_cost = total(model);
    let per_path = match model {
        CostModel::Giles => level_cost(CostModel::Linear, finest, coarse_steps, refinement),
        m => level_cost(m, finest, coarse_steps, refinement),
    };
    let classical_paths = mlmc_cost / per_path;
    Ok(CostReport {
        model,
        mlmc_cost,
        classical_cost: classical_paths * per_path,
        classical_paths,
        grid_ratio: total(CostModel::Quadratic) / total(CostModel::Linear),
    })
}
