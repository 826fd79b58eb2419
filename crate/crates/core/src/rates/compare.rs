//! Multilevel versus single-level Monte Carlo at matched modeled cost.
//!
//! Protocol: fix the level structure (`h_0`, `L`, `M`) and the heuristic
//! `N_l = ⌈N_0 M^{-l(1+β)/2}⌉`; run the single-level estimator on the finest
//! mesh `h_L` with as many paths as the same modeled cost buys (cost of a
//! level = paths × size of its finer grid), and compare estimator variances.
//! Both estimators can be run with `scale` times more paths; the reported
//! variances are normalised back to the reference path counts.

use serde::{Deserialize, Serialize};

use crate::mlmc::{
    classical_estimate, cost_model, mlmc_estimate, ClassicalEstimate, CostModel, MlmcEstimate, MlmcPlan,
    SimulationSetup, Simulator,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub setup: SimulationSetup,
    pub horizon: f64,
    pub coarse_steps: usize,
    pub levels: u32,
    pub refinement: u32,
    pub n0: u64,
    /// `β` of the sample-count heuristic.
    pub beta: f64,
    /// Path-count multiplier for both estimators.
    pub scale: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Reference per-level path counts.
    pub samples: Vec<u64>,
    /// Real-valued single-level path count matching the multilevel cost.
    pub classical_paths: f64,
    /// Modeled costs under the finer-grid convention (equal by construction).
    pub mlmc_cost: f64,
    pub classical_cost: f64,
    /// Costs under a generator whose cost grows quadratically with grid size.
    pub mlmc_cost_quadratic: f64,
    pub classical_cost_quadratic: f64,
    /// Estimator variances at the reference path counts.
    pub mlmc_variance: f64,
    pub classical_variance: f64,
    pub variance_ratio: f64,
    pub mlmc: MlmcEstimate,
    pub classical: ClassicalEstimate,
}

pub fn compare_mlmc_classical(config: &ComparisonConfig) -> Result<ComparisonReport> {
    if config.scale == 0 || config.n0 == 0 {
        return Err(Error::domain("compare", "n0 and scale must be positive"));
    }
    if !(config.beta > 0.0) {
        return Err(Error::domain("compare", "heuristic beta must be > 0"));
    }
    let sim = Simulator::new(config.setup)?;
    let reference = MlmcPlan::geometric(
        config.horizon,
        config.coarse_steps,
        config.refinement,
        config.levels,
        config.n0,
        config.beta,
    )?;
    let counts: Vec<f64> = reference.samples.iter().map(|&n| n as f64).collect();
    let linear = cost_model(&counts, config.coarse_steps, config.refinement, CostModel::Linear)?;
    let quadratic = cost_model(&counts, config.coarse_steps, config.refinement, CostModel::Quadratic)?;
    let finest = reference.steps(reference.levels());

    let mut scaled = reference.clone();
    for n in &mut scaled.samples {
        *n *= config.scale;
    }
    let mlmc = mlmc_estimate(&scaled, &sim, config.seed)?;
    let classical_runs = (linear.classical_paths * config.scale as f64).ceil().max(2.0) as u64;
    let classical = classical_estimate(&sim, config.horizon, finest, classical_runs, config.seed)?;

    let mlmc_variance: f64 = mlmc
        .levels
        .iter()
        .zip(&reference.samples)
        .map(|(s, &n)| s.sample_variance / n as f64)
        .sum();
    let classical_variance = classical.sample_variance / linear.classical_paths;
    Ok(ComparisonReport {
        samples: reference.samples.clone(),
        classical_paths: linear.classical_paths,
        mlmc_cost: linear.mlmc_cost,
        classical_cost: linear.classical_cost,
        mlmc_cost_quadratic: quadratic.mlmc_cost,
        classical_cost_quadratic: linear.classical_paths * (finest as f64).powi(2),
        mlmc_variance,
        classical_variance,
        variance_ratio: mlmc_variance / classical_variance,
        mlmc,
        classical,
    })
}
