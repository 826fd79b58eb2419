//! Multilevel Monte Carlo: the coupled estimator and the complexity planner.
//!
//! Level `l` uses the mesh `h_l = h_0 M^{-l}`. Throughout the planner the
//! coarsest mesh `h_0` plays the role of the time horizon in the complexity
//! analysis; the bounds depend on the horizon and the number of coarse steps
//! only through their ratio.

mod cost;
mod estimator;
mod pilot;
mod planner;

pub(crate) use estimator::map_batches;
pub use cost::{cost_model, level_cost, CostModel, CostReport};
pub use estimator::{
    classical_estimate, coupled_level_sample, level_samples, mlmc_estimate, single_level_samples,
    ClassicalEstimate, LevelStats, MlmcEstimate, Simulator, SimulationSetup, CLASSICAL_FAMILY,
};
pub use pilot::{estimate_constants, estimate_constants_with, FixedRates, PilotEstimate};
pub use planner::{
    allocate_samples_closed_form, allocate_samples_lagrange, c4_prime, choose_levels,
    classical_exponent, closed_form_allocation, complexity_beta1, complexity_constants,
    continuous_levels, lagrange_allocation, level_growth_sum, mlmc_exponent, modeled_cost,
    modeled_mse, optimal_d1, optimal_levels_beta1, plan, Allocation, ComplexityConstants,
    D1Choice, PlanRequest, BETA_ONE_TOLERANCE,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Constants of the multilevel complexity assumptions.
///
/// * bias: `|E[P̂_l − P]| ≤ c1 h_l^α`
/// * variance: `Var[P̂_0] ≤ c2′`, `Var[P̂_l − P̂_{l−1}] ≤ c2 h_l^β`
/// * cost per sample: `c3 h_0^{-1}` at level 0, `c3 (h_l^{-1} + h_{l-1}^{-1})` above
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlmcConstants {
    pub c1: f64,
    pub c2_prime: f64,
    pub c2: f64,
    pub c3: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl MlmcConstants {
    pub fn new(c1: f64, c2_prime: f64, c2: f64, c3: f64, alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("c1", c1), ("c2'", c2_prime), ("c2", c2), ("c3", c3)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain("MlmcConstants", format!("{name} must be > 0, got {v}")));
            }
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain("MlmcConstants", format!("alpha must be > 0, got {alpha}")));
        }
        if !(beta > 0.0 && beta <= 2.0 * alpha * (1.0 + 1e-12)) {
            return Err(Error::domain(
                "MlmcConstants",
                format!("need 0 < beta <= 2 alpha, got alpha = {alpha}, beta = {beta}"),
            ));
        }
        Ok(Self {
            c1,
            c2_prime,
            c2,
            c3,
            alpha,
            beta,
        })
    }

    /// True when `β` is numerically 1 and the closed-form allocation degenerates.
    pub fn is_beta_one(&self) -> bool {
        (1.0 - self.beta).abs() < BETA_ONE_TOLERANCE
    }
}

/// Level structure and per-level sample counts of a multilevel run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlmcPlan {
    /// Mesh refinement factor `M` between consecutive levels.
    pub refinement: u32,
    /// Number of steps of the coarsest grid.
    pub coarse_steps: usize,
    pub horizon: f64,
    /// `N_0, …, N_L`.
    pub samples: Vec<u64>,
    /// Error split: bias budget `ε/d1`, statistical budget `(1 − d1^{-2}) ε²`.
    pub d1: f64,
    pub allocation: Allocation,
}

impl MlmcPlan {
    pub fn new(
        horizon: f64,
        coarse_steps: usize,
        refinement: u32,
        samples: Vec<u64>,
        d1: f64,
        allocation: Allocation,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain("MlmcPlan", format!("horizon must be > 0, got {horizon}")));
        }
        if coarse_steps == 0 {
            return Err(Error::domain("MlmcPlan", "coarse_steps must be positive"));
        }
        if refinement < 2 {
            return Err(Error::domain("MlmcPlan", format!("M must be >= 2, got {refinement}")));
        }
        if samples.is_empty() || samples.contains(&0) {
            return Err(Error::domain("MlmcPlan", "every level needs at least one sample"));
        }
        if !(d1 > 1.0) {
            return Err(Error::domain("MlmcPlan", format!("d1 must be > 1, got {d1}")));
        }
        let finest = (refinement as u128).checked_pow(samples.len() as u32 - 1);
        if finest.map_or(true, |f| f * coarse_steps as u128 > u32::MAX as u128) {
            return Err(Error::domain("MlmcPlan", "finest grid is too large"));
        }
        Ok(Self {
            refinement,
            coarse_steps,
            horizon,
            samples,
            d1,
            allocation,
        })
    }

    /// `N_l = ⌈n0 · M^{-l(1+β)/2}⌉`, `l = 0..=levels`: the geometric heuristic
    /// used when the constants are not known.
    pub fn geometric(
        horizon: f64,
        coarse_steps: usize,
        refinement: u32,
        levels: u32,
        n0: u64,
        beta: f64,
    ) -> Result<Self> {
        let decay = (refinement as f64).powf(-(1.0 + beta) / 2.0);
        let samples = (0..=levels)
            .map(|l| ((n0 as f64) * decay.powi(l as i32)).ceil().max(1.0) as u64)
            .collect();
        Self::new(
            horizon,
            coarse_steps,
            refinement,
            samples,
            std::f64::consts::SQRT_2,
            Allocation::Fixed,
        )
    }

    /// Index `L` of the finest level.
    pub fn levels(&self) -> u32 {
        (self.samples.len() - 1) as u32
    }

    pub fn h0(&self) -> f64 {
        self.horizon / self.coarse_steps as f64
    }

    pub fn mesh(&self, level: u32) -> f64 {
        self.horizon / self.steps(level) as f64
    }

    /// Number of steps of the level-`level` grid.
    pub fn steps(&self, level: u32) -> usize {
        self.coarse_steps * (self.refinement as usize).pow(level)
    }
}
