//! Coupled level sampling and the multilevel estimator.

use std::ops::Range;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::{level_cost, CostModel};
use super::MlmcPlan;
use crate::fbm::{coarsen, hosking_sample_batch, FbmSpec, IncrementGrid};
use crate::rde::{simplified_euler_terminal, Functional, LinearFields, Problem, SchemeOrder};
use crate::rng::{Engine, RngStream};
use crate::stats::Summary;
use crate::{Error, Result};

/// Stream family of single-level reference runs; multilevel level `l` uses
/// family `l`, so the two never share noise.
pub const CLASSICAL_FAMILY: u64 = 1 << 32;

/// Paths generated together by one Hosking call.
pub(crate) const BATCH: u64 = 16;

/// Maps `f` over consecutive index batches of `0..count` in parallel and
/// concatenates the results in index order.
pub(crate) fn map_batches<T, F>(count: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<u64>) -> Result<Vec<T>> + Sync + Send,
{
    let n_batches = count.div_ceil(BATCH);
    let parts: Vec<Result<Vec<T>>> = (0..n_batches)
        .into_par_iter()
        .map(|b| f(b * BATCH..((b + 1) * BATCH).min(count)))
        .collect();
    let mut out = Vec::with_capacity(count as usize);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// What is simulated: equation, payoff, driver roughness and scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSetup {
    pub problem: Problem,
    pub functional: Functional,
    pub hurst: f64,
    pub order: SchemeOrder,
    #[serde(default)]
    pub engine: Engine,
}

/// A validated [`SimulationSetup`] with its vector fields built.
#[derive(Debug, Clone)]
pub struct Simulator {
    setup: SimulationSetup,
    fields: LinearFields,
    y0: Vec<f64>,
}

impl Simulator {
    pub fn new(setup: SimulationSetup) -> Result<Self> {
        if !(setup.hurst > 0.0 && setup.hurst < 1.0) {
            return Err(Error::domain(
                "SimulationSetup",
                format!("H must lie in (0,1), got {}", setup.hurst),
            ));
        }
        setup.order.check_admissible(setup.hurst)?;
        Ok(Self {
            fields: setup.problem.fields(),
            y0: setup.problem.initial_state(),
            setup,
        })
    }

    pub fn setup(&self) -> &SimulationSetup {
        &self.setup
    }

    /// Driver law on `steps` uniform steps of `[0, horizon]`.
    pub fn spec(&self, horizon: f64, steps: usize) -> Result<FbmSpec> {
        FbmSpec::new(self.setup.hurst, horizon, steps, self.setup.problem.noise_dim())
    }

    pub fn stream(&self, seed: u64, family: u64, index: u64) -> RngStream {
        RngStream::in_family(seed, family, index).with_engine(self.setup.engine)
    }

    /// Draws the driver increments of paths `indices` of one stream family.
    pub fn grids(&self, spec: &FbmSpec, seed: u64, family: u64, indices: Range<u64>) -> Result<Vec<IncrementGrid>> {
        let streams: Vec<RngStream> = indices.map(|i| self.stream(seed, family, i)).collect();
        hosking_sample_batch(spec, &streams)
    }

    /// Scheme state at the end of `grid`.
    pub fn terminal(&self, grid: &IncrementGrid) -> Result<Vec<f64>> {
        simplified_euler_terminal(&self.y0, grid, &self.fields, self.setup.order)
    }

    /// Functional of the scheme's terminal state on `grid`.
    pub fn payoff(&self, grid: &IncrementGrid) -> Result<f64> {
        Ok(self.setup.functional.eval(&self.terminal(grid)?))
    }

    /// `P̂_l − P̂_{l−1}` for one fine grid; `P̂_{−1} ≡ 0`.
    fn level_difference(&self, level: u32, refinement: u32, grid: &IncrementGrid) -> Result<f64> {
        let fine = self.payoff(grid)?;
        if level == 0 {
            return Ok(fine);
        }
        let coarse = coarsen(grid, refinement as usize)?;
        Ok(fine - self.payoff(&coarse)?)
    }
}

fn check_level(plan: &MlmcPlan, level: u32) -> Result<()> {
    if level > plan.levels() {
        return Err(Error::domain(
            "coupled_level_sample",
            format!("level {level} outside 0..={}", plan.levels()),
        ));
    }
    Ok(())
}

/// One coupled sample of level `level`: the fine and coarse schemes are
/// driven by the same increments, the coarse ones summed from the fine.
pub fn coupled_level_sample(level: u32, plan: &MlmcPlan, sim: &Simulator, rng: &RngStream) -> Result<f64> {
    check_level(plan, level)?;
    let spec = sim.spec(plan.horizon, plan.steps(level))?;
    let grid = hosking_sample_batch(&spec, std::slice::from_ref(rng))?.pop().expect("one grid");
    sim.level_difference(level, plan.refinement, &grid)
}

/// Samples `0..count` of level `level`; sample `i` uses stream `(seed, level, i)`.
pub fn level_samples(level: u32, plan: &MlmcPlan, sim: &Simulator, seed: u64, count: u64) -> Result<Vec<f64>> {
    check_level(plan, level)?;
    let spec = sim.spec(plan.horizon, plan.steps(level))?;
    map_batches(count, |range| {
        sim.grids(&spec, seed, level as u64, range)?
            .iter()
            .map(|g| sim.level_difference(level, plan.refinement, g))
            .collect()
    })
}

/// Payoffs of `count` independent single-level paths with `steps` steps.
pub fn single_level_samples(
    sim: &Simulator,
    horizon: f64,
    steps: usize,
    seed: u64,
    family: u64,
    count: u64,
) -> Result<Vec<f64>> {
    let spec = sim.spec(horizon, steps)?;
    map_batches(count, |range| {
        sim.grids(&spec, seed, family, range)?.iter().map(|g| sim.payoff(g)).collect()
    })
}

/// Statistics of one level of a multilevel run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: u32,
    pub mean: f64,
    pub sample_variance: f64,
    pub samples: u64,
    /// Scheme steps executed, fine plus coarse grid.
    pub cost_units: f64,
    pub wall_seconds: f64,
}

impl LevelStats {
    fn from_samples(level: u32, values: &[f64], cost_units: f64, wall_seconds: f64) -> Self {
        let s = Summary::of(values);
        Self {
            level,
            mean: s.mean,
            sample_variance: s.variance,
            samples: values.len() as u64,
            cost_units,
            wall_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlmcEstimate {
    /// `Σ_l mean_l`.
    pub estimate: f64,
    /// `Σ_l s_l² / N_l`: estimated variance of the estimator.
    pub variance: f64,
    pub levels: Vec<LevelStats>,
    pub wall_seconds: f64,
}

/// Runs the multilevel estimator described by `plan`.
pub fn mlmc_estimate(plan: &MlmcPlan, sim: &Simulator, seed: u64) -> Result<MlmcEstimate> {
    let start = Instant::now();
    let mut levels = Vec::with_capacity(plan.samples.len());
    for (l, &n) in plan.samples.iter().enumerate() {
        let l = l as u32;
        let t = Instant::now();
        let values = level_samples(l, plan, sim, seed, n)?;
        let units = n as f64 * level_cost(CostModel::Giles, l, plan.coarse_steps, plan.refinement);
        levels.push(LevelStats::from_samples(l, &values, units, t.elapsed().as_secs_f64()));
    }
    let estimate = levels.iter().map(|s| s.mean).sum();
    let variance = levels.iter().map(|s| s.sample_variance / s.samples as f64).sum();
    Ok(MlmcEstimate {
        estimate,
        variance,
        levels,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalEstimate {
    pub mean: f64,
    pub sample_variance: f64,
    pub paths: u64,
    pub steps: usize,
    pub wall_seconds: f64,
}

/// Plain Monte Carlo on a single grid, streams from [`CLASSICAL_FAMILY`].
pub fn classical_estimate(
    sim: &Simulator,
    horizon: f64,
    steps: usize,
    paths: u64,
    seed: u64,
) -> Result<ClassicalEstimate> {
    let start = Instant::now();
    let values = single_level_samples(sim, horizon, steps, seed, CLASSICAL_FAMILY, paths)?;
    let s = Summary::of(&values);
    Ok(ClassicalEstimate {
        mean: s.mean,
        sample_variance: s.variance,
        paths,
        steps,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlmc::Allocation;

    fn sphere(functional: Functional) -> Simulator {
        Simulator::new(SimulationSetup {
            problem: Problem::Sphere,
            functional,
            hurst: 0.4,
            order: SchemeOrder::Three,
            engine: Engine::Counter,
        })
        .unwrap()
    }

    fn small_plan(samples: Vec<u64>) -> MlmcPlan {
        MlmcPlan::new(1.0, 8, 2, samples, 2f64.sqrt(), Allocation::Fixed).unwrap()
    }

    #[test]
    fn level_zero_is_plain_sample() {
        let sim = sphere(Functional::G);
        let plan = small_plan(vec![4, 2]);
        let rng = sim.stream(5, 0, 3);
        let spec = sim.spec(1.0, 8).unwrap();
        let grid = hosking_sample_batch(&spec, &[rng]).unwrap().pop().unwrap();
        assert_eq!(coupled_level_sample(0, &plan, &sim, &rng).unwrap(), sim.payoff(&grid).unwrap());
        assert!(coupled_level_sample(2, &plan, &sim, &rng).is_err());
    }

    #[test]
    fn level_sample_uses_summed_increments() {
        let sim = sphere(Functional::Terminal);
        let plan = small_plan(vec![4, 2]);
        let rng = sim.stream(5, 1, 0);
        let spec = sim.spec(1.0, 16).unwrap();
        let grid = hosking_sample_batch(&spec, &[rng]).unwrap().pop().unwrap();
        let coarse = coarsen(&grid, 2).unwrap();
        for c in 0..2 {
            for (k, v) in coarse.component(c).iter().enumerate() {
                assert_eq!(*v, grid.component(c)[2 * k] + grid.component(c)[2 * k + 1]);
            }
        }
        let expected = sim.payoff(&grid).unwrap() - sim.payoff(&coarse).unwrap();
        assert_eq!(coupled_level_sample(1, &plan, &sim, &rng).unwrap(), expected);
    }

    #[test]
    fn batched_samples_match_single_draws() {
        let sim = sphere(Functional::G);
        let plan = small_plan(vec![3, 40]);
        let values = level_samples(1, &plan, &sim, 9, 40).unwrap();
        for i in [0u64, 15, 16, 39] {
            let single = coupled_level_sample(1, &plan, &sim, &sim.stream(9, 1, i)).unwrap();
            assert_eq!(values[i as usize], single);
        }
    }

    #[test]
    fn zero_coefficient_problem_has_zero_variance() {
        let sim = Simulator::new(SimulationSetup {
            problem: Problem::ScalarLinear { a: 0.0 },
            functional: Functional::Terminal,
            hurst: 0.3,
            order: SchemeOrder::Three,
            engine: Engine::Counter,
        })
        .unwrap();
        let plan = small_plan(vec![10, 5, 3]);
        let est = mlmc_estimate(&plan, &sim, 1).unwrap();
        assert_eq!(est.estimate, 1.0);
        assert_eq!(est.variance, 0.0);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let sim = sphere(Functional::G);
        let plan = small_plan(vec![40, 20, 10]);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mlmc_estimate(&plan, &sim, 123).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.variance.to_bits(), b.variance.to_bits());
    }

    #[test]
    fn single_level_plan_is_classical_estimator() {
        let sim = sphere(Functional::G);
        let plan = small_plan(vec![32]);
        let est = mlmc_estimate(&plan, &sim, 4).unwrap();
        let values = single_level_samples(&sim, 1.0, 8, 4, 0, 32).unwrap();
        assert_eq!(est.estimate, Summary::of(&values).mean);
    }

    #[test]
    fn rejects_inadmissible_scheme() {
        let err = Simulator::new(SimulationSetup {
            problem: Problem::Sphere,
            functional: Functional::G,
            hurst: 0.4,
            order: SchemeOrder::Two,
            engine: Engine::Counter,
        });
        assert!(err.is_err());
    }
}
