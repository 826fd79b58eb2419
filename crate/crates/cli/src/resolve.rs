//! Fully-resolved experiment configurations.
//!
//! Resolution applies defaults and checks every numeric parameter against
//! the precondition of the library module that consumes it, so that bad
//! input is rejected before any simulation starts.

use std::path::PathBuf;
use std::str::FromStr;

use rough_mlmc::fbm::FbmSpec;
use rough_mlmc::mlmc::{CostModel, D1Choice, SimulationSetup, Simulator};
use rough_mlmc::rates::{ComparisonConfig, FitWindow, LadderRequest, StrongNorm, StrongReference};
use rough_mlmc::rde::{Functional, Problem, SchemeOrder};
use rough_mlmc::rng::Engine;
use serde::Serialize;

use crate::config::{CompareArgs, DiagnosticsArgs, FbmArgs, MlmcArgs, RateArgs, SolveArgs};
use crate::error::{CliError, CliResult};

pub const DEFAULT_HURST: f64 = 0.4;
pub const DEFAULT_H0: f64 = 1.0 / 64.0;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_HORIZON: f64 = 1.0;
pub const DEFAULT_LADDER: &str = "64,128,256,512,1024,2048,4096";
pub const DEFAULT_PATHS: u64 = 10_000;

/// Wraps a library precondition failure with the module whose contract it is.
fn contract(module: &'static str) -> impl Fn(rough_mlmc::Error) -> CliError {
    move |e| CliError::config(format!("{e} (violates the {module} contract)"))
}

fn check_hurst(h: f64) -> CliResult<f64> {
    if h > 0.0 && h < 1.0 {
        Ok(h)
    } else {
        Err(CliError::config(format!("hurst = {h} violates H ∈ (0,1) (fbm contract)")))
    }
}

fn check_positive(name: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(format!("{name} = {v} must be a positive finite number")))
    }
}

fn check_count<T: PartialOrd + Copy + std::fmt::Display>(name: &str, v: T, min: T) -> CliResult<T> {
    if v >= min {
        Ok(v)
    } else {
        Err(CliError::config(format!("{name} = {v} must be at least {min}")))
    }
}

fn parse_named<T: FromStr<Err = rough_mlmc::Error>>(module: &'static str, text: &str) -> CliResult<T> {
    text.parse().map_err(contract(module))
}

fn order(order: Option<u8>, hurst: f64) -> CliResult<SchemeOrder> {
    let order = match order {
        Some(n) => SchemeOrder::try_from(n).map_err(contract("rde"))?,
        None => SchemeOrder::for_hurst(hurst),
    };
    order.check_admissible(hurst).map_err(contract("rde"))?;
    Ok(order)
}

/// Number of coarse steps `horizon / h0`, which must be a positive integer.
fn coarse_steps(horizon: f64, h0: f64) -> CliResult<usize> {
    check_positive("h0", h0)?;
    let n = (horizon / h0).round();
    if n < 1.0 || (n * h0 - horizon).abs() > 1e-9 * horizon {
        return Err(CliError::config(format!(
            "h0 = {h0} must divide the horizon {horizon} into an integer number of steps (mlmc contract)"
        )));
    }
    Ok(n as usize)
}

fn setup(problem: Option<&str>, functional: Option<&str>, default_functional: Functional, hurst: Option<f64>, ord: Option<u8>) -> CliResult<SimulationSetup> {
    let hurst = check_hurst(hurst.unwrap_or(DEFAULT_HURST))?;
    let setup = SimulationSetup {
        problem: parse_named("rde", problem.unwrap_or("sphere"))?,
        functional: functional.map_or(Ok(default_functional), |f| parse_named("rde", f))?,
        hurst,
        order: order(ord, hurst)?,
        engine: Engine::Counter,
    };
    Simulator::new(setup).map_err(contract("rde"))?;
    Ok(setup)
}

#[derive(Debug, Clone, Serialize)]
pub struct FbmConfig {
    pub hurst: f64,
    pub steps: usize,
    pub horizon: f64,
    pub components: usize,
    pub seed: u64,
}

impl FbmConfig {
    pub fn resolve(a: FbmArgs) -> CliResult<Self> {
        let c = Self {
            hurst: check_hurst(a.hurst.unwrap_or(DEFAULT_HURST))?,
            steps: check_count("steps", a.steps.unwrap_or(64), 1)?,
            horizon: check_positive("horizon", a.horizon.unwrap_or(DEFAULT_HORIZON))?,
            components: check_count("components", a.components.unwrap_or(1), 1)?,
            seed: a.seed.unwrap_or(DEFAULT_SEED),
        };
        c.spec()?;
        Ok(c)
    }

    pub fn spec(&self) -> CliResult<FbmSpec> {
        FbmSpec::new(self.hurst, self.horizon, self.steps, self.components).map_err(contract("fbm"))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveConfig {
    pub problem: Problem,
    pub hurst: f64,
    pub steps: usize,
    pub horizon: f64,
    pub order: SchemeOrder,
    pub seed: u64,
}

impl SolveConfig {
    pub fn resolve(a: SolveArgs) -> CliResult<Self> {
        let s = setup(a.problem.as_deref(), None, Functional::Terminal, a.hurst, a.order)?;
        Ok(Self {
            problem: s.problem,
            hurst: s.hurst,
            steps: check_count("steps", a.steps.unwrap_or(64), 1)?,
            horizon: check_positive("horizon", a.horizon.unwrap_or(DEFAULT_HORIZON))?,
            order: s.order,
            seed: a.seed.unwrap_or(DEFAULT_SEED),
        })
    }

    pub fn setup(&self) -> SimulationSetup {
        SimulationSetup {
            problem: self.problem,
            functional: Functional::Terminal,
            hurst: self.hurst,
            order: self.order,
            engine: Engine::Counter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RateKind {
    Strong,
    Weak,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateConfig {
    pub kind: RateKind,
    pub setup: SimulationSetup,
    pub request: LadderRequest,
    /// Weak reference value (weak ladders only).
    pub reference_value: Option<f64>,
    pub window: FitWindow,
}

fn parse_ladder(text: &str) -> CliResult<Vec<usize>> {
    let mut steps = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::config(format!("mesh-ladder entry '{s}' is not a step count")))
        })
        .collect::<CliResult<Vec<usize>>>()?;
    steps.sort_unstable();
    steps.dedup();
    Ok(steps)
}

impl RateConfig {
    pub fn resolve(kind: RateKind, a: RateArgs) -> CliResult<Self> {
        let default_functional = match kind {
            RateKind::Strong => Functional::Terminal,
            RateKind::Weak => Functional::F,
        };
        let setup = setup(a.problem.as_deref(), a.functional.as_deref(), default_functional, a.hurst, a.order)?;
        let horizon = check_positive("horizon", a.horizon.unwrap_or(DEFAULT_HORIZON))?;
        let norm = match a.norm.as_deref().unwrap_or("terminal") {
            "terminal" => StrongNorm::Terminal,
            "sup" => StrongNorm::Sup,
            other => return Err(CliError::config(format!("norm '{other}' is not one of terminal, sup"))),
        };
        let reference = match a.strong_reference.as_deref().unwrap_or("finer") {
            "finer" => StrongReference::Finer,
            "exact" => StrongReference::Exact,
            other => {
                return Err(CliError::config(format!("strong-reference '{other}' is not one of finer, exact")))
            }
        };
        let request = LadderRequest {
            horizon,
            steps: parse_ladder(a.mesh_ladder.as_deref().unwrap_or(DEFAULT_LADDER))?,
            paths: check_count("paths", a.paths.unwrap_or(DEFAULT_PATHS), 2)?,
            seed: a.seed.unwrap_or(DEFAULT_SEED),
            norm,
            reference,
        };
        let largest = *request.steps.last().expect("nonempty after parsing");
        if let Some(n) = request.steps.iter().find(|&&n| n == 0 || largest % n != 0 || !(largest / n).is_power_of_two()) {
            return Err(CliError::config(format!(
                "mesh-ladder step {n} is not {largest} divided by a power of two (rates contract)"
            )));
        }
        let reference_value = match kind {
            RateKind::Strong => None,
            RateKind::Weak => Some(match a.reference_value {
                Some(v) => v,
                None => setup.functional.reference_value(&setup.problem, setup.hurst, horizon).ok_or_else(|| {
                    CliError::config(format!(
                        "functional {} has no known reference value on problem {}; pass --reference-value",
                        setup.functional, setup.problem
                    ))
                })?,
            }),
        };
        let window = match a.fit_max_mesh.as_deref().unwrap_or("auto") {
            "auto" => FitWindow::asymptotic(setup.hurst),
            "all" => FitWindow::All,
            text => FitWindow::MaxMesh(check_positive(
                "fit-max-mesh",
                text.parse()
                    .map_err(|_| CliError::config(format!("fit-max-mesh '{text}' is not a number, auto or all")))?,
            )?),
        };
        Ok(Self {
            kind,
            setup,
            request,
            reference_value,
            window,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MlmcConfig {
    pub epsilon: f64,
    pub setup: SimulationSetup,
    pub horizon: f64,
    pub coarse_steps: usize,
    pub refinement: u32,
    pub d1: D1Choice,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c2_prime: Option<f64>,
    pub c3: Option<f64>,
    pub seed: u64,
    pub cost_model: CostModel,
    pub pilot_levels: u32,
    pub pilot_samples: u64,
    pub max_levels: u32,
}

impl MlmcConfig {
    pub fn resolve(a: MlmcArgs) -> CliResult<Self> {
        let setup = setup(a.problem.as_deref(), a.functional.as_deref(), Functional::G, a.hurst, a.order)?;
        let horizon = check_positive("horizon", a.horizon.unwrap_or(DEFAULT_HORIZON))?;
        let d1 = match a.d1.as_deref().unwrap_or("auto") {
            "auto" => D1Choice::Auto,
            text => {
                let d1: f64 = text
                    .parse()
                    .map_err(|_| CliError::config(format!("d1 '{text}' is not a number or auto")))?;
                if !(d1 > 1.0 && d1.is_finite()) {
                    return Err(CliError::config(format!("d1 = {d1} violates d1 > 1 (mlmc contract)")));
                }
                D1Choice::Fixed(d1)
            }
        };
        let optional = |name: &str, v: Option<f64>| v.map(|v| check_positive(name, v)).transpose();
        let alpha = optional("alpha", a.alpha)?;
        let beta = optional("beta", a.beta)?;
        if let (Some(al), Some(be)) = (alpha, beta) {
            if be > 2.0 * al {
                return Err(CliError::config(format!(
                    "beta = {be} violates 0 < beta <= 2 alpha = {} (mlmc contract)",
                    2.0 * al
                )));
            }
        }
        let c = Self {
            epsilon: check_positive("epsilon", a.epsilon.unwrap_or(0.05))?,
            setup,
            horizon,
            coarse_steps: coarse_steps(horizon, a.h0.unwrap_or(DEFAULT_H0))?,
            refinement: check_count("M", a.refinement.unwrap_or(2), 2)?,
            d1,
            alpha,
            beta,
            c1: optional("c1", a.c1)?,
            c2: optional("c2", a.c2)?,
            c2_prime: optional("c2-prime", a.c2_prime)?,
            c3: optional("c3", a.c3)?,
            seed: a.seed.unwrap_or(DEFAULT_SEED),
            cost_model: parse_named("mlmc", a.cost_model.as_deref().unwrap_or("linear"))?,
            pilot_levels: check_count("pilot-levels", a.pilot_levels.unwrap_or(4), 2)?,
            pilot_samples: check_count("pilot-samples", a.pilot_samples.unwrap_or(200), 100)?,
            max_levels: a.max_levels.unwrap_or(12),
        };
        Ok(c)
    }

    /// True when every constant is given and no pilot run is needed.
    pub fn constants_given(&self) -> bool {
        self.alpha.is_some() && self.beta.is_some() && self.c1.is_some() && self.c2.is_some() && self.c2_prime.is_some()
    }
}

pub fn resolve_compare(a: CompareArgs) -> CliResult<ComparisonConfig> {
    let setup = setup(a.problem.as_deref(), a.functional.as_deref(), Functional::G, a.hurst, a.order)?;
    let horizon = check_positive("horizon", a.horizon.unwrap_or(DEFAULT_HORIZON))?;
    Ok(ComparisonConfig {
        setup,
        horizon,
        coarse_steps: coarse_steps(horizon, a.h0.unwrap_or(DEFAULT_H0))?,
        levels: a.levels.unwrap_or(7),
        refinement: check_count("M", a.refinement.unwrap_or(2), 2)?,
        n0: check_count("n0", a.n0.unwrap_or(100), 1)?,
        beta: check_positive("beta", a.beta.unwrap_or(0.6))?,
        scale: check_count("scale", a.scale.unwrap_or(1), 1)?,
        seed: a.seed.unwrap_or(DEFAULT_SEED),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsConfig {
    pub input: PathBuf,
    pub p: f64,
    pub alpha: f64,
}

impl DiagnosticsConfig {
    pub fn resolve(a: DiagnosticsArgs) -> CliResult<Self> {
        let p = a.p.unwrap_or(3.0);
        if !(p >= 1.0 && p.is_finite()) {
            return Err(CliError::config(format!("p = {p} violates p >= 1 (diagnostics contract)")));
        }
        Ok(Self {
            input: a.input.ok_or_else(|| CliError::config("diagnostics needs --input <path.csv>"))?,
            p,
            alpha: check_positive("alpha", a.alpha.unwrap_or(1.0))?,
        })
    }
}
