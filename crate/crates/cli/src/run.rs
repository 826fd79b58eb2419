//! Dispatch of resolved configurations to the library.

use std::path::Path;
use std::time::Instant;

use rough_mlmc::diagnostics::{diagnose, DiscretePath};
use rough_mlmc::fbm::hosking_sample;
use rough_mlmc::mlmc::{
    cost_model, estimate_constants_with, mlmc_estimate, modeled_cost, modeled_mse, plan, Allocation, FixedRates,
    LevelStats, MlmcConstants, MlmcPlan, PilotEstimate, PlanRequest, Simulator,
};
use rough_mlmc::rates::{compare_mlmc_classical, error_ladders, fit_rate, ErrorLadder, RateFit};
use rough_mlmc::rde::simplified_euler_path;
use rough_mlmc::rng::RngStream;
use rough_mlmc::Error as LibError;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Cli, Command, ConfigFile, Format};
use crate::error::{CliError, CliResult};
use crate::output::{csv_table, emit, float, json_report, Metadata};
use crate::resolve::{
    resolve_compare, DiagnosticsConfig, FbmConfig, MlmcConfig, RateConfig, RateKind, SolveConfig,
};

/// Seed offset separating pilot streams from those of the main run.
const PILOT_SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

/// What a subcommand produced, before it is written out.
struct Artifact {
    bytes: Vec<u8>,
    seed: Option<u64>,
    config: Value,
    summary: Value,
}

pub fn run(cli: Cli) -> CliResult<()> {
    let started = Instant::now();
    let command = match &cli.config {
        Some(path) => ConfigFile::load(path)?.apply(cli.command),
        None => cli.command,
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::config("threads must be at least 1"));
        }
        // fails only if a pool already exists, in which case it is reused
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let name = command.name();
    let artifact = match command {
        Command::SimulateFbm(a) => simulate_fbm(FbmConfig::resolve(a)?, cli.format)?,
        Command::Solve(a) => solve(SolveConfig::resolve(a)?, cli.format)?,
        Command::StrongRate(a) => rate(RateConfig::resolve(RateKind::Strong, a)?, cli.format)?,
        Command::WeakRate(a) => rate(RateConfig::resolve(RateKind::Weak, a)?, cli.format)?,
        Command::Mlmc(a) => mlmc(MlmcConfig::resolve(a)?, cli.format)?,
        Command::Compare(a) => compare(resolve_compare(a)?, cli.format)?,
        Command::Diagnostics(a) => diagnostics(DiagnosticsConfig::resolve(a)?, cli.format)?,
    };
    let meta = Metadata::new(
        name,
        artifact.seed,
        artifact.config,
        started.elapsed().as_secs_f64(),
        artifact.summary,
    );
    emit(cli.output.as_deref(), &artifact.bytes, &meta)
}

fn format_or(format: Option<Format>, default: Format, allowed: &[Format], command: &str) -> CliResult<Format> {
    let f = format.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(CliError::config(format!("{command} does not support {f:?} output")))
    }
}

fn simulate_fbm(c: FbmConfig, format: Option<Format>) -> CliResult<Artifact> {
    format_or(format, Format::Csv, &[Format::Csv], "simulate-fbm")?;
    let grid = hosking_sample(&c.spec()?, &RngStream::new(c.seed, 0))?;
    let header = std::iter::once("step".to_string())
        .chain((0..c.components).map(|i| format!("component_{i}")))
        .collect::<Vec<_>>();
    let rows = (0..grid.n_steps()).map(|k| {
        std::iter::once(k.to_string())
            .chain(grid.step(k).into_iter().map(float))
            .collect()
    });
    Ok(Artifact {
        bytes: csv_table(&header, rows)?,
        seed: Some(c.seed),
        config: serde_json::to_value(&c)?,
        summary: Value::Null,
    })
}

fn solve(c: SolveConfig, format: Option<Format>) -> CliResult<Artifact> {
    format_or(format, Format::Csv, &[Format::Csv], "solve")?;
    let sim = Simulator::new(c.setup())?;
    let spec = sim.spec(c.horizon, c.steps)?;
    let grid = hosking_sample(&spec, &sim.stream(c.seed, 0, 0))?;
    let path = simplified_euler_path(&c.problem.initial_state(), &grid, &c.problem.fields(), c.order)?;
    let header = std::iter::once("t".to_string())
        .chain((0..path.dim()).map(|i| format!("y_{i}")))
        .collect::<Vec<_>>();
    let rows = (0..=path.n_steps()).map(|k| {
        std::iter::once(float(path.time(k)))
            .chain(path.state(k).iter().copied().map(float))
            .collect()
    });
    Ok(Artifact {
        bytes: csv_table(&header, rows)?,
        seed: Some(c.seed),
        config: serde_json::to_value(&c)?,
        summary: Value::Null,
    })
}

fn ladder_csv(ladder: &ErrorLadder) -> CliResult<Vec<u8>> {
    let header = ["mesh", "error", "stderr"].map(String::from);
    let rows = (0..ladder.len()).map(|i| {
        vec![
            float(ladder.meshes[i]),
            float(ladder.errors[i]),
            float(ladder.std_errors[i]),
        ]
    });
    csv_table(&header, rows)
}

fn rate(c: RateConfig, format: Option<Format>) -> CliResult<Artifact> {
    let command = match c.kind {
        RateKind::Strong => "strong-rate",
        RateKind::Weak => "weak-rate",
    };
    let format = format_or(format, Format::Csv, &[Format::Csv, Format::Json], command)?;
    let sim = Simulator::new(c.setup)?;
    let pair = error_ladders(&sim, &c.request, c.reference_value)?;
    let ladder = match c.kind {
        RateKind::Strong => pair.strong,
        RateKind::Weak => pair.weak.expect("weak ladders carry a reference"),
    };
    let fit = match fit_rate(&ladder, c.window) {
        Ok(fit) => {
            eprintln!(
                "{command}: slope {:.4} ± {:.4} over ladder points {}..{}",
                fit.slope, fit.slope_std_error, fit.window.0, fit.window.1
            );
            Some(fit)
        }
        Err(e) => {
            // the ladder is still worth keeping
            eprintln!("{command}: no rate fitted: {e}");
            None
        }
    };
    let config = serde_json::to_value(&c)?;
    #[derive(Serialize)]
    struct Body<'a> {
        ladder: &'a ErrorLadder,
        fit: Option<RateFit>,
    }
    let bytes = match format {
        Format::Csv => ladder_csv(&ladder)?,
        Format::Json => json_report(command, &config, Body { ladder: &ladder, fit })?,
    };
    Ok(Artifact {
        bytes,
        seed: Some(c.request.seed),
        config,
        summary: json!({ "fit": fit }),
    })
}

#[derive(Debug, Serialize)]
struct PilotReport {
    levels: Vec<LevelStats>,
    #[serde(flatten)]
    estimate: PilotEstimate,
}

/// Constants from the flags, with any missing ones fitted on a pilot run.
fn mlmc_constants(c: &MlmcConfig, sim: &Simulator) -> CliResult<(MlmcConstants, Option<PilotReport>)> {
    if c.constants_given() {
        let k = MlmcConstants::new(
            c.c1.unwrap(),
            c.c2_prime.unwrap(),
            c.c2.unwrap(),
            c.c3.unwrap_or(1.0),
            c.alpha.unwrap(),
            c.beta.unwrap(),
        )
        .map_err(|e| CliError::config(format!("{e} (violates the mlmc contract)")))?;
        return Ok((k, None));
    }
    let pilot = MlmcPlan::new(
        c.horizon,
        c.coarse_steps,
        c.refinement,
        vec![c.pilot_samples; c.pilot_levels as usize + 1],
        std::f64::consts::SQRT_2,
        Allocation::Fixed,
    )?;
    let run = mlmc_estimate(&pilot, sim, c.seed ^ PILOT_SEED_MIX)?;
    let meshes: Vec<f64> = (0..=pilot.levels()).map(|l| pilot.mesh(l)).collect();
    let fixed = FixedRates {
        alpha: c.alpha,
        beta: c.beta,
    };
    let estimate = estimate_constants_with(&run.levels, &meshes, c.refinement, fixed).map_err(|e| match e {
        LibError::Numerical { context, message } => LibError::Numerical {
            context,
            message: format!("{message}; pass --alpha/--beta or a longer pilot run"),
        },
        other => other,
    })?;
    let f = estimate.constants;
    let k = MlmcConstants::new(
        c.c1.unwrap_or(f.c1),
        c.c2_prime.unwrap_or(f.c2_prime),
        c.c2.unwrap_or(f.c2),
        c.c3.unwrap_or(f.c3),
        f.alpha,
        f.beta,
    )?;
    Ok((
        k,
        Some(PilotReport {
            levels: run.levels,
            estimate,
        }),
    ))
}

fn mlmc(c: MlmcConfig, format: Option<Format>) -> CliResult<Artifact> {
    format_or(format, Format::Json, &[Format::Json], "mlmc")?;
    let sim = Simulator::new(c.setup)?;
    let (constants, pilot) = mlmc_constants(&c, &sim)?;
    let request = PlanRequest {
        epsilon: c.epsilon,
        constants,
        horizon: c.horizon,
        coarse_steps: c.coarse_steps,
        refinement: c.refinement,
        d1: c.d1,
    };
    let plan = plan(&request)?;
    if plan.levels() > c.max_levels {
        return Err(LibError::Infeasible(format!(
            "plan needs L = {} levels, above max-levels = {}",
            plan.levels(),
            c.max_levels
        ))
        .into());
    }
    let run = mlmc_estimate(&plan, &sim, c.seed)?;
    let counts: Vec<f64> = plan.samples.iter().map(|&n| n as f64).collect();
    let model = cost_model(&counts, c.coarse_steps, c.refinement, c.cost_model)?;
    let config = serde_json::to_value(&c)?;
    let body = json!({
        "plan": {
            "L": plan.levels(),
            "samples": plan.samples,
            "d1": plan.d1,
            "allocation": plan.allocation,
            "h0": plan.h0(),
            "M": plan.refinement,
        },
        "constants": constants,
        "pilot": pilot,
        "estimate": run.estimate,
        "variance": run.variance,
        "std_error": run.variance.sqrt(),
        "levels": run.levels,
        "modeled": {
            "mse": modeled_mse(&plan, &constants),
            "cost": modeled_cost(&plan, &constants),
            "cost_model": model,
        },
        "measured": {
            "wall_seconds": run.wall_seconds,
            "scheme_steps": run.levels.iter().map(|s| s.cost_units).sum::<f64>(),
        },
    });
    eprintln!(
        "mlmc: L = {}, N = {:?}, estimate {:.6} ± {:.6}",
        plan.levels(),
        plan.samples,
        run.estimate,
        run.variance.sqrt()
    );
    Ok(Artifact {
        bytes: json_report("mlmc", &config, &body)?,
        seed: Some(c.seed),
        config,
        summary: json!({ "estimate": run.estimate, "L": plan.levels() }),
    })
}

fn compare(c: rough_mlmc::rates::ComparisonConfig, format: Option<Format>) -> CliResult<Artifact> {
    format_or(format, Format::Json, &[Format::Json], "compare")?;
    let report = compare_mlmc_classical(&c)?;
    eprintln!(
        "compare: variance mlmc {:.4e} vs classical {:.4e} (ratio {:.3})",
        report.mlmc_variance, report.classical_variance, report.variance_ratio
    );
    let config = serde_json::to_value(c)?;
    Ok(Artifact {
        bytes: json_report("compare", &config, &report)?,
        seed: Some(c.seed),
        config,
        summary: json!({ "variance_ratio": report.variance_ratio }),
    })
}

/// Reads a path CSV: header row, first column time or step index, then the
/// coordinates.
pub fn read_path_csv(path: &Path) -> CliResult<DiscretePath> {
    let mut reader = csv::Reader::from_path(path)?;
    let dim = reader.headers()?.len().checked_sub(1).filter(|&d| d > 0).ok_or_else(|| {
        CliError::config(format!("{}: need a time column and at least one coordinate", path.display()))
    })?;
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |i: usize| -> CliResult<f64> {
            record[i].trim().parse().map_err(|_| {
                CliError::config(format!("{}: row {}: '{}' is not a number", path.display(), row + 1, &record[i]))
            })
        };
        times.push(parse(0)?);
        for i in 1..=dim {
            values.push(parse(i)?);
        }
    }
    DiscretePath::new(times, dim, values).map_err(|e| CliError::config(format!("{e} (diagnostics contract)")))
}

fn diagnostics(c: DiagnosticsConfig, format: Option<Format>) -> CliResult<Artifact> {
    format_or(format, Format::Json, &[Format::Json], "diagnostics")?;
    let path = read_path_csv(&c.input)?;
    let d = diagnose(&path, c.p, c.alpha)?;
    let config = serde_json::to_value(&c)?;
    Ok(Artifact {
        bytes: json_report("diagnostics", &config, d)?,
        seed: None,
        config,
        summary: Value::Null,
    })
}
