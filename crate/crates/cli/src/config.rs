//! Command-line flags, the optional TOML config file, and their merge.
//!
//! Every subcommand has one flag struct whose fields are all optional. The
//! same struct is read from the config file section named after the
//! subcommand; a flag given on the command line wins over the file, and
//! anything left unset falls back to the documented default.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Generates an all-`Option` flag struct together with `or`, which fills
/// unset fields from a lower-priority layer.
macro_rules! layered {
    (
        $(#[$meta:meta])*
        pub struct $name:ident {
            $( $(#[$fmeta:meta])* pub $field:ident : Option<$ty:ty>, )*
        }
    ) => {
        $(#[$meta])*
        pub struct $name {
            $( $(#[$fmeta])* pub $field: Option<$ty>, )*
        }

        impl $name {
            pub fn or(self, lower: Self) -> Self {
                Self { $( $field: self.$field.or(lower.$field), )* }
            }
        }
    };
}

#[derive(Debug, Parser)]
#[command(name = "rough-mlmc", version, about = "Multilevel Monte Carlo experiments for fBM-driven RDEs")]
pub struct Cli {
    /// TOML file with one section per subcommand; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output file, written atomically with a `.meta.json` sidecar.
    /// Standard output when absent.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Worker threads for the simulation pool (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample fBM increments on a uniform grid.
    SimulateFbm(FbmArgs),
    /// Solve one path of an RDE with the simplified Euler scheme.
    Solve(SolveArgs),
    /// Strong error ladder and fitted rate.
    StrongRate(RateArgs),
    /// Weak error ladder against a known reference value.
    WeakRate(RateArgs),
    /// Plan and run a multilevel estimator for a target accuracy.
    Mlmc(MlmcArgs),
    /// Multilevel versus single-level variance at matched cost.
    Compare(CompareArgs),
    /// p-variation, Hölder norm and greedy count of a path CSV.
    Diagnostics(DiagnosticsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SimulateFbm(_) => "simulate-fbm",
            Command::Solve(_) => "solve",
            Command::StrongRate(_) => "strong-rate",
            Command::WeakRate(_) => "weak-rate",
            Command::Mlmc(_) => "mlmc",
            Command::Compare(_) => "compare",
            Command::Diagnostics(_) => "diagnostics",
        }
    }
}

layered! {
    #[derive(Debug, Clone, Default, Args, Deserialize)]
    #[serde(deny_unknown_fields, rename_all = "kebab-case")]
    pub struct FbmArgs {
        #[arg(long)]
        pub hurst: Option<f64>,
        #[arg(long)]
        pub steps: Option<usize>,
        #[arg(long)]
        pub horizon: Option<f64>,
        #[arg(long)]
        pub components: Option<usize>,
        #[arg(long)]
        pub seed: Option<u64>,
    }
}

layered! {
    #[derive(Debug, Clone, Default, Args, Deserialize)]
    #[serde(deny_unknown_fields, rename_all = "kebab-case")]
    pub struct SolveArgs {
        /// `sphere` or `scalar-linear:<a>`.
        #[arg(long)]
        pub problem: Option<String>,
        #[arg(long)]
        pub hurst: Option<f64>,
        #[arg(long)]
        pub steps: Option<usize>,
        #[arg(long)]
        pub horizon: Option<f64>,
        /// Scheme order 2 or 3 (default: 3 below H = 1/2, else 2).
        #[arg(long)]
        pub order: Option<u8>,
        #[arg(long)]
        pub seed: Option<u64>,
    }
}

layered! {
    #[derive(Debug, Clone, Default, Args, Deserialize)]
    #[serde(deny_unknown_fields, rename_all = "kebab-case")]
    pub struct RateArgs {
        #[arg(long)]
        pub problem: Option<String>,
        #[arg(long)]
        pub hurst: Option<f64>,
        /// Comma-separated step counts, each the largest divided by a power of two.
        #[arg(long)]
        pub mesh_ladder: Option<String>,
        #[arg(long)]
        pub paths: Option<u64>,
        #[arg(long)]
        pub seed: Option<u64>,
        /// `f`, `g` or `terminal`.
        #[arg(long)]
        pub functional: Option<String>,
        #[arg(long)]
        pub horizon: Option<f64>,
        #[arg(long)]
        pub order: Option<u8>,
        /// Strong error norm: `terminal` or `sup`.
        #[arg(long)]
        pub norm: Option<String>,
        /// Strong reference: `finer` (2N-step scheme) or `exact` (scalar linear only).
        #[arg(long)]
        pub strong_reference: Option<String>,
        /// Weak reference value; defaults to the known closed form.
        #[arg(long)]
        pub reference_value: Option<f64>,
        /// Largest mesh in the rate fit, or `auto` for the asymptotic window.
        #[arg(long)]
        pub fit_max_mesh: Option<String>,
    }
}

layered! {
    #[derive(Debug, Clone, Default, Args, Deserialize)]
    #[serde(deny_unknown_fields, rename_all = "kebab-case")]
    pub struct MlmcArgs {
        /// Target root-mean-square error.
        #[arg(long)]
        pub epsilon: Option<f64>,
        #[arg(long)]
        pub problem: Option<String>,
        #[arg(long)]
        pub hurst: Option<f64>,
        /// Coarsest mesh; the horizon divided by it must be an integer.
        #[arg(long)]
        pub h0: Option<f64>,
        #[arg(long)]
        pub horizon: Option<f64>,
        /// Refinement factor between levels.
        #[arg(long = "M", alias = "refinement")]
        #[serde(rename = "M", alias = "refinement")]
        pub refinement: Option<u32>,
        /// Error split `d1 > 1`, or `auto`.
        #[arg(long)]
        pub d1: Option<String>,
        /// Weak rate; estimated from the pilot run when absent.
        #[arg(long)]
        pub alpha: Option<f64>,
        /// Variance rate; estimated from the pilot run when absent.
        #[arg(long)]
        pub beta: Option<f64>,
        #[arg(long)]
        pub c1: Option<f64>,
        #[arg(long)]
        pub c2: Option<f64>,
        #[arg(long)]
        pub c2_prime: Option<f64>,
        #[arg(long)]
        pub c3: Option<f64>,
        #[arg(long)]
        pub functional: Option<String>,
        #[arg(long)]
        pub order: Option<u8>,
        #[arg(long)]
        pub seed: Option<u64>,
        /// `linear`, `quadratic` or `giles`.
        #[arg(long)]
        pub cost_model: Option<String>,
        /// Levels `0..=pilot_levels` of the pilot run.
        #[arg(long)]
        pub pilot_levels: Option<u32>,
        #[arg(long)]
        pub pilot_samples: Option<u64>,
        /// Refuse plans with more levels than this.
        #[arg(long)]
        pub max_levels: Option<u32>,
    }
}

layered! {
    #[derive(Debug, Clone, Default, Args, Deserialize)]
    #[serde(deny_unknown_fields, rename_all = "kebab-case")]
    pub struct CompareArgs {
        #[arg(long)]
        pub n0: Option<u64>,
        #[arg(long)]
        pub h0: Option<f64>,
        #[arg(long)]
        pub horizon: Option<f64>,
        #[arg(long)]
        pub levels: Option<u32>,
        #[arg(long = "M", alias = "refinement")]
        #[serde(rename = "M", alias = "refinement")]
        pub refinement: Option<u32>,
        #[arg(long)]
        pub hurst: Option<f64>,
        #[arg(long)]
        pub functional: Option<String>,
        #[arg(long)]
        pub problem: Option<String>,
        #[arg(long)]
        pub order: Option<u8>,
        /// `β` of the sample-count heuristic `N_l = ⌈N_0 M^{-l(1+β)/2}⌉`.
        #[arg(long)]
        pub beta: Option<f64>,
        /// Run both estimators with this many times the reference path counts.
        #[arg(long)]
        pub scale: Option<u64>,
        #[arg(long)]
        pub seed: Option<u64>,
    }
}

layered! {
    #[derive(Debug, Clone, Default, Args, Deserialize)]
    #[serde(deny_unknown_fields, rename_all = "kebab-case")]
    pub struct DiagnosticsArgs {
        /// Path CSV: a time (or step) column followed by the coordinates.
        #[arg(long)]
        pub input: Option<PathBuf>,
        #[arg(long)]
        pub p: Option<f64>,
        #[arg(long)]
        pub alpha: Option<f64>,
    }
}

/// Contents of a config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub simulate_fbm: Option<FbmArgs>,
    pub solve: Option<SolveArgs>,
    pub strong_rate: Option<RateArgs>,
    pub weak_rate: Option<RateArgs>,
    pub mlmc: Option<MlmcArgs>,
    pub compare: Option<CompareArgs>,
    pub diagnostics: Option<DiagnosticsArgs>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Layers the file section for `command` under its flags.
    pub fn apply(mut self, command: Command) -> Command {
        match command {
            Command::SimulateFbm(a) => Command::SimulateFbm(a.or(self.simulate_fbm.take().unwrap_or_default())),
            Command::Solve(a) => Command::Solve(a.or(self.solve.take().unwrap_or_default())),
            Command::StrongRate(a) => Command::StrongRate(a.or(self.strong_rate.take().unwrap_or_default())),
            Command::WeakRate(a) => Command::WeakRate(a.or(self.weak_rate.take().unwrap_or_default())),
            Command::Mlmc(a) => Command::Mlmc(a.or(self.mlmc.take().unwrap_or_default())),
            Command::Compare(a) => Command::Compare(a.or(self.compare.take().unwrap_or_default())),
            Command::Diagnostics(a) => Command::Diagnostics(a.or(self.diagnostics.take().unwrap_or_default())),
        }
    }
}
