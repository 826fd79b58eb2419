//! Multilevel Monte Carlo for rough differential equations driven by
//! fractional Brownian motion.
//!
//! The crate is organised bottom-up:
//!
//! * [`rng`] — addressable random streams and the Box–Muller transform.
//! * [`fbm`] — exact simulation of fBM increments (Hosking, with a Cholesky
//!   oracle) and grid coarsening.
//! * [`rde`] — the simplified step-N Euler scheme, vector fields, path
//!   functionals and the sphere benchmark.
//! * [`mlmc`] — the coupled multilevel estimator and the complexity planner.
//! * [`rates`] — strong/weak error ladders, rate regression and the
//!   multilevel-vs-classical comparison.
//! * [`diagnostics`] — p-variation, Hölder norms and greedy partition counts.

pub mod diagnostics;
pub mod error;
pub mod fbm;
pub mod mlmc;
pub mod rates;
pub mod rde;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
