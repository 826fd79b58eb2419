use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::fields::LinearFields;
use super::path::GridPath;
use crate::{Error, Result};

fn euclidean_norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `(|y_T| - 1)^+`.
pub fn functional_f(path: &GridPath) -> f64 {
    Functional::F.eval(path.terminal())
}

/// `|y_T|` when the first coordinate of `y_T` is positive, else 0.
pub fn functional_g(path: &GridPath) -> f64 {
    Functional::G.eval(path.terminal())
}

/// Terminal-value functionals used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Functional {
    F,
    G,
    /// First coordinate of the terminal state.
    Terminal,
}

impl Functional {
    pub fn eval(self, y: &[f64]) -> f64 {
        match self {
            Functional::F => (euclidean_norm(y) - 1.0).max(0.0),
            Functional::G => {
                if y[0] > 0.0 {
                    euclidean_norm(y)
                } else {
                    0.0
                }
            }
            Functional::Terminal => y[0],
        }
    }

    /// Exact `E[φ(Y_T)]` where it is known in closed form.
    pub fn reference_value(self, problem: &Problem, hurst: f64, horizon: f64) -> Option<f64> {
        match (problem, self) {
            (Problem::Sphere, Functional::F) => Some(0.0),
            (Problem::ScalarLinear { a }, Functional::Terminal) => {
                // Y_T = y0 exp(a X_T) with X_T ~ N(0, T^{2H})
                Some((0.5 * a * a * horizon.powf(2.0 * hurst)).exp())
            }
            (Problem::ScalarLinear { a }, phi) if *a == 0.0 => Some(phi.eval(&[1.0])),
            _ => None,
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Functional::F => "f",
            Functional::G => "g",
            Functional::Terminal => "terminal",
        })
    }
}

impl FromStr for Functional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f" => Ok(Functional::F),
            "g" => Ok(Functional::G),
            "terminal" => Ok(Functional::Terminal),
            other => Err(Error::domain(
                "functional",
                format!("unknown functional '{other}' (expected f, g or terminal)"),
            )),
        }
    }
}

/// Linear fields and start point of the S² benchmark: two antisymmetric
/// 3×3 matrices, so the unit sphere is invariant for the exact solution.
pub fn sphere_problem() -> (LinearFields, Vec<f64>) {
    #[rustfmt::skip]
    let a1 = DMatrix::from_row_slice(3, 3, &[
        0.0, 1.0, 2.0,
        -1.0, 0.0, 0.5,
        -2.0, -0.5, 0.0,
    ]);
    #[rustfmt::skip]
    let a2 = DMatrix::from_row_slice(3, 3, &[
        0.0, 0.7, 0.9,
        -0.7, 0.0, 1.0,
        -0.9, -1.0, 0.0,
    ]);
    let fields = LinearFields::new(vec![a1, a2]).expect("square matrices");
    (fields, vec![1.0, 0.0, 0.0])
}

/// Benchmark equations known to the experiment harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Problem {
    /// Linear RDE on S² driven by a 2-d fBM, `Y_0 = (1, 0, 0)`.
    Sphere,
    /// `dY = a Y dX`, scalar, `Y_0 = 1`.
    ScalarLinear { a: f64 },
}

impl Problem {
    pub fn fields(&self) -> LinearFields {
        match self {
            Problem::Sphere => sphere_problem().0,
            Problem::ScalarLinear { a } => {
                LinearFields::new(vec![DMatrix::from_element(1, 1, *a)]).expect("1x1")
            }
        }
    }

    pub fn initial_state(&self) -> Vec<f64> {
        match self {
            Problem::Sphere => sphere_problem().1,
            Problem::ScalarLinear { .. } => vec![1.0],
        }
    }

    pub fn noise_dim(&self) -> usize {
        match self {
            Problem::Sphere => 2,
            Problem::ScalarLinear { .. } => 1,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Problem::Sphere => 3,
            Problem::ScalarLinear { .. } => 1,
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Problem::Sphere => f.write_str("sphere"),
            Problem::ScalarLinear { a } => write!(f, "scalar-linear:{a}"),
        }
    }
}

impl FromStr for Problem {
    type Err = Error;

    /// Accepts `sphere`, `scalar-linear:<a>` and `scalar-linear` (a = 1).
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "sphere" => Ok(Problem::Sphere),
            None if s == "scalar-linear" => Ok(Problem::ScalarLinear { a: 1.0 }),
            Some(("scalar-linear", a)) => {
                let a = a.trim_start_matches("a=").parse::<f64>().map_err(|_| {
                    Error::domain("problem", format!("cannot parse coefficient in '{s}'"))
                })?;
                Ok(Problem::ScalarLinear { a })
            }
            _ => Err(Error::domain(
                "problem",
                format!("unknown problem '{s}' (expected sphere or scalar-linear:<a>)"),
            )),
        }
    }
}
