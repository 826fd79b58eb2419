//! The simplified step-N Euler scheme for RDEs `dY = V(Y) dX`.
//!
//! One step maps `y` to
//!
//! ```text
//! y + Σ_{k=1}^{N} 1/k! Σ_{i1..ik} V_{i1}⋯V_{ik} I(y) dx^{i1}⋯dx^{ik}
//! ```
//!
//! i.e. the iterated integrals of the step-N Euler scheme are replaced by
//! products of increments. On grid points this coincides with the full
//! step-N Euler scheme applied to the piecewise-linear interpolation of the
//! driver. For linear fields the word sum collapses to `Σ_k B^k y / k!` with
//! `B = Σ_i dx^i A_i`, which is the fast path used here.

mod fields;
mod path;
mod problem;

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use fields::{GenericView, LinearFields, VectorFieldSet};
pub use path::GridPath;
pub use problem::{functional_f, functional_g, sphere_problem, Functional, Problem};

use crate::fbm::IncrementGrid;
use crate::{Error, Result};

/// Truncation level `N` of the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum SchemeOrder {
    Two,
    Three,
}

impl SchemeOrder {
    pub fn terms(self) -> usize {
        match self {
            SchemeOrder::Two => 2,
            SchemeOrder::Three => 3,
        }
    }

    /// Step-2 only converges for drivers with covariance of finite
    /// 1-variation (`H ≥ 1/2`); rougher drivers need step-3.
    pub fn check_admissible(self, hurst: f64) -> Result<()> {
        if self == SchemeOrder::Two && hurst < 0.5 {
            return Err(Error::domain(
                "SchemeOrder",
                format!("order 2 requires H >= 1/2, got H = {hurst}; use order 3"),
            ));
        }
        Ok(())
    }

    /// Smallest admissible order for the given Hurst index.
    pub fn for_hurst(hurst: f64) -> Self {
        if hurst >= 0.5 {
            SchemeOrder::Two
        } else {
            SchemeOrder::Three
        }
    }
}

impl TryFrom<u8> for SchemeOrder {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            2 => Ok(SchemeOrder::Two),
            3 => Ok(SchemeOrder::Three),
            _ => Err(Error::domain("SchemeOrder", format!("order must be 2 or 3, got {n}"))),
        }
    }
}

impl From<SchemeOrder> for u8 {
    fn from(o: SchemeOrder) -> u8 {
        o.terms() as u8
    }
}

impl fmt::Display for SchemeOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.terms())
    }
}

/// Reusable workspace for repeated scheme steps with one field set.
pub struct Stepper<'a, F: VectorFieldSet + ?Sized> {
    fields: &'a F,
    order: SchemeOrder,
    b: Vec<f64>,
    term: Vec<f64>,
    next: Vec<f64>,
    word: Vec<usize>,
}

impl<'a, F: VectorFieldSet + ?Sized> Stepper<'a, F> {
    pub fn new(fields: &'a F, order: SchemeOrder) -> Result<Self> {
        if fields.max_word_len() < order.terms() {
            return Err(Error::domain(
                "simplified_euler_step",
                format!(
                    "fields provide words up to length {}, order {} needs {}",
                    fields.max_word_len(),
                    order,
                    order.terms()
                ),
            ));
        }
        let e = fields.state_dim();
        Ok(Self {
            fields,
            order,
            b: vec![0.0; e * e],
            term: vec![0.0; e],
            next: vec![0.0; e],
            word: Vec::with_capacity(order.terms()),
        })
    }

    /// Advances `y` in place by one step with increment `dx`.
    pub fn step(&mut self, y: &mut [f64], dx: &[f64]) -> Result<()> {
        Error::check_dim("simplified_euler_step state", self.fields.state_dim(), y.len())?;
        Error::check_dim("simplified_euler_step increment", self.fields.noise_dim(), dx.len())?;
        match self.fields.as_linear() {
            Some(lin) => self.linear_step(lin, y, dx),
            None => self.word_step(y, dx),
        }
        Ok(())
    }

    fn linear_step(&mut self, lin: &LinearFields, y: &mut [f64], dx: &[f64]) {
        lin.combine_into(dx, &mut self.b);
        self.term.copy_from_slice(y);
        for k in 1..=self.order.terms() {
            fields::mat_vec(&self.b, &self.term, &mut self.next);
            let inv_k = 1.0 / k as f64;
            for (t, n) in self.term.iter_mut().zip(&self.next) {
                *t = n * inv_k;
            }
            for (yi, t) in y.iter_mut().zip(&self.term) {
                *yi += t;
            }
        }
    }

    fn word_step(&mut self, y: &mut [f64], dx: &[f64]) {
        let d = dx.len();
        let y0 = y.to_vec();
        let mut factorial = 1.0;
        for k in 1..=self.order.terms() {
            factorial *= k as f64;
            self.word.clear();
            self.word.resize(k, 0);
            loop {
                let weight: f64 = self.word.iter().map(|&i| dx[i]).product::<f64>() / factorial;
                if weight != 0.0 {
                    self.fields.word(&self.word, &y0, &mut self.next);
                    for (yi, v) in y.iter_mut().zip(&self.next) {
                        *yi += weight * v;
                    }
                }
                if !next_word(&mut self.word, d) {
                    break;
                }
            }
        }
    }
}

/// Odometer over `{0..d}^k`; returns false after the last word.
fn next_word(word: &mut [usize], d: usize) -> bool {
    for pos in (0..word.len()).rev() {
        word[pos] += 1;
        if word[pos] < d {
            return true;
        }
        word[pos] = 0;
    }
    false
}

/// One step of the simplified scheme from `y` with driver increment `dx`.
pub fn simplified_euler_step<F: VectorFieldSet + ?Sized>(
    y: &[f64],
    dx: &[f64],
    fields: &F,
    order: SchemeOrder,
) -> Result<Vec<f64>> {
    let mut out = y.to_vec();
    Stepper::new(fields, order)?.step(&mut out, dx)?;
    Ok(out)
}

/// `I + B + B²/2! + … + B^N/N!`.
pub fn linear_step_matrix(b: &DMatrix<f64>, order: usize) -> DMatrix<f64> {
    let n = b.nrows();
    let mut sum = DMatrix::identity(n, n);
    let mut power = DMatrix::identity(n, n);
    let mut factorial = 1.0;
    for k in 1..=order {
        power = &power * b;
        factorial *= k as f64;
        sum += &power / factorial;
    }
    sum
}

/// Runs the scheme over every step of `grid`, keeping all states.
pub fn simplified_euler_path<F: VectorFieldSet + ?Sized>(
    y0: &[f64],
    grid: &IncrementGrid,
    fields: &F,
    order: SchemeOrder,
) -> Result<GridPath> {
    let e = fields.state_dim();
    Error::check_dim("simplified_euler_path state", e, y0.len())?;
    Error::check_dim("simplified_euler_path noise", fields.noise_dim(), grid.n_components())?;
    let mut stepper = Stepper::new(fields, order)?;
    let mut states = Vec::with_capacity((grid.n_steps() + 1) * e);
    states.extend_from_slice(y0);
    let mut y = y0.to_vec();
    let mut dx = vec![0.0; grid.n_components()];
    for k in 0..grid.n_steps() {
        grid.step_into(k, &mut dx);
        stepper.step(&mut y, &dx)?;
        states.extend_from_slice(&y);
    }
    GridPath::new(grid.mesh(), e, states)
}

/// Terminal state of the scheme without storing the path.
pub fn simplified_euler_terminal<F: VectorFieldSet + ?Sized>(
    y0: &[f64],
    grid: &IncrementGrid,
    fields: &F,
    order: SchemeOrder,
) -> Result<Vec<f64>> {
    Error::check_dim("simplified_euler_terminal state", fields.state_dim(), y0.len())?;
    Error::check_dim("simplified_euler_terminal noise", fields.noise_dim(), grid.n_components())?;
    let mut stepper = Stepper::new(fields, order)?;
    let mut y = y0.to_vec();
    let mut dx = vec![0.0; grid.n_components()];
    for k in 0..grid.n_steps() {
        grid.step_into(k, &mut dx);
        stepper.step(&mut y, &dx)?;
    }
    Ok(y)
}

/// Pathwise solution `y0 · exp(a x_T)` of the scalar equation `dY = a Y dX`.
pub fn exact_linear_1d(a: f64, x_t: f64, y0: f64) -> f64 {
    y0 * (a * x_t).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `V(y) = sin(y)` on R, differentiated by hand.
    struct Sine;

    impl VectorFieldSet for Sine {
        fn state_dim(&self) -> usize {
            1
        }
        fn noise_dim(&self) -> usize {
            1
        }
        fn word(&self, word: &[usize], y: &[f64], out: &mut [f64]) {
            let (s, c) = y[0].sin_cos();
            out[0] = match word.len() {
                1 => s,
                2 => c * s,
                3 => (c * c - s * s) * s,
                _ => unreachable!(),
            };
        }
    }

    #[test]
    fn zero_increment_is_identity() {
        let (fields, y0) = sphere_problem();
        let y = simplified_euler_step(&y0, &[0.0, 0.0], &fields, SchemeOrder::Three).unwrap();
        assert_eq!(y, y0);
    }

    #[test]
    fn scalar_order_three() {
        let fields = Problem::ScalarLinear { a: 1.0 }.fields();
        let y = simplified_euler_step(&[1.0], &[0.2], &fields, SchemeOrder::Three).unwrap();
        let expected = 1.0 + 0.2 + 0.02 + 0.008 / 6.0;
        assert!((y[0] - expected).abs() < 1e-15);
        let m = linear_step_matrix(&DMatrix::from_element(1, 1, 0.2), 3);
        assert!((m[(0, 0)] - 1.2213333333333334).abs() < 1e-15);
    }

    #[test]
    fn sphere_step_matches_matrix_oracle() {
        let (fields, y0) = sphere_problem();
        let dx = [0.1, -0.05];
        let y = simplified_euler_step(&y0, &dx, &fields, SchemeOrder::Two).unwrap();
        let b = fields.combine(&dx);
        let expected = linear_step_matrix(&b, 2) * nalgebra::DVector::from_vec(y0.clone());
        for i in 0..3 {
            assert!((y[i] - expected[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn generic_word_path_agrees_with_linear_path() {
        let (fields, _) = sphere_problem();
        let y = [0.3, -0.4, 0.8];
        let dx = [0.21, -0.13];
        for order in [SchemeOrder::Two, SchemeOrder::Three] {
            let fast = simplified_euler_step(&y, &dx, &fields, order).unwrap();
            let slow = simplified_euler_step(&y, &dx, &GenericView(&fields), order).unwrap();
            for i in 0..3 {
                assert!((fast[i] - slow[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn order_two_term_is_half_b_squared() {
        let (fields, _) = sphere_problem();
        let y = [0.5, 0.1, -0.2];
        let dx = [0.3, 0.4];
        let y2 = simplified_euler_step(&y, &dx, &fields, SchemeOrder::Two).unwrap();
        let b = fields.combine(&dx);
        let yv = nalgebra::DVector::from_column_slice(&y);
        let by = &b * &yv;
        let b2y = &b * &by;
        for i in 0..3 {
            let second = y2[i] - y[i] - by[i];
            assert!((second - 0.5 * b2y[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn nonlinear_field_words() {
        let y = 0.7f64;
        let dx = 0.1;
        let got = simplified_euler_step(&[y], &[dx], &Sine, SchemeOrder::Three).unwrap()[0];
        let (s, c) = y.sin_cos();
        let expected = y + s * dx + c * s * dx * dx / 2.0 + (c * c - s * s) * s * dx.powi(3) / 6.0;
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (fields, _) = sphere_problem();
        assert!(matches!(
            simplified_euler_step(&[1.0, 0.0], &[0.1, 0.1], &fields, SchemeOrder::Two),
            Err(Error::Dimension { .. })
        ));
        assert!(simplified_euler_step(&[1.0, 0.0, 0.0], &[0.1], &fields, SchemeOrder::Two).is_err());
    }

    #[test]
    fn two_scalar_steps() {
        let grid = IncrementGrid::from_components(0.5, vec![vec![0.1, 0.1]]).unwrap();
        let fields = Problem::ScalarLinear { a: 1.0 }.fields();
        let path = simplified_euler_path(&[1.0], &grid, &fields, SchemeOrder::Two).unwrap();
        assert!((path.terminal()[0] - 1.221025).abs() < 1e-15);
        assert_eq!(path.state(0), &[1.0]);
        assert!((path.state(1)[0] - 1.105).abs() < 1e-15);
    }

    #[test]
    fn scalar_path_product_formula() {
        let a = 0.8;
        let incs = vec![0.05, -0.2, 0.13, 0.31, -0.07];
        let grid = IncrementGrid::from_components(0.2, vec![incs.clone()]).unwrap();
        let fields = Problem::ScalarLinear { a }.fields();
        for order in [SchemeOrder::Two, SchemeOrder::Three] {
            let y = simplified_euler_terminal(&[2.0], &grid, &fields, order).unwrap()[0];
            let product: f64 = incs
                .iter()
                .map(|dx| {
                    let z = a * dx;
                    (0..=order.terms())
                        .map(|j| z.powi(j as i32) / (1..=j).product::<usize>() as f64)
                        .sum::<f64>()
                })
                .product();
            assert!((y - 2.0 * product).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_increments_give_constant_path() {
        let (fields, y0) = sphere_problem();
        let grid = IncrementGrid::from_components(0.25, vec![vec![0.0; 4], vec![0.0; 4]]).unwrap();
        let path = simplified_euler_path(&y0, &grid, &fields, SchemeOrder::Three).unwrap();
        assert!(path.states().all(|s| s == y0.as_slice()));
    }

    #[test]
    fn exact_solution_values() {
        assert_eq!(exact_linear_1d(0.0, 0.7, 3.0), 3.0);
        assert_eq!(exact_linear_1d(1.3, 0.0, 3.0), 3.0);
        assert!((exact_linear_1d(2.0, 0.3, 1.0) - 1.8221188003905089).abs() < 1e-15);
    }

    #[test]
    fn order_admissibility() {
        assert!(SchemeOrder::Two.check_admissible(0.4).is_err());
        assert!(SchemeOrder::Two.check_admissible(0.5).is_ok());
        assert!(SchemeOrder::Three.check_admissible(0.3).is_ok());
        assert_eq!(SchemeOrder::for_hurst(0.4), SchemeOrder::Three);
        assert!(SchemeOrder::try_from(4).is_err());
    }

    #[test]
    fn truncated_exponential_remainder_bound() {
        let b = DMatrix::from_row_slice(2, 2, &[0.1, -0.3, 0.2, 0.05]);
        let approx = linear_step_matrix(&b, 3);
        let exact = b.clone().exp();
        let norm = b.norm();
        let bound = norm.powi(4) / 24.0 * norm.exp();
        assert!((approx - exact).norm() <= bound);
        assert_eq!(linear_step_matrix(&DMatrix::zeros(3, 3), 3), DMatrix::identity(3, 3));
    }
}
