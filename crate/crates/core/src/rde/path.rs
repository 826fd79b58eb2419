use crate::{Error, Result};

/// Scheme output on a uniform grid, extended to `[0, T]` by linear
/// interpolation between grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    mesh: f64,
    dim: usize,
    /// Row-major `(n + 1) × dim`.
    states: Vec<f64>,
}

impl GridPath {
    pub fn new(mesh: f64, dim: usize, states: Vec<f64>) -> Result<Self> {
        if !(mesh > 0.0) {
            return Err(Error::domain("GridPath", "mesh must be > 0"));
        }
        if dim == 0 || states.is_empty() || states.len() % dim != 0 {
            return Err(Error::domain("GridPath", "states must hold a whole number of rows"));
        }
        Ok(Self { mesh, dim, states })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn n_steps(&self) -> usize {
        self.states.len() / self.dim - 1
    }

    pub fn horizon(&self) -> f64 {
        self.mesh * self.n_steps() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.mesh * k as f64
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.n_steps())
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    /// Value at time `t ∈ [0, T]`; stored states are returned exactly at grid
    /// times.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let n = self.n_steps();
        if !(0.0..=self.horizon()).contains(&t) {
            return Err(Error::domain(
                "GridPath::eval",
                format!("t = {t} outside [0, {}]", self.horizon()),
            ));
        }
        let k = ((t / self.mesh).floor() as usize).min(n);
        let tk = self.time(k);
        if k == n || t == tk {
            return Ok(self.state(k).to_vec());
        }
        let w = (t - tk) / self.mesh;
        let (a, b) = (self.state(k), self.state(k + 1));
        Ok(a.iter().zip(b).map(|(ya, yb)| w * (yb - ya) + ya).collect())
    }
}
