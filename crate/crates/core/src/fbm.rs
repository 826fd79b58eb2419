//! Exact simulation of fractional Brownian motion increments.
//!
//! [`hosking_sample`] is the production generator: the Durbin–Levinson
//! recursion, O(n²) time and O(n) memory per path. [`cholesky_sample`] draws
//! from the same law through a dense factorisation of the increment
//! covariance and is kept as an independent oracle.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::rng::RngStream;
use crate::{Error, Result};

/// Innovation variances below this (relative to the increment variance) are
/// treated as a loss of precision.
pub const MIN_INNOVATION_VARIANCE: f64 = 1e-14;

/// Law of a `d`-dimensional fBM sampled on a uniform grid of `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbmSpec {
    pub hurst: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_components: usize,
}

impl FbmSpec {
    pub fn new(hurst: f64, horizon: f64, n_steps: usize, n_components: usize) -> Result<Self> {
        check_hurst("FbmSpec", hurst)?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain("FbmSpec", format!("horizon must be > 0, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(Error::domain("FbmSpec", "n_steps must be positive"));
        }
        if n_components == 0 {
            return Err(Error::domain("FbmSpec", "n_components must be positive"));
        }
        Ok(Self {
            hurst,
            horizon,
            n_steps,
            n_components,
        })
    }

    pub fn mesh(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }
}

fn check_hurst(context: &'static str, hurst: f64) -> Result<()> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(context, format!("H must lie in (0,1), got {hurst}")))
    }
}

/// Driving-noise increments on a uniform grid, stored component by component.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementGrid {
    mesh: f64,
    n_components: usize,
    n_steps: usize,
    data: Vec<f64>,
}

impl IncrementGrid {
    /// Builds a grid from one increment vector per component.
    pub fn from_components(mesh: f64, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::domain("IncrementGrid", "at least one component required"));
        }
        if !(mesh > 0.0) {
            return Err(Error::domain("IncrementGrid", format!("mesh must be > 0, got {mesh}")));
        }
        let n_steps = components[0].len();
        if n_steps == 0 {
            return Err(Error::domain("IncrementGrid", "at least one step required"));
        }
        for c in &components {
            Error::check_dim("IncrementGrid", n_steps, c.len())?;
        }
        let n_components = components.len();
        Ok(Self {
            mesh,
            n_components,
            n_steps,
            data: components.concat(),
        })
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn horizon(&self) -> f64 {
        self.mesh * self.n_steps as f64
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.data[c * self.n_steps..(c + 1) * self.n_steps]
    }

    /// Copies the increments of step `k` (one entry per component) into `out`.
    pub fn step_into(&self, k: usize, out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.data[c * self.n_steps + k];
        }
    }

    pub fn step(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_components];
        self.step_into(k, &mut out);
        out
    }

    /// Path values `X_{t_k} - X_0`, `k = 0..=n`, of one component.
    pub fn cumulative(&self, c: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_steps + 1);
        let mut acc = 0.0;
        out.push(acc);
        for dx in self.component(c) {
            acc += dx;
            out.push(acc);
        }
        out
    }
}

/// `E[X_s X_t]` for a scalar fBM with Hurst index `hurst`.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> Result<f64> {
    check_hurst("fbm_covariance", hurst)?;
    if s < 0.0 || t < 0.0 {
        return Err(Error::domain("fbm_covariance", "times must be nonnegative"));
    }
    let h2 = 2.0 * hurst;
    Ok(0.5 * (s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2)))
}

fn unit_autocovariance(lag: usize, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    let k = lag as f64;
    if lag == 0 {
        return 1.0;
    }
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).powf(h2))
}

/// Covariance of two increments `lag` steps apart on a grid of mesh `mesh`.
pub fn increment_autocovariance(lag: usize, mesh: f64, hurst: f64) -> Result<f64> {
    check_hurst("increment_autocovariance", hurst)?;
    if !(mesh > 0.0) {
        return Err(Error::domain("increment_autocovariance", "mesh must be > 0"));
    }
    Ok(mesh.powf(2.0 * hurst) * unit_autocovariance(lag, hurst))
}

/// One exact sample of the increments via Hosking's method.
pub fn hosking_sample(spec: &FbmSpec, rng: &RngStream) -> Result<IncrementGrid> {
    Ok(hosking_sample_batch(spec, std::slice::from_ref(rng))?
        .pop()
        .expect("batch of one"))
}

/// Samples one grid per stream, sharing the Durbin–Levinson coefficients.
///
/// Each (stream, component) lane draws its own normals and accumulates its
/// conditional mean in the same order regardless of batch size, so a grid is
/// bit-identical whether it is produced alone or inside any batch.
pub fn hosking_sample_batch(spec: &FbmSpec, streams: &[RngStream]) -> Result<Vec<IncrementGrid>> {
    let n = spec.n_steps;
    let d = spec.n_components;
    let lanes = streams.len() * d;
    if lanes == 0 {
        return Ok(Vec::new());
    }
    let hurst = spec.hurst;
    let gamma: Vec<f64> = (0..n).map(|k| unit_autocovariance(k, hurst)).collect();

    let mut sources: Vec<_> = streams
        .iter()
        .flat_map(|s| (0..d).map(move |c| s.gaussians(c)))
        .collect();

    // time-major: x[k * lanes + lane]
    let mut x = vec![0.0; n * lanes];
    let mut phi = vec![0.0; n];
    let mut phi_next = vec![0.0; n];
    let mut acc = vec![0.0; lanes];
    let mut variance = gamma[0];

    for (lane, src) in sources.iter_mut().enumerate() {
        x[lane] = src.next();
    }

    for k in 1..n {
        // Durbin–Levinson update from order k-1 to order k; phi[j-1] = phi_{k,j}.
        let mut num = gamma[k];
        for j in 1..k {
            num -= phi[j - 1] * gamma[k - j];
        }
        let reflection = num / variance;
        for j in 1..k {
            phi_next[j - 1] = phi[j - 1] - reflection * phi[k - j - 1];
        }
        phi_next[k - 1] = reflection;
        std::mem::swap(&mut phi, &mut phi_next);
        variance *= 1.0 - reflection * reflection;
        if !(variance > MIN_INNOVATION_VARIANCE) {
            return Err(Error::numerical(
                "hosking_sample",
                format!(
                    "innovation variance {variance:e} at step {k} (H = {hurst}); \
                     precision insufficient for this Hurst index and grid size"
                ),
            ));
        }

        acc.iter_mut().for_each(|a| *a = 0.0);
        for j in 1..=k {
            let coef = phi[j - 1];
            let row = &x[(k - j) * lanes..(k - j + 1) * lanes];
            for (a, r) in acc.iter_mut().zip(row) {
                *a += coef * r;
            }
        }
        let sd = variance.sqrt();
        let out = &mut x[k * lanes..(k + 1) * lanes];
        for ((o, a), src) in out.iter_mut().zip(&acc).zip(sources.iter_mut()) {
            *o = a + sd * src.next();
        }
    }

    let scale = spec.mesh().powf(hurst);
    let grids = (0..streams.len())
        .map(|b| {
            let mut data = vec![0.0; n * d];
            for c in 0..d {
                let lane = b * d + c;
                for k in 0..n {
                    data[c * n + k] = x[k * lanes + lane] * scale;
                }
            }
            IncrementGrid {
                mesh: spec.mesh(),
                n_components: d,
                n_steps: n,
                data,
            }
        })
        .collect();
    Ok(grids)
}

/// Dense covariance matrix Γ of the `n_steps` increments of one component.
pub fn increment_covariance(spec: &FbmSpec) -> DMatrix<f64> {
    let n = spec.n_steps;
    let scale = spec.mesh().powf(2.0 * spec.hurst);
    let gamma: Vec<f64> = (0..n).map(|k| scale * unit_autocovariance(k, spec.hurst)).collect();
    DMatrix::from_fn(n, n, |i, j| gamma[i.abs_diff(j)])
}

/// Lower-triangular `L` with `L Lᵀ = Γ`.
pub fn cholesky_factor(spec: &FbmSpec) -> Result<DMatrix<f64>> {
    let cov = increment_covariance(spec);
    nalgebra::Cholesky::new(cov)
        .map(|c| c.unpack())
        .ok_or_else(|| {
            Error::numerical(
                "cholesky_sample",
                "increment covariance is not numerically positive definite",
            )
        })
}

/// One exact sample via the Cholesky factor of the increment covariance.
pub fn cholesky_sample(spec: &FbmSpec, rng: &RngStream) -> Result<IncrementGrid> {
    let factor = cholesky_factor(spec)?;
    Ok(cholesky_sample_with(&factor, spec, rng))
}

/// Like [`cholesky_sample`] but reusing a precomputed factor.
pub fn cholesky_sample_with(factor: &DMatrix<f64>, spec: &FbmSpec, rng: &RngStream) -> IncrementGrid {
    let n = spec.n_steps;
    let mut z = vec![0.0; n];
    let components = (0..spec.n_components)
        .map(|c| {
            rng.gaussians(c).fill(&mut z);
            (0..n)
                .map(|i| (0..=i).map(|j| factor[(i, j)] * z[j]).sum())
                .collect()
        })
        .collect();
    IncrementGrid::from_components(spec.mesh(), components).expect("valid spec")
}

/// Sums each run of `factor` consecutive increments.
pub fn coarsen(grid: &IncrementGrid, factor: usize) -> Result<IncrementGrid> {
    if factor == 0 || grid.n_steps % factor != 0 {
        return Err(Error::domain(
            "coarsen",
            format!("{} steps not divisible by factor {factor}", grid.n_steps),
        ));
    }
    let n_coarse = grid.n_steps / factor;
    let mut data = Vec::with_capacity(n_coarse * grid.n_components);
    for c in 0..grid.n_components {
        for chunk in grid.component(c).chunks_exact(factor) {
            let mut s = 0.0;
            for v in chunk {
                s += v;
            }
            data.push(s);
        }
    }
    Ok(IncrementGrid {
        mesh: grid.mesh * factor as f64,
        n_components: grid.n_components,
        n_steps: n_coarse,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_closed_form() {
        assert!((fbm_covariance(1.0, 2.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((fbm_covariance(1.0, 1.0, 0.4).unwrap() - 1.0).abs() < 1e-15);
        let s = 0.7;
        let t = 1.2;
        let h = 0.4;
        let var_inc = fbm_covariance(t, t, h).unwrap() + fbm_covariance(s, s, h).unwrap()
            - 2.0 * fbm_covariance(s, t, h).unwrap();
        assert!((var_inc - 0.574349177498517).abs() < 1e-12, "{var_inc}");
        assert_eq!(
            fbm_covariance(0.3, 0.9, 0.3).unwrap(),
            fbm_covariance(0.9, 0.3, 0.3).unwrap()
        );
    }

    #[test]
    fn covariance_domain_errors() {
        assert!(fbm_covariance(1.0, 1.0, 1.0).is_err());
        assert!(fbm_covariance(1.0, 1.0, 0.0).is_err());
        assert!(fbm_covariance(-1.0, 1.0, 0.5).is_err());
        assert!(increment_autocovariance(1, 1.0, 1.2).is_err());
        assert!(increment_autocovariance(1, 0.0, 0.4).is_err());
    }

    #[test]
    fn autocovariance_values() {
        for k in 1..10 {
            assert_eq!(increment_autocovariance(k, 0.37, 0.5).unwrap(), 0.0);
        }
        let h = 0.01f64;
        assert!((increment_autocovariance(0, h, 0.3).unwrap() - h.powf(0.6)).abs() < 1e-15);
        let g1 = increment_autocovariance(1, 1.0, 0.4).unwrap();
        assert!((g1 + 0.129449436703876).abs() < 1e-12, "{g1}");
    }

    #[test]
    fn self_similarity_of_covariance() {
        let (t, n, h) = (2.5, 40usize, 0.33);
        let mesh = t / n as f64;
        for k in 0..n {
            let lhs = increment_autocovariance(k, mesh, h).unwrap();
            let rhs = mesh.powf(2.0 * h) * increment_autocovariance(k, 1.0, h).unwrap();
            assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs().max(1e-300), "lag {k}");
        }
    }

    #[test]
    fn hosking_single_step_is_scaled_normal() {
        let spec = FbmSpec::new(0.3, 0.5, 1, 2).unwrap();
        let rng = RngStream::new(9, 4);
        let grid = hosking_sample(&spec, &rng).unwrap();
        for c in 0..2 {
            let z = rng.gaussians(c).next();
            assert_eq!(grid.component(c)[0], z * 0.5f64.powf(0.3));
        }
    }

    #[test]
    fn hosking_brownian_case_is_iid() {
        let spec = FbmSpec::new(0.5, 1.0, 32, 2).unwrap();
        let rng = RngStream::new(1, 2);
        let grid = hosking_sample(&spec, &rng).unwrap();
        let scale = spec.mesh().powf(0.5);
        for c in 0..2 {
            let mut z = vec![0.0; 32];
            rng.gaussians(c).fill(&mut z);
            for k in 0..32 {
                assert_eq!(grid.component(c)[k], z[k] * scale);
            }
        }
    }

    #[test]
    fn hosking_batch_matches_single() {
        let spec = FbmSpec::new(0.4, 1.0, 50, 2).unwrap();
        let streams: Vec<_> = (0..5).map(|i| RngStream::new(77, i)).collect();
        let batch = hosking_sample_batch(&spec, &streams).unwrap();
        for (s, g) in streams.iter().zip(&batch) {
            assert_eq!(&hosking_sample(&spec, s).unwrap(), g);
        }
    }

    #[test]
    fn cholesky_single_step_matches_hosking() {
        let spec = FbmSpec::new(0.7, 2.0, 1, 1).unwrap();
        let rng = RngStream::new(5, 5);
        let a = hosking_sample(&spec, &rng).unwrap();
        let b = cholesky_sample(&spec, &rng).unwrap();
        assert!((a.component(0)[0] - b.component(0)[0]).abs() < 1e-14);
    }

    #[test]
    fn cholesky_brownian_factor_is_diagonal() {
        let spec = FbmSpec::new(0.5, 1.0, 8, 1).unwrap();
        let l = cholesky_factor(&spec).unwrap();
        let s = spec.mesh().sqrt();
        for i in 0..8 {
            for j in 0..8 {
                let expected = if i == j { s } else { 0.0 };
                assert!((l[(i, j)] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cholesky_recomposition() {
        let spec = FbmSpec::new(0.33, 1.0, 64, 1).unwrap();
        let l = cholesky_factor(&spec).unwrap();
        let rebuilt = &l * l.transpose();
        for i in 0..64 {
            for j in 0..64 {
                let g = increment_autocovariance((i as usize).abs_diff(j), spec.mesh(), 0.33).unwrap();
                assert!((rebuilt[(i, j)] - g).abs() <= 1e-10 * g.abs().max(1e-300) + 1e-16);
            }
        }
    }

    #[test]
    fn coarsen_examples() {
        let g = IncrementGrid::from_components(0.25, vec![vec![0.1, 0.2, 0.3, 0.4]]).unwrap();
        let c = coarsen(&g, 2).unwrap();
        assert_eq!(c.component(0), &[0.1 + 0.2, 0.3 + 0.4]);
        assert_eq!(c.mesh(), 0.5);
        let all = coarsen(&g, 4).unwrap();
        assert_eq!(all.component(0), &[((0.1 + 0.2) + 0.3) + 0.4]);
        assert!(coarsen(&g, 3).is_err());
        assert!(coarsen(&g, 0).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(FbmSpec::new(1.2, 1.0, 4, 1).is_err());
        assert!(FbmSpec::new(0.4, 0.0, 4, 1).is_err());
        assert!(FbmSpec::new(0.4, 1.0, 0, 1).is_err());
        assert!(FbmSpec::new(0.4, 1.0, 4, 0).is_err());
        assert_eq!(FbmSpec::new(0.4, 2.0, 4, 1).unwrap().mesh(), 0.5);
    }
}
