//! Level count, sample allocation, error split and the complexity model.

use num_traits::Num;
use serde::{Deserialize, Serialize};

use super::{MlmcConstants, MlmcPlan};
use crate::{Error, Result};

/// `β` within this distance of 1 is treated as `β = 1`.
pub const BETA_ONE_TOLERANCE: f64 = 1e-6;

/// How the per-level sample counts of a plan were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Allocation {
    /// Lagrange optimum for the chosen integer `L`.
    Lagrange,
    /// Explicit formula with `κ = (1 − β)/(2α)`.
    ClosedForm,
    /// Supplied by the caller.
    Fixed,
}

fn check_common(context: &'static str, epsilon: f64, h0: f64, refinement: u32) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::domain(context, format!("epsilon must be > 0, got {epsilon}")));
    }
    if !(h0 > 0.0 && h0.is_finite()) {
        return Err(Error::domain(context, format!("h0 must be > 0, got {h0}")));
    }
    if refinement < 2 {
        return Err(Error::domain(context, format!("M must be >= 2, got {refinement}")));
    }
    Ok(())
}

fn check_d1(context: &'static str, d1: f64) -> Result<()> {
    if d1 > 1.0 && d1.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(context, format!("d1 must be > 1, got {d1}")))
    }
}

/// Real-valued level count `log(d1 c1 h0^α / ε) / (α log M)`, clamped at 0.
pub fn continuous_levels(epsilon: f64, d1: f64, k: &MlmcConstants, h0: f64, refinement: u32) -> f64 {
    let x = (d1 * k.c1 * h0.powf(k.alpha) / epsilon).ln() / (k.alpha * (refinement as f64).ln());
    x.max(0.0)
}

/// Smallest `L ≥ 0` with bias bound `c1 h_L^α ≤ ε/d1`.
pub fn choose_levels(
    epsilon: f64,
    d1: f64,
    k: &MlmcConstants,
    h0: f64,
    refinement: u32,
) -> Result<u32> {
    check_common("choose_levels", epsilon, h0, refinement)?;
    check_d1("choose_levels", d1)?;
    let x = continuous_levels(epsilon, d1, k, h0, refinement);
    // absorb rounding noise so that an exact boundary is not pushed up a level
    let mut levels = (x - 1e-9).ceil().max(0.0);
    if levels > 4096.0 {
        return Err(Error::Infeasible(format!(
            "bias target needs {levels} levels; epsilon = {epsilon} is out of reach"
        )));
    }
    let bias = |l: f64| k.c1 * (h0 * (refinement as f64).powf(-l)).powf(k.alpha);
    while bias(levels) > epsilon / d1 * (1.0 + 1e-12) {
        levels += 1.0;
    }
    Ok(levels as u32)
}

/// `Σ_{l=1}^{L} M^{l(1−β)/2}`, continued to real `L` by the geometric-sum
/// formula (equal to `L` when `β = 1`).
pub fn level_growth_sum(refinement: u32, beta: f64, levels: f64) -> f64 {
    let log_r = 0.5 * (1.0 - beta) * (refinement as f64).ln();
    if log_r.abs() < 1e-14 {
        return levels;
    }
    log_r.exp() * (levels * log_r).exp_m1() / log_r.exp_m1()
}

fn squared_bias(k: &MlmcConstants, h0: f64, refinement: u32, levels: f64) -> f64 {
    k.c1 * k.c1 * h0.powf(2.0 * k.alpha) * (refinement as f64).powf(-2.0 * k.alpha * levels)
}

/// Un-rounded Lagrange-optimal `N_0..N_n` with the multiplier evaluated at a
/// (possibly real) level count `levels`; `n_levels` sets the vector length.
pub fn lagrange_allocation(
    epsilon: f64,
    k: &MlmcConstants,
    h0: f64,
    refinement: u32,
    levels: f64,
    n_levels: u32,
) -> Result<Vec<f64>> {
    check_common("allocate_samples_lagrange", epsilon, h0, refinement)?;
    let m = refinement as f64;
    let beta = k.beta;
    let budget = epsilon * epsilon - squared_bias(k, h0, refinement, levels);
    if !(budget > 0.0) {
        return Err(Error::Infeasible(format!(
            "bias bound at L = {levels} already exceeds epsilon = {epsilon}"
        )));
    }
    let growth = level_growth_sum(refinement, beta, levels);
    let ratio = ((m + 1.0) / m).sqrt();
    let sqrt_lambda = ((k.c2_prime * k.c3 * h0.powf(-beta)).sqrt()
        + (k.c2 * k.c3).sqrt() * ratio * growth)
        * h0.powf(-(1.0 - beta) / 2.0)
        / budget;
    let mut out = Vec::with_capacity(n_levels as usize + 1);
    out.push(sqrt_lambda * (k.c2_prime / k.c3 * h0).sqrt());
    let upper = sqrt_lambda * (k.c2 / k.c3).sqrt() * h0.powf((1.0 + beta) / 2.0) / ratio;
    for l in 1..=n_levels {
        out.push(upper * m.powf(-(l as f64) * (1.0 + beta) / 2.0));
    }
    Ok(out)
}

fn round_up(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.ceil().max(1.0) as u64).collect()
}

/// Lagrange-optimal sample counts for a fixed integer `L`, rounded up. Valid
/// for every `β ∈ (0, 1]`.
pub fn allocate_samples_lagrange(
    epsilon: f64,
    k: &MlmcConstants,
    h0: f64,
    refinement: u32,
    levels: u32,
) -> Result<Vec<u64>> {
    let raw = lagrange_allocation(epsilon, k, h0, refinement, levels as f64, levels)?;
    Ok(round_up(&raw))
}

/// Un-rounded explicit allocation with `κ = (1 − β)/(2α)`, one entry per
/// level `0..=choose_levels(..)`.
pub fn closed_form_allocation(
    epsilon: f64,
    d1: f64,
    k: &MlmcConstants,
    h0: f64,
    refinement: u32,
) -> Result<Vec<f64>> {
    check_common("allocate_samples_closed_form", epsilon, h0, refinement)?;
    check_d1("allocate_samples_closed_form", d1)?;
    if k.beta >= 1.0 - BETA_ONE_TOLERANCE {
        return Err(Error::domain(
            "allocate_samples_closed_form",
            format!("needs beta < 1, got {}; use the Lagrange allocation", k.beta),
        ));
    }
    let n_levels = choose_levels(epsilon, d1, k, h0, refinement)?;
    let m = refinement as f64;
    let beta = k.beta;
    let kappa = (1.0 - beta) / (2.0 * k.alpha);
    let r = m.powf((1.0 - beta) / 2.0);
    let ratio = ((m + 1.0) / m).sqrt();
    // M^{L(1-β)/2} at the real-valued L: (d1 c1 / ε)^κ h0^{(1-β)/2}
    let growth = if continuous_levels(epsilon, d1, k, h0, refinement) > 0.0 {
        (d1 * k.c1).powf(kappa) * h0.powf((1.0 - beta) / 2.0) * epsilon.powf(-kappa)
    } else {
        1.0
    };
    let bracket = (k.c2_prime * h0.powf(-beta)).sqrt() + k.c2.sqrt() * ratio * r * (growth - 1.0) / (r - 1.0);
    let denom = epsilon * epsilon * (1.0 - d1.powi(-2));
    let mut out = Vec::with_capacity(n_levels as usize + 1);
    out.push((k.c2_prime * h0.powf(beta)).sqrt() / denom * bracket);
    let upper = k.c2.sqrt() / ratio * h0.powf(beta) / denom * bracket;
    for l in 1..=n_levels {
        out.push(upper * m.powf(-(l as f64) * (1.0 + beta) / 2.0));
    }
    Ok(out)
}

/// Explicit allocation rounded up; `β < 1` only.
pub fn allocate_samples_closed_form(
    epsilon: f64,
    d1: f64,
    k: &MlmcConstants,
    h0: f64,
    refinement: u32,
) -> Result<Vec<u64>> {
    Ok(round_up(&closed_form_allocation(epsilon, d1, k, h0, refinement)?))
}

fn corollary_factors(k: &MlmcConstants, refinement: u32) -> (f64, f64) {
    let m = refinement as f64;
    let beta = k.beta;
    let r = m.powf((1.0 - beta) / 2.0);
    let f1 = k.c1.powf((1.0 - beta) / beta) * k.c2.powf(1.0 / beta) * k.c3 * (m + 1.0) / m
        * m.powf(1.5 * (1.0 - beta))
        / ((r - 1.0) * (r - 1.0));
    let f2 = k.c1.powf(2.0 / beta) * k.c3 * m * (m + 1.0) / (m - 1.0);
    (f1, f2)
}

fn check_beta_below_one(context: &'static str, beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 - BETA_ONE_TOLERANCE {
        Ok(())
    } else {
        Err(Error::domain(context, format!("needs beta in (0,1), got {beta}")))
    }
}

/// Leading complexity coefficient `c4 + c5` in the regime `α = β/2`, as a
/// function of `d1`. Only `β` is read; `α` is taken to be `β/2`.
pub fn c4_prime(k: &MlmcConstants, d1: f64, refinement: u32) -> Result<f64> {
    check_beta_below_one("c4_prime", k.beta)?;
    check_d1("c4_prime", d1)?;
    let (f1, f2) = corollary_factors(k, refinement);
    Ok(d1.powf(2.0 / k.beta) * (f1 / (d1 * d1 - 1.0) + f2))
}

/// Minimiser of [`c4_prime`] over `d1 > 1`.
pub fn optimal_d1(k: &MlmcConstants, refinement: u32) -> Result<f64> {
    check_beta_below_one("optimal_d1", k.beta)?;
    if refinement < 2 {
        return Err(Error::domain("optimal_d1", format!("M must be >= 2, got {refinement}")));
    }
    let (f1, f2) = corollary_factors(k, refinement);
    let beta = k.beta;
    let disc = ((1.0 - beta) * (1.0 - beta) * f1 * f1 + 4.0 * beta * f1 * f2).sqrt();
    Ok((1.0 - (1.0 - beta) * f1 / (2.0 * f2) + disc / (2.0 * f2)).sqrt())
}

/// Asymptotically optimal `(L, d1)` for `β = 1`, `α ≥ 1/2`.
pub fn optimal_levels_beta1(
    epsilon: f64,
    k: &MlmcConstants,
    h0: f64,
    refinement: u32,
) -> Result<(u32, f64)> {
    check_common("optimal_levels_beta1", epsilon, h0, refinement)?;
    if !k.is_beta_one() {
        return Err(Error::domain(
            "optimal_levels_beta1",
            format!("needs beta = 1, got {}", k.beta),
        ));
    }
    if k.alpha < 0.5 {
        return Err(Error::domain(
            "optimal_levels_beta1",
            format!("needs alpha >= 1/2, got {}", k.alpha),
        ));
    }
    let m = refinement as f64;
    let d1_sq = 1.0
        + (k.c2_prime / (k.c2 * h0) * m / (m + 1.0)).sqrt() * k.alpha * m.ln()
        + (1.0 / epsilon).ln();
    if !(d1_sq > 1.0) {
        return Err(Error::domain(
            "optimal_levels_beta1",
            format!("epsilon = {epsilon} is outside the asymptotic regime"),
        ));
    }
    let d1 = d1_sq.sqrt();
    let levels = choose_levels(epsilon, d1, k, h0, refinement)?;
    Ok((levels, d1))
}

/// Optimised cost at level count `levels` when `β = 1`; infinite when the
/// bias alone exhausts `ε²`.
pub fn complexity_beta1(epsilon: f64, k: &MlmcConstants, h0: f64, refinement: u32, levels: f64) -> f64 {
    let m = refinement as f64;
    let budget = epsilon * epsilon - squared_bias(k, h0, refinement, levels);
    if !(budget > 0.0) {
        return f64::INFINITY;
    }
    let s = (k.c2_prime * k.c3 / h0).sqrt() + (k.c2 * k.c3).sqrt() * ((m + 1.0) / m).sqrt() * levels;
    s * s / budget
}

/// Coefficients of the complexity bound
/// `c4 ε^{-2(1+κ)} + c5 ε^{-1/α} + c6 ε^{-(2+κ)} + c7 ε^{-2} + c8`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityConstants {
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub c8: f64,
}

/// The coefficients of the complexity bound for `β < 1`. At `β = 1` the
/// factor `(M^{(1−β)/2} − 1)^{-1}` is singular and a domain error is returned.
pub fn complexity_constants(
    k: &MlmcConstants,
    d1: f64,
    h0: f64,
    refinement: u32,
) -> Result<ComplexityConstants> {
    check_beta_below_one("complexity_constants", k.beta)?;
    check_d1("complexity_constants", d1)?;
    if !(h0 > 0.0) {
        return Err(Error::domain("complexity_constants", "h0 must be > 0"));
    }
    let m = refinement as f64;
    let (alpha, beta) = (k.alpha, k.beta);
    let kappa = (1.0 - beta) / (2.0 * alpha);
    let r = m.powf((1.0 - beta) / 2.0);
    let split = d1.powf(2.0 * kappa) / (1.0 - d1.powi(-2));
    let ratio = ((m + 1.0) / m).sqrt();
    let e1 = (k.c2_prime * h0.powf(-beta)).sqrt() - k.c2.sqrt() * ratio * r / (r - 1.0);
    let c4 = k.c1.powf(kappa) * k.c2.powf(1.0 + kappa) * k.c3 * split * (m + 1.0) / m
        * m.powf(1.5 * (1.0 - beta))
        / ((r - 1.0) * (r - 1.0));
    let c5 = k.c1.powf(1.0 / alpha) * k.c3 * d1.powf(1.0 / alpha) * m * (m + 1.0) / (m - 1.0);
    let c6 = (k.c1.powf(kappa) + k.c2.powf(kappa)) * k.c2.sqrt() * k.c3 * split
        * h0.powf(-(1.0 - beta) / 2.0)
        * ratio
        * r
        / (r - 1.0)
        * e1;
    let c7 = k.c3 * h0.powf(-(1.0 - beta)) / (1.0 - d1.powi(-2)) * e1 * e1;
    let c8 = -2.0 * k.c3 / h0 / (m - 1.0);
    Ok(ComplexityConstants { c4, c5, c6, c7, c8 })
}

fn check_rates<T: Num + PartialOrd + Copy>(alpha: T, beta: T) -> Result<()> {
    let two = T::one() + T::one();
    if alpha > T::zero() && beta > T::zero() && beta <= two * alpha {
        Ok(())
    } else {
        Err(Error::domain("mlmc_exponent", "needs 0 < beta <= 2 alpha"))
    }
}

/// Multilevel cost exponent `(1 + 2α − β)/α`: cost grows like `ε^{-exponent}`.
///
/// Generic so that exact rational arithmetic can be used.
pub fn mlmc_exponent<T: Num + PartialOrd + Copy>(alpha: T, beta: T) -> Result<T> {
    check_rates(alpha, beta)?;
    let one = T::one();
    Ok((one + alpha + alpha - beta) / alpha)
}

/// Single-level Monte Carlo cost exponent `2 + 1/α`.
pub fn classical_exponent<T: Num + PartialOrd + Copy>(alpha: T) -> Result<T> {
    if !(alpha > T::zero()) {
        return Err(Error::domain("classical_exponent", "needs alpha > 0"));
    }
    let one = T::one();
    Ok(one + one + one / alpha)
}

/// Bias² plus modeled variance of a plan.
pub fn modeled_mse(plan: &MlmcPlan, k: &MlmcConstants) -> f64 {
    let h0 = plan.h0();
    let m = plan.refinement as f64;
    let mut variance = k.c2_prime / plan.samples[0] as f64;
    for (l, &n) in plan.samples.iter().enumerate().skip(1) {
        variance += k.c2 * h0.powf(k.beta) * m.powf(-(l as f64) * k.beta) / n as f64;
    }
    variance + squared_bias(k, h0, plan.refinement, plan.levels() as f64)
}

/// Modeled cost `c3 h0^{-1} [N_0 + (M+1)/M Σ N_l M^l]`.
pub fn modeled_cost(plan: &MlmcPlan, k: &MlmcConstants) -> f64 {
    let m = plan.refinement as f64;
    let upper: f64 = plan
        .samples
        .iter()
        .enumerate()
        .skip(1)
        .map(|(l, &n)| n as f64 * m.powi(l as i32))
        .sum();
    k.c3 / plan.h0() * (plan.samples[0] as f64 + (m + 1.0) / m * upper)
}

/// Error split selection for [`plan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum D1Choice {
    /// Optimised `d1` when `α = β/2`, the `β = 1` asymptotics when `β = 1`,
    /// and `√2` otherwise.
    Auto,
    Fixed(f64),
}

/// Inputs of [`plan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub epsilon: f64,
    pub constants: MlmcConstants,
    pub horizon: f64,
    pub coarse_steps: usize,
    pub refinement: u32,
    pub d1: D1Choice,
}

/// Chooses `L`, `d1` and `N_l` so that the modeled MSE is at most `ε²`.
///
/// For `β < 1` the explicit allocation is used when it stays feasible after
/// rounding; otherwise, and always for `β = 1`, the Lagrange allocation for
/// the chosen integer `L`.
pub fn plan(req: &PlanRequest) -> Result<MlmcPlan> {
    let k = &req.constants;
    if req.coarse_steps == 0 {
        return Err(Error::domain("plan", "coarse_steps must be positive"));
    }
    let h0 = req.horizon / req.coarse_steps as f64;
    check_common("plan", req.epsilon, h0, req.refinement)?;
    let (levels, d1) = match req.d1 {
        D1Choice::Fixed(d1) => (choose_levels(req.epsilon, d1, k, h0, req.refinement)?, d1),
        D1Choice::Auto if k.is_beta_one() && k.alpha >= 0.5 => {
            optimal_levels_beta1(req.epsilon, k, h0, req.refinement)?
        }
        D1Choice::Auto => {
            let d1 = if (k.alpha - k.beta / 2.0).abs() <= 1e-9 * k.alpha && !k.is_beta_one() {
                optimal_d1(k, req.refinement)?
            } else {
                std::f64::consts::SQRT_2
            };
            (choose_levels(req.epsilon, d1, k, h0, req.refinement)?, d1)
        }
    };
    let finest = (req.refinement as u128).checked_pow(levels).map(|f| f * req.coarse_steps as u128);
    if finest.map_or(true, |f| f > u32::MAX as u128) {
        return Err(Error::Infeasible(format!(
            "accuracy {} needs L = {levels} levels, beyond the largest simulable grid",
            req.epsilon
        )));
    }
    let eps2 = req.epsilon * req.epsilon;
    if !k.is_beta_one() {
        let samples = allocate_samples_closed_form(req.epsilon, d1, k, h0, req.refinement)?;
        let candidate = MlmcPlan::new(
            req.horizon,
            req.coarse_steps,
            req.refinement,
            samples,
            d1,
            Allocation::ClosedForm,
        )?;
        if modeled_mse(&candidate, k) <= eps2 * (1.0 + 1e-12) {
            return Ok(candidate);
        }
    }
    let samples = allocate_samples_lagrange(req.epsilon, k, h0, req.refinement, levels)?;
    let out = MlmcPlan::new(
        req.horizon,
        req.coarse_steps,
        req.refinement,
        samples,
        d1,
        Allocation::Lagrange,
    )?;
    let mse = modeled_mse(&out, k);
    if mse > eps2 * (1.0 + 1e-9) {
        return Err(Error::Infeasible(format!(
            "modeled MSE {mse:e} exceeds epsilon^2 = {eps2:e} after rounding"
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn unit(alpha: f64, beta: f64) -> MlmcConstants {
        MlmcConstants::new(1.0, 1.0, 1.0, 1.0, alpha, beta).unwrap()
    }

    #[test]
    fn level_count_examples() {
        let k = unit(1.0, 1.0);
        assert_eq!(choose_levels(0.125, 1.5, &MlmcConstants { c1: 1.0 / 1.5, ..k }, 1.0, 2).unwrap(), 3);
        assert_eq!(choose_levels(0.5, 2.0, &MlmcConstants { c1: 0.25, ..k }, 1.0, 2).unwrap(), 0);
        let k = unit(0.3, 0.3);
        assert_eq!(choose_levels(0.01, 2f64.sqrt(), &k, 1.0, 2).unwrap(), 24);
        assert!(choose_levels(0.01, 1.0, &k, 1.0, 2).is_err());
    }

    #[test]
    fn growth_sum_matches_explicit_sum() {
        for &beta in &[0.2, 0.6, 0.95, 1.0] {
            for levels in 0..10u32 {
                let direct: f64 = (1..=levels).map(|l| 3f64.powf(l as f64 * (1.0 - beta) / 2.0)).sum();
                let closed = level_growth_sum(3, beta, levels as f64);
                assert!((direct - closed).abs() <= 1e-12 * direct.max(1.0), "{beta} {levels}");
            }
        }
    }

    #[test]
    fn single_level_lagrange() {
        let k = MlmcConstants::new(0.05, 2.0, 1.0, 1.0, 0.5, 0.8).unwrap();
        let eps: f64 = 0.1;
        let n = allocate_samples_lagrange(eps, &k, 1.0, 2, 0).unwrap();
        let expected = (2.0 / (eps * eps - 0.0025)).ceil() as u64;
        assert_eq!(n, vec![expected]);
        let k_bad = MlmcConstants { c1: 1.0, ..k };
        assert!(matches!(
            allocate_samples_lagrange(eps, &k_bad, 1.0, 2, 0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn lagrange_counts_decrease() {
        let k = MlmcConstants::new(1.0, 3.0, 0.5, 1.0, 0.4, 0.7).unwrap();
        let raw = lagrange_allocation(0.2, &k, 1.0 / 64.0, 2, 8.0, 8).unwrap();
        assert!(raw.windows(2).skip(1).all(|w| w[1] < w[0]));
    }

    #[test]
    fn closed_form_equals_lagrange_at_real_level_count() {
        let k = MlmcConstants::new(1.3, 2.0, 0.7, 1.1, 0.35, 0.6).unwrap();
        let (eps, d1, h0, m) = (2e-3, 1.7, 0.05, 3);
        let cf = closed_form_allocation(eps, d1, &k, h0, m).unwrap();
        let lc = continuous_levels(eps, d1, &k, h0, m);
        let lg = lagrange_allocation(eps, &k, h0, m, lc, cf.len() as u32 - 1).unwrap();
        for (a, b) in cf.iter().zip(&lg) {
            assert!((a - b).abs() <= 1e-9 * a, "{a} {b}");
        }
        assert!(closed_form_allocation(eps, d1, &unit(0.5, 1.0), h0, m).is_err());
        assert!(closed_form_allocation(eps, 1.0, &k, h0, m).is_err());
    }

    #[test]
    fn closed_form_monotone_in_d1() {
        let k = MlmcConstants::new(1.0, 1.0, 1.0, 1.0, 0.3, 0.6).unwrap();
        // at fixed L the statistical budget grows with d1, so N_0 shrinks
        let a = closed_form_allocation(0.05, 3.0, &k, 1.0 / 64.0, 2).unwrap();
        let b = closed_form_allocation(0.05, 6.0, &k, 1.0 / 64.0, 2).unwrap();
        assert!(b[0] < a[0] * (1.0 - 1e-3) || b.len() != a.len());
    }

    fn finite_difference(k: &MlmcConstants, d1: f64, m: u32) -> f64 {
        let step = 1e-5 * d1;
        (c4_prime(k, d1 + step, m).unwrap() - c4_prime(k, d1 - step, m).unwrap()) / (2.0 * step)
    }

    #[test]
    fn optimal_d1_is_stationary_and_minimal() {
        let k = unit(0.3, 0.6);
        let d1 = optimal_d1(&k, 2).unwrap();
        assert!(d1 > 1.0);
        let scale = c4_prime(&k, d1, 2).unwrap();
        assert!(finite_difference(&k, d1, 2).abs() / scale < 1e-8);
        let mut best = (f64::INFINITY, 0.0);
        for i in 1..=90_000 {
            let x = 1.0 + i as f64 * 1e-4;
            let v = c4_prime(&k, x, 2).unwrap();
            if v < best.0 {
                best = (v, x);
            }
        }
        assert!((best.1 - d1).abs() <= 1e-4, "{} vs {d1}", best.1);
    }

    #[test]
    fn optimal_d1_degenerates_without_variance() {
        let k = MlmcConstants::new(1.0, 1.0, 1e-12, 1.0, 0.3, 0.6).unwrap();
        assert!(optimal_d1(&k, 2).unwrap() - 1.0 < 1e-3);
        assert!(optimal_d1(&unit(0.5, 1.0), 2).is_err());
    }

    #[test]
    fn beta_one_levels_match_brute_force() {
        let k = unit(0.5, 1.0);
        for &eps in &[1e-2, 1e-3, 1e-4] {
            let (levels, d1) = optimal_levels_beta1(eps, &k, 1.0, 2).unwrap();
            let best = (0..=100)
                .min_by(|&a, &b| {
                    complexity_beta1(eps, &k, 1.0, 2, a as f64)
                        .total_cmp(&complexity_beta1(eps, &k, 1.0, 2, b as f64))
                })
                .unwrap();
            assert!((levels as i64 - best as i64).abs() <= 1, "eps {eps}: {levels} vs {best}");
            assert!(d1 > 1.0);
        }
        assert!(optimal_levels_beta1(1e-2, &unit(0.5, 0.6), 1.0, 2).is_err());
        assert!(optimal_levels_beta1(1e-2, &unit(0.45, 0.9), 1.0, 2).is_err());
    }

    #[test]
    fn beta_one_complexity_is_eps2_log2() {
        let k = unit(0.5, 1.0);
        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&eps: &f64| {
                let (levels, _) = optimal_levels_beta1(eps, &k, 1.0, 2).unwrap();
                complexity_beta1(eps, &k, 1.0, 2, levels as f64) * eps * eps / (1.0 / eps).ln().powi(2)
            })
            .collect();
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min <= 2.0, "{ratios:?}");
    }

    #[test]
    fn complexity_constant_examples() {
        let k = unit(0.5, 0.6);
        let c = complexity_constants(&k, 2f64.sqrt(), 1.0, 2).unwrap();
        assert!((c.c5 - 12.0).abs() < 1e-12);
        assert!(c.c4 > 0.0 && c.c8 < 0.0);
        assert_eq!(c.c8, -2.0);
        assert!(complexity_constants(&unit(0.5, 1.0), 2.0, 1.0, 2).is_err());
    }

    #[test]
    fn corollary_constant_is_c4_plus_c5() {
        for &(c1, c2, c3, beta, m) in &[(1.0, 1.0, 1.0, 0.6, 2), (0.3, 2.5, 0.7, 0.4, 3), (2.0, 0.1, 5.0, 0.8, 4)] {
            let k = MlmcConstants::new(c1, 1.0, c2, c3, beta / 2.0, beta).unwrap();
            for &d1 in &[1.2, 1.5, 3.0] {
                let c = complexity_constants(&k, d1, 1.0, m).unwrap();
                let cp = c4_prime(&k, d1, m).unwrap();
                assert!(((c.c4 + c.c5) - cp).abs() <= 1e-10 * cp, "{} vs {cp}", c.c4 + c.c5);
            }
        }
    }

    #[test]
    fn exponents_exact_in_rationals() {
        let r = |n: i64, d: i64| Ratio::new(n, d);
        assert_eq!(mlmc_exponent(r(3, 10), r(3, 5)).unwrap(), r(10, 3));
        assert_eq!(classical_exponent(r(3, 10)).unwrap(), r(16, 3));
        assert_eq!(mlmc_exponent(r(3, 5), r(3, 5)).unwrap(), r(8, 3));
        assert_eq!(classical_exponent(r(3, 5)).unwrap(), r(11, 3));
        assert_eq!(mlmc_exponent(r(1, 6), r(1, 3)).unwrap(), r(6, 1));
        assert_eq!(classical_exponent(r(1, 6)).unwrap(), r(8, 1));
        assert_eq!(mlmc_exponent(r(1, 3), r(1, 3)).unwrap(), r(4, 1));
        assert_eq!(classical_exponent(r(1, 3)).unwrap(), r(5, 1));
        assert!(mlmc_exponent(r(1, 6), r(1, 2)).is_err());
        assert!((mlmc_exponent(0.3f64, 0.6).unwrap() - 10.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn planned_runs_are_feasible() {
        let cases = [
            MlmcConstants::new(1.0, 1.0, 1.0, 1.0, 0.3, 0.6).unwrap(),
            MlmcConstants::new(0.5, 0.2, 2.0, 3.0, 0.4, 0.5).unwrap(),
            MlmcConstants::new(1.0, 1.0, 1.0, 1.0, 0.5, 1.0).unwrap(),
            MlmcConstants::new(2.0, 0.3, 0.4, 1.0, 0.6, 0.9).unwrap(),
        ];
        for k in cases {
            for &eps in &[0.1, 0.02, 0.005] {
                for d1 in [D1Choice::Auto, D1Choice::Fixed(1.5)] {
                    let req = PlanRequest {
                        epsilon: eps,
                        constants: k,
                        horizon: 1.0,
                        coarse_steps: 16,
                        refinement: 2,
                        d1,
                    };
                    let p = plan(&req).unwrap();
                    assert!(modeled_mse(&p, &k) <= eps * eps * (1.0 + 1e-9), "{k:?} {eps}");
                }
            }
        }
    }

    #[test]
    fn lagrange_allocation_is_stationary() {
        let k = MlmcConstants::new(1.0, 2.0, 0.8, 1.0, 0.35, 0.6).unwrap();
        let (eps, h0, m, levels) = (0.1, 1.0 / 32.0, 2u32, 6u32);
        let n = lagrange_allocation(eps, &k, h0, m, levels as f64, levels).unwrap();
        let weights: Vec<f64> = (0..=levels)
            .map(|l| if l == 0 { 1.0 } else { (m as f64 + 1.0) / m as f64 * (m as f64).powi(l as i32) })
            .collect();
        let var_coef: Vec<f64> = (0..=levels)
            .map(|l| {
                if l == 0 {
                    k.c2_prime
                } else {
                    k.c2 * h0.powf(k.beta) * (m as f64).powf(-(l as f64) * k.beta)
                }
            })
            .collect();
        let cost = |n: &[f64]| n.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>();
        let base = cost(&n);
        for i in 0..=levels as usize {
            for factor in [0.9, 1.1] {
                // perturb N_i, then rescale the others to keep the variance on budget
                let mut p = n.clone();
                p[i] *= factor;
                let var = |p: &[f64]| p.iter().zip(&var_coef).map(|(a, v)| v / a).sum::<f64>();
                let target = var(&n);
                let others: f64 = p.iter().zip(&var_coef).enumerate().filter(|(j, _)| *j != i).map(|(_, (a, v))| v / a).sum();
                let scale = others / (target - var_coef[i] / p[i]);
                for (j, x) in p.iter_mut().enumerate() {
                    if j != i {
                        *x *= scale;
                    }
                }
                assert!((var(&p) - target).abs() < 1e-12 * target);
                assert!(cost(&p) > base, "level {i} factor {factor}");
            }
        }
    }

    #[test]
    fn modeled_cost_slope_matches_exponent() {
        let k = MlmcConstants::new(1.0, 1.0, 1.0, 1.0, 0.5, 0.6).unwrap();
        let eps0 = 0.05;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for j in 3..=8 {
            let eps = eps0 * 2f64.powi(-j);
            let req = PlanRequest {
                epsilon: eps,
                constants: k,
                horizon: 1.0,
                coarse_steps: 1,
                refinement: 2,
                d1: D1Choice::Fixed(2f64.sqrt()),
            };
            let p = plan(&req).unwrap();
            xs.push(eps.ln());
            ys.push(modeled_cost(&p, &k).ln());
        }
        let fit = crate::stats::least_squares(&xs, &ys).unwrap();
        let expected = mlmc_exponent(0.5, 0.6).unwrap();
        assert!((fit.slope + expected).abs() <= 0.1, "slope {} vs -{expected}", fit.slope);
    }
}
