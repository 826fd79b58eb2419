//! Strong and weak error ladders on nested grids.

use serde::{Deserialize, Serialize};

use crate::fbm::{coarsen, IncrementGrid};
use crate::mlmc::{map_batches, Simulator};
use crate::rde::{exact_linear_1d, simplified_euler_path, Problem};
use crate::stats::Summary;
use crate::{Error, Result};

/// Stream family used by the ladders.
pub const LADDER_FAMILY: u64 = 2 << 32;

/// Half-width of the reported confidence intervals, in standard errors.
pub const CONFIDENCE_Z: f64 = 1.96;

/// Monte Carlo error estimates on a sequence of meshes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorLadder {
    /// Step counts `N`, increasing.
    pub steps: Vec<usize>,
    /// Meshes `T/N`, strictly decreasing.
    pub meshes: Vec<f64>,
    pub errors: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub paths: u64,
}

impl ErrorLadder {
    pub fn new(
        steps: Vec<usize>,
        meshes: Vec<f64>,
        errors: Vec<f64>,
        std_errors: Vec<f64>,
        paths: u64,
    ) -> Result<Self> {
        let n = meshes.len();
        Error::check_dim("ErrorLadder steps", n, steps.len())?;
        Error::check_dim("ErrorLadder errors", n, errors.len())?;
        Error::check_dim("ErrorLadder std_errors", n, std_errors.len())?;
        if meshes.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::domain("ErrorLadder", "meshes must be strictly decreasing"));
        }
        if std_errors.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::domain("ErrorLadder", "standard errors must be >= 0"));
        }
        Ok(Self {
            steps,
            meshes,
            errors,
            std_errors,
            paths,
        })
    }

    pub fn len(&self) -> usize {
        self.meshes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meshes.is_empty()
    }

    /// `error ± 1.96 · std_error` at point `i`.
    pub fn confidence_interval(&self, i: usize) -> (f64, f64) {
        let half = CONFIDENCE_Z * self.std_errors[i];
        (self.errors[i] - half, self.errors[i] + half)
    }
}

/// How the distance between two approximations is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrongNorm {
    /// `|Y_T^N − Y_T^{2N}|` at the terminal time.
    #[default]
    Terminal,
    /// Maximum over the points of the coarser grid.
    Sup,
}

/// What the strong error of the `N`-step scheme is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrongReference {
    /// The `2N`-step scheme driven by the same increments.
    #[default]
    Finer,
    /// The pathwise exact solution (scalar linear problem only).
    Exact,
}

/// Parameters shared by the ladder experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRequest {
    pub horizon: f64,
    /// Step counts `N`; each must be the largest one divided by a power of two.
    pub steps: Vec<usize>,
    pub paths: u64,
    pub seed: u64,
    #[serde(default)]
    pub norm: StrongNorm,
    #[serde(default)]
    pub reference: StrongReference,
}

/// Strong and weak ladders produced from one simulation pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderPair {
    pub strong: ErrorLadder,
    /// Present when the functional has a known reference value.
    pub weak: Option<ErrorLadder>,
    /// Mean functional value per ladder point, whether or not a reference exists.
    pub weak_means: Vec<f64>,
}

struct Ladder {
    steps: Vec<usize>,
    /// Grids of the chain, finest first: 2·max, max, max/2, …, min.
    chain: Vec<usize>,
}

fn validate(req: &LadderRequest) -> Result<Ladder> {
    if req.steps.is_empty() {
        return Err(Error::domain("error ladder", "mesh ladder is empty"));
    }
    if req.paths < 2 {
        return Err(Error::domain("error ladder", "need at least two paths"));
    }
    if !(req.horizon > 0.0) {
        return Err(Error::domain("error ladder", "horizon must be > 0"));
    }
    let mut steps = req.steps.clone();
    steps.sort_unstable();
    steps.dedup();
    if steps[0] == 0 {
        return Err(Error::domain("error ladder", "step counts must be positive"));
    }
    let max = *steps.last().expect("nonempty");
    for &n in &steps {
        if max % n != 0 || !(max / n).is_power_of_two() {
            return Err(Error::domain(
                "error ladder",
                format!("step count {n} is not {max} divided by a power of two"),
            ));
        }
    }
    let mut chain = vec![2 * max];
    while *chain.last().expect("nonempty") > steps[0] {
        let next = chain.last().expect("nonempty") / 2;
        chain.push(next);
    }
    Ok(Ladder { steps, chain })
}

/// Per-path contributions at every chain grid: strong distance to the next
/// finer grid (or to the exact solution) and the functional value.
fn path_values(
    sim: &Simulator,
    fine: &IncrementGrid,
    chain_len: usize,
    req: &LadderRequest,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut grids = Vec::with_capacity(chain_len);
    grids.push(fine.clone());
    for _ in 1..chain_len {
        let next = coarsen(grids.last().expect("nonempty"), 2)?;
        grids.push(next);
    }
    let setup = sim.setup();
    let exact = match (req.reference, setup.problem) {
        (StrongReference::Finer, _) => None,
        (StrongReference::Exact, Problem::ScalarLinear { a }) => {
            Some(exact_linear_1d(a, fine.cumulative(0)[fine.n_steps()], 1.0))
        }
        (StrongReference::Exact, p) => {
            return Err(Error::domain(
                "strong_error_curve",
                format!("no exact solution available for problem {p}"),
            ))
        }
    };
    let mut strong = vec![0.0; chain_len];
    let mut payoff = vec![0.0; chain_len];
    match req.norm {
        StrongNorm::Terminal => {
            let terminals: Vec<Vec<f64>> = grids.iter().map(|g| sim.terminal(g)).collect::<Result<_>>()?;
            for i in 0..chain_len {
                payoff[i] = setup.functional.eval(&terminals[i]);
                strong[i] = match exact {
                    Some(y) => (terminals[i][0] - y).abs(),
                    None if i > 0 => distance(&terminals[i], &terminals[i - 1]),
                    None => 0.0,
                };
            }
        }
        StrongNorm::Sup => {
            if exact.is_some() {
                return Err(Error::domain(
                    "strong_error_curve",
                    "the sup norm is only available against the finer scheme",
                ));
            }
            let fields = setup.problem.fields();
            let y0 = setup.problem.initial_state();
            let paths: Vec<_> = grids
                .iter()
                .map(|g| simplified_euler_path(&y0, g, &fields, setup.order))
                .collect::<Result<_>>()?;
            for i in 0..chain_len {
                payoff[i] = setup.functional.eval(paths[i].terminal());
                if i > 0 {
                    strong[i] = (0..=paths[i].n_steps())
                        .map(|k| distance(paths[i].state(k), paths[i - 1].state(2 * k)))
                        .fold(0.0, f64::max);
                }
            }
        }
    }
    Ok((strong, payoff))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Simulates `paths` fine grids with `2·max N` steps once and evaluates every
/// ladder point from their pairwise-coarsened chain.
///
/// `reference` is the exact value of the functional, when known; it turns
/// the functional means into a weak error ladder.
pub fn error_ladders(sim: &Simulator, req: &LadderRequest, reference: Option<f64>) -> Result<LadderPair> {
    let ladder = validate(req)?;
    let chain_len = ladder.chain.len();
    let spec = sim.spec(req.horizon, ladder.chain[0])?;
    let per_path = map_batches(req.paths, |range| {
        sim.grids(&spec, req.seed, LADDER_FAMILY, range)?
            .iter()
            .map(|g| path_values(sim, g, chain_len, req))
            .collect()
    })?;

    let point = |n: usize| ladder.chain.iter().position(|&c| c == n).expect("ladder point in chain");
    let column = |i: usize, strong: bool| -> Vec<f64> {
        per_path
            .iter()
            .map(|(s, p)| if strong { s[i] } else { p[i] })
            .collect()
    };
    let meshes: Vec<f64> = ladder.steps.iter().map(|&n| req.horizon / n as f64).collect();
    let (mut s_err, mut s_se, mut w_mean, mut w_err, mut w_se) = (vec![], vec![], vec![], vec![], vec![]);
    for &n in &ladder.steps {
        let i = point(n);
        let s = Summary::of(&column(i, true));
        s_err.push(s.mean);
        s_se.push(s.std_error());
        let w = Summary::of(&column(i, false));
        w_mean.push(w.mean);
        w_err.push((w.mean - reference.unwrap_or(0.0)).abs());
        w_se.push(w.std_error());
    }
    // the ladder is reported in increasing N, i.e. decreasing mesh
    let strong = ErrorLadder::new(ladder.steps.clone(), meshes.clone(), s_err, s_se, req.paths)?;
    let weak = match reference {
        Some(_) => Some(ErrorLadder::new(ladder.steps.clone(), meshes, w_err, w_se, req.paths)?),
        None => None,
    };
    Ok(LadderPair {
        strong,
        weak,
        weak_means: w_mean,
    })
}

/// Monte Carlo estimate of `E|Y^N − Y^{2N}|` (or of the distance to the
/// exact solution) for each `N` of the ladder.
pub fn strong_error_curve(sim: &Simulator, req: &LadderRequest) -> Result<ErrorLadder> {
    Ok(error_ladders(sim, req, None)?.strong)
}

/// `|E[φ(Y^N)] − reference|` for each `N` of the ladder.
pub fn weak_error_curve(sim: &Simulator, req: &LadderRequest, reference: f64) -> Result<ErrorLadder> {
    Ok(error_ladders(sim, req, Some(reference))?
        .weak
        .expect("reference supplied"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlmc::SimulationSetup;
    use crate::rde::{Functional, SchemeOrder};
    use crate::rng::Engine;

    fn sim(problem: Problem, functional: Functional, hurst: f64) -> Simulator {
        Simulator::new(SimulationSetup {
            problem,
            functional,
            hurst,
            order: SchemeOrder::Three,
            engine: Engine::Counter,
        })
        .unwrap()
    }

    fn request(steps: Vec<usize>, paths: u64) -> LadderRequest {
        LadderRequest {
            horizon: 1.0,
            steps,
            paths,
            seed: 3,
            norm: StrongNorm::Terminal,
            reference: StrongReference::Finer,
        }
    }

    #[test]
    fn zero_coefficient_gives_zero_errors() {
        let s = sim(Problem::ScalarLinear { a: 0.0 }, Functional::Terminal, 0.4);
        let pair = error_ladders(&s, &request(vec![4, 8, 16], 20), Some(1.0)).unwrap();
        assert!(pair.strong.errors.iter().all(|&e| e == 0.0));
        assert!(pair.weak.unwrap().errors.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn ladder_validation() {
        let s = sim(Problem::Sphere, Functional::F, 0.4);
        assert!(strong_error_curve(&s, &request(vec![4, 12], 10)).is_err());
        assert!(strong_error_curve(&s, &request(vec![], 10)).is_err());
        assert!(strong_error_curve(&s, &request(vec![4, 8], 1)).is_err());
        let mut exact = request(vec![4, 8], 10);
        exact.reference = StrongReference::Exact;
        assert!(strong_error_curve(&s, &exact).is_err());
    }

    #[test]
    fn ladder_is_ordered_by_decreasing_mesh() {
        let s = sim(Problem::Sphere, Functional::F, 0.4);
        let l = strong_error_curve(&s, &request(vec![16, 4, 8], 16)).unwrap();
        assert_eq!(l.steps, vec![4, 8, 16]);
        assert_eq!(l.meshes, vec![0.25, 0.125, 0.0625]);
        assert!(l.std_errors.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn sup_norm_dominates_terminal() {
        let s = sim(Problem::Sphere, Functional::F, 0.4);
        let t = strong_error_curve(&s, &request(vec![8, 16], 32)).unwrap();
        let mut req = request(vec![8, 16], 32);
        req.norm = StrongNorm::Sup;
        let u = strong_error_curve(&s, &req).unwrap();
        for (a, b) in t.errors.iter().zip(&u.errors) {
            assert!(b >= a);
        }
    }

    #[test]
    fn exact_and_finer_references_agree_in_magnitude() {
        let s = sim(Problem::ScalarLinear { a: 1.0 }, Functional::Terminal, 0.5);
        let finer = strong_error_curve(&s, &request(vec![16, 32, 64], 200)).unwrap();
        let mut req = request(vec![16, 32, 64], 200);
        req.reference = StrongReference::Exact;
        let exact = strong_error_curve(&s, &req).unwrap();
        for (a, b) in finer.errors.iter().zip(&exact.errors) {
            let r = a / b;
            assert!((0.1..10.0).contains(&r), "{a} vs {b}");
        }
    }

    #[test]
    fn confidence_interval_is_symmetric() {
        let l = ErrorLadder::new(vec![1], vec![1.0], vec![0.5], vec![0.1], 10).unwrap();
        let (lo, hi) = l.confidence_interval(0);
        assert!((lo - 0.304).abs() < 1e-12 && (hi - 0.696).abs() < 1e-12);
        assert!(ErrorLadder::new(vec![1, 2], vec![0.5, 1.0], vec![0.0; 2], vec![0.0; 2], 1).is_err());
    }
}
