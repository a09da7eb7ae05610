//! Meta-structure selection for regression.
//!
//! Each agent's mask is fitted by least squares, every coefficient is
//! t-tested, insignificant regressors are removed in one pass, the survivors
//! are re-estimated and simulated in free run. The fitness is the free-run
//! RRSE times a complexity penalty read off the derivative of a SiLU curve
//! parameterized by the candidate's size (retained plus removed
//! regressors). Agents then carry their pruned structure, scored in
//! place, into the next swarm update.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dictionary::{Dictionary, DictionaryConfig, Mask, TermMatrix};
use crate::error::{Error, Result};
use crate::estimation::{prune_on, rrse, simulate, CandidateModel, Diagnostics, LsFit, INFEASIBLE};
use crate::report::RunReport;
use crate::swarm::{init_population, Outcome, SwarmConfig};

/// Logistic curve `1 / (1 + exp(-a (x - c)))`.
pub fn sigmoid(x: f64, a: f64, c: f64) -> f64 {
    1.0 / (1.0 + (-a * (x - c)).exp())
}

/// `s(x) [1 + a (x - c) (1 - s(x))]` with `s` the logistic curve above.
///
/// This is the derivative of `u sigma(u)` with respect to `u = a (x - c)`;
/// the chain-rule factor `a` is deliberately not applied.
pub fn silu_derivative(x: f64, a: f64, c: f64) -> f64 {
    let s = sigmoid(x, a, c);
    s * (1.0 + a * (x - c) * (1.0 - s))
}

/// Complexity penalties for every model size over a dictionary of `n_vars` terms.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyCurve {
    n_vars: usize,
    values: Vec<f64>,
}

impl PenaltyCurve {
    /// Tabulates `penalty(n_vars, m)` for `m = 1..=n_vars`.
    pub fn new(n_vars: usize) -> Self {
        let values = (1..=n_vars).map(|m| penalty(n_vars, m)).collect();
        Self { n_vars, values }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Penalty for a model of `model_size` regressors, `1 <= model_size <= n_vars`.
    pub fn get(&self, model_size: usize) -> f64 {
        assert!(model_size >= 1 && model_size <= self.n_vars, "model size {model_size} out of range");
        self.values[model_size - 1]
    }
}

/// Penalty for a model of `model_size` regressors over `n_vars` candidates.
///
/// The curve is `silu_derivative(x; a, c)` with `c = n_vars / 2` and
/// `a = 1 / (ln(model_size + 1) n_vars)`, tabulated on the grid
/// `x = 0..n_vars`, shifted so its minimum over the grid is zero, and read
/// at `x = model_size`.
pub fn penalty(n_vars: usize, model_size: usize) -> f64 {
    assert!(model_size >= 1 && model_size <= n_vars, "model size {model_size} out of range 1..={n_vars}");
    let c = n_vars as f64 / 2.0;
    let a = 1.0 / ((model_size as f64 + 1.0).ln() * n_vars as f64);
    let min = (0..n_vars)
        .map(|x| silu_derivative(x as f64, a, c))
        .fold(f64::INFINITY, f64::min);
    silu_derivative(model_size as f64, a, c) - min
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaMssConfig {
    pub dictionary: DictionaryConfig,
    /// Significance level of the coefficient t-test.
    pub alpha: f64,
    pub swarm: SwarmConfig,
}

impl Default for MetaMssConfig {
    fn default() -> Self {
        Self { dictionary: DictionaryConfig::new(4, vec![4], 3), alpha: 0.05, swarm: SwarmConfig::default() }
    }
}

impl MetaMssConfig {
    pub fn validate(&self) -> Result<()> {
        self.dictionary.validate()?;
        self.swarm.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig("alpha must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Everything needed to score masks for one dataset, shared read-only
/// across concurrent evaluations.
#[derive(Clone, Debug)]
pub struct RegressionProblem<'a> {
    dict: &'a Dictionary,
    dataset: &'a Dataset,
    matrix: TermMatrix,
    penalties: PenaltyCurve,
    alpha: f64,
}

impl<'a> RegressionProblem<'a> {
    pub fn new(dict: &'a Dictionary, dataset: &'a Dataset, alpha: f64) -> Result<Self> {
        let matrix = TermMatrix::new(dataset, dict)?;
        let t = matrix.target();
        if t.iter().all(|&v| v == t[0]) {
            return Err(Error::DegenerateTarget);
        }
        Ok(Self { dict, dataset, matrix, penalties: PenaltyCurve::new(dict.len()), alpha })
    }

    pub fn matrix(&self) -> &TermMatrix {
        &self.matrix
    }

    pub fn penalties(&self) -> &PenaltyCurve {
        &self.penalties
    }

    /// Free-run RRSE of a fitted structure over the evaluation window.
    pub fn free_run_rrse(&self, mask: &Mask, theta: &[f64]) -> Result<f64> {
        let start = self.matrix.start();
        let y_hat = simulate(&self.dict.decode(mask), theta, self.dataset, start)?;
        rrse(self.matrix.target(), &y_hat[start..])
    }

    /// Fit, test, prune, re-estimate, simulate and score `mask`.
    pub fn evaluate(&self, mask: &Mask) -> Result<CandidateModel> {
        if mask.len() != self.dict.len() {
            return Err(Error::InvalidConfig("mask length does not match dictionary".into()));
        }
        let model_size = mask.count();
        if model_size == 0 {
            return Err(Error::EmptyModel);
        }
        let pruned = prune_on(&self.matrix, mask, self.alpha)?;
        let rrse = self.free_run_rrse(&pruned.mask, &pruned.theta)?;
        let penalty = self.penalties.get(model_size);
        let diagnostics = Diagnostics { rrse, penalty, fitness: rrse * penalty, n_redundant: pruned.n_redundant, model_size };
        Ok(CandidateModel { mask: pruned.mask, theta: pruned.theta, diagnostics })
    }

    /// Swarm callback: empty structures ask for regeneration, numerical
    /// failures score as infeasible. When pruning removed regressors the
    /// agent moves to the pruned encoding and is scored there, so its
    /// fitness always belongs to the position it carries forward.
    pub fn outcome(&self, mask: &Mask) -> Outcome {
        match self.evaluate(mask) {
            Ok(model) if model.diagnostics.n_redundant > 0 => self.outcome(&model.mask),
            Ok(model) => Outcome::Scored { fitness: model.diagnostics.fitness, position: model.mask },
            Err(Error::EmptyModel) => Outcome::Empty,
            Err(_) => Outcome::Scored { fitness: INFEASIBLE, position: mask.clone() },
        }
    }

    /// Repeats the t-test pruning until every remaining coefficient is
    /// significant on its own fit.
    pub fn prune_to_fixpoint(&self, mask: &Mask) -> Result<Mask> {
        let mut current = mask.clone();
        loop {
            let p = prune_on(&self.matrix, &current, self.alpha)?;
            if p.n_redundant == 0 {
                return Ok(current);
            }
            current = p.mask;
        }
    }
}

/// Scores one candidate mask on `dataset`.
pub fn evaluate_candidate(mask: &Mask, dict: &Dictionary, dataset: &Dataset, alpha: f64) -> Result<CandidateModel> {
    RegressionProblem::new(dict, dataset, alpha)?.evaluate(mask)
}

/// Runs the full structure search and returns the selected model.
///
/// The returned structure is the best mask found, pruned until all its
/// coefficients pass the t-test, with parameters re-estimated on the whole
/// window and diagnostics recomputed for that final structure.
pub fn run_meta_mss(dataset: &Dataset, config: &MetaMssConfig) -> Result<(CandidateModel, RunReport)> {
    config.validate()?;
    let started = Instant::now();
    let dict = Dictionary::build(&config.dictionary)?;
    let problem = RegressionProblem::new(&dict, dataset, config.alpha)?;
    let mut swarm = init_population(dict.len(), &config.swarm)?;
    swarm.run(&|m: &Mask| problem.outcome(m))?;
    let best = swarm.gbest.clone().ok_or_else(|| Error::Aborted("no agent was ever scored".into()))?;
    if best.fitness >= INFEASIBLE {
        return Err(Error::Aborted("no feasible model found".into()));
    }

    let final_mask = problem.prune_to_fixpoint(&best.position)?;
    let model = problem.evaluate(&final_mask)?;
    let fit = LsFit::new(&problem.matrix().select(&model.mask)?, problem.matrix().target())?;
    debug_assert!(fit.theta.iter().zip(&model.theta).all(|(a, b)| a == b));

    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    let report = RunReport::regression("meta-mss", &dict, &model, swarm.trace.clone(), best.iteration, elapsed_ms, config.swarm.seed);
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_value() {
        assert_eq!(silu_derivative(5.0, 0.7, 5.0), 0.5);
        for x in [-3.0, 0.0, 8.0] {
            assert_eq!(silu_derivative(x, 0.0, 2.0), 0.5);
        }
    }

    #[test]
    fn matches_finite_difference_of_silu_in_u() {
        // d/du [u sigma(u)] at u = a (x - c) equals silu_derivative(x; a, c).
        let silu = |u: f64| u / (1.0 + (-u).exp());
        let (a, c) = (0.3, 10.0);
        for x in [1.0, 4.5, 10.0, 17.0] {
            let u = a * (x - c);
            let h = 1e-5;
            let fd = (silu(u + h) - silu(u - h)) / (2.0 * h);
            assert!((fd - silu_derivative(x, a, c)).abs() < 1e-8);
            // With respect to x the true derivative carries the factor a.
            let fdx = (silu(a * (x + h - c)) - silu(a * (x - h - c))) / (2.0 * h);
            assert!((fdx - a * silu_derivative(x, a, c)).abs() < 1e-8);
        }
    }

    #[test]
    fn raw_value_at_midpoint() {
        let n = 40;
        let c = n as f64 / 2.0;
        assert_eq!(silu_derivative(20.0, 20.0 / c, c), 0.5);
    }

    #[test]
    fn penalty_grows_with_size() {
        assert!(penalty(165, 20) > penalty(165, 5));
        let curve = PenaltyCurve::new(165);
        assert_eq!(curve.get(20), penalty(165, 20));
    }

    #[test]
    fn penalty_nonnegative_sweep() {
        for n in [1usize, 2, 3, 10, 57, 165, 300] {
            for m in 1..=n {
                assert!(penalty(n, m) >= 0.0, "negative penalty at n={n}, m={m}");
            }
        }
    }
}
