//! Meta-structure selection for binary responses.
//!
//! Candidates are logistic NARX models `p_k = 1 / (1 + exp(-psi_k' theta))`
//! fitted by stochastic gradient descent. Coefficients are Wald-tested with
//! standard errors from the observed information, insignificant terms are
//! dropped and the rest refitted. The fitness is `(1 - r) * penalty`, with
//! `r` the point-biserial correlation between the fitted probabilities and
//! the labels.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Uniform;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dictionary::{Dictionary, DictionaryConfig, Mask, TermMatrix};
use crate::error::{Error, Result};
use crate::estimation::{t_test, LsFit, SignificanceReport, INFEASIBLE};
use crate::metamss::PenaltyCurve;
use crate::report::{ClassificationSummary, RunReport, SCHEMA_VERSION};
use crate::swarm::{init_population, Outcome, SwarmConfig};

/// Probabilities are kept inside `[PROB_CLIP, 1 - PROB_CLIP]`.
pub const PROB_CLIP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Samples per update; 1 is plain stochastic descent.
    pub batch: usize,
    /// Training stops once an epoch lowers the mean negative log-likelihood
    /// by a non-negative amount smaller than this.
    pub tolerance: f64,
    /// Epoch `e` uses step `learning_rate / (1 + decay * e)`.
    pub decay: f64,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, epochs: 100, batch: 1, tolerance: 1e-6, decay: 0.1, seed: 0 }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(self.decay >= 0.0) {
            return Err(Error::InvalidConfig("learning-rate decay must be non-negative".into()));
        }
        Ok(())
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn linear(row: impl Iterator<Item = f64>, theta: &[f64]) -> f64 {
    row.zip(theta).map(|(p, t)| p * t).sum()
}

/// Probability of class 1 for one regressor row.
pub fn predict_probability(row: &[f64], theta: &[f64]) -> f64 {
    assert_eq!(row.len(), theta.len());
    logistic(linear(row.iter().copied(), theta)).clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

/// Probabilities for every row of `psi`.
pub fn predict(psi: &DMatrix<f64>, theta: &[f64]) -> Vec<f64> {
    (0..psi.nrows())
        .map(|r| logistic(linear(psi.row(r).iter().copied(), theta)).clamp(PROB_CLIP, 1.0 - PROB_CLIP))
        .collect()
}

/// Logistic negative log-likelihood `sum ln(1 + e^z) - y z`, `z = psi theta`.
pub fn negative_log_likelihood(psi: &DMatrix<f64>, y: &[f64], theta: &[f64]) -> f64 {
    (0..psi.nrows())
        .map(|r| {
            let z = linear(psi.row(r).iter().copied(), theta);
            softplus(z) - y[r] * z
        })
        .sum()
}

/// Gradient of [`negative_log_likelihood`]: `sum (p_k - y_k) psi_k`.
pub fn nll_gradient(psi: &DMatrix<f64>, y: &[f64], theta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; theta.len()];
    for (row, &yr) in psi.row_iter().zip(y) {
        let p = logistic(linear(row.iter().copied(), theta));
        for (gj, x) in g.iter_mut().zip(row.iter()) {
            *gj += (p - yr) * x;
        }
    }
    g
}

fn check_labels(y: &[f64]) -> Result<()> {
    match y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        Some(&v) => Err(Error::InvalidLabels(v)),
        None => Ok(()),
    }
}

/// Fits `theta` by mini-batch SGD from zero, shuffling the sample order
/// each epoch with a generator seeded from `config.seed`.
pub fn sgd_fit(psi: &DMatrix<f64>, y: &[f64], config: &SgdConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let (n, m) = psi.shape();
    if n != y.len() {
        return Err(Error::InvalidData(format!("matrix has {n} rows but labels have {}", y.len())));
    }
    if m == 0 {
        return Err(Error::EmptyModel);
    }
    check_labels(y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut theta = vec![0.0; m];
    let mut step = vec![0.0; m];
    let mut previous = negative_log_likelihood(psi, y, &theta) / n as f64;
    for epoch in 0..config.epochs {
        let rate = config.learning_rate / (1.0 + config.decay * epoch as f64);
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch) {
            step.iter_mut().for_each(|s| *s = 0.0);
            for &k in chunk {
                let row = psi.row(k);
                let p = logistic(linear(row.iter().copied(), &theta));
                for (s, x) in step.iter_mut().zip(row.iter()) {
                    *s += (y[k] - p) * x;
                }
            }
            let scale = rate / chunk.len() as f64;
            for (t, s) in theta.iter_mut().zip(&step) {
                *t += scale * s;
            }
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Diverged(epoch));
        }
        let current = negative_log_likelihood(psi, y, &theta) / n as f64;
        let gain = previous - current;
        if (0.0..config.tolerance).contains(&gain) {
            break;
        }
        previous = current;
    }
    Ok(theta)
}

/// Point-biserial correlation between a continuous `x` and labels `y`,
/// using the population standard deviation of `x`. A constant `x` carries
/// no association and yields 0.
pub fn biserial_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidData(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    check_labels(y)?;
    let n = x.len() as f64;
    // Shifting by a sample keeps a constant x exactly constant at zero.
    let shift = x.first().copied().unwrap_or(0.0);
    let x: Vec<f64> = x.iter().map(|v| v - shift).collect();
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0usize, 0.0, 0usize);
    for (&xi, &yi) in x.iter().zip(y) {
        if yi == 1.0 {
            s1 += xi;
            n1 += 1;
        } else {
            s0 += xi;
            n0 += 1;
        }
    }
    if n1 == 0 || n0 == 0 {
        return Err(Error::DegenerateClasses);
    }
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd == 0.0 {
        return Ok(0.0);
    }
    let r = (s1 / n1 as f64 - s0 / n0 as f64) / sd * ((n1 * n0) as f64 / (n * n)).sqrt();
    Ok(r.clamp(-1.0, 1.0))
}

/// Fraction of samples whose thresholded probability equals the label.
pub fn accuracy(p_hat: &[f64], y: &[f64], threshold: f64) -> f64 {
    assert_eq!(p_hat.len(), y.len());
    if y.is_empty() {
        return 0.0;
    }
    let hits = p_hat.iter().zip(y).filter(|(&p, &l)| (p >= threshold) == (l == 1.0)).count();
    hits as f64 / y.len() as f64
}

/// Wald test of each coefficient, with standard errors from the diagonal of
/// the inverse observed information `(Psi' W Psi)^-1`, `W = diag(p (1 - p))`.
pub fn wald_test(psi: &DMatrix<f64>, theta: &[f64], alpha: f64) -> Result<SignificanceReport> {
    let (n, m) = psi.shape();
    if n <= m {
        return Err(Error::SingularModel);
    }
    let p = predict(psi, theta);
    let weighted = DMatrix::from_fn(n, m, |r, c| psi[(r, c)] * (p[r] * (1.0 - p[r])).sqrt());
    let info = LsFit::new(&weighted, &vec![0.0; n])?;
    let se: Vec<f64> = info.gram_inv_diag.iter().map(|v| v.sqrt()).collect();
    Ok(t_test(theta, &se, alpha, n - m))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierDiagnostics {
    pub biserial: f64,
    pub train_accuracy: f64,
    pub penalty: f64,
    pub fitness: f64,
    pub n_redundant: usize,
    pub model_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub mask: Mask,
    pub theta: Vec<f64>,
    pub fitness: f64,
    pub diagnostics: ClassifierDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub dictionary: DictionaryConfig,
    pub alpha: f64,
    pub swarm: SwarmConfig,
    pub sgd: SgdConfig,
    /// Leading fraction of the lag window used for training; the rest is held out.
    pub train_fraction: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            dictionary: DictionaryConfig::exogenous(vec![4], 3),
            alpha: 0.05,
            swarm: SwarmConfig { n_agents: 15, max_iter: 50, ..SwarmConfig::default() },
            sgd: SgdConfig::default(),
            train_fraction: 0.8,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        self.dictionary.validate()?;
        self.swarm.validate()?;
        self.sgd.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig("alpha must lie in (0, 1)".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::InvalidConfig("train fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Scores classifier masks on a fixed training window.
#[derive(Clone, Debug)]
pub struct ClassificationProblem {
    matrix: TermMatrix,
    penalties: PenaltyCurve,
    alpha: f64,
    sgd: SgdConfig,
}

impl ClassificationProblem {
    pub fn new(matrix: TermMatrix, n_vars: usize, alpha: f64, sgd: SgdConfig) -> Result<Self> {
        check_labels(matrix.target())?;
        let t = matrix.target();
        if !(t.contains(&0.0) && t.contains(&1.0)) {
            return Err(Error::DegenerateClasses);
        }
        sgd.validate()?;
        Ok(Self { matrix, penalties: PenaltyCurve::new(n_vars), alpha, sgd })
    }

    pub fn matrix(&self) -> &TermMatrix {
        &self.matrix
    }

    fn prune(&self, mask: &Mask) -> Result<(Mask, Vec<f64>, usize)> {
        let psi = self.matrix.select(mask)?;
        let y = self.matrix.target();
        let theta = sgd_fit(&psi, y, &self.sgd)?;
        let report = wald_test(&psi, &theta, self.alpha)?;
        let n_redundant = report.n_insignificant();
        if n_redundant == 0 {
            return Ok((mask.clone(), theta, 0));
        }
        let kept: Vec<usize> = mask.ones().zip(&report.reject_null).filter(|(_, &r)| r).map(|(j, _)| j).collect();
        if kept.is_empty() {
            return Err(Error::EmptyModel);
        }
        let pruned = Mask::from_indices(mask.len(), &kept);
        let theta = sgd_fit(&self.matrix.select(&pruned)?, y, &self.sgd)?;
        Ok((pruned, theta, n_redundant))
    }

    /// Fit, test, prune, refit and score `mask`.
    pub fn evaluate(&self, mask: &Mask) -> Result<ClassifierModel> {
        if mask.len() != self.penalties.n_vars() {
            return Err(Error::InvalidConfig("mask length does not match dictionary".into()));
        }
        let model_size = mask.count();
        if model_size == 0 {
            return Err(Error::EmptyModel);
        }
        let (pruned, theta, n_redundant) = self.prune(mask)?;
        let p = predict(&self.matrix.select(&pruned)?, &theta);
        let y = self.matrix.target();
        let biserial = biserial_correlation(&p, y)?;
        let penalty = self.penalties.get(model_size);
        let fitness = (1.0 - biserial) * penalty;
        let diagnostics = ClassifierDiagnostics {
            biserial,
            train_accuracy: accuracy(&p, y, 0.5),
            penalty,
            fitness,
            n_redundant,
            model_size,
        };
        Ok(ClassifierModel { mask: pruned, theta, fitness, diagnostics })
    }

    /// Swarm callback with the same conventions as the regression search.
    pub fn outcome(&self, mask: &Mask) -> Outcome {
        match self.evaluate(mask) {
            Ok(model) if model.diagnostics.n_redundant > 0 => self.outcome(&model.mask),
            Ok(model) => Outcome::Scored { fitness: model.fitness, position: model.mask },
            Err(Error::EmptyModel) => Outcome::Empty,
            Err(_) => Outcome::Scored { fitness: INFEASIBLE, position: mask.clone() },
        }
    }
}

/// Splits the lag window of `dict` over `dataset` into a leading training
/// part and a trailing held-out part.
pub fn split_matrix(dataset: &Dataset, dict: &Dictionary, train_fraction: f64) -> Result<(TermMatrix, TermMatrix)> {
    let tm = TermMatrix::new(dataset, dict)?;
    let rows = tm.rows();
    let n_train = ((rows as f64) * train_fraction).round() as usize;
    if n_train == 0 {
        return Err(Error::InvalidData("training window is empty".into()));
    }
    Ok((tm.slice_rows(0, n_train), tm.slice_rows(n_train, rows)))
}

/// Scores one classifier mask on the whole lag window of `dataset`.
pub fn evaluate_classifier_candidate(
    mask: &Mask,
    dict: &Dictionary,
    dataset: &Dataset,
    alpha: f64,
    sgd: &SgdConfig,
) -> Result<ClassifierModel> {
    dataset.check_binary_output()?;
    let tm = TermMatrix::new(dataset, dict)?;
    ClassificationProblem::new(tm, dict.len(), alpha, sgd.clone())?.evaluate(mask)
}

/// Runs the structure search on the training window and reports accuracy
/// on the held-out window.
pub fn run_meta_mss_classifier(dataset: &Dataset, config: &ClassifierConfig) -> Result<(ClassifierModel, RunReport)> {
    config.validate()?;
    dataset.check_binary_output()?;
    let started = Instant::now();
    let dict = Dictionary::build(&config.dictionary)?;
    let (train, test) = split_matrix(dataset, &dict, config.train_fraction)?;
    let problem = ClassificationProblem::new(train, dict.len(), config.alpha, config.sgd.clone())?;
    let mut swarm = init_population(dict.len(), &config.swarm)?;
    swarm.run(&|m: &Mask| problem.outcome(m))?;
    let best = swarm.gbest.clone().ok_or_else(|| Error::Aborted("no agent was ever scored".into()))?;
    if best.fitness >= INFEASIBLE {
        return Err(Error::Aborted("no feasible model found".into()));
    }
    let model = problem.evaluate(&best.position)?;

    let test_accuracy = if test.rows() > 0 {
        accuracy(&predict(&test.select(&model.mask)?, &model.theta), test.target(), 0.5)
    } else {
        f64::NAN
    };
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    let report = RunReport {
        schema: SCHEMA_VERSION,
        method: "meta-mss-classifier".into(),
        structure: dict.decode(&model.mask).iter().map(|t| t.to_string()).collect(),
        theta: model.theta.clone(),
        fitness: model.fitness,
        rrse: 1.0 - model.diagnostics.biserial,
        penalty: model.diagnostics.penalty,
        n_redundant: model.diagnostics.n_redundant,
        trace: swarm.trace.clone(),
        convergence_iteration: best.iteration,
        elapsed_ms,
        seed: config.swarm.seed,
        err: None,
        classification: Some(ClassificationSummary {
            biserial: model.diagnostics.biserial,
            train_accuracy: model.diagnostics.train_accuracy,
            test_accuracy,
            train_samples: problem.matrix().rows(),
            test_samples: test.rows(),
        }),
    };
    Ok((model, report))
}

/// Labels `y_k = 1` when `4 x(k-1) - 3 x(k-2)^2 > 0`, with `x ~ U(-1, 1)`.
pub fn synthetic_classification(n_samples: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let law = Uniform::new_inclusive(-1.0, 1.0).expect("valid bounds");
    let x: Vec<f64> = (0..n_samples).map(|_| rng.sample(law)).collect();
    let y = (0..n_samples)
        .map(|k| if k >= 2 && 4.0 * x[k - 1] - 3.0 * x[k - 2] * x[k - 2] > 0.0 { 1.0 } else { 0.0 })
        .collect();
    Dataset::new(vec![x], y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_examples() {
        assert_eq!(predict_probability(&[0.0], &[3.0]), 0.5);
        assert!((predict_probability(&[1.0], &[3f64.ln()]) - 0.75).abs() < 1e-15);
        assert_eq!(predict_probability(&[1.0], &[1e6]), 1.0 - PROB_CLIP);
        assert!(predict_probability(&[1.0], &[5.0]) < predict_probability(&[1.0], &[6.0]));
    }

    #[test]
    fn labels_must_be_binary() {
        let psi = DMatrix::from_element(3, 1, 1.0);
        assert_eq!(sgd_fit(&psi, &[0.0, 1.0, 0.5], &SgdConfig::default()), Err(Error::InvalidLabels(0.5)));
    }

    #[test]
    fn separable_sign_feature() {
        let x: Vec<f64> = (0..40).map(|k| if k % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        let psi = DMatrix::from_column_slice(40, 1, &x);
        let theta = sgd_fit(&psi, &y, &SgdConfig::default()).unwrap();
        assert_eq!(accuracy(&predict(&psi, &theta), &y, 0.5), 1.0);
    }

    #[test]
    fn intercept_converges_to_base_rate_logit() {
        let y: Vec<f64> = (0..1000).map(|k| if k % 10 < 7 { 1.0 } else { 0.0 }).collect();
        let psi = DMatrix::from_element(1000, 1, 1.0);
        let theta = sgd_fit(&psi, &y, &SgdConfig::default()).unwrap();
        assert!((theta[0] - (0.7f64 / 0.3).ln()).abs() < 0.05, "theta = {}", theta[0]);
    }

    #[test]
    fn biserial_examples() {
        let y = [0.0, 1.0, 0.0, 1.0];
        assert!((biserial_correlation(&y, &y).unwrap() - 1.0).abs() < 1e-15);
        let flipped: Vec<f64> = y.iter().map(|v| 1.0 - v).collect();
        assert!((biserial_correlation(&flipped, &y).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(biserial_correlation(&[1.0, 2.0], &[1.0, 1.0]), Err(Error::DegenerateClasses));
        assert_eq!(biserial_correlation(&[0.3, 0.3], &[0.0, 1.0]).unwrap(), 0.0);
        // A mean that rounds away from the common value must not leak a
        // spurious correlation.
        let y: Vec<f64> = (0..401).map(|k| (k % 3 == 0) as u8 as f64).collect();
        assert_eq!(biserial_correlation(&[0.37; 401], &y).unwrap(), 0.0);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1.0, 0.0], &[1.0, 0.0], 0.5), 1.0);
        assert_eq!(accuracy(&[0.5 - 1e-9; 3], &[1.0; 3], 0.5), 0.0);
        let p = [0.9, 0.8, 0.1, 0.2, 0.7, 0.3, 0.6, 0.4, 0.4, 0.6];
        let y = [1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        assert!((accuracy(&p, &y, 0.5) - 0.7).abs() < 1e-15);
    }
}
