//! Least-squares estimation, free-run simulation, fit metrics and the
//! t-test machinery used to prune insignificant regressors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dictionary::{Dictionary, Mask, RegressorTerm, TermMatrix};
use crate::error::{Error, Result};
use crate::stats::t_critical;

/// Fitness assigned to infeasible candidates (diverged or singular). Finite so
/// that it serializes and orders like any other fitness value.
pub const INFEASIBLE: f64 = f64::MAX;

/// Free-run outputs whose magnitude exceeds this are treated as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e10;

/// Relative threshold on the diagonal of R below which a column is
/// considered linearly dependent on the previous ones.
const RANK_TOL: f64 = 1e-10;

/// Evaluation diagnostics of a candidate structure.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub rrse: f64,
    pub penalty: f64,
    pub fitness: f64,
    /// Regressors removed by the t-test.
    pub n_redundant: usize,
    /// Retained plus removed regressors; the argument of the penalty.
    pub model_size: usize,
}

/// A structure over the dictionary together with its estimated parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateModel {
    pub mask: Mask,
    pub theta: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl CandidateModel {
    pub fn new(mask: Mask, theta: Vec<f64>) -> Self {
        debug_assert_eq!(mask.count(), theta.len());
        Self { mask, theta, diagnostics: Diagnostics::default() }
    }

    pub fn terms(&self, dict: &Dictionary) -> Vec<RegressorTerm> {
        dict.decode(&self.mask)
    }
}

/// Result of the coefficient significance test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub se: Vec<f64>,
    pub t0: Vec<f64>,
    pub t_crit: f64,
    pub reject_null: Vec<bool>,
}

impl SignificanceReport {
    pub fn n_insignificant(&self) -> usize {
        self.reject_null.iter().filter(|&&r| !r).count()
    }
}

/// QR-based least-squares fit that keeps what the t-test needs.
#[derive(Clone, Debug)]
pub struct LsFit {
    pub theta: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Diagonal of `(Psi^T Psi)^-1`.
    pub gram_inv_diag: Vec<f64>,
}

impl LsFit {
    pub fn new(psi: &DMatrix<f64>, y: &[f64]) -> Result<Self> {
        let (rows, cols) = psi.shape();
        if rows != y.len() {
            return Err(Error::InvalidData(format!("matrix has {rows} rows but target has {}", y.len())));
        }
        if cols == 0 {
            return Err(Error::EmptyModel);
        }
        if rows < cols {
            return Err(Error::SingularModel);
        }
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularModel);
        }
        let qr = psi.clone().qr();
        let r = qr.r();
        let scale = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if scale == 0.0 || (0..cols).any(|i| r[(i, i)].abs() <= RANK_TOL * scale) {
            return Err(Error::SingularModel);
        }
        let yv = DVector::from_column_slice(y);
        let qty = qr.q().transpose() * &yv;
        let theta = r.solve_upper_triangular(&qty).ok_or(Error::SingularModel)?;
        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(cols, cols))
            .ok_or(Error::SingularModel)?;
        let gram_inv_diag = (0..cols).map(|i| r_inv.row(i).norm_squared()).collect();
        let residuals = (yv - psi * &theta).iter().copied().collect();
        Ok(Self { theta: theta.iter().copied().collect(), residuals, gram_inv_diag })
    }

    pub fn residual_variance(&self) -> f64 {
        sum_sq(&self.residuals) / (self.residuals.len() - self.theta.len()) as f64
    }

    pub fn standard_errors(&self) -> Vec<f64> {
        let s2 = self.residual_variance();
        self.gram_inv_diag.iter().map(|v| (s2 * v).sqrt()).collect()
    }

    pub fn dof(&self) -> usize {
        self.residuals.len() - self.theta.len()
    }

    pub fn t_test(&self, alpha: f64) -> SignificanceReport {
        t_test(&self.theta, &self.standard_errors(), alpha, self.dof())
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|e| e * e).sum()
}

/// Least-squares parameters minimizing `||y - Psi theta||`, via Householder QR.
pub fn least_squares(psi: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    Ok(LsFit::new(psi, y)?.theta)
}

/// Unbiased one-step-ahead noise variance `sum(r^2) / (N - m)`.
pub fn residual_variance(psi: &DMatrix<f64>, y: &[f64], theta: &[f64]) -> f64 {
    let (n, m) = psi.shape();
    assert!(n > m, "residual variance needs more rows than parameters");
    let fitted = psi * DVector::from_column_slice(theta);
    let ss: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    ss / (n - m) as f64
}

/// `se_j = sqrt(sigma2 * V_jj)` with `V = (Psi^T Psi)^-1`.
pub fn standard_errors(psi: &DMatrix<f64>, sigma2_e: f64) -> Result<Vec<f64>> {
    let cols = psi.ncols();
    if cols == 0 {
        return Err(Error::EmptyModel);
    }
    let qr = psi.clone().qr();
    let r = qr.r();
    let scale = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if psi.nrows() < cols || scale == 0.0 || (0..cols).any(|i| r[(i, i)].abs() <= RANK_TOL * scale) {
        return Err(Error::SingularModel);
    }
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(cols, cols))
        .ok_or(Error::SingularModel)?;
    Ok((0..cols).map(|i| (sigma2_e * r_inv.row(i).norm_squared()).sqrt()).collect())
}

/// Two-sided t-test of `H0: theta_j = 0` at level `alpha`.
pub fn t_test(theta: &[f64], se: &[f64], alpha: f64, dof: usize) -> SignificanceReport {
    assert_eq!(theta.len(), se.len());
    let t_crit = t_critical(alpha, dof.max(1));
    let t0: Vec<f64> = theta
        .iter()
        .zip(se)
        .map(|(&th, &s)| {
            if s > 0.0 {
                th / s
            } else if th == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(th)
            }
        })
        .collect();
    let reject_null = t0.iter().map(|t| t.abs() >= t_crit).collect();
    SignificanceReport { se: se.to_vec(), t0, t_crit, reject_null }
}

/// Free-run simulation of `sum_j theta_j term_j` over the whole dataset.
/// The first `start` samples are copied from the measured output; later
/// samples feed back simulated outputs and use measured inputs.
pub fn simulate(terms: &[RegressorTerm], theta: &[f64], dataset: &Dataset, start: usize) -> Result<Vec<f64>> {
    let n = dataset.len();
    let inputs = dataset.inputs();
    let mut y_hat = Vec::with_capacity(n);
    y_hat.extend_from_slice(&dataset.output()[..start.min(n)]);
    y_hat.resize(n, 0.0);
    for k in start..n {
        let v: f64 = terms.iter().zip(theta).map(|(t, th)| th * t.eval(k, &y_hat, inputs)).sum();
        if !v.is_finite() || v.abs() > DIVERGENCE_BOUND {
            return Err(Error::Diverged(k));
        }
        y_hat[k] = v;
    }
    Ok(y_hat)
}

/// Free-run simulation of an estimated candidate, seeded with the first
/// `dict.max_lag()` measured outputs.
pub fn free_run_simulation(model: &CandidateModel, dict: &Dictionary, dataset: &Dataset) -> Result<Vec<f64>> {
    simulate(&model.terms(dict), &model.theta, dataset, dict.max_lag())
}

/// Relative root squared error `sqrt(sum (y - y_hat)^2) / sqrt(sum (y - mean y)^2)`.
pub fn rrse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    assert_eq!(y.len(), y_hat.len(), "rrse needs equal-length series");
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let den: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if den == 0.0 {
        return Err(Error::DegenerateTarget);
    }
    let num: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((num / den).sqrt())
}

/// Root mean squared error.
pub fn rms_error(y: &[f64], y_hat: &[f64]) -> f64 {
    assert_eq!(y.len(), y_hat.len(), "rms error needs equal-length series");
    let ss: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    (ss / y.len() as f64).sqrt()
}

/// Outcome of one significance-pruning pass.
#[derive(Clone, Debug)]
pub struct Pruned {
    pub mask: Mask,
    pub theta: Vec<f64>,
    pub n_redundant: usize,
    pub report: SignificanceReport,
}

/// Fits `mask`, tests every coefficient once, removes all that fail to
/// reject `H0`, and re-estimates on the survivors.
pub fn prune_on(tm: &TermMatrix, mask: &Mask, alpha: f64) -> Result<Pruned> {
    let idx: Vec<usize> = mask.ones().collect();
    if idx.is_empty() {
        return Err(Error::EmptyModel);
    }
    if tm.rows() <= idx.len() {
        return Err(Error::SingularModel);
    }
    let fit = LsFit::new(&tm.select_indices(&idx), tm.target())?;
    let report = fit.t_test(alpha);
    let kept: Vec<usize> = idx.iter().zip(&report.reject_null).filter(|(_, &r)| r).map(|(&i, _)| i).collect();
    if kept.is_empty() {
        return Err(Error::EmptyModel);
    }
    let n_redundant = idx.len() - kept.len();
    let theta = if n_redundant == 0 {
        fit.theta
    } else {
        LsFit::new(&tm.select_indices(&kept), tm.target())?.theta
    };
    Ok(Pruned { mask: Mask::from_indices(mask.len(), &kept), theta, n_redundant, report })
}

/// Removes every regressor of `model` that fails the t-test at `alpha` in one
/// pass and re-estimates. Returns the pruned model and the number removed.
pub fn prune_insignificant(
    model: &CandidateModel,
    dict: &Dictionary,
    dataset: &Dataset,
    alpha: f64,
) -> Result<(CandidateModel, usize)> {
    let tm = TermMatrix::new(dataset, dict)?;
    let p = prune_on(&tm, &model.mask, alpha)?;
    let mut pruned = CandidateModel::new(p.mask, p.theta);
    pruned.diagnostics.n_redundant = p.n_redundant;
    Ok((pruned, p.n_redundant))
}

/// Least-squares estimate of `mask` on the dictionary's global-lag window.
pub fn estimate(mask: &Mask, dict: &Dictionary, dataset: &Dataset) -> Result<CandidateModel> {
    let tm = TermMatrix::new(dataset, dict)?;
    let theta = least_squares(&tm.select(mask)?, tm.target())?;
    Ok(CandidateModel::new(mask.clone(), theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::DictionaryConfig;

    #[test]
    fn identity_system() {
        let psi = DMatrix::<f64>::identity(3, 3);
        let th = least_squares(&psi, &[1.0, 2.0, 3.0]).unwrap();
        for (a, b) in th.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_is_singular() {
        let psi = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]);
        assert_eq!(least_squares(&psi, &[1.0, 2.0, 3.0, 4.0]), Err(Error::SingularModel));
    }

    #[test]
    fn rrse_examples() {
        let y = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(rrse(&y, &y).unwrap(), 0.0);
        assert!((rrse(&y, &[2.5; 4]).unwrap() - 1.0).abs() < 1e-15);
        assert!((rrse(&y, &[1.0, 2.0, 3.0, 5.0]).unwrap() - 1.0 / 5f64.sqrt()).abs() < 1e-12);
        assert_eq!(rrse(&[2.0; 3], &[1.0; 3]), Err(Error::DegenerateTarget));
    }

    #[test]
    fn rms_examples() {
        assert_eq!(rms_error(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(rms_error(&[0.0, 0.0], &[1.0, 1.0]), 1.0);
    }

    #[test]
    fn residual_variance_hand_case() {
        // One column of ones, theta = 0, residuals alternate +-1: 4 / (4 - 1).
        let psi = DMatrix::from_element(4, 1, 1.0);
        let v = residual_variance(&psi, &[1.0, -1.0, 1.0, -1.0], &[0.0]);
        assert!((v - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn standard_errors_simple() {
        let mut psi = DMatrix::<f64>::zeros(4, 3);
        psi.view_mut((0, 0), (3, 3)).fill_with_identity();
        for s in standard_errors(&psi, 4.0).unwrap() {
            assert!((s - 2.0).abs() < 1e-12);
        }
        // Orthogonal columns with squared norm 10.
        let psi = DMatrix::from_row_slice(
            10,
            2,
            &[1., 1., 1., -1., 1., 1., 1., -1., 1., 1., 1., -1., 1., 1., 1., -1., 1., 1., 1., -1.],
        );
        for s in standard_errors(&psi, 1.0).unwrap() {
            assert!((s - 1.0 / 10f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn t_test_cases() {
        let r = t_test(&[0.0, 0.0], &[1.0, 3.0], 0.05, 10);
        assert!(r.reject_null.iter().all(|&b| !b));
        let r = t_test(&[5.0], &[1.0], 0.05, 100);
        assert!(r.reject_null[0]);
        let r = t_test(&[1.0, 0.0], &[0.0, 0.0], 0.05, 10);
        assert_eq!(r.reject_null, vec![true, false]);
    }

    #[test]
    fn pure_input_model_replays_input() {
        let u: Vec<f64> = (0..20).map(|k| (k as f64 * 0.7).sin()).collect();
        let mut y = vec![0.0; 20];
        y[1..].copy_from_slice(&u[..19]);
        let ds = Dataset::new(vec![u.clone()], y).unwrap();
        let dict = Dictionary::build(&DictionaryConfig::new(1, vec![1], 1)).unwrap();
        let mask = dict.mask_for(&["x1(k-1)".parse().unwrap()]).unwrap();
        let model = CandidateModel::new(mask, vec![1.0]);
        let y_hat = free_run_simulation(&model, &dict, &ds).unwrap();
        for k in 1..20 {
            assert_eq!(y_hat[k], u[k - 1]);
        }
    }

    #[test]
    fn unstable_model_diverges() {
        let ds = Dataset::new(vec![vec![0.0; 200]], vec![1.0; 200]).unwrap();
        let dict = Dictionary::build(&DictionaryConfig::new(1, vec![1], 1)).unwrap();
        let mask = dict.mask_for(&["y(k-1)".parse().unwrap()]).unwrap();
        let model = CandidateModel::new(mask, vec![2.0]);
        assert!(matches!(free_run_simulation(&model, &dict, &ds), Err(Error::Diverged(_))));
    }
}
