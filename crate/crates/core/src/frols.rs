//! Forward regression orthogonal least squares with the error reduction
//! ratio, the classical greedy structure selector.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dictionary::{Dictionary, DictionaryConfig, Mask, RegressorTerm, TermMatrix};
use crate::error::{Error, Result};
use crate::estimation::{rrse, simulate, CandidateModel, Diagnostics, LsFit, INFEASIBLE};
use crate::report::RunReport;

/// Candidates whose orthogonalized squared norm falls below this fraction
/// of their original squared norm are treated as collinear and skipped.
pub const COLLINEAR_TOL: f64 = 1e-10;

/// Selection stops once the explained fraction of output energy reaches
/// `1 - EXHAUSTED_TOL`.
const EXHAUSTED_TOL: f64 = 1e-12;

/// Squared cosine `(x'y)^2 / (x'x y'y)` between two non-zero vectors.
pub fn err_coefficient(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidData(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    let xx = dot(x, x);
    let yy = dot(y, y);
    if xx == 0.0 || yy == 0.0 {
        return Err(Error::InvalidData("energy coefficient of a zero vector".into()));
    }
    let xy = dot(x, y);
    Ok((xy * xy / (xx * yy)).clamp(0.0, 1.0))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn subtract_projection(v: &mut [f64], w: &[f64], ww: f64) {
    let c = dot(w, v) / ww;
    for (vi, wi) in v.iter_mut().zip(w) {
        *vi -= c * wi;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrolsStop {
    /// Stop before the first term that raises `n ln(RSS/n) + 2m`.
    Aic,
    /// Select exactly this many terms (fewer if candidates run out).
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrolsReport {
    /// Dictionary indices in selection order.
    pub selected: Vec<usize>,
    pub terms: Vec<RegressorTerm>,
    /// Error reduction ratio of each selected term at its selection step.
    pub err: Vec<f64>,
    /// Least-squares parameters of the selected terms, in selection order.
    pub theta: Vec<f64>,
    /// AIC after 0, 1, 2, ... selected terms, including a rejected final step.
    pub criterion: Vec<f64>,
}

impl FrolsReport {
    pub fn mask(&self, n_vars: usize) -> Mask {
        Mask::from_indices(n_vars, &self.selected)
    }
}

fn aic(n: usize, rss: f64, m: usize) -> f64 {
    let n = n as f64;
    n * (rss.max(f64::MIN_POSITIVE) / n).ln() + 2.0 * m as f64
}

/// Greedy ERR selection over the columns of `tm`.
pub fn frols_on(tm: &TermMatrix, n_vars: usize, stop: FrolsStop) -> Result<FrolsReport> {
    let y = tm.target();
    let n = tm.rows();
    let yy = dot(y, y);
    if yy == 0.0 {
        return Err(Error::DegenerateTarget);
    }
    let budget = match stop {
        FrolsStop::Aic => n_vars.min(n.saturating_sub(1)),
        FrolsStop::Fixed(k) => {
            if k == 0 {
                return Err(Error::InvalidConfig("FROLS term budget must be at least 1".into()));
            }
            k.min(n_vars).min(n.saturating_sub(1))
        }
    };

    let norms: Vec<f64> = (0..n_vars).map(|j| dot(tm.column(j), tm.column(j))).collect();
    let mut q: Vec<Option<Vec<f64>>> =
        (0..n_vars).map(|j| (norms[j] > 0.0).then(|| tm.column(j).to_vec())).collect();
    let mut basis: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut selected = Vec::new();
    let mut err = Vec::new();
    let mut criterion = vec![aic(n, yy, 0)];
    let mut explained = 0.0;

    while selected.len() < budget && explained < 1.0 - EXHAUSTED_TOL {
        let mut best: Option<(usize, f64)> = None;
        for (j, cand) in q.iter_mut().enumerate() {
            let Some(w) = cand else { continue };
            let ww = dot(w, w);
            if ww < COLLINEAR_TOL * norms[j] {
                *cand = None;
                continue;
            }
            let g = dot(w, y);
            let e = g * g / (ww * yy);
            if best.is_none_or(|(_, b)| e > b) {
                best = Some((j, e));
            }
        }
        let Some((j, e)) = best else { break };

        let mut w = q[j].take().expect("candidate present");
        for (b, bb) in &basis {
            subtract_projection(&mut w, b, *bb);
        }
        let ww = dot(&w, &w);
        let rss = yy * (1.0 - explained - e).max(0.0);
        let value = aic(n, rss, selected.len() + 1);
        criterion.push(value);
        if stop == FrolsStop::Aic && value > criterion[criterion.len() - 2] {
            break;
        }

        explained += e;
        selected.push(j);
        err.push(e.clamp(0.0, 1.0));
        for cand in q.iter_mut().flatten() {
            subtract_projection(cand, &w, ww);
        }
        basis.push((w, ww));
    }

    if selected.is_empty() {
        return Err(Error::EmptyModel);
    }
    let theta = LsFit::new(&tm.select_indices(&selected), y)?.theta;
    Ok(FrolsReport { selected, terms: Vec::new(), err, theta, criterion })
}

/// Runs FROLS over the dictionary built from `config`.
pub fn frols_select(dict: &Dictionary, dataset: &Dataset, stop: FrolsStop) -> Result<FrolsReport> {
    let tm = TermMatrix::new(dataset, dict)?;
    let mut report = frols_on(&tm, dict.len(), stop)?;
    report.terms = report.selected.iter().map(|&j| dict.terms()[j].clone()).collect();
    Ok(report)
}

/// FROLS end to end, with the selected model scored by its free-run RRSE.
///
/// The report's `fitness` equals `rrse` (no complexity penalty, `penalty`
/// is 1), `trace` holds the AIC sequence, and a simulation that diverges
/// is reported with RRSE `f64::MAX`.
pub fn run_frols(
    dataset: &Dataset,
    config: &DictionaryConfig,
    stop: FrolsStop,
    seed: u64,
) -> Result<(FrolsReport, RunReport)> {
    let started = Instant::now();
    let dict = Dictionary::build(config)?;
    let tm = TermMatrix::new(dataset, &dict)?;
    let mut fr = frols_on(&tm, dict.len(), stop)?;
    fr.terms = fr.selected.iter().map(|&j| dict.terms()[j].clone()).collect();

    let y_hat = simulate(&fr.terms, &fr.theta, dataset, tm.start());
    let score = match y_hat {
        Ok(y_hat) => rrse(tm.target(), &y_hat[tm.start()..])?,
        Err(Error::Diverged(_)) => INFEASIBLE,
        Err(e) => return Err(e),
    };
    let model = CandidateModel {
        mask: fr.mask(dict.len()),
        theta: fr.theta.clone(),
        diagnostics: Diagnostics {
            rrse: score,
            penalty: 1.0,
            fitness: score,
            n_redundant: 0,
            model_size: fr.selected.len(),
        },
    };
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    let mut report = RunReport::regression("frols", &dict, &model, fr.criterion.clone(), fr.selected.len(), elapsed_ms, seed);
    // Keep selection order rather than dictionary order.
    report.structure = fr.terms.iter().map(|t| t.to_string()).collect();
    report.err = Some(fr.err.clone());
    Ok((fr, report))
}
