//! JSON run reports.

use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::estimation::CandidateModel;

/// Version of the report layout. Bump on any field rename or removal.
pub const SCHEMA_VERSION: u32 = 1;

/// Outcome of one identification run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    /// `meta-mss`, `frols` or `meta-mss-classifier`.
    pub method: String,
    /// Selected terms in printed form, e.g. `y(k-2)*x1(k-1)^2`.
    pub structure: Vec<String>,
    pub theta: Vec<f64>,
    pub fitness: f64,
    pub rrse: f64,
    pub penalty: f64,
    pub n_redundant: usize,
    /// Best fitness after each iteration (criterion value per step for FROLS).
    pub trace: Vec<f64>,
    /// Iteration at which the final best record was set.
    pub convergence_iteration: usize,
    pub elapsed_ms: f64,
    pub seed: u64,
    /// Error reduction ratio of each selected term (FROLS only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub err: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSummary {
    pub biserial: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub train_samples: usize,
    pub test_samples: usize,
}

impl RunReport {
    pub fn regression(
        method: &str,
        dict: &Dictionary,
        model: &CandidateModel,
        trace: Vec<f64>,
        convergence_iteration: usize,
        elapsed_ms: f64,
        seed: u64,
    ) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            method: method.to_string(),
            structure: model.terms(dict).iter().map(|t| t.to_string()).collect(),
            theta: model.theta.clone(),
            fitness: model.diagnostics.fitness,
            rrse: model.diagnostics.rrse,
            penalty: model.diagnostics.penalty,
            n_redundant: model.diagnostics.n_redundant,
            trace,
            convergence_iteration,
            elapsed_ms,
            seed,
            err: None,
            classification: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Zeroes wall-clock fields so reports can be compared byte for byte.
    pub fn strip_timing(&mut self) {
        self.elapsed_ms = 0.0;
    }
}
