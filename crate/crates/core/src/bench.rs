//! Monte-Carlo structure-recovery experiments on the simulated systems.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::RegressorTerm;
use crate::error::{Error, Result};
use crate::frols::{run_frols, FrolsStop};
use crate::metamss::{run_meta_mss, MetaMssConfig};
use crate::report::{RunReport, SCHEMA_VERSION};
use crate::systems::{self, SimulatedSystem, SystemId};

/// Samples per generated record.
pub const DEFAULT_SAMPLES: usize = 500;

/// Runs per experiment unless configured otherwise.
pub const DEFAULT_RUNS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMethod {
    MetaMss,
    Frols,
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchMethod::MetaMss => "meta-mss",
            BenchMethod::Frols => "frols",
        })
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "meta-mss" => Ok(BenchMethod::MetaMss),
            "frols" => Ok(BenchMethod::Frols),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}` (expected meta-mss or frols)"))),
        }
    }
}

/// True when both term lists hold the same set of regressors.
pub fn exact_match(selected: &[RegressorTerm], truth: &[RegressorTerm]) -> bool {
    let a: BTreeSet<&RegressorTerm> = selected.iter().collect();
    let b: BTreeSet<&RegressorTerm> = truth.iter().collect();
    a.len() == selected.len() && a == b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemId,
    pub method: BenchMethod,
    pub runs: usize,
    /// Run `i` uses seed `base_seed + i` for data generation and search.
    pub base_seed: u64,
    pub n_samples: usize,
    /// Dictionary, significance level and swarm settings; the swarm seed is
    /// replaced per run.
    pub meta: MetaMssConfig,
    /// FROLS stopping rule; `None` selects as many terms as the true model has.
    pub frols_stop: Option<FrolsStop>,
    /// Run independent seeds on the rayon pool.
    pub parallel: bool,
}

impl ExperimentConfig {
    pub fn new(system: SystemId, method: BenchMethod) -> Self {
        Self {
            system,
            method,
            runs: DEFAULT_RUNS,
            base_seed: 0,
            n_samples: DEFAULT_SAMPLES,
            meta: MetaMssConfig::default(),
            frols_stop: None,
            parallel: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramEntry {
    /// Selected terms sorted by their printed form; empty for failed runs.
    pub structure: Vec<String>,
    pub count: usize,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub system: SystemId,
    pub method: BenchMethod,
    pub runs: usize,
    pub base_seed: u64,
    pub true_structure: Vec<String>,
    pub correct: usize,
    /// `correct / runs`, a fraction in `[0, 1]`.
    pub correct_pct: f64,
    pub mean_elapsed_ms: f64,
    /// Most frequent structures first.
    pub histogram: Vec<HistogramEntry>,
    /// Successful runs in run order.
    pub reports: Vec<RunReport>,
    pub failures: Vec<RunFailure>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    run: usize,
    seed: u64,
    system: String,
    method: String,
    correct: bool,
    n_terms: usize,
    fitness: f64,
    rrse: f64,
    penalty: f64,
    n_redundant: usize,
    convergence_iteration: usize,
    elapsed_ms: f64,
    structure: &'a str,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Zeroes every wall-clock field.
    pub fn strip_timing(&mut self) {
        self.mean_elapsed_ms = 0.0;
        self.reports.iter_mut().for_each(RunReport::strip_timing);
    }

    /// One row per successful run; `structure` joins the terms with ` + `.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let truth: BTreeSet<&str> = self.true_structure.iter().map(String::as_str).collect();
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.reports {
            let joined = r.structure.join(" + ");
            let selected: BTreeSet<&str> = r.structure.iter().map(String::as_str).collect();
            w.serialize(CsvRow {
                run: (r.seed - self.base_seed) as usize,
                seed: r.seed,
                system: self.system.to_string(),
                method: self.method.to_string(),
                correct: selected == truth && selected.len() == r.structure.len(),
                n_terms: r.structure.len(),
                fitness: r.fitness,
                rrse: r.rrse,
                penalty: r.penalty,
                n_redundant: r.n_redundant,
                convergence_iteration: r.convergence_iteration,
                elapsed_ms: r.elapsed_ms,
                structure: &joined,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Generates the data for run `index` and identifies it.
pub fn run_single(config: &ExperimentConfig, index: usize) -> Result<RunReport> {
    let seed = config.base_seed + index as u64;
    let dataset = systems::generate(config.system, config.n_samples, seed)?;
    match config.method {
        BenchMethod::MetaMss => {
            let mut meta = config.meta.clone();
            meta.swarm.seed = seed;
            meta.swarm.parallel = false;
            Ok(run_meta_mss(&dataset, &meta)?.1)
        }
        BenchMethod::Frols => {
            let stop = config
                .frols_stop
                .unwrap_or_else(|| FrolsStop::Fixed(SimulatedSystem::get(config.system).terms.len()));
            Ok(run_frols(&dataset, &config.meta.dictionary, stop, seed)?.1)
        }
    }
}

fn parse_structure(report: &RunReport) -> Result<Vec<RegressorTerm>> {
    report.structure.iter().map(|s| s.parse()).collect()
}

/// Runs `config.runs` independent seeds and aggregates exact-match
/// correctness, timing and the structure histogram.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.runs == 0 {
        return Err(Error::InvalidConfig("runs must be at least 1".into()));
    }
    config.meta.validate()?;
    let truth = SimulatedSystem::get(config.system).true_structure();
    let outcomes: Vec<Result<RunReport>> = if config.parallel {
        (0..config.runs).into_par_iter().map(|i| run_single(config, i)).collect()
    } else {
        (0..config.runs).map(|i| run_single(config, i)).collect()
    };

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let mut counts: BTreeMap<Vec<String>, (usize, bool)> = BTreeMap::new();
    let mut correct = 0;
    for (run, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(report) => {
                let ok = exact_match(&parse_structure(&report)?, &truth);
                correct += ok as usize;
                let mut key = report.structure.clone();
                key.sort();
                counts.entry(key).or_insert((0, ok)).0 += 1;
                reports.push(report);
            }
            Err(e) => {
                counts.entry(Vec::new()).or_insert((0, false)).0 += 1;
                failures.push(RunFailure { run, seed: config.base_seed + run as u64, error: e.to_string() });
            }
        }
    }
    let mut histogram: Vec<HistogramEntry> = counts
        .into_iter()
        .map(|(structure, (count, correct))| HistogramEntry { structure, count, correct })
        .collect();
    histogram.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.structure.cmp(&b.structure)));

    let mean_elapsed_ms = if reports.is_empty() {
        0.0
    } else {
        reports.iter().map(|r| r.elapsed_ms).sum::<f64>() / reports.len() as f64
    };
    Ok(ExperimentReport {
        schema: SCHEMA_VERSION,
        system: config.system,
        method: config.method,
        runs: config.runs,
        base_seed: config.base_seed,
        true_structure: truth.iter().map(|t| t.to_string()).collect(),
        correct,
        correct_pct: correct as f64 / config.runs as f64,
        mean_elapsed_ms,
        histogram,
        reports,
        failures,
    })
}
