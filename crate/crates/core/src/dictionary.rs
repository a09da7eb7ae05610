//! Candidate regressor dictionary for polynomial MISO NARX models.
//!
//! A dictionary holds every monomial of total degree `0..=degree` over the
//! lagged output `y(k-1..=ny)` and the lagged inputs `xi(k-d..=k-d-nx_i+1)`.
//! Terms are ordered degree-major, then lexicographically on the expanded
//! `(signal, lag)` sequence, so a binary mask over the dictionary is stable
//! across runs and machines.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Signal a factor reads from. `Output` sorts before every input channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Signal {
    Output,
    /// Zero-based input channel; printed one-based (`x1`, `x2`, ...).
    Input(usize),
}

/// One lagged variable raised to a positive power.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Factor {
    pub signal: Signal,
    pub lag: usize,
    pub exponent: u32,
}

/// A monomial of lagged signals. The empty factor list is the constant term.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegressorTerm {
    factors: Vec<Factor>,
}

impl RegressorTerm {
    pub fn constant() -> Self {
        Self { factors: Vec::new() }
    }

    /// Builds a term from `(signal, lag, exponent)` triples, merging repeated
    /// `(signal, lag)` pairs into a single factor and sorting canonically.
    pub fn new<I>(factors: I) -> Self
    where
        I: IntoIterator<Item = (Signal, usize, u32)>,
    {
        let mut merged: Vec<Factor> = Vec::new();
        let mut raw: Vec<(Signal, usize, u32)> = factors.into_iter().filter(|f| f.2 > 0).collect();
        raw.sort_by_key(|&(s, l, _)| (s, l));
        for (signal, lag, exponent) in raw {
            match merged.last_mut() {
                Some(last) if last.signal == signal && last.lag == lag => last.exponent += exponent,
                _ => merged.push(Factor { signal, lag, exponent }),
            }
        }
        Self { factors: merged }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn is_constant(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|f| f.exponent).sum()
    }

    pub fn max_lag(&self) -> usize {
        self.factors.iter().map(|f| f.lag).max().unwrap_or(0)
    }

    /// Evaluates the term at sample `k` against the given output history and
    /// input channels. The caller guarantees `k >= max_lag()`.
    #[inline]
    pub fn eval(&self, k: usize, output: &[f64], inputs: &[Vec<f64>]) -> f64 {
        let mut value = 1.0;
        for f in &self.factors {
            let base = match f.signal {
                Signal::Output => output[k - f.lag],
                Signal::Input(i) => inputs[i][k - f.lag],
            };
            value *= base.powi(f.exponent as i32);
        }
        value
    }

    pub fn uses_output(&self) -> bool {
        self.factors.iter().any(|f| f.signal == Signal::Output)
    }
}

impl fmt::Display for RegressorTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "constant");
        }
        for (i, factor) in self.factors.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            match factor.signal {
                Signal::Output => write!(f, "y(k-{})", factor.lag)?,
                Signal::Input(ch) => write!(f, "x{}(k-{})", ch + 1, factor.lag)?,
            }
            if factor.exponent > 1 {
                write!(f, "^{}", factor.exponent)?;
            }
        }
        Ok(())
    }
}

impl FromStr for RegressorTerm {
    type Err = Error;

    /// Parses the printed form, e.g. `y(k-2)*x1(k-1)^2` or `constant`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "constant" || s == "1" {
            return Ok(Self::constant());
        }
        let bad = || Error::InvalidConfig(format!("cannot parse regressor term `{s}`"));
        let mut factors = Vec::new();
        for part in s.split('*') {
            let part = part.trim();
            let (var, exponent) = match part.split_once('^') {
                Some((v, e)) => (v, e.trim().parse::<u32>().map_err(|_| bad())?),
                None => (part, 1),
            };
            let open = var.find("(k-").ok_or_else(bad)?;
            let name = &var[..open];
            let lag: usize = var[open + 3..]
                .strip_suffix(')')
                .ok_or_else(bad)?
                .parse()
                .map_err(|_| bad())?;
            let signal = if name == "y" {
                Signal::Output
            } else if let Some(idx) = name.strip_prefix('x').or_else(|| name.strip_prefix('u')) {
                let idx: usize = if idx.is_empty() { 1 } else { idx.parse().map_err(|_| bad())? };
                if idx == 0 {
                    return Err(bad());
                }
                Signal::Input(idx - 1)
            } else {
                return Err(bad());
            };
            if lag == 0 || exponent == 0 {
                return Err(bad());
            }
            factors.push((signal, lag, exponent));
        }
        Ok(Self::new(factors))
    }
}

/// Lag and degree configuration of a MISO dictionary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionaryConfig {
    /// Maximum output lag.
    pub ny: usize,
    /// Number of lags per input channel.
    pub nx: Vec<usize>,
    /// Nonlinearity degree.
    pub degree: usize,
    /// Input delay; input lags run from `delay` to `delay + nx_i - 1`.
    pub delay: usize,
    /// Whether lagged outputs enter the dictionary. When false `ny` is ignored.
    pub autoregressive: bool,
}

impl DictionaryConfig {
    pub fn new(ny: usize, nx: Vec<usize>, degree: usize) -> Self {
        Self { ny, nx, degree, delay: 1, autoregressive: true }
    }

    /// Input-only dictionary (no lagged outputs).
    pub fn exogenous(nx: Vec<usize>, degree: usize) -> Self {
        Self { ny: 0, nx, degree, delay: 1, autoregressive: false }
    }

    pub fn with_delay(mut self, delay: usize) -> Self {
        self.delay = delay;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree == 0 {
            return Err(Error::InvalidConfig("nonlinearity degree must be at least 1".into()));
        }
        if self.delay == 0 {
            return Err(Error::InvalidConfig("input delay must be at least 1".into()));
        }
        if self.autoregressive && self.ny == 0 {
            return Err(Error::InvalidConfig("output lag ny must be at least 1".into()));
        }
        if self.n_variables() == 0 {
            return Err(Error::InvalidConfig("no lagged variables: all lags are zero".into()));
        }
        Ok(())
    }

    fn output_lags(&self) -> usize {
        if self.autoregressive {
            self.ny
        } else {
            0
        }
    }

    /// Number of distinct lagged variables.
    pub fn n_variables(&self) -> usize {
        self.output_lags() + self.nx.iter().sum::<usize>()
    }

    /// Lagged variables in canonical order: outputs first, then each input channel.
    fn variables(&self) -> Vec<(Signal, usize)> {
        let mut vars: Vec<(Signal, usize)> = (1..=self.output_lags()).map(|l| (Signal::Output, l)).collect();
        for (ch, &n) in self.nx.iter().enumerate() {
            vars.extend((0..n).map(|j| (Signal::Input(ch), self.delay + j)));
        }
        vars
    }

    /// Largest lag appearing in any dictionary term.
    pub fn max_lag(&self) -> usize {
        let out = self.output_lags();
        let inp = self.nx.iter().filter(|&&n| n > 0).map(|&n| self.delay + n - 1).max().unwrap_or(0);
        out.max(inp)
    }
}

/// Number of dictionary terms from the degree recursion
/// `n_0 = 1`, `n_j = n_{j-1} (n + j - 1) / j`, summed over `j = 0..=degree`.
pub fn count_terms(config: &DictionaryConfig) -> Result<usize> {
    config.validate()?;
    let n = config.n_variables() as u128;
    let mut n_j: u128 = 1;
    let mut total: u128 = 1;
    for j in 1..=config.degree as u128 {
        n_j = n_j * (n + j - 1) / j;
        total += n_j;
    }
    usize::try_from(total).map_err(|_| Error::InvalidConfig("dictionary too large".into()))
}

/// Number of distinct model structures over a dictionary of `n_terms` terms, `2^n_terms`.
pub fn search_space_size(n_terms: usize) -> BigUint {
    BigUint::from(1u8) << n_terms
}

/// The ordered candidate set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    config: DictionaryConfig,
    terms: Vec<RegressorTerm>,
}

impl Dictionary {
    pub fn build(config: &DictionaryConfig) -> Result<Self> {
        config.validate()?;
        let vars = config.variables();
        let mut terms = vec![RegressorTerm::constant()];
        let mut combo: Vec<usize> = Vec::with_capacity(config.degree);
        for degree in 1..=config.degree {
            combo.clear();
            push_combinations(&vars, degree, 0, &mut combo, &mut terms);
        }
        Ok(Self { config: config.clone(), terms })
    }

    pub fn config(&self) -> &DictionaryConfig {
        &self.config
    }

    pub fn terms(&self) -> &[RegressorTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_lag(&self) -> usize {
        self.config.max_lag()
    }

    pub fn index_of(&self, term: &RegressorTerm) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    /// Mask selecting exactly the given terms. Fails if a term is not in the dictionary.
    pub fn mask_for(&self, terms: &[RegressorTerm]) -> Result<Mask> {
        let mut mask = Mask::zeros(self.len());
        for t in terms {
            let idx = self
                .index_of(t)
                .ok_or_else(|| Error::InvalidConfig(format!("term `{t}` is not in the dictionary")))?;
            mask.set(idx, true);
        }
        Ok(mask)
    }

    pub fn decode(&self, mask: &Mask) -> Vec<RegressorTerm> {
        mask.ones().map(|i| self.terms[i].clone()).collect()
    }
}

fn push_combinations(
    vars: &[(Signal, usize)],
    remaining: usize,
    start: usize,
    combo: &mut Vec<usize>,
    out: &mut Vec<RegressorTerm>,
) {
    if remaining == 0 {
        out.push(RegressorTerm::new(combo.iter().map(|&v| (vars[v].0, vars[v].1, 1))));
        return;
    }
    for v in start..vars.len() {
        combo.push(v);
        push_combinations(vars, remaining - 1, v, combo, out);
        combo.pop();
    }
}

/// Binary inclusion vector over a dictionary.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mask(Vec<bool>);

impl Mask {
    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn ones_of(len: usize) -> Self {
        Self(vec![true; len])
    }

    pub fn from_indices(len: usize, indices: &[usize]) -> Self {
        let mut m = Self::zeros(len);
        for &i in indices {
            m.0[i] = true;
        }
        m
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.0[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    /// Indices of selected terms, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

impl From<Vec<bool>> for Mask {
    fn from(v: Vec<bool>) -> Self {
        Self(v)
    }
}

/// Every dictionary column evaluated on measured data over the window
/// `k = start..N`, with `start` the dictionary's global maximum lag, plus the
/// matching target slice. Candidate matrices are gathered from here so all
/// candidates of a run share one target vector.
#[derive(Clone, Debug)]
pub struct TermMatrix {
    start: usize,
    rows: usize,
    columns: Vec<Vec<f64>>,
    target: Vec<f64>,
}

impl TermMatrix {
    pub fn new(dataset: &Dataset, dict: &Dictionary) -> Result<Self> {
        dataset.check_inputs(dict.config().nx.len())?;
        let start = dict.max_lag();
        let n = dataset.len();
        if n <= start + 1 {
            return Err(Error::InvalidData(format!(
                "dataset has {n} samples but the dictionary needs more than {} for its lag window",
                start + 1
            )));
        }
        let rows = n - start;
        let output = dataset.output();
        let inputs = dataset.inputs();
        let columns = dict
            .terms()
            .iter()
            .map(|t| (start..n).map(|k| t.eval(k, output, inputs)).collect())
            .collect();
        Ok(Self { start, rows, columns, target: output[start..].to_vec() })
    }

    /// First sample index of the window.
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    /// Regression matrix of the selected columns, in dictionary order.
    pub fn select(&self, mask: &Mask) -> Result<DMatrix<f64>> {
        if mask.len() != self.columns.len() {
            return Err(Error::InvalidConfig(format!(
                "mask length {} does not match dictionary length {}",
                mask.len(),
                self.columns.len()
            )));
        }
        let idx: Vec<usize> = mask.ones().collect();
        if idx.is_empty() {
            return Err(Error::EmptyModel);
        }
        Ok(self.select_indices(&idx))
    }

    pub fn select_indices(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, idx.len(), |r, c| self.columns[idx[c]][r])
    }

    /// Restricts the window to rows `[from, to)` (relative to `start`).
    pub fn slice_rows(&self, from: usize, to: usize) -> Self {
        Self {
            start: self.start + from,
            rows: to - from,
            columns: self.columns.iter().map(|c| c[from..to].to_vec()).collect(),
            target: self.target[from..to].to_vec(),
        }
    }
}

/// Regression matrix for `mask` over the global-lag window of `dict`.
pub fn build_regression_matrix(dataset: &Dataset, dict: &Dictionary, mask: &Mask) -> Result<DMatrix<f64>> {
    if mask.len() != dict.len() {
        return Err(Error::InvalidConfig(format!(
            "mask length {} does not match dictionary length {}",
            mask.len(),
            dict.len()
        )));
    }
    if mask.count() == 0 {
        return Err(Error::EmptyModel);
    }
    TermMatrix::new(dataset, dict)?.select(mask)
}
