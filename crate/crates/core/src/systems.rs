//! The six simulated benchmark systems.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dictionary::{RegressorTerm, Signal};
use crate::error::{Error, Result};

/// Samples discarded at the start of every generated record.
pub const WARM_UP: usize = 100;

/// Seeds tried (`seed`, `seed + 1`, ...) before generation gives up on a
/// non-finite trajectory.
pub const MAX_GENERATION_ATTEMPTS: u64 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SystemId {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
}

impl SystemId {
    pub const ALL: [SystemId; 6] = [SystemId::S1, SystemId::S2, SystemId::S3, SystemId::S4, SystemId::S5, SystemId::S6];
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for SystemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S1" => Ok(SystemId::S1),
            "S2" => Ok(SystemId::S2),
            "S3" => Ok(SystemId::S3),
            "S4" => Ok(SystemId::S4),
            "S5" => Ok(SystemId::S5),
            "S6" => Ok(SystemId::S6),
            other => Err(Error::InvalidConfig(format!("unknown system `{other}` (expected S1..S6)"))),
        }
    }
}

/// Distribution of the excitation signal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InputLaw {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, sd: f64 },
}

/// Noise-only contribution `coef * e(k - e_lag) [* x(k - x_lag)]`, used in
/// generation but never part of the identifiable structure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseTerm {
    pub coef: f64,
    pub e_lag: usize,
    pub x_lag: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedSystem {
    pub id: SystemId,
    /// Process terms with their true coefficients.
    pub terms: Vec<(RegressorTerm, f64)>,
    pub noise_terms: Vec<NoiseTerm>,
    pub input: InputLaw,
    /// Standard deviation of the white equation noise `e_k`.
    pub noise_sd: f64,
}

fn y(lag: usize) -> (Signal, usize, u32) {
    (Signal::Output, lag, 1)
}

fn x(lag: usize) -> (Signal, usize, u32) {
    (Signal::Input(0), lag, 1)
}

fn pow((s, l, _): (Signal, usize, u32), e: u32) -> (Signal, usize, u32) {
    (s, l, e)
}

fn term<const N: usize>(factors: [(Signal, usize, u32); N]) -> RegressorTerm {
    RegressorTerm::new(factors)
}

impl SimulatedSystem {
    pub fn get(id: SystemId) -> Self {
        let uniform = |a: f64| InputLaw::Uniform { low: -a, high: a };
        let normal = |sd: f64| InputLaw::Normal { mean: 0.0, sd };
        let s4_terms = vec![
            (term([y(1), x(1)]), 0.7),
            (term([y(2)]), -0.5),
            (term([pow(x(2), 2)]), 0.6),
            (term([y(2), pow(x(2), 2)]), -0.7),
        ];
        match id {
            SystemId::S1 => Self {
                id,
                terms: vec![(term([y(1)]), -1.7), (term([y(2)]), -0.8), (term([x(1)]), 1.0), (term([x(2)]), 0.81)],
                noise_terms: vec![],
                input: uniform(2.0),
                noise_sd: 0.01,
            },
            SystemId::S2 => Self {
                id,
                terms: vec![
                    (term([y(1)]), 0.8),
                    (term([x(1)]), 0.4),
                    (term([pow(x(1), 2)]), 0.4),
                    (term([pow(x(1), 3)]), 0.4),
                ],
                noise_terms: vec![],
                input: normal(0.3),
                noise_sd: 0.01,
            },
            SystemId::S3 => Self {
                id,
                terms: vec![
                    (term([pow(y(1), 3)]), 0.2),
                    (term([y(1), x(1)]), 0.7),
                    (term([pow(x(2), 2)]), 0.6),
                    (term([y(2), pow(x(2), 2)]), -0.7),
                    (term([y(2)]), -0.5),
                ],
                noise_terms: vec![],
                input: uniform(1.0),
                noise_sd: 0.01,
            },
            SystemId::S4 => Self { id, terms: s4_terms, noise_terms: vec![], input: uniform(1.0), noise_sd: 0.04 },
            SystemId::S5 => Self {
                id,
                terms: s4_terms,
                noise_terms: vec![
                    NoiseTerm { coef: 0.2, e_lag: 1, x_lag: None },
                    NoiseTerm { coef: -0.3, e_lag: 2, x_lag: Some(1) },
                ],
                input: uniform(1.0),
                noise_sd: 0.02,
            },
            SystemId::S6 => Self {
                id,
                terms: vec![(term([y(2)]), 0.75), (term([x(2)]), 0.25), (term([y(2), x(2)]), -0.2)],
                noise_terms: vec![],
                input: normal(0.25),
                noise_sd: 0.02,
            },
        }
    }

    pub fn true_structure(&self) -> Vec<RegressorTerm> {
        self.terms.iter().map(|(t, _)| t.clone()).collect()
    }

    /// Runs the recurrence from zero initial conditions on the given input
    /// and noise sequences. Samples before time zero are taken as zero.
    pub fn simulate(&self, input: &[f64], noise: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), noise.len());
        let n = input.len();
        let inputs = [input.to_vec()];
        let mut out = vec![0.0; n];
        for k in 0..n {
            let mut v = noise[k];
            for (t, coef) in &self.terms {
                if k >= t.max_lag() {
                    v += coef * t.eval(k, &out, &inputs);
                }
            }
            for nt in &self.noise_terms {
                let lag = nt.x_lag.unwrap_or(0).max(nt.e_lag);
                if k >= lag {
                    let mut c = nt.coef * noise[k - nt.e_lag];
                    if let Some(xl) = nt.x_lag {
                        c *= input[k - xl];
                    }
                    v += c;
                }
            }
            out[k] = v;
        }
        out
    }

    fn draw_input(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self.input {
            InputLaw::Uniform { low, high } => {
                let d = Uniform::new_inclusive(low, high).expect("valid bounds");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            InputLaw::Normal { mean, sd } => {
                let d = Normal::new(mean, sd).expect("valid sd");
                (0..n).map(|_| d.sample(rng)).collect()
            }
        }
    }

    /// `n_samples` of input/output data from seeded input and noise draws,
    /// after discarding a warm-up prefix. Input and noise are both redrawn
    /// for every seed.
    pub fn generate(&self, n_samples: usize, seed: u64) -> Result<Dataset> {
        for attempt in 0..MAX_GENERATION_ATTEMPTS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
            let total = n_samples + WARM_UP;
            let input = self.draw_input(total, &mut rng);
            let noise_law = Normal::new(0.0, self.noise_sd).expect("valid sd");
            let noise: Vec<f64> = (0..total).map(|_| noise_law.sample(&mut rng)).collect();
            let output = self.simulate(&input, &noise);
            if output.iter().all(|v| v.is_finite()) {
                return Dataset::new(vec![input[WARM_UP..].to_vec()], output[WARM_UP..].to_vec());
            }
        }
        Err(Error::Aborted(format!("{} trajectory stayed non-finite for {MAX_GENERATION_ATTEMPTS} seeds", self.id)))
    }
}

/// Generates `n_samples` from system `id`.
pub fn generate(id: SystemId, n_samples: usize, seed: u64) -> Result<Dataset> {
    SimulatedSystem::get(id).generate(n_samples, seed)
}
