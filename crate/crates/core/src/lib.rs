//! Polynomial NARX model structure selection.
//!
//! The crate builds candidate regressor dictionaries, searches them with a
//! binary hybrid PSO/GSA swarm scored by free-run error and a size penalty
//! ([`metamss`]), offers an orthogonal-least-squares baseline ([`frols`]),
//! a logistic variant for binary outputs ([`logistic`]) and a Monte-Carlo
//! harness over six simulated systems ([`bench`]).

pub mod bench;
pub mod data;
pub mod dictionary;
pub mod error;
pub mod estimation;
pub mod frols;
pub mod logistic;
pub mod metamss;
pub mod report;
pub mod stats;
pub mod swarm;
pub mod systems;

pub use data::{CsvOptions, Dataset};
pub use dictionary::{Dictionary, DictionaryConfig, Mask, RegressorTerm, Signal};
pub use error::{Error, Result};
pub use estimation::CandidateModel;
pub use frols::{run_frols, FrolsStop};
pub use logistic::{run_meta_mss_classifier, ClassifierConfig};
pub use metamss::{run_meta_mss, MetaMssConfig};
pub use report::RunReport;
pub use swarm::SwarmConfig;
pub use systems::SystemId;
