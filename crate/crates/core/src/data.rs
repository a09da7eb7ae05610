//! Aligned input/output samples and CSV ingestion.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `r` input channels and one output sequence, all of length `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, output: Vec<f64>) -> Result<Self> {
        let n = output.len();
        if n == 0 {
            return Err(Error::InvalidData("empty output sequence".into()));
        }
        if let Some((i, ch)) = inputs.iter().enumerate().find(|(_, ch)| ch.len() != n) {
            return Err(Error::InvalidData(format!(
                "input channel {} has {} samples, output has {n}",
                i + 1,
                ch.len()
            )));
        }
        if inputs.iter().flatten().chain(&output).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite sample".into()));
        }
        Ok(Self { inputs, output })
    }

    pub fn len(&self) -> usize {
        self.output.len()
    }

    pub fn is_empty(&self) -> bool {
        self.output.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub(crate) fn check_inputs(&self, required: usize) -> Result<()> {
        if self.inputs.len() < required {
            return Err(Error::InvalidData(format!(
                "dictionary uses {required} input channels but the dataset has {}",
                self.inputs.len()
            )));
        }
        Ok(())
    }

    /// Verifies every output sample is exactly 0 or 1.
    pub fn check_binary_output(&self) -> Result<()> {
        match self.output.iter().find(|&&v| v != 0.0 && v != 1.0) {
            Some(&v) => Err(Error::InvalidLabels(v)),
            None => Ok(()),
        }
    }

    pub fn from_csv_path(path: impl AsRef<Path>, options: CsvOptions) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_csv_reader(file, options)
    }

    /// Reads `u1,...,ur,y` rows. The last column is the output. Empty, `NA`
    /// or `NaN` cells are replaced by the mean of the present values in that
    /// column; with `standardize` set, input columns are then centred and
    /// scaled to unit (population) standard deviation.
    pub fn from_csv_reader<R: Read>(reader: R, options: CsvOptions) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let width = rdr.headers()?.len();
        if width == 0 {
            return Err(Error::InvalidData("CSV header has no columns".into()));
        }
        let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); width];
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != width {
                return Err(Error::InvalidData(format!(
                    "row {} has {} cells, header has {width}",
                    line + 2,
                    record.len()
                )));
            }
            for (col, cell) in record.iter().enumerate() {
                let value = if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                    None
                } else {
                    let v: f64 = cell.parse().map_err(|_| {
                        Error::InvalidData(format!("row {}, column {}: `{cell}` is not a number", line + 2, col + 1))
                    })?;
                    if !v.is_finite() {
                        return Err(Error::InvalidData(format!("row {}, column {}: non-finite value", line + 2, col + 1)));
                    }
                    Some(v)
                };
                columns[col].push(value);
            }
        }
        let mut filled: Vec<Vec<f64>> = Vec::with_capacity(width);
        for (col, values) in columns.into_iter().enumerate() {
            let present: Vec<f64> = values.iter().flatten().copied().collect();
            if present.is_empty() {
                return Err(Error::InvalidData(format!("column {} has no values", col + 1)));
            }
            let mean = present.iter().sum::<f64>() / present.len() as f64;
            filled.push(values.into_iter().map(|v| v.unwrap_or(mean)).collect());
        }
        let output = filled.pop().expect("width >= 1");
        let mut inputs = filled;
        if options.standardize {
            for ch in &mut inputs {
                standardize(ch);
            }
        }
        Self::new(inputs, output)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.n_inputs()).map(|i| format!("u{i}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for k in 0..self.len() {
            let row: Vec<String> = self
                .inputs
                .iter()
                .map(|ch| ch[k])
                .chain(std::iter::once(self.output[k]))
                .map(|v| format!("{v:?}"))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loader switches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CsvOptions {
    pub standardize: bool,
}

fn standardize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    for v in values.iter_mut() {
        *v -= mean;
        if sd > 0.0 {
            *v /= sd;
        }
    }
}
