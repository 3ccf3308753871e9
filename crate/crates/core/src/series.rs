use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Provenance attached to a [`TimeSeries`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeriesMetadata {
    /// Seed of the injected readout noise, when any was added.
    pub noise_seed: Option<u64>,
    pub notes: Vec<String>,
}

/// Sampled observables on a strictly increasing time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    labels: Vec<String>,
    /// One column per label.
    columns: Vec<Vec<f64>>,
    pub metadata: SeriesMetadata,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, labels: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != columns.len() {
            return Err(invalid("one label per column is required"));
        }
        if columns.iter().any(|c| c.len() != times.len()) {
            return Err(invalid("every column must have one value per time"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("times must be strictly increasing"));
        }
        if times
            .iter()
            .chain(columns.iter().flatten())
            .any(|x| !x.is_finite())
        {
            return Err(invalid("time series values must be finite"));
        }
        Ok(Self {
            times,
            labels,
            columns,
            metadata: SeriesMetadata::default(),
        })
    }

    pub fn single(times: Vec<f64>, label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(times, alloc::vec![label.into()], alloc::vec![values])
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, label: &str) -> Option<&[f64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.columns[i].as_slice())
    }

    /// The first column; fitters operate on this.
    pub fn primary(&self) -> &[f64] {
        self.columns.first().map(Vec::as_slice).unwrap_or(&[])
    }

    /// A one-column series holding `label`.
    pub fn select(&self, label: &str) -> Result<Self> {
        let values = self
            .column(label)
            .ok_or_else(|| invalid(alloc::format!("no column named {label}")))?;
        let mut out = Self::single(self.times.clone(), label, values.to_vec())?;
        out.metadata = self.metadata.clone();
        Ok(out)
    }

    /// Samples with t ≥ `t_min`.
    pub fn window_from(&self, t_min: f64) -> Self {
        let start = self.times.partition_point(|&t| t < t_min);
        Self {
            times: self.times[start..].to_vec(),
            labels: self.labels.clone(),
            columns: self.columns.iter().map(|c| c[start..].to_vec()).collect(),
            metadata: self.metadata.clone(),
        }
    }

    pub(crate) fn columns_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.columns
    }
}
