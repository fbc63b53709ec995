//! Dense (time x channel) tables.

use crate::error::{Error, Result};

/// A row-major (time x channel) table of doubles with channel names.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    names: Vec<String>,
    rows: usize,
    data: Vec<f64>,
}

impl SeriesFrame {
    pub fn new(names: Vec<String>, rows: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * names.len() {
            return Err(Error::DimensionMismatch {
                context: "SeriesFrame::new",
                expected: rows * names.len(),
                got: data.len(),
            });
        }
        Ok(Self { names, rows, data })
    }

    pub fn zeros(names: Vec<String>, rows: usize) -> Self {
        let data = vec![0.0; rows * names.len()];
        Self { names, rows, data }
    }

    /// Channel names `c0..c{n-1}`.
    pub fn synth_names(channels: usize) -> Vec<String> {
        (0..channels).map(|c| format!("c{c}")).collect()
    }

    pub fn from_columns(names: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                context: "SeriesFrame::from_columns",
                expected: names.len(),
                got: columns.len(),
            });
        }
        let rows = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch {
                context: "SeriesFrame::from_columns",
                expected: rows,
                got: bad.len(),
            });
        }
        let mut data = Vec::with_capacity(rows * columns.len());
        for t in 0..rows {
            data.extend(columns.iter().map(|c| c[t]));
        }
        Ok(Self { names, rows, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn channels(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.names.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, t: usize, c: usize) -> f64 {
        self.data[t * self.names.len() + c]
    }

    pub fn set(&mut self, t: usize, c: usize, value: f64) {
        let n = self.names.len();
        self.data[t * n + c] = value;
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let n = self.names.len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.names.len();
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|t| self.get(t, c)).collect()
    }

    /// Rows `start..end` as a new frame.
    pub fn slice_rows(&self, start: usize, end: usize) -> SeriesFrame {
        let n = self.names.len();
        SeriesFrame {
            names: self.names.clone(),
            rows: end - start,
            data: self.data[start * n..end * n].to_vec(),
        }
    }
}
