//! CSV ingestion, chronological splits, z-score normalization and
//! stride-1 sliding windows.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::SeriesFrame;

/// Where a dataset lives and how to cut it into windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub delimiter: u8,
    pub has_header: bool,
    pub context_length: usize,
    pub prediction_length: usize,
    /// Train, validation, test fractions.
    pub ratios: [f64; 3],
}

impl DatasetSpec {
    pub fn new(path: impl Into<PathBuf>, context_length: usize, prediction_length: usize) -> Self {
        Self {
            path: path.into(),
            delimiter: b',',
            has_header: true,
            context_length,
            prediction_length,
            ratios: [0.7, 0.2, 0.1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.context_length == 0 || self.prediction_length == 0 {
            return Err(Error::InvalidParameter(
                "context and prediction lengths must be at least 1".into(),
            ));
        }
        if self.ratios.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "split ratios must be positive, got {:?}",
                self.ratios
            )));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "split ratios must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }

    pub fn window(&self) -> usize {
        self.context_length + self.prediction_length
    }
}

/// Reads a numeric CSV into a `T x C` frame.
pub fn load_csv(spec: &DatasetSpec) -> Result<SeriesFrame> {
    let bytes = std::fs::read(&spec.path).map_err(|e| Error::Io(format!("{}: {e}", spec.path.display())))?;
    parse_csv(&bytes, spec.delimiter, spec.has_header)
}

/// Parses CSV bytes; LF and CRLF line endings are both accepted.
pub fn parse_csv(bytes: &[u8], delimiter: u8, has_header: bool) -> Result<SeriesFrame> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut names: Option<Vec<String>> = None;
    let mut width = None;
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| Error::Csv {
            row: line,
            column: 0,
            message: e.to_string(),
        })?;
        if i == 0 && has_header {
            names = Some(record.iter().map(|s| s.trim().to_string()).collect());
            width = Some(record.len());
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Csv {
                row: line,
                column: record.len().min(w) + 1,
                message: format!("expected {w} fields, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Csv {
                row: line,
                column: j + 1,
                message: format!("non-numeric cell '{cell}'"),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyInput("csv data rows"));
    }
    let names = names.unwrap_or_else(|| SeriesFrame::synth_names(width.unwrap_or(0)));
    SeriesFrame::new(names, rows, data)
}

/// Per-channel z-score statistics estimated on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Channels with zero spread; they normalize to zero.
    pub constant: Vec<bool>,
}

impl NormStats {
    pub fn fit(frame: &SeriesFrame) -> Result<Self> {
        if frame.is_empty() {
            return Err(Error::EmptyInput("normalization frame"));
        }
        let n = frame.rows() as f64;
        let mut mean = Vec::with_capacity(frame.channels());
        let mut std = Vec::with_capacity(frame.channels());
        let mut constant = Vec::with_capacity(frame.channels());
        for c in 0..frame.channels() {
            let col = frame.column(c);
            let m = col.iter().sum::<f64>() / n;
            let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            let s = v.sqrt();
            let flat = col.iter().all(|&x| x == col[0]);
            mean.push(m);
            std.push(if flat { 1.0 } else { s });
            constant.push(flat);
        }
        Ok(Self {
            names: frame.names().to_vec(),
            mean,
            std,
            constant,
        })
    }

    fn check(&self, frame: &SeriesFrame) -> Result<()> {
        if frame.channels() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                context: "normalization channels",
                expected: self.mean.len(),
                got: frame.channels(),
            });
        }
        Ok(())
    }

    pub fn normalize(&self, frame: &SeriesFrame) -> Result<SeriesFrame> {
        self.check(frame)?;
        let mut out = frame.clone();
        for t in 0..out.rows() {
            for (c, x) in out.row_mut(t).iter_mut().enumerate() {
                *x = if self.constant[c] {
                    0.0
                } else {
                    (*x - self.mean[c]) / self.std[c]
                };
            }
        }
        Ok(out)
    }

    pub fn denormalize(&self, frame: &SeriesFrame) -> Result<SeriesFrame> {
        self.check(frame)?;
        let mut out = frame.clone();
        for t in 0..out.rows() {
            for (c, x) in out.row_mut(t).iter_mut().enumerate() {
                *x = *x * self.std[c] + self.mean[c];
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Stride-1 windows of one split, already normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub context: usize,
    pub horizon: usize,
    pub channels: usize,
    /// `samples x context x channels`, row-major.
    pub inputs: Vec<f64>,
    /// `samples x horizon x channels`, row-major.
    pub targets: Vec<f64>,
    /// Row offset of the split inside the full series.
    pub start: usize,
}

impl WindowSet {
    pub fn from_frame(frame: &SeriesFrame, context: usize, horizon: usize, start: usize) -> Self {
        let c = frame.channels();
        let count = (frame.rows() + 1).saturating_sub(context + horizon);
        let mut inputs = Vec::with_capacity(count * context * c);
        let mut targets = Vec::with_capacity(count * horizon * c);
        for m in 0..count {
            inputs.extend_from_slice(&frame.data()[m * c..(m + context) * c]);
            targets.extend_from_slice(&frame.data()[(m + context) * c..(m + context + horizon) * c]);
        }
        Self {
            context,
            horizon,
            channels: c,
            inputs,
            targets,
            start,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / (self.context * self.channels).max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input(&self, m: usize) -> &[f64] {
        let w = self.context * self.channels;
        &self.inputs[m * w..(m + 1) * w]
    }

    pub fn target(&self, m: usize) -> &[f64] {
        let w = self.horizon * self.channels;
        &self.targets[m * w..(m + 1) * w]
    }

    /// Targets as a `samples x (horizon * channels)` frame, one column per (l, c).
    pub fn target_frame(&self) -> SeriesFrame {
        let names = (0..self.horizon)
            .flat_map(|l| (0..self.channels).map(move |c| format!("l{l}_c{c}")))
            .collect();
        SeriesFrame::new(names, self.len(), self.targets.clone()).expect("sized")
    }

    /// Inputs of samples `idx` laid out `[context, batch, channels]`.
    pub fn batch_inputs(&self, idx: &[usize]) -> Vec<f64> {
        let (t_len, c) = (self.context, self.channels);
        let mut out = vec![0.0; t_len * idx.len() * c];
        for (b, &m) in idx.iter().enumerate() {
            let x = self.input(m);
            for t in 0..t_len {
                out[(t * idx.len() + b) * c..(t * idx.len() + b + 1) * c]
                    .copy_from_slice(&x[t * c..(t + 1) * c]);
            }
        }
        out
    }

    /// Targets of samples `idx` as `[batch, horizon * channels]`.
    pub fn batch_targets(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().flat_map(|&m| self.target(m).iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: WindowSet,
    pub val: WindowSet,
    pub test: WindowSet,
    pub stats: NormStats,
    /// Split lengths in rows.
    pub lengths: [usize; 3],
}

/// Chronological split lengths; the test split takes the remainder.
pub fn split_lengths(total: usize, ratios: [f64; 3]) -> [usize; 3] {
    let train = ((ratios[0] * total as f64).round() as usize).min(total);
    let val = ((ratios[1] * total as f64).round() as usize).min(total - train);
    [train, val, total - train - val]
}

/// Splits, normalizes with train statistics, and windows each split.
pub fn split_and_window(frame: &SeriesFrame, spec: &DatasetSpec) -> Result<Splits> {
    spec.validate()?;
    if frame.is_empty() {
        return Err(Error::EmptyInput("dataset frame"));
    }
    let lengths = split_lengths(frame.rows(), spec.ratios);
    for (name, &len) in ["train", "val", "test"].iter().zip(&lengths) {
        if len < spec.window() {
            return Err(Error::SplitTooShort {
                split: name,
                len,
                window: spec.window(),
            });
        }
    }
    let bounds = [0, lengths[0], lengths[0] + lengths[1], frame.rows()];
    let train_raw = frame.slice_rows(bounds[0], bounds[1]);
    let stats = NormStats::fit(&train_raw)?;
    let make = |i: usize| -> Result<WindowSet> {
        let part = stats.normalize(&frame.slice_rows(bounds[i], bounds[i + 1]))?;
        Ok(WindowSet::from_frame(
            &part,
            spec.context_length,
            spec.prediction_length,
            bounds[i],
        ))
    };
    Ok(Splits {
        train: make(0)?,
        val: make(1)?,
        test: make(2)?,
        stats,
        lengths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_names_and_shape() {
        let f = parse_csv(b"a,b\n1,2\n3,4\n5,6\n", b',', true).unwrap();
        assert_eq!((f.rows(), f.channels()), (3, 2));
        assert_eq!(f.names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(f.get(2, 1), 6.0);
    }

    #[test]
    fn crlf_matches_lf() {
        let lf = parse_csv(b"x,y\n1.5,2\n3,-4e-1\n", b',', true).unwrap();
        let crlf = parse_csv(b"x,y\r\n1.5,2\r\n3,-4e-1\r\n", b',', true).unwrap();
        assert_eq!(lf, crlf);
    }

    #[test]
    fn ragged_row_names_row() {
        let err = parse_csv(b"a,b\n1,2\n3\n", b',', true).unwrap_err();
        assert!(matches!(err, Error::Csv { row: 3, .. }), "{err:?}");
    }

    #[test]
    fn non_numeric_names_row_and_column() {
        let err = parse_csv(b"a,b\n1,2\n3,x\n", b',', true).unwrap_err();
        assert!(matches!(err, Error::Csv { row: 3, column: 2, .. }), "{err:?}");
    }

    #[test]
    fn empty_file_is_error() {
        assert!(matches!(parse_csv(b"", b',', true), Err(Error::EmptyInput(_))));
        assert!(matches!(parse_csv(b"a,b\n", b',', true), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn headerless_synthesizes_names() {
        let f = parse_csv(b"1;2;3\n", b';', false).unwrap();
        assert_eq!(f.names(), &SeriesFrame::synth_names(3)[..]);
    }

    #[test]
    fn ratio_validation() {
        let mut s = DatasetSpec::new("x.csv", 4, 2);
        s.ratios = [0.7, 0.2, 0.2];
        assert!(s.validate().is_err());
        s.ratios = [0.6, 0.2, 0.2];
        assert!(s.validate().is_ok());
        s.context_length = 0;
        assert!(s.validate().is_err());
    }
}
