use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::SeriesFrame;

/// An R² value with the number of terms or columns left out because the
/// truth had no spread there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct R2Score {
    pub value: f64,
    pub excluded: usize,
}

fn check(pred: &SeriesFrame, truth: &SeriesFrame) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::EmptyInput("metric truth"));
    }
    if pred.rows() != truth.rows() || pred.channels() != truth.channels() {
        return Err(Error::ShapeMismatch {
            op: "metric",
            lhs: vec![pred.rows(), pred.channels()],
            rhs: vec![truth.rows(), truth.channels()],
        });
    }
    Ok(())
}

/// Per-column mean over samples. Rows are samples, columns are the
/// flattened (channel, horizon) targets.
fn column_means(truth: &SeriesFrame) -> Vec<f64> {
    let m = truth.rows() as f64;
    (0..truth.channels())
        .map(|c| (0..truth.rows()).map(|r| truth.get(r, c)).sum::<f64>() / m)
        .collect()
}

/// Root relative squared error against the per-column sample mean.
pub fn rse(pred: &SeriesFrame, truth: &SeriesFrame) -> Result<f64> {
    check(pred, truth)?;
    let mean = column_means(truth);
    let (mut num, mut den) = (0.0, 0.0);
    for r in 0..truth.rows() {
        for (c, m) in mean.iter().enumerate() {
            let y = truth.get(r, c);
            num += (y - pred.get(r, c)).powi(2);
            den += (y - m).powi(2);
        }
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator("RSE: truth is constant".into()));
    }
    Ok((num / den).sqrt())
}

/// Coefficient of determination per (channel, horizon) column, averaged over
/// columns. Constant-truth columns are excluded and counted.
pub fn r2(pred: &SeriesFrame, truth: &SeriesFrame) -> Result<R2Score> {
    check(pred, truth)?;
    let mean = column_means(truth);
    let (mut sum, mut used) = (0.0, 0usize);
    for (c, m) in mean.iter().enumerate() {
        let (mut num, mut den) = (0.0, 0.0);
        for r in 0..truth.rows() {
            let y = truth.get(r, c);
            num += (y - pred.get(r, c)).powi(2);
            den += (y - m).powi(2);
        }
        if den > 0.0 {
            sum += 1.0 - num / den;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::ZeroDenominator("R2: every column is constant".into()));
    }
    Ok(R2Score {
        value: sum / used as f64,
        excluded: mean.len() - used,
    })
}

/// The literal per-term average `mean(1 - (y - p)^2 / (y - ybar)^2)`.
/// Terms with `y == ybar` are excluded and counted.
pub fn r2_pointwise(pred: &SeriesFrame, truth: &SeriesFrame) -> Result<R2Score> {
    check(pred, truth)?;
    let mean = column_means(truth);
    let (mut sum, mut used, mut excluded) = (0.0, 0usize, 0usize);
    for r in 0..truth.rows() {
        for (c, m) in mean.iter().enumerate() {
            let y = truth.get(r, c);
            let den = (y - m).powi(2);
            if den == 0.0 {
                excluded += 1;
                continue;
            }
            sum += 1.0 - (y - pred.get(r, c)).powi(2) / den;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::ZeroDenominator("R2: every term has zero spread".into()));
    }
    Ok(R2Score {
        value: sum / used as f64,
        excluded,
    })
}
