use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::frame::SeriesFrame;

/// One-sided power spectrum, averaged over channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequency: Vec<f64>,
    pub power: Vec<f64>,
    /// FFT length after zero padding.
    pub padded_len: usize,
}

impl Spectrum {
    /// Frequency of the largest bin; ties go to the lower frequency.
    pub fn dominant(&self, skip_dc: bool) -> f64 {
        let start = usize::from(skip_dc).min(self.power.len() - 1);
        let mut best = start;
        for k in start + 1..self.power.len() {
            if self.power[k] > self.power[best] {
                best = k;
            }
        }
        self.frequency[best]
    }

    pub fn bin_of(&self, freq: f64) -> usize {
        let df = self.frequency.get(1).copied().unwrap_or(1.0);
        ((freq / df).round() as usize).min(self.power.len() - 1)
    }

    pub fn to_frame(&self) -> SeriesFrame {
        SeriesFrame::from_columns(
            vec!["frequency".into(), "power".into()],
            &[self.frequency.clone(), self.power.clone()],
        )
        .expect("equal columns")
    }
}

/// Zero-pads each channel to a power of two, takes `|X_k|^2 / N^2`, folds the
/// negative frequencies onto the positive ones and averages channels.
/// The bins sum to `sum(x^2) / N`.
pub fn spectrum(trace: &SeriesFrame, sample_rate: f64) -> Result<Spectrum> {
    if trace.is_empty() {
        return Err(Error::EmptyInput("power spectrum trace"));
    }
    if trace.rows() < 8 {
        return Err(Error::SequenceTooShort {
            requested: 8,
            available: trace.rows(),
        });
    }
    if !(sample_rate > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    let n = trace.rows().next_power_of_two();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let half = n / 2;
    let mut power = vec![0.0; half + 1];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let norm = (n as f64) * (n as f64);
    for c in 0..trace.channels() {
        buf.iter_mut().for_each(|z| *z = Complex::new(0.0, 0.0));
        for t in 0..trace.rows() {
            buf[t].re = trace.get(t, c);
        }
        fft.process(&mut buf);
        for (k, p) in power.iter_mut().enumerate() {
            let two_sided = buf[k].norm_sqr() / norm;
            *p += if k == 0 || k == half { two_sided } else { 2.0 * two_sided };
        }
    }
    let channels = trace.channels() as f64;
    power.iter_mut().for_each(|p| *p /= channels);
    let df = sample_rate / n as f64;
    let frequency = (0..=half).map(|k| k as f64 * df).collect();
    Ok(Spectrum {
        frequency,
        power,
        padded_len: n,
    })
}

/// [`spectrum`] as a two-column `(frequency, power)` frame.
pub fn power_spectrum(trace: &SeriesFrame, sample_rate: f64) -> Result<SeriesFrame> {
    Ok(spectrum(trace, sample_rate)?.to_frame())
}
