use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::SeriesFrame;

/// Two superposed sines: a slow large-period component and a fast one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedStimulus {
    pub amp_low: f64,
    pub freq_low: f64,
    pub amp_high: f64,
    pub freq_high: f64,
    pub sample_rate: f64,
    /// Seconds.
    pub duration: f64,
}

impl Default for MixedStimulus {
    fn default() -> Self {
        Self {
            amp_low: 3.0,
            freq_low: 0.5,
            amp_high: 5.0,
            freq_high: 4.0,
            sample_rate: 100.0,
            duration: 10.0,
        }
    }
}

impl MixedStimulus {
    /// A single tone; the high component is silenced.
    pub fn tone(amp: f64, freq: f64) -> Self {
        Self {
            amp_low: amp,
            freq_low: freq,
            amp_high: 0.0,
            freq_high: freq,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.freq_low >= 0.0 && self.freq_high >= 0.0) {
            return Err(Error::InvalidParameter("frequencies must be non-negative".into()));
        }
        let top = self.freq_low.max(self.freq_high);
        if !(self.sample_rate > 2.0 * top) {
            return Err(Error::InvalidParameter(format!(
                "sample rate {} Hz violates Nyquist for {top} Hz",
                self.sample_rate
            )));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.amp_low * (2.0 * PI * self.freq_low * t).sin()
            + self.amp_high * (2.0 * PI * self.freq_high * t).sin()
    }
}

/// Samples the stimulus at `t = i / sample_rate` into a one-channel frame.
pub fn generate_stimulus(s: &MixedStimulus) -> Result<SeriesFrame> {
    s.validate()?;
    let data = (0..s.samples())
        .map(|i| s.value_at(i as f64 / s.sample_rate))
        .collect();
    SeriesFrame::new(vec!["current".into()], s.samples(), data)
}
