//! Swept-spectrum-analyzer emulation on sampled photocurrents.
//!
//! The stream is cut into `K` segments of the configured length, so the bin
//! width `f_s / segment_len` plays the resolution bandwidth. Each segment
//! yields one windowed single-bin power at the analysis frequency; the video
//! bandwidth sets how many consecutive segment powers are averaged.

use serde::{Deserialize, Serialize};

use super::{McConfig, McError, Window};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerSettings {
    pub rbw_hz: f64,
    pub vbw_hz: f64,
    /// Electronic noise power in the same units as the estimates.
    pub electronic_floor: f64,
    pub subtract_electronic: bool,
}

impl Default for AnalyzerSettings {
    fn default() -> Self {
        AnalyzerSettings {
            rbw_hz: 300e3,
            vbw_hz: 30.0,
            electronic_floor: 0.0,
            subtract_electronic: false,
        }
    }
}

impl AnalyzerSettings {
    /// Number of segment powers in one video-filter average.
    pub fn video_window(&self, segments: usize) -> usize {
        let w = (self.rbw_hz / self.vbw_hz).round();
        if w.is_finite() && w >= 1.0 {
            (w as usize).min(segments)
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub f_hz: f64,
    pub omega: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// Segment powers averaged into the estimate.
    pub segments: usize,
}

impl McEstimate {
    pub fn relative_error(&self) -> f64 {
        self.std_error / self.estimate.abs()
    }
}

pub(crate) fn window(kind: Window, len: usize) -> Vec<f64> {
    match kind {
        Window::Rectangular => vec![1.0; len],
        Window::Hann => (0..len)
            .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
            .collect(),
    }
}

/// Power a white stream of per-sample variance `sigma2` shows in one bin.
pub fn white_noise_bin_power(sigma2: f64, cfg: &McConfig) -> f64 {
    let w = window(cfg.window, cfg.segment_len);
    let s1: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|x| x * x).sum();
    sigma2 * 2.0 * s2 / (s1 * s1)
}

/// Per-segment powers `2|Σ w·x·e^{−i2πfn/f_s}|² / (Σw)²`; a sinusoid of
/// amplitude A at `f_hz` gives A²/2.
pub fn segment_powers(stream: &[f64], f_hz: f64, cfg: &McConfig) -> Result<Vec<f64>, McError> {
    if !(f_hz >= 0.0 && f_hz < cfg.sample_rate / 2.0) {
        return Err(McError::FrequencyOutOfRange {
            f_hz,
            nyquist: cfg.sample_rate / 2.0,
        });
    }
    let (len, k) = (cfg.segment_len, cfg.segments);
    if len == 0 || k == 0 || stream.len() < len * k {
        return Err(McError::InsufficientSamples {
            needed: len * k,
            found: stream.len(),
        });
    }
    let w = window(cfg.window, len);
    let norm: f64 = w.iter().sum::<f64>().powi(2);
    let step = 2.0 * std::f64::consts::PI * f_hz / cfg.sample_rate;
    let (cos, sin): (Vec<f64>, Vec<f64>) = (0..len)
        .map(|n| {
            let (s, c) = (step * n as f64).sin_cos();
            (w[n] * c, -w[n] * s)
        })
        .unzip();
    let start = stream.len() - len * k;
    Ok(stream[start..]
        .chunks_exact(len)
        .map(|seg| {
            let (mut re, mut im) = (0.0, 0.0);
            for ((x, c), s) in seg.iter().zip(&cos).zip(&sin) {
                re += x * c;
                im += x * s;
            }
            2.0 * (re * re + im * im) / norm
        })
        .collect())
}

/// Averaged bin power at `f_hz` with its standard error.
pub fn periodogram(stream: &[f64], f_hz: f64, settings: &AnalyzerSettings, cfg: &McConfig) -> Result<McEstimate, McError> {
    let powers = segment_powers(stream, f_hz, cfg)?;
    let n = settings.video_window(powers.len());
    let last = &powers[powers.len() - n..];
    let mean = last.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        last.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        mean * mean
    };
    let estimate = if settings.subtract_electronic {
        mean - settings.electronic_floor
    } else {
        mean
    };
    Ok(McEstimate {
        f_hz,
        omega: 2.0 * std::f64::consts::PI * f_hz,
        estimate,
        std_error: (var / n as f64).sqrt(),
        segments: n,
    })
}
