//! Time-domain Monte-Carlo oracle for the linearized network.
//!
//! Every roster input emits a sampled fluctuation `δa = (X + iY)/2`, with X
//! and Y independent Gaussian processes whose per-sample variances follow the
//! input's quadrature spectrum (white for constant spectra, FIR-shaped for
//! tabulated ones). Samples run through the element pipeline with delays as
//! integer-sample delay lines, and each detector records
//! `δn = 2·Re(β*·δb)` with β the carrier the simulation propagates itself.
//! An analyzer model then estimates the photocurrent spectrum, and the
//! shot-noise reference comes from a second run with vacuum at every input.
//!
//! Runs are deterministic for a given seed. Each (run, input, quadrature)
//! triple draws from its own ChaCha8 stream, so results do not depend on
//! thread scheduling.

mod analyzer;
mod dump;
mod shaping;

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{CompiledNetwork, EngineError, Stage};
use crate::model::{Combo, QuadSpectrum};

pub use analyzer::{periodogram, segment_powers, white_noise_bin_power, AnalyzerSettings, McEstimate};
pub use dump::{read_dump, write_dump};
pub use shaping::{design_fir, SHAPING_TAPS};

use shaping::Shaper;

/// Samples processed per pipeline pass.
const BLOCK: usize = 8192;
/// Largest tolerated distance of τ·f_s from an integer.
pub const DELAY_TOLERANCE: f64 = 1e-6;
/// |z| above which an engine/MC comparison fails.
pub const Z_THRESHOLD: f64 = 3.0;

#[derive(Debug, Error)]
pub enum McError {
    #[error("delay `{element}` is {samples} samples at the configured rate; it must be an integer")]
    DelayNotIntegral { element: String, samples: f64 },
    #[error("sample rate {sample_rate} Hz must exceed 4x the highest analysis frequency {f_max} Hz")]
    SampleRateTooLow { sample_rate: f64, f_max: f64 },
    #[error("frequency {f_hz} Hz outside [0, {nyquist}) Hz")]
    FrequencyOutOfRange { f_hz: f64, nyquist: f64 },
    #[error("need {needed} samples, stream has {found}")]
    InsufficientSamples { needed: usize, found: usize },
    #[error("expected {expected} input spectra, got {found}")]
    InputCount { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub sample_rate: f64,
    /// Samples per analyzer segment; `sample_rate / segment_len` is the bin width.
    pub segment_len: usize,
    /// Number of segments K.
    pub segments: usize,
    pub seed: u64,
    pub window: Window,
}

impl Default for McConfig {
    /// 164 MHz sampling (2× the 82 MHz repetition rate, so a two-pulse delay
    /// is exactly 4 samples) and 544-sample segments, whose ~301 kHz bins put
    /// 20.5 MHz exactly on bin 68.
    fn default() -> Self {
        McConfig {
            sample_rate: 164e6,
            segment_len: 544,
            segments: 4096,
            seed: 0x5eed,
            window: Window::Hann,
        }
    }
}

impl McConfig {
    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.segment_len as f64
    }

    /// Recorded stream length in seconds.
    pub fn duration(&self) -> f64 {
        (self.segment_len * self.segments) as f64 / self.sample_rate
    }

    /// Checks rate and segmentation against the network and analysis frequencies.
    pub fn check(&self, net: &CompiledNetwork, freqs: &[f64]) -> Result<(), McError> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(McError::Config(format!("sample rate must be positive, got {}", self.sample_rate)));
        }
        if self.segment_len < 2 || self.segments == 0 {
            return Err(McError::Config("need at least one segment of two or more samples".into()));
        }
        let f_max = freqs.iter().copied().fold(0.0, f64::max);
        if self.sample_rate <= 4.0 * f_max {
            return Err(McError::SampleRateTooLow {
                sample_rate: self.sample_rate,
                f_max,
            });
        }
        delay_samples(net, self.sample_rate).map(|_| ())
    }
}

/// Integer sample count of every delay stage (0 for other stages).
fn delay_samples(net: &CompiledNetwork, sample_rate: f64) -> Result<Vec<usize>, McError> {
    net.stages()
        .iter()
        .zip(net.stage_names())
        .map(|(s, name)| match *s {
            Stage::Delay { tau, .. } => {
                let samples = tau * sample_rate;
                if (samples - samples.round()).abs() > DELAY_TOLERANCE || samples < 0.0 {
                    Err(McError::DelayNotIntegral {
                        element: name.clone(),
                        samples,
                    })
                } else {
                    Ok(samples.round() as usize)
                }
            }
            _ => Ok(0),
        })
        .collect()
}

/// Photocurrent fluctuation samples, one stream per detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorStreams {
    pub sample_rate: f64,
    pub seed: u64,
    pub names: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

impl DetectorStreams {
    pub fn len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Weighted sum of detector streams named by `combo`.
    pub fn combine(&self, combo: &Combo) -> Result<Vec<f64>, McError> {
        let mut out = vec![0.0; self.len()];
        let terms = combo.terms();
        if terms.is_empty() {
            return Err(EngineError::EmptyCombo(combo.to_string()).into());
        }
        for (name, w) in terms {
            let k = self
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| EngineError::UnknownDetector(name.to_string()))?;
            out.iter_mut().zip(&self.data[k]).for_each(|(o, x)| *o += w * x);
        }
        Ok(out)
    }
}

/// Carriers at the detectors from a scalar pass through the pipeline.
fn mc_carriers(net: &CompiledNetwork) -> Vec<Complex64> {
    let mut wires = vec![Complex64::new(0.0, 0.0); net.wire_count()];
    for (w, slot) in wires.iter_mut().zip(net.inputs()) {
        *w = slot.source.amp().to_complex();
    }
    for stage in net.stages() {
        match *stage {
            Stage::BeamSplitter { inputs: [a, b], outputs: [o1, o2], t, r } => {
                let (va, vb) = (wires[a], wires[b]);
                wires[o1] = va * t + vb * r;
                wires[o2] = va * r - vb * t;
            }
            Stage::Phase { input, output, phi } => wires[output] = wires[input] * Complex64::from_polar(1.0, phi),
            Stage::Delay { input, output, carrier_phase, .. } => {
                wires[output] = wires[input] * Complex64::from_polar(1.0, carrier_phase)
            }
            Stage::Loss { input, vacuum, output, eta } => {
                wires[output] = wires[input] * eta.sqrt() + wires[vacuum] * (1.0 - eta).sqrt()
            }
        }
    }
    net.detectors().iter().map(|d| wires[d.wire]).collect()
}

struct InputGen {
    rngs: [ChaCha8Rng; 2],
    shapers: [Shaper; 2],
}

/// Runs the time-domain simulation and hands each block of detector
/// photocurrents (detector-major, post-warmup) to `sink`.
#[allow(clippy::needless_range_loop)]
fn run<F>(net: &CompiledNetwork, inputs: &[QuadSpectrum], cfg: &McConfig, run_index: u64, mut sink: F) -> Result<(), McError>
where
    F: FnMut(&[Vec<f64>]),
{
    if inputs.len() != net.input_count() {
        return Err(McError::InputCount {
            expected: net.input_count(),
            found: inputs.len(),
        });
    }
    let delays = delay_samples(net, cfg.sample_rate)?;
    let mut gens: Vec<InputGen> = inputs
        .iter()
        .zip(net.inputs())
        .enumerate()
        .map(|(j, (spec, slot))| {
            let spec = if slot.is_vacuum() { &QuadSpectrum::VACUUM } else { spec };
            let rng = |q: u64| {
                let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
                r.set_stream((run_index << 32) | (2 * j as u64 + q));
                r
            };
            InputGen {
                rngs: [rng(0), rng(1)],
                shapers: [Shaper::new(spec, 0, cfg.sample_rate), Shaper::new(spec, 1, cfg.sample_rate)],
            }
        })
        .collect();
    let settling = gens
        .iter()
        .flat_map(|g| g.shapers.iter().map(Shaper::settling))
        .max()
        .unwrap_or(0);
    let warmup = delays.iter().sum::<usize>() + settling;
    let total = warmup + cfg.segment_len * cfg.segments;

    let mut lines: Vec<VecDeque<Complex64>> = delays
        .iter()
        .map(|&d| std::iter::repeat_n(Complex64::new(0.0, 0.0), d).collect())
        .collect();
    let carriers = mc_carriers(net);
    let n_in = net.input_count();
    let mut wires = vec![vec![Complex64::new(0.0, 0.0); BLOCK]; net.wire_count()];
    let mut out = vec![vec![0.0; BLOCK]; net.detector_count()];

    let mut done = 0;
    while done < total {
        let len = BLOCK.min(total - done);
        let fresh: Vec<Vec<Complex64>> = gens
            .par_iter_mut()
            .map(|g| {
                let mut quad = [vec![0.0; len], vec![0.0; len]];
                for (q, buf) in quad.iter_mut().enumerate() {
                    for x in buf.iter_mut() {
                        *x = StandardNormal.sample(&mut g.rngs[q]);
                    }
                    g.shapers[q].apply(buf);
                }
                quad[0].iter().zip(&quad[1]).map(|(x, y)| Complex64::new(x / 2.0, y / 2.0)).collect()
            })
            .collect();
        for (w, f) in wires.iter_mut().zip(fresh).take(n_in) {
            w[..len].copy_from_slice(&f);
        }
        for (si, stage) in net.stages().iter().enumerate() {
            match *stage {
                Stage::BeamSplitter { inputs: [a, b], outputs: [o1, o2], t, r } => {
                    for n in 0..len {
                        let (va, vb) = (wires[a][n], wires[b][n]);
                        wires[o1][n] = va * t + vb * r;
                        wires[o2][n] = va * r - vb * t;
                    }
                }
                Stage::Phase { input, output, phi } => {
                    let f = Complex64::from_polar(1.0, phi);
                    for n in 0..len {
                        wires[output][n] = wires[input][n] * f;
                    }
                }
                Stage::Delay { input, output, carrier_phase, .. } => {
                    let f = Complex64::from_polar(1.0, carrier_phase);
                    let line = &mut lines[si];
                    for n in 0..len {
                        let x = wires[input][n];
                        let y = if line.is_empty() {
                            x
                        } else {
                            line.push_back(x);
                            line.pop_front().unwrap()
                        };
                        wires[output][n] = y * f;
                    }
                }
                Stage::Loss { input, vacuum, output, eta } => {
                    let (g, h) = (eta.sqrt(), (1.0 - eta).sqrt());
                    for n in 0..len {
                        wires[output][n] = wires[input][n] * g + wires[vacuum][n] * h;
                    }
                }
            }
        }
        let skip = warmup.saturating_sub(done).min(len);
        if skip < len {
            for ((o, d), beta) in out.iter_mut().zip(net.detectors()).zip(&carriers) {
                o.clear();
                o.extend(wires[d.wire][skip..len].iter().map(|b| 2.0 * (beta.conj() * b).re));
            }
            sink(&out);
        }
        done += len;
    }
    Ok(())
}

/// Simulates all detector photocurrents. `inputs` are roster-aligned
/// spectra; vacuum roster entries always use unit variances.
pub fn simulate(net: &CompiledNetwork, inputs: &[QuadSpectrum], cfg: &McConfig) -> Result<DetectorStreams, McError> {
    let freqs: Vec<f64> = net.measurements().iter().flat_map(|m| m.freqs.points()).collect();
    cfg.check(net, &freqs)?;
    let mut data = vec![Vec::with_capacity(cfg.segment_len * cfg.segments); net.detector_count()];
    run(net, inputs, cfg, 0, |block| {
        for (d, b) in data.iter_mut().zip(block) {
            d.extend_from_slice(b);
        }
    })?;
    Ok(DetectorStreams {
        sample_rate: cfg.sample_rate,
        seed: cfg.seed,
        names: net.detectors().iter().map(|d| d.name.clone()).collect(),
        data,
    })
}

/// Simulates only the combined photocurrent of `combo`.
fn simulate_combo(
    net: &CompiledNetwork,
    combo: &Combo,
    inputs: &[QuadSpectrum],
    cfg: &McConfig,
    run_index: u64,
) -> Result<Vec<f64>, McError> {
    let terms = net.resolve(combo)?;
    let mut out = Vec::with_capacity(cfg.segment_len * cfg.segments);
    run(net, inputs, cfg, run_index, |block| {
        let start = out.len();
        out.resize(start + block[0].len(), 0.0);
        for &(k, w) in &terms {
            out[start..].iter_mut().zip(&block[k]).for_each(|(o, x)| *o += w * x);
        }
    })?;
    Ok(out)
}

/// Spectrum estimate relative to a vacuum-input rerun.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedEstimate {
    pub f_hz: f64,
    pub signal: McEstimate,
    pub shot_noise: McEstimate,
    pub normalized: f64,
    pub std_error: f64,
}

pub fn estimate_normalized(
    net: &CompiledNetwork,
    combo: &Combo,
    f_hz: f64,
    inputs: &[QuadSpectrum],
    cfg: &McConfig,
    settings: &AnalyzerSettings,
) -> Result<NormalizedEstimate, McError> {
    cfg.check(net, &[f_hz])?;
    let signal_stream = simulate_combo(net, combo, inputs, cfg, 0)?;
    let signal = periodogram(&signal_stream, f_hz, settings, cfg)?;
    drop(signal_stream);
    let vacua = vec![QuadSpectrum::VACUUM; net.input_count()];
    let vacuum_stream = simulate_combo(net, combo, &vacua, cfg, 1)?;
    let shot_noise = periodogram(&vacuum_stream, f_hz, settings, cfg)?;
    let normalized = signal.estimate / shot_noise.estimate;
    let std_error = normalized.abs() * signal.relative_error().hypot(shot_noise.relative_error());
    Ok(NormalizedEstimate {
        f_hz,
        signal,
        shot_noise,
        normalized,
        std_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub f_hz: f64,
    pub engine: f64,
    pub monte_carlo: f64,
    pub std_error: f64,
    pub z: f64,
    pub pass: bool,
}

/// Compares the engine's normalized spectrum of `reference` with a
/// Monte-Carlo estimate on `simulated`. Passing the same network twice is
/// the usual check; different networks inject a deliberate mismatch.
pub fn cross_validate_between(
    reference: &CompiledNetwork,
    simulated: &CompiledNetwork,
    combo: &Combo,
    f_hz: f64,
    inputs: &[QuadSpectrum],
    cfg: &McConfig,
    settings: &AnalyzerSettings,
) -> Result<CrossValidation, McError> {
    let engine = reference.spectrum(combo, 2.0 * PI * f_hz, inputs)?.normalized;
    let mc = estimate_normalized(simulated, combo, f_hz, inputs, cfg, settings)?;
    let z = (mc.normalized - engine) / mc.std_error;
    Ok(CrossValidation {
        f_hz,
        engine,
        monte_carlo: mc.normalized,
        std_error: mc.std_error,
        z,
        pass: z.abs() <= Z_THRESHOLD,
    })
}

pub fn cross_validate(
    net: &CompiledNetwork,
    combo: &Combo,
    f_hz: f64,
    inputs: &[QuadSpectrum],
    cfg: &McConfig,
    settings: &AnalyzerSettings,
) -> Result<CrossValidation, McError> {
    cross_validate_between(net, net, combo, f_hz, inputs, cfg, settings)
}
