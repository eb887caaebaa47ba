//! Colored Gaussian noise: white samples passed through a linear-phase FIR
//! whose power response follows a tabulated quadrature spectrum.

use crate::model::QuadSpectrum;

/// FIR length used for tabulated spectra.
pub const SHAPING_TAPS: usize = 129;

/// Designs real, symmetric taps with `|H(f)|² ≈ v(|f|)` by frequency
/// sampling on `taps` points, smoothed with a Hann window.
pub fn design_fir(v: impl Fn(f64) -> f64, sample_rate: f64, taps: usize) -> Vec<f64> {
    assert!(taps % 2 == 1, "FIR length must be odd");
    let l = taps as f64;
    let mid = (taps - 1) / 2;
    let amp: Vec<f64> = (0..taps)
        .map(|k| {
            let kk = k.min(taps - k) as f64;
            v(kk * sample_rate / l).max(0.0).sqrt()
        })
        .collect();
    (0..taps)
        .map(|n| {
            let shift = n as f64 - mid as f64;
            let h: f64 = amp
                .iter()
                .enumerate()
                .map(|(k, a)| a * (2.0 * std::f64::consts::PI * k as f64 * shift / l).cos())
                .sum::<f64>()
                / l;
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * (n + 1) as f64 / (l + 1.0)).cos();
            h * w
        })
        .collect()
}

/// Per-quadrature generator for one input: either a plain gain (constant
/// spectrum) or a FIR with carried-over history.
#[derive(Debug, Clone)]
pub(crate) enum Shaper {
    Gain(f64),
    Fir { taps: Vec<f64>, history: Vec<f64> },
}

impl Shaper {
    pub fn new(spectrum: &QuadSpectrum, quadrature: usize, sample_rate: f64) -> Self {
        match spectrum {
            QuadSpectrum::Constant { vx, vy } => Shaper::Gain(if quadrature == 0 { *vx } else { *vy }.sqrt()),
            QuadSpectrum::Tabulated(_) => {
                let taps = design_fir(
                    |f| {
                        let (vx, vy) = spectrum.eval(f);
                        if quadrature == 0 {
                            vx
                        } else {
                            vy
                        }
                    },
                    sample_rate,
                    SHAPING_TAPS,
                );
                let history = vec![0.0; taps.len() - 1];
                Shaper::Fir { taps, history }
            }
        }
    }

    /// Samples needed before the output is stationary.
    pub fn settling(&self) -> usize {
        match self {
            Shaper::Gain(_) => 0,
            Shaper::Fir { taps, .. } => taps.len(),
        }
    }

    /// Shapes white samples in place.
    pub fn apply(&mut self, block: &mut [f64]) {
        match self {
            Shaper::Gain(g) => block.iter_mut().for_each(|x| *x *= *g),
            Shaper::Fir { taps, history } => {
                let h = history.len();
                let mut ext = Vec::with_capacity(h + block.len());
                ext.extend_from_slice(history);
                ext.extend_from_slice(block);
                for (n, out) in block.iter_mut().enumerate() {
                    // ext[n + h] is the current sample
                    *out = taps.iter().enumerate().map(|(k, t)| t * ext[n + h - k]).sum();
                }
                let tail = ext.len() - h;
                history.copy_from_slice(&ext[tail..]);
            }
        }
    }
}
