//! Closed-form results for the unbalanced Mach–Zehnder phase detector and the
//! design relations between delay, repetition rate and measurement frequency.
//!
//! `theta` is the sideband phase Ωτ accumulated in the long arm, `phi` the
//! locked optical phase between the arms. Variances are normalized to the
//! shot-noise level.

use serde::Serialize;

use crate::model::SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MzConfig {
    pub theta: f64,
    pub phi: f64,
    pub vx: f64,
    pub vy: f64,
}

impl MzConfig {
    pub fn sum_variance(&self) -> f64 {
        sum_variance(self.theta, self.vx)
    }

    pub fn diff_variance(&self) -> f64 {
        diff_variance(self.theta, self.phi, self.vx, self.vy)
    }
}

/// Normalized noise of the summed photocurrents: cos²(θ/2)·V_X + sin²(θ/2).
pub fn sum_variance(theta: f64, vx: f64) -> f64 {
    let (s, c) = (theta / 2.0).sin_cos();
    c * c * vx + s * s
}

/// Normalized noise of the photocurrent difference.
///
/// The signal contributes its amplitude quadrature with weight
/// cos²φ·cos²(θ/2) and its phase quadrature with sin²φ·sin²(θ/2); the
/// vacuum at the open port fills the complementary weights.
pub fn diff_variance(theta: f64, phi: f64, vx: f64, vy: f64) -> f64 {
    let (s, c) = (theta / 2.0).sin_cos();
    let (sp, cp) = phi.sin_cos();
    let (s2, c2, sp2, cp2) = (s * s, c * c, sp * sp, cp * cp);
    cp2 * c2 * vx + sp2 * s2 * vy + cp2 * s2 + sp2 * c2
}

/// Arm-length difference that puts θ = π at `f_m`: ΔL = c/(2·f_m).
pub fn delay_for_frequency(f_m: f64) -> f64 {
    SPEED_OF_LIGHT / (2.0 * f_m)
}

/// Inverse of [`delay_for_frequency`].
pub fn frequency_for_delay(length: f64) -> f64 {
    SPEED_OF_LIGHT / (2.0 * length)
}

/// Delay length and measurement frequency compatible with a pulse train:
/// the long arm must hold an integer number `n` of pulse spacings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulsedDesign {
    pub f_rep: f64,
    pub n: u32,
    /// Arm-length difference ΔL = c·n/f_rep, meters.
    pub length: f64,
    /// Measurement frequency f_m = f_rep/(2n), Hz.
    pub f_m: f64,
}

impl PulsedDesign {
    pub fn tau(&self) -> f64 {
        self.length / SPEED_OF_LIGHT
    }
}

/// # Panics
///
/// Panics if `n` is zero.
pub fn pulsed_design(f_rep: f64, n: u32) -> PulsedDesign {
    assert!(n >= 1, "pulse multiple must be at least 1");
    PulsedDesign {
        f_rep,
        n,
        length: SPEED_OF_LIGHT * f64::from(n) / f_rep,
        f_m: f_rep / (2.0 * f64::from(n)),
    }
}

/// Effective loss from imperfect mode matching, 1 − V², for fringe
/// visibility V. The field overlap V enters the interference power as V².
pub fn visibility_to_loss(visibility: f64) -> f64 {
    1.0 - visibility * visibility
}

/// Variance after mixing with vacuum at a loss of `loss`: (1−loss)·V + loss.
pub fn degraded_variance(v_in: f64, loss: f64) -> f64 {
    (1.0 - loss) * v_in + loss
}
