//! Two-mode correlation variances, the product non-separability test and the
//! entanglement of formation of symmetric Gaussian states.
//!
//! Correlation variances use the halved convention, so a pair of vacuum
//! or coherent beams gives exactly 1 for both:
//! `v_plus = ⟨(δX₁+δX₂)²⟩/2`, `v_minus = ⟨(δY₁−δY₂)²⟩/2`.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EntanglementError {
    #[error("missing {0} correlation spectrum")]
    MissingCombo(&'static str),
    #[error("correlation variances must be positive (v_plus={v_plus}, v_minus={v_minus})")]
    NonPositive { v_plus: f64, v_minus: f64 },
    #[error("not witnessed (delta = {0} >= 1), EoF undefined here")]
    NotWitnessed(f64),
    #[error("delta must be positive, got {0}")]
    InvalidDelta(f64),
}

/// Maximum relative mismatch between the two beams' individual noise levels
/// for the symmetric-state EoF formula to be trusted.
pub const SYMMETRY_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationPair {
    pub v_plus: f64,
    pub v_minus: f64,
}

/// Normalized spectra of one correlation experiment, as produced by the
/// engine or the Monte-Carlo oracle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CorrelationSpectra {
    /// Amplitude-quadrature sum signal of the two beams.
    pub amplitude_sum: Option<f64>,
    /// Phase-quadrature difference signal of the two beams.
    pub phase_diff: Option<f64>,
    /// Individual noise levels of the two beams, used for the symmetry check.
    pub beam_levels: Option<(f64, f64)>,
}

pub fn correlation_variances(spectra: &CorrelationSpectra) -> Result<CorrelationPair, EntanglementError> {
    let v_plus = spectra
        .amplitude_sum
        .ok_or(EntanglementError::MissingCombo("amplitude-sum"))?;
    let v_minus = spectra
        .phase_diff
        .ok_or(EntanglementError::MissingCombo("phase-difference"))?;
    if !(v_plus > 0.0 && v_minus > 0.0) {
        return Err(EntanglementError::NonPositive { v_plus, v_minus });
    }
    Ok(CorrelationPair { v_plus, v_minus })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DuanVerdict {
    pub delta: f64,
    pub nonseparable: bool,
}

/// Δ = sqrt(v_plus·v_minus); Δ < 1 witnesses non-separability.
pub fn duan_product(pair: CorrelationPair) -> DuanVerdict {
    let delta = (pair.v_plus * pair.v_minus).sqrt();
    DuanVerdict {
        delta,
        nonseparable: delta < 1.0,
    }
}

/// Entanglement of formation (bits) of a symmetric Gaussian state with
/// product-criterion value `delta`:
/// `c₊·log₂c₊ − c₋·log₂c₋`, `c± = (Δ^{−1/2} ± Δ^{1/2})²/4`.
pub fn eof_symmetric(delta: f64) -> Result<f64, EntanglementError> {
    if !(delta > 0.0) {
        return Err(EntanglementError::InvalidDelta(delta));
    }
    if delta >= 1.0 {
        return Err(EntanglementError::NotWitnessed(delta));
    }
    let (inv, root) = (delta.powf(-0.5), delta.sqrt());
    let c_plus = (inv + root).powi(2) / 4.0;
    let c_minus = (inv - root).powi(2) / 4.0;
    Ok(c_plus * c_plus.log2() - c_minus * c_minus.log2())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntanglementReport {
    pub v_plus: f64,
    pub v_minus: f64,
    pub delta: f64,
    pub nonseparable: bool,
    pub eof_bits: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Full verdict for a correlation pair. `beam_levels` enables the symmetry
/// check; an asymmetric state still gets an EoF value but with a warning.
pub fn report(pair: CorrelationPair, beam_levels: Option<(f64, f64)>) -> EntanglementReport {
    let verdict = duan_product(pair);
    let eof_bits = eof_symmetric(verdict.delta).ok();
    let mut warnings = Vec::new();
    if let (Some((a, b)), Some(_)) = (beam_levels, eof_bits) {
        let mismatch = (a - b).abs() / a.max(b);
        if mismatch > SYMMETRY_TOLERANCE {
            warnings.push(format!(
                "asymmetric state: beam noise levels {a:.4} and {b:.4} differ by {:.2}%",
                100.0 * mismatch
            ));
        }
    }
    EntanglementReport {
        v_plus: pair.v_plus,
        v_minus: pair.v_minus,
        delta: verdict.delta,
        nonseparable: verdict.nonseparable,
        eof_bits,
        warnings,
    }
}

impl EntanglementReport {
    pub fn from_spectra(spectra: &CorrelationSpectra) -> Result<Self, EntanglementError> {
        Ok(report(correlation_variances(spectra)?, spectra.beam_levels))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(v_plus: f64, v_minus: f64) -> CorrelationPair {
        CorrelationPair { v_plus, v_minus }
    }

    #[test]
    fn product_examples() {
        let v = duan_product(pair(0.63, 0.76));
        assert!((v.delta - 0.6920).abs() < 1e-4);
        assert!(v.nonseparable);

        let v = duan_product(pair(1.0, 1.0));
        assert_eq!(v.delta, 1.0);
        assert!(!v.nonseparable);

        let v = duan_product(pair(0.5, 2.2));
        assert!((v.delta - 1.0488).abs() < 1e-4);
        assert!(!v.nonseparable);
    }

    #[test]
    fn eof_examples() {
        let e = eof_symmetric(0.6920).unwrap();
        assert!((e - 0.2171).abs() < 1e-4, "{e}");
        // c+ = 1.5625, c- = 0.5625
        let expected = 1.5625 * 1.5625f64.log2() - 0.5625 * 0.5625f64.log2();
        assert!((eof_symmetric(0.25).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 1.47294).abs() < 1e-5);
        assert!(eof_symmetric(1.0 - 1e-9).unwrap() < 1e-6);
    }

    #[test]
    fn eof_errors() {
        assert_eq!(eof_symmetric(1.0), Err(EntanglementError::NotWitnessed(1.0)));
        assert!(matches!(eof_symmetric(0.0), Err(EntanglementError::InvalidDelta(_))));
        assert!(matches!(eof_symmetric(f64::NAN), Err(EntanglementError::InvalidDelta(_))));
    }

    #[test]
    fn correlation_spectra_requirements() {
        let s = CorrelationSpectra {
            amplitude_sum: Some(0.63),
            phase_diff: None,
            beam_levels: None,
        };
        assert_eq!(
            correlation_variances(&s),
            Err(EntanglementError::MissingCombo("phase-difference"))
        );
        let s = CorrelationSpectra {
            amplitude_sum: Some(1.0),
            phase_diff: Some(1.0),
            beam_levels: None,
        };
        assert_eq!(correlation_variances(&s).unwrap(), pair(1.0, 1.0));
    }

    #[test]
    fn report_symmetry_warning() {
        let r = report(pair(0.63, 0.76), Some((60.0, 63.0)));
        assert_eq!(r.warnings.len(), 1);
        assert!(r.warnings[0].starts_with("asymmetric state"));
        assert!(r.eof_bits.is_some());

        let r = report(pair(0.63, 0.76), Some((63.0, 63.2)));
        assert!(r.warnings.is_empty());

        let r = report(pair(1.0, 1.2), Some((1.0, 5.0)));
        assert!(r.eof_bits.is_none() && r.warnings.is_empty());
    }

    #[test]
    fn report_json_shape() {
        let r = report(pair(0.63, 0.76), None);
        let v = serde_json::to_value(&r).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["delta", "eof_bits", "nonseparable", "v_minus", "v_plus"]);
    }
}
