//! The entangled-beam phase-measurement experiment as a ready-made network.
//!
//! Two amplitude-squeezed beams with large excess phase noise are mixed on a
//! 50/50 splitter with a π/2 carrier offset. Each output beam passes a
//! detection-efficiency loss and then its own unbalanced Mach–Zehnder. The
//! interferometer's first splitter selects the quadrature: 50/50 reads the
//! phase quadrature (difference signal at θ = π), 1:0 reads the amplitude
//! quadrature (sum signal). In phase mode an extra loss models the imperfect
//! fringe visibility.
//!
//! Detectors `D1`/`D2` belong to the first beam and `D3`/`D4` to the second.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use serde::Serialize;

use crate::engine::{CompiledNetwork, EngineError};
use crate::entanglement::{report, CorrelationPair, EntanglementReport};
use crate::model::{
    db_to_variance, variance_to_db, Combo, ComplexAmp, DelaySpec, Element, NetworkSpec, PortRef, QuadSpectrum,
    SourceSpec,
};
use crate::mzi::visibility_to_loss;
use crate::netdsl::{parse_quantity, Dimension};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadratureMode {
    Amplitude,
    Phase,
}

/// Experimental parameters. Squeezing and excess noise are in dB relative to
/// shot noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaperScenario {
    /// Amplitude-quadrature noise of the two sources (negative = squeezed).
    pub squeezing_db: [f64; 2],
    /// Phase-quadrature noise of both sources.
    pub excess_db: f64,
    /// Carrier amplitude of each source.
    pub amplitude: f64,
    /// Amplitude correlation the detection efficiency is fitted to.
    pub target_v_plus: f64,
    /// Fringe visibility of the phase-measuring interferometers.
    pub visibility: f64,
    pub f_rep: f64,
    /// Number of pulse spacings held by the long arm.
    pub pulses: u32,
}

impl Default for PaperScenario {
    fn default() -> Self {
        PaperScenario {
            squeezing_db: [-2.1, -2.4],
            excess_db: 21.0,
            amplitude: 100.0,
            target_v_plus: 0.63,
            visibility: 0.85,
            f_rep: 82e6,
            pulses: 2,
        }
    }
}

/// Detector combinations evaluated in each mode.
pub mod combos {
    use crate::model::Combo;

    /// Correlation signal: beam-1 readout plus or minus beam-2 readout.
    pub fn correlation(mode: super::QuadratureMode) -> Combo {
        match mode {
            super::QuadratureMode::Amplitude => Combo::weighted([("D1", 1.0), ("D2", 1.0), ("D3", 1.0), ("D4", 1.0)]),
            super::QuadratureMode::Phase => Combo::weighted([("D1", 1.0), ("D2", -1.0), ("D3", -1.0), ("D4", 1.0)]),
        }
    }

    pub fn anticorrelation(mode: super::QuadratureMode) -> Combo {
        match mode {
            super::QuadratureMode::Amplitude => {
                Combo::weighted([("D1", 1.0), ("D2", 1.0), ("D3", -1.0), ("D4", -1.0)])
            }
            super::QuadratureMode::Phase => Combo::weighted([("D1", 1.0), ("D2", -1.0), ("D3", 1.0), ("D4", -1.0)]),
        }
    }

    /// Single-beam readouts `(beam 1, beam 2)`.
    pub fn beams(mode: super::QuadratureMode) -> (Combo, Combo) {
        match mode {
            super::QuadratureMode::Amplitude => (Combo::sum("D1", "D2"), Combo::sum("D3", "D4")),
            super::QuadratureMode::Phase => (Combo::diff("D1", "D2"), Combo::diff("D3", "D4")),
        }
    }
}

/// Normalized level with its dB value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Level {
    pub normalized: f64,
    pub db: f64,
}

impl Level {
    fn new(normalized: f64) -> Self {
        Level {
            normalized,
            db: variance_to_db(normalized),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeReport {
    pub mode: QuadratureMode,
    pub beam1: Level,
    pub beam2: Level,
    pub correlation: Level,
    pub anticorrelation: Level,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub parameters: PaperScenario,
    pub f_m_hz: f64,
    pub detection_efficiency: f64,
    pub phase_path_loss: f64,
    pub amplitude: ModeReport,
    pub phase: ModeReport,
    pub entanglement: EntanglementReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl PaperScenario {
    /// Long-arm delay: `pulses` repetition periods.
    pub fn tau(&self) -> f64 {
        f64::from(self.pulses) / self.f_rep
    }

    /// Measurement frequency where the sideband phase is π.
    pub fn f_m(&self) -> f64 {
        self.f_rep / (2.0 * f64::from(self.pulses))
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.f_m()
    }

    fn source(&self, k: usize) -> SourceSpec {
        SourceSpec::SqueezedCoherent {
            amp: ComplexAmp::real(self.amplitude),
            noise: QuadSpectrum::constant(db_to_variance(self.squeezing_db[k]), db_to_variance(self.excess_db)),
        }
    }

    /// Full network in the given mode with detection efficiency `eta_det`.
    pub fn network(&self, mode: QuadratureMode, eta_det: f64) -> NetworkSpec {
        let (first_t, eta_vis) = match mode {
            QuadratureMode::Amplitude => (1.0, 1.0),
            QuadratureMode::Phase => (FRAC_1_SQRT_2, 1.0 - visibility_to_loss(self.visibility)),
        };
        let mut spec = NetworkSpec::new()
            .source("s1", self.source(0))
            .source("s2", self.source(1))
            .element("P", Element::PhaseShift { phi: FRAC_PI_2 }, vec![Some(PortRef::out("s2"))])
            .element(
                "E",
                Element::BeamSplitter { t: FRAC_1_SQRT_2 },
                vec![Some(PortRef::out("s1")), Some(PortRef::out("P"))],
            );
        for (beam, port, dets) in [(1, 0, ["D1", "D2"]), (2, 1, ["D3", "D4"])] {
            let name = |s: &str| format!("{s}{beam}");
            spec = spec
                .element(&name("Q"), Element::Loss { eta: eta_det }, vec![Some(PortRef::new("E", port))])
                .element(&name("V"), Element::Loss { eta: eta_vis }, vec![Some(PortRef::out(name("Q")))])
                .element(
                    &name("B1_"),
                    Element::BeamSplitter { t: first_t },
                    vec![Some(PortRef::out(name("V"))), None],
                )
                .element(
                    &name("L"),
                    Element::Delay(DelaySpec::from_tau(self.tau(), FRAC_PI_2)),
                    vec![Some(PortRef::new(name("B1_"), 1))],
                )
                .element(
                    &name("B2_"),
                    Element::BeamSplitter { t: FRAC_1_SQRT_2 },
                    vec![Some(PortRef::new(name("B1_"), 0)), Some(PortRef::out(name("L")))],
                )
                .detector(dets[0], PortRef::new(name("B2_"), 0))
                .detector(dets[1], PortRef::new(name("B2_"), 1));
        }
        let f = crate::model::FreqSpec::List(vec![self.f_m()]);
        for mode in [QuadratureMode::Amplitude, QuadratureMode::Phase] {
            let tag = match mode {
                QuadratureMode::Amplitude => "AM",
                QuadratureMode::Phase => "PM",
            };
            let (b1, b2) = combos::beams(mode);
            spec = spec
                .measure(&format!("{tag}_corr"), combos::correlation(mode), f.clone())
                .measure(&format!("{tag}_anti"), combos::anticorrelation(mode), f.clone())
                .measure(&format!("{tag}_beam1"), b1, f.clone())
                .measure(&format!("{tag}_beam2"), b2, f.clone());
        }
        spec
    }

    /// Evaluates one combo on the network of `mode`.
    pub fn evaluate(&self, mode: QuadratureMode, eta_det: f64, combo: &Combo) -> Result<f64, EngineError> {
        let net = CompiledNetwork::compile(&self.network(mode, eta_det))?;
        Ok(net.spectrum_declared(combo, self.omega())?.normalized)
    }

    /// Detection efficiency that brings the amplitude correlation to
    /// `target_v_plus`, with a note when no efficiency in (0, 1] can.
    pub fn fit_detection(&self) -> Result<(f64, Option<String>), EngineError> {
        let v0 = self.evaluate(QuadratureMode::Amplitude, 1.0, &combos::correlation(QuadratureMode::Amplitude))?;
        if v0 >= 1.0 {
            return Ok((1.0, Some(format!("no amplitude correlation below shot noise (v_plus = {v0:.4}); detection efficiency left at 1"))));
        }
        let eta = (1.0 - self.target_v_plus) / (1.0 - v0);
        if eta > 1.0 || eta <= 0.0 {
            let note = format!(
                "target v_plus = {} unreachable from lossless v_plus = {v0:.4}; detection efficiency clamped",
                self.target_v_plus
            );
            return Ok((eta.clamp(f64::MIN_POSITIVE, 1.0), Some(note)));
        }
        Ok((eta, None))
    }

    fn mode_report(&self, mode: QuadratureMode, eta: f64) -> Result<ModeReport, EngineError> {
        let net = CompiledNetwork::compile(&self.network(mode, eta))?;
        let omega = self.omega();
        let level = |c: &Combo| -> Result<Level, EngineError> { Ok(Level::new(net.spectrum_declared(c, omega)?.normalized)) };
        let (b1, b2) = combos::beams(mode);
        Ok(ModeReport {
            mode,
            beam1: level(&b1)?,
            beam2: level(&b2)?,
            correlation: level(&combos::correlation(mode))?,
            anticorrelation: level(&combos::anticorrelation(mode))?,
        })
    }

    pub fn run(&self) -> Result<ScenarioReport, EngineError> {
        let (eta, note) = self.fit_detection()?;
        let amplitude = self.mode_report(QuadratureMode::Amplitude, eta)?;
        let phase = self.mode_report(QuadratureMode::Phase, eta)?;
        let pair = CorrelationPair {
            v_plus: amplitude.correlation.normalized,
            v_minus: phase.correlation.normalized,
        };
        let entanglement = report(pair, Some((phase.beam1.normalized, phase.beam2.normalized)));
        Ok(ScenarioReport {
            parameters: self.clone(),
            f_m_hz: self.f_m(),
            detection_efficiency: eta,
            phase_path_loss: visibility_to_loss(self.visibility),
            amplitude,
            phase,
            entanglement,
            notes: note.into_iter().collect(),
        })
    }

    /// Sets a parameter by name. Keys: `squeezing_db` (both sources),
    /// `squeezing1_db`, `squeezing2_db`, `excess_db`, `amplitude`,
    /// `target_v_plus`, `visibility`, `f_rep`, `pulses`.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), String> {
        let number = |dim| parse_quantity(value, dim).map_err(|d| format!("override {key}: {}", d.message));
        let db = || -> Result<f64, String> {
            let v = value.trim();
            let v = v.strip_suffix("dB").unwrap_or(v);
            v.parse::<f64>().map_err(|_| format!("override {key}: expected a dB value, got `{value}`"))
        };
        match key {
            "squeezing_db" => self.squeezing_db = [db()?; 2],
            "squeezing1_db" => self.squeezing_db[0] = db()?,
            "squeezing2_db" => self.squeezing_db[1] = db()?,
            "excess_db" => self.excess_db = db()?,
            "amplitude" => self.amplitude = number(Dimension::Dimensionless)?,
            "target_v_plus" => self.target_v_plus = number(Dimension::Dimensionless)?,
            "visibility" => {
                let v = number(Dimension::Dimensionless)?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(format!("visibility out of range [0,1] (got {v})"));
                }
                self.visibility = v;
            }
            "f_rep" => self.f_rep = number(Dimension::Frequency)?,
            "pulses" => {
                self.pulses = value
                    .trim()
                    .parse()
                    .ok()
                    .filter(|&n: &u32| n >= 1)
                    .ok_or_else(|| format!("override pulses: expected a positive integer, got `{value}`"))?
            }
            _ => return Err(format!("unknown scenario parameter `{key}`")),
        }
        Ok(())
    }
}
