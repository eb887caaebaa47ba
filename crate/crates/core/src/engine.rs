//! Compilation of a [`NetworkSpec`] into a wire-level pipeline, per-frequency
//! transfer matrices, photocurrent linear forms and noise spectra.
//!
//! Conventions: an input field is `α + δa`. Sideband operators at frequency Ω
//! propagate as `δb(Ω) = A(Ω)·δa(Ω)`; a delay of τ contributes `e^{−iΩτ}`
//! times its carrier phase factor. The linearized photocurrent of detector k
//! is `δn_k = β_k*·δb_k + β_k·δb_k†`, with `β` the detected carrier. Because
//! every element is passive, the creation-operator rows are `conj(A(−Ω))`, so
//! only `A` is ever built.
//!
//! Quadratures follow `δX_φ = e^{iφ}δa† + e^{−iφ}δa`, with X = δX_0 and
//! Y = δX_{π/2}; vacuum has unit variance in both.

use std::collections::HashMap;

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::model::{
    topological_order, validate, Combo, Element, MeasureSpec, NetworkSpec, PortRef, QuadSpectrum,
    SourceSpec, Violation,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("network is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("unknown detector `{0}`")]
    UnknownDetector(String),
    #[error("combo {0} is empty")]
    EmptyCombo(String),
    #[error("expected {expected} input spectra (one per roster entry), got {found}")]
    InputCount { expected: usize, found: usize },
    #[error("combo {0} sees no carrier; shot-noise normalization undefined")]
    NoCarrier(String),
}

/// Where a roster input comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum InputOrigin {
    Declared,
    /// Hidden vacuum of a loss element.
    LossPort { element: String },
    /// Open input of a beam splitter.
    OpenPort { element: String, input: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputSlot {
    pub name: String,
    pub origin: InputOrigin,
    pub source: SourceSpec,
}

impl InputSlot {
    pub fn is_vacuum(&self) -> bool {
        self.source.is_vacuum()
    }
}

/// One step of the compiled pipeline. Wires are indexed densely; wires
/// `0..N` hold the roster inputs, every stage writes fresh output wires.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    BeamSplitter { inputs: [usize; 2], outputs: [usize; 2], t: f64, r: f64 },
    Phase { input: usize, output: usize, phi: f64 },
    Delay { input: usize, output: usize, tau: f64, carrier_phase: f64 },
    /// `vacuum` is the wire of the injected roster input.
    Loss { input: usize, vacuum: usize, output: usize, eta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorTap {
    pub name: String,
    pub wire: usize,
}

/// A network lowered to an ordered element pipeline plus its input roster.
#[derive(Debug, Clone)]
pub struct CompiledNetwork {
    inputs: Vec<InputSlot>,
    stages: Vec<Stage>,
    stage_names: Vec<String>,
    wire_count: usize,
    detectors: Vec<DetectorTap>,
    /// Output wires no detector or element consumes, besides loss rejections.
    dangling: Vec<usize>,
    carriers: Vec<Complex64>,
    measurements: Vec<MeasureSpec>,
}

impl PartialEq for CompiledNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.inputs == other.inputs
            && self.stages == other.stages
            && self.stage_names == other.stage_names
            && self.detectors == other.detectors
            && self.carriers == other.carriers
    }
}

impl CompiledNetwork {
    /// Validates and lowers `spec`. The roster lists declared sources in
    /// declaration order, then injected vacua in pipeline order.
    pub fn compile(spec: &NetworkSpec) -> Result<Self, EngineError> {
        let violations = validate(spec);
        if !violations.is_empty() {
            return Err(EngineError::Invalid(violations));
        }
        let order = topological_order(spec).expect("validated network is acyclic");

        let mut inputs: Vec<InputSlot> = spec
            .sources
            .iter()
            .map(|s| InputSlot {
                name: s.name.clone(),
                origin: InputOrigin::Declared,
                source: s.source.clone(),
            })
            .collect();
        // Injected vacua, in pipeline order.
        for &ei in &order {
            let e = &spec.elements[ei];
            match e.element {
                Element::Loss { .. } => inputs.push(InputSlot {
                    name: format!("{}.vacuum", e.name),
                    origin: InputOrigin::LossPort { element: e.name.clone() },
                    source: SourceSpec::Vacuum,
                }),
                Element::BeamSplitter { .. } => {
                    for (i, _) in e.inputs.iter().enumerate().filter(|(_, p)| p.is_none()) {
                        inputs.push(InputSlot {
                            name: format!("{}.in{}", e.name, i + 1),
                            origin: InputOrigin::OpenPort { element: e.name.clone(), input: i },
                            source: SourceSpec::Vacuum,
                        });
                    }
                }
                _ => {}
            }
        }

        let mut port_wire: HashMap<PortRef, usize> = HashMap::new();
        for (i, s) in spec.sources.iter().enumerate() {
            port_wire.insert(PortRef::out(s.name.clone()), i);
        }
        let mut next_injected = spec.sources.len();
        let mut wire_count = inputs.len();
        let mut consumed = vec![false; inputs.len()];
        let mut stages = Vec::with_capacity(order.len());
        let mut stage_names = Vec::with_capacity(order.len());

        // Resolves an element input to a wire: a driven port, or the next
        // injected vacuum for an open splitter port.
        fn take(
            port: &Option<PortRef>,
            port_wire: &HashMap<PortRef, usize>,
            consumed: &mut [bool],
            next_injected: &mut usize,
        ) -> usize {
            let w = match port {
                Some(p) => port_wire[p],
                None => {
                    *next_injected += 1;
                    *next_injected - 1
                }
            };
            consumed[w] = true;
            w
        }
        fn fresh(wire_count: &mut usize, consumed: &mut Vec<bool>) -> usize {
            *wire_count += 1;
            consumed.push(false);
            *wire_count - 1
        }

        for &ei in &order {
            let e = &spec.elements[ei];
            let stage = match &e.element {
                Element::BeamSplitter { t } => {
                    let a = take(&e.inputs[0], &port_wire, &mut consumed, &mut next_injected);
                    let b = take(&e.inputs[1], &port_wire, &mut consumed, &mut next_injected);
                    let o1 = fresh(&mut wire_count, &mut consumed);
                    let o2 = fresh(&mut wire_count, &mut consumed);
                    port_wire.insert(PortRef::new(e.name.clone(), 0), o1);
                    port_wire.insert(PortRef::new(e.name.clone(), 1), o2);
                    Stage::BeamSplitter {
                        inputs: [a, b],
                        outputs: [o1, o2],
                        t: *t,
                        r: (1.0 - t * t).max(0.0).sqrt(),
                    }
                }
                Element::PhaseShift { phi } => {
                    let input = take(&e.inputs[0], &port_wire, &mut consumed, &mut next_injected);
                    let output = fresh(&mut wire_count, &mut consumed);
                    port_wire.insert(PortRef::out(e.name.clone()), output);
                    Stage::Phase { input, output, phi: *phi }
                }
                Element::Delay(d) => {
                    let input = take(&e.inputs[0], &port_wire, &mut consumed, &mut next_injected);
                    let output = fresh(&mut wire_count, &mut consumed);
                    port_wire.insert(PortRef::out(e.name.clone()), output);
                    Stage::Delay {
                        input,
                        output,
                        tau: d.tau(),
                        carrier_phase: d.carrier_phase,
                    }
                }
                Element::Loss { eta } => {
                    let input = take(&e.inputs[0], &port_wire, &mut consumed, &mut next_injected);
                    let vacuum = take(&None, &port_wire, &mut consumed, &mut next_injected);
                    let output = fresh(&mut wire_count, &mut consumed);
                    port_wire.insert(PortRef::out(e.name.clone()), output);
                    Stage::Loss { input, vacuum, output, eta: *eta }
                }
            };
            stages.push(stage);
            stage_names.push(e.name.clone());
        }
        debug_assert_eq!(next_injected, inputs.len());

        let detectors: Vec<DetectorTap> = spec
            .detectors
            .iter()
            .map(|d| {
                let wire = port_wire[&d.input];
                consumed[wire] = true;
                DetectorTap { name: d.name.clone(), wire }
            })
            .collect();
        let dangling = (0..wire_count).filter(|&w| !consumed[w]).collect();

        let mut net = CompiledNetwork {
            inputs,
            stages,
            stage_names,
            wire_count,
            detectors,
            dangling,
            carriers: Vec::new(),
            measurements: spec.measurements.clone(),
        };
        let source_amps: Vec<Complex64> = net.inputs.iter().map(|s| s.source.amp().to_complex()).collect();
        let wires = net.propagate_amplitudes(&source_amps, 0.0);
        net.carriers = net.detectors.iter().map(|d| wires[d.wire]).collect();
        Ok(net)
    }

    pub fn inputs(&self) -> &[InputSlot] {
        &self.inputs
    }

    pub fn input_count(&self) -> usize {
        self.inputs.len()
    }

    pub fn detector_count(&self) -> usize {
        self.detectors.len()
    }

    pub fn detectors(&self) -> &[DetectorTap] {
        &self.detectors
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Element names, aligned with [`Self::stages`].
    pub fn stage_names(&self) -> &[String] {
        &self.stage_names
    }

    pub fn wire_count(&self) -> usize {
        self.wire_count
    }

    pub fn measurements(&self) -> &[MeasureSpec] {
        &self.measurements
    }

    /// Detected carrier amplitudes β, one per detector.
    pub fn carriers(&self) -> &[Complex64] {
        &self.carriers
    }

    /// Declared noise of every roster input; vacua are (1, 1).
    pub fn input_spectra(&self) -> Vec<QuadSpectrum> {
        self.inputs.iter().map(|s| s.source.noise()).collect()
    }

    pub fn detector_index(&self, name: &str) -> Result<usize, EngineError> {
        self.detectors
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| EngineError::UnknownDetector(name.to_string()))
    }

    /// Resolves a combo into (detector index, weight) pairs.
    pub fn resolve(&self, combo: &Combo) -> Result<Vec<(usize, f64)>, EngineError> {
        let terms = combo.terms();
        if terms.is_empty() {
            return Err(EngineError::EmptyCombo(combo.to_string()));
        }
        terms
            .into_iter()
            .map(|(name, w)| Ok((self.detector_index(name)?, w)))
            .collect()
    }

    /// Propagates one complex value per roster input through the pipeline at
    /// sideband frequency `omega` and returns every wire's value.
    fn propagate_amplitudes(&self, input: &[Complex64], omega: f64) -> Vec<Complex64> {
        let mut wires = vec![Complex64::new(0.0, 0.0); self.wire_count];
        wires[..input.len()].copy_from_slice(input);
        self.apply_stages(&mut wires, |f, v| f * v, omega);
        wires
    }

    /// Runs the pipeline on per-wire row vectors (or scalars) at frequency `omega`.
    fn apply_stages<T, S>(&self, wires: &mut [T], scale: S, omega: f64)
    where
        T: Clone + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
        S: Fn(Complex64, T) -> T,
    {
        for stage in &self.stages {
            match *stage {
                Stage::BeamSplitter { inputs: [a, b], outputs: [o1, o2], t, r } => {
                    let (va, vb) = (wires[a].clone(), wires[b].clone());
                    wires[o1] = va.clone() * t + vb.clone() * r;
                    wires[o2] = va * r - vb * t;
                }
                Stage::Phase { input, output, phi } => {
                    wires[output] = scale(Complex64::from_polar(1.0, phi), wires[input].clone());
                }
                Stage::Delay { input, output, tau, carrier_phase } => {
                    let factor = Complex64::from_polar(1.0, carrier_phase - omega * tau);
                    wires[output] = scale(factor, wires[input].clone());
                }
                Stage::Loss { input, vacuum, output, eta } => {
                    wires[output] =
                        wires[input].clone() * eta.sqrt() + wires[vacuum].clone() * (1.0 - eta).sqrt();
                }
            }
        }
    }

    /// Transfer matrix A(Ω): detector ports (rows) by roster inputs (columns).
    pub fn transfer(&self, omega: f64) -> TransferMatrix {
        let n = self.inputs.len();
        let mut wires: Vec<Row> = vec![Row(vec![Complex64::new(0.0, 0.0); n]); self.wire_count];
        for (j, w) in wires.iter_mut().take(n).enumerate() {
            w.0[j] = Complex64::new(1.0, 0.0);
        }
        self.apply_stages(&mut wires, |f, row| Row(row.0.into_iter().map(|c| c * f).collect()), omega);
        let m = self.detectors.len();
        let mut a = Array2::zeros((m, n));
        for (k, d) in self.detectors.iter().enumerate() {
            for j in 0..n {
                a[[k, j]] = wires[d.wire].0[j];
            }
        }
        TransferMatrix {
            omega,
            a,
            carriers: self.carriers.clone(),
        }
    }

    /// Linear form of the combo photocurrent over all input quadratures.
    pub fn photocurrent_form(&self, combo: &Combo, omega: f64) -> Result<LinearForm, EngineError> {
        let terms = self.resolve(combo)?;
        let plus = self.transfer(omega);
        let minus = self.transfer(-omega);
        let n = self.inputs.len();
        let mut coeffs = vec![QuadCoeffs::default(); n];
        for &(k, weight) in &terms {
            let beta = self.carriers[k];
            for (j, c) in coeffs.iter_mut().enumerate() {
                let u = beta.conj() * plus.a[[k, j]];
                let w = beta * minus.a[[k, j]].conj();
                c.x += (u + w) * 0.5 * weight;
                c.y += (u - w) * Complex64::new(0.0, 0.5) * weight;
            }
        }
        Ok(LinearForm { omega, coeffs })
    }

    /// Noise power of the combo photocurrent at `omega`, in absolute units and
    /// relative to its shot-noise level. `inputs` must be roster-aligned;
    /// vacuum roster entries are always evaluated as (1, 1).
    pub fn spectrum(&self, combo: &Combo, omega: f64, inputs: &[QuadSpectrum]) -> Result<SpectrumPoint, EngineError> {
        if inputs.len() != self.inputs.len() {
            return Err(EngineError::InputCount {
                expected: self.inputs.len(),
                found: inputs.len(),
            });
        }
        let form = self.photocurrent_form(combo, omega)?;
        let mut absolute = 0.0;
        for ((c, slot), spec) in form.coeffs.iter().zip(&self.inputs).zip(inputs) {
            let (vx, vy) = if slot.is_vacuum() { (1.0, 1.0) } else { spec.eval_omega(omega) };
            absolute += c.x.norm_sqr() * vx + c.y.norm_sqr() * vy;
        }
        let snl = self.snl(combo)?;
        if !(snl > 0.0) {
            return Err(EngineError::NoCarrier(combo.to_string()));
        }
        Ok(SpectrumPoint::new(omega, absolute, snl))
    }

    /// [`Self::spectrum`] with every input at its declared noise.
    pub fn spectrum_declared(&self, combo: &Combo, omega: f64) -> Result<SpectrumPoint, EngineError> {
        self.spectrum(combo, omega, &self.input_spectra())
    }

    /// Shot-noise level of a combo: Σ w_k²·|β_k|².
    pub fn snl(&self, combo: &Combo) -> Result<f64, EngineError> {
        Ok(self
            .resolve(combo)?
            .iter()
            .map(|&(k, w)| w * w * self.carriers[k].norm_sqr())
            .sum())
    }

    /// Mean photocurrent of every detector and all pairwise differences.
    pub fn dc_levels(&self) -> DcLevels {
        let means: Vec<(String, f64)> = self
            .detectors
            .iter()
            .zip(&self.carriers)
            .map(|(d, b)| (d.name.clone(), b.norm_sqr()))
            .collect();
        let mut differences = Vec::new();
        for i in 0..means.len() {
            for j in i + 1..means.len() {
                differences.push(DcDifference {
                    first: means[i].0.clone(),
                    second: means[j].0.clone(),
                    value: means[i].1 - means[j].1,
                });
            }
        }
        DcLevels { means, differences }
    }

    /// Total declared source flux Σ|α_j|².
    pub fn source_flux(&self) -> f64 {
        self.inputs.iter().map(|s| s.source.amp().flux()).sum()
    }

    /// Carrier flux leaving the network anywhere but a detector: loss
    /// rejections plus undetected element outputs.
    pub fn discarded_flux(&self) -> f64 {
        let amps: Vec<Complex64> = self.inputs.iter().map(|s| s.source.amp().to_complex()).collect();
        let wires = self.propagate_amplitudes(&amps, 0.0);
        let rejected: f64 = self
            .stages
            .iter()
            .filter_map(|s| match *s {
                Stage::Loss { input, vacuum, eta, .. } => {
                    let out = wires[input] * (1.0 - eta).sqrt() - wires[vacuum] * eta.sqrt();
                    Some(out.norm_sqr())
                }
                _ => None,
            })
            .sum();
        rejected + self.dangling.iter().map(|&w| wires[w].norm_sqr()).sum::<f64>()
    }

    /// True when no carrier or fluctuation leaves the network undetected.
    pub fn is_lossless(&self) -> bool {
        self.dangling.is_empty() && !self.stages.iter().any(|s| matches!(s, Stage::Loss { .. }))
    }
}

/// Row vector over roster inputs; the carrier of linear propagation.
#[derive(Debug, Clone)]
struct Row(Vec<Complex64>);

impl std::ops::Add for Row {
    type Output = Row;
    fn add(self, rhs: Row) -> Row {
        Row(self.0.into_iter().zip(rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl std::ops::Sub for Row {
    type Output = Row;
    fn sub(self, rhs: Row) -> Row {
        Row(self.0.into_iter().zip(rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl std::ops::Mul<f64> for Row {
    type Output = Row;
    fn mul(self, rhs: f64) -> Row {
        Row(self.0.into_iter().map(|a| a * rhs).collect())
    }
}

/// Sideband transfer matrix and detected carriers.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    pub omega: f64,
    /// M×N, detectors by roster inputs.
    pub a: Array2<Complex64>,
    pub carriers: Vec<Complex64>,
}

impl TransferMatrix {
    /// Largest entry of |A·A† − I|.
    pub fn unitarity_defect(&self) -> f64 {
        let (m, n) = self.a.dim();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for k in 0..m {
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    s += self.a[[i, j]] * self.a[[k, j]].conj();
                }
                if i == k {
                    s -= 1.0;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }
}

/// Coefficients of one input's X and Y quadratures.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct QuadCoeffs {
    pub x: Complex64,
    pub y: Complex64,
}

/// Photocurrent fluctuation of a detector combo at Ω expressed over all
/// roster input quadratures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearForm {
    pub omega: f64,
    pub coeffs: Vec<QuadCoeffs>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub omega: f64,
    /// Photocurrent variance density in photon-flux units.
    pub absolute: f64,
    pub snl: f64,
    pub normalized: f64,
    pub db: f64,
}

impl SpectrumPoint {
    pub fn new(omega: f64, absolute: f64, snl: f64) -> Self {
        let normalized = absolute / snl;
        Self {
            omega,
            absolute,
            snl,
            normalized,
            db: 10.0 * normalized.log10(),
        }
    }

    pub fn f_hz(&self) -> f64 {
        self.omega / (2.0 * std::f64::consts::PI)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DcDifference {
    pub first: String,
    pub second: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DcLevels {
    pub means: Vec<(String, f64)>,
    pub differences: Vec<DcDifference>,
}

impl DcLevels {
    pub fn difference(&self, first: &str, second: &str) -> Option<f64> {
        self.differences.iter().find_map(|d| {
            if d.first == first && d.second == second {
                Some(d.value)
            } else if d.first == second && d.second == first {
                Some(-d.value)
            } else {
                None
            }
        })
    }
}
