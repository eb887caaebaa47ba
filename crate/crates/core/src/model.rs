//! Declarative network description: sources, passive elements, detectors and
//! measurement requests, plus structural validation.
//!
//! Everything here is plain data. A [`NetworkSpec`] is normally produced by
//! the text parser in [`crate::netdsl`] or assembled programmatically, checked
//! with [`validate`], and handed to [`crate::engine::CompiledNetwork::compile`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Complex carrier amplitude in units of sqrt(photon flux per unit bandwidth).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexAmp {
    pub re: f64,
    pub im: f64,
}

impl ComplexAmp {
    pub const ZERO: ComplexAmp = ComplexAmp { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn real(re: f64) -> Self {
        Self { re, im: 0.0 }
    }

    pub fn from_polar(magnitude: f64, phase: f64) -> Self {
        let c = Complex64::from_polar(magnitude, phase);
        Self { re: c.re, im: c.im }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Mean photon flux, |amp|².
    pub fn flux(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl From<Complex64> for ComplexAmp {
    fn from(c: Complex64) -> Self {
        Self { re: c.re, im: c.im }
    }
}

/// One node of a tabulated quadrature spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumNode {
    pub f_hz: f64,
    pub vx: f64,
    pub vy: f64,
}

/// Amplitude (X) and phase (Y) quadrature noise variances of one input,
/// normalized so that vacuum is (1, 1). X/Y cross-spectra are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QuadSpectrum {
    Constant { vx: f64, vy: f64 },
    /// Nodes sorted by frequency; linear interpolation in between, clamped
    /// to the end values outside the grid.
    Tabulated(Vec<SpectrumNode>),
}

impl QuadSpectrum {
    pub const VACUUM: QuadSpectrum = QuadSpectrum::Constant { vx: 1.0, vy: 1.0 };

    pub fn constant(vx: f64, vy: f64) -> Self {
        QuadSpectrum::Constant { vx, vy }
    }

    /// Builds a constant spectrum from levels in dB relative to vacuum.
    pub fn from_db(vx_db: f64, vy_db: f64) -> Self {
        QuadSpectrum::Constant {
            vx: db_to_variance(vx_db),
            vy: db_to_variance(vy_db),
        }
    }

    /// Evaluates (V_X, V_Y) at frequency `f_hz`. Spectra are even in frequency.
    pub fn eval(&self, f_hz: f64) -> (f64, f64) {
        match self {
            QuadSpectrum::Constant { vx, vy } => (*vx, *vy),
            QuadSpectrum::Tabulated(nodes) => interpolate(nodes, f_hz.abs()),
        }
    }

    pub fn eval_omega(&self, omega: f64) -> (f64, f64) {
        self.eval(omega / (2.0 * std::f64::consts::PI))
    }

    pub fn is_vacuum(&self) -> bool {
        matches!(self, QuadSpectrum::Constant { vx, vy } if *vx == 1.0 && *vy == 1.0)
    }

    /// Scales both quadrature variances by `gain` at every frequency.
    pub fn scaled(&self, gain: f64) -> Self {
        match self {
            QuadSpectrum::Constant { vx, vy } => QuadSpectrum::Constant {
                vx: vx * gain,
                vy: vy * gain,
            },
            QuadSpectrum::Tabulated(nodes) => QuadSpectrum::Tabulated(
                nodes
                    .iter()
                    .map(|n| SpectrumNode {
                        f_hz: n.f_hz,
                        vx: n.vx * gain,
                        vy: n.vy * gain,
                    })
                    .collect(),
            ),
        }
    }

    /// Problems with this spectrum as human-readable strings; empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let check = |vx: f64, vy: f64, at: &str, out: &mut Vec<String>| {
            if !vx.is_finite() || !vy.is_finite() {
                out.push(format!("non-finite variance{at}"));
            } else if vx <= 0.0 || vy <= 0.0 {
                out.push(format!("variance must be positive{at} (vx={vx}, vy={vy})"));
            } else if vx * vy < 1.0 - 1e-12 {
                out.push(format!(
                    "Heisenberg bound violated{at}: vx*vy = {} < 1",
                    vx * vy
                ));
            }
        };
        match self {
            QuadSpectrum::Constant { vx, vy } => check(*vx, *vy, "", &mut out),
            QuadSpectrum::Tabulated(nodes) => {
                if nodes.is_empty() {
                    out.push("tabulated spectrum has no nodes".into());
                }
                for w in nodes.windows(2) {
                    if !(w[1].f_hz > w[0].f_hz) {
                        out.push("tabulated spectrum frequencies must increase strictly".into());
                        break;
                    }
                }
                for n in nodes {
                    if !n.f_hz.is_finite() || n.f_hz < 0.0 {
                        out.push(format!("invalid table frequency {}", n.f_hz));
                    }
                    check(n.vx, n.vy, &format!(" at {} Hz", n.f_hz), &mut out);
                }
            }
        }
        out
    }
}

fn interpolate(nodes: &[SpectrumNode], f: f64) -> (f64, f64) {
    let first = nodes[0];
    let last = nodes[nodes.len() - 1];
    if f <= first.f_hz {
        return (first.vx, first.vy);
    }
    if f >= last.f_hz {
        return (last.vx, last.vy);
    }
    let i = nodes.partition_point(|n| n.f_hz <= f);
    let (a, b) = (nodes[i - 1], nodes[i]);
    let s = (f - a.f_hz) / (b.f_hz - a.f_hz);
    (a.vx + s * (b.vx - a.vx), a.vy + s * (b.vy - a.vy))
}

/// Variance ratio for a level given in dB (10·log10 convention).
pub fn db_to_variance(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn variance_to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SourceSpec {
    Vacuum,
    Coherent { amp: ComplexAmp },
    SqueezedCoherent { amp: ComplexAmp, noise: QuadSpectrum },
}

impl SourceSpec {
    pub fn amp(&self) -> ComplexAmp {
        match self {
            SourceSpec::Vacuum => ComplexAmp::ZERO,
            SourceSpec::Coherent { amp } | SourceSpec::SqueezedCoherent { amp, .. } => *amp,
        }
    }

    pub fn noise(&self) -> QuadSpectrum {
        match self {
            SourceSpec::Vacuum | SourceSpec::Coherent { .. } => QuadSpectrum::VACUUM,
            SourceSpec::SqueezedCoherent { noise, .. } => noise.clone(),
        }
    }

    pub fn is_vacuum(&self) -> bool {
        matches!(self, SourceSpec::Vacuum)
    }
}

/// Length of a delay line, remembered in the form it was declared in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DelaySpan {
    /// Delay time τ in seconds.
    Time(f64),
    /// Path length difference ΔL in meters.
    Length(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySpec {
    pub span: DelaySpan,
    /// Optical carrier phase picked up in the delay line, radians.
    pub carrier_phase: f64,
}

impl DelaySpec {
    pub fn from_tau(tau: f64, carrier_phase: f64) -> Self {
        Self {
            span: DelaySpan::Time(tau),
            carrier_phase,
        }
    }

    pub fn from_length(length: f64, carrier_phase: f64) -> Self {
        Self {
            span: DelaySpan::Length(length),
            carrier_phase,
        }
    }

    /// Delay time in seconds (τ = ΔL/c).
    pub fn tau(&self) -> f64 {
        match self.span {
            DelaySpan::Time(t) => t,
            DelaySpan::Length(l) => l / SPEED_OF_LIGHT,
        }
    }

    /// Path length in meters (ΔL = cτ).
    pub fn length(&self) -> f64 {
        match self.span {
            DelaySpan::Time(t) => t * SPEED_OF_LIGHT,
            DelaySpan::Length(l) => l,
        }
    }
}

/// Passive optical element.
///
/// A beam splitter with amplitude transmittance `t` maps inputs (a, b) to
/// (t·a + r·b, r·a − t·b) with r = sqrt(1 − t²). A loss of efficiency `eta`
/// is a beam splitter of transmittance sqrt(eta) against a hidden vacuum whose
/// second output is discarded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Element {
    BeamSplitter { t: f64 },
    PhaseShift { phi: f64 },
    Delay(DelaySpec),
    Loss { eta: f64 },
}

impl Element {
    pub fn keyword(&self) -> &'static str {
        match self {
            Element::BeamSplitter { .. } => "bs",
            Element::PhaseShift { .. } => "phase",
            Element::Delay(_) => "delay",
            Element::Loss { .. } => "loss",
        }
    }

    pub fn input_arity(&self) -> usize {
        match self {
            Element::BeamSplitter { .. } => 2,
            _ => 1,
        }
    }

    pub fn output_arity(&self) -> usize {
        self.input_arity()
    }
}

/// Reference to an output port: `node` is a source or element name and
/// `index` selects the output (0 for single-output nodes, 0/1 for `out1`/`out2`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PortRef {
    pub node: String,
    pub index: usize,
}

impl PortRef {
    pub fn new(node: impl Into<String>, index: usize) -> Self {
        Self {
            node: node.into(),
            index,
        }
    }

    pub fn out(node: impl Into<String>) -> Self {
        Self::new(node, 0)
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.out{}", self.node, self.index + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDecl {
    pub name: String,
    pub source: SourceSpec,
    /// Set for vacua materialized by compilation; such specs cannot be
    /// serialized back to text.
    #[serde(default)]
    pub injected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementDecl {
    pub name: String,
    pub element: Element,
    /// One entry per input; `None` leaves a beam-splitter port open to vacuum.
    pub inputs: Vec<Option<PortRef>>,
}

/// Detector with unit quantum efficiency. Imperfect detection is modeled by
/// an explicit upstream [`Element::Loss`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub name: String,
    pub input: PortRef,
}

/// Linear combination of detector photocurrents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Combo {
    Sum(Vec<String>),
    Diff(String, String),
    Single(String),
    Weighted(Vec<(String, f64)>),
}

impl Combo {
    pub fn sum(a: &str, b: &str) -> Self {
        Combo::Sum(vec![a.to_string(), b.to_string()])
    }

    pub fn diff(a: &str, b: &str) -> Self {
        Combo::Diff(a.to_string(), b.to_string())
    }

    pub fn single(a: &str) -> Self {
        Combo::Single(a.to_string())
    }

    pub fn weighted<'a>(terms: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        Combo::Weighted(terms.into_iter().map(|(n, w)| (n.to_string(), w)).collect())
    }

    /// Detector names with their signed weights.
    pub fn terms(&self) -> Vec<(&str, f64)> {
        match self {
            Combo::Sum(names) => names.iter().map(|n| (n.as_str(), 1.0)).collect(),
            Combo::Diff(a, b) => vec![(a.as_str(), 1.0), (b.as_str(), -1.0)],
            Combo::Single(a) => vec![(a.as_str(), 1.0)],
            Combo::Weighted(terms) => terms.iter().map(|(n, w)| (n.as_str(), *w)).collect(),
        }
    }
}

impl fmt::Display for Combo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Combo::Sum(names) => write!(f, "sum({})", names.join(",")),
            Combo::Diff(a, b) => write!(f, "diff({a},{b})"),
            Combo::Single(a) => write!(f, "single({a})"),
            Combo::Weighted(terms) => {
                let parts: Vec<String> = terms.iter().map(|(n, w)| format!("{n}={w}")).collect();
                write!(f, "weighted({})", parts.join(","))
            }
        }
    }
}

/// Analysis frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FreqSpec {
    Range { lo: f64, hi: f64, step: f64 },
    List(Vec<f64>),
}

impl FreqSpec {
    /// Enumerates the frequencies; ranges include `hi` when it lies on the grid.
    pub fn points(&self) -> Vec<f64> {
        match self {
            FreqSpec::Range { lo, hi, step } => {
                if !(*step > 0.0) || hi < lo {
                    return Vec::new();
                }
                let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
                (0..n).map(|i| lo + i as f64 * step).collect()
            }
            FreqSpec::List(v) => v.clone(),
        }
    }

    fn problems(&self) -> Option<String> {
        match self {
            FreqSpec::Range { lo, hi, step } => {
                if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
                    Some("non-finite frequency range".into())
                } else if *lo < 0.0 {
                    Some(format!("negative start frequency {lo}"))
                } else if !(*step > 0.0) {
                    Some(format!("frequency step must be positive, got {step}"))
                } else if hi < lo {
                    Some(format!("frequency range end {hi} below start {lo}"))
                } else if (hi - lo) / step > 1e7 {
                    Some("frequency range has more than 1e7 points".into())
                } else {
                    None
                }
            }
            FreqSpec::List(v) if v.is_empty() => Some("empty frequency list".into()),
            FreqSpec::List(v) => v
                .iter()
                .find(|f| !f.is_finite() || **f < 0.0)
                .map(|f| format!("invalid frequency {f}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub name: String,
    pub combo: Combo,
    pub freqs: FreqSpec,
}

/// A whole network: a DAG of sources, elements and detectors.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub sources: Vec<SourceDecl>,
    pub elements: Vec<ElementDecl>,
    pub detectors: Vec<DetectorSpec>,
    pub measurements: Vec<MeasureSpec>,
}

impl NetworkSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn source(mut self, name: &str, source: SourceSpec) -> Self {
        self.sources.push(SourceDecl {
            name: name.to_string(),
            source,
            injected: false,
        });
        self
    }

    pub fn element(mut self, name: &str, element: Element, inputs: Vec<Option<PortRef>>) -> Self {
        self.elements.push(ElementDecl {
            name: name.to_string(),
            element,
            inputs,
        });
        self
    }

    pub fn detector(mut self, name: &str, input: PortRef) -> Self {
        self.detectors.push(DetectorSpec {
            name: name.to_string(),
            input,
        });
        self
    }

    pub fn measure(mut self, name: &str, combo: Combo, freqs: FreqSpec) -> Self {
        self.measurements.push(MeasureSpec {
            name: name.to_string(),
            combo,
            freqs,
        });
        self
    }

    pub fn find_source(&self, name: &str) -> Option<&SourceDecl> {
        self.sources.iter().find(|s| s.name == name)
    }

    pub fn find_element(&self, name: &str) -> Option<&ElementDecl> {
        self.elements.iter().find(|e| e.name == name)
    }

    pub fn find_element_mut(&mut self, name: &str) -> Option<&mut ElementDecl> {
        self.elements.iter_mut().find(|e| e.name == name)
    }

    pub fn find_source_mut(&mut self, name: &str) -> Option<&mut SourceDecl> {
        self.sources.iter_mut().find(|s| s.name == name)
    }

    pub fn has_injected(&self) -> bool {
        self.sources.iter().any(|s| s.injected)
    }

    /// Number of outputs of the node named `name`, if it is a source or element.
    pub fn output_arity(&self, name: &str) -> Option<usize> {
        if self.find_source(name).is_some() {
            Some(1)
        } else {
            self.find_element(name).map(|e| e.element.output_arity())
        }
    }
}

/// A structural problem found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoDetectors,
    DuplicateName(String),
    /// `owner` references a node that does not exist.
    UnknownNode { owner: String, port: PortRef },
    /// `owner` references an output index the node does not have.
    BadPortIndex { owner: String, port: PortRef },
    WrongInputCount { element: String, expected: usize, found: usize },
    UndrivenInput { element: String, input: usize },
    /// An output port feeds more than one consumer.
    PortConsumedTwice { port: PortRef, consumers: Vec<String> },
    Cycle(Vec<String>),
    OutOfRange { owner: String, param: &'static str, value: f64, range: &'static str },
    BadSpectrum { source: String, problem: String },
    Heisenberg { source: String, product: f64 },
    UnknownDetector { measure: String, detector: String },
    EmptyCombo { measure: String },
    BadFrequencies { measure: String, problem: String },
}

impl Violation {
    /// Name of the declaration the violation should be reported against.
    pub fn subject(&self) -> Option<&str> {
        match self {
            Violation::NoDetectors => None,
            Violation::DuplicateName(n) => Some(n),
            Violation::UnknownNode { owner, .. } | Violation::BadPortIndex { owner, .. } => Some(owner),
            Violation::WrongInputCount { element, .. } | Violation::UndrivenInput { element, .. } => {
                Some(element)
            }
            Violation::PortConsumedTwice { consumers, .. } => consumers.last().map(String::as_str),
            Violation::Cycle(nodes) => nodes.first().map(String::as_str),
            Violation::OutOfRange { owner, .. } => Some(owner),
            Violation::BadSpectrum { source, .. } | Violation::Heisenberg { source, .. } => Some(source),
            Violation::UnknownDetector { measure, .. }
            | Violation::EmptyCombo { measure }
            | Violation::BadFrequencies { measure, .. } => Some(measure),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoDetectors => write!(f, "no detectors"),
            Violation::DuplicateName(n) => write!(f, "duplicate name `{n}`"),
            Violation::UnknownNode { owner, port } => {
                write!(f, "`{owner}` references unknown node `{}`", port.node)
            }
            Violation::BadPortIndex { owner, port } => {
                write!(f, "`{owner}` references nonexistent port {port}")
            }
            Violation::WrongInputCount { element, expected, found } => {
                write!(f, "`{element}` takes {expected} input(s), {found} given")
            }
            Violation::UndrivenInput { element, input } => {
                write!(f, "input {} of `{element}` is not driven", input + 1)
            }
            Violation::PortConsumedTwice { port, consumers } => {
                write!(f, "port {port} drives more than one consumer ({})", consumers.join(", "))
            }
            Violation::Cycle(nodes) => write!(f, "cycle in wiring through {}", nodes.join(" -> ")),
            Violation::OutOfRange { owner, param, value, range } => {
                write!(f, "`{owner}`: {param} out of range {range} (got {value})")
            }
            Violation::BadSpectrum { source, problem } => write!(f, "source `{source}`: {problem}"),
            Violation::Heisenberg { source, product } => write!(
                f,
                "source `{source}` violates the Heisenberg bound: vx*vy = {product} < 1"
            ),
            Violation::UnknownDetector { measure, detector } => {
                write!(f, "measurement `{measure}` references unknown detector `{detector}`")
            }
            Violation::EmptyCombo { measure } => write!(f, "measurement `{measure}` has an empty combo"),
            Violation::BadFrequencies { measure, problem } => {
                write!(f, "measurement `{measure}`: {problem}")
            }
        }
    }
}

/// Returns every structural violation in `spec`; an empty list means valid.
pub fn validate(spec: &NetworkSpec) -> Vec<Violation> {
    let mut out = Vec::new();

    if spec.detectors.is_empty() {
        out.push(Violation::NoDetectors);
    }

    let mut seen = HashSet::new();
    let names = spec
        .sources
        .iter()
        .map(|s| &s.name)
        .chain(spec.elements.iter().map(|e| &e.name))
        .chain(spec.detectors.iter().map(|d| &d.name))
        .chain(spec.measurements.iter().map(|m| &m.name));
    for name in names {
        if !seen.insert(name.as_str()) {
            out.push(Violation::DuplicateName(name.clone()));
        }
    }

    for s in &spec.sources {
        check_source(s, &mut out);
    }
    for e in &spec.elements {
        check_element_params(e, &mut out);
    }

    // Port references and fan-out.
    let mut consumers: BTreeMap<PortRef, Vec<String>> = BTreeMap::new();
    let mut check_port = |owner: &str, port: &PortRef, out: &mut Vec<Violation>| -> bool {
        match spec.output_arity(&port.node) {
            None => {
                out.push(Violation::UnknownNode {
                    owner: owner.to_string(),
                    port: port.clone(),
                });
                false
            }
            Some(n) if port.index >= n => {
                out.push(Violation::BadPortIndex {
                    owner: owner.to_string(),
                    port: port.clone(),
                });
                false
            }
            Some(_) => {
                consumers.entry(port.clone()).or_default().push(owner.to_string());
                true
            }
        }
    };
    for e in &spec.elements {
        let arity = e.element.input_arity();
        if e.inputs.len() != arity {
            out.push(Violation::WrongInputCount {
                element: e.name.clone(),
                expected: arity,
                found: e.inputs.len(),
            });
        }
        for (i, input) in e.inputs.iter().enumerate() {
            match input {
                Some(port) => {
                    check_port(&e.name, port, &mut out);
                }
                // Open beam-splitter ports see vacuum; every other input must be driven.
                None if matches!(e.element, Element::BeamSplitter { .. }) => {}
                None => out.push(Violation::UndrivenInput {
                    element: e.name.clone(),
                    input: i,
                }),
            }
        }
    }
    for d in &spec.detectors {
        check_port(&d.name, &d.input, &mut out);
    }
    for (port, users) in consumers {
        if users.len() > 1 {
            out.push(Violation::PortConsumedTwice { port, consumers: users });
        }
    }

    if let Some(cycle) = find_cycle(spec) {
        out.push(Violation::Cycle(cycle));
    }

    let detector_names: HashSet<&str> = spec.detectors.iter().map(|d| d.name.as_str()).collect();
    for m in &spec.measurements {
        let terms = m.combo.terms();
        if terms.is_empty() {
            out.push(Violation::EmptyCombo {
                measure: m.name.clone(),
            });
        }
        for (name, w) in terms {
            if !detector_names.contains(name) {
                out.push(Violation::UnknownDetector {
                    measure: m.name.clone(),
                    detector: name.to_string(),
                });
            }
            if !w.is_finite() {
                out.push(Violation::OutOfRange {
                    owner: m.name.clone(),
                    param: "weight",
                    value: w,
                    range: "(finite)",
                });
            }
        }
        if let Some(problem) = m.freqs.problems() {
            out.push(Violation::BadFrequencies {
                measure: m.name.clone(),
                problem,
            });
        }
    }

    out
}

fn check_source(s: &SourceDecl, out: &mut Vec<Violation>) {
    let amp = s.source.amp();
    if !amp.is_finite() {
        out.push(Violation::OutOfRange {
            owner: s.name.clone(),
            param: "amp",
            value: if amp.re.is_finite() { amp.im } else { amp.re },
            range: "(finite)",
        });
    }
    if let SourceSpec::SqueezedCoherent { noise, .. } = &s.source {
        match noise {
            QuadSpectrum::Constant { vx, vy }
                if vx.is_finite() && vy.is_finite() && *vx > 0.0 && *vy > 0.0 && vx * vy < 1.0 - 1e-12 =>
            {
                out.push(Violation::Heisenberg {
                    source: s.name.clone(),
                    product: vx * vy,
                });
            }
            _ => {
                for problem in noise.problems() {
                    if problem.starts_with("Heisenberg") {
                        let product = match noise {
                            QuadSpectrum::Tabulated(nodes) => nodes
                                .iter()
                                .map(|n| n.vx * n.vy)
                                .fold(f64::INFINITY, f64::min),
                            QuadSpectrum::Constant { vx, vy } => vx * vy,
                        };
                        out.push(Violation::Heisenberg {
                            source: s.name.clone(),
                            product,
                        });
                    } else {
                        out.push(Violation::BadSpectrum {
                            source: s.name.clone(),
                            problem,
                        });
                    }
                }
            }
        }
    }
}

fn check_element_params(e: &ElementDecl, out: &mut Vec<Violation>) {
    let mut range = |param: &'static str, value: f64, ok: bool, range: &'static str| {
        if !ok {
            out.push(Violation::OutOfRange {
                owner: e.name.clone(),
                param,
                value,
                range,
            });
        }
    };
    match &e.element {
        Element::BeamSplitter { t } => range("t", *t, (0.0..=1.0).contains(t), "[0,1]"),
        Element::Loss { eta } => range("eta", *eta, (0.0..=1.0).contains(eta), "[0,1]"),
        Element::PhaseShift { phi } => range("phi", *phi, phi.is_finite(), "(finite)"),
        Element::Delay(d) => {
            let (param, value) = match d.span {
                DelaySpan::Time(t) => ("tau", t),
                DelaySpan::Length(l) => ("length", l),
            };
            range(param, value, value.is_finite() && value >= 0.0, "[0,inf)");
            range(
                "carrier_phase",
                d.carrier_phase,
                d.carrier_phase.is_finite(),
                "(finite)",
            );
        }
    }
}

/// Element indices in a deterministic topological order: among ready
/// elements, the earliest declared goes first. Returns `None` on a cycle.
pub fn topological_order(spec: &NetworkSpec) -> Option<Vec<usize>> {
    let (order, _) = kahn(spec);
    (order.len() == spec.elements.len()).then_some(order)
}

fn find_cycle(spec: &NetworkSpec) -> Option<Vec<String>> {
    let (order, indegree) = kahn(spec);
    (order.len() < spec.elements.len()).then(|| {
        (0..spec.elements.len())
            .filter(|&i| indegree[i] > 0)
            .map(|i| spec.elements[i].name.clone())
            .collect()
    })
}

/// Kahn's algorithm over the element graph. Returns the order found and the
/// residual in-degrees (nonzero for elements stuck on a cycle).
fn kahn(spec: &NetworkSpec) -> (Vec<usize>, Vec<usize>) {
    let index: HashMap<&str, usize> = spec
        .elements
        .iter()
        .enumerate()
        .map(|(i, e)| (e.name.as_str(), i))
        .collect();
    let n = spec.elements.len();
    let mut indegree = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for (i, e) in spec.elements.iter().enumerate() {
        for port in e.inputs.iter().flatten() {
            if let Some(&j) = index.get(port.node.as_str()) {
                indegree[i] += 1;
                succ[j].push(i);
            }
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &j in &succ[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.insert(j);
            }
        }
    }
    (order, indegree)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> NetworkSpec {
        NetworkSpec::new()
            .source("a", SourceSpec::Coherent { amp: ComplexAmp::real(100.0) })
            .detector("D1", PortRef::out("a"))
    }

    #[test]
    fn empty_network_has_no_detectors() {
        let v = validate(&NetworkSpec::new());
        assert_eq!(v, vec![Violation::NoDetectors]);
        assert_eq!(v[0].to_string(), "no detectors");
    }

    #[test]
    fn minimal_network_is_valid() {
        assert!(validate(&minimal()).is_empty());
    }

    #[test]
    fn heisenberg_violation_is_reported() {
        let spec = minimal().source(
            "s",
            SourceSpec::SqueezedCoherent {
                amp: ComplexAmp::real(1.0),
                noise: QuadSpectrum::constant(0.5, 1.0),
            },
        );
        let v = validate(&spec);
        assert_eq!(v.len(), 1);
        assert!(matches!(&v[0], Violation::Heisenberg { source, product } if source == "s" && *product == 0.5));
        assert!(v[0].to_string().contains("Heisenberg bound"));
    }

    #[test]
    fn tabulated_heisenberg_violation() {
        let spec = minimal().source(
            "s",
            SourceSpec::SqueezedCoherent {
                amp: ComplexAmp::real(1.0),
                noise: QuadSpectrum::Tabulated(vec![
                    SpectrumNode { f_hz: 1e6, vx: 0.5, vy: 2.0 },
                    SpectrumNode { f_hz: 2e6, vx: 0.5, vy: 1.5 },
                ]),
            },
        );
        let v = validate(&spec);
        assert!(matches!(&v[..], [Violation::Heisenberg { .. }]));
    }

    #[test]
    fn cycle_is_detected() {
        let spec = minimal()
            .element("P1", Element::PhaseShift { phi: 0.0 }, vec![Some(PortRef::out("P2"))])
            .element("P2", Element::PhaseShift { phi: 0.0 }, vec![Some(PortRef::out("P1"))]);
        let v = validate(&spec);
        assert!(v.iter().any(|x| matches!(x, Violation::Cycle(nodes) if nodes.len() == 2)), "{v:?}");
        assert!(v.iter().any(|x| x.to_string().contains("cycle")));
    }

    #[test]
    fn wiring_errors() {
        let spec = NetworkSpec::new()
            .source("a", SourceSpec::Vacuum)
            .element("B", Element::BeamSplitter { t: 1.2 }, vec![Some(PortRef::out("a")), None])
            .element("L", Element::Loss { eta: 0.5 }, vec![None])
            .detector("D1", PortRef::new("B", 0))
            .detector("D2", PortRef::new("B", 0))
            .detector("D3", PortRef::new("B", 2))
            .detector("D4", PortRef::out("nope"));
        let v = validate(&spec);
        let text: Vec<String> = v.iter().map(ToString::to_string).collect();
        assert!(text.iter().any(|t| t.contains("t out of range [0,1]")), "{text:?}");
        assert!(v.iter().any(|x| matches!(x, Violation::UndrivenInput { element, .. } if element == "L")));
        assert!(v.iter().any(|x| matches!(x, Violation::PortConsumedTwice { .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::BadPortIndex { owner, .. } if owner == "D3")));
        assert!(v.iter().any(|x| matches!(x, Violation::UnknownNode { owner, .. } if owner == "D4")));
    }

    #[test]
    fn duplicate_names_and_bad_measurements() {
        let spec = minimal()
            .source("D1", SourceSpec::Vacuum)
            .measure("M", Combo::diff("D1", "D9"), FreqSpec::Range { lo: 2.0, hi: 1.0, step: 1.0 });
        let v = validate(&spec);
        assert!(v.contains(&Violation::DuplicateName("D1".into())));
        assert!(v.iter().any(|x| matches!(x, Violation::UnknownDetector { detector, .. } if detector == "D9")));
        assert!(v.iter().any(|x| matches!(x, Violation::BadFrequencies { .. })));
    }

    #[test]
    fn validate_is_deterministic() {
        let spec = NetworkSpec::new()
            .element("P1", Element::PhaseShift { phi: f64::NAN }, vec![Some(PortRef::out("P2"))])
            .element("P2", Element::PhaseShift { phi: 0.0 }, vec![Some(PortRef::out("P1"))]);
        assert_eq!(format!("{:?}", validate(&spec)), format!("{:?}", validate(&spec)));
    }

    #[test]
    fn delay_length_and_tau_agree() {
        let d = DelaySpec::from_length(7.32, 0.0);
        assert!((d.tau() * SPEED_OF_LIGHT - 7.32).abs() < 1e-15);
        let d = DelaySpec::from_tau(1e-9, 0.0);
        assert!((d.length() - 0.299792458).abs() < 1e-15);
    }

    #[test]
    fn tabulated_interpolation() {
        let q = QuadSpectrum::Tabulated(vec![
            SpectrumNode { f_hz: 10.0, vx: 1.0, vy: 4.0 },
            SpectrumNode { f_hz: 20.0, vx: 3.0, vy: 8.0 },
        ]);
        assert_eq!(q.eval(5.0), (1.0, 4.0));
        assert_eq!(q.eval(15.0), (2.0, 6.0));
        assert_eq!(q.eval(-15.0), (2.0, 6.0));
        assert_eq!(q.eval(30.0), (3.0, 8.0));
    }

    #[test]
    fn freq_range_points_include_endpoint() {
        let r = FreqSpec::Range { lo: 15e6, hi: 25e6, step: 0.5e6 };
        let p = r.points();
        assert_eq!(p.len(), 21);
        assert_eq!(p[0], 15e6);
        assert!((p[20] - 25e6).abs() < 1e-6);
    }

    #[test]
    fn db_conversions() {
        assert!((db_to_variance(-2.0) - 0.630957).abs() < 1e-6);
        assert!((variance_to_db(63.0) - 17.993).abs() < 1e-3);
    }
}
