use std::fmt::Write;

use thiserror::Error;

use crate::model::{validate, Combo, DelaySpan, Element, FreqSpec, NetworkSpec, QuadSpectrum, SourceSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SerializeError {
    /// The spec contains vacua injected by compilation.
    #[error("cannot serialize compiled artifacts")]
    CompiledArtifacts,
    #[error("cannot serialize an invalid network: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("`{0}` is not a valid name")]
    BadName(String),
}

const KEYWORDS: &[&str] = &["source", "bs", "phase", "delay", "loss", "det", "measure", "from", "_"];

fn check_name(name: &str) -> Result<&str, SerializeError> {
    let mut chars = name.chars();
    let ok = chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&name);
    if ok {
        Ok(name)
    } else {
        Err(SerializeError::BadName(name.to_string()))
    }
}

/// Writes the canonical text form of a valid spec. Every quantity is written
/// in its base unit with the shortest exact decimal, so parsing the output
/// reproduces the spec bit for bit.
pub fn serialize(spec: &NetworkSpec) -> Result<String, SerializeError> {
    if spec.has_injected() {
        return Err(SerializeError::CompiledArtifacts);
    }
    let violations = validate(spec);
    if !violations.is_empty() {
        return Err(SerializeError::Invalid(violations.iter().map(ToString::to_string).collect()));
    }
    let mut out = String::new();
    for s in &spec.sources {
        let name = check_name(&s.name)?;
        match &s.source {
            SourceSpec::Vacuum => writeln!(out, "source {name} vacuum;"),
            SourceSpec::Coherent { amp } => {
                write!(out, "source {name} coherent amp={}", amp.re).unwrap();
                if amp.im.to_bits() != 0 {
                    write!(out, " amp_im={}", amp.im).unwrap();
                }
                writeln!(out, ";")
            }
            SourceSpec::SqueezedCoherent { amp, noise } => {
                write!(out, "source {name} squeezed amp={}", amp.re).unwrap();
                if amp.im.to_bits() != 0 {
                    write!(out, " amp_im={}", amp.im).unwrap();
                }
                match noise {
                    QuadSpectrum::Constant { vx, vy } => write!(out, " vx={vx} vy={vy}").unwrap(),
                    QuadSpectrum::Tabulated(nodes) => {
                        let rows: Vec<String> =
                            nodes.iter().map(|n| format!("{}Hz/{}/{}", n.f_hz, n.vx, n.vy)).collect();
                        write!(out, " table=[{}]", rows.join(", ")).unwrap();
                    }
                }
                writeln!(out, ";")
            }
        }
        .unwrap();
    }
    for e in &spec.elements {
        let name = check_name(&e.name)?;
        let ports: Vec<String> = e
            .inputs
            .iter()
            .map(|p| p.as_ref().map_or("_".to_string(), ToString::to_string))
            .collect();
        write!(out, "{} {name} from {}", e.element.keyword(), ports.join(", ")).unwrap();
        match &e.element {
            Element::BeamSplitter { t } => write!(out, " t={t}"),
            Element::PhaseShift { phi } => write!(out, " phi={phi}"),
            Element::Loss { eta } => write!(out, " eta={eta}"),
            Element::Delay(d) => {
                match d.span {
                    DelaySpan::Length(l) => write!(out, " length={l}m").unwrap(),
                    DelaySpan::Time(t) => write!(out, " tau={t}s").unwrap(),
                }
                write!(out, " carrier_phase={}", d.carrier_phase)
            }
        }
        .unwrap();
        writeln!(out, ";").unwrap();
    }
    for d in &spec.detectors {
        writeln!(out, "det {} from {};", check_name(&d.name)?, d.input).unwrap();
    }
    for m in &spec.measurements {
        let name = check_name(&m.name)?;
        let combo = match &m.combo {
            Combo::Sum(dets) => format!("sum({})", dets.join(", ")),
            Combo::Diff(a, b) => format!("diff({a}, {b})"),
            Combo::Single(a) => format!("single({a})"),
            Combo::Weighted(terms) => {
                let parts: Vec<String> = terms.iter().map(|(d, w)| format!("{d}={w}")).collect();
                format!("weighted({})", parts.join(", "))
            }
        };
        let freqs = match &m.freqs {
            FreqSpec::Range { lo, hi, step } => format!("{lo}Hz:{hi}Hz:{step}Hz"),
            FreqSpec::List(v) => {
                let parts: Vec<String> = v.iter().map(|f| format!("{f}Hz")).collect();
                format!("[{}]", parts.join(", "))
            }
        };
        writeln!(out, "measure {name} {combo} freqs={freqs};").unwrap();
    }
    Ok(out)
}
