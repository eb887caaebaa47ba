use std::collections::HashMap;
use std::f64::consts::PI;

use super::lexer::{tokenize, TokKind, Token};
use super::{Diagnostic, ParseError, ParseErrorKind};
use crate::model::{
    db_to_variance, validate, Combo, ComplexAmp, DelaySpan, DelaySpec, DetectorSpec, Element, ElementDecl,
    FreqSpec, MeasureSpec, NetworkSpec, PortRef, QuadSpectrum, SourceDecl, SourceSpec, SpectrumNode,
};

/// Physical dimension expected by an attribute; selects the accepted units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Dimensionless,
    Angle,
    Length,
    Time,
    Frequency,
    /// Noise variance relative to vacuum; plain ratio or `dB`.
    Variance,
}

impl Dimension {
    fn describe(self) -> &'static str {
        match self {
            Dimension::Dimensionless => "a plain number",
            Dimension::Angle => "an angle (rad or deg)",
            Dimension::Length => "a length (m, cm, mm, km)",
            Dimension::Time => "a time (s, ms, us, ns, ps)",
            Dimension::Frequency => "a frequency (Hz, kHz, MHz, GHz)",
            Dimension::Variance => "a variance (plain ratio or dB)",
        }
    }

    /// Converts a literal with optional unit into SI / plain value.
    fn convert(self, value: f64, unit: Option<&str>) -> Option<f64> {
        let scale = match (self, unit) {
            (Dimension::Dimensionless, None) => 1.0,
            (Dimension::Angle, None | Some("rad")) => 1.0,
            (Dimension::Angle, Some("deg")) => PI / 180.0,
            (Dimension::Length, Some("m")) => 1.0,
            (Dimension::Length, Some("cm")) => 1e-2,
            (Dimension::Length, Some("mm")) => 1e-3,
            (Dimension::Length, Some("km")) => 1e3,
            (Dimension::Time, Some("s")) => 1.0,
            (Dimension::Time, Some("ms")) => 1e-3,
            (Dimension::Time, Some("us")) => 1e-6,
            (Dimension::Time, Some("ns")) => 1e-9,
            (Dimension::Time, Some("ps")) => 1e-12,
            (Dimension::Frequency, Some("Hz")) => 1.0,
            (Dimension::Frequency, Some("kHz")) => 1e3,
            (Dimension::Frequency, Some("MHz")) => 1e6,
            (Dimension::Frequency, Some("GHz")) => 1e9,
            (Dimension::Variance, None) => 1.0,
            (Dimension::Variance, Some("dB")) => return Some(db_to_variance(value)),
            _ => return None,
        };
        // Base units keep the literal bit-exact.
        Some(if scale == 1.0 { value } else { value * scale })
    }
}

/// Parses `text` (e.g. `82MHz`) as a single quantity of the given dimension.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, Diagnostic> {
    let toks = tokenize(text)?;
    match toks.as_slice() {
        [tok @ Token { kind: TokKind::Number { value, unit }, .. }, Token { kind: TokKind::Eof, .. }] => dim
            .convert(*value, unit.as_deref())
            .ok_or_else(|| Diagnostic::at(text, tok.offset, tok.len, format!("unit mismatch: expected {}", dim.describe()))),
        _ => Err(Diagnostic::at(text, 0, text.len(), format!("expected {}", dim.describe()))),
    }
}

/// Parses and validates a program. Syntax errors are reported first; a
/// well-formed program that describes an invalid network fails with
/// [`ParseErrorKind::Validation`], each violation positioned at the name of
/// the declaration it concerns.
pub fn parse(text: &str) -> Result<NetworkSpec, ParseError> {
    let (spec, names) = parse_inner(text)?;
    let violations = validate(&spec);
    if violations.is_empty() {
        return Ok(spec);
    }
    let first_token = tokenize(text)
        .ok()
        .and_then(|t| t.into_iter().next())
        .filter(|t| t.kind != TokKind::Eof);
    let diagnostics = violations
        .iter()
        .map(|v| {
            let (offset, len) = v
                .subject()
                .and_then(|s| names.get(s).copied())
                .or_else(|| first_token.as_ref().map(|t| (t.offset, t.len)))
                .unwrap_or((0, 0));
            Diagnostic::at(text, offset, len, v.to_string())
        })
        .collect();
    Err(ParseError {
        kind: ParseErrorKind::Validation,
        diagnostics,
    })
}

/// Parses without running network validation.
pub fn parse_unchecked(text: &str) -> Result<NetworkSpec, ParseError> {
    parse_inner(text).map(|(spec, _)| spec)
}

/// Sets one attribute of a named declaration, e.g. key `L1.carrier_phase`
/// with value `1.2`, using the same units and range rules as the parser.
pub fn apply_override(spec: &mut NetworkSpec, key: &str, value: &str) -> Result<(), String> {
    let (name, attr) = key
        .split_once('.')
        .ok_or_else(|| format!("override key `{key}` must look like NAME.attribute"))?;
    let quantity = |dim| parse_quantity(value, dim).map_err(|d| format!("override {key}: {}", d.message));
    if let Some(e) = spec.find_element_mut(name) {
        match (&mut e.element, attr) {
            (Element::BeamSplitter { t }, "t") => *t = checked_unit(quantity(Dimension::Dimensionless)?, "t")?,
            (Element::Loss { eta }, "eta") => *eta = checked_unit(quantity(Dimension::Dimensionless)?, "eta")?,
            (Element::PhaseShift { phi }, "phi") => *phi = quantity(Dimension::Angle)?,
            (Element::Delay(d), "carrier_phase") => d.carrier_phase = quantity(Dimension::Angle)?,
            (Element::Delay(d), "tau") => d.span = DelaySpan::Time(quantity(Dimension::Time)?),
            (Element::Delay(d), "length") => d.span = DelaySpan::Length(quantity(Dimension::Length)?),
            (el, _) => return Err(format!("{} `{name}` has no attribute `{attr}`", el.keyword())),
        }
        return Ok(());
    }
    if let Some(s) = spec.find_source_mut(name) {
        match (&mut s.source, attr) {
            (SourceSpec::Coherent { amp } | SourceSpec::SqueezedCoherent { amp, .. }, "amp") => {
                let m = quantity(Dimension::Dimensionless)?;
                let phase = amp.im.atan2(amp.re);
                *amp = ComplexAmp::from_polar(m, phase);
            }
            (SourceSpec::Coherent { amp } | SourceSpec::SqueezedCoherent { amp, .. }, "phase") => {
                *amp = ComplexAmp::from_polar(amp.flux().sqrt(), quantity(Dimension::Angle)?);
            }
            (SourceSpec::SqueezedCoherent { noise, .. }, "vx" | "vy") => {
                let v = quantity(Dimension::Variance)?;
                let (vx, vy) = match noise {
                    QuadSpectrum::Constant { vx, vy } => (*vx, *vy),
                    QuadSpectrum::Tabulated(_) => {
                        return Err(format!("source `{name}` has a tabulated spectrum; cannot override {attr}"))
                    }
                };
                *noise = if attr == "vx" {
                    QuadSpectrum::constant(v, vy)
                } else {
                    QuadSpectrum::constant(vx, v)
                };
            }
            _ => return Err(format!("source `{name}` has no attribute `{attr}`")),
        }
        return Ok(());
    }
    Err(format!("override refers to unknown element or source `{name}`"))
}

fn checked_unit(v: f64, param: &str) -> Result<f64, String> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{param} out of range [0,1] (got {v})"))
    }
}

type Names = HashMap<String, (usize, usize)>;

fn parse_inner(text: &str) -> Result<(NetworkSpec, Names), ParseError> {
    let syntax = |d: Diagnostic| ParseError {
        kind: ParseErrorKind::Syntax,
        diagnostics: vec![d],
    };
    let toks = tokenize(text).map_err(syntax)?;
    let mut p = Parser {
        src: text,
        toks,
        pos: 0,
        spec: NetworkSpec::new(),
        names: HashMap::new(),
    };
    let mut diagnostics = Vec::new();
    while !p.at_eof() {
        if let Err(d) = p.statement() {
            diagnostics.push(d);
            p.recover();
        }
    }
    if diagnostics.is_empty() {
        Ok((p.spec, p.names))
    } else {
        Err(ParseError {
            kind: ParseErrorKind::Syntax,
            diagnostics,
        })
    }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
    spec: NetworkSpec,
    names: Names,
}

/// Attribute value as written.
enum Value {
    Number { value: f64, unit: Option<String>, tok: Token },
    Range { lo: (f64, Option<String>), hi: (f64, Option<String>), step: (f64, Option<String>), tok: Token },
    /// `[a/b/c, ...]` rows of `/`-separated numbers.
    Table { rows: Vec<Vec<(f64, Option<String>, Token)>>, tok: Token },
}

impl Value {
    fn tok(&self) -> &Token {
        match self {
            Value::Number { tok, .. } | Value::Range { tok, .. } | Value::Table { tok, .. } => tok,
        }
    }
}

/// A statement's `from` ports (with the `from` token) and its attributes.
type Clauses = (Option<(Vec<Option<PortRef>>, Token)>, Vec<Attr>);

struct Attr {
    key: String,
    key_tok: Token,
    value: Value,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn at_eof(&self) -> bool {
        self.peek().kind == TokKind::Eof
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.kind != TokKind::Eof {
            self.pos += 1;
        }
        t
    }

    /// Diagnostic at `tok`; end of input is reported at the last real token.
    fn error_at(&self, tok: &Token, message: impl Into<String>) -> Diagnostic {
        if tok.kind == TokKind::Eof {
            if let Some(last) = self.toks.iter().rev().find(|t| t.kind != TokKind::Eof) {
                return Diagnostic::at(self.src, last.offset, last.len, message);
            }
        }
        Diagnostic::at(self.src, tok.offset, tok.len, message)
    }

    fn expected(&self, what: &str) -> Diagnostic {
        let tok = self.peek();
        self.error_at(tok, format!("expected {what}, found {}", tok.describe()))
    }

    fn recover(&mut self) {
        while !self.at_eof() {
            if self.bump().kind == TokKind::Punct(';') {
                break;
            }
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek().kind == TokKind::Punct(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<Token, Diagnostic> {
        if self.peek().kind == TokKind::Punct(c) {
            Ok(self.bump())
        } else {
            Err(self.expected(&format!("`{c}`")))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Token), Diagnostic> {
        match &self.peek().kind {
            TokKind::Ident(s) => {
                let s = s.clone();
                Ok((s, self.bump()))
            }
            _ => Err(self.expected(what)),
        }
    }

    /// Declaration name: plain identifier, unique across the program.
    fn declare(&mut self) -> Result<String, Diagnostic> {
        let (name, tok) = self.expect_ident("a name")?;
        if name.contains('.') || name == "_" {
            return Err(self.error_at(&tok, format!("`{name}` is not a valid name")));
        }
        if self.names.contains_key(&name) {
            return Err(self.error_at(&tok, format!("duplicate name `{name}`")));
        }
        self.names.insert(name.clone(), (tok.offset, tok.len));
        Ok(name)
    }

    fn statement(&mut self) -> Result<(), Diagnostic> {
        let (kw, kw_tok) = self.expect_ident("a statement keyword")?;
        match kw.as_str() {
            "source" => self.source(),
            "bs" | "phase" | "delay" | "loss" => self.element(&kw, &kw_tok),
            "det" => self.detector(),
            "measure" => self.measure(),
            _ => Err(self.error_at(
                &kw_tok,
                format!("unknown element keyword `{kw}` (expected source, bs, phase, delay, loss, det or measure)"),
            )),
        }
    }

    fn port(&mut self, allow_open: bool) -> Result<Option<PortRef>, Diagnostic> {
        let (text, tok) = self.expect_ident("a port")?;
        if text == "_" {
            return if allow_open {
                Ok(None)
            } else {
                Err(self.error_at(&tok, "open port `_` only allowed on beam splitters"))
            };
        }
        let (node, index) = match text.split_once('.') {
            None => (text.as_str(), 0),
            Some((node, "out" | "out1")) => (node, 0),
            Some((node, "out2")) => (node, 1),
            Some(_) => {
                return Err(self.error_at(
                    &tok,
                    format!("bad port `{text}` (expected NAME, NAME.out1 or NAME.out2)"),
                ))
            }
        };
        Ok(Some(PortRef::new(node, index)))
    }

    fn number(&mut self) -> Result<(f64, Option<String>, Token), Diagnostic> {
        match &self.peek().kind {
            TokKind::Number { value, unit } => {
                let (v, u) = (*value, unit.clone());
                Ok((v, u, self.bump()))
            }
            _ => Err(self.expected("a number")),
        }
    }

    fn value(&mut self) -> Result<Value, Diagnostic> {
        if self.peek().kind == TokKind::Punct('[') {
            let open = self.bump();
            let mut rows = Vec::new();
            loop {
                let mut row = vec![self.number()?];
                while self.eat_punct('/') {
                    row.push(self.number()?);
                }
                rows.push(row);
                if !self.eat_punct(',') {
                    break;
                }
            }
            self.expect_punct(']')?;
            return Ok(Value::Table { rows, tok: open });
        }
        let (value, unit, tok) = self.number()?;
        if self.eat_punct(':') {
            let hi = self.number()?;
            self.expect_punct(':')?;
            let step = self.number()?;
            return Ok(Value::Range {
                lo: (value, unit),
                hi: (hi.0, hi.1),
                step: (step.0, step.1),
                tok,
            });
        }
        Ok(Value::Number { value, unit, tok })
    }

    /// Parses `from` clauses and `key=value` attributes up to the `;`.
    fn clauses(&mut self, allow_from: bool) -> Result<Clauses, Diagnostic> {
        let mut from = None;
        let mut attrs: Vec<Attr> = Vec::new();
        loop {
            let tok = self.peek().clone();
            match &tok.kind {
                TokKind::Punct(';') => {
                    self.bump();
                    break;
                }
                TokKind::Ident(word) if word == "from" && allow_from => {
                    self.bump();
                    if from.is_some() {
                        return Err(self.error_at(&tok, "duplicate `from` clause"));
                    }
                    let mut ports = vec![self.port(true)?];
                    while self.eat_punct(',') {
                        ports.push(self.port(true)?);
                    }
                    from = Some((ports, tok));
                }
                TokKind::Ident(key) => {
                    let key = key.clone();
                    self.bump();
                    self.expect_punct('=')?;
                    let value = self.value()?;
                    if attrs.iter().any(|a| a.key == key) {
                        return Err(self.error_at(&tok, format!("duplicate attribute `{key}`")));
                    }
                    attrs.push(Attr { key, key_tok: tok, value });
                }
                _ => return Err(self.expected("an attribute or `;`")),
            }
        }
        Ok((from, attrs))
    }

    fn scalar(&self, attr: &Attr, dim: Dimension) -> Result<f64, Diagnostic> {
        match &attr.value {
            Value::Number { value, unit, tok } => self.convert(*value, unit.as_deref(), tok, dim, &attr.key),
            v => Err(self.error_at(v.tok(), format!("`{}` expects {}", attr.key, dim.describe()))),
        }
    }

    fn convert(&self, value: f64, unit: Option<&str>, tok: &Token, dim: Dimension, key: &str) -> Result<f64, Diagnostic> {
        let v = dim.convert(value, unit).ok_or_else(|| {
            let found = unit.map_or("no unit".to_string(), |u| format!("`{u}`"));
            self.error_at(tok, format!("unit mismatch: `{key}` expects {}, found {found}", dim.describe()))
        })?;
        if !v.is_finite() {
            return Err(self.error_at(tok, format!("`{key}` is not finite")));
        }
        Ok(v)
    }

    fn unit_interval(&self, attr: &Attr) -> Result<f64, Diagnostic> {
        let v = self.scalar(attr, Dimension::Dimensionless)?;
        if !(0.0..=1.0).contains(&v) {
            return Err(self.error_at(attr.value.tok(), format!("{} out of range [0,1]", attr.key)));
        }
        Ok(v)
    }

    fn positive_variance(&self, attr: &Attr) -> Result<f64, Diagnostic> {
        let v = self.scalar(attr, Dimension::Variance)?;
        if !(v > 0.0) {
            return Err(self.error_at(attr.value.tok(), format!("{} must be a positive variance", attr.key)));
        }
        Ok(v)
    }

    fn reject_unknown(&self, attrs: &[Attr], allowed: &[&str], what: &str) -> Result<(), Diagnostic> {
        match attrs.iter().find(|a| !allowed.contains(&a.key.as_str())) {
            Some(a) => Err(self.error_at(
                &a.key_tok,
                format!("unknown attribute `{}` for {what} (expected one of: {})", a.key, allowed.join(", ")),
            )),
            None => Ok(()),
        }
    }

    fn source(&mut self) -> Result<(), Diagnostic> {
        let name = self.declare()?;
        let name_pos = self.names[&name];
        let (kind, kind_tok) = self.expect_ident("a source kind (vacuum, coherent, squeezed)")?;
        let (_, attrs) = self.clauses(false)?;
        let get = |k: &str| attrs.iter().find(|a| a.key == k);
        let missing = |k: &str| {
            Diagnostic::at(self.src, name_pos.0, name_pos.1, format!("source `{name}` is missing `{k}`"))
        };
        let amp = |this: &Self| -> Result<ComplexAmp, Diagnostic> {
            let a = get("amp").ok_or_else(|| missing("amp"))?;
            let re = this.scalar(a, Dimension::Dimensionless)?;
            match (get("amp_im"), get("phase")) {
                (Some(i), Some(p)) => Err(this.error_at(
                    &p.key_tok,
                    format!("`phase` conflicts with `{}`", i.key),
                )),
                (Some(i), None) => Ok(ComplexAmp::new(re, this.scalar(i, Dimension::Dimensionless)?)),
                (None, Some(p)) => Ok(ComplexAmp::from_polar(re, this.scalar(p, Dimension::Angle)?)),
                (None, None) => Ok(ComplexAmp::real(re)),
            }
        };
        let source = match kind.as_str() {
            "vacuum" => {
                self.reject_unknown(&attrs, &[], "a vacuum source")?;
                SourceSpec::Vacuum
            }
            "coherent" => {
                self.reject_unknown(&attrs, &["amp", "amp_im", "phase"], "a coherent source")?;
                SourceSpec::Coherent { amp: amp(self)? }
            }
            "squeezed" => {
                self.reject_unknown(&attrs, &["amp", "amp_im", "phase", "vx", "vy", "table"], "a squeezed source")?;
                let amp = amp(self)?;
                let noise = match (get("table"), get("vx"), get("vy")) {
                    (Some(t), None, None) => self.table(t)?,
                    (Some(t), _, _) => {
                        return Err(self.error_at(&t.key_tok, "`table` cannot be combined with `vx`/`vy`"))
                    }
                    (None, Some(vx), Some(vy)) => {
                        QuadSpectrum::constant(self.positive_variance(vx)?, self.positive_variance(vy)?)
                    }
                    (None, None, _) => return Err(missing("vx")),
                    (None, _, None) => return Err(missing("vy")),
                };
                SourceSpec::SqueezedCoherent { amp, noise }
            }
            other => {
                return Err(self.error_at(
                    &kind_tok,
                    format!("unknown source kind `{other}` (expected vacuum, coherent or squeezed)"),
                ))
            }
        };
        self.spec.sources.push(SourceDecl {
            name,
            source,
            injected: false,
        });
        Ok(())
    }

    fn table(&self, attr: &Attr) -> Result<QuadSpectrum, Diagnostic> {
        let Value::Table { rows, .. } = &attr.value else {
            return Err(self.error_at(attr.value.tok(), "`table` expects [f/vx/vy, ...]"));
        };
        let mut nodes = Vec::with_capacity(rows.len());
        for row in rows {
            let [(f, fu, ft), (vx, vxu, vxt), (vy, vyu, vyt)] = row.as_slice() else {
                let tok = &row[0].2;
                return Err(self.error_at(tok, "table rows must have the form f/vx/vy"));
            };
            let node = SpectrumNode {
                f_hz: self.convert(*f, fu.as_deref(), ft, Dimension::Frequency, "table frequency")?,
                vx: self.convert(*vx, vxu.as_deref(), vxt, Dimension::Variance, "table vx")?,
                vy: self.convert(*vy, vyu.as_deref(), vyt, Dimension::Variance, "table vy")?,
            };
            if !(node.vx > 0.0 && node.vy > 0.0) {
                return Err(self.error_at(vxt, "table variances must be positive"));
            }
            if let Some(prev) = nodes.last() {
                let prev: &SpectrumNode = prev;
                if !(node.f_hz > prev.f_hz) {
                    return Err(self.error_at(ft, "table frequencies must increase strictly"));
                }
            }
            nodes.push(node);
        }
        Ok(QuadSpectrum::Tabulated(nodes))
    }

    fn element(&mut self, kw: &str, kw_tok: &Token) -> Result<(), Diagnostic> {
        let name = self.declare()?;
        let name_pos = self.names[&name];
        let (from, attrs) = self.clauses(true)?;
        let get = |k: &str| attrs.iter().find(|a| a.key == k);
        let missing = |k: &str| Diagnostic::at(self.src, name_pos.0, name_pos.1, format!("`{name}` is missing `{k}`"));
        let element = match kw {
            "bs" => {
                self.reject_unknown(&attrs, &["t"], "bs")?;
                Element::BeamSplitter {
                    t: self.unit_interval(get("t").ok_or_else(|| missing("t"))?)?,
                }
            }
            "phase" => {
                self.reject_unknown(&attrs, &["phi"], "phase")?;
                Element::PhaseShift {
                    phi: self.scalar(get("phi").ok_or_else(|| missing("phi"))?, Dimension::Angle)?,
                }
            }
            "loss" => {
                self.reject_unknown(&attrs, &["eta"], "loss")?;
                Element::Loss {
                    eta: self.unit_interval(get("eta").ok_or_else(|| missing("eta"))?)?,
                }
            }
            "delay" => {
                self.reject_unknown(&attrs, &["length", "tau", "carrier_phase"], "delay")?;
                let span = match (get("length"), get("tau")) {
                    (Some(l), None) => DelaySpan::Length(self.scalar(l, Dimension::Length)?),
                    (None, Some(t)) => DelaySpan::Time(self.scalar(t, Dimension::Time)?),
                    (Some(_), Some(t)) => return Err(self.error_at(&t.key_tok, "give either `length` or `tau`, not both")),
                    (None, None) => return Err(missing("length")),
                };
                let value = match span {
                    DelaySpan::Length(v) | DelaySpan::Time(v) => v,
                };
                if value < 0.0 {
                    let a = get("length").or(get("tau")).unwrap();
                    return Err(self.error_at(a.value.tok(), "delay must not be negative"));
                }
                let carrier_phase = match get("carrier_phase") {
                    Some(a) => self.scalar(a, Dimension::Angle)?,
                    None => 0.0,
                };
                Element::Delay(DelaySpec { span, carrier_phase })
            }
            _ => unreachable!("dispatched on element keywords"),
        };
        let arity = element.input_arity();
        let inputs = match from {
            None if arity == 2 => vec![None, None],
            None => return Err(self.error_at(kw_tok, format!("`{name}` needs a `from` clause"))),
            Some((ports, tok)) => {
                if ports.len() > arity {
                    return Err(self.error_at(&tok, format!("`{name}` takes at most {arity} input(s)")));
                }
                let mut ports = ports;
                ports.resize(arity, None);
                ports
            }
        };
        self.spec.elements.push(ElementDecl { name, element, inputs });
        Ok(())
    }

    fn detector(&mut self) -> Result<(), Diagnostic> {
        let name = self.declare()?;
        let (word, tok) = self.expect_ident("`from`")?;
        if word != "from" {
            return Err(self.error_at(&tok, format!("expected `from`, found `{word}`")));
        }
        let input = self.port(false)?.expect("closed port");
        self.expect_punct(';')?;
        self.spec.detectors.push(DetectorSpec { name, input });
        Ok(())
    }

    fn detector_list(&mut self) -> Result<Vec<String>, Diagnostic> {
        let mut out = vec![self.expect_ident("a detector name")?.0];
        while self.eat_punct(',') {
            out.push(self.expect_ident("a detector name")?.0);
        }
        Ok(out)
    }

    fn measure(&mut self) -> Result<(), Diagnostic> {
        let name = self.declare()?;
        let name_pos = self.names[&name];
        let (kind, kind_tok) = self.expect_ident("a combo (sum, diff, single, weighted)")?;
        self.expect_punct('(')?;
        let combo = match kind.as_str() {
            "sum" => Combo::Sum(self.detector_list()?),
            "diff" => {
                let list = self.detector_list()?;
                match <[String; 2]>::try_from(list) {
                    Ok([a, b]) => Combo::Diff(a, b),
                    Err(_) => return Err(self.error_at(&kind_tok, "diff takes exactly two detectors")),
                }
            }
            "single" => Combo::Single(self.expect_ident("a detector name")?.0),
            "weighted" => {
                let mut terms = Vec::new();
                loop {
                    let det = self.expect_ident("a detector name")?.0;
                    self.expect_punct('=')?;
                    let (v, u, t) = self.number()?;
                    terms.push((det, self.convert(v, u.as_deref(), &t, Dimension::Dimensionless, "weight")?));
                    if !self.eat_punct(',') {
                        break;
                    }
                }
                Combo::Weighted(terms)
            }
            other => {
                return Err(self.error_at(
                    &kind_tok,
                    format!("unknown combo `{other}` (expected sum, diff, single or weighted)"),
                ))
            }
        };
        self.expect_punct(')')?;
        let (_, attrs) = self.clauses(false)?;
        self.reject_unknown(&attrs, &["freqs"], "measure")?;
        let Some(f) = attrs.iter().find(|a| a.key == "freqs") else {
            return Err(Diagnostic::at(self.src, name_pos.0, name_pos.1, format!("`{name}` is missing `freqs`")));
        };
        let freqs = match &f.value {
            Value::Number { value, unit, tok } => {
                FreqSpec::List(vec![self.convert(*value, unit.as_deref(), tok, Dimension::Frequency, "freqs")?])
            }
            Value::Range { lo, hi, step, tok } => {
                let conv = |(v, u): &(f64, Option<String>)| self.convert(*v, u.as_deref(), tok, Dimension::Frequency, "freqs");
                FreqSpec::Range {
                    lo: conv(lo)?,
                    hi: conv(hi)?,
                    step: conv(step)?,
                }
            }
            Value::Table { rows, .. } => {
                let mut list = Vec::with_capacity(rows.len());
                for row in rows {
                    let [(v, u, t)] = row.as_slice() else {
                        return Err(self.error_at(&row[0].2, "`freqs` list entries are single frequencies"));
                    };
                    list.push(self.convert(*v, u.as_deref(), t, Dimension::Frequency, "freqs")?);
                }
                FreqSpec::List(list)
            }
        };
        self.spec.measurements.push(MeasureSpec { name, combo, freqs });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MZ: &str = "\
# phase-measuring interferometer
source a squeezed amp=140 vx=-2.1dB vy=+18dB;
source v vacuum;
bs B1 from a, v t=0.7071067811865476;
delay L1 from B1.out2 length=7.32m carrier_phase=1.5707963;
bs B2 from B1.out1, L1 t=0.7071067811865476;
det D1 from B2.out1;
det D2 from B2.out2;
measure PM diff(D1,D2) freqs=15MHz:25MHz:0.5MHz;
";

    #[test]
    #[allow(clippy::approx_constant)]
    fn parses_interferometer() {
        let spec = parse(MZ).unwrap();
        assert_eq!(spec.sources.len(), 2);
        assert_eq!(spec.elements.len(), 3);
        let Element::Delay(d) = spec.elements[1].element else { panic!() };
        assert_eq!(d.length(), 7.32);
        assert_eq!(d.carrier_phase, 1.5707963);
        assert_eq!(spec.elements[2].inputs, vec![Some(PortRef::new("B1", 0)), Some(PortRef::out("L1"))]);
        let SourceSpec::SqueezedCoherent { noise: QuadSpectrum::Constant { vx, vy }, .. } = spec.sources[0].source else {
            panic!()
        };
        assert!((vx - 0.616595).abs() < 1e-6 && (vy - 63.0957).abs() < 1e-4);
        assert_eq!(spec.measurements[0].combo, Combo::diff("D1", "D2"));
        assert_eq!(spec.measurements[0].freqs.points().len(), 21);
    }

    #[test]
    fn quantities() {
        assert_eq!(parse_quantity("82MHz", Dimension::Frequency).unwrap(), 82e6);
        assert_eq!(parse_quantity("24.4ns", Dimension::Time).unwrap(), 24.4e-9);
        assert!((parse_quantity("90deg", Dimension::Angle).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!(parse_quantity("5m", Dimension::Time).unwrap_err().message.contains("unit mismatch"));
        assert!(parse_quantity("5 6", Dimension::Time).is_err());
    }

    #[test]
    fn unit_mismatch_is_positioned() {
        let err = parse("source a coherent amp=1;\ndelay L from a length=5ns;\ndet D from L;").unwrap_err();
        let d = &err.diagnostics[0];
        assert_eq!(err.kind, ParseErrorKind::Syntax);
        assert!(d.message.contains("unit mismatch"));
        assert_eq!((d.line, d.column), (2, 23));
    }

    #[test]
    fn unknown_keyword_and_duplicates() {
        let err = parse("source a coherent amp=1;\nmirror M from a;\nsource a vacuum;\ndet D from a;").unwrap_err();
        assert_eq!(err.diagnostics.len(), 2);
        assert!(err.diagnostics[0].message.contains("unknown element keyword `mirror`"));
        assert_eq!((err.diagnostics[0].line, err.diagnostics[0].column), (2, 1));
        assert!(err.diagnostics[1].message.contains("duplicate name `a`"));
        assert_eq!((err.diagnostics[1].line, err.diagnostics[1].column), (3, 8));
    }

    #[test]
    fn missing_semicolon_at_end() {
        let err = parse("source a coherent amp=1; det D from a").unwrap_err();
        let d = &err.diagnostics[0];
        assert!(d.message.contains("expected `;`"), "{}", d.message);
        assert_eq!(d.column, 37);
    }

    #[test]
    fn validation_errors_point_at_names() {
        let src = "source a coherent amp=1;\nphase P1 from P2 phi=0;\nphase P2 from P1 phi=0;\ndet D from a;";
        let err = parse(src).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Validation);
        let d = &err.diagnostics[0];
        assert!(d.message.contains("cycle"));
        assert_eq!((d.line, d.column), (2, 7));

        let err = parse("source a coherent amp=1;").unwrap_err();
        assert_eq!(err.diagnostics[0].message, "no detectors");
        assert_eq!((err.diagnostics[0].line, err.diagnostics[0].column), (1, 1));
    }

    #[test]
    fn tables_weights_and_options() {
        let src = "source s squeezed amp=3 amp_im=-1 table=[1MHz/0.5/4, 20MHz/-2dB/10dB];\n\
                   bs B from _, s t=0.6;\n\
                   det D1 from B.out1; det D2 from B.out2;\n\
                   measure M weighted(D1=1, D2=-0.5) freqs=5MHz;";
        let spec = parse(src).unwrap();
        assert_eq!(spec.sources[0].source.amp(), ComplexAmp::new(3.0, -1.0));
        let QuadSpectrum::Tabulated(nodes) = spec.sources[0].source.noise() else { panic!() };
        assert_eq!(nodes.len(), 2);
        assert_eq!(nodes[1].f_hz, 20e6);
        assert_eq!(spec.elements[0].inputs, vec![None, Some(PortRef::out("s"))]);
        assert_eq!(spec.measurements[0].combo, Combo::weighted([("D1", 1.0), ("D2", -0.5)]));
        assert_eq!(spec.measurements[0].freqs, FreqSpec::List(vec![5e6]));

        let spec = parse("source a coherent amp=1; det D from a; measure M single(D) freqs=[1MHz, 2.5MHz];").unwrap();
        assert_eq!(spec.measurements[0].freqs, FreqSpec::List(vec![1e6, 2.5e6]));
        assert!(parse("source s squeezed amp=1 table=[1MHz/1]; det D from s;").is_err());
    }

    #[test]
    fn overrides() {
        let mut spec = parse(MZ).unwrap();
        apply_override(&mut spec, "L1.tau", "24.390243902439025ns").unwrap();
        let Element::Delay(d) = spec.elements[1].element else { panic!() };
        assert!((d.tau() - 1.0 / 41e6).abs() < 1e-20);
        apply_override(&mut spec, "a.vy", "10").unwrap();
        assert_eq!(spec.sources[0].source.noise().eval(0.0).1, 10.0);
        assert!(apply_override(&mut spec, "B1.t", "2").unwrap_err().contains("out of range"));
        assert!(apply_override(&mut spec, "nope.t", "0.5").is_err());
        assert!(apply_override(&mut spec, "B1.phi", "0.5").is_err());
    }
}
