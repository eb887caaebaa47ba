use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sideband_core::engine::{CompiledNetwork, EngineError};
use sideband_core::model::{Combo, FreqSpec, NetworkSpec};
use sideband_core::montecarlo::{
    cross_validate_between, simulate as mc_simulate, write_dump, AnalyzerSettings, CrossValidation, McConfig,
    McError, Window,
};
use sideband_core::mzi::{delay_for_frequency, pulsed_design};
use sideband_core::netdsl::{apply_override, parse, parse_quantity, Dimension, ParseErrorKind};
use sideband_core::scenario::{combos, PaperScenario, QuadratureMode, ScenarioReport};
use sideband_core::{presets, SpectrumPoint, SPEED_OF_LIGHT};

use crate::args::{DesignArgs, Format, NetArgs, OracleArgs, Quantity, ScenarioArgs, SimulateArgs};
use crate::manifest::{sidecar_path, RunManifest};
use crate::Failure;

type Outcome = Result<u8, Failure>;

struct Loaded {
    text: String,
    origin: String,
}

fn load(net: Option<&Path>, preset: Option<&str>) -> Result<Loaded, Failure> {
    match (net, preset) {
        (Some(path), _) => fs::read_to_string(path)
            .map(|text| Loaded {
                text,
                origin: path.display().to_string(),
            })
            .map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display()))),
        (None, Some(name)) => presets::source(name)
            .map(|text| Loaded {
                text: text.to_string(),
                origin: format!("preset:{name}"),
            })
            .ok_or_else(|| {
                let known: Vec<&str> = presets::names().collect();
                Failure::invalid(format!("unknown preset `{name}` (available: {})", known.join(", ")))
            }),
        (None, None) => Err(Failure::invalid("no network given")),
    }
}

fn parse_network(loaded: &Loaded) -> Result<NetworkSpec, Failure> {
    parse(&loaded.text).map_err(|err| {
        for d in &err.diagnostics {
            eprintln!("{}", d.render(&loaded.origin));
        }
        let summary = format!("{} ({} problem(s))", loaded.origin, err.diagnostics.len());
        match err.kind {
            ParseErrorKind::Syntax => Failure::parse(format!("syntax error in {summary}")),
            ParseErrorKind::Validation => Failure::invalid(format!(
                "invalid network in {summary}: {}",
                err.diagnostics.first().map(|d| d.message.as_str()).unwrap_or_default()
            )),
        }
    })
}

fn split_pair(s: &str) -> Result<(&str, &str), Failure> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| Failure::invalid(format!("override `{s}` must look like KEY=VALUE")))
}

fn apply_overrides(spec: &mut NetworkSpec, overrides: &[String]) -> Result<(), Failure> {
    for o in overrides {
        let (k, v) = split_pair(o)?;
        apply_override(spec, k, v).map_err(Failure::invalid)?;
    }
    let violations = sideband_core::model::validate(spec);
    if let Some(v) = violations.first() {
        return Err(Failure::invalid(format!("network invalid after overrides: {v}")));
    }
    Ok(())
}

fn pairs(overrides: &[String]) -> Vec<(&str, &str)> {
    overrides.iter().filter_map(|o| o.split_once('=')).collect()
}

/// Frequency with optional unit; a bare number is in Hz.
fn frequency(s: &str) -> Result<f64, Failure> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    parse_quantity(s, Dimension::Frequency).map_err(|d| Failure::invalid(format!("bad frequency `{s}`: {}", d.message)))
}

fn freq_grid(s: &str) -> Result<FreqSpec, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let spec = match parts.as_slice() {
        [lo, hi, step] => FreqSpec::Range {
            lo: frequency(lo)?,
            hi: frequency(hi)?,
            step: frequency(step)?,
        },
        [single] => FreqSpec::List(vec![frequency(single)?]),
        _ => return Err(Failure::invalid(format!("bad frequency range `{s}` (expected LO:HI:STEP)"))),
    };
    if let FreqSpec::Range { lo, hi, step } = spec {
        if !(lo >= 0.0 && hi >= lo && step > 0.0) || (hi - lo) / step > 1e7 {
            return Err(Failure::invalid(format!("bad frequency range `{s}`")));
        }
    }
    Ok(spec)
}

fn combo_arg(s: &str, spec: &NetworkSpec) -> Result<Combo, Failure> {
    let dets: Vec<&str> = spec.detectors.iter().map(|d| d.name.as_str()).collect();
    let combo = match s.split_once(':') {
        None if s == "sum" => Combo::Sum(dets.iter().map(|d| d.to_string()).collect()),
        None if s == "diff" => match dets.as_slice() {
            [a, b, ..] => Combo::diff(a, b),
            _ => return Err(Failure::invalid("`diff` needs at least two detectors")),
        },
        Some(("single", k)) => Combo::single(k),
        Some(("measure", name)) => spec
            .measurements
            .iter()
            .find(|m| m.name == name)
            .map(|m| m.combo.clone())
            .ok_or_else(|| Failure::invalid(format!("unknown measurement `{name}`")))?,
        Some(("weighted", terms)) => {
            let mut out = Vec::new();
            for t in terms.split(',') {
                let (d, w) = split_pair(t)?;
                let w: f64 = w.parse().map_err(|_| Failure::invalid(format!("bad weight `{w}`")))?;
                out.push((d.to_string(), w));
            }
            Combo::Weighted(out)
        }
        _ => {
            return Err(Failure::invalid(format!(
                "unknown combo `{s}` (expected sum, diff, single:DET, weighted:DET=W,..., measure:NAME)"
            )))
        }
    };
    for (d, _) in combo.terms() {
        if !dets.contains(&d) {
            return Err(Failure::invalid(format!("unknown detector `{d}` in combo")));
        }
    }
    Ok(combo)
}

fn engine_failure(e: EngineError) -> Failure {
    match e {
        EngineError::Invalid(_) | EngineError::UnknownDetector(_) | EngineError::EmptyCombo(_) => {
            Failure::invalid(e.to_string())
        }
        _ => Failure::numerical(e.to_string()),
    }
}

fn write_text(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Writes a CSV table and, for file output, its sidecar manifest.
fn write_csv(out: Option<&Path>, text: &str, manifest: &RunManifest) -> Result<(), Failure> {
    write_text(out, text)?;
    if let Some(path) = out {
        write_text(Some(&sidecar_path(path)), &to_json(manifest))?;
    }
    Ok(())
}

pub fn validate(args: &NetArgs) -> Outcome {
    let loaded = load(args.net.as_deref(), args.preset.as_deref())?;
    let spec = parse_network(&loaded)?;
    CompiledNetwork::compile(&spec).map_err(engine_failure)?;
    eprintln!(
        "{}: ok ({} sources, {} elements, {} detectors)",
        loaded.origin,
        spec.sources.len(),
        spec.elements.len(),
        spec.detectors.len()
    );
    Ok(0)
}

#[derive(Serialize)]
struct Row {
    f_hz: f64,
    abs: f64,
    snl: f64,
    norm: f64,
    db: f64,
}

impl Row {
    fn new(f_hz: f64, p: &SpectrumPoint) -> Self {
        Row {
            f_hz,
            abs: p.absolute,
            snl: p.snl,
            norm: p.normalized,
            db: p.db,
        }
    }
}

#[derive(Serialize)]
struct SweepReport<'a> {
    manifest: &'a RunManifest,
    combo: String,
    points: Vec<Row>,
}

pub fn simulate(args: &SimulateArgs) -> Outcome {
    let loaded = load(args.network.net.as_deref(), args.network.preset.as_deref())?;
    let mut spec = parse_network(&loaded)?;
    apply_overrides(&mut spec, &args.overrides)?;
    let first = spec.measurements.first();
    let combo = match &args.combo {
        Some(c) => combo_arg(c, &spec)?,
        None => first
            .map(|m| m.combo.clone())
            .ok_or_else(|| Failure::invalid("no --combo given and the network declares no measurement"))?,
    };
    let freqs = match &args.freqs {
        Some(f) => freq_grid(f)?,
        None => first
            .map(|m| m.freqs.clone())
            .ok_or_else(|| Failure::invalid("no --freqs given and the network declares no measurement"))?,
    };
    let net = CompiledNetwork::compile(&spec).map_err(engine_failure)?;
    let rows = freqs
        .points()
        .into_iter()
        .map(|f| {
            net.spectrum_declared(&combo, 2.0 * PI * f)
                .map(|p| Row::new(f, &p))
                .map_err(engine_failure)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = RunManifest::new("simulate")
        .input(&loaded.text)
        .overrides(pairs(&args.overrides))
        .seed(args.seed);
    match args.format {
        Format::Csv => {
            let mut text = String::from("f_hz,abs,snl,norm,db\n");
            for r in &rows {
                text.push_str(&format!("{},{},{},{},{}\n", r.f_hz, r.abs, r.snl, r.norm, r.db));
            }
            write_csv(args.out.as_deref(), &text, &manifest)?;
        }
        Format::Json => {
            let report = SweepReport {
                manifest: &manifest,
                combo: combo.to_string(),
                points: rows,
            };
            write_text(args.out.as_deref(), &to_json(&report))?;
        }
    }
    Ok(0)
}

fn scenario_with(overrides: &[String]) -> Result<PaperScenario, Failure> {
    let mut s = PaperScenario::default();
    for o in overrides {
        let (k, v) = split_pair(o)?;
        s.apply_override(k, v).map_err(Failure::invalid)?;
    }
    Ok(s)
}

#[derive(Serialize)]
struct ScenarioOutput<'a> {
    manifest: &'a RunManifest,
    report: &'a ScenarioReport,
}

pub fn scenario(args: &ScenarioArgs) -> Outcome {
    let s = scenario_with(&args.overrides)?;
    let report = s.run().map_err(engine_failure)?;
    let manifest = RunManifest::new("scenario")
        .overrides(pairs(&args.overrides))
        .seed(args.seed);
    let e = &report.entanglement;
    eprintln!(
        "v_plus = {:.4} ({:+.2} dB), v_minus = {:.4} ({:+.2} dB), delta = {:.4} ({}), E_F = {}",
        e.v_plus,
        report.amplitude.correlation.db,
        e.v_minus,
        report.phase.correlation.db,
        e.delta,
        if e.nonseparable { "non-separable" } else { "not witnessed" },
        e.eof_bits.map_or("n/a".to_string(), |x| format!("{x:.3} bits")),
    );
    for w in e.warnings.iter().chain(&report.notes) {
        eprintln!("note: {w}");
    }
    write_text(
        args.out.as_deref(),
        &to_json(&ScenarioOutput {
            manifest: &manifest,
            report: &report,
        }),
    )?;
    Ok(0)
}

fn mc_failure(e: McError) -> Failure {
    match e {
        McError::DelayNotIntegral { .. } | McError::SampleRateTooLow { .. } | McError::Config(_) => {
            Failure::invalid(e.to_string())
        }
        McError::Engine(e) => engine_failure(e),
        _ => Failure::numerical(e.to_string()),
    }
}

#[derive(Serialize)]
struct OracleOutput<'a> {
    manifest: &'a RunManifest,
    combo: String,
    config: McConfig,
    cross_validation: CrossValidation,
}

pub fn oracle(args: &OracleArgs) -> Outcome {
    let (spec, combo, default_f, input_text) = if args.scenario.is_some() {
        let s = scenario_with(&args.overrides)?;
        let (eta, _) = s.fit_detection().map_err(engine_failure)?;
        let mode = match args.quantity.unwrap_or(Quantity::PhaseDiff) {
            Quantity::AmpSum => QuadratureMode::Amplitude,
            Quantity::PhaseDiff => QuadratureMode::Phase,
        };
        (s.network(mode, eta), combos::correlation(mode), Some(s.f_m()), None)
    } else {
        let loaded = load(args.net.as_deref(), args.preset.as_deref())?;
        let mut spec = parse_network(&loaded)?;
        apply_overrides(&mut spec, &args.overrides)?;
        let combo = match &args.combo {
            Some(c) => combo_arg(c, &spec)?,
            None => spec
                .measurements
                .first()
                .map(|m| m.combo.clone())
                .ok_or_else(|| Failure::invalid("no --combo given and the network declares no measurement"))?,
        };
        let f = spec.measurements.first().and_then(|m| m.freqs.points().first().copied());
        (spec, combo, f, Some(loaded.text))
    };
    let f_hz = match &args.freq {
        Some(f) => frequency(f)?,
        None => default_f.ok_or_else(|| Failure::invalid("no --freq given and no measurement frequency declared"))?,
    };
    let mut perturbed = spec.clone();
    apply_overrides(&mut perturbed, &args.perturb)?;
    let reference = CompiledNetwork::compile(&spec).map_err(engine_failure)?;
    let simulated = CompiledNetwork::compile(&perturbed).map_err(engine_failure)?;

    let cfg = McConfig {
        sample_rate: frequency(&args.sample_rate)?,
        segment_len: args.segment_len,
        segments: args.segments,
        seed: args.seed.unwrap_or(McConfig::default().seed),
        window: Window::Hann,
    };
    let inputs = reference.input_spectra();
    let cv = cross_validate_between(&reference, &simulated, &combo, f_hz, &inputs, &cfg, &AnalyzerSettings::default())
        .map_err(mc_failure)?;
    if let Some(path) = &args.dump {
        let streams = mc_simulate(&simulated, &inputs, &cfg).map_err(mc_failure)?;
        let file = fs::File::create(path).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
        write_dump(std::io::BufWriter::new(file), &streams)
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
    }

    let mut all_overrides = pairs(&args.overrides);
    let perturb_keys: Vec<(String, &str)> = pairs(&args.perturb)
        .into_iter()
        .map(|(k, v)| (format!("perturb:{k}"), v))
        .collect();
    all_overrides.extend(perturb_keys.iter().map(|(k, v)| (k.as_str(), *v)));
    let mut manifest = RunManifest::new("oracle").overrides(all_overrides).seed(Some(cfg.seed));
    if let Some(text) = &input_text {
        manifest = manifest.input(text);
    }
    write_text(
        args.out.as_deref(),
        &to_json(&OracleOutput {
            manifest: &manifest,
            combo: combo.to_string(),
            config: cfg,
            cross_validation: cv,
        }),
    )?;
    eprintln!(
        "engine {:.5}, monte carlo {:.5} ± {:.5}, z = {:+.2}: {}",
        cv.engine,
        cv.monte_carlo,
        cv.std_error,
        cv.z,
        if cv.pass { "pass" } else { "MISMATCH" }
    );
    Ok(if cv.pass { 0 } else { 5 })
}

#[derive(Serialize)]
struct Design {
    f_rep_hz: Option<f64>,
    n: Option<u32>,
    delta_l_m: f64,
    tau_s: f64,
    f_m_hz: f64,
}

pub fn design(args: &DesignArgs) -> Outcome {
    let d = match (&args.frep, args.n, &args.fm) {
        (Some(frep), Some(n), None) => {
            if n == 0 {
                return Err(Failure::invalid("--n must be at least 1"));
            }
            let p = pulsed_design(frequency(frep)?, n);
            Design {
                f_rep_hz: Some(p.f_rep),
                n: Some(n),
                delta_l_m: p.length,
                tau_s: p.tau(),
                f_m_hz: p.f_m,
            }
        }
        (None, None, Some(fm)) => {
            let f_m = frequency(fm)?;
            if f_m.is_nan() || f_m <= 0.0 {
                return Err(Failure::invalid("measurement frequency must be positive"));
            }
            let l = delay_for_frequency(f_m);
            Design {
                f_rep_hz: None,
                n: None,
                delta_l_m: l,
                tau_s: l / SPEED_OF_LIGHT,
                f_m_hz: f_m,
            }
        }
        _ => return Err(Failure::invalid("give either --frep with --n, or --fm")),
    };
    let manifest = RunManifest::new("design");
    match args.format {
        Format::Csv => {
            let opt = |x: Option<String>| x.unwrap_or_default();
            let text = format!(
                "f_rep_hz,n,delta_l_m,tau_s,f_m_hz\n{},{},{},{},{}\n",
                opt(d.f_rep_hz.map(|x| x.to_string())),
                opt(d.n.map(|x| x.to_string())),
                d.delta_l_m,
                d.tau_s,
                d.f_m_hz
            );
            write_csv(args.out.as_deref(), &text, &manifest)?;
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                manifest: &'a RunManifest,
                design: &'a Design,
            }
            write_text(args.out.as_deref(), &to_json(&Out { manifest: &manifest, design: &d }))?;
        }
    }
    Ok(0)
}
