//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints a PASS/FAIL line even when all succeed.

mod common;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{random_network, GenOptions};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sideband_core::entanglement::{duan_product, eof_symmetric, CorrelationPair};
use sideband_core::model::{
    Combo, ComplexAmp, DelaySpec, Element, NetworkSpec, PortRef, QuadSpectrum, SourceSpec,
};
use sideband_core::montecarlo::{cross_validate, AnalyzerSettings, McConfig};
use sideband_core::mzi::{delay_for_frequency, diff_variance, pulsed_design, sum_variance};
use sideband_core::netdsl::{parse, serialize};
use sideband_core::scenario::{combos, PaperScenario, QuadratureMode};
use sideband_core::{presets, CompiledNetwork};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn mz_spec(alpha: f64, tau: f64, phi: f64, noise: QuadSpectrum) -> NetworkSpec {
    NetworkSpec::new()
        .source("a", SourceSpec::SqueezedCoherent { amp: ComplexAmp::real(alpha), noise })
        .source("v", SourceSpec::Vacuum)
        .element(
            "B1",
            Element::BeamSplitter { t: FRAC_1_SQRT_2 },
            vec![Some(PortRef::out("a")), Some(PortRef::out("v"))],
        )
        .element("L", Element::Delay(DelaySpec::from_tau(tau, phi)), vec![Some(PortRef::new("B1", 1))])
        .element(
            "B2",
            Element::BeamSplitter { t: FRAC_1_SQRT_2 },
            vec![Some(PortRef::new("B1", 0)), Some(PortRef::out("L"))],
        )
        .detector("c", PortRef::new("B2", 0))
        .detector("d", PortRef::new("B2", 1))
}

fn mz(alpha: f64, tau: f64, phi: f64, vx: f64, vy: f64) -> CompiledNetwork {
    CompiledNetwork::compile(&mz_spec(alpha, tau, phi, QuadSpectrum::constant(vx, vy))).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mz_rows() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let omega = 2.0 * PI * rng.gen_range(0.0..1e8);
        let phi = rng.gen_range(-PI..PI);
        let tau = rng.gen_range(0.0..1e-7);
        let a = mz(1.0, tau, phi, 1.0, 1.0).transfer(omega).a;
        let d = Complex64::from_polar(1.0, phi - omega * tau);
        let expected = [[(1.0 + d) / 2.0, (1.0 - d) / 2.0], [(1.0 - d) / 2.0, (1.0 + d) / 2.0]];
        for (i, row) in expected.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                worst = worst.max((a[[i, j]] - e).norm());
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn closed_form_grid() -> Outcome {
    let omega = 2.0 * PI * 20.5e6;
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for i in 0..=24 {
        let theta = 2.0 * PI * f64::from(i) / 24.0;
        for j in 0..=12 {
            let phi = -PI + 2.0 * PI * f64::from(j) / 12.0;
            for &(vx, vy) in &[(1.0, 1.0), (0.617, 63.0), (0.5, 2.0), (1.5, 0.76), (0.1, 100.0)] {
                let net = mz(3.0, theta / omega, phi, vx, vy);
                let d = net.spectrum_declared(&Combo::diff("c", "d"), omega).map_err(|e| e.to_string())?;
                let s = net.spectrum_declared(&Combo::sum("c", "d"), omega).map_err(|e| e.to_string())?;
                worst = worst
                    .max((d.normalized - diff_variance(theta, phi, vx, vy)).abs())
                    .max((s.normalized - sum_variance(theta, vx)).abs());
                points += 1;
            }
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("{points} grid points, max deviation {worst:.1e}"))
}

fn half_period_contract() -> Outcome {
    let omega = 2.0 * PI * 20.5e6;
    let mut parts = Vec::new();
    for &(vx, vy) in &[(1.5, 0.76), (0.617, 63.0)] {
        let net = mz(10.0, PI / omega, FRAC_PI_2, vx, vy);
        let s = net.spectrum_declared(&Combo::sum("c", "d"), omega).unwrap().normalized;
        let d = net.spectrum_declared(&Combo::diff("c", "d"), omega).unwrap().normalized;
        ensure((s - 1.0).abs() <= 1e-9, || format!("V_Y={vy}: sum {s}"))?;
        ensure((d - vy).abs() <= 1e-9 * vy, || format!("V_Y={vy}: diff {d}"))?;
        parts.push(format!("V_Y={vy}: sum {s:.9}, diff {d:.9}"));
    }
    Ok(parts.join("; "))
}

fn design_numbers() -> Outcome {
    let l = delay_for_frequency(20.5e6);
    ensure((7.30..=7.32).contains(&l), || format!("delay_for_frequency(20.5 MHz) = {l}"))?;
    for n in 1..=4 {
        let d = pulsed_design(82e6, n);
        let per = d.length / f64::from(n);
        ensure((3.655..=3.66).contains(&per), || format!("n={n}: {per} m per pulse"))?;
    }
    let d = pulsed_design(82e6, 2);
    Ok(format!("ΔL(20.5 MHz) = {l:.4} m, pulse spacing {:.4} m, f_m(n=2) = {:.1} MHz", d.length / 2.0, d.f_m / 1e6))
}

fn paper_scenario() -> Outcome {
    let r = PaperScenario::default().run().map_err(|e| e.to_string())?;
    let e = &r.entanglement;
    ensure((e.v_plus - 0.63).abs() <= 1e-9, || format!("calibrated v_plus {}", e.v_plus))?;
    ensure((r.phase_path_loss - 0.2775).abs() <= 1e-12, || format!("phase-path loss {}", r.phase_path_loss))?;
    ensure((0.72..=0.76).contains(&e.v_minus), || format!("v_minus {}", e.v_minus))?;
    Ok(format!(
        "v_plus {:.4}, v_minus {:.4} ({:.2} dB), η_det {:.4}",
        e.v_plus,
        e.v_minus,
        10.0 * e.v_minus.log10(),
        r.detection_efficiency
    ))
}

fn entanglement_verdicts() -> Outcome {
    let v = duan_product(CorrelationPair { v_plus: 0.63, v_minus: 0.76 });
    ensure((v.delta - 0.692).abs() <= 1e-3 && v.nonseparable, || format!("Δ {}", v.delta))?;
    let e = eof_symmetric(v.delta).map_err(|e| e.to_string())?;
    ensure((e - 0.22).abs() <= 0.02, || format!("E_F {e}"))?;
    Ok(format!("Δ {:.4}, E_F {e:.3} bits", v.delta))
}

fn monte_carlo() -> Outcome {
    let cfg = McConfig { segments: 4096, ..McConfig::default() };
    let settings = AnalyzerSettings::default();
    let mut parts = Vec::new();

    let net = mz(10.0, 4.0 / cfg.sample_rate, FRAC_PI_2, 0.617, 63.0);
    let cv = cross_validate(&net, &Combo::diff("c", "d"), 20.5e6, &net.input_spectra(), &cfg, &settings)
        .map_err(|e| e.to_string())?;
    parts.push(("MZ θ=π diff", cv));

    let scenario = PaperScenario::default();
    let (eta, _) = scenario.fit_detection().map_err(|e| e.to_string())?;
    for (label, mode, combo) in [
        ("amp-sum", QuadratureMode::Amplitude, combos::correlation(QuadratureMode::Amplitude)),
        ("phase-diff", QuadratureMode::Phase, combos::correlation(QuadratureMode::Phase)),
    ] {
        let net = CompiledNetwork::compile(&scenario.network(mode, eta)).map_err(|e| e.to_string())?;
        let cv = cross_validate(&net, &combo, scenario.f_m(), &net.input_spectra(), &cfg, &settings)
            .map_err(|e| e.to_string())?;
        parts.push((label, cv));
    }

    let summary = parts
        .iter()
        .map(|(l, cv)| {
            format!(
                "{l}: engine {:.4}, MC {:.4} ± {:.4} (rel {:.1}%), z {:+.2}",
                cv.engine,
                cv.monte_carlo,
                cv.std_error,
                100.0 * cv.std_error / cv.monte_carlo,
                cv.z
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    ensure(parts.iter().all(|(_, cv)| cv.z.abs() <= 3.0), || summary.clone())?;
    Ok(summary)
}

fn shot_noise_floor() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    let mut seed = 0u64;
    let mut worst: f64 = 0.0;
    while checked < 100 {
        seed += 1;
        ensure(seed < 10_000, || "too few networks with a carrier at a detector".into())?;
        let spec = random_network(seed, GenOptions::CLASSICAL);
        let net = CompiledNetwork::compile(&spec).map_err(|e| format!("seed {seed}: {e}"))?;
        if net.is_lossless() {
            continue;
        }
        let combo = Combo::weighted(net.detectors().iter().map(|d| (d.name.as_str(), rng.gen_range(-2.0..2.0))));
        let omega = 2.0 * PI * rng.gen_range(0.0..1e8);
        let Ok(p) = net.spectrum_declared(&combo, omega) else { continue };
        worst = worst.max((p.normalized - 1.0).abs());
        checked += 1;
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("100 lossy networks (from {seed} drawn), max deviation {worst:.1e}"))
}

fn dc_fringe() -> Outcome {
    let alpha = 7.0;
    let mut worst: f64 = 0.0;
    for i in 0..=64 {
        let phi = -PI + 2.0 * PI * f64::from(i) / 64.0;
        let net = mz(alpha, 3e-8, phi, 1.0, 1.0);
        let b = net.carriers();
        let diff = b[0].norm_sqr() - b[1].norm_sqr();
        worst = worst.max((diff - alpha * alpha * phi.cos()).abs());
    }
    let net = mz(alpha, 3e-8, FRAC_PI_2, 1.0, 1.0);
    let lock = net.carriers()[0].norm_sqr() - net.carriers()[1].norm_sqr();
    ensure(worst <= 1e-12 && lock.abs() <= 1e-12, || format!("max deviation {worst:e}, lock {lock:e}"))?;
    Ok(format!("max deviation {worst:.1e}, lock point {lock:.1e}"))
}

/// Text edits that always make a valid spec invalid.
fn mutations(text: &str, rng: &mut ChaCha8Rng) -> Vec<String> {
    let lines: Vec<&str> = text.lines().collect();
    let k = rng.gen_range(0..lines.len());
    let with_line = |replacement: String| {
        let mut l: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        l[k] = replacement;
        l.join("\n")
    };
    let mut out = vec![
        text.trim_end().trim_end_matches(';').to_string(),
        with_line(format!("mirror M from {};", lines[k].split_whitespace().nth(1).unwrap_or("x"))),
        format!("{text}{}\n", lines[0]),
        with_line(lines[k].replacen(' ', "  = ", 1)),
    ];
    if let Some(pos) = text.find(" t=") {
        let end = text[pos + 3..].find([' ', ';']).map_or(text.len(), |e| pos + 3 + e);
        out.push(format!("{} t=1.5{}", &text[..pos], &text[end..]));
    }
    if let Some(pos) = text.find("eta=") {
        out.push(format!("{}eta=3ns {}", &text[..pos], &text[pos + 4..]));
    }
    out
}

fn round_trip() -> Outcome {
    let mut specs: Vec<NetworkSpec> = Vec::new();
    for name in presets::names() {
        specs.push(presets::load(name).unwrap().map_err(|e| format!("{name}: {e}"))?);
    }
    let bundled = specs.len();
    specs.extend((0..200).map(|s| random_network(0xf00d + s, GenOptions::FULL)));
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut invalid = 0;
    for (i, spec) in specs.iter().enumerate() {
        let text = serialize(spec).map_err(|e| format!("spec {i}: {e}"))?;
        let back = parse(&text).map_err(|e| format!("spec {i}: {e}\n{text}"))?;
        ensure(&back == spec, || format!("spec {i} changed after round trip:\n{text}"))?;
        for m in mutations(&text, &mut rng) {
            let line_count = m.lines().count().max(1);
            let err = match parse(&m) {
                Ok(_) => return Err(format!("mutation of spec {i} accepted:\n{m}")),
                Err(e) => e,
            };
            ensure(!err.diagnostics.is_empty(), || format!("no diagnostics for:\n{m}"))?;
            for d in &err.diagnostics {
                ensure(d.line >= 1 && d.line <= line_count && d.column >= 1, || {
                    format!("bad position {}:{} for:\n{m}", d.line, d.column)
                })?;
            }
            invalid += 1;
        }
    }
    Ok(format!("{bundled} presets + 200 generated specs round-trip, {invalid} invalid variants rejected with positions"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("MZ transfer coefficients", Duration::from_secs(1), mz_rows),
        ("engine vs closed form", Duration::from_secs(1), closed_form_grid),
        ("half-period contract", Duration::from_secs(1), half_period_contract),
        ("design numbers", Duration::from_secs(1), design_numbers),
        ("paper scenario", Duration::from_secs(1), paper_scenario),
        ("entanglement verdicts", Duration::from_secs(1), entanglement_verdicts),
        ("Monte-Carlo agreement", Duration::from_secs(120), monte_carlo),
        ("shot-noise floor", Duration::from_secs(5), shot_noise_floor),
        ("DC fringe", Duration::from_secs(1), dc_fringe),
        ("parser round trip", Duration::from_secs(5), round_trip),
    ];
    let mut failures = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (verdict, detail) = match result {
            Ok(d) if elapsed <= *budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; took {elapsed:.2?}, budget {budget:?}")),
            Err(d) => ("FAIL", d),
        };
        if verdict == "FAIL" {
            failures += 1;
        }
        println!("{verdict} [{:>2}] {name} ({elapsed:.2?}): {detail}", i + 1);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
