mod common;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use common::{random_network, GenOptions};
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;
use sideband_core::engine::CompiledNetwork;
use sideband_core::entanglement::{duan_product, eof_symmetric, CorrelationPair};
use sideband_core::model::{
    validate, Combo, ComplexAmp, DelaySpec, Element, NetworkSpec, PortRef, QuadSpectrum, SourceSpec,
};
use sideband_core::mzi::{degraded_variance, diff_variance, sum_variance};
use sideband_core::netdsl::{parse, serialize};

fn mz(alpha: f64, tau: f64, phi: f64, vx: f64, vy: f64) -> CompiledNetwork {
    let spec = NetworkSpec::new()
        .source(
            "a",
            SourceSpec::SqueezedCoherent {
                amp: ComplexAmp::real(alpha),
                noise: QuadSpectrum::constant(vx, vy),
            },
        )
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
        .detector("d", PortRef::new("B2", 1));
    CompiledNetwork::compile(&spec).unwrap()
}

/// Completes the detector rows to a full output set: A·A† over all outputs
/// (detected and discarded) is the identity, so the detected block has
/// A·A† = I restricted to detectors.
fn gram(a: &Array2<Complex64>) -> Array2<Complex64> {
    let at = a.t().mapv(|z| z.conj());
    a.dot(&at)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn detected_rows_are_orthonormal(seed in any::<u64>(), f in 0.0..1e8f64) {
        let spec = random_network(seed, GenOptions::FULL);
        let net = CompiledNetwork::compile(&spec).unwrap();
        let g = gram(&net.transfer(2.0 * PI * f).a);
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((g[[i, j]] - expected).norm() < 1e-10, "{i},{j}: {}", g[[i, j]]);
            }
        }
    }

    #[test]
    fn carrier_flux_is_conserved(seed in any::<u64>()) {
        let spec = random_network(seed, GenOptions::FULL);
        let net = CompiledNetwork::compile(&spec).unwrap();
        let detected: f64 = net.carriers().iter().map(|b| b.norm_sqr()).sum();
        let total = net.source_flux();
        prop_assert!((detected + net.discarded_flux() - total).abs() <= 1e-9 * total.max(1.0));
    }

    #[test]
    fn classical_inputs_give_shot_noise(seed in any::<u64>(), f in 0.0..1e8f64, w in prop::collection::vec(-2.0..2.0f64, 1..4)) {
        let spec = random_network(seed, GenOptions::CLASSICAL);
        let net = CompiledNetwork::compile(&spec).unwrap();
        let dets: Vec<&str> = net.detectors().iter().map(|d| d.name.as_str()).collect();
        let combo = Combo::weighted(dets.iter().zip(w.iter().cycle()).map(|(d, w)| (*d, *w)));
        match net.spectrum_declared(&combo, 2.0 * PI * f) {
            Ok(p) => prop_assert!((p.normalized - 1.0).abs() < 1e-9, "{}", p.normalized),
            Err(_) => prop_assert!(net.snl(&combo).unwrap() <= 0.0),
        }
    }

    #[test]
    fn spectra_are_real_positive_and_even(seed in any::<u64>(), f in 1.0..1e8f64) {
        let spec = random_network(seed, GenOptions::FULL);
        let net = CompiledNetwork::compile(&spec).unwrap();
        let combo = Combo::Sum(net.detectors().iter().map(|d| d.name.clone()).collect());
        if let (Ok(p), Ok(m)) = (net.spectrum_declared(&combo, 2.0 * PI * f), net.spectrum_declared(&combo, -2.0 * PI * f)) {
            prop_assert!(p.absolute > 0.0);
            prop_assert!((p.absolute - m.absolute).abs() <= 1e-9 * p.absolute);
        }
    }

    #[test]
    fn engine_matches_closed_form(theta in 0.0..2.0 * PI, phi in -PI..PI, vx in 0.1..2.0f64, excess in 1.0..100.0f64) {
        let vy = excess / vx;
        let omega = 2.0 * PI * 20.5e6;
        let net = mz(5.0, theta / omega, phi, vx, vy);
        let d = net.spectrum_declared(&Combo::diff("c", "d"), omega).unwrap().normalized;
        let s = net.spectrum_declared(&Combo::sum("c", "d"), omega).unwrap().normalized;
        prop_assert!((d - diff_variance(theta, phi, vx, vy)).abs() < 1e-9 * d.max(1.0));
        prop_assert!((s - sum_variance(theta, vx)).abs() < 1e-9);
    }

    #[test]
    fn vacuum_input_reads_shot_noise(theta in 0.0..2.0 * PI, phi in -PI..PI) {
        prop_assert!((diff_variance(theta, phi, 1.0, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_readout_is_monotone(a in 0.0..PI, b in 0.0..PI, vx in 0.1..1.0f64, vy in 1.0..100.0f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(diff_variance(lo, FRAC_PI_2, vx, vy) <= diff_variance(hi, FRAC_PI_2, vx, vy) + 1e-12);
    }

    #[test]
    fn degradation_moves_toward_vacuum(v in 0.01..100.0f64, loss in 0.0..=1.0f64) {
        let d = degraded_variance(v, loss);
        prop_assert!((d - 1.0).abs() <= (v - 1.0).abs() + 1e-12);
    }

    #[test]
    fn duan_flag_matches_delta(vp in 0.01..3.0f64, vm in 0.01..3.0f64) {
        let v = duan_product(CorrelationPair { v_plus: vp, v_minus: vm });
        prop_assert!((v.delta - (vp * vm).sqrt()).abs() < 1e-15);
        prop_assert_eq!(v.nonseparable, v.delta < 1.0);
        prop_assert_eq!(eof_symmetric(v.delta).is_ok(), v.delta < 1.0);
    }

    #[test]
    fn eof_is_positive_and_decreasing(a in 0.001..0.999f64, b in 0.001..0.999f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (e_lo, e_hi) = (eof_symmetric(lo).unwrap(), eof_symmetric(hi).unwrap());
        prop_assert!(e_hi > 0.0);
        prop_assert!(e_lo >= e_hi);
    }

    #[test]
    fn serialize_parse_round_trip(seed in any::<u64>()) {
        let spec = random_network(seed, GenOptions::FULL);
        prop_assert!(validate(&spec).is_empty());
        let text = serialize(&spec).unwrap();
        prop_assert_eq!(parse(&text).unwrap(), spec);
    }

    #[test]
    fn parser_never_panics(text in "[a-zA-Z0-9_ =;,.:()\\[\\]/#\n+-]{0,120}") {
        if let Err(e) = parse(&text) {
            prop_assert!(!e.diagnostics.is_empty());
            for d in &e.diagnostics {
                prop_assert!(d.line >= 1 && d.column >= 1 && !d.message.is_empty());
            }
        }
    }
}
