//! Random valid networks for property, fuzz and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sideband_core::model::{
    Combo, ComplexAmp, DelaySpec, Element, FreqSpec, NetworkSpec, PortRef, QuadSpectrum, SourceSpec,
    SpectrumNode,
};

#[derive(Debug, Clone, Copy)]
pub struct GenOptions {
    /// Allow squeezed sources (otherwise coherent or vacuum only).
    pub squeezed: bool,
    pub losses: bool,
    pub measurements: bool,
    pub max_elements: usize,
}

impl GenOptions {
    pub const CLASSICAL: GenOptions = GenOptions {
        squeezed: false,
        losses: true,
        measurements: false,
        max_elements: 8,
    };
    pub const LOSSLESS: GenOptions = GenOptions {
        squeezed: true,
        losses: false,
        measurements: false,
        max_elements: 8,
    };
    pub const FULL: GenOptions = GenOptions {
        squeezed: true,
        losses: true,
        measurements: true,
        max_elements: 10,
    };
}

fn spectrum(rng: &mut ChaCha8Rng) -> QuadSpectrum {
    let node = |rng: &mut ChaCha8Rng, f_hz: f64| {
        let vx = rng.gen_range(0.05..3.0);
        let vy = rng.gen_range(1.0..4.0) / f64::min(vx, 1.0);
        SpectrumNode { f_hz, vx, vy }
    };
    if rng.gen_bool(0.3) {
        let n = rng.gen_range(1..5);
        let mut f = 0.0;
        let nodes = (0..n)
            .map(|_| {
                f += rng.gen_range(1e5..2e7);
                node(rng, f)
            })
            .collect();
        QuadSpectrum::Tabulated(nodes)
    } else {
        let n = node(rng, 0.0);
        QuadSpectrum::constant(n.vx, n.vy)
    }
}

/// Builds a random valid network from `seed`.
pub fn random_network(seed: u64, opts: GenOptions) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = NetworkSpec::new();
    let mut free: Vec<PortRef> = Vec::new();

    for i in 0..rng.gen_range(1..=3) {
        let name = format!("s{i}");
        let amp = ComplexAmp::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
        let source = match rng.gen_range(0..if opts.squeezed { 3 } else { 2 }) {
            0 => SourceSpec::Coherent { amp },
            1 => SourceSpec::Vacuum,
            _ => SourceSpec::SqueezedCoherent { amp, noise: spectrum(&mut rng) },
        };
        spec = spec.source(&name, source);
        free.push(PortRef::out(name));
    }

    let take = |rng: &mut ChaCha8Rng, free: &mut Vec<PortRef>| -> Option<PortRef> {
        if free.is_empty() {
            None
        } else {
            let i = rng.gen_range(0..free.len());
            Some(free.swap_remove(i))
        }
    };

    for i in 0..rng.gen_range(1..=opts.max_elements) {
        let name = format!("E{i}");
        let kind = rng.gen_range(0..if opts.losses { 4 } else { 3 });
        if kind != 0 && free.is_empty() {
            continue;
        }
        let (element, inputs) = match kind {
            0 => {
                let a = if rng.gen_bool(0.8) { take(&mut rng, &mut free) } else { None };
                let b = if rng.gen_bool(0.5) { take(&mut rng, &mut free) } else { None };
                (Element::BeamSplitter { t: rng.gen_range(0.0..=1.0) }, vec![a, b])
            }
            1 => (Element::PhaseShift { phi: rng.gen_range(-PI..PI) }, vec![take(&mut rng, &mut free)]),
            2 => {
                let d = if rng.gen_bool(0.5) {
                    DelaySpec::from_tau(rng.gen_range(0.0..1e-7), rng.gen_range(-PI..PI))
                } else {
                    DelaySpec::from_length(rng.gen_range(0.0..20.0), rng.gen_range(-PI..PI))
                };
                (Element::Delay(d), vec![take(&mut rng, &mut free)])
            }
            _ => (Element::Loss { eta: rng.gen_range(0.0..=1.0) }, vec![take(&mut rng, &mut free)]),
        };
        let outs = element.output_arity();
        spec = spec.element(&name, element, inputs);
        for k in 0..outs {
            free.push(PortRef::new(name.clone(), k));
        }
    }

    free.shuffle(&mut rng);
    let n_det = rng.gen_range(1..=free.len());
    let dets: Vec<String> = (0..n_det).map(|k| format!("D{k}")).collect();
    for (d, port) in dets.iter().zip(free) {
        spec = spec.detector(d, port);
    }

    if opts.measurements {
        for m in 0..rng.gen_range(0..3) {
            let pick = |rng: &mut ChaCha8Rng| dets[rng.gen_range(0..dets.len())].clone();
            let combo = match rng.gen_range(0..4) {
                0 => Combo::Sum((0..rng.gen_range(1..4)).map(|_| pick(&mut rng)).collect()),
                1 => Combo::Diff(pick(&mut rng), pick(&mut rng)),
                2 => Combo::Single(pick(&mut rng)),
                _ => Combo::Weighted(
                    (0..rng.gen_range(1..4))
                        .map(|_| (pick(&mut rng), rng.gen_range(-3.0..3.0)))
                        .collect(),
                ),
            };
            let freqs = if rng.gen_bool(0.5) {
                let lo = rng.gen_range(0.0..1e7);
                FreqSpec::Range { lo, hi: lo + rng.gen_range(0.0..3e7), step: rng.gen_range(1e5..5e6) }
            } else {
                FreqSpec::List((0..rng.gen_range(1..4)).map(|_| rng.gen_range(0.0..5e7)).collect())
            };
            spec = spec.measure(&format!("M{m}"), combo, freqs);
        }
    }
    spec
}

