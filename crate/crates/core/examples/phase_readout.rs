use std::f64::consts::PI;

use sideband_core::{netdsl, presets, CompiledNetwork, Combo};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = netdsl::parse(presets::source("mz_phase").unwrap())?;
    let net = CompiledNetwork::compile(&spec)?;
    let p = net.spectrum_declared(&Combo::diff("D1", "D2"), 2.0 * PI * 20.5e6)?;
    println!("{:.2} dB above shot noise", p.db);
    Ok(())
}
