//! Networks bundled with the crate, addressable by name.

use crate::model::NetworkSpec;
use crate::netdsl::{parse, ParseError};

/// `(name, source text)` of every bundled network.
pub const PRESETS: &[(&str, &str)] = &[
    ("mz_phase", include_str!("../presets/mz_phase.net")),
    ("mz_amplitude", include_str!("../presets/mz_amplitude.net")),
    ("coherent_loss", include_str!("../presets/coherent_loss.net")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// Source text of a preset; accepts the name with or without `.net`.
pub fn source(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".net").unwrap_or(name);
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parsed preset. Bundled texts always parse; `None` means unknown name.
pub fn load(name: &str) -> Option<Result<NetworkSpec, ParseError>> {
    source(name).map(parse)
}
