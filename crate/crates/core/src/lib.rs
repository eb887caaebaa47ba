//! Linearized quantum-noise propagation through passive optical networks
//! probed at rf sideband frequencies.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`]: network description types and structural validation.
//! * [`netdsl`]: parser and serializer for the `.net` text format.
//! * [`engine`]: transfer matrices, photocurrent linear forms, noise spectra.
//! * [`mzi`]: closed-form unbalanced Mach–Zehnder formulas and design helpers.
//! * [`montecarlo`]: time-domain stochastic oracle with a spectrum-analyzer model.
//! * [`entanglement`]: correlation variances, product criterion, entanglement of formation.
//! * [`scenario`]: the entangled-beam phase-measurement preset.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod entanglement;
pub mod model;
pub mod montecarlo;
pub mod mzi;
pub mod netdsl;
pub mod presets;
pub mod scenario;

pub use engine::{CompiledNetwork, EngineError, LinearForm, SpectrumPoint, TransferMatrix};
pub use model::{Combo, NetworkSpec, QuadSpectrum, SourceSpec, SPEED_OF_LIGHT};
