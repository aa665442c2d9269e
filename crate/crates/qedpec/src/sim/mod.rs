//! Dense density-matrix simulation for small registers.
//!
//! States are `2^n × 2^n` complex matrices with qubit 0 as the most significant
//! bit of the basis index, matching the Pauli text order.

mod circuit;
mod density;
mod gate;
mod measure;

pub use circuit::{run_density, Circuit, CircuitSpec, GateSpec, Layer, Noise, NoiseSite};
pub use density::{apply_gate_to_state, DensityMatrix};
pub use gate::{Gate, GateKind};
pub use measure::{apply_readout, measurement_basis, rotate_for_measurement, sample_counts, Counts, ReadoutModel};

/// Largest register the dense simulator is meant for.
pub const MAX_SIM_QUBITS: usize = 8;
