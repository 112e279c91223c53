//! Fixtures shared by the kernel benchmarks.

use stoqlab_core::npcert::{GapCgInstance, RelationKind};
use stoqlab_core::{Gate, NonNegativeState, Rational, ReversibleCircuit};

/// Deterministic Toffoli-heavy circuit of the given width.
pub fn ladder(width: usize, layers: usize) -> ReversibleCircuit {
    let mut gates = Vec::new();
    for l in 0..layers {
        for q in 0..width {
            let (a, b, c) = (q, (q + 1 + l) % width, (q + 2 + 2 * l) % width);
            if a != b && b != c && a != c {
                gates.push(Gate::Ccx(a, b, c));
            }
            gates.push(Gate::Cnot(q, (q + 1) % width));
        }
    }
    ReversibleCircuit::new(width, gates).unwrap()
}

/// Uniform rational state over every basis string of `width` qubits.
pub fn plus(width: usize) -> NonNegativeState<Rational> {
    NonNegativeState::plus(width).unwrap()
}

pub fn triangle() -> GapCgInstance {
    GapCgInstance::cycle(3, 2, RelationKind::Disequality, 1.0 / 3.0).unwrap()
}
