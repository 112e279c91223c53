//! Reversible circuits over X, CNOT and Toffoli gates.
//!
//! Basis strings are `u64` words with qubit 0 in the least-significant bit.
//! Gates act left to right: the first gate in the list acts first.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest circuit width representable in a basis word.
pub const MAX_WIDTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GateJson", into = "GateJson")]
pub enum Gate {
    X(usize),
    Cnot(usize, usize),
    Ccx(usize, usize, usize),
}

#[derive(Serialize, Deserialize)]
struct GateJson {
    kind: String,
    qubits: Vec<usize>,
}

impl TryFrom<GateJson> for Gate {
    type Error = Error;
    fn try_from(g: GateJson) -> Result<Self> {
        let gate = match (g.kind.as_str(), g.qubits.as_slice()) {
            ("X", [t]) => Gate::X(*t),
            ("CNOT", [c, t]) => Gate::Cnot(*c, *t),
            ("CCX", [a, b, t]) => Gate::Ccx(*a, *b, *t),
            (k, q) => {
                return Err(Error::InvalidGate(format!("kind {k:?} with {} qubits", q.len())))
            }
        };
        gate.check_distinct()?;
        Ok(gate)
    }
}

impl From<Gate> for GateJson {
    fn from(g: Gate) -> Self {
        let kind = match g {
            Gate::X(_) => "X",
            Gate::Cnot(..) => "CNOT",
            Gate::Ccx(..) => "CCX",
        };
        GateJson { kind: kind.into(), qubits: g.qubits() }
    }
}

impl Gate {
    /// Qubit indices, target last.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::X(t) => vec![t],
            Gate::Cnot(c, t) => vec![c, t],
            Gate::Ccx(a, b, t) => vec![a, b, t],
        }
    }

    pub fn target(&self) -> usize {
        match *self {
            Gate::X(t) | Gate::Cnot(_, t) | Gate::Ccx(_, _, t) => t,
        }
    }

    fn check_distinct(&self) -> Result<()> {
        let q = self.qubits();
        for i in 0..q.len() {
            for j in i + 1..q.len() {
                if q[i] == q[j] {
                    return Err(Error::QubitCollision(q[i]));
                }
            }
        }
        Ok(())
    }

    /// Relabel every qubit through `f`.
    pub fn map(&self, f: impl Fn(usize) -> usize) -> Gate {
        match *self {
            Gate::X(t) => Gate::X(f(t)),
            Gate::Cnot(c, t) => Gate::Cnot(f(c), f(t)),
            Gate::Ccx(a, b, t) => Gate::Ccx(f(a), f(b), f(t)),
        }
    }

    /// Control mask and flip mask: `if x & ctrl == ctrl { x ^= flip }`.
    #[inline]
    pub fn masks(&self) -> (u64, u64) {
        match *self {
            Gate::X(t) => (0, 1 << t),
            Gate::Cnot(c, t) => (1 << c, 1 << t),
            Gate::Ccx(a, b, t) => ((1 << a) | (1 << b), 1 << t),
        }
    }

    #[inline]
    pub fn apply(&self, x: u64) -> u64 {
        let (c, f) = self.masks();
        if x & c == c {
            x ^ f
        } else {
            x
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::X(t) => write!(f, "X({t})"),
            Gate::Cnot(c, t) => write!(f, "CNOT({c},{t})"),
            Gate::Ccx(a, b, t) => write!(f, "CCX({a},{b},{t})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CircuitJson")]
pub struct ReversibleCircuit {
    pub width: usize,
    pub gates: Vec<Gate>,
}

#[derive(Deserialize)]
struct CircuitJson {
    width: usize,
    gates: Vec<Gate>,
}

impl TryFrom<CircuitJson> for ReversibleCircuit {
    type Error = Error;
    fn try_from(c: CircuitJson) -> Result<Self> {
        ReversibleCircuit::new(c.width, c.gates)
    }
}

impl ReversibleCircuit {
    pub fn new(width: usize, gates: Vec<Gate>) -> Result<Self> {
        if width > MAX_WIDTH {
            return Err(Error::CapExceeded(format!("width {width} > {MAX_WIDTH}")));
        }
        for g in &gates {
            g.check_distinct()?;
            for q in g.qubits() {
                if q >= width {
                    return Err(Error::QubitOutOfRange { qubit: q, width });
                }
            }
        }
        Ok(Self { width, gates })
    }

    pub fn identity(width: usize) -> Self {
        Self { width, gates: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Image of a basis word.
    pub fn apply(&self, x: u64) -> u64 {
        self.gates.iter().fold(x, |acc, g| g.apply(acc))
    }

    /// Image of a bitstring; character `i` is qubit `i`.
    pub fn apply_bits(&self, input: &str) -> Result<String> {
        if input.len() != self.width {
            return Err(Error::WidthMismatch { expected: self.width, got: input.len() });
        }
        let x = parse_bits(input)?;
        Ok(format_bits(self.apply(x), self.width))
    }

    pub fn compiled(&self) -> CompiledCircuit {
        CompiledCircuit { ops: self.gates.iter().map(Gate::masks).collect() }
    }

    pub fn inverse(&self) -> Self {
        let mut gates = self.gates.clone();
        gates.reverse();
        Self { width: self.width, gates }
    }

    pub fn compose(&self, second: &Self) -> Result<Self> {
        if self.width != second.width {
            return Err(Error::WidthMismatch { expected: self.width, got: second.width });
        }
        let mut gates = self.gates.clone();
        gates.extend_from_slice(&second.gates);
        Ok(Self { width: self.width, gates })
    }

    /// Qubits touched by at least one gate.
    pub fn support(&self) -> BTreeSet<usize> {
        gate_support(&self.gates)
    }

    pub fn has_toffoli(&self) -> bool {
        self.gates.iter().any(|g| matches!(g, Gate::Ccx(..)))
    }

    /// The circuit conditioned on `control`; `ancilla` must be a clean zero
    /// qubit when the circuit contains Toffolis.
    pub fn controlled(&self, control: usize, ancilla: Option<usize>) -> Result<Self> {
        let mut reserved = vec![control];
        reserved.extend(ancilla);
        for &q in &reserved {
            if q >= self.width {
                return Err(Error::QubitOutOfRange { qubit: q, width: self.width });
            }
        }
        let gates = controlled_gates(&self.gates, control, ancilla)?;
        Ok(Self { width: self.width, gates })
    }

    /// Every basis image, indexed by input; `None` above 2^24 inputs.
    pub fn truth_table(&self) -> Option<Vec<u64>> {
        if self.width > 24 {
            return None;
        }
        let c = self.compiled();
        Some((0..1u64 << self.width).map(|x| c.apply(x)).collect())
    }

    pub fn is_bijective(&self) -> Option<bool> {
        let table = self.truth_table()?;
        let mut seen = vec![false; table.len()];
        for y in table {
            if std::mem::replace(&mut seen[y as usize], true) {
                return Some(false);
            }
        }
        Some(true)
    }
}

/// Gate list flattened to mask pairs for fast evaluation.
#[derive(Debug, Clone)]
pub struct CompiledCircuit {
    ops: Vec<(u64, u64)>,
}

impl CompiledCircuit {
    pub fn from_gates(gates: &[Gate]) -> Self {
        Self { ops: gates.iter().map(Gate::masks).collect() }
    }

    #[inline]
    pub fn apply(&self, mut x: u64) -> u64 {
        for &(c, f) in &self.ops {
            if x & c == c {
                x ^= f;
            }
        }
        x
    }
}

pub fn gate_support(gates: &[Gate]) -> BTreeSet<usize> {
    gates.iter().flat_map(|g| g.qubits()).collect()
}

/// Controlled version of a gate list. Toffolis become three Toffolis through
/// the clean `ancilla`, which is restored to zero.
pub fn controlled_gates(gates: &[Gate], control: usize, ancilla: Option<usize>) -> Result<Vec<Gate>> {
    let support = gate_support(gates);
    if support.contains(&control) {
        return Err(Error::QubitCollision(control));
    }
    if let Some(a) = ancilla {
        if a == control || support.contains(&a) {
            return Err(Error::QubitCollision(a));
        }
    }
    let mut out = Vec::with_capacity(gates.len());
    for g in gates {
        match *g {
            Gate::X(t) => out.push(Gate::Cnot(control, t)),
            Gate::Cnot(c, t) => out.push(Gate::Ccx(control, c, t)),
            Gate::Ccx(a, b, t) => {
                let z = ancilla.ok_or(Error::NeedAncilla)?;
                out.push(Gate::Ccx(control, a, z));
                out.push(Gate::Ccx(z, b, t));
                out.push(Gate::Ccx(control, a, z));
            }
        }
    }
    Ok(out)
}

/// Reversed gate list.
pub fn inverse_gates(gates: &[Gate]) -> Vec<Gate> {
    gates.iter().rev().copied().collect()
}

/// SWAP of two qubits as three CNOTs.
pub fn swap(a: usize, b: usize) -> Vec<Gate> {
    vec![Gate::Cnot(a, b), Gate::Cnot(b, a), Gate::Cnot(a, b)]
}

/// Controlled SWAP expanded into two CNOTs and one Toffoli.
pub fn fredkin(c: usize, a: usize, b: usize) -> Vec<Gate> {
    vec![Gate::Cnot(b, a), Gate::Ccx(c, a, b), Gate::Cnot(b, a)]
}

pub fn parse_bits(s: &str) -> Result<u64> {
    if s.len() > MAX_WIDTH {
        return Err(Error::CapExceeded(format!("bitstring of length {}", s.len())));
    }
    let mut x = 0u64;
    for (i, ch) in s.chars().enumerate() {
        match ch {
            '0' => {}
            '1' => x |= 1 << i,
            _ => return Err(Error::InvalidState(format!("bad bit character {ch:?}"))),
        }
    }
    Ok(x)
}

pub fn format_bits(x: u64, width: usize) -> String {
    (0..width).map(|i| if x >> i & 1 == 1 { '1' } else { '0' }).collect()
}
