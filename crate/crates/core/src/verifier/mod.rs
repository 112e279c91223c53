//! Stoquastic verifier semantics.
//!
//! Qubit layout: witness `[0, k*ell)`, then `n0` zero ancillas, then `nplus`
//! plus ancillas. A verifier accepts with probability
//! `1/2 + 1/2 <Psi| V^-1 X_O V |Psi>` on the initialized state `Psi`.

pub mod builder;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::revsim::{CompiledCircuit, Gate, ReversibleCircuit};
use crate::scalar::Scalar;
use crate::states::{DensityMatrix, NonNegativeState};

/// Largest number of basis branches `|supp witness| * 2^nplus` enumerated.
pub const BRANCH_CAP: u64 = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierLayout {
    pub k: usize,
    pub ell: usize,
    pub n0: usize,
    pub nplus: usize,
    pub output: usize,
}

impl VerifierLayout {
    pub fn width(&self) -> usize {
        self.k * self.ell + self.n0 + self.nplus
    }

    pub fn witness_width(&self) -> usize {
        self.k * self.ell
    }

    pub fn zero_offset(&self) -> usize {
        self.witness_width()
    }

    pub fn plus_offset(&self) -> usize {
        self.witness_width() + self.n0
    }

    pub fn witness_mask(&self) -> u64 {
        low_mask(self.witness_width())
    }

    pub fn zero_mask(&self) -> u64 {
        low_mask(self.n0) << self.zero_offset()
    }

    /// Qubit `bit` of prover `prover`.
    pub fn witness_qubit(&self, prover: usize, bit: usize) -> usize {
        prover * self.ell + bit
    }

    pub fn validate(&self) -> Result<()> {
        if self.width() > crate::revsim::MAX_WIDTH {
            return Err(Error::CapExceeded(format!("layout width {}", self.width())));
        }
        if self.output >= self.width() {
            return Err(Error::QubitOutOfRange { qubit: self.output, width: self.width() });
        }
        Ok(())
    }
}

pub(crate) fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VerifierJson", into = "VerifierJson")]
pub struct StoqVerifier {
    pub circuit: ReversibleCircuit,
    pub layout: VerifierLayout,
}

#[derive(Serialize, Deserialize)]
struct VerifierJson {
    width: usize,
    gates: Vec<Gate>,
    layout: VerifierLayout,
}

impl TryFrom<VerifierJson> for StoqVerifier {
    type Error = Error;
    fn try_from(v: VerifierJson) -> Result<Self> {
        StoqVerifier::new(ReversibleCircuit::new(v.width, v.gates)?, v.layout)
    }
}

impl From<StoqVerifier> for VerifierJson {
    fn from(v: StoqVerifier) -> Self {
        VerifierJson { width: v.circuit.width, gates: v.circuit.gates, layout: v.layout }
    }
}

impl StoqVerifier {
    pub fn new(circuit: ReversibleCircuit, layout: VerifierLayout) -> Result<Self> {
        layout.validate()?;
        if circuit.width != layout.width() {
            return Err(Error::WidthMismatch { expected: layout.width(), got: circuit.width });
        }
        Ok(Self { circuit, layout })
    }

    /// Acceptance probability on a non-negative witness.
    pub fn acceptance<T: Scalar>(&self, witness: &NonNegativeState<T>) -> Result<T> {
        acceptance_probability(self, witness)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub c: f64,
    pub s: f64,
    pub delta: f64,
}

impl Thresholds {
    pub fn new(c: f64, s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) || !(s < c && c <= 1.0) {
            return Err(Error::Range(format!("need s < c <= 1, got c={c}, s={s}")));
        }
        Ok(Self { c, s, delta: c - s })
    }

    /// Whether `1/2 <= s`, the class convention.
    pub fn in_class_range(&self) -> bool {
        self.s >= 0.5
    }
}

/// `<Psi| P |Psi>` for the initialized state: `sum_x Psi(x) Psi(P x)` over the
/// witness support and every plus branch.
pub fn permuted_overlap<T: Scalar>(
    perm: &CompiledCircuit,
    layout: &VerifierLayout,
    witness: &NonNegativeState<T>,
) -> Result<T> {
    if witness.width() != layout.witness_width() {
        return Err(Error::WidthMismatch { expected: layout.witness_width(), got: witness.width() });
    }
    let branches = (witness.support_len() as u64).saturating_mul(1u64 << layout.nplus.min(63));
    if layout.nplus >= 63 || branches > BRANCH_CAP {
        return Err(Error::CapExceeded(format!(
            "{} witness branches x 2^{} plus branches",
            witness.support_len(),
            layout.nplus
        )));
    }
    let index = witness.weight_index();
    let wmask = layout.witness_mask();
    let zmask = layout.zero_mask();
    let poff = layout.plus_offset();
    let nu = 1u64 << layout.nplus;
    let entries: Vec<(u64, T)> = witness.weights().iter().map(|(k, v)| (*k, v.clone())).collect();
    let partial: Vec<T> = entries
        .par_iter()
        .map(|(x, m)| {
            let mut acc = T::zero();
            for u in 0..nu {
                let y = perm.apply(x | u << poff);
                if y & zmask != 0 {
                    continue;
                }
                if let Some(m2) = index.get(&(y & wmask)) {
                    acc = acc + m.clone() * m2.clone();
                }
            }
            acc
        })
        .collect();
    let sum = partial.into_iter().fold(T::zero(), |a, b| a + b);
    Ok(sum / (witness.norm2().clone() * T::pow2(layout.nplus as u32)))
}

/// `Gamma = V X_O V^-1` in application order.
pub fn gamma_form(v: &StoqVerifier) -> ReversibleCircuit {
    let mut gates = v.circuit.gates.clone();
    gates.push(Gate::X(v.layout.output));
    gates.extend(v.circuit.gates.iter().rev());
    ReversibleCircuit { width: v.circuit.width, gates }
}

pub fn acceptance_probability<T: Scalar>(v: &StoqVerifier, witness: &NonNegativeState<T>) -> Result<T> {
    let gamma = gamma_form(v).compiled();
    let o = permuted_overlap(&gamma, &v.layout, witness)?;
    Ok(T::half() + T::half() * o)
}

/// `1/2 + 1/2 <R0 Psi | R1 Psi>`.
pub fn branch_overlap_acceptance<T: Scalar>(
    r0: &ReversibleCircuit,
    r1: &ReversibleCircuit,
    witness: &NonNegativeState<T>,
    layout: &VerifierLayout,
) -> Result<T> {
    for r in [r0, r1] {
        if r.width != layout.width() {
            return Err(Error::WidthMismatch { expected: layout.width(), got: r.width });
        }
    }
    let mut gates = r0.gates.clone();
    gates.extend(r1.gates.iter().rev());
    let o = permuted_overlap(&CompiledCircuit::from_gates(&gates), layout, witness)?;
    Ok(T::half() + T::half() * o)
}

/// Explicit verifier for the branch-overlap test: one extra plus control `c`
/// (the output), plus one zero ancilla when a Toffoli has to be controlled.
pub fn build_branch_overlap_verifier(
    r0: &ReversibleCircuit,
    r1: &ReversibleCircuit,
    layout: &VerifierLayout,
) -> Result<StoqVerifier> {
    for r in [r0, r1] {
        if r.width != layout.width() {
            return Err(Error::WidthMismatch { expected: layout.width(), got: r.width });
        }
    }
    let need_anc = r0.has_toffoli() || r1.has_toffoli();
    let extra0 = need_anc as usize;
    let poff = layout.plus_offset();
    let remap = |q: usize| if q >= poff { q + extra0 } else { q };
    let new_layout = VerifierLayout {
        k: layout.k,
        ell: layout.ell,
        n0: layout.n0 + extra0,
        nplus: layout.nplus + 1,
        output: layout.width() + extra0,
    };
    let c = new_layout.output;
    let anc = need_anc.then_some(poff);
    let map = |g: &Gate| g.map(remap);
    let g0: Vec<Gate> = r0.gates.iter().map(map).collect();
    let g1: Vec<Gate> = r1.gates.iter().map(map).collect();
    let mut gates = vec![Gate::X(c)];
    gates.extend(crate::revsim::controlled_gates(&g0, c, anc)?);
    gates.push(Gate::X(c));
    gates.extend(crate::revsim::controlled_gates(&g1, c, anc)?);
    StoqVerifier::new(ReversibleCircuit::new(new_layout.width(), gates)?, new_layout)
}

/// `1/2 + 1/2 Tr(rho0 rho1)`.
pub fn swap_test_acceptance(rho0: &DensityMatrix, rho1: &DensityMatrix) -> Result<f64> {
    Ok(0.5 + 0.5 * rho0.overlap(rho1)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetBasis {
    Zero,
    Plus,
}

/// Squared fidelity between the designated output qubits of `R(Psi)` and the
/// product target `|0>/|+>` on those qubits.
pub fn close_image_fidelity<T: Scalar>(
    r: &ReversibleCircuit,
    layout: &VerifierLayout,
    witness: &NonNegativeState<T>,
    pattern: &[(usize, TargetBasis)],
) -> Result<f64> {
    if r.width != layout.width() {
        return Err(Error::WidthMismatch { expected: layout.width(), got: r.width });
    }
    let mut omask = 0u64;
    for &(q, _) in pattern {
        if q >= layout.width() {
            return Err(Error::QubitOutOfRange { qubit: q, width: layout.width() });
        }
        if omask >> q & 1 == 1 {
            return Err(Error::QubitCollision(q));
        }
        omask |= 1 << q;
    }
    let zmask: u64 = pattern.iter().filter(|p| p.1 == TargetBasis::Zero).map(|p| 1u64 << p.0).sum();
    let nplus_target = pattern.iter().filter(|p| p.1 == TargetBasis::Plus).count() as i32;
    let nu = 1u64 << layout.nplus;
    if (witness.support_len() as u64).saturating_mul(nu) > BRANCH_CAP {
        return Err(Error::CapExceeded("close-image enumeration".into()));
    }
    let rc = r.compiled();
    let amp_plus = 2f64.powi(-(layout.nplus as i32)).sqrt();
    let norm = witness.norm2().to_f64().sqrt();
    // <target| on the output qubits contracts Phi into a vector on the rest.
    let mut rest: HashMap<u64, f64> = HashMap::new();
    for (x, m) in witness.weights() {
        let a = m.to_f64() / norm * amp_plus;
        for u in 0..nu {
            let y = rc.apply(x | u << layout.plus_offset());
            if y & zmask != 0 {
                continue;
            }
            *rest.entry(y & !omask).or_insert(0.0) += a;
        }
    }
    let t = 2f64.powi(-nplus_target);
    Ok(rest.values().map(|v| v * v).sum::<f64>() * t)
}
