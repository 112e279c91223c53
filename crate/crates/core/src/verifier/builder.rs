//! Incremental construction of verifiers over virtual qubits.
//!
//! Qubits are allocated by role and renumbered into the canonical layout by
//! [`Builder::finish`]. Scratch zeros are shared: every helper that borrows one
//! returns it to `|0>` before its gate list ends.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::revsim::{controlled_gates, gate_support, inverse_gates, Gate, ReversibleCircuit};
use crate::verifier::{StoqVerifier, VerifierLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Witness,
    Zero,
    Plus,
}

#[derive(Debug, Clone)]
pub struct Builder {
    k: usize,
    ell: usize,
    roles: Vec<Role>,
    scratch: Vec<usize>,
}

impl Builder {
    pub fn new(k: usize, ell: usize) -> Self {
        Self { k, ell, roles: vec![Role::Witness; k * ell], scratch: Vec::new() }
    }

    pub fn witness(&self, prover: usize, bit: usize) -> usize {
        assert!(prover < self.k && bit < self.ell);
        prover * self.ell + bit
    }

    /// Qubits of one prover register.
    pub fn prover(&self, prover: usize) -> Vec<usize> {
        (0..self.ell).map(|b| self.witness(prover, b)).collect()
    }

    pub fn zero(&mut self) -> usize {
        self.roles.push(Role::Zero);
        self.roles.len() - 1
    }

    pub fn plus(&mut self) -> usize {
        self.roles.push(Role::Plus);
        self.roles.len() - 1
    }

    pub fn zeros(&mut self, n: usize) -> Vec<usize> {
        (0..n).map(|_| self.zero()).collect()
    }

    pub fn pluses(&mut self, n: usize) -> Vec<usize> {
        (0..n).map(|_| self.plus()).collect()
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    /// `n` distinct scratch zeros outside `exclude`, allocating as needed.
    pub fn scratch(&mut self, n: usize, exclude: &BTreeSet<usize>) -> Vec<usize> {
        let mut out: Vec<usize> = self.scratch.iter().copied().filter(|q| !exclude.contains(q)).take(n).collect();
        while out.len() < n {
            let q = self.zero();
            self.scratch.push(q);
            out.push(q);
        }
        out
    }

    /// Gate list of `v` with its witness qubits sent through `witness_map` and
    /// fresh ancillas; also returns the image of `v`'s output qubit.
    pub fn embed(&mut self, v: &StoqVerifier, witness_map: &[usize]) -> Result<(Vec<Gate>, usize)> {
        let l = &v.layout;
        if witness_map.len() != l.witness_width() {
            return Err(Error::WidthMismatch { expected: l.witness_width(), got: witness_map.len() });
        }
        let mut map = witness_map.to_vec();
        map.extend(self.zeros(l.n0));
        map.extend(self.pluses(l.nplus));
        let gates = v.circuit.gates.iter().map(|g| g.map(|q| map[q])).collect();
        Ok((gates, map[l.output]))
    }

    /// Fresh ancillas in the order `v` expects them after its witness.
    pub fn ancillas_for(&mut self, v: &StoqVerifier) -> Vec<usize> {
        let mut a = self.zeros(v.layout.n0);
        a.extend(self.pluses(v.layout.nplus));
        a
    }

    /// `V X_O V^-1` on caller-chosen witness and ancilla qubits, so several
    /// exclusive branches can share one set of ancillas.
    pub fn gamma_with(&self, v: &StoqVerifier, witness_map: &[usize], ancillas: &[usize]) -> Result<Vec<Gate>> {
        let l = &v.layout;
        if witness_map.len() != l.witness_width() {
            return Err(Error::WidthMismatch { expected: l.witness_width(), got: witness_map.len() });
        }
        if ancillas.len() != l.n0 + l.nplus {
            return Err(Error::WidthMismatch { expected: l.n0 + l.nplus, got: ancillas.len() });
        }
        let map: Vec<usize> = witness_map.iter().chain(ancillas).copied().collect();
        let gates: Vec<Gate> = v.circuit.gates.iter().map(|g| g.map(|q| map[q])).collect();
        let mut out = gates.clone();
        out.push(Gate::X(map[l.output]));
        out.extend(inverse_gates(&gates));
        Ok(out)
    }

    /// `V X_O V^-1` of an embedded verifier.
    pub fn embed_gamma(&mut self, v: &StoqVerifier, witness_map: &[usize]) -> Result<Vec<Gate>> {
        let (gates, out) = self.embed(v, witness_map)?;
        let mut g = gates.clone();
        g.push(Gate::X(out));
        g.extend(inverse_gates(&gates));
        Ok(g)
    }

    /// `body` conditioned on `control`, through a scratch zero if needed.
    pub fn controlled(&mut self, body: &[Gate], control: usize) -> Result<Vec<Gate>> {
        let anc = if body.iter().any(|g| matches!(g, Gate::Ccx(..))) {
            let mut ex = gate_support(body);
            ex.insert(control);
            Some(self.scratch(1, &ex)[0])
        } else {
            None
        };
        controlled_gates(body, control, anc)
    }

    /// X on `target` when every `(qubit, value)` control matches.
    pub fn mcx(&mut self, controls: &[(usize, bool)], target: usize) -> Vec<Gate> {
        let flips: Vec<Gate> = controls.iter().filter(|c| !c.1).map(|c| Gate::X(c.0)).collect();
        let qs: Vec<usize> = controls.iter().map(|c| c.0).collect();
        let mut core = Vec::new();
        match qs.len() {
            0 => core.push(Gate::X(target)),
            1 => core.push(Gate::Cnot(qs[0], target)),
            2 => core.push(Gate::Ccx(qs[0], qs[1], target)),
            n => {
                let mut ex: BTreeSet<usize> = qs.iter().copied().collect();
                ex.insert(target);
                let anc = self.scratch(n - 2, &ex);
                let mut ladder = vec![Gate::Ccx(qs[0], qs[1], anc[0])];
                for i in 2..n - 1 {
                    ladder.push(Gate::Ccx(anc[i - 2], qs[i], anc[i - 1]));
                }
                core.extend(ladder.iter().copied());
                core.push(Gate::Ccx(anc[n - 3], qs[n - 1], target));
                core.extend(inverse_gates(&ladder));
            }
        }
        let mut out = flips.clone();
        out.extend(core);
        out.extend(flips);
        out
    }

    /// `body` applied exactly on branches where the pattern matches.
    pub fn select(&mut self, pattern: &[(usize, bool)], body: &[Gate]) -> Result<Vec<Gate>> {
        if body.is_empty() {
            return Ok(Vec::new());
        }
        let support = gate_support(body);
        if let Some(q) = pattern.iter().find(|p| support.contains(&p.0)) {
            return Err(Error::QubitCollision(q.0));
        }
        match pattern.len() {
            0 => Ok(body.to_vec()),
            1 if pattern[0].1 => self.controlled(body, pattern[0].0),
            _ => {
                let mut ex = support;
                ex.extend(pattern.iter().map(|p| p.0));
                let flag = self.scratch(1, &ex)[0];
                let compute = self.mcx(pattern, flag);
                let mut out = compute.clone();
                out.extend(self.controlled(body, flag)?);
                out.extend(compute);
                Ok(out)
            }
        }
    }

    /// XOR the bits of `f(x)` into `out`, where `x` is read little-endian from
    /// `inputs`. Patterns with `f(x) = 0` emit nothing.
    pub fn xor_function(&mut self, inputs: &[usize], out: &[usize], f: impl Fn(u64) -> u64) -> Vec<Gate> {
        let mut gates = Vec::new();
        for x in 0..1u64 << inputs.len() {
            let y = f(x);
            if y == 0 {
                continue;
            }
            let pattern: Vec<(usize, bool)> = inputs.iter().enumerate().map(|(i, q)| (*q, x >> i & 1 == 1)).collect();
            for (j, &o) in out.iter().enumerate() {
                if y >> j & 1 == 1 {
                    gates.extend(self.mcx(&pattern, o));
                }
            }
        }
        gates
    }

    /// Renumber into the canonical layout.
    pub fn finish(self, gates: &[Gate], output: usize) -> Result<StoqVerifier> {
        let n = self.roles.len();
        if output >= n {
            return Err(Error::QubitOutOfRange { qubit: output, width: n });
        }
        for q in gate_support(gates) {
            if q >= n {
                return Err(Error::QubitOutOfRange { qubit: q, width: n });
            }
        }
        let mut map = vec![0usize; n];
        let mut next = 0;
        for role in [Role::Witness, Role::Zero, Role::Plus] {
            for (q, r) in self.roles.iter().enumerate() {
                if *r == role {
                    map[q] = next;
                    next += 1;
                }
            }
        }
        let count = |r: Role| self.roles.iter().filter(|x| **x == r).count();
        let layout = VerifierLayout {
            k: self.k,
            ell: self.ell,
            n0: count(Role::Zero),
            nplus: count(Role::Plus),
            output: map[output],
        };
        let mapped = gates.iter().map(|g| g.map(|q| map[q])).collect();
        StoqVerifier::new(ReversibleCircuit::new(layout.width(), mapped)?, layout)
    }

    /// Branch-overlap wrapper of `(Gamma, I)`: a fresh plus qubit controls
    /// `gamma` and is the output.
    pub fn finish_gamma(mut self, gamma: &[Gate]) -> Result<StoqVerifier> {
        let c = self.plus();
        let gates = self.controlled(gamma, c)?;
        self.finish(&gates, c)
    }
}

/// Split `[lo, hi)` inside `[0, 2^p)` into aligned dyadic blocks, each given as
/// a pattern on the top bits of a little-endian `p`-bit register.
pub fn dyadic_cover(lo: u64, hi: u64, p: usize) -> Vec<Vec<(usize, bool)>> {
    let mut out = Vec::new();
    let mut a = lo;
    while a < hi {
        let mut size = 1u64;
        while a.is_multiple_of(size * 2) && a + size * 2 <= hi && size * 2 <= 1 << p {
            size *= 2;
        }
        let free = size.trailing_zeros() as usize;
        out.push((free..p).map(|i| (i, a >> i & 1 == 1)).collect());
        a += size;
    }
    out
}
