//! Rectangular closure testing for separable reversible circuit
//! distinguishability with perfect or nearly perfect completeness.
//!
//! Register layout of `Gamma`: `a` on qubits `[0, ell)`, `b` on
//! `[ell, 2 ell)`, then `m0` zero ancillas, then `r` plus ancillas.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::revsim::{inverse_gates, CompiledCircuit, Gate, ReversibleCircuit};
use crate::sepval::PartitionedMatrix;

pub const MAX_ELL: usize = 10;
pub const MAX_R: usize = 10;
pub const MAX_RECURSIVE_ELL: usize = 3;
pub const MAX_RECURSIVE_ROUNDS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SepRcdJson", into = "SepRcdJson")]
pub struct SepRcdInstance {
    pub gamma_circuit: ReversibleCircuit,
    pub ell: usize,
    pub m0: usize,
    pub r: usize,
}

#[derive(Serialize, Deserialize)]
struct SepRcdJson {
    width: usize,
    gates: Vec<Gate>,
    ell: usize,
    m0: usize,
    r: usize,
}

impl TryFrom<SepRcdJson> for SepRcdInstance {
    type Error = Error;
    fn try_from(j: SepRcdJson) -> Result<Self> {
        SepRcdInstance::new(ReversibleCircuit::new(j.width, j.gates)?, j.ell, j.m0, j.r)
    }
}

impl From<SepRcdInstance> for SepRcdJson {
    fn from(i: SepRcdInstance) -> Self {
        SepRcdJson { width: i.gamma_circuit.width, gates: i.gamma_circuit.gates, ell: i.ell, m0: i.m0, r: i.r }
    }
}

/// Outcome of one transition from the initialized sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transition {
    Good { a: u64, b: u64, u: u64 },
    Bad { z: u64 },
}

impl SepRcdInstance {
    pub fn new(gamma_circuit: ReversibleCircuit, ell: usize, m0: usize, r: usize) -> Result<Self> {
        let w = 2 * ell + m0 + r;
        if gamma_circuit.width != w {
            return Err(Error::WidthMismatch { expected: w, got: gamma_circuit.width });
        }
        if ell == 0 {
            return Err(Error::InvalidInstance("ell must be positive".into()));
        }
        Ok(Self { gamma_circuit, ell, m0, r })
    }

    pub fn width(&self) -> usize {
        2 * self.ell + self.m0 + self.r
    }

    fn evaluator(&self) -> Evaluator {
        Evaluator { c: self.gamma_circuit.compiled(), ell: self.ell, m0: self.m0, r: self.r }
    }

    pub fn transition(&self, a: u64, b: u64, u: u64) -> Transition {
        self.evaluator().step(a, b, u)
    }

    /// `Gamma(K(S, T)) ⊆ K(S, T)`, with `S`, `T` as membership tables.
    pub fn is_closed_rectangle(&self, s: &[bool], t: &[bool]) -> bool {
        let e = self.evaluator();
        members(s).all(|a| {
            members(t).all(|b| {
                (0..1u64 << self.r).all(|u| match e.step(a, b, u) {
                    Transition::Good { a, b, .. } => s[a as usize] && t[b as usize],
                    Transition::Bad { .. } => false,
                })
            })
        })
    }

    /// `G[(a', b'), (a, b)] = 2^-r #{u : good transition to (a', b')}`,
    /// indexed `a | b << ell`; `<Omega|Gamma|Omega> = psi^T G psi`.
    pub fn value_matrix(&self) -> Result<PartitionedMatrix> {
        if self.ell > 5 || self.r > 16 {
            return Err(Error::CapExceeded(format!("value matrix at ell = {}, r = {}", self.ell, self.r)));
        }
        let e = self.evaluator();
        let d = 1usize << self.ell;
        let mut g = DMatrix::zeros(d * d, d * d);
        let w = 0.5f64.powi(self.r as i32);
        for a in 0..d as u64 {
            for b in 0..d as u64 {
                for u in 0..1u64 << self.r {
                    if let Transition::Good { a: a2, b: b2, .. } = e.step(a, b, u) {
                        g[(a2 as usize | (b2 as usize) << self.ell, a as usize | (b as usize) << self.ell)] += w;
                    }
                }
            }
        }
        let sym = (&g + g.transpose()) * 0.5;
        PartitionedMatrix::new(vec![d, d], sym)
    }

    /// `1 - lambda_max(G_sym)`: a lower bound on the rejection gap of every
    /// non-negative product witness.
    pub fn certified_gamma(&self) -> Result<f64> {
        let m = self.value_matrix()?;
        let top = m.entries().clone().symmetric_eigen().eigenvalues.max();
        Ok(1.0 - top)
    }
}

fn members(set: &[bool]) -> impl Iterator<Item = u64> + '_ {
    set.iter().enumerate().filter(|(_, x)| **x).map(|(i, _)| i as u64)
}

#[derive(Clone)]
struct Evaluator {
    c: CompiledCircuit,
    ell: usize,
    m0: usize,
    r: usize,
}

impl Evaluator {
    fn step(&self, a: u64, b: u64, u: u64) -> Transition {
        let l = self.ell;
        let y = self.c.apply(a | b << l | u << (2 * l + self.m0));
        let mask = (1u64 << l) - 1;
        let z = y >> (2 * l) & ((1u64 << self.m0) - 1);
        if z != 0 {
            Transition::Bad { z }
        } else {
            Transition::Good { a: y & mask, b: y >> l & mask, u: y >> (2 * l + self.m0) & ((1u64 << self.r) - 1) }
        }
    }
}

/// Round count and threshold schedule, all magnitudes as log2 values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectClosureParams {
    pub gamma: f64,
    pub rounds: usize,
    pub log2_tau: Vec<f64>,
    pub log2_eps: f64,
}

impl RectClosureParams {
    pub fn new(ell: usize, r: usize, gamma: f64) -> Result<Self> {
        let rounds = round_bound(ell, gamma)?;
        Ok(Self {
            gamma,
            rounds,
            log2_tau: (0..=rounds).map(|t| log2_tau(ell, t)).collect(),
            log2_eps: completeness_log_eps(ell, r, rounds),
        })
    }
}

/// `ceil((2 ell ln 2 + 1) / ln(1 + gamma))`.
pub fn round_bound(ell: usize, gamma: f64) -> Result<usize> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Range(format!("gamma = {gamma} outside (0, 1)")));
    }
    Ok(((2.0 * ell as f64 * std::f64::consts::LN_2 + 1.0) / gamma.ln_1p()).ceil() as usize)
}

/// `5 - r - 2^(L+1) (ell + 4)`.
pub fn completeness_log_eps(ell: usize, r: usize, rounds: usize) -> f64 {
    5.0 - r as f64 - 2f64.powi(rounds as i32 + 1) * (ell as f64 + 4.0)
}

/// `-(ell + 4) 2^t + 4`, the closed form of `tau_0 = 2^-ell`,
/// `tau_{t+1} = tau_t^2 / 16`.
pub fn log2_tau(ell: usize, t: usize) -> f64 {
    -(ell as f64 + 4.0) * 2f64.powi(t as i32) + 4.0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLog {
    pub seed: (u64, u64),
    /// `(|S_t|, |T_t|)` for every round reached.
    pub sizes: Vec<(usize, usize)>,
    pub bad_round: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub accept: bool,
    pub seed: Option<(u64, u64)>,
    pub rounds: usize,
    /// Seeds scanned in lexicographic order up to the verdict.
    pub seeds: Vec<SeedLog>,
}

/// One closure round. `None` when the round is bad.
pub fn closure_round(inst: &SepRcdInstance, s: &[bool], t: &[bool]) -> Option<(Vec<bool>, Vec<bool>)> {
    closure_step(&inst.evaluator(), s, t)
}

fn closure_step(e: &Evaluator, s: &[bool], t: &[bool]) -> Option<(Vec<bool>, Vec<bool>)> {
    let mut s2 = s.to_vec();
    let mut t2 = t.to_vec();
    for a in members(s) {
        for b in members(t) {
            for u in 0..1u64 << e.r {
                match e.step(a, b, u) {
                    Transition::Bad { .. } => return None,
                    Transition::Good { a, b, .. } => {
                        s2[a as usize] = true;
                        t2[b as usize] = true;
                    }
                }
            }
        }
    }
    Some((s2, t2))
}

fn run_seed(e: &Evaluator, a0: u64, b0: u64, rounds: usize) -> SeedLog {
    let d = 1usize << e.ell;
    let mut s = vec![false; d];
    let mut t = vec![false; d];
    s[a0 as usize] = true;
    t[b0 as usize] = true;
    let mut sizes = vec![(1, 1)];
    for round in 0..rounds {
        match closure_step(e, &s, &t) {
            None => return SeedLog { seed: (a0, b0), sizes, bad_round: Some(round) },
            Some((s2, t2)) => {
                s = s2;
                t = t2;
                sizes.push((s.iter().filter(|x| **x).count(), t.iter().filter(|x| **x).count()));
            }
        }
    }
    SeedLog { seed: (a0, b0), sizes, bad_round: None }
}

fn check_caps(inst: &SepRcdInstance, max_ell: usize) -> Result<()> {
    if inst.ell > max_ell.min(MAX_ELL) || inst.r > MAX_R {
        return Err(Error::CapExceeded(format!("ell = {}, r = {}", inst.ell, inst.r)));
    }
    Ok(())
}

/// Explicit-table closure testing with `rounds` rounds (the bound from
/// `gamma` when `None`). Parallel seed scanning returns the same report.
pub fn rect_closure_test(inst: &SepRcdInstance, gamma: f64, rounds: Option<usize>, parallel: bool) -> Result<ClosureReport> {
    check_caps(inst, MAX_ELL)?;
    let rounds = match rounds {
        Some(r) => r,
        None => round_bound(inst.ell, gamma)?,
    };
    let e = inst.evaluator();
    let d = 1u64 << inst.ell;
    let seeds: Vec<(u64, u64)> = (0..d).flat_map(|a| (0..d).map(move |b| (a, b))).collect();
    let logs: Vec<SeedLog> = if parallel {
        let all: Vec<SeedLog> = seeds.par_iter().map(|&(a, b)| run_seed(&e, a, b, rounds)).collect();
        match all.iter().position(|l| l.bad_round.is_none()) {
            Some(i) => all.into_iter().take(i + 1).collect(),
            None => all,
        }
    } else {
        let mut out = Vec::new();
        for &(a, b) in &seeds {
            let log = run_seed(&e, a, b, rounds);
            let done = log.bad_round.is_none();
            out.push(log);
            if done {
                break;
            }
        }
        out
    };
    let seed = logs.last().filter(|l| l.bad_round.is_none()).map(|l| l.seed);
    Ok(ClosureReport { accept: seed.is_some(), seed, rounds, seeds: logs })
}

/// Membership predicates of the closure, evaluated by depth-first recursion
/// that holds only the current path.
struct Recursive<'a> {
    e: &'a Evaluator,
    seed: (u64, u64),
}

impl Recursive<'_> {
    fn d(&self) -> u64 {
        1u64 << self.e.ell
    }

    /// `x in S_t` (`side = 0`) or `x in T_t` (`side = 1`).
    fn chi(&self, side: usize, t: usize, x: u64) -> bool {
        if t == 0 {
            return x == if side == 0 { self.seed.0 } else { self.seed.1 };
        }
        if self.chi(side, t - 1, x) {
            return true;
        }
        for a in 0..self.d() {
            for b in 0..self.d() {
                let hit = (0..1u64 << self.e.r).any(|u| match self.e.step(a, b, u) {
                    Transition::Good { a: a2, b: b2, .. } => (if side == 0 { a2 } else { b2 }) == x,
                    Transition::Bad { .. } => false,
                });
                if hit && self.chi(0, t - 1, a) && self.chi(1, t - 1, b) {
                    return true;
                }
            }
        }
        false
    }

    fn round_bad(&self, t: usize) -> bool {
        for a in 0..self.d() {
            for b in 0..self.d() {
                let bad = (0..1u64 << self.e.r).any(|u| matches!(self.e.step(a, b, u), Transition::Bad { .. }));
                if bad && self.chi(0, t, a) && self.chi(1, t, b) {
                    return true;
                }
            }
        }
        false
    }
}

/// Same verdict as [`rect_closure_test`] in polynomial space, at
/// demonstration scale only.
pub fn rect_closure_test_recursive(inst: &SepRcdInstance, gamma: f64, rounds: Option<usize>) -> Result<ClosureReport> {
    check_caps(inst, MAX_RECURSIVE_ELL)?;
    let rounds = match rounds {
        Some(r) => r,
        None => round_bound(inst.ell, gamma)?,
    };
    if rounds > MAX_RECURSIVE_ROUNDS {
        return Err(Error::CapExceeded(format!("{rounds} recursive rounds")));
    }
    let e = inst.evaluator();
    let d = 1u64 << inst.ell;
    let mut seeds = Vec::new();
    for a in 0..d {
        for b in 0..d {
            let rec = Recursive { e: &e, seed: (a, b) };
            let bad_round = (0..rounds).find(|&t| rec.round_bad(t));
            let done = bad_round.is_none();
            seeds.push(SeedLog { seed: (a, b), sizes: Vec::new(), bad_round });
            if done {
                return Ok(ClosureReport { accept: true, seed: Some((a, b)), rounds, seeds });
            }
        }
    }
    Ok(ClosureReport { accept: false, seed: None, rounds, seeds })
}

/// X on `target` when every control is 1, using zero scratch qubits that are
/// returned clean.
fn mcx(controls: &[usize], target: usize, scratch: &[usize]) -> Vec<Gate> {
    match controls.len() {
        0 => vec![Gate::X(target)],
        1 => vec![Gate::Cnot(controls[0], target)],
        2 => vec![Gate::Ccx(controls[0], controls[1], target)],
        n => {
            let mut ladder = vec![Gate::Ccx(controls[0], controls[1], scratch[0])];
            for i in 2..n - 1 {
                ladder.push(Gate::Ccx(scratch[i - 2], controls[i], scratch[i - 1]));
            }
            let mut out = ladder.clone();
            out.push(Gate::Ccx(scratch[n - 3], controls[n - 1], target));
            out.extend(inverse_gates(&ladder));
            out
        }
    }
}

/// Flip `flag` on every value of `reg` outside `set`.
fn flag_outside(reg: &[usize], set: &[bool], flag: usize, scratch: &[usize]) -> Vec<Gate> {
    let mut out = Vec::new();
    for (x, inside) in set.iter().enumerate() {
        if *inside {
            continue;
        }
        let flips: Vec<Gate> = reg.iter().enumerate().filter(|(i, _)| x >> i & 1 == 0).map(|(_, q)| Gate::X(*q)).collect();
        out.extend(flips.iter().copied());
        out.extend(mcx(reg, flag, scratch));
        out.extend(flips);
    }
    out
}

fn random_gate(rng: &mut ChaCha8Rng, qubits: &[usize]) -> Gate {
    let mut q = qubits.to_vec();
    q.shuffle(rng);
    match rng.gen_range(0..3usize.min(q.len())) {
        0 => Gate::X(q[0]),
        1 => Gate::Cnot(q[0], q[1]),
        _ => Gate::Ccx(q[0], q[1], q[2]),
    }
}

/// Orbits of the permutation computed by `gates` on `bits` qubits.
fn orbits(gates: &[Gate], bits: usize) -> Vec<Vec<usize>> {
    let c = CompiledCircuit::from_gates(gates);
    let mut seen = vec![false; 1 << bits];
    let mut out = Vec::new();
    for x in 0..1usize << bits {
        if seen[x] {
            continue;
        }
        let mut orbit = vec![];
        let mut y = x;
        while !seen[y] {
            seen[y] = true;
            orbit.push(y);
            y = c.apply(y as u64) as usize;
        }
        out.push(orbit);
    }
    out
}

/// A perfectly agreeing instance with its closed rectangle `(S, T)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YesInstance {
    pub instance: SepRcdInstance,
    pub s: Vec<bool>,
    pub t: Vec<bool>,
}

/// Random permutations of the two witness registers, `S` and `T` unions of
/// their orbits, flags raised outside the rectangle, and a `u` scrambler
/// controlled by the witness.
pub fn random_yes_instance(ell: usize, r: usize, gates: usize, seed: u64) -> Result<YesInstance> {
    if ell == 0 || ell > 6 {
        return Err(Error::CapExceeded(format!("constructor at ell = {ell}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m0 = 2 + ell.saturating_sub(2);
    let a: Vec<usize> = (0..ell).collect();
    let b: Vec<usize> = (ell..2 * ell).collect();
    let flags = [2 * ell, 2 * ell + 1];
    let scratch: Vec<usize> = (2 * ell + 2..2 * ell + m0).collect();
    let u: Vec<usize> = (2 * ell + m0..2 * ell + m0 + r).collect();
    let local = |rng: &mut ChaCha8Rng| -> Vec<Gate> {
        let q: Vec<usize> = (0..ell).collect();
        (0..gates).map(|_| random_gate(rng, &q)).collect()
    };
    let pick = |rng: &mut ChaCha8Rng, gs: &[Gate]| -> Vec<bool> {
        let orbs = orbits(gs, ell);
        let mut set = vec![false; 1 << ell];
        let first = rng.gen_range(0..orbs.len());
        for (i, o) in orbs.iter().enumerate() {
            if i == first || rng.gen_bool(0.3) {
                for x in o {
                    set[*x] = true;
                }
            }
        }
        set
    };
    let pa = local(&mut rng);
    let pb = local(&mut rng);
    let s = pick(&mut rng, &pa);
    let t = pick(&mut rng, &pb);
    let mut out = flag_outside(&a, &s, flags[0], &scratch);
    out.extend(flag_outside(&b, &t, flags[1], &scratch));
    for _ in 0..r * 2 {
        if r == 0 {
            break;
        }
        let target = u[rng.gen_range(0..r)];
        let control = rng.gen_range(0..2 * ell + r + 1);
        out.push(if control < 2 * ell { Gate::Cnot(control, target) } else { Gate::X(target) });
    }
    out.extend(pa.iter().map(|g| g.map(|q| a[q])));
    out.extend(pb.iter().map(|g| g.map(|q| b[q])));
    let circuit = ReversibleCircuit::new(2 * ell + m0 + r, out)?;
    Ok(YesInstance { instance: SepRcdInstance::new(circuit, ell, m0, r)?, s, t })
}

/// Random circuit over the whole register.
pub fn random_instance(ell: usize, m0: usize, r: usize, gates: usize, seed: u64) -> Result<SepRcdInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = 2 * ell + m0 + r;
    let q: Vec<usize> = (0..w).collect();
    let gs = (0..gates).map(|_| random_gate(&mut rng, &q)).collect();
    SepRcdInstance::new(ReversibleCircuit::new(w, gs)?, ell, m0, r)
}

/// Random instance whose certified gap is at least `min_gamma`, by rejection
/// sampling. Returns the instance with its certified gap.
pub fn certified_no_instance(ell: usize, m0: usize, r: usize, min_gamma: f64, seed: u64) -> Result<(SepRcdInstance, f64)> {
    for attempt in 0..10_000u64 {
        let inst = random_instance(ell, m0, r, 4 + (attempt % 8) as usize, seed.wrapping_mul(10_007).wrapping_add(attempt))?;
        let g = inst.certified_gamma()?;
        if g >= min_gamma {
            return Ok((inst, g.min(1.0 - 1e-9)));
        }
    }
    Err(Error::NoConvergence(format!("no certified instance with gap {min_gamma}")))
}
