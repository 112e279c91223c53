//! NP certification over constraint graphs: the branch-local protocol with a
//! collision-count uniformity test, the two-sample protocol with exact
//! rejection values, and a generalized birthday Monte Carlo.
//!
//! A vertex-label pair `(v, a)` is encoded as `v | a << vertex_bits`.

use std::collections::{BTreeSet, HashMap, HashSet};

use num_traits::{One, Zero};
use rand::distributions::{Distribution as _, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};
use crate::states::{Distribution, NonNegativeState};
use crate::verifier::builder::Builder;
use crate::verifier::StoqVerifier;

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.5758;
/// Frozen calibration constant: `K = ceil(C sqrt n)`.
pub const DEFAULT_C: f64 = 18.0;
/// Largest witness register compiled into a truth-table circuit.
pub const MAX_TABLE_BITS: usize = 12;
/// Exact enumeration is used up to this many branches.
pub const EXACT_BRANCHES: u64 = 1_000_000;
const CHUNK: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub u: usize,
    pub v: usize,
    pub relation: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCgJson {
    pub vertices: usize,
    pub degree: usize,
    pub alphabet: usize,
    pub edges: Vec<EdgeJson>,
    #[serde(default)]
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationKind {
    Equality,
    Disequality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapCgInstance {
    n: usize,
    degree: usize,
    q: usize,
    eta: f64,
    /// Non-loop edges `(u, v)` with `R_uv`.
    edges: Vec<(usize, usize, BTreeSet<(usize, usize)>)>,
    lookup: HashMap<(usize, usize), (usize, bool)>,
    adj: Vec<Vec<usize>>,
    self_loops: usize,
}

fn bits_for(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()) as usize
}

impl GapCgInstance {
    /// Self-loops only count toward the degree.
    pub fn new(n: usize, degree: usize, q: usize, eta: f64, edges: Vec<(usize, usize, Vec<(usize, usize)>)>) -> Result<Self> {
        if n == 0 || q == 0 {
            return Err(Error::InvalidInstance("need at least one vertex and one label".into()));
        }
        let mut deg = vec![0usize; n];
        let mut kept = Vec::new();
        let mut lookup = HashMap::new();
        let mut adj = vec![Vec::new(); n];
        let mut self_loops = 0;
        for (u, v, rel) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidInstance(format!("edge ({u}, {v}) outside {n} vertices")));
            }
            if let Some((a, b)) = rel.iter().find(|(a, b)| *a >= q || *b >= q) {
                return Err(Error::InvalidInstance(format!("relation pair ({a}, {b}) outside alphabet {q}")));
            }
            if u == v {
                deg[u] += 1;
                self_loops += 1;
                continue;
            }
            if lookup.contains_key(&(u, v)) {
                return Err(Error::InvalidInstance(format!("duplicate edge ({u}, {v})")));
            }
            deg[u] += 1;
            deg[v] += 1;
            let idx = kept.len();
            lookup.insert((u, v), (idx, false));
            lookup.insert((v, u), (idx, true));
            adj[u].push(v);
            adj[v].push(u);
            kept.push((u, v, rel.into_iter().collect()));
        }
        if let Some(v) = (0..n).find(|v| deg[*v] > degree) {
            return Err(Error::InvalidInstance(format!("vertex {v} has degree {} > {degree}", deg[v])));
        }
        Ok(Self { n, degree, q, eta, edges: kept, lookup, adj, self_loops })
    }

    pub fn from_json(j: GapCgJson) -> Result<Self> {
        let edges = j.edges.into_iter().map(|e| (e.u, e.v, e.relation.into_iter().map(|p| (p[0], p[1])).collect())).collect();
        Self::new(j.vertices, j.degree, j.alphabet, j.eta, edges)
    }

    pub fn to_json(&self) -> GapCgJson {
        GapCgJson {
            vertices: self.n,
            degree: self.degree,
            alphabet: self.q,
            eta: self.eta,
            edges: self
                .edges
                .iter()
                .map(|(u, v, r)| EdgeJson { u: *u, v: *v, relation: r.iter().map(|(a, b)| [*a, *b]).collect() })
                .collect(),
        }
    }

    fn relation(kind: RelationKind, q: usize) -> Vec<(usize, usize)> {
        (0..q)
            .flat_map(|a| (0..q).map(move |b| (a, b)))
            .filter(|(a, b)| (a == b) == (kind == RelationKind::Equality))
            .collect()
    }

    /// Cycle on `n >= 3` vertices, one relation kind on every edge.
    pub fn cycle(n: usize, q: usize, kind: RelationKind, eta: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidInstance("cycle needs n >= 3".into()));
        }
        let edges = (0..n).map(|i| (i, (i + 1) % n, Self::relation(kind, q))).collect();
        Self::new(n, 2, q, eta, edges)
    }

    /// Path `0 - 1 - ... - (n-1)`, padded to degree 2.
    pub fn path(n: usize, q: usize, kind: RelationKind) -> Result<Self> {
        let edges = (0..n.saturating_sub(1)).map(|i| (i, i + 1, Self::relation(kind, q))).collect();
        Self::new(n, 2, q, 0.0, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn alphabet(&self) -> usize {
        self.q
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn self_loops(&self) -> usize {
        self.self_loops
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &BTreeSet<(usize, usize)>)> {
        self.edges.iter().map(|(u, v, r)| (*u, *v, r))
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn vertex_bits(&self) -> usize {
        bits_for(self.n)
    }

    pub fn label_bits(&self) -> usize {
        bits_for(self.q)
    }

    /// Qubits of one vertex-label register.
    pub fn width(&self) -> usize {
        self.vertex_bits() + self.label_bits()
    }

    pub fn encode(&self, v: usize, a: usize) -> u64 {
        (v | a << self.vertex_bits()) as u64
    }

    pub fn decode(&self, x: u64) -> Option<(usize, usize)> {
        let vb = self.vertex_bits();
        let v = (x & ((1u64 << vb) - 1)) as usize;
        let a = (x >> vb) as usize;
        (v < self.n && a < self.q).then_some((v, a))
    }

    pub fn is_edge(&self, u: usize, v: usize) -> bool {
        self.lookup.contains_key(&(u, v))
    }

    /// `(a, b) in R_uv`; true when `uv` is not an edge.
    pub fn allowed(&self, u: usize, a: usize, v: usize, b: usize) -> bool {
        match self.lookup.get(&(u, v)) {
            None => true,
            Some(&(idx, flipped)) => {
                let pair = if flipped { (b, a) } else { (a, b) };
                self.edges[idx].2.contains(&pair)
            }
        }
    }

    pub fn check_labeling(&self, labeling: &[usize]) -> Result<()> {
        if labeling.len() != self.n {
            return Err(Error::DimensionMismatch(self.n, labeling.len()));
        }
        if let Some(v) = labeling.iter().position(|a| *a >= self.q) {
            return Err(Error::InvalidInstance(format!("label of vertex {v} outside alphabet")));
        }
        for (u, v, _) in &self.edges {
            if !self.allowed(*u, labeling[*u], *v, labeling[*v]) {
                return Err(Error::UnsatisfiedEdge { u: *u, v: *v });
            }
        }
        Ok(())
    }

    /// Fraction of edges violated by the best labeling, by exhaustive search.
    pub fn min_violation(&self) -> Result<f64> {
        let (bad, _) = self.best_labeling()?;
        Ok(if self.edges.is_empty() { 0.0 } else { bad as f64 / self.edges.len() as f64 })
    }

    /// Lexicographically first labeling (vertex 0 least significant) with the
    /// fewest violated edges, and that count.
    pub fn best_labeling(&self) -> Result<(usize, Vec<usize>)> {
        let total = (self.q as f64).powi(self.n as i32);
        if total > 1e7 {
            return Err(Error::CapExceeded(format!("{} labelings", total)));
        }
        let mut lab = vec![0usize; self.n];
        let mut best = (usize::MAX, lab.clone());
        loop {
            let bad = self.edges.iter().filter(|(u, v, _)| !self.allowed(*u, lab[*u], *v, lab[*v])).count();
            if bad < best.0 {
                best = (bad, lab.clone());
            }
            let mut i = 0;
            loop {
                if i == self.n {
                    return Ok(best);
                }
                lab[i] += 1;
                if lab[i] < self.q {
                    break;
                }
                lab[i] = 0;
                i += 1;
            }
        }
    }
}

/// Uniform subset state over `{(v, iota(v))}`.
pub fn honest_witness<T: Scalar>(inst: &GapCgInstance, labeling: &[usize]) -> Result<NonNegativeState<T>> {
    inst.check_labeling(labeling)?;
    NonNegativeState::subset(inst.width(), labeling.iter().enumerate().map(|(v, a)| inst.encode(v, *a)))
}

pub fn honest_distribution<T: Scalar>(inst: &GapCgInstance, labeling: &[usize]) -> Result<Distribution<T>> {
    inst.check_labeling(labeling)?;
    let w = T::one() / T::from_u64(inst.n as u64);
    Distribution::new(labeling.iter().enumerate().map(|(v, a)| (inst.encode(v, *a), w.clone())))
}

/// Derived quantities of a one-copy distribution over vertex-label pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDistribution {
    /// `p[v][a]`.
    pub p: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub plurality: Vec<usize>,
    pub ambiguity: Vec<f64>,
    pub delta: f64,
    pub kappa: f64,
    pub tv_to_uniform: f64,
}

impl BranchDistribution {
    pub fn new(inst: &GapCgInstance, dist: &Distribution<f64>) -> Result<Self> {
        let mut p = vec![vec![0.0; inst.q]; inst.n];
        for (x, w) in dist.probs() {
            let (v, a) = inst.decode(*x).ok_or_else(|| Error::InvalidState(format!("invalid encoding {x}")))?;
            p[v][a] += w;
        }
        let q: Vec<f64> = p.iter().map(|r| r.iter().sum()).collect();
        let plurality: Vec<usize> = p
            .iter()
            .map(|r| r.iter().enumerate().fold((0, f64::MIN), |b, (a, x)| if *x > b.1 { (a, *x) } else { b }).0)
            .collect();
        let ambiguity = (0..inst.n).map(|v| if q[v] > 0.0 { 1.0 - p[v][plurality[v]] / q[v] } else { 0.0 }).collect();
        let tv = 0.5 * q.iter().map(|x| (x - 1.0 / inst.n as f64).abs()).sum::<f64>();
        Ok(Self { p, q, plurality, ambiguity, delta: inst.eta / 48.0, kappa: inst.eta / 64.0, tv_to_uniform: tv })
    }

    /// Conditional label distribution `r_v`.
    pub fn conditional(&self, v: usize) -> Option<Vec<f64>> {
        (self.q[v] > 0.0).then(|| self.p[v].iter().map(|x| x / self.q[v]).collect())
    }
}

/// Number of colliding sample pairs.
pub fn collision_pairs(samples: &[usize]) -> u64 {
    let mut counts: HashMap<usize, u64> = HashMap::new();
    for s in samples {
        *counts.entry(*s).or_default() += 1;
    }
    counts.values().map(|c| c * (c - 1) / 2).sum()
}

/// `(K (K - 1) / (2 n)) (1 + delta^2 / 2)`.
pub fn paninski_threshold(k: usize, n: usize, delta: f64) -> f64 {
    (k * k.saturating_sub(1)) as f64 / (2.0 * n as f64) * (1.0 + delta * delta / 2.0)
}

pub fn paninski_predicate(samples: &[usize], n: usize, delta: f64) -> bool {
    collision_pairs(samples) as f64 <= paninski_threshold(samples.len(), n, delta)
}

/// Accept unless a vertex repeats with two labels or an edge carries a pair
/// outside its relation.
pub fn consistency_predicate(branch: &[(usize, usize)], inst: &GapCgInstance) -> bool {
    let mut label: HashMap<usize, usize> = HashMap::new();
    for &(v, a) in branch {
        if *label.entry(v).or_insert(a) != a {
            return false;
        }
    }
    label.iter().all(|(&v, &a)| inst.adj[v].iter().all(|&w| label.get(&w).is_none_or(|&b| inst.allowed(v, a, w, b))))
}

/// Uniformity and consistency on one decoded branch.
pub fn branch_accepts(inst: &GapCgInstance, branch: &[(usize, usize)], delta: f64) -> bool {
    let vs: Vec<usize> = branch.iter().map(|b| b.0).collect();
    paninski_predicate(&vs, inst.n, delta) && consistency_predicate(branch, inst)
}

fn decode_branch(inst: &GapCgInstance, x: u64, k: usize) -> Option<Vec<(usize, usize)>> {
    let w = inst.width();
    (0..k).map(|i| inst.decode(x >> (i * w) & ((1u64 << w) - 1))).collect()
}

/// `K` copies of one vertex-label register; a zero flag records rejection.
pub fn build_protocol4_verifier(inst: &GapCgInstance, k: usize, delta: f64) -> Result<StoqVerifier> {
    let w = inst.width();
    if k == 0 || k * w > MAX_TABLE_BITS {
        return Err(Error::CapExceeded(format!("{k} copies of {w} qubits")));
    }
    let mut b = Builder::new(k, w);
    let inputs: Vec<usize> = (0..k).flat_map(|i| b.prover(i)).collect();
    let f = b.zero();
    let gates = b.xor_function(&inputs, &[f], |x| match decode_branch(inst, x, k) {
        Some(br) => !branch_accepts(inst, &br, delta) as u64,
        None => 1,
    });
    b.finish_gamma(&gates)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub successes: u64,
    pub exact: bool,
}

impl Estimate {
    fn exact(value: f64) -> Self {
        Self { value, ci_low: value, ci_high: value, trials: 0, successes: 0, exact: true }
    }

    fn from_counts(successes: u64, trials: u64) -> Self {
        let (lo, hi) = wilson(successes, trials, Z99);
        Self { value: successes as f64 / trials as f64, ci_low: lo, ci_high: hi, trials, successes, exact: false }
    }
}

/// Wilson score interval.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Fraction of trials in which `hit` holds; trial chunks draw from ChaCha
/// streams indexed by chunk, so results do not depend on the worker count.
pub fn monte_carlo(trials: u64, seed: u64, hit: impl Fn(&mut ChaCha8Rng) -> bool + Sync) -> Estimate {
    let chunks = trials.div_ceil(CHUNK);
    let successes: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let len = CHUNK.min(trials - c * CHUNK);
            (0..len).filter(|_| hit(&mut rng)).count() as u64
        })
        .sum();
    Estimate::from_counts(successes, trials)
}

/// `Pr_{x ~ p^K}[branch accepted]`, exactly when the support allows.
pub fn protocol4_acceptance(inst: &GapCgInstance, p: &Distribution<f64>, k: usize, delta: f64, trials: u64, seed: u64) -> Result<Estimate> {
    let support: Vec<(u64, f64)> = p.probs().iter().map(|(x, w)| (*x, *w)).collect();
    let decoded: Vec<Option<(usize, usize)>> = support.iter().map(|(x, _)| inst.decode(*x)).collect();
    let branches = (support.len() as f64).powi(k as i32);
    if branches <= EXACT_BRANCHES as f64 {
        let mut idx = vec![0usize; k];
        let mut acc = 0.0;
        loop {
            let br: Option<Vec<(usize, usize)>> = idx.iter().map(|&i| decoded[i]).collect();
            if br.is_some_and(|b| branch_accepts(inst, &b, delta)) {
                acc += idx.iter().map(|&i| support[i].1).product::<f64>();
            }
            let mut pos = 0;
            loop {
                if pos == k {
                    return Ok(Estimate::exact(acc));
                }
                idx[pos] += 1;
                if idx[pos] < support.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }
    let sampler = WeightedIndex::new(support.iter().map(|s| s.1)).map_err(|e| Error::InvalidState(e.to_string()))?;
    Ok(monte_carlo(trials, seed, |rng| {
        let br: Option<Vec<(usize, usize)>> = (0..k).map(|_| decoded[sampler.sample(rng)]).collect();
        br.is_some_and(|b| branch_accepts(inst, &b, delta))
    }))
}

/// `s = 0`: uniformity, reject on equal vertices. `s = 1`: consistency.
pub fn protocol5_rejects(inst: &GapCgInstance, s: bool, x: (usize, usize), y: (usize, usize)) -> bool {
    let ((u, a), (v, b)) = (x, y);
    if !s {
        u == v
    } else {
        (u == v && a != b) || !inst.allowed(u, a, v, b)
    }
}

pub fn build_protocol5_verifier(inst: &GapCgInstance) -> Result<StoqVerifier> {
    let w = inst.width();
    if 2 * w + 1 > MAX_TABLE_BITS + 1 {
        return Err(Error::CapExceeded(format!("two registers of {w} qubits")));
    }
    let mut b = Builder::new(2, w);
    let s = b.plus();
    let f = b.zero();
    let mut inputs = vec![s];
    inputs.extend(b.prover(0));
    inputs.extend(b.prover(1));
    let mask = (1u64 << w) - 1;
    let gates = b.xor_function(&inputs, &[f], |x| {
        let sel = x & 1 == 1;
        match (inst.decode(x >> 1 & mask), inst.decode(x >> (1 + w) & mask)) {
            (Some(p), Some(q)) => protocol5_rejects(inst, sel, p, q) as u64,
            _ => 1,
        }
    });
    b.finish_gamma(&gates)
}

/// Exact rejection probability of the two-sample protocol under `p (x) p`.
pub fn protocol5_rejection<T: Scalar>(inst: &GapCgInstance, p: &Distribution<T>) -> Result<T> {
    let mut dense = vec![vec![T::zero(); inst.q]; inst.n];
    for (x, w) in p.probs() {
        let (v, a) = inst.decode(*x).ok_or_else(|| Error::InvalidState(format!("invalid encoding {x}")))?;
        dense[v][a] = dense[v][a].clone() + w.clone();
    }
    let half = T::half();
    let mut unif = T::zero();
    let mut amb = T::zero();
    for row in &dense {
        let q = row.iter().fold(T::zero(), |a, b| a + b.clone());
        unif = unif + q.clone() * q;
        for (a, x) in row.iter().enumerate() {
            for (b, y) in row.iter().enumerate() {
                if a != b {
                    amb = amb + x.clone() * y.clone();
                }
            }
        }
    }
    let mut edge = T::zero();
    for (u, v, rel) in &inst.edges {
        for a in 0..inst.q {
            for b in 0..inst.q {
                if !rel.contains(&(a, b)) {
                    edge = edge + dense[*u][a].clone() * dense[*v][b].clone();
                }
            }
        }
    }
    let two = T::from_u64(2);
    Ok(half.clone() * unif + half * (amb + two * edge))
}

/// Symmetric `A` with rejection `p^T A p`, indexed by `v * Q + a`.
pub fn protocol5_matrix(inst: &GapCgInstance) -> Vec<Vec<Rational>> {
    let n = inst.n * inst.q;
    let half = Rational::half();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let x = (i / inst.q, i % inst.q);
                    let y = (j / inst.q, j % inst.q);
                    let hits = protocol5_rejects(inst, false, x, y) as i64 + protocol5_rejects(inst, true, x, y) as i64;
                    half.clone() * Rational::from_u64(hits as u64)
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinReport {
    /// Smallest value found by grid and descent; an upper bound on the minimum.
    pub value: f64,
    pub argmin: Vec<f64>,
    pub grid_value: f64,
    pub grid_points: usize,
    /// Exact minimum over the simplex from stationary points on every face.
    pub exact: Option<f64>,
    pub exact_rational: Option<String>,
    pub exact_argmin: Option<Vec<f64>>,
}

fn quad(a: &[Vec<f64>], p: &[f64]) -> f64 {
    a.iter().zip(p).map(|(row, x)| x * row.iter().zip(p).map(|(y, z)| y * z).sum::<f64>()).sum()
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Solve the bordered stationarity system on face `s`: `A_SS x = mu 1`,
/// `sum x = 1`. `None` when singular.
fn face_stationary(a: &[Vec<Rational>], s: &[usize]) -> Option<(Vec<Rational>, Rational)> {
    let m = s.len();
    let mut rows: Vec<Vec<Rational>> = (0..=m)
        .map(|i| {
            let mut r: Vec<Rational> = (0..=m)
                .map(|j| match (i < m, j < m) {
                    (true, true) => a[s[i]][s[j]].clone(),
                    (true, false) | (false, true) => -Rational::one(),
                    (false, false) => Rational::zero(),
                })
                .collect();
            // last equation is -sum x = -1
            r.push(if i < m { Rational::zero() } else { -Rational::one() });
            r
        })
        .collect();
    let size = m + 1;
    for col in 0..size {
        let piv = (col..size).find(|r| !rows[*r][col].is_zero())?;
        rows.swap(col, piv);
        let inv = Rational::one() / rows[col][col].clone();
        for j in col..=size {
            rows[col][j] = rows[col][j].clone() * inv.clone();
        }
        for r in 0..size {
            if r != col && !rows[r][col].is_zero() {
                let f = rows[r][col].clone();
                for j in col..=size {
                    let d = f.clone() * rows[col][j].clone();
                    rows[r][j] = rows[r][j].clone() - d;
                }
            }
        }
    }
    let x: Vec<Rational> = (0..m).map(|i| rows[i][size].clone()).collect();
    let mu = rows[m][size].clone();
    Some((x, mu))
}

/// Exact minimum of `p^T A p` over the simplex; `A` has at most 12 rows.
pub fn exact_simplex_minimum(a: &[Vec<Rational>]) -> Result<(Rational, Vec<Rational>)> {
    let n = a.len();
    if n == 0 || n > 12 {
        return Err(Error::CapExceeded(format!("exact face enumeration in dimension {n}")));
    }
    let best = (1u64..1 << n)
        .into_par_iter()
        .filter_map(|mask| {
            let s: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let (x, mu) = face_stationary(a, &s)?;
            if x.iter().any(|v| *v <= Rational::zero()) {
                return None;
            }
            let mut full = vec![Rational::zero(); n];
            for (i, v) in s.iter().zip(x) {
                full[*i] = v;
            }
            Some((mu, mask, full))
        })
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("vertices are always stationary");
    Ok((best.0, best.2))
}

/// Minimum of the two-sample rejection over one-copy distributions.
pub fn minimize_protocol5_rejection(inst: &GapCgInstance, grid_budget: usize, restarts: usize, seed: u64) -> Result<MinReport> {
    let n = inst.n * inst.q;
    if n > 64 {
        return Err(Error::CapExceeded(format!("{n} vertex-label pairs")));
    }
    let ar = protocol5_matrix(inst);
    let a: Vec<Vec<f64>> = ar.iter().map(|r| r.iter().map(|x| x.to_f64()).collect()).collect();
    // simplex lattice
    let mut m = 1;
    while lattice_size(m + 1, n) <= grid_budget as f64 && m < 200 {
        m += 1;
    }
    let mut grid_best = (f64::MAX, vec![0.0; n]);
    let mut count = 0usize;
    let mut comp = vec![0usize; n];
    lattice_walk(&mut comp, 0, m, &mut |c| {
        count += 1;
        let p: Vec<f64> = c.iter().map(|x| *x as f64 / m as f64).collect();
        let v = quad(&a, &p);
        if v < grid_best.0 {
            grid_best = (v, p);
        }
    });
    let mut best = grid_best.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![grid_best.1.clone(), vec![1.0 / n as f64; n]];
    for _ in 0..restarts {
        let raw: Vec<f64> = (0..n).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect();
        let s: f64 = raw.iter().sum();
        starts.push(raw.into_iter().map(|x| x / s).collect());
    }
    let lmax = a.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max).max(1e-12);
    for mut p in starts {
        for _ in 0..5000 {
            let g: Vec<f64> = a.iter().map(|r| 2.0 * r.iter().zip(&p).map(|(x, y)| x * y).sum::<f64>()).collect();
            let next = project_simplex(&p.iter().zip(&g).map(|(x, d)| x - d / (2.0 * lmax)).collect::<Vec<_>>());
            let moved: f64 = next.iter().zip(&p).map(|(x, y)| (x - y).abs()).sum();
            p = next;
            if moved < 1e-14 {
                break;
            }
        }
        let v = quad(&a, &p);
        if v < best.0 {
            best = (v, p);
        }
    }
    let exact = if n <= 12 { Some(exact_simplex_minimum(&ar)?) } else { None };
    Ok(MinReport {
        value: best.0,
        argmin: best.1,
        grid_value: grid_best.0,
        grid_points: count,
        exact: exact.as_ref().map(|e| e.0.to_f64()),
        exact_rational: exact.as_ref().map(|e| e.0.to_string()),
        exact_argmin: exact.map(|e| e.1.iter().map(|x| x.to_f64()).collect()),
    })
}

/// Points of the simplex lattice with denominator `m` in dimension `n`.
fn lattice_size(m: usize, n: usize) -> f64 {
    (1..n).map(|i| (m + i) as f64 / i as f64).product()
}

fn lattice_walk(comp: &mut Vec<usize>, i: usize, left: usize, f: &mut impl FnMut(&[usize])) {
    if i == comp.len() - 1 {
        comp[i] = left;
        f(comp);
        return;
    }
    for x in 0..=left {
        comp[i] = x;
        lattice_walk(comp, i + 1, left - x, f);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BadPairs {
    Equality,
    Relation(HashSet<(u64, u64)>),
}

impl BadPairs {
    pub fn relation(pairs: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        let set: HashSet<(u64, u64)> = pairs.into_iter().collect();
        if let Some((x, y)) = set.iter().find(|(x, y)| !set.contains(&(*y, *x))) {
            return Err(Error::InvalidInstance(format!("bad-pair relation not symmetric at ({x}, {y})")));
        }
        Ok(Self::Relation(set))
    }

    fn hit(&self, samples: &[u64]) -> bool {
        match self {
            BadPairs::Equality => {
                let mut seen = HashSet::with_capacity(samples.len());
                samples.iter().any(|x| !seen.insert(*x))
            }
            BadPairs::Relation(set) => {
                samples.iter().enumerate().any(|(i, x)| samples[i + 1..].iter().any(|y| set.contains(&(*x, *y))))
            }
        }
    }
}

/// Fraction of trials where `K` samples from `mu` contain a bad pair inside
/// `omega0` (everything when `None`).
pub fn birthday_mc(mu: &Distribution<f64>, bad: &BadPairs, omega0: Option<&HashSet<u64>>, k: usize, trials: u64, seed: u64) -> Result<Estimate> {
    let support: Vec<(u64, f64)> = mu.probs().iter().map(|(x, w)| (*x, *w)).collect();
    let sampler = WeightedIndex::new(support.iter().map(|s| s.1)).map_err(|e| Error::InvalidState(e.to_string()))?;
    Ok(monte_carlo(trials, seed, |rng| {
        let xs: Vec<u64> = (0..k)
            .map(|_| support[sampler.sample(rng)].0)
            .filter(|x| omega0.is_none_or(|o| o.contains(x)))
            .collect();
        bad.hit(&xs)
    }))
}

/// `1 - prod_{i<K} (1 - i/n)`.
pub fn birthday_exact_uniform(n: u64, k: u64) -> f64 {
    1.0 - (0..k).map(|i| 1.0 - i as f64 / n as f64).product::<f64>().max(0.0)
}
