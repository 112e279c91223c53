//! Clean connected component verification with perfect completeness.
//!
//! The branch register `j` ranges over `J = 2^q` values with
//! `q = ceil(log2(dG + 1))`: branches below `dG` walk an edge port, branch
//! `dG` checks the marking, and the rest are identities.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::revsim::swap;
use crate::scalar::Scalar;
use crate::states::NonNegativeState;
use crate::verifier::builder::Builder;
use crate::verifier::StoqVerifier;

/// Largest `n` for the eigenvalue route (`2^n` vertices).
pub const MAX_N: usize = 12;
/// Largest `n` for which the gate-level verifier is built.
pub const MAX_CIRCUIT_N: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CleanCcJson", into = "CleanCcJson")]
pub struct CleanCcInstance {
    n: usize,
    dg: usize,
    neighbors: Vec<Vec<usize>>,
    marked: Vec<bool>,
    returns: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct CleanCcJson {
    n: usize,
    #[serde(rename = "dG")]
    dg: usize,
    neighbors: Vec<Vec<usize>>,
    marked: Vec<Mark>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Mark {
    Bool(bool),
    Int(u8),
}

impl TryFrom<CleanCcJson> for CleanCcInstance {
    type Error = Error;
    fn try_from(j: CleanCcJson) -> Result<Self> {
        let marked = j.marked.into_iter().map(|m| matches!(m, Mark::Bool(true) | Mark::Int(1..))).collect();
        CleanCcInstance::new(j.n, j.dg, j.neighbors, marked)
    }
}

impl From<CleanCcInstance> for CleanCcJson {
    fn from(i: CleanCcInstance) -> Self {
        CleanCcJson { n: i.n, dg: i.dg, neighbors: i.neighbors, marked: i.marked.into_iter().map(Mark::Bool).collect() }
    }
}

impl CleanCcInstance {
    pub fn new(n: usize, dg: usize, neighbors: Vec<Vec<usize>>, marked: Vec<bool>) -> Result<Self> {
        if n > MAX_N {
            return Err(Error::CapExceeded(format!("n = {n}")));
        }
        let nv = 1usize << n;
        if neighbors.len() != nv || marked.len() != nv {
            return Err(Error::InvalidInstance(format!("need {nv} neighbor lists and markings")));
        }
        for (v, list) in neighbors.iter().enumerate() {
            if list.len() != dg {
                return Err(Error::InvalidInstance(format!("vertex {v} has {} slots, expected {dg}", list.len())));
            }
            let mut seen = BTreeSet::new();
            for &u in list {
                if u >= nv {
                    return Err(Error::InvalidInstance(format!("neighbor {u} of {v} outside {nv} vertices")));
                }
                if u != v && !seen.insert(u) {
                    return Err(Error::InvalidInstance(format!("neighbor {u} listed twice at {v}")));
                }
            }
        }
        let mut returns = vec![vec![0; dg]; nv];
        for v in 0..nv {
            for j in 0..dg {
                let u = neighbors[v][j];
                returns[v][j] = if u == v {
                    j
                } else {
                    let back: Vec<usize> = (0..dg).filter(|&k| neighbors[u][k] == v).collect();
                    match back.as_slice() {
                        [k] => *k,
                        _ => return Err(Error::InvalidInstance(format!("edge {v}-{u} has no unique return port"))),
                    }
                };
            }
        }
        Ok(Self { n, dg, neighbors, marked, returns })
    }

    /// Neighbor lists in increasing order, padded with self-loops.
    pub fn from_edges(n: usize, dg: usize, edges: &[(usize, usize)], marked: Vec<bool>) -> Result<Self> {
        let nv = 1usize << n;
        let mut adj = vec![BTreeSet::new(); nv];
        for &(u, v) in edges {
            if u >= nv || v >= nv {
                return Err(Error::InvalidInstance(format!("edge ({u}, {v}) outside {nv} vertices")));
            }
            if u != v {
                adj[u].insert(v);
                adj[v].insert(u);
            }
        }
        let mut neighbors = Vec::with_capacity(nv);
        for (v, a) in adj.iter().enumerate() {
            if a.len() > dg {
                return Err(Error::InvalidInstance(format!("vertex {v} has degree {} > {dg}", a.len())));
            }
            let mut list: Vec<usize> = a.iter().copied().collect();
            list.resize(dg, v);
            neighbors.push(list);
        }
        Self::new(n, dg, neighbors, marked)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dg(&self) -> usize {
        self.dg
    }

    pub fn vertices(&self) -> usize {
        1 << self.n
    }

    pub fn marked(&self) -> &[bool] {
        &self.marked
    }

    pub fn neighbor(&self, v: usize, j: usize) -> usize {
        self.neighbors[v][j]
    }

    pub fn q(&self) -> usize {
        (usize::BITS - self.dg.leading_zeros()) as usize
    }

    pub fn big_j(&self) -> usize {
        1 << self.q()
    }

    pub fn return_index(&self, v: usize, j: usize) -> Result<usize> {
        if j >= self.dg || v >= self.vertices() {
            return Err(Error::Range(format!("port ({v}, {j})")));
        }
        Ok(self.returns[v][j])
    }

    /// The branch map on `(j, v, c)`.
    pub fn gamma(&self, j: usize, v: usize, c: bool) -> (usize, usize, bool) {
        if j < self.dg {
            (self.returns[v][j], self.neighbors[v][j], c)
        } else if j == self.dg {
            (j, v, c ^ self.marked[v])
        } else {
            (j, v, c)
        }
    }

    /// `(j, v, c)` packed as `j | v << q | c << (q + n)`.
    pub fn gamma_packed(&self, x: u64) -> u64 {
        let q = self.q();
        let j = (x & ((1 << q) - 1)) as usize;
        let v = (x >> q & ((1 << self.n) - 1)) as usize;
        let c = x >> (q + self.n) & 1 == 1;
        let (j2, v2, c2) = self.gamma(j, v, c);
        (j2 | v2 << q | (c2 as usize) << (q + self.n)) as u64
    }

    /// Whether the branch map is an involution, hence a permutation.
    pub fn gamma_is_involution(&self) -> bool {
        let q = self.q();
        (0..1u64 << (q + self.n + 1)).all(|x| self.gamma_packed(self.gamma_packed(x)) == x)
    }

    /// Undirected non-loop edges `u < v`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for v in 0..self.vertices() {
            for &u in &self.neighbors[v] {
                if v < u {
                    out.push((v, u));
                }
            }
        }
        out
    }

    pub fn components(&self) -> Vec<Vec<usize>> {
        let nv = self.vertices();
        let mut comp = vec![usize::MAX; nv];
        let mut out = Vec::new();
        for s in 0..nv {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut stack = vec![s];
            let mut members = Vec::new();
            comp[s] = id;
            while let Some(v) = stack.pop() {
                members.push(v);
                for &u in &self.neighbors[v] {
                    if comp[u] == usize::MAX {
                        comp[u] = id;
                        stack.push(u);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// First component without a marked vertex.
    pub fn clean_component(&self) -> Option<Vec<usize>> {
        self.components().into_iter().find(|c| c.iter().all(|v| !self.marked[*v]))
    }

    pub fn is_yes(&self) -> bool {
        self.clean_component().is_some()
    }

    /// `1 - (1/(2J)) (sum_E (a_u - a_v)^2 + sum_marked a_v^2)` for the
    /// normalized amplitudes of `witness`.
    pub fn acceptance<T: Scalar>(&self, witness: &NonNegativeState<T>) -> Result<T> {
        if witness.width() != self.n {
            return Err(Error::WidthMismatch { expected: self.n, got: witness.width() });
        }
        let a: Vec<T> = (0..self.vertices() as u64).map(|v| witness.weight(v).cloned().unwrap_or_else(T::zero)).collect();
        let mut loss = T::zero();
        for (u, v) in self.edges() {
            let d = a[u].clone() - a[v].clone();
            loss = loss + d.clone() * d;
        }
        for (v, m) in self.marked.iter().enumerate() {
            if *m {
                loss = loss + a[v].clone() * a[v].clone();
            }
        }
        let denom = T::from_u64(2 * self.big_j() as u64) * witness.norm2().clone();
        Ok(T::one() - loss / denom)
    }

    /// `Q = (1/J)(A_ports + diag(unmarked) + (J - dG - 1) I)`; acceptance is
    /// `1/2 + 1/2 a^T Q a`.
    pub fn q_matrix(&self) -> DMatrix<f64> {
        let nv = self.vertices();
        let jj = self.big_j() as f64;
        let mut q = DMatrix::from_diagonal_element(nv, nv, (self.big_j() - self.dg - 1) as f64);
        for v in 0..nv {
            for &u in &self.neighbors[v] {
                q[(v, u)] += 1.0;
            }
            if !self.marked[v] {
                q[(v, v)] += 1.0;
            }
        }
        q / jj
    }

    /// Maximum acceptance over non-negative witnesses with a Perron witness.
    pub fn max_acceptance(&self) -> (f64, Vec<f64>) {
        let eig = self.q_matrix().symmetric_eigen();
        let (idx, top) = eig.eigenvalues.iter().enumerate().fold((0, f64::MIN), |b, (i, x)| if *x > b.1 { (i, *x) } else { b });
        let v: Vec<f64> = eig.eigenvectors.column(idx).iter().map(|x| x.abs()).collect();
        (0.5 + 0.5 * top.min(1.0), v)
    }

    /// The gate-level verifier: witness on `V`, `B` in plus ancillas, `M` a
    /// zero ancilla, the branch map by compute, clear and swap.
    pub fn build_verifier(&self) -> Result<StoqVerifier> {
        if self.n > MAX_CIRCUIT_N {
            return Err(Error::CapExceeded(format!("circuit at n = {}", self.n)));
        }
        let q = self.q();
        let mut b = Builder::new(1, self.n);
        let bq = b.pluses(q);
        let m = b.zero();
        let mut x = bq;
        x.extend(b.prover(0));
        x.push(m);
        let out = b.zeros(x.len());
        let mut gates = b.xor_function(&x, &out, |y| self.gamma_packed(y));
        gates.extend(b.xor_function(&out, &x, |y| self.gamma_packed(y)));
        for (p, r) in x.iter().zip(&out) {
            gates.extend(swap(*p, *r));
        }
        b.finish_gamma(&gates)
    }
}

/// `1 - 1/(2^(2n+2) (dG + 1))`.
pub fn soundness_bound(n: usize, dg: usize) -> f64 {
    1.0 - 1.0 / (2f64.powi(2 * n as i32 + 2) * (dg + 1) as f64)
}

/// Every graph on `nv` labeled vertices with maximum degree at most `dg`.
pub fn bounded_degree_graphs(nv: usize, dg: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..nv).flat_map(|u| (u + 1..nv).map(move |v| (u, v))).collect();
    let mut out = Vec::new();
    let mut deg = vec![0usize; nv];
    let mut cur = Vec::new();
    fn walk(i: usize, pairs: &[(usize, usize)], dg: usize, deg: &mut [usize], cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if i == pairs.len() {
            out.push(cur.clone());
            return;
        }
        walk(i + 1, pairs, dg, deg, cur, out);
        let (u, v) = pairs[i];
        if deg[u] < dg && deg[v] < dg {
            deg[u] += 1;
            deg[v] += 1;
            cur.push((u, v));
            walk(i + 1, pairs, dg, deg, cur, out);
            cur.pop();
            deg[u] -= 1;
            deg[v] -= 1;
        }
    }
    walk(0, &pairs, dg, &mut deg, &mut cur, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveReport {
    pub n: usize,
    pub dg: usize,
    pub graphs: usize,
    pub instances: usize,
    pub worst: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Maximum acceptance over every no instance on `2^n` vertices with degree
/// bound `dg`. Only markings with one marked vertex per component are
/// enumerated: unmarking never lowers the acceptance of any witness.
pub fn exhaustive_soundness(n: usize, dg: usize) -> Result<ExhaustiveReport> {
    if n > 3 {
        return Err(Error::CapExceeded(format!("exhaustive search at n = {n}")));
    }
    let nv = 1usize << n;
    let graphs = bounded_degree_graphs(nv, dg);
    let results: Vec<Result<(usize, f64)>> = graphs
        .par_iter()
        .map(|edges| {
            let base = CleanCcInstance::from_edges(n, dg, edges, vec![false; nv])?;
            let comps = base.components();
            let mut choice = vec![0usize; comps.len()];
            let mut count = 0;
            let mut worst = f64::MIN;
            loop {
                let mut marked = vec![false; nv];
                for (c, k) in comps.iter().zip(&choice) {
                    marked[c[*k]] = true;
                }
                let inst = CleanCcInstance { marked, ..base.clone() };
                worst = worst.max(inst.max_acceptance().0);
                count += 1;
                let mut i = 0;
                loop {
                    if i == comps.len() {
                        return Ok((count, worst));
                    }
                    choice[i] += 1;
                    if choice[i] < comps[i].len() {
                        break;
                    }
                    choice[i] = 0;
                    i += 1;
                }
            }
        })
        .collect();
    let mut instances = 0;
    let mut worst = f64::MIN;
    for r in results {
        let (c, w) = r?;
        instances += c;
        worst = worst.max(w);
    }
    let bound = soundness_bound(n, dg);
    Ok(ExhaustiveReport { n, dg, graphs: graphs.len(), instances, worst, bound, holds: worst <= bound })
}
