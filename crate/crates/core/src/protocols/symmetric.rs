//! Dyadic approximation of the projector onto the symmetric subspace.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::revsim::{swap, Gate};
use crate::scalar::Scalar;
use crate::states::NonNegativeState;
use crate::verifier::builder::{dyadic_cover, Builder};
use crate::verifier::StoqVerifier;

/// Largest `k` for which all `k!` permutations are enumerated.
pub const MAX_SYM_K: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicBranchPlan {
    pub k: usize,
    pub perms: u64,
    pub b: u32,
    pub q: u32,
    pub branches: u64,
    pub a: u64,
    pub r: u64,
    pub zeta: f64,
}

impl DyadicBranchPlan {
    pub fn new(k: usize, b: u32) -> Result<Self> {
        if k == 0 || k > MAX_SYM_K {
            return Err(Error::CapExceeded(format!("symmetric projector with k = {k}")));
        }
        let perms: u64 = (1..=k as u64).product();
        let q = (perms as f64).log2().ceil() as u32 + b;
        if q > 40 {
            return Err(Error::CapExceeded(format!("{q} branch qubits")));
        }
        let n = 1u64 << q;
        let (a, r) = (n / perms, n % perms);
        let zeta = (r * (perms - r)) as f64 / (perms as f64 * n as f64);
        Ok(Self { k, perms, b, q, branches: n, a, r, zeta })
    }

    /// Branches `[lo, hi)` assigned to permutation `t`.
    pub fn range(&self, t: u64) -> (u64, u64) {
        let lo = t * self.a + t.min(self.r);
        let hi = lo + self.a + (t < self.r) as u64;
        (lo, hi)
    }
}

/// Permutation index of branch `j`: the first `r` permutations get `a + 1`
/// branches, the rest get `a`.
pub fn balanced_map(j: u64, perms: u64, branches: u64) -> Result<u64> {
    if perms == 0 || branches < perms || j >= branches {
        return Err(Error::Range(format!("branch {j} with K = {perms}, N = {branches}")));
    }
    let (a, r) = (branches / perms, branches % perms);
    Ok(if j < r * (a + 1) { j / (a + 1) } else { r + (j - r * (a + 1)) / a })
}

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..k).collect();
    loop {
        out.push(p.clone());
        let Some(i) = (1..k).rev().find(|&i| p[i - 1] < p[i]) else { break };
        let j = (i..k).rev().find(|&j| p[j] > p[i - 1]).expect("successor exists");
        p.swap(i - 1, j);
        p[i..].reverse();
    }
    out
}

/// Image of basis string `x` when block `i` moves to block `perm[i]`.
pub fn permute_blocks(x: u64, perm: &[usize], ell: usize) -> u64 {
    let mask = (1u64 << ell) - 1;
    perm.iter().enumerate().fold(0, |y, (i, &t)| y | (x >> (i * ell) & mask) << (t * ell))
}

/// Swap network moving block `i` of `blocks` to block `perm[i]`.
pub fn block_permutation_gates(perm: &[usize], blocks: &[Vec<usize>]) -> Vec<Gate> {
    let k = perm.len();
    let mut want = vec![0; k];
    for (i, &t) in perm.iter().enumerate() {
        want[t] = i;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    let mut gates = Vec::new();
    for pos in 0..k {
        if cur[pos] == want[pos] {
            continue;
        }
        let q = (pos + 1..k).find(|&q| cur[q] == want[pos]).expect("permutation");
        for (a, b) in blocks[pos].iter().zip(&blocks[q]) {
            gates.extend(swap(*a, *b));
        }
        cur.swap(pos, q);
    }
    gates
}

/// `<Phi| P_perm |Phi>`.
pub fn permuted_block_overlap<T: Scalar>(phi: &NonNegativeState<T>, perm: &[usize], ell: usize) -> T {
    let mut acc = T::zero();
    for (x, w) in phi.weights() {
        if let Some(v) = phi.weight(permute_blocks(*x, perm, ell)) {
            acc = acc + w.clone() * v.clone();
        }
    }
    acc / phi.norm2().clone()
}

/// `<Phi| Pi_sym |Phi>` over `k` blocks of `ell` qubits.
pub fn sym_overlap<T: Scalar>(phi: &NonNegativeState<T>, k: usize, ell: usize) -> Result<T> {
    if phi.width() != k * ell || k > MAX_SYM_K {
        return Err(Error::WidthMismatch { expected: k * ell, got: phi.width() });
    }
    let perms = permutations(k);
    let n = perms.len() as u64;
    let sum = perms.iter().fold(T::zero(), |a, p| a + permuted_block_overlap(phi, p, ell));
    Ok(sum / T::from_u64(n))
}

/// `<Gamma>` of the dyadic projector: permutation overlaps weighted by the
/// branch counts of the plan.
pub fn dyadic_projector_value<T: Scalar>(phi: &NonNegativeState<T>, plan: &DyadicBranchPlan, ell: usize) -> Result<T> {
    if phi.width() != plan.k * ell {
        return Err(Error::WidthMismatch { expected: plan.k * ell, got: phi.width() });
    }
    let mut acc = T::zero();
    for (t, p) in permutations(plan.k).iter().enumerate() {
        let (lo, hi) = plan.range(t as u64);
        acc = acc + T::from_u64(hi - lo) * permuted_block_overlap(phi, p, ell);
    }
    Ok(acc / T::pow2(plan.q))
}

/// Branch register selects a block permutation through the balanced map.
pub fn sym_projector_gamma(b: &mut Builder, plan: &DyadicBranchPlan, blocks: &[Vec<usize>]) -> Result<Vec<Gate>> {
    let sel = b.pluses(plan.q as usize);
    let mut gates = Vec::new();
    for (t, perm) in permutations(plan.k).iter().enumerate() {
        let body = block_permutation_gates(perm, blocks);
        let (lo, hi) = plan.range(t as u64);
        for pat in dyadic_cover(lo, hi, plan.q as usize) {
            let pattern: Vec<(usize, bool)> = pat.iter().map(|(i, v)| (sel[*i], *v)).collect();
            gates.extend(b.select(&pattern, &body)?);
        }
    }
    Ok(gates)
}

pub fn build_sym_projector(k: usize, ell: usize, b: u32) -> Result<StoqVerifier> {
    let plan = DyadicBranchPlan::new(k, b)?;
    let mut bld = Builder::new(k, ell);
    let blocks: Vec<Vec<usize>> = (0..k).map(|i| bld.prover(i)).collect();
    let gamma = sym_projector_gamma(&mut bld, &plan, &blocks)?;
    bld.finish_gamma(&gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosenessReport {
    pub sym_overlap: f64,
    /// `2 sqrt(1 - <Phi|Pi_sym|Phi>)`.
    pub bound: f64,
    pub psi: Vec<f64>,
    /// Trace distance between `Phi` and `psi^k`.
    pub trace_distance: f64,
}

fn permanent(m: &[Vec<f64>]) -> f64 {
    permutations(m.len()).iter().map(|p| p.iter().enumerate().map(|(i, &j)| m[i][j]).product::<f64>()).sum()
}

/// Symmetric overlap of `phi_1 ... phi_k` and the tensor power `psi^k`
/// maximizing `prod <phi_i|psi>`.
pub fn symmetric_closeness_bound(blocks: &[NonNegativeState<f64>]) -> Result<ClosenessReport> {
    let k = blocks.len();
    if k == 0 || k > MAX_SYM_K {
        return Err(Error::CapExceeded(format!("k = {k}")));
    }
    let ell = blocks[0].width();
    let vecs: Vec<Vec<f64>> = blocks.iter().map(|s| s.dense()).collect::<Result<_>>()?;
    if vecs.iter().any(|v| v.len() != 1 << ell) {
        return Err(Error::InvalidState("blocks differ in width".into()));
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let gram: Vec<Vec<f64>> = vecs.iter().map(|a| vecs.iter().map(|b| dot(a, b)).collect()).collect();
    let fact: f64 = (1..=k).map(|x| x as f64).product();
    let s = (permanent(&gram) / fact).min(1.0);
    let d = 1usize << ell;
    let normalize = |v: Vec<f64>| {
        let n = dot(&v, &v).sqrt();
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    // stationarity of log prod <phi_i|psi>: psi ~ sum_i phi_i / <phi_i|psi>
    let mut psi = normalize((0..d).map(|x| vecs.iter().map(|v| v[x]).sum()).collect());
    let value = |psi: &[f64]| vecs.iter().map(|v| dot(v, psi)).product::<f64>();
    let mut best = value(&psi);
    for _ in 0..10_000 {
        let ips: Vec<f64> = vecs.iter().map(|v| dot(v, &psi)).collect();
        if ips.iter().any(|x| *x <= 0.0) {
            break;
        }
        let next = normalize((0..d).map(|x| vecs.iter().zip(&ips).map(|(v, p)| v[x] / p).sum()).collect());
        let nv = value(&next);
        if nv <= best + 1e-15 {
            break;
        }
        best = nv;
        psi = next;
    }
    Ok(ClosenessReport {
        sym_overlap: s,
        bound: 2.0 * (1.0 - s).max(0.0).sqrt(),
        psi,
        trace_distance: (1.0 - best * best).max(0.0).sqrt(),
    })
}
