//! Length-efficient symmetrization: each symmetric copy carries `r` labeled
//! slots, and every label table with a perfect matching routes one slot per
//! role into the original verifier.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::matching::{lex_first_perfect_matching, perfect_matching};
use super::{dummy_gamma, Dyadic};
use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};
use crate::states::NonNegativeState;
use crate::verifier::builder::Builder;
use crate::verifier::{StoqVerifier, Thresholds};

/// Largest label table `k * r * ceil(log2 k)` compiled into a circuit.
pub const MAX_LABEL_BITS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizationPlan {
    pub k: usize,
    pub ell: usize,
    pub r: usize,
    pub label_bits: usize,
    /// Witness length per symmetric copy.
    pub m: usize,
    /// Target `c - Delta` of the dummy branch.
    pub dummy_target: f64,
    /// Dyadic `<Gamma_dum>`.
    pub dummy: Dyadic,
    pub dummy_acceptance: f64,
    pub dummy_slack: f64,
}

pub fn default_bundles(k: usize) -> usize {
    ((12.0 * (k as f64).ln()).ceil() as usize).max(1)
}

fn ceil_log2(k: usize) -> usize {
    (usize::BITS - (k.max(1) - 1).leading_zeros()) as usize
}

impl SymmetrizationPlan {
    pub fn new(k: usize, ell: usize, r: Option<usize>, t: &Thresholds, dummy_bits: u32) -> Result<Self> {
        if k == 0 || ell == 0 {
            return Err(Error::InvalidInstance("symmetrization needs k, ell >= 1".into()));
        }
        let r = r.unwrap_or_else(|| default_bundles(k));
        if r == 0 {
            return Err(Error::Range("r must be at least 1".into()));
        }
        let label_bits = ceil_log2(k);
        let target = t.c - t.delta;
        let overlap = 2.0 * target - 1.0;
        if overlap < 0.0 {
            return Err(Error::Range(format!("dummy acceptance {target} below 1/2")));
        }
        let dummy = Dyadic::floor(overlap, dummy_bits)?;
        let dummy_acceptance = 0.5 + 0.5 * dummy.value();
        Ok(Self {
            k,
            ell,
            r,
            label_bits,
            m: r * (ell + label_bits),
            dummy_target: target,
            dummy,
            dummy_acceptance,
            dummy_slack: target - dummy_acceptance,
        })
    }

    pub fn slot_width(&self) -> usize {
        self.label_bits + self.ell
    }

    /// Labels `j[i][h]` of copy `i`, slot `h`, read from a label table.
    pub fn labels(&self, table: u64) -> Vec<Vec<usize>> {
        let lb = self.label_bits;
        (0..self.k)
            .map(|i| (0..self.r).map(|h| (table >> ((i * self.r + h) * lb) & ((1 << lb) - 1)) as usize).collect())
            .collect()
    }
}

/// Role-to-copy matching and first slot of each role, if one exists.
pub fn route(plan: &SymmetrizationPlan, labels: &[Vec<usize>]) -> Option<(Vec<usize>, Vec<usize>)> {
    let mu = lex_first_perfect_matching(plan.k, |i, a| labels[i].contains(&a))?;
    let h = mu.iter().enumerate().map(|(a, &i)| labels[i].iter().position(|&j| j == a).expect("edge")).collect();
    Some((mu, h))
}

pub fn build_length_efficient_symmetrization(v: &StoqVerifier, plan: &SymmetrizationPlan) -> Result<StoqVerifier> {
    if v.layout.k != plan.k || v.layout.ell != plan.ell {
        return Err(Error::InvalidInstance(format!(
            "verifier has k = {}, ell = {}; plan has k = {}, ell = {}",
            v.layout.k, v.layout.ell, plan.k, plan.ell
        )));
    }
    let table_bits = plan.k * plan.r * plan.label_bits;
    if table_bits > MAX_LABEL_BITS {
        return Err(Error::CapExceeded(format!("{table_bits} label bits")));
    }
    let mut b = Builder::new(plan.k, plan.m);
    let sw = plan.slot_width();
    let slot = |i: usize, h: usize| -> usize { i * plan.m + h * sw };
    let label_qubits: Vec<usize> =
        (0..plan.k).flat_map(|i| (0..plan.r).flat_map(move |h| (0..plan.label_bits).map(move |t| (i, h, t)))).map(|(i, h, t)| slot(i, h) + t).collect();
    let anc = b.ancillas_for(v);
    let dummy = dummy_gamma(&mut b, plan.dummy);
    let mut gates = Vec::new();
    for table in 0..1u64 << table_bits {
        let pattern: Vec<(usize, bool)> =
            label_qubits.iter().enumerate().map(|(t, q)| (*q, table >> t & 1 == 1)).collect();
        let body = match route(plan, &plan.labels(table)) {
            Some((mu, h)) => {
                let wmap: Vec<usize> = (0..plan.k)
                    .flat_map(|a| (0..plan.ell).map(move |t| (a, t)))
                    .map(|(a, t)| slot(mu[a], h[a]) + plan.label_bits + t)
                    .collect();
                b.gamma_with(v, &wmap, &anc)?
            }
            None => dummy.clone(),
        };
        gates.extend(b.select(&pattern, &body)?);
    }
    b.finish_gamma(&gates)
}

/// Number of surjections from `r` slots onto `s` labels.
fn surjections(r: usize, s: usize) -> BigInt {
    let mut acc = BigInt::zero();
    let mut binom = BigInt::one();
    for i in 0..=s {
        let term = &binom * BigInt::from(s - i).pow(r as u32);
        if i % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
        binom = binom * BigInt::from(s - i) / BigInt::from(i + 1);
    }
    acc
}

/// Exact probability that uniformly random label tables admit a perfect
/// matching.
pub fn match_probability(k: usize, r: usize) -> Result<Rational> {
    if k == 0 || k > 4 {
        return Err(Error::CapExceeded(format!("exact matching probability at k = {k}")));
    }
    let sets: Vec<(u64, BigInt)> =
        (1..1u64 << k).map(|s| (s, surjections(r, s.count_ones() as usize))).collect();
    let mut hits = BigInt::zero();
    let mut idx = vec![0usize; k];
    loop {
        let adj: Vec<Vec<usize>> = idx.iter().map(|&t| (0..k).filter(|a| sets[t].0 >> a & 1 == 1).collect()).collect();
        if perfect_matching(&adj, k).is_covering() {
            hits += idx.iter().fold(BigInt::one(), |p, &t| p * &sets[t].1);
        }
        let mut pos = 0;
        loop {
            if pos == k {
                let total = BigInt::from(k).pow((k * r) as u32);
                return Ok(Rational::new(hits, total));
            }
            idx[pos] += 1;
            if idx[pos] < sets.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Acceptance on honest bundles: matching branches see `V` on the original
/// tuple, the rest see the dummy.
pub fn honest_value<T: Scalar>(p_match: &T, a_v: &T, dummy_acceptance: &T) -> T {
    p_match.clone() * a_v.clone() + (T::one() - p_match.clone()) * dummy_acceptance.clone()
}

/// One honest copy `(sum_j |j>|psi_j>)^r`; the `psi_j` need equal norms.
pub fn honest_copy<T: Scalar>(plan: &SymmetrizationPlan, psis: &[NonNegativeState<T>]) -> Result<NonNegativeState<T>> {
    if psis.len() != plan.k {
        return Err(Error::DimensionMismatch(plan.k, psis.len()));
    }
    let z = psis[0].norm2().to_f64();
    for p in psis {
        if p.width() != plan.ell {
            return Err(Error::WidthMismatch { expected: plan.ell, got: p.width() });
        }
        if (p.norm2().to_f64() - z).abs() > 1e-12 * z.max(1.0) {
            return Err(Error::InvalidState("bundle states need equal norms".into()));
        }
    }
    let lb = plan.label_bits;
    let slot = NonNegativeState::new(
        plan.slot_width(),
        psis.iter().enumerate().flat_map(|(j, p)| p.weights().iter().map(move |(x, w)| (j as u64 | x << lb, w.clone()))),
    )?;
    NonNegativeState::tensor_all(&vec![slot; plan.r])
}
