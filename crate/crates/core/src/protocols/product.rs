//! Stoquastic product test on two copies of a `k`-block state.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::revsim::{fredkin, Gate};
use crate::scalar::Scalar;
use crate::states::NonNegativeState;
use crate::verifier::builder::Builder;
use crate::verifier::StoqVerifier;

/// One plus control per block swaps block `i` of `a` with block `i` of `b`,
/// qubit by qubit.
pub fn product_test_gamma(b: &mut Builder, k: usize, ell: usize, a: &[usize], bq: &[usize]) -> Vec<Gate> {
    let mut gates = Vec::new();
    for i in 0..k {
        let j = b.plus();
        for t in 0..ell {
            gates.extend(fredkin(j, a[i * ell + t], bq[i * ell + t]));
        }
    }
    gates
}

/// Two provers of `k * ell` qubits each.
pub fn build_product_test(k: usize, ell: usize) -> Result<StoqVerifier> {
    if k == 0 || ell == 0 {
        return Err(Error::InvalidInstance("product test needs k, ell >= 1".into()));
    }
    let mut b = Builder::new(2, k * ell);
    let (a, bq) = (b.prover(0), b.prover(1));
    let gamma = product_test_gamma(&mut b, k, ell, &a, &bq);
    b.finish_gamma(&gamma)
}

/// `Tr(rho_S sigma_S)` for the qubits in `mask`, from unnormalized weights.
pub fn reduced_overlap<T: Scalar>(rho: &NonNegativeState<T>, sigma: &NonNegativeState<T>, mask: u64) -> Result<T> {
    if rho.width() != sigma.width() {
        return Err(Error::WidthMismatch { expected: rho.width(), got: sigma.width() });
    }
    let reduced = |s: &NonNegativeState<T>| {
        let mut groups: HashMap<u64, Vec<(u64, T)>> = HashMap::new();
        for (x, w) in s.weights() {
            groups.entry(x & !mask).or_default().push((x & mask, w.clone()));
        }
        let mut r: HashMap<(u64, u64), T> = HashMap::new();
        for g in groups.values() {
            for (a, wa) in g {
                for (a2, wa2) in g {
                    let e = r.entry((*a, *a2)).or_insert_with(T::zero);
                    *e = e.clone() + wa.clone() * wa2.clone();
                }
            }
        }
        r
    };
    let (r1, r2) = (reduced(rho), reduced(sigma));
    let mut acc = T::zero();
    for ((a, a2), v) in &r1 {
        if let Some(w) = r2.get(&(*a2, *a)) {
            acc = acc + v.clone() * w.clone();
        }
    }
    Ok(acc / (rho.norm2().clone() * sigma.norm2().clone()))
}

/// `2^-k sum_S Tr(rho_S sigma_S)` over block subsets `S`.
pub fn product_test_value<T: Scalar>(rho: &NonNegativeState<T>, sigma: &NonNegativeState<T>, k: usize, ell: usize) -> Result<T> {
    for s in [rho, sigma] {
        if s.width() != k * ell {
            return Err(Error::WidthMismatch { expected: k * ell, got: s.width() });
        }
    }
    let block = (1u64 << ell) - 1;
    let mut acc = T::zero();
    for set in 0..1u64 << k {
        let mask = (0..k).filter(|i| set >> i & 1 == 1).fold(0u64, |m, i| m | block << (i * ell));
        acc = acc + reduced_overlap(rho, sigma, mask)?;
    }
    Ok(acc / T::pow2(k as u32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaReport {
    /// Upper estimate of `1 - max |<rho|phi_1 ... phi_k>|^2`.
    pub eta: f64,
    /// Best product overlap squared found.
    pub overlap: f64,
    pub blocks: Vec<Vec<f64>>,
}

fn product_amp(x: u64, blocks: &[Vec<f64>], ell: usize, skip: Option<usize>) -> f64 {
    let mask = (1u64 << ell) - 1;
    blocks
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, v)| v[(x >> (i * ell) & mask) as usize])
        .product()
}

/// Distance of `rho` from product states by alternating maximization: each
/// step replaces one block by the normalized contraction of `rho` with the
/// others.
pub fn eta(rho: &NonNegativeState<f64>, k: usize, ell: usize, restarts: usize, seed: u64) -> Result<EtaReport> {
    if rho.width() != k * ell {
        return Err(Error::WidthMismatch { expected: k * ell, got: rho.width() });
    }
    let d = 1usize << ell;
    let amps: Vec<(u64, f64)> = rho.weights().keys().map(|x| (*x, rho.amplitude(*x))).collect();
    let mask = (1u64 << ell) - 1;
    let overlap = |blocks: &[Vec<f64>]| -> f64 {
        let s: f64 = amps.iter().map(|(x, a)| a * product_amp(*x, blocks, ell, None)).sum();
        s * s
    };
    let mut starts: Vec<Vec<Vec<f64>>> = Vec::new();
    // square roots of the block marginals
    let marg: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut p = vec![0.0; d];
            for (x, a) in &amps {
                p[(x >> (i * ell) & mask) as usize] += a * a;
            }
            p.iter().map(|v| v.sqrt()).collect()
        })
        .collect();
    starts.push(marg);
    starts.push(vec![vec![1.0 / (d as f64).sqrt(); d]; k]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        starts.push((0..k).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect());
    }
    let mut best = (f64::MIN, Vec::new());
    for mut blocks in starts {
        let mut prev = -1.0;
        for _ in 0..1000 {
            for i in 0..k {
                let mut w = vec![0.0; d];
                for (x, a) in &amps {
                    w[(x >> (i * ell) & mask) as usize] += a * product_amp(*x, &blocks, ell, Some(i));
                }
                let n = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > 0.0 {
                    blocks[i] = w.iter().map(|v| v / n).collect();
                }
            }
            let o = overlap(&blocks);
            if o <= prev + 1e-15 {
                break;
            }
            prev = o;
        }
        let o = overlap(&blocks);
        if o > best.0 {
            best = (o, blocks);
        }
    }
    Ok(EtaReport { eta: (1.0 - best.0).max(0.0), overlap: best.0, blocks: best.1 })
}
