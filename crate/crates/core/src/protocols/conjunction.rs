//! Direct products of verifiers on disjoint prover sets.

use crate::error::{Error, Result};
use crate::revsim::{inverse_gates, swap, Gate};
use crate::verifier::builder::Builder;
use crate::verifier::StoqVerifier;

fn combined_builder(vs: &[StoqVerifier]) -> Result<(Builder, Vec<Vec<usize>>)> {
    let first = vs.first().ok_or_else(|| Error::InvalidInstance("empty verifier list".into()))?;
    let ell = first.layout.ell;
    if let Some(v) = vs.iter().find(|v| v.layout.ell != ell) {
        return Err(Error::InvalidInstance(format!("proof lengths differ: {} vs {ell}", v.layout.ell)));
    }
    let k: usize = vs.iter().map(|v| v.layout.k).sum();
    let b = Builder::new(k, ell);
    let mut next = 0;
    let maps = vs
        .iter()
        .map(|v| {
            let m: Vec<usize> = (next..next + v.layout.k).flat_map(|i| b.prover(i)).collect();
            next += v.layout.k;
            m
        })
        .collect();
    Ok((b, maps))
}

/// Run every `V_j`, swap each output with a fresh plus qubit, undo. On product
/// witnesses this accepts with `1/2 + 1/2 prod_j p_j`.
pub fn build_weak_conjunction(vs: &[StoqVerifier]) -> Result<StoqVerifier> {
    let (mut b, maps) = combined_builder(vs)?;
    let mut forward = Vec::new();
    let mut outs = Vec::new();
    for (v, m) in vs.iter().zip(&maps) {
        let (g, o) = b.embed(v, m)?;
        forward.extend(g);
        outs.push(o);
    }
    let mut gamma: Vec<Gate> = forward.clone();
    for o in outs {
        let p = b.plus();
        gamma.extend(swap(o, p));
    }
    gamma.extend(inverse_gates(&forward));
    b.finish_gamma(&gamma)
}

/// One plus control drives every `Gamma_j`; accepts product witnesses with
/// `1/2 + 1/2 prod_j (2 p_j - 1)`.
pub fn build_strong_conjunction(vs: &[StoqVerifier]) -> Result<StoqVerifier> {
    let (mut b, maps) = combined_builder(vs)?;
    let mut gamma = Vec::new();
    for (v, m) in vs.iter().zip(&maps) {
        gamma.extend(b.embed_gamma(v, m)?);
    }
    b.finish_gamma(&gamma)
}
