//! Verifier-to-verifier transformations.
//!
//! Every constructor works on [`Builder`] gate lists of `Gamma` circuits and
//! wraps the result in the branch-overlap test, so a mixture with dyadic
//! weights is a selector register of plus qubits choosing which `Gamma` runs.

pub mod compression;
pub mod conjunction;
pub mod matching;
pub mod product;
pub mod symmetric;
pub mod symmetrize;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::revsim::Gate;
use crate::scalar::{Rational, Scalar};
use crate::verifier::builder::{dyadic_cover, Builder};

pub use compression::{build_prover_compression, build_sym_to_stoq, CompressionParams, SymToStoqParams};
pub use conjunction::{build_strong_conjunction, build_weak_conjunction};
pub use matching::{lex_first_perfect_matching, perfect_matching, Matching};
pub use product::{build_product_test, eta, product_test_value, EtaReport};
pub use symmetric::{balanced_map, build_sym_projector, sym_overlap, symmetric_closeness_bound, DyadicBranchPlan};
pub use symmetrize::{build_length_efficient_symmetrization, match_probability, SymmetrizationPlan};

/// `num / 2^bits` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dyadic {
    pub num: u64,
    pub bits: u32,
}

impl Dyadic {
    pub fn new(mut num: u64, mut bits: u32) -> Self {
        while bits > 0 && num.is_multiple_of(2) {
            num /= 2;
            bits -= 1;
        }
        Self { num, bits }
    }

    /// Largest dyadic with at most `max_bits` bits that does not exceed `x`.
    pub fn floor(x: f64, max_bits: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) || max_bits > 62 {
            return Err(Error::Range(format!("dyadic rounding of {x} with {max_bits} bits")));
        }
        let scaled = x * 2f64.powi(max_bits as i32);
        let mut num = scaled.floor() as u64;
        // guard against x*2^p landing a hair below an integer
        if (scaled - scaled.round()).abs() < 1e-9 {
            num = scaled.round() as u64;
        }
        Ok(Self::new(num, max_bits))
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / 2f64.powi(self.bits as i32)
    }

    pub fn to_rational(&self) -> Rational {
        Rational::from_u64(self.num) / Rational::pow2(self.bits)
    }
}

/// Mixture of `Gamma` bodies: `parts[j]` runs on `weights[j]` of the `2^bits`
/// selector branches, in contiguous ranges.
pub fn convex_gamma(b: &mut Builder, parts: &[(u64, Vec<Gate>)], bits: u32) -> Result<Vec<Gate>> {
    let total: u64 = parts.iter().map(|p| p.0).sum();
    if total != 1u64 << bits {
        return Err(Error::InvalidInstance(format!("mixture weights sum to {total}, not 2^{bits}")));
    }
    let sel = b.pluses(bits as usize);
    let mut gates = Vec::new();
    let mut lo = 0;
    for (w, body) in parts {
        for pat in dyadic_cover(lo, lo + w, bits as usize) {
            let pattern: Vec<(usize, bool)> = pat.iter().map(|(i, v)| (sel[*i], *v)).collect();
            gates.extend(b.select(&pattern, body)?);
        }
        lo += w;
    }
    Ok(gates)
}

/// `Gamma` with `<Gamma> = v` exactly: a zero flag is flipped on the selector
/// branches at or above `v 2^bits`.
pub fn dummy_gamma(b: &mut Builder, v: Dyadic) -> Vec<Gate> {
    let sel = b.pluses(v.bits as usize);
    let flag = b.zero();
    let mut gates = Vec::new();
    for pat in dyadic_cover(v.num, 1u64 << v.bits, v.bits as usize) {
        let pattern: Vec<(usize, bool)> = pat.iter().map(|(i, x)| (sel[*i], *x)).collect();
        gates.extend(b.mcx(&pattern, flag));
    }
    gates
}

/// Number of parallel repetitions for error `2^-n` at overlap bound `b`.
pub fn repetition_count(n: u64, b: f64) -> Result<u64> {
    if !(0.0..1.0).contains(&b) {
        return Err(Error::Range(format!("overlap bound {b} not in [0, 1)")));
    }
    if n == 0 {
        return Ok(0);
    }
    let per = (2.0 / (1.0 + b)).log2();
    Ok((n as f64 / per - 1e-12).ceil() as u64)
}
