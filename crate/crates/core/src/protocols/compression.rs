//! Mixtures of a test branch with the original verifier: prover compression
//! (product test) and the symmetric-to-plain reduction (symmetric projector).

use serde::{Deserialize, Serialize};

use super::product::product_test_gamma;
use super::symmetric::{sym_projector_gamma, DyadicBranchPlan};
use super::{convex_gamma, Dyadic};
use crate::error::{Error, Result};
use crate::verifier::builder::Builder;
use crate::verifier::{StoqVerifier, Thresholds};

pub const DEFAULT_C_PROD: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionParams {
    pub c_prod: f64,
    pub gamma: f64,
    pub delta: f64,
    pub lambda_target: f64,
    pub lambda: Dyadic,
    pub lambda_value: f64,
    pub truncation: f64,
    /// `1 - lambda (1 - c)`.
    pub completeness: f64,
    /// `completeness - gamma Delta^2 / 2`.
    pub soundness: f64,
}

impl CompressionParams {
    pub fn new(t: &Thresholds, c_prod: f64, max_bits: u32) -> Result<Self> {
        let gamma = c_prod / 4.0;
        let target = gamma * t.delta;
        if !(target > 0.0 && target < 0.5) {
            return Err(Error::Range(format!("lambda = {target} outside (0, 1/2)")));
        }
        let lambda = Dyadic::floor(target, max_bits)?;
        if lambda.num == 0 {
            return Err(Error::Range(format!("lambda = {target} rounds to 0 with {max_bits} bits")));
        }
        let lv = lambda.value();
        let completeness = 1.0 - lv * (1.0 - t.c);
        Ok(Self {
            c_prod,
            gamma,
            delta: t.delta,
            lambda_target: target,
            lambda,
            lambda_value: lv,
            truncation: target - lv,
            completeness,
            soundness: completeness - gamma * t.delta * t.delta / 2.0,
        })
    }
}

/// Two provers `A`, `B` of `k * ell` qubits: product test on `(A, B)` with
/// weight `1 - lambda`, `V` on the blocks of `A` with weight `lambda`.
pub fn build_prover_compression(v: &StoqVerifier, params: &CompressionParams) -> Result<StoqVerifier> {
    let (k, ell) = (v.layout.k, v.layout.ell);
    if k <= 2 {
        return Err(Error::InvalidInstance(format!("prover compression needs k > 2, got {k}")));
    }
    let mut b = Builder::new(2, k * ell);
    let (a, bq) = (b.prover(0), b.prover(1));
    let prod = product_test_gamma(&mut b, k, ell, &a, &bq);
    let vg = b.embed_gamma(v, &a)?;
    let lam = params.lambda;
    let gamma = convex_gamma(&mut b, &[((1u64 << lam.bits) - lam.num, prod), (lam.num, vg)], lam.bits)?;
    b.finish_gamma(&gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymToStoqParams {
    pub delta: f64,
    pub lambda_target: f64,
    pub lambda: Dyadic,
    pub lambda_value: f64,
    pub b: u32,
    pub plan: DyadicBranchPlan,
    pub completeness: f64,
    /// `completeness - Delta^2 / 16`.
    pub soundness: f64,
}

impl SymToStoqParams {
    pub fn new(k: usize, t: &Thresholds, max_bits: u32) -> Result<Self> {
        let target = t.delta / 8.0;
        let lambda = Dyadic::floor(target, max_bits)?;
        if lambda.num == 0 {
            return Err(Error::Range(format!("lambda = {target} rounds to 0 with {max_bits} bits")));
        }
        let b = (16.0 / (t.delta * t.delta)).log2().ceil() as u32;
        let lv = lambda.value();
        let completeness = 1.0 - lv * (1.0 - t.c);
        Ok(Self {
            delta: t.delta,
            lambda_target: target,
            lambda,
            lambda_value: lv,
            b,
            plan: DyadicBranchPlan::new(k, b)?,
            completeness,
            soundness: completeness - t.delta * t.delta / 16.0,
        })
    }
}

/// Symmetric projector with weight `1 - lambda`, `V` with weight `lambda`.
pub fn build_sym_to_stoq(v: &StoqVerifier, params: &SymToStoqParams) -> Result<StoqVerifier> {
    let (k, ell) = (v.layout.k, v.layout.ell);
    if params.plan.k != k {
        return Err(Error::InvalidInstance(format!("plan for k = {}, verifier has k = {k}", params.plan.k)));
    }
    let mut b = Builder::new(k, ell);
    let blocks: Vec<Vec<usize>> = (0..k).map(|i| b.prover(i)).collect();
    let sym = sym_projector_gamma(&mut b, &params.plan, &blocks)?;
    let all: Vec<usize> = blocks.concat();
    let vg = b.embed_gamma(v, &all)?;
    let lam = params.lambda;
    let gamma = convex_gamma(&mut b, &[((1u64 << lam.bits) - lam.num, sym), (lam.num, vg)], lam.bits)?;
    b.finish_gamma(&gamma)
}
