//! Sum-of-squares rounding over explicit moment oracles: direct rounding,
//! Hellinger diagnostics, square-monomial conditioning and the entropy
//! decrement loop.
//!
//! Pseudoexpectations are realized as finite mixtures of unit vectors, so
//! every axiom holds by construction. Entropies are in bits. Tuples of
//! indices `(i_1, ..., i_t)` are encoded as `sum_r i_r d^r`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sepval::PartitionedMatrix;
use crate::states::{entropy, hellinger2, kl, Distribution};

/// Joint laws are built up to this many outcomes.
pub const MAX_OUTCOMES: usize = 1_000_000;
const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub w: f64,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OracleJson")]
pub struct MomentOracle {
    pub d: usize,
    pub t: usize,
    pub components: Vec<Component>,
}

#[derive(Deserialize)]
struct OracleJson {
    d: usize,
    t: usize,
    components: Vec<Component>,
}

impl TryFrom<OracleJson> for MomentOracle {
    type Error = Error;
    fn try_from(j: OracleJson) -> Result<Self> {
        MomentOracle::new(j.d, j.t, j.components.into_iter().map(|c| (c.w, c.v)).collect())
    }
}

impl MomentOracle {
    /// Weights are renormalized; vectors must be unit length.
    pub fn new(d: usize, t: usize, components: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        if d == 0 || t == 0 || components.is_empty() {
            return Err(Error::InvalidState("empty oracle".into()));
        }
        let total: f64 = components.iter().map(|c| c.0).sum();
        let mut out = Vec::with_capacity(components.len());
        for (w, v) in components {
            if v.len() != d {
                return Err(Error::DimensionMismatch(d, v.len()));
            }
            if !(w > 0.0) {
                return Err(Error::InvalidState(format!("component weight {w}")));
            }
            let n2: f64 = v.iter().map(|x| x * x).sum();
            if (n2.sqrt() - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidState(format!("component norm {}", n2.sqrt())));
            }
            out.push(Component { w: w / total, v });
        }
        Ok(Self { d, t, components: out })
    }

    pub fn single(t: usize, v: Vec<f64>) -> Result<Self> {
        Self::new(v.len(), t, vec![(1.0, v)])
    }

    pub fn basis(d: usize, t: usize, i: usize) -> Result<Self> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Self::single(t, v)
    }

    /// `E~[p(x)]` for any polynomial given as a function.
    pub fn expect(&self, p: impl Fn(&[f64]) -> f64) -> f64 {
        self.components.iter().map(|c| c.w * p(&c.v)).sum()
    }

    /// `E~[M(x)]` for `M` over `(R^d)^{(x) t}`.
    pub fn expect_matrix(&self, m: &PartitionedMatrix) -> Result<f64> {
        check_shape(m, self.d, self.t)?;
        Ok(self.expect(|v| tensor_value_unchecked(m, v, self.t)))
    }
}

/// `Pr[A = i] = E~[x_i^2]`.
pub fn marginal(o: &MomentOracle) -> Distribution {
    let mut p = vec![0.0; o.d];
    for c in &o.components {
        for (pi, x) in p.iter_mut().zip(&c.v) {
            *pi += c.w * x * x;
        }
    }
    normalized(p)
}

fn normalized(p: Vec<f64>) -> Distribution {
    let s: f64 = p.iter().sum();
    Distribution::new(p.into_iter().enumerate().map(|(i, x)| (i as u64, x / s))).expect("non-negative weights")
}

fn outcomes(d: usize, t: usize) -> Result<usize> {
    let n = (d as f64).powi(t as i32);
    if n > MAX_OUTCOMES as f64 {
        return Err(Error::CapExceeded(format!("{d}^{t} outcomes")));
    }
    Ok(n as usize)
}

/// `Pr[(A_1..A_t) = alpha] = E~[prod_r x_{alpha_r}^2]`.
pub fn joint_law(o: &MomentOracle, t: usize) -> Result<Distribution> {
    let n = outcomes(o.d, t)?;
    let d = o.d;
    let p = o
        .components
        .par_iter()
        .fold(
            || vec![0.0; n],
            |mut acc, c| {
                let sq: Vec<f64> = c.v.iter().map(|x| x * x).collect();
                for (idx, slot) in acc.iter_mut().enumerate() {
                    let mut r = idx;
                    let mut prod = c.w;
                    for _ in 0..t {
                        prod *= sq[r % d];
                        r /= d;
                    }
                    *slot += prod;
                }
                acc
            },
        )
        .reduce(|| vec![0.0; n], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    Ok(normalized(p))
}

/// `x*_i = sqrt(E~[x_i^2])`.
pub fn direct_round(o: &MomentOracle) -> Vec<f64> {
    let m = marginal(o);
    (0..o.d).map(|i| m.prob(i as u64).sqrt()).collect()
}

/// Product of `t` copies of the marginal.
fn product_law(a: &Distribution, d: usize, t: usize) -> Distribution {
    let mut out = a.clone();
    let mut stride = d as u64;
    for _ in 1..t {
        out = out.product(a, stride);
        stride *= d as u64;
    }
    out
}

/// Hellinger distance between the joint law and the product of marginals.
pub fn hellinger_joint_product(o: &MomentOracle, t: usize) -> Result<f64> {
    let joint = joint_law(o, t)?;
    Ok(hellinger2(&joint, &product_law(&marginal(o), o.d, t)).sqrt())
}

/// Reweight each component by `prod_j v[i_j]^2`.
pub fn condition(o: &MomentOracle, pins: &[usize]) -> Result<MomentOracle> {
    if let Some(i) = pins.iter().find(|i| **i >= o.d) {
        return Err(Error::Range(format!("index {i} outside dimension {}", o.d)));
    }
    let comps: Vec<(f64, Vec<f64>)> = o
        .components
        .iter()
        .map(|c| (c.w * pins.iter().map(|i| c.v[*i] * c.v[*i]).product::<f64>(), c.v.clone()))
        .filter(|c| c.0 > 0.0)
        .collect();
    if comps.is_empty() {
        return Err(Error::Premise(format!("pinning {pins:?} has zero mass")));
    }
    MomentOracle::new(o.d, o.t, comps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingDiagnostics {
    pub joint: Vec<(u64, f64)>,
    pub marginal: Vec<f64>,
    pub hellinger: f64,
    pub entropy: f64,
    pub pinned: Vec<Vec<usize>>,
}

pub fn diagnostics(o: &MomentOracle, t: usize, pinned: Vec<Vec<usize>>) -> Result<RoundingDiagnostics> {
    let joint = joint_law(o, t)?;
    let a = marginal(o);
    Ok(RoundingDiagnostics {
        hellinger: hellinger2(&joint, &product_law(&a, o.d, t)).sqrt(),
        entropy: entropy(&a),
        marginal: (0..o.d).map(|i| a.prob(i as u64)).collect(),
        joint: joint.probs().iter().map(|(k, v)| (*k, *v)).collect(),
        pinned,
    })
}

/// `H(A_t | A_1 .. A_{t-1})` in bits.
pub fn conditional_entropy(o: &MomentOracle, t: usize) -> Result<f64> {
    if t == 1 {
        return Ok(entropy(&marginal(o)));
    }
    Ok(entropy(&joint_law(o, t)?) - entropy(&joint_law(o, t - 1)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecrementReport {
    pub hellinger: f64,
    pub epsilon: f64,
    pub entropy: f64,
    pub conditional_entropy: f64,
    /// `H(A) - 2 eps^2 / t`.
    pub bound: f64,
    pub holds: bool,
    /// Lexicographically least pinning tuple whose conditioned marginal meets
    /// the bound.
    pub pin: Vec<usize>,
    pub pinned_entropy: f64,
}

fn tuple(mut idx: usize, d: usize, len: usize) -> Vec<usize> {
    (0..len)
        .map(|_| {
            let i = idx % d;
            idx /= d;
            i
        })
        .collect()
}

pub fn entropy_decrement_check(o: &MomentOracle, t: usize, epsilon: f64) -> Result<DecrementReport> {
    if t < 2 {
        return Err(Error::Premise("decrement needs t >= 2".into()));
    }
    let h = hellinger_joint_product(o, t)?;
    if h <= epsilon {
        return Err(Error::Premise(format!("hellinger {h} <= epsilon {epsilon}")));
    }
    let ent = entropy(&marginal(o));
    let cond = conditional_entropy(o, t)?;
    let bound = ent - 2.0 * epsilon * epsilon / t as f64;
    let n = outcomes(o.d, t - 1)?;
    // lexicographic order on (i_1, ..., i_{t-1}) with i_1 most significant
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut fallback: Option<(Vec<usize>, f64)> = None;
    for rank in 0..n {
        let mut pins = tuple(rank, o.d, t - 1);
        pins.reverse();
        let Ok(c) = condition(o, &pins) else { continue };
        let hc = entropy(&marginal(&c));
        if hc <= bound + 1e-12 {
            best = Some((pins, hc));
            break;
        }
        if fallback.as_ref().is_none_or(|f| hc < f.1) {
            fallback = Some((pins, hc));
        }
    }
    let (pin, pinned_entropy) = best.or(fallback).expect("some tuple has positive mass");
    Ok(DecrementReport {
        hellinger: h,
        epsilon,
        entropy: ent,
        conditional_entropy: cond,
        bound,
        holds: cond <= bound + 1e-12,
        pin,
        pinned_entropy,
    })
}

/// `KL(joint || marginal^t)` and the terms `I(A_j ; A_1 .. A_{j-1})` for
/// `j = 2..t`, whose sum it equals.
pub fn chain_rule_terms(o: &MomentOracle, t: usize) -> Result<(f64, Vec<f64>)> {
    let a = marginal(o);
    let joint = joint_law(o, t)?;
    let total = kl(&joint, &product_law(&a, o.d, t));
    let ha = entropy(&a);
    let mut prev = ha;
    let mut terms = Vec::new();
    for j in 2..=t {
        let hj = entropy(&joint_law(o, j)?);
        terms.push(prev + ha - hj);
        prev = hj;
    }
    Ok((total, terms))
}

fn check_shape(m: &PartitionedMatrix, d: usize, t: usize) -> Result<()> {
    if m.dims().len() != t || m.dims().iter().any(|x| *x != d) {
        return Err(Error::InvalidInstance(format!("matrix parties {:?} for d = {d}, t = {t}", m.dims())));
    }
    Ok(())
}

fn tensor_value_unchecked(m: &PartitionedMatrix, x: &[f64], t: usize) -> f64 {
    let v = DVector::from_column_slice(x);
    m.value(&vec![v; t])
}

/// `Tr M (x x^T)^{(x) t}`.
pub fn tensor_value(m: &PartitionedMatrix, x: &[f64]) -> Result<f64> {
    let t = m.dims().len();
    check_shape(m, x.len(), t)?;
    Ok(tensor_value_unchecked(m, x, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundStep {
    pub pin: Vec<usize>,
    pub hellinger: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BksResult {
    pub x: Vec<f64>,
    /// `M(x*)` after scaling `M` to norm at most one.
    pub value: f64,
    /// `E~[M]` under the final oracle.
    pub pseudo_value: f64,
    pub scale: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub max_rounds: usize,
    pub trace: Vec<RoundStep>,
    pub final_hellinger: f64,
    pub final_entropy: f64,
}

/// `ceil(t log2 d / (2 delta^2)) + 1`.
pub fn max_rounds(t: usize, d: usize, delta: f64) -> usize {
    (t as f64 * (d as f64).log2() / (2.0 * delta * delta)).ceil() as usize + 1
}

/// Condition until the joint law is `delta`-close to a product, then round
/// directly; `delta = eps / (2 sqrt 2)`.
pub fn bks_round_loop(m: &PartitionedMatrix, o: &MomentOracle, epsilon: f64) -> Result<BksResult> {
    if !m.is_nonneg() {
        return Err(Error::Premise("matrix has a negative entry".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Range(format!("epsilon = {epsilon}")));
    }
    let t = o.t;
    check_shape(m, o.d, t)?;
    let norm = m.operator_norm();
    let (m, scale) = if norm > 1.0 { (m.affine(1.0 / norm, 0.0)?, 1.0 / norm) } else { (m.clone(), 1.0) };
    let delta = epsilon / (2.0 * 2f64.sqrt());
    let limit = max_rounds(t, o.d, delta);
    let mut cur = o.clone();
    let mut trace = Vec::new();
    let mut h = hellinger_joint_product(&cur, t)?;
    while h > delta && t >= 2 && trace.len() < limit {
        let rep = entropy_decrement_check(&cur, t, delta)?;
        cur = condition(&cur, &rep.pin)?;
        h = hellinger_joint_product(&cur, t)?;
        trace.push(RoundStep { pin: rep.pin, hellinger: h, entropy: entropy(&marginal(&cur)) });
    }
    let x = direct_round(&cur);
    Ok(BksResult {
        value: tensor_value_unchecked(&m, &x, t),
        pseudo_value: cur.expect_matrix(&m)?,
        x,
        scale,
        epsilon,
        delta,
        max_rounds: limit,
        trace,
        final_hellinger: h,
        final_entropy: entropy(&marginal(&cur)),
    })
}

/// Mixture of `components` random unit vectors with random weights; with
/// `sign` the vectors may have negative entries.
pub fn random_oracle(d: usize, t: usize, components: usize, sign: bool, rng: &mut ChaCha8Rng) -> Result<MomentOracle> {
    let comps = (0..components)
        .map(|_| {
            let raw: Vec<f64> = (0..d).map(|_| if sign { rng.gen_range(-1.0..1.0) } else { rng.gen::<f64>() }).collect();
            let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
            (rng.gen_range(0.05..1.0), raw.into_iter().map(|x| x / n).collect())
        })
        .collect();
    MomentOracle::new(d, t, comps)
}

/// Mixture concentrated near distinct basis vectors, so the copies are
/// strongly correlated.
pub fn correlated_oracle(d: usize, t: usize, spread: f64, seed: u64) -> Result<MomentOracle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = (0..d)
        .map(|i| {
            let raw: Vec<f64> = (0..d).map(|j| if i == j { 1.0 } else { spread * rng.gen::<f64>() }).collect();
            let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            (rng.gen_range(0.2..1.0), raw.into_iter().map(|x| x / n).collect())
        })
        .collect();
    MomentOracle::new(d, t, comps)
}

/// Random entrywise non-negative symmetric matrix over `(R^d)^{(x) t}` with
/// operator norm one.
pub fn random_nonneg_matrix(d: usize, t: usize, rng: &mut ChaCha8Rng) -> Result<PartitionedMatrix> {
    let n = d.pow(t as u32);
    let mut a = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.gen::<f64>());
    a = (&a + a.transpose()) * 0.5;
    let m = PartitionedMatrix::new(vec![d; t], a)?;
    let norm = m.operator_norm();
    m.affine(1.0 / norm, 0.0)
}
