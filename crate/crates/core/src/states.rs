//! Non-negative states, distributions and the distance toolkit.
//!
//! A [`NonNegativeState`] stores unnormalized non-negative weights `m(x)`; the
//! amplitude of `x` is `m(x) / sqrt(Z)` with `Z = sum m(x)^2`. Every squared
//! quantity (branch weights, overlaps of permuted copies) is then a ratio of
//! weight polynomials, exact when the weights are rational.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::revsim::{format_bits, parse_bits, MAX_WIDTH};
use crate::scalar::Scalar;

pub const FLOAT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct NonNegativeState<T = f64> {
    width: usize,
    weights: BTreeMap<u64, T>,
    norm2: T,
}

impl<T: Scalar> NonNegativeState<T> {
    pub fn new(width: usize, weights: impl IntoIterator<Item = (u64, T)>) -> Result<Self> {
        if width > MAX_WIDTH {
            return Err(Error::CapExceeded(format!("state width {width}")));
        }
        let mut map = BTreeMap::new();
        for (x, w) in weights {
            if width < 64 && x >> width != 0 {
                return Err(Error::InvalidState(format!("basis index {x} exceeds width {width}")));
            }
            if w.is_negative() {
                return Err(Error::InvalidState(format!("negative weight at {x}")));
            }
            if !w.is_zero() {
                map.insert(x, w);
            }
        }
        if map.is_empty() {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let norm2 = map.values().fold(T::zero(), |acc, w| acc + w.clone() * w.clone());
        Ok(Self { width, weights: map, norm2 })
    }

    pub fn basis(width: usize, x: u64) -> Result<Self> {
        Self::new(width, [(x, T::one())])
    }

    /// Uniform superposition over `support`.
    pub fn subset(width: usize, support: impl IntoIterator<Item = u64>) -> Result<Self> {
        Self::new(width, support.into_iter().map(|x| (x, T::one())))
    }

    /// `|+>^width`.
    pub fn plus(width: usize) -> Result<Self> {
        if width > 24 {
            return Err(Error::CapExceeded(format!("dense plus state on {width} qubits")));
        }
        Self::subset(width, 0..1u64 << width)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn weights(&self) -> &BTreeMap<u64, T> {
        &self.weights
    }

    pub fn weight(&self, x: u64) -> Option<&T> {
        self.weights.get(&x)
    }

    /// `Z = sum m(x)^2`.
    pub fn norm2(&self) -> &T {
        &self.norm2
    }

    pub fn support_len(&self) -> usize {
        self.weights.len()
    }

    pub fn amplitude(&self, x: u64) -> f64 {
        self.weights.get(&x).map_or(0.0, |w| w.to_f64() / self.norm2.to_f64().sqrt())
    }

    /// Hash index of the weights for fast lookups in hot loops.
    pub fn weight_index(&self) -> HashMap<u64, T> {
        self.weights.iter().map(|(k, v)| (*k, v.clone())).collect()
    }

    /// Amplitudes on all `2^width` basis strings.
    pub fn dense(&self) -> Result<Vec<f64>> {
        if self.width > 24 {
            return Err(Error::CapExceeded(format!("dense vector on {} qubits", self.width)));
        }
        let mut v = vec![0.0; 1 << self.width];
        for &x in self.weights.keys() {
            v[x as usize] = self.amplitude(x);
        }
        Ok(v)
    }

    /// `a` on the low qubits, `b` above it.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let width = self.width + other.width;
        if width > MAX_WIDTH {
            return Err(Error::CapExceeded(format!("tensor width {width}")));
        }
        let mut weights = BTreeMap::new();
        for (xb, wb) in &other.weights {
            for (xa, wa) in &self.weights {
                weights.insert(xa | xb << self.width, wa.clone() * wb.clone());
            }
        }
        let norm2 = self.norm2.clone() * other.norm2.clone();
        Ok(Self { width, weights, norm2 })
    }

    pub fn tensor_all(parts: &[Self]) -> Result<Self> {
        let (first, rest) = parts.split_first().ok_or_else(|| Error::InvalidState("empty product".into()))?;
        rest.iter().try_fold(first.clone(), |acc, p| acc.tensor(p))
    }

    /// `(sum m m')^2 / (Z Z')`, the squared inner product, exactly.
    pub fn overlap_squared(&self, other: &Self) -> Result<T> {
        let s = self.raw_inner(other)?;
        Ok(s.clone() * s / (self.norm2.clone() * other.norm2.clone()))
    }

    fn raw_inner(&self, other: &Self) -> Result<T> {
        if self.width != other.width {
            return Err(Error::WidthMismatch { expected: self.width, got: other.width });
        }
        let (small, big) = if self.weights.len() <= other.weights.len() { (self, other) } else { (other, self) };
        Ok(small
            .weights
            .iter()
            .filter_map(|(x, w)| big.weights.get(x).map(|v| w.clone() * v.clone()))
            .fold(T::zero(), |a, b| a + b))
    }

    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        let s = self.raw_inner(other)?.to_f64();
        Ok(s / (self.norm2.to_f64() * other.norm2.to_f64()).sqrt())
    }

    /// `p(x) = m(x)^2 / Z`.
    pub fn squared_distribution(&self) -> Distribution<T> {
        Distribution {
            probs: self
                .weights
                .iter()
                .map(|(x, w)| (*x, w.clone() * w.clone() / self.norm2.clone()))
                .collect(),
        }
    }

    pub fn to_f64(&self) -> NonNegativeState<f64> {
        NonNegativeState {
            width: self.width,
            weights: self.weights.iter().map(|(k, v)| (*k, v.to_f64())).collect(),
            norm2: self.norm2.to_f64(),
        }
    }

    /// Relabel basis strings through a bijection `f` onto a new width.
    pub fn relabel(&self, width: usize, f: impl Fn(u64) -> u64) -> Result<Self> {
        Self::new(width, self.weights.iter().map(|(x, w)| (f(*x), w.clone())))
    }
}

impl NonNegativeState<f64> {
    /// Normalized state from dense non-negative amplitudes.
    pub fn from_dense(width: usize, amps: &[f64]) -> Result<Self> {
        if amps.len() != 1 << width {
            return Err(Error::DimensionMismatch(1 << width, amps.len()));
        }
        Self::new(width, amps.iter().enumerate().map(|(i, a)| (i as u64, *a)))
    }

    pub fn to_json(&self) -> StateJson {
        StateJson::Amplitudes {
            width: self.width,
            amplitudes: self.weights.keys().map(|x| (format_bits(*x, self.width), self.amplitude(*x))).collect(),
        }
    }
}

/// Entrywise absolute value of a signed vector, renormalized.
pub fn absolutize(width: usize, signed: &[f64]) -> Result<NonNegativeState<f64>> {
    let abs: Vec<f64> = signed.iter().map(|v| v.abs()).collect();
    NonNegativeState::from_dense(width, &abs)
}

/// State file format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateJson {
    Amplitudes { width: usize, amplitudes: BTreeMap<String, f64> },
    Subset { width: usize, subset: Vec<String> },
}

impl StateJson {
    pub fn into_state(self) -> Result<NonNegativeState<f64>> {
        match self {
            StateJson::Amplitudes { width, amplitudes } => {
                let mut w = Vec::new();
                for (k, v) in amplitudes {
                    if k.len() != width {
                        return Err(Error::WidthMismatch { expected: width, got: k.len() });
                    }
                    w.push((parse_bits(&k)?, v));
                }
                let s = NonNegativeState::new(width, w)?;
                if (s.norm2() - 1.0).abs() > 1e-6 {
                    return Err(Error::InvalidState(format!("squared norm {} is not 1", s.norm2())));
                }
                Ok(s)
            }
            StateJson::Subset { width, subset } => {
                let mut xs = Vec::new();
                for k in subset {
                    if k.len() != width {
                        return Err(Error::WidthMismatch { expected: width, got: k.len() });
                    }
                    xs.push(parse_bits(&k)?);
                }
                NonNegativeState::subset(width, xs)
            }
        }
    }
}

/// Finite distribution keyed by outcome index.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T = f64> {
    probs: BTreeMap<u64, T>,
}

impl<T: Scalar> Distribution<T> {
    pub fn new(probs: impl IntoIterator<Item = (u64, T)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, p) in probs {
            if p.is_negative() {
                return Err(Error::InvalidState(format!("negative probability at {k}")));
            }
            if !p.is_zero() {
                let e = map.entry(k).or_insert_with(T::zero);
                *e = e.clone() + p;
            }
        }
        let total = map.values().fold(T::zero(), |a, b| a + b.clone()).to_f64();
        if (total - 1.0).abs() > FLOAT_TOL {
            return Err(Error::InvalidState(format!("probabilities sum to {total}")));
        }
        Ok(Self { probs: map })
    }

    pub fn uniform(n: u64) -> Self {
        Self { probs: (0..n).map(|i| (i, T::from_ratio(1, n as i64))).collect() }
    }

    pub fn point(x: u64) -> Self {
        Self { probs: [(x, T::one())].into_iter().collect() }
    }

    pub fn prob(&self, x: u64) -> T {
        self.probs.get(&x).cloned().unwrap_or_else(T::zero)
    }

    pub fn probs(&self) -> &BTreeMap<u64, T> {
        &self.probs
    }

    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        self.probs.keys().copied()
    }

    pub fn to_f64(&self) -> Distribution<f64> {
        Distribution { probs: self.probs.iter().map(|(k, v)| (*k, v.to_f64())).collect() }
    }

    /// Distribution of `(x, y)` encoded as `x + stride * y`.
    pub fn product(&self, other: &Self, stride: u64) -> Self {
        let mut probs = BTreeMap::new();
        for (y, q) in &other.probs {
            for (x, p) in &self.probs {
                probs.insert(x + stride * y, p.clone() * q.clone());
            }
        }
        Self { probs }
    }

    /// Image distribution under `f`.
    pub fn map(&self, f: impl Fn(u64) -> u64) -> Self {
        let mut probs: BTreeMap<u64, T> = BTreeMap::new();
        for (x, p) in &self.probs {
            let e = probs.entry(f(*x)).or_insert_with(T::zero);
            *e = e.clone() + p.clone();
        }
        Self { probs }
    }
}

fn keys_union<'a>(p: &'a Distribution, q: &'a Distribution) -> impl Iterator<Item = u64> + 'a {
    let mut keys: Vec<u64> = p.probs.keys().chain(q.probs.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
}

/// Total variation distance.
pub fn tv(p: &Distribution, q: &Distribution) -> f64 {
    0.5 * keys_union(p, q).map(|x| (p.prob(x) - q.prob(x)).abs()).sum::<f64>()
}

/// Squared Hellinger distance `1 - sum sqrt(p q)`.
pub fn hellinger2(p: &Distribution, q: &Distribution) -> f64 {
    let bc: f64 = p.probs.iter().map(|(x, a)| (a * q.prob(*x)).sqrt()).sum();
    (1.0 - bc).max(0.0)
}

/// KL divergence in bits; `+inf` when `supp p` is not inside `supp q`.
pub fn kl(p: &Distribution, q: &Distribution) -> f64 {
    let mut s = 0.0;
    for (x, a) in &p.probs {
        let b = q.prob(*x);
        if b <= 0.0 {
            return f64::INFINITY;
        }
        s += a * (a / b).log2();
    }
    s.max(0.0)
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy(p: &Distribution) -> f64 {
    -p.probs.values().filter(|a| **a > 0.0).map(|a| a * a.log2()).sum::<f64>()
}

/// Real symmetric density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<f64>,
}

impl DensityMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(m.nrows(), m.ncols()));
        }
        if (&m - m.transpose()).amax() > FLOAT_TOL {
            return Err(Error::InvalidState("density matrix not symmetric".into()));
        }
        if (m.trace() - 1.0).abs() > FLOAT_TOL {
            return Err(Error::InvalidState(format!("trace {}", m.trace())));
        }
        let min = m.clone().symmetric_eigenvalues().min();
        if min < -FLOAT_TOL {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min}")));
        }
        Ok(Self { m })
    }

    pub fn pure<T: Scalar>(state: &NonNegativeState<T>) -> Result<Self> {
        let v = nalgebra::DVector::from_vec(state.dense()?);
        Ok(Self { m: &v * v.transpose() })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { m: DMatrix::identity(dim, dim) / dim as f64 }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// `Tr(rho sigma)`.
    pub fn overlap(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(self.m.component_mul(&other.m).sum())
    }
}

/// `<psi| rho |psi>`.
pub fn fidelity_pure_mixed<T: Scalar>(pure: &NonNegativeState<T>, rho: &DensityMatrix) -> Result<f64> {
    if 1usize << pure.width() != rho.dim() {
        return Err(Error::DimensionMismatch(1 << pure.width(), rho.dim()));
    }
    let v = nalgebra::DVector::from_vec(pure.dense()?);
    Ok((v.transpose() * &rho.m * &v)[(0, 0)])
}

/// `sqrt(1 - <a|b>^2)` for pure states.
pub fn trace_distance_pure<T: Scalar>(a: &NonNegativeState<T>, b: &NonNegativeState<T>) -> Result<f64> {
    let f = a.overlap_squared(b)?.to_f64();
    Ok((1.0 - f).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, Rational};

    #[test]
    fn tensor_examples() {
        let z = NonNegativeState::<f64>::basis(1, 0).unwrap();
        let o = NonNegativeState::<f64>::basis(1, 1).unwrap();
        let t = z.tensor(&o).unwrap();
        assert_eq!(t.amplitude(parse_bits("01").unwrap()), 1.0);
        let pp = NonNegativeState::<f64>::plus(1).unwrap().tensor(&NonNegativeState::plus(1).unwrap()).unwrap();
        for x in 0..4 {
            assert!((pp.amplitude(x) - 0.5).abs() < 1e-15);
        }
        let s = NonNegativeState::<f64>::subset(2, [parse_bits("00").unwrap(), parse_bits("01").unwrap()]).unwrap();
        let t = s.tensor(&z).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!((t.amplitude(parse_bits("000").unwrap()) - r).abs() < 1e-15);
        assert!((t.amplitude(parse_bits("010").unwrap()) - r).abs() < 1e-15);
        assert_eq!(t.support_len(), 2);
    }

    #[test]
    fn inner_product_examples() {
        let s = NonNegativeState::<Rational>::subset(3, [1, 4, 6]).unwrap();
        assert_eq!(s.overlap_squared(&s).unwrap(), ratio(1, 1));
        let a = NonNegativeState::<f64>::subset(2, [0]).unwrap();
        let b = NonNegativeState::<f64>::subset(2, [0, 2]).unwrap();
        assert!((a.inner_product(&b).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let z = NonNegativeState::<f64>::basis(1, 0).unwrap();
        let o = NonNegativeState::<f64>::basis(1, 1).unwrap();
        assert_eq!(z.inner_product(&o).unwrap(), 0.0);
        assert!(z.inner_product(&a).is_err());
    }

    #[test]
    fn squared_distribution_examples() {
        let p = NonNegativeState::<Rational>::plus(1).unwrap().squared_distribution();
        assert_eq!(p.prob(0), ratio(1, 2));
        let s = NonNegativeState::<Rational>::subset(3, [1, 5]).unwrap().squared_distribution();
        assert_eq!(s.prob(5), ratio(1, 2));
        let v = NonNegativeState::<f64>::from_dense(1, &[0.8f64.sqrt(), 0.2f64.sqrt()]).unwrap();
        let d = v.squared_distribution();
        assert!((d.prob(0) - 0.8).abs() < 1e-12 && (d.prob(1) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn absolutize_examples() {
        let r = 0.5f64.sqrt();
        let a = absolutize(1, &[r, -r]).unwrap();
        assert!((a.amplitude(0) - r).abs() < 1e-15 && (a.amplitude(1) - r).abs() < 1e-15);
        let b = absolutize(1, &[0.6, 0.8]).unwrap();
        assert!((b.amplitude(1) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn distance_examples() {
        let u = Distribution::<f64>::uniform(2);
        let pt = Distribution::<f64>::point(0);
        let pt1 = Distribution::<f64>::point(1);
        assert_eq!(tv(&u, &u), 0.0);
        assert!(hellinger2(&u, &u).abs() < 1e-15);
        assert_eq!(kl(&u, &u), 0.0);
        assert_eq!(tv(&pt, &pt1), 1.0);
        assert!((hellinger2(&pt, &pt1) - 1.0).abs() < 1e-15);
        assert!((hellinger2(&u, &pt) - (1.0 - 0.5f64.sqrt())).abs() < 1e-12);
        assert_eq!(kl(&u, &pt), f64::INFINITY);
        assert!((entropy(&Distribution::uniform(8)) - 3.0).abs() < 1e-15);
        assert_eq!(entropy(&pt), 0.0);
    }

    #[test]
    fn fidelity_examples() {
        let z = NonNegativeState::<f64>::basis(1, 0).unwrap();
        let o = NonNegativeState::<f64>::basis(1, 1).unwrap();
        let rz = DensityMatrix::pure(&z).unwrap();
        let ro = DensityMatrix::pure(&o).unwrap();
        assert!((fidelity_pure_mixed(&z, &rz).unwrap() - 1.0).abs() < 1e-15);
        assert!(fidelity_pure_mixed(&z, &ro).unwrap().abs() < 1e-15);
        assert!((fidelity_pure_mixed(&z, &DensityMatrix::maximally_mixed(2)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trace_distance_examples() {
        let z = NonNegativeState::<f64>::basis(1, 0).unwrap();
        let o = NonNegativeState::<f64>::basis(1, 1).unwrap();
        assert_eq!(trace_distance_pure(&z, &z).unwrap(), 0.0);
        assert_eq!(trace_distance_pure(&z, &o).unwrap(), 1.0);
        // <a|b> = 1/2 with a = |0>, b = (1, sqrt 3)/2
        let b = NonNegativeState::<f64>::from_dense(1, &[0.5, 0.75f64.sqrt()]).unwrap();
        assert!((trace_distance_pure(&z, &b).unwrap() - 0.75f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn state_json() {
        let j = r#"{"width":2,"subset":["00","11"]}"#;
        let s: StateJson = serde_json::from_str(j).unwrap();
        let s = s.into_state().unwrap();
        assert_eq!(s.support_len(), 2);
        let j2 = serde_json::to_string(&s.to_json()).unwrap();
        let back = serde_json::from_str::<StateJson>(&j2).unwrap().into_state().unwrap();
        assert!((back.amplitude(3) - s.amplitude(3)).abs() < 1e-15);
        let bad = r#"{"width":2,"amplitudes":{"00":0.5}}"#;
        assert!(serde_json::from_str::<StateJson>(bad).unwrap().into_state().is_err());
        assert!(DensityMatrix::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.6, 0.6, 0.5])).is_err());
    }
}
