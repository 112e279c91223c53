//! Separable values over non-negative product witnesses.
//!
//! Party `0` is the least-significant tensor factor: the index of
//! `(i_0, ..., i_{k-1})` is `i_0 + d_0 (i_1 + d_1 (...))`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::verifier::{gamma_form, StoqVerifier};

pub const EIG_TOL: f64 = 1e-9;
/// Largest total dimension accepted by the brute-force oracle.
pub const BRUTE_DIM_CAP: usize = 256;
/// Grid points visited by the brute-force oracle before the last factor.
pub const GRID_BUDGET: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedMatrix {
    dims: Vec<usize>,
    entries: DMatrix<f64>,
    nonneg: bool,
    psd: bool,
    factors: Option<Vec<DMatrix<f64>>>,
}

impl PartitionedMatrix {
    pub fn new(dims: Vec<usize>, entries: DMatrix<f64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidInstance("empty party dimension".into()));
        }
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::DimensionMismatch(n, entries.nrows()));
        }
        if (&entries - entries.transpose()).amax() > EIG_TOL {
            return Err(Error::InvalidInstance("matrix is not symmetric".into()));
        }
        let nonneg = entries.iter().all(|x| *x >= 0.0);
        let psd = entries.clone().symmetric_eigenvalues().min() >= -EIG_TOL;
        Ok(Self { dims, entries, nonneg, psd, factors: None })
    }

    /// `F_0 (x) F_1 (x) ...` with `F_0` on party 0.
    pub fn product_form(factors: Vec<DMatrix<f64>>) -> Result<Self> {
        let dims: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
        let mut m = DMatrix::from_element(1, 1, 1.0);
        for f in &factors {
            m = f.kronecker(&m);
        }
        let mut p = Self::new(dims, m)?;
        p.factors = Some(factors);
        Ok(p)
    }

    /// Attach factors after checking that they reassemble the matrix.
    pub fn with_factors(mut self, factors: Vec<DMatrix<f64>>) -> Result<Self> {
        let p = Self::product_form(factors.clone())?;
        if p.dims != self.dims || (&p.entries - &self.entries).amax() > EIG_TOL {
            return Err(Error::InvalidInstance("factors do not reassemble the matrix".into()));
        }
        self.factors = Some(factors);
        Ok(self)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_nonneg(&self) -> bool {
        self.nonneg
    }

    pub fn is_psd(&self) -> bool {
        self.psd
    }

    pub fn factors(&self) -> Option<&[DMatrix<f64>]> {
        self.factors.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn operator_norm(&self) -> f64 {
        self.entries.clone().symmetric_eigenvalues().amax()
    }

    /// `a M + b I`.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        let n = self.dim();
        Self::new(self.dims.clone(), &self.entries * a + DMatrix::identity(n, n) * b)
    }

    /// `M (x) M'` with party `i` of the result holding both parties `i`; the
    /// `M` index is the low digit.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.dims.len() != other.dims.len() {
            return Err(Error::DimensionMismatch(self.dims.len(), other.dims.len()));
        }
        let dims: Vec<usize> = self.dims.iter().zip(&other.dims).map(|(a, b)| a * b).collect();
        let n: usize = dims.iter().product();
        let split = |idx: usize| -> (usize, usize) {
            let (mut r, mut a, mut b) = (idx, 0, 0);
            let (mut sa, mut sb) = (1, 1);
            for (i, d) in dims.iter().enumerate() {
                let p = r % d;
                r /= d;
                a += (p % self.dims[i]) * sa;
                b += (p / self.dims[i]) * sb;
                sa *= self.dims[i];
                sb *= other.dims[i];
            }
            (a, b)
        };
        let parts: Vec<(usize, usize)> = (0..n).map(split).collect();
        let m = DMatrix::from_fn(n, n, |r, c| {
            let (ar, br) = parts[r];
            let (ac, bc) = parts[c];
            self.entries[(ar, ac)] * other.entries[(br, bc)]
        });
        let mut out = Self::new(dims, m)?;
        if let (Some(f), Some(g)) = (&self.factors, &other.factors) {
            out.factors = Some(f.iter().zip(g).map(|(a, b)| b.kronecker(a)).collect());
        }
        Ok(out)
    }

    /// Full product vector of per-party vectors.
    pub fn product_vector(&self, vecs: &[DVector<f64>]) -> DVector<f64> {
        let mut v = DVector::from_element(1, 1.0);
        for x in vecs {
            v = x.kronecker(&v);
        }
        v
    }

    /// `<v_0 (x) ... | M | v_0 (x) ...>`.
    pub fn value(&self, vecs: &[DVector<f64>]) -> f64 {
        let v = self.product_vector(vecs);
        v.dot(&(&self.entries * &v))
    }

    /// Matrix on party `i` after contracting every other party with `vecs`.
    pub fn effective(&self, i: usize, vecs: &[DVector<f64>]) -> DMatrix<f64> {
        let n = self.dim();
        let di = self.dims[i];
        let mut weight = vec![0.0; n];
        let mut local = vec![0usize; n];
        for (idx, w) in weight.iter_mut().enumerate() {
            let mut r = idx;
            let mut prod = 1.0;
            for (j, d) in self.dims.iter().enumerate() {
                let p = r % d;
                r /= d;
                if j == i {
                    local[idx] = p;
                } else {
                    prod *= vecs[j][p];
                }
            }
            *w = prod;
        }
        let mut e = DMatrix::zeros(di, di);
        for r in 0..n {
            if weight[r] == 0.0 {
                continue;
            }
            for c in 0..n {
                let x = self.entries[(r, c)];
                if x != 0.0 && weight[c] != 0.0 {
                    e[(local[r], local[c])] += x * weight[r] * weight[c];
                }
            }
        }
        e
    }
}

/// The two-qubit matrix `|00><11| + |11><00|`.
pub fn remark_matrix() -> PartitionedMatrix {
    let mut m = DMatrix::zeros(4, 4);
    m[(0, 3)] = 1.0;
    m[(3, 0)] = 1.0;
    PartitionedMatrix::new(vec![2, 2], m).expect("valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsepResult {
    /// Value attained by `vectors`; a lower bound on the separable value.
    pub value: f64,
    /// Grid-resolution estimate of how far the optimum may lie above `value`.
    pub error_estimate: f64,
    pub vectors: Vec<Vec<f64>>,
}

/// Largest eigenvalue and a non-negative eigenvector of a non-negative matrix.
pub fn lambda_max_nonneg(m: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch(n, m.ncols()));
    }
    if m.iter().any(|x| *x < 0.0) {
        return Err(Error::Premise("matrix has a negative entry".into()));
    }
    let shift = m.row_iter().map(|r| r.sum()).fold(0.0, f64::max).max(1e-300);
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let mv = m * &v;
        lambda = v.dot(&mv);
        let resid = (&mv - &v * lambda).norm();
        if resid <= 1e-12 * lambda.abs().max(1.0) {
            return Ok((lambda, v));
        }
        let w = mv + &v * shift;
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        v = w / norm;
    }
    let symmetric = (m - m.transpose()).amax() <= EIG_TOL;
    if !symmetric {
        return Err(Error::NoConvergence(format!("power iteration stalled at {lambda}")));
    }
    let eig = m.clone().symmetric_eigen();
    let (idx, val) = eig.eigenvalues.iter().enumerate().fold((0, f64::MIN), |b, (i, x)| if *x > b.1 { (i, *x) } else { b });
    let mut v: DVector<f64> = eig.eigenvectors.column(idx).map(|x| x.abs());
    v /= v.norm();
    let resid = (m * &v - &v * val).norm();
    if resid > 1e-10 * val.abs().max(1.0) {
        return Err(Error::NoConvergence(format!("residual {resid}")));
    }
    Ok((val, v))
}

fn angle_grid(points: usize) -> Vec<DVector<f64>> {
    (0..points)
        .map(|i| {
            let t = std::f64::consts::FRAC_PI_2 * i as f64 / (points - 1) as f64;
            DVector::from_vec(vec![t.cos(), t.sin()])
        })
        .collect()
}

fn compositions(m: usize, d: usize, out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>) {
    if cur.len() == d - 1 {
        let used: usize = cur.iter().sum();
        let mut c = cur.clone();
        c.push(m - used);
        out.push(c);
        return;
    }
    let used: usize = cur.iter().sum();
    for x in 0..=m - used {
        cur.push(x);
        compositions(m, d, out, cur);
        cur.pop();
    }
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Unit vectors whose squared entries lie on the lattice `{c / m}`.
fn simplex_grid(d: usize, m: usize) -> Vec<DVector<f64>> {
    let mut comps = Vec::new();
    compositions(m, d, &mut comps, &mut Vec::new());
    comps
        .into_iter()
        .map(|c| DVector::from_iterator(d, c.iter().map(|x| (*x as f64 / m as f64).sqrt())))
        .collect()
}

/// Grid for one party and its covering radius in amplitude space.
fn party_grid(d: usize, budget: usize) -> (Vec<DVector<f64>>, f64) {
    match d {
        1 => (vec![DVector::from_element(1, 1.0)], 0.0),
        2 => {
            let pts = 64;
            let h = std::f64::consts::FRAC_PI_2 / (pts - 1) as f64;
            (angle_grid(pts), 2.0 * (h / 4.0).sin())
        }
        _ => {
            let mut m = 40;
            while m > 2 && binom(m + d - 1, d - 1) > budget {
                m -= 1;
            }
            (simplex_grid(d, m), (d as f64 / m as f64).sqrt())
        }
    }
}

/// Fix all parties but `i` and take the Perron vector of the effective matrix.
fn improve(m: &PartitionedMatrix, vecs: &mut [DVector<f64>], i: usize) -> Result<f64> {
    let e = m.effective(i, vecs);
    let (val, v) = lambda_max_nonneg(&e)?;
    vecs[i] = v;
    Ok(val)
}

fn polish(m: &PartitionedMatrix, vecs: &mut [DVector<f64>], iters: usize) -> Result<f64> {
    let mut best = m.value(vecs);
    for _ in 0..iters {
        for i in 0..vecs.len() {
            improve(m, vecs, i)?;
        }
        let v = m.value(vecs);
        if v <= best + 1e-15 {
            best = best.max(v);
            break;
        }
        best = v;
    }
    Ok(best)
}

/// Grid search over all parties but the last, exact Perron step on the last,
/// then alternating polish of the best cells.
pub fn hsep_bruteforce(m: &PartitionedMatrix) -> Result<HsepResult> {
    if m.dim() > BRUTE_DIM_CAP || m.dims.len() > 3 {
        return Err(Error::CapExceeded(format!("dims {:?}", m.dims)));
    }
    if !m.nonneg {
        return Err(Error::Premise("brute force needs an entrywise non-negative matrix".into()));
    }
    let k = m.dims.len();
    let per_party = (GRID_BUDGET as f64).powf(1.0 / (k.max(2) - 1) as f64) as usize;
    let grids: Vec<(Vec<DVector<f64>>, f64)> = m.dims[..k - 1].iter().map(|d| party_grid(*d, per_party)).collect();
    let total: usize = grids.iter().map(|g| g.0.len()).product();
    let cells: Vec<(f64, usize)> = (0..total)
        .into_par_iter()
        .map(|cell| {
            let mut vecs = cell_vectors(&grids, cell, m.dims[k - 1]);
            let e = m.effective(k - 1, &vecs);
            match lambda_max_nonneg(&e) {
                Ok((val, v)) => {
                    vecs[k - 1] = v;
                    (val, cell)
                }
                Err(_) => (f64::MIN, cell),
            }
        })
        .collect();
    let mut order: Vec<(f64, usize)> = cells;
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut best: Option<(f64, Vec<DVector<f64>>)> = None;
    for &(_, cell) in order.iter().take(8) {
        let mut vecs = cell_vectors(&grids, cell, m.dims[k - 1]);
        improve(m, &mut vecs, k - 1)?;
        let val = polish(m, &mut vecs, 500)?;
        if best.as_ref().is_none_or(|b| val > b.0) {
            best = Some((val, vecs));
        }
    }
    let (value, vecs) = best.expect("non-empty grid");
    let radius: f64 = grids.iter().map(|g| g.1).sum();
    Ok(HsepResult {
        value,
        error_estimate: 2.0 * m.operator_norm() * radius,
        vectors: vecs.iter().map(|v| v.iter().copied().collect()).collect(),
    })
}

fn cell_vectors(grids: &[(Vec<DVector<f64>>, f64)], mut cell: usize, last: usize) -> Vec<DVector<f64>> {
    let mut vecs = Vec::with_capacity(grids.len() + 1);
    for g in grids {
        vecs.push(g.0[cell % g.0.len()].clone());
        cell /= g.0.len();
    }
    vecs.push(DVector::from_element(last, 1.0 / (last as f64).sqrt()));
    vecs
}

/// Alternating Perron maximization from the uniform start plus `restarts`
/// random non-negative starts.
pub fn hsep_alternating(m: &PartitionedMatrix, restarts: usize, iters: usize, seed: u64) -> Result<HsepResult> {
    if !m.nonneg {
        return Err(Error::Premise("alternating maximization needs a non-negative matrix".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<Vec<DVector<f64>>> =
        vec![m.dims.iter().map(|d| DVector::from_element(*d, 1.0 / (*d as f64).sqrt())).collect()];
    for _ in 0..restarts {
        starts.push(
            m.dims
                .iter()
                .map(|d| {
                    let v = DVector::from_fn(*d, |_, _| rng.gen::<f64>());
                    let n = v.norm();
                    v / n
                })
                .collect(),
        );
    }
    alternating_from(m, starts, iters)
}

fn alternating_from(m: &PartitionedMatrix, starts: Vec<Vec<DVector<f64>>>, iters: usize) -> Result<HsepResult> {
    let mut best: Option<(f64, Vec<DVector<f64>>)> = None;
    for mut vecs in starts {
        let val = polish(m, &mut vecs, iters)?;
        if best.as_ref().is_none_or(|b| val > b.0) {
            best = Some((val, vecs));
        }
    }
    let (value, vecs) = best.expect("at least one start");
    Ok(HsepResult { value, error_estimate: 0.0, vectors: vecs.iter().map(|v| v.iter().copied().collect()).collect() })
}

/// Brute force when within caps, alternating maximization otherwise.
pub fn hsep(m: &PartitionedMatrix) -> Result<HsepResult> {
    if m.dim() <= BRUTE_DIM_CAP && m.dims.len() <= 3 {
        hsep_bruteforce(m)
    } else {
        hsep_alternating(m, 16, 500, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Compares `hsep(aM + bI)` with `a hsep(M) + b`.
pub fn hsep_shift_check(m: &PartitionedMatrix, a: f64, b: f64) -> Result<ShiftReport> {
    if a < 0.0 || b < 0.0 {
        return Err(Error::Range("shift needs a, b >= 0".into()));
    }
    let lhs = hsep(&m.affine(a, b)?)?.value;
    let rhs = a * hsep(m)?.value + b;
    let tolerance = 1e-6 * (1.0 + rhs.abs());
    Ok(ShiftReport { lhs, rhs, tolerance, holds: (lhs - rhs).abs() <= tolerance })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Equal,
    Excess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicativityReport {
    /// `hsep(M (x) M')`.
    pub lhs: f64,
    /// `hsep(M) hsep(M')`.
    pub rhs: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub both_psd: bool,
    pub both_product: bool,
}

pub fn check_multiplicativity(m: &PartitionedMatrix, m2: &PartitionedMatrix, tolerance: f64) -> Result<MultiplicativityReport> {
    if !m.nonneg || !m2.nonneg {
        return Err(Error::Premise("multiplicativity check needs non-negative matrices".into()));
    }
    let t = m.tensor(m2)?;
    let h1 = hsep(m)?;
    let h2 = hsep(m2)?;
    let rhs = h1.value * h2.value;
    let mut lhs = hsep(&t)?;
    // Product of the two optimizers is always feasible for the tensor.
    let seed: Vec<DVector<f64>> = h1
        .vectors
        .iter()
        .zip(&h2.vectors)
        .map(|(a, b)| DVector::from_vec(b.clone()).kronecker(&DVector::from_vec(a.clone())))
        .collect();
    let seeded = alternating_from(&t, vec![seed], 500)?;
    if seeded.value > lhs.value {
        lhs = seeded;
    }
    let verdict = if lhs.value > rhs + tolerance { Verdict::Excess } else { Verdict::Equal };
    Ok(MultiplicativityReport {
        lhs: lhs.value,
        rhs,
        tolerance,
        verdict,
        both_psd: m.psd && m2.psd,
        both_product: m.factors.is_some() && m2.factors.is_some(),
    })
}

/// Acceptance of a verifier as a quadratic form on its witness register:
/// `A = I/2 + (M + M^T)/4` with `M[x, x'] = 2^-nplus #{u : Gamma(x, 0, u)
/// has clean zeros and witness x'}`. Party `i` is prover `i`.
pub fn acceptance_matrix(v: &StoqVerifier) -> Result<PartitionedMatrix> {
    let l = &v.layout;
    let ww = l.witness_width();
    if ww > 8 || l.nplus > 24 {
        return Err(Error::CapExceeded(format!("acceptance matrix on {ww} witness qubits, {} plus", l.nplus)));
    }
    let gamma = gamma_form(v).compiled();
    let n = 1usize << ww;
    let (wmask, zmask, poff) = (l.witness_mask(), l.zero_mask(), l.plus_offset());
    let rows: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|x| {
            let mut row = vec![0.0; n];
            for u in 0..1u64 << l.nplus {
                let y = gamma.apply(x | u << poff);
                if y & zmask == 0 {
                    row[(y & wmask) as usize] += 1.0;
                }
            }
            row
        })
        .collect();
    let scale = 2f64.powi(-(l.nplus as i32));
    let m = DMatrix::from_fn(n, n, |r, c| {
        let off = 0.25 * scale * (rows[r][c] + rows[c][r]);
        if r == c {
            0.5 + off
        } else {
            off
        }
    });
    PartitionedMatrix::new(vec![1 << l.ell; l.k], m)
}

/// Dense matrix file format, row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dims: Vec<usize>,
    pub entries: Vec<f64>,
}

impl MatrixJson {
    pub fn into_matrix(self) -> Result<PartitionedMatrix> {
        let n: usize = self.dims.iter().product();
        if self.entries.len() != n * n {
            return Err(Error::DimensionMismatch(n * n, self.entries.len()));
        }
        PartitionedMatrix::new(self.dims, DMatrix::from_row_slice(n, n, &self.entries))
    }

    pub fn from_matrix(m: &PartitionedMatrix) -> Self {
        let n = m.dim();
        Self { dims: m.dims.clone(), entries: (0..n * n).map(|i| m.entries[(i / n, i % n)]).collect() }
    }
}
