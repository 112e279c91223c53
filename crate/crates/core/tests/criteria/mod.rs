//! The acceptance criteria, each checked against an oracle written
//! independently of the library code path. Shared by the acceptance test and
//! `stoqlab suite`.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stoqlab_core::cleancc::{exhaustive_soundness, CleanCcInstance};
use stoqlab_core::npcert::{
    birthday_mc, build_protocol5_verifier, honest_distribution, honest_witness, minimize_protocol5_rejection,
    protocol4_acceptance, protocol5_rejection, protocol5_rejects, BadPairs, GapCgInstance, RelationKind, DEFAULT_C,
};
use stoqlab_core::protocols::symmetric::DyadicBranchPlan;
use stoqlab_core::protocols::{
    build_product_test, build_strong_conjunction, build_sym_projector, build_weak_conjunction, eta, product_test_value,
};
use stoqlab_core::rectclosure::{
    certified_no_instance, completeness_log_eps, random_instance, random_yes_instance, rect_closure_test,
    rect_closure_test_recursive, round_bound,
};
use stoqlab_core::scalar::{ratio, Rational};
use stoqlab_core::sepval::{check_multiplicativity, hsep, hsep_bruteforce, remark_matrix, PartitionedMatrix, Verdict};
use stoqlab_core::sosround::{
    bks_round_loop, chain_rule_terms, condition, correlated_oracle, direct_round, entropy_decrement_check,
    hellinger_joint_product, joint_law, marginal, random_nonneg_matrix, MomentOracle,
};
use stoqlab_core::verifier::{build_branch_overlap_verifier, gamma_form};
use stoqlab_core::{Gate, NonNegativeState, ReversibleCircuit, StoqVerifier, VerifierLayout};

pub type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Debug>(r: std::result::Result<T, E>) -> std::result::Result<T, String> {
    r.map_err(|e| format!("{e:?}"))
}

fn random_state(width: usize, rng: &mut ChaCha8Rng, max: i64) -> NonNegativeState<Rational> {
    loop {
        let w: Vec<(u64, Rational)> = (0..1u64 << width).map(|x| (x, ratio(rng.gen_range(0..=max), 1))).collect();
        if let Ok(s) = NonNegativeState::new(width, w) {
            return s;
        }
    }
}

fn random_state_f64(width: usize, rng: &mut ChaCha8Rng) -> NonNegativeState<f64> {
    NonNegativeState::new(width, (0..1u64 << width).map(|x| (x, rng.gen::<f64>()))).unwrap()
}

fn weight(s: &NonNegativeState<Rational>, x: u64) -> Rational {
    s.weight(x).cloned().unwrap_or_else(Rational::zero)
}

// ---------------------------------------------------------------- 1

fn random_psd_nonneg(rng: &mut ChaCha8Rng) -> PartitionedMatrix {
    let b = DMatrix::from_fn(4, 4, |_, _| rng.gen::<f64>());
    let m = b.transpose() * b;
    let n = m.clone().symmetric_eigen().eigenvalues.max();
    PartitionedMatrix::new(vec![2, 2], m / n).unwrap()
}

fn random_product_form(rng: &mut ChaCha8Rng) -> PartitionedMatrix {
    let f = |rng: &mut ChaCha8Rng| {
        let a = DMatrix::from_fn(2, 2, |_, _| rng.gen::<f64>());
        (&a + a.transpose()) * 0.5
    };
    PartitionedMatrix::product_form(vec![f(rng), f(rng)]).unwrap()
}

fn criterion_1() -> Check {
    let m = remark_matrix();
    let h = ok(hsep_bruteforce(&m))?;
    ensure!((h.value - 0.5).abs() <= 1e-6, "hsep(M) = {}", h.value);
    // independent oracle: M(x (x) y) = 2 x0 y0 x1 y1 <= 1/2 by AM-GM, attained at the uniform vectors
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let direct = 2.0 * s * s * s * s;
    ensure!((direct - 0.5).abs() < 1e-15, "oracle {direct}");
    let mm = ok(m.tensor(&m))?;
    let h2 = ok(hsep(&mm))?;
    ensure!(h2.value >= 0.5 - 1e-6 && h2.value > h.value * h.value + 0.2, "hsep(M (x) M) = {}", h2.value);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (a, b) = if i < 50 {
            (random_psd_nonneg(&mut rng), random_psd_nonneg(&mut rng))
        } else {
            (random_product_form(&mut rng), random_product_form(&mut rng))
        };
        let r = ok(check_multiplicativity(&a, &b, 1e-4))?;
        ensure!(r.verdict == Verdict::Equal, "pair {i}: lhs {} rhs {}", r.lhs, r.rhs);
        ensure!(r.lhs >= r.rhs - 1e-4, "pair {i}: lhs {} below rhs {}", r.lhs, r.rhs);
        worst = worst.max((r.lhs - r.rhs).abs());
    }
    Ok(format!("hsep(M) = {:.7}, hsep(M(x)M) = {:.7}, max |lhs - rhs| over 100 pairs = {worst:.2e}", h.value, h2.value))
}

// ---------------------------------------------------------------- 2

fn random_verifier(rng: &mut ChaCha8Rng) -> StoqVerifier {
    loop {
        let k = rng.gen_range(1..=2);
        let ell = rng.gen_range(1..=2);
        let n0 = rng.gen_range(0..=2);
        let nplus = rng.gen_range(0..=2);
        let width = k * ell + n0 + nplus;
        if !(3..=10).contains(&width) {
            continue;
        }
        let layout = VerifierLayout { k, ell, n0, nplus, output: rng.gen_range(0..width) };
        let gates = (0..rng.gen_range(1..12))
            .map(|_| {
                let mut q: Vec<usize> = (0..width).collect();
                for i in 0..3 {
                    let j = rng.gen_range(i..width);
                    q.swap(i, j);
                }
                match rng.gen_range(0..3) {
                    0 => Gate::X(q[0]),
                    1 => Gate::Cnot(q[0], q[1]),
                    _ => Gate::Ccx(q[0], q[1], q[2]),
                }
            })
            .collect();
        return StoqVerifier::new(ReversibleCircuit::new(width, gates).unwrap(), layout).unwrap();
    }
}

/// Forward simulation on unnormalized weights, then the Hadamard-basis output
/// statistic `1/2 + 1/2 <phi| X_O |phi>`.
fn dense_acceptance(v: &StoqVerifier, w: &NonNegativeState<Rational>) -> Rational {
    let l = v.layout;
    let poff = l.plus_offset();
    let mut phi: HashMap<u64, Rational> = HashMap::new();
    for (x, m) in w.weights() {
        for u in 0..1u64 << l.nplus {
            phi.insert(v.circuit.apply(x | u << poff), m.clone());
        }
    }
    let flip = 1u64 << l.output;
    let mut acc = Rational::zero();
    for (y, m) in &phi {
        if let Some(m2) = phi.get(&(y ^ flip)) {
            acc += m * m2;
        }
    }
    let z = w.norm2().clone() * Rational::from_integer((1u64 << l.nplus).into());
    ratio(1, 2) + ratio(1, 2) * acc / z
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..50 {
        let v = random_verifier(&mut rng);
        let w = random_state(v.layout.witness_width(), &mut rng, 3);
        let direct = dense_acceptance(&v, &w);
        let a = ok(v.acceptance(&w))?;
        let bo = ok(build_branch_overlap_verifier(&gamma_form(&v), &ReversibleCircuit::identity(v.layout.width()), &v.layout))?;
        let b = ok(bo.acceptance(&w))?;
        ensure!(a == direct && b == direct, "verifier {i}: V {a}, branch-overlap {b}, oracle {direct}");
    }
    Ok("50 random verifiers, width <= 10: V, branch-overlap verifier and forward simulation agree exactly".into())
}

// ---------------------------------------------------------------- 3

/// `Tr(rho_S sigma_S)` by explicit reduced density matrices on the qubits of
/// `mask`.
fn reduced_trace(psi: &NonNegativeState<Rational>, phi: &NonNegativeState<Rational>, width: usize, mask: u64) -> Rational {
    let all = (1u64 << width) - 1;
    let subs: Vec<u64> = (0..=all).filter(|x| x & !mask == 0).collect();
    let envs: Vec<u64> = (0..=all).filter(|x| x & mask == 0).collect();
    let reduced = |s: &NonNegativeState<Rational>| -> HashMap<(u64, u64), Rational> {
        let mut out = HashMap::new();
        for a in &subs {
            for a2 in &subs {
                let v = envs.iter().fold(Rational::zero(), |acc, b| acc + weight(s, a | b) * weight(s, a2 | b));
                out.insert((*a, *a2), v / s.norm2().clone());
            }
        }
        out
    };
    let (r, s) = (reduced(psi), reduced(phi));
    subs.iter().flat_map(|a| subs.iter().map(move |a2| (*a, *a2))).fold(Rational::zero(), |acc, (a, a2)| acc + r[&(a, a2)].clone() * s[&(a2, a)].clone())
}

fn criterion_3() -> Check {
    let v = ok(build_product_test(2, 1))?;
    let grid: Vec<NonNegativeState<Rational>> = (1..81u64)
        .filter(|c| c % 2 == 0 || c % 5 == 1)
        .map(|c| NonNegativeState::new(2, (0..4u64).map(|x| (x, ratio((c / 3u64.pow(x as u32) % 3) as i64, 1)))).unwrap())
        .collect();
    let mut pairs = 0;
    for psi in &grid {
        for phi in grid.iter().step_by(3) {
            let oracle = (0..4u64).fold(Rational::zero(), |acc, s| {
                let mask = (s & 1) | (s & 2);
                acc + reduced_trace(psi, phi, 2, mask)
            }) / ratio(4, 1);
            let lib = ok(product_test_value(psi, phi, 2, 1))?;
            let circ = ok(v.acceptance(&psi.tensor(phi).unwrap()))?;
            ensure!(lib == oracle, "P_prod {lib} vs oracle {oracle}");
            ensure!(circ == ratio(1, 2) + ratio(1, 2) * oracle.clone(), "circuit {circ} vs 1/2 + 1/2 {oracle}");
            pairs += 1;
        }
    }
    let bell = NonNegativeState::<Rational>::subset(2, [0, 3]).unwrap();
    let b = ok(v.acceptance(&bell.tensor(&bell).unwrap()))?;
    ensure!(b == ratio(7, 8), "Bell accepted with {b}");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut slack = f64::MAX;
    for i in 0..100 {
        let (k, ell) = if i % 2 == 0 { (2, 1) } else { (3, 1) };
        let rho = random_state_f64(k * ell, &mut rng);
        let p = ok(product_test_value(&rho, &rho, k, ell))?;
        let e = ok(eta(&rho, k, ell, 8, i))?.eta;
        ensure!(p <= 1.0 - e / 3.0 + 1e-12, "state {i}: P_prod {p} > 1 - eta/3 = {}", 1.0 - e / 3.0);
        slack = slack.min(1.0 - e / 3.0 - p);
    }
    Ok(format!("{pairs} grid pairs exact, Bell = 7/8, 100 random states satisfy P_prod <= 1 - eta/3 (min slack {slack:.3e})"))
}

// ---------------------------------------------------------------- 4

fn all_perms(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in all_perms(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn sym_oracle(phi: &NonNegativeState<Rational>, k: usize, ell: usize) -> Rational {
    let perms = all_perms(k);
    let mask = (1u64 << ell) - 1;
    let mut acc = Rational::zero();
    for p in &perms {
        for (x, w) in phi.weights() {
            let y = (0..k).fold(0u64, |y, i| y | (x >> (i * ell) & mask) << (p[i] * ell));
            acc += w * weight(phi, y);
        }
    }
    acc / (phi.norm2().clone() * Rational::from_integer((perms.len() as u64).into()))
}

fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for k in [2usize, 3] {
        for b in [0u32, 1, 2] {
            let v = ok(build_sym_projector(k, 1, b))?;
            let plan = ok(DyadicBranchPlan::new(k, b))?;
            for _ in 0..5 {
                let one = random_state(1, &mut rng, 4);
                let power = NonNegativeState::tensor_all(&vec![one; k]).unwrap();
                let a = ok(v.acceptance(&power))?;
                ensure!(a == Rational::one(), "k={k} b={b}: tensor power accepted with {a}");
            }
            for _ in 0..100 {
                let phi = random_state(k, &mut rng, 3);
                let a = ok(v.acceptance(&phi))?;
                let target = ratio(1, 2) + ratio(1, 2) * sym_oracle(&phi, k, 1);
                let dev = (a - target).abs();
                let dev = stoqlab_core::Scalar::to_f64(&dev);
                ensure!(dev <= plan.zeta + 1e-15, "k={k} b={b}: deviation {dev} > zeta {}", plan.zeta);
                worst = worst.max(dev);
            }
        }
    }
    Ok(format!("tensor powers accepted exactly; max deviation {worst:.4} within zeta on 600 inputs"))
}

// ---------------------------------------------------------------- 5

/// Pairwise definition of the two-sample rejection: average over the
/// selector of the rejection indicator.
fn protocol5_oracle(inst: &GapCgInstance, labeling: &[usize]) -> Rational {
    let n = inst.n();
    let pts: Vec<(usize, usize)> = labeling.iter().enumerate().map(|(v, a)| (v, *a)).collect();
    let mut hits = 0u64;
    for x in &pts {
        for y in &pts {
            hits += protocol5_rejects(inst, false, *x, *y) as u64 + protocol5_rejects(inst, true, *x, *y) as u64;
        }
    }
    Rational::new(hits.into(), (2 * n * n).into())
}

fn criterion_5() -> Check {
    let cases = [
        (GapCgInstance::path(2, 2, RelationKind::Equality).unwrap(), vec![1, 1]),
        (GapCgInstance::cycle(3, 2, RelationKind::Equality, 0.0).unwrap(), vec![0, 0, 0]),
        (GapCgInstance::cycle(4, 2, RelationKind::Disequality, 0.0).unwrap(), vec![0, 1, 0, 1]),
    ];
    for (inst, lab) in &cases {
        let n = inst.n();
        let p = ok(honest_distribution::<Rational>(inst, lab))?;
        let rej = ok(protocol5_rejection(inst, &p))?;
        let expect = ratio(1, 2 * n as i64);
        ensure!(rej == expect, "n={n}: rejection {rej}");
        ensure!(protocol5_oracle(inst, lab) == expect, "n={n}: pairwise oracle disagrees");
        let v = ok(build_protocol5_verifier(inst))?;
        let w = ok(honest_witness::<Rational>(inst, lab))?;
        let acc = ok(v.acceptance(&w.tensor(&w).unwrap()))?;
        ensure!(acc == Rational::one() - expect.clone() / ratio(2, 1), "n={n}: circuit acceptance {acc}");
    }
    let tri = GapCgInstance::cycle(3, 2, RelationKind::Disequality, 1.0 / 3.0).unwrap();
    ensure!(ok(tri.min_violation())? > 0.0, "triangle is satisfiable");
    let r = ok(minimize_protocol5_rejection(&tri, 200_000, 16, 5))?;
    let exact = r.exact.ok_or("no exact minimum")?;
    let need = 1.0 / 6.0 + 0.01 / 3.0;
    ensure!(exact >= need, "minimum {exact} < {need}");
    ensure!(r.grid_value >= exact - 1e-12 && r.value >= exact - 1e-12, "search value below the exact minimum");
    ensure!(r.grid_value - exact < 1e-2, "grid {} far from exact {exact}", r.grid_value);
    Ok(format!(
        "honest rejection = 1/(2n) exactly for n = 2, 3, 4; unsat triangle minimum {} = {exact:.6} >= {need:.6} (grid {:.6})",
        r.exact_rational.unwrap_or_default(),
        r.grid_value
    ))
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Check {
    let n = 400;
    let k = (DEFAULT_C * (n as f64).sqrt()).ceil() as usize;
    let delta = 0.5;
    let inst = ok(GapCgInstance::cycle(n, 2, RelationKind::Disequality, 0.0))?;
    let lab: Vec<usize> = (0..n).map(|v| v % 2).collect();
    let honest = ok(honest_distribution::<f64>(&inst, &lab))?;
    let h = ok(protocol4_acceptance(&inst, &honest, k, delta, 10_000, 6))?;
    ensure!(!h.exact && h.value >= 0.9 && h.ci_low >= 0.9, "honest acceptance {} (CI {}..{})", h.value, h.ci_low, h.ci_high);
    let far = ok(stoqlab_core::Distribution::new((0..n / 2).map(|v| (inst.encode(v, lab[v]), 2.0 / n as f64))))?;
    let f = ok(protocol4_acceptance(&inst, &far, k, delta, 10_000, 7))?;
    ensure!(f.value <= 0.1 && f.ci_high <= 0.1, "far acceptance {} (CI {}..{})", f.value, f.ci_low, f.ci_high);
    // collision count mean under the honest marginal, from K samples, equals K(K-1)/(2n)
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let trials = 2000;
    let mut total = 0u64;
    for _ in 0..trials {
        let xs: Vec<usize> = (0..k).map(|_| rng.gen_range(0..n)).collect();
        total += stoqlab_core::npcert::collision_pairs(&xs);
    }
    let mean = total as f64 / trials as f64;
    let expect = (k * (k - 1)) as f64 / (2.0 * n as f64);
    ensure!((mean - expect).abs() < 0.05 * expect, "collision mean {mean} vs {expect}");
    Ok(format!(
        "K = {k}: honest {:.4} [{:.4}, {:.4}], far {:.4} [{:.4}, {:.4}] over 10^4 branches",
        h.value, h.ci_low, h.ci_high, f.value, f.ci_low, f.ci_high
    ))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Check {
    let oracle = 1.0 - (0..23).map(|i| (365.0 - i as f64) / 365.0).product::<f64>();
    ensure!((oracle - 0.5073).abs() < 5e-5, "product oracle {oracle}");
    let mu = stoqlab_core::Distribution::<f64>::uniform(365);
    let r = ok(birthday_mc(&mu, &BadPairs::Equality, None, 23, 100_000, 7))?;
    ensure!((r.value - oracle).abs() <= 0.01, "estimate {} vs {oracle}", r.value);
    ensure!(r.ci_low <= oracle && oracle <= r.ci_high, "oracle outside CI [{}, {}]", r.ci_low, r.ci_high);
    Ok(format!("estimate {:.4} vs exact {oracle:.4}", r.value))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Check {
    let mut accepted = 0;
    for ell in 1..=3 {
        for s in 0..4 {
            let y = ok(random_yes_instance(ell, 1, 8, 100 * ell as u64 + s))?;
            ensure!(y.instance.is_closed_rectangle(&y.s, &y.t), "constructor rectangle not closed");
            let r = ok(rect_closure_test(&y.instance, 0.5, None, false))?;
            ensure!(r.accept, "yes instance ell={ell} seed={s} rejected");
            accepted += 1;
        }
    }
    let mut rejected = 0;
    let mut min_growth = f64::MAX;
    for s in 0..5 {
        let (inst, g) = ok(certified_no_instance(2, 1, 1, 0.05, s))?;
        // the certificate bounds every product value; the grid optimum must sit below it
        let h = ok(hsep_bruteforce(&ok(inst.value_matrix())?))?;
        ensure!(h.value <= 1.0 - g + 1e-9, "hsep {} above certified 1 - gamma = {}", h.value, 1.0 - g);
        let r = ok(rect_closure_test(&inst, g, None, false))?;
        ensure!(!r.accept, "certified no instance {s} accepted");
        for log in &r.seeds {
            let bad = log.bad_round.ok_or("seed without a bad round")?;
            ensure!(bad < r.rounds, "bad round {bad} not before L = {}", r.rounds);
            for w in log.sizes.windows(2) {
                let ratio = (w[1].0 * w[1].1) as f64 / (w[0].0 * w[0].1) as f64;
                ensure!(ratio >= 1.0 + g - 1e-12, "growth {ratio} < 1 + {g}");
                min_growth = min_growth.min(ratio / (1.0 + g));
            }
        }
        rejected += 1;
    }
    for i in 0..20u64 {
        let inst = if i % 2 == 0 { ok(random_yes_instance(2, 1, 6, 500 + i))?.instance } else { ok(random_instance(2, 1, 1, 3 + i as usize % 5, 900 + i))? };
        let a = ok(rect_closure_test(&inst, 0.5, Some(4), false))?;
        let b = ok(rect_closure_test_recursive(&inst, 0.5, Some(4)))?;
        ensure!(a.accept == b.accept && a.seed == b.seed, "instance {i}: table {:?} vs recursive {:?}", a.seed, b.seed);
    }
    ensure!(ok(round_bound(2, 0.5))? == 10, "L(2, 0.5)");
    ensure!(completeness_log_eps(1, 0, 1) == -15.0, "log2 eps(1, 0, 1)");
    let independent = ((4.0 * 2f64.ln() + 1.0) / 1.5f64.ln()).ceil();
    ensure!(independent == 10.0, "independent L {independent}");
    Ok(format!(
        "{accepted} yes instances accept, {rejected} certified no instances reject (growth margin {min_growth:.3}), 20 table/recursive agreements, L = 10, log2 eps = -15"
    ))
}

// ---------------------------------------------------------------- 9

/// Dense evaluation of `<Omega| Gamma |Omega>` over `(j, v, c = 0)`.
fn cleancc_oracle(c: &CleanCcInstance, w: &NonNegativeState<Rational>) -> Rational {
    let jj = c.big_j();
    let mut acc = Rational::zero();
    for j in 0..jj {
        for v in 0..c.vertices() {
            let (_, v2, c2) = c.gamma(j, v, false);
            if !c2 {
                acc += weight(w, v as u64) * weight(w, v2 as u64);
            }
        }
    }
    ratio(1, 2) + ratio(1, 2) * acc / (w.norm2().clone() * Rational::from_integer((jj as u64).into()))
}

fn random_cleancc(n: usize, dg: usize, rng: &mut ChaCha8Rng) -> CleanCcInstance {
    let nv = 1usize << n;
    let mut deg = vec![0; nv];
    let mut edges = Vec::new();
    for u in 0..nv {
        for v in u + 1..nv {
            if deg[u] < dg && deg[v] < dg && rng.gen_bool(0.5) {
                deg[u] += 1;
                deg[v] += 1;
                edges.push((u, v));
            }
        }
    }
    let marked = (0..nv).map(|_| rng.gen_bool(0.3)).collect();
    CleanCcInstance::from_edges(n, dg, &edges, marked).unwrap()
}

fn criterion_9() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut yes = 0;
    while yes < 20 {
        let c = random_cleancc(rng.gen_range(1..=3), rng.gen_range(1..=3), &mut rng);
        let Some(h) = c.clean_component() else { continue };
        let w = NonNegativeState::<Rational>::subset(c.n(), h.iter().map(|v| *v as u64)).unwrap();
        ensure!(ok(c.acceptance(&w))? == Rational::one(), "clean component witness not accepted with 1");
        ensure!(cleancc_oracle(&c, &w) == Rational::one(), "oracle disagrees on yes instance");
        ensure!((c.max_acceptance().0 - 1.0).abs() < 1e-12, "max acceptance {}", c.max_acceptance().0);
        yes += 1;
    }
    let mut lines = Vec::new();
    for n in 1..=3 {
        for dg in 1..=2 {
            let r = ok(exhaustive_soundness(n, dg))?;
            ensure!(r.holds, "n={n} dG={dg}: worst {} > bound {}", r.worst, r.bound);
            lines.push(format!("n={n},dG={dg}:{}", r.instances));
        }
    }
    let k2 = ok(CleanCcInstance::from_edges(1, 1, &[(0, 1)], vec![true, false]))?;
    let expect = 0.5 + 0.5 * (1.0 + 5f64.sqrt()) / 4.0;
    ensure!((k2.max_acceptance().0 - expect).abs() <= 1e-10, "K2 value {}", k2.max_acceptance().0);
    let mut compared = 0;
    for _ in 0..30 {
        let c = random_cleancc(rng.gen_range(1..=3), rng.gen_range(1..=2), &mut rng);
        let v = ok(c.build_verifier())?;
        ensure!(c.gamma_is_involution(), "branch map not an involution");
        for _ in 0..3 {
            let w = random_state(c.n(), &mut rng, 3);
            let f = ok(c.acceptance(&w))?;
            let circ = ok(v.acceptance(&w))?;
            ensure!(f == circ && f == cleancc_oracle(&c, &w), "formula {f} vs circuit {circ}");
            compared += 1;
        }
    }
    Ok(format!("20 yes instances = 1, exhaustive no instances ({}) within bound, K2 matches, {compared} formula/circuit comparisons exact", lines.join(" ")))
}

// ---------------------------------------------------------------- 10

fn near_product_oracle(d: usize, t: usize, spread: f64, rng: &mut ChaCha8Rng) -> MomentOracle {
    let base: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() + 0.1).collect();
    let comps = (0..3)
        .map(|_| {
            let v: Vec<f64> = base.iter().map(|b| b + spread * rng.gen_range(-1.0..1.0)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            (rng.gen_range(0.2..1.0), v.into_iter().map(|x| x / n).collect())
        })
        .collect();
    MomentOracle::new(d, t, comps).unwrap()
}

fn tensor_value_oracle(m: &PartitionedMatrix, x: &[f64], t: usize) -> f64 {
    let d = x.len();
    let n = d.pow(t as u32);
    let amp = |mut a: usize| {
        let mut p = 1.0;
        for _ in 0..t {
            p *= x[a % d];
            a /= d;
        }
        p
    };
    let e = m.entries();
    (0..n).map(|a| (0..n).map(|b| e[(a, b)] * amp(a) * amp(b)).sum::<f64>()).sum()
}

fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|x| **x > 0.0).map(|x| x * x.log2()).sum::<f64>()
}

fn criterion_10() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut min_margin = f64::MAX;
    for i in 0..100 {
        let d = 2 + i % 3;
        let t = 2 + (i / 3) % 2;
        let o = near_product_oracle(d, t, 0.15, &mut rng);
        let m = ok(random_nonneg_matrix(d, t, &mut rng))?;
        let delta = ok(hellinger_joint_product(&o, t))?;
        let x = direct_round(&o);
        let value = tensor_value_oracle(&m, &x, t);
        let pseudo: f64 = o.components.iter().map(|c| c.w * tensor_value_oracle(&m, &c.v, t)).sum();
        ensure!(value >= pseudo - 2.0 * 2f64.sqrt() * delta - 1e-12, "pair {i}: M(x*) = {value} < {pseudo} - 2 sqrt2 {delta}");
        min_margin = min_margin.min(value - pseudo + 2.0 * 2f64.sqrt() * delta);
    }
    let mut checked = 0;
    for t in [2usize, 3] {
        for d in 2..=4 {
            for s in 0..3 {
                let o = ok(correlated_oracle(d, t, 0.25, 40 * d as u64 + s))?;
                let h = ok(hellinger_joint_product(&o, t))?;
                let eps = 0.99 * h;
                let r = ok(entropy_decrement_check(&o, t, eps))?;
                // conditional entropy as the average entropy of the conditioned marginals
                let prefix = ok(joint_law(&o, t - 1))?;
                let mut cond = 0.0;
                for (alpha, p) in prefix.probs() {
                    let pins: Vec<usize> = (0..t - 1).map(|r| (*alpha as usize / d.pow(r as u32)) % d).collect();
                    let c = ok(condition(&o, &pins))?;
                    let mg = marginal(&c);
                    cond += p * entropy_bits(&(0..d).map(|i| mg.prob(i as u64)).collect::<Vec<_>>());
                }
                ensure!((cond - r.conditional_entropy).abs() < 1e-9, "conditional entropy {cond} vs {}", r.conditional_entropy);
                let bound = r.entropy - 2.0 * eps * eps / t as f64;
                ensure!(cond <= bound + 1e-12, "t={t} d={d}: H(A_t|prefix) = {cond} > {bound}");
                ensure!(r.pinned_entropy <= bound + 1e-12, "pinned tuple misses the bound");
                let (kl, terms) = ok(chain_rule_terms(&o, t))?;
                // KL from the dense joint law against the product of marginals
                let joint = ok(joint_law(&o, t))?;
                let mg = marginal(&o);
                let direct: f64 = joint
                    .probs()
                    .iter()
                    .map(|(a, p)| {
                        let q: f64 = (0..t).map(|r| mg.prob(((*a as usize / d.pow(r as u32)) % d) as u64)).product();
                        p * (p / q).log2()
                    })
                    .sum();
                ensure!((kl - direct).abs() < 1e-10, "KL {kl} vs {direct}");
                ensure!((kl - terms.iter().sum::<f64>()).abs() < 1e-10, "chain rule {kl} vs {:?}", terms);
                checked += 1;
            }
        }
    }
    let half = MomentOracle::new(2, 2, vec![(0.5, vec![1.0, 0.0]), (0.5, vec![0.0, 1.0])]).unwrap();
    let h = ok(hellinger_joint_product(&half, 2))?;
    ensure!((h * h - (1.0 - std::f64::consts::FRAC_1_SQRT_2)).abs() < 1e-12, "Hellinger^2 {}", h * h);
    let r = ok(entropy_decrement_check(&half, 2, 0.54))?;
    ensure!((r.entropy - r.conditional_entropy - 1.0).abs() < 1e-12, "decrement {}", r.entropy - r.conditional_entropy);
    let id = PartitionedMatrix::new(vec![2, 2], DMatrix::identity(4, 4)).unwrap();
    let l = ok(bks_round_loop(&id, &half, 0.5))?;
    ensure!(l.trace.len() == 1 && (l.value - 1.0).abs() < 1e-12, "loop trace {:?}", l.trace);
    Ok(format!("100 direct-rounding pairs (min margin {min_margin:.3e}), {checked} decrement and chain-rule cases, worked example exact"))
}

// ---------------------------------------------------------------- 11

/// One prover bit; `Gamma` fixes witness 0 and maps witness 1 outside the
/// clean sector with probability `1 - 2^-m * (selector values kept)`.
fn toy_verifier(keep: u64, bits: usize) -> StoqVerifier {
    let mut b = stoqlab_core::Builder::new(1, 1);
    let w = b.prover(0)[0];
    let sel = b.pluses(bits);
    let flag = b.zero();
    let mut inputs = vec![w];
    inputs.extend(&sel);
    let gamma = b.xor_function(&inputs, &[flag], |x| ((x & 1 == 1) && (x >> 1) >= keep) as u64);
    b.finish_gamma(&gamma).unwrap()
}

fn criterion_11() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cases = 0;
    for _ in 0..6 {
        let count = rng.gen_range(2..=3);
        let keeps: Vec<u64> = (0..count).map(|_| rng.gen_range(0..=4)).collect();
        let vs: Vec<StoqVerifier> = keeps.iter().map(|k| toy_verifier(*k, 2)).collect();
        let ws: Vec<NonNegativeState<Rational>> = (0..count).map(|_| random_state(1, &mut rng, 3)).collect();
        // <Gamma_j> by hand: weight on 0 is fixed; weight on 1 survives on keep/4 of the selector
        let a: Vec<Rational> = keeps
            .iter()
            .zip(&ws)
            .map(|(k, w)| {
                let (m0, m1) = (weight(w, 0), weight(w, 1));
                (m0.clone() * m0 + m1.clone() * m1 * ratio(*k as i64, 4)) / w.norm2().clone()
            })
            .collect();
        for (v, (w, aj)) in vs.iter().zip(ws.iter().zip(&a)) {
            ensure!(ok(v.acceptance(w))? == ratio(1, 2) + ratio(1, 2) * aj.clone(), "toy verifier value");
        }
        let witness = NonNegativeState::tensor_all(&ws).unwrap();
        let weak = ok(ok(build_weak_conjunction(&vs))?.acceptance(&witness))?;
        let strong = ok(ok(build_strong_conjunction(&vs))?.acceptance(&witness))?;
        let pw = a.iter().fold(Rational::one(), |p, x| p * (ratio(1, 2) + x.clone() / ratio(2, 1)));
        let ps = a.iter().fold(Rational::one(), |p, x| p * x.clone());
        ensure!(weak == ratio(1, 2) + ratio(1, 2) * pw.clone(), "weak {weak} vs {pw}");
        ensure!(strong == ratio(1, 2) + ratio(1, 2) * ps.clone(), "strong {strong} vs {ps}");
        cases += 1;
    }
    Ok(format!("{cases} product-witness cases exact for both conjunctions"))
}

pub struct Criterion {
    pub name: &'static str,
    pub run: fn() -> Check,
    pub budget: Duration,
}

pub const CRITERIA: [Criterion; 11] = [
    Criterion { name: "1 multiplicativity", run: criterion_1, budget: Duration::from_secs(30) },
    Criterion { name: "2 branch-overlap equivalence", run: criterion_2, budget: Duration::from_secs(20) },
    Criterion { name: "3 product test", run: criterion_3, budget: Duration::from_secs(120) },
    Criterion { name: "4 dyadic symmetric projector", run: criterion_4, budget: Duration::from_secs(120) },
    Criterion { name: "5 two-sample protocol exact values", run: criterion_5, budget: Duration::from_secs(120) },
    Criterion { name: "6 uniformity protocol statistics", run: criterion_6, budget: Duration::from_secs(120) },
    Criterion { name: "7 birthday paradox", run: criterion_7, budget: Duration::from_secs(120) },
    Criterion { name: "8 rectangular closure", run: criterion_8, budget: Duration::from_secs(120) },
    Criterion { name: "9 clean connected component", run: criterion_9, budget: Duration::from_secs(120) },
    Criterion { name: "10 sum-of-squares rounding", run: criterion_10, budget: Duration::from_secs(120) },
    Criterion { name: "11 conjunction laws", run: criterion_11, budget: Duration::from_secs(120) },
];

/// Filter by criterion number or by a substring of the name.
pub fn selected(c: &Criterion, only: Option<&str>) -> bool {
    match only {
        None => true,
        Some(o) => c.name.split(' ').next() == Some(o) || c.name.contains(o),
    }
}

pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

/// Runs one criterion, turning panics and budget overruns into failures.
pub fn run(c: &Criterion) -> Outcome {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let elapsed = start.elapsed();
    let result = match result {
        Ok(msg) if elapsed > c.budget => Err(format!("{msg}; runtime {elapsed:.1?} over budget {:?}", c.budget)),
        r => r,
    };
    let (passed, detail) = match result {
        Ok(m) => (true, m),
        Err(m) => (false, m),
    };
    Outcome { name: c.name, passed, detail, elapsed }
}
