use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use num_rational::BigRational;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use stoqlab_core::cleancc::{exhaustive_soundness, soundness_bound, CleanCcInstance};
use stoqlab_core::npcert::{
    birthday_exact_uniform, birthday_mc, build_protocol5_verifier, minimize_protocol5_rejection,
    protocol4_acceptance, protocol5_rejection, BadPairs, GapCgInstance, GapCgJson, DEFAULT_C,
};
use stoqlab_core::protocols::compression::DEFAULT_C_PROD;
use stoqlab_core::protocols::{
    build_length_efficient_symmetrization, build_product_test, build_prover_compression, build_strong_conjunction,
    build_sym_to_stoq, build_weak_conjunction, eta, product_test_value, repetition_count, CompressionParams,
    SymToStoqParams, SymmetrizationPlan,
};
use stoqlab_core::rectclosure::{rect_closure_test, rect_closure_test_recursive, SepRcdInstance, MAX_ELL};
use stoqlab_core::revsim::{format_bits, parse_bits};
use stoqlab_core::sepval::{check_multiplicativity, hsep, hsep_alternating, hsep_bruteforce, MatrixJson, Verdict as MultVerdict};
use stoqlab_core::sosround::{bks_round_loop, hellinger_joint_product, MomentOracle};
use stoqlab_core::states::StateJson;
use stoqlab_core::{Distribution, NonNegativeState, Rational, ReversibleCircuit, Scalar, StoqVerifier, Thresholds};

use crate::report::{emit, Report, Verdict};
use crate::{criteria, Cli, Command, Global, Mode};

pub fn run(cli: &Cli) -> Result<i32> {
    let g = &cli.global;
    if let Some(n) = g.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("worker pool")?;
    }
    let report = match &cli.command {
        Command::Circuit(a) => circuit(a)?,
        Command::Verify(a) => verify(a, g)?,
        Command::Sepval(a) => sepval(a, g)?,
        Command::MultCheck(a) => mult_check(a)?,
        Command::ProductTest(a) => product_test(a, g)?,
        Command::Symmetrize(a) => symmetrize(a)?,
        Command::Compress(a) => compress(a)?,
        Command::Repeat(a) => repeat(a)?,
        Command::Np4(a) => np4(a, g)?,
        Command::Np5(a) => np5(a, g)?,
        Command::Birthday(a) => birthday(a, g)?,
        Command::RectClosure(a) => rect_closure(a)?,
        Command::SosRound(a) => sos_round(a)?,
        Command::Cleancc(a) => cleancc(a, g)?,
        Command::Suite(a) => suite(a)?,
    };
    let json = report.to_json(g.seed, g.mode.as_str());
    emit(&json, g.out.as_deref())?;
    if let Some(p) = &g.csv {
        report.write_csv(p)?;
    }
    Ok(report.verdict.exit_code())
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))
}

fn save(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn need_seed(g: &Global) -> Result<u64> {
    g.seed.ok_or_else(|| anyhow!("this subcommand samples at random; pass --seed"))
}

fn unit(name: &str, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        bail!("{name} = {x} outside [0, 1]");
    }
    Ok(x)
}

/// Float witness, or exact weights when the file lists a subset or the mode
/// asks for rationals (amplitudes are then taken as exact binary fractions).
fn load_state(path: &Path) -> Result<(StateJson, NonNegativeState<f64>)> {
    let j: StateJson = load(path)?;
    let s = j.clone().into_state().with_context(|| format!("invalid state in {}", path.display()))?;
    Ok((j, s))
}

fn rational_state(j: &StateJson) -> Result<NonNegativeState<Rational>> {
    Ok(match j {
        StateJson::Subset { width, subset } => {
            NonNegativeState::subset(*width, subset.iter().map(|s| parse_bits(s)).collect::<stoqlab_core::Result<Vec<_>>>()?)?
        }
        StateJson::Amplitudes { width, amplitudes } => {
            let mut w = Vec::new();
            for (k, a) in amplitudes {
                let r = BigRational::from_float(*a).ok_or_else(|| anyhow!("amplitude {a} is not finite"))?;
                w.push((parse_bits(k)?, r));
            }
            NonNegativeState::new(*width, w)?
        }
    })
}

fn value_json(v: &Rational) -> Value {
    json!({ "exact": v.to_string(), "value": v.to_f64() })
}

// ------------------------------------------------------------ circuit

#[derive(Args)]
pub struct CircuitArgs {
    #[arg(long)]
    pub circuit: PathBuf,
    /// Input bit strings, qubit 0 leftmost.
    #[arg(long)]
    pub input: Vec<String>,
    /// Include the full truth table.
    #[arg(long)]
    pub table: bool,
}

fn circuit(a: &CircuitArgs) -> Result<Report> {
    let c: ReversibleCircuit = load(&a.circuit)?;
    let outputs: Vec<Value> =
        a.input.iter().map(|s| c.apply_bits(s).map(|o| json!({"input": s, "output": o}))).collect::<stoqlab_core::Result<_>>()?;
    let table = if a.table {
        let t = c.truth_table().ok_or_else(|| anyhow!("width {} too large for a truth table", c.width))?;
        Some(t.iter().enumerate().map(|(x, y)| (format_bits(x as u64, c.width), format_bits(*y, c.width))).collect::<Vec<_>>())
    } else {
        None
    };
    Ok(Report::new(
        "circuit",
        Verdict::Ok,
        json!({
            "width": c.width,
            "gates": c.len(),
            "has_toffoli": c.has_toffoli(),
            "bijective": c.is_bijective(),
            "outputs": outputs,
            "truth_table": table,
        }),
    ))
}

// ------------------------------------------------------------ verify

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub verifier: PathBuf,
    #[arg(long)]
    pub witness: PathBuf,
    /// Completeness threshold; the verdict is accept when acceptance >= c.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
}

fn verify(a: &VerifyArgs, g: &Global) -> Result<Report> {
    let v: StoqVerifier = load(&a.verifier)?;
    let (j, w) = load_state(&a.witness)?;
    let (acc, shown) = match g.mode {
        Mode::Float => {
            let p = v.acceptance(&w)?;
            (p, json!({ "value": p }))
        }
        Mode::Rational => {
            let p = v.acceptance(&rational_state(&j)?)?;
            (p.to_f64(), value_json(&p))
        }
    };
    let mut warnings = Vec::new();
    let verdict = match (a.c, a.s) {
        (Some(c), s) => {
            if let Some(s) = s {
                let t = Thresholds::new(unit("c", c)?, unit("s", s)?)?;
                if !t.in_class_range() {
                    warnings.push(format!("s = {s} is below 1/2"));
                }
            }
            if acc >= c {
                Verdict::Accept
            } else {
                Verdict::Reject
            }
        }
        (None, Some(_)) => bail!("--s needs --c"),
        (None, None) => Verdict::Ok,
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(Report::new("verify", verdict, json!({ "acceptance": shown, "layout": v.layout, "warnings": warnings })))
}

// ------------------------------------------------------------ sepval

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SepMethod {
    Auto,
    Grid,
    Alternating,
}

#[derive(Args)]
pub struct SepvalArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, value_enum, default_value_t = SepMethod::Auto)]
    pub method: SepMethod,
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
}

fn sepval(a: &SepvalArgs, g: &Global) -> Result<Report> {
    let m = load::<MatrixJson>(&a.matrix)?.into_matrix()?;
    let r = match a.method {
        SepMethod::Auto => hsep(&m)?,
        SepMethod::Grid => hsep_bruteforce(&m)?,
        SepMethod::Alternating => hsep_alternating(&m, a.restarts, a.iters, g.seed.unwrap_or(0))?,
    };
    Ok(Report::new(
        "sepval",
        Verdict::Ok,
        json!({
            "value": r.value,
            "error_estimate": r.error_estimate,
            "vectors": r.vectors,
            "dims": m.dims(),
            "nonnegative": m.is_nonneg(),
            "psd": m.is_psd(),
            "operator_norm": m.operator_norm(),
        }),
    ))
}

// ------------------------------------------------------------ mult-check

#[derive(Args)]
pub struct MultCheckArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Second factor; defaults to the first.
    #[arg(long)]
    pub other: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

fn mult_check(a: &MultCheckArgs) -> Result<Report> {
    let m = load::<MatrixJson>(&a.matrix)?.into_matrix()?;
    let m2 = match &a.other {
        Some(p) => load::<MatrixJson>(p)?.into_matrix()?,
        None => m.clone(),
    };
    let r = check_multiplicativity(&m, &m2, a.tolerance)?;
    let verdict = if r.verdict == MultVerdict::Equal { Verdict::Ok } else { Verdict::Violation };
    Ok(Report::new("mult-check", verdict, serde_json::to_value(&r)?))
}

// ------------------------------------------------------------ product-test

#[derive(Args)]
pub struct ProductTestArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub ell: usize,
    /// State rho on k * ell qubits.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Second copy sigma; defaults to rho.
    #[arg(long)]
    pub other: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    /// Write the verifier JSON here.
    #[arg(long)]
    pub verifier_out: Option<PathBuf>,
}

fn product_test(a: &ProductTestArgs, g: &Global) -> Result<Report> {
    let v = build_product_test(a.k, a.ell)?;
    if let Some(p) = &a.verifier_out {
        save(p, &v)?;
    }
    let mut out = json!({ "width": v.circuit.width, "gates": v.circuit.len(), "layout": v.layout });
    if let Some(sp) = &a.state {
        let (jr, rho) = load_state(sp)?;
        let (js, sigma) = match &a.other {
            Some(p) => load_state(p)?,
            None => (jr.clone(), rho.clone()),
        };
        let (p, acc) = match g.mode {
            Mode::Float => {
                let p = product_test_value(&rho, &sigma, a.k, a.ell)?;
                (json!({ "value": p }), json!({ "value": v.acceptance(&rho.tensor(&sigma)?)? }))
            }
            Mode::Rational => {
                let (r, s) = (rational_state(&jr)?, rational_state(&js)?);
                let p = product_test_value(&r, &s, a.k, a.ell)?;
                (value_json(&p), value_json(&v.acceptance(&r.tensor(&s)?)?))
            }
        };
        let e = eta(&rho, a.k, a.ell, a.restarts, g.seed.unwrap_or(0))?;
        out["p_prod"] = p;
        out["acceptance"] = acc;
        out["eta"] = json!(e.eta);
        out["product_overlap"] = json!(e.overlap);
        out["bound"] = json!(1.0 - e.eta / 3.0);
    }
    Ok(Report::new("product-test", Verdict::Ok, out))
}

// ------------------------------------------------------------ symmetrize / compress / repeat

#[derive(Args)]
pub struct SymmetrizeArgs {
    #[arg(long)]
    pub verifier: PathBuf,
    #[arg(long)]
    pub c: f64,
    #[arg(long)]
    pub s: f64,
    /// Bundle count; defaults to ceil(12 ln k).
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long, default_value_t = 16)]
    pub dummy_bits: u32,
    #[arg(long)]
    pub verifier_out: Option<PathBuf>,
}

fn symmetrize(a: &SymmetrizeArgs) -> Result<Report> {
    let v: StoqVerifier = load(&a.verifier)?;
    let t = Thresholds::new(unit("c", a.c)?, unit("s", a.s)?)?;
    let plan = SymmetrizationPlan::new(v.layout.k, v.layout.ell, a.r, &t, a.dummy_bits)?;
    let out = build_length_efficient_symmetrization(&v, &plan)?;
    if let Some(p) = &a.verifier_out {
        save(p, &out)?;
    }
    Ok(Report::new(
        "symmetrize",
        Verdict::Ok,
        json!({ "plan": plan, "layout": out.layout, "width": out.circuit.width, "gates": out.circuit.len() }),
    ))
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CompressKind {
    /// Mix in the product test (two provers).
    Product,
    /// Mix in the symmetric projector (symmetric to plain).
    Symmetric,
}

#[derive(Args)]
pub struct CompressArgs {
    #[arg(long)]
    pub verifier: PathBuf,
    #[arg(long)]
    pub c: f64,
    #[arg(long)]
    pub s: f64,
    #[arg(long, value_enum, default_value_t = CompressKind::Product)]
    pub kind: CompressKind,
    #[arg(long, default_value_t = DEFAULT_C_PROD)]
    pub c_prod: f64,
    #[arg(long, default_value_t = 16)]
    pub max_bits: u32,
    #[arg(long)]
    pub verifier_out: Option<PathBuf>,
}

fn compress(a: &CompressArgs) -> Result<Report> {
    let v: StoqVerifier = load(&a.verifier)?;
    let t = Thresholds::new(unit("c", a.c)?, unit("s", a.s)?)?;
    let (params, out) = match a.kind {
        CompressKind::Product => {
            let p = CompressionParams::new(&t, a.c_prod, a.max_bits)?;
            let out = build_prover_compression(&v, &p)?;
            (serde_json::to_value(&p)?, out)
        }
        CompressKind::Symmetric => {
            let p = SymToStoqParams::new(v.layout.k, &t, a.max_bits)?;
            let out = build_sym_to_stoq(&v, &p)?;
            (serde_json::to_value(&p)?, out)
        }
    };
    if let Some(p) = &a.verifier_out {
        save(p, &out)?;
    }
    Ok(Report::new(
        "compress",
        Verdict::Ok,
        json!({ "params": params, "layout": out.layout, "width": out.circuit.width, "gates": out.circuit.len() }),
    ))
}

#[derive(Args)]
pub struct RepeatArgs {
    #[arg(long)]
    pub verifier: PathBuf,
    /// Number of copies; derived from --error-bits and --overlap-bound when absent.
    #[arg(long)]
    pub copies: Option<usize>,
    /// Strong conjunction (product of 2p - 1) instead of weak.
    #[arg(long)]
    pub strong: bool,
    #[arg(long)]
    pub error_bits: Option<u64>,
    #[arg(long)]
    pub overlap_bound: Option<f64>,
    #[arg(long)]
    pub verifier_out: Option<PathBuf>,
}

fn repeat(a: &RepeatArgs) -> Result<Report> {
    let v: StoqVerifier = load(&a.verifier)?;
    let copies = match (a.copies, a.error_bits, a.overlap_bound) {
        (Some(m), _, _) => m,
        (None, Some(n), Some(b)) => repetition_count(n, b)? as usize,
        _ => bail!("pass --copies, or both --error-bits and --overlap-bound"),
    };
    if copies == 0 {
        bail!("need at least one copy");
    }
    let vs = vec![v; copies];
    let out = if a.strong { build_strong_conjunction(&vs)? } else { build_weak_conjunction(&vs)? };
    if let Some(p) = &a.verifier_out {
        save(p, &out)?;
    }
    Ok(Report::new(
        "repeat",
        Verdict::Ok,
        json!({
            "copies": copies,
            "conjunction": if a.strong { "strong" } else { "weak" },
            "layout": out.layout,
            "width": out.circuit.width,
            "gates": out.circuit.len(),
        }),
    ))
}

// ------------------------------------------------------------ np4 / np5

#[derive(Args)]
pub struct Np4Args {
    #[arg(long)]
    pub instance: PathBuf,
    /// `honest`, `uniform`, or a state file over vertex-label encodings.
    #[arg(long, default_value = "honest")]
    pub witness: String,
    /// Comma-separated labels for the honest witness; the best labeling by
    /// exhaustive search when absent.
    #[arg(long, value_delimiter = ',')]
    pub labeling: Option<Vec<usize>>,
    /// Copies; defaults to ceil(C sqrt n).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_C)]
    pub c_const: f64,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
}

struct Witness {
    label: String,
    dist: Distribution<f64>,
    exact: Option<Distribution<Rational>>,
}

fn np_witness(inst: &GapCgInstance, choice: &str, labeling: Option<&[usize]>) -> Result<Witness> {
    match choice {
        "honest" => {
            let lab = match labeling {
                Some(l) => l.to_vec(),
                None => {
                    let (bad, lab) = inst.best_labeling().context("pass --labeling for large instances")?;
                    if bad > 0 {
                        eprintln!("warning: no satisfying labeling; best labeling violates {bad} edges");
                    }
                    lab
                }
            };
            if lab.len() != inst.n() || lab.iter().any(|a| *a >= inst.alphabet()) {
                bail!("labeling does not match the instance");
            }
            // an unsatisfying labeling still gives a valid witness distribution
            let w = inverse(inst.n());
            let exact = Distribution::new(lab.iter().enumerate().map(|(v, a)| (inst.encode(v, *a), w.clone())))?;
            Ok(Witness { label: "honest".into(), dist: exact.to_f64(), exact: Some(exact) })
        }
        "uniform" => {
            let w = inverse(inst.n() * inst.alphabet());
            let exact = Distribution::new(
                (0..inst.n()).flat_map(|v| (0..inst.alphabet()).map(move |a| (v, a))).map(|(v, a)| (inst.encode(v, a), w.clone())),
            )?;
            Ok(Witness { label: "uniform".into(), dist: exact.to_f64(), exact: Some(exact) })
        }
        path => {
            let (j, s) = load_state(Path::new(path))?;
            if s.width() != inst.width() {
                bail!("witness has {} qubits, instance encodes {}", s.width(), inst.width());
            }
            let r = rational_state(&j)?;
            Ok(Witness { label: path.into(), dist: s.squared_distribution(), exact: Some(r.squared_distribution()) })
        }
    }
}

fn inverse(n: usize) -> Rational {
    Rational::new(1.into(), n.into())
}

fn np4(a: &Np4Args, g: &Global) -> Result<Report> {
    let seed = need_seed(g)?;
    let inst = GapCgInstance::from_json(load::<GapCgJson>(&a.instance)?)?;
    if !(a.delta > 0.0 && a.delta < 1.0) {
        bail!("delta = {} outside (0, 1)", a.delta);
    }
    let k = a.k.unwrap_or_else(|| (a.c_const * (inst.n() as f64).sqrt()).ceil() as usize);
    if k == 0 {
        bail!("K must be at least 1");
    }
    let w = np_witness(&inst, &a.witness, a.labeling.as_deref())?;
    let est = protocol4_acceptance(&inst, &w.dist, k, a.delta, a.trials, seed)?;
    let verdict = if est.value >= 0.5 { Verdict::Accept } else { Verdict::Reject };
    let stoq = 0.5 + 0.5 * est.value;
    let row = vec![
        "np4".into(),
        a.instance.display().to_string(),
        w.label.clone(),
        est.value.to_string(),
        (1.0 - est.value).to_string(),
        est.ci_low.to_string(),
        est.ci_high.to_string(),
        seed.to_string(),
    ];
    Ok(Report::new(
        "np4",
        verdict,
        json!({ "k": k, "delta": a.delta, "n": inst.n(), "witness": w.label, "estimate": est, "stoquastic_acceptance": stoq }),
    )
    .with_table(NP_HEADER.to_vec(), vec![row]))
}

const NP_HEADER: [&str; 8] = ["protocol", "instance", "witness", "acceptance", "rejection", "ci_low", "ci_high", "seed"];

#[derive(Args)]
pub struct Np5Args {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, default_value = "honest")]
    pub witness: String,
    #[arg(long, value_delimiter = ',')]
    pub labeling: Option<Vec<usize>>,
    /// Also minimize the rejection over all witness distributions.
    #[arg(long)]
    pub minimize: bool,
    #[arg(long, default_value_t = 200_000)]
    pub grid_budget: usize,
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    /// Cross-check against the gate-level verifier.
    #[arg(long)]
    pub circuit: bool,
}

fn np5(a: &Np5Args, g: &Global) -> Result<Report> {
    let inst = GapCgInstance::from_json(load::<GapCgJson>(&a.instance)?)?;
    let w = np_witness(&inst, &a.witness, a.labeling.as_deref())?;
    let (rej_f, rejection) = match (g.mode, &w.exact) {
        (Mode::Rational, Some(p)) => {
            let r = protocol5_rejection(&inst, p)?;
            (r.to_f64(), value_json(&r))
        }
        _ => {
            let r = protocol5_rejection(&inst, &w.dist)?;
            (r, json!({ "value": r }))
        }
    };
    let mut out = json!({
        "n": inst.n(),
        "witness": w.label,
        "rejection": rejection,
        "acceptance": 1.0 - rej_f / 2.0,
        "completeness_floor": 1.0 / (2.0 * inst.n() as f64),
    });
    if a.circuit {
        let v = build_protocol5_verifier(&inst)?;
        let s = NonNegativeState::new(inst.width(), w.dist.probs().iter().map(|(x, p)| (*x, p.sqrt())))?;
        out["circuit_acceptance"] = json!(v.acceptance(&s.tensor(&s)?)?);
    }
    if a.minimize {
        let m = minimize_protocol5_rejection(&inst, a.grid_budget, a.restarts, g.seed.unwrap_or(0))?;
        out["minimum"] = serde_json::to_value(&m)?;
    }
    let row = vec![
        "np5".into(),
        a.instance.display().to_string(),
        w.label.clone(),
        (1.0 - rej_f / 2.0).to_string(),
        rej_f.to_string(),
        String::new(),
        String::new(),
        g.seed.map(|s| s.to_string()).unwrap_or_default(),
    ];
    Ok(Report::new("np5", Verdict::Ok, out).with_table(NP_HEADER.to_vec(), vec![row]))
}

// ------------------------------------------------------------ birthday

#[derive(Args)]
pub struct BirthdayArgs {
    /// Size of the uniform universe.
    #[arg(long, default_value_t = 365)]
    pub n: u64,
    /// Samples per trial.
    #[arg(long, default_value_t = 23)]
    pub k: usize,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    /// JSON list of symmetric bad pairs `[[x, y], ...]`; equality when absent.
    #[arg(long)]
    pub relation: Option<PathBuf>,
    /// JSON list of outcomes the bad event is restricted to.
    #[arg(long)]
    pub restrict: Option<PathBuf>,
}

fn birthday(a: &BirthdayArgs, g: &Global) -> Result<Report> {
    let seed = need_seed(g)?;
    if a.n == 0 {
        bail!("n must be positive");
    }
    let mu = Distribution::<f64>::uniform(a.n);
    let bad = match &a.relation {
        Some(p) => BadPairs::relation(load::<Vec<(u64, u64)>>(p)?)?,
        None => BadPairs::Equality,
    };
    let omega: Option<HashSet<u64>> = a.restrict.as_ref().map(|p| load::<Vec<u64>>(p)).transpose()?.map(|v| v.into_iter().collect());
    let est = birthday_mc(&mu, &bad, omega.as_ref(), a.k, a.trials, seed)?;
    let exact = (a.relation.is_none() && a.restrict.is_none()).then(|| birthday_exact_uniform(a.n, a.k as u64));
    Ok(Report::new("birthday", Verdict::Ok, json!({ "n": a.n, "k": a.k, "estimate": est, "exact": exact })))
}

// ------------------------------------------------------------ rect-closure

#[derive(Args)]
pub struct RectClosureArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Soundness gap; the certified gap 1 - lambda_max when absent.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Round count override.
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, default_value_t = MAX_ELL)]
    pub max_ell: usize,
    #[arg(long)]
    pub parallel_seeds: bool,
    /// Depth-first recomputation instead of transition tables.
    #[arg(long)]
    pub recursive: bool,
}

fn rect_closure(a: &RectClosureArgs) -> Result<Report> {
    let inst: SepRcdInstance = load(&a.instance)?;
    if inst.ell > a.max_ell {
        bail!("ell = {} exceeds --max-ell {}", inst.ell, a.max_ell);
    }
    let certified = inst.certified_gamma()?;
    // a smaller gap is still a valid gap, and the round count needs gamma < 1
    let gamma = match a.gamma {
        Some(g) => g,
        None if certified > 0.0 => certified.min(0.5),
        None => bail!("no positive certified gap (lambda_max = {}); pass --gamma", 1.0 - certified),
    };
    if !(gamma > 0.0 && gamma < 1.0) {
        bail!("gamma = {gamma} outside (0, 1)");
    }
    let r = if a.recursive {
        rect_closure_test_recursive(&inst, gamma, a.rounds)?
    } else {
        rect_closure_test(&inst, gamma, a.rounds, a.parallel_seeds)?
    };
    let verdict = if r.accept { Verdict::Accept } else { Verdict::Reject };
    Ok(Report::new("rect-closure", verdict, json!({ "gamma": gamma, "certified_gamma": certified, "report": r })))
}

// ------------------------------------------------------------ sos-round

#[derive(Args)]
pub struct SosRoundArgs {
    #[arg(long)]
    pub oracle: PathBuf,
    /// Non-negative matrix on t parties of dimension d.
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
}

fn sos_round(a: &SosRoundArgs) -> Result<Report> {
    let o: MomentOracle = load(&a.oracle)?;
    let m = load::<MatrixJson>(&a.matrix)?.into_matrix()?;
    let initial = hellinger_joint_product(&o, o.t)?;
    let r = bks_round_loop(&m, &o, a.epsilon)?;
    Ok(Report::new("sos-round", Verdict::Ok, json!({ "initial_hellinger": initial, "result": r })))
}

// ------------------------------------------------------------ cleancc

#[derive(Args)]
pub struct CleanccArgs {
    #[arg(long, required_unless_present = "exhaustive")]
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub witness: Option<PathBuf>,
    /// Check the soundness bound over every graph on 2^n vertices (n <= 3).
    #[arg(long, value_name = "N", conflicts_with = "instance")]
    pub exhaustive: Option<usize>,
    /// Degree bound for --exhaustive.
    #[arg(long, default_value_t = 2)]
    pub dg: usize,
    /// Cross-check the witness acceptance against the gate-level verifier.
    #[arg(long)]
    pub circuit: bool,
}

fn cleancc(a: &CleanccArgs, g: &Global) -> Result<Report> {
    if let Some(n) = a.exhaustive {
        let r = exhaustive_soundness(n, a.dg)?;
        let verdict = if r.holds { Verdict::Ok } else { Verdict::Violation };
        return Ok(Report::new("cleancc", verdict, serde_json::to_value(&r)?));
    }
    let path = a.instance.as_ref().ok_or_else(|| anyhow!("--instance is required"))?;
    let c: CleanCcInstance = load(path)?;
    let (max, vec) = c.max_acceptance();
    let mut out = json!({
        "n": c.n(),
        "dG": c.dg(),
        "yes": c.is_yes(),
        "clean_component": c.clean_component(),
        "max_acceptance": max,
        "optimal_witness": vec,
        "soundness_bound": soundness_bound(c.n(), c.dg()),
    });
    if let Some(wp) = &a.witness {
        let (j, w) = load_state(wp)?;
        let (acc, shown) = match g.mode {
            Mode::Float => {
                let p = c.acceptance(&w)?;
                (json!(p), json!({ "value": p }))
            }
            Mode::Rational => {
                let r = rational_state(&j)?;
                let p = c.acceptance(&r)?;
                (json!(p.to_string()), value_json(&p))
            }
        };
        out["witness_acceptance"] = shown;
        if a.circuit {
            let v = c.build_verifier()?;
            let circ = match g.mode {
                Mode::Float => json!(v.acceptance(&w)?),
                Mode::Rational => json!(v.acceptance(&rational_state(&j)?)?.to_string()),
            };
            out["circuit_acceptance"] = circ.clone();
            out["circuit_agrees"] = json!(g.mode == Mode::Rational && circ == acc);
        }
    }
    let verdict = if c.is_yes() { Verdict::Accept } else { Verdict::Reject };
    Ok(Report::new("cleancc", verdict, out))
}

// ------------------------------------------------------------ suite

#[derive(Args)]
pub struct SuiteArgs {
    /// Run only criteria whose number equals, or name contains, this string.
    #[arg(long)]
    pub only: Option<String>,
}

fn suite(a: &SuiteArgs) -> Result<Report> {
    let chosen: Vec<_> = criteria::CRITERIA.iter().filter(|c| criteria::selected(c, a.only.as_deref())).collect();
    if chosen.is_empty() {
        bail!("no criterion matches {:?}", a.only.as_deref().unwrap_or(""));
    }
    let mut rows = Vec::new();
    let mut results = Vec::new();
    let mut failed = 0;
    for c in chosen {
        let o = criteria::run(c);
        eprintln!("{} criterion {} ({:.2?}): {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.elapsed, o.detail);
        failed += usize::from(!o.passed);
        rows.push(vec![o.name.to_string(), o.passed.to_string(), o.detail.clone()]);
        results.push(json!({ "criterion": o.name, "passed": o.passed, "detail": o.detail }));
    }
    let verdict = if failed == 0 { Verdict::Ok } else { Verdict::Violation };
    Ok(Report::new("suite", verdict, json!({ "criteria": results, "failed": failed }))
        .with_table(vec!["criterion", "passed", "detail"], rows))
}
