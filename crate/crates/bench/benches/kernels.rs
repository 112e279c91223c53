use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stoqlab_bench::{ladder, plus, triangle};
use stoqlab_core::cleancc::exhaustive_soundness;
use stoqlab_core::npcert::minimize_protocol5_rejection;
use stoqlab_core::protocols::build_product_test;
use stoqlab_core::rectclosure::{random_yes_instance, rect_closure_test, rect_closure_test_recursive};
use stoqlab_core::sepval::{hsep_bruteforce, remark_matrix};
use stoqlab_core::sosround::{bks_round_loop, correlated_oracle, joint_law, random_nonneg_matrix};

fn circuits(c: &mut Criterion) {
    let circ = ladder(16, 4);
    let compiled = circ.compiled();
    c.bench_function("circuit_apply_2^16", |b| {
        b.iter(|| (0..1u64 << 16).fold(0u64, |acc, x| acc ^ compiled.apply(black_box(x))))
    });
    let v = build_product_test(2, 2).unwrap();
    let w = plus(4);
    let w2 = w.tensor(&w).unwrap();
    c.bench_function("product_test_acceptance_rational", |b| b.iter(|| v.acceptance(black_box(&w2)).unwrap()));
    let wf = w2.to_f64();
    c.bench_function("product_test_acceptance_float", |b| b.iter(|| v.acceptance(black_box(&wf)).unwrap()));
}

fn optimization(c: &mut Criterion) {
    let m = remark_matrix();
    c.bench_function("hsep_grid_2x2", |b| b.iter(|| hsep_bruteforce(black_box(&m)).unwrap()));
    let tri = triangle();
    c.bench_function("protocol5_exact_minimum", |b| b.iter(|| minimize_protocol5_rejection(&tri, 1000, 2, 0).unwrap()));
}

fn closure(c: &mut Criterion) {
    let inst = random_yes_instance(3, 1, 10, 1).unwrap().instance;
    c.bench_function("rect_closure_table_ell3", |b| b.iter(|| rect_closure_test(&inst, 0.5, None, false).unwrap()));
    let small = random_yes_instance(2, 1, 6, 2).unwrap().instance;
    c.bench_function("rect_closure_recursive_ell2", |b| b.iter(|| rect_closure_test_recursive(&small, 0.5, Some(3)).unwrap()));
}

fn rounding(c: &mut Criterion) {
    let o = correlated_oracle(4, 3, 0.25, 7).unwrap();
    c.bench_function("joint_law_d4_t3", |b| b.iter(|| joint_law(black_box(&o), 3).unwrap()));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = random_nonneg_matrix(4, 3, &mut rng).unwrap();
    c.bench_function("bks_round_loop_d4_t3", |b| b.iter(|| bks_round_loop(&m, &o, 0.2).unwrap()));
}

fn cleancc(c: &mut Criterion) {
    let mut g = c.benchmark_group("cleancc");
    g.sample_size(10);
    g.bench_function("exhaustive_n2_dg2", |b| b.iter(|| exhaustive_soundness(2, 2).unwrap()));
    g.finish();
}

criterion_group!(benches, circuits, optimization, closure, rounding, cleancc);
criterion_main!(benches);
