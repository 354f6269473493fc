use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use varseq_core::dsl::{self, Problem};
use varseq_core::jacobi::linearize_el;
use varseq_core::noether::{bianchi_decompose, hamiltonian_current};
use varseq_core::variational::{euler_lagrange, euler_operator, Bank};
use varseq_core::{random, BundleSpec};

fn load(name: &str) -> Problem {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(format!("{name}.vp"));
    dsl::load(&std::fs::read_to_string(path).unwrap(), None).unwrap()
}

fn total_derivative(c: &mut Criterion) {
    let spec = BundleSpec::new(&["x", "y"], &["u", "v"], 3).unwrap();
    let e = random::expr(&spec, &mut ChaCha8Rng::seed_from_u64(1), 3, 8);
    c.bench_function("total_derivative/random", |b| b.iter(|| spec.total_derivative(&e, 0).unwrap()));
    let w = random::current(&spec, &mut ChaCha8Rng::seed_from_u64(2), 2, 3);
    let div = spec.divergence(&w).unwrap();
    c.bench_function("euler_operator/null", |b| {
        b.iter(|| euler_operator(&spec, &div, &Bank::all_fields(&spec)).unwrap())
    });
}

fn corpus(c: &mut Criterion) {
    for name in ["wave", "maxwell", "sphere", "metric"] {
        let p = load(name);
        c.bench_function(&format!("euler_lagrange/{name}"), |b| {
            b.iter(|| euler_lagrange(&p.spec, &p.lagrangian).unwrap())
        });
        c.bench_function(&format!("linearize_el/{name}"), |b| b.iter(|| linearize_el(&p.spec, &p.lagrangian).unwrap()));
    }
    for name in ["maxwell", "metric"] {
        let p = load(name);
        c.bench_function(&format!("bianchi_decompose/{name}"), |b| {
            b.iter(|| bianchi_decompose(&p.spec, &p.lagrangian, &p.lifts[0]).unwrap())
        });
    }
    let p = load("maxwell");
    c.bench_function("hamiltonian_current/maxwell", |b| {
        b.iter(|| hamiltonian_current(&p.spec, &p.lagrangian, &p.lifts[0]).unwrap())
    });
}

criterion_group!(benches, total_derivative, corpus);
criterion_main!(benches);
