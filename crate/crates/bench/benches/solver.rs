use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rrsplit::cutoff::{grad_energy, CutoffConfig};
use rrsplit::scheme::{advance, Stepper};
use rrsplit::{solve_spd, CaseName, MonolithicStepper};
use rrsplit_bench::Setup;

fn conjugate_gradients(c: &mut Criterion) {
    let mut group = c.benchmark_group("cg");
    for n in [16, 32, 64] {
        let setup = Setup::uniform(CaseName::PpConforming, n);
        let a = setup.fluid_system();
        let b: Vec<f64> = (0..a.n_rows())
            .map(|i| ((i * 7) % 11) as f64 - 5.0)
            .collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| solve_spd(&a, &b, 1e-12).unwrap())
        });
    }
    group.finish();
}

fn splitting_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("robin_robin_step");
    for (name, n) in [
        (CaseName::PpConforming, 32),
        (CaseName::PhUniform, 32),
        (CaseName::PpConforming, 64),
    ] {
        let s = Setup::uniform(name, n);
        group.bench_function(format!("{}_{n}", name.as_str()), |bench| {
            bench.iter(|| advance(&s.params, &s.mesh, &s.ops, &s.state, &s.case).unwrap())
        });
    }
    group.finish();
}

fn monolithic(c: &mut Criterion) {
    let s = Setup::uniform(CaseName::PpConforming, 32);
    c.bench_function("monolithic_factor_32", |bench| {
        bench.iter(|| MonolithicStepper::new(&s.ops, &s.params).unwrap())
    });
    let stepper = MonolithicStepper::new(&s.ops, &s.params).unwrap();
    c.bench_function("monolithic_step_32", |bench| {
        bench.iter(|| {
            stepper
                .step(&s.params, &s.mesh, &s.ops, &s.state, &s.case)
                .unwrap()
        })
    });
}

fn cutoff_energy(c: &mut Criterion) {
    let cfg = CutoffConfig::new(1.0 / 256.0).unwrap();
    c.bench_function("cutoff_grad_energy", |bench| {
        bench.iter(|| grad_energy(&cfg, 3))
    });
}

criterion_group!(
    benches,
    conjugate_gradients,
    splitting_step,
    monolithic,
    cutoff_energy
);
criterion_main!(benches);
