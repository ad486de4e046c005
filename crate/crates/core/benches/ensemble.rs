use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sse_unravel::algebra::StateVector;
use sse_unravel::exec::Parallelism;
use sse_unravel::master::{extract_map, MasterGenerator, RateVector};
use sse_unravel::sse::{ensemble_density, EnsembleSpec, GeneralDiffusiveModel, NonCpQubitModel};

fn modes() -> [(&'static str, Parallelism); 2] {
    [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Auto)]
}

fn ensembles(c: &mut Criterion) {
    let mut group = c.benchmark_group("ensemble_density");
    group.sample_size(10);
    let psi0 = StateVector::basis(2, 0);
    let noncp = NonCpQubitModel::new(RateVector::NON_CP);
    let general = GeneralDiffusiveModel::pauli(RateVector([1.0, 1.0, 1.0])).unwrap();
    for (name, par) in modes() {
        let spec = EnsembleSpec::uniform(0.25, 1e-3, 32, 2_000, 42).with_parallelism(par);
        group.bench_with_input(BenchmarkId::new("noncp", name), &spec, |b, spec| {
            b.iter(|| ensemble_density(&noncp, &psi0, spec).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("general", name), &spec, |b, spec| {
            b.iter(|| ensemble_density(&general, &psi0, spec).unwrap())
        });
    }
    group.finish();
}

fn maps(c: &mut Criterion) {
    let mut group = c.benchmark_group("extract_map");
    let g = MasterGenerator::pauli(RateVector::NON_CP);
    for (name, par) in modes() {
        group.bench_function(name, |b| b.iter(|| extract_map(&g, 1.0, 1e-3, par).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, ensembles, maps);
criterion_main!(benches);
