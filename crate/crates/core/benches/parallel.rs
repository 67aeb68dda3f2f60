use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rfde::functional::{build_constant_lag, estimate_lipschitz, EstimateRequest, LipschitzMode, VectorField};
use rfde::history::{InitialHistory, PastInterval};
use rfde::par::Exec;
use rfde::wellposedness::probe_semiflow;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn lipschitz(c: &mut Criterion) {
    let interval = PastInterval::Compact(1.0);
    let f: VectorField = Arc::new(|_t, x, y, out| {
        out[0] = -y[0] + 0.5 * x[0].sin();
        Ok(())
    });
    let rhs = build_constant_lag(f, 1.0, interval).unwrap();
    let phi = InitialHistory::constant(interval, vec![1.0]);
    let mut group = c.benchmark_group("estimate_lipschitz");
    group.sample_size(10);
    for (name, exec) in MODES {
        let req = EstimateRequest::new(LipschitzMode::AboutC1Prolongations, 0.25, 0.5, 256, 7).with_exec(exec);
        group.bench_with_input(BenchmarkId::from_parameter(name), &req, |b, req| {
            b.iter(|| estimate_lipschitz(&rhs, 0.0, &phi, req).unwrap())
        });
    }
    group.finish();
}

fn semiflow(c: &mut Criterion) {
    let mut group = c.benchmark_group("probe_semiflow");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| probe_semiflow(PastInterval::Compact(2.0), 2, 1.0, 1.0, 500, 11, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, lipschitz, semiflow);
criterion_main!(benches);
