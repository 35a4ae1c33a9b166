use bernoulli::field::{BoundaryData, QField};
use bernoulli::geometry::build_rectangle;
use bernoulli::minimize::{certify, solve_relaxed, solve_setmove, SolveConfig};
use bernoulli::{Exec, PositivityMask};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn bench_exec(c: &mut Criterion) {
    let mesh = build_rectangle(33, 33, 1.0, 1.0).unwrap();
    let q = QField::constant(mesh.num_vertices(), 1.0).unwrap();
    let g = BoundaryData::from_fn(&mesh, 2, |v| {
        let x = (mesh.coords()[v][0] - 0.5).max(0.0);
        vec![0.6 * x, 0.8 * x]
    })
    .unwrap();
    let seed = solve_relaxed(&mesh, &q, &g, &SolveConfig::default()).unwrap();
    let init = PositivityMask::of(&seed.field, SolveConfig::default().tau);

    let mut group = c.benchmark_group("exec");
    group.sample_size(10);
    for (name, exec) in [
        ("sequential", Exec::Sequential),
        ("parallel", Exec::Parallel),
    ] {
        let cfg = SolveConfig {
            exec,
            ..SolveConfig::default()
        };
        group.bench_function(format!("setmove/{name}"), |b| {
            b.iter(|| black_box(solve_setmove(&mesh, &q, &g, &init, &cfg).unwrap()))
        });
        group.bench_function(format!("certify/{name}"), |b| {
            b.iter(|| black_box(certify(&mesh, &seed.field, &q, &cfg).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_exec);
criterion_main!(benches);
