use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gnn_unify::{cg_solve, propagate, spmm, Mode, PropagationConfig};
use gnn_unify_bench::fixture;

fn bench_spmm(c: &mut Criterion) {
    let mut group = c.benchmark_group("spmm");
    for n in [1000, 4000] {
        let (ops, h) = fixture(n, 16);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| spmm(ops.a_hat(), &h).unwrap())
        });
    }
    group.finish();
}

fn bench_cg(c: &mut Criterion) {
    let (ops, h) = fixture(2000, 8);
    // I + ξL̃ with ξ = 9, the PPNP system at α = 0.1
    let xi = 9.0;
    let a_hat = ops.a_hat();
    let apply = |v: &[f64], out: &mut [f64]| {
        a_hat.spmv_into(v, out);
        for (o, &vi) in out.iter_mut().zip(v) {
            *o = (1.0 + xi) * vi - xi * *o;
        }
    };
    c.bench_function("cg/ppnp-2000x8", |b| {
        b.iter(|| cg_solve(apply, &h, 1e-10, 20_000))
    });
}

fn bench_propagate(c: &mut Criterion) {
    let (ops, h) = fixture(2000, 16);
    let mut group = c.benchmark_group("propagate");
    for (name, cfg) in [
        ("gnn-lf-closed", PropagationConfig::gnn_lf(0.1, 0.7)),
        (
            "gnn-lf-iter-10",
            PropagationConfig::gnn_lf(0.1, 0.7).iter(10),
        ),
        (
            "gnn-lf-iter-50",
            PropagationConfig::gnn_lf(0.1, 0.7).iter(50),
        ),
        ("gnn-hf-closed", PropagationConfig::gnn_hf(0.1, 0.5)),
        ("appnp-10", PropagationConfig::appnp(0.1, 10)),
        ("sgc-10", PropagationConfig::sgc(10).with_mode(Mode::Iter)),
    ] {
        group.bench_function(name, |b| b.iter(|| propagate(&cfg, &ops, &h).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_spmm, bench_cg, bench_propagate);
criterion_main!(benches);
