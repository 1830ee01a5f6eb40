use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use qff_bench::{bit_flip_env, warm_state};
use qff_core::metrics::{recoverable_q_info, RqMethod};
use qff_core::nn::Mlp;
use qff_core::scenario::BackendChoice;

fn step(c: &mut Criterion) {
    let mut g = c.benchmark_group("step");
    for (name, backend) in [("dense", BackendChoice::Dense), ("chz", BackendChoice::Chz)] {
        let env = bit_flip_env(backend);
        let start = warm_state(&env, 10, 1);
        let cnot = 0;
        g.bench_function(name, |b| {
            b.iter_batched(|| start.clone(), |mut s| env.apply(&mut s, black_box(cnot)).unwrap(), BatchSize::SmallInput)
        });
    }
    g.finish();
}

fn rq(c: &mut Criterion) {
    let env = bit_flip_env(BackendChoice::Dense);
    let frame = warm_state(&env, 10, 1).frame.to_dense();
    let mut g = c.benchmark_group("recoverable_q_info");
    for (name, method) in [("axis", RqMethod::Axis), ("grid", RqMethod::Grid)] {
        g.bench_function(name, |b| b.iter(|| recoverable_q_info(black_box(&frame), method).unwrap()));
    }
    g.finish();
}

fn forward(c: &mut Criterion) {
    let net = Mlp::init(&[793, 300, 300, 21], 0).unwrap();
    let batch = 64;
    let x: Vec<f64> = (0..batch * 793).map(|i| ((i * 37 % 101) as f64 - 50.0) / 50.0).collect();
    c.bench_function("mlp_forward_793_300_300_21_x64", |b| b.iter(|| net.forward_batch(black_box(&x), batch).unwrap()));
}

criterion_group!(benches, step, rq, forward);
criterion_main!(benches);
