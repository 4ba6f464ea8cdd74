use criterion::{black_box, criterion_group, criterion_main, Criterion};
use thinjulia_core::dynamics::classify;
use thinjulia_core::geometry::pull_back_annulus;
use thinjulia_core::render::{classify_grid, RenderConfig};
use thinjulia_core::verify::{check_contracting, VerifyOptions};
use thinjulia_core::{BranchCode, Complex64, ParameterSequence};

fn classify_point(c: &mut Criterion) {
    let seq = ParameterSequence::default_demo();
    let z = Complex64::new(0.3, 0.2);
    c.bench_function("classify_point_m0", |b| b.iter(|| classify(&seq, black_box(z), 0, 3)));
}

fn grid(c: &mut Criterion) {
    let seq = ParameterSequence::default_demo();
    let cfg = RenderConfig::for_time(&seq, 0, 256);
    c.bench_function("classify_grid_256", |b| b.iter(|| classify_grid(&seq, black_box(&cfg)).unwrap()));
}

fn pull_backs(c: &mut Criterion) {
    let seq = ParameterSequence::default_demo();
    let mut group = c.benchmark_group("pull_back_annulus");
    group.sample_size(10);
    for (m, k) in [(5u64, 1usize), (6, 2), (0, 3)] {
        let code = BranchCode::zeros((seq.checkpoint(k) - 1 - m) as usize);
        group.bench_function(format!("m{m}_k{k}"), |b| {
            b.iter(|| pull_back_annulus(&seq, m, k, black_box(&code)).unwrap())
        });
    }
    group.finish();
}

fn checks(c: &mut Criterion) {
    let seq = ParameterSequence::default_demo();
    let opts = VerifyOptions::default();
    c.bench_function("check_contracting_k1", |b| b.iter(|| check_contracting(&seq, 1, 1000, &opts)));
}

criterion_group!(benches, classify_point, grid, pull_backs, checks);
criterion_main!(benches);
