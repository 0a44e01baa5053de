use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use dear_bench::{negative_row, random_batch, random_mlp, synthetic_bundle};
use dear_core::autodiff::Tape;
use dear_core::baselines::{FaceGraph, FaceVariant};
use dear_core::recourse::{dear_search, CandidateStrategy, RecourseRequest};

fn tape(c: &mut Criterion) {
    let mlp = random_mlp(&[11, 16, 32, 10], 0);
    let batch = random_batch(64, 11, 1);
    c.bench_function("tape_forward_backward_64x11", |b| {
        b.iter(|| {
            let mut tape = Tape::new();
            let bound = mlp.bind(&mut tape);
            let x = tape.leaf(batch.clone());
            let y = bound.forward(&mut tape, x).unwrap();
            let sq = tape.square(y).unwrap();
            let loss = tape.sum(sq).unwrap();
            black_box(tape.backward(loss).unwrap());
        })
    });
    c.bench_function("mlp_predict_64x11", |b| b.iter(|| black_box(mlp.predict(black_box(&batch)).unwrap())));
}

fn recourse(c: &mut Criterion) {
    let bundle = synthetic_bundle(1000);
    let x = negative_row(&bundle);
    let cae = bundle.cae_for(&[0]).unwrap();
    c.bench_function("cae_reconstruct_row", |b| b.iter(|| black_box(cae.reconstruct_row(black_box(&x)).unwrap())));

    let request = RecourseRequest {
        strategy: CandidateStrategy::Explicit(vec![0]),
        ..RecourseRequest::default()
    };
    c.bench_function("dear_search_synthetic_x1", |b| {
        b.iter(|| {
            black_box(dear_search(&x, bundle.classifier(), cae.as_ref(), bundle.encoder(), &request).unwrap());
        })
    });

    let points = bundle.train_set().x.clone();
    let mut group = c.benchmark_group("face");
    group.sample_size(10);
    group.bench_function("graph_build_knn5_800", |b| {
        b.iter_batched(
            || points.clone(),
            |p| black_box(FaceGraph::build(&p, bundle.classifier(), FaceVariant::Knn(5)).unwrap()),
            BatchSize::LargeInput,
        )
    });
    let graph = FaceGraph::build(&points, bundle.classifier(), FaceVariant::Knn(5)).unwrap();
    group.bench_function("query_knn5_800", |b| b.iter(|| black_box(graph.query(&x, bundle.classifier()).unwrap())));
    group.finish();
}

criterion_group!(benches, tape, recourse);
criterion_main!(benches);
