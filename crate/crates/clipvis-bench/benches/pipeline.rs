//! Criterion benchmarks for the hot paths of the pipeline: mask overlap
//! math, the propagation branch, identity linking, evaluation, and the
//! run-length codec.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use clipvis_bench::{
    feature_tensor, mask_sequence, soft_mask, striped_mask, toy_clip, tracked_scene,
};
use clipvis_cli::rle;
use clipvis_core::{
    assemble_video, assign_ids, deformable_conv, evaluate, propagate_clip, soft_iou, soft_iou_grad,
    video_iou, ConvParams, GroundTruthSet, OffsetField, PredictionSet, Rng64,
};

fn mask_math(c: &mut Criterion) {
    let a = soft_mask(1, 64, 64);
    let b = soft_mask(2, 64, 64);
    c.bench_function("soft_iou 64x64", |bench| {
        bench.iter(|| soft_iou(black_box(&a), black_box(&b)).unwrap())
    });
    c.bench_function("soft_iou_grad 64x64", |bench| {
        bench.iter(|| soft_iou_grad(black_box(&a), black_box(&b)).unwrap())
    });

    let seq_a = mask_sequence(3, 12, 64, 64);
    let seq_b = mask_sequence(4, 12, 64, 64);
    c.bench_function("video_iou 12 frames 64x64", |bench| {
        bench.iter(|| video_iou(black_box(&seq_a), black_box(&seq_b)).unwrap())
    });
}

fn propagation(c: &mut Criterion) {
    let input = feature_tensor(5, 8, 32, 32);
    let kernel = ConvParams::seeded(8, 8, 3, 3, &mut Rng64::new(9)).expect("valid kernel");
    let offsets = OffsetField::constant(3, 32, 32, 0.4, -0.7).expect("valid offsets");
    c.bench_function("deformable_conv 8ch 32x32", |bench| {
        bench.iter(|| {
            deformable_conv(black_box(&input), black_box(&offsets), black_box(&kernel)).unwrap()
        })
    });

    let (features, masks, scores, window, params) = toy_clip();
    c.bench_function("propagate_clip 5 frames 8ch 24x16", |bench| {
        bench.iter(|| {
            propagate_clip(
                black_box(&features),
                black_box(&masks),
                black_box(&scores),
                window,
                black_box(&params),
            )
            .unwrap()
        })
    });
}

fn linking_and_evaluation(c: &mut Criterion) {
    let (tracks, ground_truth) = tracked_scene();
    c.bench_function("assign_ids 72 tracks", |bench| {
        bench.iter(|| assign_ids(black_box(&tracks), 0.5, 24).unwrap())
    });

    let state = assign_ids(&tracks, 0.5, 24).expect("valid tracks");
    c.bench_function("assemble_video 3 identities", |bench| {
        bench.iter(|| assemble_video(black_box(&tracks), black_box(&state), 24).unwrap())
    });

    let instances = assemble_video(&tracks, &state, 24).expect("valid assignment");
    let predictions = PredictionSet {
        videos: vec![instances],
    };
    let annotations = GroundTruthSet {
        videos: vec![ground_truth],
    };
    c.bench_function("evaluate 1 video 3 instances", |bench| {
        bench.iter(|| evaluate(black_box(&predictions), black_box(&annotations)).unwrap())
    });
}

fn rle_codec(c: &mut Criterion) {
    let mask = striped_mask(64, 64, 3);
    c.bench_function("rle_encode 64x64", |bench| {
        bench.iter(|| rle::encode(black_box(&mask)))
    });

    let runs = rle::encode(&mask);
    c.bench_function("rle_decode 64x64", |bench| {
        bench.iter(|| rle::decode(64, 64, black_box(&runs)).unwrap())
    });
}

criterion_group!(
    benches,
    mask_math,
    propagation,
    linking_and_evaluation,
    rle_codec
);
criterion_main!(benches);
