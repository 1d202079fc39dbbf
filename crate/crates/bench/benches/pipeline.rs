use std::hint::black_box;

use capsd::solver::sonar_pose_world;
use capsd::sonar::{centroid_detect, render_scan, RenderOptions, ScanTarget};
use capsd::{
    brute_force_solve, run_pipeline, simulate, solve_position, AttitudeState, EkfConfig, ImuSample,
    TiltEkf, Vec3,
};
use capsd_bench::{small_scenario, solver_input};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn solver(c: &mut Criterion) {
    let input = solver_input();
    c.bench_function("solve_position", |b| {
        b.iter(|| solve_position(black_box(&input)))
    });
    c.bench_function("brute_force_solve_20k", |b| {
        b.iter(|| brute_force_solve(black_box(&input), 20_000))
    });
}

fn ekf(c: &mut Criterion) {
    let cfg = EkfConfig::default();
    let accel = capsd::attitude::gravity_in_body(0.1, -0.05, cfg.gravity);
    c.bench_function("ekf_predict_update", |b| {
        let mut f = TiltEkf::with_prior(cfg, AttitudeState::level(&cfg));
        let mut t = 0.0;
        b.iter(|| {
            t += 0.01;
            let imu = ImuSample {
                t,
                omega: Vec3::new(0.01, -0.02, 0.03),
                accel,
            };
            black_box(f.process(&imu).unwrap());
        })
    });
}

fn sonar(c: &mut Criterion) {
    let input = solver_input();
    let pose = sonar_pose_world(&input.asv_pose, &input.mount);
    let target = ScanTarget {
        center: Vec3::new(11.0, 10.5, -3.0),
        radius: 0.3,
    };
    let opts = RenderOptions {
        intensity: 1.0,
        speckle_std: 0.05,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    c.bench_function("render_and_detect_512", |b| {
        b.iter(|| {
            let scan = render_scan(&pose, &[target], &input.cfg, &opts, 0.0, &mut rng);
            black_box(centroid_detect(&scan, 0.5))
        })
    });
}

fn pipeline(c: &mut Criterion) {
    let scenario = small_scenario();
    let ds = simulate(&scenario).unwrap();
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(20);
    g.bench_function("simulate", |b| {
        b.iter(|| simulate(black_box(&scenario)).unwrap())
    });
    g.bench_function("run_pipeline", |b| {
        b.iter(|| run_pipeline(black_box(&ds)).unwrap())
    });
    g.bench_function("dataset_round_trip", |b| {
        b.iter(|| capsd::Dataset::from_bytes(&black_box(&ds).to_bytes()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, solver, ekf, sonar, pipeline);
criterion_main!(benches);
