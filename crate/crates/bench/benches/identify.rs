use std::hint::black_box;

use backlash_bench::motor_trace;
use backlash_core::experiment::ControllerConfig;
use backlash_core::ident::{fit_two_lines, propose_identify, reference_identify, ProposedOptions, ReferenceOptions};
use criterion::{criterion_group, criterion_main, Criterion};

fn identify(c: &mut Criterion) {
    let (cfg, trace) = motor_trace("paper-case1", 30.0);
    let relay = cfg.relay().unwrap().clone();
    let opts = ProposedOptions::default();
    c.bench_function("propose_identify_case1", |b| {
        b.iter(|| propose_identify(black_box(&trace), &relay, &cfg.plant, &opts).unwrap())
    });

    let (cfg, trace) = motor_trace("paper-case3", 2.0);
    let ControllerConfig::PiTriangle(pi) = &cfg.controller else {
        unreachable!()
    };
    let opts = ReferenceOptions::default();
    c.bench_function("reference_identify_case3", |b| {
        b.iter(|| reference_identify(black_box(&trace), &pi.triangle, &opts).unwrap())
    });

    let t: Vec<f64> = (0..12_500).map(|k| k as f64 * 4e-4).collect();
    let y: Vec<f64> = t
        .iter()
        .map(|&t| if t < 1.0 { 0.02 * t } else { 0.02 + 0.001 * (t - 1.0) })
        .collect();
    c.bench_function("fit_two_lines_12500", |b| {
        b.iter(|| fit_two_lines(black_box(&t), black_box(&y), 10))
    });
}

criterion_group!(benches, identify);
criterion_main!(benches);
