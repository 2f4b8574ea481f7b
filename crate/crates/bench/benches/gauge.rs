//! Throughput benchmarks: the per-sample estimator step (the loop an MCU
//! would run), the measurement chain, the SOC-OCV lookups, and the
//! end-to-end reference comparison.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use fuelgauge::{
    compare, measure, AdcModel, GaugeConfig, GaugeState, OcvTable, Sample, Scenario, SenseCircuit,
};
use std::hint::black_box;

fn bench_step(c: &mut Criterion) {
    let config = GaugeConfig::default();
    let table = OcvTable::default_25c();
    let init = GaugeState::initialize(3.80, 25.0, &config, &table).unwrap();

    // A repeating charge/discharge/idle pattern, pre-built.
    let samples: Vec<Sample> = (0..10_000)
        .map(|k| {
            let i = match k % 3 {
                0 => 4400.0,
                1 => -2200.0,
                _ => 0.0,
            };
            Sample { t: (k + 1) as f64, i_bat: i, v_bat: 3.8, temp: 25.0 }
        })
        .collect();

    let mut group = c.benchmark_group("gauge");
    group.throughput(Throughput::Elements(samples.len() as u64));
    group.bench_function("step_10k_samples", |b| {
        b.iter_batched(
            || init,
            |mut gauge| {
                for s in &samples {
                    gauge = gauge.step(black_box(s), &config).unwrap();
                }
                gauge
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn bench_lookups(c: &mut Criterion) {
    let table = OcvTable::default_25c();
    c.bench_function("soc_from_ocv", |b| {
        b.iter(|| table.soc_from_ocv(black_box(3.8123), black_box(25.0)))
    });
    c.bench_function("ocv_from_soc", |b| b.iter(|| table.ocv_from_soc(black_box(63.7))));
}

fn bench_measure(c: &mut Criterion) {
    let circuit = SenseCircuit::default();
    let adc = AdcModel::default();
    let truth = Sample { t: 1.0, i_bat: 4321.0, v_bat: 3.9876, temp: 24.6 };
    c.bench_function("measure", |b| b.iter(|| measure(black_box(&truth), &circuit, &adc)));
}

fn bench_compare_reference(c: &mut Criterion) {
    let scenario = Scenario::default_charge_1c();
    let mut group = c.benchmark_group("harness");
    group.sample_size(10);
    group.bench_function("compare_charge_1c", |b| b.iter(|| compare(black_box(&scenario)).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_step, bench_lookups, bench_measure, bench_compare_reference);
criterion_main!(benches);
