use criterion::{criterion_group, criterion_main, Criterion};
use qantenna_core::cloud::sample;
use qantenna_core::coupling::collective_strength_quadrature;
use qantenna_core::link::bell_measure;
use qantenna_core::pipeline::{channel_couplings, retrieval_params, write_options};
use qantenna_core::retrieval::{retrieval_efficiency, SpinWaveProfile};
use qantenna_core::write::simulate_write;
use qantenna_core::{AtomPhotonState, ChannelLabel, Experiment};
use std::hint::black_box;

fn write(c: &mut Criterion) {
    let exp = Experiment::reference();
    let cloud = sample(&exp.geometry, 1).unwrap();
    let set = channel_couplings(&exp, &cloud, ChannelLabel::Up).unwrap();
    let opts = write_options(&exp, ChannelLabel::Up);
    let mut g = c.benchmark_group("write");
    g.sample_size(10);
    g.bench_function("realization_500_atoms", |b| {
        b.iter(|| {
            simulate_write(black_box(&set), &exp.schedule, &opts)
                .unwrap()
                .eta_w
        })
    });
    g.finish();
}

fn retrieval(c: &mut Criterion) {
    let exp = Experiment::reference();
    let params = retrieval_params(&exp, 5.79).unwrap();
    let flat = SpinWaveProfile::flat();
    c.bench_function("retrieval_efficiency_400_nodes", |b| {
        b.iter(|| retrieval_efficiency(black_box(&params), &flat, 400).unwrap())
    });
}

fn coupling(c: &mut Criterion) {
    let exp = Experiment::reference();
    let axis = exp.axis();
    c.bench_function("collective_strength_quadrature", |b| {
        b.iter(|| {
            collective_strength_quadrature(&exp.geometry, black_box(&exp.tweezer), &exp.up, &axis)
                .unwrap()
        })
    });
}

fn bell(c: &mut Criterion) {
    let s = AtomPhotonState::entangled(0.3);
    c.bench_function("bell_measure", |b| {
        b.iter(|| bell_measure(black_box(&s), black_box(&s)).unwrap())
    });
}

criterion_group!(benches, write, retrieval, coupling, bell);
criterion_main!(benches);
