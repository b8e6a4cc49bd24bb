use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

use mosnet::bootstrap::{inherent_predictability, synth_panel};
use mosnet::dsp::{stft_magnitude, Waveform};
use mosnet::metrics::{pearson_lcc, spearman_srcc};
use mosnet::models::{build_model, Architecture, ModelConfig};
use mosnet::nn::{Blstm, Conv2d, Tensor};
use mosnet::rng::stream;

fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f32> {
    let mut rng = stream(seed, "bench", 0);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn stft(c: &mut Criterion) {
    let mut rng = stream(1, "bench-audio", 0);
    let samples: Vec<f64> = (0..32_000).map(|_| rng.random_range(-0.5..0.5)).collect();
    let w = Waveform::new(samples, 16_000).unwrap();
    c.bench_function("stft_2s", |b| b.iter(|| stft_magnitude(black_box(&w)).unwrap()));
}

fn conv(c: &mut Criterion) {
    let mut group = c.benchmark_group("conv3x3");
    for (c_in, c_out, bins) in [(1, 16, 257), (16, 16, 257), (64, 128, 10)] {
        let layer = Conv2d::<f32>::new(3, 3, c_in, c_out, 1, 1, &mut stream(2, "bench-conv", 0));
        let x = random_tensor(&[100, bins, c_in], 3);
        let id = format!("{c_in}x{c_out}@{bins}");
        group.bench_with_input(BenchmarkId::new("forward", &id), &x, |b, x| {
            b.iter(|| layer.forward(x).unwrap())
        });
        let (y, cache) = layer.forward(&x).unwrap();
        let dy = random_tensor(y.shape(), 4);
        let mut grads = vec![
            Tensor::zeros(layer.kernel.value.shape()),
            Tensor::zeros(layer.bias.value.shape()),
        ];
        group.bench_function(BenchmarkId::new("backward", &id), |b| {
            b.iter(|| layer.backward(&cache, &dy, &mut grads))
        });
    }
    group.finish();
}

fn blstm(c: &mut Criterion) {
    let layer = Blstm::<f32>::new(512, 128, &mut stream(5, "bench-blstm", 0));
    let x = random_tensor(&[100, 512], 6);
    c.bench_function("blstm_forward_100x512", |b| b.iter(|| layer.forward(&x, 100).unwrap()));
    let (y, cache) = layer.forward(&x, 100).unwrap();
    let dy = random_tensor(y.shape(), 7);
    let mut grads: Vec<Tensor<f32>> = [&layer.forward, &layer.backward]
        .iter()
        .flat_map(|d| [&d.w_input, &d.w_hidden, &d.bias])
        .map(|p| Tensor::zeros(p.value.shape()))
        .collect();
    c.bench_function("blstm_backward_100x512", |b| {
        b.iter(|| layer.backward(&cache, &dy, &mut grads))
    });
}

fn models(c: &mut Criterion) {
    let mut group = c.benchmark_group("predict_100_frames");
    group.sample_size(10);
    let x = random_tensor(&[100, 257], 8).map(f32::abs);
    for arch in [Architecture::Blstm, Architecture::Cnn, Architecture::CnnBlstm] {
        let model = build_model::<f32>(&ModelConfig::new(arch), 0)
            .unwrap()
            .into_mos()
            .unwrap();
        group.bench_function(arch.name(), |b| b.iter(|| model.predict(&x, 100).unwrap()));
    }
    group.finish();
}

fn correlations(c: &mut Criterion) {
    let mut rng = stream(9, "bench-metrics", 0);
    let x: Vec<f64> = (0..10_000).map(|_| rng.random_range(1.0..5.0)).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|v| (v + rng.random_range(-1.0..1.0) * 2.0).round())
        .collect();
    c.bench_function("pearson_10k", |b| b.iter(|| pearson_lcc(&x, &y).unwrap()));
    c.bench_function("spearman_10k", |b| b.iter(|| spearman_srcc(&x, &y).unwrap()));
}

fn bootstrap(c: &mut Criterion) {
    let panel = synth_panel(400, 20, 20, 4, 0.7, 10).unwrap();
    let mut group = c.benchmark_group("bootstrap");
    group.sample_size(10);
    group.bench_function("400utt_100reps", |b| {
        b.iter(|| inherent_predictability(&panel, 100, 10, 1).unwrap())
    });
    group.finish();
}

criterion_group!(benches, stft, conv, blstm, models, correlations, bootstrap);
criterion_main!(benches);
