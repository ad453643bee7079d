use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use mcbf_core::baselines::{mbd_directions, qos_power_allocation, slnr_directions, FixedDirectionGains, MbdMethod};
use mcbf_core::channel::{generate_channels, NetworkConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn generation(c: &mut Criterion) {
    let mut cfg = NetworkConfig::new(3, 2, 6);
    cfg.r_intra = 0.5;
    cfg.r_inter = 0.7;
    c.bench_function("generate_channels/3-2-6_correlated", |b| b.iter(|| generate_channels(black_box(&cfg)).unwrap()));
}

fn baselines(c: &mut Criterion) {
    let ch = generate_channels(&NetworkConfig::new(3, 2, 6).with_seed(5)).unwrap();
    c.bench_function("slnr/3-2-6", |b| b.iter(|| slnr_directions(black_box(&ch), 1.0).unwrap()));
    c.bench_function("mbd_sdr/3-2-6", |b| {
        b.iter(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            mbd_directions(black_box(&ch), MbdMethod::Sdr, 100, &mut rng).unwrap()
        })
    });
    let dirs = slnr_directions(&ch, 1.0).unwrap();
    let gains = FixedDirectionGains::from_directions(&ch, &dirs, 1.0);
    c.bench_function("fixed_point/3-2-6", |b| b.iter(|| qos_power_allocation(black_box(&gains), &[1.0; 3]).unwrap()));
}

criterion_group!(benches, generation, baselines);
criterion_main!(benches);
