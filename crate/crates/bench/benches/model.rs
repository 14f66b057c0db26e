use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use diffmts_bench::{conditions, randn};
use diffmts_core::numcore::Graph;
use diffmts_core::sample::reverse_step;
use diffmts_core::schedule::ScheduleSpec;
use diffmts_core::tdr_unet::{denoise_forward, init_params, Mode, ModelConfig};

fn denoiser(c: &mut Criterion) {
    let mut group = c.benchmark_group("denoiser");
    group.sample_size(20);
    for length in [24, 48] {
        let cfg = ModelConfig {
            length,
            ..ModelConfig::default()
        };
        let params = init_params::<f32>(&cfg, 0).unwrap();
        let batch = 8;
        let x = randn::<f32>(&[batch, cfg.in_channels, length], 1);
        let ts = vec![500; batch];
        let conds = conditions(batch);
        group.bench_with_input(BenchmarkId::new("forward", length), &length, |b, _| {
            b.iter(|| {
                let g = Graph::new();
                let p = params.record(&g);
                denoise_forward(&cfg, &p, g.constant(x.clone()), &ts, &conds, Mode::Eval)
                    .unwrap()
                    .to_array()
            })
        });
        group.bench_with_input(
            BenchmarkId::new("forward_backward", length),
            &length,
            |b, _| {
                b.iter(|| {
                    let g = Graph::new();
                    let p = params.record(&g);
                    let y =
                        denoise_forward(&cfg, &p, g.constant(x.clone()), &ts, &conds, Mode::Eval)
                            .unwrap();
                    g.backward(y.mul(y).unwrap().mean()).unwrap()
                })
            },
        );
    }
    group.finish();
}

fn sampling_step(c: &mut Criterion) {
    let cfg = ModelConfig::default();
    let params = init_params::<f32>(&cfg, 0).unwrap();
    let table = ScheduleSpec::default().build().unwrap();
    let batch = 32;
    let shape = [batch, cfg.in_channels, cfg.length];
    let x = randn::<f32>(&shape, 2);
    let noise = randn::<f32>(&shape, 3);
    let conds = conditions(batch);
    let t = 500;
    c.bench_function("sampling_step_b32", |b| {
        b.iter(|| {
            let g = Graph::new();
            let p = params.record(&g);
            let eps_hat = denoise_forward(
                &cfg,
                &p,
                g.constant(x.clone()),
                &vec![t; batch],
                &conds,
                Mode::Eval,
            )
            .unwrap()
            .to_array();
            reverse_step(&x, t, &eps_hat, &table, &noise).unwrap()
        })
    });
}

criterion_group!(benches, denoiser, sampling_step);
criterion_main!(benches);
