use diffmts_core::data::{condition_corpus, NormStats};
use diffmts_core::numcore::Array;
use diffmts_core::sample::{
    parse_samples_csv, reverse_step, sample, sample_with, samples_csv, trajectory_rng,
    SampleRequest,
};
use diffmts_core::schedule::{make_schedule, ScheduleKind, ScheduleSpec};
use diffmts_core::tdr_unet::ModelConfig;
use diffmts_core::train::{train, TrainConfig, TrainState};
use diffmts_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_model() -> ModelConfig {
    ModelConfig {
        in_channels: 2,
        length: 8,
        base_filters: 4,
        time_embed_dim: 8,
        cond_embed_dim: 8,
        attn_dim: 4,
        input_kernel: 3,
        groups: 2,
        ..ModelConfig::default()
    }
}

fn tiny_state(steps: usize) -> TrainState {
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 4,
        seed: 3,
        schedule: ScheduleSpec {
            kind: ScheduleKind::Cosine,
            steps,
            ..ScheduleSpec::default()
        },
        ..TrainConfig::default()
    };
    let data = condition_corpus(8, 2, 8, 0.1, 1)
        .unwrap()
        .normalize()
        .unwrap();
    train(&data, tiny_model(), cfg).unwrap()
}

#[test]
fn reverse_step_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for kind in [ScheduleKind::Linear, ScheduleKind::Cosine] {
        let table = make_schedule(kind, 200, 0.008).unwrap();
        for _ in 0..500 {
            let t = rng.random_range(1..=200);
            let (x, e, z): (f64, f64, f64) = (
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            // rebuild every quantity from the stored β and ᾱ sequences
            let ab = table.alpha_bars();
            let beta = table.betas()[t - 1];
            let alpha = 1.0 - beta;
            let var = (1.0 - ab[t - 1]) / (1.0 - ab[t]) * beta;
            let want = (x - beta / (1.0 - ab[t]).sqrt() * e) / alpha.sqrt()
                + if t == 1 { 0.0 } else { var.sqrt() * z };
            let got = reverse_step(
                &Array::scalar(x),
                t,
                &Array::scalar(e),
                &table,
                &Array::scalar(z),
            )
            .unwrap()
            .item();
            assert!(
                (got - want).abs() < 1e-12,
                "{kind:?} t={t}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn default_model_emits_fourteen_channel_windows() {
    let model = ModelConfig::default();
    let state = TrainState::new(
        model.clone(),
        TrainConfig {
            schedule: ScheduleSpec {
                steps: 3,
                ..ScheduleSpec::default()
            },
            ..TrainConfig::default()
        },
        None,
    )
    .unwrap();
    let out = sample(&state, &SampleRequest::new(vec![0.5, 0.1], 0)).unwrap();
    assert_eq!(out.windows.len(), 2);
    assert_eq!(out.windows[0].shape(), &[14, 48]);
    assert_eq!(out.forward_calls, 3);
}

#[test]
fn sampling_is_seed_deterministic_and_batch_independent() {
    let state = tiny_state(30);
    let table = state.schedule().unwrap();
    let req = SampleRequest::new((0..7).map(|i| i as f64 / 6.0).collect(), 42);
    let a = sample(&state, &req).unwrap();
    let b = sample(&state, &req).unwrap();
    assert_eq!(a, b);
    for batch in [1, 3] {
        let c = sample_with(
            &state.model,
            &state.params,
            &table,
            state.stats.as_ref(),
            &req,
            batch,
        )
        .unwrap();
        assert_eq!(c, a, "batch {batch}");
    }
    let other = sample(
        &state,
        &SampleRequest {
            seed: 43,
            ..req.clone()
        },
    )
    .unwrap();
    assert_ne!(other.normalized, a.normalized);
    assert_eq!(a.forward_calls, 30);
}

#[test]
fn trajectory_streams_are_distinct() {
    let mut a = trajectory_rng(5, 0);
    let mut b = trajectory_rng(5, 1);
    let xs: Vec<u64> = (0..4).map(|_| a.random()).collect();
    let ys: Vec<u64> = (0..4).map(|_| b.random()).collect();
    assert_ne!(xs, ys);
}

#[test]
fn outputs_are_finite_for_short_and_long_chains() {
    for steps in [50, 1000] {
        let state = tiny_state(steps);
        let out = sample(&state, &SampleRequest::new(vec![0.0, 0.5, 1.0], 9)).unwrap();
        assert_eq!(out.forward_calls, steps);
        for w in &out.normalized {
            assert!(w.data().iter().all(|v| v.is_finite()), "T = {steps}");
        }
    }
}

#[test]
fn stored_statistics_are_inverted() {
    let state = tiny_state(10);
    let stats: &NormStats = state.stats.as_ref().unwrap();
    let out = sample(&state, &SampleRequest::new(vec![0.3, 0.9], 2)).unwrap();
    for (w, n) in out.windows.iter().zip(&out.normalized) {
        assert_eq!(w, &stats.denormalize(n).unwrap());
    }
}

#[test]
fn guidance_off_ignores_conditions() {
    let state = tiny_state(10);
    let on = |c: f64, off: bool| {
        sample(
            &state,
            &SampleRequest {
                conditions: vec![c],
                seed: 4,
                guidance_off: off,
            },
        )
        .unwrap()
        .normalized
    };
    assert_eq!(on(0.0, true), on(1.0, true));
    assert_ne!(on(0.0, false), on(1.0, false));
}

#[test]
fn out_of_range_condition_rejected() {
    let state = tiny_state(5);
    assert!(matches!(
        sample(&state, &SampleRequest::new(vec![0.5, -0.1], 0)),
        Err(Error::Validation(_))
    ));
}

#[test]
fn sample_csv_round_trip() {
    let state = tiny_state(5);
    let out = sample(&state, &SampleRequest::new(vec![0.25, 0.75, 1.0], 1)).unwrap();
    let text = samples_csv(&out.windows, &out.conditions).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 8);
    let (w, c) = parse_samples_csv(&text).unwrap();
    assert_eq!(w, out.windows);
    assert_eq!(c, out.conditions);

    let missing: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
    assert!(matches!(
        parse_samples_csv(&missing),
        Err(Error::Parse { .. })
    ));
    let bad = text.replacen("0,0,0,", "0,0,x,", 1);
    assert!(matches!(
        parse_samples_csv(&bad),
        Err(Error::Parse { line: 2, .. })
    ));
}
