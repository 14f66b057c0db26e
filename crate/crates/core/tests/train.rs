use diffmts_core::data::{condition_corpus, WindowSet};
use diffmts_core::schedule::{ScheduleKind, ScheduleSpec};
use diffmts_core::tdr_unet::{ModelConfig, OMEGA_LOGIT};
use diffmts_core::train::{
    decode, encode, evaluate_noise_loss, load_checkpoint, loss_csv, sample_timestep,
    save_checkpoint, train, train_until, OmegaMode, TrainConfig, TrainState,
};
use diffmts_core::Error;
use rand::SeedableRng;
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

fn tiny_train(seed: u64, epochs: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 5,
        seed,
        schedule: ScheduleSpec {
            kind: ScheduleKind::Cosine,
            steps: 20,
            ..ScheduleSpec::default()
        },
        ..TrainConfig::default()
    }
}

fn corpus() -> WindowSet {
    condition_corpus(12, 2, 8, 0.1, 3).unwrap()
}

#[test]
fn same_seed_same_run() {
    let data = corpus();
    let a = train(&data, tiny_model(), tiny_train(1, 3)).unwrap();
    let b = train(&data, tiny_model(), tiny_train(1, 3)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.history.len(), 3);
    assert_eq!(a.step, 9);
    let c = train(&data, tiny_model(), tiny_train(2, 3)).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let data = corpus();
    let straight = train(&data, tiny_model(), tiny_train(4, 4)).unwrap();

    let mut first = TrainState::new(tiny_model(), tiny_train(4, 4), None).unwrap();
    train_until(&mut first, &data, 2, |_, _| Ok(())).unwrap();
    let mut resumed = decode(&encode(&first).unwrap()).unwrap();
    train_until(&mut resumed, &data, 4, |_, _| Ok(())).unwrap();
    assert_eq!(resumed.params, straight.params);
    assert_eq!(resumed.adam, straight.adam);
    assert_eq!(resumed.history, straight.history);
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let data = corpus().normalize().unwrap();
    let mut state = TrainState::new(tiny_model(), tiny_train(5, 2), data.stats.clone()).unwrap();
    train_until(&mut state, &data, 2, |_, _| Ok(())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&state, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, state);
    for ((n1, a), (n2, b)) in back.params.iter().zip(state.params.iter()) {
        assert_eq!(n1, n2);
        let bits = |x: &[f32]| x.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a.data()), bits(b.data()));
    }
}

#[test]
fn truncated_checkpoint_is_format_error() {
    let state = TrainState::new(tiny_model(), tiny_train(6, 1), None).unwrap();
    let bytes = encode(&state).unwrap();
    for cut in [0, 3, 5, 9, bytes.len() / 2, bytes.len() - 1] {
        match decode(&bytes[..cut]) {
            Err(Error::Format { offset, .. }) => {
                assert!(offset <= cut as u64, "cut {cut}: offset {offset}")
            }
            other => panic!("cut {cut}: {other:?}"),
        }
    }
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(decode(&extra), Err(Error::Format { .. })));
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(
        decode(&magic),
        Err(Error::Format { offset: 0, .. })
    ));
}

#[test]
fn version_mismatch_is_reported() {
    let state = TrainState::new(tiny_model(), tiny_train(7, 1), None).unwrap();
    let mut bytes = encode(&state).unwrap();
    bytes[4..6].copy_from_slice(&9u16.to_le_bytes());
    assert!(matches!(
        decode(&bytes),
        Err(Error::Version {
            found: 9,
            expected: 1
        })
    ));
}

#[test]
fn timesteps_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let steps = 50;
    let draws = 200_000;
    let mut counts = vec![0u64; steps + 1];
    for _ in 0..draws {
        let t = sample_timestep(&mut rng, steps);
        assert!((1..=steps).contains(&t));
        counts[t] += 1;
    }
    let p = 1.0 / steps as f64;
    let mean = draws as f64 * p;
    let sd = (draws as f64 * p * (1.0 - p)).sqrt();
    for (t, &c) in counts.iter().enumerate().skip(1) {
        assert!((c as f64 - mean).abs() < 5.0 * sd, "t = {t}: {c} vs {mean}");
    }
}

#[test]
fn losses_stay_finite_across_seeds() {
    let data = corpus();
    for seed in 0..5 {
        let s = train(&data, tiny_model(), tiny_train(seed, 2)).unwrap();
        for h in &s.history {
            assert!(h.l_noise.is_finite() && h.l_mmd.is_finite() && h.l_total.is_finite());
            assert!(h.omega > 0.0 && h.omega < 1.0);
        }
        assert!(s
            .params
            .iter()
            .all(|(_, a)| a.data().iter().all(|v| v.is_finite())));
    }
}

#[test]
fn fixed_omega_leaves_logit_untouched() {
    let data = corpus();
    let cfg = TrainConfig {
        omega: OmegaMode::Fixed(0.3),
        ..tiny_train(9, 2)
    };
    let init = TrainState::new(tiny_model(), cfg.clone(), None).unwrap();
    let s = train(&data, tiny_model(), cfg).unwrap();
    assert_eq!(
        s.params.get(OMEGA_LOGIT).unwrap(),
        init.params.get(OMEGA_LOGIT).unwrap()
    );
    assert!(s.history.iter().all(|h| (h.omega - 0.3).abs() < 1e-6));

    let learned = train(&data, tiny_model(), tiny_train(9, 2)).unwrap();
    assert_ne!(
        learned.params.get(OMEGA_LOGIT).unwrap(),
        init.params.get(OMEGA_LOGIT).unwrap()
    );
}

#[test]
fn noise_loss_evaluation_is_repeatable() {
    let data = corpus();
    let s = TrainState::new(tiny_model(), tiny_train(10, 1), None).unwrap();
    let sched = s.schedule().unwrap();
    let a = evaluate_noise_loss(&s.model, &s.params, &sched, &data, 2, 77).unwrap();
    let b = evaluate_noise_loss(&s.model, &s.params, &sched, &data, 2, 77).unwrap();
    assert_eq!(a, b);
    // zero head: the initial prediction is 0, so the loss is the noise power
    assert!((a - 1.0).abs() < 0.2, "{a}");
}

#[test]
fn mismatched_windows_rejected() {
    let data = condition_corpus(4, 3, 8, 0.1, 1).unwrap();
    assert!(matches!(
        train(&data, tiny_model(), tiny_train(0, 1)),
        Err(Error::Shape(_))
    ));
}

#[test]
fn bad_config_rejected() {
    let cfg = TrainConfig {
        omega: OmegaMode::Fixed(1.5),
        ..TrainConfig::default()
    };
    assert!(matches!(
        TrainState::new(tiny_model(), cfg, None),
        Err(Error::Config(_))
    ));
    let cfg = TrainConfig {
        batch_size: 0,
        ..TrainConfig::default()
    };
    assert!(cfg.validate().is_err());
}

#[test]
fn loss_log_csv_layout() {
    let s = train(&corpus(), tiny_model(), tiny_train(11, 2)).unwrap();
    let csv = loss_csv(&s.history);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,l_noise,l_mmd,l_total,omega");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("2,"));
    assert_eq!(lines[1].split(',').count(), 5);
}

#[test]
fn train_config_json_rejects_unknown_keys() {
    let ok: TrainConfig =
        serde_json::from_str(r#"{"epochs": 3, "omega": {"fixed": 0.2}}"#).unwrap();
    assert_eq!(ok.omega, OmegaMode::Fixed(0.2));
    assert_eq!(ok.batch_size, 32);
    let learned: TrainConfig = serde_json::from_str(r#"{"omega": "learned"}"#).unwrap();
    assert_eq!(learned.omega, OmegaMode::Learned);
    assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch": 3}"#).is_err());
}
