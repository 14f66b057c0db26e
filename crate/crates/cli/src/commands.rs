//! Subcommand implementations.

use std::path::Path;

use diffmts_core::data::{
    format_cmapss, format_raw, load_cmapss, load_raw, synth_degradation, window, SynthConfig,
    TrajectorySet, WindowSet,
};
use diffmts_core::eval::{evaluate, pca_csv};
use diffmts_core::sample::{load_samples_csv, sample, samples_csv, SampleManifest, SampleRequest};
use diffmts_core::train::{load_checkpoint, loss_csv, save_checkpoint, train_until, TrainState};
use serde_json::json;

use crate::args::{EvalArgs, GenDataArgs, ReportArgs, SampleArgs, TrainArgs};
use crate::config::{DataFormat, RunConfig};
use crate::error::{io_err, CliError, CliResult};
use crate::manifest::{sha256_file, sha256_hex, sidecar, write_json, write_text, VERSION};
use crate::report::{comparison_table, gnuplot_scripts, parse_entry};

pub const SEED_ENV: &str = "DIFFMTS_SEED";

/// `flag`, else `DIFFMTS_SEED`, else `default`.
pub fn resolve_seed(flag: Option<u64>, default: u64) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(default),
    }
}

pub fn load_trajectories(path: &Path, format: DataFormat) -> CliResult<TrajectorySet> {
    Ok(match format.resolve(path) {
        DataFormat::Raw => load_raw(path)?,
        _ => load_cmapss(path)?,
    })
}

pub fn gen_data(args: &GenDataArgs) -> CliResult<()> {
    let cfg = SynthConfig {
        units: args.units,
        channels: args.channels,
        min_cycles: args.min_cycles,
        max_cycles: args.max_cycles,
        noise_std: args.noise_std,
        wave_scale: args.wave_scale,
        seed: resolve_seed(args.seed, 0)?,
    };
    let set = synth_degradation(&cfg)?;
    let format = args.format.resolve(&args.out);
    let text = match format {
        DataFormat::Raw => format_raw(&set),
        _ => format_cmapss(&set)?,
    };
    write_text(&args.out, &text)?;
    write_json(
        &sidecar(&args.out, "json"),
        &json!({
            "version": VERSION,
            "command": "gen-data",
            "generator": cfg,
            "format": format,
            "channel_names": set.channel_names,
            "units": set.units.len(),
            "sha256": sha256_hex(text.as_bytes()),
        }),
    )
}

/// Loads a config file, remembering whether it pins the training seed.
fn load_config(path: Option<&Path>) -> CliResult<(RunConfig, bool)> {
    match path {
        None => Ok((RunConfig::default(), false)),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            let cfg = RunConfig::from_json(&text)?;
            let pinned = serde_json::from_str::<serde_json::Value>(&text)
                .ok()
                .and_then(|v| v.pointer("/train/seed").cloned())
                .is_some();
            Ok((cfg, pinned))
        }
    }
}

/// Applies command-line overrides to a loaded configuration.
pub fn train_config(args: &TrainArgs) -> CliResult<RunConfig> {
    let (mut cfg, pinned) = load_config(args.config.as_deref())?;
    if let Some(d) = &args.data {
        cfg.data.train_path = Some(d.clone());
    }
    if let Some(f) = args.format {
        cfg.data.format = f;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(b) = args.batch_size {
        cfg.train.batch_size = b;
    }
    if let Some(lr) = args.lr {
        cfg.train.adam.lr = lr;
    }
    cfg.train.seed = match args.seed {
        Some(s) => s,
        None if pinned => cfg.train.seed,
        None => resolve_seed(None, cfg.train.seed)?,
    };
    if let Some(t) = args.steps {
        cfg.train.schedule.steps = t;
    }
    if let Some(k) = args.schedule {
        cfg.train.schedule.kind = k.into();
    }
    if let Some(v) = args.variant {
        cfg.variant = v;
    }
    if let Some(l) = args.window_length {
        cfg.model.length = l;
    }
    if let Some(s) = args.stride {
        cfg.data.stride = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let cfg = train_config(args)?;
    let (model, train_cfg) = cfg.effective();
    let data_path = cfg.data.train_path.clone().ok_or_else(|| {
        CliError::Usage("no training data: pass --data or set data.train_path".into())
    })?;
    let set = load_trajectories(&data_path, cfg.data.format)?;
    if set.channels() != model.in_channels {
        return Err(CliError::Validation(format!(
            "dataset has {} channels but model.in_channels is {}",
            set.channels(),
            model.in_channels
        )));
    }
    let windows = window(&set, model.length, cfg.data.stride, cfg.data.rul_cap)?;

    let mut state = match &args.resume {
        Some(path) => {
            let mut s = load_checkpoint(path)?;
            if s.model != model {
                return Err(CliError::Validation(format!(
                    "checkpoint {} was trained with a different model configuration",
                    path.display()
                )));
            }
            s.train.epochs = train_cfg.epochs;
            s
        }
        None => TrainState::new(model, train_cfg.clone(), None)?,
    };
    let data = match &state.stats {
        Some(stats) => windows.normalize_with(stats.clone())?,
        None => windows.normalize()?,
    };
    state.stats = data.stats.clone();

    std::fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    let ckpt = args.out.join("model.ckpt");
    let epochs = train_cfg.epochs;
    let quiet = args.quiet;
    train_until(&mut state, &data, epochs, |s, log| {
        if !quiet {
            eprintln!(
                "epoch {}/{epochs}  l_noise={:.5}  l_mmd={:.5}  l_total={:.5}  omega={:.4}",
                log.epoch, log.l_noise, log.l_mmd, log.l_total, log.omega
            );
        }
        save_checkpoint(s, &ckpt)
    })?;
    if state.epoch == 0 || !ckpt.exists() {
        save_checkpoint(&state, &ckpt)?;
    }
    let loss_path = args.out.join("loss.csv");
    write_text(&loss_path, &loss_csv(&state.history))?;

    let config_json = cfg.to_json();
    write_json(
        &args.out.join("train_manifest.json"),
        &json!({
            "version": VERSION,
            "command": "train",
            "config": cfg,
            "config_sha256": sha256_hex(config_json.as_bytes()),
            "data": data_path,
            "data_sha256": sha256_file(&data_path)?,
            "windows": data.len(),
            "resumed_from": args.resume,
            "checkpoint": ckpt,
            "checkpoint_sha256": sha256_file(&ckpt)?,
            "loss_log": loss_path,
            "epochs": state.epoch,
            "steps": state.step,
            "final": state.history.last(),
        }),
    )
}

fn parse_numbers(text: &str) -> CliResult<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Validation(format!("`{s}` is not a number")))
        })
        .collect()
}

/// Conditions for a sample request from the `--conditions`/`--count` pair.
pub fn resolve_conditions(args: &SampleArgs, length: usize) -> CliResult<Vec<f64>> {
    let listed = match args.conditions.as_deref() {
        None => None,
        Some("match-dataset") => {
            let path = args
                .data
                .as_ref()
                .ok_or_else(|| CliError::Usage("match-dataset needs --data".into()))?;
            let set = load_trajectories(path, args.format)?;
            Some(window(&set, length, args.stride, args.rul_cap)?.conditions)
        }
        Some(spec) => match spec.strip_prefix('@') {
            Some(file) => {
                let p = Path::new(file);
                Some(parse_numbers(
                    &std::fs::read_to_string(p).map_err(|e| io_err(p, e))?,
                )?)
            }
            None => Some(parse_numbers(spec)?),
        },
    };
    let conds = match (listed, args.count) {
        (None, None) => return Err(CliError::Usage("pass --conditions or --count".into())),
        (None, Some(n)) if n <= 1 => vec![0.0; n],
        (None, Some(n)) => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
        (Some(c), Some(n)) if c.len() == 1 => vec![c[0]; n],
        (Some(c), Some(n)) if c.len() != n => {
            return Err(CliError::Validation(format!(
                "--count {n} does not match {} listed conditions",
                c.len()
            )))
        }
        (Some(c), _) => c,
    };
    if conds.is_empty() {
        return Err(CliError::Validation("no conditions to sample".into()));
    }
    Ok(conds)
}

pub fn sample_cmd(args: &SampleArgs) -> CliResult<()> {
    let state = load_checkpoint(&args.checkpoint)?;
    let conditions = resolve_conditions(args, state.model.length)?;
    let req = SampleRequest {
        conditions,
        seed: resolve_seed(args.seed, 0)?,
        guidance_off: args.guidance_off,
    };
    let out = sample(&state, &req)?;
    let text = samples_csv(&out.windows, &out.conditions)?;
    write_text(&args.out, &text)?;
    let manifest = SampleManifest {
        seed: req.seed,
        checkpoint_sha256: sha256_file(&args.checkpoint)?,
        schedule: state.train.schedule,
        count: req.count(),
        guidance_off: req.guidance_off,
        conditions: req.conditions.clone(),
    };
    write_json(
        &sidecar(&args.out, "manifest.json"),
        &json!({
            "version": VERSION,
            "command": "sample",
            "checkpoint": args.checkpoint,
            "sample": manifest,
            "forward_calls_per_sample": out.forward_calls,
            "output_sha256": sha256_hex(text.as_bytes()),
        }),
    )
}

/// Real and synthetic windows on a shared scale (statistics fitted on the
/// real windows).
pub fn eval_sets(args: &EvalArgs, cfg: &RunConfig) -> CliResult<(WindowSet, WindowSet)> {
    let (synth_windows, synth_conds) = load_samples_csv(&args.synth)?;
    let (c, l) = (synth_windows[0].shape()[0], synth_windows[0].shape()[1]);
    let set = load_trajectories(&args.real, args.format.unwrap_or(cfg.data.format))?;
    if set.channels() != c {
        return Err(CliError::Validation(format!(
            "real data has {} channels x {l} steps but synthetic windows are {c}x{l}",
            set.channels()
        )));
    }
    let stride = args.stride.unwrap_or(cfg.data.stride);
    let real = window(&set, l, stride, cfg.data.rul_cap)?.normalize()?;
    let stats = real.stats.clone().expect("normalize stores statistics");
    let synth = WindowSet::new(synth_windows, synth_conds)?.normalize_with(stats)?;
    Ok((real, synth))
}

pub fn eval_cmd(args: &EvalArgs) -> CliResult<()> {
    let (mut cfg, _) = load_config(args.config.as_deref())?;
    if let Some(seeds) = &args.seeds {
        cfg.eval.seeds = seeds.clone();
    }
    if let Some(e) = args.epochs {
        cfg.eval.evaluator.epochs = e;
    }
    if let Some(h) = args.hidden {
        cfg.eval.evaluator.hidden = h;
    }
    cfg.eval.evaluator.validate()?;
    let (real, synth) = eval_sets(args, &cfg)?;
    let report = match args.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Validation(format!("worker pool: {e}")))?
            .install(|| evaluate(&real, &synth, &cfg.eval))?,
        None => evaluate(&real, &synth, &cfg.eval)?,
    };
    let report_path = args.out.join("eval_report.json");
    write_json(&report_path, &report)?;
    let pca_path = args.out.join("pca.csv");
    write_text(&pca_path, &pca_csv(&real, &synth)?)?;
    write_json(
        &args.out.join("eval_manifest.json"),
        &json!({
            "version": VERSION,
            "command": "eval",
            "real": args.real,
            "real_sha256": sha256_file(&args.real)?,
            "synth": args.synth,
            "synth_sha256": sha256_file(&args.synth)?,
            "eval": cfg.eval,
            "stride": args.stride.unwrap_or(cfg.data.stride),
            "report": report_path,
            "pca": pca_path,
        }),
    )
}

pub fn report_cmd(args: &ReportArgs) -> CliResult<()> {
    if args.entries.is_empty() && args.plots.is_none() {
        return Err(CliError::Usage(
            "pass at least one --entry or --plots".into(),
        ));
    }
    if !args.entries.is_empty() {
        let rows = args
            .entries
            .iter()
            .map(|e| parse_entry(e))
            .collect::<CliResult<Vec<_>>>()?;
        let table = comparison_table(&rows);
        match &args.out {
            Some(p) => write_text(p, &table)?,
            None => print!("{table}"),
        }
    }
    if let Some(dir) = &args.plots {
        for (name, script) in gnuplot_scripts(
            args.loss.as_deref(),
            args.pca.as_deref(),
            args.samples.as_deref(),
        ) {
            write_text(&dir.join(name), &script)?;
        }
    }
    Ok(())
}
