//! Run-to-failure trajectories, sliding windows with health-indicator
//! conditions, min-max normalisation, and seeded synthetic corpora.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::Array;

/// 1-based C-MAPSS sensor indices removed because they are constant or
/// uninformative.
pub const DROPPED_SENSORS: [usize; 7] = [1, 5, 6, 10, 16, 18, 19];

/// Columns per C-MAPSS row: unit, cycle, 3 settings, 21 sensors.
pub const CMAPSS_COLUMNS: usize = 26;

/// Default remaining-life cap for the condition plateau.
pub const RUL_CAP: f64 = 125.0;

/// One unit's readings; `readings[i]` is cycle `i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub unit: u32,
    pub readings: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet {
    pub channel_names: Vec<String>,
    pub units: Vec<Trajectory>,
}

impl TrajectorySet {
    pub fn channels(&self) -> usize {
        self.channel_names.len()
    }
}

/// Names of the 14 retained C-MAPSS sensors.
pub fn cmapss_channel_names() -> Vec<String> {
    (1..=21)
        .filter(|s| !DROPPED_SENSORS.contains(s))
        .map(|s| format!("s{s}"))
        .collect()
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_cell(cell: &str, line: usize) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| Error::Parse {
        line,
        message: format!("non-numeric cell `{cell}`"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("non-finite cell `{cell}`"),
        });
    }
    Ok(v)
}

fn parse_id(cell: &str, line: usize, what: &str) -> Result<u32> {
    let v = parse_cell(cell, line)?;
    if v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(Error::Parse {
            line,
            message: format!("{what} must be a positive integer, got `{cell}`"),
        });
    }
    Ok(v as u32)
}

/// Groups `(unit, cycle, values)` rows into trajectories, checking that each
/// unit's cycles run 1, 2, 3, … without gaps.
fn group_rows(rows: Vec<(usize, u32, u32, Vec<f64>)>) -> Result<Vec<Trajectory>> {
    let mut units: Vec<Trajectory> = Vec::new();
    for (line, unit, cycle, values) in rows {
        let idx = match units.iter().position(|u| u.unit == unit) {
            Some(i) => i,
            None => {
                units.push(Trajectory {
                    unit,
                    readings: Vec::new(),
                });
                units.len() - 1
            }
        };
        let traj = &mut units[idx];
        if cycle as usize != traj.readings.len() + 1 {
            return Err(Error::Parse {
                line,
                message: format!(
                    "unit {unit}: expected cycle {}, got {cycle}",
                    traj.readings.len() + 1
                ),
            });
        }
        traj.readings.push(values);
    }
    Ok(units)
}

/// Parses C-MAPSS text (whitespace- or comma-delimited) and keeps the 14
/// informative sensors.
pub fn parse_cmapss(text: &str) -> Result<TrajectorySet> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let cells: Vec<&str> = raw
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|c| !c.is_empty())
            .collect();
        if cells.is_empty() {
            continue;
        }
        if cells.len() != CMAPSS_COLUMNS {
            return Err(Error::Parse {
                line,
                message: format!("expected {CMAPSS_COLUMNS} columns, got {}", cells.len()),
            });
        }
        let unit = parse_id(cells[0], line, "unit")?;
        let cycle = parse_id(cells[1], line, "cycle")?;
        let mut values = Vec::with_capacity(14);
        for (s, cell) in cells[5..].iter().enumerate() {
            let v = parse_cell(cell, line)?;
            if !DROPPED_SENSORS.contains(&(s + 1)) {
                values.push(v);
            }
        }
        for cell in &cells[2..5] {
            parse_cell(cell, line)?;
        }
        rows.push((line, unit, cycle, values));
    }
    if rows.is_empty() {
        return Err(Error::Format {
            offset: 0,
            message: "no data rows".into(),
        });
    }
    Ok(TrajectorySet {
        channel_names: cmapss_channel_names(),
        units: group_rows(rows)?,
    })
}

pub fn load_cmapss(path: impl AsRef<Path>) -> Result<TrajectorySet> {
    parse_cmapss(&read_text(path.as_ref())?)
}

/// Parses the generic CSV layout: a header `unit,cycle,<channel names…>`
/// followed by one row per cycle. Used for non-C-MAPSS channel counts.
pub fn parse_raw(text: &str) -> Result<TrajectorySet> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Format {
        offset: 0,
        message: "no header row".into(),
    })?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.len() < 3 || names[0] != "unit" || names[1] != "cycle" {
        return Err(Error::Parse {
            line: 1,
            message: "header must start with `unit,cycle` and name at least one channel".into(),
        });
    }
    let channels = names.len() - 2;
    let mut rows = Vec::new();
    for (i, raw) in lines {
        let line = i + 1;
        let cells: Vec<&str> = raw.split(',').map(str::trim).collect();
        if cells.len() != channels + 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} columns, got {}", channels + 2, cells.len()),
            });
        }
        let unit = parse_id(cells[0], line, "unit")?;
        let cycle = parse_id(cells[1], line, "cycle")?;
        let values = cells[2..]
            .iter()
            .map(|c| parse_cell(c, line))
            .collect::<Result<Vec<_>>>()?;
        rows.push((line, unit, cycle, values));
    }
    if rows.is_empty() {
        return Err(Error::Format {
            offset: header.len() as u64,
            message: "no data rows".into(),
        });
    }
    Ok(TrajectorySet {
        channel_names: names[2..].to_vec(),
        units: group_rows(rows)?,
    })
}

pub fn load_raw(path: impl AsRef<Path>) -> Result<TrajectorySet> {
    parse_raw(&read_text(path.as_ref())?)
}

/// Renders a 14-channel set in the 26-column C-MAPSS layout. Settings and
/// dropped sensors are written as zeros.
pub fn format_cmapss(set: &TrajectorySet) -> Result<String> {
    if set.channels() != 14 {
        return Err(Error::validation(format!(
            "the C-MAPSS layout holds 14 retained sensors, set has {}",
            set.channels()
        )));
    }
    let mut out = String::new();
    for traj in &set.units {
        for (i, row) in traj.readings.iter().enumerate() {
            write!(out, "{} {} 0 0 0", traj.unit, i + 1).unwrap();
            let mut kept = row.iter();
            for s in 1..=21 {
                if DROPPED_SENSORS.contains(&s) {
                    out.push_str(" 0");
                } else {
                    write!(out, " {:?}", kept.next().unwrap()).unwrap();
                }
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn format_raw(set: &TrajectorySet) -> String {
    let mut out = String::from("unit,cycle");
    for name in &set.channel_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for traj in &set.units {
        for (i, row) in traj.readings.iter().enumerate() {
            write!(out, "{},{}", traj.unit, i + 1).unwrap();
            for v in row {
                write!(out, ",{v:?}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

/// Condition per cycle: `min(end - cycle, cap) / cap`.
pub fn compute_condition(len: usize, cap: f64) -> Result<Vec<f64>> {
    if !(cap > 0.0) {
        return Err(Error::config(format!(
            "condition cap must be positive, got {cap}"
        )));
    }
    Ok((1..=len)
        .map(|cycle| ((len - cycle) as f64).min(cap) / cap)
        .collect())
}

/// Per-channel min/max used for the `[-1, 1]` transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormStats {
    /// Statistics over every value of every window, per channel.
    pub fn fit(windows: &[Array<f64>]) -> Result<Self> {
        let first = windows
            .first()
            .ok_or_else(|| Error::validation("cannot fit normalisation on zero windows"))?;
        let c = first.shape()[0];
        let mut min = vec![f64::INFINITY; c];
        let mut max = vec![f64::NEG_INFINITY; c];
        for w in windows {
            if w.shape()[0] != c {
                return Err(Error::shape("windows disagree on channel count"));
            }
            let l = w.shape()[1];
            for (ch, row) in w.data().chunks(l).enumerate() {
                for &v in row {
                    min[ch] = min[ch].min(v);
                    max[ch] = max[ch].max(v);
                }
            }
        }
        Ok(Self { min, max })
    }

    pub fn channels(&self) -> usize {
        self.min.len()
    }

    pub fn normalize_value(&self, ch: usize, v: f64) -> f64 {
        let span = self.max[ch] - self.min[ch];
        if span > 0.0 {
            2.0 * (v - self.min[ch]) / span - 1.0
        } else {
            0.0
        }
    }

    pub fn denormalize_value(&self, ch: usize, v: f64) -> f64 {
        let span = self.max[ch] - self.min[ch];
        (v + 1.0) * 0.5 * span + self.min[ch]
    }

    fn map(&self, w: &Array<f64>, f: impl Fn(usize, f64) -> f64) -> Result<Array<f64>> {
        if w.ndim() != 2 || w.shape()[0] != self.channels() {
            return Err(Error::shape(format!(
                "window {:?} does not match {} normalised channels",
                w.shape(),
                self.channels()
            )));
        }
        let l = w.shape()[1];
        let data = w
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i / l, v))
            .collect();
        Array::new(w.shape().to_vec(), data)
    }

    pub fn normalize(&self, w: &Array<f64>) -> Result<Array<f64>> {
        self.map(w, |ch, v| self.normalize_value(ch, v))
    }

    pub fn denormalize(&self, w: &Array<f64>) -> Result<Array<f64>> {
        self.map(w, |ch, v| self.denormalize_value(ch, v))
    }
}

/// Fixed-length windows with one condition each.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSet {
    /// Each `[C, L]`.
    pub windows: Vec<Array<f64>>,
    pub conditions: Vec<f64>,
    /// `(unit, end cycle)` per window; synthetic corpora use `(0, index)`.
    pub provenance: Vec<(u32, u32)>,
    /// Present once the windows have been normalised.
    pub stats: Option<NormStats>,
}

impl WindowSet {
    pub fn new(windows: Vec<Array<f64>>, conditions: Vec<f64>) -> Result<Self> {
        let provenance = (0..windows.len() as u32).map(|i| (0, i)).collect();
        let set = Self {
            windows,
            conditions,
            provenance,
            stats: None,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.windows.is_empty() {
            return Err(Error::validation("window set is empty"));
        }
        if self.conditions.len() != self.windows.len()
            || self.provenance.len() != self.windows.len()
        {
            return Err(Error::validation(
                "every window needs exactly one condition",
            ));
        }
        let shape = self.windows[0].shape().to_vec();
        if shape.len() != 2 {
            return Err(Error::shape(format!(
                "windows must be [C, L], got {shape:?}"
            )));
        }
        if let Some(w) = self.windows.iter().find(|w| w.shape() != shape.as_slice()) {
            return Err(Error::shape(format!(
                "mixed window shapes {:?} and {:?}",
                shape,
                w.shape()
            )));
        }
        if let Some(c) = self.conditions.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::validation(format!("condition {c} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.windows.first().map_or(0, |w| w.shape()[0])
    }

    pub fn length(&self) -> usize {
        self.windows.first().map_or(0, |w| w.shape()[1])
    }

    /// The windows at `idx`, sharing this set's statistics.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            windows: idx.iter().map(|&i| self.windows[i].clone()).collect(),
            conditions: idx.iter().map(|&i| self.conditions[i]).collect(),
            provenance: idx.iter().map(|&i| self.provenance[i]).collect(),
            stats: self.stats.clone(),
        }
    }

    /// Fits statistics on this set and maps every window to `[-1, 1]`.
    pub fn normalize(&self) -> Result<Self> {
        let stats = NormStats::fit(&self.windows)?;
        self.normalize_with(stats)
    }

    /// Applies given (training-set) statistics. Held-out values may leave
    /// `[-1, 1]`; see [`clamp_unit`].
    pub fn normalize_with(&self, stats: NormStats) -> Result<Self> {
        let windows = self
            .windows
            .iter()
            .map(|w| stats.normalize(w))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            windows,
            conditions: self.conditions.clone(),
            provenance: self.provenance.clone(),
            stats: Some(stats),
        })
    }

    pub fn denormalize(&self) -> Result<Self> {
        let stats = self
            .stats
            .as_ref()
            .ok_or_else(|| Error::validation("window set carries no normalisation statistics"))?;
        let windows = self
            .windows
            .iter()
            .map(|w| stats.denormalize(w))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            windows,
            conditions: self.conditions.clone(),
            provenance: self.provenance.clone(),
            stats: None,
        })
    }
}

/// Clamps a normalised window into `[-1, 1]` before it enters diffusion.
pub fn clamp_unit(w: &Array<f64>) -> Array<f64> {
    w.map(|v| v.clamp(-1.0, 1.0))
}

/// Sliding windows of `length` cycles ending at cycles `length`,
/// `length + stride`, … of each unit. The window condition is the condition
/// at its final cycle.
pub fn window(set: &TrajectorySet, length: usize, stride: usize, cap: f64) -> Result<WindowSet> {
    if length == 0 || stride == 0 {
        return Err(Error::config("window length and stride must be at least 1"));
    }
    let c = set.channels();
    let mut out = WindowSet {
        windows: Vec::new(),
        conditions: Vec::new(),
        provenance: Vec::new(),
        stats: None,
    };
    for traj in &set.units {
        if traj.len() < length {
            continue;
        }
        let cond = compute_condition(traj.len(), cap)?;
        let mut end = length;
        while end <= traj.len() {
            let mut data = vec![0.0; c * length];
            for (j, row) in traj.readings[end - length..end].iter().enumerate() {
                if row.len() != c {
                    return Err(Error::shape(format!(
                        "unit {} has {} channels, expected {c}",
                        traj.unit,
                        row.len()
                    )));
                }
                for ch in 0..c {
                    data[ch * length + j] = row[ch];
                }
            }
            out.windows.push(Array::new(vec![c, length], data)?);
            out.conditions.push(cond[end - 1]);
            out.provenance.push((traj.unit, end as u32));
            end += stride;
        }
    }
    if out.windows.is_empty() {
        return Err(Error::validation(format!(
            "no unit has at least {length} cycles"
        )));
    }
    Ok(out)
}

/// Settings for [`synth_degradation`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub units: usize,
    pub channels: usize,
    pub min_cycles: usize,
    pub max_cycles: usize,
    pub noise_std: f64,
    /// Multiplier on the per-unit sinusoid amplitude (0 disables it).
    pub wave_scale: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            units: 50,
            channels: 14,
            min_cycles: 128,
            max_cycles: 256,
            noise_std: 0.05,
            wave_scale: 1.0,
            seed: 0,
        }
    }
}

/// Run-to-failure units whose channels follow smooth monotone wear curves
/// `offset + scale · (cycle / life)^p`, a unit-specific sinusoid, and
/// Gaussian noise.
pub fn synth_degradation(cfg: &SynthConfig) -> Result<TrajectorySet> {
    if cfg.units == 0 || cfg.channels == 0 || cfg.min_cycles == 0 {
        return Err(Error::config(
            "units, channels and cycles must be at least 1",
        ));
    }
    if cfg.max_cycles < cfg.min_cycles {
        return Err(Error::config("max_cycles must be at least min_cycles"));
    }
    if !(cfg.noise_std >= 0.0 && cfg.noise_std.is_finite()) {
        return Err(Error::config("noise_std must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let offsets: Vec<f64> = (0..cfg.channels)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let noise = Normal::new(0.0, cfg.noise_std).expect("validated std");
    let mut units = Vec::with_capacity(cfg.units);
    for u in 0..cfg.units {
        let life = rng.random_range(cfg.min_cycles..=cfg.max_cycles);
        // (scale, exponent, wave amplitude, wave period in cycles)
        let shape: Vec<(f64, f64, f64, f64)> = (0..cfg.channels)
            .map(|_| {
                (
                    rng.random_range(0.5..2.0),
                    rng.random_range(1.5..3.0),
                    cfg.wave_scale * rng.random_range(0.02..0.08),
                    rng.random_range(8.0..32.0),
                )
            })
            .collect();
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let readings = (1..=life)
            .map(|cycle| {
                let wear = cycle as f64 / life as f64;
                (0..cfg.channels)
                    .map(|ch| {
                        let (scale, p, amp, period) = shape[ch];
                        let trend = offsets[ch] + scale * wear.powf(p);
                        let wave =
                            amp * (std::f64::consts::TAU * cycle as f64 / period + phase).sin();
                        trend + wave + noise.sample(&mut rng)
                    })
                    .collect()
            })
            .collect();
        units.push(Trajectory {
            unit: u as u32 + 1,
            readings,
        });
    }
    Ok(TrajectorySet {
        channel_names: (1..=cfg.channels).map(|c| format!("c{c}")).collect(),
        units,
    })
}

/// Windows whose mean over channels and time equals their condition
/// exactly: `c + zero-mean wave + zero-mean noise` per channel.
pub fn condition_corpus(
    count: usize,
    channels: usize,
    length: usize,
    noise_std: f64,
    seed: u64,
) -> Result<WindowSet> {
    if count == 0 || channels == 0 || length < 2 {
        return Err(Error::config(
            "condition corpus needs count, channels >= 1 and length >= 2",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_std.max(0.0)).map_err(|e| Error::config(e.to_string()))?;
    let mut windows = Vec::with_capacity(count);
    let mut conditions = Vec::with_capacity(count);
    for _ in 0..count {
        let c: f64 = rng.random_range(0.0..=1.0);
        let mut data = Vec::with_capacity(channels * length);
        for ch in 0..channels {
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let freq = (ch + 1) as f64;
            let mut row: Vec<f64> = (0..length)
                .map(|j| {
                    0.3 * (std::f64::consts::TAU * freq * j as f64 / length as f64 + phase).sin()
                        + noise.sample(&mut rng)
                })
                .collect();
            let m = row.iter().sum::<f64>() / length as f64;
            row.iter_mut().for_each(|v| *v += c - m);
            data.extend(row);
        }
        windows.push(Array::new(vec![channels, length], data)?);
        conditions.push(c);
    }
    WindowSet::new(windows, conditions)
}

/// Small smooth corpus for overfitting checks: window `i` is a set of
/// sinusoids whose frequency and phase depend on its condition `i/(n-1)`.
pub fn sinusoid_windows(count: usize, channels: usize, length: usize) -> Result<WindowSet> {
    if count == 0 || channels == 0 || length == 0 {
        return Err(Error::config("sinusoid corpus needs positive sizes"));
    }
    let mut windows = Vec::with_capacity(count);
    let mut conditions = Vec::with_capacity(count);
    for i in 0..count {
        let c = if count == 1 {
            0.0
        } else {
            i as f64 / (count - 1) as f64
        };
        let mut data = Vec::with_capacity(channels * length);
        for ch in 0..channels {
            let freq = 1.0 + c + 0.5 * ch as f64;
            let phase = std::f64::consts::PI * c + ch as f64;
            data.extend((0..length).map(|j| {
                0.8 * (std::f64::consts::TAU * freq * j as f64 / length as f64 + phase).sin()
            }));
        }
        windows.push(Array::new(vec![channels, length], data)?);
        conditions.push(c);
    }
    WindowSet::new(windows, conditions)
}
