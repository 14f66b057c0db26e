//! Binary checkpoint files.
//!
//! Layout (little-endian): magic `DMTS`, `u16` version, `u32` length of a
//! UTF-8 JSON metadata block, the metadata, then `array_count` records of
//! `u16` name length, name, `u8` dtype code, `u8` ndim, `u32` dims, raw
//! values.

use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EpochLog, TrainConfig, TrainState};
use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::numcore::{AdamState, Array, DType, ParamSet, Real};
use crate::tdr_unet::ModelConfig;

pub const MAGIC: &[u8; 4] = b"DMTS";
pub const VERSION: u16 = 1;

/// Exact position of a ChaCha8 stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    /// Word position, decimal (a `u128`).
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        use rand::SeedableRng;
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|_| Error::validation(format!("bad rng word position `{}`", self.word_pos)))?;
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Metadata {
    model: ModelConfig,
    train: TrainConfig,
    epoch: u64,
    step: u64,
    adam_step: u64,
    rng: RngState,
    history: Vec<EpochLog>,
    has_stats: bool,
    array_count: u32,
}

fn put_array<F: Real>(out: &mut Vec<u8>, name: &str, a: &Array<F>) -> Result<()> {
    let bytes = name.as_bytes();
    let len = u16::try_from(bytes.len()).map_err(|_| Error::validation("array name too long"))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(bytes);
    out.push(F::DTYPE.code());
    let ndim = u8::try_from(a.ndim()).map_err(|_| Error::validation("too many dimensions"))?;
    out.push(ndim);
    for &d in a.shape() {
        let d = u32::try_from(d).map_err(|_| Error::validation("dimension exceeds u32"))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in a.data() {
        v.write_le(out);
    }
    Ok(())
}

/// Serialises a training state to bytes.
pub fn encode(state: &TrainState) -> Result<Vec<u8>> {
    let mut body = Vec::new();
    let mut count = 0u32;
    for (name, a) in state.params.iter() {
        put_array(&mut body, &format!("param/{name}"), a)?;
        count += 1;
    }
    for (name, a) in &state.adam.m {
        put_array(&mut body, &format!("adam.m/{name}"), a)?;
        count += 1;
    }
    for (name, a) in &state.adam.v {
        put_array(&mut body, &format!("adam.v/{name}"), a)?;
        count += 1;
    }
    if let Some(stats) = &state.stats {
        put_array(
            &mut body,
            "norm/min",
            &Array::new(vec![stats.min.len()], stats.min.clone())?,
        )?;
        put_array(
            &mut body,
            "norm/max",
            &Array::new(vec![stats.max.len()], stats.max.clone())?,
        )?;
        count += 2;
    }
    let meta = Metadata {
        model: state.model.clone(),
        train: state.train.clone(),
        epoch: state.epoch,
        step: state.step,
        adam_step: state.adam.step,
        rng: RngState::capture(&state.rng),
        history: state.history.clone(),
        has_stats: state.stats.is_some(),
        array_count: count,
    };
    let json = serde_json::to_vec(&meta).map_err(|e| Error::validation(e.to_string()))?;
    let mut out = Vec::with_capacity(10 + json.len() + body.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&body);
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                message: format!("truncated while reading {what}"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn fail(&self, at: usize, message: String) -> Error {
        Error::Format {
            offset: at as u64,
            message,
        }
    }
}

enum Loaded {
    F32(Array<f32>),
    F64(Array<f64>),
}

fn read_array(r: &mut Reader<'_>) -> Result<(String, Loaded)> {
    let start = r.pos;
    let len = r.u16("array name length")? as usize;
    let name = std::str::from_utf8(r.take(len, "array name")?)
        .map_err(|_| r.fail(start, "array name is not UTF-8".into()))?
        .to_string();
    let code_at = r.pos;
    let dtype = DType::from_code(r.u8("dtype")?)
        .ok_or_else(|| r.fail(code_at, format!("unknown dtype code for `{name}`")))?;
    let ndim = r.u8("ndim")? as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(r.u32("dimension")? as usize);
    }
    let n = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| r.fail(start, format!("`{name}` is too large")))?;
    let size = n
        .checked_mul(dtype.size())
        .ok_or_else(|| r.fail(start, format!("`{name}` is too large")))?;
    let raw = r.take(size, &format!("values of `{name}`"))?;
    let arr = match dtype {
        DType::F32 => Loaded::F32(Array::new(
            shape,
            raw.chunks(4).map(f32::read_le).collect(),
        )?),
        DType::F64 => Loaded::F64(Array::new(
            shape,
            raw.chunks(8).map(f64::read_le).collect(),
        )?),
    };
    Ok((name, arr))
}

/// Parses checkpoint bytes. Nothing is returned unless the whole file is
/// well formed.
pub fn decode(bytes: &[u8]) -> Result<TrainState> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(r.fail(0, "not a checkpoint (bad magic)".into()));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let meta_len = r.u32("metadata length")? as usize;
    let meta_at = r.pos;
    let meta: Metadata = serde_json::from_slice(r.take(meta_len, "metadata")?)
        .map_err(|e| r.fail(meta_at, format!("bad metadata: {e}")))?;

    let mut params = ParamSet::new();
    let mut adam = AdamState::new();
    adam.step = meta.adam_step;
    let (mut min, mut max) = (None, None);
    for _ in 0..meta.array_count {
        let at = r.pos;
        let (name, arr) = read_array(&mut r)?;
        let (kind, key) = name.split_once('/').unwrap_or(("", name.as_str()));
        match (kind, arr) {
            ("param", Loaded::F32(a)) => params.insert(key, a),
            ("adam.m", Loaded::F32(a)) => {
                adam.m.insert(key.to_string(), a);
            }
            ("adam.v", Loaded::F32(a)) => {
                adam.v.insert(key.to_string(), a);
            }
            ("norm", Loaded::F64(a)) if key == "min" => min = Some(a.into_data()),
            ("norm", Loaded::F64(a)) if key == "max" => max = Some(a.into_data()),
            _ => return Err(r.fail(at, format!("unexpected record `{name}`"))),
        }
    }
    if r.pos != bytes.len() {
        return Err(r.fail(r.pos, "trailing bytes after the last record".into()));
    }
    let stats = match (meta.has_stats, min, max) {
        (false, None, None) => None,
        (true, Some(min), Some(max)) if min.len() == max.len() => Some(NormStats { min, max }),
        _ => return Err(r.fail(meta_at, "inconsistent normalisation records".into())),
    };
    crate::tdr_unet::check_params(&meta.model, &params)?;
    Ok(TrainState {
        model: meta.model,
        train: meta.train,
        params,
        adam,
        epoch: meta.epoch,
        step: meta.step,
        rng: meta.rng.restore()?,
        stats,
        history: meta.history,
    })
}

/// Writes through a temporary sibling and renames, so a failed save never
/// leaves a half-written checkpoint at `path`.
pub fn save_checkpoint(state: &TrainState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(state)?;
    let tmp = path.with_extension("tmp");
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainState> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
