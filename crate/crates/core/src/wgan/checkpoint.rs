// Checkpoint file layout (all integers little-endian):
//
//   [0..4)    magic  b"LGS1"
//   [4..8)    format version, u32
//   [8..16)   header length H, u64
//   [16..16+H) JSON header: config, codec hash, data shape, iteration,
//             RNG position, data cursor, layer shapes
//   then      f64 payload: generator params, critic params, generator
//             RMSProp accumulators, critic RMSProp accumulators; each in
//             declaration order (W0, b0, W1, b1, ...)
//   last 8    checksum: first 8 bytes of SHA-256 over everything before it

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DataCursor, GanConfig, ModelCheckpoint, RngState, WganError};
use crate::fsutil::write_atomic;
use crate::neuralnet::{DenseNet, LayerShape, RmsProp};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LGS1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct RngHeader {
    seed: String,
    stream: u64,
    /// u128 as decimal text; JSON numbers cannot carry it safely.
    word_pos: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: GanConfig,
    codec_hash: String,
    data_width: usize,
    data_rows: u64,
    iteration: u64,
    rng: RngHeader,
    cursor: DataCursor,
    generator: Vec<LayerShape>,
    critic: Vec<LayerShape>,
}

fn checksum(bytes: &[u8]) -> [u8; 8] {
    let digest = Sha256::digest(bytes);
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    out
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex32(s: &str) -> Option<[u8; 32]> {
    if s.len() != 64 || !s.is_ascii() {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, b) in out.iter_mut().enumerate() {
        *b = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).ok()?;
    }
    Some(out)
}

pub(super) fn encode(cp: &ModelCheckpoint) -> Vec<u8> {
    let header = Header {
        config: cp.config.clone(),
        codec_hash: cp.codec_hash.clone(),
        data_width: cp.data_width,
        data_rows: cp.data_rows,
        iteration: cp.iteration,
        rng: RngHeader {
            seed: hex(&cp.rng.seed),
            stream: cp.rng.stream,
            word_pos: cp.rng.word_pos.to_string(),
        },
        cursor: cp.cursor,
        generator: cp.generator.architecture(),
        critic: cp.critic.architecture(),
    };
    let json = serde_json::to_vec(&header).expect("checkpoint header serializes");

    let n_floats = 2 * (cp.generator.param_count() + cp.critic.param_count());
    let mut buf = Vec::with_capacity(16 + json.len() + n_floats * 8 + 8);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);

    let tensors = cp
        .generator
        .params()
        .chain(cp.critic.params())
        .chain(cp.generator_opt.accumulators().iter().map(Vec::as_slice))
        .chain(cp.critic_opt.accumulators().iter().map(Vec::as_slice));
    for t in tensors {
        for v in t {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sum = checksum(&buf);
    buf.extend_from_slice(&sum);
    buf
}

struct FloatReader<'a> {
    bytes: &'a [u8],
}

impl FloatReader<'_> {
    fn fill(&mut self, out: &mut [f64]) -> Result<(), WganError> {
        let need = out.len() * 8;
        if self.bytes.len() < need {
            return Err(WganError::Format(
                "parameter payload is shorter than the header declares".into(),
            ));
        }
        let (head, rest) = self.bytes.split_at(need);
        for (v, chunk) in out.iter_mut().zip(head.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        self.bytes = rest;
        Ok(())
    }
}

pub(super) fn decode(bytes: &[u8]) -> Result<ModelCheckpoint, WganError> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(WganError::BadMagic);
    }
    if bytes.len() < 8 + 8 + 8 {
        return Err(WganError::ChecksumMismatch);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(WganError::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let (body, sum) = bytes.split_at(bytes.len() - 8);
    if checksum(body) != sum {
        return Err(WganError::ChecksumMismatch);
    }

    let header_len = u64::from_le_bytes(body[8..16].try_into().expect("8 bytes"));
    let header_end = usize::try_from(header_len)
        .ok()
        .and_then(|h| h.checked_add(16))
        .filter(|&end| end <= body.len())
        .ok_or_else(|| WganError::Format("header length exceeds file".into()))?;
    let header: Header = serde_json::from_slice(&body[16..header_end]).map_err(|e| WganError::Format(e.to_string()))?;
    header.config.validate()?;

    let seed = unhex32(&header.rng.seed).ok_or_else(|| WganError::Format("bad RNG seed".into()))?;
    let word_pos: u128 = header
        .rng
        .word_pos
        .parse()
        .map_err(|_| WganError::Format("bad RNG word position".into()))?;

    let mut generator = DenseNet::zeros(&header.generator)?;
    let mut critic = DenseNet::zeros(&header.critic)?;
    let cfg = &header.config;
    let mut generator_opt = RmsProp::new(&generator, cfg.learning_rate, cfg.rho, cfg.eps);
    let mut critic_opt = RmsProp::new(&critic, cfg.learning_rate, cfg.rho, cfg.eps);

    let mut reader = FloatReader {
        bytes: &body[header_end..],
    };
    for t in generator.params_mut().chain(critic.params_mut()) {
        reader.fill(t)?;
    }
    for t in generator_opt
        .accumulators_mut()
        .iter_mut()
        .chain(critic_opt.accumulators_mut().iter_mut())
    {
        reader.fill(t)?;
    }
    if !reader.bytes.is_empty() {
        return Err(WganError::Format(format!(
            "{} trailing payload bytes",
            reader.bytes.len()
        )));
    }
    if generator.output_dim() != header.data_width || critic.input_dim() != header.data_width {
        return Err(WganError::Format("network widths disagree with data width".into()));
    }

    Ok(ModelCheckpoint {
        config: header.config,
        codec_hash: header.codec_hash,
        data_width: header.data_width,
        data_rows: header.data_rows,
        generator,
        critic,
        generator_opt,
        critic_opt,
        iteration: header.iteration,
        rng: RngState {
            seed,
            stream: header.rng.stream,
            word_pos,
        },
        cursor: header.cursor,
    })
}

/// Write-to-temp-then-rename; a failed save never leaves a partial file.
pub fn save_checkpoint(cp: &ModelCheckpoint, path: impl AsRef<Path>) -> Result<(), WganError> {
    write_atomic(path, &encode(cp))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelCheckpoint, WganError> {
    let bytes = std::fs::read(path)?;
    decode(&bytes)
}
