//! Binary checkpoint format.
//!
//! ```text
//! offset  size  content
//! 0       8     magic "GFNCKPT\0"
//! 8       4     format version, u32 little-endian (currently 1)
//! 12      4     header length N, u32 little-endian
//! 16      N     UTF-8 JSON header (see `Header`)
//! 16+N    ...   each tensor listed in the header, in order, as row-major
//!               little-endian f64 values (rows * cols * 8 bytes)
//! end-8   8     log_z, f64 little-endian
//! ```
//!
//! The header records the encoder constants, the tensor names and shapes,
//! the training target and configuration, and the hashes tying the
//! checkpoint to its dataset and experiment config. Readers reject files
//! whose encoder constants differ from the compiled ones, whose tensor
//! shapes do not match the layout, or whose length is off by any byte.

use std::path::Path;

use gameofn_core::policy::{
    Layout, PolicyModel, ACTION_DIM, CLAMP, STATE_DIM, TARGET_SCALE, VALUE_CHANNELS, VALUE_SCALE,
};
use gameofn_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashing::{json_hash, sha256_hex};

pub const MAGIC: &[u8; 8] = b"GFNCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("malformed header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("encoder mismatch: checkpoint has {field} = {found}, this build uses {expected}")]
    Encoder { field: &'static str, found: f64, expected: f64 },
    #[error("tensor {name}: {msg}")]
    Tensor { name: String, msg: String },
    #[error("payload is {found} bytes, header implies {expected}")]
    Length { expected: usize, found: usize },
    #[error("training config hash is {stored} but the stored config hashes to {computed}")]
    TrainHash { stored: String, computed: String },
    #[error(transparent)]
    Core(#[from] gameofn_core::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub value_channels: usize,
    pub value_scale: f64,
    pub target_scale: f64,
    pub clamp: f64,
}

impl EncoderSpec {
    pub fn current() -> Self {
        EncoderSpec {
            state_dim: STATE_DIM,
            action_dim: ACTION_DIM,
            value_channels: VALUE_CHANNELS,
            value_scale: VALUE_SCALE,
            target_scale: TARGET_SCALE,
            clamp: CLAMP,
        }
    }

    fn check(&self) -> Result<(), CheckpointError> {
        let now = Self::current();
        let fields = [
            ("state_dim", self.state_dim as f64, now.state_dim as f64),
            ("action_dim", self.action_dim as f64, now.action_dim as f64),
            ("value_channels", self.value_channels as f64, now.value_channels as f64),
            ("value_scale", self.value_scale, now.value_scale),
            ("target_scale", self.target_scale, now.target_scale),
            ("clamp", self.clamp, now.clamp),
        ];
        for (field, found, expected) in fields {
            if found != expected {
                return Err(CheckpointError::Encoder { field, found, expected });
            }
        }
        Ok(())
    }
}

/// Provenance stored with the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub train_target: i64,
    pub train_config: TrainConfig,
    pub train_config_hash: String,
    pub dataset_hash: String,
    pub stage_hash: String,
    pub config_hash: String,
}

/// Hash binding a training configuration to its target.
pub fn train_config_hash(config: &TrainConfig, train_target: i64) -> String {
    json_hash(&(train_target, config))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub encoder: EncoderSpec,
    pub hidden: usize,
    pub meta: CheckpointMeta,
    pub tensors: Vec<TensorSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: PolicyModel,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let layout = self.model.layout();
        let tensors = Layout::NAMES
            .iter()
            .map(|&n| {
                let (r, c) = layout.shape(n).expect("known tensor");
                TensorSpec {
                    name: n.to_string(),
                    shape: [r, c],
                }
            })
            .collect();
        let header = Header {
            encoder: EncoderSpec::current(),
            hidden: self.model.config().hidden,
            meta: self.meta.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&header).expect("serializable header");
        let mut out = Vec::with_capacity(16 + json.len() + 8 * (self.model.params().len() + 1));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for name in Layout::NAMES {
            for v in self.model.tensor(name).expect("known tensor") {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.model.log_z.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let version = u32_at(8);
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let header_len = u32_at(12) as usize;
        let body = 16usize.checked_add(header_len).filter(|&e| e <= bytes.len()).ok_or(
            CheckpointError::Length {
                expected: 16 + header_len,
                found: bytes.len(),
            },
        )?;
        let header: Header = serde_json::from_slice(&bytes[16..body])?;
        header.encoder.check()?;

        let config = gameofn_core::policy::PolicyConfig { hidden: header.hidden };
        let layout = Layout::new(config);
        let names: Vec<&str> = header.tensors.iter().map(|t| t.name.as_str()).collect();
        if names != Layout::NAMES {
            return Err(CheckpointError::Tensor {
                name: names.join(","),
                msg: format!("expected tensors {:?}", Layout::NAMES),
            });
        }
        for t in &header.tensors {
            let (r, c) = layout.shape(&t.name).expect("known tensor");
            if t.shape != [r, c] {
                return Err(CheckpointError::Tensor {
                    name: t.name.clone(),
                    msg: format!("shape {:?}, expected [{r}, {c}] for hidden {}", t.shape, header.hidden),
                });
            }
        }
        let n = layout.len();
        let expected = body + 8 * (n + 1);
        if bytes.len() != expected {
            return Err(CheckpointError::Length {
                expected,
                found: bytes.len(),
            });
        }
        let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
        let params: Vec<f64> = (0..n).map(|k| f64_at(body + 8 * k)).collect();
        let log_z = f64_at(body + 8 * n);
        if let Some(k) = params.iter().position(|v| !v.is_finite()) {
            let name = Layout::NAMES
                .iter()
                .find(|&&t| layout.range(t).is_some_and(|r| r.contains(&k)))
                .copied()
                .unwrap_or("?");
            return Err(CheckpointError::Tensor {
                name: name.to_string(),
                msg: format!("non-finite value at flat index {k}"),
            });
        }
        if !log_z.is_finite() {
            return Err(CheckpointError::Tensor {
                name: "log_z".into(),
                msg: format!("non-finite value {log_z}"),
            });
        }

        let computed = train_config_hash(&header.meta.train_config, header.meta.train_target);
        if computed != header.meta.train_config_hash {
            return Err(CheckpointError::TrainHash {
                stored: header.meta.train_config_hash.clone(),
                computed,
            });
        }
        let model = PolicyModel::from_parts(config, params, log_z)?;
        Ok(Checkpoint {
            model,
            meta: header.meta,
        })
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<String> {
        let bytes = self.to_bytes();
        crate::artifacts::write_atomic(path, &bytes)?;
        Ok(sha256_hex(&bytes))
    }

    /// Reads a checkpoint and returns it with the hash of its bytes.
    pub fn read(path: &Path) -> anyhow::Result<(Self, String)> {
        let bytes = std::fs::read(path)?;
        let ckpt = Self::from_bytes(&bytes).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Ok((ckpt, sha256_hex(&bytes)))
    }
}
