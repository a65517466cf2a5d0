//! Binary checkpoint format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "MFCK"
//! 4       4     format_version   u32 LE
//! 8       8     d                u64 LE
//! 16      8     B                u64 LE
//! 24      1     variant          0 = feature_hash, 1 = trainable_bag
//! 25      8     seed             u64 LE
//! 33      ...   f64 LE tensors, row-major, in order:
//!               W_hidden (2d·d), b_hidden (d), W_out (2·d), b_out (2),
//!               embedding table (B·d, trainable_bag only)
//! ```

use thiserror::Error;

use super::{HeadParams, Model};
use crate::embed::{EncoderParams, EncoderVariant};

pub const MAGIC: &[u8; 4] = b"MFCK";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 33;

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown encoder variant code {0}")]
    UnknownVariant(u8),
    #[error("checkpoint truncated or oversized: expected {expected} bytes, found {found}")]
    Length { expected: usize, found: usize },
    #[error("checkpoint holds non-finite parameters")]
    NonFinite,
}

impl Model {
    pub fn to_checkpoint(&self) -> Vec<u8> {
        let d = self.head.dim;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * (2 * d * d + 3 * d + 2 + self.encoder.table.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(d as u64).to_le_bytes());
        out.extend_from_slice(&(self.encoder.buckets as u64).to_le_bytes());
        out.push(self.encoder.variant.code());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for t in self.head.tensors().into_iter().chain([self.encoder.table.as_slice()]) {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<Model, CheckpointError> {
        if bytes.len() < HEADER_LEN {
            return Err(CheckpointError::Length {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        if &bytes[..4] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let d = u64_at(8) as usize;
        let buckets = u64_at(16) as usize;
        let variant = EncoderVariant::from_code(bytes[24]).ok_or(CheckpointError::UnknownVariant(bytes[24]))?;
        let seed = u64_at(25);
        let table_len = match variant {
            EncoderVariant::FeatureHash => 0,
            EncoderVariant::TrainableBag => buckets * d,
        };
        let floats = 2 * d * d + d + 2 * d + 2 + table_len;
        let expected = HEADER_LEN + 8 * floats;
        if bytes.len() != expected {
            return Err(CheckpointError::Length {
                expected,
                found: bytes.len(),
            });
        }
        let mut values = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let mut take = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };
        let w_hidden = take(2 * d * d);
        let b_hidden = take(d);
        let w_out = take(2 * d);
        let b_out = take(2);
        let table = take(table_len);
        let model = Model {
            encoder: EncoderParams {
                variant,
                dim: d,
                buckets,
                table,
                seed,
            },
            head: HeadParams {
                dim: d,
                w_hidden,
                b_hidden,
                w_out,
                b_out: [b_out[0], b_out[1]],
            },
            seed,
        };
        if model
            .head
            .tensors()
            .iter()
            .flat_map(|t| t.iter())
            .chain(&model.encoder.table)
            .any(|v| !v.is_finite())
        {
            return Err(CheckpointError::NonFinite);
        }
        Ok(model)
    }
}
