//! Chunk encoders and chunk-mean document embeddings.
//!
//! Two encoders stand in for a pre-trained transformer:
//!
//! * `FeatureHash`: token counts hashed into `d` buckets, L2-normalised.
//!   Deterministic, no parameters.
//! * `TrainableBag`: each token hashes to one of `B` rows of a `B × d` table;
//!   a chunk is the mean of its rows. Differentiable in the table.
//!
//! Token hashing is 64-bit FNV-1a over the UTF-8 bytes, reduced modulo the
//! bucket count. This mapping is part of the checkpoint contract and must
//! never change.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("cannot embed an empty chunk")]
    EmptyChunk,
    #[error("no chunk embeddings to average")]
    NoChunks,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid encoder configuration: {0}")]
    InvalidConfig(String),
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub fn bucket(token: &str, buckets: usize) -> usize {
    (fnv1a64(token.as_bytes()) % buckets as u64) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderVariant {
    FeatureHash,
    TrainableBag,
}

impl EncoderVariant {
    pub fn code(self) -> u8 {
        match self {
            EncoderVariant::FeatureHash => 0,
            EncoderVariant::TrainableBag => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EncoderVariant::FeatureHash),
            1 => Some(EncoderVariant::TrainableBag),
            _ => None,
        }
    }
}

/// Half-width of the uniform initialisation of the head weights.
pub const INIT_SCALE: f64 = 0.05;
/// Half-width of the uniform initialisation of bag table rows. Rows start
/// at unit scale so the head sees distinguishable inputs from the first step.
pub const TABLE_INIT_SCALE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub variant: EncoderVariant,
    pub dim: usize,
    pub buckets: usize,
    /// Row-major `buckets × dim`; empty for `FeatureHash`.
    pub table: Vec<f64>,
    pub seed: u64,
}

impl EncoderParams {
    /// Feature hashing into `dim` buckets.
    pub fn feature_hash(dim: usize) -> Self {
        EncoderParams {
            variant: EncoderVariant::FeatureHash,
            dim,
            buckets: dim,
            table: Vec::new(),
            seed: 0,
        }
    }

    /// Bag-of-buckets table initialised uniformly in ±[`TABLE_INIT_SCALE`].
    pub fn trainable_bag(dim: usize, buckets: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = (0..buckets * dim)
            .map(|_| rng.gen_range(-TABLE_INIT_SCALE..TABLE_INIT_SCALE))
            .collect();
        EncoderParams {
            variant: EncoderVariant::TrainableBag,
            dim,
            buckets,
            table,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |m: String| Err(EmbedError::InvalidConfig(m));
        if self.dim == 0 {
            return bad("dimension must be positive".into());
        }
        if self.buckets == 0 {
            return bad("bucket count must be positive".into());
        }
        match self.variant {
            EncoderVariant::FeatureHash if self.buckets != self.dim => bad(format!(
                "feature hashing needs buckets == dim, got {} vs {}",
                self.buckets, self.dim
            )),
            EncoderVariant::FeatureHash if !self.table.is_empty() => bad("feature hashing has no table".into()),
            EncoderVariant::TrainableBag if self.table.len() != self.buckets * self.dim => bad(format!(
                "table has {} entries, expected {}",
                self.table.len(),
                self.buckets * self.dim
            )),
            _ if self.table.iter().any(|v| !v.is_finite()) => bad("non-finite table entry".into()),
            _ => Ok(()),
        }
    }

    pub fn is_trainable(&self) -> bool {
        self.variant == EncoderVariant::TrainableBag
    }

    pub fn row(&self, b: usize) -> &[f64] {
        &self.table[b * self.dim..(b + 1) * self.dim]
    }

    /// Token bucket indices under this encoder.
    pub fn buckets_of<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| bucket(t.as_ref(), self.buckets)).collect()
    }

    /// Embed a chunk given as precomputed bucket indices.
    pub fn embed_buckets(&self, ids: &[usize]) -> Result<Vec<f64>, EmbedError> {
        if ids.is_empty() {
            return Err(EmbedError::EmptyChunk);
        }
        let mut v = vec![0.0; self.dim];
        match self.variant {
            EncoderVariant::FeatureHash => {
                for &b in ids {
                    v[b] += 1.0;
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= norm);
            }
            EncoderVariant::TrainableBag => {
                for &b in ids {
                    for (acc, w) in v.iter_mut().zip(self.row(b)) {
                        *acc += w;
                    }
                }
                let n = ids.len() as f64;
                v.iter_mut().for_each(|x| *x /= n);
            }
        }
        Ok(v)
    }
}

pub fn embed_chunk<S: AsRef<str>>(chunk: &[S], params: &EncoderParams) -> Result<Vec<f64>, EmbedError> {
    params.embed_buckets(&params.buckets_of(chunk))
}

/// Component-wise mean of the chunk embeddings actually produced.
pub fn doc_embedding(chunks: &[Vec<f64>]) -> Result<Vec<f64>, EmbedError> {
    let first = chunks.first().ok_or(EmbedError::NoChunks)?;
    let d = first.len();
    let mut mean = vec![0.0; d];
    for c in chunks {
        if c.len() != d {
            return Err(EmbedError::DimensionMismatch {
                expected: d,
                found: c.len(),
            });
        }
        for (m, x) in mean.iter_mut().zip(c) {
            *m += x;
        }
    }
    let n = chunks.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// A document reduced to per-chunk bucket ids, ready for repeated embedding
/// while the encoder table changes during training.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDoc {
    pub chunks: Vec<Vec<usize>>,
}

impl EncodedDoc {
    pub fn embed(&self, params: &EncoderParams) -> Result<Vec<f64>, EmbedError> {
        let chunks = self
            .chunks
            .iter()
            .map(|c| params.embed_buckets(c))
            .collect::<Result<Vec<_>, _>>()?;
        doc_embedding(&chunks)
    }

    /// Accumulate `d(loss)/d(table)` into `grad` given `d(loss)/d(doc embedding)`.
    /// Only meaningful for `TrainableBag`.
    pub fn backprop_table(&self, params: &EncoderParams, upstream: &[f64], grad: &mut [f64]) {
        let d = params.dim;
        let n_chunks = self.chunks.len() as f64;
        for chunk in &self.chunks {
            let scale = 1.0 / (n_chunks * chunk.len() as f64);
            for &b in chunk {
                for (g, u) in grad[b * d..(b + 1) * d].iter_mut().zip(upstream) {
                    *g += scale * u;
                }
            }
        }
    }
}
