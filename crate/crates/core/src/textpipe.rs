//! Tokenization, sliding-window chunking and chunk-count planning.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::par;

pub const DEFAULT_WINDOW: usize = 512;
pub const DEFAULT_OVERLAP: usize = 50;
pub const DEFAULT_LOSS_THRESHOLD: f64 = 0.10;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("overlap {overlap} must be smaller than window {window}")]
    OverlapTooLarge { window: usize, overlap: usize },
    #[error("loss threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("no {0} documents to plan for")]
    EmptyRole(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSequence {
    pub doc_id: String,
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<String>;
}

/// Lowercase, NFC, split into alphanumeric runs; every other
/// non-whitespace character is its own token.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimpleTokenizer;

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

impl Tokenizer for SimpleTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        let normalized: String = text.to_lowercase().nfc().collect();
        let mut tokens = Vec::new();
        let mut word = String::new();
        for c in normalized.chars() {
            if is_word_char(c) {
                word.push(c);
                continue;
            }
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
        tokens
    }
}

pub fn tokenize(text: &str) -> TokenSequence {
    TokenSequence {
        doc_id: String::new(),
        tokens: SimpleTokenizer.tokenize(text),
    }
}

/// Tokens representable by `k` windows of `window` tokens overlapping by `overlap`.
pub fn capacity(k: usize, window: usize, overlap: usize) -> usize {
    if k == 0 {
        0
    } else {
        k * window - (k - 1) * overlap
    }
}

/// Chunks needed to cover `len` tokens without dropping any.
pub fn chunks_needed(len: usize, window: usize, overlap: usize) -> usize {
    if len == 0 {
        0
    } else if len <= window {
        1
    } else {
        let stride = window - overlap;
        1 + (len - window).div_ceil(stride)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunking {
    /// Token index ranges of the emitted chunks.
    pub ranges: Vec<Range<usize>>,
    pub dropped: usize,
}

impl Chunking {
    pub fn slices<'a, T>(&self, tokens: &'a [T]) -> Vec<&'a [T]> {
        self.ranges.iter().map(|r| &tokens[r.clone()]).collect()
    }
}

/// Split `len` tokens into at most `k` windows. Chunk `i` covers
/// `[i*(W-V), i*(W-V)+W)` clipped to the sequence; tokens past the last slot
/// are dropped and counted.
pub fn chunk(len: usize, k: usize, window: usize, overlap: usize) -> Chunking {
    assert!(overlap < window, "overlap must be smaller than window");
    assert!(k >= 1, "at least one chunk slot");
    let stride = window - overlap;
    let emitted = chunks_needed(len, window, overlap).min(k);
    let ranges: Vec<Range<usize>> = (0..emitted)
        .map(|i| {
            let start = i * stride;
            start..(start + window).min(len)
        })
        .collect();
    let covered = len.min(capacity(k, window, overlap));
    Chunking {
        ranges,
        dropped: len - covered,
    }
}

/// Convenience wrapper returning owned chunk token lists.
pub fn chunk_tokens(tokens: &[String], k: usize, window: usize, overlap: usize) -> (Vec<Vec<String>>, usize) {
    let c = chunk(tokens.len(), k, window, overlap);
    let chunks = c.slices(tokens).into_iter().map(<[String]>::to_vec).collect();
    (chunks, c.dropped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub window: usize,
    pub overlap: usize,
    pub k_job: usize,
    pub k_resume: usize,
    pub loss_threshold: f64,
    pub realized_loss_job: f64,
    pub realized_loss_resume: f64,
}

impl ChunkPlan {
    /// Plan with fixed slot counts and no realized-loss bookkeeping.
    pub fn fixed(window: usize, overlap: usize, k_job: usize, k_resume: usize) -> Self {
        ChunkPlan {
            window,
            overlap,
            k_job,
            k_resume,
            loss_threshold: DEFAULT_LOSS_THRESHOLD,
            realized_loss_job: 0.0,
            realized_loss_resume: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Fraction of corpus tokens falling beyond `k` slots.
pub fn corpus_loss(lengths: &[usize], k: usize, window: usize, overlap: usize) -> f64 {
    let cap = capacity(k, window, overlap);
    let total: usize = lengths.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let lost: usize = lengths.iter().map(|&l| l.saturating_sub(cap)).sum();
    lost as f64 / total as f64
}

/// Smallest slot count whose corpus loss stays within `threshold`.
pub fn min_slots(lengths: &[usize], window: usize, overlap: usize, threshold: f64) -> (usize, f64) {
    let mut k = 1;
    loop {
        let loss = corpus_loss(lengths, k, window, overlap);
        if loss <= threshold {
            return (k, loss);
        }
        k += 1;
    }
}

pub fn plan_chunks(
    job_lengths: &[usize],
    resume_lengths: &[usize],
    window: usize,
    overlap: usize,
    loss_threshold: f64,
) -> Result<ChunkPlan, PlanError> {
    if overlap >= window {
        return Err(PlanError::OverlapTooLarge { window, overlap });
    }
    if !(0.0..=1.0).contains(&loss_threshold) {
        return Err(PlanError::BadThreshold(loss_threshold));
    }
    if job_lengths.is_empty() {
        return Err(PlanError::EmptyRole("job"));
    }
    if resume_lengths.is_empty() {
        return Err(PlanError::EmptyRole("resume"));
    }
    let (k_job, realized_loss_job) = min_slots(job_lengths, window, overlap, loss_threshold);
    let (k_resume, realized_loss_resume) = min_slots(resume_lengths, window, overlap, loss_threshold);
    Ok(ChunkPlan {
        window,
        overlap,
        k_job,
        k_resume,
        loss_threshold,
        realized_loss_job,
        realized_loss_resume,
    })
}

/// Token counts for a batch of texts.
pub fn token_lengths(texts: &[&str], tokenizer: &dyn Tokenizer) -> Vec<usize> {
    par::map(texts, |t| tokenizer.tokenize(t).len())
}
