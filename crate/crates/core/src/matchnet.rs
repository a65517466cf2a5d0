//! Two-class matching head over concatenated job and resume embeddings.
//!
//! ```text
//! hidden = ReLU(W_hiddenᵀ · [job ; resume] + b_hidden)      (2d → d)
//! logits = W_outᵀ · hidden + b_out                          (d → 2)
//! p      = softmax(logits)          index 0 = not match, index 1 = match
//! loss   = −q_match·ln p_match − q_not·ln p_not
//! ```
//!
//! Training is plain mini-batch SGD. With the `TrainableBag` encoder the
//! gradient also flows into the embedding table.

pub mod checkpoint;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Label, LabeledPair};
use crate::embed::{EmbedError, EncodedDoc, EncoderParams, EncoderVariant, INIT_SCALE};
use crate::metrics::{self, ConfusionCounts};
use crate::par;
use crate::textpipe::{chunk, ChunkPlan, SimpleTokenizer, Tokenizer};

pub use checkpoint::{CheckpointError, FORMAT_VERSION};

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid training input: {0}")]
    InvalidInput(String),
}

/// Weights of the feed-forward head. Matrices are row-major:
/// `w_hidden[i * d + j]` connects input `i` to hidden unit `j`,
/// `w_out[j * 2 + c]` connects hidden unit `j` to class `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub dim: usize,
    pub w_hidden: Vec<f64>,
    pub b_hidden: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: [f64; 2],
}

impl HeadParams {
    pub fn zeros(dim: usize) -> Self {
        HeadParams {
            dim,
            w_hidden: vec![0.0; 2 * dim * dim],
            b_hidden: vec![0.0; dim],
            w_out: vec![0.0; dim * 2],
            b_out: [0.0; 2],
        }
    }

    /// Uniform(−0.05, 0.05) initialisation.
    pub fn init(dim: usize, rng: &mut impl Rng) -> Self {
        let mut h = HeadParams::zeros(dim);
        for v in h
            .w_hidden
            .iter_mut()
            .chain(h.b_hidden.iter_mut())
            .chain(h.w_out.iter_mut())
            .chain(h.b_out.iter_mut())
        {
            *v = rng.gen_range(-INIT_SCALE..INIT_SCALE);
        }
        h
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.w_hidden, &self.b_hidden, &self.w_out, &self.b_out]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w_hidden, &mut self.b_hidden, &mut self.w_out, &mut self.b_out]
    }

    fn validate(&self) -> Result<(), MatchError> {
        let d = self.dim;
        let shapes = [2 * d * d, d, 2 * d, 2];
        for (t, want) in self.tensors().iter().zip(shapes) {
            if t.len() != want {
                return Err(MatchError::DimensionMismatch {
                    expected: want,
                    found: t.len(),
                });
            }
        }
        Ok(())
    }
}

/// Encoder plus head: everything needed to score a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub encoder: EncoderParams,
    pub head: HeadParams,
    pub seed: u64,
}

impl Model {
    /// Fresh model. The encoder table draws from stream 0 and the head from
    /// stream 1 of a ChaCha8 generator seeded with `seed`.
    pub fn new(variant: EncoderVariant, dim: usize, buckets: usize, seed: u64) -> Self {
        let encoder = match variant {
            EncoderVariant::FeatureHash => EncoderParams::feature_hash(dim),
            EncoderVariant::TrainableBag => EncoderParams::trainable_bag(dim, buckets, seed),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Model {
            encoder: EncoderParams { seed, ..encoder },
            head: HeadParams::init(dim, &mut rng),
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.head.dim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NotMatch,
    Match,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub p_match: f64,
    pub p_not_match: f64,
    pub predicted: Verdict,
}

impl Prediction {
    fn from_logits(logits: [f64; 2]) -> Self {
        let m = logits[0].max(logits[1]);
        let e0 = (logits[0] - m).exp();
        let e1 = (logits[1] - m).exp();
        let z = e0 + e1;
        let p_match = e1 / z;
        let p_not_match = e0 / z;
        Prediction {
            p_match,
            p_not_match,
            predicted: if p_match > p_not_match {
                Verdict::Match
            } else {
                Verdict::NotMatch
            },
        }
    }
}

/// Activations kept from [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    pub pre_hidden: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: [f64; 2],
    pub prediction: Prediction,
}

pub fn forward(job: &[f64], resume: &[f64], head: &HeadParams) -> Result<ForwardCache, MatchError> {
    head.validate()?;
    let d = head.dim;
    for v in [job, resume] {
        if v.len() != d {
            return Err(MatchError::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
    }
    let input: Vec<f64> = job.iter().chain(resume).copied().collect();
    let mut pre_hidden = head.b_hidden.clone();
    for (i, x) in input.iter().enumerate() {
        let row = &head.w_hidden[i * d..(i + 1) * d];
        for (z, w) in pre_hidden.iter_mut().zip(row) {
            *z += w * x;
        }
    }
    let hidden: Vec<f64> = pre_hidden.iter().map(|&z| if z > 0.0 { z } else { 0.0 }).collect();
    let mut logits = head.b_out;
    for (j, h) in hidden.iter().enumerate() {
        logits[0] += head.w_out[j * 2] * h;
        logits[1] += head.w_out[j * 2 + 1] * h;
    }
    Ok(ForwardCache {
        prediction: Prediction::from_logits(logits),
        input,
        pre_hidden,
        hidden,
        logits,
    })
}

/// Per-class loss weights `[not_match, match]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights(pub [f64; 2]);

impl Default for ClassWeights {
    fn default() -> Self {
        ClassWeights([1.0, 1.0])
    }
}

impl ClassWeights {
    fn of(&self, is_match: bool) -> f64 {
        self.0[is_match as usize]
    }
}

const PROB_FLOOR: f64 = 1e-12;

pub fn bce_loss(prediction: &Prediction, is_match: bool) -> f64 {
    let clamp = |p: f64| p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    if is_match {
        -clamp(prediction.p_match).ln()
    } else {
        -clamp(prediction.p_not_match).ln()
    }
}

pub fn weighted_bce_loss(prediction: &Prediction, is_match: bool, weights: ClassWeights) -> f64 {
    weights.of(is_match) * bce_loss(prediction, is_match)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub head: HeadParams,
    /// Gradient with respect to the concatenated `[job ; resume]` input.
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.head
            .tensors()
            .iter()
            .flat_map(|t| t.iter())
            .chain(&self.input)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Analytic gradient of the (weighted) loss. The probability clamp in
/// [`bce_loss`] is ignored, and ReLU has zero slope at 0.
pub fn backward(cache: &ForwardCache, head: &HeadParams, is_match: bool, weights: ClassWeights) -> Gradients {
    let d = head.dim;
    let w = weights.of(is_match);
    let p = [cache.prediction.p_not_match, cache.prediction.p_match];
    let q = if is_match { [0.0, 1.0] } else { [1.0, 0.0] };
    let dlogits = [w * (p[0] - q[0]), w * (p[1] - q[1])];

    let mut g = HeadParams::zeros(d);
    g.b_out = dlogits;
    let mut dpre = vec![0.0; d];
    for (j, dp) in dpre.iter_mut().enumerate() {
        g.w_out[j * 2] = cache.hidden[j] * dlogits[0];
        g.w_out[j * 2 + 1] = cache.hidden[j] * dlogits[1];
        if cache.pre_hidden[j] > 0.0 {
            *dp = head.w_out[j * 2] * dlogits[0] + head.w_out[j * 2 + 1] * dlogits[1];
        }
    }
    g.b_hidden.copy_from_slice(&dpre);
    let mut dinput = vec![0.0; 2 * d];
    for (i, x) in cache.input.iter().enumerate() {
        let row = &head.w_hidden[i * d..(i + 1) * d];
        let grow = &mut g.w_hidden[i * d..(i + 1) * d];
        let mut acc = 0.0;
        for j in 0..d {
            grow[j] = x * dpre[j];
            acc += row[j] * dpre[j];
        }
        dinput[i] = acc;
    }
    Gradients { head: g, input: dinput }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a strict validation-F1 improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub class_weights: ClassWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            batch_size: 4,
            max_epochs: 20,
            patience: 1,
            seed: 0,
            class_weights: ClassWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_f1: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: Model,
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch whose parameters were kept; 0 if training never improved
    /// on the initial parameters.
    pub best_epoch: usize,
}

/// One labelled pair with both documents already reduced to bucket ids.
#[derive(Debug, Clone)]
pub struct EncodedPair {
    pub job: EncodedDoc,
    pub resume: EncodedDoc,
    pub is_match: bool,
}

/// Tokenize, chunk under `slots` windows and hash one document.
pub fn encode_tokens<S: AsRef<str>>(
    tokens: &[S],
    slots: usize,
    plan: &ChunkPlan,
    encoder: &EncoderParams,
) -> Result<EncodedDoc, EmbedError> {
    if tokens.is_empty() {
        return Err(EmbedError::EmptyChunk);
    }
    let ids = encoder.buckets_of(tokens);
    let c = chunk(ids.len(), slots, plan.window, plan.overlap);
    Ok(EncodedDoc {
        chunks: c.slices(&ids).into_iter().map(<[usize]>::to_vec).collect(),
    })
}

pub fn encode_document(
    doc: &Document,
    slots: usize,
    plan: &ChunkPlan,
    encoder: &EncoderParams,
    tokenizer: &dyn Tokenizer,
) -> Result<EncodedDoc, EmbedError> {
    encode_tokens(&tokenizer.tokenize(doc.text()), slots, plan, encoder)
}

pub fn encode_pairs(
    pairs: &[LabeledPair],
    docs: &std::collections::HashMap<&str, &Document>,
    plan: &ChunkPlan,
    encoder: &EncoderParams,
    tokenizer: &dyn Tokenizer,
) -> Result<Vec<EncodedPair>, MatchError> {
    par::try_map(pairs, |p| {
        let lookup = |id: &str| {
            docs.get(id)
                .copied()
                .ok_or_else(|| MatchError::InvalidInput(format!("unknown document {id}")))
        };
        if p.label == Label::Unknown {
            return Err(MatchError::InvalidInput(format!(
                "pair {}/{} has no label",
                p.job_id, p.candidate_id
            )));
        }
        Ok(EncodedPair {
            job: encode_document(lookup(&p.job_id)?, plan.k_job, plan, encoder, tokenizer)?,
            resume: encode_document(lookup(&p.candidate_id)?, plan.k_resume, plan, encoder, tokenizer)?,
            is_match: p.label == Label::Match,
        })
    })
}

pub fn predict_encoded(job: &EncodedDoc, resume: &EncodedDoc, model: &Model) -> Result<Prediction, MatchError> {
    let j = job.embed(&model.encoder)?;
    let r = resume.embed(&model.encoder)?;
    Ok(forward(&j, &r, &model.head)?.prediction)
}

pub fn predict_tokens<S: AsRef<str>>(
    job: &[S],
    resume: &[S],
    plan: &ChunkPlan,
    model: &Model,
) -> Result<Prediction, MatchError> {
    let j = encode_tokens(job, plan.k_job, plan, &model.encoder)?;
    let r = encode_tokens(resume, plan.k_resume, plan, &model.encoder)?;
    predict_encoded(&j, &r, model)
}

/// tokenize → chunk → embed → average → classify.
pub fn predict_pair(
    job: &Document,
    resume: &Document,
    plan: &ChunkPlan,
    model: &Model,
) -> Result<Prediction, MatchError> {
    let t = SimpleTokenizer;
    predict_tokens(&t.tokenize(job.text()), &t.tokenize(resume.text()), plan, model)
}

struct ExampleGrad {
    loss: f64,
    grads: Gradients,
}

fn example_grad(model: &Model, ex: &EncodedPair, weights: ClassWeights) -> Result<ExampleGrad, MatchError> {
    let j = ex.job.embed(&model.encoder)?;
    let r = ex.resume.embed(&model.encoder)?;
    let cache = forward(&j, &r, &model.head)?;
    Ok(ExampleGrad {
        loss: weighted_bce_loss(&cache.prediction, ex.is_match, weights),
        grads: backward(&cache, &model.head, ex.is_match, weights),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub loss: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub counts: ConfusionCounts,
}

/// Mean loss and match-class F1 / accuracy over a set of encoded pairs.
/// Undefined F1 (no predicted or actual matches) is reported as 0.
pub fn evaluate(model: &Model, examples: &[EncodedPair], weights: ClassWeights) -> Result<EvalSummary, MatchError> {
    let preds = par::try_map(examples, |ex| predict_encoded(&ex.job, &ex.resume, model))?;
    let mut counts = ConfusionCounts::default();
    let mut loss = 0.0;
    for (p, ex) in preds.iter().zip(examples) {
        loss += weighted_bce_loss(p, ex.is_match, weights);
        counts.record(p.predicted == Verdict::Match, ex.is_match);
    }
    let stats = metrics::confusion_stats(&counts);
    Ok(EvalSummary {
        loss: loss / examples.len().max(1) as f64,
        f1: stats.f1.unwrap_or(0.0),
        accuracy: stats.accuracy.unwrap_or(0.0),
        counts,
    })
}

/// Mini-batch SGD with validation-F1 early stopping. Returns the parameters
/// of the best validation epoch.
pub fn fit(
    model: &Model,
    train: &[EncodedPair],
    validation: &[EncodedPair],
    config: &TrainConfig,
) -> Result<TrainOutcome, MatchError> {
    if train.is_empty() || validation.is_empty() {
        return Err(MatchError::InvalidInput(
            "training and validation sets must be non-empty".into(),
        ));
    }
    if config.batch_size == 0 || config.max_epochs == 0 || config.patience == 0 {
        return Err(MatchError::InvalidInput(
            "batch size, epochs and patience must be positive".into(),
        ));
    }
    if !(config.learning_rate >= 0.0 && config.learning_rate.is_finite()) {
        return Err(MatchError::InvalidInput(
            "learning rate must be finite and non-negative".into(),
        ));
    }
    let mut model = model.clone();
    let mut best = model.clone();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut since_improvement = 0;
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let trainable = model.encoder.is_trainable();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let per_example = par::map(batch, |&i| example_grad(&model, &train[i], config.class_weights));
            let mut sum = HeadParams::zeros(model.dim());
            let mut table_grad = if trainable {
                vec![0.0; model.encoder.table.len()]
            } else {
                Vec::new()
            };
            let mut batch_loss = 0.0;
            // fixed-order reduction keeps parallel and sequential runs bit-identical
            for (eg, &i) in per_example.into_iter().zip(batch) {
                let eg = eg?;
                batch_loss += eg.loss;
                for (acc, g) in sum.tensors_mut().into_iter().zip(eg.grads.head.tensors()) {
                    acc.iter_mut().zip(g).for_each(|(a, x)| *a += x);
                }
                if trainable {
                    let d = model.dim();
                    train[i]
                        .job
                        .backprop_table(&model.encoder, &eg.grads.input[..d], &mut table_grad);
                    train[i]
                        .resume
                        .backprop_table(&model.encoder, &eg.grads.input[d..], &mut table_grad);
                }
            }
            if !batch_loss.is_finite() {
                return Err(MatchError::NonFiniteLoss { epoch, batch: b });
            }
            epoch_loss += batch_loss;
            let step = config.learning_rate / batch.len() as f64;
            for (p, g) in model.head.tensors_mut().into_iter().zip(sum.tensors()) {
                p.iter_mut().zip(g).for_each(|(w, x)| *w -= step * x);
            }
            if trainable {
                model
                    .encoder
                    .table
                    .iter_mut()
                    .zip(&table_grad)
                    .for_each(|(w, x)| *w -= step * x);
            }
        }
        let val = evaluate(&model, validation, config.class_weights)?;
        epochs.push(EpochLog {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            val_loss: val.loss,
            val_f1: val.f1,
            val_accuracy: val.accuracy,
        });
        if val.f1 > best_f1 {
            best_f1 = val.f1;
            best = model.clone();
            best_epoch = epoch;
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= config.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model: best,
        epochs,
        best_epoch,
    })
}

/// Encode the split's pairs and run [`fit`] on train/validation.
pub fn train(
    split: &crate::corpus::CorpusSplit,
    documents: &[Document],
    plan: &ChunkPlan,
    model: &Model,
    config: &TrainConfig,
) -> Result<TrainOutcome, MatchError> {
    let docs: std::collections::HashMap<&str, &Document> = documents.iter().map(|d| (d.id(), d)).collect();
    let tok = SimpleTokenizer;
    let train = encode_pairs(&split.train, &docs, plan, &model.encoder, &tok)?;
    let validation = encode_pairs(&split.validation, &docs, plan, &model.encoder, &tok)?;
    fit(model, &train, &validation, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
    }

    #[test]
    fn zero_params_give_even_odds() {
        let h = HeadParams::zeros(3);
        let c = forward(&[1.0, 2.0, 3.0], &[0.5, 0.5, 0.5], &h).unwrap();
        assert_eq!(c.prediction.p_match, 0.5);
        assert_eq!(c.prediction.p_not_match, 0.5);
        assert_eq!(c.prediction.predicted, Verdict::NotMatch);
    }

    #[test]
    fn bias_only_closed_form() {
        let mut h = HeadParams::zeros(2);
        h.b_out = [-1.0, 1.0];
        let c = forward(&[0.3, 0.1], &[0.2, 0.9], &h).unwrap();
        let e = std::f64::consts::E;
        assert!((c.prediction.p_match - e / (e + 1.0 / e)).abs() < 1e-12);
        assert!((c.prediction.p_match - 0.880_797_077_977_882_4).abs() < 1e-12);
        assert_eq!(c.prediction.predicted, Verdict::Match);
    }

    #[test]
    fn dimension_checked() {
        let h = HeadParams::zeros(3);
        assert!(matches!(
            forward(&[1.0], &[1.0, 2.0, 3.0], &h),
            Err(MatchError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn probabilities_normalised_and_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let a = rng.gen_range(-50.0..50.0);
            let b = rng.gen_range(-50.0..50.0);
            let s = rng.gen_range(-100.0..100.0);
            let p = Prediction::from_logits([a, b]);
            let q = Prediction::from_logits([a + s, b + s]);
            assert!((p.p_match + p.p_not_match - 1.0).abs() < 1e-12);
            assert!((p.p_match - q.p_match).abs() < 1e-12);
            assert_eq!(p.predicted, q.predicted);
        }
        let extreme = Prediction::from_logits([-1000.0, 1000.0]);
        assert_eq!(extreme.p_match, 1.0);
    }

    #[test]
    fn loss_examples() {
        let perfect = Prediction::from_logits([-1000.0, 1000.0]);
        assert!(bce_loss(&perfect, true) < 1e-11);
        let even = Prediction::from_logits([0.0, 0.0]);
        assert!((bce_loss(&even, true) - std::f64::consts::LN_2).abs() < 1e-12);
        let wrong = Prediction::from_logits([1000.0, -1000.0]);
        assert!((bce_loss(&wrong, true) - 1e-12f64.ln().abs()).abs() < 1e-9);
    }

    #[test]
    fn bias_gradient_is_p_minus_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = HeadParams::init(4, &mut rng);
        let j = rand_vec(&mut rng, 4, 1.0);
        let r = rand_vec(&mut rng, 4, 1.0);
        let c = forward(&j, &r, &h).unwrap();
        let g = backward(&c, &h, true, ClassWeights::default());
        assert_eq!(g.head.b_out, [c.prediction.p_not_match, c.prediction.p_match - 1.0]);
    }

    #[test]
    fn no_signal_at_exact_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut h = HeadParams::init(4, &mut rng);
        h.b_out = [-1000.0, 1000.0];
        let c = forward(&[0.1; 4], &[0.2; 4], &h).unwrap();
        let g = backward(&c, &h, true, ClassWeights::default());
        assert!(g.norm() < 1e-9);
    }

    #[test]
    fn class_weight_scales_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = HeadParams::init(3, &mut rng);
        let c = forward(&[0.4, 0.1, 0.9], &[0.3, 0.2, 0.5], &h).unwrap();
        let g1 = backward(&c, &h, true, ClassWeights::default());
        let g3 = backward(&c, &h, true, ClassWeights([1.0, 3.0]));
        for (a, b) in g1.head.w_hidden.iter().zip(&g3.head.w_hidden) {
            assert!((3.0 * a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn concat_order_matters() {
        let model = Model::new(EncoderVariant::FeatureHash, 8, 8, 17);
        let plan = ChunkPlan::fixed(64, 8, 1, 1);
        let a = Document::new("a", "en", "senior rust engineer with distributed systems focus");
        let b = Document::new("b", "en", "junior accountant, excel and payroll");
        let ab = predict_pair(&a, &b, &plan, &model).unwrap();
        let ba = predict_pair(&b, &a, &plan, &model).unwrap();
        assert_ne!(ab.p_match, ba.p_match);
        assert_eq!(ab, predict_pair(&a, &b, &plan, &model).unwrap());
    }

    #[test]
    fn empty_resume_is_an_error() {
        let model = Model::new(EncoderVariant::FeatureHash, 8, 8, 1);
        let plan = ChunkPlan::fixed(64, 8, 1, 1);
        let a = Document::new("a", "en", "rust engineer");
        let empty = Document::new("b", "en", "");
        assert_eq!(
            predict_pair(&a, &empty, &plan, &model),
            Err(MatchError::Embed(EmbedError::EmptyChunk))
        );
    }

    fn toy_pairs(n: usize, seed: u64, enc: &EncoderParams) -> Vec<EncodedPair> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let is_match = rng.gen_bool(0.5);
                let mut resume: Vec<String> = (0..6).map(|_| format!("w{}", rng.gen_range(0..20))).collect();
                if is_match {
                    resume.push("rust".into());
                }
                let job = vec!["rust".to_string(), "role".to_string()];
                let plan = ChunkPlan::fixed(4, 1, 2, 3);
                EncodedPair {
                    job: encode_tokens(&job, plan.k_job, &plan, enc).unwrap(),
                    resume: encode_tokens(&resume, plan.k_resume, &plan, enc).unwrap(),
                    is_match,
                }
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let model = Model::new(EncoderVariant::TrainableBag, 4, 32, 3);
        let data = toy_pairs(20, 1, &model.encoder);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            max_epochs: 3,
            patience: 5,
            ..TrainConfig::default()
        };
        let out = fit(&model, &data[..15], &data[15..], &cfg).unwrap();
        assert_eq!(out.model, model);
        assert_eq!(out.epochs.len(), 3);
    }

    #[test]
    fn training_is_deterministic_across_execution_modes() {
        let model = Model::new(EncoderVariant::TrainableBag, 4, 32, 8);
        let data = toy_pairs(40, 2, &model.encoder);
        let cfg = TrainConfig {
            learning_rate: 0.5,
            max_epochs: 4,
            patience: 4,
            seed: 13,
            ..TrainConfig::default()
        };
        let a = fit(&model, &data[..30], &data[30..], &cfg).unwrap();
        let b = fit(&model, &data[..30], &data[30..], &cfg).unwrap();
        let c = par::sequential(|| fit(&model, &data[..30], &data[30..], &cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_ne!(a.model, model);
    }

    #[test]
    fn small_lr_single_batch_loss_non_increasing() {
        let model = Model::new(EncoderVariant::TrainableBag, 4, 32, 21);
        let data = toy_pairs(4, 3, &model.encoder);
        let cfg = TrainConfig {
            learning_rate: 1e-4,
            batch_size: 4,
            max_epochs: 30,
            patience: 30,
            ..TrainConfig::default()
        };
        let out = fit(&model, &data, &data, &cfg).unwrap();
        for w in out.epochs.windows(2) {
            assert!(w[1].val_loss <= w[0].val_loss + 1e-15, "{:?}", w);
        }
    }

    #[test]
    fn early_stopping_respects_patience() {
        let model = Model::new(EncoderVariant::FeatureHash, 4, 4, 1);
        let data = toy_pairs(30, 4, &model.encoder);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            max_epochs: 50,
            patience: 2,
            ..TrainConfig::default()
        };
        let out = fit(&model, &data[..20], &data[20..], &cfg).unwrap();
        // F1 can never improve with a frozen model: epoch 1 is best, then 2 more
        assert_eq!(out.epochs.len(), 3);
        assert_eq!(out.best_epoch, 1);
    }
}
