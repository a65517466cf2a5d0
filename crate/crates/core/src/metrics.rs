//! Scoring and evaluation formulas: TF-IDF, cosine similarity, confusion
//! matrix statistics, ROC-AUC and the ranking metrics NDCG, AP and MRR.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("roc-auc needs both positive and negative labels")]
    SingleClass,
    #[error("scores and labels differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("average precision is undefined with zero relevant items")]
    ZeroRelevant,
    #[error("no ranks given")]
    EmptyInput,
    #[error("ranks are 1-based, found 0")]
    InvalidRank,
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid tf-idf counts: tf={tf}, df={df}, n={n}")]
    InvalidCounts { tf: f64, df: usize, n: usize },
}

/// Binary confusion matrix, positives = "match".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    pub fn record(&mut self, predicted_positive: bool, actual_positive: bool) {
        match (predicted_positive, actual_positive) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Metrics derived from a confusion matrix. `None` marks a metric whose
/// denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionStats {
    pub recall: Option<f64>,
    pub tnr: Option<f64>,
    pub fpr: Option<f64>,
    pub precision: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Harmonic mean of precision and recall; `None` when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> Option<f64> {
    let s = precision + recall;
    (s > 0.0).then(|| 2.0 * precision * recall / s)
}

pub fn confusion_stats(c: &ConfusionCounts) -> ConfusionStats {
    let recall = ratio(c.tp, c.tp + c.fn_);
    let precision = ratio(c.tp, c.tp + c.fp);
    ConfusionStats {
        recall,
        tnr: ratio(c.tn, c.tn + c.fp),
        fpr: ratio(c.fp, c.fp + c.tn),
        precision,
        accuracy: ratio(c.tp + c.tn, c.total()),
        f1: match (precision, recall) {
            (Some(p), Some(r)) => f1_score(p, r),
            _ => None,
        },
    }
}

/// Area under the ROC curve as the probability that a random positive
/// outscores a random negative, ties counting one half. Uses average ranks
/// (Mann-Whitney U), `O(n log n)`.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch(scores.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            if labels[k] {
                pos_rank_sum += avg;
            }
        }
        i = j + 1;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Relevance grades of a ranked list plus the number of relevant items that
/// exist for the query, retrieved or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub grades: Vec<u32>,
    pub total_relevant: usize,
    /// Grades of the ideal ordering for graded relevance. `None` for binary
    /// lists, whose ideal is `total_relevant` ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ideal: Option<Vec<u32>>,
}

impl RankedList {
    /// Binary list. `total_relevant` is clamped up to the number of 1s present.
    pub fn binary(rel: &[bool], total_relevant: usize) -> Self {
        let present = rel.iter().filter(|&&r| r).count();
        RankedList {
            grades: rel.iter().map(|&r| r as u32).collect(),
            total_relevant: total_relevant.max(present),
            ideal: None,
        }
    }

    /// Graded list; the ideal ordering is the given grades sorted descending.
    pub fn graded(grades: Vec<u32>) -> Self {
        let mut ideal: Vec<u32> = grades.iter().copied().filter(|&g| g > 0).collect();
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        RankedList {
            total_relevant: ideal.len(),
            grades,
            ideal: Some(ideal),
        }
    }

    fn ideal_grades(&self) -> Vec<u32> {
        match &self.ideal {
            Some(v) => v.clone(),
            None => vec![1; self.total_relevant],
        }
    }

    /// 1-based position of the first relevant item.
    pub fn first_relevant(&self) -> Option<usize> {
        self.grades.iter().position(|&g| g > 0).map(|p| p + 1)
    }
}

fn gain(grade: u32) -> f64 {
    2f64.powi(grade as i32) - 1.0
}

fn discount(position: usize) -> f64 {
    ((position + 1) as f64).log2()
}

pub fn dcg(grades: &[u32], n: usize) -> f64 {
    grades
        .iter()
        .take(n)
        .enumerate()
        .map(|(i, &g)| gain(g) / discount(i + 1))
        .sum()
}

/// NDCG over the top `n`. Positions past the end of the list count as
/// irrelevant; an ideal DCG of zero yields 0.
pub fn ndcg(list: &RankedList, n: usize) -> f64 {
    let idcg = dcg(&list.ideal_grades(), n);
    if idcg == 0.0 {
        0.0
    } else {
        dcg(&list.grades, n) / idcg
    }
}

/// `Σ_{i≤n} P(i)·rel(i) / #relevant`.
pub fn average_precision(list: &RankedList, n: usize) -> Result<f64, MetricError> {
    if list.total_relevant == 0 {
        return Err(MetricError::ZeroRelevant);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &g) in list.grades.iter().take(n).enumerate() {
        if g > 0 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / list.total_relevant as f64)
}

/// Reciprocal rank of the first relevant item, 0 if none is retrieved.
pub fn reciprocal_rank(list: &RankedList) -> f64 {
    list.first_relevant().map_or(0.0, |r| 1.0 / r as f64)
}

pub fn mrr(first_relevant_ranks: &[usize]) -> Result<f64, MetricError> {
    if first_relevant_ranks.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    if first_relevant_ranks.contains(&0) {
        return Err(MetricError::InvalidRank);
    }
    let sum: f64 = first_relevant_ranks.iter().map(|&r| 1.0 / r as f64).sum();
    Ok(sum / first_relevant_ranks.len() as f64)
}

/// `tf · log10(N / df)`.
pub fn tfidf_weight(tf: f64, df: usize, n: usize) -> Result<f64, MetricError> {
    if df == 0 || n < df || tf.is_nan() || tf < 0.0 {
        return Err(MetricError::InvalidCounts { tf, df, n });
    }
    Ok(tf * (n as f64 / df as f64).log10())
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, MetricError> {
    if u.len() != v.len() {
        return Err(MetricError::DimensionMismatch(u.len(), v.len()));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(MetricError::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// One line of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub name: String,
    /// Cut-off or sample count the value refers to.
    pub n: usize,
    pub value: f64,
}

pub fn write_report(records: &[MetricRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn read_report(src: &str) -> Result<Vec<MetricRecord>, serde_json::Error> {
    src.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
