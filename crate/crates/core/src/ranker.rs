//! Per-job candidate ranking and ranking evaluation.
//!
//! Ranking file format: one JSON object per line,
//! `{"job_id", "rank", "candidate_id", "score", "provenance"}`, grouped by job
//! in job order and by rank within a job.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::embed::EmbedError;
use crate::matchnet::{self, MatchError, Model};
use crate::metrics::{self, MetricError, MetricRecord, RankedList};
use crate::par;
use crate::textpipe::{ChunkPlan, SimpleTokenizer};

#[derive(Debug, Error)]
pub enum RankError {
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("ranking file line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    NeuralHead,
    CosineBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub candidate_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRanking {
    pub job_id: String,
    pub entries: Vec<RankingEntry>,
}

impl JobRanking {
    pub fn position(&self, candidate_id: &str) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.candidate_id == candidate_id)
            .map(|e| e.rank)
    }
}

/// Sort by score descending, ties by candidate id ascending, and assign ranks.
pub fn rank_scores(mut scored: Vec<(String, f64)>, provenance: Provenance) -> Vec<RankingEntry> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
        .into_iter()
        .enumerate()
        .map(|(i, (candidate_id, score))| RankingEntry {
            candidate_id,
            score,
            rank: i + 1,
            provenance,
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub enum Scorer<'a> {
    /// Match probability from the trained head.
    Neural(&'a Model),
    /// Cosine between job and resume document embeddings under the model's
    /// encoder; the head is not used.
    Cosine(&'a Model),
}

impl Scorer<'_> {
    pub fn provenance(&self) -> Provenance {
        match self {
            Scorer::Neural(_) => Provenance::NeuralHead,
            Scorer::Cosine(_) => Provenance::CosineBaseline,
        }
    }
}

fn doc_vector(doc: &Document, slots: usize, plan: &ChunkPlan, model: &Model) -> Result<Vec<f64>, RankError> {
    let enc = matchnet::encode_document(doc, slots, plan, &model.encoder, &SimpleTokenizer)?;
    Ok(enc.embed(&model.encoder)?)
}

/// Score and rank the candidates that survived filtering for one job.
pub fn rank_candidates(
    job: &Document,
    candidates: &[&Document],
    scorer: Scorer<'_>,
    plan: &ChunkPlan,
) -> Result<Vec<RankingEntry>, RankError> {
    let scored = match scorer {
        Scorer::Neural(model) => par::try_map(candidates, |c| {
            matchnet::predict_pair(job, c, plan, model).map(|p| (c.id().to_string(), p.p_match))
        })?,
        Scorer::Cosine(model) => {
            let jv = doc_vector(job, plan.k_job, plan, model)?;
            par::try_map(candidates, |c| {
                let cv = doc_vector(c, plan.k_resume, plan, model)?;
                Ok::<_, RankError>((c.id().to_string(), metrics::cosine(&jv, &cv)?))
            })?
        }
    };
    Ok(rank_scores(scored, scorer.provenance()))
}

/// Rank many jobs at once; jobs are independent and processed in parallel.
pub fn rank_jobs(
    requests: &[(&Document, Vec<&Document>)],
    scorer: Scorer<'_>,
    plan: &ChunkPlan,
) -> Result<Vec<JobRanking>, RankError> {
    par::try_map(requests, |(job, candidates)| {
        Ok(JobRanking {
            job_id: job.id().to_string(),
            entries: rank_candidates(job, candidates, scorer, plan)?,
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobMetrics {
    pub job_id: String,
    pub ndcg: BTreeMap<usize, f64>,
    pub average_precision: f64,
    pub reciprocal_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub per_job: Vec<JobMetrics>,
    pub mean_ndcg: BTreeMap<usize, f64>,
    pub map: f64,
    pub mrr: f64,
    /// Jobs left out because they have no gold match.
    pub skipped_jobs: usize,
}

impl RankingReport {
    pub fn to_records(&self) -> Vec<MetricRecord> {
        let jobs = self.per_job.len();
        let mut out: Vec<MetricRecord> = self
            .mean_ndcg
            .iter()
            .map(|(&k, &v)| MetricRecord {
                name: "ndcg".into(),
                n: k,
                value: v,
            })
            .collect();
        out.push(MetricRecord {
            name: "map".into(),
            n: jobs,
            value: self.map,
        });
        out.push(MetricRecord {
            name: "mrr".into(),
            n: jobs,
            value: self.mrr,
        });
        out.push(MetricRecord {
            name: "skipped_jobs".into(),
            n: self.skipped_jobs,
            value: self.skipped_jobs as f64,
        });
        out
    }
}

/// The list a job's ranking induces under the gold labels. The number of
/// relevant items counts every gold match of the job, ranked or not.
pub fn ranked_list(ranking: &JobRanking, gold_matches: &BTreeSet<(String, String)>) -> RankedList {
    let rel: Vec<bool> = ranking
        .entries
        .iter()
        .map(|e| gold_matches.contains(&(ranking.job_id.clone(), e.candidate_id.clone())))
        .collect();
    let total = gold_matches.iter().filter(|(j, _)| *j == ranking.job_id).count();
    RankedList::binary(&rel, total)
}

/// NDCG@k, AP and reciprocal rank per job, plus means over jobs that have at
/// least one gold match.
pub fn evaluate_ranking(
    rankings: &[JobRanking],
    gold_matches: &BTreeSet<(String, String)>,
    ks: &[usize],
) -> Result<RankingReport, RankError> {
    let mut per_job = Vec::new();
    let mut skipped_jobs = 0;
    for r in rankings {
        let list = ranked_list(r, gold_matches);
        if list.total_relevant == 0 {
            skipped_jobs += 1;
            continue;
        }
        per_job.push(JobMetrics {
            job_id: r.job_id.clone(),
            ndcg: ks.iter().map(|&k| (k, metrics::ndcg(&list, k))).collect(),
            average_precision: metrics::average_precision(&list, list.grades.len())?,
            reciprocal_rank: metrics::reciprocal_rank(&list),
        });
    }
    let n = per_job.len().max(1) as f64;
    let mean_ndcg = ks
        .iter()
        .map(|&k| (k, per_job.iter().map(|j| j.ndcg[&k]).sum::<f64>() / n))
        .collect();
    let map = per_job.iter().map(|j| j.average_precision).sum::<f64>() / n;
    let mrr = per_job.iter().map(|j| j.reciprocal_rank).sum::<f64>() / n;
    Ok(RankingReport {
        per_job,
        mean_ndcg,
        map,
        mrr,
        skipped_jobs,
    })
}

#[derive(Serialize, Deserialize)]
struct RankingLine {
    job_id: String,
    rank: usize,
    candidate_id: String,
    score: f64,
    provenance: Provenance,
}

pub fn write_rankings(rankings: &[JobRanking]) -> String {
    let mut out = String::new();
    for r in rankings {
        for e in &r.entries {
            let line = RankingLine {
                job_id: r.job_id.clone(),
                rank: e.rank,
                candidate_id: e.candidate_id.clone(),
                score: e.score,
                provenance: e.provenance,
            };
            out.push_str(&serde_json::to_string(&line).expect("serializable"));
            out.push('\n');
        }
    }
    out
}

/// Inverse of [`write_rankings`]. Jobs with no entries are not represented.
pub fn read_rankings(src: &str) -> Result<Vec<JobRanking>, RankError> {
    let mut out: Vec<JobRanking> = Vec::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let l: RankingLine = serde_json::from_str(line).map_err(|e| RankError::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        let entry = RankingEntry {
            candidate_id: l.candidate_id,
            score: l.score,
            rank: l.rank,
            provenance: l.provenance,
        };
        match out.last_mut() {
            Some(last) if last.job_id == l.job_id => last.entries.push(entry),
            _ => out.push(JobRanking {
                job_id: l.job_id,
                entries: vec![entry],
            }),
        }
    }
    Ok(out)
}
