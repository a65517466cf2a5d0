//! The end-to-end pipeline as deterministic `bytes → bytes` stages.
//!
//! Each stage reads its inputs by role, writes its outputs by role, and
//! depends on nothing but those bytes, the [`StageConfig`] and the seed.
//! That is what makes every recorded run replayable.
//!
//! | stage      | inputs                                                    | outputs |
//! |------------|-----------------------------------------------------------|---------|
//! | `ingest`   | `documents`, `pairs`, optional `statuses`                 | `corpus`, `audit` |
//! | `plan`     | `corpus`                                                  | `plan` |
//! | `train`    | `corpus`, `plan`                                          | `checkpoint` |
//! | `rank`     | `corpus`, `plan`, `checkpoint`, `ontology`, `patterns`    | `ranking`, `baseline_ranking`, `screening` |
//! | `evaluate` | `corpus`, `audit`, `plan`, `checkpoint`, `ranking`, `baseline_ranking` | `report` |
//! | `explain`  | `corpus`, `plan`, `checkpoint`, `ontology`, `ranking`, `screening`, `evaluation` | `reports` |

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, CorpusError, CorpusSplit, Document, Label, LabeledPair, StatusTable};
use crate::embed::EncoderVariant;
use crate::explain::{ExplainError, Explainer, JobState, StakeholderReport};
use crate::filtering::{self, FilterError, MentionIndex, PatternSet};
use crate::matchnet::checkpoint::CheckpointError;
use crate::matchnet::{self, MatchError, Model, TrainConfig};
use crate::metrics::{self, MetricRecord};
use crate::ontology::{OntologyError, SkillGraph};
use crate::par;
use crate::ranker::{self, JobRanking, RankError, Scorer};
use crate::textpipe::{self, ChunkPlan, PlanError, SimpleTokenizer};
use crate::trace::{ArtifactKind, ArtifactRef, RunRecord, Stage, StageExecutor, Store, TraceError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage {stage} needs input '{role}'")]
    MissingInput { stage: Stage, role: String },
    #[error("malformed {role}: {reason}")]
    Malformed { role: String, reason: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Which labelled pairs are ranked and evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankPool {
    Test,
    All,
}

/// Everything that influences stage outputs. File locations are not part
/// of it, so the same data under different paths gives the same run ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    pub window: usize,
    pub overlap: usize,
    pub loss_threshold: f64,
    pub encoder: EncoderVariant,
    pub dim: usize,
    pub buckets: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub class_weights: [f64; 2],
    pub ks: Vec<usize>,
    pub seed: u64,
    pub min_words: usize,
    pub rank_pool: RankPool,
    /// Size of the recommended list used by the reports.
    pub top_k: usize,
    pub fuzzy_threshold: f64,
}

impl Default for StageConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        StageConfig {
            window: textpipe::DEFAULT_WINDOW,
            overlap: textpipe::DEFAULT_OVERLAP,
            loss_threshold: textpipe::DEFAULT_LOSS_THRESHOLD,
            encoder: EncoderVariant::TrainableBag,
            dim: 32,
            buckets: 2048,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            class_weights: t.class_weights.0,
            ks: vec![1, 3, 5, 10],
            seed: 42,
            min_words: 50,
            rank_pool: RankPool::Test,
            top_k: 3,
            fuzzy_threshold: crate::ontology::DEFAULT_FUZZY_THRESHOLD,
        }
    }
}

impl StageConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.window == 0 || self.overlap >= self.window {
            return bad("need 0 <= overlap < window");
        }
        if !(0.0..=1.0).contains(&self.loss_threshold) {
            return bad("loss_threshold must lie in [0, 1]");
        }
        if self.dim == 0 || self.buckets == 0 {
            return bad("dim and buckets must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be a finite non-negative number");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive");
        }
        if self.class_weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return bad("class weights must be positive");
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return bad("ks must be a non-empty list of positive cut-offs");
        }
        if !(0.0..=1.0).contains(&self.fuzzy_threshold) {
            return bad("fuzzy_threshold must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
            class_weights: matchnet::ClassWeights(self.class_weights),
        }
    }

    /// Canonical bytes stored as the config artifact.
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("serializable")
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, PipelineError> {
        let c: StageConfig = serde_json::from_slice(b).map_err(|e| PipelineError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

/// Cleaned corpus plus its split: the `corpus` artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusBundle {
    pub documents: Vec<Document>,
    pub pairs: Vec<LabeledPair>,
    pub split: CorpusSplit,
}

impl CorpusBundle {
    pub fn document_map(&self) -> HashMap<&str, &Document> {
        self.documents.iter().map(|d| (d.id(), d)).collect()
    }

    pub fn pool(&self, pool: RankPool) -> &[LabeledPair] {
        match pool {
            RankPool::Test => &self.split.test,
            RankPool::All => &self.pairs,
        }
    }
}

/// Per-job screening state: the `screening` artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    pub jobs: Vec<JobState>,
}

/// Every stakeholder report of one explain run: the `reports` artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    /// The evaluation the reports were produced alongside.
    pub evaluation: Vec<MetricRecord>,
    pub reports: Vec<StakeholderReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutput {
    pub outputs: Vec<(String, ArtifactKind, Vec<u8>)>,
    pub metrics: BTreeMap<String, f64>,
}

pub type Inputs<'a> = [(String, Vec<u8>)];

fn input<'a>(stage: Stage, inputs: &'a Inputs, role: &str) -> Result<&'a [u8], PipelineError> {
    inputs
        .iter()
        .find(|(r, _)| r == role)
        .map(|(_, b)| b.as_slice())
        .ok_or_else(|| PipelineError::MissingInput {
            stage,
            role: role.to_string(),
        })
}

fn utf8<'a>(role: &str, b: &'a [u8]) -> Result<&'a str, PipelineError> {
    std::str::from_utf8(b).map_err(|e| PipelineError::Malformed {
        role: role.to_string(),
        reason: e.to_string(),
    })
}

fn json<T: serde::de::DeserializeOwned>(role: &str, b: &[u8]) -> Result<T, PipelineError> {
    serde_json::from_slice(b).map_err(|e| PipelineError::Malformed {
        role: role.to_string(),
        reason: e.to_string(),
    })
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("serializable")
}

fn corpus_in(stage: Stage, inputs: &Inputs) -> Result<CorpusBundle, PipelineError> {
    json("corpus", input(stage, inputs, "corpus")?)
}

fn plan_in(stage: Stage, inputs: &Inputs) -> Result<ChunkPlan, PipelineError> {
    json("plan", input(stage, inputs, "plan")?)
}

fn model_in(stage: Stage, inputs: &Inputs) -> Result<Model, PipelineError> {
    Ok(Model::from_checkpoint(input(stage, inputs, "checkpoint")?)?)
}

fn graph_in(stage: Stage, inputs: &Inputs, config: &StageConfig) -> Result<SkillGraph, PipelineError> {
    let g = SkillGraph::parse(utf8("ontology", input(stage, inputs, "ontology")?)?)?;
    Ok(g.with_fuzzy_threshold(config.fuzzy_threshold))
}

fn rankings_in(stage: Stage, inputs: &Inputs, role: &str) -> Result<Vec<JobRanking>, PipelineError> {
    Ok(ranker::read_rankings(utf8(role, input(stage, inputs, role)?)?)?)
}

fn gold_matches(pairs: &[LabeledPair]) -> BTreeSet<(String, String)> {
    pairs
        .iter()
        .filter(|p| p.label == Label::Match)
        .map(|p| (p.job_id.clone(), p.candidate_id.clone()))
        .collect()
}

/// Candidates per job in the pool, jobs and candidates in id order.
fn pool_by_job(pairs: &[LabeledPair]) -> BTreeMap<&str, BTreeSet<&str>> {
    let mut m: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for p in pairs {
        m.entry(&p.job_id).or_default().insert(&p.candidate_id);
    }
    m
}

pub fn ingest(config: &StageConfig, inputs: &Inputs) -> Result<StageOutput, PipelineError> {
    let st = Stage::Ingest;
    let statuses = match inputs.iter().find(|(r, _)| r == "statuses") {
        Some((_, b)) => StatusTable::parse(utf8("statuses", b)?)?,
        None => StatusTable::default(),
    };
    let docs = corpus::read_documents(input(st, inputs, "documents")?, "documents")?;
    let pairs = corpus::read_pairs(utf8("pairs", input(st, inputs, "pairs")?)?, &statuses)?;
    let clean = corpus::dedupe_and_filter(&pairs, &docs, config.min_words)?;
    let split = corpus::stratified_split(&clean.pairs, config.seed)?;
    let metrics = BTreeMap::from([
        ("documents_in".to_string(), docs.len() as f64),
        ("documents_out".to_string(), clean.documents.len() as f64),
        ("pairs_in".to_string(), pairs.len() as f64),
        ("pairs_out".to_string(), clean.pairs.len() as f64),
        ("audit_entries".to_string(), clean.audit.len() as f64),
        ("train".to_string(), split.train.len() as f64),
        ("validation".to_string(), split.validation.len() as f64),
        ("test".to_string(), split.test.len() as f64),
    ]);
    let audit = corpus::write_audit_log(&clean.audit).into_bytes();
    let bundle = CorpusBundle {
        documents: clean.documents,
        pairs: clean.pairs,
        split,
    };
    Ok(StageOutput {
        outputs: vec![
            ("corpus".into(), ArtifactKind::Corpus, to_json(&bundle)),
            ("audit".into(), ArtifactKind::Report, audit),
        ],
        metrics,
    })
}

pub fn plan(config: &StageConfig, inputs: &Inputs) -> Result<StageOutput, PipelineError> {
    let corpus = corpus_in(Stage::Plan, inputs)?;
    let docs = corpus.document_map();
    let jobs: BTreeSet<&str> = corpus.pairs.iter().map(|p| p.job_id.as_str()).collect();
    let resumes: BTreeSet<&str> = corpus.pairs.iter().map(|p| p.candidate_id.as_str()).collect();
    let texts =
        |ids: &BTreeSet<&str>| -> Vec<&str> { ids.iter().filter_map(|id| docs.get(id)).map(|d| d.text()).collect() };
    let tok = SimpleTokenizer;
    let plan = textpipe::plan_chunks(
        &textpipe::token_lengths(&texts(&jobs), &tok),
        &textpipe::token_lengths(&texts(&resumes), &tok),
        config.window,
        config.overlap,
        config.loss_threshold,
    )?;
    let metrics = BTreeMap::from([
        ("k_job".to_string(), plan.k_job as f64),
        ("k_resume".to_string(), plan.k_resume as f64),
        ("loss_job".to_string(), plan.realized_loss_job),
        ("loss_resume".to_string(), plan.realized_loss_resume),
    ]);
    Ok(StageOutput {
        outputs: vec![("plan".into(), ArtifactKind::ChunkPlan, plan.to_json().into_bytes())],
        metrics,
    })
}

pub fn train(config: &StageConfig, inputs: &Inputs, seed: u64) -> Result<StageOutput, PipelineError> {
    let corpus = corpus_in(Stage::Train, inputs)?;
    let plan = plan_in(Stage::Train, inputs)?;
    let model = Model::new(config.encoder, config.dim, config.buckets, seed);
    let tc = TrainConfig {
        seed,
        ..config.train_config()
    };
    let out = matchnet::train(&corpus.split, &corpus.documents, &plan, &model, &tc)?;
    let mut metrics = BTreeMap::from([
        ("best_epoch".to_string(), out.best_epoch as f64),
        ("epochs_run".to_string(), out.epochs.len() as f64),
    ]);
    if let Some(best) = out.epochs.iter().find(|e| e.epoch == out.best_epoch) {
        metrics.insert("val_f1".into(), best.val_f1);
        metrics.insert("val_accuracy".into(), best.val_accuracy);
        metrics.insert("val_loss".into(), best.val_loss);
    }
    Ok(StageOutput {
        outputs: vec![("checkpoint".into(), ArtifactKind::Checkpoint, out.model.to_checkpoint())],
        metrics,
    })
}

/// Requirements, candidate profiles and filter outcome for every job in the
/// pool; the ranking fields are filled in by [`rank`].
pub fn screen(
    corpus: &CorpusBundle,
    pool: &[LabeledPair],
    graph: &SkillGraph,
    patterns: &PatternSet,
) -> Result<Vec<JobState>, PipelineError> {
    let docs = corpus.document_map();
    let mentions = MentionIndex::skills(graph);
    let by_job: Vec<(&str, BTreeSet<&str>)> = pool_by_job(pool).into_iter().collect();
    par::try_map(&by_job, |(job_id, cands)| {
        let job = docs.get(job_id).ok_or_else(|| PipelineError::Malformed {
            role: "corpus".into(),
            reason: format!("pair references missing job {job_id}"),
        })?;
        let requirements = filtering::parse_requirements(job, patterns, Some(graph));
        let profiles: Vec<_> = cands
            .iter()
            .filter_map(|c| docs.get(c))
            .map(|d| filtering::extract_profile(d, patterns, Some(graph), Some(&mentions)))
            .collect();
        let filter = filtering::apply_filters(&requirements, &profiles, Some(graph));
        Ok(JobState {
            job_id: job_id.to_string(),
            requirements,
            filter,
            ranking: JobRanking {
                job_id: job_id.to_string(),
                entries: Vec::new(),
            },
            profiles: profiles.into_iter().map(|p| (p.candidate_id.clone(), p)).collect(),
            hired: None,
        })
    })
}

/// Best-ranked gold match inside the top `k`, standing in for the hire.
fn hired_within(ranking: &JobRanking, gold: &BTreeSet<(String, String)>, k: usize) -> Option<String> {
    ranking
        .entries
        .iter()
        .take(k)
        .find(|e| gold.contains(&(ranking.job_id.clone(), e.candidate_id.clone())))
        .map(|e| e.candidate_id.clone())
}

pub fn rank(config: &StageConfig, inputs: &Inputs) -> Result<StageOutput, PipelineError> {
    let st = Stage::Rank;
    let corpus = corpus_in(st, inputs)?;
    let plan = plan_in(st, inputs)?;
    let model = model_in(st, inputs)?;
    let graph = graph_in(st, inputs, config)?;
    let patterns = PatternSet::parse(utf8("patterns", input(st, inputs, "patterns")?)?)?;
    let pool = corpus.pool(config.rank_pool);
    let gold = gold_matches(pool);
    let mut states = screen(&corpus, pool, &graph, &patterns)?;
    let docs = corpus.document_map();
    let requests: Vec<(&Document, Vec<&Document>)> = states
        .iter()
        .map(|s| {
            (
                docs[s.job_id.as_str()],
                s.filter.passed.iter().map(|c| docs[c.as_str()]).collect(),
            )
        })
        .collect();
    let neural = ranker::rank_jobs(&requests, Scorer::Neural(&model), &plan)?;
    let baseline = ranker::rank_jobs(&requests, Scorer::Cosine(&model), &plan)?;
    let mut rejected = 0usize;
    for (s, r) in states.iter_mut().zip(&neural) {
        rejected += s.filter.rejected.len();
        s.ranking = r.clone();
        s.hired = hired_within(r, &gold, config.top_k);
    }
    let metrics = BTreeMap::from([
        ("jobs".to_string(), states.len() as f64),
        (
            "ranked".to_string(),
            neural.iter().map(|r| r.entries.len()).sum::<usize>() as f64,
        ),
        ("rejected".to_string(), rejected as f64),
    ]);
    Ok(StageOutput {
        outputs: vec![
            (
                "ranking".into(),
                ArtifactKind::Ranking,
                ranker::write_rankings(&neural).into_bytes(),
            ),
            (
                "baseline_ranking".into(),
                ArtifactKind::Ranking,
                ranker::write_rankings(&baseline).into_bytes(),
            ),
            (
                "screening".into(),
                ArtifactKind::Report,
                to_json(&Screening { jobs: states }),
            ),
        ],
        metrics,
    })
}

pub fn evaluate(config: &StageConfig, inputs: &Inputs) -> Result<StageOutput, PipelineError> {
    let st = Stage::Evaluate;
    let corpus = corpus_in(st, inputs)?;
    let plan = plan_in(st, inputs)?;
    let model = model_in(st, inputs)?;
    let docs = corpus.document_map();
    let test = matchnet::encode_pairs(&corpus.split.test, &docs, &plan, &model.encoder, &SimpleTokenizer)?;
    let summary = matchnet::evaluate(&model, &test, matchnet::ClassWeights(config.class_weights))?;
    let stats = metrics::confusion_stats(&summary.counts);
    let n = test.len();
    let mut records = Vec::new();
    let mut push = |name: &str, n: usize, value: Option<f64>| {
        if let Some(value) = value {
            records.push(MetricRecord {
                name: name.to_string(),
                n,
                value,
            });
        }
    };
    push("loss", n, Some(summary.loss));
    push("accuracy", n, stats.accuracy);
    push("precision", n, stats.precision);
    push("recall", n, stats.recall);
    push("f1", n, stats.f1);
    let scores: Vec<f64> = par::try_map(&test, |ex| matchnet::predict_encoded(&ex.job, &ex.resume, &model))?
        .iter()
        .map(|p| p.p_match)
        .collect();
    let labels: Vec<bool> = test.iter().map(|e| e.is_match).collect();
    push("roc_auc", n, metrics::roc_auc(&scores, &labels).ok());
    let audit =
        corpus::read_audit_log(utf8("audit", input(st, inputs, "audit")?)?).map_err(|e| PipelineError::Malformed {
            role: "audit".into(),
            reason: e.to_string(),
        })?;
    let mut excluded: BTreeMap<String, usize> = BTreeMap::new();
    for e in &audit {
        let code = serde_json::to_value(e.reason_code).expect("serializable");
        *excluded
            .entry(code.as_str().unwrap_or_default().to_string())
            .or_default() += 1;
    }
    for (reason, count) in excluded {
        push(&format!("excluded_{reason}"), audit.len(), Some(count as f64));
    }
    let gold = gold_matches(corpus.pool(config.rank_pool));
    for (prefix, role) in [("", "ranking"), ("baseline_", "baseline_ranking")] {
        let report = ranker::evaluate_ranking(&rankings_in(st, inputs, role)?, &gold, &config.ks)?;
        for r in report.to_records() {
            records.push(MetricRecord {
                name: format!("{prefix}{}", r.name),
                ..r
            });
        }
    }
    let metrics = records
        .iter()
        .map(|r| {
            let key = if r.name.ends_with("ndcg") {
                format!("{}@{}", r.name, r.n)
            } else {
                r.name.clone()
            };
            (key, r.value)
        })
        .collect();
    Ok(StageOutput {
        outputs: vec![(
            "report".into(),
            ArtifactKind::Report,
            metrics::write_report(&records).into_bytes(),
        )],
        metrics,
    })
}

pub fn explain(config: &StageConfig, inputs: &Inputs) -> Result<StageOutput, PipelineError> {
    let st = Stage::Explain;
    let corpus = corpus_in(st, inputs)?;
    let plan = plan_in(st, inputs)?;
    let model = model_in(st, inputs)?;
    let graph = graph_in(st, inputs, config)?;
    let screening: Screening = json("screening", input(st, inputs, "screening")?)?;
    let rankings = rankings_in(st, inputs, "ranking")?;
    let evaluation = metrics::read_report(utf8("evaluation", input(st, inputs, "evaluation")?)?).map_err(|e| {
        PipelineError::Malformed {
            role: "evaluation".into(),
            reason: e.to_string(),
        }
    })?;
    let mut jobs: BTreeMap<String, JobState> = screening.jobs.into_iter().map(|s| (s.job_id.clone(), s)).collect();
    for r in rankings {
        if let Some(s) = jobs.get_mut(&r.job_id) {
            s.ranking = r;
        }
    }
    let explainer = Explainer {
        model: &model,
        plan: &plan,
        graph: &graph,
        documents: corpus.document_map(),
        jobs,
        k: config.top_k,
    };
    let mut reports = Vec::new();
    for (job_id, state) in &explainer.jobs {
        reports.push(explainer.recruiter_report(job_id, config.top_k)?);
        if let Some(h) = &state.hired {
            reports.push(explainer.poster_report(job_id, h)?);
        }
        let candidates = state
            .filter
            .rejected
            .iter()
            .map(|r| &r.candidate_id)
            .chain(state.ranking.entries.iter().map(|e| &e.candidate_id));
        for c in candidates {
            reports.push(explainer.candidate_report(c, job_id)?);
        }
    }
    let metrics = BTreeMap::from([("reports".to_string(), reports.len() as f64)]);
    Ok(StageOutput {
        outputs: vec![(
            "reports".into(),
            ArtifactKind::Report,
            to_json(&ReportBundle { evaluation, reports }),
        )],
        metrics,
    })
}

pub fn run_stage(stage: Stage, config: &StageConfig, inputs: &Inputs, seed: u64) -> Result<StageOutput, PipelineError> {
    config.validate()?;
    match stage {
        Stage::Ingest => ingest(config, inputs),
        Stage::Plan => plan(config, inputs),
        Stage::Train => train(config, inputs, seed),
        Stage::Rank => rank(config, inputs),
        Stage::Evaluate => evaluate(config, inputs),
        Stage::Explain => explain(config, inputs),
    }
}

/// Replays stages from stored bytes.
#[derive(Debug, Default, Clone, Copy)]
pub struct PipelineExecutor;

impl StageExecutor for PipelineExecutor {
    fn execute(
        &self,
        stage: Stage,
        config: &[u8],
        inputs: &[(String, Vec<u8>)],
        seed: u64,
    ) -> Result<Vec<(String, Vec<u8>)>, String> {
        let config = StageConfig::from_bytes(config).map_err(|e| e.to_string())?;
        let out = run_stage(stage, &config, inputs, seed).map_err(|e| e.to_string())?;
        Ok(out.outputs.into_iter().map(|(role, _, bytes)| (role, bytes)).collect())
    }
}

/// Runs stages against a store: stores inputs and outputs and records the
/// run.
pub struct Runner<'s> {
    pub store: &'s mut Store,
    pub config: StageConfig,
    config_ref: ArtifactRef,
}

impl<'s> Runner<'s> {
    pub fn new(store: &'s mut Store, config: StageConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let config_ref = store.put_artifact(&config.to_bytes(), ArtifactKind::Config)?;
        Ok(Runner {
            store,
            config,
            config_ref,
        })
    }

    pub fn config_ref(&self) -> &ArtifactRef {
        &self.config_ref
    }

    pub fn put(&mut self, bytes: &[u8], kind: ArtifactKind) -> Result<ArtifactRef, PipelineError> {
        Ok(self.store.put_artifact(bytes, kind)?)
    }

    /// Execute `stage` on stored inputs and record the run.
    pub fn run(&mut self, stage: Stage, inputs: &[(&str, &ArtifactRef)]) -> Result<RunRecord, PipelineError> {
        let mut loaded = Vec::with_capacity(inputs.len());
        for (role, a) in inputs {
            loaded.push((role.to_string(), self.store.read_blob(&a.content_hash)?));
        }
        let seed = self.config.seed;
        let out = run_stage(stage, &self.config, &loaded, seed)?;
        let mut refs = Vec::with_capacity(out.outputs.len());
        for (role, kind, bytes) in &out.outputs {
            refs.push((role.clone(), self.store.put_artifact(bytes, *kind)?));
        }
        let outputs: Vec<(&str, &ArtifactRef)> = refs.iter().map(|(r, a)| (r.as_str(), a)).collect();
        Ok(self
            .store
            .record_run(stage, &self.config_ref, inputs, &outputs, out.metrics, seed)?)
    }

    /// Most recent run of `stage` under this runner's config.
    pub fn latest(&self, stage: Stage) -> Option<&RunRecord> {
        self.store
            .runs()
            .iter()
            .rev()
            .find(|r| r.stage == stage && r.config.content_hash == self.config_ref.content_hash)
    }
}

/// Artifacts of a complete pipeline execution.
#[derive(Debug, Clone)]
pub struct PipelineRuns {
    pub raw_documents: ArtifactRef,
    pub runs: BTreeMap<Stage, RunRecord>,
}

impl PipelineRuns {
    pub fn output(&self, stage: Stage, role: &str) -> &ArtifactRef {
        self.runs[&stage].output(role).expect("stage output present")
    }
}

/// `ingest → plan → train → rank → evaluate → explain` in one go.
pub fn run_all(
    runner: &mut Runner<'_>,
    documents: &[u8],
    pairs: &[u8],
    ontology: &[u8],
    patterns: &[u8],
) -> Result<PipelineRuns, PipelineError> {
    let docs = runner.put(documents, ArtifactKind::Corpus)?;
    let prs = runner.put(pairs, ArtifactKind::Corpus)?;
    let onto = runner.put(ontology, ArtifactKind::Ontology)?;
    let pats = runner.put(patterns, ArtifactKind::Config)?;
    let mut runs = BTreeMap::new();
    let ing = runner.run(Stage::Ingest, &[("documents", &docs), ("pairs", &prs)])?;
    let corpus = ing.output("corpus").expect("corpus").clone();
    let audit = ing.output("audit").expect("audit").clone();
    let pl = runner.run(Stage::Plan, &[("corpus", &corpus)])?;
    let plan = pl.output("plan").expect("plan").clone();
    let tr = runner.run(Stage::Train, &[("corpus", &corpus), ("plan", &plan)])?;
    let ckpt = tr.output("checkpoint").expect("checkpoint").clone();
    let rk = runner.run(
        Stage::Rank,
        &[
            ("corpus", &corpus),
            ("plan", &plan),
            ("checkpoint", &ckpt),
            ("ontology", &onto),
            ("patterns", &pats),
        ],
    )?;
    let ranking = rk.output("ranking").expect("ranking").clone();
    let baseline = rk.output("baseline_ranking").expect("baseline").clone();
    let screening = rk.output("screening").expect("screening").clone();
    let ev = runner.run(
        Stage::Evaluate,
        &[
            ("corpus", &corpus),
            ("audit", &audit),
            ("plan", &plan),
            ("checkpoint", &ckpt),
            ("ranking", &ranking),
            ("baseline_ranking", &baseline),
        ],
    )?;
    let evaluation = ev.output("report").expect("report").clone();
    let ex = runner.run(
        Stage::Explain,
        &[
            ("corpus", &corpus),
            ("plan", &plan),
            ("checkpoint", &ckpt),
            ("ontology", &onto),
            ("ranking", &ranking),
            ("screening", &screening),
            ("evaluation", &evaluation),
        ],
    )?;
    for r in [ing, pl, tr, rk, ev, ex] {
        runs.insert(r.stage, r);
    }
    Ok(PipelineRuns {
        raw_documents: docs,
        runs,
    })
}
