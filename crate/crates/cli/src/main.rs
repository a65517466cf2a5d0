mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use matchforge_core::embed::EncoderVariant;
use matchforge_core::explain::Audience;
use matchforge_core::explain::ExplainError;
use matchforge_core::filtering::DEFAULT_PATTERNS;
use matchforge_core::pipeline::{PipelineError, PipelineExecutor, ReportBundle, Runner, StageConfig};
use matchforge_core::ranker::RankError;
use matchforge_core::trace::{ArtifactKind, ArtifactRef, LineageNode, ReplayOutcome, RunRecord, Stage, Store};
use matchforge_core::MINI_ONTOLOGY;
use thiserror::Error;

use config::FileConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("trace error: {0}")]
    Trace(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Model(_) => 4,
            CliError::Trace(_) => 5,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let msg = e.to_string();
        match e {
            PipelineError::Config(_) => CliError::Config(msg),
            PipelineError::MissingInput { ref role, .. } if role == "checkpoint" => CliError::Model(msg),
            PipelineError::Match(_) | PipelineError::Checkpoint(_) => CliError::Model(msg),
            PipelineError::Rank(RankError::Match(_) | RankError::Embed(_)) => CliError::Model(msg),
            PipelineError::Explain(ExplainError::Match(_)) => CliError::Model(msg),
            PipelineError::Trace(_) => CliError::Trace(msg),
            _ => CliError::Data(msg),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EncoderArg {
    Hash,
    Bag,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config file with `[paths]` and `[pipeline]` tables
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for splitting and training
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cut-offs for ranking metrics, e.g. 1,3,5,10
    #[arg(long, global = true, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long, global = true, value_enum)]
    encoder: Option<EncoderArg>,
    /// Directory receiving the stage artifacts
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

/// Job/resume matching pipeline.
///
/// Every stage stores its inputs and outputs in a content-addressed store
/// (`<out>/store`, or `$MATCHFORGE_STORE`) and records the run in its
/// ledger. Later stages pick up the most recent outputs of earlier ones.
#[derive(Debug, Parser)]
#[command(name = "matchforge", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean, deduplicate and split the labelled corpus
    Ingest {
        /// Documents as JSON lines (overrides the config)
        #[arg(long)]
        documents: Option<PathBuf>,
        /// Labelled pairs TSV (overrides the config)
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Status-to-label table TSV
        #[arg(long)]
        statuses: Option<PathBuf>,
    },
    /// Choose chunk counts for jobs and resumes
    Plan,
    /// Train the matching model
    Train,
    /// Screen hard requirements and rank candidates per job
    Rank,
    /// Classification and ranking metrics on the held-out pairs
    Evaluate,
    /// Stakeholder reports for every screened pairing
    Explain,
    /// Inspect the run ledger
    Trace {
        #[command(subcommand)]
        action: TraceAction,
    },
}

#[derive(Debug, Subcommand)]
enum TraceAction {
    /// List recorded runs
    Runs,
    /// Ancestors of a run id or artifact hash
    Lineage { id: String },
    /// Re-execute a run and compare its outputs
    Verify { run_id: String },
}

struct Context {
    file: FileConfig,
    stage: StageConfig,
    out: PathBuf,
    store: PathBuf,
}

impl Context {
    fn new(common: &Common) -> Result<Self, CliError> {
        let file = match &common.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let mut stage = file.pipeline.clone();
        if let Some(seed) = common.seed {
            stage.seed = seed;
        }
        if let Some(k) = &common.k {
            stage.ks = k.clone();
        }
        if let Some(e) = common.encoder {
            stage.encoder = match e {
                EncoderArg::Hash => EncoderVariant::FeatureHash,
                EncoderArg::Bag => EncoderVariant::TrainableBag,
            };
        }
        stage.validate()?;
        let out = common
            .out
            .clone()
            .or_else(|| file.paths.out.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        let store = std::env::var_os("MATCHFORGE_STORE")
            .map(PathBuf::from)
            .or_else(|| file.paths.store.clone())
            .unwrap_or_else(|| out.join("store"));
        Ok(Context {
            file,
            stage,
            out,
            store,
        })
    }

    fn open_store(&self) -> Result<Store, CliError> {
        Store::open(&self.store).map_err(|e| CliError::Trace(e.to_string()))
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn optional_file(path: Option<&PathBuf>, bundled: &str) -> Result<Vec<u8>, CliError> {
    match path {
        Some(p) => read_file(p),
        None => Ok(bundled.as_bytes().to_vec()),
    }
}

/// Most recent run of `stage`, whatever config produced it.
fn latest(store: &Store, stage: Stage) -> Option<&RunRecord> {
    store.runs().iter().rev().find(|r| r.stage == stage)
}

fn upstream(store: &Store, stage: Stage, role: &str) -> Result<ArtifactRef, CliError> {
    let missing = format!("no `{role}` available; run `matchforge {stage}` first");
    let found = latest(store, stage).and_then(|r| r.output(role)).cloned();
    match (found, stage) {
        (Some(a), _) => Ok(a),
        (None, Stage::Train) => Err(CliError::Model(missing)),
        (None, _) => Err(CliError::Data(missing)),
    }
}

fn file_name(role: &str) -> &'static str {
    match role {
        "corpus" => "corpus.json",
        "audit" => "audit.jsonl",
        "plan" => "plan.json",
        "checkpoint" => "model.ckpt",
        "ranking" => "ranking.jsonl",
        "baseline_ranking" => "baseline_ranking.jsonl",
        "screening" => "screening.json",
        "report" => "evaluation.jsonl",
        _ => "artifact.bin",
    }
}

fn audience_name(a: Audience) -> &'static str {
    match a {
        Audience::Candidate => "candidate",
        Audience::Recruiter => "recruiter",
        Audience::JobPoster => "job_poster",
    }
}

fn summary(run: &RunRecord) -> String {
    let mut line = format!("{} run {}", run.stage, run.run_id);
    for (name, value) in &run.metrics {
        if value.fract() == 0.0 && value.abs() < 1e15 {
            let _ = write!(line, " {name}={value}");
        } else {
            let _ = write!(line, " {name}={value:.4}");
        }
    }
    line
}

fn run_stage(ctx: &Context, stage: Stage, ingest_paths: Option<[Option<PathBuf>; 3]>) -> Result<(), CliError> {
    let mut store = ctx.open_store()?;
    let mut inputs: Vec<(&str, ArtifactRef)> = Vec::new();
    {
        let paths = &ctx.file.paths;
        let mut put = |bytes: Vec<u8>, kind| {
            store
                .put_artifact(&bytes, kind)
                .map_err(|e| CliError::Trace(e.to_string()))
        };
        match stage {
            Stage::Ingest => {
                let [documents, pairs, statuses] = ingest_paths.unwrap_or_default();
                let need = |flag: Option<PathBuf>, conf: &Option<PathBuf>, what: &str| {
                    flag.or_else(|| conf.clone())
                        .ok_or_else(|| CliError::Config(format!("no {what} file given (--{what} or paths.{what})")))
                };
                let documents = need(documents, &paths.documents, "documents")?;
                let pairs = need(pairs, &paths.pairs, "pairs")?;
                inputs.push(("documents", put(read_file(&documents)?, ArtifactKind::Corpus)?));
                inputs.push(("pairs", put(read_file(&pairs)?, ArtifactKind::Corpus)?));
                if let Some(s) = statuses.or_else(|| paths.statuses.clone()) {
                    inputs.push(("statuses", put(read_file(&s)?, ArtifactKind::Config)?));
                }
            }
            Stage::Rank => {
                inputs.push((
                    "ontology",
                    put(
                        optional_file(paths.ontology.as_ref(), MINI_ONTOLOGY)?,
                        ArtifactKind::Ontology,
                    )?,
                ));
                inputs.push((
                    "patterns",
                    put(
                        optional_file(paths.patterns.as_ref(), DEFAULT_PATTERNS)?,
                        ArtifactKind::Config,
                    )?,
                ));
            }
            Stage::Explain => {
                inputs.push((
                    "ontology",
                    put(
                        optional_file(paths.ontology.as_ref(), MINI_ONTOLOGY)?,
                        ArtifactKind::Ontology,
                    )?,
                ));
            }
            _ => {}
        }
    }
    let needs: &[(Stage, &str, &str)] = match stage {
        Stage::Ingest => &[],
        Stage::Plan => &[(Stage::Ingest, "corpus", "corpus")],
        Stage::Train => &[(Stage::Ingest, "corpus", "corpus"), (Stage::Plan, "plan", "plan")],
        Stage::Rank => &[
            (Stage::Ingest, "corpus", "corpus"),
            (Stage::Plan, "plan", "plan"),
            (Stage::Train, "checkpoint", "checkpoint"),
        ],
        Stage::Evaluate => &[
            (Stage::Train, "checkpoint", "checkpoint"),
            (Stage::Ingest, "corpus", "corpus"),
            (Stage::Ingest, "audit", "audit"),
            (Stage::Plan, "plan", "plan"),
            (Stage::Rank, "ranking", "ranking"),
            (Stage::Rank, "baseline_ranking", "baseline_ranking"),
        ],
        Stage::Explain => &[
            (Stage::Train, "checkpoint", "checkpoint"),
            (Stage::Ingest, "corpus", "corpus"),
            (Stage::Plan, "plan", "plan"),
            (Stage::Rank, "ranking", "ranking"),
            (Stage::Rank, "screening", "screening"),
            (Stage::Evaluate, "report", "evaluation"),
        ],
    };
    for (producer, output, role) in needs {
        inputs.push((role, upstream(&store, *producer, output)?));
    }

    let mut runner = Runner::new(&mut store, ctx.stage.clone())?;
    let refs: Vec<(&str, &ArtifactRef)> = inputs.iter().map(|(r, a)| (*r, a)).collect();
    let run = runner.run(stage, &refs)?;
    for out in &run.outputs {
        let bytes = runner
            .store
            .read_blob(&out.artifact.content_hash)
            .map_err(|e| CliError::Trace(e.to_string()))?;
        if out.role == "reports" {
            write_reports(ctx, &bytes)?;
        } else {
            ctx.write(file_name(&out.role), &bytes)?;
        }
    }
    println!("{}", summary(&run));
    Ok(())
}

fn write_reports(ctx: &Context, bytes: &[u8]) -> Result<(), CliError> {
    let bundle: ReportBundle =
        serde_json::from_slice(bytes).map_err(|e| CliError::Data(format!("report bundle: {e}")))?;
    for r in &bundle.reports {
        let stem = format!(
            "reports/{}_{}_{}",
            audience_name(r.audience),
            r.job_id,
            r.subjects.join("+")
        );
        ctx.write(&format!("{stem}.json"), r.to_json().as_bytes())?;
        ctx.write(&format!("{stem}.txt"), r.render_text().as_bytes())?;
    }
    Ok(())
}

fn trace(ctx: &Context, action: &TraceAction) -> Result<(), CliError> {
    let store = ctx.open_store()?;
    let terr = |e: matchforge_core::trace::TraceError| CliError::Trace(e.to_string());
    match action {
        TraceAction::Runs => {
            for r in store.runs() {
                println!("{} {} seed={} outputs={}", r.run_id, r.stage, r.seed, r.outputs.len());
            }
        }
        TraceAction::Lineage { id } => {
            let lineage = store.lineage(id).map_err(terr)?;
            for node in &lineage.nodes {
                match node {
                    LineageNode::Artifact(a) => println!("artifact {} {:?} {}B", a.content_hash, a.kind, a.byte_size),
                    LineageNode::Run(r) => println!("run {} {}", r.run_id, r.stage),
                }
            }
        }
        TraceAction::Verify { run_id } => match store.verify_replay(run_id, &PipelineExecutor).map_err(terr)? {
            ReplayOutcome::Reproduced => println!("reproduced {run_id}"),
            ReplayOutcome::Diverged(hashes) => {
                return Err(CliError::Trace(format!("run {run_id} diverged: {}", hashes.join(", "))));
            }
        },
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let ctx = Context::new(&cli.common)?;
    match cli.command {
        Command::Ingest {
            documents,
            pairs,
            statuses,
        } => run_stage(&ctx, Stage::Ingest, Some([documents, pairs, statuses])),
        Command::Plan => run_stage(&ctx, Stage::Plan, None),
        Command::Train => run_stage(&ctx, Stage::Train, None),
        Command::Rank => run_stage(&ctx, Stage::Rank, None),
        Command::Evaluate => run_stage(&ctx, Stage::Evaluate, None),
        Command::Explain => run_stage(&ctx, Stage::Explain, None),
        Command::Trace { action } => trace(&ctx, &action),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("matchforge: {e}");
            ExitCode::from(e.code())
        }
    }
}
