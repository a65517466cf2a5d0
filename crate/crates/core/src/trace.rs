//! Content-addressed artifact store and append-only run ledger.
//!
//! Layout under the store root:
//!
//! ```text
//! objects/ab/cdef0123…   blob whose SHA-256 is abcdef0123…
//! ledger.jsonl           one record per line, UTF-8
//! ```
//!
//! Ledger records, fields in serialization order:
//!
//! * `{"record":"artifact","content_hash","kind","byte_size","created_at"}`
//! * `{"record":"run","run_id","stage","config","inputs","outputs","metrics","seed","recorded_at"}`
//!   where `inputs`/`outputs` are lists of `{"role","artifact"}`.
//!
//! Timestamps appear only in the ledger; they never feed a hash.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("storage failure at {path}: {source}")]
    StorageFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown artifact {0}")]
    UnknownRef(String),
    #[error("unknown id {0}")]
    UnknownId(String),
    #[error("input blob {0} is missing from the store")]
    MissingInput(String),
    #[error("ledger line {line} is malformed: {reason}")]
    CorruptLedger { line: usize, reason: String },
    #[error("run {0} already recorded with different outputs")]
    RunConflict(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TraceError + '_ {
    move |source| TraceError::StorageFailure {
        path: path.to_path_buf(),
        source,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Corpus,
    Ontology,
    ChunkPlan,
    Checkpoint,
    Ranking,
    Report,
    Config,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub content_hash: String,
    pub kind: ArtifactKind,
    pub byte_size: u64,
    /// Seconds since the Unix epoch when the blob was first stored.
    pub created_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Plan,
    Train,
    Rank,
    Evaluate,
    Explain,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Plan => "plan",
            Stage::Train => "train",
            Stage::Rank => "rank",
            Stage::Evaluate => "evaluate",
            Stage::Explain => "explain",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An artifact together with the part it plays in a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleRef {
    pub role: String,
    pub artifact: ArtifactRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub stage: Stage,
    pub config: ArtifactRef,
    pub inputs: Vec<RoleRef>,
    pub outputs: Vec<RoleRef>,
    pub metrics: BTreeMap<String, f64>,
    pub seed: u64,
    pub recorded_at: u64,
}

impl RunRecord {
    pub fn input(&self, role: &str) -> Option<&ArtifactRef> {
        self.inputs.iter().find(|r| r.role == role).map(|r| &r.artifact)
    }

    pub fn output(&self, role: &str) -> Option<&ArtifactRef> {
        self.outputs.iter().find(|r| r.role == role).map(|r| &r.artifact)
    }
}

/// SHA-256 over `stage \n config_hash \n` followed by the sorted input
/// hashes, each newline-terminated.
pub fn compute_run_id(stage: Stage, config_hash: &str, input_hashes: &[&str]) -> String {
    let mut sorted: Vec<&str> = input_hashes.to_vec();
    sorted.sort_unstable();
    let mut h = Sha256::new();
    h.update(stage.as_str().as_bytes());
    h.update(b"\n");
    h.update(config_hash.as_bytes());
    h.update(b"\n");
    for i in sorted {
        h.update(i.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum LedgerRecord {
    Artifact(ArtifactRef),
    Run(RunRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LineageNode {
    Artifact(ArtifactRef),
    Run(RunRecord),
}

impl LineageNode {
    pub fn id(&self) -> &str {
        match self {
            LineageNode::Artifact(a) => &a.content_hash,
            LineageNode::Run(r) => &r.run_id,
        }
    }
}

/// Ancestry of an artifact or run, ancestors before descendants.
#[derive(Debug, Clone, PartialEq)]
pub struct Lineage {
    pub nodes: Vec<LineageNode>,
    /// `(parent, child)` id pairs.
    pub edges: Vec<(String, String)>,
}

impl Lineage {
    pub fn contains(&self, id: &str) -> bool {
        self.nodes.iter().any(|n| n.id() == id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn runs(&self) -> impl Iterator<Item = &RunRecord> {
        self.nodes.iter().filter_map(|n| match n {
            LineageNode::Run(r) => Some(r),
            LineageNode::Artifact(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayOutcome {
    Reproduced,
    /// Hashes of recorded artifacts whose stored bytes or re-executed
    /// outputs no longer match the ledger.
    Diverged(Vec<String>),
}

/// Re-executes a recorded stage from its stored config and inputs.
pub trait StageExecutor {
    /// Outputs as `(role, bytes)`. An `Err` means the stage could not run on
    /// the given bytes.
    fn execute(
        &self,
        stage: Stage,
        config: &[u8],
        inputs: &[(String, Vec<u8>)],
        seed: u64,
    ) -> Result<Vec<(String, Vec<u8>)>, String>;
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    artifacts: HashMap<String, ArtifactRef>,
    runs: Vec<RunRecord>,
    run_index: HashMap<String, usize>,
    producer: HashMap<String, usize>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl Store {
    /// Open (creating if needed) the store at `root` and load its ledger.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, TraceError> {
        let root = root.into();
        let objects = root.join("objects");
        fs::create_dir_all(&objects).map_err(io_err(&objects))?;
        let mut store = Store {
            root,
            artifacts: HashMap::new(),
            runs: Vec::new(),
            run_index: HashMap::new(),
            producer: HashMap::new(),
        };
        let ledger = store.ledger_path();
        if ledger.exists() {
            let text = fs::read_to_string(&ledger).map_err(io_err(&ledger))?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: LedgerRecord = serde_json::from_str(line).map_err(|e| TraceError::CorruptLedger {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
                store.index(rec);
            }
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn ledger_path(&self) -> PathBuf {
        self.root.join("ledger.jsonl")
    }

    pub fn blob_path(&self, hash: &str) -> PathBuf {
        let (head, tail) = hash.split_at(2.min(hash.len()));
        self.root.join("objects").join(head).join(tail)
    }

    fn index(&mut self, rec: LedgerRecord) {
        match rec {
            LedgerRecord::Artifact(a) => {
                self.artifacts.entry(a.content_hash.clone()).or_insert(a);
            }
            LedgerRecord::Run(r) => {
                let i = self.runs.len();
                for o in &r.outputs {
                    self.producer.entry(o.artifact.content_hash.clone()).or_insert(i);
                }
                self.run_index.entry(r.run_id.clone()).or_insert(i);
                self.runs.push(r);
            }
        }
    }

    fn append(&mut self, rec: LedgerRecord) -> Result<(), TraceError> {
        let path = self.ledger_path();
        let mut line = serde_json::to_string(&rec).expect("serializable");
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        f.lock().map_err(io_err(&path))?;
        let res = f.write_all(line.as_bytes()).and_then(|_| f.flush());
        let _ = f.unlock();
        res.map_err(io_err(&path))?;
        self.index(rec);
        Ok(())
    }

    /// Store `bytes` under their digest. Storing identical bytes again returns
    /// the original reference and writes nothing.
    pub fn put_artifact(&mut self, bytes: &[u8], kind: ArtifactKind) -> Result<ArtifactRef, TraceError> {
        let hash = sha256_hex(bytes);
        if let Some(a) = self.artifacts.get(&hash) {
            return Ok(a.clone());
        }
        let path = self.blob_path(&hash);
        if !path.exists() {
            let dir = path.parent().expect("fan-out dir");
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let tmp = dir.join(format!(".{}.tmp", &hash[2..]));
            fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
            fs::rename(&tmp, &path).map_err(io_err(&path))?;
        }
        let a = ArtifactRef {
            content_hash: hash,
            kind,
            byte_size: bytes.len() as u64,
            created_at: now(),
        };
        self.append(LedgerRecord::Artifact(a.clone()))?;
        Ok(a)
    }

    pub fn artifact(&self, hash: &str) -> Option<&ArtifactRef> {
        self.artifacts.get(hash)
    }

    /// Raw stored bytes, unchecked.
    pub fn read_blob(&self, hash: &str) -> Result<Vec<u8>, TraceError> {
        if !self.artifacts.contains_key(hash) {
            return Err(TraceError::UnknownRef(hash.to_string()));
        }
        let path = self.blob_path(hash);
        match fs::read(&path) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(TraceError::MissingInput(hash.to_string())),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    /// Append a run. Every cited artifact must already be stored. Recording
    /// the same run twice with the same outputs returns the first record.
    pub fn record_run(
        &mut self,
        stage: Stage,
        config: &ArtifactRef,
        inputs: &[(&str, &ArtifactRef)],
        outputs: &[(&str, &ArtifactRef)],
        metrics: BTreeMap<String, f64>,
        seed: u64,
    ) -> Result<RunRecord, TraceError> {
        let cited = std::iter::once(config)
            .chain(inputs.iter().map(|(_, a)| *a))
            .chain(outputs.iter().map(|(_, a)| *a));
        for a in cited {
            if !self.artifacts.contains_key(&a.content_hash) {
                return Err(TraceError::UnknownRef(a.content_hash.clone()));
            }
        }
        let to_roles = |v: &[(&str, &ArtifactRef)]| -> Vec<RoleRef> {
            v.iter()
                .map(|(role, a)| RoleRef {
                    role: role.to_string(),
                    artifact: self.artifacts[&a.content_hash].clone(),
                })
                .collect()
        };
        let hashes: Vec<&str> = inputs.iter().map(|(_, a)| a.content_hash.as_str()).collect();
        let run_id = compute_run_id(stage, &config.content_hash, &hashes);
        let record = RunRecord {
            run_id: run_id.clone(),
            stage,
            config: self.artifacts[&config.content_hash].clone(),
            inputs: to_roles(inputs),
            outputs: to_roles(outputs),
            metrics,
            seed,
            recorded_at: now(),
        };
        if let Some(&i) = self.run_index.get(&run_id) {
            let prev = &self.runs[i];
            let same = |a: &[RoleRef], b: &[RoleRef]| {
                a.len() == b.len()
                    && a.iter()
                        .zip(b)
                        .all(|(x, y)| x.role == y.role && x.artifact.content_hash == y.artifact.content_hash)
            };
            return if same(&prev.outputs, &record.outputs) {
                Ok(prev.clone())
            } else {
                Err(TraceError::RunConflict(run_id))
            };
        }
        self.append(LedgerRecord::Run(record.clone()))?;
        Ok(record)
    }

    pub fn run(&self, run_id: &str) -> Option<&RunRecord> {
        self.run_index.get(run_id).map(|&i| &self.runs[i])
    }

    pub fn runs(&self) -> &[RunRecord] {
        &self.runs
    }

    /// Run that first produced the artifact, if any.
    pub fn producer_of(&self, hash: &str) -> Option<&RunRecord> {
        self.producer.get(hash).map(|&i| &self.runs[i])
    }

    /// Transitive closure of producing runs and their inputs and configs.
    pub fn lineage(&self, id: &str) -> Result<Lineage, TraceError> {
        if !self.artifacts.contains_key(id) && !self.run_index.contains_key(id) {
            return Err(TraceError::UnknownId(id.to_string()));
        }
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        let mut done = BTreeSet::new();
        // iterative post-order DFS; the ledger only references earlier
        // records, so there are no cycles
        let mut stack: Vec<(String, bool)> = vec![(id.to_string(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if done.contains(&node) {
                continue;
            }
            let parents: Vec<String> = if let Some(r) = self.run(&node) {
                let mut p: Vec<String> = std::iter::once(r.config.content_hash.clone())
                    .chain(r.inputs.iter().map(|i| i.artifact.content_hash.clone()))
                    .collect();
                p.dedup();
                p
            } else {
                self.producer_of(&node).map(|r| r.run_id.clone()).into_iter().collect()
            };
            if expanded {
                done.insert(node.clone());
                for p in &parents {
                    edges.push((p.clone(), node.clone()));
                }
                nodes.push(match self.run(&node) {
                    Some(r) => LineageNode::Run(r.clone()),
                    None => LineageNode::Artifact(self.artifacts[&node].clone()),
                });
            } else {
                stack.push((node, true));
                for p in parents.into_iter().rev() {
                    if !done.contains(&p) {
                        stack.push((p, false));
                    }
                }
            }
        }
        edges.sort();
        edges.dedup();
        Ok(Lineage { nodes, edges })
    }

    /// Check the stored bytes of everything the run cites, then re-execute
    /// the stage and compare output hashes.
    pub fn verify_replay(&self, run_id: &str, executor: &dyn StageExecutor) -> Result<ReplayOutcome, TraceError> {
        let run = self
            .run(run_id)
            .ok_or_else(|| TraceError::UnknownId(run_id.to_string()))?;
        let mut diverged = BTreeSet::new();
        let load = |a: &ArtifactRef, diverged: &mut BTreeSet<String>| -> Result<Vec<u8>, TraceError> {
            let bytes = self.read_blob(&a.content_hash)?;
            if sha256_hex(&bytes) != a.content_hash {
                diverged.insert(a.content_hash.clone());
            }
            Ok(bytes)
        };
        let config = load(&run.config, &mut diverged)?;
        let mut inputs = Vec::with_capacity(run.inputs.len());
        for i in &run.inputs {
            inputs.push((i.role.clone(), load(&i.artifact, &mut diverged)?));
        }
        for o in &run.outputs {
            match load(&o.artifact, &mut diverged) {
                Ok(_) => {}
                Err(TraceError::MissingInput(h)) => {
                    diverged.insert(h);
                }
                Err(e) => return Err(e),
            }
        }
        match executor.execute(run.stage, &config, &inputs, run.seed) {
            Ok(produced) => {
                let produced: HashMap<String, String> =
                    produced.into_iter().map(|(role, b)| (role, sha256_hex(&b))).collect();
                for o in &run.outputs {
                    if produced.get(&o.role) != Some(&o.artifact.content_hash) {
                        diverged.insert(o.artifact.content_hash.clone());
                    }
                }
            }
            Err(_) => diverged.extend(run.outputs.iter().map(|o| o.artifact.content_hash.clone())),
        }
        Ok(if diverged.is_empty() {
            ReplayOutcome::Reproduced
        } else {
            ReplayOutcome::Diverged(diverged.into_iter().collect())
        })
    }
}
