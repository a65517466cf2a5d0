//! The operator config file: input paths plus the pipeline settings.
//!
//! ```toml
//! [paths]
//! documents = "documents.jsonl"
//! pairs = "pairs.tsv"
//! ontology = "ontology.tsv"   # bundled mini ontology when absent
//! patterns = "patterns.tsv"   # bundled requirement patterns when absent
//! out = "out"
//!
//! [pipeline]
//! window = 64
//! overlap = 8
//! seed = 7
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use matchforge_core::pipeline::StageConfig;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub documents: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub statuses: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
    pub patterns: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub store: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub paths: Paths,
    pub pipeline: StageConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&src).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let p = &mut cfg.paths;
        for slot in [
            &mut p.documents,
            &mut p.pairs,
            &mut p.statuses,
            &mut p.ontology,
            &mut p.patterns,
            &mut p.out,
            &mut p.store,
        ] {
            if let Some(rel) = slot.as_ref().filter(|p| p.is_relative()) {
                *slot = Some(base.join(rel));
            }
        }
        Ok(cfg)
    }
}
