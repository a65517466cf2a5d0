//! Multilingual occupation/skill concept graph.
//!
//! Concepts carry a language-independent URI and per-language preferred,
//! alternative and hidden labels. `broader` edges point from a concept to its
//! parents and must form a DAG.
//!
//! # File format
//!
//! One concept per line, tab-separated, UTF-8. Lines starting with `#` and
//! blank lines are ignored.
//!
//! ```text
//! uri <TAB> kind <TAB> field <TAB> field ...
//! ```
//!
//! `kind` is `occupation`, `skill` or `qualification`. Each following field is
//! `key=value`:
//!
//! * `<lang>=preferred|alt1|alt2` labels for a language (`en`, `fr`, ...)
//! * `hidden.<lang>=h1|h2` hidden labels (matched but never displayed)
//! * `desc.<lang>=text` description
//! * `broader=uri1,uri2` parent concepts
//! * `essential=uri,...` / `optional=uri,...` skill links (occupations only)

mod jaro;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

pub use jaro::{jaro, jaro_winkler};

#[derive(Debug, Error, PartialEq)]
pub enum OntologyError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("uri {0} defined more than once")]
    DuplicateUri(String),
    #[error("{from} references undefined uri {to}")]
    DanglingUri { from: String, to: String },
    #[error("broader edges form a cycle through {0}")]
    CycleDetected(String),
    #[error("{from} links {to} as a skill but it is a {kind}")]
    KindMismatch {
        from: String,
        to: String,
        kind: ConceptKind,
    },
    #[error("no labels for language {0}")]
    UnknownLanguage(String),
    #[error("unknown uri {0}")]
    UnknownUri(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConceptKind {
    Occupation,
    Skill,
    Qualification,
}

impl fmt::Display for ConceptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConceptKind::Occupation => "occupation",
            ConceptKind::Skill => "skill",
            ConceptKind::Qualification => "qualification",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    pub preferred: String,
    pub alternatives: Vec<String>,
    pub hidden: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub uri: String,
    pub kind: ConceptKind,
    pub labels: BTreeMap<String, LabelSet>,
    pub description: BTreeMap<String, String>,
    pub broader: Vec<String>,
    pub essential_skills: Vec<String>,
    pub optional_skills: Vec<String>,
}

impl Concept {
    pub fn preferred_label(&self, lang: &str) -> Option<&str> {
        self.labels.get(lang).map(|l| l.preferred.as_str())
    }

    /// Preferred label in `lang`, falling back to English, then to the uri.
    pub fn display_label(&self, lang: &str) -> &str {
        self.preferred_label(lang)
            .or_else(|| self.preferred_label("en"))
            .unwrap_or(&self.uri)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "distance", rename_all = "snake_case")]
pub enum SkillRelation {
    Identical,
    /// First skill sits `depth` broader-edges below the second.
    NarrowerThan(u32),
    /// First skill sits `depth` broader-edges above the second.
    BroaderThan(u32),
    /// Closest common ancestor is `distance` edges away, summed over both sides.
    SharedAncestor(u32),
    Unrelated,
}

impl SkillRelation {
    pub fn mirror(self) -> Self {
        match self {
            SkillRelation::NarrowerThan(d) => SkillRelation::BroaderThan(d),
            SkillRelation::BroaderThan(d) => SkillRelation::NarrowerThan(d),
            other => other,
        }
    }
}

impl fmt::Display for SkillRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkillRelation::Identical => write!(f, "identical"),
            SkillRelation::NarrowerThan(d) => write!(f, "narrower({d})"),
            SkillRelation::BroaderThan(d) => write!(f, "broader({d})"),
            SkillRelation::SharedAncestor(d) => write!(f, "shared-ancestor({d})"),
            SkillRelation::Unrelated => write!(f, "unrelated"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelHit {
    pub uri: String,
    pub score: f64,
}

pub const DEFAULT_FUZZY_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone)]
struct IndexedLabel {
    normalized: String,
    chars: Vec<char>,
    concept: usize,
}

/// Lowercased, NFC, whitespace-collapsed form used for label comparison.
pub fn normalize_label(s: &str) -> String {
    s.nfc()
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Immutable, validated concept graph.
#[derive(Debug, Clone)]
pub struct SkillGraph {
    concepts: Vec<Concept>,
    by_uri: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    labels: BTreeMap<String, Vec<IndexedLabel>>,
    exact: BTreeMap<String, HashMap<String, BTreeSet<usize>>>,
    fuzzy_threshold: f64,
}

impl SkillGraph {
    pub fn parse(src: &str) -> Result<Self, OntologyError> {
        let mut concepts = Vec::new();
        for (i, line) in src.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            concepts.push(parse_line(line, i + 1)?);
        }
        Self::from_concepts(concepts)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, OntologyError> {
        let src = std::fs::read_to_string(path).map_err(|e| OntologyError::Parse {
            line: 0,
            reason: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&src)
    }

    pub fn from_concepts(concepts: Vec<Concept>) -> Result<Self, OntologyError> {
        let mut by_uri = HashMap::with_capacity(concepts.len());
        for (i, c) in concepts.iter().enumerate() {
            if by_uri.insert(c.uri.clone(), i).is_some() {
                return Err(OntologyError::DuplicateUri(c.uri.clone()));
            }
        }
        let resolve = |from: &str, to: &str| {
            by_uri.get(to).copied().ok_or_else(|| OntologyError::DanglingUri {
                from: from.to_string(),
                to: to.to_string(),
            })
        };
        let mut parents = vec![Vec::new(); concepts.len()];
        let mut children = vec![Vec::new(); concepts.len()];
        for (i, c) in concepts.iter().enumerate() {
            for b in &c.broader {
                let p = resolve(&c.uri, b)?;
                parents[i].push(p);
                children[p].push(i);
            }
            for s in c.essential_skills.iter().chain(&c.optional_skills) {
                let t = resolve(&c.uri, s)?;
                if concepts[t].kind != ConceptKind::Skill {
                    return Err(OntologyError::KindMismatch {
                        from: c.uri.clone(),
                        to: s.clone(),
                        kind: concepts[t].kind,
                    });
                }
            }
        }
        check_acyclic(&concepts, &parents)?;

        let mut labels: BTreeMap<String, Vec<IndexedLabel>> = BTreeMap::new();
        let mut exact: BTreeMap<String, HashMap<String, BTreeSet<usize>>> = BTreeMap::new();
        for (i, c) in concepts.iter().enumerate() {
            for (lang, set) in &c.labels {
                let all = std::iter::once(&set.preferred)
                    .chain(&set.alternatives)
                    .chain(&set.hidden);
                for label in all {
                    let normalized = normalize_label(label);
                    if normalized.is_empty() {
                        continue;
                    }
                    exact
                        .entry(lang.clone())
                        .or_default()
                        .entry(normalized.clone())
                        .or_default()
                        .insert(i);
                    labels.entry(lang.clone()).or_default().push(IndexedLabel {
                        chars: normalized.chars().collect(),
                        normalized,
                        concept: i,
                    });
                }
            }
        }

        Ok(SkillGraph {
            concepts,
            by_uri,
            parents,
            children,
            labels,
            exact,
            fuzzy_threshold: DEFAULT_FUZZY_THRESHOLD,
        })
    }

    pub fn with_fuzzy_threshold(mut self, threshold: f64) -> Self {
        self.fuzzy_threshold = threshold;
        self
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn concept(&self, uri: &str) -> Option<&Concept> {
        self.by_uri.get(uri).map(|&i| &self.concepts[i])
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    /// Number of `broader` edges in the graph.
    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Direct children (narrower concepts) of `uri`.
    pub fn narrower(&self, uri: &str) -> Result<Vec<&str>, OntologyError> {
        let i = self.index(uri)?;
        let mut out: Vec<&str> = self.children[i]
            .iter()
            .map(|&c| self.concepts[c].uri.as_str())
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    fn index(&self, uri: &str) -> Result<usize, OntologyError> {
        self.by_uri
            .get(uri)
            .copied()
            .ok_or_else(|| OntologyError::UnknownUri(uri.to_string()))
    }

    /// Resolve free text to concepts in `lang`. Exact (normalized) matches on
    /// any label score 1.0; otherwise the best Jaro-Winkler score over the
    /// concept's labels is used and hits below the fuzzy threshold dropped.
    /// Sorted by descending score, then uri.
    pub fn resolve_label(&self, text: &str, lang: &str) -> Result<Vec<LabelHit>, OntologyError> {
        let index = self
            .labels
            .get(lang)
            .ok_or_else(|| OntologyError::UnknownLanguage(lang.to_string()))?;
        let query = normalize_label(text);
        let mut best: BTreeMap<usize, f64> = BTreeMap::new();
        if let Some(hits) = self.exact.get(lang).and_then(|m| m.get(&query)) {
            for &i in hits {
                best.insert(i, 1.0);
            }
        }
        let qchars: Vec<char> = query.chars().collect();
        for label in index {
            if best.get(&label.concept) == Some(&1.0) {
                continue;
            }
            let s = jaro::jaro_winkler_chars(&qchars, &label.chars);
            if s >= self.fuzzy_threshold {
                let e = best.entry(label.concept).or_insert(0.0);
                if s > *e {
                    *e = s;
                }
            }
        }
        let mut hits: Vec<LabelHit> = best
            .into_iter()
            .map(|(i, score)| LabelHit {
                uri: self.concepts[i].uri.clone(),
                score,
            })
            .collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.uri.cmp(&b.uri)));
        Ok(hits)
    }

    /// Exact label lookup without the fuzzy fallback.
    pub fn lookup_exact(&self, label: &str, lang: &str) -> Vec<&str> {
        self.exact
            .get(lang)
            .and_then(|m| m.get(&normalize_label(label)))
            .map(|set| set.iter().map(|&i| self.concepts[i].uri.as_str()).collect())
            .unwrap_or_default()
    }

    /// Every normalized label of `lang` together with its concept uri.
    pub fn labels_for(&self, lang: &str) -> impl Iterator<Item = (&str, &str)> {
        self.labels
            .get(lang)
            .into_iter()
            .flatten()
            .map(|l| (l.normalized.as_str(), self.concepts[l.concept].uri.as_str()))
    }

    /// Shortest upward distance from `from` to every ancestor (including itself at 0).
    fn ancestors(&self, from: usize) -> HashMap<usize, u32> {
        let mut dist = HashMap::from([(from, 0u32)]);
        let mut queue = VecDeque::from([from]);
        while let Some(n) = queue.pop_front() {
            let d = dist[&n];
            for &p in &self.parents[n] {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(p) {
                    e.insert(d + 1);
                    queue.push_back(p);
                }
            }
        }
        dist
    }

    pub fn relate_skills(&self, a: &str, b: &str) -> Result<SkillRelation, OntologyError> {
        let ia = self.index(a)?;
        let ib = self.index(b)?;
        if ia == ib {
            return Ok(SkillRelation::Identical);
        }
        let up_a = self.ancestors(ia);
        if let Some(&d) = up_a.get(&ib) {
            return Ok(SkillRelation::NarrowerThan(d));
        }
        let up_b = self.ancestors(ib);
        if let Some(&d) = up_b.get(&ia) {
            return Ok(SkillRelation::BroaderThan(d));
        }
        let shared = up_a.iter().filter_map(|(n, da)| up_b.get(n).map(|db| da + db)).min();
        Ok(match shared {
            Some(d) => SkillRelation::SharedAncestor(d),
            None => SkillRelation::Unrelated,
        })
    }

    /// Length of the shortest path between two concepts, ignoring edge direction.
    pub fn path_length(&self, a: &str, b: &str) -> Result<Option<u32>, OntologyError> {
        let ia = self.index(a)?;
        let ib = self.index(b)?;
        let mut dist = vec![u32::MAX; self.concepts.len()];
        dist[ia] = 0;
        let mut queue = VecDeque::from([ia]);
        while let Some(n) = queue.pop_front() {
            if n == ib {
                return Ok(Some(dist[n]));
            }
            for &m in self.parents[n].iter().chain(&self.children[n]) {
                if dist[m] == u32::MAX {
                    dist[m] = dist[n] + 1;
                    queue.push_back(m);
                }
            }
        }
        Ok(None)
    }

    /// `1 / (1 + L)` over the shortest undirected path, 0 when disconnected.
    pub fn path_similarity(&self, a: &str, b: &str) -> Result<f64, OntologyError> {
        Ok(match self.path_length(a, b)? {
            Some(l) => 1.0 / (1.0 + l as f64),
            None => 0.0,
        })
    }
}

fn check_acyclic(concepts: &[Concept], parents: &[Vec<usize>]) -> Result<(), OntologyError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let mut mark = vec![Mark::New; concepts.len()];
    for root in 0..concepts.len() {
        if mark[root] != Mark::New {
            continue;
        }
        // iterative DFS: (node, next parent index)
        let mut stack = vec![(root, 0usize)];
        mark[root] = Mark::Open;
        while let Some(&mut (n, ref mut next)) = stack.last_mut() {
            if let Some(&p) = parents[n].get(*next) {
                *next += 1;
                match mark[p] {
                    Mark::Open => return Err(OntologyError::CycleDetected(concepts[p].uri.clone())),
                    Mark::New => {
                        mark[p] = Mark::Open;
                        stack.push((p, 0));
                    }
                    Mark::Done => {}
                }
            } else {
                mark[n] = Mark::Done;
                stack.pop();
            }
        }
    }
    Ok(())
}

fn split_list(value: &str, sep: char) -> Vec<String> {
    value
        .split(sep)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn parse_line(line: &str, lineno: usize) -> Result<Concept, OntologyError> {
    let err = |reason: String| OntologyError::Parse { line: lineno, reason };
    let mut fields = line.split('\t');
    let uri = fields
        .next()
        .map(str::trim)
        .filter(|u| !u.is_empty())
        .ok_or_else(|| err("missing uri".into()))?;
    let kind = match fields.next().map(str::trim) {
        Some("occupation") => ConceptKind::Occupation,
        Some("skill") => ConceptKind::Skill,
        Some("qualification") => ConceptKind::Qualification,
        Some(other) => return Err(err(format!("unknown kind {other:?}"))),
        None => return Err(err("missing kind".into())),
    };
    let mut concept = Concept {
        uri: uri.to_string(),
        kind,
        labels: BTreeMap::new(),
        description: BTreeMap::new(),
        broader: Vec::new(),
        essential_skills: Vec::new(),
        optional_skills: Vec::new(),
    };
    for field in fields {
        if field.trim().is_empty() {
            continue;
        }
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| err(format!("field {field:?} is not key=value")))?;
        match key {
            "broader" => concept.broader = split_list(value, ','),
            "essential" | "optional" => {
                if kind != ConceptKind::Occupation {
                    return Err(err(format!("{key} skills on a non-occupation concept")));
                }
                let list = split_list(value, ',');
                if key == "essential" {
                    concept.essential_skills = list;
                } else {
                    concept.optional_skills = list;
                }
            }
            _ => {
                if let Some(lang) = key.strip_prefix("hidden.") {
                    concept.labels.entry(lang.to_string()).or_default().hidden = split_list(value, '|');
                } else if let Some(lang) = key.strip_prefix("desc.") {
                    concept.description.insert(lang.to_string(), value.to_string());
                } else if !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
                    let mut labels = split_list(value, '|').into_iter();
                    let preferred = labels.next().ok_or_else(|| err(format!("empty labels for {key}")))?;
                    let set = concept.labels.entry(key.to_string()).or_default();
                    set.preferred = preferred;
                    set.alternatives = labels.collect();
                } else {
                    return Err(err(format!("unknown field key {key:?}")));
                }
            }
        }
    }
    if let Some((lang, _)) = concept.labels.iter().find(|(_, s)| s.preferred.is_empty()) {
        return Err(err(format!("hidden labels for {lang} without a preferred label")));
    }
    Ok(concept)
}
