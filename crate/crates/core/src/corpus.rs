//! Ingestion, cleaning, labelling, deduplication and stratified splitting of
//! job/resume pairs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::par;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("pair {job_id}/{candidate_id} references missing document {missing}")]
    DanglingReference {
        job_id: String,
        candidate_id: String,
        missing: String,
    },
    #[error("document id {0} appears more than once")]
    DuplicateDocument(String),
    #[error("document {id}: invalid section {section}: {reason}")]
    InvalidSection {
        id: String,
        section: String,
        reason: String,
    },
    #[error("class {label} has {count} members, at least 5 are required")]
    InsufficientData { label: Label, count: usize },
    #[error("pair {0}/{1} has label unknown and cannot be split")]
    UnlabeledPair(String, String),
    #[error("{path} line {line}: {reason}")]
    Parse { path: String, line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Byte span `[start, end)` within a document's text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// One resume or job description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DocumentRecord", into = "DocumentRecord")]
pub struct Document {
    id: String,
    lang: String,
    text: String,
    sections: Option<BTreeMap<String, Span>>,
    word_count: usize,
}

/// On-disk shape of a [`Document`]: one JSON object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub lang: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sections: Option<BTreeMap<String, [usize; 2]>>,
}

impl TryFrom<DocumentRecord> for Document {
    type Error = CorpusError;

    fn try_from(rec: DocumentRecord) -> Result<Self, Self::Error> {
        let doc = Document::new(rec.id, rec.lang, rec.text);
        match rec.sections {
            None => Ok(doc),
            Some(sections) => doc.with_sections(
                sections
                    .into_iter()
                    .map(|(name, [s, e])| (name, Span::new(s, e)))
                    .collect(),
            ),
        }
    }
}

impl From<Document> for DocumentRecord {
    fn from(doc: Document) -> Self {
        DocumentRecord {
            id: doc.id,
            lang: doc.lang,
            text: doc.text,
            sections: doc
                .sections
                .map(|m| m.into_iter().map(|(k, s)| (k, [s.start, s.end])).collect()),
        }
    }
}

pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

impl Document {
    pub fn new(id: impl Into<String>, lang: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let word_count = count_words(&text);
        Document {
            id: id.into(),
            lang: lang.into(),
            text,
            sections: None,
            word_count,
        }
    }

    /// Attach a section map. Spans must lie on character boundaries inside the
    /// text and must not overlap.
    pub fn with_sections(mut self, sections: BTreeMap<String, Span>) -> Result<Self, CorpusError> {
        let bad = |section: &str, reason: &str| CorpusError::InvalidSection {
            id: self.id.clone(),
            section: section.to_string(),
            reason: reason.to_string(),
        };
        for (name, span) in &sections {
            if span.start > span.end || span.end > self.text.len() {
                return Err(bad(name, "span out of range"));
            }
            if !self.text.is_char_boundary(span.start) || !self.text.is_char_boundary(span.end) {
                return Err(bad(name, "span splits a character"));
            }
        }
        let mut ordered: Vec<(&String, &Span)> = sections.iter().collect();
        ordered.sort_by_key(|(_, s)| (s.start, s.end));
        for w in ordered.windows(2) {
            if w[1].1.start < w[0].1.end {
                return Err(bad(w[1].0, "overlaps another section"));
            }
        }
        self.sections = Some(sections);
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn sections(&self) -> Option<&BTreeMap<String, Span>> {
        self.sections.as_ref()
    }

    pub fn word_count(&self) -> usize {
        self.word_count
    }

    pub fn section_text(&self, name: &str) -> Option<&str> {
        self.sections.as_ref()?.get(name).map(|s| &self.text[s.start..s.end])
    }

    /// Same document with `span` cut out of the text. Sections after the cut
    /// are shifted; the cut section becomes empty.
    pub fn without_span(&self, span: Span) -> Document {
        let mut text = String::with_capacity(self.text.len() - span.len() + 1);
        text.push_str(&self.text[..span.start]);
        text.push(' ');
        text.push_str(&self.text[span.end..]);
        let shift = |pos: usize| -> usize {
            if pos <= span.start {
                pos
            } else if pos >= span.end {
                pos - span.len() + 1
            } else {
                span.start
            }
        };
        let sections = self.sections.as_ref().map(|m| {
            m.iter()
                .map(|(k, s)| {
                    let ns = if *s == span {
                        Span::new(span.start, span.start)
                    } else {
                        Span::new(shift(s.start), shift(s.end))
                    };
                    (k.clone(), ns)
                })
                .collect()
        });
        let mut doc = Document::new(self.id.clone(), self.lang.clone(), text);
        doc.sections = sections;
        doc
    }

    /// Apply [`clean_text`] piecewise so that section spans survive cleaning.
    pub fn cleaned(&self) -> Document {
        let Some(sections) = &self.sections else {
            return Document::new(self.id.clone(), self.lang.clone(), clean_text(&self.text));
        };
        let mut ordered: Vec<(&String, &Span)> = sections.iter().collect();
        ordered.sort_by_key(|(_, s)| (s.start, s.end));

        let mut out = String::new();
        let push = |piece: &str, out: &mut String| -> Span {
            let cleaned = clean_text(piece);
            if cleaned.is_empty() {
                return Span::new(out.len(), out.len());
            }
            if !out.is_empty() {
                out.push(' ');
            }
            let start = out.len();
            out.push_str(&cleaned);
            Span::new(start, out.len())
        };
        let mut new_sections = BTreeMap::new();
        let mut cursor = 0;
        for (name, span) in ordered {
            push(&self.text[cursor..span.start], &mut out);
            let s = push(&self.text[span.start..span.end], &mut out);
            new_sections.insert(name.clone(), s);
            cursor = span.end;
        }
        push(&self.text[cursor..], &mut out);

        let mut doc = Document::new(self.id.clone(), self.lang.clone(), out);
        doc.sections = Some(new_sections);
        doc
    }
}

const INVISIBLE: &[char] = &['\u{200b}', '\u{200c}', '\u{200d}', '\u{feff}', '\u{00ad}'];

const LIGATURES: &[(char, &str)] = &[
    ('\u{fb00}', "ff"),
    ('\u{fb01}', "fi"),
    ('\u{fb02}', "fl"),
    ('\u{fb03}', "ffi"),
    ('\u{fb04}', "ffl"),
];

/// UTF-8 French text that was decoded as Windows-1252 and re-encoded.
const MOJIBAKE: &[(&str, &str)] = &[
    ("Ã©", "é"),
    ("Ã¨", "è"),
    ("Ãª", "ê"),
    ("Ã«", "ë"),
    ("Ã\u{a0}", "à"),
    ("Ã¢", "â"),
    ("Ã§", "ç"),
    ("Ã®", "î"),
    ("Ã¯", "ï"),
    ("Ã´", "ô"),
    ("Ã¶", "ö"),
    ("Ã¹", "ù"),
    ("Ã»", "û"),
    ("Ã¼", "ü"),
    ("Ã‰", "É"),
    ("Ã€", "À"),
    ("Ãˆ", "È"),
    ("ÃŠ", "Ê"),
    ("Ã‡", "Ç"),
    ("Ã”", "Ô"),
    ("Å“", "œ"),
    ("Å’", "Œ"),
    ("â€™", "’"),
    ("â€œ", "“"),
    ("â€\u{9d}", "”"),
    ("â€“", "\u{2013}"),
    ("â€”", "\u{2014}"),
];

fn repair_mojibake_once(s: &str) -> Option<String> {
    if !s.contains(['Ã', 'Å', 'â']) {
        return None;
    }
    let mut out = String::with_capacity(s.len());
    let mut changed = false;
    let mut rest = s;
    'outer: while let Some(c) = rest.chars().next() {
        if matches!(c, 'Ã' | 'Å' | 'â') {
            for (bad, good) in MOJIBAKE {
                if let Some(tail) = rest.strip_prefix(bad) {
                    out.push_str(good);
                    rest = tail;
                    changed = true;
                    continue 'outer;
                }
            }
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    changed.then_some(out)
}

/// Normalise raw document text: drop control and invisible characters,
/// compose to NFC, expand typographic ligatures, repair French mojibake and
/// collapse whitespace. Idempotent.
pub fn clean_text(raw: &str) -> String {
    let visible: String = raw
        .chars()
        .filter(|c| !(c.is_control() && !c.is_whitespace()) && !INVISIBLE.contains(c))
        .collect();
    let mut s = visible;
    if s.contains(|c| LIGATURES.iter().any(|(l, _)| *l == c)) {
        let mut out = String::with_capacity(s.len());
        for c in s.chars() {
            match LIGATURES.iter().find(|(l, _)| *l == c) {
                Some((_, rep)) => out.push_str(rep),
                None => out.push(c),
            }
        }
        s = out;
    }
    s = s.nfc().collect();
    // each pass strictly shortens the string, so this terminates
    let mut repaired = false;
    while let Some(next) = repair_mojibake_once(&s) {
        s = next;
        repaired = true;
    }
    if repaired {
        s = s.nfc().collect();
    }
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Match,
    Unmatch,
    Unknown,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Match => "match",
            Label::Unmatch => "unmatch",
            Label::Unknown => "unknown",
        })
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "match" => Ok(Label::Match),
            "unmatch" => Ok(Label::Unmatch),
            "unknown" => Ok(Label::Unknown),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

fn normalize_status(status: &str) -> String {
    status.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Recruitment-status → label mapping. Lookups are case-insensitive and
/// whitespace-insensitive; unlisted statuses map to [`Label::Unknown`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusTable {
    entries: BTreeMap<String, Label>,
}

impl Default for StatusTable {
    fn default() -> Self {
        let mut t = StatusTable {
            entries: BTreeMap::new(),
        };
        t.insert("Accepted Jobs Skills", Label::Match);
        t.insert("Not retained - Physical interview", Label::Unmatch);
        t.insert("interested candidate", Label::Unknown);
        t.insert("stopped process", Label::Unknown);
        t
    }
}

impl StatusTable {
    pub fn empty() -> Self {
        StatusTable {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, status: &str, label: Label) {
        self.entries.insert(normalize_status(status), label);
    }

    /// Parse `status \t label` lines. Blank lines and `#` comments are skipped.
    pub fn parse(src: &str) -> Result<Self, CorpusError> {
        let mut t = StatusTable::empty();
        for (i, line) in src.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| CorpusError::Parse {
                path: "status table".into(),
                line: i + 1,
                reason,
            };
            let (status, label) = line
                .split_once('\t')
                .ok_or_else(|| err("expected `status<TAB>label`".into()))?;
            t.insert(status, label.parse().map_err(err)?);
        }
        Ok(t)
    }

    pub fn map_status(&self, status: &str) -> Label {
        self.entries
            .get(&normalize_status(status))
            .copied()
            .unwrap_or(Label::Unknown)
    }
}

pub fn map_status(status: &str, table: &StatusTable) -> Label {
    table.map_status(status)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabeledPair {
    pub job_id: String,
    pub candidate_id: String,
    pub status: String,
    pub label: Label,
}

impl LabeledPair {
    pub fn new(job_id: &str, candidate_id: &str, status: &str, table: &StatusTable) -> Self {
        LabeledPair {
            job_id: job_id.to_string(),
            candidate_id: candidate_id.to_string(),
            status: status.to_string(),
            label: table.map_status(status),
        }
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.job_id, &self.candidate_id)
    }
}

/// Read newline-delimited JSON document records.
pub fn read_documents(reader: impl BufRead, path: &str) -> Result<Vec<Document>, CorpusError> {
    let docs: Vec<(usize, String)> = reader
        .lines()
        .enumerate()
        .filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() => None,
            other => Some(other.map(|l| (i + 1, l))),
        })
        .collect::<Result<_, _>>()?;
    par::try_map(&docs, |(line, l)| {
        let rec: DocumentRecord = serde_json::from_str(l).map_err(|e| CorpusError::Parse {
            path: path.to_string(),
            line: *line,
            reason: e.to_string(),
        })?;
        Document::try_from(rec)
    })
}

pub fn write_documents(docs: &[Document]) -> String {
    let mut out = String::new();
    for d in docs {
        out.push_str(&serde_json::to_string(&DocumentRecord::from(d.clone())).expect("serializable"));
        out.push('\n');
    }
    out
}

/// Read `job_id \t candidate_id \t status` records. An optional header line
/// starting with `job_id` and `#` comment lines are skipped.
pub fn read_pairs(src: &str, table: &StatusTable) -> Result<Vec<LabeledPair>, CorpusError> {
    let mut pairs = Vec::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.splitn(3, '\t').collect();
        if fields.len() != 3 {
            return Err(CorpusError::Parse {
                path: "pairs".into(),
                line: i + 1,
                reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        if i == 0 && fields[0] == "job_id" {
            continue;
        }
        pairs.push(LabeledPair::new(
            fields[0],
            fields[1],
            fields[2].trim_end_matches('\r'),
            table,
        ));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasonCode {
    /// Label could not be derived from the recruitment status.
    Unlabeled,
    /// Candidate resume shorter than the minimum word count.
    ShortCandidate,
    /// Pair dropped because its candidate was removed.
    CandidateRemoved,
    /// Job text identical to another job with a smaller id.
    DuplicateJob,
    /// Repeated (job, candidate) key with a consistent label.
    DuplicatePair,
    /// Same (job, candidate) key carrying both match and unmatch.
    Contradiction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub entity_id: String,
    pub reason_code: ReasonCode,
}

impl AuditEntry {
    fn pair(p: &LabeledPair, reason_code: ReasonCode) -> Self {
        AuditEntry {
            entity_id: format!("{}::{}", p.job_id, p.candidate_id),
            reason_code,
        }
    }

    fn doc(id: &str, reason_code: ReasonCode) -> Self {
        AuditEntry {
            entity_id: id.to_string(),
            reason_code,
        }
    }
}

pub fn write_audit_log(entries: &[AuditEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn read_audit_log(src: &str) -> Result<Vec<AuditEntry>, serde_json::Error> {
    src.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanedCorpus {
    pub documents: Vec<Document>,
    pub pairs: Vec<LabeledPair>,
    pub audit: Vec<AuditEntry>,
}

/// Clean every document and reduce the labelled pairs to a consistent set.
///
/// Unknown-label pairs are dropped, candidates under `min_words` words are
/// removed along with their pairs, jobs with identical cleaned text are merged
/// into the smallest id, and repeated (job, candidate) keys are collapsed, or
/// dropped entirely when their labels disagree. Every removed pair and
/// document gets one audit entry.
pub fn dedupe_and_filter(
    pairs: &[LabeledPair],
    docs: &[Document],
    min_words: usize,
) -> Result<CleanedCorpus, CorpusError> {
    let mut by_id: HashMap<&str, usize> = HashMap::with_capacity(docs.len());
    for (i, d) in docs.iter().enumerate() {
        if by_id.insert(d.id(), i).is_some() {
            return Err(CorpusError::DuplicateDocument(d.id().to_string()));
        }
    }
    for p in pairs {
        for id in [&p.job_id, &p.candidate_id] {
            if !by_id.contains_key(id.as_str()) {
                return Err(CorpusError::DanglingReference {
                    job_id: p.job_id.clone(),
                    candidate_id: p.candidate_id.clone(),
                    missing: id.clone(),
                });
            }
        }
    }

    let cleaned: Vec<Document> = par::map(docs, Document::cleaned);
    let mut audit = Vec::new();
    let mut removed_docs: BTreeSet<&str> = BTreeSet::new();

    let candidates: BTreeSet<&str> = pairs.iter().map(|p| p.candidate_id.as_str()).collect();
    let mut short: BTreeSet<&str> = BTreeSet::new();
    for &c in &candidates {
        if cleaned[by_id[c]].word_count() < min_words {
            short.insert(c);
            removed_docs.insert(c);
            audit.push(AuditEntry::doc(c, ReasonCode::ShortCandidate));
        }
    }

    // canonical job id per cleaned text
    let jobs: BTreeSet<&str> = pairs.iter().map(|p| p.job_id.as_str()).collect();
    let mut canonical_by_text: HashMap<&str, &str> = HashMap::new();
    let mut canonical: HashMap<&str, &str> = HashMap::new();
    for &j in &jobs {
        let text = cleaned[by_id[j]].text();
        let c = *canonical_by_text.entry(text).or_insert(j);
        canonical.insert(j, c);
        if c != j && removed_docs.insert(j) {
            audit.push(AuditEntry::doc(j, ReasonCode::DuplicateJob));
        }
    }

    let mut survivors: Vec<(usize, LabeledPair)> = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        if p.label == Label::Unknown {
            audit.push(AuditEntry::pair(p, ReasonCode::Unlabeled));
        } else if short.contains(p.candidate_id.as_str()) {
            audit.push(AuditEntry::pair(p, ReasonCode::CandidateRemoved));
        } else {
            let mut q = p.clone();
            q.job_id = canonical[p.job_id.as_str()].to_string();
            survivors.push((i, q));
        }
    }

    let mut by_key: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for (pos, (_, q)) in survivors.iter().enumerate() {
        by_key
            .entry((q.job_id.clone(), q.candidate_id.clone()))
            .or_default()
            .push(pos);
    }
    let mut drop: BTreeMap<usize, ReasonCode> = BTreeMap::new();
    for positions in by_key.values() {
        let labels: BTreeSet<Label> = positions.iter().map(|&k| survivors[k].1.label).collect();
        if labels.len() > 1 {
            for &k in positions {
                drop.insert(k, ReasonCode::Contradiction);
            }
        } else {
            for &k in &positions[1..] {
                drop.insert(k, ReasonCode::DuplicatePair);
            }
        }
    }
    let mut kept = Vec::new();
    for (pos, (orig, q)) in survivors.into_iter().enumerate() {
        match drop.get(&pos) {
            Some(&reason) => audit.push(AuditEntry::pair(&pairs[orig], reason)),
            None => kept.push(q),
        }
    }

    let documents = cleaned.into_iter().filter(|d| !removed_docs.contains(d.id())).collect();
    Ok(CleanedCorpus {
        documents,
        pairs: kept,
        audit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<LabeledPair>,
    pub validation: Vec<LabeledPair>,
    pub test: Vec<LabeledPair>,
    pub seed: u64,
}

impl CorpusSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub const OUTER_TEST_FRACTION: f64 = 0.2;
pub const INNER_VALIDATION_FRACTION: f64 = 0.2;
const MIN_CLASS_SIZE: usize = 5;

/// 80/20 train/test split followed by an 80/20 train/validation split of the
/// training part, each stratified on the label.
pub fn stratified_split(pairs: &[LabeledPair], seed: u64) -> Result<CorpusSplit, CorpusError> {
    let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, p) in pairs.iter().enumerate() {
        match p.label {
            Label::Match => classes[0].push(i),
            Label::Unmatch => classes[1].push(i),
            Label::Unknown => return Err(CorpusError::UnlabeledPair(p.job_id.clone(), p.candidate_id.clone())),
        }
    }
    for (members, label) in classes.iter().zip([Label::Match, Label::Unmatch]) {
        if members.len() < MIN_CLASS_SIZE {
            return Err(CorpusError::InsufficientData {
                label,
                count: members.len(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut validation, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for members in classes.iter_mut() {
        members.shuffle(&mut rng);
        let n_test = (members.len() as f64 * OUTER_TEST_FRACTION).round() as usize;
        let (t, rest) = members.split_at(n_test);
        let n_val = (rest.len() as f64 * INNER_VALIDATION_FRACTION).round() as usize;
        let (v, tr) = rest.split_at(n_val);
        test.extend_from_slice(t);
        validation.extend_from_slice(v);
        train.extend_from_slice(tr);
    }
    let collect = |mut idx: Vec<usize>| -> Vec<LabeledPair> {
        idx.sort_unstable();
        idx.into_iter().map(|i| pairs[i].clone()).collect()
    };
    Ok(CorpusSplit {
        train: collect(train),
        validation: collect(validation),
        test: collect(test),
        seed,
    })
}
