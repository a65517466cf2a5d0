//! Hard-requirement extraction and pre-ranking candidate elimination.
//!
//! Requirements are pulled out of job descriptions with configurable regular
//! expressions; the same patterns read candidate evidence out of resumes.
//!
//! Patterns file: one pattern per line, `name <TAB> kind <TAB> expression`,
//! `#` comments. Kinds and their required capture groups:
//!
//! | kind         | groups            |
//! |--------------|-------------------|
//! | `min_years`  | `years`, `skill`  |
//! | `language`   | `lang`            |
//! | `credential` | `credential`      |

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Span};
use crate::ontology::{ConceptKind, SkillGraph, SkillRelation};
use crate::par;
use crate::textpipe::{SimpleTokenizer, Tokenizer};

pub const DEFAULT_PATTERNS: &str = include_str!("../fixtures/patterns.tsv");

/// Reason recorded when a candidate shows no evidence for a requirement.
pub const NOT_STATED: &str = "NotStated";

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("pattern {name} (line {line}): {reason}")]
    InvalidPattern { name: String, line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    MinYears,
    Language,
    Credential,
}

impl PatternKind {
    fn required_groups(self) -> &'static [&'static str] {
        match self {
            PatternKind::MinYears => &["years", "skill"],
            PatternKind::Language => &["lang"],
            PatternKind::Credential => &["credential"],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Pattern {
    pub name: String,
    pub kind: PatternKind,
    pub regex: Regex,
}

#[derive(Debug, Clone)]
pub struct PatternSet {
    patterns: Vec<Pattern>,
}

impl Default for PatternSet {
    fn default() -> Self {
        PatternSet::parse(DEFAULT_PATTERNS).expect("shipped patterns compile")
    }
}

impl PatternSet {
    pub fn parse(src: &str) -> Result<Self, FilterError> {
        let mut patterns = Vec::new();
        for (i, line) in src.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.splitn(3, '\t');
            let name = fields.next().unwrap_or_default().trim().to_string();
            let bad = |reason: String| FilterError::InvalidPattern {
                name: name.clone(),
                line: i + 1,
                reason,
            };
            let kind = match fields.next().map(str::trim) {
                Some("min_years") => PatternKind::MinYears,
                Some("language") => PatternKind::Language,
                Some("credential") => PatternKind::Credential,
                Some(other) => return Err(bad(format!("unknown kind {other:?}"))),
                None => return Err(bad("expected `name<TAB>kind<TAB>expression`".into())),
            };
            let expr = fields
                .next()
                .ok_or_else(|| bad("missing expression".into()))?
                .trim_end_matches('\r');
            let regex = Regex::new(expr).map_err(|e| bad(e.to_string()))?;
            let names: BTreeSet<&str> = regex.capture_names().flatten().collect();
            for g in kind.required_groups() {
                if !names.contains(g) {
                    return Err(bad(format!("missing capture group {g:?}")));
                }
            }
            patterns.push(Pattern {
                name: name.clone(),
                kind,
                regex,
            });
        }
        Ok(PatternSet { patterns })
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }
}

/// A skill either resolved to an ontology concept or kept as lowercase text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillRef {
    Concept(String),
    Raw(String),
}

impl fmt::Display for SkillRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkillRef::Concept(uri) => f.write_str(uri),
            SkillRef::Raw(text) => f.write_str(text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RequirementKind {
    MinYearsExperience { skill: SkillRef, years: u32 },
    RequiredLanguage { lang: String },
    RequiredCredential { text: String },
}

impl fmt::Display for RequirementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RequirementKind::MinYearsExperience { skill, years } => write!(f, "{years}+ years of {skill}"),
            RequirementKind::RequiredLanguage { lang } => write!(f, "language {lang}"),
            RequirementKind::RequiredCredential { text } => write!(f, "credential {text}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HardRequirement {
    pub kind: RequirementKind,
    pub source_span: Span,
    pub pattern: String,
}

fn language_code(name: &str) -> String {
    match name.to_lowercase().as_str() {
        "english" | "anglais" | "en" => "en".into(),
        "french" | "français" | "francais" | "fr" => "fr".into(),
        "spanish" | "espagnol" | "es" => "es".into(),
        "german" | "allemand" | "de" => "de".into(),
        other => other.to_string(),
    }
}

fn normalize_phrase(s: &str) -> String {
    s.replace('’', "'")
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn strip_punct(s: &str) -> &str {
    s.trim_end_matches(['.', ',', ';', ':', '-'])
}

/// Resolve a captured skill phrase: the longest word prefix with an exact
/// ontology label wins, then a fuzzy hit on the first word, then raw text.
pub fn resolve_skill_phrase(phrase: &str, lang: &str, graph: Option<&SkillGraph>) -> SkillRef {
    let words: Vec<&str> = phrase.split_whitespace().collect();
    let first = words.first().map(|w| strip_punct(w)).unwrap_or_default();
    let Some(graph) = graph else {
        return SkillRef::Raw(first.to_lowercase());
    };
    let langs: Vec<&str> = std::iter::once(lang)
        .chain(graph.languages().filter(|l| *l != lang))
        .collect();
    for n in (1..=words.len()).rev() {
        let candidate = strip_punct(&words[..n].join(" ")).to_string();
        for l in &langs {
            if let Some(uri) = graph.lookup_exact(&candidate, l).first() {
                return SkillRef::Concept(uri.to_string());
            }
        }
    }
    if let Ok(hits) = graph.resolve_label(first, lang) {
        if let Some(top) = hits.first() {
            return SkillRef::Concept(top.uri.clone());
        }
    }
    SkillRef::Raw(first.to_lowercase())
}

fn extract(text: &str, lang: &str, patterns: &PatternSet, graph: Option<&SkillGraph>) -> Vec<HardRequirement> {
    let mut out = Vec::new();
    for p in patterns.patterns() {
        for caps in p.regex.captures_iter(text) {
            let whole = caps.get(0).expect("group 0");
            let span = Span::new(whole.start(), whole.end());
            let kind = match p.kind {
                PatternKind::MinYears => {
                    let Ok(years) = caps["years"].parse::<u32>() else {
                        continue;
                    };
                    RequirementKind::MinYearsExperience {
                        skill: resolve_skill_phrase(&caps["skill"], lang, graph),
                        years,
                    }
                }
                PatternKind::Language => RequirementKind::RequiredLanguage {
                    lang: language_code(&caps["lang"]),
                },
                PatternKind::Credential => RequirementKind::RequiredCredential {
                    text: normalize_phrase(&caps["credential"]),
                },
            };
            out.push(HardRequirement {
                kind,
                source_span: span,
                pattern: p.name.clone(),
            });
        }
    }
    out.sort_by(|a, b| {
        a.source_span
            .cmp(&b.source_span)
            .then_with(|| a.pattern.cmp(&b.pattern))
    });
    out
}

/// Every pattern match in the job description becomes one requirement, in
/// text order.
pub fn parse_requirements(jd: &Document, patterns: &PatternSet, graph: Option<&SkillGraph>) -> Vec<HardRequirement> {
    extract(jd.text(), jd.lang(), patterns, graph)
}

/// Evidence read from a resume.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateProfile {
    pub candidate_id: String,
    #[serde(with = "experience_list")]
    pub experience: BTreeMap<SkillRef, u32>,
    pub languages: BTreeSet<String>,
    pub credentials: BTreeSet<String>,
    /// Ontology skill concepts mentioned anywhere in the resume.
    pub skills: BTreeSet<String>,
}

/// JSON object keys must be strings, so experience is stored as a list of
/// `{skill, years}` entries.
mod experience_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::SkillRef;

    #[derive(Serialize, Deserialize)]
    struct Entry {
        skill: SkillRef,
        years: u32,
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<SkillRef, u32>, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Entry> = m
            .iter()
            .map(|(skill, &years)| Entry {
                skill: skill.clone(),
                years,
            })
            .collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<SkillRef, u32>, D::Error> {
        Ok(Vec::<Entry>::deserialize(d)?
            .into_iter()
            .map(|e| (e.skill, e.years))
            .collect())
    }
}

/// Token n-gram index over every ontology label, for mention spotting.
#[derive(Debug, Clone)]
pub struct MentionIndex {
    by_tokens: HashMap<Vec<String>, BTreeSet<String>>,
    max_len: usize,
}

impl MentionIndex {
    pub fn new(graph: &SkillGraph, kinds: &[ConceptKind]) -> Self {
        let tok = SimpleTokenizer;
        let mut by_tokens: HashMap<Vec<String>, BTreeSet<String>> = HashMap::new();
        let langs: Vec<&str> = graph.languages().collect();
        for lang in langs {
            for (label, uri) in graph.labels_for(lang) {
                let kind = graph.concept(uri).map(|c| c.kind);
                if !kind.is_some_and(|k| kinds.contains(&k)) {
                    continue;
                }
                let toks = tok.tokenize(label);
                if !toks.is_empty() {
                    by_tokens.entry(toks).or_default().insert(uri.to_string());
                }
            }
        }
        let max_len = by_tokens.keys().map(Vec::len).max().unwrap_or(0);
        MentionIndex { by_tokens, max_len }
    }

    pub fn skills(graph: &SkillGraph) -> Self {
        Self::new(graph, &[ConceptKind::Skill])
    }

    pub fn mentions<S: AsRef<str>>(&self, tokens: &[S]) -> BTreeSet<String> {
        let tokens: Vec<String> = tokens.iter().map(|t| t.as_ref().to_string()).collect();
        let mut found = BTreeSet::new();
        for start in 0..tokens.len() {
            for n in 1..=self.max_len.min(tokens.len() - start) {
                if let Some(uris) = self.by_tokens.get(&tokens[start..start + n]) {
                    found.extend(uris.iter().cloned());
                }
            }
        }
        found
    }
}

pub fn extract_profile(
    resume: &Document,
    patterns: &PatternSet,
    graph: Option<&SkillGraph>,
    mentions: Option<&MentionIndex>,
) -> CandidateProfile {
    let mut profile = CandidateProfile {
        candidate_id: resume.id().to_string(),
        ..CandidateProfile::default()
    };
    profile.languages.insert(language_code(resume.lang()));
    for r in extract(resume.text(), resume.lang(), patterns, graph) {
        match r.kind {
            RequirementKind::MinYearsExperience { skill, years } => {
                let e = profile.experience.entry(skill).or_insert(0);
                *e = (*e).max(years);
            }
            RequirementKind::RequiredLanguage { lang } => {
                profile.languages.insert(lang);
            }
            RequirementKind::RequiredCredential { text } => {
                profile.credentials.insert(text);
            }
        }
    }
    if let Some(index) = mentions {
        profile.skills = index.mentions(&SimpleTokenizer.tokenize(resume.text()));
    }
    profile
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub requirement: HardRequirement,
    /// `"<observed> < <required>"` or [`NOT_STATED`].
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub candidate_id: String,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub passed: Vec<String>,
    pub rejected: Vec<Rejection>,
}

impl FilterOutcome {
    pub fn rejection(&self, candidate_id: &str) -> Option<&Rejection> {
        self.rejected.iter().find(|r| r.candidate_id == candidate_id)
    }

    pub fn is_passed(&self, candidate_id: &str) -> bool {
        self.passed.iter().any(|c| c == candidate_id)
    }
}

/// Candidate skill `have` covers required skill `need` when it is the same
/// concept or a narrower one. Raw skills only match identical text.
pub fn skill_satisfies(have: &SkillRef, need: &SkillRef, graph: Option<&SkillGraph>) -> bool {
    match (have, need, graph) {
        (SkillRef::Concept(a), SkillRef::Concept(b), Some(g)) => matches!(
            g.relate_skills(a, b),
            Ok(SkillRelation::Identical | SkillRelation::NarrowerThan(_))
        ),
        _ => have == need,
    }
}

/// Returns the reason the requirement is unmet, or `None` when satisfied.
pub fn check_requirement(
    req: &HardRequirement,
    profile: &CandidateProfile,
    graph: Option<&SkillGraph>,
) -> Option<String> {
    match &req.kind {
        RequirementKind::MinYearsExperience { skill, years } => {
            let best = profile
                .experience
                .iter()
                .filter(|(have, _)| skill_satisfies(have, skill, graph))
                .map(|(_, y)| *y)
                .max();
            match best {
                None => Some(NOT_STATED.to_string()),
                Some(y) if y < *years => Some(format!("{y} < {years}")),
                Some(_) => None,
            }
        }
        RequirementKind::RequiredLanguage { lang } => {
            (!profile.languages.contains(lang)).then(|| NOT_STATED.to_string())
        }
        RequirementKind::RequiredCredential { text } => {
            (!profile.credentials.contains(text)).then(|| NOT_STATED.to_string())
        }
    }
}

/// Reject every candidate with at least one unmet requirement. Input order
/// is preserved in both lists.
pub fn apply_filters(
    requirements: &[HardRequirement],
    candidates: &[CandidateProfile],
    graph: Option<&SkillGraph>,
) -> FilterOutcome {
    let verdicts = par::map(candidates, |c| {
        requirements
            .iter()
            .filter_map(|r| {
                check_requirement(r, c, graph).map(|reason| Violation {
                    requirement: r.clone(),
                    reason,
                })
            })
            .collect::<Vec<_>>()
    });
    let mut outcome = FilterOutcome::default();
    for (c, violations) in candidates.iter().zip(verdicts) {
        if violations.is_empty() {
            outcome.passed.push(c.candidate_id.clone());
        } else {
            outcome.rejected.push(Rejection {
                candidate_id: c.candidate_id.clone(),
                violations,
            });
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph() -> SkillGraph {
        SkillGraph::parse(crate::MINI_ONTOLOGY).unwrap()
    }

    fn kinds(reqs: &[HardRequirement]) -> Vec<RequirementKind> {
        reqs.iter().map(|r| r.kind.clone()).collect()
    }

    #[test]
    fn english_years() {
        let g = graph();
        let jd = Document::new("j", "en", "We need 5+ years of Java.");
        let reqs = parse_requirements(&jd, &PatternSet::default(), Some(&g));
        assert_eq!(
            kinds(&reqs),
            vec![RequirementKind::MinYearsExperience {
                skill: SkillRef::Concept("esco:skill/java".into()),
                years: 5
            }]
        );
        let span = reqs[0].source_span;
        assert_eq!(&jd.text()[span.start..span.end], "5+ years of Java.");
    }

    #[test]
    fn french_years() {
        let g = graph();
        let jd = Document::new("j", "fr", "Vous avez 3 ans d'expérience en C++ et une bonne attitude.");
        let reqs = parse_requirements(&jd, &PatternSet::default(), Some(&g));
        assert_eq!(
            kinds(&reqs),
            vec![RequirementKind::MinYearsExperience {
                skill: SkillRef::Concept("esco:skill/cpp".into()),
                years: 3
            }]
        );
    }

    #[test]
    fn raw_skill_without_ontology() {
        let jd = Document::new("j", "en", "5+ years of Java");
        let reqs = parse_requirements(&jd, &PatternSet::default(), None);
        assert_eq!(
            kinds(&reqs),
            vec![RequirementKind::MinYearsExperience {
                skill: SkillRef::Raw("java".into()),
                years: 5
            }]
        );
    }

    #[test]
    fn multiword_skill_and_other_kinds() {
        let g = graph();
        let jd = Document::new(
            "j",
            "en",
            "2 years of experience in machine learning and Python. Fluent in French. A Master's degree is a plus.",
        );
        let reqs = parse_requirements(&jd, &PatternSet::default(), Some(&g));
        assert_eq!(
            kinds(&reqs),
            vec![
                RequirementKind::MinYearsExperience {
                    skill: SkillRef::Concept("esco:skill/machine-learning".into()),
                    years: 2
                },
                RequirementKind::RequiredLanguage { lang: "fr".into() },
                RequirementKind::RequiredCredential {
                    text: "master's degree".into()
                },
            ]
        );
    }

    #[test]
    fn no_hits_is_empty() {
        let jd = Document::new("j", "en", "Friendly team, free coffee.");
        assert!(parse_requirements(&jd, &PatternSet::default(), None).is_empty());
    }

    #[test]
    fn invalid_patterns() {
        assert!(matches!(
            PatternSet::parse("p\tmin_years\t(unclosed"),
            Err(FilterError::InvalidPattern { .. })
        ));
        assert!(matches!(
            PatternSet::parse("p\tmin_years\t(?P<years>\\d+)"),
            Err(FilterError::InvalidPattern { reason, .. }) if reason.contains("skill")
        ));
        assert!(matches!(
            PatternSet::parse("p\tage\t(?P<age>\\d+)"),
            Err(FilterError::InvalidPattern { .. })
        ));
    }

    fn req(kind: RequirementKind) -> HardRequirement {
        HardRequirement {
            kind,
            source_span: Span::new(0, 0),
            pattern: "test".into(),
        }
    }

    fn profile(id: &str, exp: &[(&str, u32)]) -> CandidateProfile {
        CandidateProfile {
            candidate_id: id.into(),
            experience: exp
                .iter()
                .map(|(s, y)| (SkillRef::Concept(s.to_string()), *y))
                .collect(),
            languages: BTreeSet::from(["en".to_string()]),
            ..CandidateProfile::default()
        }
    }

    #[test]
    fn years_shortfall_reason() {
        let g = graph();
        let r = req(RequirementKind::MinYearsExperience {
            skill: SkillRef::Concept("esco:skill/java".into()),
            years: 5,
        });
        let out = apply_filters(&[r], &[profile("c", &[("esco:skill/java", 3)])], Some(&g));
        assert!(out.passed.is_empty());
        assert_eq!(out.rejected[0].violations[0].reason, "3 < 5");
    }

    #[test]
    fn narrower_skill_satisfies() {
        let g = graph();
        let r = req(RequirementKind::MinYearsExperience {
            skill: SkillRef::Concept("esco:skill/computer-programming".into()),
            years: 2,
        });
        let out = apply_filters(
            std::slice::from_ref(&r),
            &[profile("c", &[("esco:skill/cpp", 4)])],
            Some(&g),
        );
        assert_eq!(out.passed, vec!["c"]);
        // broader experience does not cover a narrower requirement
        let r2 = req(RequirementKind::MinYearsExperience {
            skill: SkillRef::Concept("esco:skill/cpp".into()),
            years: 2,
        });
        let out = apply_filters(
            &[r2],
            &[profile("c", &[("esco:skill/computer-programming", 9)])],
            Some(&g),
        );
        assert_eq!(out.rejected[0].violations[0].reason, NOT_STATED);
    }

    #[test]
    fn empty_requirements_pass_everyone() {
        let ps = vec![profile("a", &[]), profile("b", &[])];
        let out = apply_filters(&[], &ps, None);
        assert_eq!(out.passed, vec!["a", "b"]);
        assert!(out.rejected.is_empty());
    }

    #[test]
    fn language_and_credential_evidence() {
        let g = graph();
        let patterns = PatternSet::default();
        let resume = Document::new(
            "c",
            "fr",
            "Développeur. 4 ans d'expérience en C++. Maîtrise de l'anglais. Baccalauréat en informatique. Python, SQL.",
        );
        let p = extract_profile(&resume, &patterns, Some(&g), Some(&MentionIndex::skills(&g)));
        assert_eq!(p.languages, BTreeSet::from(["en".to_string(), "fr".to_string()]));
        assert_eq!(p.credentials, BTreeSet::from(["baccalauréat".to_string()]));
        assert_eq!(p.experience.get(&SkillRef::Concept("esco:skill/cpp".into())), Some(&4));
        assert!(p.skills.contains("esco:skill/python"));
        assert!(p.skills.contains("esco:skill/sql"));
        assert!(p.skills.contains("esco:skill/cpp"));
    }
}
