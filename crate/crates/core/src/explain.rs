//! Occlusion attribution and stakeholder reports.
//!
//! An attribution is `p_match(full) − p_match(occluded)` for one segment of
//! one document. Occlusion is not additive: deltas over a partition do not
//! sum to anything meaningful, so reports list them individually and carry
//! no total.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Span};
use crate::filtering::{check_requirement, CandidateProfile, FilterOutcome, HardRequirement, SkillRef};
use crate::matchnet::{self, MatchError, Model};
use crate::ontology::{SkillGraph, SkillRelation};
use crate::par;
use crate::ranker::JobRanking;
use crate::textpipe::{ChunkPlan, SimpleTokenizer, Tokenizer};

pub const TOKEN_WINDOW: usize = 32;
const TOP_ATTRIBUTIONS: usize = 3;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("candidate {candidate_id} has no link to job {job_id}")]
    UnknownPairing { job_id: String, candidate_id: String },
    #[error("candidate {candidate_id} is not among the recommended candidates of job {job_id}")]
    HiredNotRecommended { job_id: String, candidate_id: String },
    #[error("unknown document {0}")]
    UnknownDocument(String),
    #[error(transparent)]
    Match(#[from] MatchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Job,
    Resume,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SegmentSpan {
    /// A named section, byte span into the document text.
    Section { name: String, span: Span },
    /// Token index range `[start, end)` into the tokenized document.
    Tokens { start: usize, end: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub role: Role,
    pub document_id: String,
    pub span: SegmentSpan,
}

impl Segment {
    pub fn label(&self) -> String {
        match &self.span {
            SegmentSpan::Section { name, .. } => format!("section '{name}'"),
            SegmentSpan::Tokens { start, end } => format!("tokens {start}..{end}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub segment: Segment,
    /// `None` when removing the segment leaves the document without tokens;
    /// no prediction exists for an empty document.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionSet {
    pub job_id: String,
    pub candidate_id: String,
    pub baseline_p_match: f64,
    /// Sorted by |delta| descending, segment order on ties, skipped
    /// segments last.
    pub attributions: Vec<Attribution>,
}

impl AttributionSet {
    /// Largest positive deltas: segments that raise the match probability.
    pub fn top_positive(&self, n: usize) -> Vec<Attribution> {
        let mut v: Vec<&Attribution> = self
            .attributions
            .iter()
            .filter(|a| a.delta.is_some_and(|d| d > 0.0))
            .collect();
        v.sort_by(|a, b| b.delta.unwrap().total_cmp(&a.delta.unwrap()));
        v.into_iter().take(n).cloned().collect()
    }

    /// Most negative deltas: segments that lower the match probability.
    pub fn top_negative(&self, n: usize) -> Vec<Attribution> {
        let mut v: Vec<&Attribution> = self
            .attributions
            .iter()
            .filter(|a| a.delta.is_some_and(|d| d < 0.0))
            .collect();
        v.sort_by(|a, b| a.delta.unwrap().total_cmp(&b.delta.unwrap()));
        v.into_iter().take(n).cloned().collect()
    }
}

/// Sections in text order when the document has a section map, otherwise
/// consecutive windows of [`TOKEN_WINDOW`] tokens.
pub fn segments(doc: &Document, role: Role) -> Vec<Segment> {
    let seg = |span| Segment {
        role,
        document_id: doc.id().to_string(),
        span,
    };
    match doc.sections() {
        Some(map) => {
            let mut v: Vec<(&String, &Span)> = map.iter().collect();
            v.sort_by_key(|(name, s)| (s.start, s.end, name.to_string()));
            v.into_iter()
                .map(|(name, span)| {
                    seg(SegmentSpan::Section {
                        name: name.clone(),
                        span: *span,
                    })
                })
                .collect()
        }
        None => {
            let n = SimpleTokenizer.tokenize(doc.text()).len();
            (0..n)
                .step_by(TOKEN_WINDOW)
                .map(|start| {
                    seg(SegmentSpan::Tokens {
                        start,
                        end: (start + TOKEN_WINDOW).min(n),
                    })
                })
                .collect()
        }
    }
}

fn occluded_tokens(doc: &Document, span: &SegmentSpan) -> Vec<String> {
    let tok = SimpleTokenizer;
    match span {
        SegmentSpan::Section { span, .. } => tok.tokenize(doc.without_span(*span).text()),
        SegmentSpan::Tokens { start, end } => {
            let mut t = tok.tokenize(doc.text());
            t.drain(*start..*end);
            t
        }
    }
}

/// Occlude each segment of the `target` document in turn and record the
/// change in match probability.
pub fn occlusion_attribution(
    model: &Model,
    plan: &ChunkPlan,
    job: &Document,
    resume: &Document,
    target: Role,
) -> Result<AttributionSet, ExplainError> {
    let tok = SimpleTokenizer;
    let job_tokens = tok.tokenize(job.text());
    let resume_tokens = tok.tokenize(resume.text());
    let baseline = matchnet::predict_tokens(&job_tokens, &resume_tokens, plan, model)?.p_match;
    let doc = match target {
        Role::Job => job,
        Role::Resume => resume,
    };
    let segs = segments(doc, target);
    let deltas = par::try_map(&segs, |s| -> Result<Option<f64>, MatchError> {
        let occluded = occluded_tokens(doc, &s.span);
        if occluded.is_empty() {
            return Ok(None);
        }
        let p = match target {
            Role::Job => matchnet::predict_tokens(&occluded, &resume_tokens, plan, model)?,
            Role::Resume => matchnet::predict_tokens(&job_tokens, &occluded, plan, model)?,
        };
        Ok(Some(baseline - p.p_match))
    })?;
    let mut attributions: Vec<Attribution> = segs
        .into_iter()
        .zip(deltas)
        .map(|(segment, delta)| Attribution { segment, delta })
        .collect();
    attributions.sort_by(|a, b| match (a.delta, b.delta) {
        (Some(x), Some(y)) => y.abs().total_cmp(&x.abs()),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(AttributionSet {
        job_id: job.id().to_string(),
        candidate_id: resume.id().to_string(),
        baseline_p_match: baseline,
        attributions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Audience {
    Candidate,
    Recruiter,
    JobPoster,
}

/// What the report explains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DecisionContext {
    FilterRejected,
    /// Passed filtering but ranked outside the top `k`.
    RankedOut {
        rank: usize,
        of: usize,
        k: usize,
    },
    /// Inside the top `k`; `hired` names the hire when one was made.
    Recommended {
        rank: usize,
        k: usize,
        hired: Option<String>,
    },
    Shortlist {
        k: usize,
        passed: usize,
    },
    HireReview {
        hired: String,
        rank: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelatedSkills {
    pub skill: String,
    pub other_skill: String,
    pub relation: SkillRelation,
}

/// Ontology comparison between the subject's skills and another candidate's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillComparison {
    pub other_id: String,
    pub other_rank: Option<usize>,
    pub shared: Vec<String>,
    /// Distinct, non-identical skill pairs that the ontology relates.
    pub related: Vec<RelatedSkills>,
    pub only_subject: Vec<String>,
    pub only_other: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub shared: usize,
    pub related: usize,
    /// Symmetric best-match path similarity, in `[0, 1]`.
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evidence {
    /// A hard requirement checked against the candidate's profile; the
    /// reason is the filter's own.
    Requirement {
        candidate_id: String,
        requirement: HardRequirement,
        met: bool,
        reason: Option<String>,
    },
    Attribution {
        candidate_id: String,
        baseline_p_match: f64,
        attribution: Attribution,
    },
    /// Skill held by at least half of the top-k but unrelated to every skill
    /// of the subject.
    SkillGap {
        skill: String,
        label: String,
        holders: usize,
        top_k: usize,
    },
    SkillComparison(SkillComparison),
    Shortlisted {
        candidate_id: String,
        rank: usize,
        score: f64,
        baseline_p_match: f64,
        top_attributions: Vec<Attribution>,
    },
    ComparisonMatrix {
        candidates: Vec<String>,
        cells: Vec<Vec<MatrixCell>>,
    },
    HireComparison {
        other_id: String,
        other_rank: usize,
        score_gap: f64,
        comparison: SkillComparison,
        hired_top: Vec<Attribution>,
        other_top: Vec<Attribution>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StakeholderReport {
    pub audience: Audience,
    pub job_id: String,
    pub subjects: Vec<String>,
    pub context: DecisionContext,
    pub evidence: Vec<Evidence>,
}

impl StakeholderReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Plain-text rendering for people.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let who = match self.audience {
            Audience::Candidate => "candidate",
            Audience::Recruiter => "recruiter",
            Audience::JobPoster => "job poster",
        };
        let _ = writeln!(
            out,
            "Report for {who}: job {} / {}",
            self.job_id,
            self.subjects.join(", ")
        );
        let _ = match &self.context {
            DecisionContext::FilterRejected => writeln!(out, "Decision: eliminated by hard requirements"),
            DecisionContext::RankedOut { rank, of, k } => {
                writeln!(out, "Decision: ranked {rank} of {of}, outside the top {k}")
            }
            DecisionContext::Recommended { rank, k, hired } => match hired {
                Some(h) if Some(h) != self.subjects.first() => {
                    writeln!(out, "Decision: recommended at rank {rank} (top {k}); {h} was hired")
                }
                _ => writeln!(out, "Decision: recommended at rank {rank} (top {k})"),
            },
            DecisionContext::Shortlist { k, passed } => {
                writeln!(
                    out,
                    "Shortlist: top {k} of {passed} candidates passing the requirements"
                )
            }
            DecisionContext::HireReview { hired, rank } => writeln!(out, "Hire: {hired}, ranked {rank}"),
        };
        let fmt_attr = |a: &Attribution| match a.delta {
            Some(d) => format!("{} of {}: {d:+.4}", a.segment.label(), a.segment.document_id),
            None => format!(
                "{} of {}: skipped (document empty)",
                a.segment.label(),
                a.segment.document_id
            ),
        };
        for e in &self.evidence {
            let _ = match e {
                Evidence::Requirement {
                    candidate_id,
                    requirement,
                    met,
                    reason,
                } => writeln!(
                    out,
                    "- requirement [{}] for {candidate_id}: {}{}",
                    requirement.kind,
                    if *met { "met" } else { "not met" },
                    reason.as_ref().map(|r| format!(" ({r})")).unwrap_or_default()
                ),
                Evidence::Attribution {
                    candidate_id,
                    attribution,
                    ..
                } => writeln!(out, "- occlusion for {candidate_id}: {}", fmt_attr(attribution)),
                Evidence::SkillGap {
                    label, holders, top_k, ..
                } => writeln!(out, "- missing skill: {label} (held by {holders} of the top {top_k})"),
                Evidence::SkillComparison(c) => writeln!(
                    out,
                    "- vs {}{}: shared [{}], related {}, only yours [{}], only theirs [{}]",
                    c.other_id,
                    c.other_rank.map(|r| format!(" (rank {r})")).unwrap_or_default(),
                    c.shared.join(", "),
                    c.related.len(),
                    c.only_subject.join(", "),
                    c.only_other.join(", ")
                ),
                Evidence::Shortlisted {
                    candidate_id,
                    rank,
                    score,
                    top_attributions,
                    ..
                } => {
                    let _ = writeln!(out, "{rank}. {candidate_id} (score {score:.4})");
                    for a in top_attributions {
                        let _ = writeln!(out, "     {}", fmt_attr(a));
                    }
                    Ok(())
                }
                Evidence::ComparisonMatrix { candidates, cells } => {
                    let _ = writeln!(out, "Skill comparison (shared/related/similarity):");
                    for (id, row) in candidates.iter().zip(cells) {
                        let cols: Vec<String> = row
                            .iter()
                            .map(|c| format!("{}/{}/{:.2}", c.shared, c.related, c.similarity))
                            .collect();
                        let _ = writeln!(out, "  {id}: {}", cols.join("  "));
                    }
                    Ok(())
                }
                Evidence::HireComparison {
                    other_id,
                    other_rank,
                    score_gap,
                    comparison,
                    hired_top,
                    other_top,
                } => {
                    let _ = writeln!(
                        out,
                        "- ranked above the hire: {other_id} (rank {other_rank}, score gap {score_gap:+.4}); shared [{}], only theirs [{}], only hire [{}]",
                        comparison.shared.join(", "),
                        comparison.only_other.join(", "),
                        comparison.only_subject.join(", ")
                    );
                    for a in hired_top {
                        let _ = writeln!(out, "     hire: {}", fmt_attr(a));
                    }
                    for a in other_top {
                        let _ = writeln!(out, "     {other_id}: {}", fmt_attr(a));
                    }
                    Ok(())
                }
            };
        }
        out
    }
}

/// Everything the reports draw on for one job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobState {
    pub job_id: String,
    pub requirements: Vec<HardRequirement>,
    pub filter: FilterOutcome,
    pub ranking: JobRanking,
    pub profiles: BTreeMap<String, CandidateProfile>,
    pub hired: Option<String>,
}

pub struct Explainer<'a> {
    pub model: &'a Model,
    pub plan: &'a ChunkPlan,
    pub graph: &'a SkillGraph,
    pub documents: HashMap<&'a str, &'a Document>,
    pub jobs: BTreeMap<String, JobState>,
    pub k: usize,
}

/// Ontology concept URIs a profile covers: mentions plus experience claims.
pub fn profile_skills(p: &CandidateProfile) -> BTreeSet<String> {
    let mut s = p.skills.clone();
    s.extend(p.experience.keys().filter_map(|k| match k {
        SkillRef::Concept(uri) => Some(uri.clone()),
        SkillRef::Raw(_) => None,
    }));
    s
}

fn relation(graph: &SkillGraph, a: &str, b: &str) -> SkillRelation {
    graph.relate_skills(a, b).unwrap_or(SkillRelation::Unrelated)
}

pub fn compare_skills(
    graph: &SkillGraph,
    subject: &BTreeSet<String>,
    other: &BTreeSet<String>,
    other_id: &str,
    other_rank: Option<usize>,
) -> SkillComparison {
    let mut related = Vec::new();
    for a in subject.difference(other) {
        for b in other.difference(subject) {
            let r = relation(graph, a, b);
            if r != SkillRelation::Unrelated {
                related.push(RelatedSkills {
                    skill: a.clone(),
                    other_skill: b.clone(),
                    relation: r,
                });
            }
        }
    }
    SkillComparison {
        other_id: other_id.to_string(),
        other_rank,
        shared: subject.intersection(other).cloned().collect(),
        related,
        only_subject: subject.difference(other).cloned().collect(),
        only_other: other.difference(subject).cloned().collect(),
    }
}

fn best_match_sum(graph: &SkillGraph, from: &BTreeSet<String>, to: &BTreeSet<String>) -> f64 {
    from.iter()
        .map(|a| {
            to.iter()
                .map(|b| graph.path_similarity(a, b).unwrap_or(0.0))
                .fold(0.0, f64::max)
        })
        .sum()
}

pub fn matrix_cell(graph: &SkillGraph, a: &BTreeSet<String>, b: &BTreeSet<String>) -> MatrixCell {
    let mut related = 0;
    for x in a {
        for y in b {
            if x != y && relation(graph, x, y) != SkillRelation::Unrelated {
                related += 1;
            }
        }
    }
    let n = a.len() + b.len();
    MatrixCell {
        shared: a.intersection(b).count(),
        related,
        similarity: if n == 0 {
            0.0
        } else {
            (best_match_sum(graph, a, b) + best_match_sum(graph, b, a)) / n as f64
        },
    }
}

impl<'a> Explainer<'a> {
    fn doc(&self, id: &str) -> Result<&'a Document, ExplainError> {
        self.documents
            .get(id)
            .copied()
            .ok_or_else(|| ExplainError::UnknownDocument(id.to_string()))
    }

    fn state(&self, job_id: &str, candidate_id: &str) -> Result<&JobState, ExplainError> {
        self.jobs.get(job_id).ok_or_else(|| ExplainError::UnknownPairing {
            job_id: job_id.to_string(),
            candidate_id: candidate_id.to_string(),
        })
    }

    pub fn attribution(&self, job_id: &str, candidate_id: &str) -> Result<AttributionSet, ExplainError> {
        occlusion_attribution(
            self.model,
            self.plan,
            self.doc(job_id)?,
            self.doc(candidate_id)?,
            Role::Resume,
        )
    }

    fn skills_of(&self, state: &JobState, candidate_id: &str) -> BTreeSet<String> {
        state.profiles.get(candidate_id).map(profile_skills).unwrap_or_default()
    }

    fn requirement_evidence(&self, state: &JobState, candidate_id: &str) -> Vec<Evidence> {
        let Some(profile) = state.profiles.get(candidate_id) else {
            return Vec::new();
        };
        state
            .requirements
            .iter()
            .map(|r| {
                let reason = check_requirement(r, profile, Some(self.graph));
                Evidence::Requirement {
                    candidate_id: candidate_id.to_string(),
                    requirement: r.clone(),
                    met: reason.is_none(),
                    reason,
                }
            })
            .collect()
    }

    fn attribution_evidence(set: &AttributionSet, picked: Vec<Attribution>) -> Vec<Evidence> {
        picked
            .into_iter()
            .map(|attribution| Evidence::Attribution {
                candidate_id: set.candidate_id.clone(),
                baseline_p_match: set.baseline_p_match,
                attribution,
            })
            .collect()
    }

    pub fn candidate_report(&self, candidate_id: &str, job_id: &str) -> Result<StakeholderReport, ExplainError> {
        let state = self.state(job_id, candidate_id)?;
        let report = |context, evidence| StakeholderReport {
            audience: Audience::Candidate,
            job_id: job_id.to_string(),
            subjects: vec![candidate_id.to_string()],
            context,
            evidence,
        };
        if let Some(rej) = state.filter.rejection(candidate_id) {
            let evidence = rej
                .violations
                .iter()
                .map(|v| Evidence::Requirement {
                    candidate_id: candidate_id.to_string(),
                    requirement: v.requirement.clone(),
                    met: false,
                    reason: Some(v.reason.clone()),
                })
                .collect();
            return Ok(report(DecisionContext::FilterRejected, evidence));
        }
        let Some(rank) = state.ranking.position(candidate_id) else {
            return Err(ExplainError::UnknownPairing {
                job_id: job_id.to_string(),
                candidate_id: candidate_id.to_string(),
            });
        };
        let mine = self.skills_of(state, candidate_id);
        let attributions = self.attribution(job_id, candidate_id)?;
        let mut evidence = self.requirement_evidence(state, candidate_id);
        if rank > self.k {
            let top: Vec<&str> = state
                .ranking
                .entries
                .iter()
                .take(self.k)
                .map(|e| e.candidate_id.as_str())
                .collect();
            let mut holders: BTreeMap<String, usize> = BTreeMap::new();
            for id in &top {
                for s in self.skills_of(state, id) {
                    *holders.entry(s).or_default() += 1;
                }
            }
            for (skill, n) in holders {
                let absent = mine
                    .iter()
                    .all(|m| relation(self.graph, &skill, m) == SkillRelation::Unrelated);
                if 2 * n >= top.len() && absent {
                    let label = self
                        .graph
                        .concept(&skill)
                        .map(|c| {
                            c.display_label(self.doc(candidate_id).map_or("en", |d| d.lang()))
                                .to_string()
                        })
                        .unwrap_or_else(|| skill.clone());
                    evidence.push(Evidence::SkillGap {
                        skill,
                        label,
                        holders: n,
                        top_k: top.len(),
                    });
                }
            }
            for (i, id) in top.iter().enumerate() {
                evidence.push(Evidence::SkillComparison(compare_skills(
                    self.graph,
                    &mine,
                    &self.skills_of(state, id),
                    id,
                    Some(i + 1),
                )));
            }
            evidence.extend(Self::attribution_evidence(
                &attributions,
                attributions.top_negative(TOP_ATTRIBUTIONS),
            ));
            return Ok(report(
                DecisionContext::RankedOut {
                    rank,
                    of: state.ranking.entries.len(),
                    k: self.k,
                },
                evidence,
            ));
        }
        let hired = state.hired.clone();
        if let Some(h) = hired.as_deref().filter(|h| *h != candidate_id) {
            evidence.push(Evidence::SkillComparison(compare_skills(
                self.graph,
                &mine,
                &self.skills_of(state, h),
                h,
                state.ranking.position(h),
            )));
            evidence.extend(Self::attribution_evidence(
                &attributions,
                attributions.top_negative(TOP_ATTRIBUTIONS),
            ));
        } else {
            evidence.extend(Self::attribution_evidence(
                &attributions,
                attributions.top_positive(TOP_ATTRIBUTIONS),
            ));
        }
        Ok(report(
            DecisionContext::Recommended { rank, k: self.k, hired },
            evidence,
        ))
    }

    /// Top `min(k, passed)` candidates in rank order, each with its
    /// strongest positive attributions, plus the pairwise skill matrix.
    pub fn recruiter_report(&self, job_id: &str, k: usize) -> Result<StakeholderReport, ExplainError> {
        let state = self.state(job_id, "")?;
        let top: Vec<_> = state.ranking.entries.iter().take(k).collect();
        let sets = par::try_map(&top, |e| self.attribution(job_id, &e.candidate_id))?;
        let mut evidence: Vec<Evidence> = top
            .iter()
            .zip(&sets)
            .map(|(e, set)| Evidence::Shortlisted {
                candidate_id: e.candidate_id.clone(),
                rank: e.rank,
                score: e.score,
                baseline_p_match: set.baseline_p_match,
                top_attributions: set.top_positive(TOP_ATTRIBUTIONS),
            })
            .collect();
        let ids: Vec<String> = top.iter().map(|e| e.candidate_id.clone()).collect();
        let skills: Vec<BTreeSet<String>> = ids.iter().map(|id| self.skills_of(state, id)).collect();
        let cells = skills
            .iter()
            .map(|a| skills.iter().map(|b| matrix_cell(self.graph, a, b)).collect())
            .collect();
        evidence.push(Evidence::ComparisonMatrix {
            candidates: ids.clone(),
            cells,
        });
        Ok(StakeholderReport {
            audience: Audience::Recruiter,
            job_id: job_id.to_string(),
            subjects: ids,
            context: DecisionContext::Shortlist {
                k,
                passed: state.filter.passed.len(),
            },
            evidence,
        })
    }

    /// The hire against every candidate ranked above them.
    pub fn poster_report(&self, job_id: &str, hired_id: &str) -> Result<StakeholderReport, ExplainError> {
        let state = self.state(job_id, hired_id)?;
        let not_recommended = || ExplainError::HiredNotRecommended {
            job_id: job_id.to_string(),
            candidate_id: hired_id.to_string(),
        };
        let rank = state.ranking.position(hired_id).ok_or_else(not_recommended)?;
        if rank > self.k {
            return Err(not_recommended());
        }
        let hired_entry = &state.ranking.entries[rank - 1];
        let hired_set = self.attribution(job_id, hired_id)?;
        let hired_skills = self.skills_of(state, hired_id);
        let above: Vec<_> = state.ranking.entries.iter().take(rank - 1).collect();
        let sets = par::try_map(&above, |e| self.attribution(job_id, &e.candidate_id))?;
        let evidence = above
            .iter()
            .zip(&sets)
            .map(|(e, set)| Evidence::HireComparison {
                other_id: e.candidate_id.clone(),
                other_rank: e.rank,
                score_gap: e.score - hired_entry.score,
                comparison: compare_skills(
                    self.graph,
                    &hired_skills,
                    &self.skills_of(state, &e.candidate_id),
                    &e.candidate_id,
                    Some(e.rank),
                ),
                hired_top: hired_set.top_positive(TOP_ATTRIBUTIONS),
                other_top: set.top_positive(TOP_ATTRIBUTIONS),
            })
            .collect();
        Ok(StakeholderReport {
            audience: Audience::JobPoster,
            job_id: job_id.to_string(),
            subjects: vec![hired_id.to_string()],
            context: DecisionContext::HireReview {
                hired: hired_id.to_string(),
                rank,
            },
            evidence,
        })
    }
}

/// Every attribution cited anywhere in the report.
pub fn cited_attributions(report: &StakeholderReport) -> Vec<(&str, &Attribution)> {
    let mut out = Vec::new();
    for e in &report.evidence {
        match e {
            Evidence::Attribution {
                candidate_id,
                attribution,
                ..
            } => out.push((candidate_id.as_str(), attribution)),
            Evidence::Shortlisted {
                candidate_id,
                top_attributions,
                ..
            } => out.extend(top_attributions.iter().map(|a| (candidate_id.as_str(), a))),
            Evidence::HireComparison {
                other_id,
                hired_top,
                other_top,
                ..
            } => {
                out.extend(hired_top.iter().map(|a| (report.subjects[0].as_str(), a)));
                out.extend(other_top.iter().map(|a| (other_id.as_str(), a)));
            }
            _ => {}
        }
    }
    out
}
