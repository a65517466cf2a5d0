//! Deterministic synthetic corpora for tests, benchmarks and the bundled
//! fixture.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Document, Label, LabeledPair, Span};
use crate::embed::bucket;

const FILLER: &[&str] = &[
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet", "kilo", "lima",
    "mike", "november", "oscar", "papa", "quebec", "romeo", "sierra", "tango", "uniform", "victor", "whiskey", "xray",
    "yankee", "zulu", "amber", "basil", "cedar", "dune", "ember", "fern", "grove", "heath", "iris", "jade", "kelp",
    "lotus", "maple", "nectar",
];

/// Filler words whose hash bucket (out of `buckets`) differs from that of
/// `skill`, so the skill token is the only source of its bucket.
pub fn filler_vocabulary(skill: &str, buckets: usize) -> Vec<&'static str> {
    let b = bucket(skill, buckets);
    FILLER.iter().copied().filter(|w| bucket(w, buckets) != b).collect()
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub documents: Vec<Document>,
    pub pairs: Vec<LabeledPair>,
}

impl SyntheticCorpus {
    pub fn document_map(&self) -> std::collections::HashMap<&str, &Document> {
        self.documents.iter().map(|d| (d.id(), d)).collect()
    }
}

/// Pairs whose label is whether the resume shares the job's skill token.
/// Every job names `skill`; half of the resumes (alternating) contain it.
/// Ids are `{prefix}j{i}` / `{prefix}c{i}`.
pub fn separable_corpus(n_pairs: usize, skill: &str, buckets: usize, seed: u64, prefix: &str) -> SyntheticCorpus {
    let vocab = filler_vocabulary(skill, buckets);
    assert!(!vocab.is_empty(), "no filler word avoids the skill bucket");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| -> Vec<&str> {
        let n = rng.gen_range(lo..hi);
        (0..n).map(|_| *vocab.choose(rng).expect("non-empty")).collect()
    };
    let mut documents = Vec::with_capacity(2 * n_pairs);
    let mut pairs = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        let mut job = words(&mut rng, 12, 24);
        let at = rng.gen_range(0..=job.len());
        job.insert(at, skill);
        let is_match = i % 2 == 0;
        let mut resume = words(&mut rng, 15, 30);
        if is_match {
            for _ in 0..rng.gen_range(1..=3) {
                let at = rng.gen_range(0..=resume.len());
                resume.insert(at, skill);
            }
        }
        let (jid, cid) = (format!("{prefix}j{i}"), format!("{prefix}c{i}"));
        documents.push(Document::new(jid.clone(), "en", job.join(" ")));
        documents.push(Document::new(cid.clone(), "en", resume.join(" ")));
        let label = if is_match { Label::Match } else { Label::Unmatch };
        pairs.push(LabeledPair {
            job_id: jid,
            candidate_id: cid,
            status: label.to_string(),
            label,
        });
    }
    SyntheticCorpus { documents, pairs }
}

struct SkillName {
    en: &'static str,
    fr: &'static str,
}

const SKILLS: &[SkillName] = &[
    SkillName {
        en: "Python",
        fr: "Python",
    },
    SkillName { en: "Java", fr: "Java" },
    SkillName { en: "SQL", fr: "SQL" },
    SkillName {
        en: "JavaScript",
        fr: "JavaScript",
    },
    SkillName {
        en: "machine learning",
        fr: "apprentissage automatique",
    },
    SkillName { en: "C++", fr: "C++" },
];

fn skill(i: usize, lang: &str) -> &'static str {
    let s = &SKILLS[i % SKILLS.len()];
    if lang == "fr" {
        s.fr
    } else {
        s.en
    }
}

pub const STATUS_MATCH: &str = "Accepted Jobs Skills";
pub const STATUS_UNMATCH: &str = "Not retained - Physical interview";
pub const STATUS_UNKNOWN: &str = "interested candidate";

/// Bilingual job/resume fixture with sections, hard requirements, a
/// duplicated job posting, a few short resumes and some unlabeled pairs.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub documents: Vec<Document>,
    /// `job_id \t candidate_id \t status` with a header line.
    pub pairs_tsv: String,
}

pub fn fixture_corpus(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_jobs = 8;
    let n_cands = 48;
    let mut documents = Vec::new();

    for j in 0..n_jobs {
        let lang = if j % 2 == 0 { "en" } else { "fr" };
        let (primary, secondary) = (skill(j, lang), skill(j + 2, lang));
        let years = 2 + j % 3;
        let text = if lang == "en" {
            let mut t = format!(
                "We are hiring a developer to build reliable services for our clients. You have {years}+ years of {primary}. \
                 Experience with {secondary} is an asset. Our team values teamwork and communication."
            );
            if j % 4 == 0 {
                t.push_str(" Fluent in English.");
            }
            t
        } else {
            format!(
                "Nous recrutons un développeur pour construire des services fiables pour nos clients. \
                 Vous avez {years} ans d'expérience en {primary}. La connaissance de {secondary} est un atout. \
                 Notre équipe valorise le travail d'équipe et la communication."
            )
        };
        documents.push(Document::new(format!("j{:02}", j + 1), lang, text));
    }
    // the same posting published twice under another id
    let dup = documents[0].text().to_string();
    documents.push(Document::new(format!("j{:02}", n_jobs + 1), "en", format!("{dup} ")));

    let mut primaries = Vec::with_capacity(n_cands);
    for c in 0..n_cands {
        let lang = if rng.gen_bool(0.6) { "en" } else { "fr" };
        let p = c % SKILLS.len();
        let s = (p + rng.gen_range(1..SKILLS.len())) % SKILLS.len();
        primaries.push((p, s));
        let years = rng.gen_range(1..=8);
        let short = c % 16 == 15;
        let mut sections: Vec<(&str, String)> = Vec::new();
        if lang == "en" {
            sections.push((
                "summary",
                if short {
                    "Developer looking for a new role.".to_string()
                } else {
                    "Software developer with a passion for clean code and reliable delivery. I enjoy mentoring colleagues, \
                     reviewing designs and learning new tools every week."
                        .to_string()
                },
            ));
            sections.push((
                "experience",
                format!(
                    "{years} years of experience in {}. I built data pipelines, internal dashboards and automated test \
                     suites for several clients in retail and finance.",
                    skill(p, lang)
                ),
            ));
            sections.push((
                "skills",
                format!("{}, {}, teamwork, communication.", skill(p, lang), skill(s, lang)),
            ));
            if rng.gen_bool(0.5) {
                sections.push(("education", "Bachelor's degree in computer science.".to_string()));
            }
        } else {
            sections.push((
                "summary",
                if short {
                    "Développeur à la recherche d'un poste.".to_string()
                } else {
                    "Développeur logiciel passionné par le code propre et la livraison fiable. J'aime accompagner mes \
                     collègues, relire des conceptions et apprendre de nouveaux outils chaque semaine."
                        .to_string()
                },
            ));
            sections.push((
                "experience",
                format!(
                    "{years} ans d'expérience en {}. J'ai construit des chaînes de données, des tableaux de bord internes \
                     et des tests automatisés pour plusieurs clients du commerce et de la finance.",
                    skill(p, lang)
                ),
            ));
            let mut skills_line = format!(
                "{}, {}, travail d'équipe, communication.",
                skill(p, lang),
                skill(s, lang)
            );
            if rng.gen_bool(0.5) {
                skills_line.push_str(" Maîtrise de l'anglais.");
            }
            sections.push(("skills", skills_line));
            if rng.gen_bool(0.5) {
                sections.push(("education", "Baccalauréat en informatique.".to_string()));
            }
        }
        if short {
            sections.retain(|(name, _)| *name == "summary" || *name == "skills");
        }
        let mut text = String::new();
        let mut spans = BTreeMap::new();
        for (name, body) in sections {
            if !text.is_empty() {
                text.push(' ');
            }
            let start = text.len();
            text.push_str(&body);
            spans.insert(name.to_string(), Span::new(start, text.len()));
        }
        let doc = Document::new(format!("c{:03}", c + 1), lang, text)
            .with_sections(spans)
            .expect("generated sections are valid");
        documents.push(doc);
    }

    let mut pairs_tsv = String::from("job_id\tcandidate_id\tstatus\n");
    for j in 0..=n_jobs {
        let primary = j % SKILLS.len();
        let mut same: Vec<usize> = (0..n_cands).filter(|&c| primaries[c].0 == primary).collect();
        let mut other: Vec<usize> = (0..n_cands).filter(|&c| primaries[c].0 != primary).collect();
        same.shuffle(&mut rng);
        other.shuffle(&mut rng);
        let mut chosen: Vec<usize> = same.into_iter().take(5).chain(other.into_iter().take(7)).collect();
        chosen.sort_unstable();
        for c in chosen {
            let (p, s) = primaries[c];
            let fits = p == primary || (s == primary && rng.gen_bool(0.5));
            let status = if rng.gen_bool(0.08) {
                STATUS_UNKNOWN
            } else if fits {
                STATUS_MATCH
            } else {
                STATUS_UNMATCH
            };
            let _ = writeln!(pairs_tsv, "j{:02}\tc{:03}\t{status}", j + 1, c + 1);
        }
    }
    Fixture { documents, pairs_tsv }
}
