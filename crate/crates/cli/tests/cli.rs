use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn config() -> PathBuf {
    fixtures().join("matchforge.toml")
}

fn mf(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matchforge"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("MATCHFORGE_STORE")
        .output()
        .expect("binary runs")
}

fn stage(name: &str, out: &Path) -> String {
    let cfg = config();
    let o = mf(&[name, "--config", cfg.to_str().unwrap()], out);
    assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    let line = String::from_utf8(o.stdout).unwrap();
    assert!(line.starts_with(&format!("{name} run ")), "{line}");
    line.split_whitespace().nth(2).unwrap().to_string()
}

const STAGES: [&str; 6] = ["ingest", "plan", "train", "rank", "evaluate", "explain"];

fn full_pipeline(out: &Path) -> BTreeMap<&'static str, String> {
    STAGES.iter().map(|s| (*s, stage(s, out))).collect()
}

fn artifacts(out: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![out.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            let rel = p.strip_prefix(out).unwrap().to_string_lossy().into_owned();
            if rel == "store" {
                continue;
            }
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

#[test]
fn help_exits_zero_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let mut cases: Vec<Vec<&str>> = vec![vec!["--help"]];
    for s in STAGES.iter().chain(&["trace"]) {
        cases.push(vec![s, "--help"]);
    }
    for a in ["runs", "lineage", "verify"] {
        cases.push(vec!["trace", a, "--help"]);
    }
    for c in cases {
        let o = mf(&c, dir.path());
        assert!(o.status.success(), "{c:?}");
        assert!(!o.stdout.is_empty());
    }
}

#[test]
fn evaluate_without_checkpoint_is_a_model_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mf(&["evaluate"], dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn error_classes_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[pipeline]\nwindow = 10\noverlap = 20\n").unwrap();
    let o = mf(&["plan", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = mf(
        &[
            "ingest",
            "--documents",
            "/nonexistent.jsonl",
            "--pairs",
            "/nonexistent.tsv",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));

    let o = mf(&["plan"], dir.path());
    assert_eq!(o.status.code(), Some(3));

    let o = mf(&["trace", "lineage", "deadbeef"], dir.path());
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn ingest_writes_audit_corpus_and_run_record() {
    let dir = tempfile::tempdir().unwrap();
    let run_id = stage("ingest", dir.path());
    assert!(dir.path().join("corpus.json").is_file());
    let audit = std::fs::read_to_string(dir.path().join("audit.jsonl")).unwrap();
    assert!(audit.contains("j09"), "the duplicated posting is audited");
    let o = mf(&["trace", "runs"], dir.path());
    let runs = String::from_utf8(o.stdout).unwrap();
    assert!(runs.lines().any(|l| l.starts_with(&run_id) && l.contains("ingest")));
}

#[test]
fn store_location_follows_environment() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("elsewhere");
    let cfg = config();
    let o = Command::new(env!("CARGO_BIN_EXE_matchforge"))
        .args(["ingest", "--config", cfg.to_str().unwrap(), "--out"])
        .arg(dir.path().join("out"))
        .env("MATCHFORGE_STORE", &store)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(store.join("ledger.jsonl").is_file());
    assert!(!dir.path().join("out/store").exists());
}

#[test]
fn full_pipeline_is_traceable_replayable_and_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let runs = full_pipeline(a.path());
    let again = full_pipeline(b.path());
    assert_eq!(runs, again, "run ids depend only on config, inputs and seed");
    let (fa, fb) = (artifacts(a.path()), artifacts(b.path()));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        assert!(bytes == &fb[name], "{name} differs between invocations");
    }
    assert!(fa.keys().any(|k| k.starts_with("reports/recruiter_")));
    assert!(fa
        .keys()
        .any(|k| k.starts_with("reports/candidate_") && k.ends_with(".txt")));

    let lineage = mf(&["trace", "lineage", &runs["explain"]], a.path());
    assert!(lineage.status.success());
    let lineage = String::from_utf8(lineage.stdout).unwrap();
    let raw = std::fs::read(fixtures().join("documents.jsonl")).unwrap();
    let raw_hash = matchforge_core::trace::sha256_hex(&raw);
    let corpus_hash = matchforge_core::trace::sha256_hex(&fa["corpus.json"]);
    assert!(lineage.contains(&raw_hash));
    assert!(lineage.contains(&corpus_hash));
    for s in STAGES {
        assert!(
            lineage.contains(&format!("run {} {s}", runs[s])),
            "{s} missing from lineage"
        );
    }

    for s in STAGES {
        let o = mf(&["trace", "verify", &runs[s]], a.path());
        assert!(o.status.success(), "{s}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let ckpt = matchforge_core::trace::sha256_hex(&fa["model.ckpt"]);
    let blob = a.path().join("store/objects").join(&ckpt[..2]).join(&ckpt[2..]);
    let mut bytes = std::fs::read(&blob).unwrap();
    bytes[0] ^= 1;
    std::fs::write(&blob, bytes).unwrap();
    let o = mf(&["trace", "verify", &runs["train"]], a.path());
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains(&ckpt));
}
