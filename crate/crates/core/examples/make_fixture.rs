//! Regenerates the bundled fixture corpus under `fixtures/`.
//!
//! ```sh
//! cargo run -p matchforge-core --example make_fixture
//! ```

use std::path::Path;

use matchforge_core::corpus::write_documents;
use matchforge_core::synth::fixture_corpus;

const FIXTURE_SEED: u64 = 7;

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let fixture = fixture_corpus(FIXTURE_SEED);
    std::fs::write(dir.join("documents.jsonl"), write_documents(&fixture.documents))?;
    std::fs::write(dir.join("pairs.tsv"), fixture.pairs_tsv)?;
    println!("wrote {} documents to {}", fixture.documents.len(), dir.display());
    Ok(())
}
