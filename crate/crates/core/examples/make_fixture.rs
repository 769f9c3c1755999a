//! Writes a synthetic news corpus for trying out the pipeline:
//!
//! ```text
//! cargo run -p headliner --example make_fixture -- 120 7 data/tiny.jsonl
//! ```

use std::path::PathBuf;

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(120);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let path: PathBuf = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data/tiny.jsonl"));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).expect("create output directory");
    }
    let docs = headliner::fixture::generate(n, seed);
    headliner::fixture::write_jsonl(&docs, &path).expect("write corpus");
    eprintln!("wrote {} documents to {}", docs.len(), path.display());
}
