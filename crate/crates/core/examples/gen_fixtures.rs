//! Regenerates `seed/` and `fixtures/` of the bundled Ce workflow.
//!
//! cargo run -p qflow-core --example gen_fixtures [workflow-dir]

use std::path::PathBuf;

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("workflows/ce_conformers"));
    let scratch = tempfile::tempdir().expect("tempdir");
    let files = match qflow_core::reference::generate(&dir, scratch.path()) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    };
    for sub in ["seed", "fixtures"] {
        let _ = std::fs::remove_dir_all(dir.join(sub));
    }
    for (rel, text) in &files {
        let p = dir.join(rel);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(&p, text).unwrap();
    }
    println!("wrote {} files under {}", files.len(), dir.display());
}
