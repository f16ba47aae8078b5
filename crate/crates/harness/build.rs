//! Embeds a content hash of the workspace sources as `MACKRL_CODE_HASH`.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

fn collect(dir: &Path, out: &mut Vec<PathBuf>) {
    let Ok(entries) = fs::read_dir(dir) else {
        return;
    };
    for e in entries.flatten() {
        let p = e.path();
        if p.is_dir() {
            collect(&p, out);
        } else if p.extension().is_some_and(|x| x == "rs" || x == "toml") {
            out.push(p);
        }
    }
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let mut files = vec![root.join("Cargo.toml")];
    for krate in ["core", "harness"] {
        let base = root.join("crates").join(krate);
        files.push(base.join("Cargo.toml"));
        files.push(base.join("build.rs"));
        collect(&base.join("src"), &mut files);
        println!("cargo:rerun-if-changed={}", base.join("src").display());
        println!(
            "cargo:rerun-if-changed={}",
            base.join("Cargo.toml").display()
        );
    }
    files.retain(|p| p.is_file());
    let mut named: Vec<(String, PathBuf)> = files
        .into_iter()
        .map(|p| {
            (
                p.strip_prefix(&root)
                    .unwrap_or(&p)
                    .to_string_lossy()
                    .replace('\\', "/"),
                p,
            )
        })
        .collect();
    named.sort();
    named.dedup_by(|a, b| a.0 == b.0);

    // Tree hash over (path, blob hash) entries.
    let mut tree = Sha256::new();
    for (name, path) in &named {
        let bytes = fs::read(path).unwrap_or_default();
        let mut blob = Sha256::new();
        blob.update(format!("blob {}\0", bytes.len()).as_bytes());
        blob.update(&bytes);
        tree.update(name.as_bytes());
        tree.update([0u8]);
        tree.update(blob.finalize());
    }
    let hex: String = tree.finalize().iter().map(|b| format!("{b:02x}")).collect();
    println!("cargo:rustc-env=MACKRL_CODE_HASH={hex}");
}
