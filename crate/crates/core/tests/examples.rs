//! Runs every example binary built alongside the tests.

use std::path::PathBuf;
use std::process::Command;

const EXAMPLES: [&str; 6] = [
    "binary_classification",
    "continuous_regression",
    "cross_validation",
    "kernel_approximation",
    "proximal_operators",
    "save_and_load",
];

/// `target/<profile>/examples`, next to the `deps` directory holding this test.
fn examples_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|deps| deps.parent()).unwrap().join("examples")
}

#[test]
fn every_example_runs() {
    let dir = examples_dir();
    for name in EXAMPLES {
        let path = dir.join(format!("{name}{}", std::env::consts::EXE_SUFFIX));
        if !path.exists() {
            // examples are only built by a plain `cargo test`
            eprintln!("skipping {name}: {} not built", path.display());
            continue;
        }
        let out = Command::new(&path).output().unwrap();
        assert!(
            out.status.success(),
            "{name} failed:\n{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stdout.is_empty(), "{name} printed nothing");
    }
}
