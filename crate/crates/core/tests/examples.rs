//! Runs every shipped example binary. A plain `cargo test` builds them
//! alongside this target; `cargo test --test examples` alone needs
//! `cargo build --examples` first.

use std::path::PathBuf;
use std::process::Command;

const EXAMPLES: [(&str, &[&str]); 8] = [
    ("maxent_fit", &[]),
    ("convergence_check", &[]),
    ("damage_rules", &[]),
    ("fit_parameters", &[]),
    ("knee_probability", &["2000"]),
    ("remaining_life_band", &[]),
    ("datasets", &[]),
    ("synthesize_datasets", &[]),
];

fn examples_dir() -> PathBuf {
    // target/<profile>/deps/<this test> -> target/<profile>/examples
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().join("examples")
}

#[test]
fn every_example_runs() {
    let dir = examples_dir();
    let tmp = tempfile::TempDir::new().unwrap();
    for (name, args) in EXAMPLES {
        let bin = dir.join(format!("{name}{}", std::env::consts::EXE_SUFFIX));
        assert!(bin.exists(), "{} not built; run `cargo build --examples`", bin.display());
        let mut cmd = Command::new(&bin);
        cmd.args(args);
        // examples that write files get a scratch directory
        if matches!(name, "remaining_life_band" | "synthesize_datasets") {
            cmd.arg(tmp.path().join(name));
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty(), "{name} printed nothing");
    }
    // regenerating into the scratch directory reproduces the shipped files
    let shipped = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    for entry in std::fs::read_dir(tmp.path().join("synthesize_datasets")).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(shipped.join(name)).unwrap(), "{name:?}");
    }
}
