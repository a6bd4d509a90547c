#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn config(name: &str) -> PathBuf {
    repo_root().join("configs").join(name)
}

/// Runs the binary with `--out <dir>` appended.
pub fn run_cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pev-stability"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

pub fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return BTreeMap::new();
    };
    entries
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

/// One invocation per subcommand, sized to keep the suite quick.
pub fn subcommand_invocations() -> Vec<Vec<String>> {
    let paper = config("paper.json").display().to_string();
    let surge = config("scenario_surge.json").display().to_string();
    let base = |v: &[&str]| {
        let mut a: Vec<String> = v.iter().map(|s| s.to_string()).collect();
        a.extend(["--config".to_string(), paper.clone(), "--seed".into(), "7".into()]);
        a
    };
    vec![
        base(&["equilibria"]),
        base(&["simulate", "--t-end", "0.02", "--abc"]),
        base(&["simulate", "--scenario", &surge, "--t-clear", "0.06", "--t-end", "0.1"]),
        base(&["bifurcate", "--steps", "13"]),
        base(&["roa"]),
        base(&["cct", "--scenario", &surge]),
        base(&["pv-curve", "--points", "51"]),
    ]
}

/// Runs every subcommand twice into fresh directories and reports any
/// invocation whose artifacts differ or that failed.
pub fn determinism_failures() -> Vec<String> {
    let mut bad = Vec::new();
    for args in subcommand_invocations() {
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let (ra, rb) = (run_cli(&argv, a.path()), run_cli(&argv, b.path()));
        let (fa, fb) = (read_dir(a.path()), read_dir(b.path()));
        if !ra.status.success() || !rb.status.success() {
            bad.push(format!("{}: {}", argv[0], String::from_utf8_lossy(&ra.stderr)));
        } else if fa.is_empty() || fa != fb {
            bad.push(format!("{}: artifacts differ", argv[0]));
        }
    }
    bad
}
