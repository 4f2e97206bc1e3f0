#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const SMALL_CONFIG: &str = "\
# small corpus for fast end-to-end runs
n-authors=300
topic-dim=16
n-communities=4
hidden=16
heads=2
epochs=3
";

/// The `coldrec` binary with no `COLDREC_*` variables inherited.
pub fn coldrec() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_coldrec"));
    for (k, _) in std::env::vars_os() {
        if k.to_string_lossy().starts_with("COLDREC_") {
            cmd.env_remove(k);
        }
    }
    cmd
}

pub fn run(args: &[&str]) -> Output {
    coldrec().args(args).output().expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "coldrec {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub struct Pipeline {
    pub corpus: PathBuf,
    pub run: PathBuf,
    pub config: PathBuf,
}

impl Pipeline {
    pub fn dirs(&self) -> [String; 4] {
        [
            "--corpus".into(),
            s(&self.corpus).into(),
            "--run".into(),
            s(&self.run).into(),
        ]
    }

    /// Runs `cmd` against this pipeline's directories and config.
    pub fn exec(&self, cmd: &str, extra: &[&str]) -> Output {
        let dirs = self.dirs();
        let mut args = vec![cmd, "--config", s(&self.config)];
        args.extend(dirs.iter().map(String::as_str));
        args.extend(extra);
        run(&args)
    }

    pub fn exec_ok(&self, cmd: &str, extra: &[&str]) -> Output {
        let out = self.exec(cmd, extra);
        assert!(out.status.success(), "{cmd} failed: {}", stderr(&out));
        out
    }
}

/// synth, split, knn-graph and train on the small corpus under `root`.
pub fn small_pipeline(root: &Path) -> Pipeline {
    let p = Pipeline {
        corpus: root.join("corpus"),
        run: root.join("run"),
        config: root.join("small.conf"),
    };
    std::fs::create_dir_all(root).unwrap();
    std::fs::write(&p.config, SMALL_CONFIG).unwrap();
    run_ok(&["synth", "--config", s(&p.config), "--out", s(&p.corpus)]);
    for cmd in ["split", "knn-graph", "train"] {
        p.exec_ok(cmd, &[]);
    }
    p
}

/// Appends a coauthor edge dated after the cutoff between the endpoints of
/// the first train edge. Returns the endpoints.
pub fn inject_leak(run: &Path) -> (String, String) {
    let path = run.join("train_edges.tsv");
    let text = std::fs::read_to_string(&path).unwrap();
    let first: Vec<&str> = text.lines().next().unwrap().split('\t').collect();
    let (a, b) = (first[0].to_string(), first[1].to_string());
    std::fs::write(&path, format!("{text}{a}\t{b}\tcoauthor\t2025\n")).unwrap();
    (a, b)
}
