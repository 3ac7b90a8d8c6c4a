//! End-to-end runs of the `synens` binary on the bundled toy treebank.
//!
//! Golden outputs live in `tests/golden/`. Set `UPDATE_GOLDEN=1` to rewrite
//! them after an intentional change.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_synens");

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("spawn synens")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "synens {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn check_golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden file {}; rerun with UPDATE_GOLDEN=1", path.display()));
    assert_eq!(actual, expected, "output differs from {name}");
}

/// Splits the treebank, trains plain and syntax n-gram models on the first
/// 250 trees and decodes with each configuration.
fn pipeline(dir: &Path) -> Vec<(&'static str, String)> {
    let trees = fs::read_to_string(data("toy_trees.txt")).unwrap();
    let lines: Vec<&str> = trees.lines().collect();
    fs::write(dir.join("train.trees"), lines[..250].join("\n") + "\n").unwrap();
    fs::write(dir.join("test.trees"), lines[250..].join("\n") + "\n").unwrap();

    ok(dir, &["extract-labels", "-i", "train.trees", "-o", "labels.txt"]);
    for (to, file) in [("plain", "train.plain"), ("linder", "train.linder"), ("tree", "train.tree")] {
        ok(dir, &["convert", "--from", "tree", "--to", to, "-i", "train.trees", "-o", file]);
    }
    ok(dir, &["convert", "--from", "tree", "--to", "plain", "-i", "test.trees", "-o", "test.plain"]);
    for (src, model) in [("train.plain", "plain.lm"), ("train.linder", "linder.lm"), ("train.tree", "tree.lm")] {
        ok(dir, &["train-ngram", "--order", "3", "-i", src, "-o", model]);
    }
    ok(dir, &["learn-bpe", "--merges", "40", "-i", "train.plain", "-o", "codes.txt"]);
    ok(dir, &["apply-bpe", "--codes", "codes.txt", "-i", "train.plain", "-o", "train.bpe"]);
    ok(dir, &["train-ngram", "--order", "3", "-i", "train.bpe", "-o", "bpe.lm"]);

    let stats = ok(dir, &["stats", "-i", "train.trees"]);
    let linder_head: String = fs::read_to_string(dir.join("train.linder")).unwrap().lines().take(5).map(|l| format!("{l}\n")).collect();
    let bpe_head: String = fs::read_to_string(dir.join("train.bpe")).unwrap().lines().take(5).map(|l| format!("{l}\n")).collect();

    let mut decodes = String::new();
    let configs: [(&str, &[&str]); 5] = [
        ("single plain", &["--model", "plain=plain.lm"]),
        ("single linder constrained", &["--model", "linder=linder.lm", "--constrain"]),
        ("multirep plain+linder", &["--mode", "multirep", "--model", "plain=plain.lm", "--model", "linder=linder.lm", "--show-internal"]),
        ("multirep plain+tree constrained", &["--mode", "multirep", "--model", "plain=plain.lm", "--model", "tree=tree.lm", "--show-internal", "--constrain"]),
        ("multirep plain+bpe", &["--mode", "multirep", "--model", "plain=plain.lm", "--model", "plain=bpe.lm", "--codes", "codes.txt", "--show-internal"]),
    ];
    for (name, extra) in configs {
        let mut args = vec!["decode", "--labels", "labels.txt", "--beam", "4", "--max-len", "40"];
        args.extend_from_slice(extra);
        decodes.push_str(&format!("## {name}\n{}", ok(dir, &args)));
    }

    // Score a degraded copy of the test side against itself.
    let test_plain = fs::read_to_string(dir.join("test.plain")).unwrap();
    let degraded: String = test_plain
        .lines()
        .enumerate()
        .map(|(i, l)| {
            let mut w: Vec<&str> = l.split_whitespace().collect();
            if i % 3 == 0 {
                w.pop();
            }
            format!("{}\n", w.join(" "))
        })
        .collect();
    fs::write(dir.join("sys.txt"), degraded).unwrap();
    let bleu = ok(dir, &["eval-bleu", "--hyp", "sys.txt", "--ref", "test.plain"]);
    let sig = ok(dir, &["significance", "--hyp-a", "sys.txt", "--hyp-b", "test.plain", "--ref", "test.plain", "--samples", "200", "--seed", "3"]);

    vec![
        ("stats.txt", stats),
        ("linder_head.txt", linder_head),
        ("bpe_head.txt", bpe_head),
        ("decode.txt", decodes),
        ("bleu.txt", bleu),
        ("significance.txt", sig),
    ]
}

#[test]
fn pipeline_matches_golden_outputs() {
    let dir = TempDir::new().unwrap();
    for (name, text) in pipeline(dir.path()) {
        check_golden(name, &text);
    }
}

#[test]
fn pipeline_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(pipeline(a.path()), pipeline(b.path()));
}

#[test]
fn syntax_round_trips_through_the_cli() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let trees = data("toy_trees.txt");
    let trees = trees.to_str().unwrap();
    ok(d, &["extract-labels", "-i", trees, "-o", "labels.txt"]);
    let original = ok(d, &["convert", "--from", "tree", "--to", "tree", "-i", trees]);
    for (to, from) in [("linder", "linder"), ("derivation", "derivation")] {
        ok(d, &["convert", "--from", "tree", "--to", to, "-i", trees, "-o", "x.txt"]);
        let back = ok(d, &["convert", "--from", from, "--to", "tree", "--labels", "labels.txt", "-i", "x.txt"]);
        assert_eq!(back, original, "round trip through {to}");
    }
}

#[test]
fn toy_training_writes_model_and_log() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let trees = data("toy_trees.txt");
    ok(d, &["convert", "--from", "tree", "--to", "plain", "-i", trees.to_str().unwrap(), "-o", "plain.txt"]);
    let args = ["train-toy", "-i", "plain.txt", "--steps", "6", "--batch-tokens", "256", "--batches-per-update", "2", "--seed", "1", "-o", "toy.m", "--log", "log.txt"];
    ok(d, &args);
    let first = fs::read_to_string(d.join("toy.m")).unwrap();
    let log = fs::read_to_string(d.join("log.txt")).unwrap();
    assert!(first.starts_with("#toyscorer v1"));
    assert_eq!(log.lines().count(), 6);
    assert!(log.lines().all(|l| l.starts_with("step=") && l.contains("\ttokens=")));
    ok(d, &args);
    assert_eq!(fs::read_to_string(d.join("toy.m")).unwrap(), first);
    ok(d, &["decode", "--model", "plain=toy.m", "--max-len", "8"]);
}

/// A bigram model trained on one repeated sentence decodes to that sentence.
#[test]
fn single_mode_recovers_deterministic_model_output() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("c.txt"), "the dog saw a cat\n".repeat(20)).unwrap();
    ok(d, &["train-ngram", "--order", "2", "--k", "0.001", "-i", "c.txt", "-o", "m.lm"]);
    let out = ok(d, &["decode", "--model", "plain=m.lm", "--beam", "1"]);
    assert_eq!(out, "the dog saw a cat\n");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    for args in [&["stats", "--bogus"][..], &["no-such-command"], &["decode"], &["decode", "--model", "nokind"]] {
        let out = run(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn failures_exit_with_one_and_leave_no_output() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.trees"), "(ROOT (S (NP a )\n").unwrap();
    fs::write(d.join("hyp.txt"), "a b\n").unwrap();
    fs::write(d.join("ref.txt"), "a b\nc d\n").unwrap();
    let cases: [&[&str]; 4] = [
        &["convert", "--from", "tree", "--to", "plain", "-i", "bad.trees", "-o", "out.txt"],
        &["decode", "--model", "plain=missing.lm", "-o", "out.txt"],
        &["eval-bleu", "--hyp", "hyp.txt", "--ref", "ref.txt", "-o", "out.txt"],
        &["convert", "--from", "plain", "--to", "tree", "-i", "hyp.txt", "-o", "out.txt"],
    ];
    for args in cases {
        let out = run(d, args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.starts_with("error: ") && err.lines().count() == 1, "{args:?}: {err}");
        assert!(!d.join("out.txt").exists(), "{args:?} left a partial file");
    }
}
