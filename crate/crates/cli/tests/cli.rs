use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn hatesense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hatesense")).args(args).output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hatesense-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn help_lists_subcommands_and_flags() {
    let out = hatesense(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["synth", "train", "evaluate", "audit", "compare", "predict", "subset", "experiment"] {
        assert!(text.contains(cmd), "missing {cmd}");
    }
    let train = String::from_utf8(hatesense(&["train", "--help"]).stdout).unwrap();
    for flag in ["--corpus", "--mode", "--temperature", "--lambda-consensus", "--seed", "--out"] {
        assert!(train.contains(flag), "missing {flag}");
    }
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let out = hatesense(&["train", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--corpus"));
}

#[test]
fn malformed_corpus_names_the_line() {
    let dir = scratch("malformed");
    let corpus = dir.join("bad.jsonl");
    fs::write(
        &corpus,
        "{\"text\":\"a b\",\"label\":\"hate\",\"groups\":[\"g\"],\"split\":\"train\"}\nnot json\n",
    )
    .unwrap();
    let out = hatesense(&["train", "--corpus", corpus.to_str().unwrap(), "--out", dir.join("m").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:") && err.contains("line 2"), "{err}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn benchmark_corpus_has_a_starved_group() {
    let dir = scratch("bench");
    let path = dir.join("c.jsonl");
    let out = hatesense(&["synth", "--benchmark", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    let train_of = |g: &str| -> usize {
        let line = table.lines().find(|l| l.split_whitespace().next() == Some(g)).unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    };
    assert_eq!(train_of("g5"), 16);
    assert!(train_of("g1") >= 5 * 16);
    let _ = fs::remove_dir_all(&dir);
}
