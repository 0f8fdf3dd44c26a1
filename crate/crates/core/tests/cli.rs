use std::path::Path;
use std::process::{Command, Output};

use glossfree::datagen::Dataset;

fn glossfree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glossfree"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_data_with_four_scenes_lists_at_most_twelve_triplets() {
    let dir = tempfile::tempdir().unwrap();
    let out = glossfree(&["gen-data", "--out", p(dir.path()), "--scenes", "4", "--seed", "7", "--resolution", "32"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let ds = Dataset::open(dir.path()).unwrap();
    assert_eq!(ds.manifest.scenes.len(), 4);
    assert!(ds.manifest.triplets.len() <= 12);
    assert_eq!(ds.manifest.config.seed, 7);
}

#[test]
fn resolved_config_echo_is_stable_and_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen-data", "--out", p(dir.path()), "--scenes", "1", "--resolution", "32"];
    assert_eq!(code(&glossfree(&args)), 0);
    let echo = dir.path().join("gen-data.resolved.cfg");
    let first = std::fs::read_to_string(&echo).unwrap();
    assert!(first.contains("scenes = 1\n") && first.contains("resolution = 32\n"), "{first}");

    // Feeding the echo back as a config file reproduces it exactly.
    let cfg = dir.path().join("again.cfg");
    std::fs::write(&cfg, &first).unwrap();
    assert_eq!(code(&glossfree(&["gen-data", "--config", p(&cfg)])), 0);
    assert_eq!(std::fs::read_to_string(&echo).unwrap(), first);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, format!("out = {}\nscenes = 1\nseed = 3 # file value\nresolution = 32\n", p(dir.path()))).unwrap();
    assert_eq!(code(&glossfree(&["gen-data", "--config", p(&cfg), "--seed", "4"])), 0);
    assert_eq!(Dataset::open(dir.path()).unwrap().manifest.config.seed, 4);
}

#[test]
fn user_errors_exit_with_one_and_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let out = glossfree(&["train", "--out", p(dir.path())]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--dataset"), "{}", stderr(&out));

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "bogus_key = 1\n").unwrap();
    let out = glossfree(&["gen-data", "--config", p(&cfg), "--out", p(dir.path())]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("bogus_key"), "{}", stderr(&out));

    let out = glossfree(&["gen-data", "--out", p(dir.path()), "--scenes", "many"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("scenes"), "{}", stderr(&out));

    let out = glossfree(&["evaluate", "--checkpoint", "/nonexistent.ckpt", "--dataset", "/nonexistent", "--out", "r.json"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));

    assert_eq!(code(&glossfree(&["frobnicate"])), 1);
}

#[test]
fn help_exits_cleanly() {
    let out = glossfree(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["gen-data", "find-corr", "train", "translate", "evaluate"] {
        assert!(text.contains(cmd), "{text}");
    }
    assert_eq!(code(&glossfree(&["train", "--help"])), 0);
}
