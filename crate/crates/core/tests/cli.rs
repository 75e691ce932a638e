use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn ccqa(dir: &Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ccqa"));
    c.current_dir(dir).env_remove("CCQA_CONFIG").env_remove("CCQA_SEED");
    c
}

fn error_record(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not a JSON record: {line:?} ({e})"))
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn stats_on_three_pool_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ccqa(tmp.path())
        .args(["stats", "--input"])
        .arg(fixtures().join("three_pools.jsonl"))
        .args(["--output", "stats.txt"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("Count Interval | [0,2) | [2,5) |"));
    let hist = json(&tmp.path().join("stats.json"));
    assert_eq!(hist["counts"], serde_json::json!([1, 2, 0, 0, 0, 0, 0]));
    assert_eq!(hist["total"], 3);
    let manifest = json(&tmp.path().join("stats.txt.manifest.json"));
    assert_eq!(manifest["command"], "stats");
    assert_eq!(manifest["inputs"][0]["file"], "three_pools.jsonl");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn grad_check_passes_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ccqa(tmp.path())
        .args(["--seed", "97", "grad-check", "--output", "gc.json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("max relative error"));
    let report = json(&tmp.path().join("gc.json"));
    assert!(report["max_rel_error"].as_f64().unwrap() < 1e-4);
    assert_eq!(report["passed"], true);
}

#[test]
fn grad_check_with_impossible_tolerance_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ccqa(tmp.path())
        .args(["grad-check", "--tolerance", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["error"], "domain");
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ccqa(tmp.path()).arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"], "usage");
}

#[test]
fn unreadable_config_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ccqa(tmp.path())
        .args(["--config", "missing.toml", "stats"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["error"], "config");

    std::fs::write(tmp.path().join("bad.toml"), "seed = 1\nnot_a_field = 2\n").unwrap();
    let out = ccqa(tmp.path())
        .args(["--config", "bad.toml", "stats"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn digest_mismatch_on_declared_input() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::copy(fixtures().join("pipeline/Posts.xml"), tmp.path().join("Posts.xml")).unwrap();
    std::fs::write(tmp.path().join("ccqa.toml"), "[digests]\n\"Posts.xml\" = \"0000\"\n").unwrap();
    let out = ccqa(tmp.path())
        .args(["--config", "ccqa.toml", "ingest"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["error"], "digest_mismatch");
    assert!(!tmp.path().join("out/raw_pools.jsonl").exists());
}

#[test]
fn env_seed_applies_and_flag_wins() {
    let tmp = tempfile::tempdir().unwrap();
    let seed_of = |env: Option<&str>, flag: Option<&str>| {
        let mut c = ccqa(tmp.path());
        if let Some(s) = env {
            c.env("CCQA_SEED", s);
        }
        if let Some(s) = flag {
            c.args(["--seed", s]);
        }
        let out = c
            .args(["synth-pools", "--pools", "3", "--output", "s.jsonl"])
            .output()
            .unwrap();
        assert!(out.status.success());
        json(&tmp.path().join("s.jsonl.manifest.json"))["seed"]
            .as_u64()
            .unwrap()
    };
    assert_eq!(seed_of(None, None), 0);
    assert_eq!(seed_of(Some("5"), None), 5);
    assert_eq!(seed_of(Some("5"), Some("8")), 8);
}

#[test]
fn reruns_are_byte_identical_and_inputs_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &str| {
        let out = ccqa(tmp.path())
            .args(["--seed", "4", "synth-pools", "--pools", "12", "--output"])
            .arg(format!("{dir}/corpus.jsonl"))
            .output()
            .unwrap();
        assert!(out.status.success());
        let out = ccqa(tmp.path())
            .args([
                "--seed",
                "4",
                "--weights",
                "0.2,0.3,0.5",
                "--mode",
                "exact",
                "score",
                "--input",
            ])
            .arg(format!("{dir}/corpus.jsonl"))
            .arg("--output")
            .arg(format!("{dir}/scored.jsonl"))
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run("a");
    let before = std::fs::read(tmp.path().join("a/corpus.jsonl")).unwrap();
    run("b");
    assert_eq!(before, std::fs::read(tmp.path().join("a/corpus.jsonl")).unwrap());
    for f in ["corpus.jsonl", "scored.jsonl", "scored.jsonl.manifest.json"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn correlate_reads_metric_records() {
    let tmp = tempfile::tempdir().unwrap();
    let rows: String = (0..6)
        .map(|i| {
            format!(
                "{{\"bleu4\": {}, \"chrf\": {}, \"preference\": {}}}\n",
                i as f64 / 10.0,
                50 - i,
                i * i
            )
        })
        .collect();
    std::fs::write(tmp.path().join("m.jsonl"), rows).unwrap();
    let out = ccqa(tmp.path())
        .args([
            "correlate",
            "--input",
            "m.jsonl",
            "--columns",
            "bleu4,chrf",
            "--output",
            "c.json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let c = json(&tmp.path().join("c.json"));
    assert_eq!(c["rows"][0]["kendall"], 1.0);
    assert_eq!(c["rows"][1]["spearman"], -1.0);
    assert_eq!(c["used"], 6);
}
