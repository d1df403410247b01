use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn demo_copy() -> (tempfile::TempDir, PathBuf) {
    let d = tempfile::tempdir().unwrap();
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("demo");
    copy_dir(&src, d.path());
    let cfg = d.path().join("demo.toml");
    (d, cfg)
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let p = e.path();
        if p.file_name().is_some_and(|n| n == "out") {
            continue;
        }
        if p.is_dir() {
            copy_dir(&p, &to.join(e.file_name()));
        } else {
            std::fs::copy(&p, to.join(e.file_name())).unwrap();
        }
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transloop")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn stats_writes_reports_and_filters_groups() {
    let (d, cfg) = demo_copy();
    let cfg = cfg.to_str().unwrap();
    let o = run(&["stats", "-c", cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(&d.path().join("out/report/corpus_stats.csv"));
    assert!(csv.starts_with("scope,metric,min,avg,stddev,max,files\n"));
    assert!(csv.contains("all,LOC,4,6,"));
    assert!(d.path().join("out/report/corpus_stats.json").exists());

    let o = run(&["stats", "-c", cfg, "--group", "internal"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(&d.path().join("out/report/corpus_stats_internal.csv"));
    assert!(csv.lines().all(|l| !l.starts_with("external,")));
    assert!(csv.contains("all,LOC,4,5.5000,"), "{csv}");
}

#[test]
fn missing_corpus_is_a_config_error() {
    let (d, cfg) = demo_copy();
    let missing = d.path().join("nowhere");
    let o = run(&["stats", "-c", cfg.to_str().unwrap(), "--corpus", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere"), "{}", stderr(&o));

    let bad = d.path().join("bad.toml");
    std::fs::write(&bad, "corpus = \"corpus\"\nk = 0\n").unwrap();
    assert_eq!(run(&["stats", "-c", bad.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&bad, "corpus = \"corpus\"\nunknown_key = 1\n").unwrap();
    assert_eq!(run(&["stats", "-c", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn translate_is_deterministic_and_resumable() {
    let (d, cfg) = demo_copy();
    let cfg = cfg.to_str().unwrap();
    let o = run(&["translate", "-c", cfg, "--limit", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("10 new runs"));
    assert_eq!(stderr(&o).lines().filter(|l| l.starts_with('[')).count(), 10);
    let o = run(&["translate", "-c", cfg]);
    assert!(stderr(&o).contains("80 new runs (10 already"), "{}", stderr(&o));
    let o = run(&["translate", "-c", cfg]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("0 new runs"), "{}", stderr(&o));
    let resumed = read(&d.path().join("out/ledger.jsonl"));

    let other = d.path().join("second.jsonl");
    let o = run(&["translate", "-c", cfg, "--ledger", other.to_str().unwrap(), "--parallelism", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(resumed, read(&other));
}

#[test]
fn single_iteration_disables_feedback() {
    let (d, cfg) = demo_copy();
    let ledger = d.path().join("one.jsonl");
    let o = run(&["translate", "-c", cfg.to_str().unwrap(), "--max-iterations", "1", "--ledger", ledger.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = read(&ledger);
    let runs: Vec<serde_json::Value> =
        text.lines().map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()).filter(|v| v["type"] == "run").collect();
    assert_eq!(runs.len(), 90);
    assert!(runs.iter().all(|r| r["attempts"].as_array().unwrap().len() == 1));
    // max2.c under mock-a only compiles after feedback.
    assert!(runs.iter().filter(|r| r["model_id"] == "mock-a" && r["source_id"] == "max2.c").all(|r| r["success"] == false));

    // A ledger written under another configuration is rejected.
    let o = run(&["translate", "-c", cfg.to_str().unwrap(), "--ledger", ledger.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn evaluate_emits_requested_analyses() {
    let (d, cfg) = demo_copy();
    let cfg = cfg.to_str().unwrap();
    assert!(run(&["translate", "-c", cfg]).status.success());
    let o = run(&["evaluate", "-c", cfg, "--pass-table"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = read(&d.path().join("out/report/mock-a/pass_table_identity.csv"));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "pass@5,<=1,<=2,<=3,<=4,<=5");
    assert_eq!(lines[1], "Compilation success,0.6667,1.0000,1.0000,1.0000,1.0000");
    assert_eq!(lines[2], "Final result,0.6667,1.0000,1.0000,1.0000,1.0000");
    assert!(!d.path().join("out/report/robustness.csv").exists());

    let o = run(&["evaluate", "-c", cfg, "--robust", "--augmented", "--token-curve", "--failure-hist", "--errors"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rob = read(&d.path().join("out/report/robustness.csv"));
    let mut lines = rob.lines();
    assert_eq!(lines.next(), Some("model,perturbations,robust,mean,augmented"));
    for l in lines {
        let f: Vec<f64> = l.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert!(f[0] <= f[1] && f[1] <= f[2], "{l}");
    }
    for name in ["token_curve.csv", "failure_histogram.csv", "errors.csv", "per_perturbation.csv", "plot_token_curve.json"] {
        assert!(d.path().join("out/report/mock-b").join(name).exists(), "{name}");
    }
}

#[test]
fn solved_sets_over_two_ledgers() {
    let (d, cfg) = demo_copy();
    let text = read(&cfg);
    // One model per config, each with its own ledger.
    let (head, models) = text.split_once("[[models]]").unwrap();
    let (a, b) = models.split_once("[[models]]").unwrap();
    let cfg_a = d.path().join("a.toml");
    let cfg_b = d.path().join("b.toml");
    std::fs::write(&cfg_a, format!("{}[[models]]{a}", head.replace("out/ledger.jsonl", "out/a.jsonl"))).unwrap();
    std::fs::write(&cfg_b, format!("{}[[models]]{b}", head.replace("out/ledger.jsonl", "out/b.jsonl"))).unwrap();
    for c in [&cfg_a, &cfg_b] {
        let o = run(&["translate", "-c", c.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let b_ledger = d.path().join("out/b.jsonl");
    let o = run(&["evaluate", "-c", cfg_a.to_str().unwrap(), "--solved-sets", "--with-ledger", b_ledger.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(&d.path().join("out/report/solved_sets.csv"));
    assert_eq!(csv, "region,files\nmock-a,1\nmock-b,0\nmock-a+mock-b,2\nunion,3\n");
}

#[test]
fn evaluate_reports_coverage_gaps() {
    let (d, cfg) = demo_copy();
    let cfg = cfg.to_str().unwrap();
    assert!(run(&["translate", "-c", cfg, "--limit", "12"]).status.success());
    let o = run(&["evaluate", "-c", cfg, "--robust"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("coverage"));
    let missing = d.path().join("none.jsonl");
    let o = run(&["evaluate", "-c", cfg, "--ledger", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn perturb_writes_corpora_and_manifests() {
    let (d, cfg) = demo_copy();
    let out = d.path().join("perturbed");
    let o = run(&[
        "perturb",
        "-c",
        cfg.to_str().unwrap(),
        "--perturbations",
        "Identity,DeMorgan,ShortIdentifiers",
        "--out-root",
        out.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["add.c", "max2.c", "in_range.c"] {
        assert_eq!(read(&out.join("corpus__Identity__3").join(f)), read(&d.path().join("corpus").join(f)));
    }
    let dm = read(&out.join("corpus__DeMorgan__3/in_range.c"));
    assert!(dm.contains("!(x < lo) && !(x > hi)") || dm.contains("x >= lo"), "{dm}");
    let m: serde_json::Value = serde_json::from_str(&read(&out.join("corpus__DeMorgan__3/manifest.json"))).unwrap();
    let entries = m["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    // The simulated checker cannot self-check, so changed files are marked skipped.
    let in_range = entries.iter().find(|e| e["source_id"] == "in_range.c").unwrap();
    assert_eq!(in_range["verdict"], "skipped");
    assert_eq!(in_range["identity"], false);
    let id: serde_json::Value = serde_json::from_str(&read(&out.join("corpus__Identity__3/manifest.json"))).unwrap();
    assert!(id["entries"].as_array().unwrap().iter().all(|e| e["identity"] == true && e["verdict"] == "identity"));
}

#[test]
fn model_perturbation_without_backend_is_a_config_error() {
    let (d, _) = demo_copy();
    let cfg = d.path().join("nomodel.toml");
    std::fs::write(&cfg, "corpus = \"corpus\"\nperturbations = [\"IdentifierRoundTrip\"]\n").unwrap();
    let o = run(&["perturb", "-c", cfg.to_str().unwrap(), "--skip-self-check"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("IdentifierRoundTrip"), "{}", stderr(&o));
}

#[test]
fn de_morgan_self_checks_clean_with_the_toolchain() {
    let (d, _) = demo_copy();
    let cfg = d.path().join("fuzz.toml");
    std::fs::write(
        &cfg,
        "corpus = \"corpus\"\nperturbations = [\"DeMorgan\"]\n\n[perturb]\nself_check_secs = 2\n\n[checker]\nkind = \"toolchain\"\n",
    )
    .unwrap();
    let out = d.path().join("perturbed");
    let o = run(&["perturb", "-c", cfg.to_str().unwrap(), "--out-root", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_str(&read(&out.join("corpus__DeMorgan__0/manifest.json"))).unwrap();
    let in_range = m["entries"].as_array().unwrap().iter().find(|e| e["source_id"] == "in_range.c").unwrap().clone();
    assert_eq!(in_range["verdict"], "equivalent-within-budget");
}
