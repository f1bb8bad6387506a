use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fakewatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fakewatch")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_synth(dir: &Path) {
    let cfg = dir.join("synth.json");
    fs::write(
        &cfg,
        r#"{"n_official_sources": 6, "n_fake_sources": 3, "n_entities": 120, "n_major_entities": 10,
            "major_posts": [100, 110], "n_posts": 1400, "n_comments": 8000, "n_users": 600}"#,
    )
    .unwrap();
    let out = dir.join("corpus");
    let o = fakewatch(&["synth", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn missing_fixture_names_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t.json");
    let o = fakewatch(&["thresholds", "--fixtures", tmp.path().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fig2a.csv"), "{}", stderr(&o));
}

#[test]
fn fixture_thresholds_print_inflections() {
    let tmp = tempfile::tempdir().unwrap();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures");
    let out = tmp.path().join("t.json");
    let o = fakewatch(&["thresholds", "--fixtures", fixtures.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let res: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(res.as_array().unwrap().len(), 4);
    assert!(tmp.path().join("t.manifest.json").exists());
}

#[test]
fn exit_codes_by_error_kind() {
    let tmp = tempfile::tempdir().unwrap();
    // Unknown hyperparameter: configuration error.
    let o = fakewatch(&[
        "earlywarn", "--corpus", "x", "--sample", "e1", "--algo", "log", "--hp", "k=3", "--out", "r.json",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    // Missing corpus files: data error.
    let o = fakewatch(&["ingest", "--corpus", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    // Malformed config file: configuration error.
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{not json").unwrap();
    let o = fakewatch(&["run", "--config", bad.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = tmp.path().join("fx");
    fs::create_dir(&fx).unwrap();
    // Constant curves have no inflection point.
    let mut body = String::from("delta,ratio_DD,ratio_DE\n");
    for i in 0..100 {
        body.push_str(&format!("{:.2},0.5,0.5\n", i as f64 / 100.0));
    }
    for f in ["fig2a.csv", "fig2b.csv", "fig3a.csv", "fig3b.csv"] {
        fs::write(fx.join(f), &body).unwrap();
    }
    let o = fakewatch(&[
        "thresholds", "--fixtures", fx.to_str().unwrap(), "--degree", "2", "--out", tmp.path().join("t.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "degree below 3 is a config error: {}", stderr(&o));
    let out = tmp.path().join("t.json");
    let o = fakewatch(&["thresholds", "--fixtures", fx.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(out.exists());
}

#[test]
fn stage_subcommands_on_synthetic_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    small_synth(tmp.path());
    let corpus = tmp.path().join("corpus");
    let c = corpus.to_str().unwrap();
    for f in ["sources.jsonl", "posts.jsonl", "comments.jsonl", "mentions.jsonl", "truth.json", "manifest.json"] {
        assert!(corpus.join(f).exists(), "{f}");
    }

    let o = fakewatch(&["ingest", "--corpus", c]);
    assert!(o.status.success(), "{}", stderr(&o));
    let counts: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(counts["official"]["posts"].as_u64().unwrap() > 0);

    let feats = tmp.path().join("features");
    let o = fakewatch(&["features", "--corpus", c, "--sample", "e1", "--out", feats.to_str().unwrap(), "--plots"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(feats.join("features/e1_features.csv").exists());
    assert!(feats.join("thresholds/e1_presentationdistance_curve.svg").exists());

    let report = tmp.path().join("ew/report.json");
    fs::create_dir_all(report.parent().unwrap()).unwrap();
    let o = fakewatch(&[
        "earlywarn", "--corpus", c, "--sample", "e1", "--algo", "lin,log,dt", "--hp", "LOG.lambda=0.5", "--repeats", "3",
        "--jobs", "2", "--out", report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("ew/report_predictions.csv").exists());
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["benchmark"].as_array().unwrap().len(), 3);

    let fk = tmp.path().join("fk");
    let o = fakewatch(&[
        "fakenews", "--corpus", c, "--sample", "p1", "--experiment", "a", "--algo", "log,dt", "--repeats", "2",
        "--out", fk.to_str().unwrap(), "--plots",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["features.csv", "experiment_a.csv", "experiment_a.svg", "final.json", "stepwise.csv", "manifest.json"] {
        assert!(fk.join(f).exists(), "{f}");
    }
}

#[test]
fn run_then_rerun_from_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"synth": {"n_official_sources": 6, "n_fake_sources": 3, "n_entities": 120, "n_major_entities": 10,
                      "major_posts": [100, 110], "n_posts": 1400, "n_comments": 8000, "n_users": 600, "seed": 3},
            "samples": ["E1"], "repeats": 2, "post_stepwise_features": 3, "post_stepwise_repeats": 1,
            "entity_stepwise_features": 2}"#,
    )
    .unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = fakewatch(&["run", "--config", cfg.to_str().unwrap(), "--algo", "lin,log", "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = fakewatch(&["run", "--manifest", a.join("manifest.json").to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());

    let o = fakewatch(&["report", "--in", a.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("early warning"));
}
