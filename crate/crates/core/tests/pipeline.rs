use std::fs;

use fakewatch_core::pipeline::{run_pipeline, Manifest, RunConfig};
use fakewatch_core::synth::SynthConfig;
use fakewatch_core::{Algorithm, SampleName};

#[test]
fn failed_stage_leaves_marker_and_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        synth: Some(SynthConfig {
            disputed_fraction: 0.0,
            ..SynthConfig::small(3)
        }),
        samples: vec![SampleName::E1],
        algorithms: vec![Algorithm::Lin, Algorithm::Log],
        repeats: 2,
        ..RunConfig::default()
    };
    let err = run_pipeline(&cfg, tmp.path()).unwrap_err();
    let marker = fs::read_to_string(tmp.path().join("FAILED")).unwrap();
    assert!(marker.contains("earlywarn"), "{marker}");
    assert!(marker.contains(&err.to_string()));
    let m = Manifest::load(&tmp.path().join("manifest.json")).unwrap();
    assert_eq!(m.failed_stage.as_deref(), Some("earlywarn E1"));
    assert!(m.outputs.iter().any(|o| o.path == "features/e1_features.csv"));
    for o in &m.outputs {
        assert!(tmp.path().join(&o.path).exists(), "{}", o.path);
        assert_eq!(o.config_hash, cfg.hash());
    }
}

#[test]
fn successful_run_writes_manifest_for_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        synth: Some(SynthConfig::small(8)),
        samples: vec![SampleName::E1],
        algorithms: vec![Algorithm::Lin, Algorithm::Log],
        experiment_algorithms: vec![Algorithm::Log],
        repeats: 2,
        post_stepwise_features: 3,
        post_stepwise_repeats: 1,
        entity_stepwise_features: 2,
        ..RunConfig::default()
    };
    let (report, manifest) = run_pipeline(&cfg, tmp.path()).unwrap();
    assert!(!tmp.path().join("FAILED").exists());
    assert_eq!(manifest.failed_stage, None);
    assert_eq!(report.samples.len(), 1);
    for rel in ["report.json", "earlywarn/e1/predictions.csv", "fakenews/p1/final.json", "thresholds/e1.json"] {
        assert!(manifest.outputs.iter().any(|o| o.path == rel), "{rel}");
    }
    let stored: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(stored["config_hash"], cfg.hash());
}
