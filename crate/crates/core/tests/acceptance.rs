//! Acceptance criteria. Each test writes one PASS/FAIL line to stderr
//! (bypassing output capture) and asserts the criterion.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use fakewatch_core::classifiers::{fit, knn_neighbours, logistic_objective, mlp_objective, MlpShape};
use fakewatch_core::corpus::{posts_for_entities, PostSampleName, SampleName};
use fakewatch_core::earlywarning::build_entity_dataset;
use fakewatch_core::eval::{confusion_metrics, roc_auc};
use fakewatch_core::fakenews::{build_post_dataset, run_experiment, ExperimentMode};
use fakewatch_core::features::temporal_lag_histogram;
use fakewatch_core::linalg::Matrix;
use fakewatch_core::pipeline::{analyse_sample, early_warning, fixture_thresholds, rerun, run_pipeline, RunConfig, ThresholdsConfig};
use fakewatch_core::synth::{generate, SynthConfig};
use fakewatch_core::thresholds::{ExceedanceCurve, Ratio};
use fakewatch_core::{Algorithm, Dataset, ModelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id}: {verdict} {detail}");
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

#[test]
fn criterion_1_fixture_thresholds() {
    let expected = [("fig2a.csv", 1.1, 0.1), ("fig2b.csv", 0.98, 0.1), ("fig3a.csv", 0.27, 0.05), ("fig3b.csv", 0.42, 0.05)];
    let mut pass = true;
    let mut detail = Vec::new();
    for (file, want, tol) in expected {
        let t0 = Instant::now();
        let res = fixture_thresholds(&fixtures(), &ThresholdsConfig::default()).unwrap();
        let elapsed = t0.elapsed();
        let r = res.iter().find(|r| r.file == file).unwrap();
        let ok = r.threshold.is_some_and(|t| (t - want).abs() <= tol) && elapsed < Duration::from_secs(1);
        pass &= ok;
        let inflections: Vec<String> = r.inflections.iter().map(|v| format!("{v:.3}")).collect();
        detail.push(format!(
            "{file}: got {} want {want}±{tol}, inflections [{}]",
            r.threshold.map(|t| format!("{t:.3}")).unwrap_or_else(|| "none".into()),
            inflections.join(", ")
        ));
    }
    report(1, pass, &detail.join("; "));
    assert!(pass, "{}", detail.join("\n"));
}

#[test]
fn criterion_2_curve_shape() {
    let e1 = ExceedanceCurve::from_csv(&fixtures().join("fig2a.csv")).unwrap();
    let e2 = ExceedanceCurve::from_csv(&fixtures().join("fig2b.csv")).unwrap();
    let de1 = e1.value_at(Ratio::DisputedOverEntities, 0.0).unwrap();
    let de2 = e2.value_at(Ratio::DisputedOverEntities, 0.0).unwrap();
    let tail_min = e1
        .grid
        .iter()
        .zip(&e1.ratio_de)
        .filter(|(d, _)| **d >= 1.9 - 1e-9)
        .filter_map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    let pass = (de1 - 0.192).abs() <= 0.01 && (de2 - 0.605).abs() <= 0.01 && tail_min >= 0.95;
    report(2, pass, &format!("E1 D/E(0)={de1:.4}, E2 D/E(0)={de2:.4}, E1 min D/E over δ≥1.9={tail_min:.3}"));
    assert!(pass);
}

fn concordance_auc(labels: &[u8], scores: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / pairs
}

#[test]
fn criterion_3_metric_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut count_mismatch = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=200);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        // Coarse scores so ties are common.
        let levels = rng.gen_range(2..50);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
        let auc = roc_auc(&labels, &scores).unwrap();
        worst = worst.max((auc - concordance_auc(&labels, &scores)).abs());

        let predicted: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let m = confusion_metrics(&labels, &predicted, 1).unwrap();
        let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
        for (&l, &p) in labels.iter().zip(&predicted) {
            match (l, p) {
                (1, 1) => tp += 1,
                (0, 0) => tn += 1,
                (0, 1) => fp += 1,
                _ => fn_ += 1,
            }
        }
        if (m.tp, m.tn, m.fp, m.fn_) != (tp, tn, fp, fn_) {
            count_mismatch += 1;
        }
    }
    let pass = worst <= 1e-9 && count_mismatch == 0;
    report(3, pass, &format!("max |auc - oracle| = {worst:.2e}, confusion mismatches = {count_mismatch}"));
    assert!(pass);
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect())
}

fn relative_gradient_error(f: impl Fn(&[f64]) -> (f64, Vec<f64>), theta: &[f64]) -> f64 {
    let (_, g) = f(theta);
    let h = 1e-6;
    let mut diff = 0.0;
    let mut norm = 0.0;
    for i in 0..theta.len() {
        let mut up = theta.to_vec();
        let mut dn = theta.to_vec();
        up[i] += h;
        dn[i] -= h;
        let fd = (f(&up).0 - f(&dn).0) / (2.0 * h);
        diff += (g[i] - fd).powi(2);
        norm += fd.powi(2);
    }
    diff.sqrt() / norm.sqrt().max(1e-12)
}

#[test]
fn criterion_4_classifier_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    let mut knn_bad = 0;
    for _ in 0..100 {
        let n = rng.gen_range(5..60);
        let d = rng.gen_range(1..6);
        let train = random_matrix(&mut rng, n, d);
        let query: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let k = rng.gen_range(1..=n);
        let mut all: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let dist: f64 = train.row(i).iter().zip(&query).map(|(a, b)| (a - b).powi(2)).sum();
                (dist, i)
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut want: Vec<usize> = all[..k].iter().map(|p| p.1).collect();
        let mut got = knn_neighbours(&train, &query, k);
        want.sort_unstable();
        got.sort_unstable();
        if want != got {
            knn_bad += 1;
        }
    }

    let mut grad_worst = 0.0f64;
    for _ in 0..10 {
        let (n, d) = (rng.gen_range(10..40), rng.gen_range(1..5));
        let x = random_matrix(&mut rng, n, d);
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let theta: Vec<f64> = (0..=d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        grad_worst = grad_worst.max(relative_gradient_error(|t| logistic_objective(&x, &y, t, 0.7), &theta));
        let shape = MlpShape { inputs: d, hidden: rng.gen_range(2..6) };
        let theta: Vec<f64> = (0..shape.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        grad_worst = grad_worst.max(relative_gradient_error(|t| mlp_objective(&shape, &x, &y, t, 0.3), &theta));
    }

    let mut dt_worst = 1.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..=64);
        let d = rng.gen_range(1..4);
        // Small integer grid so duplicates occur; labels are a function of the row.
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(0..4) as f64).collect()).collect();
        let salt: u64 = rng.gen();
        let y: Vec<u8> = rows
            .iter()
            .map(|r| {
                let h = r.iter().fold(salt, |a, &v| a.wrapping_mul(31).wrapping_add(v as u64 + 1));
                (h.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 63) as u8
            })
            .collect();
        if y.iter().all(|&v| v == y[0]) {
            continue;
        }
        let data = Dataset::new(Matrix::from_rows(&rows), y.clone(), (0..d).map(|i| format!("x{i}")).collect()).unwrap();
        let spec = ModelSpec::new(Algorithm::Dt).with("max_depth", 64.0).unwrap().with("min_leaf", 1.0).unwrap();
        let model = fit(&spec, &data).unwrap();
        let pred = model.predict(&data.x).unwrap();
        let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / n as f64;
        dt_worst = dt_worst.min(acc);
    }

    let pass = knn_bad == 0 && grad_worst <= 1e-4 && dt_worst == 1.0;
    report(
        4,
        pass,
        &format!("knn mismatches {knn_bad}/100, worst gradient rel. error {grad_worst:.2e}, worst DT training accuracy {dt_worst}"),
    );
    assert!(pass);
}

#[test]
fn criterion_5_early_warning_default_synth() {
    let t0 = Instant::now();
    let outcome = single_threaded(|| {
        let cfg = RunConfig::default();
        let (corpus, truth) = generate(cfg.synth.as_ref().unwrap()).unwrap();
        let corpus = corpus.into_corpus().unwrap();
        let analysis = analyse_sample(&corpus, SampleName::E1, &cfg).unwrap();
        early_warning(&analysis, &cfg, Some(&truth)).unwrap()
    });
    let elapsed = t0.elapsed();
    let auc_of = |a: Algorithm| {
        outcome
            .benchmark
            .iter()
            .find(|e| e.algorithm == a)
            .and_then(|e| e.report.as_ref())
            .and_then(|r| r.auc)
            .unwrap_or(0.0)
    };
    let (a, b) = outcome.best;
    let (auc_a, auc_b) = (auc_of(a), auc_of(b));
    let pass = auc_a >= 0.75 && auc_b >= 0.75 && elapsed < Duration::from_secs(300);
    report(
        5,
        pass,
        &format!(
            "best {a} auc {auc_a:.3}, {b} auc {auc_b:.3}; against planted labels {:?}; {:.1}s single-threaded",
            outcome.prediction_auc_truth.map(|(x, y)| (format!("{x:.3}"), format!("{y:.3}"))),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_fake_news_experiment_b() {
    let cfg = RunConfig {
        algorithms: vec![Algorithm::Lin, Algorithm::Log, Algorithm::Svm, Algorithm::Knn, Algorithm::Dt],
        ..RunConfig::default()
    };
    let (corpus, truth) = generate(cfg.synth.as_ref().unwrap()).unwrap();
    let corpus = corpus.into_corpus().unwrap();
    let log = [cfg.spec(Algorithm::Log).unwrap()];
    let mut pass = true;
    let mut detail = Vec::new();
    for name in [SampleName::E1, SampleName::E2] {
        let analysis = analyse_sample(&corpus, name, &cfg).unwrap();
        let ew = early_warning(&analysis, &cfg, Some(&truth)).unwrap();
        let posts = posts_for_entities(&corpus, &analysis.sample);
        let ds = build_post_dataset(&corpus, &posts, &analysis.sample, &analysis.features, &ew.predictions).unwrap();
        let steps = run_experiment(&ds, ExperimentMode::B, &log, &cfg.protocol());
        let first = steps.first().unwrap();
        let last = steps.last().unwrap();
        let st = first.auc[&Algorithm::Log].unwrap();
        let fin = last.auc[&Algorithm::Log].unwrap();
        let acc = last.accuracy[&Algorithm::Log].unwrap();
        pass &= fin > st && acc >= 0.85;
        detail.push(format!("{}: ST auc {st:.3} -> {} auc {fin:.3}, accuracy {acc:.3}", ds.sample, last.step));
    }
    report(6, pass, &detail.join("; "));
    assert!(pass);
}

fn small_config() -> RunConfig {
    RunConfig {
        synth: Some(SynthConfig::small(11)),
        algorithms: vec![Algorithm::Lin, Algorithm::Log, Algorithm::Knn, Algorithm::Dt],
        experiment_algorithms: vec![Algorithm::Log, Algorithm::Dt],
        repeats: 3,
        post_stepwise_features: 4,
        post_stepwise_repeats: 2,
        entity_stepwise_features: 3,
        plots: true,
        ..RunConfig::default()
    }
}

#[test]
fn criterion_7_feature_widths() {
    let cfg = small_config();
    let (corpus, truth) = generate(cfg.synth.as_ref().unwrap()).unwrap();
    let corpus = corpus.into_corpus().unwrap();
    let mut widths = Vec::new();
    for name in [SampleName::E1, SampleName::E2] {
        let analysis = analyse_sample(&corpus, name, &cfg).unwrap();
        let ds = build_entity_dataset(&analysis.features, name).unwrap();
        widths.push((name.to_string(), ds.data.x.cols()));
        let ew = early_warning(&analysis, &cfg, Some(&truth)).unwrap();
        let posts = posts_for_entities(&corpus, &analysis.sample);
        let pds = build_post_dataset(&corpus, &posts, &analysis.sample, &analysis.features, &ew.predictions).unwrap();
        widths.push((pds.sample.to_string(), pds.data.x.cols()));
        assert_eq!(pds.sample, if name == SampleName::E1 { PostSampleName::P1 } else { PostSampleName::P2 });
    }
    let want = [("E1", 8), ("P1", 44), ("E2", 20), ("P2", 52)];
    let pass = widths.iter().zip(want).all(|((n, w), (wn, ww))| n == wn && *w == ww);
    report(7, pass, &format!("{widths:?}"));
    assert!(pass);
}

fn output_files(dir: &Path, rels: &[String]) -> Vec<(String, Vec<u8>)> {
    rels.iter().map(|r| (r.clone(), fs::read(dir.join(r)).unwrap())).collect()
}

#[test]
fn criterion_8_manifest_rerun_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let (report_a, manifest_a) = run_pipeline(&small_config(), &a).unwrap();
    let (report_b, manifest_b) = rerun(&a.join("manifest.json"), &b).unwrap();
    let rels: Vec<String> = manifest_a.outputs.iter().map(|o| o.path.clone()).collect();
    let same_files = output_files(&a, &rels) == output_files(&b, &rels);
    let pass = report_a == report_b && manifest_a == manifest_b && same_files;
    report(8, pass, &format!("{} outputs compared byte for byte, reports equal: {}", rels.len(), report_a == report_b));
    assert!(pass);
}

#[test]
fn criterion_9_temporal_lag_within_24h() {
    let cfg = SynthConfig::default();
    let (corpus, truth) = generate(&cfg).unwrap();
    let corpus = corpus.into_corpus().unwrap();
    let sample = fakewatch_core::EntitySample::standard(&corpus, SampleName::E1);
    let hist = temporal_lag_histogram(&corpus, &sample, &truth.disputed, 1.0);
    let planted_max = truth.lags_hours.values().copied().fold(0.0, f64::max);
    let mass = hist.mass_within(24.0);
    let pass = planted_max <= 24.0 && mass == 1.0 && hist.lags_hours.len() == truth.disputed.len();
    report(
        9,
        pass,
        &format!("{} lags measured, max planted {planted_max:.2} h, mass within 24 h {:.1}%", hist.lags_hours.len(), 100.0 * mass),
    );
    assert!(pass);
}

