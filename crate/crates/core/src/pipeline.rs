//! End-to-end orchestration: ingest, features, thresholds, early warning,
//! fake-news experiments and reports, with a manifest for exact reruns.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::{Algorithm, ModelSpec};
use crate::corpus::{load_corpus, posts_for_entities, Corpus, CorpusCounts, CorpusPaths, EntitySample, PostSampleName, SampleName};
use crate::earlywarning::{
    build_entity_dataset, fit_final, predict_disputed, run_benchmark, select_best_models, write_predictions_csv,
    BenchmarkEntry, EntityDataset, EntityPrediction,
};
use crate::error::{Error, Result};
use crate::eval::{forward_stepwise, roc_auc, Protocol, StepwiseStep};
use crate::fakenews::{
    build_post_dataset, experiment_steps, final_report, run_experiment, step_name, write_post_features_csv,
    write_stepwise_csv, write_steps_csv, ExperimentMode, FinalReport, StepResult,
};
use crate::features::{
    attention_curve, entity_features, response_distribution, temporal_lag_histogram, write_features_csv,
    ControversyClass, DisputeClass, EntityFeatures,
};
use crate::svg;
use crate::synth::{generate, GroundTruth, SynthConfig};
use crate::thresholds::{
    distance_grid, exceedance_curve, find_threshold, ExceedanceCurve, Measure, MAX_DEGREE, MIN_DEGREE, Ratio, SelectionPolicy, ThresholdConfig,
    ThresholdDetail, ThresholdResult,
};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdsConfig {
    pub presentation: ThresholdConfig,
    pub response: ThresholdConfig,
    pub engagement: ThresholdConfig,
}

impl Default for ThresholdsConfig {
    fn default() -> Self {
        ThresholdsConfig {
            presentation: ThresholdConfig {
                policy: SelectionPolicy::SecondConcavityChange,
                ..ThresholdConfig::default()
            },
            response: ThresholdConfig::default(),
            engagement: ThresholdConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Existing corpus directory; ignored when `synth` is set.
    pub corpus_dir: Option<PathBuf>,
    pub synth: Option<SynthConfig>,
    pub samples: Vec<SampleName>,
    pub thresholds: ThresholdsConfig,
    pub algorithms: Vec<Algorithm>,
    pub hyperparameters: BTreeMap<Algorithm, BTreeMap<String, f64>>,
    pub repeats: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub entity_stepwise_features: usize,
    pub experiment_algorithms: Vec<Algorithm>,
    pub experiments: Vec<ExperimentMode>,
    pub post_stepwise_algorithm: Algorithm,
    pub post_stepwise_features: usize,
    pub post_stepwise_repeats: usize,
    pub histogram_bins: usize,
    pub lag_bin_hours: f64,
    pub plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus_dir: None,
            synth: Some(SynthConfig::default()),
            samples: vec![SampleName::E1, SampleName::E2],
            thresholds: ThresholdsConfig::default(),
            algorithms: Algorithm::ALL.to_vec(),
            hyperparameters: BTreeMap::new(),
            repeats: 10,
            train_fraction: 0.6,
            seed: 7,
            entity_stepwise_features: 8,
            experiment_algorithms: Algorithm::ALL.to_vec(),
            experiments: vec![ExperimentMode::A, ExperimentMode::B],
            post_stepwise_algorithm: Algorithm::Log,
            post_stepwise_features: 16,
            post_stepwise_repeats: 3,
            histogram_bins: 20,
            lag_bin_hours: 1.0,
            plots: false,
        }
    }
}

impl RunConfig {
    pub fn protocol(&self) -> Protocol {
        Protocol {
            repeats: self.repeats,
            train_fraction: self.train_fraction,
            seed: self.seed,
        }
    }

    pub fn spec(&self, a: Algorithm) -> Result<ModelSpec> {
        let mut s = ModelSpec::new(a).seed(self.seed);
        if let Some(hp) = self.hyperparameters.get(&a) {
            for (k, v) in hp {
                s = s.with(k, *v)?;
            }
        }
        Ok(s)
    }

    pub fn specs(&self, algos: &[Algorithm]) -> Result<Vec<ModelSpec>> {
        algos.iter().map(|&a| self.spec(a)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.synth.is_none() && self.corpus_dir.is_none() {
            return Err(Error::Config("set either `synth` or `corpus_dir`".into()));
        }
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be ≥ 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        if self.algorithms.len() < 2 {
            return Err(Error::Config("at least two algorithms are needed".into()));
        }
        if self.histogram_bins == 0 || self.lag_bin_hours <= 0.0 {
            return Err(Error::Config("histogram bins and lag bin width must be positive".into()));
        }
        self.specs(&self.algorithms)?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    pub outputs: Vec<ManifestEntry>,
    pub failed_stage: Option<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::Config(format!("manifest version {} not supported", m.version)));
        }
        if m.config.hash() != m.config_hash {
            return Err(Error::Config("manifest config hash does not match its config".into()));
        }
        Ok(m)
    }
}

/// Output directory that records every file it writes.
pub struct Outputs {
    root: PathBuf,
    hash: String,
    seed: u64,
    entries: Vec<ManifestEntry>,
}

impl Outputs {
    pub fn new(root: &Path, cfg: &RunConfig) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Outputs {
            root: root.to_path_buf(),
            hash: cfg.hash(),
            seed: cfg.seed,
            entries: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Creates parent directories, runs `write` on the full path and
    /// records the file.
    pub fn file(&mut self, rel: &str, stage: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        write(&path)?;
        self.entries.push(ManifestEntry {
            path: rel.to_string(),
            stage: stage.to_string(),
            config_hash: self.hash.clone(),
            seed: self.seed,
        });
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, rel: &str, stage: &str, value: &T) -> Result<PathBuf> {
        self.file(rel, stage, |p| {
            let text = serde_json::to_string_pretty(value)?;
            fs::write(p, text + "\n").map_err(|e| Error::io(p, e))
        })
    }

    pub fn text(&mut self, rel: &str, stage: &str, body: &str) -> Result<PathBuf> {
        self.file(rel, stage, |p| fs::write(p, body).map_err(|e| Error::io(p, e)))
    }

    pub fn finish(self, cfg: &RunConfig, failed_stage: Option<String>) -> Result<Manifest> {
        self.finish_as(cfg, failed_stage, "manifest.json")
    }

    /// Writes the manifest under a custom file name in the output root.
    pub fn finish_as(self, cfg: &RunConfig, failed_stage: Option<String>, name: &str) -> Result<Manifest> {
        let m = Manifest {
            version: MANIFEST_VERSION,
            config_hash: self.hash,
            seed: self.seed,
            config: cfg.clone(),
            outputs: self.entries,
            failed_stage,
        };
        let path = self.root.join(name);
        fs::write(&path, serde_json::to_string_pretty(&m)? + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(m)
    }
}

/// Loads the configured corpus, generating it first for synthetic runs.
pub fn obtain_corpus(cfg: &RunConfig, out: Option<&mut Outputs>) -> Result<(Corpus, Option<GroundTruth>)> {
    if let Some(sc) = &cfg.synth {
        let (corpus, truth) = generate(sc)?;
        if let Some(out) = out {
            let dir = out.root().join("corpus");
            corpus.write(&dir, &truth)?;
            for f in ["sources.jsonl", "posts.jsonl", "comments.jsonl", "mentions.jsonl", "truth.json"] {
                out.file(&format!("corpus/{f}"), "synth", |_| Ok(()))?;
            }
        }
        return Ok((corpus.into_corpus()?, Some(truth)));
    }
    let dir = cfg.corpus_dir.as_ref().expect("validated");
    Ok((load_corpus(&CorpusPaths::in_dir(dir))?, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureCurve {
    pub measure: Measure,
    pub curve: ExceedanceCurve,
}

/// Entity sample with thresholds and thresholded features.
#[derive(Debug, Clone)]
pub struct SampleAnalysis {
    pub sample: EntitySample,
    pub features: Vec<EntityFeatures>,
    pub thresholds: ThresholdResult,
    pub curves: Vec<MeasureCurve>,
}

fn measure_values(fs: &[EntityFeatures], m: Measure) -> (Vec<f64>, Vec<bool>) {
    fs.iter()
        .filter_map(|f| {
            let v = match m {
                Measure::PresentationDistance => Some(f.presentation_distance),
                Measure::ResponseDistance => f.response_distance.map(|r| r.global),
                Measure::EngagedFraction => Some(f.engaged_fraction),
            }?;
            Some((v, f.disputed))
        })
        .unzip()
}

/// Fits one measure. When no policy applies, the median measure value is
/// substituted and the detail is marked.
fn threshold_for(values: &[f64], disputed: &[bool], m: Measure, cfg: &ThresholdConfig) -> Result<(ExceedanceCurve, ThresholdDetail)> {
    let curve = exceedance_curve(values, disputed, &m.grid())?;
    match find_threshold(&curve, m, cfg) {
        Ok(d) => Ok((curve, d)),
        Err(e @ Error::Selection { .. }) => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            let median = sorted[sorted.len() / 2];
            log::warn!("{m:?}: {e}; substituting the median {median}");
            let (x, y) = curve.points(cfg.ratio);
            let fit = crate::thresholds::fit_polynomial(&x, &y, cfg.degree)?;
            let inflections = match e {
                Error::Selection { found, .. } => found,
                _ => unreachable!(),
            };
            let detail = ThresholdDetail {
                measure: m,
                fit,
                inflections,
                threshold: median,
                policy_used: cfg.policy,
                substituted: true,
            };
            Ok((curve, detail))
        }
        Err(e) => Err(e),
    }
}

pub fn compute_thresholds(features: &[EntityFeatures], cfg: &ThresholdsConfig) -> Result<(ThresholdResult, Vec<MeasureCurve>)> {
    let mut details = Vec::new();
    let mut curves = Vec::new();
    let mut values = BTreeMap::new();
    for (m, tc) in [
        (Measure::PresentationDistance, &cfg.presentation),
        (Measure::ResponseDistance, &cfg.response),
        (Measure::EngagedFraction, &cfg.engagement),
    ] {
        let (v, d) = measure_values(features, m);
        if v.is_empty() {
            if m == Measure::PresentationDistance {
                return Err(Error::EmptyInput("entities for thresholds"));
            }
            continue;
        }
        let (curve, detail) = threshold_for(&v, &d, m, tc)?;
        values.insert(m as u8, detail.threshold);
        details.push(detail);
        curves.push(MeasureCurve { measure: m, curve });
    }
    let get = |m: Measure| values.get(&(m as u8)).copied();
    Ok((
        ThresholdResult {
            delta_p: get(Measure::PresentationDistance).expect("always computed"),
            delta_r: get(Measure::ResponseDistance),
            rho_e: get(Measure::EngagedFraction),
            details,
        },
        curves,
    ))
}

pub fn analyse_sample(corpus: &Corpus, name: SampleName, cfg: &RunConfig) -> Result<SampleAnalysis> {
    let sample = EntitySample::standard(corpus, name);
    if sample.entities.is_empty() {
        return Err(Error::EmptyInput("entity sample"));
    }
    let mut features = entity_features(corpus, &sample, None);
    let (thresholds, curves) = compute_thresholds(&features, &cfg.thresholds)?;
    for f in &mut features {
        f.apply_thresholds(&thresholds);
    }
    Ok(SampleAnalysis {
        sample,
        features,
        thresholds,
        curves,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagSummary {
    pub measured: usize,
    pub fake_first: usize,
    pub never_fake: usize,
    pub mass_within_24h: f64,
    pub max_lag_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyWarningOutcome {
    pub sample: SampleName,
    pub rows: usize,
    pub disputed: usize,
    pub excluded: usize,
    pub benchmark: Vec<BenchmarkEntry>,
    pub best: (Algorithm, Algorithm),
    /// AUC of each selected model's scores over the whole sample.
    pub prediction_auc: (f64, f64),
    /// Same, against the generator's planted labels.
    pub prediction_auc_truth: Option<(f64, f64)>,
    pub stepwise: Vec<StepwiseStep>,
    #[serde(skip)]
    pub predictions: Vec<EntityPrediction>,
    #[serde(skip)]
    pub dataset: Option<EntityDataset>,
}

pub fn early_warning(analysis: &SampleAnalysis, cfg: &RunConfig, truth: Option<&GroundTruth>) -> Result<EarlyWarningOutcome> {
    let name = analysis.sample.name;
    let ds = build_entity_dataset(&analysis.features, name)?;
    let protocol = cfg.protocol();
    let specs = cfg.specs(&cfg.algorithms)?;
    let benchmark = run_benchmark(&ds.data, &specs, &protocol);
    let best = select_best_models(&benchmark)?;
    let ma = fit_final(&ds.data, &cfg.spec(best.0)?, cfg.seed)?;
    let mb = fit_final(&ds.data, &cfg.spec(best.1)?, cfg.seed)?;
    let predictions = predict_disputed(&ds, &ma, &mb)?;
    let sa: Vec<f64> = predictions.iter().map(|p| p.score_a).collect();
    let sb: Vec<f64> = predictions.iter().map(|p| p.score_b).collect();
    let prediction_auc = (roc_auc(&ds.data.y, &sa)?, roc_auc(&ds.data.y, &sb)?);
    let prediction_auc_truth = match truth {
        Some(t) => {
            let y: Vec<u8> = ds.entities.iter().map(|e| u8::from(t.disputed.contains(e))).collect();
            Some((roc_auc(&y, &sa)?, roc_auc(&y, &sb)?))
        }
        None => None,
    };
    let k = cfg.entity_stepwise_features.min(ds.data.x.cols());
    let stepwise = forward_stepwise(&ds.data, &cfg.spec(cfg.post_stepwise_algorithm)?, k, &protocol)?;
    Ok(EarlyWarningOutcome {
        sample: name,
        rows: ds.data.len(),
        disputed: ds.data.positives(),
        excluded: ds.excluded.len(),
        benchmark,
        best,
        prediction_auc,
        prediction_auc_truth,
        stepwise,
        predictions,
        dataset: Some(ds),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FakeNewsOutcome {
    pub sample: PostSampleName,
    pub posts: usize,
    pub fake: usize,
    pub flagged: usize,
    pub experiments: BTreeMap<String, Vec<StepResult>>,
    pub final_report: FinalReport,
}

pub fn fake_news(
    corpus: &Corpus,
    analysis: &SampleAnalysis,
    ew: &EarlyWarningOutcome,
    cfg: &RunConfig,
    out: Option<(&mut Outputs, &str)>,
) -> Result<FakeNewsOutcome> {
    let posts = posts_for_entities(corpus, &analysis.sample);
    let ds = build_post_dataset(corpus, &posts, &analysis.sample, &analysis.features, &ew.predictions)?;
    let protocol = cfg.protocol();
    let specs = cfg.specs(&cfg.experiment_algorithms)?;
    let mut experiments = BTreeMap::new();
    for &mode in &cfg.experiments {
        experiments.insert(format!("{mode:?}"), run_experiment(&ds, mode, &specs, &protocol));
    }
    let stepwise_protocol = Protocol {
        repeats: cfg.post_stepwise_repeats,
        ..protocol
    };
    let final_report = final_report(
        &ds,
        &cfg.specs(&cfg.algorithms)?,
        &protocol,
        &cfg.spec(cfg.post_stepwise_algorithm)?,
        &stepwise_protocol,
        cfg.post_stepwise_features,
    )?;
    if let Some((out, dir)) = out {
        out.file(&format!("{dir}/features.csv"), "fakenews", |p| write_post_features_csv(p, &ds))?;
        for (mode, steps) in &experiments {
            let tag = mode.to_lowercase();
            out.file(&format!("{dir}/experiment_{tag}.csv"), "fakenews", |p| write_steps_csv(p, steps))?;
            if cfg.plots {
                let cats: Vec<String> = steps.iter().map(|s| s.step.clone()).collect();
                let series: Vec<(&str, Vec<f64>)> = cfg
                    .experiment_algorithms
                    .iter()
                    .map(|a| {
                        let v = steps.iter().map(|s| s.auc.get(a).copied().flatten().unwrap_or(f64::NAN)).collect();
                        (a.name(), v)
                    })
                    .collect();
                let body = svg::bar_chart(&format!("{} experiment {mode}", ds.sample), "AUC", &cats, &series);
                out.text(&format!("{dir}/experiment_{tag}.svg"), "fakenews", &body)?;
            }
        }
        out.json(&format!("{dir}/final.json"), "fakenews", &final_report)?;
        for e in &final_report.benchmark {
            if let Some(r) = &e.report {
                let rel = format!("{dir}/final_{}.csv", e.algorithm.name().to_lowercase());
                out.file(&rel, "fakenews", |p| r.write_table_file(p, ["NotFake", "Fake"]))?;
            }
        }
        out.file(&format!("{dir}/stepwise.csv"), "fakenews", |p| write_stepwise_csv(p, &final_report.stepwise))?;
    }
    Ok(FakeNewsOutcome {
        sample: ds.sample,
        posts: ds.data.len(),
        fake: ds.data.positives(),
        flagged: ds.flagged.len(),
        experiments,
        final_report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub sample: SampleName,
    pub entities: usize,
    pub thresholds: ThresholdResult,
    pub lag: LagSummary,
    pub early_warning: EarlyWarningOutcome,
    pub fake_news: FakeNewsOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config_hash: String,
    pub corpus: CorpusCounts,
    pub samples: Vec<SampleReport>,
}

fn curve_csv(path: &Path, c: &ExceedanceCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["delta", "entities_above", "disputed_above", "ratio_DD", "ratio_DE"])?;
    for i in 0..c.grid.len() {
        w.write_record([
            c.grid[i].to_string(),
            c.entities_above.get(i).map(|v| v.to_string()).unwrap_or_default(),
            c.disputed_above.get(i).map(|v| v.to_string()).unwrap_or_default(),
            c.ratio_dd[i].to_string(),
            c.ratio_de[i].map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes features, curves, thresholds and the insight tables of one sample.
pub fn write_analysis(corpus: &Corpus, a: &SampleAnalysis, cfg: &RunConfig, out: &mut Outputs) -> Result<LagSummary> {
    let tag = a.sample.name.to_string().to_lowercase();
    out.file(&format!("features/{tag}_features.csv"), "features", |p| write_features_csv(p, &a.features))?;
    for mc in &a.curves {
        let m = format!("{:?}", mc.measure).to_lowercase();
        out.file(&format!("thresholds/{tag}_{m}_curve.csv"), "thresholds", |p| curve_csv(p, &mc.curve))?;
        if cfg.plots {
            let detail = a.thresholds.details.iter().find(|d| d.measure == mc.measure);
            let dd: Vec<(f64, f64)> = mc.curve.grid.iter().copied().zip(mc.curve.ratio_dd.iter().copied()).collect();
            let de: Vec<(f64, f64)> = mc
                .curve
                .grid
                .iter()
                .zip(&mc.curve.ratio_de)
                .map(|(&x, y)| (x, y.unwrap_or(f64::NAN)))
                .collect();
            let mut series = vec![("D/D", dd), ("D/E", de)];
            if let Some(d) = detail {
                series.push(("fit", mc.curve.grid.iter().map(|&x| (x, d.fit.eval(x))).collect()));
            }
            let body = svg::line_chart(&format!("{} {m}", a.sample.name), "threshold", "ratio", &series);
            out.text(&format!("thresholds/{tag}_{m}_curve.svg"), "thresholds", &body)?;
        }
    }
    out.json(&format!("thresholds/{tag}.json"), "thresholds", &a.thresholds)?;

    let grid = distance_grid();
    let att = attention_curve(&a.features, corpus, &a.sample, &grid);
    out.file(&format!("features/{tag}_attention.csv"), "features", |p| {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(["delta", "mean_likes", "mean_comments", "posts"])?;
        for pt in &att {
            w.write_record([pt.delta.to_string(), pt.mean_likes.to_string(), pt.mean_comments.to_string(), pt.posts.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(p, e))
    })?;
    out.file(&format!("features/{tag}_response_distribution.csv"), "features", |p| {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(["class", "bin_lo", "bin_hi", "count", "density"])?;
        for (cc, cn) in [(ControversyClass::Controversial, "C"), (ControversyClass::Uncontroversial, "UC")] {
            for (dc, dn) in [(DisputeClass::Disputed, "D"), (DisputeClass::Undisputed, "UD")] {
                let h = response_distribution(&a.features, cc, dc, cfg.histogram_bins);
                let bw = h.bin_width();
                for (i, (&c, &d)) in h.counts.iter().zip(&h.density).enumerate() {
                    w.write_record([
                        format!("{cn}-{dn}"),
                        (h.lo + i as f64 * bw).to_string(),
                        (h.lo + (i + 1) as f64 * bw).to_string(),
                        c.to_string(),
                        d.to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(p, e))
    })?;
    let lag = temporal_lag_histogram(corpus, &a.sample, &a.sample.entities, cfg.lag_bin_hours);
    out.file(&format!("features/{tag}_temporal_lag.csv"), "features", |p| {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(["bin_start_hours", "bin_end_hours", "count"])?;
        for (i, c) in lag.counts.iter().enumerate() {
            let lo = i as f64 * lag.bin_hours;
            w.write_record([lo.to_string(), (lo + lag.bin_hours).to_string(), c.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(p, e))
    })?;
    Ok(LagSummary {
        measured: lag.lags_hours.len(),
        fake_first: lag.fake_first,
        never_fake: lag.never_fake,
        mass_within_24h: lag.mass_within(24.0),
        max_lag_hours: lag.lags_hours.iter().copied().fold(0.0, f64::max),
    })
}

/// Writes the report, per-algorithm tables, predictions and stepwise
/// ranking under `dir`.
pub fn write_early_warning(ew: &EarlyWarningOutcome, out: &mut Outputs, dir: &str) -> Result<()> {
    out.json(&format!("{dir}/report.json"), "earlywarn", ew)?;
    for e in &ew.benchmark {
        if let Some(r) = &e.report {
            let rel = format!("{dir}/table_{}.csv", e.algorithm.name().to_lowercase());
            out.file(&rel, "earlywarn", |p| r.write_table_file(p, ["Undisputed", "Disputed"]))?;
        }
    }
    out.file(&format!("{dir}/predictions.csv"), "earlywarn", |p| write_predictions_csv(p, &ew.predictions))?;
    out.file(&format!("{dir}/stepwise.csv"), "earlywarn", |p| write_stepwise_csv(p, &ew.stepwise))?;
    Ok(())
}

fn run_stages(cfg: &RunConfig, out: &mut Outputs, stage: &mut String) -> Result<PipelineReport> {
    *stage = "ingest".into();
    let (corpus, truth) = obtain_corpus(cfg, Some(out))?;
    let counts = corpus.counts();
    out.json("ingest/summary.json", "ingest", &counts)?;
    let mut samples = Vec::new();
    for &name in &cfg.samples {
        *stage = format!("features/thresholds {name}");
        let analysis = analyse_sample(&corpus, name, cfg)?;
        let lag = write_analysis(&corpus, &analysis, cfg, out)?;
        *stage = format!("earlywarn {name}");
        let ew = early_warning(&analysis, cfg, truth.as_ref())?;
        write_early_warning(&ew, out, &format!("earlywarn/{}", name.to_string().to_lowercase()))?;
        *stage = format!("fakenews {}", name.post_sample());
        let dir = format!("fakenews/{}", name.post_sample().to_string().to_lowercase());
        let fk = fake_news(&corpus, &analysis, &ew, cfg, Some((out, &dir)))?;
        samples.push(SampleReport {
            sample: name,
            entities: analysis.sample.entities.len(),
            thresholds: analysis.thresholds,
            lag,
            early_warning: ew,
            fake_news: fk,
        });
    }
    *stage = "report".into();
    let report = PipelineReport {
        config_hash: cfg.hash(),
        corpus: counts,
        samples,
    };
    out.json("report.json", "report", &report)?;
    out.text("report.txt", "report", &render_report(&report))?;
    Ok(report)
}

/// Runs every stage into `out_dir`. On failure a `FAILED` marker and the
/// partial manifest are left behind.
pub fn run_pipeline(cfg: &RunConfig, out_dir: &Path) -> Result<(PipelineReport, Manifest)> {
    cfg.validate()?;
    let mut out = Outputs::new(out_dir, cfg)?;
    let mut stage = String::new();
    match run_stages(cfg, &mut out, &mut stage) {
        Ok(report) => {
            let _ = fs::remove_file(out_dir.join("FAILED"));
            let manifest = out.finish(cfg, None)?;
            Ok((report, manifest))
        }
        Err(e) => {
            let marker = out_dir.join("FAILED");
            let _ = fs::write(&marker, format!("stage: {stage}\nerror: {e}\n"));
            let _ = out.finish(cfg, Some(stage));
            Err(e)
        }
    }
}

pub fn rerun(manifest: &Path, out_dir: &Path) -> Result<(PipelineReport, Manifest)> {
    let m = Manifest::load(manifest)?;
    run_pipeline(&m.config, out_dir)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())
}

/// Plain-text summary of a pipeline report.
pub fn render_report(r: &PipelineReport) -> String {
    let mut s = String::new();
    s.push_str(&format!("config {}\n", &r.config_hash[..12]));
    s.push_str(&format!(
        "corpus: official {} posts / fake {} posts, {} users\n",
        r.corpus.official.posts, r.corpus.fake.posts, r.corpus.users
    ));
    for sr in &r.samples {
        let t = &sr.thresholds;
        s.push_str(&format!(
            "\n[{}] {} entities; delta_p {:.3}, delta_r {}, rho_e {}\n",
            sr.sample,
            sr.entities,
            t.delta_p,
            fmt_opt(t.delta_r),
            fmt_opt(t.rho_e)
        ));
        let ew = &sr.early_warning;
        s.push_str(&format!("  early warning ({} rows, {} disputed)\n", ew.rows, ew.disputed));
        for e in &ew.benchmark {
            match &e.report {
                Some(rep) => s.push_str(&format!(
                    "    {:<4} auc {} acc {:.3}\n",
                    e.algorithm.name(),
                    fmt_opt(rep.auc),
                    rep.accuracy
                )),
                None => s.push_str(&format!("    {:<4} failed: {}\n", e.algorithm.name(), e.error.as_deref().unwrap_or(""))),
            }
        }
        s.push_str(&format!(
            "    best {} / {}: whole-sample auc {:.3} / {:.3}\n",
            ew.best.0, ew.best.1, ew.prediction_auc.0, ew.prediction_auc.1
        ));
        s.push_str(&format!(
            "  temporal lag: {} measured, {:.1}% within 24 h\n",
            sr.lag.measured,
            100.0 * sr.lag.mass_within_24h
        ));
        let fk = &sr.fake_news;
        s.push_str(&format!("  fake news {} ({} posts, {} fake)\n", fk.sample, fk.posts, fk.fake));
        for (mode, steps) in &fk.experiments {
            s.push_str(&format!("    experiment {mode}\n"));
            for st in steps {
                let cells: Vec<String> = st.auc.iter().map(|(a, v)| format!("{}={}", a.name(), fmt_opt(*v))).collect();
                s.push_str(&format!("      {:<14} {}\n", st.step, cells.join(" ")));
            }
        }
        for e in &fk.final_report.benchmark {
            if let Some(rep) = &e.report {
                s.push_str(&format!(
                    "    final {:<4} auc {} acc {:.3}\n",
                    e.algorithm.name(),
                    fmt_opt(rep.auc),
                    rep.accuracy
                ));
            }
        }
        let top: Vec<&str> = fk.final_report.stepwise.iter().take(5).map(|s| s.name.as_str()).collect();
        s.push_str(&format!("    top features: {}\n", top.join(", ")));
    }
    s
}

/// Fixture file, measure and ratio used by [`fixture_thresholds`].
pub const FIXTURES: [(&str, Measure); 4] = [
    ("fig2a.csv", Measure::PresentationDistance),
    ("fig2b.csv", Measure::PresentationDistance),
    ("fig3a.csv", Measure::ResponseDistance),
    ("fig3b.csv", Measure::EngagedFraction),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureThreshold {
    pub file: String,
    pub measure: Measure,
    pub degree: usize,
    pub threshold: Option<f64>,
    pub inflections: Vec<f64>,
    pub rmse: f64,
    pub error: Option<String>,
}

/// Runs the threshold procedure on the curve fixtures in `dir`.
pub fn fixture_thresholds(dir: &Path, cfg: &ThresholdsConfig) -> Result<Vec<FixtureThreshold>> {
    FIXTURES
        .iter()
        .map(|&(file, measure)| {
            let path = dir.join(file);
            if !path.exists() {
                return Err(Error::Config(format!("missing fixture file {}", path.display())));
            }
            let curve = ExceedanceCurve::from_csv(&path)?;
            let tc = match measure {
                Measure::PresentationDistance => &cfg.presentation,
                Measure::ResponseDistance => &cfg.response,
                Measure::EngagedFraction => &cfg.engagement,
            };
            if !(MIN_DEGREE..=MAX_DEGREE).contains(&tc.degree) {
                return Err(Error::Config(format!("degree {} outside {MIN_DEGREE}..={MAX_DEGREE}", tc.degree)));
            }
            let (x, y) = curve.points(tc.ratio);
            let fit = crate::thresholds::fit_polynomial(&x, &y, tc.degree)?;
            let inflections = crate::thresholds::inflection_points(&fit, fit.lo, fit.hi);
            let (threshold, error) = match find_threshold(&curve, measure, tc) {
                Ok(d) => (Some(d.threshold), None),
                Err(e) => (None, Some(e.to_string())),
            };
            Ok(FixtureThreshold {
                file: file.to_string(),
                measure,
                degree: tc.degree,
                threshold,
                inflections,
                rmse: fit.rmse,
                error,
            })
        })
        .collect()
}

/// Reruns selection for one fixture to recover its typed error.
pub fn fixture_error(dir: &Path, r: &FixtureThreshold, cfg: &ThresholdsConfig) -> Option<Error> {
    let tc = match r.measure {
        Measure::PresentationDistance => &cfg.presentation,
        Measure::ResponseDistance => &cfg.response,
        Measure::EngagedFraction => &cfg.engagement,
    };
    match ExceedanceCurve::from_csv(&dir.join(&r.file)) {
        Ok(curve) => find_threshold(&curve, r.measure, tc).err(),
        Err(e) => Some(e),
    }
}

/// Default ratio used when fitting.
pub fn default_ratio() -> Ratio {
    ThresholdConfig::default().ratio
}

/// Names of the experiment steps for a mode, for report headers.
pub fn step_names(mode: ExperimentMode) -> Vec<String> {
    experiment_steps(mode).iter().map(|g| step_name(g)).collect()
}
