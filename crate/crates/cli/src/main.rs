use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fakewatch_core::corpus::{load_corpus, posts_for_entities, CorpusPaths, PostSampleName};
use fakewatch_core::earlywarning::write_predictions_csv;
use fakewatch_core::error::ErrorKind;
use fakewatch_core::fakenews::ExperimentMode;
use fakewatch_core::pipeline::{
    analyse_sample, early_warning, fake_news, fixture_error, fixture_thresholds, render_report, rerun, run_pipeline, write_analysis,
    write_early_warning, Outputs, PipelineReport, RunConfig,
};
use fakewatch_core::synth::{generate, SynthConfig};
use fakewatch_core::{Algorithm, Corpus, Error, Result, SampleName};

#[derive(Parser)]
#[command(name = "fakewatch", version, about = "Polarization-based early warning and fake-news classification")]
struct Cli {
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted ground truth.
    Synth {
        /// JSON synth config; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a corpus directory and print its summary.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute entity features (thresholded) for one sample.
    Features {
        #[command(flatten)]
        input: SampleInput,
        /// Output directory for feature, curve and insight tables.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plots: bool,
    },
    /// Fit threshold curves on a corpus sample or on fixture files.
    Thresholds {
        #[arg(long, conflicts_with_all = ["corpus", "sample"])]
        fixtures: Option<PathBuf>,
        #[arg(long, required_unless_present = "fixtures")]
        corpus: Option<PathBuf>,
        #[arg(long, required_unless_present = "fixtures")]
        sample: Option<SampleName>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Polynomial degree for every measure.
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Benchmark classifiers on an entity sample and predict disputed entities.
    Earlywarn {
        #[command(flatten)]
        input: SampleInput,
        #[command(flatten)]
        model: ModelArgs,
        /// Report JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Predictions CSV; defaults next to the report.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Post-level fake-news experiments.
    Fakenews {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        sample: PostSampleName,
        #[arg(long, default_value = "b")]
        experiment: ExperimentMode,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plots: bool,
    },
    /// Render a run's report as text.
    Report {
        /// Run directory or report.json path.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline from a run config or a previous manifest.
    Run {
        #[arg(long, conflicts_with = "manifest")]
        config: Option<PathBuf>,
        /// Rerun exactly what a manifest describes.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plots: bool,
    },
}

#[derive(Args)]
struct SampleInput {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    sample: SampleName,
    /// JSON run config for thresholds and protocol settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Default)]
struct ModelArgs {
    /// Algorithms to run (repeatable or comma separated).
    #[arg(long, value_delimiter = ',')]
    algo: Vec<Algorithm>,
    /// Hyperparameter override, `key=value` or `ALGO.key=value`.
    #[arg(long)]
    hp: Vec<String>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn run_config(path: Option<&Path>) -> Result<RunConfig> {
    path.map(read_json).transpose().map(Option::unwrap_or_default)
}

fn corpus_config(path: Option<&Path>, corpus: &Path) -> Result<RunConfig> {
    let mut cfg = run_config(path)?;
    cfg.synth = None;
    cfg.corpus_dir = Some(corpus.to_path_buf());
    Ok(cfg)
}

impl ModelArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if !self.algo.is_empty() {
            cfg.algorithms = self.algo.clone();
            cfg.experiment_algorithms = self.algo.clone();
        }
        if let Some(r) = self.repeats {
            cfg.repeats = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        for kv in &self.hp {
            let (lhs, value) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--hp expects key=value, got `{kv}`")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("--hp {kv}: value is not a number")))?;
            let (targets, key) = match lhs.split_once('.') {
                Some((a, k)) => (vec![a.parse::<Algorithm>()?], k.trim()),
                None => {
                    let key = lhs.trim();
                    let t: Vec<Algorithm> = cfg
                        .algorithms
                        .iter()
                        .copied()
                        .filter(|a| a.defaults().iter().any(|(k, _)| *k == key))
                        .collect();
                    if t.is_empty() {
                        return Err(Error::Config(format!("no selected algorithm has hyperparameter `{key}`")));
                    }
                    (t, key)
                }
            };
            for a in targets {
                cfg.hyperparameters.entry(a).or_default().insert(key.to_string(), value);
            }
        }
        cfg.validate()
    }
}

fn load(cfg: &RunConfig) -> Result<Corpus> {
    let dir = cfg.corpus_dir.as_ref().expect("corpus config");
    load_corpus(&CorpusPaths::in_dir(dir))
}

fn split_out(path: &Path) -> (PathBuf, String) {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    (dir.to_path_buf(), name)
}

fn stem(name: &str) -> &str {
    name.rsplit_once('.').map_or(name, |(s, _)| s)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config, seed, out } => {
            let mut sc: SynthConfig = config.as_deref().map(read_json).transpose()?.unwrap_or_default();
            if let Some(s) = seed {
                sc.seed = s;
            }
            let (corpus, truth) = generate(&sc)?;
            corpus.write(&out, &truth)?;
            let cfg = RunConfig {
                synth: Some(sc.clone()),
                seed: sc.seed,
                ..RunConfig::default()
            };
            let mut outputs = Outputs::new(&out, &cfg)?;
            for f in ["sources.jsonl", "posts.jsonl", "comments.jsonl", "mentions.jsonl", "truth.json"] {
                outputs.file(f, "synth", |_| Ok(()))?;
            }
            outputs.finish(&cfg, None)?;
            println!(
                "wrote {} posts, {} comments, {} mentions to {}",
                corpus.posts.len(),
                corpus.comments.len(),
                corpus.mentions.len(),
                out.display()
            );
        }
        Command::Ingest { corpus, out } => {
            let c = load_corpus(&CorpusPaths::in_dir(&corpus))?;
            let counts = c.counts();
            let text = serde_json::to_string_pretty(&counts)?;
            match out {
                Some(p) => fs::write(&p, text + "\n").map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
                None => println!("{text}"),
            }
        }
        Command::Features { input, out, plots } => {
            let mut cfg = corpus_config(input.config.as_deref(), &input.corpus)?;
            cfg.plots |= plots;
            let corpus = load(&cfg)?;
            let analysis = analyse_sample(&corpus, input.sample, &cfg)?;
            let mut outputs = Outputs::new(&out, &cfg)?;
            let lag = write_analysis(&corpus, &analysis, &cfg, &mut outputs)?;
            let tag = input.sample.to_string().to_lowercase();
            outputs.json(&format!("features/{tag}_lag_summary.json"), "features", &lag)?;
            outputs.finish_as(&cfg, None, &format!("{tag}_features.manifest.json"))?;
            println!("{} entities, delta_p {:.3}", analysis.features.len(), analysis.thresholds.delta_p);
        }
        Command::Thresholds {
            fixtures,
            corpus,
            sample,
            config,
            degree,
            out,
        } => {
            let mut cfg = match &corpus {
                Some(c) => corpus_config(config.as_deref(), c)?,
                None => run_config(config.as_deref())?,
            };
            if let Some(d) = degree {
                for t in [&mut cfg.thresholds.presentation, &mut cfg.thresholds.response, &mut cfg.thresholds.engagement] {
                    t.degree = d;
                }
            }
            let (dir, name) = split_out(&out);
            let mut outputs = Outputs::new(&dir, &cfg)?;
            if let Some(fx) = fixtures {
                let res = fixture_thresholds(&fx, &cfg.thresholds)?;
                for r in &res {
                    let infl: Vec<String> = r.inflections.iter().map(|v| format!("{v:.3}")).collect();
                    println!(
                        "{:<10} {:?}: threshold {} inflections [{}]",
                        r.file,
                        r.measure,
                        r.threshold.map(|t| format!("{t:.3}")).unwrap_or_else(|| "none".into()),
                        infl.join(", ")
                    );
                }
                outputs.json(&name, "thresholds", &res)?;
                outputs.finish_as(&cfg, None, &format!("{}.manifest.json", stem(&name)))?;
                if let Some(e) = res.iter().find_map(|r| fixture_error(&fx, r, &cfg.thresholds)) {
                    return Err(e);
                }
                return Ok(());
            } else {
                let corpus = load(&cfg)?;
                let analysis = analyse_sample(&corpus, sample.expect("required by clap"), &cfg)?;
                let t = &analysis.thresholds;
                println!("delta_p {:.3} delta_r {:?} rho_e {:?}", t.delta_p, t.delta_r, t.rho_e);
                outputs.json(&name, "thresholds", t)?;
            }
            outputs.finish_as(&cfg, None, &format!("{}.manifest.json", stem(&name)))?;
        }
        Command::Earlywarn {
            input,
            model,
            out,
            predictions,
        } => {
            let mut cfg = corpus_config(input.config.as_deref(), &input.corpus)?;
            model.apply(&mut cfg)?;
            let corpus = load(&cfg)?;
            let analysis = analyse_sample(&corpus, input.sample, &cfg)?;
            let ew = early_warning(&analysis, &cfg, None)?;
            let (dir, name) = split_out(&out);
            let mut outputs = Outputs::new(&dir, &cfg)?;
            outputs.json(&name, "earlywarn", &ew)?;
            let pred = predictions.unwrap_or_else(|| dir.join(format!("{}_predictions.csv", stem(&name))));
            let (pdir, pname) = split_out(&pred);
            if pdir == dir {
                outputs.file(&pname, "earlywarn", |p| write_predictions_csv(p, &ew.predictions))?;
            } else {
                write_predictions_csv(&pred, &ew.predictions)?;
            }
            outputs.finish_as(&cfg, None, &format!("{}.manifest.json", stem(&name)))?;
            for e in &ew.benchmark {
                match &e.report {
                    Some(r) => println!("{:<4} auc {:.3} accuracy {:.3}", e.algorithm, r.auc.unwrap_or(f64::NAN), r.accuracy),
                    None => println!("{:<4} failed: {}", e.algorithm, e.error.as_deref().unwrap_or("")),
                }
            }
            println!("best pair: {} / {}", ew.best.0, ew.best.1);
        }
        Command::Fakenews {
            corpus,
            sample,
            experiment,
            config,
            model,
            out,
            plots,
        } => {
            let mut cfg = corpus_config(config.as_deref(), &corpus)?;
            model.apply(&mut cfg)?;
            cfg.plots |= plots;
            cfg.experiments = vec![experiment];
            let entity_sample = match sample {
                PostSampleName::P1 => SampleName::E1,
                PostSampleName::P2 => SampleName::E2,
            };
            let corpus = load(&cfg)?;
            let analysis = analyse_sample(&corpus, entity_sample, &cfg)?;
            let ew = early_warning(&analysis, &cfg, None)?;
            let mut outputs = Outputs::new(&out, &cfg)?;
            write_early_warning(&ew, &mut outputs, "earlywarn")?;
            let posts = posts_for_entities(&corpus, &analysis.sample);
            log::info!("{}: {} posts", sample, posts.posts.len());
            let fk = fake_news(&corpus, &analysis, &ew, &cfg, Some((&mut outputs, ".")))?;
            outputs.finish(&cfg, None)?;
            for steps in fk.experiments.values() {
                for st in steps {
                    let cells: Vec<String> = st
                        .auc
                        .iter()
                        .map(|(a, v)| format!("{a}={}", v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())))
                        .collect();
                    println!("{:<14} {}", st.step, cells.join(" "));
                }
            }
        }
        Command::Report { input, out } => {
            let path = if input.is_dir() { input.join("report.json") } else { input };
            let report: PipelineReport = read_json(&path)?;
            let text = render_report(&report);
            match out {
                Some(p) => fs::write(&p, text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
                None => print!("{text}"),
            }
        }
        Command::Run {
            config,
            manifest,
            model,
            out,
            plots,
        } => {
            let (report, m) = match manifest {
                Some(path) => {
                    if !model.algo.is_empty() || !model.hp.is_empty() || model.repeats.is_some() || model.seed.is_some() || plots {
                        return Err(Error::Config("a manifest rerun takes no overrides".into()));
                    }
                    rerun(&path, &out)?
                }
                None => {
                    let mut cfg = run_config(config.as_deref())?;
                    model.apply(&mut cfg)?;
                    cfg.plots |= plots;
                    run_pipeline(&cfg, &out)?
                }
            };
            print!("{}", render_report(&report));
            println!("{} outputs recorded in {}", m.outputs.len(), out.join("manifest.json").display());
        }
    }
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if cli.jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return ExitCode::from(2);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
