//! Post-level features in five groups and the fake-post experiments.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{Algorithm, Dataset, ModelSpec};
use crate::corpus::{Corpus, EntitySample, PostSample, PostSampleName};
use crate::earlywarning::{run_benchmark, BenchmarkEntry, EntityPrediction};
use crate::error::{Error, Result};
use crate::eval::{evaluate, forward_stepwise, Protocol, StepwiseStep};
use crate::features::{engaged_users, EntityFeatures};
use crate::linalg::Matrix;
use crate::stats::{self, mean, pop_std};

pub const STRUCTURAL: [&str; 7] = [
    "likes",
    "comments",
    "shares",
    "likes_on_comments",
    "comments_on_comments",
    "avg_likes_on_comments",
    "avg_comments_on_comments",
];

const TEXT_STATS: [&str; 9] = [
    "characters",
    "words",
    "sentences",
    "capital_letters",
    "punctuation",
    "avg_word_length",
    "avg_sentence_length",
    "punctuation_rate",
    "capital_rate",
];

pub const USER: [&str; 12] = [
    "avg_comments_to_commenters",
    "std_comments_to_commenters",
    "avg_likes_to_commenters",
    "std_likes_to_commenters",
    "mean_std_comments_to_commenters",
    "mean_std_likes_to_commenters",
    "avg_comments_per_user",
    "std_comments_per_user",
    "avg_pages_per_user",
    "std_pages_per_user",
    "engaged_users",
    "rate_engaged_users",
];

pub const SENTIMENT_P2: [&str; 11] = [
    "post_sentiment",
    "avg_comment_sentiment",
    "std_comment_sentiment",
    "rate_positive_comments",
    "rate_negative_comments",
    "positive_over_negative",
    "mean_presentation_distance",
    "std_presentation_distance",
    "captivating_entities",
    "rate_captivating_entities",
    "avg_response_distance",
];

pub const SENTIMENT_P1: [&str; 3] = [
    "post_sentiment",
    "mean_presentation_distance",
    "std_presentation_distance",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    #[serde(rename = "ST")]
    Structural,
    #[serde(rename = "S")]
    Semantic,
    #[serde(rename = "UB")]
    UserBased,
    #[serde(rename = "SB")]
    SentimentBased,
    #[serde(rename = "P")]
    Predicted,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 5] = [
        FeatureGroup::Structural,
        FeatureGroup::Semantic,
        FeatureGroup::UserBased,
        FeatureGroup::SentimentBased,
        FeatureGroup::Predicted,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            FeatureGroup::Structural => "ST",
            FeatureGroup::Semantic => "S",
            FeatureGroup::UserBased => "UB",
            FeatureGroup::SentimentBased => "SB",
            FeatureGroup::Predicted => "P",
        }
    }
}

/// The nine surface statistics, in [`TEXT_STATS`] order. Trailing
/// whitespace is ignored.
pub fn semantic_stats(text: &str) -> [f64; 9] {
    let text = text.trim_end();
    let chars = text.chars().count();
    let mut words = 0usize;
    let mut word_chars = 0usize;
    let mut in_word = false;
    let mut sentences = 0usize;
    let mut sentence_has_word = false;
    let mut capitals = 0usize;
    let mut punct = 0usize;
    for c in text.chars() {
        if c.is_alphanumeric() {
            word_chars += 1;
            if !in_word {
                words += 1;
                sentence_has_word = true;
            }
            in_word = true;
        } else {
            in_word = false;
        }
        if c.is_uppercase() {
            capitals += 1;
        }
        if matches!(c, '.' | ',' | ';' | ':' | '!' | '?' | '\'' | '"' | '(' | ')' | '-') {
            punct += 1;
        }
        if matches!(c, '.' | '!' | '?') {
            if sentence_has_word {
                sentences += 1;
            }
            sentence_has_word = false;
        }
    }
    if sentence_has_word {
        sentences += 1;
    }
    let r = |a: usize, b: usize| stats::ratio(a as f64, b as f64);
    [
        chars as f64,
        words as f64,
        sentences as f64,
        capitals as f64,
        punct as f64,
        r(word_chars, words),
        r(words, sentences),
        r(punct, chars),
        r(capitals, chars),
    ]
}

/// Precomputed corpus-wide lookups for post features.
pub struct PostContext<'a> {
    corpus: &'a Corpus,
    sample: &'a EntitySample,
    by_post: HashMap<usize, Vec<&'a str>>,
    engaged: HashMap<&'a str, HashSet<usize>>,
    pages_per_user: Vec<usize>,
    features: HashMap<&'a str, &'a EntityFeatures>,
    predictions: HashMap<&'a str, &'a EntityPrediction>,
}

impl<'a> PostContext<'a> {
    pub fn new(
        corpus: &'a Corpus,
        sample: &'a EntitySample,
        features: &'a [EntityFeatures],
        predictions: &'a [EntityPrediction],
    ) -> Self {
        let engaged = sample
            .member_posts
            .par_iter()
            .map(|(e, posts)| (e.as_str(), engaged_users(corpus, posts).0.into_iter().collect()))
            .collect();
        let pages_per_user = (0..corpus.user_count())
            .map(|u| {
                corpus
                    .comments_by_user(u)
                    .iter()
                    .map(|&c| corpus.post_source(corpus.comment_post(c)))
                    .collect::<HashSet<_>>()
                    .len()
            })
            .collect();
        PostContext {
            corpus,
            sample,
            by_post: sample.entities_by_post(),
            engaged,
            pages_per_user,
            features: features.iter().map(|f| (f.entity.as_str(), f)).collect(),
            predictions: predictions.iter().map(|p| (p.entity.as_str(), p)).collect(),
        }
    }

    fn entities(&self, post: usize) -> &[&'a str] {
        self.by_post.get(&post).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn structural(&self, post: usize) -> Vec<f64> {
        let c = self.corpus;
        let p = &c.posts[post];
        let cs = c.comments_of(post);
        let likes: u64 = cs.iter().map(|&i| c.comments[i].likes).sum();
        let replies: u64 = cs.iter().map(|&i| c.comments[i].replies).sum();
        let n = cs.len();
        vec![
            p.likes as f64,
            n as f64,
            p.shares as f64,
            likes as f64,
            replies as f64,
            stats::ratio(likes as f64, n as f64),
            stats::ratio(replies as f64, n as f64),
        ]
    }

    /// Post text statistics followed by those of the newline-joined comments.
    pub fn semantic(&self, post: usize) -> Vec<f64> {
        let c = self.corpus;
        let joined = c
            .comments_of(post)
            .iter()
            .map(|&i| c.comments[i].text.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let mut v = semantic_stats(&c.posts[post].text).to_vec();
        v.extend(semantic_stats(&joined));
        v
    }

    pub fn user(&self, post: usize) -> Vec<f64> {
        let c = self.corpus;
        let mut by_user: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &i in c.comments_of(post) {
            by_user.entry(c.comment_user(i)).or_default().push(i);
        }
        if by_user.is_empty() {
            return vec![0.0; USER.len()];
        }
        let mut replies_sum = Vec::new();
        let mut likes_sum = Vec::new();
        let mut replies_std = Vec::new();
        let mut likes_std = Vec::new();
        let mut per_user = Vec::new();
        let mut pages = Vec::new();
        for (&u, cs) in &by_user {
            let r: Vec<f64> = cs.iter().map(|&i| c.comments[i].replies as f64).collect();
            let l: Vec<f64> = cs.iter().map(|&i| c.comments[i].likes as f64).collect();
            replies_sum.push(r.iter().sum());
            likes_sum.push(l.iter().sum());
            replies_std.push(pop_std(&r));
            likes_std.push(pop_std(&l));
            per_user.push(cs.len() as f64);
            pages.push(self.pages_per_user[u] as f64);
        }
        let entities = self.entities(post);
        let engaged = by_user
            .keys()
            .filter(|u| {
                entities
                    .iter()
                    .any(|e| self.engaged.get(e).is_some_and(|s| s.contains(u)))
            })
            .count();
        vec![
            mean(&replies_sum),
            pop_std(&replies_sum),
            mean(&likes_sum),
            pop_std(&likes_sum),
            mean(&replies_std),
            mean(&likes_std),
            mean(&per_user),
            pop_std(&per_user),
            mean(&pages),
            pop_std(&pages),
            engaged as f64,
            engaged as f64 / by_user.len() as f64,
        ]
    }

    pub fn sentiment(&self, post: usize, name: PostSampleName) -> Vec<f64> {
        let c = self.corpus;
        let dps: Vec<f64> = self
            .entities(post)
            .iter()
            .filter_map(|e| self.features.get(e).map(|f| f.presentation_distance))
            .collect();
        let post_s = c.posts[post].sentiment;
        if name == PostSampleName::P1 {
            return vec![post_s, mean(&dps), pop_std(&dps)];
        }
        let scored: Vec<f64> = c
            .comments_of(post)
            .iter()
            .filter_map(|&i| c.comments[i].sentiment)
            .collect();
        let pos = scored.iter().filter(|&&s| s > 0.0).count();
        let neg = scored.iter().filter(|&&s| s < 0.0).count();
        let entities = self.entities(post);
        let captivating = entities
            .iter()
            .filter(|e| self.features.get(*e).and_then(|f| f.captivation) == Some(true))
            .count();
        let responses: Vec<f64> = entities
            .iter()
            .filter_map(|e| self.features.get(e)?.response_distance.map(|r| r.global))
            .collect();
        vec![
            post_s,
            mean(&scored),
            pop_std(&scored),
            stats::ratio(pos as f64, scored.len() as f64),
            stats::ratio(neg as f64, scored.len() as f64),
            pos as f64 / neg.max(1) as f64,
            mean(&dps),
            pop_std(&dps),
            captivating as f64,
            stats::ratio(captivating as f64, entities.len() as f64),
            mean(&responses),
        ]
    }

    pub fn predicted(&self, post: usize) -> Vec<f64> {
        let entities = self.entities(post);
        let (mut a, mut b) = (0usize, 0usize);
        for e in entities {
            if let Some(p) = self.predictions.get(e) {
                a += p.pred_a as usize;
                b += p.pred_b as usize;
            }
        }
        let n = entities.len() as f64;
        vec![
            a as f64,
            stats::ratio(a as f64, n),
            b as f64,
            stats::ratio(b as f64, n),
        ]
    }

    pub fn row(&self, post: usize, name: PostSampleName) -> Vec<f64> {
        let mut r = self.structural(post);
        r.extend(self.semantic(post));
        r.extend(self.user(post));
        r.extend(self.sentiment(post, name));
        r.extend(self.predicted(post));
        r
    }

    pub fn sample(&self) -> &EntitySample {
        self.sample
    }
}

/// Column names and group ranges for a post sample.
pub fn post_columns(name: PostSampleName, models: (Algorithm, Algorithm)) -> (Vec<String>, BTreeMap<FeatureGroup, Range<usize>>) {
    let mut cols: Vec<String> = STRUCTURAL.iter().map(|s| s.to_string()).collect();
    let mut groups = BTreeMap::new();
    groups.insert(FeatureGroup::Structural, 0..cols.len());
    let start = cols.len();
    for prefix in ["post", "comments"] {
        cols.extend(TEXT_STATS.iter().map(|s| format!("{prefix}_{s}")));
    }
    groups.insert(FeatureGroup::Semantic, start..cols.len());
    let start = cols.len();
    cols.extend(USER.iter().map(|s| s.to_string()));
    groups.insert(FeatureGroup::UserBased, start..cols.len());
    let start = cols.len();
    let sent: &[&str] = match name {
        PostSampleName::P1 => &SENTIMENT_P1,
        PostSampleName::P2 => &SENTIMENT_P2,
    };
    cols.extend(sent.iter().map(|s| s.to_string()));
    groups.insert(FeatureGroup::SentimentBased, start..cols.len());
    let start = cols.len();
    for m in [models.0, models.1] {
        let m = m.name().to_lowercase();
        cols.push(format!("predicted_disputed_{m}"));
        cols.push(format!("rate_predicted_disputed_{m}"));
    }
    groups.insert(FeatureGroup::Predicted, start..cols.len());
    (cols, groups)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostDataset {
    pub sample: PostSampleName,
    pub data: Dataset,
    pub post_ids: Vec<String>,
    pub groups: BTreeMap<FeatureGroup, Range<usize>>,
    /// Posts with no sample entity; their predicted features are 0.
    pub flagged: Vec<String>,
}

impl PostDataset {
    pub fn columns_for(&self, groups: &[FeatureGroup]) -> Vec<usize> {
        groups
            .iter()
            .filter_map(|g| self.groups.get(g))
            .flat_map(|r| r.clone())
            .collect()
    }
}

/// Builds one row per post of the sample; label 1 marks fake-source posts.
pub fn build_post_dataset(
    corpus: &Corpus,
    posts: &PostSample,
    sample: &EntitySample,
    features: &[EntityFeatures],
    predictions: &[EntityPrediction],
) -> Result<PostDataset> {
    let models = predictions
        .first()
        .map(|p| (p.model_a, p.model_b))
        .ok_or(Error::EmptyInput("entity predictions"))?;
    let ctx = PostContext::new(corpus, sample, features, predictions);
    let rows: Vec<Vec<f64>> = posts.posts.par_iter().map(|&p| ctx.row(p, posts.name)).collect();
    let flagged = posts
        .posts
        .iter()
        .filter(|p| ctx.entities(**p).is_empty())
        .map(|&p| corpus.posts[p].id.clone())
        .collect();
    let (cols, groups) = post_columns(posts.name, models);
    let x = if rows.is_empty() {
        Matrix::zeros(0, cols.len())
    } else {
        Matrix::from_rows(&rows)
    };
    Ok(PostDataset {
        sample: posts.name,
        data: Dataset::new(x, posts.labels.clone(), cols)?,
        post_ids: posts.posts.iter().map(|&p| corpus.posts[p].id.clone()).collect(),
        groups,
        flagged,
    })
}

pub fn write_post_features_csv(path: &Path, ds: &PostDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["post_id".to_string()];
    header.extend(ds.data.columns.iter().cloned());
    header.push("fake".into());
    w.write_record(&header)?;
    for (i, id) in ds.post_ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(ds.data.x.row(i).iter().map(|v| v.to_string()));
        rec.push(ds.data.y[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentMode {
    /// The structural base plus one other group at a time.
    A,
    /// Groups added cumulatively.
    B,
}

impl std::str::FromStr for ExperimentMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(ExperimentMode::A),
            "b" => Ok(ExperimentMode::B),
            _ => Err(Error::Config(format!("unknown experiment `{s}` (expected a or b)"))),
        }
    }
}

pub fn experiment_steps(mode: ExperimentMode) -> Vec<Vec<FeatureGroup>> {
    use FeatureGroup::*;
    match mode {
        ExperimentMode::A => vec![
            vec![Structural],
            vec![Structural, Semantic],
            vec![Structural, UserBased],
            vec![Structural, SentimentBased],
            vec![Structural, Predicted],
        ],
        ExperimentMode::B => (1..=5).map(|k| FeatureGroup::ALL[..k].to_vec()).collect(),
    }
}

pub fn step_name(groups: &[FeatureGroup]) -> String {
    groups.iter().map(|g| g.tag()).collect::<Vec<_>>().join("+")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub step: String,
    pub columns: usize,
    pub auc: BTreeMap<Algorithm, Option<f64>>,
    pub accuracy: BTreeMap<Algorithm, Option<f64>>,
}

/// Mean protocol AUC per (step, algorithm). Steps whose groups contribute
/// no columns are skipped with a warning.
pub fn run_experiment(
    ds: &PostDataset,
    mode: ExperimentMode,
    specs: &[ModelSpec],
    protocol: &Protocol,
) -> Vec<StepResult> {
    let mut out = Vec::new();
    for groups in experiment_steps(mode) {
        if groups.iter().any(|g| ds.groups.get(g).is_none_or(|r| r.is_empty())) {
            log::warn!("skipping step {}: empty feature group", step_name(&groups));
            continue;
        }
        let cols = ds.columns_for(&groups);
        let data = ds.data.select_columns(&cols);
        let mut auc = BTreeMap::new();
        let mut accuracy = BTreeMap::new();
        for spec in specs {
            let r = evaluate(&data, spec, protocol);
            if let Err(e) = &r {
                log::warn!("{} at {}: {e}", spec.algorithm, step_name(&groups));
            }
            let r = r.ok();
            auc.insert(spec.algorithm, r.as_ref().and_then(|r| r.auc));
            accuracy.insert(spec.algorithm, r.map(|r| r.accuracy));
        }
        out.push(StepResult {
            step: step_name(&groups),
            columns: cols.len(),
            auc,
            accuracy,
        });
    }
    out
}

pub fn write_steps_csv(path: &Path, steps: &[StepResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "algorithm", "auc", "accuracy"])?;
    for s in steps {
        for (a, auc) in &s.auc {
            let acc = s.accuracy.get(a).copied().flatten();
            w.write_record([
                s.step.clone(),
                a.name().to_string(),
                auc.map(|v| v.to_string()).unwrap_or_default(),
                acc.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalReport {
    pub benchmark: Vec<BenchmarkEntry>,
    pub stepwise_algorithm: Algorithm,
    pub stepwise: Vec<StepwiseStep>,
}

/// Full-feature benchmark plus a forward-stepwise ranking of the top
/// `top_k` features.
pub fn final_report(
    ds: &PostDataset,
    specs: &[ModelSpec],
    protocol: &Protocol,
    stepwise_spec: &ModelSpec,
    stepwise_protocol: &Protocol,
    top_k: usize,
) -> Result<FinalReport> {
    for g in FeatureGroup::ALL {
        if ds.groups.get(&g).is_none_or(|r| r.is_empty()) {
            return Err(Error::Config(format!("feature group {} is empty", g.tag())));
        }
    }
    let benchmark = run_benchmark(&ds.data, specs, protocol);
    let k = top_k.min(ds.data.x.cols());
    let stepwise = forward_stepwise(&ds.data, stepwise_spec, k, stepwise_protocol)?;
    Ok(FinalReport {
        benchmark,
        stepwise_algorithm: stepwise_spec.algorithm,
        stepwise,
    })
}

pub fn write_stepwise_csv(path: &Path, steps: &[StepwiseStep]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["rank", "feature", "auc"])?;
    for (i, s) in steps.iter().enumerate() {
        w.write_record([(i + 1).to_string(), s.name.clone(), s.auc.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
