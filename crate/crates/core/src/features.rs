//! Entity-level polarization measures: presentation distance, response
//! distance, engaged-user fraction and the derived indicator features,
//! plus the attention, response-distribution and temporal-lag analyses.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{disputed_entities, Corpus, EntitySample, SourceCategory};
use crate::error::{Error, Result};
use crate::stats::{self, Summary};
use crate::thresholds::ThresholdResult;

/// A user is engaged with an entity when strictly more than this share of
/// all their comments sit on posts containing the entity.
pub const ENGAGEMENT_SHARE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseDistance {
    /// |mean post sentiment - mean comment sentiment| over all member posts.
    pub global: f64,
    /// Summary of the per-post distances |s(p) - mean comment sentiment of p|.
    pub per_post: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityFeatures {
    pub entity: String,
    pub occurrences: usize,
    pub post_sentiment: Summary,
    pub presentation_distance: f64,
    pub negative_posts: usize,
    pub comment_sentiment: Option<Summary>,
    pub response_distance: Option<ResponseDistance>,
    pub comments_count: usize,
    pub negative_comments: usize,
    pub engaged_fraction: f64,
    pub controversy: Option<bool>,
    pub perception: Option<bool>,
    pub captivation: Option<bool>,
    pub disputed: bool,
    /// Features that could not be computed for this entity.
    pub missing: Vec<String>,
}

impl EntityFeatures {
    /// Sets C, P and κ from thresholds. Indicators whose threshold or
    /// underlying measure is absent stay `None`.
    pub fn apply_thresholds(&mut self, t: &ThresholdResult) {
        self.controversy = Some(self.presentation_distance >= t.delta_p);
        self.perception = match (self.response_distance, t.delta_r) {
            (Some(r), Some(d)) => Some(r.global >= d),
            _ => None,
        };
        self.captivation = t.rho_e.map(|rho| self.engaged_fraction >= rho);
    }
}

fn post_sentiments(corpus: &Corpus, posts: &[usize]) -> Vec<f64> {
    posts.iter().map(|&p| corpus.posts[p].sentiment).collect()
}

/// Spread (max - min) of the post sentiments of an entity's member posts.
pub fn presentation_distance(corpus: &Corpus, sample: &EntitySample, entity: &str) -> Result<f64> {
    let s = post_sentiments(corpus, sample.members(entity));
    match (stats::max(&s), stats::min(&s)) {
        (Some(hi), Some(lo)) => Ok((hi - lo).abs()),
        _ => Err(Error::MissingEntity(entity.to_string())),
    }
}

fn scored_comments(corpus: &Corpus, post: usize) -> Vec<f64> {
    corpus
        .comments_of(post)
        .iter()
        .filter_map(|&c| corpus.comments[c].sentiment)
        .collect()
}

fn response_distance_of(corpus: &Corpus, posts: &[usize]) -> Option<ResponseDistance> {
    let mut all_comments = Vec::new();
    let mut per_post = Vec::new();
    for &p in posts {
        let cs = scored_comments(corpus, p);
        if cs.is_empty() {
            continue;
        }
        per_post.push((corpus.posts[p].sentiment - stats::mean(&cs)).abs());
        all_comments.extend(cs);
    }
    if all_comments.is_empty() {
        return None;
    }
    let post_mean = stats::mean(&post_sentiments(corpus, posts));
    Some(ResponseDistance {
        global: (post_mean - stats::mean(&all_comments)).abs(),
        per_post: Summary::of(&per_post)?,
    })
}

pub fn response_distance_stats(
    corpus: &Corpus,
    sample: &EntitySample,
    entity: &str,
) -> Result<ResponseDistance> {
    let posts = sample.members(entity);
    if posts.is_empty() {
        return Err(Error::MissingEntity(entity.to_string()));
    }
    response_distance_of(corpus, posts).ok_or_else(|| Error::MissingFeature {
        entity: entity.to_string(),
        feature: "comment sentiment",
    })
}

/// Fraction of an entity's commenters that are engaged with it. The
/// denominator is the set of users commenting on at least one member post.
pub fn engaged_fraction(corpus: &Corpus, sample: &EntitySample, entity: &str) -> f64 {
    let (engaged, commenters) = engaged_users(corpus, sample.members(entity));
    stats::ratio(engaged.len() as f64, commenters as f64)
}

/// Engaged users of a post set, and the number of distinct commenters on it.
pub(crate) fn engaged_users(corpus: &Corpus, posts: &[usize]) -> (Vec<usize>, usize) {
    let mut on_member: HashMap<usize, usize> = HashMap::new();
    for &p in posts {
        for &c in corpus.comments_of(p) {
            *on_member.entry(corpus.comment_user(c)).or_default() += 1;
        }
    }
    let mut engaged: Vec<usize> = on_member
        .iter()
        .filter(|(&u, &n)| is_engaged(n, corpus.comments_by_user(u).len()))
        .map(|(&u, _)| u)
        .collect();
    engaged.sort_unstable();
    (engaged, on_member.len())
}

#[inline]
pub(crate) fn is_engaged(on_entity: usize, total: usize) -> bool {
    total > 0 && (on_entity as f64) > ENGAGEMENT_SHARE * total as f64
}

fn features_for(
    corpus: &Corpus,
    entity: &str,
    posts: &[usize],
    disputed: bool,
    thresholds: Option<&ThresholdResult>,
) -> Result<EntityFeatures> {
    let sents = post_sentiments(corpus, posts);
    let post_sentiment = Summary::of(&sents).ok_or_else(|| Error::MissingEntity(entity.into()))?;
    let mut comment_sents = Vec::new();
    let mut comments_count = 0;
    for &p in posts {
        comments_count += corpus.comments_of(p).len();
        comment_sents.extend(scored_comments(corpus, p));
    }
    let mut missing = Vec::new();
    let comment_sentiment = Summary::of(&comment_sents);
    let response_distance = response_distance_of(corpus, posts);
    if comment_sentiment.is_none() {
        missing.push("comment sentiment".to_string());
    }
    let mut f = EntityFeatures {
        entity: entity.to_string(),
        occurrences: posts.len(),
        post_sentiment,
        presentation_distance: post_sentiment.max - post_sentiment.min,
        negative_posts: sents.iter().filter(|&&s| s < 0.0).count(),
        comment_sentiment,
        response_distance,
        comments_count,
        negative_comments: comment_sents.iter().filter(|&&s| s < 0.0).count(),
        engaged_fraction: {
            let (e, n) = engaged_users(corpus, posts);
            stats::ratio(e.len() as f64, n as f64)
        },
        controversy: None,
        perception: None,
        captivation: None,
        disputed,
        missing,
    };
    if let Some(t) = thresholds {
        f.apply_thresholds(t);
    }
    Ok(f)
}

/// Computes the full feature record for every entity of the sample, in
/// entity order. Missing comment-based features are flagged on the record
/// rather than failing the batch.
pub fn entity_features(
    corpus: &Corpus,
    sample: &EntitySample,
    thresholds: Option<&ThresholdResult>,
) -> Vec<EntityFeatures> {
    let disputed = disputed_entities(corpus, sample);
    let entries: Vec<(&String, &Vec<usize>)> = sample.member_posts.iter().collect();
    entries
        .par_iter()
        .filter_map(|(e, posts)| {
            features_for(corpus, e, posts, disputed.contains(*e), thresholds).ok()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionPoint {
    pub delta: f64,
    pub mean_likes: f64,
    pub mean_comments: f64,
    pub posts: usize,
}

/// Mean likes and comments per post over the posts of entities whose
/// presentation distance is at least each grid value.
pub fn attention_curve(
    features: &[EntityFeatures],
    corpus: &Corpus,
    sample: &EntitySample,
    grid: &[f64],
) -> Vec<AttentionPoint> {
    let mut order: Vec<&EntityFeatures> = features.iter().collect();
    order.sort_by(|a, b| b.presentation_distance.total_cmp(&a.presentation_distance));
    let mut included: HashSet<usize> = HashSet::new();
    let (mut likes, mut comments) = (0u64, 0usize);
    let mut next = 0;
    let mut out: Vec<AttentionPoint> = Vec::with_capacity(grid.len());
    for &delta in grid.iter().rev() {
        while next < order.len() && order[next].presentation_distance >= delta {
            for &p in sample.members(&order[next].entity) {
                if included.insert(p) {
                    likes += corpus.posts[p].likes;
                    comments += corpus.comments_of(p).len();
                }
            }
            next += 1;
        }
        let n = included.len() as f64;
        out.push(AttentionPoint {
            delta,
            mean_likes: stats::ratio(likes as f64, n),
            mean_comments: stats::ratio(comments as f64, n),
            posts: included.len(),
        });
    }
    out.reverse();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControversyClass {
    Controversial,
    Uncontroversial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DisputeClass {
    Disputed,
    Undisputed,
}

/// Equal-width histogram normalized to unit area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
    pub density: Vec<f64>,
    pub n: usize,
}

impl Histogram {
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Histogram {
        assert!(bins > 0 && hi > lo);
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &v in values {
            let i = (((v - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
            counts[i] += 1;
        }
        let n = values.len();
        let density = counts
            .iter()
            .map(|&c| stats::ratio(c as f64, n as f64 * width))
            .collect();
        Histogram {
            lo,
            hi,
            counts,
            density,
            n,
        }
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn area(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }
}

/// Density of the mean per-post response distance for one
/// (controversy, dispute) class over [0, 2].
pub fn response_distribution(
    features: &[EntityFeatures],
    controversy: ControversyClass,
    dispute: DisputeClass,
    bins: usize,
) -> Histogram {
    let values: Vec<f64> = features
        .iter()
        .filter(|f| {
            let c = match f.controversy {
                Some(true) => ControversyClass::Controversial,
                Some(false) => ControversyClass::Uncontroversial,
                None => return false,
            };
            let d = if f.disputed {
                DisputeClass::Disputed
            } else {
                DisputeClass::Undisputed
            };
            c == controversy && d == dispute
        })
        .filter_map(|f| f.response_distance.map(|r| r.per_post.mean))
        .collect();
    Histogram::new(&values, 0.0, 2.0, bins)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagHistogram {
    pub bin_hours: f64,
    /// Bin `i` covers lags in `[i * bin_hours, (i + 1) * bin_hours)`.
    pub counts: Vec<usize>,
    pub lags_hours: Vec<f64>,
    pub fake_first: usize,
    pub never_fake: usize,
}

impl LagHistogram {
    /// Share of measured lags that are at most `hours`.
    pub fn mass_within(&self, hours: f64) -> f64 {
        let inside = self.lags_hours.iter().filter(|&&l| l <= hours).count();
        stats::ratio(inside as f64, self.lags_hours.len() as f64)
    }
}

/// Time from an entity's first Official appearance to its first Fake one.
pub fn temporal_lag_histogram(
    corpus: &Corpus,
    sample: &EntitySample,
    entities: &BTreeSet<String>,
    bin_hours: f64,
) -> LagHistogram {
    assert!(bin_hours > 0.0);
    let mut lags = Vec::new();
    let (mut fake_first, mut never_fake) = (0, 0);
    for e in entities {
        let mut first_official: Option<i64> = None;
        let mut first_fake: Option<i64> = None;
        for &p in sample.members(e) {
            let ts = corpus.posts[p].timestamp;
            let slot = match corpus.post_category(p) {
                SourceCategory::Official => &mut first_official,
                SourceCategory::Fake => &mut first_fake,
            };
            *slot = Some(slot.map_or(ts, |t: i64| t.min(ts)));
        }
        match (first_official, first_fake) {
            (_, None) => never_fake += 1,
            (Some(o), Some(f)) if o <= f => lags.push((f - o) as f64 / 3600.0),
            _ => fake_first += 1,
        }
    }
    let nbins = lags
        .iter()
        .map(|l| (l / bin_hours).floor() as usize + 1)
        .max()
        .unwrap_or(0);
    let mut counts = vec![0; nbins];
    for l in &lags {
        counts[(l / bin_hours).floor() as usize] += 1;
    }
    LagHistogram {
        bin_hours,
        counts,
        lags_hours: lags,
        fake_first,
        never_fake,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_flag(v: Option<bool>) -> String {
    v.map(|b| u8::from(b).to_string()).unwrap_or_default()
}

/// Column order of the entity feature CSV export.
pub const FEATURE_CSV_HEADER: [&str; 24] = [
    "entity",
    "occurrences",
    "min_post_sentiment",
    "max_post_sentiment",
    "mean_post_sentiment",
    "std_post_sentiment",
    "presentation_distance",
    "negative_posts",
    "controversy",
    "min_comment_sentiment",
    "max_comment_sentiment",
    "mean_comment_sentiment",
    "std_comment_sentiment",
    "min_response_distance",
    "max_response_distance",
    "mean_response_distance",
    "std_response_distance",
    "comments_count",
    "negative_comments",
    "perception",
    "captivation",
    "response_distance_global",
    "engaged_fraction",
    "disputed",
];

pub fn write_features_csv(path: &Path, features: &[EntityFeatures]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(FEATURE_CSV_HEADER)?;
    for f in features {
        let cs = f.comment_sentiment;
        let rd = f.response_distance;
        w.write_record([
            f.entity.clone(),
            f.occurrences.to_string(),
            f.post_sentiment.min.to_string(),
            f.post_sentiment.max.to_string(),
            f.post_sentiment.mean.to_string(),
            f.post_sentiment.std.to_string(),
            f.presentation_distance.to_string(),
            f.negative_posts.to_string(),
            opt_flag(f.controversy),
            opt(cs.map(|s| s.min)),
            opt(cs.map(|s| s.max)),
            opt(cs.map(|s| s.mean)),
            opt(cs.map(|s| s.std)),
            opt(rd.map(|r| r.per_post.min)),
            opt(rd.map(|r| r.per_post.max)),
            opt(rd.map(|r| r.per_post.mean)),
            opt(rd.map(|r| r.per_post.std)),
            f.comments_count.to_string(),
            f.negative_comments.to_string(),
            opt_flag(f.perception),
            opt_flag(f.captivation),
            opt(rd.map(|r| r.global)),
            f.engaged_fraction.to_string(),
            u8::from(f.disputed).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
