//! Seeded synthetic corpora with planted ground truth.
//!
//! Draw order: entity roles, per-entity post counts, then entity by entity
//! (timing, sentiment, posts, mentions, comment offsets), then general
//! comments, then engaged-cohort comments. Everything comes from a single
//! `ChaCha8Rng` stream.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::distributions::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{write_jsonl, Comment, Corpus, CorpusPaths, EntityMention, Post, Source, SourceCategory};
use crate::error::{Error, Result};

const EPOCH: i64 = 1_600_000_000;
const DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_official_sources: usize,
    pub n_fake_sources: usize,
    pub n_entities: usize,
    /// Entities with enough high-confidence posts for the strict sample.
    pub n_major_entities: usize,
    pub major_posts: (usize, usize),
    pub disputed_fraction: f64,
    pub n_posts: usize,
    pub n_comments: usize,
    pub n_users: usize,
    /// Presentation distance drawn per entity.
    pub undisputed_spread: (f64, f64),
    pub disputed_spread: (f64, f64),
    /// Share of a disputed entity's posts published by fake sources.
    pub fake_share: (f64, f64),
    /// Mean absolute comment-vs-post sentiment offset.
    pub undisputed_response: (f64, f64),
    pub disputed_response: (f64, f64),
    pub engaged_cohort: usize,
    pub cohort_comments: (usize, usize),
    pub lag_hours: (f64, f64),
    /// Probability of an extra low-confidence mention per post.
    pub secondary_mention_rate: f64,
    /// Strength in [0, 1] of the likes/shares/comment activity boost on fake posts.
    pub structural_signal: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_official_sources: 30,
            n_fake_sources: 10,
            n_entities: 1000,
            n_major_entities: 60,
            major_posts: (100, 125),
            disputed_fraction: 0.3,
            n_posts: 10_000,
            n_comments: 100_000,
            n_users: 5_000,
            undisputed_spread: (0.1, 1.1),
            disputed_spread: (0.6, 1.8),
            fake_share: (0.15, 0.4),
            undisputed_response: (0.1, 0.8),
            disputed_response: (0.0, 0.3),
            engaged_cohort: 5,
            cohort_comments: (3, 8),
            lag_hours: (1.0, 24.0),
            secondary_mention_rate: 0.15,
            structural_signal: 0.2,
            seed: 42,
        }
    }
}

impl SynthConfig {
    /// Smaller corpus for fast tests.
    pub fn small(seed: u64) -> Self {
        SynthConfig {
            n_official_sources: 6,
            n_fake_sources: 3,
            n_entities: 120,
            n_major_entities: 10,
            major_posts: (100, 110),
            n_posts: 1_400,
            n_comments: 8_000,
            n_users: 600,
            seed,
            ..SynthConfig::default()
        }
    }

    fn n_disputed(&self) -> usize {
        (self.disputed_fraction * self.n_entities as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.disputed_fraction) {
            return bad(format!("disputed_fraction {} outside [0, 1]", self.disputed_fraction));
        }
        if !(0.0..=1.0).contains(&self.secondary_mention_rate) {
            return bad("secondary_mention_rate outside [0, 1]".into());
        }
        for (name, (lo, hi), max) in [
            ("undisputed_spread", self.undisputed_spread, 2.0),
            ("disputed_spread", self.disputed_spread, 2.0),
            ("fake_share", self.fake_share, 1.0),
            ("undisputed_response", self.undisputed_response, 1.0),
            ("disputed_response", self.disputed_response, 1.0),
        ] {
            if !(0.0 <= lo && lo <= hi && hi <= max) {
                return bad(format!("{name} ({lo}, {hi}) must satisfy 0 ≤ lo ≤ hi ≤ {max}"));
            }
        }
        if !(0.0..=1.0).contains(&self.structural_signal) {
            return bad("structural_signal must lie in [0, 1]".into());
        }
        let (lo, hi) = self.lag_hours;
        if !(0.0 <= lo && lo <= hi) {
            return bad("lag_hours must satisfy 0 ≤ lo ≤ hi".into());
        }
        if self.major_posts.0 > self.major_posts.1 || self.cohort_comments.0 > self.cohort_comments.1 {
            return bad("count ranges must satisfy lo ≤ hi".into());
        }
        if self.n_official_sources == 0 || (self.n_fake_sources == 0 && self.n_disputed() > 0) {
            return bad("need at least one official source, and a fake source when entities are disputed".into());
        }
        if self.n_major_entities > self.n_entities {
            return bad("more major entities than entities".into());
        }
        let engaged = self.n_disputed() * self.engaged_cohort;
        if engaged >= self.n_users {
            return bad(format!(
                "{engaged} engaged users requested but only {} users",
                self.n_users
            ));
        }
        let major_max = self.n_major_entities * self.major_posts.1;
        let minor = self.n_entities - self.n_major_entities;
        if major_max + 2 * minor > self.n_posts {
            return bad(format!(
                "{} posts cannot cover {} major and {minor} minor entities",
                self.n_posts, self.n_major_entities
            ));
        }
        Ok(())
    }
}

/// Labels and planted quantities the generator knows by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub entities: Vec<String>,
    pub disputed: BTreeSet<String>,
    pub major: BTreeSet<String>,
    /// Planted presentation distance per entity.
    pub spread: BTreeMap<String, f64>,
    pub cohorts: BTreeMap<String, Vec<String>>,
    /// Engaged-user fraction per entity from the generator's own bookkeeping.
    pub engaged_fraction: BTreeMap<String, f64>,
    pub lags_hours: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub sources: Vec<Source>,
    pub posts: Vec<Post>,
    pub comments: Vec<Comment>,
    pub mentions: Vec<EntityMention>,
}

impl SynthCorpus {
    pub fn write(&self, dir: &Path, truth: &GroundTruth) -> Result<CorpusPaths> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = CorpusPaths::in_dir(dir);
        write_jsonl(&paths.sources, &self.sources)?;
        write_jsonl(&paths.posts, &self.posts)?;
        write_jsonl(&paths.comments, &self.comments)?;
        write_jsonl(&paths.mentions, &self.mentions)?;
        let truth_path = dir.join("truth.json");
        std::fs::write(&truth_path, serde_json::to_vec_pretty(truth)?)
            .map_err(|e| Error::io(&truth_path, e))?;
        Ok(paths)
    }

    pub fn into_corpus(self) -> Result<Corpus> {
        Corpus::new(self.sources, self.posts, self.comments, self.mentions)
    }
}

const WORDS: [&str; 40] = [
    "report", "minister", "health", "vaccine", "policy", "market", "city", "budget", "school",
    "energy", "water", "court", "election", "strike", "border", "tax", "storm", "bank", "river",
    "hospital", "study", "data", "official", "council", "price", "workers", "farm", "police",
    "train", "bridge", "festival", "science", "doctor", "virus", "plan", "law", "road", "port",
    "museum", "weather",
];

fn sentence(rng: &mut ChaCha8Rng, words: usize, shout: bool) -> String {
    let mut s = String::new();
    for i in 0..words {
        let w = WORDS[rng.gen_range(0..WORDS.len())];
        if i > 0 {
            s.push(if !shout && rng.gen_bool(0.08) { ',' } else { ' ' });
            if s.ends_with(',') {
                s.push(' ');
            }
        }
        if shout && rng.gen_bool(0.35) {
            s.push_str(&w.to_uppercase());
        } else if i == 0 {
            let mut c = w.chars();
            s.extend(c.next().map(|c| c.to_ascii_uppercase()));
            s.push_str(c.as_str());
        } else {
            s.push_str(w);
        }
    }
    if shout {
        s.push_str(if rng.gen_bool(0.5) { "!!" } else { "?!" });
    } else {
        s.push('.');
    }
    s
}

fn text(rng: &mut ChaCha8Rng, lead: &str, sentences: usize, shout: bool) -> String {
    let mut parts = Vec::with_capacity(sentences + 1);
    if !lead.is_empty() {
        parts.push(lead.to_string());
    }
    for _ in 0..sentences {
        let n = rng.gen_range(4..12);
        parts.push(sentence(rng, n, shout));
    }
    parts.join(" ")
}

struct PlannedPost {
    entity: usize,
    fake: bool,
    sentiment: f64,
    timestamp: i64,
}

/// Generates a corpus and its ground truth.
pub fn generate(cfg: &SynthConfig) -> Result<(SynthCorpus, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_entities;
    let names: Vec<String> = (0..n).map(|i| format!("entity {i:04}")).collect();

    // Roles.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let disputed: HashSet<usize> = order[..cfg.n_disputed()].iter().copied().collect();
    order.shuffle(&mut rng);
    let major: HashSet<usize> = order[..cfg.n_major_entities].iter().copied().collect();

    // Post counts.
    let mut counts: Vec<usize> = (0..n)
        .map(|e| {
            if major.contains(&e) {
                rng.gen_range(cfg.major_posts.0..=cfg.major_posts.1)
            } else {
                2
            }
        })
        .collect();
    let minors: Vec<usize> = (0..n).filter(|e| !major.contains(e)).collect();
    let extra = cfg.n_posts.saturating_sub(counts.iter().sum());
    if !minors.is_empty() && extra > 0 {
        let weights: Vec<f64> = (0..minors.len()).map(|r| 1.0 / (r as f64 + 10.0)).collect();
        let pick = WeightedIndex::new(&weights).expect("positive weights");
        let mut ranked = minors.clone();
        ranked.shuffle(&mut rng);
        for _ in 0..extra {
            counts[ranked[pick.sample(&mut rng)]] += 1;
        }
    }

    let sources: Vec<Source> = (0..cfg.n_official_sources)
        .map(|i| (format!("src-o-{i:02}"), format!("Official page {i}"), SourceCategory::Official))
        .chain(
            (0..cfg.n_fake_sources)
                .map(|i| (format!("src-f-{i:02}"), format!("Alt page {i}"), SourceCategory::Fake)),
        )
        .map(|(id, name, category)| Source { id, name, category })
        .collect();

    // Posts, entity by entity.
    let mut planned: Vec<PlannedPost> = Vec::with_capacity(cfg.n_posts);
    let mut spread = BTreeMap::new();
    let mut lags = BTreeMap::new();
    let mut response_offset = vec![0.0; n];
    for e in 0..n {
        let is_d = disputed.contains(&e);
        let range = if is_d { cfg.disputed_spread } else { cfg.undisputed_spread };
        let w = rng.gen_range(range.0..=range.1);
        let c_max = (1.0 - w / 2.0).min(0.4);
        let c = rng.gen_range(-c_max..=c_max);
        let (lo, hi) = (c - w / 2.0, c + w / 2.0);
        spread.insert(names[e].clone(), w);
        let resp = if is_d { cfg.disputed_response } else { cfg.undisputed_response };
        response_offset[e] = rng.gen_range(resp.0..=resp.1) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };

        let t0 = EPOCH + rng.gen_range(0..90 * DAY);
        let total = counts[e];
        let n_fake = if is_d {
            let share = rng.gen_range(cfg.fake_share.0..=cfg.fake_share.1);
            ((share * total as f64).round() as usize).clamp(1, total - 1)
        } else {
            0
        };
        let lag = if is_d {
            let l = rng.gen_range(cfg.lag_hours.0..=cfg.lag_hours.1);
            lags.insert(names[e].clone(), l);
            (l * 3600.0).round() as i64
        } else {
            0
        };
        for k in 0..total {
            let fake = k >= total - n_fake;
            let first_official = k == 0;
            let first_fake = fake && k == total - n_fake;
            let (sentiment, timestamp) = if !is_d {
                let s = match k {
                    0 => hi,
                    1 => lo,
                    _ => rng.gen_range(lo..=hi),
                };
                let t = if first_official { t0 } else { t0 + rng.gen_range(0..30 * DAY) };
                (s, t)
            } else if !fake {
                let s = if first_official { hi } else { rng.gen_range(hi - 0.3 * w..=hi) };
                let t = if first_official { t0 } else { t0 + rng.gen_range(0..30 * DAY) };
                (s, t)
            } else {
                let s = if first_fake { lo } else { rng.gen_range(lo..=lo + 0.3 * w) };
                let t = if first_fake { t0 + lag } else { t0 + lag + rng.gen_range(0..30 * DAY) };
                (s, t)
            };
            planned.push(PlannedPost {
                entity: e,
                fake,
                sentiment: sentiment.clamp(-1.0, 1.0),
                timestamp,
            });
        }
    }

    let official_src: Vec<usize> = (0..cfg.n_official_sources).collect();
    let fake_src: Vec<usize> = (cfg.n_official_sources..sources.len()).collect();
    let like_o = LogNormal::new(4.0, 1.0).expect("valid");
    let sig = cfg.structural_signal;
    let like_f = LogNormal::new(4.0 + 0.5 * sig, 1.0).expect("valid");
    let share_o = LogNormal::new(2.0, 1.0).expect("valid");
    let share_f = LogNormal::new(2.0 + 0.8 * sig, 1.0).expect("valid");
    let mut posts = Vec::with_capacity(planned.len());
    let mut mentions = Vec::with_capacity(planned.len() * 2);
    for (i, p) in planned.iter().enumerate() {
        let id = format!("p{i:06}");
        let src = if p.fake {
            fake_src[rng.gen_range(0..fake_src.len())]
        } else {
            official_src[rng.gen_range(0..official_src.len())]
        };
        let shout = rng.gen_bool(if p.fake { 0.35 } else { 0.15 });
        let name = &names[p.entity];
        let lead = if shout { name.to_uppercase() } else { name.clone() };
        let n_sent = rng.gen_range(1..4);
        let body = text(&mut rng, &lead, n_sent, shout);
        let (likes, shares): (f64, f64) = if p.fake {
            (like_f.sample(&mut rng), share_f.sample(&mut rng))
        } else {
            (like_o.sample(&mut rng), share_o.sample(&mut rng))
        };
        let conf = if major.contains(&p.entity) {
            rng.gen_range(0.9..=1.0)
        } else {
            rng.gen_range(0.6..=1.0)
        };
        mentions.push(EntityMention {
            entity: name.clone(),
            post_id: id.clone(),
            confidence: conf,
        });
        if rng.gen_bool(cfg.secondary_mention_rate) {
            let other = rng.gen_range(0..n);
            if other != p.entity {
                mentions.push(EntityMention {
                    entity: names[other].clone(),
                    post_id: id.clone(),
                    confidence: rng.gen_range(0.2..0.59),
                });
            }
        }
        posts.push(Post {
            id,
            source_id: sources[src].id.clone(),
            timestamp: p.timestamp,
            text: body,
            sentiment: p.sentiment,
            likes: likes.round() as u64,
            shares: shares.round() as u64,
        });
    }

    // Users: cohort members first, then the general population.
    let n_cohort_users = disputed.len() * cfg.engaged_cohort;
    let user_id = |u: usize| format!("u{u:06}");
    let general: Vec<usize> = (n_cohort_users..cfg.n_users).collect();

    let mut cohort_plan: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut posts_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, p) in planned.iter().enumerate() {
        posts_of[p.entity].push(i);
    }
    let mut disputed_sorted: Vec<usize> = disputed.iter().copied().collect();
    disputed_sorted.sort_unstable();
    let mut next_cohort_user = 0;
    let mut cohort_comment_total = 0;
    for &e in &disputed_sorted {
        let members: Vec<usize> = (next_cohort_user..next_cohort_user + cfg.engaged_cohort).collect();
        next_cohort_user += cfg.engaged_cohort;
        for _ in &members {
            cohort_comment_total += rng.gen_range(cfg.cohort_comments.0..=cfg.cohort_comments.1);
        }
        cohort_plan.push((e, members));
    }

    // General comment slots.
    let general_budget = cfg.n_comments.saturating_sub(cohort_comment_total) as f64;
    let weight = |p: &PlannedPost| if p.fake { 1.0 + 0.5 * sig } else { 1.0 };
    let total_weight: f64 = planned.iter().map(weight).sum();
    let base = general_budget / total_weight.max(1.0);
    let mut slots: Vec<usize> = Vec::with_capacity(cfg.n_comments);
    for (i, p) in planned.iter().enumerate() {
        let lambda = base * weight(p);
        let k = if lambda > 0.0 {
            Poisson::new(lambda).expect("positive rate").sample(&mut rng) as usize
        } else {
            0
        };
        slots.extend(std::iter::repeat(i).take(k));
    }
    slots.shuffle(&mut rng);
    let mut comment_plan: Vec<(usize, usize)> = if general.is_empty() {
        Vec::new()
    } else {
        slots
            .iter()
            .enumerate()
            .map(|(j, &p)| (p, general[j % general.len()]))
            .collect()
    };
    let mut cohorts = BTreeMap::new();
    for (e, members) in &cohort_plan {
        let ps = &posts_of[*e];
        for &u in members {
            let k = rng.gen_range(cfg.cohort_comments.0..=cfg.cohort_comments.1);
            for _ in 0..k {
                comment_plan.push((ps[rng.gen_range(0..ps.len())], u));
            }
        }
        cohorts.insert(names[*e].clone(), members.iter().map(|&u| user_id(u)).collect());
    }
    comment_plan.sort_by_key(|&(p, u)| (p, u));

    let noise = Normal::new(0.0, 0.08).expect("valid");
    let mut comments = Vec::with_capacity(comment_plan.len());
    for (j, &(p, u)) in comment_plan.iter().enumerate() {
        let pp = &planned[p];
        let scored = major.contains(&pp.entity);
        let s = (pp.sentiment + response_offset[pp.entity] + noise.sample(&mut rng)).clamp(-1.0, 1.0);
        let shout = rng.gen_bool(if pp.fake { 0.25 } else { 0.15 });
        let n_sent = rng.gen_range(1..3);
        let body = text(&mut rng, "", n_sent, shout);
        let (likes, replies) = if pp.fake && rng.gen_bool(sig) {
            (rng.gen_range(0..8), rng.gen_range(0..4))
        } else {
            (rng.gen_range(0..5), rng.gen_range(0..2))
        };
        comments.push(Comment {
            id: format!("c{j:07}"),
            post_id: posts[p].id.clone(),
            user_id: user_id(u),
            timestamp: pp.timestamp + rng.gen_range(60..3 * DAY),
            text: body,
            sentiment: scored.then_some(s),
            likes,
            replies,
        });
    }

    // Engagement bookkeeping over primary posts.
    let mut user_total: HashMap<usize, usize> = HashMap::new();
    for &(_, u) in &comment_plan {
        *user_total.entry(u).or_default() += 1;
    }
    let mut per_entity: Vec<HashMap<usize, usize>> = vec![HashMap::new(); n];
    for &(p, u) in &comment_plan {
        *per_entity[planned[p].entity].entry(u).or_default() += 1;
    }
    let mut engaged_fraction = BTreeMap::new();
    for e in 0..n {
        let m = &per_entity[e];
        let engaged = m
            .iter()
            .filter(|(u, &c)| c as f64 > 0.95 * user_total[u] as f64)
            .count();
        let frac = if m.is_empty() { 0.0 } else { engaged as f64 / m.len() as f64 };
        engaged_fraction.insert(names[e].clone(), frac);
    }

    let truth = GroundTruth {
        disputed: disputed.iter().map(|&e| names[e].clone()).collect(),
        major: major.iter().map(|&e| names[e].clone()).collect(),
        entities: names,
        spread,
        cohorts,
        engaged_fraction,
        lags_hours: lags,
    };
    Ok((
        SynthCorpus {
            sources,
            posts,
            comments,
            mentions,
        },
        truth,
    ))
}

/// The ground truth `generate` would embed for this config.
pub fn ground_truth(cfg: &SynthConfig) -> Result<GroundTruth> {
    generate(cfg).map(|(_, t)| t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{disputed_entities, EntitySample, SampleName};

    #[test]
    fn deterministic_per_seed() {
        let cfg = SynthConfig::small(3);
        let (a, ta) = generate(&cfg).unwrap();
        let (b, tb) = generate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let (c, _) = generate(&SynthConfig::small(4)).unwrap();
        assert_ne!(a.posts, c.posts);
    }

    #[test]
    fn planted_disputes_match_corpus() {
        let cfg = SynthConfig::small(5);
        let (sc, truth) = generate(&cfg).unwrap();
        let corpus = sc.into_corpus().unwrap();
        let e1 = EntitySample::standard(&corpus, SampleName::E1);
        assert_eq!(e1.entities.len(), cfg.n_entities);
        assert_eq!(disputed_entities(&corpus, &e1), truth.disputed);
        let e2 = EntitySample::standard(&corpus, SampleName::E2);
        assert_eq!(e2.entities, truth.major);
        assert_eq!(truth.entities.len(), cfg.n_entities);
    }

    #[test]
    fn zero_disputed_fraction() {
        let cfg = SynthConfig {
            disputed_fraction: 0.0,
            ..SynthConfig::small(6)
        };
        let (sc, truth) = generate(&cfg).unwrap();
        assert!(truth.disputed.is_empty());
        let corpus = sc.into_corpus().unwrap();
        let e1 = EntitySample::standard(&corpus, SampleName::E1);
        assert!(disputed_entities(&corpus, &e1).is_empty());
    }

    #[test]
    fn infeasible_configs() {
        let cfg = SynthConfig {
            n_users: 10,
            ..SynthConfig::small(1)
        };
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
        let cfg = SynthConfig {
            disputed_fraction: 1.5,
            ..SynthConfig::small(1)
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = SynthConfig {
            n_posts: 100,
            ..SynthConfig::small(1)
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn lags_within_configured_range() {
        let truth = ground_truth(&SynthConfig::small(7)).unwrap();
        assert!(!truth.lags_hours.is_empty());
        assert!(truth.lags_hours.values().all(|&l| (1.0..=24.0).contains(&l)));
    }
}
