//! Annotated corpus: sources, posts, comments and entity mentions loaded
//! from JSONL, validated, and indexed for the feature stages.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceCategory {
    Official,
    Fake,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub id: String,
    pub name: String,
    pub category: SourceCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub source_id: String,
    pub timestamp: i64,
    pub text: String,
    pub sentiment: f64,
    pub likes: u64,
    pub shares: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub post_id: String,
    pub user_id: String,
    pub timestamp: i64,
    pub text: String,
    pub sentiment: Option<f64>,
    pub likes: u64,
    pub replies: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMention {
    pub entity: String,
    pub post_id: String,
    pub confidence: f64,
}

/// Case-folds and collapses internal whitespace so that entity labels act
/// as canonical topic keys.
pub fn normalize_entity(label: &str) -> String {
    label
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Locations of the four corpus files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusPaths {
    pub sources: PathBuf,
    pub posts: PathBuf,
    pub comments: PathBuf,
    pub mentions: PathBuf,
}

impl CorpusPaths {
    /// Standard file names inside one directory.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        CorpusPaths {
            sources: dir.join("sources.jsonl"),
            posts: dir.join("posts.jsonl"),
            comments: dir.join("comments.jsonl"),
            mentions: dir.join("mentions.jsonl"),
        }
    }
}

/// Per-category breakdown of the corpus (pages, posts, likes, comments, shares).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub pages: usize,
    pub posts: usize,
    pub likes: u64,
    pub comments: usize,
    pub shares: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusCounts {
    pub official: CategoryCounts,
    pub fake: CategoryCounts,
    pub mentions: usize,
    pub users: usize,
}

/// Immutable, indexed corpus. Indices into the `posts`, `comments` and
/// `sources` vectors are stable for the lifetime of the value.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub sources: Vec<Source>,
    pub posts: Vec<Post>,
    pub comments: Vec<Comment>,
    pub mentions: Vec<EntityMention>,
    post_index: HashMap<String, usize>,
    post_source: Vec<usize>,
    comments_by_post: Vec<Vec<usize>>,
    comment_user: Vec<usize>,
    comment_post: Vec<usize>,
    user_ids: Vec<String>,
    comments_by_user: Vec<Vec<usize>>,
    mentions_by_post: Vec<Vec<usize>>,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: name.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

/// Writes one JSON object per line.
pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn check_unit_range(
    file: &Path,
    line: usize,
    field: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    range: &'static str,
) -> Result<()> {
    if value.is_finite() && (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(Error::Range {
            file: file.display().to_string(),
            line,
            field,
            value,
            range,
        })
    }
}

/// Loads and validates the four JSONL files.
pub fn load_corpus(paths: &CorpusPaths) -> Result<Corpus> {
    let sources: Vec<Source> = read_jsonl(&paths.sources)?.into_iter().map(|(_, s)| s).collect();

    let posts_raw: Vec<(usize, Post)> = read_jsonl(&paths.posts)?;
    for (line, p) in &posts_raw {
        check_unit_range(&paths.posts, *line, "sentiment", p.sentiment, -1.0, 1.0, "[-1, 1]")?;
    }
    let comments_raw: Vec<(usize, Comment)> = read_jsonl(&paths.comments)?;
    for (line, c) in &comments_raw {
        if let Some(s) = c.sentiment {
            check_unit_range(&paths.comments, *line, "sentiment", s, -1.0, 1.0, "[-1, 1]")?;
        }
    }
    let mentions_raw: Vec<(usize, EntityMention)> = read_jsonl(&paths.mentions)?;
    for (line, m) in &mentions_raw {
        check_unit_range(&paths.mentions, *line, "confidence", m.confidence, 0.0, 1.0, "[0, 1]")?;
    }

    Corpus::new(
        sources,
        posts_raw.into_iter().map(|(_, p)| p).collect(),
        comments_raw.into_iter().map(|(_, c)| c).collect(),
        mentions_raw.into_iter().map(|(_, m)| m).collect(),
    )
}

impl Corpus {
    /// Builds the indexes and checks referential integrity. Entity labels
    /// are normalized; duplicate (entity, post) pairs keep the highest
    /// confidence.
    pub fn new(
        sources: Vec<Source>,
        posts: Vec<Post>,
        comments: Vec<Comment>,
        mentions: Vec<EntityMention>,
    ) -> Result<Corpus> {
        let mut offenders = Vec::new();

        let mut source_index = HashMap::with_capacity(sources.len());
        for (i, s) in sources.iter().enumerate() {
            if source_index.insert(s.id.clone(), i).is_some() {
                offenders.push(format!("duplicate source id {}", s.id));
            }
        }

        let mut post_index = HashMap::with_capacity(posts.len());
        let mut post_source = Vec::with_capacity(posts.len());
        for (i, p) in posts.iter().enumerate() {
            if post_index.insert(p.id.clone(), i).is_some() {
                offenders.push(format!("duplicate post id {}", p.id));
            }
            match source_index.get(&p.source_id) {
                Some(&s) => post_source.push(s),
                None => {
                    offenders.push(format!("post {} -> unknown source {}", p.id, p.source_id));
                    post_source.push(usize::MAX);
                }
            }
        }

        let mut comments_by_post = vec![Vec::new(); posts.len()];
        let mut comment_user = Vec::with_capacity(comments.len());
        let mut comment_post = Vec::with_capacity(comments.len());
        let mut user_index: HashMap<String, usize> = HashMap::new();
        let mut user_ids = Vec::new();
        let mut comments_by_user: Vec<Vec<usize>> = Vec::new();
        let mut comment_ids = std::collections::HashSet::with_capacity(comments.len());
        for (i, c) in comments.iter().enumerate() {
            if !comment_ids.insert(c.id.as_str()) {
                offenders.push(format!("duplicate comment id {}", c.id));
            }
            match post_index.get(&c.post_id) {
                Some(&p) => {
                    comments_by_post[p].push(i);
                    comment_post.push(p);
                }
                None => {
                    offenders.push(format!("comment {} -> unknown post {}", c.id, c.post_id));
                    comment_post.push(usize::MAX);
                }
            }
            let u = *user_index.entry(c.user_id.clone()).or_insert_with(|| {
                user_ids.push(c.user_id.clone());
                comments_by_user.push(Vec::new());
                user_ids.len() - 1
            });
            comment_user.push(u);
            comments_by_user[u].push(i);
        }

        let mut dedup: BTreeMap<(String, usize), f64> = BTreeMap::new();
        for m in &mentions {
            match post_index.get(&m.post_id) {
                Some(&p) => {
                    let key = (normalize_entity(&m.entity), p);
                    let slot = dedup.entry(key).or_insert(m.confidence);
                    if m.confidence > *slot {
                        *slot = m.confidence;
                    }
                }
                None => offenders.push(format!(
                    "mention {} -> unknown post {}",
                    m.entity, m.post_id
                )),
            }
        }

        if !offenders.is_empty() {
            return Err(Error::Integrity { offenders });
        }

        let mut mentions_norm = Vec::with_capacity(dedup.len());
        let mut mentions_by_post = vec![Vec::new(); posts.len()];
        for ((entity, p), confidence) in dedup {
            mentions_by_post[p].push(mentions_norm.len());
            mentions_norm.push(EntityMention {
                entity,
                post_id: posts[p].id.clone(),
                confidence,
            });
        }

        Ok(Corpus {
            sources,
            posts,
            comments,
            mentions: mentions_norm,
            post_index,
            post_source,
            comments_by_post,
            comment_user,
            comment_post,
            user_ids,
            comments_by_user,
            mentions_by_post,
        })
    }

    pub fn post_idx(&self, id: &str) -> Option<usize> {
        self.post_index.get(id).copied()
    }

    pub fn post_category(&self, post: usize) -> SourceCategory {
        self.sources[self.post_source[post]].category
    }

    pub fn post_source(&self, post: usize) -> usize {
        self.post_source[post]
    }

    pub fn comments_of(&self, post: usize) -> &[usize] {
        &self.comments_by_post[post]
    }

    pub fn mentions_of(&self, post: usize) -> impl Iterator<Item = &EntityMention> {
        self.mentions_by_post[post].iter().map(move |&m| &self.mentions[m])
    }

    /// Dense user index of a comment's author.
    pub fn comment_user(&self, comment: usize) -> usize {
        self.comment_user[comment]
    }

    pub fn user_count(&self) -> usize {
        self.user_ids.len()
    }

    pub fn user_id(&self, user: usize) -> &str {
        &self.user_ids[user]
    }

    pub fn comments_by_user(&self, user: usize) -> &[usize] {
        &self.comments_by_user[user]
    }

    /// Post index of a comment.
    pub fn comment_post(&self, comment: usize) -> usize {
        self.comment_post[comment]
    }

    pub fn counts(&self) -> CorpusCounts {
        let mut out = CorpusCounts {
            mentions: self.mentions.len(),
            users: self.user_ids.len(),
            ..Default::default()
        };
        for s in &self.sources {
            match s.category {
                SourceCategory::Official => out.official.pages += 1,
                SourceCategory::Fake => out.fake.pages += 1,
            }
        }
        for (i, p) in self.posts.iter().enumerate() {
            let c = match self.post_category(i) {
                SourceCategory::Official => &mut out.official,
                SourceCategory::Fake => &mut out.fake,
            };
            c.posts += 1;
            c.likes += p.likes;
            c.shares += p.shares;
            c.comments += self.comments_by_post[i].len();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SampleName {
    E1,
    E2,
}

impl SampleName {
    /// Selection parameters: (min confidence, min posts, comment sentiment required).
    pub fn criteria(self) -> (f64, usize, bool) {
        match self {
            SampleName::E1 => (0.6, 1, false),
            SampleName::E2 => (0.9, 100, true),
        }
    }

    pub fn post_sample(self) -> PostSampleName {
        match self {
            SampleName::E1 => PostSampleName::P1,
            SampleName::E2 => PostSampleName::P2,
        }
    }
}

impl std::fmt::Display for SampleName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SampleName::E1 => "E1",
            SampleName::E2 => "E2",
        })
    }
}

impl std::str::FromStr for SampleName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e1" => Ok(SampleName::E1),
            "e2" => Ok(SampleName::E2),
            _ => Err(Error::Config(format!("unknown entity sample `{s}`"))),
        }
    }
}

/// A set of entities with the member posts that qualify each of them.
#[derive(Debug, Clone, PartialEq)]
pub struct EntitySample {
    pub name: SampleName,
    pub min_confidence: f64,
    pub entities: BTreeSet<String>,
    /// Member post indices per entity, ordered by post id.
    pub member_posts: BTreeMap<String, Vec<usize>>,
}

impl EntitySample {
    /// Selects with the standard parameters for `name`.
    pub fn standard(corpus: &Corpus, name: SampleName) -> EntitySample {
        let (conf, min_posts, req) = name.criteria();
        let mut s = select_entities(corpus, conf, min_posts, req);
        s.name = name;
        s
    }

    pub fn members(&self, entity: &str) -> &[usize] {
        self.member_posts.get(entity).map_or(&[], Vec::as_slice)
    }

    /// Sample entities contained in each post (qualifying mentions only).
    pub fn entities_by_post(&self) -> HashMap<usize, Vec<&str>> {
        let mut out: HashMap<usize, Vec<&str>> = HashMap::new();
        for (e, posts) in &self.member_posts {
            for &p in posts {
                out.entry(p).or_default().push(e.as_str());
            }
        }
        out
    }
}

/// Entities whose mentions at `min_confidence` or above occur in at least
/// `min_posts` posts. With `require_comment_sentiment`, an entity also needs
/// at least one member post carrying a sentiment-scored comment.
pub fn select_entities(
    corpus: &Corpus,
    min_confidence: f64,
    min_posts: usize,
    require_comment_sentiment: bool,
) -> EntitySample {
    let mut member_posts: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for m in &corpus.mentions {
        if m.confidence >= min_confidence {
            let p = corpus.post_idx(&m.post_id).expect("validated at load");
            member_posts.entry(m.entity.clone()).or_default().push(p);
        }
    }
    let has_scored = |p: usize| {
        corpus
            .comments_of(p)
            .iter()
            .any(|&c| corpus.comments[c].sentiment.is_some())
    };
    member_posts.retain(|_, posts| {
        posts.len() >= min_posts.max(1) && (!require_comment_sentiment || posts.iter().any(|&p| has_scored(p)))
    });
    for posts in member_posts.values_mut() {
        posts.sort_by(|&a, &b| corpus.posts[a].id.cmp(&corpus.posts[b].id));
    }
    let name = if min_confidence >= 0.9 && require_comment_sentiment {
        SampleName::E2
    } else {
        SampleName::E1
    };
    EntitySample {
        name,
        min_confidence,
        entities: member_posts.keys().cloned().collect(),
        member_posts,
    }
}

/// Entities with at least one member post from each source category.
pub fn disputed_entities(corpus: &Corpus, sample: &EntitySample) -> BTreeSet<String> {
    sample
        .member_posts
        .iter()
        .filter(|(_, posts)| {
            let mut official = false;
            let mut fake = false;
            for &p in posts.iter() {
                match corpus.post_category(p) {
                    SourceCategory::Official => official = true,
                    SourceCategory::Fake => fake = true,
                }
            }
            official && fake
        })
        .map(|(e, _)| e.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PostSampleName {
    P1,
    P2,
}

impl std::fmt::Display for PostSampleName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PostSampleName::P1 => "P1",
            PostSampleName::P2 => "P2",
        })
    }
}

impl std::str::FromStr for PostSampleName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Ok(PostSampleName::P1),
            "p2" => Ok(PostSampleName::P2),
            _ => Err(Error::Config(format!("unknown post sample `{s}`"))),
        }
    }
}

/// Posts containing at least one entity of an entity sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PostSample {
    pub name: PostSampleName,
    /// Post indices, ordered by post id.
    pub posts: Vec<usize>,
    /// 1 for posts from Fake sources, 0 otherwise; parallel to `posts`.
    pub labels: Vec<u8>,
}

impl PostSample {
    pub fn ids<'a>(&'a self, corpus: &'a Corpus) -> BTreeSet<&'a str> {
        self.posts.iter().map(|&p| corpus.posts[p].id.as_str()).collect()
    }
}

pub fn posts_for_entities(corpus: &Corpus, sample: &EntitySample) -> PostSample {
    let set: BTreeSet<usize> = sample.member_posts.values().flatten().copied().collect();
    let mut posts: Vec<usize> = set.into_iter().collect();
    posts.sort_by(|&a, &b| corpus.posts[a].id.cmp(&corpus.posts[b].id));
    let labels = posts
        .iter()
        .map(|&p| u8::from(corpus.post_category(p) == SourceCategory::Fake))
        .collect();
    PostSample {
        name: sample.name.post_sample(),
        posts,
        labels,
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    pub fn source(id: &str, category: SourceCategory) -> Source {
        Source {
            id: id.into(),
            name: id.to_uppercase(),
            category,
        }
    }

    pub fn post(id: &str, source: &str, ts: i64, sentiment: f64) -> Post {
        Post {
            id: id.into(),
            source_id: source.into(),
            timestamp: ts,
            text: format!("Post {id}."),
            sentiment,
            likes: 0,
            shares: 0,
        }
    }

    pub fn comment(id: &str, post: &str, user: &str, sentiment: Option<f64>) -> Comment {
        Comment {
            id: id.into(),
            post_id: post.into(),
            user_id: user.into(),
            timestamp: 0,
            text: "ok".into(),
            sentiment,
            likes: 0,
            replies: 0,
        }
    }

    pub fn mention(entity: &str, post: &str, confidence: f64) -> EntityMention {
        EntityMention {
            entity: entity.into(),
            post_id: post.into(),
            confidence,
        }
    }
}
