use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;

use fakewatch_core::corpus::{load_corpus, SourceCategory};
use fakewatch_core::earlywarning::build_entity_dataset;
use fakewatch_core::eval::{evaluate, Protocol};
use fakewatch_core::features::entity_features;
use fakewatch_core::pipeline::{analyse_sample, RunConfig};
use fakewatch_core::synth::{generate, SynthConfig};
use fakewatch_core::{Algorithm, Dataset, EntitySample, ModelSpec, SampleName};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn same_seed_writes_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SynthConfig::small(9);
    for name in ["a", "b"] {
        let (c, t) = generate(&cfg).unwrap();
        c.write(&tmp.path().join(name), &t).unwrap();
    }
    let (c, t) = generate(&SynthConfig::small(10)).unwrap();
    c.write(&tmp.path().join("c"), &t).unwrap();
    for f in ["sources.jsonl", "posts.jsonl", "comments.jsonl", "mentions.jsonl", "truth.json"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
        if f != "sources.jsonl" {
            assert_ne!(a, fs::read(tmp.path().join("c").join(f)).unwrap(), "{f}");
        }
    }
}

#[test]
fn generated_corpus_loads_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let (c, t) = generate(&SynthConfig::small(1)).unwrap();
    let (n_posts, n_comments) = (c.posts.len(), c.comments.len());
    let paths = c.write(tmp.path(), &t).unwrap();
    let corpus = load_corpus(&paths).unwrap();
    assert_eq!(corpus.posts.len(), n_posts);
    assert_eq!(corpus.comments.len(), n_comments);
}

#[test]
fn presentation_gap_matches_configuration() {
    let cfg = SynthConfig::default();
    let (c, _) = generate(&cfg).unwrap();
    let corpus = c.into_corpus().unwrap();
    let sample = EntitySample::standard(&corpus, SampleName::E1);
    let fs = entity_features(&corpus, &sample, None);
    let mean = |d: bool| {
        let v: Vec<f64> = fs.iter().filter(|f| f.disputed == d).map(|f| f.presentation_distance).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let mid = |r: (f64, f64)| (r.0 + r.1) / 2.0;
    let configured = mid(cfg.disputed_spread) - mid(cfg.undisputed_spread);
    let gap = mean(true) - mean(false);
    assert!((gap - configured).abs() <= 0.05, "gap {gap} vs {configured}");
}

#[test]
fn engaged_fraction_matches_generator() {
    let (c, truth) = generate(&SynthConfig::small(4)).unwrap();
    let corpus = c.into_corpus().unwrap();
    let sample = EntitySample::standard(&corpus, SampleName::E1);
    let fs = entity_features(&corpus, &sample, None);
    assert!(!fs.is_empty());
    for f in &fs {
        let want = truth.engaged_fraction[&f.entity];
        assert!((f.engaged_fraction - want).abs() < 1e-12, "{}: {} vs {want}", f.entity, f.engaged_fraction);
    }
    assert!(fs.iter().any(|f| f.engaged_fraction > 0.0));
}

/// Entity features recomputed straight from the raw records.
#[test]
fn entity_features_match_naive_recomputation() {
    let (c, _) = generate(&SynthConfig::small(2)).unwrap();
    let official: BTreeSet<&str> = c
        .sources
        .iter()
        .filter(|s| s.category == SourceCategory::Official)
        .map(|s| s.id.as_str())
        .collect();
    let post_by_id: HashMap<&str, _> = c.posts.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut best: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for m in &c.mentions {
        let e = best.entry((m.entity.as_str(), m.post_id.as_str())).or_insert(f64::MIN);
        *e = e.max(m.confidence);
    }
    let mut members: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (&(e, p), &conf) in &best {
        if conf >= 0.6 {
            members.entry(e).or_default().push(p);
        }
    }
    let mut user_total: HashMap<&str, usize> = HashMap::new();
    let mut on_post: HashMap<&str, Vec<&str>> = HashMap::new();
    for cm in &c.comments {
        *user_total.entry(cm.user_id.as_str()).or_default() += 1;
        on_post.entry(cm.post_id.as_str()).or_default().push(cm.user_id.as_str());
    }

    let corpus = c.clone().into_corpus().unwrap();
    let sample = EntitySample::standard(&corpus, SampleName::E1);
    let fs = entity_features(&corpus, &sample, None);
    assert_eq!(fs.len(), members.len());
    for f in &fs {
        let posts = &members[f.entity.as_str()];
        let sents: Vec<f64> = posts.iter().map(|p| post_by_id[p].sentiment).collect();
        let hi = sents.iter().copied().fold(f64::MIN, f64::max);
        let lo = sents.iter().copied().fold(f64::MAX, f64::min);
        assert_eq!(f.occurrences, posts.len());
        assert!((f.presentation_distance - (hi - lo)).abs() < 1e-12);
        assert_eq!(f.negative_posts, sents.iter().filter(|&&s| s < 0.0).count());
        let n_off = posts.iter().filter(|p| official.contains(post_by_id[*p].source_id.as_str())).count();
        assert_eq!(f.disputed, n_off > 0 && n_off < posts.len());

        let mut per_user: HashMap<&str, usize> = HashMap::new();
        for p in posts {
            for u in on_post.get(p).into_iter().flatten() {
                *per_user.entry(u).or_default() += 1;
            }
        }
        let engaged = per_user.iter().filter(|(u, &n)| n as f64 > 0.95 * user_total[*u] as f64).count();
        let want = if per_user.is_empty() { 0.0 } else { engaged as f64 / per_user.len() as f64 };
        assert!((f.engaged_fraction - want).abs() < 1e-12);
        assert_eq!(f.comments_count, per_user.values().sum::<usize>());
    }
}

#[test]
fn permuted_labels_give_chance_auc() {
    let (c, _) = generate(&SynthConfig::default()).unwrap();
    let corpus = c.into_corpus().unwrap();
    let analysis = analyse_sample(&corpus, SampleName::E1, &RunConfig::default()).unwrap();
    let ds = build_entity_dataset(&analysis.features, SampleName::E1).unwrap();
    let mut y = ds.data.y.clone();
    y.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
    let data = Dataset::new(ds.data.x.clone(), y, ds.data.columns.clone()).unwrap();
    let protocol = Protocol::default();
    for a in Algorithm::ALL {
        let r = evaluate(&data, &ModelSpec::new(a), &protocol).unwrap();
        let auc = r.auc.unwrap();
        assert!((0.4..=0.6).contains(&auc), "{a}: {auc}");
    }
}

#[test]
fn dominant_structural_signal_ranks_structural_feature_first() {
    use fakewatch_core::corpus::posts_for_entities;
    use fakewatch_core::eval::forward_stepwise;
    use fakewatch_core::fakenews::{build_post_dataset, STRUCTURAL};
    use fakewatch_core::pipeline::early_warning;

    let cfg = RunConfig {
        synth: Some(SynthConfig {
            structural_signal: 1.0,
            ..SynthConfig::default()
        }),
        algorithms: vec![Algorithm::Lin, Algorithm::Log],
        repeats: 3,
        entity_stepwise_features: 1,
        ..RunConfig::default()
    };
    let (c, _) = generate(cfg.synth.as_ref().unwrap()).unwrap();
    let corpus = c.into_corpus().unwrap();
    let analysis = analyse_sample(&corpus, SampleName::E1, &cfg).unwrap();
    let ew = early_warning(&analysis, &cfg, None).unwrap();
    let posts = posts_for_entities(&corpus, &analysis.sample);
    let ds = build_post_dataset(&corpus, &posts, &analysis.sample, &analysis.features, &ew.predictions).unwrap();
    let protocol = Protocol { repeats: 3, ..Protocol::default() };
    let steps = forward_stepwise(&ds.data, &ModelSpec::new(Algorithm::Log), 1, &protocol).unwrap();
    assert!(STRUCTURAL.contains(&steps[0].name.as_str()), "{}", steps[0].name);
}
