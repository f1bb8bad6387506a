//! Entity-level benchmark: dataset construction, six-way classifier
//! comparison, best-pair selection and disputed predictions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::{fit, Algorithm, Dataset, ModelSpec, TrainedModel};
use crate::corpus::SampleName;
use crate::error::{Error, Result};
use crate::eval::{evaluate, rebalance, MetricsReport, Protocol};
use crate::features::EntityFeatures;
use crate::linalg::Matrix;

pub const E1_COLUMNS: [&str; 8] = [
    "log_occurrences",
    "min_post_sentiment",
    "max_post_sentiment",
    "mean_post_sentiment",
    "std_post_sentiment",
    "presentation_distance",
    "negative_posts",
    "controversy",
];

pub const E2_EXTRA_COLUMNS: [&str; 12] = [
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
];

pub fn entity_columns(sample: SampleName) -> Vec<String> {
    let mut cols: Vec<String> = E1_COLUMNS.iter().map(|s| s.to_string()).collect();
    if sample == SampleName::E2 {
        cols.extend(E2_EXTRA_COLUMNS.iter().map(|s| s.to_string()));
    }
    cols
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn entity_row(f: &EntityFeatures, sample: SampleName) -> std::result::Result<Vec<f64>, &'static str> {
    let ps = f.post_sentiment;
    let mut row = vec![
        (f.occurrences as f64).ln_1p(),
        ps.min,
        ps.max,
        ps.mean,
        ps.std,
        f.presentation_distance,
        f.negative_posts as f64,
        flag(f.controversy.ok_or("controversy")?),
    ];
    if sample == SampleName::E2 {
        let cs = f.comment_sentiment.ok_or("comment sentiment")?;
        let rd = f.response_distance.ok_or("response distance")?;
        row.extend([
            cs.min,
            cs.max,
            cs.mean,
            cs.std,
            rd.per_post.min,
            rd.per_post.max,
            rd.per_post.mean,
            rd.per_post.std,
            f.comments_count as f64,
            f.negative_comments as f64,
            flag(f.perception.ok_or("perception")?),
            flag(f.captivation.ok_or("captivation")?),
        ]);
    }
    Ok(row)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityDataset {
    pub data: Dataset,
    /// Entity label of each row.
    pub entities: Vec<String>,
    /// Entities left out, with the first missing feature.
    pub excluded: Vec<(String, String)>,
}

/// One row per entity with the fixed column order of [`entity_columns`];
/// the label is the disputed flag. Rows missing a mandatory feature are
/// excluded and logged.
pub fn build_entity_dataset(features: &[EntityFeatures], sample: SampleName) -> Result<EntityDataset> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut entities = Vec::new();
    let mut excluded = Vec::new();
    for f in features {
        match entity_row(f, sample) {
            Ok(r) => {
                rows.push(r);
                y.push(u8::from(f.disputed));
                entities.push(f.entity.clone());
            }
            Err(missing) => {
                log::warn!("{sample}: excluding `{}` (missing {missing})", f.entity);
                excluded.push((f.entity.clone(), missing.to_string()));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("entity rows with every mandatory feature"));
    }
    Ok(EntityDataset {
        data: Dataset::new(Matrix::from_rows(&rows), y, entity_columns(sample))?,
        entities,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub algorithm: Algorithm,
    pub report: Option<MetricsReport>,
    pub error: Option<String>,
}

/// Evaluates every spec under the protocol. A failing algorithm is
/// recorded with its error and does not abort the others.
pub fn run_benchmark(data: &Dataset, specs: &[ModelSpec], protocol: &Protocol) -> Vec<BenchmarkEntry> {
    specs
        .iter()
        .map(|spec| match evaluate(data, spec, protocol) {
            Ok(r) => BenchmarkEntry {
                algorithm: spec.algorithm,
                report: Some(r),
                error: None,
            },
            Err(e) => {
                log::warn!("{} failed: {e}", spec.algorithm);
                BenchmarkEntry {
                    algorithm: spec.algorithm,
                    report: None,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect()
}

fn name_rank(a: Algorithm) -> usize {
    Algorithm::ALL.iter().position(|&b| b == a).unwrap_or(usize::MAX)
}

/// Top two by AUC, then accuracy, then the fixed algorithm order.
pub fn select_best_models(entries: &[BenchmarkEntry]) -> Result<(Algorithm, Algorithm)> {
    let mut ok: Vec<(Algorithm, f64, f64)> = entries
        .iter()
        .filter_map(|e| {
            let r = e.report.as_ref()?;
            Some((e.algorithm, r.auc.unwrap_or(0.0), r.accuracy))
        })
        .collect();
    if ok.len() < 2 {
        return Err(Error::Config(format!(
            "need at least two successful models, got {}",
            ok.len()
        )));
    }
    ok.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(b.2.total_cmp(&a.2))
            .then(name_rank(a.0).cmp(&name_rank(b.0)))
    });
    Ok((ok[0].0, ok[1].0))
}

/// Refits a model on the rebalanced full dataset.
pub fn fit_final(data: &Dataset, spec: &ModelSpec, seed: u64) -> Result<TrainedModel> {
    fit(spec, &rebalance(data, seed)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityPrediction {
    pub entity: String,
    pub pred_a: u8,
    pub pred_b: u8,
    pub score_a: f64,
    pub score_b: f64,
    pub model_a: Algorithm,
    pub model_b: Algorithm,
}

/// Applies both models to every row of the dataset.
pub fn predict_disputed(
    data: &EntityDataset,
    model_a: &TrainedModel,
    model_b: &TrainedModel,
) -> Result<Vec<EntityPrediction>> {
    for m in [model_a, model_b] {
        if m.columns != data.data.columns {
            return Err(Error::Shape {
                expected: m.columns.len(),
                got: data.data.columns.len(),
            });
        }
    }
    if model_a.spec.algorithm == model_b.spec.algorithm {
        return Err(Error::Config("the two models must use different algorithms".into()));
    }
    let x = &data.data.x;
    let (sa, pa) = (model_a.score(x)?, model_a.predict(x)?);
    let (sb, pb) = (model_b.score(x)?, model_b.predict(x)?);
    Ok(data
        .entities
        .iter()
        .enumerate()
        .map(|(i, e)| EntityPrediction {
            entity: e.clone(),
            pred_a: pa[i],
            pred_b: pb[i],
            score_a: sa[i],
            score_b: sb[i],
            model_a: model_a.spec.algorithm,
            model_b: model_b.spec.algorithm,
        })
        .collect())
}

pub fn write_predictions_csv(path: &Path, preds: &[EntityPrediction]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let (a, b) = preds
        .first()
        .map(|p| (p.model_a.name().to_lowercase(), p.model_b.name().to_lowercase()))
        .unwrap_or_else(|| ("a".into(), "b".into()));
    w.write_record([
        "entity".to_string(),
        format!("pred_{a}"),
        format!("pred_{b}"),
        format!("score_{a}"),
        format!("score_{b}"),
    ])?;
    for p in preds {
        w.write_record([
            p.entity.clone(),
            p.pred_a.to_string(),
            p.pred_b.to_string(),
            p.score_a.to_string(),
            p.score_b.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::ClassMetrics;
    use crate::features::ResponseDistance;
    use crate::stats::Summary;

    fn report(auc: f64, accuracy: f64) -> MetricsReport {
        MetricsReport {
            per_class: [ClassMetrics::default(); 2],
            weighted_avg: ClassMetrics::default(),
            accuracy,
            mean_abs_err: 1.0 - accuracy,
            auc: Some(auc),
            tp: 0,
            tn: 0,
            fp: 0,
            fn_: 0,
            n: 0,
            flags: vec![],
        }
    }

    fn entry(a: Algorithm, auc: f64, acc: f64) -> BenchmarkEntry {
        BenchmarkEntry {
            algorithm: a,
            report: Some(report(auc, acc)),
            error: None,
        }
    }

    #[test]
    fn best_models_follow_tie_breaks() {
        let mut es = vec![
            entry(Algorithm::Log, 0.73, 0.77),
            entry(Algorithm::Nn, 0.68, 0.72),
            entry(Algorithm::Svm, 0.68, 0.71),
            entry(Algorithm::Knn, 0.60, 0.60),
        ];
        assert_eq!(select_best_models(&es).unwrap(), (Algorithm::Log, Algorithm::Nn));
        es.reverse();
        assert_eq!(select_best_models(&es).unwrap(), (Algorithm::Log, Algorithm::Nn));

        let tied = vec![entry(Algorithm::Dt, 0.7, 0.7), entry(Algorithm::Svm, 0.7, 0.7)];
        assert_eq!(select_best_models(&tied).unwrap(), (Algorithm::Svm, Algorithm::Dt));

        let one = vec![
            entry(Algorithm::Log, 0.7, 0.7),
            BenchmarkEntry {
                algorithm: Algorithm::Nn,
                report: None,
                error: Some("x".into()),
            },
        ];
        assert!(select_best_models(&one).is_err());
    }

    fn features(entity: &str, with_comments: bool) -> EntityFeatures {
        let s = Summary {
            min: -0.5,
            max: 0.5,
            mean: 0.0,
            std: 0.5,
        };
        EntityFeatures {
            entity: entity.into(),
            occurrences: 3,
            post_sentiment: s,
            presentation_distance: 1.0,
            negative_posts: 1,
            comment_sentiment: with_comments.then_some(s),
            response_distance: with_comments.then_some(ResponseDistance {
                global: 0.1,
                per_post: s,
            }),
            comments_count: 4,
            negative_comments: 2,
            engaged_fraction: 0.5,
            controversy: Some(true),
            perception: with_comments.then_some(false),
            captivation: Some(true),
            disputed: true,
            missing: vec![],
        }
    }

    #[test]
    fn dataset_widths_and_exclusion() {
        let fs = vec![features("a", true), features("b", false)];
        let e1 = build_entity_dataset(&fs, SampleName::E1).unwrap();
        assert_eq!(e1.data.x.cols(), 8);
        assert_eq!(e1.data.len(), 2);
        let e2 = build_entity_dataset(&fs, SampleName::E2).unwrap();
        assert_eq!(e2.data.x.cols(), 20);
        assert_eq!(e2.entities, vec!["a"]);
        assert_eq!(e2.excluded.len(), 1);
        assert!((e2.data.x.get(0, 0) - 4f64.ln()).abs() < 1e-15);
    }
}
