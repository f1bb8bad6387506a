//! Metric suite, rank AUC, balanced resampling, stratified splits and
//! greedy forward feature selection.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{fit, Dataset, ModelSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub fp_rate: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Indexed by class label, each computed with that class as positive.
    pub per_class: [ClassMetrics; 2],
    pub weighted_avg: ClassMetrics,
    pub accuracy: f64,
    pub mean_abs_err: f64,
    pub auc: Option<f64>,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub n: usize,
    /// Metrics that hit a zero denominator and were reported as 0.
    pub flags: Vec<String>,
}

fn div(num: usize, den: usize, name: &str, flags: &mut Vec<String>) -> f64 {
    if den == 0 {
        flags.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_metrics(
    labels: &[u8],
    predicted: &[u8],
    positive: u8,
    flags: &mut Vec<String>,
) -> (ClassMetrics, [usize; 4]) {
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (&l, &p) in labels.iter().zip(predicted) {
        match (l == positive, p == positive) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
        }
    }
    let precision = div(tp, tp + fp, &format!("precision[{positive}]"), flags);
    let recall = div(tp, tp + fn_, &format!("recall[{positive}]"), flags);
    let fp_rate = div(fp, fp + tn, &format!("fp_rate[{positive}]"), flags);
    let f1 = if precision > 0.0 && recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (
        ClassMetrics {
            precision,
            recall,
            fp_rate,
            f1,
        },
        [tp, tn, fp, fn_],
    )
}

/// Confusion counts and derived metrics; `auc` is left unset.
pub fn confusion_metrics(labels: &[u8], predicted: &[u8], positive_class: u8) -> Result<MetricsReport> {
    if labels.len() != predicted.len() {
        return Err(Error::Shape {
            expected: labels.len(),
            got: predicted.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("labels"));
    }
    let mut flags = Vec::new();
    let (m0, _) = class_metrics(labels, predicted, 0, &mut flags);
    let (m1, _) = class_metrics(labels, predicted, 1, &mut flags);
    let (_, [tp, tn, fp, fn_]) = class_metrics(labels, predicted, positive_class, &mut Vec::new());
    let n = labels.len();
    let support1 = labels.iter().filter(|&&l| l == 1).count() as f64 / n as f64;
    let w = |a: f64, b: f64| (1.0 - support1) * a + support1 * b;
    let weighted_avg = ClassMetrics {
        precision: w(m0.precision, m1.precision),
        recall: w(m0.recall, m1.recall),
        fp_rate: w(m0.fp_rate, m1.fp_rate),
        f1: w(m0.f1, m1.f1),
    };
    let errors = labels.iter().zip(predicted).filter(|(a, b)| a != b).count();
    Ok(MetricsReport {
        per_class: [m0, m1],
        weighted_avg,
        accuracy: (tp + tn) as f64 / n as f64,
        mean_abs_err: errors as f64 / n as f64,
        auc: None,
        tp,
        tn,
        fp,
        fn_,
        n,
        flags,
    })
}

/// Probability that a random positive (label 1) outscores a random
/// negative, ties counting one half.
pub fn roc_auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::Shape {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 {
        return Err(Error::UndefinedAuc(0));
    }
    if neg == 0 {
        return Err(Error::UndefinedAuc(1));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of mid-ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        let p = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += mid * p as f64;
        i = j + 1;
    }
    let (p, q) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

fn class_rows(labels: &[u8], rows: &[usize]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for &r in rows {
        out[labels[r] as usize].push(r);
    }
    out
}

/// Seeded stratified split of `rows` (indices into `labels`). The train
/// size is `round(fraction * n)`, spread over classes by largest remainder
/// with at least one row of each class on each side.
pub fn split_rows(
    labels: &[u8],
    rows: &[usize],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let mut strata = class_rows(labels, rows);
    for (c, s) in strata.iter().enumerate() {
        if s.len() < 2 {
            return Err(Error::Stratification {
                class: c as u8,
                count: s.len(),
            });
        }
    }
    let total = (train_fraction * rows.len() as f64).round() as usize;
    let quotas: Vec<f64> = strata.iter().map(|s| train_fraction * s.len() as f64).collect();
    let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut by_remainder = [0usize, 1];
    by_remainder.sort_by(|&a, &b| {
        (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor()))
    });
    let mut left = total.saturating_sub(take.iter().sum());
    for &c in by_remainder.iter().cycle().take(2 * left.max(1)) {
        if left == 0 {
            break;
        }
        if take[c] < strata[c].len() {
            take[c] += 1;
            left -= 1;
        }
    }
    for (t, s) in take.iter_mut().zip(&strata) {
        *t = (*t).clamp(1, s.len() - 1);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (s, &t) in strata.iter_mut().zip(&take) {
        s.shuffle(&mut rng);
        train.extend_from_slice(&s[..t]);
        test.extend_from_slice(&s[t..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_train_test(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let all: Vec<usize> = (0..data.len()).collect();
    let (tr, te) = split_rows(&data.y, &all, train_fraction, seed)?;
    Ok((data.subset(&tr), data.subset(&te)))
}

/// Undersamples the majority class to the minority count. Returned row
/// indices keep their original order.
pub fn rebalance_rows(labels: &[u8], seed: u64) -> Result<Vec<usize>> {
    let all: Vec<usize> = (0..labels.len()).collect();
    let [mut neg, mut pos] = class_rows(labels, &all);
    for (c, s) in [&neg, &pos].iter().enumerate() {
        if s.is_empty() {
            return Err(Error::Stratification {
                class: c as u8,
                count: 0,
            });
        }
    }
    let m = neg.len().min(pos.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let major = if neg.len() > pos.len() { &mut neg } else { &mut pos };
    if major.len() > m {
        major.shuffle(&mut rng);
        major.truncate(m);
    }
    let mut rows: Vec<usize> = neg.into_iter().chain(pos).collect();
    rows.sort_unstable();
    Ok(rows)
}

pub fn rebalance(data: &Dataset, seed: u64) -> Result<Dataset> {
    Ok(data.subset(&rebalance_rows(&data.y, seed)?))
}

/// Repeated rebalance -> split -> fit -> evaluate cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub repeats: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            repeats: 10,
            train_fraction: 0.6,
            seed: 0,
        }
    }
}

/// One cycle; the positive class for the confusion counts is 1.
fn cycle(data: &Dataset, spec: &ModelSpec, protocol: &Protocol, i: usize) -> Result<MetricsReport> {
    let seed = protocol.seed.wrapping_add(i as u64);
    let rows = rebalance_rows(&data.y, seed)?;
    let (train, test) = split_rows(&data.y, &rows, protocol.train_fraction, seed)?;
    let model = fit(spec, &data.subset(&train))?;
    let test = data.subset(&test);
    let scores = model.score(&test.x)?;
    let predicted = model.predict(&test.x)?;
    let mut report = confusion_metrics(&test.y, &predicted, 1)?;
    report.auc = Some(roc_auc(&test.y, &scores)?);
    Ok(report)
}

/// Runs the protocol and averages the per-cycle reports. Cycles run in
/// parallel but are aggregated in cycle order.
pub fn evaluate(data: &Dataset, spec: &ModelSpec, protocol: &Protocol) -> Result<MetricsReport> {
    if protocol.repeats == 0 {
        return Err(Error::Config("protocol repeats must be ≥ 1".into()));
    }
    let reports: Vec<MetricsReport> = (0..protocol.repeats)
        .into_par_iter()
        .map(|i| cycle(data, spec, protocol, i))
        .collect::<Result<_>>()?;
    Ok(MetricsReport::average(&reports))
}

impl MetricsReport {
    /// Field-wise mean of reals; counts are summed.
    pub fn average(reports: &[MetricsReport]) -> MetricsReport {
        let k = reports.len() as f64;
        let avg = |f: &dyn Fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
        let avg_cm = |g: &dyn Fn(&MetricsReport) -> ClassMetrics| ClassMetrics {
            precision: avg(&|r| g(r).precision),
            recall: avg(&|r| g(r).recall),
            fp_rate: avg(&|r| g(r).fp_rate),
            f1: avg(&|r| g(r).f1),
        };
        let aucs: Option<Vec<f64>> = reports.iter().map(|r| r.auc).collect();
        let mut flags: Vec<String> = reports.iter().flat_map(|r| r.flags.clone()).collect();
        flags.sort();
        flags.dedup();
        MetricsReport {
            per_class: [avg_cm(&|r| r.per_class[0]), avg_cm(&|r| r.per_class[1])],
            weighted_avg: avg_cm(&|r| r.weighted_avg),
            accuracy: avg(&|r| r.accuracy),
            mean_abs_err: avg(&|r| r.mean_abs_err),
            auc: aucs.map(|a| a.iter().sum::<f64>() / k),
            tp: reports.iter().map(|r| r.tp).sum(),
            tn: reports.iter().map(|r| r.tn).sum(),
            fp: reports.iter().map(|r| r.fp).sum(),
            fn_: reports.iter().map(|r| r.fn_).sum(),
            n: reports.iter().map(|r| r.n).sum(),
            flags,
        }
    }

    /// Rows: each class then the weighted average.
    pub fn write_table<W: Write>(&self, out: W, class_names: [&str; 2]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["class", "auc", "accuracy", "mae", "precision", "recall", "fp_rate", "f1"])?;
        let auc = self.auc.map(|a| a.to_string()).unwrap_or_default();
        let rows = [
            (class_names[0], self.per_class[0]),
            (class_names[1], self.per_class[1]),
            ("weighted_avg", self.weighted_avg),
        ];
        for (name, m) in rows {
            w.write_record([
                name.to_string(),
                auc.clone(),
                self.accuracy.to_string(),
                self.mean_abs_err.to_string(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.fp_rate.to_string(),
                m.f1.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn write_table_file(&self, path: &Path, class_names: [&str; 2]) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_table(f, class_names)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepwiseStep {
    pub feature: usize,
    pub name: String,
    /// Mean test AUC with all features selected so far.
    pub auc: f64,
}

/// Greedy forward selection on mean protocol AUC. Ties go to the lower
/// feature index; a candidate whose evaluation fails scores 0.
pub fn forward_stepwise(
    data: &Dataset,
    spec: &ModelSpec,
    max_features: usize,
    protocol: &Protocol,
) -> Result<Vec<StepwiseStep>> {
    if max_features > data.x.cols() {
        return Err(Error::Config(format!(
            "max_features {max_features} exceeds {} columns",
            data.x.cols()
        )));
    }
    let mut selected: Vec<usize> = Vec::new();
    let mut steps = Vec::new();
    for _ in 0..max_features {
        let candidates: Vec<usize> = (0..data.x.cols()).filter(|c| !selected.contains(c)).collect();
        let scores: Vec<f64> = candidates
            .par_iter()
            .map(|&c| {
                let mut cols = selected.clone();
                cols.push(c);
                evaluate(&data.select_columns(&cols), spec, protocol)
                    .ok()
                    .and_then(|r| r.auc)
                    .unwrap_or(0.0)
            })
            .collect();
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = i;
            }
        }
        let feature = candidates[best];
        selected.push(feature);
        steps.push(StepwiseStep {
            feature,
            name: data.columns[feature].clone(),
            auc: scores[best],
        });
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::Algorithm;
    use crate::linalg::Matrix;
    use proptest::prelude::*;

    #[test]
    fn hand_confusion_matrix() {
        let r = confusion_metrics(&[1, 1, 0, 0], &[1, 0, 0, 0], 1).unwrap();
        let m = r.per_class[1];
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.5);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.fp_rate, 0.0);
        assert_eq!(r.accuracy, 0.75);
        assert_eq!((r.tp, r.tn, r.fp, r.fn_, r.n), (1, 2, 0, 1, 4));
        assert_eq!(r.mean_abs_err, 0.25);
    }

    #[test]
    fn perfect_and_all_positive() {
        let r = confusion_metrics(&[1, 0, 1, 0], &[1, 0, 1, 0], 1).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.per_class[1].fp_rate, 0.0);
        assert_eq!(r.per_class[1].f1, 1.0);
        let r = confusion_metrics(&[1, 0, 1, 0], &[1, 1, 1, 1], 1).unwrap();
        assert_eq!(r.per_class[1].recall, 1.0);
        assert_eq!(r.per_class[1].fp_rate, 1.0);
        assert_eq!(r.accuracy, 0.5);
        assert!(r.flags.contains(&"precision[0]".to_string()));
    }

    #[test]
    fn auc_simple_cases() {
        assert_eq!(roc_auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0, 1, 0, 1], &[0.5; 4]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[1, 1, 0, 0], &[0.1, 0.2, 0.8, 0.9]).unwrap(), 0.0);
        assert!(matches!(roc_auc(&[1, 1], &[0.0, 1.0]), Err(Error::UndefinedAuc(1))));
        assert!(matches!(roc_auc(&[0, 0], &[0.0, 1.0]), Err(Error::UndefinedAuc(0))));
    }

    #[test]
    fn split_exact_counts() {
        let y = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let all: Vec<usize> = (0..10).collect();
        let (tr, te) = split_rows(&y, &all, 0.6, 3).unwrap();
        assert_eq!(tr.len(), 6);
        assert_eq!(te.len(), 4);
        assert_eq!(tr.iter().filter(|&&r| y[r] == 1).count(), 3);
        assert_eq!(split_rows(&y, &all, 0.6, 3).unwrap(), (tr, te));
        assert!(matches!(
            split_rows(&[0, 0, 1], &[0, 1, 2], 0.6, 0),
            Err(Error::Stratification { class: 1, count: 1 })
        ));
        assert!(split_rows(&y, &all, 1.0, 0).is_err());
    }

    #[test]
    fn rebalance_counts_and_seeds() {
        let y: Vec<u8> = (0..100).map(|i| (i < 20) as u8).collect();
        let a = rebalance_rows(&y, 1).unwrap();
        let b = rebalance_rows(&y, 2).unwrap();
        assert_eq!(a.len(), 40);
        assert_eq!(a.iter().filter(|&&r| y[r] == 1).count(), 20);
        assert!((0..20).all(|r| a.contains(&r)));
        assert_ne!(a, b);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        let bal = [0, 1, 0, 1];
        assert_eq!(rebalance_rows(&bal, 5).unwrap(), vec![0, 1, 2, 3]);
        assert!(rebalance_rows(&[1, 1], 0).is_err());
    }

    fn dataset(rows: Vec<Vec<f64>>, y: Vec<u8>) -> Dataset {
        let cols = (0..rows[0].len()).map(|c| format!("c{c}")).collect();
        Dataset::new(Matrix::from_rows(&rows), y, cols).unwrap()
    }

    #[test]
    fn stepwise_picks_oracle_column() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y: Vec<u8> = (0..80).map(|i| (i % 2) as u8).collect();
        let rows = y
            .iter()
            .map(|&l| vec![rng.gen::<f64>(), l as f64, rng.gen::<f64>()])
            .collect();
        let d = dataset(rows, y);
        let protocol = Protocol {
            repeats: 3,
            ..Default::default()
        };
        let steps = forward_stepwise(&d, &ModelSpec::new(Algorithm::Log), 2, &protocol).unwrap();
        assert_eq!(steps[0].feature, 1);
        assert_eq!(steps[0].auc, 1.0);
        assert!(forward_stepwise(&d, &ModelSpec::new(Algorithm::Log), 4, &protocol).is_err());
    }

    #[test]
    fn noise_auc_near_half() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y: Vec<u8> = (0..400).map(|i| (i % 2) as u8).collect();
        let rows = y.iter().map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        let d = dataset(rows, y);
        let r = evaluate(&d, &ModelSpec::new(Algorithm::Log), &Protocol::default()).unwrap();
        assert!((r.auc.unwrap() - 0.5).abs() < 0.1, "{:?}", r.auc);
    }

    #[test]
    fn table_csv_shape() {
        let r = confusion_metrics(&[1, 0], &[1, 0], 1).unwrap();
        let mut buf = Vec::new();
        r.write_table(&mut buf, ["Undisputed", "Disputed"]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 4);
        assert!(s.starts_with("class,auc,accuracy,mae,precision,recall,fp_rate,f1"));
    }

    proptest! {
        #[test]
        fn weighted_recall_equals_accuracy(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..200)) {
            let (l, p): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let r = confusion_metrics(&l, &p, 1).unwrap();
            prop_assert!((r.weighted_avg.recall - r.accuracy).abs() < 1e-12);
            prop_assert_eq!(r.tp + r.tn + r.fp + r.fn_, r.n);
        }

        #[test]
        fn auc_invariant_under_monotone_transform(
            rows in prop::collection::vec((0u8..2, -5.0f64..5.0), 2..100)
        ) {
            let (l, s): (Vec<u8>, Vec<f64>) = rows.into_iter().unzip();
            prop_assume!(l.contains(&0) && l.contains(&1));
            let t: Vec<f64> = s.iter().map(|v| (2.0 * v).exp() + 3.0).collect();
            prop_assert!((roc_auc(&l, &s).unwrap() - roc_auc(&l, &t).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn split_partitions_rows(y in prop::collection::vec(0u8..2, 4..100), seed in 0u64..1000) {
            let c1 = y.iter().filter(|&&v| v == 1).count();
            prop_assume!(c1 >= 2 && y.len() - c1 >= 2);
            let all: Vec<usize> = (0..y.len()).collect();
            let (tr, te) = split_rows(&y, &all, 0.6, seed).unwrap();
            let mut both: Vec<usize> = tr.iter().chain(&te).copied().collect();
            both.sort_unstable();
            prop_assert_eq!(both, all);
            let expected = (0.6 * y.len() as f64).round() as usize;
            prop_assert!((tr.len() as i64 - expected as i64).abs() <= 1);
        }

        #[test]
        fn rebalance_keeps_minority(y in prop::collection::vec(0u8..2, 2..100), seed in 0u64..100) {
            prop_assume!(y.contains(&0) && y.contains(&1));
            let rows = rebalance_rows(&y, seed).unwrap();
            let c1 = y.iter().filter(|&&v| v == 1).count();
            let minority = if c1 * 2 <= y.len() { 1 } else { 0 };
            let m = c1.min(y.len() - c1);
            prop_assert_eq!(rows.len(), 2 * m);
            for (i, &v) in y.iter().enumerate() {
                if v == minority {
                    prop_assert!(rows.contains(&i));
                }
            }
        }
    }
}
