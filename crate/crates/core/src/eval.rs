//! Stratified splits, classification metrics, and the unseen-topic protocol.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{by_name, ClassLabel, Document, Manifest};
use crate::error::{Error, Result};
use crate::features::VectorizerKind;
use crate::models::{ModelArtifact, ModelKind, TrainConfig};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stratify {
    Class,
    ClassTopic,
}

impl std::str::FromStr for Stratify {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "class" => Ok(Stratify::Class),
            "class-topic" | "class+topic" => Ok(Stratify::ClassTopic),
            _ => Err(Error::invalid(format!("unknown stratification {s:?} (expected class or class-topic)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    /// Ids in manifest order.
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    /// Training fraction.
    pub ratio: f64,
    pub stratify: Stratify,
    pub seed: u64,
}

impl Split {
    /// (train, test) sub-manifests.
    pub fn apply(&self, m: &Manifest) -> (Manifest, Manifest) {
        let train: HashSet<&str> = self.train_ids.iter().map(String::as_str).collect();
        let test: HashSet<&str> = self.test_ids.iter().map(String::as_str).collect();
        (m.filter(|d| train.contains(d.id.as_str())), m.filter(|d| test.contains(d.id.as_str())))
    }
}

/// Stratified train/test split.
///
/// The test set holds round(N * (1 - ratio)) documents. Each stratum gets
/// floor(n_s * (1 - ratio)) test documents, and the remaining slots go to
/// the strata with the largest fractional remainders (ties in stratum
/// order), so every stratum is within one document of its exact share.
/// Strata are shuffled in key order with one ChaCha8 stream.
pub fn split(m: &Manifest, ratio: f64, stratify: Stratify, seed: u64) -> Result<Split> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let mut strata: BTreeMap<(ClassLabel, String), Vec<usize>> = BTreeMap::new();
    for (i, d) in m.documents.iter().enumerate() {
        let topic = match stratify {
            Stratify::Class => String::new(),
            Stratify::ClassTopic => d.topic.clone(),
        };
        strata.entry((d.label, topic)).or_default().push(i);
    }
    for ((label, topic), idx) in &strata {
        if idx.len() < 2 {
            return Err(Error::invalid(format!(
                "stratum {label}{}{topic} has {} document(s); at least 2 are needed",
                if topic.is_empty() { "" } else { "/" },
                idx.len()
            )));
        }
    }

    let test_share = 1.0 - ratio;
    let total_test = (m.len() as f64 * test_share).round() as usize;
    let exact: Vec<f64> = strata.values().map(|v| v.len() as f64 * test_share).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = quota.iter().sum();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &s in order.iter().take(total_test.saturating_sub(assigned)) {
        quota[s] += 1;
    }

    let mut r = rng::seeded(seed);
    let mut is_test = vec![false; m.len()];
    for (idx, &q) in strata.values().zip(&quota) {
        for j in rng::sample_indices(&mut r, idx.len(), q) {
            is_test[idx[j]] = true;
        }
    }
    let (mut train_ids, mut test_ids) = (Vec::new(), Vec::new());
    for (d, &t) in m.documents.iter().zip(&is_test) {
        if t { &mut test_ids } else { &mut train_ids }.push(d.id.clone());
    }
    Ok(Split {
        train_ids,
        test_ids,
        ratio,
        stratify,
        seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(with = "by_name")]
    pub per_class: BTreeMap<ClassLabel, ClassMetrics>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    /// Rows are true classes, columns predictions, both in code order.
    pub confusion: [[u64; 4]; 4],
    pub n: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics of a confusion matrix (rows true, columns predicted).
///
/// Division by zero yields 0. F1 is computed as 2tp / (2tp + fp + fn).
/// Macro-F1 averages over classes occurring in the truth or the
/// predictions; weighted-F1 weights each class by its support. Sums run in
/// class-code order.
pub fn metrics_from_confusion(confusion: [[u64; 4]; 4]) -> Result<MetricsReport> {
    let n: u64 = confusion.iter().flatten().sum();
    if n == 0 {
        return Err(Error::invalid("metrics need at least one prediction"));
    }
    let mut per_class = BTreeMap::new();
    let mut correct = 0;
    let mut macro_sum = 0.0;
    let mut present = 0;
    let mut weighted_sum = 0.0;
    for c in ClassLabel::ALL {
        let k = c.index();
        let tp = confusion[k][k];
        let support: u64 = confusion[k].iter().sum();
        let predicted: u64 = confusion.iter().map(|row| row[k]).sum();
        let fp = predicted - tp;
        let fneg = support - tp;
        let f1 = ratio(2 * tp, 2 * tp + fp + fneg);
        correct += tp;
        if support + predicted > 0 {
            macro_sum += f1;
            present += 1;
        }
        weighted_sum += support as f64 * f1;
        per_class.insert(
            c,
            ClassMetrics {
                precision: ratio(tp, predicted),
                recall: ratio(tp, support),
                f1,
                support,
            },
        );
    }
    Ok(MetricsReport {
        per_class,
        accuracy: ratio(correct, n),
        macro_f1: macro_sum / present as f64,
        weighted_f1: weighted_sum / n as f64,
        confusion,
        n,
    })
}

pub fn confusion_matrix(y_true: &[ClassLabel], y_pred: &[ClassLabel]) -> Result<[[u64; 4]; 4]> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut m = [[0u64; 4]; 4];
    for (t, p) in y_true.iter().zip(y_pred) {
        m[t.index()][p.index()] += 1;
    }
    Ok(m)
}

pub fn compute_metrics(y_true: &[ClassLabel], y_pred: &[ClassLabel]) -> Result<MetricsReport> {
    metrics_from_confusion(confusion_matrix(y_true, y_pred)?)
}

impl MetricsReport {
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| class | precision | recall | F1 | support |\n|---|---:|---:|---:|---:|\n");
        for (c, m) in &self.per_class {
            let _ = writeln!(s, "| {c} | {:.4} | {:.4} | {:.4} | {} |", m.precision, m.recall, m.f1, m.support);
        }
        let _ = writeln!(
            s,
            "\naccuracy {:.4}, macro-F1 {:.4}, weighted-F1 {:.4} (n = {})",
            self.accuracy, self.macro_f1, self.weighted_f1, self.n
        );
        s.push_str("\nconfusion (rows true, columns predicted)\n\n|  |");
        for c in ClassLabel::ALL {
            let _ = write!(s, " {c} |");
        }
        s.push_str("\n|---|---:|---:|---:|---:|\n");
        for c in ClassLabel::ALL {
            let _ = write!(s, "| {c} |");
            for v in self.confusion[c.index()] {
                let _ = write!(s, " {v} |");
            }
            s.push('\n');
        }
        s
    }
}

/// Argmax predictions of a saved model over a manifest.
pub fn evaluate(model: &ModelArtifact, m: &Manifest) -> Result<MetricsReport> {
    let (truth, pred) = predict_all(model, &m.documents)?;
    compute_metrics(&truth, &pred)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub model: ModelKind,
    pub report: MetricsReport,
}

/// Train each model kind on `train` with a shared vectorizer setting and
/// score it on `test`.
pub fn benchmark(
    train: &Manifest,
    test: &Manifest,
    vectorizer: VectorizerKind,
    max_features: usize,
    base: &TrainConfig,
    models: &[ModelKind],
) -> Result<Vec<BenchmarkRow>> {
    models
        .iter()
        .map(|&model| {
            let cfg = TrainConfig { model, ..base.clone() };
            let artifact = ModelArtifact::fit(train, vectorizer, max_features, &cfg)?;
            Ok(BenchmarkRow {
                model,
                report: evaluate(&artifact, test)?,
            })
        })
        .collect()
}

pub fn benchmark_markdown(rows: &[BenchmarkRow]) -> String {
    let mut s = String::from("| model | accuracy | macro-F1 | weighted-F1 |\n|---|---:|---:|---:|\n");
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {:.4} | {:.4} | {:.4} |",
            r.model, r.report.accuracy, r.report.macro_f1, r.report.weighted_f1
        );
    }
    s
}

fn predict_all(model: &ModelArtifact, docs: &[Document]) -> Result<(Vec<ClassLabel>, Vec<ClassLabel>)> {
    let mut truth = Vec::with_capacity(docs.len());
    let mut pred = Vec::with_capacity(docs.len());
    for d in docs {
        truth.push(d.label);
        pred.push(model.score_text(d.text(), 0.0)?.argmax);
    }
    Ok((truth, pred))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnseenTopicReport {
    pub heldout_topics: Vec<String>,
    pub in_topic: MetricsReport,
    pub unseen_topic: MetricsReport,
    /// unseen minus in-topic.
    #[serde(with = "by_name")]
    pub f1_delta: BTreeMap<ClassLabel, f64>,
    pub weighted_f1_delta: f64,
    pub macro_f1_delta: f64,
}

/// Score the test documents on known topics and on held-out topics
/// separately. Fails if a held-out topic or a test document occurs in the
/// training manifest.
pub fn unseen_topic_eval(
    model: &ModelArtifact,
    train: &Manifest,
    heldout_topics: &[String],
    test: &Manifest,
) -> Result<UnseenTopicReport> {
    let heldout: BTreeSet<String> = heldout_topics.iter().map(|t| t.to_lowercase()).collect();
    if heldout.is_empty() {
        return Err(Error::invalid("no held-out topics given"));
    }
    if let Some(d) = train.documents.iter().find(|d| heldout.contains(&d.topic)) {
        return Err(Error::invalid(format!(
            "topic leakage: held-out topic {:?} occurs in training document {}",
            d.topic, d.id
        )));
    }
    let train_ids: HashSet<&str> = train.documents.iter().map(|d| d.id.as_str()).collect();
    if let Some(d) = test.documents.iter().find(|d| train_ids.contains(d.id.as_str())) {
        return Err(Error::invalid(format!("document {} is in both training and test data", d.id)));
    }
    let (unseen, known): (Vec<Document>, Vec<Document>) =
        test.documents.iter().cloned().partition(|d| heldout.contains(&d.topic));
    if unseen.is_empty() || known.is_empty() {
        return Err(Error::invalid("test manifest needs documents on both known and held-out topics"));
    }
    warn_if_unbalanced("unseen-topic", &unseen);
    let (t, p) = predict_all(model, &known)?;
    let in_topic = compute_metrics(&t, &p)?;
    let (t, p) = predict_all(model, &unseen)?;
    let unseen_topic = compute_metrics(&t, &p)?;
    Ok(UnseenTopicReport {
        heldout_topics: heldout.into_iter().collect(),
        f1_delta: ClassLabel::ALL
            .iter()
            .map(|c| (*c, unseen_topic.per_class[c].f1 - in_topic.per_class[c].f1))
            .collect(),
        weighted_f1_delta: unseen_topic.weighted_f1 - in_topic.weighted_f1,
        macro_f1_delta: unseen_topic.macro_f1 - in_topic.macro_f1,
        in_topic,
        unseen_topic,
    })
}

fn warn_if_unbalanced(what: &str, docs: &[Document]) {
    let mut counts = [0usize; 4];
    for d in docs {
        counts[d.label.index()] += 1;
    }
    if counts.iter().any(|&c| c != counts[0]) {
        log::warn!("{what} test set is not class-balanced: {counts:?}");
    }
}

impl UnseenTopicReport {
    pub fn to_markdown(&self) -> String {
        let mut s = format!(
            "held-out topics: {}\n\n| class | known topics F1 | unseen topics F1 | delta |\n|---|---:|---:|---:|\n",
            self.heldout_topics.join(", ")
        );
        for c in ClassLabel::ALL {
            let _ = writeln!(
                s,
                "| {c} | {:.4} | {:.4} | {:+.4} |",
                self.in_topic.per_class[&c].f1, self.unseen_topic.per_class[&c].f1, self.f1_delta[&c]
            );
        }
        let _ = writeln!(
            s,
            "| weighted | {:.4} | {:.4} | {:+.4} |",
            self.in_topic.weighted_f1, self.unseen_topic.weighted_f1, self.weighted_f1_delta
        );
        s
    }
}
