//! Independent reference implementations shared by the integration tests.
//! None of these call into the code they check.

#![allow(dead_code)]

use std::collections::BTreeMap;

use lsgenre::corpus::{ClassLabel, Document, Manifest};
use lsgenre::models::{DecisionTree, Node};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Dense TF-IDF by direct definition: lowercase, word runs of length >= 2,
/// vocabulary of the `max_features` most frequent terms (ties by term),
/// smoothed idf, l2-normalized rows. Rows are indexed by sorted term.
pub struct TfIdfOracle {
    pub terms: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.to_lowercase().chars().chain(std::iter::once(' ')) {
        if word_char(c) {
            cur.push(c);
        } else {
            if cur.chars().count() >= 2 {
                out.push(cur.clone());
            }
            cur.clear();
        }
    }
    out
}

pub fn tfidf_oracle(docs: &[String], max_features: usize) -> TfIdfOracle {
    let tokens: Vec<Vec<String>> = docs.iter().map(|d| oracle_tokens(d)).collect();
    let mut all: Vec<String> = tokens.iter().flatten().cloned().collect();
    all.sort();
    all.dedup();
    let total = |t: &String| tokens.iter().flatten().filter(|u| *u == t).count();
    let mut ranked: Vec<(usize, String)> = all.iter().map(|t| (total(t), t.clone())).collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut terms: Vec<String> = ranked.into_iter().take(max_features).map(|r| r.1).collect();
    terms.sort();
    let n = docs.len() as f64;
    let idf: Vec<f64> = terms
        .iter()
        .map(|t| {
            let df = tokens.iter().filter(|doc| doc.contains(t)).count() as f64;
            ((1.0 + n) / (1.0 + df)).ln() + 1.0
        })
        .collect();
    let rows = tokens
        .iter()
        .map(|doc| {
            let mut row: Vec<f64> = terms
                .iter()
                .zip(&idf)
                .map(|(t, w)| doc.iter().filter(|u| *u == t).count() as f64 * w)
                .collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
            row
        })
        .collect();
    TfIdfOracle { terms, rows }
}

/// Random corpus of at most 10 documents over at most 30 distinct terms.
pub fn random_corpus(r: &mut impl RngCore) -> Vec<String> {
    let n_terms = r.random_range(1..=30);
    let terms: Vec<String> = (0..n_terms)
        .map(|_| {
            let len = r.random_range(1..=5);
            (0..len).map(|_| (b'a' + r.random_range(0..6)) as char).collect()
        })
        .collect();
    let seps = [" ", "  ", ", ", ". ", "\n", "-", "'"];
    (0..r.random_range(1..=10))
        .map(|_| {
            let mut s = String::new();
            for i in 0..r.random_range(0..40) {
                if i > 0 {
                    s.push_str(seps[r.random_range(0..seps.len())]);
                }
                let t = &terms[r.random_range(0..terms.len())];
                if r.random_bool(0.2) {
                    s.push_str(&t.to_uppercase());
                } else {
                    s.push_str(t);
                }
            }
            s
        })
        .collect()
}

/// Per-class precision, recall, F1 and support plus accuracy, macro-F1 over
/// classes seen in truth or predictions, and support-weighted F1.
#[derive(Debug, PartialEq)]
pub struct OracleMetrics {
    pub precision: [f64; 4],
    pub recall: [f64; 4],
    pub f1: [f64; 4],
    pub support: [u64; 4],
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

fn div(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Counts are taken by scanning label pairs; the float formulas are the
/// ones pinned for the report so results can be compared exactly.
pub fn metrics_oracle(truth: &[usize], pred: &[usize]) -> OracleMetrics {
    let mut tp = [0u64; 4];
    let mut fp = [0u64; 4];
    let mut fneg = [0u64; 4];
    let mut support = [0u64; 4];
    for (&t, &p) in truth.iter().zip(pred) {
        support[t] += 1;
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fneg[t] += 1;
        }
    }
    let n = truth.len() as u64;
    let mut m = OracleMetrics {
        precision: [0.0; 4],
        recall: [0.0; 4],
        f1: [0.0; 4],
        support,
        accuracy: div(tp.iter().sum(), n),
        macro_f1: 0.0,
        weighted_f1: 0.0,
    };
    let mut present = 0;
    for c in 0..4 {
        m.precision[c] = div(tp[c], tp[c] + fp[c]);
        m.recall[c] = div(tp[c], tp[c] + fneg[c]);
        m.f1[c] = div(2 * tp[c], 2 * tp[c] + fp[c] + fneg[c]);
        if tp[c] + fp[c] + fneg[c] > 0 {
            m.macro_f1 += m.f1[c];
            present += 1;
        }
        m.weighted_f1 += support[c] as f64 * m.f1[c];
    }
    m.macro_f1 /= present as f64;
    m.weighted_f1 /= n as f64;
    m
}

/// Label lists realizing a confusion matrix (rows true, columns predicted).
pub fn expand(confusion: &[[u64; 4]; 4]) -> (Vec<usize>, Vec<usize>) {
    let mut t = Vec::new();
    let mut p = Vec::new();
    for (i, row) in confusion.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            for _ in 0..n {
                t.push(i);
                p.push(j);
            }
        }
    }
    (t, p)
}

pub fn same_as_oracle(report: &lsgenre::eval::MetricsReport, o: &OracleMetrics) -> bool {
    let per_class_ok = ClassLabel::ALL.iter().all(|c| {
        let m = &report.per_class[c];
        let k = c.index();
        m.precision == o.precision[k] && m.recall == o.recall[k] && m.f1 == o.f1[k] && m.support == o.support[k]
    });
    per_class_ok
        && report.accuracy == o.accuracy
        && report.macro_f1 == o.macro_f1
        && report.weighted_f1 == o.weighted_f1
}

/// Documents whose count is below the `ceil(n/10)`-th largest are dropped:
/// a record stays when fewer than `ceil(n/10)` records beat it.
pub fn decile_oracle(counts: &[u64]) -> Vec<usize> {
    let keep = counts.len().div_ceil(10);
    (0..counts.len())
        .filter(|&i| counts.iter().filter(|&&c| c > counts[i]).count() < keep)
        .collect()
}

/// Split-node count per feature by walking each tree from the root.
pub fn traversal_counts(trees: &[DecisionTree]) -> BTreeMap<usize, usize> {
    fn walk(nodes: &[Node], at: usize, out: &mut BTreeMap<usize, usize>) {
        if let Node::Split {
            feature, left, right, ..
        } = &nodes[at]
        {
            *out.entry(*feature).or_default() += 1;
            walk(nodes, *left, out);
            walk(nodes, *right, out);
        }
    }
    let mut out = BTreeMap::new();
    for t in trees {
        walk(&t.nodes, 0, &mut out);
    }
    out
}

/// Every permutation of `0..n`, lexicographic.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Largest total weight of a bijection, by trying all of them.
pub fn best_assignment_weight(w: &[Vec<f64>]) -> f64 {
    permutations(w.len())
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| w[i][j]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Standard normal draw by Box-Muller.
pub fn normal(r: &mut impl RngCore) -> f64 {
    let u1: f64 = 1.0 - r.random::<f64>();
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn date() -> chrono::NaiveDate {
    chrono::NaiveDate::from_ymd_opt(2024, 3, 1).unwrap()
}

/// Manifest with the given number of documents per (topic, class) cell.
pub fn manifest_from_table(table: &[[usize; 4]]) -> Manifest {
    let mut docs = Vec::new();
    for (t, row) in table.iter().enumerate() {
        for (c, &n) in row.iter().enumerate() {
            for k in 0..n {
                let label = ClassLabel::ALL[c];
                let mut d = Document::new(
                    format!("t{t}-c{c}-{k}"),
                    label,
                    format!("topic {t}"),
                    format!("src-{}", label.name()),
                    format!("text {t} {c} {k}"),
                    date(),
                );
                d.set_clean_text(d.raw_text.clone());
                docs.push(d);
            }
        }
    }
    Manifest::new("test", 0, docs).unwrap()
}
