//! K-means over externally produced document embeddings, and
//! cluster-to-class evaluation.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::corpus::ClassLabel;
use crate::error::{Error, Result};
use crate::eval::{metrics_from_confusion, MetricsReport};
use crate::rng;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingRecord {
    id: String,
    vector: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    producer: Option<String>,
}

/// Dense vectors of a common dimension keyed by document id.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    pub ids: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub producer: Option<String>,
}

impl EmbeddingSet {
    pub fn new(ids: Vec<String>, vectors: Vec<Vec<f64>>, producer: Option<String>) -> Result<Self> {
        if ids.len() != vectors.len() {
            return Err(Error::invalid("embedding ids and vectors differ in number"));
        }
        let dim = vectors.first().map_or(0, Vec::len);
        let mut seen = HashSet::new();
        for (id, v) in ids.iter().zip(&vectors) {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!("duplicate embedding id {id:?}")));
            }
            if v.is_empty() || v.len() != dim {
                return Err(Error::invalid(format!(
                    "embedding {id:?} has dimension {}, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("embedding {id:?} has a non-finite entry")));
            }
        }
        Ok(EmbeddingSet { ids, vectors, producer })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    /// One JSON object per line: `{"id", "vector", "producer"?}`.
    pub fn read_jsonl(reader: impl Read) -> Result<Self> {
        let mut ids = Vec::new();
        let mut vectors = Vec::new();
        let mut producers = HashSet::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| Error::invalid(format!("embeddings line {}: {e}", i + 1)))?;
            if line.trim().is_empty() {
                continue;
            }
            let r: EmbeddingRecord = serde_json::from_str(&line)
                .map_err(|e| Error::invalid(format!("embeddings line {}: {e}", i + 1)))?;
            if let Some(p) = r.producer {
                producers.insert(p);
            }
            ids.push(r.id);
            vectors.push(r.vector);
        }
        if producers.len() > 1 {
            return Err(Error::invalid(format!("embeddings mix producers {producers:?}")));
        }
        Self::new(ids, vectors, producers.into_iter().next())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(f)
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        for (id, v) in self.ids.iter().zip(&self.vectors) {
            let r = EmbeddingRecord {
                id: id.clone(),
                vector: v.clone(),
                producer: self.producer.clone(),
            };
            serde_json::to_writer(&mut w, &r)?;
            w.write_all(b"\n").map_err(|e| Error::io("<embeddings>", e))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub k: usize,
    pub n_init: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            k: 4,
            n_init: 10,
            max_iter: 300,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub ids: Vec<String>,
    /// Cluster per id, aligned with `ids`.
    pub assignment: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
    pub restart_inertias: Vec<f64>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid per point (ties to the lower index) and total inertia.
fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut total = 0.0;
    let a = points
        .iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (j, c) in centroids.iter().enumerate() {
                let d = dist2(p, c);
                if d < best.1 {
                    best = (j, d);
                }
            }
            total += best.1;
            best.0
        })
        .collect();
    (a, total)
}

/// k-means++ seeding: the first center uniformly, later ones with
/// probability proportional to squared distance from the nearest chosen
/// center (uniformly when all distances are zero).
fn plus_plus(points: &[Vec<f64>], k: usize, r: &mut impl RngCore) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng::below(r, n as u64) as usize].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng::unit_f64(r) * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng::below(r, n as u64) as usize
        };
        centers.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, &centers[centers.len() - 1]));
        }
    }
    centers
}

struct Run {
    centroids: Vec<Vec<f64>>,
    assignment: Vec<usize>,
    history: Vec<f64>,
}

fn lloyd(points: &[Vec<f64>], k: usize, max_iter: usize, r: &mut impl RngCore) -> Run {
    let dim = points[0].len();
    let mut centroids = plus_plus(points, k, r);
    let (mut assignment, inertia) = assign(points, &centroids);
    let mut history = vec![inertia];
    for _ in 0..max_iter {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        let mut next: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .zip(&centroids)
            .map(|((s, &n), old)| if n > 0 { s.into_iter().map(|v| v / n as f64).collect() } else { old.clone() })
            .collect();
        // an empty cluster moves to the point farthest from its centroid
        let mut taken = HashSet::new();
        for j in (0..k).filter(|&j| counts[j] == 0) {
            let far = points
                .iter()
                .enumerate()
                .filter(|(i, _)| !taken.contains(i))
                .map(|(i, p)| (i, dist2(p, &next[assignment[i]])))
                .fold(None, |best: Option<(usize, f64)>, c| match best {
                    Some(b) if b.1 >= c.1 => Some(b),
                    _ => Some(c),
                });
            if let Some((i, d)) = far {
                if d > 0.0 {
                    taken.insert(i);
                    next[j] = points[i].clone();
                }
            }
        }
        let (a, inertia) = assign(points, &next);
        history.push(inertia);
        centroids = next;
        let stable = a == assignment;
        assignment = a;
        if stable {
            break;
        }
    }
    Run {
        centroids,
        assignment,
        history,
    }
}

/// Best of `n_init` Lloyd runs by final inertia; restart `r` draws from
/// ChaCha8 stream `r` of `seed`.
pub fn kmeans(e: &EmbeddingSet, opts: &KMeansOptions) -> Result<Clustering> {
    if opts.k == 0 || opts.n_init == 0 {
        return Err(Error::invalid("k and n_init must be at least 1"));
    }
    if e.len() < opts.k {
        return Err(Error::invalid(format!("{} points cannot form {} clusters", e.len(), opts.k)));
    }
    let mut best: Option<Run> = None;
    let mut restart_inertias = Vec::new();
    for restart in 0..opts.n_init {
        let mut r = rng::seeded_stream(opts.seed, restart as u64);
        let run = lloyd(&e.vectors, opts.k, opts.max_iter, &mut r);
        let inertia = *run.history.last().expect("at least one step");
        restart_inertias.push(inertia);
        if best.as_ref().is_none_or(|b| inertia < *b.history.last().unwrap()) {
            best = Some(run);
        }
    }
    let run = best.expect("n_init >= 1");
    Ok(Clustering {
        k: opts.k,
        inertia: *run.history.last().unwrap(),
        centroids: run.centroids,
        ids: e.ids.clone(),
        assignment: run.assignment,
        inertia_history: run.history,
        restart_inertias,
    })
}

/// Maximum-weight perfect matching on a square matrix (Hungarian method on
/// the negated weights). Returns the column matched to each row.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<usize> {
    let n = weights.len();
    let big = weights.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    // 1-based potentials, column 0 is a sentinel
    let cost = |i: usize, j: usize| big - weights[i - 1][j - 1];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    /// Documents per (cluster, class).
    pub contingency: [[u64; 4]; 4],
    /// Class assigned to each cluster by the agreement-maximizing bijection.
    #[serde(with = "label_list")]
    pub mapping: Vec<ClassLabel>,
    pub optimal: MetricsReport,
    /// Cluster i read as the class with code i.
    pub identity: MetricsReport,
    /// Fraction of documents whose cluster's majority class is their own.
    pub purity: f64,
}

mod label_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[ClassLabel], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|c| c.name()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<ClassLabel>, D::Error> {
        let names: Vec<String> = Vec::deserialize(d)?;
        names.iter().map(|n| n.parse().map_err(serde::de::Error::custom)).collect()
    }
}

pub fn contingency(c: &Clustering, labels: &HashMap<String, ClassLabel>) -> Result<[[u64; 4]; 4]> {
    if c.k != 4 {
        return Err(Error::invalid(format!("cluster evaluation needs k = 4, got {}", c.k)));
    }
    let mut m = [[0u64; 4]; 4];
    for (id, &a) in c.ids.iter().zip(&c.assignment) {
        let label = labels
            .get(id)
            .ok_or_else(|| Error::invalid(format!("clustered document {id:?} has no label")))?;
        m[a][label.index()] += 1;
    }
    Ok(m)
}

/// Metrics under the best cluster-to-class bijection and under the
/// identity mapping.
pub fn cluster_class_metrics(c: &Clustering, labels: &HashMap<String, ClassLabel>) -> Result<ClusterReport> {
    let table = contingency(c, labels)?;
    let weights: Vec<Vec<f64>> = table.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    let mapping: Vec<ClassLabel> = max_weight_assignment(&weights)
        .into_iter()
        .map(|j| ClassLabel::ALL[j])
        .collect();
    let confusion_under = |map: &[ClassLabel]| {
        let mut conf = [[0u64; 4]; 4];
        for (cluster, row) in table.iter().enumerate() {
            for (class, &n) in row.iter().enumerate() {
                conf[class][map[cluster].index()] += n;
            }
        }
        conf
    };
    let n: u64 = table.iter().flatten().sum();
    let purity = table.iter().map(|r| *r.iter().max().unwrap()).sum::<u64>() as f64 / n as f64;
    Ok(ClusterReport {
        contingency: table,
        optimal: metrics_from_confusion(confusion_under(&mapping))?,
        identity: metrics_from_confusion(confusion_under(&ClassLabel::ALL))?,
        mapping,
        purity,
    })
}
