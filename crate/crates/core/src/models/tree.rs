//! Weighted CART classification trees with Gini impurity.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::corpus::ClassLabel;
use crate::features::DocVector;
use crate::rng;

/// Two values closer than this are not split apart.
const FEATURE_THRESHOLD: f64 = 1e-7;

/// Weighted class histogram indexed by [`ClassLabel::index`].
pub type Histogram = [f64; 4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        hist: Histogram,
    },
    Leaf {
        hist: Histogram,
    },
}

impl Node {
    pub fn hist(&self) -> &Histogram {
        match self {
            Node::Split { hist, .. } | Node::Leaf { hist } => hist,
        }
    }
}

/// Nodes in preorder; the root is node 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf(&self, x: &DocVector) -> &Histogram {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { hist } => return hist,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if x.get(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    /// Class shares of the leaf reached by `x`.
    pub fn predict_proba(&self, x: &DocVector) -> Histogram {
        normalized(self.leaf(x))
    }

    pub fn predict(&self, x: &DocVector) -> ClassLabel {
        argmax(self.leaf(x))
    }

    pub fn internal_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, at: usize) -> usize {
            match &t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

pub(crate) fn normalized(h: &Histogram) -> Histogram {
    let total: f64 = h.iter().sum();
    if total > 0.0 {
        h.map(|v| v / total)
    } else {
        *h
    }
}

/// Heaviest class; ties go to the lower class code.
pub(crate) fn argmax(h: &Histogram) -> ClassLabel {
    let mut best = 0;
    for i in 1..4 {
        if h[i] > h[best] {
            best = i;
        }
    }
    ClassLabel::ALL[best]
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    /// Non-constant features examined per split; 0 means all.
    pub max_features: usize,
}

/// Column-major copy of a dataset's nonzero entries.
pub(crate) struct ColumnIndex {
    cols: Vec<Vec<(usize, f64)>>,
}

impl ColumnIndex {
    pub fn new(data: &Dataset) -> Self {
        let mut cols = vec![Vec::new(); data.dim()];
        for (r, row) in data.rows().iter().enumerate() {
            for &(j, v) in &row.entries {
                cols[j].push((r, v));
            }
        }
        ColumnIndex { cols }
    }
}

struct Builder<'a, R> {
    data: &'a Dataset,
    cols: &'a ColumnIndex,
    weights: &'a [f64],
    params: TreeParams,
    rng: &'a mut R,
    in_node: Vec<bool>,
    pool: Vec<usize>,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    proxy: f64,
}

/// Grow a tree on the rows with positive weight.
pub(crate) fn grow_tree<R: RngCore>(
    data: &Dataset,
    cols: &ColumnIndex,
    weights: &[f64],
    params: TreeParams,
    rng: &mut R,
) -> DecisionTree {
    let samples: Vec<usize> = (0..data.len()).filter(|&i| weights[i] > 0.0).collect();
    let mut b = Builder {
        data,
        cols,
        weights,
        params,
        rng,
        in_node: vec![false; data.len()],
        pool: (0..data.dim()).collect(),
        nodes: Vec::new(),
    };
    b.build(samples, 0);
    DecisionTree { nodes: b.nodes }
}

impl<R: RngCore> Builder<'_, R> {
    fn hist(&self, samples: &[usize]) -> Histogram {
        let mut h = [0.0; 4];
        for &s in samples {
            h[self.data.labels()[s].index()] += self.weights[s];
        }
        h
    }

    fn build(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let hist = self.hist(&samples);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { hist });
        let pure = hist.iter().filter(|&&v| v > 0.0).count() <= 1;
        if samples.len() < 2 || pure || self.params.max_depth.is_some_and(|m| depth >= m) {
            return id;
        }
        let Some(best) = self.best_split(&samples, &hist) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&s| self.data.rows()[s].get(best.feature) <= best.threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            hist,
        };
        id
    }

    /// Nonzero values of `feature` among the marked rows, sorted.
    fn gather(&self, feature: usize, samples: &[usize], out: &mut Vec<(f64, usize)>) {
        out.clear();
        let col = &self.cols.cols[feature];
        if samples.len() * 8 < col.len() {
            for &s in samples {
                let v = self.data.rows()[s].get(feature);
                if v != 0.0 {
                    out.push((v, s));
                }
            }
        } else {
            out.extend(col.iter().filter(|e| self.in_node[e.0]).map(|&(r, v)| (v, r)));
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    /// Features are drawn without replacement until `max_features`
    /// non-constant ones have been evaluated or none remain.
    fn best_split(&mut self, samples: &[usize], node_hist: &Histogram) -> Option<Candidate> {
        for &s in samples {
            self.in_node[s] = true;
        }
        let d = self.pool.len();
        let limit = if self.params.max_features == 0 { d } else { self.params.max_features };
        let mut best: Option<Candidate> = None;
        let mut vals = Vec::new();
        let mut visited = 0;
        let mut drawn = 0;
        while drawn < d && visited < limit {
            let j = drawn + rng::below(self.rng, (d - drawn) as u64) as usize;
            self.pool.swap(drawn, j);
            let f = self.pool[drawn];
            drawn += 1;

            self.gather(f, samples, &mut vals);
            let zeros = samples.len() - vals.len();
            let constant = vals.is_empty() || (zeros == 0 && vals[vals.len() - 1].0 - vals[0].0 <= FEATURE_THRESHOLD);
            if constant {
                continue;
            }
            visited += 1;
            if let Some(c) = self.scan(f, &vals, zeros, node_hist) {
                if best.as_ref().is_none_or(|b| c.proxy > b.proxy) {
                    best = Some(c);
                }
            }
        }
        for &s in samples {
            self.in_node[s] = false;
        }
        best
    }

    /// Sweep the sorted values (negatives, the zero block, positives) and
    /// return the split maximizing sum over children of sum_k h_k^2 / w,
    /// which minimizes the weighted Gini impurity.
    fn scan(&self, feature: usize, vals: &[(f64, usize)], zeros: usize, node_hist: &Histogram) -> Option<Candidate> {
        let labels = self.data.labels();
        let mut zero_hist = *node_hist;
        for &(_, s) in vals {
            zero_hist[labels[s].index()] -= self.weights[s];
        }
        // (value, histogram of the group)
        let split_at = vals.partition_point(|v| v.0 < 0.0);
        let mut groups: Vec<(f64, Histogram)> = Vec::with_capacity(vals.len() + 1);
        let mut push = |v: f64, h: Histogram| match groups.last_mut() {
            Some(last) if last.0 == v => {
                for k in 0..4 {
                    last.1[k] += h[k];
                }
            }
            _ => groups.push((v, h)),
        };
        let one = |s: usize| {
            let mut h = [0.0; 4];
            h[labels[s].index()] = self.weights[s];
            h
        };
        for &(v, s) in &vals[..split_at] {
            push(v, one(s));
        }
        if zeros > 0 {
            push(0.0, zero_hist.map(|x| x.max(0.0)));
        }
        for &(v, s) in &vals[split_at..] {
            push(v, one(s));
        }

        let total_w: f64 = node_hist.iter().sum();
        let mut left = [0.0; 4];
        let mut best: Option<Candidate> = None;
        for g in 0..groups.len() - 1 {
            for k in 0..4 {
                left[k] += groups[g].1[k];
            }
            let (a, b) = (groups[g].0, groups[g + 1].0);
            if b - a <= FEATURE_THRESHOLD {
                continue;
            }
            let wl: f64 = left.iter().sum();
            let wr = total_w - wl;
            if wl <= 0.0 || wr <= 0.0 {
                continue;
            }
            let mut sl = 0.0;
            let mut sr = 0.0;
            for k in 0..4 {
                sl += left[k] * left[k];
                let r = node_hist[k] - left[k];
                sr += r * r;
            }
            let proxy = sl / wl + sr / wr;
            if best.as_ref().is_none_or(|c| proxy > c.proxy) {
                let mut threshold = a / 2.0 + b / 2.0;
                if threshold == b || !threshold.is_finite() {
                    threshold = a;
                }
                best = Some(Candidate {
                    feature,
                    threshold,
                    proxy,
                });
            }
        }
        best
    }
}
