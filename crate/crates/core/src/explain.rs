//! Decision-rule term counts for forests and top-weight terms for linear
//! models.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{as_name, by_name, ClassLabel};
use crate::error::{Error, Result};
use crate::features::Vocabulary;
use crate::models::{ForestModel, LinearModel, Node};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRuleCount {
    pub term: String,
    /// Split nodes testing this term, over all trees.
    pub count: usize,
    /// Class most often in the majority on the high side of the split.
    #[serde(with = "as_name")]
    pub direction: ClassLabel,
    /// Mean over splits of p_high(c) - p_low(c), the class shares of the
    /// right (value above threshold) and left children.
    #[serde(with = "by_name")]
    pub class_direction: BTreeMap<ClassLabel, f64>,
}

/// Count every split node per feature across the forest and rank by count,
/// ties broken by term. Returns at most `k` entries.
pub fn extract_forest_rule_terms(forest: &ForestModel, vocab: &Vocabulary, k: usize) -> Result<Vec<TermRuleCount>> {
    if forest.trees.is_empty() {
        return Err(Error::invalid("forest has no trees"));
    }
    if vocab.len() != forest.dim {
        return Err(Error::DimensionMismatch {
            expected: forest.dim,
            actual: vocab.len(),
        });
    }
    struct Acc {
        count: usize,
        votes: [usize; 4],
        diff: [f64; 4],
    }
    let mut acc: BTreeMap<usize, Acc> = BTreeMap::new();
    for tree in &forest.trees {
        for node in &tree.nodes {
            if let Node::Split {
                feature, left, right, ..
            } = node
            {
                let lo = shares(tree.nodes[*left].hist());
                let hi = shares(tree.nodes[*right].hist());
                let a = acc.entry(*feature).or_insert(Acc {
                    count: 0,
                    votes: [0; 4],
                    diff: [0.0; 4],
                });
                a.count += 1;
                a.votes[majority(&hi)] += 1;
                for c in 0..4 {
                    a.diff[c] += hi[c] - lo[c];
                }
            }
        }
    }
    let mut out: Vec<TermRuleCount> = acc
        .into_iter()
        .map(|(f, a)| TermRuleCount {
            term: vocab.term(f).to_owned(),
            count: a.count,
            direction: ClassLabel::ALL[majority_count(&a.votes)],
            class_direction: ClassLabel::ALL
                .iter()
                .map(|&c| (c, a.diff[c.index()] / a.count as f64))
                .collect(),
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.term.cmp(&b.term)));
    out.truncate(k);
    Ok(out)
}

fn shares(h: &[f64; 4]) -> [f64; 4] {
    let t: f64 = h.iter().sum();
    if t > 0.0 {
        h.map(|v| v / t)
    } else {
        [0.0; 4]
    }
}

fn majority(h: &[f64; 4]) -> usize {
    (1..4).fold(0, |best, i| if h[i] > h[best] { i } else { best })
}

fn majority_count(v: &[usize; 4]) -> usize {
    (1..4).fold(0, |best, i| if v[i] > v[best] { i } else { best })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeight {
    pub term: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassFeatures {
    #[serde(with = "as_name")]
    pub class: ClassLabel,
    /// Largest weights first.
    pub top: Vec<FeatureWeight>,
    /// Most negative weights first.
    pub bottom: Vec<FeatureWeight>,
}

/// Per trained class, the `k` highest and `k` lowest weighted terms. Ties
/// are broken by term. `k` above the vocabulary size is clamped.
pub fn top_linear_features(model: &LinearModel, vocab: &Vocabulary, k: usize) -> Result<Vec<ClassFeatures>> {
    if vocab.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: vocab.len(),
        });
    }
    let k = if k > vocab.len() {
        log::warn!("k = {k} exceeds the {} vocabulary terms; clamping", vocab.len());
        vocab.len()
    } else {
        k
    };
    Ok(model
        .classes
        .iter()
        .zip(&model.weights)
        .map(|(&class, w)| {
            let mut fw: Vec<FeatureWeight> = w
                .iter()
                .enumerate()
                .map(|(i, &weight)| FeatureWeight {
                    term: vocab.term(i).to_owned(),
                    weight,
                })
                .collect();
            fw.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.term.cmp(&b.term)));
            let top = fw[..k].to_vec();
            fw.sort_by(|a, b| a.weight.total_cmp(&b.weight).then_with(|| a.term.cmp(&b.term)));
            let bottom = fw[..k].to_vec();
            ClassFeatures { class, top, bottom }
        })
        .collect())
}

pub fn rule_terms_markdown(terms: &[TermRuleCount]) -> String {
    let mut s = String::from("| rank | term | count | direction |");
    for c in ClassLabel::ALL {
        let _ = write!(s, " {c} |");
    }
    s.push_str("\n|---:|---|---:|---|");
    s.push_str(&"---:|".repeat(4));
    s.push('\n');
    for (i, t) in terms.iter().enumerate() {
        let _ = write!(s, "| {} | {} | {} | {} |", i + 1, t.term, t.count, t.direction);
        for c in ClassLabel::ALL {
            let _ = write!(s, " {:+.3} |", t.class_direction[&c]);
        }
        s.push('\n');
    }
    s
}

pub fn linear_features_markdown(features: &[ClassFeatures]) -> String {
    let mut s = String::new();
    for cf in features {
        let _ = writeln!(s, "### {}\n\n| rank | top term | weight | bottom term | weight |", cf.class);
        s.push_str("|---:|---|---:|---|---:|\n");
        for (i, (t, b)) in cf.top.iter().zip(&cf.bottom).enumerate() {
            let _ = writeln!(s, "| {} | {} | {:.4} | {} | {:.4} |", i + 1, t.term, t.weight, b.term, b.weight);
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::fit_count;
    use crate::models::{DecisionTree, Loss};

    fn stump_forest(feature: usize, dim: usize) -> ForestModel {
        ForestModel {
            classes: ClassLabel::ALL.to_vec(),
            dim,
            seed: 0,
            max_features: 1,
            trees: vec![DecisionTree {
                nodes: vec![
                    Node::Split {
                        feature,
                        threshold: 0.5,
                        left: 1,
                        right: 2,
                        hist: [2.0, 2.0, 0.0, 0.0],
                    },
                    Node::Leaf {
                        hist: [2.0, 0.0, 0.0, 0.0],
                    },
                    Node::Leaf {
                        hist: [0.0, 2.0, 0.0, 0.0],
                    },
                ],
            }],
        }
    }

    #[test]
    fn single_stump() {
        let vocab = fit_count(&["doctor nurse"], 10).unwrap().vocabulary;
        let f = stump_forest(vocab.index_of("doctor").unwrap(), vocab.len());
        let r = extract_forest_rule_terms(&f, &vocab, 10).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].term.as_str(), r[0].count), ("doctor", 1));
        assert_eq!(r[0].direction, ClassLabel::Scientific);
        assert_eq!(r[0].class_direction[&ClassLabel::Scientific], 1.0);
        assert_eq!(r[0].class_direction[&ClassLabel::AlternativeScientific], -1.0);
    }

    #[test]
    fn empty_forest_is_error() {
        let vocab = fit_count(&["doctor"], 10).unwrap().vocabulary;
        let mut f = stump_forest(0, 1);
        f.trees.clear();
        assert!(extract_forest_rule_terms(&f, &vocab, 5).is_err());
    }

    #[test]
    fn zero_weights_rank_lexicographically() {
        let vocab = fit_count(&["cc aa bb"], 10).unwrap().vocabulary;
        let m = LinearModel {
            classes: vec![ClassLabel::Scientific, ClassLabel::Vernacular],
            loss: Loss::SquaredHinge,
            c: 1.0,
            weights: vec![vec![0.0; 3]; 2],
            bias: vec![0.0; 2],
            objective_history: vec![],
            converged: true,
        };
        let r = top_linear_features(&m, &vocab, 5).unwrap();
        let terms: Vec<&str> = r[0].top.iter().map(|t| t.term.as_str()).collect();
        assert_eq!(terms, ["aa", "bb", "cc"]);
        assert_eq!(r[0].bottom.len(), 3);
        assert!(r[0].top.iter().all(|t| t.weight == 0.0));
    }

    #[test]
    fn markdown_has_one_row_per_term() {
        let vocab = fit_count(&["doctor nurse"], 10).unwrap().vocabulary;
        let f = stump_forest(0, vocab.len());
        let r = extract_forest_rule_terms(&f, &vocab, 10).unwrap();
        assert_eq!(rule_terms_markdown(&r).lines().count(), 3);
    }
}
