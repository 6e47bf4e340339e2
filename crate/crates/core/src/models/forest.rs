use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, normalized, ColumnIndex, DecisionTree, Histogram, TreeParams};
use super::Dataset;
use crate::corpus::ClassLabel;
use crate::error::{Error, Result};
use crate::features::DocVector;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestOptions {
    pub n_trees: usize,
    pub seed: u64,
    pub max_depth: Option<usize>,
}

impl Default for ForestOptions {
    fn default() -> Self {
        ForestOptions {
            n_trees: 100,
            seed: 0,
            max_depth: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub classes: Vec<ClassLabel>,
    pub dim: usize,
    pub seed: u64,
    /// Non-constant features examined per split.
    pub max_features: usize,
    pub trees: Vec<DecisionTree>,
}

/// floor(sqrt(d)), at least 1.
pub fn sqrt_features(dim: usize) -> usize {
    ((dim as f64).sqrt().floor() as usize).max(1)
}

/// Tree `i` uses the ChaCha8 stream seeded with `seed ^ i`: first a bootstrap
/// of exactly n draws with replacement, then the per-split feature draws.
pub fn train_random_forest(data: &Dataset, opts: &ForestOptions) -> Result<ForestModel> {
    let classes = data.require_classes()?;
    if opts.n_trees == 0 {
        return Err(Error::invalid("a forest needs at least one tree"));
    }
    let cols = ColumnIndex::new(data);
    let max_features = sqrt_features(data.dim());
    let params = TreeParams {
        max_depth: opts.max_depth,
        max_features,
    };
    let n = data.len();
    let trees = (0..opts.n_trees)
        .map(|i| {
            let mut r = rng::seeded(opts.seed ^ i as u64);
            let mut weights = vec![0.0; n];
            for _ in 0..n {
                weights[rng::below(&mut r, n as u64) as usize] += 1.0;
            }
            grow_tree(data, &cols, &weights, params, &mut r)
        })
        .collect();
    Ok(ForestModel {
        classes,
        dim: data.dim(),
        seed: opts.seed,
        max_features,
        trees,
    })
}

impl ForestModel {
    /// Mean of the trees' normalized leaf histograms.
    pub fn predict_proba(&self, x: &DocVector) -> Histogram {
        let mut p = [0.0; 4];
        for t in &self.trees {
            let h = normalized(t.leaf(x));
            for k in 0..4 {
                p[k] += h[k];
            }
        }
        p.map(|v| v / self.trees.len() as f64)
    }

    pub fn internal_nodes(&self) -> usize {
        self.trees.iter().map(DecisionTree::internal_nodes).sum()
    }
}
