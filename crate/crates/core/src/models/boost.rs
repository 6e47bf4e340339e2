//! Multiclass AdaBoost (SAMME) over depth-1 trees.

use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, ColumnIndex, DecisionTree, TreeParams};
use super::Dataset;
use crate::corpus::ClassLabel;
use crate::error::{Error, Result};
use crate::features::DocVector;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostStage {
    pub stump: DecisionTree,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub classes: Vec<ClassLabel>,
    pub dim: usize,
    pub n_stages: usize,
    pub stages: Vec<BoostStage>,
}

/// Fit up to `n_stages` stumps. Stage weight is
/// ln((1 - err) / err) + ln(K - 1). Boosting stops early when a stump is
/// perfect or no better than chance (err >= 1 - 1/K).
pub fn train_adaboost(data: &Dataset, n_stages: usize, seed: u64) -> Result<BoostModel> {
    let classes = data.require_classes()?;
    if n_stages == 0 {
        return Err(Error::invalid("boosting needs at least one stage"));
    }
    let k = classes.len() as f64;
    let n = data.len();
    let cols = ColumnIndex::new(data);
    let params = TreeParams {
        max_depth: Some(1),
        max_features: 0,
    };
    let mut w = vec![1.0 / n as f64; n];
    let mut stages = Vec::new();
    for m in 0..n_stages {
        let mut r = rng::seeded_stream(seed, m as u64);
        let stump = grow_tree(data, &cols, &w, params, &mut r);
        let miss: Vec<bool> = data
            .rows()
            .iter()
            .zip(data.labels())
            .map(|(x, y)| stump.predict(x) != *y)
            .collect();
        let total: f64 = w.iter().sum();
        let err: f64 = w.iter().zip(&miss).filter(|e| *e.1).map(|e| e.0).sum::<f64>() / total;
        if err <= 0.0 {
            stages.push(BoostStage { stump, alpha: 1.0 });
            break;
        }
        if err >= 1.0 - 1.0 / k {
            if stages.is_empty() {
                log::warn!("first boosting stump is no better than chance");
                stages.push(BoostStage { stump, alpha: 1.0 });
            }
            break;
        }
        let alpha = ((1.0 - err) / err).ln() + (k - 1.0).ln();
        if m + 1 < n_stages {
            for (wi, &missed) in w.iter_mut().zip(&miss) {
                if missed && *wi > 0.0 {
                    *wi *= alpha.exp();
                }
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
        }
        stages.push(BoostStage { stump, alpha });
    }
    Ok(BoostModel {
        classes,
        dim: data.dim(),
        n_stages,
        stages,
    })
}

impl BoostModel {
    /// Share of total stage weight voting for each class.
    pub fn votes(&self, x: &DocVector) -> [f64; 4] {
        let mut v = [0.0; 4];
        let mut total = 0.0;
        for s in &self.stages {
            v[s.stump.predict(x).index()] += s.alpha;
            total += s.alpha;
        }
        v.map(|a| a / total)
    }
}
