//! Classical classifiers with calibrated, independent per-class scores.

mod boost;
mod calibration;
mod forest;
mod linear;
mod logreg;
mod tree;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{by_name, ClassLabel};
use crate::error::{Error, Result};
use crate::corpus::Manifest;
use crate::features::{DocVector, Vectorizer, VectorizerKind};

pub use boost::{train_adaboost, BoostModel, BoostStage};
pub use calibration::{fit_sigmoid, stratified_folds, Sigmoid};
pub use forest::{sqrt_features, train_random_forest, ForestModel, ForestOptions};
pub use linear::{train_linear_svm, LinearModel, Loss, SvmOptions};
pub use logreg::{logreg_objective, train_logreg, LogregOptions};
pub use tree::{DecisionTree, Histogram, Node};

/// Labeled sparse rows of a common dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    rows: Vec<DocVector>,
    labels: Vec<ClassLabel>,
}

impl Dataset {
    pub fn new(dim: usize, rows: Vec<DocVector>, labels: Vec<ClassLabel>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::invalid(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        if let Some(r) = rows.iter().find(|r| r.dim != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.dim,
            });
        }
        Ok(Dataset { dim, rows, labels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[DocVector] {
        &self.rows
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    /// Distinct labels in code order.
    pub fn classes(&self) -> Vec<ClassLabel> {
        let mut c = self.labels.clone();
        c.sort();
        c.dedup();
        c
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            dim: self.dim,
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub(crate) fn require_classes(&self) -> Result<Vec<ClassLabel>> {
        let c = self.classes();
        if c.len() < 2 {
            return Err(Error::invalid(format!(
                "training needs at least two classes, found {}",
                c.len()
            )));
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Svc,
    Logreg,
    Rf,
    Adaboost,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Svc, ModelKind::Logreg, ModelKind::Rf, ModelKind::Adaboost];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Svc => "svc",
            ModelKind::Logreg => "logreg",
            ModelKind::Rf => "rf",
            ModelKind::Adaboost => "adaboost",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model {s:?} (expected svc, logreg, rf or adaboost)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub c: f64,
    pub n_trees: usize,
    pub n_stages: usize,
    pub folds: usize,
    pub seed: u64,
    pub svm_tol: f64,
    pub svm_max_epochs: usize,
    pub logreg_tol: f64,
    pub logreg_max_iter: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelKind::Svc,
            c: 1.0,
            n_trees: 100,
            n_stages: 50,
            folds: 5,
            seed: 0,
            svm_tol: 1e-4,
            svm_max_epochs: 1000,
            logreg_tol: 1e-5,
            logreg_max_iter: 5000,
        }
    }
}

impl TrainConfig {
    pub fn for_model(model: ModelKind) -> Self {
        TrainConfig {
            model,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BaseModel {
    Linear(LinearModel),
    Forest(ForestModel),
    Boost(BoostModel),
}

impl BaseModel {
    pub fn classes(&self) -> &[ClassLabel] {
        match self {
            BaseModel::Linear(m) => &m.classes,
            BaseModel::Forest(m) => &m.classes,
            BaseModel::Boost(m) => &m.classes,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BaseModel::Linear(m) => m.dim(),
            BaseModel::Forest(m) => m.dim,
            BaseModel::Boost(m) => m.dim,
        }
    }

    /// Raw score per trained class: margins for linear models, vote
    /// shares for the tree ensembles.
    pub fn decision(&self, x: &DocVector) -> Result<Vec<f64>> {
        if x.dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.dim,
            });
        }
        Ok(match self {
            BaseModel::Linear(m) => m.decision(x),
            BaseModel::Forest(m) => {
                let p = m.predict_proba(x);
                m.classes.iter().map(|c| p[c.index()]).collect()
            }
            BaseModel::Boost(m) => {
                let v = m.votes(x);
                m.classes.iter().map(|c| v[c.index()]).collect()
            }
        })
    }

    /// Class with the highest raw score; ties go to the lower code.
    pub fn predict(&self, x: &DocVector) -> Result<ClassLabel> {
        let s = self.decision(x)?;
        let mut best = 0;
        for k in 1..s.len() {
            if s[k] > s[best] {
                best = k;
            }
        }
        Ok(self.classes()[best])
    }
}

pub fn train_base(data: &Dataset, cfg: &TrainConfig) -> Result<BaseModel> {
    Ok(match cfg.model {
        ModelKind::Svc => BaseModel::Linear(train_linear_svm(
            data,
            &SvmOptions {
                c: cfg.c,
                tol: cfg.svm_tol,
                max_epochs: cfg.svm_max_epochs,
                seed: cfg.seed,
            },
        )?),
        ModelKind::Logreg => BaseModel::Linear(train_logreg(
            data,
            &LogregOptions {
                c: cfg.c,
                tol: cfg.logreg_tol,
                max_iter: cfg.logreg_max_iter,
                ..Default::default()
            },
        )?),
        ModelKind::Rf => BaseModel::Forest(train_random_forest(
            data,
            &ForestOptions {
                n_trees: cfg.n_trees,
                seed: cfg.seed,
                max_depth: None,
            },
        )?),
        ModelKind::Adaboost => BaseModel::Boost(train_adaboost(data, cfg.n_stages, cfg.seed)?),
    })
}

/// A base model trained on all rows plus one sigmoid per trained class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibratedModel {
    pub base: BaseModel,
    /// Aligned with `base.classes()`.
    pub sigmoids: Vec<Sigmoid>,
    pub folds: usize,
}

/// Calibrate `base` on out-of-fold scores of models retrained with the
/// same configuration on the other folds.
pub fn calibrate_sigmoid(base: BaseModel, data: &Dataset, cfg: &TrainConfig) -> Result<CalibratedModel> {
    let classes = base.classes().to_vec();
    let sigmoids = calibration::fit_calibrators(data, &classes, cfg.folds, cfg.seed, |train, test| {
        let m = train_base(train, cfg)?;
        if m.classes() != classes.as_slice() {
            return Err(Error::invalid("a calibration fold lost a class"));
        }
        test.rows().iter().map(|x| m.decision(x)).collect()
    })?;
    Ok(CalibratedModel {
        base,
        sigmoids,
        folds: cfg.folds,
    })
}

/// Train the configured model and calibrate it.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<CalibratedModel> {
    let base = train_base(data, cfg)?;
    calibrate_sigmoid(base, data, cfg)
}

impl CalibratedModel {
    /// Calibrated score per class in [`ClassLabel::ALL`] order; classes the
    /// model never saw score 0.
    pub fn scores(&self, x: &DocVector) -> Result<[f64; 4]> {
        let raw = self.base.decision(x)?;
        let mut out = [0.0; 4];
        for ((c, s), sig) in self.base.classes().iter().zip(raw).zip(&self.sigmoids) {
            out[c.index()] = sig.apply(s);
        }
        Ok(out)
    }
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Independent per-class scores; they need not sum to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    #[serde(with = "by_name")]
    pub scores: BTreeMap<ClassLabel, f64>,
    #[serde(with = "crate::corpus::as_name")]
    pub argmax: ClassLabel,
    /// Set when no class reaches the threshold.
    pub abstain: bool,
}

impl ClassScores {
    pub fn from_array(scores: [f64; 4], threshold: f64) -> Self {
        let mut best = 0;
        for k in 1..4 {
            if scores[k] > scores[best] {
                best = k;
            }
        }
        ClassScores {
            scores: ClassLabel::ALL.iter().map(|&c| (c, scores[c.index()])).collect(),
            argmax: ClassLabel::ALL[best],
            abstain: scores[best] < threshold,
        }
    }

    pub fn get(&self, c: ClassLabel) -> f64 {
        self.scores[&c]
    }
}

pub fn predict_scores(model: &CalibratedModel, x: &DocVector, threshold: f64) -> Result<ClassScores> {
    Ok(ClassScores::from_array(model.scores(x)?, threshold))
}

pub const MODEL_FORMAT: &str = "lsgenre-model/1";

/// Everything needed to score raw text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArtifact {
    pub format: String,
    pub vocabulary_hash: String,
    pub config: TrainConfig,
    pub vectorizer: Vectorizer,
    pub model: CalibratedModel,
}

impl ModelArtifact {
    pub fn new(vectorizer: Vectorizer, config: TrainConfig, model: CalibratedModel) -> Result<Self> {
        if vectorizer.dim() != model.base.dim() {
            return Err(Error::DimensionMismatch {
                expected: vectorizer.dim(),
                actual: model.base.dim(),
            });
        }
        Ok(ModelArtifact {
            format: MODEL_FORMAT.into(),
            vocabulary_hash: vectorizer.vocabulary().hash(),
            config,
            vectorizer,
            model,
        })
    }

    /// Fit the vectorizer on the manifest texts, then the calibrated model.
    pub fn fit(m: &Manifest, vectorizer: VectorizerKind, max_features: usize, cfg: &TrainConfig) -> Result<Self> {
        let texts: Vec<&str> = m.documents.iter().map(|d| d.text()).collect();
        let vectorizer = Vectorizer::fit(vectorizer, &texts, max_features)?;
        let data = Dataset::new(
            vectorizer.dim(),
            vectorizer.transform_all(&texts),
            m.documents.iter().map(|d| d.label).collect(),
        )?;
        let model = train(&data, cfg)?;
        Self::new(vectorizer, cfg.clone(), model)
    }

    pub fn score_text(&self, text: &str, threshold: f64) -> Result<ClassScores> {
        predict_scores(&self.model, &self.vectorizer.transform(text), threshold)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let a: ModelArtifact =
            serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        if a.format != MODEL_FORMAT {
            return Err(Error::invalid(format!("{}: unsupported model format {:?}", path.display(), a.format)));
        }
        if a.vectorizer.vocabulary().hash() != a.vocabulary_hash {
            return Err(Error::invalid(format!("{}: vocabulary hash mismatch", path.display())));
        }
        Ok(a)
    }
}
