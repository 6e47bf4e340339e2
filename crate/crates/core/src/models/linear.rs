//! Linear models and the one-vs-rest squared-hinge SVM.

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::corpus::ClassLabel;
use crate::error::{Error, Result};
use crate::features::DocVector;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    SquaredHinge,
    Logistic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub classes: Vec<ClassLabel>,
    pub loss: Loss,
    pub c: f64,
    /// One row of `dim` weights per entry of `classes`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Objective after each epoch or iteration, one trace per subproblem.
    #[serde(default)]
    pub objective_history: Vec<Vec<f64>>,
    #[serde(default)]
    pub converged: bool,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// w_c . x + b_c for each trained class.
    pub fn decision(&self, x: &DocVector) -> Vec<f64> {
        self.weights.iter().zip(&self.bias).map(|(w, b)| x.dot(w) + b).collect()
    }

    pub fn weight(&self, class: ClassLabel, feature: usize) -> Option<f64> {
        let k = self.classes.iter().position(|&c| c == class)?;
        Some(self.weights[k][feature])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvmOptions {
    pub c: f64,
    /// Stop when the spread of projected gradients falls below this.
    pub tol: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for SvmOptions {
    fn default() -> Self {
        SvmOptions {
            c: 1.0,
            tol: 1e-4,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

pub(crate) fn check_c(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("C must be positive and finite, got {c}")))
    }
}

/// One-vs-rest L2-regularized squared-hinge SVM.
///
/// Each binary problem is solved in the dual by coordinate descent over a
/// fresh random permutation per epoch. The bias is an extra constant
/// feature of value 1 and is regularized with the weights.
pub fn train_linear_svm(data: &Dataset, opts: &SvmOptions) -> Result<LinearModel> {
    check_c(opts.c)?;
    let classes = data.require_classes()?;
    let mut weights = Vec::new();
    let mut bias = Vec::new();
    let mut history = Vec::new();
    let mut converged = true;
    for (k, &class) in classes.iter().enumerate() {
        let y: Vec<f64> = data.labels().iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
        let sol = solve_dual(data, &y, opts, k as u64);
        if !sol.converged {
            log::warn!("svm for class {class} stopped after {} epochs without converging", opts.max_epochs);
        }
        converged &= sol.converged;
        let mut w = sol.w;
        bias.push(w.pop().expect("bias slot"));
        weights.push(w);
        history.push(sol.history);
    }
    Ok(LinearModel {
        classes,
        loss: Loss::SquaredHinge,
        c: opts.c,
        weights,
        bias,
        objective_history: history,
        converged,
    })
}

struct DualSolution {
    w: Vec<f64>,
    history: Vec<f64>,
    converged: bool,
}

fn solve_dual(data: &Dataset, y: &[f64], opts: &SvmOptions, stream: u64) -> DualSolution {
    let dim = data.dim();
    let rows = data.rows();
    let n = rows.len();
    let diag = 0.5 / opts.c;
    let qd: Vec<f64> = rows.iter().map(|x| x.squared_norm() + 1.0 + diag).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng::seeded_stream(opts.seed, stream);
    let mut history = Vec::new();
    let mut converged = false;

    for _ in 0..opts.max_epochs {
        rng::shuffle(&mut r, &mut order);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            let x = &rows[i];
            let g = y[i] * (x.dot(&w[..dim]) + w[dim]) - 1.0 + diag * alpha[i];
            let pg = if alpha[i] == 0.0 { g.min(0.0) } else { g };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).max(0.0);
                let step = (alpha[i] - old) * y[i];
                for &(j, v) in &x.entries {
                    w[j] += step * v;
                }
                w[dim] += step;
            }
        }
        let wn: f64 = w.iter().map(|v| v * v).sum();
        let obj = 0.5 * wn + 0.5 * diag * alpha.iter().map(|a| a * a).sum::<f64>() - alpha.iter().sum::<f64>();
        history.push(obj);
        if pg_max - pg_min <= opts.tol {
            converged = true;
            break;
        }
    }
    DualSolution { w, history, converged }
}
