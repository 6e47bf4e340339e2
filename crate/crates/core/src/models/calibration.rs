//! Per-class sigmoid (Platt) calibration on cross-validated scores.

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::corpus::ClassLabel;
use crate::error::{Error, Result};
use crate::rng;

/// p(s) = 1 / (1 + exp(a * s + b)).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sigmoid {
    pub a: f64,
    pub b: f64,
}

impl Sigmoid {
    pub fn apply(&self, s: f64) -> f64 {
        let t = self.a * s + self.b;
        if t >= 0.0 {
            let e = (-t).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + t.exp())
        }
    }
}

/// Newton fit of a sigmoid with backtracking, using the smoothed targets
/// (n+ + 1)/(n+ + 2) and 1/(n- + 2) instead of hard 0/1 labels.
pub fn fit_sigmoid(scores: &[f64], positive: &[bool]) -> Sigmoid {
    const MAX_ITER: usize = 100;
    const MIN_STEP: f64 = 1e-10;
    const SIGMA: f64 = 1e-12;
    const EPS: f64 = 1e-5;

    let prior1 = positive.iter().filter(|&&p| p).count() as f64;
    let prior0 = positive.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();

    let objective = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&t)
            .map(|(&s, &ti)| {
                let z = s * a + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
    let mut fval = objective(a, b);
    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&s, &ti) in scores.iter().zip(&t) {
            let z = s * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += s * s * d2;
            h22 += d2;
            h21 += s * d2;
            let d1 = ti - p;
            g1 += s * d1;
            g2 += d1;
        }
        if g1.abs() < EPS && g2.abs() < EPS {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            log::debug!("sigmoid fit: line search failed");
            break;
        }
    }
    Sigmoid { a, b }
}

/// Fold index per row. Each class's rows are shuffled with the seeded
/// generator and dealt round-robin, so every fold sees every class.
pub fn stratified_folds(labels: &[ClassLabel], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid("calibration needs at least 2 folds"));
    }
    let mut r = rng::seeded(seed);
    let mut out = vec![0; labels.len()];
    for class in ClassLabel::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < folds {
            return Err(Error::invalid(format!(
                "class {class} has {} documents, fewer than the {folds} calibration folds",
                idx.len()
            )));
        }
        rng::shuffle(&mut r, &mut idx);
        for (j, &i) in idx.iter().enumerate() {
            out[i] = j % folds;
        }
    }
    Ok(out)
}

/// Fit one sigmoid per class on out-of-fold scores and average the
/// parameters over folds.
///
/// `scores_for` trains on a subset and returns decision scores for the
/// given held-out rows, one value per entry of `classes`.
pub(crate) fn fit_calibrators(
    data: &Dataset,
    classes: &[ClassLabel],
    folds: usize,
    seed: u64,
    mut scores_for: impl FnMut(&Dataset, &Dataset) -> Result<Vec<Vec<f64>>>,
) -> Result<Vec<Sigmoid>> {
    let assignment = stratified_folds(data.labels(), folds, seed)?;
    let mut sums = vec![(0.0, 0.0); classes.len()];
    for fold in 0..folds {
        let train: Vec<usize> = (0..data.len()).filter(|&i| assignment[i] != fold).collect();
        let test: Vec<usize> = (0..data.len()).filter(|&i| assignment[i] == fold).collect();
        let train_set = data.subset(&train);
        let test_set = data.subset(&test);
        let scores = scores_for(&train_set, &test_set)?;
        for (k, &class) in classes.iter().enumerate() {
            let s: Vec<f64> = scores.iter().map(|row| row[k]).collect();
            let pos: Vec<bool> = test_set.labels().iter().map(|&l| l == class).collect();
            let sig = fit_sigmoid(&s, &pos);
            sums[k].0 += sig.a;
            sums[k].1 += sig.b;
        }
    }
    Ok(sums
        .into_iter()
        .map(|(a, b)| Sigmoid {
            a: a / folds as f64,
            b: b / folds as f64,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_scores_give_steep_decreasing_fit() {
        let scores: Vec<f64> = (0..40).map(|i| if i < 20 { -1.0 - i as f64 * 0.01 } else { 1.0 + i as f64 * 0.01 }).collect();
        let pos: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let s = fit_sigmoid(&scores, &pos);
        assert!(s.a < 0.0);
        assert!(s.apply(1.0) > 0.9 && s.apply(-1.0) < 0.1);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        let s = Sigmoid { a: -1.0, b: 0.0 };
        assert_eq!(s.apply(1e6), 1.0);
        assert_eq!(s.apply(-1e6), 0.0);
        assert_eq!(s.apply(0.0), 0.5);
    }

    #[test]
    fn uninformative_scores_recover_base_rate() {
        let scores = vec![0.0; 100];
        let pos: Vec<bool> = (0..100).map(|i| i < 25).collect();
        let s = fit_sigmoid(&scores, &pos);
        assert!((s.apply(0.0) - 26.0 / 102.0).abs() < 0.02);
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<ClassLabel> = (0..40).map(|i| ClassLabel::ALL[i % 4]).collect();
        let f = stratified_folds(&labels, 5, 1).unwrap();
        for fold in 0..5 {
            for c in ClassLabel::ALL {
                let n = (0..40).filter(|&i| f[i] == fold && labels[i] == c).count();
                assert_eq!(n, 2);
            }
        }
        assert!(stratified_folds(&labels[..12], 5, 1).is_err());
        assert!(stratified_folds(&labels, 1, 1).is_err());
    }
}
