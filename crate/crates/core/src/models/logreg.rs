//! Multinomial logistic regression trained with L-BFGS.

use std::collections::VecDeque;

use super::linear::{check_c, LinearModel, Loss};
use super::Dataset;
use crate::corpus::ClassLabel;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogregOptions {
    pub c: f64,
    /// Stop when the largest gradient component falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// L-BFGS memory.
    pub history: usize,
}

impl Default for LogregOptions {
    fn default() -> Self {
        LogregOptions {
            c: 1.0,
            tol: 1e-5,
            max_iter: 5000,
            history: 10,
        }
    }
}

/// Objective and gradient of
/// `0.5 * |W|^2 + C * sum_i cross_entropy(softmax(W x_i + b), y_i)`.
///
/// `theta` holds K rows of `dim + 1` values; the last value of each row is
/// the unpenalized intercept. `classes` fixes the row order.
pub fn logreg_objective(data: &Dataset, classes: &[ClassLabel], c: f64, theta: &[f64]) -> (f64, Vec<f64>) {
    let dim = data.dim();
    let stride = dim + 1;
    let k = classes.len();
    let mut grad = vec![0.0; theta.len()];
    let mut f = 0.0;
    for row in 0..k {
        for j in 0..dim {
            let w = theta[row * stride + j];
            f += 0.5 * w * w;
            grad[row * stride + j] = w;
        }
    }
    let mut z = vec![0.0; k];
    for (x, y) in data.rows().iter().zip(data.labels()) {
        for row in 0..k {
            let t = &theta[row * stride..(row + 1) * stride];
            z[row] = x.dot(&t[..dim]) + t[dim];
        }
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v - zmax).exp()).sum();
        let lse = zmax + sum.ln();
        let truth = classes.iter().position(|cl| cl == y).expect("label among classes");
        f += c * (lse - z[truth]);
        for row in 0..k {
            let p = (z[row] - lse).exp();
            let r = c * (p - if row == truth { 1.0 } else { 0.0 });
            let g = &mut grad[row * stride..(row + 1) * stride];
            for &(j, v) in &x.entries {
                g[j] += r * v;
            }
            g[dim] += r;
        }
    }
    (f, grad)
}

pub fn train_logreg(data: &Dataset, opts: &LogregOptions) -> Result<LinearModel> {
    check_c(opts.c)?;
    let classes = data.require_classes()?;
    let stride = data.dim() + 1;
    let theta0 = vec![0.0; classes.len() * stride];
    let out = lbfgs(|t| logreg_objective(data, &classes, opts.c, t), theta0, opts);
    if !out.converged {
        log::warn!(
            "logistic regression stopped after {} iterations with gradient norm {:.3e}",
            out.history.len(),
            out.grad_norm
        );
    }
    let (weights, bias) = out
        .x
        .chunks(stride)
        .map(|r| (r[..stride - 1].to_vec(), r[stride - 1]))
        .unzip();
    Ok(LinearModel {
        classes,
        loss: Loss::Logistic,
        c: opts.c,
        weights,
        bias,
        objective_history: vec![out.history],
        converged: out.converged,
    })
}

pub(crate) struct LbfgsResult {
    pub x: Vec<f64>,
    pub history: Vec<f64>,
    pub grad_norm: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Limited-memory BFGS with a backtracking Armijo line search, so every
/// accepted step lowers the objective. Stops early, unconverged, once a step
/// no longer lowers it by more than one part in 2^52.
pub(crate) fn lbfgs(
    mut fg: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    mut x: Vec<f64>,
    opts: &LogregOptions,
) -> LbfgsResult {
    const ARMIJO: f64 = 1e-4;
    let (mut f, mut g) = fg(&x);
    let mut history = vec![f];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = inf_norm(&g) < opts.tol;

    for _ in 0..opts.max_iter {
        if converged {
            break;
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let scale = 1.0 / inf_norm(&g).max(1.0);
            d.iter_mut().for_each(|v| *v *= scale);
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            mem.clear();
            d = g.iter().map(|v| -v / inf_norm(&g).max(1.0)).collect();
            slope = dot(&g, &d);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (fn_, gn) = fg(&xn);
            if fn_ <= f + ARMIJO * step * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if mem.len() == opts.history {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        // no decrease beyond float resolution
        let stalled = f - fn_ <= f64::EPSILON * f.abs();
        x = xn;
        f = fn_;
        g = gn;
        history.push(f);
        converged = inf_norm(&g) < opts.tol;
        if stalled && !converged {
            break;
        }
    }
    LbfgsResult {
        x,
        history,
        grad_norm: inf_norm(&g),
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tests::separable;

    #[test]
    fn converges_to_small_gradient() {
        let d = separable(5);
        let m = train_logreg(&d, &LogregOptions::default()).unwrap();
        assert!(m.converged);
        let theta: Vec<f64> = m
            .weights
            .iter()
            .zip(&m.bias)
            .flat_map(|(w, b)| w.iter().cloned().chain(std::iter::once(*b)))
            .collect();
        let (_, g) = logreg_objective(&d, &m.classes, 1.0, &theta);
        assert!(inf_norm(&g) < 1e-5);
        for w in m.objective_history[0].windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn quadratic_minimum_found() {
        let out = lbfgs(
            |x| {
                let f = (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2);
                (f, vec![2.0 * (x[0] - 3.0), 20.0 * (x[1] + 1.0)])
            },
            vec![0.0, 0.0],
            &LogregOptions::default(),
        );
        assert!(out.converged);
        // gradient below 1e-5 bounds the error by 5e-6 and 5e-7
        assert!((out.x[0] - 3.0).abs() < 5e-6 && (out.x[1] + 1.0).abs() < 5e-7);
    }
}
