use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Multinomial logistic regression: `softmax(W x + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    /// `(classes, features)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub lambda: f64,
    /// Optimizer iterations used by the fit.
    pub iterations: usize,
}

/// Training targets: class ids, or one probability row per example.
#[derive(Clone, Copy, Debug)]
pub enum Targets<'a> {
    Hard { labels: &'a [usize], classes: usize },
    Soft(ArrayView2<'a, f64>),
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Hard { labels, .. } => labels.len(),
            Targets::Soft(p) => p.nrows(),
        }
    }

    fn classes(&self) -> usize {
        match self {
            Targets::Hard { classes, .. } => *classes,
            Targets::Soft(p) => p.ncols(),
        }
    }

    fn dense(&self) -> Array2<f64> {
        match self {
            Targets::Hard { labels, classes } => {
                let mut t = Array2::zeros((labels.len(), *classes));
                for (i, &l) in labels.iter().enumerate() {
                    t[(i, l)] = 1.0;
                }
                t
            }
            Targets::Soft(p) => p.to_owned(),
        }
    }

    /// Classes that carry any target mass.
    fn present(&self) -> usize {
        let t = self.dense();
        t.sum_axis(Axis(0)).iter().filter(|&&m| m > 0.0).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iter: usize,
    /// Stop once every gradient component is below this in magnitude.
    pub tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iter: 2000,
            tol: 1e-6,
        }
    }
}

/// Row-wise softmax of `x W^T + b`.
fn probabilities(x: ArrayView2<f64>, theta: &Array2<f64>) -> Array2<f64> {
    let f = x.ncols();
    let mut z = x.dot(&theta.slice(s![.., ..f]).t()) + &theta.column(f);
    for mut row in z.axis_iter_mut(Axis(0)) {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let sum = row.sum();
        row /= sum;
    }
    z
}

/// Mean cross-entropy plus `lambda / 2 * |W|^2`; the bias is unregularized.
fn objective(x: ArrayView2<f64>, t: &Array2<f64>, theta: &Array2<f64>, lambda: f64) -> f64 {
    let p = probabilities(x, theta);
    let n = x.nrows() as f64;
    let ce: f64 = t
        .iter()
        .zip(&p)
        .filter(|(&ti, _)| ti > 0.0)
        .map(|(&ti, &pi)| -ti * pi.max(f64::MIN_POSITIVE).ln())
        .sum();
    let f = x.ncols();
    let w = theta.slice(s![.., ..f]);
    ce / n + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
}

fn gradient(x: ArrayView2<f64>, t: &Array2<f64>, theta: &Array2<f64>, lambda: f64) -> Array2<f64> {
    let f = x.ncols();
    let n = x.nrows() as f64;
    let r = (probabilities(x, theta) - t) / n;
    let mut g = Array2::zeros(theta.raw_dim());
    g.slice_mut(s![.., ..f]).assign(&(r.t().dot(&x) + &theta.slice(s![.., ..f]).mapv(|v| lambda * v)));
    g.column_mut(f).assign(&r.sum_axis(Axis(0)));
    g
}

/// Upper estimate of the gradient's Lipschitz constant from a power
/// iteration on the feature Gram matrix (bias column included).
fn lipschitz_estimate(x: ArrayView2<f64>, lambda: f64) -> f64 {
    let n = x.nrows() as f64;
    let f = x.ncols();
    let mut v = Array1::from_elem(f + 1, 1.0 / ((f + 1) as f64).sqrt());
    let mut top = 0.0;
    for _ in 0..30 {
        let xv = x.dot(&v.slice(s![..f])) + v[f];
        let mut w = Array1::zeros(f + 1);
        w.slice_mut(s![..f]).assign(&x.t().dot(&xv));
        w[f] = xv.sum();
        top = w.dot(&w).sqrt();
        if top == 0.0 {
            break;
        }
        v = w / top;
    }
    0.5 * top / n + lambda
}

/// L2-regularized multinomial logistic regression by accelerated full-batch
/// gradient descent with backtracking and adaptive restart, from zero
/// weights. Deterministic: no randomness is involved.
pub fn fit_softmax_regression(
    x: ArrayView2<f64>,
    targets: Targets<'_>,
    lambda: f64,
    cfg: &FitConfig,
) -> Result<LinearModel> {
    let n = x.nrows();
    if targets.len() != n {
        return Err(Error::Shape(format!("{n} feature rows but {} targets", targets.len())));
    }
    if n == 0 {
        return Err(Error::Degenerate("no training examples".into()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("invalid l2 strength {lambda}")));
    }
    if let Targets::Hard { labels, classes } = targets {
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Config(format!("label {bad} outside {classes} classes")));
        }
    }
    if targets.present() < 2 {
        return Err(Error::Degenerate("softmax regression needs at least two classes present".into()));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("features".into()));
    }
    let t = targets.dense();
    let (c, f) = (targets.classes(), x.ncols());
    let mut theta = Array2::<f64>::zeros((c, f + 1));
    let mut prev = theta.clone();
    let mut lip = lipschitz_estimate(x, lambda).max(1e-12);
    let mut momentum = 1.0f64;
    let mut iterations = 0;
    for it in 0..cfg.max_iter {
        iterations = it + 1;
        let beta = (momentum - 1.0) / (0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()));
        let y = &theta + &((&theta - &prev) * beta);
        let g = gradient(x, &t, &y, lambda);
        if g.iter().all(|v| v.abs() < cfg.tol) {
            theta = y;
            break;
        }
        let fy = objective(x, &t, &y, lambda);
        let next = loop {
            let cand = &y - &(&g / lip);
            let d = &cand - &y;
            let bound = fy + (&g * &d).sum() + 0.5 * lip * d.iter().map(|v| v * v).sum::<f64>();
            if objective(x, &t, &cand, lambda) <= bound + 1e-12 * fy.abs() || lip > 1e12 {
                break cand;
            }
            lip *= 2.0;
        };
        let restart = (&g * &(&next - &theta)).sum() > 0.0;
        prev = theta;
        theta = next;
        momentum = if restart {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt())
        };
    }
    if !theta.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("softmax regression weights".into()));
    }
    Ok(LinearModel {
        weights: theta.slice(s![.., ..f]).to_owned(),
        bias: theta.column(f).to_owned(),
        lambda,
        iterations,
    })
}

impl LinearModel {
    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    pub fn decision_function(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights.t()) + &self.bias
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut theta = Array2::zeros((self.classes(), self.weights.ncols() + 1));
        theta.slice_mut(s![.., ..self.weights.ncols()]).assign(&self.weights);
        theta.column_mut(self.weights.ncols()).assign(&self.bias);
        probabilities(x, &theta)
    }

    /// Argmax class per row, ties to the smallest class id.
    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<usize> {
        self.decision_function(x)
            .axis_iter(Axis(0))
            .map(|row| {
                let mut best = 0;
                for (k, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}
