//! Logistic regression fitted by full-batch gradient descent on mean
//! log-loss. Weights start at zero, so a fit is a pure function of its data.

use std::collections::BTreeMap;

use super::features::Vectorizer;
use super::spec::{sigmoid, LinearModel};
use super::{LabeledPair, SimilarityError};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { epochs: 500, learning_rate: 0.5 }
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log-loss of the model (weights, bias) on rows `xs` with 0/1 labels.
pub fn log_loss(weights: &[f64], bias: f64, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    let total: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let z = bias + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            softplus(z) - y * z
        })
        .sum();
    total / xs.len() as f64
}

/// Analytic gradient of [`log_loss`]: (d/dweights, d/dbias).
pub fn log_loss_gradient(weights: &[f64], bias: f64, xs: &[Vec<f64>], ys: &[f64]) -> (Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let z = bias + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        let r = sigmoid(z) - y;
        for (g, v) in gw.iter_mut().zip(x) {
            *g += r * v;
        }
        gb += r;
    }
    gw.iter_mut().for_each(|g| *g /= n);
    (gw, gb / n)
}

/// Fits weights and bias on sentinel-zeroed rows. Returns (weights, bias,
/// final loss).
pub fn fit_logistic(xs: &[Vec<f64>], labels: &[bool], opts: TrainOptions) -> Result<(Vec<f64>, f64, f64), SimilarityError> {
    if opts.epochs == 0 || !(opts.learning_rate.is_finite() && opts.learning_rate > 0.0) {
        return Err(SimilarityError::InvalidSpec("training needs epochs >= 1 and a positive learning rate".into()));
    }
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(SimilarityError::SingleClass);
    }
    let dim = xs.first().map_or(0, Vec::len);
    if let Some(bad) = xs.iter().find(|x| x.len() != dim) {
        return Err(SimilarityError::DimensionMismatch { expected: dim, got: bad.len() });
    }
    let ys: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    for _ in 0..opts.epochs {
        let (gw, gb) = log_loss_gradient(&w, b, xs, &ys);
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= opts.learning_rate * g;
        }
        b -= opts.learning_rate * gb;
    }
    let loss = log_loss(&w, b, xs, &ys);
    Ok((w, b, loss))
}

/// Trains a learned-linear scorer on labeled pairs.
pub fn train_linear(
    training: &[LabeledPair],
    vectorizer: &Vectorizer<'_>,
    opts: TrainOptions,
) -> Result<LinearModel, SimilarityError> {
    let mut seen: BTreeMap<_, bool> = BTreeMap::new();
    for lp in training {
        if let Some(prev) = seen.insert(&lp.pair, lp.is_duplicate) {
            if prev != lp.is_duplicate {
                return Err(SimilarityError::ContradictoryLabels(lp.pair.to_string()));
            }
        }
    }
    let rows = par::map(training, |lp| vectorizer.vectorize(&lp.pair).map(|v| v.zeroed()));
    let xs: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_, _>>()?;
    let labels: Vec<bool> = training.iter().map(|lp| lp.is_duplicate).collect();
    let (weights, bias, loss) = fit_logistic(&xs, &labels, opts)?;
    Ok(LinearModel {
        weights,
        bias,
        library: vectorizer.library().iter().map(|f| f.name().to_owned()).collect(),
        schema: vectorizer.schema().to_vec(),
        final_loss: Some(loss),
    })
}
