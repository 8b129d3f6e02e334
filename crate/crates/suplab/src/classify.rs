//! Multinomial logistic heads and the classification experiments built on
//! them: global training, per-point fine-tuning on retrieved neighborhoods,
//! majority vote, a k-means mixture of experts, and temperature-calibrated
//! comparison of two models' predictive distributions.

mod compare;
mod moe;

pub use compare::{calibrate_and_compare, PredictiveComparison};
pub use moe::{
    kmeans, route_and_predict, route_index, train_moe, KmeansResult, MoeModel, MoeTrainConfig,
};
pub(crate) use moe::l2_nearest;

use crate::error::{Error, Result};
use crate::numeric::adam::AdamState;
use crate::numeric::matrix::Matrix;
use crate::numeric::rng::SeededRng;

/// Linear classifier: logits = W x + b.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    /// classes x dim.
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl LinearHead {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        LinearHead { w: Matrix::zeros(classes, dim), b: vec![0.0; classes] }
    }

    pub fn classes(&self) -> usize {
        self.w.rows()
    }

    pub fn dim(&self) -> usize {
        self.w.cols()
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.w.matvec(x)?;
        for (zi, bi) in z.iter_mut().zip(&self.b) {
            *zi += bi;
        }
        Ok(z)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    pub fn accuracy(&self, xs: &Matrix, ys: &[usize]) -> Result<f64> {
        if xs.rows() != ys.len() {
            return Err(Error::Dimension(format!(
                "{} rows vs {} labels",
                xs.rows(),
                ys.len()
            )));
        }
        if xs.rows() == 0 {
            return Err(Error::Data("empty evaluation set".into()));
        }
        let mut hits = 0;
        for r in 0..xs.rows() {
            if self.predict(xs.row(r))? == ys[r] {
                hits += 1;
            }
        }
        Ok(hits as f64 / xs.rows() as f64)
    }
}

/// First index of the maximum (ties to the lowest index).
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax; output sums to 1 and is invariant to adding a
/// constant to every logit.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let zmax = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - zmax).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Gradients of the mean cross-entropy with respect to a head's parameters.
#[derive(Debug, Clone)]
pub struct HeadGrads {
    pub w: Matrix,
    pub b: Vec<f64>,
}

/// Mean cross-entropy over the batch with log-sum-exp stabilization, plus
/// the analytic gradient (softmax - one-hot) outer features.
pub fn softmax_xent_grad(
    head: &LinearHead,
    xs: &Matrix,
    ys: &[usize],
) -> Result<(f64, HeadGrads)> {
    let n = xs.rows();
    let c = head.classes();
    if ys.len() != n {
        return Err(Error::Dimension(format!("{n} rows vs {} labels", ys.len())));
    }
    if n == 0 {
        return Err(Error::Data("empty batch".into()));
    }
    if xs.cols() != head.dim() {
        return Err(Error::Dimension(format!(
            "features are {}-dimensional, head expects {}",
            xs.cols(),
            head.dim()
        )));
    }
    if let Some(&bad) = ys.iter().find(|&&y| y >= c) {
        return Err(Error::Data(format!("label {bad} out of range [0, {c})")));
    }

    let mut loss = 0.0;
    let mut gw = Matrix::zeros(c, head.dim());
    let mut gb = vec![0.0; c];
    let inv_n = 1.0 / n as f64;
    // Logits for the whole batch: xs (n x d) times W^T (d x c).
    let z = xs.matmul_transb(&head.w)?;
    for r in 0..n {
        let mut zr = z.row(r).to_vec();
        for (zi, bi) in zr.iter_mut().zip(&head.b) {
            *zi += bi;
        }
        let zmax = zr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = zmax + zr.iter().map(|&v| (v - zmax).exp()).sum::<f64>().ln();
        loss += (lse - zr[ys[r]]) * inv_n;
        let x = xs.row(r);
        for k in 0..c {
            let p = (zr[k] - lse).exp();
            let delta = (p - if k == ys[r] { 1.0 } else { 0.0 }) * inv_n;
            gb[k] += delta;
            crate::numeric::matrix::axpy(delta, x, gw.row_mut(k));
        }
    }
    if !loss.is_finite() {
        return Err(Error::Numeric("non-finite cross-entropy".into()));
    }
    Ok((loss, HeadGrads { w: gw, b: gb }))
}

/// Mini-batch Adam settings for global head training. Defaults follow the
/// reference recipe (lr 1e-3, batch 512, 100 epochs, weight decay 5e-9).
#[derive(Debug, Clone)]
pub struct HeadTrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
}

impl Default for HeadTrainConfig {
    fn default() -> Self {
        HeadTrainConfig { lr: 1e-3, batch_size: 512, epochs: 100, weight_decay: 5e-9 }
    }
}

/// Trains a linear head from zero init with shuffled mini-batch Adam.
pub fn train_global_head(
    xs: &Matrix,
    ys: &[usize],
    classes: usize,
    config: &HeadTrainConfig,
    rng: &mut SeededRng,
) -> Result<LinearHead> {
    if xs.rows() == 0 {
        return Err(Error::Data("empty training set".into()));
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::Config("batch size and epochs must be positive".into()));
    }
    let mut head = LinearHead::zeros(classes, xs.cols());
    let mut adam_w = AdamState::new(classes * xs.cols(), config.lr);
    let mut adam_b = AdamState::new(classes, config.lr);
    let mut order: Vec<usize> = (0..xs.rows()).collect();
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(config.batch_size) {
            let mut bx = Matrix::zeros(chunk.len(), xs.cols());
            let mut by = Vec::with_capacity(chunk.len());
            for (r, &idx) in chunk.iter().enumerate() {
                bx.row_mut(r).copy_from_slice(xs.row(idx));
                by.push(ys[idx]);
            }
            let (_, mut g) = softmax_xent_grad(&head, &bx, &by)?;
            if config.weight_decay > 0.0 {
                g.w.add_scaled(&head.w, config.weight_decay);
            }
            adam_w.step(head.w.data_mut(), g.w.data())?;
            adam_b.step(&mut head.b, &g.b)?;
        }
    }
    Ok(head)
}

/// Per-point fine-tuning settings: k retrieved neighbors, full-batch Adam
/// steps, learning rate. Defaults are the reference recipe (50, 80, 0.02).
#[derive(Debug, Clone)]
pub struct TttConfig {
    pub k: usize,
    pub steps: usize,
    pub lr: f64,
}

impl Default for TttConfig {
    fn default() -> Self {
        TttConfig { k: 50, steps: 80, lr: 0.02 }
    }
}

/// Fine-tunes a copy of `base` on one neighborhood with full-batch Adam; the
/// base head is never mutated. Zero steps returns the base unchanged.
pub fn ttt_finetune(
    base: &LinearHead,
    xs: &Matrix,
    ys: &[usize],
    config: &TttConfig,
) -> Result<LinearHead> {
    if xs.rows() == 0 {
        return Err(Error::Retrieval("empty neighborhood".into()));
    }
    let mut head = base.clone();
    let mut adam_w = AdamState::new(head.w.rows() * head.w.cols(), config.lr);
    let mut adam_b = AdamState::new(head.b.len(), config.lr);
    for _ in 0..config.steps {
        let (_, g) = softmax_xent_grad(&head, xs, ys)?;
        adam_w.step(head.w.data_mut(), g.w.data())?;
        adam_b.step(&mut head.b, &g.b)?;
    }
    Ok(head)
}

/// Modal label; ties broken by the smallest class id.
pub fn majority_vote(labels: &[usize]) -> Result<usize> {
    if labels.is_empty() {
        return Err(Error::Retrieval("empty neighborhood".into()));
    }
    let max = *labels.iter().max().expect("non-empty");
    let mut counts = vec![0usize; max + 1];
    for &y in labels {
        counts[y] += 1;
    }
    Ok(argmax(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>()))
}

/// Fixed random-ReLU feature map: x -> [relu(W x), 1]. The appended constant
/// coordinate keeps feature vectors away from zero norm, so cosine retrieval
/// stays defined even when every ReLU unit is off.
#[derive(Debug, Clone)]
pub struct RandomReluMap {
    /// width x in_dim, entries N(0, 1/in_dim).
    pub w: Matrix,
}

impl RandomReluMap {
    pub fn new(in_dim: usize, width: usize, rng: &mut SeededRng) -> Result<Self> {
        if in_dim == 0 || width == 0 {
            return Err(Error::Config("feature map needs positive dimensions".into()));
        }
        let scale = 1.0 / (in_dim as f64).sqrt();
        let mut w = Matrix::zeros(width, in_dim);
        for v in w.data_mut() {
            *v = rng.normal() * scale;
        }
        Ok(RandomReluMap { w })
    }

    pub fn width(&self) -> usize {
        self.w.rows()
    }

    /// Output dimension including the constant coordinate.
    pub fn out_dim(&self) -> usize {
        self.w.rows() + 1
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.w.matvec(x)?;
        for v in z.iter_mut() {
            *v = v.max(0.0);
        }
        z.push(1.0);
        Ok(z)
    }

    pub fn apply_all(&self, xs: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(xs.rows(), self.out_dim());
        for r in 0..xs.rows() {
            out.row_mut(r).copy_from_slice(&self.apply(xs.row(r))?);
        }
        Ok(out)
    }
}
