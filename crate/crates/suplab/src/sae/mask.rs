//! Hard binary concept masks trained jointly with a linear head. The forward
//! pass uses m = 1{theta > 0}; the backward pass routes gradients to theta
//! through a sigmoid straight-through surrogate, so coordinates near the
//! decision boundary move the most. The penalty lambda * ||m||_2^2 equals
//! lambda * ||m||_0 for binary m.

use crate::error::{Error, Result};
use crate::numeric::adam::AdamState;
use crate::numeric::matrix::Matrix;
use crate::numeric::rng::SeededRng;

/// Mask logits with their temperature. The mask itself is 1{theta > 0}.
#[derive(Debug, Clone)]
pub struct ConceptMask {
    pub theta: Vec<f64>,
    pub tau: f64,
}

impl ConceptMask {
    pub fn mask(&self) -> Vec<f64> {
        self.theta.iter().map(|&t| if t > 0.0 { 1.0 } else { 0.0 }).collect()
    }

    pub fn active_count(&self) -> usize {
        self.theta.iter().filter(|&&t| t > 0.0).count()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.theta.len()).filter(|&j| self.theta[j] > 0.0).collect()
    }

    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        phi.iter()
            .zip(&self.theta)
            .map(|(&v, &t)| if t > 0.0 { v } else { 0.0 })
            .collect()
    }
}

/// Linear head over masked concept activations.
#[derive(Debug, Clone)]
pub struct MaskHead {
    /// classes x d1.
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl MaskHead {
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.w.matvec(x)?;
        for (zi, bi) in z.iter_mut().zip(&self.b) {
            *zi += bi;
        }
        Ok(z)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let z = self.logits(x)?;
        Ok(argmax(&z))
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Straight-through multiplier d m / d theta: the derivative of the sigmoid
/// relaxation sigma(theta/tau), largest at theta = 0 and decaying in |theta|.
pub(crate) fn ste_surrogate(theta: f64, tau: f64) -> f64 {
    let s = 1.0 / (1.0 + (-theta / tau).exp());
    s * (1.0 - s) / tau
}

/// Full-batch optimizer settings; the loss surface is small (one
/// neighborhood), so a fixed rate works across the worlds we train on.
const MASK_LR: f64 = 0.05;
const THETA_INIT: f64 = 0.01;

/// Trains mask logits and a linear head on one neighborhood's concept rows,
/// minimizing mean masked cross-entropy plus lambda * ||m||_2^2 with
/// full-batch Adam. The mask starts all-on (theta = +0.01) so the penalty,
/// not the initialization, decides what to drop.
pub fn learn_concept_mask(
    concepts: &Matrix,
    labels: &[usize],
    classes: usize,
    lambda: f64,
    tau: f64,
    steps: usize,
    rng: &mut SeededRng,
) -> Result<(ConceptMask, MaskHead)> {
    let k = concepts.rows();
    let d1 = concepts.cols();
    if labels.len() != k {
        return Err(Error::Dimension(format!(
            "{} labels for {k} concept rows",
            labels.len()
        )));
    }
    if k == 0 {
        return Err(Error::Data("empty neighborhood".into()));
    }
    if classes < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {classes}")));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Data(format!("label {bad} out of range [0, {classes})")));
    }
    if lambda < 0.0 {
        return Err(Error::Config(format!("penalty {lambda} must be nonnegative")));
    }
    if !(tau > 0.0) {
        return Err(Error::Config(format!("temperature {tau} must be positive")));
    }
    if steps == 0 {
        return Err(Error::Config("need at least one step".into()));
    }

    let mut w = Matrix::zeros(classes, d1);
    for v in w.data_mut() {
        *v = 0.01 * rng.normal();
    }
    let mut b = vec![0.0; classes];
    let mut theta = vec![THETA_INIT; d1];

    let mut adam_w = AdamState::new(classes * d1, MASK_LR);
    let mut adam_b = AdamState::new(classes, MASK_LR);
    let mut adam_t = AdamState::new(d1, MASK_LR);

    let inv_k = 1.0 / k as f64;
    for _ in 0..steps {
        let m: Vec<f64> =
            theta.iter().map(|&t| if t > 0.0 { 1.0 } else { 0.0 }).collect();

        let mut gw = Matrix::zeros(classes, d1);
        let mut gb = vec![0.0; classes];
        let mut gm = vec![0.0; d1];
        let mut loss = 0.0;
        for r in 0..k {
            let phi = concepts.row(r);
            let xm: Vec<f64> = phi.iter().zip(&m).map(|(&p, &mi)| p * mi).collect();
            let head = MaskHead { w: w.clone(), b: b.clone() };
            let z = head.logits(&xm)?;
            let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = zmax + z.iter().map(|&zi| (zi - zmax).exp()).sum::<f64>().ln();
            loss += (lse - z[labels[r]]) * inv_k;
            for c in 0..classes {
                let p = (z[c] - lse).exp();
                let delta = (p - if c == labels[r] { 1.0 } else { 0.0 }) * inv_k;
                gb[c] += delta;
                for (j, (&x, g)) in xm.iter().zip(gw.row_mut(c)).enumerate() {
                    *g += delta * x;
                    gm[j] += delta * w.get(c, j) * phi[j];
                }
            }
        }
        loss += lambda * m.iter().sum::<f64>();
        if !loss.is_finite() {
            return Err(Error::Numeric("non-finite mask loss".into()));
        }

        let gt: Vec<f64> = (0..d1)
            .map(|j| (gm[j] + 2.0 * lambda * m[j]) * ste_surrogate(theta[j], tau))
            .collect();
        adam_w.step(w.data_mut(), gw.data())?;
        adam_b.step(&mut b, &gb)?;
        adam_t.step(&mut theta, &gt)?;
    }

    Ok((ConceptMask { theta, tau }, MaskHead { w, b }))
}
