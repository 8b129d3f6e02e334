//! Temperature-calibrated comparison of two models' predictive
//! distributions: per-point scalar temperature fitted by minimizing
//! KL(reference || softmax(other / tau)), then relative total variation per
//! rank of each model's own sorted top-t probabilities.

use crate::classify::softmax;
use crate::error::{Error, Result};
use crate::numeric::matrix::Matrix;

pub const TAU_LO: f64 = 0.05;
pub const TAU_HI: f64 = 20.0;

/// Per-point calibration and rank-wise comparison of two models.
#[derive(Debug, Clone)]
pub struct PredictiveComparison {
    /// Fitted temperature per test point.
    pub temperatures: Vec<f64>,
    /// True where the fitted temperature hit the search boundary (degenerate
    /// reference distribution).
    pub clipped: Vec<bool>,
    /// n x t: each reference distribution's own sorted top-t probabilities.
    pub ref_top: Matrix,
    /// n x t: same for the calibrated other model.
    pub other_top: Matrix,
    /// Relative total variation per rank: mean |p_ref_i - p_other_i| divided
    /// by the average of the two rank means.
    pub rel_tv: Vec<f64>,
}

fn kl_to_scaled(p_ref: &[f64], other_logits: &[f64], tau: f64) -> f64 {
    let scaled: Vec<f64> = other_logits.iter().map(|&z| z / tau).collect();
    let q = softmax(&scaled);
    p_ref
        .iter()
        .zip(&q)
        .map(|(&p, &qi)| if p > 0.0 { p * (p / qi).ln() } else { 0.0 })
        .sum()
}

/// Golden-section minimization of a unimodal function on [lo, hi].
fn golden_section(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, iters: usize) -> f64 {
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Fits one temperature per row of `other_logits` against the softmax of the
/// matching `ref_logits` row, then reports rank-wise relative total
/// variation over the top t probabilities of each model's own distribution.
pub fn calibrate_and_compare(
    ref_logits: &Matrix,
    other_logits: &Matrix,
    t: usize,
) -> Result<PredictiveComparison> {
    let n = ref_logits.rows();
    let c = ref_logits.cols();
    if other_logits.rows() != n || other_logits.cols() != c {
        return Err(Error::Dimension(format!(
            "logit blocks disagree: {}x{} vs {}x{}",
            n,
            c,
            other_logits.rows(),
            other_logits.cols()
        )));
    }
    if n == 0 {
        return Err(Error::Data("no test points".into()));
    }
    if t == 0 || t > c {
        return Err(Error::Config(format!("top-t {t} out of range for {c} classes")));
    }

    let mut temperatures = Vec::with_capacity(n);
    let mut clipped = Vec::with_capacity(n);
    let mut ref_top = Matrix::zeros(n, t);
    let mut other_top = Matrix::zeros(n, t);
    for r in 0..n {
        let p_ref = softmax(ref_logits.row(r));
        let zo = other_logits.row(r);
        // A numerically one-hot reference makes the KL monotone in tau (the
        // surface is flat at machine precision near the winning boundary),
        // so take the better endpoint directly instead of searching.
        let p_max = p_ref.iter().cloned().fold(0.0, f64::max);
        let (tau, was_clipped) = if p_max >= 1.0 - 1e-12 {
            let f_lo = kl_to_scaled(&p_ref, zo, TAU_LO);
            let f_hi = kl_to_scaled(&p_ref, zo, TAU_HI);
            (if f_lo <= f_hi { TAU_LO } else { TAU_HI }, true)
        } else {
            let tau =
                golden_section(|tau| kl_to_scaled(&p_ref, zo, tau), TAU_LO, TAU_HI, 80);
            let edge = 1e-3 * (TAU_HI - TAU_LO);
            (tau, tau <= TAU_LO + edge || tau >= TAU_HI - edge)
        };
        clipped.push(was_clipped);
        temperatures.push(tau);

        let scaled: Vec<f64> = zo.iter().map(|&z| z / tau).collect();
        let p_other = softmax(&scaled);
        ref_top.row_mut(r).copy_from_slice(&sorted_desc(&p_ref)[..t]);
        other_top.row_mut(r).copy_from_slice(&sorted_desc(&p_other)[..t]);
    }

    let mut rel_tv = Vec::with_capacity(t);
    for i in 0..t {
        let mean_ref: f64 = (0..n).map(|r| ref_top.get(r, i)).sum::<f64>() / n as f64;
        let mean_other: f64 = (0..n).map(|r| other_top.get(r, i)).sum::<f64>() / n as f64;
        let denom = 0.5 * (mean_ref + mean_other);
        let gap: f64 = (0..n)
            .map(|r| (ref_top.get(r, i) - other_top.get(r, i)).abs())
            .sum::<f64>()
            / n as f64;
        rel_tv.push(if denom > 0.0 { gap / denom } else { 0.0 });
    }

    Ok(PredictiveComparison { temperatures, clipped, ref_top, other_top, rel_tv })
}
