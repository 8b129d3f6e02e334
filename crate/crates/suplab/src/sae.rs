//! Top-k sparse autoencoders over superposed features. The encoder lifts a
//! feature vector back into concept space, a hard sparsifier keeps the s
//! highest pre-activations, and the decoder reconstructs the feature vector
//! from the surviving concepts. Units that stop firing get a ghost loss that
//! regresses their dense pre-activations onto the current reconstruction
//! residual, so they keep receiving gradient until they revive.

mod mask;

pub use mask::{learn_concept_mask, ConceptMask, MaskHead};

use crate::concepts::SparseVector;
use crate::error::{Error, Result};
use crate::numeric::adam::{clip_gradient_norm_all, AdamState};
use crate::numeric::matrix::{axpy, Matrix};
use crate::numeric::rng::SeededRng;
use crate::numeric::schedule::Schedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaeVariant {
    /// Keep the s highest pre-activations by value (not magnitude).
    TopK,
    /// Keep relu(pre - theta_act); every unit above its threshold fires.
    Threshold,
}

impl SaeVariant {
    pub fn tag(self) -> &'static str {
        match self {
            SaeVariant::TopK => "top-k",
            SaeVariant::Threshold => "threshold",
        }
    }
}

/// Sparse autoencoder with d1 dictionary units over d2-dimensional features.
#[derive(Debug, Clone)]
pub struct SaeModel {
    /// d1 x d2; row j is the detection direction for unit j.
    pub encoder: Matrix,
    /// Encoder bias, all zeros when the config disables it.
    pub enc_bias: Vec<f64>,
    /// d2 x d1; column j is the dictionary atom for unit j.
    pub decoder: Matrix,
    /// Per-unit firing thresholds; only the threshold variant reads them.
    pub theta_act: Vec<f64>,
    pub s: usize,
    pub variant: SaeVariant,
}

impl SaeModel {
    pub fn d1(&self) -> usize {
        self.encoder.rows()
    }

    pub fn d2(&self) -> usize {
        self.encoder.cols()
    }

    /// Fresh model: encoder entries uniform on [-a, a] with
    /// a = init_scale / sqrt(d2), decoder = encoder transpose with unit
    /// columns, bias and thresholds zero.
    pub fn random(
        d1: usize,
        d2: usize,
        s: usize,
        variant: SaeVariant,
        init_scale: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(Error::Config(format!("degenerate shape {d1}x{d2}")));
        }
        if s == 0 || s > d1 {
            return Err(Error::Config(format!(
                "sparsity {s} outside [1, d1={d1}]"
            )));
        }
        if !(init_scale > 0.0) {
            return Err(Error::Config(format!("init scale {init_scale} must be positive")));
        }
        let a = init_scale / (d2 as f64).sqrt();
        let mut encoder = Matrix::zeros(d1, d2);
        for v in encoder.data_mut() {
            *v = rng.uniform_in(-a, a);
        }
        let mut decoder = encoder.transpose();
        normalize_decoder_columns(&mut decoder);
        Ok(SaeModel {
            encoder,
            enc_bias: vec![0.0; d1],
            decoder,
            theta_act: vec![0.0; d1],
            s,
            variant,
        })
    }

    /// Encoder pre-activations E psi + b.
    pub fn pre_activations(&self, psi: &[f64]) -> Result<Vec<f64>> {
        let mut pre = self.encoder.matvec(psi)?;
        for (p, b) in pre.iter_mut().zip(&self.enc_bias) {
            *p += b;
        }
        Ok(pre)
    }

    fn sparsify(&self, pre: &[f64], s_eff: usize) -> SparseVector {
        match self.variant {
            SaeVariant::TopK => top_k_activation(pre, s_eff),
            SaeVariant::Threshold => {
                let entries: Vec<(usize, f64)> = pre
                    .iter()
                    .enumerate()
                    .filter(|&(j, &v)| v > self.theta_act[j])
                    .map(|(j, &v)| (j, v - self.theta_act[j]))
                    .collect();
                SparseVector::new(pre.len(), entries).expect("indices in range by construction")
            }
        }
    }

    fn decode(&self, phi: &SparseVector) -> Vec<f64> {
        let d2 = self.d2();
        let mut out = vec![0.0; d2];
        for &(j, v) in phi.entries() {
            for i in 0..d2 {
                out[i] += self.decoder.get(i, j) * v;
            }
        }
        out
    }
}

/// Keeps the s highest values of `pre` (ties to the lowest index), dropping
/// exact zeros so the result's stored support is its nonzero support.
pub fn top_k_activation(pre: &[f64], s: usize) -> SparseVector {
    let mut order: Vec<usize> = (0..pre.len()).collect();
    order.sort_by(|&a, &b| pre[b].total_cmp(&pre[a]).then(a.cmp(&b)));
    let mut entries: Vec<(usize, f64)> = order
        .into_iter()
        .take(s.min(pre.len()))
        .filter(|&j| pre[j] != 0.0)
        .map(|j| (j, pre[j]))
        .collect();
    entries.sort_by_key(|e| e.0);
    SparseVector::new(pre.len(), entries).expect("indices in range by construction")
}

/// Encode, sparsify per variant, decode.
pub fn sae_forward(model: &SaeModel, psi: &[f64]) -> Result<(SparseVector, Vec<f64>)> {
    if psi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite input to sae_forward".into()));
    }
    let pre = model.pre_activations(psi)?;
    let phi = model.sparsify(&pre, model.s);
    let psi_hat = model.decode(&phi);
    Ok((phi, psi_hat))
}

/// Running per-unit firing frequencies. A unit is dead once its frequency
/// over all processed samples drops to the inactivity threshold or below.
#[derive(Debug, Clone)]
pub struct ActivityTracker {
    counts: Vec<u64>,
    samples: u64,
    pub threshold: f64,
}

impl ActivityTracker {
    pub fn new(d1: usize, threshold: f64) -> Self {
        ActivityTracker { counts: vec![0; d1], samples: 0, threshold }
    }

    /// Records one sample's active (nonzero selected) unit indices.
    pub fn record_row(&mut self, active: &[usize]) {
        for &j in active {
            self.counts[j] += 1;
        }
        self.samples += 1;
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// Frequencies are zero before any sample is processed; dead_mask treats
    /// that state as all-live instead.
    pub fn frequencies(&self) -> Vec<f64> {
        if self.samples == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / self.samples as f64).collect()
    }

    pub fn dead_mask(&self) -> Vec<bool> {
        if self.samples == 0 {
            return vec![false; self.counts.len()];
        }
        self.frequencies().iter().map(|&f| f <= self.threshold).collect()
    }

    pub fn dead_fraction(&self) -> f64 {
        let dead = self.dead_mask().iter().filter(|&&d| d).count();
        dead as f64 / self.counts.len() as f64
    }
}

/// Gradients for every parameter tensor of an [`SaeModel`].
#[derive(Debug, Clone)]
pub struct SaeGrads {
    pub encoder: Matrix,
    pub enc_bias: Vec<f64>,
    pub decoder: Matrix,
    pub theta_act: Vec<f64>,
}

struct StepEval {
    loss: f64,
    grads: SaeGrads,
    /// Reconstruction residuals psi_hat - psi, frozen as the ghost term's
    /// regression targets (one row per sample).
    #[cfg_attr(not(test), allow(dead_code))]
    ghost_targets: Matrix,
    /// Nonzero selected unit indices per sample.
    active: Vec<Vec<usize>>,
}

/// Loss and gradients on a batch: mean ||psi - psi_hat||^2 plus
/// ghost_weight * (1/d2) ||(psi_hat - psi) - psi_tilde||^2, where
/// psi_tilde = D (dead ⊙ pre) regresses dead units onto the reconstruction
/// residual. The sparsifier is treated as a fixed mask, and the residual
/// inside the ghost term is treated as data, so ghost gradient reaches dead
/// units only.
pub fn sae_loss_and_grads(
    model: &SaeModel,
    batch: &Matrix,
    tracker: &ActivityTracker,
    ghost_weight: f64,
) -> Result<(f64, SaeGrads)> {
    let dead = tracker.dead_mask();
    let eval = eval_batch(model, batch, model.s, &dead, ghost_weight, 0.0, None)?;
    Ok((eval.loss, eval.grads))
}

fn eval_batch(
    model: &SaeModel,
    batch: &Matrix,
    s_eff: usize,
    dead: &[bool],
    ghost_weight: f64,
    dropout: f64,
    mut rng: Option<&mut SeededRng>,
) -> Result<StepEval> {
    let d1 = model.d1();
    let d2 = model.d2();
    let b = batch.rows();
    if batch.cols() != d2 {
        return Err(Error::Dimension(format!(
            "batch is {}-dimensional, model expects {d2}",
            batch.cols()
        )));
    }
    if dead.len() != d1 {
        return Err(Error::Dimension(format!(
            "dead mask has {} entries, model has {d1} units",
            dead.len()
        )));
    }
    if dropout > 0.0 && rng.is_none() {
        return Err(Error::Config("dropout needs an rng".into()));
    }

    // Pre-activations for the whole batch, then inverted dropout in place.
    let mut pre = batch.matmul_transb(&model.encoder)?;
    for r in 0..b {
        let row = pre.row_mut(r);
        for (p, bias) in row.iter_mut().zip(&model.enc_bias) {
            *p += bias;
        }
    }
    let keep_scale = 1.0 / (1.0 - dropout);
    let mut kept: Vec<bool> = vec![true; b * d1];
    if dropout > 0.0 {
        let rng = rng.as_mut().expect("checked above");
        for (p, k) in pre.data_mut().iter_mut().zip(kept.iter_mut()) {
            if rng.bernoulli(dropout) {
                *p = 0.0;
                *k = false;
            } else {
                *p *= keep_scale;
            }
        }
    }

    let dead_units: Vec<usize> =
        (0..d1).filter(|&j| dead[j] && ghost_weight > 0.0).collect();

    let mut loss_sum = 0.0;
    let mut d_pre = Matrix::zeros(b, d1);
    let mut g_decoder = Matrix::zeros(d2, d1);
    let mut g_theta = vec![0.0; d1];
    let mut ghost_targets = Matrix::zeros(b, d2);
    let mut active = Vec::with_capacity(b);

    let inv_b = 1.0 / b as f64;
    for r in 0..b {
        let pre_row = pre.row(r).to_vec();
        let phi = model.sparsify(&pre_row, s_eff);
        let psi_hat = model.decode(&phi);
        active.push(phi.entries().iter().map(|&(j, _)| j).collect::<Vec<_>>());

        // resid = psi_hat - psi; main loss and its gradients.
        let psi = batch.row(r);
        let mut resid = psi_hat;
        for (vr, &vp) in resid.iter_mut().zip(psi) {
            *vr -= vp;
        }
        loss_sum += resid.iter().map(|v| v * v).sum::<f64>();
        ghost_targets.row_mut(r).copy_from_slice(&resid);

        for &(j, v) in phi.entries() {
            let mut dphi = 0.0;
            for i in 0..d2 {
                let dr = 2.0 * inv_b * resid[i];
                g_decoder.set(i, j, g_decoder.get(i, j) + dr * v);
                dphi += dr * model.decoder.get(i, j);
            }
            d_pre.set(r, j, d_pre.get(r, j) + dphi);
            if model.variant == SaeVariant::Threshold {
                g_theta[j] -= dphi;
            }
        }

        // Ghost pass: psi_tilde = D (dead ⊙ pre), regressed onto the frozen
        // residual. Only dead units touch psi_tilde, so live encoder rows
        // and live decoder columns get exactly zero from this term.
        if !dead_units.is_empty() {
            let mut psi_tilde = vec![0.0; d2];
            for &j in &dead_units {
                let v = pre_row[j];
                if v != 0.0 {
                    for i in 0..d2 {
                        psi_tilde[i] += model.decoder.get(i, j) * v;
                    }
                }
            }
            let mut q = psi_tilde;
            for (vq, &vr) in q.iter_mut().zip(&resid) {
                *vq -= vr;
            }
            loss_sum += ghost_weight / d2 as f64 * q.iter().map(|v| v * v).sum::<f64>();
            let gq = 2.0 * ghost_weight * inv_b / d2 as f64;
            for &j in &dead_units {
                let v = pre_row[j];
                let mut dpre_j = 0.0;
                for i in 0..d2 {
                    let dq = gq * q[i];
                    if v != 0.0 {
                        g_decoder.set(i, j, g_decoder.get(i, j) + dq * v);
                    }
                    dpre_j += dq * model.decoder.get(i, j);
                }
                d_pre.set(r, j, d_pre.get(r, j) + dpre_j);
            }
        }
    }

    let loss = loss_sum * inv_b;
    if !loss.is_finite() {
        return Err(Error::Numeric("non-finite autoencoder loss".into()));
    }

    // Dropout backward, then accumulate encoder and bias gradients from the
    // sparse d_pre rows.
    let mut g_encoder = Matrix::zeros(d1, d2);
    let mut g_bias = vec![0.0; d1];
    for r in 0..b {
        let psi = batch.row(r).to_vec();
        for j in 0..d1 {
            let mut g = d_pre.get(r, j);
            if g == 0.0 {
                continue;
            }
            if dropout > 0.0 {
                if !kept[r * d1 + j] {
                    continue;
                }
                g *= keep_scale;
            }
            axpy(g, &psi, g_encoder.row_mut(j));
            g_bias[j] += g;
        }
    }

    Ok(StepEval {
        loss,
        grads: SaeGrads {
            encoder: g_encoder,
            enc_bias: g_bias,
            decoder: g_decoder,
            theta_act: g_theta,
        },
        ghost_targets,
        active,
    })
}

/// Loss with the ghost regression targets supplied as data instead of
/// recomputed, matching the gradient convention of [`sae_loss_and_grads`].
/// Finite-difference checks must difference this function at fixed targets.
pub fn sae_loss_frozen_ghost(
    model: &SaeModel,
    batch: &Matrix,
    s_eff: usize,
    dead: &[bool],
    ghost_weight: f64,
    ghost_targets: &Matrix,
) -> Result<f64> {
    let d2 = model.d2();
    let b = batch.rows();
    if ghost_targets.rows() != b || ghost_targets.cols() != d2 {
        return Err(Error::Dimension(format!(
            "ghost targets are {}x{}, expected {b}x{d2}",
            ghost_targets.rows(),
            ghost_targets.cols()
        )));
    }
    let dead_units: Vec<usize> =
        (0..model.d1()).filter(|&j| dead[j] && ghost_weight > 0.0).collect();
    let mut loss_sum = 0.0;
    for r in 0..b {
        let pre = model.pre_activations(batch.row(r))?;
        let phi = model.sparsify(&pre, s_eff);
        let psi_hat = model.decode(&phi);
        let psi = batch.row(r);
        loss_sum += psi_hat
            .iter()
            .zip(psi)
            .map(|(&a, &p)| (a - p) * (a - p))
            .sum::<f64>();
        if !dead_units.is_empty() {
            let mut psi_tilde = vec![0.0; d2];
            for &j in &dead_units {
                let v = pre[j];
                if v != 0.0 {
                    for i in 0..d2 {
                        psi_tilde[i] += model.decoder.get(i, j) * v;
                    }
                }
            }
            let target = ghost_targets.row(r);
            loss_sum += ghost_weight / d2 as f64
                * psi_tilde
                    .iter()
                    .zip(target)
                    .map(|(&t, &g)| (t - g) * (t - g))
                    .sum::<f64>();
        }
    }
    let loss = loss_sum / b as f64;
    if !loss.is_finite() {
        return Err(Error::Numeric("non-finite autoencoder loss".into()));
    }
    Ok(loss)
}

fn normalize_decoder_columns(decoder: &mut Matrix) {
    let (d2, d1) = (decoder.rows(), decoder.cols());
    for j in 0..d1 {
        let mut sq = 0.0;
        for i in 0..d2 {
            let v = decoder.get(i, j);
            sq += v * v;
        }
        let n = sq.sqrt();
        if n > 0.0 {
            for i in 0..d2 {
                decoder.set(i, j, decoder.get(i, j) / n);
            }
        }
    }
}

/// Training recipe for [`train_sae`]. Defaults follow the reference recipe:
/// peak LR 3e-4 after 5000 warmup steps with cosine decay over a 1e5-step
/// horizon, sparsity ramp 128 -> s over 10000 steps, batch 4096, dropout 0.5
/// on pre-activations, ghost weight 1e6, inactivity threshold 1e-4, global
/// gradient clip 1.
#[derive(Debug, Clone)]
pub struct SaeTrainConfig {
    pub d1: usize,
    pub s: usize,
    pub variant: SaeVariant,
    /// Disabled bias stays pinned at zero through training.
    pub bias_enabled: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub peak_lr: f64,
    pub warmup_steps: u64,
    pub horizon_steps: u64,
    /// Ramp start k0; clamped into [s, d1] before use.
    pub sparsity_start: usize,
    pub sparsity_ramp_steps: u64,
    pub dropout: f64,
    pub ghost_weight: f64,
    pub inactivity_threshold: f64,
    pub grad_clip: f64,
    /// Encoder init is uniform on [-a, a], a = encoder_init_scale / sqrt(d2).
    pub encoder_init_scale: f64,
    pub normalize_decoder: bool,
}

impl SaeTrainConfig {
    pub fn new(d1: usize, s: usize) -> Self {
        SaeTrainConfig {
            d1,
            s,
            variant: SaeVariant::TopK,
            bias_enabled: true,
            epochs: 100,
            batch_size: 4096,
            peak_lr: 3e-4,
            warmup_steps: 5_000,
            horizon_steps: 100_000,
            sparsity_start: 128,
            sparsity_ramp_steps: 10_000,
            dropout: 0.5,
            ghost_weight: 1e6,
            inactivity_threshold: 1e-4,
            grad_clip: 1.0,
            encoder_init_scale: 1.0,
            normalize_decoder: true,
        }
    }
}

/// Trained model plus the final activity state and the per-step loss trace.
#[derive(Debug, Clone)]
pub struct TrainedSae {
    pub model: SaeModel,
    pub tracker: ActivityTracker,
    pub loss_trace: Vec<f64>,
}

/// Trains a sparse autoencoder on the rows of `data`. Each step: dead mask
/// from the tracker, loss and gradients under the scheduled sparsity and a
/// fresh dropout mask, record activity, clip the joint gradient norm, Adam
/// on every tensor at the scheduled rate, then decoder column renorm.
pub fn train_sae(
    config: &SaeTrainConfig,
    data: &Matrix,
    rng: &mut SeededRng,
) -> Result<TrainedSae> {
    if config.s > config.d1 {
        return Err(Error::Config(format!(
            "sparsity {} exceeds dictionary size {}",
            config.s, config.d1
        )));
    }
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::Config("epochs and batch size must be positive".into()));
    }
    if !(0.0..1.0).contains(&config.dropout) {
        return Err(Error::Config(format!(
            "dropout rate {} outside [0, 1)",
            config.dropout
        )));
    }
    if !(config.grad_clip > 0.0) || !(config.peak_lr > 0.0) {
        return Err(Error::Config("clip norm and peak LR must be positive".into()));
    }
    if data.rows() == 0 {
        return Err(Error::Data("empty training set".into()));
    }

    let d1 = config.d1;
    let d2 = data.cols();
    let mut model = SaeModel::random(
        d1,
        d2,
        config.s,
        config.variant,
        config.encoder_init_scale,
        rng,
    )?;
    if !config.normalize_decoder {
        model.decoder = model.encoder.transpose();
    }

    let lr_schedule =
        Schedule::warmup_cosine(config.warmup_steps, config.horizon_steps, config.peak_lr)?;
    let s_start = config.sparsity_start.clamp(config.s, d1);
    let s_schedule = Schedule::linear_ramp(
        s_start as f64,
        config.s as f64,
        config.sparsity_ramp_steps.max(1),
    )?;

    let mut adam_e = AdamState::new(d1 * d2, config.peak_lr);
    let mut adam_b = AdamState::new(d1, config.peak_lr);
    let mut adam_d = AdamState::new(d2 * d1, config.peak_lr);
    let mut adam_t = AdamState::new(d1, config.peak_lr);

    let mut tracker = ActivityTracker::new(d1, config.inactivity_threshold);
    let mut loss_trace = Vec::new();
    let mut order: Vec<usize> = (0..data.rows()).collect();
    let mut step: u64 = 0;

    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(config.batch_size) {
            let mut batch = Matrix::zeros(chunk.len(), d2);
            for (r, &idx) in chunk.iter().enumerate() {
                batch.row_mut(r).copy_from_slice(data.row(idx));
            }

            let s_eff = (s_schedule.value(step).round() as usize).clamp(config.s, s_start);
            let dead = tracker.dead_mask();
            let eval = eval_batch(
                &model,
                &batch,
                s_eff,
                &dead,
                config.ghost_weight,
                config.dropout,
                Some(rng),
            )?;
            for act in &eval.active {
                tracker.record_row(act);
            }

            let mut g = eval.grads;
            if !config.bias_enabled {
                g.enc_bias.iter_mut().for_each(|v| *v = 0.0);
            }
            clip_gradient_norm_all(
                &mut [
                    g.encoder.data_mut(),
                    g.enc_bias.as_mut_slice(),
                    g.decoder.data_mut(),
                    g.theta_act.as_mut_slice(),
                ],
                config.grad_clip,
            );

            let lr = lr_schedule.value(step);
            adam_e.lr = lr;
            adam_b.lr = lr;
            adam_d.lr = lr;
            adam_t.lr = lr;
            adam_e.step(model.encoder.data_mut(), g.encoder.data())?;
            adam_b.step(&mut model.enc_bias, &g.enc_bias)?;
            adam_d.step(model.decoder.data_mut(), g.decoder.data())?;
            adam_t.step(&mut model.theta_act, &g.theta_act)?;

            if config.normalize_decoder {
                normalize_decoder_columns(&mut model.decoder);
            }
            loss_trace.push(eval.loss);
            step += 1;
        }
    }

    Ok(TrainedSae { model, tracker, loss_trace })
}
