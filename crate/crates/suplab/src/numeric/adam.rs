//! Adam with bias correction, operating on flat parameter slices.
//! Defaults: beta1 0.9, beta2 0.999, eps 1e-8, weight decay 0.
//! Weight decay, when nonzero, is the classic L2 form folded into the
//! gradient before the moment updates.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
    pub weight_decay: f64,
}

impl AdamState {
    pub fn new(n: usize, lr: f64) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
            weight_decay: 0.0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update. Rejects non-finite gradients before any
    /// state is touched, so a failed step leaves params and buffers intact.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension(format!(
                "adam buffers sized {}, got params {} grads {}",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite gradient entry; update aborted".into()));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i] + self.weight_decay * params[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Rescales `grads` so its l2 norm is at most `max_norm`; shorter gradients
/// pass through untouched.
pub fn clip_gradient_norm(grads: &mut [f64], max_norm: f64) {
    debug_assert!(max_norm > 0.0);
    let n = super::matrix::norm2(grads);
    if n > max_norm {
        super::matrix::scale_in_place(grads, max_norm / n);
    }
}

/// Clips the joint l2 norm taken across several gradient tensors, so a model
/// with multiple parameter blocks sees one global threshold rather than one
/// per block.
pub fn clip_gradient_norm_all(tensors: &mut [&mut [f64]], max_norm: f64) {
    debug_assert!(max_norm > 0.0);
    let mut sq = 0.0;
    for t in tensors.iter() {
        for &g in t.iter() {
            sq += g * g;
        }
    }
    let n = sq.sqrt();
    if n > max_norm {
        let scale = max_norm / n;
        for t in tensors.iter_mut() {
            super::matrix::scale_in_place(t, scale);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::matrix::norm2;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // With bias correction, step 1 gives mhat = g, vhat = g^2, so the
        // update is lr * g / (|g| + eps) which is lr * sign(g) as eps -> 0.
        let mut st = AdamState::new(2, 0.1);
        let mut w = vec![0.0, 0.0];
        st.step(&mut w, &[3.0, -0.04]).unwrap();
        assert!((w[0] - (-0.1)).abs() < 1e-7);
        assert!((w[1] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut st = AdamState::new(3, 0.5);
        let mut w = vec![1.0, -2.0, 0.25];
        for _ in 0..5 {
            st.step(&mut w, &[0.0, 0.0, 0.0]).unwrap();
        }
        assert_eq!(w, vec![1.0, -2.0, 0.25]);
    }

    #[test]
    fn ten_steps_on_quadratic_match_hand_stepped_trace() {
        // f(w) = w^2 / 2 from w = 1 at lr = 0.1; trace computed independently
        // by stepping the update rule with scalar arithmetic.
        let oracle = [
            0.900000001,
            0.8004122297123382,
            0.701586274504415,
            0.603939062682108,
            0.507963661927221,
            0.41423645920501484,
            0.32342070867887096,
            0.23626372875154017,
            0.15358456473296608,
            0.07624916061975533,
        ];
        let mut st = AdamState::new(1, 0.1);
        let mut w = vec![1.0];
        for want in oracle {
            let g = w[0];
            st.step(&mut w, &[g]).unwrap();
            assert!((w[0] - want).abs() < 1e-10, "got {} want {}", w[0], want);
        }
    }

    #[test]
    fn non_finite_gradient_aborts_without_mutation() {
        let mut st = AdamState::new(2, 0.1);
        let mut w = vec![1.0, 2.0];
        st.step(&mut w, &[0.5, 0.5]).unwrap();
        let before = w.clone();
        let err = st.step(&mut w, &[f64::NAN, 0.0]);
        assert!(matches!(err, Err(crate::error::Error::Numeric(_))));
        assert_eq!(w, before);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn step_counter_increases_by_one_per_update() {
        let mut st = AdamState::new(1, 0.1);
        let mut w = vec![0.0];
        for want in 1..=4 {
            st.step(&mut w, &[1.0]).unwrap();
            assert_eq!(st.step_count(), want);
        }
    }

    #[test]
    fn constant_gradient_step_magnitude_converges_to_lr() {
        // With weight decay 0 and constant gradient g, mhat -> g and
        // vhat -> g^2, so the step magnitude approaches lr * |g| / (|g| + eps).
        let mut st = AdamState::new(1, 0.01);
        let mut w = vec![0.0];
        let mut prev = w[0];
        let mut last_step = 0.0;
        for _ in 0..5000 {
            st.step(&mut w, &[2.5]).unwrap();
            last_step = (w[0] - prev).abs();
            prev = w[0];
        }
        assert!((last_step - 0.01).abs() < 1e-6);
    }

    #[test]
    fn clip_leaves_short_gradients_alone() {
        let mut g = vec![0.3, 0.4];
        clip_gradient_norm(&mut g, 1.0);
        assert_eq!(g, vec![0.3, 0.4]);
    }

    #[test]
    fn clip_rescales_to_exactly_max_norm() {
        let mut g = vec![3.0, 4.0];
        clip_gradient_norm(&mut g, 1.0);
        assert!((g[0] - 0.6).abs() < 1e-12);
        assert!((g[1] - 0.8).abs() < 1e-12);
        assert!((norm2(&g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn global_clip_scales_every_tensor_by_the_same_factor() {
        // Joint norm is 5; clipping to 1 must scale both blocks by 1/5, which
        // a per-block clip would not do (the second block alone has norm 4).
        let mut a = vec![3.0];
        let mut b = vec![4.0];
        clip_gradient_norm_all(&mut [&mut a, &mut b], 1.0);
        assert!((a[0] - 0.6).abs() < 1e-12);
        assert!((b[0] - 0.8).abs() < 1e-12);

        let mut c = vec![0.1];
        let mut d = vec![0.2];
        clip_gradient_norm_all(&mut [&mut c, &mut d], 1.0);
        assert_eq!((c[0], d[0]), (0.1, 0.2));
    }
}
