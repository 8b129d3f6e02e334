//! Step-indexed schedules: learning-rate warmup with cosine decay, and the
//! linear sparsity ramp used by top-k autoencoder training.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Constant { value: f64 },
    /// 0 -> peak linearly over `warmup` steps, then cosine from peak to 0 at
    /// `horizon`: value = peak * 0.5 * (1 + cos(pi * t)) with
    /// t = (step - warmup) / (horizon - warmup).
    WarmupCosine { warmup: u64, horizon: u64, peak: f64 },
    /// start -> end linearly over `ramp` steps, constant afterwards.
    LinearRampConstant { start: f64, end: f64, ramp: u64 },
}

impl Schedule {
    pub fn warmup_cosine(warmup: u64, horizon: u64, peak: f64) -> Result<Self> {
        if warmup >= horizon {
            return Err(Error::Config(format!(
                "warmup {warmup} must be shorter than horizon {horizon}"
            )));
        }
        Ok(Schedule::WarmupCosine { warmup, horizon, peak })
    }

    pub fn linear_ramp(start: f64, end: f64, ramp: u64) -> Result<Self> {
        if ramp == 0 {
            return Err(Error::Config("ramp length must be positive".into()));
        }
        Ok(Schedule::LinearRampConstant { start, end, ramp })
    }

    pub fn value(&self, step: u64) -> f64 {
        match *self {
            Schedule::Constant { value } => value,
            Schedule::WarmupCosine { warmup, horizon, peak } => {
                if step < warmup {
                    peak * step as f64 / warmup as f64
                } else if step >= horizon {
                    0.0
                } else {
                    let t = (step - warmup) as f64 / (horizon - warmup) as f64;
                    peak * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
                }
            }
            Schedule::LinearRampConstant { start, end, ramp } => {
                if step >= ramp {
                    end
                } else {
                    start - (start - end) * step as f64 / ramp as f64
                }
            }
        }
    }
}

pub fn schedule_value(s: &Schedule, step: u64) -> f64 {
    s.value(step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_cosine_endpoints() {
        let s = Schedule::warmup_cosine(5000, 100_000, 3e-4).unwrap();
        assert_eq!(s.value(0), 0.0);
        assert!((s.value(5000) - 3e-4).abs() < 1e-18);
        assert!(s.value(100_000).abs() < 1e-18);
        assert!(s.value(2_000_000).abs() < 1e-18);
    }

    #[test]
    fn cosine_midpoint_is_half_peak() {
        let s = Schedule::warmup_cosine(5000, 100_000, 3e-4).unwrap();
        let mid = (5000 + 100_000) / 2;
        assert!((s.value(mid) - 1.5e-4).abs() < 1e-12);
    }

    #[test]
    fn sparsity_ramp_midpoint_matches_closed_form() {
        let s = Schedule::linear_ramp(128.0, 16.0, 10_000).unwrap();
        assert_eq!(s.value(5000), 72.0);
        assert_eq!(s.value(0), 128.0);
        assert_eq!(s.value(10_000), 16.0);
        assert_eq!(s.value(50_000), 16.0);
    }

    #[test]
    fn warmup_longer_than_horizon_is_config_error() {
        assert!(matches!(
            Schedule::warmup_cosine(10, 10, 1.0),
            Err(crate::error::Error::Config(_))
        ));
    }

    #[test]
    fn continuous_at_warmup_and_ramp_boundaries() {
        let s = Schedule::warmup_cosine(100, 1000, 0.5).unwrap();
        assert!((s.value(99) - s.value(100)).abs() < 0.5 / 100.0 + 1e-12);
        // Exact continuity: limit from the left hits peak at step = warmup.
        assert!((s.value(100) - 0.5).abs() < 1e-12);

        let r = Schedule::linear_ramp(128.0, 16.0, 1000).unwrap();
        assert!((r.value(999) - r.value(1000)).abs() < (128.0 - 16.0) / 1000.0 + 1e-12);
        assert!((r.value(1000) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_phase_multiplier_stays_in_unit_interval() {
        let s = Schedule::warmup_cosine(10, 500, 1.0).unwrap();
        for step in 0..600 {
            let v = s.value(step);
            assert!((0.0..=1.0).contains(&v), "step {step} -> {v}");
        }
    }
}
