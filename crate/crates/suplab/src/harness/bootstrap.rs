//! Percentile bootstrap confidence intervals for the mean.

use crate::error::{Error, Result};
use crate::numeric::rng::SeededRng;

/// Default resample count and level used across experiment reports.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
pub const BOOTSTRAP_LEVEL: f64 = 0.90;

/// Percentile bootstrap interval of the mean: resample with replacement,
/// take the alpha/2 and 1-alpha/2 quantiles of the resampled means
/// (nearest-rank on the sorted resamples).
pub fn bootstrap_ci(
    samples: &[f64],
    resamples: usize,
    level: f64,
    rng: &mut SeededRng,
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Data("no samples to bootstrap".into()));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::Config(format!("level {level} outside (0, 1)")));
    }
    if resamples == 0 {
        return Err(Error::Config("need at least one resample".into()));
    }
    let n = samples.len();
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += samples[rng.index(n)];
        }
        means.push(sum / n as f64);
    }
    means.sort_by(f64::total_cmp);
    let alpha = 0.5 * (1.0 - level);
    let lo_idx = (alpha * (resamples - 1) as f64).floor() as usize;
    let hi_idx = ((1.0 - alpha) * (resamples - 1) as f64).ceil() as usize;
    Ok((means[lo_idx], means[hi_idx.min(resamples - 1)]))
}

/// Mean of a sample slice; empty slices are the caller's bug.
pub fn mean(samples: &[f64]) -> f64 {
    debug_assert!(!samples.is_empty());
    samples.iter().sum::<f64>() / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_give_a_zero_width_interval() {
        let samples = vec![0.25; 40];
        let (lo, hi) =
            bootstrap_ci(&samples, 1000, 0.90, &mut SeededRng::new(1)).unwrap();
        assert_eq!(lo, 0.25);
        assert_eq!(hi, 0.25);
    }

    #[test]
    fn interval_contains_the_sample_mean() {
        let mut rng = SeededRng::new(2);
        for trial in 0..20 {
            let samples: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
            let m = mean(&samples);
            let (lo, hi) =
                bootstrap_ci(&samples, 1000, 0.90, &mut rng.stream(100 + trial)).unwrap();
            assert!(lo <= m && m <= hi, "mean {m} outside [{lo}, {hi}]");
            assert!(lo <= hi);
        }
    }

    #[test]
    fn coverage_for_bernoulli_matches_the_nominal_level() {
        // True mean 0.3, n = 200, 500 replications: the 90% interval should
        // cover the truth between 85% and 95% of the time.
        let mut covered = 0;
        for rep in 0..500 {
            let mut rng = SeededRng::with_stream(9, rep);
            let samples: Vec<f64> =
                (0..200).map(|_| if rng.bernoulli(0.3) { 1.0 } else { 0.0 }).collect();
            let (lo, hi) = bootstrap_ci(&samples, 1000, 0.90, &mut rng).unwrap();
            if lo <= 0.3 && 0.3 <= hi {
                covered += 1;
            }
        }
        let rate = covered as f64 / 500.0;
        assert!(
            (0.85..=0.95).contains(&rate),
            "coverage {rate} outside [0.85, 0.95]"
        );
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let mut rng = SeededRng::new(3);
        assert!(matches!(
            bootstrap_ci(&[], 100, 0.9, &mut rng),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            bootstrap_ci(&[1.0], 100, 1.0, &mut rng),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            bootstrap_ci(&[1.0], 0, 0.9, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn resampling_is_deterministic_per_stream() {
        let samples: Vec<f64> = (0..30).map(|i| (i % 7) as f64).collect();
        let a = bootstrap_ci(&samples, 500, 0.9, &mut SeededRng::new(4)).unwrap();
        let b = bootstrap_ci(&samples, 500, 0.9, &mut SeededRng::new(4)).unwrap();
        assert_eq!(a, b);
    }
}
