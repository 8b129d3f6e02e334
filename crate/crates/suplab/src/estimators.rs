//! Regression estimators over feature space: global minimum-norm least
//! squares, the sparsity-constrained local fit used by test-time training,
//! ridge, and k-NN averaging, plus the interference and rate measurements
//! that compare them.

use crate::concepts::{ConceptWorld, NonLearnableInstance, Sample};
use crate::error::{Error, Result};
use crate::neighborhood::{cosine_similarity, Neighborhood, Space};
use crate::numeric::matrix::{dot, Matrix};
use crate::numeric::linalg::lstsq_minnorm;
use crate::numeric::rng::SeededRng;
use rayon::prelude::*;

/// Global linear readout. `residual` is the mean squared training residual.
#[derive(Debug, Clone)]
pub struct GlobalModel {
    pub v: Vec<f64>,
    pub residual: f64,
    pub rank: usize,
}

impl GlobalModel {
    pub fn predict(&self, feature: &[f64]) -> f64 {
        dot(&self.v, feature)
    }
}

/// Local readout with its selected concept support. `concept_coeffs` are the
/// restricted least-squares coefficients aligned with `support` (the local
/// model in concept space, before realization). The realized weights satisfy:
/// P_local^T v is supported on `support` (entries off the support below 1e-8)
/// whenever the active columns of P_local are linearly independent.
#[derive(Debug, Clone)]
pub struct LocalModel {
    pub v: Vec<f64>,
    pub support: Vec<usize>,
    pub concept_coeffs: Vec<f64>,
    pub members: Vec<usize>,
    pub residual: f64,
}

impl LocalModel {
    pub fn predict(&self, feature: &[f64]) -> f64 {
        dot(&self.v, feature)
    }
}

/// Support search strategy for the l0-constrained local fit. Exhaustive
/// enumeration is exact but limited to small active sets; greedy is
/// orthogonal-matching-pursuit-style forward selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    Exhaustive,
    Greedy,
}

/// Excess-error curve over neighborhood sizes. `estimation` is the
/// k-dependent part (first-k mean minus the plateau), `inherent` the plateau
/// at the largest k; both clamped at zero.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub noise_floor: f64,
    pub estimation: f64,
    pub inherent: f64,
    pub per_k: Vec<KErrorPoint>,
}

#[derive(Debug, Clone)]
pub struct KErrorPoint {
    pub k: usize,
    pub mean: f64,
    pub samples: Vec<f64>,
}

/// Interference error of the global min-norm readout on a non-learnable
/// instance: the measured population error for the realized directions next
/// to the seed-averaged target 1 - d2/d1.
#[derive(Debug, Clone, Copy)]
pub struct InterferenceReport {
    pub measured: f64,
    pub analytic: f64,
}

/// Minimum-norm least squares readout of labels from feature rows.
pub fn fit_global_minnorm(features: &Matrix, labels: &[f64]) -> Result<GlobalModel> {
    if !features.is_finite() {
        return Err(Error::Numeric("non-finite feature matrix".into()));
    }
    let k = features.rows();
    if labels.len() != k {
        return Err(Error::Dimension(format!(
            "{} labels for {} feature rows",
            labels.len(),
            k
        )));
    }
    let fit = lstsq_minnorm(features, labels)?;
    Ok(GlobalModel { v: fit.x, residual: fit.resid_ss / k.max(1) as f64, rank: fit.rank })
}

/// Ridge readout (X^T X + k lambda I)^{-1} X^T y; lambda 0 falls back to the
/// pseudoinverse so rank deficiency stays well-defined.
pub fn fit_ridge(features: &Matrix, labels: &[f64], lambda: f64) -> Result<GlobalModel> {
    if lambda < 0.0 {
        return Err(Error::Config("lambda must be nonnegative".into()));
    }
    let k = features.rows();
    if labels.len() != k {
        return Err(Error::Dimension(format!(
            "{} labels for {} feature rows",
            labels.len(),
            k
        )));
    }
    if lambda == 0.0 {
        return fit_global_minnorm(features, labels);
    }
    let v = crate::numeric::linalg::solve_regularized_normal_eq(
        features,
        labels,
        k as f64 * lambda,
    )?;
    let pred = features.matvec(&v)?;
    let resid_ss: f64 = pred.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum();
    let d = features.cols();
    Ok(GlobalModel { v, residual: resid_ss / k.max(1) as f64, rank: d.min(k) })
}

/// Mean label of the neighborhood members (uniform k-NN regression).
pub fn knn_regress(nbhd: &Neighborhood, labels: &[f64]) -> Result<f64> {
    if nbhd.is_empty() {
        return Err(Error::Retrieval("empty neighborhood".into()));
    }
    let mut sum = 0.0;
    for &m in &nbhd.members {
        let y = labels
            .get(m)
            .ok_or_else(|| Error::Retrieval(format!("member {m} outside label array")))?;
        sum += y;
    }
    Ok(sum / nbhd.len() as f64)
}

fn binomial_approx(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    let mut c = 1.0f64;
    for i in 0..k {
        c *= (n - i) as f64 / (i + 1) as f64;
        if c > 1e12 {
            return c;
        }
    }
    c
}

fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // Advance to the next lexicographic combination.
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Restricted least squares of y on the chosen concept columns. Returns the
/// coefficients and the residual sum of squares.
fn restricted_fit(phi_cols: &Matrix, cols: &[usize], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let k = phi_cols.rows();
    let mut design = Matrix::zeros(k, cols.len());
    for (j, &c) in cols.iter().enumerate() {
        for i in 0..k {
            design.set(i, j, phi_cols.get(i, c));
        }
    }
    let fit = lstsq_minnorm(&design, y)?;
    Ok((fit.x, fit.resid_ss))
}

/// The l0-constrained local fit: minimize the neighborhood mean squared
/// error over readouts v whose concept-space image P_local^T v has at most
/// s' nonzeros. Support search runs over the concepts that are both active
/// in P_local and present in some member; the winning coefficients are then
/// realized as the min-norm v matching them (and zero elsewhere on the
/// active set). When s' is at least the number of active columns the
/// constraint is vacuous and the global min-norm fit is returned.
pub fn fit_ttt_sparse(
    nbhd: &Neighborhood,
    dataset: &[Sample],
    p_local: &Matrix,
    s_prime: usize,
    mode: FitMode,
) -> Result<LocalModel> {
    if s_prime == 0 {
        return Err(Error::Config("s' must be at least 1".into()));
    }
    if nbhd.is_empty() {
        return Err(Error::Retrieval("empty neighborhood".into()));
    }
    let d2 = p_local.rows();
    let d1 = p_local.cols();
    let k = nbhd.members.len();

    let mut psi = Matrix::zeros(k, d2);
    let mut y = Vec::with_capacity(k);
    let mut union: Vec<usize> = Vec::new();
    for (row, &m) in nbhd.members.iter().enumerate() {
        let s = dataset
            .get(m)
            .ok_or_else(|| Error::Retrieval(format!("member {m} outside dataset")))?;
        if s.feature.len() != d2 {
            return Err(Error::Dimension(format!(
                "feature length {} vs map rows {d2}",
                s.feature.len()
            )));
        }
        if s.concept.dim() != d1 {
            return Err(Error::Dimension(format!(
                "concept dim {} vs map cols {d1}",
                s.concept.dim()
            )));
        }
        for (j, &x) in s.feature.iter().enumerate() {
            psi.set(row, j, x);
        }
        y.push(s.label);
        for &(c, _) in s.concept.entries() {
            union.push(c);
        }
    }
    union.sort_unstable();
    union.dedup();

    // Active columns of the local map; the fit's support can only live here.
    let mut active: Vec<usize> = Vec::new();
    for c in 0..d1 {
        if (0..d2).any(|r| p_local.get(r, c) != 0.0) {
            active.push(c);
        }
    }
    let candidates: Vec<usize> =
        union.iter().copied().filter(|c| active.binary_search(c).is_ok()).collect();

    if s_prime >= active.len() {
        // Vacuous constraint: every readout satisfies it.
        let global = fit_global_minnorm(&psi, &y)?;
        let image = p_local.matvec_transa(&global.v)?;
        let support: Vec<usize> =
            active.iter().copied().filter(|&c| image[c].abs() > 1e-10).collect();
        let concept_coeffs: Vec<f64> = support.iter().map(|&c| image[c]).collect();
        return Ok(LocalModel {
            v: global.v,
            support,
            concept_coeffs,
            members: nbhd.members.clone(),
            residual: global.residual,
        });
    }

    // Dense member-by-concept values for the candidate columns.
    let mut phi_cols = Matrix::zeros(k, d1);
    for (row, &m) in nbhd.members.iter().enumerate() {
        for &(c, x) in dataset[m].concept.entries() {
            phi_cols.set(row, c, x);
        }
    }

    let m_size = s_prime.min(candidates.len());
    let (support, coeffs) = if candidates.is_empty() || m_size == 0 {
        (Vec::new(), Vec::new())
    } else {
        match mode {
            FitMode::Exhaustive => {
                if binomial_approx(candidates.len(), m_size) > 1e6 {
                    return Err(Error::Budget(format!(
                        "exhaustive support search over C({}, {m_size}) exceeds 1e6; use greedy",
                        candidates.len()
                    )));
                }
                let mut best: Option<(Vec<usize>, Vec<f64>, f64)> = None;
                let mut failure: Option<Error> = None;
                for_each_combination(candidates.len(), m_size, |pick| {
                    if failure.is_some() {
                        return;
                    }
                    let cols: Vec<usize> = pick.iter().map(|&i| candidates[i]).collect();
                    match restricted_fit(&phi_cols, &cols, &y) {
                        Ok((z, rss)) => {
                            if best.as_ref().map_or(true, |b| rss < b.2) {
                                best = Some((cols, z, rss));
                            }
                        }
                        Err(e) => failure = Some(e),
                    }
                });
                if let Some(e) = failure {
                    return Err(e);
                }
                let (cols, z, _) = best.expect("at least one combination");
                (cols, z)
            }
            FitMode::Greedy => {
                let mut chosen: Vec<usize> = Vec::new();
                let mut z: Vec<f64> = Vec::new();
                let mut resid = y.clone();
                let col_norms: Vec<f64> = candidates
                    .iter()
                    .map(|&c| {
                        (0..k).map(|i| phi_cols.get(i, c).powi(2)).sum::<f64>().sqrt()
                    })
                    .collect();
                for _ in 0..m_size {
                    let mut best_c = None;
                    let mut best_corr = 0.0;
                    for (ci, &c) in candidates.iter().enumerate() {
                        if chosen.contains(&c) || col_norms[ci] == 0.0 {
                            continue;
                        }
                        let corr: f64 =
                            (0..k).map(|i| phi_cols.get(i, c) * resid[i]).sum::<f64>().abs()
                                / col_norms[ci];
                        if corr > best_corr + 1e-15 {
                            best_corr = corr;
                            best_c = Some(c);
                        }
                    }
                    let Some(c) = best_c else { break };
                    chosen.push(c);
                    chosen.sort_unstable();
                    let (zz, rss) = restricted_fit(&phi_cols, &chosen, &y)?;
                    z = zz;
                    for (i, r) in resid.iter_mut().enumerate() {
                        let pred: f64 = chosen
                            .iter()
                            .zip(&z)
                            .map(|(&c, &w)| phi_cols.get(i, c) * w)
                            .sum();
                        *r = y[i] - pred;
                    }
                    if rss <= 1e-24 * k as f64 {
                        break;
                    }
                }
                (chosen, z)
            }
        }
    };

    // Realize the concept-space solution as a feature-space readout: the
    // min-norm v with <p_c, v> equal to the coefficient on the support and
    // zero on the rest of the active set.
    let mut constraint = Matrix::zeros(active.len(), d2);
    let mut rhs = vec![0.0; active.len()];
    for (row, &c) in active.iter().enumerate() {
        for j in 0..d2 {
            constraint.set(row, j, p_local.get(j, c));
        }
        if let Some(pos) = support.iter().position(|&sc| sc == c) {
            rhs[row] = coeffs[pos];
        }
    }
    let v = lstsq_minnorm(&constraint, &rhs)?.x;
    let pred = psi.matvec(&v)?;
    let resid_ss: f64 = pred.iter().zip(&y).map(|(p, yy)| (p - yy) * (p - yy)).sum();

    Ok(LocalModel {
        v,
        support,
        concept_coeffs: coeffs,
        members: nbhd.members.clone(),
        residual: resid_ss / k as f64,
    })
}

/// Population interference error of the global min-norm readout on the
/// non-learnable instance: the design stacks every cell's direction, labels
/// are all one, and the error is the mean squared residual (cells are
/// equiprobable).
pub fn evaluate_interference(instance: &NonLearnableInstance) -> Result<InterferenceReport> {
    let d1 = instance.d1;
    let d2 = instance.d2;
    let mut design = Matrix::zeros(d1, d2);
    for m in 0..d1 {
        let col = instance.p.col(m);
        for (j, &x) in col.iter().enumerate() {
            design.set(m, j, x);
        }
    }
    let ones = vec![1.0; d1];
    let fit = lstsq_minnorm(&design, &ones)?;
    Ok(InterferenceReport {
        measured: fit.resid_ss / d1 as f64,
        analytic: 1.0 - d2 as f64 / d1 as f64,
    })
}

/// Mean squared excess prediction error of the greedy local fit at fresh
/// test points, as a function of neighborhood size. Each trial draws a test
/// point from the world's law and k members at the tight-retrieval limit
/// (same active concepts, fresh values and noise) — the regime where the
/// local model is exactly s-sparse and the error is pure coefficient
/// estimation. Measures (prediction - noiseless truth)^2. Trials use RNG
/// streams 0..len(ks)*trials of the supplied generator's base seed, so the
/// curve is reproducible under any parallel schedule.
pub fn ttt_rate_curve(
    world: &ConceptWorld,
    ks: &[usize],
    s_prime: usize,
    trials: usize,
    rng: &SeededRng,
) -> Result<ErrorReport> {
    if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("k values must be strictly increasing".into()));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    let mut per_k = Vec::with_capacity(ks.len());
    for (ki, &k) in ks.iter().enumerate() {
        let samples: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<f64> {
                let mut r = rng.stream((ki * trials + t) as u64);
                let g = r.index(world.pool_count());
                let test = world.sample_from_pool(g, &mut r);
                let support: Vec<usize> =
                    test.concept.entries().iter().map(|&(c, _)| c).collect();
                let members: Vec<Sample> = (0..k)
                    .map(|_| world.sample_with_support(&support, &mut r))
                    .collect::<Result<Vec<_>>>()?;
                let p_local = world.local_map_for_pool(g);
                let mut scored: Vec<(usize, f64)> = members
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        (i, cosine_similarity(&test.feature, &s.feature).unwrap_or(-2.0))
                    })
                    .collect();
                scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                let nbhd = Neighborhood {
                    query: test.feature.clone(),
                    members: scored.iter().map(|e| e.0).collect(),
                    sims: scored.iter().map(|e| e.1).collect(),
                    space: Space::Feature,
                    radius: None,
                };
                let fit = fit_ttt_sparse(&nbhd, &members, &p_local, s_prime, FitMode::Greedy)?;
                let excess = fit.predict(&test.feature) - world.f_star(&test.concept);
                Ok(excess * excess)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean = samples.iter().sum::<f64>() / trials as f64;
        per_k.push(KErrorPoint { k, mean, samples });
    }
    let first = per_k.first().map(|p| p.mean).unwrap_or(0.0);
    let last = per_k.last().map(|p| p.mean).unwrap_or(0.0);
    Ok(ErrorReport {
        noise_floor: world.sigma2,
        estimation: (first - last).max(0.0),
        inherent: last,
        per_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::{
        make_nonlearnable_instance, sample_dataset, SparseVector, SupportLaw,
    };
    use crate::neighborhood::knn;
    use crate::numeric::linalg::{cholesky_solve, qr_thin};
    use crate::numeric::matrix::norm2;

    fn pool_neighborhood(members: usize) -> Neighborhood {
        Neighborhood {
            query: vec![1.0],
            members: (0..members).collect(),
            sims: vec![1.0; members],
            space: Space::Feature,
            radius: None,
        }
    }

    #[test]
    fn identity_design_recovers_labels() {
        let x = Matrix::identity(4);
        let y = vec![2.0, -1.0, 0.5, 3.0];
        let m = fit_global_minnorm(&x, &y).unwrap();
        for (a, b) in m.v.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(m.residual < 1e-24);
        assert_eq!(m.rank, 4);
    }

    #[test]
    fn square_nonlearnable_instance_is_globally_learnable() {
        let mut rng = SeededRng::new(30);
        let inst = make_nonlearnable_instance(16, 16, &mut rng).unwrap();
        let rep = evaluate_interference(&inst).unwrap();
        assert!(rep.measured < 1e-12, "measured {}", rep.measured);
        assert_eq!(rep.analytic, 0.0);
    }

    #[test]
    fn minnorm_agrees_with_normal_equations_on_full_rank_design() {
        let mut rng = SeededRng::new(31);
        for _ in 0..10 {
            let x = Matrix::from_vec(
                20,
                5,
                (0..100).map(|_| rng.normal()).collect(),
            )
            .unwrap();
            let y: Vec<f64> = (0..20).map(|_| rng.normal()).collect();
            let m = fit_global_minnorm(&x, &y).unwrap();
            let xtx = x.matmul_transa(&x).unwrap();
            let xty = x.matvec_transa(&y).unwrap();
            let oracle = cholesky_solve(&xtx, &xty).unwrap();
            for (a, b) in m.v.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn interference_matches_analytic_mean_over_seeds() {
        // d1 128, d2 32 -> 0.75; d1 256, d2 16 -> 0.9375; both within 0.02.
        let mut total = 0.0;
        for seed in 0..200 {
            let mut rng = SeededRng::new(seed);
            let inst = make_nonlearnable_instance(128, 32, &mut rng).unwrap();
            total += evaluate_interference(&inst).unwrap().measured;
        }
        let mean = total / 200.0;
        assert!((mean - 0.75).abs() < 0.02, "mean {mean}");

        let mut total = 0.0;
        for seed in 200..400 {
            let mut rng = SeededRng::new(seed);
            let inst = make_nonlearnable_instance(256, 16, &mut rng).unwrap();
            total += evaluate_interference(&inst).unwrap().measured;
        }
        let mean = total / 200.0;
        assert!((mean - 0.9375).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn interference_measured_matches_qr_projection_route() {
        for seed in 40..50 {
            let mut rng = SeededRng::new(seed);
            let inst = make_nonlearnable_instance(64, 24, &mut rng).unwrap();
            let rep = evaluate_interference(&inst).unwrap();

            let mut design = Matrix::zeros(64, 24);
            for m in 0..64 {
                let col = inst.p.col(m);
                for (j, &x) in col.iter().enumerate() {
                    design.set(m, j, x);
                }
            }
            let (q, _) = qr_thin(&design).unwrap();
            let ones = vec![1.0; 64];
            let qt1 = q.matvec_transa(&ones).unwrap();
            let proj = q.matvec(&qt1).unwrap();
            let resid: f64 = ones.iter().zip(&proj).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!(
                (rep.measured - resid / 64.0).abs() < 1e-9,
                "svd {} qr {}",
                rep.measured,
                resid / 64.0
            );
        }
    }

    #[test]
    fn ttt_beats_global_on_every_nonlearnable_seed() {
        for seed in 50..60 {
            let mut rng = SeededRng::new(seed);
            let inst = make_nonlearnable_instance(32, 8, &mut rng).unwrap();
            let global = evaluate_interference(&inst).unwrap();
            assert!(global.measured > 0.5, "rank-8 design cannot fit 32 cells");

            // Local fit in each cell is exact.
            let cells = inst.all_cells();
            for m in 0..32 {
                let nbhd = Neighborhood {
                    query: cells[m].feature.clone(),
                    members: vec![m],
                    sims: vec![1.0],
                    space: Space::Feature,
                    radius: None,
                };
                let p_local = inst.local_map(m);
                let fit =
                    fit_ttt_sparse(&nbhd, &cells, &p_local, 1, FitMode::Exhaustive).unwrap();
                let err = (fit.predict(&cells[m].feature) - 1.0).powi(2);
                assert!(err < 1e-16, "cell {m} err {err}");
            }
        }
    }

    #[test]
    fn one_cell_neighborhood_recovers_one_sparse_support() {
        let mut rng = SeededRng::new(61);
        let inst = make_nonlearnable_instance(24, 6, &mut rng).unwrap();
        let cells = inst.all_cells();
        let m = 17;
        let nbhd = Neighborhood {
            query: cells[m].feature.clone(),
            members: vec![m],
            sims: vec![1.0],
            space: Space::Feature,
            radius: None,
        };
        let p_local = inst.local_map(m);
        for mode in [FitMode::Exhaustive, FitMode::Greedy] {
            let fit = fit_ttt_sparse(&nbhd, &cells, &p_local, 1, mode).unwrap();
            assert_eq!(fit.support, vec![m]);
            assert!(fit.residual < 1e-20);
            assert!((fit.predict(&cells[m].feature) - 1.0).abs() < 1e-10);
            // Concept-space image is 1-sparse.
            let image = p_local.matvec_transa(&fit.v).unwrap();
            for (c, &z) in image.iter().enumerate() {
                if c == m {
                    assert!((z - 1.0).abs() < 1e-8);
                } else {
                    assert!(z.abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn unconstrained_sparsity_budget_equals_global_minnorm() {
        let mut rng = SeededRng::new(62);
        let world =
            ConceptWorld::random(12, 8, 2, SupportLaw::Uniform, 0.04, &mut rng).unwrap();
        let data = sample_dataset(&world, 30, &mut rng);
        let q = world.sample(&mut rng);
        let nbhd = knn(&q.feature, &data, 30, Space::Feature).unwrap();

        let fit = fit_ttt_sparse(&nbhd, &data, &world.p, 12, FitMode::Greedy).unwrap();
        let mut psi = Matrix::zeros(30, 8);
        let mut y = vec![0.0; 30];
        for (row, &m) in nbhd.members.iter().enumerate() {
            for (j, &x) in data[m].feature.iter().enumerate() {
                psi.set(row, j, x);
            }
            y[row] = data[m].label;
        }
        let global = fit_global_minnorm(&psi, &y).unwrap();
        for (a, b) in fit.v.iter().zip(&global.v) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn greedy_matches_exhaustive_on_planted_sparse_truth() {
        // Noiseless labels generated by a 2-sparse readout over incoherent
        // columns: both modes find the planted support with zero residual.
        for seed in 0..50 {
            let mut rng = SeededRng::new(1000 + seed);
            let mut world =
                ConceptWorld::random(12, 24, 2, SupportLaw::Uniform, 0.0, &mut rng).unwrap();
            let a = rng.index(12);
            let mut b = rng.index(12);
            while b == a {
                b = rng.index(12);
            }
            let mut w = vec![0.0; 12];
            w[a] = rng.sign() * rng.uniform_in(0.5, 1.0);
            w[b] = rng.sign() * rng.uniform_in(0.5, 1.0);
            world.w_star = w;
            let data = sample_dataset(&world, 40, &mut rng);
            let nbhd = pool_neighborhood(40);

            let ex = fit_ttt_sparse(&nbhd, &data, &world.p, 2, FitMode::Exhaustive).unwrap();
            let gr = fit_ttt_sparse(&nbhd, &data, &world.p, 2, FitMode::Greedy).unwrap();
            assert!(
                (ex.residual - gr.residual).abs() < 1e-9,
                "seed {seed}: exhaustive {} greedy {}",
                ex.residual,
                gr.residual
            );
            assert!(ex.residual < 1e-16);
            let mut planted = vec![a.min(b), a.max(b)];
            planted.dedup();
            // The planted concepts that actually appear in the data are found.
            let seen: Vec<usize> = planted
                .into_iter()
                .filter(|&c| data.iter().any(|s| s.concept.get(c) != 0.0))
                .collect();
            for c in seen {
                assert!(ex.support.contains(&c), "seed {seed} support {:?}", ex.support);
            }
        }
    }

    #[test]
    fn greedy_residual_never_beats_exhaustive() {
        for seed in 0..20 {
            let mut rng = SeededRng::new(2000 + seed);
            let world =
                ConceptWorld::random(10, 16, 3, SupportLaw::Uniform, 0.09, &mut rng).unwrap();
            let data = sample_dataset(&world, 25, &mut rng);
            let nbhd = pool_neighborhood(25);
            let ex = fit_ttt_sparse(&nbhd, &data, &world.p, 2, FitMode::Exhaustive).unwrap();
            let gr = fit_ttt_sparse(&nbhd, &data, &world.p, 2, FitMode::Greedy).unwrap();
            assert!(gr.residual >= ex.residual - 1e-12);
            if gr.support == ex.support {
                assert!((gr.residual - ex.residual).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exhaustive_mode_rejects_oversized_enumerations() {
        let mut rng = SeededRng::new(63);
        let world =
            ConceptWorld::random(64, 32, 8, SupportLaw::Uniform, 0.0, &mut rng).unwrap();
        let data = sample_dataset(&world, 200, &mut rng);
        let nbhd = pool_neighborhood(200);
        // Union of supports approaches 64 concepts; C(~64, 8) >> 1e6.
        let err = fit_ttt_sparse(&nbhd, &data, &world.p, 8, FitMode::Exhaustive);
        assert!(matches!(err, Err(Error::Budget(_))));
    }

    #[test]
    fn ridge_limits_match_least_squares_and_zero() {
        let mut rng = SeededRng::new(64);
        let x = Matrix::from_vec(20, 5, (0..100).map(|_| rng.normal()).collect()).unwrap();
        let y: Vec<f64> = (0..20).map(|_| rng.normal()).collect();
        let ls = fit_global_minnorm(&x, &y).unwrap();
        let r0 = fit_ridge(&x, &y, 0.0).unwrap();
        for (a, b) in ls.v.iter().zip(&r0.v) {
            assert!((a - b).abs() < 1e-10);
        }
        let rbig = fit_ridge(&x, &y, 1e12).unwrap();
        assert!(norm2(&rbig.v) < 1e-9);
        assert!(fit_ridge(&x, &y, -1.0).is_err());
    }

    #[test]
    fn ridge_scalar_closed_form() {
        let x = Matrix::from_vec(1, 1, vec![2.0]).unwrap();
        let y = vec![3.0];
        let m = fit_ridge(&x, &y, 0.5).unwrap();
        // v = x y / (x^2 + k lambda) with k = 1.
        assert!((m.v[0] - 6.0 / 4.5).abs() < 1e-12);
    }

    #[test]
    fn knn_regress_averages_member_labels() {
        let nbhd = pool_neighborhood(3);
        assert!((knn_regress(&nbhd, &[0.0, 1.0, 1.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(knn_regress(&nbhd, &[4.0, 4.0, 4.0]).unwrap(), 4.0);
        let mut rng = SeededRng::new(65);
        let labels: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let want = labels.iter().sum::<f64>() / 3.0;
        assert!((knn_regress(&nbhd, &labels).unwrap() - want).abs() < 1e-15);
        let empty = Neighborhood {
            query: vec![1.0],
            members: vec![],
            sims: vec![],
            space: Space::Feature,
            radius: None,
        };
        assert!(knn_regress(&empty, &labels).is_err());
    }

    #[test]
    fn noiseless_pool_fit_has_zero_excess_at_every_k() {
        let mut rng = SeededRng::new(66);
        let world = ConceptWorld::random(
            64,
            32,
            3,
            SupportLaw::clustered_default(3),
            0.0,
            &mut rng,
        )
        .unwrap();
        // Noiseless same-support members: the s-sparse fit is exact.
        let report = ttt_rate_curve(&world, &[24, 48], 3, 20, &rng).unwrap();
        for p in &report.per_k {
            assert!(p.mean < 1e-12, "k {} mean {}", p.k, p.mean);
        }
        assert_eq!(report.noise_floor, 0.0);
    }

    #[test]
    fn excess_error_decays_with_neighborhood_size() {
        let mut rng = SeededRng::new(67);
        let world = ConceptWorld::random(
            256,
            64,
            4,
            SupportLaw::clustered_default(4),
            0.25,
            &mut rng,
        )
        .unwrap();
        let report = ttt_rate_curve(&world, &[32, 128, 512], 4, 100, &rng).unwrap();
        let e32 = report.per_k[0].mean;
        let e512 = report.per_k[2].mean;
        assert!(e512 < e32, "32 -> {e32}, 512 -> {e512}");

        // Log-log slope across the sweep.
        let xs: Vec<f64> = report.per_k.iter().map(|p| (p.k as f64).ln()).collect();
        let ys: Vec<f64> = report.per_k.iter().map(|p| p.mean.ln()).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let slope = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
        assert!(
            (-1.3..=-0.7).contains(&slope),
            "log-log slope {slope}"
        );
        assert!(report.estimation >= 0.0 && report.inherent >= 0.0);
    }

    #[test]
    fn rate_curve_is_reproducible_across_calls() {
        let mut rng = SeededRng::new(68);
        let world = ConceptWorld::random(
            64,
            24,
            3,
            SupportLaw::clustered_default(3),
            0.25,
            &mut rng,
        )
        .unwrap();
        let a = ttt_rate_curve(&world, &[16, 64], 3, 30, &rng).unwrap();
        let b = ttt_rate_curve(&world, &[16, 64], 3, 30, &rng).unwrap();
        for (pa, pb) in a.per_k.iter().zip(&b.per_k) {
            assert_eq!(pa.samples, pb.samples);
        }
        assert!(ttt_rate_curve(&world, &[64, 16], 3, 10, &rng).is_err());
    }

    #[test]
    fn local_model_stays_supported_under_coherent_noise() {
        // Noisy world, greedy fit: the realized readout's concept image must
        // vanish off the selected support.
        let mut rng = SeededRng::new(69);
        let world = ConceptWorld::random(
            48,
            24,
            3,
            SupportLaw::clustered_default(3),
            0.25,
            &mut rng,
        )
        .unwrap();
        let g = 2;
        let members: Vec<Sample> =
            (0..40).map(|_| world.sample_from_pool(g, &mut rng)).collect();
        let nbhd = pool_neighborhood(40);
        let p_local = world.local_map_for_pool(g);
        let fit = fit_ttt_sparse(&nbhd, &members, &p_local, 3, FitMode::Greedy).unwrap();
        assert!(fit.support.len() <= 3);
        let image = p_local.matvec_transa(&fit.v).unwrap();
        for (c, &z) in image.iter().enumerate() {
            if !fit.support.contains(&c) {
                assert!(z.abs() < 1e-8, "leak at concept {c}: {z}");
            }
        }
    }

    #[test]
    fn combination_enumerator_is_lexicographic_and_complete() {
        let mut seen = Vec::new();
        for_each_combination(5, 3, |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 10);
        assert_eq!(seen[0], vec![0, 1, 2]);
        assert_eq!(seen[9], vec![2, 3, 4]);
        for w in seen.windows(2) {
            assert!(w[0] < w[1]);
        }
        let planted = SparseVector::new(5, vec![(0, 1.0)]).unwrap();
        assert_eq!(planted.nnz(), 1);
    }
}
