//! Exact brute-force retrieval by cosine similarity, plus the geometry
//! diagnostics that connect feature-space neighborhoods to concept-space
//! ones: containment slack, sparse dual norms of averaged noise, and the
//! misspecification correlation bound.

use crate::concepts::{ConceptWorld, Sample, C_INF};
use crate::error::{Error, Result};
use crate::numeric::matrix::{dot, norm2, Matrix};
use crate::numeric::rng::SeededRng;

/// Which representation retrieval runs in. `Feature` is the observed map,
/// `Reconstruction` and `Concept` are decoder/encoder outputs of a trained
/// dictionary model; samples only carry the first, so the latter two require
/// explicit row matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Feature,
    Reconstruction,
    Concept,
}

impl Space {
    pub fn tag(self) -> &'static str {
        match self {
            Space::Feature => "feature",
            Space::Reconstruction => "reconstruction",
            Space::Concept => "concept",
        }
    }
}

/// Membership threshold slack: cosines of exactly-parallel vectors can round
/// below 1, so ball membership tests sim >= (1 - r) - RADIUS_EPS.
const RADIUS_EPS: f64 = 1e-12;

/// Similarity assigned to zero-norm members: strictly below the cosine range
/// so they sort last and never enter a ball.
const UNDEFINED_SIM: f64 = -2.0;

/// A retrieved neighborhood: member indices into the dataset it was built
/// from, sorted by descending similarity (ties by lowest index). `radius` is
/// set when built by threshold rather than by count.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    pub query: Vec<f64>,
    pub members: Vec<usize>,
    pub sims: Vec<f64>,
    pub space: Space,
    pub radius: Option<f64>,
}

impl Neighborhood {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// CSV rows "query_id,member,similarity,space", one per member.
    pub fn csv_lines(&self, query_id: usize) -> Vec<String> {
        self.members
            .iter()
            .zip(&self.sims)
            .map(|(m, s)| format!("{query_id},{m},{s},{}", self.space.tag()))
            .collect()
    }
}

/// Geometry diagnostics for one neighborhood: per-member cosines in both the
/// feature and concept spaces, the measured containment slack, Monte-Carlo
/// draws of the sparse dual norm of averaged noise, and the misspecification
/// term.
#[derive(Debug, Clone)]
pub struct GeometryReport {
    pub feature_cosines: Vec<f64>,
    pub concept_cosines: Vec<f64>,
    pub eta_ang: f64,
    pub lambda_samples: Vec<f64>,
    pub eta_delta: f64,
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "cosine needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let na = norm2(a);
    let nb = norm2(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Numeric("cosine undefined for zero vector".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

fn sample_similarity(query: &[f64], qnorm: f64, sample: &Sample, space: Space) -> Result<f64> {
    match space {
        Space::Feature => {
            if query.len() != sample.feature.len() {
                return Err(Error::Dimension(format!(
                    "query length {} vs feature length {}",
                    query.len(),
                    sample.feature.len()
                )));
            }
            let n = norm2(&sample.feature);
            if n == 0.0 {
                Ok(UNDEFINED_SIM)
            } else {
                Ok((dot(query, &sample.feature) / (qnorm * n)).clamp(-1.0, 1.0))
            }
        }
        Space::Concept => {
            if query.len() != sample.concept.dim() {
                return Err(Error::Dimension(format!(
                    "query length {} vs concept dim {}",
                    query.len(),
                    sample.concept.dim()
                )));
            }
            let n = sample.concept.l2_norm();
            if n == 0.0 {
                Ok(UNDEFINED_SIM)
            } else {
                Ok((sample.concept.dot_dense(query) / (qnorm * n)).clamp(-1.0, 1.0))
            }
        }
        Space::Reconstruction => Err(Error::Config(
            "samples carry no reconstruction; retrieve with knn_rows over explicit rows".into(),
        )),
    }
}

fn sort_scored(scored: &mut [(usize, f64)]) {
    scored.sort_unstable_by(|a, b| {
        b.1.partial_cmp(&a.1).expect("similarities are finite").then(a.0.cmp(&b.0))
    });
}

/// Exact top-k by cosine similarity; ties broken by lowest dataset index.
pub fn knn(query: &[f64], dataset: &[Sample], k: usize, space: Space) -> Result<Neighborhood> {
    if dataset.is_empty() {
        return Err(Error::Retrieval("empty dataset".into()));
    }
    if k == 0 || k > dataset.len() {
        return Err(Error::Retrieval(format!(
            "k {} out of range for dataset of {}",
            k,
            dataset.len()
        )));
    }
    let qnorm = norm2(query);
    if qnorm == 0.0 {
        return Err(Error::Retrieval("zero-norm query".into()));
    }
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(dataset.len());
    for (i, s) in dataset.iter().enumerate() {
        scored.push((i, sample_similarity(query, qnorm, s, space)?));
    }
    sort_scored(&mut scored);
    scored.truncate(k);
    Ok(Neighborhood {
        query: query.to_vec(),
        members: scored.iter().map(|e| e.0).collect(),
        sims: scored.iter().map(|e| e.1).collect(),
        space,
        radius: None,
    })
}

/// Top-k over explicit representation rows (one point per matrix row).
pub fn knn_rows(query: &[f64], rows: &Matrix, k: usize, space: Space) -> Result<Neighborhood> {
    if rows.rows() == 0 {
        return Err(Error::Retrieval("empty dataset".into()));
    }
    if k == 0 || k > rows.rows() {
        return Err(Error::Retrieval(format!(
            "k {} out of range for dataset of {}",
            k,
            rows.rows()
        )));
    }
    if query.len() != rows.cols() {
        return Err(Error::Dimension(format!(
            "query length {} vs row width {}",
            query.len(),
            rows.cols()
        )));
    }
    let qnorm = norm2(query);
    if qnorm == 0.0 {
        return Err(Error::Retrieval("zero-norm query".into()));
    }
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(rows.rows());
    for i in 0..rows.rows() {
        let r = rows.row(i);
        let n = norm2(r);
        let sim = if n == 0.0 {
            UNDEFINED_SIM
        } else {
            (dot(query, r) / (qnorm * n)).clamp(-1.0, 1.0)
        };
        scored.push((i, sim));
    }
    sort_scored(&mut scored);
    scored.truncate(k);
    Ok(Neighborhood {
        query: query.to_vec(),
        members: scored.iter().map(|e| e.0).collect(),
        sims: scored.iter().map(|e| e.1).collect(),
        space,
        radius: None,
    })
}

/// All points with similarity >= 1 - r; size is emergent.
pub fn radius_neighborhood(
    query: &[f64],
    dataset: &[Sample],
    r: f64,
    space: Space,
) -> Result<Neighborhood> {
    let qnorm = norm2(query);
    if qnorm == 0.0 {
        return Err(Error::Retrieval("zero-norm query".into()));
    }
    let threshold = 1.0 - r - RADIUS_EPS;
    let mut scored: Vec<(usize, f64)> = Vec::new();
    for (i, s) in dataset.iter().enumerate() {
        let sim = sample_similarity(query, qnorm, s, space)?;
        if sim >= threshold {
            scored.push((i, sim));
        }
    }
    sort_scored(&mut scored);
    Ok(Neighborhood {
        query: query.to_vec(),
        members: scored.iter().map(|e| e.0).collect(),
        sims: scored.iter().map(|e| e.1).collect(),
        space,
        radius: Some(r),
    })
}

/// Smallest eta >= 0 such that every dataset point inside the feature-space
/// ball of radius r around the query also lies inside the concept-space ball
/// of radius r + eta. Zero-norm points are skipped (no defined angle).
pub fn containment_slack(query: &Sample, dataset: &[Sample], r: f64) -> Result<f64> {
    let qf_norm = norm2(&query.feature);
    let qc_norm = query.concept.l2_norm();
    if qf_norm == 0.0 || qc_norm == 0.0 {
        return Err(Error::Retrieval("query has a zero-norm representation".into()));
    }
    let qc_dense = query.concept.to_dense();
    let threshold = 1.0 - r - RADIUS_EPS;
    let mut eta: f64 = 0.0;
    for s in dataset {
        let fn_ = norm2(&s.feature);
        let cn = s.concept.l2_norm();
        if fn_ == 0.0 || cn == 0.0 {
            continue;
        }
        let cf = (dot(&query.feature, &s.feature) / (qf_norm * fn_)).clamp(-1.0, 1.0);
        if cf >= threshold {
            let cc = (s.concept.dot_dense(&qc_dense) / (qc_norm * cn)).clamp(-1.0, 1.0);
            eta = eta.max(1.0 - r - cc);
        }
    }
    Ok(eta.max(0.0))
}

/// l2 norm of the m largest-magnitude entries of z: the closed form of
/// sup over unit-norm m-sparse u of <u, z>. m is clamped to [1, len].
pub fn sparse_dual_norm(z: &[f64], m: usize) -> f64 {
    if z.is_empty() {
        return 0.0;
    }
    let m = m.clamp(1, z.len());
    let mut sq: Vec<f64> = z.iter().map(|x| x * x).collect();
    if m == sq.len() {
        return sq.iter().sum::<f64>().sqrt();
    }
    let cut = sq.len() - m;
    sq.select_nth_unstable_by(cut, |a, b| a.partial_cmp(b).expect("finite magnitudes"));
    sq[cut..].iter().sum::<f64>().sqrt()
}

/// Monte-Carlo distribution of the sparse dual norm of neighborhood-averaged
/// noise, Lambda-hat = ||(1/k) Phi^T eps||*_{2,2s'} over `trials` fresh noise
/// draws at the world's sigma, plus the deterministic misspecification term
/// eta-hat_Delta = sqrt(2 s') * C_inf * sqrt(||Delta||^2 / k). `delta` holds
/// the per-member misspecification residuals (None means well-specified).
#[allow(clippy::too_many_arguments)]
pub fn concentration_diagnostics(
    nbhd: &Neighborhood,
    dataset: &[Sample],
    query: &Sample,
    world: &ConceptWorld,
    s_prime: usize,
    trials: usize,
    delta: Option<&[f64]>,
    rng: &mut SeededRng,
) -> Result<GeometryReport> {
    let k = nbhd.members.len();
    if k == 0 {
        return Err(Error::Retrieval("empty neighborhood".into()));
    }
    if s_prime == 0 {
        return Err(Error::Config("s' must be positive".into()));
    }
    for &m in &nbhd.members {
        if m >= dataset.len() {
            return Err(Error::Retrieval(format!("member {m} outside dataset")));
        }
    }

    let mut feature_cosines = Vec::with_capacity(k);
    let mut concept_cosines = Vec::with_capacity(k);
    let qc_dense = query.concept.to_dense();
    for &m in &nbhd.members {
        let s = &dataset[m];
        feature_cosines.push(cosine_similarity(&query.feature, &s.feature)?);
        concept_cosines.push(cosine_similarity(&qc_dense, &s.concept.to_dense())?);
    }

    // Effective radius: the stored threshold, or the widest member angle.
    let r = nbhd
        .radius
        .unwrap_or_else(|| 1.0 - feature_cosines.iter().cloned().fold(f64::INFINITY, f64::min));
    let eta_ang = containment_slack(query, dataset, r)?;

    let m_dual = (2 * s_prime).min(world.d1);
    let sigma = world.sigma2.sqrt();
    let mut lambda_samples = Vec::with_capacity(trials);
    let mut acc = vec![0.0; world.d1];
    for _ in 0..trials {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for &mi in &nbhd.members {
            let eps = sigma * rng.normal();
            for &(j, v) in dataset[mi].concept.entries() {
                acc[j] += eps * v;
            }
        }
        let scale = 1.0 / k as f64;
        acc.iter_mut().for_each(|a| *a *= scale);
        lambda_samples.push(sparse_dual_norm(&acc, m_dual));
    }

    let eta_delta = match delta {
        None => 0.0,
        Some(d) => {
            if d.len() != k {
                return Err(Error::Dimension(format!(
                    "delta length {} vs neighborhood size {k}",
                    d.len()
                )));
            }
            let ss: f64 = d.iter().map(|x| x * x).sum();
            ((2 * s_prime) as f64).sqrt() * C_INF * (ss / k as f64).sqrt()
        }
    };

    Ok(GeometryReport { feature_cosines, concept_cosines, eta_ang, lambda_samples, eta_delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::{sample_dataset, SupportLaw};
    use proptest::prelude::*;

    fn feature_world(seed: u64, d1: usize, d2: usize, s: usize) -> (ConceptWorld, SeededRng) {
        let mut rng = SeededRng::new(seed);
        let world =
            ConceptWorld::random(d1, d2, s, SupportLaw::clustered_default(s), 0.0, &mut rng)
                .unwrap();
        (world, rng)
    }

    #[test]
    fn cosine_trivial_values() {
        let v = vec![0.3, -0.2, 0.9];
        assert!((cosine_similarity(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn knn_matches_full_sort_oracle_on_random_points() {
        let (world, mut rng) = feature_world(10, 64, 24, 3);
        let data = sample_dataset(&world, 1000, &mut rng);
        let q = world.sample(&mut rng);
        let got = knn(&q.feature, &data, 20, Space::Feature).unwrap();

        let qnorm = norm2(&q.feature);
        let mut oracle: Vec<(usize, f64)> = data
            .iter()
            .enumerate()
            .map(|(i, s)| {
                (i, (dot(&q.feature, &s.feature) / (qnorm * norm2(&s.feature))).clamp(-1.0, 1.0))
            })
            .collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let want: Vec<usize> = oracle[..20].iter().map(|e| e.0).collect();
        assert_eq!(got.members, want);
        for (s, (_, os)) in got.sims.iter().zip(&oracle[..20]) {
            assert!((s - os).abs() < 1e-12);
        }
    }

    #[test]
    fn knn_with_k_equal_to_size_returns_all_sorted() {
        let (world, mut rng) = feature_world(11, 32, 12, 2);
        let data = sample_dataset(&world, 40, &mut rng);
        let q = world.sample(&mut rng);
        let nb = knn(&q.feature, &data, 40, Space::Feature).unwrap();
        assert_eq!(nb.len(), 40);
        for w in nb.sims.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let mut sorted_members = nb.members.clone();
        sorted_members.sort_unstable();
        assert_eq!(sorted_members, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn query_equal_to_training_point_ranks_it_first() {
        let (world, mut rng) = feature_world(12, 32, 12, 2);
        let data = sample_dataset(&world, 100, &mut rng);
        let nb = knn(&data[37].feature, &data, 5, Space::Feature).unwrap();
        assert_eq!(nb.members[0], 37);
        assert!((nb.sims[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn knn_errors_on_empty_dataset_and_bad_k() {
        let (world, mut rng) = feature_world(13, 16, 8, 2);
        let q = world.sample(&mut rng);
        assert!(matches!(
            knn(&q.feature, &[], 1, Space::Feature),
            Err(Error::Retrieval(_))
        ));
        let data = sample_dataset(&world, 3, &mut rng);
        assert!(knn(&q.feature, &data, 4, Space::Feature).is_err());
        assert!(knn(&q.feature, &data, 0, Space::Feature).is_err());
    }

    #[test]
    fn knn_is_permutation_stable_modulo_index_relabeling() {
        let (world, mut rng) = feature_world(14, 48, 16, 3);
        let data = sample_dataset(&world, 200, &mut rng);
        let q = world.sample(&mut rng);
        let base = knn(&q.feature, &data, 15, Space::Feature).unwrap();

        let mut perm: Vec<usize> = (0..200).collect();
        rng.shuffle(&mut perm);
        let shuffled: Vec<Sample> = perm.iter().map(|&i| data[i].clone()).collect();
        let moved = knn(&q.feature, &shuffled, 15, Space::Feature).unwrap();
        let mut recovered: Vec<usize> = moved.members.iter().map(|&i| perm[i]).collect();
        let mut want = base.members.clone();
        recovered.sort_unstable();
        want.sort_unstable();
        assert_eq!(recovered, want);
    }

    #[test]
    fn knn_rows_agrees_with_sample_based_knn() {
        let (world, mut rng) = feature_world(15, 32, 12, 2);
        let data = sample_dataset(&world, 80, &mut rng);
        let q = world.sample(&mut rng);
        let rows = Matrix::from_rows(&data.iter().map(|s| s.feature.clone()).collect::<Vec<_>>())
            .unwrap();
        let a = knn(&q.feature, &data, 10, Space::Feature).unwrap();
        let b = knn_rows(&q.feature, &rows, 10, Space::Feature).unwrap();
        assert_eq!(a.members, b.members);
    }

    #[test]
    fn radius_zero_keeps_only_exact_direction_matches() {
        let (world, mut rng) = feature_world(16, 32, 12, 2);
        let mut data = sample_dataset(&world, 50, &mut rng);
        // Insert a scaled copy of the query direction.
        let q = world.sample(&mut rng);
        let mut copy = q.clone();
        copy.feature.iter_mut().for_each(|x| *x *= 2.5);
        data.push(copy);
        let nb = radius_neighborhood(&q.feature, &data, 0.0, Space::Feature).unwrap();
        assert_eq!(nb.members, vec![50]);
    }

    #[test]
    fn radius_two_admits_the_entire_dataset() {
        let (world, mut rng) = feature_world(17, 32, 12, 2);
        let data = sample_dataset(&world, 60, &mut rng);
        let q = world.sample(&mut rng);
        let nb = radius_neighborhood(&q.feature, &data, 2.0, Space::Feature).unwrap();
        assert_eq!(nb.len(), 60);
        assert_eq!(nb.radius, Some(2.0));
    }

    #[test]
    fn radius_membership_matches_brute_force_filter() {
        let (world, mut rng) = feature_world(18, 64, 24, 3);
        let data = sample_dataset(&world, 500, &mut rng);
        let q = world.sample(&mut rng);
        let r = 0.7;
        let nb = radius_neighborhood(&q.feature, &data, r, Space::Feature).unwrap();
        let qnorm = norm2(&q.feature);
        let want: Vec<usize> = data
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                dot(&q.feature, &s.feature) / (qnorm * norm2(&s.feature)) >= 1.0 - r
            })
            .map(|(i, _)| i)
            .collect();
        let mut got = nb.members.clone();
        got.sort_unstable();
        assert_eq!(got, want);
        for &s in &nb.sims {
            assert!(s >= 1.0 - r - 1e-9);
        }
    }

    #[test]
    fn isometric_map_has_zero_containment_slack() {
        // P = identity: feature and concept cosines coincide exactly.
        let mut rng = SeededRng::new(19);
        let mut world =
            ConceptWorld::random(16, 16, 3, SupportLaw::Uniform, 0.0, &mut rng).unwrap();
        world.p = Matrix::identity(16);
        world.d2 = 16;
        let data = sample_dataset(&world, 100, &mut rng);
        let q = world.sample(&mut rng);
        for r in [0.1, 0.5, 1.0] {
            let eta = containment_slack(&q, &data, r).unwrap();
            assert!(eta <= 1e-12, "r {r} eta {eta}");
        }
    }

    #[test]
    fn containment_slack_never_exceeds_cosine_range() {
        let (world, mut rng) = feature_world(20, 64, 8, 3);
        let data = sample_dataset(&world, 200, &mut rng);
        let q = world.sample(&mut rng);
        for r in [0.0, 0.3, 0.8, 1.5] {
            let eta = containment_slack(&q, &data, r).unwrap();
            assert!((0.0..=2.0).contains(&eta));
        }
    }

    #[test]
    fn sparse_dual_norm_trivial_cases() {
        let z = vec![3.0, -4.0, 1.0, 0.5];
        assert!((sparse_dual_norm(&z, 4) - norm2(&z)).abs() < 1e-12);
        let mut e3 = vec![0.0; 8];
        e3[3] = 5.0;
        for m in 1..=8 {
            assert!((sparse_dual_norm(&e3, m) - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_dual_norm_matches_exhaustive_support_search() {
        let mut rng = SeededRng::new(21);
        for _ in 0..100 {
            let z: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
            // Enumerate all 3-subsets of [8] and take the best restricted norm.
            let mut best: f64 = 0.0;
            for a in 0..8 {
                for b in (a + 1)..8 {
                    for c in (b + 1)..8 {
                        let n = (z[a] * z[a] + z[b] * z[b] + z[c] * z[c]).sqrt();
                        best = best.max(n);
                    }
                }
            }
            assert!((sparse_dual_norm(&z, 3) - best).abs() < 1e-12);
        }
    }

    #[test]
    fn psi_selected_neighbors_share_concept_geometry_with_phi_selected() {
        // Mean concept-space cosine of neighbors found in feature space stays
        // within 0.05 of neighbors found in concept space.
        let mut rng = SeededRng::new(22);
        let world = ConceptWorld::random(
            128,
            96,
            3,
            SupportLaw::clustered_default(3),
            0.0,
            &mut rng,
        )
        .unwrap();
        let data = sample_dataset(&world, 4000, &mut rng);
        let mut gap_total = 0.0;
        let queries = 5;
        for _ in 0..queries {
            let q = world.sample(&mut rng);
            let qc = q.concept.to_dense();
            let by_feature = knn(&q.feature, &data, 30, Space::Feature).unwrap();
            let by_concept = knn(&qc, &data, 30, Space::Concept).unwrap();
            let mean_cc = |nb: &Neighborhood| -> f64 {
                nb.members
                    .iter()
                    .map(|&m| q.concept.cosine(&data[m].concept))
                    .sum::<f64>()
                    / nb.len() as f64
            };
            gap_total += (mean_cc(&by_feature) - mean_cc(&by_concept)).abs();
        }
        let mean_gap = gap_total / queries as f64;
        assert!(mean_gap <= 0.05, "mean concept-cosine gap {mean_gap}");
    }

    #[test]
    fn noiseless_world_gives_identically_zero_lambda() {
        let (world, mut rng) = feature_world(23, 32, 12, 2);
        let data = sample_dataset(&world, 60, &mut rng);
        let q = world.sample(&mut rng);
        let nb = knn(&q.feature, &data, 20, Space::Feature).unwrap();
        let rep =
            concentration_diagnostics(&nb, &data, &q, &world, 2, 50, None, &mut rng).unwrap();
        assert_eq!(rep.lambda_samples.len(), 50);
        assert!(rep.lambda_samples.iter().all(|&l| l == 0.0));
        assert_eq!(rep.eta_delta, 0.0);
        for (&cf, &cc) in rep.feature_cosines.iter().zip(&rep.concept_cosines) {
            assert!((-1.0..=1.0).contains(&cf));
            assert!((-1.0..=1.0).contains(&cc));
        }
    }

    #[test]
    fn eta_delta_follows_the_closed_form() {
        let (world, mut rng) = feature_world(24, 32, 12, 2);
        let data = sample_dataset(&world, 30, &mut rng);
        let q = world.sample(&mut rng);
        let nb = knn(&q.feature, &data, 10, Space::Feature).unwrap();
        let delta = vec![0.3; 10];
        let rep = concentration_diagnostics(&nb, &data, &q, &world, 2, 1, Some(&delta), &mut rng)
            .unwrap();
        // sqrt(2 * 2) * 1 * sqrt(10 * 0.09 / 10) = 2 * 0.3
        assert!((rep.eta_delta - 0.6).abs() < 1e-12);
        // Wrong length is rejected.
        assert!(concentration_diagnostics(
            &nb,
            &data,
            &q,
            &world,
            2,
            1,
            Some(&[0.0; 3]),
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn quadrupling_k_roughly_halves_lambda_tail() {
        let mut rng = SeededRng::new(25);
        let mut world =
            ConceptWorld::random(256, 64, 4, SupportLaw::Uniform, 0.25, &mut rng).unwrap();
        world.sigma2 = 0.25;
        let data = sample_dataset(&world, 1024, &mut rng);
        let q = world.sample(&mut rng);

        let p95 = |k: usize, rng: &mut SeededRng| -> f64 {
            let nb = knn(&q.feature, &data, k, Space::Feature).unwrap();
            let rep =
                concentration_diagnostics(&nb, &data, &q, &world, 4, 200, None, rng).unwrap();
            let mut xs = rep.lambda_samples;
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            xs[(0.95 * (xs.len() - 1) as f64).round() as usize]
        };
        let small = p95(64, &mut rng);
        let big = p95(256, &mut rng);
        let ratio = big / small;
        assert!(
            (0.35..=0.65).contains(&ratio),
            "95th percentile ratio {ratio} (k 64 -> 256)"
        );
    }

    #[test]
    fn csv_lines_carry_query_member_similarity_and_tag() {
        let (world, mut rng) = feature_world(26, 16, 8, 2);
        let data = sample_dataset(&world, 10, &mut rng);
        let q = world.sample(&mut rng);
        let nb = knn(&q.feature, &data, 3, Space::Feature).unwrap();
        let lines = nb.csv_lines(7);
        assert_eq!(lines.len(), 3);
        for (line, (&m, &s)) in lines.iter().zip(nb.members.iter().zip(&nb.sims)) {
            assert_eq!(line, &format!("7,{m},{s},feature"));
        }
    }

    proptest! {
        #[test]
        fn sparse_dual_norm_monotone_and_bounded(seed in 0u64..300, m in 1usize..12) {
            let mut rng = SeededRng::new(seed);
            let z: Vec<f64> = (0..12).map(|_| rng.normal()).collect();
            let full = norm2(&z);
            let here = sparse_dual_norm(&z, m);
            prop_assert!(here <= full + 1e-12);
            if m < 12 {
                prop_assert!(here <= sparse_dual_norm(&z, m + 1) + 1e-12);
            }
        }

        #[test]
        fn cosine_ranking_equals_distance_ranking_on_unit_vectors(seed in 0u64..100) {
            let mut rng = SeededRng::new(seed);
            let world = ConceptWorld::random(24, 10, 3, SupportLaw::Uniform, 0.0, &mut rng).unwrap();
            let mut data = sample_dataset(&world, 60, &mut rng);
            for s in &mut data {
                let n = norm2(&s.feature);
                s.feature.iter_mut().for_each(|x| *x /= n);
            }
            let mut q = world.sample(&mut rng);
            let n = norm2(&q.feature);
            q.feature.iter_mut().for_each(|x| *x /= n);

            let nb = knn(&q.feature, &data, 10, Space::Feature).unwrap();
            let mut by_dist: Vec<(usize, f64)> = data
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let d2: f64 = q
                        .feature
                        .iter()
                        .zip(&s.feature)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (i, d2)
                })
                .collect();
            by_dist.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            let want: Vec<usize> = by_dist[..10].iter().map(|e| e.0).collect();
            prop_assert_eq!(nb.members, want);
        }
    }
}
