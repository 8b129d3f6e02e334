//! Mixture of experts over a k-means partition of the training set. Each
//! expert is the base head fine-tuned on the nearest training points of its
//! centroid; inference routes to the L2-nearest centroid's expert.

use crate::classify::{argmax, ttt_finetune, LinearHead, TttConfig};
use crate::error::{Error, Result};
use crate::numeric::matrix::Matrix;
use crate::numeric::rng::SeededRng;

#[derive(Debug, Clone)]
pub struct KmeansResult {
    /// k x d.
    pub centroids: Matrix,
    /// Index of the owning centroid per input row.
    pub assignment: Vec<usize>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding and a fixed iteration cap. A
/// cluster that empties is re-seeded from the point farthest from its
/// current centroid.
pub fn kmeans(
    xs: &Matrix,
    k: usize,
    max_iters: usize,
    rng: &mut SeededRng,
) -> Result<KmeansResult> {
    let n = xs.rows();
    if n == 0 {
        return Err(Error::Data("empty dataset".into()));
    }
    if k == 0 || k > n {
        return Err(Error::Config(format!("k {k} out of range for {n} points")));
    }

    // k-means++ seeding: first centroid uniform, then proportional to the
    // squared distance from the nearest chosen centroid.
    let mut centroids = Matrix::zeros(k, xs.cols());
    centroids.row_mut(0).copy_from_slice(xs.row(rng.index(n)));
    let mut nearest_sq: Vec<f64> = (0..n).map(|r| sq_dist(xs.row(r), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = nearest_sq.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.uniform() * total;
            let mut chosen = n - 1;
            for (r, &d) in nearest_sq.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = r;
                    break;
                }
            }
            chosen
        } else {
            rng.index(n)
        };
        centroids.row_mut(c).copy_from_slice(xs.row(pick));
        for r in 0..n {
            nearest_sq[r] = nearest_sq[r].min(sq_dist(xs.row(r), centroids.row(c)));
        }
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..max_iters {
        let mut changed = false;
        for r in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist(xs.row(r), centroids.row(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignment[r] != best {
                assignment[r] = best;
                changed = true;
            }
        }

        let mut sums = Matrix::zeros(k, xs.cols());
        let mut counts = vec![0usize; k];
        for r in 0..n {
            let c = assignment[r];
            counts[c] += 1;
            crate::numeric::matrix::axpy(1.0, xs.row(r), sums.row_mut(c));
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed from the globally farthest point.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(xs.row(a), centroids.row(assignment[a]));
                        let db = sq_dist(xs.row(b), centroids.row(assignment[b]));
                        da.total_cmp(&db)
                    })
                    .expect("non-empty dataset");
                centroids.row_mut(c).copy_from_slice(xs.row(far));
                assignment[far] = c;
                changed = true;
            } else {
                let inv = 1.0 / counts[c] as f64;
                let row = sums.row(c).to_vec();
                for (j, v) in centroids.row_mut(c).iter_mut().enumerate() {
                    *v = row[j] * inv;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let inertia = (0..n).map(|r| sq_dist(xs.row(r), centroids.row(assignment[r]))).sum();
    Ok(KmeansResult { centroids, assignment, inertia })
}

/// Base head plus one fine-tuned expert per centroid.
#[derive(Debug, Clone)]
pub struct MoeModel {
    pub centroids: Matrix,
    pub experts: Vec<LinearHead>,
    pub base: LinearHead,
}

impl MoeModel {
    pub fn expert_count(&self) -> usize {
        self.experts.len()
    }
}

/// Per-expert fine-tuning settings. `for_experts` picks the reference
/// hyperparameter row for a given expert count (largest tabulated count not
/// exceeding it).
#[derive(Debug, Clone)]
pub struct MoeTrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub neighbors: usize,
    pub kmeans_iters: usize,
}

/// Reference rows: (experts, lr, epochs, neighbors).
const MOE_TABLE: [(usize, f64, usize, usize); 11] = [
    (1, 6e-4, 2, 60),
    (3, 2e-4, 1, 50),
    (10, 6e-4, 2, 30),
    (30, 1e-3, 1, 60),
    (100, 8e-4, 2, 30),
    (300, 4e-4, 3, 40),
    (1_000, 6e-4, 10, 30),
    (3_000, 4e-4, 30, 20),
    (10_000, 6e-4, 20, 30),
    (20_000, 4e-4, 50, 30),
    (50_000, 4e-4, 40, 20),
];

impl MoeTrainConfig {
    pub fn for_experts(e: usize) -> Self {
        let mut row = MOE_TABLE[0];
        for &r in MOE_TABLE.iter() {
            if r.0 <= e {
                row = r;
            }
        }
        MoeTrainConfig { lr: row.1, epochs: row.2, neighbors: row.3, kmeans_iters: 100 }
    }
}

/// Clusters the training features, then fine-tunes one copy of `base` per
/// centroid on the centroid's `neighbors` nearest training points
/// (full-batch Adam, `epochs` steps).
pub fn train_moe(
    xs: &Matrix,
    ys: &[usize],
    e: usize,
    base: &LinearHead,
    config: &MoeTrainConfig,
    rng: &mut SeededRng,
) -> Result<MoeModel> {
    let n = xs.rows();
    if ys.len() != n {
        return Err(Error::Dimension(format!("{n} rows vs {} labels", ys.len())));
    }
    if e == 0 || e > n {
        return Err(Error::Config(format!("expert count {e} out of range for {n} points")));
    }
    let km = kmeans(xs, e, config.kmeans_iters, rng)?;

    let finetune = TttConfig {
        k: config.neighbors,
        steps: config.epochs,
        lr: config.lr,
    };
    let mut experts = Vec::with_capacity(e);
    for c in 0..e {
        let members = l2_nearest(xs, km.centroids.row(c), config.neighbors.min(n));
        let mut bx = Matrix::zeros(members.len(), xs.cols());
        let mut by = Vec::with_capacity(members.len());
        for (r, &idx) in members.iter().enumerate() {
            bx.row_mut(r).copy_from_slice(xs.row(idx));
            by.push(ys[idx]);
        }
        experts.push(ttt_finetune(base, &bx, &by, &finetune)?);
    }
    Ok(MoeModel { centroids: km.centroids, experts, base: base.clone() })
}

/// Indices of the k rows nearest to `query` in squared L2, ascending, ties
/// toward the lower index.
pub(crate) fn l2_nearest(xs: &Matrix, query: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..xs.rows()).collect();
    order.sort_by(|&a, &b| {
        sq_dist(xs.row(a), query)
            .total_cmp(&sq_dist(xs.row(b), query))
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order
}

/// Index of the L2-nearest centroid.
pub fn route_index(moe: &MoeModel, x: &[f64]) -> usize {
    let dists: Vec<f64> = (0..moe.centroids.rows())
        .map(|c| -sq_dist(moe.centroids.row(c), x))
        .collect();
    argmax(&dists)
}

/// Prediction of the expert owning the L2-nearest centroid.
pub fn route_and_predict(moe: &MoeModel, x: &[f64]) -> Result<usize> {
    moe.experts[route_index(moe, x)].predict(x)
}
