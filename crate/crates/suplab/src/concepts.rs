//! Synthetic sparse-concept worlds. A world draws s-sparse concept vectors
//! phi in R^{d1}, maps them through a projection P in R^{d2 x d1} whose
//! columns are unit-sphere directions (superposition), and labels them with
//! a linear ground truth plus Gaussian noise. Also provides the globally
//! non-learnable instance: one unit direction per cell, constant target 1,
//! where any global linear readout suffers population error 1 - d2/d1.

use crate::error::{Error, Result};
use crate::numeric::matrix::{axpy, dot, Matrix};
use crate::numeric::rng::SeededRng;

/// Concept activations: sorted (index, value) pairs. Values produced by a
/// world satisfy |v| <= C_INF and ||phi||_2 <= C_INF * sqrt(s).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

/// Bound on |phi_i| for world-generated concepts. Values are drawn uniform on
/// [0.5, 1] with random sign: bounded away from zero so supports are
/// identifiable, with known norm constants.
pub const C_INF: f64 = 1.0;

impl SparseVector {
    pub fn new(dim: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Dimension(format!("duplicate index {}", w[0].0)));
            }
        }
        if let Some(&(last, _)) = entries.last() {
            if last >= dim {
                return Err(Error::Dimension(format!("index {last} >= dim {dim}")));
            }
        }
        Ok(SparseVector { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> f64 {
        self.entries
            .binary_search_by_key(&i, |e| e.0)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(i, x) in &self.entries {
            v[i] = x;
        }
        v
    }

    pub fn dot_dense(&self, w: &[f64]) -> f64 {
        debug_assert_eq!(w.len(), self.dim);
        self.entries.iter().map(|&(i, x)| x * w[i]).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, x)| x * x).sum::<f64>().sqrt()
    }

    /// Cosine similarity between two sparse vectors (0 if either is zero).
    pub fn cosine(&self, other: &SparseVector) -> f64 {
        let mut s = 0.0;
        let mut i = 0;
        let mut j = 0;
        while i < self.entries.len() && j < other.entries.len() {
            match self.entries[i].0.cmp(&other.entries[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    s += self.entries[i].1 * other.entries[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        let na = self.l2_norm();
        let nb = other.l2_norm();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            (s / (na * nb)).clamp(-1.0, 1.0)
        }
    }
}

/// How supports are drawn. `Clustered` partitions [d1] into overlapping pools
/// (pool g covers indices g*stride .. g*stride+size), a sample picks one pool
/// and s indices inside it, so neighborhoods share concepts.
#[derive(Debug, Clone, PartialEq)]
pub enum SupportLaw {
    Uniform,
    Clustered { pool_size: usize, stride: usize },
}

impl SupportLaw {
    /// Default clustered law: pools of size 4s, half-overlapping.
    pub fn clustered_default(s: usize) -> SupportLaw {
        SupportLaw::Clustered { pool_size: 4 * s, stride: 2 * s }
    }
}

#[derive(Debug, Clone)]
pub struct ConceptWorld {
    pub d1: usize,
    pub d2: usize,
    pub s: usize,
    pub w_star: Vec<f64>,
    /// d2 x d1; column m is concept m's feature direction.
    pub p: Matrix,
    pub law: SupportLaw,
    pub sigma2: f64,
}

impl ConceptWorld {
    /// Random world: P columns uniform on the sphere, w_star standard normal.
    pub fn random(
        d1: usize,
        d2: usize,
        s: usize,
        law: SupportLaw,
        sigma2: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if s == 0 || s > d1 {
            return Err(Error::Config(format!("sparsity {s} out of range for d1 {d1}")));
        }
        if let SupportLaw::Clustered { pool_size, stride } = law {
            if pool_size < s || pool_size > d1 || stride == 0 {
                return Err(Error::Config(format!(
                    "clustered law pool_size {pool_size} stride {stride} invalid for d1 {d1}, s {s}"
                )));
            }
        }
        if sigma2 < 0.0 {
            return Err(Error::Config("sigma2 must be nonnegative".into()));
        }
        let p = make_superposition_map(d1, d2, rng)?;
        let w_star = (0..d1).map(|_| rng.normal()).collect();
        Ok(ConceptWorld { d1, d2, s, w_star, p, law, sigma2 })
    }

    pub fn pool_count(&self) -> usize {
        match self.law {
            SupportLaw::Uniform => 1,
            SupportLaw::Clustered { pool_size, stride } => {
                if self.d1 < pool_size {
                    1
                } else {
                    (self.d1 - pool_size) / stride + 1
                }
            }
        }
    }

    /// Indices covered by pool g (empty law -> the whole range).
    pub fn pool_indices(&self, g: usize) -> Vec<usize> {
        match self.law {
            SupportLaw::Uniform => (0..self.d1).collect(),
            SupportLaw::Clustered { pool_size, stride } => {
                let start = g * stride;
                (start..start + pool_size).map(|i| i % self.d1).collect()
            }
        }
    }

    /// Noiseless ground-truth value at a concept vector.
    pub fn f_star(&self, phi: &SparseVector) -> f64 {
        phi.dot_dense(&self.w_star)
    }

    /// Feature vector psi = P phi.
    pub fn project(&self, phi: &SparseVector) -> Vec<f64> {
        let mut psi = vec![0.0; self.d2];
        for &(m, x) in phi.entries() {
            for (row, out) in psi.iter_mut().enumerate() {
                *out += x * self.p.get(row, m);
            }
        }
        psi
    }

    /// The local map for a pool: P with all columns outside the pool zeroed.
    pub fn local_map_for_pool(&self, g: usize) -> Matrix {
        let mut p_loc = Matrix::zeros(self.d2, self.d1);
        for m in self.pool_indices(g) {
            for row in 0..self.d2 {
                p_loc.set(row, m, self.p.get(row, m));
            }
        }
        p_loc
    }

    /// The local map covering exactly the given concept set.
    pub fn local_map_for_support(&self, support: &[usize]) -> Matrix {
        let mut p_loc = Matrix::zeros(self.d2, self.d1);
        for &m in support {
            for row in 0..self.d2 {
                p_loc.set(row, m, self.p.get(row, m));
            }
        }
        p_loc
    }

    fn draw_support(&self, rng: &mut SeededRng) -> (Vec<usize>, Option<usize>) {
        match self.law {
            SupportLaw::Uniform => (rng.distinct_indices(self.d1, self.s), None),
            SupportLaw::Clustered { .. } => {
                let g = rng.index(self.pool_count());
                let pool = self.pool_indices(g);
                let within = rng.distinct_indices(pool.len(), self.s);
                let mut idx: Vec<usize> = within.iter().map(|&i| pool[i]).collect();
                idx.sort_unstable();
                (idx, Some(g))
            }
        }
    }

    fn draw_values(&self, support: &[usize], rng: &mut SeededRng) -> SparseVector {
        let entries = support
            .iter()
            .map(|&i| {
                let v = rng.sign() * rng.uniform_in(0.5, 1.0);
                (i, v.clamp(-C_INF, C_INF))
            })
            .collect();
        SparseVector::new(self.d1, entries).expect("support indices validated")
    }

    /// One sample; `cell` records the pool id under the clustered law.
    pub fn sample(&self, rng: &mut SeededRng) -> Sample {
        let (support, group) = self.draw_support(rng);
        let phi = self.draw_values(&support, rng);
        let psi = self.project(&phi);
        let noise = if self.sigma2 > 0.0 { self.sigma2.sqrt() * rng.normal() } else { 0.0 };
        let label = self.f_star(&phi) + noise;
        Sample { concept: phi, feature: psi, label, cell: group }
    }

    /// One sample with a prescribed active set: the tight-retrieval limit
    /// where a neighborhood shares the query's concepts, the regime the
    /// sparse-recovery rate conditions on.
    pub fn sample_with_support(&self, support: &[usize], rng: &mut SeededRng) -> Result<Sample> {
        let mut idx = support.to_vec();
        idx.sort_unstable();
        idx.dedup();
        if idx.len() != support.len() {
            return Err(Error::Dimension("support has duplicate indices".into()));
        }
        if idx.iter().any(|&i| i >= self.d1) {
            return Err(Error::Dimension(format!("support index outside d1 {}", self.d1)));
        }
        let phi = self.draw_values(&idx, rng);
        let psi = self.project(&phi);
        let noise = if self.sigma2 > 0.0 { self.sigma2.sqrt() * rng.normal() } else { 0.0 };
        let label = self.f_star(&phi) + noise;
        Ok(Sample { concept: phi, feature: psi, label, cell: None })
    }

    /// One sample conditioned on pool `g`: the population a test point from
    /// pool g retrieves as its neighborhood.
    pub fn sample_from_pool(&self, g: usize, rng: &mut SeededRng) -> Sample {
        let pool = self.pool_indices(g);
        let within = rng.distinct_indices(pool.len(), self.s);
        let mut idx: Vec<usize> = within.iter().map(|&i| pool[i]).collect();
        idx.sort_unstable();
        let phi = self.draw_values(&idx, rng);
        let psi = self.project(&phi);
        let noise = if self.sigma2 > 0.0 { self.sigma2.sqrt() * rng.normal() } else { 0.0 };
        let label = self.f_star(&phi) + noise;
        Sample { concept: phi, feature: psi, label, cell: Some(g) }
    }
}

/// A data point: concept vector, projected feature vector, real label, and
/// an optional group id (non-learnable cell, or pool under the clustered law).
#[derive(Debug, Clone)]
pub struct Sample {
    pub concept: SparseVector,
    pub feature: Vec<f64>,
    pub label: f64,
    pub cell: Option<usize>,
}

/// n i.i.d. samples from the world's law.
pub fn sample_dataset(world: &ConceptWorld, n: usize, rng: &mut SeededRng) -> Vec<Sample> {
    (0..n).map(|_| world.sample(rng)).collect()
}

/// d2 x d1 matrix with columns drawn uniformly on the unit sphere.
pub fn make_superposition_map(d1: usize, d2: usize, rng: &mut SeededRng) -> Result<Matrix> {
    if d2 == 0 || d1 == 0 {
        return Err(Error::Config("dimensions must be positive".into()));
    }
    let mut p = Matrix::zeros(d2, d1);
    for m in 0..d1 {
        let col = rng.unit_sphere(d2);
        p.set_col(m, &col);
    }
    Ok(p)
}

/// The globally non-learnable instance: d1 cells, cell m has concept e_m,
/// feature direction p_m uniform on the sphere, and noiseless label 1.
#[derive(Debug, Clone)]
pub struct NonLearnableInstance {
    pub d1: usize,
    pub d2: usize,
    /// d2 x d1; column m is cell m's feature direction.
    pub p: Matrix,
}

impl NonLearnableInstance {
    /// The sample living in cell m: phi = e_m, psi = p_m, y = 1.
    pub fn cell_sample(&self, m: usize) -> Sample {
        let phi = SparseVector::new(self.d1, vec![(m, 1.0)]).expect("cell index in range");
        Sample { concept: phi, feature: self.p.col(m), label: 1.0, cell: Some(m) }
    }

    /// One sample per cell, in cell order (the instance is deterministic
    /// given P; cell probabilities are uniform so this enumerates the
    /// population).
    pub fn all_cells(&self) -> Vec<Sample> {
        (0..self.d1).map(|m| self.cell_sample(m)).collect()
    }

    /// The local map of cell m: all-zero except column m = p_m. Its row space
    /// is span(e_m), so the 1-sparse local solution exists exactly.
    pub fn local_map(&self, m: usize) -> Matrix {
        let mut p_loc = Matrix::zeros(self.d2, self.d1);
        let col = self.p.col(m);
        p_loc.set_col(m, &col);
        p_loc
    }
}

pub fn make_nonlearnable_instance(
    d1: usize,
    d2: usize,
    rng: &mut SeededRng,
) -> Result<NonLearnableInstance> {
    if d2 > d1 {
        return Err(Error::Config(format!(
            "non-learnable instance needs d2 <= d1, got d2 {d2} > d1 {d1}"
        )));
    }
    if d2 == 0 {
        return Err(Error::Config("d2 must be positive".into()));
    }
    let p = make_superposition_map(d1, d2, rng)?;
    Ok(NonLearnableInstance { d1, d2, p })
}

/// Max absolute cross-coherence max_{i != j} |<p_i, p_j>| over columns.
pub fn max_cross_coherence(p: &Matrix) -> f64 {
    let d1 = p.cols();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d1);
    for j in 0..d1 {
        cols.push(p.col(j));
    }
    let mut best: f64 = 0.0;
    for i in 0..d1 {
        for j in (i + 1)..d1 {
            best = best.max(dot(&cols[i], &cols[j]).abs());
        }
    }
    best
}

/// psi = P phi for a sparse phi without densifying.
pub fn project_sparse(p: &Matrix, phi: &SparseVector) -> Vec<f64> {
    let mut psi = vec![0.0; p.rows()];
    for &(m, x) in phi.entries() {
        let col = p.col(m);
        axpy(x, &col, &mut psi);
    }
    psi
}
