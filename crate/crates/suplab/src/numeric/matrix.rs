//! Dense row-major matrices and the slice-level vector ops the rest of the
//! crate builds on. Deliberately minimal: the hot paths are matmul with a
//! transposed right factor (contiguous dot products) and in-place updates.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "matrix data length {} != {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Dimension("matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "ragged rows: expected {cols} columns, found {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    /// Stacks borrowed row slices; the workhorse for building neighborhood designs.
    pub fn from_row_slices(rows: &[&[f64]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Dimension("matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "ragged rows: expected {cols} columns, found {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        debug_assert_eq!(v.len(), self.rows);
        for (i, &x) in v.iter().enumerate() {
            self.data[i * self.cols + j] = x;
        }
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// self * b. ikj loop order keeps the inner loop on contiguous rows.
    pub fn matmul(&self, b: &Matrix) -> Result<Matrix> {
        if self.cols != b.rows {
            return Err(Error::Dimension(format!(
                "matmul {}x{} * {}x{}",
                self.rows, self.cols, b.rows, b.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            let arow = self.row(i);
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (k, &a) in arow.iter().enumerate() {
                if a != 0.0 {
                    let brow = &b.data[k * b.cols..(k + 1) * b.cols];
                    for (o, &bv) in orow.iter_mut().zip(brow) {
                        *o += a * bv;
                    }
                }
            }
        }
        Ok(out)
    }

    /// self * b^T. Both factors are scanned row-contiguously, so this is the
    /// fastest product available here; prefer storing the right factor so its
    /// rows are the vectors being dotted.
    pub fn matmul_transb(&self, b: &Matrix) -> Result<Matrix> {
        if self.cols != b.cols {
            return Err(Error::Dimension(format!(
                "matmul_transb {}x{} * ({}x{})^T",
                self.rows, self.cols, b.rows, b.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, b.rows);
        for i in 0..self.rows {
            let arow = self.row(i);
            let orow = &mut out.data[i * b.rows..(i + 1) * b.rows];
            for (j, o) in orow.iter_mut().enumerate() {
                *o = dot(arow, b.row(j));
            }
        }
        Ok(out)
    }

    /// self^T * b without materializing the transpose.
    pub fn matmul_transa(&self, b: &Matrix) -> Result<Matrix> {
        if self.rows != b.rows {
            return Err(Error::Dimension(format!(
                "matmul_transa ({}x{})^T * {}x{}",
                self.rows, self.cols, b.rows, b.cols
            )));
        }
        let mut out = Matrix::zeros(self.cols, b.cols);
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = b.row(k);
            for (i, &a) in arow.iter().enumerate() {
                if a != 0.0 {
                    let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
                    for (o, &bv) in orow.iter_mut().zip(brow) {
                        *o += a * bv;
                    }
                }
            }
        }
        Ok(out)
    }

    /// y = self * x for a dense vector x.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "matvec {}x{} * {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// y = self^T * x.
    pub fn matvec_transa(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::Dimension(format!(
                "matvec_transa ({}x{})^T * {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(xi, self.row(i), &mut y);
            }
        }
        Ok(y)
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// self += s * other.
    pub fn add_scaled(&mut self, other: &Matrix, s: f64) {
        debug_assert_eq!(self.rows, other.rows);
        debug_assert_eq!(self.cols, other.cols);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn frob_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// y += a * x.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[inline]
pub fn scale_in_place(v: &mut [f64], s: f64) {
    for x in v {
        *x *= s;
    }
}

/// v / ||v||, erroring on the zero vector.
pub fn normalize(v: &mut [f64]) -> Result<()> {
    let n = norm2(v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Numeric("cannot normalize zero or non-finite vector".into()));
    }
    scale_in_place(v, 1.0 / n);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng::SeededRng;
    use proptest::prelude::*;

    fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.normal()).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn identity_times_m_is_m() {
        let mut rng = SeededRng::new(7);
        let m = random_matrix(3, 3, &mut rng);
        let i3 = Matrix::identity(3);
        assert_eq!(i3.matmul(&m).unwrap(), m);
    }

    #[test]
    fn hand_arithmetic_2x2_times_2x1() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.get(0, 0), 3.0);
        assert_eq!(c.get(1, 0), 7.0);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let mut rng = SeededRng::new(42);
        let a = random_matrix(5, 7, &mut rng);
        let b = random_matrix(7, 3, &mut rng);
        let c = a.matmul(&b).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                let mut want = 0.0;
                for k in 0..7 {
                    want += a.get(i, k) * b.get(k, j);
                }
                assert!((c.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_shape_mismatch_is_dimension_error() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        assert!(matches!(a.matmul(&b), Err(crate::error::Error::Dimension(_))));
    }

    #[test]
    fn transposed_products_agree_with_plain_matmul() {
        let mut rng = SeededRng::new(3);
        let a = random_matrix(4, 6, &mut rng);
        let b = random_matrix(5, 6, &mut rng);
        let via_transb = a.matmul_transb(&b).unwrap();
        let via_plain = a.matmul(&b.transpose()).unwrap();
        for (x, y) in via_transb.data().iter().zip(via_plain.data()) {
            assert!((x - y).abs() < 1e-12);
        }

        let c = random_matrix(4, 5, &mut rng);
        let via_transa = a.matmul_transa(&c).unwrap();
        let via_plain = a.transpose().matmul(&c).unwrap();
        for (x, y) in via_transa.data().iter().zip(via_plain.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn matvec_routes_agree() {
        let mut rng = SeededRng::new(9);
        let a = random_matrix(6, 4, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let y = a.matvec(&x).unwrap();
        let x_col = Matrix::from_vec(4, 1, x.clone()).unwrap();
        let y_mat = a.matmul(&x_col).unwrap();
        for i in 0..6 {
            assert!((y[i] - y_mat.get(i, 0)).abs() < 1e-12);
        }
        let z: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let w = a.matvec_transa(&z).unwrap();
        let w_oracle = a.transpose().matvec(&z).unwrap();
        for j in 0..4 {
            assert!((w[j] - w_oracle[j]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn matmul_is_associative_on_small_matrices(seed in 0u64..500) {
            let mut rng = SeededRng::new(seed);
            let a = random_matrix(3, 4, &mut rng);
            let b = random_matrix(4, 2, &mut rng);
            let c = random_matrix(2, 5, &mut rng);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            for (x, y) in left.data().iter().zip(right.data()) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn transpose_is_involutive(seed in 0u64..500) {
            let mut rng = SeededRng::new(seed);
            let a = random_matrix(4, 7, &mut rng);
            prop_assert_eq!(a.transpose().transpose(), a);
        }
    }
}
