//! Factorizations backing the estimators: Householder QR, one-sided Jacobi
//! SVD (QR-preconditioned for tall inputs), minimum-norm least squares with
//! the standard pseudoinverse cutoff, and Cholesky for ridge systems.

use super::matrix::{axpy, dot, norm2, Matrix};
use crate::error::{Error, Result};

/// Thin QR of an m x n matrix with m >= n: returns (Q m x n with orthonormal
/// columns, R n x n upper triangular).
pub fn qr_thin(a: &Matrix) -> Result<(Matrix, Matrix)> {
    let (m, n) = (a.rows(), a.cols());
    if m < n {
        return Err(Error::Dimension(format!("qr_thin wants rows >= cols, got {m}x{n}")));
    }
    let mut r = a.clone();
    // Householder vectors, one per column, stored dense over rows k..m.
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v: Vec<f64> = (k..m).map(|i| r.get(i, k)).collect();
        let alpha = -v[0].signum() * norm2(&v);
        v[0] -= alpha;
        let vn = norm2(&v);
        if vn > 1e-300 {
            for x in &mut v {
                *x /= vn;
            }
            // Apply I - 2 v v^T to the trailing block of R.
            for j in k..n {
                let mut s = 0.0;
                for (i, vi) in v.iter().enumerate() {
                    s += vi * r.get(k + i, j);
                }
                s *= 2.0;
                for (i, vi) in v.iter().enumerate() {
                    let cur = r.get(k + i, j);
                    r.set(k + i, j, cur - s * vi);
                }
            }
        } else {
            v = vec![0.0; m - k];
        }
        vs.push(v);
    }
    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of I.
    let mut q = Matrix::zeros(m, n);
    for j in 0..n {
        q.set(j, j, 1.0);
    }
    for k in (0..n).rev() {
        let v = &vs[k];
        if v.iter().all(|&x| x == 0.0) {
            continue;
        }
        for j in 0..n {
            let mut s = 0.0;
            for (i, vi) in v.iter().enumerate() {
                s += vi * q.get(k + i, j);
            }
            s *= 2.0;
            for (i, vi) in v.iter().enumerate() {
                let cur = q.get(k + i, j);
                q.set(k + i, j, cur - s * vi);
            }
        }
    }
    let mut r_out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            r_out.set(i, j, r.get(i, j));
        }
    }
    Ok((q, r_out))
}

#[derive(Debug, Clone)]
pub struct Svd {
    /// m x r, orthonormal columns (r = min(m, n)).
    pub u: Matrix,
    /// Singular values, descending.
    pub sigma: Vec<f64>,
    /// n x r, orthonormal columns.
    pub v: Matrix,
}

/// One-sided Jacobi on a square-or-tall matrix. Columns of `g` are rotated
/// until mutually orthogonal; `v` accumulates the rotations.
fn jacobi_sweeps(g: &mut Matrix, v: &mut Matrix) {
    let n = g.cols();
    let m = g.rows();
    let tol = 1e-14;
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let mut a = 0.0;
                let mut b = 0.0;
                let mut c = 0.0;
                for row in 0..m {
                    let gi = g.get(row, i);
                    let gj = g.get(row, j);
                    a += gi * gi;
                    b += gj * gj;
                    c += gi * gj;
                }
                if c.abs() <= tol * (a * b).sqrt() || a == 0.0 || b == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * c);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for row in 0..m {
                    let gi = g.get(row, i);
                    let gj = g.get(row, j);
                    g.set(row, i, cs * gi - sn * gj);
                    g.set(row, j, sn * gi + cs * gj);
                }
                for row in 0..n {
                    let vi = v.get(row, i);
                    let vj = v.get(row, j);
                    v.set(row, i, cs * vi - sn * vj);
                    v.set(row, j, sn * vi + cs * vj);
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Full-accuracy SVD for any shape. Tall inputs are QR-preconditioned so the
/// Jacobi iteration runs on an n x n block; wide inputs go through the
/// transpose.
pub fn svd(a: &Matrix) -> Result<Svd> {
    let (m, n) = (a.rows(), a.cols());
    if m < n {
        let t = svd(&a.transpose())?;
        return Ok(Svd { u: t.v, sigma: t.sigma, v: t.u });
    }
    let (mut g, mut v, q_pre): (Matrix, Matrix, Option<Matrix>) = if m > n {
        let (q, r) = qr_thin(a)?;
        (r, Matrix::identity(n), Some(q))
    } else {
        (a.clone(), Matrix::identity(n), None)
    };
    jacobi_sweeps(&mut g, &mut v);

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| norm2(&g.col(j))).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap().then(x.cmp(&y)));

    let rows_u = g.rows();
    let mut u_small = Matrix::zeros(rows_u, n);
    let mut v_out = Matrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (slot, &j) in order.iter().enumerate() {
        let s = norms[j];
        sigma.push(s);
        if s > 1e-300 {
            let gc = g.col(j);
            for (i, &x) in gc.iter().enumerate() {
                u_small.set(i, slot, x / s);
            }
        }
        let vc = v.col(j);
        for (i, &x) in vc.iter().enumerate() {
            v_out.set(i, slot, x);
        }
    }
    let u = match q_pre {
        Some(q) => q.matmul(&u_small)?,
        None => u_small,
    };
    Ok(Svd { u, sigma, v: v_out })
}

#[derive(Debug, Clone)]
pub struct LstsqFit {
    pub x: Vec<f64>,
    pub rank: usize,
    /// Sum of squared residuals ||Ax - y||^2.
    pub resid_ss: f64,
}

/// Minimum-norm least squares via SVD with the standard cutoff
/// max(rows, cols) * machine-eps * sigma_max.
pub fn lstsq_minnorm(a: &Matrix, y: &[f64]) -> Result<LstsqFit> {
    if y.len() != a.rows() {
        return Err(Error::Dimension(format!(
            "lstsq rows {} vs labels {}",
            a.rows(),
            y.len()
        )));
    }
    let dec = svd(a)?;
    let smax = dec.sigma.first().copied().unwrap_or(0.0);
    let cutoff = a.rows().max(a.cols()) as f64 * f64::EPSILON * smax;
    let mut x = vec![0.0; a.cols()];
    let mut rank = 0;
    for (i, &s) in dec.sigma.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            let coeff = dot(&dec.u.col(i), y) / s;
            axpy(coeff, &dec.v.col(i), &mut x);
        }
    }
    let pred = a.matvec(&x)?;
    let resid_ss = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(LstsqFit { x, rank, resid_ss })
}

/// Solves (A^T A + lambda I) x = A^T y by Cholesky. `lambda` must make the
/// system positive definite (any lambda > 0, or full-column-rank A).
pub fn solve_regularized_normal_eq(a: &Matrix, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let n = a.cols();
    let mut gram = a.matmul_transa(a)?;
    for i in 0..n {
        let d = gram.get(i, i);
        gram.set(i, i, d + lambda);
    }
    let rhs = a.matvec_transa(y)?;
    cholesky_solve(&gram, &rhs)
}

/// Cholesky solve for symmetric positive definite systems.
pub fn cholesky_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::Dimension("cholesky needs square A and matching b".into()));
    }
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Numeric(format!(
                        "matrix not positive definite at pivot {i} (value {s:.3e})"
                    )));
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    // Forward then backward substitution.
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * z[k];
        }
        z[i] = s / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng::SeededRng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.normal()).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn assert_orthonormal_cols(m: &Matrix, tol: f64) {
        for i in 0..m.cols() {
            for j in i..m.cols() {
                let d = dot(&m.col(i), &m.col(j));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < tol, "cols {i},{j}: {d}");
            }
        }
    }

    #[test]
    fn qr_reconstructs_and_q_is_orthonormal() {
        let mut rng = SeededRng::new(1);
        for (m, n) in [(6, 4), (10, 10), (30, 5)] {
            let a = random_matrix(m, n, &mut rng);
            let (q, r) = qr_thin(&a).unwrap();
            assert_orthonormal_cols(&q, 1e-12);
            let back = q.matmul(&r).unwrap();
            for (x, y) in back.data().iter().zip(a.data()) {
                assert!((x - y).abs() < 1e-10);
            }
            // R is upper triangular.
            for i in 0..n {
                for j in 0..i {
                    assert_eq!(r.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn svd_reconstructs_every_shape() {
        let mut rng = SeededRng::new(2);
        for (m, n) in [(5, 5), (9, 4), (4, 9), (20, 3)] {
            let a = random_matrix(m, n, &mut rng);
            let dec = svd(&a).unwrap();
            assert_orthonormal_cols(&dec.u, 1e-10);
            assert_orthonormal_cols(&dec.v, 1e-10);
            assert!(dec.sigma.windows(2).all(|w| w[0] >= w[1] - 1e-12));
            // Rebuild A = U diag(sigma) V^T.
            let r = dec.sigma.len();
            let mut us = dec.u.clone();
            for j in 0..r {
                for i in 0..us.rows() {
                    let x = us.get(i, j);
                    us.set(i, j, x * dec.sigma[j]);
                }
            }
            let back = us.matmul_transb(&dec.v).unwrap();
            for (x, y) in back.data().iter().zip(a.data()) {
                assert!((x - y).abs() < 1e-9, "shape {m}x{n}");
            }
        }
    }

    #[test]
    fn singular_values_match_external_oracle() {
        let mut rng = SeededRng::new(3);
        let a = random_matrix(12, 7, &mut rng);
        let dec = svd(&a).unwrap();
        let na = nalgebra::DMatrix::from_row_slice(12, 7, a.data());
        let oracle = na.svd(false, false);
        let mut want: Vec<f64> = oracle.singular_values.iter().copied().collect();
        want.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (s, w) in dec.sigma.iter().zip(&want) {
            assert!((s - w).abs() < 1e-10, "{s} vs {w}");
        }
    }

    #[test]
    fn lstsq_matches_normal_equations_on_full_rank_systems() {
        let mut rng = SeededRng::new(4);
        for _ in 0..20 {
            let a = random_matrix(20, 5, &mut rng);
            let y: Vec<f64> = (0..20).map(|_| rng.normal()).collect();
            let fit = lstsq_minnorm(&a, &y).unwrap();
            assert_eq!(fit.rank, 5);
            let oracle = solve_regularized_normal_eq(&a, &y, 0.0).unwrap();
            for (x, o) in fit.x.iter().zip(&oracle) {
                assert!((x - o).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn lstsq_matches_nalgebra_pinv_on_rank_deficient_systems() {
        let mut rng = SeededRng::new(5);
        // Rank-2 design: 8x5 = (8x2)(2x5).
        let b = random_matrix(8, 2, &mut rng);
        let c = random_matrix(2, 5, &mut rng);
        let a = b.matmul(&c).unwrap();
        let y: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
        let fit = lstsq_minnorm(&a, &y).unwrap();
        assert_eq!(fit.rank, 2);

        let na = nalgebra::DMatrix::from_row_slice(8, 5, a.data());
        let ny = nalgebra::DVector::from_column_slice(&y);
        let pinv = na.pseudo_inverse(1e-10).unwrap();
        let want = pinv * ny;
        for (x, w) in fit.x.iter().zip(want.iter()) {
            assert!((x - w).abs() < 1e-8, "{x} vs {w}");
        }
    }

    #[test]
    fn minnorm_solution_is_shortest_among_minimizers() {
        let mut rng = SeededRng::new(6);
        // Rank-1 design: any null-space perturbation must increase the norm
        // while keeping the residual.
        let u: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let v: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let mut a = Matrix::zeros(6, 4);
        for i in 0..6 {
            for j in 0..4 {
                a.set(i, j, u[i] * v[j]);
            }
        }
        let y: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let fit = lstsq_minnorm(&a, &y).unwrap();
        assert_eq!(fit.rank, 1);
        let base_norm = norm2(&fit.x);
        for _ in 0..20 {
            let mut null: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
            // Project out the row-space direction v.
            let vn = norm2(&v);
            let coef = dot(&null, &v) / (vn * vn);
            for (n, &vi) in null.iter_mut().zip(&v) {
                *n -= coef * vi;
            }
            if norm2(&null) < 1e-9 {
                continue;
            }
            let perturbed: Vec<f64> = fit.x.iter().zip(&null).map(|(x, n)| x + n).collect();
            let resid: f64 = {
                let p = a.matvec(&perturbed).unwrap();
                p.iter().zip(&y).map(|(pi, yi)| (pi - yi) * (pi - yi)).sum()
            };
            assert!((resid - fit.resid_ss).abs() < 1e-8);
            assert!(norm2(&perturbed) > base_norm);
        }
    }

    #[test]
    fn identity_design_returns_labels() {
        let a = Matrix::identity(4);
        let y = vec![0.5, -1.0, 2.0, 0.0];
        let fit = lstsq_minnorm(&a, &y).unwrap();
        for (x, w) in fit.x.iter().zip(&y) {
            assert!((x - w).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let mut rng = SeededRng::new(7);
        let b = random_matrix(6, 6, &mut rng);
        let mut spd = b.matmul_transb(&b).unwrap();
        for i in 0..6 {
            let d = spd.get(i, i);
            spd.set(i, i, d + 1.0);
        }
        let x_true: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let rhs = spd.matvec(&x_true).unwrap();
        let x = cholesky_solve(&spd, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite_matrix() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            cholesky_solve(&a, &[1.0, 1.0]),
            Err(crate::error::Error::Numeric(_))
        ));
    }
}
