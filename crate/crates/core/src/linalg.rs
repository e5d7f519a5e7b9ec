//! One-sided Jacobi SVD.
//!
//! nalgebra's SVD occasionally returns factorizations whose reconstruction
//! error is ~1e-6 relative on the graded operators met here, so the thin
//! SVDs of the solver are computed with Hestenes' method instead.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U Σ Vᵀ` with `k = min(m, n)` singular values in
/// descending order.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// m × k; columns for zero singular values are zero.
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    /// k × n with orthonormal rows.
    pub v_t: DMatrix<f64>,
}

pub fn thin_svd(a: &DMatrix<f64>) -> Result<ThinSvd> {
    if a.nrows() >= a.ncols() {
        let (u, s, v) = jacobi_tall(a.clone())?;
        Ok(ThinSvd {
            u,
            singular_values: s,
            v_t: v.transpose(),
        })
    } else {
        // Aᵀ = U Σ Vᵀ  ⇒  A = V Σ Uᵀ
        let (u, s, v) = jacobi_tall(a.transpose())?;
        Ok(ThinSvd {
            u: v,
            singular_values: s,
            v_t: u.transpose(),
        })
    }
}

/// Orthogonalizes the columns of `w` (m ≥ n) by plane rotations; returns
/// `(U, σ, V)` with `V` square orthogonal.
fn jacobi_tall(mut w: DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (m, n) = w.shape();
    let mut v = DMatrix::<f64>::identity(n, n);
    let tol = (m.max(1) as f64).sqrt() * f64::EPSILON;
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        converged = true;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (w.column(p), w.column(q));
                    (cp.norm_squared(), cq.norm_squared(), cp.dot(&cq))
                };
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
    }
    if !converged {
        return Err(Error::Numerical("Jacobi SVD did not converge".into()));
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = DMatrix::zeros(m, n);
    let mut vs = DMatrix::zeros(n, n);
    let mut s = DVector::zeros(n);
    for (k, &j) in order.iter().enumerate() {
        s[k] = norms[j];
        if norms[j] > 0.0 {
            u.set_column(k, &(w.column(j) / norms[j]));
        }
        vs.set_column(k, &v.column(j));
    }
    Ok((u, s, vs))
}

/// Columns `(p, q) ← (c·p − s·q, s·p + c·q)`.
fn rotate(a: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..a.nrows() {
        let (x, y) = (a[(i, p)], a[(i, q)]);
        a[(i, p)] = c * x - s * y;
        a[(i, q)] = s * x + c * y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check(a: &DMatrix<f64>) {
        let svd = thin_svd(a).unwrap();
        let k = a.nrows().min(a.ncols());
        assert_eq!(svd.singular_values.len(), k);
        let rec = &svd.u * DMatrix::from_diagonal(&svd.singular_values) * &svd.v_t;
        assert!((rec - a).norm() <= 1e-13 * a.norm().max(1e-300));
        let vvt = &svd.v_t * svd.v_t.transpose();
        assert!((vvt - DMatrix::identity(k, k)).norm() < 1e-13);
        for w in svd.singular_values.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn random_and_graded_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (m, n) in [(1, 1), (5, 3), (3, 5), (40, 12), (12, 40), (30, 30)] {
            let mut a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
            check(&a);
            // strongly graded columns
            for j in 0..n {
                let f = 10f64.powi(-(j as i32) / 2);
                a.column_mut(j).scale_mut(f);
            }
            check(&a);
        }
    }

    #[test]
    fn rank_deficient_and_zero() {
        let x = DMatrix::from_fn(6, 1, |i, _| i as f64 + 1.0);
        let a = &x * x.transpose().columns(0, 4);
        let svd = thin_svd(&a).unwrap();
        assert!(svd.singular_values[1] < 1e-12 * svd.singular_values[0]);
        check(&a);
        let z = DMatrix::<f64>::zeros(4, 3);
        assert_eq!(thin_svd(&z).unwrap().singular_values.max(), 0.0);
    }

    #[test]
    fn agrees_with_symmetric_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = DMatrix::from_fn(9, 20, |_, _| rng.random_range(-1.0..1.0));
        let svd = thin_svd(&a).unwrap();
        let mut eig: Vec<f64> = (&a * a.transpose()).symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|x, y| y.total_cmp(x));
        for (s, e) in svd.singular_values.iter().zip(eig) {
            assert!((s * s - e).abs() < 1e-12 * e.abs().max(1.0));
        }
    }
}
