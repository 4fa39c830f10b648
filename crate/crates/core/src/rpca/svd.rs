//! Thin SVD by one-sided (Hestenes) Jacobi rotations.

use nalgebra::{DMatrix, DVector};

use super::RpcaError;

const MAX_SWEEPS: usize = 80;

/// `M = U diag(sigma) V^T` with `k = min(n1, n2)` columns in `U` and `V`.
#[derive(Clone, Debug, PartialEq)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.singular_values.iter().filter(|s| **s > tol).count()
    }
}

/// Orthogonalizes the columns of `a` (`m >= n`) in place and returns the
/// accumulated right rotations.
fn orthogonalize_columns(a: &mut DMatrix<f64>) -> Result<DMatrix<f64>, RpcaError> {
    let (m, n) = a.shape();
    let mut v = DMatrix::<f64>::identity(n, n);
    let tol = f64::EPSILON * (m as f64).sqrt();
    for sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let (x, y) = (a[(i, p)], a[(i, q)]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (a[(i, p)], a[(i, q)]);
                    a[(i, p)] = c * x - s * y;
                    a[(i, q)] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            log::trace!("jacobi svd converged after {} sweeps", sweep + 1);
            return Ok(v);
        }
    }
    Err(RpcaError::SvdNoConvergence {
        sweeps: MAX_SWEEPS,
        rows: m,
        cols: n,
    })
}

/// Fills zero columns of `u` with unit vectors orthogonal to the others.
fn complete_basis(u: &mut DMatrix<f64>, filled: &[bool]) {
    let m = u.nrows();
    let mut candidate = 0;
    for (j, _) in filled.iter().enumerate().filter(|(_, &f)| !f) {
        while candidate < m {
            let mut e = DVector::<f64>::zeros(m);
            e[candidate] = 1.0;
            candidate += 1;
            // two passes of Gram-Schmidt against every current column
            for _ in 0..2 {
                for k in 0..u.ncols() {
                    if k == j {
                        continue;
                    }
                    let col = u.column(k);
                    let d = col.dot(&e);
                    e.axpy(-d, &col, 1.0);
                }
            }
            let norm = e.norm();
            if norm > 1e-8 {
                u.set_column(j, &(e / norm));
                break;
            }
        }
    }
}

/// Thin SVD with singular values in descending order.
///
/// The largest-magnitude entry of each left singular vector is made positive
/// (earliest entry on ties), which fixes the sign of every pair `(u_j, v_j)`.
pub fn svd(m: &DMatrix<f64>) -> Result<Svd, RpcaError> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(RpcaError::NonFinite);
    }
    let transposed = m.nrows() < m.ncols();
    let mut a = if transposed { m.transpose() } else { m.clone() };
    let (rows, k) = a.shape();
    let v_rot = orthogonalize_columns(&mut a)?;

    let norms: Vec<f64> = (0..k).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let scale = norms.iter().cloned().fold(0.0, f64::max);
    let tiny = scale * f64::EPSILON * rows.max(k) as f64;
    let mut u = DMatrix::<f64>::zeros(rows, k);
    let mut v = DMatrix::<f64>::zeros(k, k);
    let mut sigma = DVector::<f64>::zeros(k);
    let mut filled = vec![false; k];
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        v.set_column(dst, &v_rot.column(src));
        if s > tiny && s > 0.0 {
            sigma[dst] = s;
            u.set_column(dst, &(a.column(src) / s));
            filled[dst] = true;
        }
    }
    complete_basis(&mut u, &filled);

    for j in 0..k {
        let col = u.column(j);
        let mut pivot = 0;
        for i in 1..rows {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }

    Ok(if transposed {
        Svd {
            u: v,
            singular_values: sigma,
            v: u,
        }
    } else {
        Svd {
            u,
            singular_values: sigma,
            v,
        }
    })
}
