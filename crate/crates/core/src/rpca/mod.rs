//! Robust PCA by principal component pursuit.
//!
//! Splits `M = L + S` with `L` low rank and `S` sparse by minimizing
//! `||L||_* + lambda ||S||_1` with the augmented-Lagrangian alternating
//! scheme: singular value thresholding for `L`, elementwise shrinkage for `S`
//! and a dual ascent step on `Y`.

mod svd;

pub use svd::{svd, Svd};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RpcaError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is empty")]
    Empty,
    #[error("jacobi svd did not converge in {sweeps} sweeps on a {rows}x{cols} matrix")]
    SvdNoConvergence {
        sweeps: usize,
        rows: usize,
        cols: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, RpcaError>;

/// Soft threshold `sign(x) * max(|x| - tau, 0)`.
pub fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

pub fn shrink_matrix(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    m.map(|x| shrink(x, tau))
}

/// Singular value thresholding `U diag(shrink(sigma, tau)) V^T`.
pub fn svt(m: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    Ok(svt_with_norm(m, tau)?.0)
}

/// [`svt`] plus the nuclear norm of the result.
fn svt_with_norm(m: &DMatrix<f64>, tau: f64) -> Result<(DMatrix<f64>, f64)> {
    let d = svd(m)?;
    let mut out = DMatrix::<f64>::zeros(m.nrows(), m.ncols());
    let mut nuclear = 0.0;
    for (j, &s) in d.singular_values.iter().enumerate() {
        let t = (s - tau).max(0.0);
        if t == 0.0 {
            // singular values are sorted, nothing further survives
            break;
        }
        nuclear += t;
        out += (d.u.column(j) * t) * d.v.column(j).transpose();
    }
    Ok((out, nuclear))
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(svd(m)?.singular_values.sum())
}

pub fn l1_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x.abs()).sum()
}

/// Solver settings. `None` fields are derived from the input matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpcaConfig {
    /// Sparsity weight; defaults to `1 / sqrt(max(n1, n2))`.
    pub lambda: Option<f64>,
    /// Augmented-Lagrangian penalty; defaults to `n1 n2 / (4 ||M||_1)`.
    pub mu: Option<f64>,
    /// Stop once `||M - L - S||_F <= tol ||M||_F`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RpcaConfig {
    fn default() -> Self {
        RpcaConfig {
            lambda: None,
            mu: None,
            tol: 1e-7,
            max_iter: 100,
        }
    }
}

impl RpcaConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        RpcaConfig {
            lambda: Some(lambda),
            ..Default::default()
        }
    }

    fn resolve(&self, m: &DMatrix<f64>) -> Result<(f64, f64)> {
        let (n1, n2) = m.shape();
        let lambda = self.lambda.unwrap_or(1.0 / (n1.max(n2) as f64).sqrt());
        let mu = self
            .mu
            .unwrap_or_else(|| (n1 * n2) as f64 / (4.0 * l1_norm(m)));
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(RpcaError::InvalidConfig(format!("lambda = {lambda}")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(RpcaError::InvalidConfig(format!("mu = {mu}")));
        }
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_iter == 0 {
            return Err(RpcaError::InvalidConfig(format!(
                "tol = {}, max_iter = {}",
                self.tol, self.max_iter
            )));
        }
        Ok((lambda, mu))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RpcaResult {
    pub low_rank: DMatrix<f64>,
    pub sparse: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `||M - L - S||_F / ||M||_F` of the returned iterate.
    pub residual: f64,
    /// `||L||_* + lambda ||S||_1` after the first iteration and for the returned iterate.
    pub first_objective: f64,
    pub objective: f64,
}

/// Principal component pursuit. Returns the iterate with the smallest residual;
/// `converged` is false when `max_iter` ran out first.
pub fn pcp(m: &DMatrix<f64>, cfg: &RpcaConfig) -> Result<RpcaResult> {
    if m.is_empty() {
        return Err(RpcaError::Empty);
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(RpcaError::NonFinite);
    }
    let (n1, n2) = m.shape();
    let m_norm = m.norm();
    if m_norm == 0.0 {
        return Ok(RpcaResult {
            low_rank: DMatrix::zeros(n1, n2),
            sparse: DMatrix::zeros(n1, n2),
            iterations: 1,
            converged: true,
            residual: 0.0,
            first_objective: 0.0,
            objective: 0.0,
        });
    }
    let (lambda, mu) = cfg.resolve(m)?;
    let inv_mu = 1.0 / mu;

    let mut s = DMatrix::<f64>::zeros(n1, n2);
    let mut y = DMatrix::<f64>::zeros(n1, n2);
    let mut best: Option<RpcaResult> = None;
    let mut first_objective = f64::NAN;

    for it in 1..=cfg.max_iter {
        let (l, nuclear) = svt_with_norm(&(m - &s + &y * inv_mu), inv_mu)?;
        s = shrink_matrix(&(m - &l + &y * inv_mu), lambda * inv_mu);
        let z = m - &l - &s;
        y += &z * mu;

        let residual = z.norm() / m_norm;
        let objective = nuclear + lambda * l1_norm(&s);
        if it == 1 {
            first_objective = objective;
        }
        let converged = residual <= cfg.tol;
        if best.as_ref().is_none_or(|b| residual < b.residual) || converged {
            best = Some(RpcaResult {
                low_rank: l,
                sparse: s.clone(),
                iterations: it,
                converged,
                residual,
                first_objective,
                objective,
            });
        }
        if converged {
            break;
        }
    }
    let mut out = best.expect("max_iter >= 1");
    out.first_objective = first_objective;
    if !out.converged {
        log::debug!(
            "pcp stopped after {} iterations, best residual {:.3e} at iteration {}",
            cfg.max_iter,
            out.residual,
            out.iterations
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shrink_examples() {
        assert!((shrink(0.7, 0.5) - 0.2).abs() < 1e-15);
        assert_eq!(shrink(-0.3, 0.5), 0.0);
        assert_eq!(shrink(-1.25, 0.0), -1.25);
        assert_eq!(shrink(-1.5, 0.5), -1.0);
    }

    #[test]
    fn svt_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let out = svt(&d, 1.5).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.5, 0.5, 0.0]));
        assert!((out - expected).norm() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = DMatrix::from_fn(4, 7, |_, _| rng.random::<f64>() - 0.5);
        assert!((svt(&m, 0.0).unwrap() - &m).norm() <= 1e-9 * m.norm());

        let u = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let v = DVector::from_vec(vec![0.5, 0.5]);
        let r1 = &u * v.transpose();
        let s1 = nuclear_norm(&r1).unwrap();
        assert_eq!(svt(&r1, s1).unwrap(), DMatrix::zeros(3, 2));
    }

    #[test]
    fn zero_matrix_converges_immediately() {
        let r = pcp(&DMatrix::zeros(4, 6), &RpcaConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.low_rank, DMatrix::zeros(4, 6));
        assert_eq!(r.sparse, DMatrix::zeros(4, 6));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            pcp(&DMatrix::zeros(0, 3), &RpcaConfig::default()),
            Err(RpcaError::Empty)
        );
        let mut m = DMatrix::<f64>::zeros(2, 2);
        m[(1, 1)] = f64::INFINITY;
        assert_eq!(pcp(&m, &RpcaConfig::default()), Err(RpcaError::NonFinite));
        let cfg = RpcaConfig {
            lambda: Some(-1.0),
            ..Default::default()
        };
        assert!(matches!(
            pcp(&DMatrix::from_element(2, 2, 1.0), &cfg),
            Err(RpcaError::InvalidConfig(_))
        ));
    }

    fn planted(seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = DVector::from_fn(20, |_, _| rng.random_range(-1.0..1.0));
        let v = DVector::from_fn(40, |_, _| rng.random_range(-1.0..1.0));
        let l0 = &u * v.transpose();
        let mut s0 = DMatrix::zeros(20, 40);
        let mut idx: Vec<usize> = (0..800).collect();
        for i in 0..40 {
            let j = rng.random_range(i..800);
            idx.swap(i, j);
            let sign = if rng.random::<bool>() { 10.0 } else { -10.0 };
            s0[(idx[i] % 20, idx[i] / 20)] = sign;
        }
        (l0, s0)
    }

    #[test]
    fn recovers_planted_decomposition() {
        let (l0, s0) = planted(1);
        let r = pcp(&(&l0 + &s0), &RpcaConfig::default()).unwrap();
        assert!(r.iterations <= 100);
        assert!((&r.low_rank - &l0).norm() / l0.norm() <= 1e-4);
        assert!((&r.sparse - &s0).norm() / s0.norm() <= 1e-4);
        assert!(r.objective <= r.first_objective);
    }

    #[test]
    fn converged_result_is_feasible() {
        let (l0, s0) = planted(2);
        let m = &l0 + &s0;
        let cfg = RpcaConfig::default();
        let r = pcp(&m, &cfg).unwrap();
        if r.converged {
            assert!((&m - &r.low_rank - &r.sparse).norm() <= cfg.tol * m.norm());
        }
    }

    #[test]
    fn scale_equivariance() {
        let (l0, s0) = planted(4);
        let m = &l0 + &s0;
        let cfg = RpcaConfig::default();
        let a = pcp(&m, &cfg).unwrap();
        let b = pcp(&(&m * 3.5), &cfg).unwrap();
        assert!((&b.low_rank - &a.low_rank * 3.5).norm() <= 1e-8 * b.low_rank.norm());
        assert!((&b.sparse - &a.sparse * 3.5).norm() <= 1e-8 * b.sparse.norm());
    }

    proptest! {
        #[test]
        fn shrink_is_odd_and_non_expansive(x in -50.0f64..50.0, y in -50.0f64..50.0, tau in 0.0f64..10.0) {
            prop_assert_eq!(shrink(-x, tau), -shrink(x, tau));
            prop_assert!((shrink(x, tau) - shrink(y, tau)).abs() <= (x - y).abs() + 1e-12);
        }

        #[test]
        fn svt_does_not_grow_nuclear_norm(seed in any::<u64>(), tau in 0.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = DMatrix::from_fn(5, 9, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let out = svt(&m, tau).unwrap();
            prop_assert!(nuclear_norm(&out).unwrap() <= nuclear_norm(&m).unwrap() + 1e-9);
        }
    }
}
