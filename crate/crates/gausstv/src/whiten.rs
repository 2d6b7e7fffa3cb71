//! Reduction of a full-rank Gaussian pair to the canonical product form
//! `N(mu, diag(sigma2))` vs `N(0, I)`.
//!
//! The recipe: decompose `S2 = Q2 L2 Q2^T`, form `A = Q2 L2^{-1/2} Q2^T`,
//! decompose `A S1 A^T = Q1 L1 Q1^T`; then `mu = Q1^T A (mu1 - mu2)` and
//! `sigma2 = L1`. The map `v -> Q1^T A (v - mu2)` is invertible, so the TV
//! distance is unchanged.
//!
//! The eigendecomposition backend is an external primitive with validated
//! output: both the orthogonality defect and the reconstruction residual
//! must pass the `delta_diag` budget or the whole reduction refuses. The
//! budget defaults to [`DEFAULT_DIAG_RESIDUAL`] and can be overridden with
//! the `GAUSSTV_DIAG_RESIDUAL` environment variable.

use crate::gaussian::{symmetrize, GaussianParams};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Default relative Frobenius residual budget for eigendecompositions.
pub const DEFAULT_DIAG_RESIDUAL: f64 = 1e-10;

/// Residual budget: `GAUSSTV_DIAG_RESIDUAL` when set and parseable,
/// otherwise [`DEFAULT_DIAG_RESIDUAL`].
pub fn diag_residual_budget() -> f64 {
    std::env::var("GAUSSTV_DIAG_RESIDUAL")
        .ok()
        .and_then(|s| s.parse::<f64>().ok())
        .filter(|v| v.is_finite() && *v > 0.0)
        .unwrap_or(DEFAULT_DIAG_RESIDUAL)
}

/// A validated symmetric eigendecomposition `S ~ Q diag(lambda) Q^T` with
/// eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub q: DMatrix<f64>,
    pub lambda: DVector<f64>,
    /// `||S - Q L Q^T||_F / ||S||_F`
    pub reconstruction_residual: f64,
    /// `||Q^T Q - I||_F`
    pub orthogonality_defect: f64,
}

/// Decomposes a symmetric strictly positive definite matrix and validates
/// the output against `delta_diag`: orthogonality defect at most
/// `delta_diag * n` and reconstruction residual at most `delta_diag`
/// relative to `||S||_F`. Nonpositive eigenvalues are refused.
pub fn symmetric_eigendecompose(s: &DMatrix<f64>, delta_diag: f64) -> Result<EigenDecomposition> {
    let n = s.nrows();
    if n != s.ncols() {
        return Err(Error::ShapeMismatch(format!("matrix is {}x{}", n, s.ncols())));
    }
    let eig = symmetrize(s).symmetric_eigen();
    // sort descending, reordering eigenvector columns to match
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let lambda = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let mut q = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        q.set_column(dst, &eig.eigenvectors.column(src));
    }

    let smallest = lambda[n - 1];
    if smallest <= 0.0 {
        return Err(Error::SingularCovariance(smallest));
    }
    let orth = (q.transpose() * &q - DMatrix::identity(n, n)).norm();
    let recon = (s - &q * DMatrix::from_diagonal(&lambda) * q.transpose()).norm();
    let s_norm = s.norm().max(f64::MIN_POSITIVE);
    let recon_rel = recon / s_norm;
    let budget_orth = delta_diag * n as f64;
    if orth > budget_orth {
        return Err(Error::ResidualTooLarge {
            actual: orth,
            budget: budget_orth,
        });
    }
    if recon_rel > delta_diag {
        return Err(Error::ResidualTooLarge {
            actual: recon_rel,
            budget: delta_diag,
        });
    }
    Ok(EigenDecomposition {
        q,
        lambda,
        reconstruction_residual: recon_rel,
        orthogonality_defect: orth,
    })
}

/// The whitened pair: `N(mu, diag(sigma2))` against the standard Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductGaussianPair {
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl ProductGaussianPair {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Residuals and conditioning observed during [`whiten_pair`].
#[derive(Debug, Clone)]
pub struct WhitenReport {
    /// Condition number of the first covariance.
    pub kappa1: f64,
    /// Condition number of the second covariance.
    pub kappa2: f64,
    /// Reconstruction residuals of the two decompositions.
    pub diag_residuals: (f64, f64),
    pub delta_diag: f64,
}

/// Whitens a strictly positive definite pair; see the module docs for the
/// construction. Both eigendecompositions are validated against the
/// environment residual budget.
pub fn whiten_pair(
    p1: &GaussianParams,
    p2: &GaussianParams,
) -> Result<(ProductGaussianPair, WhitenReport)> {
    whiten_pair_with(p1, p2, diag_residual_budget())
}

/// [`whiten_pair`] with an explicit residual budget.
pub fn whiten_pair_with(
    p1: &GaussianParams,
    p2: &GaussianParams,
    delta_diag: f64,
) -> Result<(ProductGaussianPair, WhitenReport)> {
    if p1.dim() != p2.dim() {
        return Err(Error::ShapeMismatch(format!(
            "dimensions {} and {}",
            p1.dim(),
            p2.dim()
        )));
    }
    let n = p1.dim();
    let e2 = symmetric_eigendecompose(&p2.covariance, delta_diag)?;
    let inv_sqrt = DVector::from_fn(n, |i, _| 1.0 / e2.lambda[i].sqrt());
    let a = &e2.q * DMatrix::from_diagonal(&inv_sqrt) * e2.q.transpose();
    let b = symmetrize(&(&a * &p1.covariance * a.transpose()));
    let e1 = symmetric_eigendecompose(&b, delta_diag)?;

    let mu_vec = e1.q.transpose() * (&a * (&p1.mean - &p2.mean));
    let sigma2: Vec<f64> = e1.lambda.iter().copied().collect();
    if sigma2.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::SingularCovariance(
            sigma2.iter().copied().fold(f64::INFINITY, f64::min),
        ));
    }

    let kappa2 = e2.lambda[0] / e2.lambda[n - 1];
    let s1_eigs = symmetrize(&p1.covariance).symmetric_eigenvalues();
    let kappa1 = s1_eigs.max() / s1_eigs.min();

    Ok((
        ProductGaussianPair {
            mu: mu_vec.iter().copied().collect(),
            sigma2,
        },
        WhitenReport {
            kappa1,
            kappa2,
            diag_residuals: (e1.reconstruction_residual, e2.reconstruction_residual),
            delta_diag,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(mean: &[f64], cov: &[&[f64]]) -> GaussianParams {
        GaussianParams::from_raw(mean.to_vec(), cov.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn eigen_identity() {
        let d = symmetric_eigendecompose(&DMatrix::identity(3, 3), 1e-10).unwrap();
        for i in 0..3 {
            assert_eq!(d.lambda[i], 1.0);
        }
        assert!(d.orthogonality_defect <= 3e-10);
    }

    #[test]
    fn eigen_two_by_two() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let d = symmetric_eigendecompose(&s, 1e-10).unwrap();
        assert!((d.lambda[0] - 3.0).abs() < 1e-12);
        assert!((d.lambda[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_already_diagonal() {
        let s = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let d = symmetric_eigendecompose(&s, 1e-10).unwrap();
        assert_eq!(d.lambda[0], 4.0);
        assert_eq!(d.lambda[1], 1.0);
        // rows/cols of q are signed unit vectors
        for j in 0..2 {
            let col = d.q.column(j);
            assert!((col.norm() - 1.0).abs() < 1e-12);
            assert!((col.amax() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_rejects_singular_and_tight_budget() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            symmetric_eigendecompose(&s, 1e-10),
            Err(Error::SingularCovariance(_))
        ));
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!(matches!(
            symmetric_eigendecompose(&s, 1e-18),
            Err(Error::ResidualTooLarge { .. })
        ));
    }

    #[test]
    fn whiten_identity_pair() {
        let p = g(&[0.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]]);
        let (out, report) = whiten_pair_with(&p, &p.clone(), 1e-10).unwrap();
        assert_eq!(out.mu, vec![0.0, 0.0]);
        assert_eq!(out.sigma2, vec![1.0, 1.0]);
        assert_eq!(report.kappa2, 1.0);
    }

    #[test]
    fn whiten_one_dim() {
        let p1 = g(&[3.0], &[&[4.0]]);
        let p2 = g(&[1.0], &[&[1.0]]);
        let (out, _) = whiten_pair_with(&p1, &p2, 1e-10).unwrap();
        assert!((out.mu[0] - 2.0).abs() < 1e-12);
        assert!((out.sigma2[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn whiten_two_dim_eigenvalues() {
        let p1 = g(&[0.0, 0.0], &[&[2.0, 1.0], &[1.0, 2.0]]);
        let p2 = g(&[0.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]]);
        let (out, _) = whiten_pair_with(&p1, &p2, 1e-10).unwrap();
        assert!(out.mu.iter().all(|m| m.abs() < 1e-12));
        assert!((out.sigma2[0] - 3.0).abs() < 1e-12);
        assert!((out.sigma2[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn whiten_rejects_singular_second() {
        let p1 = g(&[0.0], &[&[1.0]]);
        let p2 = g(&[0.0], &[&[0.0]]);
        assert!(whiten_pair_with(&p1, &p2, 1e-10).is_err());
    }

    #[test]
    fn sigma2_matches_similarity_eigenvalues() {
        // whitened variances are the eigenvalues of S2^{-1/2} S1 S2^{-1/2}
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let n = rng.random_range(1..4usize);
            let spd = |rng: &mut rand_chacha::ChaCha8Rng| {
                let m = DMatrix::from_fn(n, n, |_, _, | rng.random_range(-1.0..1.0f64));
                symmetrize(&(&m * m.transpose())) + DMatrix::identity(n, n) * 0.3
            };
            let s1 = spd(&mut rng);
            let s2 = spd(&mut rng);
            let p1 = GaussianParams::new(DVector::zeros(n), s1.clone());
            let p2 = GaussianParams::new(DVector::zeros(n), s2.clone());
            let (out, _) = whiten_pair_with(&p1, &p2, 1e-8).unwrap();

            let e2 = s2.symmetric_eigen();
            let inv_sqrt =
                DVector::from_fn(n, |i, _| 1.0 / e2.eigenvalues[i].sqrt());
            let root = &e2.eigenvectors
                * DMatrix::from_diagonal(&inv_sqrt)
                * e2.eigenvectors.transpose();
            let mut sim_eigs: Vec<f64> = (&root * &s1 * root.transpose())
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .collect();
            sim_eigs.sort_by(|a, b| b.total_cmp(a));
            for (a, b) in out.sigma2.iter().zip(&sim_eigs) {
                assert!((a - b).abs() <= 1e-8 * b.max(1.0), "{a} vs {b}");
            }
        }
    }
}
