//! Gaussian problem inputs: validation, degenerate-rank resolution, and
//! closed-form TV bounds used as sanity rails around the pipeline.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Absolute per-entry tolerance for covariance symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative eigenvalue floor: PSD means `lambda_min >= -PSD_TOL * max(1, lambda_max)`.
pub const PSD_TOL: f64 = 1e-10;
/// Relative eigenvalue threshold that separates rank from noise.
pub const RANK_TOL: f64 = 1e-10;
/// Residual tolerance for the affine-support equality test.
pub const SUPPORT_TOL: f64 = 1e-10;

/// A mean vector with a symmetric positive semi-definite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianParams {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> GaussianParams {
        GaussianParams { mean, covariance }
    }

    /// From row-major nested vectors, shape-checked.
    pub fn from_raw(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<GaussianParams> {
        let n = mean.len();
        if covariance.len() != n || covariance.iter().any(|row| row.len() != n) {
            return Err(Error::ShapeMismatch(format!(
                "mean has length {n} but covariance is {}x{}",
                covariance.len(),
                covariance.first().map_or(0, |r| r.len())
            )));
        }
        let flat: Vec<f64> = covariance.iter().flatten().copied().collect();
        Ok(GaussianParams {
            mean: DVector::from_vec(mean),
            covariance: DMatrix::from_row_slice(n, n, &flat),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn exactly_equals(&self, other: &GaussianParams) -> bool {
        self.mean == other.mean && self.covariance == other.covariance
    }
}

/// Outcome of [`validate`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub dimension: usize,
    /// Largest `|S_ij - S_ji|`.
    pub symmetry_defect: f64,
    pub smallest_eigenvalue: f64,
    pub largest_eigenvalue: f64,
    pub accepted: bool,
}

/// Checks symmetry (within [`SYMMETRY_TOL`] per entry) and positive
/// semi-definiteness (within [`PSD_TOL`] relative to `max(1, lambda_max)`).
/// Non-finite entries and shape mismatches are hard errors; symmetry or PSD
/// violations come back as a rejected report.
pub fn validate(params: &GaussianParams) -> Result<ValidationReport> {
    let n = params.mean.len();
    let cov = &params.covariance;
    if params.mean.iter().any(|v| !v.is_finite()) || cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("mean or covariance entries"));
    }
    if cov.nrows() != cov.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "covariance is {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if cov.nrows() != n {
        return Err(Error::ShapeMismatch(format!(
            "mean has length {n} but covariance is {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            defect = defect.max((cov[(i, j)] - cov[(j, i)]).abs());
        }
    }
    let sym = symmetrize(cov);
    let eigvals = sym.symmetric_eigenvalues();
    let smallest = eigvals.min();
    let largest = eigvals.max();
    let accepted = defect <= SYMMETRY_TOL && smallest >= -PSD_TOL * largest.max(1.0);
    Ok(ValidationReport {
        dimension: n,
        symmetry_defect: defect,
        smallest_eigenvalue: smallest,
        largest_eigenvalue: largest,
        accepted,
    })
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Resolution of degenerate covariances before whitening.
#[derive(Debug, Clone)]
pub enum RankCase {
    /// Exactly equal inputs: distance 0.
    Identical,
    /// Supports differ (rank mismatch or shifted range): distance 1.
    DisjointSupport,
    /// A common full-rank reduction `(N(0, S1'), N(shift', S2'))` in `rank`
    /// dimensions with strictly positive definite covariances.
    FullRank {
        first: GaussianParams,
        second: GaussianParams,
        rank: usize,
    },
}

impl RankCase {
    pub fn tag(&self) -> &'static str {
        match self {
            RankCase::Identical => "identical",
            RankCase::DisjointSupport => "disjoint_support",
            RankCase::FullRank { .. } => "full_rank",
        }
    }
}

/// Splits a validated pair by rank structure.
///
/// Identical inputs (exact entry-wise equality) give distance 0 outright.
/// If the covariance ranks differ, or the shifted second support
/// `Range(S2) + (mu2 - mu1)` is not `Range(S1)`, the distributions are
/// mutually singular and the distance is 1. Otherwise both are projected
/// onto an orthogonal basis of `Range(S1)` (unnormalized Gram-Schmidt over
/// the columns of `S1`), a bijection on the common support, yielding a
/// strictly positive definite pair in `rank` dimensions. Rank counts
/// eigenvalues above `RANK_TOL * max(1, lambda_max)`.
pub fn resolve_rank_case(p1: &GaussianParams, p2: &GaussianParams) -> Result<RankCase> {
    if p1.dim() != p2.dim() {
        return Err(Error::ShapeMismatch(format!(
            "dimensions {} and {}",
            p1.dim(),
            p2.dim()
        )));
    }
    if p1.exactly_equals(p2) {
        return Ok(RankCase::Identical);
    }
    let n = p1.dim();
    let s1 = symmetrize(&p1.covariance);
    let s2 = symmetrize(&p2.covariance);
    let r1 = eigen_rank(&s1);
    let r2 = eigen_rank(&s2);
    if r1 != r2 {
        return Ok(RankCase::DisjointSupport);
    }
    let rank = r1;
    let shift = &p2.mean - &p1.mean;
    if rank == n {
        return Ok(RankCase::FullRank {
            first: GaussianParams::new(DVector::zeros(n), s1),
            second: GaussianParams::new(shift, s2),
            rank,
        });
    }

    let basis = gram_schmidt_range(&s1, rank);
    // support equality: columns of S2 and the mean shift must project into
    // Range(S1) with negligible residual
    let mut probes: Vec<DVector<f64>> = (0..n).map(|j| s2.column(j).into_owned()).collect();
    probes.push(shift.clone());
    for w in &probes {
        let scale = w.norm_squared().max(1.0);
        let mut resid = w.clone();
        for v in &basis {
            let coeff = v.dot(&resid) / v.norm_squared();
            resid -= v * coeff;
        }
        if resid.norm_squared() > SUPPORT_TOL * scale {
            return Ok(RankCase::DisjointSupport);
        }
    }

    let mut proj = DMatrix::zeros(rank, n);
    for (i, v) in basis.iter().enumerate() {
        proj.set_row(i, &v.transpose());
    }
    let first = GaussianParams::new(
        DVector::zeros(rank),
        symmetrize(&(&proj * &s1 * proj.transpose())),
    );
    let second = GaussianParams::new(&proj * shift, symmetrize(&(&proj * &s2 * proj.transpose())));
    Ok(RankCase::FullRank {
        first,
        second,
        rank,
    })
}

fn eigen_rank(s: &DMatrix<f64>) -> usize {
    let eigvals = s.symmetric_eigenvalues();
    let cutoff = RANK_TOL * eigvals.max().max(1.0);
    eigvals.iter().filter(|&&l| l > cutoff).count()
}

/// Unnormalized Gram-Schmidt over the columns of `s`, keeping `rank`
/// orthogonal vectors.
fn gram_schmidt_range(s: &DMatrix<f64>, rank: usize) -> Vec<DVector<f64>> {
    let n = s.ncols();
    let scale = s.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(rank);
    for j in 0..n {
        if basis.len() == rank {
            break;
        }
        let mut v = s.column(j).into_owned();
        for u in &basis {
            let coeff = u.dot(&v) / u.norm_squared();
            v -= u * coeff;
        }
        if v.norm_squared() > RANK_TOL * scale {
            basis.push(v);
        }
    }
    debug_assert_eq!(basis.len(), rank);
    basis
}

/// Pinsker upper bound on the TV distance between two non-degenerate
/// Gaussians:
/// `min(1, 1/2 sqrt(tr(S1 S2^-1) - n + (mu1-mu2)^T S2^-1 (mu1-mu2) + ln(det S2 / det S1)))`.
///
/// The radicand is twice the KL divergence of the first Gaussian from the
/// second; it is nonnegative analytically and clamped at 0 against rounding.
pub fn tv_upper_bound_pinsker(p1: &GaussianParams, p2: &GaussianParams) -> Result<f64> {
    if p1.dim() != p2.dim() {
        return Err(Error::ShapeMismatch(format!(
            "dimensions {} and {}",
            p1.dim(),
            p2.dim()
        )));
    }
    let n = p1.dim();
    let s1 = symmetrize(&p1.covariance);
    let s2 = symmetrize(&p2.covariance);
    let chol2 = s2.cholesky().ok_or(Error::SingularCovariance(f64::NAN))?;
    let chol1 = s1
        .clone()
        .cholesky()
        .ok_or(Error::SingularCovariance(f64::NAN))?;
    let logdet2: f64 = (0..n)
        .map(|i| chol2.l_dirty()[(i, i)].abs().ln())
        .sum::<f64>()
        * 2.0;
    let logdet1: f64 = (0..n)
        .map(|i| chol1.l_dirty()[(i, i)].abs().ln())
        .sum::<f64>()
        * 2.0;
    let trace = chol2.solve(&s1).trace();
    let d = &p1.mean - &p2.mean;
    let quad = d.dot(&chol2.solve(&d));
    let radicand = (trace - n as f64 + quad + logdet2 - logdet1).max(0.0);
    Ok((0.5 * radicand.sqrt()).min(1.0))
}

/// A certified positive lower bound on the TV distance of two differing
/// non-degenerate Gaussians.
///
/// If some coordinate differs in mean or variance, the one-dimensional bound
/// `(1/200) min(1, max(|s2_ii - s1_ii| / s1_ii, 40 |mu1_i - mu2_i| / sqrt(s1_ii)))`
/// applies (maximized over such coordinates). Otherwise some off-diagonal
/// entry differs; projecting onto `e_i + e_j` yields a one-dimensional pair
/// with equal means and distinct variances, and the same bound applies
/// after standardizing by the first variance.
pub fn tv_lower_bound_general(p1: &GaussianParams, p2: &GaussianParams) -> Result<f64> {
    if p1.dim() != p2.dim() {
        return Err(Error::ShapeMismatch(format!(
            "dimensions {} and {}",
            p1.dim(),
            p2.dim()
        )));
    }
    let n = p1.dim();
    let mut best: Option<f64> = None;
    for i in 0..n {
        let v1 = p1.covariance[(i, i)];
        let v2 = p2.covariance[(i, i)];
        let m1 = p1.mean[i];
        let m2 = p2.mean[i];
        if v1 != v2 || m1 != m2 {
            let b = one_dim_lower(v1, v2, m1, m2);
            best = Some(best.map_or(b, |x: f64| x.max(b)));
        }
    }
    if let Some(b) = best {
        return Ok(b);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if p1.covariance[(i, j)] != p2.covariance[(i, j)] {
                let v1 =
                    p1.covariance[(i, i)] + 2.0 * p1.covariance[(i, j)] + p1.covariance[(j, j)];
                let v2 =
                    p2.covariance[(i, i)] + 2.0 * p2.covariance[(i, j)] + p2.covariance[(j, j)];
                return Ok(one_dim_lower(v1, v2, 0.0, 0.0));
            }
        }
    }
    Err(Error::IdenticalInputs)
}

fn one_dim_lower(v1: f64, v2: f64, m1: f64, m2: f64) -> f64 {
    let var_gap = (v2 - v1).abs() / v1;
    let mean_gap = 40.0 * (m1 - m2).abs() / v1.sqrt();
    (1.0 / 200.0) * var_gap.max(mean_gap).min(1.0)
}

/// The affine image `N(A mu + b, A S A^T)`, with symmetry re-enforced by
/// averaging with the transpose.
pub fn affine_transform(
    params: &GaussianParams,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<GaussianParams> {
    if a.ncols() != params.dim() || b.len() != a.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "transform is {}x{} with offset {} on dimension {}",
            a.nrows(),
            a.ncols(),
            b.len(),
            params.dim()
        )));
    }
    let mean = a * &params.mean + b;
    let covariance = symmetrize(&(a * &params.covariance * a.transpose()));
    Ok(GaussianParams { mean, covariance })
}
