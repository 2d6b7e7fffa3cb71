//! # gausstv
//!
//! Deterministic relative-error approximation of the total variation (TV)
//! distance between two n-dimensional Gaussians, plus brute-force oracles
//! for verification.
//!
//! Given `N(mu1, sigma1)`, `N(mu2, sigma2)` and a target `eps` in (0,1), the
//! pipeline returns `z` with `(1-eps)*D <= z <= (1+eps)*D` where
//! `D = d_TV(N(mu1,sigma1), N(mu2,sigma2))`. Relative error is the point:
//! `D` can be tiny (e.g. `1e-5`) and the estimate is still accurate to
//! `eps*D`, which additive Monte Carlo estimators cannot deliver.
//!
//! The computation proceeds in stages:
//!
//! 1. **Rank resolution** ([`gaussian`]): degenerate covariances either force
//!    `D = 1` (supports differ) or reduce to a common full-rank subspace.
//! 2. **Whitening** ([`whiten`]): two symmetric eigendecompositions map the
//!    pair to `N(mu, diag(sigma2))` vs `N(0, I)` without changing TV.
//! 3. **Coordinate discretization** ([`discretizer`]): each 1-D likelihood
//!    ratio is bucketed by a geometric partition of `[0, inf)`, producing a
//!    pair of finite distributions per coordinate, with all Gaussian interval
//!    masses evaluated by the certified error-function kernel ([`erf`]).
//! 4. **Discrete product TV** ([`disprod`]): a deterministic
//!    discretize-and-multiply loop over the coordinate ratios ([`ratio`])
//!    yields the final estimate.
//!
//! [`oracle`] holds independent references (adaptive quadrature, dense grids,
//! high-precision erf, seeded Monte Carlo) used by the test suite; they share
//! no numeric kernels with the pipeline.
//!
//! Entry point: [`pipeline::mult_gaussian_tv`]. The `gausstv-cli` crate wraps
//! it in a command-line interface.

pub mod discretizer;
pub mod disprod;
pub mod erf;
pub mod gaussian;
pub mod oracle;
pub mod pipeline;
pub mod ratio;
pub mod whiten;

pub use discretizer::{build_discrete_products, delta_bound, BuildReport, CoordinateParams};
pub use disprod::{coordinate_tv, disprod_tv_det, exact_product_tv, DiscretePair};
pub use gaussian::{GaussianParams, RankCase, ValidationReport};
pub use pipeline::{mult_gaussian_tv, Diagnostics, TvResult};
pub use ratio::{AtomicRatio, IntervalId, PartitionSpec};
pub use whiten::{whiten_pair, ProductGaussianPair, WhitenReport};

use thiserror::Error;

/// Errors shared by all stages of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Input contains NaN or infinite entries.
    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),

    /// Matrix/vector dimensions are incompatible.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A covariance matrix is singular where strict positive definiteness is required.
    #[error("singular covariance: smallest eigenvalue {0:e}")]
    SingularCovariance(f64),

    /// Both inputs are identical where a difference is required.
    #[error("identical inputs: no coordinate or cross term differs")]
    IdenticalInputs,

    /// An eigendecomposition failed its residual validation.
    #[error("eigendecomposition residual {actual:e} exceeds budget {budget:e}")]
    ResidualTooLarge { actual: f64, budget: f64 },

    /// A requested additive error budget is below what the kernel can honor.
    #[error("error budget {requested:e} below floor {floor:e}")]
    BudgetTooTight { requested: f64, floor: f64 },

    /// Interval endpoints are out of order.
    #[error("invalid interval: lower endpoint exceeds upper")]
    InvalidInterval,

    /// A variance parameter is zero or negative.
    #[error("nonpositive variance: {0}")]
    NonpositiveVariance(f64),

    /// A scalar parameter lies outside its admissible range.
    #[error("parameter {name} = {value} outside {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// A value that must be nonnegative is negative.
    #[error("negative value: {0}")]
    NegativeValue(f64),

    /// A vector that must be a probability distribution is not.
    #[error("not a distribution: {0}")]
    NotADistribution(String),

    /// Exact enumeration was requested for an instance beyond the size guard.
    #[error("instance too large for exact enumeration: {0} outcomes")]
    InstanceTooLarge(f64),

    /// Every coordinate is exactly standard, so the discretizer has nothing to do.
    #[error("zero delta: all coordinates are exactly standard")]
    ZeroDelta,

    /// Grid oracles are limited to dimension at most three.
    #[error("dimension {0} too large for the grid oracle")]
    DimensionTooLarge(usize),

    /// Inputs were rejected by validation.
    #[error("validation rejected input: {0}")]
    Rejected(String),

    /// Context wrapper naming the pipeline stage that failed.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
