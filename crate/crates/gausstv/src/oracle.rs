//! Independent brute-force references for the test suite and the `oracle`
//! CLI subcommand: high-precision erf, adaptive quadrature TV in one
//! dimension, dense-grid TV up to three dimensions, and a seeded Monte
//! Carlo baseline.
//!
//! None of these share numeric kernels with the pipeline: the erf here is a
//! separate fixed-point series with its own pi (a Machin arctangent series),
//! the quadrature evaluates densities directly, and the crossing solver is
//! its own quadratic. Their value as evidence depends on that independence.

use crate::gaussian::GaussianParams;
use crate::{Error, Result};
use nalgebra::DVector;
use num_bigint::BigInt;

// ---------------------------------------------------------------------------
// high-precision erf

/// `erf(x)` for `|x| <= 30`, evaluated by the alternating Maclaurin series
/// in scaled-integer arithmetic at a precision adapted to the peak term
/// `e^{x^2}`, then rounded to `f64`. Internally accurate to better than 30
/// significant digits; `2/sqrt(pi)` comes from a Machin-series pi and an
/// integer square root rather than a stored constant.
pub fn erf_reference(x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > 30.0 {
        return Err(Error::OutOfRange {
            name: "x",
            value: x,
            expected: "[-30, 30]",
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < 0.0 {
        return Ok(-erf_reference(-x)?);
    }
    if x < 2f64.powi(-40) {
        // one series term; the scale constant is exact to 40+ digits
        return Ok(std::f64::consts::FRAC_2_SQRT_PI * x);
    }
    let peak_bits = (x * x * std::f64::consts::LOG2_E).ceil() as u32;
    let prec = 256 + peak_bits;

    let xv = scaled_from_f64(x, prec);
    let x2v: BigInt = (&xv * &xv) >> prec;
    // absolute stopping target ~ 1e-36 relative to erf(x) >= erf(2^-40)
    let target: BigInt = BigInt::from(1) << (prec.saturating_sub(160));
    let mut term = xv.clone();
    let mut sum = xv;
    let k_min = (x * x).ceil() as u64;
    let k_max = 10 * 72 * 72; // series length for 31-digit accuracy
    let mut k: u64 = 0;
    loop {
        term = (&term * &x2v) >> prec;
        term = term * (2 * k + 1) / ((k + 1) * (2 * k + 3));
        k += 1;
        if k.is_multiple_of(2) {
            sum += &term;
        } else {
            sum -= &term;
        }
        if (k >= k_min && term < target) || k >= k_max {
            break;
        }
    }
    let c = two_over_sqrt_pi_scaled(prec);
    let res = (&sum * &c) >> prec;
    Ok(scaled_to_f64(&res, prec).clamp(0.0, 1.0))
}

/// `round(v * 2^prec)` for finite positive `v`.
fn scaled_from_f64(v: f64, prec: u32) -> BigInt {
    let bits = v.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = if raw_exp == 0 {
        bits & 0xf_ffff_ffff_ffff
    } else {
        (bits & 0xf_ffff_ffff_ffff) | 0x10_0000_0000_0000
    };
    let exp = if raw_exp == 0 { 1 } else { raw_exp } - 1075 + prec as i64;
    let m = BigInt::from(mant);
    if exp >= 0 {
        m << exp
    } else {
        m >> (-exp)
    }
}

/// Nearest `f64` to `v / 2^prec` without overflowing the conversion.
fn scaled_to_f64(v: &BigInt, prec: u32) -> f64 {
    let bits = v.bits();
    if bits <= 512 {
        let (_, digits) = v.to_u64_digits();
        let acc: f64 = digits
            .iter()
            .enumerate()
            .map(|(i, d)| (*d as f64) * 2f64.powi((64 * i) as i32))
            .sum();
        let acc = if v.sign() == num_bigint::Sign::Minus {
            -acc
        } else {
            acc
        };
        acc * 2f64.powi(-(prec as i32))
    } else {
        let drop = bits - 64;
        let top = v >> drop;
        let (_, digits) = top.to_u64_digits();
        let lead = *digits.first().unwrap_or(&0) as f64;
        let lead = if v.sign() == num_bigint::Sign::Minus {
            -lead
        } else {
            lead
        };
        lead * 2f64.powi(drop as i32 - prec as i32)
    }
}

/// `pi * 2^prec` by Machin's formula `pi = 16 atan(1/5) - 4 atan(1/239)`.
fn machin_pi_scaled(prec: u32) -> BigInt {
    let atan_inv = |q: u64| -> BigInt {
        let q2 = BigInt::from(q * q);
        let mut power = (BigInt::from(1) << prec) / q;
        let mut acc = BigInt::from(0);
        let mut j: u64 = 0;
        while power != BigInt::from(0) {
            let term = &power / (2 * j + 1);
            if j.is_multiple_of(2) {
                acc += &term;
            } else {
                acc -= &term;
            }
            power = &power / &q2;
            j += 1;
        }
        acc
    };
    atan_inv(5) * 16 - atan_inv(239) * 4
}

/// `(2 / sqrt(pi)) * 2^prec` from the Machin pi.
fn two_over_sqrt_pi_scaled(prec: u32) -> BigInt {
    let pi = machin_pi_scaled(prec);
    let sqrt_pi = (pi << prec).sqrt(); // sqrt(pi) * 2^prec
    (BigInt::from(2) << (2 * prec)) / sqrt_pi
}

// ---------------------------------------------------------------------------
// one-dimensional adaptive quadrature

/// TV distance of `N(mu, sigma2)` from the standard Gaussian by adaptive
/// quadrature of `|f - g| / 2`.
pub fn quadrature_tv_1d(mu: f64, sigma2: f64, tol: f64) -> Result<f64> {
    quadrature_tv_1d_pair(mu, sigma2, 0.0, 1.0, tol)
}

/// TV distance of two one-dimensional Gaussians by adaptive Simpson
/// quadrature over `means +- 12 sigma`, split at the density crossings so
/// each piece is smooth.
pub fn quadrature_tv_1d_pair(mu1: f64, s1: f64, mu2: f64, s2: f64, tol: f64) -> Result<f64> {
    if s1 <= 0.0 || s2 <= 0.0 {
        return Err(Error::NonpositiveVariance(s1.min(s2)));
    }
    if tol.is_nan() || tol < 1e-12 {
        return Err(Error::OutOfRange {
            name: "tol",
            value: tol,
            expected: "at least 1e-12",
        });
    }
    let (sd1, sd2) = (s1.sqrt(), s2.sqrt());
    let lo = (mu1 - 12.0 * sd1).min(mu2 - 12.0 * sd2);
    let hi = (mu1 + 12.0 * sd1).max(mu2 + 12.0 * sd2);

    // density crossings: solve ln f1 - ln f2 = 0, a quadratic in z
    let a = 0.5 * (1.0 / s2 - 1.0 / s1);
    let b = mu1 / s1 - mu2 / s2;
    let c = mu2 * mu2 / (2.0 * s2) - mu1 * mu1 / (2.0 * s1) + 0.5 * (s2 / s1).ln();
    let mut cuts: Vec<f64> = vec![lo];
    for r in solve_quadratic(a, b, c) {
        if r > lo && r < hi {
            cuts.push(r);
        }
    }
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);

    let f = |z: f64| 0.5 * (gauss_pdf(z, mu1, s1) - gauss_pdf(z, mu2, s2)).abs();
    // pre-split every smooth piece into uniform base cells so the adaptive
    // recursion cannot falsely converge across a narrow bump in a long tail
    const BASE_CELLS: usize = 64;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let cell_tol = tol * 0.4 * (w[1] - w[0]).max(1e-12) / (hi - lo) / BASE_CELLS as f64;
        let step = (w[1] - w[0]) / BASE_CELLS as f64;
        for i in 0..BASE_CELLS {
            let a = w[0] + i as f64 * step;
            total += adaptive_simpson(&f, a, a + step, cell_tol);
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

fn gauss_pdf(z: f64, mu: f64, s2: f64) -> f64 {
    let d = z - mu;
    (-d * d / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt()
}

/// Real roots of `a z^2 + b z + c`, in the numerically stable form.
fn solve_quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        if b == 0.0 {
            return vec![];
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        return vec![0.0];
    }
    let mut roots = vec![q / a, c / q];
    roots.sort_by(f64::total_cmp);
    roots.dedup();
    roots
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1)
    }
}

// ---------------------------------------------------------------------------
// dense-grid TV in up to three dimensions

/// Midpoint-rule estimate with a Richardson error gauge from comparing two
/// grid resolutions.
#[derive(Debug, Clone, Copy)]
pub struct GridEstimate {
    pub estimate: f64,
    pub error_estimate: f64,
}

/// TV distance by the midpoint rule over a box extending `extent_sigmas`
/// marginal standard deviations beyond both means, at `cells_per_axis` and
/// half that resolution. Dimension at most 3.
pub fn grid_tv_nd(
    p1: &GaussianParams,
    p2: &GaussianParams,
    cells_per_axis: usize,
    extent_sigmas: f64,
) -> Result<GridEstimate> {
    let n = p1.dim();
    if n != p2.dim() {
        return Err(Error::ShapeMismatch(format!(
            "dimensions {} and {}",
            p1.dim(),
            p2.dim()
        )));
    }
    if n == 0 || n > 3 {
        return Err(Error::DimensionTooLarge(n));
    }
    if cells_per_axis < 4 {
        return Err(Error::OutOfRange {
            name: "cells_per_axis",
            value: cells_per_axis as f64,
            expected: "at least 4",
        });
    }
    let d1 = DensityEval::new(p1)?;
    let d2 = DensityEval::new(p2)?;
    let mut lo = [0.0f64; 3];
    let mut hi = [0.0f64; 3];
    for i in 0..n {
        let sd = p1.covariance[(i, i)].max(p2.covariance[(i, i)]).sqrt();
        lo[i] = (p1.mean[i].min(p2.mean[i])) - extent_sigmas * sd;
        hi[i] = (p1.mean[i].max(p2.mean[i])) + extent_sigmas * sd;
    }
    let coarse = grid_pass(&d1, &d2, n, &lo, &hi, cells_per_axis / 2);
    let fine = grid_pass(&d1, &d2, n, &lo, &hi, cells_per_axis);
    Ok(GridEstimate {
        estimate: fine,
        error_estimate: (fine - coarse).abs() / 3.0,
    })
}

fn grid_pass(d1: &DensityEval, d2: &DensityEval, n: usize, lo: &[f64; 3], hi: &[f64; 3], c: usize) -> f64 {
    use rayon::prelude::*;
    let step: Vec<f64> = (0..n).map(|i| (hi[i] - lo[i]) / c as f64).collect();
    let cellvol: f64 = step.iter().product();
    let inner = if n >= 2 { c } else { 1 };
    let innermost = if n == 3 { c } else { 1 };
    let sums: Vec<f64> = (0..c)
        .into_par_iter()
        .map(|i0| {
            let mut acc = 0.0;
            let mut x = [0.0f64; 3];
            x[0] = lo[0] + (i0 as f64 + 0.5) * step[0];
            for i1 in 0..inner {
                if n >= 2 {
                    x[1] = lo[1] + (i1 as f64 + 0.5) * step[1];
                }
                for i2 in 0..innermost {
                    if n == 3 {
                        x[2] = lo[2] + (i2 as f64 + 0.5) * step[2];
                    }
                    acc += (d1.pdf(&x[..n]) - d2.pdf(&x[..n])).abs();
                }
            }
            acc
        })
        .collect();
    0.5 * cellvol * sums.iter().sum::<f64>()
}

/// Direct density evaluation from a hand-rolled inverse (dimension <= 3).
struct DensityEval {
    mean: Vec<f64>,
    inv: [[f64; 3]; 3],
    norm: f64,
    n: usize,
}

impl DensityEval {
    fn new(p: &GaussianParams) -> Result<DensityEval> {
        let n = p.dim();
        let s = &p.covariance;
        let get = |i: usize, j: usize| 0.5 * (s[(i, j)] + s[(j, i)]);
        let (det, inv) = match n {
            1 => {
                let d = get(0, 0);
                (d, [[1.0 / d, 0.0, 0.0], [0.0; 3], [0.0; 3]])
            }
            2 => {
                let (a, b, d) = (get(0, 0), get(0, 1), get(1, 1));
                let det = a * d - b * b;
                (
                    det,
                    [
                        [d / det, -b / det, 0.0],
                        [-b / det, a / det, 0.0],
                        [0.0; 3],
                    ],
                )
            }
            3 => {
                let m = [
                    [get(0, 0), get(0, 1), get(0, 2)],
                    [get(1, 0), get(1, 1), get(1, 2)],
                    [get(2, 0), get(2, 1), get(2, 2)],
                ];
                let cof = |r1: usize, c1: usize, r2: usize, c2: usize| {
                    m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]
                };
                let det = m[0][0] * cof(1, 1, 2, 2) - m[0][1] * cof(1, 0, 2, 2)
                    + m[0][2] * cof(1, 0, 2, 1);
                let mut inv = [[0.0f64; 3]; 3];
                inv[0][0] = cof(1, 1, 2, 2) / det;
                inv[0][1] = -cof(0, 1, 2, 2) / det;
                inv[0][2] = cof(0, 1, 1, 2) / det;
                inv[1][0] = inv[0][1];
                inv[1][1] = cof(0, 0, 2, 2) / det;
                inv[1][2] = -cof(0, 0, 2, 1) / det;
                inv[2][0] = inv[0][2];
                inv[2][1] = inv[1][2];
                inv[2][2] = cof(0, 0, 1, 1) / det;
                (det, inv)
            }
            _ => return Err(Error::DimensionTooLarge(n)),
        };
        if det <= 0.0 || det.is_nan() {
            return Err(Error::SingularCovariance(det));
        }
        let norm = 1.0 / ((2.0 * std::f64::consts::PI).powi(n as i32) * det).sqrt();
        Ok(DensityEval {
            mean: p.mean.iter().copied().collect(),
            inv,
            norm,
            n,
        })
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        let mut quad = 0.0;
        for i in 0..self.n {
            let di = x[i] - self.mean[i];
            for (j, xj) in x.iter().enumerate().take(self.n) {
                quad += di * self.inv[i][j] * (xj - self.mean[j]);
            }
        }
        self.norm * (-0.5 * quad).exp()
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo baseline

/// A seeded Monte Carlo estimate with its standard error. Additive accuracy
/// only: the error floor is `~sqrt(Var)/sqrt(samples)` regardless of how
/// small the distance is.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// Estimates `E[(1 - f1/f2)_+]` under samples from the second Gaussian,
/// which equals the TV distance. Deterministic for a fixed seed.
pub fn mc_tv_baseline(
    p1: &GaussianParams,
    p2: &GaussianParams,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    if p1.dim() != p2.dim() {
        return Err(Error::ShapeMismatch(format!(
            "dimensions {} and {}",
            p1.dim(),
            p2.dim()
        )));
    }
    if samples == 0 {
        return Err(Error::OutOfRange {
            name: "samples",
            value: 0.0,
            expected: "positive",
        });
    }
    let n = p1.dim();
    let log1 = LogDensity::new(p1)?;
    let log2 = LogDensity::new(p2)?;
    let chol2 = crate::gaussian::symmetrize(&p2.covariance)
        .cholesky()
        .ok_or(Error::SingularCovariance(f64::NAN))?;
    let l = chol2.l();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    let mut z = DVector::zeros(n);
    for count in 1..=samples {
        for i in 0..n {
            z[i] = StandardNormal.sample(&mut rng);
        }
        let x = &l * &z + &p2.mean;
        let t = (1.0 - (log1.at(&x) - log2.at(&x)).exp()).max(0.0);
        let delta = t - mean;
        mean += delta / count as f64;
        m2 += delta * (t - mean);
    }
    let stderr = if samples > 1 {
        (m2 / (samples as f64 - 1.0) / samples as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(McEstimate {
        estimate: mean,
        stderr,
    })
}

struct LogDensity {
    mean: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    log_norm: f64,
}

impl LogDensity {
    fn new(p: &GaussianParams) -> Result<LogDensity> {
        let n = p.dim();
        let chol = crate::gaussian::symmetrize(&p.covariance)
            .cholesky()
            .ok_or(Error::SingularCovariance(f64::NAN))?;
        let logdet: f64 = (0..n)
            .map(|i| chol.l_dirty()[(i, i)].abs().ln())
            .sum::<f64>()
            * 2.0;
        let log_norm = -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet);
        Ok(LogDensity {
            mean: p.mean.clone(),
            chol,
            log_norm,
        })
    }

    fn at(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.mean;
        let quad = d.dot(&self.chol.solve(&d));
        self.log_norm - 0.5 * quad
    }
}

// ---------------------------------------------------------------------------
// exact discrete enumeration lives in `disprod`; re-exported here so the
// oracle surface is complete.
pub use crate::disprod::exact_product_tv;
