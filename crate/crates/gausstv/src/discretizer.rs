//! Per-coordinate reduction of a one-dimensional Gaussian likelihood ratio
//! to a pair of finite distributions over the partition alphabet.
//!
//! For a coordinate `N(mu, sigma2)` against the standard Gaussian, the log
//! likelihood ratio is the quadratic
//! `q(z) = a z^2 + b z + c - ln(sigma)` with `a = (1 - 1/sigma2)/2`,
//! `b = mu/sigma2`, `c = -mu^2/(2 sigma2)`; the preimage of any ratio
//! interval is a union of at most two z-intervals. Walking the partition
//! cells in value order makes consecutive preimages share endpoints, so
//! each new cell costs two fresh CDF evaluations per distribution; interval
//! masses are differences of cached signed-erf values, each evaluated at a
//! quarter of the per-cell budget so a difference stays within half of it.

use crate::disprod::DiscretePair;
use crate::erf::erf_approx;
use crate::ratio::{build_partition, kahan_sum, IntervalId, PartitionSpec};
use crate::whiten::ProductGaussianPair;
use crate::{Error, Result};
use rayon::prelude::*;

/// One whitened coordinate: `N(mu, sigma2)` against `N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateParams {
    pub mu: f64,
    pub sigma2: f64,
}

impl CoordinateParams {
    pub fn new(mu: f64, sigma2: f64) -> Result<CoordinateParams> {
        if !mu.is_finite() || !sigma2.is_finite() {
            return Err(Error::NonFiniteInput("coordinate parameters"));
        }
        if sigma2 <= 0.0 {
            return Err(Error::NonpositiveVariance(sigma2));
        }
        Ok(CoordinateParams { mu, sigma2 })
    }

    fn quadratic(&self) -> (f64, f64, f64) {
        let a = 0.5 * (1.0 - 1.0 / self.sigma2);
        let b = self.mu / self.sigma2;
        let c = -self.mu * self.mu / (2.0 * self.sigma2);
        (a, b, c)
    }
}

/// `(1/200) max_i min(1, max(|sigma2_i - 1|, 40 |mu_i|))`: a closed-form
/// lower bound on the TV distance of the whitened pair, within a factor
/// `10^4 n` of it from above.
pub fn delta_bound(coords: &[CoordinateParams]) -> f64 {
    coords
        .iter()
        .map(|c| (c.sigma2 - 1.0).abs().max(40.0 * c.mu.abs()).min(1.0) / 200.0)
        .fold(0.0, f64::max)
}

/// Preimage `{z : lo < f(z)/g(z) <= hi}` of a ratio interval: at most two
/// disjoint z-intervals with extended-real endpoints, in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    pub intervals: Vec<(f64, f64)>,
}

/// Solves the ratio inequality for one coordinate. Endpoint strictness is
/// immaterial to the masses integrated over the result.
pub fn solve_level_set(coord: &CoordinateParams, lo: f64, hi: f64) -> Result<LevelSet> {
    if lo.is_nan() || hi.is_nan() || lo < 0.0 || hi < lo {
        return Err(Error::InvalidInterval);
    }
    let ln_sigma = 0.5 * coord.sigma2.ln();
    let llo = if lo == 0.0 {
        f64::NEG_INFINITY
    } else {
        lo.ln() + ln_sigma
    };
    let lhi = if hi == f64::INFINITY {
        f64::INFINITY
    } else {
        hi.ln() + ln_sigma
    };
    let (a, b, c) = coord.quadratic();
    Ok(LevelSet {
        intervals: quadratic_band(a, b, c, llo, lhi),
    })
}

/// `{z : llo < a z^2 + b z + c <= lhi}` as at most two intervals.
fn quadratic_band(a: f64, b: f64, c: f64, llo: f64, lhi: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(2);
    if a == 0.0 {
        if b == 0.0 {
            if llo < c && c <= lhi {
                out.push((f64::NEG_INFINITY, f64::INFINITY));
            }
            return out;
        }
        let z1 = (llo - c) / b;
        let z2 = (lhi - c) / b;
        let (lo, hi) = if b > 0.0 { (z1, z2) } else { (z2, z1) };
        if lo < hi {
            out.push((lo, hi));
        }
        return out;
    }
    let vertex = -b / (2.0 * a);
    let extremum = c - b * b / (4.0 * a); // min for a > 0, max for a < 0
    if a > 0.0 {
        if lhi < extremum {
            return out;
        }
        let w_hi = half_width(lhi - extremum, a);
        let w_lo = if llo <= extremum {
            0.0
        } else {
            half_width(llo - extremum, a)
        };
        if w_lo == 0.0 {
            out.push((vertex - w_hi, vertex + w_hi));
        } else {
            if vertex - w_hi < vertex - w_lo {
                out.push((vertex - w_hi, vertex - w_lo));
            }
            if vertex + w_lo < vertex + w_hi {
                out.push((vertex + w_lo, vertex + w_hi));
            }
        }
    } else {
        if llo >= extremum {
            return out;
        }
        let v_lo = half_width(extremum - llo, -a);
        let v_hi = if lhi >= extremum {
            0.0
        } else {
            half_width(extremum - lhi, -a)
        };
        if v_hi == 0.0 {
            out.push((vertex - v_lo, vertex + v_lo));
        } else {
            if vertex - v_lo < vertex - v_hi {
                out.push((vertex - v_lo, vertex - v_hi));
            }
            if vertex + v_hi < vertex + v_lo {
                out.push((vertex + v_hi, vertex + v_lo));
            }
        }
    }
    out
}

fn half_width(excess: f64, lead: f64) -> f64 {
    if excess == f64::INFINITY {
        f64::INFINITY
    } else {
        (excess / lead).max(0.0).sqrt()
    }
}

/// Discretizes one coordinate against the partition: entry `J` of the
/// output approximates the mass of the preimage of cell `J` under the
/// coordinate density (`p`) and the standard density (`q`), each within
/// `zeta`. After integration the vectors renormalize exactly: a deficit is
/// added to the `I(0)` entry, a surplus removed proportionally.
pub fn discretize_coordinate(
    coord: &CoordinateParams,
    spec: &PartitionSpec,
    zeta: f64,
) -> Result<DiscretePair> {
    Ok(discretize_coordinate_impl(coord, spec, zeta)?.0)
}

/// As [`discretize_coordinate`], also reporting the raw probability defects
/// `|sum - 1|` of both vectors before renormalization.
pub(crate) fn discretize_coordinate_impl(
    coord: &CoordinateParams,
    spec: &PartitionSpec,
    zeta: f64,
) -> Result<(DiscretePair, (f64, f64))> {
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::OutOfRange {
            name: "zeta",
            value: zeta,
            expected: "(0, 1]",
        });
    }
    let m = spec.m();
    let cells = spec.alphabet_size();
    let mut p = vec![0.0f64; cells];
    let mut q = vec![0.0f64; cells];
    let i0 = IntervalId::I(0).canonical(m);

    if coord.mu == 0.0 && coord.sigma2 == 1.0 {
        // the ratio is identically 1: everything in I(0), no integration
        p[i0] = 1.0;
        q[i0] = 1.0;
        return Ok((DiscretePair::new(p, q)?, (0.0, 0.0)));
    }

    let budget = zeta / 4.0;
    let (a, b, c) = coord.quadratic();
    let ln_sigma = 0.5 * coord.sigma2.ln();
    let inv_sf = 1.0 / (2.0 * coord.sigma2).sqrt();
    let inv_sg = 1.0 / std::f64::consts::SQRT_2;

    // signed erf values of a point under both standardizations
    let cdfs = |z: f64| -> Result<(f64, f64)> {
        let sf = (z - coord.mu) * inv_sf;
        let sg = z * inv_sg;
        Ok((signed_erf(sf, budget)?, signed_erf(sg, budget)?))
    };

    // ascending ladder of cell boundaries in log-ratio space; boundary j
    // separates cell position j-1 from j (I(0) sits degenerately at j = m)
    let boundary_threshold = |j: usize| -> f64 {
        if j == 0 {
            f64::NEG_INFINITY
        } else if j < m {
            (-spec.complement(m - j)).ln_1p() + ln_sigma
        } else if j == m {
            ln_sigma
        } else if j < 2 * m {
            -(-spec.complement(j - m)).ln_1p() + ln_sigma
        } else {
            f64::INFINITY
        }
    };
    // canonical index of the cell between boundaries j-1 and j
    let cell_index = |j: usize| -> usize {
        if j <= m {
            m - j + 1 // I(m), ..., I(1)
        } else {
            j // J(1) = m+1, ..., J(m) = 2m
        }
    };

    if a == 0.0 {
        // sigma2 = 1, mu != 0: boundaries are single points, monotone in j
        let asc = b > 0.0;
        let z_at = |t: f64| (t - c) / b;
        let mut prev = cdfs(z_at(if asc {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }))?;
        for j in 1..=(2 * m) {
            let cur = cdfs(z_at(boundary_threshold(j)))?;
            let idx = cell_index(j);
            let (mf, mg) = if asc {
                (0.5 * (cur.0 - prev.0), 0.5 * (cur.1 - prev.1))
            } else {
                (0.5 * (prev.0 - cur.0), 0.5 * (prev.1 - cur.1))
            };
            p[idx] += mf.max(0.0);
            q[idx] += mg.max(0.0);
            prev = cur;
        }
    } else {
        let vertex = -b / (2.0 * a);
        let extremum = c - b * b / (4.0 * a);
        // half-width of the boundary region at threshold t
        let width_at = |t: f64| -> f64 {
            if a > 0.0 {
                if t <= extremum {
                    0.0
                } else {
                    half_width(t - extremum, a)
                }
            } else if t >= extremum {
                0.0
            } else {
                half_width(extremum - t, -a)
            }
        };
        // for a > 0 the region {q <= t} = [vertex-w, vertex+w] grows with t;
        // for a < 0 the region {q > t} = (vertex-w, vertex+w) shrinks with t.
        // Either way each cell is the symmetric difference of two such
        // regions and its mass is four cached-CDF differences.
        let mut w_prev = width_at(boundary_threshold(0));
        let mut lo_prev;
        let mut hi_prev;
        if w_prev == 0.0 {
            let at_vertex = cdfs(vertex)?;
            lo_prev = at_vertex;
            hi_prev = at_vertex;
        } else {
            lo_prev = cdfs(vertex - w_prev)?;
            hi_prev = cdfs(vertex + w_prev)?;
        }
        for j in 1..=(2 * m) {
            let w = width_at(boundary_threshold(j));
            let (lo_cur, hi_cur);
            if w == 0.0 && w_prev == 0.0 {
                (lo_cur, hi_cur) = (lo_prev, hi_prev);
            } else if w == f64::INFINITY {
                lo_cur = (-1.0, -1.0);
                hi_cur = (1.0, 1.0);
            } else {
                lo_cur = cdfs(vertex - w)?;
                hi_cur = cdfs(vertex + w)?;
            }
            let idx = cell_index(j);
            let (mf, mg) = if a > 0.0 {
                (
                    0.5 * ((hi_cur.0 - hi_prev.0) + (lo_prev.0 - lo_cur.0)),
                    0.5 * ((hi_cur.1 - hi_prev.1) + (lo_prev.1 - lo_cur.1)),
                )
            } else {
                (
                    0.5 * ((hi_prev.0 - hi_cur.0) + (lo_cur.0 - lo_prev.0)),
                    0.5 * ((hi_prev.1 - hi_cur.1) + (lo_cur.1 - lo_prev.1)),
                )
            };
            p[idx] += mf.max(0.0);
            q[idx] += mg.max(0.0);
            w_prev = w;
            lo_prev = lo_cur;
            hi_prev = hi_cur;
        }
    }

    let p_defect = (kahan_sum(p.iter().copied()) - 1.0).abs();
    let q_defect = (kahan_sum(q.iter().copied()) - 1.0).abs();
    renormalize(&mut p, i0);
    renormalize(&mut q, i0);
    Ok((DiscretePair::new(p, q)?, (p_defect, q_defect)))
}

fn signed_erf(s: f64, budget: f64) -> Result<f64> {
    if s == f64::INFINITY {
        return Ok(1.0);
    }
    if s == f64::NEG_INFINITY {
        return Ok(-1.0);
    }
    erf_approx(s, budget)
}

/// Deficit goes to the `I(0)` entry, surplus is removed proportionally; a
/// final fixup round makes the compensated total exactly 1.
fn renormalize(v: &mut [f64], i0: usize) {
    let total = kahan_sum(v.iter().copied());
    if total < 1.0 {
        v[i0] += 1.0 - total;
    } else if total > 1.0 {
        for x in v.iter_mut() {
            *x /= total;
        }
    }
    for _ in 0..3 {
        let s = kahan_sum(v.iter().copied());
        if s == 1.0 {
            break;
        }
        let imax = v
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .map(|(i, _)| i)
            .unwrap_or(i0);
        v[imax] += 1.0 - s;
    }
}

/// Parameters chosen for a whole-pair discretization.
#[derive(Debug, Clone, Copy)]
pub struct BuildReport {
    /// Closed-form TV lower bound of the whitened pair.
    pub delta: f64,
    /// Partition parameter near 1.
    pub gamma: f64,
    /// Geometric partition parameter.
    pub small_delta: f64,
    /// Cells per side.
    pub m: usize,
    /// Alphabet size `2m + 1`.
    pub alphabet_size: usize,
    /// Per-interval integration budget.
    pub zeta: f64,
}

/// Discretizes every coordinate of a whitened pair at accuracy `eps`,
/// choosing `gamma = eps*delta/(50n)`, `delta = eps/(50n)` and the
/// per-interval budget `zeta = eps*delta/(500 M n)`. The resulting product
/// pair's TV distance is within a `eps/3` relative error of the input
/// pair's. Coordinates are processed in parallel.
pub fn build_discrete_products(
    pair: &ProductGaussianPair,
    eps: f64,
) -> Result<(Vec<DiscretePair>, BuildReport)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::OutOfRange {
            name: "eps",
            value: eps,
            expected: "(0, 1)",
        });
    }
    let n = pair.dim();
    if n == 0 {
        return Err(Error::ShapeMismatch("empty coordinate list".into()));
    }
    let coords: Vec<CoordinateParams> = pair
        .mu
        .iter()
        .zip(&pair.sigma2)
        .map(|(&mu, &s2)| CoordinateParams::new(mu, s2))
        .collect::<Result<_>>()?;
    let delta = delta_bound(&coords);
    if delta == 0.0 {
        return Err(Error::ZeroDelta);
    }
    let gamma = eps * delta / (50.0 * n as f64);
    let small_delta = eps / (50.0 * n as f64);
    let spec = build_partition(gamma, small_delta)?;
    let alphabet_size = spec.alphabet_size();
    let zeta = eps * delta / (500.0 * alphabet_size as f64 * n as f64);

    let pairs: Vec<DiscretePair> = coords
        .par_iter()
        .map(|c| discretize_coordinate(c, &spec, zeta))
        .collect::<Result<_>>()?;
    Ok((
        pairs,
        BuildReport {
            delta,
            gamma,
            small_delta,
            m: spec.m(),
            alphabet_size,
            zeta,
        },
    ))
}
