//! Finite-support likelihood ratios and their discretization machinery:
//! geometric partitions of `[0, inf)`, the TV functional, conditional
//! expectation onto partition cells, and independent products.
//!
//! A ratio is stored as atoms `(value, prob)` with probabilities summing to
//! one and `E[value] <= 1`; the deficit `1 - E[value]` encodes the part of
//! the first measure that the second gives no mass to. Discretization
//! preserves the TV functional identically, which is what makes the product
//! loop in [`crate::disprod`] come out with relative rather than additive
//! error.

use crate::{Error, Result};
use std::sync::atomic::{AtomicU64, Ordering};

/// How many times a product renormalized its probability mass because the
/// compensated total drifted beyond `1e-12`.
static RENORMALIZATIONS: AtomicU64 = AtomicU64::new(0);

/// Diagnostic counter for probability renormalizations in products.
pub fn renormalization_count() -> u64 {
    RENORMALIZATIONS.load(Ordering::Relaxed)
}

const PROB_TOL: f64 = 1e-12;

/// A geometric partition of `[0, inf)` into `2m + 1` intervals:
/// `I_0 = {1}`, `I_k = [a_k, a_{k-1})` for `1 <= k <= m` covering `[0, 1)`,
/// and `J_k = (1/a_{k-1}, 1/a_k]` covering `(1, inf)`, where `a_0 = 1`,
/// `a_k = 1 - (1+delta)^{k-1} gamma` and `a_m = 0`.
///
/// Cell widths grow geometrically away from 1: `I_1` has width `gamma` and
/// `I_k` has width `delta * (1 - a_{k-1})`, so bucketing a ratio by this
/// partition moves it by at most `gamma` near 1 and by a `delta` fraction
/// of its distance from 1 elsewhere.
///
/// Breakpoints are stored as complements `c_k = 1 - a_k`, which stay exact
/// in `f64` even when `gamma` is far below machine epsilon relative to 1.
#[derive(Debug, Clone)]
pub struct PartitionSpec {
    gamma: f64,
    delta: f64,
    m: usize,
    /// `c_k = 1 - a_k`, strictly increasing, `c_0 = 0`, `c_m = 1`.
    complements: Vec<f64>,
}

/// One cell of a [`PartitionSpec`]: `I(k)` on `[0, 1]`, `J(k)` on `(1, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntervalId {
    I(usize),
    J(usize),
}

impl IntervalId {
    /// Canonical index in `[0, 2m]`: `I(0) -> 0`, `I(k) -> k`, `J(k) -> m + k`.
    pub fn canonical(self, m: usize) -> usize {
        match self {
            IntervalId::I(k) => k,
            IntervalId::J(k) => m + k,
        }
    }

    /// Inverse of [`IntervalId::canonical`].
    pub fn from_canonical(idx: usize, m: usize) -> IntervalId {
        if idx <= m {
            IntervalId::I(idx)
        } else {
            IntervalId::J(idx - m)
        }
    }
}

/// Largest partition size the builder will materialize.
const MAX_CELLS: usize = 50_000_000;

/// Builds the partition for the given `gamma` in `(0, 1)` and `delta` in
/// `(0, 1]`, with `m = 1 + ceil(ln(1/gamma) / ln(1+delta))`.
pub fn build_partition(gamma: f64, delta: f64) -> Result<PartitionSpec> {
    if !gamma.is_finite() || !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::OutOfRange {
            name: "gamma",
            value: gamma,
            expected: "(0, 1)",
        });
    }
    if !delta.is_finite() || !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            expected: "(0, 1]",
        });
    }
    let m_real = 1.0 + ((1.0 / gamma).ln() / delta.ln_1p()).ceil();
    if !(m_real >= 2.0 && m_real <= MAX_CELLS as f64) {
        return Err(Error::OutOfRange {
            name: "partition size m",
            value: m_real,
            expected: "at most 5e7 cells",
        });
    }
    let m = m_real as usize;
    let growth = 1.0 + delta;
    let mut complements = Vec::with_capacity(m + 1);
    complements.push(0.0);
    for k in 1..m {
        complements.push(gamma * growth.powi((k - 1) as i32));
    }
    complements.push(1.0);
    debug_assert!(complements.windows(2).all(|w| w[0] < w[1]));
    Ok(PartitionSpec {
        gamma,
        delta,
        m,
        complements,
    })
}

impl PartitionSpec {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of cells on each side of 1.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Total number of cells, `2m + 1`.
    pub fn alphabet_size(&self) -> usize {
        2 * self.m + 1
    }

    /// `c_k = 1 - a_k` for `0 <= k <= m`.
    pub fn complement(&self, k: usize) -> f64 {
        self.complements[k]
    }

    /// Breakpoints `a_0 = 1 > a_1 > ... > a_m = 0`.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.complements.iter().map(|c| 1.0 - c).collect()
    }

    /// The cell containing `x >= 0` (`+inf` maps to `J(m)`).
    ///
    /// Conventions: `x = 1` is `I(0)`; `x` in `[a_k, a_{k-1})` is `I(k)`;
    /// `x` in `(1/a_{k-1}, 1/a_k]` is `J(k)`. Classification runs in
    /// complement space (`1 - x` below 1, `(x-1)/x` above), where the
    /// breakpoints are exact, via binary search.
    pub fn classify(&self, x: f64) -> Result<IntervalId> {
        if x.is_nan() {
            return Err(Error::NonFiniteInput("classify argument is NaN"));
        }
        if x < 0.0 {
            return Err(Error::NegativeValue(x));
        }
        if x == 1.0 {
            return Ok(IntervalId::I(0));
        }
        let (c, below_one) = if x < 1.0 {
            (1.0 - x, true)
        } else if x == f64::INFINITY {
            (1.0, false)
        } else {
            ((x - 1.0) / x, false) // 1 - 1/x, exact near 1
        };
        // first k with c <= c_k; c > 0 = c_0 and c <= 1 = c_m
        let k = self.complements.partition_point(|&ck| ck < c).min(self.m);
        debug_assert!(k >= 1);
        Ok(if below_one {
            IntervalId::I(k)
        } else {
            IntervalId::J(k)
        })
    }

    /// Value-space hull `[lo, hi]` of a cell (closed; used for clamping
    /// conditional means). `J(m)` has `hi = +inf`.
    pub fn cell_hull(&self, id: IntervalId) -> (f64, f64) {
        match id {
            IntervalId::I(0) => (1.0, 1.0),
            IntervalId::I(k) => (1.0 - self.complements[k], 1.0 - self.complements[k - 1]),
            IntervalId::J(k) => (
                1.0 / (1.0 - self.complements[k - 1]),
                1.0 / (1.0 - self.complements[k]),
            ),
        }
    }

    /// Cells in ascending value order: `I(m), ..., I(1), I(0), J(1), ..., J(m)`.
    pub(crate) fn cell_by_position(&self, pos: usize) -> IntervalId {
        debug_assert!(pos < self.alphabet_size());
        if pos < self.m {
            IntervalId::I(self.m - pos)
        } else if pos == self.m {
            IntervalId::I(0)
        } else {
            IntervalId::J(pos - self.m)
        }
    }
}

/// One atom of a finite-support ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// A finite-support valid ratio: atoms with strictly increasing values,
/// probabilities summing to 1 (within `1e-12`) and `E[value] <= 1 + 1e-12`.
/// The deficit `1 - E[value]` is the singular mass of the numerator measure.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicRatio {
    atoms: Vec<Atom>,
}

impl AtomicRatio {
    /// Builds a ratio from unordered atoms: zero-probability atoms are
    /// dropped, exactly-equal values merged, then the invariants checked.
    /// Near-equal values stay distinct; the partition cells absorb them.
    pub fn from_atoms(raw: impl IntoIterator<Item = (f64, f64)>) -> Result<AtomicRatio> {
        let atoms: Vec<Atom> = raw
            .into_iter()
            .filter(|&(_, p)| p != 0.0)
            .map(|(value, prob)| Atom { value, prob })
            .collect();
        for a in &atoms {
            if !a.value.is_finite() || !a.prob.is_finite() {
                return Err(Error::NonFiniteInput("ratio atom"));
            }
            if a.value < 0.0 || a.prob < 0.0 {
                return Err(Error::NegativeValue(a.value.min(a.prob)));
            }
        }
        let r = Self::from_clean_atoms(atoms);
        r.check()?;
        Ok(r)
    }

    fn from_clean_atoms(mut atoms: Vec<Atom>) -> AtomicRatio {
        atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.value == a.value => last.prob += a.prob,
                _ => merged.push(a),
            }
        }
        AtomicRatio { atoms: merged }
    }

    fn check(&self) -> Result<()> {
        let total = kahan_sum(self.atoms.iter().map(|a| a.prob));
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::NotADistribution(format!(
                "atom probabilities sum to {total}"
            )));
        }
        let e = self.expectation();
        if e > 1.0 + PROB_TOL {
            return Err(Error::NotADistribution(format!(
                "ratio expectation {e} exceeds 1"
            )));
        }
        Ok(())
    }

    /// The trivial ratio: value 1 with probability 1.
    pub fn identity() -> AtomicRatio {
        AtomicRatio {
            atoms: vec![Atom {
                value: 1.0,
                prob: 1.0,
            }],
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `E[value]`.
    pub fn expectation(&self) -> f64 {
        kahan_sum(self.atoms.iter().map(|a| a.prob * a.value))
    }

    /// All values multiplied by `c` in `[0, 1]` (still a valid ratio).
    pub fn scaled(&self, c: f64) -> Result<AtomicRatio> {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::OutOfRange {
                name: "scale",
                value: c,
                expected: "[0, 1]",
            });
        }
        AtomicRatio::from_atoms(self.atoms.iter().map(|a| (a.value * c, a.prob)))
    }
}

pub(crate) fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// `TV(R) = E[(1 - R)_+]`, the total variation distance of any pair of
/// distributions realizing the ratio.
///
/// Computed as the sum of the nonnegative terms `prob * (1 - value)` over
/// values below 1 (no cancellation), and cross-checked against the
/// algebraically equal form `(E|1 - R| + 1 - E[R]) / 2`.
pub fn tv_functional(r: &AtomicRatio) -> f64 {
    let tv = kahan_sum(
        r.atoms
            .iter()
            .filter(|a| a.value < 1.0)
            .map(|a| a.prob * (1.0 - a.value)),
    );
    let abs_form = 0.5
        * (kahan_sum(r.atoms.iter().map(|a| a.prob * (1.0 - a.value).abs())) + 1.0
            - r.expectation());
    assert!(
        (tv - abs_form).abs() <= 1e-12,
        "TV functional forms disagree: {tv} vs {abs_form}"
    );
    tv.clamp(0.0, 1.0)
}

/// Conditional expectation of a ratio given its partition cell.
///
/// Atoms sharing a cell merge into one atom at the cell's
/// probability-weighted mean value; total probability, expectation and the
/// TV functional are preserved (the event `value < 1` is a union of cells).
/// The output has at most `2m + 1` atoms. Since the input is sorted by
/// value and cells are intervals, grouping is a single linear pass.
pub fn discretize(r: &AtomicRatio, spec: &PartitionSpec) -> AtomicRatio {
    let mut out: Vec<Atom> = Vec::new();
    let mut current: Option<(IntervalId, f64, f64)> = None; // (cell, prob, prob*value)
    for a in &r.atoms {
        let cell = spec.classify(a.value).expect("ratio atoms are nonnegative");
        match &mut current {
            Some((c, p, pv)) if *c == cell => {
                *p += a.prob;
                *pv += a.prob * a.value;
            }
            _ => {
                if let Some((c, p, pv)) = current.take() {
                    out.push(cell_mean_atom(spec, c, p, pv));
                }
                current = Some((cell, a.prob, a.prob * a.value));
            }
        }
    }
    if let Some((c, p, pv)) = current {
        out.push(cell_mean_atom(spec, c, p, pv));
    }
    AtomicRatio { atoms: out }
}

fn cell_mean_atom(spec: &PartitionSpec, cell: IntervalId, p: f64, pv: f64) -> Atom {
    let (lo, hi) = spec.cell_hull(cell);
    Atom {
        value: (pv / p).clamp(lo, hi),
        prob: p,
    }
}

/// Independent product: all pairwise value products with multiplied
/// probabilities, exactly-equal values merged.
pub fn independent_product(r1: &AtomicRatio, r2: &AtomicRatio) -> AtomicRatio {
    let mut atoms = Vec::with_capacity(r1.len() * r2.len());
    for a in &r1.atoms {
        for b in &r2.atoms {
            atoms.push(Atom {
                value: a.value * b.value,
                prob: a.prob * b.prob,
            });
        }
    }
    finish_product(atoms)
}

fn finish_product(mut atoms: Vec<Atom>) -> AtomicRatio {
    let total = kahan_sum(atoms.iter().map(|a| a.prob));
    if (total - 1.0).abs() > PROB_TOL {
        RENORMALIZATIONS.fetch_add(1, Ordering::Relaxed);
        for a in &mut atoms {
            a.prob /= total;
        }
    }
    AtomicRatio::from_clean_atoms(atoms)
}

/// The ratio of two distributions on the same finite alphabet: atoms
/// `(p[x]/q[x], q[x])` over the support of `q`. Mass of `p` outside `q`'s
/// support becomes the expectation deficit.
pub fn ratio_from_discrete_pair(p: &[f64], q: &[f64]) -> Result<AtomicRatio> {
    if p.len() != q.len() {
        return Err(Error::ShapeMismatch(format!(
            "distributions have lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    for (name, v) in [("p", p), ("q", q)] {
        if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::NotADistribution(format!(
                "{name} has negative or non-finite entries"
            )));
        }
        let total = kahan_sum(v.iter().copied());
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::NotADistribution(format!("{name} sums to {total}")));
        }
    }
    AtomicRatio::from_atoms(
        p.iter()
            .zip(q)
            .filter(|&(_, &qx)| qx > 0.0)
            .map(|(&px, &qx)| (px / qx, qx)),
    )
}

/// Size above which [`product_discretize`] switches from materializing the
/// product to the banded accumulation kernel.
const FUSE_THRESHOLD: usize = 1 << 20;

/// `discretize(independent_product(r1, r2), spec)` without materializing
/// the product when it would be large.
///
/// The banded kernel classifies value products through the partition's
/// log-space boundary ladder, accumulating per-cell probability and mean
/// numerator with prefix sums over the larger factor's atoms. Pairs whose
/// product lands within an ulp of a cell boundary may be assigned to the
/// neighboring cell; conditional means stay inside their cell hulls, so the
/// discretization error analysis is unaffected.
pub fn product_discretize(r1: &AtomicRatio, r2: &AtomicRatio, spec: &PartitionSpec) -> AtomicRatio {
    if r1.len().saturating_mul(r2.len()) <= FUSE_THRESHOLD {
        discretize(&independent_product(r1, r2), spec)
    } else {
        fused_product_discretize(r1, r2, spec)
    }
}

struct CellAccum {
    w: Vec<f64>,
    sv: Vec<f64>,
}

fn fused_product_discretize(
    r1: &AtomicRatio,
    r2: &AtomicRatio,
    spec: &PartitionSpec,
) -> AtomicRatio {
    use rayon::prelude::*;

    // outer side small, inner side prefix-summed
    let (outer, inner) = if r1.len() <= r2.len() { (r1, r2) } else { (r2, r1) };
    let m = spec.m;
    let cells = spec.alphabet_size();

    // inner atoms with value 0 multiply everything into I(m); split them off
    let zero_count = inner.atoms.iter().take_while(|a| a.value == 0.0).count();
    let zero_inner_mass: f64 = inner.atoms[..zero_count].iter().map(|a| a.prob).sum();
    let inner_atoms = &inner.atoms[zero_count..];
    let b = inner_atoms.len();
    let mut yln = Vec::with_capacity(b);
    let mut prefix = Vec::with_capacity(b + 1); // (sum q, sum q*v)
    prefix.push((0.0f64, 0.0f64));
    {
        let (mut sq, mut sqv) = (0.0f64, 0.0f64);
        for a in inner_atoms {
            yln.push(a.value.ln());
            sq += a.prob;
            sqv += a.prob * a.value;
            prefix.push((sq, sqv));
        }
    }

    // Ascending ladder of cell-start positions in log space, one per cell in
    // value order. I-side cells own [start, next_start) of the log-sum,
    // J-side cells (start, next_start]; I(0) is the single point 0. The
    // open/closed choice at each boundary is realized by picking
    // first-greater-or-equal vs first-greater when locating atom indexes.
    let mut starts = Vec::with_capacity(cells);
    starts.push(f64::NEG_INFINITY); // I(m) reaches down to 0
    for t in 1..m {
        starts.push((-spec.complements[m - t]).ln_1p());
    }
    starts.push(0.0); // I(0)
    for k in 1..=m {
        starts.push(-(-spec.complements[k - 1]).ln_1p());
    }
    debug_assert_eq!(starts.len(), cells);

    let n_chunks = (rayon::current_num_threads() * 2).max(1);
    let chunk = (outer.atoms.len().div_ceil(n_chunks)).max(1);
    let partials: Vec<CellAccum> = outer
        .atoms
        .par_chunks(chunk)
        .map(|chunk_atoms| accumulate_chunk(chunk_atoms, &yln, &prefix, &starts, m, zero_inner_mass))
        .collect();

    let mut w = vec![0.0f64; cells];
    let mut sv = vec![0.0f64; cells];
    for part in partials {
        for t in 0..cells {
            w[t] += part.w[t];
            sv[t] += part.sv[t];
        }
    }

    let mut atoms = Vec::new();
    for t in 0..cells {
        if w[t] > 0.0 {
            let cell = spec.cell_by_position(t);
            let (lo, hi) = spec.cell_hull(cell);
            atoms.push(Atom {
                value: (sv[t] / w[t]).clamp(lo, hi),
                prob: w[t],
            });
        }
    }
    finish_product(atoms)
}

fn accumulate_chunk(
    chunk_atoms: &[Atom],
    yln: &[f64],
    prefix: &[(f64, f64)],
    starts: &[f64],
    m: usize,
    zero_inner_mass: f64,
) -> CellAccum {
    let cells = starts.len();
    let b = yln.len();
    let mut acc = CellAccum {
        w: vec![0.0; cells],
        sv: vec![0.0; cells],
    };
    // boundary atom indexes, maintained incrementally across the outer sweep
    // (outer atoms ascend, so every threshold drifts monotonically down)
    let mut jarr: Vec<u32> = vec![0; cells + 1];
    let mut first = true;
    for ua in chunk_atoms {
        if ua.value == 0.0 {
            acc.w[0] += ua.prob; // all products are 0: cell I(m)
            continue;
        }
        if zero_inner_mass > 0.0 {
            acc.w[0] += ua.prob * zero_inner_mass;
        }
        let x = ua.value.ln();
        let pu = ua.prob;
        let puv = ua.prob * ua.value;
        let mut prev_j = 0usize;
        for t in 0..=cells {
            // boundary t separates cell t-1 from cell t; cells with
            // position <= m close on the left (first_ge), J cells on the
            // right (first_gt)
            let j = if t == 0 {
                0
            } else if t == cells {
                b
            } else {
                let thr = starts[t] - x;
                let ge = t <= m;
                let mut j = if first {
                    locate(yln, thr, ge)
                } else {
                    jarr[t] as usize
                };
                if !first {
                    if ge {
                        while j < b && yln[j] < thr {
                            j += 1;
                        }
                        while j > 0 && yln[j - 1] >= thr {
                            j -= 1;
                        }
                    } else {
                        while j < b && yln[j] <= thr {
                            j += 1;
                        }
                        while j > 0 && yln[j - 1] > thr {
                            j -= 1;
                        }
                    }
                }
                jarr[t] = j as u32;
                j
            };
            if t > 0 && j > prev_j {
                let dw = prefix[j].0 - prefix[prev_j].0;
                let dv = prefix[j].1 - prefix[prev_j].1;
                if dw > 0.0 {
                    acc.w[t - 1] += pu * dw;
                    acc.sv[t - 1] += puv * dv;
                }
            }
            prev_j = j;
        }
        first = false;
    }
    acc
}

/// First index with `yln[j] >= thr` (`ge`) or `yln[j] > thr` (`!ge`).
fn locate(yln: &[f64], thr: f64, ge: bool) -> usize {
    if ge {
        yln.partition_point(|&y| y < thr)
    } else {
        yln.partition_point(|&y| y <= thr)
    }
}
