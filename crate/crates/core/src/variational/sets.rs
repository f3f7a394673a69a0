//! The maximiser sets S (finite temperature) and T (zero temperature).
//!
//! Both are detected numerically: the relevant function is tabulated on a
//! uniform grid, local maxima are refined by golden-section search, points
//! within a relative tolerance of the maximum are collected, and runs of such
//! points (allowing small gaps) are merged into closed intervals.  Runs only a
//! few cells wide are reported as atoms at the refined argmax, since a
//! quadratic maximum is always "flat" at tolerance scale.

use serde::{Deserialize, Serialize};

use super::order::{FtEval, OrderParamFT, OrderParamZT, ZtEval};
use crate::mixture::Covariance;
use crate::optimize::golden_max;

/// Finite union of disjoint closed intervals in [0, 1]; atoms have `a == b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct IntervalSet {
    /// Sorted disjoint intervals (a_i, b_i) with a_i ≤ b_i.
    pub intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    /// Builds a set from intervals, sorting and merging overlaps.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Self {
        intervals.retain(|iv| iv.0 <= iv.1);
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match out.last_mut() {
                Some(last) if iv.0 <= last.1 => last.1 = last.1.max(iv.1),
                _ => out.push(iv),
            }
        }
        IntervalSet { intervals: out }
    }

    /// A set of atoms.
    pub fn atoms(points: &[f64]) -> Self {
        IntervalSet::new(points.iter().map(|&p| (p, p)).collect())
    }

    /// True if the set is empty.
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Whether `q` lies within `tol` of the set.
    pub fn contains(&self, q: f64, tol: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| q >= a - tol && q <= b + tol)
    }

    /// True if every component is a single point.
    pub fn is_discrete(&self) -> bool {
        self.intervals.iter().all(|iv| iv.0 == iv.1)
    }

    /// Sorted, de-duplicated endpoints of all components.
    pub fn endpoints(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.intervals.iter().flat_map(|&(a, b)| [a, b]).collect();
        e.dedup();
        e
    }

    /// Whether the set equals the given list of atoms up to `tol`.
    pub fn is_atoms(&self, points: &[f64], tol: f64) -> bool {
        self.is_discrete() && self.intervals.len() == points.len() && self.intervals.iter().zip(points).all(|(iv, p)| (iv.0 - p).abs() <= tol)
    }

    /// Whether the set is the single interval [a, b] up to `tol`.
    pub fn is_interval(&self, a: f64, b: f64, tol: f64) -> bool {
        self.intervals.len() == 1 && (self.intervals[0].0 - a).abs() <= tol && (self.intervals[0].1 - b).abs() <= tol
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|iv| iv.1 - iv.0).sum()
    }
}

/// Grid and tolerance controls for set detection.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SetOptions {
    /// Number of grid points.
    pub grid: usize,
    /// Relative tolerance: points with max − h ≤ tol·(1 + |max|) qualify.
    pub tol: f64,
}

impl Default for SetOptions {
    fn default() -> Self {
        SetOptions { grid: 4001, tol: 1e-7 }
    }
}

/// Runs of this many cells or fewer collapse to an atom.
const NARROW_CELLS: usize = 4;
/// Qualifying grid points separated by at most this many missing cells merge.
const MERGE_GAP: usize = 2;

/// Detected near-maximiser set of `h` over `grid`, together with the maximum
/// used as reference.  `floor` lower-bounds the reference maximum (known
/// theoretical value).
fn detect<H: Fn(f64) -> f64>(h: H, grid: &[f64], floor: Option<f64>, tol: f64) -> (IntervalSet, f64) {
    let n = grid.len();
    let vals: Vec<f64> = grid.iter().map(|&q| h(q)).collect();
    let mut hmax = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // refine local maxima of the tabulation
    let mut refined: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let left = if i > 0 { vals[i - 1] } else { f64::NEG_INFINITY };
        let right = if i + 1 < n { vals[i + 1] } else { f64::NEG_INFINITY };
        if vals[i] >= left && vals[i] >= right {
            let a = grid[i.saturating_sub(1)];
            let b = grid[(i + 1).min(n - 1)];
            let (q, v) = if a < b { golden_max(&h, a, b, 1e-12) } else { (grid[i], vals[i]) };
            let (q, v) = if v >= vals[i] { (q, v) } else { (grid[i], vals[i]) };
            refined.push((q, v));
            hmax = hmax.max(v);
        }
    }
    if let Some(f) = floor {
        hmax = hmax.max(f);
    }
    let thr = tol * (1.0 + hmax.abs());
    let ok: Vec<usize> = (0..n).filter(|&i| hmax - vals[i] <= thr).collect();
    let mut comps: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < ok.len() {
        let mut j = i;
        while j + 1 < ok.len() && ok[j + 1] - ok[j] <= MERGE_GAP + 1 {
            j += 1;
        }
        let (lo, hi) = (ok[i], ok[j]);
        if hi - lo <= NARROW_CELLS {
            // atom: snap to a domain endpoint if it qualifies, else refined argmax
            let at = if lo == 0 {
                grid[0]
            } else if hi == n - 1 {
                grid[n - 1]
            } else {
                let a = grid[lo - 1];
                let b = grid[hi + 1];
                golden_max(&h, a, b, 1e-12).0
            };
            comps.push((at, at));
        } else {
            comps.push((grid[lo], grid[hi]));
        }
        i = j + 1;
    }
    // refined maxima that qualify without any qualifying grid neighbour
    for (q, v) in refined {
        let covered = comps.iter().any(|&(a, b)| q >= a - 2.0 * (grid[1] - grid[0]) && q <= b + 2.0 * (grid[1] - grid[0]));
        if hmax - v <= thr && !covered {
            comps.push((q, q));
        }
    }
    (IntervalSet::new(comps), hmax)
}

/// S = argmax of f over [0, 1) for the (approximate) minimiser `x`.
pub fn compute_s<C: Covariance + ?Sized>(xi: &C, x: &OrderParamFT, opts: &SetOptions) -> IntervalSet {
    let ev = FtEval::new(xi, x);
    let n = opts.grid.max(3);
    let grid: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    detect(|q| ev.small_f(q), &grid, None, opts.tol).0
}

/// T = zero set of g (equivalently its minimisers, min g = 0) over [0, 1].
pub fn compute_t<C: Covariance + ?Sized>(xi: &C, p: &OrderParamZT, opts: &SetOptions) -> IntervalSet {
    let ev = ZtEval::new(xi, p);
    let n = opts.grid.max(3);
    let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    detect(|q| -ev.small_g(q), &grid, Some(0.0), opts.tol).0
}

/// Maximum of f over the grid used by [`compute_s`] and its refinements.
pub fn f_max<C: Covariance + ?Sized>(xi: &C, x: &OrderParamFT, opts: &SetOptions) -> f64 {
    let ev = FtEval::new(xi, x);
    let n = opts.grid.max(3);
    let grid: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    detect(|q| ev.small_f(q), &grid, None, opts.tol).1
}

/// Minimum of g over [0, 1] (grid plus refinement).
pub fn g_min<C: Covariance + ?Sized>(xi: &C, p: &OrderParamZT, opts: &SetOptions) -> f64 {
    let ev = ZtEval::new(xi, p);
    let n = opts.grid.max(3);
    let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    -detect(|q| -ev.small_g(q), &grid, None, opts.tol).1
}
