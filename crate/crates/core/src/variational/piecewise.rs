//! Closed-form integrals of reciprocal powers of positive piecewise-affine
//! functions.
//!
//! Both x̂ (finite temperature) and α̂ (zero temperature) are continuous,
//! positive and affine between breakpoints, with nonpositive slope.  Every
//! integral the functionals need — ∫1/φ, ∫1/φ², the iterated ∫∫1/φ² and
//! ∫ξ″φ — has an exact expression per piece, evaluated here in forms that
//! stay accurate when a slope is tiny or zero.

use crate::mixture::Covariance;

/// −log(1−ε)/ε, with its Taylor series near 0.
fn log_ratio(eps: f64) -> f64 {
    if eps.abs() < 1e-4 {
        1.0 + eps * (0.5 + eps * (1.0 / 3.0 + eps * 0.25))
    } else {
        -(-eps).ln_1p() / eps
    }
}

/// (−log(1−ε) − ε)/ε² = Σ_{k≥0} ε^k/(k+2), with its Taylor series near 0.
fn log_excess(eps: f64) -> f64 {
    if eps.abs() < 1e-3 {
        let mut s = 0.0;
        let mut p = 1.0;
        for k in 0..8 {
            s += p / (k as f64 + 2.0);
            p *= eps;
        }
        s
    } else {
        (-(-eps).ln_1p() - eps) / (eps * eps)
    }
}

/// A positive function on `[0, 1)` that is affine on each piece
/// `[knots[i], knots[i+1])` with value `vals[i]` at the left knot and slope
/// `−slopes[i]` (so `slopes[i] ≥ 0`).  The last piece ends at 1.
#[derive(Debug, Clone)]
pub struct Pieces {
    knots: Vec<f64>,
    vals: Vec<f64>,
    slopes: Vec<f64>,
    /// ∫_0^{knots[i]} 1/φ.
    c1: Vec<f64>,
    /// ∫_0^{knots[i]} 1/φ².
    c2: Vec<f64>,
    /// ∫_0^{knots[i]} ∫_0^s 1/φ² ds.
    cj: Vec<f64>,
}

impl Pieces {
    /// Builds the function from its left knots (starting at 0), slopes and
    /// value at 0.  Returns `None` unless φ > 0 on [0, 1) and φ(1) ≥ 0.
    pub fn new(knots: Vec<f64>, slopes: Vec<f64>, phi0: f64) -> Option<Self> {
        debug_assert_eq!(knots.len(), slopes.len());
        debug_assert!(knots.first() == Some(&0.0));
        let n = knots.len();
        let mut vals = Vec::with_capacity(n);
        let mut v = phi0;
        for i in 0..n {
            vals.push(v);
            let end = if i + 1 < n { knots[i + 1] } else { 1.0 };
            v -= slopes[i] * (end - knots[i]);
        }
        // allow value 0 at q = 1 up to rounding; negative is invalid
        if v < -1e-14 * phi0.abs().max(1.0) {
            return None;
        }
        Pieces::assemble(knots, slopes, vals)
    }

    /// Builds the function from its left knots, slopes and value at 1.
    /// Values are accumulated from the right, so they are accurate even
    /// where φ is tiny next to its value at 0.
    pub fn from_end(knots: Vec<f64>, slopes: Vec<f64>, phi1: f64) -> Option<Self> {
        debug_assert_eq!(knots.len(), slopes.len());
        debug_assert!(knots.first() == Some(&0.0));
        if !(phi1 >= 0.0) {
            return None;
        }
        let n = knots.len();
        let mut vals = vec![0.0; n];
        let mut v = phi1;
        for i in (0..n).rev() {
            let end = if i + 1 < n { knots[i + 1] } else { 1.0 };
            v += slopes[i] * (end - knots[i]);
            vals[i] = v;
        }
        Pieces::assemble(knots, slopes, vals)
    }

    fn assemble(knots: Vec<f64>, slopes: Vec<f64>, vals: Vec<f64>) -> Option<Self> {
        let n = knots.len();
        if vals.iter().any(|v| !(*v > 0.0 && v.is_finite())) || slopes.iter().any(|a| !(*a >= 0.0)) {
            return None;
        }
        let mut p = Pieces { knots, vals, slopes, c1: vec![0.0; n], c2: vec![0.0; n], cj: vec![0.0; n] };
        for i in 1..n {
            let u = p.knots[i] - p.knots[i - 1];
            let (a, b, c) = p.piece_integrals(i - 1, u, p.vals[i]);
            p.c1[i] = p.c1[i - 1] + a;
            p.c2[i] = p.c2[i - 1] + b;
            p.cj[i] = p.cj[i - 1] + p.c2[i - 1] * u + c;
        }
        Some(p)
    }

    /// Value of φ at the right end (q = 1).
    pub fn end_value(&self) -> f64 {
        let i = self.knots.len() - 1;
        self.vals[i] - self.slopes[i] * (1.0 - self.knots[i])
    }

    fn locate(&self, q: f64) -> usize {
        self.knots.iter().rposition(|&k| k <= q).unwrap_or_default()
    }

    /// Value at the right end of piece `i` (exact stored value, not
    /// recomputed from the slope).
    fn right_value(&self, i: usize) -> f64 {
        if i + 1 < self.vals.len() {
            self.vals[i + 1]
        } else {
            self.end_value()
        }
    }

    /// Integrals over `[knots[i], knots[i] + u]`: (∫1/φ, ∫1/φ², ∫(I2−I2(knot))).
    /// `phi_u` is φ at the right end of the range.
    fn piece_integrals(&self, i: usize, u: f64, phi_u: f64) -> (f64, f64, f64) {
        let phi0 = self.vals[i];
        let eps = (phi0 - phi_u) / phi0;
        if eps.abs() < 1e-3 {
            let i1 = u / phi0 * log_ratio(eps);
            let j = u * u / (phi0 * phi0) * log_excess(eps);
            (i1, u / (phi0 * phi_u), j)
        } else {
            // −log(1−ε) = log(φ0/φ_u), accurate even when φ_u ≪ φ0
            let lg = (phi0 / phi_u).ln();
            let i1 = u / (phi0 - phi_u) * lg;
            let j = u * u / (phi0 * phi0) * (lg - eps) / (eps * eps);
            (i1, u / (phi0 * phi_u), j)
        }
    }

    /// Integrals from knot `i` to q.
    fn partial(&self, i: usize, q: f64) -> (f64, f64, f64) {
        let u = q - self.knots[i];
        let end = if i + 1 < self.knots.len() { self.knots[i + 1] } else { 1.0 };
        let phi_u = if q >= end { self.right_value(i) } else { (self.vals[i] - self.slopes[i] * u).max(0.0) };
        self.piece_integrals(i, u, phi_u)
    }

    /// φ(q).
    pub fn phi(&self, q: f64) -> f64 {
        let i = self.locate(q);
        self.vals[i] - self.slopes[i] * (q - self.knots[i])
    }

    /// ∫_0^q 1/φ.
    pub fn i1(&self, q: f64) -> f64 {
        let i = self.locate(q);
        self.c1[i] + self.partial(i, q).0
    }

    /// ∫_0^q 1/φ².
    pub fn i2(&self, q: f64) -> f64 {
        let i = self.locate(q);
        self.c2[i] + self.partial(i, q).1
    }

    /// ∫_0^q ∫_0^s 1/φ(r)² dr ds.
    pub fn j2(&self, q: f64) -> f64 {
        let i = self.locate(q);
        let u = q - self.knots[i];
        self.cj[i] + self.c2[i] * u + self.partial(i, q).2
    }

    /// ∫_0^q 1/φ³ (used for Newton steps on the zero-temperature L).
    pub fn i3(&self, q: f64) -> f64 {
        let i_end = self.locate(q);
        let mut s = 0.0;
        for i in 0..=i_end {
            let end = if i < i_end { self.knots[i + 1] } else { q };
            let u = end - self.knots[i];
            let p0 = self.vals[i];
            let p1 = if i < i_end || q >= 1.0 { self.right_value(i) } else { p0 - self.slopes[i] * u };
            s += (p0 + p1) * u / (2.0 * p0 * p0 * p1 * p1);
        }
        s
    }

    /// ∫_0^q ξ″φ, by parts: ξ′(q)φ(q) − ξ′(0)φ(0) + Σ slope·Δξ.
    pub fn xi2_phi<C: Covariance + ?Sized>(&self, xi: &C, q: f64) -> f64 {
        let i_end = self.locate(q);
        let mut s = xi.d1(q) * self.phi(q) - xi.d1(0.0) * self.vals[0];
        for i in 0..=i_end {
            if self.slopes[i] == 0.0 {
                continue;
            }
            let end = if i < i_end { self.knots[i + 1] } else { q };
            s += self.slopes[i] * xi.increment(self.knots[i], end);
        }
        s
    }
}
