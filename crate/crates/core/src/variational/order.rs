//! Step order parameters and the closed-form evaluation of the
//! Crisanti–Sommers functionals.
//!
//! Writing both order parameters as sums of atoms, x(q) = Σ_j m_j 1{q ≥ q_j}
//! and α(q) = Σ_j m_j 1{q ≥ q_j}, an integration by parts turns the
//! functionals into
//!
//! ```text
//! 2𝒫(x; ξ)   = ∫_0^1 ξ′x + ∫_0^{q̂} 1/x̂ + log(1 − q̂)
//! 2𝒬(L,α; ξ) = ξ′(1) α̂(1) + ∫_0^1 ξ′α + ∫_0^1 1/α̂
//! ```
//!
//! where the first integral is a finite sum of ξ-differences and the other
//! terms are the piecewise logarithms of [`Pieces`].  No quadrature is
//! involved, so the values are exact up to rounding.

use serde::{Deserialize, Serialize};

use super::piecewise::Pieces;
use crate::error::{Error, Result};
use crate::mixture::Covariance;

/// Finite-temperature order parameter: a right-continuous step function
/// x(q) = values[i] on [breakpoints[i], breakpoints[i+1]), 0 before the first
/// breakpoint and 1 from the last one on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderParamFT {
    /// q_1 < … < q_k in [0, 1).
    pub breakpoints: Vec<f64>,
    /// 0 < x_1 ≤ … ≤ x_k = 1.
    pub values: Vec<f64>,
}

/// Zero-temperature order parameter (L, α) with α a nondecreasing step
/// function: α(q) = values[i] on [breakpoints[i], breakpoints[i+1]), 0 before
/// the first breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderParamZT {
    /// L > ∫_0^1 α.
    pub l: f64,
    /// q_1 < … < q_k in [0, 1).
    pub breakpoints: Vec<f64>,
    /// 0 ≤ α_1 ≤ … ≤ α_k.
    pub values: Vec<f64>,
}

fn check_breakpoints(b: &[f64], v: &[f64]) -> Result<()> {
    if b.len() != v.len() {
        return Err(Error::Invalid("breakpoints and values differ in length".into()));
    }
    if b.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::Invalid("order parameter contains non-finite entries".into()));
    }
    if b.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Invalid("breakpoints must be strictly increasing".into()));
    }
    if b.first().is_some_and(|&q| q < 0.0) || b.last().is_some_and(|&q| q >= 1.0) {
        return Err(Error::Invalid("breakpoints must lie in [0, 1)".into()));
    }
    if v.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Invalid("values must be nondecreasing".into()));
    }
    Ok(())
}

/// Knots, slopes and masses for the complement function of a step function.
fn complement_shape(breakpoints: &[f64], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut knots = vec![0.0];
    let mut slopes = vec![0.0];
    for (&q, &v) in breakpoints.iter().zip(values) {
        if q == 0.0 {
            slopes[0] = v;
        } else {
            knots.push(q);
            slopes.push(v);
        }
    }
    (knots, slopes)
}

impl OrderParamFT {
    /// Validates and builds an order parameter.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_breakpoints(&breakpoints, &values)?;
        if values.is_empty() {
            return Err(Error::Invalid("finite-temperature order parameter needs at least one breakpoint".into()));
        }
        if !(values[0] > 0.0) {
            return Err(Error::Invalid("values must be positive".into()));
        }
        if (values[values.len() - 1] - 1.0).abs() > 1e-12 || values.iter().any(|&v| v > 1.0 + 1e-12) {
            return Err(Error::Invalid("values must end at exactly 1 and never exceed it".into()));
        }
        let mut values = values;
        let k = values.len();
        values[k - 1] = 1.0;
        let x = OrderParamFT { breakpoints, values };
        if x.try_pieces().is_none() {
            return Err(Error::Invalid("x-hat must stay positive on [0, 1)".into()));
        }
        Ok(x)
    }

    /// The replica-symmetric order parameter x ≡ 1 with q̂ = `q`.
    pub fn replica_symmetric(q: f64) -> Result<Self> {
        OrderParamFT::new(vec![q], vec![1.0])
    }

    /// Builds x from atoms (q_j, m_j) with Σ m_j = 1 (masses are renormalised).
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !(total > 0.0) {
            return Err(Error::Invalid("atoms carry no mass".into()));
        }
        let mut acc = 0.0;
        let mut b = Vec::new();
        let mut v = Vec::new();
        for &(q, m) in atoms {
            acc += m / total;
            b.push(q);
            v.push(acc.min(1.0));
        }
        let k = v.len();
        v[k - 1] = 1.0;
        OrderParamFT::new(b, v)
    }

    /// q̂, the last breakpoint (where x reaches 1).
    pub fn q_hat(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Atoms (q_j, m_j) of the measure whose distribution function is x.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut prev = 0.0;
        self.breakpoints
            .iter()
            .zip(&self.values)
            .map(|(&q, &v)| {
                let m = v - prev;
                prev = v;
                (q, m)
            })
            .collect()
    }

    /// x(q).
    pub fn x(&self, q: f64) -> f64 {
        match self.breakpoints.iter().rposition(|&b| b <= q) {
            Some(i) => self.values[i],
            None => 0.0,
        }
    }

    /// x̂ as a piecewise-affine function (x̂(q) = 1 − q beyond q̂).
    pub(crate) fn pieces(&self) -> Pieces {
        self.try_pieces().expect("validated order parameter")
    }

    fn try_pieces(&self) -> Option<Pieces> {
        let (knots, slopes) = complement_shape(&self.breakpoints, &self.values);
        // x̂(1) = 0; values accumulate from the right
        Pieces::from_end(knots, slopes, 0.0)
    }

    /// x̂(q) = ∫_q^1 x.
    pub fn x_hat(&self, q: f64) -> f64 {
        self.pieces().phi(q)
    }
}

/// Evaluation context binding an order parameter to a mixture.
#[derive(Debug, Clone)]
pub struct FtEval<'a, C: Covariance + ?Sized> {
    xi: &'a C,
    x: &'a OrderParamFT,
    p: Pieces,
}

impl<'a, C: Covariance + ?Sized> FtEval<'a, C> {
    /// Binds `x` to the mixture `xi`.
    pub fn new(xi: &'a C, x: &'a OrderParamFT) -> Self {
        FtEval { xi, x, p: x.pieces() }
    }

    /// 𝒫(x; ξ).
    pub fn value(&self) -> f64 {
        let b = &self.x.breakpoints;
        let mut s = 0.0;
        for i in 0..b.len() {
            let next = b.get(i + 1).copied().unwrap_or(1.0);
            s += self.x.values[i] * self.xi.increment(b[i], next);
        }
        let qh = self.x.q_hat();
        0.5 * (s + self.p.i1(qh) + (-qh).ln_1p())
    }

    /// F(q) = ξ′(q) − ∫_0^q 1/x̂².
    pub fn big_f(&self, q: f64) -> f64 {
        self.xi.d1(q) - self.p.i2(q)
    }

    /// f(s) = ∫_0^s F.
    pub fn small_f(&self, s: f64) -> f64 {
        self.xi.increment(0.0, s) - self.p.j2(s)
    }

    /// Energy profile E(q) = ½{ξ′(0)x̂(0) + ∫_0^q ξ″x̂ + ∫_0^q 1/x̂}.
    pub fn energy(&self, q: f64) -> f64 {
        0.5 * (self.xi.d1(0.0) * self.p.phi(0.0) + self.p.xi2_phi(self.xi, q) + self.p.i1(q))
    }

    /// Gradient of 𝒫 with respect to the atom locations q_j and masses m_j
    /// (masses treated as free; differences along Σ m_j = const are the
    /// meaningful part).  Returns (∂/∂q_j, ∂/∂m_j up to a common constant).
    pub fn atom_gradient(&self) -> (Vec<f64>, Vec<f64>) {
        let atoms = self.x.atoms();
        let dq = atoms.iter().map(|&(q, m)| -0.5 * m * self.big_f(q)).collect();
        let dm = atoms.iter().map(|&(q, _)| -0.5 * self.small_f(q)).collect();
        (dq, dm)
    }
}

/// 𝒫(x; ξ).
pub fn cs_value<C: Covariance + ?Sized>(x: &OrderParamFT, xi: &C) -> f64 {
    FtEval::new(xi, x).value()
}

/// E(q) for the finite-temperature order parameter `x`.
pub fn energy_profile<C: Covariance + ?Sized>(xi: &C, x: &OrderParamFT, q: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain(format!("energy profile needs q in [0, 1), got {q}")));
    }
    Ok(FtEval::new(xi, x).energy(q))
}

impl OrderParamZT {
    /// Validates and builds an order parameter.
    pub fn new(l: f64, breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_breakpoints(&breakpoints, &values)?;
        if values.first().is_some_and(|&v| v < 0.0) {
            return Err(Error::Invalid("alpha must be nonnegative".into()));
        }
        let p = OrderParamZT { l, breakpoints, values };
        if !(l.is_finite() && l > 0.0) || p.pieces().is_none() {
            return Err(Error::Invalid("alpha-hat must stay positive on [0, 1]".into()));
        }
        if !(p.pieces().unwrap().end_value() > 0.0) {
            return Err(Error::Invalid("L must exceed the integral of alpha".into()));
        }
        Ok(p)
    }

    /// Builds (L, α) from atoms (q_j, m_j) of the measure dα.
    pub fn from_atoms(l: f64, atoms: &[(f64, f64)]) -> Result<Self> {
        let mut acc = 0.0;
        let mut b = Vec::new();
        let mut v = Vec::new();
        for &(q, m) in atoms {
            acc += m;
            b.push(q);
            v.push(acc);
        }
        OrderParamZT::new(l, b, v)
    }

    /// Atoms (q_j, m_j) of the measure ν_∞ with ν_∞([0, q]) = α(q).
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut prev = 0.0;
        self.breakpoints
            .iter()
            .zip(&self.values)
            .map(|(&q, &v)| {
                let m = v - prev;
                prev = v;
                (q, m)
            })
            .collect()
    }

    /// α(q).
    pub fn alpha(&self, q: f64) -> f64 {
        match self.breakpoints.iter().rposition(|&b| b <= q) {
            Some(i) => self.values[i],
            None => 0.0,
        }
    }

    pub(crate) fn pieces(&self) -> Option<Pieces> {
        let (knots, slopes) = complement_shape(&self.breakpoints, &self.values);
        Pieces::new(knots, slopes, self.l)
    }

    /// α̂(q) = L − ∫_0^q α.
    pub fn alpha_hat(&self, q: f64) -> f64 {
        self.pieces().expect("validated").phi(q)
    }
}

/// Evaluation context binding a zero-temperature order parameter to a mixture.
#[derive(Debug, Clone)]
pub struct ZtEval<'a, C: Covariance + ?Sized> {
    xi: &'a C,
    a: &'a OrderParamZT,
    p: Pieces,
}

impl<'a, C: Covariance + ?Sized> ZtEval<'a, C> {
    /// Binds `(L, α)` to the mixture `xi`.
    pub fn new(xi: &'a C, a: &'a OrderParamZT) -> Self {
        ZtEval { xi, a, p: a.pieces().expect("validated order parameter") }
    }

    /// Binds `(L, α)` with a precomputed α̂ (used when α̂(1) is known more
    /// accurately than L − ∫α).
    pub(crate) fn with_pieces(xi: &'a C, a: &'a OrderParamZT, p: Pieces) -> Self {
        ZtEval { xi, a, p }
    }

    /// 𝒬(L, α; ξ).
    pub fn value(&self) -> f64 {
        let b = &self.a.breakpoints;
        let mut s = self.xi.d1(1.0) * self.p.end_value();
        for i in 0..b.len() {
            let next = b.get(i + 1).copied().unwrap_or(1.0);
            s += self.a.values[i] * self.xi.increment(b[i], next);
        }
        0.5 * (s + self.p.i1(1.0))
    }

    /// G(q) = ξ′(q) − ∫_0^q 1/α̂².
    pub fn big_g(&self, q: f64) -> f64 {
        self.xi.d1(q) - self.p.i2(q)
    }

    /// g(s) = ∫_s^1 G.
    pub fn small_g(&self, s: f64) -> f64 {
        self.xi.increment(s, 1.0) - (self.p.j2(1.0) - self.p.j2(s))
    }

    /// Zero-temperature energy profile ½{ξ′(0)L + ∫_0^q ξ″α̂ + ∫_0^q 1/α̂};
    /// at q = 1 it equals 𝒬(L, α; ξ).
    pub fn energy(&self, q: f64) -> f64 {
        0.5 * (self.xi.d1(0.0) * self.a.l + self.p.xi2_phi(self.xi, q) + self.p.i1(q))
    }

    /// Gradient of 𝒬 with respect to (L, atom locations, atom masses):
    /// ∂/∂L = ½G(1), ∂/∂q_j = ½m_j(G(1) − G(q_j)), ∂/∂m_j = ½(g(q_j) − (1−q_j)G(1)).
    pub fn gradient(&self) -> (f64, Vec<f64>, Vec<f64>) {
        let g1 = self.big_g(1.0);
        let atoms = self.a.atoms();
        let dq = atoms.iter().map(|&(q, m)| 0.5 * m * (g1 - self.big_g(q))).collect();
        let dm = atoms.iter().map(|&(q, _)| 0.5 * (self.small_g(q) - (1.0 - q) * g1)).collect();
        (0.5 * g1, dq, dm)
    }
}

/// 𝒬(L, α; ξ).
pub fn zt_value<C: Covariance + ?Sized>(a: &OrderParamZT, xi: &C) -> f64 {
    ZtEval::new(xi, a).value()
}

/// Zero-temperature energy profile for the order parameter `a`.
pub fn energy_profile_zt<C: Covariance + ?Sized>(xi: &C, a: &OrderParamZT, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("energy profile needs q in [0, 1], got {q}")));
    }
    Ok(ZtEval::new(xi, a).energy(q))
}
