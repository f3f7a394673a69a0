//! Mixture functions ξ(t) = Σ_p γ_p² t^p and the mixtures derived from them.
//!
//! A [`Mixture`] stores the weights γ_p themselves (not their squares).  The
//! derived objects used by the variational and tree layers — band
//! restrictions, interval sub-models and the rescaled root model — are all of
//! the form `t ↦ ξ(a + b t) − c − l t` for an inner covariance function ξ, so
//! they are represented by a single [`AffineMixture`] type whose derivatives
//! follow from the chain rule exactly.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible degree; bounds the tensor memory of sampled models.
pub const MAX_DEGREE: usize = 16;

/// Slack allowed on the `[-1, 1]` domain check to absorb rounding.
const DOMAIN_SLACK: f64 = 1e-12;

/// A covariance function t ↦ ξ(t) with derivatives of every order.
///
/// Implementors must be cheap to evaluate; the variational solvers call
/// `derivative` millions of times.
pub trait Covariance: Send + Sync + Debug {
    /// The `order`-th derivative at `t` (order 0 is the value).
    fn derivative(&self, t: f64, order: usize) -> f64;

    /// ξ(t).
    fn value(&self, t: f64) -> f64 {
        self.derivative(t, 0)
    }
    /// ξ′(t).
    fn d1(&self, t: f64) -> f64 {
        self.derivative(t, 1)
    }
    /// ξ″(t).
    fn d2(&self, t: f64) -> f64 {
        self.derivative(t, 2)
    }
    /// ξ(b) − ξ(a); implementors override this to avoid cancellation when
    /// b − a is tiny.
    fn increment(&self, a: f64, b: f64) -> f64 {
        self.value(b) - self.value(a)
    }
}

impl<T: Covariance + ?Sized> Covariance for Arc<T> {
    fn derivative(&self, t: f64, order: usize) -> f64 {
        (**self).derivative(t, order)
    }
    fn increment(&self, a: f64, b: f64) -> f64 {
        (**self).increment(a, b)
    }
}

impl<T: Covariance + ?Sized> Covariance for &T {
    fn derivative(&self, t: f64, order: usize) -> f64 {
        (**self).derivative(t, order)
    }
    fn increment(&self, a: f64, b: f64) -> f64 {
        (**self).increment(a, b)
    }
}

/// A finite mixture ξ(t) = Σ_{p=1}^P γ_p² t^p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    /// γ_1, …, γ_P (index 0 holds the degree-1 weight).
    gammas: Vec<f64>,
}

#[derive(Deserialize)]
struct MixtureFile {
    gammas: Vec<f64>,
}

impl Mixture {
    /// Builds a mixture from γ_1, …, γ_P, rejecting negative or non-finite
    /// weights and degrees above [`MAX_DEGREE`].  Trailing zeros are dropped.
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if let Some((i, g)) = gammas.iter().enumerate().find(|(_, g)| !g.is_finite() || **g < 0.0) {
            return Err(Error::Invalid(format!("gamma_{} = {g} must be finite and nonnegative", i + 1)));
        }
        let mut gammas = gammas;
        while gammas.last() == Some(&0.0) {
            gammas.pop();
        }
        if gammas.len() > MAX_DEGREE {
            return Err(Error::Invalid(format!("degree {} exceeds the maximum supported degree {MAX_DEGREE}", gammas.len())));
        }
        Ok(Mixture { gammas })
    }

    /// Mixture with a single nonzero weight γ_p = `gamma`.
    pub fn pure(p: usize, gamma: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::Invalid("degrees start at 1".into()));
        }
        let mut g = vec![0.0; p];
        g[p - 1] = gamma;
        Mixture::new(g)
    }

    /// Parses the JSON file format `{"gammas": [g1, g2, ...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let f: MixtureFile = serde_json::from_str(text)?;
        Mixture::new(f.gammas)
    }

    /// Reads a JSON mixture file from disk.
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Mixture::from_json(&text)
    }

    /// γ_1, …, γ_P.
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// γ_p (zero beyond the stored degree).
    pub fn gamma(&self, p: usize) -> f64 {
        if p == 0 {
            0.0
        } else {
            self.gammas.get(p - 1).copied().unwrap_or(0.0)
        }
    }

    /// Highest degree with a nonzero weight (0 for the null mixture).
    pub fn degree(&self) -> usize {
        self.gammas.len()
    }

    /// Degrees carrying a nonzero weight.
    pub fn support(&self) -> Vec<usize> {
        (1..=self.degree()).filter(|&p| self.gamma(p) > 0.0).collect()
    }

    /// True when exactly one degree carries weight.
    pub fn is_pure(&self) -> bool {
        self.support().len() == 1
    }

    /// True when no degree carries weight (ξ ≡ 0).
    pub fn is_null(&self) -> bool {
        self.support().is_empty()
    }

    /// ξ, ξ′ or ξ″ at `t` with the domain check `t ∈ [-1, 1]`.
    pub fn xi(&self, t: f64, order: usize) -> Result<f64> {
        if !t.is_finite() || t.abs() > 1.0 + DOMAIN_SLACK {
            return Err(Error::Domain(format!("xi evaluated at t = {t}, outside [-1, 1]")));
        }
        Ok(self.derivative(t, order))
    }

    /// ξ^{γ1←h}: the same mixture with the external-field weight replaced by `h`.
    pub fn replace_field(&self, h: f64) -> Result<Self> {
        if !(h >= 0.0) || !h.is_finite() {
            return Err(Error::Domain(format!("field weight h = {h} must be nonnegative")));
        }
        let mut g = self.gammas.clone();
        if g.is_empty() {
            g.push(0.0);
        }
        g[0] = h;
        Mixture::new(g)
    }

    /// For a pure mixture γ_p t^p, adds the degree p+1 weight ι·γ_p, i.e. the
    /// term ι²γ_p² t^{p+1}, which makes the Kac–Rice covariances
    /// non-degenerate.  Non-pure mixtures are returned unchanged.
    pub fn perturbed(&self, iota: f64) -> Result<Self> {
        if !self.is_pure() {
            return Ok(self.clone());
        }
        let p = self.support()[0];
        let mut g = self.gammas.clone();
        g.resize(p + 1, 0.0);
        g[p] = iota * self.gamma(p);
        Mixture::new(g)
    }
}

impl Covariance for Mixture {
    fn derivative(&self, t: f64, order: usize) -> f64 {
        // Horner evaluation of Σ_p γ_p² p!/(p−order)! t^{p−order}.
        let mut acc = 0.0;
        for p in (order.max(1)..=self.gammas.len()).rev() {
            let mut c = self.gammas[p - 1] * self.gammas[p - 1];
            for k in 0..order {
                c *= (p - k) as f64;
            }
            acc = acc * t + c;
        }
        // Degrees are consecutive, so the loop is plain Horner in t; the
        // lowest power present is t^{max(1,order)−order}.
        if order == 0 {
            acc * t
        } else {
            acc
        }
    }

    fn increment(&self, a: f64, b: f64) -> f64 {
        // b^p − a^p = (b − a) Σ_{k<p} b^{p−1−k} a^k, accumulated by degree
        let d = b - a;
        let mut s = 1.0; // Σ_{k<p} b^{p−1−k} a^k for the current p
        let mut ap = a; // a^p
        let mut total = 0.0;
        for (i, g) in self.gammas.iter().enumerate() {
            if i > 0 {
                s = b * s + ap;
                ap *= a;
            }
            total += g * g * s;
        }
        d * total
    }
}

/// A covariance of the form t ↦ ξ(a + b t) − c − l t.
///
/// Band restrictions, sub-models and the root model are all instances.  The
/// additive constant `c` and linear coefficient `l` only affect order 0 and
/// order 1 respectively; higher derivatives are `bⁿ ξ⁽ⁿ⁾(a + b t)`.
#[derive(Debug, Clone)]
pub struct AffineMixture {
    inner: Arc<dyn Covariance>,
    shift: f64,
    scale: f64,
    constant: f64,
    linear: f64,
}

impl AffineMixture {
    /// t ↦ inner(shift + scale·t) − constant − linear·t.
    pub fn new(inner: Arc<dyn Covariance>, shift: f64, scale: f64, constant: f64, linear: f64) -> Self {
        AffineMixture { inner, shift, scale, constant, linear }
    }

    /// The shift parameter `a`.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// The scale parameter `b`.
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl Covariance for AffineMixture {
    fn derivative(&self, t: f64, order: usize) -> f64 {
        let s = self.shift + self.scale * t;
        let base = self.inner.derivative(s, order) * self.scale.powi(order as i32);
        match order {
            0 => base - self.constant - self.linear * t,
            1 => base - self.linear,
            _ => base,
        }
    }

    fn increment(&self, a: f64, b: f64) -> f64 {
        let (sa, sb) = (self.shift + self.scale * a, self.shift + self.scale * b);
        self.inner.increment(sa, sb) - self.linear * (b - a)
    }
}

fn check_band_q(q: f64) -> Result<()> {
    if !q.is_finite() || q.abs() >= 1.0 {
        return Err(Error::Domain(format!("band overlap q = {q} must satisfy |q| < 1")));
    }
    Ok(())
}

/// The band mixture ξ̃_q(t) = ξ(q² + (1−q²)t) − ξ(q)²/ξ(1).
///
/// This is the covariance of the band process around a point, conditioned on
/// the energy at that point.
pub fn band_mixture<C: Covariance + Clone + 'static>(m: &C, q: f64) -> Result<AffineMixture> {
    check_band_q(q)?;
    let x1 = m.value(1.0);
    if !(x1 > 0.0) {
        return Err(Error::Domain("band mixture requires xi(1) > 0".into()));
    }
    let xq = m.value(q);
    Ok(AffineMixture::new(Arc::new(m.clone()), q * q, 1.0 - q * q, xq * xq / x1, 0.0))
}

/// The gradient-conditioned band mixture
/// t ↦ ξ(q² + (1−q²)t) − (1−q²)ξ′(q)²t/ξ′(1).
///
/// The additive constant of the conditional covariance is dropped, so only
/// derivatives of the result are meaningful.
pub fn band_mixture_grad<C: Covariance + Clone + 'static>(m: &C, q: f64) -> Result<AffineMixture> {
    check_band_q(q)?;
    let d1 = m.d1(1.0);
    if !(d1 > 0.0) {
        return Err(Error::Domain("gradient band mixture requires xi'(1) > 0".into()));
    }
    let dq = m.d1(q);
    let b = 1.0 - q * q;
    Ok(AffineMixture::new(Arc::new(m.clone()), q * q, b, 0.0, b * dq * dq / d1))
}

/// The interval sub-model
/// ξ_d(x) = ξ(q_lo + (q_hi−q_lo)x) − ξ(q_lo) − ξ′(q_lo)(q_hi−q_lo)x.
pub fn submodel<C: Covariance + Clone + 'static>(m: &C, q_lo: f64, q_hi: f64) -> Result<AffineMixture> {
    if !(q_lo >= 0.0 && q_lo < q_hi && q_hi <= 1.0) {
        return Err(Error::Domain(format!("sub-model interval ({q_lo}, {q_hi}) must satisfy 0 <= q_lo < q_hi <= 1")));
    }
    let w = q_hi - q_lo;
    Ok(AffineMixture::new(Arc::new(m.clone()), q_lo, w, m.value(q_lo), m.d1(q_lo) * w))
}

/// The root sub-model ξ_{−1}(x) = ξ(q_0 x).
pub fn submodel_root<C: Covariance + Clone + 'static>(m: &C, q0: f64) -> Result<AffineMixture> {
    if !(q0 > 0.0 && q0 <= 1.0) {
        return Err(Error::Domain(format!("root sub-model needs q_0 in (0, 1], got {q0}")));
    }
    Ok(AffineMixture::new(Arc::new(m.clone()), 0.0, q0, 0.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(g: &[f64]) -> Mixture {
        Mixture::new(g.to_vec()).unwrap()
    }

    /// Independent oracle: expand the polynomial term by term.
    fn naive(gammas: &[f64], t: f64, order: usize) -> f64 {
        let mut s = 0.0;
        for (i, g) in gammas.iter().enumerate() {
            let p = i + 1;
            if p < order {
                continue;
            }
            let mut c = g * g;
            for k in 0..order {
                c *= (p - k) as f64;
            }
            s += c * t.powi((p - order) as i32);
        }
        s
    }

    #[test]
    fn monomial_examples() {
        assert_eq!(m(&[0.0, 0.0, 1.0]).xi(1.0, 1).unwrap(), 3.0);
        assert_eq!(m(&[0.0, 1.0]).xi(0.5, 0).unwrap(), 0.25);
        assert_eq!(m(&[0.0, 0.0, 1.0, 1.0]).xi(1.0, 2).unwrap(), 18.0);
    }

    #[test]
    fn parse_and_validation() {
        let mm = Mixture::from_json(r#"{"gammas": [0.5, 0, 1]}"#).unwrap();
        assert_eq!(mm.gamma(1), 0.5);
        assert_eq!(mm.gamma(3), 1.0);
        assert_eq!(mm.degree(), 3);
        assert!(Mixture::from_json(r#"{"gammas": [-1]}"#).is_err());
        assert!(Mixture::new(vec![1.0; 17]).is_err());
        assert!(Mixture::new(vec![1.0; 16]).is_ok());
        assert!(Mixture::from_json(r#"{"weights": [1]}"#).is_err());
        assert!(m(&[0.0, 1.0]).xi(1.5, 0).is_err());
    }

    #[test]
    fn band_examples() {
        let q2 = m(&[0.0, 1.0]);
        let b = band_mixture(&q2, 0.5).unwrap();
        assert!((b.value(1.0) - 0.9375).abs() < 1e-15);
        // q = 0 without field reproduces ξ.
        let mix = m(&[0.0, 0.7, 1.0, 0.3]);
        let b0 = band_mixture(&mix, 0.0).unwrap();
        for &t in &[0.0, 0.3, 1.0] {
            for o in 0..3 {
                assert!((b0.derivative(t, o) - mix.derivative(t, o)).abs() < 1e-14);
            }
        }
        let q3 = m(&[0.0, 0.0, 1.0]);
        let g = band_mixture_grad(&q3, 0.5).unwrap();
        let expect = 0.75 * 3.0 - 0.75 * 0.75f64.powi(2) / 3.0;
        assert!((g.d1(1.0) - expect).abs() < 1e-14);
        let h = 1e-5;
        let fd = (g.value(1.0 + h) - g.value(1.0 - h)) / (2.0 * h);
        assert!((fd - expect).abs() < 1e-8);
        assert!(band_mixture(&q3, 1.0).is_err());
    }

    #[test]
    fn submodel_examples() {
        let q2 = m(&[0.0, 1.0]);
        let s = submodel(&q2, 0.0, 1.0).unwrap();
        for &t in &[0.0, 0.4, 1.0] {
            assert!((s.value(t) - q2.value(t)).abs() < 1e-15);
        }
        let q3 = m(&[0.0, 0.0, 1.0]);
        let s = submodel(&q3, 0.5, 1.0).unwrap();
        assert!((s.value(1.0) - 0.5).abs() < 1e-15);
        assert!(submodel(&q3, 0.5, 0.5).is_err());
        let r = submodel_root(&q3, 0.5).unwrap();
        assert!((r.value(1.0) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn replace_field_examples() {
        assert_eq!(m(&[1.0, 1.0]).replace_field(0.0).unwrap().gammas(), &[0.0, 1.0]);
        let r = m(&[0.0, 0.0, 1.0]).replace_field(2.0).unwrap();
        for &t in &[0.0, 0.3, 1.0] {
            assert!((r.value(t) - (4.0 * t + t * t * t)).abs() < 1e-15);
        }
        let base = m(&[0.3, 1.0, 0.5]);
        assert_eq!(base.replace_field(0.7).unwrap().replace_field(1.1).unwrap(), base.replace_field(1.1).unwrap());
    }

    #[test]
    fn telescoping_over_a_tiling() {
        let mix = m(&[0.2, 0.8, 1.0, 0.4]);
        let qs = [0.2, 0.45, 0.7, 1.0];
        let root = submodel_root(&mix, qs[0]).unwrap();
        let mut lhs = root.value(1.0);
        let mut lin = 0.0;
        for w in qs.windows(2) {
            lhs += submodel(&mix, w[0], w[1]).unwrap().value(1.0);
            lin += mix.d1(w[0]) * (w[1] - w[0]);
        }
        assert!((lhs - (mix.value(1.0) - lin)).abs() < 1e-13);
    }

    #[test]
    fn perturbation_only_touches_pure_models() {
        let p = m(&[0.0, 0.0, 2.0]).perturbed(1e-3).unwrap();
        assert_eq!(p.degree(), 4);
        assert!((p.gamma(4) - 2e-3).abs() < 1e-18);
        let q = m(&[0.0, 1.0, 1.0]);
        assert_eq!(q.perturbed(1e-3).unwrap(), q);
    }

    fn gammas_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.5, 1..8)
    }

    proptest! {
        #[test]
        fn horner_matches_expansion(g in gammas_strategy(), t in -1.0f64..1.0, order in 0usize..5) {
            let mix = Mixture::new(g.clone()).unwrap();
            let a = mix.derivative(t, order);
            let b = naive(&g, t, order);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }

        #[test]
        fn increments_match_value_differences(g in gammas_strategy(), a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let mix = Mixture::new(g.clone()).unwrap();
            let direct = naive(&g, b, 0) - naive(&g, a, 0);
            prop_assert!((mix.increment(a, b) - direct).abs() <= 1e-12 * (1.0 + mix.value(1.0)));
            let s = submodel(&mix, 0.2, 0.7).unwrap();
            prop_assert!((s.increment(a.abs(), b.abs()) - (s.value(b.abs()) - s.value(a.abs()))).abs() <= 1e-12 * (1.0 + mix.value(1.0)));
        }

        #[test]
        fn derivatives_match_finite_differences(g in gammas_strategy(), t in 0.05f64..0.95) {
            let mix = Mixture::new(g).unwrap();
            let h = 1e-5;
            for order in 0..2 {
                let fd = (mix.derivative(t + h, order) - mix.derivative(t - h, order)) / (2.0 * h);
                let an = mix.derivative(t, order + 1);
                prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3));
            }
        }

        #[test]
        fn derived_mixtures_match_finite_differences(g in gammas_strategy(), q in -0.9f64..0.9, t in 0.05f64..0.95) {
            let mix = Mixture::new(g).unwrap();
            prop_assume!(mix.value(1.0) > 1e-3);
            let lo = q.abs() * 0.5;
            let derived: Vec<AffineMixture> = vec![
                band_mixture(&mix, q).unwrap(),
                band_mixture_grad(&mix, q).unwrap(),
                submodel(&mix, lo, lo + 0.4).unwrap(),
                submodel_root(&mix, 0.3 + lo).unwrap(),
            ];
            let h = 1e-5;
            for d in &derived {
                for order in 0..2 {
                    let fd = (d.derivative(t + h, order) - d.derivative(t - h, order)) / (2.0 * h);
                    let an = d.derivative(t, order + 1);
                    prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3));
                }
            }
        }

        #[test]
        fn band_value_at_zero_is_nonnegative(g in gammas_strategy()) {
            let mix = Mixture::new(g).unwrap();
            prop_assume!(mix.value(1.0) > 1e-6);
            for i in 0..=40 {
                let q = -0.975 + 1.95 * (i as f64) / 40.0;
                let b = band_mixture(&mix, q).unwrap();
                prop_assert!(b.value(0.0) >= -1e-12 * mix.value(1.0));
            }
        }

        #[test]
        fn submodels_vanish_to_first_order(g in gammas_strategy(), lo in 0.0f64..0.8, w in 0.05f64..0.2) {
            let mix = Mixture::new(g).unwrap();
            let s = submodel(&mix, lo, lo + w).unwrap();
            prop_assert!(s.value(0.0).abs() < 1e-13);
            prop_assert!(s.d1(0.0).abs() < 1e-13);
        }

        #[test]
        fn mixture_is_monotone_on_unit_interval(g in gammas_strategy(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let mix = Mixture::new(g).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            for order in 0..3 {
                prop_assert!(mix.derivative(lo, order) >= 0.0);
                prop_assert!(mix.derivative(lo, order) <= mix.derivative(hi, order) + 1e-14);
            }
        }
    }
}
