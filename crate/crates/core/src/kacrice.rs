//! Kac–Rice complexity functions and the ground-state large-deviation rate.
//!
//! The one-point complexity Θ(E, R) is the exponential growth rate of the
//! expected number of critical points with energy density E and radial
//! derivative density R; the two-point function Ξ counts pairs at overlap q.
//! Both combine a Gaussian density term (through the covariance matrices Σ
//! and Σ_q of values and radial derivatives) with the semicircle
//! log-potential κ, which accounts for the Hessian determinant.
//!
//! For strictly 1RSB mixtures the maximiser R₊(E) of Θ(E, ·) over the
//! admissible range R ≥ 2√ξ″(1) yields the rate function −Θ₊(E) of the
//! upper tail of the ground-state energy.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{band_mixture, Covariance, Mixture};
use crate::variational::{minimize_zt, onersb_params, OneRSBParams, SolverOptions};

/// Largest condition number accepted for Σ and Σ_q.
pub const MAX_CONDITION: f64 = 1e12;

/// Default coefficient ι of the perturbation γ_{p+1} = ι γ_p applied to pure
/// mixtures, whose covariance matrices are singular.
pub const DEFAULT_IOTA: f64 = 1e-3;

/// Log-potential of the semicircle law on [−2, 2]:
/// κ(x) = ∫ log|λ − x| ρ(dλ).
pub fn kappa(x: f64) -> f64 {
    let ax = x.abs();
    let base = 0.25 * x * x - 0.5;
    if ax <= 2.0 {
        return base;
    }
    let s = (x * x - 4.0).sqrt();
    base - (0.25 * ax * s - ((s + ax) / 2.0).ln())
}

/// Derivative of [`kappa`]: x/2 inside the bulk, ½(x − sign(x)√(x²−4)) outside.
pub fn kappa_prime(x: f64) -> f64 {
    if x.abs() <= 2.0 {
        return 0.5 * x;
    }
    let s = (x * x - 4.0).sqrt();
    0.5 * (x - x.signum() * s)
}

/// A value of the one-point complexity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityPoint {
    /// Energy density.
    pub e: f64,
    /// Radial derivative density.
    pub r: f64,
    /// Θ(E, R).
    pub theta: f64,
}

/// A row of the rate function table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    /// Energy density E ≥ E_0.
    pub e: f64,
    /// R₊(E).
    pub r_star: f64,
    /// Θ₊(E) = Θ(E, R₊(E)).
    pub theta_star: f64,
}

/// The split Θ(E, R) = M(R) − K₁(E − K₂R)² of the one-point complexity into
/// its maximum over E and a quadratic penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaSplit {
    /// Curvature K₁ = (Σ⁻¹)₁₁ / 2.
    pub k1: f64,
    /// Slope K₂ = −(Σ⁻¹)₁₂ / (Σ⁻¹)₁₁ of the ridge E = K₂R.
    pub k2: f64,
}

/// Condition number of a symmetric positive 2×2 matrix [[a, b], [b, c]];
/// infinite if it is not positive definite.
fn cond2(a: f64, b: f64, c: f64) -> f64 {
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (lo, hi) = (mean - rad, mean + rad);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Complexity functions of a fixed mixture, with Σ⁻¹ precomputed.
#[derive(Debug, Clone)]
pub struct KacRice<C: Covariance> {
    xi: C,
    x0: f64,
    x1: f64,
    x2: f64,
    /// Σ⁻¹ = [[a, b], [b, c]].
    inv: (f64, f64, f64),
}

impl KacRice<Mixture> {
    /// Complexity functions of `m`; if `m` is pure and `perturb` is set,
    /// γ_{p+1} = ι γ_p is added first (with ι = [`DEFAULT_IOTA`]).
    pub fn for_mixture(m: &Mixture, perturb: bool) -> Result<Self> {
        if perturb && m.is_pure() {
            KacRice::new(m.perturbed(DEFAULT_IOTA)?)
        } else {
            KacRice::new(m.clone())
        }
    }
}

impl<C: Covariance> KacRice<C> {
    /// Builds Σ = [[ξ(1), ξ′(1)], [ξ′(1), ξ′(1)+ξ″(1)]] and inverts it.
    ///
    /// Fails with [`Error::Degenerate`] if Σ is (numerically) singular, which
    /// is the case for pure mixtures.
    pub fn new(xi: C) -> Result<Self> {
        let (x0, x1, x2) = (xi.value(1.0), xi.d1(1.0), xi.d2(1.0));
        if !(x1 > 0.0 && x2 > 0.0) {
            return Err(Error::Domain("complexity needs xi'(1) > 0 and xi''(1) > 0".into()));
        }
        let (s11, s12, s22) = (x0, x1, x1 + x2);
        let cond = cond2(s11, s12, s22);
        if !(cond <= MAX_CONDITION) {
            return Err(Error::Degenerate(format!("covariance of (E, R) has condition number {cond:.3e}")));
        }
        let det = s11 * s22 - s12 * s12;
        Ok(KacRice { xi, x0, x1, x2, inv: (s22 / det, -s12 / det, s11 / det) })
    }

    /// The underlying covariance function.
    pub fn covariance(&self) -> &C {
        &self.xi
    }

    /// The quadratic form ⟨(E, R), Σ⁻¹ (E, R)⟩.
    fn quad(&self, e: f64, r: f64) -> f64 {
        let (a, b, c) = self.inv;
        a * e * e + 2.0 * b * e * r + c * r * r
    }

    /// Θ(E, R) = ½ + ½log(ξ″(1)/ξ′(1)) − ½⟨(E,R), Σ⁻¹(E,R)⟩ + κ(R/√ξ″(1)).
    pub fn theta(&self, e: f64, r: f64) -> f64 {
        0.5 + 0.5 * (self.x2 / self.x1).ln() - 0.5 * self.quad(e, r) + kappa(r / self.x2.sqrt())
    }

    /// ∂Θ/∂R in closed form.
    pub fn theta_dr(&self, e: f64, r: f64) -> f64 {
        let (_, b, c) = self.inv;
        let s = self.x2.sqrt();
        -(b * e + c * r) + kappa_prime(r / s) / s
    }

    /// Θ(E, R) packaged with its arguments.
    pub fn point(&self, e: f64, r: f64) -> ComplexityPoint {
        ComplexityPoint { e, r, theta: self.theta(e, r) }
    }

    /// The split Θ = M(R) − K₁(E − K₂R)².
    pub fn split(&self) -> ThetaSplit {
        let (a, b, _) = self.inv;
        ThetaSplit { k1: 0.5 * a, k2: -b / a }
    }

    /// M(R) = max_E Θ(E, R) = Θ(K₂R, R).
    pub fn ridge(&self, r: f64) -> f64 {
        let k2 = self.split().k2;
        self.theta(k2 * r, r)
    }

    /// M′(R) in closed form.
    pub fn ridge_dr(&self, r: f64) -> f64 {
        let (a, b, c) = self.inv;
        let s = self.x2.sqrt();
        -(c - b * b / a) * r + kappa_prime(r / s) / s
    }

    /// The 4×4 covariance Σ_q of (E₁, E₂, R₁, R₂) at two points of overlap q.
    pub fn sigma_q(&self, q: f64) -> Matrix4<f64> {
        let (xq, dq, ddq) = (self.xi.value(q), self.xi.d1(q), self.xi.d2(q));
        let (x0, x1, x2) = (self.x0, self.x1, self.x2);
        let cross = q * dq;
        let rr = q * dq + q * q * ddq;
        Matrix4::new(
            x0,
            xq,
            x1,
            cross, //
            xq,
            x0,
            cross,
            x1, //
            x1,
            cross,
            x1 + x2,
            rr, //
            cross,
            x1,
            rr,
            x1 + x2,
        )
    }

    /// Two-point complexity
    /// Ξ(q, E₁, E₂, R₁, R₂) = 1 + ½log((1−q²)ξ″(1)²/(ξ′(1)²−ξ′(q)²))
    /// − ½⟨v, Σ_q⁻¹ v⟩ + κ(R₁/√ξ″(1)) + κ(R₂/√ξ″(1)).
    pub fn xi_two(&self, q: f64, e1: f64, e2: f64, r1: f64, r2: f64) -> Result<f64> {
        if !(q.abs() < 1.0) {
            return Err(Error::Domain(format!("two-point complexity needs |q| < 1, got {q}")));
        }
        let dq = self.xi.d1(q);
        let gap = self.x1 * self.x1 - dq * dq;
        if !(gap > 0.0) {
            return Err(Error::Domain("two-point complexity needs xi'(|q|) < xi'(1)".into()));
        }
        let sq = self.sigma_q(q);
        let eig = SymmetricEigen::new(sq);
        let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        if !(lo > 0.0 && hi / lo <= MAX_CONDITION) {
            return Err(Error::Degenerate(format!("two-point covariance at q = {q} is near singular")));
        }
        let inv = sq.try_inverse().ok_or_else(|| Error::Degenerate(format!("two-point covariance at q = {q} is singular")))?;
        let v = Vector4::new(e1, e2, r1, r2);
        let quad = v.dot(&(inv * v));
        let s = self.x2.sqrt();
        Ok(1.0 + 0.5 * ((1.0 - q * q) * self.x2 * self.x2 / gap).ln() - 0.5 * quad + kappa(r1 / s) + kappa(r2 / s))
    }

    /// Regression coefficients v^q = Σ⁻¹ (ξ(q), qξ′(q)) of the band
    /// conditioning, returned as (v_E, v_R).
    pub fn v_q(&self, q: f64) -> (f64, f64) {
        let (a, b, c) = self.inv;
        let (r1, r2) = (self.xi.value(q), q * self.xi.d1(q));
        (a * r1 + b * r2, b * r1 + c * r2)
    }

    /// Lower end 2√ξ″(1) of the admissible radial range.
    pub fn r_min(&self) -> f64 {
        2.0 * self.x2.sqrt()
    }

    /// R₊(E) = argmax_{R ≥ 2√ξ″(1)} Θ(E, R), for any real E.
    ///
    /// Θ(E, ·) is strictly concave, so the maximiser is the root of the
    /// decreasing function ∂Θ/∂R, or the left end when ∂Θ/∂R < 0 there.  The
    /// bracket is doubled from R_0 + 4 until the derivative turns negative.
    pub fn r_star_unchecked(&self, e: f64, r0: f64) -> Result<f64> {
        let lo = self.r_min();
        if self.theta_dr(e, lo) <= 0.0 {
            return Ok(lo);
        }
        let mut hi = (r0 + 4.0).max(lo + 1.0);
        while self.theta_dr(e, hi) > 0.0 {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Numerical("radial maximiser bracket diverged".into()));
            }
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.theta_dr(e, mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }
}

/// Rate-function evaluator for a strictly 1RSB mixture: the complexity
/// functions together with the one-step parameters (E_0, R_0).
#[derive(Debug, Clone)]
pub struct RateFunction<C: Covariance> {
    /// Complexity functions of the mixture.
    pub kr: KacRice<C>,
    /// One-step parameters; `params.e0` is the left end of the domain.
    pub params: OneRSBParams,
}

impl<C: Covariance> RateFunction<C> {
    /// Builds the evaluator; fails if the one-step parameters do not exist
    /// or Σ is singular.
    pub fn new(xi: C) -> Result<Self> {
        let params = onersb_params(&xi)?;
        Ok(RateFunction { kr: KacRice::new(xi)?, params })
    }

    fn check(&self, e: f64) -> Result<()> {
        let e0 = self.params.e0;
        if e < e0 - 1e-12 * (1.0 + e0.abs()) {
            return Err(Error::Domain(format!("rate function is defined for E >= E0 = {e0}, got {e}")));
        }
        Ok(())
    }

    /// R₊(E) for E ≥ E_0.
    pub fn r_star(&self, e: f64) -> Result<f64> {
        self.check(e)?;
        self.kr.r_star_unchecked(e, self.params.r0)
    }

    /// Θ₊(E) = Θ(E, R₊(E)) for E ≥ E_0.
    pub fn theta_star(&self, e: f64) -> Result<f64> {
        let r = self.r_star(e)?;
        Ok(self.kr.theta(e, r))
    }

    /// Both quantities at E.
    pub fn point(&self, e: f64) -> Result<RatePoint> {
        let r_star = self.r_star(e)?;
        Ok(RatePoint { e, r_star, theta_star: self.kr.theta(e, r_star) })
    }

    /// Rows (E, R₊, Θ₊) for every E in `grid`, evaluated in parallel.
    pub fn curve(&self, grid: &[f64]) -> Result<Vec<RatePoint>>
    where
        C: Sync,
    {
        grid.par_iter().map(|&e| self.point(e)).collect()
    }
}

/// Θ(E, R) of a mixture.
pub fn theta(m: &Mixture, e: f64, r: f64) -> Result<f64> {
    Ok(KacRice::new(m.clone())?.theta(e, r))
}

/// Ξ(q, E₁, E₂, R₁, R₂) of a mixture.
pub fn xi_two(m: &Mixture, q: f64, e1: f64, e2: f64, r1: f64, r2: f64) -> Result<f64> {
    KacRice::new(m.clone())?.xi_two(q, e1, e2, r1, r2)
}

/// Regression vector (v^q_E, v^q_R) of a mixture.
pub fn v_q(m: &Mixture, q: f64) -> Result<(f64, f64)> {
    Ok(KacRice::new(m.clone())?.v_q(q))
}

/// R₊(E) of a strictly 1RSB mixture.
pub fn r_star(m: &Mixture, e: f64) -> Result<f64> {
    RateFunction::new(m.clone())?.r_star(e)
}

/// Θ₊(E) of a strictly 1RSB mixture.
pub fn theta_star(m: &Mixture, e: f64) -> Result<f64> {
    RateFunction::new(m.clone())?.theta_star(e)
}

/// The rate table (E, R₊, Θ₊) on an energy grid.
pub fn rate_curve(m: &Mixture, grid: &[f64]) -> Result<Vec<RatePoint>> {
    RateFunction::new(m.clone())?.curve(grid)
}

/// Options of the tilted ground-state envelope.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TiltOptions {
    /// Number of uniform q-points in [0, 1].
    pub grid: usize,
    /// Rounds of local refinement around the best grid point.
    pub rounds: usize,
    /// Points per refinement round.
    pub refine_points: usize,
    /// Options of the inner zero-temperature solves.
    pub solver: SolverOptions,
}

impl Default for TiltOptions {
    fn default() -> Self {
        TiltOptions { grid: 201, rounds: 3, refine_points: 11, solver: SolverOptions::fast() }
    }
}

/// The conditional ground state GS(x) = sup_{0≤q≤1} {𝒬(ξ̃_q) + q^p x} on
/// the event that the coefficient g_{1…1} of degree p equals x√N.
///
/// The band values 𝒬(ξ̃_q) on the uniform grid are computed once (in
/// parallel) and reused for every x; the refinement rounds solve additional
/// band models near the maximising grid point.
#[derive(Debug, Clone)]
pub struct TiltedEnvelope {
    m: Mixture,
    p: usize,
    opts: TiltOptions,
    grid: Vec<(f64, f64)>,
}

/// 𝒬(ξ̃_q), with the limit 0 at q = 1 where the band shrinks to a point.
fn band_ground_state(m: &Mixture, q: f64, solver: &SolverOptions) -> Result<f64> {
    if q >= 1.0 {
        return Ok(0.0);
    }
    let band = band_mixture(m, q)?;
    if !(band.d1(1.0) > 0.0) {
        return Ok(0.0);
    }
    Ok(minimize_zt(&band, solver)?.value)
}

impl TiltedEnvelope {
    /// Tabulates 𝒬(ξ̃_q) for the tilt of degree `p`; requires γ_p > 0 and
    /// γ_1 = 0.
    pub fn new(m: &Mixture, p: usize, opts: TiltOptions) -> Result<Self> {
        if p == 0 || m.gamma(p) <= 0.0 {
            return Err(Error::Domain(format!("tilted ground state needs gamma_{p} > 0")));
        }
        if m.gamma(1) != 0.0 {
            return Err(Error::Domain("tilted ground state needs gamma_1 = 0".into()));
        }
        if opts.grid < 2 {
            return Err(Error::Invalid("tilt grid needs at least two points".into()));
        }
        let n = opts.grid;
        let grid = (0..n)
            .into_par_iter()
            .map(|i| {
                let q = i as f64 / (n - 1) as f64;
                band_ground_state(m, q, &opts.solver).map(|v| (q, v))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TiltedEnvelope { m: m.clone(), p, opts, grid })
    }

    /// The tabulated pairs (q, 𝒬(ξ̃_q)).
    pub fn table(&self) -> &[(f64, f64)] {
        &self.grid
    }

    /// GS(x) and the maximising q.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        let p = self.p as i32;
        let obj = |q: f64, v: f64| v + q.powi(p) * x;
        let (mut bq, mut bv) = self.grid.iter().map(|&(q, v)| (q, obj(q, v))).fold((0.0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
        let mut h = 1.0 / (self.grid.len() - 1) as f64;
        for _ in 0..self.opts.rounds {
            let (lo, hi) = ((bq - h).max(0.0), (bq + h).min(1.0));
            let k = self.opts.refine_points.max(2);
            let cands = (0..k)
                .into_par_iter()
                .map(|j| {
                    let q = lo + (hi - lo) * j as f64 / (k - 1) as f64;
                    band_ground_state(&self.m, q, &self.opts.solver).map(|v| (q, obj(q, v)))
                })
                .collect::<Result<Vec<_>>>()?;
            for (q, v) in cands {
                if v > bv {
                    bq = q;
                    bv = v;
                }
            }
            h = (hi - lo) / (k - 1) as f64;
        }
        Ok((bv, bq))
    }
}

/// GS(x) for a single tilt; see [`TiltedEnvelope`].
pub fn tilted_gs(m: &Mixture, p: usize, x: f64, opts: TiltOptions) -> Result<f64> {
    Ok(TiltedEnvelope::new(m, p, opts)?.eval(x)?.0)
}
