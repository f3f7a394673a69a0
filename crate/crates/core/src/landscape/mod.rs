//! Finite-N Hamiltonians: sampling, exact derivatives, Riemannian calculus on
//! the sphere, constrained ascent, and Monte Carlo estimators of free
//! energies and band quantities.
//!
//! Optimisation always happens on a *sphere slice*
//! {c + τ : τ ⊥ n₁, …, n_m, ‖τ‖ = r}: the full sphere (c = 0, no normals), a
//! sphere of reduced radius, a band {ρ : R(ρ, σ) = q, ‖ρ‖ = √N}, or the
//! shell of children around a tree node.  One ascent routine serves all of
//! them.

mod hamiltonian;

pub use hamiltonian::{binomial, coefficient_count, Hamiltonian, DEFAULT_MEMORY_CAP};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::Covariance;
use crate::rng::task_rng;

/// A smooth objective on ℝ^N with exact derivatives.
pub trait Landscape: Sync {
    /// Ambient dimension N.
    fn dim(&self) -> usize;
    /// Objective value.
    fn value(&self, x: &[f64]) -> f64;
    /// Value and Euclidean gradient.
    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>);
    /// Euclidean Hessian.
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
}

impl Landscape for Hamiltonian {
    fn dim(&self) -> usize {
        self.n()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.eval_grad(x)
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.hess(x)
    }
}

/// Euclidean inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Normalised overlap R(σ, ρ) = ⟨σ, ρ⟩/N.
pub fn overlap(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / a.len() as f64
}

/// A point together with its squared norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    /// Coordinates.
    pub coords: Vec<f64>,
    /// ‖σ‖².
    pub norm2: f64,
}

impl SpherePoint {
    /// Wraps coordinates, recording the squared norm.
    pub fn new(coords: Vec<f64>) -> Self {
        let norm2 = dot(&coords, &coords);
        SpherePoint { coords, norm2 }
    }

    /// The origin of ℝ^N.
    pub fn origin(n: usize) -> Self {
        SpherePoint { coords: vec![0.0; n], norm2: 0.0 }
    }

    /// Radius fraction q = ‖σ‖²/N.
    pub fn radius_fraction(&self) -> f64 {
        self.norm2 / self.coords.len() as f64
    }

    /// R(σ, ρ).
    pub fn overlap(&self, other: &SpherePoint) -> f64 {
        overlap(&self.coords, &other.coords)
    }
}

/// A uniformly random point of the sphere of radius `radius` in ℝ^n.
pub fn random_sphere_point<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    let mut g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let s = radius / norm(&g);
    g.iter_mut().for_each(|v| *v *= s);
    g
}

/// The slice {c + τ : τ ⊥ normals, ‖τ‖ = radius}; `normals` are orthonormal.
#[derive(Debug, Clone)]
pub struct SphereSlice {
    /// Centre c.
    pub center: Vec<f64>,
    /// Orthonormal directions excluded from τ.
    pub normals: Vec<Vec<f64>>,
    /// ‖τ‖.
    pub radius: f64,
}

impl SphereSlice {
    /// The sphere of radius √(qN) about the origin.
    pub fn sphere(n: usize, q: f64) -> Self {
        SphereSlice { center: vec![0.0; n], normals: vec![], radius: (q * n as f64).sqrt() }
    }

    /// The band {ρ : R(ρ, σ) = q, ‖ρ‖ = √N} around the direction of σ.
    pub fn band(sigma: &[f64], q: f64) -> Result<Self> {
        if !(q.abs() < 1.0) {
            return Err(Error::Domain(format!("band overlap must satisfy |q| < 1, got {q}")));
        }
        let n = sigma.len() as f64;
        let s = norm(sigma);
        if !(s > 0.0) {
            return Err(Error::Domain("band centre must be nonzero".into()));
        }
        let unit: Vec<f64> = sigma.iter().map(|v| v / s).collect();
        let center = unit.iter().map(|v| q * n.sqrt() * v).collect();
        Ok(SphereSlice { center, normals: vec![unit], radius: ((1.0 - q * q) * n).sqrt() })
    }

    /// Points σ + τ with τ ⊥ σ and ‖τ‖² = `increment_norm2`: the children
    /// shell of a tree node at σ.
    pub fn shell(sigma: &[f64], increment_norm2: f64) -> Self {
        let s = norm(sigma);
        let normals = if s > 0.0 { vec![sigma.iter().map(|v| v / s).collect()] } else { vec![] };
        SphereSlice { center: sigma.to_vec(), normals, radius: increment_norm2.max(0.0).sqrt() }
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn remove_normals(&self, v: &mut [f64]) {
        for nrm in &self.normals {
            let c = dot(v, nrm);
            v.iter_mut().zip(nrm).for_each(|(a, b)| *a -= c * b);
        }
    }

    /// τ = x − c.
    pub fn offset(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(a, b)| a - b).collect()
    }

    /// Maps an arbitrary displacement to the slice: removes normal
    /// components and rescales to the slice radius.
    pub fn place(&self, tau: &[f64]) -> Vec<f64> {
        let mut t = tau.to_vec();
        self.remove_normals(&mut t);
        let s = norm(&t);
        let k = if s > 0.0 { self.radius / s } else { 0.0 };
        self.center.iter().zip(&t).map(|(c, v)| c + k * v).collect()
    }

    /// A uniformly random point of the slice.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let g: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.place(&g)
    }

    /// Projection of a Euclidean gradient onto the tangent space at x.
    pub fn tangent(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        let mut t = g.to_vec();
        self.remove_normals(&mut t);
        let tau = self.offset(x);
        let r2 = dot(&tau, &tau);
        if r2 > 0.0 {
            let c = dot(&t, &tau) / r2;
            t.iter_mut().zip(&tau).for_each(|(a, b)| *a -= c * b);
        }
        t
    }

    /// Retraction x ↦ place(τ + step·v).
    pub fn retract(&self, x: &[f64], v: &[f64], step: f64) -> Vec<f64> {
        let tau: Vec<f64> = self.offset(x).iter().zip(v).map(|(a, b)| a + step * b).collect();
        self.place(&tau)
    }
}

/// Options of [`ascend`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AscentOptions {
    /// Initial (and reference) step size.
    pub step: f64,
    /// Largest step size reached by step growth, as a multiple of `step`.
    pub max_step_factor: f64,
    /// Maximum number of accepted gradient steps.
    pub max_steps: usize,
    /// Stop when ‖∇_tan‖ ≤ grad_tol·√N.
    pub grad_tol: f64,
    /// Finish with Newton iterations on the slice when at a local maximum.
    pub newton: bool,
    /// Record the objective after every accepted step.
    pub record: bool,
}

impl AscentOptions {
    /// Defaults for a covariance function: step 0.1/√ξ″(1), 10⁴ steps,
    /// gradient tolerance 1e−8, Newton polish on.
    pub fn for_covariance<C: Covariance + ?Sized>(xi: &C) -> Self {
        let curv = if xi.d2(1.0) > 0.0 { xi.d2(1.0) } else { xi.d1(1.0).max(1e-12) };
        AscentOptions { step: 0.1 / curv.sqrt(), max_step_factor: 100.0, max_steps: 10_000, grad_tol: 1e-8, newton: true, record: false }
    }
}

/// Result of [`ascend`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AscentResult {
    /// Final point.
    pub point: Vec<f64>,
    /// Objective at the final point.
    pub value: f64,
    /// ‖∇_tan‖/√N at the final point.
    pub grad_norm: f64,
    /// Accepted gradient steps.
    pub iterations: usize,
    /// Accepted Newton steps.
    pub newton_steps: usize,
    /// Objective after each accepted gradient step (if recorded).
    pub trace: Vec<f64>,
}

/// Projected gradient ascent with backtracking on a sphere slice, optionally
/// finished by Newton's method on the slice.
///
/// A step is accepted only if it increases the objective; otherwise it is
/// halved.  After a success the step grows by 1.5, up to
/// `max_step_factor·step`.
pub fn ascend<L: Landscape + ?Sized>(f: &L, slice: &SphereSlice, x0: &[f64], opts: &AscentOptions) -> AscentResult {
    let n = f.dim();
    let sqrt_n = (n as f64).sqrt();
    let mut x = slice.place(&slice.offset(x0));
    let (mut val, g) = f.value_grad(&x);
    let mut gt = slice.tangent(&x, &g);
    let mut t = opts.step;
    let t_max = opts.step * opts.max_step_factor;
    let mut iterations = 0;
    let mut newton_steps = 0;
    let mut trace = Vec::new();
    let mut newton_cooldown = 0usize;
    while iterations < opts.max_steps && norm(&gt) > opts.grad_tol * sqrt_n {
        iterations += 1;
        // Close to a critical point, try a Newton step first; it is kept only
        // if it does not decrease the objective and shrinks the gradient.
        // After a failed attempt, Newton is paused for a few gradient steps.
        if newton_cooldown > 0 {
            newton_cooldown -= 1;
        } else if opts.newton && norm(&gt) < NEWTON_SWITCH * sqrt_n {
            newton_cooldown = NEWTON_COOLDOWN;
            if let Some((cand, cv, cgt)) = newton_step(f, slice, &x, &gt) {
                if cv >= val && norm(&cgt) < norm(&gt) {
                    newton_cooldown = 0;
                    x = cand;
                    val = cv;
                    gt = cgt;
                    newton_steps += 1;
                    if opts.record {
                        trace.push(val);
                    }
                    continue;
                }
            }
        }
        let mut accepted = false;
        while t > opts.step * 1e-14 {
            let cand = slice.retract(&x, &gt, t);
            let (cv, cg) = f.value_grad(&cand);
            if cv > val {
                gt = slice.tangent(&cand, &cg);
                x = cand;
                val = cv;
                accepted = true;
                t = (1.5 * t).min(t_max);
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        if opts.record {
            trace.push(val);
        }
    }
    if opts.newton {
        // Final refinement to rounding level; tiny decreases of the objective
        // (at the level of its rounding error) are tolerated here.
        for _ in 0..10 {
            let gn = norm(&gt);
            if gn <= 1e-13 * sqrt_n * (1.0 + val.abs() / n as f64) {
                break;
            }
            let Some((cand, cv, cgt)) = newton_step(f, slice, &x, &gt) else { break };
            if cv >= val - 1e-13 * (1.0 + val.abs()) && norm(&cgt) < gn {
                x = cand;
                val = cv;
                gt = cgt;
                newton_steps += 1;
            } else {
                break;
            }
        }
    }
    AscentResult { grad_norm: norm(&gt) / sqrt_n, point: x, value: val, iterations, newton_steps, trace }
}

/// Gradient level (relative to √N) below which Newton steps are attempted.
const NEWTON_SWITCH: f64 = 1e-2;

/// Gradient steps between Newton attempts after a failed one.
const NEWTON_COOLDOWN: usize = 10;

/// A Newton step on the slice: the candidate, its value and its tangential
/// gradient.
fn newton_step<L: Landscape + ?Sized>(f: &L, slice: &SphereSlice, x: &[f64], gt: &[f64]) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let d = newton_direction(f, slice, x, gt)?;
    let cand = slice.retract(x, &d, 1.0);
    let (cv, cg) = f.value_grad(&cand);
    let cgt = slice.tangent(&cand, &cg);
    Some((cand, cv, cgt))
}

/// Newton direction on the slice at a nondegenerate local maximum, or None
/// if the Riemannian Hessian is not negative definite.
fn newton_direction<L: Landscape + ?Sized>(f: &L, slice: &SphereSlice, x: &[f64], gt: &[f64]) -> Option<Vec<f64>> {
    let n = f.dim();
    let tau = slice.offset(x);
    let r = norm(&tau);
    if !(r > 0.0) {
        return None;
    }
    let (_, g) = f.value_grad(x);
    let radial = dot(&g, &tau) / (r * r);
    let mut cols: Vec<Vec<f64>> = slice.normals.clone();
    cols.push(tau.iter().map(|v| v / r).collect());
    let m = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let p = DMatrix::<f64>::identity(n, n) - &m * m.transpose();
    let h = f.hessian(x) - DMatrix::<f64>::identity(n, n) * radial;
    let a = &p * h * &p - &m * m.transpose();
    let neg = -a;
    let chol = neg.cholesky()?;
    let rhs = DVector::from_column_slice(gt);
    let d = chol.solve(&rhs);
    Some(d.iter().copied().collect())
}

/// Radial derivative, tangential gradient and Riemannian Hessian at σ.
#[derive(Debug, Clone)]
pub struct RiemannianDerivatives {
    /// ∂_rad H = ⟨σ/‖σ‖, ∇H⟩.
    pub radial: f64,
    /// ∇_sp H in the frame coordinates (length N−1).
    pub tangential: DVector<f64>,
    /// ∇²_sp H = ∇²_{T×T} H − (∂_rad/‖σ‖)·I in the frame.
    pub hess_sp: DMatrix<f64>,
    /// Orthonormal frame of σ^⊥ (N × (N−1)), the columns 2..N of the
    /// Householder reflection mapping e₁ to σ/‖σ‖.
    pub frame: DMatrix<f64>,
}

/// Householder reflection P with P e₁ = u for a unit vector u.
fn householder_to(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut v: Vec<f64> = u.iter().map(|x| -x).collect();
    v[0] += 1.0;
    let vv = dot(&v, &v);
    let mut p = DMatrix::<f64>::identity(n, n);
    if vv > 1e-300 {
        let vv2 = 2.0 / vv;
        for j in 0..n {
            for i in 0..n {
                p[(i, j)] -= vv2 * v[i] * v[j];
            }
        }
    }
    p
}

/// Riemannian derivatives at a point of the sphere S_N = {‖σ‖ = √N}.
pub fn riemannian(h: &Hamiltonian, sigma: &[f64]) -> Result<RiemannianDerivatives> {
    let n = h.n();
    let s = norm(sigma);
    if ((s * s) / n as f64 - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("point has |sigma|^2/N = {} instead of 1", s * s / n as f64)));
    }
    let u: Vec<f64> = sigma.iter().map(|v| v / s).collect();
    let p = householder_to(&u);
    let frame = p.columns(1, n - 1).into_owned();
    let g = DVector::from_vec(h.grad(sigma));
    let radial = dot(&u, g.as_slice());
    let tangential = frame.transpose() * &g;
    let hess = h.hess(sigma);
    let hess_sp = frame.transpose() * hess * &frame - DMatrix::<f64>::identity(n - 1, n - 1) * (radial / s);
    Ok(RiemannianDerivatives { radial, tangential, hess_sp, frame })
}

/// Result of [`gs_estimate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GsEstimate {
    /// The best local maximum found.
    pub point: SpherePoint,
    /// H_N(σ*)/N.
    pub energy_density: f64,
    /// ‖∇_sp H(σ*)‖/√N.
    pub grad_norm: f64,
    /// Gradient steps of the winning restart.
    pub iterations: usize,
    /// Energy densities reached by every restart.
    pub restarts: Vec<f64>,
}

/// Ascent from `restarts` random starts on a sphere slice; returns the best.
pub fn best_ascent<L: Landscape + ?Sized>(f: &L, slice: &SphereSlice, restarts: usize, opts: &AscentOptions, seed: u64, label: &str) -> Vec<AscentResult> {
    (0..restarts.max(1))
        .into_par_iter()
        .map(|i| {
            let mut rng = task_rng(seed, label, i as u64);
            let x0 = slice.random_point(&mut rng);
            ascend(f, slice, &x0, opts)
        })
        .collect()
}

/// Multi-start projected gradient ascent for GS_N = max_{S_N} H_N/N.
pub fn gs_estimate(h: &Hamiltonian, restarts: usize, steps: usize, seed: u64) -> Result<GsEstimate> {
    if restarts == 0 {
        return Err(Error::Invalid("gs_estimate needs at least one restart".into()));
    }
    let n = h.n() as f64;
    let opts = AscentOptions { max_steps: steps, ..AscentOptions::for_covariance(h.mixture()) };
    let runs = best_ascent(h, &SphereSlice::sphere(h.n(), 1.0), restarts, &opts, seed, "gs-restart");
    let energies: Vec<f64> = runs.iter().map(|r| r.value / n).collect();
    let best = runs.into_iter().fold(None::<AscentResult>, |acc, r| match acc {
        Some(a) if a.value >= r.value => Some(a),
        _ => Some(r),
    });
    let best = best.expect("at least one restart");
    Ok(GsEstimate {
        energy_density: best.value / n,
        grad_norm: best.grad_norm,
        iterations: best.iterations,
        point: SpherePoint::new(best.point),
        restarts: energies,
    })
}

/// A Monte Carlo or optimisation estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Point estimate.
    pub value: f64,
    /// Standard error (0 for optimisation results).
    pub stderr: f64,
    /// Samples drawn or ascent steps taken.
    pub iterations: usize,
}

/// Samples per RNG chunk of the Monte Carlo estimators.
const MC_CHUNK: usize = 256;

/// (1/N) log mean exp H over `samples` draws of `draw`, with a delta-method
/// standard error.
fn log_mean_exp<D>(h: &Hamiltonian, samples: usize, seed: u64, label: &str, draw: D) -> Result<Estimate>
where
    D: Fn(&mut rand_chacha::ChaCha8Rng) -> Vec<f64> + Sync,
{
    if samples == 0 {
        return Err(Error::Invalid("Monte Carlo estimate needs at least one sample".into()));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let energies: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = task_rng(seed, label, c as u64);
            let k = MC_CHUNK.min(samples - c * MC_CHUNK);
            (0..k).map(|_| h.eval(&draw(&mut rng))).collect::<Vec<_>>()
        })
        .collect();
    let m = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = energies.iter().map(|e| (e - m).exp()).collect();
    let k = w.len() as f64;
    let mean = w.iter().sum::<f64>() / k;
    let var = if w.len() > 1 { w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
    let n = h.n() as f64;
    Ok(Estimate { value: (m + mean.ln()) / n, stderr: (var / k).sqrt() / mean / n, iterations: samples })
}

/// F̂_N = (1/N) log E_σ exp H_N(σ) over the uniform measure on S_N.
pub fn free_energy_estimate(h: &Hamiltonian, samples: usize, seed: u64) -> Result<Estimate> {
    let n = h.n();
    log_mean_exp(h, samples, seed, "free-energy", |rng| random_sphere_point(n, (n as f64).sqrt(), rng))
}

/// Φ(q; σ) = (1/N) log ∫_{Band_q(σ)} exp H_N(ρ) dρ, the band measure
/// normalised by the sphere volume, estimated as the log-mean-exp over
/// uniform band samples plus ½log(1−q²).
pub fn band_free_energy(h: &Hamiltonian, sigma: &[f64], q: f64, samples: usize, seed: u64) -> Result<Estimate> {
    let slice = SphereSlice::band(sigma, q)?;
    let mut est = log_mean_exp(h, samples, seed, "band-free-energy", |rng| slice.random_point(rng))?;
    est.value += 0.5 * (1.0 - q * q).ln();
    Ok(est)
}

/// Ψ(q; σ) = (1/N) sup_{ρ ∈ Band_q(σ)} H_N(ρ) by multi-start ascent in the
/// band; at q = ±1 the band is the single point ±σ√N/‖σ‖.
pub fn band_gs(h: &Hamiltonian, sigma: &[f64], q: f64, restarts: usize, seed: u64) -> Result<Estimate> {
    let n = h.n();
    let s = norm(sigma);
    if !(s > 0.0) {
        return Err(Error::Domain("band centre must be nonzero".into()));
    }
    if q.abs() >= 1.0 {
        if q.abs() > 1.0 {
            return Err(Error::Domain(format!("band overlap must satisfy |q| <= 1, got {q}")));
        }
        let k = q * (n as f64).sqrt() / s;
        let pt: Vec<f64> = sigma.iter().map(|v| k * v).collect();
        return Ok(Estimate { value: h.eval(&pt) / n as f64, stderr: 0.0, iterations: 0 });
    }
    let slice = SphereSlice::band(sigma, q)?;
    let opts = AscentOptions::for_covariance(h.mixture());
    let runs = best_ascent(h, &slice, restarts, &opts, seed, "band-gs");
    let best = runs.iter().max_by(|a, b| a.value.total_cmp(&b.value)).expect("at least one restart");
    Ok(Estimate { value: best.value / n as f64, stderr: 0.0, iterations: best.iterations })
}
