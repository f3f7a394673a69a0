//! Randomised Hessian ascent.
//!
//! Starting from the origin, each of the 1/η steps moves by √(ηN) along a
//! uniformly random unit vector of the span of the top ⌈Nη⌉ eigenvectors of
//! the Hessian restricted to the orthogonal complement of the current
//! point, with the sign chosen so that the gradient term is nonnegative.
//! Because every increment is orthogonal to the current point,
//! ‖x_j‖² = jηN exactly and the final point lies on S_N.  For strictly
//! FRSB mixtures the output attains energy ≈ ∫₀¹ √ξ″(q) dq, and
//! independent runs are nearly orthogonal.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{dot, Hamiltonian, Landscape, SpherePoint, SphereSlice};
use crate::mixture::Covariance;
use crate::rng::task_rng;

/// Configuration of [`hessian_ascent`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AscentConfig {
    /// Step fraction η; 1/η must be an integer and 0 < η ≤ ½.
    pub eta: f64,
    /// Fraction of the spectrum spanned by the random direction (the same η
    /// in the construction; kept separate for experimentation).
    pub top_dim_fraction: f64,
    /// Seed of the random directions.
    pub seed: u64,
    /// Record per-step diagnostics.
    pub record_trajectory: bool,
}

impl AscentConfig {
    /// Configuration with top_dim_fraction = eta and no trajectory.
    pub fn new(eta: f64, seed: u64) -> Self {
        AscentConfig { eta, top_dim_fraction: eta, seed, record_trajectory: false }
    }

    /// Number of steps 1/η, validated.
    pub fn steps(&self) -> Result<usize> {
        if !(self.eta > 0.0 && self.eta <= 0.5) {
            return Err(Error::Invalid(format!("eta = {} must lie in (0, 1/2]", self.eta)));
        }
        let k = (1.0 / self.eta).round();
        if (1.0 / self.eta - k).abs() > 1e-9 * k {
            return Err(Error::Invalid(format!("1/eta = {} is not an integer", 1.0 / self.eta)));
        }
        if !(self.top_dim_fraction > 0.0 && self.top_dim_fraction <= 1.0) {
            return Err(Error::Invalid("top_dim_fraction must lie in (0, 1]".into()));
        }
        Ok(k as usize)
    }

    /// Subspace dimension ⌈N·top_dim_fraction⌉ (at least 1, at most N−1).
    pub fn subspace_dim(&self, n: usize) -> usize {
        ((n as f64 * self.top_dim_fraction - 1e-9).ceil() as usize).clamp(1, n - 1)
    }
}

/// Diagnostics of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    /// Step index j (the step from x_j to x_{j+1}).
    pub step: usize,
    /// ‖x_{j+1}‖².
    pub norm2: f64,
    /// H_N(x_{j+1}).
    pub energy: f64,
    /// H_N(x_{j+1}) − H_N(x_j).
    pub energy_gain: f64,
    /// ⟨v_j, x_j⟩ (zero up to rounding).
    pub increment_overlap: f64,
    /// ⟨v_j, ∇H_N(x_j)⟩ after the sign choice (nonnegative).
    pub gradient_term: f64,
}

/// Output of [`hessian_ascent`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AscentRun {
    /// The final point x* ∈ S_N.
    pub point: SpherePoint,
    /// H_N(x*)/N.
    pub energy_density: f64,
    /// Per-step diagnostics (empty unless recorded).
    pub trajectory: Vec<TrajectoryStep>,
}

/// ∫₀¹ √ξ″(q) dq, the energy attained by Hessian ascent on strictly FRSB
/// mixtures (double-exponential quadrature, which tolerates the √q
/// behaviour at q = 0 when ξ″(0) = 0).
pub fn hessian_ascent_energy<C: Covariance + ?Sized>(xi: &C) -> f64 {
    quadrature::double_exponential::integrate(|q| xi.d2(q).max(0.0).sqrt(), 0.0, 1.0, 1e-12).integral
}

/// Orthonormalises `vs` (twice-repeated Gram–Schmidt), dropping vectors
/// that are numerically dependent on earlier ones.
pub(crate) fn orthonormalize(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        let scale = dot(&w, &w).sqrt();
        if !(scale > 0.0) {
            continue;
        }
        for _ in 0..2 {
            for u in &out {
                let c = dot(&w, u);
                w.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
            }
        }
        let wn = dot(&w, &w).sqrt();
        if wn > 1e-10 * scale {
            out.push(w.iter().map(|a| a / wn).collect());
        }
    }
    out
}

/// Top-`k` eigenvectors of the Hessian restricted to the orthogonal
/// complement of the orthonormal family `excluded`, as columns of an
/// N × k matrix.
fn top_subspace(h: &DMatrix<f64>, excluded: &[Vec<f64>], k: usize) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    let restricted = if excluded.is_empty() {
        h.clone()
    } else {
        // P H P − c·M Mᵀ with c above the spectral radius: the excluded
        // directions sink to the bottom of the spectrum.
        let m = DMatrix::from_fn(n, excluded.len(), |i, j| excluded[j][i]);
        let mmt = &m * m.transpose();
        let p = DMatrix::<f64>::identity(n, n) - &mmt;
        let shift = 2.0 * h.norm() + 1.0;
        &p * h * &p - mmt * shift
    };
    let eig = SymmetricEigen::try_new(restricted, f64::EPSILON, 0).ok_or_else(|| Error::Numerical("symmetric eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let cols: Vec<DVector<f64>> = order[..k].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    Ok(DMatrix::from_columns(&cols))
}

/// Hessian ascent inside a sphere slice {c + τ : τ ⊥ normals, ‖τ‖ = r}:
/// starting from τ = 0, `steps` increments of length r/√steps, each a
/// random unit vector of the top-`k` eigenspace of ∇²H restricted to the
/// complement of the normals and of the current τ, signed so that the
/// gradient term is nonnegative.  Returns the final point and, if
/// requested, per-step diagnostics.
pub fn slice_hessian_ascent<L: Landscape + ?Sized>(
    f: &L,
    slice: &SphereSlice,
    steps: usize,
    k: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
    record: bool,
) -> Result<(Vec<f64>, Vec<TrajectoryStep>)> {
    let n = f.dim();
    if steps == 0 {
        return Err(Error::Invalid("Hessian ascent needs at least one step".into()));
    }
    let normals = orthonormalize(&slice.normals);
    if k == 0 || k + normals.len() + 1 > n {
        return Err(Error::Invalid(format!("subspace dimension {k} does not fit in dimension {n} with {} constraints", normals.len())));
    }
    let r2 = slice.radius * slice.radius;
    let step_len = (r2 / steps as f64).sqrt();
    let mut x = slice.center.clone();
    let mut tau = vec![0.0; n];
    let mut energy = f.value(&x);
    let mut trajectory = Vec::new();
    for j in 0..steps {
        let (_, grad) = f.value_grad(&x);
        let mut excluded = normals.clone();
        let tn = dot(&tau, &tau).sqrt();
        if tn > 0.0 {
            excluded.push(tau.iter().map(|a| a / tn).collect());
        }
        let excluded = orthonormalize(&excluded);
        let u = top_subspace(&f.hessian(&x), &excluded, k)?;
        let coef: DVector<f64> = DVector::from_fn(k, |_, _| rng.sample(StandardNormal));
        let mut v: Vec<f64> = (u * coef).iter().copied().collect();
        // Remove rounding-level components along the excluded directions so
        // that the radius grows exactly and the constraints hold.
        for _ in 0..2 {
            for e in &excluded {
                let c = dot(&v, e);
                v.iter_mut().zip(e).for_each(|(a, b)| *a -= c * b);
            }
        }
        let vn = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|a| *a /= vn);
        let mut gterm = dot(&v, &grad);
        if gterm < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
            gterm = -gterm;
        }
        let inc_overlap = dot(&v, &tau);
        tau.iter_mut().zip(&v).for_each(|(a, b)| *a += step_len * b);
        x.iter_mut().zip(&v).for_each(|(a, b)| *a += step_len * b);
        let new_energy = f.value(&x);
        let norm2 = dot(&tau, &tau);
        let want = (j + 1) as f64 * r2 / steps as f64;
        if ((norm2 - want) / want).abs() > 1e-9 {
            return Err(Error::Numerical(format!("radius drifted: |tau|^2 = {norm2}, expected {want}")));
        }
        if record {
            trajectory.push(TrajectoryStep {
                step: j,
                norm2,
                energy: new_energy,
                energy_gain: new_energy - energy,
                increment_overlap: inc_overlap,
                gradient_term: gterm,
            });
        }
        energy = new_energy;
    }
    Ok((x, trajectory))
}

/// One run of randomised Hessian ascent.
pub fn hessian_ascent(h: &Hamiltonian, cfg: &AscentConfig) -> Result<AscentRun> {
    run_with_seed(h, cfg, cfg.seed)
}

fn run_with_seed(h: &Hamiltonian, cfg: &AscentConfig, seed: u64) -> Result<AscentRun> {
    let steps = cfg.steps()?;
    let n = h.n();
    let nf = n as f64;
    if nf * cfg.eta < 1.0 {
        return Err(Error::Invalid(format!("N*eta = {} must be at least 1", nf * cfg.eta)));
    }
    let k = cfg.subspace_dim(n);
    let mut rng = task_rng(seed, "subag-directions", 0);
    let (x, trajectory) = slice_hessian_ascent(h, &SphereSlice::sphere(n, 1.0), steps, k, &mut rng, cfg.record_trajectory)?;
    let energy = h.eval(&x);
    Ok(AscentRun { energy_density: energy / nf, point: SpherePoint::new(x), trajectory })
}

/// `k` independent runs with derived seeds and their overlap matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManyRuns {
    /// The runs, in seed order.
    pub runs: Vec<AscentRun>,
    /// R(x*_a, x*_b) for all pairs (row-major k × k).
    pub overlaps: Vec<Vec<f64>>,
}

impl ManyRuns {
    /// Largest |R| off the diagonal (0 for a single run).
    pub fn max_off_diagonal(&self) -> f64 {
        let k = self.runs.len();
        (0..k).flat_map(|a| (0..k).filter(move |&b| b != a).map(move |b| (a, b))).map(|(a, b)| self.overlaps[a][b].abs()).fold(0.0, f64::max)
    }

    /// Mean energy density of the runs.
    pub fn mean_energy(&self) -> f64 {
        self.runs.iter().map(|r| r.energy_density).sum::<f64>() / self.runs.len() as f64
    }
}

/// Runs [`hessian_ascent`] `k` times in parallel.  Run 0 uses `cfg.seed`
/// itself (so k = 1 reproduces a single call); run i > 0 uses
/// `derive_seed(cfg.seed, "subag-run", i)`.
pub fn many_runs(h: &Hamiltonian, k: usize, cfg: &AscentConfig) -> Result<ManyRuns> {
    if k == 0 {
        return Err(Error::Invalid("many_runs needs k >= 1".into()));
    }
    let runs = (0..k)
        .into_par_iter()
        .map(|i| {
            let seed = if i == 0 { cfg.seed } else { crate::rng::derive_seed(cfg.seed, "subag-run", i as u64) };
            run_with_seed(h, cfg, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let overlaps = (0..k).map(|a| (0..k).map(|b| if a == b { 1.0 } else { runs[a].point.overlap(&runs[b].point) }).collect()).collect();
    Ok(ManyRuns { runs, overlaps })
}
