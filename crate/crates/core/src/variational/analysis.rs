//! Model-type classification, one-step parameters, phase inequalities,
//! minimiser certificates and the sub-model decomposition.

use serde::{Deserialize, Serialize};

use super::order::{FtEval, OrderParamFT, OrderParamZT, ZtEval};
use super::sets::{compute_s, compute_t, f_max, g_min, IntervalSet, SetOptions};
use super::solve::{minimize_cs, minimize_zt, CsMinimizer, SolverOptions, ZtMinimizer};
use crate::error::{Error, Result};
use crate::mixture::{submodel, submodel_root, Covariance, Mixture};
use crate::optimize::bisect;

/// The five structural model types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelType {
    /// T = {1}: only the two trivial critical points at the top.
    TopologicallyTrivial,
    /// S = {0}.
    StrictlyRS,
    /// T = {0, 1}.
    Strictly1RSB,
    /// T = [0, 1].
    StrictlyFRSB,
    /// Anything else.
    Composite,
}

impl std::fmt::Display for ModelType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelType::TopologicallyTrivial => "TopologicallyTrivial",
            ModelType::StrictlyRS => "StrictlyRS",
            ModelType::Strictly1RSB => "Strictly1RSB",
            ModelType::StrictlyFRSB => "StrictlyFRSB",
            ModelType::Composite => "Composite",
        };
        f.write_str(s)
    }
}

/// υ(z) = ((1+z)log(1+z))/z² − 1/z, strictly decreasing from ½ to 0.
pub fn upsilon(z: f64) -> f64 {
    if z < 0.05 {
        // Σ_{k≥2} (−1)^k z^{k−2} / (k(k−1))
        let mut s = 0.0;
        let mut zk = 1.0;
        for k in 2..20 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * zk / (k * (k - 1)) as f64;
            zk *= z;
        }
        s
    } else {
        (1.0 + z) * z.ln_1p() / (z * z) - 1.0 / z
    }
}

/// Parameters of the one-step replica symmetry breaking zero-temperature
/// solution: α ≡ u, α̂(q) = L − uq.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneRSBParams {
    /// Root of υ(z) = ξ(1)/ξ′(1).
    pub z: f64,
    /// y = √((1+z)ξ′(1)).
    pub y: f64,
    /// L = (1+z)/y.
    pub l: f64,
    /// u = z/y.
    pub u: f64,
    /// 𝒬 = (ξ′(1) + zξ(1))/y.
    pub q: f64,
    /// Ground-state energy E_0 = 𝒬.
    pub e0: f64,
    /// Radial derivative R_0 = y + ξ″(1)/y.
    pub r0: f64,
}

/// Solves for the one-step parameters.  Requires ξ′(0) = 0 and
/// ξ(1)/ξ′(1) ∈ (0, ½]; the endpoint ½ (pure 2-spin) is the z = 0 limit.
pub fn onersb_params<C: Covariance + ?Sized>(xi: &C) -> Result<OneRSBParams> {
    let (x0, x1, x2) = (xi.value(1.0) - xi.value(0.0), xi.d1(1.0), xi.d2(1.0));
    if xi.d1(0.0) != 0.0 {
        return Err(Error::Domain("one-step parameters need xi'(0) = 0".into()));
    }
    if !(x1 > 0.0) {
        return Err(Error::Domain("one-step parameters need xi'(1) > 0".into()));
    }
    let ratio = x0 / x1;
    if !(ratio > 0.0) || ratio > 0.5 + 1e-15 {
        return Err(Error::Domain(format!("xi(1)/xi'(1) = {ratio} is outside (0, 1/2]")));
    }
    let z = if ratio >= 0.5 - 1e-9 {
        0.0
    } else {
        let mut hi = 1.0;
        while upsilon(hi) > ratio {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Numerical("upsilon root bracket diverged".into()));
            }
        }
        bisect(|z| upsilon(z) - ratio, 0.0, hi, 1e-16 * hi).ok_or_else(|| Error::Numerical("upsilon bisection failed".into()))?
    };
    let y = ((1.0 + z) * x1).sqrt();
    let q = (x1 + z * x0) / y;
    Ok(OneRSBParams { z, y, l: (1.0 + z) / y, u: z / y, q, e0: q, r0: y + x2 / y })
}

/// Whether q ↦ ξ″(q)^{−1/2} is convex on (0, 1] (tested by second
/// differences on a grid); such models with ξ′(0) = 0 are strictly 1RSB.
pub fn inv_sqrt_curvature_convex<C: Covariance + ?Sized>(xi: &C, grid: usize) -> bool {
    let n = grid.max(4);
    let h = 1.0 / n as f64;
    let phi = |q: f64| xi.d2(q).powf(-0.5);
    (1..n).all(|i| {
        let q = i as f64 * h;
        let (a, b, c) = (phi(q), phi(q + h), phi((q - h).max(q * 0.5)));
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return false;
        }
        // nonuniform second difference when the left neighbour is shrunk
        let hl = q - (q - h).max(q * 0.5);
        let d2 = 2.0 * (hl * b - (h + hl) * a + h * c) / (h * hl * (h + hl));
        d2 >= -1e-9 * (1.0 + a.abs() / (h * h))
    })
}

/// Worst value of a pointwise inequality over a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    /// Worst value of the defining expression (maximum for "≤ 0" forms,
    /// minimum for "≥ 0" forms).
    pub worst: f64,
    /// Location of the worst value.
    pub at: f64,
    /// Whether the inequality holds on the grid (to rounding).
    pub holds: bool,
}

/// Grid evaluation of the phase inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    /// max_q ξ(q) + ½log(1−q²) (second-moment replica symmetric regime: ≤ 0).
    pub second_moment: Margin,
    /// max_q ξ(q) + q + log(1−q) (replica symmetric: ≤ 0).
    pub replica_symmetric: Margin,
    /// min_q of ξ(1) − ξ(q) − ξ′(1)((1+z)/z² log(1+(1−q)z) − (1−q)/z)
    /// (one-step test: ≥ 0), when the one-step parameters exist.
    pub one_rsb: Option<Margin>,
}

/// The one-step test expression at q.
pub fn one_rsb_test<C: Covariance + ?Sized>(xi: &C, z: f64, q: f64) -> f64 {
    let w = 1.0 - q;
    let bracket = if z * w < 1e-4 {
        // (1+z)/z² log(1+wz) − w/z expanded in z
        let mut s = 0.0;
        let mut t = 1.0;
        for k in 2..12 {
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            // coefficient of z^{k−2} from (1+z)(w^k z^{k−2}/k) and w^{k−1}/(k−1)
            s += sign * w.powi(k) / k as f64 * t;
            t *= z;
        }
        let mut s2 = 0.0;
        let mut t2 = 1.0;
        for k in 2..12 {
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            s2 += sign * w.powi(k) / k as f64 * t2;
            t2 *= z;
        }
        // (1+z)/z²·(wz + Σ_{k≥2}(−1)^{k+1}(wz)^k/k) − w/z
        w + s + z * s2
    } else {
        (1.0 + z) / (z * z) * (w * z).ln_1p() - w / z
    };
    xi.value(1.0) - xi.value(q) - xi.d1(1.0) * bracket
}

/// Evaluates the phase inequalities on a uniform grid of `grid` points.
pub fn phase_checks<C: Covariance + ?Sized>(xi: &C, grid: usize) -> PhaseReport {
    let n = grid.max(2);
    let qs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    let worst_max = |f: &dyn Fn(f64) -> f64| {
        let (at, worst) = qs.iter().map(|&q| (q, f(q))).fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        Margin { worst, at, holds: worst <= 1e-14 }
    };
    let second_moment = worst_max(&|q: f64| xi.value(q) - xi.value(0.0) + 0.5 * (-q * q).ln_1p());
    let replica_symmetric = worst_max(&|q: f64| xi.value(q) - xi.value(0.0) + q + (-q).ln_1p());
    let one_rsb = onersb_params(xi).ok().map(|p| {
        let pts: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let (at, worst) = pts.iter().map(|&q| (q, one_rsb_test(xi, p.z, q))).fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        Margin { worst, at, holds: worst >= -1e-12 }
    });
    PhaseReport { second_moment, replica_symmetric, one_rsb }
}

/// Stationarity residuals of the computed minimisers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    /// max |F(q_j)| over atoms of x with mass ≥ the reporting floor.
    pub max_abs_f_on_atoms: f64,
    /// max (f_max − f(q_j)) over the same atoms.
    pub max_f_gap_on_atoms: f64,
    /// |G(1)|.
    pub abs_g_at_one: f64,
    /// min_q g(q).
    pub min_g: f64,
    /// Whether every α-breakpoint lies in the detected T.
    pub zt_atoms_in_t: bool,
}

/// Atoms of x carrying at least this mass are certificate-relevant.
pub const MASS_FLOOR: f64 = 1e-6;

/// Computes the certificate residuals.
pub fn certificates<C: Covariance + ?Sized>(xi: &C, x: &OrderParamFT, p: &OrderParamZT, t: &IntervalSet, opts: &SetOptions) -> Certificates {
    let fe = FtEval::new(xi, x);
    let fmax = f_max(xi, x, opts);
    let heavy: Vec<(f64, f64)> = x.atoms().into_iter().filter(|a| a.1 >= MASS_FLOOR).collect();
    let max_abs_f_on_atoms = heavy.iter().map(|a| fe.big_f(a.0).abs()).fold(0.0, f64::max);
    let max_f_gap_on_atoms = heavy.iter().map(|a| fmax - fe.small_f(a.0)).fold(0.0, f64::max);
    let ze = ZtEval::new(xi, p);
    let cell = 1.0 / (opts.grid.max(3) - 1) as f64;
    let zt_atoms_in_t = p.atoms().iter().filter(|a| a.1 > 0.0).all(|a| t.contains(a.0, 2.0 * cell));
    Certificates { max_abs_f_on_atoms, max_f_gap_on_atoms, abs_g_at_one: ze.big_g(1.0).abs(), min_g: g_min(xi, p, opts), zt_atoms_in_t }
}

/// Options for [`analyze`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
pub struct AnalysisOptions {
    /// Minimiser controls.
    pub solver: SolverOptions,
    /// Set-detection controls.
    pub sets: SetOptions,
}

/// Full variational analysis of a mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Analysis {
    /// Finite-temperature minimiser.
    pub cs: CsMinimizer,
    /// Zero-temperature minimiser.
    pub zt: ZtMinimizer,
    /// The set S.
    pub s: IntervalSet,
    /// The set T.
    pub t: IntervalSet,
    /// Atoms of the finite-temperature measure (location, mass); S may
    /// contain further "ghost" points carrying no mass.
    pub mass_atoms: Vec<(f64, f64)>,
    /// Classification.
    pub model_type: ModelType,
    /// S-refinement (q_0, …, q_D).
    pub refinement: Vec<f64>,
    /// Phase inequalities.
    pub phase: PhaseReport,
    /// Stationarity residuals.
    pub certificates: Certificates,
}

/// Tolerance for comparing detected set endpoints with exact targets.
const SET_TOL: f64 = 1e-9;

/// Classification from the detected sets (precedence: 1RSB, RS, FRSB,
/// topologically trivial, composite).
pub fn classify_sets<C: Covariance + ?Sized>(xi: &C, s: &IntervalSet, t: &IntervalSet) -> ModelType {
    let no_field = xi.d1(0.0) == 0.0;
    if no_field {
        if t.is_atoms(&[0.0, 1.0], SET_TOL) {
            return ModelType::Strictly1RSB;
        }
        if s.is_atoms(&[0.0], SET_TOL) {
            return ModelType::StrictlyRS;
        }
        if t.is_interval(0.0, 1.0, SET_TOL) {
            return ModelType::StrictlyFRSB;
        }
    }
    if t.is_atoms(&[1.0], SET_TOL) && xi.d1(1.0) >= xi.d2(1.0) * (1.0 - 1e-12) {
        return ModelType::TopologicallyTrivial;
    }
    ModelType::Composite
}

/// Minimises both functionals, detects S and T and classifies the model.
pub fn analyze<C: Covariance + ?Sized + Sync>(xi: &C, opts: &AnalysisOptions) -> Result<Analysis> {
    let cs = minimize_cs(xi, &opts.solver)?;
    let zt = minimize_zt(xi, &opts.solver)?;
    let s = compute_s(xi, &cs.x, &opts.sets);
    let t = compute_t(xi, &zt.p, &opts.sets);
    let model_type = classify_sets(xi, &s, &t);
    let refinement = s_refinement_of(&s);
    let cert = certificates(xi, &cs.x, &zt.p, &t, &opts.sets);
    Ok(Analysis { mass_atoms: cs.x.atoms(), phase: phase_checks(xi, opts.sets.grid), certificates: cert, cs, zt, s, t, model_type, refinement })
}

/// Classifies a mixture with default options.
pub fn classify(m: &Mixture) -> Result<ModelType> {
    Ok(analyze(m, &AnalysisOptions::default())?.model_type)
}

/// The refinement (q_0, …, q_D) of a detected S: all component endpoints.
pub fn s_refinement_of(s: &IntervalSet) -> Vec<f64> {
    s.endpoints()
}

/// S-refinement of a mixture with default options.
pub fn s_refinement(m: &Mixture) -> Result<Vec<f64>> {
    Ok(analyze(m, &AnalysisOptions::default())?.refinement)
}

/// One row of the decomposition check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentCheck {
    /// Interval [q_lo, q_hi] of the component.
    pub interval: (f64, f64),
    /// Value predicted from the energy profile of the full model.
    pub predicted: f64,
    /// Value obtained by re-minimising the component model.
    pub computed: f64,
    /// Classification of the component model.
    pub model_type: ModelType,
}

/// Consistency of the decomposition into root, middle and leaf components.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Decomposition {
    /// The refinement used.
    pub refinement: Vec<f64>,
    /// Root component ξ_{−1} (absent when q_0 = 0): 𝒬 vs E(q_0).
    pub root: Option<ComponentCheck>,
    /// Middle components ξ_d: 𝒬 vs E(q_{d+1}) − E(q_d).
    pub middle: Vec<ComponentCheck>,
    /// Leaf component ξ_D: 𝒫 vs 𝒫(ξ) − E(q_D) − ½log(1−q_D).
    pub leaf: ComponentCheck,
}

impl Decomposition {
    /// Largest |predicted − computed| over all components.
    pub fn max_residual(&self) -> f64 {
        self.root.iter().chain(&self.middle).chain(std::iter::once(&self.leaf)).map(|c| (c.predicted - c.computed).abs()).fold(0.0, f64::max)
    }
}

/// Re-minimises every component model of the S-refinement of `analysis` and
/// compares with the energy-profile predictions.
pub fn decompose(m: &Mixture, analysis: &Analysis, opts: &AnalysisOptions) -> Result<Decomposition> {
    let q = analysis.refinement.clone();
    if q.is_empty() {
        return Err(Error::Degenerate("empty refinement".into()));
    }
    let x = &analysis.cs.x;
    let fe = FtEval::new(m, x);
    let classify_any = |c: &dyn Covariance| -> Result<ModelType> {
        // the component models are affine transforms; analyse them directly
        let a = analyze(&c, opts)?;
        Ok(a.model_type)
    };
    let root = if q[0] > 0.0 {
        let r = submodel_root(m, q[0])?;
        let zt = minimize_zt(&r, &opts.solver)?;
        Some(ComponentCheck { interval: (0.0, q[0]), predicted: fe.energy(q[0]), computed: zt.value, model_type: classify_any(&r)? })
    } else {
        None
    };
    let mut middle = Vec::new();
    for w in q.windows(2) {
        let c = submodel(m, w[0], w[1])?;
        let zt = minimize_zt(&c, &opts.solver)?;
        middle.push(ComponentCheck { interval: (w[0], w[1]), predicted: fe.energy(w[1]) - fe.energy(w[0]), computed: zt.value, model_type: classify_any(&c)? });
    }
    let qd = *q.last().unwrap();
    let leaf_model = submodel(m, qd, 1.0)?;
    let cs = minimize_cs(&leaf_model, &opts.solver)?;
    let leaf = ComponentCheck {
        interval: (qd, 1.0),
        predicted: analysis.cs.value - fe.energy(qd) - 0.5 * (-qd).ln_1p(),
        computed: cs.value,
        model_type: classify_any(&leaf_model)?,
    };
    Ok(Decomposition { refinement: q, root, middle, leaf })
}
