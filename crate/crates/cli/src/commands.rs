//! Subcommand arguments and pipelines.
//!
//! Seeds: the disorder of a sampled Hamiltonian uses
//! `derive_seed(seed, "<command>:disorder", 0)` and the algorithmic
//! randomness `derive_seed(seed, "<command>:algorithm", 0)`.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use spinlab_core::kacrice::{KacRice, RateFunction, TiltOptions, TiltedEnvelope, DEFAULT_IOTA};
use spinlab_core::landscape::{band_free_energy, band_gs, gs_estimate, Estimate, Hamiltonian};
use spinlab_core::rng::derive_seed;
use spinlab_core::subag::{hessian_ascent_energy, many_runs, AscentConfig};
use spinlab_core::tree::{
    build_tree, markov_survival_bound, prune_energy, prune_overlap, verify_ultrametric, write_sidecar_file, TreeConfig, TreeSummary, UltraReport, VerifyMode,
};
use spinlab_core::variational::{
    analyze, energy_profile_zt, minimize_cs, minimize_zt, onersb_params, Analysis, AnalysisOptions, FtEval, OneRSBParams, SetOptions, SolverOptions, ZtEval,
};
use spinlab_core::{Error, Mixture, ModelType, Result};

use crate::{emit_csv, emit_json, Command, Common, Status};

/// Runs the pipeline of one subcommand.
pub fn dispatch(cmd: &Command) -> Result<Status> {
    match cmd {
        Command::Analyze(a) => run_analyze(a),
        Command::Profile(a) => run_profile(a),
        Command::Rate(a) => run_rate(a),
        Command::Complexity(a) => run_complexity(a),
        Command::SampleGs(a) => run_sample_gs(a),
        Command::Band(a) => run_band(a),
        Command::Subag(a) => run_subag(a),
        Command::Tree(a) => run_tree(a),
        Command::Tilt(a) => run_tilt(a),
    }
}

fn disorder_seed(seed: u64, cmd: &str) -> u64 {
    derive_seed(seed, &format!("{cmd}:disorder"), 0)
}

fn algorithm_seed(seed: u64, cmd: &str) -> u64 {
    derive_seed(seed, &format!("{cmd}:algorithm"), 0)
}

fn require(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Invalid(msg.into()))
    }
}

/// `count` evenly spaced points from `lo` to `hi` (one point if lo = hi).
fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if lo == hi || count == 1 {
        return vec![lo];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

/// Solver flags shared by the variational subcommands.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverFlags {
    /// Maximum number of atoms of the order parameters.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Random restarts of the minimisers.
    #[arg(long = "solver-restarts", default_value_t = 20)]
    pub solver_restarts: usize,
    /// Target accuracy of the functional values.
    #[arg(long = "solver-tol", default_value_t = 1e-10)]
    pub solver_tol: f64,
}

impl SolverFlags {
    fn options(&self, seed: u64) -> Result<SolverOptions> {
        require(self.levels >= 1, "--levels must be at least 1")?;
        require(self.solver_restarts >= 1, "--solver-restarts must be at least 1")?;
        require(self.solver_tol > 0.0, "--solver-tol must be positive")?;
        Ok(SolverOptions {
            max_levels: self.levels,
            restarts: self.solver_restarts,
            tol: self.solver_tol,
            seed: algorithm_seed(seed, "solver"),
            ..SolverOptions::default()
        })
    }
}

// ---------------------------------------------------------------------------
// analyze

/// Arguments of `analyze`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Grid points used to detect S and T.
    #[arg(long, default_value_t = 4001)]
    pub grid: usize,
}

#[derive(Serialize)]
struct AnalyzeResult<'a> {
    model_type: ModelType,
    classification: String,
    analysis: &'a Analysis,
    one_rsb: Option<OneRSBParams>,
    hessian_ascent_energy: f64,
}

fn analysis_options(solver: &SolverFlags, grid: usize, seed: u64) -> Result<AnalysisOptions> {
    require(grid >= 3, "--grid must be at least 3")?;
    Ok(AnalysisOptions { solver: solver.options(seed)?, sets: SetOptions { grid, ..SetOptions::default() } })
}

fn run_analyze(a: &AnalyzeArgs) -> Result<Status> {
    let m = a.common.load()?;
    let opts = analysis_options(&a.solver, a.grid, a.common.seed)?;
    let an = analyze(&m, &opts)?;
    let one_rsb = if an.model_type == ModelType::Strictly1RSB { onersb_params(&m).ok() } else { None };
    let res = AnalyzeResult {
        model_type: an.model_type,
        classification: an.model_type.to_string(),
        analysis: &an,
        one_rsb,
        hessian_ascent_energy: hessian_ascent_energy(&m),
    };
    emit_json(&a.common, "analyze", a, &m, &res)?;
    Ok(if an.cs.converged && an.zt.converged { Status::Complete } else { Status::Partial("variational minimiser did not converge".into()) })
}

// ---------------------------------------------------------------------------
// profile

/// Arguments of `profile`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Number of q points in [0, 1].
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
}

fn run_profile(a: &ProfileArgs) -> Result<Status> {
    require(a.grid >= 2, "--grid must be at least 2")?;
    let m = a.common.load()?;
    let opts = a.solver.options(a.common.seed)?;
    let cs = minimize_cs(&m, &opts)?;
    let zt = minimize_zt(&m, &opts)?;
    let fe = FtEval::new(&m, &cs.x);
    let ze = ZtEval::new(&m, &zt.p);
    let rows: Vec<Vec<f64>> = linspace(0.0, 1.0, a.grid).into_iter().map(|q| vec![q, if q < 1.0 { fe.energy(q) } else { f64::NAN }, ze.energy(q)]).collect();
    emit_csv(&a.common, "profile", a, &m, &["q", "energy_positive_temperature", "energy_zero_temperature"], &rows)?;
    Ok(if cs.converged && zt.converged { Status::Complete } else { Status::Partial("variational minimiser did not converge".into()) })
}

// ---------------------------------------------------------------------------
// rate, complexity

/// Arguments of `rate`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct RateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Smallest energy (default E_0).
    #[arg(long)]
    pub emin: Option<f64>,
    /// Largest energy (default E_0 + 1).
    #[arg(long)]
    pub emax: Option<f64>,
    /// Number of energies.
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    /// Perturbation ι of pure mixtures (γ_{p+1} = ιγ_p).
    #[arg(long, default_value_t = DEFAULT_IOTA)]
    pub iota: f64,
}

fn complexity_model(m: &Mixture, iota: f64) -> Result<Mixture> {
    require(iota > 0.0, "--iota must be positive")?;
    if m.is_pure() {
        m.perturbed(iota)
    } else {
        Ok(m.clone())
    }
}

fn run_rate(a: &RateArgs) -> Result<Status> {
    require(a.grid >= 1, "--grid must be at least 1")?;
    let m = a.common.load()?;
    let rf = RateFunction::new(complexity_model(&m, a.iota)?)?;
    let e0 = rf.params.e0;
    let (lo, hi) = (a.emin.unwrap_or(e0), a.emax.unwrap_or(e0 + 1.0));
    require(lo <= hi, "--emin must not exceed --emax")?;
    let pts = rf.curve(&linspace(lo, hi, a.grid))?;
    let rows: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.e, p.r_star, p.theta_star]).collect();
    emit_csv(&a.common, "rate", a, &m, &["e", "r_star", "theta_star"], &rows)?;
    Ok(Status::Complete)
}

/// Arguments of `complexity`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ComplexityArgs {
    #[command(flatten)]
    pub common: Common,
    /// Smallest energy (default E_0 − 0.5).
    #[arg(long)]
    pub emin: Option<f64>,
    /// Largest energy (default E_0 + 0.5).
    #[arg(long)]
    pub emax: Option<f64>,
    /// Smallest radial derivative (default 2√ξ″(1)).
    #[arg(long)]
    pub rmin: Option<f64>,
    /// Largest radial derivative (default 2R_0 − 2√ξ″(1)).
    #[arg(long)]
    pub rmax: Option<f64>,
    /// Points per axis.
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    /// Perturbation ι of pure mixtures.
    #[arg(long, default_value_t = DEFAULT_IOTA)]
    pub iota: f64,
}

fn run_complexity(a: &ComplexityArgs) -> Result<Status> {
    require(a.grid >= 1, "--grid must be at least 1")?;
    let m = a.common.load()?;
    let model = complexity_model(&m, a.iota)?;
    let rf = RateFunction::new(model.clone())?;
    let kr = KacRice::new(model)?;
    let (e0, r0, rlo) = (rf.params.e0, rf.params.r0, kr.r_min());
    let (elo, ehi) = (a.emin.unwrap_or(e0 - 0.5), a.emax.unwrap_or(e0 + 0.5));
    let (rl, rh) = (a.rmin.unwrap_or(rlo), a.rmax.unwrap_or((2.0 * r0 - rlo).max(rlo)));
    require(elo <= ehi && rl <= rh, "grid bounds must satisfy min <= max")?;
    let mut rows = Vec::new();
    for e in linspace(elo, ehi, a.grid) {
        for r in linspace(rl, rh, a.grid) {
            rows.push(vec![e, r, kr.theta(e, r)]);
        }
    }
    emit_csv(&a.common, "complexity", a, &m, &["e", "r", "theta"], &rows)?;
    Ok(Status::Complete)
}

// ---------------------------------------------------------------------------
// sampled Hamiltonians

fn sample(m: &Mixture, n: usize, seed: u64, cmd: &str) -> Result<Hamiltonian> {
    require(n >= 2, "--n must be at least 2")?;
    Hamiltonian::sample(m, n, disorder_seed(seed, cmd))
}

/// Arguments of `sample-gs`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleGsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dimension N.
    #[arg(long)]
    pub n: usize,
    /// Random restarts of the ascent.
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    /// Maximum gradient steps per restart.
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
}

#[derive(Serialize)]
struct SampleGsResult {
    energy_density: f64,
    grad_norm: f64,
    iterations: usize,
    restarts: Vec<f64>,
    zero_temperature_value: f64,
}

fn run_sample_gs(a: &SampleGsArgs) -> Result<Status> {
    require(a.restarts >= 1, "--restarts must be at least 1")?;
    require(a.steps >= 1, "--steps must be at least 1")?;
    let m = a.common.load()?;
    let h = sample(&m, a.n, a.common.seed, "sample-gs")?;
    let gs = gs_estimate(&h, a.restarts, a.steps, algorithm_seed(a.common.seed, "sample-gs"))?;
    let q = minimize_zt(&m, &SolverOptions::default())?.value;
    let res = SampleGsResult {
        energy_density: gs.energy_density,
        grad_norm: gs.grad_norm,
        iterations: gs.iterations,
        restarts: gs.restarts,
        zero_temperature_value: q,
    };
    emit_json(&a.common, "sample-gs", a, &m, &res)?;
    Ok(if res.iterations >= a.steps { Status::Partial(format!("best restart used all {} steps", a.steps)) } else { Status::Complete })
}

/// Arguments of `band`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct BandArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dimension N.
    #[arg(long)]
    pub n: usize,
    /// Band overlap q with the centre direction, |q| ≤ 1.
    #[arg(long)]
    pub q: f64,
    /// Monte Carlo samples of the band free energy.
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
    /// Restarts of the ascents (centre and band).
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
}

#[derive(Serialize)]
struct BandResult {
    center_energy_density: f64,
    band_free_energy: Option<Estimate>,
    band_ground_state: Estimate,
}

fn run_band(a: &BandArgs) -> Result<Status> {
    require(a.q.abs() <= 1.0, "--q must satisfy |q| <= 1")?;
    require(a.samples >= 1 && a.restarts >= 1, "--samples and --restarts must be at least 1")?;
    let m = a.common.load()?;
    let h = sample(&m, a.n, a.common.seed, "band")?;
    let seed = algorithm_seed(a.common.seed, "band");
    let center = gs_estimate(&h, a.restarts, 10_000, seed)?;
    let sigma = &center.point.coords;
    let fe = if a.q.abs() < 1.0 { Some(band_free_energy(&h, sigma, a.q, a.samples, derive_seed(seed, "band-free-energy", 0))?) } else { None };
    let gs = band_gs(&h, sigma, a.q, a.restarts, derive_seed(seed, "band-gs", 0))?;
    emit_json(&a.common, "band", a, &m, &BandResult { center_energy_density: center.energy_density, band_free_energy: fe, band_ground_state: gs })?;
    Ok(Status::Complete)
}

/// Arguments of `subag`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SubagArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dimension N.
    #[arg(long)]
    pub n: usize,
    /// Step fraction η (1/η must be an integer).
    #[arg(long, default_value_t = 0.02)]
    pub eta: f64,
    /// Number of independent runs.
    #[arg(long, default_value_t = 8)]
    pub k: usize,
}

#[derive(Serialize)]
struct SubagResult {
    energies: Vec<f64>,
    mean_energy: f64,
    target_energy: f64,
    max_overlap: f64,
    overlaps: Vec<Vec<f64>>,
}

fn run_subag(a: &SubagArgs) -> Result<Status> {
    require(a.k >= 1, "--k must be at least 1")?;
    let m = a.common.load()?;
    let cfg = AscentConfig::new(a.eta, algorithm_seed(a.common.seed, "subag"));
    cfg.steps()?;
    let h = sample(&m, a.n, a.common.seed, "subag")?;
    let runs = many_runs(&h, a.k, &cfg)?;
    let res = SubagResult {
        energies: runs.runs.iter().map(|r| r.energy_density).collect(),
        mean_energy: runs.mean_energy(),
        target_energy: hessian_ascent_energy(&m),
        max_overlap: runs.max_off_diagonal(),
        overlaps: runs.overlaps.clone(),
    };
    emit_json(&a.common, "subag", a, &m, &res)?;
    Ok(Status::Complete)
}

// ---------------------------------------------------------------------------
// tree

/// Arguments of `tree`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct TreeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dimension N.
    #[arg(long)]
    pub n: usize,
    /// Arity k.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Ultrametric tolerance δ.
    #[arg(long, default_value_t = 0.15)]
    pub delta: f64,
    /// Energy slack ε of the pruning.
    #[arg(long, default_value_t = 0.3)]
    pub eps: f64,
    /// Radius schedule q_0,…,q_D (default: endpoints of T with the
    /// zero-temperature profile, or of S with --positive-temperature).
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    /// Use the positive-temperature set S and energy profile.
    #[arg(long = "positive-temperature")]
    pub positive_temperature: bool,
    /// Restarts of the root ascent.
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    /// Hessian-ascent steps initialising each child.
    #[arg(long = "init-steps", default_value_t = 50)]
    pub init_steps: usize,
    /// Gradient steps of each child polish.
    #[arg(long, default_value_t = 300)]
    pub steps: usize,
    /// Coordinate sidecar file of the pruned tree.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Serialize)]
struct TreeResult {
    radii: Vec<f64>,
    profile: Vec<f64>,
    built: TreeSummary,
    built_global: UltraReport,
    deficient: Vec<String>,
    pruned: TreeSummary,
    pruned_global: UltraReport,
    pruned_local: UltraReport,
    c0: f64,
    markov_bound: f64,
}

fn run_tree(a: &TreeArgs) -> Result<Status> {
    require(a.k >= 1 && a.k <= 16, "--k must lie in [1, 16]")?;
    require(a.delta > 0.0 && a.eps > 0.0, "--delta and --eps must be positive")?;
    require(a.restarts >= 1 && a.steps >= 1, "--restarts and --steps must be at least 1")?;
    let m = a.common.load()?;
    let an = analyze(&m, &AnalysisOptions::default())?;
    let radii = match &a.radii {
        Some(r) => r.clone(),
        None if a.positive_temperature => an.refinement.clone(),
        None => an.t.endpoints(),
    };
    require(!radii.is_empty(), "empty radius schedule")?;
    let fe = FtEval::new(&m, &an.cs.x);
    let profile =
        radii.iter().map(|&q| if a.positive_temperature { Ok(fe.energy(q)) } else { energy_profile_zt(&m, &an.zt.p, q) }).collect::<Result<Vec<f64>>>()?;
    let h = sample(&m, a.n, a.common.seed, "tree")?;
    let cfg = TreeConfig {
        arity: a.k,
        delta: a.delta,
        eps: a.eps,
        root_restarts: a.restarts,
        init_steps: a.init_steps,
        max_steps: a.steps,
        seed: algorithm_seed(a.common.seed, "tree"),
        ..TreeConfig::new(radii.clone(), profile.clone())
    };
    let built = build_tree(&h, &cfg)?;
    let pruned = prune_overlap(&prune_energy(&built, a.eps), a.delta);
    if let Some(p) = &a.sidecar {
        write_sidecar_file(&pruned, p)?;
    }
    let res = TreeResult {
        built_global: verify_ultrametric(&built, VerifyMode::Global),
        deficient: built.deficient(),
        pruned_global: verify_ultrametric(&pruned, VerifyMode::Global),
        pruned_local: verify_ultrametric(&pruned, VerifyMode::Local),
        c0: built.empirical_c0(),
        markov_bound: markov_survival_bound(a.eps, built.depth, built.empirical_c0().max(f64::MIN_POSITIVE)),
        built: built.summary(),
        pruned: pruned.summary(),
        radii,
        profile,
    };
    emit_json(&a.common, "tree", a, &m, &res)?;
    Ok(if pruned.depth > 0 && pruned.arity == 0 { Status::Partial("no child met the pruning criteria".into()) } else { Status::Complete })
}

// ---------------------------------------------------------------------------
// tilt

/// Arguments of `tilt`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct TiltArgs {
    #[command(flatten)]
    pub common: Common,
    /// Degree p of the tilted coefficient.
    #[arg(long)]
    pub degree: usize,
    /// Largest tilt x.
    #[arg(long, default_value_t = 4.0)]
    pub xmax: f64,
    /// Number of x values in [0, xmax].
    #[arg(long, default_value_t = 9)]
    pub grid: usize,
    /// Number of q points of the envelope table.
    #[arg(long = "q-grid", default_value_t = 201)]
    pub q_grid: usize,
}

fn run_tilt(a: &TiltArgs) -> Result<Status> {
    require(a.grid >= 1 && a.q_grid >= 2, "--grid must be at least 1 and --q-grid at least 2")?;
    require(a.xmax >= 0.0, "--xmax must be nonnegative")?;
    let m = a.common.load()?;
    let env = TiltedEnvelope::new(&m, a.degree, TiltOptions { grid: a.q_grid, ..TiltOptions::default() })?;
    let rows = linspace(0.0, a.xmax, a.grid).into_iter().map(|x| env.eval(x).map(|(v, q)| vec![x, v, q])).collect::<Result<Vec<_>>>()?;
    emit_csv(&a.common, "tilt", a, &m, &["x", "ground_state", "q_star"], &rows)?;
    Ok(Status::Complete)
}

#[cfg(test)]
mod tests {
    use super::*;
    use spinlab_core::Covariance;

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(1.0, 1.0, 5), vec![1.0]);
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn derived_seeds_differ_by_role() {
        assert_ne!(disorder_seed(1, "tree"), algorithm_seed(1, "tree"));
        assert_ne!(disorder_seed(1, "tree"), disorder_seed(1, "band"));
    }

    #[test]
    fn pure_mixtures_are_perturbed_for_complexity() {
        let m = Mixture::pure(3, 1.0).unwrap();
        let p = complexity_model(&m, 1e-3).unwrap();
        assert!(!p.is_pure());
        assert!((p.d1(1.0) - m.d1(1.0)).abs() < 1e-4);
    }
}
