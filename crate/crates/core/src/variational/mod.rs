//! Crisanti–Sommers functionals at positive and zero temperature: exact
//! evaluation, minimisation, extremality certificates, the sets S and T,
//! model-type classification and the sub-model decomposition.

mod analysis;
mod order;
mod piecewise;
mod sets;
mod solve;

pub use analysis::{
    analyze, certificates, classify, classify_sets, decompose, inv_sqrt_curvature_convex, one_rsb_test, onersb_params, phase_checks, s_refinement,
    s_refinement_of, upsilon, Analysis, AnalysisOptions, Certificates, ComponentCheck, Decomposition, Margin, ModelType, OneRSBParams, PhaseReport, MASS_FLOOR,
};
pub use order::{cs_value, energy_profile, energy_profile_zt, zt_value, FtEval, OrderParamFT, OrderParamZT, ZtEval};
pub use sets::{compute_s, compute_t, f_max, g_min, IntervalSet, SetOptions};
pub use solve::{minimize_cs, minimize_zt, solve_l, CsMinimizer, SolverOptions, ZtMinimizer};
