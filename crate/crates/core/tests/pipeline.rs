//! End-to-end checks that chain the variational, landscape, subag and tree
//! layers through the public API.

use spinlab_core::kacrice::RateFunction;
use spinlab_core::landscape::{free_energy_estimate, gs_estimate, Hamiltonian};
use spinlab_core::subag::{hessian_ascent, hessian_ascent_energy, AscentConfig};
use spinlab_core::tree::{build_tree, prune_energy, prune_overlap, read_sidecar, verify_ultrametric, write_sidecar, TreeConfig, VerifyMode};
use spinlab_core::variational::{analyze, energy_profile_zt, minimize_cs, onersb_params, AnalysisOptions, SolverOptions};
use spinlab_core::{Mixture, ModelType};

fn one_rsb() -> Mixture {
    Mixture::new(vec![0.0, 0.0, 1.0, 0.5f64.sqrt()]).unwrap()
}

#[test]
fn sampled_ground_state_does_not_exceed_the_variational_value() {
    let m = one_rsb();
    let e0 = onersb_params(&m).unwrap().e0;
    let h = Hamiltonian::sample(&m, 60, 7).unwrap();
    let gs = gs_estimate(&h, 4, 2000, 1).unwrap();
    assert!(gs.energy_density <= e0 + 0.08, "{} vs {e0}", gs.energy_density);
    assert!(gs.energy_density >= 0.8 * e0, "{} vs {e0}", gs.energy_density);
}

#[test]
fn analysis_agrees_with_one_step_closed_form() {
    let m = one_rsb();
    let an = analyze(&m, &AnalysisOptions::default()).unwrap();
    assert_eq!(an.model_type, ModelType::Strictly1RSB);
    let p = onersb_params(&m).unwrap();
    assert!((an.zt.value - p.e0).abs() < 1e-8, "{} vs {}", an.zt.value, p.e0);
    // the energy profile reaches the ground state at q = 1
    let e1 = energy_profile_zt(&m, &an.zt.p, 1.0).unwrap();
    assert!((e1 - p.e0).abs() < 1e-8);
    // and the rate function starts at zero there
    let rf = RateFunction::new(m).unwrap();
    assert!(rf.theta_star(p.e0).unwrap().abs() < 1e-8);
}

#[test]
fn replica_symmetric_free_energy_matches_annealed_estimate() {
    // ξ = 0.25q² is replica symmetric at β = 1: 𝒫 = ξ(1)/2 = 1/8.
    let m = Mixture::new(vec![0.0, 0.5]).unwrap();
    let cs = minimize_cs(&m, &SolverOptions::default()).unwrap();
    assert!((cs.value - 0.125).abs() < 1e-9, "{}", cs.value);
    let h = Hamiltonian::sample(&m, 60, 3).unwrap();
    let est = free_energy_estimate(&h, 20_000, 4).unwrap();
    assert!((est.value - cs.value).abs() < 0.05 + 3.0 * est.stderr, "{} vs {}", est.value, cs.value);
}

#[test]
fn hessian_ascent_approaches_its_energy_at_small_size() {
    let m = Mixture::new(vec![0.0, 1.0]).unwrap();
    let h = Hamiltonian::sample(&m, 80, 11).unwrap();
    let run = hessian_ascent(&h, &AscentConfig::new(0.1, 5)).unwrap();
    let target = hessian_ascent_energy(&m);
    assert!((run.point.radius_fraction() - 1.0).abs() < 1e-9);
    assert!(run.energy_density >= target - 0.3, "{} vs {target}", run.energy_density);
}

#[test]
fn analyze_build_prune_and_store_a_tree() {
    let m = one_rsb();
    let an = analyze(&m, &AnalysisOptions::default()).unwrap();
    let radii = an.t.endpoints();
    assert_eq!(radii.len(), 2);
    let profile: Vec<f64> = radii.iter().map(|&q| energy_profile_zt(&m, &an.zt.p, q).unwrap()).collect();
    let h = Hamiltonian::sample(&m, 40, 5).unwrap();
    let cfg = TreeConfig { arity: 2, delta: 0.25, eps: 0.5, init_steps: 10, max_steps: 100, seed: 9, ..TreeConfig::new(radii, profile) };
    let built = build_tree(&h, &cfg).unwrap();
    let pruned = prune_overlap(&prune_energy(&built, cfg.eps), cfg.delta);
    assert!(pruned.arity <= built.arity);
    if pruned.arity > 0 {
        assert!(verify_ultrametric(&pruned, VerifyMode::Global).passes);
    }
    let mut bytes = Vec::new();
    write_sidecar(&pruned, &mut bytes).unwrap();
    let (n, rows) = read_sidecar(bytes.as_slice()).unwrap();
    assert_eq!(n, 40);
    assert_eq!(rows.len(), pruned.nodes.len());
    for (row, node) in rows.iter().zip(pruned.nodes.values()) {
        assert_eq!(row, &node.point.coords);
    }
}
