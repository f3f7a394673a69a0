//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p spinlab-core --test acceptance --release`.  Every
//! criterion runs in isolation (a panic is reported as a failure), its
//! runtime is checked against the budget.  Failures are reported but do not
//! fail the test run unless `ACCEPTANCE_STRICT=1` is set; `ACCEPTANCE_ONLY=1,4`
//! restricts the run to the listed criteria.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use quadrature::double_exponential::integrate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinlab_core::kacrice::{kappa, kappa_prime, KacRice, RateFunction};
use spinlab_core::landscape::{dot, gs_estimate, norm, overlap, random_sphere_point, Hamiltonian, SpherePoint};
use spinlab_core::rng::derive_seed;
use spinlab_core::subag::{hessian_ascent_energy, many_runs, AscentConfig};
use spinlab_core::tree::{build_tree, exact_orthogonalize, max_gram_off_diagonal, prune_energy, prune_overlap, verify_ultrametric, TreeConfig, VerifyMode};
use spinlab_core::variational::{
    analyze, classify, decompose, energy_profile_zt, inv_sqrt_curvature_convex, minimize_zt, onersb_params, upsilon, AnalysisOptions, SolverOptions,
};
use spinlab_core::{Covariance, Mixture, ModelType};

type Outcome = Result<String, String>;

/// (number, check, runtime budget in seconds).
type Criterion = (u32, fn() -> Outcome, u64);

fn mix(g: &[f64]) -> Mixture {
    Mixture::new(g.to_vec()).expect("valid mixture")
}

/// ξ = q³ + 0.5q⁴, the strictly one-step reference mixture.
fn one_rsb() -> Mixture {
    mix(&[0.0, 0.0, 1.0, 0.5f64.sqrt()])
}

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn c1() -> Outcome {
    let m = one_rsb();
    check(inv_sqrt_curvature_convex(&m, 2001), "convexity test rejects q^3 + 0.5 q^4")?;
    let rf = RateFunction::new(m).map_err(|e| e.to_string())?;
    let (e0, r0) = (rf.params.e0, rf.params.r0);
    let theta = rf.kr.theta(e0, r0);
    let xi = rf.kr.xi_two(0.0, e0, e0, r0, r0).map_err(|e| e.to_string())?;
    check(theta.abs() <= 1e-9, format!("|Theta(E0,R0)| = {:.3e}", theta.abs()))?;
    check(xi.abs() <= 1e-8, format!("|Xi(0,E0,E0,R0,R0)| = {:.3e}", xi.abs()))?;
    Ok(format!("|Theta| = {:.2e}, |Xi| = {:.2e}", theta.abs(), xi.abs()))
}

fn c2() -> Outcome {
    let rf = RateFunction::new(one_rsb()).map_err(|e| e.to_string())?;
    let (e0, r0) = (rf.params.e0, rf.params.r0);
    let h = 1e-5;
    let d = (rf.kr.theta(e0, r0 + h) - rf.kr.theta(e0, r0 - h)) / (2.0 * h);
    check(d.abs() <= 1e-6, format!("|dTheta/dR| = {:.3e}", d.abs()))?;
    Ok(format!("|dTheta/dR| = {:.2e}", d.abs()))
}

/// ∫ log|λ − x| ρ(dλ) against the semicircle law, split at the singularity.
fn kappa_quad(x: f64) -> f64 {
    let f = |l: f64| (l - x).abs().ln() * (4.0 - l * l).max(0.0).sqrt() / (2.0 * std::f64::consts::PI);
    if x.abs() < 2.0 {
        integrate(f, -2.0, x, 1e-13).integral + integrate(f, x, 2.0, 1e-13).integral
    } else {
        integrate(f, -2.0, 2.0, 1e-13).integral
    }
}

fn c3() -> Outcome {
    let mut worst = 0.0f64;
    for x in [0.0, 1.0, 2.0, 3.0, 5.0] {
        let err = (kappa(x) - kappa_quad(x)).abs();
        check(err <= 1e-8, format!("kappa({x}) off by {err:.3e}"))?;
        worst = worst.max(err);
    }
    let mut worst_d = 0.0f64;
    for a in [1.5, 2.0, 3.0] {
        let err = (kappa_prime(a + 1.0 / a) - 1.0 / a).abs();
        check(err <= 1e-10, format!("kappa'(a + 1/a) off by {err:.3e} at a = {a}"))?;
        worst_d = worst_d.max(err);
    }
    Ok(format!("kappa err {worst:.2e}, kappa' err {worst_d:.2e}"))
}

fn c4() -> Outcome {
    let m = mix(&[0.0, 0.0, 1.0]);
    let p = onersb_params(&m).map_err(|e| e.to_string())?;
    let ures = (upsilon(p.z) - 1.0 / 3.0).abs();
    check(ures <= 1e-10, format!("|upsilon(z) - 1/3| = {ures:.3e}"))?;
    let closed = (3.0 + p.z) / (3.0 * (1.0 + p.z)).sqrt();
    check((p.e0 - closed).abs() <= 1e-12, format!("E0 = {} vs closed form {closed}", p.e0))?;
    let zt = minimize_zt(&m, &SolverOptions::default()).map_err(|e| e.to_string())?;
    check((zt.value - p.e0).abs() <= 1e-5, format!("minimize_zt {} vs E0 {}", zt.value, p.e0))?;
    let two = onersb_params(&mix(&[0.0, 1.0])).map_err(|e| e.to_string())?;
    let err2 = (two.e0 - 2f64.sqrt()).abs();
    check(err2 <= 1e-9, format!("2-spin E0 = {}", two.e0))?;
    Ok(format!("z = {:.10}, E0 = {:.10}, |zt - E0| = {:.2e}, 2-spin err {err2:.2e}", p.z, p.e0, (zt.value - p.e0).abs()))
}

fn c5() -> Outcome {
    let m = mix(&[0.0, 1.0]);
    let mut lines = vec![];
    for seed in 0..5u64 {
        let h = Hamiltonian::sample(&m, 400, derive_seed(0x5, "acceptance-gs", seed)).map_err(|e| e.to_string())?;
        let top = SymmetricEigen::new(h.hess(&vec![0.0; h.n()]) * 0.5).eigenvalues.max();
        let est = gs_estimate(&h, 2, 10_000, seed).map_err(|e| e.to_string())?;
        check((est.energy_density - top).abs() <= 0.05, format!("seed {seed}: gs {} vs lambda_max {top}", est.energy_density))?;
        check((top - 2f64.sqrt()).abs() <= 0.05, format!("seed {seed}: lambda_max {top} vs sqrt 2"))?;
        lines.push(format!("{:.4}/{:.4}", est.energy_density, top));
    }
    Ok(format!("gs/lambda_max: {}", lines.join(" ")))
}

fn c6() -> Outcome {
    let m = mix(&[0.0, 1.0]);
    let ty = classify(&m).map_err(|e| e.to_string())?;
    check(ty == ModelType::StrictlyFRSB, format!("q^2 classified {ty:?}"))?;
    let target = hessian_ascent_energy(&m);
    let h = Hamiltonian::sample(&m, 300, derive_seed(0x6, "acceptance-subag", 0)).map_err(|e| e.to_string())?;
    let runs = many_runs(&h, 8, &AscentConfig::new(0.02, 6)).map_err(|e| e.to_string())?;
    let (mean, ov) = (runs.mean_energy(), runs.max_off_diagonal());
    let summary = format!("mean {mean:.4} (target {:.4}), max |overlap| {ov:.4}", target - 0.1);
    check(mean >= target - 0.1, format!("mean energy too low: {summary}"))?;
    check(ov <= 0.15, format!("overlap bound violated: {summary}"))?;
    Ok(summary)
}

fn c7() -> Outcome {
    let m = mix(&[0.2f64.sqrt(), 0.0, 2.0]);
    let opts = AnalysisOptions::default();
    let an = analyze(&m, &opts).map_err(|e| e.to_string())?;
    check(an.model_type == ModelType::Composite, format!("classified {:?}", an.model_type))?;
    let d = decompose(&m, &an, &opts).map_err(|e| e.to_string())?;
    for c in d.root.iter().chain(&d.middle).chain(std::iter::once(&d.leaf)) {
        let r = (c.predicted - c.computed).abs();
        check(r <= 1e-3, format!("component {:?}: predicted {} computed {}", c.interval, c.predicted, c.computed))?;
    }
    Ok(format!("refinement {:?}, {} components, max residual {:.2e}", d.refinement, d.middle.len() + 1 + d.root.iter().count(), d.max_residual()))
}

fn c8_one(g: &[f64]) -> Outcome {
    let start = Instant::now();
    let m = mix(g);
    let an = analyze(&m, &AnalysisOptions::default()).map_err(|e| e.to_string())?;
    let c = an.certificates;
    let label = format!("{g:?}");
    check(c.max_abs_f_on_atoms <= 1e-4, format!("{label}: max |F| on atoms {:.3e}", c.max_abs_f_on_atoms))?;
    check(c.abs_g_at_one <= 1e-6, format!("{label}: |G(1)| = {:.3e}", c.abs_g_at_one))?;
    check(c.min_g >= -1e-6, format!("{label}: min g = {:.3e}", c.min_g))?;
    let t = start.elapsed();
    check(t <= Duration::from_secs(30), format!("{label}: {:.1} s", t.as_secs_f64()))?;
    Ok(format!("|F| {:.1e} |G1| {:.1e} ming {:.1e}", c.max_abs_f_on_atoms, c.abs_g_at_one, c.min_g))
}

fn c8() -> Outcome {
    let suite: [&[f64]; 5] = [&[0.0, 0.5], &[0.0, 1.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0, 0.5f64.sqrt()], &[1.0, 1.0]];
    let lines = suite.iter().map(|g| c8_one(g)).collect::<Result<Vec<_>, _>>()?;
    Ok(format!("{} mixtures: {}", suite.len(), lines.join("; ")))
}

fn c9() -> Outcome {
    let m = mix(&[0.5, 0.7, 0.5]);
    let n = 30;
    let nf = n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = random_sphere_point(n, nf.sqrt(), &mut rng);
    let mut perp = random_sphere_point(n, 1.0, &mut rng);
    let c = dot(&perp, &a) / dot(&a, &a);
    perp.iter_mut().zip(&a).for_each(|(p, v)| *p -= c * v);
    let unit_perp: Vec<f64> = perp.iter().map(|p| p / norm(&perp)).collect();
    let draws = 2000u64;
    let hs: Vec<Hamiltonian> = (0..draws).map(|s| Hamiltonian::sample(&m, n, derive_seed(0x9, "acceptance-cov", s)).expect("sample")).collect();
    let mut lines = vec![];
    for r in [0.0, 0.5, 1.0] {
        let k = ((1.0 - r * r) * nf).sqrt();
        let b: Vec<f64> = a.iter().zip(&unit_perp).map(|(v, p)| r * v + k * p).collect();
        check((overlap(&a, &b) - r).abs() < 1e-12, "overlap construction")?;
        let prods: Vec<f64> = hs.iter().map(|h| h.eval(&a) * h.eval(&b) / nf).collect();
        let mu = prods.iter().sum::<f64>() / draws as f64;
        let sd = (prods.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (draws as f64 - 1.0)).sqrt();
        let se = sd / (draws as f64).sqrt();
        let target = m.value(r);
        check((mu - target).abs() <= 3.0 * se, format!("R = {r}: {mu} vs xi(R) = {target} (se {se})"))?;
        lines.push(format!("R={r}: {mu:.4} vs {target:.4} ({:.1} se)", (mu - target).abs() / se));
    }
    Ok(lines.join(", "))
}

fn c10() -> Outcome {
    let m = one_rsb();
    let an = analyze(&m, &AnalysisOptions::default()).map_err(|e| e.to_string())?;
    let radii = an.t.endpoints();
    check(radii.len() == 2, format!("expected T refinement (0, 1), got {radii:?}"))?;
    let profile = radii.iter().map(|&q| energy_profile_zt(&m, &an.zt.p, q)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let (delta, eps) = (0.15, 0.3);
    let h = Hamiltonian::sample(&m, 200, derive_seed(0, "tree:disorder", 0)).map_err(|e| e.to_string())?;
    let cfg = TreeConfig { arity: 4, delta, eps, seed: derive_seed(0, "tree:algorithm", 0), ..TreeConfig::new(radii, profile.clone()) };
    let built = build_tree(&h, &cfg).map_err(|e| e.to_string())?;
    let pruned = prune_overlap(&prune_energy(&built, eps), delta);
    let rep = verify_ultrametric(&pruned, VerifyMode::Global);
    check(pruned.arity >= 2, format!("pruned arity {}", pruned.arity))?;
    check(rep.passes, format!("global verify fails: worst {:.4} at {:?}", rep.worst, rep.pair))?;
    let floor = profile[1] - 0.15;
    let mut min_e = f64::INFINITY;
    for (addr, node) in &pruned.nodes {
        if addr.len() == 1 {
            check(node.energy_density >= floor, format!("node {addr:?}: energy {} < {floor}", node.energy_density))?;
            min_e = min_e.min(node.energy_density);
        }
    }
    Ok(format!("arity {} -> {}, worst deviation {:.4}, min child energy {min_e:.4} (floor {floor:.4})", built.arity, pruned.arity, rep.worst))
}

fn c11() -> Outcome {
    let delta: f64 = 0.02;
    let bound = |n: usize| delta.powf(0.01) * (n as f64).sqrt();
    let audit = |pts: &[SpherePoint], n: usize, label: &str| -> Result<usize, String> {
        let out = exact_orthogonalize(pts, delta, 0.01);
        let gram = max_gram_off_diagonal(&out.points);
        check(gram <= 1e-12 * n as f64, format!("{label}: Gram off-diagonal {gram:.3e}"))?;
        for (i, p) in out.accepted.iter().zip(&out.points) {
            let moved = norm(&p.coords.iter().zip(&pts[*i].coords).map(|(a, b)| a - b).collect::<Vec<_>>());
            check(moved <= bound(n), format!("{label}: point {i} moved {moved}"))?;
        }
        Ok(out.accepted.len())
    };
    // trivial suite: already orthogonal points
    let n = 30;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let raw = DMatrix::from_fn(n, 5, |_, _| rng.random::<f64>() - 0.5);
    let q = raw.qr().q();
    let trivial: Vec<SpherePoint> = (0..5).map(|j| SpherePoint::new(q.column(j).iter().map(|v| v * (n as f64).sqrt()).collect())).collect();
    let kept = audit(&trivial, n, "trivial")?;
    check(kept == 5, format!("trivial suite kept {kept} of 5"))?;
    // random suite: 50 uniform points in N = 500
    let n = 500;
    let random: Vec<SpherePoint> = (0..50).map(|_| SpherePoint::new(random_sphere_point(n, (n as f64).sqrt(), &mut rng))).collect();
    let kept_r = audit(&random, n, "random")?;
    Ok(format!("trivial kept 5/5, random kept {kept_r}/50"))
}

fn c12() -> Outcome {
    let m = one_rsb();
    let rf = RateFunction::new(m.clone()).map_err(|e| e.to_string())?;
    let (e0, r0) = (rf.params.e0, rf.params.r0);
    let grid: Vec<f64> = (0..20).map(|i| e0 + 0.05 * i as f64).collect();
    let curve = rf.curve(&grid).map_err(|e| e.to_string())?;
    for w in curve.windows(2) {
        check(w[1].theta_star < w[0].theta_star, format!("Theta+ not decreasing at E = {}", w[1].e))?;
    }
    let t0 = curve[0].theta_star;
    check(t0.abs() <= 1e-8, format!("|Theta+(E0)| = {:.3e}", t0.abs()))?;
    let dr = (curve[0].r_star - r0).abs();
    check(dr <= 1e-6, format!("|R+(E0) - R0| = {dr:.3e}"))?;
    let kr = KacRice::new(m).map_err(|e| e.to_string())?;
    let sp = kr.split();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let e = rng.random_range(-3.0..6.0);
        let r = kr.r_min() + rng.random_range(0.0..9.0);
        let err = (kr.ridge(r) - sp.k1 * (e - sp.k2 * r).powi(2) - kr.theta(e, r)).abs();
        worst = worst.max(err);
    }
    check(worst <= 1e-10, format!("split residual {worst:.3e}"))?;
    Ok(format!("|Theta+(E0)| {:.1e}, |R+(E0)-R0| {dr:.1e}, split residual {worst:.1e}", t0.abs()))
}

fn main() {
    let criteria: [Criterion; 12] = [
        (1, c1, 1),
        (2, c2, 1),
        (3, c3, 1),
        (4, c4, 10),
        (5, c5, 120),
        (6, c6, 600),
        (7, c7, 60),
        (8, c8, 150),
        (9, c9, 60),
        (10, c10, 900),
        (11, c11, 5),
        (12, c12, 30),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failures = 0;
    for (id, f, budget) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(msg) if secs > budget as f64 => Err(format!("{msg}; runtime {secs:.1} s exceeds {budget} s")),
            o => o,
        };
        match outcome {
            Ok(msg) => println!("PASS criterion {id}: {msg} ({secs:.2} s)"),
            Err(msg) => {
                failures += 1;
                println!("FAIL criterion {id}: {msg} ({secs:.2} s)");
            }
        }
    }
    if failures > 0 {
        println!("{failures} criterion/criteria failed");
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
