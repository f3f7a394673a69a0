//! Shared fixtures for the spinlab benchmarks: the reference mixtures and
//! deterministic Hamiltonians and points at benchmark sizes.

use spinlab_core::landscape::{random_sphere_point, Hamiltonian};
use spinlab_core::rng::task_rng;
use spinlab_core::Mixture;

/// ξ = q³ + ½q⁴, the strictly one-step reference mixture.
pub fn one_step_mixture() -> Mixture {
    Mixture::new(vec![0.0, 0.0, 1.0, 0.5f64.sqrt()]).expect("valid mixture")
}

/// ξ = q², the pure 2-spin model.
pub fn two_spin() -> Mixture {
    Mixture::pure(2, 1.0).expect("valid mixture")
}

/// ξ = q² + q³, a mixture with mixed even and odd degrees.
pub fn mixed_two_three() -> Mixture {
    Mixture::new(vec![0.0, 1.0, 1.0]).expect("valid mixture")
}

/// A Hamiltonian of `m` at dimension `n` with a fixed seed.
pub fn hamiltonian(m: &Mixture, n: usize) -> Hamiltonian {
    Hamiltonian::sample(m, n, 0xbe7c).expect("benchmark sizes fit the memory cap")
}

/// A fixed point of the sphere S_N.
pub fn sphere_point(n: usize) -> Vec<f64> {
    random_sphere_point(n, (n as f64).sqrt(), &mut task_rng(0xbe7c, "bench-point", n as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic() {
        assert_eq!(sphere_point(10), sphere_point(10));
        let p = sphere_point(25);
        assert!((p.iter().map(|v| v * v).sum::<f64>() - 25.0).abs() < 1e-9);
        let h = hamiltonian(&mixed_two_three(), 12);
        assert_eq!(h.eval(&p[..12]), hamiltonian(&mixed_two_three(), 12).eval(&p[..12]));
        assert!(two_spin().is_pure() && !one_step_mixture().is_pure());
    }
}
