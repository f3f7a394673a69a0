//! Sampled mixed p-spin Hamiltonians and their exact derivatives.
//!
//! The literal sum Σ g_{i₁…i_p} σ_{i₁}⋯σ_{i_p} over all N^p index tuples
//! only depends on the symmetrised coefficients: grouping the tuples that
//! are permutations of a sorted multi-index s = (i₁ ≤ … ≤ i_p) gives
//! J_s σ^s with J_s the sum of c(s) i.i.d. standard Gaussians, where c(s) is
//! the number of distinct permutations of s.  We therefore store
//! J_s = √c(s)·z_s for i.i.d. z_s, which has exactly the law of the dense
//! tensor while using C(N+p−1, p) instead of N^p numbers.
//!
//! Coefficients are laid out in lexicographic order of s, so for a fixed
//! prefix (i₁, …, i_{p−1}) the last index runs over a contiguous block; all
//! contractions are organised as dot products / axpys over these blocks.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mixture::Mixture;
use crate::rng::GaussianStream;

/// Default memory cap for coefficient storage: 2 GiB.
pub const DEFAULT_MEMORY_CAP: u64 = 2 << 30;

/// Binomial coefficient as u128 (saturating).
pub fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n.saturating_sub(k));
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(u128::from(n - i)) / u128::from(i + 1);
    }
    r
}

/// Number of sorted multi-indices of length p over N symbols.
pub fn coefficient_count(n: usize, p: usize) -> u128 {
    binomial((n + p - 1) as u64, p as u64)
}

/// Coefficients of one degree.
#[derive(Debug, Clone)]
struct Degree {
    p: usize,
    /// γ_p N^{−(p−1)/2}.
    scale: f64,
    coeffs: Vec<f64>,
}

/// A sampled Hamiltonian H_N(σ) = Σ_p γ_p N^{−(p−1)/2} Σ g_{i₁…i_p} σ_{i₁}⋯σ_{i_p}.
///
/// Deterministic in (mixture, N, seed): degree p draws its coefficients from
/// the Gaussian stream keyed by (seed, p) in lexicographic multi-index order.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    n: usize,
    mixture: Mixture,
    seed: u64,
    degrees: Vec<Degree>,
}

/// Visits every sorted prefix (i₁ ≤ … ≤ i_{p−1}) of a degree-p block in
/// lexicographic order, passing the prefix and the offset of its run of
/// last indices k = i_{p−1}, …, N−1.
fn for_each_prefix<F: FnMut(&[usize], usize)>(n: usize, p: usize, mut f: F) {
    if p == 1 {
        f(&[], 0);
        return;
    }
    let mut prefix = vec![0usize; p - 1];
    let mut offset = 0usize;
    loop {
        f(&prefix, offset);
        offset += n - prefix[p - 2];
        // Advance to the next nondecreasing prefix.
        let mut j = p - 1;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            if prefix[j] + 1 < n {
                let v = prefix[j] + 1;
                for slot in prefix[j..].iter_mut() {
                    *slot = v;
                }
                break;
            }
        }
    }
}

/// Start of the run of last indices for a prefix.
#[inline]
fn run_start(prefix: &[usize]) -> usize {
    prefix.last().copied().unwrap_or(0)
}

impl Hamiltonian {
    /// Samples with the default memory cap.
    pub fn sample(m: &Mixture, n: usize, seed: u64) -> Result<Self> {
        Self::sample_with_cap(m, n, seed, DEFAULT_MEMORY_CAP)
    }

    /// Samples, failing if coefficient storage would exceed `cap` bytes.
    pub fn sample_with_cap(m: &Mixture, n: usize, seed: u64, cap: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("dimension N = {n} must be at least 2")));
        }
        let mut needed: u128 = 0;
        for p in m.support() {
            needed = needed.saturating_add(coefficient_count(n, p).saturating_mul(8));
            if needed > u128::from(cap) {
                return Err(Error::MemoryCap { degree: p, needed: needed.min(u128::from(u64::MAX)) as u64, cap });
            }
        }
        let fact: Vec<f64> = (0..=m.degree().max(1))
            .scan(1.0, |acc, i| {
                if i > 0 {
                    *acc *= i as f64;
                }
                Some(*acc)
            })
            .collect();
        let degrees = m
            .support()
            .into_iter()
            .map(|p| {
                let len = coefficient_count(n, p) as usize;
                let mut coeffs = Vec::with_capacity(len);
                let mut stream = GaussianStream::new(seed, p as u64);
                for_each_prefix(n, p, |prefix, _| {
                    // Multiplicity denominator Π m_i! of the prefix runs.
                    let mut den = 1.0;
                    let mut run = 0usize;
                    for (i, &v) in prefix.iter().enumerate() {
                        run = if i > 0 && prefix[i - 1] == v { run + 1 } else { 1 };
                        den *= run as f64;
                    }
                    let last = run_start(prefix);
                    for k in last..n {
                        let d = if p > 1 && k == last { den * (run + 1) as f64 } else { den };
                        coeffs.push((fact[p] / d).sqrt() * stream.next_gaussian());
                    }
                });
                debug_assert_eq!(coeffs.len(), len);
                Degree { p, scale: m.gamma(p) * (n as f64).powf(-((p - 1) as f64) / 2.0), coeffs }
            })
            .collect();
        Ok(Hamiltonian { n, mixture: m.clone(), seed, degrees })
    }

    /// Dimension N.
    pub fn n(&self) -> usize {
        self.n
    }

    /// The mixture the coefficients were drawn for.
    pub fn mixture(&self) -> &Mixture {
        &self.mixture
    }

    /// Master seed of the coefficients.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Bytes of coefficient storage.
    pub fn storage_bytes(&self) -> usize {
        self.degrees.iter().map(|d| d.coeffs.len() * 8).sum()
    }

    fn check(&self, x: &[f64]) {
        assert_eq!(x.len(), self.n, "point has dimension {} but N = {}", x.len(), self.n);
    }

    /// H_N(σ).
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.check(x);
        let n = self.n;
        let mut total = 0.0;
        for d in &self.degrees {
            let mut e = 0.0;
            for_each_prefix(n, d.p, |prefix, off| {
                let prod: f64 = prefix.iter().map(|&i| x[i]).product();
                let s = run_start(prefix);
                let run = &d.coeffs[off..off + n - s];
                let dot: f64 = run.iter().zip(&x[s..]).map(|(a, b)| a * b).sum();
                e += prod * dot;
            });
            total += d.scale * e;
        }
        total
    }

    /// H_N(σ) and its Euclidean gradient.
    pub fn eval_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.check(x);
        let n = self.n;
        let mut total = 0.0;
        let mut grad = vec![0.0; n];
        let mut g = vec![0.0; n];
        for d in &self.degrees {
            g.iter_mut().for_each(|v| *v = 0.0);
            let mut e = 0.0;
            let mut loo = vec![0.0; d.p.saturating_sub(1)];
            for_each_prefix(n, d.p, |prefix, off| {
                let s = run_start(prefix);
                let run = &d.coeffs[off..off + n - s];
                leave_one_out(prefix, x, &mut loo);
                let prod: f64 = prefix.iter().map(|&i| x[i]).product();
                let dot: f64 = run.iter().zip(&x[s..]).map(|(a, b)| a * b).sum();
                e += prod * dot;
                for (gk, c) in g[s..].iter_mut().zip(run) {
                    *gk += prod * c;
                }
                for (j, &i) in prefix.iter().enumerate() {
                    g[i] += loo[j] * dot;
                }
            });
            total += d.scale * e;
            for (gv, v) in grad.iter_mut().zip(&g) {
                *gv += d.scale * v;
            }
        }
        (total, grad)
    }

    /// Euclidean gradient ∇H_N(σ).
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.eval_grad(x).1
    }

    /// Euclidean Hessian ∇²H_N(σ); exactly symmetric by construction.
    pub fn hess(&self, x: &[f64]) -> DMatrix<f64> {
        self.check(x);
        let n = self.n;
        let mut total = DMatrix::<f64>::zeros(n, n);
        for d in &self.degrees {
            if d.p < 2 {
                continue;
            }
            // A accumulates each unordered pair of factor positions once.
            let mut a = DMatrix::<f64>::zeros(n, n);
            let mut loo = vec![0.0; d.p - 1];
            let mut loo2 = vec![0.0; (d.p - 1) * (d.p - 1)];
            for_each_prefix(n, d.p, |prefix, off| {
                let s = run_start(prefix);
                let run = &d.coeffs[off..off + n - s];
                leave_one_out(prefix, x, &mut loo);
                leave_two_out(prefix, x, &mut loo2);
                let dot: f64 = run.iter().zip(&x[s..]).map(|(a, b)| a * b).sum();
                let m = prefix.len();
                for j in 0..m {
                    for jj in (j + 1)..m {
                        a[(prefix[j], prefix[jj])] += loo2[j * m + jj] * dot;
                    }
                    let w = loo[j];
                    if w != 0.0 {
                        let row = prefix[j];
                        for (k, c) in run.iter().enumerate() {
                            a[(s + k, row)] += w * c;
                        }
                    }
                }
            });
            let sym = &a + a.transpose();
            total += sym * d.scale;
        }
        total
    }
}

/// Products of all prefix factors but one: out[j] = Π_{l≠j} x_{prefix[l]}.
fn leave_one_out(prefix: &[usize], x: &[f64], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate().take(prefix.len()) {
        *o = prefix.iter().enumerate().filter(|&(l, _)| l != j).map(|(_, &i)| x[i]).product();
    }
}

/// Products of all prefix factors but two: out[j·m + j′] for j < j′.
fn leave_two_out(prefix: &[usize], x: &[f64], out: &mut [f64]) {
    let m = prefix.len();
    for j in 0..m {
        for jj in (j + 1)..m {
            out[j * m + jj] = prefix.iter().enumerate().filter(|&(l, _)| l != j && l != jj).map(|(_, &i)| x[i]).product();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn mix(g: &[f64]) -> Mixture {
        Mixture::new(g.to_vec()).unwrap()
    }

    /// Literal evaluation Σ_{all tuples} T_{i₁…i_p} σ_{i₁}⋯σ_{i_p} with
    /// T the dense tensor that spreads each J_s evenly over the permutations
    /// of s.
    fn dense_eval(h: &Hamiltonian, x: &[f64]) -> f64 {
        let n = h.n;
        let mut total = 0.0;
        for d in &h.degrees {
            // Map sorted multi-index -> coefficient by replaying the layout.
            let mut table = std::collections::HashMap::new();
            for_each_prefix(n, d.p, |prefix, off| {
                let s = run_start(prefix);
                for k in s..n {
                    let mut key = prefix.to_vec();
                    key.push(k);
                    table.insert(key, d.coeffs[off + k - s]);
                }
            });
            let count = |key: &Vec<usize>| -> f64 {
                let mut fact = 1.0;
                let mut p_fact = 1.0;
                let mut run = 0;
                for i in 0..key.len() {
                    p_fact *= (i + 1) as f64;
                    run = if i > 0 && key[i] == key[i - 1] { run + 1 } else { 1 };
                    fact *= run as f64;
                }
                p_fact / fact
            };
            let mut idx = vec![0usize; d.p];
            let mut e = 0.0;
            loop {
                let mut key = idx.clone();
                key.sort_unstable();
                let j = table[&key] / count(&key);
                e += j * idx.iter().map(|&i| x[i]).product::<f64>();
                let mut pos = 0;
                loop {
                    if pos == d.p {
                        break;
                    }
                    idx[pos] += 1;
                    if idx[pos] < n {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
                if pos == d.p {
                    break;
                }
            }
            total += d.scale * e;
        }
        total
    }

    #[test]
    fn layout_matches_dense_contraction() {
        let h = Hamiltonian::sample(&mix(&[0.3, 0.8, 1.0, 0.5]), 5, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let x: Vec<f64> = (0..5).map(|_| StandardNormal.sample(&mut rng)).collect();
            let a = h.eval(&x);
            let b = dense_eval(&h, &x);
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn coefficient_counts() {
        assert_eq!(coefficient_count(5, 3), 35);
        assert_eq!(coefficient_count(200, 4), 68_685_050);
        let h = Hamiltonian::sample(&mix(&[0.0, 1.0, 1.0]), 7, 3).unwrap();
        assert_eq!(h.storage_bytes(), 8 * (28 + 84));
    }

    #[test]
    fn symmetrised_coefficients_have_permutation_count_variance() {
        // Index (0, 0, 1) has 3 permutations, (0, 1, 2) has 6, (0, 0, 0) one.
        let m = mix(&[0.0, 0.0, 1.0]);
        let mut acc = [0.0f64; 3];
        let draws = 4000;
        for seed in 0..draws {
            let h = Hamiltonian::sample(&m, 3, seed).unwrap();
            let c = &h.degrees[0].coeffs;
            // Layout for N = 3: (0,0,0) (0,0,1) (0,0,2) (0,1,1) (0,1,2) ...
            acc[0] += c[0] * c[0];
            acc[1] += c[1] * c[1];
            acc[2] += c[4] * c[4];
        }
        for (a, want) in acc.iter().zip([1.0, 3.0, 6.0]) {
            let v = a / draws as f64;
            // Standard error of a chi-square mean: want·√(2/draws).
            assert!((v - want).abs() < 4.0 * want * (2.0 / draws as f64).sqrt(), "{v} vs {want}");
        }
    }

    #[test]
    fn memory_cap_names_the_degree() {
        let m = mix(&[0.0, 1.0, 0.0, 1.0]);
        match Hamiltonian::sample_with_cap(&m, 100, 0, 10_000_000) {
            Err(Error::MemoryCap { degree, .. }) => assert_eq!(degree, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Hamiltonian::sample(&m, 1, 0).is_err());
    }
}
