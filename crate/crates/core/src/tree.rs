//! Ultrametric trees of near-optimisers: construction, pruning, verification
//! and exact orthogonalization.
//!
//! A tree of arity k and depth D has vertices 𝕋(k, D) = {∅} ∪ [k] ∪ … ∪ [k]^D,
//! addressed by 1-based index sequences ("", "2", "2.1", …).  The node at
//! depth d sits at squared norm q_d·N, where q⃗ = (q_0, …, q_D) is the radius
//! schedule.  If all increments σ^{ui} − σ^u are mutually orthogonal, the
//! overlaps telescope: R(σ^u, σ^v) = q_{u∧v}, with u∧v the deepest common
//! ancestor.
//!
//! Children of a node σ^u are placed on the shell {σ^u + τ : τ ⊥ σ^u,
//! ‖τ‖² = (q_{d+1} − q_d)N}.  Each child starts from a Hessian-ascent path
//! inside that shell, orthogonal to the increments of its earlier siblings.
//! It is then polished by gradient ascent on H_N − λN·Σ_j R(τ, τ_j)², where
//! the τ_j are the increments of the earlier siblings.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{ascend, best_ascent, dot, norm, overlap, AscentOptions, Hamiltonian, Landscape, SpherePoint, SphereSlice};
use crate::mixture::Covariance;
use crate::rng::task_rng;
use crate::subag::{orthonormalize, slice_hessian_ascent};

/// A tree address: 1-based child indices from the root.
pub type Address = Vec<usize>;

/// Formats an address as "i1.i2.…" (the root is "").
pub fn address_string(a: &[usize]) -> String {
    a.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(".")
}

/// Parses an address string produced by [`address_string`].
pub fn parse_address(s: &str) -> Result<Address> {
    if s.is_empty() {
        return Ok(vec![]);
    }
    s.split('.')
        .map(|t| match t.parse::<usize>() {
            Ok(i) if i >= 1 => Ok(i),
            _ => Err(Error::Invalid(format!("bad tree address {s:?}"))),
        })
        .collect()
}

/// All addresses of 𝕋(k, D) in breadth-first order (by depth, then
/// lexicographically).
pub fn addresses(k: usize, depth: usize) -> Vec<Address> {
    let mut out = vec![vec![]];
    let mut layer: Vec<Address> = vec![vec![]];
    for _ in 0..depth {
        let next: Vec<Address> = layer
            .iter()
            .flat_map(|a| {
                (1..=k).map(move |i| {
                    let mut b = a.clone();
                    b.push(i);
                    b
                })
            })
            .collect();
        out.extend(next.iter().cloned());
        layer = next;
    }
    if k == 0 {
        out.truncate(1);
    }
    out
}

/// Depth of the deepest common ancestor u∧v.
pub fn common_depth(u: &[usize], v: &[usize]) -> usize {
    u.iter().zip(v).take_while(|(a, b)| a == b).count()
}

/// One vertex of an [`UltraTree`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// The point σ^u.
    pub point: SpherePoint,
    /// H_N(σ^u)/N.
    pub energy_density: f64,
    /// True if construction missed the energy target of this node.
    pub deficient: bool,
    /// Address of this node when the tree was built (pruning relabels).
    pub origin: Address,
}

/// A rooted k-ary tree of points with recorded energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UltraTree {
    /// Ambient dimension N.
    pub n: usize,
    /// Arity k.
    pub arity: usize,
    /// Depth D.
    pub depth: usize,
    /// Radius schedule (q_0, …, q_D).
    pub radii: Vec<f64>,
    /// Energy targets E(q_0), …, E(q_D).
    pub profile: Vec<f64>,
    /// Ultrametric tolerance δ.
    pub delta: f64,
    /// Nodes keyed by address.
    pub nodes: BTreeMap<Address, TreeNode>,
}

/// Relative tolerance of the node-radius invariant.
const RADIUS_TOL: f64 = 1e-9;

impl UltraTree {
    /// Assembles a tree, checking that the addresses are exactly 𝕋(k, D)
    /// and that every node at depth d has ‖σ‖² = q_d·N.
    pub fn new(n: usize, arity: usize, radii: Vec<f64>, profile: Vec<f64>, delta: f64, nodes: BTreeMap<Address, TreeNode>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::Invalid("radius schedule must be nonempty".into()));
        }
        if profile.len() != radii.len() {
            return Err(Error::Invalid(format!("profile has {} entries for {} radii", profile.len(), radii.len())));
        }
        if !radii.windows(2).all(|w| w[0] < w[1]) || radii[0] < 0.0 || *radii.last().unwrap() > 1.0 {
            return Err(Error::Invalid(format!("radii {radii:?} must increase strictly within [0, 1]")));
        }
        let depth = radii.len() - 1;
        let want = addresses(arity, depth);
        if nodes.len() != want.len() || want.iter().any(|a| !nodes.contains_key(a)) {
            return Err(Error::Invalid(format!("node set is not T({arity}, {depth})")));
        }
        let nf = n as f64;
        for (a, node) in &nodes {
            if node.point.coords.len() != n {
                return Err(Error::Invalid(format!("node {:?} has dimension {}", address_string(a), node.point.coords.len())));
            }
            let q = radii[a.len()];
            if (node.point.norm2 - q * nf).abs() > RADIUS_TOL * nf {
                return Err(Error::Invalid(format!("node {:?} has |sigma|^2 = {}, expected {}", address_string(a), node.point.norm2, q * nf)));
            }
        }
        Ok(UltraTree { n, arity, depth, radii, profile, delta, nodes })
    }

    /// The node at `a`.
    pub fn node(&self, a: &[usize]) -> Option<&TreeNode> {
        self.nodes.get(a)
    }

    /// Addresses in breadth-first order.
    pub fn breadth_first(&self) -> Vec<Address> {
        addresses(self.arity, self.depth).into_iter().filter(|a| self.nodes.contains_key(a)).collect()
    }

    /// Leaf addresses (depth D; the root if k = 0 or D = 0).
    pub fn leaves(&self) -> Vec<Address> {
        let d = if self.arity == 0 { 0 } else { self.depth };
        self.nodes.keys().filter(|a| a.len() == d).cloned().collect()
    }

    /// Addresses of deficient nodes.
    pub fn deficient(&self) -> Vec<String> {
        self.nodes.iter().filter(|(_, nd)| nd.deficient).map(|(a, _)| address_string(a)).collect()
    }

    /// Increment σ^u − σ^{parent(u)} (σ^∅ for the root).
    pub fn increment(&self, a: &[usize]) -> Vec<f64> {
        let x = &self.nodes[a].point.coords;
        if a.is_empty() {
            return x.clone();
        }
        let p = &self.nodes[&a[..a.len() - 1]].point.coords;
        x.iter().zip(p).map(|(u, v)| u - v).collect()
    }

    /// Largest |R(σ^u, σ^v)| over distinct leaves (0 with fewer than two).
    pub fn max_leaf_overlap(&self) -> f64 {
        let leaves = self.leaves();
        let mut worst = 0.0f64;
        for (i, a) in leaves.iter().enumerate() {
            for b in &leaves[i + 1..] {
                worst = worst.max(self.nodes[a].point.overlap(&self.nodes[b].point).abs());
            }
        }
        worst
    }

    /// Empirical sup-norm constant C₀ = max_u |H_N(σ^u)|/N over the nodes.
    pub fn empirical_c0(&self) -> f64 {
        self.nodes.values().map(|nd| nd.energy_density.abs()).fold(0.0, f64::max)
    }

    /// JSON view: nodes keyed by address string with norms and energies.
    pub fn summary(&self) -> TreeSummary {
        TreeSummary {
            n: self.n,
            arity: self.arity,
            depth: self.depth,
            radii: self.radii.clone(),
            profile: self.profile.clone(),
            delta: self.delta,
            nodes: self
                .nodes
                .iter()
                .map(|(a, nd)| {
                    (
                        address_string(a),
                        NodeSummary {
                            point_norm2: nd.point.norm2,
                            energy_density: nd.energy_density,
                            deficient: nd.deficient,
                            origin: address_string(&nd.origin),
                        },
                    )
                })
                .collect(),
        }
    }
}

/// Serialisable summary of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    /// ‖σ^u‖².
    pub point_norm2: f64,
    /// H_N(σ^u)/N.
    pub energy_density: f64,
    /// Missed its energy target during construction.
    pub deficient: bool,
    /// Address at construction time.
    pub origin: String,
}

/// Serialisable summary of a tree (coordinates go to the sidecar file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSummary {
    /// Ambient dimension.
    pub n: usize,
    /// Arity.
    pub arity: usize,
    /// Depth.
    pub depth: usize,
    /// Radius schedule.
    pub radii: Vec<f64>,
    /// Energy targets.
    pub profile: Vec<f64>,
    /// Ultrametric tolerance.
    pub delta: f64,
    /// Nodes keyed by address string.
    pub nodes: BTreeMap<String, NodeSummary>,
}

/// Magic bytes of the coordinate sidecar.
const SIDECAR_MAGIC: &[u8; 4] = b"UTRE";

/// Writes node coordinates: magic "UTRE", N and the node count as
/// little-endian u64, then one row of N little-endian f64 per node in
/// address order.
pub fn write_sidecar<W: Write>(tree: &UltraTree, mut w: W) -> Result<()> {
    w.write_all(SIDECAR_MAGIC)?;
    w.write_all(&(tree.n as u64).to_le_bytes())?;
    w.write_all(&(tree.nodes.len() as u64).to_le_bytes())?;
    for nd in tree.nodes.values() {
        for v in &nd.point.coords {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the sidecar to a file.
pub fn write_sidecar_file(tree: &UltraTree, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_sidecar(tree, std::io::BufWriter::new(f))
}

/// Reads a sidecar: returns N and the coordinate rows.
pub fn read_sidecar<R: Read>(mut r: R) -> Result<(usize, Vec<Vec<f64>>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SIDECAR_MAGIC {
        return Err(Error::Invalid("not a tree coordinate file (bad magic)".into()));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let count = u64::from_le_bytes(word) as usize;
    let mut rows = Vec::with_capacity(count);
    for _ in 0..count {
        let mut row = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut word)?;
            row.push(f64::from_le_bytes(word));
        }
        rows.push(row);
    }
    Ok((n, rows))
}

/// Verification scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMode {
    /// All pairs of vertices.
    Global,
    /// Pairs u ∼ v: u = v, siblings, or parent and child.
    Local,
}

/// Result of [`verify_ultrametric`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UltraReport {
    /// max |R(σ^u, σ^v) − q_{u∧v}| over the checked pairs.
    pub worst: f64,
    /// The offending pair (address strings), if any pair was checked.
    pub pair: Option<(String, String)>,
    /// worst ≤ δ.
    pub passes: bool,
    /// Number of pairs checked.
    pub pairs: usize,
}

fn related(u: &[usize], v: &[usize]) -> bool {
    if u == v {
        return true;
    }
    if u.len() == v.len() && !u.is_empty() && u[..u.len() - 1] == v[..v.len() - 1] {
        return true;
    }
    let (a, b) = if u.len() < v.len() { (u, v) } else { (v, u) };
    b.len() == a.len() + 1 && &b[..a.len()] == a
}

/// Worst violation of |R(σ^u, σ^v) − q_{u∧v}| ≤ δ.
pub fn verify_ultrametric(t: &UltraTree, mode: VerifyMode) -> UltraReport {
    let keys: Vec<&Address> = t.nodes.keys().collect();
    let mut worst = 0.0f64;
    let mut pair = None;
    let mut pairs = 0;
    for (i, u) in keys.iter().enumerate() {
        for v in &keys[i..] {
            if mode == VerifyMode::Local && !related(u, v) {
                continue;
            }
            pairs += 1;
            let r = t.nodes[*u].point.overlap(&t.nodes[*v].point);
            let dev = (r - t.radii[common_depth(u, v)]).abs();
            if pair.is_none() || dev > worst {
                worst = dev;
                pair = Some((address_string(u), address_string(v)));
            }
        }
    }
    UltraReport { worst, pair, passes: worst <= t.delta, pairs }
}

/// Configuration of [`build_tree`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Radius schedule (q_0, …, q_D), typically an S-refinement.
    pub radii: Vec<f64>,
    /// Energy targets E(q_0), …, E(q_D) from the energy profile.
    pub profile: Vec<f64>,
    /// Arity k.
    pub arity: usize,
    /// Ultrametric tolerance δ.
    pub delta: f64,
    /// Energy slack ε; a node is deficient if its energy increment falls
    /// short of the profile increment by more than ε/(D+1).
    pub eps: f64,
    /// Restarts of the root ascent (unused when q_0 = 0).
    pub root_restarts: usize,
    /// Hessian-ascent steps used to initialise each child.
    pub init_steps: usize,
    /// Gradient steps of each polish.
    pub max_steps: usize,
    /// Gradient tolerance (relative to √N) of each polish.
    pub grad_tol: f64,
    /// Penalty weight λ; `None` means 10·ξ′(1).
    pub penalty: Option<f64>,
    /// Master seed.
    pub seed: u64,
}

impl TreeConfig {
    /// Defaults for a schedule and profile: arity 4, δ = ε = 0.15,
    /// 4 root restarts, 50 Hessian steps, 300 polish steps, tolerance 1e−4.
    pub fn new(radii: Vec<f64>, profile: Vec<f64>) -> Self {
        TreeConfig {
            radii,
            profile,
            arity: 4,
            delta: 0.15,
            eps: 0.15,
            root_restarts: 4,
            init_steps: 50,
            max_steps: 300,
            grad_tol: 1e-4,
            penalty: None,
            seed: 0,
        }
    }
}

/// H_N(x) − (λ/N)·Σ_j ⟨x − c, τ_j⟩², i.e. H_N − λN·Σ_j R(τ, τ_j)².
struct Penalized<'a> {
    h: &'a Hamiltonian,
    center: &'a [f64],
    prior: &'a [Vec<f64>],
    weight: f64,
}

impl Penalized<'_> {
    fn projections(&self, x: &[f64]) -> Vec<f64> {
        let tau: Vec<f64> = x.iter().zip(self.center).map(|(a, b)| a - b).collect();
        self.prior.iter().map(|p| dot(&tau, p)).collect()
    }
}

impl Landscape for Penalized<'_> {
    fn dim(&self) -> usize {
        self.h.n()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.h.eval(x) - self.weight * self.projections(x).iter().map(|c| c * c).sum::<f64>()
    }
    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (v, mut g) = self.h.eval_grad(x);
        let c = self.projections(x);
        for (cj, p) in c.iter().zip(self.prior) {
            g.iter_mut().zip(p).for_each(|(a, b)| *a -= 2.0 * self.weight * cj * b);
        }
        (v - self.weight * c.iter().map(|c| c * c).sum::<f64>(), g)
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = self.h.hess(x);
        let n = self.h.n();
        for p in self.prior {
            for j in 0..n {
                for i in 0..n {
                    m[(i, j)] -= 2.0 * self.weight * p[i] * p[j];
                }
            }
        }
        m
    }
}

/// Energy-increment threshold of a child at depth d+1 (density units).
fn increment_target(t_profile: &[f64], d: usize, eps: f64, depth: usize) -> f64 {
    t_profile[d + 1] - t_profile[d] - eps / (depth as f64 + 1.0)
}

/// Builds a tree layer by layer: the root by ascent on the sphere of radius
/// √(q_0N) (or the origin if q_0 = 0), then each child by Hessian ascent in
/// its shell followed by a penalised polish.  Nodes that miss their energy
/// target are flagged as deficient.
pub fn build_tree(h: &Hamiltonian, cfg: &TreeConfig) -> Result<UltraTree> {
    let n = h.n();
    let nf = n as f64;
    let depth = cfg.radii.len().checked_sub(1).ok_or_else(|| Error::Invalid("radius schedule must be nonempty".into()))?;
    if cfg.profile.len() != cfg.radii.len() {
        return Err(Error::Invalid(format!("profile has {} entries for {} radii", cfg.profile.len(), cfg.radii.len())));
    }
    if !cfg.radii.windows(2).all(|w| w[0] < w[1]) || cfg.radii[0] < 0.0 || *cfg.radii.last().unwrap() > 1.0 {
        return Err(Error::Invalid(format!("radii {:?} must increase strictly within [0, 1]", cfg.radii)));
    }
    if depth > 0 && cfg.arity == 0 {
        return Err(Error::Invalid("arity must be at least 1".into()));
    }
    if depth > 0 && (cfg.init_steps == 0 || cfg.init_steps > n) {
        return Err(Error::Invalid(format!("init_steps must lie in [1, N], got {}", cfg.init_steps)));
    }
    let lambda = cfg.penalty.unwrap_or(10.0 * h.mixture().d1(1.0));
    let opts = AscentOptions { max_steps: cfg.max_steps, grad_tol: cfg.grad_tol, ..AscentOptions::for_covariance(h.mixture()) };
    let mut nodes = BTreeMap::new();

    // root
    let q0 = cfg.radii[0];
    let root_point = if q0 == 0.0 {
        vec![0.0; n]
    } else {
        let runs = best_ascent(h, &SphereSlice::sphere(n, q0), cfg.root_restarts, &opts, cfg.seed, "tree-root");
        runs.into_iter().max_by(|a, b| a.value.total_cmp(&b.value)).expect("at least one restart").point
    };
    let root_energy = h.eval(&root_point) / nf;
    let root_def = root_energy < cfg.profile[0] - cfg.eps / (depth as f64 + 1.0);
    nodes.insert(vec![], TreeNode { point: SpherePoint::new(root_point), energy_density: root_energy, deficient: root_def, origin: vec![] });

    let sub_k = (nf / cfg.init_steps as f64).ceil() as usize;
    for d in 0..depth {
        let parents: Vec<Address> = nodes.keys().filter(|a| a.len() == d).cloned().collect();
        let inc_norm2 = (cfg.radii[d + 1] - cfg.radii[d]) * nf;
        for a in parents {
            let parent = nodes[&a].clone();
            let sigma = &parent.point.coords;
            let shell = SphereSlice::shell(sigma, inc_norm2);
            let mut prior: Vec<Vec<f64>> = Vec::new();
            for i in 1..=cfg.arity {
                let mut addr = a.clone();
                addr.push(i);
                let mut rng = task_rng(cfg.seed, &format!("tree-child:{}", address_string(&addr)), 0);
                // initial point: Hessian ascent orthogonal to earlier siblings
                let mut normals = shell.normals.clone();
                normals.extend(prior.iter().cloned());
                let init_slice = SphereSlice { center: sigma.clone(), normals: orthonormalize(&normals), radius: shell.radius };
                let k = sub_k.min(n.saturating_sub(init_slice.normals.len() + 1)).max(1);
                let (x0, _) = slice_hessian_ascent(h, &init_slice, cfg.init_steps, k, &mut rng, false)?;
                let pen = Penalized { h, center: sigma, prior: &prior, weight: lambda / nf };
                let res = ascend(&pen, &shell, &x0, &opts);
                let x = res.point;
                let energy = h.eval(&x) / nf;
                let deficient = energy - parent.energy_density < increment_target(&cfg.profile, d, cfg.eps, depth);
                prior.push(x.iter().zip(sigma).map(|(u, v)| u - v).collect());
                nodes.insert(addr.clone(), TreeNode { point: SpherePoint::new(x), energy_density: energy, deficient, origin: addr });
            }
        }
    }
    UltraTree::new(n, if depth == 0 { 0 } else { cfg.arity }, cfg.radii.clone(), cfg.profile.clone(), cfg.delta, nodes)
}

/// Largest balanced subtree whose non-root nodes all satisfy `keep`, using
/// the lexicographically first eligible children; addresses are relabeled
/// 1..a at every level.
fn balanced_subtree<F: Fn(&Address) -> bool>(t: &UltraTree, keep: F) -> UltraTree {
    // feasible(u, a): u has ≥ a kept children each feasible for a.
    fn feasible<F: Fn(&Address) -> bool>(t: &UltraTree, keep: &F, u: &Address, a: usize) -> bool {
        if u.len() == t.depth {
            return true;
        }
        let mut good = 0;
        for i in 1..=t.arity {
            let mut c = u.clone();
            c.push(i);
            if t.nodes.contains_key(&c) && keep(&c) && feasible(t, keep, &c, a) {
                good += 1;
                if good >= a {
                    return true;
                }
            }
        }
        false
    }
    let arity = if t.depth == 0 || t.arity == 0 { 0 } else { (1..=t.arity).rev().find(|&a| feasible(t, &keep, &vec![], a)).unwrap_or(0) };
    let mut nodes = BTreeMap::new();
    nodes.insert(vec![], t.nodes[&vec![]].clone());
    if arity > 0 {
        let mut stack: Vec<(Address, Address)> = vec![(vec![], vec![])];
        while let Some((old, new)) = stack.pop() {
            if old.len() == t.depth {
                continue;
            }
            let mut taken = 0;
            for i in 1..=t.arity {
                if taken == arity {
                    break;
                }
                let mut c = old.clone();
                c.push(i);
                if t.nodes.contains_key(&c) && keep(&c) && feasible(t, &keep, &c, arity) {
                    taken += 1;
                    let mut nc = new.clone();
                    nc.push(taken);
                    nodes.insert(nc.clone(), t.nodes[&c].clone());
                    stack.push((c, nc));
                }
            }
        }
    }
    UltraTree { n: t.n, arity, depth: t.depth, radii: t.radii.clone(), profile: t.profile.clone(), delta: t.delta, nodes }
}

/// Keeps children whose energy increment meets
/// E(q_{d+1}) − E(q_d) − ε/(D+1) and returns the largest balanced subtree.
pub fn prune_energy(t: &UltraTree, eps: f64) -> UltraTree {
    balanced_subtree(t, |c| {
        let d = c.len() - 1;
        let parent = &t.nodes[&c[..d]];
        t.nodes[c].energy_density - parent.energy_density >= increment_target(&t.profile, d, eps, t.depth)
    })
}

/// Breadth-first admission of children whose increment has
/// |R(τ, c)| ≤ δ/D² against every increment c accepted so far; returns the
/// largest balanced subtree of admitted nodes.
pub fn prune_overlap(t: &UltraTree, delta: f64) -> UltraTree {
    if t.depth == 0 || t.arity == 0 {
        return t.clone();
    }
    let bound = delta / (t.depth * t.depth) as f64;
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    let mut admitted: std::collections::BTreeSet<Address> = std::collections::BTreeSet::new();
    let mut reachable: std::collections::BTreeSet<Address> = std::collections::BTreeSet::new();
    reachable.insert(vec![]);
    for a in t.breadth_first() {
        if a.is_empty() || !reachable.contains(&a[..a.len() - 1]) {
            continue;
        }
        let tau = t.increment(&a);
        if accepted.iter().all(|c| overlap(&tau, c).abs() <= bound) {
            accepted.push(tau);
            admitted.insert(a.clone());
            reachable.insert(a);
        }
    }
    balanced_subtree(t, |c| admitted.contains(c))
}

/// Markov-type lower bound ε/(4C₀(D+1)) on the fraction of children that
/// survive [`prune_energy`] when the mean increment is within ε/(2(D+1))
/// of its target and |increments|, |target| ≤ C₀.
pub fn markov_survival_bound(eps: f64, depth: usize, c0: f64) -> f64 {
    eps / (4.0 * c0 * (depth as f64 + 1.0))
}

/// The k-replica increment objective (1/(kN))·Σ_i [H_N(σ + ρ_i) − H_N(σ)].
pub fn increment_objective(h: &Hamiltonian, sigma: &[f64], increments: &[Vec<f64>]) -> f64 {
    let base = h.eval(sigma);
    let k = increments.len() as f64;
    increments
        .iter()
        .map(|r| {
            let x: Vec<f64> = sigma.iter().zip(r).map(|(a, b)| a + b).collect();
            h.eval(&x) - base
        })
        .sum::<f64>()
        / (k * h.n() as f64)
}

/// Result of [`exact_orthogonalize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orthogonalized {
    /// Indices of the accepted inputs, in input order.
    pub accepted: Vec<usize>,
    /// The adjusted, exactly orthogonal points (same order).
    pub points: Vec<SpherePoint>,
}

/// Greedy exact orthogonalization: each input is projected onto the
/// orthogonal complement of the points accepted so far and rescaled to its
/// original norm; it is accepted if it moved by at most δ^exponent·‖σ‖.
pub fn exact_orthogonalize(points: &[SpherePoint], delta: f64, exponent: f64) -> Orthogonalized {
    let threshold = delta.powf(exponent);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut out = Orthogonalized { accepted: vec![], points: vec![] };
    for (i, p) in points.iter().enumerate() {
        let s = norm(&p.coords);
        if !(s > 0.0) {
            continue;
        }
        let mut w = p.coords.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let wn = norm(&w);
        if !(wn > 1e-12 * s) {
            continue;
        }
        let unit: Vec<f64> = w.iter().map(|x| x / wn).collect();
        let adjusted: Vec<f64> = unit.iter().map(|x| x * s).collect();
        let moved = norm(&adjusted.iter().zip(&p.coords).map(|(a, b)| a - b).collect::<Vec<_>>());
        if moved <= threshold * s {
            basis.push(unit);
            out.accepted.push(i);
            out.points.push(SpherePoint::new(adjusted));
        }
    }
    out
}

/// Largest |⟨σ^a, σ^b⟩| over distinct pairs.
pub fn max_gram_off_diagonal(points: &[SpherePoint]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            worst = worst.max(dot(&a.coords, &b.coords).abs());
        }
    }
    worst
}
