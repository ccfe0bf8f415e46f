//! Seeded random networks for property suites.
//!
//! The random source is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded through
//! `SeedableRng::seed_from_u64`. A spanning tree is drawn from a uniform
//! Prüfer sequence, extra branches are sampled without replacement from the
//! remaining node pairs, and admittance magnitudes are log-uniform.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{Branch, Network, NodeId, Shunt};
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhasePolicy {
    /// Branch conductances strictly positive (phase within ±0.45π).
    RePositive,
    /// Branch phase uniform on the circle; shunts stay passive.
    Arbitrary,
    /// Purely reactive branches and shunts, random sign.
    PureImaginary,
}

impl std::str::FromStr for PhasePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "re-positive" | "re_positive" => Ok(PhasePolicy::RePositive),
            "arbitrary" => Ok(PhasePolicy::Arbitrary),
            "pure-imaginary" | "pure_imaginary" => Ok(PhasePolicy::PureImaginary),
            other => Err(Error::Parse(format!("unknown phase policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    /// Inclusive range for the node count.
    pub nodes: (usize, usize),
    /// Fraction of non-tree node pairs that receive an extra branch.
    pub edge_density: f64,
    /// Per-node probability of carrying a shunt.
    pub shunt_probability: f64,
    /// Force at least one shunt.
    pub require_shunt: bool,
    /// Inclusive range for admittance magnitudes, siemens.
    pub magnitude: (f64, f64),
    pub phase: PhasePolicy,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            nodes: (5, 50),
            edge_density: 0.1,
            shunt_probability: 0.0,
            require_shunt: false,
            magnitude: (1e-2, 1e2),
            phase: PhasePolicy::RePositive,
            seed: 0,
        }
    }
}

impl GenSpec {
    pub fn with_seed(&self, seed: u64) -> GenSpec {
        GenSpec { seed, ..self.clone() }
    }

    fn check(&self) -> Result<()> {
        let (lo, hi) = self.nodes;
        if lo == 0 || lo > hi {
            return Err(Error::Precondition(format!("invalid node range {lo}..={hi}")));
        }
        for (name, v) in [
            ("edge_density", self.edge_density),
            ("shunt_probability", self.shunt_probability),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Precondition(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        let (mlo, mhi) = self.magnitude;
        if !(mlo > 0.0 && mlo <= mhi && mhi.is_finite()) {
            return Err(Error::Precondition(format!("invalid magnitude range [{mlo}, {mhi}]")));
        }
        Ok(())
    }
}

/// Decodes a Prüfer sequence over `0..seq.len() + 2` into tree edges.
pub fn prufer_to_edges(seq: &[usize]) -> Vec<(usize, usize)> {
    let n = seq.len() + 2;
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| degree[i] == 1).map(Reverse).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let Reverse(leaf) = leaves.pop().expect("a tree always has a leaf");
        edges.push((leaf, s));
        degree[s] -= 1;
        if degree[s] == 1 {
            leaves.push(Reverse(s));
        }
    }
    let Reverse(a) = leaves.pop().expect("two nodes remain");
    let Reverse(b) = leaves.pop().expect("two nodes remain");
    edges.push((a, b));
    edges
}

fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => {
            let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
            prufer_to_edges(&seq)
        }
    }
}

fn magnitude(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        return lo;
    }
    (rng.random_range(lo.ln()..=hi.ln())).exp()
}

fn branch_admittance(rng: &mut ChaCha8Rng, spec: &GenSpec) -> Complex64 {
    let m = magnitude(rng, spec.magnitude);
    match spec.phase {
        PhasePolicy::RePositive => Complex64::from_polar(m, rng.random_range(-0.45 * PI..=0.45 * PI)),
        PhasePolicy::Arbitrary => Complex64::from_polar(m, rng.random_range(-PI..PI)),
        PhasePolicy::PureImaginary => reactive(rng, m),
    }
}

fn shunt_admittance(rng: &mut ChaCha8Rng, spec: &GenSpec) -> Complex64 {
    let m = magnitude(rng, spec.magnitude);
    match spec.phase {
        PhasePolicy::RePositive => Complex64::from_polar(m, rng.random_range(-0.45 * PI..=0.45 * PI)),
        PhasePolicy::Arbitrary => Complex64::from_polar(m, rng.random_range(-0.5 * PI..=0.5 * PI)),
        PhasePolicy::PureImaginary => reactive(rng, m),
    }
}

fn reactive(rng: &mut ChaCha8Rng, m: f64) -> Complex64 {
    Complex64::new(0.0, if rng.random_bool(0.5) { m } else { -m })
}

/// Draws a connected network satisfying the nonzero-admittance hypothesis.
pub fn generate(spec: &GenSpec) -> Result<Network> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = rng.random_range(spec.nodes.0..=spec.nodes.1);

    let tree = random_tree(&mut rng, n);
    let mut in_tree = vec![false; n * n];
    for &(a, b) in &tree {
        in_tree[a * n + b] = true;
        in_tree[b * n + a] = true;
    }
    let others: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| !in_tree[i * n + j])
        .collect();
    let extra = (spec.edge_density * others.len() as f64).round() as usize;
    let mut edges = tree;
    let mut picked = index::sample(&mut rng, others.len(), extra.min(others.len())).into_vec();
    picked.sort_unstable();
    edges.extend(picked.into_iter().map(|k| others[k]));

    let mut branches = Vec::with_capacity(edges.len());
    for (a, b) in edges {
        let (from, to) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
        branches.push(Branch::new(from, to, branch_admittance(&mut rng, spec)));
    }

    let mut shunts = Vec::new();
    for k in 0..n {
        if rng.random_bool(spec.shunt_probability) {
            shunts.push(Shunt::new(k, shunt_admittance(&mut rng, spec)));
        }
    }
    if spec.require_shunt && shunts.is_empty() {
        let k = rng.random_range(0..n);
        shunts.push(Shunt::new(k, shunt_admittance(&mut rng, spec)));
    }
    Network::new(n, branches, shunts)
}

/// Random partition of `0..n` into `classes` nonempty classes.
pub fn random_partition(n: usize, classes: usize, seed: u64) -> Result<Partition> {
    if classes < 2 || classes > n {
        return Err(Error::Precondition(format!(
            "cannot split {n} nodes into {classes} classes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut labels = vec![0usize; n];
    for (rank, &node) in order.iter().enumerate() {
        labels[node] = if rank < classes {
            rank
        } else {
            rng.random_range(0..classes)
        };
    }
    Partition::from_labels(&labels)
}

/// Random nonempty proper subset of `0..n` (requires `n ≥ 2`).
pub fn random_subset(n: usize, seed: u64) -> Result<Vec<NodeId>> {
    if n < 2 {
        return Err(Error::Precondition("need at least two nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = rng.random_range(1..n);
    let mut picked = index::sample(&mut rng, n, size).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(NodeId).collect())
}

/// Two nodes joined by a purely reactive branch `1i`, with a `−1i` shunt at
/// node 0, split as `{0} | {1}`. The shunt cancels the boundary branch, so
/// the diagonal block of class 0 is exactly `[0]`.
pub fn counterexample_block_singular() -> (Network, Partition) {
    let net = Network::new(
        2,
        vec![Branch::new(0, 1, Complex64::new(0.0, 1.0))],
        vec![Shunt::new(0, Complex64::new(0.0, -1.0))],
    )
    .expect("valid by construction");
    let part = Partition::from_labels(&[0, 1]).expect("valid by construction");
    (net, part)
}
