//! Node partitions, block addressing and diagonal-block invertibility.
//!
//! Under a partition `{N_p}` the matrix is reordered class by class and
//! `Y_ij` is the block coupling currents of class `i` to voltages of class
//! `j`. A diagonal block `Y_pp` is the admittance matrix of class `p` with
//! every other class grounded: boundary branches turn into shunts
//! ([`grounded_equivalent`]). The grounded network falls apart into
//! components, so `Y_pp` is block diagonal over them, and with strictly
//! positive branch conductances each component sees at least one nonzero
//! shunt and is invertible.

use std::collections::HashSet;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{invertibility_limit, singular_values, CMatrix, Lu, TolPolicy};
use crate::network::{components, validate, Branch, Network, NodeId, Shunt, ValidationReport, DEFAULT_ZERO_TOL};
use crate::ybus::{assemble_with, AdmittanceMatrix, AssemblyMethod};

/// Ordered list of at least two disjoint nonempty node classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    classes: Vec<Vec<NodeId>>,
}

impl Partition {
    pub fn new(classes: Vec<Vec<NodeId>>) -> Result<Partition> {
        if classes.len() < 2 {
            return Err(Error::Structural(format!(
                "a partition needs at least two classes, got {}",
                classes.len()
            )));
        }
        let mut seen = HashSet::new();
        for (p, class) in classes.iter().enumerate() {
            if class.is_empty() {
                return Err(Error::Structural(format!("class {p} is empty")));
            }
            for n in class {
                if !seen.insert(*n) {
                    return Err(Error::Structural(format!("node {n} appears in more than one class")));
                }
            }
        }
        Ok(Partition { classes })
    }

    /// Classes from a per-node label vector: node `i` joins class `labels[i]`.
    /// Labels must use every value in `0..k`.
    pub fn from_labels(labels: &[usize]) -> Result<Partition> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut classes = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            classes[l].push(NodeId(i));
        }
        if let Some(p) = classes.iter().position(Vec::is_empty) {
            return Err(Error::Structural(format!("label {p} is not used by any node")));
        }
        Partition::new(classes)
    }

    /// Two-class partition `{keep, rest}` over `0..node_count`.
    pub fn split(node_count: usize, keep: &[NodeId]) -> Result<Partition> {
        let inside: HashSet<NodeId> = keep.iter().copied().collect();
        let rest = (0..node_count).map(NodeId).filter(|n| !inside.contains(n)).collect();
        Partition::new(vec![keep.to_vec(), rest])
    }

    pub fn classes(&self) -> &[Vec<NodeId>] {
        &self.classes
    }

    pub fn class(&self, p: usize) -> &[NodeId] {
        &self.classes[p]
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn len(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Concatenation of the classes.
    pub fn order(&self) -> Vec<NodeId> {
        self.classes.concat()
    }

    /// Whether the classes cover exactly `nodes`.
    pub fn covers(&self, nodes: &[NodeId]) -> bool {
        let mine: HashSet<NodeId> = self.classes.iter().flatten().copied().collect();
        let theirs: HashSet<NodeId> = nodes.iter().copied().collect();
        mine.len() == nodes.len() && mine == theirs
    }

    /// Merges the listed classes into one, placed at the first listed index.
    pub fn merge(&self, which: &[usize]) -> Result<Partition> {
        if let Some(&bad) = which.iter().find(|&&p| p >= self.classes.len()) {
            return Err(Error::Structural(format!("class index {bad} out of range")));
        }
        let set: HashSet<usize> = which.iter().copied().collect();
        let Some(&first) = which.first() else {
            return Ok(self.clone());
        };
        let mut out = Vec::new();
        for (p, class) in self.classes.iter().enumerate() {
            if p == first {
                out.push(which.iter().flat_map(|&q| self.classes[q].iter().copied()).collect());
            } else if !set.contains(&p) {
                out.push(class.clone());
            }
        }
        Partition::new(out)
    }
}

/// An admittance matrix viewed in block form under a partition.
#[derive(Debug, Clone)]
pub struct BlockView {
    source: AdmittanceMatrix,
    partition: Partition,
    permuted: AdmittanceMatrix,
    offsets: Vec<usize>,
}

impl BlockView {
    pub fn new(source: &AdmittanceMatrix, partition: &Partition) -> Result<BlockView> {
        if !partition.covers(source.node_order()) {
            return Err(Error::Structural(
                "partition does not cover exactly the nodes of the matrix".into(),
            ));
        }
        let permuted = source.reorder(&partition.order())?;
        let mut offsets = vec![0];
        for class in partition.classes() {
            offsets.push(offsets.last().unwrap() + class.len());
        }
        Ok(BlockView {
            source: source.clone(),
            partition: partition.clone(),
            permuted,
            offsets,
        })
    }

    pub fn source(&self) -> &AdmittanceMatrix {
        &self.source
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn permuted(&self) -> &AdmittanceMatrix {
        &self.permuted
    }

    /// Row/column range of class `p` in the permuted matrix.
    pub fn range(&self, p: usize) -> std::ops::Range<usize> {
        self.offsets[p]..self.offsets[p + 1]
    }

    pub fn block(&self, i: usize, j: usize) -> Result<CMatrix> {
        let k = self.partition.class_count();
        if i >= k || j >= k {
            return Err(Error::Structural(format!(
                "block ({i}, {j}) out of range for {k} classes"
            )));
        }
        let rows: Vec<usize> = self.range(i).collect();
        let cols: Vec<usize> = self.range(j).collect();
        Ok(self.permuted.matrix().select(&rows, &cols))
    }
}

/// Class `keep` with the rest of the network grounded, re-indexed so local
/// node `i` is `nodes[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundedEquivalent {
    pub network: Network,
    pub nodes: Vec<NodeId>,
}

pub fn grounded_equivalent(net: &Network, keep: &[NodeId]) -> Result<GroundedEquivalent> {
    let n = net.node_count();
    if keep.is_empty() || keep.len() >= n {
        return Err(Error::Precondition(format!(
            "kept set must be a nonempty proper subset of the {n} nodes"
        )));
    }
    let mut local = vec![usize::MAX; n];
    for (i, k) in keep.iter().enumerate() {
        if k.0 >= n {
            return Err(Error::Structural(format!("node {k} out of range")));
        }
        if local[k.0] != usize::MAX {
            return Err(Error::Structural(format!("node {k} listed twice")));
        }
        local[k.0] = i;
    }
    let mut branches = Vec::new();
    let mut shunts = Vec::new();
    for b in net.branches() {
        match (local[b.from.0], local[b.to.0]) {
            (usize::MAX, usize::MAX) => {}
            (f, usize::MAX) => shunts.push(Shunt::new(f, b.admittance)),
            (usize::MAX, t) => shunts.push(Shunt::new(t, b.admittance)),
            (f, t) => branches.push(Branch::new(f, t, b.admittance)),
        }
    }
    for s in net.shunts() {
        if local[s.node.0] != usize::MAX {
            shunts.push(Shunt::new(local[s.node.0], s.admittance));
        }
    }
    Ok(GroundedEquivalent {
        network: Network::new(keep.len(), branches, shunts)?,
        nodes: keep.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRankOptions {
    pub zero_tol: f64,
    /// Also count singular values of each component matrix.
    pub svd_cross_check: bool,
}

impl Default for BlockRankOptions {
    fn default() -> Self {
        BlockRankOptions {
            zero_tol: DEFAULT_ZERO_TOL,
            svd_cross_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentReport {
    /// Original node ids, ascending.
    pub nodes: Vec<NodeId>,
    pub branch_count: usize,
    pub boundary_branches: usize,
    /// Some node of the component carries a nonzero total shunt once the
    /// other classes are grounded.
    pub grounded: bool,
    pub full_rank: bool,
    /// Infinite when the LU hits an exact zero pivot.
    pub condition_estimate: f64,
    pub svd_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub class: usize,
    pub nodes: Vec<NodeId>,
    pub components: Vec<ComponentReport>,
    pub each_component_full_rank: bool,
    pub block_full_rank: bool,
    pub block_condition_estimate: f64,
    /// Cross-component entries of `Y_pp` are exactly zero and the nonzero
    /// pattern connects each component.
    pub zero_pattern_ok: bool,
    /// Relative distance between the assembled grounded equivalent and `Y_pp`.
    pub grounded_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockRankReport {
    pub hypotheses: ValidationReport,
    pub classes: Vec<ClassReport>,
}

impl BlockRankReport {
    pub fn all_full_rank(&self) -> bool {
        self.classes
            .iter()
            .all(|c| c.block_full_rank && c.each_component_full_rank)
    }
}

/// LU-based invertibility certificate: no zero pivot and `κ₁` below
/// [`invertibility_limit`].
pub(crate) fn certify_invertible(m: &CMatrix) -> (bool, f64) {
    match Lu::factor(m) {
        Ok(lu) => {
            let cond = lu.condition_estimate();
            (cond.is_finite() && cond < invertibility_limit(m.rows()), cond)
        }
        Err(_) => (false, f64::INFINITY),
    }
}

/// Connected groups of `0..m.rows()` under the nonzero off-diagonal pattern.
fn pattern_groups(m: &CMatrix) -> Vec<usize> {
    let n = m.rows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] != Complex64::new(0.0, 0.0) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

pub fn verify_block_rank(net: &Network, part: &Partition) -> Result<BlockRankReport> {
    verify_block_rank_with(net, part, BlockRankOptions::default())
}

/// Checks every diagonal block and each of its grounded components.
///
/// Unmet hypotheses are recorded in the report rather than refused, so the
/// check doubles as a falsification probe.
pub fn verify_block_rank_with(net: &Network, part: &Partition, opts: BlockRankOptions) -> Result<BlockRankReport> {
    let hypotheses = validate(net, opts.zero_tol)?;
    let all: Vec<NodeId> = net.nodes().collect();
    if !part.covers(&all) {
        return Err(Error::Structural("partition does not cover the network's nodes".into()));
    }
    // Assembly must not refuse here: zero branches are a reported finding.
    let y = assemble_with(net, AssemblyMethod::Stamping, -1.0)?;
    let view = BlockView::new(&y, part)?;

    let mut classes = Vec::with_capacity(part.class_count());
    for p in 0..part.class_count() {
        let nodes = part.class(p).to_vec();
        let block = view.block(p, p)?;
        let (block_full_rank, block_condition_estimate) = certify_invertible(&block);

        let ge = grounded_equivalent(net, &nodes)?;
        let ge_y = assemble_with(&ge.network, AssemblyMethod::Stamping, -1.0)?;
        let grounded_residual = ge_y.matrix().relative_distance(&block)?;
        let ge_shunts = ge.network.shunt_totals();

        let local_nodes: Vec<NodeId> = ge.network.nodes().collect();
        let comps = components(&ge.network, &local_nodes);

        // Component label per local position, from the graph and from the block pattern.
        let mut graph_label = vec![0usize; nodes.len()];
        for (c, comp) in comps.iter().enumerate() {
            for n in &comp.nodes {
                graph_label[n.0] = c;
            }
        }
        let pattern = pattern_groups(&block);
        let zero_pattern_ok = (0..nodes.len())
            .all(|a| (0..nodes.len()).all(|b| (graph_label[a] == graph_label[b]) == (pattern[a] == pattern[b])));

        let positions_in_class: std::collections::HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut comp_reports = Vec::with_capacity(comps.len());
        for comp in &comps {
            let idx: Vec<usize> = comp.nodes.iter().map(|n| n.0).collect();
            let mut local = vec![usize::MAX; nodes.len()];
            for (i, &k) in idx.iter().enumerate() {
                local[k] = i;
            }
            let branches = comp
                .branches
                .iter()
                .map(|&l| {
                    let b = ge.network.branches()[l];
                    Branch::new(local[b.from.0], local[b.to.0], b.admittance)
                })
                .collect();
            let shunts = ge
                .network
                .shunts()
                .iter()
                .filter(|s| local[s.node.0] != usize::MAX)
                .map(|s| Shunt::new(local[s.node.0], s.admittance))
                .collect();
            let sub = Network::new(idx.len(), branches, shunts)?;
            let sub_y = assemble_with(&sub, AssemblyMethod::Stamping, -1.0)?;
            let (full_rank, condition_estimate) = certify_invertible(sub_y.matrix());
            let svd_rank = if opts.svd_cross_check {
                Some(crate::linalg::numerical_rank(sub_y.matrix(), TolPolicy::Auto)?.rank)
            } else {
                None
            };

            let originals: Vec<NodeId> = idx.iter().map(|&k| nodes[k]).collect();
            let orig_set: HashSet<NodeId> = originals.iter().copied().collect();
            let boundary_branches = net
                .branches()
                .iter()
                .filter(|b| {
                    let (f, t) = (orig_set.contains(&b.from), orig_set.contains(&b.to));
                    (f && !positions_in_class.contains_key(&b.to)) || (t && !positions_in_class.contains_key(&b.from))
                })
                .count();
            let grounded = idx.iter().any(|&k| ge_shunts[k].norm() > opts.zero_tol);
            let mut sorted = originals;
            sorted.sort_unstable();
            comp_reports.push(ComponentReport {
                nodes: sorted,
                branch_count: comp.branches.len(),
                boundary_branches,
                grounded,
                full_rank,
                condition_estimate,
                svd_rank,
            });
        }
        classes.push(ClassReport {
            class: p,
            nodes,
            each_component_full_rank: comp_reports.iter().all(|c| c.full_rank),
            components: comp_reports,
            block_full_rank,
            block_condition_estimate,
            zero_pattern_ok,
            grounded_residual,
        });
    }
    Ok(BlockRankReport { hypotheses, classes })
}

/// Singular values of one diagonal block, for diagnostics.
pub fn block_singular_values(view: &BlockView, p: usize) -> Result<Vec<f64>> {
    singular_values(&view.block(p, p)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ybus::assemble;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ids(v: &[usize]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    fn unit_path3() -> Network {
        Network::new(
            3,
            vec![Branch::new(0, 1, c(1.0, 0.0)), Branch::new(1, 2, c(1.0, 0.0))],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn partition_checks() {
        assert!(Partition::new(vec![ids(&[0, 1])]).is_err());
        assert!(Partition::new(vec![ids(&[0]), vec![]]).is_err());
        assert!(Partition::new(vec![ids(&[0, 1]), ids(&[1])]).is_err());
        let p = Partition::from_labels(&[0, 0, 1, 1, 2]).unwrap();
        assert_eq!(p.classes(), &[ids(&[0, 1]), ids(&[2, 3]), ids(&[4])]);
        assert!(Partition::from_labels(&[0, 2, 2]).is_err());
        assert!(Partition::from_labels(&[0, 0]).is_err());
        let m = p.merge(&[2, 0]).unwrap();
        assert_eq!(m.classes(), &[ids(&[2, 3]), ids(&[4, 0, 1])]);
    }

    #[test]
    fn two_node_blocks() {
        let net = Network::new(
            2,
            vec![Branch::new(0, 1, c(1.0, 0.0))],
            vec![Shunt::new(0, c(0.0, 1.0))],
        )
        .unwrap();
        let y = assemble(&net).unwrap();
        let view = BlockView::new(&y, &Partition::from_labels(&[0, 1]).unwrap()).unwrap();
        assert_eq!(view.block(0, 0).unwrap()[(0, 0)], c(1.0, 1.0));
        assert_eq!(view.block(0, 1).unwrap()[(0, 0)], c(-1.0, 0.0));
        assert!(view.block(2, 0).is_err());
    }

    #[test]
    fn blocks_tile_the_permuted_matrix() {
        let net = Network::new(
            4,
            vec![
                Branch::new(0, 1, c(1.0, 2.0)),
                Branch::new(1, 2, c(0.5, -1.0)),
                Branch::new(2, 3, c(2.0, 0.1)),
                Branch::new(3, 0, c(1.0, 1.0)),
            ],
            vec![Shunt::new(2, c(0.2, 0.0))],
        )
        .unwrap();
        let y = assemble(&net).unwrap();
        let part = Partition::from_labels(&[1, 0, 1, 0]).unwrap();
        let view = BlockView::new(&y, &part).unwrap();
        let mut rebuilt = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                let b = view.block(i, j).unwrap();
                assert_eq!(b, view.block(j, i).unwrap().transpose());
                rebuilt.write_block(view.range(i).start, view.range(j).start, &b);
            }
        }
        assert_eq!(&rebuilt, view.permuted().matrix());
        assert_eq!(view.permuted().node_order(), &ids(&[1, 3, 0, 2])[..]);
    }

    #[test]
    fn grounded_equivalent_examples() {
        let net = unit_path3();
        let ge = grounded_equivalent(&net, &ids(&[0, 1])).unwrap();
        assert_eq!(ge.network.branches(), &[Branch::new(0, 1, c(1.0, 0.0))]);
        assert_eq!(ge.network.shunts(), &[Shunt::new(1, c(1.0, 0.0))]);

        let ge = grounded_equivalent(&net, &ids(&[1])).unwrap();
        assert!(ge.network.branches().is_empty());
        let y = assemble(&ge.network).unwrap();
        assert_eq!(y.matrix()[(0, 0)], c(2.0, 0.0));

        assert!(grounded_equivalent(&net, &[]).is_err());
        assert!(grounded_equivalent(&net, &ids(&[0, 1, 2])).is_err());
    }

    #[test]
    fn split_class_has_two_components() {
        let net = unit_path3();
        let part = Partition::new(vec![ids(&[0, 2]), ids(&[1])]).unwrap();
        let r = verify_block_rank_with(
            &net,
            &part,
            BlockRankOptions {
                svd_cross_check: true,
                ..Default::default()
            },
        )
        .unwrap();
        let first = &r.classes[0];
        assert_eq!(first.components.len(), 2);
        assert!(first.each_component_full_rank);
        assert!(first.zero_pattern_ok);
        assert!(first
            .components
            .iter()
            .all(|c| c.grounded && c.boundary_branches == 1 && c.svd_rank == Some(1)));
        assert_eq!(r.classes[1].components[0].boundary_branches, 2);
        assert!(r.all_full_rank());
    }

    #[test]
    fn reactive_cancellation_is_singular() {
        let net = Network::new(
            2,
            vec![Branch::new(0, 1, c(0.0, 1.0))],
            vec![Shunt::new(0, c(0.0, -1.0))],
        )
        .unwrap();
        let part = Partition::from_labels(&[0, 1]).unwrap();
        let r = verify_block_rank(&net, &part).unwrap();
        assert!(!r.hypotheses.theorem2_preconditions_ok);
        assert!(!r.classes[0].block_full_rank);
        assert!(!r.classes[0].each_component_full_rank);
        assert!(r.classes[0].block_condition_estimate.is_infinite());
        // Component touches a boundary branch, yet the total shunt cancels.
        assert_eq!(r.classes[0].components[0].boundary_branches, 1);
        assert!(!r.classes[0].components[0].grounded);
        assert!(r.classes[1].block_full_rank);
        assert!(!r.all_full_rank());
    }

    #[test]
    fn partition_must_cover_network() {
        let net = unit_path3();
        let part = Partition::new(vec![ids(&[0]), ids(&[1])]).unwrap();
        assert!(verify_block_rank(&net, &part).is_err());
        let y = assemble(&net).unwrap();
        assert!(BlockView::new(&y, &part).is_err());
    }
}
