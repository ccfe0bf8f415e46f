//! Electrical network model and graph queries.
//!
//! Nodes are dense indices `0..N`. Ground is implicit: a [`Shunt`] ties a
//! node to ground and ground never receives an index. Branches carry a single
//! series admittance and there is no way to express mutual coupling between
//! branches.

use std::collections::VecDeque;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold below which an admittance magnitude counts as zero, in siemens.
pub const DEFAULT_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i)
    }
}

/// Series element between two distinct non-ground nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub from: NodeId,
    pub to: NodeId,
    pub admittance: Complex64,
}

impl Branch {
    pub fn new(from: impl Into<NodeId>, to: impl Into<NodeId>, admittance: Complex64) -> Self {
        Branch {
            from: from.into(),
            to: to.into(),
            admittance,
        }
    }

    /// The endpoint opposite to `n`, if `n` is an endpoint.
    pub fn other(&self, n: NodeId) -> Option<NodeId> {
        if self.from == n {
            Some(self.to)
        } else if self.to == n {
            Some(self.from)
        } else {
            None
        }
    }
}

/// Element between a node and ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shunt {
    pub node: NodeId,
    pub admittance: Complex64,
}

impl Shunt {
    pub fn new(node: impl Into<NodeId>, admittance: Complex64) -> Self {
        Shunt {
            node: node.into(),
            admittance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    node_count: usize,
    branches: Vec<Branch>,
    shunts: Vec<Shunt>,
}

fn finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

impl Network {
    /// Checks structure only: `N ≥ 1`, node references in range, no self
    /// loops, finite admittances. Zero-admittance branches and active shunts
    /// are accepted here and surface in [`validate`].
    pub fn new(node_count: usize, branches: Vec<Branch>, shunts: Vec<Shunt>) -> Result<Network> {
        let net = Network {
            node_count,
            branches,
            shunts,
        };
        net.check_structure()?;
        Ok(net)
    }

    fn check_structure(&self) -> Result<()> {
        if self.node_count == 0 {
            return Err(Error::Structural("a network needs at least one node".into()));
        }
        let n = self.node_count;
        for (l, b) in self.branches.iter().enumerate() {
            if b.from.0 >= n || b.to.0 >= n {
                return Err(Error::Structural(format!(
                    "branch {l} references node {} but the network has {n} nodes",
                    b.from.0.max(b.to.0)
                )));
            }
            if b.from == b.to {
                return Err(Error::Structural(format!(
                    "branch {l} is a self loop at node {}",
                    b.from
                )));
            }
            if !finite(b.admittance) {
                return Err(Error::Structural(format!("branch {l} has a non-finite admittance")));
            }
        }
        for (k, s) in self.shunts.iter().enumerate() {
            if s.node.0 >= n {
                return Err(Error::Structural(format!(
                    "shunt {k} references node {} but the network has {n} nodes",
                    s.node
                )));
            }
            if !finite(s.admittance) {
                return Err(Error::Structural(format!("shunt {k} has a non-finite admittance")));
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn shunts(&self) -> &[Shunt] {
        &self.shunts
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count).map(NodeId)
    }

    /// Per-node sum of shunt admittances (the vector `y_T`).
    pub fn shunt_totals(&self) -> Vec<Complex64> {
        let mut totals = vec![Complex64::new(0.0, 0.0); self.node_count];
        for s in &self.shunts {
            totals[s.node.0] += s.admittance;
        }
        totals
    }

    /// Nodes whose assembled shunt admittance exceeds `zero_tol` in magnitude.
    pub fn shunted_nodes(&self, zero_tol: f64) -> Vec<NodeId> {
        self.shunt_totals()
            .iter()
            .enumerate()
            .filter(|(_, y)| y.norm() > zero_tol)
            .map(|(i, _)| NodeId(i))
            .collect()
    }

    /// Same network with node `i` renamed to `perm[i]`.
    pub fn relabel(&self, perm: &[NodeId]) -> Result<Network> {
        check_permutation(perm, self.node_count)?;
        let map = |n: NodeId| perm[n.0];
        Network::new(
            self.node_count,
            self.branches
                .iter()
                .map(|b| Branch::new(map(b.from), map(b.to), b.admittance))
                .collect(),
            self.shunts
                .iter()
                .map(|s| Shunt::new(map(s.node), s.admittance))
                .collect(),
        )
    }

    /// Adjacency lists over branch indices.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for (l, b) in self.branches.iter().enumerate() {
            adj[b.from.0].push(l);
            adj[b.to.0].push(l);
        }
        adj
    }
}

pub(crate) fn check_permutation(perm: &[NodeId], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::Structural(format!(
            "permutation has {} entries, expected {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for p in perm {
        if p.0 >= n || std::mem::replace(&mut seen[p.0], true) {
            return Err(Error::Structural(format!("permutation is not a bijection at node {p}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub connected: bool,
    /// Every branch admittance is nonzero beyond `zero_tol`.
    pub hypothesis1_ok: bool,
    /// Nonzero branches, each with strictly positive conductance. Guarantees
    /// invertible diagonal blocks for every partition.
    pub theorem2_preconditions_ok: bool,
    /// Every shunt has nonnegative real part.
    pub shunt_passivity_ok: bool,
    pub messages: Vec<String>,
}

/// Reports each modelling precondition independently; never gates on them.
pub fn validate(net: &Network, zero_tol: f64) -> Result<ValidationReport> {
    net.check_structure()?;
    let mut messages = Vec::new();

    let connected = is_connected(net);
    if !connected {
        let comps = components(net, &net.nodes().collect::<Vec<_>>());
        messages.push(format!("network splits into {} components", comps.len()));
    }

    let mut hypothesis1_ok = true;
    let mut re_positive = true;
    for (l, b) in net.branches.iter().enumerate() {
        if b.admittance.norm() <= zero_tol {
            hypothesis1_ok = false;
            messages.push(format!("branch {l} ({}-{}) has zero admittance", b.from, b.to));
        }
        if b.admittance.re <= 0.0 {
            re_positive = false;
            messages.push(format!(
                "branch {l} ({}-{}) has non-positive conductance {}",
                b.from, b.to, b.admittance.re
            ));
        }
    }

    let mut shunt_passivity_ok = true;
    for (k, s) in net.shunts.iter().enumerate() {
        if s.admittance.re < 0.0 {
            shunt_passivity_ok = false;
            messages.push(format!(
                "shunt {k} at node {} is active (conductance {})",
                s.node, s.admittance.re
            ));
        }
    }

    Ok(ValidationReport {
        connected,
        hypothesis1_ok,
        theorem2_preconditions_ok: hypothesis1_ok && re_positive,
        shunt_passivity_ok,
        messages,
    })
}

/// Whether `(N, L)` is a single component. Shunts are ignored.
pub fn is_connected(net: &Network) -> bool {
    let adj = net.adjacency();
    let mut seen = vec![false; net.node_count];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(u) = queue.pop_front() {
        for &l in &adj[u] {
            let v = net.branches[l].other(NodeId(u)).expect("adjacent branch").0;
            if !seen[v] {
                seen[v] = true;
                reached += 1;
                queue.push_back(v);
            }
        }
    }
    reached == net.node_count
}

/// A connected piece of an induced subgraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Sorted ascending.
    pub nodes: Vec<NodeId>,
    /// Indices into [`Network::branches`] with both ends in `nodes`, ascending.
    pub branches: Vec<usize>,
}

/// Connected components of the subgraph induced by `node_subset`.
///
/// Only branches with both endpoints in the subset count. Components are
/// ordered by their smallest node; out-of-range or repeated entries in the
/// subset are ignored.
pub fn components(net: &Network, node_subset: &[NodeId]) -> Vec<Component> {
    let n = net.node_count;
    let mut inside = vec![false; n];
    for s in node_subset {
        if s.0 < n {
            inside[s.0] = true;
        }
    }
    let adj = net.adjacency();
    let mut label = vec![usize::MAX; n];
    let mut out: Vec<Component> = Vec::new();
    for start in 0..n {
        if !inside[start] || label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut comp = Component {
            nodes: Vec::new(),
            branches: Vec::new(),
        };
        label[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            comp.nodes.push(NodeId(u));
            for &l in &adj[u] {
                let v = net.branches[l].other(NodeId(u)).expect("adjacent branch").0;
                if !inside[v] {
                    continue;
                }
                if label[v] == usize::MAX {
                    label[v] = id;
                    queue.push_back(v);
                }
            }
        }
        comp.nodes.sort_unstable();
        out.push(comp);
    }
    for (l, b) in net.branches.iter().enumerate() {
        if inside[b.from.0] && inside[b.to.0] {
            out[label[b.from.0]].branches.push(l);
        }
    }
    out
}

/// Edge-by-node incidence matrix with `+1` at `from` and `−1` at `to`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub entries: Vec<i8>,
}

impl IncidenceMatrix {
    pub fn get(&self, l: usize, n: usize) -> i8 {
        self.entries[l * self.cols + n]
    }

    pub fn to_rows(&self) -> Vec<Vec<i8>> {
        self.entries
            .chunks(self.cols.max(1))
            .map(<[i8]>::to_vec)
            .take(self.rows)
            .collect()
    }

    pub fn to_cmatrix(&self) -> crate::linalg::CMatrix {
        crate::linalg::CMatrix::from_fn(self.rows, self.cols, |i, j| {
            Complex64::new(f64::from(self.get(i, j)), 0.0)
        })
    }
}

pub fn incidence_matrix(net: &Network) -> IncidenceMatrix {
    let rows = net.branches.len();
    let cols = net.node_count;
    let mut entries = vec![0i8; rows * cols];
    for (l, b) in net.branches.iter().enumerate() {
        entries[l * cols + b.from.0] = 1;
        entries[l * cols + b.to.0] = -1;
    }
    IncidenceMatrix { rows, cols, entries }
}
