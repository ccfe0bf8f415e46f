//! Nodal admittance matrix assembly.
//!
//! `Y = Aᵀ·diag(y_L)·A + diag(y_T)` with `A` the branch-node incidence matrix.
//! The default path stamps each branch into four entries; the literal triple
//! product is kept as [`AssemblyMethod::TripleProduct`] so the two can be
//! checked against each other.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, UNIT_ROUNDOFF};
use crate::network::{incidence_matrix, Branch, Network, NodeId, Shunt, DEFAULT_ZERO_TOL};

/// Square admittance matrix whose row/column `i` belongs to `node_order[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    matrix: CMatrix,
    node_order: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AssemblyMethod {
    #[default]
    Stamping,
    TripleProduct,
}

impl AdmittanceMatrix {
    /// Requires a square matrix and one distinct label per row.
    pub fn from_parts(matrix: CMatrix, node_order: Vec<NodeId>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!(
                "admittance matrix must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        if node_order.len() != matrix.rows() {
            return Err(Error::Dimension(format!(
                "{} node labels for a {}x{} matrix",
                node_order.len(),
                matrix.rows(),
                matrix.rows()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = node_order.iter().find(|n| !seen.insert(**n)) {
            return Err(Error::Structural(format!("node {dup} appears twice in node_order")));
        }
        Ok(AdmittanceMatrix { matrix, node_order })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn node_order(&self) -> &[NodeId] {
        &self.node_order
    }

    pub fn dim(&self) -> usize {
        self.node_order.len()
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn position_of(&self, node: NodeId) -> Option<usize> {
        self.node_order.iter().position(|&n| n == node)
    }

    pub(crate) fn positions(&self) -> HashMap<NodeId, usize> {
        self.node_order.iter().enumerate().map(|(i, &n)| (n, i)).collect()
    }

    /// Row sums. For an assembled matrix these equal the per-node shunt
    /// totals, so this recovers `y_T` from a matrix without its network.
    pub fn shunt_vector(&self) -> Vec<Complex64> {
        self.matrix.row_sums()
    }

    pub fn column_sums(&self) -> Vec<Complex64> {
        self.matrix.column_sums()
    }

    /// Simultaneous row/column permutation: row `i` of the result is the row
    /// of node `perm[i]`.
    pub fn reorder(&self, perm: &[NodeId]) -> Result<AdmittanceMatrix> {
        if perm.len() != self.dim() {
            return Err(Error::Structural(format!(
                "permutation has {} entries, matrix has {}",
                perm.len(),
                self.dim()
            )));
        }
        let pos = self.positions();
        let mut used = vec![false; self.dim()];
        let mut idx = Vec::with_capacity(perm.len());
        for n in perm {
            match pos.get(n) {
                Some(&i) if !used[i] => {
                    used[i] = true;
                    idx.push(i);
                }
                _ => {
                    return Err(Error::Structural(format!(
                        "permutation is not a bijection on node_order at node {n}"
                    )))
                }
            }
        }
        Ok(AdmittanceMatrix {
            matrix: self.matrix.select(&idx, &idx),
            node_order: perm.to_vec(),
        })
    }

    /// Rebuilds a network over matrix positions `0..n`: each nonzero
    /// off-diagonal pair becomes one branch `−Y_ij`, each row sum beyond the
    /// rounding level becomes a shunt. Parallel branches come back merged.
    pub fn implied_network(&self, zero_tol: f64) -> Result<Network> {
        let n = self.dim();
        let m = &self.matrix;
        let scale = m.max_abs();
        let mut branches = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if (a - b).norm() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::Structural(format!("matrix is not symmetric at ({i}, {j})")));
                }
                if a.norm() > 0.0 {
                    branches.push(Branch::new(i, j, -a));
                }
            }
        }
        let mut shunts = Vec::new();
        for (i, s) in self.shunt_vector().into_iter().enumerate() {
            let row_mass: f64 = m.row(i).iter().map(|z| z.norm()).sum();
            let rounding = 8.0 * n as f64 * UNIT_ROUNDOFF * row_mass;
            if s.norm() > zero_tol.max(rounding) {
                shunts.push(Shunt::new(i, s));
            }
        }
        Network::new(n, branches, shunts)
    }
}

/// Stamps the network into its nodal admittance matrix.
pub fn assemble(net: &Network) -> Result<AdmittanceMatrix> {
    assemble_with(net, AssemblyMethod::Stamping, DEFAULT_ZERO_TOL)
}

/// Assembly refuses any branch whose admittance magnitude is `≤ zero_tol`.
pub fn assemble_with(net: &Network, method: AssemblyMethod, zero_tol: f64) -> Result<AdmittanceMatrix> {
    if let Some((l, b)) = net
        .branches()
        .iter()
        .enumerate()
        .find(|(_, b)| b.admittance.norm() <= zero_tol)
    {
        return Err(Error::Hypothesis(format!(
            "branch {l} ({}-{}) has zero admittance",
            b.from, b.to
        )));
    }
    let n = net.node_count();
    let matrix = match method {
        AssemblyMethod::Stamping => {
            let mut y = CMatrix::zeros(n, n);
            for b in net.branches() {
                stamp_branch(&mut y, b.from.0, b.to.0, b.admittance);
            }
            for s in net.shunts() {
                *y.get_mut(s.node.0, s.node.0) += s.admittance;
            }
            y
        }
        AssemblyMethod::TripleProduct => {
            let a = incidence_matrix(net).to_cmatrix();
            let y_l = CMatrix::diagonal(&net.branches().iter().map(|b| b.admittance).collect::<Vec<_>>());
            let y_t = CMatrix::diagonal(&net.shunt_totals());
            a.transpose().matmul(&y_l)?.matmul(&a)?.add(&y_t)?
        }
    };
    Ok(AdmittanceMatrix {
        matrix,
        node_order: net.nodes().collect(),
    })
}

pub(crate) fn stamp_branch(y: &mut CMatrix, i: usize, j: usize, adm: Complex64) {
    *y.get_mut(i, i) += adm;
    *y.get_mut(j, j) += adm;
    *y.get_mut(i, j) -= adm;
    *y.get_mut(j, i) -= adm;
}
