//! Rank of the nodal admittance matrix.
//!
//! For a connected network with nonzero branch admittances the rank is
//! `N − 1` without shunts and `N` with at least one. Two independent checks
//! are offered: the direct numerical rank of `Y`, and the virtual-ground
//! route, which turns every shunt into a branch towards an extra node so the
//! shunted case becomes a shuntless one on `N + 1` nodes.
//!
//! The virtual-ground matrix has the block form
//!
//! ```text
//! Y' = [ Y     −y_T ]
//!      [ −y_Tᵀ  Σy_T ]
//! ```
//!
//! and the voltage change of coordinates `[I 1; 0 1]` (determinant 1)
//! followed by adding all rows into the last one turns it into
//! `diag(Y, 0)`, so `rank(Y) = rank(Y')`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, CMatrix, RankResult, TolPolicy};
use crate::network::{is_connected, validate, Branch, Network, DEFAULT_ZERO_TOL};
use crate::ybus::{assemble_with, AdmittanceMatrix, AssemblyMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMethod {
    Direct,
    VirtualGround,
}

impl fmt::Display for RankMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankMethod::Direct => "direct",
            RankMethod::VirtualGround => "virtual-ground",
        })
    }
}

/// Numerical evidence collected along the virtual-ground route.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualGroundCertificate {
    pub augmented_nodes: usize,
    /// Relative distance between the assembled augmented matrix and the
    /// block form built from `Y` and `y_T`.
    pub block_form_residual: f64,
    /// Relative distance between the transformed augmented matrix and `diag(Y, 0)`.
    pub eliminated_form_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankVerdict {
    pub predicted_rank: usize,
    pub measured_rank: usize,
    pub agrees: bool,
    /// Number of nodes with a nonzero assembled shunt.
    pub shunt_count: usize,
    pub method: RankMethod,
    /// `σ_rank / σ_{rank+1}` of the measured matrix.
    pub singular_gap: Option<f64>,
    pub tolerance_used: f64,
    pub certificate: Option<VirtualGroundCertificate>,
}

impl fmt::Display for RankVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: predicted {}, measured {}, {}",
            self.method,
            self.predicted_rank,
            self.measured_rank,
            if self.agrees { "agrees" } else { "disagrees" }
        )
    }
}

fn check_hypotheses(net: &Network, zero_tol: f64) -> Result<()> {
    let report = validate(net, zero_tol)?;
    if !report.connected {
        return Err(Error::Precondition(
            "network is not connected; the rank prediction does not apply".into(),
        ));
    }
    if !report.hypothesis1_ok {
        return Err(Error::Precondition("network has a zero-admittance branch".into()));
    }
    Ok(())
}

/// `N − 1` without shunts, `N` with at least one.
pub fn predict_rank(net: &Network) -> Result<usize> {
    predict_rank_with(net, DEFAULT_ZERO_TOL)
}

pub fn predict_rank_with(net: &Network, zero_tol: f64) -> Result<usize> {
    check_hypotheses(net, zero_tol)?;
    let n = net.node_count();
    Ok(if net.shunted_nodes(zero_tol).is_empty() {
        n - 1
    } else {
        n
    })
}

fn verdict(predicted: usize, shunt_count: usize, method: RankMethod, measured: &RankResult) -> RankVerdict {
    RankVerdict {
        predicted_rank: predicted,
        measured_rank: measured.rank,
        agrees: predicted == measured.rank,
        shunt_count,
        method,
        singular_gap: measured.gap(),
        tolerance_used: measured.tolerance_used,
        certificate: None,
    }
}

/// Compares the predicted rank with the numerical rank of the assembled matrix.
pub fn verify_rank(net: &Network) -> Result<RankVerdict> {
    verify_rank_with(net, DEFAULT_ZERO_TOL)
}

pub fn verify_rank_with(net: &Network, zero_tol: f64) -> Result<RankVerdict> {
    let predicted = predict_rank_with(net, zero_tol)?;
    let y = assemble_with(net, AssemblyMethod::Stamping, zero_tol)?;
    let measured = numerical_rank(y.matrix(), TolPolicy::Auto)?;
    Ok(verdict(
        predicted,
        net.shunted_nodes(zero_tol).len(),
        RankMethod::Direct,
        &measured,
    ))
}

/// Direct verification for a matrix without its network (e.g. loaded from a
/// file). The prediction uses the network implied by the matrix; the
/// measurement uses the matrix as given.
pub fn verify_rank_of_matrix(y: &AdmittanceMatrix, zero_tol: f64) -> Result<RankVerdict> {
    let net = y.implied_network(zero_tol)?;
    let predicted = predict_rank_with(&net, zero_tol)?;
    let measured = numerical_rank(y.matrix(), TolPolicy::Auto)?;
    Ok(verdict(
        predicted,
        net.shunted_nodes(zero_tol).len(),
        RankMethod::Direct,
        &measured,
    ))
}

/// Turns every shunted node into a branch towards a new node `N`, which
/// plays the role of the old ground. Shunts at the same node are merged.
pub fn augment_virtual_ground(net: &Network) -> Result<Network> {
    augment_virtual_ground_with(net, DEFAULT_ZERO_TOL)
}

pub fn augment_virtual_ground_with(net: &Network, zero_tol: f64) -> Result<Network> {
    let n = net.node_count();
    let totals = net.shunt_totals();
    let shunted = net.shunted_nodes(zero_tol);
    if shunted.is_empty() {
        return Err(Error::Precondition(
            "virtual-ground construction needs at least one nonzero shunt".into(),
        ));
    }
    let mut branches = net.branches().to_vec();
    branches.extend(shunted.iter().map(|&k| Branch::new(k, n, totals[k.0])));
    Network::new(n + 1, branches, Vec::new())
}

/// Verifies the rank through the virtual-ground construction and records
/// how closely the assembled augmented matrix follows the block identities.
pub fn verify_rank_via_augmentation(net: &Network) -> Result<RankVerdict> {
    verify_rank_via_augmentation_with(net, DEFAULT_ZERO_TOL)
}

pub fn verify_rank_via_augmentation_with(net: &Network, zero_tol: f64) -> Result<RankVerdict> {
    check_hypotheses(net, zero_tol)?;
    let augmented = augment_virtual_ground_with(net, zero_tol)?;
    debug_assert!(is_connected(&augmented));
    let predicted = predict_rank_with(&augmented, zero_tol)?;

    let y = assemble_with(net, AssemblyMethod::Stamping, zero_tol)?;
    let y_aug = assemble_with(&augmented, AssemblyMethod::Stamping, zero_tol)?;
    let n = net.node_count();

    let mut y_t = net.shunt_totals();
    for v in y_t.iter_mut() {
        if v.norm() <= zero_tol {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    let total: Complex64 = y_t.iter().sum();
    let block_form = CMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
        (true, true) => y.matrix()[(i, j)],
        (true, false) => -y_t[i],
        (false, true) => -y_t[j],
        (false, false) => total,
    });
    let block_form_residual = y_aug.matrix().relative_distance(&block_form)?;

    // E·Y'·T with T = [I 1; 0 1] and E adding every row into the last.
    let t = CMatrix::from_fn(n + 1, n + 1, |i, j| {
        if i == j || j == n {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let e = CMatrix::from_fn(n + 1, n + 1, |i, j| {
        if i == j || i == n {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let eliminated = e.matmul(y_aug.matrix())?.matmul(&t)?;
    let target = CMatrix::from_fn(n + 1, n + 1, |i, j| {
        if i < n && j < n {
            y.matrix()[(i, j)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let eliminated_form_residual =
        eliminated.sub(&target)?.frobenius_norm() / y_aug.matrix().frobenius_norm().max(f64::MIN_POSITIVE);

    let measured = numerical_rank(y_aug.matrix(), TolPolicy::Auto)?;
    let mut v = verdict(
        predicted,
        net.shunted_nodes(zero_tol).len(),
        RankMethod::VirtualGround,
        &measured,
    );
    v.certificate = Some(VirtualGroundCertificate {
        augmented_nodes: n + 1,
        block_form_residual,
        eliminated_form_residual,
    });
    Ok(v)
}

/// `‖Y·1‖₂ / ‖Y‖_F`; zero for a shuntless assembled matrix up to rounding.
pub fn ones_residual(y: &CMatrix) -> f64 {
    let ones = vec![Complex64::new(1.0, 0.0); y.cols()];
    let r = y.mul_vec(&ones).expect("square matrix");
    r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / y.frobenius_norm().max(f64::MIN_POSITIVE)
}
