//! Nodal admittance matrices of AC power networks.
//!
//! The crate assembles `Y` from branch and shunt admittances, checks its
//! rank (`N − 1` without shunts, `N` with at least one, for a connected
//! network), certifies that every diagonal block of an arbitrary node
//! partition is invertible when all branch conductances are positive, and
//! uses that to perform Kron reduction and hybrid-parameter extraction.
//!
//! ```
//! use nodal::{assemble, kron_eliminate, Branch, Network, NodeId};
//! use num_complex::Complex64;
//!
//! let one = Complex64::new(1.0, 0.0);
//! let net = Network::new(3, vec![Branch::new(0, 1, one), Branch::new(1, 2, one)], vec![]).unwrap();
//! let y = assemble(&net).unwrap();
//! let reduced = kron_eliminate(&y, &[NodeId(1)]).unwrap();
//! assert_eq!(reduced.reduced.matrix()[(0, 1)], Complex64::new(-0.5, 0.0));
//! ```

pub mod error;
pub mod generator;
pub mod io;
pub mod linalg;
pub mod network;
pub mod partition;
pub mod rank;
pub mod reduction;
pub mod suites;
pub mod ybus;

pub use error::{Error, Result};
pub use generator::{counterexample_block_singular, generate, GenSpec, PhasePolicy};
pub use linalg::{lu_solve, numerical_rank, CMatrix, Lu, RankResult, SolveResult, TolPolicy};
pub use network::{
    components, incidence_matrix, is_connected, validate, Branch, Component, IncidenceMatrix, Network, NodeId, Shunt,
    ValidationReport, DEFAULT_ZERO_TOL,
};
pub use partition::{grounded_equivalent, verify_block_rank, BlockRankReport, BlockView, Partition};
pub use rank::{
    augment_virtual_ground, predict_rank, verify_rank, verify_rank_via_augmentation, RankMethod, RankVerdict,
};
pub use reduction::{hybrid_parameters, kron_eliminate, kron_reduce, BlockRole, HybridResult, ReductionResult};
pub use ybus::{assemble, AdmittanceMatrix, AssemblyMethod};
