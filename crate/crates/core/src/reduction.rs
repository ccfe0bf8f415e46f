//! Kron reduction and hybrid network parameters.
//!
//! Both are Schur complements of a diagonal block. Zero-injection nodes `t`
//! are eliminated through `Ŷ_sk = Y_sk − Y_st·Y_tt⁻¹·Y_tk`; solving block
//! row `p` for its voltages instead gives the hybrid matrix `H`.
//! `Y_tt` (or `Y_pp`) is factored once and the factorization is reused for
//! every right-hand side; only `H_pp = Y_pp⁻¹` is formed explicitly.

use std::collections::HashSet;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{invertibility_limit, CMatrix, Lu};
use crate::network::NodeId;
use crate::partition::{BlockView, Partition};
use crate::ybus::AdmittanceMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionResult {
    /// Over the retained nodes, in their original relative order.
    pub reduced: AdmittanceMatrix,
    pub eliminated: Vec<NodeId>,
    /// `V_t = recovery · V_retained`, i.e. `−Y_tt⁻¹·Y_ts`.
    pub recovery: CMatrix,
}

impl ReductionResult {
    pub fn retained(&self) -> &[NodeId] {
        self.reduced.node_order()
    }

    /// Voltages of the eliminated nodes implied by the retained ones.
    pub fn recover_eliminated(&self, v_retained: &[Complex64]) -> Result<Vec<Complex64>> {
        if v_retained.len() != self.recovery.cols() {
            return Err(Error::Dimension(format!(
                "{} retained voltages supplied, {} expected",
                v_retained.len(),
                self.recovery.cols()
            )));
        }
        self.recovery.mul_vec(v_retained)
    }
}

fn factor_checked(block: &CMatrix, what: &str) -> std::result::Result<Lu, String> {
    let lu = Lu::factor(block).map_err(|e| match e {
        Error::Singular { pivot } => format!("{what} has a zero pivot at column {pivot}"),
        other => other.to_string(),
    })?;
    let cond = lu.condition_estimate();
    if cond.is_nan() || cond >= invertibility_limit(block.rows()) {
        return Err(format!(
            "{what} is numerically singular (condition estimate {cond:.3e})"
        ));
    }
    Ok(lu)
}

/// Eliminates class `t` of the view.
pub fn kron_reduce(view: &BlockView, t: usize) -> Result<ReductionResult> {
    if t >= view.partition().class_count() {
        return Err(Error::Structural(format!("class index {t} out of range")));
    }
    kron_eliminate(view.permuted(), view.partition().class(t)).map_err(|e| match e {
        Error::NotReducible(msg) => Error::NotReducible(format!("class {t}: {msg}")),
        other => other,
    })
}

/// Eliminates an arbitrary node set; an empty set returns the matrix unchanged.
pub fn kron_eliminate(y: &AdmittanceMatrix, eliminate: &[NodeId]) -> Result<ReductionResult> {
    let pos = y.positions();
    let mut drop = HashSet::new();
    for n in eliminate {
        if !pos.contains_key(n) {
            return Err(Error::Structural(format!("node {n} is not in the matrix")));
        }
        if !drop.insert(*n) {
            return Err(Error::Structural(format!("node {n} listed twice")));
        }
    }
    let t_idx: Vec<usize> = (0..y.dim()).filter(|&i| drop.contains(&y.node_order()[i])).collect();
    let s_idx: Vec<usize> = (0..y.dim()).filter(|&i| !drop.contains(&y.node_order()[i])).collect();
    let retained: Vec<NodeId> = s_idx.iter().map(|&i| y.node_order()[i]).collect();
    let eliminated: Vec<NodeId> = t_idx.iter().map(|&i| y.node_order()[i]).collect();
    let m = y.matrix();

    if t_idx.is_empty() {
        return Ok(ReductionResult {
            reduced: y.clone(),
            eliminated,
            recovery: CMatrix::zeros(0, s_idx.len()),
        });
    }
    if s_idx.is_empty() {
        return Err(Error::Structural("cannot eliminate every node".into()));
    }

    let y_tt = m.select(&t_idx, &t_idx);
    let y_ts = m.select(&t_idx, &s_idx);
    let y_st = m.select(&s_idx, &t_idx);
    let y_ss = m.select(&s_idx, &s_idx);
    let lu = factor_checked(&y_tt, "Y_tt").map_err(Error::NotReducible)?;
    let x = lu.solve(&y_ts)?;
    let reduced = y_ss.sub(&y_st.matmul(&x)?)?;
    Ok(ReductionResult {
        reduced: AdmittanceMatrix::from_parts(reduced, retained)?,
        eliminated,
        recovery: x.negate(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockRole {
    /// `H_pp`: voltages of `p` from currents of `p`.
    Impedance,
    /// `H_pk`: voltages of `p` from voltages of `k`.
    VoltageGain,
    /// `H_qp`: currents of `q` from currents of `p`.
    CurrentGain,
    /// `H_qk`: currents of `q` from voltages of `k`.
    Admittance,
}

impl fmt::Display for BlockRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockRole::Impedance => "impedance",
            BlockRole::VoltageGain => "voltage-gain",
            BlockRole::CurrentGain => "current-gain",
            BlockRole::Admittance => "admittance",
        })
    }
}

/// Hybrid matrix in the block order of the view it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridResult {
    pub h: CMatrix,
    pub node_order: Vec<NodeId>,
    pub partition: Partition,
    pub solved_class: usize,
    offsets: Vec<usize>,
}

impl HybridResult {
    pub fn role(&self, q: usize, k: usize) -> BlockRole {
        let p = self.solved_class;
        match (q == p, k == p) {
            (true, true) => BlockRole::Impedance,
            (true, false) => BlockRole::VoltageGain,
            (false, true) => BlockRole::CurrentGain,
            (false, false) => BlockRole::Admittance,
        }
    }

    pub fn range(&self, p: usize) -> std::ops::Range<usize> {
        self.offsets[p]..self.offsets[p + 1]
    }

    pub fn block(&self, q: usize, k: usize) -> CMatrix {
        let rows: Vec<usize> = self.range(q).collect();
        let cols: Vec<usize> = self.range(k).collect();
        self.h.select(&rows, &cols)
    }

    /// Positions of the solved class and of everything else.
    fn split_indices(&self) -> (Vec<usize>, Vec<usize>) {
        let p = self.range(self.solved_class);
        let rest = (0..self.h.rows()).filter(|i| !p.contains(i)).collect();
        (p.collect(), rest)
    }

    /// Applies `H` to the mixed input `(I_p, V_rest)`, returning `(V_p, I_rest)`.
    /// `rest` follows `node_order` with class `p` removed.
    pub fn evaluate(&self, i_p: &[Complex64], v_rest: &[Complex64]) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let (p_idx, r_idx) = self.split_indices();
        if i_p.len() != p_idx.len() || v_rest.len() != r_idx.len() {
            return Err(Error::Dimension(format!(
                "expected {} currents and {} voltages",
                p_idx.len(),
                r_idx.len()
            )));
        }
        let mut input = vec![Complex64::new(0.0, 0.0); self.h.cols()];
        for (&i, &v) in p_idx.iter().zip(i_p) {
            input[i] = v;
        }
        for (&i, &v) in r_idx.iter().zip(v_rest) {
            input[i] = v;
        }
        let out = self.h.mul_vec(&input)?;
        Ok((
            p_idx.iter().map(|&i| out[i]).collect(),
            r_idx.iter().map(|&i| out[i]).collect(),
        ))
    }
}

/// Solves block row `p` of `I = Y·V` for `V_p`.
pub fn hybrid_parameters(view: &BlockView, p: usize) -> Result<HybridResult> {
    let part = view.partition();
    if p >= part.class_count() {
        return Err(Error::Structural(format!("class index {p} out of range")));
    }
    let m = view.permuted().matrix();
    let n = m.rows();
    let p_idx: Vec<usize> = view.range(p).collect();
    let r_idx: Vec<usize> = (0..n).filter(|i| !view.range(p).contains(i)).collect();

    let y_pp = m.select(&p_idx, &p_idx);
    let y_pr = m.select(&p_idx, &r_idx);
    let y_rp = m.select(&r_idx, &p_idx);
    let y_rr = m.select(&r_idx, &r_idx);
    let lu = factor_checked(&y_pp, "Y_pp").map_err(|msg| Error::NotSolvable(format!("class {p}: {msg}")))?;

    let h_pp = lu.refined_inverse(&y_pp)?;
    let h_pr = lu.solve(&y_pr)?.negate();
    let h_rp = y_rp.matmul(&h_pp)?;
    let h_rr = y_rr.add(&y_rp.matmul(&h_pr)?)?;

    let mut h = CMatrix::zeros(n, n);
    let scatter = |h: &mut CMatrix, rows: &[usize], cols: &[usize], b: &CMatrix| {
        for (a, &i) in rows.iter().enumerate() {
            for (c, &j) in cols.iter().enumerate() {
                *h.get_mut(i, j) = b[(a, c)];
            }
        }
    };
    scatter(&mut h, &p_idx, &p_idx, &h_pp);
    scatter(&mut h, &p_idx, &r_idx, &h_pr);
    scatter(&mut h, &r_idx, &p_idx, &h_rp);
    scatter(&mut h, &r_idx, &r_idx, &h_rr);

    let mut offsets = vec![0];
    for class in part.classes() {
        offsets.push(offsets.last().unwrap() + class.len());
    }
    Ok(HybridResult {
        h,
        node_order: view.permuted().node_order().to_vec(),
        partition: part.clone(),
        solved_class: p,
        offsets,
    })
}
