//! Seeded property suites behind `nodal verify`.
//!
//! Each suite draws `samples` random instances, networks from [`generate`]
//! or plain random matrices, and checks one family of identities. Sample `i` of a suite uses a seed derived from
//! the master seed, the suite name and `i`, so results do not depend on
//! evaluation order.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generator::{generate, random_partition, random_subset, GenSpec, PhasePolicy};
use crate::linalg::{lu_solve, numerical_rank, singular_values, CMatrix, TolPolicy};
use crate::network::NodeId;
use crate::partition::{verify_block_rank, BlockView};
use crate::rank::{ones_residual, verify_rank, verify_rank_via_augmentation};
use crate::reduction::{hybrid_parameters, kron_eliminate};
use crate::ybus::assemble;

/// Thresholds shared by the suites and the acceptance tests.
pub mod tol {
    /// `‖Y·1‖ / ‖Y‖_F` for shuntless networks.
    pub const NULL_VECTOR: f64 = 1e-10;
    /// Structural identities: row/column sums, block forms, symmetry.
    pub const IDENTITY: f64 = 1e-12;
    /// Solver-level agreement: residuals, port equivalence, Schur quotient.
    pub const SOLVE: f64 = 1e-10;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Theorem1,
    Theorem2,
    Kron,
    Hybrid,
    Lemma2,
    Lemma3,
    Lemma4,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Theorem1,
        Suite::Theorem2,
        Suite::Kron,
        Suite::Hybrid,
        Suite::Lemma2,
        Suite::Lemma3,
        Suite::Lemma4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Theorem1 => "theorem1",
            Suite::Theorem2 => "theorem2",
            Suite::Kron => "kron",
            Suite::Hybrid => "hybrid",
            Suite::Lemma2 => "lemma2",
            Suite::Lemma3 => "lemma3",
            Suite::Lemma4 => "lemma4",
        }
    }

    /// `"all"` expands to every suite.
    pub fn parse_list(s: &str) -> Result<Vec<Suite>> {
        if s == "all" {
            return Ok(Suite::ALL.to_vec());
        }
        Suite::ALL
            .iter()
            .copied()
            .find(|x| x.name() == s)
            .map(|x| vec![x])
            .ok_or_else(|| Error::Parse(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub samples: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<9} {} {}/{} samples",
            self.suite.name(),
            if self.passed() { "PASS" } else { "FAIL" },
            self.samples - self.failures.len().min(self.samples),
            self.samples
        )
    }
}

/// SplitMix64 finalizer, used to derive per-sample seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_seed(seed: u64, suite: Suite, i: usize) -> u64 {
    let tag = suite
        .name()
        .bytes()
        .fold(0u64, |h, b| h.wrapping_mul(131).wrapping_add(u64::from(b)));
    mix_seed(mix_seed(seed, tag), i as u64)
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn diff_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Solves `I = Y·V` when voltages are known on `v_known` positions and
/// currents on the rest, returning the full `(V, I)`. One square solve over
/// all unknowns: the voltages of the current-known positions and the
/// currents of the voltage-known ones.
pub fn constrained_full_solve(
    y: &CMatrix,
    v_known: &[(usize, Complex64)],
    i_known: &[(usize, Complex64)],
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let n = y.rows();
    if v_known.len() + i_known.len() != n {
        return Err(Error::Dimension("every node needs exactly one known quantity".into()));
    }
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    let mut i_full = vec![Complex64::new(0.0, 0.0); n];
    let mut voltage_known = vec![false; n];
    for &(k, val) in v_known {
        v[k] = val;
        voltage_known[k] = true;
    }
    for &(k, val) in i_known {
        i_full[k] = val;
    }
    // Unknown slot k: V_k when the current is known, I_k otherwise.
    let m = CMatrix::from_fn(n, n, |r, k| {
        if voltage_known[k] {
            if r == k {
                Complex64::new(-1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        } else {
            y[(r, k)]
        }
    });
    let rhs: Vec<Complex64> = (0..n)
        .map(|r| {
            let known_i = if voltage_known[r] {
                Complex64::new(0.0, 0.0)
            } else {
                i_full[r]
            };
            known_i
                - (0..n)
                    .filter(|&k| voltage_known[k])
                    .map(|k| y[(r, k)] * v[k])
                    .sum::<Complex64>()
        })
        .collect();
    let x = lu_solve(&m, &CMatrix::column_vector(&rhs))?.solution.column(0);
    for k in 0..n {
        if voltage_known[k] {
            i_full[k] = x[k];
        } else {
            v[k] = x[k];
        }
    }
    Ok((v, i_full))
}

fn base_spec(phase: PhasePolicy, shunt_probability: f64, require_shunt: bool, seed: u64) -> GenSpec {
    GenSpec {
        nodes: (5, 50),
        edge_density: 0.1,
        shunt_probability,
        require_shunt,
        magnitude: (1e-2, 1e2),
        phase,
        seed,
    }
}

fn theorem1_sample(seed: u64, i: usize) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let phase = if i.is_multiple_of(2) {
        PhasePolicy::RePositive
    } else {
        PhasePolicy::Arbitrary
    };
    let net = generate(&base_spec(phase, 0.0, false, mix_seed(seed, 1)))?;
    let y = assemble(&net)?;
    let n = net.node_count();
    let rank = numerical_rank(y.matrix(), TolPolicy::Auto)?.rank;
    if rank != n - 1 {
        out.push(format!("shuntless rank {rank}, expected {}", n - 1));
    }
    let r = ones_residual(y.matrix());
    if r > tol::NULL_VECTOR {
        out.push(format!("‖Y·1‖/‖Y‖ = {r:.3e}"));
    }

    let net = generate(&base_spec(phase, 0.3, true, mix_seed(seed, 2)))?;
    let direct = verify_rank(&net)?;
    if direct.measured_rank != net.node_count() || !direct.agrees {
        out.push(format!("shunted: {direct}"));
    }
    let vg = verify_rank_via_augmentation(&net)?;
    if vg.measured_rank != direct.measured_rank || vg.agrees != direct.agrees {
        out.push(format!("virtual ground disagrees: {vg}"));
    }
    if let Some(cert) = &vg.certificate {
        if cert.block_form_residual > tol::IDENTITY {
            out.push(format!("block form residual {:.3e}", cert.block_form_residual));
        }
    }
    Ok(out)
}

fn lemma2_sample(seed: u64, i: usize) -> Result<Vec<String>> {
    let phase = [
        PhasePolicy::RePositive,
        PhasePolicy::Arbitrary,
        PhasePolicy::PureImaginary,
    ][i % 3];
    let net = generate(&base_spec(phase, 0.4, false, seed))?;
    let y = assemble(&net)?;
    let totals = net.shunt_totals();
    let scale = y.matrix().frobenius_norm().max(norm(&totals));
    let mut out = Vec::new();
    for (what, sums) in [("row", y.shunt_vector()), ("column", y.column_sums())] {
        let e = diff_norm(&sums, &totals) / scale;
        if e > tol::IDENTITY {
            out.push(format!("{what} sums off by {e:.3e}"));
        }
    }
    Ok(out)
}

fn theorem2_sample(seed: u64) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let net = generate(&base_spec(PhasePolicy::RePositive, 0.3, false, mix_seed(seed, 1)))?;
    let y = assemble(&net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 2));
    for (j, k) in [2usize, 3, 5].into_iter().enumerate() {
        let part = random_partition(net.node_count(), k, mix_seed(seed, 10 + j as u64))?;
        let report = verify_block_rank(&net, &part)?;
        let view = BlockView::new(&y, &part)?;
        for c in &report.classes {
            if !c.block_full_rank || !c.each_component_full_rank {
                out.push(format!("{k} classes: block {} not certified full rank", c.class));
            }
            if !c.zero_pattern_ok {
                out.push(format!("{k} classes: block {} zero pattern mismatch", c.class));
            }
            if c.grounded_residual > tol::IDENTITY {
                out.push(format!(
                    "{k} classes: grounded equivalent off by {:.3e}",
                    c.grounded_residual
                ));
            }
            let block = view.block(c.class, c.class)?;
            let b = CMatrix::column_vector(&random_vector(&mut rng, block.rows()));
            match lu_solve(&block, &b) {
                Ok(s) if s.relative_residual <= tol::SOLVE => {}
                Ok(s) => out.push(format!(
                    "{k} classes: block {} residual {:.3e}",
                    c.class, s.relative_residual
                )),
                Err(e) => out.push(format!("{k} classes: block {}: {e}", c.class)),
            }
        }
    }
    Ok(out)
}

fn kron_sample(seed: u64) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let net = generate(&base_spec(PhasePolicy::RePositive, 0.3, true, mix_seed(seed, 1)))?;
    let y = assemble(&net)?;
    let n = net.node_count();
    let elim = random_subset(n, mix_seed(seed, 2))?;
    let red = kron_eliminate(&y, &elim)?;

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 3));
    let retained = red.retained().to_vec();
    let v_s = random_vector(&mut rng, retained.len());
    let v_known: Vec<(usize, Complex64)> = retained.iter().map(|r| r.0).zip(v_s.iter().copied()).collect();
    let i_known: Vec<(usize, Complex64)> = elim.iter().map(|e| (e.0, Complex64::new(0.0, 0.0))).collect();
    let (v_full, i_full) = constrained_full_solve(y.matrix(), &v_known, &i_known)?;

    let i_s_full: Vec<Complex64> = retained.iter().map(|r| i_full[r.0]).collect();
    let i_s_red = red.reduced.matrix().mul_vec(&v_s)?;
    let e = diff_norm(&i_s_red, &i_s_full) / norm(&i_s_full).max(f64::MIN_POSITIVE);
    if e > tol::SOLVE {
        out.push(format!("port equivalence off by {e:.3e}"));
    }

    let v_t = red.recover_eliminated(&v_s)?;
    let v_t_full: Vec<Complex64> = elim.iter().map(|e| v_full[e.0]).collect();
    let e = diff_norm(&v_t, &v_t_full) / norm(&v_t_full).max(f64::MIN_POSITIVE);
    if e > tol::SOLVE {
        out.push(format!("recovered voltages off by {e:.3e}"));
    }

    let sym = red.reduced.matrix().symmetry_defect();
    if sym > tol::IDENTITY {
        out.push(format!("reduced matrix asymmetry {sym:.3e}"));
    }

    // Two-stage elimination against one-stage.
    if retained.len() >= 2 {
        let second = random_subset(retained.len(), mix_seed(seed, 4))?;
        let second: Vec<NodeId> = second.iter().map(|k| retained[k.0]).collect();
        let staged = kron_eliminate(&red.reduced, &second)?;
        let mut union = elim.clone();
        union.extend(second.iter().copied());
        let joint = kron_eliminate(&y, &union)?;
        if staged.retained() != joint.retained() {
            out.push("staged and joint elimination retain different nodes".into());
        } else {
            let e = staged.reduced.matrix().relative_distance(joint.reduced.matrix())?;
            if e > tol::SOLVE {
                out.push(format!("staged vs joint elimination off by {e:.3e}"));
            }
        }
    }
    Ok(out)
}

fn hybrid_sample(seed: u64) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let net = generate(&base_spec(PhasePolicy::RePositive, 0.3, false, mix_seed(seed, 1)))?;
    let y = assemble(&net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 2));
    let k = rng.random_range(2..=3usize);
    let part = random_partition(net.node_count(), k, mix_seed(seed, 3))?;
    let view = BlockView::new(&y, &part)?;
    let p = rng.random_range(0..k);
    let h = hybrid_parameters(&view, p)?;

    let y_pp = view.block(p, p)?;
    let eye = CMatrix::identity(y_pp.rows());
    let e = h.block(p, p).identity_defect(&y_pp)?.frobenius_norm() / eye.frobenius_norm();
    if e > tol::IDENTITY {
        out.push(format!("H_pp·Y_pp − I = {e:.3e}"));
    }

    let p_range = view.range(p);
    let i_p = random_vector(&mut rng, p_range.len());
    let rest: Vec<usize> = (0..y.dim()).filter(|i| !p_range.contains(i)).collect();
    let v_rest = random_vector(&mut rng, rest.len());
    let (v_p, i_rest) = h.evaluate(&i_p, &v_rest)?;

    let i_known: Vec<(usize, Complex64)> = p_range.clone().zip(i_p.iter().copied()).collect();
    let v_known: Vec<(usize, Complex64)> = rest.iter().copied().zip(v_rest.iter().copied()).collect();
    let (v_full, i_full) = constrained_full_solve(view.permuted().matrix(), &v_known, &i_known)?;
    let v_p_full: Vec<Complex64> = p_range.map(|i| v_full[i]).collect();
    let i_rest_full: Vec<Complex64> = rest.iter().map(|&i| i_full[i]).collect();
    let ev = diff_norm(&v_p, &v_p_full) / norm(&v_p_full).max(f64::MIN_POSITIVE);
    let ei = diff_norm(&i_rest, &i_rest_full) / norm(&i_rest_full).max(f64::MIN_POSITIVE);
    if ev > tol::SOLVE || ei > tol::SOLVE {
        out.push(format!("hybrid vs full solve: V_p {ev:.3e}, I_q {ei:.3e}"));
    }
    Ok(out)
}

/// `rows×cols` product of two uniform factors, so rank `r` generically.
fn low_rank(rng: &mut ChaCha8Rng, rows: usize, cols: usize, r: usize, real: bool) -> Result<CMatrix> {
    let entry = |rng: &mut ChaCha8Rng| {
        let re = rng.random_range(-1.0..1.0);
        Complex64::new(re, if real { 0.0 } else { rng.random_range(-1.0..1.0) })
    };
    let p = CMatrix::from_fn(rows, r, |_, _| entry(rng));
    let q = CMatrix::from_fn(r, cols, |_, _| entry(rng));
    p.matmul(&q)
}

/// Square matrix with condition number at most `max_cond`, spread over a
/// log-uniform range of singular-value scales.
fn invertible(rng: &mut ChaCha8Rng, n: usize, max_cond: f64) -> Result<CMatrix> {
    loop {
        let a = low_rank(rng, n, n, n, false)?;
        let b = low_rank(rng, n, n, n, false)?;
        let spread = max_cond.sqrt().log10();
        let d = CMatrix::diagonal(
            &(0..n)
                .map(|_| Complex64::new(10f64.powf(rng.random_range(0.0..spread)), 0.0))
                .collect::<Vec<_>>(),
        );
        let m = a.matmul(&d)?.matmul(&b)?;
        let sv = singular_values(&m)?;
        if sv[n - 1] > 0.0 && sv[0] / sv[n - 1] <= max_cond {
            return Ok(m);
        }
    }
}

fn rank_of(m: &CMatrix) -> Result<usize> {
    Ok(numerical_rank(m, TolPolicy::Auto)?.rank)
}

fn lemma3_sample(seed: u64) -> Result<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.random_range(1..=12usize);
    let cols = rng.random_range(1..=12usize);
    let r = rng.random_range(1..=rows.min(cols));
    let m = low_rank(&mut rng, rows, cols, r, true)?;
    let gram = m.transpose().matmul(&m)?;
    let (rm, rg) = (rank_of(&m)?, rank_of(&gram)?);
    Ok(if rm == rg {
        vec![]
    } else {
        vec![format!("rank(M) = {rm}, rank(MᵀM) = {rg}")]
    })
}

fn lemma4_sample(seed: u64) -> Result<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.random_range(1..=10usize);
    let cols = rng.random_range(1..=10usize);
    let r = rng.random_range(1..=rows.min(cols));
    let m = low_rank(&mut rng, rows, cols, r, false)?;
    let nl = invertible(&mut rng, rows, 1e6)?;
    let nr = invertible(&mut rng, cols, 1e6)?;
    let rm = rank_of(&m)?;
    let rl = rank_of(&nl.matmul_accurate(&m)?)?;
    let rr = rank_of(&m.matmul_accurate(&nr)?)?;
    Ok(if rm == rl && rm == rr {
        vec![]
    } else {
        vec![format!("rank(M) = {rm}, rank(N_L·M) = {rl}, rank(M·N_R) = {rr}")]
    })
}

/// Runs one suite over `samples` seeded instances.
pub fn run_suite(suite: Suite, samples: usize, seed: u64) -> SuiteReport {
    let mut failures = Vec::new();
    for i in 0..samples {
        let s = sample_seed(seed, suite, i);
        let result = match suite {
            Suite::Theorem1 => theorem1_sample(s, i),
            Suite::Theorem2 => theorem2_sample(s),
            Suite::Kron => kron_sample(s),
            Suite::Hybrid => hybrid_sample(s),
            Suite::Lemma2 => lemma2_sample(s, i),
            Suite::Lemma3 => lemma3_sample(s),
            Suite::Lemma4 => lemma4_sample(s),
        };
        match result {
            Ok(msgs) => failures.extend(msgs.into_iter().map(|m| format!("sample {i}: {m}"))),
            Err(e) => failures.push(format!("sample {i}: {e}")),
        }
    }
    SuiteReport {
        suite,
        samples,
        failures,
    }
}
