//! JSON and CSV file formats.
//!
//! Complex numbers are `[re, im]` pairs. Floats are written in shortest
//! round-trip form and parsed with correct rounding, so `parse(emit(x))`
//! reproduces every bit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::network::{Branch, Network, NodeId, Shunt};
use crate::reduction::{HybridResult, ReductionResult};
use crate::ybus::AdmittanceMatrix;

type Pair = [f64; 2];

fn pair(z: Complex64) -> Pair {
    [z.re, z.im]
}

fn complex(p: Pair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchRecord {
    pub from: usize,
    pub to: usize,
    pub y: Pair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShuntRecord {
    pub node: usize,
    pub y: Pair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub nodes: usize,
    pub branches: Vec<BranchRecord>,
    #[serde(default)]
    pub shunts: Vec<ShuntRecord>,
}

impl NetworkFile {
    pub fn from_network(net: &Network) -> Self {
        NetworkFile {
            nodes: net.node_count(),
            branches: net
                .branches()
                .iter()
                .map(|b| BranchRecord {
                    from: b.from.0,
                    to: b.to.0,
                    y: pair(b.admittance),
                })
                .collect(),
            shunts: net
                .shunts()
                .iter()
                .map(|s| ShuntRecord {
                    node: s.node.0,
                    y: pair(s.admittance),
                })
                .collect(),
        }
    }

    pub fn into_network(self) -> Result<Network> {
        Network::new(
            self.nodes,
            self.branches
                .into_iter()
                .map(|b| Branch::new(b.from, b.to, complex(b.y)))
                .collect(),
            self.shunts
                .into_iter()
                .map(|s| Shunt::new(s.node, complex(s.y)))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub n: usize,
    pub node_order: Vec<usize>,
    /// Row-major, `n²` entries.
    pub entries: Vec<Pair>,
}

impl MatrixFile {
    pub fn from_admittance(y: &AdmittanceMatrix) -> Self {
        MatrixFile {
            n: y.dim(),
            node_order: y.node_order().iter().map(|n| n.0).collect(),
            entries: y.matrix().as_slice().iter().copied().map(pair).collect(),
        }
    }

    pub fn into_admittance(self) -> Result<AdmittanceMatrix> {
        if self.entries.len() != self.n * self.n {
            return Err(Error::Parse(format!(
                "matrix file declares n = {} but has {} entries",
                self.n,
                self.entries.len()
            )));
        }
        let m = CMatrix::from_row_major(self.n, self.n, self.entries.into_iter().map(complex).collect())?;
        AdmittanceMatrix::from_parts(m, self.node_order.into_iter().map(NodeId).collect())
    }
}

/// Sidecar holding the voltage recovery map of a Kron reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryFile {
    pub rows: usize,
    pub cols: usize,
    pub eliminated: Vec<usize>,
    pub retained: Vec<usize>,
    pub entries: Vec<Pair>,
}

impl RecoveryFile {
    pub fn from_reduction(r: &ReductionResult) -> Self {
        RecoveryFile {
            rows: r.recovery.rows(),
            cols: r.recovery.cols(),
            eliminated: r.eliminated.iter().map(|n| n.0).collect(),
            retained: r.retained().iter().map(|n| n.0).collect(),
            entries: r.recovery.as_slice().iter().copied().map(pair).collect(),
        }
    }

    pub fn matrix(&self) -> Result<CMatrix> {
        CMatrix::from_row_major(
            self.rows,
            self.cols,
            self.entries.iter().copied().map(complex).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockLabel {
    pub row_class: usize,
    pub col_class: usize,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridFile {
    pub n: usize,
    pub node_order: Vec<usize>,
    pub classes: Vec<Vec<usize>>,
    pub solved_class: usize,
    pub blocks: Vec<BlockLabel>,
    pub entries: Vec<Pair>,
}

impl HybridFile {
    pub fn from_hybrid(h: &HybridResult) -> Self {
        let k = h.partition.class_count();
        let blocks = (0..k)
            .flat_map(|q| (0..k).map(move |c| (q, c)))
            .map(|(q, c)| BlockLabel {
                row_class: q,
                col_class: c,
                role: h.role(q, c).to_string(),
            })
            .collect();
        HybridFile {
            n: h.h.rows(),
            node_order: h.node_order.iter().map(|n| n.0).collect(),
            classes: h
                .partition
                .classes()
                .iter()
                .map(|c| c.iter().map(|n| n.0).collect())
                .collect(),
            solved_class: h.solved_class,
            blocks,
            entries: h.h.as_slice().iter().copied().map(pair).collect(),
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn network_to_json(net: &Network) -> Result<String> {
    to_json(&NetworkFile::from_network(net))
}

pub fn network_from_json(text: &str) -> Result<Network> {
    serde_json::from_str::<NetworkFile>(text)?.into_network()
}

pub fn matrix_to_json(y: &AdmittanceMatrix) -> Result<String> {
    to_json(&MatrixFile::from_admittance(y))
}

pub fn matrix_from_json(text: &str) -> Result<AdmittanceMatrix> {
    serde_json::from_str::<MatrixFile>(text)?.into_admittance()
}

/// Either kind of input document.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Network(Network),
    Matrix(AdmittanceMatrix),
}

/// Parses a network or matrix document, telling them apart by their keys.
pub fn input_from_json(text: &str) -> Result<Input> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Parse("expected a JSON object".into()))?;
    if obj.contains_key("branches") {
        Ok(Input::Network(
            serde_json::from_value::<NetworkFile>(value)?.into_network()?,
        ))
    } else if obj.contains_key("entries") {
        Ok(Input::Matrix(
            serde_json::from_value::<MatrixFile>(value)?.into_admittance()?,
        ))
    } else {
        Err(Error::Parse("document is neither a network nor a matrix file".into()))
    }
}

/// Branch list as CSV: `from,to,re,im` per record, `to = -1` marks a shunt
/// at `from`. A non-numeric first record is taken as a header and `#`
/// starts a comment. Without `node_count` the largest index plus one is used.
pub fn network_from_csv(text: &str, node_count: Option<usize>) -> Result<Network> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut branches = Vec::new();
    let mut shunts = Vec::new();
    let mut max_node = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 4 {
            return Err(Error::Parse(format!(
                "record {} has {} fields, expected 4",
                line + 1,
                record.len()
            )));
        }
        if line == 0 && record[0].parse::<i64>().is_err() {
            continue;
        }
        let field = |k: usize| -> Result<&str> { Ok(&record[k]) };
        let parse_err = |what: &str| Error::Parse(format!("record {}: bad {what}", line + 1));
        let from: usize = field(0)?.parse().map_err(|_| parse_err("from"))?;
        let to: i64 = field(1)?.parse().map_err(|_| parse_err("to"))?;
        let re: f64 = field(2)?.parse().map_err(|_| parse_err("re"))?;
        let im: f64 = field(3)?.parse().map_err(|_| parse_err("im"))?;
        let y = Complex64::new(re, im);
        max_node = max_node.max(from);
        match to {
            -1 => shunts.push(Shunt::new(from, y)),
            t if t >= 0 => {
                max_node = max_node.max(t as usize);
                branches.push(Branch::new(from, t as usize, y));
            }
            _ => return Err(parse_err("to")),
        }
    }
    Network::new(node_count.unwrap_or(max_node + 1), branches, shunts)
}
