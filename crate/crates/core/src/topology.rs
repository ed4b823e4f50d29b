use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("topology needs at least one qubit")]
    NoQubits,

    #[error("self-loop on qubit {0}")]
    SelfLoop(usize),

    #[error("edge ({0}, {1}) references a qubit outside [0, {2})")]
    OutOfRange(usize, usize, usize),

    #[error("unknown builtin topology `{0}`")]
    UnknownBuiltin(String),
}

/// Qubit connectivity: `n_qubits` vertices and undirected edges stored as
/// sorted `(low, high)` pairs in ascending order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawTopology", into = "RawTopology")]
pub struct Topology {
    n_qubits: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct RawTopology {
    n_qubits: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<RawTopology> for Topology {
    type Error = TopologyError;

    fn try_from(raw: RawTopology) -> Result<Self, Self::Error> {
        Topology::new(raw.n_qubits, raw.edges)
    }
}

impl From<Topology> for RawTopology {
    fn from(t: Topology) -> Self {
        RawTopology {
            n_qubits: t.n_qubits,
            edges: t.edges,
        }
    }
}

impl Topology {
    /// Duplicate edges (in either orientation) are dropped with a warning.
    pub fn new(n_qubits: usize, edges: Vec<(usize, usize)>) -> Result<Self, TopologyError> {
        if n_qubits == 0 {
            return Err(TopologyError::NoQubits);
        }
        let mut out: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(TopologyError::SelfLoop(a));
            }
            if a >= n_qubits || b >= n_qubits {
                return Err(TopologyError::OutOfRange(a, b, n_qubits));
            }
            let e = (a.min(b), a.max(b));
            if out.contains(&e) {
                log::warn!("dropping duplicate edge ({}, {})", e.0, e.1);
                continue;
            }
            out.push(e);
        }
        out.sort_unstable();
        Ok(Self {
            n_qubits,
            edges: out,
        })
    }

    pub fn line(n_qubits: usize) -> Self {
        Self::new(n_qubits, (1..n_qubits).map(|q| (q - 1, q)).collect()).expect("valid line")
    }

    /// The 7-qubit I-beam: 0-1-2 across the top, 4-5-6 across the bottom,
    /// joined through 1-3-5.
    pub fn ibeam7() -> Self {
        Self::new(7, vec![(0, 1), (1, 2), (1, 3), (3, 5), (4, 5), (5, 6)]).expect("valid ibeam")
    }

    /// Four qubits in a T: qubit 1 joined to 0, 2 and 3.
    pub fn tee4() -> Self {
        Self::new(4, vec![(0, 1), (1, 2), (1, 3)]).expect("valid tee")
    }

    pub fn ring(n_qubits: usize) -> Self {
        let mut edges: Vec<(usize, usize)> = (1..n_qubits).map(|q| (q - 1, q)).collect();
        if n_qubits > 2 {
            edges.push((0, n_qubits - 1));
        }
        Self::new(n_qubits, edges).expect("valid ring")
    }

    /// `ibeam7`, `tee4`, `line<N>`, `ring<N>`.
    pub fn builtin(name: &str) -> Result<Self, TopologyError> {
        let unknown = || TopologyError::UnknownBuiltin(name.to_string());
        match name {
            "ibeam7" => Ok(Self::ibeam7()),
            "tee4" => Ok(Self::tee4()),
            _ => {
                if let Some(n) = name.strip_prefix("line") {
                    let n: usize = n.parse().map_err(|_| unknown())?;
                    if n == 0 {
                        return Err(TopologyError::NoQubits);
                    }
                    Ok(Self::line(n))
                } else if let Some(n) = name.strip_prefix("ring") {
                    let n: usize = n.parse().map_err(|_| unknown())?;
                    if n == 0 {
                        return Err(TopologyError::NoQubits);
                    }
                    Ok(Self::ring(n))
                } else {
                    Err(unknown())
                }
            }
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        let e = (a.min(b), a.max(b));
        self.edges.iter().position(|x| *x == e)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edge_id(a, b).is_some()
    }

    /// Ids of edges touching `qubit`, ascending.
    pub fn incident_edges(&self, qubit: usize) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, (a, b))| *a == qubit || *b == qubit)
            .map(|(i, _)| i)
            .collect()
    }
}
