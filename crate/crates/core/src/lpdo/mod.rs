//! Locally purified density operators over an arbitrary qubit topology.
//!
//! Site `j` stores one tensor `A_j` with axes `[τ_j, σ_j, ν_j, bonds...]`:
//! output leg, input leg, Kraus leg and one bond leg per incident edge in
//! ascending edge order. The Choi element is
//!
//! ```text
//! <σ τ|Λ|σ' τ'> = Σ_{μ, μ', ν} Π_j A_j[τ_j, σ_j, ν_j, μ] conj(A_j[τ'_j, σ'_j, ν_j, μ'])
//! ```
//!
//! The conjugate layer is never stored. Its labels are derived by priming
//! the physical and bond labels while the Kraus label is shared, which is
//! what makes the represented operator positive semidefinite.

mod checkpoint;
mod network;
mod ops;
mod tp;
mod unitary;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::linalg::{DenseError, D};
use crate::planner::PlanError;
use crate::tensor::{Index, Tensor, TensorError};
use crate::topology::Topology;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT};
pub(crate) use network::{identity_weight, measurement_weight, SiteNodeNetwork};
pub use network::{probability_network_shape, site_node, site_node_conj_grad, SiteWeight};
pub use ops::{
    choi_element, choi_trace, fidelity_to_unitary, materialize_choi, materialize_choi_with_cap,
    probability, reduce_to_subset, DEFAULT_DENSE_CAP, DEFAULT_VECTOR_CAP,
};
pub use tp::{
    tp_deviation, tp_regularizer, tp_regularizer_via, tp_regularizer_with_grad,
    tp_regularizer_with_grad_via, GammaRoute, TpDeviation, DENSE_DELTA_CAP, GAMMA_GRAD_FLOOR,
};
pub use unitary::{lpdo_from_ops, LocalOp};

pub const DEFAULT_INIT_NOISE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum LpdoError {
    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error(transparent)]
    Plan(#[from] PlanError),

    #[error(transparent)]
    Dense(#[from] DenseError),

    #[error("invalid dimensions: {0}")]
    Dims(String),

    #[error("basis tuple has length {got}, expected {expected}")]
    TupleLength { expected: usize, got: usize },

    #[error("basis value {0} out of range")]
    BasisOutOfRange(usize),

    #[error("model normalization Tr Λ = {0} is not positive")]
    NonPositiveTrace(f64),

    #[error("invalid qubit partition: {0}")]
    Partition(String),

    #[error("gate on qubits ({0}, {1}) does not follow a topology edge")]
    OffTopology(usize, usize),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Kraus dimension per site and bond dimension per topology edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpdoDims {
    pub kraus: Vec<usize>,
    pub bond: Vec<usize>,
}

impl LpdoDims {
    pub fn uniform(topology: &Topology, bond_dim: usize, kraus_dim: usize) -> Self {
        Self {
            kraus: vec![kraus_dim; topology.n_qubits()],
            bond: vec![bond_dim; topology.edges().len()],
        }
    }

    fn validate(&self, topology: &Topology) -> Result<(), LpdoError> {
        if self.kraus.len() != topology.n_qubits() || self.bond.len() != topology.edges().len() {
            return Err(LpdoError::Dims(format!(
                "{} Kraus dims / {} bond dims for {} qubits / {} edges",
                self.kraus.len(),
                self.bond.len(),
                topology.n_qubits(),
                topology.edges().len()
            )));
        }
        if self.kraus.iter().chain(&self.bond).any(|&d| d == 0) {
            return Err(LpdoError::Dims("dimensions must be at least 1".into()));
        }
        Ok(())
    }
}

pub(crate) mod labels {
    pub fn out(j: usize) -> String {
        format!("t{j}")
    }
    pub fn out_p(j: usize) -> String {
        format!("t{j}'")
    }
    pub fn inp(j: usize) -> String {
        format!("s{j}")
    }
    pub fn inp_p(j: usize) -> String {
        format!("s{j}'")
    }
    pub fn kraus(j: usize) -> String {
        format!("k{j}")
    }
    pub fn bond(e: usize) -> String {
        format!("b{e}")
    }
    pub fn bond_p(e: usize) -> String {
        format!("b{e}'")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lpdo {
    topology: Topology,
    dims: LpdoDims,
    sites: Vec<Tensor>,
}

impl Lpdo {
    pub fn from_site_data(
        topology: Topology,
        dims: LpdoDims,
        data: Vec<Vec<C64>>,
    ) -> Result<Self, LpdoError> {
        dims.validate(&topology)?;
        if data.len() != topology.n_qubits() {
            return Err(LpdoError::Dims(format!(
                "{} site arrays for {} qubits",
                data.len(),
                topology.n_qubits()
            )));
        }
        let sites = data
            .into_iter()
            .enumerate()
            .map(|(j, d)| Tensor::new(site_indices(&topology, &dims, j), d))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            topology,
            dims,
            sites,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.topology.n_qubits()
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn dims(&self) -> &LpdoDims {
        &self.dims
    }

    pub fn kraus_dim(&self, j: usize) -> usize {
        self.dims.kraus[j]
    }

    /// Product of the bond extents incident on site `j`.
    pub fn bond_block(&self, j: usize) -> usize {
        self.topology
            .incident_edges(j)
            .iter()
            .map(|&e| self.dims.bond[e])
            .product()
    }

    pub fn site(&self, j: usize) -> &Tensor {
        &self.sites[j]
    }

    pub fn sites(&self) -> &[Tensor] {
        &self.sites
    }

    pub fn site_data(&self, j: usize) -> &[C64] {
        self.sites[j].data()
    }

    pub fn site_data_mut(&mut self, j: usize) -> &mut [C64] {
        self.sites[j].data_mut()
    }

    pub fn n_params(&self) -> usize {
        self.sites.iter().map(Tensor::len).sum()
    }

    /// Multiplies site `j` by `factor`; Λ scales by `|factor|^2`.
    pub fn scale_site(&mut self, j: usize, factor: C64) {
        for x in self.sites[j].data_mut() {
            *x *= factor;
        }
    }

    /// Conjugate-layer copy of site `j`: physical and bond legs primed,
    /// Kraus leg shared.
    pub fn conj_site(&self, j: usize) -> Tensor {
        conj_relabel(&self.sites[j], true, true)
    }
}

/// Labels of site `j`: `[τ_j, σ_j, ν_j, bonds...]`.
pub fn site_indices(topology: &Topology, dims: &LpdoDims, j: usize) -> Vec<Index> {
    let mut idx = vec![
        Index::new(labels::out(j), D),
        Index::new(labels::inp(j), D),
        Index::new(labels::kraus(j), dims.kraus[j]),
    ];
    idx.extend(
        topology
            .incident_edges(j)
            .into_iter()
            .map(|e| Index::new(labels::bond(e), dims.bond[e])),
    );
    idx
}

/// Conjugates a site tensor, priming output/input legs as requested and
/// always priming bond legs.
pub(crate) fn conj_relabel(site: &Tensor, prime_out: bool, prime_in: bool) -> Tensor {
    site.conj_relabel(|name| {
        let prime = match name.as_bytes()[0] {
            b't' => prime_out,
            b's' => prime_in,
            b'b' => true,
            _ => false,
        };
        prime.then(|| format!("{name}'"))
    })
    .expect("primed labels stay unique")
}

/// The identity channel (`A_j = δ_{τσ}` at Kraus and bond index 0) plus
/// i.i.d. complex Gaussian noise of standard deviation `noise` per component.
pub fn init_lpdo(
    topology: &Topology,
    dims: &LpdoDims,
    noise: f64,
    seed: u64,
) -> Result<Lpdo, LpdoError> {
    dims.validate(topology)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.max(0.0)).map_err(|e| LpdoError::Dims(e.to_string()))?;
    let data = (0..topology.n_qubits())
        .map(|j| {
            let idx = site_indices(topology, dims, j);
            let len: usize = idx.iter().map(Index::dim).product();
            let block = len / (D * D);
            (0..len)
                .map(|flat| {
                    let (tau, sigma, rest) = (flat / (D * block), (flat / block) % D, flat % block);
                    let base = if tau == sigma && rest == 0 { 1.0 } else { 0.0 };
                    if noise > 0.0 {
                        C64::new(base + normal.sample(&mut rng), normal.sample(&mut rng))
                    } else {
                        C64::new(base, 0.0)
                    }
                })
                .collect()
        })
        .collect();
    Lpdo::from_site_data(topology.clone(), dims.clone(), data)
}

/// Exact identity channel with the given dimensions.
pub fn identity_lpdo(topology: &Topology, dims: &LpdoDims) -> Result<Lpdo, LpdoError> {
    init_lpdo(topology, dims, 0.0, 0)
}
