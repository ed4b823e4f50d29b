use std::borrow::Cow;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use crate::planner::{NetworkShape, PlanCache, Program, DEFAULT_OPTIMAL_CAP};
use crate::tensor::{matmul, matmul_tn, Index, Tensor};
use crate::topology::Topology;

use super::{labels, Lpdo, LpdoDims, LpdoError};

/// Local weight `W[(τ σ), (τ' σ')]` coupling a site to its conjugate copy;
/// row `a = τ * 2 + σ`.
pub type SiteWeight = [[C64; 4]; 4];

pub(crate) fn plan_cache() -> &'static PlanCache {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    CACHE.get_or_init(|| PlanCache::new(DEFAULT_OPTIMAL_CAP))
}

pub(crate) fn compile(nodes: Vec<Vec<Index>>) -> Result<Program, LpdoError> {
    let shape = NetworkShape::new(nodes)?;
    let plan = plan_cache().get_or_plan(&shape);
    Ok(Program::compile(&shape, &plan)?)
}

pub(crate) fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// `E[μ, μ'] = Σ_{a, b, ν} X[a, ν, μ] W[a, b] conj(X[b, ν, μ'])` for a site
/// array `X` of shape `[4, kraus, block]`.
pub fn site_node(data: &[C64], kraus: usize, block: usize, w: &SiteWeight) -> Vec<C64> {
    let rows = kraus * block;
    let mut y = vec![zero(); data.len()];
    for (a, wa) in w.iter().enumerate() {
        let dst = &mut y[a * rows..(a + 1) * rows];
        for (b, wab) in wa.iter().enumerate() {
            if wab.norm_sqr() == 0.0 {
                continue;
            }
            for (d, x) in dst.iter_mut().zip(&data[b * rows..(b + 1) * rows]) {
                *d += wab * x.conj();
            }
        }
    }
    matmul_tn(data, &y, 4 * kraus, block, block)
}

/// Derivative of `Σ G[μ, μ'] E[μ, μ']` with respect to `conj(X)`:
/// `Σ_{a, μ} G[μ, μ'] X[a, ν, μ] W[a, b]`.
pub fn site_node_conj_grad(
    data: &[C64],
    kraus: usize,
    block: usize,
    w: &SiteWeight,
    g: &[C64],
) -> Vec<C64> {
    let rows = kraus * block;
    let h = matmul(data, g, 4 * kraus, block, block);
    let mut out = vec![zero(); data.len()];
    for (a, wa) in w.iter().enumerate() {
        let src = &h[a * rows..(a + 1) * rows];
        for (b, wab) in wa.iter().enumerate() {
            if wab.norm_sqr() == 0.0 {
                continue;
            }
            for (d, x) in out[b * rows..(b + 1) * rows].iter_mut().zip(src) {
                *d += wab * x;
            }
        }
    }
    out
}

fn site_node_indices(topology: &Topology, dims: &LpdoDims, j: usize) -> Vec<Index> {
    let edges = topology.incident_edges(j);
    let mut idx: Vec<Index> = edges
        .iter()
        .map(|&e| Index::new(labels::bond(e), dims.bond[e]))
        .collect();
    idx.extend(
        edges
            .iter()
            .map(|&e| Index::new(labels::bond_p(e), dims.bond[e])),
    );
    idx
}

/// Shape of the network of site nodes `E_j[bonds, bonds']` that every
/// probability-type contraction reduces to.
pub fn probability_network_shape(
    topology: &Topology,
    dims: &LpdoDims,
) -> Result<NetworkShape, LpdoError> {
    dims.validate(topology)?;
    let nodes = (0..topology.n_qubits())
        .map(|j| site_node_indices(topology, dims, j))
        .collect();
    Ok(NetworkShape::new(nodes)?)
}

/// Compiled site-node network for one model layout.
pub(crate) struct SiteNodeNetwork {
    program: Program,
}

impl SiteNodeNetwork {
    pub fn new(lpdo: &Lpdo) -> Result<Self, LpdoError> {
        let shape = probability_network_shape(lpdo.topology(), lpdo.dims())?;
        let plan = plan_cache().get_or_plan(&shape);
        Ok(Self {
            program: Program::compile(&shape, &plan)?,
        })
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn nodes(lpdo: &Lpdo, weights: &[SiteWeight]) -> Vec<Vec<C64>> {
        weights
            .iter()
            .enumerate()
            .map(|(j, w)| site_node(lpdo.site_data(j), lpdo.kraus_dim(j), lpdo.bond_block(j), w))
            .collect()
    }

    pub fn value(&self, lpdo: &Lpdo, weights: &[SiteWeight]) -> C64 {
        let nodes = Self::nodes(lpdo, weights);
        let refs: Vec<&[C64]> = nodes.iter().map(Vec::as_slice).collect();
        self.program.forward(&refs).scalar()
    }
}

pub(crate) fn identity_weight() -> SiteWeight {
    let mut w = [[zero(); 4]; 4];
    for (a, row) in w.iter_mut().enumerate() {
        row[a] = C64::new(1.0, 0.0);
    }
    w
}

/// `W[(τ σ), (τ' σ')] = ρ[σ, σ'] M[τ', τ]`.
pub(crate) fn measurement_weight(rho: &crate::linalg::Mat2, m: &crate::linalg::Mat2) -> SiteWeight {
    let mut w = [[zero(); 4]; 4];
    for (a, row) in w.iter_mut().enumerate() {
        let (t, s) = (a / 2, a % 2);
        for (b, x) in row.iter_mut().enumerate() {
            let (tp, sp) = (b / 2, b % 2);
            *x = rho[(s, sp)] * m[(tp, t)];
        }
    }
    w
}

/// One leaf of a general network over model sites.
pub(crate) enum Leaf {
    Site {
        site: usize,
        conj: bool,
        indices: Vec<Index>,
    },
    Fixed(Tensor),
}

impl Leaf {
    /// Site `j` with each label passed through `map` (identity on `None`).
    pub fn plain(lpdo: &Lpdo, j: usize, map: impl Fn(&str) -> Option<String>) -> Self {
        Self::Site {
            site: j,
            conj: false,
            indices: renamed(lpdo.site(j).indices(), map),
        }
    }

    /// Conjugated site `j`; labels are given on the unprimed names.
    pub fn conj(lpdo: &Lpdo, j: usize, map: impl Fn(&str) -> Option<String>) -> Self {
        Self::Site {
            site: j,
            conj: true,
            indices: renamed(lpdo.site(j).indices(), map),
        }
    }

    fn indices(&self) -> &[Index] {
        match self {
            Leaf::Site { indices, .. } => indices,
            Leaf::Fixed(t) => t.indices(),
        }
    }
}

fn renamed(idx: &[Index], map: impl Fn(&str) -> Option<String>) -> Vec<Index> {
    idx.iter()
        .map(|i| map(i.name()).map_or_else(|| i.clone(), |n| i.renamed(n)))
        .collect()
}

/// A compiled network whose leaves are model sites, their conjugates and
/// fixed tensors.
pub(crate) struct SiteProgram {
    leaves: Vec<Leaf>,
    program: Program,
}

impl SiteProgram {
    pub fn new(leaves: Vec<Leaf>) -> Result<Self, LpdoError> {
        let program = compile(leaves.iter().map(|l| l.indices().to_vec()).collect())?;
        Ok(Self { leaves, program })
    }

    pub fn output_indices(&self) -> &[Index] {
        self.program.output_indices()
    }

    fn leaf_values<'a>(&'a self, lpdo: &'a Lpdo) -> Vec<Cow<'a, [C64]>> {
        self.leaves
            .iter()
            .map(|leaf| match leaf {
                Leaf::Site {
                    site, conj: false, ..
                } => Cow::Borrowed(lpdo.site_data(*site)),
                Leaf::Site {
                    site, conj: true, ..
                } => Cow::Owned(lpdo.site_data(*site).iter().map(C64::conj).collect()),
                Leaf::Fixed(t) => Cow::Borrowed(t.data()),
            })
            .collect()
    }

    pub fn contract(&self, lpdo: &Lpdo) -> Result<Tensor, LpdoError> {
        let values = self.leaf_values(lpdo);
        let refs: Vec<&[C64]> = values.iter().map(|v| &v[..]).collect();
        let fwd = self.program.forward(&refs);
        Ok(Tensor::new(
            self.output_indices().to_vec(),
            fwd.value().to_vec(),
        )?)
    }

    /// Scalar value and, per site, the derivative of the value with respect
    /// to `conj(A_j)` summed over every conjugate leaf of that site.
    pub fn scalar_and_conj_grad(&self, lpdo: &Lpdo) -> (C64, Vec<Vec<C64>>) {
        let values = self.leaf_values(lpdo);
        let refs: Vec<&[C64]> = values.iter().map(|v| &v[..]).collect();
        let fwd = self.program.forward(&refs);
        let value = fwd.scalar();
        let leaf_grads = self.program.backward(&fwd, &[C64::new(1.0, 0.0)]);
        let mut grads: Vec<Vec<C64>> = lpdo.sites().iter().map(|s| vec![zero(); s.len()]).collect();
        for (leaf, g) in self.leaves.iter().zip(leaf_grads) {
            if let Leaf::Site {
                site, conj: true, ..
            } = leaf
            {
                for (acc, x) in grads[*site].iter_mut().zip(g) {
                    *acc += x;
                }
            }
        }
        (value, grads)
    }
}
