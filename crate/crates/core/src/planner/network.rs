use std::collections::HashMap;

use crate::tensor::{Index, Tensor};

use super::PlanError;

/// Labels of every node in a network, without data. Planning and plan
/// compilation only need this much.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkShape {
    nodes: Vec<Vec<Index>>,
}

impl NetworkShape {
    /// Validates that no label appears more than twice and that the two
    /// occurrences of a bond label agree on extent.
    pub fn new(nodes: Vec<Vec<Index>>) -> Result<Self, PlanError> {
        if nodes.is_empty() {
            return Err(PlanError::Empty);
        }
        let mut seen: HashMap<&str, (usize, usize)> = HashMap::new();
        for node in &nodes {
            for idx in node {
                let entry = seen.entry(idx.name()).or_insert((0, idx.dim()));
                entry.0 += 1;
                if entry.0 > 2 {
                    return Err(PlanError::InvalidNetwork(format!(
                        "label `{}` appears more than twice",
                        idx.name()
                    )));
                }
                if entry.1 != idx.dim() {
                    return Err(PlanError::InvalidNetwork(format!(
                        "label `{}` has extents {} and {}",
                        idx.name(),
                        entry.1,
                        idx.dim()
                    )));
                }
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[Vec<Index>] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Labels that appear exactly once, in order of first appearance.
    pub fn open_indices(&self) -> Vec<Index> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for idx in self.nodes.iter().flatten() {
            *counts.entry(idx.name()).or_default() += 1;
        }
        self.nodes
            .iter()
            .flatten()
            .filter(|idx| counts[idx.name()] == 1)
            .cloned()
            .collect()
    }
}

/// A set of tensors whose shared labels are summed when contracted.
#[derive(Clone, Debug)]
pub struct TensorNetwork {
    tensors: Vec<Tensor>,
    shape: NetworkShape,
}

impl TensorNetwork {
    pub fn new(tensors: Vec<Tensor>) -> Result<Self, PlanError> {
        let shape = NetworkShape::new(tensors.iter().map(|t| t.indices().to_vec()).collect())?;
        Ok(Self { tensors, shape })
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn open_indices(&self) -> Vec<Index> {
        self.shape.open_indices()
    }
}

/// Topology-and-extents fingerprint of a network. Label names are replaced by
/// their order of first appearance, so renamed copies map to the same key.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PlanKey(Vec<Vec<(usize, usize)>>);

pub fn plan_cache_key(net: &NetworkShape) -> PlanKey {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let key = net
        .nodes()
        .iter()
        .map(|node| {
            node.iter()
                .map(|idx| {
                    let next = ids.len();
                    let id = *ids.entry(idx.name()).or_insert(next);
                    (id, idx.dim())
                })
                .collect()
        })
        .collect();
    PlanKey(key)
}
