//! Contraction ordering for arbitrary tensor networks.
//!
//! A [`ContractionPlan`] is a binary tree of pairwise merges written in SSA
//! form: leaves are numbered `0..n`, and step `s` produces node `n + s`. Costs
//! count scalar multiplications, i.e. the product of the extents of the union
//! of both operands' labels.
//!
//! [`plan_optimal`] runs a dynamic program over connected subsets;
//! [`plan_greedy`] is the fallback for networks beyond the optimal cap. Both
//! only merge pairs that share a label until each connected component is a
//! single node, then join components by outer products, smallest first.

mod cache;
mod greedy;
mod network;
mod optimal;
mod program;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{contract_pair, Index, Tensor, TensorError};

pub use cache::PlanCache;
pub use greedy::plan_greedy;
pub use network::{plan_cache_key, NetworkShape, PlanKey, TensorNetwork};
pub use optimal::{plan_optimal, plan_optimal_with_cap, DEFAULT_OPTIMAL_CAP};
pub use program::{Forward, Program};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("network has no tensors")]
    Empty,

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error(
        "network has {n} tensors, above the optimal-search cap of {cap}; use the greedy planner"
    )]
    TooManyTensors { n: usize, cap: usize },

    #[error("network has {0} distinct labels, more than the optimal search supports")]
    TooManyLabels(usize),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractionPlan {
    pub n_inputs: usize,
    pub steps: Vec<(usize, usize)>,
    pub est_flops: u128,
    pub est_max_size: u128,
}

impl ContractionPlan {
    /// Checks the SSA structure: every node consumed exactly once, one step per merge.
    pub fn validate(&self, n_inputs: usize) -> Result<(), PlanError> {
        if self.n_inputs != n_inputs {
            return Err(PlanError::InvalidPlan(format!(
                "plan built for {} tensors, network has {}",
                self.n_inputs, n_inputs
            )));
        }
        if self.steps.len() + 1 != n_inputs {
            return Err(PlanError::InvalidPlan(format!(
                "{} steps for {} tensors",
                self.steps.len(),
                n_inputs
            )));
        }
        let mut used = vec![false; n_inputs + self.steps.len()];
        for (s, &(a, b)) in self.steps.iter().enumerate() {
            let produced = n_inputs + s;
            for id in [a, b] {
                if id >= produced || used[id] || a == b {
                    return Err(PlanError::InvalidPlan(format!(
                        "step {s} uses node {id} illegally"
                    )));
                }
                used[id] = true;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// Optimal under `cap` (and the label-count limit), greedy otherwise.
pub fn plan_auto(net: &NetworkShape, cap: usize) -> ContractionPlan {
    match plan_optimal_with_cap(net, cap) {
        Ok(plan) => plan,
        Err(_) => plan_greedy(net),
    }
}

/// Symmetric difference of two label lists, `a`'s survivors first.
pub(crate) fn merged_indices(a: &[Index], b: &[Index]) -> Vec<Index> {
    a.iter()
        .filter(|i| !b.iter().any(|j| j.name() == i.name()))
        .chain(b.iter().filter(|j| !a.iter().any(|i| i.name() == j.name())))
        .cloned()
        .collect()
}

pub(crate) fn size_of(indices: &[Index]) -> u128 {
    indices
        .iter()
        .fold(1u128, |acc, i| acc.saturating_mul(i.dim() as u128))
}

/// Scalar multiplications for merging `a` and `b`: product over the label union.
pub(crate) fn pair_flops(a: &[Index], b: &[Index]) -> u128 {
    let shared: Vec<&Index> = a
        .iter()
        .filter(|i| b.iter().any(|j| j.name() == i.name()))
        .collect();
    let union = size_of(a).saturating_mul(size_of(b));
    let shared_size = shared.iter().fold(1u128, |acc, i| acc * i.dim() as u128);
    union / shared_size
}

/// Recomputes cost metadata for a list of SSA steps.
pub(crate) fn finish_plan(net: &NetworkShape, steps: Vec<(usize, usize)>) -> ContractionPlan {
    let mut nodes: Vec<Vec<Index>> = net.nodes().to_vec();
    let mut flops = 0u128;
    let mut max_size = 0u128;
    for &(a, b) in &steps {
        flops = flops.saturating_add(pair_flops(&nodes[a], &nodes[b]));
        let out = merged_indices(&nodes[a], &nodes[b]);
        max_size = max_size.max(size_of(&out));
        nodes.push(out);
    }
    ContractionPlan {
        n_inputs: net.len(),
        steps,
        est_flops: flops,
        est_max_size: max_size,
    }
}

/// Contracts the network following `plan`. The result carries the open labels.
pub fn execute_plan(net: &TensorNetwork, plan: &ContractionPlan) -> Result<Tensor, PlanError> {
    plan.validate(net.len())?;
    let mut slots: Vec<Option<Tensor>> = net.tensors().iter().cloned().map(Some).collect();
    for &(a, b) in &plan.steps {
        let ta = slots[a].take().expect("validated plan");
        let tb = slots[b].take().expect("validated plan");
        slots.push(Some(contract_pair(&ta, &tb)?));
    }
    Ok(slots.pop().flatten().expect("nonempty network"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;

    fn shape(nodes: &[&[(&str, usize)]]) -> NetworkShape {
        NetworkShape::new(
            nodes
                .iter()
                .map(|n| n.iter().map(|(l, d)| Index::new(*l, *d)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn matrix_chain_prefers_left_association() {
        let net = shape(&[
            &[("i", 2), ("j", 3)],
            &[("j", 3), ("k", 4)],
            &[("k", 4), ("l", 5)],
        ]);
        let plan = plan_optimal(&net).unwrap();
        assert_eq!(plan.steps, vec![(0, 1), (3, 2)]);
        assert_eq!(plan.est_flops, 64);
        // the other association costs 3*4*5 + 2*3*5
        let right = finish_plan(&net, vec![(1, 2), (0, 3)]);
        assert_eq!(right.est_flops, 90);
        assert!(plan_greedy(&net).est_flops >= 64);
    }

    #[test]
    fn trivial_networks() {
        let one = shape(&[&[("a", 3)]]);
        let plan = plan_optimal(&one).unwrap();
        assert!(plan.steps.is_empty());
        assert_eq!(plan.est_flops, 0);
        let two = shape(&[&[("a", 3)], &[("a", 3), ("b", 2)]]);
        assert_eq!(plan_optimal(&two).unwrap().steps, vec![(0, 1)]);
        assert_eq!(plan_greedy(&two), plan_optimal(&two).unwrap());
    }

    #[test]
    fn scalar_network() {
        let net = TensorNetwork::new(vec![
            Tensor::scalar(C64::new(2.0, 0.0)),
            Tensor::scalar(C64::new(0.0, 3.0)),
        ])
        .unwrap();
        let plan = plan_optimal(net.shape()).unwrap();
        let out = execute_plan(&net, &plan).unwrap();
        assert_eq!(out.to_scalar().unwrap(), C64::new(0.0, 6.0));
    }

    #[test]
    fn rejects_bad_networks_and_plans() {
        let bad = NetworkShape::new(vec![
            vec![Index::new("a", 2)],
            vec![Index::new("a", 2)],
            vec![Index::new("a", 2)],
        ]);
        assert!(matches!(bad, Err(PlanError::InvalidNetwork(_))));
        let bad = NetworkShape::new(vec![vec![Index::new("a", 2)], vec![Index::new("a", 3)]]);
        assert!(matches!(bad, Err(PlanError::InvalidNetwork(_))));

        let net = shape(&[&[("a", 2)], &[("a", 2)]]);
        let mut plan = plan_optimal(&net).unwrap();
        plan.steps = vec![(0, 0)];
        assert!(plan.validate(2).is_err());
    }

    #[test]
    fn cap_is_enforced() {
        let nodes: Vec<Vec<Index>> = (0..5)
            .map(|i| {
                vec![
                    Index::new(format!("b{i}"), 2),
                    Index::new(format!("b{}", i + 1), 2),
                ]
            })
            .collect();
        let net = NetworkShape::new(nodes).unwrap();
        assert!(matches!(
            plan_optimal_with_cap(&net, 4),
            Err(PlanError::TooManyTensors { n: 5, cap: 4 })
        ));
        assert_eq!(plan_auto(&net, 4).steps.len(), 4);
    }

    #[test]
    fn disconnected_components_join_last() {
        let net = shape(&[&[("a", 2)], &[("x", 3)], &[("a", 2), ("b", 4)], &[("x", 3)]]);
        let plan = plan_optimal(&net).unwrap();
        assert_eq!(plan.steps.len(), 3);
        // both connected merges come before the outer product
        let last = *plan.steps.last().unwrap();
        assert!(last.0 >= 4 && last.1 >= 4);
        assert_eq!(plan, plan_greedy(&net));
    }

    #[test]
    fn plan_serializes() {
        let net = shape(&[&[("i", 2), ("j", 3)], &[("j", 3), ("k", 4)]]);
        let plan = plan_optimal(&net).unwrap();
        let back: ContractionPlan = serde_json::from_str(&plan.to_json()).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn cache_keys() {
        let a = shape(&[&[("i", 2), ("j", 4)], &[("j", 4)]]);
        let renamed = shape(&[&[("p", 2), ("q", 4)], &[("q", 4)]]);
        let wider = shape(&[&[("i", 2), ("j", 5)], &[("j", 5)]]);
        assert_eq!(plan_cache_key(&a), plan_cache_key(&a.clone()));
        assert_eq!(plan_cache_key(&a), plan_cache_key(&renamed));
        assert_ne!(plan_cache_key(&a), plan_cache_key(&wider));
    }
}
