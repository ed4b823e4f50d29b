use std::collections::HashMap;

use crate::tensor::Index;

use super::greedy::join_outer;
use super::{finish_plan, merged_indices, ContractionPlan, NetworkShape, PlanError};

pub const DEFAULT_OPTIMAL_CAP: usize = 16;

type LabelSet = u128;

pub fn plan_optimal(net: &NetworkShape) -> Result<ContractionPlan, PlanError> {
    plan_optimal_with_cap(net, DEFAULT_OPTIMAL_CAP)
}

/// Exhaustive search over binary trees whose subtrees are connected, by
/// dynamic programming over node subsets. Minimizes the multiplication count.
pub fn plan_optimal_with_cap(net: &NetworkShape, cap: usize) -> Result<ContractionPlan, PlanError> {
    let n = net.len();
    if n > cap || n > 31 {
        return Err(PlanError::TooManyTensors { n, cap });
    }

    let mut label_ids: HashMap<&str, usize> = HashMap::new();
    let mut label_dims = Vec::new();
    for idx in net.nodes().iter().flatten() {
        if !label_ids.contains_key(idx.name()) {
            label_ids.insert(idx.name(), label_dims.len());
            label_dims.push(idx.dim() as u128);
        }
    }
    if label_dims.len() > LabelSet::BITS as usize {
        return Err(PlanError::TooManyLabels(label_dims.len()));
    }
    let node_labels: Vec<LabelSet> = net
        .nodes()
        .iter()
        .map(|node| node.iter().fold(0, |m, idx| m | 1 << label_ids[idx.name()]))
        .collect();

    let mut nodes: Vec<Vec<Index>> = net.nodes().to_vec();
    let mut steps = Vec::with_capacity(n.saturating_sub(1));
    let mut roots = Vec::new();
    for comp in components(&node_labels) {
        let tree = optimal_tree(&comp, &node_labels, &label_dims);
        roots.push(emit(&tree, &mut nodes, &mut steps));
    }
    join_outer(&mut nodes, roots, &mut steps);
    Ok(finish_plan(net, steps))
}

fn components(node_labels: &[LabelSet]) -> Vec<Vec<usize>> {
    let n = node_labels.len();
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut frontier = vec![start];
        while let Some(x) = frontier.pop() {
            for y in 0..n {
                if comp[y] == usize::MAX && node_labels[x] & node_labels[y] != 0 {
                    comp[y] = id;
                    members.push(y);
                    frontier.push(y);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

enum Tree {
    Leaf(usize),
    Node(Box<Tree>, Box<Tree>),
}

fn set_size(mut set: LabelSet, dims: &[u128]) -> u128 {
    let mut size = 1u128;
    while set != 0 {
        let bit = set.trailing_zeros() as usize;
        size = size.saturating_mul(dims[bit]);
        set &= set - 1;
    }
    size
}

fn optimal_tree(comp: &[usize], node_labels: &[LabelSet], dims: &[u128]) -> Tree {
    let c = comp.len();
    if c == 1 {
        return Tree::Leaf(comp[0]);
    }
    let local: Vec<LabelSet> = comp.iter().map(|&g| node_labels[g]).collect();
    let adjacency: Vec<u32> = (0..c)
        .map(|i| {
            (0..c)
                .filter(|&j| j != i && local[i] & local[j] != 0)
                .fold(0u32, |m, j| m | 1 << j)
        })
        .collect();

    let full: u32 = if c == 32 { u32::MAX } else { (1u32 << c) - 1 };
    let count = full as usize + 1;
    let mut out_labels = vec![0 as LabelSet; count];
    let mut connected = vec![false; count];
    for s in 1..count {
        let low = s.trailing_zeros() as usize;
        out_labels[s] = out_labels[s & (s - 1)] ^ local[low];
        // flood fill from the lowest member
        let mut reached = 1u32 << low;
        loop {
            let mut next = reached;
            let mut bits = reached;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                next |= adjacency[b] & s as u32;
                bits &= bits - 1;
            }
            if next == reached {
                break;
            }
            reached = next;
        }
        connected[s] = reached == s as u32;
    }

    let mut cost = vec![u128::MAX; count];
    let mut split = vec![0u32; count];
    for i in 0..c {
        cost[1 << i] = 0;
    }
    for s in 1..count {
        if !connected[s] || s.count_ones() < 2 {
            continue;
        }
        let low = s & s.wrapping_neg();
        let mut best = u128::MAX;
        let mut best_left = 0usize;
        // enumerate proper submasks containing the lowest member, ascending
        let rest = s ^ low;
        let mut sub = 0usize;
        loop {
            let left = sub | low;
            if left != s {
                let right = s ^ left;
                if connected[left] && connected[right] {
                    let step = set_size(out_labels[left] | out_labels[right], dims);
                    let total = cost[left].saturating_add(cost[right]).saturating_add(step);
                    if total < best {
                        best = total;
                        best_left = left;
                    }
                }
            }
            if sub == rest {
                break;
            }
            sub = (sub.wrapping_sub(rest)) & rest;
        }
        cost[s] = best;
        split[s] = best_left as u32;
    }

    fn build(s: usize, split: &[u32], comp: &[usize]) -> Tree {
        if s.count_ones() == 1 {
            return Tree::Leaf(comp[s.trailing_zeros() as usize]);
        }
        let left = split[s] as usize;
        Tree::Node(
            Box::new(build(left, split, comp)),
            Box::new(build(s ^ left, split, comp)),
        )
    }
    build(full as usize, &split, comp)
}

fn emit(tree: &Tree, nodes: &mut Vec<Vec<Index>>, steps: &mut Vec<(usize, usize)>) -> usize {
    match tree {
        Tree::Leaf(id) => *id,
        Tree::Node(l, r) => {
            let a = emit(l, nodes, steps);
            let b = emit(r, nodes, steps);
            let out = merged_indices(&nodes[a], &nodes[b]);
            nodes.push(out);
            steps.push((a, b));
            nodes.len() - 1
        }
    }
}
