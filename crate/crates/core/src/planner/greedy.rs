use crate::tensor::Index;

use super::{finish_plan, merged_indices, size_of, ContractionPlan, NetworkShape};

fn shares_label(a: &[Index], b: &[Index]) -> bool {
    a.iter().any(|i| b.iter().any(|j| j.name() == i.name()))
}

fn merge_score(a: &[Index], b: &[Index]) -> i128 {
    let out = size_of(&merged_indices(a, b)) as i128;
    out - size_of(a) as i128 - size_of(b) as i128
}

/// Best pair among `active` by (score, ids); only label-sharing pairs when `connected`.
fn best_pair(nodes: &[Vec<Index>], active: &[usize], connected: bool) -> Option<(usize, usize)> {
    let mut best: Option<(i128, usize, usize)> = None;
    for (x, &a) in active.iter().enumerate() {
        for &b in &active[x + 1..] {
            if connected && !shares_label(&nodes[a], &nodes[b]) {
                continue;
            }
            let score = merge_score(&nodes[a], &nodes[b]);
            let cand = (score, a.min(b), a.max(b));
            if best.is_none_or(|cur| cand < cur) {
                best = Some(cand);
            }
        }
    }
    best.map(|(_, a, b)| (a, b))
}

fn merge(
    nodes: &mut Vec<Vec<Index>>,
    active: &mut Vec<usize>,
    steps: &mut Vec<(usize, usize)>,
    (a, b): (usize, usize),
) {
    let out = merged_indices(&nodes[a], &nodes[b]);
    nodes.push(out);
    active.retain(|&x| x != a && x != b);
    active.push(nodes.len() - 1);
    active.sort_unstable();
    steps.push((a, b));
}

/// Joins the remaining (mutually disconnected) nodes by outer products.
pub(crate) fn join_outer(
    nodes: &mut Vec<Vec<Index>>,
    mut active: Vec<usize>,
    steps: &mut Vec<(usize, usize)>,
) {
    while active.len() > 1 {
        let pair = best_pair(nodes, &active, false).expect("at least two nodes");
        merge(nodes, &mut active, steps, pair);
    }
}

/// Repeatedly merges the label-sharing pair that minimizes
/// `size(result) - size(a) - size(b)`, ties to the smallest id pair.
pub fn plan_greedy(net: &NetworkShape) -> ContractionPlan {
    let mut nodes: Vec<Vec<Index>> = net.nodes().to_vec();
    let mut active: Vec<usize> = (0..nodes.len()).collect();
    let mut steps = Vec::with_capacity(nodes.len().saturating_sub(1));
    while let Some(pair) = best_pair(&nodes, &active, true) {
        merge(&mut nodes, &mut active, &mut steps, pair);
    }
    join_outer(&mut nodes, active, &mut steps);
    finish_plan(net, steps)
}
