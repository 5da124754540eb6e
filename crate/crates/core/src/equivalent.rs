//! Structural equality of dataflow graphs.

use crate::graph::{DataflowGraph, NodeId};
use crate::registry::Registry;

/// Compares the labeled trees under both roots: function names, slot labels
/// and terminal values must agree; children of commutative functions are
/// compared as multisets. Node ids and result links are ignored.
pub fn equivalent(a: &DataflowGraph, b: &DataflowGraph, reg: &Registry) -> bool {
    nodes_equivalent(a, a.root(), b, b.root(), reg)
}

pub fn nodes_equivalent(
    a: &DataflowGraph,
    an: NodeId,
    b: &DataflowGraph,
    bn: NodeId,
    reg: &Registry,
) -> bool {
    let na = a.node(an);
    let nb = b.node(bn);
    if na.payload != nb.payload || na.inputs.len() != nb.inputs.len() {
        return false;
    }
    let Some(name) = na.function() else {
        return true;
    };
    let commutative = reg.function(name).is_some_and(|s| s.commutative);
    if commutative {
        let left: Vec<_> = na.inputs.iter().collect();
        let mut used = vec![false; nb.inputs.len()];
        match_multiset(a, &left, b, &nb.inputs, &mut used, reg)
    } else {
        // Same slot multiset, and per slot the same child sequence.
        let mut slots: Vec<&str> = na.inputs.iter().map(|i| i.slot.as_str()).collect();
        slots.sort_unstable();
        slots.dedup();
        slots.iter().all(|slot| {
            let xs: Vec<_> = na.inputs.iter().filter(|i| i.slot == *slot).collect();
            let ys: Vec<_> = nb.inputs.iter().filter(|i| i.slot == *slot).collect();
            xs.len() == ys.len()
                && xs
                    .iter()
                    .zip(&ys)
                    .all(|(x, y)| nodes_equivalent(a, x.node, b, y.node, reg))
        })
    }
}

/// Backtracking perfect matching between two child lists.
fn match_multiset(
    a: &DataflowGraph,
    left: &[&crate::graph::Input],
    b: &DataflowGraph,
    right: &[crate::graph::Input],
    used: &mut [bool],
    reg: &Registry,
) -> bool {
    let Some((first, rest)) = left.split_first() else {
        return true;
    };
    for j in 0..right.len() {
        if used[j] || right[j].slot != first.slot {
            continue;
        }
        if nodes_equivalent(a, first.node, b, right[j].node, reg) {
            used[j] = true;
            if match_multiset(a, rest, b, right, used, reg) {
                return true;
            }
            used[j] = false;
        }
    }
    false
}
