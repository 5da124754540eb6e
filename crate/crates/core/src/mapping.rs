//! Mapping the current dialogue graph onto the target graph, and finding
//! where the current graph can still grow toward it.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::graph::{DataflowGraph, Node, NodeId};
use crate::registry::{Registry, TypeName, STR};
use crate::serialize::serialize_node;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("root `{current}` cannot map onto root `{target}`")]
    RootMismatch { current: String, target: String },
}

/// Injective partial map from current-graph nodes to target-graph nodes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Mapping {
    forward: BTreeMap<NodeId, NodeId>,
    backward: BTreeMap<NodeId, NodeId>,
}

impl Mapping {
    pub fn get(&self, current: NodeId) -> Option<NodeId> {
        self.forward.get(&current).copied()
    }

    pub fn source_of(&self, target: NodeId) -> Option<NodeId> {
        self.backward.get(&target).copied()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.forward.iter().map(|(a, b)| (*a, *b))
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    fn insert(&mut self, c: NodeId, t: NodeId) -> bool {
        if self.forward.contains_key(&c) || self.backward.contains_key(&t) {
            return false;
        }
        self.forward.insert(c, t);
        self.backward.insert(t, c);
        true
    }
}

/// Same function name, or terminals with equal values.
pub fn labels_match(a: &Node, b: &Node) -> bool {
    a.payload == b.payload
}

fn label(n: &Node) -> String {
    n.function()
        .map(str::to_string)
        .unwrap_or_else(|| format!("\"{}\"", n.terminal().unwrap_or_default()))
}

/// Above this many children a commutative node falls back from exhaustive
/// assignment search to greedy pairing.
const EXACT_ASSIGNMENT_LIMIT: usize = 8;

/// Rooted top-down mapping. Roots must carry the same label; below them,
/// the k-th child in a slot maps to the k-th target child in that slot when
/// labels agree. Children of commutative functions are paired to maximise
/// the total mapped size, ties broken by canonical rendering order.
pub fn map_graphs(current: &DataflowGraph, target: &DataflowGraph, reg: &Registry) -> Result<Mapping, MapError> {
    let (c, t) = (current.root(), target.root());
    if !labels_match(current.node(c), target.node(t)) {
        return Err(MapError::RootMismatch {
            current: label(current.node(c)),
            target: label(target.node(t)),
        });
    }
    let mut m = Matcher {
        current,
        target,
        reg,
        memo: HashMap::new(),
    };
    let pairs = m.build(c, t);
    let mut mapping = Mapping::default();
    for (a, b) in pairs {
        mapping.insert(a, b);
    }
    Ok(mapping)
}

struct Matcher<'a> {
    current: &'a DataflowGraph,
    target: &'a DataflowGraph,
    reg: &'a Registry,
    memo: HashMap<(NodeId, NodeId), Vec<(NodeId, NodeId)>>,
}

impl Matcher<'_> {
    /// Pairs for the subtrees under an already label-matched (c, t).
    fn build(&mut self, c: NodeId, t: NodeId) -> Vec<(NodeId, NodeId)> {
        if let Some(p) = self.memo.get(&(c, t)) {
            return p.clone();
        }
        let cn = self.current.node(c);
        let tn = self.target.node(t);
        let mut out = vec![(c, t)];
        let commutative = cn
            .function()
            .and_then(|f| self.reg.function(f))
            .is_some_and(|s| s.commutative);
        let mut slots: Vec<&str> = Vec::new();
        for i in &cn.inputs {
            if !slots.contains(&i.slot.as_str()) {
                slots.push(&i.slot);
            }
        }
        for slot in slots {
            let cs: Vec<NodeId> = cn.inputs.iter().filter(|i| i.slot == slot).map(|i| i.node).collect();
            let ts: Vec<NodeId> = tn.inputs.iter().filter(|i| i.slot == slot).map(|i| i.node).collect();
            if commutative {
                for (a, b) in self.assign(&cs, &ts) {
                    out.extend(self.build(a, b));
                }
            } else {
                for (a, b) in cs.iter().zip(&ts) {
                    if labels_match(self.current.node(*a), self.target.node(*b)) {
                        out.extend(self.build(*a, *b));
                    }
                }
            }
        }
        self.memo.insert((c, t), out.clone());
        out
    }

    fn assign(&mut self, cs: &[NodeId], ts: &[NodeId]) -> Vec<(NodeId, NodeId)> {
        let mut ts: Vec<(String, NodeId)> = ts
            .iter()
            .map(|&t| (serialize_node(self.target, self.reg, t), t))
            .collect();
        ts.sort();
        let ts: Vec<NodeId> = ts.into_iter().map(|(_, t)| t).collect();
        // score[i][j] = mapped size if cs[i] pairs with ts[j], 0 if labels differ.
        let score: Vec<Vec<usize>> = cs
            .iter()
            .map(|&c| {
                ts.iter()
                    .map(|&t| {
                        if labels_match(self.current.node(c), self.target.node(t)) {
                            self.build(c, t).len()
                        } else {
                            0
                        }
                    })
                    .collect()
            })
            .collect();
        let chosen = if cs.len() <= EXACT_ASSIGNMENT_LIMIT {
            let mut best = (0, Vec::new());
            let mut used = vec![false; ts.len()];
            search(&score, 0, &mut used, &mut Vec::new(), 0, &mut best);
            best.1
        } else {
            let mut cands: Vec<(usize, usize, usize)> = Vec::new();
            for (i, row) in score.iter().enumerate() {
                for (j, &s) in row.iter().enumerate() {
                    if s > 0 {
                        cands.push((s, i, j));
                    }
                }
            }
            cands.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let (mut ui, mut uj) = (vec![false; cs.len()], vec![false; ts.len()]);
            let mut out = Vec::new();
            for (_, i, j) in cands {
                if !ui[i] && !uj[j] {
                    ui[i] = true;
                    uj[j] = true;
                    out.push((i, j));
                }
            }
            out
        };
        chosen.into_iter().map(|(i, j)| (cs[i], ts[j])).collect()
    }
}

fn search(
    score: &[Vec<usize>],
    i: usize,
    used: &mut [bool],
    acc: &mut Vec<(usize, usize)>,
    total: usize,
    best: &mut (usize, Vec<(usize, usize)>),
) {
    if i == score.len() {
        if total > best.0 {
            *best = (total, acc.clone());
        }
        return;
    }
    for j in 0..used.len() {
        if !used[j] && score[i][j] > 0 {
            used[j] = true;
            acc.push((i, j));
            search(score, i + 1, used, acc, total + score[i][j], best);
            acc.pop();
            used[j] = false;
        }
    }
    search(score, i + 1, used, acc, total, best);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotReason {
    Missing,
    Differs,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpenSlot {
    pub slot: String,
    /// Slot names from the target root down to this slot.
    pub path: Vec<String>,
    pub target_value: NodeId,
    pub value: String,
    pub ty: TypeName,
    pub current_value: Option<String>,
    pub reason: SlotReason,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionPoint {
    /// The target node's counterpart if mapped, otherwise its nearest mapped
    /// ancestor's counterpart.
    pub current_node: NodeId,
    pub target_node: NodeId,
    /// Slot names from `current_node` down to the target node's position;
    /// empty when the target node itself is mapped.
    pub anchor_path: Vec<String>,
    /// Function name of the target node.
    pub function: String,
    pub open_slots: Vec<OpenSlot>,
    pub info_fields: Vec<String>,
}

impl ExtensionPoint {
    pub fn pending(&self) -> usize {
        self.open_slots.len()
    }
}

pub trait ExtensionPolicy {
    fn extensible(&self, function: &str) -> bool;
    /// Whether the node's result carries agent-found fields the user may ask for.
    fn exposes_info(&self, function: &str) -> bool;
}

#[derive(Clone, Debug, Default)]
pub struct TablePolicy {
    extensible: BTreeSet<String>,
    info: BTreeSet<String>,
    all_functions: bool,
}

impl TablePolicy {
    pub fn new<'a>(
        extensible: impl IntoIterator<Item = &'a str>,
        info: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        TablePolicy {
            extensible: extensible.into_iter().map(str::to_string).collect(),
            info: info.into_iter().map(str::to_string).collect(),
            all_functions: false,
        }
    }

    /// Every function node extensible, no terminal, no info fields.
    pub fn permissive() -> Self {
        TablePolicy {
            all_functions: true,
            ..Default::default()
        }
    }
}

impl ExtensionPolicy for TablePolicy {
    fn extensible(&self, function: &str) -> bool {
        self.all_functions || self.extensible.contains(function)
    }

    fn exposes_info(&self, function: &str) -> bool {
        self.info.contains(function)
    }
}

/// Extension points in target preorder. A point lists the terminal-valued
/// target slots the current graph lacks or fills differently, plus the
/// agent-result fields still unasked (offered only once the current
/// counterpart carries a result of its own).
pub fn extensible_nodes(
    current: &DataflowGraph,
    target: &DataflowGraph,
    mapping: &Mapping,
    policy: &dyn ExtensionPolicy,
) -> Vec<ExtensionPoint> {
    // (node, path from root, parent)
    let mut order: Vec<(NodeId, Vec<String>, Option<NodeId>)> = Vec::new();
    let mut stack = vec![(target.root(), Vec::new(), None)];
    while let Some((id, path, parent)) = stack.pop() {
        for inp in target.node(id).inputs.iter().rev() {
            let mut p = path.clone();
            p.push(inp.slot.clone());
            stack.push((inp.node, p, Some(id)));
        }
        order.push((id, path, parent));
    }
    let parent_of: HashMap<NodeId, (Option<NodeId>, Vec<String>)> =
        order.iter().map(|(id, path, parent)| (*id, (*parent, path.clone()))).collect();

    let mut points = Vec::new();
    for (t, path, _) in &order {
        let tn = target.node(*t);
        let Some(function) = tn.function() else { continue };
        if !policy.extensible(function) {
            continue;
        }
        let counterpart = mapping.source_of(*t);
        let (anchor, anchor_path) = match counterpart {
            Some(c) => (c, Vec::new()),
            None => {
                let mut up = *t;
                let mut rel: Vec<String> = Vec::new();
                loop {
                    let (parent, p) = &parent_of[&up];
                    let Some(parent) = parent else { break };
                    rel.insert(0, p.last().cloned().unwrap_or_default());
                    up = *parent;
                    if mapping.source_of(up).is_some() {
                        break;
                    }
                }
                match mapping.source_of(up) {
                    Some(c) => (c, rel),
                    None => continue,
                }
            }
        };

        let mut open = Vec::new();
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for inp in &tn.inputs {
            let k = seen.entry(inp.slot.as_str()).or_default();
            let nth = *k;
            *k += 1;
            let child = target.node(inp.node);
            let Some(value) = child.terminal() else { continue };
            let cur = counterpart.and_then(|c| {
                current
                    .node(c)
                    .inputs
                    .iter()
                    .filter(|i| i.slot == inp.slot)
                    .nth(nth)
                    .map(|i| current.node(i.node))
            });
            let (reason, current_value) = match cur {
                None => (SlotReason::Missing, None),
                Some(n) if n.terminal() == Some(value) => continue,
                Some(n) => (
                    SlotReason::Differs,
                    Some(n.terminal().map(str::to_string).unwrap_or_else(|| label(n))),
                ),
            };
            let mut p = path.clone();
            p.push(inp.slot.clone());
            open.push(OpenSlot {
                slot: inp.slot.clone(),
                path: p,
                target_value: inp.node,
                value: value.to_string(),
                ty: child.ty.clone().unwrap_or_else(|| TypeName::new(STR)),
                current_value,
                reason,
            });
        }

        let mut info = Vec::new();
        if policy.exposes_info(function) {
            let current_result = counterpart.and_then(|c| current.node(c).result);
            if let (Some(tr), Some(cr)) = (tn.result, current_result) {
                let have: BTreeSet<&str> = current.node(cr).inputs.iter().map(|i| i.slot.as_str()).collect();
                for i in &target.node(tr).inputs {
                    if !have.contains(i.slot.as_str()) && !info.contains(&i.slot) {
                        info.push(i.slot.clone());
                    }
                }
            }
        }

        if !open.is_empty() || !info.is_empty() {
            points.push(ExtensionPoint {
                current_node: anchor,
                target_node: *t,
                anchor_path,
                function: function.to_string(),
                open_slots: open,
                info_fields: info,
            });
        }
    }
    points
}
