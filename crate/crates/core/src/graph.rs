//! Arena-backed dataflow graphs.
//!
//! Nodes live in a flat store indexed by [`NodeId`]. Input edges form a DAG
//! rooted at `root`; result links (agent-visible evaluation results) are
//! kept apart from inputs and never participate in structural comparison.
//! Nodes orphaned by a mutation stay in the store but are unreachable; use
//! [`DataflowGraph::compact`] to drop them.

use std::collections::{HashMap, HashSet};

use crate::error::DfError;
use crate::registry::TypeName;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Payload {
    Function(String),
    Terminal(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Input {
    pub slot: String,
    pub node: NodeId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub payload: Payload,
    pub inputs: Vec<Input>,
    pub result: Option<NodeId>,
    /// Filled in by typechecking: the node's (inferred) type.
    pub ty: Option<TypeName>,
}

impl Node {
    pub fn function(&self) -> Option<&str> {
        match &self.payload {
            Payload::Function(name) => Some(name),
            Payload::Terminal(_) => None,
        }
    }

    pub fn terminal(&self) -> Option<&str> {
        match &self.payload {
            Payload::Terminal(v) => Some(v),
            Payload::Function(_) => None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.payload, Payload::Terminal(_))
    }

    /// First input filling `slot`.
    pub fn input(&self, slot: &str) -> Option<NodeId> {
        self.inputs.iter().find(|i| i.slot == slot).map(|i| i.node)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataflowGraph {
    nodes: Vec<Node>,
    root: NodeId,
}

impl DataflowGraph {
    /// A graph holding one node, which becomes the root.
    pub fn with_root(payload: Payload) -> Self {
        let mut g = DataflowGraph {
            nodes: Vec::new(),
            root: NodeId(0),
        };
        g.root = g.add(payload);
        g
    }

    pub fn function_root(name: &str) -> Self {
        Self::with_root(Payload::Function(name.to_string()))
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn set_root(&mut self, id: NodeId) -> Result<(), DfError> {
        self.check(id)?;
        self.root = id;
        Ok(())
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id.index()]
    }

    pub fn get(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id.index())
    }

    fn check(&self, id: NodeId) -> Result<(), DfError> {
        if id.index() < self.nodes.len() {
            Ok(())
        } else {
            Err(DfError::DanglingNode(id))
        }
    }

    pub fn add(&mut self, payload: Payload) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            id,
            payload,
            inputs: Vec::new(),
            result: None,
            ty: None,
        });
        id
    }

    pub fn add_terminal(&mut self, value: impl Into<String>) -> NodeId {
        self.add(Payload::Terminal(value.into()))
    }

    /// Adds a function node with the given inputs.
    pub fn add_function(&mut self, name: &str, inputs: &[(&str, NodeId)]) -> NodeId {
        let id = self.add(Payload::Function(name.to_string()));
        for (slot, child) in inputs {
            self.nodes[id.index()].inputs.push(Input {
                slot: slot.to_string(),
                node: *child,
            });
        }
        id
    }

    /// True when `to` is reachable from `from` over input edges.
    pub fn reaches(&self, from: NodeId, to: NodeId) -> bool {
        let mut stack = vec![from];
        let mut seen = HashSet::new();
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if seen.insert(n) {
                stack.extend(self.node(n).inputs.iter().map(|i| i.node));
            }
        }
        false
    }

    /// Appends an input edge. Rejects edges that would close a cycle.
    pub fn push_input(&mut self, parent: NodeId, slot: &str, child: NodeId) -> Result<(), DfError> {
        self.check(parent)?;
        self.check(child)?;
        if self.node(parent).is_terminal() {
            return Err(DfError::ArityMismatch {
                function: format!("{:?}", self.node(parent).payload),
                detail: "terminals take no inputs".into(),
            });
        }
        if self.reaches(child, parent) {
            return Err(DfError::Cycle);
        }
        self.nodes[parent.index()].inputs.push(Input {
            slot: slot.to_string(),
            node: child,
        });
        Ok(())
    }

    /// Replaces the first input on `slot` (or appends one).
    pub fn set_input(&mut self, parent: NodeId, slot: &str, child: NodeId) -> Result<(), DfError> {
        self.check(parent)?;
        self.check(child)?;
        if self.reaches(child, parent) {
            return Err(DfError::Cycle);
        }
        let pos = self.nodes[parent.index()]
            .inputs
            .iter()
            .position(|i| i.slot == slot);
        match pos {
            Some(p) => {
                self.nodes[parent.index()].inputs[p].node = child;
                Ok(())
            }
            None => self.push_input(parent, slot, child),
        }
    }

    /// Points whichever input edge currently targets `old` at `new` instead.
    pub fn replace_child(&mut self, parent: NodeId, old: NodeId, new: NodeId) -> Result<(), DfError> {
        self.check(new)?;
        if self.reaches(new, parent) {
            return Err(DfError::Cycle);
        }
        let inp = self.nodes[parent.index()]
            .inputs
            .iter_mut()
            .find(|i| i.node == old)
            .ok_or(DfError::DanglingNode(old))?;
        inp.node = new;
        Ok(())
    }

    pub fn remove_input(&mut self, parent: NodeId, slot: &str) -> Option<NodeId> {
        let node = &mut self.nodes[parent.index()];
        let pos = node.inputs.iter().position(|i| i.slot == slot)?;
        Some(node.inputs.remove(pos).node)
    }

    pub fn set_result(&mut self, node: NodeId, result: Option<NodeId>) {
        self.nodes[node.index()].result = result;
    }

    /// Input children in edge order.
    pub fn children(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.node(id).inputs.iter().map(|i| i.node)
    }

    /// Nodes reachable from `start` over input edges, preorder, each once.
    pub fn preorder_from(&self, start: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            out.push(n);
            for inp in self.node(n).inputs.iter().rev() {
                stack.push(inp.node);
            }
        }
        out
    }

    pub fn preorder(&self) -> Vec<NodeId> {
        self.preorder_from(self.root)
    }

    /// Number of nodes reachable from the root over input edges.
    pub fn node_count(&self) -> usize {
        self.preorder().len()
    }

    /// Parent map over the input tree reachable from the root.
    pub fn parents(&self) -> HashMap<NodeId, NodeId> {
        let mut out = HashMap::new();
        for n in self.preorder() {
            for c in self.children(n) {
                out.entry(c).or_insert(n);
            }
        }
        out
    }

    /// Every node reachable from `start` through inputs or result links.
    fn closure(&self, start: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            out.push(n);
            let node = self.node(n);
            if let Some(r) = node.result {
                stack.push(r);
            }
            for inp in node.inputs.iter().rev() {
                stack.push(inp.node);
            }
        }
        out
    }

    /// Copies the subgraph under `id` (inputs and result links) into `dst`,
    /// returning the id of the copied root.
    pub fn copy_into(&self, id: NodeId, dst: &mut DataflowGraph) -> NodeId {
        let order = self.closure(id);
        let mut remap = HashMap::with_capacity(order.len());
        for &old in &order {
            let n = self.node(old);
            let new = dst.add(n.payload.clone());
            dst.nodes[new.index()].ty = n.ty.clone();
            remap.insert(old, new);
        }
        for &old in &order {
            let n = self.node(old);
            let new = remap[&old];
            dst.nodes[new.index()].inputs = n
                .inputs
                .iter()
                .map(|i| Input {
                    slot: i.slot.clone(),
                    node: remap[&i.node],
                })
                .collect();
            dst.nodes[new.index()].result = n.result.map(|r| remap[&r]);
        }
        remap[&id]
    }

    /// The subgraph rooted at `id`, as a standalone graph.
    pub fn subgraph(&self, id: NodeId) -> DataflowGraph {
        let mut g = DataflowGraph {
            nodes: Vec::new(),
            root: NodeId(0),
        };
        g.root = self.copy_into(id, &mut g);
        g
    }

    /// Drops unreachable nodes, renumbering the rest.
    pub fn compact(&self) -> DataflowGraph {
        self.subgraph(self.root)
    }

    /// Checks that every referenced id resolves and that inputs are acyclic.
    pub fn validate_structure(&self) -> Result<(), DfError> {
        for n in &self.nodes {
            for inp in &n.inputs {
                self.check(inp.node)?;
            }
            if let Some(r) = n.result {
                self.check(r)?;
            }
            if n.is_terminal() && !n.inputs.is_empty() {
                return Err(DfError::ArityMismatch {
                    function: format!("{:?}", n.payload),
                    detail: "terminal with inputs".into(),
                });
            }
        }
        self.check(self.root)?;
        // Three-colour DFS over all nodes.
        let mut state = vec![0u8; self.nodes.len()];
        for start in 0..self.nodes.len() {
            if state[start] != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            state[start] = 1;
            while let Some((n, i)) = stack.pop() {
                let inputs = &self.nodes[n].inputs;
                if i < inputs.len() {
                    stack.push((n, i + 1));
                    let c = inputs[i].node.index();
                    match state[c] {
                        0 => {
                            state[c] = 1;
                            stack.push((c, 0));
                        }
                        1 => return Err(DfError::Cycle),
                        _ => {}
                    }
                } else {
                    state[n] = 2;
                }
            }
        }
        Ok(())
    }

    /// Raw store size, including unreachable nodes.
    pub fn store_len(&self) -> usize {
        self.nodes.len()
    }
}
