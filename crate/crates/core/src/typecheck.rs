//! Type inference and checking over dataflow graphs.

use std::collections::HashMap;

use crate::error::DfError;
use crate::graph::{DataflowGraph, NodeId};
use crate::registry::{Registry, TypeName, STR};

/// Typechecks the input tree under the root and every result subgraph,
/// recording each node's type. Returns the root type.
pub fn typecheck(g: &mut DataflowGraph, reg: &Registry) -> Result<TypeName, DfError> {
    g.validate_structure()?;
    let mut memo = HashMap::new();
    let root_ty = infer(g, reg, g.root(), None, &mut memo)?;
    let mut pending: Vec<NodeId> = g.preorder().iter().filter_map(|&n| g.node(n).result).collect();
    let mut done = std::collections::HashSet::new();
    while let Some(r) = pending.pop() {
        if !done.insert(r) {
            continue;
        }
        infer(g, reg, r, None, &mut memo)?;
        pending.extend(g.preorder_from(r).iter().filter_map(|&n| g.node(n).result));
    }
    Ok(root_ty)
}

/// Type the graph's root returns, without mutating it.
pub fn type_of(g: &DataflowGraph, reg: &Registry) -> Result<TypeName, DfError> {
    let mut copy = g.clone();
    typecheck(&mut copy, reg)
}

fn infer(
    g: &mut DataflowGraph,
    reg: &Registry,
    id: NodeId,
    expected: Option<(&str, &TypeName)>,
    memo: &mut HashMap<NodeId, TypeName>,
) -> Result<TypeName, DfError> {
    let node = g.node(id).clone();
    if let Some(value) = node.terminal() {
        let ty = match expected {
            Some((slot, ty)) => {
                if !reg.literal_kind(ty).accepts(value) {
                    return Err(DfError::TypeMismatch {
                        slot: slot.to_string(),
                        expected: ty.to_string(),
                        got: format!("literal `{value}`"),
                    });
                }
                ty.clone()
            }
            None => TypeName::new(STR),
        };
        g.node_mut(id).ty = Some(ty.clone());
        return Ok(ty);
    }
    if let Some(t) = memo.get(&id) {
        return Ok(t.clone());
    }
    let name = node.function().unwrap();
    let sig = reg
        .function(name)
        .ok_or_else(|| DfError::UnknownFunction(name.to_string()))?
        .clone();
    let arity = |detail: String| DfError::ArityMismatch {
        function: sig.name.clone(),
        detail,
    };
    for spec in &sig.slots {
        let n = node.inputs.iter().filter(|i| i.slot == spec.name).count();
        if spec.required && n == 0 {
            return Err(arity(format!("missing required slot `{}`", spec.name)));
        }
        if !spec.variadic && n > 1 {
            return Err(arity(format!("slot `{}` filled twice", spec.name)));
        }
    }
    for inp in &node.inputs {
        let spec = sig
            .slot(&inp.slot)
            .ok_or_else(|| arity(format!("no slot named `{}`", inp.slot)))?;
        let label = format!("{}.{}", sig.name, spec.name);
        let got = infer(g, reg, inp.node, Some((&label, &spec.ty)), memo)?;
        if !reg.is_subtype(&got, &spec.ty) {
            return Err(DfError::TypeMismatch {
                slot: label,
                expected: spec.ty.to_string(),
                got: got.to_string(),
            });
        }
    }
    let ret = if sig.type_parametric {
        let arg = node
            .inputs
            .first()
            .and_then(|i| g.node(i.node).terminal().map(str::to_string));
        match arg {
            Some(v) if reg.has_type(&v) => TypeName::new(v),
            Some(v) if reg.function(&v).is_some() => reg.function(&v).unwrap().return_type.clone(),
            other => {
                return Err(DfError::TypeMismatch {
                    slot: format!("{}.{}", sig.name, sig.slots.first().map(|s| s.name.as_str()).unwrap_or("")),
                    expected: "type or function name".into(),
                    got: other.unwrap_or_else(|| "expression".into()),
                })
            }
        }
    } else {
        sig.return_type.clone()
    };
    g.node_mut(id).ty = Some(ret.clone());
    memo.insert(id, ret.clone());
    Ok(ret)
}
