//! Graph → expression text.
//!
//! Canonical form: `Name( arg , arg )`, `Name( )` for no arguments, inputs in
//! signature slot order. The first `positional` slots of a signature are
//! written bare while every earlier slot is filled; the rest as `slot=expr`.

use crate::graph::{DataflowGraph, NodeId};
use crate::parse::RESULT_SLOT;
use crate::registry::Registry;

/// Rendering switches shared by the serializer and structure keys.
#[derive(Clone, Copy, Debug, Default)]
pub struct RenderOptions {
    /// Emit result links as `@result=` pseudo-arguments.
    pub results: bool,
    /// Replace every terminal by `_`.
    pub mask_terminals: bool,
    /// Sort children of commutative functions by their rendering.
    pub sort_commutative: bool,
}

pub fn serialize(g: &DataflowGraph, reg: &Registry) -> String {
    render(g, reg, g.root(), RenderOptions::default())
}

/// Canonical form plus result links; what agenda files store.
pub fn serialize_full(g: &DataflowGraph, reg: &Registry) -> String {
    render(
        g,
        reg,
        g.root(),
        RenderOptions {
            results: true,
            ..Default::default()
        },
    )
}

pub fn serialize_node(g: &DataflowGraph, reg: &Registry, id: NodeId) -> String {
    render(g, reg, id, RenderOptions::default())
}

pub fn render(g: &DataflowGraph, reg: &Registry, id: NodeId, opts: RenderOptions) -> String {
    let mut out = String::new();
    write_node(g, reg, id, opts, &mut out);
    out
}

pub fn escape_terminal(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for ch in value.chars() {
        if matches!(ch, '(' | ')' | ',' | '=' | '\\') {
            out.push('\\');
        }
        out.push(ch);
    }
    out
}

fn write_node(g: &DataflowGraph, reg: &Registry, id: NodeId, opts: RenderOptions, out: &mut String) {
    let node = g.node(id);
    let name = match node.function() {
        None => {
            if opts.mask_terminals {
                out.push('_');
            } else {
                out.push_str(&escape_terminal(node.terminal().unwrap()));
            }
            return;
        }
        Some(name) => name,
    };
    let sig = reg.function(name);
    // (slot index, slot name, child)
    let mut args: Vec<(usize, &str, NodeId)> = node
        .inputs
        .iter()
        .map(|i| {
            let idx = sig
                .and_then(|s| s.slot_index(&i.slot))
                .unwrap_or(usize::MAX);
            (idx, i.slot.as_str(), i.node)
        })
        .collect();
    args.sort_by_key(|a| a.0);

    let mut rendered: Vec<(usize, &str, String)> = args
        .iter()
        .map(|&(idx, slot, child)| (idx, slot, render(g, reg, child, opts)))
        .collect();
    if opts.sort_commutative && sig.is_some_and(|s| s.commutative) {
        rendered.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.2.cmp(&b.2)));
    }

    let positional = sig.map(|s| s.positional).unwrap_or(0);
    let mut prefix_filled = true;
    let mut parts: Vec<String> = Vec::with_capacity(rendered.len() + 1);
    let mut expect = 0usize;
    for (idx, slot, text) in rendered {
        if idx != usize::MAX {
            // Any skipped signature slot breaks the positional prefix.
            if idx > expect {
                prefix_filled = false;
            }
            expect = expect.max(idx + 1);
        }
        if prefix_filled && idx < positional {
            parts.push(text);
        } else {
            prefix_filled = prefix_filled && idx < positional;
            parts.push(format!("{slot}={text}"));
        }
    }
    if opts.results {
        if let Some(r) = node.result {
            parts.push(format!("{RESULT_SLOT}={}", render(g, reg, r, opts)));
        }
    }
    out.push_str(name);
    if parts.is_empty() {
        out.push_str("( )");
    } else {
        out.push_str("( ");
        out.push_str(&parts.join(" , "));
        out.push_str(" )");
    }
}
