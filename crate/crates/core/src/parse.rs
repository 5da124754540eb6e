//! Expression text → graph.
//!
//! Grammar (whitespace-insensitive around punctuation):
//!
//! ```text
//! expr  := NAME '(' [arg (',' arg)*] ')' | TERMINAL
//! arg   := [SLOT '='] expr | '@result' '=' expr
//! ```
//!
//! A token followed by `(` is a function name; anything else up to the next
//! `,` or `)` is a terminal, so multi-word values such as `get together`
//! need no quoting. A backslash escapes the next character.

use crate::error::DfError;
use crate::graph::{DataflowGraph, NodeId, Payload};
use crate::registry::Registry;
use crate::typecheck::typecheck;

/// Pseudo-slot carrying a node's result link in full serializations.
pub const RESULT_SLOT: &str = "@result";

/// Parses and typechecks an expression.
pub fn parse_expression(text: &str, registry: &Registry) -> Result<DataflowGraph, DfError> {
    let mut g = parse_untyped(text, registry)?;
    typecheck(&mut g, registry)?;
    Ok(g)
}

/// Parses without typechecking. Function names are still resolved against
/// the registry (aliases become canonical names) and slots are assigned.
pub fn parse_untyped(text: &str, registry: &Registry) -> Result<DataflowGraph, DfError> {
    let mut p = Parser {
        src: text.as_bytes(),
        text,
        pos: 0,
        registry,
        graph: DataflowGraph::with_root(Payload::Terminal(String::new())),
    };
    p.skip_ws();
    let root = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input"));
    }
    p.graph.set_root(root)?;
    Ok(p.graph.compact())
}

struct Parser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    registry: &'a Registry,
    graph: DataflowGraph,
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> DfError {
        DfError::SyntaxError {
            position: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    /// Reads up to the next unescaped delimiter in `stops`, without consuming
    /// it. Returns the unescaped, whitespace-collapsed text and the delimiter.
    fn word(&mut self, stops: &[u8]) -> Result<(String, Option<u8>), DfError> {
        let mut out = String::new();
        let mut pending_space = false;
        while self.pos < self.src.len() {
            let b = self.src[self.pos];
            if stops.contains(&b) {
                return Ok((out, Some(b)));
            }
            if b == b'\\' {
                let ch = self.text[self.pos + 1..]
                    .chars()
                    .next()
                    .ok_or_else(|| self.err("dangling escape"))?;
                if ch.is_whitespace() {
                    pending_space = !out.is_empty();
                } else {
                    if pending_space {
                        out.push(' ');
                        pending_space = false;
                    }
                    out.push(ch);
                }
                self.pos += 1 + ch.len_utf8();
                continue;
            }
            let ch = self.text[self.pos..].chars().next().unwrap();
            if ch.is_whitespace() {
                pending_space = !out.is_empty();
            } else {
                if pending_space {
                    out.push(' ');
                    pending_space = false;
                }
                out.push(ch);
            }
            self.pos += ch.len_utf8();
        }
        Ok((out, None))
    }

    fn expr(&mut self) -> Result<NodeId, DfError> {
        let start = self.pos;
        let (tok, delim) = self.word(b"(),")?;
        if delim == Some(b'(') {
            if tok.is_empty() || tok.contains(' ') {
                self.pos = start;
                return Err(self.err("malformed function name"));
            }
            self.pos += 1;
            self.call(&tok)
        } else {
            if tok.is_empty() {
                return Err(self.err("expected expression"));
            }
            Ok(self.graph.add_terminal(tok))
        }
    }

    fn call(&mut self, name: &str) -> Result<NodeId, DfError> {
        let sig = self
            .registry
            .function(name)
            .ok_or_else(|| DfError::UnknownFunction(name.to_string()))?
            .clone();
        let id = self.graph.add(Payload::Function(sig.name.clone()));
        let arity_err = |detail: String| DfError::ArityMismatch {
            function: sig.name.clone(),
            detail,
        };
        let mut positional = 0usize;
        let mut seen_named = false;
        let mut filled: Vec<String> = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b')') {
            self.pos += 1;
            return Ok(id);
        }
        loop {
            self.skip_ws();
            // Named argument?
            let save = self.pos;
            let mut slot: Option<String> = None;
            let (tok, delim) = self.word(b"(),=")?;
            if delim == Some(b'=') && is_slot_name(&tok) {
                self.pos += 1;
                self.skip_ws();
                slot = Some(tok);
            } else {
                self.pos = save;
            }
            let child = self.expr()?;
            match slot {
                Some(s) if s == RESULT_SLOT => {
                    if self.graph.node(id).result.is_some() {
                        return Err(arity_err("result given twice".into()));
                    }
                    self.graph.set_result(id, Some(child));
                }
                Some(s) => {
                    let spec = sig
                        .slot(&s)
                        .ok_or_else(|| arity_err(format!("no slot named `{s}`")))?;
                    if !spec.variadic && filled.contains(&s) {
                        return Err(arity_err(format!("slot `{s}` given twice")));
                    }
                    seen_named = true;
                    filled.push(s.clone());
                    self.graph.push_input(id, &s, child)?;
                }
                None => {
                    if seen_named {
                        return Err(arity_err("positional argument after named".into()));
                    }
                    let spec = match sig.slots.get(positional) {
                        Some(spec) => spec,
                        None => match sig.slots.last() {
                            Some(last) if last.variadic => last,
                            _ => {
                                return Err(arity_err(format!(
                                    "takes {} argument(s)",
                                    sig.slots.len()
                                )))
                            }
                        },
                    };
                    positional += 1;
                    filled.push(spec.name.clone());
                    let slot_name = spec.name.clone();
                    self.graph.push_input(id, &slot_name, child)?;
                }
            }
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b')') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.err("expected `,` or `)`")),
            }
        }
        Ok(id)
    }
}

fn is_slot_name(tok: &str) -> bool {
    tok == RESULT_SLOT
        || (!tok.is_empty()
            && tok
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_'))
}
