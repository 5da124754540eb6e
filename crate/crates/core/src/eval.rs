//! Bottom-up evaluation of typechecked graphs against a domain.

use std::collections::HashMap;
use std::fmt;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime, Weekday};

use crate::error::EvalError;
use crate::graph::{DataflowGraph, NodeId};
use crate::registry::{Registry, TypeName, STR};
use crate::smcal::Predicate;

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Text(String),
    Int(i64),
    Date(NaiveDate),
    Time(NaiveTime),
    DateTime(NaiveDateTime),
    Weekday(Weekday),
    /// Minutes.
    Duration(i64),
    Person(String),
    Location(String),
    /// Index into the knowledge base's event list.
    Event(usize),
    Constraints(Vec<Predicate>),
    Temperature(i64),
    /// Named fields, e.g. a database row.
    Record(Vec<(String, String)>),
    List(Vec<Value>),
    Unit,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) | Value::Person(s) | Value::Location(s) => f.write_str(s),
            Value::Int(n) => write!(f, "{n}"),
            Value::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            Value::Time(t) => write!(f, "{}", t.format("%H:%M")),
            Value::DateTime(t) => write!(f, "{}", t.format("%Y-%m-%d %H:%M")),
            Value::Weekday(w) => f.write_str(weekday_name(*w)),
            Value::Duration(m) => write!(f, "{m} minutes"),
            Value::Event(i) => write!(f, "event #{i}"),
            Value::Constraints(ps) => write!(f, "{} constraint(s)", ps.len()),
            Value::Temperature(t) => write!(f, "{t} degrees"),
            Value::Record(fields) => {
                let parts: Vec<String> = fields.iter().map(|(k, v)| format!("{k}: {v}")).collect();
                f.write_str(&parts.join("; "))
            }
            Value::List(xs) => {
                let parts: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
                write!(f, "[{}]", parts.join(", "))
            }
            Value::Unit => f.write_str("()"),
        }
    }
}

pub fn weekday_name(w: Weekday) -> &'static str {
    match w {
        Weekday::Mon => "Monday",
        Weekday::Tue => "Tuesday",
        Weekday::Wed => "Wednesday",
        Weekday::Thu => "Thursday",
        Weekday::Fri => "Friday",
        Weekday::Sat => "Saturday",
        Weekday::Sun => "Sunday",
    }
}

pub fn parse_weekday(s: &str) -> Option<Weekday> {
    Some(match s {
        "Monday" => Weekday::Mon,
        "Tuesday" => Weekday::Tue,
        "Wednesday" => Weekday::Wed,
        "Thursday" => Weekday::Thu,
        "Friday" => Weekday::Fri,
        "Saturday" => Weekday::Sat,
        "Sunday" => Weekday::Sun,
        _ => return None,
    })
}

/// Evaluated inputs of one function application, in slot order.
#[derive(Debug, Default)]
pub struct Args {
    items: Vec<(String, Value)>,
}

impl Args {
    pub fn get(&self, slot: &str) -> Option<&Value> {
        self.items.iter().find(|(s, _)| s == slot).map(|(_, v)| v)
    }

    pub fn require(&self, slot: &str) -> Result<&Value, String> {
        self.get(slot).ok_or_else(|| format!("missing argument `{slot}`"))
    }

    pub fn all<'a>(&'a self, slot: &'a str) -> impl Iterator<Item = &'a Value> + 'a {
        self.items.iter().filter(move |(s, _)| s == slot).map(|(_, v)| v)
    }

    pub fn first(&self) -> Option<&Value> {
        self.items.first().map(|(_, v)| v)
    }
}

/// What a domain supplies to evaluation: literal interpretation, function
/// semantics, and the value/type membership test used to guard calls.
pub trait Domain {
    fn literal(&self, ty: &TypeName, text: &str) -> Result<Value, String>;
    fn call(&self, function: &str, args: &Args) -> Result<Value, String>;
    fn admits(&self, _ty: &TypeName, _value: &Value) -> bool {
        true
    }
}

/// Evaluates the graph, setting each evaluated function node's result link
/// to a terminal holding the value's text. Returns the root value.
pub fn evaluate(g: &mut DataflowGraph, reg: &Registry, domain: &dyn Domain) -> Result<Value, EvalError> {
    let mut memo = HashMap::new();
    let root = g.root();
    let value = eval_node(g, reg, domain, root, &mut memo)?;
    let mut ids: Vec<NodeId> = memo.keys().copied().collect();
    ids.sort();
    for id in ids {
        if g.node(id).is_terminal() {
            continue;
        }
        let text = memo[&id].to_string();
        let r = g.add_terminal(text);
        g.set_result(id, Some(r));
    }
    Ok(value)
}

/// Evaluates the subgraph under `id` without touching the graph.
pub fn evaluate_node(
    g: &DataflowGraph,
    reg: &Registry,
    domain: &dyn Domain,
    id: NodeId,
) -> Result<Value, EvalError> {
    eval_node(g, reg, domain, id, &mut HashMap::new())
}

fn eval_node(
    g: &DataflowGraph,
    reg: &Registry,
    domain: &dyn Domain,
    id: NodeId,
    memo: &mut HashMap<NodeId, Value>,
) -> Result<Value, EvalError> {
    if let Some(v) = memo.get(&id) {
        return Ok(v.clone());
    }
    let node = g.node(id);
    let fail = |reason: String| EvalError::Failed { node: id, reason };
    let value = match node.function() {
        None => {
            let ty = node.ty.clone().unwrap_or_else(|| TypeName::new(STR));
            domain.literal(&ty, node.terminal().unwrap()).map_err(fail)?
        }
        Some(name) => {
            let sig = reg
                .function(name)
                .ok_or_else(|| fail(format!("unknown function `{name}`")))?;
            let mut args = Args::default();
            let mut inputs: Vec<_> = node.inputs.iter().collect();
            inputs.sort_by_key(|i| sig.slot_index(&i.slot).unwrap_or(usize::MAX));
            for inp in inputs {
                let v = eval_node(g, reg, domain, inp.node, memo)?;
                if let Some(spec) = sig.slot(&inp.slot) {
                    if !domain.admits(&spec.ty, &v) {
                        return Err(EvalError::TypeViolation {
                            function: sig.name.clone(),
                            expected: spec.ty.to_string(),
                        });
                    }
                }
                args.items.push((inp.slot.clone(), v));
            }
            if sig.type_parametric {
                // The argument names a type; pass it through as text.
                let arg = node
                    .inputs
                    .first()
                    .and_then(|i| g.node(i.node).terminal())
                    .unwrap_or_default();
                args.items = vec![("type".into(), Value::Text(arg.to_string()))];
            }
            domain.call(&sig.name, &args).map_err(fail)?
        }
    };
    memo.insert(id, value.clone());
    Ok(value)
}
