//! Dataflow dialogue generation.
//!
//! Typed expression graphs, a restaurant-booking domain driven by an
//! agenda-following user simulator, a calendar domain with compositional
//! request generation, and tooling to deduplicate and mix generated corpora.

pub mod composer;
pub mod corpus;
pub mod equivalent;
pub mod error;
pub mod eval;
pub mod graph;
pub mod mapping;
pub mod mwoz;
pub mod nlg;
pub mod parallel;
pub mod parse;
pub mod registry;
pub mod serialize;
pub mod simulator;
pub mod smcal;
pub mod typecheck;

pub use equivalent::equivalent;
pub use error::{DfError, EvalError, RegistryError};
pub use eval::{evaluate, Domain, Value};
pub use graph::{DataflowGraph, NodeId, Payload};
pub use parse::parse_expression;
pub use registry::{FunctionSignature, Registry, TypeName};
pub use serialize::serialize;
pub use typecheck::typecheck;
