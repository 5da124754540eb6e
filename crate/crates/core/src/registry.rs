//! Function and type registry.
//!
//! A registry is loaded from a declarative JSON document with a `types`
//! array and a `functions` array, one object per function:
//!
//! ```json
//! {
//!   "types": [ {"name": "BookDay", "super": "DayOfWeek", "literal": "weekday"} ],
//!   "functions": [
//!     {"name": "FindManager", "returns": "Person",
//!      "slots": [{"name": "recipient", "type": "Person"}]}
//!   ],
//!   "aliases": {"GetManager": "FindManager"}
//! }
//! ```
//!
//! Slot objects accept `required` (default `false`) and `variadic` (default
//! `false`). Function objects accept `commutative`, `type_parametric`,
//! `kb` (depends on external knowledge) and `positional` (how many leading
//! slots are printed without `slot=`; defaults to 1 for single-slot
//! functions and 0 otherwise). Accessors are functions whose name starts
//! with `:`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Deserialize;

use crate::error::RegistryError;

/// Name of a semantic type.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct TypeName(String);

impl TypeName {
    pub fn new(name: impl Into<String>) -> Self {
        TypeName(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TypeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TypeName {
    fn from(s: &str) -> Self {
        TypeName(s.to_string())
    }
}

/// The type every free-standing terminal defaults to.
pub const STR: &str = "Str";

/// Which bare tokens may appear as terminal values of a type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LiteralKind {
    /// Any text.
    #[default]
    Text,
    /// A (possibly negative) decimal integer.
    Int,
    /// `HH:MM`, 24-hour clock.
    Time,
    /// A capitalized weekday name.
    Weekday,
    /// Either of the two above.
    WeekdayOrTime,
    /// Only constructible through a function call.
    None,
}

pub const WEEKDAYS: [&str; 7] = [
    "Monday",
    "Tuesday",
    "Wednesday",
    "Thursday",
    "Friday",
    "Saturday",
    "Sunday",
];

impl LiteralKind {
    pub fn accepts(self, text: &str) -> bool {
        match self {
            LiteralKind::Text => !text.is_empty(),
            LiteralKind::Int => text.parse::<i64>().is_ok(),
            LiteralKind::Time => parse_clock(text).is_some(),
            LiteralKind::Weekday => WEEKDAYS.contains(&text),
            LiteralKind::WeekdayOrTime => WEEKDAYS.contains(&text) || parse_clock(text).is_some(),
            LiteralKind::None => false,
        }
    }
}

/// Parses `HH:MM` into (hour, minute).
pub fn parse_clock(text: &str) -> Option<(u32, u32)> {
    let (h, m) = text.split_once(':')?;
    if h.is_empty() || h.len() > 2 || m.len() != 2 {
        return None;
    }
    let h: u32 = h.parse().ok()?;
    let m: u32 = m.parse().ok()?;
    (h < 24 && m < 60).then_some((h, m))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypeDecl {
    pub name: TypeName,
    pub supertype: Option<TypeName>,
    pub literal: LiteralKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotSpec {
    pub name: String,
    pub ty: TypeName,
    pub required: bool,
    pub variadic: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionSignature {
    pub name: String,
    pub slots: Vec<SlotSpec>,
    pub return_type: TypeName,
    pub commutative: bool,
    pub accessor: bool,
    /// Return type is named by the (single) terminal argument.
    pub type_parametric: bool,
    /// Evaluation needs the external knowledge base / database.
    pub kb: bool,
    pub positional: usize,
}

impl FunctionSignature {
    pub fn slot(&self, name: &str) -> Option<&SlotSpec> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }
}

#[derive(Deserialize)]
struct RegistryFile {
    #[serde(default)]
    types: Vec<TypeEntry>,
    #[serde(default)]
    functions: Vec<FunctionEntry>,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct TypeEntry {
    name: String,
    #[serde(default, rename = "super")]
    supertype: Option<String>,
    #[serde(default)]
    literal: LiteralKind,
}

#[derive(Deserialize)]
struct FunctionEntry {
    name: String,
    returns: String,
    #[serde(default)]
    slots: Vec<SlotEntry>,
    #[serde(default)]
    commutative: bool,
    #[serde(default)]
    type_parametric: bool,
    #[serde(default)]
    kb: bool,
    #[serde(default)]
    positional: Option<usize>,
}

#[derive(Deserialize)]
struct SlotEntry {
    name: String,
    #[serde(rename = "type")]
    ty: String,
    #[serde(default)]
    required: bool,
    #[serde(default)]
    variadic: bool,
}

/// Immutable after construction; share it freely across threads.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    types: BTreeMap<TypeName, TypeDecl>,
    functions: BTreeMap<String, FunctionSignature>,
    aliases: BTreeMap<String, String>,
}

impl Registry {
    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let file: RegistryFile =
            serde_json::from_str(text).map_err(|e| RegistryError::Format(e.to_string()))?;
        let mut reg = Registry::default();
        reg.add_type(TypeDecl {
            name: TypeName::new(STR),
            supertype: None,
            literal: LiteralKind::Text,
        })?;
        for t in file.types {
            reg.add_type(TypeDecl {
                name: TypeName::new(t.name),
                supertype: t.supertype.map(TypeName::new),
                literal: t.literal,
            })?;
        }
        for f in file.functions {
            let positional = f
                .positional
                .unwrap_or(if f.slots.len() == 1 { 1 } else { 0 });
            let sig = FunctionSignature {
                accessor: f.name.starts_with(':'),
                name: f.name,
                slots: f
                    .slots
                    .into_iter()
                    .map(|s| SlotSpec {
                        name: s.name,
                        ty: TypeName::new(s.ty),
                        required: s.required,
                        variadic: s.variadic,
                    })
                    .collect(),
                return_type: TypeName::new(f.returns),
                commutative: f.commutative,
                type_parametric: f.type_parametric,
                kb: f.kb,
                positional,
            };
            reg.add_function(sig)?;
        }
        for (alias, target) in file.aliases {
            if !reg.functions.contains_key(&target) {
                return Err(RegistryError::UnknownName(target));
            }
            reg.aliases.insert(alias, target);
        }
        reg.validate()?;
        Ok(reg)
    }

    fn add_type(&mut self, decl: TypeDecl) -> Result<(), RegistryError> {
        if decl.name.as_str() == STR && self.types.contains_key(&decl.name) {
            // Str is implicit; an explicit redeclaration only adjusts nothing.
            return Ok(());
        }
        if self.types.contains_key(&decl.name) {
            return Err(RegistryError::Duplicate(decl.name.to_string()));
        }
        self.types.insert(decl.name.clone(), decl);
        Ok(())
    }

    fn add_function(&mut self, sig: FunctionSignature) -> Result<(), RegistryError> {
        if self.functions.contains_key(&sig.name) {
            return Err(RegistryError::Duplicate(sig.name));
        }
        let mut seen = BTreeSet::new();
        for s in &sig.slots {
            if !seen.insert(s.name.as_str()) {
                return Err(RegistryError::Invalid(format!(
                    "slot `{}` repeated in `{}`",
                    s.name, sig.name
                )));
            }
        }
        if sig.accessor && sig.slots.len() != 1 {
            return Err(RegistryError::Invalid(format!(
                "accessor `{}` must have exactly one slot",
                sig.name
            )));
        }
        if sig.slots.iter().rev().skip(1).any(|s| s.variadic) {
            return Err(RegistryError::Invalid(format!(
                "only the last slot of `{}` may be variadic",
                sig.name
            )));
        }
        self.functions.insert(sig.name.clone(), sig);
        Ok(())
    }

    fn validate(&self) -> Result<(), RegistryError> {
        for decl in self.types.values() {
            if let Some(sup) = &decl.supertype {
                if !self.types.contains_key(sup) {
                    return Err(RegistryError::UnknownName(sup.to_string()));
                }
            }
            // Walk the chain; revisiting the start means a cycle.
            let mut seen = BTreeSet::new();
            let mut cur = Some(&decl.name);
            while let Some(t) = cur {
                if !seen.insert(t) {
                    return Err(RegistryError::Invalid(format!(
                        "subtype cycle through `{}`",
                        decl.name
                    )));
                }
                cur = self.types.get(t).and_then(|d| d.supertype.as_ref());
            }
        }
        for sig in self.functions.values() {
            for s in &sig.slots {
                if !self.types.contains_key(&s.ty) {
                    return Err(RegistryError::UnknownName(s.ty.to_string()));
                }
            }
            if !sig.type_parametric && !self.types.contains_key(&sig.return_type) {
                return Err(RegistryError::UnknownName(sig.return_type.to_string()));
            }
        }
        Ok(())
    }

    /// Looks a function up by name or alias.
    pub fn function(&self, name: &str) -> Option<&FunctionSignature> {
        self.functions
            .get(name)
            .or_else(|| self.aliases.get(name).and_then(|n| self.functions.get(n)))
    }

    pub fn canonical_name<'a>(&'a self, name: &'a str) -> &'a str {
        self.aliases.get(name).map(String::as_str).unwrap_or(name)
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunctionSignature> {
        self.functions.values()
    }

    pub fn type_decl(&self, name: &TypeName) -> Option<&TypeDecl> {
        self.types.get(name)
    }

    pub fn has_type(&self, name: &str) -> bool {
        self.types.contains_key(&TypeName::new(name))
    }

    pub fn types(&self) -> impl Iterator<Item = &TypeDecl> {
        self.types.values()
    }

    /// `sub <: sup`, reflexive.
    pub fn is_subtype(&self, sub: &TypeName, sup: &TypeName) -> bool {
        let mut cur = Some(sub);
        while let Some(t) = cur {
            if t == sup {
                return true;
            }
            cur = self.types.get(t).and_then(|d| d.supertype.as_ref());
        }
        false
    }

    pub fn literal_kind(&self, ty: &TypeName) -> LiteralKind {
        self.types
            .get(ty)
            .map(|d| d.literal)
            .unwrap_or(LiteralKind::None)
    }
}
