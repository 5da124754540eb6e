//! Template-based surface realization.
//!
//! Each function has a pattern whose `{slot}` placeholders are filled with
//! the renderings of its inputs. `{slot:s}` expands to "s" unless the slot
//! rendered as "1". `{...}` expands the filled non-positional slots through
//! per-slot templates keyed `function.slot`, joined by ", ".
//!
//! Event-describing functions (marked `"event"` in the table) flatten their
//! constraint into a head noun plus modifiers sorted by each constraint's
//! `order`. Consecutive modifiers from a function with `merge` set collapse
//! into one phrase ("with Dan and John").

use std::collections::BTreeMap;

use rand::Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::graph::{DataflowGraph, NodeId};
use crate::registry::{parse_clock, Registry};

pub const TEMPLATES_JSON: &str = include_str!("../data/templates.json");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NlgError {
    #[error("no template for `{0}`")]
    MissingTemplate(String),
    #[error("malformed template table: {0}")]
    Format(String),
    #[error("template `{template}` uses unknown slot `{slot}`")]
    UnknownPlaceholder { template: String, slot: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Article {
    Definite,
    Indefinite,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    pub variants: Vec<String>,
    pub terminal_pattern: Option<String>,
    pub clock_pattern: Option<String>,
    pub order: u32,
    pub head: bool,
    pub merge: Option<String>,
    pub event: Option<Article>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawTemplate {
    One(String),
    Many(Vec<String>),
    Full {
        pattern: Option<String>,
        #[serde(default)]
        variants: Vec<String>,
        terminal_pattern: Option<String>,
        clock_pattern: Option<String>,
        order: Option<u32>,
        #[serde(default)]
        head: bool,
        merge: Option<String>,
        event: Option<Article>,
    },
}

impl From<RawTemplate> for Template {
    fn from(raw: RawTemplate) -> Self {
        let plain = |variants| Template {
            variants,
            terminal_pattern: None,
            clock_pattern: None,
            order: u32::MAX,
            head: false,
            merge: None,
            event: None,
        };
        match raw {
            RawTemplate::One(p) => plain(vec![p]),
            RawTemplate::Many(v) => plain(v),
            RawTemplate::Full {
                pattern,
                mut variants,
                terminal_pattern,
                clock_pattern,
                order,
                head,
                merge,
                event,
            } => {
                if let Some(p) = pattern {
                    variants.insert(0, p);
                }
                Template {
                    variants,
                    terminal_pattern,
                    clock_pattern,
                    order: order.unwrap_or(u32::MAX),
                    head,
                    merge,
                    event,
                }
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Templates {
    table: BTreeMap<String, Template>,
}

impl Templates {
    pub fn from_json(text: &str) -> Result<Self, NlgError> {
        let raw: BTreeMap<String, RawTemplate> =
            serde_json::from_str(text).map_err(|e| NlgError::Format(e.to_string()))?;
        let table: BTreeMap<String, Template> = raw.into_iter().map(|(k, v)| (k, v.into())).collect();
        if let Some((k, _)) = table.iter().find(|(_, t)| t.variants.is_empty()) {
            return Err(NlgError::Format(format!("`{k}` has no pattern")));
        }
        Ok(Templates { table })
    }

    /// The shipped table covering both domains.
    pub fn builtin() -> Self {
        Self::from_json(TEMPLATES_JSON).expect("embedded template table is valid")
    }

    pub fn get(&self, key: &str) -> Option<&Template> {
        self.table.get(key)
    }

    /// Checks every placeholder against the registry's signatures. Keys that
    /// name no registered function (the other domain's entries) are skipped.
    pub fn validate(&self, reg: &Registry) -> Result<(), NlgError> {
        for (key, t) in &self.table {
            let (fname, slot_only) = match key.split_once('.') {
                Some((f, s)) if !f.is_empty() => (f, Some(s)),
                _ => (key.as_str(), None),
            };
            let Some(sig) = reg.function(fname) else { continue };
            let patterns = t.variants.iter().chain(&t.terminal_pattern).chain(&t.clock_pattern);
            for p in patterns {
                for ph in placeholders(p) {
                    let ok = match slot_only {
                        Some(s) => ph == s,
                        None => ph == "..." || sig.slot(&ph).is_some(),
                    };
                    if !ok {
                        return Err(NlgError::UnknownPlaceholder {
                            template: key.clone(),
                            slot: ph,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Keys a registry needs covered for rendering to be total.
    pub fn missing_for(&self, reg: &Registry) -> Vec<String> {
        reg.functions()
            .filter(|f| !self.table.contains_key(&f.name))
            .map(|f| f.name.clone())
            .collect()
    }
}

fn placeholders(pattern: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = pattern;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else { break };
        let inner = &rest[open + 1..open + close];
        out.push(inner.split(':').next().unwrap_or(inner).to_string());
        rest = &rest[open + close + 1..];
    }
    out
}

/// Renders the graph from its root, always choosing each template's first
/// variant.
pub fn render(g: &DataflowGraph, reg: &Registry, templates: &Templates) -> Result<String, NlgError> {
    Renderer { g, reg, templates, rng: None }.node(g.root())
}

/// Like [`render`], but picks template variants with `rng`.
pub fn render_varied(
    g: &DataflowGraph,
    reg: &Registry,
    templates: &Templates,
    rng: &mut dyn rand::RngCore,
) -> Result<String, NlgError> {
    Renderer { g, reg, templates, rng: Some(rng) }.node(g.root())
}

struct Renderer<'a, 'r> {
    g: &'a DataflowGraph,
    reg: &'a Registry,
    templates: &'a Templates,
    rng: Option<&'r mut dyn rand::RngCore>,
}

impl<'a> Renderer<'a, '_> {
    fn template(&self, key: &str) -> Result<&'a Template, NlgError> {
        let templates: &'a Templates = self.templates;
        templates
            .get(key)
            .ok_or_else(|| NlgError::MissingTemplate(key.to_string()))
    }

    fn pick<'t>(&mut self, t: &'t Template) -> &'t str {
        let i = match self.rng.as_deref_mut() {
            Some(rng) if t.variants.len() > 1 => rng.gen_range(0..t.variants.len()),
            _ => 0,
        };
        &t.variants[i]
    }

    fn node(&mut self, id: NodeId) -> Result<String, NlgError> {
        let node = self.g.node(id);
        let Some(name) = node.function() else {
            return Ok(node.terminal().unwrap_or_default().to_string());
        };
        let sig = self.reg.function(name);
        let name = sig.map(|s| s.name.as_str()).unwrap_or(name);

        if sig.is_some_and(|s| s.type_parametric) {
            let arg = node
                .inputs
                .first()
                .and_then(|i| self.g.node(i.node).terminal())
                .unwrap_or_default()
                .to_string();
            let keyed = format!("{name}.{arg}");
            let templates: &'a Templates = self.templates;
            let t = match templates.get(&keyed) {
                Some(t) => t,
                None => self.template(name)?,
            };
            let pattern = self.pick(t).to_string();
            let slot = sig.and_then(|s| s.slots.first()).map(|s| s.name.clone()).unwrap_or_default();
            return Ok(fill(&pattern, &[(slot, arg)], ""));
        }

        let t = self.template(name)?;
        if let Some(article) = t.event {
            let pattern = self.pick(t).to_string();
            let slot = sig.and_then(|s| s.slots.first()).map(|s| s.name.clone()).unwrap_or_default();
            let desc = match node.input(&slot) {
                Some(c) => self.event_description(c, article)?,
                None => article_for("event", article),
            };
            return Ok(fill(&pattern, &[(slot, desc)], ""));
        }

        let all_terminal = !node.inputs.is_empty() && node.inputs.iter().all(|i| self.g.node(i.node).is_terminal());
        let clock = all_terminal
            && node
                .inputs
                .iter()
                .all(|i| self.g.node(i.node).terminal().and_then(parse_clock).is_some());
        let pattern = match (&t.clock_pattern, &t.terminal_pattern) {
            (Some(p), _) if clock => p.clone(),
            (_, Some(p)) if all_terminal => p.clone(),
            _ => self.pick(t).to_string(),
        };

        let mut values: Vec<(String, String)> = Vec::new();
        let positional = sig.map(|s| s.positional).unwrap_or(0);
        let mut rest: Vec<String> = Vec::new();
        let mut inputs: Vec<_> = node.inputs.iter().collect();
        if let Some(s) = sig {
            inputs.sort_by_key(|i| s.slot_index(&i.slot).unwrap_or(usize::MAX));
        }
        for inp in inputs {
            let text = self.node(inp.node)?;
            if let Some((_, v)) = values.iter_mut().find(|(s, _)| *s == inp.slot) {
                v.push_str(" and ");
                v.push_str(&text);
            } else {
                values.push((inp.slot.clone(), text.clone()));
            }
            let idx = sig.and_then(|s| s.slot_index(&inp.slot)).unwrap_or(usize::MAX);
            if idx >= positional && pattern.contains("{...}") {
                let key = format!("{name}.{}", inp.slot);
                let st = self.template(&key)?;
                let sp = self.pick(st).to_string();
                rest.push(fill(&sp, &[(inp.slot.clone(), text)], ""));
            }
        }
        Ok(fill(&pattern, &values, &rest.join(", ")))
    }

    fn flatten(&self, id: NodeId, out: &mut Vec<NodeId>) {
        let node = self.g.node(id);
        let is_conj = node
            .function()
            .and_then(|f| self.reg.function(f))
            .is_some_and(|s| s.commutative);
        if is_conj {
            for c in self.g.children(id) {
                self.flatten(c, out);
            }
        } else {
            out.push(id);
        }
    }

    fn event_description(&mut self, constraint: NodeId, article: Article) -> Result<String, NlgError> {
        let mut parts = Vec::new();
        self.flatten(constraint, &mut parts);
        let mut head: Option<String> = None;
        // (order, function, slot text) for each modifier.
        let mut mods: Vec<(u32, String, String)> = Vec::new();
        for id in parts {
            let node = self.g.node(id);
            let Some(name) = node.function() else {
                mods.push((u32::MAX, String::new(), node.terminal().unwrap_or_default().to_string()));
                continue;
            };
            let name = self.reg.canonical_name(name).to_string();
            let t = self.template(&name)?.clone();
            if t.head && head.is_none() {
                if let Some(c) = node.inputs.first() {
                    head = Some(self.node(c.node)?);
                    continue;
                }
            }
            mods.push((t.order, name, String::new()));
            let last = mods.len() - 1;
            mods[last].2 = match &t.merge {
                Some(_) => node
                    .inputs
                    .first()
                    .map(|c| self.node(c.node))
                    .transpose()?
                    .unwrap_or_default(),
                None => self.node(id)?,
            };
        }
        mods.sort_by_key(|m| m.0);

        let mut phrases: Vec<String> = Vec::new();
        let mut i = 0;
        while i < mods.len() {
            let (_, name, text) = &mods[i];
            let t = self.templates.get(name);
            match t.and_then(|t| t.merge.clone().map(|m| (t, m))) {
                Some((t, sep)) => {
                    let mut j = i;
                    let mut items = Vec::new();
                    while j < mods.len() && mods[j].1 == *name {
                        items.push(mods[j].2.clone());
                        j += 1;
                    }
                    let slot = self
                        .reg
                        .function(name)
                        .and_then(|s| s.slots.first())
                        .map(|s| s.name.clone())
                        .unwrap_or_default();
                    let pattern = t.variants[0].clone();
                    phrases.push(fill(&pattern, &[(slot, items.join(&sep))], ""));
                    i = j;
                }
                None => {
                    phrases.push(text.clone());
                    i += 1;
                }
            }
        }
        let mut out = article_for(head.as_deref().unwrap_or("event"), article);
        for p in phrases.iter().filter(|p| !p.is_empty()) {
            out.push(' ');
            out.push_str(p);
        }
        Ok(out)
    }
}

fn article_for(noun: &str, article: Article) -> String {
    match article {
        Article::Definite => format!("the {noun}"),
        Article::Indefinite => {
            let vowel = noun.chars().next().is_some_and(|c| "aeiouAEIOU".contains(c));
            format!("{} {noun}", if vowel { "an" } else { "a" })
        }
    }
}

fn fill(pattern: &str, values: &[(String, String)], rest: &str) -> String {
    let mut out = String::with_capacity(pattern.len() + 16);
    let mut chars = pattern.char_indices().peekable();
    while let Some((i, ch)) = chars.next() {
        if ch != '{' {
            out.push(ch);
            continue;
        }
        let Some(close) = pattern[i..].find('}') else {
            out.push(ch);
            continue;
        };
        let inner = &pattern[i + 1..i + close];
        let (slot, plural) = match inner.split_once(':') {
            Some((s, "s")) => (s, true),
            _ => (inner, false),
        };
        let value = if slot == "..." {
            rest
        } else {
            values.iter().find(|(s, _)| s == slot).map(|(_, v)| v.as_str()).unwrap_or("")
        };
        if plural {
            if value != "1" {
                out.push('s');
            }
        } else {
            out.push_str(value);
        }
        while chars.peek().is_some_and(|(j, _)| *j < i + close + 1) {
            chars.next();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expression;
    use crate::smcal;

    fn say(text: &str) -> String {
        let reg = smcal::registry();
        let g = parse_expression(text, &reg).unwrap();
        render(&g, &reg, &Templates::builtin()).unwrap()
    }

    #[test]
    fn today() {
        assert_eq!(say("CreateEvent( starts_at( Today( ) ) )"), "create an event today");
    }

    #[test]
    fn plural_and_terminal_patterns() {
        assert_eq!(
            say("CreateEvent( has_duration( toMinutes( 1 ) ) )"),
            "create an event lasting 1 minute"
        );
        assert_eq!(
            say("CreateEvent( AND( starts_at( Friday ) , has_subject( lunch ) ) )"),
            "create a lunch on Friday"
        );
        assert_eq!(say("CreateEvent( starts_at( 09:30 ) )"), "create an event at 09:30");
        assert_eq!(say("CreateEvent( starts_at( NextDOW( Monday ) ) )"), "create an event next Monday");
    }

    #[test]
    fn attendees_merge() {
        assert_eq!(
            say("CreateEvent( AND( with_attendee( Dan ) , with_attendee( John ) ) )"),
            "create an event with Dan and John"
        );
    }

    #[test]
    fn fill_handles_plural_and_rest() {
        let v = vec![("n".to_string(), "2".to_string())];
        assert_eq!(fill("{n} day{n:s} {...}", &v, "x"), "2 days x");
    }

    #[test]
    fn builtin_table_validates_against_calendar_registry() {
        let reg = smcal::registry();
        let t = Templates::builtin();
        t.validate(&reg).unwrap();
        assert!(t.missing_for(&reg).is_empty());
    }

    #[test]
    fn bad_placeholder_is_reported() {
        let reg = smcal::registry();
        let t = Templates::from_json(r#"{"toMinutes": "{minutes} min"}"#).unwrap();
        assert!(matches!(t.validate(&reg), Err(NlgError::UnknownPlaceholder { .. })));
    }

    #[test]
    fn missing_template() {
        let reg = smcal::registry();
        let g = parse_expression("Today( )", &reg).unwrap();
        let t = Templates::from_json("{}").unwrap();
        assert_eq!(render(&g, &reg, &t), Err(NlgError::MissingTemplate("Today".into())));
    }
}
