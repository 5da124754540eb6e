//! Agenda-free request generation for the calendar domain.
//!
//! A first user turn starts as a `CreateEvent` over a random subset of event
//! constraints with plain literal values. Terminals are then replaced, one per
//! iteration, by function calls returning a compatible value: a person becomes
//! `FindManager( John )`, a location becomes the location of some event, and so
//! on. The replacement chains nest, so later iterations may rewrite terminals
//! that an earlier replacement introduced.
//!
//! Terminals underneath a knowledge-base lookup are only replaced by calls that
//! evaluate to the same value, so the lookup keeps its meaning. Terminals at the
//! top level of the request carry no such requirement.

use std::collections::HashMap;

use chrono::{Datelike, Days, NaiveDate, NaiveTime, Timelike, Weekday};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{evaluate_node, parse_weekday, weekday_name, Domain, Value};
use crate::graph::{DataflowGraph, NodeId};
use crate::nlg::{render_varied, NlgError, Templates};
use crate::registry::{LiteralKind, Registry, TypeName, WEEKDAYS};
use crate::serialize::serialize;
use crate::smcal::{find_events, on_or_after, strictly_after, CalendarDomain, KnowledgeBase, Predicate, MINUTES_PER};
use crate::typecheck::typecheck;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComposeError {
    #[error("`{function}` cannot produce the required value {value}")]
    NoSolution { function: String, value: String },
    #[error("node is not a replaceable terminal")]
    NotReplaceable,
    #[error("rendering failed: {0}")]
    Render(#[from] NlgError),
    #[error("generated graph is invalid: {0}")]
    Invalid(String),
}

/// How a rule builds its replacement subgraph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleKind {
    /// `FindManager( p )`
    Manager,
    /// `singleton( FindFriends( p ) )`
    OnlyFriend,
    /// `:recipient( :attendees( FindEvents( C ) ) )`
    SoleAttendee,
    /// `:location( FindEvents( C ) )`
    EventLocation,
    Today,
    Yesterday,
    NextWeekend,
    /// `NextDOW( W )`
    NextDow,
    /// `AddDays( W , k )`
    PlusDays,
    /// `:dow( :start( FindEvents( C ) ) )`
    EventWeekday,
    /// `NumberAM( :time( :start( FindEvents( C ) ) ) )`
    EventStartAm,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplacementRule {
    /// Outermost function of the replacement.
    pub function: &'static str,
    pub produces: TypeName,
    pub kind: RuleKind,
}

/// The default rule set. Each rule's `produces` matches the registry return
/// type of its `function`.
pub fn default_rules() -> Vec<ReplacementRule> {
    let r = |function, produces: &str, kind| ReplacementRule {
        function,
        produces: TypeName::new(produces),
        kind,
    };
    vec![
        r("FindManager", "Person", RuleKind::Manager),
        r("singleton", "Person", RuleKind::OnlyFriend),
        r(":recipient", "Person", RuleKind::SoleAttendee),
        r(":location", "Location", RuleKind::EventLocation),
        r("Today", "Date", RuleKind::Today),
        r("Yesterday", "Date", RuleKind::Yesterday),
        r("NextWeekend", "Date", RuleKind::NextWeekend),
        r("NextDOW", "Date", RuleKind::NextDow),
        r("AddDays", "Date", RuleKind::PlusDays),
        r(":dow", "DayOfWeek", RuleKind::EventWeekday),
        r("NumberAM", "Time", RuleKind::EventStartAm),
    ]
}

/// Where a terminal sits: its (literal-narrowed) type, slot, parent function
/// and whether it is part of an event search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Site {
    pub ty: TypeName,
    pub slot: String,
    pub host: String,
    pub within_query: bool,
}

/// Law for the initial `CreateEvent` constraint subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlotSubsetLaw {
    /// Each constraint kind is included independently with this probability;
    /// empty draws are redrawn.
    pub p_include: f64,
    pub max_attendees: usize,
}

impl Default for SlotSubsetLaw {
    fn default() -> Self {
        SlotSubsetLaw {
            p_include: 0.4,
            max_attendees: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompositionConfig {
    pub max_depth: usize,
    pub p_replace: f64,
    pub slot_law: SlotSubsetLaw,
}

impl Default for CompositionConfig {
    fn default() -> Self {
        CompositionConfig {
            max_depth: 3,
            p_replace: 0.8,
            slot_law: SlotSubsetLaw::default(),
        }
    }
}

/// A generated first turn.
#[derive(Clone, Debug)]
pub struct FirstTurn {
    pub expr: String,
    pub nl: String,
    pub graph: DataflowGraph,
    /// Longest chain of nested replacements on any root-to-leaf path.
    pub depth: usize,
    pub replacements: Vec<RuleKind>,
}

/// Identifying constraint sets for every event that has one.
#[derive(Clone, Debug)]
pub struct KbIndex {
    keys: Vec<Vec<Vec<Predicate>>>,
}

impl KbIndex {
    /// Minimal predicate sets (at most three) that pick out exactly one event.
    /// Start dates are only usable within the week after `epoch`, where a
    /// weekday literal names them.
    pub fn build(kb: &KnowledgeBase, epoch: NaiveDate) -> Self {
        let keys = (0..kb.events.len())
            .map(|i| {
                let preds = usable_predicates(kb, i, epoch);
                let n = preds.len();
                let mut out = Vec::new();
                for mask in 1u32..(1 << n) {
                    if mask.count_ones() > 3 {
                        continue;
                    }
                    let set: Vec<Predicate> = (0..n).filter(|b| mask & (1 << b) != 0).map(|b| preds[b].clone()).collect();
                    let identifies = |s: &[Predicate]| find_events(kb, s) == [i];
                    let minimal = set.len() == 1
                        || (0..set.len()).all(|skip| {
                            let fewer: Vec<_> = set.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, p)| p.clone()).collect();
                            !identifies(&fewer)
                        });
                    if minimal && identifies(&set) {
                        out.push(set);
                    }
                }
                out
            })
            .collect();
        KbIndex { keys }
    }

    pub fn keys(&self, event: usize) -> &[Vec<Predicate>] {
        &self.keys[event]
    }

    pub fn identifiable(&self, event: usize) -> bool {
        !self.keys[event].is_empty()
    }
}

fn usable_predicates(kb: &KnowledgeBase, i: usize, epoch: NaiveDate) -> Vec<Predicate> {
    let e = &kb.events[i];
    let mut out = vec![
        Predicate::Subject(e.subject.clone()),
        Predicate::Duration(e.duration_minutes),
        Predicate::StartTime(e.start.time()),
        Predicate::Location(e.location.clone()),
    ];
    let date = e.start.date();
    if date >= epoch && on_or_after(epoch, date.weekday()) == date {
        out.push(Predicate::StartDate(date));
    }
    out.extend(e.attendees.iter().map(|a| Predicate::Attendee(a.clone())));
    out
}

/// Duration in minutes as a constructor call with the coarsest exact unit.
fn duration_parts(minutes: i64) -> (&'static str, i64) {
    MINUTES_PER
        .iter()
        .rev()
        .find(|(_, per)| minutes % per == 0)
        .map(|(f, per)| (*f, minutes / per))
        .unwrap_or(("toMinutes", minutes))
}

fn clock(t: NaiveTime) -> String {
    t.format("%H:%M").to_string()
}

fn add_predicate(g: &mut DataflowGraph, p: &Predicate) -> NodeId {
    match p {
        Predicate::Subject(s) => {
            let t = g.add_terminal(s.clone());
            g.add_function("has_subject", &[("subject", t)])
        }
        Predicate::Duration(m) => {
            let (unit, n) = duration_parts(*m);
            let t = g.add_terminal(n.to_string());
            let d = g.add_function(unit, &[("n", t)]);
            g.add_function("has_duration", &[("duration", d)])
        }
        Predicate::StartDate(d) => {
            let t = g.add_terminal(weekday_name(d.weekday()));
            g.add_function("starts_at", &[("time", t)])
        }
        Predicate::StartTime(c) => {
            let t = g.add_terminal(clock(*c));
            g.add_function("starts_at", &[("time", t)])
        }
        Predicate::Location(l) => {
            let t = g.add_terminal(l.clone());
            g.add_function("at_location", &[("location", t)])
        }
        Predicate::Attendee(a) => {
            let t = g.add_terminal(a.clone());
            g.add_function("with_attendee", &[("person", t)])
        }
    }
}

fn add_constraint(g: &mut DataflowGraph, preds: &[Predicate]) -> NodeId {
    let parts: Vec<NodeId> = preds.iter().map(|p| add_predicate(g, p)).collect();
    if parts.len() == 1 {
        return parts[0];
    }
    let args: Vec<(&str, NodeId)> = parts.iter().map(|&p| ("arg", p)).collect();
    g.add_function("AND", &args)
}

/// Registry, knowledge base, epoch and rules, bundled for generation.
#[derive(Clone, Debug)]
pub struct Composer {
    pub registry: Registry,
    pub kb: KnowledgeBase,
    pub epoch: NaiveDate,
    pub templates: Templates,
    rules: Vec<ReplacementRule>,
    index: KbIndex,
}

impl Composer {
    pub fn new(registry: Registry, kb: KnowledgeBase, epoch: NaiveDate, templates: Templates) -> Self {
        let index = KbIndex::build(&kb, epoch);
        Composer {
            registry,
            kb,
            epoch,
            templates,
            rules: default_rules(),
            index,
        }
    }

    pub fn fixture() -> Self {
        Composer::new(
            crate::smcal::registry(),
            KnowledgeBase::fixture(),
            crate::smcal::default_epoch(),
            Templates::builtin(),
        )
    }

    pub fn rules(&self) -> &[ReplacementRule] {
        &self.rules
    }

    pub fn index(&self) -> &KbIndex {
        &self.index
    }

    pub fn domain(&self) -> CalendarDomain<'_> {
        CalendarDomain::new(&self.kb, self.epoch)
    }

    /// Rules returning a subtype of the site's type that can be used there,
    /// and that can hit `required` when it is given.
    pub fn candidate_functions(&self, site: &Site, required: Option<&Value>) -> Vec<&ReplacementRule> {
        self.rules
            .iter()
            .filter(|r| self.registry.is_subtype(&r.produces, &site.ty))
            .filter(|r| self.admissible(r.kind, site, required))
            .collect()
    }

    fn admissible(&self, kind: RuleKind, site: &Site, required: Option<&Value>) -> bool {
        match kind {
            // Creating an event in the past makes no sense; searching does.
            RuleKind::Yesterday if !site.within_query => false,
            _ => !self.solutions(kind, required).is_empty(),
        }
    }

    fn events_where(&self, keep: impl Fn(usize) -> bool) -> Vec<Solution> {
        (0..self.kb.events.len())
            .filter(|&i| self.index.identifiable(i) && keep(i))
            .map(Solution::Event)
            .collect()
    }

    /// Every argument choice that makes the rule usable (and, when given,
    /// evaluate to `required`). Brute force over the knowledge base.
    fn solutions(&self, kind: RuleKind, required: Option<&Value>) -> Vec<Solution> {
        let kb = &self.kb;
        let events = &kb.events;
        let date_is = |d: NaiveDate| match required {
            None => true,
            Some(Value::Date(r)) => *r == d,
            Some(_) => false,
        };
        match kind {
            RuleKind::Manager => match required {
                None => kb.persons.iter().filter(|p| kb.manager(p).is_some()).map(|p| Solution::Person(p.clone())).collect(),
                Some(Value::Person(v)) => kb.reports(v).into_iter().map(|p| Solution::Person(p.to_string())).collect(),
                Some(_) => vec![],
            },
            RuleKind::OnlyFriend => kb
                .persons
                .iter()
                .filter(|p| match (kb.friends(p), required) {
                    ([_], None) => true,
                    ([f], Some(Value::Person(v))) => f == v,
                    _ => false,
                })
                .map(|p| Solution::Person(p.clone()))
                .collect(),
            RuleKind::SoleAttendee => self.events_where(|i| match (&events[i].attendees[..], required) {
                ([_], None) => true,
                ([a], Some(Value::Person(v))) => a == v,
                _ => false,
            }),
            RuleKind::EventLocation => self.events_where(|i| match required {
                None => true,
                Some(Value::Location(v)) => events[i].location == *v,
                Some(_) => false,
            }),
            RuleKind::Today => {
                if date_is(self.epoch) {
                    vec![Solution::Unit]
                } else {
                    vec![]
                }
            }
            RuleKind::Yesterday => {
                if date_is(self.epoch - Days::new(1)) {
                    vec![Solution::Unit]
                } else {
                    vec![]
                }
            }
            RuleKind::NextWeekend => {
                if date_is(strictly_after(self.epoch, Weekday::Sat)) {
                    vec![Solution::Unit]
                } else {
                    vec![]
                }
            }
            RuleKind::NextDow => all_weekdays()
                .filter(|w| date_is(strictly_after(self.epoch, *w)))
                .map(Solution::Weekday)
                .collect(),
            RuleKind::PlusDays => {
                let mut out = Vec::new();
                for w in all_weekdays() {
                    for k in 1..=6 {
                        if date_is(on_or_after(self.epoch, w) + Days::new(k)) {
                            out.push(Solution::Shift(w, k as i64));
                        }
                    }
                }
                out
            }
            RuleKind::EventWeekday => self.events_where(|i| match required {
                None => true,
                Some(Value::Weekday(w)) => events[i].start.weekday() == *w,
                Some(_) => false,
            }),
            RuleKind::EventStartAm => self.events_where(|i| {
                let t = events[i].start.time();
                let am = NaiveTime::from_hms_opt(t.hour() % 12, t.minute(), 0).unwrap();
                match required {
                    None => true,
                    Some(Value::Time(v)) => am == *v,
                    Some(_) => false,
                }
            }),
        }
    }

    /// The site of terminal `id`, or `None` when it is not a literal argument
    /// of a function (or its type has no literal form).
    pub fn site_of(&self, g: &DataflowGraph, id: NodeId, parents: &HashMap<NodeId, NodeId>) -> Option<Site> {
        let text = g.node(id).terminal()?;
        let parent = *parents.get(&id)?;
        let host = g.node(parent).function()?;
        let slot = g.node(parent).inputs.iter().find(|i| i.node == id)?.slot.clone();
        let sig = self.registry.function(host)?;
        let declared = &sig.slot(&slot)?.ty;
        let ty = match self.registry.literal_kind(declared) {
            LiteralKind::WeekdayOrTime if parse_weekday(text).is_some() => TypeName::new("Date"),
            LiteralKind::WeekdayOrTime => TypeName::new("Time"),
            LiteralKind::None => return None,
            _ => declared.clone(),
        };
        let mut within_query = false;
        let mut at = parent;
        loop {
            within_query |= g.node(at).function() == Some("FindEvents");
            match parents.get(&at) {
                Some(&p) => at = p,
                None => break,
            }
        }
        Some(Site {
            ty,
            slot,
            host: host.to_string(),
            within_query,
        })
    }

    /// Value a replacement at `id` must reproduce: the terminal's own value
    /// when it feeds a knowledge-base lookup, otherwise nothing.
    fn requirement(&self, g: &DataflowGraph, id: NodeId, site: &Site, parents: &HashMap<NodeId, NodeId>) -> Option<Value> {
        let mut at = id;
        let mut bound = false;
        while let Some(&p) = parents.get(&at) {
            if g.node(p).function().and_then(|f| self.registry.function(f)).is_some_and(|s| s.kb) {
                bound = true;
                break;
            }
            at = p;
        }
        if !bound {
            return None;
        }
        self.domain().literal(&site.ty, g.node(id).terminal()?).ok()
    }

    /// Replaces terminal `terminal` with a subgraph built by `rule`. When
    /// `required` is set the subgraph evaluates to it.
    pub fn replace_value<R: Rng + ?Sized>(
        &self,
        g: &DataflowGraph,
        terminal: NodeId,
        rule: &ReplacementRule,
        rng: &mut R,
        required: Option<&Value>,
    ) -> Result<DataflowGraph, ComposeError> {
        let parents = g.parents();
        let parent = *parents.get(&terminal).ok_or(ComposeError::NotReplaceable)?;
        if !g.node(terminal).is_terminal() {
            return Err(ComposeError::NotReplaceable);
        }
        let sols = self.solutions(rule.kind, required);
        let no_solution = || ComposeError::NoSolution {
            function: rule.function.to_string(),
            value: required.map(|v| v.to_string()).unwrap_or_default(),
        };
        let sol = sols.choose(rng).ok_or_else(no_solution)?;
        let mut out = g.clone();
        let new = self.build(&mut out, rule.kind, sol, rng);
        out.replace_child(parent, terminal, new).map_err(|e| ComposeError::Invalid(e.to_string()))?;
        typecheck(&mut out, &self.registry).map_err(|e| ComposeError::Invalid(e.to_string()))?;
        Ok(out)
    }

    fn find_event<R: Rng + ?Sized>(&self, g: &mut DataflowGraph, event: usize, rng: &mut R) -> NodeId {
        let key = self.index.keys(event).choose(rng).expect("only identifiable events are chosen");
        let c = add_constraint(g, key);
        g.add_function("FindEvents", &[("constraint", c)])
    }

    fn build<R: Rng + ?Sized>(&self, g: &mut DataflowGraph, kind: RuleKind, sol: &Solution, rng: &mut R) -> NodeId {
        let event = |s: &Solution| match s {
            Solution::Event(i) => *i,
            _ => unreachable!("event rule with non-event solution"),
        };
        match kind {
            RuleKind::Manager | RuleKind::OnlyFriend => {
                let Solution::Person(p) = sol else { unreachable!() };
                let t = g.add_terminal(p.clone());
                if kind == RuleKind::Manager {
                    g.add_function("FindManager", &[("recipient", t)])
                } else {
                    let f = g.add_function("FindFriends", &[("recipient", t)]);
                    g.add_function("singleton", &[("set", f)])
                }
            }
            RuleKind::SoleAttendee => {
                let f = self.find_event(g, event(sol), rng);
                let a = g.add_function(":attendees", &[("obj", f)]);
                g.add_function(":recipient", &[("obj", a)])
            }
            RuleKind::EventLocation => {
                let f = self.find_event(g, event(sol), rng);
                g.add_function(":location", &[("obj", f)])
            }
            RuleKind::Today => g.add_function("Today", &[]),
            RuleKind::Yesterday => g.add_function("Yesterday", &[]),
            RuleKind::NextWeekend => g.add_function("NextWeekend", &[]),
            RuleKind::NextDow => {
                let Solution::Weekday(w) = sol else { unreachable!() };
                let t = g.add_terminal(weekday_name(*w));
                g.add_function("NextDOW", &[("dow", t)])
            }
            RuleKind::PlusDays => {
                let Solution::Shift(w, k) = sol else { unreachable!() };
                let d = g.add_terminal(weekday_name(*w));
                let n = g.add_terminal(k.to_string());
                g.add_function("AddDays", &[("date", d), ("days", n)])
            }
            RuleKind::EventWeekday => {
                let f = self.find_event(g, event(sol), rng);
                let s = g.add_function(":start", &[("obj", f)]);
                g.add_function(":dow", &[("obj", s)])
            }
            RuleKind::EventStartAm => {
                let f = self.find_event(g, event(sol), rng);
                let s = g.add_function(":start", &[("obj", f)]);
                let t = g.add_function(":time", &[("obj", s)]);
                g.add_function("NumberAM", &[("time", t)])
            }
        }
    }

    /// A `CreateEvent` over a random constraint subset with literal values.
    pub fn initial_request<R: Rng + ?Sized>(&self, law: &SlotSubsetLaw, rng: &mut R) -> DataflowGraph {
        const KINDS: [&str; 5] = ["with_attendee", "has_duration", "has_subject", "starts_at", "at_location"];
        let available: Vec<&str> = KINDS
            .iter()
            .copied()
            .filter(|k| match *k {
                "with_attendee" => !self.kb.persons.is_empty(),
                "has_subject" | "at_location" => !self.kb.events.is_empty(),
                _ => true,
            })
            .collect();
        let chosen: Vec<&str> = loop {
            let pick: Vec<&str> = available.iter().copied().filter(|_| rng.gen::<f64>() < law.p_include).collect();
            if !pick.is_empty() {
                break pick;
            }
        };
        let mut preds = Vec::new();
        for kind in chosen {
            match kind {
                "with_attendee" => {
                    let n = rng.gen_range(1..=law.max_attendees.max(1));
                    for p in self.kb.persons.choose_multiple(rng, n) {
                        preds.push(InitialPred::Attendee(p.clone()));
                    }
                }
                "has_duration" => {
                    const UNITS: [(&str, &[i64]); 6] = [
                        ("toMinutes", &[15, 25, 30, 45]),
                        ("toHours", &[1, 2, 3]),
                        ("toDays", &[1, 2]),
                        ("toWeeks", &[1, 2, 3]),
                        ("toMonths", &[1, 2]),
                        ("toYears", &[1, 3]),
                    ];
                    let (unit, ns) = UNITS.choose(rng).unwrap();
                    preds.push(InitialPred::Duration(unit, *ns.choose(rng).unwrap()));
                }
                "has_subject" => {
                    let subjects = self.kb.subjects();
                    preds.push(InitialPred::Plain("has_subject", "subject", subjects.choose(rng).unwrap().to_string()));
                }
                "starts_at" => {
                    let v = if rng.gen_bool(0.5) {
                        WEEKDAYS.choose(rng).unwrap().to_string()
                    } else {
                        let half_hours = rng.gen_range(16..=37);
                        format!("{:02}:{:02}", half_hours / 2, (half_hours % 2) * 30)
                    };
                    preds.push(InitialPred::Plain("starts_at", "time", v));
                }
                _ => {
                    let locations = self.kb.locations();
                    preds.push(InitialPred::Plain("at_location", "location", locations.choose(rng).unwrap().to_string()));
                }
            }
        }
        let mut g = DataflowGraph::function_root("CreateEvent");
        let parts: Vec<NodeId> = preds
            .iter()
            .map(|p| match p {
                InitialPred::Attendee(name) => {
                    let t = g.add_terminal(name.clone());
                    g.add_function("with_attendee", &[("person", t)])
                }
                InitialPred::Duration(unit, n) => {
                    let t = g.add_terminal(n.to_string());
                    let d = g.add_function(unit, &[("n", t)]);
                    g.add_function("has_duration", &[("duration", d)])
                }
                InitialPred::Plain(f, slot, v) => {
                    let t = g.add_terminal(v.clone());
                    g.add_function(f, &[(slot, t)])
                }
            })
            .collect();
        let constraint = if parts.len() == 1 {
            parts[0]
        } else {
            let args: Vec<(&str, NodeId)> = parts.iter().map(|&p| ("arg", p)).collect();
            g.add_function("AND", &args)
        };
        let root = g.root();
        g.push_input(root, "constraint", constraint).expect("fresh constraint");
        g
    }

    /// Terminals that at least one rule can replace, with their sites and
    /// value requirements.
    pub fn replaceable(&self, g: &DataflowGraph) -> Vec<(NodeId, Site, Option<Value>)> {
        let parents = g.parents();
        g.preorder()
            .into_iter()
            .filter_map(|id| {
                let site = self.site_of(g, id, &parents)?;
                let req = self.requirement(g, id, &site, &parents);
                (!self.candidate_functions(&site, req.as_ref()).is_empty()).then_some((id, site, req))
            })
            .collect()
    }

    /// One agenda-free first turn: an initial request plus up to
    /// `config.max_depth` replacement iterations.
    pub fn generate_first_turn<R: Rng>(
        &self,
        config: &CompositionConfig,
        rng: &mut R,
    ) -> Result<FirstTurn, ComposeError> {
        let mut g = self.initial_request(&config.slot_law, rng);
        typecheck(&mut g, &self.registry).map_err(|e| ComposeError::Invalid(e.to_string()))?;
        let mut depth: HashMap<NodeId, usize> = HashMap::new();
        let mut replacements = Vec::new();
        for _ in 0..config.max_depth {
            if rng.gen::<f64>() >= config.p_replace {
                continue;
            }
            let options = self.replaceable(&g);
            let Some((id, site, req)) = options.choose(rng) else {
                break;
            };
            let rules = self.candidate_functions(site, req.as_ref());
            let rule = *rules.choose(rng).expect("replaceable terminals have candidates");
            let before = g.store_len();
            let d = depth.get(id).copied().unwrap_or(0) + 1;
            g = self.replace_value(&g, *id, rule, rng, req.as_ref())?;
            for n in g.preorder() {
                if n.index() >= before {
                    depth.insert(n, d);
                }
            }
            replacements.push(rule.kind);
        }
        let g = g.compact();
        let expr = serialize(&g, &self.registry);
        let nl = render_varied(&g, &self.registry, &self.templates, rng)?;
        Ok(FirstTurn {
            expr,
            nl,
            graph: g,
            depth: depth.values().copied().max().unwrap_or(0),
            replacements,
        })
    }

    /// Reasons the graph is not a sensible request; empty when it is. Checks
    /// typing, that every lookup succeeds, that event searches pick out a
    /// single event and that `Yesterday` only appears inside a search.
    pub fn semantic_violations(&self, g: &DataflowGraph) -> Vec<String> {
        let mut g = g.clone();
        if let Err(e) = typecheck(&mut g, &self.registry) {
            return vec![format!("type error: {e}")];
        }
        let domain = self.domain();
        let parents = g.parents();
        let mut out = Vec::new();
        for id in g.preorder() {
            let Some(f) = g.node(id).function() else { continue };
            if f == "Yesterday" {
                let mut at = id;
                let mut inside = false;
                while let Some(&p) = parents.get(&at) {
                    inside |= g.node(p).function() == Some("FindEvents");
                    at = p;
                }
                if !inside {
                    out.push("Yesterday outside an event search".into());
                }
            }
            match evaluate_node(&g, &self.registry, &domain, id) {
                Err(e) => out.push(format!("{f}: {e}")),
                Ok(Value::List(xs)) if f == "FindEvents" && xs.len() != 1 => {
                    out.push(format!("FindEvents matches {} events", xs.len()))
                }
                Ok(_) => {}
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
enum Solution {
    Unit,
    Person(String),
    Event(usize),
    Weekday(Weekday),
    Shift(Weekday, i64),
}

enum InitialPred {
    Attendee(String),
    Duration(&'static str, i64),
    Plain(&'static str, &'static str, String),
}

fn all_weekdays() -> impl Iterator<Item = Weekday> {
    WEEKDAYS.iter().map(|w| parse_weekday(w).expect("weekday table"))
}
