//! Agenda-driven user simulation.
//!
//! Each user turn maps the current conversation graph onto the agenda,
//! picks an extension point and slot(s) under the persona's probabilities,
//! turns the choice into a `revise`/`GetInfo` expression, executes it, and
//! lets the restaurant agent answer.

mod persona;

pub use persona::{Persona, PersonaError};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equivalent::equivalent;
use crate::graph::DataflowGraph;
use crate::mapping::{extensible_nodes, map_graphs, ExtensionPoint, TablePolicy};
use crate::mwoz::{self, agent_respond, DialogueState, RestaurantDb};
use crate::nlg::{render_varied, Templates};
use crate::parse::parse_expression;
use crate::registry::{Registry, TypeName};
use crate::serialize::serialize;

pub const GREET_TEXT: &str = "hello";
pub const GOODBYE_TEXT: &str = "Goodbye!";
pub const DEFAULT_MAX_TURNS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("no earlier value of type {0} to refer to")]
    ReferTargetAbsent(String),
    #[error("{0:?} requests have no expression form")]
    NotRealizable(RequestKind),
    #[error("no conversation root in the history")]
    NoConversationRoot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    SetSlots,
    GetInfo,
    End,
    Greet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Via {
    Explicit,
    Reference,
    Mistaken,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    /// Slot names from the agenda root down to the slot.
    pub path: Vec<String>,
    pub slot: String,
    pub value: String,
    pub ty: TypeName,
    pub via: Via,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRequest {
    pub kind: RequestKind,
    pub assignments: Vec<Assignment>,
    pub info_field: Option<String>,
}

impl UserRequest {
    fn bare(kind: RequestKind) -> Self {
        UserRequest {
            kind,
            assignments: Vec::new(),
            info_field: None,
        }
    }
}

/// One random choice made while building a turn, kept for replay/debugging.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    EarlyEnd,
    Satisfied,
    FollowPrompt(String),
    IgnorePrompt(String),
    Point { index: usize, of: usize },
    Slot(String),
    Info(String),
    ExtraSlot(String),
    Mistake { slot: String, value: String },
    Refer { slot: String },
}

/// What request selection needs from the running dialogue.
pub trait RequestContext {
    /// Function name of the task being revised (e.g. `FindRestaurant`).
    fn task(&self) -> &str;
    /// Wrong-but-legal values for a slot; empty when none are known.
    fn alternatives(&self, slot: &str, target: &str) -> Vec<String>;
    /// What `refer( ty )` would currently resolve to.
    fn resolve(&self, ty: &TypeName) -> Option<String>;
}

#[derive(Clone, Copy)]
enum Candidate {
    Slot(usize),
    Info(usize),
}

/// Chooses the next user request. Random draws happen in a fixed order so a
/// seeded `rng` replays exactly; every draw's outcome is appended to `trace`.
pub fn select_action<R: Rng + ?Sized>(
    points: &[ExtensionPoint],
    agent_prompt: Option<&str>,
    persona: &Persona,
    rng: &mut R,
    ctx: &dyn RequestContext,
    trace: &mut Vec<Decision>,
) -> UserRequest {
    if rng.gen::<f64>() < persona.p_early_end {
        trace.push(Decision::EarlyEnd);
        return UserRequest::bare(RequestKind::End);
    }
    let all: Vec<(usize, Candidate)> = points
        .iter()
        .enumerate()
        .flat_map(|(pi, p)| {
            (0..p.open_slots.len())
                .map(move |si| (pi, Candidate::Slot(si)))
                .chain((0..p.info_fields.len()).map(move |fi| (pi, Candidate::Info(fi))))
        })
        .collect();
    if all.is_empty() {
        trace.push(Decision::Satisfied);
        return UserRequest::bare(RequestKind::End);
    }
    let is_slot = |c: &(usize, Candidate), name: &str| match c.1 {
        Candidate::Slot(si) => points[c.0].open_slots[si].slot == name,
        Candidate::Info(_) => false,
    };

    let mut pool = all.clone();
    let mut forced = None;
    let mut ignored: Option<&str> = None;
    if let Some(slot) = agent_prompt {
        let r: f64 = rng.gen();
        let answering = all.iter().find(|c| is_slot(c, slot)).copied();
        if r >= persona.p_ignore_agent && answering.is_some() {
            trace.push(Decision::FollowPrompt(slot.to_string()));
            forced = answering;
        } else if r < persona.p_ignore_agent {
            trace.push(Decision::IgnorePrompt(slot.to_string()));
            ignored = Some(slot);
            pool.retain(|c| !is_slot(c, slot));
            if pool.is_empty() {
                pool = all.clone();
            }
        }
    }
    let (pi, cand) = match forced {
        Some(c) => c,
        None => {
            let mut pts: Vec<usize> = pool.iter().map(|c| c.0).collect();
            pts.dedup();
            let pi = pts[rng.gen_range(0..pts.len())];
            trace.push(Decision::Point {
                index: pi,
                of: pts.len(),
            });
            let within: Vec<_> = pool.iter().filter(|c| c.0 == pi).copied().collect();
            within[rng.gen_range(0..within.len())]
        }
    };
    let point = &points[pi];

    let first = match cand {
        Candidate::Info(fi) => {
            let field = point.info_fields[fi].clone();
            trace.push(Decision::Info(field.clone()));
            return UserRequest {
                kind: RequestKind::GetInfo,
                assignments: Vec::new(),
                info_field: Some(field),
            };
        }
        Candidate::Slot(si) => si,
    };
    trace.push(Decision::Slot(point.open_slots[first].slot.clone()));
    let mut chosen = vec![first];
    if persona.max_slots_per_turn > 1 && rng.gen::<f64>() < persona.p_multi_slot {
        let mut rest: Vec<usize> = (0..point.open_slots.len())
            .filter(|&i| i != first && Some(point.open_slots[i].slot.as_str()) != ignored)
            .collect();
        rest.shuffle(rng);
        for i in rest.into_iter().take(persona.max_slots_per_turn - 1) {
            trace.push(Decision::ExtraSlot(point.open_slots[i].slot.clone()));
            chosen.push(i);
        }
    }

    let mut assignments = Vec::new();
    for si in chosen {
        let open = &point.open_slots[si];
        let mut value = open.value.clone();
        let mut via = Via::Explicit;
        if rng.gen::<f64>() < persona.p_mistake {
            let alts = ctx.alternatives(&open.slot, &open.value);
            if let Some(v) = alts.choose(rng) {
                value = v.clone();
                via = Via::Mistaken;
                trace.push(Decision::Mistake {
                    slot: open.slot.clone(),
                    value: value.clone(),
                });
            }
        }
        if via == Via::Explicit
            && rng.gen::<f64>() < persona.p_refer
            && ctx.resolve(&open.ty).as_deref() == Some(value.as_str())
        {
            via = Via::Reference;
            trace.push(Decision::Refer { slot: open.slot.clone() });
        }
        assignments.push(Assignment {
            path: open.path.clone(),
            slot: open.slot.clone(),
            value,
            ty: open.ty.clone(),
            via,
        });
    }
    UserRequest {
        kind: RequestKind::SetSlots,
        assignments,
        info_field: None,
    }
}

/// Expression text for a request: `revise( Task , slot=value ... )` or
/// `GetInfo( refer( Task ) , field )`.
pub fn realize_expression(
    request: &UserRequest,
    ctx: &dyn RequestContext,
    reg: &Registry,
) -> Result<String, SimError> {
    match request.kind {
        RequestKind::SetSlots => {
            let mut g = DataflowGraph::function_root("revise");
            let task = g.add_terminal(ctx.task());
            let root = g.root();
            g.push_input(root, "task", task).expect("fresh terminal");
            for a in &request.assignments {
                let child = match a.via {
                    Via::Reference => {
                        if ctx.resolve(&a.ty).is_none() {
                            return Err(SimError::ReferTargetAbsent(a.ty.to_string()));
                        }
                        let ty = g.add_terminal(a.ty.as_str());
                        g.add_function("refer", &[("type", ty)])
                    }
                    _ => g.add_terminal(a.value.clone()),
                };
                g.push_input(root, &a.slot, child).expect("fresh subtree");
            }
            Ok(serialize(&g, reg))
        }
        RequestKind::GetInfo => Ok(format!(
            "GetInfo( refer( {} ) , {} )",
            ctx.task(),
            request.info_field.as_deref().unwrap_or_default()
        )),
        kind => Err(SimError::NotRealizable(kind)),
    }
}

/// The subgraph under the latest conversation root found in the history,
/// agent results included.
pub fn extract_agenda(history: &[DataflowGraph]) -> Result<DataflowGraph, SimError> {
    for g in history.iter().rev() {
        let last = g
            .preorder()
            .into_iter()
            .filter(|&n| g.node(n).function() == Some(mwoz::CONVERSATION))
            .max();
        if let Some(id) = last {
            return Ok(g.subgraph(id));
        }
    }
    Err(SimError::NoConversationRoot)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Agent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub speaker: Speaker,
    pub nl: String,
    pub df: Option<String>,
    pub seed_trace: Vec<Decision>,
    /// User turns: the request behind the expression.
    pub request: Option<UserRequest>,
    /// Agent turns: the slot asked for.
    pub prompt: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Dialogue {
    pub agenda_id: String,
    pub seed: u64,
    pub persona: Persona,
    pub turns: Vec<Turn>,
    pub reached_target: bool,
    /// Why generation stopped early, if it did.
    pub failure: Option<String>,
    /// Conversation graphs after every executed step.
    pub history: Vec<DataflowGraph>,
}

#[derive(Serialize)]
struct TurnLine<'a> {
    i: usize,
    speaker: Speaker,
    nl: &'a str,
    df: Option<&'a str>,
}

#[derive(Serialize)]
struct DialogueLine<'a> {
    agenda_id: &'a str,
    seed: u64,
    persona: &'a Persona,
    reached_target: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<&'a str>,
    turns: Vec<TurnLine<'a>>,
}

impl Dialogue {
    /// One JSON object, no trailing newline.
    pub fn to_json_line(&self) -> String {
        let line = DialogueLine {
            agenda_id: &self.agenda_id,
            seed: self.seed,
            persona: &self.persona,
            reached_target: self.reached_target,
            failure: self.failure.as_deref(),
            turns: self
                .turns
                .iter()
                .map(|t| TurnLine {
                    i: t.index,
                    speaker: t.speaker,
                    nl: &t.nl,
                    df: t.df.as_deref(),
                })
                .collect(),
        };
        serde_json::to_string(&line).expect("dialogue serializes")
    }

    pub fn user_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.speaker == Speaker::User)
    }
}

/// Registry, database, templates and policy a dialogue runs against.
#[derive(Clone, Debug)]
pub struct MwozBundle {
    pub registry: Registry,
    pub db: RestaurantDb,
    pub templates: Templates,
    pub policy: TablePolicy,
    pub max_turns: usize,
}

impl MwozBundle {
    pub fn fixture() -> Self {
        MwozBundle {
            registry: mwoz::registry(),
            db: RestaurantDb::fixture(),
            templates: Templates::builtin(),
            policy: mwoz::extension_policy(),
            max_turns: DEFAULT_MAX_TURNS,
        }
    }
}

struct Ctx<'a> {
    state: &'a DialogueState,
    bundle: &'a MwozBundle,
    task: &'a str,
}

impl RequestContext for Ctx<'_> {
    fn task(&self) -> &str {
        self.task
    }

    fn alternatives(&self, slot: &str, target: &str) -> Vec<String> {
        mwoz::alternatives(slot, target, &self.bundle.db).unwrap_or_default()
    }

    fn resolve(&self, ty: &TypeName) -> Option<String> {
        self.state.resolve(&self.bundle.registry, ty).map(str::to_string)
    }
}

/// Generates one dialogue toward `agenda`. Failures (unmappable agenda,
/// turn limit, execution errors) end the dialogue and are recorded in
/// [`Dialogue::failure`]; this never panics on bad input.
pub fn run_dialogue(
    agenda: &DataflowGraph,
    agenda_id: &str,
    persona: &Persona,
    seed: u64,
    bundle: &MwozBundle,
) -> Dialogue {
    let reg = &bundle.registry;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut turns = vec![
        Turn {
            index: 1,
            speaker: Speaker::User,
            nl: GREET_TEXT.into(),
            df: None,
            seed_trace: Vec::new(),
            request: Some(UserRequest::bare(RequestKind::Greet)),
            prompt: None,
        },
        Turn {
            index: 1,
            speaker: Speaker::Agent,
            nl: mwoz::GREETING.into(),
            df: None,
            seed_trace: Vec::new(),
            request: None,
            prompt: None,
        },
    ];
    let task_name = agenda
        .node(agenda.root())
        .input("task")
        .and_then(|t| agenda.node(t).function())
        .unwrap_or(mwoz::TASK)
        .to_string();
    let mut state = DialogueState::new();
    let mut prompt: Option<String> = None;
    let mut failure = None;
    let mut index = 2;

    loop {
        if index > bundle.max_turns {
            failure = Some(format!("turn limit {} reached", bundle.max_turns));
            break;
        }
        let mapping = match map_graphs(state.current(), agenda, reg) {
            Ok(m) => m,
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        };
        let points = extensible_nodes(state.current(), agenda, &mapping, &bundle.policy);
        let ctx = Ctx {
            state: &state,
            bundle,
            task: &task_name,
        };
        let mut trace = Vec::new();
        let request = select_action(&points, prompt.as_deref(), persona, &mut rng, &ctx, &mut trace);

        if request.kind == RequestKind::End {
            state.end();
            let reply = agent_respond(&mut state, &bundle.db, reg, &mut rng);
            turns.push(user_turn(index, GOODBYE_TEXT.into(), None, trace, request));
            turns.push(agent_turn(index, reply.text, None));
            break;
        }

        let step = realize_expression(&request, &ctx, reg)
            .map_err(|e| e.to_string())
            .and_then(|expr| parse_expression(&expr, reg).map(|g| (expr, g)).map_err(|e| e.to_string()));
        let (expr, g) = match step {
            Ok(s) => s,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        let nl = match render_varied(&g, reg, &bundle.templates, &mut rng) {
            Ok(nl) => nl,
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        };
        if let Err(e) = state.apply(&g, reg) {
            failure = Some(e.to_string());
            break;
        }
        let reply = agent_respond(&mut state, &bundle.db, reg, &mut rng);
        turns.push(user_turn(index, nl, Some(expr), trace, request));
        turns.push(agent_turn(index, reply.text, reply.prompt.clone()));
        prompt = reply.prompt;
        index += 1;
    }

    Dialogue {
        agenda_id: agenda_id.to_string(),
        seed,
        persona: persona.clone(),
        reached_target: equivalent(state.current(), agenda, reg),
        failure,
        turns,
        history: state.history().to_vec(),
    }
}

fn user_turn(index: usize, nl: String, df: Option<String>, trace: Vec<Decision>, request: UserRequest) -> Turn {
    Turn {
        index,
        speaker: Speaker::User,
        nl,
        df,
        seed_trace: trace,
        request: Some(request),
        prompt: None,
    }
}

fn agent_turn(index: usize, nl: String, prompt: Option<String>) -> Turn {
    Turn {
        index,
        speaker: Speaker::Agent,
        nl,
        df: None,
        seed_trace: Vec::new(),
        request: None,
        prompt,
    }
}
