use rand::Rng;

use super::{
    db_query, MwozError, RestaurantDb, RestaurantRow, BOOKING, BOOKING_ORDER, BOOK_INFO, CONSTRAINT_FIELDS,
    CONVERSATION, RESTAURANT_INFO,
};
use crate::graph::{DataflowGraph, NodeId};
use crate::registry::{Registry, TypeName};
use crate::typecheck::typecheck;

pub const GREETING: &str = "Hello, I'm your MWOZ agent. How can I help you?";
const REFERENCE_ALPHABET: &[u8] = b"ABCDEFGHJKLMNPQRSTUVWXYZ23456789";

/// Everything the agent and the executor know about one conversation.
///
/// `history` holds the conversation graph after every executed step; the
/// last entry is the current state. `mentions` records every value that
/// entered the graph, oldest first, for `refer` resolution.
#[derive(Clone, Debug)]
pub struct DialogueState {
    history: Vec<DataflowGraph>,
    mentions: Vec<(TypeName, String)>,
    pending_info: Option<String>,
    ended: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentReply {
    pub text: String,
    /// The slot the agent just asked for, if any.
    pub prompt: Option<String>,
}

impl DialogueState {
    pub fn new() -> Self {
        DialogueState {
            history: vec![DataflowGraph::function_root(CONVERSATION)],
            mentions: Vec::new(),
            pending_info: None,
            ended: false,
        }
    }

    pub fn current(&self) -> &DataflowGraph {
        self.history.last().expect("history is never empty")
    }

    pub fn history(&self) -> &[DataflowGraph] {
        &self.history
    }

    pub fn mentions(&self) -> &[(TypeName, String)] {
        &self.mentions
    }

    pub fn pending_info(&self) -> Option<&str> {
        self.pending_info.as_deref()
    }

    pub fn ended(&self) -> bool {
        self.ended
    }

    pub fn end(&mut self) {
        self.ended = true;
    }

    /// Most recent mentioned value whose type is `ty` or a subtype of it.
    pub fn resolve(&self, reg: &Registry, ty: &TypeName) -> Option<&str> {
        self.mentions
            .iter()
            .rev()
            .find(|(t, _)| reg.is_subtype(t, ty))
            .map(|(_, v)| v.as_str())
    }

    /// The task node of the given function under the conversation root.
    pub fn task(&self, function: &str) -> Option<NodeId> {
        task_node(self.current(), function)
    }

    /// Executes a user request (`revise` or `GetInfo`) against the current
    /// state, appending the new state to the history.
    pub fn apply(&mut self, request: &DataflowGraph, reg: &Registry) -> Result<(), MwozError> {
        let root = request.node(request.root());
        let terminal_arg = |slot: &str| {
            root.input(slot)
                .and_then(|n| request.node(n).terminal())
                .map(str::to_string)
        };
        match root.function() {
            Some("revise") => {
                let task = terminal_arg("task").ok_or_else(|| MwozError::Unsupported("revise".into()))?;
                let mut g = self.current().clone();
                let task_id = match task_node(&g, &task) {
                    Some(id) => id,
                    None => {
                        reg.function(&task).ok_or_else(|| MwozError::NoTask(task.clone()))?;
                        let id = g.add_function(&task, &[]);
                        let conv = g.root();
                        g.set_input(conv, "task", id)?;
                        id
                    }
                };
                let task_sig = reg.function(&task).ok_or_else(|| MwozError::NoTask(task.clone()))?.clone();
                let book_sig = reg.function(BOOK_INFO).cloned();
                let mut new_mentions = Vec::new();
                for inp in root.inputs.iter().filter(|i| i.slot != "task") {
                    let value = self.value_of(request, inp.node, reg)?;
                    let (host, spec) = if let Some(spec) = task_sig.slot(&inp.slot) {
                        (task_id, spec.clone())
                    } else if let Some(spec) = book_sig.as_ref().and_then(|s| s.slot(&inp.slot)) {
                        let book = match g.node(task_id).input("book") {
                            Some(b) => b,
                            None => {
                                let b = g.add_function(BOOK_INFO, &[]);
                                g.set_input(task_id, "book", b)?;
                                b
                            }
                        };
                        (book, spec.clone())
                    } else {
                        return Err(MwozError::Unsupported(format!("revise slot `{}`", inp.slot)));
                    };
                    let old = g.node(host).input(&inp.slot).and_then(|n| g.node(n).terminal());
                    if old != Some(value.as_str()) {
                        let t = g.add_terminal(value.clone());
                        g.set_input(host, &inp.slot, t)?;
                        if host != task_id {
                            // A changed booking detail voids any reservation.
                            g.set_result(host, None);
                        }
                    }
                    new_mentions.push((spec.ty.clone(), value));
                }
                // A found restaurant that no longer fits the constraints is
                // dropped together with any reservation made for it.
                if let Some(found) = g.node(task_id).result {
                    let stale = CONSTRAINT_FIELDS.iter().any(|f| {
                        terminal_of(&g, task_id, f).is_some_and(|v| terminal_of(&g, found, f).as_ref() != Some(&v))
                    });
                    if stale {
                        g.set_result(task_id, None);
                        if let Some(book) = g.node(task_id).input("book") {
                            g.set_result(book, None);
                        }
                    }
                }
                typecheck(&mut g, reg)?;
                self.mentions.extend(new_mentions);
                self.history.push(g);
                Ok(())
            }
            Some("GetInfo") => {
                let field = terminal_arg("field").ok_or_else(|| MwozError::Unsupported("GetInfo".into()))?;
                let task = root
                    .input("task")
                    .map(|n| request.node(n))
                    .and_then(|n| match n.function() {
                        Some("refer") => n.inputs.first().and_then(|i| request.node(i.node).terminal()),
                        other => other,
                    })
                    .ok_or_else(|| MwozError::Unsupported("GetInfo".into()))?
                    .to_string();
                if self.task(&task).is_none() {
                    return Err(MwozError::ReferTargetAbsent(task));
                }
                self.pending_info = Some(field);
                self.history.push(self.current().clone());
                Ok(())
            }
            other => Err(MwozError::Unsupported(other.unwrap_or("terminal").to_string())),
        }
    }

    fn value_of(&self, request: &DataflowGraph, id: NodeId, reg: &Registry) -> Result<String, MwozError> {
        let node = request.node(id);
        if let Some(t) = node.terminal() {
            return Ok(t.to_string());
        }
        match node.function() {
            Some("refer") => {
                let ty = node
                    .inputs
                    .first()
                    .and_then(|i| request.node(i.node).terminal())
                    .unwrap_or_default();
                self.resolve(reg, &TypeName::new(ty))
                    .map(str::to_string)
                    .ok_or_else(|| MwozError::ReferTargetAbsent(ty.to_string()))
            }
            other => Err(MwozError::Unsupported(other.unwrap_or_default().to_string())),
        }
    }
}

impl Default for DialogueState {
    fn default() -> Self {
        Self::new()
    }
}

fn task_node(g: &DataflowGraph, function: &str) -> Option<NodeId> {
    let t = g.node(g.root()).input("task")?;
    (g.node(t).function() == Some(function)).then_some(t)
}

fn terminal_of(g: &DataflowGraph, parent: NodeId, slot: &str) -> Option<String> {
    g.node(parent)
        .input(slot)
        .and_then(|n| g.node(n).terminal())
        .map(str::to_string)
}

fn question(slot: &str) -> &'static str {
    match slot {
        "people" => "For how many people would you like to book the restaurant?",
        "day" => "On what day would you like to book the restaurant?",
        _ => "At what time would you like to book the restaurant?",
    }
}

/// The agent's turn. Updates the state's result links (selected restaurant,
/// answered information fields, confirmed booking) and returns the reply.
///
/// Policy, first applicable rule wins: answer a pending information request
/// (then continue with the standing question); report several matches;
/// report no match; ask for the first missing booking detail; make the
/// booking; offer further help. A closed conversation gets "Goodbye!".
pub fn agent_respond<R: Rng + ?Sized>(
    state: &mut DialogueState,
    db: &RestaurantDb,
    reg: &Registry,
    rng: &mut R,
) -> AgentReply {
    if state.ended {
        return AgentReply {
            text: "Goodbye!".into(),
            prompt: None,
        };
    }
    let mut g = state.current().clone();
    let pending = state.pending_info.take();
    let Some(task) = task_node(&g, super::TASK) else {
        return AgentReply {
            text: "What kind of restaurant are you looking for?".into(),
            prompt: None,
        };
    };

    let constraints: Vec<(String, String)> = CONSTRAINT_FIELDS
        .iter()
        .filter_map(|f| terminal_of(&g, task, f).map(|v| (f.to_string(), v)))
        .collect();
    let rows: Vec<RestaurantRow> = db_query(&constraints, db)
        .map(|rs| rs.into_iter().cloned().collect())
        .unwrap_or_default();
    let book = g.node(task).input("book");

    let mut mentions = Vec::new();
    let mut newly_selected = false;
    let selected = if rows.len() == 1 {
        let row = &rows[0];
        let kept = g
            .node(task)
            .result
            .is_some_and(|r| terminal_of(&g, r, "name").as_deref() == Some(row.name.as_str()));
        if !kept {
            let info = info_node(&mut g, row, &[]);
            g.set_result(task, Some(info));
            if let Some(b) = book {
                g.set_result(b, None);
            }
            newly_selected = true;
            for f in CONSTRAINT_FIELDS {
                mentions.push((slot_type(reg, RESTAURANT_INFO, f), row.field(f).unwrap().to_string()));
            }
        }
        Some(row)
    } else {
        g.set_result(task, None);
        if let Some(b) = book {
            g.set_result(b, None);
        }
        None
    };

    let mut parts: Vec<String> = Vec::new();
    if let Some(field) = &pending {
        match (selected, selected.and_then(|r| r.field(field))) {
            (Some(row), Some(value)) => {
                let info = g.node(task).result.expect("selected rows have an info node");
                if g.node(info).input(field).is_none() {
                    let t = g.add_terminal(value);
                    // Field names come from the registry, so this cannot cycle.
                    let _ = g.set_input(info, field, t);
                    mentions.push((slot_type(reg, RESTAURANT_INFO, field), value.to_string()));
                }
                parts.push(format!("For {} the {field} is {value}.", row.name));
            }
            (Some(row), None) => parts.push(format!("I have no {field} listed for {}.", row.name)),
            (None, _) => parts.push(format!("I need to know which restaurant you mean before I can give the {field}.")),
        }
    }

    let mut prompt = None;
    match (rows.len(), selected) {
        (0, _) => parts.push("Sorry, I could not find a restaurant matching your request.".into()),
        (n, None) => {
            parts.push(format!("I see several ({n}) matches, maybe select name or address"));
            prompt = Some("name".to_string());
        }
        (_, Some(row)) => {
            let missing = BOOKING_ORDER
                .iter()
                .find(|s| book.and_then(|b| terminal_of(&g, b, s)).is_none());
            match (missing, book) {
                (Some(slot), _) => {
                    if newly_selected && pending.is_none() {
                        parts.push(format!("OK, I found {}.", row.name));
                    }
                    parts.push(question(slot).into());
                    prompt = Some(slot.to_string());
                }
                (None, Some(b)) if g.node(b).result.is_none() => {
                    let reference: String = (0..8)
                        .map(|_| REFERENCE_ALPHABET[rng.gen_range(0..REFERENCE_ALPHABET.len())] as char)
                        .collect();
                    let fields: Vec<(&str, String)> = BOOKING_ORDER
                        .iter()
                        .map(|s| (*s, terminal_of(&g, b, s).unwrap()))
                        .chain([("confirmed", "true".to_string()), ("reference", reference.clone())])
                        .collect();
                    let mut inputs = Vec::new();
                    for (slot, v) in &fields {
                        inputs.push((*slot, g.add_terminal(v.clone())));
                        mentions.push((slot_type(reg, BOOKING, slot), v.clone()));
                    }
                    let booking = g.add_function(BOOKING, &inputs);
                    g.set_result(b, Some(booking));
                    parts.push(format!(
                        "I have made the reservation, your reference number is {reference}. Is there anything else I can do for you?"
                    ));
                }
                _ => parts.push("Is there anything else I can do for you?".into()),
            }
        }
    }

    // The graph was valid before and only received well-typed fields.
    let _ = typecheck(&mut g, reg);
    state.mentions.extend(mentions);
    state.history.push(g);
    AgentReply {
        text: parts.join(" "),
        prompt,
    }
}

fn slot_type(reg: &Registry, function: &str, slot: &str) -> TypeName {
    reg.function(function)
        .and_then(|f| f.slot(slot))
        .map(|s| s.ty.clone())
        .unwrap_or_else(|| TypeName::new(crate::registry::STR))
}

fn info_node(g: &mut DataflowGraph, row: &RestaurantRow, extra: &[&str]) -> NodeId {
    let mut inputs = Vec::new();
    for f in CONSTRAINT_FIELDS.iter().chain(extra) {
        let v = row.field(f).unwrap().to_string();
        inputs.push((*f, g.add_terminal(v)));
    }
    g.add_function(RESTAURANT_INFO, &inputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mwoz::{registry, RestaurantDb};
    use crate::parse::parse_expression;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn step(state: &mut DialogueState, expr: &str, db: &RestaurantDb) -> AgentReply {
        let reg = registry();
        let g = parse_expression(expr, &reg).unwrap();
        state.apply(&g, &reg).unwrap();
        agent_respond(state, db, &reg, &mut ChaCha8Rng::seed_from_u64(1))
    }

    #[test]
    fn several_matches_then_booking_flow() {
        let db = RestaurantDb::new(RestaurantDb::fixture().rows()[..20].to_vec()).unwrap();
        let mut s = DialogueState::new();
        let r = step(&mut s, "revise( FindRestaurant , day=Thursday )", &db);
        assert_eq!(r.text, "I see several (20) matches, maybe select name or address");
        let r = step(&mut s, "revise( FindRestaurant , name=city stop restaurant )", &db);
        assert!(r.text.ends_with("For how many people would you like to book the restaurant?"));
        assert_eq!(r.prompt.as_deref(), Some("people"));
        let r = step(&mut s, "GetInfo( refer( FindRestaurant ) , address )", &db);
        assert!(r.text.starts_with("For city stop restaurant the address is Cambridge City"));
        assert!(r.text.ends_with("For how many people would you like to book the restaurant?"));
        let r = step(&mut s, "revise( FindRestaurant , people=4 , time=17:30 )", &db);
        assert!(r.text.starts_with("I have made the reservation"), "{}", r.text);
        let g = s.current();
        let book = g.node(s.task("FindRestaurant").unwrap()).input("book").unwrap();
        let booking = g.node(book).result.unwrap();
        assert_eq!(terminal_of(g, booking, "confirmed").as_deref(), Some("true"));
    }

    #[test]
    fn refer_resolves_latest_mention() {
        let db = RestaurantDb::fixture();
        let reg = registry();
        let mut s = DialogueState::new();
        step(&mut s, "revise( FindRestaurant , time=13:00 )", &db);
        step(&mut s, "revise( FindRestaurant , time=17:30 )", &db);
        assert_eq!(s.resolve(&reg, &TypeName::new("Time")), Some("17:30"));
        assert_eq!(s.resolve(&reg, &TypeName::new("Count")), None);
        let bad = parse_expression("revise( FindRestaurant , people=refer( Count ) )", &reg).unwrap();
        assert_eq!(s.apply(&bad, &reg), Err(MwozError::ReferTargetAbsent("Count".into())));
    }

    #[test]
    fn changing_booking_detail_voids_reservation() {
        let db = RestaurantDb::fixture();
        let mut s = DialogueState::new();
        step(&mut s, "revise( FindRestaurant , name=cotto , people=2 , day=Monday , time=12:00 )", &db);
        let r = step(&mut s, "revise( FindRestaurant , time=13:00 )", &db);
        assert!(r.text.starts_with("I have made the reservation"), "{}", r.text);
    }

    #[test]
    fn no_match_and_goodbye() {
        let db = RestaurantDb::fixture();
        let mut s = DialogueState::new();
        let r = step(&mut s, "revise( FindRestaurant , food=martian )", &db);
        assert!(r.text.starts_with("Sorry"));
        s.end();
        let r = agent_respond(&mut s, &db, &registry(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(r.text, "Goodbye!");
    }
}
