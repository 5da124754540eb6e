//! Property tests for graph mapping and simulated restaurant dialogues.

mod common;

use std::collections::HashMap;

use dfgen::mapping::{extensible_nodes, labels_match, map_graphs, ExtensionPolicy, Mapping, TablePolicy};
use dfgen::mwoz::{self, db_query, RestaurantDb};
use dfgen::serialize::escape_terminal;
use dfgen::simulator::{extract_agenda, run_dialogue, Decision, MwozBundle, Persona, RequestKind};
use dfgen::smcal;
use dfgen::{equivalent, parse_expression, DataflowGraph, NodeId, Registry};
use proptest::prelude::*;
use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest rooted top-down mapping size, by exhaustive search over every
/// pairing of commutative children.
fn brute_force(c: &DataflowGraph, t: &DataflowGraph, reg: &Registry, a: NodeId, b: NodeId) -> usize {
    let (cn, tn) = (c.node(a), t.node(b));
    if !labels_match(cn, tn) {
        return 0;
    }
    let commutative = cn.function().and_then(|f| reg.function(f)).is_some_and(|s| s.commutative);
    let mut slots: Vec<&str> = cn.inputs.iter().map(|i| i.slot.as_str()).collect();
    slots.dedup();
    let mut total = 1;
    for slot in slots {
        let cs: Vec<NodeId> = cn.inputs.iter().filter(|i| i.slot == slot).map(|i| i.node).collect();
        let ts: Vec<NodeId> = tn.inputs.iter().filter(|i| i.slot == slot).map(|i| i.node).collect();
        if commutative {
            let score: Vec<Vec<usize>> = cs
                .iter()
                .map(|&x| ts.iter().map(|&y| brute_force(c, t, reg, x, y)).collect())
                .collect();
            total += best_assignment(&score, 0, &mut vec![false; ts.len()]);
        } else {
            total += cs.iter().zip(&ts).map(|(&x, &y)| brute_force(c, t, reg, x, y)).sum::<usize>();
        }
    }
    total
}

fn best_assignment(score: &[Vec<usize>], i: usize, used: &mut [bool]) -> usize {
    if i == score.len() {
        return 0;
    }
    let mut best = best_assignment(score, i + 1, used);
    for j in 0..used.len() {
        if !used[j] && score[i][j] > 0 {
            used[j] = true;
            best = best.max(score[i][j] + best_assignment(score, i + 1, used));
            used[j] = false;
        }
    }
    best
}

fn check_mapping(c: &DataflowGraph, t: &DataflowGraph, m: &Mapping) -> Result<(), TestCaseError> {
    let cp = c.parents();
    let tp = t.parents();
    let slot_of = |g: &DataflowGraph, parent: NodeId, child: NodeId| {
        g.node(parent).inputs.iter().find(|i| i.node == child).map(|i| i.slot.clone())
    };
    let mut seen_targets = HashMap::new();
    for (a, b) in m.pairs() {
        prop_assert!(labels_match(c.node(a), t.node(b)));
        prop_assert!(seen_targets.insert(b, a).is_none(), "target mapped twice");
        prop_assert_eq!(m.source_of(b), Some(a));
        if a == c.root() {
            prop_assert_eq!(b, t.root());
            continue;
        }
        let (pa, pb) = (cp[&a], tp[&b]);
        prop_assert_eq!(m.get(pa), Some(pb));
        prop_assert_eq!(slot_of(c, pa, a), slot_of(t, pb, b));
    }
    Ok(())
}

/// A random agenda built around one restaurant, with constraints that pick
/// out exactly that row.
fn random_agenda(rng: &mut ChaCha8Rng, db: &RestaurantDb) -> String {
    let row = db.rows().choose(rng).unwrap();
    let mut fields: Vec<&str> = mwoz::CONSTRAINT_FIELDS
        .iter()
        .copied()
        .filter(|f| *f != "name")
        .filter(|_| rng.gen_bool(0.5))
        .collect();
    let pick = |fs: &[&str]| {
        let c: Vec<(&str, &str)> = fs.iter().map(|f| (*f, row.field(f).unwrap())).collect();
        db_query(&c, db).unwrap().len()
    };
    if fields.is_empty() || pick(&fields) != 1 {
        fields = vec!["name"];
    }
    let mut args: Vec<String> = fields
        .iter()
        .map(|f| format!("{f}={}", escape_terminal(row.field(f).unwrap())))
        .collect();
    if rng.gen_bool(0.6) {
        let day = dfgen::registry::WEEKDAYS.choose(rng).unwrap();
        let time = format!("{:02}:{}", rng.gen_range(11..22), ["00", "30"].choose(rng).unwrap());
        let people = rng.gen_range(1..=8);
        args.push(format!("book=RestaurantBookInfo( day={day} , time={time} , people={people} )"));
    }
    let mut info: Vec<String> = fields
        .iter()
        .map(|f| format!("{f}={}", escape_terminal(row.field(f).unwrap())))
        .collect();
    let n_extra = rng.gen_range(0..=2);
    for extra in ["address", "phone"].iter().choose_multiple(rng, n_extra) {
        info.push(format!("{extra}={}", escape_terminal(row.field(extra).unwrap())));
    }
    args.push(format!("@result=RestaurantInfo( {} )", info.join(" , ")));
    format!("MwozConversation( FindRestaurant( {} ) )", args.join(" , "))
}

fn agenda(seed: u64, bundle: &MwozBundle) -> DataflowGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let text = random_agenda(&mut rng, &bundle.db);
    parse_expression(&text, &bundle.registry).unwrap_or_else(|e| panic!("{text}: {e}"))
}

fn persona() -> impl Strategy<Value = Persona> {
    (0.0..=1.0f64, 1usize..4, 0.0..=0.5f64, 0.0..=1.0f64, 0.0..=1.0f64).prop_map(
        |(p_multi_slot, max_slots_per_turn, p_mistake, p_refer, p_ignore_agent)| Persona {
            p_multi_slot,
            max_slots_per_turn,
            p_mistake,
            p_refer,
            p_ignore_agent,
            p_early_end: 0.0,
        },
    )
}

fn pending(current: &DataflowGraph, target: &DataflowGraph, bundle: &MwozBundle) -> usize {
    let m = map_graphs(current, target, &bundle.registry).unwrap();
    extensible_nodes(current, target, &m, &bundle.policy)
        .iter()
        .map(|p| p.pending())
        .sum()
}

fn terminal_at(g: &DataflowGraph, node: NodeId, slot: &str) -> Option<String> {
    g.node(node).input(slot).and_then(|n| g.node(n).terminal()).map(str::to_string)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mapping_invariants_and_optimality(a in any::<u64>(), b in any::<u64>(), depth in 0u32..3) {
        let reg = smcal::registry();
        let c = parse_expression(&common::calendar_request(a, depth), &reg).unwrap();
        let t = parse_expression(&common::calendar_request(b, depth), &reg).unwrap();
        match map_graphs(&c, &t, &reg) {
            Ok(m) => {
                check_mapping(&c, &t, &m)?;
                prop_assert_eq!(m.len(), brute_force(&c, &t, &reg, c.root(), t.root()));
            }
            Err(_) => prop_assert!(!labels_match(c.node(c.root()), t.node(t.root()))),
        }
        let self_map = map_graphs(&t, &t, &reg).unwrap();
        prop_assert_eq!(self_map.len(), t.preorder().len());
    }

    #[test]
    fn mapping_into_dialogue_states(seed in any::<u64>(), p in persona()) {
        let bundle = MwozBundle::fixture();
        let target = agenda(seed, &bundle);
        let d = run_dialogue(&target, "p", &p, seed, &bundle);
        for g in &d.history {
            let m = map_graphs(g, &target, &bundle.registry).unwrap();
            check_mapping(g, &target, &m)?;
            prop_assert_eq!(m.len(), brute_force(g, &target, &bundle.registry, g.root(), target.root()));
            let policy = TablePolicy::permissive();
            for point in extensible_nodes(g, &target, &m, &policy) {
                prop_assert!(policy.extensible(&point.function));
            }
        }
    }

    #[test]
    fn random_personas_converge(seed in any::<u64>(), p in persona()) {
        let bundle = MwozBundle::fixture();
        let target = agenda(seed, &bundle);
        let d = run_dialogue(&target, "p", &p, seed, &bundle);
        prop_assert!(d.failure.is_none(), "{:?}", d.failure);
        prop_assert!(d.reached_target);
        prop_assert!(equivalent(d.history.last().unwrap(), &target, &bundle.registry));
    }

    #[test]
    fn correct_slot_requests_make_progress(seed in any::<u64>(), p in persona()) {
        let bundle = MwozBundle::fixture();
        let target = agenda(seed, &bundle);
        let d = run_dialogue(&target, "p", &p, seed, &bundle);
        for (k, turn) in d.user_turns().filter(|t| t.df.is_some()).enumerate() {
            let req = turn.request.as_ref().unwrap();
            let mistaken = turn.seed_trace.iter().any(|x| matches!(x, Decision::Mistake { .. }));
            if req.kind != RequestKind::SetSlots || mistaken {
                continue;
            }
            let before = pending(&d.history[2 * k], &target, &bundle);
            let after = pending(&d.history[2 * k + 1], &target, &bundle);
            prop_assert!(after < before, "turn {k}: {before} -> {after} for {:?}", turn.df);
        }
    }

    #[test]
    fn confirmed_bookings_match_the_constraints(seed in any::<u64>(), p in persona()) {
        let bundle = MwozBundle::fixture();
        let target = agenda(seed, &bundle);
        let d = run_dialogue(&target, "p", &p, seed, &bundle);
        for g in &d.history {
            let Some(task) = g.node(g.root()).input("task") else { continue };
            let Some(booking) = g.node(task).input("book").and_then(|b| g.node(b).result) else { continue };
            if terminal_at(g, booking, "confirmed").as_deref() != Some("true") {
                continue;
            }
            for slot in mwoz::BOOKING_ORDER {
                prop_assert!(terminal_at(g, booking, slot).is_some());
            }
            let constraints: Vec<(String, String)> = mwoz::CONSTRAINT_FIELDS
                .iter()
                .filter_map(|f| terminal_at(g, task, f).map(|v| (f.to_string(), v)))
                .collect();
            let info = g.node(task).result.expect("a booking needs a found restaurant");
            let name = terminal_at(g, info, "name").unwrap();
            let rows = db_query(&constraints, &bundle.db).unwrap();
            prop_assert!(rows.iter().any(|r| r.name == name), "{name} not among {:?}", constraints);
        }
    }

    #[test]
    fn extracted_agendas_redrive(seed in any::<u64>(), p in persona(), replay in any::<u64>()) {
        let bundle = MwozBundle::fixture();
        let target = agenda(seed, &bundle);
        let d = run_dialogue(&target, "p", &p, seed, &bundle);
        let extracted = extract_agenda(&d.history).unwrap();
        let again = run_dialogue(&extracted, "replay", &Persona { p_early_end: 0.0, ..Persona::default() }, replay, &bundle);
        prop_assert!(again.reached_target, "{:?}", again.failure);
    }

    #[test]
    fn persona_validation(p_multi in -1.0..2.0f64, p_mistake in -1.0..2.0f64, max_slots in 0usize..4) {
        let persona = Persona { p_multi_slot: p_multi, p_mistake, max_slots_per_turn: max_slots, ..Persona::default() };
        let valid = (0.0..=1.0).contains(&p_multi) && (0.0..=1.0).contains(&p_mistake) && max_slots >= 1;
        prop_assert_eq!(persona.validate().is_ok(), valid);
        let json = serde_json::to_string(&persona).unwrap();
        prop_assert_eq!(Persona::from_json(&json).is_ok(), valid);
    }
}

#[test]
fn shipped_persona_file_matches_the_defaults() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/persona.json")).unwrap();
    assert_eq!(Persona::from_json(&text).unwrap(), Persona::default());
    assert_eq!(Persona::from_json("{}").unwrap(), Persona::default());
    assert!(Persona::from_json(r#"{"p_refer": 0.5, "p_sulk": 1}"#).is_err());
}

