//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; exits nonzero if any fails.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dfgen::composer::{Composer, CompositionConfig};
use dfgen::corpus::{self, mix, structure_key, MixSpec};
use dfgen::mwoz;
use dfgen::parallel::{map_indexed, Execution};
use dfgen::serialize::serialize_full;
use dfgen::simulator::{run_dialogue, Decision, Dialogue, MwozBundle, Persona, RequestKind, Via};
use dfgen::{equivalent, parse_expression, serialize, smcal, typecheck, DataflowGraph, Registry};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn roundtrips(text: &str, reg: &Registry, full: bool) -> Result<(), String> {
    let mut g = parse_expression(text, reg).map_err(|e| e.to_string())?;
    typecheck(&mut g, reg).map_err(|e| e.to_string())?;
    let out = if full { serialize_full(&g, reg) } else { serialize(&g, reg) };
    let again = parse_expression(&out, reg).map_err(|e| e.to_string())?;
    if equivalent(&g, &again, reg) {
        Ok(())
    } else {
        Err(format!("`{out}` is not equivalent to its source"))
    }
}

fn criterion_1() -> Outcome {
    let (res, t) = timed(|| {
        let cal = smcal::registry();
        let restaurant = mwoz::registry();
        let mut errors = Vec::new();
        let mut n = 0;
        for (expr, _) in common::CALENDAR_EXAMPLES {
            n += 1;
            errors.extend(roundtrips(expr, &cal, false).err());
        }
        for line in mwoz::AGENDAS_TXT.lines().filter(|l| !l.trim().is_empty()) {
            n += 1;
            errors.extend(roundtrips(line, &restaurant, true).err());
        }
        (n, errors)
    });
    let (n, errors) = res;
    Outcome::new(
        errors.is_empty() && t < Duration::from_secs(1),
        format!("{}/{n} round-trip in {t:?} {errors:?}", n - errors.len()),
    )
}

fn agendas(bundle: &MwozBundle) -> Vec<DataflowGraph> {
    mwoz::fixture_agendas(&bundle.registry)
}

fn jsonl(dialogues: &[Dialogue]) -> String {
    dialogues.iter().map(|d| d.to_json_line() + "\n").collect()
}

fn convergence_run(exec: Execution) -> Vec<Dialogue> {
    let bundle = MwozBundle::fixture();
    let agendas = agendas(&bundle);
    let persona = Persona {
        p_early_end: 0.0,
        ..Persona::default()
    };
    map_indexed(agendas.len() * 10, exec, |k| {
        let (a, seed) = (k / 10, (k % 10) as u64);
        run_dialogue(&agendas[a], &format!("agenda-{}", a + 1), &persona, seed, &bundle)
    })
}

fn criterion_2(out: &Path) -> Outcome {
    let (dialogues, t) = timed(|| convergence_run(Execution::Parallel));
    let reached = dialogues.iter().filter(|d| d.reached_target).count();
    fs::write(out.join("c2.jsonl"), jsonl(&dialogues)).unwrap();
    Outcome::new(
        reached == 100 && dialogues.len() == 100 && t < Duration::from_secs(5),
        format!("{reached}/{} reached target in {t:?}", dialogues.len()),
    )
}

/// The order in which a dialogue's user turns addressed things.
fn turn_order(d: &Dialogue) -> Vec<String> {
    d.user_turns()
        .filter_map(|t| t.request.as_ref())
        .map(|r| {
            let mut slots: Vec<&str> = r.assignments.iter().map(|a| a.slot.as_str()).collect();
            slots.sort();
            format!("{:?}:{}:{}", r.kind, slots.join("+"), r.info_field.as_deref().unwrap_or(""))
        })
        .collect()
}

fn diversity_run() -> Vec<Dialogue> {
    let bundle = MwozBundle::fixture();
    let agenda = &agendas(&bundle)[0];
    (0..50)
        .map(|seed| run_dialogue(agenda, "agenda-1", &Persona::default(), seed, &bundle))
        .collect()
}

fn criterion_3(out: &Path) -> Outcome {
    let dialogues = diversity_run();
    let distinct: HashSet<Vec<String>> = dialogues.iter().map(turn_order).collect();
    fs::write(out.join("c3.jsonl"), jsonl(&dialogues)).unwrap();
    Outcome::new(distinct.len() >= 5, format!("{} distinct turn orders over 50 seeds", distinct.len()))
}

fn pinned_persona() -> Persona {
    Persona {
        p_mistake: 0.3,
        p_ignore_agent: 0.5,
        p_early_end: 0.0,
        ..Persona::default()
    }
}

const PINNED_AGENDA: usize = 0;
const PINNED_SEED: u64 = 0;

fn pinned_run() -> Dialogue {
    let bundle = MwozBundle::fixture();
    run_dialogue(&agendas(&bundle)[PINNED_AGENDA], "agenda-1", &pinned_persona(), PINNED_SEED, &bundle)
}

fn criterion_4(out: &Path) -> Outcome {
    let d = pinned_run();
    fs::write(out.join("c4.jsonl"), d.to_json_line() + "\n").unwrap();
    let requests: Vec<_> = d
        .user_turns()
        .filter_map(|t| t.request.as_ref().map(|r| (r, &t.seed_trace)))
        .collect();
    let corrected = requests.iter().enumerate().any(|(k, (r, _))| {
        r.assignments.iter().filter(|a| a.via == Via::Mistaken).any(|wrong| {
            requests[k + 1..].iter().any(|(later, _)| {
                later
                    .assignments
                    .iter()
                    .any(|a| a.slot == wrong.slot && a.via != Via::Mistaken && a.value != wrong.value)
            })
        })
    });
    let ignored_for_info = requests.iter().any(|(r, trace)| {
        r.kind == RequestKind::GetInfo && trace.iter().any(|t| matches!(t, Decision::IgnorePrompt(_)))
    });
    Outcome::new(
        corrected && ignored_for_info && d.reached_target,
        format!(
            "agenda {} seed {PINNED_SEED}: corrected mistake={corrected}, ignored question then get_info={ignored_for_info}, reached_target={}",
            PINNED_AGENDA + 1,
            d.reached_target
        ),
    )
}

fn composition_run(exec: Execution) -> (String, usize, usize, usize) {
    let composer = Composer::fixture();
    let config = CompositionConfig::default();
    let turns = corpus::generate_first_turns(&composer, &config, 10_000, 2024, exec).expect("generation succeeds");
    let checks = map_indexed(turns.len(), exec, |i| {
        let t = &turns[i];
        let type_ok = parse_expression(&t.expr, &composer.registry)
            .and_then(|mut g| typecheck(&mut g, &composer.registry))
            .is_ok();
        (type_ok, composer.semantic_violations(&t.graph).is_empty(), t.depth)
    });
    let type_errors = checks.iter().filter(|c| !c.0).count();
    let violations = checks.iter().filter(|c| !c.1).count();
    let max_depth = checks.iter().map(|c| c.2).max().unwrap_or(0);
    let text = turns.iter().map(|t| format!("{}\t{}\n", t.nl, t.expr)).collect();
    (text, type_errors, violations, max_depth)
}

fn criterion_5(out: &Path) -> Outcome {
    let ((text, type_errors, violations, max_depth), t) = timed(|| composition_run(Execution::Parallel));
    fs::write(out.join("c5.tsv"), text).unwrap();
    Outcome::new(
        type_errors == 0 && violations == 0 && max_depth <= 3 && t < Duration::from_secs(60),
        format!("10000 turns: {type_errors} type errors, {violations} semantic violations, max depth {max_depth}, {t:?}"),
    )
}

/// Expression tree used as an independent notion of structure.
#[derive(Clone, Debug)]
enum Tree {
    Leaf(&'static str),
    Call(&'static str, Vec<Tree>),
}

fn call(f: &'static str, args: Vec<Tree>) -> Tree {
    Tree::Call(f, args)
}

fn text(t: &Tree) -> String {
    match t {
        Tree::Leaf(v) => v.to_string(),
        Tree::Call(f, args) if args.is_empty() => format!("{f}( )"),
        Tree::Call(f, args) => {
            let parts: Vec<String> = args.iter().map(text).collect();
            format!("{f}( {} )", parts.join(" , "))
        }
    }
}

/// Same shape ignoring leaf values, with `AND` arguments matched as a
/// multiset by trying every permutation.
fn same_structure(a: &Tree, b: &Tree) -> bool {
    match (a, b) {
        (Tree::Leaf(_), Tree::Leaf(_)) => true,
        (Tree::Call(f, xs), Tree::Call(g, ys)) if f == g && xs.len() == ys.len() => {
            if *f == "AND" {
                permutations(ys.len())
                    .iter()
                    .any(|p| xs.iter().zip(p).all(|(x, &j)| same_structure(x, &ys[j])))
            } else {
                xs.iter().zip(ys).all(|(x, y)| same_structure(x, y))
            }
        }
        _ => false,
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn persons(depth: usize) -> Vec<Tree> {
    let mut out = vec![Tree::Leaf("Dan"), Tree::Leaf("John")];
    if depth > 0 {
        for p in persons(depth - 1) {
            out.push(call("FindManager", vec![p.clone()]));
            out.push(call("singleton", vec![call("FindFriends", vec![p])]));
        }
    }
    out
}

fn dates(depth: usize) -> Vec<Tree> {
    let mut out = vec![Tree::Leaf("Monday"), Tree::Leaf("Friday")];
    if depth > 0 {
        out.push(call("Today", vec![]));
        out.push(call("NextDOW", vec![Tree::Leaf("Friday")]));
    }
    out
}

fn locations(depth: usize) -> Vec<Tree> {
    let mut out = vec![Tree::Leaf("Room 101")];
    if depth > 0 {
        for p in persons(depth - 1) {
            out.push(call(":location", vec![call("FindEvents", vec![call("with_attendee", vec![p])])]));
        }
    }
    out
}

fn compositions(depth: usize) -> Vec<Tree> {
    let mut preds = Vec::new();
    preds.extend(persons(depth).into_iter().map(|p| call("with_attendee", vec![p])));
    preds.extend(dates(depth).into_iter().map(|d| call("starts_at", vec![d])));
    preds.extend(locations(depth).into_iter().map(|l| call("at_location", vec![l])));
    let mut constraints = preds.clone();
    for a in &preds {
        for b in &preds {
            constraints.push(call("AND", vec![a.clone(), b.clone()]));
        }
    }
    constraints.into_iter().map(|c| call("CreateEvent", vec![c])).collect()
}

fn criterion_6() -> Outcome {
    let reg = smcal::registry();
    let trees = compositions(2);
    let keys: Vec<String> = trees
        .iter()
        .map(|t| structure_key(&parse_expression(&text(t), &reg).expect("enumerated expression parses"), &reg))
        .collect();
    let (mut false_merges, mut false_splits) = (0usize, 0usize);
    for i in 0..trees.len() {
        for j in i + 1..trees.len() {
            match (keys[i] == keys[j], same_structure(&trees[i], &trees[j])) {
                (true, false) => false_merges += 1,
                (false, true) => false_splits += 1,
                _ => {}
            }
        }
    }
    let classes = keys.iter().collect::<HashSet<_>>().len();
    Outcome::new(
        false_merges == 0 && false_splits == 0,
        format!(
            "{} expressions, {classes} structures: {false_merges} false merges, {false_splits} false splits",
            trees.len()
        ),
    )
}

fn criterion_7(out: &Path) -> Outcome {
    // A thousandth of the documented instance: 130K originals, 1.2M augmented.
    let (n_orig, n_aug, factor) = (130usize, 1_200usize, 5usize);
    let orig: String = (0..n_orig).map(|i| format!("original {i}\tCreateEvent( has_subject( o{i} ) )\n")).collect();
    let aug: String = (0..n_aug).map(|i| format!("augmented {i}\tCreateEvent( has_subject( a{i} ) )\n")).collect();
    let (po, pa, pout) = (out.join("orig.tsv"), out.join("aug.tsv"), out.join("mixed.tsv"));
    fs::write(&po, orig).unwrap();
    fs::write(&pa, aug).unwrap();
    let spec = MixSpec {
        original_path: po,
        augmented_path: pa,
        upsample_factor: factor,
        shuffle_seed: 9,
    };
    let written = mix(&spec, &pout).unwrap();
    let text = fs::read_to_string(&pout).unwrap();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for line in text.lines() {
        *counts.entry(line).or_default() += 1;
    }
    let multiplicities_ok = counts
        .iter()
        .all(|(l, &c)| c == if l.starts_with("original") { factor } else { 1 })
        && counts.len() == n_orig + n_aug;
    let expected = factor * n_orig + n_aug;
    let full_scale = factor * 130_000 + 1_200_000;
    Outcome::new(
        written == expected && text.lines().count() == expected && multiplicities_ok && full_scale == 1_850_000,
        format!("{written} lines = {factor}*{n_orig} + {n_aug}; full scale {factor}*130000 + 1200000 = {full_scale}"),
    )
}

fn criterion_8(first: &Path) -> Outcome {
    let second = tempfile::tempdir().unwrap();
    let dir = second.path();
    fs::write(dir.join("c2.jsonl"), jsonl(&convergence_run(Execution::Sequential))).unwrap();
    fs::write(dir.join("c3.jsonl"), jsonl(&diversity_run())).unwrap();
    fs::write(dir.join("c4.jsonl"), pinned_run().to_json_line() + "\n").unwrap();
    fs::write(dir.join("c5.tsv"), composition_run(Execution::Sequential).0).unwrap();
    let mut differing = Vec::new();
    let mut bytes = 0;
    for f in ["c2.jsonl", "c3.jsonl", "c4.jsonl", "c5.tsv"] {
        let (a, b) = (fs::read(first.join(f)).unwrap(), fs::read(dir.join(f)).unwrap());
        bytes += a.len();
        if a != b || a.is_empty() {
            differing.push(f);
        }
    }
    Outcome::new(
        differing.is_empty(),
        format!("re-ran criteria 2-5 sequentially: {bytes} bytes compared, differing files {differing:?}"),
    )
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temporary directory");
    let out = dir.path();
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "fixture round-trip", criterion_1()),
        (2, "agenda convergence", criterion_2(out)),
        (3, "path diversity", criterion_3(out)),
        (4, "mistake/ignore dialogue shape", criterion_4(out)),
        (5, "composition soundness", criterion_5(out)),
        (6, "dedup oracle", criterion_6()),
        (7, "mix arithmetic", criterion_7(out)),
    ];
    results.push((8, "determinism", criterion_8(out)));
    let mut failed = 0;
    for (n, name, o) in &results {
        println!("criterion {n} ({name}): {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("criterion 9 (translation accuracy): not run - needs seq2seq training on the full calendar dataset");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
