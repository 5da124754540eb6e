//! Training-pair corpora: structural dedup, batch generation and the
//! upsample-and-mix step.
//!
//! Pair files are UTF-8, one `nl \t df` pair per line.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::composer::{ComposeError, Composer, CompositionConfig, FirstTurn};
use crate::error::DfError;
use crate::graph::DataflowGraph;
use crate::parallel::{item_rng, item_seed, map_indexed, Execution};
use crate::parse::parse_expression;
use crate::registry::Registry;
use crate::serialize::{render, RenderOptions};
use crate::simulator::{run_dialogue, Dialogue, MwozBundle, Persona};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: expected `nl<TAB>expression`")]
    MalformedLine { file: String, line: usize },
    #[error("{file}:{line}: {source}")]
    Parse {
        file: String,
        line: usize,
        #[source]
        source: DfError,
    },
    #[error("upsample factor must be at least 1")]
    ZeroFactor,
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

/// Canonical text with every terminal masked as `_` and commutative
/// children sorted: two expressions share a structure iff keys are equal.
pub fn structure_key(g: &DataflowGraph, reg: &Registry) -> String {
    render(
        g,
        reg,
        g.root(),
        RenderOptions {
            results: false,
            mask_terminals: true,
            sort_commutative: true,
        },
    )
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusPair {
    pub nl: String,
    pub df: String,
    pub structure_key: String,
}

impl CorpusPair {
    pub fn new(nl: impl Into<String>, df: impl Into<String>, reg: &Registry) -> Result<Self, DfError> {
        let df = df.into();
        let g = parse_expression(&df, reg)?;
        Ok(CorpusPair {
            nl: nl.into(),
            structure_key: structure_key(&g, reg),
            df,
        })
    }

    pub fn from_turn(turn: &FirstTurn, reg: &Registry) -> Self {
        CorpusPair {
            nl: turn.nl.clone(),
            df: turn.expr.clone(),
            structure_key: structure_key(&turn.graph, reg),
        }
    }

    pub fn to_tsv(&self) -> String {
        format!("{}\t{}", self.nl, self.df)
    }
}

/// Splits one pair line. Exactly one tab and a nonempty expression.
pub fn split_pair_line(line: &str) -> Option<(&str, &str)> {
    let (nl, df) = line.split_once('\t')?;
    (!df.contains('\t') && !df.trim().is_empty()).then_some((nl, df))
}

/// Reads a pair file, computing structure keys against `reg`.
pub fn read_pairs(text: &str, file: &str, reg: &Registry) -> Result<Vec<CorpusPair>, CorpusError> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let (nl, df) = split_pair_line(line).ok_or(CorpusError::MalformedLine {
                file: file.to_string(),
                line: i + 1,
            })?;
            CorpusPair::new(nl, df, reg).map_err(|source| CorpusError::Parse {
                file: file.to_string(),
                line: i + 1,
                source,
            })
        })
        .collect()
}

/// First pair per structure key, in input order.
pub struct Dedupe<I> {
    inner: I,
    seen: HashSet<String>,
}

impl<I> Dedupe<I> {
    /// Distinct structures seen so far.
    pub fn unique(&self) -> usize {
        self.seen.len()
    }
}

impl<I: Iterator<Item = CorpusPair>> Iterator for Dedupe<I> {
    type Item = CorpusPair;

    fn next(&mut self) -> Option<CorpusPair> {
        for pair in self.inner.by_ref() {
            if !self.seen.contains(&pair.structure_key) {
                self.seen.insert(pair.structure_key.clone());
                return Some(pair);
            }
        }
        None
    }
}

pub fn dedupe<I: IntoIterator<Item = CorpusPair>>(stream: I) -> Dedupe<I::IntoIter> {
    Dedupe {
        inner: stream.into_iter(),
        seen: HashSet::new(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixSpec {
    pub original_path: PathBuf,
    pub augmented_path: PathBuf,
    pub upsample_factor: usize,
    pub shuffle_seed: u64,
}

/// `factor` copies of every original line plus every augmented line, in an
/// order fixed by `seed`.
pub fn mix_lines(original: &str, augmented: &str, factor: usize, seed: u64) -> Result<Vec<String>, CorpusError> {
    if factor == 0 {
        return Err(CorpusError::ZeroFactor);
    }
    let check = |text: &str, file: &str| -> Result<Vec<String>, CorpusError> {
        text.lines()
            .enumerate()
            .map(|(i, l)| {
                split_pair_line(l).map(|_| l.to_string()).ok_or(CorpusError::MalformedLine {
                    file: file.to_string(),
                    line: i + 1,
                })
            })
            .collect()
    };
    let orig = check(original, "original")?;
    let aug = check(augmented, "augmented")?;
    let mut out = Vec::with_capacity(factor * orig.len() + aug.len());
    for _ in 0..factor {
        out.extend(orig.iter().cloned());
    }
    out.extend(aug);
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(out)
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs [`mix_lines`] over the files named in `spec` and writes `out`. Returns the
/// number of lines written.
pub fn mix(spec: &MixSpec, out: &Path) -> Result<usize, CorpusError> {
    let original = read(&spec.original_path)?;
    let augmented = read(&spec.augmented_path)?;
    let lines = mix_lines(&original, &augmented, spec.upsample_factor, spec.shuffle_seed).map_err(|e| match e {
        CorpusError::MalformedLine { file, line } => CorpusError::MalformedLine {
            file: if file == "original" { &spec.original_path } else { &spec.augmented_path }
                .display()
                .to_string(),
            line,
        },
        other => other,
    })?;
    write_lines(out, &lines)?;
    Ok(lines.len())
}

pub fn write_lines(path: &Path, lines: &[String]) -> Result<(), CorpusError> {
    let mut text = lines.join("\n");
    if !lines.is_empty() {
        text.push('\n');
    }
    fs::write(path, text).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `n` first turns; item `i` draws from stream `i` of `seed`.
pub fn generate_first_turns(
    composer: &Composer,
    config: &CompositionConfig,
    n: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<FirstTurn>, CorpusError> {
    map_indexed(n, exec, |i| composer.generate_first_turn(config, &mut item_rng(seed, i as u64)))
        .into_iter()
        .map(|r| r.map_err(CorpusError::from))
        .collect()
}

/// `n` dialogues cycling through `agendas`; dialogue `i` uses agenda
/// `i % len` and a seed derived from `seed` and `i`.
pub fn generate_dialogues(
    agendas: &[(String, DataflowGraph)],
    persona: &Persona,
    n: usize,
    seed: u64,
    bundle: &MwozBundle,
    exec: Execution,
) -> Vec<Dialogue> {
    if agendas.is_empty() {
        return Vec::new();
    }
    map_indexed(n, exec, |i| {
        let (id, agenda) = &agendas[i % agendas.len()];
        run_dialogue(agenda, id, persona, item_seed(seed, i as u64), bundle)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smcal;

    fn pair(df: &str) -> CorpusPair {
        CorpusPair::new("x", df, &smcal::registry()).unwrap()
    }

    #[test]
    fn key_examples() {
        let reg = smcal::registry();
        let k = |s: &str| structure_key(&parse_expression(s, &reg).unwrap(), &reg);
        assert_eq!(k("CreateEvent( with_attendee( Dan ) )"), "CreateEvent( with_attendee( _ ) )");
        assert_eq!(k("CreateEvent( with_attendee( Dan ) )"), k("CreateEvent( with_attendee( John ) )"));
        assert_eq!(
            k("CreateEvent( AND( with_attendee( Dan ) , has_subject( x ) ) )"),
            k("CreateEvent( AND( has_subject( y ) , with_attendee( Kim ) ) )")
        );
        assert_ne!(
            k("CreateEvent( with_attendee( FindManager( Dan ) ) )"),
            k("CreateEvent( with_attendee( FindManager( FindManager( Dan ) ) ) )")
        );
    }

    #[test]
    fn dedupe_keeps_first() {
        let input = vec![
            pair("CreateEvent( with_attendee( Dan ) )"),
            pair("CreateEvent( has_subject( a ) )"),
            pair("CreateEvent( with_attendee( John ) )"),
            pair("CreateEvent( has_subject( b ) )"),
            pair("CreateEvent( starts_at( Today( ) ) )"),
        ];
        let out: Vec<_> = dedupe(input.clone()).collect();
        assert_eq!(out, vec![input[0].clone(), input[1].clone(), input[4].clone()]);
        assert_eq!(dedupe(Vec::new()).count(), 0);
    }

    #[test]
    fn mix_counts_and_errors() {
        let orig: String = (0..10).map(|i| format!("o{i}\tA( )\n")).collect();
        let aug: String = (0..100).map(|i| format!("a{i}\tB( )\n")).collect();
        let out = mix_lines(&orig, &aug, 5, 1).unwrap();
        assert_eq!(out.len(), 150);
        assert_eq!(out, mix_lines(&orig, &aug, 5, 1).unwrap());
        let copy = mix_lines(&orig, "", 1, 3).unwrap();
        let mut sorted = copy.clone();
        sorted.sort();
        let mut expect: Vec<String> = orig.lines().map(str::to_string).collect();
        expect.sort();
        assert_eq!(sorted, expect);
        assert!(matches!(mix_lines(&orig, "no tab here", 5, 1), Err(CorpusError::MalformedLine { line: 1, .. })));
        assert!(matches!(mix_lines(&orig, &aug, 0, 1), Err(CorpusError::ZeroFactor)));
    }
}
