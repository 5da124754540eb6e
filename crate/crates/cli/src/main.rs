use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};

use dfgen::composer::{Composer, CompositionConfig};
use dfgen::corpus::{self, dedupe, read_pairs, split_pair_line, write_lines, CorpusPair, MixSpec};
use dfgen::mwoz::{self, RestaurantDb};
use dfgen::nlg::Templates;
use dfgen::parallel::Execution;
use dfgen::simulator::{MwozBundle, Persona};
use dfgen::smcal::{self, KnowledgeBase};
use dfgen::{equivalent, parse_expression, serialize, typecheck, Registry};

const EPOCH_VAR: &str = "DFGEN_EPOCH";

#[derive(Parser)]
#[command(name = "dfgen", version, about = "Generate and post-process dataflow dialogue corpora")]
struct Cli {
    /// Run batches on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Smcal,
    Mwoz,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate restaurant-booking dialogues toward agendas (JSON lines).
    GenerateMwoz {
        /// One agenda expression per line; the built-in agendas if omitted.
        #[arg(long)]
        agendas: Option<PathBuf>,
        /// Persona JSON; missing fields take their defaults.
        #[arg(long)]
        persona: Option<PathBuf>,
        /// Restaurant table (JSON array); the built-in one if omitted.
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = dfgen::simulator::DEFAULT_MAX_TURNS)]
        max_turns: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate first-turn calendar requests (nl TAB expression).
    GenerateSmcal {
        /// Knowledge base JSON; the built-in one if omitted.
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        max_depth: usize,
        #[arg(long, default_value_t = 0.8)]
        p_replace: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep only the first pair of each structure.
        #[arg(long)]
        unique: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep the first pair of every expression structure.
    Dedupe {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "smcal")]
        domain: DomainArg,
    },
    /// Upsample the original corpus and shuffle it with the augmented one.
    Mix {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        augmented: PathBuf,
        #[arg(long, default_value_t = 5)]
        upsample: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse, typecheck, serialize and re-parse every expression in a file.
    EvalRoundtrip {
        /// Expressions, one per line, or `nl TAB expression` pairs.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "smcal")]
        domain: DomainArg,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn epoch() -> Result<NaiveDate> {
    match std::env::var(EPOCH_VAR) {
        Ok(s) => NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
            .with_context(|| format!("{EPOCH_VAR} must be YYYY-MM-DD, got `{s}`")),
        Err(_) => Ok(smcal::default_epoch()),
    }
}

fn registry(domain: DomainArg) -> Registry {
    match domain {
        DomainArg::Smcal => smcal::registry(),
        DomainArg::Mwoz => mwoz::registry(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::GenerateMwoz {
            agendas,
            persona,
            db,
            n,
            seed,
            max_turns,
            out,
        } => {
            let mut bundle = MwozBundle::fixture();
            bundle.max_turns = max_turns;
            if let Some(path) = db {
                bundle.db = RestaurantDb::from_json(&read(&path)?)?;
            }
            let text = match &agendas {
                Some(path) => read(path)?,
                None => mwoz::AGENDAS_TXT.to_string(),
            };
            let graphs = mwoz::load_agendas(&text, &bundle.registry)?;
            if graphs.is_empty() {
                bail!("no agendas to run");
            }
            let named: Vec<_> = graphs
                .into_iter()
                .enumerate()
                .map(|(i, g)| (format!("agenda-{}", i + 1), g))
                .collect();
            let persona = match persona {
                Some(path) => Persona::from_json(&read(&path)?)?,
                None => Persona::default(),
            };
            let dialogues = corpus::generate_dialogues(&named, &persona, n, seed, &bundle, exec);
            let failed = dialogues.iter().filter(|d| d.failure.is_some()).count();
            let reached = dialogues.iter().filter(|d| d.reached_target).count();
            let lines: Vec<String> = dialogues.iter().map(|d| d.to_json_line()).collect();
            write_lines(&out, &lines)?;
            eprintln!(
                "wrote {} dialogues to {} ({reached} reached their agenda, {failed} failed)",
                lines.len(),
                out.display()
            );
        }
        Command::GenerateSmcal {
            kb,
            max_depth,
            p_replace,
            n,
            seed,
            unique,
            out,
        } => {
            if !(0.0..=1.0).contains(&p_replace) {
                bail!("--p-replace must lie in [0, 1]");
            }
            let kb = match kb {
                Some(path) => KnowledgeBase::from_json(&read(&path)?)?,
                None => KnowledgeBase::fixture(),
            };
            let composer = Composer::new(smcal::registry(), kb, epoch()?, Templates::builtin());
            let config = CompositionConfig {
                max_depth,
                p_replace,
                ..Default::default()
            };
            let turns = corpus::generate_first_turns(&composer, &config, n, seed, exec)?;
            let pairs = turns.iter().map(|t| CorpusPair::from_turn(t, &composer.registry));
            let lines: Vec<String> = if unique {
                dedupe(pairs).map(|p| p.to_tsv()).collect()
            } else {
                pairs.map(|p| p.to_tsv()).collect()
            };
            write_lines(&out, &lines)?;
            eprintln!("wrote {} pairs to {}", lines.len(), out.display());
        }
        Command::Dedupe { input, out, domain } => {
            let reg = registry(domain);
            let pairs = read_pairs(&read(&input)?, &input.display().to_string(), &reg)?;
            let total = pairs.len();
            let lines: Vec<String> = dedupe(pairs).map(|p| p.to_tsv()).collect();
            write_lines(&out, &lines)?;
            eprintln!("kept {} of {total} pairs", lines.len());
        }
        Command::Mix {
            original,
            augmented,
            upsample,
            seed,
            out,
        } => {
            let spec = MixSpec {
                original_path: original,
                augmented_path: augmented,
                upsample_factor: upsample,
                shuffle_seed: seed,
            };
            let n = corpus::mix(&spec, &out)?;
            eprintln!("wrote {n} lines to {}", out.display());
        }
        Command::EvalRoundtrip { input, domain } => {
            let reg = registry(domain);
            let text = read(&input)?;
            let mut failures = 0;
            let mut total = 0;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                total += 1;
                let expr = split_pair_line(line).map(|(_, df)| df).unwrap_or(line);
                if let Err(e) = roundtrip(expr, &reg) {
                    failures += 1;
                    eprintln!("{}:{}: {e:#}", input.display(), i + 1);
                }
            }
            eprintln!("{} of {total} expressions round-trip", total - failures);
            if failures > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn roundtrip(expr: &str, reg: &Registry) -> Result<()> {
    let mut g = parse_expression(expr, reg)?;
    typecheck(&mut g, reg)?;
    let text = serialize(&g, reg);
    let again = parse_expression(&text, reg).with_context(|| format!("re-parsing `{text}`"))?;
    if !equivalent(&g, &again, reg) {
        bail!("`{text}` does not re-parse to an equivalent graph");
    }
    Ok(())
}
