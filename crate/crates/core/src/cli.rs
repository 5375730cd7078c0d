//! The `hyperkg` command line.
//!
//! Exit status: 0 on success, 2 on a usage error, 3 when the scripted
//! provider has no fixture for a request, 1 for anything else.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluator::{build_report, evaluate_graphs, pr_curve_csv, verify_facts};
use crate::gateway::{Gateway, ProviderKind};
use crate::model::{load_graph, save_graph, KnowledgeHypergraph};
use crate::pipeline::Pipeline;
use crate::prompts::PromptSet;
use crate::skills::{diff_libraries, SkillLibrary};
use crate::trainer::{load_manifest, run_learning_round};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FIXTURE_MISS: i32 = 3;

pub const EVAL_REPORT_FILE: &str = "eval_report.json";
pub const PR_CURVE_FILE: &str = "pr_curve.csv";
pub const FACTCHECK_FILE: &str = "factcheck.json";

#[derive(Debug, Parser)]
#[command(name = "hyperkg", version, about = "Knowledge hypergraph extraction, skill learning and evaluation")]
pub struct Cli {
    /// Run configuration (TOML, or JSON by extension).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub provider: Option<ProviderArg>,
    /// Fixture directory for the scripted provider.
    #[arg(long, global = true, value_name = "DIR")]
    pub fixtures: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderArg {
    Scripted,
    Live,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract a hypergraph from a text document.
    Extract {
        document: PathBuf,
        /// Skill library to inject.
        #[arg(long, value_name = "LIB")]
        skills: Option<PathBuf>,
    },
    /// Run learning rounds over a training manifest, updating the library.
    Learn {
        manifest: PathBuf,
        #[arg(long, value_name = "LIB")]
        skills: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        rounds: u32,
    },
    /// Score predicted graphs against gold graphs with the same file names.
    Eval {
        pred_dir: PathBuf,
        gold_dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.65, 0.70, 0.75])]
        thresholds: Vec<f64>,
    },
    /// Judge each fact (one per line) against a graph.
    Factcheck { facts: PathBuf, graph: PathBuf },
    /// Inspect skill libraries.
    Library {
        #[command(subcommand)]
        action: LibraryAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum LibraryAction {
    Show { library: PathBuf },
    Diff { before: PathBuf, after: PathBuf },
}

/// Parse `argv` (program name first), run, and return the exit status.
/// Output goes to stdout; diagnostics to stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut out = std::io::stdout().lock();
    match execute(&cli, &mut out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            if let Some(key) = e.fixture_miss_key() {
                eprintln!("error: no fixture for request key {key}: {e}");
                EXIT_FIXTURE_MISS
            } else {
                eprintln!("error: {e}");
                EXIT_FAILURE
            }
        }
    }
}

fn config_for(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.provider {
        Some(ProviderArg::Scripted) => cfg.gateway.provider = ProviderKind::Scripted,
        Some(ProviderArg::Live) => cfg.gateway.provider = ProviderKind::Live,
        None => {}
    }
    if let Some(dir) = &cli.fixtures {
        cfg.paths.fixtures_dir = Some(dir.clone());
    }
    if let Some(dir) = &cli.output_dir {
        cfg.paths.output_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "document".to_string(), |s| s.to_string_lossy().into_owned())
}

/// Run a parsed command, writing human-readable output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn std::io::Write) -> Result<()> {
    if let Command::Library { action } = &cli.command {
        return library(action, out);
    }
    let cfg = config_for(cli)?;
    let gateway = Gateway::from_config(&cfg.effective_gateway())?;
    let prompts = PromptSet::from_config(&cfg.prompts)?;
    let pipeline = Pipeline {
        gateway: &gateway,
        prompts: &prompts,
        chunking: &cfg.chunking,
        extraction: &cfg.extraction,
        dedup: &cfg.dedup,
    };
    let say = |out: &mut dyn std::io::Write, line: String| {
        writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
    };

    match &cli.command {
        Command::Extract { document, skills } => {
            let text = std::fs::read_to_string(document).map_err(|e| Error::io(document, e))?;
            let lib_path = skills.as_ref().or(cfg.paths.skill_library.as_ref());
            let library = match lib_path {
                Some(p) if !p.exists() => {
                    return Err(Error::InvalidInput(format!("skill library {} not found", p.display())))
                }
                Some(p) => SkillLibrary::load(p)?,
                None => SkillLibrary::new(),
            };
            let id = stem(document);
            let run = pipeline.run_default(&id, &text, &library)?;
            for w in &run.warnings {
                log::warn!("{w}");
            }
            let dir = cfg.ensure_output_dir()?;
            let path = dir.join(format!("{id}.json"));
            save_graph(&run.graph, &path)?;
            say(
                out,
                format!(
                    "{}: {} entities, {} hyperedges -> {}",
                    id,
                    run.graph.entity_count(),
                    run.graph.hyperedges().len(),
                    path.display()
                ),
            )
        }
        Command::Learn { manifest, skills, rounds } => {
            let docs = load_manifest(manifest)?;
            let mut library = SkillLibrary::load(skills)?;
            let dir = cfg.ensure_output_dir()?.to_path_buf();
            for _ in 0..*rounds {
                let (next, report) = run_learning_round(&docs, &library, &pipeline, &cfg.rollout)?;
                next.save_atomic(skills)?;
                let path = dir.join(format!("round-{}.json", report.round));
                write_text(&path, &to_pretty(&report))?;
                say(
                    out,
                    format!(
                        "round {}: library {} -> {} skills, {} path inductions, {} hindsight reflections -> {}",
                        report.round,
                        report.library_size_before,
                        report.library_size_after,
                        report.path_inductions(),
                        report.hindsight_reflections(),
                        path.display()
                    ),
                )?;
                library = next;
            }
            Ok(())
        }
        Command::Eval {
            pred_dir,
            gold_dir,
            thresholds,
        } => {
            let mut thresholds = thresholds.clone();
            thresholds.sort_by(f64::total_cmp);
            thresholds.dedup();
            let docs = eval_pairs(pred_dir, gold_dir, &gateway)?;
            let report = build_report(&docs, &thresholds, gateway.embedding_model_id())?;
            let dir = cfg.ensure_output_dir()?;
            write_text(&dir.join(EVAL_REPORT_FILE), &to_pretty(&report))?;
            write_text(&dir.join(PR_CURVE_FILE), &pr_curve_csv(&report.pr_curve()))?;
            say(out, "threshold  micro_p  micro_r  micro_f1  macro_f1".into())?;
            for c in &report.corpus {
                say(
                    out,
                    format!(
                        "{:<9.2}  {:.4}   {:.4}   {:.4}    {:.4}",
                        c.threshold, c.micro.precision, c.micro.recall, c.micro.f1, c.macro_avg.f1
                    ),
                )?;
            }
            Ok(())
        }
        Command::Factcheck { facts, graph } => {
            let text = std::fs::read_to_string(facts).map_err(|e| Error::io(facts, e))?;
            let facts: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            let graph = load_graph(graph)?;
            let report = verify_facts(&facts, &graph, &gateway, &prompts, &cfg.factcheck)?;
            let path = cfg.ensure_output_dir()?.join(FACTCHECK_FILE);
            write_text(&path, &to_pretty(&report))?;
            say(
                out,
                format!(
                    "{}/{} facts supported, accuracy {:.4} -> {}",
                    report.supported,
                    report.total,
                    report.accuracy,
                    path.display()
                ),
            )
        }
        Command::Library { .. } => unreachable!("handled above"),
    }
}

/// Pair every `*.json` in `gold_dir` with the same name in `pred_dir`. A
/// missing prediction counts as an empty graph.
fn eval_pairs(
    pred_dir: &Path,
    gold_dir: &Path,
    gateway: &Gateway,
) -> Result<Vec<(String, crate::evaluator::ScoredMatch)>> {
    let mut names: Vec<String> = std::fs::read_dir(gold_dir)
        .map_err(|e| Error::io(gold_dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::InvalidInput(format!("no gold graphs in {}", gold_dir.display())));
    }
    names
        .into_iter()
        .map(|name| {
            let gold = load_graph(gold_dir.join(&name))?;
            let pred_path = pred_dir.join(&name);
            let pred = if pred_path.exists() {
                load_graph(&pred_path)?
            } else {
                log::warn!("no prediction for {name}; scoring an empty graph");
                KnowledgeHypergraph::empty(gold.source_id())
            };
            Ok((name, evaluate_graphs(&pred, &gold, gateway)?))
        })
        .collect()
}

fn library(action: &LibraryAction, out: &mut dyn std::io::Write) -> Result<()> {
    let io = |e| Error::io("<stdout>", e);
    match action {
        LibraryAction::Show { library } => {
            if !library.exists() {
                return Err(Error::InvalidInput(format!("{} not found", library.display())));
            }
            let lib = SkillLibrary::load(library)?;
            writeln!(out, "round {}, {} skills", lib.round(), lib.len()).map_err(io)?;
            for s in lib.skills() {
                writeln!(out, "{} (round {}, from {:?})", s.id, s.created_round, s.lineage).map_err(io)?;
                writeln!(out, "  trigger: {}", s.trigger).map_err(io)?;
                writeln!(out, "  action:  {}", s.action).map_err(io)?;
            }
            Ok(())
        }
        LibraryAction::Diff { before, after } => {
            let d = diff_libraries(&SkillLibrary::load(before)?, &SkillLibrary::load(after)?);
            if d.is_empty() {
                return writeln!(out, "no differences").map_err(io);
            }
            for s in &d.removed {
                writeln!(out, "- {}: {} => {}", s.id, s.trigger, s.action).map_err(io)?;
            }
            for (b, a) in &d.changed {
                writeln!(out, "~ {}: {} => {}", b.id, b.trigger, b.action).map_err(io)?;
                writeln!(out, "  {}: {} => {}", a.id, a.trigger, a.action).map_err(io)?;
            }
            for s in &d.added {
                writeln!(out, "+ {}: {} => {}", s.id, s.trigger, s.action).map_err(io)?;
            }
            Ok(())
        }
    }
}
