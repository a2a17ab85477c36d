//! `xlv`: runs the validation pipeline stages over the projects of a
//! configuration file.
//!
//! Exit codes: 0 ok, 1 pipeline error, 2 resolver transport failure,
//! 3 test emission failure, 4 usage error.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use xlv_core::config::{Config, ResolverMode};
use xlv_core::harness::{Executor, InProcess, Subprocess, TestRequest};
use xlv_core::orchestrator::{MockClass, Report};
use xlv_core::pipeline::{self, PipelineError};
use xlv_core::typeres::{ContextTypeMap, RuleTableResolver};

const EXIT_PIPELINE: u8 = 1;
const EXIT_TRANSPORT: u8 = 2;
const EXIT_EMIT: u8 = 3;
const EXIT_USAGE: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "xlv", version, about = "Validate Java-to-Python method translations against recorded executions")]
struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, default_value = "xlv.toml")]
    config: PathBuf,
    /// Only process the named project.
    #[arg(long, global = true)]
    project: Option<String>,
    /// Never touch the network: no documentation fetches, rule-table resolver.
    #[arg(long, global = true)]
    offline: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Resolve every library type use to a target type and store the map.
    ResolveTypes,
    /// Emit one mock test per recorded application-method invocation.
    GenMocks,
    /// Translate, check and repair every method fragment; write the report.
    Validate,
    /// Print the stored report.
    Report {
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Run one mock test from a JSON request on stdin (used by `validate`).
    #[command(hide = true)]
    RunTest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Doc,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            let emit = e.chain().any(|c| matches!(c.downcast_ref::<PipelineError>(), Some(PipelineError::Emit(_))));
            ExitCode::from(if emit { EXIT_EMIT } else { EXIT_PIPELINE })
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    if let Command::RunTest = cli.command {
        return run_test();
    }
    let cfg = Config::load(&cli.config)?;
    let projects = cfg.select(cli.project.as_deref())?;
    match &cli.command {
        Command::ResolveTypes => {
            let resolver = if cli.offline && cfg.resolver.mode == ResolverMode::Remote {
                Box::new(RuleTableResolver::builtin())
            } else {
                pipeline::make_resolver(&cfg)?
            };
            let s = pipeline::resolve_types(&cfg, &projects, resolver.as_ref(), cli.offline)?;
            println!(
                "{} type uses: {} resolved, {} from other usages, {} fallback; {} transport failures",
                s.occurrences, s.resolved, s.global, s.fallback, s.transport_failures
            );
            println!("type map written to {}", cfg.ctm_dir().display());
            Ok(if s.transport_failures > 0 { EXIT_TRANSPORT } else { 0 })
        }
        Command::GenMocks => {
            let dir = cfg.ctm_dir();
            let ctm = ContextTypeMap::load(&dir).with_context(|| format!("loading type map from {}", dir.display()))?;
            for p in &projects {
                let m = pipeline::gen_mocks(&cfg, p, &ctm)?;
                let focals: std::collections::BTreeSet<&str> = m.tests.iter().map(|e| e.fragment_id.as_str()).collect();
                println!("{}: {} mock tests for {} focal methods in {}", p.name, m.tests.len(), focals.len(), cfg.mock_test_dir(&p.name).display());
            }
            Ok(0)
        }
        Command::Validate => {
            let program = std::env::current_exe().context("locating the test runner")?;
            let executor = Subprocess { program, args: vec!["run-test".into()] };
            let mut report = Report::default();
            for p in &projects {
                let translator = pipeline::make_translator(&cfg, p);
                let (row, outcomes) = pipeline::validate_project(&cfg, p, translator.as_ref(), &executor)?;
                let count = |c: MockClass| outcomes.outcomes.iter().filter(|o| o.mock_class == c).count();
                println!(
                    "{}: {} fragments, {} MS, {} MF, {} NM",
                    p.name,
                    outcomes.outcomes.len(),
                    count(MockClass::MS),
                    count(MockClass::MF),
                    count(MockClass::NM)
                );
                report.projects.push(row);
            }
            pipeline::write_report(&cfg, &report)?;
            println!("report written to {}", pipeline::report_paths(&cfg).0.display());
            Ok(0)
        }
        Command::Report { format } => {
            let report = pipeline::read_report(&cfg)?;
            let text = match format {
                Format::Table => report.to_table(),
                Format::Doc => report.to_document(),
            };
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(0)
        }
        Command::RunTest => unreachable!("handled before loading the configuration"),
    }
}

/// The error chain joined by ": ", skipping causes the previous message
/// already spells out.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn run_test() -> anyhow::Result<u8> {
    let mut body = String::new();
    std::io::stdin().read_to_string(&mut body).context("reading test request")?;
    let req: TestRequest = serde_json::from_str(&body).context("parsing test request")?;
    let outcome = InProcess.run(&req);
    println!("{}", serde_json::to_string(&outcome)?);
    Ok(0)
}
