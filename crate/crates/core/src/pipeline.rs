//! End-to-end stages over the on-disk layout:
//!
//! ```text
//! <out>/ctm/<project>.json                    context type map
//! <out>/<project>/mock_tests/manifest.json    emitted tests and their focals
//! <out>/<project>/mock_tests/<class>/<method>/inv_<n>_test.py
//! <out>/<project>/outcomes.json               per-fragment validation results
//! <out>/report.json, <out>/report.csv         outcome table
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, ProjectConfig, ResolverMode, TranslatorMode};
use crate::fragments::{FragmentsError, ProjectFragments};
use crate::harness::{Executor, TestRequest};
use crate::mockgen::{disambiguate, plan_mock_test, EmitError, Emitter};
use crate::orchestrator::{
    build_order, classify_tests, compute_report, coverage, validate_fragment, waves, CallGraph, FixtureTranslator, FragmentRow, MockTestCase,
    ProjectReport, RemoteTranslator, Report, TestResults, TranslationRequest, Translator, ValidationOutcome,
};
use crate::support::ClassOverride;
use crate::trace::{extract_invocations, methods_in, parse_trace, TraceError, TraceLog};
use crate::typeres::{
    build_ctm, collect_types, BuildOptions, BuildSummary, ContextTypeMap, DocCache, DocSource, FileTreeDocs, JavadocSource, RemoteResolver, Resolver,
    RuleTableResolver,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Fragments(#[from] FragmentsError),
    #[error("{path}: {source}")]
    Trace { path: String, source: TraceError },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
    #[error(transparent)]
    Emit(#[from] EmitError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.display().to_string(), source }
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Invalid { path: path.display().to_string(), msg: e.to_string() })
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("pipeline records always serialize");
    s.push('\n');
    s
}

/// Every `*.trace` file under `dir`, parsed and validated, in path order.
pub fn load_traces(dir: &Path) -> Result<Vec<(PathBuf, TraceLog)>, PipelineError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "trace"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(&p).map_err(io_err(&p))?;
            let log = parse_trace(&bytes).map_err(|source| PipelineError::Trace { path: p.display().to_string(), source })?;
            Ok((p, log))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Type resolution

pub fn make_resolver(cfg: &Config) -> Result<Box<dyn Resolver>, PipelineError> {
    let r = &cfg.resolver;
    Ok(match r.mode {
        ResolverMode::Rules => match &r.rules {
            Some(p) => Box::new(RuleTableResolver::load(p).map_err(|msg| PipelineError::Invalid { path: p.display().to_string(), msg })?),
            None => Box::new(RuleTableResolver::builtin()),
        },
        ResolverMode::Remote => Box::new(RemoteResolver::new(
            r.url.as_deref().unwrap_or_default(),
            r.model.as_deref().unwrap_or("gpt-4o"),
            Duration::from_secs_f64(r.timeout_secs),
        )),
    })
}

/// Builds the CTM for `projects` on top of the stored one and saves it.
pub fn resolve_types(cfg: &Config, projects: &[&ProjectConfig], resolver: &dyn Resolver, offline: bool) -> Result<BuildSummary, PipelineError> {
    let frags = projects.iter().map(|p| ProjectFragments::load(&p.schema_path())).collect::<Result<Vec<_>, _>>()?;
    let ctm_dir = cfg.ctm_dir();
    let mut prior = ContextTypeMap::load(&ctm_dir).map_err(io_err(&ctm_dir))?;
    // Selected projects are rebuilt from scratch; others are kept.
    for p in projects {
        prior.projects.remove(&p.name);
    }
    let files = cfg.resolver.docs_dir.as_ref().map(|root| FileTreeDocs { root: root.clone() });
    let online = JavadocSource { timeout: Duration::from_secs_f64(cfg.resolver.timeout_secs), ..JavadocSource::default() };
    let docs: Option<&dyn DocSource> = match (&files, cfg.resolver.online_docs) {
        (Some(f), _) => Some(f),
        (None, true) => Some(&online),
        (None, false) => None,
    };
    let opts = BuildOptions { budget: cfg.budget, docs, cache: DocCache { dir: Some(cfg.out_dir.join("doc_cache")) }, offline };
    let summary = build_ctm(&frags, resolver, &opts, prior);
    summary.ctm.save(&ctm_dir).map_err(io_err(&ctm_dir))?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Mock generation

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the mock-test directory.
    pub file: String,
    pub fragment_id: String,
    pub focal_class: String,
    pub focal_method: String,
    pub trace_test_id: String,
    pub invocation_index: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tests: Vec<ManifestEntry>,
}

pub const MANIFEST: &str = "manifest.json";

/// Emits one test per application-method invocation in the project's traces,
/// replacing any previous output.
pub fn gen_mocks(cfg: &Config, project: &ProjectConfig, ctm: &ContextTypeMap) -> Result<Manifest, PipelineError> {
    let frags = ProjectFragments::load(&project.schema_path())?;
    let traces = load_traces(&project.trace_dir)?;
    let emitter = Emitter::new(&frags);
    let mut emitted = Vec::new();
    let mut entries = Vec::new();
    for (_, log) in &traces {
        let app: std::collections::HashSet<_> = methods_in(log).into_iter().filter(|m| frags.is_application_type(&m.class_name)).collect();
        for inv in extract_invocations(log) {
            if !app.contains(&inv.method) {
                continue;
            }
            let spec = plan_mock_test(inv, log, &app);
            let t = emitter.emit(&spec, ctm)?;
            entries.push(ManifestEntry {
                file: String::new(),
                fragment_id: t.focal_fragment_id.clone(),
                focal_class: inv.method.class_name.clone(),
                focal_method: inv.method.method_name.clone(),
                trace_test_id: log.test_id.clone(),
                invocation_index: inv.invocation_index,
            });
            emitted.push(t);
        }
    }
    disambiguate(&mut emitted);
    let dir = cfg.mock_test_dir(&project.name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
    }
    for (t, e) in emitted.iter().zip(entries.iter_mut()) {
        write(&dir.join(&t.file_name), &t.source_text)?;
        e.file = t.file_name.clone();
    }
    let manifest = Manifest { tests: entries };
    write(&dir.join(MANIFEST), &pretty(&manifest))?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// Validation

pub fn make_translator(cfg: &Config, project: &ProjectConfig) -> Box<dyn Translator> {
    let t = &cfg.translator;
    match t.mode {
        TranslatorMode::Fixture => Box::new(FixtureTranslator { dirs: project.translations.clone() }),
        TranslatorMode::Remote => Box::new(RemoteTranslator::new(
            t.url.as_deref().unwrap_or_default(),
            t.model.as_deref().unwrap_or("gpt-4o"),
            Duration::from_secs_f64(t.timeout_secs),
        )),
    }
}

/// Stored per-fragment results of one project.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectOutcomes {
    pub project: String,
    pub order: Vec<String>,
    pub outcomes: Vec<ValidationOutcome>,
}

/// Validates every method fragment of `project` against its emitted mock
/// tests and assembles its report row.
pub fn validate_project(
    cfg: &Config,
    project: &ProjectConfig,
    translator: &dyn Translator,
    executor: &dyn Executor,
) -> Result<(ProjectReport, ProjectOutcomes), PipelineError> {
    let frags = ProjectFragments::load(&project.schema_path())?;
    let ctm_dir = cfg.ctm_dir();
    let ctm = ContextTypeMap::load(&ctm_dir).map_err(io_err(&ctm_dir))?;
    let test_dir = cfg.mock_test_dir(&project.name);
    let manifest_path = test_dir.join(MANIFEST);
    let manifest: Manifest = if manifest_path.exists() { read_json(&manifest_path)? } else { Manifest::default() };
    let results: TestResults = match &project.test_results {
        Some(p) => read_json(p)?,
        None => TestResults::default(),
    };

    let mut tests_of: BTreeMap<&str, Vec<MockTestCase>> = BTreeMap::new();
    for e in &manifest.tests {
        tests_of.entry(e.fragment_id.as_str()).or_default().push(MockTestCase {
            test_id: e.file.clone(),
            path: test_dir.join(&e.file),
            nondet: project.nondet_allowlist.contains(&e.fragment_id),
        });
    }
    let occurrences = collect_types(&frags);
    let methods: Vec<_> = frags.methods().collect();
    let graph = CallGraph::from_fragments(methods.iter().copied());
    let schedule = build_order(&graph);

    let mut outcomes: BTreeMap<String, ValidationOutcome> = BTreeMap::new();
    for wave in waves(&graph, &schedule) {
        let done: Vec<ValidationOutcome> = wave
            .par_iter()
            .map(|id| {
                let f = frags.fragment(id).expect("scheduled ids come from the project");
                let types = occurrences
                    .iter()
                    .filter(|o| o.fragment_id == f.id)
                    .filter_map(|o| ctm.lookup_occurrence(o).map(|m| (o.source_type.clone(), m.clone())))
                    .collect();
                let base = TranslationRequest {
                    fragment_id: f.id.clone(),
                    class: f.class.clone(),
                    name: f.name.clone(),
                    source_code: f.code.clone(),
                    types,
                    feedback: None,
                    attempt: 0,
                };
                let run = |t: &MockTestCase, source: &str| {
                    executor.run(&TestRequest {
                        test_file: t.path.clone(),
                        translated_dir: project.translated_src_dir.clone(),
                        overrides: vec![ClassOverride { class: f.class.clone(), source: source.to_string() }],
                        equality: cfg.equality,
                        focal_class: f.class.clone(),
                        focal_method: f.name.clone(),
                        timeout_secs: cfg.test_timeout_secs,
                    })
                };
                let tests = tests_of.get(f.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
                validate_fragment(&base, translator, tests, &run, cfg.budget)
            })
            .collect();
        for o in done {
            outcomes.insert(o.fragment_id.clone(), o);
        }
    }

    let cover = coverage(&results);
    let rows: Vec<FragmentRow> = outcomes
        .values()
        .map(|o| {
            let (test_class, failure) = classify_tests(cover.get(&o.fragment_id).map(Vec::as_slice).unwrap_or(&[]));
            FragmentRow { mock_class: o.mock_class, syntax_ok: o.syntax_ok, test_class, failure }
        })
        .collect();
    let report = compute_report(&project.name, &rows, &results);
    let stored = ProjectOutcomes { project: project.name.clone(), order: schedule.order, outcomes: outcomes.into_values().collect() };
    write(&cfg.project_dir(&project.name).join("outcomes.json"), &pretty(&stored))?;
    Ok((report, stored))
}

pub fn report_paths(cfg: &Config) -> (PathBuf, PathBuf) {
    (cfg.out_dir.join("report.json"), cfg.out_dir.join("report.csv"))
}

pub fn write_report(cfg: &Config, report: &Report) -> Result<(), PipelineError> {
    let (doc, table) = report_paths(cfg);
    write(&doc, &report.to_document())?;
    write(&table, &report.to_csv())
}

/// The stored report, or an empty one when none was written yet.
pub fn read_report(cfg: &Config) -> Result<Report, PipelineError> {
    let (doc, _) = report_paths(cfg);
    if !doc.exists() {
        return Ok(Report::default());
    }
    read_json(&doc)
}
