//! Scheduling, the translate/check/repair loop, and outcome classification.
//!
//! Fragments are translated callees-first. Each fragment gets a shared
//! budget of attempts: a syntax error and a failing mock test both cost one
//! attempt and feed their error text into the next request.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::fragments::Fragment;
use crate::harness::{TestOutcome, TestStatus};
use crate::typeres::TypeMapping;

// ---------------------------------------------------------------------------
// Scheduling

/// Caller-to-callee graph over fragment ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallGraph {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeSet<(String, String)>,
}

impl CallGraph {
    pub fn add_edge(&mut self, caller: &str, callee: &str) {
        self.nodes.insert(caller.to_string());
        self.nodes.insert(callee.to_string());
        self.edges.insert((caller.to_string(), callee.to_string()));
    }

    /// Graph over `fragments`; callees outside the set are ignored.
    pub fn from_fragments<'a>(fragments: impl IntoIterator<Item = &'a Fragment>) -> Self {
        let frags: Vec<&Fragment> = fragments.into_iter().collect();
        let mut g = Self::default();
        g.nodes.extend(frags.iter().map(|f| f.id.clone()));
        for f in &frags {
            for c in &f.callees {
                if g.nodes.contains(c) {
                    g.edges.insert((f.id.clone(), c.clone()));
                }
            }
        }
        g
    }
}

/// Translation order plus the back edges dropped to reach it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub order: Vec<String>,
    pub back_edges: BTreeSet<(String, String)>,
}

/// Depth-first search from every unvisited node in lexicographic order,
/// successors in lexicographic order. Edges to a node on the current path
/// are back edges; the post-order of the search is a reverse topological
/// order of the remaining graph, so callees precede callers.
pub fn build_order(g: &CallGraph) -> Schedule {
    let mut succ: BTreeMap<&str, Vec<&str>> = g.nodes.iter().map(|n| (n.as_str(), Vec::new())).collect();
    for (a, b) in &g.edges {
        succ.entry(a).or_default().push(b);
        succ.entry(b).or_default();
    }
    for v in succ.values_mut() {
        v.sort_unstable();
        v.dedup();
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark: BTreeMap<&str, Mark> = succ.keys().map(|k| (*k, Mark::New)).collect();
    let mut order = Vec::with_capacity(succ.len());
    let mut back = BTreeSet::new();
    let roots: Vec<&str> = succ.keys().copied().collect();
    for root in roots {
        if mark[root] != Mark::New {
            continue;
        }
        // Explicit stack of (node, next successor index) avoids recursion limits.
        let mut stack: Vec<(&str, usize)> = vec![(root, 0)];
        mark.insert(root, Mark::Active);
        while let Some((node, i)) = stack.last().copied() {
            let next = succ[node].get(i).copied();
            match next {
                Some(n) => {
                    stack.last_mut().expect("non-empty").1 += 1;
                    match mark[n] {
                        Mark::New => {
                            mark.insert(n, Mark::Active);
                            stack.push((n, 0));
                        }
                        Mark::Active => {
                            back.insert((node.to_string(), n.to_string()));
                        }
                        Mark::Done => {}
                    }
                }
                None => {
                    mark.insert(node, Mark::Done);
                    order.push(node.to_string());
                    stack.pop();
                }
            }
        }
    }
    Schedule { order, back_edges: back }
}

/// Groups `schedule.order` into waves: every retained callee of a fragment is
/// in an earlier wave, so fragments of one wave can run concurrently.
pub fn waves(g: &CallGraph, schedule: &Schedule) -> Vec<Vec<String>> {
    let mut level: BTreeMap<&str, usize> = BTreeMap::new();
    for n in &schedule.order {
        let l = g
            .edges
            .iter()
            .filter(|(a, b)| a == n && !schedule.back_edges.contains(&(a.clone(), b.clone())) && a != b)
            .filter_map(|(_, b)| level.get(b.as_str()).map(|x| x + 1))
            .max()
            .unwrap_or(0);
        level.insert(n, l);
    }
    let depth = level.values().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); depth];
    for n in &schedule.order {
        out[level[n.as_str()]].push(n.clone());
    }
    out
}

// ---------------------------------------------------------------------------
// Translation

/// What a translator is given for one attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationRequest {
    pub fragment_id: String,
    pub class: String,
    pub name: String,
    pub source_code: String,
    /// Resolved target types of the fragment's type uses, with reasoning.
    pub types: Vec<(String, TypeMapping)>,
    /// Error text from the previous attempt.
    pub feedback: Option<String>,
    /// 1-based attempt number.
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranslatorError {
    #[error("no translation for {0}")]
    Missing(String),
    #[error("translator transport failure: {0}")]
    Transport(String),
    #[error("malformed translator reply: {0}")]
    Malformed(String),
}

/// Produces target source text for one fragment: member definitions at
/// class-body indentation zero.
pub trait Translator: Sync {
    fn translate(&self, req: &TranslationRequest) -> Result<String, TranslatorError>;
}

/// File name stem of a fragment's committed translation.
pub fn translation_stem(fragment_id: &str) -> String {
    fragment_id.replace(crate::trace::CONSTRUCTOR_NAME, "__init__").replace(['/', '\\'], "_")
}

/// Reads committed translations. For attempt `k` it looks for `<id>@<k>.py`
/// and then `<id>.py` in each directory in order.
#[derive(Debug, Clone, Default)]
pub struct FixtureTranslator {
    pub dirs: Vec<PathBuf>,
}

impl Translator for FixtureTranslator {
    fn translate(&self, req: &TranslationRequest) -> Result<String, TranslatorError> {
        let stem = translation_stem(&req.fragment_id);
        for d in &self.dirs {
            for name in [format!("{stem}@{}.py", req.attempt), format!("{stem}.py")] {
                if let Ok(text) = std::fs::read_to_string(d.join(&name)) {
                    return Ok(text);
                }
            }
        }
        Err(TranslatorError::Missing(req.fragment_id.clone()))
    }
}

pub const TRANSLATION_PROMPT: &str = "Translate this Java member of class `{class}` into Python. \
Reply with only the Python definition(s) as they would appear inside the class body, without the class header and without indentation.\n\n\
Java:\n{source_code}\n\nResolved types:\n{types}\n{feedback}";

/// Client for an OpenAI-compatible chat endpoint; the API key comes from
/// `XLV_TRANSLATOR_KEY`.
#[derive(Debug, Clone)]
pub struct RemoteTranslator {
    pub url: String,
    pub model: String,
    pub key: Option<String>,
    pub timeout: Duration,
}

impl RemoteTranslator {
    pub fn new(url: &str, model: &str, timeout: Duration) -> Self {
        Self { url: url.into(), model: model.into(), key: std::env::var("XLV_TRANSLATOR_KEY").ok(), timeout }
    }

    pub fn prompt(req: &TranslationRequest) -> String {
        let types: Vec<String> =
            req.types.iter().map(|(src, m)| format!("- {src} -> {} ({}) {}", m.target_type, m.target_imports.join("; "), m.reasoning)).collect();
        let feedback = match &req.feedback {
            Some(f) => format!("\nThe previous translation failed:\n{f}\nFix it."),
            None => String::new(),
        };
        TRANSLATION_PROMPT
            .replace("{class}", &req.class)
            .replace("{source_code}", &req.source_code)
            .replace("{types}", &types.join("\n"))
            .replace("{feedback}", &feedback)
    }
}

/// Strips a fenced code block, if the reply has one.
pub fn extract_code(reply: &str) -> String {
    if let Some(start) = reply.find("```") {
        let after = &reply[start + 3..];
        let body = after.split_once('\n').map_or("", |(_, b)| b);
        if let Some(end) = body.find("```") {
            return body[..end].to_string();
        }
    }
    reply.to_string()
}

impl Translator for RemoteTranslator {
    fn translate(&self, req: &TranslationRequest) -> Result<String, TranslatorError> {
        let body = serde_json::json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": Self::prompt(req)}],
        });
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let mut call = agent.post(&self.url);
        if let Some(k) = &self.key {
            call = call.set("Authorization", &format!("Bearer {k}"));
        }
        let reply: serde_json::Value = call
            .send_json(body)
            .map_err(|e| TranslatorError::Transport(e.to_string()))?
            .into_json()
            .map_err(|e| TranslatorError::Malformed(e.to_string()))?;
        let content = reply
            .pointer("/choices/0/message/content")
            .and_then(serde_json::Value::as_str)
            .ok_or_else(|| TranslatorError::Malformed("reply has no message content".into()))?;
        Ok(extract_code(content))
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MockClass {
    /// No mock tests exist for the fragment.
    NM,
    /// Every mock test passed.
    MS,
    /// Some mock test failed, or no valid translation was obtained.
    MF,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockTestStatus {
    Pass,
    FailAssert,
    FailRuntime,
    SkippedNondet,
}

impl From<TestStatus> for MockTestStatus {
    fn from(s: TestStatus) -> Self {
        match s {
            TestStatus::Pass => Self::Pass,
            TestStatus::AssertionFailure => Self::FailAssert,
            TestStatus::RuntimeError => Self::FailRuntime,
        }
    }
}

/// One mock test of a fragment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockTestCase {
    pub test_id: String,
    pub path: PathBuf,
    pub nondet: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDetail {
    pub test_id: String,
    pub status: MockTestStatus,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub isolation_violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub fragment_id: String,
    pub mock_class: MockClass,
    pub attempts_used: u32,
    /// Whether the final translation passed the syntax check.
    pub syntax_ok: bool,
    pub tests: Vec<TestDetail>,
    /// Last translator or syntax error, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Final translation text, if one was obtained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<String>,
}

/// Syntax check of a class-member translation.
pub fn syntax_check(source: &str, class_name: &str) -> Result<(), String> {
    xlv_runtime::parser::parse_in_class(source, class_name).map(|_| ()).map_err(|e| format!("SyntaxError: {e}"))
}

/// Translate, check and test `base` (with `feedback` and `attempt` filled in
/// per attempt) until every mock test passes or `budget` attempts are used.
/// `run` executes one mock test against one candidate translation.
pub fn validate_fragment(
    base: &TranslationRequest,
    translator: &dyn Translator,
    tests: &[MockTestCase],
    run: &(dyn Fn(&MockTestCase, &str) -> TestOutcome + Sync),
    budget: u32,
) -> ValidationOutcome {
    let class_name = crate::trace::simple_name(&base.class).to_string();
    let mut out = ValidationOutcome {
        fragment_id: base.fragment_id.clone(),
        mock_class: if tests.is_empty() { MockClass::NM } else { MockClass::MF },
        attempts_used: 0,
        syntax_ok: false,
        tests: Vec::new(),
        error: None,
        translation: None,
    };
    let mut feedback: Option<String> = None;
    for attempt in 1..=budget.max(1) {
        out.attempts_used = attempt;
        let req = TranslationRequest { feedback: feedback.clone(), attempt, ..base.clone() };
        let text = match translator.translate(&req) {
            Ok(t) => t,
            Err(e) => {
                out.error = Some(e.to_string());
                out.syntax_ok = false;
                feedback = Some(e.to_string());
                continue;
            }
        };
        out.translation = Some(text.clone());
        if let Err(e) = syntax_check(&text, &class_name) {
            out.syntax_ok = false;
            out.error = Some(e.clone());
            feedback = Some(e);
            continue;
        }
        out.syntax_ok = true;
        out.error = None;
        if tests.is_empty() {
            return out;
        }
        out.tests = tests
            .iter()
            .map(|t| {
                if t.nondet {
                    return TestDetail {
                        test_id: t.test_id.clone(),
                        status: MockTestStatus::SkippedNondet,
                        message: String::new(),
                        isolation_violations: vec![],
                    };
                }
                let r = run(t, &text);
                TestDetail { test_id: t.test_id.clone(), status: r.status.into(), message: r.message, isolation_violations: r.isolation_violations }
            })
            .collect();
        let failed = out.tests.iter().find(|d| matches!(d.status, MockTestStatus::FailAssert | MockTestStatus::FailRuntime));
        match failed {
            None => {
                out.mock_class = MockClass::MS;
                return out;
            }
            Some(f) => feedback = Some(format!("mock test {} failed: {}", f.test_id, f.message)),
        }
    }
    if !tests.is_empty() {
        out.mock_class = MockClass::MF;
    }
    out
}

// ---------------------------------------------------------------------------
// Translated-test classification

/// Result of one translated source test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestRunStatus {
    Pass,
    FailRuntime,
    FailAssert,
    /// The test itself did not compile or load; it executes nothing.
    CompileError,
}

/// One entry of a test-results file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestResult {
    pub test_id: String,
    pub status: TestRunStatus,
    /// Fragment ids the test executes.
    #[serde(default)]
    pub covers: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestResults {
    pub tests: Vec<TestResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestClass {
    NT,
    ATP,
    OTF,
    MTF,
    ATF,
}

/// Dominant failure kind of a failing fragment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureKind {
    RE,
    AF,
}

/// Classification of one fragment from its covering test results.
pub fn classify_tests(results: &[TestRunStatus]) -> (TestClass, Option<FailureKind>) {
    let run: Vec<TestRunStatus> = results.iter().copied().filter(|s| *s != TestRunStatus::CompileError).collect();
    if run.is_empty() {
        return (TestClass::NT, None);
    }
    let re = run.iter().filter(|s| **s == TestRunStatus::FailRuntime).count();
    let af = run.iter().filter(|s| **s == TestRunStatus::FailAssert).count();
    let failed = re + af;
    let class = match failed {
        0 => return (TestClass::ATP, None),
        f if f == run.len() => TestClass::ATF,
        1 => TestClass::OTF,
        _ => TestClass::MTF,
    };
    (class, Some(if re >= af { FailureKind::RE } else { FailureKind::AF }))
}

/// Statuses of the tests covering each fragment.
pub fn coverage(results: &TestResults) -> BTreeMap<String, Vec<TestRunStatus>> {
    let mut out: BTreeMap<String, Vec<TestRunStatus>> = BTreeMap::new();
    for t in &results.tests {
        for f in &t.covers {
            out.entry(f.clone()).or_default().push(t.status);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Reporting

/// A failing bucket: share of fragments, then the runtime-error and
/// assertion-failure shares within the bucket.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Split {
    #[serde(rename = "O")]
    pub overall: f64,
    #[serde(rename = "RE")]
    pub runtime_error: f64,
    #[serde(rename = "AF")]
    pub assertion_failure: f64,
}

/// One row of the outcome table; all values except `amf` are percentages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectReport {
    #[serde(rename = "Subject")]
    pub subject: String,
    #[serde(rename = "AMF")]
    pub amf: usize,
    #[serde(rename = "SyntaxCheck")]
    pub syntax_check: f64,
    #[serde(rename = "NM")]
    pub nm: f64,
    #[serde(rename = "MS")]
    pub ms: f64,
    #[serde(rename = "MF")]
    pub mf: f64,
    #[serde(rename = "NT")]
    pub nt: f64,
    #[serde(rename = "ATP")]
    pub atp: f64,
    #[serde(rename = "OTF")]
    pub otf: Split,
    #[serde(rename = "MTF")]
    pub mtf: Split,
    #[serde(rename = "ATF")]
    pub atf: Split,
    #[serde(rename = "TPR")]
    pub tpr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub projects: Vec<ProjectReport>,
}

/// Per-fragment inputs to a report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentRow {
    pub mock_class: MockClass,
    pub syntax_ok: bool,
    pub test_class: TestClass,
    pub failure: Option<FailureKind>,
}

/// Percentage of `part` in `whole`, rounded to two decimals; 0 when empty.
pub fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        return 0.0;
    }
    round2(part as f64 * 100.0 / whole as f64)
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Test pass rate: passed executions over executed translated tests.
pub fn test_pass_rate(results: &TestResults) -> f64 {
    let run: Vec<&TestResult> = results.tests.iter().filter(|t| t.status != TestRunStatus::CompileError).collect();
    pct(run.iter().filter(|t| t.status == TestRunStatus::Pass).count(), run.len())
}

pub fn compute_report(subject: &str, rows: &[FragmentRow], results: &TestResults) -> ProjectReport {
    let n = rows.len();
    let count = |f: &dyn Fn(&FragmentRow) -> bool| rows.iter().filter(|r| f(r)).count();
    let split = |c: TestClass| {
        let bucket = count(&|r| r.test_class == c);
        Split {
            overall: pct(bucket, n),
            runtime_error: pct(count(&|r| r.test_class == c && r.failure == Some(FailureKind::RE)), bucket),
            assertion_failure: pct(count(&|r| r.test_class == c && r.failure == Some(FailureKind::AF)), bucket),
        }
    };
    ProjectReport {
        subject: subject.to_string(),
        amf: n,
        syntax_check: pct(count(&|r| r.syntax_ok), n),
        nm: pct(count(&|r| r.mock_class == MockClass::NM), n),
        ms: pct(count(&|r| r.mock_class == MockClass::MS), n),
        mf: pct(count(&|r| r.mock_class == MockClass::MF), n),
        nt: pct(count(&|r| r.test_class == TestClass::NT), n),
        atp: pct(count(&|r| r.test_class == TestClass::ATP), n),
        otf: split(TestClass::OTF),
        mtf: split(TestClass::MTF),
        atf: split(TestClass::ATF),
        tpr: test_pass_rate(results),
    }
}

/// Column header of the delimited table, in outcome-table order.
pub const TABLE_HEADER: [&str; 18] = [
    "Subject",
    "AMF",
    "SyntaxCheck",
    "NM",
    "MS",
    "MF",
    "NT",
    "ATP",
    "OTF_O",
    "OTF_RE",
    "OTF_AF",
    "MTF_O",
    "MTF_RE",
    "MTF_AF",
    "ATF_O",
    "ATF_RE",
    "ATF_AF",
    "TPR",
];

impl ProjectReport {
    pub fn table_row(&self) -> Vec<String> {
        let f = |x: f64| format!("{x:.2}");
        let mut row =
            vec![self.subject.clone(), self.amf.to_string(), f(self.syntax_check), f(self.nm), f(self.ms), f(self.mf), f(self.nt), f(self.atp)];
        for s in [self.otf, self.mtf, self.atf] {
            row.extend([f(s.overall), f(s.runtime_error), f(s.assertion_failure)]);
        }
        row.push(f(self.tpr));
        row
    }
}

impl Report {
    /// CSV with [`TABLE_HEADER`] and one row per project.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TABLE_HEADER).expect("in-memory write");
        for p in &self.projects {
            w.write_record(p.table_row()).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV of UTF-8 input is UTF-8")
    }

    /// Whitespace-aligned table with [`TABLE_HEADER`]; subjects left-aligned,
    /// numbers right-aligned.
    pub fn to_table(&self) -> String {
        let rows: Vec<Vec<String>> =
            std::iter::once(TABLE_HEADER.iter().map(|s| s.to_string()).collect()).chain(self.projects.iter().map(ProjectReport::table_row)).collect();
        let widths: Vec<usize> = (0..TABLE_HEADER.len()).map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for r in &rows {
            let cells: Vec<String> =
                r.iter().zip(&widths).enumerate().map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") }).collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    /// Pretty JSON document ending in a newline.
    pub fn to_document(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }
}
