//! Runs one generated test file in a fresh interpreter session and classifies
//! the result. Sessions never share state: the in-process executor builds a
//! new interpreter on a dedicated thread per test, the subprocess executor
//! starts a new process per test.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use xlv_runtime::{Interp, Value};

use crate::equality::EqualityConfig;
use crate::support::{ClassOverride, SupportContext};

/// Stack size for interpreter threads; deep recursion in translated code
/// must hit the interpreter's depth limit before the host stack.
const STACK_BYTES: usize = 256 * 1024 * 1024;

/// Everything needed to execute one test file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRequest {
    pub test_file: PathBuf,
    /// Root of the translated project (module search path).
    pub translated_dir: PathBuf,
    #[serde(default)]
    pub overrides: Vec<ClassOverride>,
    #[serde(default)]
    pub equality: EqualityConfig,
    /// Source class and member of the focal method.
    pub focal_class: String,
    pub focal_method: String,
    pub timeout_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Pass,
    AssertionFailure,
    RuntimeError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub status: TestStatus,
    pub message: String,
    /// Translated application methods other than the focal that ran.
    pub isolation_violations: Vec<String>,
}

impl TestOutcome {
    fn runtime(msg: impl Into<String>) -> Self {
        Self { status: TestStatus::RuntimeError, message: msg.into(), isolation_violations: vec![] }
    }
}

/// Strategy for running a test in a fresh session.
pub trait Executor: Sync {
    fn run(&self, req: &TestRequest) -> TestOutcome;
}

/// Fresh interpreter on a new thread per test.
#[derive(Debug, Clone, Copy, Default)]
pub struct InProcess;

impl Executor for InProcess {
    fn run(&self, req: &TestRequest) -> TestOutcome {
        let req = req.clone();
        let spawned = std::thread::Builder::new().stack_size(STACK_BYTES).spawn(move || execute(&req));
        match spawned {
            Ok(h) => h.join().unwrap_or_else(|_| TestOutcome::runtime("test session panicked")),
            Err(e) => TestOutcome::runtime(format!("cannot start test session: {e}")),
        }
    }
}

/// New process per test: `<program> <args..>` reads a [`TestRequest`] as JSON
/// on stdin and prints the [`TestOutcome`] as its last stdout line.
#[derive(Debug, Clone)]
pub struct Subprocess {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl Executor for Subprocess {
    fn run(&self, req: &TestRequest) -> TestOutcome {
        let child = Command::new(&self.program).args(&self.args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn();
        let mut child = match child {
            Ok(c) => c,
            Err(e) => return TestOutcome::runtime(format!("cannot start {}: {e}", self.program.display())),
        };
        let body = serde_json::to_vec(req).expect("requests always serialize");
        if let Some(mut stdin) = child.stdin.take() {
            let _ = stdin.write_all(&body);
        }
        let out = match child.wait_with_output() {
            Ok(o) => o,
            Err(e) => return TestOutcome::runtime(format!("test process failed: {e}")),
        };
        let stdout = String::from_utf8_lossy(&out.stdout);
        match stdout.lines().rev().find(|l| !l.trim().is_empty()).map(serde_json::from_str::<TestOutcome>) {
            Some(Ok(o)) => o,
            _ => TestOutcome::runtime(format!(
                "test process exited with {} and no result: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )),
        }
    }
}

/// Dotted module names of every `.py` file under `root`.
pub fn module_names(root: &Path) -> Vec<String> {
    fn walk(dir: &Path, prefix: &[String], out: &mut Vec<String>) {
        let Ok(rd) = std::fs::read_dir(dir) else { return };
        let mut entries: Vec<PathBuf> = rd.filter_map(|e| e.ok().map(|e| e.path())).collect();
        entries.sort();
        for p in entries {
            let Some(stem) = p.file_stem().and_then(|s| s.to_str()).map(str::to_string) else { continue };
            if p.is_dir() {
                let mut next = prefix.to_vec();
                next.push(stem);
                walk(&p, &next, out);
            } else if p.extension().is_some_and(|e| e == "py") {
                let mut parts = prefix.to_vec();
                if stem != "__init__" {
                    parts.push(stem);
                }
                if !parts.is_empty() {
                    out.push(parts.join("."));
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(root, &[], &mut out);
    out
}

/// Qualified-name prefixes under which the focal method's own code runs.
fn focal_qualnames(class: &str, method: &str) -> Vec<String> {
    let path = class.rsplit('.').next().unwrap_or(class).replace('$', ".");
    let simple = crate::trace::simple_name(class).trim_start_matches('_').to_string();
    let name = if method == crate::trace::CONSTRUCTOR_NAME { "__init__" } else { method };
    vec![format!("{path}.{name}"), format!("{path}._{simple}__{name}")]
}

/// Runs `req` in the calling thread with a fresh interpreter.
pub fn execute(req: &TestRequest) -> TestOutcome {
    let src = match std::fs::read_to_string(&req.test_file) {
        Ok(s) => s,
        Err(e) => return TestOutcome::runtime(format!("cannot read {}: {e}", req.test_file.display())),
    };
    let modules = module_names(&req.translated_dir);
    let interp = Interp::new();
    interp.add_search_path(&req.translated_dir);
    let ctx = SupportContext::new(modules.clone(), req.overrides.clone(), req.equality);
    ctx.install(&interp);
    interp.set_deadline(Some(Instant::now() + Duration::from_secs_f64(req.timeout_secs.max(0.0))));

    // Loading the project first keeps module initialisation out of the call log.
    if let Err(e) = ctx.classes(&interp) {
        return TestOutcome::runtime(format!("loading translated project: {e}"));
    }
    let file = req.test_file.display().to_string();
    let module = match interp.run_module_source("mock_test", &src, &file) {
        Ok(m) => m,
        Err(e) => return TestOutcome::runtime(e.to_string()),
    };
    let tests: Vec<Value> =
        module.dict.borrow().iter().filter(|(k, v)| k.starts_with("test_") && matches!(v, Value::Function(_))).map(|(_, v)| v.clone()).collect();
    if tests.is_empty() {
        return TestOutcome::runtime(format!("{file} defines no test function"));
    }
    interp.clear_call_log();
    let mut outcome = TestOutcome { status: TestStatus::Pass, message: String::new(), isolation_violations: vec![] };
    for t in tests {
        if let Err(e) = interp.call(&t, vec![], vec![]) {
            if interp.exc_is(&e, "AssertionError") {
                let detail = ctx.last_mismatch().filter(|_| !e.message().starts_with("mock "));
                outcome.status = TestStatus::AssertionFailure;
                outcome.message = match detail {
                    Some(d) => format!("{e} [{d}]"),
                    None => e.to_string(),
                };
            } else {
                outcome.status = TestStatus::RuntimeError;
                outcome.message = e.to_string();
            }
            break;
        }
    }
    let allowed = focal_qualnames(&req.focal_class, &req.focal_method);
    let mut seen = std::collections::BTreeSet::new();
    for c in interp.call_log() {
        if !modules.contains(&c.module) {
            continue;
        }
        let own = allowed.iter().any(|a| c.qualname == *a || c.qualname.starts_with(&format!("{a}.")));
        if !own {
            seen.insert(format!("{}.{}", c.module, c.qualname));
        }
    }
    outcome.isolation_violations = seen.into_iter().collect();
    outcome
}
