//! Full pipeline over the `textcli` fixture project: type resolution, mock
//! generation, isolated execution and validation.

use std::path::{Path, PathBuf};

use xlv_core::config::Config;
use xlv_core::harness::{Executor, InProcess, TestRequest, TestStatus};
use xlv_core::orchestrator::{FixtureTranslator, MockClass, MockTestStatus};
use xlv_core::pipeline::{gen_mocks, make_resolver, resolve_types, validate_project, Manifest};
use xlv_core::support::ClassOverride;
use xlv_core::trace::{parse_trace, to_canonical_string};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/textcli")
}

/// A configuration over the fixture that writes into a temporary directory.
fn config(out: &Path) -> Config {
    let f = fixture();
    let text = format!(
        "out_dir = {out:?}\n[[projects]]\nname = \"textcli\"\nsource_root = {src:?}\ntrace_dir = {tr:?}\ntranslated_src_dir = {py:?}\ntranslations = [{tl:?}]\ntest_results = {res:?}\n",
        out = out.join("out"),
        src = f,
        tr = f.join("traces"),
        py = f.join("py"),
        tl = f.join("translations"),
        res = f.join("test_results.json"),
    );
    let path = out.join("xlv.toml");
    std::fs::write(&path, text).unwrap();
    Config::load(&path).unwrap()
}

fn prepared(out: &Path) -> (Config, Manifest) {
    let cfg = config(out);
    let projects = cfg.select(None).unwrap();
    let resolver = make_resolver(&cfg).unwrap();
    let summary = resolve_types(&cfg, &projects, resolver.as_ref(), true).unwrap();
    assert_eq!(summary.transport_failures, 0);
    let manifest = gen_mocks(&cfg, projects[0], &summary.ctm).unwrap();
    (cfg, manifest)
}

fn request(cfg: &Config, manifest: &Manifest, file: &str, overrides: Vec<ClassOverride>) -> TestRequest {
    let e = manifest.tests.iter().find(|e| e.file == file).unwrap_or_else(|| panic!("no test {file}"));
    TestRequest {
        test_file: cfg.mock_test_dir("textcli").join(&e.file),
        translated_dir: cfg.projects[0].translated_src_dir.clone(),
        overrides,
        equality: cfg.equality,
        focal_class: e.focal_class.clone(),
        focal_method: e.focal_method.clone(),
        timeout_secs: cfg.test_timeout_secs,
    }
}

fn buggy(class: &str, member: &str) -> ClassOverride {
    let text = std::fs::read_to_string(fixture().join("translations_buggy").join(format!("{class}#{member}.py"))).unwrap();
    ClassOverride { class: class.to_string(), source: text }
}

fn file_for(manifest: &Manifest, test_id_suffix: &str, method: &str) -> String {
    manifest
        .tests
        .iter()
        .find(|e| e.trace_test_id.ends_with(test_id_suffix) && e.focal_method == method)
        .unwrap_or_else(|| panic!("no {method} test in {test_id_suffix}"))
        .file
        .clone()
}

#[test]
fn fixture_traces_round_trip() {
    let dir = fixture().join("traces");
    let mut n = 0;
    for e in std::fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        let raw = std::fs::read_to_string(&p).unwrap();
        let log = parse_trace(raw.as_bytes()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(to_canonical_string(&log), raw, "{}", p.display());
        n += 1;
    }
    assert!(n >= 30);
}

#[test]
fn correct_translation_passes_every_mock_test_in_isolation() {
    let d = tempfile::tempdir().unwrap();
    let (cfg, manifest) = prepared(d.path());
    assert!(manifest.tests.len() > 100, "{}", manifest.tests.len());
    let mut failures = Vec::new();
    for e in &manifest.tests {
        let out = InProcess.run(&request(&cfg, &manifest, &e.file, vec![]));
        if out.status != TestStatus::Pass || !out.isolation_violations.is_empty() {
            failures.push(format!("{}: {:?} {} {:?}", e.file, out.status, out.message, out.isolation_violations));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn empty_string_key_bug_fails_on_return_value() {
    let d = tempfile::tempdir().unwrap();
    let (cfg, manifest) = prepared(d.path());
    let file = file_for(&manifest, "#testGetKeyEmptyShort", "getKey");
    let fix = buggy("org.textcli.Option", "getKey");
    let out = InProcess.run(&request(&cfg, &manifest, &file, vec![fix.clone()]));
    assert_eq!(out.status, TestStatus::AssertionFailure, "{}", out.message);
    assert!(out.message.contains("return"), "{}", out.message);
    // The bug is invisible when the short name is non-empty.
    let file = file_for(&manifest, "#testGetKeyShort", "getKey");
    assert_eq!(InProcess.run(&request(&cfg, &manifest, &file, vec![fix])).status, TestStatus::Pass);
}

#[test]
fn iterator_advancing_bug_fails_on_argument_state() {
    let d = tempfile::tempdir().unwrap();
    let (cfg, manifest) = prepared(d.path());
    let file = file_for(&manifest, "#testRenderNextFirstOfThree", "renderNext");
    let out = InProcess.run(&request(&cfg, &manifest, &file, vec![buggy("org.textcli.HelpFormatter", "renderNext")]));
    assert_eq!(out.status, TestStatus::AssertionFailure, "{}", out.message);
    assert!(out.message.contains("argument"), "{}", out.message);
    assert!(out.isolation_violations.is_empty(), "{:?}", out.isolation_violations);
}

#[test]
fn validation_flags_only_the_seeded_bugs() {
    let d = tempfile::tempdir().unwrap();
    let (cfg, _) = prepared(d.path());
    let project = &cfg.projects[0];

    let good = FixtureTranslator { dirs: vec![fixture().join("translations")] };
    let (report, outcomes) = validate_project(&cfg, project, &good, &InProcess).unwrap();
    let by_id = |id: &str| outcomes.outcomes.iter().find(|o| o.fragment_id == id).unwrap().clone();
    assert_eq!(report.amf, 17);
    assert_eq!(by_id("org.textcli.OptionList#clear").mock_class, MockClass::NM);
    let failing: Vec<_> = outcomes.outcomes.iter().filter(|o| o.mock_class == MockClass::MF).map(|o| o.fragment_id.clone()).collect();
    assert!(failing.is_empty(), "{failing:?}");
    assert!(outcomes.order.iter().position(|id| id.ends_with("#renderNext")) < outcomes.order.iter().position(|id| id.ends_with("#render")));

    let bad = FixtureTranslator { dirs: vec![fixture().join("translations_buggy"), fixture().join("translations")] };
    let (_, outcomes) = validate_project(&cfg, project, &bad, &InProcess).unwrap();
    let mf: Vec<_> = outcomes.outcomes.iter().filter(|o| o.mock_class == MockClass::MF).map(|o| o.fragment_id.as_str()).collect();
    assert_eq!(mf, ["org.textcli.HelpFormatter#renderNext", "org.textcli.Option#getKey"]);
    let get_key = outcomes.outcomes.iter().find(|o| o.fragment_id == "org.textcli.Option#getKey").unwrap();
    assert_eq!(get_key.attempts_used, cfg.budget);
    assert!(get_key.tests.iter().any(|t| t.status == MockTestStatus::FailAssert));
}
