//! Drives the `xlv` binary over the `textcli` fixture project.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/textcli").canonicalize().unwrap()
}

/// Writes a configuration into `dir` over the fixture, with `extra` appended
/// to the top-level table, and returns its path.
fn config(dir: &Path, extra: &str, translations: &[&str]) -> PathBuf {
    let f = fixture();
    let tl: Vec<String> = translations.iter().map(|t| format!("{:?}", f.join(t))).collect();
    let text = format!(
        "out_dir = \"out\"\n{extra}\n[[projects]]\nname = \"textcli\"\nsource_root = {src:?}\ntrace_dir = {tr:?}\ntranslated_src_dir = {py:?}\ntranslations = [{tl}]\ntest_results = {res:?}\n",
        src = f,
        tr = f.join("traces"),
        py = f.join("py"),
        tl = tl.join(", "),
        res = f.join("test_results.json"),
    );
    let path = dir.join("xlv.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn xlv(cfg: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xlv")).arg("--config").arg(cfg).args(args).env_remove("XLV_RESOLVER_KEY").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.clone(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn end_to_end_on_fixture() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(d.path(), "", &["translations_buggy", "translations"]);

    let o = xlv(&cfg, &["resolve-types"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("24 type uses: 24 resolved"), "{}", stdout(&o));
    let ctm: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("out/ctm/textcli.json")).unwrap()).unwrap();
    assert_eq!(ctm["entries"].as_array().unwrap().len(), 24);

    let o = xlv(&cfg, &["gen-mocks"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    // One test per recorded application-method invocation across the traces.
    let mut invocations = 0;
    for e in std::fs::read_dir(fixture().join("traces")).unwrap() {
        let text = std::fs::read_to_string(e.unwrap().path()).unwrap();
        invocations += text.matches("\"invocation_index\"").count();
    }
    assert!(stdout(&o).starts_with(&format!("textcli: {invocations} mock tests for 16 focal methods")), "{}", stdout(&o));

    let o = xlv(&cfg, &["validate"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("textcli: 17 fragments, 14 MS, 2 MF, 1 NM"), "{}", stdout(&o));
    assert!(d.path().join("out/report.json").exists());

    let o = xlv(&cfg, &["report"]);
    assert_eq!(code(&o), 0);
    let table = stdout(&o);
    let header: Vec<&str> = table.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header[..8], ["Subject", "AMF", "SyntaxCheck", "NM", "MS", "MF", "NT", "ATP"]);
    assert!(table.lines().nth(1).unwrap().starts_with("textcli   17"));
    let o = xlv(&cfg, &["report", "--format", "doc"]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["projects"][0]["MS"], 82.35);

    // Re-running with unchanged inputs rewrites identical bytes.
    let before = snapshot(&d.path().join("out"));
    for cmd in ["resolve-types", "gen-mocks", "validate"] {
        assert_eq!(code(&xlv(&cfg, &[cmd])), 0);
    }
    assert_eq!(before, snapshot(&d.path().join("out")));
}

#[test]
fn usage_and_pipeline_errors() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(d.path(), "", &["translations"]);
    assert_eq!(code(&xlv(&d.path().join("missing.toml"), &["validate"])), 1);
    assert_eq!(code(&xlv(&cfg, &["report", "--format", "xml"])), 4);
    assert_eq!(code(&xlv(&cfg, &["frobnicate"])), 4);
    assert_eq!(code(&xlv(&cfg, &["--project", "nope", "validate"])), 1);
    assert_eq!(code(&xlv(&cfg, &["--help"])), 0);

    // Empty store: header only.
    let o = xlv(&cfg, &["report"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 1);

    // No type map for the project's type uses.
    let o = xlv(&cfg, &["gen-mocks"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no type mapping"));
}

#[test]
fn unreachable_resolver_is_a_transport_failure() {
    let d = tempfile::tempdir().unwrap();
    let extra = "budget = 1\n[resolver]\nmode = \"remote\"\nurl = \"http://127.0.0.1:9/v1/chat/completions\"\ntimeout_secs = 2";
    let cfg = config(d.path(), extra, &["translations"]);
    let o = xlv(&cfg, &["resolve-types"]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    // Fallbacks still produce a complete map.
    assert!(stdout(&o).contains("24 fallback"), "{}", stdout(&o));
    // Offline runs never touch the endpoint.
    assert_eq!(code(&xlv(&cfg, &["--offline", "resolve-types"])), 0);
}

#[test]
fn empty_trace_dir_emits_nothing() {
    let d = tempfile::tempdir().unwrap();
    let cfg = config(d.path(), "", &["translations"]);
    let traces = d.path().join("no_traces");
    std::fs::create_dir(&traces).unwrap();
    let text = std::fs::read_to_string(&cfg).unwrap();
    let text = text.replace(&format!("{:?}", fixture().join("traces")), &format!("{traces:?}"));
    std::fs::write(&cfg, text).unwrap();
    assert_eq!(code(&xlv(&cfg, &["resolve-types"])), 0);
    let o = xlv(&cfg, &["gen-mocks"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("textcli: 0 mock tests"));
    // Nothing to run: every fragment is reported as not mockable.
    let o = xlv(&cfg, &["validate"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("textcli: 17 fragments, 0 MS, 0 MF, 17 NM"), "{}", stdout(&o));
}
