//! Runs each program under `tests/py` and compares captured output with the
//! `.out` file recorded from a reference interpreter.

use std::path::Path;

use xlv_runtime::Interp;

fn run(name: &str) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/py");
    let src = std::fs::read_to_string(dir.join(format!("{name}.py"))).unwrap();
    let expected = std::fs::read_to_string(dir.join(format!("{name}.out"))).unwrap();
    let interp = Interp::new();
    if let Err(e) = interp.run_module_source("__main__", &src, &format!("{name}.py")) {
        panic!("{name} failed: {e}\noutput so far:\n{}", interp.output());
    }
    let got = interp.output();
    for (k, (g, e)) in got.lines().zip(expected.lines()).enumerate() {
        assert_eq!(g, e, "{name}: line {} differs", k + 1);
    }
    assert_eq!(got, expected, "{name}: output length differs");
}

#[test]
fn classes() {
    run("classes");
}

#[test]
fn exceptions() {
    run("exceptions");
}

#[test]
fn collections_ops() {
    run("collections_ops");
}

#[test]
fn strings() {
    run("strings");
}

#[test]
fn enums_iters() {
    run("enums_iters");
}

#[test]
fn deadline_stops_infinite_loops() {
    let interp = Interp::new();
    interp.set_deadline(Some(std::time::Instant::now()));
    let Err(err) = interp.run_module_source("m", "while True:\n    pass\n", "m.py") else { panic!("loop finished") };
    assert!(err.to_string().contains("ExecutionTimeout"), "{err}");
}

#[test]
fn length_hint_does_not_consume() {
    let interp = Interp::new();
    let src = "import operator\nit = iter([1, 2, 3])\nnext(it)\nprint(operator.length_hint(it), operator.length_hint(it), next(it))\n";
    interp.run_module_source("m", src, "m.py").map_err(|e| e.to_string()).unwrap();
    assert_eq!(interp.output(), "2 2 2\n");
}
