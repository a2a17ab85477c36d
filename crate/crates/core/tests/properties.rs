//! Property tests for the invariants of each pipeline stage.

mod common;

use std::cell::RefCell;
use std::collections::{BTreeMap, HashSet};

use common::*;
use proptest::prelude::*;
use xlv_core::codec::{Codec, IdentityRegistry, TargetClassRegistry};
use xlv_core::equality::{floats_close, semantic_equal, EqualityConfig};
use xlv_core::fragments::{Fragment, FragmentKind, ProjectFragments, TypeRole, TypeUse};
use xlv_core::harness::{TestOutcome, TestStatus};
use xlv_core::mockgen::{plan_mock_test, Emitter};
use xlv_core::orchestrator::{
    build_order, compute_report, validate_fragment, CallGraph, MockClass, MockTestCase, TestResults, TranslationRequest, Translator, TranslatorError,
};
use xlv_core::trace::{
    direct_callees, extract_invocations, methods_in, parse_trace, to_canonical_string, FieldRecord, Payload, SerializedValue, Visibility,
};
use xlv_core::typeres::{build_ctm, collect_types, BuildOptions, Candidate, ContextTypeMap, Provenance, ResolveRequest, Resolver, ResolverError};
use xlv_runtime::{Interp, Value};

// ---------------------------------------------------------------------------
// Traces

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn canonical_form_round_trips(log in trace_log()) {
        let text = to_canonical_string(&log);
        let parsed = parse_trace(text.as_bytes()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&parsed, &log);
        prop_assert_eq!(to_canonical_string(&parsed), text);
    }

    #[test]
    fn invocations_flatten_in_preorder(log in trace_log()) {
        let flat: Vec<u64> = extract_invocations(&log).iter().map(|r| r.invocation_index).collect();
        prop_assert_eq!(flat.len(), log.record_count());
        prop_assert_eq!(flat, preorder(&log));
    }

    #[test]
    fn direct_callees_are_an_ordered_subset_of_children(log in trace_log(), keep in prop::collection::vec(any::<bool>(), 4)) {
        let all: Vec<_> = methods_in(&log).into_iter().collect();
        let app: HashSet<_> = all.into_iter().enumerate().filter(|(i, _)| keep[i % keep.len()]).map(|(_, m)| m).collect();
        for r in extract_invocations(&log) {
            let callees = direct_callees(r, &app);
            let mut pos = r.children.iter().map(|c| c.invocation_index);
            for c in &callees {
                prop_assert!(app.contains(&c.method));
                prop_assert_ne!(c.invocation_index, r.invocation_index);
                prop_assert!(pos.any(|i| i == c.invocation_index), "callee out of order or not a child");
            }
            prop_assert_eq!(callees.len(), r.children.iter().filter(|c| app.contains(&c.method)).count());
        }
    }
}

// ---------------------------------------------------------------------------
// Codec

fn codec_session() -> (Interp, TargetClassRegistry) {
    let interp = Interp::new();
    let m = interp.run_module_source("app", "class Holder:\n    pass\n", "app.py").unwrap();
    let classes = TargetClassRegistry::from_modules(&[m]);
    (interp, classes)
}

fn holder(id: &str, fields: Vec<(&str, Visibility, SerializedValue)>) -> SerializedValue {
    SerializedValue {
        type_name: "app.Holder".into(),
        identity: Some(id.into()),
        payload: Payload::AppObject {
            fields: fields
                .into_iter()
                .map(|(n, visibility, value)| FieldRecord {
                    name: n.into(),
                    declaring_class: "app.Holder".into(),
                    visibility,
                    is_static: false,
                    value,
                })
                .collect(),
        },
    }
}

fn int_list(id: &str, xs: &[i32]) -> SerializedValue {
    SerializedValue {
        type_name: "java.util.ArrayList".into(),
        identity: Some(id.into()),
        payload: Payload::Collection {
            category: xlv_core::trace::Category::List,
            items: xs.iter().map(|x| SerializedValue::primitive("int", x.to_string())).collect(),
        },
    }
}

fn attr(interp: &Interp, obj: &Value, field: &str, vis: Visibility) -> Value {
    let name = if vis.is_mangled() { format!("_Holder__{field}") } else { field.to_string() };
    interp.getattr(obj, &name).unwrap()
}

fn visibility() -> impl Strategy<Value = Visibility> {
    prop_oneof![Just(Visibility::Public), Just(Visibility::Protected), Just(Visibility::Private), Just(Visibility::Package)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stream_cursor_law(bytes in prop::collection::vec(any::<i8>(), 0..32), at in any::<prop::sample::Index>()) {
        let pos = at.index(bytes.len() + 1);
        let (interp, classes) = codec_session();
        let v = SerializedValue {
            type_name: "java.io.ByteArrayInputStream".into(),
            identity: Some("@1".into()),
            payload: Payload::Stream { byte_array: bytes.clone(), position: pos },
        };
        let out = Codec::new(&interp, &classes).reconstruct(&v, &mut IdentityRegistry::new()).unwrap();
        let rest = interp.call_method(&out, "read", vec![]).unwrap();
        let Value::Bytes(rest) = rest else { panic!("read returns bytes") };
        prop_assert_eq!(rest.len(), bytes.len() - pos);
        let expected: Vec<u8> = bytes[pos..].iter().map(|b| *b as u8).collect();
        prop_assert_eq!(rest.to_vec(), expected);
    }

    #[test]
    fn shared_tokens_reconstruct_to_one_object(xs in prop::collection::vec(any::<i32>(), 0..5), va in visibility(), vb in visibility()) {
        let (interp, classes) = codec_session();
        let v = holder("@1", vec![("a", va, int_list("@2", &xs)), ("b", vb, SerializedValue::reference("java.util.ArrayList", "@2"))]);
        let obj = Codec::new(&interp, &classes).reconstruct(&v, &mut IdentityRegistry::new()).unwrap();
        let (a, b) = (attr(&interp, &obj, "a", va), attr(&interp, &obj, "b", vb));
        // Mutation probe: an append through one alias is visible through the other.
        interp.call_method(&a, "append", vec![Value::Int(99)]).unwrap();
        prop_assert_eq!(interp.len(&b).unwrap(), xs.len() + 1);
        prop_assert!(a.is(&b));
    }

    #[test]
    fn cyclic_chains_terminate(n in 1usize..6) {
        // h1.next -> h2 -> ... -> hn.next -> h1
        let (interp, classes) = codec_session();
        let mut v = holder(&format!("@{n}"), vec![("next", Visibility::Public, SerializedValue::reference("app.Holder", "@1"))]);
        for i in (1..n).rev() {
            v = holder(&format!("@{i}"), vec![("next", Visibility::Public, v)]);
        }
        let first = Codec::new(&interp, &classes).reconstruct(&v, &mut IdentityRegistry::new()).unwrap();
        let mut cur = first.clone();
        for _ in 0..n {
            cur = interp.getattr(&cur, "next").unwrap();
        }
        prop_assert!(cur.is(&first));
        let again = Codec::new(&interp, &classes).reconstruct(&v, &mut IdentityRegistry::new()).unwrap();
        prop_assert!(semantic_equal(&first, &again, &EqualityConfig::default()).unwrap());
    }
}

// ---------------------------------------------------------------------------
// Equality

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn equality_is_reflexive(s in shape(4)) {
        let session = ShapeSession::new();
        let (a, b) = (session.build(&s), session.build(&s));
        let cfg = EqualityConfig::default();
        prop_assert!(semantic_equal(&a, &a, &cfg).unwrap());
        prop_assert!(semantic_equal(&a, &b, &cfg).unwrap());
    }

    #[test]
    fn equality_is_symmetric(s in shape(4), edits in prop::collection::vec(any::<u8>(), 64)) {
        let t = perturb(&s, &mut edits.into_iter());
        let session = ShapeSession::new();
        let (a, b) = (session.build(&s), session.build(&t));
        let cfg = EqualityConfig::default();
        prop_assert_eq!(semantic_equal(&a, &b, &cfg).unwrap(), semantic_equal(&b, &a, &cfg).unwrap());
    }

    #[test]
    fn tolerance_is_monotone(x in -1e6f64..1e6, d in -1e-3f64..1e-3, rel in 0.0f64..1e-6, abs in 0.0f64..1e-6, more in 0.0f64..1e-3) {
        let y = x + d;
        if floats_close(x, y, rel, abs) {
            prop_assert!(floats_close(x, y, rel + more, abs));
            prop_assert!(floats_close(x, y, rel, abs + more));
        }
        let tight = EqualityConfig { float_rel_tol: rel, float_abs_tol: abs, ..EqualityConfig::default() };
        let loose = EqualityConfig { float_rel_tol: rel + more, float_abs_tol: abs + more, ..EqualityConfig::default() };
        let (a, b) = (Value::list(vec![Value::Float(x)]), Value::list(vec![Value::Float(y)]));
        if semantic_equal(&a, &b, &tight).unwrap() {
            prop_assert!(semantic_equal(&a, &b, &loose).unwrap());
        }
    }
}

// ---------------------------------------------------------------------------
// Type resolution

/// Resolves the types in `good` to `list`; proposes an unloadable import
/// for everything else. Records every query.
struct Stub {
    good: HashSet<String>,
    calls: RefCell<Vec<String>>,
}

impl Resolver for Stub {
    fn resolve(&self, req: &ResolveRequest) -> Result<Candidate, ResolverError> {
        self.calls.borrow_mut().push(req.source_type.clone());
        Ok(if self.good.contains(&req.source_type) {
            Candidate { target_type: "list".into(), target_imports: vec![], reasoning: "sequence".into() }
        } else {
            Candidate { target_type: "nowhere.Thing".into(), target_imports: vec!["import nowhere".into()], reasoning: String::new() }
        })
    }
}

fn project(name: &str, types: &[String]) -> ProjectFragments {
    ProjectFragments {
        project: name.into(),
        application_classes: vec!["app.A".into()],
        fragments: vec![Fragment {
            id: "app.A#m".into(),
            class: "app.A".into(),
            name: "m".into(),
            kind: FragmentKind::Method,
            file: "A.java".into(),
            start_line: 1,
            end_line: 50,
            code: "void m() {}".into(),
            callees: vec![],
            types: types
                .iter()
                .enumerate()
                .map(|(i, t)| TypeUse { source_type: t.clone(), line: i as u32 + 1, symbol: format!("v{i}"), role: TypeRole::Local })
                .collect(),
        }],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fallback_chain_is_total_and_ordered(
        uses in prop::collection::vec(0usize..6, 1..10),
        good in prop::collection::vec(any::<bool>(), 6),
        budget in 1u32..5,
    ) {
        let names: Vec<String> = (0..6).map(|i| format!("lib.T{i}")).collect();
        let types: Vec<String> = uses.iter().map(|&i| names[i].clone()).collect();
        // Two projects: the second sees the same types, so types resolved in
        // one can serve the other globally only if they resolved at all.
        let projects = [project("p", &types), project("q", &types[..types.len() / 2])];
        let stub = Stub { good: names.iter().zip(&good).filter(|(_, g)| **g).map(|(n, _)| n.clone()).collect(), calls: RefCell::new(vec![]) };
        let opts = BuildOptions { budget, ..BuildOptions::default() };
        let s = build_ctm(&projects, &stub, &opts, ContextTypeMap::default());
        let occs: Vec<_> = projects.iter().flat_map(collect_types).collect();
        prop_assert_eq!(s.occurrences, occs.len());
        prop_assert_eq!(s.resolved + s.global + s.fallback, occs.len());
        let calls = stub.calls.borrow();
        for o in &occs {
            let m = s.ctm.lookup_occurrence(o).expect("every occurrence has a mapping");
            let is_good = stub.good.contains(&o.source_type);
            match m.provenance {
                Provenance::Resolved => prop_assert!(is_good),
                // Global and fallback only after the resolver used its budget.
                Provenance::Global | Provenance::FallbackObject => {
                    prop_assert!(!is_good);
                    prop_assert!(calls.iter().filter(|c| **c == o.source_type).count() >= budget as usize);
                    // Bad types never validate anywhere, so nothing global exists.
                    prop_assert_eq!(m.provenance, Provenance::FallbackObject);
                    prop_assert_eq!(m.target_type.as_str(), "object");
                }
            }
        }
        // Same inputs, same bytes.
        let again = build_ctm(&projects, &Stub { good: stub.good.clone(), calls: RefCell::new(vec![]) }, &opts, ContextTypeMap::default());
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        s.ctm.save(d1.path()).unwrap();
        again.ctm.save(d2.path()).unwrap();
        for p in ["p", "q"] {
            let f = format!("{p}.json");
            prop_assert_eq!(std::fs::read(d1.path().join(&f)).unwrap(), std::fs::read(d2.path().join(&f)).unwrap());
        }
    }
}

// ---------------------------------------------------------------------------
// Scheduling, repair budget, reporting

struct Late {
    good_from: u32,
}

impl Translator for Late {
    fn translate(&self, req: &TranslationRequest) -> Result<String, TranslatorError> {
        Ok(if req.attempt >= self.good_from { "def f(self):\n    return 1\n".into() } else { "def f(self):\n    return 2\n".into() })
    }
}

fn judge(_: &MockTestCase, src: &str) -> TestOutcome {
    let ok = src.contains("return 1");
    TestOutcome { status: if ok { TestStatus::Pass } else { TestStatus::AssertionFailure }, message: String::new(), isolation_violations: vec![] }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn retained_edges_point_backwards_in_the_order((nodes, edges) in graph(20)) {
        let mut g = CallGraph::default();
        g.nodes.extend(nodes.iter().cloned());
        for (a, b) in &edges {
            g.add_edge(a, b);
        }
        let s = build_order(&g);
        let pos: BTreeMap<&str, usize> = s.order.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        prop_assert_eq!(pos.len(), nodes.len());
        for (a, b) in &edges {
            if !s.back_edges.contains(&(a.clone(), b.clone())) {
                prop_assert!(pos[b.as_str()] < pos[a.as_str()], "{} -> {} kept but not ordered", a, b);
            }
        }
        prop_assert!(s.back_edges.iter().all(|e| edges.contains(e)));
    }

    #[test]
    fn attempts_never_exceed_the_budget(good_from in 1u32..8, budget in 1u32..6, n_tests in 0usize..3) {
        let tests: Vec<MockTestCase> = (0..n_tests).map(|i| MockTestCase { test_id: format!("t{i}"), path: "t.py".into(), nondet: false }).collect();
        let base = TranslationRequest { fragment_id: "a.A#f".into(), class: "a.A".into(), name: "f".into(), source_code: String::new(), types: vec![], feedback: None, attempt: 0 };
        let o = validate_fragment(&base, &Late { good_from }, &tests, &judge, budget);
        prop_assert!(o.attempts_used <= budget);
        let expected = if n_tests == 0 { MockClass::NM } else if good_from <= budget { MockClass::MS } else { MockClass::MF };
        prop_assert_eq!(o.mock_class, expected);
        if n_tests > 0 {
            prop_assert_eq!(o.attempts_used, good_from.min(budget));
        }
    }

    #[test]
    fn report_partitions_sum_to_one_hundred(rows in prop::collection::vec(row(), 1..300)) {
        let r = compute_report("p", &rows, &TestResults::default());
        // Each cell is rounded to two decimals independently.
        let tol = 0.005 * 5.0 + 1e-9;
        prop_assert!((r.nm + r.ms + r.mf - 100.0).abs() <= tol);
        prop_assert!((r.nt + r.atp + r.otf.overall + r.mtf.overall + r.atf.overall - 100.0).abs() <= tol);
        for s in [r.otf, r.mtf, r.atf] {
            if s.overall > 0.0 {
                prop_assert!((s.runtime_error + s.assertion_failure - 100.0).abs() <= tol);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Mock emission over the fixture traces

#[test]
fn emission_is_deterministic_and_verifies_every_component() {
    let dir = fixture();
    let frags = ProjectFragments::load(&dir.join("schema.json")).unwrap();
    let ctm = build_ctm(
        std::slice::from_ref(&frags),
        &xlv_core::typeres::RuleTableResolver::builtin(),
        &BuildOptions::default(),
        ContextTypeMap::default(),
    )
    .ctm;
    let emitter = Emitter::new(&frags);
    let mut checked = 0;
    for (_, log) in xlv_core::pipeline::load_traces(&dir.join("traces")).unwrap() {
        let app: HashSet<_> = methods_in(&log).into_iter().collect();
        for inv in extract_invocations(&log) {
            let spec = plan_mock_test(inv, &log, &app);
            let a = emitter.emit(&spec, &ctm).unwrap();
            let b = emitter.emit(&plan_mock_test(inv, &log, &app), &ctm).unwrap();
            assert_eq!(a, b);
            let text = &a.source_text;
            xlv_runtime::parser::parse_module(text).unwrap_or_else(|e| panic!("{}: {e}", a.file_name));
            // One patch per distinct callee, the focal never among them.
            assert!(spec.callee_behaviors.iter().all(|c| c.method != inv.method));
            let distinct: HashSet<_> = direct_callees(inv, &app).into_iter().map(|c| c.method.clone()).collect();
            assert_eq!(spec.callee_behaviors.len(), distinct.len());
            assert_eq!(text.matches("patch_method(").count() + text.matches("patch_constructor(").count(), distinct.len());
            // One assertion per recorded component.
            let m = &inv.method;
            assert_eq!(text.contains("\"receiver state mismatch\""), !m.is_static);
            for i in 0..inv.args_after.len() {
                assert!(text.contains(&format!("\"argument {i} state mismatch\"")), "{}", a.file_name);
            }
            let statics: usize = inv.static_after.values().map(|f| f.len()).sum();
            assert_eq!(text.matches("static_field_equal(").count(), statics);
            assert!(text.contains("assert_mocks_consumed()"));
            checked += 1;
        }
    }
    assert!(checked > 100);
}
