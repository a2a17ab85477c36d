//! Mock-based in-isolation tests. For one focal invocation the planner
//! collects its recorded environment (initial state, direct callee
//! behaviours, expected final state); the emitter renders it as a test file
//! in the target language that replays callees through mocks, runs the real
//! focal method, and asserts every recorded side effect.
//!
//! Each snapshot group (initial state, expected state, one mock record) is
//! reconstructed under its own identity registry at test time, so
//! references whose definition lives in another group are inlined here.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde_json::{Map, Value as Json};

use crate::fragments::ProjectFragments;
use crate::trace::{
    outcome_from_json, outcome_to_json, statics_from_json, statics_to_json, value_from_json, value_to_json, InvocationRecord, MethodId, Outcome,
    Payload, SerializedValue, StaticSnapshot, TraceError, TraceLog, CONSTRUCTOR_NAME,
};
use crate::typeres::{collect_types, ContextTypeMap};

/// One recorded call of a mocked callee.
#[derive(Debug, Clone, PartialEq)]
pub struct MockRecord {
    pub invocation_index: u64,
    pub outcome: Outcome,
    pub args_after: Vec<SerializedValue>,
    pub instance_after: Option<SerializedValue>,
    /// Static fields whose value changed during the call.
    pub static_delta: StaticSnapshot,
}

/// Replay plan for one mocked method, records in execution order.
#[derive(Debug, Clone, PartialEq)]
pub struct CalleeBehavior {
    pub method: MethodId,
    pub records: Vec<MockRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub static_before: StaticSnapshot,
    pub instance_before: Option<SerializedValue>,
    pub args_before: Vec<SerializedValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedState {
    pub result: Outcome,
    pub instance_after: Option<SerializedValue>,
    pub args_after: Vec<SerializedValue>,
    pub static_after: StaticSnapshot,
}

/// The plan for one in-isolation test.
#[derive(Debug, Clone, PartialEq)]
pub struct MockTestSpec {
    pub schema_version: String,
    pub test_id: String,
    pub focal: MethodId,
    pub focal_index: u64,
    pub callee_behaviors: Vec<CalleeBehavior>,
    pub initial: InitialState,
    pub expected: ExpectedState,
}

/// A rendered test file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedTest {
    /// Path relative to the mock-test root.
    pub file_name: String,
    pub source_text: String,
    pub focal_fragment_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmitError {
    #[error("no type mapping for {source_type} at {file}:{line} ({symbol}) used by {fragment}")]
    MissingTypeMapping { fragment: String, source_type: String, file: String, line: u32, symbol: String },
    #[error("no fragment implements {class}.{method}")]
    UnknownFragment { class: String, method: String },
}

// ---------------------------------------------------------------------------
// Planning

/// Builds the test plan for `focal`, mocking every direct callee in
/// `app_methods` (self-calls included).
pub fn plan_mock_test(focal: &InvocationRecord, log: &TraceLog, app_methods: &HashSet<MethodId>) -> MockTestSpec {
    let defs = log.definitions();
    let mut groups: Vec<CalleeBehavior> = Vec::new();
    for c in crate::trace::direct_callees(focal, app_methods) {
        let mut record = MockRecord {
            invocation_index: c.invocation_index,
            outcome: c.result.clone(),
            args_after: c.args_after.clone(),
            instance_after: c.instance_after.clone(),
            static_delta: static_delta(&c.static_before, &c.static_after),
        };
        inline_record(&mut record, &defs);
        let key = (&c.method.class_name, &c.method.method_name);
        match groups.iter_mut().find(|g| (&g.method.class_name, &g.method.method_name) == key) {
            Some(g) => g.records.push(record),
            None => groups.push(CalleeBehavior { method: c.method.clone(), records: vec![record] }),
        }
    }
    for g in &mut groups {
        g.records.sort_by_key(|r| r.invocation_index);
    }
    let mut initial = InitialState {
        static_before: focal.static_before.clone(),
        instance_before: focal.instance_before.clone(),
        args_before: focal.args_before.clone(),
    };
    {
        let group = initial_values(&initial);
        let mut inl = Inliner::new(&defs, &group.iter().collect::<Vec<_>>());
        inl.statics(&mut initial.static_before);
        if let Some(v) = &mut initial.instance_before {
            inl.value(v);
        }
        initial.args_before.iter_mut().for_each(|v| inl.value(v));
    }
    let mut expected = ExpectedState {
        result: focal.result.clone(),
        instance_after: focal.instance_after.clone(),
        args_after: focal.args_after.clone(),
        static_after: focal.static_after.clone(),
    };
    {
        let group = expected_values(&expected);
        let mut inl = Inliner::new(&defs, &group.iter().collect::<Vec<_>>());
        if let Some(v) = &mut expected.instance_after {
            inl.value(v);
        }
        expected.args_after.iter_mut().for_each(|v| inl.value(v));
        inl.statics(&mut expected.static_after);
        if let Outcome::Return(v) | Outcome::Thrown(v) = &mut expected.result {
            inl.value(v);
        }
    }
    MockTestSpec {
        schema_version: log.schema_version.clone(),
        test_id: log.test_id.clone(),
        focal: focal.method.clone(),
        focal_index: focal.invocation_index,
        callee_behaviors: groups,
        initial,
        expected,
    }
}

/// Fields of `after` that are new or differ from `before`.
pub fn static_delta(before: &StaticSnapshot, after: &StaticSnapshot) -> StaticSnapshot {
    let mut out = StaticSnapshot::new();
    for (class, fields) in after {
        for (name, v) in fields {
            let old = before.get(class).and_then(|f| f.get(name));
            if old.map(value_to_json) != Some(value_to_json(v)) {
                out.entry(class.clone()).or_default().insert(name.clone(), v.clone());
            }
        }
    }
    out
}

fn inline_record(r: &mut MockRecord, defs: &HashMap<String, &SerializedValue>) {
    let snapshot = r.clone();
    let mut group: Vec<&SerializedValue> = snapshot.instance_after.iter().chain(&snapshot.args_after).collect();
    group.extend(snapshot.static_delta.values().flat_map(|m| m.values()));
    if let Outcome::Return(v) | Outcome::Thrown(v) = &snapshot.outcome {
        group.push(v);
    }
    let mut inl = Inliner::new(defs, &group);
    if let Some(v) = &mut r.instance_after {
        inl.value(v);
    }
    r.args_after.iter_mut().for_each(|v| inl.value(v));
    inl.statics(&mut r.static_delta);
    if let Outcome::Return(v) | Outcome::Thrown(v) = &mut r.outcome {
        inl.value(v);
    }
}

fn initial_values(s: &InitialState) -> Vec<SerializedValue> {
    let mut out: Vec<SerializedValue> = s.instance_before.iter().cloned().collect();
    out.extend(s.args_before.iter().cloned());
    out.extend(s.static_before.values().flat_map(|m| m.values()).cloned());
    out
}

fn expected_values(s: &ExpectedState) -> Vec<SerializedValue> {
    let mut out: Vec<SerializedValue> = s.instance_after.iter().cloned().collect();
    out.extend(s.args_after.iter().cloned());
    out.extend(s.static_after.values().flat_map(|m| m.values()).cloned());
    if let Outcome::Return(v) | Outcome::Thrown(v) = &s.result {
        out.push(v.clone());
    }
    out
}

/// Replaces references whose token is not yet defined within the group by a
/// copy of the token's trace-wide definition.
struct Inliner<'a> {
    defs: &'a HashMap<String, &'a SerializedValue>,
    local: HashMap<String, SerializedValue>,
    defined: HashSet<String>,
}

impl<'a> Inliner<'a> {
    /// `group` lists the group's values; their definitions win over the
    /// trace-wide ones, which may describe the object at another time.
    fn new(defs: &'a HashMap<String, &'a SerializedValue>, group: &[&SerializedValue]) -> Self {
        let mut local = HashMap::new();
        for g in group {
            g.walk(&mut |v| {
                if let (Some(t), false) = (&v.identity, matches!(v.payload, Payload::Reference { .. })) {
                    local.entry(t.clone()).or_insert_with(|| v.clone());
                }
            });
        }
        Self { defs, local, defined: HashSet::new() }
    }

    fn statics(&mut self, s: &mut StaticSnapshot) {
        for v in s.values_mut().flat_map(|m| m.values_mut()) {
            self.value(v);
        }
    }

    fn value(&mut self, v: &mut SerializedValue) {
        if let Payload::Reference { token } = &v.payload {
            if self.defined.contains(token) {
                return;
            }
            match self.local.get(token).or_else(|| self.defs.get(token).copied()) {
                Some(def) => *v = def.clone(),
                None => return,
            }
        }
        if let Some(t) = &v.identity {
            self.defined.insert(t.clone());
        }
        match &mut v.payload {
            Payload::Array { items, .. } | Payload::Collection { items, .. } => items.iter_mut().for_each(|i| self.value(i)),
            Payload::Map { entries } => entries.iter_mut().for_each(|(k, x)| {
                self.value(k);
                self.value(x);
            }),
            Payload::EnumConst { value: Some(x), .. } => self.value(x),
            Payload::AppObject { fields } => fields.iter_mut().for_each(|f| self.value(&mut f.value)),
            _ => {}
        }
    }
}

// ---------------------------------------------------------------------------
// Record encoding shared with the runtime support module

pub fn record_to_json(r: &MockRecord) -> Json {
    let mut o = Map::new();
    o.insert("invocation_index".into(), Json::from(r.invocation_index));
    o.insert("instance_after".into(), r.instance_after.as_ref().map_or(Json::Null, value_to_json));
    o.insert("args_after".into(), Json::Array(r.args_after.iter().map(value_to_json).collect()));
    o.insert("static_delta".into(), statics_to_json(&r.static_delta));
    o.insert("result".into(), outcome_to_json(&r.outcome));
    Json::Object(o)
}

pub fn record_from_json(j: &Json) -> Result<MockRecord, TraceError> {
    let bad = |m: &str| TraceError::Schema { path: "/".into(), msg: m.into() };
    let o = j.as_object().ok_or_else(|| bad("mock record must be an object"))?;
    let args = o.get("args_after").and_then(Json::as_array).ok_or_else(|| bad("args_after must be an array"))?;
    Ok(MockRecord {
        invocation_index: o.get("invocation_index").and_then(Json::as_u64).unwrap_or(0),
        outcome: outcome_from_json(o.get("result").ok_or_else(|| bad("missing result"))?)?,
        args_after: args.iter().map(value_from_json).collect::<Result<_, _>>()?,
        instance_after: match o.get("instance_after") {
            None | Some(Json::Null) => None,
            Some(v) => Some(value_from_json(v)?),
        },
        static_delta: match o.get("static_delta") {
            None => StaticSnapshot::new(),
            Some(s) => statics_from_json(s)?,
        },
    })
}

// ---------------------------------------------------------------------------
// Emission

/// Target-language name of a source method.
pub fn target_method_name(m: &MethodId) -> &str {
    if m.method_name == CONSTRUCTOR_NAME {
        "__init__"
    } else {
        &m.method_name
    }
}

/// `<class FQN>/<method>/inv_<index>_test.py`
pub fn test_path(m: &MethodId, index: u64) -> String {
    format!("{}/{}/inv_{index}_test.py", m.class_name, target_method_name(m))
}

/// Emission context for one project.
pub struct Emitter<'a> {
    pub project: &'a ProjectFragments,
}

/// Names the generated test imports from the support module.
pub const SUPPORT_NAMES: [&str; 12] = [
    "SideEffect",
    "assert_mocks_consumed",
    "construct_focal",
    "convert_to_python",
    "load_class",
    "new_registry",
    "patch_constructor",
    "patch_method",
    "real_method",
    "recursive_equal",
    "static_field_equal",
    "update_static_fields",
];

fn lit(text: &str) -> String {
    serde_json::to_string(text).expect("strings always serialize")
}

fn json_lit(j: &Json) -> String {
    lit(&serde_json::to_string(j).expect("JSON trees always serialize"))
}

fn loads(j: &Json) -> String {
    format!("json.loads({})", json_lit(j))
}

impl<'a> Emitter<'a> {
    pub fn new(project: &'a ProjectFragments) -> Self {
        Self { project }
    }

    /// Renders `spec` as a test file. Every type occurrence of the focal
    /// fragment must have a mapping in `ctm`; their imports form the prelude.
    pub fn emit(&self, spec: &MockTestSpec, ctm: &ContextTypeMap) -> Result<EmittedTest, EmitError> {
        let focal = &spec.focal;
        let frag = self
            .project
            .method_fragment(&focal.class_name, &focal.method_name)
            .ok_or_else(|| EmitError::UnknownFragment { class: focal.class_name.clone(), method: focal.method_name.clone() })?;
        let mut imports = BTreeSet::new();
        for occ in collect_types(self.project).into_iter().filter(|o| o.fragment_id == frag.id) {
            let m = ctm.lookup_occurrence(&occ).ok_or_else(|| EmitError::MissingTypeMapping {
                fragment: frag.id.clone(),
                source_type: occ.source_type.clone(),
                file: occ.site.file.clone(),
                line: occ.site.line,
                symbol: occ.site.symbol.clone(),
            })?;
            imports.extend(m.target_imports.iter().cloned());
        }

        let mut out = String::new();
        let w = &mut out;
        let line = |w: &mut String, indent: usize, s: &str| {
            w.push_str(&"    ".repeat(indent));
            w.push_str(s);
            w.push('\n');
        };
        line(w, 0, "# Generated mock test: one focal invocation replayed in isolation.");
        line(w, 0, &format!("# schema_version: {}", spec.schema_version));
        line(w, 0, &format!("# test_id: {}", spec.test_id));
        line(w, 0, &format!("# invocation_index: {}", spec.focal_index));
        line(w, 0, &format!("# focal: {}.{} {}", focal.class_name, focal.method_name, focal.signature));
        line(w, 0, &format!("# fragment: {}", frag.id));
        line(w, 0, "import json");
        line(w, 0, &format!("from xlv_runtime import {}", SUPPORT_NAMES.join(", ")));
        for i in &imports {
            line(w, 0, i);
        }
        line(w, 0, "");
        line(w, 0, "");
        line(w, 0, &format!("def test_inv_{}():", spec.focal_index));

        // Capture the real focal before any patch so self-calls hit mocks.
        line(w, 1, &format!("focal_class = load_class({})", lit(&focal.class_name)));
        if !focal.is_constructor {
            line(w, 1, &format!("focal = real_method(focal_class, {})", lit(target_method_name(focal))));
        }

        // (1) one mock per callee.
        for b in &spec.callee_behaviors {
            let records = Json::Array(b.records.iter().map(record_to_json).collect());
            let cls = format!("load_class({})", lit(&b.method.class_name));
            if b.method.is_constructor {
                line(w, 1, &format!("patch_constructor({cls}, SideEffect({}))", loads(&records)));
            } else {
                let is_static = if b.method.is_static { "True" } else { "False" };
                line(w, 1, &format!("patch_method({cls}, {}, {is_static}, SideEffect({}))", lit(target_method_name(&b.method)), loads(&records)));
            }
        }

        // (2) static state, (3) receiver and arguments.
        line(w, 1, "registry = new_registry()");
        line(w, 1, &format!("update_static_fields({}, registry)", loads(&statics_to_json(&spec.initial.static_before))));
        if let Some(inst) = &spec.initial.instance_before {
            line(w, 1, &format!("instance = convert_to_python({}, registry)", loads(&value_to_json(inst))));
        }
        let args: Vec<String> =
            spec.initial.args_before.iter().map(|a| format!("convert_to_python({}, registry)", loads(&value_to_json(a)))).collect();
        line(w, 1, &format!("method_args = [{}]", args.join(", ")));

        // (4) the real focal call.
        let call = if focal.is_constructor {
            "instance = construct_focal(focal_class, method_args)".to_string()
        } else if focal.is_static {
            "result = focal(*method_args)".to_string()
        } else {
            "result = focal(instance, *method_args)".to_string()
        };
        match &spec.expected.result {
            Outcome::Thrown(_) => {
                line(w, 1, "raised = None");
                line(w, 1, "try:");
                line(w, 2, &call);
                line(w, 1, "except MockExhaustedError:");
                line(w, 2, "raise");
                line(w, 1, "except BaseException as exc:");
                line(w, 2, "raised = exc");
            }
            _ => line(w, 1, &call),
        }

        // (5) verification.
        line(w, 1, "expected = new_registry()");
        if let Some(inst) = &spec.expected.instance_after {
            line(
                w,
                1,
                &format!(
                    "assert recursive_equal(convert_to_python({}, expected), instance), \"receiver state mismatch\"",
                    loads(&value_to_json(inst))
                ),
            );
        }
        for (i, a) in spec.expected.args_after.iter().enumerate() {
            line(
                w,
                1,
                &format!(
                    "assert recursive_equal(convert_to_python({}, expected), method_args[{i}]), \"argument {i} state mismatch\"",
                    loads(&value_to_json(a))
                ),
            );
        }
        for (class, fields) in &spec.expected.static_after {
            for (name, v) in fields {
                line(
                    w,
                    1,
                    &format!(
                        "assert static_field_equal({}, {}, convert_to_python({}, expected)), {}",
                        lit(class),
                        lit(name),
                        loads(&value_to_json(v)),
                        lit(&format!("static field {class}.{name} mismatch"))
                    ),
                );
            }
        }
        match &spec.expected.result {
            Outcome::Return(v) => line(
                w,
                1,
                &format!("assert recursive_equal(convert_to_python({}, expected), result), \"return value mismatch\"", loads(&value_to_json(v))),
            ),
            Outcome::Thrown(v) => {
                line(w, 1, "assert raised is not None, \"expected exception was not raised\"");
                line(
                    w,
                    1,
                    &format!(
                        "assert recursive_equal(convert_to_python({}, expected), raised), \"thrown exception mismatch\"",
                        loads(&value_to_json(v))
                    ),
                );
            }
            Outcome::Void if !focal.is_constructor => line(w, 1, "assert result is None, \"void method returned a value\""),
            Outcome::Void => {}
        }
        line(w, 1, "assert_mocks_consumed()");

        Ok(EmittedTest { file_name: test_path(focal, spec.focal_index), source_text: out, focal_fragment_id: frag.id.clone() })
    }
}

/// Assigns collision-free file names: the first test for a path keeps it,
/// later ones get `inv_<index>_<n>_test.py` with n = 2, 3, ...
pub fn disambiguate(tests: &mut [EmittedTest]) {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for t in tests.iter_mut() {
        let n = seen.entry(t.file_name.clone()).or_insert(0);
        *n += 1;
        if *n > 1 {
            t.file_name = t.file_name.replace("_test.py", &format!("_{n}_test.py"));
        }
    }
}
