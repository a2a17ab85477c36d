//! Generators and independent oracles shared by the property and acceptance
//! suites. Oracles here never call the code under test.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::rc::Rc;

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;
use xlv_core::orchestrator::{FailureKind, FragmentRow, MockClass, TestClass};
use xlv_core::trace::{
    Category, FieldRecord, InvocationRecord, MethodId, Outcome, Payload, SerializedValue, StaticSnapshot, TraceLog, Visibility, CONSTRUCTOR_NAME,
    SCHEMA_VERSION,
};
use xlv_runtime::value::Class;
use xlv_runtime::{Interp, Value};

pub fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/textcli")
}

/// Draws `n` values from `s` with a fixed seed. Every call replays the
/// same sequence, so draw related values from one strategy.
pub fn sample<S: Strategy>(s: S, n: usize) -> Vec<S::Value> {
    let mut runner = TestRunner::deterministic();
    (0..n).map(|_| s.new_tree(&mut runner).expect("strategy generates").current()).collect()
}

// ---------------------------------------------------------------------------
// Float-free structures and a brute-force structural oracle

/// A target-runtime structure made of exactly comparable kinds.
#[derive(Debug, Clone)]
pub enum Shape {
    None,
    Bool(bool),
    Int(i64),
    Str(String),
    List(Vec<Shape>),
    Tuple(Vec<Shape>),
    /// Hashable keys only; unique by construction.
    Dict(BTreeMap<Key, Shape>),
    Set(BTreeSet<Key>),
    Obj(&'static str, BTreeMap<String, Shape>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Key {
    Int(i64),
    Str(String),
}

fn key() -> impl Strategy<Value = Key> {
    prop_oneof![(0i64..4).prop_map(Key::Int), "[ab]{0,2}".prop_map(Key::Str)]
}

fn leaf() -> impl Strategy<Value = Shape> {
    prop_oneof![Just(Shape::None), any::<bool>().prop_map(Shape::Bool), (-2i64..3).prop_map(Shape::Int), "[ab]{0,2}".prop_map(Shape::Str),]
}

/// Structures of depth at most `depth` (a leaf has depth 1).
pub fn shape(depth: u32) -> BoxedStrategy<Shape> {
    if depth <= 1 {
        return leaf().boxed();
    }
    let inner = shape(depth - 1);
    prop_oneof![
        2 => leaf(),
        1 => prop::collection::vec(inner.clone(), 0..3).prop_map(Shape::List),
        1 => prop::collection::vec(inner.clone(), 0..3).prop_map(Shape::Tuple),
        1 => prop::collection::btree_map(key(), inner.clone(), 0..3).prop_map(Shape::Dict),
        1 => prop::collection::btree_set(key(), 0..3).prop_map(Shape::Set),
        1 => (prop::sample::select(vec!["A", "B"]), prop::collection::btree_map("[xy]", inner, 0..3)).prop_map(|(c, m)| Shape::Obj(c, m)),
    ]
    .boxed()
}

/// A copy of `s` with random local edits, so that pairs are often but not
/// always equal.
pub fn perturb(s: &Shape, choices: &mut impl Iterator<Item = u8>) -> Shape {
    let c = choices.next().unwrap_or(0);
    match s {
        Shape::Int(i) if c.is_multiple_of(7) => Shape::Int(i + 1),
        Shape::Str(x) if c.is_multiple_of(7) => Shape::Str(format!("{x}a")),
        Shape::Bool(b) if c.is_multiple_of(7) => Shape::Bool(!b),
        Shape::None if c.is_multiple_of(11) => Shape::Int(0),
        Shape::List(xs) if c % 5 == 1 => Shape::Tuple(xs.iter().map(|x| perturb(x, choices)).collect()),
        Shape::List(xs) if c % 13 == 2 => Shape::List(xs.iter().rev().cloned().collect()),
        Shape::List(xs) => Shape::List(xs.iter().map(|x| perturb(x, choices)).collect()),
        Shape::Tuple(xs) if c % 5 == 1 => Shape::List(xs.iter().map(|x| perturb(x, choices)).collect()),
        Shape::Tuple(xs) => Shape::Tuple(xs.iter().map(|x| perturb(x, choices)).collect()),
        Shape::Dict(m) if c % 13 == 3 => Shape::Dict(m.iter().skip(1).map(|(k, v)| (k.clone(), v.clone())).collect()),
        Shape::Dict(m) => Shape::Dict(m.iter().map(|(k, v)| (k.clone(), perturb(v, choices))).collect()),
        Shape::Set(m) if c % 9 == 4 => {
            let mut m = m.clone();
            m.insert(Key::Int(9));
            Shape::Set(m)
        }
        Shape::Obj(cls, m) if c % 17 == 5 => Shape::Obj(if *cls == "A" { "B" } else { "A" }, m.clone()),
        Shape::Obj(cls, m) => Shape::Obj(cls, m.iter().map(|(k, v)| (k.clone(), perturb(v, choices))).collect()),
        other => other.clone(),
    }
}

/// Brute-force structural equality: lists and tuples form one sequence
/// group, sets and mappings ignore order, objects compare class name and
/// attribute map, bools never equal ints.
pub fn oracle_eq(a: &Shape, b: &Shape) -> bool {
    use Shape::*;
    let seq = |s: &Shape| match s {
        List(x) | Tuple(x) => Option::Some(x.clone()),
        _ => Option::None,
    };
    match (a, b) {
        (None, None) => true,
        (Bool(x), Bool(y)) => x == y,
        (Int(x), Int(y)) => x == y,
        (Str(x), Str(y)) => x == y,
        (Dict(x), Dict(y)) => x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| oracle_eq(v, w))),
        (Set(x), Set(y)) => x == y,
        (Obj(c, x), Obj(d, y)) => c == d && x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| oracle_eq(v, w))),
        _ => match (seq(a), seq(b)) {
            (Option::Some(x), Option::Some(y)) => x.len() == y.len() && x.iter().zip(&y).all(|(p, q)| oracle_eq(p, q)),
            _ => false,
        },
    }
}

/// A session with the two object classes used by [`Shape::Obj`].
pub struct ShapeSession {
    pub interp: Interp,
    classes: HashMap<&'static str, Rc<Class>>,
}

impl ShapeSession {
    pub fn new() -> Self {
        let interp = Interp::new();
        let m = interp.run_module_source("shapes", "class A:\n    pass\nclass B:\n    pass\n", "shapes.py").unwrap();
        let mut classes = HashMap::new();
        for name in ["A", "B"] {
            let Some(Value::Class(c)) = m.get(name) else { panic!("class {name}") };
            classes.insert(name, c);
        }
        Self { interp, classes }
    }

    fn key(&self, k: &Key) -> Value {
        match k {
            Key::Int(i) => Value::Int(*i),
            Key::Str(s) => Value::str(s.as_str()),
        }
    }

    /// Builds a fresh runtime value for `s`.
    pub fn build(&self, s: &Shape) -> Value {
        match s {
            Shape::None => Value::None,
            Shape::Bool(b) => Value::Bool(*b),
            Shape::Int(i) => Value::Int(*i),
            Shape::Str(x) => Value::str(x.as_str()),
            Shape::List(xs) => Value::list(xs.iter().map(|x| self.build(x)).collect()),
            Shape::Tuple(xs) => Value::tuple(xs.iter().map(|x| self.build(x)).collect()),
            Shape::Dict(m) => self.interp.make_dict(m.iter().map(|(k, v)| (self.key(k), self.build(v))).collect()).unwrap(),
            Shape::Set(m) => self.interp.make_set(m.iter().map(|k| self.key(k)).collect()).unwrap(),
            Shape::Obj(c, m) => {
                let o = xlv_runtime::interp::new_instance(&self.classes[c]);
                for (k, v) in m {
                    self.interp.setattr(&o, k, self.build(v)).unwrap();
                }
                o
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Call graphs and an independent depth-first oracle

/// Random directed graph over `n` named nodes (self loops included).
pub fn graph(max_nodes: usize) -> impl Strategy<Value = (Vec<String>, Vec<(String, String)>)> {
    (1..=max_nodes).prop_flat_map(|n| {
        let names: Vec<String> = (0..n).map(|i| format!("n{i:02}")).collect();
        let edges = prop::collection::vec((0..n, 0..n), 0..(n * 2));
        (Just(names), edges).prop_map(|(names, es)| {
            let edges = es.into_iter().map(|(a, b)| (names[a].clone(), names[b].clone())).collect::<BTreeSet<_>>().into_iter().collect();
            (names, edges)
        })
    })
}

/// Recursive DFS from every unvisited node in lexicographic order, visiting
/// successors lexicographically. Returns the post-order and the edges to
/// nodes on the current path.
pub fn dfs_oracle(nodes: &[String], edges: &[(String, String)]) -> (Vec<String>, BTreeSet<(String, String)>) {
    let mut succ: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for n in nodes {
        succ.entry(n).or_default();
    }
    for (a, b) in edges {
        succ.entry(a).or_default().insert(b);
        succ.entry(b).or_default();
    }
    fn visit<'a>(
        n: &'a str,
        succ: &BTreeMap<&'a str, BTreeSet<&'a str>>,
        state: &mut HashMap<&'a str, u8>,
        order: &mut Vec<String>,
        back: &mut BTreeSet<(String, String)>,
    ) {
        state.insert(n, 1);
        for &m in &succ[n] {
            match state.get(m).copied().unwrap_or(0) {
                0 => visit(m, succ, state, order, back),
                1 => {
                    back.insert((n.to_string(), m.to_string()));
                }
                _ => {}
            }
        }
        state.insert(n, 2);
        order.push(n.to_string());
    }
    let mut state = HashMap::new();
    let mut order = Vec::new();
    let mut back = BTreeSet::new();
    let keys: Vec<&str> = succ.keys().copied().collect();
    for n in keys {
        if !state.contains_key(n) {
            visit(n, &succ, &mut state, &mut order, &mut back);
        }
    }
    (order, back)
}

// ---------------------------------------------------------------------------
// Random schema-valid traces

fn raw_value(depth: u32) -> BoxedStrategy<SerializedValue> {
    let leaf = prop_oneof![
        Just(SerializedValue::null()),
        any::<i32>().prop_map(|i| SerializedValue::primitive("int", i.to_string())),
        any::<bool>().prop_map(|b| SerializedValue::primitive("boolean", b.to_string())),
        "\\PC{0,6}".prop_map(|s| SerializedValue::primitive("java.lang.String", s)),
        (prop::collection::vec(any::<i8>(), 0..6), any::<prop::sample::Index>()).prop_map(|(b, i)| SerializedValue {
            type_name: "java.io.ByteArrayInputStream".into(),
            identity: None,
            payload: Payload::Stream { position: i.index(b.len() + 1), byte_array: b },
        }),
        (prop::option::of("[a-z ]{0,8}")).prop_map(|m| SerializedValue {
            type_name: "java.lang.IllegalStateException".into(),
            identity: None,
            payload: Payload::Exception { message: m },
        }),
        ("[A-Z]{1,5}", prop::option::of(0i64..5), any::<bool>()).prop_map(|(n, o, v)| SerializedValue {
            type_name: "app.Color".into(),
            identity: None,
            payload: Payload::EnumConst { name: n, value: v.then(|| Box::new(SerializedValue::primitive("int", "7"))), ordinal: o },
        }),
        // Placeholder resolved to a reference (or null) after identities are assigned.
        any::<u16>().prop_map(|k| SerializedValue::reference("ref", &k.to_string())),
    ];
    if depth <= 1 {
        return leaf.boxed();
    }
    let inner = raw_value(depth - 1);
    let cat = prop_oneof![Just(Category::List), Just(Category::Set), Just(Category::ImmutableSequence)];
    let vis = prop_oneof![Just(Visibility::Public), Just(Visibility::Protected), Just(Visibility::Private), Just(Visibility::Package)];
    prop_oneof![
        3 => leaf,
        1 => (cat, prop::collection::vec(inner.clone(), 0..3)).prop_map(|(category, items)| SerializedValue {
            type_name: "java.util.ArrayList".into(),
            identity: None,
            payload: Payload::Collection { category, items },
        }),
        1 => prop::collection::vec(inner.clone(), 0..3).prop_map(|items| SerializedValue {
            type_name: "[I".into(),
            identity: None,
            payload: Payload::Array { category: Category::List, items },
        }),
        1 => prop::collection::vec((inner.clone(), inner.clone()), 0..3).prop_map(|entries| SerializedValue {
            type_name: "java.util.HashMap".into(),
            identity: None,
            payload: Payload::Map { entries },
        }),
        1 => prop::collection::vec((vis, inner), 0..3).prop_map(|fs| SerializedValue {
            type_name: "app.Node".into(),
            identity: None,
            payload: Payload::AppObject {
                fields: fs
                    .into_iter()
                    .enumerate()
                    .map(|(i, (visibility, value))| FieldRecord {
                        name: format!("f{i}"),
                        declaring_class: "app.Node".into(),
                        visibility,
                        is_static: false,
                        value,
                    })
                    .collect(),
            },
        }),
    ]
    .boxed()
}

#[derive(Debug, Clone)]
pub struct RawRecord {
    kind: u8,
    args: Vec<SerializedValue>,
    args_after: Vec<SerializedValue>,
    receiver: (SerializedValue, SerializedValue),
    statics: Vec<(String, SerializedValue)>,
    result: u8,
    result_value: SerializedValue,
    children: Vec<RawRecord>,
}

fn raw_record(depth: u32) -> BoxedStrategy<RawRecord> {
    let children = if depth <= 1 { Just(Vec::new()).boxed() } else { prop::collection::vec(raw_record(depth - 1), 0..3).boxed() };
    (
        0u8..3,
        prop::collection::vec((raw_value(3), raw_value(3)), 0..3),
        (raw_value(3), raw_value(3)),
        prop::collection::vec(("[a-c]", raw_value(2)), 0..2),
        0u8..3,
        raw_value(3),
        children,
    )
        .prop_map(|(kind, args, receiver, statics, result, result_value, children)| {
            let (args, args_after) = args.into_iter().unzip();
            RawRecord { kind, args, args_after, receiver, statics, result, result_value, children }
        })
        .boxed()
}

/// Schema-valid traces: call trees of depth up to 3 with pre-order indices,
/// identities on mutable nodes, and references only to earlier identities.
pub fn trace_log() -> impl Strategy<Value = TraceLog> {
    ("[a-zA-Z#.]{1,12}", prop::collection::vec(raw_record(3), 0..3)).prop_map(|(test_id, raws)| {
        let mut next = 0u64;
        let mut roots: Vec<InvocationRecord> = raws.iter().map(|r| build_record(r, &mut next)).collect();
        let mut ids = Identities::default();
        for r in &mut roots {
            ids.record(r);
        }
        TraceLog { schema_version: SCHEMA_VERSION.into(), test_id, roots }
    })
}

fn build_record(r: &RawRecord, next: &mut u64) -> InvocationRecord {
    let (is_static, is_ctor) = (r.kind == 1, r.kind == 2);
    let method = MethodId {
        class_name: "app.Node".into(),
        method_name: if is_ctor { CONSTRUCTOR_NAME.into() } else { format!("m{}", r.args.len()) },
        signature: "()V".into(),
        is_constructor: is_ctor,
        is_static,
    };
    let statics = |vals: &[(String, SerializedValue)]| -> StaticSnapshot {
        let mut s = StaticSnapshot::new();
        for (f, v) in vals {
            s.entry("app.Node".into()).or_default().insert(f.clone(), v.clone());
        }
        s
    };
    let index = *next;
    *next += 1;
    let result = match r.result {
        0 => Outcome::Void,
        1 => Outcome::Return(r.result_value.clone()),
        _ => Outcome::Thrown(SerializedValue {
            type_name: "java.lang.RuntimeException".into(),
            identity: None,
            payload: Payload::Exception { message: Some("boom".into()) },
        }),
    };
    InvocationRecord {
        method,
        invocation_index: index,
        instance_before: (!is_static && !is_ctor).then(|| r.receiver.0.clone()),
        instance_after: (!is_static).then(|| r.receiver.1.clone()),
        args_before: r.args.clone(),
        args_after: r.args_after.clone(),
        static_before: statics(&r.statics),
        static_after: statics(&r.statics),
        result,
        children: r.children.iter().map(|c| build_record(c, next)).collect(),
    }
}

/// Assigns identity tokens in document order and resolves reference
/// placeholders to earlier tokens.
#[derive(Default)]
struct Identities {
    defined: Vec<String>,
}

impl Identities {
    fn record(&mut self, r: &mut InvocationRecord) {
        if let Some(v) = &mut r.instance_before {
            self.value(v);
        }
        r.args_before.iter_mut().for_each(|v| self.value(v));
        r.static_before.values_mut().flat_map(|m| m.values_mut()).for_each(|v| self.value(v));
        if let Some(v) = &mut r.instance_after {
            self.value(v);
        }
        r.args_after.iter_mut().for_each(|v| self.value(v));
        r.static_after.values_mut().flat_map(|m| m.values_mut()).for_each(|v| self.value(v));
        if let Outcome::Return(v) | Outcome::Thrown(v) = &mut r.result {
            self.value(v);
        }
        r.children.iter_mut().for_each(|c| self.record(c));
    }

    fn value(&mut self, v: &mut SerializedValue) {
        if let Payload::Reference { token } = &v.payload {
            if self.defined.is_empty() {
                *v = SerializedValue::null();
            } else {
                let k: usize = token.parse().unwrap_or(0);
                let t = self.defined[k % self.defined.len()].clone();
                *v = SerializedValue::reference("app.Node", &t);
            }
            return;
        }
        let mutable = matches!(
            v.payload,
            Payload::Collection { .. } | Payload::Array { .. } | Payload::Map { .. } | Payload::Stream { .. } | Payload::AppObject { .. }
        );
        if mutable {
            let t = format!("@{}", self.defined.len() + 1);
            v.identity = Some(t.clone());
            self.defined.push(t);
        }
        match &mut v.payload {
            Payload::Array { items, .. } | Payload::Collection { items, .. } => items.iter_mut().for_each(|c| self.value(c)),
            Payload::Map { entries } => entries.iter_mut().for_each(|(k, x)| {
                self.value(k);
                self.value(x);
            }),
            Payload::AppObject { fields } => fields.iter_mut().for_each(|f| self.value(&mut f.value)),
            Payload::EnumConst { value: Some(x), .. } => self.value(x),
            _ => {}
        }
    }
}

/// Independent pre-order flattening of a trace.
pub fn preorder(log: &TraceLog) -> Vec<u64> {
    fn go(r: &InvocationRecord, out: &mut Vec<u64>) {
        out.push(r.invocation_index);
        r.children.iter().for_each(|c| go(c, out));
    }
    let mut out = Vec::new();
    log.roots.iter().for_each(|r| go(r, &mut out));
    out
}

// ---------------------------------------------------------------------------
// Report rows

/// Any combination of outcome classes for one fragment.
pub fn row() -> impl Strategy<Value = FragmentRow> {
    let mock = prop_oneof![Just(MockClass::NM), Just(MockClass::MS), Just(MockClass::MF)];
    let test = prop_oneof![Just(TestClass::NT), Just(TestClass::ATP), Just(TestClass::OTF), Just(TestClass::MTF), Just(TestClass::ATF)];
    let kind = prop_oneof![Just(FailureKind::RE), Just(FailureKind::AF)];
    (mock, any::<bool>(), test, kind).prop_map(|(mock_class, syntax_ok, test_class, k)| FragmentRow {
        mock_class,
        syntax_ok,
        test_class,
        failure: matches!(test_class, TestClass::OTF | TestClass::MTF | TestClass::ATF).then_some(k),
    })
}
