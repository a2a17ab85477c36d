//! Language-neutral execution traces: one document per executed source test,
//! holding a call tree of intercepted application-method invocations with
//! pre/post snapshots of receiver, arguments, and static fields.
//!
//! Parsing is strict. Every schema violation is reported with a JSON-pointer
//! style path to the offending node, and the canonical serialization
//! (`to_canonical_string`) is stable so that parse-then-serialize is the
//! identity on canonical documents.
//!
//! Document order, used by the reference invariant, is the canonical key
//! order: within a record the before-group (instance, args, statics) precedes
//! the after-group, then the result, then the children.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde_json::{Map, Value as Json};

/// The only supported `schema_version`.
pub const SCHEMA_VERSION: &str = "1";

/// Failure to ingest a trace document.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TraceError {
    #[error("schema error at {path}: {msg}")]
    Schema { path: String, msg: String },
    #[error("unsupported schema_version {found:?} (expected \"1\")")]
    Version { found: String },
    #[error("malformed document: {0}")]
    Malformed(String),
}

fn schema(path: &str, msg: impl Into<String>) -> TraceError {
    TraceError::Schema { path: if path.is_empty() { "/".into() } else { path.to_string() }, msg: msg.into() }
}

/// Tag of a [`SerializedValue`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Null,
    Primitive,
    Array,
    Collection,
    Map,
    Stream,
    EnumConst,
    Exception,
    AppObject,
    Reference,
}

impl Kind {
    pub const ALL: [Kind; 10] = [
        Kind::Null,
        Kind::Primitive,
        Kind::Array,
        Kind::Collection,
        Kind::Map,
        Kind::Stream,
        Kind::EnumConst,
        Kind::Exception,
        Kind::AppObject,
        Kind::Reference,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Null => "null",
            Kind::Primitive => "primitive",
            Kind::Array => "array",
            Kind::Collection => "collection",
            Kind::Map => "map",
            Kind::Stream => "stream",
            Kind::EnumConst => "enum_const",
            Kind::Exception => "exception",
            Kind::AppObject => "app_object",
            Kind::Reference => "reference",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Container semantics of an array or collection node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    List,
    Set,
    ImmutableSequence,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::List => "list",
            Category::Set => "set",
            Category::ImmutableSequence => "immutable_sequence",
        }
    }

    fn parse(s: &str) -> Option<Category> {
        match s {
            "list" => Some(Category::List),
            "set" => Some(Category::Set),
            "immutable_sequence" => Some(Category::ImmutableSequence),
            _ => None,
        }
    }
}

/// Source-language field visibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Visibility {
    Public,
    Protected,
    Private,
    Package,
}

impl Visibility {
    pub fn as_str(self) -> &'static str {
        match self {
            Visibility::Public => "public",
            Visibility::Protected => "protected",
            Visibility::Private => "private",
            Visibility::Package => "package",
        }
    }

    fn parse(s: &str) -> Option<Visibility> {
        match s {
            "public" => Some(Visibility::Public),
            "protected" => Some(Visibility::Protected),
            "private" => Some(Visibility::Private),
            "package" => Some(Visibility::Package),
            _ => None,
        }
    }

    /// Whether the field is stored under a class-mangled attribute name.
    pub fn is_mangled(self) -> bool {
        matches!(self, Visibility::Private | Visibility::Protected)
    }
}

/// One field of an application object.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRecord {
    pub name: String,
    pub declaring_class: String,
    pub visibility: Visibility,
    pub is_static: bool,
    pub value: SerializedValue,
}

/// Kind-specific content of a [`SerializedValue`].
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Null,
    Primitive {
        value: String,
    },
    Array {
        category: Category,
        items: Vec<SerializedValue>,
    },
    Collection {
        category: Category,
        items: Vec<SerializedValue>,
    },
    Map {
        entries: Vec<(SerializedValue, SerializedValue)>,
    },
    /// `position` never exceeds `byte_array.len()`.
    Stream {
        byte_array: Vec<i8>,
        position: usize,
    },
    EnumConst {
        name: String,
        value: Option<Box<SerializedValue>>,
        ordinal: Option<i64>,
    },
    Exception {
        message: Option<String>,
    },
    AppObject {
        fields: Vec<FieldRecord>,
    },
    Reference {
        token: String,
    },
}

/// A language-neutral encoding of one runtime value.
#[derive(Debug, Clone, PartialEq)]
pub struct SerializedValue {
    pub type_name: String,
    pub identity: Option<String>,
    pub payload: Payload,
}

impl SerializedValue {
    pub fn kind(&self) -> Kind {
        match &self.payload {
            Payload::Null => Kind::Null,
            Payload::Primitive { .. } => Kind::Primitive,
            Payload::Array { .. } => Kind::Array,
            Payload::Collection { .. } => Kind::Collection,
            Payload::Map { .. } => Kind::Map,
            Payload::Stream { .. } => Kind::Stream,
            Payload::EnumConst { .. } => Kind::EnumConst,
            Payload::Exception { .. } => Kind::Exception,
            Payload::AppObject { .. } => Kind::AppObject,
            Payload::Reference { .. } => Kind::Reference,
        }
    }

    pub fn null() -> Self {
        Self { type_name: "null".into(), identity: None, payload: Payload::Null }
    }

    pub fn primitive(type_name: &str, value: impl Into<String>) -> Self {
        Self { type_name: type_name.into(), identity: None, payload: Payload::Primitive { value: value.into() } }
    }

    pub fn reference(type_name: &str, token: &str) -> Self {
        Self { type_name: type_name.into(), identity: None, payload: Payload::Reference { token: token.into() } }
    }

    /// Direct child nodes in document order.
    pub fn children(&self) -> Vec<&SerializedValue> {
        match &self.payload {
            Payload::Array { items, .. } | Payload::Collection { items, .. } => items.iter().collect(),
            Payload::Map { entries } => entries.iter().flat_map(|(k, v)| [k, v]).collect(),
            Payload::EnumConst { value: Some(v), .. } => vec![v.as_ref()],
            Payload::AppObject { fields } => fields.iter().map(|f| &f.value).collect(),
            _ => Vec::new(),
        }
    }

    /// Pre-order walk over this node and all nested nodes.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a SerializedValue)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }
}

/// Identity of a source-language method.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodId {
    pub class_name: String,
    pub method_name: String,
    pub signature: String,
    pub is_constructor: bool,
    pub is_static: bool,
}

/// Source-language constructor token.
pub const CONSTRUCTOR_NAME: &str = "<init>";

impl MethodId {
    /// Unqualified class name: the segment after the last `.` and `$`.
    pub fn simple_class_name(&self) -> &str {
        simple_name(&self.class_name)
    }
}

/// Unqualified form of a fully-qualified (possibly nested) class name.
pub fn simple_name(fqn: &str) -> &str {
    let tail = fqn.rsplit('.').next().unwrap_or(fqn);
    tail.rsplit('$').next().unwrap_or(tail)
}

/// Static-field snapshot: class name to field name to value.
pub type StaticSnapshot = BTreeMap<String, BTreeMap<String, SerializedValue>>;

/// How an invocation ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Return(SerializedValue),
    Thrown(SerializedValue),
    Void,
}

/// One intercepted method call.
#[derive(Debug, Clone, PartialEq)]
pub struct InvocationRecord {
    pub method: MethodId,
    pub invocation_index: u64,
    pub instance_before: Option<SerializedValue>,
    pub instance_after: Option<SerializedValue>,
    pub args_before: Vec<SerializedValue>,
    pub args_after: Vec<SerializedValue>,
    pub static_before: StaticSnapshot,
    pub static_after: StaticSnapshot,
    pub result: Outcome,
    pub children: Vec<InvocationRecord>,
}

impl InvocationRecord {
    /// Values of the record itself (not its children) in document order.
    pub fn own_values(&self) -> Vec<&SerializedValue> {
        let mut out = Vec::new();
        out.extend(self.instance_before.iter());
        out.extend(self.args_before.iter());
        out.extend(self.static_before.values().flat_map(|m| m.values()));
        out.extend(self.instance_after.iter());
        out.extend(self.args_after.iter());
        out.extend(self.static_after.values().flat_map(|m| m.values()));
        match &self.result {
            Outcome::Return(v) | Outcome::Thrown(v) => out.push(v),
            Outcome::Void => {}
        }
        out
    }

    fn count(&self) -> usize {
        1 + self.children.iter().map(InvocationRecord::count).sum::<usize>()
    }
}

/// All intercepted invocations of one executed source test.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceLog {
    pub schema_version: String,
    pub test_id: String,
    pub roots: Vec<InvocationRecord>,
}

impl TraceLog {
    /// Number of invocation records in the whole tree.
    pub fn record_count(&self) -> usize {
        self.roots.iter().map(InvocationRecord::count).sum()
    }

    /// Every serialized value in document order, nested nodes included.
    pub fn walk_values<'a>(&'a self, f: &mut dyn FnMut(&'a SerializedValue)) {
        fn rec<'a>(r: &'a InvocationRecord, f: &mut dyn FnMut(&'a SerializedValue)) {
            for v in r.own_values() {
                v.walk(f);
            }
            for c in &r.children {
                rec(c, f);
            }
        }
        for r in &self.roots {
            rec(r, f);
        }
    }

    /// First non-reference node carrying each identity token.
    pub fn definitions(&self) -> HashMap<String, &SerializedValue> {
        let mut defs: HashMap<String, &SerializedValue> = HashMap::new();
        self.walk_values(&mut |v| {
            if let (Some(tok), false) = (&v.identity, v.kind() == Kind::Reference) {
                defs.entry(tok.clone()).or_insert(v);
            }
        });
        defs
    }
}

// ---------------------------------------------------------------------------
// Parsing

/// Parses and validates one trace document.
pub fn parse_trace(raw: &[u8]) -> Result<TraceLog, TraceError> {
    let doc: Json = serde_json::from_slice(raw).map_err(|e| TraceError::Malformed(e.to_string()))?;
    let top = obj(&doc, "")?;
    let version = match top.get("schema_version") {
        Some(Json::String(s)) => s.clone(),
        Some(_) => return Err(schema("/schema_version", "expected a string")),
        None => return Err(schema("/schema_version", "missing field")),
    };
    if version != SCHEMA_VERSION {
        return Err(TraceError::Version { found: version });
    }
    let test_id = string(top, "", "test_id")?;
    let roots = array(top, "", "roots")?.iter().enumerate().map(|(i, r)| parse_record(r, &format!("/roots/{i}"))).collect::<Result<Vec<_>, _>>()?;
    let log = TraceLog { schema_version: version, test_id, roots };
    validate(&log)?;
    Ok(log)
}

fn obj<'a>(v: &'a Json, path: &str) -> Result<&'a Map<String, Json>, TraceError> {
    v.as_object().ok_or_else(|| schema(path, "expected an object"))
}

fn field<'a>(o: &'a Map<String, Json>, path: &str, key: &str) -> Result<&'a Json, TraceError> {
    o.get(key).ok_or_else(|| schema(&format!("{path}/{key}"), "missing field"))
}

fn string(o: &Map<String, Json>, path: &str, key: &str) -> Result<String, TraceError> {
    field(o, path, key)?.as_str().map(str::to_string).ok_or_else(|| schema(&format!("{path}/{key}"), "expected a string"))
}

fn boolean(o: &Map<String, Json>, path: &str, key: &str) -> Result<bool, TraceError> {
    field(o, path, key)?.as_bool().ok_or_else(|| schema(&format!("{path}/{key}"), "expected a boolean"))
}

fn array<'a>(o: &'a Map<String, Json>, path: &str, key: &str) -> Result<&'a Vec<Json>, TraceError> {
    field(o, path, key)?.as_array().ok_or_else(|| schema(&format!("{path}/{key}"), "expected an array"))
}

fn values(o: &Map<String, Json>, path: &str, key: &str) -> Result<Vec<SerializedValue>, TraceError> {
    array(o, path, key)?.iter().enumerate().map(|(i, v)| parse_value(v, &format!("{path}/{key}/{i}"))).collect()
}

fn optional_value(o: &Map<String, Json>, path: &str, key: &str) -> Result<Option<SerializedValue>, TraceError> {
    match o.get(key) {
        None | Some(Json::Null) => Ok(None),
        Some(v) => parse_value(v, &format!("{path}/{key}")).map(Some),
    }
}

fn parse_statics(o: &Map<String, Json>, path: &str, key: &str) -> Result<StaticSnapshot, TraceError> {
    let p = format!("{path}/{key}");
    let mut out = BTreeMap::new();
    for (class, fields) in obj(field(o, path, key)?, &p)? {
        let cp = format!("{p}/{class}");
        let mut inner = BTreeMap::new();
        for (name, v) in obj(fields, &cp)? {
            inner.insert(name.clone(), parse_value(v, &format!("{cp}/{name}"))?);
        }
        out.insert(class.clone(), inner);
    }
    Ok(out)
}

fn parse_record(v: &Json, path: &str) -> Result<InvocationRecord, TraceError> {
    let o = obj(v, path)?;
    let mp = format!("{path}/method");
    let m = obj(field(o, path, "method")?, &mp)?;
    let method = MethodId {
        class_name: string(m, &mp, "class")?,
        method_name: string(m, &mp, "name")?,
        signature: string(m, &mp, "signature")?,
        is_constructor: boolean(m, &mp, "is_constructor")?,
        is_static: boolean(m, &mp, "is_static")?,
    };
    let invocation_index =
        field(o, path, "invocation_index")?.as_u64().ok_or_else(|| schema(&format!("{path}/invocation_index"), "expected a non-negative integer"))?;
    let rp = format!("{path}/result");
    let r = obj(field(o, path, "result")?, &rp)?;
    if r.len() != 1 {
        return Err(schema(&rp, "expected exactly one of return, thrown, void"));
    }
    let result = if let Some(v) = r.get("return") {
        Outcome::Return(parse_value(v, &format!("{rp}/return"))?)
    } else if let Some(v) = r.get("thrown") {
        Outcome::Thrown(parse_value(v, &format!("{rp}/thrown"))?)
    } else if let Some(v) = r.get("void") {
        if v != &Json::Bool(true) {
            return Err(schema(&format!("{rp}/void"), "void marker must be true"));
        }
        Outcome::Void
    } else {
        return Err(schema(&rp, "expected one of return, thrown, void"));
    };
    let children = array(o, path, "children")?
        .iter()
        .enumerate()
        .map(|(i, c)| parse_record(c, &format!("{path}/children/{i}")))
        .collect::<Result<Vec<_>, _>>()?;
    let rec = InvocationRecord {
        method,
        invocation_index,
        instance_before: optional_value(o, path, "instance_before")?,
        instance_after: optional_value(o, path, "instance_after")?,
        args_before: values(o, path, "args_before")?,
        args_after: values(o, path, "args_after")?,
        static_before: parse_statics(o, path, "static_before")?,
        static_after: parse_statics(o, path, "static_after")?,
        result,
        children,
    };
    check_record_shape(&rec, path)?;
    Ok(rec)
}

fn check_record_shape(r: &InvocationRecord, path: &str) -> Result<(), TraceError> {
    let m = &r.method;
    if m.is_constructor && m.method_name != CONSTRUCTOR_NAME {
        return Err(schema(&format!("{path}/method/name"), "constructor name must be \"<init>\""));
    }
    if m.is_constructor && m.is_static {
        return Err(schema(&format!("{path}/method"), "a constructor cannot be static"));
    }
    if r.args_before.len() != r.args_after.len() {
        return Err(schema(&format!("{path}/args_after"), format!("{} args after vs {} before", r.args_after.len(), r.args_before.len())));
    }
    let (want_before, want_after) = if m.is_static {
        (false, false)
    } else if m.is_constructor {
        (false, true)
    } else {
        (true, true)
    };
    if r.instance_before.is_some() != want_before {
        return Err(schema(&format!("{path}/instance_before"), if want_before { "required for instance methods" } else { "must be absent" }));
    }
    if r.instance_after.is_some() != want_after {
        return Err(schema(
            &format!("{path}/instance_after"),
            if want_after { "required for instance methods and constructors" } else { "must be absent" },
        ));
    }
    if let Outcome::Thrown(t) = &r.result {
        if !matches!(t.kind(), Kind::Exception | Kind::AppObject | Kind::Reference) {
            return Err(schema(&format!("{path}/result/thrown"), "thrown value must be an exception"));
        }
    }
    Ok(())
}

fn parse_value(v: &Json, path: &str) -> Result<SerializedValue, TraceError> {
    let o = obj(v, path)?;
    let kind_s = string(o, path, "kind")?;
    let kind = Kind::parse(&kind_s).ok_or_else(|| schema(&format!("{path}/kind"), format!("unknown kind {kind_s:?}")))?;
    let type_name = string(o, path, "type_name")?;
    let identity = match o.get("identity") {
        None | Some(Json::Null) => None,
        Some(Json::String(s)) => Some(s.clone()),
        Some(_) => return Err(schema(&format!("{path}/identity"), "expected a string")),
    };
    let pp = format!("{path}/payload");
    let p = obj(field(o, path, "payload")?, &pp)?;
    let payload = match kind {
        Kind::Null => Payload::Null,
        Kind::Primitive => Payload::Primitive { value: string(p, &pp, "value")? },
        Kind::Array | Kind::Collection => {
            let cat_s = string(p, &pp, "category")?;
            let category = Category::parse(&cat_s).ok_or_else(|| schema(&format!("{pp}/category"), format!("unknown category {cat_s:?}")))?;
            let items = values(p, &pp, "items")?;
            if kind == Kind::Array {
                Payload::Array { category, items }
            } else {
                Payload::Collection { category, items }
            }
        }
        Kind::Map => {
            let mut entries = Vec::new();
            for (i, e) in array(p, &pp, "entries")?.iter().enumerate() {
                let ep = format!("{pp}/entries/{i}");
                let eo = obj(e, &ep)?;
                let k = parse_value(field(eo, &ep, "key")?, &format!("{ep}/key"))?;
                let v = parse_value(field(eo, &ep, "value")?, &format!("{ep}/value"))?;
                entries.push((k, v));
            }
            Payload::Map { entries }
        }
        Kind::Stream => {
            let mut bytes = Vec::new();
            for (i, b) in array(p, &pp, "byte_array")?.iter().enumerate() {
                let n = b
                    .as_i64()
                    .and_then(|n| i8::try_from(n).ok())
                    .ok_or_else(|| schema(&format!("{pp}/byte_array/{i}"), "expected an integer in -128..127"))?;
                bytes.push(n);
            }
            let position =
                field(p, &pp, "position")?.as_u64().ok_or_else(|| schema(&format!("{pp}/position"), "expected a non-negative integer"))? as usize;
            if position > bytes.len() {
                return Err(schema(&format!("{pp}/position"), format!("position {position} exceeds buffer length {}", bytes.len())));
            }
            Payload::Stream { byte_array: bytes, position }
        }
        Kind::EnumConst => {
            let name = string(p, &pp, "name")?;
            let value = optional_value(p, &pp, "value")?.map(Box::new);
            let ordinal = match p.get("ordinal") {
                None | Some(Json::Null) => None,
                Some(n) => Some(n.as_i64().ok_or_else(|| schema(&format!("{pp}/ordinal"), "expected an integer"))?),
            };
            Payload::EnumConst { name, value, ordinal }
        }
        Kind::Exception => {
            let message = match field(p, &pp, "message")? {
                Json::Null => None,
                Json::String(s) => Some(s.clone()),
                _ => return Err(schema(&format!("{pp}/message"), "expected a string or null")),
            };
            Payload::Exception { message }
        }
        Kind::AppObject => {
            let mut fields = Vec::new();
            let mut seen = HashSet::new();
            for (i, f) in array(p, &pp, "fields")?.iter().enumerate() {
                let fp = format!("{pp}/fields/{i}");
                let fo = obj(f, &fp)?;
                let name = string(fo, &fp, "name")?;
                let declaring_class = string(fo, &fp, "declaring_class")?;
                let vis_s = string(fo, &fp, "visibility")?;
                let visibility =
                    Visibility::parse(&vis_s).ok_or_else(|| schema(&format!("{fp}/visibility"), format!("unknown visibility {vis_s:?}")))?;
                if !seen.insert((name.clone(), declaring_class.clone())) {
                    return Err(schema(&fp, format!("duplicate field {name} declared in {declaring_class}")));
                }
                fields.push(FieldRecord {
                    name,
                    declaring_class,
                    visibility,
                    is_static: boolean(fo, &fp, "is_static")?,
                    value: parse_value(field(fo, &fp, "value")?, &format!("{fp}/value"))?,
                });
            }
            Payload::AppObject { fields }
        }
        Kind::Reference => Payload::Reference { token: string(p, &pp, "ref")? },
    };
    Ok(SerializedValue { type_name, identity, payload })
}

/// Checks log-wide invariants: strictly increasing pre-order indices and
/// references that point back to an earlier definition.
pub fn validate(log: &TraceLog) -> Result<(), TraceError> {
    let mut last: Option<u64> = None;
    let mut defined: HashSet<String> = HashSet::new();
    for (i, r) in log.roots.iter().enumerate() {
        validate_record(r, &format!("/roots/{i}"), &mut last, &mut defined)?;
    }
    Ok(())
}

fn validate_record(r: &InvocationRecord, path: &str, last: &mut Option<u64>, defined: &mut HashSet<String>) -> Result<(), TraceError> {
    if let Some(prev) = *last {
        if r.invocation_index <= prev {
            return Err(schema(
                &format!("{path}/invocation_index"),
                format!("index {} does not follow {prev} in execution order", r.invocation_index),
            ));
        }
    }
    *last = Some(r.invocation_index);
    for v in r.own_values() {
        let mut err = None;
        v.walk(&mut |n| {
            if err.is_some() {
                return;
            }
            match &n.payload {
                Payload::Reference { token } if !defined.contains(token) => {
                    err = Some(format!("reference to undefined identity {token:?}"));
                }
                _ => {
                    if let Some(t) = &n.identity {
                        defined.insert(t.clone());
                    }
                }
            }
        });
        if let Some(msg) = err {
            return Err(schema(path, msg));
        }
    }
    for (i, c) in r.children.iter().enumerate() {
        validate_record(c, &format!("{path}/children/{i}"), last, defined)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Canonical serialization

/// Canonical JSON tree of a serialized value.
pub fn value_to_json(v: &SerializedValue) -> Json {
    let mut o = Map::new();
    o.insert("kind".into(), Json::String(v.kind().as_str().into()));
    o.insert("type_name".into(), Json::String(v.type_name.clone()));
    if let Some(t) = &v.identity {
        o.insert("identity".into(), Json::String(t.clone()));
    }
    let mut p = Map::new();
    match &v.payload {
        Payload::Null => {}
        Payload::Primitive { value } => {
            p.insert("value".into(), Json::String(value.clone()));
        }
        Payload::Array { category, items } | Payload::Collection { category, items } => {
            p.insert("category".into(), Json::String(category.as_str().into()));
            p.insert("items".into(), Json::Array(items.iter().map(value_to_json).collect()));
        }
        Payload::Map { entries } => {
            let es = entries
                .iter()
                .map(|(k, v)| {
                    let mut e = Map::new();
                    e.insert("key".into(), value_to_json(k));
                    e.insert("value".into(), value_to_json(v));
                    Json::Object(e)
                })
                .collect();
            p.insert("entries".into(), Json::Array(es));
        }
        Payload::Stream { byte_array, position } => {
            p.insert("byte_array".into(), Json::Array(byte_array.iter().map(|b| Json::from(*b)).collect()));
            p.insert("position".into(), Json::from(*position));
        }
        Payload::EnumConst { name, value, ordinal } => {
            p.insert("name".into(), Json::String(name.clone()));
            if let Some(v) = value {
                p.insert("value".into(), value_to_json(v));
            }
            if let Some(o) = ordinal {
                p.insert("ordinal".into(), Json::from(*o));
            }
        }
        Payload::Exception { message } => {
            p.insert("message".into(), message.clone().map_or(Json::Null, Json::String));
        }
        Payload::AppObject { fields } => {
            let fs = fields
                .iter()
                .map(|f| {
                    let mut e = Map::new();
                    e.insert("name".into(), Json::String(f.name.clone()));
                    e.insert("declaring_class".into(), Json::String(f.declaring_class.clone()));
                    e.insert("visibility".into(), Json::String(f.visibility.as_str().into()));
                    e.insert("is_static".into(), Json::Bool(f.is_static));
                    e.insert("value".into(), value_to_json(&f.value));
                    Json::Object(e)
                })
                .collect();
            p.insert("fields".into(), Json::Array(fs));
        }
        Payload::Reference { token } => {
            p.insert("ref".into(), Json::String(token.clone()));
        }
    }
    o.insert("payload".into(), Json::Object(p));
    Json::Object(o)
}

/// Canonical JSON tree of a static-field snapshot.
pub fn statics_to_json(s: &StaticSnapshot) -> Json {
    Json::Object(
        s.iter()
            .map(|(c, fs)| {
                let inner = fs.iter().map(|(f, v)| (f.clone(), value_to_json(v))).collect();
                (c.clone(), Json::Object(inner))
            })
            .collect(),
    )
}

fn record_to_json(r: &InvocationRecord) -> Json {
    let mut o = Map::new();
    let mut m = Map::new();
    m.insert("class".into(), Json::String(r.method.class_name.clone()));
    m.insert("name".into(), Json::String(r.method.method_name.clone()));
    m.insert("signature".into(), Json::String(r.method.signature.clone()));
    m.insert("is_constructor".into(), Json::Bool(r.method.is_constructor));
    m.insert("is_static".into(), Json::Bool(r.method.is_static));
    o.insert("method".into(), Json::Object(m));
    o.insert("invocation_index".into(), Json::from(r.invocation_index));
    if let Some(v) = &r.instance_before {
        o.insert("instance_before".into(), value_to_json(v));
    }
    o.insert("args_before".into(), Json::Array(r.args_before.iter().map(value_to_json).collect()));
    o.insert("static_before".into(), statics_to_json(&r.static_before));
    if let Some(v) = &r.instance_after {
        o.insert("instance_after".into(), value_to_json(v));
    }
    o.insert("args_after".into(), Json::Array(r.args_after.iter().map(value_to_json).collect()));
    o.insert("static_after".into(), statics_to_json(&r.static_after));
    o.insert("result".into(), outcome_to_json(&r.result));
    o.insert("children".into(), Json::Array(r.children.iter().map(record_to_json).collect()));
    Json::Object(o)
}

/// Canonical JSON tree of a whole trace.
pub fn trace_to_json(log: &TraceLog) -> Json {
    let mut o = Map::new();
    o.insert("schema_version".into(), Json::String(log.schema_version.clone()));
    o.insert("test_id".into(), Json::String(log.test_id.clone()));
    o.insert("roots".into(), Json::Array(log.roots.iter().map(record_to_json).collect()));
    Json::Object(o)
}

/// Canonical text form: two-space indented JSON with a trailing newline.
pub fn to_canonical_string(log: &TraceLog) -> String {
    let mut s = serde_json::to_string_pretty(&trace_to_json(log)).expect("JSON trees always serialize");
    s.push('\n');
    s
}

/// Parses one serialized value from an already-decoded JSON tree.
pub fn value_from_json(j: &Json) -> Result<SerializedValue, TraceError> {
    parse_value(j, "")
}

/// Parses a static-field snapshot from an already-decoded JSON tree.
pub fn statics_from_json(j: &Json) -> Result<StaticSnapshot, TraceError> {
    let mut wrapper = Map::new();
    wrapper.insert("s".into(), j.clone());
    parse_statics(&wrapper, "", "s")
}

/// Canonical JSON tree of an invocation outcome.
pub fn outcome_to_json(o: &Outcome) -> Json {
    let mut res = Map::new();
    match o {
        Outcome::Return(v) => res.insert("return".into(), value_to_json(v)),
        Outcome::Thrown(v) => res.insert("thrown".into(), value_to_json(v)),
        Outcome::Void => res.insert("void".into(), Json::Bool(true)),
    };
    Json::Object(res)
}

/// Parses an invocation outcome (`{"return": v}`, `{"thrown": v}` or `{"void": true}`).
pub fn outcome_from_json(j: &Json) -> Result<Outcome, TraceError> {
    let r = obj(j, "")?;
    if let Some(v) = r.get("return") {
        Ok(Outcome::Return(parse_value(v, "/return")?))
    } else if let Some(v) = r.get("thrown") {
        Ok(Outcome::Thrown(parse_value(v, "/thrown")?))
    } else if r.get("void") == Some(&Json::Bool(true)) {
        Ok(Outcome::Void)
    } else {
        Err(schema("", "expected one of return, thrown, void"))
    }
}

// ---------------------------------------------------------------------------
// Call-tree queries

/// Every invocation in pre-order; each is a candidate focal method.
pub fn extract_invocations(log: &TraceLog) -> Vec<&InvocationRecord> {
    fn rec<'a>(r: &'a InvocationRecord, out: &mut Vec<&'a InvocationRecord>) {
        out.push(r);
        for c in &r.children {
            rec(c, out);
        }
    }
    let mut out = Vec::new();
    for r in &log.roots {
        rec(r, &mut out);
    }
    out
}

/// Children of `focal` whose method is an application method, in execution order.
pub fn direct_callees<'a>(focal: &'a InvocationRecord, app_methods: &HashSet<MethodId>) -> Vec<&'a InvocationRecord> {
    focal.children.iter().filter(|c| app_methods.contains(&c.method)).collect()
}

/// Every method id that occurs anywhere in the log.
pub fn methods_in(log: &TraceLog) -> HashSet<MethodId> {
    extract_invocations(log).into_iter().map(|r| r.method.clone()).collect()
}
