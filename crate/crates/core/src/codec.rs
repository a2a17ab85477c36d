//! Reconstruction of serialized values as live target-runtime objects.
//!
//! Mutable values carrying an identity token are bound in the
//! [`IdentityRegistry`] before their payload is descended, so cycles
//! terminate and shared tokens yield one shared object. Application objects
//! are allocated without running their constructor; private and protected
//! fields land under the class-mangled attribute `_C__f`.

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use xlv_runtime::interp::new_instance;
use xlv_runtime::value::{new_ref, ByteStream, IterSource, IterState, TextStream};
use xlv_runtime::{Class, Exc, Interp, ModuleObj, Value};

use crate::trace::{simple_name, Category, FieldRecord, Kind, Payload, SerializedValue, StaticSnapshot};

/// Failure to rebuild a value.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodecError {
    #[error("unknown type {0}")]
    UnknownType(String),
    #[error("reference to unbound identity {0}")]
    UnboundReference(String),
    #[error("bad payload for {type_name}: {msg}")]
    Payload { type_name: String, msg: String },
    #[error("cannot assign field {field} on {class}: {msg}")]
    FieldAssign { class: String, field: String, msg: String },
}

fn payload_err(v: &SerializedValue, msg: impl Into<String>) -> CodecError {
    CodecError::Payload { type_name: v.type_name.clone(), msg: msg.into() }
}

/// Identity token to reconstructed object, scoped to one reconstruction session.
#[derive(Default)]
pub struct IdentityRegistry {
    bindings: HashMap<String, Value>,
}

impl IdentityRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, token: &str) -> Option<&Value> {
        self.bindings.get(token)
    }

    /// Binds `token`; an existing binding is kept (a token binds once).
    pub fn bind(&mut self, token: &str, v: Value) {
        self.bindings.entry(token.to_string()).or_insert(v);
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }
}

/// Source class name to translated class.
#[derive(Default, Clone)]
pub struct TargetClassRegistry {
    by_name: BTreeMap<String, Rc<Class>>,
}

impl TargetClassRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `cls` under a source name (fully qualified or simple).
    pub fn register(&mut self, source_name: &str, cls: Rc<Class>) {
        self.by_name.insert(source_name.to_string(), cls);
    }

    /// Registers every class defined at top level of the given modules (and
    /// classes nested one level inside them as `Outer$Inner`) by simple name.
    pub fn from_modules(modules: &[Rc<ModuleObj>]) -> Self {
        let mut reg = Self::new();
        for m in modules {
            let attrs: Vec<Value> = m.dict.borrow().values().cloned().collect();
            for v in attrs {
                let Value::Class(c) = v else { continue };
                if c.module != m.name {
                    continue;
                }
                let nested: Vec<Rc<Class>> = c
                    .dict
                    .borrow()
                    .values()
                    .filter_map(|a| match a {
                        Value::Class(n) => Some(n.clone()),
                        _ => None,
                    })
                    .collect();
                for n in nested {
                    reg.by_name.entry(format!("{}${}", c.name, n.name)).or_insert(n);
                }
                reg.by_name.entry(c.name.clone()).or_insert(c);
            }
        }
        reg
    }

    /// Resolves a source class name: exact key, then `Outer$Inner`, then simple name.
    pub fn resolve(&self, source_name: &str) -> Option<Rc<Class>> {
        if let Some(c) = self.by_name.get(source_name) {
            return Some(c.clone());
        }
        let tail = source_name.rsplit('.').next().unwrap_or(source_name);
        if let Some(c) = self.by_name.get(tail) {
            return Some(c.clone());
        }
        self.by_name.get(simple_name(source_name)).cloned()
    }

    /// Registered (name, class) pairs in name order.
    pub fn entries(&self) -> impl Iterator<Item = (&String, &Rc<Class>)> {
        self.by_name.iter()
    }
}

/// Private attribute name for field `field` declared in `declaring_class`.
pub fn mangled_name(declaring_class: &str, field: &str) -> String {
    let c = simple_name(declaring_class).trim_start_matches('_');
    format!("_{c}__{field}")
}

/// Attribute name a traced field is stored under.
pub fn attribute_name(f: &FieldRecord) -> String {
    if f.visibility.is_mangled() {
        mangled_name(&f.declaring_class, &f.name)
    } else {
        f.name.clone()
    }
}

const LIBRARY_PREFIXES: [&str; 5] = ["java.", "javax.", "sun.", "jdk.", "com.sun."];

/// Whether a declaring class belongs to the source standard library.
pub fn is_library_class(name: &str) -> bool {
    LIBRARY_PREFIXES.iter().any(|p| name.starts_with(p))
}

const TEXT_STREAMS: [&str; 7] = [
    "java.io.StringReader",
    "java.io.StringWriter",
    "java.io.CharArrayReader",
    "java.io.CharArrayWriter",
    "java.lang.StringBuffer",
    "java.lang.StringBuilder",
    "java.nio.CharBuffer",
];

/// Whether a stream type reconstructs to a text stream rather than bytes.
pub fn is_text_stream(type_name: &str) -> bool {
    TEXT_STREAMS.contains(&type_name)
}

/// Target exception class for a source library exception type.
pub fn exception_class_name(type_name: &str) -> Option<&'static str> {
    Some(match type_name {
        "java.lang.Throwable" | "java.lang.Exception" => "Exception",
        "java.lang.Error" => "BaseException",
        "java.lang.RuntimeException" | "java.lang.IllegalStateException" => "RuntimeError",
        "java.lang.IllegalArgumentException" | "java.lang.NumberFormatException" => "ValueError",
        "java.lang.UnsupportedOperationException" => "NotImplementedError",
        "java.lang.IndexOutOfBoundsException" | "java.lang.ArrayIndexOutOfBoundsException" | "java.lang.StringIndexOutOfBoundsException" => {
            "IndexError"
        }
        "java.lang.ArithmeticException" => "ZeroDivisionError",
        "java.lang.ClassCastException" => "TypeError",
        "java.lang.NullPointerException" => "AttributeError",
        "java.util.NoSuchElementException" => "StopIteration",
        "java.io.IOException" | "java.io.UncheckedIOException" => "OSError",
        "java.io.FileNotFoundException" => "FileNotFoundError",
        "java.io.EOFException" => "EOFError",
        "java.lang.StackOverflowError" => "RecursionError",
        "java.lang.AssertionError" => "AssertionError",
        _ => return None,
    })
}

/// Rebuilds serialized values inside one interpreter session.
pub struct Codec<'a> {
    pub interp: &'a Interp,
    pub classes: &'a TargetClassRegistry,
}

impl<'a> Codec<'a> {
    pub fn new(interp: &'a Interp, classes: &'a TargetClassRegistry) -> Self {
        Self { interp, classes }
    }

    fn runtime(&self, v: &SerializedValue, e: Exc) -> CodecError {
        payload_err(v, e.to_string())
    }

    /// Builds a fresh target value equivalent to `v`.
    pub fn reconstruct(&self, v: &SerializedValue, reg: &mut IdentityRegistry) -> Result<Value, CodecError> {
        if let Payload::Reference { token } = &v.payload {
            return reg.get(token).cloned().ok_or_else(|| CodecError::UnboundReference(token.clone()));
        }
        if let Some(t) = &v.identity {
            if let Some(bound) = reg.get(t) {
                return Ok(bound.clone());
            }
        }
        let shell = self.shell(v)?;
        match shell {
            Some(obj) => {
                if let Some(t) = &v.identity {
                    reg.bind(t, obj.clone());
                }
                self.fill(&obj, v, reg)?;
                Ok(obj)
            }
            None => {
                let out = self.build_immutable(v, reg)?;
                if let Some(t) = &v.identity {
                    reg.bind(t, out.clone());
                }
                Ok(out)
            }
        }
    }

    /// Overwrites the state of the live object `target` with `v`, binding
    /// `v`'s identity to `target` first so inner references reach it.
    /// Values without mutable state are left untouched.
    pub fn reconstruct_into(&self, target: &Value, v: &SerializedValue, reg: &mut IdentityRegistry) -> Result<(), CodecError> {
        if matches!(v.kind(), Kind::Reference | Kind::Null | Kind::Primitive | Kind::EnumConst) {
            return Ok(());
        }
        if let Some(t) = &v.identity {
            reg.bind(t, target.clone());
        }
        let compatible = matches!(
            (target, &v.payload),
            (Value::List(_), Payload::Array { category: Category::List, .. } | Payload::Collection { category: Category::List, .. })
                | (Value::Set(_), Payload::Array { category: Category::Set, .. } | Payload::Collection { category: Category::Set, .. })
                | (Value::Dict(_), Payload::Map { .. })
                | (Value::BytesIO(_) | Value::StringIO(_), Payload::Stream { .. })
                | (Value::Instance(_) | Value::Iter(_), Payload::AppObject { .. })
        );
        if compatible {
            self.fill(target, v, reg)
        } else {
            Ok(())
        }
    }

    /// Allocates an empty mutable container for `v`, or `None` for values
    /// that must be built bottom-up.
    fn shell(&self, v: &SerializedValue) -> Result<Option<Value>, CodecError> {
        Ok(match &v.payload {
            Payload::Array { category: Category::List, .. } | Payload::Collection { category: Category::List, .. } => {
                Some(Value::List(new_ref(Vec::new())))
            }
            Payload::Array { category: Category::Set, .. } | Payload::Collection { category: Category::Set, .. } => {
                Some(Value::Set(new_ref(Default::default())))
            }
            Payload::Map { .. } => Some(Value::Dict(new_ref(Default::default()))),
            Payload::Stream { .. } => Some(if is_text_stream(&v.type_name) {
                Value::StringIO(new_ref(TextStream::default()))
            } else {
                Value::BytesIO(new_ref(ByteStream::default()))
            }),
            Payload::AppObject { fields } => match self.classes.resolve(&v.type_name) {
                Some(cls) => Some(new_instance(&cls)),
                None if is_library_iterator(fields) => Some(Value::Iter(new_ref(IterState { source: IterSource::Owned(Vec::new()), pos: 0 }))),
                None => return Err(CodecError::UnknownType(v.type_name.clone())),
            },
            // Built bottom-up; no wildcard so a new kind fails to compile here.
            Payload::Null
            | Payload::Primitive { .. }
            | Payload::Array { category: Category::ImmutableSequence, .. }
            | Payload::Collection { category: Category::ImmutableSequence, .. }
            | Payload::EnumConst { .. }
            | Payload::Exception { .. }
            | Payload::Reference { .. } => None,
        })
    }

    /// Writes the payload of `v` into the pre-allocated `obj`.
    fn fill(&self, obj: &Value, v: &SerializedValue, reg: &mut IdentityRegistry) -> Result<(), CodecError> {
        match (obj, &v.payload) {
            (Value::List(l), Payload::Array { items, .. } | Payload::Collection { items, .. }) => {
                let built = items.iter().map(|i| self.reconstruct(i, reg)).collect::<Result<Vec<_>, _>>()?;
                *l.borrow_mut() = built;
            }
            (Value::Set(s), Payload::Array { items, .. } | Payload::Collection { items, .. }) => {
                let mut built = Vec::new();
                for i in items {
                    let x = self.reconstruct(i, reg)?;
                    let k = self.interp.hash_key(&x).map_err(|e| self.runtime(v, e))?;
                    built.push((k, x));
                }
                let mut s = s.borrow_mut();
                s.clear();
                s.extend(built);
            }
            (Value::Dict(d), Payload::Map { entries }) => {
                let mut built = Vec::new();
                for (k, val) in entries {
                    let kv = self.reconstruct(k, reg)?;
                    let vv = self.reconstruct(val, reg)?;
                    let h = self.interp.hash_key(&kv).map_err(|e| self.runtime(v, e))?;
                    built.push((h, (kv, vv)));
                }
                let mut d = d.borrow_mut();
                d.clear();
                d.extend(built);
            }
            (Value::BytesIO(s), Payload::Stream { byte_array, position }) => {
                let mut s = s.borrow_mut();
                s.buf = byte_array.iter().map(|b| *b as u8).collect();
                s.pos = *position;
            }
            (Value::StringIO(s), Payload::Stream { byte_array, position }) => {
                let bytes: Vec<u8> = byte_array.iter().map(|b| *b as u8).collect();
                let text = String::from_utf8_lossy(&bytes);
                let pos = String::from_utf8_lossy(&bytes[..*position]).chars().count();
                let mut s = s.borrow_mut();
                s.buf = text.chars().collect();
                s.pos = pos;
            }
            (Value::Iter(it), Payload::AppObject { fields }) => {
                let backing = fields.iter().find(|f| f.name == "this$0").expect("checked by is_library_iterator");
                let cursor = fields.iter().find(|f| f.name == "cursor").expect("checked by is_library_iterator");
                let source = self.reconstruct(&backing.value, reg)?;
                let pos = match self.reconstruct(&cursor.value, reg)? {
                    Value::Int(n) if n >= 0 => n as usize,
                    _ => return Err(payload_err(v, "iterator cursor must be a non-negative integer")),
                };
                let source = match source {
                    Value::List(_) | Value::Tuple(_) => IterSource::Backed(source),
                    other => IterSource::Owned(self.interp.collect(&other).map_err(|e| self.runtime(v, e))?),
                };
                *it.borrow_mut() = IterState { source, pos };
            }
            (Value::Instance(inst), Payload::AppObject { fields }) => {
                let cls = inst.class.borrow().clone();
                let mut attrs = Vec::new();
                let mut message = None;
                for f in fields {
                    if f.is_static {
                        continue;
                    }
                    if is_library_class(&f.declaring_class) {
                        if f.name == "detailMessage" {
                            message = Some(self.reconstruct(&f.value, reg)?);
                        }
                        continue;
                    }
                    attrs.push((attribute_name(f), self.reconstruct(&f.value, reg)?));
                }
                let mut d = inst.dict.borrow_mut();
                d.clear();
                if cls.is_exception() {
                    let args = match message {
                        Some(Value::None) | None => vec![],
                        Some(m) => vec![m],
                    };
                    d.insert("args".into(), Value::tuple(args));
                }
                d.extend(attrs);
            }
            _ => return Err(payload_err(v, format!("{} payload cannot fill {}", v.kind().as_str(), obj.type_name()))),
        }
        Ok(())
    }

    fn build_immutable(&self, v: &SerializedValue, reg: &mut IdentityRegistry) -> Result<Value, CodecError> {
        match &v.payload {
            Payload::Null => Ok(Value::None),
            Payload::Primitive { value } => primitive(v, value),
            Payload::Array { category: Category::ImmutableSequence, items }
            | Payload::Collection { category: Category::ImmutableSequence, items } => {
                let built = items.iter().map(|i| self.reconstruct(i, reg)).collect::<Result<Vec<_>, _>>()?;
                Ok(Value::tuple(built))
            }
            Payload::EnumConst { name, value, ordinal } => {
                let inner = match (value, ordinal) {
                    (Some(x), _) => self.reconstruct(x, reg)?,
                    (None, Some(o)) => Value::Int(*o),
                    (None, None) => Value::None,
                };
                self.enum_member(v, name, inner)
            }
            Payload::Exception { message } => {
                let cls = self.exception_class(&v.type_name);
                let args = message.iter().map(|m| Value::str(m.as_str())).collect();
                Ok(self.interp.new_exception(&cls, args))
            }
            _ => Err(payload_err(v, "unexpected payload")),
        }
    }

    fn enum_member(&self, v: &SerializedValue, name: &str, inner: Value) -> Result<Value, CodecError> {
        let cls = match self.classes.resolve(&v.type_name) {
            Some(c) => c,
            None => {
                let object = self.interp.builtin_class("object").expect("object class is installed");
                let simple = simple_name(&v.type_name);
                Rc::new(Class::new(simple, simple, "xlv_runtime", vec![object]))
            }
        };
        if cls.enum_members.borrow().iter().any(|m| m == name) {
            if let Some(m) = cls.dict.borrow().get(name) {
                return Ok(m.clone());
            }
        }
        let inst = new_instance(&cls);
        if let Value::Instance(i) = &inst {
            let mut d = i.dict.borrow_mut();
            d.insert("_name_".into(), Value::str(name));
            d.insert("_value_".into(), inner);
        }
        Ok(inst)
    }

    /// Translated application class, mapped library class, or a synthetic
    /// `Exception` subclass named after the source type.
    pub fn exception_class(&self, type_name: &str) -> Rc<Class> {
        if let Some(c) = self.classes.resolve(type_name).filter(|c| c.is_exception()) {
            return c;
        }
        if let Some(c) = exception_class_name(type_name).and_then(|n| self.interp.builtin_class(n)) {
            return c;
        }
        let base = self.interp.builtin_class("Exception").expect("Exception class is installed");
        let simple = simple_name(type_name);
        Rc::new(Class::new(simple, simple, "xlv_runtime", vec![base]))
    }

    /// Sets each listed static field on its target class; unlisted fields stay.
    pub fn apply_static_state(&self, snapshot: &StaticSnapshot, reg: &mut IdentityRegistry) -> Result<(), CodecError> {
        for (class, fields) in snapshot {
            let cls = self.classes.resolve(class).ok_or_else(|| CodecError::UnknownType(class.clone()))?;
            for (name, v) in fields {
                let value = self.reconstruct(v, reg)?;
                let attr = static_attribute(&cls, class, name);
                cls.dict.borrow_mut().insert(attr, value);
            }
        }
        Ok(())
    }

    /// Current static data attributes of registered classes accepted by
    /// `filter`, with private names demangled. Enum members are excluded.
    pub fn snapshot_static_state(&self, filter: &dyn Fn(&str) -> bool) -> BTreeMap<String, BTreeMap<String, Value>> {
        let mut out = BTreeMap::new();
        for (name, cls) in self.classes.entries() {
            if !filter(name) {
                continue;
            }
            let members = cls.enum_members.borrow().clone();
            let prefix = format!("_{}__", cls.name.trim_start_matches('_'));
            let mut fields = BTreeMap::new();
            for (k, v) in cls.dict.borrow().iter() {
                if (k.starts_with("__") && k.ends_with("__")) || members.contains(k) || !is_data(v) {
                    continue;
                }
                let plain = k.strip_prefix(&prefix).unwrap_or(k);
                fields.insert(plain.to_string(), v.clone());
            }
            if !fields.is_empty() {
                out.insert(name.clone(), fields);
            }
        }
        out
    }
}

/// Attribute holding static field `field` of `cls`: the mangled name when the
/// class already defines it, otherwise the plain name.
pub fn static_attribute(cls: &Rc<Class>, source_class: &str, field: &str) -> String {
    let mangled = mangled_name(source_class, field);
    if cls.dict.borrow().contains_key(&mangled) {
        return mangled;
    }
    let own = mangled_name(&cls.name, field);
    if cls.dict.borrow().contains_key(&own) {
        return own;
    }
    field.to_string()
}

fn is_data(v: &Value) -> bool {
    !matches!(
        v,
        Value::Function(_)
            | Value::Native(_)
            | Value::StaticMethod(_)
            | Value::ClassMethod(_)
            | Value::Property(_)
            | Value::Class(_)
            | Value::Module(_)
            | Value::BoundMethod(_)
    )
}

/// A library inner-class iterator: an outer reference plus a cursor.
fn is_library_iterator(fields: &[FieldRecord]) -> bool {
    fields.iter().any(|f| f.name == "this$0") && fields.iter().any(|f| f.name == "cursor")
}

fn primitive(v: &SerializedValue, s: &str) -> Result<Value, CodecError> {
    let bad = |what: &str| payload_err(v, format!("{s:?} is not a valid {what}"));
    match v.type_name.as_str() {
        "int"
        | "long"
        | "short"
        | "byte"
        | "java.lang.Integer"
        | "java.lang.Long"
        | "java.lang.Short"
        | "java.lang.Byte"
        | "java.math.BigInteger"
        | "java.util.concurrent.atomic.AtomicInteger"
        | "java.util.concurrent.atomic.AtomicLong" => s.trim().parse::<i64>().map(Value::Int).map_err(|_| bad("integer")),
        "float" | "double" | "java.lang.Float" | "java.lang.Double" => parse_float(s).map(Value::Float).ok_or_else(|| bad("float")),
        "boolean" | "java.lang.Boolean" => match s {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(bad("boolean")),
        },
        "char" | "java.lang.Character" => {
            if s.chars().count() == 1 {
                Ok(Value::str(s))
            } else {
                Err(bad("char"))
            }
        }
        "java.lang.String" | "java.lang.CharSequence" => Ok(Value::str(s)),
        "java.time.Duration" => parse_duration_micros(s).map(Value::Timedelta).ok_or_else(|| bad("ISO-8601 duration")),
        other => Err(CodecError::UnknownType(other.to_string())),
    }
}

fn parse_float(s: &str) -> Option<f64> {
    match s {
        "NaN" => Some(f64::NAN),
        "Infinity" => Some(f64::INFINITY),
        "-Infinity" => Some(f64::NEG_INFINITY),
        _ => s.trim().trim_end_matches(['f', 'F', 'd', 'D']).parse().ok(),
    }
}

/// Parses an ISO-8601 duration (`PT8H6M12.345S`, `P2DT3H`, `PT-0.5S`) into
/// whole microseconds, rounding half to even like the target runtime.
pub fn parse_duration_micros(s: &str) -> Option<i64> {
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let rest = rest.strip_prefix('P').or_else(|| rest.strip_prefix('p'))?;
    let mut nanos: i128 = 0;
    let mut in_time = false;
    let mut num = String::new();
    let mut any = false;
    for c in rest.chars() {
        match c.to_ascii_uppercase() {
            'T' if num.is_empty() && !in_time => in_time = true,
            '0'..='9' | '.' | '-' | '+' | ',' => num.push(if c == ',' { '.' } else { c }),
            u @ ('D' | 'H' | 'M' | 'S') => {
                let unit_ns: i128 = match (u, in_time) {
                    ('D', false) => 86_400_000_000_000,
                    ('H', true) => 3_600_000_000_000,
                    ('M', true) => 60_000_000_000,
                    ('S', true) => 1_000_000_000,
                    _ => return None,
                };
                nanos += decimal_times(&num, unit_ns)?;
                num.clear();
                any = true;
            }
            _ => return None,
        }
    }
    if !num.is_empty() || !any {
        return None;
    }
    if neg {
        nanos = -nanos;
    }
    let q = nanos.div_euclid(1000);
    let r = nanos.rem_euclid(1000);
    let micros = if r > 500 || (r == 500 && q % 2 != 0) { q + 1 } else { q };
    i64::try_from(micros).ok()
}

/// `num * unit` for a decimal literal, exact to the nanosecond.
fn decimal_times(num: &str, unit: i128) -> Option<i128> {
    let (neg, body) = match num.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, num.strip_prefix('+').unwrap_or(num)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    let i: i128 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let mut total = i.checked_mul(unit)?;
    let mut scale = unit;
    for d in frac.chars() {
        scale /= 10;
        total += i128::from(d.to_digit(10)?) * scale;
    }
    Some(if neg { -total } else { total })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::trace::Visibility;

    pub fn session(src: &str) -> (Interp, TargetClassRegistry) {
        let interp = Interp::new();
        let m = interp.run_module_source("app", src, "app.py").unwrap();
        let reg = TargetClassRegistry::from_modules(&[m]);
        (interp, reg)
    }

    fn obj(type_name: &str, id: Option<&str>, fields: Vec<FieldRecord>) -> SerializedValue {
        SerializedValue { type_name: type_name.into(), identity: id.map(Into::into), payload: Payload::AppObject { fields } }
    }

    fn fld(name: &str, decl: &str, vis: Visibility, value: SerializedValue) -> FieldRecord {
        FieldRecord { name: name.into(), declaring_class: decl.into(), visibility: vis, is_static: false, value }
    }

    fn list(id: Option<&str>, items: Vec<SerializedValue>) -> SerializedValue {
        SerializedValue {
            type_name: "java.util.ArrayList".into(),
            identity: id.map(Into::into),
            payload: Payload::Collection { category: Category::List, items },
        }
    }

    #[test]
    fn primitives() {
        let (i, c) = session("");
        let codec = Codec::new(&i, &c);
        let mut r = IdentityRegistry::new();
        let five = codec.reconstruct(&SerializedValue::primitive("int", "5"), &mut r).unwrap();
        assert!(matches!(five, Value::Int(5)));
        let nan = codec.reconstruct(&SerializedValue::primitive("double", "NaN"), &mut r).unwrap();
        assert!(matches!(nan, Value::Float(f) if f.is_nan()));
        let e = codec.reconstruct(&SerializedValue::primitive("java.math.BigDecimal", "1.5"), &mut r).unwrap_err();
        assert_eq!(e, CodecError::UnknownType("java.math.BigDecimal".into()));
    }

    #[test]
    fn byte_stream_cursor() {
        let (i, c) = session("");
        let codec = Codec::new(&i, &c);
        let v = SerializedValue {
            type_name: "java.io.ByteArrayInputStream".into(),
            identity: None,
            payload: Payload::Stream { byte_array: vec![1, 2, 3, -1], position: 1 },
        };
        let s = codec.reconstruct(&v, &mut IdentityRegistry::new()).unwrap();
        let Value::BytesIO(b) = &s else { panic!("{s:?}") };
        assert_eq!(b.borrow().buf, vec![1, 2, 3, 255]);
        let next = i.call_method(&s, "read", vec![Value::Int(1)]).unwrap();
        assert!(matches!(next, Value::Bytes(ref b) if b[..] == [2]));
    }

    #[test]
    fn aliasing_survives_mutation() {
        let (i, c) = session("class Pair:\n    pass\n");
        let codec = Codec::new(&i, &c);
        let shared = list(Some("@7"), vec![SerializedValue::primitive("int", "1")]);
        let v = obj(
            "app.Pair",
            Some("@1"),
            vec![
                fld("f", "app.Pair", Visibility::Private, shared.clone()),
                fld("g", "app.Pair", Visibility::Public, SerializedValue::reference("java.util.ArrayList", "@7")),
            ],
        );
        let p = codec.reconstruct(&v, &mut IdentityRegistry::new()).unwrap();
        let f = p.instance_attr("_Pair__f").unwrap();
        let g = p.instance_attr("g").unwrap();
        i.call_method(&f, "append", vec![Value::Int(2)]).unwrap();
        assert_eq!(i.len(&g).unwrap(), 2);
    }

    #[test]
    fn cycles_terminate() {
        let (i, c) = session("class Node:\n    pass\n");
        let codec = Codec::new(&i, &c);
        let v = obj("app.Node", Some("@n"), vec![fld("next", "app.Node", Visibility::Package, SerializedValue::reference("app.Node", "@n"))]);
        let n = codec.reconstruct(&v, &mut IdentityRegistry::new()).unwrap();
        assert!(n.instance_attr("next").unwrap().is(&n));
    }

    #[test]
    fn unbound_reference() {
        let (i, c) = session("");
        let codec = Codec::new(&i, &c);
        let e = codec.reconstruct(&SerializedValue::reference("x", "@9"), &mut IdentityRegistry::new()).unwrap_err();
        assert_eq!(e, CodecError::UnboundReference("@9".into()));
    }

    #[test]
    fn enums_use_existing_members() {
        let (i, c) = session("from enum import Enum\nclass Dir(Enum):\n    NORTH = 0\n    SOUTH = 1\n");
        let codec = Codec::new(&i, &c);
        let v = SerializedValue {
            type_name: "app.Dir".into(),
            identity: None,
            payload: Payload::EnumConst { name: "NORTH".into(), value: Some(Box::new(SerializedValue::primitive("int", "0"))), ordinal: Some(0) },
        };
        let m = codec.reconstruct(&v, &mut IdentityRegistry::new()).unwrap();
        let member = i.eval_in_module(&i.module("app").unwrap(), "Dir.NORTH").unwrap();
        assert!(m.is(&member));
        assert_eq!(i.getattr(&m, "value").unwrap().as_int(), Some(0));
        let ghost = SerializedValue {
            type_name: "lib.Color".into(),
            identity: None,
            payload: Payload::EnumConst { name: "RED".into(), value: None, ordinal: Some(2) },
        };
        let g = codec.reconstruct(&ghost, &mut IdentityRegistry::new()).unwrap();
        assert_eq!(g.instance_attr("_name_").unwrap().as_str(), Some("RED"));
        assert_eq!(g.instance_attr("_value_").unwrap().as_int(), Some(2));
    }

    #[test]
    fn exceptions_map_and_app_exceptions_allocate() {
        let (i, c) = session("class ParseError(Exception):\n    def __init__(self):\n        raise RuntimeError('constructor ran')\n");
        let codec = Codec::new(&i, &c);
        let lib = SerializedValue {
            type_name: "java.lang.IllegalArgumentException".into(),
            identity: None,
            payload: Payload::Exception { message: Some("bad".into()) },
        };
        let e = codec.reconstruct(&lib, &mut IdentityRegistry::new()).unwrap();
        assert_eq!(e.type_name(), "ValueError");
        assert_eq!(xlv_runtime::value::exception_message(&e), "bad");
        let app = obj(
            "app.ParseError",
            None,
            vec![fld("detailMessage", "java.lang.Throwable", Visibility::Private, SerializedValue::primitive("java.lang.String", "boom"))],
        );
        let e = codec.reconstruct(&app, &mut IdentityRegistry::new()).unwrap();
        assert_eq!(e.type_name(), "ParseError");
        assert_eq!(xlv_runtime::value::exception_message(&e), "boom");
        assert!(e.instance_attr("detailMessage").is_none());
    }

    #[test]
    fn library_iterator_resumes_at_cursor() {
        let (i, c) = session("");
        let codec = Codec::new(&i, &c);
        let items = vec![SerializedValue::primitive("int", "1"), SerializedValue::primitive("int", "2")];
        let it = obj(
            "java.util.ArrayList$Itr",
            Some("@it"),
            vec![
                fld("this$0", "java.util.ArrayList$Itr", Visibility::Package, list(Some("@l"), items)),
                fld("cursor", "java.util.ArrayList$Itr", Visibility::Package, SerializedValue::primitive("int", "1")),
            ],
        );
        let v = codec.reconstruct(&it, &mut IdentityRegistry::new()).unwrap();
        assert_eq!(i.next_value(&v).unwrap().and_then(|x| x.as_int()), Some(2));
        assert!(i.next_value(&v).unwrap().is_none());
    }

    #[test]
    fn static_state_round_trip() {
        let (i, c) = session("class Option:\n    __UNINITIALIZED = 0\n    count = 3\n    def f(self):\n        pass\n");
        let codec = Codec::new(&i, &c);
        let mut snap = StaticSnapshot::new();
        snap.entry("org.x.Option".into()).or_default().insert("UNINITIALIZED".into(), SerializedValue::primitive("int", "-1"));
        codec.apply_static_state(&snap, &mut IdentityRegistry::new()).unwrap();
        let read = i.eval_in_module(&i.module("app").unwrap(), "Option._Option__UNINITIALIZED").unwrap();
        assert_eq!(read.as_int(), Some(-1));
        let got = codec.snapshot_static_state(&|_| true);
        assert_eq!(got["Option"]["UNINITIALIZED"].as_int(), Some(-1));
        assert_eq!(got["Option"]["count"].as_int(), Some(3));
        assert!(!got["Option"].contains_key("f"));
        assert!(codec.snapshot_static_state(&|n| n != "Option").is_empty());
        let mut bad = StaticSnapshot::new();
        bad.entry("org.x.Missing".into()).or_default();
        assert_eq!(codec.apply_static_state(&bad, &mut IdentityRegistry::new()), Err(CodecError::UnknownType("org.x.Missing".into())));
    }

    #[test]
    fn reconstruct_into_overwrites_live_state() {
        let (i, c) = session("");
        let codec = Codec::new(&i, &c);
        let live = Value::list(vec![Value::Int(9)]);
        let alias = live.clone();
        codec
            .reconstruct_into(
                &live,
                &list(Some("@a"), vec![SerializedValue::primitive("int", "1"), SerializedValue::primitive("int", "2")]),
                &mut IdentityRegistry::new(),
            )
            .unwrap();
        assert_eq!(i.repr(&alias).unwrap(), "[1, 2]");
    }

    #[test]
    fn durations() {
        assert_eq!(parse_duration_micros("PT1.5S"), Some(1_500_000));
        assert_eq!(parse_duration_micros("P2DT3H"), Some((2 * 86_400 + 3 * 3600) * 1_000_000));
        assert_eq!(parse_duration_micros("PT-0.5S"), Some(-500_000));
        assert_eq!(parse_duration_micros("PT0.0000005S"), Some(0));
        assert_eq!(parse_duration_micros("PT0.0000015S"), Some(2));
        assert_eq!(parse_duration_micros("PT8H6M12.345S"), Some(((8 * 3600 + 6 * 60 + 12) * 1000 + 345) * 1000));
        assert_eq!(parse_duration_micros("P"), None);
        assert_eq!(parse_duration_micros("5S"), None);
    }

    #[test]
    fn mangling() {
        assert_eq!(mangled_name("org.a.Foo", "x"), "_Foo__x");
        assert_eq!(mangled_name("org.a.Outer$_In", "x"), "_In__x");
    }
}
