//! Runtime values.
//!
//! Mutable containers are shared through `Rc<RefCell<_>>`; object identity is
//! pointer identity of that allocation.

use std::any::Any;
use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use indexmap::IndexMap;

use crate::ast::FunctionDef;
use crate::error::Exc;
use crate::interp::Interp;

pub type Ref<T> = Rc<RefCell<T>>;
pub type Attrs = IndexMap<String, Value>;
pub type DictMap = IndexMap<HashKey, (Value, Value)>;
pub type SetMap = IndexMap<HashKey, Value>;
pub type NativeResult = Result<Value, Exc>;
pub type NativeFnPtr = dyn Fn(&Interp, Vec<Value>, Vec<(String, Value)>) -> NativeResult;

pub fn new_ref<T>(v: T) -> Ref<T> {
    Rc::new(RefCell::new(v))
}

/// Hashable projection of a value, used as dict and set key.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum HashKey {
    None,
    Int(i64),
    Float(u64),
    Str(Rc<str>),
    Bytes(Rc<[u8]>),
    Tuple(Vec<HashKey>),
    Duration(i64),
    /// Identity of a heap object.
    Id(usize),
    /// Result of a user-defined `__hash__`.
    Custom(i64),
}

/// Built-in types that are not represented as [`Class`] objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinType {
    Object,
    NoneType,
    Bool,
    Int,
    Float,
    Str,
    Bytes,
    ByteArray,
    List,
    Tuple,
    Dict,
    Set,
    BytesIO,
    StringIO,
    Timedelta,
    Iter,
    Type,
    Function,
}

impl BuiltinType {
    pub fn name(self) -> &'static str {
        match self {
            BuiltinType::Object => "object",
            BuiltinType::NoneType => "NoneType",
            BuiltinType::Bool => "bool",
            BuiltinType::Int => "int",
            BuiltinType::Float => "float",
            BuiltinType::Str => "str",
            BuiltinType::Bytes => "bytes",
            BuiltinType::ByteArray => "bytearray",
            BuiltinType::List => "list",
            BuiltinType::Tuple => "tuple",
            BuiltinType::Dict => "dict",
            BuiltinType::Set => "set",
            BuiltinType::BytesIO => "BytesIO",
            BuiltinType::StringIO => "StringIO",
            BuiltinType::Timedelta => "timedelta",
            BuiltinType::Iter => "list_iterator",
            BuiltinType::Type => "type",
            BuiltinType::Function => "function",
        }
    }
}

/// In-memory byte stream with a read/write cursor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ByteStream {
    pub buf: Vec<u8>,
    pub pos: usize,
}

/// In-memory text stream; the cursor counts characters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TextStream {
    pub buf: Vec<char>,
    pub pos: usize,
}

/// Iterator state: a live view over a sequence, or an owned snapshot.
#[derive(Debug, Clone)]
pub enum IterSource {
    /// Reads the backing list or tuple at the cursor on every step.
    Backed(Value),
    Owned(Vec<Value>),
}

#[derive(Debug, Clone)]
pub struct IterState {
    pub source: IterSource,
    pub pos: usize,
}

impl IterState {
    pub fn remaining(&self) -> Vec<Value> {
        match &self.source {
            IterSource::Backed(v) => v.seq_items().map(|items| items.get(self.pos..).map(<[Value]>::to_vec).unwrap_or_default()).unwrap_or_default(),
            IterSource::Owned(items) => items.get(self.pos..).map(<[Value]>::to_vec).unwrap_or_default(),
        }
    }

    pub fn next_item(&mut self) -> Option<Value> {
        let item = match &self.source {
            IterSource::Backed(v) => v.seq_get(self.pos),
            IterSource::Owned(items) => items.get(self.pos).cloned(),
        };
        if item.is_some() {
            self.pos += 1;
        }
        item
    }
}

pub struct Class {
    pub name: String,
    pub qualname: String,
    pub module: String,
    pub bases: Vec<Rc<Class>>,
    pub dict: RefCell<Attrs>,
    /// Enum member names in definition order; empty for non-enum classes.
    pub enum_members: RefCell<Vec<String>>,
    pub is_enum_root: bool,
    /// Replaces construction when set (used to mock constructors).
    pub ctor_hook: RefCell<Option<Value>>,
}

impl Class {
    pub fn new(name: &str, qualname: &str, module: &str, bases: Vec<Rc<Class>>) -> Self {
        Self {
            name: name.to_string(),
            qualname: qualname.to_string(),
            module: module.to_string(),
            bases,
            dict: RefCell::new(IndexMap::new()),
            enum_members: RefCell::new(Vec::new()),
            is_enum_root: false,
            ctor_hook: RefCell::new(None),
        }
    }

    /// C3 linearization, starting with `self`.
    pub fn mro(self: &Rc<Self>) -> Vec<Rc<Class>> {
        let mut seqs: Vec<Vec<Rc<Class>>> = self.bases.iter().map(|b| b.mro()).collect();
        seqs.push(self.bases.clone());
        let mut out = vec![self.clone()];
        loop {
            seqs.retain(|s| !s.is_empty());
            if seqs.is_empty() {
                return out;
            }
            let head = seqs
                .iter()
                .map(|s| s[0].clone())
                .find(|h| !seqs.iter().any(|s| s[1..].iter().any(|x| Rc::ptr_eq(x, h))))
                .unwrap_or_else(|| seqs[0][0].clone());
            for s in seqs.iter_mut() {
                if Rc::ptr_eq(&s[0], &head) {
                    s.remove(0);
                }
            }
            out.push(head);
        }
    }

    pub fn lookup(self: &Rc<Self>, name: &str) -> Option<Value> {
        self.mro().iter().find_map(|c| c.dict.borrow().get(name).cloned())
    }

    pub fn lookup_with_owner(self: &Rc<Self>, name: &str) -> Option<(Value, Rc<Class>)> {
        self.mro().into_iter().find_map(|c| c.dict.borrow().get(name).cloned().map(|v| (v, c.clone())))
    }

    pub fn is_subclass_of(self: &Rc<Self>, other: &Rc<Class>) -> bool {
        self.mro().iter().any(|c| Rc::ptr_eq(c, other))
    }

    pub fn is_subclass_named(self: &Rc<Self>, name: &str) -> bool {
        self.mro().iter().any(|c| c.name == name && c.module == "builtins")
    }

    pub fn is_enum(self: &Rc<Self>) -> bool {
        self.mro().iter().any(|c| c.is_enum_root)
    }

    pub fn is_exception(self: &Rc<Self>) -> bool {
        self.is_subclass_named("BaseException")
    }
}

impl fmt::Debug for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<class '{}'>", self.qualname)
    }
}

pub struct Instance {
    pub class: RefCell<Rc<Class>>,
    pub dict: RefCell<Attrs>,
}

pub struct Function {
    pub def: Rc<FunctionDef>,
    pub qualname: String,
    pub globals: Rc<ModuleObj>,
    pub closure: Option<Rc<Scope>>,
    pub defaults: Vec<Option<Value>>,
    /// Class whose body defined this function; drives zero-argument `super()`.
    pub owner: RefCell<Option<std::rc::Weak<Class>>>,
}

pub struct NativeFn {
    pub name: String,
    pub f: Box<NativeFnPtr>,
}

pub struct Property {
    pub getter: Value,
    pub setter: Option<Value>,
}

pub struct ModuleObj {
    pub name: String,
    pub dict: RefCell<Attrs>,
}

impl ModuleObj {
    pub fn new(name: &str) -> Rc<Self> {
        Rc::new(Self { name: name.to_string(), dict: RefCell::new(IndexMap::new()) })
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        self.dict.borrow().get(name).cloned()
    }

    pub fn set(&self, name: &str, v: Value) {
        self.dict.borrow_mut().insert(name.to_string(), v);
    }
}

/// A function activation's local namespace.
pub struct Scope {
    pub vars: RefCell<Attrs>,
    pub parent: Option<Rc<Scope>>,
    pub globals_decl: RefCell<Vec<String>>,
    pub nonlocal_decl: RefCell<Vec<String>>,
}

impl Scope {
    pub fn new(parent: Option<Rc<Scope>>) -> Rc<Self> {
        Rc::new(Self { vars: RefCell::new(IndexMap::new()), parent, globals_decl: RefCell::new(Vec::new()), nonlocal_decl: RefCell::new(Vec::new()) })
    }
}

/// Host object carried opaquely through the interpreter.
pub struct Opaque {
    pub type_name: String,
    pub data: Box<dyn Any>,
}

#[derive(Clone)]
pub enum Value {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Rc<str>),
    Bytes(Rc<[u8]>),
    ByteArray(Ref<Vec<u8>>),
    List(Ref<Vec<Value>>),
    Tuple(Rc<Vec<Value>>),
    Dict(Ref<DictMap>),
    Set(Ref<SetMap>),
    BytesIO(Ref<ByteStream>),
    StringIO(Ref<TextStream>),
    Iter(Ref<IterState>),
    /// Duration in whole microseconds.
    Timedelta(i64),
    Instance(Rc<Instance>),
    Class(Rc<Class>),
    Type(BuiltinType),
    Function(Rc<Function>),
    BoundMethod(Rc<(Value, Value)>),
    Native(Rc<NativeFn>),
    /// Method of a built-in value: receiver and method name.
    BuiltinMethod(Rc<(Value, String)>),
    StaticMethod(Rc<Value>),
    ClassMethod(Rc<Value>),
    Property(Rc<Property>),
    Module(Rc<ModuleObj>),
    Opaque(Rc<Opaque>),
    Super(Rc<(Rc<Class>, Value)>),
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&repr(self))
    }
}

impl Value {
    pub fn str(s: impl Into<Rc<str>>) -> Value {
        Value::Str(s.into())
    }

    pub fn list(items: Vec<Value>) -> Value {
        Value::List(new_ref(items))
    }

    pub fn tuple(items: Vec<Value>) -> Value {
        Value::Tuple(Rc::new(items))
    }

    pub fn bytes(b: impl Into<Rc<[u8]>>) -> Value {
        Value::Bytes(b.into())
    }

    pub fn native(name: &str, f: impl Fn(&Interp, Vec<Value>, Vec<(String, Value)>) -> NativeResult + 'static) -> Value {
        Value::Native(Rc::new(NativeFn { name: name.to_string(), f: Box::new(f) }))
    }

    pub fn opaque<T: Any>(type_name: &str, data: T) -> Value {
        Value::Opaque(Rc::new(Opaque { type_name: type_name.to_string(), data: Box::new(data) }))
    }

    pub fn downcast_opaque<T: Any>(&self) -> Option<&T> {
        match self {
            Value::Opaque(o) => o.data.downcast_ref::<T>(),
            _ => None,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Value::None)
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            Value::Bool(b) => Some(*b as i64),
            _ => None,
        }
    }

    /// Class of an instance, if this is one.
    pub fn instance_class(&self) -> Option<Rc<Class>> {
        match self {
            Value::Instance(i) => Some(i.class.borrow().clone()),
            _ => None,
        }
    }

    /// Identity of the underlying allocation for reference types.
    pub fn identity(&self) -> Option<usize> {
        Some(match self {
            Value::ByteArray(r) => Rc::as_ptr(r) as *const () as usize,
            Value::List(r) => Rc::as_ptr(r) as *const () as usize,
            Value::Tuple(r) => Rc::as_ptr(r) as *const () as usize,
            Value::Dict(r) => Rc::as_ptr(r) as *const () as usize,
            Value::Set(r) => Rc::as_ptr(r) as *const () as usize,
            Value::BytesIO(r) => Rc::as_ptr(r) as *const () as usize,
            Value::StringIO(r) => Rc::as_ptr(r) as *const () as usize,
            Value::Iter(r) => Rc::as_ptr(r) as *const () as usize,
            Value::Instance(r) => Rc::as_ptr(r) as *const () as usize,
            Value::Class(r) => Rc::as_ptr(r) as *const () as usize,
            Value::Function(r) => Rc::as_ptr(r) as *const () as usize,
            Value::BoundMethod(r) => Rc::as_ptr(r) as *const () as usize,
            Value::Native(r) => Rc::as_ptr(r) as *const () as usize,
            Value::BuiltinMethod(r) => Rc::as_ptr(r) as *const () as usize,
            Value::StaticMethod(r) | Value::ClassMethod(r) => Rc::as_ptr(r) as *const () as usize,
            Value::Property(r) => Rc::as_ptr(r) as *const () as usize,
            Value::Module(r) => Rc::as_ptr(r) as *const () as usize,
            Value::Opaque(r) => Rc::as_ptr(r) as *const () as usize,
            Value::Super(r) => Rc::as_ptr(r) as *const () as usize,
            _ => return None,
        })
    }

    /// `is` semantics: identity for heap objects, value for immediates.
    pub fn is(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::None, Value::None) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Str(a), Value::Str(b)) => Rc::ptr_eq(a, b) || a == b,
            (Value::Bytes(a), Value::Bytes(b)) => a == b,
            (Value::Timedelta(a), Value::Timedelta(b)) => a == b,
            (Value::Type(a), Value::Type(b)) => a == b,
            _ => match (self.identity(), other.identity()) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            },
        }
    }

    pub fn type_name(&self) -> String {
        match self {
            Value::None => "NoneType".into(),
            Value::Bool(_) => "bool".into(),
            Value::Int(_) => "int".into(),
            Value::Float(_) => "float".into(),
            Value::Str(_) => "str".into(),
            Value::Bytes(_) => "bytes".into(),
            Value::ByteArray(_) => "bytearray".into(),
            Value::List(_) => "list".into(),
            Value::Tuple(_) => "tuple".into(),
            Value::Dict(_) => "dict".into(),
            Value::Set(_) => "set".into(),
            Value::BytesIO(_) => "BytesIO".into(),
            Value::StringIO(_) => "StringIO".into(),
            Value::Iter(_) => "list_iterator".into(),
            Value::Timedelta(_) => "timedelta".into(),
            Value::Instance(i) => i.class.borrow().name.clone(),
            Value::Class(_) | Value::Type(_) => "type".into(),
            Value::Function(_) => "function".into(),
            Value::BoundMethod(_) | Value::BuiltinMethod(_) => "method".into(),
            Value::Native(_) => "builtin_function_or_method".into(),
            Value::StaticMethod(_) => "staticmethod".into(),
            Value::ClassMethod(_) => "classmethod".into(),
            Value::Property(_) => "property".into(),
            Value::Module(_) => "module".into(),
            Value::Opaque(o) => o.type_name.clone(),
            Value::Super(_) => "super".into(),
        }
    }

    /// Items of a list or tuple.
    pub fn seq_items(&self) -> Option<Vec<Value>> {
        match self {
            Value::List(l) => Some(l.borrow().clone()),
            Value::Tuple(t) => Some(t.as_ref().clone()),
            _ => None,
        }
    }

    fn seq_get(&self, i: usize) -> Option<Value> {
        match self {
            Value::List(l) => l.borrow().get(i).cloned(),
            Value::Tuple(t) => t.get(i).cloned(),
            Value::Str(s) => s.chars().nth(i).map(|c| Value::str(c.to_string())),
            _ => None,
        }
    }

    /// Instance attribute lookup without descriptors.
    pub fn instance_attr(&self, name: &str) -> Option<Value> {
        match self {
            Value::Instance(i) => i.dict.borrow().get(name).cloned(),
            _ => None,
        }
    }
}

thread_local! {
    static REPR_GUARD: RefCell<Vec<usize>> = const { RefCell::new(Vec::new()) };
}

/// Python-style `repr` for values that need no user code.
/// Instances render with their class name only; the interpreter handles
/// user-defined `__repr__`.
pub fn repr(v: &Value) -> String {
    if let Some(id) = v.identity() {
        let seen = REPR_GUARD.with(|g| g.borrow().contains(&id));
        if seen {
            return match v {
                Value::List(_) => "[...]".into(),
                Value::Dict(_) => "{...}".into(),
                _ => "...".into(),
            };
        }
        REPR_GUARD.with(|g| g.borrow_mut().push(id));
        let out = repr_inner(v);
        REPR_GUARD.with(|g| g.borrow_mut().pop());
        out
    } else {
        repr_inner(v)
    }
}

fn repr_inner(v: &Value) -> String {
    match v {
        Value::None => "None".into(),
        Value::Bool(true) => "True".into(),
        Value::Bool(false) => "False".into(),
        Value::Int(i) => i.to_string(),
        Value::Float(f) => float_repr(*f),
        Value::Str(s) => str_repr(s),
        Value::Bytes(b) => format!("b{}", bytes_repr(b)),
        Value::ByteArray(b) => format!("bytearray(b{})", bytes_repr(&b.borrow())),
        Value::List(l) => format!("[{}]", join_repr(&l.borrow())),
        Value::Tuple(t) => {
            if t.len() == 1 {
                format!("({},)", repr(&t[0]))
            } else {
                format!("({})", join_repr(t))
            }
        }
        Value::Dict(d) => {
            let parts: Vec<String> = d.borrow().values().map(|(k, v)| format!("{}: {}", repr(k), repr(v))).collect();
            format!("{{{}}}", parts.join(", "))
        }
        Value::Set(s) => {
            if s.borrow().is_empty() {
                "set()".into()
            } else {
                let items: Vec<Value> = s.borrow().values().cloned().collect();
                format!("{{{}}}", join_repr(&items))
            }
        }
        Value::BytesIO(_) => "<_io.BytesIO object>".into(),
        Value::StringIO(_) => "<_io.StringIO object>".into(),
        Value::Iter(_) => "<list_iterator object>".into(),
        Value::Timedelta(us) => timedelta_repr(*us),
        Value::Instance(i) => {
            let cls = i.class.borrow().clone();
            if cls.is_enum() {
                let d = i.dict.borrow();
                if let (Some(Value::Str(n)), Some(v)) = (d.get("_name_"), d.get("_value_")) {
                    return format!("<{}.{}: {}>", cls.name, n, repr(v));
                }
            }
            if cls.is_exception() {
                let args = i.dict.borrow().get("args").cloned().unwrap_or(Value::tuple(vec![]));
                let inner = match &args {
                    Value::Tuple(t) => join_repr(t),
                    other => repr(other),
                };
                return format!("{}({})", cls.name, inner);
            }
            format!("<{} object>", cls.qualname)
        }
        Value::Class(c) => format!("<class '{}'>", c.qualname),
        Value::Type(t) => format!("<class '{}'>", t.name()),
        Value::Function(f) => format!("<function {}>", f.qualname),
        Value::BoundMethod(_) => "<bound method>".into(),
        Value::Native(n) => format!("<built-in function {}>", n.name),
        Value::BuiltinMethod(m) => format!("<built-in method {}>", m.1),
        Value::StaticMethod(_) => "<staticmethod>".into(),
        Value::ClassMethod(_) => "<classmethod>".into(),
        Value::Property(_) => "<property>".into(),
        Value::Module(m) => format!("<module '{}'>", m.name),
        Value::Opaque(o) => format!("<{}>", o.type_name),
        Value::Super(_) => "<super>".into(),
    }
}

fn join_repr(items: &[Value]) -> String {
    items.iter().map(repr).collect::<Vec<_>>().join(", ")
}

pub fn str_repr(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c if (c as u32) < 0x20 || c as u32 == 0x7f => out.push_str(&format!("\\x{:02x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

pub fn bytes_repr(b: &[u8]) -> String {
    let quote = if b.contains(&b'\'') && !b.contains(&b'"') { '"' } else { '\'' };
    let mut out = String::new();
    out.push(quote);
    for &c in b {
        match c {
            b'\\' => out.push_str("\\\\"),
            b'\n' => out.push_str("\\n"),
            b'\r' => out.push_str("\\r"),
            b'\t' => out.push_str("\\t"),
            c if c as char == quote => {
                out.push('\\');
                out.push(c as char);
            }
            0x20..=0x7e => out.push(c as char),
            c => out.push_str(&format!("\\x{c:02x}")),
        }
    }
    out.push(quote);
    out
}

/// Shortest round-trip float rendering in the target language's style.
pub fn float_repr(f: f64) -> String {
    if f.is_nan() {
        return "nan".into();
    }
    if f.is_infinite() {
        return if f > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = f.abs();
    if a != 0.0 && !(1e-4..1e16).contains(&a) {
        let s = format!("{f:e}");
        let (mant, exp) = s.split_once('e').unwrap_or((&s, "0"));
        let exp: i32 = exp.parse().unwrap_or(0);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mant}e{sign}{:02}", exp.abs());
    }
    let s = format!("{f}");
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

pub fn timedelta_repr(us: i64) -> String {
    let days = us.div_euclid(86_400_000_000);
    let rem = us.rem_euclid(86_400_000_000);
    let secs = rem / 1_000_000;
    let micros = rem % 1_000_000;
    let mut parts = Vec::new();
    if days != 0 {
        parts.push(format!("days={days}"));
    }
    if secs != 0 {
        parts.push(format!("seconds={secs}"));
    }
    if micros != 0 {
        parts.push(format!("microseconds={micros}"));
    }
    if parts.is_empty() {
        "datetime.timedelta(0)".into()
    } else {
        format!("datetime.timedelta({})", parts.join(", "))
    }
}

pub fn timedelta_str(us: i64) -> String {
    let days = us.div_euclid(86_400_000_000);
    let rem = us.rem_euclid(86_400_000_000);
    let secs = rem / 1_000_000;
    let micros = rem % 1_000_000;
    let hms = format!("{}:{:02}:{:02}", secs / 3600, (secs % 3600) / 60, secs % 60);
    let hms = if micros != 0 { format!("{hms}.{micros:06}") } else { hms };
    if days != 0 {
        let plural = if days.abs() == 1 { "" } else { "s" };
        format!("{days} day{plural}, {hms}")
    } else {
        hms
    }
}

/// `str()` of an exception instance.
pub fn exception_message(v: &Value) -> String {
    let key_error = v.instance_class().is_some_and(|c| c.is_subclass_named("KeyError"));
    match v.instance_attr("args") {
        Some(Value::Tuple(t)) => match t.len() {
            0 => String::new(),
            1 => match &t[0] {
                Value::Str(s) if !key_error => s.to_string(),
                other => repr(other),
            },
            _ => repr(&Value::Tuple(t)),
        },
        Some(other) => repr(&other),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_rendering() {
        assert_eq!(float_repr(1.0), "1.0");
        assert_eq!(float_repr(0.1), "0.1");
        assert_eq!(float_repr(1e16), "1e+16");
        assert_eq!(float_repr(1.5e-5), "1.5e-05");
        assert_eq!(float_repr(-2.5), "-2.5");
    }

    #[test]
    fn string_rendering() {
        assert_eq!(str_repr("a'b"), "\"a'b\"");
        assert_eq!(str_repr("x\ny"), "'x\\ny'");
        assert_eq!(bytes_repr(&[104, 105, 0]), "'hi\\x00'");
    }

    #[test]
    fn cyclic_list_repr_terminates() {
        let l = Value::list(vec![Value::Int(1)]);
        if let Value::List(r) = &l {
            r.borrow_mut().push(l.clone());
        }
        assert_eq!(repr(&l), "[1, [...]]");
    }

    #[test]
    fn timedelta_rendering() {
        assert_eq!(timedelta_str(90_000_000), "0:01:30");
        assert_eq!(timedelta_str(86_400_000_000 + 1), "1 day, 0:00:00.000001");
    }

    #[test]
    fn iterator_reads_backing_list_live() {
        let l = Value::list(vec![Value::Int(1), Value::Int(2)]);
        let mut it = IterState { source: IterSource::Backed(l.clone()), pos: 0 };
        assert!(matches!(it.next_item(), Some(Value::Int(1))));
        if let Value::List(r) = &l {
            r.borrow_mut().push(Value::Int(3));
        }
        assert_eq!(it.remaining().len(), 2);
    }
}
