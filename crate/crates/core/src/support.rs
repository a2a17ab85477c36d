//! The `xlv_runtime` module imported by generated tests. It binds the codec,
//! the equality checker and mock replay to one interpreter session.
//!
//! The session's translated classes are loaded on first use: every module of
//! the translated project is imported, then fragment overrides (candidate
//! translations under validation) are executed inside their classes.

use std::cell::{Cell, RefCell};
use std::rc::Rc;

use serde_json::Value as Json;
use xlv_runtime::{Class, Exc, Interp, ModuleObj, Value};

use crate::codec::{static_attribute, Codec, IdentityRegistry, TargetClassRegistry};
use crate::equality::{first_mismatch, EqualityConfig};
use crate::mockgen::{record_from_json, MockRecord};
use crate::trace::{value_from_json, Outcome, Payload, SerializedValue};

pub const MODULE_NAME: &str = "xlv_runtime";

/// Replacement source for one class member.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ClassOverride {
    /// Source class name the member belongs to.
    pub class: String,
    /// Target-language definition(s), written at class-body indentation zero.
    pub source: String,
}

/// Replay state of one patched callee.
struct MockState {
    label: RefCell<String>,
    records: Vec<MockRecord>,
    consumed: Cell<usize>,
}

/// Per-session state shared by the module's functions.
pub struct SupportContext {
    module_names: Vec<String>,
    overrides: Vec<ClassOverride>,
    classes: RefCell<Option<TargetClassRegistry>>,
    equality: EqualityConfig,
    mocks: RefCell<Vec<Rc<MockState>>>,
    last_mismatch: RefCell<Option<String>>,
}

impl SupportContext {
    pub fn new(module_names: Vec<String>, overrides: Vec<ClassOverride>, equality: EqualityConfig) -> Rc<Self> {
        Rc::new(Self {
            module_names,
            overrides,
            classes: RefCell::new(None),
            equality,
            mocks: RefCell::new(Vec::new()),
            last_mismatch: RefCell::new(None),
        })
    }

    /// Path of the most recent failed `recursive_equal`.
    pub fn last_mismatch(&self) -> Option<String> {
        self.last_mismatch.borrow().clone()
    }

    /// Imports the translated project and applies overrides, once.
    pub fn classes(&self, interp: &Interp) -> Result<TargetClassRegistry, Exc> {
        if let Some(c) = self.classes.borrow().as_ref() {
            return Ok(c.clone());
        }
        let mut modules: Vec<Rc<ModuleObj>> = Vec::new();
        for name in &self.module_names {
            modules.push(interp.import_module(name)?);
        }
        let reg = TargetClassRegistry::from_modules(&modules);
        for o in &self.overrides {
            let cls = reg.resolve(&o.class).ok_or_else(|| interp.exc("ImportError", format!("no translated class for {}", o.class)))?;
            interp.exec_in_class(&cls, &o.source).map_err(|e| match e {
                xlv_runtime::RunError::Raised(x) => x,
                other => interp.exc("SyntaxError", other.to_string()),
            })?;
        }
        *self.classes.borrow_mut() = Some(reg.clone());
        Ok(reg)
    }

    /// Registers the module builder with `interp`.
    pub fn install(self: &Rc<Self>, interp: &Interp) {
        let ctx = self.clone();
        interp.register_native_module(MODULE_NAME, Rc::new(move |i: &Interp| Ok(build_module(i, &ctx))));
    }
}

fn arg<'a>(i: &Interp, a: &'a [Value], k: usize, f: &str) -> Result<&'a Value, Exc> {
    a.get(k).ok_or_else(|| i.type_error(format!("{f}() missing argument {}", k + 1)))
}

fn str_arg(i: &Interp, a: &[Value], k: usize, f: &str) -> Result<String, Exc> {
    match arg(i, a, k, f)? {
        Value::Str(s) => Ok(s.to_string()),
        v => Err(i.type_error(format!("{f}() argument {} must be str, not {}", k + 1, v.type_name()))),
    }
}

fn class_arg(i: &Interp, a: &[Value], k: usize, f: &str) -> Result<Rc<Class>, Exc> {
    match arg(i, a, k, f)? {
        Value::Class(c) => Ok(c.clone()),
        v => Err(i.type_error(format!("{f}() argument {} must be a class, not {}", k + 1, v.type_name()))),
    }
}

/// Host JSON for a JSON text or an already-decoded JSON structure.
fn host_json(i: &Interp, v: &Value) -> Result<Json, Exc> {
    let text = match v {
        Value::Str(s) => s.to_string(),
        other => {
            let json = i.import_module("json")?;
            let dumps = json.get("dumps").ok_or_else(|| i.exc("ImportError", "json.dumps unavailable"))?;
            i.to_str(&i.call(&dumps, vec![other.clone()], vec![])?)?
        }
    };
    serde_json::from_str(&text).map_err(|e| i.exc("ValueError", format!("invalid serialized value: {e}")))
}

fn serialized(i: &Interp, v: &Value) -> Result<SerializedValue, Exc> {
    value_from_json(&host_json(i, v)?).map_err(|e| i.exc("ValueError", e.to_string()))
}

type SharedRegistry = RefCell<IdentityRegistry>;

fn registry_arg<'a>(i: &Interp, a: &'a [Value], k: usize, f: &str) -> Result<&'a SharedRegistry, Exc> {
    arg(i, a, k, f)?.downcast_opaque::<SharedRegistry>().ok_or_else(|| i.type_error(format!("{f}() needs a registry from new_registry()")))
}

fn codec_exc(i: &Interp, e: impl std::fmt::Display) -> Exc {
    i.exc("ValueError", format!("reconstruction failed: {e}"))
}

fn build_module(interp: &Interp, ctx: &Rc<SupportContext>) -> Rc<ModuleObj> {
    let m = ModuleObj::new(MODULE_NAME);
    if let Some(cls) = interp.builtin_class("MockExhaustedError") {
        m.set("MockExhaustedError", Value::Class(cls));
    }

    m.set("new_registry", Value::native("new_registry", |_, _, _| Ok(Value::opaque("IdentityRegistry", RefCell::new(IdentityRegistry::new())))));

    let c = ctx.clone();
    m.set(
        "convert_to_python",
        Value::native("convert_to_python", move |i, a, _| {
            let sv = serialized(i, arg(i, &a, 0, "convert_to_python")?)?;
            let reg = registry_arg(i, &a, 1, "convert_to_python")?;
            let classes = c.classes(i)?;
            let out = Codec::new(i, &classes).reconstruct(&sv, &mut reg.borrow_mut()).map_err(|e| codec_exc(i, e));
            out
        }),
    );

    let c = ctx.clone();
    m.set(
        "update_static_fields",
        Value::native("update_static_fields", move |i, a, _| {
            let snapshot = crate::trace::statics_from_json(&host_json(i, arg(i, &a, 0, "update_static_fields")?)?)
                .map_err(|e| i.exc("ValueError", e.to_string()))?;
            let reg = registry_arg(i, &a, 1, "update_static_fields")?;
            let classes = c.classes(i)?;
            Codec::new(i, &classes).apply_static_state(&snapshot, &mut reg.borrow_mut()).map_err(|e| codec_exc(i, e))?;
            Ok(Value::None)
        }),
    );

    let c = ctx.clone();
    m.set(
        "load_class",
        Value::native("load_class", move |i, a, _| {
            let name = str_arg(i, &a, 0, "load_class")?;
            let classes = c.classes(i)?;
            classes.resolve(&name).map(Value::Class).ok_or_else(|| i.exc("ImportError", format!("no translated class for {name}")))
        }),
    );

    m.set(
        "real_method",
        Value::native("real_method", |i, a, _| {
            let cls = class_arg(i, &a, 0, "real_method")?;
            let name = str_arg(i, &a, 1, "real_method")?;
            let recv = Value::Class(cls.clone());
            for attr in member_names(&cls, &name) {
                if cls.lookup(&attr).is_some() {
                    return i.getattr(&recv, &attr);
                }
            }
            Err(i.exc("AttributeError", format!("{} has no method {name}", cls.name)))
        }),
    );

    m.set(
        "construct_focal",
        Value::native("construct_focal", |i, a, _| {
            let cls = class_arg(i, &a, 0, "construct_focal")?;
            let args = i.collect(arg(i, &a, 1, "construct_focal")?)?;
            // A patched constructor must not intercept the focal construction.
            let hook = cls.ctor_hook.borrow_mut().take();
            let out = i.instantiate(&cls, args, vec![]);
            *cls.ctor_hook.borrow_mut() = hook;
            out
        }),
    );

    m.set(
        "SideEffect",
        Value::native("SideEffect", |i, a, _| {
            let j = host_json(i, arg(i, &a, 0, "SideEffect")?)?;
            let items = j.as_array().ok_or_else(|| i.type_error("SideEffect() needs a list of records"))?;
            let records = items.iter().map(record_from_json).collect::<Result<Vec<_>, _>>().map_err(|e| i.exc("ValueError", e.to_string()))?;
            Ok(Value::opaque("SideEffect", Rc::new(MockState { label: RefCell::new(String::new()), records, consumed: Cell::new(0) })))
        }),
    );

    let c = ctx.clone();
    m.set(
        "patch_method",
        Value::native("patch_method", move |i, a, _| {
            let cls = class_arg(i, &a, 0, "patch_method")?;
            let name = str_arg(i, &a, 1, "patch_method")?;
            let is_static = i.truthy(arg(i, &a, 2, "patch_method")?)?;
            let state = side_effect_arg(i, &a, 3, "patch_method")?;
            *state.label.borrow_mut() = format!("{}.{name}", cls.name);
            c.mocks.borrow_mut().push(state.clone());
            let names = member_names(&cls, &name);
            let existing = names.iter().find(|n| cls.dict.borrow().contains_key(*n)).cloned();
            let original = existing.as_ref().and_then(|n| cls.dict.borrow().get(n).cloned());
            let (mode, wrap): (Receiver, fn(Value) -> Value) = match original {
                Some(Value::StaticMethod(_)) => (Receiver::None, |v| Value::StaticMethod(Rc::new(v))),
                Some(Value::ClassMethod(_)) => (Receiver::Skip, |v| Value::ClassMethod(Rc::new(v))),
                _ if is_static => (Receiver::None, |v| Value::StaticMethod(Rc::new(v))),
                _ => (Receiver::Instance, |v| v),
            };
            let replay = replay_fn(c.clone(), state, mode);
            let patched = wrap(replay);
            let targets = match existing {
                Some(n) => vec![n],
                None => vec![name.clone()],
            };
            for t in targets {
                cls.dict.borrow_mut().insert(t, patched.clone());
            }
            Ok(Value::None)
        }),
    );

    let c = ctx.clone();
    m.set(
        "patch_constructor",
        Value::native("patch_constructor", move |i, a, _| {
            let cls = class_arg(i, &a, 0, "patch_constructor")?;
            let state = side_effect_arg(i, &a, 1, "patch_constructor")?;
            *state.label.borrow_mut() = format!("{}.__init__", cls.name);
            c.mocks.borrow_mut().push(state.clone());
            *cls.ctor_hook.borrow_mut() = Some(replay_fn(c.clone(), state, Receiver::Construct));
            Ok(Value::None)
        }),
    );

    let c = ctx.clone();
    m.set(
        "recursive_equal",
        Value::native("recursive_equal", move |i, a, _| {
            let expected = arg(i, &a, 0, "recursive_equal")?;
            let actual = arg(i, &a, 1, "recursive_equal")?;
            let verdict = match first_mismatch(expected, actual, &c.equality) {
                Ok(m) => m,
                Err(e) => Some(e.to_string()),
            };
            let equal = verdict.is_none();
            *c.last_mismatch.borrow_mut() = verdict;
            Ok(Value::Bool(equal))
        }),
    );

    let c = ctx.clone();
    m.set(
        "static_field_equal",
        Value::native("static_field_equal", move |i, a, _| {
            let class = str_arg(i, &a, 0, "static_field_equal")?;
            let field = str_arg(i, &a, 1, "static_field_equal")?;
            let expected = arg(i, &a, 2, "static_field_equal")?;
            let classes = c.classes(i)?;
            let cls = classes.resolve(&class).ok_or_else(|| i.exc("ImportError", format!("no translated class for {class}")))?;
            let attr = static_attribute(&cls, &class, &field);
            let verdict = match cls.lookup(&attr) {
                None => Some(format!("$: static field {class}.{field} is missing")),
                Some(actual) => first_mismatch(expected, &actual, &c.equality).unwrap_or_else(|e| Some(e.to_string())),
            };
            let equal = verdict.is_none();
            *c.last_mismatch.borrow_mut() = verdict;
            Ok(Value::Bool(equal))
        }),
    );

    let c = ctx.clone();
    m.set(
        "assert_mocks_consumed",
        Value::native("assert_mocks_consumed", move |i, _, _| {
            for s in c.mocks.borrow().iter() {
                if s.consumed.get() != s.records.len() {
                    return Err(i.exc(
                        "AssertionError",
                        format!("mock {} consumed {} of {} recorded calls", s.label.borrow(), s.consumed.get(), s.records.len()),
                    ));
                }
            }
            Ok(Value::None)
        }),
    );
    m
}

fn side_effect_arg(i: &Interp, a: &[Value], k: usize, f: &str) -> Result<Rc<MockState>, Exc> {
    arg(i, a, k, f)?.downcast_opaque::<Rc<MockState>>().cloned().ok_or_else(|| i.type_error(format!("{f}() needs a SideEffect")))
}

/// Attribute names a source member may have in its translated class.
fn member_names(cls: &Class, name: &str) -> Vec<String> {
    let name = if name == crate::trace::CONSTRUCTOR_NAME { "__init__" } else { name };
    vec![name.to_string(), format!("_{}__{name}", cls.name.trim_start_matches('_'))]
}

#[derive(Clone, Copy)]
enum Receiver {
    /// First argument is the live receiver.
    Instance,
    /// First argument is the class (class methods).
    Skip,
    None,
    /// Constructor hook: builds and returns the recorded instance.
    Construct,
}

/// The callable that replays `state`'s records one call at a time.
fn replay_fn(ctx: Rc<SupportContext>, state: Rc<MockState>, mode: Receiver) -> Value {
    let label = state.label.borrow().clone();
    Value::native(&label, move |i, mut a, _| {
        let k = state.consumed.get();
        let Some(rec) = state.records.get(k) else {
            return Err(i.exc("MockExhaustedError", format!("{} called more than the {} recorded times", state.label.borrow(), state.records.len())));
        };
        state.consumed.set(k + 1);
        let receiver = match mode {
            Receiver::Instance if !a.is_empty() => Some(a.remove(0)),
            Receiver::Skip if !a.is_empty() => {
                a.remove(0);
                None
            }
            _ => None,
        };
        let classes = ctx.classes(i)?;
        let codec = Codec::new(i, &classes);
        let mut reg = IdentityRegistry::new();
        let defs = group_definitions(rec);

        // Live receiver and arguments keep their identity; their recorded
        // post-call state is written into them.
        let mut live: Vec<(Value, &SerializedValue)> = Vec::new();
        if let (Some(r), Some(inst), false) = (&receiver, &rec.instance_after, matches!(mode, Receiver::Construct)) {
            live.push((r.clone(), inst));
        }
        for (v, sv) in a.iter().zip(&rec.args_after) {
            live.push((v.clone(), sv));
        }
        for (v, sv) in &live {
            if let Some(t) = token_of(sv) {
                reg.bind(t, v.clone());
            }
        }
        let built = match (mode, &rec.instance_after) {
            (Receiver::Construct, Some(inst)) => Some(codec.reconstruct(defs.resolve(inst), &mut reg).map_err(|e| codec_exc(i, e))?),
            _ => None,
        };
        for (v, sv) in &live {
            codec.reconstruct_into(v, defs.resolve(sv), &mut reg).map_err(|e| codec_exc(i, e))?;
        }
        codec.apply_static_state(&rec.static_delta, &mut reg).map_err(|e| codec_exc(i, e))?;
        match &rec.outcome {
            Outcome::Return(v) => codec.reconstruct(v, &mut reg).map_err(|e| codec_exc(i, e)),
            Outcome::Thrown(v) => {
                let e = codec.reconstruct(v, &mut reg).map_err(|e| codec_exc(i, e))?;
                Err(Exc::new(e))
            }
            Outcome::Void => Ok(built.unwrap_or(Value::None)),
        }
    })
}

fn token_of(v: &SerializedValue) -> Option<&str> {
    match &v.payload {
        Payload::Reference { token } => Some(token),
        _ => v.identity.as_deref(),
    }
}

/// First definitions of identity tokens within one mock record.
struct GroupDefs<'a>(std::collections::HashMap<&'a str, &'a SerializedValue>);

impl<'a> GroupDefs<'a> {
    /// The definition a top-level reference stands for, or `v` itself.
    fn resolve(&self, v: &'a SerializedValue) -> &'a SerializedValue {
        match &v.payload {
            Payload::Reference { token } => self.0.get(token.as_str()).copied().unwrap_or(v),
            _ => v,
        }
    }
}

fn group_definitions(rec: &MockRecord) -> GroupDefs<'_> {
    let mut defs = std::collections::HashMap::new();
    let mut roots: Vec<&SerializedValue> = Vec::new();
    roots.extend(rec.instance_after.iter());
    roots.extend(rec.args_after.iter());
    roots.extend(rec.static_delta.values().flat_map(|m| m.values()));
    if let Outcome::Return(v) | Outcome::Thrown(v) = &rec.outcome {
        roots.push(v);
    }
    for r in roots {
        r.walk(&mut |v| {
            if let (Some(t), false) = (&v.identity, matches!(v.payload, Payload::Reference { .. })) {
                defs.entry(t.as_str()).or_insert(v);
            }
        });
    }
    GroupDefs(defs)
}
