//! The small slice of the standard library that translated code relies on.

use std::rc::Rc;

use crate::builtins::{arg, kwarg};
use crate::error::Exc;
use crate::interp::{to_f64, Interp};
use crate::value::*;

type FloatFn = fn(f64) -> f64;

/// Builds a standard module by name, or `None` when it is not provided here.
pub(crate) fn build(interp: &Interp, name: &str) -> Result<Option<Rc<ModuleObj>>, Exc> {
    let m = ModuleObj::new(name);
    match name {
        "__future__" => m.set("annotations", Value::None),
        "io" => {
            m.set("BytesIO", Value::Type(BuiltinType::BytesIO));
            m.set("StringIO", Value::Type(BuiltinType::StringIO));
        }
        "datetime" => m.set("timedelta", Value::Type(BuiltinType::Timedelta)),
        "collections" => m.set("OrderedDict", Value::Type(BuiltinType::Dict)),
        "sys" => m.set("maxsize", Value::Int(i64::MAX)),
        "typing" => typing(&m),
        "abc" => {
            let object = interp.builtin_class("object").expect("object class");
            m.set("ABC", Value::Class(Rc::new(Class::new("ABC", "ABC", "abc", vec![object]))));
            m.set("abstractmethod", Value::native("abstractmethod", |i, a, _| Ok(arg(i, &a, 0, "abstractmethod")?.clone())));
        }
        "enum" => {
            let object = interp.builtin_class("object").expect("object class");
            let mut root = Class::new("Enum", "Enum", "enum", vec![object]);
            root.is_enum_root = true;
            let root = Rc::new(root);
            let mut int_enum = Class::new("IntEnum", "IntEnum", "enum", vec![root.clone()]);
            int_enum.is_enum_root = true;
            m.set("Enum", Value::Class(root));
            m.set("IntEnum", Value::Class(Rc::new(int_enum)));
            m.set("unique", Value::native("unique", |i, a, _| Ok(arg(i, &a, 0, "unique")?.clone())));
        }
        "functools" => {
            m.set(
                "reduce",
                Value::native("reduce", |i, a, _| {
                    let f = arg(i, &a, 0, "reduce")?.clone();
                    let mut items = i.collect(arg(i, &a, 1, "reduce")?)?.into_iter();
                    let mut acc = match a.get(2) {
                        Some(init) => init.clone(),
                        None => items.next().ok_or_else(|| i.type_error("reduce() of empty iterable with no initial value"))?,
                    };
                    for x in items {
                        acc = i.call(&f, vec![acc, x], vec![])?;
                    }
                    Ok(acc)
                }),
            );
        }
        "math" => math(&m),
        "operator" => {
            m.set(
                "length_hint",
                Value::native("length_hint", |i, a, _| {
                    let v = arg(i, &a, 0, "length_hint")?;
                    let n = match v {
                        Value::Iter(it) => it.borrow().remaining().len(),
                        other => match i.len(other) {
                            Ok(n) => n,
                            Err(_) => return Ok(a.get(1).cloned().unwrap_or(Value::Int(0))),
                        },
                    };
                    Ok(Value::Int(n as i64))
                }),
            );
        }
        "json" => {
            m.set(
                "loads",
                Value::native("loads", |i, a, _| {
                    let text = match arg(i, &a, 0, "loads")? {
                        Value::Str(s) => s.to_string(),
                        Value::Bytes(b) => String::from_utf8_lossy(b).into_owned(),
                        v => return Err(i.type_error(format!("the JSON object must be str, not {}", v.type_name()))),
                    };
                    let parsed: serde_json::Value = serde_json::from_str(&text).map_err(|e| i.exc("ValueError", format!("Expecting value: {e}")))?;
                    from_json(i, &parsed)
                }),
            );
            m.set(
                "dumps",
                Value::native("dumps", |i, a, kw| {
                    let sort = match kwarg(&kw, "sort_keys") {
                        Some(v) => i.truthy(&v)?,
                        None => false,
                    };
                    let mut out = String::new();
                    dump(i, arg(i, &a, 0, "dumps")?, sort, &mut out)?;
                    Ok(Value::str(out))
                }),
            );
        }
        _ => return Ok(None),
    }
    Ok(Some(m))
}

fn typing(m: &ModuleObj) {
    use BuiltinType as T;
    for (name, t) in [
        ("List", T::List),
        ("Dict", T::Dict),
        ("Tuple", T::Tuple),
        ("Set", T::Set),
        ("FrozenSet", T::Set),
        ("Type", T::Type),
        ("Iterator", T::Iter),
        ("Generator", T::Iter),
        ("Optional", T::Object),
        ("Union", T::Object),
        ("Any", T::Object),
        ("Callable", T::Object),
        ("Iterable", T::Object),
        ("Sequence", T::Object),
        ("Mapping", T::Object),
        ("Generic", T::Object),
    ] {
        m.set(name, Value::Type(t));
    }
    m.set("TYPE_CHECKING", Value::Bool(false));
    m.set("cast", Value::native("cast", |i, a, _| Ok(arg(i, &a, 1, "cast")?.clone())));
    m.set("TypeVar", Value::native("TypeVar", |_, _, _| Ok(Value::Type(BuiltinType::Object))));
    m.set("overload", Value::native("overload", |i, a, _| Ok(arg(i, &a, 0, "overload")?.clone())));
}

fn num(i: &Interp, a: &[Value], k: usize, f: &str) -> Result<f64, Exc> {
    let v = arg(i, a, k, f)?;
    to_f64(v).ok_or_else(|| i.type_error(format!("must be real number, not {}", v.type_name())))
}

fn math(m: &ModuleObj) {
    m.set("pi", Value::Float(std::f64::consts::PI));
    m.set("e", Value::Float(std::f64::consts::E));
    m.set("inf", Value::Float(f64::INFINITY));
    m.set("nan", Value::Float(f64::NAN));
    let unary: [(&str, FloatFn); 9] = [
        ("sqrt", f64::sqrt),
        ("fabs", f64::abs),
        ("exp", f64::exp),
        ("sin", f64::sin),
        ("cos", f64::cos),
        ("tan", f64::tan),
        ("atan", f64::atan),
        ("log10", f64::log10),
        ("log2", f64::log2),
    ];
    for (name, f) in unary {
        m.set(
            name,
            Value::native(name, move |i, a, _| {
                let x = num(i, &a, 0, name)?;
                if name == "sqrt" && x < 0.0 {
                    return Err(i.exc("ValueError", "math domain error"));
                }
                Ok(Value::Float(f(x)))
            }),
        );
    }
    let rounding: [(&str, FloatFn); 3] = [("floor", f64::floor), ("ceil", f64::ceil), ("trunc", f64::trunc)];
    for (name, f) in rounding {
        m.set(
            name,
            Value::native(name, move |i, a, _| match arg(i, &a, 0, name)? {
                Value::Int(n) => Ok(Value::Int(*n)),
                v => {
                    let x = to_f64(v).ok_or_else(|| i.type_error("must be real number"))?;
                    if !x.is_finite() {
                        return Err(i.exc("OverflowError", "cannot convert float infinity or NaN to integer"));
                    }
                    Ok(Value::Int(f(x) as i64))
                }
            }),
        );
    }
    m.set(
        "log",
        Value::native("log", |i, a, _| {
            let x = num(i, &a, 0, "log")?;
            if x <= 0.0 {
                return Err(i.exc("ValueError", "math domain error"));
            }
            Ok(Value::Float(match a.get(1) {
                Some(b) => x.ln() / to_f64(b).unwrap_or(std::f64::consts::E).ln(),
                None => x.ln(),
            }))
        }),
    );
    m.set("pow", Value::native("pow", |i, a, _| Ok(Value::Float(num(i, &a, 0, "pow")?.powf(num(i, &a, 1, "pow")?)))));
    m.set("atan2", Value::native("atan2", |i, a, _| Ok(Value::Float(num(i, &a, 0, "atan2")?.atan2(num(i, &a, 1, "atan2")?)))));
    m.set("hypot", Value::native("hypot", |i, a, _| Ok(Value::Float(num(i, &a, 0, "hypot")?.hypot(num(i, &a, 1, "hypot")?)))));
    m.set("isnan", Value::native("isnan", |i, a, _| Ok(Value::Bool(num(i, &a, 0, "isnan")?.is_nan()))));
    m.set("isinf", Value::native("isinf", |i, a, _| Ok(Value::Bool(num(i, &a, 0, "isinf")?.is_infinite()))));
    m.set("isfinite", Value::native("isfinite", |i, a, _| Ok(Value::Bool(num(i, &a, 0, "isfinite")?.is_finite()))));
    m.set("copysign", Value::native("copysign", |i, a, _| Ok(Value::Float(num(i, &a, 0, "copysign")?.copysign(num(i, &a, 1, "copysign")?)))));
    m.set(
        "isclose",
        Value::native("isclose", |i, a, kw| {
            let (x, y) = (num(i, &a, 0, "isclose")?, num(i, &a, 1, "isclose")?);
            let rel = kwarg(&kw, "rel_tol").and_then(|v| to_f64(&v)).unwrap_or(1e-9);
            let abs = kwarg(&kw, "abs_tol").and_then(|v| to_f64(&v)).unwrap_or(0.0);
            if x == y {
                return Ok(Value::Bool(true));
            }
            if x.is_infinite() || y.is_infinite() {
                return Ok(Value::Bool(false));
            }
            let d = (x - y).abs();
            Ok(Value::Bool(d <= (rel * y.abs()).max(rel * x.abs()) || d <= abs))
        }),
    );
    m.set(
        "gcd",
        Value::native("gcd", |i, a, _| {
            let (mut x, mut y) =
                (arg(i, &a, 0, "gcd")?.as_int().unwrap_or(0).unsigned_abs(), arg(i, &a, 1, "gcd")?.as_int().unwrap_or(0).unsigned_abs());
            while y != 0 {
                (x, y) = (y, x % y);
            }
            Ok(Value::Int(x as i64))
        }),
    );
}

fn from_json(i: &Interp, v: &serde_json::Value) -> NativeResult {
    use serde_json::Value as J;
    Ok(match v {
        J::Null => Value::None,
        J::Bool(b) => Value::Bool(*b),
        J::Number(n) => match n.as_i64() {
            Some(k) => Value::Int(k),
            None => Value::Float(n.as_f64().unwrap_or(f64::NAN)),
        },
        J::String(s) => Value::str(s.as_str()),
        J::Array(items) => Value::list(items.iter().map(|x| from_json(i, x)).collect::<Result<_, _>>()?),
        J::Object(map) => {
            let mut pairs = Vec::with_capacity(map.len());
            for (k, x) in map {
                pairs.push((Value::str(k.as_str()), from_json(i, x)?));
            }
            i.make_dict(pairs)?
        }
    })
}

/// Serializes with the default `json.dumps` separators.
fn dump(i: &Interp, v: &Value, sort: bool, out: &mut String) -> Result<(), Exc> {
    match v {
        Value::None => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Int(n) => out.push_str(&n.to_string()),
        Value::Float(f) if f.is_nan() => out.push_str("NaN"),
        Value::Float(f) if f.is_infinite() => out.push_str(if *f > 0.0 { "Infinity" } else { "-Infinity" }),
        Value::Float(f) => out.push_str(&float_repr(*f)),
        Value::Str(s) => out.push_str(&serde_json::to_string(s.as_ref()).unwrap_or_default()),
        Value::List(_) | Value::Tuple(_) => {
            out.push('[');
            for (k, x) in i.collect(v)?.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                dump(i, x, sort, out)?;
            }
            out.push(']');
        }
        Value::Dict(d) => {
            let mut pairs: Vec<(String, Value)> = Vec::new();
            for (k, x) in d.borrow().values() {
                let key = match k {
                    Value::Str(s) => s.to_string(),
                    Value::Int(_) | Value::Float(_) | Value::Bool(_) | Value::None => {
                        let mut s = String::new();
                        dump(i, k, false, &mut s)?;
                        s
                    }
                    _ => return Err(i.type_error(format!("keys must be str, int, float, bool or None, not {}", k.type_name()))),
                };
                pairs.push((key, x.clone()));
            }
            if sort {
                pairs.sort_by(|a, b| a.0.cmp(&b.0));
            }
            out.push('{');
            for (k, (key, x)) in pairs.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                out.push_str(&serde_json::to_string(key).unwrap_or_default());
                out.push_str(": ");
                dump(i, x, sort, out)?;
            }
            out.push('}');
        }
        _ => return Err(i.type_error(format!("Object of type {} is not JSON serializable", v.type_name()))),
    }
    Ok(())
}
