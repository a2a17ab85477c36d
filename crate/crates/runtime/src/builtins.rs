//! Built-in functions, type constructors and methods of built-in types.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::rc::Rc;

use crate::error::Exc;
use crate::interp::{new_instance, slice_indices, to_f64, Interp};
use crate::value::*;

type Kw = Vec<(String, Value)>;

pub(crate) fn install(interp: &Interp) {
    let b = &interp.builtins;
    let object = Rc::new(Class::new("object", "object", "builtins", Vec::new()));
    interp.exc_classes.borrow_mut().insert("object".into(), object);
    for t in [
        BuiltinType::Object,
        BuiltinType::Bool,
        BuiltinType::Int,
        BuiltinType::Float,
        BuiltinType::Str,
        BuiltinType::Bytes,
        BuiltinType::ByteArray,
        BuiltinType::List,
        BuiltinType::Tuple,
        BuiltinType::Dict,
        BuiltinType::Set,
        BuiltinType::Type,
    ] {
        b.set(t.name(), Value::Type(t));
    }
    b.set("frozenset", Value::Type(BuiltinType::Set));
    b.set("NotImplemented", Value::None);
    b.set("Ellipsis", Value::None);
    b.set("__name__", Value::str("builtins"));

    let f = |name: &str, func: fn(&Interp, Vec<Value>, Kw) -> NativeResult| {
        b.set(name, Value::native(name, func));
    };
    f("len", |i, a, _| Ok(Value::Int(i.len(arg(i, &a, 0, "len")?)? as i64)));
    f("repr", |i, a, _| Ok(Value::str(i.repr(arg(i, &a, 0, "repr")?)?)));
    f("print", |i, a, kw| {
        let sep = kwarg_str(&kw, "sep").unwrap_or_else(|| " ".into());
        let end = kwarg_str(&kw, "end").unwrap_or_else(|| "\n".into());
        let mut parts = Vec::new();
        for v in &a {
            parts.push(i.to_str(v)?);
        }
        i.write_output(&format!("{}{}", parts.join(&sep), end));
        Ok(Value::None)
    });
    f("isinstance", |i, a, _| Ok(Value::Bool(i.isinstance(arg(i, &a, 0, "isinstance")?, arg(i, &a, 1, "isinstance")?)?)));
    f("issubclass", |i, a, _| {
        let (c, t) = (arg(i, &a, 0, "issubclass")?, arg(i, &a, 1, "issubclass")?);
        Ok(Value::Bool(match (c, t) {
            (Value::Class(c), Value::Class(t)) => c.is_subclass_of(t),
            (Value::Type(x), Value::Type(y)) => x == y || *y == BuiltinType::Object,
            (Value::Class(_), Value::Type(BuiltinType::Object)) => true,
            _ => false,
        }))
    });
    f("hasattr", |i, a, _| {
        let name = str_arg(i, &a, 1, "hasattr")?;
        Ok(Value::Bool(i.hasattr(arg(i, &a, 0, "hasattr")?, &name)?))
    });
    f("getattr", |i, a, _| {
        let name = str_arg(i, &a, 1, "getattr")?;
        match i.getattr(arg(i, &a, 0, "getattr")?, &name) {
            Err(e) if a.len() > 2 && i.exc_is(&e, "AttributeError") => Ok(a[2].clone()),
            r => r,
        }
    });
    f("setattr", |i, a, _| {
        let name = str_arg(i, &a, 1, "setattr")?;
        i.setattr(arg(i, &a, 0, "setattr")?, &name, arg(i, &a, 2, "setattr")?.clone())?;
        Ok(Value::None)
    });
    f("delattr", |i, a, _| {
        let name = str_arg(i, &a, 1, "delattr")?;
        i.delattr(arg(i, &a, 0, "delattr")?, &name)?;
        Ok(Value::None)
    });
    f("iter", |i, a, _| i.make_iter(arg(i, &a, 0, "iter")?));
    f("next", |i, a, _| match i.next_value(arg(i, &a, 0, "next")?)? {
        Some(v) => Ok(v),
        None if a.len() > 1 => Ok(a[1].clone()),
        None => Err(i.exc("StopIteration", "")),
    });
    f("abs", |i, a, _| match arg(i, &a, 0, "abs")? {
        Value::Int(x) => x.checked_abs().map(Value::Int).ok_or_else(|| i.exc("OverflowError", "integer overflow")),
        Value::Bool(x) => Ok(Value::Int(*x as i64)),
        Value::Float(x) => Ok(Value::Float(x.abs())),
        Value::Timedelta(x) => Ok(Value::Timedelta(x.abs())),
        v => Err(i.type_error(format!("bad operand type for abs(): '{}'", v.type_name()))),
    });
    f("min", |i, a, kw| min_max(i, a, kw, Ordering::Less));
    f("max", |i, a, kw| min_max(i, a, kw, Ordering::Greater));
    f("sum", |i, a, kw| {
        let items = i.collect(arg(i, &a, 0, "sum")?)?;
        let mut acc = a.get(1).cloned().or_else(|| kwarg(&kw, "start")).unwrap_or(Value::Int(0));
        for x in items {
            acc = i.binop(crate::ast::BinOp::Add, &acc, &x)?;
        }
        Ok(acc)
    });
    f("sorted", |i, a, kw| {
        let mut items = i.collect(arg(i, &a, 0, "sorted")?)?;
        sort_values(i, &mut items, kwarg(&kw, "key"), kwarg_bool(i, &kw, "reverse")?)?;
        Ok(Value::list(items))
    });
    f("reversed", |i, a, _| {
        let mut items = i.collect(arg(i, &a, 0, "reversed")?)?;
        items.reverse();
        Ok(owned_iter(items))
    });
    f("enumerate", |i, a, kw| {
        let items = i.collect(arg(i, &a, 0, "enumerate")?)?;
        let start = a.get(1).cloned().or_else(|| kwarg(&kw, "start")).and_then(|v| v.as_int()).unwrap_or(0);
        Ok(owned_iter(items.into_iter().enumerate().map(|(k, v)| Value::tuple(vec![Value::Int(start + k as i64), v])).collect()))
    });
    f("zip", |i, a, _| {
        let cols: Vec<Vec<Value>> = a.iter().map(|x| i.collect(x)).collect::<Result<_, _>>()?;
        let n = cols.iter().map(Vec::len).min().unwrap_or(0);
        Ok(owned_iter((0..n).map(|k| Value::tuple(cols.iter().map(|c| c[k].clone()).collect())).collect()))
    });
    f("map", |i, a, _| {
        let func = arg(i, &a, 0, "map")?.clone();
        let cols: Vec<Vec<Value>> = a[1..].iter().map(|x| i.collect(x)).collect::<Result<_, _>>()?;
        let n = cols.iter().map(Vec::len).min().unwrap_or(0);
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(i.call(&func, cols.iter().map(|c| c[k].clone()).collect(), vec![])?);
        }
        Ok(owned_iter(out))
    });
    f("filter", |i, a, _| {
        let func = arg(i, &a, 0, "filter")?.clone();
        let mut out = Vec::new();
        for x in i.collect(arg(i, &a, 1, "filter")?)? {
            let keep = if func.is_none() { x.clone() } else { i.call(&func, vec![x.clone()], vec![])? };
            if i.truthy(&keep)? {
                out.push(x);
            }
        }
        Ok(owned_iter(out))
    });
    f("any", |i, a, _| {
        for x in i.collect(arg(i, &a, 0, "any")?)? {
            if i.truthy(&x)? {
                return Ok(Value::Bool(true));
            }
        }
        Ok(Value::Bool(false))
    });
    f("all", |i, a, _| {
        for x in i.collect(arg(i, &a, 0, "all")?)? {
            if !i.truthy(&x)? {
                return Ok(Value::Bool(false));
            }
        }
        Ok(Value::Bool(true))
    });
    f("range", |i, a, _| {
        let ints: Vec<i64> =
            a.iter().map(|x| x.as_int().ok_or_else(|| i.type_error("range() arguments must be integers"))).collect::<Result<_, _>>()?;
        let (start, stop, step) = match ints.as_slice() {
            [n] => (0, *n, 1),
            [s, e] => (*s, *e, 1),
            [s, e, st] => (*s, *e, *st),
            _ => return Err(i.type_error("range expected 1 to 3 arguments")),
        };
        if step == 0 {
            return Err(i.exc("ValueError", "range() arg 3 must not be zero"));
        }
        let mut out = Vec::new();
        let mut k = start;
        while (step > 0 && k < stop) || (step < 0 && k > stop) {
            out.push(Value::Int(k));
            k += step;
        }
        Ok(Value::list(out))
    });
    f("ord", |i, a, _| {
        let s = str_arg(i, &a, 0, "ord")?;
        let mut cs = s.chars();
        match (cs.next(), cs.next()) {
            (Some(c), None) => Ok(Value::Int(c as i64)),
            _ => Err(i.type_error("ord() expected a character")),
        }
    });
    f("chr", |i, a, _| {
        let n = arg(i, &a, 0, "chr")?.as_int().unwrap_or(-1);
        u32::try_from(n)
            .ok()
            .and_then(char::from_u32)
            .map(|c| Value::str(c.to_string()))
            .ok_or_else(|| i.exc("ValueError", "chr() arg not in range(0x110000)"))
    });
    f("hash", |i, a, _| {
        use std::hash::{Hash, Hasher};
        let k = i.hash_key(arg(i, &a, 0, "hash")?)?;
        if let HashKey::Int(n) | HashKey::Custom(n) = k {
            return Ok(Value::Int(n));
        }
        let mut h = std::collections::hash_map::DefaultHasher::new();
        k.hash(&mut h);
        Ok(Value::Int(h.finish() as i64))
    });
    f("id", |i, a, _| {
        let v = arg(i, &a, 0, "id")?;
        Ok(Value::Int(v.identity().unwrap_or_else(|| match i.hash_key(v) {
            Ok(HashKey::Int(n)) => n as usize,
            _ => 0,
        }) as i64))
    });
    f("callable", |i, a, _| {
        let v = arg(i, &a, 0, "callable")?;
        Ok(Value::Bool(match v {
            Value::Function(_) | Value::BoundMethod(_) | Value::Native(_) | Value::BuiltinMethod(_) | Value::Class(_) | Value::Type(_) => true,
            Value::Instance(_) => i.hasattr(v, "__call__")?,
            _ => false,
        }))
    });
    f("round", |i, a, _| {
        let v = arg(i, &a, 0, "round")?;
        let nd = a.get(1).and_then(|x| x.as_int());
        match (v, nd) {
            (Value::Int(_) | Value::Bool(_), _) => Ok(Value::Int(v.as_int().unwrap_or(0))),
            (Value::Float(x), None) => Ok(Value::Int(x.round_ties_even() as i64)),
            (Value::Float(x), Some(n)) => {
                let p = 10f64.powi(n as i32);
                Ok(Value::Float((x * p).round_ties_even() / p))
            }
            _ => Err(i.type_error("round() requires a number")),
        }
    });
    f("divmod", |i, a, _| {
        let (x, y) = (arg(i, &a, 0, "divmod")?, arg(i, &a, 1, "divmod")?);
        Ok(Value::tuple(vec![i.binop(crate::ast::BinOp::FloorDiv, x, y)?, i.binop(crate::ast::BinOp::Mod, x, y)?]))
    });
    f("pow", |i, a, _| {
        let (x, y) = (arg(i, &a, 0, "pow")?, arg(i, &a, 1, "pow")?);
        match a.get(2).and_then(|m| m.as_int()) {
            Some(m) => {
                let (mut base, mut e, mut acc) = (x.as_int().unwrap_or(0).rem_euclid(m) as i128, y.as_int().unwrap_or(0), 1i128);
                while e > 0 {
                    if e & 1 == 1 {
                        acc = acc * base % m as i128;
                    }
                    base = base * base % m as i128;
                    e >>= 1;
                }
                Ok(Value::Int(acc as i64))
            }
            None => i.binop(crate::ast::BinOp::Pow, x, y),
        }
    });
    f("bin", |i, a, _| Ok(Value::str(radix(arg(i, &a, 0, "bin")?.as_int().unwrap_or(0), 2, "0b"))));
    f("hex", |i, a, _| Ok(Value::str(radix(arg(i, &a, 0, "hex")?.as_int().unwrap_or(0), 16, "0x"))));
    f("oct", |i, a, _| Ok(Value::str(radix(arg(i, &a, 0, "oct")?.as_int().unwrap_or(0), 8, "0o"))));
    f("format", |i, a, _| {
        let spec = a.get(1).and_then(|s| s.as_str().map(str::to_string)).unwrap_or_default();
        Ok(Value::str(format_spec(i, arg(i, &a, 0, "format")?, &spec)?))
    });
    f("vars", |i, a, _| i.getattr(arg(i, &a, 0, "vars")?, "__dict__"));
    f("staticmethod", |i, a, _| Ok(Value::StaticMethod(Rc::new(arg(i, &a, 0, "staticmethod")?.clone()))));
    f("classmethod", |i, a, _| Ok(Value::ClassMethod(Rc::new(arg(i, &a, 0, "classmethod")?.clone()))));
    f("property", |i, a, kw| {
        let getter = a.first().cloned().or_else(|| kwarg(&kw, "fget")).ok_or_else(|| i.type_error("property() requires a getter"))?;
        let setter = a.get(1).cloned().or_else(|| kwarg(&kw, "fset"));
        Ok(Value::Property(Rc::new(Property { getter, setter })))
    });
    f("super", |i, a, _| match (a.first(), a.get(1)) {
        (Some(Value::Class(c)), Some(obj)) => Ok(Value::Super(Rc::new((c.clone(), obj.clone())))),
        _ => Err(i.exc("RuntimeError", "super(): no arguments")),
    });
}

fn owned_iter(items: Vec<Value>) -> Value {
    Value::Iter(new_ref(IterState { source: IterSource::Owned(items), pos: 0 }))
}

fn radix(n: i64, base: u32, prefix: &str) -> String {
    let neg = n < 0;
    let mut m = n.unsigned_abs();
    let mut digits = Vec::new();
    loop {
        digits.push(std::char::from_digit((m % base as u64) as u32, base).unwrap_or('0'));
        m /= base as u64;
        if m == 0 {
            break;
        }
    }
    let body: String = digits.into_iter().rev().collect();
    format!("{}{prefix}{body}", if neg { "-" } else { "" })
}

pub(crate) fn arg<'a>(i: &Interp, a: &'a [Value], idx: usize, fname: &str) -> Result<&'a Value, Exc> {
    a.get(idx).ok_or_else(|| i.type_error(format!("{fname}() missing required argument {}", idx + 1)))
}

fn str_arg(i: &Interp, a: &[Value], idx: usize, fname: &str) -> Result<String, Exc> {
    match arg(i, a, idx, fname)? {
        Value::Str(s) => Ok(s.to_string()),
        v => Err(i.type_error(format!("{fname}() argument must be str, not {}", v.type_name()))),
    }
}

pub(crate) fn kwarg(kw: &Kw, name: &str) -> Option<Value> {
    kw.iter().find(|(k, _)| k == name).map(|(_, v)| v.clone())
}

fn kwarg_str(kw: &Kw, name: &str) -> Option<String> {
    kwarg(kw, name).and_then(|v| v.as_str().map(str::to_string))
}

fn kwarg_bool(i: &Interp, kw: &Kw, name: &str) -> Result<bool, Exc> {
    match kwarg(kw, name) {
        Some(v) => i.truthy(&v),
        None => Ok(false),
    }
}

fn min_max(i: &Interp, a: Vec<Value>, kw: Kw, want: Ordering) -> NativeResult {
    let items = if a.len() == 1 { i.collect(&a[0])? } else { a };
    let key = kwarg(&kw, "key");
    if items.is_empty() {
        return kwarg(&kw, "default").ok_or_else(|| i.exc("ValueError", "arg is an empty sequence"));
    }
    let mut best = items[0].clone();
    let mut best_k = match &key {
        Some(k) => i.call(k, vec![best.clone()], vec![])?,
        None => best.clone(),
    };
    for x in items.into_iter().skip(1) {
        let xk = match &key {
            Some(k) => i.call(k, vec![x.clone()], vec![])?,
            None => x.clone(),
        };
        if i.order(&xk, &best_k)? == want {
            best = x;
            best_k = xk;
        }
    }
    Ok(best)
}

/// Stable sort with an optional key function; the first comparison error wins.
pub fn sort_values(i: &Interp, items: &mut Vec<Value>, key: Option<Value>, reverse: bool) -> Result<(), Exc> {
    let keys: Vec<Value> = match key.filter(|k| !k.is_none()) {
        Some(k) => items.iter().map(|x| i.call(&k, vec![x.clone()], vec![])).collect::<Result<_, _>>()?,
        None => items.clone(),
    };
    let mut idx: Vec<usize> = (0..items.len()).collect();
    let err: RefCell<Option<Exc>> = RefCell::new(None);
    idx.sort_by(|&x, &y| {
        if err.borrow().is_some() {
            return Ordering::Equal;
        }
        match i.order(&keys[x], &keys[y]) {
            Ok(o) => {
                if reverse {
                    o.reverse()
                } else {
                    o
                }
            }
            Err(e) => {
                *err.borrow_mut() = Some(e);
                Ordering::Equal
            }
        }
    });
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    let sorted: Vec<Value> = idx.into_iter().map(|k| items[k].clone()).collect();
    *items = sorted;
    Ok(())
}

pub(crate) fn bytes_of(i: &Interp, v: &Value) -> Result<Vec<u8>, Exc> {
    match v {
        Value::Bytes(b) => Ok(b.to_vec()),
        Value::ByteArray(b) => Ok(b.borrow().clone()),
        Value::List(_) | Value::Tuple(_) | Value::Iter(_) => i
            .collect(v)?
            .iter()
            .map(|x| match x.as_int() {
                Some(n) if (0..256).contains(&n) => Ok(n as u8),
                _ => Err(i.exc("ValueError", "bytes must be in range(0, 256)")),
            })
            .collect(),
        _ => Err(i.type_error(format!("a bytes-like object is required, not '{}'", v.type_name()))),
    }
}

/// `type(v)`.
pub fn type_of(v: &Value) -> Value {
    use BuiltinType as T;
    Value::Type(match v {
        Value::Instance(i) => return Value::Class(i.class.borrow().clone()),
        Value::None => T::NoneType,
        Value::Bool(_) => T::Bool,
        Value::Int(_) => T::Int,
        Value::Float(_) => T::Float,
        Value::Str(_) => T::Str,
        Value::Bytes(_) => T::Bytes,
        Value::ByteArray(_) => T::ByteArray,
        Value::List(_) => T::List,
        Value::Tuple(_) => T::Tuple,
        Value::Dict(_) => T::Dict,
        Value::Set(_) => T::Set,
        Value::BytesIO(_) => T::BytesIO,
        Value::StringIO(_) => T::StringIO,
        Value::Timedelta(_) => T::Timedelta,
        Value::Iter(_) => T::Iter,
        Value::Class(_) | Value::Type(_) => T::Type,
        Value::Function(_) => T::Function,
        _ => T::Object,
    })
}

pub(crate) fn construct(i: &Interp, t: BuiltinType, a: Vec<Value>, kw: Kw) -> NativeResult {
    use BuiltinType as T;
    let first = a.first().cloned();
    match t {
        T::Object => Ok(new_instance(&i.builtin_class("object").expect("object class"))),
        T::Type => match first {
            Some(v) if a.len() == 1 => Ok(type_of(&v)),
            _ => Err(i.type_error("type() takes 1 argument")),
        },
        T::Bool => Ok(Value::Bool(match first {
            Some(v) => i.truthy(&v)?,
            None => false,
        })),
        T::Int => {
            let base = a.get(1).cloned().or_else(|| kwarg(&kw, "base")).and_then(|b| b.as_int());
            match first {
                None => Ok(Value::Int(0)),
                Some(Value::Int(n)) => Ok(Value::Int(n)),
                Some(Value::Bool(b)) => Ok(Value::Int(b as i64)),
                Some(Value::Float(f)) => {
                    if !f.is_finite() {
                        return Err(i.exc("OverflowError", "cannot convert float infinity or NaN to integer"));
                    }
                    Ok(Value::Int(f.trunc() as i64))
                }
                Some(Value::Str(s)) => parse_int(&s, base.unwrap_or(10) as u32)
                    .map(Value::Int)
                    .ok_or_else(|| i.exc("ValueError", format!("invalid literal for int() with base {}: {}", base.unwrap_or(10), str_repr(&s)))),
                Some(v @ Value::Instance(_)) => {
                    let m = i.getattr(&v, "__int__")?;
                    i.call(&m, vec![], vec![])
                }
                Some(v) => Err(i.type_error(format!("int() argument must be a string or a number, not '{}'", v.type_name()))),
            }
        }
        T::Float => match first {
            None => Ok(Value::Float(0.0)),
            Some(v @ (Value::Int(_) | Value::Bool(_) | Value::Float(_))) => Ok(Value::Float(to_f64(&v).unwrap_or(0.0))),
            Some(Value::Str(s)) => {
                let t = s.trim().to_ascii_lowercase().replace('_', "");
                let parsed = match t.as_str() {
                    "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
                    "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
                    "nan" | "+nan" | "-nan" => Some(f64::NAN),
                    _ => t.parse::<f64>().ok(),
                };
                parsed.map(Value::Float).ok_or_else(|| i.exc("ValueError", format!("could not convert string to float: {}", str_repr(&s))))
            }
            Some(v) => Err(i.type_error(format!("float() argument must be a string or a number, not '{}'", v.type_name()))),
        },
        T::Str => match (first, a.get(1)) {
            (None, _) => Ok(Value::str("")),
            (Some(Value::Bytes(b)), Some(_)) => decode(i, &b),
            (Some(Value::ByteArray(b)), Some(_)) => decode(i, &b.borrow()),
            (Some(v), _) => Ok(Value::str(i.to_str(&v)?)),
        },
        T::Bytes | T::ByteArray => {
            let data = match first {
                None => Vec::new(),
                Some(Value::Str(s)) => s.as_bytes().to_vec(),
                Some(Value::Int(n)) => vec![0; n.max(0) as usize],
                Some(v) => bytes_of(i, &v)?,
            };
            Ok(if t == T::Bytes { Value::bytes(data) } else { Value::ByteArray(new_ref(data)) })
        }
        T::List => Ok(Value::list(match first {
            Some(v) => i.collect(&v)?,
            None => Vec::new(),
        })),
        T::Tuple => Ok(Value::tuple(match first {
            Some(v) => i.collect(&v)?,
            None => Vec::new(),
        })),
        T::Set => i.make_set(match first {
            Some(v) => i.collect(&v)?,
            None => Vec::new(),
        }),
        T::Dict => {
            let mut pairs = Vec::new();
            match first {
                Some(Value::Dict(d)) => pairs.extend(d.borrow().values().cloned()),
                Some(v) => {
                    for item in i.collect(&v)? {
                        let kv = i.collect(&item)?;
                        if kv.len() != 2 {
                            return Err(i.exc("ValueError", "dictionary update sequence element has wrong length"));
                        }
                        pairs.push((kv[0].clone(), kv[1].clone()));
                    }
                }
                None => {}
            }
            for (k, v) in kw {
                pairs.push((Value::str(k.as_str()), v));
            }
            i.make_dict(pairs)
        }
        T::BytesIO => {
            let buf = match first.or_else(|| kwarg(&kw, "initial_bytes")) {
                Some(v) if !v.is_none() => bytes_of(i, &v)?,
                _ => Vec::new(),
            };
            Ok(Value::BytesIO(new_ref(ByteStream { buf, pos: 0 })))
        }
        T::StringIO => {
            let buf = match first.or_else(|| kwarg(&kw, "initial_value")) {
                Some(Value::Str(s)) => s.chars().collect(),
                _ => Vec::new(),
            };
            Ok(Value::StringIO(new_ref(TextStream { buf, pos: 0 })))
        }
        T::Timedelta => {
            let names = ["days", "seconds", "microseconds", "milliseconds", "minutes", "hours", "weeks"];
            let scale = [86_400e6, 1e6, 1.0, 1e3, 60e6, 3600e6, 604_800e6];
            let mut total = 0f64;
            for (k, v) in a.iter().enumerate() {
                total += to_f64(v).unwrap_or(0.0) * scale.get(k).copied().unwrap_or(0.0);
            }
            for (k, v) in &kw {
                let pos =
                    names.iter().position(|n| n == k).ok_or_else(|| i.type_error(format!("'{k}' is an invalid keyword argument for timedelta")))?;
                total += to_f64(v).unwrap_or(0.0) * scale[pos];
            }
            Ok(Value::Timedelta(total.round_ties_even() as i64))
        }
        T::NoneType | T::Iter | T::Function => Err(i.type_error(format!("cannot create '{}' instances", t.name()))),
    }
}

fn decode(i: &Interp, b: &[u8]) -> NativeResult {
    String::from_utf8(b.to_vec()).map(Value::str).map_err(|e| i.exc("UnicodeDecodeError", format!("'utf-8' codec can't decode bytes: {e}")))
}

fn parse_int(s: &str, base: u32) -> Option<i64> {
    let t = s.trim().replace('_', "");
    let (neg, body) = match t.strip_prefix('-') {
        Some(r) => (true, r.to_string()),
        None => (false, t.strip_prefix('+').unwrap_or(&t).to_string()),
    };
    let (base, body) = match (base, body.get(..2).map(str::to_ascii_lowercase).as_deref()) {
        (0 | 16, Some("0x")) => (16, body[2..].to_string()),
        (0 | 8, Some("0o")) => (8, body[2..].to_string()),
        (0 | 2, Some("0b")) => (2, body[2..].to_string()),
        (0, _) => (10, body),
        (b, _) => (b, body),
    };
    if body.is_empty() {
        return None;
    }
    let v = i64::from_str_radix(&body, base).ok()?;
    Some(if neg { -v } else { v })
}

const STR_METHODS: &[&str] = &[
    "join",
    "split",
    "rsplit",
    "strip",
    "lstrip",
    "rstrip",
    "startswith",
    "endswith",
    "find",
    "rfind",
    "index",
    "rindex",
    "replace",
    "upper",
    "lower",
    "isdigit",
    "isnumeric",
    "isdecimal",
    "isalpha",
    "isalnum",
    "isspace",
    "isupper",
    "islower",
    "format",
    "count",
    "encode",
    "splitlines",
    "capitalize",
    "title",
    "zfill",
    "center",
    "ljust",
    "rjust",
    "partition",
    "rpartition",
    "swapcase",
    "casefold",
    "removeprefix",
    "removesuffix",
];
const LIST_METHODS: &[&str] = &["append", "extend", "pop", "insert", "remove", "index", "count", "sort", "reverse", "clear", "copy"];
const TUPLE_METHODS: &[&str] = &["index", "count"];
const DICT_METHODS: &[&str] = &["get", "keys", "values", "items", "pop", "setdefault", "update", "clear", "copy", "popitem"];
const SET_METHODS: &[&str] = &[
    "add",
    "remove",
    "discard",
    "pop",
    "clear",
    "copy",
    "union",
    "intersection",
    "difference",
    "symmetric_difference",
    "update",
    "issubset",
    "issuperset",
    "isdisjoint",
];
const BYTES_METHODS: &[&str] = &["decode", "hex", "count", "startswith", "endswith", "find"];
const BYTEARRAY_METHODS: &[&str] = &["decode", "hex", "append", "extend", "pop", "clear", "copy", "insert"];
const STREAM_METHODS: &[&str] =
    &["read", "write", "getvalue", "seek", "tell", "readline", "readlines", "close", "truncate", "flush", "readable", "writable", "seekable"];

fn method_names(v: &Value) -> &'static [&'static str] {
    match v {
        Value::Str(_) => STR_METHODS,
        Value::List(_) => LIST_METHODS,
        Value::Tuple(_) => TUPLE_METHODS,
        Value::Dict(_) => DICT_METHODS,
        Value::Set(_) => SET_METHODS,
        Value::Bytes(_) => BYTES_METHODS,
        Value::ByteArray(_) => BYTEARRAY_METHODS,
        Value::BytesIO(_) | Value::StringIO(_) => STREAM_METHODS,
        Value::Timedelta(_) => &["total_seconds"],
        Value::Property(_) => &["setter", "getter"],
        Value::Iter(_) => &["__next__"],
        Value::Int(_) | Value::Bool(_) => &["bit_length"],
        Value::Float(_) => &["is_integer"],
        _ => &[],
    }
}

pub(crate) fn builtin_attr(i: &Interp, obj: &Value, name: &str) -> NativeResult {
    if let Value::Timedelta(us) = obj {
        let days = us.div_euclid(86_400_000_000);
        let rem = us.rem_euclid(86_400_000_000);
        match name {
            "days" => return Ok(Value::Int(days)),
            "seconds" => return Ok(Value::Int(rem / 1_000_000)),
            "microseconds" => return Ok(Value::Int(rem % 1_000_000)),
            _ => {}
        }
    }
    if let Value::Type(t) = obj {
        let t = *t;
        let name = name.to_string();
        if t == BuiltinType::Dict && name == "fromkeys" {
            return Ok(Value::native("fromkeys", |i, a, _| {
                let keys = i.collect(arg(i, &a, 0, "fromkeys")?)?;
                let v = a.get(1).cloned().unwrap_or(Value::None);
                i.make_dict(keys.into_iter().map(|k| (k, v.clone())).collect())
            }));
        }
        return Ok(Value::native(&name.clone(), move |i, a, kw| {
            let recv = arg(i, &a, 0, &name)?.clone();
            if !crate::interp::matches_builtin_type(&recv, t) {
                return Err(i.type_error(format!("descriptor '{name}' requires a '{}' object", t.name())));
            }
            call_method(i, &recv, &name, a[1..].to_vec(), kw)
        }));
    }
    if method_names(obj).contains(&name) {
        return Ok(Value::BuiltinMethod(Rc::new((obj.clone(), name.to_string()))));
    }
    Err(i.exc("AttributeError", format!("'{}' object has no attribute '{name}'", obj.type_name())))
}

pub(crate) fn call_method(i: &Interp, recv: &Value, name: &str, a: Vec<Value>, kw: Kw) -> NativeResult {
    match recv {
        Value::Str(s) => str_method(i, s, name, a, kw),
        Value::List(l) => list_method(i, recv, l, name, a, kw),
        Value::Tuple(t) => seq_common(i, t, name, &a),
        Value::Dict(d) => dict_method(i, d, name, a, kw),
        Value::Set(s) => set_method(i, s, name, a),
        Value::Bytes(b) => bytes_method(i, b, name, a),
        Value::ByteArray(b) => bytearray_method(i, b, name, a),
        Value::BytesIO(s) => bytesio_method(i, s, name, a),
        Value::StringIO(s) => stringio_method(i, s, name, a),
        Value::Timedelta(us) if name == "total_seconds" => Ok(Value::Float(*us as f64 / 1e6)),
        Value::Iter(_) if name == "__next__" => i.next_value(recv)?.ok_or_else(|| i.exc("StopIteration", "")),
        Value::Int(_) | Value::Bool(_) if name == "bit_length" => {
            Ok(Value::Int(64 - recv.as_int().unwrap_or(0).unsigned_abs().leading_zeros() as i64))
        }
        Value::Float(f) if name == "is_integer" => Ok(Value::Bool(f.fract() == 0.0)),
        Value::Property(p) => {
            let f = arg(i, &a, 0, name)?.clone();
            Ok(Value::Property(Rc::new(match name {
                "setter" => Property { getter: p.getter.clone(), setter: Some(f) },
                _ => Property { getter: f, setter: p.setter.clone() },
            })))
        }
        _ => Err(i.exc("AttributeError", format!("'{}' object has no attribute '{name}'", recv.type_name()))),
    }
}

fn norm_index(i: &Interp, idx: i64, len: usize, what: &str) -> Result<usize, Exc> {
    let j = if idx < 0 { idx + len as i64 } else { idx };
    if j < 0 || j >= len as i64 {
        return Err(i.exc("IndexError", format!("{what} index out of range")));
    }
    Ok(j as usize)
}

fn seq_common(i: &Interp, items: &[Value], name: &str, a: &[Value]) -> NativeResult {
    let x = arg(i, a, 0, name)?;
    match name {
        "count" => {
            let mut n = 0;
            for y in items {
                if i.eq(y, x)? {
                    n += 1;
                }
            }
            Ok(Value::Int(n))
        }
        "index" => {
            for (k, y) in items.iter().enumerate() {
                if i.eq(y, x)? {
                    return Ok(Value::Int(k as i64));
                }
            }
            Err(i.exc("ValueError", format!("{} is not in list", i.repr(x)?)))
        }
        _ => Err(i.exc("AttributeError", format!("object has no attribute '{name}'"))),
    }
}

fn list_method(i: &Interp, recv: &Value, l: &Ref<Vec<Value>>, name: &str, a: Vec<Value>, kw: Kw) -> NativeResult {
    match name {
        "append" => {
            l.borrow_mut().push(arg(i, &a, 0, "append")?.clone());
            Ok(Value::None)
        }
        "extend" => {
            let items = i.collect(arg(i, &a, 0, "extend")?)?;
            l.borrow_mut().extend(items);
            Ok(Value::None)
        }
        "pop" => {
            let len = l.borrow().len();
            if len == 0 {
                return Err(i.exc("IndexError", "pop from empty list"));
            }
            let k = match a.first() {
                Some(v) => norm_index(i, v.as_int().unwrap_or(0), len, "pop")?,
                None => len - 1,
            };
            Ok(l.borrow_mut().remove(k))
        }
        "insert" => {
            let len = l.borrow().len() as i64;
            let idx = arg(i, &a, 0, "insert")?.as_int().unwrap_or(0);
            let k = if idx < 0 { (idx + len).max(0) } else { idx.min(len) } as usize;
            l.borrow_mut().insert(k, arg(i, &a, 1, "insert")?.clone());
            Ok(Value::None)
        }
        "remove" => {
            let x = arg(i, &a, 0, "remove")?;
            let items = l.borrow().clone();
            for (k, y) in items.iter().enumerate() {
                if i.eq(y, x)? {
                    l.borrow_mut().remove(k);
                    return Ok(Value::None);
                }
            }
            Err(i.exc("ValueError", "list.remove(x): x not in list"))
        }
        "sort" => {
            let mut items = l.borrow().clone();
            sort_values(i, &mut items, kwarg(&kw, "key"), kwarg_bool(i, &kw, "reverse")?)?;
            *l.borrow_mut() = items;
            Ok(Value::None)
        }
        "reverse" => {
            l.borrow_mut().reverse();
            Ok(Value::None)
        }
        "clear" => {
            l.borrow_mut().clear();
            Ok(Value::None)
        }
        "copy" => Ok(Value::list(l.borrow().clone())),
        _ => {
            let _ = recv;
            let items = l.borrow().clone();
            seq_common(i, &items, name, &a)
        }
    }
}

fn dict_method(i: &Interp, d: &Ref<DictMap>, name: &str, a: Vec<Value>, kw: Kw) -> NativeResult {
    match name {
        "get" => {
            let k = i.hash_key(arg(i, &a, 0, "get")?)?;
            let found = d.borrow().get(&k).map(|(_, v)| v.clone());
            Ok(found.unwrap_or_else(|| a.get(1).cloned().unwrap_or(Value::None)))
        }
        "keys" => Ok(Value::list(d.borrow().values().map(|(k, _)| k.clone()).collect())),
        "values" => Ok(Value::list(d.borrow().values().map(|(_, v)| v.clone()).collect())),
        "items" => Ok(Value::list(d.borrow().values().map(|(k, v)| Value::tuple(vec![k.clone(), v.clone()])).collect())),
        "pop" => {
            let key = arg(i, &a, 0, "pop")?;
            let k = i.hash_key(key)?;
            let removed = d.borrow_mut().shift_remove(&k);
            match (removed, a.get(1)) {
                (Some((_, v)), _) => Ok(v),
                (None, Some(default)) => Ok(default.clone()),
                (None, None) => Err(Exc::new(i.new_exception(&i.builtin_class("KeyError").expect("builtin"), vec![key.clone()]))),
            }
        }
        "popitem" => {
            let last = d.borrow_mut().pop();
            match last {
                Some((_, (k, v))) => Ok(Value::tuple(vec![k, v])),
                None => Err(i.exc("KeyError", "popitem(): dictionary is empty")),
            }
        }
        "setdefault" => {
            let key = arg(i, &a, 0, "setdefault")?.clone();
            let k = i.hash_key(&key)?;
            let existing = d.borrow().get(&k).map(|(_, v)| v.clone());
            match existing {
                Some(v) => Ok(v),
                None => {
                    let v = a.get(1).cloned().unwrap_or(Value::None);
                    d.borrow_mut().insert(k, (key, v.clone()));
                    Ok(v)
                }
            }
        }
        "update" => {
            let mut pairs: Vec<(Value, Value)> = Vec::new();
            match a.first() {
                Some(Value::Dict(o)) => pairs.extend(o.borrow().values().cloned()),
                Some(v) => {
                    for item in i.collect(v)? {
                        let kv = i.collect(&item)?;
                        if kv.len() == 2 {
                            pairs.push((kv[0].clone(), kv[1].clone()));
                        }
                    }
                }
                None => {}
            }
            pairs.extend(kw.into_iter().map(|(k, v)| (Value::str(k.as_str()), v)));
            for (k, v) in pairs {
                let hk = i.hash_key(&k)?;
                let mut m = d.borrow_mut();
                match m.get_mut(&hk) {
                    Some(slot) => slot.1 = v,
                    None => {
                        m.insert(hk, (k, v));
                    }
                }
            }
            Ok(Value::None)
        }
        "clear" => {
            d.borrow_mut().clear();
            Ok(Value::None)
        }
        "copy" => Ok(Value::Dict(new_ref(d.borrow().clone()))),
        _ => Err(i.exc("AttributeError", format!("'dict' object has no attribute '{name}'"))),
    }
}

fn set_method(i: &Interp, s: &Ref<SetMap>, name: &str, a: Vec<Value>) -> NativeResult {
    let other_keys = |v: &Value| -> Result<SetMap, Exc> {
        let mut m = SetMap::new();
        for x in i.collect(v)? {
            m.insert(i.hash_key(&x)?, x);
        }
        Ok(m)
    };
    match name {
        "add" => {
            let x = arg(i, &a, 0, "add")?.clone();
            let k = i.hash_key(&x)?;
            s.borrow_mut().entry(k).or_insert(x);
            Ok(Value::None)
        }
        "remove" | "discard" => {
            let x = arg(i, &a, 0, name)?;
            let k = i.hash_key(x)?;
            if s.borrow_mut().shift_remove(&k).is_none() && name == "remove" {
                return Err(Exc::new(i.new_exception(&i.builtin_class("KeyError").expect("builtin"), vec![x.clone()])));
            }
            Ok(Value::None)
        }
        "pop" => {
            let first = s.borrow_mut().shift_remove_index(0);
            first.map(|(_, v)| v).ok_or_else(|| i.exc("KeyError", "pop from an empty set"))
        }
        "clear" => {
            s.borrow_mut().clear();
            Ok(Value::None)
        }
        "copy" => Ok(Value::Set(new_ref(s.borrow().clone()))),
        "update" => {
            for v in &a {
                let o = other_keys(v)?;
                s.borrow_mut().extend(o);
            }
            Ok(Value::None)
        }
        "union" | "intersection" | "difference" | "symmetric_difference" => {
            let mut cur = s.borrow().clone();
            for v in &a {
                let o = other_keys(v)?;
                cur = match name {
                    "union" => {
                        cur.extend(o);
                        cur
                    }
                    "intersection" => cur.into_iter().filter(|(k, _)| o.contains_key(k)).collect(),
                    "difference" => cur.into_iter().filter(|(k, _)| !o.contains_key(k)).collect(),
                    _ => {
                        let mut m: SetMap = cur.iter().filter(|(k, _)| !o.contains_key(*k)).map(|(k, v)| (k.clone(), v.clone())).collect();
                        m.extend(o.into_iter().filter(|(k, _)| !cur.contains_key(k)));
                        m
                    }
                };
            }
            Ok(Value::Set(new_ref(cur)))
        }
        "issubset" | "issuperset" | "isdisjoint" => {
            let o = other_keys(arg(i, &a, 0, name)?)?;
            let me = s.borrow();
            Ok(Value::Bool(match name {
                "issubset" => me.keys().all(|k| o.contains_key(k)),
                "issuperset" => o.keys().all(|k| me.contains_key(k)),
                _ => me.keys().all(|k| !o.contains_key(k)),
            }))
        }
        _ => Err(i.exc("AttributeError", format!("'set' object has no attribute '{name}'"))),
    }
}

fn bytes_method(i: &Interp, b: &[u8], name: &str, a: Vec<Value>) -> NativeResult {
    match name {
        "decode" => decode(i, b),
        "hex" => Ok(Value::str(b.iter().map(|x| format!("{x:02x}")).collect::<String>())),
        "count" | "find" | "startswith" | "endswith" => {
            let sub = bytes_of(i, arg(i, &a, 0, name)?)?;
            Ok(match name {
                "startswith" => Value::Bool(b.starts_with(&sub)),
                "endswith" => Value::Bool(b.ends_with(&sub)),
                "find" => Value::Int(b.windows(sub.len().max(1)).position(|w| w == sub.as_slice()).map(|p| p as i64).unwrap_or(-1)),
                _ => Value::Int(b.windows(sub.len().max(1)).filter(|w| *w == sub.as_slice()).count() as i64),
            })
        }
        _ => Err(i.exc("AttributeError", format!("'bytes' object has no attribute '{name}'"))),
    }
}

fn bytearray_method(i: &Interp, b: &Ref<Vec<u8>>, name: &str, a: Vec<Value>) -> NativeResult {
    let byte = |v: &Value| match v.as_int() {
        Some(n) if (0..256).contains(&n) => Ok(n as u8),
        _ => Err(i.exc("ValueError", "byte must be in range(0, 256)")),
    };
    match name {
        "append" => {
            let x = byte(arg(i, &a, 0, "append")?)?;
            b.borrow_mut().push(x);
            Ok(Value::None)
        }
        "extend" => {
            let x = bytes_of(i, arg(i, &a, 0, "extend")?)?;
            b.borrow_mut().extend(x);
            Ok(Value::None)
        }
        "insert" => {
            let len = b.borrow().len() as i64;
            let idx = arg(i, &a, 0, "insert")?.as_int().unwrap_or(0);
            let k = if idx < 0 { (idx + len).max(0) } else { idx.min(len) } as usize;
            let x = byte(arg(i, &a, 1, "insert")?)?;
            b.borrow_mut().insert(k, x);
            Ok(Value::None)
        }
        "pop" => {
            let len = b.borrow().len();
            if len == 0 {
                return Err(i.exc("IndexError", "pop from empty bytearray"));
            }
            let k = match a.first() {
                Some(v) => norm_index(i, v.as_int().unwrap_or(0), len, "pop")?,
                None => len - 1,
            };
            Ok(Value::Int(b.borrow_mut().remove(k) as i64))
        }
        "clear" => {
            b.borrow_mut().clear();
            Ok(Value::None)
        }
        "copy" => Ok(Value::ByteArray(new_ref(b.borrow().clone()))),
        _ => {
            let data = b.borrow().clone();
            bytes_method(i, &data, name, a)
        }
    }
}

fn seek_target(i: &Interp, a: &[Value], pos: usize, len: usize) -> Result<usize, Exc> {
    let off = arg(i, a, 0, "seek")?.as_int().unwrap_or(0);
    let whence = a.get(1).and_then(|w| w.as_int()).unwrap_or(0);
    let base = match whence {
        0 => 0,
        1 => pos as i64,
        2 => len as i64,
        _ => return Err(i.exc("ValueError", "invalid whence")),
    };
    let t = base + off;
    if t < 0 {
        return Err(i.exc("ValueError", format!("negative seek value {t}")));
    }
    Ok(t as usize)
}

fn bytesio_method(i: &Interp, s: &Ref<ByteStream>, name: &str, a: Vec<Value>) -> NativeResult {
    let mut st = s.borrow_mut();
    match name {
        "read" => {
            let n = a.first().and_then(|v| v.as_int()).unwrap_or(-1);
            let start = st.pos.min(st.buf.len());
            let end = if n < 0 { st.buf.len() } else { (start + n as usize).min(st.buf.len()) };
            let out = st.buf[start..end].to_vec();
            st.pos = end;
            Ok(Value::bytes(out))
        }
        "readline" => {
            let start = st.pos.min(st.buf.len());
            let end = st.buf[start..].iter().position(|&c| c == b'\n').map(|p| start + p + 1).unwrap_or(st.buf.len());
            let out = st.buf[start..end].to_vec();
            st.pos = end;
            Ok(Value::bytes(out))
        }
        "write" => {
            drop(st);
            let data = bytes_of(i, arg(i, &a, 0, "write")?)?;
            let mut st = s.borrow_mut();
            let pos = st.pos;
            if st.buf.len() < pos {
                st.buf.resize(pos, 0);
            }
            let end = pos + data.len();
            if st.buf.len() < end {
                st.buf.resize(end, 0);
            }
            st.buf[pos..end].copy_from_slice(&data);
            st.pos = end;
            Ok(Value::Int(data.len() as i64))
        }
        "getvalue" => Ok(Value::bytes(st.buf.clone())),
        "seek" => {
            let t = seek_target(i, &a, st.pos, st.buf.len())?;
            st.pos = t;
            Ok(Value::Int(t as i64))
        }
        "tell" => Ok(Value::Int(st.pos as i64)),
        "truncate" => {
            let n = a.first().and_then(|v| v.as_int()).map(|n| n as usize).unwrap_or(st.pos);
            st.buf.truncate(n);
            Ok(Value::Int(n as i64))
        }
        "readlines" => {
            let start = st.pos.min(st.buf.len());
            let rest = st.buf[start..].to_vec();
            st.pos = st.buf.len();
            Ok(Value::list(rest.split_inclusive(|&c| c == b'\n').map(|l| Value::bytes(l.to_vec())).collect()))
        }
        "close" | "flush" => Ok(Value::None),
        "readable" | "writable" | "seekable" => Ok(Value::Bool(true)),
        _ => Err(i.exc("AttributeError", format!("'BytesIO' object has no attribute '{name}'"))),
    }
}

fn stringio_method(i: &Interp, s: &Ref<TextStream>, name: &str, a: Vec<Value>) -> NativeResult {
    let mut st = s.borrow_mut();
    match name {
        "read" => {
            let n = a.first().and_then(|v| v.as_int()).unwrap_or(-1);
            let start = st.pos.min(st.buf.len());
            let end = if n < 0 { st.buf.len() } else { (start + n as usize).min(st.buf.len()) };
            let out: String = st.buf[start..end].iter().collect();
            st.pos = end;
            Ok(Value::str(out))
        }
        "readline" => {
            let start = st.pos.min(st.buf.len());
            let end = st.buf[start..].iter().position(|&c| c == '\n').map(|p| start + p + 1).unwrap_or(st.buf.len());
            let out: String = st.buf[start..end].iter().collect();
            st.pos = end;
            Ok(Value::str(out))
        }
        "readlines" => {
            let start = st.pos.min(st.buf.len());
            let rest: String = st.buf[start..].iter().collect();
            st.pos = st.buf.len();
            Ok(Value::list(rest.split_inclusive('\n').map(Value::str).collect()))
        }
        "write" => {
            let text: Vec<char> = match arg(i, &a, 0, "write")? {
                Value::Str(t) => t.chars().collect(),
                v => return Err(i.type_error(format!("string argument expected, got '{}'", v.type_name()))),
            };
            let pos = st.pos;
            if st.buf.len() < pos {
                st.buf.resize(pos, '\0');
            }
            let end = pos + text.len();
            if st.buf.len() < end {
                st.buf.resize(end, '\0');
            }
            st.buf[pos..end].copy_from_slice(&text);
            st.pos = end;
            Ok(Value::Int(text.len() as i64))
        }
        "getvalue" => Ok(Value::str(st.buf.iter().collect::<String>())),
        "seek" => {
            let t = seek_target(i, &a, st.pos, st.buf.len())?;
            st.pos = t;
            Ok(Value::Int(t as i64))
        }
        "tell" => Ok(Value::Int(st.pos as i64)),
        "truncate" => {
            let n = a.first().and_then(|v| v.as_int()).map(|n| n as usize).unwrap_or(st.pos);
            st.buf.truncate(n);
            Ok(Value::Int(n as i64))
        }
        "close" | "flush" => Ok(Value::None),
        "readable" | "writable" | "seekable" => Ok(Value::Bool(true)),
        _ => Err(i.exc("AttributeError", format!("'StringIO' object has no attribute '{name}'"))),
    }
}

fn str_method(i: &Interp, s: &Rc<str>, name: &str, a: Vec<Value>, kw: Kw) -> NativeResult {
    let sarg = |k: usize| str_arg(i, &a, k, name);
    let opt_chars = |k: usize| -> Result<Option<Vec<char>>, Exc> {
        match a.get(k) {
            None | Some(Value::None) => Ok(None),
            Some(Value::Str(c)) => Ok(Some(c.chars().collect())),
            Some(v) => Err(i.type_error(format!("{name} arg must be None or str, not {}", v.type_name()))),
        }
    };
    let string = |x: String| Ok(Value::str(x));
    match name {
        "join" => {
            let mut parts = Vec::new();
            for x in i.collect(arg(i, &a, 0, "join")?)? {
                match x {
                    Value::Str(p) => parts.push(p.to_string()),
                    v => return Err(i.type_error(format!("sequence item {}: expected str instance, {} found", parts.len(), v.type_name()))),
                }
            }
            string(parts.join(s))
        }
        "split" | "rsplit" => {
            let sep = match a.first().cloned().or_else(|| kwarg(&kw, "sep")) {
                None | Some(Value::None) => None,
                Some(Value::Str(x)) => Some(x.to_string()),
                Some(v) => return Err(i.type_error(format!("must be str or None, not {}", v.type_name()))),
            };
            let maxsplit = a.get(1).cloned().or_else(|| kwarg(&kw, "maxsplit")).and_then(|v| v.as_int()).unwrap_or(-1);
            let parts: Vec<String> = match sep {
                None => {
                    let words: Vec<&str> = s.split_whitespace().collect();
                    if maxsplit < 0 || words.len() as i64 <= maxsplit {
                        words.into_iter().map(String::from).collect()
                    } else if name == "split" {
                        let mut out: Vec<String> = words[..maxsplit as usize].iter().map(|w| w.to_string()).collect();
                        let mut rest = s.trim_start();
                        for _ in 0..maxsplit {
                            let w = rest.split_whitespace().next().unwrap_or("");
                            rest = rest[rest.find(w).unwrap_or(0) + w.len()..].trim_start();
                        }
                        out.push(rest.to_string());
                        out
                    } else {
                        let keep = words.len() - maxsplit as usize;
                        let mut rest = s.trim_end();
                        for _ in 0..maxsplit {
                            let w = rest.split_whitespace().last().unwrap_or("");
                            rest = rest[..rest.rfind(w).unwrap_or(0)].trim_end();
                        }
                        let mut out = vec![rest.to_string()];
                        out.extend(words[keep..].iter().map(|w| w.to_string()));
                        out
                    }
                }
                Some(sep) => {
                    if sep.is_empty() {
                        return Err(i.exc("ValueError", "empty separator"));
                    }
                    if maxsplit < 0 {
                        s.split(sep.as_str()).map(String::from).collect()
                    } else if name == "split" {
                        s.splitn(maxsplit as usize + 1, sep.as_str()).map(String::from).collect()
                    } else {
                        let mut v: Vec<String> = s.rsplitn(maxsplit as usize + 1, sep.as_str()).map(String::from).collect();
                        v.reverse();
                        v
                    }
                }
            };
            Ok(Value::list(parts.into_iter().map(Value::str).collect()))
        }
        "strip" | "lstrip" | "rstrip" => {
            let chars = opt_chars(0)?;
            let pred = |c: char| match &chars {
                Some(cs) => cs.contains(&c),
                None => c.is_whitespace(),
            };
            string(match name {
                "strip" => s.trim_matches(pred).to_string(),
                "lstrip" => s.trim_start_matches(pred).to_string(),
                _ => s.trim_end_matches(pred).to_string(),
            })
        }
        "startswith" | "endswith" => {
            let prefixes: Vec<String> = match arg(i, &a, 0, name)? {
                Value::Str(p) => vec![p.to_string()],
                Value::Tuple(t) => t.iter().filter_map(|x| x.as_str().map(str::to_string)).collect(),
                v => return Err(i.type_error(format!("{name} first arg must be str or a tuple of str, not {}", v.type_name()))),
            };
            let chars: Vec<char> = s.chars().collect();
            let (lo, hi) = slice_range(&a, 1, chars.len());
            let sub: String = chars[lo..hi.max(lo)].iter().collect();
            Ok(Value::Bool(prefixes.iter().any(|p| if name == "startswith" { sub.starts_with(p.as_str()) } else { sub.ends_with(p.as_str()) })))
        }
        "find" | "rfind" | "index" | "rindex" => {
            let sub = sarg(0)?;
            let chars: Vec<char> = s.chars().collect();
            let (lo, hi) = slice_range(&a, 1, chars.len());
            let hay: String = chars[lo..hi.max(lo)].iter().collect();
            let found = if name.starts_with('r') { hay.rfind(sub.as_str()) } else { hay.find(sub.as_str()) };
            match found {
                Some(byte) => Ok(Value::Int((lo + hay[..byte].chars().count()) as i64)),
                None if name.ends_with("find") => Ok(Value::Int(-1)),
                None => Err(i.exc("ValueError", "substring not found")),
            }
        }
        "count" => {
            let sub = sarg(0)?;
            if sub.is_empty() {
                return Ok(Value::Int(s.chars().count() as i64 + 1));
            }
            Ok(Value::Int(s.matches(sub.as_str()).count() as i64))
        }
        "replace" => {
            let (old, new) = (sarg(0)?, sarg(1)?);
            let count = a.get(2).and_then(|v| v.as_int()).unwrap_or(-1);
            string(if count < 0 { s.replace(old.as_str(), &new) } else { s.replacen(old.as_str(), &new, count as usize) })
        }
        "upper" => string(s.to_uppercase()),
        "lower" | "casefold" => string(s.to_lowercase()),
        "swapcase" => string(
            s.chars()
                .flat_map(|c| if c.is_uppercase() { c.to_lowercase().collect::<Vec<_>>() } else { c.to_uppercase().collect::<Vec<_>>() })
                .collect(),
        ),
        "capitalize" => {
            let mut cs = s.chars();
            string(match cs.next() {
                Some(c) => c.to_uppercase().chain(cs.flat_map(char::to_lowercase)).collect(),
                None => String::new(),
            })
        }
        "title" => {
            let mut out = String::new();
            let mut prev_alpha = false;
            for c in s.chars() {
                if prev_alpha {
                    out.extend(c.to_lowercase());
                } else {
                    out.extend(c.to_uppercase());
                }
                prev_alpha = c.is_alphabetic();
            }
            string(out)
        }
        "isdigit" | "isnumeric" | "isdecimal" => Ok(Value::Bool(!s.is_empty() && s.chars().all(|c| c.is_ascii_digit() || c.is_numeric()))),
        "isalpha" => Ok(Value::Bool(!s.is_empty() && s.chars().all(char::is_alphabetic))),
        "isalnum" => Ok(Value::Bool(!s.is_empty() && s.chars().all(char::is_alphanumeric))),
        "isspace" => Ok(Value::Bool(!s.is_empty() && s.chars().all(char::is_whitespace))),
        "isupper" => Ok(Value::Bool(s.chars().any(char::is_alphabetic) && !s.chars().any(char::is_lowercase))),
        "islower" => Ok(Value::Bool(s.chars().any(char::is_alphabetic) && !s.chars().any(char::is_uppercase))),
        "encode" => Ok(Value::bytes(s.as_bytes().to_vec())),
        "splitlines" => Ok(Value::list(s.lines().map(Value::str).collect())),
        "zfill" => {
            let w = arg(i, &a, 0, "zfill")?.as_int().unwrap_or(0).max(0) as usize;
            let n = s.chars().count();
            if n >= w {
                return string(s.to_string());
            }
            let (sign, body) = match s.chars().next() {
                Some(c @ ('+' | '-')) => (c.to_string(), &s[1..]),
                _ => (String::new(), &s[..]),
            };
            string(format!("{sign}{}{body}", "0".repeat(w - n)))
        }
        "center" | "ljust" | "rjust" => {
            let w = arg(i, &a, 0, name)?.as_int().unwrap_or(0).max(0) as usize;
            let fill = a.get(1).and_then(|f| f.as_str().and_then(|x| x.chars().next())).unwrap_or(' ');
            let n = s.chars().count();
            if n >= w {
                return string(s.to_string());
            }
            let pad = w - n;
            let (l, r) = match name {
                "ljust" => (0, pad),
                "rjust" => (pad, 0),
                _ => {
                    let l = pad / 2 + (pad & w & 1);
                    (l, pad - l)
                }
            };
            string(format!("{}{s}{}", fill.to_string().repeat(l), fill.to_string().repeat(r)))
        }
        "partition" | "rpartition" => {
            let sep = sarg(0)?;
            let found = if name == "partition" { s.find(sep.as_str()) } else { s.rfind(sep.as_str()) };
            Ok(Value::tuple(match found {
                Some(p) => vec![Value::str(&s[..p]), Value::str(sep.as_str()), Value::str(&s[p + sep.len()..])],
                None if name == "partition" => vec![Value::str(s.clone()), Value::str(""), Value::str("")],
                None => vec![Value::str(""), Value::str(""), Value::str(s.clone())],
            }))
        }
        "removeprefix" => {
            let p = sarg(0)?;
            string(s.strip_prefix(p.as_str()).unwrap_or(s).to_string())
        }
        "removesuffix" => {
            let p = sarg(0)?;
            string(s.strip_suffix(p.as_str()).unwrap_or(s).to_string())
        }
        "format" => str_format(i, s, &a, &kw).map(Value::str),
        _ => Err(i.exc("AttributeError", format!("'str' object has no attribute '{name}'"))),
    }
}

fn slice_range(a: &[Value], from: usize, len: usize) -> (usize, usize) {
    let lo = a.get(from).and_then(|v| v.as_int());
    let hi = a.get(from + 1).and_then(|v| v.as_int());
    let idx = slice_indices(len, lo, hi, None);
    match (idx.first(), idx.last()) {
        (Some(&f), Some(&l)) => (f, l + 1),
        _ => {
            let start = lo.map(|x| if x < 0 { (x + len as i64).max(0) } else { x.min(len as i64) }).unwrap_or(0) as usize;
            (start, start)
        }
    }
}

/// `str.format` with positional, indexed and keyword fields.
pub fn str_format(i: &Interp, fmt: &str, a: &[Value], kw: &Kw) -> Result<String, Exc> {
    let chars: Vec<char> = fmt.chars().collect();
    let mut out = String::new();
    let mut auto = 0usize;
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        if c == '{' {
            if chars.get(k + 1) == Some(&'{') {
                out.push('{');
                k += 2;
                continue;
            }
            let end = (k..chars.len()).find(|&j| chars[j] == '}').ok_or_else(|| i.exc("ValueError", "Single '{' encountered in format string"))?;
            let field: String = chars[k + 1..end].iter().collect();
            let (name_conv, spec) = match field.split_once(':') {
                Some((n, s)) => (n.to_string(), s.to_string()),
                None => (field.clone(), String::new()),
            };
            let (fname, conv) = match name_conv.split_once('!') {
                Some((n, c)) => (n.to_string(), c.chars().next()),
                None => (name_conv, None),
            };
            let (base, attrs) = match fname.split_once('.') {
                Some((b, rest)) => (b.to_string(), rest.split('.').map(str::to_string).collect::<Vec<_>>()),
                None => (fname, Vec::new()),
            };
            let mut v = if base.is_empty() {
                let v = a.get(auto).cloned().ok_or_else(|| i.exc("IndexError", "Replacement index out of range"))?;
                auto += 1;
                v
            } else if let Ok(n) = base.parse::<usize>() {
                a.get(n).cloned().ok_or_else(|| i.exc("IndexError", "Replacement index out of range"))?
            } else {
                kwarg(kw, &base).ok_or_else(|| i.exc("KeyError", base.clone()))?
            };
            for at in attrs {
                v = i.getattr(&v, &at)?;
            }
            if conv == Some('r') {
                v = Value::str(i.repr(&v)?);
            }
            out.push_str(&format_spec(i, &v, &spec)?);
            k = end + 1;
        } else if c == '}' {
            out.push('}');
            k += if chars.get(k + 1) == Some(&'}') { 2 } else { 1 };
        } else {
            out.push(c);
            k += 1;
        }
    }
    Ok(out)
}

/// Applies a format-spec mini-language string to a value.
pub fn format_spec(i: &Interp, v: &Value, spec: &str) -> Result<String, Exc> {
    if spec.is_empty() {
        return i.to_str(v);
    }
    if let Value::Instance(_) = v {
        if let Ok(m) = i.getattr(v, "__format__") {
            let r = i.call(&m, vec![Value::str(spec)], vec![])?;
            return i.to_str(&r);
        }
    }
    let cs: Vec<char> = spec.chars().collect();
    let mut p = 0;
    let mut fill = ' ';
    let mut align: Option<char> = None;
    if cs.len() >= 2 && "<>^=".contains(cs[1]) {
        fill = cs[0];
        align = Some(cs[1]);
        p = 2;
    } else if !cs.is_empty() && "<>^=".contains(cs[0]) {
        align = Some(cs[0]);
        p = 1;
    }
    let mut sign = '-';
    if p < cs.len() && "+- ".contains(cs[p]) {
        sign = cs[p];
        p += 1;
    }
    let mut alt = false;
    if p < cs.len() && cs[p] == '#' {
        alt = true;
        p += 1;
    }
    if p < cs.len() && cs[p] == '0' {
        if align.is_none() {
            fill = '0';
            align = Some('=');
        }
        p += 1;
    }
    let mut width = 0usize;
    while p < cs.len() && cs[p].is_ascii_digit() {
        width = width * 10 + cs[p].to_digit(10).unwrap_or(0) as usize;
        p += 1;
    }
    let mut grouping = None;
    if p < cs.len() && (cs[p] == ',' || cs[p] == '_') {
        grouping = Some(cs[p]);
        p += 1;
    }
    let mut precision: Option<usize> = None;
    if p < cs.len() && cs[p] == '.' {
        p += 1;
        let mut n = 0;
        while p < cs.len() && cs[p].is_ascii_digit() {
            n = n * 10 + cs[p].to_digit(10).unwrap_or(0) as usize;
            p += 1;
        }
        precision = Some(n);
    }
    let ty = cs.get(p).copied();
    let numeric = matches!(v, Value::Int(_) | Value::Float(_) | Value::Bool(_));
    let (neg, body) = match (ty, v) {
        (Some('s') | None, Value::Str(s)) => {
            let s: String = match precision {
                Some(n) => s.chars().take(n).collect(),
                None => s.to_string(),
            };
            (false, s)
        }
        (Some('d') | Some('n') | None, Value::Int(_) | Value::Bool(_)) if ty.is_some() || precision.is_none() => {
            let n = v.as_int().unwrap_or(0);
            (n < 0, group(&n.unsigned_abs().to_string(), grouping))
        }
        (Some(t @ ('x' | 'X' | 'o' | 'b')), _) if v.as_int().is_some() => {
            let n = v.as_int().unwrap_or(0);
            let m = n.unsigned_abs();
            let (digits, prefix) = match t {
                'x' => (format!("{m:x}"), "0x"),
                'X' => (format!("{m:X}"), "0X"),
                'o' => (format!("{m:o}"), "0o"),
                _ => (format!("{m:b}"), "0b"),
            };
            (n < 0, if alt { format!("{prefix}{digits}") } else { digits })
        }
        (Some('c'), _) if v.as_int().is_some() => (false, char::from_u32(v.as_int().unwrap_or(0) as u32).unwrap_or('?').to_string()),
        (Some(t @ ('f' | 'F' | 'e' | 'E' | 'g' | 'G' | '%')), _) | (Some(t @ 'n'), Value::Float(_)) if numeric => {
            let x = to_f64(v).unwrap_or(0.0);
            let prec = precision.unwrap_or(6);
            let body = match t {
                'f' | 'F' => format!("{:.*}", prec, x.abs()),
                '%' => format!("{:.*}%", prec, x.abs() * 100.0),
                'e' | 'E' => {
                    let s = exp_format(x.abs(), prec);
                    if t == 'E' {
                        s.to_uppercase()
                    } else {
                        s
                    }
                }
                _ => general_format(x.abs(), if prec == 0 { 1 } else { prec }),
            };
            let body = if let Some(g) = grouping {
                let (int_part, rest) = body.split_at(body.find('.').unwrap_or(body.len()));
                format!("{}{}", group(int_part, Some(g)), rest)
            } else {
                body
            };
            (x.is_sign_negative() && x != 0.0, body)
        }
        (None, Value::Float(x)) => {
            let body = match precision {
                Some(p) => general_format(x.abs(), p.max(1)),
                None => float_repr(x.abs()),
            };
            (x.is_sign_negative() && *x != 0.0, body)
        }
        (None, _) => {
            let s = i.to_str(v)?;
            let s = match precision {
                Some(n) => s.chars().take(n).collect(),
                None => s,
            };
            (false, s)
        }
        _ => return Err(i.exc("ValueError", format!("Unknown format code '{}' for object of type '{}'", ty.unwrap_or(' '), v.type_name()))),
    };
    let sign_str = if neg {
        "-"
    } else if numeric && sign == '+' {
        "+"
    } else if numeric && sign == ' ' {
        " "
    } else {
        ""
    };
    let content_len = sign_str.chars().count() + body.chars().count();
    if content_len >= width {
        return Ok(format!("{sign_str}{body}"));
    }
    let pad = width - content_len;
    let fills = |n: usize| fill.to_string().repeat(n);
    let default_align = if numeric { '>' } else { '<' };
    Ok(match align.unwrap_or(default_align) {
        '<' => format!("{sign_str}{body}{}", fills(pad)),
        '^' => format!("{}{sign_str}{body}{}", fills(pad / 2), fills(pad - pad / 2)),
        '=' => format!("{sign_str}{}{body}", fills(pad)),
        _ => format!("{}{sign_str}{body}", fills(pad)),
    })
}

fn group(digits: &str, sep: Option<char>) -> String {
    let Some(sep) = sep else {
        return digits.to_string();
    };
    let cs: Vec<char> = digits.chars().collect();
    let mut out = String::new();
    for (k, c) in cs.iter().enumerate() {
        if k > 0 && (cs.len() - k).is_multiple_of(3) {
            out.push(sep);
        }
        out.push(*c);
    }
    out
}

fn exp_format(x: f64, prec: usize) -> String {
    let s = format!("{:.*e}", prec, x);
    let (mant, exp) = s.split_once('e').unwrap_or((&s, "0"));
    let e: i32 = exp.parse().unwrap_or(0);
    format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

fn general_format(x: f64, prec: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if exp < -4 || exp >= prec as i32 {
        let s = exp_format(x, prec.saturating_sub(1));
        let (mant, e) = s.split_once('e').unwrap_or((&s, ""));
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{e}")
    } else {
        let decimals = (prec as i32 - 1 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    }
}

/// `fmt % args` with the common conversion types.
pub fn percent_format(i: &Interp, fmt: &str, args: &Value) -> Result<String, Exc> {
    let items = match args {
        Value::Tuple(t) => t.as_ref().clone(),
        v => vec![v.clone()],
    };
    let mut it = items.into_iter();
    let cs: Vec<char> = fmt.chars().collect();
    let mut out = String::new();
    let mut k = 0;
    while k < cs.len() {
        if cs[k] != '%' {
            out.push(cs[k]);
            k += 1;
            continue;
        }
        k += 1;
        let mut flags = String::new();
        while k < cs.len() && "-+ 0#".contains(cs[k]) {
            flags.push(cs[k]);
            k += 1;
        }
        let mut width = String::new();
        while k < cs.len() && cs[k].is_ascii_digit() {
            width.push(cs[k]);
            k += 1;
        }
        let mut prec = String::new();
        if k < cs.len() && cs[k] == '.' {
            k += 1;
            while k < cs.len() && cs[k].is_ascii_digit() {
                prec.push(cs[k]);
                k += 1;
            }
            if prec.is_empty() {
                prec.push('0');
            }
        }
        let Some(&ty) = cs.get(k) else {
            return Err(i.exc("ValueError", "incomplete format"));
        };
        k += 1;
        if ty == '%' {
            out.push('%');
            continue;
        }
        let v = it.next().ok_or_else(|| i.type_error("not enough arguments for format string"))?;
        let align = if flags.contains('-') {
            "<"
        } else if flags.contains('0') && ty != 's' && ty != 'r' {
            "0"
        } else {
            ">"
        };
        let sign = if flags.contains('+') {
            "+"
        } else if flags.contains(' ') {
            " "
        } else {
            ""
        };
        let precs = if prec.is_empty() { String::new() } else { format!(".{prec}") };
        let piece = match ty {
            's' => {
                let s = Value::str(i.to_str(&v)?);
                format_spec(i, &s, &format!("{align}{width}{precs}"))?
            }
            'r' => {
                let s = Value::str(i.repr(&v)?);
                format_spec(i, &s, &format!("{align}{width}{precs}"))?
            }
            'd' | 'i' | 'u' => {
                let n = match &v {
                    Value::Float(f) => Value::Int(f.trunc() as i64),
                    other => other.clone(),
                };
                format_spec(i, &n, &format!("{align}{sign}{width}d"))?
            }
            'f' | 'F' | 'e' | 'E' | 'g' | 'G' | 'x' | 'X' | 'o' | 'c' => {
                format_spec(i, &v, &format!("{align}{sign}{}{width}{precs}{ty}", if flags.contains('#') { "#" } else { "" }))?
            }
            other => return Err(i.exc("ValueError", format!("unsupported format character '{other}'"))),
        };
        out.push_str(&piece);
    }
    if it.next().is_some() {
        return Err(i.type_error("not all arguments converted during string formatting"));
    }
    Ok(out)
}
