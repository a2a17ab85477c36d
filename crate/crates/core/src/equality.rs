//! Deep semantic comparison of an expected (reconstructed) value with the
//! actual value a translated fragment produced.
//!
//! Values fall into comparison groups: numbers under tolerance, sequences
//! element-wise, sets and mapping keys by bipartite matching, streams by
//! buffer and cursor, iterators by remaining items, enums by constant name,
//! exceptions by class name and message, and other objects by class name and
//! attribute map. Cycles are handled coinductively: a pair already under
//! comparison is assumed equal, and assumptions made inside a failed branch
//! are rolled back.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use xlv_runtime::value::exception_message;
use xlv_runtime::Value;

/// Tolerances and recursion bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EqualityConfig {
    pub float_rel_tol: f64,
    pub float_abs_tol: f64,
    pub duration_abs_tol_seconds: f64,
    pub max_depth: usize,
}

impl Default for EqualityConfig {
    fn default() -> Self {
        Self { float_rel_tol: 1e-9, float_abs_tol: 1e-12, duration_abs_tol_seconds: 1e-6, max_depth: 200 }
    }
}

impl EqualityConfig {
    /// Rejects negative tolerances and a zero depth bound.
    pub fn validate(&self) -> Result<(), String> {
        let tols = [self.float_rel_tol, self.float_abs_tol, self.duration_abs_tol_seconds];
        if tols.iter().any(|t| t.is_nan() || *t < 0.0) {
            return Err("tolerances must be non-negative".into());
        }
        if self.max_depth == 0 {
            return Err("max_depth must be at least 1".into());
        }
        Ok(())
    }
}

/// Raised when nesting exceeds `max_depth` without closing a cycle.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("comparison exceeded depth {max_depth} at {path}")]
pub struct DepthExceededError {
    pub max_depth: usize,
    pub path: String,
}

/// Whether two floats agree: NaN equals NaN, infinities must match exactly,
/// otherwise `|a-b| <= max(rel * max(|a|, |b|), abs)`.
pub fn floats_close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    if a == b {
        return true;
    }
    if a.is_infinite() || b.is_infinite() {
        return false;
    }
    (a - b).abs() <= (rel * a.abs().max(b.abs())).max(abs)
}

/// Deep semantic equality of `expected` and `actual`.
pub fn semantic_equal(expected: &Value, actual: &Value, cfg: &EqualityConfig) -> Result<bool, DepthExceededError> {
    Comparator::new(cfg).run(expected, actual).map(|m| m.is_none())
}

/// Like [`semantic_equal`] but returns the path of the first mismatch.
pub fn first_mismatch(expected: &Value, actual: &Value, cfg: &EqualityConfig) -> Result<Option<String>, DepthExceededError> {
    Comparator::new(cfg).run(expected, actual)
}

struct Comparator<'a> {
    cfg: &'a EqualityConfig,
    visited: HashSet<(usize, usize)>,
    undo: Vec<(usize, usize)>,
    mismatch: Option<String>,
}

impl<'a> Comparator<'a> {
    fn new(cfg: &'a EqualityConfig) -> Self {
        Self { cfg, visited: HashSet::new(), undo: Vec::new(), mismatch: None }
    }

    fn run(mut self, e: &Value, a: &Value) -> Result<Option<String>, DepthExceededError> {
        if self.eq(e, a, "$", 0)? {
            Ok(None)
        } else {
            Ok(Some(self.mismatch.unwrap_or_else(|| "$".into())))
        }
    }

    fn fail(&mut self, path: &str, why: impl Into<String>) -> bool {
        if self.mismatch.is_none() {
            self.mismatch = Some(format!("{path}: {}", why.into()));
        }
        false
    }

    fn eq(&mut self, e: &Value, a: &Value, path: &str, depth: usize) -> Result<bool, DepthExceededError> {
        let key = match (e.identity(), a.identity()) {
            (Some(x), Some(y)) => Some((x, y)),
            _ => None,
        };
        if let Some(k) = key {
            if self.visited.contains(&k) {
                return Ok(true);
            }
        }
        if depth >= self.cfg.max_depth {
            return Err(DepthExceededError { max_depth: self.cfg.max_depth, path: path.to_string() });
        }
        let mark = self.undo.len();
        if let Some(k) = key {
            self.visited.insert(k);
            self.undo.push(k);
        }
        let ok = self.eq_inner(e, a, path, depth + 1)?;
        if !ok {
            for k in self.undo.drain(mark..) {
                self.visited.remove(&k);
            }
        }
        Ok(ok)
    }

    fn eq_inner(&mut self, e: &Value, a: &Value, path: &str, depth: usize) -> Result<bool, DepthExceededError> {
        let cfg = *self.cfg;
        Ok(match (e, a) {
            (Value::None, Value::None) => true,
            (Value::Bool(x), Value::Bool(y)) => x == y || self.fail(path, format!("{x} != {y}")),
            (Value::Int(x), Value::Int(y)) => x == y || self.fail(path, format!("{x} != {y}")),
            (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => {
                let (x, y) = (num(e), num(a));
                floats_close(x, y, cfg.float_rel_tol, cfg.float_abs_tol) || self.fail(path, format!("{x} != {y}"))
            }
            (Value::Str(x), Value::Str(y)) => x == y || string_form_equal(x, y) || self.fail(path, format!("{:?} != {:?}", x, y)),
            (Value::Bytes(_) | Value::ByteArray(_), Value::Bytes(_) | Value::ByteArray(_)) => {
                bytes(e) == bytes(a) || self.fail(path, "byte contents differ")
            }
            (Value::Timedelta(x), Value::Timedelta(y)) => {
                let diff = (*x as f64 - *y as f64).abs() / 1e6;
                diff <= cfg.duration_abs_tol_seconds || self.fail(path, format!("durations differ by {diff}s"))
            }
            (Value::List(_) | Value::Tuple(_), Value::List(_) | Value::Tuple(_)) => {
                let (xs, ys) = (e.seq_items().unwrap_or_default(), a.seq_items().unwrap_or_default());
                self.sequences(&xs, &ys, path, depth)?
            }
            (Value::Iter(x), Value::Iter(y)) => {
                let (xs, ys) = (x.borrow().remaining(), y.borrow().remaining());
                self.sequences(&xs, &ys, &format!("{path}<remaining>"), depth)?
            }
            (Value::Set(x), Value::Set(y)) => {
                let xs: Vec<Value> = x.borrow().values().cloned().collect();
                let ys: Vec<Value> = y.borrow().values().cloned().collect();
                if xs.len() != ys.len() {
                    return Ok(self.fail(path, format!("set sizes {} != {}", xs.len(), ys.len())));
                }
                let pairs: Vec<(Value, Option<Value>)> = xs.into_iter().map(|v| (v, None)).collect();
                let other: Vec<(Value, Option<Value>)> = ys.into_iter().map(|v| (v, None)).collect();
                self.matching(&pairs, &other, depth)? || self.fail(path, "set elements differ")
            }
            (Value::Dict(x), Value::Dict(y)) => {
                let xs: Vec<(Value, Option<Value>)> = x.borrow().values().map(|(k, v)| (k.clone(), Some(v.clone()))).collect();
                let ys: Vec<(Value, Option<Value>)> = y.borrow().values().map(|(k, v)| (k.clone(), Some(v.clone()))).collect();
                if xs.len() != ys.len() {
                    return Ok(self.fail(path, format!("mapping sizes {} != {}", xs.len(), ys.len())));
                }
                self.dict(&xs, &ys, path, depth)?
            }
            (Value::BytesIO(x), Value::BytesIO(y)) => {
                let (x, y) = (x.borrow(), y.borrow());
                if x.buf != y.buf {
                    self.fail(path, "stream buffers differ")
                } else {
                    x.pos == y.pos || self.fail(path, format!("stream positions {} != {}", x.pos, y.pos))
                }
            }
            (Value::StringIO(x), Value::StringIO(y)) => {
                let (x, y) = (x.borrow(), y.borrow());
                if x.buf != y.buf {
                    let (l, r): (String, String) = (x.buf.iter().collect(), y.buf.iter().collect());
                    self.fail(path, format!("stream buffers {l:?} != {r:?}"))
                } else {
                    x.pos == y.pos || self.fail(path, format!("stream positions {} != {}", x.pos, y.pos))
                }
            }
            (Value::Instance(_), Value::Instance(_)) => self.instances(e, a, path, depth)?,
            _ if e.is(a) => true,
            (Value::Class(x), Value::Class(y)) => x.qualname == y.qualname || self.fail(path, "classes differ"),
            (Value::Type(x), Value::Type(y)) => x == y || self.fail(path, "types differ"),
            _ => self.fail(path, format!("{} vs {}", e.type_name(), a.type_name())),
        })
    }

    fn sequences(&mut self, xs: &[Value], ys: &[Value], path: &str, depth: usize) -> Result<bool, DepthExceededError> {
        if xs.len() != ys.len() {
            return Ok(self.fail(path, format!("lengths {} != {}", xs.len(), ys.len())));
        }
        for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
            if !self.eq(x, y, &format!("{path}[{i}]"), depth)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Probes a candidate pair without leaking its mismatch message.
    fn probe(&mut self, x: &Value, y: &Value, depth: usize) -> Result<bool, DepthExceededError> {
        let saved = self.mismatch.take();
        let ok = self.eq(x, y, "", depth)?;
        self.mismatch = saved;
        Ok(ok)
    }

    /// Perfect bipartite matching between keys (and values when present).
    fn matching(&mut self, xs: &[(Value, Option<Value>)], ys: &[(Value, Option<Value>)], depth: usize) -> Result<bool, DepthExceededError> {
        let n = xs.len();
        let mut adj = vec![Vec::new(); n];
        for (i, (xk, xv)) in xs.iter().enumerate() {
            for (j, (yk, yv)) in ys.iter().enumerate() {
                let mut ok = self.probe(xk, yk, depth)?;
                if ok {
                    if let (Some(a), Some(b)) = (xv, yv) {
                        ok = self.probe(a, b, depth)?;
                    }
                }
                if ok {
                    adj[i].push(j);
                }
            }
            if adj[i].is_empty() {
                return Ok(false);
            }
        }
        let mut owner: Vec<Option<usize>> = vec![None; ys.len()];
        for i in 0..n {
            let mut seen = vec![false; ys.len()];
            if !augment(i, &adj, &mut owner, &mut seen) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn dict(&mut self, xs: &[(Value, Option<Value>)], ys: &[(Value, Option<Value>)], path: &str, depth: usize) -> Result<bool, DepthExceededError> {
        // Fast path: keys pair up by exact key equality, giving precise paths.
        let mut paired = Vec::new();
        for (xk, xv) in xs {
            let found = ys.iter().find(|(yk, _)| same_key(xk, yk));
            match found {
                Some((_, yv)) => paired.push((xk, xv, yv)),
                None => break,
            }
        }
        if paired.len() == xs.len() {
            for (k, xv, yv) in paired {
                let p = format!("{path}[{}]", xlv_runtime::value::repr(k));
                if !self.eq(xv.as_ref().expect("dict values"), yv.as_ref().expect("dict values"), &p, depth)? {
                    return Ok(false);
                }
            }
            return Ok(true);
        }
        Ok(self.matching(xs, ys, depth)? || self.fail(path, "mapping keys differ"))
    }

    fn instances(&mut self, e: &Value, a: &Value, path: &str, depth: usize) -> Result<bool, DepthExceededError> {
        let (ec, ac) = (e.instance_class().expect("instance"), a.instance_class().expect("instance"));
        let (en, an) = (e.instance_attr("_name_"), a.instance_attr("_name_"));
        if ec.is_enum() || ac.is_enum() || (en.is_some() && an.is_some() && e.instance_attr("_value_").is_some()) {
            return Ok(match (en, an) {
                (Some(Value::Str(x)), Some(Value::Str(y))) => x == y || self.fail(path, format!("enum {x} != {y}")),
                _ => self.fail(path, "enum constant vs non-enum"),
            });
        }
        if ec.is_exception() || ac.is_exception() {
            if ec.name != ac.name {
                return Ok(self.fail(path, format!("exception {} != {}", ec.name, ac.name)));
            }
            let (em, am) = (exception_message(e), exception_message(a));
            if em != am {
                return Ok(self.fail(path, format!("exception message {em:?} != {am:?}")));
            }
            return self.attributes(e, a, path, depth, true);
        }
        if ec.name != ac.name {
            return Ok(self.fail(path, format!("class {} != {}", ec.name, ac.name)));
        }
        self.attributes(e, a, path, depth, false)
    }

    fn attributes(&mut self, e: &Value, a: &Value, path: &str, depth: usize, skip_args: bool) -> Result<bool, DepthExceededError> {
        let (Value::Instance(ei), Value::Instance(ai)) = (e, a) else { unreachable!() };
        let ed: Vec<(String, Value)> = ei.dict.borrow().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let ad: Vec<(String, Value)> = ai.dict.borrow().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let keep = |k: &String| !(skip_args && k == "args");
        for (k, _) in ad.iter().filter(|(k, _)| keep(k)) {
            if !ed.iter().any(|(x, _)| x == k) {
                return Ok(self.fail(&format!("{path}.{k}"), "unexpected attribute"));
            }
        }
        for (k, ev) in ed.iter().filter(|(k, _)| keep(k)) {
            let Some((_, av)) = ad.iter().find(|(x, _)| x == k) else {
                return Ok(self.fail(&format!("{path}.{k}"), "missing attribute"));
            };
            if !self.eq(ev, av, &format!("{path}.{k}"), depth)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn augment(i: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for &j in &adj[i] {
        if seen[j] {
            continue;
        }
        seen[j] = true;
        if owner[j].is_none() || augment(owner[j].expect("checked"), adj, owner, seen) {
            owner[j] = Some(i);
            return true;
        }
    }
    false
}

fn same_key(x: &Value, y: &Value) -> bool {
    match (x, y) {
        (Value::Str(a), Value::Str(b)) => a == b,
        (Value::Int(a), Value::Int(b)) => a == b,
        (Value::Bool(a), Value::Bool(b)) => a == b,
        (Value::None, Value::None) => true,
        _ => false,
    }
}

fn num(v: &Value) -> f64 {
    match v {
        Value::Int(i) => *i as f64,
        Value::Float(f) => *f,
        _ => f64::NAN,
    }
}

fn bytes(v: &Value) -> Vec<u8> {
    match v {
        Value::Bytes(b) => b.to_vec(),
        Value::ByteArray(b) => b.borrow().clone(),
        _ => Vec::new(),
    }
}

// ---------------------------------------------------------------------------
// String renderings of containers

/// Compares two strings that may be renderings of mappings in either the
/// source style `{k=v, ...}` or the target style `{'k': v, ...}`. Mapping
/// renderings are compared as key/value multisets; anything else, including
/// unparseable mapping-looking text, compares verbatim.
pub fn string_form_equal(expected: &str, actual: &str) -> bool {
    if expected == actual {
        return true;
    }
    let (e, a) = (expected.trim(), actual.trim());
    if !(e.starts_with('{') && a.starts_with('{')) {
        return false;
    }
    match (parse_rendering(e), parse_rendering(a)) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    }
}

/// Normalized form of a rendered value.
fn parse_rendering(s: &str) -> Option<String> {
    let mut p = RenderParser { chars: s.chars().collect(), pos: 0 };
    let out = p.value(0)?;
    p.skip_ws();
    (p.pos == p.chars.len()).then_some(out)
}

struct RenderParser {
    chars: Vec<char>,
    pos: usize,
}

impl RenderParser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn value(&mut self, depth: usize) -> Option<String> {
        if depth > 32 {
            return None;
        }
        self.skip_ws();
        match self.peek()? {
            '{' => self.map(depth),
            '[' => {
                self.pos += 1;
                let mut items = Vec::new();
                self.skip_ws();
                if self.peek() == Some(']') {
                    self.pos += 1;
                    return Some("[]".into());
                }
                loop {
                    items.push(self.value(depth + 1)?);
                    self.skip_ws();
                    match self.peek()? {
                        ',' => self.pos += 1,
                        ']' => {
                            self.pos += 1;
                            return Some(format!("[{}]", items.join(",")));
                        }
                        _ => return None,
                    }
                }
            }
            _ => self.scalar(),
        }
    }

    fn map(&mut self, depth: usize) -> Option<String> {
        self.pos += 1;
        let mut entries = Vec::new();
        self.skip_ws();
        if self.peek() == Some('}') {
            self.pos += 1;
            return Some("{}".into());
        }
        loop {
            let k = self.key()?;
            self.skip_ws();
            match self.peek()? {
                '=' | ':' => self.pos += 1,
                _ => return None,
            }
            let v = self.value(depth + 1)?;
            entries.push(format!("{k}={v}"));
            self.skip_ws();
            match self.peek()? {
                ',' => self.pos += 1,
                '}' => {
                    self.pos += 1;
                    entries.sort();
                    return Some(format!("{{{}}}", entries.join(",")));
                }
                _ => return None,
            }
        }
    }

    fn key(&mut self) -> Option<String> {
        self.skip_ws();
        match self.peek()? {
            '\'' | '"' => self.scalar(),
            _ => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c == '=' || c == ':' || c == '}' || c == ',' {
                        break;
                    }
                    self.pos += 1;
                }
                let raw: String = self.chars[start..self.pos].iter().collect();
                Some(normalize_scalar(raw.trim()))
            }
        }
    }

    fn scalar(&mut self) -> Option<String> {
        self.skip_ws();
        let q = self.peek()?;
        if q == '\'' || q == '"' {
            self.pos += 1;
            let mut out = String::new();
            loop {
                let c = self.peek()?;
                self.pos += 1;
                match c {
                    '\\' => {
                        out.push(self.peek()?);
                        self.pos += 1;
                    }
                    c if c == q => return Some(out),
                    c => out.push(c),
                }
            }
        }
        let start = self.pos;
        let mut depth = 0i32;
        while let Some(c) = self.peek() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' | '}' | ']' if depth <= 0 => break,
                _ => {}
            }
            self.pos += 1;
        }
        let raw: String = self.chars[start..self.pos].iter().collect();
        Some(normalize_scalar(raw.trim()))
    }
}

fn normalize_scalar(s: &str) -> String {
    match s {
        "None" | "null" => "null".into(),
        "True" | "true" => "true".into(),
        "False" | "false" => "false".into(),
        _ => s.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use xlv_runtime::Interp;

    fn eval(i: &Interp, src: &str) -> Value {
        let m = i
            .run_module_source(
                "m",
                &format!("import io\nfrom datetime import timedelta\nclass P:\n    pass\nclass Q:\n    pass\nx = {src}\n"),
                "m.py",
            )
            .unwrap();
        m.get("x").unwrap()
    }

    fn same(src_a: &str, src_b: &str) -> bool {
        let i = Interp::new();
        let (a, b) = (eval(&i, src_a), eval(&i, src_b));
        semantic_equal(&a, &b, &EqualityConfig::default()).unwrap()
    }

    #[test]
    fn nested_structures() {
        assert!(same("{'a': [1, 2]}", "{'a': [1, 2]}"));
        assert!(!same("{'a': [1, 2]}", "{'a': [2, 1]}"));
        assert!(same("{'b': 1, 'a': 2}", "{'a': 2, 'b': 1}"));
        assert!(same("{1, 2, 3}", "{3, 2, 1}"));
        assert!(same("(1, 2)", "[1, 2]"));
        assert!(!same("True", "1"));
        assert!(!same("None", "0"));
    }

    #[test]
    fn tolerant_floats() {
        assert!(same("0.1 + 0.2", "0.3"));
        assert!(!same("0.3", "0.31"));
        assert!(same("float('nan')", "float('nan')"));
        assert!(!same("float('inf')", "1e308"));
        // |a-b| = 4e-17 <= max(1e-9 * 0.3, 1e-12): hand evaluated.
        assert!(floats_close(0.300_000_000_000_000_04, 0.3, 1e-9, 1e-12));
    }

    #[test]
    fn streams_compare_by_content() {
        assert!(same("io.BytesIO(b'abc')", "io.BytesIO(b'abc')"));
        assert!(!same("io.BytesIO(b'abc')", "io.BytesIO(b'abd')"));
        let i = Interp::new();
        let (a, b) = (eval(&i, "io.BytesIO(b'abc')"), eval(&i, "io.BytesIO(b'abc')"));
        i.call_method(&b, "read", vec![Value::Int(1)]).unwrap();
        let msg = first_mismatch(&a, &b, &EqualityConfig::default()).unwrap().unwrap();
        assert!(msg.contains("position"), "{msg}");
    }

    #[test]
    fn durations_within_tolerance() {
        assert!(same("timedelta(seconds=1)", "timedelta(microseconds=1000001)"));
        assert!(!same("timedelta(seconds=1)", "timedelta(microseconds=1000002)"));
    }

    #[test]
    fn objects_and_cycles() {
        let i = Interp::new();
        let m = i
            .run_module_source(
                "m",
                "class N:\n    pass\ndef ring(v):\n    a = N()\n    b = N()\n    a.v = v\n    b.v = v\n    a.n = b\n    b.n = a\n    return a\nx = ring(1)\ny = ring(1)\nz = ring(2)\n",
                "m.py",
            )
            .unwrap();
        let cfg = EqualityConfig::default();
        let (x, y, z) = (m.get("x").unwrap(), m.get("y").unwrap(), m.get("z").unwrap());
        assert!(semantic_equal(&x, &y, &cfg).unwrap());
        assert!(!semantic_equal(&x, &z, &cfg).unwrap());
        let p = first_mismatch(&x, &z, &cfg).unwrap().unwrap();
        assert!(p.starts_with("$.v"), "{p}");
    }

    #[test]
    fn attribute_presence_and_class() {
        assert!(!same("P()", "Q()"));
        let i = Interp::new();
        let m = i.run_module_source("m", "class P:\n    pass\na = P()\nb = P()\nb.extra = 1\n", "m.py").unwrap();
        assert!(!semantic_equal(&m.get("a").unwrap(), &m.get("b").unwrap(), &EqualityConfig::default()).unwrap());
    }

    #[test]
    fn exceptions_and_enums() {
        assert!(same("ValueError('x')", "ValueError('x')"));
        assert!(!same("ValueError('x')", "ValueError('y')"));
        assert!(!same("ValueError('x')", "TypeError('x')"));
        let i = Interp::new();
        let m = i.run_module_source("m", "from enum import Enum\nclass A(Enum):\n    X = 1\nclass B(Enum):\n    X = 2\n    Y = 3\n", "m.py").unwrap();
        let cfg = EqualityConfig::default();
        let ax = i.eval_in_module(&m, "A.X").unwrap();
        assert!(semantic_equal(&ax, &i.eval_in_module(&m, "B.X").unwrap(), &cfg).unwrap());
        assert!(!semantic_equal(&ax, &i.eval_in_module(&m, "B.Y").unwrap(), &cfg).unwrap());
    }

    #[test]
    fn depth_bound() {
        let i = Interp::new();
        let a = eval(&i, "[[[[[1]]]]]");
        let cfg = EqualityConfig { max_depth: 3, ..Default::default() };
        assert!(semantic_equal(&a, &a.clone(), &cfg).is_err());
    }

    #[test]
    fn rendered_maps() {
        assert!(string_form_equal("{a=1, b=2}", "{'a': 1, 'b': 2}"));
        assert!(string_form_equal("{b=2, a=1}", "{'a': 1, 'b': 2}"));
        assert!(!string_form_equal("{a=1}", "{'a': 2}"));
        assert!(string_form_equal("hello", "hello"));
        assert!(!string_form_equal("[1, 2]", "[1,2]"));
        assert!(string_form_equal("{k=null, t=true}", "{'k': None, 't': True}"));
        assert!(string_form_equal("{a=[x, y]}", "{'a': ['x', 'y']}"));
        assert!(!string_form_equal("{a=1", "{'a': 1"));
        assert!(string_form_equal("{}", "{}"));
    }

    #[test]
    fn config_validation() {
        assert!(EqualityConfig::default().validate().is_ok());
        assert!(EqualityConfig { float_abs_tol: -1.0, ..Default::default() }.validate().is_err());
        assert!(EqualityConfig { max_depth: 0, ..Default::default() }.validate().is_err());
    }
}
