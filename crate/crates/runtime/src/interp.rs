//! Tree-walking evaluator.

use std::cell::{Cell, RefCell};
use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::PathBuf;
use std::rc::Rc;
use std::time::Instant;

use indexmap::IndexMap;

use crate::ast::*;
use crate::error::{Exc, RunError};
use crate::parser;
use crate::value::*;

/// Evaluated `start`, `stop` and `step` of a slice.
type SliceBounds = (Option<i64>, Option<i64>, Option<i64>);

pub type ModuleBuilder = Rc<dyn Fn(&Interp) -> Result<Rc<ModuleObj>, Exc>>;

/// One call of a user-defined function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallRecord {
    pub module: String,
    pub qualname: String,
}

pub const EXCEPTION_CLASSES: &[(&str, &str)] = &[
    ("BaseException", ""),
    ("Exception", "BaseException"),
    ("ArithmeticError", "Exception"),
    ("ZeroDivisionError", "ArithmeticError"),
    ("OverflowError", "ArithmeticError"),
    ("LookupError", "Exception"),
    ("KeyError", "LookupError"),
    ("IndexError", "LookupError"),
    ("ValueError", "Exception"),
    ("UnicodeDecodeError", "ValueError"),
    ("TypeError", "Exception"),
    ("RuntimeError", "Exception"),
    ("NotImplementedError", "RuntimeError"),
    ("RecursionError", "RuntimeError"),
    ("StopIteration", "Exception"),
    ("AttributeError", "Exception"),
    ("NameError", "Exception"),
    ("UnboundLocalError", "NameError"),
    ("AssertionError", "Exception"),
    ("ImportError", "Exception"),
    ("ModuleNotFoundError", "ImportError"),
    ("OSError", "Exception"),
    ("FileNotFoundError", "OSError"),
    ("EOFError", "Exception"),
    ("SyntaxError", "Exception"),
    ("MockExhaustedError", "Exception"),
    ("ExecutionTimeout", "BaseException"),
];

#[derive(Clone, Copy, PartialEq, Eq)]
enum FrameKind {
    Module,
    Function,
    Class,
}

#[derive(Clone)]
struct Frame {
    kind: FrameKind,
    scope: Rc<Scope>,
    globals: Rc<ModuleObj>,
    func: Option<Rc<Function>>,
    first_arg: Option<Value>,
    qualname: String,
}

enum Flow {
    Return(Value),
    Break,
    Continue,
    Raise(Exc),
}

impl From<Exc> for Flow {
    fn from(e: Exc) -> Self {
        Flow::Raise(e)
    }
}

/// Stepwise iteration over any iterable value.
pub enum Looper {
    List(Ref<Vec<Value>>, usize),
    Owned(std::vec::IntoIter<Value>),
    Shared(Ref<IterState>),
    User(Value),
}

impl Looper {
    pub fn next(&mut self, interp: &Interp) -> Result<Option<Value>, Exc> {
        match self {
            Looper::List(l, i) => {
                let item = l.borrow().get(*i).cloned();
                *i += 1;
                Ok(item)
            }
            Looper::Owned(it) => Ok(it.next()),
            Looper::Shared(s) => Ok(s.borrow_mut().next_item()),
            Looper::User(obj) => match interp.call_method(obj, "__next__", vec![]) {
                Ok(v) => Ok(Some(v)),
                Err(e) if interp.exc_is(&e, "StopIteration") => Ok(None),
                Err(e) => Err(e),
            },
        }
    }
}

pub struct Interp {
    pub(crate) builtins: Rc<ModuleObj>,
    modules: RefCell<HashMap<String, Rc<ModuleObj>>>,
    search_paths: RefCell<Vec<PathBuf>>,
    native_modules: RefCell<HashMap<String, ModuleBuilder>>,
    pub(crate) exc_classes: RefCell<HashMap<String, Rc<Class>>>,
    output: RefCell<String>,
    call_log: RefCell<Vec<CallRecord>>,
    depth: Cell<usize>,
    /// Maximum nesting of user-function calls.
    pub max_depth: usize,
    handling: RefCell<Vec<Exc>>,
    deadline: Cell<Option<Instant>>,
}

impl Default for Interp {
    fn default() -> Self {
        Self::new()
    }
}

impl Interp {
    pub fn new() -> Self {
        let interp = Self {
            builtins: ModuleObj::new("builtins"),
            modules: RefCell::new(HashMap::new()),
            search_paths: RefCell::new(Vec::new()),
            native_modules: RefCell::new(HashMap::new()),
            exc_classes: RefCell::new(HashMap::new()),
            output: RefCell::new(String::new()),
            call_log: RefCell::new(Vec::new()),
            depth: Cell::new(0),
            max_depth: 400,
            handling: RefCell::new(Vec::new()),
            deadline: Cell::new(None),
        };
        interp.init_exceptions();
        crate::builtins::install(&interp);
        interp
    }

    fn init_exceptions(&self) {
        for (name, base) in EXCEPTION_CLASSES {
            let bases = if base.is_empty() { Vec::new() } else { vec![self.exc_classes.borrow()[*base].clone()] };
            let cls = Rc::new(Class::new(name, name, "builtins", bases));
            if base.is_empty() {
                let init = Value::native("__init__", |_, args, _| {
                    if let Some(Value::Instance(inst)) = args.first() {
                        inst.dict.borrow_mut().insert("args".into(), Value::tuple(args[1..].to_vec()));
                    }
                    Ok(Value::None)
                });
                cls.dict.borrow_mut().insert("__init__".into(), init);
            }
            self.builtins.set(name, Value::Class(cls.clone()));
            self.exc_classes.borrow_mut().insert(name.to_string(), cls);
        }
    }

    // ----- host API -----

    pub fn add_search_path(&self, dir: impl Into<PathBuf>) {
        self.search_paths.borrow_mut().push(dir.into());
    }

    pub fn register_native_module(&self, name: &str, builder: ModuleBuilder) {
        self.native_modules.borrow_mut().insert(name.to_string(), builder);
    }

    pub fn builtin(&self, name: &str) -> Option<Value> {
        self.builtins.get(name)
    }

    pub fn builtin_class(&self, name: &str) -> Option<Rc<Class>> {
        self.exc_classes.borrow().get(name).cloned()
    }

    /// Text written by `print` so far.
    pub fn output(&self) -> String {
        self.output.borrow().clone()
    }

    pub(crate) fn write_output(&self, s: &str) {
        self.output.borrow_mut().push_str(s);
    }

    pub fn call_log(&self) -> Vec<CallRecord> {
        self.call_log.borrow().clone()
    }

    /// After `at`, every loop iteration and call raises `ExecutionTimeout`.
    pub fn set_deadline(&self, at: Option<Instant>) {
        self.deadline.set(at);
    }

    fn check_deadline(&self) -> Result<(), Exc> {
        match self.deadline.get() {
            Some(at) if Instant::now() >= at => Err(self.exc("ExecutionTimeout", "execution time limit exceeded")),
            _ => Ok(()),
        }
    }

    pub fn clear_call_log(&self) {
        self.call_log.borrow_mut().clear();
    }

    pub fn loaded_modules(&self) -> Vec<Rc<ModuleObj>> {
        let mut mods: Vec<_> = self.modules.borrow().values().cloned().collect();
        mods.sort_by(|a, b| a.name.cmp(&b.name));
        mods
    }

    pub fn module(&self, name: &str) -> Option<Rc<ModuleObj>> {
        self.modules.borrow().get(name).cloned()
    }

    /// Builds an exception instance of the named built-in class.
    pub fn exc(&self, class: &str, msg: impl Into<String>) -> Exc {
        let cls = self.builtin_class(class).unwrap_or_else(|| self.builtin_class("RuntimeError").expect("builtin"));
        Exc::new(self.new_exception(&cls, vec![Value::str(msg.into())]))
    }

    pub fn new_exception(&self, cls: &Rc<Class>, args: Vec<Value>) -> Value {
        let inst = new_instance(cls);
        if let Value::Instance(i) = &inst {
            i.dict.borrow_mut().insert("args".into(), Value::tuple(args));
        }
        inst
    }

    pub fn type_error(&self, msg: impl Into<String>) -> Exc {
        self.exc("TypeError", msg)
    }

    pub fn exc_is(&self, e: &Exc, class: &str) -> bool {
        match (e.value.instance_class(), self.builtin_class(class)) {
            (Some(c), Some(target)) => c.is_subclass_of(&target),
            _ => false,
        }
    }

    /// Executes `src` as module `name` and registers it.
    pub fn run_module_source(&self, name: &str, src: &str, file: &str) -> Result<Rc<ModuleObj>, RunError> {
        let parsed = parser::parse_module(src).map_err(|err| RunError::Syntax { file: file.to_string(), err })?;
        let module = ModuleObj::new(name);
        module.set("__name__", Value::str(name));
        self.modules.borrow_mut().insert(name.to_string(), module.clone());
        let frame = self.module_frame(&module);
        if let Err(e) = self.exec_top(&parsed.body, &frame) {
            self.modules.borrow_mut().remove(name);
            return Err(RunError::Raised(e));
        }
        Ok(module)
    }

    /// Executes definitions from `src` inside the namespace of `cls`,
    /// with the globals of the class's defining module.
    pub fn exec_in_class(&self, cls: &Rc<Class>, src: &str) -> Result<(), RunError> {
        let parsed = parser::parse_in_class(src, &cls.name).map_err(|err| RunError::Syntax { file: format!("<{}>", cls.name), err })?;
        let globals = self.module(&cls.module).unwrap_or_else(|| ModuleObj::new(&cls.module));
        let scope = Scope::new(None);
        let frame = Frame { kind: FrameKind::Class, scope: scope.clone(), globals, func: None, first_arg: None, qualname: cls.qualname.clone() };
        self.exec_top(&parsed.body, &frame)?;
        let defined: Vec<(String, Value)> = scope.vars.borrow().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        for (k, v) in defined {
            set_owner(&v, cls);
            cls.dict.borrow_mut().insert(k, v);
        }
        Ok(())
    }

    /// Evaluates a single expression in the namespace of `module`.
    pub fn eval_in_module(&self, module: &Rc<ModuleObj>, src: &str) -> Result<Value, RunError> {
        let expr = parser::parse_expression(src).map_err(|err| RunError::Syntax { file: "<expr>".into(), err })?;
        let frame = self.module_frame(module);
        Ok(self.eval(&expr, &frame)?)
    }

    /// Executes statements in the namespace of `module`.
    pub fn exec_in_module(&self, module: &Rc<ModuleObj>, src: &str) -> Result<(), RunError> {
        let parsed = parser::parse_module(src).map_err(|err| RunError::Syntax { file: module.name.clone(), err })?;
        let frame = self.module_frame(module);
        self.exec_top(&parsed.body, &frame)?;
        Ok(())
    }

    fn module_frame(&self, module: &Rc<ModuleObj>) -> Frame {
        Frame { kind: FrameKind::Module, scope: Scope::new(None), globals: module.clone(), func: None, first_arg: None, qualname: String::new() }
    }

    fn exec_top(&self, body: &[Stmt], frame: &Frame) -> Result<(), Exc> {
        match self.exec_block(body, frame) {
            Ok(()) => Ok(()),
            Err(Flow::Raise(e)) => Err(e),
            Err(Flow::Return(_)) => Err(self.exc("SyntaxError", "'return' outside function")),
            Err(_) => Err(self.exc("SyntaxError", "'break' or 'continue' outside loop")),
        }
    }

    // ----- modules -----

    pub fn import_module(&self, name: &str) -> Result<Rc<ModuleObj>, Exc> {
        if let Some(m) = self.module(name) {
            return Ok(m);
        }
        let builder = self.native_modules.borrow().get(name).cloned();
        if let Some(b) = builder {
            let m = b(self)?;
            self.modules.borrow_mut().insert(name.to_string(), m.clone());
            return Ok(m);
        }
        if let Some(m) = crate::stdlib::build(self, name)? {
            self.modules.borrow_mut().insert(name.to_string(), m.clone());
            return Ok(m);
        }
        let parent = match name.rsplit_once('.') {
            Some((p, _)) => Some(self.import_module(p)?),
            None => None,
        };
        let rel: PathBuf = name.split('.').collect();
        let paths = self.search_paths.borrow().clone();
        for dir in paths {
            let file = dir.join(&rel).with_extension("py");
            let pkg = dir.join(&rel).join("__init__.py");
            let (path, is_pkg) = if file.is_file() {
                (file, false)
            } else if pkg.is_file() {
                (pkg, true)
            } else if dir.join(&rel).is_dir() {
                let m = ModuleObj::new(name);
                self.modules.borrow_mut().insert(name.to_string(), m.clone());
                self.link_parent(&parent, name, &m);
                return Ok(m);
            } else {
                continue;
            };
            let src = std::fs::read_to_string(&path).map_err(|e| self.exc("ImportError", format!("cannot read {}: {e}", path.display())))?;
            let _ = is_pkg;
            let m = match self.run_module_source(name, &src, &path.display().to_string()) {
                Ok(m) => m,
                Err(RunError::Raised(e)) => return Err(e),
                Err(RunError::Syntax { file, err }) => {
                    return Err(self.exc("SyntaxError", format!("{file}: {err}")));
                }
            };
            self.link_parent(&parent, name, &m);
            return Ok(m);
        }
        Err(self.exc("ModuleNotFoundError", format!("No module named '{name}'")))
    }

    fn link_parent(&self, parent: &Option<Rc<ModuleObj>>, name: &str, m: &Rc<ModuleObj>) {
        if let (Some(p), Some((_, last))) = (parent, name.rsplit_once('.')) {
            p.set(last, Value::Module(m.clone()));
        }
    }

    fn resolve_relative(&self, module: &str, frame: &Frame) -> String {
        let dots = module.chars().take_while(|c| *c == '.').count();
        if dots == 0 {
            return module.to_string();
        }
        let mut base: Vec<&str> = frame.globals.name.split('.').collect();
        for _ in 0..dots {
            base.pop();
        }
        let rest = &module[dots..];
        let mut parts: Vec<String> = base.iter().map(|s| s.to_string()).collect();
        if !rest.is_empty() {
            parts.push(rest.to_string());
        }
        parts.join(".")
    }

    // ----- statements -----

    fn exec_block(&self, body: &[Stmt], frame: &Frame) -> Result<(), Flow> {
        for stmt in body {
            if let Err(flow) = self.exec_stmt(stmt, frame) {
                return Err(match flow {
                    Flow::Raise(mut e) => {
                        if e.trace.is_empty() {
                            e.trace.push((frame.globals.name.clone(), stmt.line));
                        }
                        Flow::Raise(e)
                    }
                    other => other,
                });
            }
        }
        Ok(())
    }

    fn exec_stmt(&self, stmt: &Stmt, frame: &Frame) -> Result<(), Flow> {
        match &stmt.kind {
            StmtKind::Expr(e) => {
                self.eval(e, frame)?;
            }
            StmtKind::Assign { targets, value } => {
                let v = self.eval(value, frame)?;
                for t in targets {
                    self.assign(t, v.clone(), frame)?;
                }
            }
            StmtKind::AnnAssign { target, value } => {
                if let Some(value) = value {
                    let v = self.eval(value, frame)?;
                    self.assign(target, v, frame)?;
                }
            }
            StmtKind::AugAssign { target, op, value } => self.aug_assign(target, *op, value, frame)?,
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e, frame)?,
                    None => Value::None,
                };
                return Err(Flow::Return(v));
            }
            StmtKind::Raise { exc, cause } => {
                let e = match exc {
                    None => match self.handling.borrow().last() {
                        Some(e) => e.clone(),
                        None => self.exc("RuntimeError", "No active exception to reraise"),
                    },
                    Some(x) => {
                        let v = self.eval(x, frame)?;
                        let inst = self.make_exception(v)?;
                        if let Some(c) = cause {
                            let cv = self.eval(c, frame)?;
                            if let Value::Instance(i) = &inst {
                                i.dict.borrow_mut().insert("__cause__".into(), cv);
                            }
                        }
                        Exc::new(inst)
                    }
                };
                return Err(Flow::Raise(e));
            }
            StmtKind::Pass => {}
            StmtKind::Break => return Err(Flow::Break),
            StmtKind::Continue => return Err(Flow::Continue),
            StmtKind::Global(names) => frame.scope.globals_decl.borrow_mut().extend(names.iter().cloned()),
            StmtKind::Nonlocal(names) => frame.scope.nonlocal_decl.borrow_mut().extend(names.iter().cloned()),
            StmtKind::Del(targets) => {
                for t in targets {
                    self.delete(t, frame)?;
                }
            }
            StmtKind::Assert { test, msg } => {
                let v = self.eval(test, frame)?;
                if !self.truthy(&v)? {
                    let args = match msg {
                        Some(m) => vec![self.eval(m, frame)?],
                        None => vec![],
                    };
                    let cls = self.builtin_class("AssertionError").expect("builtin");
                    return Err(Flow::Raise(Exc::new(self.new_exception(&cls, args))));
                }
            }
            StmtKind::Import(names) => {
                for n in names {
                    let m = self.import_module(&n.name)?;
                    match &n.alias {
                        Some(a) => self.store_name(a, Value::Module(m), frame),
                        None => {
                            let top = n.name.split('.').next().unwrap_or(&n.name);
                            let tm = self.import_module(top)?;
                            self.store_name(top, Value::Module(tm), frame);
                        }
                    }
                }
            }
            StmtKind::ImportFrom { module, names } => {
                let full = self.resolve_relative(module, frame);
                let m = self.import_module(&full)?;
                for n in names {
                    if n.name == "*" {
                        let items: Vec<(String, Value)> =
                            m.dict.borrow().iter().filter(|(k, _)| !k.starts_with('_')).map(|(k, v)| (k.clone(), v.clone())).collect();
                        for (k, v) in items {
                            self.store_name(&k, v, frame);
                        }
                        continue;
                    }
                    let v = match m.get(&n.name) {
                        Some(v) => v,
                        None => match self.import_module(&format!("{full}.{}", n.name)) {
                            Ok(sub) => Value::Module(sub),
                            Err(_) => return Err(Flow::Raise(self.exc("ImportError", format!("cannot import name '{}' from '{full}'", n.name)))),
                        },
                    };
                    self.store_name(n.alias.as_ref().unwrap_or(&n.name), v, frame);
                }
            }
            StmtKind::If { test, body, orelse } => {
                let v = self.eval(test, frame)?;
                if self.truthy(&v)? {
                    self.exec_block(body, frame)?;
                } else {
                    self.exec_block(orelse, frame)?;
                }
            }
            StmtKind::While { test, body, orelse } => loop {
                self.check_deadline()?;
                let v = self.eval(test, frame)?;
                if !self.truthy(&v)? {
                    self.exec_block(orelse, frame)?;
                    break;
                }
                match self.exec_block(body, frame) {
                    Ok(()) | Err(Flow::Continue) => {}
                    Err(Flow::Break) => break,
                    Err(other) => return Err(other),
                }
            },
            StmtKind::For { target, iter, body, orelse } => {
                let it = self.eval(iter, frame)?;
                let mut looper = self.looper(&it)?;
                let mut broke = false;
                while let Some(item) = looper.next(self)? {
                    self.check_deadline()?;
                    self.assign(target, item, frame)?;
                    match self.exec_block(body, frame) {
                        Ok(()) | Err(Flow::Continue) => {}
                        Err(Flow::Break) => {
                            broke = true;
                            break;
                        }
                        Err(other) => return Err(other),
                    }
                }
                if !broke {
                    self.exec_block(orelse, frame)?;
                }
            }
            StmtKind::Try { body, handlers, orelse, finalbody } => {
                let mut result = match self.exec_block(body, frame) {
                    Ok(()) => self.exec_block(orelse, frame),
                    Err(Flow::Raise(e)) => self.handle(e, handlers, frame),
                    Err(other) => Err(other),
                };
                if !finalbody.is_empty() {
                    if let Err(f) = self.exec_block(finalbody, frame) {
                        result = Err(f);
                    }
                }
                result?;
            }
            StmtKind::With { items, body } => self.exec_with(items, body, frame)?,
            StmtKind::FunctionDef(def) => {
                let mut f = self.make_function(def, frame)?;
                for d in def.decorators.iter().rev() {
                    let dv = self.eval(d, frame)?;
                    f = self.call(&dv, vec![f], vec![])?;
                }
                self.store_name(&def.name, f, frame);
            }
            StmtKind::ClassDef(def) => {
                let mut c = self.make_class(def, frame)?;
                for d in def.decorators.iter().rev() {
                    let dv = self.eval(d, frame)?;
                    c = self.call(&dv, vec![c], vec![])?;
                }
                self.store_name(&def.name, c, frame);
            }
        }
        Ok(())
    }

    fn handle(&self, e: Exc, handlers: &[Handler], frame: &Frame) -> Result<(), Flow> {
        for h in handlers {
            let matched = match &h.kind {
                None => true,
                Some(k) => {
                    let kv = self.eval(k, frame)?;
                    self.exception_matches(&e.value, &kv)?
                }
            };
            if !matched {
                continue;
            }
            if let Some(n) = &h.name {
                self.store_name(n, e.value.clone(), frame);
            }
            self.handling.borrow_mut().push(e.clone());
            let r = self.exec_block(&h.body, frame);
            self.handling.borrow_mut().pop();
            return r;
        }
        Err(Flow::Raise(e))
    }

    fn exception_matches(&self, exc: &Value, kind: &Value) -> Result<bool, Exc> {
        match kind {
            Value::Class(c) => Ok(exc.instance_class().is_some_and(|ec| ec.is_subclass_of(c))),
            Value::Tuple(items) => {
                for k in items.iter() {
                    if self.exception_matches(exc, k)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            _ => Err(self.type_error("catching classes that do not inherit from BaseException is not allowed")),
        }
    }

    fn make_exception(&self, v: Value) -> Result<Value, Exc> {
        match &v {
            Value::Class(c) if c.is_exception() => self.call(&v, vec![], vec![]),
            Value::Instance(i) if i.class.borrow().is_exception() => Ok(v),
            _ => Err(self.type_error("exceptions must derive from BaseException")),
        }
    }

    fn exec_with(&self, items: &[(Expr, Option<Expr>)], body: &[Stmt], frame: &Frame) -> Result<(), Flow> {
        let Some(((ctx_e, var), rest)) = items.split_first() else {
            return self.exec_block(body, frame);
        };
        let ctx = self.eval(ctx_e, frame)?;
        let user = matches!(&ctx, Value::Instance(_));
        let entered = if user { self.call_method(&ctx, "__enter__", vec![])? } else { ctx.clone() };
        if let Some(t) = var {
            self.assign(t, entered, frame)?;
        }
        let r = if rest.is_empty() { self.exec_block(body, frame) } else { self.exec_with(rest, body, frame) };
        if user {
            match &r {
                Err(Flow::Raise(e)) => {
                    let cls = e.value.instance_class().map(Value::Class).unwrap_or(Value::None);
                    let suppress = self.call_method(&ctx, "__exit__", vec![cls, e.value.clone(), Value::None])?;
                    if self.truthy(&suppress)? {
                        return Ok(());
                    }
                }
                _ => {
                    self.call_method(&ctx, "__exit__", vec![Value::None, Value::None, Value::None])?;
                }
            }
        }
        r
    }

    fn make_function(&self, def: &Rc<FunctionDef>, frame: &Frame) -> Result<Value, Exc> {
        let mut defaults = Vec::with_capacity(def.params.len());
        for p in &def.params {
            defaults.push(match &p.default {
                Some(e) => Some(self.eval(e, frame)?),
                None => None,
            });
        }
        let closure = match frame.kind {
            FrameKind::Function => Some(frame.scope.clone()),
            FrameKind::Class => frame.scope.parent.clone(),
            FrameKind::Module => None,
        };
        let qualname = match frame.kind {
            FrameKind::Module => def.name.clone(),
            FrameKind::Class => format!("{}.{}", frame.qualname, def.name),
            FrameKind::Function => format!("{}.<locals>.{}", frame.qualname, def.name),
        };
        Ok(Value::Function(Rc::new(Function {
            def: def.clone(),
            qualname,
            globals: frame.globals.clone(),
            closure,
            defaults,
            owner: RefCell::new(None),
        })))
    }

    fn make_class(&self, def: &Rc<ClassDef>, frame: &Frame) -> Result<Value, Exc> {
        let mut bases = Vec::new();
        for b in &def.bases {
            if let Value::Class(c) = self.eval(b, frame)? {
                bases.push(c);
            }
        }
        let qualname = match frame.kind {
            FrameKind::Module => def.name.clone(),
            FrameKind::Class => format!("{}.{}", frame.qualname, def.name),
            FrameKind::Function => format!("{}.<locals>.{}", frame.qualname, def.name),
        };
        let parent = match frame.kind {
            FrameKind::Function => Some(frame.scope.clone()),
            FrameKind::Class => frame.scope.parent.clone(),
            FrameKind::Module => None,
        };
        let ns = Scope::new(parent);
        let body_frame = Frame {
            kind: FrameKind::Class,
            scope: ns.clone(),
            globals: frame.globals.clone(),
            func: None,
            first_arg: None,
            qualname: qualname.clone(),
        };
        match self.exec_block(&def.body, &body_frame) {
            Ok(()) => {}
            Err(Flow::Raise(e)) => return Err(e),
            Err(_) => return Err(self.exc("SyntaxError", "invalid control flow in class body")),
        }
        let cls = Rc::new(Class::new(&def.name, &qualname, &frame.globals.name, bases));
        let attrs: Vec<(String, Value)> = ns.vars.borrow().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        for (k, v) in &attrs {
            set_owner(v, &cls);
            cls.dict.borrow_mut().insert(k.clone(), v.clone());
        }
        if cls.is_enum() {
            self.init_enum(&cls)?;
        }
        Ok(Value::Class(cls))
    }

    fn init_enum(&self, cls: &Rc<Class>) -> Result<(), Exc> {
        let candidates: Vec<(String, Value)> = cls
            .dict
            .borrow()
            .iter()
            .filter(|(k, v)| {
                !k.starts_with('_')
                    && !matches!(
                        v,
                        Value::Function(_) | Value::StaticMethod(_) | Value::ClassMethod(_) | Value::Property(_) | Value::Native(_) | Value::Class(_)
                    )
            })
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let user_init = cls.lookup("__init__");
        let mut names = Vec::new();
        for (k, v) in candidates {
            let member = new_instance(cls);
            if let Value::Instance(i) = &member {
                i.dict.borrow_mut().insert("_name_".into(), Value::str(k.as_str()));
                i.dict.borrow_mut().insert("_value_".into(), v.clone());
            }
            if let Some(init @ Value::Function(_)) = &user_init {
                let mut args = vec![member.clone()];
                match &v {
                    Value::Tuple(t) => args.extend(t.iter().cloned()),
                    other => args.push(other.clone()),
                }
                self.call(init, args, vec![])?;
            }
            cls.dict.borrow_mut().insert(k.clone(), member);
            names.push(k);
        }
        *cls.enum_members.borrow_mut() = names;
        Ok(())
    }

    /// Members of an enum class in definition order.
    pub fn enum_members(&self, cls: &Rc<Class>) -> Vec<Value> {
        let names = cls.enum_members.borrow().clone();
        names.iter().filter_map(|n| cls.dict.borrow().get(n).cloned()).collect()
    }

    // ----- names -----

    fn load_name(&self, name: &str, frame: &Frame) -> Result<Value, Exc> {
        if frame.kind != FrameKind::Module && !frame.scope.globals_decl.borrow().iter().any(|g| g == name) {
            let mut s = Some(&frame.scope);
            while let Some(sc) = s {
                if let Some(v) = sc.vars.borrow().get(name) {
                    return Ok(v.clone());
                }
                s = sc.parent.as_ref();
            }
        }
        if let Some(v) = frame.globals.get(name) {
            return Ok(v);
        }
        if let Some(v) = self.builtins.get(name) {
            return Ok(v);
        }
        Err(self.exc("NameError", format!("name '{name}' is not defined")))
    }

    fn store_name(&self, name: &str, v: Value, frame: &Frame) {
        match frame.kind {
            FrameKind::Module => frame.globals.set(name, v),
            FrameKind::Class => {
                frame.scope.vars.borrow_mut().insert(name.to_string(), v);
            }
            FrameKind::Function => {
                if frame.scope.globals_decl.borrow().iter().any(|g| g == name) {
                    frame.globals.set(name, v);
                    return;
                }
                if frame.scope.nonlocal_decl.borrow().iter().any(|g| g == name) {
                    let mut s = frame.scope.parent.as_ref();
                    while let Some(sc) = s {
                        if sc.vars.borrow().contains_key(name) {
                            sc.vars.borrow_mut().insert(name.to_string(), v);
                            return;
                        }
                        s = sc.parent.as_ref();
                    }
                }
                frame.scope.vars.borrow_mut().insert(name.to_string(), v);
            }
        }
    }

    fn delete_name(&self, name: &str, frame: &Frame) -> Result<(), Exc> {
        let removed = match frame.kind {
            FrameKind::Module => frame.globals.dict.borrow_mut().shift_remove(name).is_some(),
            _ => frame.scope.vars.borrow_mut().shift_remove(name).is_some(),
        };
        if removed {
            Ok(())
        } else {
            Err(self.exc("NameError", format!("name '{name}' is not defined")))
        }
    }

    fn assign(&self, target: &Expr, v: Value, frame: &Frame) -> Result<(), Exc> {
        match target {
            Expr::Name(n) => {
                self.store_name(n, v, frame);
                Ok(())
            }
            Expr::Attribute(obj, name) => {
                let o = self.eval(obj, frame)?;
                self.setattr(&o, name, v)
            }
            Expr::Subscript(obj, idx) => {
                let o = self.eval(obj, frame)?;
                if let Expr::Slice(lo, hi, step) = idx.as_ref() {
                    let (lo, hi, step) = self.eval_slice_parts(lo, hi, step, frame)?;
                    return self.set_slice(&o, lo, hi, step, v);
                }
                let i = self.eval(idx, frame)?;
                self.set_item(&o, i, v)
            }
            Expr::Tuple(items) | Expr::List(items) => {
                let values = self.collect(&v)?;
                let star = items.iter().position(|e| matches!(e, Expr::Starred(_)));
                match star {
                    None => {
                        if values.len() != items.len() {
                            let msg = if values.len() < items.len() {
                                format!("not enough values to unpack (expected {}, got {})", items.len(), values.len())
                            } else {
                                format!("too many values to unpack (expected {})", items.len())
                            };
                            return Err(self.exc("ValueError", msg));
                        }
                        for (t, val) in items.iter().zip(values) {
                            self.assign(t, val, frame)?;
                        }
                    }
                    Some(si) => {
                        let after = items.len() - si - 1;
                        if values.len() < si + after {
                            return Err(self
                                .exc("ValueError", format!("not enough values to unpack (expected at least {}, got {})", si + after, values.len())));
                        }
                        for (t, val) in items[..si].iter().zip(values.iter()) {
                            self.assign(t, val.clone(), frame)?;
                        }
                        let mid = values[si..values.len() - after].to_vec();
                        if let Expr::Starred(inner) = &items[si] {
                            self.assign(inner, Value::list(mid), frame)?;
                        }
                        for (t, val) in items[si + 1..].iter().zip(values[values.len() - after..].iter()) {
                            self.assign(t, val.clone(), frame)?;
                        }
                    }
                }
                Ok(())
            }
            _ => Err(self.exc("SyntaxError", "cannot assign to expression")),
        }
    }

    fn aug_assign(&self, target: &Expr, op: BinOp, value: &Expr, frame: &Frame) -> Result<(), Exc> {
        match target {
            Expr::Name(n) => {
                let cur = self.load_name(n, frame)?;
                let rhs = self.eval(value, frame)?;
                let nv = self.inplace_binop(op, &cur, &rhs)?;
                self.store_name(n, nv, frame);
                Ok(())
            }
            Expr::Attribute(obj, name) => {
                let o = self.eval(obj, frame)?;
                let cur = self.getattr(&o, name)?;
                let rhs = self.eval(value, frame)?;
                let nv = self.inplace_binop(op, &cur, &rhs)?;
                self.setattr(&o, name, nv)
            }
            Expr::Subscript(obj, idx) => {
                let o = self.eval(obj, frame)?;
                let i = self.eval(idx, frame)?;
                let cur = self.get_item(&o, &i)?;
                let rhs = self.eval(value, frame)?;
                let nv = self.inplace_binop(op, &cur, &rhs)?;
                self.set_item(&o, i, nv)
            }
            _ => Err(self.exc("SyntaxError", "illegal expression for augmented assignment")),
        }
    }

    fn delete(&self, target: &Expr, frame: &Frame) -> Result<(), Exc> {
        match target {
            Expr::Name(n) => self.delete_name(n, frame),
            Expr::Attribute(obj, name) => {
                let o = self.eval(obj, frame)?;
                self.delattr(&o, name)
            }
            Expr::Subscript(obj, idx) => {
                let o = self.eval(obj, frame)?;
                if let Expr::Slice(lo, hi, step) = idx.as_ref() {
                    let (lo, hi, step) = self.eval_slice_parts(lo, hi, step, frame)?;
                    if let Value::List(l) = &o {
                        let len = l.borrow().len();
                        let idxs = slice_indices(len, lo, hi, step);
                        let mut sorted = idxs;
                        sorted.sort_unstable();
                        for i in sorted.into_iter().rev() {
                            l.borrow_mut().remove(i);
                        }
                        return Ok(());
                    }
                    return Err(self.type_error("object does not support slice deletion"));
                }
                let i = self.eval(idx, frame)?;
                self.del_item(&o, &i)
            }
            Expr::Tuple(items) | Expr::List(items) => {
                for t in items {
                    self.delete(t, frame)?;
                }
                Ok(())
            }
            _ => Err(self.exc("SyntaxError", "cannot delete expression")),
        }
    }

    // ----- expressions -----

    fn eval(&self, e: &Expr, frame: &Frame) -> Result<Value, Exc> {
        match e {
            Expr::None | Expr::Ellipsis => Ok(Value::None),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Int(i) => Ok(Value::Int(*i)),
            Expr::Float(f) => Ok(Value::Float(*f)),
            Expr::Str(s) => Ok(Value::Str(s.clone())),
            Expr::Bytes(b) => Ok(Value::Bytes(b.clone())),
            Expr::FString(parts) => {
                let mut out = String::new();
                for p in parts {
                    match p {
                        FStringPart::Lit(s) => out.push_str(s),
                        FStringPart::Expr { expr, conversion, spec } => {
                            let mut v = self.eval(expr, frame)?;
                            match conversion {
                                Some('r') => v = Value::str(self.repr(&v)?),
                                Some('s') => v = Value::str(self.to_str(&v)?),
                                _ => {}
                            }
                            match spec {
                                Some(s) if !s.is_empty() => out.push_str(&self.format_value(&v, s)?),
                                _ => out.push_str(&self.to_str(&v)?),
                            }
                        }
                    }
                }
                Ok(Value::str(out))
            }
            Expr::Name(n) => self.load_name(n, frame),
            Expr::Attribute(obj, name) => {
                let o = self.eval(obj, frame)?;
                self.getattr(&o, name)
            }
            Expr::Subscript(obj, idx) => {
                let o = self.eval(obj, frame)?;
                if let Expr::Slice(lo, hi, step) = idx.as_ref() {
                    let (lo, hi, step) = self.eval_slice_parts(lo, hi, step, frame)?;
                    return self.get_slice(&o, lo, hi, step);
                }
                let i = self.eval(idx, frame)?;
                self.get_item(&o, &i)
            }
            Expr::Slice(..) => Err(self.exc("SyntaxError", "slice outside subscript")),
            Expr::Call(func, args) => {
                if let (Expr::Name(n), true) = (func.as_ref(), args.is_empty()) {
                    if n == "super" {
                        return self.zero_arg_super(frame);
                    }
                }
                let f = self.eval(func, frame)?;
                let mut pos = Vec::with_capacity(args.len());
                let mut kw = Vec::new();
                for a in args {
                    match a {
                        Arg::Pos(e) => pos.push(self.eval(e, frame)?),
                        Arg::Star(e) => {
                            let v = self.eval(e, frame)?;
                            pos.extend(self.collect(&v)?);
                        }
                        Arg::Kw(n, e) => kw.push((n.clone(), self.eval(e, frame)?)),
                        Arg::StarStar(e) => match self.eval(e, frame)? {
                            Value::Dict(d) => {
                                for (k, v) in d.borrow().values() {
                                    match k {
                                        Value::Str(s) => kw.push((s.to_string(), v.clone())),
                                        _ => return Err(self.type_error("keywords must be strings")),
                                    }
                                }
                            }
                            _ => return Err(self.type_error("argument after ** must be a mapping")),
                        },
                    }
                }
                self.call(&f, pos, kw)
            }
            Expr::BinOp(a, op, b) => {
                let av = self.eval(a, frame)?;
                let bv = self.eval(b, frame)?;
                self.binop(*op, &av, &bv)
            }
            Expr::Unary(op, a) => {
                let v = self.eval(a, frame)?;
                self.unary(*op, &v)
            }
            Expr::And(a, b) => {
                let av = self.eval(a, frame)?;
                if !self.truthy(&av)? {
                    return Ok(av);
                }
                self.eval(b, frame)
            }
            Expr::Or(a, b) => {
                let av = self.eval(a, frame)?;
                if self.truthy(&av)? {
                    return Ok(av);
                }
                self.eval(b, frame)
            }
            Expr::Compare(first, rest) => {
                let mut left = self.eval(first, frame)?;
                for (op, e) in rest {
                    let right = self.eval(e, frame)?;
                    if !self.compare(*op, &left, &right)? {
                        return Ok(Value::Bool(false));
                    }
                    left = right;
                }
                Ok(Value::Bool(true))
            }
            Expr::IfExp { test, body, orelse } => {
                let t = self.eval(test, frame)?;
                if self.truthy(&t)? {
                    self.eval(body, frame)
                } else {
                    self.eval(orelse, frame)
                }
            }
            Expr::NamedExpr(name, value) => {
                let v = self.eval(value, frame)?;
                self.store_name(name, v.clone(), frame);
                Ok(v)
            }
            Expr::Lambda(def) => self.make_function(def, frame),
            Expr::List(items) => Ok(Value::list(self.eval_items(items, frame)?)),
            Expr::Tuple(items) => Ok(Value::tuple(self.eval_items(items, frame)?)),
            Expr::Set(items) => {
                let vals = self.eval_items(items, frame)?;
                self.make_set(vals)
            }
            Expr::Dict(entries) => {
                let mut map = DictMap::new();
                for (k, v) in entries {
                    let kv = self.eval(k, frame)?;
                    let vv = self.eval(v, frame)?;
                    map.insert(self.hash_key(&kv)?, (kv, vv));
                }
                Ok(Value::Dict(new_ref(map)))
            }
            Expr::ListComp(elt, comps) | Expr::GenExp(elt, comps) => {
                let mut out = Vec::new();
                let cf = self.comp_frame(frame);
                self.comp_loop(comps, 0, &cf, &mut |f| {
                    out.push(self.eval(elt, f)?);
                    Ok(())
                })?;
                Ok(Value::list(out))
            }
            Expr::SetComp(elt, comps) => {
                let mut out = Vec::new();
                let cf = self.comp_frame(frame);
                self.comp_loop(comps, 0, &cf, &mut |f| {
                    out.push(self.eval(elt, f)?);
                    Ok(())
                })?;
                self.make_set(out)
            }
            Expr::DictComp(k, v, comps) => {
                let mut map = DictMap::new();
                let cf = self.comp_frame(frame);
                self.comp_loop(comps, 0, &cf, &mut |f| {
                    let kv = self.eval(k, f)?;
                    let vv = self.eval(v, f)?;
                    map.insert(self.hash_key(&kv)?, (kv, vv));
                    Ok(())
                })?;
                Ok(Value::Dict(new_ref(map)))
            }
            Expr::Starred(_) => Err(self.exc("SyntaxError", "can't use starred expression here")),
        }
    }

    fn eval_items(&self, items: &[Expr], frame: &Frame) -> Result<Vec<Value>, Exc> {
        let mut out = Vec::with_capacity(items.len());
        for e in items {
            if let Expr::Starred(inner) = e {
                let v = self.eval(inner, frame)?;
                out.extend(self.collect(&v)?);
            } else {
                out.push(self.eval(e, frame)?);
            }
        }
        Ok(out)
    }

    fn comp_frame(&self, frame: &Frame) -> Frame {
        let parent = match frame.kind {
            FrameKind::Function => Some(frame.scope.clone()),
            FrameKind::Class => frame.scope.parent.clone(),
            FrameKind::Module => None,
        };
        Frame {
            kind: FrameKind::Function,
            scope: Scope::new(parent),
            globals: frame.globals.clone(),
            func: frame.func.clone(),
            first_arg: frame.first_arg.clone(),
            qualname: format!("{}.<comprehension>", frame.qualname),
        }
    }

    fn comp_loop(&self, comps: &[Comprehension], idx: usize, frame: &Frame, emit: &mut dyn FnMut(&Frame) -> Result<(), Exc>) -> Result<(), Exc> {
        let Some(c) = comps.get(idx) else {
            return emit(frame);
        };
        let it = self.eval(&c.iter, frame)?;
        let mut looper = self.looper(&it)?;
        'items: while let Some(item) = looper.next(self)? {
            self.assign(&c.target, item, frame)?;
            for cond in &c.conds {
                let cv = self.eval(cond, frame)?;
                if !self.truthy(&cv)? {
                    continue 'items;
                }
            }
            self.comp_loop(comps, idx + 1, frame, emit)?;
        }
        Ok(())
    }

    fn zero_arg_super(&self, frame: &Frame) -> Result<Value, Exc> {
        let owner = frame.func.as_ref().and_then(|f| f.owner.borrow().as_ref().and_then(|w| w.upgrade()));
        match (owner, &frame.first_arg) {
            (Some(cls), Some(obj)) => Ok(Value::Super(Rc::new((cls, obj.clone())))),
            _ => Err(self.exc("RuntimeError", "super(): no arguments")),
        }
    }

    fn eval_slice_parts(&self, lo: &Option<Box<Expr>>, hi: &Option<Box<Expr>>, step: &Option<Box<Expr>>, frame: &Frame) -> Result<SliceBounds, Exc> {
        let part = |e: &Option<Box<Expr>>| -> Result<Option<i64>, Exc> {
            match e {
                None => Ok(None),
                Some(e) => match self.eval(e, frame)? {
                    Value::None => Ok(None),
                    v => v.as_int().map(Some).ok_or_else(|| self.type_error("slice indices must be integers or None")),
                },
            }
        };
        let (a, b, c) = (part(lo)?, part(hi)?, part(step)?);
        if c == Some(0) {
            return Err(self.exc("ValueError", "slice step cannot be zero"));
        }
        Ok((a, b, c))
    }

    pub fn make_set(&self, items: Vec<Value>) -> Result<Value, Exc> {
        let mut map = SetMap::new();
        for v in items {
            map.insert(self.hash_key(&v)?, v);
        }
        Ok(Value::Set(new_ref(map)))
    }

    pub fn make_dict(&self, items: Vec<(Value, Value)>) -> Result<Value, Exc> {
        let mut map = DictMap::new();
        for (k, v) in items {
            map.insert(self.hash_key(&k)?, (k, v));
        }
        Ok(Value::Dict(new_ref(map)))
    }

    // ----- calls -----

    pub fn call(&self, f: &Value, args: Vec<Value>, kwargs: Vec<(String, Value)>) -> Result<Value, Exc> {
        match f {
            Value::Function(func) => self.call_function(func, args, kwargs),
            Value::BoundMethod(bm) => {
                let mut full = Vec::with_capacity(args.len() + 1);
                full.push(bm.0.clone());
                full.extend(args);
                self.call(&bm.1, full, kwargs)
            }
            Value::Native(n) => (n.f)(self, args, kwargs),
            Value::BuiltinMethod(m) => crate::builtins::call_method(self, &m.0, &m.1, args, kwargs),
            Value::Class(c) => self.instantiate(c, args, kwargs),
            Value::Type(t) => crate::builtins::construct(self, *t, args, kwargs),
            Value::StaticMethod(inner) => self.call(inner, args, kwargs),
            Value::Instance(_) => {
                let m = self.getattr(f, "__call__").map_err(|_| self.not_callable(f))?;
                self.call(&m, args, kwargs)
            }
            _ => Err(self.not_callable(f)),
        }
    }

    fn not_callable(&self, f: &Value) -> Exc {
        self.type_error(format!("'{}' object is not callable", f.type_name()))
    }

    pub fn call_method(&self, obj: &Value, name: &str, args: Vec<Value>) -> Result<Value, Exc> {
        let m = self.getattr(obj, name)?;
        self.call(&m, args, vec![])
    }

    fn call_function(&self, func: &Rc<Function>, args: Vec<Value>, kwargs: Vec<(String, Value)>) -> Result<Value, Exc> {
        if self.depth.get() >= self.max_depth {
            return Err(self.exc("RecursionError", "maximum recursion depth exceeded"));
        }
        self.check_deadline()?;
        self.call_log.borrow_mut().push(CallRecord { module: func.globals.name.clone(), qualname: func.qualname.clone() });
        let def = &func.def;
        let scope = Scope::new(func.closure.clone());
        let first_arg = args.first().cloned();
        {
            let mut vars = scope.vars.borrow_mut();
            let np = def.params.len();
            let mut filled = vec![false; np];
            let mut extra = Vec::new();
            for (i, a) in args.into_iter().enumerate() {
                if i < np {
                    vars.insert(def.params[i].name.clone(), a);
                    filled[i] = true;
                } else {
                    extra.push(a);
                }
            }
            if !extra.is_empty() && def.vararg.is_none() {
                return Err(self.type_error(format!("{}() takes {} positional arguments but {} were given", def.name, np, np + extra.len())));
            }
            let mut kwextra = DictMap::new();
            for (k, v) in kwargs {
                match def.params.iter().position(|p| p.name == k) {
                    Some(i) => {
                        if filled[i] {
                            return Err(self.type_error(format!("{}() got multiple values for argument '{k}'", def.name)));
                        }
                        vars.insert(k, v);
                        filled[i] = true;
                    }
                    None if def.kwarg.is_some() => {
                        let key = Value::str(k.as_str());
                        kwextra.insert(HashKey::Str(k.as_str().into()), (key, v));
                    }
                    None => {
                        return Err(self.type_error(format!("{}() got an unexpected keyword argument '{k}'", def.name)));
                    }
                }
            }
            for (i, p) in def.params.iter().enumerate() {
                if !filled[i] {
                    match &func.defaults[i] {
                        Some(d) => {
                            vars.insert(p.name.clone(), d.clone());
                        }
                        None => return Err(self.type_error(format!("{}() missing required argument: '{}'", def.name, p.name))),
                    }
                }
            }
            if let Some(va) = &def.vararg {
                vars.insert(va.clone(), Value::tuple(extra));
            }
            if let Some(kw) = &def.kwarg {
                vars.insert(kw.clone(), Value::Dict(new_ref(kwextra)));
            }
        }
        let frame = Frame {
            kind: FrameKind::Function,
            scope,
            globals: func.globals.clone(),
            func: Some(func.clone()),
            first_arg,
            qualname: func.qualname.clone(),
        };
        self.depth.set(self.depth.get() + 1);
        let r = self.exec_block(&def.body, &frame);
        self.depth.set(self.depth.get() - 1);
        match r {
            Ok(()) => Ok(Value::None),
            Err(Flow::Return(v)) => Ok(v),
            Err(Flow::Raise(e)) => Err(e),
            Err(_) => Err(self.exc("SyntaxError", "'break' or 'continue' outside loop")),
        }
    }

    pub fn instantiate(&self, cls: &Rc<Class>, args: Vec<Value>, kwargs: Vec<(String, Value)>) -> Result<Value, Exc> {
        let hook = cls.ctor_hook.borrow().clone();
        if let Some(h) = hook {
            return self.call(&h, args, kwargs);
        }
        if cls.is_enum() {
            if args.len() == 1 {
                for m in self.enum_members(cls) {
                    if let Some(v) = m.instance_attr("_value_") {
                        if self.eq(&v, &args[0])? {
                            return Ok(m);
                        }
                    }
                }
                return Err(self.exc("ValueError", format!("{} is not a valid {}", self.repr(&args[0])?, cls.name)));
            }
            return Err(self.type_error(format!("{}() takes exactly one argument", cls.name)));
        }
        let inst = new_instance(cls);
        if cls.is_exception() {
            if let Value::Instance(i) = &inst {
                i.dict.borrow_mut().insert("args".into(), Value::tuple(args.clone()));
            }
        }
        match cls.lookup("__init__") {
            Some(init) => {
                let mut full = Vec::with_capacity(args.len() + 1);
                full.push(inst.clone());
                full.extend(args);
                self.call(&init, full, kwargs)?;
            }
            None if !args.is_empty() || !kwargs.is_empty() => {
                return Err(self.type_error(format!("{}() takes no arguments", cls.name)));
            }
            None => {}
        }
        Ok(inst)
    }

    // ----- attributes -----

    pub fn getattr(&self, obj: &Value, name: &str) -> Result<Value, Exc> {
        match obj {
            Value::Instance(inst) => {
                if name == "__class__" {
                    return Ok(Value::Class(inst.class.borrow().clone()));
                }
                if name == "__dict__" {
                    let items: Vec<(Value, Value)> = inst.dict.borrow().iter().map(|(k, v)| (Value::str(k.as_str()), v.clone())).collect();
                    return self.make_dict(items);
                }
                let cls = inst.class.borrow().clone();
                let class_attr = cls.lookup(name);
                if let Some(Value::Property(p)) = &class_attr {
                    return self.call(&p.getter, vec![obj.clone()], vec![]);
                }
                if let Some(v) = inst.dict.borrow().get(name) {
                    return Ok(v.clone());
                }
                if let Some(v) = class_attr {
                    return Ok(bind(v, obj, &cls));
                }
                if cls.is_enum() && (name == "name" || name == "value") {
                    let key = if name == "name" { "_name_" } else { "_value_" };
                    if let Some(v) = inst.dict.borrow().get(key) {
                        return Ok(v.clone());
                    }
                }
                if cls.is_exception() && name == "args" {
                    return Ok(Value::tuple(vec![]));
                }
                if let Some(ga) = cls.lookup("__getattr__") {
                    return self.call(&ga, vec![obj.clone(), Value::str(name)], vec![]);
                }
                Err(self.exc("AttributeError", format!("'{}' object has no attribute '{name}'", cls.name)))
            }
            Value::Class(c) => {
                match name {
                    "__name__" => return Ok(Value::str(c.name.as_str())),
                    "__qualname__" => return Ok(Value::str(c.qualname.as_str())),
                    "__module__" => return Ok(Value::str(c.module.as_str())),
                    "__mro__" => return Ok(Value::tuple(c.mro().into_iter().map(Value::Class).collect())),
                    "__bases__" => return Ok(Value::tuple(c.bases.iter().cloned().map(Value::Class).collect())),
                    _ => {}
                }
                match c.lookup(name) {
                    Some(Value::StaticMethod(f)) => Ok(f.as_ref().clone()),
                    Some(Value::ClassMethod(f)) => Ok(Value::BoundMethod(Rc::new((obj.clone(), f.as_ref().clone())))),
                    Some(v) => Ok(v),
                    None if c.is_enum() && name == "__members__" => {
                        let items: Vec<(Value, Value)> = c
                            .enum_members
                            .borrow()
                            .iter()
                            .filter_map(|n| c.dict.borrow().get(n).map(|m| (Value::str(n.as_str()), m.clone())))
                            .collect();
                        self.make_dict(items)
                    }
                    None => Err(self.exc("AttributeError", format!("type object '{}' has no attribute '{name}'", c.name))),
                }
            }
            Value::Module(m) => m.get(name).ok_or_else(|| self.exc("AttributeError", format!("module '{}' has no attribute '{name}'", m.name))),
            Value::Super(s) => {
                let (cls, target) = (&s.0, &s.1);
                let start = match target {
                    Value::Class(c) => c.clone(),
                    other => other.instance_class().ok_or_else(|| self.type_error("super(): bad target"))?,
                };
                let mro = start.mro();
                let pos = mro.iter().position(|c| Rc::ptr_eq(c, cls)).map(|p| p + 1).unwrap_or(mro.len());
                for c in &mro[pos..] {
                    let found = c.dict.borrow().get(name).cloned();
                    if let Some(v) = found {
                        return Ok(match v {
                            Value::Property(p) => self.call(&p.getter, vec![target.clone()], vec![])?,
                            other if matches!(target, Value::Class(_)) => match other {
                                Value::StaticMethod(f) => f.as_ref().clone(),
                                Value::ClassMethod(f) => Value::BoundMethod(Rc::new((target.clone(), f.as_ref().clone()))),
                                o => o,
                            },
                            other => bind(other, target, &start),
                        });
                    }
                }
                if name == "__init__" {
                    return Ok(Value::native("__init__", |_, _, _| Ok(Value::None)));
                }
                Err(self.exc("AttributeError", format!("'super' object has no attribute '{name}'")))
            }
            Value::Function(f) => match name {
                "__name__" => Ok(Value::str(f.def.name.as_str())),
                "__qualname__" => Ok(Value::str(f.qualname.as_str())),
                "__module__" => Ok(Value::str(f.globals.name.as_str())),
                _ => Err(self.exc("AttributeError", format!("'function' object has no attribute '{name}'"))),
            },
            Value::Native(n) if name == "__name__" => Ok(Value::str(n.name.as_str())),
            Value::Type(t) if name == "__name__" || name == "__qualname__" => Ok(Value::str(t.name())),
            _ => crate::builtins::builtin_attr(self, obj, name),
        }
    }

    pub fn hasattr(&self, obj: &Value, name: &str) -> Result<bool, Exc> {
        match self.getattr(obj, name) {
            Ok(_) => Ok(true),
            Err(e) if self.exc_is(&e, "AttributeError") => Ok(false),
            Err(e) => Err(e),
        }
    }

    pub fn setattr(&self, obj: &Value, name: &str, v: Value) -> Result<(), Exc> {
        match obj {
            Value::Instance(inst) => {
                let cls = inst.class.borrow().clone();
                if let Some(Value::Property(p)) = cls.lookup(name) {
                    return match &p.setter {
                        Some(s) => self.call(s, vec![obj.clone(), v], vec![]).map(|_| ()),
                        None => Err(self.exc("AttributeError", format!("can't set attribute '{name}'"))),
                    };
                }
                if name == "__class__" {
                    if let Value::Class(c) = v {
                        *inst.class.borrow_mut() = c;
                        return Ok(());
                    }
                }
                inst.dict.borrow_mut().insert(name.to_string(), v);
                Ok(())
            }
            Value::Class(c) => {
                if name == "__init__" || name == "__new__" {
                    set_owner(&v, c);
                }
                c.dict.borrow_mut().insert(name.to_string(), v);
                Ok(())
            }
            Value::Module(m) => {
                m.set(name, v);
                Ok(())
            }
            _ => Err(self.exc("AttributeError", format!("'{}' object attribute '{name}' is read-only", obj.type_name()))),
        }
    }

    pub fn delattr(&self, obj: &Value, name: &str) -> Result<(), Exc> {
        let removed = match obj {
            Value::Instance(inst) => inst.dict.borrow_mut().shift_remove(name).is_some(),
            Value::Class(c) => c.dict.borrow_mut().shift_remove(name).is_some(),
            Value::Module(m) => m.dict.borrow_mut().shift_remove(name).is_some(),
            _ => false,
        };
        if removed {
            Ok(())
        } else {
            Err(self.exc("AttributeError", format!("'{}' object has no attribute '{name}'", obj.type_name())))
        }
    }

    /// User-defined dunder method on an instance's class, if any.
    fn dunder(&self, v: &Value, name: &str) -> Option<Value> {
        let cls = v.instance_class()?;
        match cls.lookup(name)? {
            f @ (Value::Function(_) | Value::Native(_)) => Some(Value::BoundMethod(Rc::new((v.clone(), f)))),
            _ => None,
        }
    }

    // ----- protocols -----

    pub fn truthy(&self, v: &Value) -> Result<bool, Exc> {
        Ok(match v {
            Value::None => false,
            Value::Bool(b) => *b,
            Value::Int(i) => *i != 0,
            Value::Float(f) => *f != 0.0,
            Value::Str(s) => !s.is_empty(),
            Value::Bytes(b) => !b.is_empty(),
            Value::ByteArray(b) => !b.borrow().is_empty(),
            Value::List(l) => !l.borrow().is_empty(),
            Value::Tuple(t) => !t.is_empty(),
            Value::Dict(d) => !d.borrow().is_empty(),
            Value::Set(s) => !s.borrow().is_empty(),
            Value::Timedelta(us) => *us != 0,
            Value::Instance(_) => {
                if let Some(m) = self.dunder(v, "__bool__") {
                    let r = self.call(&m, vec![], vec![])?;
                    return self.truthy(&r);
                }
                if let Some(m) = self.dunder(v, "__len__") {
                    let r = self.call(&m, vec![], vec![])?;
                    return Ok(r.as_int().unwrap_or(0) != 0);
                }
                true
            }
            _ => true,
        })
    }

    pub fn len(&self, v: &Value) -> Result<usize, Exc> {
        Ok(match v {
            Value::Str(s) => s.chars().count(),
            Value::Bytes(b) => b.len(),
            Value::ByteArray(b) => b.borrow().len(),
            Value::List(l) => l.borrow().len(),
            Value::Tuple(t) => t.len(),
            Value::Dict(d) => d.borrow().len(),
            Value::Set(s) => s.borrow().len(),
            Value::Class(c) if c.is_enum() => c.enum_members.borrow().len(),
            Value::Instance(_) => match self.dunder(v, "__len__") {
                Some(m) => {
                    let r = self.call(&m, vec![], vec![])?;
                    r.as_int().unwrap_or(0).max(0) as usize
                }
                None => return Err(self.type_error(format!("object of type '{}' has no len()", v.type_name()))),
            },
            _ => return Err(self.type_error(format!("object of type '{}' has no len()", v.type_name()))),
        })
    }

    pub fn hash_key(&self, v: &Value) -> Result<HashKey, Exc> {
        Ok(match v {
            Value::None => HashKey::None,
            Value::Bool(b) => HashKey::Int(*b as i64),
            Value::Int(i) => HashKey::Int(*i),
            Value::Float(f) => {
                if f.fract() == 0.0 && f.is_finite() && f.abs() < 9.2e18 {
                    HashKey::Int(*f as i64)
                } else {
                    HashKey::Float(f.to_bits())
                }
            }
            Value::Str(s) => HashKey::Str(s.clone()),
            Value::Bytes(b) => HashKey::Bytes(b.clone()),
            Value::Tuple(t) => HashKey::Tuple(t.iter().map(|x| self.hash_key(x)).collect::<Result<_, _>>()?),
            Value::Timedelta(us) => HashKey::Duration(*us),
            Value::Type(t) => HashKey::Str(format!("<type {}>", t.name()).into()),
            Value::List(_) | Value::Dict(_) | Value::Set(_) | Value::ByteArray(_) => {
                return Err(self.type_error(format!("unhashable type: '{}'", v.type_name())))
            }
            Value::Instance(_) => match self.dunder(v, "__hash__") {
                Some(m) => {
                    let r = self.call(&m, vec![], vec![])?;
                    HashKey::Custom(r.as_int().ok_or_else(|| self.type_error("__hash__ must return int"))?)
                }
                None => HashKey::Id(v.identity().unwrap_or(0)),
            },
            other => HashKey::Id(other.identity().unwrap_or(0)),
        })
    }

    pub fn eq(&self, a: &Value, b: &Value) -> Result<bool, Exc> {
        use Value as V;
        Ok(match (a, b) {
            (V::None, V::None) => true,
            (V::Bool(_) | V::Int(_), V::Bool(_) | V::Int(_)) => a.as_int() == b.as_int(),
            (V::Float(x), V::Float(y)) => x == y,
            (V::Float(x), V::Int(_) | V::Bool(_)) | (V::Int(_) | V::Bool(_), V::Float(x)) => {
                let i = a.as_int().or(b.as_int()).unwrap_or(0);
                *x == i as f64
            }
            (V::Str(x), V::Str(y)) => x == y,
            (V::Bytes(x), V::Bytes(y)) => x == y,
            (V::Bytes(x), V::ByteArray(y)) | (V::ByteArray(y), V::Bytes(x)) => x.as_ref() == y.borrow().as_slice(),
            (V::ByteArray(x), V::ByteArray(y)) => *x.borrow() == *y.borrow(),
            (V::List(x), V::List(y)) => {
                if Rc::ptr_eq(x, y) {
                    return Ok(true);
                }
                let (xs, ys) = (x.borrow().clone(), y.borrow().clone());
                self.seq_eq(&xs, &ys)?
            }
            (V::Tuple(x), V::Tuple(y)) => self.seq_eq(x, y)?,
            (V::Dict(x), V::Dict(y)) => {
                if Rc::ptr_eq(x, y) {
                    return Ok(true);
                }
                let (xs, ys) = (x.borrow().clone(), y.borrow().clone());
                if xs.len() != ys.len() {
                    return Ok(false);
                }
                for (k, (_, xv)) in xs.iter() {
                    match ys.get(k) {
                        Some((_, yv)) => {
                            if !self.eq(xv, yv)? {
                                return Ok(false);
                            }
                        }
                        None => return Ok(false),
                    }
                }
                true
            }
            (V::Set(x), V::Set(y)) => {
                let (xs, ys) = (x.borrow(), y.borrow());
                xs.len() == ys.len() && xs.keys().all(|k| ys.contains_key(k))
            }
            (V::Timedelta(x), V::Timedelta(y)) => x == y,
            (V::Type(x), V::Type(y)) => x == y,
            (V::Instance(_), _) | (_, V::Instance(_)) => {
                if let Some(m) = self.dunder(a, "__eq__") {
                    let r = self.call(&m, vec![b.clone()], vec![])?;
                    return self.truthy(&r);
                }
                if let Some(m) = self.dunder(b, "__eq__") {
                    let r = self.call(&m, vec![a.clone()], vec![])?;
                    return self.truthy(&r);
                }
                a.is(b)
            }
            _ => a.is(b),
        })
    }

    fn seq_eq(&self, xs: &[Value], ys: &[Value]) -> Result<bool, Exc> {
        if xs.len() != ys.len() {
            return Ok(false);
        }
        for (x, y) in xs.iter().zip(ys) {
            if !self.eq(x, y)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn order(&self, a: &Value, b: &Value) -> Result<Ordering, Exc> {
        use Value as V;
        let fail = || self.type_error(format!("'<' not supported between instances of '{}' and '{}'", a.type_name(), b.type_name()));
        match (a, b) {
            (V::Bool(_) | V::Int(_), V::Bool(_) | V::Int(_)) => Ok(a.as_int().cmp(&b.as_int())),
            (V::Float(_) | V::Int(_) | V::Bool(_), V::Float(_) | V::Int(_) | V::Bool(_)) => {
                let (x, y) = (to_f64(a).unwrap_or(0.0), to_f64(b).unwrap_or(0.0));
                x.partial_cmp(&y).ok_or_else(fail)
            }
            (V::Str(x), V::Str(y)) => Ok(x.cmp(y)),
            (V::Bytes(x), V::Bytes(y)) => Ok(x.cmp(y)),
            (V::Timedelta(x), V::Timedelta(y)) => Ok(x.cmp(y)),
            (V::List(_) | V::Tuple(_), V::List(_) | V::Tuple(_)) if std::mem::discriminant(a) == std::mem::discriminant(b) => {
                let xs = a.seq_items().unwrap_or_default();
                let ys = b.seq_items().unwrap_or_default();
                for (x, y) in xs.iter().zip(ys.iter()) {
                    if !self.eq(x, y)? {
                        return self.order(x, y);
                    }
                }
                Ok(xs.len().cmp(&ys.len()))
            }
            (V::Instance(_), _) | (_, V::Instance(_)) => {
                if let Some(m) = self.dunder(a, "__lt__") {
                    let r = self.call(&m, vec![b.clone()], vec![])?;
                    if self.truthy(&r)? {
                        return Ok(Ordering::Less);
                    }
                    return Ok(if self.eq(a, b)? { Ordering::Equal } else { Ordering::Greater });
                }
                if let Some(m) = self.dunder(b, "__lt__") {
                    let r = self.call(&m, vec![a.clone()], vec![])?;
                    if self.truthy(&r)? {
                        return Ok(Ordering::Greater);
                    }
                    return Ok(if self.eq(a, b)? { Ordering::Equal } else { Ordering::Less });
                }
                Err(fail())
            }
            _ => Err(fail()),
        }
    }

    fn compare(&self, op: CmpOp, a: &Value, b: &Value) -> Result<bool, Exc> {
        Ok(match op {
            CmpOp::Eq => self.eq(a, b)?,
            CmpOp::NotEq => {
                if let Some(m) = self.dunder(a, "__ne__") {
                    let r = self.call(&m, vec![b.clone()], vec![])?;
                    return self.truthy(&r);
                }
                !self.eq(a, b)?
            }
            CmpOp::Is => a.is(b),
            CmpOp::IsNot => !a.is(b),
            CmpOp::In => self.contains(b, a)?,
            CmpOp::NotIn => !self.contains(b, a)?,
            CmpOp::Lt | CmpOp::LtE | CmpOp::Gt | CmpOp::GtE => {
                let dname = match op {
                    CmpOp::Lt => "__lt__",
                    CmpOp::LtE => "__le__",
                    CmpOp::Gt => "__gt__",
                    _ => "__ge__",
                };
                if let Some(m) = self.dunder(a, dname) {
                    let r = self.call(&m, vec![b.clone()], vec![])?;
                    return self.truthy(&r);
                }
                if let (Value::Float(x), Value::Float(y)) = (a, b) {
                    if x.is_nan() || y.is_nan() {
                        return Ok(false);
                    }
                }
                if let (Value::Set(_), Value::Set(_)) = (a, b) {
                    let sub = |x: &Value, y: &Value| match (x, y) {
                        (Value::Set(x), Value::Set(y)) => x.borrow().keys().all(|k| y.borrow().contains_key(k)),
                        _ => false,
                    };
                    return Ok(match op {
                        CmpOp::Lt => sub(a, b) && self.len(a)? < self.len(b)?,
                        CmpOp::LtE => sub(a, b),
                        CmpOp::Gt => sub(b, a) && self.len(b)? < self.len(a)?,
                        _ => sub(b, a),
                    });
                }
                let o = self.order(a, b)?;
                match op {
                    CmpOp::Lt => o == Ordering::Less,
                    CmpOp::LtE => o != Ordering::Greater,
                    CmpOp::Gt => o == Ordering::Greater,
                    _ => o != Ordering::Less,
                }
            }
        })
    }

    pub fn contains(&self, container: &Value, item: &Value) -> Result<bool, Exc> {
        match container {
            Value::Str(s) => match item {
                Value::Str(sub) => Ok(s.contains(sub.as_ref())),
                _ => Err(self.type_error("'in <string>' requires string as left operand")),
            },
            Value::Bytes(b) => match item {
                Value::Int(i) => Ok(b.contains(&(*i as u8))),
                Value::Bytes(sub) => Ok(sub.is_empty() || b.windows(sub.len()).any(|w| w == sub.as_ref())),
                _ => Err(self.type_error("a bytes-like object is required")),
            },
            Value::Dict(d) => {
                let k = self.hash_key(item)?;
                Ok(d.borrow().contains_key(&k))
            }
            Value::Set(s) => {
                let k = self.hash_key(item)?;
                Ok(s.borrow().contains_key(&k))
            }
            Value::Instance(_) if self.dunder(container, "__contains__").is_some() => {
                let m = self.dunder(container, "__contains__").expect("checked");
                let r = self.call(&m, vec![item.clone()], vec![])?;
                self.truthy(&r)
            }
            _ => {
                for x in self.collect(container)? {
                    if self.eq(&x, item)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    pub fn looper(&self, v: &Value) -> Result<Looper, Exc> {
        Ok(match v {
            Value::List(l) => Looper::List(l.clone(), 0),
            Value::Iter(s) => Looper::Shared(s.clone()),
            Value::Tuple(t) => Looper::Owned(t.as_ref().clone().into_iter()),
            Value::Str(s) => Looper::Owned(s.chars().map(|c| Value::str(c.to_string())).collect::<Vec<_>>().into_iter()),
            Value::Bytes(b) => Looper::Owned(b.iter().map(|x| Value::Int(*x as i64)).collect::<Vec<_>>().into_iter()),
            Value::ByteArray(b) => Looper::Owned(b.borrow().iter().map(|x| Value::Int(*x as i64)).collect::<Vec<_>>().into_iter()),
            Value::Dict(d) => Looper::Owned(d.borrow().values().map(|(k, _)| k.clone()).collect::<Vec<_>>().into_iter()),
            Value::Set(s) => Looper::Owned(s.borrow().values().cloned().collect::<Vec<_>>().into_iter()),
            Value::StringIO(s) => {
                let st = s.borrow();
                let rest: String = st.buf[st.pos.min(st.buf.len())..].iter().collect();
                drop(st);
                let lines: Vec<Value> = rest.split_inclusive('\n').map(Value::str).collect();
                s.borrow_mut().pos = s.borrow().buf.len();
                Looper::Owned(lines.into_iter())
            }
            Value::Class(c) if c.is_enum() => Looper::Owned(self.enum_members(c).into_iter()),
            Value::Instance(_) => {
                if let Some(m) = self.dunder(v, "__iter__") {
                    let it = self.call(&m, vec![], vec![])?;
                    if it.is(v) || (matches!(it, Value::Instance(_)) && self.dunder(&it, "__next__").is_some()) {
                        return Ok(Looper::User(it));
                    }
                    return self.looper(&it);
                }
                if self.dunder(v, "__next__").is_some() {
                    return Ok(Looper::User(v.clone()));
                }
                if self.dunder(v, "__getitem__").is_some() && self.dunder(v, "__len__").is_some() {
                    let n = self.len(v)?;
                    let mut out = Vec::with_capacity(n);
                    for i in 0..n {
                        out.push(self.get_item(v, &Value::Int(i as i64))?);
                    }
                    return Ok(Looper::Owned(out.into_iter()));
                }
                return Err(self.type_error(format!("'{}' object is not iterable", v.type_name())));
            }
            _ => return Err(self.type_error(format!("'{}' object is not iterable", v.type_name()))),
        })
    }

    /// Drains any iterable into a vector.
    pub fn collect(&self, v: &Value) -> Result<Vec<Value>, Exc> {
        if let Value::List(l) = v {
            return Ok(l.borrow().clone());
        }
        if let Value::Tuple(t) = v {
            return Ok(t.as_ref().clone());
        }
        let mut l = self.looper(v)?;
        let mut out = Vec::new();
        while let Some(x) = l.next(self)? {
            out.push(x);
        }
        Ok(out)
    }

    /// `iter(v)`: list and tuple iterators stay backed by their sequence.
    pub fn make_iter(&self, v: &Value) -> Result<Value, Exc> {
        match v {
            Value::Iter(_) => Ok(v.clone()),
            Value::List(_) | Value::Tuple(_) => Ok(Value::Iter(new_ref(IterState { source: IterSource::Backed(v.clone()), pos: 0 }))),
            Value::Instance(_) => {
                if let Some(m) = self.dunder(v, "__iter__") {
                    return self.call(&m, vec![], vec![]);
                }
                if self.dunder(v, "__next__").is_some() {
                    return Ok(v.clone());
                }
                Ok(Value::Iter(new_ref(IterState { source: IterSource::Owned(self.collect(v)?), pos: 0 })))
            }
            _ => Ok(Value::Iter(new_ref(IterState { source: IterSource::Owned(self.collect(v)?), pos: 0 }))),
        }
    }

    pub fn next_value(&self, it: &Value) -> Result<Option<Value>, Exc> {
        match it {
            Value::Iter(s) => Ok(s.borrow_mut().next_item()),
            Value::Instance(_) => match self.call_method(it, "__next__", vec![]) {
                Ok(v) => Ok(Some(v)),
                Err(e) if self.exc_is(&e, "StopIteration") => Ok(None),
                Err(e) => Err(e),
            },
            _ => Err(self.type_error(format!("'{}' object is not an iterator", it.type_name()))),
        }
    }

    // ----- string conversion -----

    pub fn to_str(&self, v: &Value) -> Result<String, Exc> {
        match v {
            Value::Str(s) => Ok(s.to_string()),
            Value::Timedelta(us) => Ok(timedelta_str(*us)),
            Value::Instance(inst) => {
                if let Some(m) = self.dunder(v, "__str__") {
                    let r = self.call(&m, vec![], vec![])?;
                    return Ok(r.as_str().map(str::to_string).unwrap_or_else(|| repr(&r)));
                }
                let cls = inst.class.borrow().clone();
                if cls.is_exception() {
                    return Ok(exception_message(v));
                }
                if cls.is_enum() {
                    if let Some(Value::Str(n)) = inst.dict.borrow().get("_name_") {
                        return Ok(format!("{}.{}", cls.name, n));
                    }
                }
                self.repr(v)
            }
            _ => self.repr(v),
        }
    }

    pub fn repr(&self, v: &Value) -> Result<String, Exc> {
        match v {
            Value::Instance(_) => {
                if let Some(m) = self.dunder(v, "__repr__") {
                    let r = self.call(&m, vec![], vec![])?;
                    return Ok(r.as_str().map(str::to_string).unwrap_or_else(|| repr(&r)));
                }
                Ok(repr(v))
            }
            Value::List(l) => {
                if !self.has_user_repr(v, 0) {
                    return Ok(repr(v));
                }
                let items = l.borrow().clone();
                Ok(format!("[{}]", self.join_repr(&items)?))
            }
            Value::Tuple(t) => {
                if !self.has_user_repr(v, 0) {
                    return Ok(repr(v));
                }
                if t.len() == 1 {
                    return Ok(format!("({},)", self.repr(&t[0])?));
                }
                Ok(format!("({})", self.join_repr(t)?))
            }
            Value::Dict(d) => {
                if !self.has_user_repr(v, 0) {
                    return Ok(repr(v));
                }
                let items: Vec<(Value, Value)> = d.borrow().values().cloned().collect();
                let mut parts = Vec::new();
                for (k, x) in items {
                    parts.push(format!("{}: {}", self.repr(&k)?, self.repr(&x)?));
                }
                Ok(format!("{{{}}}", parts.join(", ")))
            }
            Value::Set(s) => {
                if !self.has_user_repr(v, 0) {
                    return Ok(repr(v));
                }
                let items: Vec<Value> = s.borrow().values().cloned().collect();
                Ok(format!("{{{}}}", self.join_repr(&items)?))
            }
            _ => Ok(repr(v)),
        }
    }

    fn join_repr(&self, items: &[Value]) -> Result<String, Exc> {
        let mut parts = Vec::with_capacity(items.len());
        for x in items {
            parts.push(self.repr(x)?);
        }
        Ok(parts.join(", "))
    }

    fn has_user_repr(&self, v: &Value, depth: usize) -> bool {
        if depth > 8 {
            return false;
        }
        match v {
            Value::Instance(_) => self.dunder(v, "__repr__").is_some(),
            Value::List(l) => l.borrow().iter().any(|x| self.has_user_repr(x, depth + 1)),
            Value::Tuple(t) => t.iter().any(|x| self.has_user_repr(x, depth + 1)),
            Value::Dict(d) => d.borrow().values().any(|(k, x)| self.has_user_repr(k, depth + 1) || self.has_user_repr(x, depth + 1)),
            Value::Set(s) => s.borrow().values().any(|x| self.has_user_repr(x, depth + 1)),
            _ => false,
        }
    }

    pub fn format_value(&self, v: &Value, spec: &str) -> Result<String, Exc> {
        crate::builtins::format_spec(self, v, spec)
    }

    // ----- operators -----

    fn unary(&self, op: UnaryOp, v: &Value) -> Result<Value, Exc> {
        match op {
            UnaryOp::Not => Ok(Value::Bool(!self.truthy(v)?)),
            UnaryOp::Neg => match v {
                Value::Int(_) | Value::Bool(_) => {
                    v.as_int().and_then(i64::checked_neg).map(Value::Int).ok_or_else(|| self.exc("OverflowError", "integer overflow"))
                }
                Value::Float(f) => Ok(Value::Float(-f)),
                Value::Timedelta(us) => Ok(Value::Timedelta(-us)),
                Value::Instance(_) => match self.dunder(v, "__neg__") {
                    Some(m) => self.call(&m, vec![], vec![]),
                    None => Err(self.type_error(format!("bad operand type for unary -: '{}'", v.type_name()))),
                },
                _ => Err(self.type_error(format!("bad operand type for unary -: '{}'", v.type_name()))),
            },
            UnaryOp::Pos => match v {
                Value::Int(_) | Value::Bool(_) => Ok(Value::Int(v.as_int().unwrap_or(0))),
                Value::Float(_) | Value::Timedelta(_) => Ok(v.clone()),
                _ => Err(self.type_error(format!("bad operand type for unary +: '{}'", v.type_name()))),
            },
            UnaryOp::Invert => match v.as_int() {
                Some(i) => Ok(Value::Int(!i)),
                None => Err(self.type_error(format!("bad operand type for unary ~: '{}'", v.type_name()))),
            },
        }
    }

    fn inplace_binop(&self, op: BinOp, a: &Value, b: &Value) -> Result<Value, Exc> {
        match (op, a) {
            (BinOp::Add, Value::List(l)) => {
                let items = self.collect(b)?;
                l.borrow_mut().extend(items);
                return Ok(a.clone());
            }
            (BinOp::Mul, Value::List(l)) => {
                if let Some(n) = b.as_int() {
                    let items = l.borrow().clone();
                    let mut out = Vec::new();
                    for _ in 0..n.max(0) {
                        out.extend(items.iter().cloned());
                    }
                    *l.borrow_mut() = out;
                    return Ok(a.clone());
                }
            }
            (BinOp::Add, Value::ByteArray(buf)) => {
                let bytes = crate::builtins::bytes_of(self, b)?;
                buf.borrow_mut().extend(bytes);
                return Ok(a.clone());
            }
            (BinOp::BitOr, Value::Set(s)) => {
                if let Value::Set(o) = b {
                    let items: Vec<(HashKey, Value)> = o.borrow().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
                    s.borrow_mut().extend(items);
                    return Ok(a.clone());
                }
            }
            (BinOp::BitOr, Value::Dict(d)) => {
                if let Value::Dict(o) = b {
                    let items: Vec<(HashKey, (Value, Value))> = o.borrow().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
                    d.borrow_mut().extend(items);
                    return Ok(a.clone());
                }
            }
            (_, Value::Instance(_)) => {
                if let Some(m) = self.dunder(a, &format!("__i{}__", op_dunder(op))) {
                    return self.call(&m, vec![b.clone()], vec![]);
                }
            }
            _ => {}
        }
        self.binop(op, a, b)
    }

    pub fn binop(&self, op: BinOp, a: &Value, b: &Value) -> Result<Value, Exc> {
        use Value as V;
        let overflow = || self.exc("OverflowError", "integer overflow");
        match (a, b) {
            (V::Int(_) | V::Bool(_), V::Int(_) | V::Bool(_)) => {
                let (x, y) = (a.as_int().unwrap_or(0), b.as_int().unwrap_or(0));
                return match op {
                    BinOp::Add => x.checked_add(y).map(V::Int).ok_or_else(overflow),
                    BinOp::Sub => x.checked_sub(y).map(V::Int).ok_or_else(overflow),
                    BinOp::Mul => x.checked_mul(y).map(V::Int).ok_or_else(overflow),
                    BinOp::Div => {
                        if y == 0 {
                            Err(self.exc("ZeroDivisionError", "division by zero"))
                        } else {
                            Ok(V::Float(x as f64 / y as f64))
                        }
                    }
                    BinOp::FloorDiv => {
                        if y == 0 {
                            Err(self.exc("ZeroDivisionError", "integer division or modulo by zero"))
                        } else {
                            let q = x.checked_div(y).ok_or_else(overflow)?;
                            Ok(V::Int(if (x % y != 0) && ((x < 0) != (y < 0)) { q - 1 } else { q }))
                        }
                    }
                    BinOp::Mod => {
                        if y == 0 {
                            Err(self.exc("ZeroDivisionError", "integer division or modulo by zero"))
                        } else {
                            let r = x.checked_rem(y).unwrap_or(0);
                            Ok(V::Int(if r != 0 && ((r < 0) != (y < 0)) { r + y } else { r }))
                        }
                    }
                    BinOp::Pow => {
                        if y < 0 {
                            Ok(V::Float((x as f64).powf(y as f64)))
                        } else {
                            u32::try_from(y).ok().and_then(|e| x.checked_pow(e)).map(V::Int).ok_or_else(overflow)
                        }
                    }
                    BinOp::BitAnd => Ok(if matches!((a, b), (V::Bool(_), V::Bool(_))) { V::Bool(x & y != 0) } else { V::Int(x & y) }),
                    BinOp::BitOr => Ok(if matches!((a, b), (V::Bool(_), V::Bool(_))) { V::Bool(x | y != 0) } else { V::Int(x | y) }),
                    BinOp::BitXor => Ok(if matches!((a, b), (V::Bool(_), V::Bool(_))) { V::Bool(x ^ y != 0) } else { V::Int(x ^ y) }),
                    BinOp::Shl => {
                        if y < 0 {
                            Err(self.exc("ValueError", "negative shift count"))
                        } else if y >= 64 || (x != 0 && (x.leading_zeros().min(x.leading_ones()) as i64) <= y) {
                            if x == 0 {
                                Ok(V::Int(0))
                            } else {
                                Err(overflow())
                            }
                        } else {
                            Ok(V::Int(x << y))
                        }
                    }
                    BinOp::Shr => {
                        if y < 0 {
                            Err(self.exc("ValueError", "negative shift count"))
                        } else {
                            Ok(V::Int(x >> y.min(63)))
                        }
                    }
                };
            }
            (V::Float(_) | V::Int(_) | V::Bool(_), V::Float(_) | V::Int(_) | V::Bool(_)) => {
                let (x, y) = (to_f64(a).unwrap_or(0.0), to_f64(b).unwrap_or(0.0));
                let r = match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(self.exc("ZeroDivisionError", "float division by zero"));
                        }
                        x / y
                    }
                    BinOp::FloorDiv => {
                        if y == 0.0 {
                            return Err(self.exc("ZeroDivisionError", "float floor division by zero"));
                        }
                        (x / y).floor()
                    }
                    BinOp::Mod => {
                        if y == 0.0 {
                            return Err(self.exc("ZeroDivisionError", "float modulo"));
                        }
                        let r = x % y;
                        if r != 0.0 && ((r < 0.0) != (y < 0.0)) {
                            r + y
                        } else {
                            r
                        }
                    }
                    BinOp::Pow => x.powf(y),
                    _ => return Err(self.unsupported(op, a, b)),
                };
                return Ok(V::Float(r));
            }
            (V::Str(x), V::Str(y)) if op == BinOp::Add => return Ok(V::str(format!("{x}{y}"))),
            (V::Str(x), V::Int(_) | V::Bool(_)) | (V::Int(_) | V::Bool(_), V::Str(x)) if op == BinOp::Mul => {
                let n = a.as_int().or(b.as_int()).unwrap_or(0).max(0) as usize;
                return Ok(V::str(x.repeat(n)));
            }
            (V::Str(x), _) if op == BinOp::Mod => return crate::builtins::percent_format(self, x, b).map(V::str),
            (V::Bytes(x), V::Bytes(y)) if op == BinOp::Add => {
                let mut v = x.to_vec();
                v.extend_from_slice(y);
                return Ok(V::bytes(v));
            }
            (V::ByteArray(x), V::Bytes(_) | V::ByteArray(_)) if op == BinOp::Add => {
                let mut v = x.borrow().clone();
                v.extend(crate::builtins::bytes_of(self, b)?);
                return Ok(V::ByteArray(new_ref(v)));
            }
            (V::List(x), V::List(y)) if op == BinOp::Add => {
                let mut v = x.borrow().clone();
                v.extend(y.borrow().iter().cloned());
                return Ok(V::list(v));
            }
            (V::Tuple(x), V::Tuple(y)) if op == BinOp::Add => {
                let mut v = x.as_ref().clone();
                v.extend(y.iter().cloned());
                return Ok(V::tuple(v));
            }
            (V::List(_) | V::Tuple(_), V::Int(_)) | (V::Int(_), V::List(_) | V::Tuple(_)) if op == BinOp::Mul => {
                let (seq, n) = if let V::Int(n) = b { (a, *n) } else { (b, a.as_int().unwrap_or(0)) };
                let items = seq.seq_items().unwrap_or_default();
                let mut out = Vec::new();
                for _ in 0..n.max(0) {
                    out.extend(items.iter().cloned());
                }
                return Ok(if matches!(seq, V::List(_)) { V::list(out) } else { V::tuple(out) });
            }
            (V::Set(x), V::Set(y)) => {
                let (xs, ys) = (x.borrow().clone(), y.borrow().clone());
                let out: SetMap = match op {
                    BinOp::BitOr => {
                        let mut m = xs;
                        m.extend(ys);
                        m
                    }
                    BinOp::BitAnd => xs.into_iter().filter(|(k, _)| ys.contains_key(k)).collect(),
                    BinOp::Sub => xs.into_iter().filter(|(k, _)| !ys.contains_key(k)).collect(),
                    BinOp::BitXor => {
                        let mut m: SetMap = xs.iter().filter(|(k, _)| !ys.contains_key(*k)).map(|(k, v)| (k.clone(), v.clone())).collect();
                        m.extend(ys.into_iter().filter(|(k, _)| !xs.contains_key(k)));
                        m
                    }
                    _ => return Err(self.unsupported(op, a, b)),
                };
                return Ok(V::Set(new_ref(out)));
            }
            (V::Dict(x), V::Dict(y)) if op == BinOp::BitOr => {
                let mut m = x.borrow().clone();
                m.extend(y.borrow().iter().map(|(k, v)| (k.clone(), v.clone())));
                return Ok(V::Dict(new_ref(m)));
            }
            (V::Timedelta(x), V::Timedelta(y)) => {
                return match op {
                    BinOp::Add => x.checked_add(*y).map(V::Timedelta).ok_or_else(overflow),
                    BinOp::Sub => x.checked_sub(*y).map(V::Timedelta).ok_or_else(overflow),
                    BinOp::Div if *y != 0 => Ok(V::Float(*x as f64 / *y as f64)),
                    BinOp::FloorDiv if *y != 0 => Ok(V::Int(x.div_euclid(*y))),
                    BinOp::Mod if *y != 0 => Ok(V::Timedelta(x.rem_euclid(*y))),
                    BinOp::Div | BinOp::FloorDiv | BinOp::Mod => Err(self.exc("ZeroDivisionError", "integer division or modulo by zero")),
                    _ => Err(self.unsupported(op, a, b)),
                };
            }
            (V::Timedelta(x), V::Int(_) | V::Float(_)) | (V::Int(_) | V::Float(_), V::Timedelta(x)) if op == BinOp::Mul => {
                let k = if matches!(a, V::Timedelta(_)) { b } else { a };
                return Ok(V::Timedelta(match k {
                    V::Int(n) => x.checked_mul(*n).ok_or_else(overflow)?,
                    V::Float(f) => (*x as f64 * f).round_ties_even() as i64,
                    _ => 0,
                }));
            }
            (V::Timedelta(x), V::Int(_) | V::Float(_)) if matches!(op, BinOp::Div | BinOp::FloorDiv) => {
                let d = to_f64(b).unwrap_or(0.0);
                if d == 0.0 {
                    return Err(self.exc("ZeroDivisionError", "division by zero"));
                }
                let q = *x as f64 / d;
                return Ok(V::Timedelta(if op == BinOp::FloorDiv { q.floor() as i64 } else { q.round_ties_even() as i64 }));
            }
            _ => {}
        }
        let name = op_dunder(op);
        if let Some(m) = self.dunder(a, &format!("__{name}__")) {
            return self.call(&m, vec![b.clone()], vec![]);
        }
        if let Some(m) = self.dunder(b, &format!("__r{name}__")) {
            return self.call(&m, vec![a.clone()], vec![]);
        }
        Err(self.unsupported(op, a, b))
    }

    fn unsupported(&self, op: BinOp, a: &Value, b: &Value) -> Exc {
        self.type_error(format!("unsupported operand type(s) for {}: '{}' and '{}'", op_symbol(op), a.type_name(), b.type_name()))
    }

    // ----- subscripts -----

    pub fn get_item(&self, obj: &Value, idx: &Value) -> Result<Value, Exc> {
        match obj {
            Value::List(_) | Value::Tuple(_) | Value::Str(_) | Value::Bytes(_) | Value::ByteArray(_) => {
                let len = self.len(obj)?;
                let i = idx.as_int().ok_or_else(|| self.type_error(format!("{} indices must be integers", obj.type_name())))?;
                let j = if i < 0 { i + len as i64 } else { i };
                if j < 0 || j >= len as i64 {
                    return Err(self.exc("IndexError", format!("{} index out of range", obj.type_name())));
                }
                let j = j as usize;
                Ok(match obj {
                    Value::List(l) => l.borrow()[j].clone(),
                    Value::Tuple(t) => t[j].clone(),
                    Value::Str(s) => Value::str(s.chars().nth(j).map(String::from).unwrap_or_default()),
                    Value::Bytes(b) => Value::Int(b[j] as i64),
                    Value::ByteArray(b) => Value::Int(b.borrow()[j] as i64),
                    _ => unreachable!(),
                })
            }
            Value::Dict(d) => {
                let k = self.hash_key(idx)?;
                let found = d.borrow().get(&k).map(|(_, v)| v.clone());
                found.ok_or_else(|| Exc::new(self.new_exception(&self.builtin_class("KeyError").expect("builtin"), vec![idx.clone()])))
            }
            Value::Instance(_) => match self.dunder(obj, "__getitem__") {
                Some(m) => self.call(&m, vec![idx.clone()], vec![]),
                None => Err(self.type_error(format!("'{}' object is not subscriptable", obj.type_name()))),
            },
            Value::Class(c) if c.is_enum() => {
                let name = idx.as_str().unwrap_or_default();
                if c.enum_members.borrow().iter().any(|m| m == name) {
                    Ok(c.dict.borrow().get(name).cloned().unwrap_or(Value::None))
                } else {
                    Err(Exc::new(self.new_exception(&self.builtin_class("KeyError").expect("builtin"), vec![idx.clone()])))
                }
            }
            Value::Type(_) | Value::Class(_) => Ok(obj.clone()),
            _ => Err(self.type_error(format!("'{}' object is not subscriptable", obj.type_name()))),
        }
    }

    fn get_slice(&self, obj: &Value, lo: Option<i64>, hi: Option<i64>, step: Option<i64>) -> Result<Value, Exc> {
        let len = self.len(obj)?;
        let idxs = slice_indices(len, lo, hi, step);
        Ok(match obj {
            Value::List(l) => {
                let l = l.borrow();
                Value::list(idxs.iter().map(|&i| l[i].clone()).collect())
            }
            Value::Tuple(t) => Value::tuple(idxs.iter().map(|&i| t[i].clone()).collect()),
            Value::Str(s) => {
                let chars: Vec<char> = s.chars().collect();
                Value::str(idxs.iter().map(|&i| chars[i]).collect::<String>())
            }
            Value::Bytes(b) => Value::bytes(idxs.iter().map(|&i| b[i]).collect::<Vec<u8>>()),
            Value::ByteArray(b) => {
                let b = b.borrow();
                Value::ByteArray(new_ref(idxs.iter().map(|&i| b[i]).collect()))
            }
            _ => return Err(self.type_error(format!("'{}' object is not subscriptable", obj.type_name()))),
        })
    }

    fn set_slice(&self, obj: &Value, lo: Option<i64>, hi: Option<i64>, step: Option<i64>, v: Value) -> Result<(), Exc> {
        let items = self.collect(&v)?;
        match obj {
            Value::List(l) => {
                let len = l.borrow().len();
                if step.unwrap_or(1) == 1 {
                    let (start, stop) = slice_bounds(len, lo, hi);
                    let stop = stop.max(start);
                    l.borrow_mut().splice(start..stop, items);
                    Ok(())
                } else {
                    let idxs = slice_indices(len, lo, hi, step);
                    if idxs.len() != items.len() {
                        return Err(self.exc("ValueError", "attempt to assign sequence of wrong size to extended slice"));
                    }
                    for (i, x) in idxs.into_iter().zip(items) {
                        l.borrow_mut()[i] = x;
                    }
                    Ok(())
                }
            }
            Value::ByteArray(b) => {
                let len = b.borrow().len();
                let (start, stop) = slice_bounds(len, lo, hi);
                let bytes: Vec<u8> = items.iter().map(|x| x.as_int().unwrap_or(0) as u8).collect();
                b.borrow_mut().splice(start..stop.max(start), bytes);
                Ok(())
            }
            _ => Err(self.type_error(format!("'{}' object does not support slice assignment", obj.type_name()))),
        }
    }

    pub fn set_item(&self, obj: &Value, idx: Value, v: Value) -> Result<(), Exc> {
        match obj {
            Value::List(l) => {
                let len = l.borrow().len() as i64;
                let i = idx.as_int().ok_or_else(|| self.type_error("list indices must be integers"))?;
                let j = if i < 0 { i + len } else { i };
                if j < 0 || j >= len {
                    return Err(self.exc("IndexError", "list assignment index out of range"));
                }
                l.borrow_mut()[j as usize] = v;
                Ok(())
            }
            Value::ByteArray(b) => {
                let len = b.borrow().len() as i64;
                let i = idx.as_int().ok_or_else(|| self.type_error("bytearray indices must be integers"))?;
                let j = if i < 0 { i + len } else { i };
                if j < 0 || j >= len {
                    return Err(self.exc("IndexError", "bytearray index out of range"));
                }
                let byte = v.as_int().filter(|x| (0..256).contains(x)).ok_or_else(|| self.exc("ValueError", "byte must be in range(0, 256)"))?;
                b.borrow_mut()[j as usize] = byte as u8;
                Ok(())
            }
            Value::Dict(d) => {
                let k = self.hash_key(&idx)?;
                let mut d = d.borrow_mut();
                match d.get_mut(&k) {
                    Some(slot) => slot.1 = v,
                    None => {
                        d.insert(k, (idx, v));
                    }
                }
                Ok(())
            }
            Value::Instance(_) => match self.dunder(obj, "__setitem__") {
                Some(m) => self.call(&m, vec![idx, v], vec![]).map(|_| ()),
                None => Err(self.type_error(format!("'{}' object does not support item assignment", obj.type_name()))),
            },
            _ => Err(self.type_error(format!("'{}' object does not support item assignment", obj.type_name()))),
        }
    }

    pub fn del_item(&self, obj: &Value, idx: &Value) -> Result<(), Exc> {
        match obj {
            Value::List(l) => {
                let len = l.borrow().len() as i64;
                let i = idx.as_int().ok_or_else(|| self.type_error("list indices must be integers"))?;
                let j = if i < 0 { i + len } else { i };
                if j < 0 || j >= len {
                    return Err(self.exc("IndexError", "list assignment index out of range"));
                }
                l.borrow_mut().remove(j as usize);
                Ok(())
            }
            Value::Dict(d) => {
                let k = self.hash_key(idx)?;
                if d.borrow_mut().shift_remove(&k).is_none() {
                    return Err(Exc::new(self.new_exception(&self.builtin_class("KeyError").expect("builtin"), vec![idx.clone()])));
                }
                Ok(())
            }
            Value::Instance(_) => match self.dunder(obj, "__delitem__") {
                Some(m) => self.call(&m, vec![idx.clone()], vec![]).map(|_| ()),
                None => Err(self.type_error(format!("'{}' object doesn't support item deletion", obj.type_name()))),
            },
            _ => Err(self.type_error(format!("'{}' object doesn't support item deletion", obj.type_name()))),
        }
    }

    /// `isinstance(v, t)` for a single class or type.
    pub fn isinstance(&self, v: &Value, t: &Value) -> Result<bool, Exc> {
        Ok(match t {
            Value::Class(c) => v.instance_class().is_some_and(|vc| vc.is_subclass_of(c)),
            Value::Type(bt) => matches_builtin_type(v, *bt),
            Value::Tuple(items) => {
                for x in items.iter() {
                    if self.isinstance(v, x)? {
                        return Ok(true);
                    }
                }
                false
            }
            _ => return Err(self.type_error("isinstance() arg 2 must be a type or tuple of types")),
        })
    }
}

/// Allocates an instance without running `__init__`.
pub fn new_instance(cls: &Rc<Class>) -> Value {
    Value::Instance(Rc::new(Instance { class: RefCell::new(cls.clone()), dict: RefCell::new(IndexMap::new()) }))
}

pub fn matches_builtin_type(v: &Value, t: BuiltinType) -> bool {
    use BuiltinType as T;
    match t {
        T::Object => true,
        T::NoneType => v.is_none(),
        T::Bool => matches!(v, Value::Bool(_)),
        T::Int => matches!(v, Value::Int(_) | Value::Bool(_)),
        T::Float => matches!(v, Value::Float(_)),
        T::Str => matches!(v, Value::Str(_)),
        T::Bytes => matches!(v, Value::Bytes(_)),
        T::ByteArray => matches!(v, Value::ByteArray(_)),
        T::List => matches!(v, Value::List(_)),
        T::Tuple => matches!(v, Value::Tuple(_)),
        T::Dict => matches!(v, Value::Dict(_)),
        T::Set => matches!(v, Value::Set(_)),
        T::BytesIO => matches!(v, Value::BytesIO(_)),
        T::StringIO => matches!(v, Value::StringIO(_)),
        T::Timedelta => matches!(v, Value::Timedelta(_)),
        T::Iter => matches!(v, Value::Iter(_)),
        T::Type => matches!(v, Value::Class(_) | Value::Type(_)),
        T::Function => matches!(v, Value::Function(_)),
    }
}

fn bind(v: Value, obj: &Value, cls: &Rc<Class>) -> Value {
    match v {
        Value::Function(_) | Value::Native(_) => Value::BoundMethod(Rc::new((obj.clone(), v))),
        Value::StaticMethod(f) => f.as_ref().clone(),
        Value::ClassMethod(f) => Value::BoundMethod(Rc::new((Value::Class(cls.clone()), f.as_ref().clone()))),
        other => other,
    }
}

fn set_owner(v: &Value, cls: &Rc<Class>) {
    match v {
        Value::Function(f) => *f.owner.borrow_mut() = Some(Rc::downgrade(cls)),
        Value::StaticMethod(inner) | Value::ClassMethod(inner) => set_owner(inner, cls),
        Value::Property(p) => {
            set_owner(&p.getter, cls);
            if let Some(s) = &p.setter {
                set_owner(s, cls);
            }
        }
        _ => {}
    }
}

pub fn to_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Int(i) => Some(*i as f64),
        Value::Bool(b) => Some(*b as i64 as f64),
        _ => None,
    }
}

fn op_dunder(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "add",
        BinOp::Sub => "sub",
        BinOp::Mul => "mul",
        BinOp::Div => "truediv",
        BinOp::FloorDiv => "floordiv",
        BinOp::Mod => "mod",
        BinOp::Pow => "pow",
        BinOp::BitAnd => "and",
        BinOp::BitOr => "or",
        BinOp::BitXor => "xor",
        BinOp::Shl => "lshift",
        BinOp::Shr => "rshift",
    }
}

fn op_symbol(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::FloorDiv => "//",
        BinOp::Mod => "%",
        BinOp::Pow => "**",
        BinOp::BitAnd => "&",
        BinOp::BitOr => "|",
        BinOp::BitXor => "^",
        BinOp::Shl => "<<",
        BinOp::Shr => ">>",
    }
}

fn slice_bounds(len: usize, lo: Option<i64>, hi: Option<i64>) -> (usize, usize) {
    let len = len as i64;
    let norm = |x: i64| if x < 0 { (x + len).max(0) } else { x.min(len) };
    (lo.map(norm).unwrap_or(0) as usize, hi.map(norm).unwrap_or(len) as usize)
}

/// Indices selected by `[lo:hi:step]` on a sequence of length `len`.
pub fn slice_indices(len: usize, lo: Option<i64>, hi: Option<i64>, step: Option<i64>) -> Vec<usize> {
    let step = step.unwrap_or(1);
    let n = len as i64;
    let mut out = Vec::new();
    if step > 0 {
        let norm = |x: i64| if x < 0 { (x + n).max(0) } else { x.min(n) };
        let start = lo.map(norm).unwrap_or(0);
        let stop = hi.map(norm).unwrap_or(n);
        let mut i = start;
        while i < stop {
            out.push(i as usize);
            i += step;
        }
    } else {
        let norm = |x: i64| if x < 0 { (x + n).max(-1) } else { x.min(n - 1) };
        let start = lo.map(norm).unwrap_or(n - 1);
        let stop = hi.map(norm).unwrap_or(-1);
        let mut i = start;
        while i > stop {
            out.push(i as usize);
            i += step;
        }
    }
    out
}
