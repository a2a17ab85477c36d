//! Recursive-descent parser for the target-language subset.
//!
//! Private-name mangling (`__x` inside class `C` becomes `_C__x`) is applied
//! while parsing, so the interpreter never sees unmangled private names.

use std::rc::Rc;

use crate::ast::*;
use crate::error::SyntaxError;
use crate::lexer::{tokenize, FPart, Tok, Token};

/// Positional parameters, `*args` name and `**kwargs` name.
type ParamList = (Vec<Param>, Option<String>, Option<String>);

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del", "elif", "else", "except",
    "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

/// Parses a complete module.
pub fn parse_module(src: &str) -> Result<Module, SyntaxError> {
    let mut p = Parser::new(tokenize(src)?, Vec::new());
    let body = p.file()?;
    Ok(Module { body })
}

/// Parses source text as if it appeared inside the body of class `class_name`,
/// so private names are mangled against that class.
pub fn parse_in_class(src: &str, class_name: &str) -> Result<Module, SyntaxError> {
    let mut p = Parser::new(tokenize(src)?, vec![class_name.to_string()]);
    let body = p.file()?;
    Ok(Module { body })
}

/// Parses a single expression (used for type expressions and f-string holes).
pub fn parse_expression(src: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser::new(tokenize(src.trim())?, Vec::new());
    let e = p.testlist()?;
    p.skip_newlines();
    if !matches!(p.peek(), Tok::Eof) {
        return Err(p.err("unexpected trailing tokens in expression"));
    }
    Ok(e)
}

/// Applies private-name mangling for an identifier used inside `class_name`.
pub fn mangle(class_name: &str, name: &str) -> String {
    if !name.starts_with("__") || name.ends_with("__") {
        return name.to_string();
    }
    let stripped = class_name.trim_start_matches('_');
    if stripped.is_empty() {
        return name.to_string();
    }
    format!("_{stripped}{name}")
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    classes: Vec<String>,
}

impl Parser {
    fn new(toks: Vec<Token>, classes: Vec<String>) -> Self {
        Self { toks, pos: 0, classes }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos.min(self.toks.len() - 1)].tok
    }

    fn peek_at(&self, off: usize) -> &Tok {
        &self.toks[(self.pos + off).min(self.toks.len() - 1)].tok
    }

    fn line(&self) -> usize {
        self.toks[self.pos.min(self.toks.len() - 1)].line
    }

    /// Line of the last consumed token, ignoring trailing dedents.
    fn prev_line(&self) -> usize {
        let mut k = self.pos.min(self.toks.len());
        while k > 0 && matches!(self.toks[k - 1].tok, Tok::Dedent | Tok::Indent | Tok::Newline) {
            k -= 1;
        }
        self.toks[k.saturating_sub(1)].line
    }

    fn err(&self, msg: impl Into<String>) -> SyntaxError {
        SyntaxError::new(self.line(), msg)
    }

    fn advance(&mut self) -> Tok {
        let t = self.peek().clone();
        if self.pos < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<(), SyntaxError> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{op}', found {}", describe(self.peek()))))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{kw}', found {}", describe(self.peek()))))
        }
    }

    fn raw_name(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Name(n) if !KEYWORDS.contains(&n.as_str()) => {
                self.pos += 1;
                Ok(n)
            }
            other => Err(self.err(format!("expected identifier, found {}", describe(&other)))),
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        let n = self.raw_name()?;
        Ok(self.mangled(&n))
    }

    fn mangled(&self, name: &str) -> String {
        match self.classes.last() {
            Some(c) => mangle(c, name),
            None => name.to_string(),
        }
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek(), Tok::Newline) {
            self.pos += 1;
        }
    }

    fn file(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        let mut body = Vec::new();
        loop {
            self.skip_newlines();
            match self.peek() {
                Tok::Eof => break,
                Tok::Indent => return Err(self.err("unexpected indent")),
                _ => body.extend(self.statement()?),
            }
        }
        Ok(body)
    }

    fn block(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        self.expect_op(":")?;
        if matches!(self.peek(), Tok::Newline) {
            self.skip_newlines();
            if !matches!(self.peek(), Tok::Indent) {
                return Err(self.err("expected an indented block"));
            }
            self.pos += 1;
            let mut body = Vec::new();
            loop {
                self.skip_newlines();
                match self.peek() {
                    Tok::Dedent => {
                        self.pos += 1;
                        break;
                    }
                    Tok::Eof => break,
                    _ => body.extend(self.statement()?),
                }
            }
            if body.is_empty() {
                return Err(self.err("expected an indented block"));
            }
            Ok(body)
        } else {
            self.simple_line()
        }
    }

    fn statement(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        let line = self.line();
        let kind = match self.peek().clone() {
            Tok::Name(n) => match n.as_str() {
                "if" => {
                    self.pos += 1;
                    self.if_tail()?
                }
                "while" => {
                    self.pos += 1;
                    let test = self.test()?;
                    let body = self.block()?;
                    let orelse = self.else_block()?;
                    StmtKind::While { test, body, orelse }
                }
                "for" => {
                    self.pos += 1;
                    let target = self.target_list()?;
                    self.expect_kw("in")?;
                    let iter = self.testlist()?;
                    let body = self.block()?;
                    let orelse = self.else_block()?;
                    StmtKind::For { target, iter, body, orelse }
                }
                "try" => {
                    self.pos += 1;
                    self.try_stmt()?
                }
                "with" => {
                    self.pos += 1;
                    let mut items = Vec::new();
                    loop {
                        let ctx = self.test()?;
                        let var = if self.eat_kw("as") { Some(self.target_atom()?) } else { None };
                        items.push((ctx, var));
                        if !self.eat_op(",") {
                            break;
                        }
                    }
                    let body = self.block()?;
                    StmtKind::With { items, body }
                }
                "def" => StmtKind::FunctionDef(Rc::new(self.funcdef(Vec::new(), line)?)),
                "class" => StmtKind::ClassDef(Rc::new(self.classdef(Vec::new(), line)?)),
                "async" | "yield" | "await" => return Err(self.err(format!("'{n}' is not supported by the target runtime"))),
                _ => return self.simple_line(),
            },
            Tok::Op("@") => {
                let mut decorators = Vec::new();
                while self.eat_op("@") {
                    decorators.push(self.test()?);
                    self.skip_newlines();
                }
                if self.is_kw("def") {
                    StmtKind::FunctionDef(Rc::new(self.funcdef(decorators, line)?))
                } else if self.is_kw("class") {
                    StmtKind::ClassDef(Rc::new(self.classdef(decorators, line)?))
                } else {
                    return Err(self.err("decorator must precede 'def' or 'class'"));
                }
            }
            _ => return self.simple_line(),
        };
        Ok(vec![Stmt { line, kind }])
    }

    fn else_block(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        self.skip_newlines_before_kw("else");
        if self.eat_kw("else") {
            self.block()
        } else {
            Ok(Vec::new())
        }
    }

    /// Blank lines never separate a compound statement from its clauses,
    /// since the lexer elides them; this is a no-op guard for clarity.
    fn skip_newlines_before_kw(&mut self, _kw: &str) {}

    fn if_tail(&mut self) -> Result<StmtKind, SyntaxError> {
        let test = self.test()?;
        let body = self.block()?;
        let orelse = if self.is_kw("elif") {
            let line = self.line();
            self.pos += 1;
            vec![Stmt { line, kind: self.if_tail()? }]
        } else if self.eat_kw("else") {
            self.block()?
        } else {
            Vec::new()
        };
        Ok(StmtKind::If { test, body, orelse })
    }

    fn try_stmt(&mut self) -> Result<StmtKind, SyntaxError> {
        let body = self.block()?;
        let mut handlers = Vec::new();
        while self.eat_kw("except") {
            let (kind, name) = if self.is_op(":") {
                (None, None)
            } else {
                let kind = self.test()?;
                let name = if self.eat_kw("as") { Some(self.ident()?) } else { None };
                (Some(kind), name)
            };
            let body = self.block()?;
            handlers.push(Handler { kind, name, body });
        }
        let orelse = if self.eat_kw("else") { self.block()? } else { Vec::new() };
        let finalbody = if self.eat_kw("finally") { self.block()? } else { Vec::new() };
        if handlers.is_empty() && finalbody.is_empty() {
            return Err(self.err("expected 'except' or 'finally' block"));
        }
        Ok(StmtKind::Try { body, handlers, orelse, finalbody })
    }

    fn funcdef(&mut self, decorators: Vec<Expr>, start_line: usize) -> Result<FunctionDef, SyntaxError> {
        self.expect_kw("def")?;
        let name = self.ident()?;
        self.expect_op("(")?;
        let (params, vararg, kwarg) = self.params(")")?;
        self.expect_op(")")?;
        if self.eat_op("->") {
            self.test()?;
        }
        let body = self.block()?;
        Ok(FunctionDef { name, params, vararg, kwarg, body, decorators, start_line, end_line: self.prev_line() })
    }

    fn params(&mut self, close: &str) -> Result<ParamList, SyntaxError> {
        let mut params = Vec::new();
        let mut vararg = None;
        let mut kwarg = None;
        while !self.is_op(close) {
            if self.eat_op("**") {
                kwarg = Some(self.ident()?);
            } else if self.eat_op("*") {
                if !self.is_op(",") {
                    vararg = Some(self.ident()?);
                }
            } else if self.eat_op("/") {
            } else {
                let name = self.ident()?;
                if close == ")" && self.eat_op(":") {
                    self.test()?;
                }
                let default = if self.eat_op("=") { Some(self.test()?) } else { None };
                params.push(Param { name, default });
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok((params, vararg, kwarg))
    }

    fn classdef(&mut self, decorators: Vec<Expr>, start_line: usize) -> Result<ClassDef, SyntaxError> {
        self.expect_kw("class")?;
        let name = self.ident()?;
        let mut bases = Vec::new();
        if self.eat_op("(") {
            while !self.is_op(")") {
                if let Tok::Name(_) = self.peek() {
                    if matches!(self.peek_at(1), Tok::Op("=")) {
                        // metaclass=... and similar keywords are ignored
                        self.pos += 2;
                        self.test()?;
                        if !self.eat_op(",") {
                            break;
                        }
                        continue;
                    }
                }
                bases.push(self.test()?);
                if !self.eat_op(",") {
                    break;
                }
            }
            self.expect_op(")")?;
        }
        self.classes.push(name.clone());
        let body = self.block();
        self.classes.pop();
        Ok(ClassDef { name, bases, body: body?, decorators, start_line, end_line: self.prev_line() })
    }

    fn simple_line(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        let mut out = Vec::new();
        loop {
            let line = self.line();
            let kind = self.small_stmt()?;
            out.push(Stmt { line, kind });
            if self.eat_op(";") {
                if matches!(self.peek(), Tok::Newline | Tok::Eof) {
                    break;
                }
                continue;
            }
            break;
        }
        match self.peek() {
            Tok::Newline => {
                self.pos += 1;
                Ok(out)
            }
            Tok::Eof | Tok::Dedent => Ok(out),
            other => Err(self.err(format!("invalid syntax near {}", describe(other)))),
        }
    }

    fn small_stmt(&mut self) -> Result<StmtKind, SyntaxError> {
        if let Tok::Name(n) = self.peek().clone() {
            match n.as_str() {
                "pass" => {
                    self.pos += 1;
                    return Ok(StmtKind::Pass);
                }
                "break" => {
                    self.pos += 1;
                    return Ok(StmtKind::Break);
                }
                "continue" => {
                    self.pos += 1;
                    return Ok(StmtKind::Continue);
                }
                "return" => {
                    self.pos += 1;
                    if self.at_stmt_end() {
                        return Ok(StmtKind::Return(None));
                    }
                    return Ok(StmtKind::Return(Some(self.testlist()?)));
                }
                "raise" => {
                    self.pos += 1;
                    if self.at_stmt_end() {
                        return Ok(StmtKind::Raise { exc: None, cause: None });
                    }
                    let exc = self.test()?;
                    let cause = if self.eat_kw("from") { Some(self.test()?) } else { None };
                    return Ok(StmtKind::Raise { exc: Some(exc), cause });
                }
                "global" | "nonlocal" => {
                    self.pos += 1;
                    let mut names = vec![self.ident()?];
                    while self.eat_op(",") {
                        names.push(self.ident()?);
                    }
                    return Ok(if n == "global" { StmtKind::Global(names) } else { StmtKind::Nonlocal(names) });
                }
                "del" => {
                    self.pos += 1;
                    let mut targets = vec![self.target_atom()?];
                    while self.eat_op(",") {
                        targets.push(self.target_atom()?);
                    }
                    return Ok(StmtKind::Del(targets));
                }
                "assert" => {
                    self.pos += 1;
                    let test = self.test()?;
                    let msg = if self.eat_op(",") { Some(self.test()?) } else { None };
                    return Ok(StmtKind::Assert { test, msg });
                }
                "import" => {
                    self.pos += 1;
                    let mut names = Vec::new();
                    loop {
                        let name = self.dotted_name()?;
                        let alias = if self.eat_kw("as") { Some(self.raw_name()?) } else { None };
                        names.push(ImportName { name, alias });
                        if !self.eat_op(",") {
                            break;
                        }
                    }
                    return Ok(StmtKind::Import(names));
                }
                "from" => {
                    self.pos += 1;
                    let mut module = String::new();
                    while self.is_op(".") || self.is_op("...") {
                        if let Tok::Op(o) = self.advance() {
                            module.push_str(o);
                        }
                    }
                    if !self.is_kw("import") {
                        module.push_str(&self.dotted_name()?);
                    }
                    self.expect_kw("import")?;
                    let paren = self.eat_op("(");
                    let mut names = Vec::new();
                    if self.eat_op("*") {
                        names.push(ImportName { name: "*".into(), alias: None });
                    } else {
                        loop {
                            if paren && self.is_op(")") {
                                break;
                            }
                            let name = self.raw_name()?;
                            let alias = if self.eat_kw("as") { Some(self.raw_name()?) } else { None };
                            names.push(ImportName { name, alias });
                            if !self.eat_op(",") {
                                break;
                            }
                        }
                    }
                    if paren {
                        self.expect_op(")")?;
                    }
                    return Ok(StmtKind::ImportFrom { module, names });
                }
                _ => {}
            }
        }
        let first = self.testlist_star()?;
        if self.eat_op("=") {
            let mut targets = vec![first];
            let mut value = self.testlist_star()?;
            while self.eat_op("=") {
                targets.push(value);
                value = self.testlist_star()?;
            }
            for t in &targets {
                check_target(t).map_err(|m| self.err(m))?;
            }
            return Ok(StmtKind::Assign { targets, value });
        }
        if self.eat_op(":") {
            check_target(&first).map_err(|m| self.err(m))?;
            self.test()?;
            let value = if self.eat_op("=") { Some(self.testlist()?) } else { None };
            return Ok(StmtKind::AnnAssign { target: first, value });
        }
        let aug = match self.peek() {
            Tok::Op("+=") => Some(BinOp::Add),
            Tok::Op("-=") => Some(BinOp::Sub),
            Tok::Op("*=") => Some(BinOp::Mul),
            Tok::Op("/=") => Some(BinOp::Div),
            Tok::Op("//=") => Some(BinOp::FloorDiv),
            Tok::Op("%=") => Some(BinOp::Mod),
            Tok::Op("**=") => Some(BinOp::Pow),
            Tok::Op("&=") => Some(BinOp::BitAnd),
            Tok::Op("|=") => Some(BinOp::BitOr),
            Tok::Op("^=") => Some(BinOp::BitXor),
            Tok::Op("<<=") => Some(BinOp::Shl),
            Tok::Op(">>=") => Some(BinOp::Shr),
            _ => None,
        };
        if let Some(op) = aug {
            self.pos += 1;
            check_target(&first).map_err(|m| self.err(m))?;
            let value = self.testlist()?;
            return Ok(StmtKind::AugAssign { target: first, op, value });
        }
        Ok(StmtKind::Expr(first))
    }

    fn at_stmt_end(&self) -> bool {
        matches!(self.peek(), Tok::Newline | Tok::Eof | Tok::Dedent | Tok::Op(";"))
    }

    fn dotted_name(&mut self) -> Result<String, SyntaxError> {
        let mut name = self.raw_name()?;
        while self.eat_op(".") {
            name.push('.');
            name.push_str(&self.raw_name()?);
        }
        Ok(name)
    }

    fn target_list(&mut self) -> Result<Expr, SyntaxError> {
        let first = self.target_atom()?;
        if !self.is_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.is_kw("in") || self.is_op("=") {
                break;
            }
            items.push(self.target_atom()?);
        }
        Ok(Expr::Tuple(items))
    }

    fn target_atom(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_op("*") {
            return Ok(Expr::Starred(Box::new(self.target_atom()?)));
        }
        let e = self.bitor()?;
        check_target(&e).map_err(|m| self.err(m))?;
        Ok(e)
    }

    fn testlist_star(&mut self) -> Result<Expr, SyntaxError> {
        let first = self.test_or_star()?;
        if !self.is_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_expr_end() {
                break;
            }
            items.push(self.test_or_star()?);
        }
        Ok(Expr::Tuple(items))
    }

    fn test_or_star(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_op("*") {
            return Ok(Expr::Starred(Box::new(self.bitor()?)));
        }
        self.test()
    }

    fn at_expr_end(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Newline | Tok::Eof | Tok::Dedent | Tok::Op("=") | Tok::Op(")") | Tok::Op("]") | Tok::Op("}") | Tok::Op(";") | Tok::Op(":")
        ) || matches!(self.peek(), Tok::Op(o) if o.ends_with('=') && *o != "==" && *o != "!=" && *o != "<=" && *o != ">=")
    }

    fn testlist(&mut self) -> Result<Expr, SyntaxError> {
        self.testlist_star()
    }

    fn test(&mut self) -> Result<Expr, SyntaxError> {
        if self.is_kw("lambda") {
            return self.lambda();
        }
        let body = self.or_test()?;
        if let Expr::Name(name) = &body {
            if self.eat_op(":=") {
                let value = self.test()?;
                return Ok(Expr::NamedExpr(name.clone(), Box::new(value)));
            }
        }
        if self.eat_kw("if") {
            let test = self.or_test()?;
            self.expect_kw("else")?;
            let orelse = self.test()?;
            return Ok(Expr::IfExp { test: Box::new(test), body: Box::new(body), orelse: Box::new(orelse) });
        }
        Ok(body)
    }

    fn test_no_cond(&mut self) -> Result<Expr, SyntaxError> {
        if self.is_kw("lambda") {
            return self.lambda();
        }
        self.or_test()
    }

    fn lambda(&mut self) -> Result<Expr, SyntaxError> {
        let line = self.line();
        self.expect_kw("lambda")?;
        let (params, vararg, kwarg) = self.params(":")?;
        self.expect_op(":")?;
        let body = self.test()?;
        Ok(Expr::Lambda(Rc::new(FunctionDef {
            name: "<lambda>".into(),
            params,
            vararg,
            kwarg,
            body: vec![Stmt { line, kind: StmtKind::Return(Some(body)) }],
            decorators: Vec::new(),
            start_line: line,
            end_line: line,
        })))
    }

    fn or_test(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.and_test()?;
        while self.eat_kw("or") {
            let right = self.and_test()?;
            left = Expr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_test(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.not_test()?;
        while self.eat_kw("and") {
            let right = self.not_test()?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn not_test(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_kw("not") {
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(self.not_test()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, SyntaxError> {
        let left = self.bitor()?;
        let mut ops = Vec::new();
        loop {
            let op = match self.peek() {
                Tok::Op("==") => CmpOp::Eq,
                Tok::Op("!=") => CmpOp::NotEq,
                Tok::Op("<") => CmpOp::Lt,
                Tok::Op("<=") => CmpOp::LtE,
                Tok::Op(">") => CmpOp::Gt,
                Tok::Op(">=") => CmpOp::GtE,
                Tok::Name(n) if n == "in" => CmpOp::In,
                Tok::Name(n) if n == "is" => {
                    if matches!(self.peek_at(1), Tok::Name(m) if m == "not") {
                        self.pos += 1;
                        CmpOp::IsNot
                    } else {
                        CmpOp::Is
                    }
                }
                Tok::Name(n) if n == "not" && matches!(self.peek_at(1), Tok::Name(m) if m == "in") => {
                    self.pos += 1;
                    CmpOp::NotIn
                }
                _ => break,
            };
            self.pos += 1;
            ops.push((op, self.bitor()?));
        }
        if ops.is_empty() {
            Ok(left)
        } else {
            Ok(Expr::Compare(Box::new(left), ops))
        }
    }

    fn bitor(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.bitxor()?;
        while self.eat_op("|") {
            left = Expr::BinOp(Box::new(left), BinOp::BitOr, Box::new(self.bitxor()?));
        }
        Ok(left)
    }

    fn bitxor(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.bitand()?;
        while self.eat_op("^") {
            left = Expr::BinOp(Box::new(left), BinOp::BitXor, Box::new(self.bitand()?));
        }
        Ok(left)
    }

    fn bitand(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.shift()?;
        while self.eat_op("&") {
            left = Expr::BinOp(Box::new(left), BinOp::BitAnd, Box::new(self.shift()?));
        }
        Ok(left)
    }

    fn shift(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.arith()?;
        loop {
            let op = if self.eat_op("<<") {
                BinOp::Shl
            } else if self.eat_op(">>") {
                BinOp::Shr
            } else {
                break;
            };
            left = Expr::BinOp(Box::new(left), op, Box::new(self.arith()?));
        }
        Ok(left)
    }

    fn arith(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.term()?;
        loop {
            let op = if self.eat_op("+") {
                BinOp::Add
            } else if self.eat_op("-") {
                BinOp::Sub
            } else {
                break;
            };
            left = Expr::BinOp(Box::new(left), op, Box::new(self.term()?));
        }
        Ok(left)
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.factor()?;
        loop {
            let op = if self.eat_op("*") {
                BinOp::Mul
            } else if self.eat_op("/") {
                BinOp::Div
            } else if self.eat_op("//") {
                BinOp::FloorDiv
            } else if self.eat_op("%") {
                BinOp::Mod
            } else {
                break;
            };
            left = Expr::BinOp(Box::new(left), op, Box::new(self.factor()?));
        }
        Ok(left)
    }

    fn factor(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_op("-") {
            return Ok(match self.factor()? {
                Expr::Int(v) => Expr::Int(-v),
                Expr::Float(v) => Expr::Float(-v),
                e => Expr::Unary(UnaryOp::Neg, Box::new(e)),
            });
        }
        if self.eat_op("+") {
            return Ok(Expr::Unary(UnaryOp::Pos, Box::new(self.factor()?)));
        }
        if self.eat_op("~") {
            return Ok(Expr::Unary(UnaryOp::Invert, Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SyntaxError> {
        let base = self.primary()?;
        if self.eat_op("**") {
            let exp = self.factor()?;
            return Ok(Expr::BinOp(Box::new(base), BinOp::Pow, Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.atom()?;
        loop {
            if self.eat_op(".") {
                let name = self.ident()?;
                e = Expr::Attribute(Box::new(e), name);
            } else if self.eat_op("(") {
                let args = self.call_args()?;
                self.expect_op(")")?;
                e = Expr::Call(Box::new(e), args);
            } else if self.eat_op("[") {
                let idx = self.subscript_list()?;
                self.expect_op("]")?;
                e = Expr::Subscript(Box::new(e), Box::new(idx));
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn call_args(&mut self) -> Result<Vec<Arg>, SyntaxError> {
        let mut args = Vec::new();
        while !self.is_op(")") {
            if self.eat_op("**") {
                args.push(Arg::StarStar(self.test()?));
            } else if self.eat_op("*") {
                args.push(Arg::Star(self.test()?));
            } else if matches!(self.peek(), Tok::Name(_)) && matches!(self.peek_at(1), Tok::Op("=")) {
                let name = self.raw_name()?;
                self.pos += 1;
                args.push(Arg::Kw(name, self.test()?));
            } else {
                let e = self.test()?;
                if self.is_kw("for") {
                    let comps = self.comprehensions()?;
                    args.push(Arg::Pos(Expr::GenExp(Box::new(e), comps)));
                } else {
                    args.push(Arg::Pos(e));
                }
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok(args)
    }

    fn subscript_list(&mut self) -> Result<Expr, SyntaxError> {
        let first = self.subscript()?;
        if !self.is_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.is_op("]") {
                break;
            }
            items.push(self.subscript()?);
        }
        Ok(Expr::Tuple(items))
    }

    fn subscript(&mut self) -> Result<Expr, SyntaxError> {
        let lower = if self.is_op(":") {
            None
        } else {
            let e = self.test()?;
            if !self.is_op(":") {
                return Ok(e);
            }
            Some(Box::new(e))
        };
        self.expect_op(":")?;
        let upper = if self.is_op(":") || self.is_op("]") || self.is_op(",") { None } else { Some(Box::new(self.test()?)) };
        let step = if self.eat_op(":") {
            if self.is_op("]") || self.is_op(",") {
                None
            } else {
                Some(Box::new(self.test()?))
            }
        } else {
            None
        };
        Ok(Expr::Slice(lower, upper, step))
    }

    fn comprehensions(&mut self) -> Result<Vec<Comprehension>, SyntaxError> {
        let mut comps = Vec::new();
        while self.eat_kw("for") {
            let target = self.target_list()?;
            self.expect_kw("in")?;
            let iter = self.or_test()?;
            let mut conds = Vec::new();
            while self.eat_kw("if") {
                conds.push(self.test_no_cond()?);
            }
            comps.push(Comprehension { target, iter, conds });
        }
        Ok(comps)
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let tok = self.advance();
        match tok {
            Tok::Int(v) => Ok(Expr::Int(v)),
            Tok::Float(v) => Ok(Expr::Float(v)),
            Tok::Str(s) => {
                let mut s = s;
                while let Tok::Str(more) = self.peek().clone() {
                    self.pos += 1;
                    s.push_str(&more);
                }
                Ok(Expr::Str(s.into()))
            }
            Tok::Bytes(b) => Ok(Expr::Bytes(b.into())),
            Tok::FStr(parts) => {
                let mut out = Vec::new();
                for part in parts {
                    match part {
                        FPart::Lit(s) => out.push(FStringPart::Lit(s)),
                        FPart::Expr(src) => {
                            let (expr_src, conversion, spec) = split_format_spec(&src);
                            let expr = Parser::new(tokenize(expr_src.trim())?, self.classes.clone()).testlist()?;
                            out.push(FStringPart::Expr { expr, conversion, spec: spec.map(str::to_string) });
                        }
                    }
                }
                Ok(Expr::FString(out))
            }
            Tok::Op("...") => Ok(Expr::Ellipsis),
            Tok::Op("(") => {
                if self.eat_op(")") {
                    return Ok(Expr::Tuple(Vec::new()));
                }
                let first = self.test_or_star()?;
                if self.is_kw("for") {
                    let comps = self.comprehensions()?;
                    self.expect_op(")")?;
                    return Ok(Expr::GenExp(Box::new(first), comps));
                }
                if self.eat_op(")") {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.is_op(")") {
                        break;
                    }
                    items.push(self.test_or_star()?);
                }
                self.expect_op(")")?;
                Ok(Expr::Tuple(items))
            }
            Tok::Op("[") => {
                if self.eat_op("]") {
                    return Ok(Expr::List(Vec::new()));
                }
                let first = self.test_or_star()?;
                if self.is_kw("for") {
                    let comps = self.comprehensions()?;
                    self.expect_op("]")?;
                    return Ok(Expr::ListComp(Box::new(first), comps));
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.is_op("]") {
                        break;
                    }
                    items.push(self.test_or_star()?);
                }
                self.expect_op("]")?;
                Ok(Expr::List(items))
            }
            Tok::Op("{") => {
                if self.eat_op("}") {
                    return Ok(Expr::Dict(Vec::new()));
                }
                let first = self.test()?;
                if self.eat_op(":") {
                    let value = self.test()?;
                    if self.is_kw("for") {
                        let comps = self.comprehensions()?;
                        self.expect_op("}")?;
                        return Ok(Expr::DictComp(Box::new(first), Box::new(value), comps));
                    }
                    let mut entries = vec![(first, value)];
                    while self.eat_op(",") {
                        if self.is_op("}") {
                            break;
                        }
                        let k = self.test()?;
                        self.expect_op(":")?;
                        entries.push((k, self.test()?));
                    }
                    self.expect_op("}")?;
                    return Ok(Expr::Dict(entries));
                }
                if self.is_kw("for") {
                    let comps = self.comprehensions()?;
                    self.expect_op("}")?;
                    return Ok(Expr::SetComp(Box::new(first), comps));
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.is_op("}") {
                        break;
                    }
                    items.push(self.test()?);
                }
                self.expect_op("}")?;
                Ok(Expr::Set(items))
            }
            Tok::Name(n) => match n.as_str() {
                "None" => Ok(Expr::None),
                "True" => Ok(Expr::Bool(true)),
                "False" => Ok(Expr::Bool(false)),
                _ if KEYWORDS.contains(&n.as_str()) => {
                    self.pos -= 1;
                    Err(self.err(format!("invalid syntax near keyword '{n}'")))
                }
                _ => Ok(Expr::Name(self.mangled(&n))),
            },
            other => {
                self.pos -= 1;
                Err(self.err(format!("invalid syntax near {}", describe(&other))))
            }
        }
    }
}

fn split_format_spec(src: &str) -> (&str, Option<char>, Option<&str>) {
    let mut depth = 0;
    let mut quote: Option<char> = None;
    for (i, c) in src.char_indices() {
        if let Some(q) = quote {
            if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '\'' | '"' => quote = Some(c),
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ':' if depth == 0 => return (&src[..i], None, Some(&src[i + 1..])),
            '!' if depth == 0 && !src[i..].starts_with("!=") => {
                let rest = &src[i + 1..];
                let conv = rest.chars().next();
                let spec = rest.find(':').map(|k| &rest[k + 1..]);
                return (&src[..i], conv, spec);
            }
            _ => {}
        }
    }
    (src, None, None)
}

fn check_target(e: &Expr) -> Result<(), String> {
    match e {
        Expr::Name(_) | Expr::Attribute(..) | Expr::Subscript(..) => Ok(()),
        Expr::Tuple(items) | Expr::List(items) => items.iter().try_for_each(check_target),
        Expr::Starred(inner) => check_target(inner),
        _ => Err("cannot assign to expression".into()),
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Name(n) => format!("'{n}'"),
        Tok::Int(v) => v.to_string(),
        Tok::Float(v) => v.to_string(),
        Tok::Str(_) | Tok::FStr(_) => "string literal".into(),
        Tok::Bytes(_) => "bytes literal".into(),
        Tok::Op(o) => format!("'{o}'"),
        Tok::Newline => "end of line".into(),
        Tok::Indent => "indent".into(),
        Tok::Dedent => "dedent".into(),
        Tok::Eof => "end of input".into(),
    }
}
