//! Recursive-descent parser for the supported Java subset.
//!
//! Method bodies are lowered while they are parsed: every call nested inside
//! a larger expression is hoisted into its own invocation statement that
//! assigns a `$tN` temporary, so that each [`Statement`] carries at most one
//! [`CallSite`]. Statements outside the subset are kept as opaque statements.

use std::collections::{BTreeMap, BTreeSet};

use super::expr::{binary_op, print_expr, Expr};
use super::lexer::{tokenize, Token, TokenKind};
use super::model::*;
use super::{erase_type, SyntaxError};

enum Target {
    Discard,
    /// Stored into a named variable; the string is the printed target prefix.
    Var(String, String),
    Temp,
}

enum Fail {
    Syntax(SyntaxError),
    Unsupported,
}

impl From<SyntaxError> for Fail {
    fn from(e: SyntaxError) -> Self {
        Fail::Syntax(e)
    }
}

type PResult<T> = Result<T, Fail>;

const PRIMITIVES: &[&str] = &[
    "boolean", "byte", "char", "short", "int", "long", "float", "double", "void",
];

const RESERVED: &[&str] = &[
    "abstract",
    "assert",
    "break",
    "case",
    "catch",
    "class",
    "continue",
    "default",
    "do",
    "else",
    "enum",
    "extends",
    "final",
    "finally",
    "for",
    "if",
    "implements",
    "import",
    "instanceof",
    "interface",
    "native",
    "new",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "static",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "try",
    "volatile",
    "while",
    "true",
    "false",
    "null",
];

const IGNORED_MODIFIERS: &[&str] = &[
    "synchronized",
    "native",
    "transient",
    "volatile",
    "strictfp",
    "default",
    "sealed",
];

pub fn parse_source(content: &str, uri: &str) -> Result<Vec<ClassModel>, SyntaxError> {
    let tokens = tokenize(content)?;
    let mut parser = Parser {
        toks: tokens,
        pos: 0,
        uri: uri.to_string(),
        package: String::new(),
        classes: Vec::new(),
    };
    match parser.compilation_unit() {
        Ok(()) => Ok(parser.classes),
        Err(Fail::Syntax(e)) => Err(e),
        // Unsupported constructs are only raised inside method bodies, where
        // they are caught; reaching here means a declaration-level construct.
        Err(Fail::Unsupported) => {
            let t = parser.peek();
            Err(SyntaxError::new(
                t.line,
                t.column,
                "a supported declaration",
            ))
        }
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    uri: String,
    package: String,
    classes: Vec<ClassModel>,
}

/// Variables visible while lowering a method body, with their declared types.
struct Scope {
    frames: Vec<BTreeMap<String, String>>,
    fields: BTreeMap<String, String>,
    class_name: String,
    temps: usize,
}

impl Scope {
    fn lookup(&self, name: &str) -> Option<&str> {
        self.frames
            .iter()
            .rev()
            .find_map(|f| f.get(name))
            .or_else(|| self.fields.get(name))
            .map(String::as_str)
    }

    fn is_var(&self, name: &str) -> bool {
        self.lookup(name).is_some()
    }

    fn declare(&mut self, name: &str, ty: &str) {
        self.frames
            .last_mut()
            .expect("scope has a frame")
            .insert(name.to_string(), ty.to_string());
    }

    fn push(&mut self) {
        self.frames.push(BTreeMap::new());
    }

    fn pop(&mut self) {
        self.frames.pop();
    }

    fn fresh_temp(&mut self) -> String {
        let t = format!("$t{}", self.temps);
        self.temps += 1;
        self.declare(&t, "var");
        t
    }
}

fn push_unique(list: &mut Vec<String>, name: &str) {
    if !list.iter().any(|n| n == name) {
        list.push(name.to_string());
    }
}

impl Parser {
    // ---- token helpers ----

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Token {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i]
    }

    fn at(&self, text: &str) -> bool {
        self.peek().is(text)
    }

    fn at_ident(&self) -> bool {
        self.peek().kind == TokenKind::Ident
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.at(text) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error(&self, expected: impl Into<String>) -> SyntaxError {
        let t = self.peek();
        let found = if t.kind == TokenKind::Eof {
            "end of file".to_string()
        } else {
            format!("`{}`", t.text)
        };
        SyntaxError::new(t.line, t.column, expected).found(found)
    }

    fn expect(&mut self, text: &str) -> Result<Token, SyntaxError> {
        if self.at(text) {
            Ok(self.bump())
        } else {
            Err(self.error(format!("`{text}`")))
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        if self.at_ident() && !RESERVED.contains(&self.peek().text.as_str()) {
            Ok(self.bump().text)
        } else {
            Err(self.error("an identifier"))
        }
    }

    fn prev_line(&self) -> u32 {
        self.toks[self.pos.saturating_sub(1)].line
    }

    /// Skips a balanced `open ... close` group starting at the current token.
    fn skip_balanced(&mut self, open: &str, close: &str) -> Result<(), SyntaxError> {
        let start = self.expect(open)?;
        let mut depth = 1;
        while depth > 0 {
            if self.peek().kind == TokenKind::Eof {
                return Err(SyntaxError::new(
                    start.line,
                    start.column,
                    format!("matching `{close}`"),
                ));
            }
            let t = self.bump();
            if t.is(open) {
                depth += 1;
            } else if t.is(close) {
                depth -= 1;
            }
        }
        Ok(())
    }

    /// Number of distinct token lines in `[from, to)`.
    fn code_lines(&self, from: usize, to: usize) -> u32 {
        let lines: BTreeSet<u32> = self.toks[from..to.min(self.toks.len())]
            .iter()
            .filter(|t| t.kind != TokenKind::Eof)
            .map(|t| t.line)
            .collect();
        lines.len() as u32
    }

    // ---- declarations ----

    fn compilation_unit(&mut self) -> PResult<()> {
        let save = self.pos;
        self.skip_annotations()?;
        if self.eat("package") {
            self.package = self.qualified_name()?;
            self.expect(";")?;
        } else {
            self.pos = save;
        }
        while self.at("import") {
            self.bump();
            self.eat("static");
            self.ident()?;
            while self.eat(".") {
                if !self.eat("*") {
                    self.ident()?;
                }
            }
            self.expect(";")?;
        }
        loop {
            if self.peek().kind == TokenKind::Eof {
                return Ok(());
            }
            if self.eat(";") {
                continue;
            }
            let start = self.pos;
            let modifiers = self.modifiers()?;
            self.type_declaration(start, modifiers, None)?;
        }
    }

    fn qualified_name(&mut self) -> Result<String, SyntaxError> {
        let mut name = self.ident()?;
        while self.at(".") && self.peek_at(1).kind == TokenKind::Ident {
            self.bump();
            name.push('.');
            name.push_str(&self.ident()?);
        }
        Ok(name)
    }

    fn skip_annotations(&mut self) -> Result<(), SyntaxError> {
        while self.at("@") && !self.peek_at(1).is("interface") {
            self.bump();
            self.qualified_name()?;
            if self.at("(") {
                self.skip_balanced("(", ")")?;
            }
        }
        Ok(())
    }

    fn modifiers(&mut self) -> Result<Modifiers, SyntaxError> {
        let mut mods = Modifiers::new();
        loop {
            self.skip_annotations()?;
            let t = self.peek();
            if t.kind != TokenKind::Ident {
                return Ok(mods);
            }
            if let Some(m) = Modifier::from_keyword(&t.text) {
                mods.insert(m);
                self.bump();
            } else if IGNORED_MODIFIERS.contains(&t.text.as_str())
                || (t.text == "non" && self.peek_at(1).is("-"))
            {
                if t.text == "non" {
                    self.bump();
                    self.bump();
                }
                self.bump();
            } else {
                return Ok(mods);
            }
        }
    }

    fn type_declaration(
        &mut self,
        start: usize,
        modifiers: Modifiers,
        outer: Option<&str>,
    ) -> PResult<()> {
        let kind = if self.eat("class") {
            ClassKind::Class
        } else if self.eat("interface") {
            ClassKind::Interface
        } else if self.eat("enum") {
            ClassKind::Enum
        } else {
            return Err(self.error("`class`, `interface` or `enum`").into());
        };
        let simple = self.ident()?;
        let name = match outer {
            Some(o) => format!("{o}.{simple}"),
            None => simple.clone(),
        };
        // Type parameters, extends/implements/permits clauses.
        while !self.at("{") {
            if self.peek().kind == TokenKind::Eof || self.at(";") {
                return Err(self.error("`{`").into());
            }
            self.bump();
        }
        let start_line = self.toks[start].line;
        let index = self.classes.len();
        self.classes.push(ClassModel {
            uri: self.uri.clone(),
            package: self.package.clone(),
            name: name.clone(),
            kind,
            modifiers,
            fields: Vec::new(),
            methods: Vec::new(),
            loc: 0,
            line_span: LineSpan {
                start: start_line,
                end: start_line,
            },
        });
        self.class_body(index, &simple, kind)?;
        let class = &mut self.classes[index];
        class.line_span.end = self.toks[self.pos - 1].line;
        class.loc = {
            let end = self.pos;
            let lines: BTreeSet<u32> = self.toks[start..end].iter().map(|t| t.line).collect();
            lines.len() as u32
        };
        Ok(())
    }

    fn class_body(&mut self, index: usize, simple: &str, kind: ClassKind) -> PResult<()> {
        self.expect("{")?;
        if kind == ClassKind::Enum {
            // Constants (with optional arguments or bodies) up to `;` or `}`.
            let mut depth = 0;
            loop {
                let t = self.peek();
                if t.kind == TokenKind::Eof {
                    return Err(self.error("`}`").into());
                }
                if depth == 0 && t.is(";") {
                    self.bump();
                    break;
                }
                if depth == 0 && t.is("}") {
                    self.bump();
                    return Ok(());
                }
                if t.is("(") || t.is("{") {
                    depth += 1;
                } else if t.is(")") || t.is("}") {
                    depth -= 1;
                }
                self.bump();
            }
        }
        loop {
            if self.eat("}") {
                return Ok(());
            }
            if self.peek().kind == TokenKind::Eof {
                return Err(self.error("`}`").into());
            }
            if self.eat(";") {
                continue;
            }
            if self.at("{") || (self.at("static") && self.peek_at(1).is("{")) {
                self.eat("static");
                self.skip_balanced("{", "}")?;
                continue;
            }
            let start = self.pos;
            let mut modifiers = self.modifiers()?;
            if self.at("class") || self.at("interface") || self.at("enum") {
                let outer = self.classes[index].name.clone();
                self.type_declaration(start, modifiers, Some(&outer))?;
                continue;
            }
            if self.at("<") {
                self.skip_type_arguments()?;
            }
            if kind == ClassKind::Interface
                && !modifiers.contains(&Modifier::Private)
                && !modifiers.contains(&Modifier::Public)
            {
                modifiers.insert(Modifier::Public);
            }
            if self.peek().text == simple && self.peek_at(1).is("(") {
                self.bump();
                self.method(
                    index,
                    start,
                    modifiers,
                    CONSTRUCTOR_NAME.to_string(),
                    "void".into(),
                )?;
                continue;
            }
            let ty = self.parse_type()?;
            let name = self.ident()?;
            if self.at("(") {
                self.method(index, start, modifiers, name, ty)?;
            } else {
                self.field_declarators(index, modifiers, ty, name)?;
            }
        }
    }

    fn field_declarators(
        &mut self,
        index: usize,
        modifiers: Modifiers,
        ty: String,
        first: String,
    ) -> PResult<()> {
        let mut name = first;
        loop {
            let mut field_ty = ty.clone();
            while self.at("[") && self.peek_at(1).is("]") {
                self.bump();
                self.bump();
                field_ty.push_str("[]");
            }
            self.classes[index].fields.push(Field {
                name,
                ty: field_ty,
                modifiers: modifiers.clone(),
            });
            if self.eat("=") {
                self.skip_initializer()?;
            }
            if self.eat(";") {
                return Ok(());
            }
            self.expect(",")?;
            name = self.ident()?;
        }
    }

    /// Skips a field initializer up to (not including) a top-level `,` or `;`.
    fn skip_initializer(&mut self) -> Result<(), SyntaxError> {
        let mut depth = 0i32;
        loop {
            let t = self.peek();
            if t.kind == TokenKind::Eof {
                return Err(self.error("`;`"));
            }
            if depth == 0 && (t.is(",") || t.is(";")) {
                return Ok(());
            }
            if t.is("(") || t.is("{") || t.is("[") {
                depth += 1;
            } else if t.is(")") || t.is("}") || t.is("]") {
                depth -= 1;
                if depth < 0 {
                    return Err(self.error("`;`"));
                }
            }
            self.bump();
        }
    }

    fn method(
        &mut self,
        index: usize,
        start: usize,
        modifiers: Modifiers,
        name: String,
        mut return_type: String,
    ) -> PResult<()> {
        self.expect("(")?;
        let mut parameters = Vec::new();
        if !self.eat(")") {
            loop {
                self.modifiers()?;
                let mut ty = self.parse_type()?;
                if self.eat("...") {
                    ty.push_str("[]");
                }
                let pname = self.ident()?;
                while self.at("[") && self.peek_at(1).is("]") {
                    self.bump();
                    self.bump();
                    ty.push_str("[]");
                }
                if parameters.iter().any(|p: &Parameter| p.name == pname) {
                    let t = &self.toks[self.pos - 1];
                    return Err(
                        SyntaxError::new(t.line, t.column, "a unique parameter name")
                            .found(format!("duplicate `{pname}`"))
                            .into(),
                    );
                }
                parameters.push(Parameter { name: pname, ty });
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        while self.at("[") && self.peek_at(1).is("]") {
            self.bump();
            self.bump();
            return_type.push_str("[]");
        }
        if self.eat("throws") {
            self.parse_type()?;
            while self.eat(",") {
                self.parse_type()?;
            }
        }
        if self.eat("default") {
            self.skip_initializer()?;
        }

        let owner = ClassRef {
            package: self.package.clone(),
            name: self.classes[index].name.clone(),
        };
        let (has_body, body) = if self.eat(";") {
            (false, Vec::new())
        } else {
            let fields = self.classes[index]
                .fields
                .iter()
                .map(|f| (f.name.clone(), f.ty.clone()))
                .collect();
            let mut scope = Scope {
                frames: vec![parameters
                    .iter()
                    .map(|p| (p.name.clone(), p.ty.clone()))
                    .collect()],
                fields,
                class_name: owner.name.clone(),
                temps: 0,
            };
            (true, self.block(&mut scope)?)
        };
        let end = self.pos;
        let method = MethodModel {
            name,
            return_type,
            parameters,
            modifiers,
            has_body,
            body,
            line_span: LineSpan {
                start: self.toks[start].line,
                end: self.prev_line(),
            },
            loc: self.code_lines(start, end),
            owner,
            uri: self.uri.clone(),
        };
        self.classes[index].methods.push(method);
        Ok(())
    }

    fn skip_type_arguments(&mut self) -> Result<String, SyntaxError> {
        let mut text = String::new();
        let start = self.expect("<")?;
        text.push('<');
        let mut depth = 1;
        while depth > 0 {
            let t = self.peek();
            if t.kind == TokenKind::Eof || t.is(";") || t.is("{") || t.is("(") {
                return Err(SyntaxError::new(start.line, start.column, "closing `>`"));
            }
            let t = self.bump();
            if t.is("<") {
                depth += 1;
            } else if t.is(">") {
                depth -= 1;
            }
            if t.is("extends") || t.is("super") {
                text.push(' ');
                text.push_str(&t.text);
                text.push(' ');
            } else {
                text.push_str(&t.text);
            }
        }
        Ok(text)
    }

    /// `Name(.Name)*` with optional type arguments and array dimensions.
    fn parse_type(&mut self) -> Result<String, SyntaxError> {
        self.skip_annotations()?;
        if !self.at_ident() {
            return Err(self.error("a type"));
        }
        let mut ty = self.bump().text;
        loop {
            if self.at("<") {
                ty.push_str(&self.skip_type_arguments()?);
            }
            if self.at(".") && self.peek_at(1).kind == TokenKind::Ident {
                self.bump();
                ty.push('.');
                ty.push_str(&self.bump().text);
            } else {
                break;
            }
        }
        while self.at("[") && self.peek_at(1).is("]") {
            self.bump();
            self.bump();
            ty.push_str("[]");
        }
        Ok(ty)
    }

    /// Non-consuming check for `Type Ident` at the current position, as used
    /// to recognise local variable declarations.
    fn looks_like_declaration(&mut self) -> bool {
        let save = self.pos;
        let result = (|| {
            let t = self.peek();
            if t.kind != TokenKind::Ident || RESERVED.contains(&t.text.as_str()) && !t.is("final") {
                return false;
            }
            if self.modifiers().is_err() {
                return false;
            }
            if self.parse_type().is_err() {
                return false;
            }
            if !self.at_ident() || RESERVED.contains(&self.peek().text.as_str()) {
                return false;
            }
            self.bump();
            ["=", ";", ",", "[", ":"].iter().any(|p| self.at(p))
        })();
        self.pos = save;
        result
    }

    // ---- statements ----

    fn block(&mut self, scope: &mut Scope) -> PResult<Vec<Statement>> {
        self.expect("{")?;
        scope.push();
        let mut out = Vec::new();
        while !self.at("}") {
            if self.peek().kind == TokenKind::Eof {
                return Err(self.error("`}`").into());
            }
            self.statement(scope, &mut out)?;
        }
        self.bump();
        scope.pop();
        Ok(out)
    }

    /// A block or a single statement, in a fresh scope.
    fn body(&mut self, scope: &mut Scope) -> PResult<Vec<Statement>> {
        if self.at("{") {
            self.block(scope)
        } else {
            scope.push();
            let mut out = Vec::new();
            self.statement(scope, &mut out)?;
            scope.pop();
            Ok(out)
        }
    }

    fn statement(&mut self, scope: &mut Scope, out: &mut Vec<Statement>) -> PResult<()> {
        let save_pos = self.pos;
        let save_len = out.len();
        let save_frames = scope.frames.clone();
        let save_temps = scope.temps;
        match self.structured_statement(scope, out) {
            Ok(()) => Ok(()),
            Err(Fail::Syntax(e)) => Err(Fail::Syntax(e)),
            Err(Fail::Unsupported) => {
                self.pos = save_pos;
                out.truncate(save_len);
                scope.frames = save_frames;
                scope.temps = save_temps;
                let stmt = self.opaque_statement(scope)?;
                out.push(stmt);
                Ok(())
            }
        }
    }

    fn structured_statement(&mut self, scope: &mut Scope, out: &mut Vec<Statement>) -> PResult<()> {
        let line = self.peek().line;
        let t = self.peek().clone();
        if t.kind == TokenKind::Ident {
            match t.text.as_str() {
                "if" => return self.if_statement(scope, out),
                "while" => {
                    self.bump();
                    self.expect("(")?;
                    let cond = self.expression()?;
                    self.expect(")")?;
                    let cond = self.lower_value(cond, line, scope, out)?;
                    let body = self.body(scope)?;
                    out.push(Statement {
                        kind: StatementKind::Loop,
                        line,
                        defs: vec![],
                        uses: expr_vars(&cond, scope),
                        call: None,
                        children: body,
                        branches: vec![],
                        text: format!("while ({})", print_expr(&cond)),
                    });
                    return Ok(());
                }
                "for" => return self.for_statement(scope, out),
                "try" => return self.try_statement(scope, out),
                "return" => {
                    self.bump();
                    if self.eat(";") {
                        out.push(leaf(StatementKind::Return, line, vec![], vec![], "return;"));
                        return Ok(());
                    }
                    let value = self.expression()?;
                    self.expect(";")?;
                    let value = self.lower_operand(value, line, scope, out)?;
                    out.push(leaf(
                        StatementKind::Return,
                        line,
                        vec![],
                        expr_vars(&value, scope),
                        format!("return {};", print_expr(&value)),
                    ));
                    return Ok(());
                }
                "throw" => {
                    self.bump();
                    let value = self.expression()?;
                    self.expect(";")?;
                    let value = self.lower_operand(value, line, scope, out)?;
                    let vars = expr_vars(&value, scope);
                    out.push(leaf(
                        StatementKind::Opaque,
                        line,
                        vars.clone(),
                        vars,
                        format!("throw {};", print_expr(&value)),
                    ));
                    return Ok(());
                }
                "break" | "continue" => {
                    self.bump();
                    let mut text = t.text.clone();
                    if self.at_ident() {
                        text.push(' ');
                        text.push_str(&self.bump().text);
                    }
                    self.expect(";")?;
                    text.push(';');
                    out.push(leaf(StatementKind::Opaque, line, vec![], vec![], text));
                    return Ok(());
                }
                "switch" | "do" | "synchronized" | "assert" | "class" | "interface" | "enum"
                | "record" | "yield" => return Err(Fail::Unsupported),
                _ => {}
            }
            if self.peek_at(1).is(":") {
                // Labeled statement.
                return Err(Fail::Unsupported);
            }
        }
        if self.at("{") {
            let stmts = self.block(scope)?;
            out.extend(stmts);
            return Ok(());
        }
        if self.eat(";") {
            return Ok(());
        }
        if self.looks_like_declaration() {
            self.local_declaration(scope, out, true)?;
            return Ok(());
        }
        let e = self.expression()?;
        self.expect(";")?;
        self.expression_statement(e, line, scope, out)
    }

    fn local_declaration(
        &mut self,
        scope: &mut Scope,
        out: &mut Vec<Statement>,
        require_semicolon: bool,
    ) -> PResult<()> {
        self.modifiers()?;
        let base_ty = self.parse_type()?;
        loop {
            let line = self.peek().line;
            let name = self.ident()?;
            let mut ty = base_ty.clone();
            while self.at("[") && self.peek_at(1).is("]") {
                self.bump();
                self.bump();
                ty.push_str("[]");
            }
            if self.eat("=") {
                let init = if self.at("{") {
                    self.array_initializer()?
                } else {
                    self.expression()?
                };
                self.lower_declaration(&ty, &name, init, line, scope, out)?;
            } else {
                scope.declare(&name, &ty);
                out.push(leaf(
                    StatementKind::Declaration,
                    line,
                    vec![name.clone()],
                    vec![],
                    format!("{ty} {name};"),
                ));
            }
            if !self.eat(",") {
                break;
            }
        }
        if require_semicolon {
            self.expect(";")?;
        }
        Ok(())
    }

    fn lower_declaration(
        &mut self,
        ty: &str,
        name: &str,
        init: Expr,
        line: u32,
        scope: &mut Scope,
        out: &mut Vec<Statement>,
    ) -> PResult<()> {
        if init.is_call() {
            let target = format!("{ty} {name}");
            self.emit_call(init, Target::Var(name.to_string(), target), scope, out)?;
            scope.declare(name, ty);
            return Ok(());
        }
        let value = self.lower_value(init, line, scope, out)?;
        let kind = value_kind(&value, StatementKind::Declaration);
        let uses = expr_vars(&value, scope);
        scope.declare(name, ty);
        out.push(leaf(
            kind,
            line,
            vec![name.to_string()],
            uses,
            format!("{ty} {name} = {};", print_expr(&value)),
        ));
        Ok(())
    }

    fn if_statement(&mut self, scope: &mut Scope, out: &mut Vec<Statement>) -> PResult<()> {
        let line = self.bump().line;
        self.expect("(")?;
        let cond = self.expression()?;
        self.expect(")")?;
        let cond = self.lower_value(cond, line, scope, out)?;
        let then_body = self.body(scope)?;
        let mut branches = Vec::new();
        if self.eat("else") {
            let else_body = self.body(scope)?;
            branches.push(Branch {
                header: "else".into(),
                defs: vec![],
                body: else_body,
            });
        }
        out.push(Statement {
            kind: StatementKind::If,
            line,
            defs: vec![],
            uses: expr_vars(&cond, scope),
            call: None,
            children: then_body,
            branches,
            text: format!("if ({})", print_expr(&cond)),
        });
        Ok(())
    }

    fn for_statement(&mut self, scope: &mut Scope, out: &mut Vec<Statement>) -> PResult<()> {
        let line = self.bump().line;
        self.expect("(")?;
        // Enhanced for.
        if self.looks_like_declaration() {
            let save = self.pos;
            self.modifiers()?;
            let ty = self.parse_type()?;
            let var = self.ident()?;
            if self.eat(":") {
                let iterable = self.expression()?;
                self.expect(")")?;
                let iterable = self.lower_operand(iterable, line, scope, out)?;
                let uses = expr_vars(&iterable, scope);
                scope.push();
                scope.declare(&var, &ty);
                let body = self.body(scope)?;
                scope.pop();
                out.push(Statement {
                    kind: StatementKind::Loop,
                    line,
                    defs: vec![var.clone()],
                    uses,
                    call: None,
                    children: body,
                    branches: vec![],
                    text: format!("for ({ty} {var} : {})", print_expr(&iterable)),
                });
                return Ok(());
            }
            self.pos = save;
        }
        // Classic for, lowered to `init; while (cond) { body; update; }`.
        if !self.at(";") {
            if self.looks_like_declaration() {
                self.local_declaration(scope, out, false)?;
            } else {
                loop {
                    let l = self.peek().line;
                    let e = self.expression()?;
                    self.expression_statement(e, l, scope, out)?;
                    if !self.eat(",") {
                        break;
                    }
                }
            }
        }
        self.expect(";")?;
        let cond = if self.at(";") {
            Expr::Lit("true".into())
        } else {
            let c = self.expression()?;
            self.lower_value(c, line, scope, out)?
        };
        self.expect(";")?;
        let mut updates = Vec::new();
        if !self.at(")") {
            loop {
                updates.push((self.peek().line, self.expression()?));
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        let mut body = self.body(scope)?;
        for (l, u) in updates {
            self.expression_statement(u, l, scope, &mut body)?;
        }
        out.push(Statement {
            kind: StatementKind::Loop,
            line,
            defs: vec![],
            uses: expr_vars(&cond, scope),
            call: None,
            children: body,
            branches: vec![],
            text: format!("while ({})", print_expr(&cond)),
        });
        Ok(())
    }

    fn try_statement(&mut self, scope: &mut Scope, out: &mut Vec<Statement>) -> PResult<()> {
        let line = self.bump().line;
        let mut has_resources = false;
        if self.eat("(") {
            has_resources = true;
            loop {
                if self.eat(")") {
                    break;
                }
                self.local_declaration(scope, out, false)?;
                if !self.eat(";") {
                    self.expect(")")?;
                    break;
                }
            }
        }
        let body = self.block(scope)?;
        let mut branches = Vec::new();
        while self.at("catch") {
            self.bump();
            self.expect("(")?;
            self.modifiers()?;
            let mut types = vec![self.parse_type()?];
            while self.eat("|") {
                types.push(self.parse_type()?);
            }
            let var = self.ident()?;
            self.expect(")")?;
            scope.push();
            scope.declare(&var, &types[0]);
            let handler = self.block(scope)?;
            scope.pop();
            branches.push(Branch {
                header: format!("catch ({} {var})", types.join(" | ")),
                defs: vec![var],
                body: handler,
            });
        }
        let finally = if self.eat("finally") {
            Some(self.block(scope)?)
        } else {
            None
        };
        if branches.is_empty() && finally.is_none() && !has_resources {
            return Err(self.error("`catch` or `finally`").into());
        }
        out.push(Statement {
            kind: StatementKind::TryCatch,
            line,
            defs: vec![],
            uses: vec![],
            call: None,
            children: body,
            branches,
            text: "try".into(),
        });
        if let Some(f) = finally {
            out.extend(f);
        }
        Ok(())
    }

    fn expression_statement(
        &mut self,
        e: Expr,
        line: u32,
        scope: &mut Scope,
        out: &mut Vec<Statement>,
    ) -> PResult<()> {
        match e {
            Expr::Call { .. } | Expr::New { .. } => {
                self.emit_call(e, Target::Discard, scope, out)?;
                Ok(())
            }
            Expr::Update(op, prefix, target) => {
                let (defs, mut uses, text) = self.lower_target(*target, line, scope, out)?;
                for d in &defs {
                    push_unique(&mut uses, d);
                }
                let text = if prefix {
                    format!("{op}{text};")
                } else {
                    format!("{text}{op};")
                };
                out.push(leaf(StatementKind::Assignment, line, defs, uses, text));
                Ok(())
            }
            Expr::Assign(op, target, value) => {
                let strong = simple_target(&target, scope);
                if op == "=" && value.is_call() {
                    if let Some(var) = strong {
                        let text = print_expr(&target);
                        self.emit_call(*value, Target::Var(var, text), scope, out)?;
                        return Ok(());
                    }
                }
                let value = self.lower_value(*value, line, scope, out)?;
                let (defs, mut uses, target_text) = self.lower_target(*target, line, scope, out)?;
                if op != "=" {
                    for d in &defs {
                        push_unique(&mut uses, d);
                    }
                }
                for v in expr_vars(&value, scope) {
                    push_unique(&mut uses, &v);
                }
                let kind = if op == "+=" {
                    StatementKind::Concat
                } else {
                    value_kind(&value, StatementKind::Assignment)
                };
                out.push(leaf(
                    kind,
                    line,
                    defs,
                    uses,
                    format!("{target_text} {op} {};", print_expr(&value)),
                ));
                Ok(())
            }
            _ => Err(SyntaxError::new(line, 0, "a statement expression").into()),
        }
    }

    /// Lowers an assignment target, returning (defs, uses, text).
    fn lower_target(
        &mut self,
        target: Expr,
        line: u32,
        scope: &mut Scope,
        out: &mut Vec<Statement>,
    ) -> PResult<(Vec<String>, Vec<String>, String)> {
        if let Some(var) = simple_target(&target, scope) {
            return Ok((vec![var.clone()], vec![], print_expr(&target)));
        }
        let lowered = self.lower_value(target, line, scope, out)?;
        let uses = expr_vars(&lowered, scope);
        // Writes through a field or array element update the root object.
        let defs = root_var(&lowered, scope).into_iter().collect();
        Ok((defs, uses, print_expr(&lowered)))
    }

    fn opaque_statement(&mut self, scope: &mut Scope) -> Result<Statement, SyntaxError> {
        let line = self.peek().line;
        let declared = if self.looks_like_declaration() {
            let save = self.pos;
            let _ = self.modifiers();
            let ty = self.parse_type().unwrap_or_default();
            let name = self.ident().ok();
            self.pos = save;
            name.map(|n| (n, ty))
        } else {
            None
        };
        let start = self.pos;
        let mut depth = 0i32;
        loop {
            let t = self.peek().clone();
            if t.kind == TokenKind::Eof {
                return Err(self.error("end of statement"));
            }
            self.bump();
            if t.is("(") || t.is("[") || t.is("{") {
                depth += 1;
            } else if t.is(")") || t.is("]") || t.is("}") {
                depth -= 1;
                if depth < 0 {
                    return Err(SyntaxError::new(t.line, t.column, "balanced brackets"));
                }
                if depth == 0 && t.is("}") {
                    let next = self.peek();
                    let continues = [
                        ";", ".", "(", ")", ",", "[", "while", "else", "catch", "finally",
                    ]
                    .iter()
                    .any(|p| next.is(p))
                        || (next.kind == TokenKind::Punct
                            && !next.is("}")
                            && !next.is("{")
                            && !next.is("@"));
                    if !continues {
                        break;
                    }
                }
            } else if depth == 0 && t.is(";") {
                break;
            }
        }
        let tokens = &self.toks[start..self.pos];
        if let Some((name, ty)) = &declared {
            scope.declare(name, ty);
        }
        let mut vars = Vec::new();
        for (i, t) in tokens.iter().enumerate() {
            let after_dot = i > 0 && tokens[i - 1].is(".");
            if t.kind == TokenKind::Ident && !after_dot && scope.is_var(&t.text) {
                push_unique(&mut vars, &t.text);
            }
        }
        let text = tokens
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        Ok(leaf(StatementKind::Opaque, line, vars.clone(), vars, text))
    }

    // ---- lowering helpers ----

    /// Lowers an expression so that it contains no calls, hoisting each call
    /// into a temporary.
    fn lower_value(
        &mut self,
        e: Expr,
        line: u32,
        scope: &mut Scope,
        out: &mut Vec<Statement>,
    ) -> PResult<Expr> {
        Ok(match e {
            Expr::Call { .. } | Expr::New { .. } => {
                Expr::Name(self.emit_call(e, Target::Temp, scope, out)?)
            }
            Expr::Lit(_) | Expr::Name(_) | Expr::This | Expr::Super | Expr::ClassLit(_) => e,
            Expr::Field(base, f) => {
                Expr::Field(Box::new(self.lower_value(*base, line, scope, out)?), f)
            }
            Expr::NewArray { ty, dims, init } => {
                let mut lowered = Vec::new();
                for d in dims {
                    lowered.push(match d {
                        Some(d) => Some(self.lower_value(d, line, scope, out)?),
                        None => None,
                    });
                }
                let init = match init {
                    Some(items) => Some(self.lower_all(items, line, scope, out)?),
                    None => None,
                };
                Expr::NewArray {
                    ty,
                    dims: lowered,
                    init,
                }
            }
            Expr::ArrayInit(items) => Expr::ArrayInit(self.lower_all(items, line, scope, out)?),
            Expr::Index(b, i) => {
                let b = self.lower_value(*b, line, scope, out)?;
                let i = self.lower_value(*i, line, scope, out)?;
                Expr::Index(Box::new(b), Box::new(i))
            }
            Expr::Unary(op, inner) => {
                Expr::Unary(op, Box::new(self.lower_value(*inner, line, scope, out)?))
            }
            Expr::Binary(op, l, r) => {
                let l = self.lower_value(*l, line, scope, out)?;
                let r = self.lower_value(*r, line, scope, out)?;
                Expr::Binary(op, Box::new(l), Box::new(r))
            }
            Expr::Cond(c, a, b) => {
                let c = self.lower_value(*c, line, scope, out)?;
                let a = self.lower_value(*a, line, scope, out)?;
                let b = self.lower_value(*b, line, scope, out)?;
                Expr::Cond(Box::new(c), Box::new(a), Box::new(b))
            }
            Expr::Cast(t, inner) => {
                Expr::Cast(t, Box::new(self.lower_value(*inner, line, scope, out)?))
            }
            Expr::InstanceOf(inner, t) => {
                Expr::InstanceOf(Box::new(self.lower_value(*inner, line, scope, out)?), t)
            }
            // Side effects inside larger expressions are outside the subset.
            Expr::Update(..) | Expr::Assign(..) => return Err(Fail::Unsupported),
        })
    }

    fn lower_all(
        &mut self,
        items: Vec<Expr>,
        line: u32,
        scope: &mut Scope,
        out: &mut Vec<Statement>,
    ) -> PResult<Vec<Expr>> {
        items
            .into_iter()
            .map(|i| self.lower_value(i, line, scope, out))
            .collect()
    }

    /// Lowers an expression to an operand: a literal, constant, variable
    /// or `this`. Anything else is evaluated into a temporary.
    fn lower_operand(
        &mut self,
        e: Expr,
        line: u32,
        scope: &mut Scope,
        out: &mut Vec<Statement>,
    ) -> PResult<Expr> {
        if is_operand(&e, scope) {
            return Ok(e);
        }
        let value = self.lower_value(e, line, scope, out)?;
        if is_operand(&value, scope) {
            return Ok(value);
        }
        let temp = scope.fresh_temp();
        let kind = value_kind(&value, StatementKind::Declaration);
        out.push(leaf(
            kind,
            line,
            vec![temp.clone()],
            expr_vars(&value, scope),
            format!("var {temp} = {};", print_expr(&value)),
        ));
        Ok(Expr::Name(temp))
    }

    /// Emits one invocation statement and returns the variable holding the
    /// call value, if any.
    fn emit_call(
        &mut self,
        call: Expr,
        target: Target,
        scope: &mut Scope,
        out: &mut Vec<Statement>,
    ) -> PResult<String> {
        let (recv, name, args, line, is_new) = match call {
            Expr::Call {
                recv,
                name,
                args,
                line,
            } => (recv.map(|b| *b), name, args, line, false),
            Expr::New { ty, args, line } => (
                Some(Expr::Name(ty)),
                CONSTRUCTOR_NAME.to_string(),
                args,
                line,
                true,
            ),
            _ => unreachable!("emit_call on a non-call"),
        };

        let mut uses = Vec::new();
        let (receiver_var, receiver_type_hint, recv_text) = match recv {
            None => (None, None, None),
            Some(Expr::Name(ty)) if is_new => (None, Some(erase_type(&ty)), Some(ty)),
            Some(r) => self.lower_receiver(r, line, scope, out)?,
        };
        if let Some(v) = &receiver_var {
            push_unique(&mut uses, v);
        }

        let mut argument_vars = Vec::new();
        let mut arg_texts = Vec::new();
        for a in args {
            let a = self.lower_operand(a, line, scope, out)?;
            let var = operand_var(&a, scope);
            if let Some(v) = &var {
                push_unique(&mut uses, v);
            }
            argument_vars.push(var);
            arg_texts.push(print_expr(&a));
        }

        let call_text = if is_new {
            format!(
                "new {}({})",
                recv_text.unwrap_or_default(),
                arg_texts.join(", ")
            )
        } else {
            match recv_text {
                Some(r) => format!("{r}.{name}({})", arg_texts.join(", ")),
                None => format!("{name}({})", arg_texts.join(", ")),
            }
        };
        let result = match target {
            Target::Discard => None,
            Target::Var(var, prefix) => Some((var, prefix)),
            Target::Temp => {
                let temp = scope.fresh_temp();
                let prefix = format!("var {temp}");
                Some((temp, prefix))
            }
        };
        let (defs, result_var, text) = match result {
            Some((var, prefix)) => (
                vec![var.clone()],
                Some(var),
                format!("{prefix} = {call_text};"),
            ),
            None => (vec![], None, format!("{call_text};")),
        };
        let stmt_line = line;
        let returned = result_var.clone().unwrap_or_default();
        out.push(Statement {
            kind: StatementKind::Invocation,
            line: stmt_line,
            defs,
            uses,
            call: Some(CallSite {
                line: stmt_line,
                receiver_type_hint,
                receiver_var,
                callee_name: name,
                argument_vars,
                result_var,
                resolved_signature: None,
            }),
            children: vec![],
            branches: vec![],
            text,
        });
        Ok(returned)
    }

    /// Returns (receiver variable, type hint, printed receiver).
    fn lower_receiver(
        &mut self,
        r: Expr,
        line: u32,
        scope: &mut Scope,
        out: &mut Vec<Statement>,
    ) -> PResult<(Option<String>, Option<String>, Option<String>)> {
        match &r {
            Expr::Name(n) if scope.is_var(n) => {
                let hint = scope.lookup(n).filter(|t| *t != "var").map(erase_type);
                return Ok((Some(n.clone()), hint, Some(n.clone())));
            }
            Expr::This => return Ok((None, Some(scope.class_name.clone()), Some("this".into()))),
            Expr::Super => return Ok((None, None, Some("super".into()))),
            Expr::Field(base, f)
                if matches!(**base, Expr::This) && scope.fields.contains_key(f) =>
            {
                let hint = scope.fields.get(f).map(|t| erase_type(t));
                return Ok((Some(f.clone()), hint, Some(format!("this.{f}"))));
            }
            _ => {}
        }
        if let (Some(head), Some(dotted)) = (r.head_name(), r.dotted_name()) {
            if !scope.is_var(head) {
                return Ok((None, Some(dotted.clone()), Some(dotted)));
            }
        }
        let mut operand = self.lower_value(r, line, scope, out)?;
        if !matches!(
            operand,
            Expr::Name(_) | Expr::Field(..) | Expr::Index(..) | Expr::ClassLit(_)
        ) && !matches!(&operand, Expr::Lit(l) if l.starts_with('"'))
        {
            let temp = scope.fresh_temp();
            out.push(leaf(
                value_kind(&operand, StatementKind::Declaration),
                line,
                vec![temp.clone()],
                expr_vars(&operand, scope),
                format!("var {temp} = {};", print_expr(&operand)),
            ));
            operand = Expr::Name(temp);
        }
        let var = root_var(&operand, scope);
        let hint = operand_var(&operand, scope)
            .as_deref()
            .and_then(|v| scope.lookup(v))
            .filter(|t| *t != "var")
            .map(erase_type);
        Ok((var, hint, Some(print_expr(&operand))))
    }

    // ---- expressions ----

    fn expression(&mut self) -> PResult<Expr> {
        let lhs = self.ternary()?;
        let op = self.assign_op();
        if let Some((op, len)) = op {
            for _ in 0..len {
                self.bump();
            }
            if !matches!(lhs, Expr::Name(_) | Expr::Field(..) | Expr::Index(..)) {
                return Err(self.error("an assignable expression").into());
            }
            let rhs = if self.at("{") {
                self.array_initializer()?
            } else {
                self.expression()?
            };
            return Ok(Expr::Assign(op, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    /// Assignment operator at the cursor and how many tokens it spans.
    fn assign_op(&self) -> Option<(&'static str, usize)> {
        const OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<="];
        let t = self.peek();
        if t.kind == TokenKind::Punct {
            if let Some(op) = OPS.iter().find(|o| t.text == **o) {
                return Some((op, 1));
            }
            // `>>=` and `>>>=` arrive as `>` `>=` / `>` `>` `>=`.
            if t.is(">") && self.adjacent(0) {
                if self.peek_at(1).is(">=") {
                    return Some((">>=", 2));
                }
                if self.peek_at(1).is(">") && self.adjacent(1) && self.peek_at(2).is(">=") {
                    return Some((">>>=", 3));
                }
            }
        }
        None
    }

    /// Whether token `n` is immediately followed by token `n + 1`.
    fn adjacent(&self, n: usize) -> bool {
        let a = self.peek_at(n);
        let b = self.peek_at(n + 1);
        a.line == b.line && a.column + a.text.chars().count() as u32 == b.column
    }

    fn ternary(&mut self) -> PResult<Expr> {
        let cond = self.binary(1)?;
        if self.eat("?") {
            let a = self.ternary_branch()?;
            self.expect(":")?;
            let b = self.ternary()?;
            return Ok(Expr::Cond(Box::new(cond), Box::new(a), Box::new(b)));
        }
        Ok(cond)
    }

    fn ternary_branch(&mut self) -> PResult<Expr> {
        self.ternary()
    }

    /// Binary operator at the cursor: (op, precedence, tokens spanned).
    fn binary_op_here(&self) -> Option<(&'static str, u8, usize)> {
        let t = self.peek();
        if t.kind != TokenKind::Punct {
            if t.is("instanceof") {
                return Some(("instanceof", 7, 1));
            }
            return None;
        }
        if t.is(">") && self.adjacent(0) && self.peek_at(1).is(">") {
            if self.adjacent(1) && self.peek_at(2).is(">") {
                if self.adjacent(2) && self.peek_at(3).is(">=") {
                    return None;
                }
                return Some((">>>", 8, 3));
            }
            if self.adjacent(1) && self.peek_at(2).is(">=") {
                return None;
            }
            return Some((">>", 8, 2));
        }
        if t.is(">") && self.adjacent(0) && self.peek_at(1).is(">=") {
            return None;
        }
        binary_op(&t.text).map(|(op, p)| (op, p, 1))
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some((op, prec, len)) = self.binary_op_here() {
            if prec < min_prec {
                break;
            }
            for _ in 0..len {
                self.bump();
            }
            if op == "instanceof" {
                self.eat("final");
                let ty = self.parse_type()?;
                if self.at_ident() && !RESERVED.contains(&self.peek().text.as_str()) {
                    // Pattern matching binds a variable.
                    return Err(Fail::Unsupported);
                }
                lhs = Expr::InstanceOf(Box::new(lhs), ty);
                continue;
            }
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let t = self.peek().clone();
        if t.kind == TokenKind::Punct {
            match t.text.as_str() {
                "+" | "-" | "!" | "~" => {
                    self.bump();
                    let op: &'static str = match t.text.as_str() {
                        "+" => "+",
                        "-" => "-",
                        "!" => "!",
                        _ => "~",
                    };
                    let inner = self.unary()?;
                    return Ok(Expr::Unary(op, Box::new(inner)));
                }
                "++" | "--" => {
                    self.bump();
                    let op = if t.text == "++" { "++" } else { "--" };
                    let inner = self.unary()?;
                    return Ok(Expr::Update(op, true, Box::new(inner)));
                }
                "(" => {
                    if let Some(cast) = self.try_cast()? {
                        return Ok(cast);
                    }
                }
                _ => {}
            }
        }
        self.postfix()
    }

    fn try_cast(&mut self) -> PResult<Option<Expr>> {
        let save = self.pos;
        self.bump();
        let ty = match self.parse_type() {
            Ok(ty) => ty,
            Err(_) => {
                self.pos = save;
                return Ok(None);
            }
        };
        if !self.eat(")") {
            self.pos = save;
            return Ok(None);
        }
        let next = self.peek();
        let primitive = PRIMITIVES.contains(&ty.as_str());
        let starts_operand = (next.kind == TokenKind::Ident
            && !["instanceof"].contains(&next.text.as_str()))
            || next.kind == TokenKind::Literal
            || next.is("(")
            || next.is("!")
            || next.is("~");
        let starts_signed = next.is("-") || next.is("+");
        if starts_operand || (primitive && starts_signed) {
            let inner = self.unary()?;
            return Ok(Some(Expr::Cast(ty, Box::new(inner))));
        }
        self.pos = save;
        Ok(None)
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.at(".") {
                self.bump();
                if self.at("<") || self.at("new") {
                    return Err(Fail::Unsupported);
                }
                if self.eat("class") {
                    let name = e
                        .dotted_name()
                        .ok_or_else(|| Fail::Syntax(self.error("a type before `.class`")))?;
                    e = Expr::ClassLit(name);
                    continue;
                }
                if self.eat("this") {
                    e = Expr::This;
                    continue;
                }
                let line = self.peek().line;
                let name = self.ident()?;
                if self.at("(") {
                    let args = self.arguments()?;
                    e = Expr::Call {
                        recv: Some(Box::new(e)),
                        name,
                        args,
                        line,
                    };
                } else {
                    e = Expr::Field(Box::new(e), name);
                }
            } else if self.at("[") {
                self.bump();
                let idx = self.expression()?;
                self.expect("]")?;
                e = Expr::Index(Box::new(e), Box::new(idx));
            } else if self.at("++") || self.at("--") {
                let op = if self.bump().text == "++" { "++" } else { "--" };
                e = Expr::Update(op, false, Box::new(e));
            } else if self.at("::") || self.at("->") {
                return Err(Fail::Unsupported);
            } else {
                return Ok(e);
            }
        }
    }

    fn arguments(&mut self) -> PResult<Vec<Expr>> {
        self.expect("(")?;
        let mut args = Vec::new();
        if self.eat(")") {
            return Ok(args);
        }
        loop {
            args.push(self.expression()?);
            if self.eat(")") {
                return Ok(args);
            }
            self.expect(",")?;
        }
    }

    fn array_initializer(&mut self) -> PResult<Expr> {
        self.expect("{")?;
        let mut items = Vec::new();
        loop {
            if self.eat("}") {
                return Ok(Expr::ArrayInit(items));
            }
            items.push(if self.at("{") {
                self.array_initializer()?
            } else {
                self.expression()?
            });
            if !self.eat(",") {
                self.expect("}")?;
                return Ok(Expr::ArrayInit(items));
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.peek().clone();
        match t.kind {
            TokenKind::Literal => {
                self.bump();
                Ok(Expr::Lit(t.text))
            }
            TokenKind::Ident => match t.text.as_str() {
                "true" | "false" | "null" => {
                    self.bump();
                    Ok(Expr::Lit(t.text))
                }
                "this" => {
                    self.bump();
                    if self.at("(") {
                        return Err(Fail::Unsupported);
                    }
                    Ok(Expr::This)
                }
                "super" => {
                    self.bump();
                    if self.at("(") {
                        return Err(Fail::Unsupported);
                    }
                    Ok(Expr::Super)
                }
                "new" => self.creator(),
                "switch" => Err(Fail::Unsupported),
                w if PRIMITIVES.contains(&w) => {
                    // `int.class`, `int[].class`
                    let ty = self.parse_type()?;
                    if self.eat(".") && self.eat("class") {
                        return Ok(Expr::ClassLit(ty));
                    }
                    Err(self.error("`.class`").into())
                }
                w if RESERVED.contains(&w) => Err(self.error("an expression").into()),
                _ => {
                    if self.peek_at(1).is("->") {
                        return Err(Fail::Unsupported);
                    }
                    let name = self.bump().text;
                    if self.at("(") {
                        let args = self.arguments()?;
                        return Ok(Expr::Call {
                            recv: None,
                            name,
                            args,
                            line: t.line,
                        });
                    }
                    if self.at("[") && self.peek_at(1).is("]") {
                        // `String[].class`
                        let mut ty = name;
                        while self.at("[") && self.peek_at(1).is("]") {
                            self.bump();
                            self.bump();
                            ty.push_str("[]");
                        }
                        self.expect(".")?;
                        self.expect("class")?;
                        return Ok(Expr::ClassLit(ty));
                    }
                    Ok(Expr::Name(name))
                }
            },
            TokenKind::Punct if t.is("(") => {
                if self.closing_paren_followed_by_arrow() {
                    return Err(Fail::Unsupported);
                }
                self.bump();
                let e = self.expression()?;
                self.expect(")")?;
                Ok(e)
            }
            _ => Err(self.error("an expression").into()),
        }
    }

    fn closing_paren_followed_by_arrow(&self) -> bool {
        let mut depth = 0;
        let mut i = self.pos;
        while i < self.toks.len() {
            let t = &self.toks[i];
            if t.is("(") {
                depth += 1;
            } else if t.is(")") {
                depth -= 1;
                if depth == 0 {
                    return self.toks.get(i + 1).is_some_and(|n| n.is("->"));
                }
            } else if t.kind == TokenKind::Eof || t.is(";") {
                return false;
            }
            i += 1;
        }
        false
    }

    fn creator(&mut self) -> PResult<Expr> {
        let line = self.bump().line;
        self.skip_annotations()?;
        if !self.at_ident() {
            return Err(self.error("a type").into());
        }
        let mut ty = self.bump().text;
        loop {
            if self.at("<") {
                ty.push_str(&self.skip_type_arguments()?);
            }
            if self.at(".") && self.peek_at(1).kind == TokenKind::Ident {
                self.bump();
                ty.push('.');
                ty.push_str(&self.bump().text);
            } else {
                break;
            }
        }
        if self.at("[") {
            let mut dims = Vec::new();
            while self.eat("[") {
                if self.eat("]") {
                    dims.push(None);
                } else {
                    dims.push(Some(self.expression()?));
                    self.expect("]")?;
                }
            }
            let init = if self.at("{") {
                match self.array_initializer()? {
                    Expr::ArrayInit(items) => Some(items),
                    _ => None,
                }
            } else {
                None
            };
            return Ok(Expr::NewArray { ty, dims, init });
        }
        let args = self.arguments()?;
        if self.at("{") {
            // Anonymous class body.
            return Err(Fail::Unsupported);
        }
        Ok(Expr::New { ty, args, line })
    }
}

fn leaf(
    kind: StatementKind,
    line: u32,
    defs: Vec<String>,
    uses: Vec<String>,
    text: impl Into<String>,
) -> Statement {
    Statement {
        kind,
        line,
        defs,
        uses,
        call: None,
        children: vec![],
        branches: vec![],
        text: text.into(),
    }
}

fn value_kind(value: &Expr, otherwise: StatementKind) -> StatementKind {
    match value {
        Expr::Binary("+", _, _) => StatementKind::Concat,
        _ => otherwise,
    }
}

/// Variable written by a plain `x = ...` or `this.x = ...`.
fn simple_target(target: &Expr, scope: &Scope) -> Option<String> {
    match target {
        Expr::Name(n) if scope.is_var(n) => Some(n.clone()),
        Expr::Field(base, f) if matches!(**base, Expr::This) && scope.fields.contains_key(f) => {
            Some(f.clone())
        }
        _ => None,
    }
}

fn root_var(e: &Expr, scope: &Scope) -> Option<String> {
    match e {
        Expr::Name(n) if scope.is_var(n) => Some(n.clone()),
        Expr::Field(base, f) if matches!(**base, Expr::This) && scope.fields.contains_key(f) => {
            Some(f.clone())
        }
        Expr::Field(base, _) | Expr::Index(base, _) => root_var(base, scope),
        _ => None,
    }
}

fn is_operand(e: &Expr, scope: &Scope) -> bool {
    match e {
        Expr::Lit(_) | Expr::This | Expr::ClassLit(_) => true,
        Expr::Unary("-", inner) => matches!(**inner, Expr::Lit(_)),
        Expr::Name(_) => true,
        Expr::Field(base, f) if matches!(**base, Expr::This) => scope.fields.contains_key(f),
        // Static constants such as `Level.INFO`.
        Expr::Field(..) => e.head_name().is_some_and(|h| !scope.is_var(h)),
        _ => false,
    }
}

fn operand_var(e: &Expr, scope: &Scope) -> Option<String> {
    match e {
        Expr::Name(n) if scope.is_var(n) => Some(n.clone()),
        Expr::Field(base, f) if matches!(**base, Expr::This) && scope.fields.contains_key(f) => {
            Some(f.clone())
        }
        _ => None,
    }
}

/// Variables (locals, parameters, fields) read by a call-free expression,
/// in order of first appearance.
fn expr_vars(e: &Expr, scope: &Scope) -> Vec<String> {
    fn walk(e: &Expr, scope: &Scope, acc: &mut Vec<String>) {
        match e {
            Expr::Name(n) => {
                if scope.is_var(n) {
                    push_unique(acc, n);
                }
            }
            Expr::Field(base, f) => {
                if matches!(**base, Expr::This) && scope.fields.contains_key(f) {
                    push_unique(acc, f);
                } else {
                    walk(base, scope, acc);
                }
            }
            Expr::Lit(_) | Expr::This | Expr::Super | Expr::ClassLit(_) => {}
            Expr::Call { recv, args, .. } => {
                if let Some(r) = recv {
                    walk(r, scope, acc);
                }
                args.iter().for_each(|a| walk(a, scope, acc));
            }
            Expr::New { args, .. } => args.iter().for_each(|a| walk(a, scope, acc)),
            Expr::NewArray { dims, init, .. } => {
                dims.iter().flatten().for_each(|d| walk(d, scope, acc));
                init.iter().flatten().for_each(|i| walk(i, scope, acc));
            }
            Expr::ArrayInit(items) => items.iter().for_each(|i| walk(i, scope, acc)),
            Expr::Index(a, b) | Expr::Binary(_, a, b) | Expr::Assign(_, a, b) => {
                walk(a, scope, acc);
                walk(b, scope, acc);
            }
            Expr::Unary(_, a)
            | Expr::Update(_, _, a)
            | Expr::Cast(_, a)
            | Expr::InstanceOf(a, _) => walk(a, scope, acc),
            Expr::Cond(a, b, c) => {
                walk(a, scope, acc);
                walk(b, scope, acc);
                walk(c, scope, acc);
            }
        }
    }
    let mut acc = Vec::new();
    walk(e, scope, &mut acc);
    acc
}
