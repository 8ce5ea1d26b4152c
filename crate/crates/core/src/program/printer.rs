//! Prints class models back to Java source in the lowered form.

use std::fmt::Write;

use super::model::*;

/// Prints the classes of one file. Nested classes (`Outer.Inner`) are
/// printed inside their enclosing class.
pub fn print_classes(classes: &[ClassModel]) -> String {
    let mut out = String::new();
    if let Some(first) = classes.first() {
        if !first.package.is_empty() {
            let _ = writeln!(out, "package {};\n", first.package);
        }
    }
    for c in classes.iter().filter(|c| !c.name.contains('.')) {
        write_class(c, classes, 0, &mut out);
    }
    out
}

pub fn print_class(class: &ClassModel) -> String {
    let mut out = String::new();
    write_class(class, &[], 0, &mut out);
    out
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn modifiers(mods: &Modifiers) -> String {
    mods.iter().map(|m| format!("{} ", m.keyword())).collect()
}

fn simple_name(name: &str) -> &str {
    name.rsplit('.').next().unwrap_or(name)
}

fn write_class(c: &ClassModel, all: &[ClassModel], depth: usize, out: &mut String) {
    indent(depth, out);
    let _ = writeln!(
        out,
        "{}{} {} {{",
        modifiers(&c.modifiers),
        c.kind.keyword(),
        simple_name(&c.name)
    );
    if c.kind == ClassKind::Enum {
        indent(depth + 1, out);
        out.push_str(";\n");
    }
    for f in &c.fields {
        indent(depth + 1, out);
        let _ = writeln!(out, "{}{} {};", modifiers(&f.modifiers), f.ty, f.name);
    }
    for m in &c.methods {
        write_method(m, depth + 1, out);
    }
    let prefix = format!("{}.", c.name);
    for inner in all.iter().filter(|i| {
        i.name
            .strip_prefix(&prefix)
            .is_some_and(|rest| !rest.contains('.'))
    }) {
        write_class(inner, all, depth + 1, out);
    }
    indent(depth, out);
    out.push_str("}\n");
}

fn write_method(m: &MethodModel, depth: usize, out: &mut String) {
    indent(depth, out);
    let params: Vec<String> = m
        .parameters
        .iter()
        .map(|p| format!("{} {}", p.ty, p.name))
        .collect();
    if m.is_constructor() {
        let _ = write!(
            out,
            "{}{}({})",
            modifiers(&m.modifiers),
            simple_name(&m.owner.name),
            params.join(", ")
        );
    } else {
        let _ = write!(
            out,
            "{}{} {}({})",
            modifiers(&m.modifiers),
            m.return_type,
            m.name,
            params.join(", ")
        );
    }
    if !m.has_body {
        out.push_str(";\n");
        return;
    }
    out.push_str(" {\n");
    write_block(&m.body, depth + 1, out);
    indent(depth, out);
    out.push_str("}\n");
}

fn write_block(body: &[Statement], depth: usize, out: &mut String) {
    for s in body {
        write_statement(s, depth, out);
    }
}

fn write_statement(s: &Statement, depth: usize, out: &mut String) {
    indent(depth, out);
    match s.kind {
        StatementKind::If | StatementKind::Loop | StatementKind::TryCatch => {
            let _ = writeln!(out, "{} {{", s.text);
            write_block(&s.children, depth + 1, out);
            indent(depth, out);
            out.push('}');
            for b in &s.branches {
                let _ = writeln!(out, " {} {{", b.header);
                write_block(&b.body, depth + 1, out);
                indent(depth, out);
                out.push('}');
            }
            if s.kind == StatementKind::TryCatch && s.branches.is_empty() {
                out.push_str(" finally {\n");
                indent(depth, out);
                out.push('}');
            }
            out.push('\n');
        }
        _ => {
            out.push_str(&s.text);
            out.push('\n');
        }
    }
}
