use std::collections::BTreeSet;

use super::model::*;

/// Returns one message per statement use that is not a parameter, a field of
/// `class`, or a variable defined by an earlier statement.
pub fn check_well_formed(method: &MethodModel, class: &ClassModel) -> Vec<String> {
    let mut declared: BTreeSet<&str> = method
        .parameters
        .iter()
        .map(|p| p.name.as_str())
        .chain(class.fields.iter().map(|f| f.name.as_str()))
        .collect();
    let mut problems = Vec::new();
    walk(&method.body, &mut declared, &mut problems);
    problems
}

fn walk<'a>(body: &'a [Statement], declared: &mut BTreeSet<&'a str>, problems: &mut Vec<String>) {
    for s in body {
        for u in &s.uses {
            // Opaque statements may define what they use.
            let self_defined = s.kind == StatementKind::Opaque && s.defs.contains(u);
            if !declared.contains(u.as_str()) && !self_defined {
                problems.push(format!("line {}: `{u}` used before declaration", s.line));
            }
        }
        declared.extend(s.defs.iter().map(String::as_str));
        walk(&s.children, declared, problems);
        for b in &s.branches {
            declared.extend(b.defs.iter().map(String::as_str));
            walk(&b.body, declared, problems);
        }
    }
}
