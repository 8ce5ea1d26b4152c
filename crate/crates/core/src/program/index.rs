use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use super::model::*;
use super::parser::parse_source;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("none of the {} input files could be parsed", diagnostics.len())]
    NothingParsed { diagnostics: Vec<Diagnostic> },
}

/// Parses every file, builds the method index and resolves call sites.
///
/// Files are processed in uri order regardless of input order. Files that
/// fail to parse are reported as diagnostics; the call fails only when there
/// were files and none of them parsed.
pub fn index_program(files: &[SourceFile]) -> Result<(ProgramModel, Vec<Diagnostic>), IndexError> {
    let mut sorted: Vec<&SourceFile> = files.iter().collect();
    sorted.sort_by(|a, b| a.uri.cmp(&b.uri).then_with(|| a.content.cmp(&b.content)));

    let mut diagnostics = Vec::new();
    let mut unique: Vec<&SourceFile> = Vec::with_capacity(sorted.len());
    for f in sorted {
        if unique.last().is_some_and(|prev| prev.uri == f.uri) {
            diagnostics.push(Diagnostic {
                uri: f.uri.clone(),
                line: 1,
                column: 1,
                message: "duplicate file uri; later copy ignored".into(),
            });
        } else {
            unique.push(f);
        }
    }

    let parsed: Vec<_> = unique
        .par_iter()
        .map(|f| parse_source(&f.content, &f.uri))
        .collect();

    let mut model = ProgramModel::default();
    let mut parse_failures = Vec::new();
    for (file, result) in unique.iter().zip(parsed) {
        match result {
            Ok(classes) => {
                model.files.push((*file).clone());
                model.classes.extend(classes);
            }
            Err(e) => parse_failures.push(Diagnostic {
                uri: file.uri.clone(),
                line: e.line,
                column: e.column,
                message: e.to_string(),
            }),
        }
    }
    if !unique.is_empty() && model.files.is_empty() {
        return Err(IndexError::NothingParsed {
            diagnostics: parse_failures,
        });
    }
    diagnostics.extend(parse_failures);

    let mut index = BTreeMap::new();
    for (id, m) in model.methods() {
        let sig = m.signature();
        match index.entry(sig) {
            std::collections::btree_map::Entry::Occupied(e) => diagnostics.push(Diagnostic {
                uri: m.uri.clone(),
                line: m.line_span.start,
                column: 1,
                message: format!("duplicate method `{}`; first declaration kept", e.key()),
            }),
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(id);
            }
        }
    }
    model.method_index = index;
    diagnostics.extend(resolve_calls(&mut model));
    Ok((model, diagnostics))
}

fn class_matches(class: &ClassModel, hint: &str) -> bool {
    class.name == hint
        || class.qualified_name() == hint
        || class.name.rsplit('.').next() == Some(hint)
}

/// Fills `resolved_signature` on every call site by name and arity.
///
/// A receiver type hint naming a project class restricts the candidates to
/// that class; a hint naming anything else marks a library call, which stays
/// unresolved. Unqualified calls prefer the caller's own class. Remaining ties
/// pick the lexicographically smallest signature and produce a diagnostic.
pub fn resolve_calls(model: &mut ProgramModel) -> Vec<Diagnostic> {
    // name/arity -> (owner class index, signature)
    let mut by_name: BTreeMap<(&str, usize), Vec<(usize, String)>> = BTreeMap::new();
    for (sig, id) in &model.method_index {
        let m = model.method(*id);
        by_name
            .entry((m.name.as_str(), m.parameters.len()))
            .or_default()
            .push((id.class, sig.clone()));
    }

    let mut resolutions = Vec::new();
    let mut diagnostics = Vec::new();
    for (ci, class) in model.classes.iter().enumerate() {
        for (mi, method) in class.methods.iter().enumerate() {
            let mut calls = Vec::new();
            collect_calls(&method.body, &mut Vec::new(), &mut calls);
            for (path, call) in calls {
                let Some(all) = by_name.get(&(call.callee_name.as_str(), call.arity())) else {
                    continue;
                };
                let candidates: Vec<&(usize, String)> = match &call.receiver_type_hint {
                    Some(hint) => all
                        .iter()
                        .filter(|(owner, _)| class_matches(&model.classes[*owner], hint))
                        .collect(),
                    None if call.is_constructor() => Vec::new(),
                    None => {
                        let own: Vec<_> = if call.receiver_var.is_none() {
                            all.iter().filter(|(owner, _)| *owner == ci).collect()
                        } else {
                            Vec::new()
                        };
                        if own.is_empty() {
                            all.iter().collect()
                        } else {
                            own
                        }
                    }
                };
                let mut sigs: Vec<&str> = candidates.iter().map(|(_, s)| s.as_str()).collect();
                sigs.sort_unstable();
                sigs.dedup();
                let Some(chosen) = sigs.first() else { continue };
                if sigs.len() > 1 {
                    diagnostics.push(Diagnostic {
                        uri: method.uri.clone(),
                        line: call.line,
                        column: 1,
                        message: format!(
                            "ambiguous call `{}` with {} argument(s): candidates {}; chose `{chosen}`",
                            call.callee_name,
                            call.arity(),
                            sigs.join(", ")
                        ),
                    });
                }
                resolutions.push((ci, mi, path, chosen.to_string()));
            }
        }
    }

    for (ci, mi, path, sig) in resolutions {
        let stmt = statement_at_mut(&mut model.classes[ci].methods[mi].body, &path);
        if let Some(call) = stmt.call.as_mut() {
            call.resolved_signature = Some(sig);
        }
    }
    diagnostics
}

/// Step into a statement tree: `(index, None)` selects among the current
/// list, `(index, Some(b))` then descends into branch `b` instead of children.
type Path = Vec<(usize, Option<usize>)>;

fn collect_calls<'a>(
    body: &'a [Statement],
    prefix: &mut Path,
    out: &mut Vec<(Path, &'a CallSite)>,
) {
    for (i, s) in body.iter().enumerate() {
        if let Some(call) = &s.call {
            let mut p = prefix.clone();
            p.push((i, None));
            out.push((p, call));
        }
        prefix.push((i, None));
        collect_calls(&s.children, prefix, out);
        prefix.pop();
        for (b, branch) in s.branches.iter().enumerate() {
            prefix.push((i, Some(b)));
            collect_calls(&branch.body, prefix, out);
            prefix.pop();
        }
    }
}

fn statement_at_mut<'a>(
    body: &'a mut [Statement],
    path: &[(usize, Option<usize>)],
) -> &'a mut Statement {
    let (i, branch) = path[0];
    let stmt = &mut body[i];
    if path.len() == 1 {
        return stmt;
    }
    match branch {
        None => statement_at_mut(&mut stmt.children, &path[1..]),
        Some(b) => statement_at_mut(&mut stmt.branches[b].body, &path[1..]),
    }
}
