//! Multi-label ARFF: label attributes first, then features; the relation name
//! carries `-C <labels>`.

use std::fmt::Write;

use thiserror::Error;

use super::{FeatureError, FeatureKind, FeatureSchema, FeatureVector};
use crate::labels::{Label, LabelSet, LABEL_COUNT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("ARFF line {line}: {message}")]
pub struct ArffError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ArffError> {
    Err(ArffError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArffType {
    Numeric,
    Nominal(Vec<String>),
    String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArffAttribute {
    pub name: String,
    pub ty: ArffType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArffDocument {
    pub relation: String,
    pub attributes: Vec<ArffAttribute>,
    /// Raw cell text, unquoted; one row per data line.
    pub rows: Vec<Vec<String>>,
}

impl ArffDocument {
    /// The `-C n` label count in the relation name, if present.
    pub fn label_count(&self) -> Option<usize> {
        let mut words = self.relation.split_whitespace();
        while let Some(w) = words.next() {
            if w == "-C" {
                return words.next()?.parse().ok();
            }
        }
        None
    }
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || !s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

fn quote(s: &str) -> String {
    if needs_quotes(s) {
        format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
    } else {
        s.to_string()
    }
}

/// Splits on top-level `sep`, honouring single and double quotes and
/// backslash escapes inside them. Returned items are trimmed and unquoted.
fn split_quoted(s: &str, sep: char, line: usize) -> Result<Vec<String>, ArffError> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut was_quoted = false;
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        match quote {
            Some(q) => {
                if c == '\\' {
                    match chars.next() {
                        Some(n) => cur.push(n),
                        None => return err(line, "dangling escape"),
                    }
                } else if c == q {
                    quote = None;
                } else {
                    cur.push(c);
                }
            }
            None => {
                if c == '\'' || c == '"' {
                    quote = Some(c);
                    was_quoted = true;
                } else if c == sep {
                    out.push(finish(&mut cur, &mut was_quoted));
                } else {
                    cur.push(c);
                }
            }
        }
    }
    if quote.is_some() {
        return err(line, "unterminated quote");
    }
    out.push(finish(&mut cur, &mut was_quoted));
    Ok(out)
}

fn finish(cur: &mut String, was_quoted: &mut bool) -> String {
    let s = std::mem::take(cur);
    if *was_quoted {
        *was_quoted = false;
        s
    } else {
        s.trim().to_string()
    }
}

/// Reads the first whitespace-delimited, possibly quoted word of `s` and
/// returns it with the remainder.
fn take_word(s: &str, line: usize) -> Result<(String, &str), ArffError> {
    let s = s.trim_start();
    if let Some(q) = s.chars().next().filter(|c| *c == '\'' || *c == '"') {
        let mut word = String::new();
        let mut iter = s.char_indices().skip(1);
        while let Some((i, c)) = iter.next() {
            if c == '\\' {
                if let Some((_, n)) = iter.next() {
                    word.push(n);
                }
            } else if c == q {
                return Ok((word, &s[i + 1..]));
            } else {
                word.push(c);
            }
        }
        return err(line, "unterminated quote");
    }
    let end = s.find(char::is_whitespace).unwrap_or(s.len());
    if end == 0 {
        return err(line, "expected a name");
    }
    Ok((s[..end].to_string(), &s[end..]))
}

pub fn parse_arff(text: &str) -> Result<ArffDocument, ArffError> {
    let mut relation = None;
    let mut attributes = Vec::new();
    let mut rows = Vec::new();
    let mut in_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if in_data {
            if line.starts_with('{') {
                return err(line_no, "sparse rows are not supported");
            }
            let cells = split_quoted(line, ',', line_no)?;
            if cells.len() != attributes.len() {
                return err(
                    line_no,
                    format!("{} cells, expected {}", cells.len(), attributes.len()),
                );
            }
            rows.push(cells);
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            let (name, _) = take_word(&line["@relation".len()..], line_no)?;
            relation = Some(name);
        } else if lower.starts_with("@attribute") {
            let (name, rest) = take_word(&line["@attribute".len()..], line_no)?;
            let rest = rest.trim();
            let ty = if rest.starts_with('{') {
                let Some(body) = rest.strip_prefix('{').and_then(|r| r.strip_suffix('}')) else {
                    return err(line_no, "unterminated nominal set");
                };
                ArffType::Nominal(split_quoted(body, ',', line_no)?)
            } else {
                match rest.to_ascii_lowercase().as_str() {
                    "numeric" | "real" | "integer" => ArffType::Numeric,
                    "string" => ArffType::String,
                    other => return err(line_no, format!("unsupported attribute type `{other}`")),
                }
            };
            attributes.push(ArffAttribute { name, ty });
        } else if lower == "@data" {
            in_data = true;
        } else {
            return err(line_no, format!("unexpected header line `{line}`"));
        }
    }
    let Some(relation) = relation else {
        return err(0, "missing @relation");
    };
    if !in_data {
        return err(0, "missing @data");
    }
    Ok(ArffDocument {
        relation,
        attributes,
        rows,
    })
}

/// Writes labelled vectors as ARFF: 10 `{0,1}` label attributes, then the
/// schema's features. Categorical cells are written as category names.
pub fn emit_arff(
    rows: &[(FeatureVector, LabelSet)],
    schema: &FeatureSchema,
) -> Result<String, FeatureError> {
    for (i, (v, _)) in rows.iter().enumerate() {
        schema
            .check(v)
            .map_err(|reason| FeatureError::SchemaMismatch { index: i, reason })?;
    }
    let mut out = String::new();
    let _ = writeln!(out, "% schema {}", schema.version);
    let _ = writeln!(out, "@relation 'srm-features: -C {LABEL_COUNT}'\n");
    for l in Label::ALL {
        let _ = writeln!(out, "@attribute {} {{0,1}}", l.id());
    }
    for e in &schema.entries {
        let ty = match e.kind {
            FeatureKind::Numeric => "numeric".to_string(),
            FeatureKind::Binary => "{0,1}".to_string(),
            FeatureKind::Categorical => {
                let cats: Vec<String> = e.categories.iter().flatten().map(|c| quote(c)).collect();
                format!("{{{}}}", cats.join(","))
            }
        };
        let _ = writeln!(out, "@attribute {} {ty}", quote(&e.id));
    }
    out.push_str("\n@data\n");
    for (v, labels) in rows {
        let mut cells: Vec<String> = labels
            .to_bools()
            .iter()
            .map(|b| if *b { "1" } else { "0" }.to_string())
            .collect();
        for (e, x) in schema.entries.iter().zip(&v.values) {
            cells.push(match e.kind {
                FeatureKind::Numeric => format!("{x}"),
                FeatureKind::Binary => format!("{}", *x as u8),
                FeatureKind::Categorical => {
                    quote(&e.categories.as_ref().expect("categorical entry")[*x as usize])
                }
            });
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Reads an ARFF file written by [`emit_arff`] back into labelled vectors.
pub fn read_arff(
    text: &str,
    schema: &FeatureSchema,
) -> Result<Vec<(FeatureVector, LabelSet)>, ArffError> {
    let doc = parse_arff(text)?;
    if doc.label_count() != Some(LABEL_COUNT) {
        return err(0, format!("relation must declare `-C {LABEL_COUNT}`"));
    }
    if doc.attributes.len() != LABEL_COUNT + schema.len() {
        return err(
            0,
            format!(
                "{} attributes, expected {}",
                doc.attributes.len(),
                LABEL_COUNT + schema.len()
            ),
        );
    }
    for (a, l) in doc.attributes.iter().zip(Label::ALL) {
        if a.name != l.id() {
            return err(
                0,
                format!("label attribute `{}` should be `{}`", a.name, l.id()),
            );
        }
    }
    for (a, e) in doc.attributes[LABEL_COUNT..].iter().zip(&schema.entries) {
        if a.name != e.id {
            return err(
                0,
                format!("feature attribute `{}` should be `{}`", a.name, e.id),
            );
        }
    }
    let mut out = Vec::with_capacity(doc.rows.len());
    for (r, row) in doc.rows.iter().enumerate() {
        let bad = |m: String| ArffError {
            line: 0,
            message: format!("data row {}: {m}", r + 1),
        };
        let mut bits = [false; LABEL_COUNT];
        for (i, cell) in row[..LABEL_COUNT].iter().enumerate() {
            bits[i] = match cell.as_str() {
                "1" => true,
                "0" => false,
                other => return Err(bad(format!("label cell `{other}` is not 0/1"))),
            };
        }
        let mut values = Vec::with_capacity(schema.len());
        for (e, cell) in schema.entries.iter().zip(&row[LABEL_COUNT..]) {
            let x = match e.kind {
                FeatureKind::Numeric | FeatureKind::Binary => cell
                    .parse::<f64>()
                    .map_err(|_| bad(format!("`{cell}` is not a number for `{}`", e.id)))?,
                FeatureKind::Categorical => e
                    .categories
                    .iter()
                    .flatten()
                    .position(|c| c == cell)
                    .ok_or_else(|| bad(format!("unknown category `{cell}` for `{}`", e.id)))?
                    as f64,
            };
            values.push(x);
        }
        let v = FeatureVector {
            schema_version: schema.version.clone(),
            values,
        };
        schema.check(&v).map_err(bad)?;
        out.push((v, LabelSet::from_bools(&bits)));
    }
    Ok(out)
}
