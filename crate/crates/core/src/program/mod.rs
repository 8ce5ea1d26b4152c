//! Java-subset front end: tokenizer, parser with call lowering, program
//! index and pretty printer.

mod expr;
mod index;
mod lexer;
mod model;
mod parser;
mod printer;
mod wellformed;

use std::fmt;

use thiserror::Error;

pub use index::{index_program, resolve_calls, IndexError};
pub use lexer::{tokenize, Token, TokenKind};
pub use model::*;
pub use parser::parse_source;
pub use printer::{print_class, print_classes};
pub use wellformed::check_well_formed;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct SyntaxError {
    pub line: u32,
    pub column: u32,
    pub expected: String,
    pub found: Option<String>,
}

impl SyntaxError {
    pub fn new(line: u32, column: u32, expected: impl Into<String>) -> Self {
        SyntaxError {
            line,
            column,
            expected: expected.into(),
            found: None,
        }
    }

    pub fn found(mut self, found: impl Into<String>) -> Self {
        self.found = Some(found.into());
        self
    }
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "expected {}", self.expected)?;
        if let Some(found) = &self.found {
            write!(f, ", found {found}")?;
        }
        Ok(())
    }
}

/// Drops type arguments and whitespace: `Map<String, List<X>>[]` becomes `Map[]`.
pub fn erase_type(ty: &str) -> String {
    let mut out = String::with_capacity(ty.len());
    let mut depth = 0usize;
    for c in ty.chars() {
        match c {
            '<' => depth += 1,
            '>' => depth = depth.saturating_sub(1),
            c if c.is_whitespace() => {}
            c if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

/// `package.Class.method(T1,T2)` with erased parameter types.
pub fn canonical_signature(m: &MethodModel) -> String {
    let params: Vec<String> = m.parameters.iter().map(|p| erase_type(&p.ty)).collect();
    format!(
        "{}.{}({})",
        m.owner.qualified_name(),
        m.name,
        params.join(",")
    )
}

/// A canonical signature split into its parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureParts {
    /// Qualified declaring class.
    pub class: String,
    pub name: String,
    pub params: Vec<String>,
}

impl SignatureParts {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn simple_class(&self) -> &str {
        self.class.rsplit('.').next().unwrap_or(&self.class)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid signature `{signature}`: {reason}")]
pub struct SignatureError {
    pub signature: String,
    pub reason: String,
}

fn is_name_part(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_alphanumeric() || c == '_' || c == '$')
        && !s.starts_with(|c: char| c.is_ascii_digit())
}

fn is_type_text(s: &str) -> bool {
    let base = s.trim_end_matches("[]");
    !base.is_empty() && !base.contains('[') && base.split('.').all(is_name_part)
}

/// Parses `pkg.Class.method(T1,T2)`. Whitespace and generic arguments are
/// rejected; a canonical signature never contains them.
pub fn parse_signature(signature: &str) -> Result<SignatureParts, SignatureError> {
    let fail = |reason: &str| SignatureError {
        signature: signature.to_string(),
        reason: reason.to_string(),
    };
    if signature.chars().any(char::is_whitespace) {
        return Err(fail("contains whitespace"));
    }
    let open = signature.find('(').ok_or_else(|| fail("missing `(`"))?;
    if !signature.ends_with(')') {
        return Err(fail("missing closing `)`"));
    }
    let head = &signature[..open];
    let args = &signature[open + 1..signature.len() - 1];
    let dot = head
        .rfind('.')
        .ok_or_else(|| fail("missing declaring class"))?;
    let class = &head[..dot];
    let name = &head[dot + 1..];
    if !class.split('.').all(is_name_part) {
        return Err(fail("malformed class name"));
    }
    if name != CONSTRUCTOR_NAME && !is_name_part(name) {
        return Err(fail("malformed method name"));
    }
    let params: Vec<String> = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',').map(str::to_string).collect()
    };
    if let Some(bad) = params.iter().find(|p| !is_type_text(p)) {
        return Err(fail(&format!("malformed parameter type `{bad}`")));
    }
    Ok(SignatureParts {
        class: class.to_string(),
        name: name.to_string(),
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erasure_drops_type_arguments() {
        assert_eq!(erase_type("Map<String, List<X>>[]"), "Map[]");
        assert_eq!(erase_type("int"), "int");
    }

    #[test]
    fn signature_parts() {
        let p = parse_signature("org.owasp.esapi.Encoder.encodeForSQL(Codec,String)").unwrap();
        assert_eq!(p.class, "org.owasp.esapi.Encoder");
        assert_eq!(p.simple_class(), "Encoder");
        assert_eq!(p.name, "encodeForSQL");
        assert_eq!(p.params, ["Codec", "String"]);
        assert_eq!(parse_signature("A.<init>()").unwrap().arity(), 0);
        assert!(parse_signature("A.f(String, int)").is_err());
        assert!(parse_signature("f(int)").is_err());
        assert!(parse_signature("A.f(int").is_err());
        assert!(parse_signature("A.f(,)").is_err());
    }
}
