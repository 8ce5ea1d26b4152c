//! Tokenizer for the supported Java subset.

use super::SyntaxError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    /// Numeric, string, char or text-block literal; `text` keeps the raw spelling.
    Literal,
    Punct,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
    pub column: u32,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.kind != TokenKind::Literal && self.text == text
    }
}

// Longest match first. `>` is always a single token so that nested generic
// closers lex cleanly; the parser reassembles shifts.
const PUNCT: &[&str] = &[
    "<<=", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=", "+=", "-=", "*=",
    "/=", "%=", "&=", "|=", "^=", "<<", "(", ")", "{", "}", "[", "]", ";", ",", ".", "@", "=", "<",
    ">", "!", "~", "?", ":", "+", "-", "*", "/", "&", "|", "^", "%",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut line_start = 0usize;

    macro_rules! col {
        ($at:expr) => {
            (src[line_start..$at].chars().count() + 1) as u32
        };
    }

    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            line += 1;
            i += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if src[i..].starts_with("/*") {
            let (start_line, start_col) = (line, col!(i));
            i += 2;
            loop {
                if i >= bytes.len() {
                    return Err(SyntaxError::new(
                        start_line,
                        start_col,
                        "end of block comment `*/`",
                    ));
                }
                if src[i..].starts_with("*/") {
                    i += 2;
                    break;
                }
                if bytes[i] == b'\n' {
                    line += 1;
                    line_start = i + 1;
                }
                i += 1;
            }
            continue;
        }

        let start = i;
        let column = col!(i);
        let start_line = line;

        let kind = if src[i..].starts_with("\"\"\"") {
            i += 3;
            loop {
                if i >= bytes.len() {
                    return Err(SyntaxError::new(start_line, column, "closing `\"\"\"`"));
                }
                if bytes[i] == b'\\' {
                    i += 2;
                    continue;
                }
                if src[i..].starts_with("\"\"\"") {
                    i += 3;
                    break;
                }
                if bytes[i] == b'\n' {
                    line += 1;
                    line_start = i + 1;
                }
                i += 1;
            }
            TokenKind::Literal
        } else if c == b'"' || c == b'\'' {
            i += 1;
            loop {
                if i >= bytes.len() || bytes[i] == b'\n' {
                    return Err(SyntaxError::new(
                        start_line,
                        column,
                        format!("closing `{}`", c as char),
                    ));
                }
                if bytes[i] == b'\\' {
                    i += 2;
                    continue;
                }
                if bytes[i] == c {
                    i += 1;
                    break;
                }
                i += 1;
            }
            TokenKind::Literal
        } else if c.is_ascii_digit()
            || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit))
        {
            while i < bytes.len() {
                let b = bytes[i];
                let exponent_sign = (b == b'+' || b == b'-')
                    && matches!(bytes[i - 1], b'e' | b'E')
                    && !src[start..].starts_with("0x");
                if b.is_ascii_alphanumeric() || b == b'.' || b == b'_' || exponent_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            TokenKind::Literal
        } else if c == b'_' || c == b'$' || c.is_ascii_alphabetic() || c >= 0x80 {
            while i < bytes.len() {
                let b = bytes[i];
                if b == b'_' || b == b'$' || b.is_ascii_alphanumeric() || b >= 0x80 {
                    i += 1;
                } else {
                    break;
                }
            }
            TokenKind::Ident
        } else if let Some(p) = PUNCT.iter().find(|p| src[i..].starts_with(**p)) {
            i += p.len();
            TokenKind::Punct
        } else {
            return Err(SyntaxError::new(
                line,
                column,
                format!(
                    "a token, found `{}`",
                    src[i..].chars().next().unwrap_or(' ')
                ),
            ));
        };

        tokens.push(Token {
            kind,
            text: src[start..i].to_string(),
            line: start_line,
            column,
        });
    }

    tokens.push(Token {
        kind: TokenKind::Eof,
        text: String::new(),
        line,
        column: col!(bytes.len()),
    });
    Ok(tokens)
}
