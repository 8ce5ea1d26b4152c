use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// A source file together with the byte offset at which each line starts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub uri: String,
    pub content: String,
    pub line_index: Vec<usize>,
}

impl SourceFile {
    pub fn new(uri: impl Into<String>, content: impl Into<String>) -> Self {
        let content = content.into();
        let mut line_index = vec![0];
        for (offset, byte) in content.bytes().enumerate() {
            if byte == b'\n' && offset + 1 < content.len() {
                line_index.push(offset + 1);
            }
        }
        SourceFile {
            uri: uri.into(),
            content,
            line_index,
        }
    }

    pub fn line_count(&self) -> usize {
        if self.content.is_empty() {
            0
        } else {
            self.line_index.len()
        }
    }

    /// Text of a 1-based line without its terminator.
    pub fn line(&self, line: usize) -> Option<&str> {
        if line == 0 || line > self.line_count() {
            return None;
        }
        let start = self.line_index[line - 1];
        let end = self
            .line_index
            .get(line)
            .copied()
            .unwrap_or(self.content.len());
        Some(self.content[start..end].trim_end_matches(['\n', '\r']))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modifier {
    Public,
    Private,
    Protected,
    Static,
    Final,
    Abstract,
}

impl Modifier {
    pub fn from_keyword(word: &str) -> Option<Modifier> {
        Some(match word {
            "public" => Modifier::Public,
            "private" => Modifier::Private,
            "protected" => Modifier::Protected,
            "static" => Modifier::Static,
            "final" => Modifier::Final,
            "abstract" => Modifier::Abstract,
            _ => return None,
        })
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Modifier::Public => "public",
            Modifier::Private => "private",
            Modifier::Protected => "protected",
            Modifier::Static => "static",
            Modifier::Final => "final",
            Modifier::Abstract => "abstract",
        }
    }
}

pub type Modifiers = BTreeSet<Modifier>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassKind {
    Class,
    Interface,
    Enum,
}

impl ClassKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ClassKind::Class => "class",
            ClassKind::Interface => "interface",
            ClassKind::Enum => "enum",
        }
    }
}

/// Inclusive, 1-based line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineSpan {
    pub start: u32,
    pub end: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub modifiers: Modifiers,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassModel {
    pub uri: String,
    pub package: String,
    /// Simple name; nested types are written `Outer.Inner`.
    pub name: String,
    pub kind: ClassKind,
    pub modifiers: Modifiers,
    pub fields: Vec<Field>,
    pub methods: Vec<MethodModel>,
    /// Lines of the declaration that carry at least one token.
    pub loc: u32,
    pub line_span: LineSpan,
}

impl ClassModel {
    pub fn qualified_name(&self) -> String {
        qualify(&self.package, &self.name)
    }
}

pub(crate) fn qualify(package: &str, name: &str) -> String {
    if package.is_empty() {
        name.to_string()
    } else {
        format!("{package}.{name}")
    }
}

/// Identifies the class a method is declared in.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassRef {
    pub package: String,
    pub name: String,
}

impl ClassRef {
    pub fn qualified_name(&self) -> String {
        qualify(&self.package, &self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

pub const CONSTRUCTOR_NAME: &str = "<init>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodModel {
    /// `<init>` for constructors.
    pub name: String,
    pub return_type: String,
    pub parameters: Vec<Parameter>,
    pub modifiers: Modifiers,
    /// False for abstract and interface methods declared with `;`.
    pub has_body: bool,
    pub body: Vec<Statement>,
    pub line_span: LineSpan,
    pub loc: u32,
    pub owner: ClassRef,
    pub uri: String,
}

impl MethodModel {
    pub fn is_constructor(&self) -> bool {
        self.name == CONSTRUCTOR_NAME
    }

    pub fn signature(&self) -> String {
        super::canonical_signature(self)
    }

    /// Depth-first iterator over every statement in the body, nested ones included.
    pub fn statements(&self) -> impl Iterator<Item = &Statement> {
        StatementIter {
            stack: self.body.iter().rev().collect(),
        }
    }

    pub fn call_sites(&self) -> impl Iterator<Item = &CallSite> {
        self.statements().filter_map(|s| s.call.as_ref())
    }
}

struct StatementIter<'a> {
    stack: Vec<&'a Statement>,
}

impl<'a> Iterator for StatementIter<'a> {
    type Item = &'a Statement;

    fn next(&mut self) -> Option<&'a Statement> {
        let next = self.stack.pop()?;
        for branch in next.branches.iter().rev() {
            self.stack.extend(branch.body.iter().rev());
        }
        self.stack.extend(next.children.iter().rev());
        Some(next)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    Declaration,
    Assignment,
    Invocation,
    Return,
    If,
    Loop,
    TryCatch,
    Concat,
    /// Construct outside the supported subset; defs and uses are conservative.
    Opaque,
}

/// One lowered statement. Nested calls have already been hoisted into
/// `$tN` temporaries, so `text` is always valid Java for the statement itself
/// (or the header of a compound statement).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub kind: StatementKind,
    pub line: u32,
    pub defs: Vec<String>,
    pub uses: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub call: Option<CallSite>,
    /// Then-branch, loop body or try block.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<Statement>,
    /// Else-branch of an `if`, catch clauses of a `try`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub branches: Vec<Branch>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    /// `else` or `catch (IOException e)`.
    pub header: String,
    pub defs: Vec<String>,
    pub body: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallSite {
    pub line: u32,
    /// Declared type of the receiver variable, or the type name of a static call.
    pub receiver_type_hint: Option<String>,
    /// Receiver when it is a local variable, parameter or field.
    pub receiver_var: Option<String>,
    pub callee_name: String,
    /// One entry per syntactic argument; `None` for literals and constants.
    pub argument_vars: Vec<Option<String>>,
    pub result_var: Option<String>,
    pub resolved_signature: Option<String>,
}

impl CallSite {
    pub fn arity(&self) -> usize {
        self.argument_vars.len()
    }

    pub fn is_constructor(&self) -> bool {
        self.callee_name == CONSTRUCTOR_NAME
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MethodId {
    pub class: usize,
    pub method: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProgramModel {
    pub files: Vec<SourceFile>,
    pub classes: Vec<ClassModel>,
    pub method_index: BTreeMap<String, MethodId>,
}

impl ProgramModel {
    pub fn method(&self, id: MethodId) -> &MethodModel {
        &self.classes[id.class].methods[id.method]
    }

    pub fn lookup(&self, signature: &str) -> Option<&MethodModel> {
        self.method_index.get(signature).map(|id| self.method(*id))
    }

    pub fn owner_of(&self, method: &MethodModel) -> Option<&ClassModel> {
        self.classes
            .iter()
            .find(|c| c.package == method.owner.package && c.name == method.owner.name)
    }

    pub fn file(&self, uri: &str) -> Option<&SourceFile> {
        self.files.iter().find(|f| f.uri == uri)
    }

    /// Every method with its id, in class then declaration order.
    pub fn methods(&self) -> impl Iterator<Item = (MethodId, &MethodModel)> {
        self.classes.iter().enumerate().flat_map(|(ci, class)| {
            class.methods.iter().enumerate().map(move |(mi, m)| {
                (
                    MethodId {
                        class: ci,
                        method: mi,
                    },
                    m,
                )
            })
        })
    }

    pub fn method_count(&self) -> usize {
        self.classes.iter().map(|c| c.methods.len()).sum()
    }
}

/// A parse or indexing problem, printed as `uri:line:col: message`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub uri: String,
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: {}",
            self.uri, self.line, self.column, self.message
        )
    }
}
