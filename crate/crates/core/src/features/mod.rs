//! Fixed-schema feature vectors for methods: 13 structural counts, 99
//! token-presence bits and 7 categorical attributes.

mod arff;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{
    parse_signature, ClassModel, ClassRef, LineSpan, MethodModel, Modifier, Modifiers, Parameter,
    ProgramModel, SignatureError, StatementKind,
};

pub use arff::{
    emit_arff, parse_arff, read_arff, ArffAttribute, ArffDocument, ArffError, ArffType,
};

pub const NUMERIC_COUNT: usize = 13;
pub const BINARY_COUNT: usize = 99;
pub const CATEGORICAL_COUNT: usize = 7;
pub const FEATURE_COUNT: usize = NUMERIC_COUNT + BINARY_COUNT + CATEGORICAL_COUNT;

const DEFAULT_TOKENS: &str = include_str!("../../data/tokens.json");

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("token table: {0}")]
    TokenTable(String),
    #[error("token table is not valid JSON: {0}")]
    TokenJson(#[from] serde_json::Error),
    #[error("feature vector {index} does not match the schema: {reason}")]
    SchemaMismatch { index: usize, reason: String },
    #[error(transparent)]
    Signature(#[from] SignatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenScope {
    MethodName,
    ClassName,
    InvokedNames,
    ParameterTypes,
    ReturnType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub id: String,
    pub token: String,
    pub scopes: Vec<TokenScope>,
}

/// The versioned token lexicon behind the binary features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenTable {
    pub schema_version: String,
    pub entries: Vec<TokenEntry>,
}

impl TokenTable {
    pub fn from_json(text: &str) -> Result<TokenTable, FeatureError> {
        let table: TokenTable = serde_json::from_str(text)?;
        table.validate()?;
        Ok(table)
    }

    /// The table bundled with the crate.
    pub fn bundled() -> TokenTable {
        TokenTable::from_json(DEFAULT_TOKENS).expect("bundled token table is valid")
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let fail = |m: String| Err(FeatureError::TokenTable(m));
        if self.schema_version.is_empty() {
            return fail("schema_version is empty".into());
        }
        if self.entries.len() != BINARY_COUNT {
            return fail(format!(
                "expected {BINARY_COUNT} entries, found {}",
                self.entries.len()
            ));
        }
        let mut ids = std::collections::BTreeSet::new();
        for e in &self.entries {
            if e.token.is_empty() || e.token != e.token.to_lowercase() {
                return fail(format!("token `{}` must be non-empty lowercase", e.token));
            }
            if e.scopes.is_empty() {
                return fail(format!("token `{}` has no scopes", e.token));
            }
            if !ids.insert(e.id.as_str()) {
                return fail(format!("duplicate id `{}`", e.id));
            }
        }
        Ok(())
    }
}

/// True iff `token` occurs in `part`, ignoring case.
pub fn token_match(part: &str, token: &str) -> bool {
    part.to_lowercase().contains(&token.to_lowercase())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Binary,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub id: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    /// Set on features that go beyond the published description.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub extension: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub version: String,
    pub entries: Vec<FeatureEntry>,
}

pub const NUMERIC_IDS: [&str; NUMERIC_COUNT] = [
    "method_loc",
    "invocations",
    "branches",
    "loops",
    "exception_handlers",
    "parameters",
    "vars_defined",
    "vars_used",
    "class_loc",
    "class_methods",
    "class_name_tokens",
    "statements",
    "max_depth",
];

pub const CATEGORICALS: [(&str, &[&str]); CATEGORICAL_COUNT] = [
    (
        "method_visibility",
        &["public", "protected", "private", "default"],
    ),
    ("static", &["yes", "no"]),
    (
        "return_category",
        &[
            "void",
            "primitive",
            "string-like",
            "collection-like",
            "other",
        ],
    ),
    ("parameter_bucket", &["0", "1", "2", "3+"]),
    (
        "class_visibility",
        &["public", "protected", "private", "default"],
    ),
    ("class_abstractness", &["abstract", "concrete"]),
    ("constructor", &["yes", "no"]),
];

impl FeatureSchema {
    pub fn from_tokens(tokens: &TokenTable) -> FeatureSchema {
        let mut entries: Vec<FeatureEntry> = NUMERIC_IDS
            .iter()
            .enumerate()
            .map(|(i, id)| FeatureEntry {
                id: id.to_string(),
                kind: FeatureKind::Numeric,
                categories: None,
                extension: i >= 11,
            })
            .collect();
        entries.extend(tokens.entries.iter().map(|t| FeatureEntry {
            id: t.id.clone(),
            kind: FeatureKind::Binary,
            categories: None,
            extension: false,
        }));
        entries.extend(CATEGORICALS.iter().map(|(id, cats)| FeatureEntry {
            id: id.to_string(),
            kind: FeatureKind::Categorical,
            categories: Some(cats.iter().map(|c| c.to_string()).collect()),
            extension: false,
        }));
        FeatureSchema {
            version: format!("features-1+{}", tokens.schema_version),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, kind: FeatureKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }

    /// Checks that `v` has this schema's version, arity and cell domains.
    pub fn check(&self, v: &FeatureVector) -> Result<(), String> {
        if v.schema_version != self.version {
            return Err(format!(
                "schema version `{}` differs from `{}`",
                v.schema_version, self.version
            ));
        }
        if v.values.len() != self.entries.len() {
            return Err(format!(
                "{} cells, schema has {}",
                v.values.len(),
                self.entries.len()
            ));
        }
        for (e, x) in self.entries.iter().zip(&v.values) {
            let ok = match e.kind {
                FeatureKind::Numeric => x.is_finite() && *x >= 0.0,
                FeatureKind::Binary => *x == 0.0 || *x == 1.0,
                FeatureKind::Categorical => {
                    let n = e.categories.as_ref().map_or(0, Vec::len);
                    x.fract() == 0.0 && *x >= 0.0 && (*x as usize) < n
                }
            };
            if !ok {
                return Err(format!("cell `{}` has invalid value {x}", e.id));
            }
        }
        Ok(())
    }
}

/// One method as 119 cells. Categorical cells hold the category index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema_version: String,
    pub values: Vec<f64>,
}

/// Splits an identifier at case changes, digits and underscores:
/// `HTTPServletRequest` gives `HTTP`, `Servlet`, `Request`.
pub fn camel_case_tokens(name: &str) -> Vec<String> {
    let chars: Vec<char> = name.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphanumeric() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            continue;
        }
        let boundary = current.chars().last().is_some_and(|prev| {
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            (prev.is_lowercase() && c.is_uppercase())
                || (prev.is_uppercase() && c.is_uppercase() && next_lower)
                || (prev.is_ascii_digit() != c.is_ascii_digit())
        });
        if boundary {
            tokens.push(std::mem::take(&mut current));
        }
        current.push(c);
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn is_temp(name: &str) -> bool {
    name.starts_with('$')
}

/// Deepest nesting of compound statements (if, loop, try); a body of plain
/// statements has depth 0.
fn max_depth(body: &[crate::program::Statement]) -> usize {
    body.iter()
        .filter(|s| {
            matches!(
                s.kind,
                StatementKind::If | StatementKind::Loop | StatementKind::TryCatch
            )
        })
        .map(|s| {
            let nested = max_depth(&s.children).max(
                s.branches
                    .iter()
                    .map(|b| max_depth(&b.body))
                    .max()
                    .unwrap_or(0),
            );
            1 + nested
        })
        .max()
        .unwrap_or(0)
}

/// The 13 numeric cells in schema order. Variable counts ignore the
/// synthetic `$tN` temporaries introduced by call lowering.
pub fn structural_counts(m: &MethodModel, owner: Option<&ClassModel>) -> [f64; NUMERIC_COUNT] {
    let mut invocations = 0;
    let mut branches = 0;
    let mut loops = 0;
    let mut handlers = 0;
    let mut statements = 0;
    let mut defined = std::collections::BTreeSet::new();
    let mut used = std::collections::BTreeSet::new();
    for s in m.statements() {
        statements += 1;
        match s.kind {
            StatementKind::Invocation => invocations += 1,
            StatementKind::If => branches += 1,
            StatementKind::Loop => loops += 1,
            StatementKind::TryCatch => handlers += s.branches.len(),
            _ => {}
        }
        defined.extend(s.defs.iter().filter(|d| !is_temp(d)));
        used.extend(s.uses.iter().filter(|u| !is_temp(u)));
        for b in &s.branches {
            defined.extend(b.defs.iter().filter(|d| !is_temp(d)));
        }
    }
    let (class_loc, class_methods, class_tokens) = match owner {
        Some(c) => (
            c.loc as usize,
            c.methods.len(),
            camel_case_tokens(c.name.rsplit('.').next().unwrap_or(&c.name)).len(),
        ),
        None => (
            0,
            0,
            camel_case_tokens(m.owner.name.rsplit('.').next().unwrap_or(&m.owner.name)).len(),
        ),
    };
    [
        m.loc as f64,
        invocations as f64,
        branches as f64,
        loops as f64,
        handlers as f64,
        m.parameters.len() as f64,
        defined.len() as f64,
        used.len() as f64,
        class_loc as f64,
        class_methods as f64,
        class_tokens as f64,
        statements as f64,
        max_depth(&m.body) as f64,
    ]
}

fn visibility(mods: &Modifiers) -> usize {
    if mods.contains(&Modifier::Public) {
        0
    } else if mods.contains(&Modifier::Protected) {
        1
    } else if mods.contains(&Modifier::Private) {
        2
    } else {
        3
    }
}

const PRIMITIVE_TYPES: &[&str] = &[
    "boolean", "byte", "char", "short", "int", "long", "float", "double",
];
const STRING_TYPES: &[&str] = &["String", "CharSequence", "StringBuilder", "StringBuffer"];
const COLLECTION_TYPES: &[&str] = &[
    "Collection",
    "List",
    "ArrayList",
    "LinkedList",
    "Set",
    "HashSet",
    "LinkedHashSet",
    "TreeSet",
    "SortedSet",
    "Map",
    "HashMap",
    "LinkedHashMap",
    "TreeMap",
    "SortedMap",
    "Hashtable",
    "Properties",
    "Iterable",
    "Iterator",
    "Enumeration",
    "Stream",
    "Queue",
    "Deque",
    "ArrayDeque",
    "Vector",
    "Stack",
    "Optional",
];

/// Index into the `return_category` categories.
pub fn return_category(ty: &str) -> usize {
    let erased = crate::program::erase_type(ty);
    let simple = erased.rsplit('.').next().unwrap_or(&erased);
    if simple == "void" {
        0
    } else if simple.ends_with("[]") {
        if simple == "char[]" {
            2
        } else {
            3
        }
    } else if PRIMITIVE_TYPES.contains(&simple) {
        1
    } else if STRING_TYPES.contains(&simple) {
        2
    } else if COLLECTION_TYPES.contains(&simple) {
        3
    } else {
        4
    }
}

fn categorical_cells(m: &MethodModel, owner: Option<&ClassModel>) -> [usize; CATEGORICAL_COUNT] {
    let class_mods = owner.map(|c| c.modifiers.clone()).unwrap_or_default();
    let class_abstract = owner.is_some_and(|c| {
        c.modifiers.contains(&Modifier::Abstract) || c.kind == crate::program::ClassKind::Interface
    });
    [
        visibility(&m.modifiers),
        if m.modifiers.contains(&Modifier::Static) {
            0
        } else {
            1
        },
        return_category(&m.return_type),
        m.parameters.len().min(3),
        if owner.is_some() {
            visibility(&class_mods)
        } else {
            0
        },
        if class_abstract { 0 } else { 1 },
        if m.is_constructor() { 0 } else { 1 },
    ]
}

/// Builds feature vectors against one schema and token table.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    schema: FeatureSchema,
    tokens: TokenTable,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        FeatureExtractor::new(TokenTable::bundled()).expect("bundled token table is valid")
    }
}

impl FeatureExtractor {
    pub fn new(tokens: TokenTable) -> Result<FeatureExtractor, FeatureError> {
        tokens.validate()?;
        Ok(FeatureExtractor {
            schema: FeatureSchema::from_tokens(&tokens),
            tokens,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn tokens(&self) -> &TokenTable {
        &self.tokens
    }

    pub fn extract(&self, m: &MethodModel, owner: Option<&ClassModel>) -> FeatureVector {
        let mut values = Vec::with_capacity(FEATURE_COUNT);
        values.extend(structural_counts(m, owner));

        let method_name = if m.is_constructor() {
            m.owner.name.clone()
        } else {
            m.name.clone()
        };
        let class_name = m.owner.qualified_name();
        let invoked: Vec<&str> = m.call_sites().map(|c| c.callee_name.as_str()).collect();
        for entry in &self.tokens.entries {
            let hit = entry.scopes.iter().any(|scope| match scope {
                TokenScope::MethodName => token_match(&method_name, &entry.token),
                TokenScope::ClassName => token_match(&class_name, &entry.token),
                TokenScope::InvokedNames => invoked.iter().any(|n| token_match(n, &entry.token)),
                TokenScope::ParameterTypes => m
                    .parameters
                    .iter()
                    .any(|p| token_match(&p.ty, &entry.token)),
                TokenScope::ReturnType => token_match(&m.return_type, &entry.token),
            });
            values.push(if hit { 1.0 } else { 0.0 });
        }

        values.extend(categorical_cells(m, owner).iter().map(|c| *c as f64));
        FeatureVector {
            schema_version: self.schema.version.clone(),
            values,
        }
    }

    /// Features of every method in the program, keyed by canonical signature,
    /// in method-index order.
    pub fn extract_program(&self, p: &ProgramModel) -> Vec<(String, FeatureVector)> {
        let ids: Vec<_> = p.method_index.iter().collect();
        ids.par_iter()
            .map(|(sig, id)| {
                let m = p.method(**id);
                ((*sig).clone(), self.extract(m, Some(&p.classes[id.class])))
            })
            .collect()
    }

    /// Features of a method known only by signature. When the program
    /// declares it, its parsed model is used instead.
    pub fn extract_signature(
        &self,
        signature: &str,
        p: Option<&ProgramModel>,
    ) -> Result<FeatureVector, FeatureError> {
        if let Some(p) = p {
            if let Some(id) = p.method_index.get(signature) {
                return Ok(self.extract(p.method(*id), Some(&p.classes[id.class])));
            }
        }
        let m = method_from_signature(signature)?;
        Ok(self.extract(&m, None))
    }
}

/// A bodiless public method model reconstructed from a canonical signature.
/// The return type is unknown and left empty.
pub fn method_from_signature(signature: &str) -> Result<MethodModel, SignatureError> {
    let parts = parse_signature(signature)?;
    let (package, class) = match parts.class.rfind('.') {
        Some(i) => (&parts.class[..i], &parts.class[i + 1..]),
        None => ("", parts.class.as_str()),
    };
    let is_ctor = parts.name == crate::program::CONSTRUCTOR_NAME;
    Ok(MethodModel {
        name: parts.name.clone(),
        return_type: if is_ctor {
            "void".into()
        } else {
            String::new()
        },
        parameters: parts
            .params
            .iter()
            .enumerate()
            .map(|(i, ty)| Parameter {
                name: format!("p{i}"),
                ty: ty.clone(),
            })
            .collect(),
        modifiers: [Modifier::Public].into_iter().collect(),
        has_body: false,
        body: Vec::new(),
        line_span: LineSpan { start: 1, end: 1 },
        loc: 0,
        owner: ClassRef {
            package: package.to_string(),
            name: class.to_string(),
        },
        uri: String::new(),
    })
}
