//! Taint-flow specifications derived from a labelled SRM dataset, and the
//! versioned spec file that carries them.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DataOut, Dataset, MethodRecord};
use crate::labels::Label;
use crate::program::{parse_signature, CONSTRUCTOR_NAME};

pub const SPEC_FILE_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    #[default]
    Exact,
    NameAndArity,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodPattern {
    pub signature: String,
    #[serde(default)]
    pub match_mode: MatchMode,
}

/// Name and arity of a pattern; `None` for the declaring class when it is `*`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternParts {
    pub class: Option<String>,
    pub name: String,
    pub arity: usize,
    /// Parameter types, empty in name-and-arity mode.
    pub params: Vec<String>,
}

impl PatternParts {
    pub fn simple_class(&self) -> Option<&str> {
        self.class
            .as_deref()
            .map(|c| c.rsplit('.').next().unwrap_or(c))
    }
}

impl MethodPattern {
    pub fn exact(signature: impl Into<String>) -> Self {
        MethodPattern {
            signature: signature.into(),
            match_mode: MatchMode::Exact,
        }
    }

    pub fn name_and_arity(signature: impl Into<String>) -> Self {
        MethodPattern {
            signature: signature.into(),
            match_mode: MatchMode::NameAndArity,
        }
    }

    /// Exact patterns must be canonical signatures. Name-and-arity patterns
    /// also accept `*` as the class and `?` for any parameter type.
    pub fn parts(&self) -> Result<PatternParts, String> {
        match self.match_mode {
            MatchMode::Exact => parse_signature(&self.signature)
                .map(|p| PatternParts {
                    arity: p.arity(),
                    class: Some(p.class),
                    name: p.name,
                    params: p.params,
                })
                .map_err(|e| e.to_string()),
            MatchMode::NameAndArity => {
                let wildcard_free = self
                    .signature
                    .replacen("*.", "Any.", 1)
                    .replace('?', "Any");
                let p = parse_signature(&wildcard_free).map_err(|e| {
                    format!("invalid pattern `{}`: {}", self.signature, e.reason)
                })?;
                Ok(PatternParts {
                    class: (!self.signature.starts_with("*.")).then_some(p.class),
                    arity: p.params.len(),
                    name: p.name,
                    params: Vec::new(),
                })
            }
        }
    }

    pub fn is_constructor(&self) -> bool {
        self.parts().is_ok_and(|p| p.name == CONSTRUCTOR_NAME)
    }
}

impl fmt::Display for MethodPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.signature)
    }
}

/// Where a method writes the value it produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowOut {
    Return,
    Parameter(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRule {
    #[serde(flatten)]
    pub pattern: MethodPattern,
    pub out: FlowOut,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinkRule {
    #[serde(flatten)]
    pub pattern: MethodPattern,
    /// Parameter indices checked for taint; empty means every parameter.
    #[serde(rename = "in")]
    pub inputs: Vec<usize>,
}

/// Shape shared by sanitizers and propagators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferRule {
    #[serde(flatten)]
    pub pattern: MethodPattern,
    /// Parameter indices read; empty means every parameter.
    #[serde(rename = "in")]
    pub inputs: Vec<usize>,
    pub out: FlowOut,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintSpec {
    pub id: String,
    pub cwe: Label,
    pub sources: Vec<SourceRule>,
    pub sinks: Vec<SinkRule>,
    pub sanitizers: Vec<TransferRule>,
    #[serde(default)]
    pub propagators: Vec<TransferRule>,
    pub message: String,
}

impl TaintSpec {
    pub fn rule_id(&self) -> String {
        self.cwe
            .cwe_rule_id()
            .unwrap_or_else(|| self.cwe.id().to_uppercase())
    }
}

pub fn spec_id(cwe: Label) -> String {
    format!("srm-{}", cwe.id())
}

pub fn default_message(cwe: Label) -> String {
    format!(
        "{} ({}): data from a source reaches a sink without sanitization",
        cwe.cwe_name().unwrap_or("Taint flow"),
        cwe.cwe_rule_id().unwrap_or_default()
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedSpecs {
    pub specs: Vec<TaintSpec>,
    pub diagnostics: Vec<String>,
}

fn source_out(r: &MethodRecord) -> FlowOut {
    match r.data_out {
        DataOut::Parameter(i) => FlowOut::Parameter(i),
        DataOut::Return | DataOut::None => FlowOut::Return,
    }
}

/// One spec per requested CWE (all seven by default), sorted by CWE number.
/// CWE-specific sources and sinks are preferred; a role with none falls back
/// to the records carrying that role and no CWE label.
pub fn generate_specs(d: &Dataset, cwes: Option<&[Label]>) -> GeneratedSpecs {
    let wanted: BTreeSet<Label> = match cwes {
        Some(list) => list.iter().copied().filter(|l| l.is_cwe()).collect(),
        None => Label::CWES.into_iter().collect(),
    };
    let mut specs = Vec::new();
    let mut diagnostics = Vec::new();
    if let Some(list) = cwes {
        for l in list.iter().filter(|l| !l.is_cwe()) {
            diagnostics.push(format!("`{l}` is not a CWE label; ignored"));
        }
    }
    for cwe in wanted {
        let with = |role: Label| -> Vec<&MethodRecord> {
            let specific: Vec<&MethodRecord> = d
                .records()
                .iter()
                .filter(|r| r.labels.contains(role) && r.labels.contains(cwe))
                .collect();
            if !specific.is_empty() || role == Label::Sanitizer {
                return specific;
            }
            d.records()
                .iter()
                .filter(|r| r.labels.contains(role) && !r.labels.has_cwe())
                .collect()
        };
        let sources: Vec<SourceRule> = with(Label::Source)
            .into_iter()
            .map(|r| SourceRule {
                pattern: MethodPattern::exact(&r.signature),
                out: source_out(r),
            })
            .collect();
        let sinks: Vec<SinkRule> = with(Label::Sink)
            .into_iter()
            .map(|r| SinkRule {
                pattern: MethodPattern::exact(&r.signature),
                inputs: sink_inputs(r),
            })
            .collect();
        let sanitizers: Vec<TransferRule> = with(Label::Sanitizer)
            .into_iter()
            .map(|r| TransferRule {
                pattern: MethodPattern::exact(&r.signature),
                inputs: sink_inputs(r),
                out: source_out(r),
            })
            .collect();
        let missing: Vec<&str> = [("source", sources.is_empty()), ("sink", sinks.is_empty())]
            .into_iter()
            .filter_map(|(n, empty)| empty.then_some(n))
            .collect();
        if !missing.is_empty() {
            diagnostics.push(format!(
                "{}: no {} method; no spec generated",
                cwe.id(),
                missing.join(" or ")
            ));
            continue;
        }
        specs.push(TaintSpec {
            id: spec_id(cwe),
            cwe,
            sources,
            sinks,
            sanitizers,
            propagators: Vec::new(),
            message: default_message(cwe),
        });
    }
    GeneratedSpecs { specs, diagnostics }
}

/// Every parameter index when `dataIn` is empty.
fn sink_inputs(r: &MethodRecord) -> Vec<usize> {
    if !r.data_in.is_empty() {
        return r.data_in.clone();
    }
    parse_signature(&r.signature)
        .map(|p| (0..p.arity()).collect())
        .unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecProblem {
    pub severity: Severity,
    /// JSON path inside the spec, e.g. `sinks[0].in[1]`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for SpecProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}: {}", self.path, self.message)
    }
}

/// Structural problems of a spec; an empty list means the spec is valid.
/// A pattern listed as both source and sink is a warning.
pub fn validate_spec(s: &TaintSpec) -> Vec<SpecProblem> {
    let mut out = Vec::new();
    let mut error = |path: String, message: String| {
        out.push(SpecProblem {
            severity: Severity::Error,
            path,
            message,
        })
    };
    if s.id.trim().is_empty() {
        error("id".into(), "spec id must not be empty".into());
    }
    if !s.cwe.is_cwe() {
        error("cwe".into(), format!("`{}` is not a CWE label", s.cwe));
    }
    if s.sources.is_empty() {
        error("sources".into(), "spec must define at least one source".into());
    }
    if s.sinks.is_empty() {
        error("sinks".into(), "spec must define at least one sink".into());
    }
    let mut check = |path: String, pattern: &MethodPattern, inputs: &[usize], out: Option<FlowOut>| {
        let parts = match pattern.parts() {
            Ok(p) => p,
            Err(e) => {
                error(path, e);
                return;
            }
        };
        for (j, i) in inputs.iter().enumerate() {
            if *i >= parts.arity {
                error(
                    format!("{path}.in[{j}]"),
                    format!(
                        "parameter index {i} exceeds arity {} of `{}`",
                        parts.arity, pattern.signature
                    ),
                );
            }
        }
        if let Some(FlowOut::Parameter(i)) = out {
            if i >= parts.arity {
                error(
                    format!("{path}.out"),
                    format!(
                        "parameter index {i} exceeds arity {} of `{}`",
                        parts.arity, pattern.signature
                    ),
                );
            }
        }
    };
    for (i, r) in s.sources.iter().enumerate() {
        check(format!("sources[{i}]"), &r.pattern, &[], Some(r.out));
    }
    for (i, r) in s.sinks.iter().enumerate() {
        check(format!("sinks[{i}]"), &r.pattern, &r.inputs, None);
    }
    for (i, r) in s.sanitizers.iter().enumerate() {
        check(format!("sanitizers[{i}]"), &r.pattern, &r.inputs, Some(r.out));
    }
    for (i, r) in s.propagators.iter().enumerate() {
        check(format!("propagators[{i}]"), &r.pattern, &r.inputs, Some(r.out));
    }
    for (i, src) in s.sources.iter().enumerate() {
        if let Some(j) = s.sinks.iter().position(|k| k.pattern == src.pattern) {
            out.push(SpecProblem {
                severity: Severity::Warning,
                path: format!("sources[{i}]"),
                message: format!(
                    "`{}` is both a source and a sink (sinks[{j}])",
                    src.pattern.signature
                ),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub version: String,
    pub specs: Vec<TaintSpec>,
}

#[derive(Debug, Error)]
pub enum SpecFileError {
    #[error("spec file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported spec file version `{0}`")]
    Version(String),
    #[error("invalid spec file: {}", .0.iter().map(|(id, p)| format!("{id}: {p}")).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<(String, SpecProblem)>),
}

impl SpecFile {
    pub fn new(specs: Vec<TaintSpec>) -> Self {
        SpecFile {
            version: SPEC_FILE_VERSION.into(),
            specs,
        }
    }

    /// Parses and rejects specs with error-severity problems.
    pub fn load(text: &str) -> Result<SpecFile, SpecFileError> {
        let f: SpecFile = serde_json::from_str(text)?;
        if f.version != SPEC_FILE_VERSION {
            return Err(SpecFileError::Version(f.version));
        }
        let errors: Vec<(String, SpecProblem)> = f
            .specs
            .iter()
            .flat_map(|s| {
                validate_spec(s)
                    .into_iter()
                    .filter(|p| p.severity == Severity::Error)
                    .map(|p| (s.id.clone(), p))
            })
            .collect();
        if !errors.is_empty() {
            return Err(SpecFileError::Invalid(errors));
        }
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec file serializes");
        s.push('\n');
        s
    }
}
