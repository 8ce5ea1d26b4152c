//! SARIF 2.1.0 output for taint findings and a structural validator for the
//! required subset.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::labels::Label;
use crate::taint::{Finding, PathStep};

pub const SARIF_VERSION: &str = "2.1.0";
pub const SARIF_SCHEMA: &str = "https://json.schemastore.org/sarif-2.1.0.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolMeta {
    pub name: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub information_uri: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarifDocument {
    #[serde(rename = "$schema")]
    pub schema_uri: String,
    pub version: String,
    pub runs: Vec<Run>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub tool: Tool,
    pub results: Vec<SarifResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tool {
    pub driver: Driver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Driver {
    pub name: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub information_uri: Option<String>,
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Rule {
    pub id: String,
    pub name: String,
    pub short_description: Message,
    pub help_uri: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SarifResult {
    pub rule_id: String,
    pub rule_index: usize,
    pub level: String,
    pub message: Message,
    pub locations: Vec<SarifLocation>,
    pub related_locations: Vec<SarifLocation>,
    pub code_flows: Vec<CodeFlow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SarifLocation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<usize>,
    pub physical_location: PhysicalLocation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<Message>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PhysicalLocation {
    pub artifact_location: ArtifactLocation,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ArtifactLocation {
    pub uri: String,
    pub uri_base_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Region {
    pub start_line: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CodeFlow {
    pub thread_flows: Vec<ThreadFlow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadFlow {
    pub locations: Vec<ThreadFlowLocation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadFlowLocation {
    pub location: SarifLocation,
}

fn location(uri: &str, line: u32, message: Option<String>, id: Option<usize>) -> SarifLocation {
    SarifLocation {
        id,
        physical_location: PhysicalLocation {
            artifact_location: ArtifactLocation {
                uri: uri.to_string(),
                uri_base_id: "%SRCROOT%".into(),
            },
            region: Region {
                start_line: line.max(1),
            },
        },
        message: message.map(|text| Message { text }),
    }
}

fn rule(cwe: Label) -> Rule {
    let number = cwe.cwe_number().unwrap_or_default();
    let title = cwe.cwe_name().unwrap_or("Taint flow");
    Rule {
        id: rule_id(cwe),
        name: title
            .split(|c: char| !c.is_alphanumeric())
            .collect::<Vec<_>>()
            .concat(),
        short_description: Message { text: title.into() },
        help_uri: format!("https://cwe.mitre.org/data/definitions/{number}.html"),
    }
}

/// `CWE-89` for `cwe89`.
pub fn rule_id(cwe: Label) -> String {
    cwe.cwe_rule_id()
        .unwrap_or_else(|| cwe.id().to_uppercase())
}

fn flow_location(s: &PathStep) -> ThreadFlowLocation {
    ThreadFlowLocation {
        location: location(&s.uri, s.line, Some(s.description.clone()), None),
    }
}

/// One run with one rule per CWE present (sorted) and one result per finding,
/// in finding order.
pub fn build_sarif(findings: &[Finding], tool: &ToolMeta) -> SarifDocument {
    let mut cwes: Vec<Label> = findings.iter().map(|f| f.cwe).collect();
    cwes.sort();
    cwes.dedup();
    let rules: Vec<Rule> = cwes.iter().map(|c| rule(*c)).collect();
    let results = findings
        .iter()
        .map(|f| SarifResult {
            rule_id: rule_id(f.cwe),
            rule_index: cwes.binary_search(&f.cwe).expect("rule present"),
            level: "error".into(),
            message: Message {
                text: format!(
                    "{} Source at {}:{}, sink at {}:{} (spec `{}`).",
                    f.message,
                    f.source_location.uri,
                    f.source_location.line,
                    f.sink_location.uri,
                    f.sink_location.line,
                    f.spec_id
                ),
            },
            locations: vec![location(
                &f.sink_location.uri,
                f.sink_location.line,
                None,
                None,
            )],
            related_locations: vec![location(
                &f.source_location.uri,
                f.source_location.line,
                Some("source".into()),
                Some(1),
            )],
            code_flows: vec![CodeFlow {
                thread_flows: vec![ThreadFlow {
                    locations: f.path.iter().map(flow_location).collect(),
                }],
            }],
        })
        .collect();
    SarifDocument {
        schema_uri: SARIF_SCHEMA.into(),
        version: SARIF_VERSION.into(),
        runs: vec![Run {
            tool: Tool {
                driver: Driver {
                    name: tool.name.clone(),
                    version: tool.version.clone(),
                    information_uri: tool.information_uri.clone(),
                    rules,
                },
            },
            results,
        }],
    }
}

/// Pretty-printed SARIF text with a trailing newline; identical input gives
/// identical bytes.
pub fn emit_sarif(findings: &[Finding], tool: &ToolMeta) -> String {
    let mut s = serde_json::to_string_pretty(&build_sarif(findings, tool)).expect("sarif serializes");
    s.push('\n');
    s
}

fn nonempty_str(v: &Value) -> bool {
    v.as_str().is_some_and(|s| !s.is_empty())
}

/// Problems with the required fields: `version`, `runs[].tool.driver.name`,
/// `results[].ruleId`, `message.text` and `locations` (each with a uri and a
/// 1-based start line), plus ruleIds present in the driver's rules.
pub fn validate_sarif(text: &str) -> Vec<String> {
    let doc: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => return vec![format!("not JSON: {e}")],
    };
    let mut out = Vec::new();
    if doc.get("version").and_then(Value::as_str) != Some(SARIF_VERSION) {
        out.push(format!("version: expected \"{SARIF_VERSION}\""));
    }
    let Some(runs) = doc.get("runs").and_then(Value::as_array) else {
        out.push("runs: expected an array".into());
        return out;
    };
    for (r, run) in runs.iter().enumerate() {
        let driver = &run["tool"]["driver"];
        if !nonempty_str(&driver["name"]) {
            out.push(format!("runs[{r}].tool.driver.name: missing"));
        }
        let rule_ids: Vec<&str> = driver["rules"]
            .as_array()
            .map(|rs| rs.iter().filter_map(|x| x["id"].as_str()).collect())
            .unwrap_or_default();
        let Some(results) = run.get("results").and_then(Value::as_array) else {
            out.push(format!("runs[{r}].results: expected an array"));
            continue;
        };
        for (i, res) in results.iter().enumerate() {
            let at = format!("runs[{r}].results[{i}]");
            match res["ruleId"].as_str() {
                Some(id) if !id.is_empty() => {
                    if !rule_ids.contains(&id) {
                        out.push(format!("{at}.ruleId: `{id}` has no rule entry"));
                    }
                }
                _ => out.push(format!("{at}.ruleId: missing")),
            }
            if !nonempty_str(&res["message"]["text"]) {
                out.push(format!("{at}.message.text: missing"));
            }
            match res["locations"].as_array() {
                Some(locs) if !locs.is_empty() => {
                    for (j, l) in locs.iter().enumerate() {
                        let phys = &l["physicalLocation"];
                        if !nonempty_str(&phys["artifactLocation"]["uri"]) {
                            out.push(format!("{at}.locations[{j}]: missing uri"));
                        }
                        if phys["region"]["startLine"].as_u64().is_none_or(|n| n < 1) {
                            out.push(format!("{at}.locations[{j}]: startLine must be >= 1"));
                        }
                    }
                }
                _ => out.push(format!("{at}.locations: expected a non-empty array")),
            }
        }
    }
    out
}
