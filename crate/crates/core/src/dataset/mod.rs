//! Labelled SRM method records: loading, validation, merging, splitting and
//! summary statistics.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::labels::{Label, LabelSet, LABEL_COUNT};
use crate::program::parse_signature;

pub const DATASET_VERSION: &str = "1";

/// Where taint leaves a method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DataOut {
    Return,
    Parameter(usize),
    #[default]
    None,
}

impl Serialize for DataOut {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            DataOut::Return => s.serialize_str("return"),
            DataOut::None => s.serialize_str("none"),
            DataOut::Parameter(i) => {
                use serde::ser::SerializeMap;
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("parameter", i)?;
                m.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for DataOut {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        DataOut::from_value(&v).map_err(serde::de::Error::custom)
    }
}

impl DataOut {
    pub fn from_value(v: &Value) -> Result<DataOut, String> {
        match v {
            Value::String(s) if s == "return" => Ok(DataOut::Return),
            Value::String(s) if s == "none" => Ok(DataOut::None),
            Value::Object(m) if m.len() == 1 => match m.get("parameter").and_then(Value::as_u64) {
                Some(i) => Ok(DataOut::Parameter(i as usize)),
                None => Err(format!("expected {{\"parameter\": <index>}}, found {v}")),
            },
            _ => Err(format!(
                "expected \"return\", \"none\" or {{\"parameter\": <index>}}, found {v}"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discovery {
    Training,
    Detected,
    Manual,
}

impl Discovery {
    pub fn id(self) -> &'static str {
        match self {
            Discovery::Training => "training",
            Discovery::Detected => "detected",
            Discovery::Manual => "manual",
        }
    }

    pub fn from_id(id: &str) -> Option<Discovery> {
        [Discovery::Training, Discovery::Detected, Discovery::Manual]
            .into_iter()
            .find(|d| d.id() == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub signature: String,
    pub labels: LabelSet,
    #[serde(rename = "dataIn")]
    pub data_in: Vec<usize>,
    #[serde(rename = "dataOut")]
    pub data_out: DataOut,
    pub discovery: Discovery,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MethodRecord {
    pub fn new(signature: impl Into<String>, labels: LabelSet) -> MethodRecord {
        MethodRecord {
            signature: signature.into(),
            labels,
            data_in: Vec::new(),
            data_out: DataOut::None,
            discovery: Discovery::Training,
            note: None,
        }
    }

    /// Problems with this record, with paths relative to `path`.
    pub fn problems(&self, path: &str) -> Vec<FormatError> {
        let mut out = Vec::new();
        let arity = match parse_signature(&self.signature) {
            Ok(parts) => parts.arity(),
            Err(e) => {
                out.push(FormatError::new(format!("{path}.signature"), e.to_string()));
                return out;
            }
        };
        let mut seen = Vec::new();
        for (i, idx) in self.data_in.iter().enumerate() {
            if *idx >= arity {
                out.push(FormatError::new(
                    format!("{path}.dataIn[{i}]"),
                    format!("parameter index {idx} out of range for {arity} parameter(s)"),
                ));
            } else if seen.contains(idx) {
                out.push(FormatError::new(
                    format!("{path}.dataIn[{i}]"),
                    format!("parameter index {idx} listed twice"),
                ));
            }
            seen.push(*idx);
        }
        if let DataOut::Parameter(idx) = self.data_out {
            if idx >= arity {
                out.push(FormatError::new(
                    format!("{path}.dataOut"),
                    format!("parameter index {idx} out of range for {arity} parameter(s)"),
                ));
            }
        }
        out
    }
}

/// A validation problem located by a JSON path such as `methods[2].labels[0]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatError {
    pub path: String,
    pub reason: String,
}

impl FormatError {
    pub fn new(path: impl Into<String>, reason: impl Into<String>) -> FormatError {
        FormatError {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{} invalid entr{}: {}", .0.len(), if .0.len() == 1 { "y" } else { "ies" }, join_errors(.0))]
    Format(Vec<FormatError>),
}

fn join_errors(errors: &[FormatError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl DatasetError {
    pub fn format_errors(&self) -> &[FormatError] {
        match self {
            DatasetError::Format(e) => e,
            DatasetError::Json(_) => &[],
        }
    }
}

/// Labelled records over the fixed taxonomy, kept sorted by signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    version: String,
    records: Vec<MethodRecord>,
}

#[derive(Serialize)]
struct DatasetDoc<'a> {
    version: &'a str,
    methods: &'a [MethodRecord],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    signature: String,
    labels: Vec<String>,
    #[serde(rename = "dataIn")]
    data_in: Vec<usize>,
    #[serde(rename = "dataOut")]
    data_out: Value,
    discovery: String,
    #[serde(default)]
    note: Option<String>,
}

impl Default for Dataset {
    fn default() -> Self {
        Dataset {
            version: DATASET_VERSION.into(),
            records: Vec::new(),
        }
    }
}

impl Dataset {
    /// Validates the records and sorts them by signature.
    pub fn new(
        version: impl Into<String>,
        records: Vec<MethodRecord>,
    ) -> Result<Dataset, DatasetError> {
        let errors = check_records(records.iter().enumerate());
        if !errors.is_empty() {
            return Err(DatasetError::Format(errors));
        }
        Ok(Dataset::sorted(version.into(), records))
    }

    fn sorted(version: String, mut records: Vec<MethodRecord>) -> Dataset {
        records.sort_by(|a, b| a.signature.cmp(&b.signature));
        Dataset { version, records }
    }

    /// Parses the JSON dataset document. Any invalid record fails the load.
    pub fn load(document: &str) -> Result<Dataset, DatasetError> {
        let root: Value = serde_json::from_str(document)?;
        let mut errors = Vec::new();
        let Some(obj) = root.as_object() else {
            return Err(DatasetError::Format(vec![FormatError::new(
                "",
                "expected a JSON object",
            )]));
        };
        for key in obj.keys() {
            if key != "version" && key != "methods" {
                errors.push(FormatError::new(key.clone(), "unknown field"));
            }
        }
        let version = match obj.get("version") {
            Some(Value::String(v)) => v.clone(),
            _ => {
                errors.push(FormatError::new("version", "expected a string"));
                String::new()
            }
        };
        let methods = match obj.get("methods") {
            Some(Value::Array(m)) => m.as_slice(),
            _ => {
                errors.push(FormatError::new("methods", "expected an array"));
                &[]
            }
        };
        let mut records = Vec::with_capacity(methods.len());
        for (i, v) in methods.iter().enumerate() {
            let path = format!("methods[{i}]");
            let raw: RawRecord = match serde_json::from_value(v.clone()) {
                Ok(r) => r,
                Err(e) => {
                    errors.push(FormatError::new(path, e.to_string()));
                    continue;
                }
            };
            let mut labels = LabelSet::EMPTY;
            for (j, id) in raw.labels.iter().enumerate() {
                match Label::from_id(id) {
                    Some(l) => labels.insert(l),
                    None => errors.push(FormatError::new(
                        format!("{path}.labels[{j}]"),
                        format!("unknown label `{id}`"),
                    )),
                }
            }
            let data_out = DataOut::from_value(&raw.data_out).unwrap_or_else(|reason| {
                errors.push(FormatError::new(format!("{path}.dataOut"), reason));
                DataOut::None
            });
            let discovery = Discovery::from_id(&raw.discovery).unwrap_or_else(|| {
                errors.push(FormatError::new(
                    format!("{path}.discovery"),
                    format!("unknown discovery `{}`", raw.discovery),
                ));
                Discovery::Training
            });
            records.push((
                i,
                MethodRecord {
                    signature: raw.signature,
                    labels,
                    data_in: raw.data_in,
                    data_out,
                    discovery,
                    note: raw.note,
                },
            ));
        }
        errors.extend(check_records(records.iter().map(|(i, r)| (*i, r))));
        if !errors.is_empty() {
            return Err(DatasetError::Format(errors));
        }
        Ok(Dataset::sorted(
            version,
            records.into_iter().map(|(_, r)| r).collect(),
        ))
    }

    /// Canonical JSON: records sorted by signature, fixed field order.
    pub fn save(&self) -> String {
        let mut s = serde_json::to_string_pretty(&DatasetDoc {
            version: &self.version,
            methods: &self.records,
        })
        .expect("dataset serialises");
        s.push('\n');
        s
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn records(&self) -> &[MethodRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, signature: &str) -> Option<&MethodRecord> {
        self.records
            .binary_search_by(|r| r.signature.as_str().cmp(signature))
            .ok()
            .map(|i| &self.records[i])
    }

    /// Non-fatal findings: records carrying CWE labels but no role label.
    pub fn warnings(&self) -> Vec<FormatError> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.labels.has_cwe() && !r.labels.has_role())
            .map(|(i, r)| {
                FormatError::new(
                    format!("methods[{i}].labels"),
                    format!(
                        "`{}` has CWE labels but no source/sink/sanitizer label",
                        r.signature
                    ),
                )
            })
            .collect()
    }

    fn upsert(&mut self, record: MethodRecord) {
        match self
            .records
            .binary_search_by(|r| r.signature.cmp(&record.signature))
        {
            Ok(i) => self.records[i] = record,
            Err(i) => self.records.insert(i, record),
        }
    }
}

/// Per-record problems plus duplicate signatures, keyed by document index.
fn check_records<'a>(records: impl Iterator<Item = (usize, &'a MethodRecord)>) -> Vec<FormatError> {
    let mut errors = Vec::new();
    let mut first: HashMap<&str, usize> = HashMap::new();
    for (i, r) in records {
        errors.extend(r.problems(&format!("methods[{i}]")));
        if let Some(j) = first.get(r.signature.as_str()) {
            errors.push(FormatError::new(
                format!("methods[{i}].signature"),
                format!("duplicate signature `{}` (also methods[{j}])", r.signature),
            ));
        } else {
            first.insert(&r.signature, i);
        }
    }
    errors
}

/// Applies human edits: a matching signature is replaced, a new one is
/// added, and both become `manual`. Later edits to the same signature win.
pub fn merge_records(base: &Dataset, edits: &[MethodRecord]) -> Result<Dataset, DatasetError> {
    let errors: Vec<FormatError> = edits
        .iter()
        .enumerate()
        .flat_map(|(i, e)| e.problems(&format!("edits[{i}]")))
        .collect();
    if !errors.is_empty() {
        return Err(DatasetError::Format(errors));
    }
    let mut out = base.clone();
    for e in edits {
        let mut r = e.clone();
        r.discovery = Discovery::Manual;
        out.upsert(r);
    }
    Ok(out)
}

/// Adds model predictions. Predictions fill signatures that have no record
/// yet and refresh earlier `detected` records; `training` and `manual`
/// records are never replaced.
pub fn merge_detected(base: &Dataset, detected: &[MethodRecord]) -> Result<Dataset, DatasetError> {
    let errors: Vec<FormatError> = detected
        .iter()
        .enumerate()
        .flat_map(|(i, e)| e.problems(&format!("detected[{i}]")))
        .collect();
    if !errors.is_empty() {
        return Err(DatasetError::Format(errors));
    }
    let mut out = base.clone();
    for d in detected {
        let keep = out
            .get(&d.signature)
            .is_some_and(|r| r.discovery != Discovery::Detected);
        if !keep {
            let mut r = d.clone();
            r.discovery = Discovery::Detected;
            out.upsert(r);
        }
    }
    Ok(out)
}

/// Number of training records for `n` records and fraction `f`: ⌈n·f⌉,
/// computed so that exact products such as 10 × 0.7 are not rounded up.
pub fn train_size(n: usize, f: f64) -> usize {
    (((n as f64) * f - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Seeded, label-blind partition into ⌈n·f⌉ training and remaining test records.
pub fn split_dataset(d: &Dataset, train_fraction: f64, seed: u64) -> (Dataset, Dataset) {
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = train_size(d.len(), train_fraction);
    let pick = |ids: &[usize]| {
        let mut records: Vec<MethodRecord> = ids.iter().map(|i| d.records[*i].clone()).collect();
        records.sort_by(|a, b| a.signature.cmp(&b.signature));
        Dataset {
            version: d.version.clone(),
            records,
        }
    };
    (pick(&idx[..k]), pick(&idx[k..]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelCount {
    pub label: Label,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelSetCount {
    pub labels: LabelSet,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub records: usize,
    pub per_label: Vec<LabelCount>,
    /// Most frequent first, ties by label-set bits.
    pub label_sets: Vec<LabelSetCount>,
    /// Row and column order follow the taxonomy; the diagonal holds label counts.
    pub co_occurrence: [[usize; LABEL_COUNT]; LABEL_COUNT],
    /// Share of records with CWE labels but no role label.
    pub cwe_without_role: f64,
    pub by_discovery: BTreeMap<Discovery, usize>,
}

impl DatasetStats {
    pub fn count(&self, l: Label) -> usize {
        self.per_label[l.index()].count
    }

    pub fn pair(&self, a: Label, b: Label) -> usize {
        self.co_occurrence[a.index()][b.index()]
    }
}

pub fn dataset_stats(d: &Dataset) -> DatasetStats {
    let mut co = [[0usize; LABEL_COUNT]; LABEL_COUNT];
    let mut sets: BTreeMap<LabelSet, usize> = BTreeMap::new();
    let mut orphans = 0;
    let mut by_discovery = BTreeMap::new();
    for r in &d.records {
        let bits = r.labels.to_bools();
        for i in 0..LABEL_COUNT {
            for j in 0..LABEL_COUNT {
                if bits[i] && bits[j] {
                    co[i][j] += 1;
                }
            }
        }
        *sets.entry(r.labels).or_default() += 1;
        if r.labels.has_cwe() && !r.labels.has_role() {
            orphans += 1;
        }
        *by_discovery.entry(r.discovery).or_default() += 1;
    }
    let mut label_sets: Vec<LabelSetCount> = sets
        .into_iter()
        .map(|(labels, count)| LabelSetCount { labels, count })
        .collect();
    label_sets.sort_by(|a, b| b.count.cmp(&a.count).then(a.labels.cmp(&b.labels)));
    DatasetStats {
        records: d.len(),
        per_label: Label::ALL
            .iter()
            .map(|l| LabelCount {
                label: *l,
                count: co[l.index()][l.index()],
            })
            .collect(),
        label_sets,
        co_occurrence: co,
        cwe_without_role: if d.is_empty() {
            0.0
        } else {
            orphans as f64 / d.len() as f64
        },
        by_discovery,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_out_json_forms() {
        for (v, json) in [
            (DataOut::Return, r#""return""#),
            (DataOut::None, r#""none""#),
            (DataOut::Parameter(1), r#"{"parameter":1}"#),
        ] {
            assert_eq!(serde_json::to_string(&v).unwrap(), json);
            assert_eq!(serde_json::from_str::<DataOut>(json).unwrap(), v);
        }
        assert!(serde_json::from_str::<DataOut>(r#""both""#).is_err());
    }

    #[test]
    fn exact_fraction_sizes() {
        assert_eq!(train_size(10, 0.7), 7);
        assert_eq!(train_size(3, 0.7), 3);
        assert_eq!(train_size(1, 0.01), 1);
        assert_eq!(train_size(100, 0.3), 30);
    }
}
