//! The detection-to-report pipeline: load, index, features, train, predict,
//! merge, specgen, configure, analyze and report, each writing its artifacts
//! to the output directory.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use srm_core::dataset::{merge_detected, DataOut, Dataset, Discovery, MethodRecord};
use srm_core::features::{emit_arff, FeatureExtractor, FeatureVector};
use srm_core::labels::{Label, LabelSet};
use srm_core::ml::{predict_labels, train, MlError, ModelConfig, ModelKind, MultiLabelModel, TrainingMatrix};
use srm_core::program::{index_program, ProgramModel};
use srm_core::sarif::{emit_sarif, validate_sarif, ToolMeta};
use srm_core::specgen::{generate_specs, SpecFile, TaintSpec};
use srm_core::taint::{analyze_program, Finding};
use thiserror::Error;

use crate::config::{check_cwe_filter, prepare_output, require_dir, require_file, ConfigError, PipelineConfig};
use crate::project::load_sources;

pub const TOOL_NAME: &str = "srm-forge";
pub const PARTIAL_SUFFIX: &str = ".partial";

/// Artifact file names inside the output directory.
pub mod artifacts {
    pub const INDEX: &str = "index.json";
    pub const FEATURES: &str = "features.arff";
    pub const TRAINING: &str = "training.arff";
    pub const MODEL: &str = "model.json";
    pub const PREDICTIONS: &str = "predictions.json";
    pub const DATASET: &str = "dataset.json";
    pub const SPECS: &str = "specs.json";
    pub const ANALYSIS: &str = "analysis.json";
    pub const FINDINGS: &str = "findings.json";
    pub const SARIF: &str = "results.sarif";
    pub const MANIFEST: &str = "manifest.json";
    pub const ALL: [&str; 11] = [
        INDEX, FEATURES, TRAINING, MODEL, PREDICTIONS, DATASET, SPECS, ANALYSIS, FINDINGS, SARIF,
        MANIFEST,
    ];
}

pub fn tool_meta() -> ToolMeta {
    ToolMeta {
        name: TOOL_NAME.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        information_uri: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Detect,
    Train,
    Pipeline,
    Analyze,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Load,
    Index,
    Features,
    Train,
    Predict,
    Merge,
    Specgen,
    Configure,
    Analyze,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Load => "load",
            Stage::Index => "index",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Predict => "predict",
            Stage::Merge => "merge",
            Stage::Specgen => "specgen",
            Stage::Configure => "configure",
            Stage::Analyze => "analyze",
            Stage::Report => "report",
        }
    }
}

impl JobKind {
    pub fn id(self) -> &'static str {
        match self {
            JobKind::Detect => "detect",
            JobKind::Train => "train",
            JobKind::Pipeline => "pipeline",
            JobKind::Analyze => "analyze",
        }
    }

    pub fn stages(self) -> &'static [Stage] {
        use Stage::*;
        match self {
            JobKind::Pipeline => &[
                Load, Index, Features, Train, Predict, Merge, Specgen, Configure, Analyze, Report,
            ],
            JobKind::Detect => &[Load, Index, Features, Train, Predict, Merge],
            JobKind::Train => &[Load, Index, Train],
            JobKind::Analyze => &[Load, Index, Specgen, Configure, Analyze, Report],
        }
    }

    /// The artifact a finished job points at.
    pub fn result_artifact(self) -> &'static str {
        match self {
            JobKind::Detect => artifacts::DATASET,
            JobKind::Train => artifacts::MODEL,
            JobKind::Pipeline | JobKind::Analyze => artifacts::SARIF,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot prepare the output directory: {0}")]
    Output(#[source] io::Error),
    #[error("stage `{stage}` failed: {cause}")]
    Stage { stage: &'static str, cause: String },
    #[error("cancelled")]
    Cancelled,
}

/// Progress and cancellation hooks, consulted between stages.
pub trait Observer: Sync {
    fn stage_started(&self, _index: usize, _total: usize, _stage: Stage) {}
    fn is_cancelled(&self) -> bool {
        false
    }
}

pub struct Silent;

impl Observer for Silent {}

/// Writes artifacts as `<name>.partial` and renames them on commit, so a
/// failed run leaves only suffixed files behind.
pub struct ArtifactDir {
    dir: PathBuf,
    written: Vec<&'static str>,
}

impl ArtifactDir {
    /// Creates the directory and removes artifacts of earlier runs.
    pub fn open(dir: &Path) -> io::Result<ArtifactDir> {
        std::fs::create_dir_all(dir)?;
        for name in artifacts::ALL {
            for p in [dir.join(name), partial_path(dir, name)] {
                match std::fs::remove_file(&p) {
                    Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e),
                    _ => {}
                }
            }
        }
        Ok(ArtifactDir {
            dir: dir.into(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &'static str, text: &str) -> io::Result<()> {
        std::fs::write(partial_path(&self.dir, name), text)?;
        if !self.written.contains(&name) {
            self.written.push(name);
        }
        Ok(())
    }

    /// Final paths, in write order.
    pub fn commit(self) -> io::Result<Vec<PathBuf>> {
        let mut out = Vec::with_capacity(self.written.len());
        for name in &self.written {
            let target = self.dir.join(name);
            std::fs::rename(partial_path(&self.dir, name), &target)?;
            out.push(target);
        }
        Ok(out)
    }
}

pub fn partial_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}{PARTIAL_SUFFIX}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Done,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    pub artifacts: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// What ran and what it produced; free of timestamps and absolute paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: JobKind,
    pub stages: Vec<StageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub findings: Option<usize>,
}

/// Labels and per-label scores predicted for one project method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodPrediction {
    pub signature: String,
    pub labels: LabelSet,
    pub scores: BTreeMap<Label, f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub kind: JobKind,
    pub output_dir: PathBuf,
    /// Input dataset, with detected records merged when the run predicts.
    pub dataset: Dataset,
    pub predictions: Vec<MethodPrediction>,
    pub specs: Vec<TaintSpec>,
    pub findings: Vec<Finding>,
    pub sarif: Option<String>,
    pub manifest: Manifest,
    pub artifacts: Vec<PathBuf>,
}

impl RunOutput {
    pub fn sarif_path(&self) -> Option<PathBuf> {
        self.sarif.as_ref().map(|_| self.output_dir.join(artifacts::SARIF))
    }

    pub fn result_ref(&self) -> Option<PathBuf> {
        let p = self.output_dir.join(self.kind.result_artifact());
        self.artifacts.contains(&p).then_some(p)
    }
}

/// Runs every stage on `cfg`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutput, PipelineError> {
    run(JobKind::Pipeline, cfg, &Silent)
}

/// Runs the stages of `kind`. A failing stage aborts the run; artifacts
/// written so far keep their `.partial` suffix.
pub fn run(kind: JobKind, cfg: &PipelineConfig, obs: &dyn Observer) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;
    Run::new(kind, cfg, None)?.execute(obs)
}

/// Index, analyze and report with specs from a file instead of a dataset.
pub fn run_with_specs(
    project_root: &Path,
    specs: SpecFile,
    analysis: srm_core::taint::AnalysisConfig,
    output_dir: &Path,
) -> Result<RunOutput, PipelineError> {
    require_dir("project_root", project_root)?;
    prepare_output(output_dir)?;
    let mut cfg = PipelineConfig::new(project_root, PathBuf::new(), output_dir);
    cfg.analysis = analysis;
    Run::new(JobKind::Analyze, &cfg, Some(specs))?.execute(&Silent)
}

/// Rows for every dataset record; features come from the program when it
/// declares the method, else from the signature alone.
pub fn training_matrix(
    d: &Dataset,
    program: Option<&ProgramModel>,
    x: &FeatureExtractor,
) -> Result<TrainingMatrix, String> {
    let mut rows = Vec::with_capacity(d.len());
    for r in d.records() {
        let v = x
            .extract_signature(&r.signature, program)
            .map_err(|e| format!("{}: {e}", r.signature))?;
        rows.push((v, r.labels));
    }
    TrainingMatrix::new(x.schema().clone(), rows).map_err(|e| e.to_string())
}

/// Trains `config`; when a pruned-sets model finds no label set frequent
/// enough, Binary Relevance with the same base learner is trained instead.
pub fn train_with_fallback(
    config: &ModelConfig,
    t: &TrainingMatrix,
) -> Result<(MultiLabelModel, Vec<String>), MlError> {
    match train(config, t) {
        Ok(m) => Ok((m, vec![format!("trained {} on {} records", config.id(), t.len())])),
        Err(e @ (MlError::EmptyAfterPruning { .. } | MlError::NoMembers(_)))
            if config.kind != ModelKind::BinaryRelevance =>
        {
            let br = ModelConfig {
                kind: ModelKind::BinaryRelevance,
                ..*config
            };
            let m = train(&br, t)?;
            let reason = match e {
                MlError::NoMembers(_) => "no ensemble member could be trained".to_string(),
                other => other.to_string(),
            };
            let note = format!(
                "{}: {reason}; trained {} on {} records instead",
                config.id(),
                br.id(),
                t.len()
            );
            Ok((m, vec![note]))
        }
        Err(e) => Err(e),
    }
}

pub fn predict_program(
    model: &MultiLabelModel,
    features: &[(String, FeatureVector)],
) -> Result<Vec<MethodPrediction>, MlError> {
    features
        .iter()
        .map(|(sig, v)| {
            let p = predict_labels(model, v)?;
            Ok(MethodPrediction {
                signature: sig.clone(),
                labels: p.labels,
                scores: Label::ALL.iter().map(|l| (*l, p.scores[l.index()])).collect(),
            })
        })
        .collect()
}

/// Records for every method with a non-empty predicted label set.
pub fn detected_records(program: &ProgramModel, predictions: &[MethodPrediction]) -> Vec<MethodRecord> {
    predictions
        .iter()
        .filter(|p| !p.labels.is_empty())
        .map(|p| {
            let returns = program
                .lookup(&p.signature)
                .is_some_and(|m| !m.is_constructor() && m.return_type != "void");
            let mut r = MethodRecord::new(p.signature.clone(), p.labels);
            r.data_out = if returns { DataOut::Return } else { DataOut::None };
            r.discovery = Discovery::Detected;
            r
        })
        .collect()
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct IndexSummary<'a> {
    files: Vec<&'a str>,
    methods: Vec<&'a str>,
    diagnostics: Vec<String>,
}

#[derive(Serialize)]
struct AnalysisSetup<'a> {
    analysis: &'a srm_core::taint::AnalysisConfig,
    specs: Vec<&'a str>,
    files: usize,
    methods: usize,
}

type StageResult = Result<(StageStatus, Vec<String>), String>;

struct Run<'a> {
    kind: JobKind,
    cfg: &'a PipelineConfig,
    dir: ArtifactDir,
    extractor: FeatureExtractor,
    preset_specs: Option<SpecFile>,
    dataset: Dataset,
    program: ProgramModel,
    features: Vec<(String, FeatureVector)>,
    model: Option<MultiLabelModel>,
    predictions: Vec<MethodPrediction>,
    specs: Vec<TaintSpec>,
    findings: Vec<Finding>,
    sarif: Option<String>,
    stage_artifacts: Vec<&'static str>,
}

impl<'a> Run<'a> {
    fn new(kind: JobKind, cfg: &'a PipelineConfig, preset_specs: Option<SpecFile>) -> Result<Self, PipelineError> {
        Ok(Run {
            kind,
            cfg,
            dir: ArtifactDir::open(&cfg.output_dir).map_err(PipelineError::Output)?,
            extractor: FeatureExtractor::default(),
            preset_specs,
            dataset: Dataset::default(),
            program: ProgramModel::default(),
            features: Vec::new(),
            model: None,
            predictions: Vec::new(),
            specs: Vec::new(),
            findings: Vec::new(),
            sarif: None,
            stage_artifacts: Vec::new(),
        })
    }

    fn execute(mut self, obs: &dyn Observer) -> Result<RunOutput, PipelineError> {
        let stages = self.kind.stages();
        let mut manifest = Manifest {
            tool: TOOL_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            kind: self.kind,
            stages: Vec::new(),
            findings: None,
        };
        for (i, stage) in stages.iter().enumerate() {
            if obs.is_cancelled() {
                let _ = self.dir.write(artifacts::MANIFEST, &pretty(&manifest));
                return Err(PipelineError::Cancelled);
            }
            obs.stage_started(i, stages.len(), *stage);
            self.stage_artifacts.clear();
            let outcome = self.stage(*stage);
            let record = |status, notes, error| StageRecord {
                stage: *stage,
                status,
                artifacts: self.stage_artifacts.iter().map(|s| s.to_string()).collect(),
                notes,
                error,
            };
            match outcome {
                Ok((status, notes)) => manifest.stages.push(record(status, notes, None)),
                Err(cause) => {
                    manifest.stages.push(record(StageStatus::Failed, Vec::new(), Some(cause.clone())));
                    let _ = self.dir.write(artifacts::MANIFEST, &pretty(&manifest));
                    return Err(PipelineError::Stage {
                        stage: stage.name(),
                        cause,
                    });
                }
            }
        }
        if stages.contains(&Stage::Analyze) {
            manifest.findings = Some(self.findings.len());
        }
        self.dir
            .write(artifacts::MANIFEST, &pretty(&manifest))
            .map_err(PipelineError::Output)?;
        let artifacts = self.dir.commit().map_err(PipelineError::Output)?;
        Ok(RunOutput {
            kind: self.kind,
            output_dir: self.cfg.output_dir.clone(),
            dataset: self.dataset,
            predictions: self.predictions,
            specs: self.specs,
            findings: self.findings,
            sarif: self.sarif,
            manifest,
            artifacts,
        })
    }

    fn write(&mut self, name: &'static str, text: &str) -> Result<(), String> {
        self.dir
            .write(name, text)
            .map_err(|e| format!("cannot write {name}: {e}"))?;
        self.stage_artifacts.push(name);
        Ok(())
    }

    fn stage(&mut self, stage: Stage) -> StageResult {
        match stage {
            Stage::Load => self.load(),
            Stage::Index => self.index(),
            Stage::Features => self.features(),
            Stage::Train => self.train(),
            Stage::Predict => self.predict(),
            Stage::Merge => self.merge(),
            Stage::Specgen => self.specgen(),
            Stage::Configure => self.configure(),
            Stage::Analyze => self.analyze(),
            Stage::Report => self.report(),
        }
    }

    fn load(&mut self) -> StageResult {
        if self.preset_specs.is_some() {
            return Ok((StageStatus::Skipped, vec!["specs given; no dataset".into()]));
        }
        let path = &self.cfg.dataset_path;
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        self.dataset = Dataset::load(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut notes = vec![format!("{} records", self.dataset.len())];
        let warnings = self.dataset.warnings();
        if let Some(first) = warnings.first() {
            notes.push(format!("{} warning(s), first: {first}", warnings.len()));
        }
        Ok((StageStatus::Done, notes))
    }

    fn index(&mut self) -> StageResult {
        let files = load_sources(&self.cfg.project_root, std::slice::from_ref(&self.cfg.output_dir))
            .map_err(|e| e.to_string())?;
        let (program, diagnostics) = index_program(&files).map_err(|e| {
            let detail: Vec<String> = match &e {
                srm_core::program::IndexError::NothingParsed { diagnostics } => {
                    diagnostics.iter().map(ToString::to_string).collect()
                }
            };
            format!("{e}: {}", detail.join("; "))
        })?;
        self.program = program;
        let summary = IndexSummary {
            files: self.program.files.iter().map(|f| f.uri.as_str()).collect(),
            methods: self.program.method_index.keys().map(String::as_str).collect(),
            diagnostics: diagnostics.iter().map(ToString::to_string).collect(),
        };
        let text = pretty(&summary);
        let notes = vec![format!(
            "{} files, {} methods, {} diagnostics",
            summary.files.len(),
            summary.methods.len(),
            summary.diagnostics.len()
        )];
        self.write(artifacts::INDEX, &text)?;
        Ok((StageStatus::Done, notes))
    }

    fn features(&mut self) -> StageResult {
        self.features = self.extractor.extract_program(&self.program);
        let rows: Vec<(FeatureVector, LabelSet)> = self
            .features
            .iter()
            .map(|(sig, v)| {
                let known = self.dataset.get(sig).map_or(LabelSet::EMPTY, |r| r.labels);
                (v.clone(), known)
            })
            .collect();
        let arff = emit_arff(&rows, self.extractor.schema()).map_err(|e| e.to_string())?;
        self.write(artifacts::FEATURES, &arff)?;
        Ok((StageStatus::Done, vec![format!("{} methods", rows.len())]))
    }

    fn train(&mut self) -> StageResult {
        if let Some(path) = &self.cfg.model_path {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let model = MultiLabelModel::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            let note = format!("loaded {}", model.config.id());
            self.model = Some(model);
            self.write(artifacts::MODEL, &text)?;
            return Ok((StageStatus::Done, vec![note]));
        }
        if self.kind != JobKind::Train && self.program.method_count() == 0 {
            return Ok((StageStatus::Skipped, vec!["project has no methods".into()]));
        }
        let t = training_matrix(&self.dataset, Some(&self.program), &self.extractor)?;
        let arff = emit_arff(&t.rows, &t.schema).map_err(|e| e.to_string())?;
        self.write(artifacts::TRAINING, &arff)?;
        let (model, notes) = train_with_fallback(&self.cfg.training, &t).map_err(|e| e.to_string())?;
        self.write(artifacts::MODEL, &model.to_json())?;
        self.model = Some(model);
        Ok((StageStatus::Done, notes))
    }

    fn predict(&mut self) -> StageResult {
        let Some(model) = &self.model else {
            self.write(artifacts::PREDICTIONS, "[]\n")?;
            return Ok((StageStatus::Skipped, vec!["no model".into()]));
        };
        self.predictions = predict_program(model, &self.features).map_err(|e| e.to_string())?;
        let flagged = self.predictions.iter().filter(|p| !p.labels.is_empty()).count();
        let text = pretty(&self.predictions);
        self.write(artifacts::PREDICTIONS, &text)?;
        Ok((
            StageStatus::Done,
            vec![format!("{flagged} of {} methods flagged", self.predictions.len())],
        ))
    }

    fn merge(&mut self) -> StageResult {
        let detected = detected_records(&self.program, &self.predictions);
        let kept = detected
            .iter()
            .filter(|d| {
                self.dataset
                    .get(&d.signature)
                    .is_some_and(|r| r.discovery != Discovery::Detected)
            })
            .count();
        self.dataset = merge_detected(&self.dataset, &detected).map_err(|e| e.to_string())?;
        let text = self.dataset.save();
        self.write(artifacts::DATASET, &text)?;
        Ok((
            StageStatus::Done,
            vec![format!(
                "{} detected, {kept} left unchanged by existing records",
                detected.len()
            )],
        ))
    }

    fn specgen(&mut self) -> StageResult {
        let (file, notes) = match &self.preset_specs {
            Some(f) => (f.clone(), vec!["specs given".to_string()]),
            None => {
                check_cwe_filter(self.cfg.cwe_filter.as_deref()).map_err(|e| e.to_string())?;
                let g = generate_specs(&self.dataset, self.cfg.cwe_filter.as_deref());
                (SpecFile::new(g.specs), g.diagnostics)
            }
        };
        self.write(artifacts::SPECS, &file.to_json())?;
        self.specs = file.specs;
        Ok((StageStatus::Done, notes))
    }

    fn configure(&mut self) -> StageResult {
        let setup = AnalysisSetup {
            analysis: &self.cfg.analysis,
            specs: self.specs.iter().map(|s| s.id.as_str()).collect(),
            files: self.program.files.len(),
            methods: self.program.method_count(),
        };
        let text = pretty(&setup);
        self.write(artifacts::ANALYSIS, &text)?;
        Ok((StageStatus::Done, Vec::new()))
    }

    fn analyze(&mut self) -> StageResult {
        self.findings = analyze_program(&self.program, &self.specs, &self.cfg.analysis);
        let text = pretty(&self.findings);
        self.write(artifacts::FINDINGS, &text)?;
        Ok((StageStatus::Done, vec![format!("{} findings", self.findings.len())]))
    }

    fn report(&mut self) -> StageResult {
        let sarif = emit_sarif(&self.findings, &tool_meta());
        let problems = validate_sarif(&sarif);
        if !problems.is_empty() {
            return Err(format!("invalid SARIF: {}", problems.join("; ")));
        }
        self.write(artifacts::SARIF, &sarif)?;
        self.sarif = Some(sarif);
        Ok((StageStatus::Done, Vec::new()))
    }
}

/// Checks only that the dataset file loads; used before a run starts.
pub fn check_dataset_file(path: &Path) -> Result<Dataset, String> {
    require_file("dataset_path", path).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    Dataset::load(&text).map_err(|e| e.to_string())
}
