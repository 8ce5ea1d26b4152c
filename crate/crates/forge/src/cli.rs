//! Command-line interface. Exit codes: 0 success, 1 findings present with
//! `--fail-on-findings`, 2 error.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use srm_core::dataset::{dataset_stats, split_dataset, Dataset};
use srm_core::features::{emit_arff, read_arff, FeatureExtractor, FeatureVector};
use srm_core::labels::{Label, LabelSet};
use srm_core::ml::{
    cross_validate, evaluate_metrics, model_search, predict_labels, ModelConfig, MultiLabelModel, Protocol,
    TrainingMatrix,
};
use srm_core::program::{index_program, ProgramModel};
use srm_core::specgen::{generate_specs, MatchMode, SpecFile};
use srm_core::taint::AnalysisConfig;

use crate::config::{write_atomic, ConfigFile, PipelineConfig};
use crate::pipeline::{self, predict_program, run_with_specs, training_matrix, train_with_fallback, JobKind, RunOutput, Silent};
use crate::project::load_sources;
use crate::server::{serve, AppState};

#[derive(Debug, Parser)]
#[command(name = "srm-forge", version, about = "Detect security-relevant methods, generate taint specs, analyze and report")]
pub struct Cli {
    /// JSON file whose fields override the matching flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predict labels for project methods and merge them into the dataset.
    Detect(RunArgs),
    /// Train a multi-label model on a dataset.
    Train(TrainArgs),
    /// Generate taint specifications from a dataset.
    Specgen(SpecgenArgs),
    /// Run the taint analysis with a specification file.
    Analyze(AnalyzeArgs),
    /// Detect, merge, generate specs, analyze and write SARIF in one run.
    Pipeline(RunArgs),
    /// Cross-validate a model configuration.
    Eval(CvArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Feature extraction.
    #[command(subcommand)]
    Features(FeaturesCommand),
    /// Dataset maintenance.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Model training, prediction, evaluation and search.
    #[command(subcommand)]
    Ml(MlCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatchModeArg {
    Exact,
    NameAndArity,
}

impl From<MatchModeArg> for MatchMode {
    fn from(m: MatchModeArg) -> Self {
        match m {
            MatchModeArg::Exact => MatchMode::Exact,
            MatchModeArg::NameAndArity => MatchMode::NameAndArity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Kfold,
    Holdout,
}

#[derive(Debug, Args)]
pub struct AnalysisArgs {
    /// Interprocedural call depth.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, value_enum)]
    pub match_mode: Option<MatchModeArg>,
}

impl AnalysisArgs {
    fn resolve(&self, file: Option<AnalysisConfig>) -> AnalysisConfig {
        if let Some(a) = file {
            return a;
        }
        let mut a = AnalysisConfig::default();
        if let Some(d) = self.depth {
            a.max_call_depth = d;
        }
        if let Some(m) = self.match_mode {
            a.match_mode = m.into();
        }
        a
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub project: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Trained model; without it a model is trained on the dataset.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// CWE labels to generate specs for, e.g. `cwe89,cwe78`.
    #[arg(long, value_delimiter = ',', value_parser = parse_label)]
    pub cwe: Option<Vec<Label>>,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Output directory for every artifact.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub fail_on_findings: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// ARFF training file, instead of a dataset.
    #[arg(long, conflicts_with = "dataset")]
    pub arff: Option<PathBuf>,
    /// Project whose declarations refine features of dataset methods.
    #[arg(long)]
    pub project: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpecgenArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', value_parser = parse_label)]
    pub cwe: Option<Vec<Label>>,
    /// Spec file to write; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub project: Option<PathBuf>,
    #[arg(long)]
    pub specs: PathBuf,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub fail_on_findings: bool,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, conflicts_with = "dataset")]
    pub arff: Option<PathBuf>,
    #[arg(long)]
    pub project: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "kfold")]
    pub protocol: ProtocolArg,
    /// Training share per holdout split.
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub project: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}

#[derive(Debug, Subcommand)]
pub enum FeaturesCommand {
    /// Write an ARFF file: dataset records with their labels when a dataset
    /// is given, else every project method unlabelled.
    Extract {
        #[arg(long)]
        project: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Check a dataset file and print its warnings.
    Validate {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Print label statistics as JSON.
    Stats {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Seeded train/test split.
    Split {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value_t = 0.7)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum MlCommand {
    Train(TrainArgs),
    /// Predict labels for every project method.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        project: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a trained model on labelled data.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Cv(CvArgs),
    /// Rank grid configurations on one seeded 70:30 split.
    Search {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 24)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// What a successful command reports for the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Outcome {
    pub findings: Option<usize>,
    pub fail_on_findings: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        match self.findings {
            Some(n) if n > 0 && self.fail_on_findings => 1,
            _ => 0,
        }
    }
}

pub fn exit_code(r: &Result<Outcome>) -> u8 {
    match r {
        Ok(o) => o.exit_code(),
        Err(_) => 2,
    }
}

struct Ctx {
    file: ConfigFile,
}

impl Ctx {
    fn pick(file: &Option<PathBuf>, flag: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
        file.clone()
            .or_else(|| flag.clone())
            .ok_or_else(|| anyhow!("missing {what}"))
    }

    fn project(&self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        Self::pick(&self.file.project_root, flag, "--project (or project_root in --config)")
    }

    fn dataset(&self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        Self::pick(&self.file.dataset_path, flag, "--dataset (or dataset_path in --config)")
    }

    fn out(&self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        Self::pick(&self.file.output_dir, flag, "--out (or output_dir in --config)")
    }

    fn model_out(&self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        Self::pick(&self.file.model_path, flag, "--out (or model_path in --config)")
    }

    fn model_in(&self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        Self::pick(&self.file.model_path, flag, "--model (or model_path in --config)")
    }

    fn training(&self, seed: Option<u64>) -> ModelConfig {
        let mut c = self.file.training.unwrap_or_default();
        if self.file.training.is_none() {
            if let Some(s) = seed {
                c.seed = s;
            }
        }
        c
    }

    fn fail_on_findings(&self, flag: bool) -> bool {
        self.file.fail_on_findings.unwrap_or(flag)
    }

    fn pipeline_config(&self, a: &RunArgs) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::new(self.project(&a.project)?, self.dataset(&a.dataset)?, self.out(&a.out)?);
        cfg.model_path = self.file.model_path.clone().or_else(|| a.model.clone());
        cfg.cwe_filter = self.file.cwe_filter.clone().or_else(|| a.cwe.clone());
        cfg.analysis = a.analysis.resolve(self.file.analysis);
        cfg.training = self.training(None);
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let ctx = Ctx { file };
    match cli.command {
        Command::Detect(a) => run_kind(&ctx, JobKind::Detect, &a),
        Command::Pipeline(a) => run_kind(&ctx, JobKind::Pipeline, &a),
        Command::Train(a) | Command::Ml(MlCommand::Train(a)) => train_cmd(&ctx, &a),
        Command::Specgen(a) => specgen_cmd(&ctx, &a),
        Command::Analyze(a) => analyze_cmd(&ctx, &a),
        Command::Eval(a) | Command::Ml(MlCommand::Cv(a)) => cv_cmd(&ctx, &a),
        Command::Serve(a) => serve_cmd(&ctx, &a),
        Command::Features(FeaturesCommand::Extract { project, dataset, out }) => {
            features_cmd(&ctx, &project, &dataset, &out)
        }
        Command::Dataset(d) => dataset_cmd(&ctx, d),
        Command::Ml(MlCommand::Predict { model, project, out }) => {
            let model = load_model(&ctx.model_in(&model)?)?;
            let program = load_program(&ctx.project(&project)?)?;
            let features = FeatureExtractor::default().extract_program(&program);
            let preds = predict_program(&model, &features)?;
            emit_json(&preds, out.as_deref())
        }
        Command::Ml(MlCommand::Eval { model, data, out }) => {
            let model = load_model(&ctx.model_in(&model)?)?;
            let t = load_matrix(&ctx, &data)?;
            let mut pred = Vec::with_capacity(t.len());
            for (x, _) in &t.rows {
                pred.push(predict_labels(&model, x)?.labels);
            }
            let metrics = evaluate_metrics(&pred, &t.labels())?;
            emit_json(&metrics, out.as_deref())
        }
        Command::Ml(MlCommand::Search { data, budget, seed, out }) => {
            let t = load_matrix(&ctx, &data)?;
            let r = model_search(&t, budget, seed)?;
            emit_json(&r, out.as_deref())
        }
    }
}

fn print_summary(out: &RunOutput) {
    for s in &out.manifest.stages {
        let notes = if s.notes.is_empty() {
            String::new()
        } else {
            format!(": {}", s.notes.join("; "))
        };
        println!("{:<9} {:?}{notes}", s.stage.name(), s.status);
    }
    if let Some(p) = out.sarif_path() {
        println!("{} finding(s); SARIF at {}", out.findings.len(), p.display());
    }
    println!("artifacts in {}", out.output_dir.display());
}

fn run_kind(ctx: &Ctx, kind: JobKind, a: &RunArgs) -> Result<Outcome> {
    let cfg = ctx.pipeline_config(a)?;
    let out = pipeline::run(kind, &cfg, &Silent)?;
    print_summary(&out);
    Ok(Outcome {
        findings: (kind == JobKind::Pipeline).then_some(out.findings.len()),
        fail_on_findings: ctx.fail_on_findings(a.fail_on_findings),
    })
}

fn analyze_cmd(ctx: &Ctx, a: &AnalyzeArgs) -> Result<Outcome> {
    let text = read(&a.specs)?;
    let specs = SpecFile::load(&text).with_context(|| format!("{}", a.specs.display()))?;
    let analysis = a.analysis.resolve(ctx.file.analysis);
    let out = run_with_specs(&ctx.project(&a.project)?, specs, analysis, &ctx.out(&a.out)?)?;
    print_summary(&out);
    Ok(Outcome {
        findings: Some(out.findings.len()),
        fail_on_findings: ctx.fail_on_findings(a.fail_on_findings),
    })
}

fn specgen_cmd(ctx: &Ctx, a: &SpecgenArgs) -> Result<Outcome> {
    let d = load_dataset(&ctx.dataset(&a.dataset)?)?;
    let filter = ctx.file.cwe_filter.clone().or_else(|| a.cwe.clone());
    let g = generate_specs(&d, filter.as_deref());
    for diag in &g.diagnostics {
        eprintln!("note: {diag}");
    }
    let text = SpecFile::new(g.specs).to_json();
    match &a.out {
        Some(p) => write_atomic(p, &text).with_context(|| format!("{}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(Outcome::default())
}

fn train_cmd(ctx: &Ctx, a: &TrainArgs) -> Result<Outcome> {
    let data = DataArgs {
        dataset: a.dataset.clone(),
        arff: a.arff.clone(),
        project: a.project.clone(),
    };
    let t = load_matrix(ctx, &data)?;
    let (model, notes) = train_with_fallback(&ctx.training(a.seed), &t)?;
    for n in notes {
        println!("{n}");
    }
    let out = ctx.model_out(&a.out)?;
    write_atomic(&out, &model.to_json()).with_context(|| format!("{}", out.display()))?;
    println!("model written to {}", out.display());
    Ok(Outcome::default())
}

fn cv_cmd(ctx: &Ctx, a: &CvArgs) -> Result<Outcome> {
    let t = load_matrix(ctx, &a.data)?;
    let config = ctx.training(a.seed);
    let protocol = match a.protocol {
        ProtocolArg::Kfold => Protocol::Kfold,
        ProtocolArg::Holdout => Protocol::Holdout {
            train_fraction: a.train_fraction,
        },
    };
    let report = cross_validate(&t, &config, a.k, protocol, a.seed.unwrap_or(config.seed))?;
    emit_json(&report, a.out.as_deref())
}

fn serve_cmd(ctx: &Ctx, a: &ServeArgs) -> Result<Outcome> {
    let mut base = PipelineConfig::new(ctx.project(&a.project)?, ctx.dataset(&a.dataset)?, ctx.out(&a.out)?);
    base.model_path = ctx.file.model_path.clone();
    base.cwe_filter = ctx.file.cwe_filter.clone();
    base.analysis = ctx.file.analysis.unwrap_or_default();
    base.training = ctx.training(None);
    let state = AppState::new(base).map_err(|e| anyhow!(e))?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(serve(state, a.addr))?;
    Ok(Outcome::default())
}

fn features_cmd(ctx: &Ctx, project: &Option<PathBuf>, dataset: &Option<PathBuf>, out: &Path) -> Result<Outcome> {
    let x = FeatureExtractor::default();
    let project = ctx.file.project_root.clone().or_else(|| project.clone());
    let dataset = ctx.file.dataset_path.clone().or_else(|| dataset.clone());
    let program = project.as_deref().map(load_program).transpose()?;
    let rows: Vec<(FeatureVector, LabelSet)> = match (&dataset, &program) {
        (Some(d), _) => training_matrix(&load_dataset(d)?, program.as_ref(), &x)
            .map_err(|e| anyhow!(e))?
            .rows,
        (None, Some(p)) => x
            .extract_program(p)
            .into_iter()
            .map(|(_, v)| (v, LabelSet::EMPTY))
            .collect(),
        (None, None) => bail!("missing --project or --dataset"),
    };
    let arff = emit_arff(&rows, x.schema())?;
    write_atomic(out, &arff).with_context(|| format!("{}", out.display()))?;
    println!("{} rows written to {}", rows.len(), out.display());
    Ok(Outcome::default())
}

fn dataset_cmd(ctx: &Ctx, c: DatasetCommand) -> Result<Outcome> {
    match c {
        DatasetCommand::Validate { dataset } => {
            let d = load_dataset(&ctx.dataset(&dataset)?)?;
            for w in d.warnings() {
                println!("warning: {w}");
            }
            println!("ok: {} records", d.len());
        }
        DatasetCommand::Stats { dataset } => {
            let d = load_dataset(&ctx.dataset(&dataset)?)?;
            emit_json(&dataset_stats(&d), None)?;
        }
        DatasetCommand::Split {
            dataset,
            train_fraction,
            seed,
            train_out,
            test_out,
        } => {
            if !(0.0..=1.0).contains(&train_fraction) {
                bail!("--train-fraction must lie in [0, 1]");
            }
            let d = load_dataset(&ctx.dataset(&dataset)?)?;
            let (train, test) = split_dataset(&d, train_fraction, seed);
            write_atomic(&train_out, &train.save())?;
            write_atomic(&test_out, &test.save())?;
            println!("{} training and {} test records", train.len(), test.len());
        }
    }
    Ok(Outcome::default())
}

fn parse_label(s: &str) -> Result<Label, String> {
    Label::from_id(s).ok_or_else(|| format!("unknown label `{s}`"))
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))
}

fn load_dataset(p: &Path) -> Result<Dataset> {
    Dataset::load(&read(p)?).with_context(|| format!("{}", p.display()))
}

fn load_model(p: &Path) -> Result<MultiLabelModel> {
    MultiLabelModel::from_json(&read(p)?).map_err(|e| anyhow!("{}: {e}", p.display()))
}

fn load_program(root: &Path) -> Result<ProgramModel> {
    let files = load_sources(root, &[])?;
    let (program, diagnostics) = index_program(&files)?;
    for d in diagnostics {
        eprintln!("warning: {d}");
    }
    Ok(program)
}

fn load_matrix(ctx: &Ctx, a: &DataArgs) -> Result<TrainingMatrix> {
    let x = FeatureExtractor::default();
    if let Some(p) = &a.arff {
        let rows = read_arff(&read(p)?, x.schema()).with_context(|| format!("{}", p.display()))?;
        return Ok(TrainingMatrix::new(x.schema().clone(), rows)?);
    }
    let d = load_dataset(&ctx.dataset(&a.dataset)?)?;
    let project = ctx.file.project_root.clone().or_else(|| a.project.clone());
    let program = project.as_deref().map(load_program).transpose()?;
    training_matrix(&d, program.as_ref(), &x).map_err(|e| anyhow!(e))
}

fn emit_json<T: Serialize>(v: &T, out: Option<&Path>) -> Result<Outcome> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    match out {
        Some(p) => write_atomic(p, &text).with_context(|| format!("{}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(Outcome::default())
}
