//! Pipeline configuration, configuration-file overrides and per-project
//! settings.

use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use srm_core::labels::Label;
use srm_core::ml::ModelConfig;
use srm_core::taint::AnalysisConfig;
use thiserror::Error;

/// Settings file location relative to the project root.
pub const SETTINGS_FILE: &str = ".srm-forge/settings.json";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: `{}` does not exist", path.display())]
    Missing { field: &'static str, path: PathBuf },
    #[error("{field}: `{}` is not a directory", path.display())]
    NotADirectory { field: &'static str, path: PathBuf },
    #[error("{field}: `{}` is not a file", path.display())]
    NotAFile { field: &'static str, path: PathBuf },
    #[error("output_dir: `{}` is not writable: {source}", path.display())]
    Output { path: PathBuf, source: io::Error },
    #[error("cwe_filter: `{0}` is not a CWE label")]
    NotCwe(Label),
    #[error("`{}`: {reason}", path.display())]
    File { path: PathBuf, reason: String },
    #[error("missing {0}")]
    Required(&'static str),
}

/// Everything one pipeline run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub project_root: PathBuf,
    pub dataset_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cwe_filter: Option<Vec<Label>>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    pub output_dir: PathBuf,
    /// Model trained when no `model_path` is given.
    #[serde(default)]
    pub training: ModelConfig,
}

impl PipelineConfig {
    pub fn new(
        project_root: impl Into<PathBuf>,
        dataset_path: impl Into<PathBuf>,
        output_dir: impl Into<PathBuf>,
    ) -> PipelineConfig {
        PipelineConfig {
            project_root: project_root.into(),
            dataset_path: dataset_path.into(),
            model_path: None,
            cwe_filter: None,
            analysis: AnalysisConfig::default(),
            output_dir: output_dir.into(),
            training: ModelConfig::default(),
        }
    }

    /// Checks input paths and creates `output_dir` if needed.
    pub fn validate(&self) -> Result<(), ConfigError> {
        require_dir("project_root", &self.project_root)?;
        require_file("dataset_path", &self.dataset_path)?;
        if let Some(m) = &self.model_path {
            require_file("model_path", m)?;
        }
        check_cwe_filter(self.cwe_filter.as_deref())?;
        prepare_output(&self.output_dir)
    }

    /// Applies stored project settings.
    pub fn apply_settings(&mut self, s: &Settings) {
        if s.model_path.is_some() {
            self.model_path = s.model_path.clone();
        }
        if s.cwe_filter.is_some() {
            self.cwe_filter = s.cwe_filter.clone();
        }
        self.analysis = s.analysis;
        if let Some(t) = s.training {
            self.training = t;
        }
    }
}

pub(crate) fn require_dir(field: &'static str, p: &Path) -> Result<(), ConfigError> {
    if !p.exists() {
        return Err(ConfigError::Missing {
            field,
            path: p.into(),
        });
    }
    if !p.is_dir() {
        return Err(ConfigError::NotADirectory {
            field,
            path: p.into(),
        });
    }
    Ok(())
}

pub(crate) fn require_file(field: &'static str, p: &Path) -> Result<(), ConfigError> {
    if !p.exists() {
        return Err(ConfigError::Missing {
            field,
            path: p.into(),
        });
    }
    if !p.is_file() {
        return Err(ConfigError::NotAFile {
            field,
            path: p.into(),
        });
    }
    Ok(())
}

pub(crate) fn check_cwe_filter(filter: Option<&[Label]>) -> Result<(), ConfigError> {
    match filter.and_then(|f| f.iter().find(|l| !l.is_cwe())) {
        Some(l) => Err(ConfigError::NotCwe(*l)),
        None => Ok(()),
    }
}

pub(crate) fn prepare_output(dir: &Path) -> Result<(), ConfigError> {
    std::fs::create_dir_all(dir).map_err(|source| ConfigError::Output {
        path: dir.into(),
        source,
    })?;
    if !dir.is_dir() {
        return Err(ConfigError::NotADirectory {
            field: "output_dir",
            path: dir.into(),
        });
    }
    Ok(())
}

/// Values read from `--config`; every present field overrides the matching
/// command-line flag. Relative paths are resolved against the file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub project_root: Option<PathBuf>,
    pub dataset_path: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub cwe_filter: Option<Vec<Label>>,
    pub analysis: Option<AnalysisConfig>,
    pub output_dir: Option<PathBuf>,
    pub training: Option<ModelConfig>,
    pub fail_on_findings: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
            path: path.into(),
            reason: e.to_string(),
        })?;
        let mut c: ConfigFile = serde_json::from_str(&text).map_err(|e| ConfigError::File {
            path: path.into(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut c.project_root,
            &mut c.dataset_path,
            &mut c.model_path,
            &mut c.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }
}

/// Analysis options chosen in the settings dialog, stored per project.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cwe_filter: Option<Vec<Label>>,
    pub analysis: AnalysisConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training: Option<ModelConfig>,
}

impl Settings {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(m) = &self.model_path {
            require_file("model_path", m)?;
        }
        check_cwe_filter(self.cwe_filter.as_deref())
    }
}

pub fn settings_path(project_root: &Path) -> PathBuf {
    project_root.join(SETTINGS_FILE)
}

/// `None` when the project has no settings file yet.
pub fn load_settings(project_root: &Path) -> Result<Option<Settings>, ConfigError> {
    let path = settings_path(project_root);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| ConfigError::File {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| ConfigError::File {
            path,
            reason: e.to_string(),
        })
}

pub fn save_settings(project_root: &Path, s: &Settings) -> io::Result<()> {
    let path = settings_path(project_root);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(s).expect("settings serialize");
    text.push('\n');
    write_atomic(&path, &text)
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}
