//! Java project discovery and source excerpts.

use std::io;
use std::path::{Component, Path, PathBuf};

use serde::Serialize;
use srm_core::program::SourceFile;
use thiserror::Error;
use walkdir::WalkDir;

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("cannot read `{}`: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot walk `{}`: {source}", root.display())]
    Walk {
        root: PathBuf,
        source: walkdir::Error,
    },
    #[error("`{0}` is not a project-relative Java source path")]
    BadUri(String),
    #[error("`{uri}` has no line {line}")]
    NoLine { uri: String, line: u32 },
}

/// Every `.java` file under `root` with a `/`-separated project-relative uri,
/// sorted by uri. Hidden directories and the `exclude` directories are skipped.
pub fn load_sources(root: &Path, exclude: &[PathBuf]) -> Result<Vec<SourceFile>, ProjectError> {
    let skip: Vec<PathBuf> = exclude
        .iter()
        .filter_map(|p| p.canonicalize().ok())
        .collect();
    let mut out = Vec::new();
    let walker = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| {
            if e.depth() == 0 {
                return true;
            }
            let hidden = e.file_name().to_string_lossy().starts_with('.');
            let excluded = e.file_type().is_dir()
                && e.path()
                    .canonicalize()
                    .is_ok_and(|c| skip.contains(&c));
            !hidden && !excluded
        });
    for entry in walker {
        let entry = entry.map_err(|source| ProjectError::Walk {
            root: root.into(),
            source,
        })?;
        let path = entry.path();
        if !entry.file_type().is_file() || path.extension().is_none_or(|x| x != "java") {
            continue;
        }
        let content = std::fs::read_to_string(path).map_err(|source| ProjectError::Read {
            path: path.into(),
            source,
        })?;
        out.push(SourceFile::new(relative_uri(root, path), content));
    }
    out.sort_by(|a, b| a.uri.cmp(&b.uri));
    Ok(out)
}

fn relative_uri(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Lines around one location, for the findings view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Excerpt {
    pub uri: String,
    pub start_line: u32,
    pub lines: Vec<String>,
}

/// Lines `line - context ..= line + context` of a project file, clipped to
/// the file. The uri must be relative, stay inside the project and name a
/// `.java` file.
pub fn read_excerpt(root: &Path, uri: &str, line: u32, context: u32) -> Result<Excerpt, ProjectError> {
    let rel = Path::new(uri);
    let inside = rel
        .components()
        .all(|c| matches!(c, Component::Normal(_)));
    if uri.is_empty() || !inside || rel.extension().is_none_or(|x| x != "java") {
        return Err(ProjectError::BadUri(uri.into()));
    }
    let path = root.join(rel);
    let text = std::fs::read_to_string(&path).map_err(|source| ProjectError::Read { path, source })?;
    let all: Vec<&str> = text.lines().collect();
    if line == 0 || line as usize > all.len() {
        return Err(ProjectError::NoLine {
            uri: uri.into(),
            line,
        });
    }
    let start = line.saturating_sub(context).max(1);
    let end = (line.saturating_add(context) as usize).min(all.len());
    Ok(Excerpt {
        uri: uri.into(),
        start_line: start,
        lines: all[start as usize - 1..end].iter().map(|s| s.to_string()).collect(),
    })
}
