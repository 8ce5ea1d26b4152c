//! Fixture helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use srm_core::dataset::Dataset;
use srm_forge::config::PipelineConfig;
use tempfile::TempDir;

pub const SOURCE: &str = "javax.servlet.http.HttpServletRequest.getParameter(String)";
pub const SINK: &str = "java.sql.Statement.executeQuery(String)";
pub const SANITIZER: &str = "org.owasp.esapi.Encoder.encodeForSQL(Codec,String)";
pub const DO_POST: &str = "org.demo.Servlet.doPost(HttpServletRequest,HttpServletResponse)";

pub fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

pub fn load_dataset(path: &Path) -> Dataset {
    Dataset::load(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn servlet_dataset() -> Dataset {
    load_dataset(&data("servlet/srms.json"))
}

pub fn without(d: &Dataset, signature: &str) -> Dataset {
    let kept = d.records().iter().filter(|r| r.signature != signature).cloned().collect();
    Dataset::new(d.version(), kept).unwrap()
}

pub fn copy_dir(src: &Path, dst: &Path) {
    std::fs::create_dir_all(dst).unwrap();
    for e in std::fs::read_dir(src).unwrap() {
        let e = e.unwrap();
        let target = dst.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            copy_dir(&e.path(), &target);
        } else {
            std::fs::copy(e.path(), target).unwrap();
        }
    }
}

/// A scratch copy of a fixture project with its own dataset file and
/// output directory.
pub struct Workspace {
    pub dir: TempDir,
    pub project: PathBuf,
    pub dataset: PathBuf,
    pub out: PathBuf,
}

impl Workspace {
    pub fn new(project_fixture: &str, dataset: &Dataset) -> Workspace {
        let dir = tempfile::tempdir().unwrap();
        let project = dir.path().join("project");
        if project_fixture.is_empty() {
            std::fs::create_dir_all(&project).unwrap();
        } else {
            copy_dir(&data(project_fixture), &project);
        }
        let dataset_path = dir.path().join("srms.json");
        std::fs::write(&dataset_path, dataset.save()).unwrap();
        let out = dir.path().join("out");
        Workspace {
            dir,
            project,
            dataset: dataset_path,
            out,
        }
    }

    pub fn config(&self) -> PipelineConfig {
        PipelineConfig::new(&self.project, &self.dataset, &self.out)
    }

    pub fn read_out(&self, name: &str) -> String {
        std::fs::read_to_string(self.out.join(name)).unwrap()
    }

    pub fn out_files(&self) -> Vec<String> {
        let mut v: Vec<String> = std::fs::read_dir(&self.out)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        v.sort();
        v
    }
}
