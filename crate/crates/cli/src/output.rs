//! Output directory handling and the run record.

use std::path::{Path, PathBuf};

use serde::Serialize;

use letf_core::payoff_analytics::format_f64;
use letf_core::perf_stats::{write_summary_csv, StatsSummary};

use crate::config::{ExperimentId, Manifest};
use crate::error::{CliError, CliResult};

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Collects the files an experiment writes, all named `<id>_<suffix>`.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    id: ExperimentId,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path, id: ExperimentId) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| {
            CliError::Config(format!("cannot create output directory {}: {e}", root.display()))
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            id,
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, suffix: &str) -> PathBuf {
        self.root.join(format!("{}_{suffix}", self.id))
    }

    /// Renders into memory first; nothing is written if `render` fails.
    pub fn write(
        &mut self,
        suffix: &str,
        render: impl FnOnce(&mut Vec<u8>) -> letf_core::Result<()>,
    ) -> CliResult<PathBuf> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        let path = self.path_for(suffix);
        write_atomic(&path, &buf)?;
        self.files
            .push(path.file_name().expect("file").to_string_lossy().into_owned());
        Ok(path)
    }

    pub fn write_summary(&mut self, rows: &[(String, StatsSummary)]) -> CliResult<PathBuf> {
        self.write("summary.csv", |buf| write_summary_csv(rows, buf))
    }

    /// `name,value` pairs; skipped when empty.
    pub fn write_diagnostics(&mut self, diagnostics: &[(String, f64)]) -> CliResult<()> {
        if diagnostics.is_empty() {
            return Ok(());
        }
        self.write("diagnostics.csv", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["name", "value"])?;
            for (k, v) in diagnostics {
                w.write_record([k.clone(), format_f64(*v)])?;
            }
            w.flush()?;
            Ok(())
        })?;
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

/// Written as `<id>_run.json` after every successful run.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub experiment: ExperimentId,
    pub manifest_hash: String,
    pub manifest: serde_json::Value,
    pub version: String,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
}

impl RunRecord {
    pub fn new(manifest: &Manifest, wall_time_seconds: f64, outputs: Vec<String>) -> Self {
        let version = match option_env!("LETF_GIT_REV") {
            Some(rev) => format!("{} ({rev})", env!("CARGO_PKG_VERSION")),
            None => env!("CARGO_PKG_VERSION").to_string(),
        };
        Self {
            experiment: manifest.experiment,
            manifest_hash: manifest.hash(),
            manifest: serde_json::from_str(&manifest.canonical_json()).expect("valid json"),
            version,
            wall_time_seconds,
            outputs,
        }
    }

    pub fn write(&self, root: &Path) -> CliResult<PathBuf> {
        let path = root.join(format!("{}_run.json", self.experiment));
        let mut text = serde_json::to_string_pretty(self).expect("record serialises");
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path(), ExperimentId::Table2).unwrap();
        out.write("x.csv", |b| {
            b.extend_from_slice(b"a\n");
            Ok(())
        })
        .unwrap();
        let failed = out.write("y.csv", |_| Err(letf_core::Error::InvalidArgument("boom".into())));
        assert!(failed.is_err());
        let names: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["table2_x.csv"]);
        assert_eq!(out.files(), ["table2_x.csv"]);
    }
}
