//! Registry of reproducible experiments.

mod data;
mod historical;
mod parametric;
mod payoff;
mod policy;
mod synth;

use std::path::Path;
use std::time::Instant;

use letf_core::perf_stats::StatsSummary;

use crate::config::{ExperimentId, Manifest};
use crate::error::CliResult;
use crate::output::{OutputDir, RunRecord};

pub use data::load_joint_series;
pub use historical::{run_historical, HistoricalPath, HistoricalStrategy};

/// Grid on which terminal-ratio CDFs are written.
pub fn cdf_grid() -> Vec<f64> {
    (0..=600).map(|i| i as f64 * 0.005).collect()
}

/// In-memory results of a run, in addition to the files written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub summary: Vec<(String, StatsSummary)>,
    /// Named scalar results, also written to `<id>_diagnostics.csv`.
    pub diagnostics: Vec<(String, f64)>,
}

impl RunOutcome {
    pub fn row(&self, cell: &str) -> Option<&StatsSummary> {
        self.summary.iter().find(|(c, _)| c == cell).map(|(_, s)| s)
    }

    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

/// What an experiment hands back before the run record is written.
#[derive(Debug, Default)]
pub(crate) struct Results {
    pub summary: Vec<(String, StatsSummary)>,
    pub diagnostics: Vec<(String, f64)>,
}

/// Runs the experiment described by `manifest`, writing every output under
/// `out_dir`.
pub fn run(manifest: &Manifest, out_dir: &Path) -> CliResult<RunOutcome> {
    let start = Instant::now();
    let mut out = OutputDir::create(out_dir, manifest.experiment)?;
    let results = match manifest.experiment {
        ExperimentId::Table2 | ExperimentId::Table3 | ExperimentId::Table4 => {
            parametric::run_table(manifest, &mut out)?
        }
        ExperimentId::Fig4 | ExperimentId::Fig5 => parametric::run_bands(manifest, &mut out)?,
        ExperimentId::Fig2 => payoff::run(manifest, &mut out)?,
        ExperimentId::Table5 => policy::run(manifest, &mut out)?,
        ExperimentId::Table6 | ExperimentId::Fig7 => historical::run(manifest, &mut out)?,
        ExperimentId::Synthdata => synth::run(manifest, &mut out)?,
    };
    if !results.summary.is_empty() {
        out.write_summary(&results.summary)?;
    }
    out.write_diagnostics(&results.diagnostics)?;
    let record = RunRecord::new(manifest, start.elapsed().as_secs_f64(), out.files().to_vec());
    record.write(out.root())?;
    Ok(RunOutcome {
        record,
        summary: results.summary,
        diagnostics: results.diagnostics,
    })
}
