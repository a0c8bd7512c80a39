//! Writes the synthetic stand-in inputs in the CSV format the pipeline reads.

use letf_core::data_pipeline::{build_proxy_returns, write_series_csv, JointSeries};
use letf_core::payoff_analytics::format_f64;

use super::data::{data_costs, load_raw};
use super::Results;
use crate::config::{DataSource, Manifest};
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

pub(crate) fn run(manifest: &Manifest, out: &mut OutputDir) -> CliResult<Results> {
    let spec = manifest.data.as_ref().expect("resolved");
    if !matches!(spec.source, DataSource::Synthetic { .. }) {
        return Err(CliError::Config("synthdata only generates synthetic data".into()));
    }
    let raw = load_raw(spec)?;
    out.write("index.csv", |b| write_series_csv(&raw.index, b))?;
    out.write("tbill.csv", |b| write_series_csv(&raw.tbill, b))?;
    out.write("cpi.csv", |b| write_series_csv(&raw.cpi, b))?;
    let joint = JointSeries::from_proxy(&build_proxy_returns(&raw, &data_costs())?)?;
    out.write("monthly_real.csv", |b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["month", "letf", "vetf", "tbill"])?;
        for (m, r) in joint.months.iter().zip(&joint.rows) {
            w.write_record([
                m.to_string(),
                format_f64(r.letf),
                format_f64(r.vetf),
                format_f64(r.tbill),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    let n = joint.len() as f64;
    let mean =
        |f: fn(&letf_core::data_pipeline::JointReturn) -> f64| joint.rows.iter().map(f).sum::<f64>() / n;
    Ok(Results {
        summary: Vec::new(),
        diagnostics: vec![
            ("months".into(), n),
            ("mean_letf".into(), mean(|r| r.letf)),
            ("mean_vetf".into(), mean(|r| r.vetf)),
            ("mean_tbill".into(), mean(|r| r.tbill)),
        ],
    })
}
