//! Fixed-weight Monte Carlo tables and percentile-band figures.

use letf_core::market_models::{EtfCosts, MarketConfig, ParametricModel};
use letf_core::mc_engine::{
    run_table_experiment, simulate_paired_paths, terminal_ratios, AllocationPolicy, MarketSource,
    RebalanceMode, RebalanceSchedule, Recording, SimulationConfig, TableCell, TableConfig,
};
use letf_core::par::Execution;
use letf_core::perf_stats::{empirical_cdf, percentile_bands, StatsSummary, DEFAULT_BAND_QUANTILES};

use super::{cdf_grid, Results};
use crate::config::{ExperimentId, Manifest};
use crate::error::CliResult;
use crate::output::OutputDir;

pub const VETF_ALPHA: f64 = 0.6;
pub const HORIZON_LONG: f64 = 10.0;

fn market(manifest: &Manifest) -> CliResult<(ParametricModel, EtfCosts)> {
    let m: &MarketConfig = manifest
        .market
        .as_ref()
        .expect("resolved for parametric experiments");
    Ok((m.model()?, m.costs()?))
}

fn alpha_label(alpha: f64) -> String {
    format!("a{:03}", (alpha * 100.0).round() as i64)
}

fn cell(alpha: f64, suffix: &str, schedule: RebalanceSchedule, mode: RebalanceMode) -> TableCell {
    let label = if suffix.is_empty() {
        alpha_label(alpha)
    } else {
        format!("{}_{suffix}", alpha_label(alpha))
    };
    TableCell {
        label,
        letf_alpha: alpha,
        schedule,
        mode,
    }
}

/// Cells of each fixed-weight table.
pub fn table_cells(id: ExperimentId) -> CliResult<Vec<TableCell>> {
    Ok(match id {
        ExperimentId::Table2 => {
            let s = RebalanceSchedule::single(1.0)?;
            vec![
                cell(0.30, "", s, RebalanceMode::AllocateOnce),
                cell(0.45, "", s, RebalanceMode::AllocateOnce),
            ]
        }
        ExperimentId::Table3 => {
            let s = RebalanceSchedule::new(HORIZON_LONG, 1.0)?;
            vec![
                cell(0.30, "", s, RebalanceMode::EveryInterval),
                cell(0.45, "", s, RebalanceMode::EveryInterval),
            ]
        }
        ExperimentId::Table4 => {
            let mut cells = Vec::new();
            for alpha in [0.30, 0.45] {
                for (name, dt) in [("yearly", 1.0), ("quarterly", 0.25), ("monthly", 1.0 / 12.0)] {
                    let s = RebalanceSchedule::new(HORIZON_LONG, dt)?;
                    cells.push(cell(alpha, name, s, RebalanceMode::EveryInterval));
                }
            }
            cells
        }
        other => unreachable!("{other} is not a fixed-weight table"),
    })
}

pub(crate) fn run_table(manifest: &Manifest, out: &mut OutputDir) -> CliResult<Results> {
    let (model, costs) = market(manifest)?;
    let cfg = TableConfig {
        model,
        costs,
        vetf_alpha: VETF_ALPHA,
        cells: table_cells(manifest.experiment)?,
        n_paths: manifest.paths,
        seed: manifest.seed,
        exec: Execution::Parallel,
    };
    let rows = run_table_experiment(&cfg)?;
    let grid = cdf_grid();
    let mut results = Results::default();
    for row in rows {
        let cdf = empirical_cdf(&row.ratios)?;
        out.write(&format!("{}.csv", row.label), |b| cdf.write_csv(&grid, b))?;
        results.summary.push((row.label, row.summary));
    }
    Ok(results)
}

/// Percentile bands over time plus the terminal CDF for `α^ℓ = 0.45`.
pub(crate) fn run_bands(manifest: &Manifest, out: &mut OutputDir) -> CliResult<Results> {
    let (model, costs) = market(manifest)?;
    let (schedule, recording) = match manifest.experiment {
        ExperimentId::Fig4 => (RebalanceSchedule::new(HORIZON_LONG, 1.0)?, Recording::Full),
        _ => (
            RebalanceSchedule::new(HORIZON_LONG, 1.0 / 12.0)?,
            Recording::Strided(3),
        ),
    };
    let alpha = 0.45;
    let sim = SimulationConfig {
        source: MarketSource::Parametric(model),
        costs,
        schedule,
        mode: RebalanceMode::EveryInterval,
        letf_policy: AllocationPolicy::FixedWeight(alpha),
        vetf_alpha: VETF_ALPHA,
        n_paths: manifest.paths,
        seed: manifest.seed,
        recording,
        exec: Execution::Parallel,
    };
    let paths = simulate_paired_paths(&sim)?;
    let ratios = terminal_ratios(&paths);
    let trajectories: Vec<Vec<f64>> = paths
        .iter()
        .map(|p| p.trajectory.as_ref().expect("recorded").ratios())
        .collect();
    drop(paths);
    let times = recording.times(&schedule);
    let bands = percentile_bands(&trajectories, &DEFAULT_BAND_QUANTILES, &times)?;
    out.write("percentiles.csv", |b| bands.write_csv(b))?;
    let cdf = empirical_cdf(&ratios)?;
    out.write("cdf.csv", |b| cdf.write_csv(&cdf_grid(), b))?;

    let label = alpha_label(alpha);
    let last = bands.values.last().expect("non-empty");
    let mut results = Results::default();
    for (q, v) in bands.quantiles.iter().zip(last) {
        results
            .diagnostics
            .push((format!("{label}_p{}_at_T", (q * 100.0).round()), *v));
    }
    results
        .summary
        .push((label, StatsSummary::from_samples(&ratios)?));
    Ok(results)
}
