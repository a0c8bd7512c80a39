//! Loading the historical (or synthetic stand-in) input data.

use letf_core::data_pipeline::{
    build_proxy_returns, synthetic_standin, JointSeries, RawDataset, RawKind, RawSeries, SyntheticConfig,
};
use letf_core::market_models::{EtfCosts, JumpModelParams};

use crate::config::{DataSource, DataSpec};
use crate::error::CliResult;

/// LETF and VETF cost/leverage assumptions for the bootstrap experiments.
pub fn data_costs() -> EtfCosts {
    EtfCosts::sso_2x()
}

pub fn synthetic_config(seed: u64, first_year: i32, last_year: i32) -> SyntheticConfig {
    SyntheticConfig {
        params: JumpModelParams::crsp_real(),
        first_year,
        last_year,
        seed,
        ..Default::default()
    }
}

pub fn load_raw(spec: &DataSpec) -> CliResult<RawDataset> {
    Ok(match &spec.source {
        DataSource::Synthetic {
            seed,
            first_year,
            last_year,
        } => synthetic_standin(&synthetic_config(*seed, *first_year, *last_year))?,
        DataSource::Csv {
            index_csv,
            tbill_csv,
            cpi_csv,
        } => RawDataset {
            index: RawSeries::read_csv_file(index_csv, RawKind::DailyReturns)?,
            tbill: RawSeries::read_csv_file(tbill_csv, RawKind::DailyReturns)?,
            cpi: RawSeries::read_csv_file(cpi_csv, RawKind::MonthlyLevels)?,
        },
    })
}

/// Real monthly LETF/VETF/T-bill proxy returns.
pub fn load_joint_series(spec: &DataSpec) -> CliResult<JointSeries> {
    let raw = load_raw(spec)?;
    let proxy = build_proxy_returns(&raw, &data_costs())?;
    Ok(JointSeries::from_proxy(&proxy)?)
}
