//! Synthetic stand-in for the proprietary CRSP inputs.
//!
//! Real daily index returns follow the fitted jump diffusion, the real
//! T-bill rate is a slowly mean-reverting monthly process and CPI inflation
//! is i.i.d. normal per month. Everything is converted to nominal daily
//! returns and monthly CPI levels so the output goes through exactly the same
//! pipeline as real data.

use chrono::{Datelike, NaiveDate, Weekday};

use super::{RawDataset, RawKind, RawSeries};
use crate::error::{Error, Result};
use crate::market_models::{EtfCosts, IntervalDraw, JumpModelParams, ParametricModel};
use crate::rng::{derive_seed, RngStream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub params: JumpModelParams,
    pub first_year: i32,
    pub last_year: i32,
    /// Mean monthly CPI inflation.
    pub inflation_mean: f64,
    pub inflation_sd: f64,
    /// Monthly shock size of the real T-bill rate (annualised units).
    pub real_rate_sd: f64,
    /// Monthly AR(1) coefficient of the real T-bill rate.
    pub real_rate_persistence: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            params: JumpModelParams::crsp_real(),
            first_year: 1926,
            last_year: 2023,
            inflation_mean: 0.0025,
            inflation_sd: 0.004,
            real_rate_sd: 0.004,
            real_rate_persistence: 0.97,
            seed: 1926,
        }
    }
}

fn weekdays_of_month(year: i32, month: u32) -> Vec<NaiveDate> {
    let mut d = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let mut out = Vec::with_capacity(23);
    while d.month() == month {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

/// Generates daily index/T-bill returns and monthly CPI levels covering
/// `first_year`-01 through `last_year`-12. The CPI series starts one month
/// earlier so every return month has an inflation figure.
pub fn synthetic_standin(cfg: &SyntheticConfig) -> Result<RawDataset> {
    cfg.params.validate()?;
    if cfg.last_year < cfg.first_year {
        return Err(Error::InvalidArgument("last_year before first_year".into()));
    }
    let model = ParametricModel::Jump(cfg.params);
    // the index path only needs the diffusion and jump parts
    let costs = EtfCosts::new(0.0, 0.0, 1.0)?;
    let mut market_rng = RngStream::new(derive_seed(cfg.seed, 1), 0);
    let mut macro_rng = RngStream::new(derive_seed(cfg.seed, 2), 0);
    let mut draw = IntervalDraw::default();

    let mut dates = Vec::new();
    let mut index = Vec::new();
    let mut tbill = Vec::new();
    let mut cpi_dates = vec![NaiveDate::from_ymd_opt(cfg.first_year - 1, 12, 1).expect("valid")];
    let mut cpi_levels = vec![100.0];
    let mean_rate = cfg.params.r;
    let mut real_rate = mean_rate;

    for year in cfg.first_year..=cfg.last_year {
        let months: Vec<Vec<NaiveDate>> = (1..=12).map(|m| weekdays_of_month(year, m)).collect();
        let days_in_year: usize = months.iter().map(Vec::len).sum();
        let dt = 1.0 / days_in_year as f64;
        for (mi, days) in months.iter().enumerate() {
            let infl = (cfg.inflation_mean + cfg.inflation_sd * macro_rng.standard_normal()).max(-0.5);
            real_rate = mean_rate
                + cfg.real_rate_persistence * (real_rate - mean_rate)
                + cfg.real_rate_sd * macro_rng.standard_normal();
            let nd = days.len() as f64;
            let daily_infl = (1.0 + infl).powf(1.0 / nd);
            let daily_bill_real = (real_rate / 12.0).exp().powf(1.0 / nd);
            for &d in days {
                let real_gross = model
                    .sample_interval(&costs, dt, &mut market_rng, &mut draw)
                    .index;
                dates.push(d);
                index.push(real_gross * daily_infl - 1.0);
                tbill.push(daily_bill_real * daily_infl - 1.0);
            }
            let level = cpi_levels.last().copied().expect("seeded") * (1.0 + infl);
            cpi_dates.push(NaiveDate::from_ymd_opt(year, mi as u32 + 1, 1).expect("valid"));
            cpi_levels.push(level);
        }
    }

    Ok(RawDataset {
        index: RawSeries::new(RawKind::DailyReturns, dates.clone(), index)?,
        tbill: RawSeries::new(RawKind::DailyReturns, dates, tbill)?,
        cpi: RawSeries::new(RawKind::MonthlyLevels, cpi_dates, cpi_levels)?,
    })
}
