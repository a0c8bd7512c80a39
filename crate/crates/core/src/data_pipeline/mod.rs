//! Historical data pipeline.
//!
//! Daily nominal index and T-bill returns plus monthly CPI levels go in;
//! real monthly LETF/VETF/T-bill proxy returns come out, ready for the
//! stationary block bootstrap.
//!
//! ```text
//! RawDataset ──build_proxy_returns──▶ ProxyReturns ──JointSeries::from_proxy──▶ JointSeries
//!                                                                                 │
//!                                                 stationary_block_bootstrap ◀────┘
//! ```

mod bootstrap;
mod csv_io;
mod proxy;
mod scenario;
mod synthetic;

use std::fmt;

use chrono::{Datelike, NaiveDate};

pub use bootstrap::{
    bootstrap_blocks, stationary_block_bootstrap, Block, BootstrapConfig, BootstrapScenarios,
};
pub use csv_io::{read_series_csv, write_series_csv};
pub use proxy::{build_proxy_returns, compound, inflation_adjust, reinflate, ProxyReturns};
pub use scenario::{
    interval_gross_returns, IntervalGross, JointReturn, JointSeries, Provenance, ScenarioProvider,
    ScenarioSet,
};
pub use synthetic::{synthetic_standin, SyntheticConfig};

use crate::error::{Error, Result};

/// Calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Data(format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    pub fn of(date: NaiveDate) -> Self {
        Self {
            year: date.year(),
            month: date.month(),
        }
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            Self {
                year: self.year + 1,
                month: 1,
            }
        } else {
            Self {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    pub fn prev(self) -> Self {
        if self.month == 1 {
            Self {
                year: self.year - 1,
                month: 12,
            }
        } else {
            Self {
                year: self.year,
                month: self.month - 1,
            }
        }
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }

    /// `YYYY-MM`.
    pub fn parse(s: &str) -> Result<Self> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::Data(format!("expected YYYY-MM, got {s:?}")))?;
        let year = y.parse().map_err(|_| Error::Data(format!("bad year in {s:?}")))?;
        let month = m
            .parse()
            .map_err(|_| Error::Data(format!("bad month in {s:?}")))?;
        Month::new(year, month)
    }

    /// Months elapsed from `self` to `later`.
    pub fn months_until(self, later: Month) -> i64 {
        (later.year as i64 - self.year as i64) * 12 + later.month as i64 - self.month as i64
    }

    pub(crate) fn yyyymm(self) -> u32 {
        self.year as u32 * 100 + self.month
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawKind {
    DailyReturns,
    MonthlyLevels,
}

/// Dated input records: daily nominal returns, or monthly CPI levels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub kind: RawKind,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl RawSeries {
    pub fn new(kind: RawKind, dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        let s = Self { kind, dates, values };
        s.validate()?;
        Ok(s)
    }

    pub fn from_records(kind: RawKind, records: Vec<(NaiveDate, f64)>) -> Result<Self> {
        let (dates, values) = records.into_iter().unzip();
        Self::new(kind, dates, values)
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dates.len() != self.values.len() {
            return Err(Error::Data("dates and values differ in length".into()));
        }
        if let Some(w) = self.dates.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Data(format!(
                "dates must be strictly increasing: {} then {}",
                w[0], w[1]
            )));
        }
        for (d, &v) in self.dates.iter().zip(&self.values) {
            if !v.is_finite() {
                return Err(Error::Data(format!("non-finite value on {d}")));
            }
            match self.kind {
                RawKind::DailyReturns if v <= -1.0 => {
                    return Err(Error::Data(format!("return {v} <= -1 on {d}")))
                }
                RawKind::MonthlyLevels if v <= 0.0 => {
                    return Err(Error::Data(format!("level {v} <= 0 on {d}")))
                }
                _ => {}
            }
        }
        if self.kind == RawKind::MonthlyLevels {
            if let Some(w) = self.dates.windows(2).find(|w| Month::of(w[0]) == Month::of(w[1])) {
                return Err(Error::Data(format!(
                    "two CPI levels in month {}",
                    Month::of(w[0])
                )));
            }
        }
        Ok(())
    }
}

/// The three raw inputs of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub index: RawSeries,
    pub tbill: RawSeries,
    pub cpi: RawSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frequency {
    Daily,
    Monthly,
    Quarterly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssetKind {
    Index,
    Tbill,
    Letf,
    Vetf,
}

/// Periodic returns labelled by the month each period starts in.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub frequency: Frequency,
    pub asset: AssetKind,
    pub periods: Vec<Month>,
    pub returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods.len() != self.returns.len() {
            return Err(Error::Data("periods and returns differ in length".into()));
        }
        for (m, &r) in self.periods.iter().zip(&self.returns) {
            let ok = match self.asset {
                AssetKind::Letf => r >= -1.0,
                _ => r > -1.0,
            };
            if !ok || !r.is_finite() {
                return Err(Error::Data(format!("invalid {:?} return {r} in {m}", self.asset)));
            }
        }
        Ok(())
    }
}
