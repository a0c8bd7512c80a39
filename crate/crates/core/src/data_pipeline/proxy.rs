use std::collections::BTreeMap;

use super::{AssetKind, Frequency, Month, RawDataset, RawKind, RawSeries, ReturnSeries};
use crate::error::{Error, Result};
use crate::market_models::EtfCosts;

/// Trading-day year fraction used for daily expense accrual.
pub const DAILY_DT: f64 = 1.0 / 252.0;

/// Real monthly return series of the four assets, month-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyReturns {
    pub index: ReturnSeries,
    pub tbill: ReturnSeries,
    pub letf: ReturnSeries,
    pub vetf: ReturnSeries,
}

/// `Π(1+r_i) - 1`.
pub fn compound(returns: &[f64]) -> f64 {
    returns.iter().fold(1.0, |g, r| g * (1.0 + r)) - 1.0
}

/// Builds daily LETF/VETF proxies from the index and T-bill returns,
/// compounds all four series within calendar months and deflates by CPI.
///
/// The LETF daily return `β·δS/S + (1-β)·δB/B - c_ℓ·δt` is floored at -1
/// before compounding.
pub fn build_proxy_returns(raw: &RawDataset, costs: &EtfCosts) -> Result<ProxyReturns> {
    costs.validate()?;
    for (name, s, kind) in [
        ("index", &raw.index, RawKind::DailyReturns),
        ("tbill", &raw.tbill, RawKind::DailyReturns),
        ("cpi", &raw.cpi, RawKind::MonthlyLevels),
    ] {
        if s.kind != kind {
            return Err(Error::Data(format!("{name} series has kind {:?}", s.kind)));
        }
        s.validate()?;
    }
    if raw.index.dates != raw.tbill.dates {
        let first_diff = raw
            .index
            .dates
            .iter()
            .zip(&raw.tbill.dates)
            .find(|(a, b)| a != b)
            .map(|(a, b)| format!("{a} vs {b}"))
            .unwrap_or_else(|| "series lengths differ".into());
        return Err(Error::Data(format!(
            "index and T-bill dates misaligned: {first_diff}"
        )));
    }
    if raw.index.is_empty() {
        return Err(Error::Data("empty daily series".into()));
    }

    let b = costs.beta;
    let dates = &raw.index.dates;
    let mut months: Vec<Month> = Vec::new();
    // per-month gross accumulators: index, tbill, letf, vetf
    let mut gross: Vec<[f64; 4]> = Vec::new();
    for (i, d) in dates.iter().enumerate() {
        let s = raw.index.values[i];
        let bill = raw.tbill.values[i];
        let letf = (b * s + (1.0 - b) * bill - costs.c_ell * DAILY_DT).max(-1.0);
        let vetf = s - costs.c_v * DAILY_DT;
        let m = Month::of(*d);
        if months.last() != Some(&m) {
            months.push(m);
            gross.push([1.0; 4]);
        }
        let g = gross.last_mut().expect("pushed above");
        g[0] *= 1.0 + s;
        g[1] *= 1.0 + bill;
        g[2] *= 1.0 + letf;
        g[3] *= 1.0 + vetf;
    }

    let nominal = |k: usize, asset| ReturnSeries {
        frequency: Frequency::Monthly,
        asset,
        periods: months.clone(),
        returns: gross.iter().map(|g| g[k] - 1.0).collect(),
    };
    Ok(ProxyReturns {
        index: inflation_adjust(&nominal(0, AssetKind::Index), &raw.cpi)?,
        tbill: inflation_adjust(&nominal(1, AssetKind::Tbill), &raw.cpi)?,
        letf: inflation_adjust(&nominal(2, AssetKind::Letf), &raw.cpi)?,
        vetf: inflation_adjust(&nominal(3, AssetKind::Vetf), &raw.cpi)?,
    })
}

fn monthly_inflation(series: &ReturnSeries, cpi: &RawSeries) -> Result<Vec<f64>> {
    if series.frequency != Frequency::Monthly {
        return Err(Error::Data("inflation adjustment works on monthly series".into()));
    }
    if cpi.kind != RawKind::MonthlyLevels {
        return Err(Error::Data("CPI must be a monthly level series".into()));
    }
    let levels: BTreeMap<Month, f64> = cpi
        .dates
        .iter()
        .map(|d| Month::of(*d))
        .zip(cpi.values.iter().copied())
        .collect();
    series
        .periods
        .iter()
        .map(|m| {
            let now = levels.get(m);
            let before = levels.get(&m.prev());
            match (before, now) {
                (Some(b), Some(n)) => Ok(n / b - 1.0),
                _ => Err(Error::Data(format!(
                    "CPI does not cover {m} (needs levels for {} and {m})",
                    m.prev()
                ))),
            }
        })
        .collect()
}

/// Real return `(1 + nominal)/(1 + π) - 1` with `π` the CPI change over the
/// month. Requires CPI levels for each period's month and the month before.
pub fn inflation_adjust(series: &ReturnSeries, cpi: &RawSeries) -> Result<ReturnSeries> {
    let infl = monthly_inflation(series, cpi)?;
    let returns = series
        .returns
        .iter()
        .zip(&infl)
        .map(|(r, pi)| (1.0 + r) / (1.0 + pi) - 1.0)
        .collect();
    Ok(ReturnSeries {
        returns,
        ..series.clone()
    })
}

/// Inverse of [`inflation_adjust`].
pub fn reinflate(series: &ReturnSeries, cpi: &RawSeries) -> Result<ReturnSeries> {
    let infl = monthly_inflation(series, cpi)?;
    let returns = series
        .returns
        .iter()
        .zip(&infl)
        .map(|(r, pi)| (1.0 + r) * (1.0 + pi) - 1.0)
        .collect();
    Ok(ReturnSeries {
        returns,
        ..series.clone()
    })
}
