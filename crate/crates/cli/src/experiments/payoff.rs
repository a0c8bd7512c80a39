//! Closed-form payoff diagrams.

use letf_core::market_models::ParametricModel;
use letf_core::payoff_analytics::{
    log_uniform_grid, payoff_curve, PayoffCurve, StaticPortfolioSpec, DEFAULT_GRID,
};

use super::parametric::VETF_ALPHA;
use super::Results;
use crate::config::Manifest;
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

/// Index returns `s` where `P^ℓ - P^v` changes sign, by linear
/// interpolation between grid points.
pub fn crossings(curve: &PayoffCurve) -> Vec<f64> {
    curve
        .points
        .windows(2)
        .filter_map(|w| {
            let (d0, d1) = (w[0].difference(), w[1].difference());
            if d0 == 0.0 {
                Some(w[0].s)
            } else if d0 * d1 < 0.0 {
                Some(w[0].s + (w[1].s - w[0].s) * d0 / (d0 - d1))
            } else {
                None
            }
        })
        .collect()
}

pub(crate) fn run(manifest: &Manifest, out: &mut OutputDir) -> CliResult<Results> {
    let m = manifest.market.as_ref().expect("resolved");
    let params = match m.model()? {
        ParametricModel::Gbm(p) => p,
        ParametricModel::Jump(_) => {
            return Err(CliError::Config(
                "payoff diagrams need a GBM market (omit the jump keys)".into(),
            ))
        }
    };
    let costs = m.costs()?;
    let horizon = 1.0;
    let (lo, hi, n) = DEFAULT_GRID;
    let grid = log_uniform_grid(lo, hi, n)?;
    let vetf = StaticPortfolioSpec::new(VETF_ALPHA, costs, horizon)?;
    let mut results = Results::default();
    for alpha in [0.30_f64, 0.45] {
        let label = format!("a{:03}", (alpha * 100.0).round() as i64);
        let letf = StaticPortfolioSpec::new(alpha, costs, horizon)?;
        let curve = payoff_curve(&letf, &vetf, &params, &grid)?;
        out.write(&format!("{label}.csv"), |b| curve.write_csv(b))?;
        for (i, s) in crossings(&curve).into_iter().enumerate() {
            results
                .diagnostics
                .push((format!("{label}_crossing{}", i + 1), s));
        }
        let worst = curve
            .points
            .iter()
            .min_by(|a, b| a.difference().total_cmp(&b.difference()))
            .expect("non-empty grid");
        results
            .diagnostics
            .push((format!("{label}_min_difference"), worst.difference()));
        results
            .diagnostics
            .push((format!("{label}_s_at_min_difference"), worst.s));
    }
    Ok(results)
}
