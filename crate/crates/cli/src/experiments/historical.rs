//! Single historical 10-year paths with trained or fixed strategies.

use std::path::PathBuf;

use letf_core::data_pipeline::{JointSeries, Month};
use letf_core::market_models::EtfCosts;
use letf_core::mc_engine::{
    simulate_paired_paths, AllocationPolicy, MarketSource, RebalanceMode, RebalanceSchedule, Recording,
    SimulationConfig,
};
use letf_core::par::Execution;
use letf_core::payoff_analytics::format_f64;
use letf_core::policy_nn::PolicyNetwork;

use super::data::{data_costs, load_joint_series};
use super::parametric::VETF_ALPHA;
use super::Results;
use crate::config::{delta_label, ExperimentId, Manifest};
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

pub const INITIAL_WEALTH: f64 = 100.0;

pub struct HistoricalStrategy<'a> {
    pub name: String,
    pub policy: AllocationPolicy<'a>,
}

/// Wealth of the VETF benchmark and each LETF strategy at every quarterly
/// rebalancing date of the window.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalPath {
    pub start: Month,
    pub end: Month,
    pub times: Vec<f64>,
    /// `("vetf", ..)` first, then one entry per strategy.
    pub wealth: Vec<(String, Vec<f64>)>,
}

impl HistoricalPath {
    pub fn terminal(&self, name: &str) -> Option<f64> {
        self.wealth
            .iter()
            .find(|(n, _)| n == name)
            .and_then(|(_, w)| w.last().copied())
    }
}

/// Invests [`INITIAL_WEALTH`] at the start of `start` for `schedule.horizon()`
/// years of the joint series.
pub fn run_historical(
    joint: &JointSeries,
    start: Month,
    schedule: RebalanceSchedule,
    strategies: &[HistoricalStrategy<'_>],
    costs: EtfCosts,
    vetf_alpha: f64,
) -> CliResult<HistoricalPath> {
    let months = (schedule.horizon() * 12.0).round() as usize;
    let window = joint.window(start, months)?;
    let mut end = start;
    for _ in 1..months {
        end = end.next();
    }
    let mut wealth = Vec::with_capacity(strategies.len() + 1);
    for (k, s) in strategies.iter().enumerate() {
        let res = simulate_paired_paths(&SimulationConfig {
            source: MarketSource::Scenarios(&window),
            costs,
            schedule,
            mode: RebalanceMode::EveryInterval,
            letf_policy: s.policy,
            vetf_alpha,
            n_paths: 1,
            seed: 0,
            recording: Recording::Full,
            exec: Execution::Sequential,
        })?;
        let tr = res[0].trajectory.as_ref().expect("recorded");
        if k == 0 {
            wealth.push((
                "vetf".to_string(),
                tr.vetf.iter().map(|v| v * INITIAL_WEALTH).collect(),
            ));
        }
        wealth.push((
            s.name.clone(),
            tr.letf.iter().map(|v| v * INITIAL_WEALTH).collect(),
        ));
    }
    if strategies.is_empty() {
        return Err(CliError::Usage("no strategies given".into()));
    }
    Ok(HistoricalPath {
        start,
        end,
        times: schedule.times(),
        wealth,
    })
}

fn policy_path(manifest: &Manifest, out: &OutputDir, label: &str) -> PathBuf {
    let dir = manifest
        .historical
        .as_ref()
        .and_then(|h| h.policy_dir.clone())
        .unwrap_or_else(|| out.root().to_path_buf());
    dir.join(format!("{}_{label}_policy.bin", ExperimentId::Table5))
}

pub(crate) fn run(manifest: &Manifest, out: &mut OutputDir) -> CliResult<Results> {
    let data = manifest.data.as_ref().expect("resolved");
    let spec = manifest.training.as_ref().expect("resolved");
    let hist = manifest.historical.as_ref().expect("resolved");
    let joint = load_joint_series(data)?;

    let mut nets = Vec::new();
    for &delta in &spec.deltas {
        let label = delta_label(delta);
        let path = policy_path(manifest, out, &label);
        if !path.exists() {
            return Err(CliError::Config(format!(
                "policy file {} not found; run table5 first or set historical.policy_dir",
                path.display()
            )));
        }
        nets.push((label, PolicyNetwork::load(&path)?));
    }
    let strategies: Vec<HistoricalStrategy<'_>> = nets
        .iter()
        .map(|(label, net)| HistoricalStrategy {
            name: label.clone(),
            policy: AllocationPolicy::Network(net),
        })
        .collect();
    let schedule = RebalanceSchedule::new(10.0, 0.25)?;

    let mut windows = Vec::new();
    for s in &hist.starts {
        let start = Month::parse(s).map_err(|e| CliError::Config(e.to_string()))?;
        let path = run_historical(&joint, start, schedule, &strategies, data_costs(), VETF_ALPHA)?;
        out.write(&format!("{start}.csv"), |b| {
            let mut w = csv::Writer::from_writer(b);
            let mut header = vec!["t".to_string()];
            header.extend(path.wealth.iter().map(|(n, _)| n.clone()));
            w.write_record(&header)?;
            for (i, t) in path.times.iter().enumerate() {
                let mut rec = vec![format_f64(*t)];
                rec.extend(path.wealth.iter().map(|(_, v)| format_f64(v[i])));
                w.write_record(&rec)?;
            }
            w.flush()?;
            Ok(())
        })?;
        windows.push(path);
    }

    out.write("terminal_wealth.csv", |b| {
        let mut w = csv::Writer::from_writer(b);
        let mut header = vec!["start".to_string(), "end".to_string()];
        if let Some(first) = windows.first() {
            header.extend(first.wealth.iter().map(|(n, _)| n.clone()));
        }
        w.write_record(&header)?;
        for p in &windows {
            let mut rec = vec![p.start.to_string(), p.end.to_string()];
            rec.extend(
                p.wealth
                    .iter()
                    .map(|(_, v)| format_f64(*v.last().expect("non-empty"))),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    })?;

    let mut results = Results::default();
    for p in &windows {
        for (name, v) in &p.wealth {
            results.diagnostics.push((
                format!("{}_{name}_terminal", p.start),
                *v.last().expect("non-empty"),
            ));
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use letf_core::data_pipeline::JointReturn;

    fn series(rows: Vec<JointReturn>) -> JointSeries {
        let months = std::iter::successors(Some(Month::new(1999, 10).unwrap()), |m| Some(m.next()))
            .take(rows.len())
            .collect();
        JointSeries::new(months, rows).unwrap()
    }

    #[test]
    fn all_bond_strategy_compounds_tbill() {
        let rows: Vec<JointReturn> = (0..150)
            .map(|i| JointReturn {
                letf: 0.03 * ((i % 7) as f64 - 3.0),
                vetf: 0.01 * ((i % 5) as f64 - 2.0),
                tbill: 0.001 + 0.0001 * (i % 3) as f64,
            })
            .collect();
        let joint = series(rows.clone());
        let start = Month::new(2000, 1).unwrap();
        let strat = [HistoricalStrategy {
            name: "bond".into(),
            policy: AllocationPolicy::FixedWeight(0.0),
        }];
        let sched = RebalanceSchedule::new(10.0, 0.25).unwrap();
        let p = run_historical(&joint, start, sched, &strat, EtfCosts::sso_2x(), 0.6).unwrap();
        let want: f64 = 100.0 * rows[3..123].iter().map(|r| 1.0 + r.tbill).product::<f64>();
        assert!((p.terminal("bond").unwrap() - want).abs() < 1e-10 * want);
        assert_eq!(p.end.to_string(), "2009-12");
        assert_eq!(p.times.len(), 41);
        let late = Month::new(2008, 1).unwrap();
        assert!(run_historical(&joint, late, sched, &strat, EtfCosts::sso_2x(), 0.6).is_err());
    }

    #[test]
    fn one_quarter_hand_arithmetic() {
        let rows = vec![
            JointReturn {
                letf: 0.10,
                vetf: 0.05,
                tbill: 0.01,
            },
            JointReturn {
                letf: -0.04,
                vetf: -0.02,
                tbill: 0.01,
            },
            JointReturn {
                letf: 0.02,
                vetf: 0.01,
                tbill: 0.0,
            },
        ];
        let joint = series(rows);
        let strat = [HistoricalStrategy {
            name: "a40".into(),
            policy: AllocationPolicy::FixedWeight(0.4),
        }];
        let sched = RebalanceSchedule::new(0.25, 0.25).unwrap();
        let p = run_historical(
            &joint,
            Month::new(1999, 10).unwrap(),
            sched,
            &strat,
            EtfCosts::sso_2x(),
            0.6,
        )
        .unwrap();
        let gl = 1.10 * 0.96 * 1.02;
        let gv = 1.05 * 0.98 * 1.01;
        let gb = 1.01 * 1.01;
        assert!((p.terminal("a40").unwrap() - 100.0 * (0.4 * gl + 0.6 * gb)).abs() < 1e-12);
        assert!((p.terminal("vetf").unwrap() - 100.0 * (0.6 * gv + 0.4 * gb)).abs() < 1e-12);
    }
}
