//! Paired LETF/VETF portfolio paths under discrete rebalancing.
//!
//! Both portfolios start at `W(0) = 1` and evolve by
//!
//! ```text
//! P^ℓ(t_{n+1}) = P^ℓ(t_n) [α^ℓ(t_n) G^ℓ_n + (1 - α^ℓ(t_n)) G^B_n]
//! P^v(t_{n+1}) = P^v(t_n) [α^v G^v_n + (1 - α^v) G^B_n]
//! ```
//!
//! where `G` are gross interval returns. The allocation is decided at `t_n`
//! and accrues over `[t_n, t_{n+1}]`. In parametric mode the LETF and VETF
//! returns of an interval come from one shared market draw.

use crate::data_pipeline::{interval_gross_returns, IntervalGross, ScenarioProvider};
use crate::error::{Error, Result};
use crate::market_models::{EtfCosts, IntervalDraw, ParametricModel};
use crate::par::{try_map_indices, Execution};
use crate::perf_stats::StatsSummary;
use crate::policy_nn::PolicyNetwork;
use crate::rng::RngStream;

/// Rebalancing times `t_n = n·dt`, `n = 0..N`, with `N·dt = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RebalanceSchedule {
    horizon: f64,
    interval: f64,
    n_steps: usize,
}

impl RebalanceSchedule {
    pub fn new(horizon: f64, interval: f64) -> Result<Self> {
        if !(interval > 0.0 && interval.is_finite()) {
            return Err(Error::param("interval", "must be > 0"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param("horizon", "must be > 0"));
        }
        let ratio = horizon / interval;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * n {
            return Err(Error::param(
                "interval",
                format!("horizon {horizon} is not a whole number of {interval}-year intervals"),
            ));
        }
        Ok(Self {
            horizon,
            interval,
            n_steps: n as usize,
        })
    }

    /// One interval spanning the whole horizon.
    pub fn single(horizon: f64) -> Result<Self> {
        Self::new(horizon, horizon)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.interval
    }

    /// `t_0..=t_N`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|n| self.time(n)).collect()
    }
}

/// Whether weights are restored at every `t_n` or only set at `t_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RebalanceMode {
    #[default]
    EveryInterval,
    /// Initial allocation followed by buy-and-hold.
    AllocateOnce,
}

/// LETF allocation rule.
#[derive(Debug, Clone, Copy)]
pub enum AllocationPolicy<'a> {
    FixedWeight(f64),
    Network(&'a PolicyNetwork),
}

impl AllocationPolicy<'_> {
    pub fn validate(&self) -> Result<()> {
        match self {
            AllocationPolicy::FixedWeight(a) if !(0.0..=1.0).contains(a) => {
                Err(Error::param("alpha", "fixed weight must lie in [0, 1]"))
            }
            _ => Ok(()),
        }
    }

    /// Allocation at time `t` given both portfolio values.
    #[inline]
    pub fn allocation(&self, t: f64, letf_value: f64, vetf_value: f64) -> Result<f64> {
        match self {
            AllocationPolicy::FixedWeight(a) => Ok(*a),
            AllocationPolicy::Network(net) => net.forward(t, letf_value, vetf_value),
        }
    }
}

/// Market randomness feeding the simulation.
#[derive(Clone, Copy)]
pub enum MarketSource<'a> {
    Parametric(ParametricModel),
    Scenarios(&'a dyn ScenarioProvider),
}

impl std::fmt::Debug for MarketSource<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MarketSource::Parametric(m) => f.debug_tuple("Parametric").field(m).finish(),
            MarketSource::Scenarios(s) => f
                .debug_struct("Scenarios")
                .field("n_paths", &s.n_paths())
                .field("n_periods", &s.n_periods())
                .finish(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Recording {
    #[default]
    Terminal,
    /// Keep values at every `t_n` and the allocations used.
    Full,
    /// Keep every `k`-th `t_n` plus the terminal date.
    Strided(usize),
}

impl Recording {
    fn stride(self) -> Option<usize> {
        match self {
            Recording::Terminal => None,
            Recording::Full => Some(1),
            Recording::Strided(k) => Some(k.max(1)),
        }
    }

    /// Step indices kept in a trajectory: values at these indices, and
    /// allocations at all but the terminal one.
    pub fn steps(self, schedule: &RebalanceSchedule) -> Vec<usize> {
        let Some(k) = self.stride() else {
            return Vec::new();
        };
        let n = schedule.n_steps();
        let mut v: Vec<usize> = (0..n).step_by(k).collect();
        v.push(n);
        v
    }

    /// Times matching [`Recording::steps`].
    pub fn times(self, schedule: &RebalanceSchedule) -> Vec<f64> {
        self.steps(schedule)
            .into_iter()
            .map(|n| schedule.time(n))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SimulationConfig<'a> {
    pub source: MarketSource<'a>,
    pub costs: EtfCosts,
    pub schedule: RebalanceSchedule,
    pub mode: RebalanceMode,
    pub letf_policy: AllocationPolicy<'a>,
    pub vetf_alpha: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub recording: Recording,
    pub exec: Execution,
}

/// Values at the recorded `t_n` (always including `t_N`) and allocations at
/// the recorded `t_n < t_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub letf: Vec<f64>,
    pub vetf: Vec<f64>,
    pub alloc: Vec<f64>,
}

impl Trajectory {
    pub fn ratios(&self) -> Vec<f64> {
        self.letf.iter().zip(&self.vetf).map(|(l, v)| l / v).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedPathResult {
    pub terminal_letf: f64,
    pub terminal_vetf: f64,
    pub trajectory: Option<Trajectory>,
}

impl PairedPathResult {
    /// `R_T = P^ℓ(T)/P^v(T)`.
    pub fn terminal_ratio(&self) -> f64 {
        self.terminal_letf / self.terminal_vetf
    }
}

pub fn terminal_ratios(results: &[PairedPathResult]) -> Vec<f64> {
    results.iter().map(PairedPathResult::terminal_ratio).collect()
}

fn validate(cfg: &SimulationConfig<'_>) -> Result<()> {
    if cfg.n_paths < 1 {
        return Err(Error::param("n_paths", "must be >= 1"));
    }
    if !(0.0..=1.0).contains(&cfg.vetf_alpha) {
        return Err(Error::param("vetf_alpha", "must lie in [0, 1]"));
    }
    cfg.costs.validate()?;
    cfg.letf_policy.validate()?;
    match cfg.source {
        MarketSource::Parametric(m) => m.validate(),
        MarketSource::Scenarios(s) => {
            if s.n_paths() < cfg.n_paths {
                return Err(Error::InvalidArgument(format!(
                    "requested {} paths but the scenario set has {}",
                    cfg.n_paths,
                    s.n_paths()
                )));
            }
            let per = cfg.schedule.interval() / s.period_years();
            let needed = (per.round() as usize) * cfg.schedule.n_steps();
            if s.n_periods() < needed {
                return Err(Error::ScenarioTooShort {
                    needed,
                    available: s.n_periods(),
                });
            }
            Ok(())
        }
    }
}

struct PathScratch {
    draw: IntervalDraw,
    rows: Vec<crate::data_pipeline::JointReturn>,
    intervals: Vec<IntervalGross>,
}

fn simulate_one(
    cfg: &SimulationConfig<'_>,
    path: usize,
    scratch: &mut PathScratch,
) -> Result<PairedPathResult> {
    let schedule = &cfg.schedule;
    let n = schedule.n_steps();
    let dt = schedule.interval();
    let stride = cfg.recording.stride();
    let mut traj = stride.map(|k| Trajectory {
        letf: Vec::with_capacity(n / k + 2),
        vetf: Vec::with_capacity(n / k + 2),
        alloc: Vec::with_capacity(n / k + 1),
    });

    let mut rng = match cfg.source {
        MarketSource::Parametric(_) => Some(RngStream::new(cfg.seed, path as u64)),
        MarketSource::Scenarios(s) => {
            interval_gross_returns(s, path, dt, n, &mut scratch.rows, &mut scratch.intervals)?;
            None
        }
    };

    // holdings in (risky, bond) for allocate-once; values otherwise
    let mut pl = 1.0_f64;
    let mut pv = 1.0_f64;
    let mut hold_l = [0.0_f64; 2];
    let mut hold_v = [0.0_f64; 2];

    for step in 0..n {
        let t = schedule.time(step);
        let gross = match (&cfg.source, rng.as_mut()) {
            (MarketSource::Parametric(model), Some(rng)) => {
                let r = model.sample_interval(&cfg.costs, dt, rng, &mut scratch.draw);
                IntervalGross {
                    letf: r.letf,
                    vetf: r.vetf,
                    bond: r.bond,
                }
            }
            _ => scratch.intervals[step],
        };

        let alpha = match cfg.mode {
            RebalanceMode::EveryInterval => {
                let a = cfg.letf_policy.allocation(t, pl, pv)?;
                let next_l = pl * (a * gross.letf + (1.0 - a) * gross.bond);
                let next_v = pv * (cfg.vetf_alpha * gross.vetf + (1.0 - cfg.vetf_alpha) * gross.bond);
                if let Some(tr) = traj.as_mut().filter(|_| step % stride.unwrap_or(1) == 0) {
                    tr.letf.push(pl);
                    tr.vetf.push(pv);
                    tr.alloc.push(a);
                }
                pl = next_l;
                pv = next_v;
                a
            }
            RebalanceMode::AllocateOnce => {
                if step == 0 {
                    let a = cfg.letf_policy.allocation(t, pl, pv)?;
                    hold_l = [a * pl, (1.0 - a) * pl];
                    hold_v = [cfg.vetf_alpha * pv, (1.0 - cfg.vetf_alpha) * pv];
                }
                let a = if pl > 0.0 { hold_l[0] / pl } else { 0.0 };
                if let Some(tr) = traj.as_mut().filter(|_| step % stride.unwrap_or(1) == 0) {
                    tr.letf.push(pl);
                    tr.vetf.push(pv);
                    tr.alloc.push(a);
                }
                hold_l[0] *= gross.letf;
                hold_l[1] *= gross.bond;
                hold_v[0] *= gross.vetf;
                hold_v[1] *= gross.bond;
                pl = hold_l[0] + hold_l[1];
                pv = hold_v[0] + hold_v[1];
                a
            }
        };
        if !pl.is_finite() || !pv.is_finite() || !alpha.is_finite() {
            return Err(Error::NonFinite { path, step });
        }
        if pv <= 0.0 {
            return Err(Error::NonFinite { path, step });
        }
    }
    if let Some(tr) = traj.as_mut() {
        tr.letf.push(pl);
        tr.vetf.push(pv);
    }
    Ok(PairedPathResult {
        terminal_letf: pl,
        terminal_vetf: pv,
        trajectory: traj,
    })
}

/// Simulates `cfg.n_paths` paired paths. Path `p` draws from RNG stream
/// `(seed, p)` or reads scenario path `p`, so results are independent of
/// the execution mode.
pub fn simulate_paired_paths(cfg: &SimulationConfig<'_>) -> Result<Vec<PairedPathResult>> {
    validate(cfg)?;
    try_map_indices(cfg.exec, cfg.n_paths, |p| {
        let mut scratch = PathScratch {
            draw: IntervalDraw::default(),
            rows: Vec::new(),
            intervals: Vec::new(),
        };
        simulate_one(cfg, p, &mut scratch)
    })
}

/// One `(α^ℓ, schedule)` cell of a fixed-weight table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableCell {
    pub label: String,
    pub letf_alpha: f64,
    pub schedule: RebalanceSchedule,
    pub mode: RebalanceMode,
}

#[derive(Debug, Clone)]
pub struct TableConfig {
    pub model: ParametricModel,
    pub costs: EtfCosts,
    pub vetf_alpha: f64,
    pub cells: Vec<TableCell>,
    pub n_paths: usize,
    pub seed: u64,
    pub exec: Execution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub summary: StatsSummary,
    pub ratios: Vec<f64>,
}

/// Runs every cell with the same seed (common random numbers across cells)
/// and summarises the terminal ratios.
pub fn run_table_experiment(cfg: &TableConfig) -> Result<Vec<TableRow>> {
    cfg.cells
        .iter()
        .map(|cell| {
            let sim = SimulationConfig {
                source: MarketSource::Parametric(cfg.model),
                costs: cfg.costs,
                schedule: cell.schedule,
                mode: cell.mode,
                letf_policy: AllocationPolicy::FixedWeight(cell.letf_alpha),
                vetf_alpha: cfg.vetf_alpha,
                n_paths: cfg.n_paths,
                seed: cfg.seed,
                recording: Recording::Terminal,
                exec: cfg.exec,
            };
            let ratios = terminal_ratios(&simulate_paired_paths(&sim)?);
            Ok(TableRow {
                label: cell.label.clone(),
                summary: StatsSummary::from_samples(&ratios)?,
                ratios,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_pipeline::{JointReturn, ScenarioSet};
    use crate::market_models::GbmModelParams;
    use approx::assert_relative_eq;

    fn base<'a>(source: MarketSource<'a>, schedule: RebalanceSchedule) -> SimulationConfig<'a> {
        SimulationConfig {
            source,
            costs: EtfCosts::sso_2x(),
            schedule,
            mode: RebalanceMode::EveryInterval,
            letf_policy: AllocationPolicy::FixedWeight(0.45),
            vetf_alpha: 0.6,
            n_paths: 200,
            seed: 17,
            recording: Recording::Terminal,
            exec: Execution::Parallel,
        }
    }

    #[test]
    fn schedule_validation() {
        let s = RebalanceSchedule::new(10.0, 0.25).unwrap();
        assert_eq!(s.n_steps(), 40);
        assert_eq!(s.times().len(), 41);
        assert_eq!(RebalanceSchedule::new(10.0, 1.0 / 12.0).unwrap().n_steps(), 120);
        assert!(RebalanceSchedule::new(1.0, 0.3).is_err());
        assert!(RebalanceSchedule::new(1.0, 0.0).is_err());
        assert!(RebalanceSchedule::new(0.5, 1.0).is_err());
    }

    #[test]
    fn all_bond_ratio_is_one() {
        let mut cfg = base(
            MarketSource::Parametric(GbmModelParams::crsp_real().into()),
            RebalanceSchedule::new(10.0, 1.0).unwrap(),
        );
        cfg.letf_policy = AllocationPolicy::FixedWeight(0.0);
        cfg.vetf_alpha = 0.0;
        let r = terminal_ratios(&simulate_paired_paths(&cfg).unwrap());
        assert!(r.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn execution_modes_agree() {
        let mut cfg = base(
            MarketSource::Parametric(crate::market_models::JumpModelParams::crsp_real().into()),
            RebalanceSchedule::new(10.0, 0.25).unwrap(),
        );
        cfg.recording = Recording::Full;
        let a = simulate_paired_paths(&cfg).unwrap();
        cfg.exec = Execution::Sequential;
        let b = simulate_paired_paths(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn strided_recording_subsamples_full() {
        let mut cfg = base(
            MarketSource::Parametric(GbmModelParams::crsp_real().into()),
            RebalanceSchedule::new(10.0, 1.0 / 12.0).unwrap(),
        );
        cfg.n_paths = 5;
        cfg.recording = Recording::Full;
        let full = simulate_paired_paths(&cfg).unwrap();
        cfg.recording = Recording::Strided(12);
        let strided = simulate_paired_paths(&cfg).unwrap();
        let steps = cfg.recording.steps(&cfg.schedule);
        assert_eq!(steps.len(), 11);
        assert_eq!(cfg.recording.times(&cfg.schedule)[10], 10.0);
        for (f, s) in full.iter().zip(&strided) {
            let (f, s) = (f.trajectory.as_ref().unwrap(), s.trajectory.as_ref().unwrap());
            assert_eq!(s.letf.len(), 11);
            assert_eq!(s.alloc.len(), 10);
            for (i, &n) in steps.iter().enumerate() {
                assert_eq!(s.letf[i], f.letf[n]);
                assert_eq!(s.vetf[i], f.vetf[n]);
            }
        }
    }

    #[test]
    fn scenario_mode_hand_arithmetic() {
        let rows = vec![
            JointReturn {
                letf: 0.10,
                vetf: 0.05,
                tbill: 0.01,
            },
            JointReturn {
                letf: -0.20,
                vetf: -0.10,
                tbill: 0.01,
            },
        ];
        let set = ScenarioSet::from_paths(vec![rows], 0.25).unwrap();
        let mut cfg = base(
            MarketSource::Scenarios(&set),
            RebalanceSchedule::new(0.5, 0.25).unwrap(),
        );
        cfg.n_paths = 1;
        cfg.letf_policy = AllocationPolicy::FixedWeight(0.4);
        cfg.recording = Recording::Full;
        let out = &simulate_paired_paths(&cfg).unwrap()[0];
        let pl = (0.4 * 1.10 + 0.6 * 1.01) * (0.4 * 0.80 + 0.6 * 1.01);
        let pv = (0.6 * 1.05 + 0.4 * 1.01) * (0.6 * 0.90 + 0.4 * 1.01);
        assert_relative_eq!(out.terminal_letf, pl, max_relative = 1e-15);
        assert_relative_eq!(out.terminal_vetf, pv, max_relative = 1e-15);
        let tr = out.trajectory.as_ref().unwrap();
        assert_eq!(tr.letf.len(), 3);
        assert_eq!(tr.alloc, vec![0.4, 0.4]);
    }

    #[test]
    fn scenario_mode_errors() {
        let rows = vec![
            JointReturn {
                letf: 0.1,
                vetf: 0.05,
                tbill: 0.0
            };
            3
        ];
        let set = ScenarioSet::from_paths(vec![rows.clone()], 1.0 / 12.0).unwrap();
        let cfg = base(
            MarketSource::Scenarios(&set),
            RebalanceSchedule::new(1.0, 0.25).unwrap(),
        );
        assert!(matches!(
            simulate_paired_paths(&cfg),
            Err(Error::InvalidArgument(_))
        ));
        let mut one = cfg.clone();
        one.n_paths = 1;
        assert!(matches!(
            simulate_paired_paths(&one),
            Err(Error::ScenarioTooShort {
                needed: 12,
                available: 3
            })
        ));
        let mut bad = rows;
        bad[1].letf = f64::NAN;
        let set = ScenarioSet::from_paths(vec![bad], 1.0 / 12.0).unwrap();
        let mut cfg = base(
            MarketSource::Scenarios(&set),
            RebalanceSchedule::new(0.25, 1.0 / 12.0).unwrap(),
        );
        cfg.n_paths = 1;
        assert!(matches!(
            simulate_paired_paths(&cfg),
            Err(Error::NonFinite { path: 0, step: 1 })
        ));
    }

    #[test]
    fn allocate_once_holds() {
        let rows = vec![
            JointReturn {
                letf: 0.10,
                vetf: 0.05,
                tbill: 0.0,
            },
            JointReturn {
                letf: 0.10,
                vetf: 0.05,
                tbill: 0.0,
            },
        ];
        let set = ScenarioSet::from_paths(vec![rows], 0.5).unwrap();
        let mut cfg = base(
            MarketSource::Scenarios(&set),
            RebalanceSchedule::new(1.0, 0.5).unwrap(),
        );
        cfg.n_paths = 1;
        cfg.mode = RebalanceMode::AllocateOnce;
        cfg.letf_policy = AllocationPolicy::FixedWeight(0.5);
        let out = &simulate_paired_paths(&cfg).unwrap()[0];
        assert_relative_eq!(out.terminal_letf, 0.5 * 1.21 + 0.5, max_relative = 1e-15);
        assert_relative_eq!(out.terminal_vetf, 0.6 * 1.1025 + 0.4, max_relative = 1e-15);
    }

    #[test]
    fn wipeout_is_absorbing() {
        let rows = vec![
            JointReturn {
                letf: -1.0,
                vetf: -0.5,
                tbill: 0.0,
            },
            JointReturn {
                letf: 0.5,
                vetf: 0.2,
                tbill: 0.01,
            },
        ];
        let set = ScenarioSet::from_paths(vec![rows], 0.25).unwrap();
        let mut cfg = base(
            MarketSource::Scenarios(&set),
            RebalanceSchedule::new(0.5, 0.25).unwrap(),
        );
        cfg.n_paths = 1;
        cfg.letf_policy = AllocationPolicy::FixedWeight(1.0);
        let out = &simulate_paired_paths(&cfg).unwrap()[0];
        assert_eq!(out.terminal_letf, 0.0);
        assert!(out.terminal_vetf > 0.0);
    }

    #[test]
    fn degenerate_table() {
        let cfg = TableConfig {
            model: GbmModelParams::crsp_real().into(),
            costs: EtfCosts::sso_2x(),
            vetf_alpha: 0.6,
            cells: vec![TableCell {
                label: "one".into(),
                letf_alpha: 0.3,
                schedule: RebalanceSchedule::single(1.0).unwrap(),
                mode: RebalanceMode::AllocateOnce,
            }],
            n_paths: 1,
            seed: 3,
            exec: Execution::Sequential,
        };
        let rows = run_table_experiment(&cfg).unwrap();
        assert_eq!(rows[0].summary.mean, rows[0].ratios[0]);
        assert_eq!(rows[0].summary.median, rows[0].ratios[0]);
    }
}
