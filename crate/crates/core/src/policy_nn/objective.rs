//! Cumulative tracking difference objective and its adjoint gradient.
//!
//! For one path with interval gross returns `G^ℓ_n, G^v_n, G^B_n`:
//!
//! ```text
//! P^ℓ_{n+1} = P^ℓ_n [α_n G^ℓ_n + (1 - α_n) G^B_n],   α_n = net(t_n, P^ℓ_n, P^v_n)
//! L = Σ_n (P^ℓ_n - e^{δ t_n} P^v_n)²
//! ```
//!
//! The gradient runs the recursion backwards with the adjoint
//! `λ_n = ∂L/∂P^ℓ_n`, which picks up the direct term, the growth factor and
//! the dependence of `α_n` on `P^ℓ_n` through the network input.

use crate::data_pipeline::{interval_gross_returns, IntervalGross, JointReturn, ScenarioProvider};
use crate::error::{Error, Result};
use crate::mc_engine::{AllocationPolicy, RebalanceSchedule};
use crate::par::{compensated_sum, map_chunks, Execution};

use super::{ForwardCache, PolicyNetwork, WEALTH_FLOOR};

/// Which times enter the sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CdTerms {
    /// `n = 0..N-1`, the rebalancing times.
    #[default]
    RebalancingTimes,
    /// `n = 0..=N`, adding the terminal date.
    IncludeTerminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObjectiveForm {
    /// `(P^ℓ - e^{δt} P^v)²`
    #[default]
    Difference,
    /// `(P^ℓ / P^v - e^{δt})²`
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdObjectiveConfig {
    pub delta: f64,
    pub schedule: RebalanceSchedule,
    pub vetf_alpha: f64,
    pub form: ObjectiveForm,
    pub terms: CdTerms,
}

impl CdObjectiveConfig {
    pub fn new(delta: f64, schedule: RebalanceSchedule, vetf_alpha: f64) -> Self {
        Self {
            delta,
            schedule,
            vetf_alpha,
            form: ObjectiveForm::Difference,
            terms: CdTerms::RebalancingTimes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta.is_finite() {
            return Err(Error::param("delta", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.vetf_alpha) {
            return Err(Error::param("vetf_alpha", "must lie in [0, 1]"));
        }
        Ok(())
    }

    fn last_term(&self) -> usize {
        match self.terms {
            CdTerms::RebalancingTimes => self.schedule.n_steps() - 1,
            CdTerms::IncludeTerminal => self.schedule.n_steps(),
        }
    }

    /// Term value and its derivative in `P^ℓ`.
    #[inline]
    fn term(&self, n: usize, pl: f64, pv: f64) -> (f64, f64) {
        let target = (self.delta * self.schedule.time(n)).exp();
        match self.form {
            ObjectiveForm::Difference => {
                let d = pl - target * pv;
                (d * d, 2.0 * d)
            }
            ObjectiveForm::Ratio => {
                let d = pl / pv - target;
                (d * d, 2.0 * d / pv)
            }
        }
    }
}

/// Reusable buffers for one path.
#[derive(Debug, Default)]
pub struct PathWorkspace {
    rows: Vec<JointReturn>,
    gross: Vec<IntervalGross>,
    pl: Vec<f64>,
    pv: Vec<f64>,
    caches: Vec<ForwardCache>,
}

fn roll_forward(
    gross: &[IntervalGross],
    cfg: &CdObjectiveConfig,
    ws_pl: &mut Vec<f64>,
    ws_pv: &mut Vec<f64>,
    mut alloc: impl FnMut(usize, f64, f64) -> Result<f64>,
) -> Result<f64> {
    let n = cfg.schedule.n_steps();
    ws_pl.clear();
    ws_pv.clear();
    let (mut pl, mut pv) = (1.0, 1.0);
    for (step, g) in gross.iter().enumerate().take(n) {
        ws_pl.push(pl);
        ws_pv.push(pv);
        let a = alloc(step, pl, pv)?;
        pl *= a * g.letf + (1.0 - a) * g.bond;
        pv *= cfg.vetf_alpha * g.vetf + (1.0 - cfg.vetf_alpha) * g.bond;
    }
    ws_pl.push(pl);
    ws_pv.push(pv);
    let loss: f64 = (0..=cfg.last_term())
        .map(|k| cfg.term(k, ws_pl[k], ws_pv[k]).0)
        .sum();
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            path: usize::MAX,
            step: n,
        });
    }
    Ok(loss)
}

/// Loss of one path and, if `grad` is given, its parameter gradient added
/// into `grad`.
pub fn path_loss_and_grad(
    net: &PolicyNetwork,
    gross: &[IntervalGross],
    cfg: &CdObjectiveConfig,
    grad: Option<&mut [f64]>,
    ws: &mut PathWorkspace,
) -> Result<f64> {
    let n = cfg.schedule.n_steps();
    if gross.len() < n {
        return Err(Error::ScenarioTooShort {
            needed: n,
            available: gross.len(),
        });
    }
    ws.caches.resize_with(n, ForwardCache::default);
    let caches = &mut ws.caches;
    let loss = roll_forward(gross, cfg, &mut ws.pl, &mut ws.pv, |step, pl, pv| {
        let x = net.features(cfg.schedule.time(step), pl, pv)?;
        Ok(net.forward_cached(&x, &mut caches[step]))
    })?;
    let Some(grad) = grad else {
        return Ok(loss);
    };

    let last = cfg.last_term();
    let mut lambda = if last == n {
        cfg.term(n, ws.pl[n], ws.pv[n]).1
    } else {
        0.0
    };
    let inv_scale = 1.0 / net.norm().scale[1];
    for step in (0..n).rev() {
        let g = gross[step];
        let pl = ws.pl[step];
        let alpha = caches[step].output();
        // ∂P^ℓ_{n+1}/∂α_n = P^ℓ_n (G^ℓ - G^B)
        let d_alpha = lambda * pl * (g.letf - g.bond);
        let mut via_alpha = 0.0;
        if d_alpha != 0.0 {
            let dx = net.backward(&caches[step], d_alpha, grad);
            if pl > WEALTH_FLOOR {
                via_alpha = dx[1] * inv_scale / pl;
            }
        }
        let growth = alpha * g.letf + (1.0 - alpha) * g.bond;
        let direct = if step <= last {
            cfg.term(step, pl, ws.pv[step]).1
        } else {
            0.0
        };
        lambda = lambda * growth + via_alpha + direct;
    }
    Ok(loss)
}

const CHUNK: usize = 16;

fn check_provider(scenarios: &dyn ScenarioProvider, cfg: &CdObjectiveConfig) -> Result<()> {
    cfg.validate()?;
    if scenarios.n_paths() == 0 {
        return Err(Error::InvalidArgument("empty scenario set".into()));
    }
    Ok(())
}

fn load_path(
    scenarios: &dyn ScenarioProvider,
    path: usize,
    cfg: &CdObjectiveConfig,
    ws: &mut PathWorkspace,
) -> Result<()> {
    let dt = cfg.schedule.interval();
    let n = cfg.schedule.n_steps();
    interval_gross_returns(scenarios, path, dt, n, &mut ws.rows, &mut ws.gross)
}

fn tag_path(e: Error, path: usize) -> Error {
    match e {
        Error::NonFinite { step, .. } => Error::NonFinite { path, step },
        other => other,
    }
}

/// Mean loss and mean gradient over the listed paths. Work is split into
/// fixed chunks and reduced in order, so the result does not depend on the
/// thread count.
pub fn cd_loss_and_grad(
    net: &PolicyNetwork,
    scenarios: &dyn ScenarioProvider,
    paths: &[usize],
    cfg: &CdObjectiveConfig,
    exec: Execution,
) -> Result<(f64, Vec<f64>)> {
    check_provider(scenarios, cfg)?;
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no paths selected".into()));
    }
    let np = net.n_params();
    let chunks = map_chunks(
        exec,
        paths.len(),
        CHUNK,
        |start, end| -> Result<(f64, Vec<f64>)> {
            let mut ws = PathWorkspace::default();
            let mut grad = vec![0.0; np];
            let mut loss = 0.0;
            for &p in &paths[start..end] {
                load_path(scenarios, p, cfg, &mut ws)?;
                let gross = std::mem::take(&mut ws.gross);
                let l = path_loss_and_grad(net, &gross, cfg, Some(&mut grad), &mut ws)
                    .map_err(|e| tag_path(e, p));
                ws.gross = gross;
                loss += l?;
            }
            Ok((loss, grad))
        },
    );
    let mut total_loss = Vec::with_capacity(chunks.len());
    let mut total_grad = vec![0.0; np];
    for c in chunks {
        let (l, g) = c?;
        total_loss.push(l);
        for (t, v) in total_grad.iter_mut().zip(g) {
            *t += v;
        }
    }
    let inv = 1.0 / paths.len() as f64;
    for g in &mut total_grad {
        *g *= inv;
    }
    Ok((compensated_sum(total_loss) * inv, total_grad))
}

fn mean_loss(
    scenarios: &dyn ScenarioProvider,
    cfg: &CdObjectiveConfig,
    exec: Execution,
    path_loss: impl Fn(&[IntervalGross], &mut PathWorkspace) -> Result<f64> + Sync + Send,
) -> Result<f64> {
    check_provider(scenarios, cfg)?;
    let n = scenarios.n_paths();
    let chunks = map_chunks(exec, n, CHUNK * 4, |start, end| -> Result<f64> {
        let mut ws = PathWorkspace::default();
        let mut sum = 0.0;
        for p in start..end {
            load_path(scenarios, p, cfg, &mut ws)?;
            let gross = std::mem::take(&mut ws.gross);
            let l = path_loss(&gross, &mut ws).map_err(|e| tag_path(e, p));
            ws.gross = gross;
            sum += l?;
        }
        Ok(sum)
    });
    let sums = chunks.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(compensated_sum(sums) / n as f64)
}

/// Mean CD loss of the network over every path of `scenarios`.
pub fn cd_loss(
    net: &PolicyNetwork,
    scenarios: &dyn ScenarioProvider,
    cfg: &CdObjectiveConfig,
    exec: Execution,
) -> Result<f64> {
    mean_loss(scenarios, cfg, exec, |gross, ws| {
        path_loss_and_grad(net, gross, cfg, None, ws)
    })
}

/// Mean CD loss of an arbitrary allocation policy, e.g. a fixed weight.
pub fn cd_loss_with_policy(
    policy: &AllocationPolicy<'_>,
    scenarios: &dyn ScenarioProvider,
    cfg: &CdObjectiveConfig,
    exec: Execution,
) -> Result<f64> {
    policy.validate()?;
    mean_loss(scenarios, cfg, exec, |gross, ws| {
        let sched = cfg.schedule;
        roll_forward(gross, cfg, &mut ws.pl, &mut ws.pv, |step, pl, pv| {
            policy.allocation(sched.time(step), pl, pv)
        })
    })
}
