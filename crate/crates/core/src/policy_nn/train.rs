//! Minibatch momentum SGD on the CD objective.

use crate::data_pipeline::ScenarioProvider;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::rng::{derive_seed, RngStream};

use super::objective::{cd_loss_and_grad, CdObjectiveConfig};
use super::PolicyNetwork;

const MINIBATCH_TAG: u64 = 0x6d69_6e69_6261_7463;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    /// Paths `0..n_training_paths` of the scenario source are used for
    /// gradient steps.
    pub n_training_paths: usize,
    /// Paths `n_training_paths..n_training_paths + n_validation_paths` are
    /// held out for model selection.
    pub n_validation_paths: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Step size multiplier reached at the last iteration; the decay is
    /// geometric in between.
    pub final_lr_factor: f64,
    pub momentum: f64,
    /// Gradients with a larger Euclidean norm are rescaled to this norm.
    pub clip_norm: Option<f64>,
    pub validate_every: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            n_training_paths: 500_000,
            n_validation_paths: 10_000,
            batch_size: 256,
            iterations: 20_000,
            learning_rate: 0.05,
            final_lr_factor: 0.05,
            momentum: 0.9,
            clip_norm: Some(10.0),
            validate_every: 500,
            seed: 2024,
            exec: Execution::Parallel,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("n_training_paths", self.n_training_paths),
            ("n_validation_paths", self.n_validation_paths),
            ("batch_size", self.batch_size),
            ("iterations", self.iterations),
            ("validate_every", self.validate_every),
        ];
        for (name, v) in pos {
            if v == 0 {
                return Err(Error::param(name, "must be positive"));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning_rate", "must be > 0"));
        }
        if !(self.final_lr_factor > 0.0 && self.final_lr_factor <= 1.0) {
            return Err(Error::param("final_lr_factor", "must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::param("momentum", "must lie in [0, 1)"));
        }
        if matches!(self.clip_norm, Some(c) if c.is_nan() || c <= 0.0) {
            return Err(Error::param("clip_norm", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub iteration: usize,
    pub batch_loss: f64,
    /// Present on validation iterations.
    pub validation_loss: Option<f64>,
    /// Running minimum of the validation loss.
    pub best_validation_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub history: Vec<LossRecord>,
    pub best_iteration: usize,
    pub best_validation_loss: f64,
}

impl TrainingReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iteration",
            "batch_loss",
            "validation_loss",
            "best_validation_loss",
        ])?;
        for r in &self.history {
            w.write_record([
                r.iteration.to_string(),
                r.batch_loss.to_string(),
                r.validation_loss.map(|v| v.to_string()).unwrap_or_default(),
                r.best_validation_loss.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Uniform sampling with replacement; a batch at least as large as the
/// training set uses every training path.
fn minibatch(cfg: &TrainingConfig, iteration: usize, out: &mut Vec<usize>) {
    if cfg.batch_size >= cfg.n_training_paths {
        if out.len() != cfg.n_training_paths {
            out.clear();
            out.extend(0..cfg.n_training_paths);
        }
        return;
    }
    let mut rng = RngStream::new(derive_seed(cfg.seed, MINIBATCH_TAG), iteration as u64);
    out.clear();
    out.extend((0..cfg.batch_size).map(|_| rng.below(cfg.n_training_paths)));
}

fn divergence(e: Error, iteration: usize) -> Error {
    match e {
        Error::NonFinite { .. } => Error::Diverged {
            iteration,
            loss: f64::NAN,
        },
        Error::InvalidArgument(m) if m.starts_with("non-finite") => Error::Diverged {
            iteration,
            loss: f64::NAN,
        },
        other => other,
    }
}

/// Trains `net` and returns the parameters with the lowest validation loss
/// together with the loss history. Identical inputs give identical output
/// regardless of thread count.
pub fn train(
    net: PolicyNetwork,
    scenarios: &dyn ScenarioProvider,
    cd: &CdObjectiveConfig,
    cfg: &TrainingConfig,
) -> Result<(PolicyNetwork, TrainingReport)> {
    cfg.validate()?;
    cd.validate()?;
    let needed = cfg.n_training_paths + cfg.n_validation_paths;
    if scenarios.n_paths() < needed {
        return Err(Error::InvalidArgument(format!(
            "training needs {needed} scenario paths, source has {}",
            scenarios.n_paths()
        )));
    }
    let validation: Vec<usize> = (cfg.n_training_paths..needed).collect();
    let validate = |n: &PolicyNetwork, it: usize| {
        cd_loss_and_grad(n, scenarios, &validation, cd, cfg.exec)
            .map(|r| r.0)
            .map_err(|e| divergence(e, it))
    };

    let mut net = net;
    let mut best = net.clone();
    let mut best_loss = validate(&net, 0)?;
    let mut best_iteration = 0;
    let mut velocity = vec![0.0; net.n_params()];
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let mut history = Vec::with_capacity(cfg.iterations);
    let decay = cfg
        .final_lr_factor
        .powf(1.0 / cfg.iterations.max(2).saturating_sub(1) as f64);
    let mut lr = cfg.learning_rate;

    for it in 0..cfg.iterations {
        minibatch(cfg, it, &mut batch);
        let (loss, mut grad) =
            cd_loss_and_grad(&net, scenarios, &batch, cd, cfg.exec).map_err(|e| divergence(e, it))?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { iteration: it, loss });
        }
        if let Some(c) = cfg.clip_norm {
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > c {
                let s = c / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
        }
        for ((p, v), g) in net.params_mut().iter_mut().zip(&mut velocity).zip(&grad) {
            *v = cfg.momentum * *v - lr * g;
            *p += *v;
        }
        lr *= decay;

        let last = it + 1 == cfg.iterations;
        let validation_loss = if (it + 1) % cfg.validate_every == 0 || last {
            let v = validate(&net, it)?;
            if !v.is_finite() {
                return Err(Error::Diverged {
                    iteration: it,
                    loss: v,
                });
            }
            if v < best_loss {
                best_loss = v;
                best = net.clone();
                best_iteration = it + 1;
            }
            Some(v)
        } else {
            None
        };
        history.push(LossRecord {
            iteration: it + 1,
            batch_loss: loss,
            validation_loss,
            best_validation_loss: best_loss,
        });
    }
    Ok((
        best,
        TrainingReport {
            history,
            best_iteration,
            best_validation_loss: best_loss,
        },
    ))
}
