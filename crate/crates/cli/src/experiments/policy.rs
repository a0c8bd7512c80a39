//! Training and evaluating the CD(δ) neural allocation policies.

use letf_core::data_pipeline::{BootstrapConfig, BootstrapScenarios, JointReturn, ScenarioProvider};
use letf_core::mc_engine::{
    simulate_paired_paths, terminal_ratios, AllocationPolicy, MarketSource, PairedPathResult, RebalanceMode,
    RebalanceSchedule, Recording, SimulationConfig,
};
use letf_core::par::Execution;
use letf_core::perf_stats::{
    empirical_cdf, percentile, percentile_bands, spearman, StatsSummary, DEFAULT_BAND_QUANTILES,
};
use letf_core::policy_nn::{
    cd_loss, cd_loss_with_policy, export_policy_heatmap, train, CdObjectiveConfig, FeatureNorm,
    ObjectiveForm, PolicyNetwork, TrainingConfig,
};
use letf_core::rng::derive_seed;

use super::data::{data_costs, load_joint_series};
use super::parametric::{HORIZON_LONG, VETF_ALPHA};
use super::{cdf_grid, Results};
use crate::config::{delta_label, Manifest, TrainingSpec};
use crate::error::CliResult;
use crate::output::OutputDir;

const TRAIN_TAG: u64 = 0x0074_7261_696e;
const TEST_TAG: u64 = 0x7465_7374;
const INIT_TAG: u64 = 0x696e_6974;
const BATCH_TAG: u64 = 0x0062_6174_6368;
const PATH_MONTHS: usize = 120;

/// The first `n` paths of another provider.
struct Prefix<'a> {
    inner: &'a dyn ScenarioProvider,
    n: usize,
}

impl ScenarioProvider for Prefix<'_> {
    fn n_paths(&self) -> usize {
        self.n
    }
    fn n_periods(&self) -> usize {
        self.inner.n_periods()
    }
    fn period_years(&self) -> f64 {
        self.inner.period_years()
    }
    fn fill_path(&self, path: usize, out: &mut Vec<JointReturn>) {
        self.inner.fill_path(path, out)
    }
}

pub fn quarterly_schedule() -> RebalanceSchedule {
    RebalanceSchedule::new(HORIZON_LONG, 0.25).expect("valid schedule")
}

pub fn cd_config(delta: f64, spec: &TrainingSpec) -> CdObjectiveConfig {
    let mut cd = CdObjectiveConfig::new(delta, quarterly_schedule(), VETF_ALPHA);
    if spec.ratio_form {
        cd.form = ObjectiveForm::Ratio;
    }
    cd
}

fn block_label(b: f64) -> String {
    if b.fract() == 0.0 {
        format!("b{}", b as i64)
    } else {
        format!("b{b}").replace('.', "p")
    }
}

fn simulate(
    scenarios: &dyn ScenarioProvider,
    net: &PolicyNetwork,
    n_paths: usize,
    recording: Recording,
) -> CliResult<Vec<PairedPathResult>> {
    Ok(simulate_paired_paths(&SimulationConfig {
        source: MarketSource::Scenarios(scenarios),
        costs: data_costs(),
        schedule: quarterly_schedule(),
        mode: RebalanceMode::EveryInterval,
        letf_policy: AllocationPolicy::Network(net),
        vetf_alpha: VETF_ALPHA,
        n_paths,
        seed: 0,
        recording,
        exec: Execution::Parallel,
    })?)
}

pub(crate) fn run(manifest: &Manifest, out: &mut OutputDir) -> CliResult<Results> {
    let data = manifest.data.as_ref().expect("resolved");
    let spec = manifest.training.as_ref().expect("resolved");
    let joint = load_joint_series(data)?;
    let train_set = BootstrapScenarios::new(
        &joint,
        BootstrapConfig {
            expected_block: data.expected_block,
            n_paths: manifest.paths + spec.validation_paths,
            path_len: PATH_MONTHS,
            seed: derive_seed(manifest.seed, TRAIN_TAG),
        },
    )?;
    let training_paths = Prefix {
        inner: &train_set,
        n: manifest.paths,
    };
    let mut blocks = vec![data.expected_block];
    for &b in &data.sensitivity_blocks {
        if !blocks.contains(&b) {
            blocks.push(b);
        }
    }
    let test_sets = blocks
        .iter()
        .map(|&b| {
            BootstrapScenarios::new(
                &joint,
                BootstrapConfig {
                    expected_block: b,
                    n_paths: spec.test_paths,
                    path_len: PATH_MONTHS,
                    seed: derive_seed(manifest.seed, TEST_TAG),
                },
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let schedule = quarterly_schedule();
    let times = schedule.times();
    let grid = cdf_grid();
    let mut results = Results::default();
    for (i, &delta) in spec.deltas.iter().enumerate() {
        let label = delta_label(delta);
        let cd = cd_config(delta, spec);
        let net = PolicyNetwork::new(
            &spec.hidden,
            HORIZON_LONG,
            FeatureNorm::default(),
            spec.init_alpha,
            derive_seed(manifest.seed, INIT_TAG + i as u64),
        )?;
        let tc = TrainingConfig {
            n_training_paths: manifest.paths,
            n_validation_paths: spec.validation_paths,
            batch_size: spec.batch_size,
            iterations: spec.iterations,
            learning_rate: spec.learning_rate,
            final_lr_factor: spec.final_lr_factor,
            momentum: spec.momentum,
            clip_norm: Some(spec.clip_norm),
            validate_every: spec.validate_every,
            seed: derive_seed(manifest.seed, BATCH_TAG + i as u64),
            exec: Execution::Parallel,
        };
        let (net, report) = train(net, &train_set, &cd, &tc)?;
        out.write(&format!("{label}_policy.bin"), |b| net.write_to(b))?;
        out.write(&format!("{label}_loss.csv"), |b| report.write_csv(b))?;

        // objective against the best fixed weight on the training paths
        let trained_loss = cd_loss(&net, &training_paths, &cd, Execution::Parallel)?;
        let mut best_fixed = (f64::INFINITY, 0.0);
        for k in 0..=20 {
            let a = k as f64 * 0.05;
            let l = cd_loss_with_policy(
                &AllocationPolicy::FixedWeight(a),
                &training_paths,
                &cd,
                Execution::Parallel,
            )?;
            if l < best_fixed.0 {
                best_fixed = (l, a);
            }
        }
        let d = &mut results.diagnostics;
        d.push((format!("{label}_trained_loss"), trained_loss));
        d.push((format!("{label}_best_fixed_loss"), best_fixed.0));
        d.push((format!("{label}_best_fixed_alpha"), best_fixed.1));
        d.push((format!("{label}_best_iteration"), report.best_iteration as f64));
        d.push((
            format!("{label}_best_validation_loss"),
            report.best_validation_loss,
        ));

        let n_in = spec.test_paths.min(manifest.paths);
        let in_sample = terminal_ratios(&simulate(&train_set, &net, n_in, Recording::Terminal)?);
        let cell = format!("{label}_in_sample");
        out.write(&format!("{cell}.csv"), |b| {
            empirical_cdf(&in_sample)?.write_csv(&grid, b)
        })?;
        results
            .summary
            .push((cell, StatsSummary::from_samples(&in_sample)?));

        for (k, (test, &block)) in test_sets.iter().zip(&blocks).enumerate() {
            let base = k == 0;
            let recording = if base {
                Recording::Full
            } else {
                Recording::Terminal
            };
            let paths = simulate(test, &net, spec.test_paths, recording)?;
            let ratios = terminal_ratios(&paths);
            let cell = if base {
                format!("{label}_out_of_sample")
            } else {
                format!("{label}_out_of_sample_{}", block_label(block))
            };
            out.write(&format!("{cell}.csv"), |b| {
                empirical_cdf(&ratios)?.write_csv(&grid, b)
            })?;
            results.summary.push((cell, StatsSummary::from_samples(&ratios)?));
            if base {
                diagnose(&label, &net, &paths, &times, out, &mut results)?;
            }
        }
    }
    Ok(results)
}

/// Allocation and ratio bands, the heatmap and the contrarian statistic on
/// the held-out paths.
fn diagnose(
    label: &str,
    net: &PolicyNetwork,
    paths: &[PairedPathResult],
    times: &[f64],
    out: &mut OutputDir,
    results: &mut Results,
) -> CliResult<()> {
    let n_steps = times.len() - 1;
    let traj: Vec<_> = paths
        .iter()
        .map(|p| p.trajectory.as_ref().expect("recorded"))
        .collect();
    let allocs: Vec<Vec<f64>> = traj.iter().map(|t| t.alloc.clone()).collect();
    let ratios: Vec<Vec<f64>> = traj.iter().map(|t| t.ratios()).collect();
    let alloc_bands = percentile_bands(&allocs, &DEFAULT_BAND_QUANTILES, &times[..n_steps])?;
    out.write(&format!("{label}_alloc_bands.csv"), |b| alloc_bands.write_csv(b))?;
    let ratio_bands = percentile_bands(&ratios, &DEFAULT_BAND_QUANTILES, times)?;
    out.write(&format!("{label}_ratio_bands.csv"), |b| ratio_bands.write_csv(b))?;

    // VETF wealth does not depend on the policy; pin it at its median
    let pinned = (0..n_steps)
        .map(|n| percentile(&traj.iter().map(|t| t.vetf[n]).collect::<Vec<_>>(), 0.5))
        .collect::<Result<Vec<_>, _>>()?;
    let diffs: Vec<f64> = (0..=40).map(|k| -1.0 + 0.05 * k as f64).collect();
    let heatmap = export_policy_heatmap(net, &times[..n_steps], &diffs, &pinned)?;
    out.write(&format!("{label}_heatmap.csv"), |b| heatmap.write_csv(b))?;

    let (mut a, mut d) = (Vec::new(), Vec::new());
    for t in &traj {
        for n in 1..n_steps {
            a.push(t.alloc[n]);
            d.push(t.letf[n] - t.vetf[n]);
        }
    }
    let rho = spearman(&a, &d)?;
    let median_idx = DEFAULT_BAND_QUANTILES
        .iter()
        .position(|&q| q == 0.5)
        .expect("median band");
    let medians: Vec<f64> = alloc_bands.values.iter().map(|row| row[median_idx]).collect();
    let diag = &mut results.diagnostics;
    diag.push((format!("{label}_spearman_alloc_vs_difference"), rho));
    diag.push((
        format!("{label}_median_alloc_min"),
        medians.iter().copied().fold(f64::INFINITY, f64::min),
    ));
    diag.push((
        format!("{label}_median_alloc_max"),
        medians.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ));
    Ok(())
}
