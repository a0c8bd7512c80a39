//! Experiment config files and the resolved manifest.
//!
//! A config file is TOML with optional sections; anything left out falls
//! back to the per-experiment defaults. Command-line overrides are applied on
//! top, and the result is a [`Manifest`] whose hash identifies the run.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use letf_core::market_models::{EtfCosts, GbmModelParams, JumpModelParams, MarketConfig, ParametricModel};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Table2,
    Table3,
    Table4,
    Table5,
    Table6,
    Fig2,
    Fig4,
    Fig5,
    Fig7,
    Synthdata,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 10] = [
        ExperimentId::Table2,
        ExperimentId::Table3,
        ExperimentId::Table4,
        ExperimentId::Table5,
        ExperimentId::Table6,
        ExperimentId::Fig2,
        ExperimentId::Fig4,
        ExperimentId::Fig5,
        ExperimentId::Fig7,
        ExperimentId::Synthdata,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Table2 => "table2",
            ExperimentId::Table3 => "table3",
            ExperimentId::Table4 => "table4",
            ExperimentId::Table5 => "table5",
            ExperimentId::Table6 => "table6",
            ExperimentId::Fig2 => "fig2",
            ExperimentId::Fig4 => "fig4",
            ExperimentId::Fig5 => "fig5",
            ExperimentId::Fig7 => "fig7",
            ExperimentId::Synthdata => "synthdata",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentId::Table2 => "GBM, T=1, fixed weights 0.3 and 0.45 vs VETF 0.6",
            ExperimentId::Table3 => "GBM, T=10, annual rebalancing",
            ExperimentId::Table4 => "jump diffusion, T=10, yearly/quarterly/monthly rebalancing",
            ExperimentId::Table5 => "train CD(delta) neural policies on bootstrapped data",
            ExperimentId::Table6 => "historical 10-year windows with trained policies",
            ExperimentId::Fig2 => "closed-form payoff diagrams, T=1",
            ExperimentId::Fig4 => "GBM percentile bands and CDF of the wealth ratio",
            ExperimentId::Fig5 => "jump-diffusion percentile bands and CDF, monthly rebalancing",
            ExperimentId::Fig7 => "historical wealth paths from Jan 2000 and Jan 2014",
            ExperimentId::Synthdata => "write the synthetic stand-in input CSVs",
        }
    }

    fn uses_market(self) -> bool {
        matches!(
            self,
            ExperimentId::Table2
                | ExperimentId::Table3
                | ExperimentId::Table4
                | ExperimentId::Fig2
                | ExperimentId::Fig4
                | ExperimentId::Fig5
        )
    }

    fn uses_data(self) -> bool {
        !self.uses_market()
    }

    fn uses_training(self) -> bool {
        matches!(
            self,
            ExperimentId::Table5 | ExperimentId::Table6 | ExperimentId::Fig7
        )
    }

    fn uses_historical(self) -> bool {
        matches!(self, ExperimentId::Table6 | ExperimentId::Fig7)
    }

    fn default_market(self) -> MarketConfig {
        let costs = EtfCosts::sso_2x();
        let model: ParametricModel = match self {
            ExperimentId::Table4 | ExperimentId::Fig5 => JumpModelParams::crsp_real().into(),
            _ => GbmModelParams::crsp_real().into(),
        };
        MarketConfig::from_parts(&model, &costs)
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<_> = ExperimentId::ALL.iter().map(|i| i.as_str()).collect();
                CliError::Usage(format!("unknown experiment `{s}` (known: {})", known.join(", ")))
            })
    }
}

/// Data section as written in a config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFile {
    pub source: Option<String>,
    pub synthetic_seed: Option<u64>,
    pub first_year: Option<i32>,
    pub last_year: Option<i32>,
    pub index_csv: Option<PathBuf>,
    pub tbill_csv: Option<PathBuf>,
    pub cpi_csv: Option<PathBuf>,
    pub expected_block: Option<f64>,
    pub sensitivity_blocks: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingFile {
    pub deltas: Option<Vec<f64>>,
    pub hidden: Option<Vec<usize>>,
    pub iterations: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub final_lr_factor: Option<f64>,
    pub momentum: Option<f64>,
    pub clip_norm: Option<f64>,
    pub validate_every: Option<usize>,
    pub validation_paths: Option<usize>,
    pub test_paths: Option<usize>,
    pub init_alpha: Option<f64>,
    pub ratio_form: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoricalFile {
    pub starts: Option<Vec<String>>,
    pub policy_dir: Option<PathBuf>,
}

/// Parsed config file; every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub market: Option<MarketConfig>,
    pub data: Option<DataFile>,
    pub training: Option<TrainingFile>,
    pub historical: Option<HistoricalFile>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> CliResult<Self> {
        toml::from_str(s).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic {
        seed: u64,
        first_year: i32,
        last_year: i32,
    },
    Csv {
        index_csv: PathBuf,
        tbill_csv: PathBuf,
        cpi_csv: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSpec {
    #[serde(flatten)]
    pub source: DataSource,
    pub expected_block: f64,
    pub sensitivity_blocks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingSpec {
    pub deltas: Vec<f64>,
    pub hidden: Vec<usize>,
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub final_lr_factor: f64,
    pub momentum: f64,
    pub clip_norm: f64,
    pub validate_every: usize,
    pub validation_paths: usize,
    pub test_paths: usize,
    pub init_alpha: f64,
    pub ratio_form: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoricalSpec {
    pub starts: Vec<String>,
    pub policy_dir: Option<PathBuf>,
}

/// Fully resolved run description. Output location and thread count are
/// not part of it: they do not change results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub experiment: ExperimentId,
    pub seed: u64,
    /// Monte Carlo paths, or bootstrapped training paths for table5.
    pub paths: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub market: Option<MarketConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub historical: Option<HistoricalSpec>,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub quick: bool,
}

pub const DEFAULT_SEED: u64 = 2024;
pub const FULL_MC_PATHS: usize = 100_000;
pub const QUICK_MC_PATHS: usize = 10_000;
pub const FULL_TRAINING_PATHS: usize = 500_000;
pub const QUICK_TRAINING_PATHS: usize = 50_000;

pub const TABLE6_STARTS: [&str; 11] = [
    "1970-01", "1975-01", "1980-01", "1985-01", "1990-01", "1995-01", "2000-01", "2005-01", "2010-01",
    "2013-01", "2014-01",
];
pub const FIG7_STARTS: [&str; 2] = ["2000-01", "2014-01"];

fn positive(name: &str, v: usize) -> CliResult<usize> {
    if v == 0 {
        Err(CliError::Config(format!("`{name}` must be positive")))
    } else {
        Ok(v)
    }
}

impl Manifest {
    pub fn resolve(file: &ExperimentConfig, over: &Overrides) -> CliResult<Self> {
        let id_str = over
            .experiment
            .clone()
            .or_else(|| file.experiment.clone())
            .ok_or_else(|| {
                CliError::Usage("no experiment given (use --experiment or `experiment =`)".into())
            })?;
        let experiment: ExperimentId = id_str.parse()?;
        let seed = over.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
        let nn = experiment == ExperimentId::Table5;
        let default_paths = match (nn, over.quick) {
            (true, false) => FULL_TRAINING_PATHS,
            (true, true) => QUICK_TRAINING_PATHS,
            (false, false) => FULL_MC_PATHS,
            (false, true) => QUICK_MC_PATHS,
        };
        let paths = positive("paths", over.paths.or(file.paths).unwrap_or(default_paths))?;

        let market = if experiment.uses_market() {
            let m = file.market.unwrap_or_else(|| experiment.default_market());
            m.model().map_err(|e| CliError::Config(e.to_string()))?;
            m.costs().map_err(|e| CliError::Config(e.to_string()))?;
            Some(m)
        } else {
            None
        };

        let data = experiment
            .uses_data()
            .then(|| resolve_data(file.data.clone().unwrap_or_default()))
            .transpose()?;
        let training = experiment
            .uses_training()
            .then(|| resolve_training(file.training.clone().unwrap_or_default(), over.quick))
            .transpose()?;
        let historical = experiment
            .uses_historical()
            .then(|| resolve_historical(experiment, file.historical.clone().unwrap_or_default()))
            .transpose()?;

        Ok(Manifest {
            experiment,
            seed,
            paths,
            market,
            data,
            training,
            historical,
        })
    }

    /// Canonical JSON used for hashing and recorded alongside outputs.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("manifest serialises")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn resolve_data(d: DataFile) -> CliResult<DataSpec> {
    let source = match d.source.as_deref().unwrap_or("synthetic") {
        "synthetic" => {
            if d.index_csv.is_some() || d.tbill_csv.is_some() || d.cpi_csv.is_some() {
                return Err(CliError::Config(
                    "CSV paths given but data.source is `synthetic`".into(),
                ));
            }
            let first_year = d.first_year.unwrap_or(1926);
            let last_year = d.last_year.unwrap_or(2023);
            if last_year < first_year {
                return Err(CliError::Config("data.last_year before data.first_year".into()));
            }
            DataSource::Synthetic {
                seed: d.synthetic_seed.unwrap_or(1926),
                first_year,
                last_year,
            }
        }
        "csv" => {
            let need = |p: Option<PathBuf>, name: &str| {
                p.ok_or_else(|| {
                    CliError::Config(format!("data.{name} is required for data.source = \"csv\""))
                })
            };
            DataSource::Csv {
                index_csv: need(d.index_csv, "index_csv")?,
                tbill_csv: need(d.tbill_csv, "tbill_csv")?,
                cpi_csv: need(d.cpi_csv, "cpi_csv")?,
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "data.source must be `synthetic` or `csv`, got `{other}`"
            )))
        }
    };
    let expected_block = d.expected_block.unwrap_or(6.0);
    let sensitivity_blocks = d.sensitivity_blocks.unwrap_or_else(|| vec![3.0, 6.0, 12.0]);
    let below_one = |b: f64| b.is_nan() || b < 1.0;
    if below_one(expected_block) || sensitivity_blocks.iter().any(|&b| below_one(b)) {
        return Err(CliError::Config("block sizes must be >= 1".into()));
    }
    Ok(DataSpec {
        source,
        expected_block,
        sensitivity_blocks,
    })
}

fn resolve_training(t: TrainingFile, quick: bool) -> CliResult<TrainingSpec> {
    let spec = TrainingSpec {
        deltas: t.deltas.unwrap_or_else(|| vec![0.02, 0.04]),
        hidden: t.hidden.unwrap_or_else(|| vec![8, 8]),
        iterations: positive(
            "training.iterations",
            t.iterations.unwrap_or(if quick { 4_000 } else { 20_000 }),
        )?,
        batch_size: positive("training.batch_size", t.batch_size.unwrap_or(256))?,
        learning_rate: t.learning_rate.unwrap_or(0.01),
        final_lr_factor: t.final_lr_factor.unwrap_or(0.05),
        momentum: t.momentum.unwrap_or(0.9),
        clip_norm: t.clip_norm.unwrap_or(10.0),
        validate_every: positive("training.validate_every", t.validate_every.unwrap_or(250))?,
        validation_paths: positive(
            "training.validation_paths",
            t.validation_paths.unwrap_or(if quick { 5_000 } else { 10_000 }),
        )?,
        test_paths: positive(
            "training.test_paths",
            t.test_paths.unwrap_or(if quick { 10_000 } else { 100_000 }),
        )?,
        init_alpha: t.init_alpha.unwrap_or(0.4),
        ratio_form: t.ratio_form.unwrap_or(false),
    };
    if spec.deltas.is_empty() || spec.deltas.iter().any(|d| !d.is_finite()) {
        return Err(CliError::Config(
            "training.deltas must be a non-empty list of finite values".into(),
        ));
    }
    Ok(spec)
}

fn resolve_historical(id: ExperimentId, h: HistoricalFile) -> CliResult<HistoricalSpec> {
    let defaults: &[&str] = if id == ExperimentId::Fig7 {
        &FIG7_STARTS
    } else {
        &TABLE6_STARTS
    };
    let starts = h
        .starts
        .unwrap_or_else(|| defaults.iter().map(|s| s.to_string()).collect());
    for s in &starts {
        letf_core::data_pipeline::Month::parse(s)
            .map_err(|e| CliError::Config(format!("historical.starts: {e}")))?;
    }
    Ok(HistoricalSpec {
        starts,
        policy_dir: h.policy_dir,
    })
}

/// File-name label for a CD target, e.g. `cd02` for 0.02.
pub fn delta_label(delta: f64) -> String {
    let pct = delta * 100.0;
    if (pct - pct.round()).abs() < 1e-9 && pct >= 0.0 {
        format!("cd{:02}", pct.round() as i64)
    } else {
        format!("cd{}", pct).replace('.', "p").replace('-', "m")
    }
}
