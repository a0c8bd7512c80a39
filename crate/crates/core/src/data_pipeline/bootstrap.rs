//! Stationary block bootstrap over joint monthly rows.
//!
//! Each path is assembled from circular blocks of the source. Block starts
//! are uniform over the source and block lengths are geometric with mean
//! `expected_block`, so the resampled series is stationary. Rows are drawn
//! jointly: one source month feeds the LETF, VETF and T-bill slots together.

use rand_distr::{Distribution, Geometric};

use super::scenario::{JointReturn, JointSeries, Provenance, ScenarioProvider, ScenarioSet};
use crate::error::{Error, Result};
use crate::par::{map_indices, Execution};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    /// Mean block length in periods (months). No default is implied by the
    /// data; 6 is a common choice for monthly returns.
    pub expected_block: f64,
    pub n_paths: usize,
    /// Path length in periods.
    pub path_len: usize,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.expected_block >= 1.0 && self.expected_block.is_finite()) {
            return Err(Error::param("expected_block", "must be >= 1"));
        }
        if self.path_len < 1 {
            return Err(Error::param("path_len", "must be >= 1"));
        }
        if self.n_paths < 1 {
            return Err(Error::param("n_paths", "must be >= 1"));
        }
        Ok(())
    }
}

/// One resampled block: `len` rows starting at `start`, wrapping circularly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub start: usize,
    pub len: usize,
}

/// Blocks drawn for `path`; the lengths are the sampled ones, so the last
/// block may overrun `path_len` and is truncated when rows are copied.
pub fn bootstrap_blocks(source_len: usize, config: &BootstrapConfig, path: usize) -> Vec<Block> {
    let mut blocks = Vec::new();
    for_each_block(source_len, config, path, |b| blocks.push(b));
    blocks
}

fn for_each_block(source_len: usize, config: &BootstrapConfig, path: usize, mut f: impl FnMut(Block)) {
    let mut rng = RngStream::new(config.seed, path as u64);
    let geom = Geometric::new(1.0 / config.expected_block).expect("validated block size");
    let mut filled = 0;
    while filled < config.path_len {
        let start = rng.below(source_len);
        // Geometric counts failures before the first success; lengths start at 1.
        let len = 1 + geom.sample(&mut rng) as usize;
        f(Block { start, len });
        filled += len;
    }
}

fn fill_from_blocks(
    source: &[JointReturn],
    config: &BootstrapConfig,
    path: usize,
    out: &mut Vec<JointReturn>,
) {
    out.clear();
    let n = source.len();
    let want = config.path_len;
    for_each_block(n, config, path, |b| {
        let take = b.len.min(want - out.len());
        for k in 0..take {
            out.push(source[(b.start + k) % n]);
        }
    });
}

fn check_source(series: &JointSeries) -> Result<()> {
    if series.len() < 2 {
        return Err(Error::Data(format!(
            "bootstrap source needs at least 2 rows, got {}",
            series.len()
        )));
    }
    Ok(())
}

/// Materialises `config.n_paths` bootstrap paths.
pub fn stationary_block_bootstrap(
    series: &JointSeries,
    config: &BootstrapConfig,
    exec: Execution,
) -> Result<ScenarioSet> {
    config.validate()?;
    check_source(series)?;
    let paths = map_indices(exec, config.n_paths, |p| {
        let mut out = Vec::with_capacity(config.path_len);
        fill_from_blocks(&series.rows, config, p, &mut out);
        out
    });
    ScenarioSet::new(
        config.n_paths,
        config.path_len,
        1.0 / 12.0,
        paths.into_iter().flatten().collect(),
        Provenance {
            source_hash: series.source_hash(),
            expected_block: config.expected_block,
            seed: config.seed,
        },
    )
}

/// Bootstrap paths generated on demand from `(seed, path)`, identical to
/// what [`stationary_block_bootstrap`] would materialise.
#[derive(Debug, Clone)]
pub struct BootstrapScenarios<'a> {
    source: &'a JointSeries,
    config: BootstrapConfig,
    period_years: f64,
}

impl<'a> BootstrapScenarios<'a> {
    pub fn new(source: &'a JointSeries, config: BootstrapConfig) -> Result<Self> {
        config.validate()?;
        check_source(source)?;
        Ok(Self {
            source,
            config,
            period_years: 1.0 / 12.0,
        })
    }

    pub fn config(&self) -> &BootstrapConfig {
        &self.config
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            source_hash: self.source.source_hash(),
            expected_block: self.config.expected_block,
            seed: self.config.seed,
        }
    }

    pub fn materialize(&self, exec: Execution) -> Result<ScenarioSet> {
        stationary_block_bootstrap(self.source, &self.config, exec)
    }
}

impl ScenarioProvider for BootstrapScenarios<'_> {
    fn n_paths(&self) -> usize {
        self.config.n_paths
    }

    fn n_periods(&self) -> usize {
        self.config.path_len
    }

    fn period_years(&self) -> f64 {
        self.period_years
    }

    fn fill_path(&self, path: usize, out: &mut Vec<JointReturn>) {
        fill_from_blocks(&self.source.rows, &self.config, path, out);
    }
}
