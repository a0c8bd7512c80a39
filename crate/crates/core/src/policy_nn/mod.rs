//! Neural-network allocation policy `α^ℓ(t, P^ℓ, P^v)`.
//!
//! A small fully connected network with tanh hidden layers and a sigmoid
//! head, so every output lies in `[0, 1]` by construction. Inputs are the
//! standardised features `(t/T, ln P^ℓ, ln P^v)`.

mod heatmap;
mod objective;
mod train;

pub use heatmap::{export_policy_heatmap, HeatmapCell, PolicyHeatmap};
pub use objective::{
    cd_loss, cd_loss_and_grad, cd_loss_with_policy, path_loss_and_grad, CdObjectiveConfig, CdTerms,
    ObjectiveForm,
};
pub use train::{train, LossRecord, TrainingConfig, TrainingReport};

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Wealth floor applied before taking logs of the portfolio values.
pub const WEALTH_FLOOR: f64 = 1e-12;

/// Raw policy inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyFeatures {
    pub t: f64,
    pub letf_value: f64,
    pub vetf_value: f64,
}

/// Affine standardisation applied to `(t/T, ln P^ℓ, ln P^v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureNorm {
    pub mean: [f64; 3],
    pub scale: [f64; 3],
}

impl Default for FeatureNorm {
    fn default() -> Self {
        Self {
            mean: [0.5, 0.25, 0.25],
            scale: [0.3, 0.4, 0.4],
        }
    }
}

impl FeatureNorm {
    fn validate(&self) -> Result<()> {
        if self.mean.iter().any(|m| !m.is_finite()) || self.scale.iter().any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return Err(Error::param(
                "feature_norm",
                "means must be finite and scales positive",
            ));
        }
        Ok(())
    }
}

/// Feed-forward network with `dims[0] = 3` inputs and `dims[last] = 1` output.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetwork {
    dims: Vec<usize>,
    params: Vec<f64>,
    norm: FeatureNorm,
    horizon: f64,
    seed: u64,
}

/// Per-layer activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> f64 {
        self.acts.last().map_or(f64::NAN, |a| a[0])
    }
}

fn n_params(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl PolicyNetwork {
    pub const DEFAULT_HIDDEN: [usize; 2] = [8, 8];

    /// Random initialisation: weights `N(0, 1/fan_in)`, zero biases, and an
    /// output bias giving `α = init_alpha` at the feature mean.
    pub fn new(
        hidden: &[usize],
        horizon: f64,
        norm: FeatureNorm,
        init_alpha: f64,
        seed: u64,
    ) -> Result<Self> {
        if hidden.contains(&0) {
            return Err(Error::param("hidden", "layer widths must be positive"));
        }
        if !(init_alpha > 0.0 && init_alpha < 1.0) {
            return Err(Error::param("init_alpha", "must lie in (0, 1)"));
        }
        let mut dims = vec![3];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let mut net = Self::zeros(dims, horizon, norm, seed)?;
        let mut rng = RngStream::new(seed, 0);
        let mut off = 0;
        let n_layers = net.dims.len() - 1;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (net.dims[l], net.dims[l + 1]);
            let sd = (1.0 / fan_in as f64).sqrt() * if l + 1 == n_layers { 0.1 } else { 1.0 };
            for w in &mut net.params[off..off + fan_in * fan_out] {
                *w = sd * rng.standard_normal();
            }
            off += fan_in * fan_out + fan_out;
        }
        let last = net.params.len() - 1;
        net.params[last] = (init_alpha / (1.0 - init_alpha)).ln();
        Ok(net)
    }

    /// All-zero parameters; the output is 0.5 everywhere.
    pub fn zeros(dims: Vec<usize>, horizon: f64, norm: FeatureNorm, seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims[0] != 3 || *dims.last().expect("non-empty") != 1 || dims.contains(&0) {
            return Err(Error::param(
                "dims",
                "expected [3, hidden..., 1] with positive widths",
            ));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param("horizon", "must be > 0"));
        }
        norm.validate()?;
        let n = n_params(&dims);
        Ok(Self {
            dims,
            params: vec![0.0; n],
            norm,
            horizon,
            seed,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn norm(&self) -> &FeatureNorm {
        &self.norm
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Standardised input vector.
    #[inline]
    pub fn features(&self, t: f64, letf_value: f64, vetf_value: f64) -> Result<[f64; 3]> {
        if !t.is_finite() || !letf_value.is_finite() || !vetf_value.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite policy features (t={t}, P_ell={letf_value}, P_v={vetf_value})"
            )));
        }
        let raw = [
            t / self.horizon,
            letf_value.max(WEALTH_FLOOR).ln(),
            vetf_value.max(WEALTH_FLOOR).ln(),
        ];
        let mut x = [0.0; 3];
        for i in 0..3 {
            x[i] = (raw[i] - self.norm.mean[i]) / self.norm.scale[i];
        }
        Ok(x)
    }

    /// `α^ℓ(t, P^ℓ, P^v) ∈ [0, 1]`.
    pub fn forward(&self, t: f64, letf_value: f64, vetf_value: f64) -> Result<f64> {
        let x = self.features(t, letf_value, vetf_value)?;
        let mut cache = ForwardCache::default();
        Ok(self.forward_cached(&x, &mut cache))
    }

    /// Forward pass from standardised inputs, keeping activations in `cache`.
    pub fn forward_cached(&self, x: &[f64; 3], cache: &mut ForwardCache) -> f64 {
        let n_layers = self.dims.len() - 1;
        cache.acts.resize_with(n_layers + 1, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        let mut off = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let (prev, rest) = cache.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut rest[0];
            out.clear();
            let w = &self.params[off..off + fan_in * fan_out];
            let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            for j in 0..fan_out {
                let row = &w[j * fan_in..(j + 1) * fan_in];
                let z = b[j] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                out.push(if l + 1 == n_layers { sigmoid(z) } else { z.tanh() });
            }
            off += fan_in * fan_out + fan_out;
        }
        cache.output()
    }

    /// Backpropagates `d_alpha = ∂L/∂α` through the cached pass, adding the
    /// parameter gradient into `grad` and returning `∂L/∂x`.
    pub fn backward(&self, cache: &ForwardCache, d_alpha: f64, grad: &mut [f64]) -> [f64; 3] {
        let n_layers = self.dims.len() - 1;
        let alpha = cache.output();
        let mut delta = vec![d_alpha * alpha * (1.0 - alpha)];
        let mut off = self.params.len();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            off -= fan_in * fan_out + fan_out;
            let input = &cache.acts[l];
            let w = &self.params[off..off + fan_in * fan_out];
            let (gw, gb) = grad[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            let mut prev = vec![0.0; fan_in];
            for j in 0..fan_out {
                let d = delta[j];
                gb[j] += d;
                for i in 0..fan_in {
                    gw[j * fan_in + i] += d * input[i];
                    prev[i] += w[j * fan_in + i] * d;
                }
            }
            if l > 0 {
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= 1.0 - a * a;
                }
            }
            delta = prev;
        }
        [delta[0], delta[1], delta[2]]
    }

    const MAGIC: &'static [u8; 8] = b"LETFPNN\0";
    const VERSION: u32 = 1;

    /// Versioned little-endian layout: magic, version, dims, horizon,
    /// normalisation, seed, parameter count and parameters.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for &d in &self.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        w.write_all(&self.horizon.to_le_bytes())?;
        for v in self.norm.mean.iter().chain(&self.norm.scale) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
            let mut b = [0u8; N];
            r.read_exact(&mut b)
                .map_err(|e| Error::Format(format!("truncated policy file: {e}")))?;
            Ok(b)
        }
        let f64_of = |b: [u8; 8]| f64::from_le_bytes(b);
        if &take::<8, _>(&mut r)? != Self::MAGIC {
            return Err(Error::Format("not a policy network file".into()));
        }
        let version = u32::from_le_bytes(take(&mut r)?);
        if version != Self::VERSION {
            return Err(Error::Format(format!(
                "unsupported policy file version {version}"
            )));
        }
        let n_dims = u32::from_le_bytes(take(&mut r)?) as usize;
        if !(2..=64).contains(&n_dims) {
            return Err(Error::Format(format!("implausible layer count {n_dims}")));
        }
        let mut dims = Vec::with_capacity(n_dims);
        for _ in 0..n_dims {
            dims.push(u32::from_le_bytes(take(&mut r)?) as usize);
        }
        let horizon = f64_of(take(&mut r)?);
        let mut norm = FeatureNorm::default();
        for v in norm.mean.iter_mut().chain(norm.scale.iter_mut()) {
            *v = f64_of(take(&mut r)?);
        }
        let seed = u64::from_le_bytes(take(&mut r)?);
        let mut net = Self::zeros(dims, horizon, norm, seed).map_err(|e| Error::Format(e.to_string()))?;
        let count = u64::from_le_bytes(take(&mut r)?) as usize;
        if count != net.params.len() {
            return Err(Error::Format(format!(
                "parameter count {count} does not match dims (expected {})",
                net.params.len()
            )));
        }
        for p in &mut net.params {
            *p = f64_of(take(&mut r)?);
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format("trailing bytes after policy parameters".into()));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(bytes.as_slice())
    }
}

/// Free-function form of [`PolicyNetwork::forward`].
pub fn policy_forward(net: &PolicyNetwork, features: PolicyFeatures) -> Result<f64> {
    net.forward(features.t, features.letf_value, features.vetf_value)
}
