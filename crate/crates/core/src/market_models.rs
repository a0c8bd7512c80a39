//! Parametric dynamics for the stock index, the leveraged ETF and the bond.
//!
//! Interval returns are sampled exactly in distribution: one standard normal
//! for the diffusion, a Poisson jump count and double-exponential log jump
//! sizes. Index and LETF returns over the same interval are computed from one
//! shared [`IntervalDraw`] so that LETF and VETF portfolios see the same
//! market path.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

fn check_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {v}")))
    }
}

/// Annualised GBM parameters (real terms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmModelParams {
    pub mu: f64,
    pub sigma: f64,
    pub r: f64,
}

impl GbmModelParams {
    pub fn new(mu: f64, sigma: f64, r: f64) -> Result<Self> {
        let p = Self { mu, sigma, r };
        p.validate()?;
        Ok(p)
    }

    /// Maximum-likelihood GBM fit to the real CRSP value-weighted index,
    /// 1926:1-2023:12.
    pub fn crsp_real() -> Self {
        Self {
            mu: 0.0818,
            sigma: 0.1849,
            r: 0.0032,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("mu", self.mu)?;
        check_finite("sigma", self.sigma)?;
        check_finite("r", self.r)?;
        if self.sigma <= 0.0 {
            return Err(Error::param("sigma", "must be > 0"));
        }
        Ok(())
    }

    /// The same dynamics as a jump model with zero intensity.
    pub fn as_jump_model(&self) -> JumpModelParams {
        JumpModelParams {
            mu: self.mu,
            sigma: self.sigma,
            r: self.r,
            lambda: 0.0,
            p_up: 0.5,
            eta1: f64::INFINITY,
            eta2: f64::INFINITY,
        }
    }
}

/// Kou double-exponential jump diffusion.
///
/// The log jump size `y = ln ξ` has density
/// `p_up η1 e^{-η1 y} 1{y≥0} + (1-p_up) η2 e^{η2 y} 1{y<0}`. The drift is
/// compensated by `λκ` so that `E[S(t)/S(0)] = e^{μt}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpModelParams {
    pub mu: f64,
    pub sigma: f64,
    pub r: f64,
    pub lambda: f64,
    pub p_up: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl JumpModelParams {
    pub fn new(mu: f64, sigma: f64, r: f64, lambda: f64, p_up: f64, eta1: f64, eta2: f64) -> Result<Self> {
        let p = Self {
            mu,
            sigma,
            r,
            lambda,
            p_up,
            eta1,
            eta2,
        };
        p.validate()?;
        Ok(p)
    }

    /// Double-exponential fit to the real CRSP index, 1926:1-2023:12, with
    /// the average real 30-day T-bill return over the same period.
    pub fn crsp_real() -> Self {
        Self {
            mu: 0.08732,
            sigma: 0.1477,
            r: 0.0032,
            lambda: 0.3163,
            p_up: 0.2258,
            eta1: 4.3591,
            eta2: 5.5337,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("mu", self.mu)?;
        check_finite("sigma", self.sigma)?;
        check_finite("r", self.r)?;
        check_finite("lambda", self.lambda)?;
        check_finite("p_up", self.p_up)?;
        if self.sigma <= 0.0 {
            return Err(Error::param("sigma", "must be > 0"));
        }
        if self.lambda < 0.0 {
            return Err(Error::param("lambda", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.p_up) {
            return Err(Error::param("p_up", "must lie in [0, 1]"));
        }
        // eta = +inf is the degenerate "no jump size" limit and is allowed.
        if self.eta1.is_nan() || self.eta1 <= 1.0 {
            return Err(Error::param("eta1", "must be > 1 for E[xi] to be finite"));
        }
        if self.eta2.is_nan() || self.eta2 <= 0.0 {
            return Err(Error::param("eta2", "must be > 0"));
        }
        Ok(())
    }

    pub fn kappa(&self) -> Result<f64> {
        kappa(self)
    }

    /// Compensated diffusion drift `μ - λκ`.
    pub fn compensated_drift(&self) -> f64 {
        if self.lambda == 0.0 {
            return self.mu;
        }
        // validate() guarantees eta1 > 1
        self.mu - self.lambda * (expected_jump_gross(self.p_up, self.eta1, self.eta2) - 1.0)
    }

    pub fn diffusion_only(&self) -> GbmModelParams {
        GbmModelParams {
            mu: self.mu,
            sigma: self.sigma,
            r: self.r,
        }
    }

    /// Draws a log jump size from the double-exponential density by picking
    /// the branch with a Bernoulli(p_up) draw and inverting its CDF.
    #[inline]
    pub fn sample_log_jump(&self, rng: &mut RngStream) -> f64 {
        let up = rng.uniform() < self.p_up;
        let u = rng.uniform_open0();
        if up {
            -u.ln() / self.eta1
        } else {
            u.ln() / self.eta2
        }
    }

    /// Density of the log jump size.
    pub fn log_jump_density(&self, y: f64) -> f64 {
        if y >= 0.0 {
            self.p_up * self.eta1 * (-self.eta1 * y).exp()
        } else {
            (1.0 - self.p_up) * self.eta2 * (self.eta2 * y).exp()
        }
    }
}

fn expected_jump_gross(p_up: f64, eta1: f64, eta2: f64) -> f64 {
    let up = if eta1.is_infinite() {
        p_up
    } else {
        p_up * eta1 / (eta1 - 1.0)
    };
    let down = if eta2.is_infinite() {
        1.0 - p_up
    } else {
        (1.0 - p_up) * eta2 / (eta2 + 1.0)
    };
    up + down
}

/// `κ = E[ξ] - 1` for the double-exponential jump law.
pub fn kappa(params: &JumpModelParams) -> Result<f64> {
    if params.eta1.is_nan() || params.eta1 <= 1.0 {
        return Err(Error::param("eta1", "E[xi] diverges for eta1 <= 1"));
    }
    if params.eta2.is_nan() || params.eta2 <= 0.0 {
        return Err(Error::param("eta2", "must be > 0"));
    }
    Ok(expected_jump_gross(params.p_up, params.eta1, params.eta2) - 1.0)
}

/// Leverage multiplier and annual expense ratios of the two funds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtfCosts {
    pub c_ell: f64,
    pub c_v: f64,
    pub beta: f64,
}

impl EtfCosts {
    pub fn new(c_ell: f64, c_v: f64, beta: f64) -> Result<Self> {
        let c = Self { c_ell, c_v, beta };
        c.validate()?;
        Ok(c)
    }

    /// 2x LETF with the SSO expense ratio and a zero-fee VETF.
    pub fn sso_2x() -> Self {
        Self {
            c_ell: 0.0089,
            c_v: 0.0,
            beta: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("c_ell", self.c_ell)?;
        check_finite("c_v", self.c_v)?;
        check_finite("beta", self.beta)?;
        if self.c_ell < 0.0 {
            return Err(Error::param("c_ell", "must be >= 0"));
        }
        if self.c_v < 0.0 {
            return Err(Error::param("c_v", "must be >= 0"));
        }
        if self.beta < 1.0 {
            return Err(Error::param("beta", "must be >= 1"));
        }
        Ok(())
    }
}

/// Deterministic LETF prefactor `e^{((1-β)r + β(1-β)σ²/2 - c_ℓ)t}`.
///
/// Strictly below one whenever `β > 1` and `t > 0`.
pub fn drag_prefactor(costs: &EtfCosts, r: f64, sigma: f64, t: f64) -> f64 {
    let b = costs.beta;
    (((1.0 - b) * r + b * (1.0 - b) * sigma * sigma / 2.0 - costs.c_ell) * t).exp()
}

/// Shared randomness for one interval: the normal shock and the log jump
/// sizes `ln ξ_i`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntervalDraw {
    pub z: f64,
    pub log_jumps: Vec<f64>,
}

/// Gross returns over one interval from a single draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalReturns {
    pub index: f64,
    pub letf: f64,
    pub vetf: f64,
    pub bond: f64,
}

/// Either parametric model behind one interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParametricModel {
    Gbm(GbmModelParams),
    Jump(JumpModelParams),
}

impl ParametricModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ParametricModel::Gbm(p) => p.validate(),
            ParametricModel::Jump(p) => p.validate(),
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            ParametricModel::Gbm(p) => p.sigma,
            ParametricModel::Jump(p) => p.sigma,
        }
    }

    pub fn r(&self) -> f64 {
        match self {
            ParametricModel::Gbm(p) => p.r,
            ParametricModel::Jump(p) => p.r,
        }
    }

    fn drift(&self) -> f64 {
        match self {
            ParametricModel::Gbm(p) => p.mu,
            ParametricModel::Jump(p) => p.compensated_drift(),
        }
    }

    /// Fills `draw` with the randomness for one interval of length `dt`.
    ///
    /// The normal shock is always drawn first; jumps are only drawn when the
    /// intensity is positive, so a zero-intensity jump model consumes exactly
    /// the same stream as GBM.
    pub fn draw(&self, dt: f64, rng: &mut RngStream, draw: &mut IntervalDraw) {
        draw.z = rng.standard_normal();
        draw.log_jumps.clear();
        if let ParametricModel::Jump(p) = self {
            if p.lambda > 0.0 {
                let n = Poisson::new(p.lambda * dt).map(|d| d.sample(rng)).unwrap_or(0.0) as usize;
                for _ in 0..n {
                    draw.log_jumps.push(p.sample_log_jump(rng));
                }
            }
        }
    }

    /// `S(t+dt)/S(t)` for a given draw.
    #[inline]
    pub fn index_gross(&self, dt: f64, draw: &IntervalDraw) -> f64 {
        let sigma = self.sigma();
        let jumps: f64 = draw.log_jumps.iter().sum();
        ((self.drift() - 0.5 * sigma * sigma) * dt + sigma * dt.sqrt() * draw.z + jumps).exp()
    }

    /// `V^ℓ(t+dt)/V^ℓ(t)` for a given draw, floored at zero by limited
    /// liability on each jump.
    #[inline]
    pub fn letf_gross(&self, costs: &EtfCosts, dt: f64, draw: &IntervalDraw) -> f64 {
        let sigma = self.sigma();
        let b = costs.beta;
        let exponent = ((1.0 - b) * self.r() + b * self.drift() - 0.5 * b * b * sigma * sigma - costs.c_ell)
            * dt
            + b * sigma * dt.sqrt() * draw.z;
        let mut g = exponent.exp();
        for &y in &draw.log_jumps {
            g *= letf_jump_factor(b, y.exp());
        }
        g
    }

    #[inline]
    pub fn bond_gross(&self, dt: f64) -> f64 {
        (self.r() * dt).exp()
    }

    /// All four gross returns for one interval from a fresh draw.
    pub fn sample_interval(
        &self,
        costs: &EtfCosts,
        dt: f64,
        rng: &mut RngStream,
        draw: &mut IntervalDraw,
    ) -> IntervalReturns {
        self.draw(dt, rng, draw);
        self.returns_for(costs, dt, draw)
    }

    pub fn returns_for(&self, costs: &EtfCosts, dt: f64, draw: &IntervalDraw) -> IntervalReturns {
        let index = self.index_gross(dt, draw);
        IntervalReturns {
            index,
            letf: self.letf_gross(costs, dt, draw),
            vetf: (-costs.c_v * dt).exp() * index,
            bond: self.bond_gross(dt),
        }
    }
}

impl From<GbmModelParams> for ParametricModel {
    fn from(p: GbmModelParams) -> Self {
        ParametricModel::Gbm(p)
    }
}

impl From<JumpModelParams> for ParametricModel {
    fn from(p: JumpModelParams) -> Self {
        ParametricModel::Jump(p)
    }
}

/// Limited-liability LETF gross factor for one jump `ξ`: `max(1 + β(ξ-1), 0)`.
#[inline]
pub fn letf_jump_factor(beta: f64, xi: f64) -> f64 {
    (1.0 + beta * (xi - 1.0)).max(0.0)
}

pub fn sample_index_gross_return(model: &ParametricModel, dt: f64, rng: &mut RngStream) -> Result<f64> {
    check_dt(dt)?;
    let mut draw = IntervalDraw::default();
    model.draw(dt, rng, &mut draw);
    Ok(model.index_gross(dt, &draw))
}

pub fn sample_letf_gross_return(
    model: &ParametricModel,
    costs: &EtfCosts,
    dt: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    check_dt(dt)?;
    let mut draw = IntervalDraw::default();
    model.draw(dt, rng, &mut draw);
    Ok(model.letf_gross(costs, dt, &draw))
}

pub fn bond_gross_return(r: f64, dt: f64) -> Result<f64> {
    check_dt(dt)?;
    Ok((r * dt).exp())
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::param("dt", format!("must be > 0, got {dt}")))
    }
}

/// Flat market/cost configuration as found in experiment config files.
///
/// Absent jump keys (`lambda`, `p_up`, `eta1`, `eta2`) select GBM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub mu: f64,
    pub sigma: f64,
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_up: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta2: Option<f64>,
    pub c_ell: f64,
    pub c_v: f64,
    pub beta: f64,
}

impl MarketConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: MarketConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.model()?;
        cfg.costs()?;
        Ok(cfg)
    }

    pub fn from_parts(model: &ParametricModel, costs: &EtfCosts) -> Self {
        let (mu, sigma, r, jump) = match model {
            ParametricModel::Gbm(p) => (p.mu, p.sigma, p.r, None),
            ParametricModel::Jump(p) => (p.mu, p.sigma, p.r, Some(*p)),
        };
        Self {
            mu,
            sigma,
            r,
            lambda: jump.map(|p| p.lambda),
            p_up: jump.map(|p| p.p_up),
            eta1: jump.map(|p| p.eta1),
            eta2: jump.map(|p| p.eta2),
            c_ell: costs.c_ell,
            c_v: costs.c_v,
            beta: costs.beta,
        }
    }

    pub fn model(&self) -> Result<ParametricModel> {
        match (self.lambda, self.p_up, self.eta1, self.eta2) {
            (None, None, None, None) => Ok(GbmModelParams::new(self.mu, self.sigma, self.r)?.into()),
            (Some(lambda), Some(p_up), Some(eta1), Some(eta2)) => {
                Ok(JumpModelParams::new(self.mu, self.sigma, self.r, lambda, p_up, eta1, eta2)?.into())
            }
            _ => Err(Error::Config(
                "jump keys lambda, p_up, eta1, eta2 must be given together".into(),
            )),
        }
    }

    pub fn costs(&self) -> Result<EtfCosts> {
        EtfCosts::new(self.c_ell, self.c_v, self.beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kappa_single_branch() {
        let p = JumpModelParams::new(0.0, 0.1, 0.0, 0.0, 1.0, 2.0, 3.0).unwrap();
        assert_relative_eq!(kappa(&p).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn kappa_degenerate_limit() {
        let mut p = JumpModelParams::crsp_real();
        p.p_up = 0.5;
        for eta in [1e3, 1e6, 1e9] {
            p.eta1 = eta;
            p.eta2 = eta;
            assert!(kappa(&p).unwrap().abs() < 2.0 / eta);
        }
        p.eta1 = f64::INFINITY;
        p.eta2 = f64::INFINITY;
        assert_eq!(kappa(&p).unwrap(), 0.0);
    }

    #[test]
    fn kappa_rejects_eta1_le_one() {
        let mut p = JumpModelParams::crsp_real();
        p.eta1 = 1.0;
        assert!(kappa(&p).is_err());
        assert!(p.validate().is_err());
    }

    #[test]
    fn validation() {
        assert!(GbmModelParams::new(0.1, 0.0, 0.0).is_err());
        assert!(GbmModelParams::new(f64::NAN, 0.2, 0.0).is_err());
        assert!(JumpModelParams::new(0.1, 0.2, 0.0, -1.0, 0.5, 2.0, 2.0).is_err());
        assert!(JumpModelParams::new(0.1, 0.2, 0.0, 1.0, 1.5, 2.0, 2.0).is_err());
        assert!(JumpModelParams::new(0.1, 0.2, 0.0, 1.0, 0.5, 2.0, 0.0).is_err());
        assert!(EtfCosts::new(0.01, 0.0, 0.5).is_err());
        assert!(EtfCosts::new(-0.01, 0.0, 2.0).is_err());
        assert!(EtfCosts::new(0.0, 0.0, 1.0).is_ok());
    }

    #[test]
    fn deterministic_without_volatility() {
        // sigma must be > 0; use a tiny value and zero shock
        let m: ParametricModel = GbmModelParams::new(0.07, 1e-300, 0.0).unwrap().into();
        let mut rng = RngStream::new(1, 0);
        let g = sample_index_gross_return(&m, 0.5, &mut rng).unwrap();
        assert_relative_eq!(g, (0.07_f64 * 0.5).exp(), max_relative = 1e-14);
    }

    #[test]
    fn bond_returns() {
        assert_eq!(bond_gross_return(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(bond_gross_return(0.0032, 1.0).unwrap(), 0.0032_f64.exp());
        let q = bond_gross_return(0.0032, 0.25).unwrap();
        assert_relative_eq!(q * q * q * q, 0.0032_f64.exp(), max_relative = 4.0 * f64::EPSILON);
        assert!(bond_gross_return(0.0032, 0.0).is_err());
    }

    #[test]
    fn limited_liability_floor() {
        assert_eq!(letf_jump_factor(2.0, 0.4), 0.0);
        assert_relative_eq!(letf_jump_factor(2.0, 1.1), 1.2, epsilon = 1e-15);
        let m: ParametricModel = JumpModelParams::crsp_real().into();
        let draw = IntervalDraw {
            z: 0.3,
            log_jumps: vec![0.4_f64.ln()],
        };
        assert_eq!(m.letf_gross(&EtfCosts::sso_2x(), 0.25, &draw), 0.0);
    }

    #[test]
    fn leverage_one_matches_index() {
        let costs = EtfCosts::new(0.0, 0.0, 1.0).unwrap();
        let m: ParametricModel = GbmModelParams::crsp_real().into();
        let mut rng = RngStream::new(5, 9);
        let mut d = IntervalDraw::default();
        for _ in 0..1000 {
            let ret = m.sample_interval(&costs, 0.25, &mut rng, &mut d);
            assert_eq!(ret.letf, ret.index);
            assert_eq!(ret.vetf, ret.index);
        }
    }

    #[test]
    fn zero_intensity_is_gbm_bitwise() {
        let gbm = GbmModelParams::crsp_real();
        let mut jump = JumpModelParams::crsp_real();
        jump.mu = gbm.mu;
        jump.sigma = gbm.sigma;
        jump.lambda = 0.0;
        let a: ParametricModel = gbm.into();
        let b: ParametricModel = jump.into();
        let costs = EtfCosts::sso_2x();
        let mut ra = RngStream::new(3, 1);
        let mut rb = RngStream::new(3, 1);
        let (mut da, mut db) = (IntervalDraw::default(), IntervalDraw::default());
        for _ in 0..1000 {
            let x = a.sample_interval(&costs, 1.0 / 12.0, &mut ra, &mut da);
            let y = b.sample_interval(&costs, 1.0 / 12.0, &mut rb, &mut db);
            assert_eq!(x, y);
        }
    }

    #[test]
    fn drag_prefactor_below_one() {
        let costs = EtfCosts::sso_2x();
        for &(r, sigma) in &[(0.0032, 0.1849), (0.0, 0.01), (0.05, 0.3), (-0.01, 0.15)] {
            for &t in &[0.1, 1.0, 10.0] {
                let d = drag_prefactor(&costs, r, sigma, t);
                if r >= 0.0 {
                    assert!(d < 1.0, "r={r} sigma={sigma} t={t} d={d}");
                }
            }
        }
        let c3 = EtfCosts::new(0.0095, 0.0, 3.0).unwrap();
        assert!(drag_prefactor(&c3, 0.0032, 0.1849, 1.0) < 1.0);
        let c1 = EtfCosts::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(drag_prefactor(&c1, 0.0032, 0.1849, 1.0), 1.0);
    }

    #[test]
    fn config_roundtrip_and_selection() {
        let gbm = MarketConfig::from_toml_str(
            "mu = 0.0818\nsigma = 0.1849\nr = 0.0032\nc_ell = 0.0089\nc_v = 0.0\nbeta = 2.0\n",
        )
        .unwrap();
        assert_eq!(gbm.model().unwrap(), GbmModelParams::crsp_real().into());
        let s = "mu = 0.08732\nsigma = 0.1477\nr = 0.0032\nlambda = 0.3163\np_up = 0.2258\n\
                 eta1 = 4.3591\neta2 = 5.5337\nc_ell = 0.0089\nc_v = 0.0\nbeta = 2.0\n";
        let jump = MarketConfig::from_toml_str(s).unwrap();
        assert_eq!(jump.model().unwrap(), JumpModelParams::crsp_real().into());
        assert_eq!(jump.costs().unwrap(), EtfCosts::sso_2x());
        assert!(MarketConfig::from_toml_str(&format!("{s}extra = 1\n")).is_err());
        assert!(MarketConfig::from_toml_str(
            "mu = 0.1\nsigma = 0.2\nr = 0.0\nlambda = 0.3\nc_ell = 0.0\nc_v = 0.0\nbeta = 2.0\n"
        )
        .is_err());
    }
}
