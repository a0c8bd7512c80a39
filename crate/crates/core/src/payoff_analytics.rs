//! Closed-form terminal payoffs of the static LETF/bond and VETF/bond
//! portfolios as functions of the index gross return `s = S(T)/S(0)`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::market_models::{drag_prefactor, EtfCosts, GbmModelParams, JumpModelParams};

/// Allocate-once portfolio: `alpha` in the risky fund, the rest in the bond,
/// held to `horizon` years.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticPortfolioSpec {
    pub alpha: f64,
    pub costs: EtfCosts,
    pub horizon: f64,
}

impl StaticPortfolioSpec {
    pub fn new(alpha: f64, costs: EtfCosts, horizon: f64) -> Result<Self> {
        let spec = Self {
            alpha,
            costs,
            horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::param("alpha", "must lie in [0, 1]"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::param("horizon", "must be > 0"));
        }
        self.costs.validate()
    }
}

fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "s",
            format!("index gross return must be > 0, got {s}"),
        ))
    }
}

/// `P^ℓ(T)/W(0)` under GBM.
pub fn letf_payoff_gbm(spec: &StaticPortfolioSpec, params: &GbmModelParams, s: f64) -> Result<f64> {
    check_s(s)?;
    Ok(letf_payoff_terms(spec, params.r, params.sigma, s, 1.0))
}

/// `P^ℓ(T)/W(0)` under jump diffusion for a realised jump list `ξ_i`.
///
/// `s` here is the realised index gross return including the jumps; the
/// payoff is no longer a function of `s` alone.
pub fn letf_payoff_jump(
    spec: &StaticPortfolioSpec,
    params: &JumpModelParams,
    s: f64,
    jumps: &[f64],
) -> Result<f64> {
    check_s(s)?;
    let h = jump_adjustment_h(&spec.costs, jumps)?;
    Ok(letf_payoff_terms(spec, params.r, params.sigma, s, h))
}

fn letf_payoff_terms(spec: &StaticPortfolioSpec, r: f64, sigma: f64, s: f64, h: f64) -> f64 {
    let t = spec.horizon;
    let a = spec.alpha;
    (1.0 - a) * (r * t).exp() + a * drag_prefactor(&spec.costs, r, sigma, t) * s.powf(spec.costs.beta) * h
}

/// `P^v(T)/W(0)`.
pub fn vetf_payoff(spec: &StaticPortfolioSpec, r: f64, s: f64) -> Result<f64> {
    check_s(s)?;
    let t = spec.horizon;
    let a = spec.alpha;
    Ok((1.0 - a) * (r * t).exp() + a * (-spec.costs.c_v * t).exp() * s)
}

/// Jump drag `H(β,t) = Π max(1 + β(ξ_i - 1), 0) / ξ_i^β`.
pub fn jump_adjustment_h(costs: &EtfCosts, jumps: &[f64]) -> Result<f64> {
    let b = costs.beta;
    jumps.iter().try_fold(1.0, |acc, &xi| {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::param("xi", format!("jump sizes must be > 0, got {xi}")));
        }
        Ok(acc * (1.0 + b * (xi - 1.0)).max(0.0) / xi.powf(b))
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffPoint {
    pub s: f64,
    pub letf: f64,
    pub vetf: f64,
}

impl PayoffPoint {
    pub fn difference(&self) -> f64 {
        self.letf - self.vetf
    }
}

/// Payoff diagram on an increasing grid of index gross returns.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffCurve {
    pub points: Vec<PayoffPoint>,
}

/// Log-uniform grid over `[lo, hi]` with `n` points.
pub fn log_uniform_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid needs 0 < lo < hi and n >= 2, got [{lo}, {hi}] n={n}"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|i| (a + step * i as f64).exp()).collect();
    g[0] = lo;
    g[n - 1] = hi;
    Ok(g)
}

pub const DEFAULT_GRID: (f64, f64, usize) = (0.5, 2.0, 512);

/// Evaluates both GBM payoffs on `grid`.
pub fn payoff_curve(
    letf: &StaticPortfolioSpec,
    vetf: &StaticPortfolioSpec,
    params: &GbmModelParams,
    grid: &[f64],
) -> Result<PayoffCurve> {
    letf.validate()?;
    vetf.validate()?;
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("grid must be strictly increasing".into()));
    }
    let points = grid
        .iter()
        .map(|&s| {
            Ok(PayoffPoint {
                s,
                letf: letf_payoff_gbm(letf, params, s)?,
                vetf: vetf_payoff(vetf, params.r, s)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PayoffCurve { points })
}

impl PayoffCurve {
    pub const CSV_HEADER: [&'static str; 4] = ["s", "P_ell_over_W0", "P_v_over_W0", "difference"];

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for p in &self.points {
            w.write_record([
                format_f64(p.s),
                format_f64(p.letf),
                format_f64(p.vetf),
                format_f64(p.difference()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal representation, used for every CSV number.
pub fn format_f64(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table1() -> GbmModelParams {
        GbmModelParams::crsp_real()
    }

    #[test]
    fn all_bond_ignores_index() {
        let spec = StaticPortfolioSpec::new(0.0, EtfCosts::sso_2x(), 1.0).unwrap();
        for s in [0.3, 1.0, 2.5] {
            assert_relative_eq!(
                letf_payoff_gbm(&spec, &table1(), s).unwrap(),
                0.0032_f64.exp(),
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn unlevered_unit_return() {
        let costs = EtfCosts::new(0.0, 0.0, 1.0).unwrap();
        let spec = StaticPortfolioSpec::new(1.0, costs, 1.0).unwrap();
        assert_relative_eq!(
            letf_payoff_gbm(&spec, &table1(), 1.0).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn vetf_values() {
        let costs = EtfCosts::sso_2x();
        let spec = StaticPortfolioSpec::new(0.6, costs, 3.0).unwrap();
        assert_relative_eq!(vetf_payoff(&spec, 0.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        let one = StaticPortfolioSpec::new(0.6, costs, 1.0).unwrap();
        // 0.4 e^{0.0032} + 0.6 * 1.1
        let expected = 0.4 * 0.0032_f64.exp() + 0.66;
        assert_relative_eq!(
            vetf_payoff(&one, 0.0032, 1.1).unwrap(),
            expected,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            vetf_payoff(&one, 0.0032, 1e-300).unwrap(),
            0.4 * 0.0032_f64.exp(),
            max_relative = 1e-15
        );
        assert!(vetf_payoff(&one, 0.0032, 0.0).is_err());
        assert!(letf_payoff_gbm(&one, &table1(), -1.0).is_err());
    }

    #[test]
    fn h_values() {
        let c = EtfCosts::sso_2x();
        assert_eq!(jump_adjustment_h(&c, &[]).unwrap(), 1.0);
        assert_eq!(jump_adjustment_h(&c, &[1.0, 1.0]).unwrap(), 1.0);
        let h = jump_adjustment_h(&c, &[1.1]).unwrap();
        assert_relative_eq!(h, 1.2 / 1.21, max_relative = 1e-15);
        assert!(h < 1.0);
        assert!(jump_adjustment_h(&c, &[0.0]).is_err());
        assert_eq!(jump_adjustment_h(&c, &[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn jump_payoff_reduces_to_gbm_without_jumps() {
        let spec = StaticPortfolioSpec::new(0.45, EtfCosts::sso_2x(), 1.0).unwrap();
        let j = JumpModelParams::crsp_real();
        let g = j.diffusion_only();
        assert_eq!(
            letf_payoff_jump(&spec, &j, 1.2, &[]).unwrap(),
            letf_payoff_gbm(&spec, &g, 1.2).unwrap()
        );
    }

    #[test]
    fn fig2_difference_shape() {
        let costs = EtfCosts::sso_2x();
        let l = StaticPortfolioSpec::new(0.3, costs, 1.0).unwrap();
        let v = StaticPortfolioSpec::new(0.6, costs, 1.0).unwrap();
        let grid = log_uniform_grid(0.5, 2.0, 512).unwrap();
        let curve = payoff_curve(&l, &v, &table1(), &grid).unwrap();
        let d: Vec<f64> = curve.points.iter().map(|p| p.difference()).collect();
        assert!(d[0] > 0.0 && d[d.len() - 1] > 0.0);
        let near_one = curve
            .points
            .iter()
            .min_by(|a, b| (a.s - 1.0).abs().total_cmp(&(b.s - 1.0).abs()))
            .unwrap();
        assert!(near_one.difference() < 0.0);
        let sign_changes = d.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
        assert_eq!(sign_changes, 2);
    }

    #[test]
    fn crossing_points_by_bisection() {
        // Independent root-find of the closed-form difference; the two roots
        // must bracket s = 1.
        let costs = EtfCosts::sso_2x();
        let l = StaticPortfolioSpec::new(0.3, costs, 1.0).unwrap();
        let v = StaticPortfolioSpec::new(0.6, costs, 1.0).unwrap();
        let p = table1();
        let f = |s: f64| letf_payoff_gbm(&l, &p, s).unwrap() - vetf_payoff(&v, p.r, s).unwrap();
        let bisect = |mut a: f64, mut b: f64| {
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if (f(a) > 0.0) == (f(m) > 0.0) {
                    a = m
                } else {
                    b = m
                }
            }
            0.5 * (a + b)
        };
        let lo = bisect(0.5, 1.0);
        let hi = bisect(1.0, 2.0);
        assert!(lo < 1.0 && hi > 1.0);
        assert!(f(lo).abs() < 1e-12 && f(hi).abs() < 1e-12);
        assert!(f(0.5 * (lo + hi)) < 0.0);
    }

    #[test]
    fn csv_header() {
        let costs = EtfCosts::sso_2x();
        let l = StaticPortfolioSpec::new(0.3, costs, 1.0).unwrap();
        let v = StaticPortfolioSpec::new(0.6, costs, 1.0).unwrap();
        let curve = payoff_curve(&l, &v, &table1(), &[0.9, 1.0, 1.1]).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("s,P_ell_over_W0,P_v_over_W0,difference\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn bad_grid() {
        assert!(log_uniform_grid(0.0, 2.0, 10).is_err());
        assert!(log_uniform_grid(1.0, 1.0, 10).is_err());
        let g = log_uniform_grid(0.5, 2.0, 512).unwrap();
        assert_eq!(g.len(), 512);
        assert_eq!((g[0], g[511]), (0.5, 2.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn h_never_exceeds_one(beta in 1.0f64..4.0, xs in proptest::collection::vec(0.05f64..3.0, 0..8)) {
                let c = EtfCosts::new(0.0, 0.0, beta).unwrap();
                let h = jump_adjustment_h(&c, &xs).unwrap();
                prop_assert!(h <= 1.0 + 1e-12);
            }

            #[test]
            fn payoffs_monotone_and_letf_convex(alpha in 0.0f64..1.0, beta in 1.0f64..3.0) {
                let costs = EtfCosts::new(0.0089, 0.0, beta).unwrap();
                let spec = StaticPortfolioSpec::new(alpha, costs, 1.0).unwrap();
                let p = GbmModelParams::crsp_real();
                let grid = log_uniform_grid(0.2, 3.0, 64).unwrap();
                let l: Vec<f64> = grid.iter().map(|&s| letf_payoff_gbm(&spec, &p, s).unwrap()).collect();
                let v: Vec<f64> = grid.iter().map(|&s| vetf_payoff(&spec, p.r, s).unwrap()).collect();
                prop_assert!(l.windows(2).all(|w| w[1] >= w[0]));
                prop_assert!(v.windows(2).all(|w| w[1] >= w[0]));
                // convexity on a non-uniform grid: slopes are nondecreasing
                let slopes: Vec<f64> = (1..grid.len()).map(|i| (l[i] - l[i-1]) / (grid[i] - grid[i-1])).collect();
                prop_assert!(slopes.windows(2).all(|w| w[1] >= w[0] - 1e-9));
            }
        }
    }
}
