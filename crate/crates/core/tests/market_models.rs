use letf_core::market_models::{
    drag_prefactor, kappa, letf_jump_factor, EtfCosts, GbmModelParams, IntervalDraw, JumpModelParams,
    ParametricModel,
};
use letf_core::RngStream;
use proptest::prelude::*;

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// `E[f(e^Y)]` for the double-exponential log jump `Y` by midpoint quadrature.
fn jump_expectation(p: &JumpModelParams, f: impl Fn(f64) -> f64) -> f64 {
    let n = 400_000;
    let h = 12.0 / n as f64;
    let mut up = 0.0;
    let mut down = 0.0;
    for i in 0..n {
        let y = (i as f64 + 0.5) * h;
        up += p.eta1 * (-p.eta1 * y).exp() * f(y.exp());
        down += p.eta2 * (-p.eta2 * y).exp() * f((-y).exp());
    }
    p.p_up * up * h + (1.0 - p.p_up) * down * h
}

#[test]
fn kappa_matches_sampled_jump_mean() {
    let p = JumpModelParams::crsp_real();
    let mut rng = RngStream::new(11, 0);
    let xs: Vec<f64> = (0..1_000_000)
        .map(|_| p.sample_log_jump(&mut rng).exp() - 1.0)
        .collect();
    let (m, se) = mean_and_se(&xs);
    let k = kappa(&p).unwrap();
    assert!((m - k).abs() < 4.0 * se, "sampled {m} vs kappa {k} (se {se})");
    let quad = jump_expectation(&p, |xi| xi - 1.0);
    assert!((quad - k).abs() < 1e-6, "quadrature {quad} vs {k}");
}

#[test]
fn index_mean_is_exp_mu_t() {
    let costs = EtfCosts::sso_2x();
    for model in [
        ParametricModel::Gbm(GbmModelParams::crsp_real()),
        ParametricModel::Jump(JumpModelParams::crsp_real()),
    ] {
        let mu = match model {
            ParametricModel::Gbm(p) => p.mu,
            ParametricModel::Jump(p) => p.mu,
        };
        let dt = 1.0;
        let mut rng = RngStream::new(3, 1);
        let mut draw = IntervalDraw::default();
        let xs: Vec<f64> = (0..200_000)
            .map(|_| model.sample_interval(&costs, dt, &mut rng, &mut draw).index)
            .collect();
        let (m, se) = mean_and_se(&xs);
        let want = (mu * dt).exp();
        assert!((m - want).abs() < 4.0 * se, "{model:?}: {m} vs {want} (se {se})");
    }
}

#[test]
fn letf_mean_matches_independent_oracle() {
    let costs = EtfCosts::sso_2x();
    let b = costs.beta;
    let dt = 0.5;

    let g = GbmModelParams::crsp_real();
    let want_gbm = (((1.0 - b) * g.r + b * g.mu - costs.c_ell) * dt).exp();

    // diffusion part times the compound Poisson factor E[Π f(ξ_i)] = e^{λdt(E f - 1)}
    let j = JumpModelParams::crsp_real();
    let drift = j.mu - j.lambda * kappa(&j).unwrap();
    let ef = jump_expectation(&j, |xi| letf_jump_factor(b, xi));
    let want_jump = (((1.0 - b) * j.r + b * drift - costs.c_ell) * dt + j.lambda * dt * (ef - 1.0)).exp();

    for (model, want) in [
        (ParametricModel::Gbm(g), want_gbm),
        (ParametricModel::Jump(j), want_jump),
    ] {
        let mut rng = RngStream::new(5, 2);
        let mut draw = IntervalDraw::default();
        let xs: Vec<f64> = (0..200_000)
            .map(|_| model.sample_interval(&costs, dt, &mut rng, &mut draw).letf)
            .collect();
        let (m, se) = mean_and_se(&xs);
        assert!((m - want).abs() < 4.0 * se, "{model:?}: {m} vs {want} (se {se})");
    }
}

#[test]
fn monthly_steps_compose_to_the_annual_draw() {
    // GBM interval returns are exponentials of a linear function of z, so
    // twelve monthly draws equal one annual draw at z = Σz_k/√12.
    let model = ParametricModel::Gbm(GbmModelParams::crsp_real());
    let costs = EtfCosts::sso_2x();
    let mut rng = RngStream::new(8, 0);
    for _ in 0..1000 {
        let zs: Vec<f64> = (0..12).map(|_| rng.standard_normal()).collect();
        let (mut s, mut l) = (1.0, 1.0);
        for &z in &zs {
            let d = IntervalDraw { z, log_jumps: vec![] };
            s *= model.index_gross(1.0 / 12.0, &d);
            l *= model.letf_gross(&costs, 1.0 / 12.0, &d);
        }
        let annual = IntervalDraw {
            z: zs.iter().sum::<f64>() / 12f64.sqrt(),
            log_jumps: vec![],
        };
        let s1 = model.index_gross(1.0, &annual);
        let l1 = model.letf_gross(&costs, 1.0, &annual);
        assert!((s - s1).abs() <= 1e-12 * s1);
        assert!((l - l1).abs() <= 1e-12 * l1);
    }
}

fn jump_params() -> impl Strategy<Value = JumpModelParams> {
    (
        -0.2f64..0.3,
        0.01f64..0.6,
        -0.02f64..0.08,
        0.0f64..5.0,
        0.0f64..1.0,
        1.1f64..20.0,
        0.5f64..20.0,
    )
        .prop_map(|(mu, sigma, r, lambda, p_up, eta1, eta2)| JumpModelParams {
            mu,
            sigma,
            r,
            lambda,
            p_up,
            eta1,
            eta2,
        })
}

proptest! {
    #[test]
    fn letf_gross_is_nonnegative(p in jump_params(), beta in 1.0f64..4.0, dt in 0.01f64..2.0, seed in any::<u64>()) {
        let model = ParametricModel::Jump(p);
        let costs = EtfCosts { c_ell: 0.01, c_v: 0.0, beta };
        let mut rng = RngStream::new(seed, 0);
        let mut draw = IntervalDraw::default();
        for _ in 0..50 {
            let r = model.sample_interval(&costs, dt, &mut rng, &mut draw);
            prop_assert!(r.letf >= 0.0 && r.letf.is_finite());
            prop_assert!(r.index > 0.0);
        }
    }

    #[test]
    fn unlevered_letf_equals_vetf(p in jump_params(), c in 0.0f64..0.02, dt in 0.01f64..2.0, seed in any::<u64>()) {
        // with β=1 the jump floor max(ξ, 0) = ξ never binds
        let model = ParametricModel::Jump(p);
        let costs = EtfCosts { c_ell: c, c_v: c, beta: 1.0 };
        let mut rng = RngStream::new(seed, 1);
        let mut draw = IntervalDraw::default();
        for _ in 0..20 {
            let r = model.sample_interval(&costs, dt, &mut rng, &mut draw);
            prop_assert!((r.letf - r.vetf).abs() <= 1e-12 * r.vetf.max(1e-300));
        }
    }

    #[test]
    fn zero_intensity_matches_gbm_bitwise(mu in -0.2f64..0.3, sigma in 0.01f64..0.6, r in -0.02f64..0.08, seed in any::<u64>()) {
        let gbm = GbmModelParams { mu, sigma, r };
        let a = ParametricModel::Gbm(gbm);
        let b = ParametricModel::Jump(gbm.as_jump_model());
        let costs = EtfCosts::sso_2x();
        let (mut ra, mut rb) = (RngStream::new(seed, 4), RngStream::new(seed, 4));
        let (mut da, mut db) = (IntervalDraw::default(), IntervalDraw::default());
        for _ in 0..20 {
            let x = a.sample_interval(&costs, 0.25, &mut ra, &mut da);
            let y = b.sample_interval(&costs, 0.25, &mut rb, &mut db);
            prop_assert_eq!(x.index.to_bits(), y.index.to_bits());
            prop_assert_eq!(x.letf.to_bits(), y.letf.to_bits());
            prop_assert_eq!(x.vetf.to_bits(), y.vetf.to_bits());
        }
    }

    #[test]
    fn replay_is_identical(p in jump_params(), seed in any::<u64>(), stream in any::<u64>()) {
        let model = ParametricModel::Jump(p);
        let costs = EtfCosts::sso_2x();
        let run = || {
            let mut rng = RngStream::new(seed, stream);
            let mut draw = IntervalDraw::default();
            (0..10).map(|_| model.sample_interval(&costs, 1.0, &mut rng, &mut draw).letf.to_bits()).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn drag_prefactor_is_below_one(beta in 1.0001f64..5.0, r in 0.0f64..0.1, sigma in 0.0f64..1.0, c in 0.0f64..0.05, t in 0.001f64..30.0) {
        let costs = EtfCosts { c_ell: c, c_v: 0.0, beta };
        prop_assert!(drag_prefactor(&costs, r, sigma, t) < 1.0);
    }
}
