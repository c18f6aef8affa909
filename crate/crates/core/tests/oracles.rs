//! Regression economies checked against the Monte Carlo and realized-volatility
//! oracles, plus property tests of the equilibrium invariants.

use proptest::prelude::*;

use crra_equilibrium::equilibrium;
use crra_equilibrium::model::{dividend, validate, Agent, EconomyParams, MarketState};
use crra_equilibrium::oracle::{self, McConfig};
use crra_equilibrium::simulate::{realized_vol_check, PathGrid};
use crra_equilibrium::DenominatorTable;

fn economy(r: u32, sigma: f64, alpha_star: f64, agents: &[(f64, f64, f64)]) -> (EconomyParams, DenominatorTable) {
    let agents = agents.iter().map(|&(rho, a, g)| Agent::new(rho, a, g)).collect();
    let p = EconomyParams::new(r, sigma, alpha_star, 1.0, agents).unwrap();
    let t = validate(&p).unwrap();
    (p, t)
}

/// Covers J in {1, 2, 3} and R in {2, 3, 4}; each has finite fourth moments
/// so the standard errors are trustworthy.
fn regression_set() -> Vec<(&'static str, EconomyParams, DenominatorTable)> {
    vec![
        ("J1R2", economy(2, 0.1, 0.0, &[(0.05, 0.0, 0.0)])),
        ("J1R3", economy(3, 0.1, 0.02, &[(0.1, 0.1, 0.0)])),
        ("J2R2", economy(2, 0.1, 0.02, &[(0.08, 0.2, 0.0), (0.15, -0.15, 0.3)])),
        ("J2R4", economy(4, 0.05, 0.0, &[(0.2, 0.1, 0.0), (0.25, -0.1, 0.2)])),
        (
            "J3R3",
            economy(3, 0.08, 0.03, &[(0.12, 0.2, 0.2), (0.15, -0.1, -0.1), (0.1, 0.05, -0.1)]),
        ),
    ]
    .into_iter()
    .map(|(name, (p, t))| (name, p, t))
    .collect()
}

#[test]
fn regression_economies_match_monte_carlo() {
    for (k, (name, p, t)) in regression_set().into_iter().enumerate() {
        assert!(oracle::moment_margin(&p, &t, 4) > 0.0, "{name}");
        let state = MarketState::new(0.5, 0.2).unwrap();
        let cfg = McConfig::with_defaults(&t, state.t, 50_000, 100 + k as u64);
        let (wealth, stock) = oracle::mc_level_oracles(state, &p, &t, cfg).unwrap();
        for (j, rep) in wealth.iter().enumerate() {
            assert!(rep.passes(3.0), "{name} wealth_{}: z = {}", j + 1, rep.z_score);
        }
        assert!(stock.passes(3.0), "{name} stock: z = {}", stock.z_score);
    }
}

#[test]
fn regression_economies_price_is_a_martingale() {
    for (k, (name, p, t)) in regression_set().into_iter().enumerate() {
        let rep = oracle::martingale_check(&p, &t, 5.0, 200, 50_000, 200 + k as u64).unwrap();
        assert!(rep.passes(3.0), "{name}: z = {}", rep.z_score);
    }
}

/// Residuals of log-price increments should be standard normal: mean within
/// four standard errors of 0, variance within four of 1.
fn assert_standard_normal(name: &str, rep: &crra_equilibrium::simulate::VolReport) {
    assert!(rep.residual_mean.abs() < 4.0 * rep.mean_std_error, "{name}: {rep:?}");
    assert!((rep.residual_variance - 1.0).abs() < 4.0 * rep.variance_std_error, "{name}: {rep:?}");
}

#[test]
fn regression_economies_realized_volatility() {
    for (k, (name, p, t)) in regression_set().into_iter().enumerate() {
        let grid = PathGrid::new(0.0, 1.0, 250).unwrap();
        let rep = realized_vol_check(&p, &t, grid, 0.0, 40, 300 + k as u64);
        assert_standard_normal(name, &rep);
    }
}

#[test]
fn two_agent_realized_volatility_on_fine_grid() {
    let (p, t) = economy(3, 0.1, 0.0, &[(0.3, 0.3, 0.0), (0.3, -0.3, 0.0)]);
    let grid = PathGrid::new(0.0, 1.0, 10_000).unwrap();
    let rep = realized_vol_check(&p, &t, grid, 0.0, 4, 17);
    assert_eq!(rep.n_samples, 40_000);
    assert_standard_normal("pair", &rep);
}

fn arb_economy() -> impl Strategy<Value = (EconomyParams, DenominatorTable)> {
    (
        2u32..=5,
        0.02f64..0.3,
        -0.1f64..0.1,
        prop::collection::vec((0.2f64..1.0, -1.0f64..1.0, -2.0f64..2.0), 1..=4),
    )
        .prop_filter_map("denominators must be positive", |(r, sigma, a0, agents)| {
            let agents = agents.into_iter().map(|(rho, a, g)| Agent::new(rho, a, g)).collect();
            let p = EconomyParams::new(r, sigma, a0, 1.0, agents).ok()?;
            let t = validate(&p).ok()?;
            Some((p, t))
        })
}

fn arb_state() -> impl Strategy<Value = MarketState> {
    (0.0f64..10.0, -3.0f64..3.0).prop_map(|(t, x)| MarketState::new(t, x).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn markets_clear((p, t) in arb_economy(), s in arb_state()) {
        let snap = equilibrium::snapshot(s, &p, &t).unwrap();
        let c: f64 = snap.consumptions.iter().sum();
        prop_assert!((c - dividend(s, &p)).abs() <= 1e-12 * snap.dividend);
        let w: f64 = snap.wealths.iter().sum();
        prop_assert!((w - snap.stock_price).abs() <= 1e-10 * snap.stock_price);
        let pi: f64 = snap.portfolios.iter().sum();
        prop_assert!((pi - 1.0).abs() <= 1e-10);
        prop_assert!(snap.consumptions.iter().all(|&c| c > 0.0));
        prop_assert!(snap.wealths.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn pd_ratio_is_scale_free((p, t) in arb_economy(), s in arb_state(), d0 in 0.1f64..10.0) {
        let scaled = p.with_delta0(d0).unwrap();
        let base = equilibrium::pd_ratio(s, &p, &t);
        prop_assert!((equilibrium::pd_ratio(s, &scaled, &t) - base).abs() <= 1e-12 * base);
        let ratio = equilibrium::stock_price(s, &scaled, &t) / equilibrium::stock_price(s, &p, &t);
        prop_assert!((ratio - d0).abs() <= 1e-12 * d0);
    }

    #[test]
    fn common_gamma_shift_changes_nothing_real((p, t) in arb_economy(), s in arb_state(), shift in -3.0f64..3.0) {
        let gammas: Vec<f64> = p.gammas().iter().map(|g| g + shift).collect();
        let shifted = p.with_gammas(&gammas).unwrap();
        let a = equilibrium::snapshot(s, &p, &t).unwrap();
        let b = equilibrium::snapshot(s, &shifted, &t).unwrap();
        prop_assert!((a.pd_ratio - b.pd_ratio).abs() <= 1e-10 * a.pd_ratio);
        prop_assert!((a.rates.riskless_rate - b.rates.riskless_rate).abs() <= 1e-12);
        for (x, y) in a.consumptions.iter().zip(&b.consumptions) {
            prop_assert!((x - y).abs() <= 1e-12 * a.dividend);
        }
    }

    #[test]
    fn foc_matches_closed_form_consumption((p, _t) in arb_economy(), s in arb_state()) {
        for j in 0..p.n_agents() {
            let direct = equilibrium::consumption(s, &p, j).unwrap();
            let foc = equilibrium::consumption_from_foc(s, &p, j).unwrap();
            prop_assert!((direct - foc).abs() <= 1e-10 * direct.max(1e-300));
        }
    }
}
