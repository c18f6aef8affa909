//! Invariant and oracle suites shared by the `verify` command and the test
//! targets. Each suite reduces to one [`Check`] per named quantity, holding
//! the worst error seen and the threshold it was held to.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::equilibrium::{self, StateTerms};
use crate::error::Result;
use crate::fd::{fd_engine, log_drift, FdSteps};
use crate::model::{DenominatorTable, EconomyParams, MarketState};
use crate::numerics::logsumexp;
use crate::oracle::{self, McConfig};

pub const CONSUMPTION_TOL: f64 = 1e-12;
pub const AGGREGATION_TOL: f64 = 1e-10;
pub const FD_TOL: f64 = 1e-5;
pub const RISK_PREMIUM_TOL: f64 = 1e-8;
pub const MAX_ABS_Z: f64 = 3.0;

/// Relative FD errors are taken against `max(|closed form|, FD_SCALE_FLOOR)`
/// so that coefficients passing through zero are compared absolutely.
pub const FD_SCALE_FLOOR: f64 = 1e-3;

pub const FD_SUITE_STEPS: FdSteps = FdSteps {
    h_t: 1e-5,
    h_x: 4e-3,
    richardson: true,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub quantity: String,
    pub observed: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn new(suite: &str, quantity: impl Into<String>, observed: f64, threshold: f64) -> Self {
        Check {
            suite: suite.to_string(),
            quantity: quantity.into(),
            observed,
            threshold,
            passed: observed <= threshold,
        }
    }
}

/// Test hooks that perturb closed forms before comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Faults {
    pub riskless_rate_bias: f64,
}

/// States with `t ∈ [0.1, 5]`, `x ∈ [-2, 2]`.
pub fn random_states(seed: u64, n: usize) -> Vec<MarketState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| MarketState {
            t: rng.random_range(0.1..5.0),
            x: rng.random_range(-2.0..2.0),
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[derive(Default)]
struct Worst(Vec<(String, f64, f64)>);

impl Worst {
    fn record(&mut self, name: &str, err: f64, threshold: f64) {
        let err = if err.is_nan() { f64::INFINITY } else { err };
        match self.0.iter_mut().find(|(n, _, _)| n == name) {
            Some(entry) => entry.1 = entry.1.max(err),
            None => self.0.push((name.to_string(), err, threshold)),
        }
    }

    fn into_checks(self, suite: &str) -> Vec<Check> {
        self.0
            .into_iter()
            .map(|(name, err, thr)| Check::new(suite, name, err, thr))
            .collect()
    }
}

/// Market clearing, wealth aggregation, P/D consistency and portfolio clearing.
pub fn clearing_suite(
    params: &EconomyParams,
    table: &DenominatorTable,
    states: &[MarketState],
) -> Result<Vec<Check>> {
    let mut worst = Worst::default();
    for &state in states {
        let snap = equilibrium::snapshot(state, params, table)?;
        let c: f64 = snap.consumptions.iter().sum();
        worst.record("consumption_clearing", rel(c, snap.dividend), CONSUMPTION_TOL);
        let w: f64 = snap.wealths.iter().sum();
        worst.record("wealth_aggregation", rel(w, snap.stock_price), AGGREGATION_TOL);
        worst.record(
            "pd_ratio",
            rel(snap.pd_ratio, snap.stock_price / snap.dividend),
            CONSUMPTION_TOL,
        );
        let pi: f64 = snap.portfolios.iter().sum();
        worst.record("portfolio_clearing", (pi - 1.0).abs(), AGGREGATION_TOL);
        let bonds: f64 = snap
            .wealths
            .iter()
            .zip(&snap.portfolios)
            .map(|(w, p)| w - p * snap.stock_price)
            .sum();
        worst.record("bond_clearing", bonds.abs() / snap.stock_price, AGGREGATION_TOL);
    }
    Ok(worst.into_checks("clearing"))
}

/// Closed-form Itô coefficients against finite differences of the level
/// fields, plus the risk-premium identity.
pub fn fd_suite(
    params: &EconomyParams,
    table: &DenominatorTable,
    states: &[MarketState],
    faults: Faults,
) -> Result<Vec<Check>> {
    let steps = FD_SUITE_STEPS;
    let mut worst = Worst::default();
    let fd_rel = |fd: f64, cf: f64| (fd - cf).abs() / cf.abs().max(FD_SCALE_FLOOR);
    let at = |t: f64, x: f64| MarketState { t, x };

    for &state in states {
        let snap = equilibrium::snapshot(state, params, table)?;
        let mut rates = snap.rates;
        rates.riskless_rate += faults.riskless_rate_bias;
        let stock = snap.stock;

        let log_l = fd_engine(|t, x| logsumexp(&StateTerms::new(at(t, x), params, table).l_log_weights()), state, steps);
        worst.record("alpha_bar", fd_rel(log_l.d_x, rates.alpha_bar), FD_TOL);
        worst.record("rho_bar", fd_rel(-log_drift(&log_l), rates.rho_bar), FD_TOL);

        let log_z = fd_engine(|t, x| StateTerms::new(at(t, x), params, table).log_z(), state, steps);
        worst.record("alpha_tilde", fd_rel(log_z.d_x, stock.alpha_tilde), FD_TOL);
        worst.record("rho_tilde", fd_rel(-log_drift(&log_z), stock.rho_tilde), FD_TOL);

        let log_zeta = fd_engine(|t, x| equilibrium::log_state_price_density(at(t, x), params), state, steps);
        worst.record("kappa", fd_rel(-log_zeta.d_x, rates.kappa), FD_TOL);
        worst.record("riskless_rate", fd_rel(-log_drift(&log_zeta), rates.riskless_rate), FD_TOL);

        let log_s = fd_engine(|t, x| equilibrium::stock_price(at(t, x), params, table).ln(), state, steps);
        worst.record("stock_vol", fd_rel(log_s.d_x, stock.vol), FD_TOL);
        worst.record("stock_drift", fd_rel(log_drift(&log_s), stock.drift), FD_TOL);

        for j in 0..params.n_agents() {
            let log_zj = fd_engine(|t, x| StateTerms::new(at(t, x), params, table).log_z_agent(j), state, steps);
            worst.record(
                &format!("agent_alpha_tilde_{}", j + 1),
                fd_rel(log_zj.d_x, snap.agent_alpha_tilde[j]),
                FD_TOL,
            );
        }

        let yield_ = snap.dividend / snap.stock_price;
        let premium = stock.drift + yield_ - rates.riskless_rate;
        let rhs = rates.kappa * stock.vol;
        let scale = stock.drift.abs() + yield_ + rates.riskless_rate.abs() + rhs.abs();
        worst.record("risk_premium", (premium - rhs).abs() / scale, RISK_PREMIUM_TOL);
    }
    Ok(worst.into_checks("fd"))
}

/// Wealth of every agent and the stock price at the origin against their
/// Monte Carlo oracles (shared paths), with the default horizon and step.
pub fn mc_suite(
    params: &EconomyParams,
    table: &DenominatorTable,
    n_paths: usize,
    seed: u64,
) -> Result<(Vec<Check>, Vec<(String, oracle::OracleReport)>)> {
    let state = MarketState::origin();
    let cfg = McConfig::with_defaults(table, state.t, n_paths, seed);
    let (wealths, stock) = oracle::mc_level_oracles(state, params, table, cfg)?;
    let mut reports: Vec<(String, oracle::OracleReport)> = wealths
        .into_iter()
        .enumerate()
        .map(|(j, rep)| (format!("wealth_{}", j + 1), rep))
        .collect();
    reports.push(("stock_price".to_string(), stock));
    // z-scores are meaningless when the simulated integral has infinite variance
    let mut checks = vec![Check::new(
        "mc",
        "finite_variance",
        -oracle::variance_margin(params, table),
        0.0,
    )];
    checks.extend(
        reports
            .iter()
            .map(|(name, rep)| Check::new("mc", name.clone(), rep.z_score.abs(), MAX_ABS_Z)),
    );
    Ok((checks, reports))
}

pub const MARTINGALE_HORIZON: f64 = 10.0;
pub const MARTINGALE_STEPS: usize = 400;

pub fn martingale_suite(
    params: &EconomyParams,
    table: &DenominatorTable,
    n_paths: usize,
    seed: u64,
) -> Result<(Vec<Check>, oracle::OracleReport)> {
    let rep = oracle::martingale_check(params, table, MARTINGALE_HORIZON, MARTINGALE_STEPS, n_paths, seed)?;
    Ok((vec![Check::new("martingale", "discounted_gains", rep.z_score.abs(), MAX_ABS_Z)], rep))
}

/// `true` when every check passed.
pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

/// Draws a validated economy with `J ≤ max_agents`, `R ≤ max_r`, `|α| ≤ 1`,
/// by rejection on the denominator check.
pub fn random_economy(rng: &mut impl Rng, max_agents: usize, max_r: u32) -> (EconomyParams, DenominatorTable) {
    loop {
        let n = rng.random_range(1..=max_agents);
        let r = rng.random_range(2..=max_r);
        let agents = (0..n)
            .map(|_| {
                crate::model::Agent::new(
                    rng.random_range(0.01..0.6),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let params = EconomyParams::new(
            r,
            rng.random_range(0.05..0.3),
            rng.random_range(-0.1..0.1),
            rng.random_range(0.5..2.0),
            agents,
        )
        .expect("sampled parameters are structurally valid");
        if let Ok(table) = crate::model::validate(&params) {
            return (params, table);
        }
    }
}
