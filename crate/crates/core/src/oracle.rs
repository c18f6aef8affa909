//! Monte Carlo oracles for the closed-form wealth and stock price, and the
//! discounted-gains martingale check.
//!
//! The integrands are evaluated straight from the consumption rule and the
//! state price density (`c_u^j ζ_u` and `δ_u ζ_u`); no multinomial sum is used
//! on the simulated side. Integrals over `[t, T]` use the trapezoid rule on an
//! exactly sampled driver. The remainder beyond `T` is added back from its
//! analytic conditional expectation and reported as `truncation_bound`.
//!
//! A composition term behaves like `exp(A X_u - B u)` with `D = B - ½A²`, so
//! its second moment grows like `exp((A² - B)u)`. When `B <= A²` for some
//! composition the simulated integral has infinite variance and the standard
//! error is meaningless; see [`variance_margin`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{self, StateTerms};
use crate::error::{Error, Result};
use crate::model::{DenominatorTable, EconomyParams, MarketState};
use crate::numerics::logsumexp;
use crate::simulate::BrownianWalk;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub estimate: f64,
    pub std_error: f64,
    pub closed_form: f64,
    pub z_score: f64,
    pub n_paths: usize,
    pub truncation_bound: f64,
}

impl OracleReport {
    fn new(samples: &[f64], offset: f64, closed_form: f64, truncation_bound: f64) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std_error = (var / n).sqrt();
        let estimate = mean + offset;
        let z_score = if std_error > 0.0 {
            (estimate - closed_form) / std_error
        } else {
            0.0
        };
        OracleReport {
            estimate,
            std_error,
            closed_form,
            z_score,
            n_paths: samples.len(),
            truncation_bound,
        }
    }

    pub fn passes(&self, max_abs_z: f64) -> bool {
        self.z_score.abs() <= max_abs_z
    }
}

/// Simulation budget for one oracle run. `horizon` is the absolute end time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_paths: usize,
    pub horizon: f64,
    pub n_steps: usize,
    pub seed: u64,
}

impl McConfig {
    /// Horizon `t + max(10, 5 / min D)` and a step keeping `D·dt <= 0.05`
    /// for every composition.
    pub fn with_defaults(table: &DenominatorTable, t: f64, n_paths: usize, seed: u64) -> Self {
        let horizon = default_horizon(table, t);
        McConfig {
            n_paths,
            horizon,
            n_steps: default_steps(table, horizon - t),
            seed,
        }
    }
}

/// `min_β (B(β) - k A(β)²/2)`: positive iff the `k`-th moment of every
/// composition term stays integrable over time.
pub fn moment_margin(params: &EconomyParams, table: &DenominatorTable, order: u32) -> f64 {
    let r = params.risk_aversion() as f64;
    let s = params.sigma();
    let k = order as f64;
    table
        .loadings()
        .iter()
        .zip(table.decays())
        .map(|(a, p)| {
            let load = a + (1.0 - r) * s;
            let decay = p + (0.5 * s * s - params.alpha_star() * s) * (1.0 - r);
            decay - 0.5 * k * load * load
        })
        .fold(f64::INFINITY, f64::min)
}

/// [`moment_margin`] of order 2; the oracles have finite variance only when
/// this is positive.
pub fn variance_margin(params: &EconomyParams, table: &DenominatorTable) -> f64 {
    moment_margin(params, table, 2)
}

pub fn default_horizon(table: &DenominatorTable, t: f64) -> f64 {
    t + f64::max(10.0, 5.0 / table.min_denominator())
}

pub fn default_steps(table: &DenominatorTable, span: f64) -> usize {
    let max_d = table.denominators().iter().copied().fold(0.0, f64::max);
    let dt = f64::min(0.25, 0.05 / max_d);
    (span / dt).ceil().max(1.0) as usize
}

fn check_config(state: MarketState, cfg: &McConfig) -> Result<()> {
    if !(cfg.horizon > state.t) || cfg.n_steps == 0 || cfg.n_paths == 0 {
        return Err(Error::InvalidGrid(format!(
            "need horizon > t and positive steps/paths (T={}, t={}, steps={}, paths={})",
            cfg.horizon, state.t, cfg.n_steps, cfg.n_paths
        )));
    }
    Ok(())
}

/// Trapezoid integral of `exp(log_integrand(u, X_u))` along one path from
/// `state` to `cfg.horizon`; also returns the terminal `X_T`.
fn path_integral<F: Fn(f64, f64) -> f64>(
    log_integrand: &F,
    state: MarketState,
    cfg: &McConfig,
    path_id: u64,
) -> (f64, f64) {
    let dt = (cfg.horizon - state.t) / cfg.n_steps as f64;
    let mut walk = BrownianWalk::new(cfg.seed, path_id, dt);
    let mut x = state.x;
    let mut acc = 0.5 * log_integrand(state.t, x).exp();
    for k in 1..=cfg.n_steps {
        x += walk.step();
        let u = if k == cfg.n_steps {
            cfg.horizon
        } else {
            state.t + k as f64 * dt
        };
        let w = if k == cfg.n_steps { 0.5 } else { 1.0 };
        acc += w * log_integrand(u, x).exp();
    }
    (acc * dt, x)
}

fn run_paths<F>(cfg: &McConfig, per_path: F) -> Vec<f64>
where
    F: Fn(u64) -> f64 + Sync + Send,
{
    // collect in path order so the reduction is independent of thread count
    (0..cfg.n_paths as u64).into_par_iter().map(per_path).collect()
}

/// Expected contribution of `[T, ∞)` to agent `j`'s wealth at `state`.
pub fn wealth_tail(
    state: MarketState,
    params: &EconomyParams,
    table: &DenominatorTable,
    j: usize,
    horizon: f64,
) -> Result<f64> {
    params.agent(j)?;
    let terms = StateTerms::new(state, params, table);
    let pre = level_prefactor(state, params);
    let span = horizon - state.t;
    let logs: Vec<f64> = table
        .agent_terms(j)
        .iter()
        .map(|&(k, log_c)| {
            log_c + terms.exponents[k] - table.log_denominators()[k] - table.denominators()[k] * span
        })
        .collect();
    Ok((pre + logsumexp(&logs)).exp())
}

/// Expected contribution of `[T, ∞)` to the stock price at `state`.
pub fn stock_tail(state: MarketState, params: &EconomyParams, table: &DenominatorTable, horizon: f64) -> f64 {
    let terms = StateTerms::new(state, params, table);
    let pre = level_prefactor(state, params);
    let span = horizon - state.t;
    let logs: Vec<f64> = terms
        .z_log_weights()
        .iter()
        .zip(table.denominators())
        .map(|(lw, d)| lw - d * span)
        .collect();
    (pre + logsumexp(&logs)).exp()
}

fn level_prefactor(state: MarketState, params: &EconomyParams) -> f64 {
    let r = params.risk_aversion() as f64;
    (1.0 - r) * params.log_dividend(state.t, state.x) - equilibrium::log_state_price_density(state, params)
}

/// `log(c_u^j ζ_u) = (1-R) log δ_u + (R-1) logsumexp_i yᵢ + y_j`.
fn log_consumption_value(params: &EconomyParams, j: usize, u: f64, x: f64) -> f64 {
    let r = params.risk_aversion() as f64;
    let ys = params.agent_log_weights(u, x);
    (1.0 - r) * params.log_dividend(u, x) + (r - 1.0) * logsumexp(&ys) + ys[j]
}

/// `log(δ_u ζ_u) = (1-R) log δ_u + R logsumexp_i yᵢ`.
fn log_dividend_value(params: &EconomyParams, u: f64, x: f64) -> f64 {
    let r = params.risk_aversion() as f64;
    (1.0 - r) * params.log_dividend(u, x) + r * logsumexp(&params.agent_log_weights(u, x))
}

/// Monte Carlo of `ζ_t^{-1} E_t[∫_t^∞ c_u^j ζ_u du]` against the closed-form wealth.
pub fn mc_wealth_oracle(
    state: MarketState,
    params: &EconomyParams,
    table: &DenominatorTable,
    j: usize,
    cfg: McConfig,
) -> Result<OracleReport> {
    params.agent(j)?;
    check_config(state, &cfg)?;
    let closed_form = equilibrium::wealth(state, params, table, j)?;
    let tail = wealth_tail(state, params, table, j, cfg.horizon)?;
    if tail > 0.1 * closed_form {
        return Err(Error::TruncationTooLoose {
            bound: tail,
            closed_form,
        });
    }
    let log_zeta_t = equilibrium::log_state_price_density(state, params);
    let integrand = |u: f64, x: f64| log_consumption_value(params, j, u, x) - log_zeta_t;
    let samples = run_paths(&cfg, |i| path_integral(&integrand, state, &cfg, i).0);
    Ok(OracleReport::new(&samples, tail, closed_form, tail))
}

/// Monte Carlo of `ζ_t^{-1} E_t[∫_t^∞ δ_u ζ_u du]` against the closed-form price.
pub fn mc_stock_oracle(
    state: MarketState,
    params: &EconomyParams,
    table: &DenominatorTable,
    cfg: McConfig,
) -> Result<OracleReport> {
    check_config(state, &cfg)?;
    let closed_form = equilibrium::stock_price(state, params, table);
    let tail = stock_tail(state, params, table, cfg.horizon);
    if tail > 0.1 * closed_form {
        return Err(Error::TruncationTooLoose {
            bound: tail,
            closed_form,
        });
    }
    let log_zeta_t = equilibrium::log_state_price_density(state, params);
    let integrand = |u: f64, x: f64| log_dividend_value(params, u, x) - log_zeta_t;
    let samples = run_paths(&cfg, |i| path_integral(&integrand, state, &cfg, i).0);
    Ok(OracleReport::new(&samples, tail, closed_form, tail))
}

/// Every agent's wealth oracle and the stock oracle from one set of paths.
///
/// Each report is a valid oracle on its own; they are correlated with each
/// other because the draws are shared.
pub fn mc_level_oracles(
    state: MarketState,
    params: &EconomyParams,
    table: &DenominatorTable,
    cfg: McConfig,
) -> Result<(Vec<OracleReport>, OracleReport)> {
    check_config(state, &cfg)?;
    let n = params.n_agents();
    let mut closed = equilibrium::wealths(state, params, table);
    closed.push(equilibrium::stock_price(state, params, table));
    let mut tails = (0..n)
        .map(|j| wealth_tail(state, params, table, j, cfg.horizon))
        .collect::<Result<Vec<_>>>()?;
    tails.push(stock_tail(state, params, table, cfg.horizon));
    for (&bound, &closed_form) in tails.iter().zip(&closed) {
        if bound > 0.1 * closed_form {
            return Err(Error::TruncationTooLoose { bound, closed_form });
        }
    }

    let r = params.risk_aversion() as f64;
    let log_zeta_t = equilibrium::log_state_price_density(state, params);
    let dt = (cfg.horizon - state.t) / cfg.n_steps as f64;
    let per_path: Vec<Vec<f64>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut walk = BrownianWalk::new(cfg.seed, i, dt);
            let mut acc = vec![0.0; n + 1];
            let mut x = state.x;
            for k in 0..=cfg.n_steps {
                if k > 0 {
                    x += walk.step();
                }
                let u = if k == cfg.n_steps { cfg.horizon } else { state.t + k as f64 * dt };
                let w = if k == 0 || k == cfg.n_steps { 0.5 } else { 1.0 };
                let ys = params.agent_log_weights(u, x);
                let lse = logsumexp(&ys);
                let base = (1.0 - r) * params.log_dividend(u, x) + (r - 1.0) * lse - log_zeta_t;
                for j in 0..n {
                    acc[j] += w * (base + ys[j]).exp();
                }
                acc[n] += w * (base + lse).exp();
            }
            acc.iter().map(|a| a * dt).collect()
        })
        .collect();

    let mut reports: Vec<OracleReport> = (0..=n)
        .map(|q| {
            let samples: Vec<f64> = per_path.iter().map(|v| v[q]).collect();
            OracleReport::new(&samples, tails[q], closed[q], tails[q])
        })
        .collect();
    let stock = reports.pop().expect("stock report");
    Ok((reports, stock))
}

/// Checks `E[ζ_T S_T + ∫_0^T ζ_u δ_u du] = ζ_0 S_0` from the origin. Both
/// sides are reported divided by `ζ_0`, so `closed_form` is `S_0`.
pub fn martingale_check(
    params: &EconomyParams,
    table: &DenominatorTable,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<OracleReport> {
    let start = MarketState::origin();
    let cfg = McConfig {
        n_paths,
        horizon,
        n_steps,
        seed,
    };
    check_config(start, &cfg)?;
    let closed_form = equilibrium::stock_price(start, params, table);
    let log_zeta_0 = equilibrium::log_state_price_density(start, params);
    let integrand = |u: f64, x: f64| log_dividend_value(params, u, x) - log_zeta_0;
    let samples = run_paths(&cfg, |i| {
        let (integral, x_t) = path_integral(&integrand, start, &cfg, i);
        let end = MarketState { t: horizon, x: x_t };
        let log_zeta_t = equilibrium::log_state_price_density(end, params);
        let s_t = equilibrium::stock_price(end, params, table);
        integral + (log_zeta_t - log_zeta_0).exp() * s_t
    });
    Ok(OracleReport::new(&samples, 0.0, closed_form, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate, Agent};

    fn benchmark() -> EconomyParams {
        EconomyParams::new(2, 0.1, 0.0, 1.0, vec![Agent::new(0.02, 0.0, 0.0)]).unwrap()
    }

    #[test]
    fn hand_integral_matches_closed_form() {
        // ∫_0^∞ E[ζ_u δ_u] du = ∫ e^{-0.01u} du = 100 for the benchmark economy;
        // E[ζ_u δ_u] = e^{-0.02u} E[e^{-0.1 X_u}] e^{0.005u} = e^{-0.01u}
        let p = benchmark();
        let table = validate(&p).unwrap();
        let s = equilibrium::stock_price(MarketState::origin(), &p, &table);
        assert!((s - 100.0).abs() < 1e-10);
        let tail = stock_tail(MarketState::origin(), &p, &table, 300.0);
        assert!((tail - 100.0 * (-3.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn tail_decreases_with_horizon() {
        let p = EconomyParams::new(
            3,
            0.1,
            0.02,
            1.0,
            vec![Agent::new(0.1, 0.2, 0.0), Agent::new(0.08, -0.1, 0.3)],
        )
        .unwrap();
        let table = validate(&p).unwrap();
        let s = MarketState::new(1.0, 0.2).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..8 {
            let horizon = 1.0 + 5.0 * 2f64.powi(k);
            let b = stock_tail(s, &p, &table, horizon);
            let w = wealth_tail(s, &p, &table, 1, horizon).unwrap();
            assert!(b <= prev && w <= b);
            prev = b;
        }
        let total: f64 = (0..2).map(|j| wealth_tail(s, &p, &table, j, 7.0).unwrap()).sum();
        assert!((total - stock_tail(s, &p, &table, 7.0)).abs() <= 1e-10 * total);
    }

    #[test]
    fn variance_margin_examples() {
        // B = 0.015, A = -0.1
        let table = validate(&benchmark()).unwrap();
        assert!((variance_margin(&benchmark(), &table) - 0.005).abs() < 1e-15);
        // β = (0, 3): B = 0.145 - 0.01, A = -0.5
        let p = EconomyParams::new(
            3,
            0.1,
            0.0,
            1.0,
            vec![Agent::new(0.1, 0.3, 0.0), Agent::new(0.1, -0.3, 0.0)],
        )
        .unwrap();
        let table = validate(&p).unwrap();
        assert!((variance_margin(&p, &table) + 0.115).abs() < 1e-14);
    }

    #[test]
    fn loose_truncation_is_rejected() {
        let p = benchmark();
        let table = validate(&p).unwrap();
        let cfg = McConfig {
            n_paths: 10,
            horizon: 50.0,
            n_steps: 50,
            seed: 0,
        };
        assert!(matches!(
            mc_stock_oracle(MarketState::origin(), &p, &table, cfg),
            Err(Error::TruncationTooLoose { .. })
        ));
    }

    #[test]
    fn stock_oracle_is_linear_in_delta0() {
        let p = benchmark();
        let table = validate(&p).unwrap();
        let cfg = McConfig {
            n_paths: 200,
            horizon: 400.0,
            n_steps: 400,
            seed: 3,
        };
        let a = mc_stock_oracle(MarketState::origin(), &p, &table, cfg).unwrap();
        let b = mc_stock_oracle(MarketState::origin(), &p.with_delta0(2.5).unwrap(), &table, cfg).unwrap();
        assert!((b.estimate - 2.5 * a.estimate).abs() <= 1e-10 * b.estimate);
    }

    #[test]
    fn joint_oracles_match_single_ones() {
        let p = EconomyParams::new(
            2,
            0.1,
            0.0,
            1.0,
            vec![Agent::new(0.1, 0.2, 0.0), Agent::new(0.12, -0.1, 0.2)],
        )
        .unwrap();
        let table = validate(&p).unwrap();
        let s = MarketState::new(0.5, 0.1).unwrap();
        let cfg = McConfig {
            n_paths: 300,
            horizon: 80.0,
            n_steps: 320,
            seed: 8,
        };
        let (wealths, stock) = mc_level_oracles(s, &p, &table, cfg).unwrap();
        let w1 = mc_wealth_oracle(s, &p, &table, 1, cfg).unwrap();
        let st = mc_stock_oracle(s, &p, &table, cfg).unwrap();
        assert!((wealths[1].estimate - w1.estimate).abs() <= 1e-10 * w1.estimate);
        assert!((stock.estimate - st.estimate).abs() <= 1e-10 * st.estimate);
        // consumption integrands sum to the dividend integrand path by path
        let total: f64 = wealths.iter().map(|r| r.estimate).sum();
        assert!((total - stock.estimate).abs() <= 1e-10 * total);
    }

    #[test]
    fn martingale_short_horizon_is_exact() {
        let p = EconomyParams::new(
            3,
            0.1,
            0.0,
            1.0,
            vec![Agent::new(0.1, 0.2, 0.0), Agent::new(0.1, -0.2, 0.0)],
        )
        .unwrap();
        let table = validate(&p).unwrap();
        let rep = martingale_check(&p, &table, 1e-10, 1, 50, 1).unwrap();
        assert!((rep.estimate - rep.closed_form).abs() <= 1e-6 * rep.closed_form);
    }

    #[test]
    fn small_benchmark_run() {
        let p = benchmark();
        let table = validate(&p).unwrap();
        let cfg = McConfig::with_defaults(&table, 0.0, 4000, 17);
        assert!((cfg.horizon - 500.0).abs() < 1e-9);
        let rep = mc_wealth_oracle(MarketState::origin(), &p, &table, 0, cfg).unwrap();
        assert_eq!(rep.closed_form, equilibrium::wealth(MarketState::origin(), &p, &table, 0).unwrap());
        assert!(rep.z_score.abs() <= 4.0, "{rep:?}");
        assert!((rep.z_score - (rep.estimate - rep.closed_form) / rep.std_error).abs() < 1e-12);
    }
}
