//! Itô coefficients of `L_t = δ_t^R ζ_t`, of `ζ_t`, of the stock price and of
//! each agent's wealth, and the portfolios they imply.

use serde::{Deserialize, Serialize};

use crate::equilibrium::StateTerms;
use crate::error::{Error, Result};
use crate::model::{DenominatorTable, EconomyParams, MarketState};
use crate::numerics::{logsumexp, weighted_mean};

/// Below this the stock has no diffusion and portfolios are undefined.
pub const DEGENERATE_VOL: f64 = 1e-12;

/// Coefficients of `dL = L(ᾱ dX - ρ̄ dt)` and `dζ = ζ(-r dt - κ dX)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBundle {
    pub alpha_bar: f64,
    pub rho_bar: f64,
    pub riskless_rate: f64,
    pub kappa: f64,
}

/// Coefficients of `dZ = Z(α̃ dX - ρ̃ dt)` and `dS = S(vol dX + drift dt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StockDynamics {
    pub alpha_tilde: f64,
    pub rho_tilde: f64,
    pub vol: f64,
    pub drift: f64,
}

pub(crate) fn rates_from_terms(terms: &StateTerms<'_>, params: &EconomyParams) -> RateBundle {
    let table = terms.table;
    let lw = terms.l_log_weights();
    let alpha_bar = weighted_mean(&lw, table.loadings());
    let rho_bar = weighted_mean(&lw, &drift_rates(table));
    assemble_rates(params, alpha_bar, rho_bar)
}

/// `r` and `κ` from `ᾱ` and `ρ̄`.
pub fn assemble_rates(params: &EconomyParams, alpha_bar: f64, rho_bar: f64) -> RateBundle {
    let r = params.risk_aversion() as f64;
    let s = params.sigma();
    RateBundle {
        alpha_bar,
        rho_bar,
        riskless_rate: rho_bar + r * s * (params.alpha_star() + alpha_bar) - 0.5 * s * s * r * (r + 1.0),
        kappa: r * s - alpha_bar,
    }
}

// ρ·β/R + α²·β/(2R) - ½(α·β/R)² per composition
fn drift_rates(table: &DenominatorTable) -> Vec<f64> {
    table
        .decays()
        .iter()
        .zip(table.loadings())
        .map(|(p, a)| p - 0.5 * a * a)
        .collect()
}

pub(crate) fn stock_from_terms(
    terms: &StateTerms<'_>,
    params: &EconomyParams,
    rates: &RateBundle,
) -> StockDynamics {
    let table = terms.table;
    let zw = terms.z_log_weights();
    let alpha_tilde = weighted_mean(&zw, table.loadings());
    let rho_tilde = weighted_mean(&zw, &drift_rates(table));
    let s = params.sigma();
    let spread = alpha_tilde - rates.alpha_bar;
    StockDynamics {
        alpha_tilde,
        rho_tilde,
        vol: s + spread,
        drift: rates.rho_bar - rho_tilde + s * params.alpha_star() + spread * (s - rates.alpha_bar),
    }
}

pub(crate) fn agent_alpha_tilde_from_terms(terms: &StateTerms<'_>, j: usize) -> f64 {
    let (lw, loads) = terms.agent_log_weights(j);
    weighted_mean(&lw, &loads)
}

pub(crate) fn portfolios_from_parts(
    params: &EconomyParams,
    rates: &RateBundle,
    stock: &StockDynamics,
    agent_alpha_tilde: &[f64],
    wealths: &[f64],
    stock_price: f64,
) -> Result<Vec<f64>> {
    if stock.vol.abs() < DEGENERATE_VOL {
        return Err(Error::DegenerateStockVolatility {
            value: stock.vol,
            node: None,
        });
    }
    let s = params.sigma();
    Ok(wealths
        .iter()
        .zip(agent_alpha_tilde)
        .map(|(w, at)| w * (s + at - rates.alpha_bar) / (stock_price * stock.vol))
        .collect())
}

/// `log L_t`.
pub fn log_l(state: MarketState, params: &EconomyParams, table: &DenominatorTable) -> f64 {
    logsumexp(&StateTerms::new(state, params, table).l_log_weights())
}

/// `log Z_t`.
pub fn log_z(state: MarketState, params: &EconomyParams, table: &DenominatorTable) -> f64 {
    StateTerms::new(state, params, table).log_z()
}

/// `log Z_t^j`.
pub fn log_z_agent(
    state: MarketState,
    params: &EconomyParams,
    table: &DenominatorTable,
    j: usize,
) -> Result<f64> {
    params.agent(j)?;
    Ok(StateTerms::new(state, params, table).log_z_agent(j))
}

pub fn rate_bundle(state: MarketState, params: &EconomyParams, table: &DenominatorTable) -> RateBundle {
    rates_from_terms(&StateTerms::new(state, params, table), params)
}

pub fn stock_dynamics(state: MarketState, params: &EconomyParams, table: &DenominatorTable) -> StockDynamics {
    let terms = StateTerms::new(state, params, table);
    let rates = rates_from_terms(&terms, params);
    stock_from_terms(&terms, params, &rates)
}

/// `α̃_t^j`, the diffusion loading of `Z_t^j`.
pub fn agent_dynamics(
    state: MarketState,
    params: &EconomyParams,
    table: &DenominatorTable,
    j: usize,
) -> Result<f64> {
    params.agent(j)?;
    Ok(agent_alpha_tilde_from_terms(&StateTerms::new(state, params, table), j))
}

/// Units of the risky asset held by agent `j`.
pub fn portfolio(
    state: MarketState,
    params: &EconomyParams,
    table: &DenominatorTable,
    j: usize,
) -> Result<f64> {
    params.agent(j)?;
    Ok(portfolios(state, params, table)?[j])
}

pub fn portfolios(state: MarketState, params: &EconomyParams, table: &DenominatorTable) -> Result<Vec<f64>> {
    let snap = crate::equilibrium::snapshot(state, params, table)?;
    Ok(snap.portfolios)
}
