//! Level quantities of the equilibrium: state price density, consumption,
//! wealth, stock price and price-dividend ratio.

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, RateBundle, StockDynamics};
use crate::error::{Error, Result};
use crate::model::{DenominatorTable, EconomyParams, MarketState};
use crate::numerics::{logsumexp, softmax};

/// Everything evaluated at one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSnapshot {
    pub state: MarketState,
    pub dividend: f64,
    pub zeta: f64,
    pub consumptions: Vec<f64>,
    pub wealths: Vec<f64>,
    pub stock_price: f64,
    pub pd_ratio: f64,
    pub rates: RateBundle,
    pub stock: StockDynamics,
    pub agent_alpha_tilde: Vec<f64>,
    pub portfolios: Vec<f64>,
}

/// Per-state exponents `(α·β/R)X - γ·β/R - [ρ·β/R + α²·β/(2R)]t` for every
/// composition of `R`, shared by all β-sums at that state.
pub(crate) struct StateTerms<'a> {
    pub(crate) table: &'a DenominatorTable,
    pub(crate) exponents: Vec<f64>,
}

impl<'a> StateTerms<'a> {
    pub(crate) fn new(state: MarketState, params: &EconomyParams, table: &'a DenominatorTable) -> Self {
        assert!(
            table.matches(params),
            "denominator table was built for a different economy shape"
        );
        let r = params.risk_aversion() as f64;
        let gammas = params.gammas();
        let exponents = table
            .compositions()
            .iter()
            .zip(table.loadings().iter().zip(table.decays()))
            .map(|(beta, (&a, &p))| a * state.x - beta.dot(&gammas) / r - p * state.t)
            .collect();
        StateTerms { table, exponents }
    }

    /// log weights of `L_t`.
    pub(crate) fn l_log_weights(&self) -> Vec<f64> {
        self.exponents
            .iter()
            .zip(self.table.log_coefficients())
            .map(|(e, c)| e + c)
            .collect()
    }

    /// log weights of `Z_t`.
    pub(crate) fn z_log_weights(&self) -> Vec<f64> {
        self.exponents
            .iter()
            .zip(self.table.log_coefficients())
            .zip(self.table.log_denominators())
            .map(|((e, c), d)| e + c - d)
            .collect()
    }

    /// log weights of `Z_t^j`, paired with the loading `(α_j + α·β')/R`.
    pub(crate) fn agent_log_weights(&self, j: usize) -> (Vec<f64>, Vec<f64>) {
        let terms = self.table.agent_terms(j);
        let mut lw = Vec::with_capacity(terms.len());
        let mut loads = Vec::with_capacity(terms.len());
        for &(k, log_c) in terms {
            lw.push(log_c + self.exponents[k] - self.table.log_denominators()[k]);
            loads.push(self.table.loadings()[k]);
        }
        (lw, loads)
    }

    pub(crate) fn log_z_agent(&self, j: usize) -> f64 {
        logsumexp(&self.agent_log_weights(j).0)
    }

    pub(crate) fn log_z(&self) -> f64 {
        logsumexp(&self.z_log_weights())
    }
}

fn check_agent(params: &EconomyParams, j: usize) -> Result<()> {
    if j >= params.n_agents() {
        return Err(Error::AgentIndex {
            index: j,
            n_agents: params.n_agents(),
        });
    }
    Ok(())
}

/// `log ζ_t = -R log δ_t + R logsumexp_i((-ρᵢt - γᵢ + αᵢX_t - ½αᵢ²t)/R)`.
pub fn log_state_price_density(state: MarketState, params: &EconomyParams) -> f64 {
    let r = params.risk_aversion() as f64;
    -r * params.log_dividend(state.t, state.x) + r * logsumexp(&params.agent_log_weights(state.t, state.x))
}

pub fn state_price_density(state: MarketState, params: &EconomyParams) -> f64 {
    log_state_price_density(state, params).exp()
}

/// Agent `j`'s consumption: its softmax share of the current dividend.
pub fn consumption(state: MarketState, params: &EconomyParams, j: usize) -> Result<f64> {
    check_agent(params, j)?;
    Ok(consumptions(state, params)[j])
}

pub fn consumptions(state: MarketState, params: &EconomyParams) -> Vec<f64> {
    let delta = params.log_dividend(state.t, state.x).exp();
    softmax(&params.agent_log_weights(state.t, state.x))
        .into_iter()
        .map(|w| w * delta)
        .collect()
}

/// Consumption directly from the first-order condition,
/// `ζ^{-1/R} (e^{-ρ_j t} Λ_t^j / ν_j)^{1/R}`, without the softmax rewrite.
pub fn consumption_from_foc(state: MarketState, params: &EconomyParams, j: usize) -> Result<f64> {
    let agent = params.agent(j)?;
    let r = params.risk_aversion() as f64;
    let log_zeta = log_state_price_density(state, params);
    Ok((-log_zeta / r + params.agent_log_weight(agent, state.t, state.x)).exp())
}

fn log_level_prefactor(state: MarketState, params: &EconomyParams) -> f64 {
    // δ_t^{1-R} ζ_t^{-1}
    let r = params.risk_aversion() as f64;
    (1.0 - r) * params.log_dividend(state.t, state.x) - log_state_price_density(state, params)
}

/// Agent `j`'s wealth as the order-`R-1` multinomial sum.
pub fn wealth(
    state: MarketState,
    params: &EconomyParams,
    table: &DenominatorTable,
    j: usize,
) -> Result<f64> {
    check_agent(params, j)?;
    let terms = StateTerms::new(state, params, table);
    Ok((log_level_prefactor(state, params) + terms.log_z_agent(j)).exp())
}

pub fn wealths(state: MarketState, params: &EconomyParams, table: &DenominatorTable) -> Vec<f64> {
    let terms = StateTerms::new(state, params, table);
    let pre = log_level_prefactor(state, params);
    (0..params.n_agents())
        .map(|j| (pre + terms.log_z_agent(j)).exp())
        .collect()
}

/// Stock price as the order-`R` multinomial sum.
pub fn stock_price(state: MarketState, params: &EconomyParams, table: &DenominatorTable) -> f64 {
    let terms = StateTerms::new(state, params, table);
    (log_level_prefactor(state, params) + terms.log_z()).exp()
}

/// Price-dividend ratio evaluated without reference to `δ_t`.
pub fn pd_ratio(state: MarketState, params: &EconomyParams, table: &DenominatorTable) -> f64 {
    let r = params.risk_aversion() as f64;
    let terms = StateTerms::new(state, params, table);
    let log_norm = r * logsumexp(&params.agent_log_weights(state.t, state.x));
    (terms.log_z() - log_norm).exp()
}

/// All level and dynamic quantities at one state.
pub fn snapshot(
    state: MarketState,
    params: &EconomyParams,
    table: &DenominatorTable,
) -> Result<EquilibriumSnapshot> {
    let terms = StateTerms::new(state, params, table);
    let r = params.risk_aversion() as f64;
    let log_delta = params.log_dividend(state.t, state.x);
    let log_zeta = log_state_price_density(state, params);
    let pre = (1.0 - r) * log_delta - log_zeta;
    let n = params.n_agents();

    let consumptions = consumptions(state, params);
    let wealths: Vec<f64> = (0..n).map(|j| (pre + terms.log_z_agent(j)).exp()).collect();
    let log_z = terms.log_z();
    let stock_price = (pre + log_z).exp();
    let log_norm = r * logsumexp(&params.agent_log_weights(state.t, state.x));
    let pd_ratio = (log_z - log_norm).exp();

    let rates = dynamics::rates_from_terms(&terms, params);
    let stock = dynamics::stock_from_terms(&terms, params, &rates);
    let agent_alpha_tilde: Vec<f64> = (0..n).map(|j| dynamics::agent_alpha_tilde_from_terms(&terms, j)).collect();
    let portfolios = dynamics::portfolios_from_parts(
        params,
        &rates,
        &stock,
        &agent_alpha_tilde,
        &wealths,
        stock_price,
    )?;

    Ok(EquilibriumSnapshot {
        state,
        dividend: log_delta.exp(),
        zeta: log_zeta.exp(),
        consumptions,
        wealths,
        stock_price,
        pd_ratio,
        rates,
        stock,
        agent_alpha_tilde,
        portfolios,
    })
}
