//! Economy parameters, the Markov state, the exogenous processes and the
//! per-composition denominator table that gates every closed form.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiindex::{enumerate_compositions_capped, LogFactorials, MultiIndex, DEFAULT_COMPOSITION_CAP};

/// One agent: discount rate, belief loading on the Brownian driver, and the
/// log of its weight in the state price density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Agent {
    pub rho: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl Agent {
    pub fn new(rho: f64, alpha: f64, gamma: f64) -> Self {
        Agent { rho, alpha, gamma }
    }
}

/// Market-wide data plus the agent list.
///
/// Deserializes from the JSON config format
/// `{"R": 3, "sigma": .., "alpha_star": .., "delta0": .., "agents": [{"rho", "alpha", "gamma"}]}`
/// and rejects unknown keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct EconomyParams {
    #[serde(rename = "R")]
    risk_aversion: u32,
    sigma: f64,
    alpha_star: f64,
    delta0: f64,
    agents: Vec<Agent>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(rename = "R")]
    risk_aversion: serde_json::Number,
    sigma: f64,
    alpha_star: f64,
    delta0: f64,
    agents: Vec<Agent>,
}

impl TryFrom<RawParams> for EconomyParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        let r = raw
            .risk_aversion
            .as_u64()
            .filter(|&r| r >= 2 && r <= u32::MAX as u64)
            .ok_or_else(|| {
                Error::InvalidParams(format!(
                    "model requires integer R >= 2 (got {})",
                    raw.risk_aversion
                ))
            })?;
        EconomyParams::new(r as u32, raw.sigma, raw.alpha_star, raw.delta0, raw.agents)
    }
}

impl EconomyParams {
    pub fn new(
        risk_aversion: u32,
        sigma: f64,
        alpha_star: f64,
        delta0: f64,
        agents: Vec<Agent>,
    ) -> Result<Self> {
        if risk_aversion < 2 {
            return Err(Error::InvalidParams(format!(
                "model requires integer R >= 2 (got {risk_aversion})"
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParams(format!("sigma must be positive, got {sigma}")));
        }
        if !alpha_star.is_finite() {
            return Err(Error::InvalidParams("alpha_star must be finite".into()));
        }
        if !(delta0.is_finite() && delta0 > 0.0) {
            return Err(Error::InvalidParams(format!("delta0 must be positive, got {delta0}")));
        }
        if agents.is_empty() {
            return Err(Error::InvalidParams("at least one agent is required".into()));
        }
        for (j, a) in agents.iter().enumerate() {
            if !(a.rho.is_finite() && a.alpha.is_finite() && a.gamma.is_finite()) {
                return Err(Error::InvalidParams(format!("agent {} has a non-finite field", j + 1)));
            }
        }
        Ok(EconomyParams {
            risk_aversion,
            sigma,
            alpha_star,
            delta0,
            agents,
        })
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn risk_aversion(&self) -> u32 {
        self.risk_aversion
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn alpha_star(&self) -> f64 {
        self.alpha_star
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agent(&self, j: usize) -> Result<&Agent> {
        self.agents.get(j).ok_or(Error::AgentIndex {
            index: j,
            n_agents: self.agents.len(),
        })
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.gamma).collect()
    }

    /// Same economy with the agent weights replaced.
    pub fn with_gammas(&self, gammas: &[f64]) -> Result<Self> {
        if gammas.len() != self.agents.len() {
            return Err(Error::InvalidParams(format!(
                "expected {} weights, got {}",
                self.agents.len(),
                gammas.len()
            )));
        }
        let agents = self
            .agents
            .iter()
            .zip(gammas)
            .map(|(a, &g)| Agent { gamma: g, ..*a })
            .collect();
        EconomyParams::new(self.risk_aversion, self.sigma, self.alpha_star, self.delta0, agents)
    }

    pub fn with_delta0(&self, delta0: f64) -> Result<Self> {
        EconomyParams::new(self.risk_aversion, self.sigma, self.alpha_star, delta0, self.agents.clone())
    }

    pub fn with_risk_aversion(&self, risk_aversion: u32) -> Result<Self> {
        EconomyParams::new(risk_aversion, self.sigma, self.alpha_star, self.delta0, self.agents.clone())
    }

    /// The exponent of agent `i`'s term in the state price density,
    /// `(-ρᵢt - γᵢ + αᵢX_t - ½αᵢ²t) / R`.
    pub(crate) fn agent_log_weight(&self, agent: &Agent, t: f64, x: f64) -> f64 {
        (-agent.rho * t - agent.gamma + agent.alpha * x - 0.5 * agent.alpha * agent.alpha * t)
            / self.risk_aversion as f64
    }

    pub(crate) fn agent_log_weights(&self, t: f64, x: f64) -> Vec<f64> {
        self.agents.iter().map(|a| self.agent_log_weight(a, t, x)).collect()
    }

    pub(crate) fn log_dividend(&self, t: f64, x: f64) -> f64 {
        let s = self.sigma;
        self.delta0.ln() + s * x + (self.alpha_star * s - 0.5 * s * s) * t
    }
}

/// Markov state `(t, X_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub t: f64,
    pub x: f64,
}

impl MarketState {
    pub fn new(t: f64, x: f64) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0 && x.is_finite()) {
            return Err(Error::InvalidParams(format!("invalid state (t={t}, x={x})")));
        }
        Ok(MarketState { t, x })
    }

    pub fn origin() -> Self {
        MarketState { t: 0.0, x: 0.0 }
    }
}

/// Change-of-measure density of an agent, `exp(αX_t - ½α²t)`.
pub fn lambda_j(state: MarketState, agent: &Agent) -> f64 {
    (agent.alpha * state.x - 0.5 * agent.alpha * agent.alpha * state.t).exp()
}

pub fn dividend(state: MarketState, params: &EconomyParams) -> f64 {
    params.log_dividend(state.t, state.x).exp()
}

/// Precomputed data for every composition `β` of `R` over the agents.
///
/// Holds the multinomial log-coefficients, the loadings `α·β/R`, the
/// deterministic decay rates `ρ·β/R + α²·β/(2R)` and the time-integral
/// denominators `D(β)`, all of which are independent of the weights `γ`.
/// The order-`R-1` sums for agent `j` reuse the same entries through
/// `β' + e_j`.
#[derive(Debug, Clone)]
pub struct DenominatorTable {
    risk_aversion: u32,
    n_agents: usize,
    compositions: Vec<MultiIndex>,
    log_coefficients: Vec<f64>,
    loadings: Vec<f64>,
    decays: Vec<f64>,
    denominators: Vec<f64>,
    log_denominators: Vec<f64>,
    agent_terms: Vec<Vec<(usize, f64)>>,
    footnote_margin: f64,
}

impl DenominatorTable {
    pub fn risk_aversion(&self) -> u32 {
        self.risk_aversion
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn compositions(&self) -> &[MultiIndex] {
        &self.compositions
    }

    pub fn len(&self) -> usize {
        self.compositions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.compositions.is_empty()
    }

    pub fn denominators(&self) -> &[f64] {
        &self.denominators
    }

    pub fn log_coefficients(&self) -> &[f64] {
        &self.log_coefficients
    }

    pub fn loadings(&self) -> &[f64] {
        &self.loadings
    }

    pub fn decays(&self) -> &[f64] {
        &self.decays
    }

    pub fn log_denominators(&self) -> &[f64] {
        &self.log_denominators
    }

    /// `(index of β'+e_j, log C(R-1, β'))` for every `|β'| = R-1`.
    pub fn agent_terms(&self, j: usize) -> &[(usize, f64)] {
        &self.agent_terms[j]
    }

    pub fn denominator(&self, beta: &MultiIndex) -> Option<f64> {
        self.compositions
            .iter()
            .position(|b| b == beta)
            .map(|k| self.denominators[k])
    }

    pub fn min_denominator(&self) -> f64 {
        self.denominators.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Left-hand side of the sufficient finiteness condition
    /// `minᵢ(ρᵢ + αᵢ²/2) + (σ²/2 - α*σ)(1-R) - ½ maxᵢ((R-1)σ - αᵢ)²`.
    pub fn footnote_margin(&self) -> f64 {
        self.footnote_margin
    }

    pub fn footnote_condition_holds(&self) -> bool {
        self.footnote_margin >= 0.0
    }

    pub(crate) fn matches(&self, params: &EconomyParams) -> bool {
        self.risk_aversion == params.risk_aversion && self.n_agents == params.agents.len()
    }
}

/// `D(β)` for a composition of `R`.
pub fn denominator(params: &EconomyParams, beta: &MultiIndex) -> f64 {
    let r = params.risk_aversion as f64;
    let (loading, decay) = loading_and_decay(params, beta);
    let s = params.sigma;
    decay + (0.5 * s * s - params.alpha_star * s) * (1.0 - r)
        - 0.5 * (loading + (1.0 - r) * s).powi(2)
}

fn loading_and_decay(params: &EconomyParams, beta: &MultiIndex) -> (f64, f64) {
    let r = params.risk_aversion as f64;
    let mut a = 0.0;
    let mut p = 0.0;
    for (&b, agent) in beta.parts().iter().zip(&params.agents) {
        let b = b as f64;
        a += b * agent.alpha;
        p += b * (agent.rho + 0.5 * agent.alpha * agent.alpha);
    }
    (a / r, p / r)
}

/// Sufficient condition margin for the wealth integrals to be finite.
pub fn footnote_margin(params: &EconomyParams) -> f64 {
    let r = params.risk_aversion as f64;
    let s = params.sigma;
    let min_decay = params
        .agents
        .iter()
        .map(|a| a.rho + 0.5 * a.alpha * a.alpha)
        .fold(f64::INFINITY, f64::min);
    let max_sq = params
        .agents
        .iter()
        .map(|a| ((r - 1.0) * s - a.alpha).powi(2))
        .fold(f64::NEG_INFINITY, f64::max);
    min_decay + (0.5 * s * s - params.alpha_star * s) * (1.0 - r) - 0.5 * max_sq
}

/// Builds the denominator table, failing if any `D(β) <= 0`.
pub fn validate(params: &EconomyParams) -> Result<DenominatorTable> {
    validate_with_cap(params, DEFAULT_COMPOSITION_CAP)
}

pub fn validate_with_cap(params: &EconomyParams, cap: u64) -> Result<DenominatorTable> {
    let r = params.risk_aversion;
    let n = params.agents.len();
    let compositions = enumerate_compositions_capped(n, r, cap)?;
    let lf = LogFactorials::up_to(r);

    let mut log_coefficients = Vec::with_capacity(compositions.len());
    let mut loadings = Vec::with_capacity(compositions.len());
    let mut decays = Vec::with_capacity(compositions.len());
    let mut denominators = Vec::with_capacity(compositions.len());
    let mut offending = Vec::new();
    for beta in &compositions {
        let (a, p) = loading_and_decay(params, beta);
        let d = denominator(params, beta);
        if !(d > 0.0) {
            offending.push((beta.parts().to_vec(), d));
        }
        log_coefficients.push(lf.log_multinomial(beta));
        loadings.push(a);
        decays.push(p);
        denominators.push(d);
    }
    if !offending.is_empty() {
        return Err(Error::NonpositiveDenominator { offending });
    }

    let index: HashMap<&[u32], usize> = compositions
        .iter()
        .enumerate()
        .map(|(k, b)| (b.parts(), k))
        .collect();
    let lower = enumerate_compositions_capped(n, r - 1, cap)?;
    let agent_terms = (0..n)
        .map(|j| {
            lower
                .iter()
                .map(|b| {
                    let up = b.incremented(j);
                    (index[up.parts()], lf.log_multinomial(b))
                })
                .collect()
        })
        .collect();

    Ok(DenominatorTable {
        risk_aversion: r,
        n_agents: n,
        log_denominators: denominators.iter().map(|d: &f64| d.ln()).collect(),
        compositions,
        log_coefficients,
        loadings,
        decays,
        denominators,
        agent_terms,
        footnote_margin: footnote_margin(params),
    })
}
