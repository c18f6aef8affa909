use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Every composition whose time-integral denominator is not positive.
    #[error("{} composition(s) with nonpositive denominator, first {:?} -> {}", offending.len(), offending[0].0, offending[0].1)]
    NonpositiveDenominator { offending: Vec<(Vec<u32>, f64)> },

    #[error("{count} compositions exceed the cap of {cap}")]
    CompositionLimit { count: u128, cap: u64 },

    #[error("agent index {index} out of range for {n_agents} agent(s)")]
    AgentIndex { index: usize, n_agents: usize },

    #[error("stock volatility {value:e} is too close to zero for a portfolio decomposition{}", node.map(|k| format!(" (grid node {k})")).unwrap_or_default())]
    DegenerateStockVolatility { value: f64, node: Option<usize> },

    #[error("truncation bound {bound} exceeds 10% of closed form {closed_form}; raise the horizon")]
    TruncationTooLoose { bound: f64, closed_form: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("calibration iterate produced non-finite wealth shares")]
    ValidationLost,

    #[error("invalid calibration target: {0}")]
    InvalidTarget(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}
