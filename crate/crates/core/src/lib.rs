//! Closed-form equilibrium of a continuous-time economy in which agents with
//! heterogeneous beliefs and CRRA utility (integer relative risk aversion
//! `R >= 2`) share a dividend stream, together with the Monte Carlo and
//! finite-difference oracles used to check it.
//!
//! Every equilibrium quantity is a deterministic function of the Markov
//! state `(t, X_t)`. Sums over agents raised to the power `R` are expanded
//! over compositions of `R` ([`multiindex`]); the per-composition data needed
//! by all of them is built once per economy by [`model::validate`].

pub mod calibrate;
pub mod cli;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod fd;
pub mod model;
pub mod multiindex;
pub mod numerics;
pub mod oracle;
pub mod simulate;
pub mod verify;

pub use calibrate::{solve_gamma, Calibration, CalibrationTarget};
pub use dynamics::{RateBundle, StockDynamics};
pub use equilibrium::EquilibriumSnapshot;
pub use error::{Error, Result};
pub use model::{validate, Agent, DenominatorTable, EconomyParams, MarketState};
pub use multiindex::MultiIndex;
pub use oracle::{McConfig, OracleReport};
pub use simulate::{PathGrid, SimulatedPath};
