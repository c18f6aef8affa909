//! Python bindings. The module is importable as `crra_equilibrium`.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::Serialize;

use crra_equilibrium::calibrate::{self, CalibrationTarget};
use crra_equilibrium::dynamics;
use crra_equilibrium::equilibrium;
use crra_equilibrium::model::{self, Agent, DenominatorTable, EconomyParams, MarketState};
use crra_equilibrium::multiindex::{self, MultiIndex};
use crra_equilibrium::oracle::{self, McConfig};
use crra_equilibrium::simulate::{self, PathGrid};
use crra_equilibrium::Error;

create_exception!(crra_equilibrium, ModelError, PyException, "The economy or evaluation is invalid.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParams(_) | Error::InvalidTarget(_) | Error::InvalidGrid(_) => PyValueError::new_err(e.to_string()),
        Error::AgentIndex { .. } => PyIndexError::new_err(e.to_string()),
        other => ModelError::new_err(other.to_string()),
    }
}

/// Hands a serializable value to Python as plain dicts and lists.
fn to_python<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn state(t: f64, x: f64) -> PyResult<MarketState> {
    MarketState::new(t, x).map_err(to_py)
}

/// A validated economy together with its denominator table.
#[pyclass(frozen, module = "crra_equilibrium")]
struct Economy {
    params: EconomyParams,
    table: DenominatorTable,
}

impl Economy {
    fn build(params: EconomyParams) -> PyResult<Self> {
        let table = model::validate(&params).map_err(to_py)?;
        Ok(Economy { params, table })
    }
}

#[pymethods]
impl Economy {
    /// `agents` is a list of `(rho, alpha, gamma)` triples.
    #[new]
    #[pyo3(signature = (risk_aversion, sigma, alpha_star, agents, delta0 = 1.0))]
    fn new(risk_aversion: u32, sigma: f64, alpha_star: f64, agents: Vec<(f64, f64, f64)>, delta0: f64) -> PyResult<Self> {
        let agents = agents.into_iter().map(|(r, a, g)| Agent::new(r, a, g)).collect();
        Self::build(EconomyParams::new(risk_aversion, sigma, alpha_star, delta0, agents).map_err(to_py)?)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::build(EconomyParams::from_json(text).map_err(|e| PyValueError::new_err(e.to_string()))?)
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyValueError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    #[getter]
    fn risk_aversion(&self) -> u32 {
        self.params.risk_aversion()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.params.sigma()
    }

    #[getter]
    fn alpha_star(&self) -> f64 {
        self.params.alpha_star()
    }

    #[getter]
    fn delta0(&self) -> f64 {
        self.params.delta0()
    }

    #[getter]
    fn n_agents(&self) -> usize {
        self.params.n_agents()
    }

    #[getter]
    fn agents(&self) -> Vec<(f64, f64, f64)> {
        self.params.agents().iter().map(|a| (a.rho, a.alpha, a.gamma)).collect()
    }

    #[getter]
    fn min_denominator(&self) -> f64 {
        self.table.min_denominator()
    }

    #[getter]
    fn footnote_condition_holds(&self) -> bool {
        self.table.footnote_condition_holds()
    }

    #[getter]
    fn n_compositions(&self) -> usize {
        self.table.len()
    }

    /// Same economy with new belief-weight intercepts.
    fn with_gammas(&self, gammas: Vec<f64>) -> PyResult<Self> {
        Self::build(self.params.with_gammas(&gammas).map_err(to_py)?)
    }

    #[pyo3(signature = (t = 0.0, x = 0.0))]
    fn dividend(&self, t: f64, x: f64) -> PyResult<f64> {
        Ok(model::dividend(state(t, x)?, &self.params))
    }

    #[pyo3(signature = (t = 0.0, x = 0.0))]
    fn state_price_density(&self, t: f64, x: f64) -> PyResult<f64> {
        Ok(equilibrium::state_price_density(state(t, x)?, &self.params))
    }

    #[pyo3(signature = (t = 0.0, x = 0.0))]
    fn consumptions(&self, t: f64, x: f64) -> PyResult<Vec<f64>> {
        Ok(equilibrium::consumptions(state(t, x)?, &self.params))
    }

    #[pyo3(signature = (t = 0.0, x = 0.0))]
    fn wealths(&self, t: f64, x: f64) -> PyResult<Vec<f64>> {
        Ok(equilibrium::wealths(state(t, x)?, &self.params, &self.table))
    }

    #[pyo3(signature = (t = 0.0, x = 0.0))]
    fn stock_price(&self, t: f64, x: f64) -> PyResult<f64> {
        Ok(equilibrium::stock_price(state(t, x)?, &self.params, &self.table))
    }

    #[pyo3(signature = (t = 0.0, x = 0.0))]
    fn pd_ratio(&self, t: f64, x: f64) -> PyResult<f64> {
        Ok(equilibrium::pd_ratio(state(t, x)?, &self.params, &self.table))
    }

    #[pyo3(signature = (t = 0.0, x = 0.0))]
    fn riskless_rate(&self, t: f64, x: f64) -> PyResult<f64> {
        Ok(dynamics::rate_bundle(state(t, x)?, &self.params, &self.table).riskless_rate)
    }

    #[pyo3(signature = (t = 0.0, x = 0.0))]
    fn market_price_of_risk(&self, t: f64, x: f64) -> PyResult<f64> {
        Ok(dynamics::rate_bundle(state(t, x)?, &self.params, &self.table).kappa)
    }

    /// `(drift, volatility)` of the stock price.
    #[pyo3(signature = (t = 0.0, x = 0.0))]
    fn stock_dynamics(&self, t: f64, x: f64) -> PyResult<(f64, f64)> {
        let s = dynamics::stock_dynamics(state(t, x)?, &self.params, &self.table);
        Ok((s.drift, s.vol))
    }

    #[pyo3(signature = (t = 0.0, x = 0.0))]
    fn portfolios(&self, t: f64, x: f64) -> PyResult<Vec<f64>> {
        dynamics::portfolios(state(t, x)?, &self.params, &self.table).map_err(to_py)
    }

    /// Every equilibrium quantity at `(t, x)` as a dict.
    #[pyo3(signature = (t = 0.0, x = 0.0))]
    fn snapshot<'py>(&self, py: Python<'py>, t: f64, x: f64) -> PyResult<Bound<'py, PyAny>> {
        let snap = equilibrium::snapshot(state(t, x)?, &self.params, &self.table).map_err(to_py)?;
        to_python(py, &snap)
    }

    /// Driver paths on an equally spaced grid; one list of `X` values per path.
    #[pyo3(signature = (horizon, n_steps, n_paths = 1, seed = 0, t0 = 0.0, x0 = 0.0))]
    fn simulate_x(&self, py: Python<'_>, horizon: f64, n_steps: usize, n_paths: usize, seed: u64, t0: f64, x0: f64) -> PyResult<Vec<Vec<f64>>> {
        let grid = PathGrid::new(t0, horizon, n_steps).map_err(to_py)?;
        let paths = py.detach(|| simulate::simulate_paths(grid, x0, n_paths, seed));
        Ok(paths.into_iter().map(|p| p.x_values).collect())
    }

    /// Monte Carlo check of agent `j`'s wealth at `(t, x)`.
    #[pyo3(signature = (j, t = 0.0, x = 0.0, n_paths = 100_000, seed = 0))]
    fn mc_wealth<'py>(&self, py: Python<'py>, j: usize, t: f64, x: f64, n_paths: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let s = state(t, x)?;
        let cfg = McConfig::with_defaults(&self.table, t, n_paths, seed);
        let rep = py
            .detach(|| oracle::mc_wealth_oracle(s, &self.params, &self.table, j, cfg))
            .map_err(to_py)?;
        to_python(py, &rep)
    }

    /// Monte Carlo check of the stock price at `(t, x)`.
    #[pyo3(signature = (t = 0.0, x = 0.0, n_paths = 100_000, seed = 0))]
    fn mc_stock<'py>(&self, py: Python<'py>, t: f64, x: f64, n_paths: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let s = state(t, x)?;
        let cfg = McConfig::with_defaults(&self.table, t, n_paths, seed);
        let rep = py.detach(|| oracle::mc_stock_oracle(s, &self.params, &self.table, cfg)).map_err(to_py)?;
        to_python(py, &rep)
    }

    /// Checks that the deflated gains process is a martingale from the origin.
    #[pyo3(signature = (horizon = 10.0, n_steps = 400, n_paths = 100_000, seed = 0))]
    fn martingale_check<'py>(&self, py: Python<'py>, horizon: f64, n_steps: usize, n_paths: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let rep = py
            .detach(|| oracle::martingale_check(&self.params, &self.table, horizon, n_steps, n_paths, seed))
            .map_err(to_py)?;
        to_python(py, &rep)
    }

    /// Finds intercepts `gamma` so that initial wealth shares match `shares`.
    #[pyo3(signature = (shares, tol = 1e-10, max_iter = 500))]
    fn calibrate<'py>(&self, py: Python<'py>, shares: Vec<f64>, tol: f64, max_iter: usize) -> PyResult<Bound<'py, PyAny>> {
        let target = CalibrationTarget::new(shares).map_err(to_py)?;
        let result = py
            .detach(|| calibrate::solve_gamma(&self.params, &target, tol, max_iter))
            .map_err(to_py)?;
        to_python(py, &result)
    }

    fn __repr__(&self) -> String {
        format!(
            "Economy(R={}, sigma={}, alpha_star={}, n_agents={})",
            self.params.risk_aversion(),
            self.params.sigma(),
            self.params.alpha_star(),
            self.params.n_agents()
        )
    }
}

#[pyfunction]
fn composition_count(n_parts: usize, order: u32) -> PyResult<u128> {
    if n_parts == 0 {
        return Err(PyValueError::new_err("need at least one part"));
    }
    Ok(multiindex::composition_count(n_parts, order))
}

/// All compositions of `order` into `n_parts` parts, lexicographically descending.
#[pyfunction]
fn compositions(n_parts: usize, order: u32) -> PyResult<Vec<Vec<u32>>> {
    let all = multiindex::enumerate_compositions_capped(n_parts, order, multiindex::DEFAULT_COMPOSITION_CAP).map_err(to_py)?;
    Ok(all.into_iter().map(|b| b.parts().to_vec()).collect())
}

#[pyfunction]
fn log_multinomial(parts: Vec<u32>) -> PyResult<f64> {
    let beta = MultiIndex::new(parts).ok_or_else(|| PyValueError::new_err("need at least one part"))?;
    Ok(multiindex::log_multinomial_coefficient(&beta))
}

#[pymodule]
#[pyo3(name = "crra_equilibrium")]
fn crra_equilibrium_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Economy>()?;
    m.add("ModelError", m.py().get_type::<ModelError>())?;
    m.add_function(wrap_pyfunction!(composition_count, m)?)?;
    m.add_function(wrap_pyfunction!(compositions, m)?)?;
    m.add_function(wrap_pyfunction!(log_multinomial, m)?)?;
    Ok(())
}
