//! Brownian driver paths and equilibrium time series along them.
//!
//! Path `i` under seed `s` draws from ChaCha8 stream `i` of key `s`, so its
//! increments do not depend on how many other paths are generated or on the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics;
use crate::equilibrium::{self, EquilibriumSnapshot, StateTerms};
use crate::error::{Error, Result};
use crate::model::{DenominatorTable, EconomyParams, MarketState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    t0: f64,
    horizon: f64,
    n_steps: usize,
}

impl PathGrid {
    pub fn new(t0: f64, horizon: f64, n_steps: usize) -> Result<Self> {
        if !(t0.is_finite() && t0 >= 0.0) {
            return Err(Error::InvalidGrid(format!("start time {t0} must be nonnegative")));
        }
        if !(horizon.is_finite() && horizon > t0) {
            return Err(Error::InvalidGrid(format!("horizon {horizon} must exceed start {t0}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("need at least one step".into()));
        }
        Ok(PathGrid { t0, horizon, n_steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        (self.horizon - self.t0) / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            self.t0 + k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub grid: PathGrid,
    pub x_values: Vec<f64>,
    pub seed: u64,
    pub path_id: u64,
}

/// Generator for path `path_id` under `seed`.
pub fn path_rng(seed: u64, path_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

/// Exact Brownian increments: `X_{k+1} = X_k + √dt · N(0,1)`.
pub(crate) struct BrownianWalk {
    rng: ChaCha8Rng,
    sqrt_dt: f64,
}

impl BrownianWalk {
    pub(crate) fn new(seed: u64, path_id: u64, dt: f64) -> Self {
        BrownianWalk {
            rng: path_rng(seed, path_id),
            sqrt_dt: dt.sqrt(),
        }
    }

    pub(crate) fn step(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        self.sqrt_dt * z
    }
}

pub fn simulate_path(grid: PathGrid, x0: f64, seed: u64, path_id: u64) -> SimulatedPath {
    let mut walk = BrownianWalk::new(seed, path_id, grid.dt());
    let mut x_values = Vec::with_capacity(grid.n_steps + 1);
    let mut x = x0;
    x_values.push(x);
    for _ in 0..grid.n_steps {
        x += walk.step();
        x_values.push(x);
    }
    SimulatedPath {
        grid,
        x_values,
        seed,
        path_id,
    }
}

pub fn simulate_paths(grid: PathGrid, x0: f64, n_paths: usize, seed: u64) -> Vec<SimulatedPath> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_path(grid, x0, seed, i))
        .collect()
}

/// Full snapshot at every node of the path.
pub fn evaluate_series(
    path: &SimulatedPath,
    params: &EconomyParams,
    table: &DenominatorTable,
) -> Result<Vec<EquilibriumSnapshot>> {
    path.x_values
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let state = MarketState {
                t: path.grid.time(k),
                x,
            };
            equilibrium::snapshot(state, params, table).map_err(|e| match e {
                Error::DegenerateStockVolatility { value, .. } => {
                    Error::DegenerateStockVolatility { value, node: Some(k) }
                }
                other => other,
            })
        })
        .collect()
}

/// Normalized log-price residuals over simulated paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolReport {
    pub residual_mean: f64,
    pub mean_std_error: f64,
    pub residual_variance: f64,
    pub variance_std_error: f64,
    pub n_samples: usize,
}

/// Compares increments of `log S` with the closed-form volatility: each
/// `(Δlog S - (μ^S - ½(σ^S)²)Δt) / (σ^S √Δt)` should be a standard normal draw.
pub fn realized_vol_check(
    params: &EconomyParams,
    table: &DenominatorTable,
    grid: PathGrid,
    x0: f64,
    n_paths: usize,
    seed: u64,
) -> VolReport {
    let dt = grid.dt();
    let per_path: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = simulate_path(grid, x0, seed, i);
            let mut out = Vec::with_capacity(grid.n_steps);
            let mut prev: Option<(f64, f64, f64)> = None;
            for (k, &x) in path.x_values.iter().enumerate() {
                let state = MarketState { t: grid.time(k), x };
                let terms = StateTerms::new(state, params, table);
                let rates = dynamics::rates_from_terms(&terms, params);
                let stock = dynamics::stock_from_terms(&terms, params, &rates);
                let log_s = equilibrium::stock_price(state, params, table).ln();
                if let Some((log_s_prev, mu, vol)) = prev {
                    out.push((log_s - log_s_prev - (mu - 0.5 * vol * vol) * dt) / (vol * dt.sqrt()));
                }
                prev = Some((log_s, stock.drift, stock.vol));
            }
            out
        })
        .collect();
    let samples: Vec<f64> = per_path.into_iter().flatten().collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = samples.iter().map(|r| (r - mean).powi(4)).sum::<f64>() / n;
    VolReport {
        residual_mean: mean,
        mean_std_error: (var / n).sqrt(),
        residual_variance: var,
        variance_std_error: ((m4 - var * var).max(0.0) / n).sqrt(),
        n_samples: samples.len(),
    }
}
