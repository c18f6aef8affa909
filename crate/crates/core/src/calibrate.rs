//! Recovers the agent weights `γ` that produce given initial wealth shares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::equilibrium;
use crate::error::{Error, Result};
use crate::model::{validate, DenominatorTable, EconomyParams, MarketState};

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTarget {
    shares: Vec<f64>,
    state: MarketState,
}

impl CalibrationTarget {
    /// Target shares at the origin `(t, x) = (0, 0)`.
    pub fn new(shares: Vec<f64>) -> Result<Self> {
        if shares.is_empty() {
            return Err(Error::InvalidTarget("no shares given".into()));
        }
        if let Some(bad) = shares.iter().find(|s| !(**s > 0.0 && **s <= 1.0)) {
            return Err(Error::InvalidTarget(format!("share {bad} outside (0, 1]")));
        }
        let total: f64 = shares.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidTarget(format!("shares sum to {total}, not 1")));
        }
        Ok(CalibrationTarget {
            shares,
            state: MarketState::origin(),
        })
    }

    pub fn shares(&self) -> &[f64] {
        &self.shares
    }

    pub fn state(&self) -> MarketState {
        self.state
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub gamma: Vec<f64>,
    pub achieved_shares: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// `w_j / Σ w` at `state`.
pub fn wealth_shares(state: MarketState, params: &EconomyParams, table: &DenominatorTable) -> Vec<f64> {
    let w = equilibrium::wealths(state, params, table);
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn normalize(gamma: &mut [f64]) {
    let mean = gamma.iter().sum::<f64>() / gamma.len() as f64;
    for g in gamma.iter_mut() {
        *g -= mean;
    }
}

fn max_residual(shares: &[f64], target: &[f64]) -> f64 {
    shares
        .iter()
        .zip(target)
        .map(|(s, t)| (s - t).abs())
        .fold(0.0, f64::max)
}

struct ShareMap<'a> {
    params: &'a EconomyParams,
    table: DenominatorTable,
    state: MarketState,
}

impl ShareMap<'_> {
    fn eval(&self, gamma: &[f64]) -> Result<Vec<f64>> {
        let p = self.params.with_gammas(gamma)?;
        let shares = wealth_shares(self.state, &p, &self.table);
        if shares.iter().all(|s| s.is_finite()) {
            Ok(shares)
        } else {
            Err(Error::ValidationLost)
        }
    }

    /// Newton step on the first `J-1` shares with `γ_J` held fixed.
    fn newton_step(&self, gamma: &[f64], shares: &[f64], target: &[f64]) -> Result<Vec<f64>> {
        let m = gamma.len() - 1;
        let h = 1e-6;
        let mut jac = DMatrix::zeros(m, m);
        for k in 0..m {
            let mut up = gamma.to_vec();
            let mut down = gamma.to_vec();
            up[k] += h;
            down[k] -= h;
            let su = self.eval(&up)?;
            let sd = self.eval(&down)?;
            for i in 0..m {
                jac[(i, k)] = (su[i] - sd[i]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_iterator(m, (0..m).map(|i| target[i] - shares[i]));
        let delta = jac.lu().solve(&rhs).ok_or(Error::NoConvergence {
            iterations: 0,
            residual: max_residual(shares, target),
        })?;
        let mut step = vec![0.0; gamma.len()];
        step[..m].copy_from_slice(delta.as_slice());
        Ok(step)
    }
}

/// Solves for `γ` (normalized to `Σγ = 0`) whose initial wealth shares match
/// `target` within `tol`. The weights stored in `params` are ignored; the
/// iteration starts from `γ = 0`.
///
/// Uses the damped update `γ_j += ½ R log(share_j / target_j)` and switches to
/// a finite-difference Newton step once that stops making progress.
pub fn solve_gamma(
    params: &EconomyParams,
    target: &CalibrationTarget,
    tol: f64,
    max_iter: usize,
) -> Result<Calibration> {
    let n = params.n_agents();
    if target.shares.len() != n {
        return Err(Error::InvalidTarget(format!(
            "{} shares for {n} agent(s)",
            target.shares.len()
        )));
    }
    let map = ShareMap {
        params,
        table: validate(params)?,
        state: target.state,
    };
    let r = params.risk_aversion() as f64;
    let goal = &target.shares;

    let mut gamma = vec![0.0; n];
    let mut shares = map.eval(&gamma)?;
    let mut residual = max_residual(&shares, goal);
    let mut slow_steps = 0;
    let mut newton = false;

    for iter in 0..max_iter {
        if residual <= tol {
            return Ok(Calibration {
                gamma,
                achieved_shares: shares,
                iterations: iter,
                residual,
            });
        }
        let mut step: Vec<f64> = if newton {
            map.newton_step(&gamma, &shares, goal)?
        } else {
            shares
                .iter()
                .zip(goal)
                .map(|(s, g)| 0.5 * r * (s / g).ln())
                .collect()
        };

        let mut accepted = None;
        for _ in 0..40 {
            let mut candidate: Vec<f64> = gamma.iter().zip(&step).map(|(g, s)| g + s).collect();
            normalize(&mut candidate);
            match map.eval(&candidate) {
                Ok(s) if !newton || max_residual(&s, goal) < residual => {
                    accepted = Some((candidate, s));
                    break;
                }
                Ok(_) | Err(Error::ValidationLost) => step.iter_mut().for_each(|s| *s *= 0.5),
                Err(e) => return Err(e),
            }
        }
        let Some((next_gamma, next_shares)) = accepted else {
            return Err(Error::NoConvergence {
                iterations: iter,
                residual,
            });
        };
        let next_residual = max_residual(&next_shares, goal);
        if !newton {
            slow_steps = if next_residual > 0.9 * residual { slow_steps + 1 } else { 0 };
            newton = slow_steps >= 3;
        }
        gamma = next_gamma;
        shares = next_shares;
        residual = next_residual;
    }
    if residual <= tol {
        return Ok(Calibration {
            gamma,
            achieved_shares: shares,
            iterations: max_iter,
            residual,
        });
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}
