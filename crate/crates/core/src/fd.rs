//! Central finite differences of scalar fields over `(t, x)`.

use serde::{Deserialize, Serialize};

use crate::model::MarketState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSteps {
    pub h_t: f64,
    pub h_x: f64,
    /// Combine steps `h` and `h/2` to cancel the leading error term.
    pub richardson: bool,
}

impl Default for FdSteps {
    fn default() -> Self {
        FdSteps {
            h_t: 1e-5,
            h_x: 1e-4,
            richardson: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdDerivatives {
    pub d_t: f64,
    pub d_x: f64,
    pub d_xx: f64,
}

fn central<F: Fn(f64, f64) -> f64>(f: &F, t: f64, x: f64, ht: f64, hx: f64) -> FdDerivatives {
    let f0 = f(t, x);
    let fxp = f(t, x + hx);
    let fxm = f(t, x - hx);
    FdDerivatives {
        d_t: (f(t + ht, x) - f(t - ht, x)) / (2.0 * ht),
        d_x: (fxp - fxm) / (2.0 * hx),
        d_xx: (fxp - 2.0 * f0 + fxm) / (hx * hx),
    }
}

/// `(∂_t f, ∂_x f, ∂_xx f)` at `state`.
///
/// The field is evaluated on both sides of `t`, so it must be defined for
/// `t - h_t` even when `t = 0`.
pub fn fd_engine<F: Fn(f64, f64) -> f64>(f: F, state: MarketState, steps: FdSteps) -> FdDerivatives {
    let coarse = central(&f, state.t, state.x, steps.h_t, steps.h_x);
    if !steps.richardson {
        return coarse;
    }
    let fine = central(&f, state.t, state.x, 0.5 * steps.h_t, 0.5 * steps.h_x);
    let extrapolate = |c: f64, f: f64| (4.0 * f - c) / 3.0;
    FdDerivatives {
        d_t: extrapolate(coarse.d_t, fine.d_t),
        d_x: extrapolate(coarse.d_x, fine.d_x),
        d_xx: extrapolate(coarse.d_xx, fine.d_xx),
    }
}

/// Drift rate of `exp(g)` given finite differences of `g`:
/// `∂_t g + ½(∂_xx g + (∂_x g)²)`.
pub fn log_drift(d: &FdDerivatives) -> f64 {
    d.d_t + 0.5 * (d.d_xx + d.d_x * d.d_x)
}
