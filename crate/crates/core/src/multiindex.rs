//! Compositions of an integer into a fixed number of nonnegative parts and
//! their multinomial coefficients.

use crate::error::{Error, Result};

/// Default upper bound on the number of compositions materialized at once.
pub const DEFAULT_COMPOSITION_CAP: u64 = 10_000_000;

/// A composition `β` of `order` into `parts.len()` nonnegative parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    parts: Vec<u32>,
    order: u32,
}

impl MultiIndex {
    /// Builds a multi-index from its parts. Returns `None` for an empty vector.
    pub fn new(parts: Vec<u32>) -> Option<Self> {
        if parts.is_empty() {
            return None;
        }
        let order = parts.iter().sum();
        Some(MultiIndex { parts, order })
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// `Σᵢ vᵢ βᵢ`.
    pub fn dot(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.parts.len());
        self.parts
            .iter()
            .zip(values)
            .map(|(&b, &v)| b as f64 * v)
            .sum()
    }

    /// The composition with one unit added to part `j`.
    pub fn incremented(&self, j: usize) -> MultiIndex {
        let mut parts = self.parts.clone();
        parts[j] += 1;
        MultiIndex {
            parts,
            order: self.order + 1,
        }
    }

    pub fn log_multinomial(&self) -> f64 {
        log_multinomial_coefficient(self)
    }
}

/// Number of compositions of `k` into `j` nonnegative parts, `C(k+j-1, j-1)`.
pub fn composition_count(j: usize, k: u32) -> u128 {
    assert!(j >= 1, "need at least one part");
    let n = k as u128 + j as u128 - 1;
    let r = (j as u128 - 1).min(k as u128);
    let mut acc: u128 = 1;
    for i in 0..r {
        // acc * (n - i) is divisible by (i + 1) at every step
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// All compositions of `k` into `j` parts, lexicographically descending.
///
/// # Panics
/// If `j == 0`.
pub fn enumerate_compositions(j: usize, k: u32) -> Vec<MultiIndex> {
    assert!(j >= 1, "need at least one part");
    let mut out = Vec::with_capacity(composition_count(j, k).min(1 << 20) as usize);
    let mut parts = vec![0u32; j];
    fill(&mut parts, 0, k, &mut out);
    out
}

/// Like [`enumerate_compositions`], but refuses to materialize more than
/// `cap` compositions.
pub fn enumerate_compositions_capped(j: usize, k: u32, cap: u64) -> Result<Vec<MultiIndex>> {
    if j == 0 {
        return Err(Error::InvalidParams("at least one agent is required".into()));
    }
    let count = composition_count(j, k);
    if count > cap as u128 {
        return Err(Error::CompositionLimit { count, cap });
    }
    Ok(enumerate_compositions(j, k))
}

fn fill(parts: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if pos + 1 == parts.len() {
        parts[pos] = remaining;
        out.push(MultiIndex {
            parts: parts.to_vec(),
            order: parts.iter().sum(),
        });
        return;
    }
    for first in (0..=remaining).rev() {
        parts[pos] = first;
        fill(parts, pos + 1, remaining - first, out);
    }
}

/// `log n!` as a sum of logarithms, exact up to accumulated rounding.
pub fn log_factorial(n: u32) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `log(K! / (β₁! ⋯ β_J!))`.
pub fn log_multinomial_coefficient(beta: &MultiIndex) -> f64 {
    let mut acc = log_factorial(beta.order);
    for &b in &beta.parts {
        acc -= log_factorial(b);
    }
    // all mass on one part cancels exactly; anything else is >= log 2
    acc.max(0.0)
}

/// Exact multinomial coefficient, `None` on overflow.
pub fn multinomial_coefficient_exact(beta: &MultiIndex) -> Option<u128> {
    // product of binomials C(b1, b1) C(b1+b2, b2) ...
    let mut acc: u128 = 1;
    let mut running: u128 = 0;
    for &b in &beta.parts {
        for i in 1..=b as u128 {
            running += 1;
            acc = acc.checked_mul(running)? / i;
        }
    }
    Some(acc)
}

/// Log-factorial lookup for repeated coefficient evaluation.
#[derive(Debug, Clone)]
pub struct LogFactorials(Vec<f64>);

impl LogFactorials {
    pub fn up_to(n: u32) -> Self {
        let mut table = Vec::with_capacity(n as usize + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for i in 1..=n {
            acc += (i as f64).ln();
            table.push(acc);
        }
        LogFactorials(table)
    }

    pub fn log_multinomial(&self, beta: &MultiIndex) -> f64 {
        let mut acc = self.0[beta.order as usize];
        for &b in &beta.parts {
            acc -= self.0[b as usize];
        }
        acc.max(0.0)
    }
}
