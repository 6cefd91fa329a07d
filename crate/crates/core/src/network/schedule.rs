//! The per-layer `k` schedule: start large, shrink by `delta` each layer, stop
//! before `k` falls under the smallest useful size (about 1.5 × class count).

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Inputs to [`plan_schedule`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub n: usize,
    /// Rough guess of the number of classes.
    pub c_guess: usize,
    pub k1_override: Option<usize>,
    /// Explicit smallest `k`; defaults to `ceil(1.5 · c_guess)`.
    pub k_last_override: Option<usize>,
    pub delta: f64,
    /// Largest `k` the machine can afford.
    pub k_max: usize,
}

impl ScheduleParams {
    pub fn new(n: usize, c_guess: usize) -> Self {
        Self {
            n,
            c_guess,
            k1_override: None,
            k_last_override: None,
            delta: 0.5,
            k_max: usize::MAX,
        }
    }

    pub fn min_k(&self) -> usize {
        self.k_last_override
            .unwrap_or_else(|| (1.5 * self.c_guess as f64).ceil() as usize)
    }
}

/// Default first-layer size, `min(round(0.5·n), k_max)`.
pub fn default_k1(n: usize, k_max: usize) -> usize {
    ((0.5 * n as f64).round() as usize).min(k_max)
}

/// Plans `k` for every layer. Each layer keeps `floor(delta · k_prev)`, and the
/// schedule ends at the last value not below the smallest allowed `k`.
pub fn plan_schedule(params: &ScheduleParams) -> Result<Vec<usize>> {
    let ScheduleParams {
        n, c_guess, delta, ..
    } = *params;
    if n < 2 {
        return Err(invalid(format!("need at least 2 samples, got {n}")));
    }
    if c_guess < 2 && params.k_last_override.is_none() {
        return Err(invalid(format!("class guess must be at least 2, got {c_guess}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let min_k = params.min_k().max(1);
    let mut k1 = params
        .k1_override
        .unwrap_or_else(|| default_k1(n, params.k_max));
    if k1 > n {
        warn!("k1 = {k1} exceeds the sample count; clamping to {n}");
        k1 = n;
    }
    if k1 < min_k {
        return Err(Error::ScheduleInfeasible { k1, min_k });
    }
    let mut ks = vec![k1];
    loop {
        let next = (delta * *ks.last().unwrap() as f64).floor() as usize;
        if next < min_k || next == *ks.last().unwrap() {
            break;
        }
        ks.push(next);
    }
    Ok(ks)
}
