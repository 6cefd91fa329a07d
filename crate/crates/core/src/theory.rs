//! Bias and variance of a bootstrap ensemble of radial-basis votes.
//!
//! A single base clustering is modeled as `f(s) = exp(-z² / 2σ²)` where
//! `z ~ N(0, σ_in²)` is the distance from a sample to its random center.
//! Two base clusterings draw correlated distances with coefficient `ρ`.
//! The closed forms below give the first two moments of `f`, the moment of a
//! pair, and from them the squared bias and the variance of a single vote
//! and of the average of `V` votes. [`monte_carlo_moments`] checks them by
//! direct sampling.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::rng::{Purpose, RandomStream};

/// Number of independent shards a Monte Carlo run is split into. Fixed so
/// that results do not depend on the thread count.
pub const MONTE_CARLO_SHARDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    /// Variance of the sample-to-center distance.
    pub sigma_input_sq: f64,
    /// Squared width of the radial function.
    pub sigma_sq: f64,
    /// Correlation between the distances seen by two base clusterings.
    pub rho: f64,
    /// Ensemble size.
    pub v: usize,
}

impl TheoryParams {
    pub fn new(sigma_input_sq: f64, sigma_sq: f64, rho: f64, v: usize) -> Result<Self> {
        if !(sigma_input_sq > 0.0 && sigma_input_sq.is_finite()) {
            return Err(invalid(format!("sigma_input_sq = {sigma_input_sq} must be positive")));
        }
        if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
            return Err(invalid(format!("sigma_sq = {sigma_sq} must be positive")));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(invalid(format!("rho = {rho} must lie in [0, 1]")));
        }
        if v == 0 {
            return Err(invalid("ensemble size must be at least 1"));
        }
        Ok(Self {
            sigma_input_sq,
            sigma_sq,
            rho,
            v,
        })
    }
}

/// `E f = σ / sqrt(σ_in² + σ²)`.
pub fn mean_single(p: &TheoryParams) -> f64 {
    (p.sigma_sq / (p.sigma_input_sq + p.sigma_sq)).sqrt()
}

/// `(E f)²`, computed without the square root so it is exact where it matters.
fn mean_sq(p: &TheoryParams) -> f64 {
    p.sigma_sq / (p.sigma_input_sq + p.sigma_sq)
}

/// `E f_1 f_2 = σ² / sqrt((σ_in² + σ²)² − ρ² σ_in⁴)`.
fn pair_at(p: &TheoryParams, rho: f64) -> f64 {
    let s = p.sigma_input_sq + p.sigma_sq;
    let r = rho * p.sigma_input_sq;
    p.sigma_sq / (s * s - r * r).sqrt()
}

/// `E f² = σ / sqrt(2σ_in² + σ²)`, evaluated in the pair form with `ρ = 1`.
pub fn second_moment(p: &TheoryParams) -> f64 {
    pair_at(p, 1.0)
}

/// `E f² = σ / sqrt(2σ_in² + σ²)` in its direct form.
pub fn second_moment_direct(p: &TheoryParams) -> f64 {
    (p.sigma_sq / (2.0 * p.sigma_input_sq + p.sigma_sq)).sqrt()
}

pub fn pair_moment(p: &TheoryParams) -> f64 {
    pair_at(p, p.rho)
}

/// Squared bias of a vote relative to the ideal value 1. Shared by a single
/// vote and the ensemble average.
pub fn bias_sq(p: &TheoryParams) -> f64 {
    let b = 1.0 - mean_single(p);
    b * b
}

pub fn var_single(p: &TheoryParams) -> f64 {
    second_moment(p) - mean_sq(p)
}

/// Variance of the average of `V` votes:
/// `(E f² − E f_1 f_2) / V + (E f_1 f_2 − (E f)²)`.
pub fn var_ensemble(p: &TheoryParams) -> f64 {
    let pair = pair_moment(p);
    (second_moment(p) - pair) / p.v as f64 + (pair - mean_sq(p))
}

/// Sample moments from a Monte Carlo run, with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloMoments {
    pub draws: usize,
    pub mean: f64,
    pub second: f64,
    pub pair: f64,
    pub se_mean: f64,
    pub se_second: f64,
    pub se_pair: f64,
    /// Unbiased sample variance of a single vote.
    pub sample_var: f64,
    /// Unbiased sample covariance of two correlated votes.
    pub sample_cov: f64,
}

impl MonteCarloMoments {
    /// Ensemble variance assembled from the sample variance and covariance.
    pub fn var_ensemble(&self, v: usize) -> f64 {
        (self.sample_var - self.sample_cov) / v as f64 + self.sample_cov
    }
}

#[derive(Default, Clone, Copy)]
struct Sums {
    n: f64,
    f1: f64,
    f2: f64,
    f1_sq: f64,
    f1_4: f64,
    prod: f64,
    prod_sq: f64,
}

impl Sums {
    fn add(&mut self, o: &Sums) {
        self.n += o.n;
        self.f1 += o.f1;
        self.f2 += o.f2;
        self.f1_sq += o.f1_sq;
        self.f1_4 += o.f1_4;
        self.prod += o.prod;
        self.prod_sq += o.prod_sq;
    }
}

/// Samples `draws` correlated pairs `z_2 = ρ z_1 + sqrt(1 − ρ²) z` and
/// returns the sample moments of `f(z_1)`, `f(z_1)²` and `f(z_1) f(z_2)`.
pub fn monte_carlo_moments(p: &TheoryParams, draws: usize, stream: &RandomStream) -> Result<MonteCarloMoments> {
    if draws < 2 {
        return Err(invalid("need at least two draws"));
    }
    let sd = p.sigma_input_sq.sqrt();
    let inv = 1.0 / (2.0 * p.sigma_sq);
    let f = |z: f64| (-z * z * inv).exp();
    let tail = (1.0 - p.rho * p.rho).sqrt();
    let stream = stream.with_purpose(Purpose::MonteCarlo);
    let shards: Vec<Sums> = (0..MONTE_CARLO_SHARDS)
        .into_par_iter()
        .map(|s| {
            let count = draws / MONTE_CARLO_SHARDS + usize::from(s < draws % MONTE_CARLO_SHARDS);
            let mut rng = stream.with_index(s as u32).rng();
            let mut acc = Sums::default();
            for _ in 0..count {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                let z1 = sd * a;
                let z2 = sd * (p.rho * a + tail * b);
                let (v1, v2) = (f(z1), f(z2));
                let sq = v1 * v1;
                let prod = v1 * v2;
                acc.n += 1.0;
                acc.f1 += v1;
                acc.f2 += v2;
                acc.f1_sq += sq;
                acc.f1_4 += sq * sq;
                acc.prod += prod;
                acc.prod_sq += prod * prod;
            }
            acc
        })
        .collect();
    let mut t = Sums::default();
    for s in &shards {
        t.add(s);
    }
    let n = t.n;
    let mean = t.f1 / n;
    let second = t.f1_sq / n;
    let pair = t.prod / n;
    let unbiased = n / (n - 1.0);
    let var_f1 = (second - mean * mean) * unbiased;
    let var_sq = (t.f1_4 / n - second * second) * unbiased;
    let var_prod = (t.prod_sq / n - pair * pair) * unbiased;
    let cov = (pair - mean * (t.f2 / n)) * unbiased;
    Ok(MonteCarloMoments {
        draws,
        mean,
        second,
        pair,
        se_mean: (var_f1 / n).sqrt(),
        se_second: (var_sq / n).sqrt(),
        se_pair: (var_prod / n).sqrt(),
        sample_var: var_f1,
        sample_cov: cov,
    })
}

/// Closed forms against one Monte Carlo run, as signed standard-error multiples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloCheck {
    pub params: TheoryParams,
    pub moments: MonteCarloMoments,
    pub z_mean: f64,
    pub z_second: f64,
    pub z_pair: f64,
}

impl MonteCarloCheck {
    pub fn within(&self, standard_errors: f64) -> bool {
        [self.z_mean, self.z_second, self.z_pair]
            .iter()
            .all(|z| z.abs() <= standard_errors)
    }
}

pub fn check_against_monte_carlo(p: &TheoryParams, draws: usize, stream: &RandomStream) -> Result<MonteCarloCheck> {
    let m = monte_carlo_moments(p, draws, stream)?;
    Ok(MonteCarloCheck {
        params: *p,
        moments: m,
        z_mean: (m.mean - mean_single(p)) / m.se_mean,
        z_second: (m.second - second_moment(p)) / m.se_second,
        z_pair: (m.pair - pair_moment(p)) / m.se_pair,
    })
}

/// Random valid parameter settings: both variances in `[0.2, 5)`, `ρ` in
/// `[0, 1)` and `V` from `{10, 50, 100, 400}`.
pub fn random_settings(count: usize, stream: &RandomStream) -> Vec<TheoryParams> {
    let mut rng = stream.with_purpose(Purpose::General).rng();
    (0..count)
        .map(|_| TheoryParams {
            sigma_input_sq: rng.random_range(0.2..5.0),
            sigma_sq: rng.random_range(0.2..5.0),
            rho: rng.random_range(0.0..1.0),
            v: [10, 50, 100, 400][rng.random_range(0..4)],
        })
        .collect()
}

/// Parameter grid for [`curve_export`]. `σ_in²` is fixed at 1, so a sigma
/// ratio is `σ² / σ_in²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveGrid {
    pub rhos: Vec<f64>,
    pub sigma_ratios: Vec<f64>,
    pub vs: Vec<usize>,
}

impl Default for CurveGrid {
    fn default() -> Self {
        Self {
            rhos: (0..=100).map(|i| i as f64 / 100.0).collect(),
            sigma_ratios: vec![1.0, 2.0, 4.0, 8.0],
            vs: vec![10, 50, 100, 400],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub rho: f64,
    pub sigma_ratio: f64,
    pub v: usize,
    pub bias_sq: f64,
    pub var_single: f64,
    pub var_ensemble: f64,
    /// `log10(var_ensemble / var_single)`.
    pub log_ratio: f64,
}

pub fn curve_export(grid: &CurveGrid) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::with_capacity(grid.rhos.len() * grid.sigma_ratios.len() * grid.vs.len());
    for &ratio in &grid.sigma_ratios {
        for &v in &grid.vs {
            for &rho in &grid.rhos {
                let p = TheoryParams::new(1.0, ratio, rho, v)?;
                let vs = var_single(&p);
                let ve = var_ensemble(&p);
                rows.push(CurveRow {
                    rho,
                    sigma_ratio: ratio,
                    v,
                    bias_sq: bias_sq(&p),
                    var_single: vs,
                    var_ensemble: ve,
                    log_ratio: (ve / vs).log10(),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_curve_csv(rows: &[CurveRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "rho,sigma_ratio,V,bias_sq,var_single,var_ensemble,log_ratio")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.rho, r.sigma_ratio, r.v, r.bias_sq, r.var_single, r.var_ensemble, r.log_ratio
        )?;
    }
    Ok(())
}
