//! Training-time measurements as the sample count grows.
//!
//! The upper layers see only winner codes, so with `k` held fixed their cost
//! should grow linearly in `n`. Each run trains a bottom layer on a random
//! subset (timed separately) and then the upper schedule on its codes.

use std::io::Write;
use std::time::Instant;

use crate::data::DataMatrix;
use crate::error::{invalid, Result};
use crate::network::{train_layer, Input, Similarity};
use crate::rng::{subsample_without_replacement, Purpose, RandomStream};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub ns: Vec<usize>,
    pub vs: Vec<usize>,
    pub runs: usize,
    /// `k` of the bottom layer.
    pub k1: usize,
    /// `k` of every upper layer; the same for every `n`.
    pub upper_ks: Vec<usize>,
    pub a: f64,
    pub similarity: Similarity,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub v: usize,
    pub n: usize,
    pub run: usize,
    pub bottom_seconds: f64,
    pub upper_seconds: f64,
}

/// Rows ordered by `V`, then `n`, then run.
pub fn scaling_bench(data: &DataMatrix, config: &BenchConfig) -> Result<Vec<BenchRow>> {
    if config.runs == 0 || config.ns.is_empty() || config.vs.is_empty() {
        return Err(invalid("bench needs at least one run, sample count and ensemble size"));
    }
    if let Some(&n) = config.ns.iter().find(|&&n| n > data.n() || n < config.k1) {
        return Err(invalid(format!(
            "sample count {n} must lie between k1 = {} and the {} available rows",
            config.k1,
            data.n()
        )));
    }
    let mut vs = config.vs.clone();
    vs.sort_unstable();
    let mut ns = config.ns.clone();
    ns.sort_unstable();
    let base = RandomStream::new(config.seed);
    let mut rows = Vec::new();
    for &v in &vs {
        for &n in &ns {
            for run in 0..config.runs {
                let run_stream = base.with_index(run as u32);
                let mut pick = subsample_without_replacement(&run_stream.with_purpose(Purpose::Subset).with_layer(n as u32), data.n(), n)?;
                pick.sort_unstable();
                let subset = data.select_rows(&pick);

                let start = Instant::now();
                let (_, mut codes) = train_layer(Input::Data(&subset), config.k1, v, config.a, config.similarity, &run_stream.with_layer(0))?;
                let bottom_seconds = start.elapsed().as_secs_f64();

                let start = Instant::now();
                for (l, &k) in config.upper_ks.iter().enumerate() {
                    let stream = run_stream.with_layer(l as u32 + 1);
                    codes = train_layer(Input::Codes(&codes), k, v, config.a, Similarity::DotProduct, &stream)?.1;
                }
                let upper_seconds = start.elapsed().as_secs_f64();
                log::info!("V = {v}, n = {n}, run {run}: bottom {bottom_seconds:.3}s, upper {upper_seconds:.3}s");
                rows.push(BenchRow {
                    v,
                    n,
                    run,
                    bottom_seconds,
                    upper_seconds,
                });
            }
        }
    }
    Ok(rows)
}

/// Mean upper-layer time at `n_large` divided by the mean at `n_small`, for ensemble size `v`.
pub fn upper_time_ratio(rows: &[BenchRow], v: usize, n_small: usize, n_large: usize) -> Option<f64> {
    let mean = |n: usize| {
        let t: Vec<f64> = rows.iter().filter(|r| r.v == v && r.n == n).map(|r| r.upper_seconds).collect();
        (!t.is_empty()).then(|| t.iter().sum::<f64>() / t.len() as f64)
    };
    Some(mean(n_large)? / mean(n_small)?)
}

pub fn write_bench_csv(rows: &[BenchRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "V,n,run,bottom_seconds,upper_seconds")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.v, r.n, r.run, r.bottom_seconds, r.upper_seconds)?;
    }
    Ok(())
}
