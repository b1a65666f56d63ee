//! Moving-block bootstrap.
//!
//! A [`BootPlan`] is a `B x n` matrix of time indices. Row `b` is built from
//! its own generator seeded with [`mix_seed`]`(seed, b)`, so rows can be
//! produced in any order on any number of threads and the plan is always the
//! same for the same `(n, p, B, seed)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default two-sided 5% critical value for AR lag significance.
pub const DEFAULT_SIG_THRESHOLD: f64 = 1.96;

/// Resampling map shared by every statistic of an MCS run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootPlan {
    indices: Vec<u32>,
    resamples: usize,
    n: usize,
    block_len: usize,
    seed: u64,
}

impl BootPlan {
    /// Wraps an explicit index matrix (row-major, `resamples x n`).
    ///
    /// Useful for hand-built plans in tests; `block_len` is informational.
    pub fn from_indices(indices: Vec<u32>, resamples: usize, n: usize, block_len: usize, seed: u64) -> Result<Self> {
        if resamples == 0 || n == 0 {
            return Err(Error::invalid("bootstrap plan must have at least one row and column"));
        }
        if indices.len() != resamples * n {
            return Err(Error::DimensionMismatch(format!(
                "{} indices for a {resamples} x {n} plan",
                indices.len()
            )));
        }
        if indices.iter().any(|&i| i as usize >= n) {
            return Err(Error::invalid("bootstrap index out of range"));
        }
        Ok(Self {
            indices,
            resamples,
            n,
            block_len,
            seed,
        })
    }

    pub fn resamples(&self) -> usize {
        self.resamples
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, b: usize) -> &[u32] {
        &self.indices[b * self.n..(b + 1) * self.n]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.indices.chunks_exact(self.n)
    }

    /// All indices, row-major.
    pub fn indices(&self) -> &[u32] {
        &self.indices
    }
}

/// Derives the seed of resample `b` from the run seed (SplitMix64 finalizer).
pub fn mix_seed(seed: u64, b: u64) -> u64 {
    let mut z = seed ^ b.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generates a moving-block bootstrap plan.
///
/// Each row concatenates `ceil(n / p)` blocks `[s, s + p)` with `s` uniform on
/// `[0, n - p]`, truncated to length `n`.
pub fn gen_block_indices(n: usize, p: usize, resamples: usize, seed: u64) -> Result<BootPlan> {
    if p < 1 {
        return Err(Error::invalid("block length must be at least 1"));
    }
    if p > n {
        return Err(Error::invalid(format!("block length {p} exceeds series length {n}")));
    }
    if resamples < 1 {
        return Err(Error::invalid("number of resamples must be at least 1"));
    }
    if n > u32::MAX as usize {
        return Err(Error::invalid("series too long for a bootstrap plan"));
    }
    let max_start = (n - p) as u64;
    let mut indices = vec![0u32; resamples * n];
    indices.par_chunks_mut(n).enumerate().for_each(|(b, row)| {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, b as u64));
        for block in row.chunks_mut(p) {
            let start = rng.random_range(0..=max_start) as u32;
            for (k, slot) in block.iter_mut().enumerate() {
                *slot = start + k as u32;
            }
        }
    });
    Ok(BootPlan {
        indices,
        resamples,
        n,
        block_len: p,
        seed,
    })
}

/// Sample mean of a series with its bootstrap distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct BootStats {
    pub sample_mean: f64,
    pub boot_means: Vec<f64>,
    /// `B^-1 * sum_b (boot_means[b] - sample_mean)^2`
    pub var_hat: f64,
}

/// Bootstrap estimate of the variance of the sample mean.
pub fn boot_mean_variance(series: &[f64], plan: &BootPlan) -> Result<BootStats> {
    if series.len() != plan.n() {
        return Err(Error::DimensionMismatch(format!(
            "series has length {}, plan expects {}",
            series.len(),
            plan.n()
        )));
    }
    let n = series.len() as f64;
    let sample_mean = series.iter().sum::<f64>() / n;
    let boot_means: Vec<f64> = plan
        .indices()
        .par_chunks(plan.n())
        .map(|row| row.iter().map(|&i| series[i as usize]).sum::<f64>() / n)
        .collect();
    let var_hat = boot_means
        .iter()
        .map(|m| (m - sample_mean).powi(2))
        .sum::<f64>()
        / boot_means.len() as f64;
    Ok(BootStats {
        sample_mean,
        boot_means,
        var_hat,
    })
}

/// Default AR order cap: `min(10, floor(n^(1/3)))`, at least 1.
pub fn default_max_lag(n: usize) -> usize {
    ((n as f64).cbrt().floor() as usize).clamp(1, 10)
}

/// OLS t-statistics of the lag coefficients of an AR(`p`) with intercept.
///
/// Returns `None` when the regression is degenerate (constant series,
/// singular design or a perfect fit).
pub fn ar_lag_t_stats(series: &[f64], p: usize) -> Option<Vec<f64>> {
    let n = series.len();
    if p == 0 || n < 2 * p + 2 {
        return None;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    if series.iter().all(|&x| x == series[0]) || series.iter().all(|&x| (x - mean).abs() == 0.0) {
        return None;
    }
    let k = p + 1;
    let rows = n - p;
    let mut xtx = DMatrix::<f64>::zeros(k, k);
    let mut xty = DVector::<f64>::zeros(k);
    let mut x = vec![0.0; k];
    for t in p..n {
        x[0] = 1.0;
        for lag in 1..=p {
            x[lag] = series[t - lag];
        }
        for a in 0..k {
            xty[a] += x[a] * series[t];
            for b in 0..=a {
                xtx[(a, b)] += x[a] * x[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            xtx[(b, a)] = xtx[(a, b)];
        }
    }
    let chol = xtx.cholesky()?;
    let beta = chol.solve(&xty);
    let inv = chol.inverse();
    let mut rss = 0.0;
    for t in p..n {
        let mut fit = beta[0];
        for lag in 1..=p {
            fit += beta[lag] * series[t - lag];
        }
        rss += (series[t] - fit).powi(2);
    }
    let dof = (rows - k) as f64;
    let s2 = rss / dof;
    if !(s2 > 0.0) || !s2.is_finite() {
        return None;
    }
    let stats: Vec<f64> = (1..=p).map(|j| beta[j] / (s2 * inv[(j, j)]).sqrt()).collect();
    stats.iter().all(|t| t.is_finite()).then_some(stats)
}

/// Chooses the bootstrap block length from AR fits on loss differentials.
///
/// Every series gets an AR(`p_max`) fit by least squares; its score is the
/// number of lag coefficients with `|t| > sig_threshold`. The block length
/// is the largest score over all series, and 1 when nothing is significant.
/// Degenerate series (constant, singular design) score zero.
pub fn select_block_length(series: &[Vec<f64>], p_max: usize, sig_threshold: f64) -> Result<usize> {
    if series.is_empty() {
        return Err(Error::invalid("no differential series to select a block length from"));
    }
    if p_max < 1 {
        return Err(Error::invalid("maximum AR order must be at least 1"));
    }
    if !(sig_threshold > 0.0) {
        return Err(Error::invalid("significance threshold must be positive"));
    }
    if let Some(s) = series.iter().find(|s| s.len() < 2 * p_max + 2) {
        return Err(Error::invalid(format!(
            "series of length {} is too short for AR({p_max}); need at least {}",
            s.len(),
            2 * p_max + 2
        )));
    }
    let best = series
        .par_iter()
        .map(|s| {
            ar_lag_t_stats(s, p_max)
                .map(|ts| ts.iter().filter(|t| t.abs() > sig_threshold).count())
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0);
    Ok(best.max(1))
}
