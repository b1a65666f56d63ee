//! Sequential Model Confidence Set procedure.
//!
//! The procedure starts from every column of a [`LossMatrix`], tests equal
//! predictive ability (EPA) with a bootstrap p-value, removes the worst model
//! when EPA is rejected and repeats until EPA is accepted. The survivors form
//! the Superior Set of Models.
//!
//! # Arithmetic
//!
//! All differential statistics are built from per-column sums so the work
//! that depends on the series length is done once per run:
//!
//! - `S_i = sum_t l_{t,i}` and `S*_{b,i} = sum_t l_{idx[b,t], i}`, summed in
//!   time order;
//! - `dbar_ij = (S_i - S_j) / n`, `d*_ij(b) = (S*_{b,i} - S*_{b,j}) / n`;
//! - `dbar_i. = sum_{j != i} dbar_ij / (k - 1)`, with the same form for the
//!   bootstrap replicates, summed in set order;
//! - `var(dbar) = B^-1 sum_b (d*(b) - dbar)^2`, summed in resample order.
//!
//! Parallel loops only ever write disjoint slots and every reduction runs in
//! a fixed order, so results are bit-identical for any thread count.
//!
//! Inside [`mcs_procedure`] the working set is kept sorted by model name,
//! which makes the outcome independent of the column order of the input.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossMatrix;
use crate::tsboot::{self, BootPlan};

pub const DEFAULT_ALPHA: f64 = 0.2;
pub const DEFAULT_RESAMPLES: usize = 5000;
pub const DEFAULT_ZERO_VAR_TOL: f64 = 1e-12;

/// EPA test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    /// `T_max = max_i t_i.`
    Tmax,
    /// `T_R = max_{i,j} |t_ij|`
    TR,
}

impl Statistic {
    pub fn other(self) -> Self {
        match self {
            Statistic::Tmax => Statistic::TR,
            Statistic::TR => Statistic::Tmax,
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Tmax => "Tmax",
            Statistic::TR => "TR",
        })
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tmax" => Ok(Statistic::Tmax),
            "tr" => Ok(Statistic::TR),
            _ => Err(Error::invalid(format!("unknown statistic {s:?}, expected Tmax or TR"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsConfig {
    /// Test level in (0, 1).
    pub alpha: f64,
    /// Number of bootstrap resamples, at least 100.
    pub resamples: usize,
    pub statistic: Statistic,
    /// Fixed block length; selected from AR fits when `None`.
    pub block_len: Option<usize>,
    pub seed: u64,
    /// Relative tolerance under which a bootstrap variance counts as zero.
    pub zero_var_tol: f64,
    /// AR order cap for block length selection; `min(10, n^(1/3))` when `None`.
    pub max_lag: Option<usize>,
    pub sig_threshold: f64,
}

impl Default for McsConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            resamples: DEFAULT_RESAMPLES,
            statistic: Statistic::Tmax,
            block_len: None,
            seed: 0,
            zero_var_tol: DEFAULT_ZERO_VAR_TOL,
            max_lag: None,
            sig_threshold: tsboot::DEFAULT_SIG_THRESHOLD,
        }
    }
}

impl McsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.resamples < 100 {
            return Err(Error::invalid(format!(
                "number of resamples must be at least 100, got {}",
                self.resamples
            )));
        }
        if self.block_len == Some(0) {
            return Err(Error::invalid("block length must be at least 1"));
        }
        if !(self.zero_var_tol > 0.0) {
            return Err(Error::invalid("zero variance tolerance must be positive"));
        }
        if self.max_lag == Some(0) {
            return Err(Error::invalid("maximum AR order must be at least 1"));
        }
        if !(self.sig_threshold > 0.0) {
            return Err(Error::invalid("significance threshold must be positive"));
        }
        Ok(())
    }
}

/// Sample and bootstrap column sums of a loss matrix under one plan.
#[derive(Debug, Clone)]
pub struct ResampledSums {
    sample: Vec<f64>,
    boot: Vec<f64>,
    resamples: usize,
    n: usize,
    m: usize,
}

impl ResampledSums {
    pub fn resamples(&self) -> usize {
        self.resamples
    }

    /// `sum_t l_{t,i}`
    pub fn sample(&self, i: usize) -> f64 {
        self.sample[i]
    }

    /// `sum_t l_{idx[b,t], i}`
    pub fn boot(&self, b: usize, i: usize) -> f64 {
        self.boot[b * self.m + i]
    }
}

/// Column sums of every resample in `plan`. `O(B n m)`.
pub fn resample_column_sums(loss: &LossMatrix, plan: &BootPlan) -> Result<ResampledSums> {
    let (n, m) = (loss.n(), loss.m());
    if plan.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "bootstrap plan covers {} periods, loss matrix has {n}",
            plan.n()
        )));
    }
    let values = loss.values();
    let data = values.as_standard_layout();
    let data = data.as_slice().expect("standard layout");

    let mut sample = vec![0.0; m];
    for row in data.chunks_exact(m) {
        for (acc, v) in sample.iter_mut().zip(row) {
            *acc += v;
        }
    }

    let mut boot = vec![0.0; plan.resamples() * m];
    boot.par_chunks_mut(m)
        .zip(plan.indices().par_chunks(n))
        .for_each(|(acc, idx)| {
            for &t in idx {
                let t = t as usize;
                for (a, v) in acc.iter_mut().zip(&data[t * m..(t + 1) * m]) {
                    *a += v;
                }
            }
        });

    Ok(ResampledSums {
        sample,
        boot,
        resamples: plan.resamples(),
        n,
        m,
    })
}

/// Loss differentials of a model subset.
///
/// Pair and model quantities are indexed by position in [`Self::models`].
#[derive(Debug, Clone)]
pub struct Differentials<'a> {
    loss: &'a LossMatrix,
    models: Vec<usize>,
    pair_means: Vec<f64>,
    model_means: Vec<f64>,
    pair_scale: Vec<f64>,
    model_scale: Vec<f64>,
}

impl<'a> Differentials<'a> {
    /// Column ids of the subset, in working order.
    pub fn models(&self) -> &[usize] {
        &self.models
    }

    pub fn k(&self) -> usize {
        self.models.len()
    }

    pub fn n(&self) -> usize {
        self.loss.n()
    }

    pub fn loss(&self) -> &'a LossMatrix {
        self.loss
    }

    /// `dbar_ij` for positions `a`, `b`.
    pub fn pair_mean(&self, a: usize, b: usize) -> f64 {
        self.pair_means[a * self.k() + b]
    }

    /// `dbar_i.` for position `a`.
    pub fn model_mean(&self, a: usize) -> f64 {
        self.model_means[a]
    }

    /// `d_ij,t` for positions `a`, `b`.
    pub fn pair_series(&self, a: usize, b: usize) -> Vec<f64> {
        let (i, j) = (self.models[a], self.models[b]);
        let values = self.loss.values();
        values.rows().into_iter().map(|r| r[i] - r[j]).collect()
    }

    /// `d_i.,t` for position `a`.
    pub fn model_series(&self, a: usize) -> Vec<f64> {
        let values = self.loss.values();
        let denom = (self.k() - 1) as f64;
        values
            .rows()
            .into_iter()
            .map(|r| {
                let li = r[self.models[a]];
                let mut s = 0.0;
                for (b, &j) in self.models.iter().enumerate() {
                    if b != a {
                        s += li - r[j];
                    }
                }
                s / denom
            })
            .collect()
    }
}

/// Differentials of `subset` (column ids, at least two, distinct).
pub fn compute_differentials<'a>(loss: &'a LossMatrix, subset: &[usize]) -> Result<Differentials<'a>> {
    let k = subset.len();
    if k < 2 {
        return Err(Error::invalid("differentials need at least two models"));
    }
    if let Some(&bad) = subset.iter().find(|&&c| c >= loss.m()) {
        return Err(Error::invalid(format!("model index {bad} out of range")));
    }
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != k {
        return Err(Error::invalid("model subset contains duplicates"));
    }

    let n = loss.n();
    let nf = n as f64;
    let values = loss.values();

    let mut sums = vec![0.0; k];
    for row in values.rows() {
        for (s, &c) in sums.iter_mut().zip(subset) {
            *s += row[c];
        }
    }

    let mut pair_means = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            if a != b {
                pair_means[a * k + b] = (sums[a] - sums[b]) / nf;
            }
        }
    }
    let denom = (k - 1) as f64;
    let model_means = (0..k)
        .map(|a| {
            let mut s = 0.0;
            for b in (0..k).filter(|&b| b != a) {
                s += pair_means[a * k + b];
            }
            s / denom
        })
        .collect();

    let mut pair_scale = vec![0.0; k * k];
    for a in 0..k {
        for b in (a + 1)..k {
            let (i, j) = (subset[a], subset[b]);
            let mut q = 0.0;
            for row in values.rows() {
                let d = row[i] - row[j];
                q += d * d;
            }
            pair_scale[a * k + b] = q / nf;
            pair_scale[b * k + a] = q / nf;
        }
    }
    let mut model_scale = vec![0.0; k];
    for row in values.rows() {
        for a in 0..k {
            let li = row[subset[a]];
            let mut s = 0.0;
            for (b, &j) in subset.iter().enumerate() {
                if b != a {
                    s += li - row[j];
                }
            }
            let d = s / denom;
            model_scale[a] += d * d;
        }
    }
    for q in &mut model_scale {
        *q /= nf;
    }

    Ok(Differentials {
        loss,
        models: subset.to_vec(),
        pair_means,
        model_means,
        pair_scale,
        model_scale,
    })
}

/// Studentized differentials of one subset and the observed EPA statistics.
#[derive(Debug, Clone)]
pub struct Statistics {
    models: Vec<usize>,
    var_pair: Vec<f64>,
    t_pair: Vec<f64>,
    zero_pair: Vec<bool>,
    var_model: Vec<f64>,
    t_model: Vec<f64>,
    zero_model: Vec<bool>,
    model_boot: Vec<f64>,
    /// `T_R = max_{i,j} |t_ij|`
    pub t_range: f64,
    /// `T_max = max_i t_i.`
    pub t_max: f64,
}

impl Statistics {
    pub fn models(&self) -> &[usize] {
        &self.models
    }

    pub fn k(&self) -> usize {
        self.models.len()
    }

    /// `t_ij` for positions `a`, `b`; zero on the diagonal.
    pub fn t_pair(&self, a: usize, b: usize) -> f64 {
        self.t_pair[a * self.k() + b]
    }

    /// Bootstrap variance of `dbar_ij` for positions `a`, `b`.
    pub fn var_pair(&self, a: usize, b: usize) -> f64 {
        self.var_pair[a * self.k() + b]
    }

    /// `t_i.` for position `a`.
    pub fn t_model(&self, a: usize) -> f64 {
        self.t_model[a]
    }

    pub fn var_model(&self, a: usize) -> f64 {
        self.var_model[a]
    }

    /// `max_{j != i} t_ij` for position `a`.
    pub fn t_pair_max(&self, a: usize) -> f64 {
        (0..self.k())
            .filter(|&b| b != a)
            .map(|b| self.t_pair(a, b))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn t_obs(&self, kind: Statistic) -> f64 {
        match kind {
            Statistic::Tmax => self.t_max,
            Statistic::TR => self.t_range,
        }
    }
}

/// Studentizes `mean` by `var`, applying the zero-variance rule: when the
/// variance is below `tol` times the raw second moment of the underlying
/// series, the ratio is 0 for a zero mean and an infinite sentinel carrying
/// the sign of the mean otherwise.
fn studentize(mean: f64, var: f64, scale: f64, tol: f64) -> (f64, bool) {
    if var <= tol * scale {
        if mean.abs() <= tol * scale.sqrt() {
            (0.0, true)
        } else {
            (f64::INFINITY.copysign(mean), true)
        }
    } else {
        (mean / var.sqrt(), false)
    }
}

fn upper_pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|a| ((a + 1)..k).map(move |b| (a, b))).collect()
}

/// Statistics of `diffs` from precomputed resample sums. `O(B k^2)`.
pub fn statistics_from_sums(diffs: &Differentials<'_>, sums: &ResampledSums, tol: f64) -> Result<Statistics> {
    if sums.n != diffs.n() || sums.m != diffs.loss.m() {
        return Err(Error::DimensionMismatch(
            "resample sums do not match the loss matrix".into(),
        ));
    }
    let k = diffs.k();
    let resamples = sums.resamples;
    let nf = sums.n as f64;
    let bf = resamples as f64;
    let models = &diffs.models;

    let pairs = upper_pairs(k);
    let pair_vars: Vec<f64> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (i, j) = (models[a], models[b]);
            let dbar = diffs.pair_mean(a, b);
            let mut acc = 0.0;
            for r in 0..resamples {
                let dstar = (sums.boot(r, i) - sums.boot(r, j)) / nf;
                let dev = dstar - dbar;
                acc += dev * dev;
            }
            acc / bf
        })
        .collect();

    let mut var_pair = vec![0.0; k * k];
    let mut t_pair = vec![0.0; k * k];
    let mut zero_pair = vec![true; k * k];
    for (&(a, b), &v) in pairs.iter().zip(&pair_vars) {
        let (t, zero) = studentize(diffs.pair_mean(a, b), v, diffs.pair_scale[a * k + b], tol);
        var_pair[a * k + b] = v;
        var_pair[b * k + a] = v;
        t_pair[a * k + b] = t;
        t_pair[b * k + a] = -t;
        zero_pair[a * k + b] = zero;
        zero_pair[b * k + a] = zero;
    }

    let denom = (k - 1) as f64;
    let mut model_boot = vec![0.0; resamples * k];
    model_boot.par_chunks_mut(k).enumerate().for_each(|(r, out)| {
        for a in 0..k {
            let si = sums.boot(r, models[a]);
            let mut s = 0.0;
            for (b, &j) in models.iter().enumerate() {
                if b != a {
                    s += (si - sums.boot(r, j)) / nf;
                }
            }
            out[a] = s / denom;
        }
    });

    let var_model: Vec<f64> = (0..k)
        .into_par_iter()
        .map(|a| {
            let dbar = diffs.model_mean(a);
            let mut acc = 0.0;
            for r in 0..resamples {
                let dev = model_boot[r * k + a] - dbar;
                acc += dev * dev;
            }
            acc / bf
        })
        .collect();
    let mut t_model = vec![0.0; k];
    let mut zero_model = vec![true; k];
    for a in 0..k {
        let (t, zero) = studentize(diffs.model_mean(a), var_model[a], diffs.model_scale[a], tol);
        t_model[a] = t;
        zero_model[a] = zero;
    }

    let t_range = pairs
        .iter()
        .map(|&(a, b)| t_pair[a * k + b].abs())
        .fold(0.0, f64::max);
    let t_max = t_model.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    Ok(Statistics {
        models: models.clone(),
        var_pair,
        t_pair,
        zero_pair,
        var_model,
        t_model,
        zero_model,
        model_boot,
        t_range,
        t_max,
    })
}

/// Bootstrap draws of the chosen statistic under EPA: centered replicate
/// differentials studentized by the sample variance estimates.
pub fn null_distribution(
    diffs: &Differentials<'_>,
    stats: &Statistics,
    sums: &ResampledSums,
    kind: Statistic,
) -> Vec<f64> {
    let k = diffs.k();
    let nf = sums.n as f64;
    let models = &diffs.models;
    match kind {
        Statistic::TR => {
            let pairs: Vec<(usize, usize, f64, f64)> = upper_pairs(k)
                .into_iter()
                .filter(|&(a, b)| !stats.zero_pair[a * k + b])
                .map(|(a, b)| (a, b, diffs.pair_mean(a, b), stats.var_pair[a * k + b].sqrt()))
                .collect();
            (0..sums.resamples)
                .into_par_iter()
                .map(|r| {
                    let mut best = 0.0f64;
                    for &(a, b, dbar, sd) in &pairs {
                        let dstar = (sums.boot(r, models[a]) - sums.boot(r, models[b])) / nf;
                        best = best.max(((dstar - dbar) / sd).abs());
                    }
                    best
                })
                .collect()
        }
        Statistic::Tmax => (0..sums.resamples)
            .into_par_iter()
            .map(|r| {
                let mut best = f64::NEG_INFINITY;
                for a in 0..k {
                    let z = if stats.zero_model[a] {
                        0.0
                    } else {
                        (stats.model_boot[r * k + a] - diffs.model_mean(a)) / stats.var_model[a].sqrt()
                    };
                    best = best.max(z);
                }
                best
            })
            .collect(),
    }
}

/// Fraction of bootstrap draws at or above the observed statistic.
pub fn pvalue_from_sums(
    diffs: &Differentials<'_>,
    stats: &Statistics,
    sums: &ResampledSums,
    kind: Statistic,
) -> f64 {
    let t_obs = stats.t_obs(kind);
    let draws = null_distribution(diffs, stats, sums, kind);
    let hits = draws.iter().filter(|&&t| t >= t_obs).count();
    hits as f64 / draws.len() as f64
}

/// Observed statistics for `diffs` under `plan`.
pub fn compute_statistics(diffs: &Differentials<'_>, plan: &BootPlan, tol: f64) -> Result<Statistics> {
    let sums = resample_column_sums(diffs.loss, plan)?;
    statistics_from_sums(diffs, &sums, tol)
}

/// Bootstrap p-value of an observed statistic `t_obs` of kind `kind`.
///
/// The replicates are studentized with the same variance estimates as the
/// sample statistic.
pub fn epa_pvalue(t_obs: f64, diffs: &Differentials<'_>, plan: &BootPlan, kind: Statistic, tol: f64) -> Result<f64> {
    let sums = resample_column_sums(diffs.loss, plan)?;
    let stats = statistics_from_sums(diffs, &sums, tol)?;
    let draws = null_distribution(diffs, &stats, &sums, kind);
    let hits = draws.iter().filter(|&&t| t >= t_obs).count();
    Ok(hits as f64 / draws.len() as f64)
}

/// Column id of the worst model under the elimination rule of `kind`.
///
/// `Tmax` removes the largest `t_i.`, `TR` the largest `max_j t_ij`. Exact
/// ties go to the lexicographically smallest model name.
pub fn eliminate_worst(stats: &Statistics, loss: &LossMatrix, kind: Statistic) -> Result<usize> {
    let k = stats.k();
    if k < 2 {
        return Err(Error::invalid("cannot eliminate from a set with fewer than two models"));
    }
    let score = |a: usize| match kind {
        Statistic::Tmax => stats.t_model(a),
        Statistic::TR => stats.t_pair_max(a),
    };
    let names = loss.names();
    let worst = (0..k)
        .max_by(|&a, &b| {
            score(a)
                .partial_cmp(&score(b))
                .unwrap_or(Ordering::Equal)
                .then_with(|| names[stats.models[b]].cmp(&names[stats.models[a]]))
        })
        .expect("non-empty set");
    Ok(stats.models[worst])
}

/// One elimination: the model removed and the EPA p-value of the set it was
/// removed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationStep {
    pub model: usize,
    pub t_obs: f64,
    pub step_pvalue: f64,
    /// Running maximum of step p-values up to and including this one.
    pub mcs_pvalue: f64,
}

/// State of the elimination loop.
#[derive(Debug, Clone)]
pub struct McsState {
    /// Surviving column ids, sorted by model name.
    pub surviving: Vec<usize>,
    pub eliminated: Vec<EliminationStep>,
    /// Statistics of the last tested set.
    pub stats: Option<Statistics>,
}

impl McsState {
    pub fn new(loss: &LossMatrix, models: &[usize]) -> Self {
        let mut surviving = models.to_vec();
        surviving.sort_by(|&a, &b| loss.names()[a].cmp(&loss.names()[b]));
        Self {
            surviving,
            eliminated: Vec::new(),
            stats: None,
        }
    }

    /// Running maximum of step p-values so far.
    pub fn running_pvalue(&self) -> f64 {
        self.eliminated.last().map_or(0.0, |s| s.mcs_pvalue)
    }

    /// Tests EPA on the current set and removes its worst model.
    ///
    /// Returns the step; `None` once a single model is left.
    pub fn advance(
        &mut self,
        loss: &LossMatrix,
        sums: &ResampledSums,
        kind: Statistic,
        tol: f64,
    ) -> Result<Option<EliminationStep>> {
        if self.surviving.len() < 2 {
            return Ok(None);
        }
        let diffs = compute_differentials(loss, &self.surviving)?;
        let stats = statistics_from_sums(&diffs, sums, tol)?;
        let step_pvalue = pvalue_from_sums(&diffs, &stats, sums, kind);
        let worst = eliminate_worst(&stats, loss, kind)?;
        let step = EliminationStep {
            model: worst,
            t_obs: stats.t_obs(kind),
            step_pvalue,
            mcs_pvalue: self.running_pvalue().max(step_pvalue),
        };
        self.surviving.retain(|&c| c != worst);
        self.eliminated.push(step.clone());
        self.stats = Some(stats);
        Ok(Some(step))
    }

    /// Runs to a single model and returns the MCS p-value of every model,
    /// indexed by column id. The last model gets 1.
    fn run_to_end(mut self, loss: &LossMatrix, sums: &ResampledSums, kind: Statistic, tol: f64) -> Result<Sequence> {
        let mut first_stats = None;
        while let Some(_step) = self.advance(loss, sums, kind, tol)? {
            if first_stats.is_none() {
                first_stats = self.stats.clone();
            }
        }
        let mut pvalues = vec![f64::NAN; loss.m()];
        for s in &self.eliminated {
            pvalues[s.model] = s.mcs_pvalue;
        }
        let last = self.surviving[0];
        pvalues[last] = 1.0;
        Ok(Sequence {
            steps: self.eliminated,
            last,
            first_stats,
            pvalues,
        })
    }
}

struct Sequence {
    steps: Vec<EliminationStep>,
    last: usize,
    first_stats: Option<Statistics>,
    pvalues: Vec<f64>,
}

/// A model eliminated before the Superior Set was reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminatedModel {
    pub name: String,
    pub step_pvalue: f64,
    pub mcs_pvalue: f64,
}

/// One row of the Superior Set report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsmRow {
    pub name: String,
    pub rank_m: usize,
    /// Final `t_i.`; absent for a single-model set.
    pub v_m: Option<f64>,
    pub mcs_m: f64,
    pub rank_r: usize,
    /// Final `max_j t_ij`; absent for a single-model set.
    pub v_r: Option<f64>,
    pub mcs_r: f64,
    /// Mean loss over the evaluation period.
    pub loss: f64,
}

/// Outcome of [`mcs_procedure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsmResult {
    /// Surviving models in input column order.
    pub superior: Vec<SsmRow>,
    /// Models removed before EPA was accepted, in elimination order.
    pub eliminated: Vec<EliminatedModel>,
    /// Full elimination order under the driving statistic, down to one model.
    pub sequence: Vec<String>,
    pub statistic: Statistic,
    pub block_len: usize,
    pub n: usize,
    pub m: usize,
    pub config: McsConfig,
    /// Set when the input held a single model and no test was run.
    pub single_model: bool,
    pub elapsed: Duration,
}

impl SsmResult {
    pub fn superior_names(&self) -> Vec<&str> {
        self.superior.iter().map(|r| r.name.as_str()).collect()
    }

    /// MCS p-value under the driving statistic for a surviving model.
    pub fn mcs_pvalue(&self, row: &SsmRow) -> f64 {
        match self.statistic {
            Statistic::Tmax => row.mcs_m,
            Statistic::TR => row.mcs_r,
        }
    }

    /// Copy with the wall-clock time cleared, for comparing runs.
    pub fn without_timing(&self) -> Self {
        Self {
            elapsed: Duration::ZERO,
            ..self.clone()
        }
    }
}

/// Block length from AR fits on every pairwise differential of the full set.
pub fn auto_block_length(loss: &LossMatrix, max_lag: Option<usize>, sig_threshold: f64) -> Result<usize> {
    let n = loss.n();
    let cap = n.saturating_sub(2) / 2;
    let p_max = max_lag.unwrap_or_else(|| tsboot::default_max_lag(n)).min(cap);
    if p_max == 0 || loss.m() < 2 {
        return Ok(1);
    }
    // pairs oriented by model name so the choice ignores column order
    let mut all: Vec<usize> = (0..loss.m()).collect();
    all.sort_by(|&a, &b| loss.names()[a].cmp(&loss.names()[b]));
    let diffs = compute_differentials(loss, &all)?;
    let series: Vec<Vec<f64>> = upper_pairs(loss.m())
        .into_iter()
        .map(|(a, b)| diffs.pair_series(a, b))
        .collect();
    tsboot::select_block_length(&series, p_max, sig_threshold)
}

fn rank_by(values: &[(usize, Option<f64>)], names: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&x, &y| {
        let (cx, vx) = values[x];
        let (cy, vy) = values[y];
        vx.unwrap_or(0.0)
            .partial_cmp(&vy.unwrap_or(0.0))
            .unwrap_or(Ordering::Equal)
            .then_with(|| names[cx].cmp(&names[cy]))
    });
    let mut ranks = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// Runs the Model Confidence Set procedure.
///
/// The full elimination order is computed once under `cfg.statistic`; the
/// Superior Set is the set on which EPA is first accepted at `cfg.alpha`.
/// Survivors keep their place in the continued elimination order, which
/// gives each of them its own monotone MCS p-value. The other statistic's
/// columns come from a separate elimination run started from the Superior
/// Set with the same bootstrap plan.
pub fn mcs_procedure(loss: &LossMatrix, cfg: &McsConfig) -> Result<SsmResult> {
    cfg.validate()?;
    let start = Instant::now();
    let (n, m) = (loss.n(), loss.m());
    let means = loss.column_means();

    if m == 1 {
        return Ok(SsmResult {
            superior: vec![SsmRow {
                name: loss.names()[0].clone(),
                rank_m: 1,
                v_m: None,
                mcs_m: 1.0,
                rank_r: 1,
                v_r: None,
                mcs_r: 1.0,
                loss: means[0],
            }],
            eliminated: Vec::new(),
            sequence: Vec::new(),
            statistic: cfg.statistic,
            block_len: cfg.block_len.unwrap_or(1),
            n,
            m,
            config: cfg.clone(),
            single_model: true,
            elapsed: start.elapsed(),
        });
    }

    let block_len = match cfg.block_len {
        Some(p) => {
            if n < 2 * p {
                return Err(Error::invalid(format!(
                    "block length {p} needs at least {} periods, got {n}",
                    2 * p
                )));
            }
            p
        }
        None => auto_block_length(loss, cfg.max_lag, cfg.sig_threshold)?,
    };
    let plan = tsboot::gen_block_indices(n, block_len, cfg.resamples, cfg.seed)?;
    let sums = resample_column_sums(loss, &plan)?;
    let tol = cfg.zero_var_tol;
    let all: Vec<usize> = (0..m).collect();

    let main = McsState::new(loss, &all).run_to_end(loss, &sums, cfg.statistic, tol)?;
    let cut = main
        .steps
        .iter()
        .position(|s| s.step_pvalue >= cfg.alpha)
        .unwrap_or(main.steps.len());
    let eliminated: Vec<EliminatedModel> = main.steps[..cut]
        .iter()
        .map(|s| EliminatedModel {
            name: loss.names()[s.model].clone(),
            step_pvalue: s.step_pvalue,
            mcs_pvalue: s.mcs_pvalue,
        })
        .collect();
    let mut survivors: Vec<usize> = main.steps[cut..].iter().map(|s| s.model).collect();
    survivors.push(main.last);
    survivors.sort_unstable();

    // Statistics of the Superior Set itself, plus the other statistic's
    // elimination run from there.
    let other_kind = cfg.statistic.other();
    let other = McsState::new(loss, &survivors).run_to_end(loss, &sums, other_kind, tol)?;
    let final_stats = other.first_stats.as_ref();
    let v_of = |col: usize| -> (Option<f64>, Option<f64>) {
        match final_stats {
            Some(st) => {
                let a = st.models().iter().position(|&c| c == col).expect("survivor in set");
                (Some(st.t_model(a)), Some(st.t_pair_max(a)))
            }
            None => (None, None),
        }
    };

    let (p_m, p_r) = match cfg.statistic {
        Statistic::Tmax => (&main.pvalues, &other.pvalues),
        Statistic::TR => (&other.pvalues, &main.pvalues),
    };
    let vs: Vec<(Option<f64>, Option<f64>)> = survivors.iter().map(|&c| v_of(c)).collect();
    let vm: Vec<(usize, Option<f64>)> = survivors.iter().zip(&vs).map(|(&c, v)| (c, v.0)).collect();
    let vr: Vec<(usize, Option<f64>)> = survivors.iter().zip(&vs).map(|(&c, v)| (c, v.1)).collect();
    let rank_m = rank_by(&vm, loss.names());
    let rank_r = rank_by(&vr, loss.names());

    let superior = survivors
        .iter()
        .enumerate()
        .map(|(x, &c)| SsmRow {
            name: loss.names()[c].clone(),
            rank_m: rank_m[x],
            v_m: vs[x].0,
            mcs_m: p_m[c],
            rank_r: rank_r[x],
            v_r: vs[x].1,
            mcs_r: p_r[c],
            loss: means[c],
        })
        .collect();

    let mut sequence: Vec<String> = main.steps.iter().map(|s| loss.names()[s.model].clone()).collect();
    sequence.push(loss.names()[main.last].clone());

    Ok(SsmResult {
        superior,
        eliminated,
        sequence,
        statistic: cfg.statistic,
        block_len,
        n,
        m,
        config: cfg.clone(),
        single_model: false,
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsboot::gen_block_indices;

    fn matrix(cols: &[Vec<f64>]) -> LossMatrix {
        let names = (0..cols.len()).map(|i| format!("m{}", i + 1)).collect();
        LossMatrix::from_columns(names, cols).unwrap()
    }

    #[test]
    fn differentials_hand_examples() {
        let lm = matrix(&[vec![0.3, 0.7, 0.1], vec![0.3, 0.7, 0.1]]);
        let d = compute_differentials(&lm, &[0, 1]).unwrap();
        assert_eq!(d.pair_mean(0, 1), 0.0);
        assert_eq!(d.model_mean(0), 0.0);
        assert_eq!(d.model_mean(1), 0.0);

        let lm = matrix(&[vec![0.0; 4], vec![1.0; 4]]);
        let d = compute_differentials(&lm, &[0, 1]).unwrap();
        assert_eq!(d.pair_mean(0, 1), -1.0);
        assert_eq!(d.model_mean(0), -1.0);
        assert_eq!(d.model_mean(1), 1.0);

        let lm = matrix(&[vec![0.0; 4], vec![1.0; 4], vec![2.0; 4]]);
        let d = compute_differentials(&lm, &[0, 1, 2]).unwrap();
        assert_eq!(d.model_mean(0), -1.5);
        assert_eq!(d.pair_mean(2, 0), -d.pair_mean(0, 2));

        assert!(compute_differentials(&lm, &[0]).is_err());
        assert!(compute_differentials(&lm, &[0, 0]).is_err());
        assert!(compute_differentials(&lm, &[0, 5]).is_err());
    }

    #[test]
    fn identical_models_give_zero_statistics_and_unit_pvalue() {
        let col: Vec<f64> = (0..50).map(|t| ((t * 37) % 11) as f64 * 0.1).collect();
        let lm = matrix(&[col.clone(), col.clone(), col]);
        let plan = gen_block_indices(50, 2, 200, 4).unwrap();
        let d = compute_differentials(&lm, &[0, 1, 2]).unwrap();
        let s = compute_statistics(&d, &plan, DEFAULT_ZERO_VAR_TOL).unwrap();
        assert_eq!(s.t_range, 0.0);
        assert_eq!(s.t_max, 0.0);
        for kind in [Statistic::Tmax, Statistic::TR] {
            let p = epa_pvalue(s.t_obs(kind), &d, &plan, kind, DEFAULT_ZERO_VAR_TOL).unwrap();
            assert_eq!(p, 1.0);
        }
    }

    #[test]
    fn constant_gap_is_an_infinite_statistic() {
        let base: Vec<f64> = (0..40).map(|t| (t as f64 * 0.37).sin()).collect();
        let worse: Vec<f64> = base.iter().map(|v| v + 1.0).collect();
        let lm = matrix(&[base, worse]);
        let plan = gen_block_indices(40, 1, 200, 1).unwrap();
        let d = compute_differentials(&lm, &[0, 1]).unwrap();
        let s = compute_statistics(&d, &plan, DEFAULT_ZERO_VAR_TOL).unwrap();
        assert_eq!(s.t_pair(1, 0), f64::INFINITY);
        assert_eq!(s.t_max, f64::INFINITY);
        assert_eq!(eliminate_worst(&s, &lm, Statistic::Tmax).unwrap(), 1);
        assert_eq!(eliminate_worst(&s, &lm, Statistic::TR).unwrap(), 1);
        let p = epa_pvalue(s.t_max, &d, &plan, Statistic::Tmax, DEFAULT_ZERO_VAR_TOL).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn ties_go_to_smallest_name() {
        let col: Vec<f64> = (0..30).map(|t| (t as f64).cos()).collect();
        let lm = LossMatrix::from_columns(vec!["b".into(), "a".into()], &[col.clone(), col]).unwrap();
        let plan = gen_block_indices(30, 1, 100, 0).unwrap();
        let d = compute_differentials(&lm, &[0, 1]).unwrap();
        let s = compute_statistics(&d, &plan, DEFAULT_ZERO_VAR_TOL).unwrap();
        assert_eq!(eliminate_worst(&s, &lm, Statistic::Tmax).unwrap(), 1);
        assert_eq!(eliminate_worst(&s, &lm, Statistic::TR).unwrap(), 1);
    }

    #[test]
    fn duplicated_pair_against_a_worse_model() {
        let col: Vec<f64> = (0..60).map(|t| ((t * 7) % 13) as f64 * 0.05).collect();
        let worse: Vec<f64> = col.iter().enumerate().map(|(t, v)| v + 0.5 + 0.1 * ((t % 3) as f64)).collect();
        let lm = matrix(&[col.clone(), worse, col]);
        let plan = gen_block_indices(60, 2, 200, 9).unwrap();
        let d = compute_differentials(&lm, &[0, 1, 2]).unwrap();
        let s = compute_statistics(&d, &plan, DEFAULT_ZERO_VAR_TOL).unwrap();
        assert_eq!(eliminate_worst(&s, &lm, Statistic::Tmax).unwrap(), 1);
        assert_eq!(eliminate_worst(&s, &lm, Statistic::TR).unwrap(), 1);
    }

    #[test]
    fn config_validation() {
        let ok = McsConfig::default();
        assert!(ok.validate().is_ok());
        assert!(McsConfig { alpha: 1.5, ..ok.clone() }.validate().is_err());
        assert!(McsConfig { alpha: 0.0, ..ok.clone() }.validate().is_err());
        assert!(McsConfig { resamples: 99, ..ok.clone() }.validate().is_err());
        assert!(McsConfig { block_len: Some(0), ..ok.clone() }.validate().is_err());
        assert!(McsConfig { zero_var_tol: 0.0, ..ok }.validate().is_err());
    }

    #[test]
    fn single_model_short_circuits() {
        let lm = matrix(&[vec![1.0, 2.0, 3.0]]);
        let r = mcs_procedure(&lm, &McsConfig::default()).unwrap();
        assert!(r.single_model);
        assert_eq!(r.superior.len(), 1);
        assert_eq!(r.superior[0].mcs_m, 1.0);
        assert_eq!(r.superior[0].loss, 2.0);
        assert!(r.eliminated.is_empty());
    }

    #[test]
    fn statistic_names_parse() {
        assert_eq!("Tmax".parse::<Statistic>().unwrap(), Statistic::Tmax);
        assert_eq!("TR".parse::<Statistic>().unwrap(), Statistic::TR);
        assert!("T".parse::<Statistic>().is_err());
    }
}
