//! Shared helpers for integration tests: a naive reference implementation of
//! the MCS statistics and elimination loop, an independent OLS, and data
//! generators.
#![allow(dead_code, clippy::needless_range_loop)]

use mcs_core::tsboot::gen_block_indices;
use mcs_core::{LossMatrix, Statistic};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
}

pub fn names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("model{i:02}")).collect()
}

/// `m` iid N(mean_i, 1) loss columns.
pub fn normal_losses(n: usize, means: &[f64], seed: u64) -> LossMatrix {
    let mut r = rng(seed);
    let cols: Vec<Vec<f64>> = means
        .iter()
        .map(|&mu| {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut r);
                    mu + z
                })
                .collect()
        })
        .collect();
    LossMatrix::from_columns(names(means.len()), &cols).unwrap()
}

pub fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
    let e = normals(n + 200, seed);
    let mut x = 0.0;
    let mut out = Vec::with_capacity(n);
    for (t, z) in e.into_iter().enumerate() {
        x = phi * x + z;
        if t >= 200 {
            out.push(x);
        }
    }
    out
}

/// OLS lag t-statistics of an AR(p) with intercept, solved by Gauss-Jordan
/// elimination with partial pivoting on the normal equations.
pub fn ols_lag_t_stats(y: &[f64], p: usize) -> Option<Vec<f64>> {
    let n = y.len();
    let k = p + 1;
    let rows = n - p;
    let design: Vec<Vec<f64>> = (p..n)
        .map(|t| {
            let mut x = vec![1.0];
            x.extend((1..=p).map(|l| y[t - l]));
            x
        })
        .collect();
    let target: Vec<f64> = y[p..].to_vec();
    // augmented [X'X | I | X'y]
    let mut a = vec![vec![0.0; 2 * k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = design.iter().map(|x| x[i] * x[j]).sum();
        }
        a[i][k + i] = 1.0;
        a[i][2 * k] = design.iter().zip(&target).map(|(x, t)| x[i] * t).sum();
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for r in 0..k {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    let pivot_row = a[col].clone();
                    for (v, pv) in a[r].iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    let beta: Vec<f64> = (0..k).map(|i| a[i][2 * k]).collect();
    let rss: f64 = design
        .iter()
        .zip(&target)
        .map(|(x, t)| {
            let fit: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
            (t - fit).powi(2)
        })
        .sum();
    let s2 = rss / (rows - k) as f64;
    Some((1..=p).map(|j| beta[j] / (s2 * a[j][k + j]).sqrt()).collect())
}

/// Block length rule re-derived from the independent OLS: largest count of
/// significant lags over all series, at least 1.
pub fn oracle_block_length(series: &[Vec<f64>], p: usize, thr: f64) -> usize {
    series
        .iter()
        .map(|s| {
            ols_lag_t_stats(s, p)
                .map(|ts| ts.iter().filter(|t| t.abs() > thr).count())
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0)
        .max(1)
}

// ---------------------------------------------------------------------------
// Naive MCS
//
// Everything is recomputed from the raw loss columns and resample indices on
// every call, with plain loops. The arithmetic follows the documented
// definitions: resample sums are accumulated in time (index) order, pair
// means are differences of sums divided by n, model means average the pair
// means over the other models in set order, and bootstrap variances sum
// squared deviations in resample order.

pub struct Naive<'a> {
    pub cols: Vec<Vec<f64>>,
    pub names: &'a [String],
    pub plan: Vec<Vec<usize>>,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct NaiveStats {
    pub set: Vec<usize>,
    pub t_pair: Vec<Vec<f64>>,
    pub t_model: Vec<f64>,
    pub zero_pair: Vec<Vec<bool>>,
    pub zero_model: Vec<bool>,
    pub var_pair: Vec<Vec<f64>>,
    pub var_model: Vec<f64>,
    pub t_range: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveRow {
    pub name: String,
    pub rank_m: usize,
    pub v_m: Option<f64>,
    pub mcs_m: f64,
    pub rank_r: usize,
    pub v_r: Option<f64>,
    pub mcs_r: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveResult {
    pub superior: Vec<NaiveRow>,
    pub eliminated: Vec<(String, f64, f64)>,
    pub sequence: Vec<String>,
}

impl<'a> Naive<'a> {
    pub fn new(loss: &'a LossMatrix, block_len: usize, resamples: usize, seed: u64, tol: f64) -> Self {
        let plan = gen_block_indices(loss.n(), block_len, resamples, seed).unwrap();
        let plan = plan
            .rows()
            .map(|r| r.iter().map(|&i| i as usize).collect())
            .collect();
        let cols = (0..loss.m()).map(|i| loss.column(i).to_vec()).collect();
        Self {
            cols,
            names: loss.names(),
            plan,
            tol,
        }
    }

    fn n(&self) -> usize {
        self.cols[0].len()
    }

    fn sum(&self, i: usize) -> f64 {
        let mut s = 0.0;
        for t in 0..self.n() {
            s += self.cols[i][t];
        }
        s
    }

    fn boot_sum(&self, b: usize, i: usize) -> f64 {
        let mut s = 0.0;
        for &t in &self.plan[b] {
            s += self.cols[i][t];
        }
        s
    }

    fn pair_mean(&self, i: usize, j: usize) -> f64 {
        (self.sum(i) - self.sum(j)) / self.n() as f64
    }

    fn pair_boot(&self, b: usize, i: usize, j: usize) -> f64 {
        (self.boot_sum(b, i) - self.boot_sum(b, j)) / self.n() as f64
    }

    fn model_mean(&self, set: &[usize], a: usize) -> f64 {
        let mut s = 0.0;
        for &j in set {
            if j != set[a] {
                s += self.pair_mean(set[a], j);
            }
        }
        s / (set.len() - 1) as f64
    }

    fn model_boot(&self, set: &[usize], b: usize, a: usize) -> f64 {
        let mut s = 0.0;
        for &j in set {
            if j != set[a] {
                s += self.pair_boot(b, set[a], j);
            }
        }
        s / (set.len() - 1) as f64
    }

    fn pair_scale(&self, i: usize, j: usize) -> f64 {
        let mut q = 0.0;
        for t in 0..self.n() {
            let d = self.cols[i][t] - self.cols[j][t];
            q += d * d;
        }
        q / self.n() as f64
    }

    fn model_scale(&self, set: &[usize], a: usize) -> f64 {
        let mut q = 0.0;
        for t in 0..self.n() {
            let li = self.cols[set[a]][t];
            let mut s = 0.0;
            for &j in set {
                if j != set[a] {
                    s += li - self.cols[j][t];
                }
            }
            let d = s / (set.len() - 1) as f64;
            q += d * d;
        }
        q / self.n() as f64
    }

    fn studentize(&self, mean: f64, var: f64, scale: f64) -> (f64, bool) {
        if var <= self.tol * scale {
            if mean.abs() <= self.tol * scale.sqrt() {
                (0.0, true)
            } else if mean > 0.0 {
                (f64::INFINITY, true)
            } else {
                (f64::NEG_INFINITY, true)
            }
        } else {
            (mean / var.sqrt(), false)
        }
    }

    pub fn stats(&self, set: &[usize]) -> NaiveStats {
        let k = set.len();
        let bn = self.plan.len();
        let mut t_pair = vec![vec![0.0; k]; k];
        let mut zero_pair = vec![vec![true; k]; k];
        let mut var_pair = vec![vec![0.0; k]; k];
        for a in 0..k {
            for b in (a + 1)..k {
                let dbar = self.pair_mean(set[a], set[b]);
                let mut acc = 0.0;
                for r in 0..bn {
                    let dev = self.pair_boot(r, set[a], set[b]) - dbar;
                    acc += dev * dev;
                }
                let v = acc / bn as f64;
                let (t, z) = self.studentize(dbar, v, self.pair_scale(set[a], set[b]));
                t_pair[a][b] = t;
                t_pair[b][a] = -t;
                zero_pair[a][b] = z;
                zero_pair[b][a] = z;
                var_pair[a][b] = v;
                var_pair[b][a] = v;
            }
        }
        let mut t_model = vec![0.0; k];
        let mut zero_model = vec![true; k];
        let mut var_model = vec![0.0; k];
        for a in 0..k {
            let dbar = self.model_mean(set, a);
            let mut acc = 0.0;
            for r in 0..bn {
                let dev = self.model_boot(set, r, a) - dbar;
                acc += dev * dev;
            }
            var_model[a] = acc / bn as f64;
            let (t, z) = self.studentize(dbar, var_model[a], self.model_scale(set, a));
            t_model[a] = t;
            zero_model[a] = z;
        }
        let mut t_range: f64 = 0.0;
        for a in 0..k {
            for b in (a + 1)..k {
                t_range = t_range.max(t_pair[a][b].abs());
            }
        }
        let t_max = t_model.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        NaiveStats {
            set: set.to_vec(),
            t_pair,
            t_model,
            zero_pair,
            zero_model,
            var_pair,
            var_model,
            t_range,
            t_max,
        }
    }

    pub fn pvalue(&self, st: &NaiveStats, kind: Statistic) -> f64 {
        let set = &st.set;
        let k = set.len();
        let t_obs = match kind {
            Statistic::Tmax => st.t_max,
            Statistic::TR => st.t_range,
        };
        let mut hits = 0usize;
        for r in 0..self.plan.len() {
            let draw = match kind {
                Statistic::TR => {
                    let mut best: f64 = 0.0;
                    for a in 0..k {
                        for b in (a + 1)..k {
                            if st.zero_pair[a][b] {
                                continue;
                            }
                            let z = (self.pair_boot(r, set[a], set[b]) - self.pair_mean(set[a], set[b]))
                                / st.var_pair[a][b].sqrt();
                            best = best.max(z.abs());
                        }
                    }
                    best
                }
                Statistic::Tmax => {
                    let mut best = f64::NEG_INFINITY;
                    for a in 0..k {
                        let z = if st.zero_model[a] {
                            0.0
                        } else {
                            (self.model_boot(set, r, a) - self.model_mean(set, a)) / st.var_model[a].sqrt()
                        };
                        best = best.max(z);
                    }
                    best
                }
            };
            if draw >= t_obs {
                hits += 1;
            }
        }
        hits as f64 / self.plan.len() as f64
    }

    fn sorted(&self, set: &[usize]) -> Vec<usize> {
        let mut s = set.to_vec();
        s.sort_by(|&a, &b| self.names[a].cmp(&self.names[b]));
        s
    }

    pub fn worst(&self, st: &NaiveStats, kind: Statistic) -> usize {
        let k = st.set.len();
        let score = |a: usize| match kind {
            Statistic::Tmax => st.t_model[a],
            Statistic::TR => (0..k)
                .filter(|&b| b != a)
                .map(|b| st.t_pair[a][b])
                .fold(f64::NEG_INFINITY, f64::max),
        };
        let mut best = 0;
        for a in 1..k {
            let (sa, sb) = (score(a), score(best));
            if sa > sb || (sa == sb && self.names[st.set[a]] < self.names[st.set[best]]) {
                best = a;
            }
        }
        st.set[best]
    }

    /// Full elimination: `(model, step p, running max p)` per step, then the
    /// last model.
    pub fn sequence(&self, set: &[usize], kind: Statistic) -> (Vec<(usize, f64, f64)>, usize) {
        let mut set = self.sorted(set);
        let mut steps = Vec::new();
        let mut running: f64 = 0.0;
        while set.len() > 1 {
            let st = self.stats(&set);
            let p = self.pvalue(&st, kind);
            running = running.max(p);
            let w = self.worst(&st, kind);
            steps.push((w, p, running));
            set.retain(|&c| c != w);
        }
        (steps, set[0])
    }

    pub fn procedure(&self, alpha: f64, kind: Statistic) -> NaiveResult {
        let m = self.cols.len();
        let all: Vec<usize> = (0..m).collect();
        let (steps, last) = self.sequence(&all, kind);
        let cut = steps.iter().position(|s| s.1 >= alpha).unwrap_or(steps.len());
        let mut survivors: Vec<usize> = steps[cut..].iter().map(|s| s.0).collect();
        survivors.push(last);
        survivors.sort_unstable();

        let mut p_main = vec![f64::NAN; m];
        for s in &steps {
            p_main[s.0] = s.2;
        }
        p_main[last] = 1.0;
        let other = match kind {
            Statistic::Tmax => Statistic::TR,
            Statistic::TR => Statistic::Tmax,
        };
        let (osteps, olast) = self.sequence(&survivors, other);
        let mut p_other = vec![f64::NAN; m];
        for s in &osteps {
            p_other[s.0] = s.2;
        }
        p_other[olast] = 1.0;

        let final_stats = (survivors.len() > 1).then(|| self.stats(&self.sorted(&survivors)));
        let v = |c: usize| -> (Option<f64>, Option<f64>) {
            match &final_stats {
                None => (None, None),
                Some(st) => {
                    let a = st.set.iter().position(|&x| x == c).unwrap();
                    let vr = (0..st.set.len())
                        .filter(|&b| b != a)
                        .map(|b| st.t_pair[a][b])
                        .fold(f64::NEG_INFINITY, f64::max);
                    (Some(st.t_model[a]), Some(vr))
                }
            }
        };
        let rank = |vals: &[(usize, Option<f64>)]| -> Vec<usize> {
            vals.iter()
                .map(|&(c, x)| {
                    let x = x.unwrap_or(0.0);
                    1 + vals
                        .iter()
                        .filter(|&&(d, y)| {
                            let y = y.unwrap_or(0.0);
                            y < x || (y == x && self.names[d] < self.names[c])
                        })
                        .count()
                })
                .collect()
        };
        let vm: Vec<(usize, Option<f64>)> = survivors.iter().map(|&c| (c, v(c).0)).collect();
        let vr: Vec<(usize, Option<f64>)> = survivors.iter().map(|&c| (c, v(c).1)).collect();
        let rm = rank(&vm);
        let rr = rank(&vr);
        let (pm, pr) = match kind {
            Statistic::Tmax => (&p_main, &p_other),
            Statistic::TR => (&p_other, &p_main),
        };
        let superior = survivors
            .iter()
            .enumerate()
            .map(|(x, &c)| {
                let mut s = 0.0;
                for t in 0..self.n() {
                    s += self.cols[c][t];
                }
                NaiveRow {
                    name: self.names[c].clone(),
                    rank_m: rm[x],
                    v_m: vm[x].1,
                    mcs_m: pm[c],
                    rank_r: rr[x],
                    v_r: vr[x].1,
                    mcs_r: pr[c],
                    loss: s / self.n() as f64,
                }
            })
            .collect();
        let eliminated = steps[..cut]
            .iter()
            .map(|s| (self.names[s.0].clone(), s.1, s.2))
            .collect();
        let mut sequence: Vec<String> = steps.iter().map(|s| self.names[s.0].clone()).collect();
        sequence.push(self.names[last].clone());
        NaiveResult {
            superior,
            eliminated,
            sequence,
        }
    }
}

/// Converts an optimized result into the naive shape for exact comparison.
pub fn as_naive(r: &mcs_core::SsmResult) -> NaiveResult {
    NaiveResult {
        superior: r
            .superior
            .iter()
            .map(|s| NaiveRow {
                name: s.name.clone(),
                rank_m: s.rank_m,
                v_m: s.v_m,
                mcs_m: s.mcs_m,
                rank_r: s.rank_r,
                v_r: s.v_r,
                mcs_r: s.mcs_r,
                loss: s.loss,
            })
            .collect(),
        eliminated: r
            .eliminated
            .iter()
            .map(|e| (e.name.clone(), e.step_pvalue, e.mcs_pvalue))
            .collect(),
        sequence: r.sequence.clone(),
    }
}

/// Bitwise comparison treating every f64 by its bit pattern.
pub fn bits_equal(a: &NaiveResult, b: &NaiveResult) -> bool {
    fn f(x: f64) -> u64 {
        x.to_bits()
    }
    fn o(x: Option<f64>) -> Option<u64> {
        x.map(f64::to_bits)
    }
    a.sequence == b.sequence
        && a.eliminated.len() == b.eliminated.len()
        && a.eliminated
            .iter()
            .zip(&b.eliminated)
            .all(|(x, y)| x.0 == y.0 && f(x.1) == f(y.1) && f(x.2) == f(y.2))
        && a.superior.len() == b.superior.len()
        && a.superior.iter().zip(&b.superior).all(|(x, y)| {
            x.name == y.name
                && x.rank_m == y.rank_m
                && x.rank_r == y.rank_r
                && o(x.v_m) == o(y.v_m)
                && o(x.v_r) == o(y.v_r)
                && f(x.mcs_m) == f(y.mcs_m)
                && f(x.mcs_r) == f(y.mcs_r)
                && f(x.loss) == f(y.loss)
        })
}

/// A random small instance for oracle comparisons: mixes iid noise,
/// dependence, ties and shifted columns.
pub fn random_instance(seed: u64) -> (LossMatrix, usize, usize, Statistic) {
    use rand::Rng;
    let mut r = rng(seed ^ 0xA5A5);
    let m = r.random_range(2..=6usize);
    let n = r.random_range(20..=200usize);
    let b = r.random_range(100..=200usize);
    let p = r.random_range(1..=4usize).min(n / 2);
    let kind = if r.random_bool(0.5) { Statistic::Tmax } else { Statistic::TR };
    let base = normals(n, seed);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for i in 0..m {
        let shift: f64 = r.random_range(-0.3..0.3);
        let z = normals(n, seed.wrapping_mul(31).wrapping_add(i as u64));
        let col: Vec<f64> = match r.random_range(0..4) {
            0 if i > 0 => cols[i - 1].clone(),
            1 => base.iter().zip(&z).map(|(a, e)| a + 0.5 * e + shift).collect(),
            2 => {
                let mut x = 0.0;
                z.iter().map(|e| {
                    x = 0.6 * x + e;
                    x + shift
                })
                .collect()
            }
            _ => z.iter().map(|e| e + shift).collect(),
        };
        cols.push(col);
    }
    (LossMatrix::from_columns(names(m), &cols).unwrap(), p, b, kind)
}
