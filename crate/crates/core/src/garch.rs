//! Conditional volatility models of order (1,1) with a constant mean.
//!
//! Returns follow `y_t = mu + eps_t`, `eps_t = sigma_t * z_t` with `z_t`
//! standard Gaussian or standardized Student-t (unit variance). The variance
//! recursions are
//!
//! - GARCH: `s2_t = omega + alpha * eps_{t-1}^2 + beta * s2_{t-1}`
//! - GJR: `s2_t = omega + (alpha + gamma * 1{eps_{t-1} < 0}) * eps_{t-1}^2 + beta * s2_{t-1}`
//! - EGARCH: `ln s2_t = omega + alpha * z_{t-1} + gamma * (|z_{t-1}| - E|z|) + beta * ln s2_{t-1}`
//!
//! The first variance is the sample variance of the supplied returns. When
//! that is not positive (a single observation, a constant series) the
//! unconditional variance of the model is used instead.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Shortest series [`fit`] accepts.
pub const MIN_FIT_LEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dynamics {
    Garch11,
    Gjr11,
    Egarch11,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Innovation {
    Gaussian,
    StudentT,
}

impl fmt::Display for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dynamics::Garch11 => "garch",
            Dynamics::Gjr11 => "gjr",
            Dynamics::Egarch11 => "egarch",
        })
    }
}

impl FromStr for Dynamics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "garch" | "sgarch" | "garch11" => Ok(Dynamics::Garch11),
            "gjr" | "gjrgarch" | "gjr11" => Ok(Dynamics::Gjr11),
            "egarch" | "egarch11" => Ok(Dynamics::Egarch11),
            _ => Err(Error::invalid(format!("unknown volatility dynamics {s:?}"))),
        }
    }
}

impl fmt::Display for Innovation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Innovation::Gaussian => "norm",
            Innovation::StudentT => "std",
        })
    }
}

impl FromStr for Innovation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "norm" | "normal" | "gaussian" => Ok(Innovation::Gaussian),
            "std" | "t" | "student" | "student-t" | "studentt" => Ok(Innovation::StudentT),
            _ => Err(Error::invalid(format!("unknown innovation distribution {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GarchSpec {
    pub dynamics: Dynamics,
    pub innovation: Innovation,
}

impl GarchSpec {
    pub fn new(dynamics: Dynamics, innovation: Innovation) -> Self {
        Self { dynamics, innovation }
    }

    fn has_gamma(&self) -> bool {
        self.dynamics != Dynamics::Garch11
    }

    fn has_nu(&self) -> bool {
        self.innovation == Innovation::StudentT
    }

    /// Length of the parameter vector used by [`GarchParams::to_vec`].
    pub fn n_params(&self) -> usize {
        4 + usize::from(self.has_gamma()) + usize::from(self.has_nu())
    }

    /// Parameter names in vector order.
    pub fn param_names(&self) -> Vec<&'static str> {
        let mut names = vec!["mu", "omega", "alpha", "beta"];
        if self.has_gamma() {
            names.push("gamma");
        }
        if self.has_nu() {
            names.push("nu");
        }
        names
    }

    /// Short label such as `gjr-std`.
    pub fn label(&self) -> String {
        format!("{}-{}", self.dynamics, self.innovation)
    }
}

/// Model parameters. `gamma` is ignored by GARCH, `nu` by Gaussian specs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub nu: Option<f64>,
}

impl GarchParams {
    pub fn garch(mu: f64, omega: f64, alpha: f64, beta: f64) -> Self {
        Self {
            mu,
            omega,
            alpha,
            beta,
            gamma: 0.0,
            nu: None,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = Some(nu);
        self
    }

    /// `[mu, omega, alpha, beta, (gamma), (nu)]`
    pub fn to_vec(&self, spec: &GarchSpec) -> Vec<f64> {
        let mut v = vec![self.mu, self.omega, self.alpha, self.beta];
        if spec.has_gamma() {
            v.push(self.gamma);
        }
        if spec.has_nu() {
            v.push(self.nu.unwrap_or(f64::NAN));
        }
        v
    }

    pub fn from_vec(spec: &GarchSpec, v: &[f64]) -> Result<Self> {
        if v.len() != spec.n_params() {
            return Err(Error::DimensionMismatch(format!(
                "{} expects {} parameters, got {}",
                spec.label(),
                spec.n_params(),
                v.len()
            )));
        }
        let mut p = GarchParams::garch(v[0], v[1], v[2], v[3]);
        let mut i = 4;
        if spec.has_gamma() {
            p.gamma = v[i];
            i += 1;
        }
        if spec.has_nu() {
            p.nu = Some(v[i]);
        }
        Ok(p)
    }

    fn nu_or_inf(&self) -> f64 {
        self.nu.unwrap_or(f64::INFINITY)
    }
}

/// Persistence of the variance recursion: `alpha + beta` for GARCH,
/// `alpha + beta + gamma * P(eps < 0)` for GJR (with `P = 1/2` for the
/// symmetric innovations supported here) and `beta` for EGARCH.
pub fn persistence(spec: &GarchSpec, p: &GarchParams) -> f64 {
    match spec.dynamics {
        Dynamics::Garch11 => p.alpha + p.beta,
        Dynamics::Gjr11 => p.alpha + p.beta + 0.5 * p.gamma,
        Dynamics::Egarch11 => p.beta,
    }
}

/// Checks the parameter constraints of `spec`.
pub fn validate_params(spec: &GarchSpec, p: &GarchParams) -> Result<()> {
    let all_finite = p.to_vec(spec).iter().all(|v| v.is_finite());
    if !all_finite {
        return Err(Error::invalid(format!("non-finite parameter in {p:?}")));
    }
    match spec.dynamics {
        Dynamics::Garch11 | Dynamics::Gjr11 => {
            if !(p.omega > 0.0) {
                return Err(Error::invalid("omega must be positive"));
            }
            if p.alpha < 0.0 || p.beta < 0.0 {
                return Err(Error::invalid("alpha and beta must be non-negative"));
            }
            if spec.dynamics == Dynamics::Gjr11 && p.alpha + p.gamma < 0.0 {
                return Err(Error::invalid("alpha + gamma must be non-negative"));
            }
            if persistence(spec, p) >= 1.0 {
                return Err(Error::invalid(format!(
                    "persistence {} is not below 1",
                    persistence(spec, p)
                )));
            }
        }
        Dynamics::Egarch11 => {
            if p.beta.abs() >= 1.0 {
                return Err(Error::invalid("EGARCH requires |beta| < 1"));
            }
        }
    }
    if spec.has_nu() && !(p.nu.is_some_and(|nu| nu > 2.0)) {
        return Err(Error::invalid("Student-t degrees of freedom must exceed 2"));
    }
    Ok(())
}

/// `E|z|` of the standardized innovation.
pub fn expected_abs(innovation: Innovation, nu: Option<f64>) -> f64 {
    match innovation {
        Innovation::Gaussian => (2.0 / PI).sqrt(),
        Innovation::StudentT => {
            let nu = nu.unwrap_or(f64::INFINITY);
            if !nu.is_finite() {
                return (2.0 / PI).sqrt();
            }
            (ln_abs_t_moment(nu)).exp()
        }
    }
}

// ln E|z| for the unit-variance Student-t.
fn ln_abs_t_moment(nu: f64) -> f64 {
    2f64.ln() + 0.5 * (nu - 2.0).ln() + ln_gamma((nu + 1.0) / 2.0) - 0.5 * PI.ln() - (nu - 1.0).ln() - ln_gamma(nu / 2.0)
}

fn d_ln_abs_t_moment(nu: f64) -> f64 {
    0.5 / (nu - 2.0) + 0.5 * digamma((nu + 1.0) / 2.0) - 1.0 / (nu - 1.0) - 0.5 * digamma(nu / 2.0)
}

fn sample_variance(returns: &[f64]) -> f64 {
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    returns.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n
}

fn initial_variance(spec: &GarchSpec, p: &GarchParams, sample_var: f64) -> f64 {
    if sample_var > 0.0 && sample_var.is_finite() {
        return sample_var;
    }
    match spec.dynamics {
        Dynamics::Garch11 | Dynamics::Gjr11 => p.omega / (1.0 - persistence(spec, p)),
        Dynamics::Egarch11 => (p.omega / (1.0 - p.beta)).exp(),
    }
}

/// Variance `s2_{t+1}` given the residual and variance at `t`.
pub fn one_step_variance(spec: &GarchSpec, p: &GarchParams, eps: f64, sigma2: f64) -> f64 {
    match spec.dynamics {
        Dynamics::Garch11 => p.omega + p.alpha * eps * eps + p.beta * sigma2,
        Dynamics::Gjr11 => {
            let a = if eps < 0.0 { p.alpha + p.gamma } else { p.alpha };
            p.omega + a * eps * eps + p.beta * sigma2
        }
        Dynamics::Egarch11 => {
            let z = eps / sigma2.sqrt();
            let kappa = expected_abs(spec.innovation, p.nu);
            (p.omega + p.alpha * z + p.gamma * (z.abs() - kappa) + p.beta * sigma2.ln()).exp()
        }
    }
}

// Filter with a precomputed E|z|; returns false on a non-positive or
// non-finite variance.
fn filter_into(spec: &GarchSpec, p: &GarchParams, returns: &[f64], h1: f64, kappa: f64, out: &mut Vec<f64>) -> bool {
    out.clear();
    let mut h = h1;
    for t in 0..returns.len() {
        if t > 0 {
            let eps = returns[t - 1] - p.mu;
            let prev = h;
            h = match spec.dynamics {
                Dynamics::Garch11 => p.omega + p.alpha * eps * eps + p.beta * prev,
                Dynamics::Gjr11 => {
                    let a = if eps < 0.0 { p.alpha + p.gamma } else { p.alpha };
                    p.omega + a * eps * eps + p.beta * prev
                }
                Dynamics::Egarch11 => {
                    let z = eps / prev.sqrt();
                    (p.omega + p.alpha * z + p.gamma * (z.abs() - kappa) + p.beta * prev.ln()).exp()
                }
            };
        }
        if !(h > 0.0 && h.is_finite()) {
            return false;
        }
        out.push(h);
    }
    true
}

/// Conditional variance path `s2_1..s2_n`.
pub fn variance_filter(spec: &GarchSpec, params: &GarchParams, returns: &[f64]) -> Result<Vec<f64>> {
    validate_params(spec, params)?;
    if returns.is_empty() {
        return Err(Error::invalid("variance filter needs at least one observation"));
    }
    if returns.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("returns contain non-finite values"));
    }
    let h1 = initial_variance(spec, params, sample_variance(returns));
    let kappa = expected_abs(spec.innovation, params.nu);
    let mut out = Vec::with_capacity(returns.len());
    if !filter_into(spec, params, returns, h1, kappa, &mut out) {
        return Err(Error::Numeric("variance recursion left the positive finite range".into()));
    }
    Ok(out)
}

struct Density {
    student: bool,
    nu: f64,
    constant: f64,
}

impl Density {
    fn new(innovation: Innovation, nu: Option<f64>) -> Self {
        match innovation {
            Innovation::Gaussian => Self {
                student: false,
                nu: f64::INFINITY,
                constant: -0.5 * (2.0 * PI).ln(),
            },
            Innovation::StudentT => {
                let nu = nu.unwrap_or(f64::INFINITY);
                Self {
                    student: true,
                    nu,
                    constant: ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (PI * (nu - 2.0)).ln(),
                }
            }
        }
    }

    fn log_pdf(&self, eps: f64, h: f64) -> f64 {
        if self.student {
            let u = eps * eps / (h * (self.nu - 2.0));
            self.constant - 0.5 * h.ln() - 0.5 * (self.nu + 1.0) * u.ln_1p()
        } else {
            self.constant - 0.5 * (h.ln() + eps * eps / h)
        }
    }
}

fn loglik_with(spec: &GarchSpec, p: &GarchParams, returns: &[f64], sample_var: f64, buf: &mut Vec<f64>) -> f64 {
    let h1 = initial_variance(spec, p, sample_var);
    let kappa = expected_abs(spec.innovation, p.nu);
    if !filter_into(spec, p, returns, h1, kappa, buf) {
        return f64::NAN;
    }
    let dens = Density::new(spec.innovation, p.nu);
    returns
        .iter()
        .zip(buf.iter())
        .map(|(y, &h)| dens.log_pdf(y - p.mu, h))
        .sum()
}

/// Log-likelihood `sum_t ln f(eps_t; s2_t)`.
pub fn log_likelihood(spec: &GarchSpec, params: &GarchParams, returns: &[f64]) -> Result<f64> {
    let path = variance_filter(spec, params, returns)?;
    let dens = Density::new(spec.innovation, params.nu);
    let ll: f64 = returns
        .iter()
        .zip(&path)
        .map(|(y, &h)| dens.log_pdf(y - params.mu, h))
        .sum();
    if !ll.is_finite() {
        return Err(Error::Numeric("log-likelihood is not finite".into()));
    }
    Ok(ll)
}

/// Analytic gradient of [`log_likelihood`] in [`GarchParams::to_vec`] order.
pub fn log_likelihood_gradient(spec: &GarchSpec, params: &GarchParams, returns: &[f64]) -> Result<Vec<f64>> {
    validate_params(spec, params)?;
    if returns.is_empty() {
        return Err(Error::invalid("gradient needs at least one observation"));
    }
    let p = params;
    let d = spec.n_params();
    let (i_mu, i_omega, i_alpha, i_beta) = (0, 1, 2, 3);
    let i_gamma = spec.has_gamma().then_some(4);
    let i_nu = spec.has_nu().then_some(d - 1);
    let nu = p.nu_or_inf();

    let sample_var = sample_variance(returns);
    let h1 = initial_variance(spec, p, sample_var);
    let fallback = !(sample_var > 0.0 && sample_var.is_finite());
    let egarch = spec.dynamics == Dynamics::Egarch11;

    let kappa = expected_abs(spec.innovation, p.nu);
    let dkappa_dnu = if spec.has_nu() { kappa * d_ln_abs_t_moment(nu) } else { 0.0 };

    // dh for GARCH/GJR, d ln h for EGARCH
    let mut dstate = vec![0.0; d];
    if fallback {
        match spec.dynamics {
            Dynamics::Garch11 | Dynamics::Gjr11 => {
                let q = 1.0 - persistence(spec, p);
                dstate[i_omega] = 1.0 / q;
                let dp = p.omega / (q * q);
                dstate[i_alpha] = dp;
                dstate[i_beta] = dp;
                if let Some(g) = i_gamma {
                    dstate[g] = 0.5 * dp;
                }
            }
            Dynamics::Egarch11 => {
                let q = 1.0 - p.beta;
                dstate[i_omega] = 1.0 / q;
                dstate[i_beta] = p.omega / (q * q);
            }
        }
    }

    let mut grad = vec![0.0; d];
    let mut h = h1;
    let mut dh = vec![0.0; d];
    for t in 0..returns.len() {
        if t > 0 {
            let eps = returns[t - 1] - p.mu;
            if egarch {
                let g_prev = h.ln();
                let sd = h.sqrt();
                let z = eps / sd;
                let sgn = if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                let mut next = vec![0.0; d];
                for k in 0..d {
                    let deps = if k == i_mu { -1.0 } else { 0.0 };
                    let dz = deps / sd - 0.5 * z * dstate[k];
                    next[k] = p.alpha * dz + p.gamma * sgn * dz + p.beta * dstate[k];
                }
                next[i_omega] += 1.0;
                next[i_alpha] += z;
                next[i_beta] += g_prev;
                if let Some(g) = i_gamma {
                    next[g] += z.abs() - kappa;
                }
                if let Some(v) = i_nu {
                    next[v] -= p.gamma * dkappa_dnu;
                }
                dstate = next;
                h = (p.omega + p.alpha * z + p.gamma * (z.abs() - kappa) + p.beta * g_prev).exp();
            } else {
                let neg = eps < 0.0;
                let a = if spec.dynamics == Dynamics::Gjr11 && neg {
                    p.alpha + p.gamma
                } else {
                    p.alpha
                };
                let prev = h;
                for v in dstate.iter_mut() {
                    *v *= p.beta;
                }
                dstate[i_mu] += -2.0 * a * eps;
                dstate[i_omega] += 1.0;
                dstate[i_alpha] += eps * eps;
                dstate[i_beta] += prev;
                if let Some(g) = i_gamma {
                    if neg {
                        dstate[g] += eps * eps;
                    }
                }
                h = p.omega + a * eps * eps + p.beta * prev;
            }
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Numeric("variance recursion left the positive finite range".into()));
        }
        for k in 0..d {
            dh[k] = if egarch { h * dstate[k] } else { dstate[k] };
        }
        let eps = returns[t] - p.mu;
        let (dl_dh, dl_deps) = if spec.has_nu() {
            let u = eps * eps / (h * (nu - 2.0));
            let dl_dh = -0.5 / h + 0.5 * (nu + 1.0) * u / ((1.0 + u) * h);
            let dl_deps = -(nu + 1.0) * eps / (h * (nu - 2.0) * (1.0 + u));
            if let Some(v) = i_nu {
                grad[v] += 0.5 * digamma((nu + 1.0) / 2.0) - 0.5 * digamma(nu / 2.0) - 0.5 / (nu - 2.0)
                    - 0.5 * u.ln_1p()
                    + 0.5 * (nu + 1.0) * u / ((nu - 2.0) * (1.0 + u));
            }
            (dl_dh, dl_deps)
        } else {
            (-0.5 * (1.0 / h - eps * eps / (h * h)), -eps / h)
        };
        for k in 0..d {
            grad[k] += dl_dh * dh[k];
        }
        grad[i_mu] += -dl_deps;
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric("gradient is not finite".into()));
    }
    Ok(grad)
}

/// Asymptotic standard errors from the inverse of the negative Hessian,
/// which is obtained by central differences of the analytic gradient.
pub fn std_errors(spec: &GarchSpec, params: &GarchParams, returns: &[f64]) -> Result<Vec<f64>> {
    let theta = params.to_vec(spec);
    let d = theta.len();
    let mut hess = DMatrix::<f64>::zeros(d, d);
    for k in 0..d {
        let step = 1e-5 * theta[k].abs().max(1e-2);
        let mut up = theta.clone();
        let mut dn = theta.clone();
        up[k] += step;
        dn[k] -= step;
        let gu = log_likelihood_gradient(spec, &GarchParams::from_vec(spec, &up)?, returns)?;
        let gd = log_likelihood_gradient(spec, &GarchParams::from_vec(spec, &dn)?, returns)?;
        for j in 0..d {
            hess[(j, k)] = (gu[j] - gd[j]) / (2.0 * step);
        }
    }
    let info = -(&hess + hess.transpose()) * 0.5;
    let cov = info
        .try_inverse()
        .ok_or_else(|| Error::Numeric("information matrix is singular".into()))?;
    (0..d)
        .map(|k| {
            let v = cov[(k, k)];
            if v > 0.0 {
                Ok(v.sqrt())
            } else {
                Err(Error::Numeric("information matrix is not positive definite".into()))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub spec: GarchSpec,
    pub params: GarchParams,
    pub sigma2_path: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub last_eps: f64,
    pub last_sigma2: f64,
    /// Objective evaluations over all starts.
    pub evals: usize,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

// Maps between the constrained parameters and an unconstrained search space.
struct Transform {
    spec: GarchSpec,
    mu0: f64,
    scale: f64,
}

impl Transform {
    fn to_params(&self, u: &[f64]) -> GarchParams {
        let mu = self.mu0 + self.scale * u[0];
        let mut p = match self.spec.dynamics {
            Dynamics::Garch11 => {
                let pers = logistic(u[2]);
                let share = logistic(u[3]);
                GarchParams::garch(mu, u[1].exp(), pers * share, pers * (1.0 - share))
            }
            Dynamics::Gjr11 => {
                let pers = logistic(u[2]);
                let s = logistic(u[3]);
                let r = logistic(u[4]);
                let arch = 2.0 * s * pers;
                GarchParams::garch(mu, u[1].exp(), arch * r, (1.0 - s) * pers).with_gamma(arch * (1.0 - 2.0 * r))
            }
            Dynamics::Egarch11 => GarchParams::garch(mu, u[1], u[2], u[3].tanh()).with_gamma(u[4]),
        };
        if self.spec.has_nu() {
            p.nu = Some(2.0 + u[u.len() - 1].exp());
        }
        p
    }

    fn to_unconstrained(&self, p: &GarchParams) -> Vec<f64> {
        let mut u = vec![(p.mu - self.mu0) / self.scale];
        match self.spec.dynamics {
            Dynamics::Garch11 => {
                let pers = p.alpha + p.beta;
                u.extend([p.omega.ln(), logit(pers), logit(p.alpha / pers)]);
            }
            Dynamics::Gjr11 => {
                let pers = persistence(&self.spec, p);
                let arch = 2.0 * p.alpha + p.gamma;
                u.extend([p.omega.ln(), logit(pers), logit(arch / (2.0 * pers)), logit(p.alpha / arch)]);
            }
            Dynamics::Egarch11 => u.extend([p.omega, p.alpha, p.beta.atanh(), p.gamma]),
        }
        if self.spec.has_nu() {
            u.push((p.nu.unwrap_or(8.0) - 2.0).ln());
        }
        u
    }
}

fn starting_points(spec: &GarchSpec, mu0: f64, var: f64) -> Vec<GarchParams> {
    let nus = [8.0, 5.0, 15.0];
    let mut out: Vec<GarchParams> = match spec.dynamics {
        Dynamics::Garch11 => [(0.05, 0.90), (0.10, 0.80), (0.03, 0.95)]
            .iter()
            .map(|&(a, b)| GarchParams::garch(mu0, var * (1.0 - a - b), a, b))
            .collect(),
        Dynamics::Gjr11 => [(0.03, 0.05, 0.90), (0.05, 0.10, 0.80), (0.02, 0.03, 0.94)]
            .iter()
            .map(|&(a, g, b)| GarchParams::garch(mu0, var * (1.0 - a - b - 0.5 * g), a, b).with_gamma(g))
            .collect(),
        Dynamics::Egarch11 => [(-0.05, 0.10, 0.95), (0.0, 0.15, 0.90), (-0.10, 0.20, 0.98)]
            .iter()
            .map(|&(a, g, b)| GarchParams::garch(mu0, (1.0 - b) * var.ln(), a, b).with_gamma(g))
            .collect(),
    };
    if spec.has_nu() {
        for (p, nu) in out.iter_mut().zip(nus) {
            p.nu = Some(nu);
        }
    }
    out
}

/// Fixed starting points that [`fit`] tries on `returns`.
pub fn default_starts(spec: &GarchSpec, returns: &[f64]) -> Result<Vec<GarchParams>> {
    if returns.is_empty() {
        return Err(Error::invalid("no returns"));
    }
    let var = sample_variance(returns);
    if !(var > 0.0) {
        return Err(Error::invalid("returns have zero variance"));
    }
    let mu0 = returns.iter().sum::<f64>() / returns.len() as f64;
    Ok(starting_points(spec, mu0, var))
}

/// Maximum likelihood fit by Nelder-Mead over transformed parameters.
///
/// Three fixed starting points (plus `init` when given) are tried and the
/// best optimum is kept. Needs at least [`MIN_FIT_LEN`] observations.
pub fn fit(spec: &GarchSpec, returns: &[f64], init: Option<GarchParams>) -> Result<GarchFit> {
    if returns.len() < MIN_FIT_LEN {
        return Err(Error::invalid(format!(
            "need at least {MIN_FIT_LEN} observations to fit, got {}",
            returns.len()
        )));
    }
    if returns.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("returns contain non-finite values"));
    }
    let n = returns.len() as f64;
    let mu0 = returns.iter().sum::<f64>() / n;
    let var = sample_variance(returns);
    if !(var > 0.0) {
        return Err(Error::invalid("returns have zero variance"));
    }
    let tr = Transform {
        spec: *spec,
        mu0,
        scale: var.sqrt(),
    };

    let mut starts = Vec::new();
    if let Some(p) = init {
        if validate_params(spec, &p).is_ok() {
            starts.push(p);
        }
    }
    starts.extend(starting_points(spec, mu0, var));

    let opts = NelderMeadOptions {
        ftol: 1e-8,
        max_evals: 4000,
        initial_step: 0.2,
        restarts: 1,
    };
    let mut buf = Vec::with_capacity(returns.len());
    let mut best: Option<(GarchParams, f64, bool)> = None;
    let mut evals = 0;
    for start in &starts {
        let u0 = tr.to_unconstrained(start);
        let res = nelder_mead(
            |u| {
                let p = tr.to_params(u);
                -loglik_with(spec, &p, returns, var, &mut buf) / n
            },
            &u0,
            &opts,
        );
        evals += res.evals;
        let ll = -res.fx * n;
        if ll.is_finite() && best.as_ref().is_none_or(|b| ll > b.1) {
            best = Some((tr.to_params(&res.x), ll, res.converged));
        }
    }
    let (params, _, converged) =
        best.ok_or_else(|| Error::Numeric("no starting point gave a finite likelihood".into()))?;
    let sigma2_path = variance_filter(spec, &params, returns)?;
    let loglik = log_likelihood(spec, &params, returns)?;
    let last_sigma2 = *sigma2_path.last().expect("non-empty");
    Ok(GarchFit {
        spec: *spec,
        params,
        sigma2_path,
        loglik,
        converged,
        last_eps: returns[returns.len() - 1] - params.mu,
        last_sigma2,
        evals,
    })
}

/// One-step-ahead conditional standard deviation after the fitted sample.
pub fn forecast_sigma(fit: &GarchFit) -> Result<f64> {
    if !fit.converged {
        return Err(Error::Numeric("cannot forecast from an unconverged fit".into()));
    }
    Ok(one_step_variance(&fit.spec, &fit.params, fit.last_eps, fit.last_sigma2).sqrt())
}

/// Student-t quantile by bracketing and bisection on the CDF.
pub fn student_t_quantile(nu: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("probability must lie in (0, 1), got {p}")));
    }
    let dist = StudentsT::new(0.0, 1.0, nu).map_err(|e| Error::invalid(e.to_string()))?;
    let (mut lo, mut hi) = (-1.0, 1.0);
    while dist.cdf(lo) > p {
        lo *= 2.0;
        if lo < -1e12 {
            return Err(Error::Numeric("quantile bracket diverged".into()));
        }
    }
    while dist.cdf(hi) < p {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numeric("quantile bracket diverged".into()));
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if dist.cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `tau`-quantile of the unit-variance innovation.
pub fn innovation_quantile(innovation: Innovation, nu: Option<f64>, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("tau must lie in (0, 1), got {tau}")));
    }
    match innovation {
        Innovation::Gaussian => Ok(Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(tau)),
        Innovation::StudentT => {
            let nu = nu.ok_or_else(|| Error::invalid("Student-t quantile needs nu"))?;
            if !(nu > 2.0) {
                return Err(Error::invalid("Student-t degrees of freedom must exceed 2"));
            }
            Ok(student_t_quantile(nu, tau)? * ((nu - 2.0) / nu).sqrt())
        }
    }
}

/// Outcome of one scheduled refit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefitRecord {
    /// Index of the first forecast date using this fit.
    pub at: usize,
    pub converged: bool,
    /// Failure message when the previous parameters were carried forward.
    pub error: Option<String>,
    pub params: GarchParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollForecast {
    pub spec: GarchSpec,
    pub tau: f64,
    /// One-step VaR at each forecast date.
    pub var: Vec<f64>,
    pub sigma: Vec<f64>,
    pub mu: Vec<f64>,
    pub refits: Vec<RefitRecord>,
}

/// Rolling one-step-ahead VaR over the last `forecast_length` periods.
///
/// Every `refit_every` forecasts the model is refitted on all data before
/// the forecast date; in between, the latest parameters filter the expanded
/// window. A failed or unconverged refit keeps the previous parameters.
pub fn roll_var_forecast(
    spec: &GarchSpec,
    returns: &[f64],
    forecast_length: usize,
    refit_every: usize,
    tau: f64,
) -> Result<RollForecast> {
    let n = returns.len();
    if forecast_length == 0 || forecast_length >= n {
        return Err(Error::invalid(format!(
            "forecast length must lie in [1, {}), got {forecast_length}",
            n
        )));
    }
    if refit_every == 0 {
        return Err(Error::invalid("refit interval must be at least 1"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("tau must lie in (0, 1), got {tau}")));
    }
    let first = n - forecast_length;
    if first < MIN_FIT_LEN {
        return Err(Error::invalid(format!(
            "in-sample window of {first} observations is shorter than {MIN_FIT_LEN}"
        )));
    }

    let mut current: Option<GarchParams> = None;
    let mut quantile = 0.0;
    let mut refits = Vec::new();
    let mut var = Vec::with_capacity(forecast_length);
    let mut sigma = Vec::with_capacity(forecast_length);
    let mut mu = Vec::with_capacity(forecast_length);
    for k in 0..forecast_length {
        let t = first + k;
        let window = &returns[..t];
        if k % refit_every == 0 {
            let record = match fit(spec, window, current) {
                Ok(f) if f.converged || current.is_none() => {
                    current = Some(f.params);
                    RefitRecord {
                        at: k,
                        converged: f.converged,
                        error: None,
                        params: f.params,
                    }
                }
                Ok(f) => RefitRecord {
                    at: k,
                    converged: false,
                    error: Some("optimizer did not converge".into()),
                    params: f.params,
                },
                Err(e) => match current {
                    Some(prev) => RefitRecord {
                        at: k,
                        converged: false,
                        error: Some(e.to_string()),
                        params: prev,
                    },
                    None => return Err(e),
                },
            };
            refits.push(record);
            let p = current.expect("parameters set by the first refit");
            quantile = innovation_quantile(spec.innovation, p.nu, tau)?;
        }
        let p = current.expect("parameters set by the first refit");
        let path = variance_filter(spec, &p, window)?;
        let h = one_step_variance(spec, &p, window[t - 1] - p.mu, path[t - 1]);
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Numeric(format!("invalid variance forecast at step {k}")));
        }
        let s = h.sqrt();
        var.push(p.mu + s * quantile);
        sigma.push(s);
        mu.push(p.mu);
    }
    Ok(RollForecast {
        spec: *spec,
        tau,
        var,
        sigma,
        mu,
        refits,
    })
}

/// Simulates `n` returns after discarding `burn` warm-up draws.
pub fn simulate(spec: &GarchSpec, params: &GarchParams, n: usize, burn: usize, seed: u64) -> Result<Vec<f64>> {
    validate_params(spec, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let student = match (spec.innovation, params.nu) {
        (Innovation::StudentT, Some(nu)) => {
            Some((StudentT::new(nu).map_err(|e| Error::invalid(e.to_string()))?, ((nu - 2.0) / nu).sqrt()))
        }
        _ => None,
    };
    let mut h = initial_variance(spec, params, 0.0);
    let mut out = Vec::with_capacity(n);
    for t in 0..(n + burn) {
        let z: f64 = match &student {
            Some((dist, scale)) => dist.sample(&mut rng) * scale,
            None => StandardNormal.sample(&mut rng),
        };
        let eps = h.sqrt() * z;
        if t >= burn {
            out.push(params.mu + eps);
        }
        h = one_step_variance(spec, params, eps, h);
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Numeric("simulated variance left the positive finite range".into()));
        }
    }
    Ok(out)
}
