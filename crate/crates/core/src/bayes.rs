//! Bayesian multimodel inference: Monte Carlo evidence, posterior model
//! probabilities and random-walk Metropolis–Hastings parameter sampling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{CopulaFamily, CopulaSpec, PseudoObs};
use crate::error::{Error, Result};
use crate::marginal::{moment_init, MarginalData, MarginalFamily, MarginalSpec};
use crate::rng::{derive_seed, open_unit, rng_from_seed};
use crate::special::trigamma;

/// An excluded open interval (lo, hi) of one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorGap {
    pub param: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Independent bounded-uniform prior, optionally with excluded gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub bounds: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gaps: Vec<PriorGap>,
}

impl PriorSpec {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        let prior = Self { bounds, gaps: vec![] };
        prior.validate()?;
        Ok(prior)
    }

    pub fn with_gap(mut self, param: usize, lo: f64, hi: f64) -> Result<Self> {
        self.gaps.push(PriorGap { param, lo, hi });
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::domain(format!("prior bound {i} is not a finite interval: ({lo}, {hi})")));
            }
        }
        for g in &self.gaps {
            let Some(&(lo, hi)) = self.bounds.get(g.param) else {
                return Err(Error::domain(format!("prior gap refers to missing parameter {}", g.param)));
            };
            if !(g.lo < g.hi) || g.lo <= lo && g.hi >= hi {
                return Err(Error::domain("prior gap is empty or covers the whole range"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && self
                .bounds
                .iter()
                .zip(theta)
                .all(|(&(lo, hi), &t)| t > lo && t < hi)
            && self
                .gaps
                .iter()
                .all(|g| !(theta[g.param] > g.lo && theta[g.param] < g.hi))
    }

    /// One draw from the prior (rejection from the box for gaps).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        loop {
            let theta: Vec<f64> = self
                .bounds
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * open_unit(rng))
                .collect();
            if self.contains(&theta) {
                return theta;
            }
        }
    }

    fn sample_coordinate<R: Rng + ?Sized>(&self, i: usize, lo_frac: f64, hi_frac: f64, rng: &mut R) -> f64 {
        let (lo, hi) = self.bounds[i];
        loop {
            let f = lo_frac + (hi_frac - lo_frac) * open_unit(rng);
            let t = lo + (hi - lo) * f;
            if t > lo && t < hi && self.gaps.iter().all(|g| g.param != i || !(t > g.lo && t < g.hi)) {
                return t;
            }
        }
    }

    /// Clamp a point into the open box, stepping out of any gap.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .bounds
            .iter()
            .zip(theta)
            .map(|(&(lo, hi), &t)| {
                let pad = 1e-9 * (hi - lo);
                t.clamp(lo + pad, hi - pad)
            })
            .collect();
        for g in &self.gaps {
            let t = out[g.param];
            if t > g.lo && t < g.hi {
                out[g.param] = if t - g.lo < g.hi - t { g.lo } else { g.hi };
            }
        }
        out
    }
}

/// A log-likelihood over a real parameter vector.
pub trait LogLikelihood: Sync {
    fn log_likelihood(&self, theta: &[f64]) -> f64;

    /// Parameters that are costly to change. Evidence draws share values of
    /// these coordinates across consecutive groups so implementations can
    /// reuse work in `log_likelihood_batch`.
    fn slow_coordinates(&self) -> &[usize] {
        &[]
    }

    fn log_likelihood_batch(&self, thetas: &[Vec<f64>]) -> Vec<f64> {
        thetas.par_iter().map(|t| self.log_likelihood(t)).collect()
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> LogLikelihood for F {
    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self(theta)
    }
}

/// Monte Carlo evidence estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub log_evidence: f64,
    /// Standard error of the evidence relative to its value.
    pub relative_std_error: f64,
    /// Prior draws with finite likelihood.
    pub finite_draws: usize,
}

/// ln Σ exp(x_i), ignoring −∞ terms.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// log of (1/S) Σ_s L(d | θ_s) with θ_s drawn from the prior.
pub fn log_evidence<L: LogLikelihood + ?Sized>(
    lik: &L,
    prior: &PriorSpec,
    n_samples: usize,
    seed: u64,
) -> Result<Evidence> {
    if n_samples < 100 {
        return Err(Error::input("evidence needs at least 100 prior samples"));
    }
    prior.validate()?;
    if prior.dim() == 0 {
        let ll = lik.log_likelihood(&[]);
        return Ok(Evidence {
            log_evidence: ll,
            relative_std_error: 0.0,
            finite_draws: usize::from(ll.is_finite()) * n_samples,
        });
    }
    let mut rng = rng_from_seed(seed);
    let thetas = draw_prior_grouped(prior, lik.slow_coordinates(), n_samples, &mut rng);
    let lls = lik.log_likelihood_batch(&thetas);
    let finite = lls.iter().filter(|x| x.is_finite()).count();
    let lse = log_sum_exp(&lls);
    if finite == 0 {
        log::warn!("all {n_samples} prior draws have zero likelihood");
        return Ok(Evidence {
            log_evidence: f64::NEG_INFINITY,
            relative_std_error: f64::INFINITY,
            finite_draws: 0,
        });
    }
    let s = n_samples as f64;
    let log_mean = lse - s.ln();
    // relative standard error of the sample mean of L / mean
    let m2 = lls.iter().map(|&l| (2.0 * (l - log_mean)).exp()).sum::<f64>() / s;
    let rel_var = ((m2 - 1.0) / (s - 1.0)).max(0.0);
    Ok(Evidence {
        log_evidence: log_mean,
        relative_std_error: rel_var.sqrt(),
        finite_draws: finite,
    })
}

/// Prior draws in which the slow coordinates take ⌈√S⌉ stratified values,
/// each shared by a contiguous group of draws.
fn draw_prior_grouped<R: Rng + ?Sized>(
    prior: &PriorSpec,
    slow: &[usize],
    n: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    if slow.is_empty() {
        return (0..n).map(|_| prior.sample(rng)).collect();
    }
    let groups = (n as f64).sqrt().ceil() as usize;
    let mut out = Vec::with_capacity(n);
    for g in 0..groups {
        let size = n / groups + usize::from(g < n % groups);
        let lo = g as f64 / groups as f64;
        let hi = (g + 1) as f64 / groups as f64;
        let shared: Vec<(usize, f64)> = slow
            .iter()
            .map(|&i| (i, prior.sample_coordinate(i, lo, hi, rng)))
            .collect();
        for _ in 0..size {
            let mut theta: Vec<f64> = (0..prior.dim())
                .map(|i| prior.sample_coordinate(i, 0.0, 1.0, rng))
                .collect();
            for &(i, v) in &shared {
                theta[i] = v;
            }
            out.push(theta);
        }
    }
    out
}

/// π_j ∝ exp(ln Z_j) · prior_j, normalized with a max-log shift.
pub fn posterior_model_probabilities(log_evidences: &[f64], prior_probs: &[f64]) -> Result<Vec<f64>> {
    if log_evidences.len() != prior_probs.len() || log_evidences.is_empty() {
        return Err(Error::input("evidence and prior vectors must be nonempty and of equal length"));
    }
    let total: f64 = prior_probs.iter().sum();
    if prior_probs.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::input("prior model probabilities must be nonnegative and sum to 1"));
    }
    let logs: Vec<f64> = log_evidences
        .iter()
        .zip(prior_probs)
        .map(|(&z, &p)| if p > 0.0 { z + p.ln() } else { f64::NEG_INFINITY })
        .collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return Err(Error::NoViableModel);
    }
    let w: Vec<f64> = logs.iter().map(|&l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / s).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    /// Total iterations, burn-in included.
    pub chain_length: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Initial per-parameter random-walk scales; derived from the prior when empty.
    pub proposal_scale: Vec<f64>,
    pub target_acceptance: f64,
    /// Learn a full proposal covariance during burn-in.
    pub adapt_covariance: bool,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chain_length: 6000,
            burn_in: 2000,
            thinning: 4,
            proposal_scale: vec![],
            target_acceptance: 0.35,
            adapt_covariance: true,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.chain_length {
            return Err(Error::input("burn_in must be smaller than chain_length"));
        }
        if self.thinning == 0 {
            return Err(Error::input("thinning must be positive"));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::input("target_acceptance must lie in (0, 1)"));
        }
        if self.proposal_scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::input("proposal scales must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcResult {
    /// Post burn-in, thinned states.
    pub samples: Vec<Vec<f64>>,
    pub log_posterior: Vec<f64>,
    /// Acceptance rate after burn-in.
    pub acceptance_rate: f64,
    /// Acceptance rate during burn-in.
    pub burn_in_acceptance_rate: f64,
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn covariance(xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = xs[0].len();
    let n = xs.len() as f64;
    let mean: Vec<f64> = (0..d).map(|i| xs.iter().map(|x| x[i]).sum::<f64>() / n).collect();
    let mut c = vec![vec![0.0; d]; d];
    for x in xs {
        for i in 0..d {
            for j in 0..=i {
                c[i][j] += (x[i] - mean[i]) * (x[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            c[i][j] /= n - 1.0;
            c[j][i] = c[i][j];
        }
    }
    c
}

/// Random-walk Metropolis–Hastings under a bounded-uniform prior.
///
/// During burn-in the global step size follows a Robbins–Monro recursion
/// toward the target acceptance rate, and (optionally) the proposal shape is
/// re-estimated from the burn-in history. Both are frozen afterwards.
pub fn mcmc_posterior<L: LogLikelihood + ?Sized>(
    lik: &L,
    prior: &PriorSpec,
    init: &[f64],
    cfg: &McmcConfig,
) -> Result<McmcResult> {
    cfg.validate()?;
    prior.validate()?;
    let d = prior.dim();
    let mut rng = rng_from_seed(cfg.seed);
    if d == 0 {
        let lp = lik.log_likelihood(&[]);
        let kept = (cfg.chain_length - cfg.burn_in).div_ceil(cfg.thinning);
        return Ok(McmcResult {
            samples: vec![vec![]; kept],
            log_posterior: vec![lp; kept],
            acceptance_rate: 1.0,
            burn_in_acceptance_rate: 1.0,
        });
    }
    if init.len() != d {
        return Err(Error::input(format!("initial state has {} entries, prior has {d}", init.len())));
    }
    if !cfg.proposal_scale.is_empty() && cfg.proposal_scale.len() != d {
        return Err(Error::input("proposal_scale length does not match the parameter count"));
    }

    let mut cur = prior.project(init);
    let mut cur_lp = lik.log_likelihood(&cur);
    let mut tries = 0;
    while !cur_lp.is_finite() {
        tries += 1;
        if tries > 10_000 {
            return Err(Error::Convergence("no prior draw with finite likelihood to start from".into()));
        }
        cur = prior.sample(&mut rng);
        cur_lp = lik.log_likelihood(&cur);
    }

    let base: Vec<f64> = if cfg.proposal_scale.is_empty() {
        prior.bounds.iter().map(|&(lo, hi)| (hi - lo) / 50.0).collect()
    } else {
        cfg.proposal_scale.clone()
    };
    // proposal factor L (lower triangular); starts diagonal
    let mut chol: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { base[i] } else { 0.0 }).collect())
        .collect();
    let mut log_s = 0.0_f64;
    let mut history: Vec<Vec<f64>> = Vec::new();

    let mut samples = Vec::new();
    let mut log_post = Vec::new();
    let (mut acc_burn, mut acc_main) = (0usize, 0usize);
    let mut z = vec![0.0; d];
    let mut prop = vec![0.0; d];
    for t in 0..cfg.chain_length {
        let burning = t < cfg.burn_in;
        for zi in z.iter_mut() {
            *zi = rng.sample(rand_distr::StandardNormal);
        }
        let s = log_s.exp();
        for i in 0..d {
            prop[i] = cur[i] + s * (0..=i).map(|j| chol[i][j] * z[j]).sum::<f64>();
        }
        let mut accepted = false;
        if prior.contains(&prop) {
            let lp = lik.log_likelihood(&prop);
            let log_alpha = lp - cur_lp;
            if lp.is_finite() && (log_alpha >= 0.0 || open_unit(&mut rng).ln() < log_alpha) {
                cur.copy_from_slice(&prop);
                cur_lp = lp;
                accepted = true;
            }
        }
        if burning {
            acc_burn += usize::from(accepted);
            let gamma = 1.0 / ((t + 1) as f64).powf(0.6);
            let a = if accepted { 1.0 } else { 0.0 };
            log_s = (log_s + gamma * (a - cfg.target_acceptance)).clamp(-30.0, 10.0);
            if cfg.adapt_covariance {
                history.push(cur.clone());
                let refresh = t + 1 >= cfg.burn_in / 2 && (t + 1) % 100 == 0 && history.len() > 10 * d;
                if refresh {
                    let tail = &history[history.len() / 2..];
                    let mut cov = covariance(tail);
                    for i in 0..d {
                        cov[i][i] += 1e-12 * base[i] * base[i];
                    }
                    if let Some(l) = cholesky(&cov) {
                        // rescale so the current step size carries over
                        let old: f64 = (0..d).map(|i| chol[i][i].ln()).sum::<f64>() / d as f64;
                        let new: f64 = (0..d).map(|i| l[i][i].ln()).sum::<f64>() / d as f64;
                        if new.is_finite() {
                            chol = l;
                            log_s += old - new;
                            // standard 2.38/√d scaling for Gaussian-like targets
                            log_s = log_s.max((2.38 / (d as f64).sqrt()).ln() - 3.0);
                        }
                    }
                }
            }
        } else {
            acc_main += usize::from(accepted);
            if (t - cfg.burn_in) % cfg.thinning == 0 {
                samples.push(cur.clone());
                log_post.push(cur_lp);
            }
        }
    }
    let main_len = cfg.chain_length - cfg.burn_in;
    if acc_main == 0 {
        return Err(Error::Convergence(format!(
            "no proposal accepted in {main_len} post burn-in iterations"
        )));
    }
    Ok(McmcResult {
        samples,
        log_posterior: log_post,
        acceptance_rate: acc_main as f64 / main_len as f64,
        burn_in_acceptance_rate: if cfg.burn_in == 0 {
            f64::NAN
        } else {
            acc_burn as f64 / cfg.burn_in as f64
        },
    })
}

/// Index of the first maximal log-posterior value.
pub fn map_index(log_posterior: &[f64]) -> Result<usize> {
    if log_posterior.is_empty() {
        return Err(Error::input("empty chain"));
    }
    let mut best = 0;
    for (i, &v) in log_posterior.iter().enumerate() {
        if v > log_posterior[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Chain state with maximal log-posterior (first occurrence on ties).
pub fn map_estimate(samples: &[Vec<f64>], log_posterior: &[f64]) -> Result<Vec<f64>> {
    if samples.len() != log_posterior.len() {
        return Err(Error::input("samples and log-posterior values differ in length"));
    }
    Ok(samples[map_index(log_posterior)?].clone())
}

/// Likelihood of a copula family on fixed pseudo-observations.
pub struct CopulaLikelihood<'a> {
    pub family: CopulaFamily,
    pub obs: &'a PseudoObs,
}

impl LogLikelihood for CopulaLikelihood<'_> {
    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        match CopulaSpec::new(self.family, theta) {
            Ok(spec) => self.obs.log_likelihood(&spec),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn slow_coordinates(&self) -> &[usize] {
        if self.family == CopulaFamily::StudentT {
            &[1]
        } else {
            &[]
        }
    }

    fn log_likelihood_batch(&self, thetas: &[Vec<f64>]) -> Vec<f64> {
        if self.family != CopulaFamily::StudentT {
            return thetas.par_iter().map(|t| self.log_likelihood(t)).collect();
        }
        // contiguous runs sharing ν reuse one set of t-scores
        let mut runs: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for i in 1..=thetas.len() {
            if i == thetas.len() || thetas[i].get(1) != thetas[start].get(1) {
                runs.push((start, i));
                start = i;
            }
        }
        let parts: Vec<Vec<f64>> = runs
            .par_iter()
            .map(|&(a, b)| {
                let valid = |t: &Vec<f64>| CopulaSpec::new(CopulaFamily::StudentT, t).is_ok();
                let nu = thetas[a][1];
                let scores = if nu > 2.0 && nu.is_finite() {
                    Some(self.obs.student_scores(nu))
                } else {
                    None
                };
                thetas[a..b]
                    .iter()
                    .map(|t| match &scores {
                        Some(sc) if valid(t) => self.obs.student_log_likelihood(t[0], t[1], sc),
                        _ => f64::NEG_INFINITY,
                    })
                    .collect()
            })
            .collect();
        parts.concat()
    }
}

/// Likelihood of a marginal family on a data column.
pub struct MarginalLikelihood<'a> {
    pub family: MarginalFamily,
    pub data: &'a MarginalData,
}

impl LogLikelihood for MarginalLikelihood<'_> {
    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        match MarginalSpec::new(self.family, theta) {
            Ok(spec) => self.data.log_likelihood(&spec),
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

/// Default copula prior box.
pub fn default_copula_prior(family: CopulaFamily) -> PriorSpec {
    let bounds = match family {
        CopulaFamily::Independence => vec![],
        CopulaFamily::Gaussian => vec![(-0.999, 0.999)],
        CopulaFamily::StudentT => vec![(-0.999, 0.999), (2.0, 30.0)],
        CopulaFamily::Clayton => vec![(1e-3, 20.0)],
        CopulaFamily::Frank => vec![(-30.0, 30.0)],
        CopulaFamily::Gumbel => vec![(1.0, 20.0)],
    };
    let prior = PriorSpec { bounds, gaps: vec![] };
    if family == CopulaFamily::Frank {
        prior.with_gap(0, -FRANK_GAP, FRANK_GAP).expect("static prior")
    } else {
        prior
    }
}

/// Half-width of the excluded Frank interval around θ = 0.
pub const FRANK_GAP: f64 = 1e-3;

/// Number of approximate standard errors covered by each side of a
/// data-scaled marginal prior box.
pub const MARGINAL_PRIOR_HALF_WIDTH: f64 = 8.0;

/// Data-scaled prior box for a marginal family: centred on the
/// method-of-moments estimate, extending a fixed number of asymptotic
/// standard errors either side (multiplicatively for positive parameters).
pub fn default_marginal_prior(family: MarginalFamily, data: &[f64]) -> Result<PriorSpec> {
    let init = moment_init(family, data)?;
    let n = data.len() as f64;
    let c = MARGINAL_PRIOR_HALF_WIDTH;
    let [a, b] = init.spec.params();
    let log_box = |x: f64, se: f64| (x * (-c * se).exp(), x * (c * se).exp());
    let bounds = match family {
        MarginalFamily::Gaussian | MarginalFamily::Lognormal => {
            let half = c * b / n.sqrt();
            vec![(a - half, a + half), log_box(b, 1.0 / (2.0 * n).sqrt())]
        }
        MarginalFamily::Gamma => {
            let se_shape = 1.0 / (n * a * (a * trigamma(a) - 1.0)).sqrt();
            let se_scale = (se_shape * se_shape + 1.0 / (a * n)).sqrt();
            vec![log_box(a, se_shape), log_box(b, se_scale)]
        }
        MarginalFamily::Weibull => {
            let se_shape = 0.78 / n.sqrt();
            let se_scale = 1.053 / (a * n.sqrt());
            vec![log_box(a, se_shape), log_box(b, se_scale)]
        }
    };
    PriorSpec::new(bounds)
}

/// Moment-matched starting point for a copula chain.
pub fn copula_init(family: CopulaFamily, obs: &PseudoObs, prior: &PriorSpec) -> Vec<f64> {
    let tau = crate::copula::empirical_kendall_tau(&obs.pairs()).unwrap_or(0.0);
    let tau = tau.clamp(-0.95, 0.95);
    let guess = match family {
        CopulaFamily::Clayton | CopulaFamily::Gumbel => {
            crate::copula::tau_to_param(family, tau.max(0.01))
        }
        CopulaFamily::Frank => {
            crate::copula::tau_to_param(family, if tau.abs() < 1e-3 { 1e-3 } else { tau })
        }
        _ => crate::copula::tau_to_param(family, tau),
    };
    let guess = guess.unwrap_or_else(|_| prior.bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect());
    prior.project(&guess)
}

/// Settings shared by every candidate of one multimodel inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceSettings {
    pub evidence_samples: usize,
    /// Models with posterior probability below this are dropped.
    pub threshold: f64,
    pub mcmc: McmcConfig,
}

impl Default for InferenceSettings {
    fn default() -> Self {
        Self {
            evidence_samples: 10_000,
            threshold: 1e-3,
            mcmc: McmcConfig::default(),
        }
    }
}

/// Multimodel posterior over candidate families of type `F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPosterior<F> {
    pub candidates: Vec<F>,
    pub log_evidences: Vec<f64>,
    /// Posterior probabilities over all candidates.
    pub model_probs: Vec<f64>,
    /// Whether each candidate passed the plausibility threshold.
    pub retained: Vec<bool>,
    /// Post burn-in chain states; empty for dropped candidates.
    pub param_samples: Vec<Vec<Vec<f64>>>,
    pub map_estimates: Vec<Option<Vec<f64>>>,
    pub acceptance_rates: Vec<Option<f64>>,
}

impl<F: Copy> ModelPosterior<F> {
    /// Probabilities renormalized over retained candidates (zero elsewhere).
    pub fn retained_probs(&self) -> Vec<f64> {
        let s: f64 = self
            .model_probs
            .iter()
            .zip(&self.retained)
            .filter(|(_, &r)| r)
            .map(|(p, _)| p)
            .sum();
        self.model_probs
            .iter()
            .zip(&self.retained)
            .map(|(&p, &r)| if r { p / s } else { 0.0 })
            .collect()
    }

    pub fn retained_indices(&self) -> Vec<usize> {
        (0..self.candidates.len()).filter(|&i| self.retained[i]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.candidates.len();
        if [
            self.log_evidences.len(),
            self.model_probs.len(),
            self.retained.len(),
            self.param_samples.len(),
            self.map_estimates.len(),
            self.acceptance_rates.len(),
        ]
        .iter()
        .any(|&l| l != m)
        {
            return Err(Error::input("model posterior vectors differ in length"));
        }
        if !self.retained.iter().any(|&r| r) {
            return Err(Error::NoViableModel);
        }
        for i in self.retained_indices() {
            if self.param_samples[i].is_empty() {
                return Err(Error::input(format!("retained model {i} has no parameter samples")));
            }
        }
        Ok(())
    }
}

/// One candidate of a multimodel inference.
pub struct Candidate<'a, F> {
    pub family: F,
    pub likelihood: Box<dyn LogLikelihood + 'a>,
    pub prior: PriorSpec,
    pub init: Vec<f64>,
}

/// Evidence for every candidate, model probabilities under a uniform model
/// prior, then MCMC for each candidate above the threshold.
pub fn infer_models<F: Copy + Send + Sync>(
    candidates: &[Candidate<'_, F>],
    settings: &InferenceSettings,
    seed: u64,
) -> Result<ModelPosterior<F>> {
    if candidates.is_empty() {
        return Err(Error::input("no candidate models"));
    }
    let m = candidates.len();
    let mut log_ev = Vec::with_capacity(m);
    for (j, c) in candidates.iter().enumerate() {
        let ev = log_evidence(
            c.likelihood.as_ref(),
            &c.prior,
            settings.evidence_samples,
            derive_seed(seed, 2 * j as u64),
        )?;
        log_ev.push(ev.log_evidence);
    }
    let probs = posterior_model_probabilities(&log_ev, &vec![1.0 / m as f64; m])?;
    let retained: Vec<bool> = probs.iter().map(|&p| p >= settings.threshold).collect();
    let mut param_samples = vec![vec![]; m];
    let mut maps = vec![None; m];
    let mut acc = vec![None; m];
    for (j, c) in candidates.iter().enumerate() {
        if !retained[j] {
            continue;
        }
        let mut cfg = settings.mcmc.clone();
        cfg.seed = derive_seed(seed, 2 * j as u64 + 1);
        let res = mcmc_posterior(c.likelihood.as_ref(), &c.prior, &c.init, &cfg)?;
        maps[j] = Some(map_estimate(&res.samples, &res.log_posterior)?);
        acc[j] = Some(res.acceptance_rate);
        param_samples[j] = res.samples;
    }
    let post = ModelPosterior {
        candidates: candidates.iter().map(|c| c.family).collect(),
        log_evidences: log_ev,
        model_probs: probs,
        retained,
        param_samples,
        map_estimates: maps,
        acceptance_rates: acc,
    };
    post.validate()?;
    Ok(post)
}

/// Copula multimodel inference on pseudo-observations with default priors.
pub fn infer_copulas(
    obs: &PseudoObs,
    families: &[CopulaFamily],
    priors: Option<&[PriorSpec]>,
    settings: &InferenceSettings,
    seed: u64,
) -> Result<ModelPosterior<CopulaFamily>> {
    let candidates: Vec<Candidate<'_, CopulaFamily>> = families
        .iter()
        .enumerate()
        .map(|(j, &family)| {
            let prior = match priors {
                Some(p) => p[j].clone(),
                None => default_copula_prior(family),
            };
            let init = copula_init(family, obs, &prior);
            Candidate {
                family,
                likelihood: Box::new(CopulaLikelihood { family, obs }),
                prior,
                init,
            }
        })
        .collect();
    infer_models(&candidates, settings, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use crate::special::norm_cdf;

    #[test]
    fn point_mass_prior_collapses_to_likelihood() {
        let data = MarginalData::new(&[0.0]).unwrap();
        let lik = MarginalLikelihood {
            family: MarginalFamily::Gaussian,
            data: &data,
        };
        let prior = PriorSpec::new(vec![(0.0, 1e-9), (1.0, 1.0 + 1e-9)]).unwrap();
        let ev = log_evidence(&lik, &prior, 1000, 1).unwrap();
        assert!((ev.log_evidence + 0.918_938_533_204_672_7).abs() < 1e-8);
    }

    #[test]
    fn evidence_matches_quadrature() {
        let data = MarginalData::new(&[0.3, -0.4, 1.1, 0.2]).unwrap();
        let lik = MarginalLikelihood {
            family: MarginalFamily::Gaussian,
            data: &data,
        };
        let (m0, m1, s0, s1) = (-1.0, 1.5, 0.3, 2.0);
        let prior = PriorSpec::new(vec![(m0, m1), (s0, s1)]).unwrap();
        let area = (m1 - m0) * (s1 - s0);
        let exact = quad::integrate_2d(
            |m, s| lik.log_likelihood(&[m, s]).exp() / area,
            (m0, m1),
            (s0, s1),
            1e-12,
        )
        .unwrap();
        let ev = log_evidence(&lik, &prior, 200_000, 5).unwrap();
        let se = ev.relative_std_error;
        let rel = ev.log_evidence.exp() / exact - 1.0;
        assert!(rel.abs() < 2.0 * se, "rel {rel} se {se}");
    }

    #[test]
    fn support_violation_gives_negative_infinity() {
        let data = MarginalData::new(&[1.0, -0.5]).unwrap();
        let lik = MarginalLikelihood {
            family: MarginalFamily::Weibull,
            data: &data,
        };
        let prior = PriorSpec::new(vec![(0.5, 3.0), (0.5, 3.0)]).unwrap();
        assert_eq!(log_evidence(&lik, &prior, 100, 0).unwrap().log_evidence, f64::NEG_INFINITY);
    }

    #[test]
    fn model_probability_reference_cases() {
        let p = posterior_model_probabilities(&[-3.0; 4], &[0.25; 4]).unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let p = posterior_model_probabilities(&[0.0, -(3f64.ln())], &[0.5, 0.5]).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
        assert!(matches!(
            posterior_model_probabilities(&[f64::NEG_INFINITY; 3], &[1.0 / 3.0; 3]),
            Err(Error::NoViableModel)
        ));
        // shift invariance and extreme spreads
        let ev = [-1000.0, -1001.5, -1003.0, -2000.0, -999.0];
        let pri = [0.1, 0.2, 0.3, 0.2, 0.2];
        let a = posterior_model_probabilities(&ev, &pri).unwrap();
        let shifted: Vec<f64> = ev.iter().map(|e| e + 1234.5).collect();
        let b = posterior_model_probabilities(&shifted, &pri).unwrap();
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_likelihood_samples_the_prior() {
        let prior = PriorSpec::new(vec![(2.0, 5.0)]).unwrap();
        let cfg = McmcConfig {
            chain_length: 45_000,
            burn_in: 5_000,
            thinning: 4,
            seed: 9,
            ..Default::default()
        };
        let res = mcmc_posterior(&|_: &[f64]| 0.0, &prior, &[3.0], &cfg).unwrap();
        let mut xs: Vec<f64> = res.samples.iter().map(|s| (s[0] - 2.0) / 3.0).collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
            .fold(0.0, f64::max);
        // thinned chain is close to independent; 1% critical value 1.63/√n
        assert!(ks < 1.63 / n.sqrt(), "ks {ks}");
    }

    #[test]
    fn gaussian_mean_posterior() {
        let data: Vec<f64> = (0..50).map(|i| 1.0 + ((i * 37) % 50) as f64 / 25.0 - 1.0).collect();
        let md = MarginalData::new(&data).unwrap();
        let lik = MarginalLikelihood {
            family: MarginalFamily::Gaussian,
            data: &md,
        };
        let prior = PriorSpec::new(vec![(-5.0, 5.0), (0.6, 0.6 + 1e-9)]).unwrap();
        let cfg = McmcConfig {
            chain_length: 22_000,
            burn_in: 2_000,
            thinning: 5,
            seed: 4,
            ..Default::default()
        };
        let res = mcmc_posterior(&lik, &prior, &[0.0, 0.6], &cfg).unwrap();
        let mean = res.samples.iter().map(|s| s[0]).sum::<f64>() / res.samples.len() as f64;
        let xbar = data.iter().sum::<f64>() / 50.0;
        let post_sd = 0.6 / 50f64.sqrt();
        let se = post_sd / (res.samples.len() as f64 / 4.0).sqrt();
        assert!((mean - xbar).abs() < 3.0 * se.max(1e-3), "{mean} vs {xbar}");
    }

    #[test]
    fn discrete_like_target_total_variation() {
        // piecewise-constant density on [0, 4): weights 1, 3, 2, 4
        let w = [1.0f64, 3.0, 2.0, 4.0];
        let target = |t: &[f64]| w[(t[0].floor() as usize).min(3)].ln();
        let prior = PriorSpec::new(vec![(0.0, 4.0)]).unwrap();
        let cfg = McmcConfig {
            chain_length: 105_000,
            burn_in: 5_000,
            thinning: 1,
            seed: 2,
            ..Default::default()
        };
        let res = mcmc_posterior(&target, &prior, &[0.5], &cfg).unwrap();
        let mut hist = [0.0; 4];
        for s in &res.samples {
            hist[(s[0].floor() as usize).min(3)] += 1.0;
        }
        let n = res.samples.len() as f64;
        let tv: f64 = 0.5 * (0..4).map(|i| (hist[i] / n - w[i] / 10.0).abs()).sum::<f64>();
        assert!(tv < 0.05, "tv {tv}");
    }

    #[test]
    fn map_tie_break_and_single_state() {
        assert_eq!(map_estimate(&[vec![1.0]], &[-2.0]).unwrap(), vec![1.0]);
        let s = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert_eq!(map_estimate(&s, &[-1.0, 0.5, 0.5]).unwrap(), vec![1.0]);
    }

    #[test]
    fn map_of_quadratic_posterior() {
        let target = |t: &[f64]| -0.5 * ((t[0] - 1.3) / 0.2).powi(2);
        let prior = PriorSpec::new(vec![(-2.0, 4.0)]).unwrap();
        let cfg = McmcConfig {
            chain_length: 20_000,
            burn_in: 2_000,
            thinning: 1,
            seed: 8,
            ..Default::default()
        };
        let res = mcmc_posterior(&target, &prior, &[0.0], &cfg).unwrap();
        let map = map_estimate(&res.samples, &res.log_posterior).unwrap()[0];
        // grid-search oracle with resolution 0.01
        let grid_best = (0..=600)
            .map(|i| -2.0 + i as f64 * 0.01)
            .max_by(|a, b| target(&[*a]).total_cmp(&target(&[*b])))
            .unwrap();
        assert!((map - grid_best).abs() < 0.02, "{map} vs {grid_best}");
    }

    #[test]
    fn prior_gap_is_respected() {
        let prior = default_copula_prior(CopulaFamily::Frank);
        let mut rng = rng_from_seed(0);
        for _ in 0..1000 {
            let t = prior.sample(&mut rng);
            assert!(t[0].abs() >= FRANK_GAP);
        }
        assert!(!prior.contains(&[0.0]));
        assert!(prior.project(&[1e-4])[0].abs() >= FRANK_GAP);
    }

    #[test]
    fn grouped_student_evidence_is_consistent() {
        // the batched path and the pointwise path give the same likelihoods
        let pairs: Vec<(f64, f64)> = (1..40)
            .map(|i| {
                let u = i as f64 / 40.0;
                (u, norm_cdf(0.5 * crate::special::norm_ppf(u) + 0.3))
            })
            .collect();
        let obs = PseudoObs::new(&pairs).unwrap();
        let lik = CopulaLikelihood {
            family: CopulaFamily::StudentT,
            obs: &obs,
        };
        let prior = default_copula_prior(CopulaFamily::StudentT);
        let thetas = draw_prior_grouped(&prior, &[1], 300, &mut rng_from_seed(1));
        let batch = lik.log_likelihood_batch(&thetas);
        for (t, b) in thetas.iter().zip(&batch) {
            assert!((lik.log_likelihood(t) - b).abs() < 1e-9);
        }
        let distinct: std::collections::BTreeSet<u64> = thetas.iter().map(|t| t[1].to_bits()).collect();
        assert_eq!(distinct.len(), 18);
    }

    #[test]
    fn marginal_prior_contains_moment_estimate() {
        let data = [10.2, 9.7, 10.9, 10.1, 9.4, 10.6, 10.0, 9.9];
        for fam in MarginalFamily::ALL {
            let prior = default_marginal_prior(fam, &data).unwrap();
            let init = moment_init(fam, &data).unwrap().spec.params();
            assert!(prior.contains(&init), "{fam}");
        }
    }
}
