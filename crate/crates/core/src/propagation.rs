//! One-pass propagation of a joint-density ensemble through a performance
//! function: the optimal mixture sampling density, exact mixture sampling,
//! importance weights for every candidate, reweighted estimators and
//! ensemble CDF bands.
//!
//! Inputs may be split into independent blocks (dependent pairs and single
//! variables). The sampling density is then the product of one mixture per
//! block and candidate weights multiply across blocks.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bayes::log_sum_exp;
use crate::copula::{clamp_unit, CopulaFamily, PseudoObs};
use crate::error::{Error, Result};
use crate::hierarchy::{hex, ConditionalCopulaSet, JointEnsemble, MarginalDraw};
use crate::marginal::MarginalSpec;
use crate::models::PerformanceFunction;
use crate::rng::{open_unit, rng_from_seed};

/// (1/N_tc) Σ_k c_k(u, v).
pub fn expected_conditional_copula(set: &ConditionalCopulaSet, u: f64, v: f64) -> f64 {
    set.mean_density(u, v)
}

/// One independent block of input variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Block {
    Pair { vars: [usize; 2], ensemble: JointEnsemble },
    Single { var: usize, draws: Vec<MarginalDraw> },
}

impl Block {
    fn vars(&self) -> Vec<usize> {
        match self {
            Block::Pair { vars, .. } => vars.to_vec(),
            Block::Single { var, .. } => vec![*var],
        }
    }

    fn n_td(&self) -> usize {
        match self {
            Block::Pair { ensemble, .. } => ensemble.n_td(),
            Block::Single { draws, .. } => draws.len(),
        }
    }

    fn marginals_of(&self, var: usize) -> Vec<MarginalSpec> {
        match self {
            Block::Pair { vars, ensemble } => ensemble
                .entries
                .iter()
                .map(|e| if vars[0] == var { e.marginals.first.spec } else { e.marginals.second.spec })
                .collect(),
            Block::Single { draws, .. } => draws.iter().map(|d| d.spec).collect(),
        }
    }
}

/// Support of a marginal: the real line or the positive half-line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Real,
    Positive,
}

impl Support {
    fn of(m: &MarginalSpec) -> Self {
        if m.family().positive_support() {
            Support::Positive
        } else {
            Support::Real
        }
    }

    fn covers(self, other: Support) -> bool {
        self == Support::Real || other == Support::Positive
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlockEnsemble {
    dimension: usize,
    blocks: Vec<Block>,
}

/// Candidate joint densities over d inputs split into independent blocks.
///
/// Every block holds the same number N_td of entries; every pair block the
/// same number N_tc of copula draws. Candidate (l, k) takes entry l of each
/// block and copula draw k of each pair block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBlockEnsemble")]
pub struct BlockEnsemble {
    dimension: usize,
    blocks: Vec<Block>,
    #[serde(skip_serializing)]
    n_td: usize,
    #[serde(skip_serializing)]
    n_tc: usize,
}

impl TryFrom<RawBlockEnsemble> for BlockEnsemble {
    type Error = Error;
    fn try_from(r: RawBlockEnsemble) -> Result<Self> {
        let e = BlockEnsemble::new(r.blocks)?;
        if e.dimension != r.dimension {
            return Err(Error::input(format!("dimension {} does not match the blocks", r.dimension)));
        }
        Ok(e)
    }
}

impl BlockEnsemble {
    /// Blocks must partition the variables 0..d.
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::input("empty ensemble"));
        }
        let mut vars: Vec<usize> = blocks.iter().flat_map(|b| b.vars()).collect();
        vars.sort_unstable();
        let d = vars.len();
        if vars.iter().enumerate().any(|(i, &v)| i != v) {
            return Err(Error::input("blocks must partition the variables 0..d"));
        }
        let n_td = blocks[0].n_td();
        if n_td == 0 || blocks.iter().any(|b| b.n_td() != n_td) {
            return Err(Error::input("all blocks must hold the same positive number of entries"));
        }
        let n_tcs: Vec<usize> = blocks
            .iter()
            .filter_map(|b| match b {
                Block::Pair { ensemble, .. } => Some(ensemble.n_tc),
                Block::Single { .. } => None,
            })
            .collect();
        let n_tc = n_tcs.first().copied().unwrap_or(1);
        if n_tcs.iter().any(|&k| k != n_tc) {
            return Err(Error::input("all pair blocks must hold the same number of copula draws"));
        }
        Ok(Self {
            dimension: d,
            blocks,
            n_td,
            n_tc,
        })
    }

    /// A single dependent pair over variables (0, 1).
    pub fn pair(ensemble: JointEnsemble) -> Result<Self> {
        Self::new(vec![Block::Pair { vars: [0, 1], ensemble }])
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn n_td(&self) -> usize {
        self.n_td
    }

    pub fn n_tc(&self) -> usize {
        self.n_tc
    }

    pub fn n_candidates(&self) -> usize {
        self.n_td * self.n_tc
    }

    /// Support of the union of candidate marginals for each variable.
    pub fn supports(&self) -> Vec<Support> {
        let mut out = vec![Support::Positive; self.dimension];
        for b in &self.blocks {
            for v in b.vars() {
                if b.marginals_of(v).iter().any(|m| Support::of(m) == Support::Real) {
                    out[v] = Support::Real;
                }
            }
        }
        out
    }

    /// SHA-256 of the serialized ensemble.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("ensemble serializes");
        hex(&Sha256::digest(json))
    }

    /// ln p_{l,k}(x).
    pub fn candidate_log_pdf(&self, l: usize, k: usize, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dimension, "point dimension");
        let mut s = 0.0;
        for b in &self.blocks {
            s += match b {
                Block::Pair { vars, ensemble } => ensemble.candidate_log_pdf(l, k, (x[vars[0]], x[vars[1]])),
                Block::Single { var, draws } => draws[l].spec.ln_pdf(x[*var]),
            };
        }
        s
    }

    /// ln p_{l,k}(x_i) for every k and sample: an N_tc × n matrix.
    pub fn entry_log_densities(&self, l: usize, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = samples.len();
        let mut common = vec![0.0; n];
        let mut per_k = vec![vec![0.0; n]; self.n_tc];
        for b in &self.blocks {
            match b {
                Block::Pair { vars, ensemble } => {
                    let t = pair_entry_terms(ensemble, l, samples, *vars)?;
                    for (c, lf) in common.iter_mut().zip(&t.ln_marginals) {
                        *c += lf;
                    }
                    for (row, lc) in per_k.iter_mut().zip(&t.ln_copulas) {
                        for (r, v) in row.iter_mut().zip(lc) {
                            *r += v;
                        }
                    }
                }
                Block::Single { var, draws } => {
                    for (c, x) in common.iter_mut().zip(samples) {
                        *c += draws[l].spec.ln_pdf(x[*var]);
                    }
                }
            }
        }
        for row in &mut per_k {
            for (r, c) in row.iter_mut().zip(&common) {
                *r += c;
            }
        }
        Ok(per_k)
    }
}

struct EntryTerms {
    /// ln f1 + ln f2 per sample.
    ln_marginals: Vec<f64>,
    /// ln c_k per copula draw and sample.
    ln_copulas: Vec<Vec<f64>>,
}

fn pair_entry_terms(ens: &JointEnsemble, l: usize, samples: &[Vec<f64>], vars: [usize; 2]) -> Result<EntryTerms> {
    let e = &ens.entries[l];
    let (m1, m2) = e.marginals.specs();
    let mut uv = Vec::with_capacity(samples.len());
    let mut ln_marginals = Vec::with_capacity(samples.len());
    for x in samples {
        let (a, b) = (x[vars[0]], x[vars[1]]);
        ln_marginals.push(m1.ln_pdf(a) + m2.ln_pdf(b));
        uv.push((clamp_unit(m1.cdf(a)), clamp_unit(m2.cdf(b))));
    }
    let obs = PseudoObs::new(&uv)?;
    // rejected MCMC proposals repeat draws, so each distinct spec is evaluated once
    let mut seen: HashMap<(CopulaFamily, Vec<u64>), usize> = HashMap::new();
    let mut ln_copulas: Vec<Vec<f64>> = Vec::with_capacity(e.copulas.draws.len());
    for d in &e.copulas.draws {
        let key = (d.spec.family(), d.spec.params().iter().map(|p| p.to_bits()).collect());
        let row = match seen.get(&key) {
            Some(&k) => ln_copulas[k].clone(),
            None => {
                seen.insert(key, ln_copulas.len());
                let mut out = vec![0.0; samples.len()];
                obs.add_ln_pdf(&d.spec, &mut out);
                out
            }
        };
        ln_copulas.push(row);
    }
    Ok(EntryTerms {
        ln_marginals,
        ln_copulas,
    })
}

/// Running log-sum-exp per slot.
struct LseAccumulator {
    max: Vec<f64>,
    sum: Vec<f64>,
}

impl LseAccumulator {
    fn new(n: usize) -> Self {
        Self {
            max: vec![f64::NEG_INFINITY; n],
            sum: vec![0.0; n],
        }
    }

    fn add(&mut self, i: usize, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max[i] {
            self.sum[i] = self.sum[i] * (self.max[i] - x).exp() + 1.0;
            self.max[i] = x;
        } else {
            self.sum[i] += (x - self.max[i]).exp();
        }
    }

    fn finish(self) -> Vec<f64> {
        self.max
            .into_iter()
            .zip(self.sum)
            .map(|(m, s)| if m == f64::NEG_INFINITY { m } else { m + s.ln() })
            .collect()
    }
}

/// The optimal sampling density: per block, a mixture over the N_td entries
/// of f1·f2 times the mean of the entry's copula draws.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalDensity {
    ensemble: BlockEnsemble,
    ln_weights: Vec<f64>,
}

/// Equal entry weights 1/N_td.
pub fn optimal_density(ensemble: BlockEnsemble) -> OptimalDensity {
    let n = ensemble.n_td();
    OptimalDensity {
        ln_weights: vec![-(n as f64).ln(); n],
        ensemble,
    }
}

/// Entry weights proportional to `weights`, for ensembles whose entries
/// were not drawn in proportion to their model probabilities.
pub fn optimal_density_weighted(ensemble: BlockEnsemble, weights: &[f64]) -> Result<OptimalDensity> {
    if weights.len() != ensemble.n_td() {
        return Err(Error::input("one weight per ensemble entry is required"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::input("entry weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::input("entry weights sum to zero"));
    }
    Ok(OptimalDensity {
        ln_weights: weights.iter().map(|w| (w / total).ln()).collect(),
        ensemble,
    })
}

impl OptimalDensity {
    pub fn ensemble(&self) -> &BlockEnsemble {
        &self.ensemble
    }

    pub fn entry_weights(&self) -> Vec<f64> {
        self.ln_weights.iter().map(|w| w.exp()).collect()
    }

    /// ln q*(x) by direct summation.
    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.ensemble.dimension, "point dimension");
        (0..self.ensemble.blocks.len()).map(|b| self.block_log_pdf(b, x)).sum()
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.log_pdf(x).exp()
    }

    /// ln of block b's mixture at the block's coordinates of x.
    pub fn block_log_pdf(&self, b: usize, x: &[f64]) -> f64 {
        let terms: Vec<f64> = match &self.ensemble.blocks[b] {
            Block::Pair { vars, ensemble } => ensemble
                .entries
                .iter()
                .zip(&self.ln_weights)
                .map(|(e, w)| {
                    let (m1, m2) = e.marginals.specs();
                    let (a, c) = (x[vars[0]], x[vars[1]]);
                    let lf = m1.ln_pdf(a) + m2.ln_pdf(c);
                    if lf == f64::NEG_INFINITY {
                        return lf;
                    }
                    let (u, v) = (m1.cdf(a), m2.cdf(c));
                    let lc: Vec<f64> = e.copulas.draws.iter().map(|d| d.spec.ln_pdf_clamped(u, v)).collect();
                    w + log_sum_exp(&lc) - (lc.len() as f64).ln() + lf
                })
                .collect(),
            Block::Single { var, draws } => draws
                .iter()
                .zip(&self.ln_weights)
                .map(|(d, w)| w + d.spec.ln_pdf(x[*var]))
                .collect(),
        };
        log_sum_exp(&terms)
    }

    /// ln q*(x_i) for many samples, entry by entry.
    pub fn log_pdf_batch(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut total = vec![0.0; samples.len()];
        for b in 0..self.ensemble.blocks.len() {
            for (t, v) in total.iter_mut().zip(self.block_log_pdf_batch(b, samples)?) {
                *t += v;
            }
        }
        Ok(total)
    }

    pub fn block_log_pdf_batch(&self, b: usize, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = samples.len();
        let block = &self.ensemble.blocks[b];
        let parts: Vec<Vec<f64>> = (0..self.ensemble.n_td)
            .into_par_iter()
            .map(|l| -> Result<Vec<f64>> {
                let w = self.ln_weights[l];
                Ok(match block {
                    Block::Pair { vars, ensemble } => {
                        let t = pair_entry_terms(ensemble, l, samples, *vars)?;
                        let ln_ntc = (t.ln_copulas.len() as f64).ln();
                        let mut acc = LseAccumulator::new(n);
                        for row in &t.ln_copulas {
                            for (i, &v) in row.iter().enumerate() {
                                acc.add(i, v);
                            }
                        }
                        acc.finish()
                            .into_iter()
                            .zip(&t.ln_marginals)
                            .map(|(c, lf)| w + c - ln_ntc + lf)
                            .collect()
                    }
                    Block::Single { var, draws } => samples.iter().map(|x| w + draws[l].spec.ln_pdf(x[*var])).collect(),
                })
            })
            .collect::<Result<_>>()?;
        let mut acc = LseAccumulator::new(n);
        for p in &parts {
            for (i, &v) in p.iter().enumerate() {
                acc.add(i, v);
            }
        }
        Ok(acc.finish())
    }

    fn pick_entry<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let n = self.ln_weights.len();
        let w0 = self.ln_weights[0];
        if self.ln_weights.iter().all(|&w| w == w0) {
            return rng.random_range(0..n);
        }
        let mut s = open_unit(rng);
        for (l, w) in self.ln_weights.iter().enumerate() {
            s -= w.exp();
            if s < 0.0 {
                return l;
            }
        }
        n - 1
    }
}

/// Exact mixture sampling: per block pick an entry and a copula draw, then
/// sample that joint by the conditional method.
pub fn sample_optimal(q: &OptimalDensity, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n < 1 {
        return Err(Error::input("at least one sample is required"));
    }
    let mut rng = rng_from_seed(seed);
    let d = q.ensemble.dimension;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x = vec![0.0; d];
        for b in &q.ensemble.blocks {
            let l = q.pick_entry(&mut rng);
            match b {
                Block::Pair { vars, ensemble } => {
                    let k = rng.random_range(0..ensemble.n_tc);
                    let (pair, cop) = ensemble.candidate(l, k);
                    let (u, v) = cop.sample_one(&mut rng)?;
                    x[vars[0]] = pair.first.spec.quantile(u);
                    x[vars[1]] = pair.second.spec.quantile(v);
                }
                Block::Single { var, draws } => {
                    x[*var] = draws[l].spec.quantile(open_unit(&mut rng));
                }
            }
        }
        out.push(x);
    }
    Ok(out)
}

/// Samples from q*, their model outputs and ln q* at each sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedRun {
    pub samples: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
    pub ln_q: Vec<f64>,
    pub seed: u64,
    /// Support of q* per variable.
    pub support: Vec<Support>,
    /// Digest of the ensemble q* was built from.
    pub ensemble_key: String,
}

impl WeightedRun {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.samples.len();
        if n == 0 || self.outputs.len() != n || self.ln_q.len() != n {
            return Err(Error::input("run columns differ in length or are empty"));
        }
        if self.ln_q.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("run holds a sample with non-finite ln q*"));
        }
        Ok(())
    }
}

/// Draw `n` samples from q* and evaluate the model once at each.
pub fn simulate(q: &OptimalDensity, g: &dyn PerformanceFunction, n: usize, seed: u64) -> Result<WeightedRun> {
    if g.dimension() != q.ensemble.dimension {
        return Err(Error::input(format!(
            "model takes {} inputs but the ensemble has {}",
            g.dimension(),
            q.ensemble.dimension
        )));
    }
    let samples = sample_optimal(q, n, seed)?;
    let outputs = samples
        .par_iter()
        .map(|x| g.evaluate(x))
        .collect::<Result<Vec<f64>>>()
        .map_err(|e| e.in_stage("model evaluation"))?;
    let ln_q = q.log_pdf_batch(&samples)?;
    let run = WeightedRun {
        samples,
        outputs,
        ln_q,
        seed,
        support: q.ensemble.supports(),
        ensemble_key: q.ensemble.digest(),
    };
    run.validate()?;
    Ok(run)
}

/// Refuse ensembles with mass where the run's q* had none.
pub fn check_support(ensemble: &BlockEnsemble, run: &WeightedRun) -> Result<()> {
    if ensemble.dimension != run.support.len() {
        return Err(Error::Support(format!(
            "ensemble has {} variables, run has {}",
            ensemble.dimension,
            run.support.len()
        )));
    }
    for (v, (&s_run, s_new)) in run.support.iter().zip(ensemble.supports()).enumerate() {
        if !s_run.covers(s_new) {
            return Err(Error::Support(format!(
                "variable {v}: candidates put mass on the negative half-line but the sampling density does not"
            )));
        }
    }
    Ok(())
}

/// ln w_{l,k}(x_i) = ln p_{l,k}(x_i) − ln q*(x_i) for every k: N_tc × n.
pub fn entry_log_weights(ensemble: &BlockEnsemble, run: &WeightedRun, l: usize) -> Result<Vec<Vec<f64>>> {
    let mut m = ensemble.entry_log_densities(l, &run.samples)?;
    for row in &mut m {
        for (r, q) in row.iter_mut().zip(&run.ln_q) {
            *r -= q;
            if *r == f64::INFINITY || r.is_nan() {
                return Err(Error::Support("infinite importance weight".into()));
            }
        }
    }
    Ok(m)
}

pub fn candidate_log_weights(ensemble: &BlockEnsemble, run: &WeightedRun, l: usize, k: usize) -> Result<Vec<f64>> {
    Ok(entry_log_weights(ensemble, run, l)?.swap_remove(k))
}

/// (Σw)² / Σw² from log-weights.
pub fn effective_sample_size(log_w: &[f64]) -> f64 {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return 0.0;
    }
    let (s1, s2) = log_w.iter().fold((0.0, 0.0), |(a, b), &lw| {
        let w = (lw - m).exp();
        (a + w, b + w * w)
    });
    s1 * s1 / s2
}

/// An importance-sampling estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// (1/n) Σ g_i w_i.
    pub mean: f64,
    pub std_error: f64,
    pub mean_weight: f64,
    pub ess: f64,
    /// Set when the effective sample size is below 10.
    pub degenerate: bool,
}

/// Minimum effective sample size before an estimate is flagged.
pub const MIN_ESS: f64 = 10.0;

pub fn weighted_estimate(values: &[f64], log_w: &[f64]) -> Result<Estimate> {
    if values.len() != log_w.len() || values.is_empty() {
        return Err(Error::input("values and weights differ in length or are empty"));
    }
    let n = values.len() as f64;
    let prod: Vec<f64> = values.iter().zip(log_w).map(|(g, lw)| g * lw.exp()).collect();
    let mean = prod.iter().sum::<f64>() / n;
    let var = prod.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let mean_weight = log_w.iter().map(|lw| lw.exp()).sum::<f64>() / n;
    let ess = effective_sample_size(log_w);
    if ess < MIN_ESS {
        log::warn!("importance weights are degenerate: effective sample size {ess:.2}");
    }
    Ok(Estimate {
        mean,
        std_error: (var / n).sqrt(),
        mean_weight,
        ess,
        degenerate: ess < MIN_ESS,
    })
}

/// E_{p_{l,k}}[g] from the run's outputs.
pub fn reweighted_expectation(run: &WeightedRun, ensemble: &BlockEnsemble, l: usize, k: usize) -> Result<Estimate> {
    weighted_estimate(&run.outputs, &candidate_log_weights(ensemble, run, l, k)?)
}

/// How weighted empirical CDFs are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdfNormalization {
    /// Σ_{g_i ≤ t} w_i / Σ w_i.
    #[default]
    SelfNormalized,
    /// (1/n) Σ_{g_i ≤ t} w_i.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BandOptions {
    pub normalization: CdfNormalization,
    /// Keep every candidate CDF, not only the envelope.
    pub keep_members: bool,
}

/// Pointwise envelope of candidate CDFs of the model output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfBand {
    pub grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Candidate CDFs in (l, k) order when kept.
    pub members: Vec<Vec<f64>>,
    pub n_candidates: usize,
}

impl CdfBand {
    pub fn mean_width(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).sum::<f64>() / self.grid.len() as f64
    }

    /// Grid indices where `cdf` leaves the band.
    pub fn violations(&self, cdf: &[f64]) -> Vec<usize> {
        (0..self.grid.len())
            .filter(|&i| cdf[i] < self.lower[i] || cdf[i] > self.upper[i])
            .collect()
    }

    pub fn contains(&self, cdf: &[f64]) -> bool {
        self.violations(cdf).is_empty()
    }
}

/// Counts of sorted outputs at or below each grid value.
fn grid_counts(sorted: &[f64], grid: &[f64]) -> Vec<usize> {
    grid.iter().map(|&t| sorted.partition_point(|&g| g <= t)).collect()
}

fn weighted_cdf(order: &[usize], counts: &[usize], log_w: &[f64], norm: CdfNormalization) -> Vec<f64> {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut cum = Vec::with_capacity(order.len() + 1);
    cum.push(0.0);
    let mut s = 0.0;
    for &i in order {
        s += (log_w[i] - m).exp();
        cum.push(s);
    }
    let scale = match norm {
        CdfNormalization::SelfNormalized => 1.0 / s,
        CdfNormalization::Plain => m.exp() / order.len() as f64,
    };
    counts.iter().map(|&c| cum[c] * scale).collect()
}

/// Candidate CDFs of the model output on `grid`, reweighted from one run.
pub fn cdf_band(run: &WeightedRun, ensemble: &BlockEnsemble, grid: &[f64], opts: BandOptions) -> Result<CdfBand> {
    run.validate()?;
    check_support(ensemble, run)?;
    if grid.is_empty() || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::input("grid must be nonempty and sorted"));
    }
    let mut order: Vec<usize> = (0..run.len()).collect();
    order.sort_by(|&a, &b| run.outputs[a].total_cmp(&run.outputs[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| run.outputs[i]).collect();
    let counts = grid_counts(&sorted, grid);
    let per_entry: Vec<Vec<Vec<f64>>> = (0..ensemble.n_td())
        .into_par_iter()
        .map(|l| -> Result<Vec<Vec<f64>>> {
            Ok(entry_log_weights(ensemble, run, l)?
                .iter()
                .map(|lw| weighted_cdf(&order, &counts, lw, opts.normalization))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut lower = vec![f64::INFINITY; grid.len()];
    let mut upper = vec![f64::NEG_INFINITY; grid.len()];
    let mut members = Vec::new();
    for entry in per_entry {
        for cdf in entry {
            for i in 0..grid.len() {
                lower[i] = lower[i].min(cdf[i]);
                upper[i] = upper[i].max(cdf[i]);
            }
            if opts.keep_members {
                members.push(cdf);
            }
        }
    }
    Ok(CdfBand {
        grid: grid.to_vec(),
        lower,
        upper,
        members,
        n_candidates: ensemble.n_candidates(),
    })
}

/// Unweighted empirical CDF of `values` on `grid`.
pub fn empirical_cdf(values: &[f64], grid: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    grid_counts(&sorted, grid)
        .into_iter()
        .map(|c| c as f64 / values.len() as f64)
        .collect()
}

/// `m` evenly spaced points on [lo, hi].
pub fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    match m {
        0 => vec![],
        1 => vec![lo],
        _ => (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect(),
    }
}

/// Bilinear interpolation of ln q* for one pair block on a rectilinear grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    block: usize,
    vars: [usize; 2],
    xs: Vec<f64>,
    ys: Vec<f64>,
    ln_q: Vec<f64>,
}

/// Tail probability excluded from the lookup-table box.
pub const LOOKUP_TAIL: f64 = 1e-4;

impl LookupTable {
    /// Tabulate block `block` on an `nx` × `ny` grid spanning the
    /// [1e−4, 1 − 1e−4] quantiles of every entry's marginals.
    pub fn build(q: &OptimalDensity, block: usize, nx: usize, ny: usize) -> Result<Self> {
        let Some(Block::Pair { vars, ensemble }) = q.ensemble.blocks.get(block) else {
            return Err(Error::input("lookup tables cover pair blocks only"));
        };
        if nx < 2 || ny < 2 {
            return Err(Error::input("a lookup table needs at least 2 × 2 nodes"));
        }
        let span = |f: &dyn Fn(&crate::hierarchy::EnsembleEntry) -> MarginalSpec| {
            ensemble.entries.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
                let m = f(e);
                (lo.min(m.quantile(LOOKUP_TAIL)), hi.max(m.quantile(1.0 - LOOKUP_TAIL)))
            })
        };
        let (x0, x1) = span(&|e| e.marginals.first.spec);
        let (y0, y1) = span(&|e| e.marginals.second.spec);
        let xs = linspace(x0, x1, nx);
        let ys = linspace(y0, y1, ny);
        let mut pts = Vec::with_capacity(nx * ny);
        for &x in &xs {
            for &y in &ys {
                let mut p = vec![0.0; q.ensemble.dimension];
                p[vars[0]] = x;
                p[vars[1]] = y;
                pts.push(p);
            }
        }
        let ln_q = q.block_log_pdf_batch(block, &pts)?;
        Ok(Self {
            block,
            vars: *vars,
            xs,
            ys,
            ln_q,
        })
    }

    pub fn block(&self) -> usize {
        self.block
    }

    /// Interpolated ln q_b, or None outside the table.
    pub fn ln_pdf(&self, x: &[f64]) -> Option<f64> {
        let (a, b) = (x[self.vars[0]], x[self.vars[1]]);
        let locate = |g: &[f64], t: f64| -> Option<(usize, f64)> {
            if !(t >= g[0] && t <= g[g.len() - 1]) {
                return None;
            }
            let i = (g.partition_point(|&v| v <= t).max(1) - 1).min(g.len() - 2);
            Some((i, (t - g[i]) / (g[i + 1] - g[i])))
        };
        let (i, fx) = locate(&self.xs, a)?;
        let (j, fy) = locate(&self.ys, b)?;
        let ny = self.ys.len();
        let at = |i: usize, j: usize| self.ln_q[i * ny + j];
        Some(
            (1.0 - fx) * (1.0 - fy) * at(i, j)
                + fx * (1.0 - fy) * at(i + 1, j)
                + (1.0 - fx) * fy * at(i, j + 1)
                + fx * fy * at(i + 1, j + 1),
        )
    }

    /// Interpolated ln q_b, falling back to exact evaluation outside.
    pub fn ln_pdf_or_exact(&self, q: &OptimalDensity, x: &[f64]) -> f64 {
        self.ln_pdf(x).unwrap_or_else(|| q.block_log_pdf(self.block, x))
    }

    /// Largest |q_interp/q − 1| over `points` inside the table.
    pub fn max_relative_error(&self, q: &OptimalDensity, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .filter_map(|x| self.ln_pdf(x).map(|li| (li - q.block_log_pdf(self.block, x)).exp_m1().abs()))
            .fold(0.0, f64::max)
    }
}
