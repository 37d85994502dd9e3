//! Hierarchical multimodel construction of a joint-density ensemble:
//! marginal inference, marginal-pair draws, conditional copula inference per
//! pair, and assembly.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bayes::{
    infer_copulas, infer_models, Candidate, InferenceSettings, MarginalLikelihood, ModelPosterior, PriorSpec,
};
use crate::copula::{CopulaFamily, CopulaSpec, PseudoObs};
use crate::error::{Error, Result};
use crate::marginal::{moment_init, pseudo_observations, MarginalData, MarginalFamily, MarginalSpec};
use crate::rng::{derive_seed, open_unit, rng_from_seed};

/// Multimodel inference over marginal families for one data column.
///
/// `priors` holds an optional override per family (an empty slice means
/// all defaults). Positive-support families on data with nonpositive values
/// get zero evidence instead of an error.
pub fn infer_marginals(
    data: &[f64],
    families: &[MarginalFamily],
    priors: &[Option<PriorSpec>],
    settings: &InferenceSettings,
    seed: u64,
) -> Result<ModelPosterior<MarginalFamily>> {
    if data.len() < 3 {
        return Err(Error::input("marginal inference needs at least three data"));
    }
    if !priors.is_empty() && priors.len() != families.len() {
        return Err(Error::input("one prior slot per marginal candidate is required"));
    }
    let md = MarginalData::new(data)?;
    let positive = data.iter().all(|&x| x > 0.0);
    let mut candidates = Vec::with_capacity(families.len());
    for (j, &family) in families.iter().enumerate() {
        let feasible = positive || !family.positive_support();
        let prior = match priors.get(j).cloned().flatten() {
            Some(p) => p,
            None if feasible => crate::bayes::default_marginal_prior(family, data)?,
            None => PriorSpec::new(vec![(1.0, 2.0), (1.0, 2.0)])?,
        };
        let init = if feasible {
            prior.project(&moment_init(family, data)?.spec.params())
        } else {
            prior.project(&[1.5, 1.5])
        };
        candidates.push(Candidate {
            family,
            likelihood: Box::new(MarginalLikelihood { family, data: &md }),
            prior,
            init,
        });
    }
    infer_models(&candidates, settings, seed)
}

/// A concrete marginal with its provenance in the model posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalDraw {
    pub spec: MarginalSpec,
    /// Index of the candidate family.
    pub model: usize,
    /// Index into that candidate's stored chain.
    pub chain: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalPair {
    pub first: MarginalDraw,
    pub second: MarginalDraw,
}

impl MarginalPair {
    pub fn specs(&self) -> (&MarginalSpec, &MarginalSpec) {
        (&self.first.spec, &self.second.spec)
    }
}

/// Draw `n` (model, chain state) indices from a posterior.
///
/// Plain mode draws the model from the retained probabilities and the chain
/// index uniformly. Latin hypercube mode stratifies a uniform over [0, 1):
/// the stratum value picks the model through the cumulative probabilities
/// and the remaining fraction within that model's interval picks the chain
/// index.
pub fn draw_indices<F: Copy>(
    post: &ModelPosterior<F>,
    n: usize,
    lhs: bool,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    if n < 1 {
        return Err(Error::input("at least one draw is required"));
    }
    post.validate()?;
    let probs = post.retained_probs();
    let mut cum = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in &probs {
        acc += p;
        cum.push(acc);
    }
    let mut rng = rng_from_seed(seed);
    let strata: Vec<f64> = if lhs {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        perm.iter().map(|&k| (k as f64 + open_unit(&mut rng)) / n as f64).collect()
    } else {
        (0..n).map(|_| open_unit(&mut rng)).collect()
    };
    let last = post.retained_indices().last().copied().expect("validated");
    let mut out = Vec::with_capacity(n);
    for s in strata {
        let s = s * acc;
        let model = (0..probs.len())
            .find(|&j| probs[j] > 0.0 && s < cum[j])
            .unwrap_or(last);
        let len = post.param_samples[model].len();
        let chain = if lhs {
            let lo = cum[model] - probs[model];
            let frac = ((s - lo) / probs[model]).clamp(0.0, 1.0);
            ((frac * len as f64) as usize).min(len - 1)
        } else {
            rng.random_range(0..len)
        };
        out.push((model, chain));
    }
    Ok(out)
}

pub fn draw_marginals(
    post: &ModelPosterior<MarginalFamily>,
    n: usize,
    lhs: bool,
    seed: u64,
) -> Result<Vec<MarginalDraw>> {
    draw_indices(post, n, lhs, seed)?
        .into_iter()
        .map(|(model, chain)| {
            let spec = MarginalSpec::new(post.candidates[model], &post.param_samples[model][chain])?;
            Ok(MarginalDraw { spec, model, chain })
        })
        .collect()
}

/// `n_td` marginal pairs drawn independently for the two variables.
pub fn draw_marginal_pairs(
    post1: &ModelPosterior<MarginalFamily>,
    post2: &ModelPosterior<MarginalFamily>,
    n_td: usize,
    lhs: bool,
    seed: u64,
) -> Result<Vec<MarginalPair>> {
    let a = draw_marginals(post1, n_td, lhs, derive_seed(seed, 1))?;
    let b = draw_marginals(post2, n_td, lhs, derive_seed(seed, 2))?;
    Ok(a.into_iter()
        .zip(b)
        .map(|(first, second)| MarginalPair { first, second })
        .collect())
}

/// A concrete copula with provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaDraw {
    pub spec: CopulaSpec,
    pub model: usize,
    pub chain: usize,
}

/// Copula posterior conditioned on one marginal pair, plus `n_tc` draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalCopulaSet {
    pub candidates: Vec<CopulaFamily>,
    pub log_evidences: Vec<f64>,
    pub model_probs: Vec<f64>,
    /// Hex digest of the quantized pseudo-observations; empty for fixed copulas.
    pub data_key: String,
    pub draws: Vec<CopulaDraw>,
}

impl ConditionalCopulaSet {
    /// A set made of one fixed copula, used for non-inferred dependence.
    pub fn fixed(spec: CopulaSpec) -> Self {
        Self {
            candidates: vec![spec.family()],
            log_evidences: vec![0.0],
            model_probs: vec![1.0],
            data_key: String::new(),
            draws: vec![CopulaDraw {
                spec,
                model: 0,
                chain: 0,
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// (1/N_tc) Σ_k c_k(u, v).
    pub fn mean_density(&self, u: f64, v: f64) -> f64 {
        self.draws.iter().map(|d| d.spec.pdf(u, v)).sum::<f64>() / self.draws.len() as f64
    }
}

/// Copula inference results memoized on quantized pseudo-observations.
#[derive(Default)]
pub struct CopulaCache {
    map: Mutex<HashMap<[u8; 32], Arc<ModelPosterior<CopulaFamily>>>>,
    hits: Mutex<usize>,
}

impl CopulaCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> usize {
        *self.hits.lock().expect("cache lock")
    }
}

/// Grid on which pseudo-observations are quantized for the cache key.
pub const CACHE_GRID: f64 = 1e-6;

/// SHA-256 of the candidate list and the pseudo-observations rounded to
/// the cache grid.
pub fn pseudo_obs_key(pairs: &[(f64, f64)], families: &[CopulaFamily]) -> [u8; 32] {
    let mut h = Sha256::new();
    for f in families {
        h.update(f.name().as_bytes());
        h.update([0u8]);
    }
    h.update((pairs.len() as u64).to_le_bytes());
    for &(u, v) in pairs {
        h.update(((u / CACHE_GRID).round() as i64).to_le_bytes());
        h.update(((v / CACHE_GRID).round() as i64).to_le_bytes());
    }
    h.finalize().into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn key_seed(key: &[u8; 32], seed: u64) -> u64 {
    let mut w = [0u8; 8];
    w.copy_from_slice(&key[..8]);
    derive_seed(seed, u64::from_le_bytes(w))
}

/// Copula multimodel inference on the data standardized by one marginal
/// pair, followed by `n_tc` draws from the result.
///
/// The inference seed comes from the pseudo-observation key, so a cached
/// result equals a fresh one and results do not depend on evaluation order.
#[allow(clippy::too_many_arguments)]
pub fn infer_copula_conditional(
    pair: &MarginalPair,
    data: &[(f64, f64)],
    families: &[CopulaFamily],
    priors: Option<&[PriorSpec]>,
    settings: &InferenceSettings,
    n_tc: usize,
    seed: u64,
    draw_seed: u64,
    cache: Option<&CopulaCache>,
) -> Result<ConditionalCopulaSet> {
    if n_tc < 1 {
        return Err(Error::input("N_tc must be at least 1"));
    }
    if families.is_empty() {
        return Err(Error::input("no copula candidates"));
    }
    let po = pseudo_observations(pair.specs(), data)?;
    let key = pseudo_obs_key(&po, families);
    let cached = cache.and_then(|c| c.map.lock().expect("cache lock").get(&key).cloned());
    let post = match cached {
        Some(p) => {
            if let Some(c) = cache {
                *c.hits.lock().expect("cache lock") += 1;
            }
            p
        }
        None => {
            let obs = PseudoObs::new(&po)?;
            let p = Arc::new(infer_copulas(&obs, families, priors, settings, key_seed(&key, seed))?);
            if let Some(c) = cache {
                c.map.lock().expect("cache lock").insert(key, p.clone());
            }
            p
        }
    };
    let draws = draw_indices(&post, n_tc, false, draw_seed)?
        .into_iter()
        .map(|(model, chain)| {
            let spec = CopulaSpec::new(post.candidates[model], &post.param_samples[model][chain])?;
            Ok(CopulaDraw { spec, model, chain })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionalCopulaSet {
        candidates: post.candidates.clone(),
        log_evidences: post.log_evidences.clone(),
        model_probs: post.model_probs.clone(),
        data_key: hex(&key),
        draws,
    })
}

/// ln c(F1(x1), F2(x2)) + ln f1(x1) + ln f2(x2); −∞ outside the support.
pub fn joint_log_pdf(pair: &MarginalPair, copula: &CopulaSpec, x: (f64, f64)) -> f64 {
    let (m1, m2) = pair.specs();
    let l1 = m1.ln_pdf(x.0);
    let l2 = m2.ln_pdf(x.1);
    if !(l1 > f64::NEG_INFINITY && l2 > f64::NEG_INFINITY) {
        return f64::NEG_INFINITY;
    }
    copula.ln_pdf_clamped(m1.cdf(x.0), m2.cdf(x.1)) + l1 + l2
}

/// One marginal pair with its conditional copula draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEntry {
    pub marginals: MarginalPair,
    pub copulas: ConditionalCopulaSet,
}

/// N_td entries × N_tc copula draws of candidate bivariate joint densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointEnsemble {
    pub entries: Vec<EnsembleEntry>,
    pub n_tc: usize,
}

pub fn assemble_ensemble(pairs: Vec<MarginalPair>, sets: Vec<ConditionalCopulaSet>) -> Result<JointEnsemble> {
    if pairs.is_empty() {
        return Err(Error::input("empty ensemble"));
    }
    if pairs.len() != sets.len() {
        return Err(Error::input(format!(
            "{} marginal pairs but {} copula sets",
            pairs.len(),
            sets.len()
        )));
    }
    let n_tc = sets[0].len();
    if n_tc == 0 || sets.iter().any(|s| s.len() != n_tc) {
        return Err(Error::input("copula sets must all hold the same positive number of draws"));
    }
    Ok(JointEnsemble {
        entries: pairs
            .into_iter()
            .zip(sets)
            .map(|(marginals, copulas)| EnsembleEntry { marginals, copulas })
            .collect(),
        n_tc,
    })
}

impl JointEnsemble {
    pub fn n_td(&self) -> usize {
        self.entries.len()
    }

    pub fn n_candidates(&self) -> usize {
        self.entries.len() * self.n_tc
    }

    /// Candidate (l, k): marginal pair l with its k-th copula draw.
    pub fn candidate(&self, l: usize, k: usize) -> (&MarginalPair, &CopulaSpec) {
        let e = &self.entries[l];
        (&e.marginals, &e.copulas.draws[k].spec)
    }

    pub fn candidate_log_pdf(&self, l: usize, k: usize, x: (f64, f64)) -> f64 {
        let (pair, cop) = self.candidate(l, k);
        joint_log_pdf(pair, cop, x)
    }
}

/// How dependence within a pair block is represented.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceMode {
    /// Multimodel copula inference.
    Copula,
    /// Independence copula, no inference.
    Independence,
    /// Fixed Gaussian copula with the given correlation.
    GaussianRho(f64),
}

/// Settings for building one pair ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEnsembleSettings {
    pub marginal_candidates: [Vec<MarginalFamily>; 2],
    pub copula_candidates: Vec<CopulaFamily>,
    /// Optional prior override per marginal candidate of each variable.
    pub marginal_priors: [Vec<Option<PriorSpec>>; 2],
    /// Full copula prior list, or None for the defaults.
    pub copula_priors: Option<Vec<PriorSpec>>,
    pub marginal_settings: InferenceSettings,
    pub copula_settings: InferenceSettings,
    pub n_td: usize,
    pub n_tc: usize,
    pub lhs: bool,
    pub mode: DependenceMode,
}

/// Everything inferred for one dependent pair.
pub struct PairEnsembleResult {
    pub marginal_posteriors: [ModelPosterior<MarginalFamily>; 2],
    pub ensemble: JointEnsemble,
}

/// Steps 1–4 for one dependent pair of data columns.
pub fn build_pair_ensemble(
    data: &[(f64, f64)],
    cfg: &PairEnsembleSettings,
    seed: u64,
    cache: Option<&CopulaCache>,
) -> Result<PairEnsembleResult> {
    let col1: Vec<f64> = data.iter().map(|p| p.0).collect();
    let col2: Vec<f64> = data.iter().map(|p| p.1).collect();
    let post1 = infer_marginals(
        &col1,
        &cfg.marginal_candidates[0],
        &cfg.marginal_priors[0],
        &cfg.marginal_settings,
        derive_seed(seed, 11),
    )
    .map_err(|e| e.in_stage("marginal inference"))?;
    let post2 = infer_marginals(
        &col2,
        &cfg.marginal_candidates[1],
        &cfg.marginal_priors[1],
        &cfg.marginal_settings,
        derive_seed(seed, 12),
    )
    .map_err(|e| e.in_stage("marginal inference"))?;
    let pairs = draw_marginal_pairs(&post1, &post2, cfg.n_td, cfg.lhs, derive_seed(seed, 13))?;
    let sets: Vec<ConditionalCopulaSet> = match cfg.mode {
        DependenceMode::Independence => vec![ConditionalCopulaSet::fixed(CopulaSpec::Independence); pairs.len()],
        DependenceMode::GaussianRho(rho) => {
            let spec = CopulaSpec::new(CopulaFamily::Gaussian, &[rho])?;
            vec![ConditionalCopulaSet::fixed(spec); pairs.len()]
        }
        DependenceMode::Copula => pairs
            .par_iter()
            .enumerate()
            .map(|(l, pair)| {
                infer_copula_conditional(
                    pair,
                    data,
                    &cfg.copula_candidates,
                    cfg.copula_priors.as_deref(),
                    &cfg.copula_settings,
                    cfg.n_tc,
                    derive_seed(seed, 14),
                    derive_seed(derive_seed(seed, 15), l as u64),
                    cache,
                )
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage("copula inference"))?,
    };
    let ensemble = assemble_ensemble(pairs, sets)?;
    Ok(PairEnsembleResult {
        marginal_posteriors: [post1, post2],
        ensemble,
    })
}
