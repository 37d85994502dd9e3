use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bayes::{default_copula_prior, InferenceSettings, PriorSpec};
use crate::copula::CopulaFamily;
use crate::error::{Error, Result};
use crate::hierarchy::DependenceMode;
use crate::marginal::MarginalFamily;
use crate::models::ModelConfig;

use super::truth::TruthSpec;

/// Version of the configuration schema.
pub const CONFIG_VERSION: u32 = 1;

/// A group of variables treated as independent of all others.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockConfig {
    Pair([String; 2]),
    Single(String),
}

impl BlockConfig {
    pub fn variables(&self) -> Vec<&str> {
        match self {
            BlockConfig::Pair([a, b]) => vec![a, b],
            BlockConfig::Single(a) => vec![a],
        }
    }

    /// "a-b" for pairs, the variable name for singles.
    pub fn label(&self) -> String {
        self.variables().join("-")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalCandidates {
    pub variable: String,
    pub families: Vec<MarginalFamily>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalPrior {
    pub variable: String,
    pub family: MarginalFamily,
    pub prior: PriorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopulaPrior {
    pub family: CopulaFamily,
    pub prior: PriorSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorsConfig {
    pub marginal: Vec<MarginalPrior>,
    pub copula: Vec<CopulaPrior>,
}

/// Evaluation grid for CDF bands. Without a range the grid spans the
/// 0.5% to 99.5% quantiles of the run outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub points: usize,
    pub range: Option<[f64; 2]>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { points: 50, range: None }
    }
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

fn default_marginals() -> Vec<MarginalFamily> {
    MarginalFamily::ALL.to_vec()
}

fn default_copulas() -> Vec<CopulaFamily> {
    vec![
        CopulaFamily::Gaussian,
        CopulaFamily::StudentT,
        CopulaFamily::Clayton,
        CopulaFamily::Gumbel,
        CopulaFamily::Frank,
    ]
}

fn default_n_td() -> usize {
    1000
}

fn default_n_tc() -> usize {
    500
}

fn default_samples() -> usize {
    5000
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Everything one pipeline run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    /// Input CSV with a header row.
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Model input order; defaults to the variables in block order.
    #[serde(default)]
    pub variables: Vec<String>,
    pub blocks: Vec<BlockConfig>,
    #[serde(default = "default_marginals")]
    pub marginal_candidates: Vec<MarginalFamily>,
    /// Per-variable overrides of `marginal_candidates`.
    #[serde(default)]
    pub marginal_candidates_by_variable: Vec<MarginalCandidates>,
    #[serde(default = "default_copulas")]
    pub copula_candidates: Vec<CopulaFamily>,
    #[serde(default)]
    pub priors: PriorsConfig,
    #[serde(default)]
    pub marginal_inference: InferenceSettings,
    #[serde(default)]
    pub copula_inference: InferenceSettings,
    #[serde(default = "default_n_td")]
    pub n_td: usize,
    #[serde(default = "default_n_tc")]
    pub n_tc: usize,
    /// Latin hypercube draws of marginal pairs instead of simple random draws.
    #[serde(default)]
    pub lhs: bool,
    #[serde(default = "default_samples")]
    pub propagation_samples: usize,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default = "default_dependence")]
    pub dependence: DependenceMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub grid: GridConfig,
    /// Write every candidate CDF, not only the envelope.
    #[serde(default)]
    pub keep_members: bool,
    /// Data already lie on the unit square: infer copulas only.
    #[serde(default)]
    pub unit_square: bool,
    /// Data-generating process for `simulate` and recovery studies.
    #[serde(default)]
    pub truth: Option<TruthSpec>,
}

fn default_dependence() -> DependenceMode {
    DependenceMode::Copula
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Model input order.
    pub fn variable_order(&self) -> Vec<String> {
        if self.variables.is_empty() {
            self.blocks
                .iter()
                .flat_map(|b| b.variables().into_iter().map(String::from))
                .collect()
        } else {
            self.variables.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::input(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.blocks.is_empty() {
            return Err(Error::input("at least one block is required"));
        }
        let order = self.variable_order();
        let mut in_blocks: Vec<&str> = self.blocks.iter().flat_map(|b| b.variables()).collect();
        in_blocks.sort_unstable();
        let mut sorted: Vec<&str> = order.iter().map(String::as_str).collect();
        sorted.sort_unstable();
        if in_blocks.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::input("a variable appears in more than one block"));
        }
        if in_blocks != sorted {
            return Err(Error::input("`variables` must list exactly the variables of the blocks"));
        }
        if let Some(BlockConfig::Pair([a, b])) = self.blocks.iter().find(|b| matches!(b, BlockConfig::Pair([a, b]) if a == b)) {
            return Err(Error::input(format!("pair block ({a}, {b}) repeats a variable")));
        }
        for (what, n) in [
            ("n_td", self.n_td),
            ("n_tc", self.n_tc),
            ("propagation_samples", self.propagation_samples),
            ("grid.points", self.grid.points),
            ("marginal_inference.evidence_samples", self.marginal_inference.evidence_samples),
            ("copula_inference.evidence_samples", self.copula_inference.evidence_samples),
        ] {
            if n == 0 {
                return Err(Error::input(format!("{what} must be positive")));
            }
        }
        self.marginal_inference.mcmc.validate()?;
        self.copula_inference.mcmc.validate()?;
        if let Some([lo, hi]) = self.grid.range {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::input("grid range must be finite and increasing"));
            }
        }
        if self.marginal_candidates.is_empty() || self.copula_candidates.is_empty() {
            return Err(Error::input("candidate lists must be nonempty"));
        }
        for mc in &self.marginal_candidates_by_variable {
            if !order.contains(&mc.variable) {
                return Err(Error::input(format!("unknown variable `{}`", mc.variable)));
            }
            if mc.families.is_empty() {
                return Err(Error::input(format!("no marginal candidates for `{}`", mc.variable)));
            }
        }
        for p in &self.priors.marginal {
            if !order.contains(&p.variable) {
                return Err(Error::input(format!("prior for unknown variable `{}`", p.variable)));
            }
            p.prior.validate()?;
        }
        for p in &self.priors.copula {
            p.prior.validate()?;
        }
        if let DependenceMode::GaussianRho(rho) = self.dependence {
            if !(rho.abs() < 1.0) {
                return Err(Error::input(format!("gaussian_rho {rho} outside (-1, 1)")));
            }
        }
        if self.unit_square && self.blocks.iter().any(|b| matches!(b, BlockConfig::Single(_))) {
            return Err(Error::input("unit-square mode takes pair blocks only"));
        }
        Ok(())
    }

    pub fn marginal_families(&self, var: &str) -> Vec<MarginalFamily> {
        self.marginal_candidates_by_variable
            .iter()
            .find(|m| m.variable == var)
            .map(|m| m.families.clone())
            .unwrap_or_else(|| self.marginal_candidates.clone())
    }

    /// Configured prior or None for each marginal candidate of `var`.
    pub fn marginal_priors(&self, var: &str) -> Vec<Option<PriorSpec>> {
        self.marginal_families(var)
            .iter()
            .map(|&f| {
                self.priors
                    .marginal
                    .iter()
                    .find(|p| p.variable == var && p.family == f)
                    .map(|p| p.prior.clone())
            })
            .collect()
    }

    /// Configured or default prior for each copula candidate.
    pub fn copula_priors(&self) -> Vec<PriorSpec> {
        self.copula_candidates
            .iter()
            .map(|&f| {
                self.priors
                    .copula
                    .iter()
                    .find(|p| p.family == f)
                    .map(|p| p.prior.clone())
                    .unwrap_or_else(|| default_copula_prior(f))
            })
            .collect()
    }
}
