//! Config-driven orchestration: ingest, inference, ensemble assembly,
//! propagation, reweighting and artifact emission.

mod config;
mod io;
mod truth;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{
    BlockConfig, CopulaPrior, GridConfig, MarginalCandidates, MarginalPrior, PriorsConfig, RunConfig, CONFIG_VERSION,
};
pub use io::{
    copula_param_names, file_sha256, fmt_f64, marginal_param_names, read_band, read_csv, read_json, read_model_probs,
    read_run, sanitize, write_band, write_chain, write_csv, write_json, write_model_probs, write_run, Dataset,
    ModelProbRow, RunMeta, RUN_META, RUN_SAMPLES,
};
pub use truth::{simulate_truth, TruthBlock, TruthSpec};

use crate::bayes::{infer_copulas, InferenceSettings, ModelPosterior};
use crate::copula::{CopulaFamily, PseudoObs};
use crate::error::{Error, Result};
use crate::hierarchy::{
    build_pair_ensemble, draw_marginals, infer_marginals, CopulaCache, DependenceMode, PairEnsembleSettings,
};
use crate::marginal::MarginalFamily;
use crate::models::PerformanceFunction;
use crate::propagation::{
    cdf_band, linspace, optimal_density, simulate, BandOptions, Block, BlockEnsemble, CdfBand, WeightedRun,
};
use crate::rng::derive_seed;

pub const MODEL_PROBS: &str = "model_probs.csv";
pub const ENSEMBLE: &str = "ensemble.json";
pub const CDF_BAND: &str = "cdf_band.csv";
pub const MANIFEST: &str = "manifest.json";

/// Seed of block `b`'s inference.
pub fn block_seed(seed: u64, b: usize) -> u64 {
    derive_seed(seed, 1000 + b as u64)
}

/// Seed of the propagation run.
pub fn propagation_seed(seed: u64) -> u64 {
    derive_seed(seed, 1)
}

/// Results of the inference stages.
pub struct InferenceOutput {
    pub variables: Vec<String>,
    pub marginal_posteriors: Vec<(String, ModelPosterior<MarginalFamily>)>,
    /// Copula posteriors of unit-square data, keyed by block label.
    pub copula_posteriors: Vec<(String, ModelPosterior<CopulaFamily>)>,
    /// Absent in unit-square mode.
    pub ensemble: Option<BlockEnsemble>,
    pub model_probs: Vec<ModelProbRow>,
}

fn family_name<F: std::fmt::Debug>(f: F) -> String {
    format!("{f:?}")
}

/// Steps 1–4: marginal and copula inference per block and ensemble
/// assembly.
pub fn infer_stage(cfg: &RunConfig, data: &Dataset) -> Result<InferenceOutput> {
    cfg.validate()?;
    let variables = cfg.variable_order();
    for v in &variables {
        data.index(v)?;
    }
    if data.len() < 3 {
        return Err(Error::input("at least three observations are required"));
    }
    let var_idx = |name: &str| variables.iter().position(|v| v == name).expect("validated");
    let mut out = InferenceOutput {
        variables: variables.clone(),
        marginal_posteriors: vec![],
        copula_posteriors: vec![],
        ensemble: None,
        model_probs: vec![],
    };
    if cfg.unit_square {
        for (b, block) in cfg.blocks.iter().enumerate() {
            let BlockConfig::Pair([x, y]) = block else { unreachable!("validated") };
            let pairs = data.pairs(x, y)?;
            if pairs.iter().any(|&(u, v)| !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0)) {
                return Err(Error::input(format!("unit-square data for {} leave (0, 1)", block.label())));
            }
            let obs = PseudoObs::new(&pairs)?;
            let post = infer_copulas(
                &obs,
                &cfg.copula_candidates,
                Some(&cfg.copula_priors()),
                &cfg.copula_inference,
                block_seed(cfg.seed, b),
            )
            .map_err(|e| e.in_stage("copula inference"))?;
            let target = format!("copula:{}", block.label());
            out.model_probs.extend(io::posterior_rows(&target, None, &post, family_name));
            out.copula_posteriors.push((block.label(), post));
        }
        return Ok(out);
    }
    let cache = CopulaCache::new();
    let mut blocks = Vec::with_capacity(cfg.blocks.len());
    for (b, block) in cfg.blocks.iter().enumerate() {
        let seed = block_seed(cfg.seed, b);
        match block {
            BlockConfig::Pair([x, y]) => {
                let settings = PairEnsembleSettings {
                    marginal_candidates: [cfg.marginal_families(x), cfg.marginal_families(y)],
                    copula_candidates: cfg.copula_candidates.clone(),
                    marginal_priors: [cfg.marginal_priors(x), cfg.marginal_priors(y)],
                    copula_priors: Some(cfg.copula_priors()),
                    marginal_settings: cfg.marginal_inference.clone(),
                    copula_settings: cfg.copula_inference.clone(),
                    n_td: cfg.n_td,
                    n_tc: cfg.n_tc,
                    lhs: cfg.lhs,
                    mode: cfg.dependence,
                };
                let res = build_pair_ensemble(&data.pairs(x, y)?, &settings, seed, Some(&cache))?;
                let [p1, p2] = res.marginal_posteriors;
                out.model_probs.extend(io::posterior_rows(x, None, &p1, family_name));
                out.model_probs.extend(io::posterior_rows(y, None, &p2, family_name));
                if cfg.dependence == DependenceMode::Copula {
                    let target = format!("copula:{}", block.label());
                    for (l, e) in res.ensemble.entries.iter().enumerate() {
                        for ((f, le), p) in e.copulas.candidates.iter().zip(&e.copulas.log_evidences).zip(&e.copulas.model_probs) {
                            out.model_probs.push(ModelProbRow {
                                target: target.clone(),
                                entry: Some(l),
                                model: family_name(f),
                                log_evidence: *le,
                                probability: *p,
                            });
                        }
                    }
                }
                out.marginal_posteriors.push((x.clone(), p1));
                out.marginal_posteriors.push((y.clone(), p2));
                blocks.push(Block::Pair {
                    vars: [var_idx(x), var_idx(y)],
                    ensemble: res.ensemble,
                });
            }
            BlockConfig::Single(x) => {
                let post = infer_marginals(
                    &data.column(x)?,
                    &cfg.marginal_families(x),
                    &cfg.marginal_priors(x),
                    &cfg.marginal_inference,
                    derive_seed(seed, 11),
                )
                .map_err(|e| e.in_stage("marginal inference"))?;
                let draws = draw_marginals(&post, cfg.n_td, cfg.lhs, derive_seed(seed, 13))?;
                out.model_probs.extend(io::posterior_rows(x, None, &post, family_name));
                out.marginal_posteriors.push((x.clone(), post));
                blocks.push(Block::Single { var: var_idx(x), draws });
            }
        }
    }
    log::info!("copula cache: {} inferences, {} reuses", cache.len(), cache.hits());
    out.ensemble = Some(BlockEnsemble::new(blocks)?);
    Ok(out)
}

/// Evaluation grid from the configuration or the run outputs.
pub fn band_grid(grid: &GridConfig, outputs: &[f64]) -> Vec<f64> {
    if let Some([lo, hi]) = grid.range {
        return linspace(lo, hi, grid.points);
    }
    let mut s = outputs.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let at = |p: f64| s[((p * (s.len() - 1) as f64).round() as usize).min(s.len() - 1)];
    linspace(at(0.005), at(0.995), grid.points)
}

/// Steps 5–6: sample q*, evaluate the model once per sample and build the
/// CDF band of the output.
pub fn propagate_stage(
    cfg: &RunConfig,
    ensemble: &BlockEnsemble,
    g: &dyn PerformanceFunction,
    grid: Option<&[f64]>,
) -> Result<(WeightedRun, CdfBand)> {
    let q = optimal_density(ensemble.clone());
    let run = simulate(&q, g, cfg.propagation_samples, propagation_seed(cfg.seed)).map_err(|e| e.in_stage("propagation"))?;
    let grid = grid.map(<[f64]>::to_vec).unwrap_or_else(|| band_grid(&cfg.grid, &run.outputs));
    let band = cdf_band(
        &run,
        ensemble,
        &grid,
        BandOptions {
            keep_members: cfg.keep_members,
            ..Default::default()
        },
    )
    .map_err(|e| e.in_stage("reweighting"))?;
    Ok((run, band))
}

/// Provenance record of one invocation's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Option<RunConfig>,
    pub seeds: BTreeMap<String, u64>,
    /// SHA-256 of each input file.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of each output file, keyed by file name.
    pub outputs: BTreeMap<String, String>,
    pub counts: BTreeMap<String, usize>,
}

impl Manifest {
    pub fn new(command: &str, config: Option<RunConfig>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            counts: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), file_sha256(path)?);
        Ok(())
    }

    pub fn add_outputs(&mut self, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            self.outputs.insert(name, file_sha256(p)?);
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let p = dir.join(MANIFEST);
        write_json(&p, self)?;
        Ok(p)
    }
}

/// Files written by the inference stages.
pub fn write_inference(dir: &Path, inf: &InferenceOutput) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = vec![dir.join(MODEL_PROBS)];
    write_model_probs(&files[0], &inf.model_probs)?;
    for (var, post) in &inf.marginal_posteriors {
        for j in post.retained_indices() {
            let f = post.candidates[j];
            let p = dir.join(format!("posterior_{}_{}.csv", sanitize(var), family_name(f)));
            write_chain(&p, &marginal_param_names(f), &post.param_samples[j])?;
            files.push(p);
        }
    }
    for (label, post) in &inf.copula_posteriors {
        for j in post.retained_indices() {
            let f = post.candidates[j];
            let p = dir.join(format!("posterior_{}_{}.csv", sanitize(label), family_name(f)));
            write_chain(&p, copula_param_names(f), &post.param_samples[j])?;
            files.push(p);
        }
    }
    if let Some(e) = &inf.ensemble {
        let p = dir.join(ENSEMBLE);
        write_json(&p, e)?;
        files.push(p);
    }
    Ok(files)
}

fn load_data(cfg: &RunConfig, override_path: Option<&Path>) -> Result<(PathBuf, Dataset)> {
    let path = override_path
        .map(Path::to_path_buf)
        .or_else(|| cfg.data.clone())
        .ok_or_else(|| Error::input("no input data path given"))?;
    let data = read_csv(&path).map_err(|e| e.in_stage("ingest"))?;
    Ok((path, data))
}

fn seeds_of(cfg: &RunConfig) -> BTreeMap<String, u64> {
    let mut s = BTreeMap::new();
    s.insert("master".into(), cfg.seed);
    for (b, block) in cfg.blocks.iter().enumerate() {
        s.insert(format!("block:{}", block.label()), block_seed(cfg.seed, b));
    }
    s.insert("propagation".into(), propagation_seed(cfg.seed));
    s
}

/// Inference only: model probabilities, posterior chains and the ensemble.
pub fn run_infer(cfg: &RunConfig) -> Result<PathBuf> {
    let (path, data) = load_data(cfg, None)?;
    let inf = infer_stage(cfg, &data)?;
    let dir = cfg.output_dir.clone();
    let files = write_inference(&dir, &inf)?;
    let mut m = Manifest::new("infer", Some(cfg.clone()));
    m.seeds = seeds_of(cfg);
    m.add_input(&path)?;
    m.add_outputs(&files)?;
    m.counts.insert("observations".into(), data.len());
    if let Some(e) = &inf.ensemble {
        m.counts.insert("candidates".into(), e.n_candidates());
    }
    m.write(&dir)?;
    Ok(dir)
}

/// The full pipeline: inference, one propagation run and the CDF band.
pub fn run_pipeline(cfg: &RunConfig, g: &dyn PerformanceFunction) -> Result<PathBuf> {
    if cfg.unit_square {
        return Err(Error::input("unit-square mode has no propagation stage"));
    }
    let (path, data) = load_data(cfg, None)?;
    let inf = infer_stage(cfg, &data)?;
    let ens = inf.ensemble.as_ref().expect("ensemble outside unit-square mode");
    if g.dimension() != ens.dimension() {
        return Err(Error::input(format!(
            "model takes {} inputs but {} variables are configured",
            g.dimension(),
            ens.dimension()
        )));
    }
    let (run, band) = propagate_stage(cfg, ens, g, None)?;
    let dir = cfg.output_dir.clone();
    let mut files = write_inference(&dir, &inf)?;
    files.extend(write_run(&dir, &run, &inf.variables, run.len())?);
    let band_path = dir.join(CDF_BAND);
    write_band(&band_path, &band, ens.n_tc())?;
    files.push(band_path);
    let mut m = Manifest::new("propagate", Some(cfg.clone()));
    m.seeds = seeds_of(cfg);
    m.add_input(&path)?;
    m.add_outputs(&files)?;
    m.counts.insert("observations".into(), data.len());
    m.counts.insert("candidates".into(), ens.n_candidates());
    m.counts.insert("model_evaluations".into(), run.len());
    m.write(&dir)?;
    Ok(dir)
}

/// Reweight a stored run to a new ensemble without evaluating the model.
pub fn reweight_only(run_dir: &Path, ensemble: &BlockEnsemble, grid: &[f64], opts: BandOptions) -> Result<CdfBand> {
    let (run, _) = read_run(run_dir)?;
    cdf_band(&run, ensemble, grid, opts)
}

/// `reweight` command: band for the ensemble at `ensemble_path` from the
/// run in `run_dir`, written to `out_dir`. The grid is that of the run's
/// own band when present.
pub fn run_reweight(run_dir: &Path, ensemble_path: &Path, out_dir: &Path, grid: &GridConfig, keep_members: bool) -> Result<CdfBand> {
    let ensemble: BlockEnsemble = read_json(ensemble_path).map_err(|e| e.in_stage("load ensemble"))?;
    let (run, meta) = read_run(run_dir).map_err(|e| e.in_stage("load run"))?;
    let old_band = run_dir.join(CDF_BAND);
    let grid_pts = if grid.range.is_none() && old_band.exists() {
        read_band(&old_band)?.0
    } else {
        band_grid(grid, &run.outputs)
    };
    let band = cdf_band(
        &run,
        &ensemble,
        &grid_pts,
        BandOptions {
            keep_members,
            ..Default::default()
        },
    )
    .map_err(|e| e.in_stage("reweighting"))?;
    std::fs::create_dir_all(out_dir)?;
    let band_path = out_dir.join(CDF_BAND);
    write_band(&band_path, &band, ensemble.n_tc())?;
    let mut m = Manifest::new("reweight", None);
    m.add_input(&run_dir.join(RUN_SAMPLES))?;
    m.add_input(&run_dir.join(RUN_META))?;
    m.add_input(ensemble_path)?;
    m.add_outputs(&[band_path])?;
    m.seeds.insert("run".into(), meta.seed);
    m.counts.insert("candidates".into(), ensemble.n_candidates());
    m.counts.insert("model_evaluations".into(), 0);
    m.write(out_dir)?;
    Ok(band)
}

/// `simulate` command: synthetic data from the configured truth.
pub fn run_simulate(truth: &TruthSpec, n: usize, seed: u64, out: &Path) -> Result<Dataset> {
    let d = simulate_truth(truth, n, seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_csv(out, &d)?;
    Ok(d)
}

/// One replicate of a copula recovery study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub n: usize,
    pub replicate: usize,
    pub model: String,
    pub probability: f64,
    /// Posterior median and central 95% interval of the first parameter;
    /// NaN for dropped models.
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Empirical quantile with linear interpolation.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = p * (sorted.len() - 1) as f64;
    let (i, f) = (h.floor() as usize, h - h.floor());
    if i + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[i] + f * (sorted[i + 1] - sorted[i])
    }
}

/// Copula model probabilities versus data size: for each n and replicate,
/// simulate unit-square data from `truth` and run copula inference.
pub fn recovery_study(
    truth: &TruthSpec,
    families: &[CopulaFamily],
    settings: &InferenceSettings,
    sizes: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<Vec<RecoveryRow>> {
    let [TruthBlock::UnitPair { vars, .. }] = truth.blocks.as_slice() else {
        return Err(Error::input("recovery studies take a single unit-square pair truth"));
    };
    let mut rows = Vec::new();
    for &n in sizes {
        for r in 0..replicates {
            let s = derive_seed(derive_seed(seed, n as u64), r as u64);
            let data = simulate_truth(truth, n, s)?;
            let obs = PseudoObs::new(&data.pairs(&vars[0], &vars[1])?)?;
            let post = infer_copulas(&obs, families, None, settings, derive_seed(s, 1))?;
            for (j, &f) in post.candidates.iter().enumerate() {
                let mut first: Vec<f64> = post.param_samples[j].iter().filter_map(|p| p.first().copied()).collect();
                first.sort_by(|a, b| a.total_cmp(b));
                rows.push(RecoveryRow {
                    n,
                    replicate: r,
                    model: family_name(f),
                    probability: post.model_probs[j],
                    median: quantile(&first, 0.5),
                    lower: quantile(&first, 0.025),
                    upper: quantile(&first, 0.975),
                });
            }
        }
    }
    Ok(rows)
}

/// Median over replicates of each (n, model) probability.
pub fn recovery_medians(rows: &[RecoveryRow]) -> Vec<(usize, String, f64)> {
    let mut groups: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.n, r.model.clone())).or_default().push(r.probability);
    }
    groups
        .into_iter()
        .map(|((n, m), mut v)| {
            v.sort_by(|a, b| a.total_cmp(b));
            (n, m, quantile(&v, 0.5))
        })
        .collect()
}

pub fn write_recovery(dir: &Path, rows: &[RecoveryRow]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let p = dir.join("recovery.csv");
    let mut w = csv::Writer::from_path(&p)?;
    w.write_record(["n", "replicate", "model", "probability", "median", "lower", "upper"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.replicate.to_string(),
            r.model.clone(),
            fmt_f64(r.probability),
            fmt_f64(r.median),
            fmt_f64(r.lower),
            fmt_f64(r.upper),
        ])?;
    }
    w.flush()?;
    let q = dir.join("recovery_summary.csv");
    let mut w = csv::Writer::from_path(&q)?;
    w.write_record(["n", "model", "median_probability"])?;
    for (n, m, p) in recovery_medians(rows) {
        w.write_record([n.to_string(), m, fmt_f64(p)])?;
    }
    w.flush()?;
    Ok(vec![p, q])
}

/// Text summary of an output directory, with manifest hash checks.
pub fn report(dir: &Path) -> Result<String> {
    use std::fmt::Write as _;
    let mut s = String::new();
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    writeln!(s, "{} {} ({})", manifest.tool, manifest.version, manifest.command).ok();
    let mut bad = vec![];
    for (name, hash) in &manifest.outputs {
        match file_sha256(&dir.join(name)) {
            Ok(h) if &h == hash => {}
            _ => bad.push(name.clone()),
        }
    }
    if bad.is_empty() {
        writeln!(s, "outputs: {} files, hashes verified", manifest.outputs.len()).ok();
    } else {
        writeln!(s, "outputs: hash mismatch or missing: {}", bad.join(", ")).ok();
    }
    for (k, v) in &manifest.counts {
        writeln!(s, "{k}: {v}").ok();
    }
    let probs = dir.join(MODEL_PROBS);
    if probs.exists() {
        let rows = read_model_probs(&probs)?;
        let mut agg: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
        for r in &rows {
            let e = agg.entry((r.target.clone(), r.model.clone())).or_insert((0.0, 0));
            e.0 += r.probability;
            e.1 += 1;
        }
        writeln!(s, "model probabilities (mean over ensemble entries for copulas):").ok();
        for ((t, m), (p, c)) in agg {
            writeln!(s, "  {t:<24} {m:<12} {:.4}", p / c as f64).ok();
        }
    }
    let band = dir.join(CDF_BAND);
    if band.exists() {
        let (g, lo, hi) = read_band(&band)?;
        let w = lo.iter().zip(&hi).map(|(a, b)| b - a).sum::<f64>() / g.len() as f64;
        writeln!(s, "cdf band: {} grid points on [{}, {}], mean width {w:.4}", g.len(), g[0], g[g.len() - 1]).ok();
    }
    Ok(s)
}
