use impcop_core::bayes::{InferenceSettings, McmcConfig};
use impcop_core::copula::{CopulaFamily, CopulaSpec};
use impcop_core::marginal::{MarginalFamily, MarginalSpec};
use impcop_core::models::{CallCounter, Linear};
use impcop_core::pipeline::{
    band_grid, infer_stage, propagate_stage, simulate_truth, Dataset, MarginalCandidates, RunConfig, TruthBlock,
    TruthSpec,
};
use impcop_core::propagation::{cdf_band, BandOptions, BlockEnsemble};
use impcop_core::Error;

fn settings() -> InferenceSettings {
    InferenceSettings {
        evidence_samples: 2000,
        threshold: 1e-3,
        mcmc: McmcConfig {
            chain_length: 2500,
            burn_in: 500,
            thinning: 2,
            ..Default::default()
        },
    }
}

fn config(y_families: Option<Vec<MarginalFamily>>) -> RunConfig {
    let mut cfg = RunConfig::from_json(r#"{"blocks": [{"pair": ["x", "y"]}]}"#).unwrap();
    cfg.marginal_candidates = vec![MarginalFamily::Gaussian, MarginalFamily::Gamma];
    if let Some(f) = y_families {
        cfg.marginal_candidates_by_variable = vec![MarginalCandidates {
            variable: "y".into(),
            families: f,
        }];
    }
    cfg.copula_candidates = vec![CopulaFamily::Frank, CopulaFamily::Gaussian, CopulaFamily::Clayton];
    cfg.marginal_inference = settings();
    cfg.copula_inference = settings();
    cfg.n_td = 12;
    cfg.n_tc = 6;
    cfg.propagation_samples = 4000;
    cfg.seed = 17;
    cfg
}

fn data(n: usize) -> Dataset {
    let truth = TruthSpec {
        variables: vec!["x".into(), "y".into()],
        blocks: vec![TruthBlock::Pair {
            vars: ["x".into(), "y".into()],
            marginals: [
                MarginalSpec::Gaussian { mu: 5.0, sigma: 1.0 },
                MarginalSpec::Gamma { shape: 9.0, scale: 0.25 },
            ],
            copula: CopulaSpec::Frank { theta: 3.0 },
        }],
    };
    simulate_truth(&truth, n, 99).unwrap()
}

fn first(d: &Dataset, n: usize) -> Dataset {
    Dataset::new(d.names.clone(), d.rows[..n].to_vec()).unwrap()
}

fn ensemble(cfg: &RunConfig, d: &Dataset) -> BlockEnsemble {
    infer_stage(cfg, d).unwrap().ensemble.unwrap()
}

#[test]
fn more_data_narrows_the_band_without_model_calls() {
    let cfg = config(None);
    let all = data(500);
    let ens50 = ensemble(&cfg, &first(&all, 50));
    let g = CallCounter::new(Linear { a: 1.0, b: 2.0 });
    let (run, band50) = propagate_stage(&cfg, &ens50, &g, None).unwrap();
    assert_eq!(g.calls(), 4000);

    let ens500 = ensemble(&cfg, &all);
    let band500 = cdf_band(&run, &ens500, &band50.grid, BandOptions::default()).unwrap();
    assert_eq!(g.calls(), 4000);
    assert!(
        band500.mean_width() < band50.mean_width(),
        "{} vs {}",
        band500.mean_width(),
        band50.mean_width()
    );
    assert!(band500.lower.iter().zip(&band500.upper).all(|(a, b)| a <= b));
}

#[test]
fn reweighting_outside_the_sampled_support_is_refused() {
    let d = data(60);
    let positive = config(Some(vec![MarginalFamily::Gamma]));
    let real = config(Some(vec![MarginalFamily::Gaussian]));
    let g = Linear { a: 1.0, b: 1.0 };
    let (run, _) = propagate_stage(&positive, &ensemble(&positive, &d), &g, None).unwrap();
    let grid = band_grid(&positive.grid, &run.outputs);
    match cdf_band(&run, &ensemble(&real, &d), &grid, BandOptions::default()) {
        Err(Error::Support(msg)) => assert!(msg.starts_with("variable 1:"), "{msg}"),
        other => panic!("expected a support error, got {:?}", other.map(|b| b.n_candidates)),
    }

    // the converse direction is absolutely continuous and allowed
    let (run, _) = propagate_stage(&real, &ensemble(&real, &d), &g, None).unwrap();
    assert!(cdf_band(&run, &ensemble(&positive, &d), &grid, BandOptions::default()).is_ok());
}
