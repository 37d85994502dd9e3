//! Synthetic fixtures shared by the benchmarks.

use impcop_core::copula::{CopulaFamily, CopulaSpec};
use impcop_core::hierarchy::{assemble_ensemble, ConditionalCopulaSet, CopulaDraw, MarginalDraw, MarginalPair};
use impcop_core::marginal::MarginalSpec;
use impcop_core::propagation::BlockEnsemble;

/// A pair ensemble of `n_td` Gaussian marginal pairs, each with `n_tc`
/// Frank copulas, with parameters spread deterministically around a center.
pub fn synthetic_ensemble(n_td: usize, n_tc: usize) -> BlockEnsemble {
    let spread = |i: usize, n: usize| (i as f64 + 0.5) / n as f64 - 0.5;
    let mut pairs = Vec::with_capacity(n_td);
    let mut sets = Vec::with_capacity(n_td);
    for l in 0..n_td {
        let s = spread(l, n_td);
        let draw = |mu: f64, sigma: f64| MarginalDraw {
            spec: MarginalSpec::Gaussian {
                mu: mu + 0.1 * s,
                sigma: sigma * (1.0 + 0.1 * s),
            },
            model: 0,
            chain: l,
        };
        pairs.push(MarginalPair {
            first: draw(1.0, 0.3),
            second: draw(-2.0, 0.5),
        });
        let draws = (0..n_tc)
            .map(|k| CopulaDraw {
                spec: CopulaSpec::Frank {
                    theta: 3.0 + spread(k, n_tc) + 0.5 * s,
                },
                model: 0,
                chain: k,
            })
            .collect();
        sets.push(ConditionalCopulaSet {
            candidates: vec![CopulaFamily::Frank],
            log_evidences: vec![0.0],
            model_probs: vec![1.0],
            data_key: String::new(),
            draws,
        });
    }
    BlockEnsemble::pair(assemble_ensemble(pairs, sets).expect("consistent fixture")).expect("valid ensemble")
}
