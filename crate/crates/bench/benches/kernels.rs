use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use impcop_bench::synthetic_ensemble;
use impcop_core::bayes::{infer_copulas, InferenceSettings, McmcConfig};
use impcop_core::copula::{empirical_kendall_tau, CopulaSpec, PseudoObs};
use impcop_core::models::Linear;
use impcop_core::propagation::{entry_log_weights, optimal_density, sample_optimal, simulate};
use impcop_core::rng::rng_from_seed;

fn copula_density(c: &mut Criterion) {
    let specs = [
        CopulaSpec::Gaussian { rho: 0.5 },
        CopulaSpec::StudentT { rho: 0.5, nu: 4.0 },
        CopulaSpec::Clayton { theta: 2.0 },
        CopulaSpec::Frank { theta: 3.0 },
        CopulaSpec::Gumbel { theta: 2.0 },
    ];
    let pts = CopulaSpec::Frank { theta: 3.0 }.sample(1000, &mut rng_from_seed(1)).unwrap();
    let mut g = c.benchmark_group("copula_ln_pdf_1000");
    for s in specs {
        g.bench_function(s.family().name(), |b| {
            b.iter(|| pts.iter().map(|&(u, v)| s.ln_pdf_clamped(u, v)).sum::<f64>())
        });
    }
    g.finish();
}

fn kendall(c: &mut Criterion) {
    let mut g = c.benchmark_group("kendall_tau");
    for n in [1_000, 100_000] {
        let pts = CopulaSpec::Frank { theta: 3.0 }.sample(n, &mut rng_from_seed(2)).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &pts, |b, p| b.iter(|| empirical_kendall_tau(p).unwrap()));
    }
    g.finish();
}

fn copula_inference(c: &mut Criterion) {
    let pts = CopulaSpec::Frank { theta: 3.0 }.sample(100, &mut rng_from_seed(3)).unwrap();
    let obs = PseudoObs::new(&pts).unwrap();
    let settings = InferenceSettings {
        mcmc: McmcConfig {
            chain_length: 4000,
            burn_in: 1000,
            ..Default::default()
        },
        ..Default::default()
    };
    let families = [
        impcop_core::CopulaFamily::Gaussian,
        impcop_core::CopulaFamily::Clayton,
        impcop_core::CopulaFamily::Gumbel,
        impcop_core::CopulaFamily::Frank,
    ];
    let mut g = c.benchmark_group("inference");
    g.sample_size(10);
    g.bench_function("four_copulas_n100", |b| b.iter(|| infer_copulas(&obs, &families, None, &settings, 4).unwrap()));
    g.finish();
}

fn optimal_density_and_weights(c: &mut Criterion) {
    let ens = synthetic_ensemble(100, 50);
    let q = optimal_density(ens.clone());
    let xs = sample_optimal(&q, 1000, 5).unwrap();
    let run = simulate(&q, &Linear { a: 1.0, b: 1.0 }, 1000, 6).unwrap();
    let mut g = c.benchmark_group("propagation_100x50");
    g.sample_size(10);
    g.bench_function("q_star_log_pdf_1000", |b| b.iter(|| q.log_pdf_batch(black_box(&xs))));
    g.bench_function("sample_q_star_1000", |b| b.iter(|| sample_optimal(&q, 1000, 7).unwrap()));
    g.bench_function("entry_weights_1000", |b| b.iter(|| entry_log_weights(&ens, &run, 17).unwrap()));
    g.finish();
}

criterion_group!(benches, copula_density, kendall, copula_inference, optimal_density_and_weights);
criterion_main!(benches);
