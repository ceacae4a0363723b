//! Compares the rayon data-parallel paths against their sequential
//! equivalents on the two heaviest batch workloads: study replications and
//! the influence scan.

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use zvgarch::diagnostics::log_perturbation_matrix;
use zvgarch::distributions::ErrorDist;
use zvgarch::model::{DistKind, GarchPosterior, GjrParams, H1Policy, PriorSpec};
use zvgarch::samplers::{hmc_sample, HmcConfig};
use zvgarch::simulate::{run_study, simulate_series, SamplerChoice, StudyConfig};
use zvgarch::zv::natural_draws;

fn truth() -> GjrParams {
    GjrParams {
        mu: 0.0,
        omega: 0.05,
        alpha: 0.05,
        phi: 0.1,
        beta: 0.85,
        dist: ErrorDist::Normal,
    }
}

fn bench_study(c: &mut Criterion) {
    let base = StudyConfig {
        replications: 4,
        sample_sizes: vec![150],
        draws: 250,
        burnin: 250,
        leapfrog_steps: 10,
        hmc_epsilon: Some(0.08),
        samplers: SamplerChoice::HmcOnly,
        ..StudyConfig::desk_scale(truth())
    };
    let mut group = c.benchmark_group("study_replications");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        let cfg = StudyConfig { parallel: true, ..base.clone() };
        b.iter(|| run_study(&cfg).unwrap());
    });
    group.bench_function("sequential", |b| {
        let cfg = StudyConfig { parallel: false, ..base.clone() };
        b.iter(|| run_study(&cfg).unwrap());
    });
    group.finish();
}

fn bench_influence(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = simulate_series(&truth(), 400, &mut rng).unwrap();
    let post = GarchPosterior::new(
        &x,
        DistKind::Normal,
        PriorSpec::all(1000.0),
        H1Policy::Unconditional,
        true,
    )
    .unwrap();
    let cfg = HmcConfig::new(0.06, 10, 400, 300, 11);
    let chain = hmc_sample(&post, &cfg, &post.default_init()).unwrap();
    let nat = natural_draws(&chain, DistKind::Normal);
    let params: Vec<GjrParams> = (0..chain.n_draws())
        .map(|l| {
            let theta: Vec<f64> = chain.draws.row(l).iter().copied().collect();
            post.natural_at(&theta)
        })
        .collect();
    drop(nat);

    let mut group = c.benchmark_group("influence_scan");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| log_perturbation_matrix(&params, &x, H1Policy::Unconditional, true).unwrap());
    });
    group.bench_function("sequential", |b| {
        b.iter(|| log_perturbation_matrix(&params, &x, H1Policy::Unconditional, false).unwrap());
    });
    group.finish();
}

criterion_group!(benches, bench_study, bench_influence);
criterion_main!(benches);
