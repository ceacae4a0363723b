// Traces probe-chain acceptance across step sizes on the example-data posterior.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zvgarch::distributions::ErrorDist;
use zvgarch::model::*;
use zvgarch::samplers::*;
use zvgarch::simulate::simulate_series;

fn main() {
    let truth = GjrParams { mu: 0.03, omega: 0.05, alpha: 0.05, phi: 0.10, beta: 0.85, dist: ErrorDist::Ged { nu: 1.3 } };
    let mut rng = ChaCha8Rng::seed_from_u64(171_123);
    let x = simulate_series(&truth, 1500, &mut rng).unwrap();
    let post = GarchPosterior::new(&x, DistKind::Ged, PriorSpec::all(100.0), H1Policy::Unconditional, true).unwrap();
    let init = post.default_init();

    // Warm up like the tuner does.
    let base = HmcConfig { epsilon: 0.05, leapfrog_steps: 20, mass: MassMatrix::Identity, n_draws: 150, n_burnin: 0, seed: 777 };
    let warm = hmc_sample(&post, &base, &init).unwrap();
    let last = warm.n_draws() - 1;
    let start: Vec<f64> = warm.draws.row(last).iter().copied().collect();
    println!("warmup acceptance {:.3}", warm.acceptance_rate);

    for eps in [0.0125, 0.025, 0.05, 0.1, 0.2, 0.4, 0.8] {
        let cfg = HmcConfig { epsilon: eps, n_draws: 60, n_burnin: 0, seed: 123, ..base.clone() };
        let c = hmc_sample(&post, &cfg, &start).unwrap();
        let cfg_long = HmcConfig { epsilon: eps, n_draws: 500, n_burnin: 200, seed: 321, ..base.clone() };
        let cl = hmc_sample(&post, &cfg_long, &start).unwrap();
        println!("eps {eps:>7.4}: probe(60) acc {:.3}   long(500) acc {:.3}", c.acceptance_rate, cl.acceptance_rate);
    }
}
