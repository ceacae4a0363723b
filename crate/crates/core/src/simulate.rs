//! Data generation and the desk-scale bias/standard-error study comparing
//! HMC and RWM with and without zero-variance post-processing.
//!
//! Each replication simulates a fresh series, runs two chains per sampler
//! (one to fit control-variate coefficients, one to estimate), and records
//! natural-space point estimates for the six methods HMC, ZV-HMC-L, ZV-HMC-Q,
//! RWM, ZV-RWM-L and ZV-RWM-Q. All methods within a replication share the
//! same simulated series (paired design). Replications fan out over the
//! thread pool, each with a seed derived deterministically from
//! (master seed, sample size, replication index), so parallel and sequential
//! runs produce identical results.

use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::model::{GarchPosterior, GjrParams, H1Policy, PriorSpec};
use crate::samplers::{hmc_sample, rwm_sample, tune_epsilon, HmcConfig, RwmConfig};
use crate::zv::{posterior_summary, ParamSummary};

/// Deterministic seed derivation (splitmix64 over the tag sequence).
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut s = master;
    for &tag in tags {
        s = s
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(tag.wrapping_mul(0xBF58_476D_1CE4_E5B9));
        s ^= s >> 30;
        s = s.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        s ^= s >> 27;
        s = s.wrapping_mul(0x94D0_49BB_1331_11EB);
        s ^= s >> 31;
    }
    s
}

/// Simulates `n` observations of x_t = μ + ε_t·√h_t under `truth`, starting
/// from the unconditional variance and discarding 500 pre-samples so the
/// process begins near stationarity.
pub fn simulate_series<R: Rng + ?Sized>(
    truth: &GjrParams,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    truth.validate()?;
    const BURN: usize = 500;
    let mut h = truth.unconditional_variance();
    let mut prev_y = 0.0;
    let mut out = Vec::with_capacity(n);
    for t in 0..BURN + n {
        if t > 0 {
            let indicator = if prev_y <= 0.0 { 1.0 } else { 0.0 };
            h = truth.omega
                + (truth.alpha + truth.phi * indicator) * prev_y * prev_y
                + truth.beta * h;
        }
        let e = truth.dist.sample(rng)?;
        let y = e * h.sqrt();
        if t >= BURN {
            out.push(y + truth.mu);
        }
        prev_y = y;
    }
    Ok(out)
}

/// Estimation method identifiers, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    Hmc,
    ZvHmcLinear,
    ZvHmcQuadratic,
    Rwm,
    ZvRwmLinear,
    ZvRwmQuadratic,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Hmc => "HMC",
            Method::ZvHmcLinear => "ZV-HMC-L",
            Method::ZvHmcQuadratic => "ZV-HMC-Q",
            Method::Rwm => "RWM",
            Method::ZvRwmLinear => "ZV-RWM-L",
            Method::ZvRwmQuadratic => "ZV-RWM-Q",
        }
    }
}

/// Which sampler families the study runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SamplerChoice {
    Both,
    HmcOnly,
    RwmOnly,
}

impl SamplerChoice {
    pub fn methods(self) -> Vec<Method> {
        match self {
            SamplerChoice::Both => vec![
                Method::Hmc,
                Method::ZvHmcLinear,
                Method::ZvHmcQuadratic,
                Method::Rwm,
                Method::ZvRwmLinear,
                Method::ZvRwmQuadratic,
            ],
            SamplerChoice::HmcOnly => {
                vec![Method::Hmc, Method::ZvHmcLinear, Method::ZvHmcQuadratic]
            }
            SamplerChoice::RwmOnly => {
                vec![Method::Rwm, Method::ZvRwmLinear, Method::ZvRwmQuadratic]
            }
        }
    }
}

/// Study configuration.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub replications: usize,
    pub sample_sizes: Vec<usize>,
    pub truth: GjrParams,
    pub prior: PriorSpec,
    /// Retained draws per chain after burn-in.
    pub draws: usize,
    pub burnin: usize,
    pub leapfrog_steps: usize,
    /// Fixed HMC step size; `None` tunes per replication toward [0.7, 0.9].
    pub hmc_epsilon: Option<f64>,
    pub pilot_epsilon: f64,
    pub pilot_draws: usize,
    pub target_acceptance: f64,
    pub samplers: SamplerChoice,
    pub seed: u64,
    /// Run replications on the rayon pool (no-op without the `parallel`
    /// feature). Results are identical either way.
    pub parallel: bool,
}

impl StudyConfig {
    /// Desk-scale defaults: 20 replications at n ∈ {200, 500}, chains of
    /// 2000 iterations with the first 1000 discarded, L = 20, diffuse priors.
    pub fn desk_scale(truth: GjrParams) -> Self {
        StudyConfig {
            replications: 20,
            sample_sizes: vec![200, 500],
            truth,
            prior: PriorSpec::all(1000.0),
            draws: 1000,
            burnin: 1000,
            leapfrog_steps: 20,
            hmc_epsilon: None,
            pilot_epsilon: 0.01,
            pilot_draws: 2000,
            target_acceptance: 0.8,
            samplers: SamplerChoice::Both,
            seed: 20_240_601,
            parallel: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications must be >= 1"));
        }
        if self.sample_sizes.is_empty() {
            return Err(Error::invalid("at least one sample size is required"));
        }
        self.truth.validate()?;
        self.prior.validate()
    }
}

/// One aggregated table cell.
#[derive(Debug, Clone, Serialize)]
pub struct StudyCell {
    pub n: usize,
    pub parameter: String,
    pub method: Method,
    /// Mean over replications of (estimate − truth).
    pub bias: f64,
    /// Cross-replication standard deviation of the point estimates.
    pub se: f64,
    /// Mean over replications of the within-chain Monte Carlo SE.
    pub within_se: f64,
    pub replications: usize,
}

/// Aggregated study output.
#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub cells: Vec<StudyCell>,
    pub requested_replications: usize,
    /// Human-readable record of replications that failed and were skipped.
    pub failures: Vec<String>,
}

struct RepRecord {
    /// (method, per-parameter estimate, per-parameter within-chain SE).
    estimates: Vec<(Method, Vec<f64>, Vec<f64>)>,
}

fn summaries_to_estimates(
    summaries: &[ParamSummary],
    hmc: bool,
) -> Vec<(Method, Vec<f64>, Vec<f64>)> {
    let (raw, lin, quad) = if hmc {
        (Method::Hmc, Method::ZvHmcLinear, Method::ZvHmcQuadratic)
    } else {
        (Method::Rwm, Method::ZvRwmLinear, Method::ZvRwmQuadratic)
    };
    vec![
        (
            raw,
            summaries.iter().map(|s| s.estimate.raw.mean).collect(),
            summaries.iter().map(|s| s.estimate.raw.se).collect(),
        ),
        (
            lin,
            summaries.iter().map(|s| s.estimate.linear.mean).collect(),
            summaries.iter().map(|s| s.estimate.linear.se).collect(),
        ),
        (
            quad,
            summaries.iter().map(|s| s.estimate.quadratic.mean).collect(),
            summaries.iter().map(|s| s.estimate.quadratic.se).collect(),
        ),
    ]
}

fn run_replication(cfg: &StudyConfig, n: usize, rep: usize) -> Result<RepRecord> {
    use rand::SeedableRng;
    let kind = cfg.truth.kind();
    let mut data_rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(
        cfg.seed,
        &[n as u64, rep as u64, 0],
    ));
    let x = simulate_series(&cfg.truth, n, &mut data_rng)?;
    let post = GarchPosterior::new(&x, kind, cfg.prior, H1Policy::Unconditional, true)?;
    let init = post.default_init();

    let mut estimates = Vec::new();

    if matches!(cfg.samplers, SamplerChoice::Both | SamplerChoice::HmcOnly) {
        let base = HmcConfig {
            epsilon: cfg.hmc_epsilon.unwrap_or(0.05),
            leapfrog_steps: cfg.leapfrog_steps,
            mass: crate::samplers::MassMatrix::Identity,
            n_draws: cfg.draws,
            n_burnin: cfg.burnin,
            seed: derive_seed(cfg.seed, &[n as u64, rep as u64, 1]),
        };
        let (epsilon, hmc_init) = match cfg.hmc_epsilon {
            Some(e) => (e, init.clone()),
            None => {
                let tuning = tune_epsilon(&post, &base, (0.7, 0.9), &init)?;
                (tuning.epsilon, tuning.warm_start)
            }
        };
        let chain_a = hmc_sample(
            &post,
            &HmcConfig {
                epsilon,
                seed: derive_seed(cfg.seed, &[n as u64, rep as u64, 2]),
                ..base.clone()
            },
            &hmc_init,
        )?;
        let chain_b = hmc_sample(
            &post,
            &HmcConfig {
                epsilon,
                seed: derive_seed(cfg.seed, &[n as u64, rep as u64, 3]),
                ..base
            },
            &hmc_init,
        )?;
        let summaries = posterior_summary(&chain_a, &chain_b, kind)?;
        estimates.extend(summaries_to_estimates(&summaries, true));
    }

    if matches!(cfg.samplers, SamplerChoice::Both | SamplerChoice::RwmOnly) {
        let base = RwmConfig {
            epsilon_pilot: cfg.pilot_epsilon,
            pilot_draws: cfg.pilot_draws,
            epsilon_scale: None,
            target_acceptance: cfg.target_acceptance,
            n_draws: cfg.draws,
            n_burnin: cfg.burnin,
            seed: 0,
        };
        let chain_a = rwm_sample(
            &post,
            &RwmConfig { seed: derive_seed(cfg.seed, &[n as u64, rep as u64, 4]), ..base.clone() },
            &init,
        )?;
        let chain_b = rwm_sample(
            &post,
            &RwmConfig { seed: derive_seed(cfg.seed, &[n as u64, rep as u64, 5]), ..base },
            &init,
        )?;
        let summaries = posterior_summary(&chain_a, &chain_b, kind)?;
        estimates.extend(summaries_to_estimates(&summaries, false));
    }

    Ok(RepRecord { estimates })
}

/// Runs the full study: replications × sample sizes × methods, aggregated
/// into bias (mean estimate minus truth), cross-replication SE and mean
/// within-chain SE per cell. Failed replications are skipped and reported.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let kind = cfg.truth.kind();
    let names = kind.param_names();
    let truth_values = cfg.truth.natural_values();
    let methods = cfg.samplers.methods();

    let jobs: Vec<(usize, usize)> = cfg
        .sample_sizes
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();
    let outcomes = map_indexed(jobs.len(), cfg.parallel, |idx| {
        let (n, rep) = jobs[idx];
        (n, rep, run_replication(cfg, n, rep))
    });

    let mut failures = Vec::new();
    let mut cells = Vec::new();
    for &n in &cfg.sample_sizes {
        let mut per_method: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> =
            methods.iter().map(|_| (Vec::new(), Vec::new())).collect();
        for (jn, rep, outcome) in outcomes.iter().filter(|(jn, _, _)| *jn == n) {
            match outcome {
                Ok(record) => {
                    for (m_idx, method) in methods.iter().enumerate() {
                        let found = record
                            .estimates
                            .iter()
                            .find(|(m, _, _)| m == method)
                            .expect("replication produced every configured method");
                        per_method[m_idx].0.push(found.1.clone());
                        per_method[m_idx].1.push(found.2.clone());
                    }
                }
                Err(e) => failures.push(format!("n={jn} replication {rep}: {e}")),
            }
        }
        for (m_idx, method) in methods.iter().enumerate() {
            let (means, ses) = &per_method[m_idx];
            let m = means.len();
            if m == 0 {
                return Err(Error::numerical(format!(
                    "every replication failed at n={n}; first failure: {}",
                    failures.first().map_or("unknown", |s| s.as_str())
                )));
            }
            for (j, name) in names.iter().enumerate() {
                let ests: Vec<f64> = means.iter().map(|v| v[j]).collect();
                let mean_est = ests.iter().sum::<f64>() / m as f64;
                let se = if m > 1 {
                    (ests.iter().map(|v| (v - mean_est).powi(2)).sum::<f64>() / (m - 1) as f64)
                        .sqrt()
                } else {
                    0.0
                };
                let within = ses.iter().map(|v| v[j]).sum::<f64>() / m as f64;
                cells.push(StudyCell {
                    n,
                    parameter: (*name).to_string(),
                    method: *method,
                    bias: mean_est - truth_values[j],
                    se,
                    within_se: within,
                    replications: m,
                });
            }
        }
    }
    // De-duplicate failure messages across sample sizes (each failure was
    // recorded once per n-loop pass above).
    failures.dedup();
    Ok(StudyResult { cells, requested_replications: cfg.replications, failures })
}

/// CSV emission: one row per n × parameter × method.
pub fn study_csv(result: &StudyResult) -> String {
    let mut out = String::from("n,parameter,method,bias,se_across,se_within,replications\n");
    for c in &result.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.n,
            c.parameter,
            c.method.label(),
            c.bias,
            c.se,
            c.within_se,
            c.replications
        );
    }
    out
}

/// Fixed-width text table mirroring the bias/SE layout of the study report,
/// one block per sample size. `se_column` selects which SE lands in the
/// table; the CSV always carries both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeColumn {
    Across,
    Within,
}

pub fn study_table(result: &StudyResult, se_column: SeColumn) -> String {
    let mut methods: Vec<Method> = Vec::new();
    let mut params: Vec<String> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    for c in &result.cells {
        if !methods.contains(&c.method) {
            methods.push(c.method);
        }
        if !params.contains(&c.parameter) {
            params.push(c.parameter.clone());
        }
        if !sizes.contains(&c.n) {
            sizes.push(c.n);
        }
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Bias and SE ({}) per method; {} replications requested.",
        match se_column {
            SeColumn::Across => "cross-replication SD",
            SeColumn::Within => "mean within-chain MCSE",
        },
        result.requested_replications
    );
    for &n in &sizes {
        let _ = writeln!(out, "\nn = {n}");
        let _ = write!(out, "{:>8} ", "param");
        for m in &methods {
            let _ = write!(out, "{:>12} {:>12} ", format!("{}:bias", m.label()), "SE");
        }
        let _ = writeln!(out);
        for p in &params {
            let _ = write!(out, "{p:>8} ");
            for m in &methods {
                let cell = result
                    .cells
                    .iter()
                    .find(|c| c.n == n && &c.parameter == p && c.method == *m)
                    .expect("complete table");
                let se = match se_column {
                    SeColumn::Across => cell.se,
                    SeColumn::Within => cell.within_se,
                };
                let _ = write!(out, "{:>12.5} {:>12.5} ", cell.bias, se);
            }
            let _ = writeln!(out);
        }
    }
    if !result.failures.is_empty() {
        let _ = writeln!(out, "\nfailed replications: {}", result.failures.len());
        for f in &result.failures {
            let _ = writeln!(out, "  {f}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ErrorDist;
    use crate::model::variance_recursion;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn normal_truth() -> GjrParams {
        GjrParams {
            mu: 0.0,
            omega: 0.05,
            alpha: 0.05,
            phi: 0.1,
            beta: 0.85,
            dist: ErrorDist::Normal,
        }
    }

    #[test]
    fn simulated_variance_matches_unconditional_variance() {
        let truth = normal_truth();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = simulate_series(&truth, 100_000, &mut rng).unwrap();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64;
        // omega / (1 − 0.95) = 1.
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn degenerate_model_is_iid_unit_variance() {
        let truth = GjrParams {
            mu: 0.0,
            omega: 1.0,
            alpha: 1e-12,
            phi: 1e-12,
            beta: 1e-12,
            dist: ErrorDist::Normal,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = simulate_series(&truth, 50_000, &mut rng).unwrap();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "variance {var}");
        // Lag-1 autocorrelation of squares should be near zero.
        let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
        let msq = sq.iter().sum::<f64>() / sq.len() as f64;
        let num: f64 = sq.windows(2).map(|w| (w[0] - msq) * (w[1] - msq)).sum();
        let den: f64 = sq.iter().map(|v| (v - msq) * (v - msq)).sum();
        assert!((num / den).abs() < 0.02);
    }

    #[test]
    fn asymmetry_signature_is_present() {
        // With φ > 0, the product I(y_{t−1} ≤ 0)·y²_{t−1} correlates
        // positively with h_t.
        let truth = normal_truth();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = simulate_series(&truth, 100_000, &mut rng).unwrap();
        let y: Vec<f64> = x.iter().map(|v| v - truth.mu).collect();
        let h = variance_recursion(&y, &truth, H1Policy::Unconditional).unwrap();
        let sig: Vec<f64> = y
            .iter()
            .map(|v| if *v <= 0.0 { v * v } else { 0.0 })
            .collect();
        let n = y.len();
        let ms = sig[..n - 1].iter().sum::<f64>() / (n - 1) as f64;
        let mh = h[1..].iter().sum::<f64>() / (n - 1) as f64;
        let mut cov = 0.0;
        for t in 0..n - 1 {
            cov += (sig[t] - ms) * (h[t + 1] - mh);
        }
        assert!(cov > 0.0, "covariance {cov}");
    }

    #[test]
    fn simulation_is_deterministic() {
        let truth = normal_truth();
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(
            simulate_series(&truth, 100, &mut a).unwrap(),
            simulate_series(&truth, 100, &mut b).unwrap()
        );
    }

    fn tiny_config(m: usize) -> StudyConfig {
        StudyConfig {
            replications: m,
            sample_sizes: vec![120],
            draws: 150,
            burnin: 150,
            leapfrog_steps: 10,
            hmc_epsilon: Some(0.08),
            samplers: SamplerChoice::HmcOnly,
            ..StudyConfig::desk_scale(normal_truth())
        }
    }

    #[test]
    fn single_replication_bias_is_estimate_minus_truth() {
        let cfg = tiny_config(1);
        let result = run_study(&cfg).unwrap();
        assert!(result.failures.is_empty());
        // With m = 1, bias = estimate − truth and the cross-rep SE is zero.
        for c in &result.cells {
            assert_eq!(c.replications, 1);
            assert_eq!(c.se, 0.0);
        }
        // Reproduce one cell by hand.
        let rec = run_replication(&cfg, 120, 0).unwrap();
        let (_, means, _) = rec
            .estimates
            .iter()
            .find(|(m, _, _)| *m == Method::Hmc)
            .unwrap()
            .clone();
        let omega_cell = result
            .cells
            .iter()
            .find(|c| c.parameter == "omega" && c.method == Method::Hmc)
            .unwrap();
        assert!((omega_cell.bias - (means[1] - 0.05)).abs() < 1e-12);
    }

    #[test]
    fn study_is_deterministic_and_parallel_invariant() {
        let cfg = tiny_config(3);
        let a = run_study(&cfg).unwrap();
        let b = run_study(&StudyConfig { parallel: false, ..cfg.clone() }).unwrap();
        assert_eq!(a.cells.len(), b.cells.len());
        for (x, y) in a.cells.iter().zip(b.cells.iter()) {
            assert_eq!(x.bias.to_bits(), y.bias.to_bits());
            assert_eq!(x.se.to_bits(), y.se.to_bits());
            assert_eq!(x.within_se.to_bits(), y.within_se.to_bits());
        }
    }

    #[test]
    fn study_table_is_complete() {
        let cfg = tiny_config(2);
        let result = run_study(&cfg).unwrap();
        // 1 sample size × 5 parameters × 3 methods.
        assert_eq!(result.cells.len(), 15);
        let csv = study_csv(&result);
        assert_eq!(csv.lines().count(), 16);
        let table = study_table(&result, SeColumn::Across);
        assert!(table.contains("n = 120"));
        assert!(table.contains("omega"));
    }
}
