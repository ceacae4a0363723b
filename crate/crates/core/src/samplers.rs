//! Random-walk Metropolis with pilot-tuned proposal covariance and
//! Hamiltonian Monte Carlo with leapfrog integration, both operating on an
//! unconstrained parameter space.
//!
//! Samplers are generic over [`Target`], which supplies the log-density and
//! its gradient. Chains are strictly sequential; independent chains can run
//! concurrently because targets are evaluated through shared references.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An unnormalized log-density on ℝ^d with gradient access.
pub trait Target: Sync {
    fn dim(&self) -> usize;

    /// Log-density at `theta`; −∞ signals an inadmissible point.
    fn log_density(&self, theta: &[f64]) -> f64;

    /// Fills `grad` and returns the log-density. Outside the admissible
    /// region implementations return −∞ and leave `grad` unspecified.
    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64;

    /// Log-likelihood component of the density, when the target knows a
    /// likelihood/prior decomposition. Used for model-comparison criteria.
    fn log_likelihood_part(&self, theta: &[f64]) -> Option<f64> {
        let _ = theta;
        None
    }
}

/// Kinetic-energy mass matrix for HMC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MassMatrix {
    Identity,
    Diagonal(Vec<f64>),
    /// Row-major symmetric positive definite matrix.
    Dense(Vec<Vec<f64>>),
}

impl Default for MassMatrix {
    fn default() -> Self {
        MassMatrix::Identity
    }
}

enum MassOps {
    Identity,
    Diagonal { m: Vec<f64>, sqrt_m: Vec<f64> },
    Dense { chol: Cholesky<f64, Dyn> },
}

impl MassOps {
    fn new(mass: &MassMatrix, d: usize) -> Result<Self> {
        match mass {
            MassMatrix::Identity => Ok(MassOps::Identity),
            MassMatrix::Diagonal(m) => {
                if m.len() != d {
                    return Err(Error::invalid(format!(
                        "mass matrix dimension {} does not match parameter dimension {d}",
                        m.len()
                    )));
                }
                if m.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return Err(Error::invalid("diagonal mass entries must be positive"));
                }
                Ok(MassOps::Diagonal { sqrt_m: m.iter().map(|v| v.sqrt()).collect(), m: m.clone() })
            }
            MassMatrix::Dense(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::invalid("dense mass matrix must be d×d"));
                }
                let mat = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
                let chol = Cholesky::new(mat)
                    .ok_or_else(|| Error::invalid("mass matrix must be positive definite"))?;
                Ok(MassOps::Dense { chol })
            }
        }
    }

    /// Draws r ~ N(0, M).
    fn sample_momentum<R: Rng + ?Sized>(&self, rng: &mut R, d: usize) -> Vec<f64> {
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        match self {
            MassOps::Identity => z,
            MassOps::Diagonal { sqrt_m, .. } => {
                z.iter().zip(sqrt_m).map(|(zi, s)| zi * s).collect()
            }
            MassOps::Dense { chol } => {
                let v = chol.l() * DVector::from_vec(z);
                v.iter().copied().collect()
            }
        }
    }

    /// K(r) = ½ rᵀ M⁻¹ r.
    fn kinetic(&self, r: &[f64]) -> f64 {
        match self {
            MassOps::Identity => 0.5 * r.iter().map(|v| v * v).sum::<f64>(),
            MassOps::Diagonal { m, .. } => {
                0.5 * r.iter().zip(m).map(|(v, mi)| v * v / mi).sum::<f64>()
            }
            MassOps::Dense { chol } => {
                let rv = DVector::from_column_slice(r);
                0.5 * rv.dot(&chol.solve(&rv))
            }
        }
    }

    /// dθ/dt = ∂K/∂r = M⁻¹ r.
    fn velocity(&self, r: &[f64], out: &mut [f64]) {
        match self {
            MassOps::Identity => out.copy_from_slice(r),
            MassOps::Diagonal { m, .. } => {
                for ((o, v), mi) in out.iter_mut().zip(r).zip(m) {
                    *o = v / mi;
                }
            }
            MassOps::Dense { chol } => {
                let solved = chol.solve(&DVector::from_column_slice(r));
                out.copy_from_slice(solved.as_slice());
            }
        }
    }
}

/// HMC sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmcConfig {
    /// Leapfrog step size ε > 0.
    pub epsilon: f64,
    /// Leapfrog steps L ≥ 1 per proposal.
    pub leapfrog_steps: usize,
    pub mass: MassMatrix,
    /// Retained draws after burn-in.
    pub n_draws: usize,
    pub n_burnin: usize,
    pub seed: u64,
}

impl HmcConfig {
    pub fn new(epsilon: f64, leapfrog_steps: usize, n_draws: usize, n_burnin: usize, seed: u64) -> Self {
        HmcConfig { epsilon, leapfrog_steps, mass: MassMatrix::Identity, n_draws, n_burnin, seed }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.leapfrog_steps == 0 {
            return Err(Error::invalid("leapfrog_steps must be >= 1"));
        }
        if self.n_draws == 0 {
            return Err(Error::invalid("n_draws must be >= 1"));
        }
        Ok(())
    }
}

/// Random-walk Metropolis settings. The sampler runs a pilot chain with
/// proposal covariance `epsilon_pilot·I`, estimates a covariance matrix from
/// the pilot output, then scales it by a factor tuned toward
/// `target_acceptance` during burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwmConfig {
    pub epsilon_pilot: f64,
    pub pilot_draws: usize,
    /// Starting value for the covariance scale; `None` uses 2.38²/d.
    pub epsilon_scale: Option<f64>,
    pub target_acceptance: f64,
    pub n_draws: usize,
    pub n_burnin: usize,
    pub seed: u64,
}

impl RwmConfig {
    pub fn new(n_draws: usize, n_burnin: usize, seed: u64) -> Self {
        RwmConfig {
            epsilon_pilot: 0.01,
            pilot_draws: 2000,
            epsilon_scale: None,
            target_acceptance: 0.8,
            n_draws,
            n_burnin,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon_pilot > 0.0) {
            return Err(Error::invalid("epsilon_pilot must be > 0"));
        }
        if self.pilot_draws < 10 {
            return Err(Error::invalid("pilot_draws must be >= 10"));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::invalid("target_acceptance must lie in (0, 1)"));
        }
        if self.n_draws == 0 {
            return Err(Error::invalid("n_draws must be >= 1"));
        }
        Ok(())
    }
}

/// Echo of the configuration a chain was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChainConfig {
    Hmc(HmcConfig),
    Rwm {
        config: RwmConfig,
        /// Covariance scale in effect after burn-in adaptation.
        epsilon_scale_used: f64,
    },
    /// Draws assembled outside the samplers (tests, file round-trips).
    External,
}

/// Posterior draws in unconstrained space with per-draw log-posterior and
/// gradient, as required by zero-variance post-processing.
#[derive(Debug, Clone)]
pub struct ChainSample {
    /// n_draws × d.
    pub draws: DMatrix<f64>,
    pub log_posterior: Vec<f64>,
    /// n_draws × d gradient of the log-posterior at each draw.
    pub gradients: DMatrix<f64>,
    /// Per-draw log-likelihood when the target decomposes.
    pub log_likelihood: Option<Vec<f64>>,
    /// Fraction of accepted proposals over the retained phase.
    pub acceptance_rate: f64,
    pub seed: u64,
    pub config: ChainConfig,
    pub warnings: Vec<String>,
}

impl ChainSample {
    pub fn n_draws(&self) -> usize {
        self.draws.nrows()
    }

    pub fn dim(&self) -> usize {
        self.draws.ncols()
    }

    /// Splits the retained draws into disjoint halves: a coefficient-fitting
    /// half and an estimation half. The halves get distinct seed tags so
    /// downstream fit/apply pairing is not flagged as same-chain.
    pub fn split_half(&self) -> Result<(ChainSample, ChainSample)> {
        let n = self.n_draws();
        if n < 4 {
            return Err(Error::invalid("need at least 4 draws to split a chain"));
        }
        let mid = n / 2;
        let take = |lo: usize, hi: usize, seed: u64| ChainSample {
            draws: self.draws.rows(lo, hi - lo).into_owned(),
            log_posterior: self.log_posterior[lo..hi].to_vec(),
            gradients: self.gradients.rows(lo, hi - lo).into_owned(),
            log_likelihood: self.log_likelihood.as_ref().map(|ll| ll[lo..hi].to_vec()),
            acceptance_rate: self.acceptance_rate,
            seed,
            config: self.config.clone(),
            warnings: self.warnings.clone(),
        };
        Ok((
            take(0, mid, self.seed),
            take(mid, n, self.seed.wrapping_add(0x517C_C1B7_2722_0A95)),
        ))
    }

    /// Assembles a chain from externally produced draws.
    pub fn from_parts(
        draws: DMatrix<f64>,
        log_posterior: Vec<f64>,
        gradients: DMatrix<f64>,
        log_likelihood: Option<Vec<f64>>,
        seed: u64,
    ) -> Result<Self> {
        if draws.nrows() != log_posterior.len() || draws.shape() != gradients.shape() {
            return Err(Error::contract("chain component shapes disagree"));
        }
        if let Some(ll) = &log_likelihood {
            if ll.len() != draws.nrows() {
                return Err(Error::contract("log-likelihood length disagrees with draws"));
            }
        }
        Ok(ChainSample {
            draws,
            log_posterior,
            gradients,
            log_likelihood,
            acceptance_rate: f64::NAN,
            seed,
            config: ChainConfig::External,
            warnings: Vec::new(),
        })
    }
}

/// Outcome of a leapfrog trajectory.
#[derive(Debug, Clone)]
pub enum LeapfrogOutcome {
    Complete {
        theta: Vec<f64>,
        momentum: Vec<f64>,
        log_density: f64,
        grad: Vec<f64>,
    },
    /// The trajectory hit a non-finite density or gradient; the proposal is
    /// auto-rejected.
    Divergent,
}

/// Runs `steps` leapfrog iterations (half-step momentum, full-step position,
/// half-step momentum) from `(theta, momentum)`.
pub fn leapfrog<T: Target + ?Sized>(
    target: &T,
    theta: &[f64],
    momentum: &[f64],
    epsilon: f64,
    steps: usize,
    mass: &MassMatrix,
) -> Result<LeapfrogOutcome> {
    let d = target.dim();
    if theta.len() != d || momentum.len() != d {
        return Err(Error::invalid("leapfrog point dimension mismatch"));
    }
    let ops = MassOps::new(mass, d)?;
    let mut th = theta.to_vec();
    let mut r = momentum.to_vec();
    let mut grad = vec![0.0; d];
    let lp = target.log_density_grad(&th, &mut grad);
    if !lp.is_finite() {
        return Ok(LeapfrogOutcome::Divergent);
    }
    let mut lp = lp;
    let mut vel = vec![0.0; d];
    if !leapfrog_inner(target, &ops, &mut th, &mut r, &mut grad, &mut lp, &mut vel, epsilon, steps)
    {
        return Ok(LeapfrogOutcome::Divergent);
    }
    Ok(LeapfrogOutcome::Complete { theta: th, momentum: r, log_density: lp, grad })
}

/// Inner loop shared with the HMC driver. Assumes `grad`/`lp` are valid at
/// `theta` on entry; leaves them valid at the endpoint on success.
#[allow(clippy::too_many_arguments)]
fn leapfrog_inner<T: Target + ?Sized>(
    target: &T,
    ops: &MassOps,
    theta: &mut [f64],
    r: &mut [f64],
    grad: &mut [f64],
    lp: &mut f64,
    vel: &mut [f64],
    epsilon: f64,
    steps: usize,
) -> bool {
    let half = 0.5 * epsilon;
    for _ in 0..steps {
        for (ri, gi) in r.iter_mut().zip(grad.iter()) {
            *ri += half * gi;
        }
        ops.velocity(r, vel);
        for (ti, vi) in theta.iter_mut().zip(vel.iter()) {
            *ti += epsilon * vi;
        }
        *lp = target.log_density_grad(theta, grad);
        if !lp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return false;
        }
        for (ri, gi) in r.iter_mut().zip(grad.iter()) {
            *ri += half * gi;
        }
    }
    true
}

/// Hamiltonian Monte Carlo: momentum refreshed from N(0, M) every iteration,
/// leapfrog proposal, Metropolis correction
/// min{1, exp[H(θ,r) − H(θ*,r*)]}.
pub fn hmc_sample<T: Target + ?Sized>(
    target: &T,
    cfg: &HmcConfig,
    init: &[f64],
) -> Result<ChainSample> {
    cfg.validate()?;
    let d = target.dim();
    if init.len() != d {
        return Err(Error::invalid("init dimension mismatch"));
    }
    let ops = MassOps::new(&cfg.mass, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut theta = init.to_vec();
    let mut grad = vec![0.0; d];
    let mut lp = target.log_density_grad(&theta, &mut grad);
    if !lp.is_finite() {
        return Err(Error::invalid(
            "initial point has non-finite log-density; start inside the support",
        ));
    }

    let total = cfg.n_burnin + cfg.n_draws;
    let mut draws = DMatrix::zeros(cfg.n_draws, d);
    let mut grads = DMatrix::zeros(cfg.n_draws, d);
    let mut lps = Vec::with_capacity(cfg.n_draws);
    let mut lls: Option<Vec<f64>> = None;
    let mut ll_cache: Option<f64> = target.log_likelihood_part(&theta);
    let mut have_ll = true;

    let mut prop_theta = vec![0.0; d];
    let mut prop_grad = vec![0.0; d];
    let mut vel = vec![0.0; d];
    let mut accepted = 0usize;

    for iter in 0..total {
        let r0 = ops.sample_momentum(&mut rng, d);
        let h0 = -lp + ops.kinetic(&r0);

        prop_theta.copy_from_slice(&theta);
        prop_grad.copy_from_slice(&grad);
        let mut r = r0;
        let mut prop_lp = lp;
        let complete = leapfrog_inner(
            target,
            &ops,
            &mut prop_theta,
            &mut r,
            &mut prop_grad,
            &mut prop_lp,
            &mut vel,
            cfg.epsilon,
            cfg.leapfrog_steps,
        );

        let mut accept = false;
        if complete {
            let h1 = -prop_lp + ops.kinetic(&r);
            let log_u: f64 = rng.random::<f64>().ln();
            accept = log_u < h0 - h1;
        }
        if accept {
            theta.copy_from_slice(&prop_theta);
            grad.copy_from_slice(&prop_grad);
            lp = prop_lp;
            have_ll = false;
        }

        if iter >= cfg.n_burnin {
            let k = iter - cfg.n_burnin;
            for j in 0..d {
                draws[(k, j)] = theta[j];
                grads[(k, j)] = grad[j];
            }
            lps.push(lp);
            if accept {
                accepted += 1;
            }
            if !have_ll {
                ll_cache = target.log_likelihood_part(&theta);
                have_ll = true;
            }
            if let Some(ll) = ll_cache {
                lls.get_or_insert_with(|| Vec::with_capacity(cfg.n_draws)).push(ll);
            }
        }
    }

    let acceptance_rate = accepted as f64 / cfg.n_draws as f64;
    let mut warnings = Vec::new();
    if !(0.05..=0.995).contains(&acceptance_rate) {
        warnings.push(format!(
            "HMC acceptance rate {acceptance_rate:.3} outside [0.05, 0.995]; retune epsilon"
        ));
    }
    if let Some(ll) = &lls {
        if ll.len() != cfg.n_draws {
            return Err(Error::contract("log-likelihood decomposition disappeared mid-chain"));
        }
    }

    Ok(ChainSample {
        draws,
        log_posterior: lps,
        gradients: grads,
        log_likelihood: lls,
        acceptance_rate,
        seed: cfg.seed,
        config: ChainConfig::Hmc(cfg.clone()),
        warnings,
    })
}

/// Random-walk Metropolis with three phases: pilot chain under ε_pilot·I, a
/// proposal covariance estimated from the pilot sample, and a main chain
/// whose covariance scale is stochastically tuned toward the target
/// acceptance during burn-in. Gradients are evaluated and stored for each
/// retained draw so zero-variance post-processing applies unchanged.
pub fn rwm_sample<T: Target + ?Sized>(
    target: &T,
    cfg: &RwmConfig,
    init: &[f64],
) -> Result<ChainSample> {
    cfg.validate()?;
    let d = target.dim();
    if init.len() != d {
        return Err(Error::invalid("init dimension mismatch"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut warnings = Vec::new();

    let mut theta = init.to_vec();
    let mut lp = target.log_density(&theta);
    if !lp.is_finite() {
        return Err(Error::invalid(
            "initial point has non-finite log-density; start inside the support",
        ));
    }

    // Phase 1: pilot chain with spherical proposals.
    let pilot_step = cfg.epsilon_pilot.sqrt();
    let mut pilot = DMatrix::zeros(cfg.pilot_draws, d);
    let mut prop = vec![0.0; d];
    for k in 0..cfg.pilot_draws {
        for (p, t) in prop.iter_mut().zip(theta.iter()) {
            let z: f64 = rng.sample(StandardNormal);
            *p = t + pilot_step * z;
        }
        let lp_prop = target.log_density(&prop);
        if rng.random::<f64>().ln() < lp_prop - lp {
            theta.copy_from_slice(&prop);
            lp = lp_prop;
        }
        for j in 0..d {
            pilot[(k, j)] = theta[j];
        }
    }

    // Phase 2: proposal covariance from the pilot sample.
    let cov = sample_covariance(&pilot);
    let chol = match Cholesky::new(cov.clone()) {
        Some(c) => c,
        None => {
            warnings.push(
                "pilot covariance not positive definite; falling back to its diagonal".to_string(),
            );
            let mut diag = DMatrix::zeros(d, d);
            for j in 0..d {
                diag[(j, j)] = cov[(j, j)].max(1e-12);
            }
            Cholesky::new(diag).expect("positive diagonal matrix")
        }
    };
    let l = chol.l();

    // Phase 3: main chain, scale adapted toward the target acceptance.
    let mut scale = cfg.epsilon_scale.unwrap_or(2.38 * 2.38 / d as f64);
    let mut log_scale = scale.ln();

    let total = cfg.n_burnin + cfg.n_draws;
    let mut draws = DMatrix::zeros(cfg.n_draws, d);
    let mut grads = DMatrix::zeros(cfg.n_draws, d);
    let mut lps = Vec::with_capacity(cfg.n_draws);
    let mut lls: Option<Vec<f64>> = None;

    let mut grad_cache = vec![0.0; d];
    let mut have_grad = false;
    let mut ll_cache: Option<f64> = None;
    let mut have_ll = false;
    let mut accepted = 0usize;
    let mut z = vec![0.0; d];

    for iter in 0..total {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let step = &l * DVector::from_column_slice(&z) * scale.sqrt();
        for (j, p) in prop.iter_mut().enumerate() {
            *p = theta[j] + step[j];
        }
        let lp_prop = target.log_density(&prop);
        let log_ratio = lp_prop - lp;
        let alpha = log_ratio.exp().min(1.0);
        if rng.random::<f64>().ln() < log_ratio {
            theta.copy_from_slice(&prop);
            lp = lp_prop;
            have_grad = false;
            have_ll = false;
            if iter >= cfg.n_burnin {
                accepted += 1;
            }
        }

        if iter < cfg.n_burnin {
            // Robbins-Monro step on the log scale.
            let gain = (iter as f64 + 1.0).powf(-0.7);
            log_scale += gain * (alpha - cfg.target_acceptance);
            scale = log_scale.exp();
        } else {
            let k = iter - cfg.n_burnin;
            if !have_grad {
                let lp_check = target.log_density_grad(&theta, &mut grad_cache);
                debug_assert!((lp_check - lp).abs() < 1e-8 * (1.0 + lp.abs()));
                have_grad = true;
            }
            if !have_ll {
                ll_cache = target.log_likelihood_part(&theta);
                have_ll = true;
            }
            for j in 0..d {
                draws[(k, j)] = theta[j];
                grads[(k, j)] = grad_cache[j];
            }
            lps.push(lp);
            if let Some(ll) = ll_cache {
                lls.get_or_insert_with(|| Vec::with_capacity(cfg.n_draws)).push(ll);
            }
        }
    }

    let acceptance_rate = accepted as f64 / cfg.n_draws as f64;
    if !(0.05..=0.995).contains(&acceptance_rate) {
        warnings.push(format!(
            "RWM acceptance rate {acceptance_rate:.3} outside [0.05, 0.995]"
        ));
    }
    if let Some(ll) = &lls {
        if ll.len() != cfg.n_draws {
            return Err(Error::contract("log-likelihood decomposition disappeared mid-chain"));
        }
    }

    Ok(ChainSample {
        draws,
        log_posterior: lps,
        gradients: grads,
        log_likelihood: lls,
        acceptance_rate,
        seed: cfg.seed,
        config: ChainConfig::Rwm { config: cfg.clone(), epsilon_scale_used: scale },
        warnings,
    })
}

fn sample_covariance(draws: &DMatrix<f64>) -> DMatrix<f64> {
    let n = draws.nrows();
    let d = draws.ncols();
    let mut means = vec![0.0; d];
    for j in 0..d {
        means[j] = draws.column(j).sum() / n as f64;
    }
    let mut cov = DMatrix::zeros(d, d);
    for k in 0..n {
        for i in 0..d {
            let di = draws[(k, i)] - means[i];
            for j in i..d {
                cov[(i, j)] += di * (draws[(k, j)] - means[j]);
            }
        }
    }
    let denom = (n - 1).max(1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[(i, j)] /= denom;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    cov
}

/// Result of the step-size search: the step size, the warmed-up state the
/// search ended at (a good starting point for production chains), and any
/// best-effort warnings.
#[derive(Debug, Clone)]
pub struct StepSizeTuning {
    pub epsilon: f64,
    pub warm_start: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Searches for a step size whose measured acceptance falls inside `window`.
///
/// A warmup phase first walks the chain toward the typical set, shrinking ε
/// whenever the chain is stuck (initial gradients can be orders of magnitude
/// larger than at equilibrium). Doubling/halving then log-bisection follows,
/// with each probe chain resuming from the previous endpoint and an in-window
/// value confirmed on a fresh segment. Hitting the iteration cap returns the
/// best-effort ε with a warning.
pub fn tune_epsilon<T: Target + ?Sized>(
    target: &T,
    base: &HmcConfig,
    window: (f64, f64),
    init: &[f64],
) -> Result<StepSizeTuning> {
    let (lo, hi) = window;
    if !(lo <= hi) {
        return Err(Error::invalid("acceptance window must satisfy lo <= hi"));
    }
    let mut cur_init = init.to_vec();
    let mut attempt = 0u64;
    let mut segment = |eps: f64, draws: usize, start: &mut Vec<f64>| -> Result<f64> {
        let cfg = HmcConfig {
            epsilon: eps,
            n_draws: draws,
            n_burnin: 0,
            seed: base.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(attempt),
            ..base.clone()
        };
        attempt += 1;
        let chain = hmc_sample(target, &cfg, start)?;
        let last = chain.n_draws() - 1;
        *start = chain.draws.row(last).iter().copied().collect();
        Ok(chain.acceptance_rate)
    };

    // Warmup: move toward the typical set, dropping eps while stuck.
    let mut eps_warm = base.epsilon;
    let mut moving_segments = 0;
    for _ in 0..60 {
        let acc = segment(eps_warm, 40, &mut cur_init)?;
        if acc < 0.2 {
            eps_warm *= 0.25;
        } else {
            moving_segments += 1;
            if moving_segments >= 4 {
                break;
            }
        }
    }

    let mut eps = base.epsilon.min(eps_warm * 8.0);
    let mut low_side: Option<f64> = None; // acceptance too high -> eps can grow
    let mut high_side: Option<f64> = None; // acceptance too low -> eps must shrink
    let mid = 0.5 * (lo + hi);
    let mut best = (eps, f64::INFINITY);

    for _ in 0..30 {
        let mut acc = segment(eps, 60, &mut cur_init)?;
        if acc >= lo && acc <= hi {
            // Confirm on a fresh probe segment before accepting the value.
            let acc2 = segment(eps, 60, &mut cur_init)?;
            if acc2 >= lo && acc2 <= hi {
                return Ok(StepSizeTuning { epsilon: eps, warm_start: cur_init, warnings: vec![] });
            }
            acc = acc2;
        }
        let dist = (acc - mid).abs();
        if dist < best.1 {
            best = (eps, dist);
        }
        if acc > hi {
            low_side = Some(eps);
        } else {
            high_side = Some(eps);
        }
        eps = match (low_side, high_side) {
            (Some(a), Some(b)) => (0.5 * (a.ln() + b.ln())).exp(),
            (Some(a), None) => a * 2.0,
            (None, Some(b)) => b / 2.0,
            (None, None) => unreachable!(),
        };
    }
    Ok(StepSizeTuning {
        epsilon: best.0,
        warm_start: cur_init,
        warnings: vec![format!(
            "epsilon search hit the iteration cap; using best-effort {} (acceptance distance {:.3})",
            best.0, best.1
        )],
    })
}

/// Test and calibration targets with known moments.
pub mod targets {
    use super::Target;
    use crate::error::{Error, Result};
    use nalgebra::{Cholesky, DMatrix, DVector};

    /// Multivariate normal with known mean and covariance.
    #[derive(Debug, Clone)]
    pub struct MvGaussian {
        mean: DVector<f64>,
        precision: DMatrix<f64>,
    }

    impl MvGaussian {
        pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
            let d = mean.len();
            if cov.len() != d || cov.iter().any(|r| r.len() != d) {
                return Err(Error::invalid("covariance must be d×d"));
            }
            let cov = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
            let chol = Cholesky::new(cov)
                .ok_or_else(|| Error::invalid("covariance must be positive definite"))?;
            Ok(MvGaussian { mean: DVector::from_vec(mean), precision: chol.inverse() })
        }

        pub fn standard(d: usize) -> Self {
            MvGaussian { mean: DVector::zeros(d), precision: DMatrix::identity(d, d) }
        }

        pub fn mean(&self) -> &DVector<f64> {
            &self.mean
        }
    }

    impl Target for MvGaussian {
        fn dim(&self) -> usize {
            self.mean.len()
        }

        fn log_density(&self, theta: &[f64]) -> f64 {
            let c = DVector::from_column_slice(theta) - &self.mean;
            -0.5 * c.dot(&(&self.precision * &c))
        }

        fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
            let c = DVector::from_column_slice(theta) - &self.mean;
            let pc = &self.precision * &c;
            grad.copy_from_slice((-&pc).as_slice());
            -0.5 * c.dot(&pc)
        }
    }
}
