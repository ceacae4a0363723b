//! Model-comparison criteria from pointwise log-likelihood draws: DIC, EAIC,
//! EBIC, WAIC and LOOIC, all on the deviance scale (lower is better).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::model::GarchPosterior;
use crate::samplers::ChainSample;

/// Deviance-scale criteria with their effective-parameter counts and the
/// importance-weight tail diagnostic for LOOIC.
#[derive(Debug, Clone, Copy)]
pub struct CriteriaReport {
    pub dic: f64,
    pub eaic: f64,
    pub ebic: f64,
    pub waic: f64,
    pub looic: f64,
    /// p_D = D̄ − D(θ̄); may be negative and is reported as computed.
    pub p_d: f64,
    pub p_waic: f64,
    pub p_loo: f64,
    /// Largest Hill-type tail-shape estimate of the per-observation
    /// importance weights; values above 0.7 flag unstable LOOIC terms.
    pub max_tail_k: f64,
    pub looic_flagged: bool,
}

/// N×n matrix of conditional log-likelihood terms log p(x_t | F_{t−1}, θ^(l)).
///
/// Row sums are checked against the chain's stored per-draw log-likelihood
/// (within 1e-8) when the sampler recorded one.
pub fn pointwise_loglik(chain: &ChainSample, post: &GarchPosterior) -> Result<DMatrix<f64>> {
    let n_draws = chain.n_draws();
    let n = post.n_obs();
    let rows: Vec<Result<Vec<f64>>> = map_indexed(n_draws, true, |l| {
        let theta: Vec<f64> = chain.draws.row(l).iter().copied().collect();
        post.pointwise_log_likelihood(&theta)
    });
    let mut out = DMatrix::zeros(n_draws, n);
    for (l, row) in rows.into_iter().enumerate() {
        let row = row?;
        for (t, v) in row.into_iter().enumerate() {
            out[(l, t)] = v;
        }
    }
    if let Some(stored) = &chain.log_likelihood {
        for l in 0..n_draws {
            let sum: f64 = out.row(l).sum();
            if (sum - stored[l]).abs() > 1e-8 * (1.0 + stored[l].abs()) {
                return Err(Error::contract(format!(
                    "pointwise decomposition of draw {l} sums to {sum}, stored {}",
                    stored[l]
                )));
            }
        }
    }
    Ok(out)
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Hill-type estimate of the generalized-Pareto shape of the largest
/// log-weights; mirrors the PSIS k̂ diagnostic in spirit.
fn tail_shape(log_w: &[f64]) -> f64 {
    let n = log_w.len();
    let m = ((n as f64 * 0.2).min(3.0 * (n as f64).sqrt()).ceil() as usize).clamp(5, n / 2);
    if n < 16 {
        return 0.0;
    }
    let mut sorted = log_w.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite log-weights"));
    let threshold = sorted[m];
    sorted[..m].iter().map(|v| v - threshold).sum::<f64>() / m as f64
}

/// Computes all five criteria from a pointwise log-likelihood matrix.
///
/// `k` is the number of sampled parameters and `loglik_at_mean` the
/// log-likelihood at the posterior-mean parameter (the natural-space image of
/// the unconstrained mean), which fixes D(θ̄) for DIC. Formulas:
/// DIC = D̄ + p_D with p_D = D̄ − D(θ̄); EAIC = D̄ + 2k; EBIC = D̄ + k·ln n;
/// WAIC = −2(lppd − p_WAIC) with p_WAIC = Σ_t Var_l; LOOIC by truncated
/// importance sampling with weights capped at N^{3/4}·mean.
pub fn compute_criteria(
    pointwise: &DMatrix<f64>,
    k: usize,
    loglik_at_mean: f64,
) -> Result<CriteriaReport> {
    let n_draws = pointwise.nrows();
    let n = pointwise.ncols();
    if n_draws < 2 || n == 0 {
        return Err(Error::invalid("need at least 2 draws and 1 observation"));
    }
    if pointwise.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("pointwise log-likelihood contains non-finite entries"));
    }
    let nf = n_draws as f64;

    // Mean deviance and DIC.
    let mut mean_dev = 0.0;
    for l in 0..n_draws {
        mean_dev += -2.0 * pointwise.row(l).sum();
    }
    mean_dev /= nf;
    let dev_at_mean = -2.0 * loglik_at_mean;
    let p_d = mean_dev - dev_at_mean;
    let dic = mean_dev + p_d;

    let eaic = mean_dev + 2.0 * k as f64;
    let ebic = mean_dev + k as f64 * (n as f64).ln();

    // WAIC and truncated-importance-sampling LOOIC per observation.
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    let mut elpd_loo = 0.0;
    let mut max_tail_k: f64 = 0.0;
    let log_cap_base = 0.75 * nf.ln();
    let mut log_w = vec![0.0; n_draws];
    for t in 0..n {
        let col = pointwise.column(t);
        let lse = log_sum_exp(col.iter().copied());
        lppd += lse - nf.ln();
        let mean = col.sum() / nf;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
        p_waic += var;

        for (l, v) in col.iter().enumerate() {
            log_w[l] = -v;
        }
        max_tail_k = max_tail_k.max(tail_shape(&log_w));
        // Cap log-weights at ln(mean w) + (3/4)·ln N.
        let log_mean_w = log_sum_exp(log_w.iter().copied()) - nf.ln();
        let cap = log_mean_w + log_cap_base;
        let num = log_sum_exp(log_w.iter().zip(col.iter()).map(|(w, v)| w.min(cap) + v));
        let den = log_sum_exp(log_w.iter().map(|w| w.min(cap)));
        elpd_loo += num - den;
    }
    let waic = -2.0 * (lppd - p_waic);
    let p_loo = lppd - elpd_loo;
    let looic = -2.0 * elpd_loo;

    Ok(CriteriaReport {
        dic,
        eaic,
        ebic,
        waic,
        looic,
        p_d,
        p_waic,
        p_loo,
        max_tail_k,
        looic_flagged: max_tail_k > 0.7,
    })
}

/// Criteria for a sampled chain: builds the pointwise matrix, evaluates the
/// likelihood at the natural-space image of the unconstrained posterior mean,
/// and hands both to [`compute_criteria`].
pub fn criteria_for_chain(chain: &ChainSample, post: &GarchPosterior) -> Result<CriteriaReport> {
    let pointwise = pointwise_loglik(chain, post)?;
    let d = chain.dim();
    let mean_theta: Vec<f64> = (0..d).map(|j| chain.draws.column(j).sum() / chain.n_draws() as f64).collect();
    let ll_at_mean = post
        .posterior_parts(&mean_theta)
        .ok_or_else(|| Error::numerical("posterior mean lies outside the admissible region"))?
        .log_likelihood;
    compute_criteria(&pointwise, d, ll_at_mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ErrorDist;
    use crate::model::{
        transform, variance_recursion, DistKind, GjrParams, H1Policy, PriorSpec,
    };
    use crate::samplers::{hmc_sample, HmcConfig};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_chain_and_posterior() -> (ChainSample, GarchPosterior) {
        let truth = GjrParams {
            mu: 0.0,
            omega: 0.05,
            alpha: 0.05,
            phi: 0.1,
            beta: 0.85,
            dist: ErrorDist::Normal,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let x = crate::simulate::simulate_series(&truth, 150, &mut rng).unwrap();
        let post = GarchPosterior::new(
            &x,
            DistKind::Normal,
            PriorSpec::all(100.0),
            H1Policy::Unconditional,
            true,
        )
        .unwrap();
        let cfg = HmcConfig::new(0.08, 15, 400, 300, 99);
        let chain = hmc_sample(&post, &cfg, &post.default_init()).unwrap();
        (chain, post)
    }

    #[test]
    fn rows_sum_to_stored_log_likelihood() {
        let (chain, post) = small_chain_and_posterior();
        assert!(chain.log_likelihood.is_some());
        // The internal consistency check runs inside pointwise_loglik.
        let pw = pointwise_loglik(&chain, &post).unwrap();
        let stored = chain.log_likelihood.as_ref().unwrap();
        for l in 0..chain.n_draws() {
            assert_relative_eq!(pw.row(l).sum(), stored[l], epsilon = 1e-8);
        }
    }

    #[test]
    fn corrupted_stored_likelihood_is_detected() {
        let (mut chain, post) = small_chain_and_posterior();
        if let Some(ll) = chain.log_likelihood.as_mut() {
            ll[3] += 0.5;
        }
        assert!(pointwise_loglik(&chain, &post).is_err());
    }

    #[test]
    fn single_observation_pointwise_term() {
        let p = GjrParams {
            mu: 0.0,
            omega: 0.05,
            alpha: 0.05,
            phi: 0.1,
            beta: 0.85,
            dist: ErrorDist::Normal,
        };
        let post = GarchPosterior::new(
            &[0.3],
            DistKind::Normal,
            PriorSpec::all(100.0),
            H1Policy::Unconditional,
            true,
        )
        .unwrap();
        let (u, _) = transform(&p).unwrap();
        let pw = post.pointwise_log_likelihood(u.as_slice()).unwrap();
        let h1 = p.unconditional_variance();
        let expected = p.dist.log_density(0.3 / h1.sqrt()).unwrap() - 0.5 * h1.ln();
        assert_relative_eq!(pw[0], expected, epsilon = 1e-12);
    }

    #[test]
    fn pointwise_matches_brute_force_on_random_draws() {
        let (chain, post) = small_chain_and_posterior();
        let pw = pointwise_loglik(&chain, &post).unwrap();
        for l in [0usize, 97, 201, 355, 399] {
            let theta: Vec<f64> = chain.draws.row(l).iter().copied().collect();
            let p = post.natural_at(&theta);
            let y: Vec<f64> = post.series().iter().map(|v| v - p.mu).collect();
            let h = variance_recursion(&y, &p, H1Policy::Unconditional).unwrap();
            for t in 0..y.len() {
                let expected =
                    p.dist.log_density(y[t] / h[t].sqrt()).unwrap() - 0.5 * h[t].ln();
                assert!(
                    (pw[(l, t)] - expected).abs() < 1e-12,
                    "draw {l} obs {t}: {} vs {expected}",
                    pw[(l, t)]
                );
            }
        }
    }

    #[test]
    fn degenerate_chain_has_zero_effective_parameters() {
        // Identical draws: p_D = 0, p_WAIC = 0, DIC = D(θ̄) = EAIC − 2k.
        let row = [-1.3, -0.9, -1.7, -1.1];
        let mut pw = DMatrix::zeros(120, 4);
        for l in 0..120 {
            for t in 0..4 {
                pw[(l, t)] = row[t];
            }
        }
        let ll: f64 = row.iter().sum();
        let rep = compute_criteria(&pw, 5, ll).unwrap();
        assert_relative_eq!(rep.p_d, 0.0, epsilon = 1e-10);
        assert_relative_eq!(rep.p_waic, 0.0, epsilon = 1e-10);
        assert_relative_eq!(rep.dic, -2.0 * ll, epsilon = 1e-10);
        assert_relative_eq!(rep.eaic, -2.0 * ll + 10.0, epsilon = 1e-10);
        assert_relative_eq!(rep.ebic, -2.0 * ll + 5.0 * 4.0f64.ln(), epsilon = 1e-10);
        assert_relative_eq!(rep.waic, -2.0 * ll, epsilon = 1e-10);
        assert_relative_eq!(rep.looic, -2.0 * ll, epsilon = 1e-10);
        assert!(!rep.looic_flagged);
    }

    #[test]
    fn criteria_shift_by_minus_two_c_under_per_term_shift() {
        let (chain, post) = small_chain_and_posterior();
        let pw = pointwise_loglik(&chain, &post).unwrap();
        let k = 5;
        let mean_theta: Vec<f64> = (0..5)
            .map(|j| chain.draws.column(j).sum() / chain.n_draws() as f64)
            .collect();
        let ll_mean = post.posterior_parts(&mean_theta).unwrap().log_likelihood;
        let base = compute_criteria(&pw, k, ll_mean).unwrap();

        let c = 3.8;
        let per_term = c / pw.ncols() as f64;
        let shifted_pw = pw.map(|v| v + per_term);
        let shifted = compute_criteria(&shifted_pw, k, ll_mean + c).unwrap();

        for (a, b) in [
            (shifted.dic, base.dic),
            (shifted.eaic, base.eaic),
            (shifted.ebic, base.ebic),
            (shifted.waic, base.waic),
            (shifted.looic, base.looic),
        ] {
            assert_relative_eq!(a, b - 2.0 * c, epsilon = 1e-7);
        }
    }

    #[test]
    fn ebic_dominates_eaic_for_eight_or_more_observations() {
        let (chain, post) = small_chain_and_posterior();
        let rep = criteria_for_chain(&chain, &post).unwrap();
        assert!(rep.ebic >= rep.eaic); // n = 150 » 8
    }

    #[test]
    fn waic_close_to_looic_on_well_behaved_chain() {
        let (chain, post) = small_chain_and_posterior();
        let rep = criteria_for_chain(&chain, &post).unwrap();
        assert!(
            (rep.waic - rep.looic).abs() < 2.0,
            "WAIC {} vs LOOIC {}",
            rep.waic,
            rep.looic
        );
        assert!(rep.dic.is_finite() && rep.eaic.is_finite() && rep.ebic.is_finite());
    }
}
