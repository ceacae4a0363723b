//! Case-deletion influence diagnostics.
//!
//! Deleting observation i perturbs the likelihood by
//! δ_i(θ) = p(y_(i)|θ)/p(y|θ). Because h_{i+1} conditions on y_i, the
//! (i+1)-th likelihood term is re-expressed with the one-step-integrated
//! variance h_{i+1} = ω + (α + φ/2 + β)·h_i (the indicator has conditional
//! mean ½ for symmetric innovations); later terms keep the realized y_i in
//! their recursions. The per-observation Kullback-Leibler divergence is then
//! estimated from posterior draws, along with the proportion of draws in
//! which each observation is the most influential one.

use nalgebra::DMatrix;

use crate::distributions::Prepared;
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::model::{variance_recursion, GarchPosterior, GjrParams, H1Policy, UnconstrainedParams};
use crate::samplers::ChainSample;

/// Per-observation influence summary.
#[derive(Debug, Clone)]
pub struct InfluenceReport {
    /// KL̂_i per observation.
    pub kl: Vec<f64>,
    /// P_i: share of draws where observation i is the strict per-draw maximum.
    pub proportions: Vec<f64>,
    pub max_kl_index: usize,
    pub max_p_index: usize,
    /// Observations whose perturbations were numerically unusable.
    pub flagged: Vec<usize>,
}

/// log δ_i for a single observation (0-based `i`) at fixed parameters:
/// the deleted-series log-likelihood minus the full one.
pub fn loo_log_perturbation(i: usize, p: &GjrParams, x: &[f64], h1: H1Policy) -> Result<f64> {
    let all = log_perturbations(p, x, h1)?;
    all.get(i).copied().ok_or_else(|| {
        Error::invalid(format!("observation index {i} out of range for n = {}", x.len()))
    })
}

/// log δ_i for every observation in one pass over the series.
pub fn log_perturbations(p: &GjrParams, x: &[f64], h1: H1Policy) -> Result<Vec<f64>> {
    let y: Vec<f64> = x.iter().map(|v| v - p.mu).collect();
    let h = variance_recursion(&y, p, h1)?;
    let prep = Prepared::new(&p.dist)?;
    let n = y.len();

    let term = |yt: f64, ht: f64| prep.log_density(yt / ht.sqrt()) - 0.5 * ht.ln();
    let terms: Vec<f64> = y.iter().zip(h.iter()).map(|(yt, ht)| term(*yt, *ht)).collect();

    let pers = p.persistence();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut log_delta = -terms[i];
        if i + 1 < n {
            let h_corr = p.omega + pers * h[i];
            log_delta += term(y[i + 1], h_corr) - terms[i + 1];
        }
        out.push(log_delta);
    }
    Ok(out)
}

/// N×n matrix of log δ_i(θ^(l)) over natural-space parameter draws.
pub fn log_perturbation_matrix(
    params: &[GjrParams],
    x: &[f64],
    h1: H1Policy,
    parallel: bool,
) -> Result<DMatrix<f64>> {
    if params.is_empty() {
        return Err(Error::contract("no parameter draws supplied"));
    }
    let n = x.len();
    let rows: Vec<Result<Vec<f64>>> =
        map_indexed(params.len(), parallel, |l| log_perturbations(&params[l], x, h1));
    let mut out = DMatrix::zeros(params.len(), n);
    for (l, row) in rows.into_iter().enumerate() {
        let row = row?;
        for (i, v) in row.into_iter().enumerate() {
            out[(l, i)] = v;
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

/// KL̂ per observation from a log-perturbation matrix:
/// KL̂_i = log δ̄_i − mean_l log δ_i^(l), with δ̄_i computed by a
/// max-shifted log-sum-exp. Tiny Jensen violations (> −1e-8) are clamped to
/// zero; larger ones are an error.
pub fn kl_from_log_perturbations(log_delta: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<usize>)> {
    let n_draws = log_delta.nrows() as f64;
    let mut kl = Vec::with_capacity(log_delta.ncols());
    let mut flagged = Vec::new();
    for i in 0..log_delta.ncols() {
        let col = log_delta.column(i);
        if col.iter().any(|v| !v.is_finite()) {
            flagged.push(i);
            kl.push(f64::NAN);
            continue;
        }
        let log_mean = log_sum_exp(col.iter().copied()) - n_draws.ln();
        let mean_log = col.iter().sum::<f64>() / n_draws;
        let v = log_mean - mean_log;
        if v < -1e-8 {
            return Err(Error::numerical(format!(
                "KL estimate {v} for observation {i} violates Jensen's inequality"
            )));
        }
        kl.push(v.max(0.0));
    }
    Ok((kl, flagged))
}

fn params_from_chain(chain: &ChainSample, post: &GarchPosterior) -> Vec<GjrParams> {
    let kind = post.kind();
    (0..chain.n_draws())
        .map(|l| {
            let values: Vec<f64> = chain.draws.row(l).iter().copied().collect();
            crate::model::inverse_transform(&UnconstrainedParams { kind, values })
        })
        .collect()
}

/// KL̂_i estimated from a sampled chain.
pub fn kl_estimates(chain: &ChainSample, post: &GarchPosterior) -> Result<Vec<f64>> {
    let params = params_from_chain(chain, post);
    let log_delta =
        log_perturbation_matrix(&params, post.series(), post.h1_policy(), true)?;
    Ok(kl_from_log_perturbations(&log_delta)?.0)
}

/// P_i from a log-perturbation matrix: the fraction of draws in which
/// KL_i^(l) = log δ̄_i − log δ_i^(l) strictly exceeds every other
/// observation's value. Ties award no observation.
pub fn proportions_from_log_perturbations(log_delta: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n_draws = log_delta.nrows();
    let n = log_delta.ncols();
    let log_mean: Vec<f64> = (0..n)
        .map(|i| log_sum_exp(log_delta.column(i).iter().copied()) - (n_draws as f64).ln())
        .collect();
    let mut counts = vec![0usize; n];
    if n == 1 {
        return Ok(vec![1.0]);
    }
    for l in 0..n_draws {
        let mut best = f64::NEG_INFINITY;
        let mut best_i = 0usize;
        let mut unique = true;
        for i in 0..n {
            let v = log_mean[i] - log_delta[(l, i)];
            if v > best {
                best = v;
                best_i = i;
                unique = true;
            } else if v == best {
                unique = false;
            }
        }
        if unique && best.is_finite() {
            counts[best_i] += 1;
        }
    }
    Ok(counts.iter().map(|c| *c as f64 / n_draws as f64).collect())
}

/// Influence proportions P_i estimated from a sampled chain.
pub fn influence_proportions(chain: &ChainSample, post: &GarchPosterior) -> Result<Vec<f64>> {
    let params = params_from_chain(chain, post);
    let log_delta =
        log_perturbation_matrix(&params, post.series(), post.h1_policy(), true)?;
    proportions_from_log_perturbations(&log_delta)
}

/// Full influence report (KL̂, P, argmaxes) sharing one perturbation pass.
pub fn influence_report(chain: &ChainSample, post: &GarchPosterior) -> Result<InfluenceReport> {
    let params = params_from_chain(chain, post);
    influence_report_from_params(&params, post.series(), post.h1_policy())
}

/// Influence report from natural-space parameter draws (e.g. a chain file).
pub fn influence_report_from_params(
    params: &[GjrParams],
    x: &[f64],
    h1: H1Policy,
) -> Result<InfluenceReport> {
    let log_delta = log_perturbation_matrix(params, x, h1, true)?;
    let (kl, flagged) = kl_from_log_perturbations(&log_delta)?;
    let proportions = proportions_from_log_perturbations(&log_delta)?;
    let argmax = |xs: &[f64]| {
        xs.iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite values"))
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    Ok(InfluenceReport {
        max_kl_index: argmax(&kl),
        max_p_index: argmax(&proportions),
        kl,
        proportions,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ErrorDist;
    use crate::model::{log_likelihood, GjrParams};
    use approx::assert_relative_eq;

    fn params(dist: ErrorDist) -> GjrParams {
        GjrParams { mu: 0.02, omega: 0.05, alpha: 0.06, phi: 0.1, beta: 0.8, dist }
    }

    /// Brute-force oracle: build the deleted-series log-likelihood term by
    /// term, with the corrected (i+1) variance, and subtract the full one.
    fn brute_force_log_delta(i: usize, p: &GjrParams, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().map(|v| v - p.mu).collect();
        let h = variance_recursion(&y, p, H1Policy::Unconditional).unwrap();
        let lt = |yt: f64, ht: f64| {
            p.dist.log_density(yt / ht.sqrt()).unwrap() - 0.5 * ht.ln()
        };
        let full: f64 = y.iter().zip(h.iter()).map(|(a, b)| lt(*a, *b)).sum();
        let mut deleted = 0.0;
        for t in 0..y.len() {
            if t == i {
                continue;
            }
            if t == i + 1 {
                let hc = p.omega + (p.alpha + p.phi / 2.0 + p.beta) * h[i];
                deleted += lt(y[t], hc);
            } else {
                deleted += lt(y[t], h[t]);
            }
        }
        deleted - full
    }

    #[test]
    fn perturbations_match_brute_force_small_series() {
        let x3 = [0.4, -0.9, 0.3];
        let x5 = [0.4, -0.9, 0.3, 1.1, -0.2];
        for dist in [
            ErrorDist::Normal,
            ErrorDist::StudentT { nu: 7.0 },
            ErrorDist::Ged { nu: 1.2 },
            ErrorDist::GeneralizedT { eta: 1.6, nu: 4.0 },
        ] {
            let p = params(dist);
            for x in [&x3[..], &x5[..]] {
                for i in 0..x.len() {
                    let got = loo_log_perturbation(i, &p, x, H1Policy::Unconditional).unwrap();
                    let want = brute_force_log_delta(i, &p, x);
                    assert!(
                        (got - want).abs() < 1e-12,
                        "{dist:?} i={i}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn deleting_the_last_observation_drops_one_term_only() {
        let p = params(ErrorDist::Normal);
        let x = [0.4, -0.9, 0.3, 1.1];
        let full = log_likelihood(&x, &p, H1Policy::Unconditional).unwrap();
        let y: Vec<f64> = x.iter().map(|v| v - p.mu).collect();
        let h = variance_recursion(&y, &p, H1Policy::Unconditional).unwrap();
        let last = p.dist.log_density(y[3] / h[3].sqrt()).unwrap() - 0.5 * h[3].ln();
        let got = loo_log_perturbation(3, &p, &x, H1Policy::Unconditional).unwrap();
        assert_relative_eq!(got, (full - last) - full, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_model_reduction_when_phi_is_zero() {
        // With φ → 0 the corrected variance is ω + (α+β)h_i.
        let mut p = params(ErrorDist::Normal);
        p.phi = 1e-14;
        let x = [0.4, -0.9, 0.3];
        let y: Vec<f64> = x.iter().map(|v| v - p.mu).collect();
        let h = variance_recursion(&y, &p, H1Policy::Unconditional).unwrap();
        let hc = p.omega + (p.alpha + p.beta) * h[0];
        let lt = |yt: f64, ht: f64| {
            p.dist.log_density(yt / ht.sqrt()).unwrap() - 0.5 * ht.ln()
        };
        let expected = -lt(y[0], h[0]) + lt(y[1], hc) - lt(y[1], h[1]);
        let got = loo_log_perturbation(0, &p, &x, H1Policy::Unconditional).unwrap();
        assert_relative_eq!(got, expected, epsilon = 1e-10);
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let p = params(ErrorDist::Normal);
        assert!(loo_log_perturbation(2, &p, &[0.1, 0.2, 0.3], H1Policy::Unconditional).is_ok());
        assert!(loo_log_perturbation(3, &p, &[0.1, 0.2, 0.3], H1Policy::Unconditional).is_err());
    }

    #[test]
    fn constant_perturbations_give_zero_kl() {
        let log_delta = DMatrix::from_element(50, 4, -1.7);
        let (kl, flagged) = kl_from_log_perturbations(&log_delta).unwrap();
        assert!(flagged.is_empty());
        for v in kl {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn kl_is_nonnegative_by_jensen() {
        let mut log_delta = DMatrix::zeros(200, 6);
        let mut state = 123u64;
        for l in 0..200 {
            for i in 0..6 {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                log_delta[(l, i)] = -2.0 + (state >> 40) as f64 / (1u64 << 24) as f64;
            }
        }
        let (kl, _) = kl_from_log_perturbations(&log_delta).unwrap();
        for v in kl {
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn proportions_partition_draws_with_unique_maxima() {
        let mut log_delta = DMatrix::zeros(100, 5);
        let mut state = 9u64;
        for l in 0..100 {
            for i in 0..5 {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(11);
                log_delta[(l, i)] = ((state >> 33) as f64 / (1u64 << 31) as f64) - 0.5;
            }
        }
        let p = proportions_from_log_perturbations(&log_delta).unwrap();
        let total: f64 = p.iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "sum {total}");
    }

    #[test]
    fn single_observation_series_gets_proportion_one() {
        let log_delta = DMatrix::from_element(10, 1, -0.4);
        let p = proportions_from_log_perturbations(&log_delta).unwrap();
        assert_eq!(p, vec![1.0]);
    }

    #[test]
    fn recomputation_is_deterministic() {
        let p = params(ErrorDist::Ged { nu: 1.1 });
        let x = [0.4, -0.9, 0.3, 1.1, -0.2, 0.8];
        let a = log_perturbations(&p, &x, H1Policy::Unconditional).unwrap();
        let b = log_perturbations(&p, &x, H1Policy::Unconditional).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_and_sequential_matrices_agree() {
        let p = params(ErrorDist::Normal);
        let draws: Vec<GjrParams> = (0..8)
            .map(|k| GjrParams { omega: 0.04 + 0.002 * k as f64, ..p })
            .collect();
        let x = [0.4, -0.9, 0.3, 1.1, -0.2];
        let a = log_perturbation_matrix(&draws, &x, H1Policy::Unconditional, true).unwrap();
        let b = log_perturbation_matrix(&draws, &x, H1Policy::Unconditional, false).unwrap();
        assert_eq!(a, b);
    }
}
