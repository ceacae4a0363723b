//! Zero-variance control-variate post-processing of posterior expectations.
//!
//! For draws θ^(l) with gradients of the log-target, the control variates are
//! z(θ) = −½∇log π(θ). A trial polynomial P turns f into the re-normalized
//! function f̃ = f − ½ΔP + ∇P·z, which keeps the expectation of f but can
//! have far smaller variance. First-degree coefficients come from
//! a = −Var[z]⁻¹Cov[f, z]; second-degree coefficients are fit by least
//! squares on the expanded covariate set, which is numerically equivalent and
//! better conditioned.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{inverse_transform, DistKind, UnconstrainedParams};
use crate::samplers::ChainSample;

/// Control-variate matrix z = −½·gradients, one row per draw.
#[derive(Debug, Clone)]
pub struct ControlVariates {
    pub z: DMatrix<f64>,
}

/// z(θ^(l)) = −½∇log π(θ^(l)) for every stored draw.
pub fn control_variates(chain: &ChainSample) -> Result<ControlVariates> {
    if chain.gradients.nrows() != chain.n_draws() || chain.gradients.ncols() != chain.dim() {
        return Err(Error::contract("chain carries no per-draw gradients"));
    }
    if chain.gradients.iter().any(|g| !g.is_finite()) {
        return Err(Error::contract("chain gradients contain non-finite entries"));
    }
    Ok(ControlVariates { z: chain.gradients.map(|g| -0.5 * g) })
}

/// Quadratic trial-function basis: full symmetric B or diagonal-only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadraticBasis {
    /// P(θ) = a'θ + ½θ'Bθ with all cross terms θ_iθ_j.
    FullSymmetric,
    /// Diagonal B only.
    Diagonal,
}

/// First-degree coefficients for one target function.
#[derive(Debug, Clone)]
pub struct LinearZv {
    pub a: DVector<f64>,
    pub source_seed: u64,
    pub warnings: Vec<String>,
}

/// Second-degree coefficients for one target function.
#[derive(Debug, Clone)]
pub struct QuadraticZv {
    pub a: DVector<f64>,
    /// Symmetric by construction.
    pub b: DMatrix<f64>,
    /// Condition number of the regression design.
    pub condition: f64,
    pub source_seed: u64,
    pub warnings: Vec<String>,
}

/// Coefficients for one target function, both polynomial degrees.
#[derive(Debug, Clone)]
pub struct ZvCoefficients {
    pub linear: LinearZv,
    pub quadratic: QuadraticZv,
}

/// A posterior-mean estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

/// Raw, linear-ZV and quadratic-ZV estimates of one expectation.
#[derive(Debug, Clone)]
pub struct ZvEstimate {
    pub raw: Estimate,
    pub linear: Estimate,
    pub quadratic: Estimate,
    /// Set when the coefficients were fitted on the same chain they are
    /// applied to; estimates remain usable but lose the independence that
    /// guarantees unbiasedness.
    pub same_chain: bool,
}

/// Fits a = −Var[z]⁻¹Cov[f, z] from sample moments. A singular variance
/// matrix falls back to a ridge-regularized solve with a warning.
pub fn fit_linear(chain: &ChainSample, f: &[f64]) -> Result<LinearZv> {
    let n = chain.n_draws();
    let d = chain.dim();
    if f.len() != n {
        return Err(Error::contract("target function length disagrees with chain"));
    }
    if n <= d + 1 {
        return Err(Error::invalid("need more draws than parameters to fit coefficients"));
    }
    let cv = control_variates(chain)?;

    let zbar: Vec<f64> = (0..d).map(|j| cv.z.column(j).sum() / n as f64).collect();
    let fbar = f.iter().sum::<f64>() / n as f64;

    let mut var_z: DMatrix<f64> = DMatrix::zeros(d, d);
    let mut cov_fz: DVector<f64> = DVector::zeros(d);
    for l in 0..n {
        let df = f[l] - fbar;
        for i in 0..d {
            let dzi = cv.z[(l, i)] - zbar[i];
            cov_fz[i] += dzi * df;
            for j in i..d {
                var_z[(i, j)] += dzi * (cv.z[(l, j)] - zbar[j]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        cov_fz[i] /= denom;
        for j in i..d {
            var_z[(i, j)] /= denom;
            var_z[(j, i)] = var_z[(i, j)];
        }
    }

    let mut warnings = Vec::new();
    let a = match Cholesky::new(var_z.clone()) {
        Some(chol) => -chol.solve(&cov_fz),
        None => {
            let scale = var_z.diagonal().sum().max(1e-300) / d as f64;
            let mut lambda = 1e-10 * scale;
            loop {
                let mut ridged = var_z.clone();
                for i in 0..d {
                    ridged[(i, i)] += lambda;
                }
                if let Some(chol) = Cholesky::new(ridged) {
                    warnings.push(format!(
                        "singular control-variate covariance; ridge-regularized with lambda {lambda:.3e}"
                    ));
                    break -chol.solve(&cov_fz);
                }
                lambda *= 10.0;
            }
        }
    };
    Ok(LinearZv { a, source_seed: chain.seed, warnings })
}

fn quadratic_pairs(d: usize, basis: QuadraticBasis) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    match basis {
        QuadraticBasis::FullSymmetric => {
            for i in 0..d {
                for j in i..d {
                    pairs.push((i, j));
                }
            }
        }
        QuadraticBasis::Diagonal => {
            for i in 0..d {
                pairs.push((i, i));
            }
        }
    }
    pairs
}

/// Fits P(θ) = a'θ + ½θ'Bθ by regressing f on the expanded covariate set
/// {z_i} ∪ {θ_i z_j + θ_j z_i} (i ≤ j), intercept absorbing the −½tr(B)
/// constant. An ill-conditioned design switches to a ridge solve and reports
/// the condition number either way.
pub fn fit_quadratic(
    chain: &ChainSample,
    f: &[f64],
    basis: QuadraticBasis,
) -> Result<QuadraticZv> {
    let n = chain.n_draws();
    let d = chain.dim();
    if f.len() != n {
        return Err(Error::contract("target function length disagrees with chain"));
    }
    let pairs = quadratic_pairs(d, basis);
    let p = 1 + d + pairs.len();
    if n <= p {
        return Err(Error::invalid(format!(
            "need more than {p} draws to fit the quadratic basis, got {n}"
        )));
    }
    let cv = control_variates(chain)?;

    let mut x = DMatrix::zeros(n, p);
    for l in 0..n {
        x[(l, 0)] = 1.0;
        for j in 0..d {
            x[(l, 1 + j)] = cv.z[(l, j)];
        }
        for (k, &(i, j)) in pairs.iter().enumerate() {
            x[(l, 1 + d + k)] =
                chain.draws[(l, i)] * cv.z[(l, j)] + chain.draws[(l, j)] * cv.z[(l, i)];
        }
    }
    let fv = DVector::from_column_slice(f);

    let mut warnings = Vec::new();
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    let coeffs = if condition < 1e10 {
        svd.solve(&fv, 0.0).map_err(Error::numerical)?
    } else {
        warnings.push(format!(
            "quadratic design condition number {condition:.3e}; using ridge-regularized solve"
        ));
        let xtx = x.transpose() * &x;
        let xtf = x.transpose() * &fv;
        let scale = xtx.diagonal().sum().max(1e-300) / p as f64;
        let mut lambda = 1e-10 * scale;
        loop {
            let mut ridged = xtx.clone();
            for i in 0..p {
                ridged[(i, i)] += lambda;
            }
            if let Some(chol) = Cholesky::new(ridged) {
                break chol.solve(&xtf);
            }
            lambda *= 10.0;
        }
    };

    // Translate regression coefficients into the polynomial: minimizing
    // Var(f − c'u) gives the trial function with a = −c_z and
    // B_ij = −c_ij (i<j), B_ii = −2·c_ii (since g_ii = 2θ_i z_i).
    let a = DVector::from_fn(d, |j, _| -coeffs[1 + j]);
    let mut b = DMatrix::zeros(d, d);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let c = coeffs[1 + d + k];
        if i == j {
            b[(i, i)] = -2.0 * c;
        } else {
            b[(i, j)] = -c;
            b[(j, i)] = -c;
        }
    }
    Ok(QuadraticZv { a, b, condition, source_seed: chain.seed, warnings })
}

/// Applies fitted coefficients to the estimation chain: means of the raw f,
/// linear f̃ = f + a'z, and quadratic f̃ = f − ½tr(B) + (a + Bθ)'z, each with
/// a batch-means Monte Carlo standard error.
pub fn apply(chain: &ChainSample, coefficients: &ZvCoefficients, f: &[f64]) -> Result<ZvEstimate> {
    let n = chain.n_draws();
    let d = chain.dim();
    if f.len() != n {
        return Err(Error::contract("target function length disagrees with chain"));
    }
    if coefficients.linear.a.len() != d || coefficients.quadratic.a.len() != d {
        return Err(Error::contract("coefficient dimension disagrees with chain"));
    }
    let cv = control_variates(chain)?;

    let mut f_lin = Vec::with_capacity(n);
    let mut f_quad = Vec::with_capacity(n);
    let half_tr_b = 0.5 * coefficients.quadratic.b.diagonal().sum();
    for l in 0..n {
        let mut lin = f[l];
        let mut quad = f[l] - half_tr_b;
        for k in 0..d {
            let zk = cv.z[(l, k)];
            lin += coefficients.linear.a[k] * zk;
            let mut gk = coefficients.quadratic.a[k];
            for m in 0..d {
                gk += coefficients.quadratic.b[(k, m)] * chain.draws[(l, m)];
            }
            quad += gk * zk;
        }
        f_lin.push(lin);
        f_quad.push(quad);
    }

    let estimate = |xs: &[f64]| Estimate {
        mean: xs.iter().sum::<f64>() / xs.len() as f64,
        se: mcse_batch_means(xs),
    };
    Ok(ZvEstimate {
        raw: estimate(f),
        linear: estimate(&f_lin),
        quadratic: estimate(&f_quad),
        same_chain: coefficients.linear.source_seed == chain.seed
            || coefficients.quadratic.source_seed == chain.seed,
    })
}

/// Monte Carlo standard error of the mean by non-overlapping batch means with
/// ⌊√N⌋ batches.
pub fn mcse_batch_means(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let k = (n as f64).sqrt().floor() as usize;
    if k < 2 {
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        return (var / n as f64).sqrt();
    }
    let m = n / k;
    let used = k * m;
    let mut batch_means = Vec::with_capacity(k);
    for b in 0..k {
        let s: f64 = xs[b * m..(b + 1) * m].iter().sum();
        batch_means.push(s / m as f64);
    }
    let grand = batch_means.iter().sum::<f64>() / k as f64;
    let ss: f64 = batch_means.iter().map(|v| (v - grand) * (v - grand)).sum();
    let _ = used;
    (ss / (k as f64 * (k - 1) as f64)).sqrt()
}

/// Natural-space parameter values for every draw: n_draws × dim, columns in
/// [`DistKind::param_names`] order.
pub fn natural_draws(chain: &ChainSample, kind: DistKind) -> DMatrix<f64> {
    let n = chain.n_draws();
    let d = chain.dim();
    let mut out = DMatrix::zeros(n, d);
    let mut buf = UnconstrainedParams { kind, values: vec![0.0; d] };
    for l in 0..n {
        for j in 0..d {
            buf.values[j] = chain.draws[(l, j)];
        }
        let p = inverse_transform(&buf);
        for (j, v) in p.natural_values().iter().enumerate() {
            out[(l, j)] = *v;
        }
    }
    out
}

/// Raw/linear/quadratic summary for one natural-space parameter.
#[derive(Debug, Clone)]
pub struct ParamSummary {
    pub name: &'static str,
    pub estimate: ZvEstimate,
}

/// Full posterior summary: fits coefficients for each natural-space
/// parameter on `coef_chain` and estimates on `est_chain` (the two-chain
/// protocol; passing the same chain twice is allowed and flagged).
pub fn posterior_summary(
    coef_chain: &ChainSample,
    est_chain: &ChainSample,
    kind: DistKind,
) -> Result<Vec<ParamSummary>> {
    let names = kind.param_names();
    let coef_nat = natural_draws(coef_chain, kind);
    let est_nat = natural_draws(est_chain, kind);
    let mut out = Vec::with_capacity(names.len());
    for (j, name) in names.into_iter().enumerate() {
        let f_coef: Vec<f64> = coef_nat.column(j).iter().copied().collect();
        let coeffs = ZvCoefficients {
            linear: fit_linear(coef_chain, &f_coef)?,
            quadratic: fit_quadratic(coef_chain, &f_coef, QuadraticBasis::FullSymmetric)?,
        };
        let f_est: Vec<f64> = est_nat.column(j).iter().copied().collect();
        out.push(ParamSummary { name, estimate: apply(est_chain, &coeffs, &f_est)? });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::ChainSample;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Synthetic chain of iid N(m, sigma²) draws with exact gradients
    /// ∇log π = −(θ−m)/σ².
    fn gaussian_chain(m: f64, sigma: f64, n: usize, seed: u64) -> ChainSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draws = DMatrix::zeros(n, 1);
        let mut grads = DMatrix::zeros(n, 1);
        let mut lps = Vec::with_capacity(n);
        for l in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            let theta = m + sigma * z;
            draws[(l, 0)] = theta;
            grads[(l, 0)] = -(theta - m) / (sigma * sigma);
            lps.push(-0.5 * z * z);
        }
        ChainSample::from_parts(draws, lps, grads, None, seed).unwrap()
    }

    #[test]
    fn control_variates_are_half_negative_gradients() {
        let chain = gaussian_chain(1.0, 2.0, 64, 5);
        let cv = control_variates(&chain).unwrap();
        for l in 0..chain.n_draws() {
            assert_eq!(cv.z[(l, 0)], -0.5 * chain.gradients[(l, 0)]);
        }
        // Closed form for the Gaussian target: z = (θ − m)/(2σ²).
        for l in 0..chain.n_draws() {
            let expected = (chain.draws[(l, 0)] - 1.0) / (2.0 * 4.0);
            assert_relative_eq!(cv.z[(l, 0)], expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn linear_zv_is_exact_for_gaussian_identity_function() {
        let (m, sigma) = (2.5, 1.3);
        let coef_chain = gaussian_chain(m, sigma, 500, 11);
        let est_chain = gaussian_chain(m, sigma, 500, 12);
        let f_coef: Vec<f64> = coef_chain.draws.column(0).iter().copied().collect();
        let lin = fit_linear(&coef_chain, &f_coef).unwrap();
        // a = −Var[z]⁻¹Cov[f,z] = −2σ² exactly: sample moments cancel.
        assert_relative_eq!(lin.a[0], -2.0 * sigma * sigma, epsilon = 1e-9);

        let quad = fit_quadratic(&coef_chain, &f_coef, QuadraticBasis::FullSymmetric).unwrap();
        let f_est: Vec<f64> = est_chain.draws.column(0).iter().copied().collect();
        let est = apply(
            &est_chain,
            &ZvCoefficients { linear: lin, quadratic: quad },
            &f_est,
        )
        .unwrap();
        assert!(!est.same_chain);
        assert_relative_eq!(est.linear.mean, m, epsilon = 1e-10);
        assert!(est.linear.se < 1e-10, "se {}", est.linear.se);

        let raw_var = {
            let mean = est.raw.mean;
            f_est.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (f_est.len() - 1) as f64
        };
        let lin_var = {
            // Reconstruct the re-normalized values to measure their variance.
            let cv = control_variates(&est_chain).unwrap();
            let a = -2.0 * sigma * sigma;
            let vals: Vec<f64> = (0..est_chain.n_draws())
                .map(|l| f_est[l] + a * cv.z[(l, 0)])
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64
        };
        assert!(lin_var <= 1e-20 * raw_var, "{lin_var} vs {raw_var}");
    }

    #[test]
    fn quadratic_zv_is_exact_for_gaussian_second_moment() {
        let (m, sigma) = (0.8, 0.9);
        let coef_chain = gaussian_chain(m, sigma, 600, 21);
        let est_chain = gaussian_chain(m, sigma, 600, 22);
        let f_coef: Vec<f64> =
            coef_chain.draws.column(0).iter().map(|t| t * t).collect();
        let coeffs = ZvCoefficients {
            linear: fit_linear(&coef_chain, &f_coef).unwrap(),
            quadratic: fit_quadratic(&coef_chain, &f_coef, QuadraticBasis::FullSymmetric)
                .unwrap(),
        };
        let f_est: Vec<f64> = est_chain.draws.column(0).iter().map(|t| t * t).collect();
        let est = apply(&est_chain, &coeffs, &f_est).unwrap();
        assert_relative_eq!(est.quadratic.mean, m * m + sigma * sigma, epsilon = 1e-9);
        assert!(est.quadratic.se < 1e-9, "se {}", est.quadratic.se);
        // Fitted coefficients satisfy the closed form B = −2σ², a = −2σ²m.
        assert_relative_eq!(coeffs.quadratic.b[(0, 0)], -2.0 * sigma * sigma, epsilon = 1e-6);
        assert_relative_eq!(
            coeffs.quadratic.a[0],
            -2.0 * sigma * sigma * m,
            epsilon = 1e-6
        );
    }

    #[test]
    fn constant_function_yields_zero_coefficients() {
        let chain = gaussian_chain(0.0, 1.0, 300, 31);
        let f = vec![3.25; 300];
        let lin = fit_linear(&chain, &f).unwrap();
        assert!(lin.a[0].abs() < 1e-12);
        let est = apply(
            &chain,
            &ZvCoefficients {
                linear: lin,
                quadratic: fit_quadratic(&chain, &f, QuadraticBasis::FullSymmetric).unwrap(),
            },
            &f,
        )
        .unwrap();
        assert!(est.same_chain);
        assert_relative_eq!(est.raw.mean, 3.25, epsilon = 1e-14);
        assert_relative_eq!(est.linear.mean, 3.25, epsilon = 1e-10);
    }

    #[test]
    fn linear_formula_matches_ols_regression() {
        // Independent route: OLS slope of f on z with intercept equals −a.
        let chain = gaussian_chain(1.5, 0.7, 400, 41);
        let f: Vec<f64> =
            chain.draws.column(0).iter().map(|t| t.sin() + 0.3 * t).collect();
        let lin = fit_linear(&chain, &f).unwrap();

        let cv = control_variates(&chain).unwrap();
        let n = chain.n_draws();
        let mut x = DMatrix::zeros(n, 2);
        for l in 0..n {
            x[(l, 0)] = 1.0;
            x[(l, 1)] = cv.z[(l, 0)];
        }
        let fv = DVector::from_column_slice(&f);
        let xtx = x.transpose() * &x;
        let xtf = x.transpose() * &fv;
        let sol = Cholesky::new(xtx).unwrap().solve(&xtf);
        assert_relative_eq!(lin.a[0], -sol[1], epsilon = 1e-10);
    }

    #[test]
    fn zero_coefficients_reproduce_raw_mean_exactly() {
        let chain = gaussian_chain(0.3, 1.1, 256, 51);
        let f: Vec<f64> = chain.draws.column(0).iter().copied().collect();
        let coeffs = ZvCoefficients {
            linear: LinearZv { a: DVector::zeros(1), source_seed: 0, warnings: vec![] },
            quadratic: QuadraticZv {
                a: DVector::zeros(1),
                b: DMatrix::zeros(1, 1),
                condition: 1.0,
                source_seed: 0,
                warnings: vec![],
            },
        };
        let est = apply(&chain, &coeffs, &f).unwrap();
        assert_eq!(est.raw.mean, est.linear.mean);
        assert_eq!(est.raw.mean, est.quadratic.mean);
        assert_eq!(est.raw.se, est.linear.se);
    }

    #[test]
    fn constant_shift_moves_all_estimates_by_that_constant() {
        let coef_chain = gaussian_chain(0.0, 1.0, 300, 61);
        let est_chain = gaussian_chain(0.0, 1.0, 300, 62);
        let f: Vec<f64> = est_chain.draws.column(0).iter().map(|t| t * t * t).collect();
        let f_coef: Vec<f64> =
            coef_chain.draws.column(0).iter().map(|t| t * t * t).collect();
        let fit = |fc: &[f64]| ZvCoefficients {
            linear: fit_linear(&coef_chain, fc).unwrap(),
            quadratic: fit_quadratic(&coef_chain, fc, QuadraticBasis::FullSymmetric).unwrap(),
        };
        let base = apply(&est_chain, &fit(&f_coef), &f).unwrap();
        let c = 4.75;
        let f_shift: Vec<f64> = f.iter().map(|v| v + c).collect();
        let fc_shift: Vec<f64> = f_coef.iter().map(|v| v + c).collect();
        let shifted = apply(&est_chain, &fit(&fc_shift), &f_shift).unwrap();
        assert_relative_eq!(shifted.raw.mean, base.raw.mean + c, epsilon = 1e-10);
        assert_relative_eq!(shifted.linear.mean, base.linear.mean + c, epsilon = 1e-8);
        assert_relative_eq!(shifted.quadratic.mean, base.quadratic.mean + c, epsilon = 1e-8);
    }

    #[test]
    fn symmetric_b_by_construction() {
        let chain = gaussian_chain(0.0, 1.0, 500, 71);
        let f: Vec<f64> = chain.draws.column(0).iter().map(|t| t * t).collect();
        let quad = fit_quadratic(&chain, &f, QuadraticBasis::FullSymmetric).unwrap();
        assert_eq!(quad.b, quad.b.transpose());
        let diag = fit_quadratic(&chain, &f, QuadraticBasis::Diagonal).unwrap();
        assert_eq!(diag.b, diag.b.transpose());
    }

    #[test]
    fn unbiased_for_nonpolynomial_function_of_gaussian() {
        // E[θ³] = m³ + 3mσ² for N(m, σ²); ZV estimates agree within 3 MCSEs.
        let (m, sigma) = (1.0, 0.5);
        let truth = m * m * m + 3.0 * m * sigma * sigma;
        let coef_chain = gaussian_chain(m, sigma, 2000, 81);
        let est_chain = gaussian_chain(m, sigma, 2000, 82);
        let g = |c: &ChainSample| -> Vec<f64> {
            c.draws.column(0).iter().map(|t| t * t * t).collect()
        };
        let coeffs = ZvCoefficients {
            linear: fit_linear(&coef_chain, &g(&coef_chain)).unwrap(),
            quadratic: fit_quadratic(&coef_chain, &g(&coef_chain), QuadraticBasis::FullSymmetric)
                .unwrap(),
        };
        let est = apply(&est_chain, &coeffs, &g(&est_chain)).unwrap();
        for e in [est.raw, est.linear, est.quadratic] {
            assert!(
                (e.mean - truth).abs() < 3.0 * e.se.max(1e-12),
                "mean {} vs truth {truth} (se {})",
                e.mean,
                e.se
            );
        }
        assert!(est.quadratic.se < est.raw.se);
    }

    #[test]
    fn mcse_batch_means_basics() {
        // Constant series has zero batch-means error.
        assert_eq!(mcse_batch_means(&vec![2.0; 100]), 0.0);
        // Iid normal: MCSE should be close to sd/sqrt(n).
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let se = mcse_batch_means(&xs);
        let expected = 1.0 / (xs.len() as f64).sqrt();
        assert!((se / expected - 1.0).abs() < 0.35, "se {se} vs {expected}");
    }
}
