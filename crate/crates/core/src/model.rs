//! GJR-GARCH(1,1) model: variance recursion, log-likelihood, truncated-normal
//! priors, unconstraining parameter transforms with Jacobians, and the
//! analytic gradient of the unconstrained log-posterior.
//!
//! The return equation is x_t = y_t + μ with y_t = ε_t·√h_t and
//!
//! ```text
//! h_t = ω + (α + φ·I_{t-1})·y²_{t-1} + β·h_{t-1},   I_t = 1 if y_t ≤ 0
//! ```
//!
//! Positivity needs ω > 0 and covariance stationarity α + φ/2 + β < 1.
//! Sampling happens on ℝ^d after the transforms ω* = ln ω, α* = logit α,
//! φ* = ln(φ/(2−φ)), β* = logit β, plus shape transforms matching each
//! distribution's lower bound.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::distributions::{ErrorDist, Prepared, LN_2PI};
use crate::error::{Error, Result};
use crate::samplers::Target;

/// Distribution family tag, without shape values. Determines the dimension
/// and layout of the unconstrained parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistKind {
    Normal,
    StudentT,
    Ged,
    GeneralizedT,
}

impl DistKind {
    pub fn shape_dim(self) -> usize {
        match self {
            DistKind::Normal => 0,
            DistKind::StudentT | DistKind::Ged => 1,
            DistKind::GeneralizedT => 2,
        }
    }

    /// Dimension of the sampled parameter vector: (μ, ω, α, φ, β) + shapes.
    pub fn dim(self) -> usize {
        5 + self.shape_dim()
    }

    /// Natural-space parameter names, in vector order.
    pub fn param_names(self) -> Vec<&'static str> {
        let mut names = vec!["mu", "omega", "alpha", "phi", "beta"];
        match self {
            DistKind::Normal => {}
            DistKind::StudentT | DistKind::Ged => names.push("nu"),
            DistKind::GeneralizedT => {
                names.push("nu");
                names.push("eta");
            }
        }
        names
    }

    pub fn of(dist: &ErrorDist) -> DistKind {
        match dist {
            ErrorDist::Normal => DistKind::Normal,
            ErrorDist::StudentT { .. } => DistKind::StudentT,
            ErrorDist::Ged { .. } => DistKind::Ged,
            ErrorDist::GeneralizedT { .. } => DistKind::GeneralizedT,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DistKind::Normal => "normal",
            DistKind::StudentT => "t",
            DistKind::Ged => "ged",
            DistKind::GeneralizedT => "gt",
        }
    }
}

/// Natural-space parameters of the GJR-GARCH(1,1) model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GjrParams {
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    pub phi: f64,
    pub beta: f64,
    pub dist: ErrorDist,
}

impl GjrParams {
    /// Volatility persistence α + φ/2 + β; < 1 for covariance stationarity.
    pub fn persistence(&self) -> f64 {
        self.alpha + 0.5 * self.phi + self.beta
    }

    /// Unconditional variance ω / (1 − α − φ/2 − β).
    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.persistence())
    }

    pub fn kind(&self) -> DistKind {
        DistKind::of(&self.dist)
    }

    /// Full natural parameter vector (μ, ω, α, φ, β, shapes...).
    pub fn natural_values(&self) -> Vec<f64> {
        let mut v = vec![self.mu, self.omega, self.alpha, self.phi, self.beta];
        v.extend(self.dist.shape_values());
        v
    }

    /// Checks positivity, range and stationarity constraints.
    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::invalid(format!("mu must be finite, got {}", self.mu)));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::invalid(format!("omega must be > 0, got {}", self.omega)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.phi > 0.0 && self.phi < 2.0) {
            return Err(Error::invalid(format!("phi must lie in (0, 2), got {}", self.phi)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::invalid(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        self.dist.validate()?;
        if self.persistence() >= 1.0 {
            return Err(Error::invalid(format!(
                "alpha + phi/2 + beta = {} violates stationarity (< 1)",
                self.persistence()
            )));
        }
        Ok(())
    }
}

/// Variances of the zero-mean truncated-normal priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub var_mu: f64,
    pub var_omega: f64,
    pub var_alpha: f64,
    pub var_phi: f64,
    pub var_beta: f64,
    pub var_nu: f64,
    pub var_eta: f64,
}

impl PriorSpec {
    /// All prior variances set to the same value.
    pub fn all(v: f64) -> Self {
        PriorSpec {
            var_mu: v,
            var_omega: v,
            var_alpha: v,
            var_phi: v,
            var_beta: v,
            var_nu: v,
            var_eta: v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("var_mu", self.var_mu),
            ("var_omega", self.var_omega),
            ("var_alpha", self.var_alpha),
            ("var_phi", self.var_phi),
            ("var_beta", self.var_beta),
            ("var_nu", self.var_nu),
            ("var_eta", self.var_eta),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("prior variance {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// How h₁ is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum H1Policy {
    /// h₁ = ω / (1 − α − φ/2 − β). Keeps the likelihood a pure function of
    /// the parameters; requires stationarity.
    Unconditional,
    /// h₁ = mean-centered sample variance of the observed series. Parameter
    /// free, so its sensitivities vanish.
    SampleVariance,
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn population_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

fn check_finite_series(y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::data(0, "series must have at least one observation"));
    }
    for (i, v) in y.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::data(i, format!("non-finite value {v}")));
        }
    }
    Ok(())
}

/// Conditional-variance series for centered returns `y`.
///
/// h_t = ω + (α + φ·I_{t-1})·y²_{t-1} + β·h_{t-1} for t ≥ 2, with h₁ chosen
/// by `h1`. The indicator is I = 1 when y ≤ 0.
pub fn variance_recursion(y: &[f64], p: &GjrParams, h1: H1Policy) -> Result<Vec<f64>> {
    check_finite_series(y)?;
    p.validate()?;
    let h_init = match h1 {
        H1Policy::Unconditional => p.unconditional_variance(),
        H1Policy::SampleVariance => population_variance(y),
    };
    let mut h = Vec::with_capacity(y.len());
    h.push(h_init);
    for t in 1..y.len() {
        let prev = y[t - 1];
        let indicator = if prev <= 0.0 { 1.0 } else { 0.0 };
        h.push(p.omega + (p.alpha + p.phi * indicator) * prev * prev + p.beta * h[t - 1]);
    }
    Ok(h)
}

/// Log-likelihood of the observed series `x`; y_t = x_t − μ internally.
pub fn log_likelihood(x: &[f64], p: &GjrParams, h1: H1Policy) -> Result<f64> {
    let y: Vec<f64> = x.iter().map(|v| v - p.mu).collect();
    let h = variance_recursion(&y, p, h1)?;
    let prep = Prepared::new(&p.dist)?;
    let mut ll = 0.0;
    for (yt, ht) in y.iter().zip(h.iter()) {
        ll += prep.log_density(yt / ht.sqrt()) - 0.5 * ht.ln();
    }
    Ok(ll)
}

/// Log-prior of the natural-space parameters: independent zero-mean normals
/// truncated to each parameter's support, with truncation normalizers
/// included. Returns −∞ outside the support, and (when `enforce_stationarity`)
/// outside the stationarity region.
pub fn log_prior(p: &GjrParams, s: &PriorSpec, enforce_stationarity: bool) -> f64 {
    if !(p.omega > 0.0)
        || !(p.alpha > 0.0 && p.alpha < 1.0)
        || !(p.phi > 0.0 && p.phi < 2.0)
        || !(p.beta > 0.0 && p.beta < 1.0)
        || !p.mu.is_finite()
    {
        return f64::NEG_INFINITY;
    }
    if enforce_stationarity && p.persistence() >= 1.0 {
        return f64::NEG_INFINITY;
    }

    let norm_term = |value: f64, var: f64, log_z: f64| {
        -0.5 * (LN_2PI + var.ln()) - value * value / (2.0 * var) - log_z
    };

    let mut lp = norm_term(p.mu, s.var_mu, 0.0);
    lp += norm_term(p.omega, s.var_omega, 0.5f64.ln());
    lp += norm_term(p.alpha, s.var_alpha, (normal_cdf(1.0 / s.var_alpha.sqrt()) - 0.5).ln());
    lp += norm_term(p.phi, s.var_phi, (normal_cdf(2.0 / s.var_phi.sqrt()) - 0.5).ln());
    lp += norm_term(p.beta, s.var_beta, (normal_cdf(1.0 / s.var_beta.sqrt()) - 0.5).ln());

    match p.dist {
        ErrorDist::Normal => {}
        ErrorDist::StudentT { nu } => {
            if nu <= 2.0 {
                return f64::NEG_INFINITY;
            }
            lp += norm_term(nu, s.var_nu, (1.0 - normal_cdf(2.0 / s.var_nu.sqrt())).ln());
        }
        ErrorDist::Ged { nu } => {
            if nu <= 0.0 {
                return f64::NEG_INFINITY;
            }
            lp += norm_term(nu, s.var_nu, 0.5f64.ln());
        }
        ErrorDist::GeneralizedT { eta, nu } => {
            if eta <= 1.0 || nu <= 1.0 / eta {
                return f64::NEG_INFINITY;
            }
            lp += norm_term(eta, s.var_eta, (1.0 - normal_cdf(1.0 / s.var_eta.sqrt())).ln());
            // The truncation point of ν depends on η, so its normalizer does too.
            let z = 1.0 - normal_cdf(1.0 / (eta * s.var_nu.sqrt()));
            lp += norm_term(nu, s.var_nu, z.ln());
        }
    }
    lp
}

/// A point in the unconstrained sampling space ℝ^d, ordered
/// (μ, ω*, α*, φ*, β*, shapes*...).
#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedParams {
    pub kind: DistKind,
    pub values: Vec<f64>,
}

impl UnconstrainedParams {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Maps natural parameters to the unconstrained space, returning the point
/// and the log-Jacobian log|∂p/∂θ*| there, so that the unconstrained
/// log-posterior is log L + log prior + log-Jacobian.
pub fn transform(p: &GjrParams) -> Result<(UnconstrainedParams, f64)> {
    p.validate()?;
    let mut v = vec![
        p.mu,
        p.omega.ln(),
        logit(p.alpha),
        (p.phi / (2.0 - p.phi)).ln(),
        logit(p.beta),
    ];
    match p.dist {
        ErrorDist::Normal => {}
        ErrorDist::StudentT { nu } => v.push((nu - 2.0).ln()),
        ErrorDist::Ged { nu } => v.push(nu.ln()),
        ErrorDist::GeneralizedT { eta, nu } => {
            v.push((nu - 1.0 / eta).ln());
            v.push((eta - 1.0).ln());
        }
    }
    let u = UnconstrainedParams { kind: p.kind(), values: v };
    let lj = log_jacobian_at(p);
    Ok((u, lj))
}

/// Maps an unconstrained point back to natural parameters. Total on ℝ^d;
/// a generalized-t result may still violate the unit-variance bound ν > 2/η,
/// which density evaluation treats as out of support.
pub fn inverse_transform(u: &UnconstrainedParams) -> GjrParams {
    let v = &u.values;
    let dist = match u.kind {
        DistKind::Normal => ErrorDist::Normal,
        DistKind::StudentT => ErrorDist::StudentT { nu: 2.0 + v[5].exp() },
        DistKind::Ged => ErrorDist::Ged { nu: v[5].exp() },
        DistKind::GeneralizedT => {
            let eta = 1.0 + v[6].exp();
            ErrorDist::GeneralizedT { eta, nu: 1.0 / eta + v[5].exp() }
        }
    };
    GjrParams {
        mu: v[0],
        omega: v[1].exp(),
        alpha: sigmoid(v[2]),
        phi: 2.0 * sigmoid(v[3]),
        beta: sigmoid(v[4]),
        dist,
    }
}

/// log|∂p/∂θ*| evaluated at the natural-space point `p`.
pub fn log_jacobian_at(p: &GjrParams) -> f64 {
    let mut lj = p.omega.ln()
        + p.alpha.ln()
        + (1.0 - p.alpha).ln()
        + p.phi.ln()
        + (2.0 - p.phi).ln()
        - std::f64::consts::LN_2
        + p.beta.ln()
        + (1.0 - p.beta).ln();
    match p.dist {
        ErrorDist::Normal => {}
        ErrorDist::StudentT { nu } => lj += (nu - 2.0).ln(),
        ErrorDist::Ged { nu } => lj += nu.ln(),
        ErrorDist::GeneralizedT { eta, nu } => {
            // Triangular Jacobian of (ν, η) in (ν*, η*): |det| = (ν − 1/η)(η − 1).
            lj += (nu - 1.0 / eta).ln() + (eta - 1.0).ln();
        }
    }
    lj
}

/// log|∂p/∂θ*| at an unconstrained point.
pub fn log_jacobian(u: &UnconstrainedParams) -> f64 {
    log_jacobian_at(&inverse_transform(u))
}

/// Log-posterior and log-likelihood values at one unconstrained point.
#[derive(Debug, Clone, Copy)]
pub struct PosteriorParts {
    pub log_posterior: f64,
    pub log_likelihood: f64,
}

/// The unconstrained log-posterior of a GJR-GARCH(1,1) model on a fixed
/// series. Implements [`Target`] for the samplers; evaluation is pure, so a
/// shared reference can be used concurrently.
#[derive(Debug, Clone)]
pub struct GarchPosterior {
    x: Vec<f64>,
    kind: DistKind,
    prior: PriorSpec,
    h1: H1Policy,
    enforce_stationarity: bool,
    sample_var_x: f64,
    mean_x: f64,
}

impl GarchPosterior {
    pub fn new(
        x: &[f64],
        kind: DistKind,
        prior: PriorSpec,
        h1: H1Policy,
        enforce_stationarity: bool,
    ) -> Result<Self> {
        check_finite_series(x)?;
        prior.validate()?;
        let n = x.len() as f64;
        Ok(GarchPosterior {
            x: x.to_vec(),
            kind,
            prior,
            h1,
            enforce_stationarity,
            sample_var_x: population_variance(x),
            mean_x: x.iter().sum::<f64>() / n,
        })
    }

    pub fn kind(&self) -> DistKind {
        self.kind
    }

    pub fn series(&self) -> &[f64] {
        &self.x
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn h1_policy(&self) -> H1Policy {
        self.h1
    }

    pub fn n_obs(&self) -> usize {
        self.x.len()
    }

    /// Starting point: μ = sample mean, ω = 0.1·var(x), α = 0.05, φ = 0.1,
    /// β = 0.8, shape defaults ν = 8 (Student-t), ν = 2 (GED, the normal
    /// special case) and (ν, η) = (8, 2), mapped to ℝ^d.
    pub fn default_init(&self) -> Vec<f64> {
        let dist = match self.kind {
            DistKind::Normal => ErrorDist::Normal,
            DistKind::StudentT => ErrorDist::StudentT { nu: 8.0 },
            DistKind::Ged => ErrorDist::Ged { nu: 2.0 },
            DistKind::GeneralizedT => ErrorDist::GeneralizedT { eta: 2.0, nu: 8.0 },
        };
        let p = GjrParams {
            mu: self.mean_x,
            omega: (0.1 * self.sample_var_x).max(1e-12),
            alpha: 0.05,
            phi: 0.1,
            beta: 0.8,
            dist,
        };
        let (u, _) = transform(&p).expect("default init is inside the support");
        u.values
    }

    fn params_at(&self, theta: &[f64]) -> GjrParams {
        inverse_transform(&UnconstrainedParams { kind: self.kind, values: theta.to_vec() })
    }

    /// Natural parameters at an unconstrained point.
    pub fn natural_at(&self, theta: &[f64]) -> GjrParams {
        self.params_at(theta)
    }

    fn h_init(&self, p: &GjrParams) -> Option<f64> {
        match self.h1 {
            H1Policy::Unconditional => {
                if p.persistence() >= 1.0 {
                    None
                } else {
                    Some(p.unconditional_variance())
                }
            }
            H1Policy::SampleVariance => {
                if self.enforce_stationarity && p.persistence() >= 1.0 {
                    None
                } else {
                    Some(self.sample_var_x)
                }
            }
        }
    }

    /// Log-posterior (likelihood + prior + log-Jacobian) at `theta`.
    /// Returns −∞ outside the admissible region.
    pub fn log_posterior(&self, theta: &[f64]) -> f64 {
        self.posterior_parts(theta).map_or(f64::NEG_INFINITY, |p| p.log_posterior)
    }

    /// Log-posterior and log-likelihood together, `None` off support.
    pub fn posterior_parts(&self, theta: &[f64]) -> Option<PosteriorParts> {
        assert_eq!(theta.len(), self.dim(), "parameter dimension mismatch");
        let p = self.params_at(theta);
        if p.dist.validate().is_err() {
            return None;
        }
        let lp_prior = log_prior(&p, &self.prior, self.enforce_stationarity);
        if !lp_prior.is_finite() {
            return None;
        }
        let h1 = self.h_init(&p)?;
        let prep = Prepared::new(&p.dist).ok()?;

        let mut ll = 0.0;
        let mut h = h1;
        let mut prev_y = 0.0;
        for (t, xt) in self.x.iter().enumerate() {
            if t > 0 {
                let indicator = if prev_y <= 0.0 { 1.0 } else { 0.0 };
                h = p.omega + (p.alpha + p.phi * indicator) * prev_y * prev_y + p.beta * h;
            }
            let yt = xt - p.mu;
            ll += prep.log_density(yt / h.sqrt()) - 0.5 * h.ln();
            prev_y = yt;
        }
        if !ll.is_finite() {
            return None;
        }
        let log_post = ll + lp_prior + log_jacobian_at(&p);
        if !log_post.is_finite() {
            return None;
        }
        Some(PosteriorParts { log_posterior: log_post, log_likelihood: ll })
    }

    /// Analytic gradient of the unconstrained log-posterior. Fills `grad` and
    /// returns the log-posterior value. Off support, returns −∞ and zeros the
    /// gradient.
    ///
    /// The likelihood part runs the sensitivity recursion
    /// ∂h_t/∂ψ = ∂ω/∂ψ + ∂(α+φI)/∂ψ·y²_{t-1} + (α+φI)·∂y²_{t-1}/∂ψ
    /// + β·∂h_{t-1}/∂ψ + h_{t-1}·∂β/∂ψ in natural space, chains through the
    /// innovation density derivatives, then maps through the transform
    /// Jacobian and adds the log-Jacobian gradient.
    pub fn log_posterior_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.dim();
        assert_eq!(theta.len(), d, "parameter dimension mismatch");
        assert_eq!(grad.len(), d, "gradient dimension mismatch");
        grad.fill(0.0);

        let p = self.params_at(theta);
        if p.dist.validate().is_err() {
            return f64::NEG_INFINITY;
        }
        let lp_prior = log_prior(&p, &self.prior, self.enforce_stationarity);
        if !lp_prior.is_finite() {
            return f64::NEG_INFINITY;
        }
        let Some(h1) = self.h_init(&p) else {
            return f64::NEG_INFINITY;
        };
        let Ok(prep) = Prepared::new(&p.dist) else {
            return f64::NEG_INFINITY;
        };

        // Natural-space likelihood gradient with the sensitivity recursion.
        let (mut g_mu, mut g_om, mut g_al, mut g_ph, mut g_be) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut g_shape = [0.0f64; 2];

        let pers = p.persistence();
        let (mut dh_mu, mut dh_om, mut dh_al, mut dh_ph, mut dh_be) = match self.h1 {
            H1Policy::Unconditional => {
                let denom = 1.0 - pers;
                let base = p.omega / (denom * denom);
                (0.0, 1.0 / denom, base, 0.5 * base, base)
            }
            H1Policy::SampleVariance => (0.0, 0.0, 0.0, 0.0, 0.0),
        };

        let mut ll = 0.0;
        let mut h = h1;
        let mut prev_y = 0.0;
        for (t, xt) in self.x.iter().enumerate() {
            if t > 0 {
                let indicator = if prev_y <= 0.0 { 1.0 } else { 0.0 };
                let coef = p.alpha + p.phi * indicator;
                let y2 = prev_y * prev_y;
                let h_prev = h;
                h = p.omega + coef * y2 + p.beta * h_prev;
                let new_mu = -2.0 * coef * prev_y + p.beta * dh_mu;
                let new_om = 1.0 + p.beta * dh_om;
                let new_al = y2 + p.beta * dh_al;
                let new_ph = indicator * y2 + p.beta * dh_ph;
                let new_be = h_prev + p.beta * dh_be;
                dh_mu = new_mu;
                dh_om = new_om;
                dh_al = new_al;
                dh_ph = new_ph;
                dh_be = new_be;
            }
            let yt = xt - p.mu;
            let sqrt_h = h.sqrt();
            let e = yt / sqrt_h;
            let eval = prep.eval_grad(e);
            ll += eval.log_f - 0.5 * h.ln();

            // d/dψ [log f(e) − ½ ln h] = d_e·∂e/∂ψ − ∂h/∂ψ/(2h), with
            // ∂e/∂ψ = (∂y/∂ψ)/√h − e·∂h/∂ψ/(2h) and ∂y/∂μ = −1.
            let w = (eval.d_e * e + 1.0) / (2.0 * h);
            g_mu -= eval.d_e / sqrt_h + w * dh_mu;
            g_om -= w * dh_om;
            g_al -= w * dh_al;
            g_ph -= w * dh_ph;
            g_be -= w * dh_be;
            g_shape[0] += eval.d_shape[0];
            g_shape[1] += eval.d_shape[1];

            prev_y = yt;
        }
        if !ll.is_finite() {
            grad.fill(0.0);
            return f64::NEG_INFINITY;
        }

        // Prior gradient in natural space.
        g_mu -= p.mu / self.prior.var_mu;
        g_om -= p.omega / self.prior.var_omega;
        g_al -= p.alpha / self.prior.var_alpha;
        g_ph -= p.phi / self.prior.var_phi;
        g_be -= p.beta / self.prior.var_beta;
        match p.dist {
            ErrorDist::Normal => {}
            ErrorDist::StudentT { nu } | ErrorDist::Ged { nu } => {
                g_shape[0] -= nu / self.prior.var_nu;
            }
            ErrorDist::GeneralizedT { eta, nu } => {
                g_shape[0] -= nu / self.prior.var_nu;
                g_shape[1] -= eta / self.prior.var_eta;
                // ν's truncation normalizer 1 − Φ(1/(η·σ_ν)) depends on η.
                let sd_nu = self.prior.var_nu.sqrt();
                let t = 1.0 / (eta * sd_nu);
                g_shape[1] -= normal_pdf(t) / (eta * eta * sd_nu * (1.0 - normal_cdf(t)));
            }
        }

        // Chain through ∂p/∂θ* and add the log-Jacobian gradient.
        grad[0] = g_mu;
        grad[1] = g_om * p.omega + 1.0;
        grad[2] = g_al * p.alpha * (1.0 - p.alpha) + (1.0 - 2.0 * p.alpha);
        grad[3] = g_ph * p.phi * (2.0 - p.phi) / 2.0 + (1.0 - p.phi);
        grad[4] = g_be * p.beta * (1.0 - p.beta) + (1.0 - 2.0 * p.beta);
        match p.dist {
            ErrorDist::Normal => {}
            ErrorDist::StudentT { nu } => grad[5] = g_shape[0] * (nu - 2.0) + 1.0,
            ErrorDist::Ged { nu } => grad[5] = g_shape[0] * nu + 1.0,
            ErrorDist::GeneralizedT { eta, nu } => {
                grad[5] = g_shape[0] * (nu - 1.0 / eta) + 1.0;
                // η* moves ν through the 1/η offset: ∂ν/∂η* = −(η−1)/η².
                grad[6] = g_shape[1] * (eta - 1.0) - g_shape[0] * (eta - 1.0) / (eta * eta) + 1.0;
            }
        }

        let lp = ll + lp_prior + log_jacobian_at(&p);
        if !lp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            grad.fill(0.0);
            return f64::NEG_INFINITY;
        }
        lp
    }

    /// Per-observation conditional log-likelihood terms
    /// log p(x_t | F_{t−1}, θ) = log f(y_t/√h_t) − ½ ln h_t.
    pub fn pointwise_log_likelihood(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let p = self.params_at(theta);
        p.dist.validate()?;
        let h1 = self
            .h_init(&p)
            .ok_or_else(|| Error::invalid("parameters outside the admissible region"))?;
        let prep = Prepared::new(&p.dist)?;
        let mut out = Vec::with_capacity(self.x.len());
        let mut h = h1;
        let mut prev_y = 0.0;
        for (t, xt) in self.x.iter().enumerate() {
            if t > 0 {
                let indicator = if prev_y <= 0.0 { 1.0 } else { 0.0 };
                h = p.omega + (p.alpha + p.phi * indicator) * prev_y * prev_y + p.beta * h;
            }
            let yt = xt - p.mu;
            out.push(prep.log_density(yt / h.sqrt()) - 0.5 * h.ln());
            prev_y = yt;
        }
        Ok(out)
    }
}

impl Target for GarchPosterior {
    fn dim(&self) -> usize {
        self.kind.dim()
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        self.log_posterior(theta)
    }

    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        self.log_posterior_grad(theta, grad)
    }

    fn log_likelihood_part(&self, theta: &[f64]) -> Option<f64> {
        self.posterior_parts(theta).map(|p| p.log_likelihood)
    }
}
