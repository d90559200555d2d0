//! Benchmark generative models with conjugate posteriors.
//!
//! Each model couples a samplable prior, a forward simulator producing
//! `n_obs` observations, and the analytic posterior of one scalar target
//! functional of the parameter.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::oracle::{ln_normal_pdf, PosteriorOracle, PosteriorShape};

/// Scale parameters at or below this value are rejected as degenerate.
pub const MIN_SCALE: f64 = 1e-9;

/// Which component of a normal-gamma parameter is the inference target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalGammaTarget {
    Mean,
    Precision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", bound = "T: Real", deny_unknown_fields)]
pub enum ModelKind<T> {
    /// `X_i | μ ~ N(μ, noise_sd²)`, `μ ~ N(prior_mean, prior_sd²)`.
    GaussianMean { prior_mean: T, prior_sd: T, noise_sd: T },
    /// `X_i | μ, τ ~ N(μ, 1/τ)`, `(μ, τ) ~ NormalGamma(μ0, ν0, α0, β0)`.
    NormalGamma {
        mu0: T,
        nu0: T,
        alpha0: T,
        beta0: T,
        target: NormalGammaTarget,
    },
    /// Mixture-of-normals prior on the mean of a Gaussian with known variance.
    MixtureMean {
        weights: Vec<T>,
        means: Vec<T>,
        sds: Vec<T>,
        noise_sd: T,
    },
    /// Bivariate normal with known covariance; the target is one mean component.
    BivariateNormalMean {
        prior_mean: [T; 2],
        prior_cov: [[T; 2]; 2],
        noise_cov: [[T; 2]; 2],
        component: usize,
    },
}

/// Observations from one simulated or observed dataset, row-major with
/// `dim` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RawDataset<T> {
    values: Vec<T>,
    dim: usize,
}

impl<T: Real> RawDataset<T> {
    pub fn new(values: Vec<T>, dim: usize) -> Result<Self> {
        if dim == 0 || values.is_empty() || values.len() % dim != 0 {
            return Err(Error::Domain(format!(
                "dataset of {} values cannot have dimension {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("dataset contains non-finite values".into()));
        }
        Ok(Self { values, dim })
    }

    pub fn univariate(values: Vec<T>) -> Result<Self> {
        Self::new(values, 1)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_obs(&self) -> usize {
        self.values.len() / self.dim
    }

    /// Observations of coordinate `j`, in order.
    pub fn column(&self, j: usize) -> Vec<T> {
        self.values.iter().skip(j).step_by(self.dim).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BenchmarkModel<T> {
    name: String,
    kind: ModelKind<T>,
    n_obs: usize,
}

impl<T: Real> BenchmarkModel<T> {
    pub fn new(name: impl Into<String>, kind: ModelKind<T>, n_obs: usize) -> Result<Self> {
        let mut model = Self {
            name: name.into(),
            kind,
            n_obs,
        };
        model.validate()?;
        if let ModelKind::MixtureMean { weights, .. } = &mut model.kind {
            let total: T = weights.iter().copied().sum();
            weights.iter_mut().for_each(|w| *w = *w / total);
        }
        Ok(model)
    }

    /// Mean of a Gaussian with unit variance and a centered normal prior of
    /// standard deviation `sigma0`.
    pub fn known_variance_mean(sigma0: T, n_obs: usize) -> Result<Self> {
        Self::new(
            "gaussian_mean",
            ModelKind::GaussianMean {
                prior_mean: T::zero(),
                prior_sd: sigma0,
                noise_sd: T::one(),
            },
            n_obs,
        )
    }

    /// Precision of a Gaussian under a normal-gamma prior with `μ0 = 0`,
    /// `ν0 = 1` and `E[τ] = 1`, `SD[τ] = tau_sd` (so `α0 = β0 = 1/tau_sd²`).
    pub fn unknown_precision(tau_sd: T, n_obs: usize) -> Result<Self> {
        if !(tau_sd > T::lit(MIN_SCALE)) {
            return Err(Error::InvalidModel(format!("SD of τ must be positive, got {tau_sd}")));
        }
        let alpha0 = T::one() / (tau_sd * tau_sd);
        Self::new(
            "normal_gamma_precision",
            ModelKind::NormalGamma {
                mu0: T::zero(),
                nu0: T::one(),
                alpha0,
                beta0: alpha0,
                target: NormalGammaTarget::Precision,
            },
            n_obs,
        )
    }

    /// Mean of a Gaussian with unknown precision: `μ0 = 0`, `α0 = 2`, `β0 = 50`.
    pub fn mean_unknown_precision(nu0: T, n_obs: usize) -> Result<Self> {
        Self::new(
            "normal_gamma_mean",
            ModelKind::NormalGamma {
                mu0: T::zero(),
                nu0,
                alpha0: T::lit(2.0),
                beta0: T::lit(50.0),
                target: NormalGammaTarget::Mean,
            },
            n_obs,
        )
    }

    /// Two-component mixture prior with illustrative defaults: equal weights,
    /// component means ±1, component SD 0.3, unit observation noise.
    pub fn default_mixture(n_obs: usize) -> Result<Self> {
        Self::new(
            "mixture_mean",
            ModelKind::MixtureMean {
                weights: vec![T::lit(0.5), T::lit(0.5)],
                means: vec![T::lit(-1.0), T::one()],
                sds: vec![T::lit(0.3), T::lit(0.3)],
                noise_sd: T::one(),
            },
            n_obs,
        )
    }

    /// Bivariate normal mean with identity prior and noise covariances.
    pub fn default_bivariate(component: usize, n_obs: usize) -> Result<Self> {
        let eye = [[T::one(), T::zero()], [T::zero(), T::one()]];
        Self::new(
            "bivariate_normal_mean",
            ModelKind::BivariateNormalMean {
                prior_mean: [T::zero(), T::zero()],
                prior_cov: eye,
                noise_cov: eye,
                component,
            },
            n_obs,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ModelKind<T> {
        &self.kind
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    /// Columns per observation.
    pub fn data_dim(&self) -> usize {
        match self.kind {
            ModelKind::BivariateNormalMean { .. } => 2,
            _ => 1,
        }
    }

    /// Length of a full parameter draw.
    pub fn param_dim(&self) -> usize {
        match self.kind {
            ModelKind::GaussianMean { .. } | ModelKind::MixtureMean { .. } => 1,
            ModelKind::NormalGamma { .. } | ModelKind::BivariateNormalMean { .. } => 2,
        }
    }

    /// Prior hyperparameters flattened in declaration order.
    pub fn prior_params(&self) -> Vec<T> {
        match &self.kind {
            ModelKind::GaussianMean {
                prior_mean,
                prior_sd,
                noise_sd,
            } => vec![*prior_mean, *prior_sd, *noise_sd],
            ModelKind::NormalGamma {
                mu0,
                nu0,
                alpha0,
                beta0,
                ..
            } => vec![*mu0, *nu0, *alpha0, *beta0],
            ModelKind::MixtureMean {
                weights,
                means,
                sds,
                noise_sd,
            } => weights
                .iter()
                .chain(means)
                .chain(sds)
                .copied()
                .chain(std::iter::once(*noise_sd))
                .collect(),
            ModelKind::BivariateNormalMean {
                prior_mean,
                prior_cov,
                noise_cov,
                ..
            } => prior_mean
                .iter()
                .chain(prior_cov.iter().flatten())
                .chain(noise_cov.iter().flatten())
                .copied()
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let min = T::lit(MIN_SCALE);
        let scale_ok = |v: T| v > min && v.is_finite();
        let bad = |msg: String| Err(Error::InvalidModel(format!("{}: {msg}", self.name)));
        if self.n_obs < 2 {
            return bad(format!("n_obs must be at least 2, got {}", self.n_obs));
        }
        match &self.kind {
            ModelKind::GaussianMean {
                prior_mean,
                prior_sd,
                noise_sd,
            } => {
                if !prior_mean.is_finite() || !scale_ok(*prior_sd) || !scale_ok(*noise_sd) {
                    return bad(format!(
                        "need finite prior mean and scales above {MIN_SCALE}, got \
                         ({prior_mean}, {prior_sd}, {noise_sd})"
                    ));
                }
            }
            ModelKind::NormalGamma {
                mu0,
                nu0,
                alpha0,
                beta0,
                ..
            } => {
                if !mu0.is_finite() || !scale_ok(*nu0) || !scale_ok(*alpha0) || !scale_ok(*beta0) {
                    return bad("ν0, α0, β0 must be positive".into());
                }
            }
            ModelKind::MixtureMean {
                weights,
                means,
                sds,
                noise_sd,
            } => {
                if weights.is_empty() || weights.len() != means.len() || weights.len() != sds.len() {
                    return bad("mixture weights, means and sds must have equal nonzero length".into());
                }
                if weights.iter().any(|&w| !(w > T::zero()) || !w.is_finite())
                    || means.iter().any(|m| !m.is_finite())
                    || sds.iter().any(|&s| !scale_ok(s))
                    || !scale_ok(*noise_sd)
                {
                    return bad("mixture weights and scales must be positive".into());
                }
            }
            ModelKind::BivariateNormalMean {
                prior_mean,
                prior_cov,
                noise_cov,
                component,
            } => {
                if *component > 1 {
                    return bad(format!("component must be 0 or 1, got {component}"));
                }
                if prior_mean.iter().any(|m| !m.is_finite())
                    || cholesky2(prior_cov).is_none()
                    || cholesky2(noise_cov).is_none()
                {
                    return bad("covariances must be symmetric positive definite".into());
                }
            }
        }
        Ok(())
    }

    /// Draws a full parameter vector from the prior.
    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        match &self.kind {
            ModelKind::GaussianMean {
                prior_mean, prior_sd, ..
            } => vec![*prior_mean + *prior_sd * T::standard_normal(rng)],
            ModelKind::NormalGamma {
                mu0,
                nu0,
                alpha0,
                beta0,
                ..
            } => {
                let tau = T::unit_gamma(*alpha0, rng) / *beta0;
                let mu = *mu0 + T::standard_normal(rng) / (*nu0 * tau).sqrt();
                vec![mu, tau]
            }
            ModelKind::MixtureMean {
                weights, means, sds, ..
            } => {
                let u = T::unit_uniform(rng);
                let mut acc = T::zero();
                let mut pick = weights.len() - 1;
                for (i, &w) in weights.iter().enumerate() {
                    acc = acc + w;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                vec![means[pick] + sds[pick] * T::standard_normal(rng)]
            }
            ModelKind::BivariateNormalMean {
                prior_mean, prior_cov, ..
            } => {
                let l = cholesky2(prior_cov).expect("validated covariance");
                let (z0, z1) = (T::standard_normal(rng), T::standard_normal(rng));
                vec![
                    prior_mean[0] + l[0][0] * z0,
                    prior_mean[1] + l[1][0] * z0 + l[1][1] * z1,
                ]
            }
        }
    }

    /// The scalar functional of a parameter draw that is the inference target.
    pub fn target(&self, theta: &[T]) -> T {
        match &self.kind {
            ModelKind::NormalGamma {
                target: NormalGammaTarget::Precision,
                ..
            } => theta[1],
            ModelKind::BivariateNormalMean { component, .. } => theta[*component],
            _ => theta[0],
        }
    }

    /// Simulates one dataset of `n_obs` observations given a parameter draw.
    pub fn simulate<R: Rng + ?Sized>(&self, theta: &[T], rng: &mut R) -> Result<RawDataset<T>> {
        if theta.len() != self.param_dim() || theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain(format!(
                "{} expects {} finite parameters, got {theta:?}",
                self.name,
                self.param_dim()
            )));
        }
        let n = self.n_obs;
        let values = match &self.kind {
            ModelKind::GaussianMean { noise_sd, .. } | ModelKind::MixtureMean { noise_sd, .. } => {
                (0..n).map(|_| theta[0] + *noise_sd * T::standard_normal(rng)).collect()
            }
            ModelKind::NormalGamma { .. } => {
                let tau = theta[1];
                if !(tau > T::zero()) {
                    return Err(Error::Domain(format!("precision must be positive, got {tau}")));
                }
                let sd = T::one() / tau.sqrt();
                (0..n).map(|_| theta[0] + sd * T::standard_normal(rng)).collect()
            }
            ModelKind::BivariateNormalMean { noise_cov, .. } => {
                let l = cholesky2(noise_cov).expect("validated covariance");
                let mut v = Vec::with_capacity(2 * n);
                for _ in 0..n {
                    let (z0, z1) = (T::standard_normal(rng), T::standard_normal(rng));
                    v.push(theta[0] + l[0][0] * z0);
                    v.push(theta[1] + l[1][0] * z0 + l[1][1] * z1);
                }
                v
            }
        };
        RawDataset::new(values, self.data_dim())
    }

    /// A dataset shaped like this model's output with i.i.d. standard normal entries.
    pub fn standard_normal_dataset<R: Rng + ?Sized>(&self, rng: &mut R) -> RawDataset<T> {
        let values = (0..self.n_obs * self.data_dim())
            .map(|_| T::standard_normal(rng))
            .collect();
        RawDataset::new(values, self.data_dim()).expect("finite normal draws")
    }

    /// Closed-form posterior of the target functional given `data`.
    pub fn true_posterior(&self, data: &RawDataset<T>) -> Result<PosteriorOracle<T>> {
        if data.dim() != self.data_dim() {
            return Err(Error::Domain(format!(
                "{} expects {}-dimensional observations, got {}",
                self.name,
                self.data_dim(),
                data.dim()
            )));
        }
        let n = T::from_count(data.n_obs());
        let shape = match &self.kind {
            ModelKind::GaussianMean {
                prior_mean,
                prior_sd,
                noise_sd,
            } => {
                let (mean, sd) = conjugate_normal(data.values(), *prior_mean, *prior_sd, *noise_sd);
                PosteriorShape::Normal { mean, sd }
            }
            ModelKind::NormalGamma {
                mu0,
                nu0,
                alpha0,
                beta0,
                target,
            } => {
                let xs = data.values();
                let xbar = xs.iter().copied().sum::<T>() / n;
                let ss = xs.iter().map(|&x| (x - xbar) * (x - xbar)).sum::<T>();
                let half = T::lit(0.5);
                let alpha_n = *alpha0 + n * half;
                let nu_n = *nu0 + n;
                let beta_n = *beta0 + half * ss + n * *nu0 * (xbar - *mu0) * (xbar - *mu0) / (T::lit(2.0) * nu_n);
                match target {
                    NormalGammaTarget::Precision => PosteriorShape::Gamma {
                        shape: alpha_n,
                        rate: beta_n,
                    },
                    NormalGammaTarget::Mean => PosteriorShape::StudentT {
                        location: (*nu0 * *mu0 + n * xbar) / nu_n,
                        scale: (beta_n / (alpha_n * nu_n)).sqrt(),
                        dof: T::lit(2.0) * alpha_n,
                    },
                }
            }
            ModelKind::MixtureMean {
                weights,
                means,
                sds,
                noise_sd,
            } => {
                let xbar = data.values().iter().copied().sum::<T>() / n;
                let mut post_means = Vec::with_capacity(weights.len());
                let mut post_sds = Vec::with_capacity(weights.len());
                let mut log_w = Vec::with_capacity(weights.len());
                for ((&w, &m), &s) in weights.iter().zip(means).zip(sds) {
                    let (pm, ps) = conjugate_normal(data.values(), m, s, *noise_sd);
                    post_means.push(pm);
                    post_sds.push(ps);
                    // marginal likelihood up to factors shared by all components
                    let marginal_sd = (s * s + *noise_sd * *noise_sd / n).sqrt();
                    log_w.push(w.ln() + ln_normal_pdf(xbar, m, marginal_sd));
                }
                let top = log_w.iter().copied().fold(T::neg_infinity(), T::max);
                let unnorm: Vec<T> = log_w.iter().map(|&l| (l - top).exp()).collect();
                let total: T = unnorm.iter().copied().sum();
                PosteriorShape::NormalMixture {
                    weights: unnorm.iter().map(|&u| u / total).collect(),
                    means: post_means,
                    sds: post_sds,
                }
            }
            ModelKind::BivariateNormalMean { component, .. } => {
                let (mean, cov) = self.bivariate_posterior(data)?;
                PosteriorShape::Normal {
                    mean: mean[*component],
                    sd: cov[*component][*component].sqrt(),
                }
            }
        };
        PosteriorOracle::new(shape)
    }

    /// Joint posterior `(μ_n, Σ_n)` of the bivariate normal mean.
    pub fn bivariate_posterior(&self, data: &RawDataset<T>) -> Result<([T; 2], [[T; 2]; 2])> {
        let ModelKind::BivariateNormalMean {
            prior_mean,
            prior_cov,
            noise_cov,
            ..
        } = &self.kind
        else {
            return Err(Error::InvalidModel(format!("{} is not bivariate", self.name)));
        };
        let n = T::from_count(data.n_obs());
        let xbar = [0, 1].map(|j| data.column(j).into_iter().sum::<T>() / n);
        let p0 = inverse2(prior_cov).expect("validated covariance");
        let px = inverse2(noise_cov).expect("validated covariance");
        let precision = add2(&p0, &scale2(&px, n));
        let cov = inverse2(&precision).ok_or_else(|| Error::Domain("singular posterior precision".into()))?;
        let rhs = [0, 1].map(|i| {
            p0[i][0] * prior_mean[0] + p0[i][1] * prior_mean[1] + n * (px[i][0] * xbar[0] + px[i][1] * xbar[1])
        });
        let mean = [0, 1].map(|i| cov[i][0] * rhs[0] + cov[i][1] * rhs[1]);
        Ok((mean, cov))
    }
}

/// Posterior mean and SD of a normal mean under a normal prior and known noise.
fn conjugate_normal<T: Real>(xs: &[T], prior_mean: T, prior_sd: T, noise_sd: T) -> (T, T) {
    let n = T::from_count(xs.len());
    let sum: T = xs.iter().copied().sum();
    let prior_prec = T::one() / (prior_sd * prior_sd);
    let noise_prec = T::one() / (noise_sd * noise_sd);
    let precision = prior_prec + n * noise_prec;
    (
        (prior_mean * prior_prec + sum * noise_prec) / precision,
        T::one() / precision.sqrt(),
    )
}

pub(crate) fn cholesky2<T: Real>(a: &[[T; 2]; 2]) -> Option<[[T; 2]; 2]> {
    if (a[0][1] - a[1][0]).abs() > T::lit(1e-12) * (a[0][0].abs() + a[1][1].abs()) {
        return None;
    }
    if !(a[0][0] > T::zero()) {
        return None;
    }
    let l00 = a[0][0].sqrt();
    let l10 = a[1][0] / l00;
    let rem = a[1][1] - l10 * l10;
    if !(rem > T::zero()) {
        return None;
    }
    Some([[l00, T::zero()], [l10, rem.sqrt()]])
}

pub(crate) fn inverse2<T: Real>(a: &[[T; 2]; 2]) -> Option<[[T; 2]; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == T::zero() || !det.is_finite() {
        return None;
    }
    Some([[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]])
}

fn add2<T: Real>(a: &[[T; 2]; 2], b: &[[T; 2]; 2]) -> [[T; 2]; 2] {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

fn scale2<T: Real>(a: &[[T; 2]; 2], s: T) -> [[T; 2]; 2] {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}
