//! Point estimation of component parameters and system reliability.
//!
//! Moment estimates drive every bootstrap path: with `xbar` and `s` the
//! sample mean and SD of the log-lifetimes, `sigma = s / kappa2` and
//! `mu = xbar - kappa1 * sigma`. Maximum likelihood plus the Fisher
//! information feeds the delta-method baseline.

use std::f64::consts::PI;

use crate::bootstrap::{LclResult, Method};
use crate::censoring::{censored_loglik, observed_information, CensoredDataset};
use crate::distributions::{normal_quantile, ComponentModel, LifetimeFamily, EULER_GAMMA};
use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, maximize_2d};
use crate::structures::StructureNode;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub family: LifetimeFamily,
    pub mu_hat: f64,
    pub sigma_hat: f64,
    pub n: usize,
}

impl MomentEstimate {
    pub fn model(&self) -> ComponentModel {
        match self.family {
            LifetimeFamily::Exponential => ComponentModel::exponential((-self.mu_hat).exp()),
            _ => ComponentModel::new(self.family.clone(), self.mu_hat, self.sigma_hat),
        }
        .expect("moment estimates are validated on construction")
    }

    pub fn lambda_hat(&self) -> Option<f64> {
        (self.family == LifetimeFamily::Exponential).then(|| (-self.mu_hat).exp())
    }

    pub fn reliability_at(&self, t: f64) -> Result<f64> {
        self.model().reliability(t)
    }
}

fn check_times(data: &[f64]) -> Result<()> {
    if let Some(&bad) = data.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameter(format!("lifetimes must be positive and finite, got {bad}")));
    }
    Ok(())
}

/// Moment estimate from failure times.
pub fn moment_estimate(family: &LifetimeFamily, data: &[f64]) -> Result<MomentEstimate> {
    let min = family.min_sample();
    if data.len() < min {
        return Err(Error::SampleTooSmall { got: data.len(), min });
    }
    check_times(data)?;
    if *family == LifetimeFamily::Exponential {
        let total: f64 = data.iter().sum();
        let lambda = data.len() as f64 / total;
        return Ok(MomentEstimate { family: family.clone(), mu_hat: -lambda.ln(), sigma_hat: 1.0, n: data.len() });
    }
    moment_estimate_from_log_stats(family, log_mean_sd(data.iter().map(|t| t.ln())), data.len())
}

/// Mean and `n - 1` SD of a stream of log-times (Welford).
pub(crate) fn log_mean_sd(logs: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut n = 0.0;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for x in logs {
        n += 1.0;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    (mean, (m2 / (n - 1.0)).max(0.0).sqrt())
}

pub(crate) fn moment_estimate_from_log_stats(
    family: &LifetimeFamily,
    (xbar, s): (f64, f64),
    n: usize,
) -> Result<MomentEstimate> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::DegenerateSample);
    }
    let (k1, k2) = family.population_moments();
    let sigma_hat = s / k2;
    Ok(MomentEstimate { family: family.clone(), mu_hat: xbar - k1 * sigma_hat, sigma_hat, n })
}

/// Moment-based reliability estimate `1 - F((log t - mu_hat) / sigma_hat)`.
pub fn moment_reliability(family: &LifetimeFamily, data: &[f64], t: f64) -> Result<f64> {
    moment_estimate(family, data)?.reliability_at(t)
}

#[derive(Debug, Clone)]
pub struct MleFit {
    pub model: ComponentModel,
    pub iterations: usize,
    pub log_likelihood: f64,
}

const MLE_TOL: f64 = 1e-10;
const MLE_MAX_ITER: usize = 100;

/// Maximum likelihood fit, with optional right-censoring indicators
/// (`true` = censored at the recorded time).
pub fn mle_fit(family: &LifetimeFamily, data: &[f64], censored: Option<&[bool]>) -> Result<MleFit> {
    check_times(data)?;
    let flags: Vec<bool> = match censored {
        Some(c) if c.len() != data.len() => {
            return Err(Error::LengthMismatch { expected: data.len(), got: c.len() });
        }
        Some(c) => c.to_vec(),
        None => vec![false; data.len()],
    };
    let failures = flags.iter().filter(|c| !**c).count();
    let min = family.min_sample();
    if failures < min {
        return Err(Error::InsufficientFailures { got: failures, min });
    }
    let rows = CensoredDataset::from_parts(data.to_vec(), flags.clone())?;
    let any_censored = failures < data.len();

    let (model, iterations) = match family {
        LifetimeFamily::Exponential => {
            let total: f64 = data.iter().sum();
            (ComponentModel::exponential(failures as f64 / total)?, 0)
        }
        LifetimeFamily::LogNormal if !any_censored => {
            let (xbar, s) = log_mean_sd(data.iter().map(|t| t.ln()));
            let n = data.len() as f64;
            let sigma = s * ((n - 1.0) / n).sqrt();
            if !(sigma > 0.0) {
                return Err(Error::DegenerateSample);
            }
            (ComponentModel::new(LifetimeFamily::LogNormal, xbar, sigma)?, 0)
        }
        LifetimeFamily::Weibull => {
            let logs: Vec<f64> = data.iter().map(|t| t.ln()).collect();
            let (mu, sigma, it) = weibull_profile_mle(&logs, &flags)?;
            (ComponentModel::new(LifetimeFamily::Weibull, mu, sigma)?, it)
        }
        fam => {
            let observed: Vec<f64> = data.iter().zip(&flags).filter(|(_, c)| !**c).map(|(t, _)| *t).collect();
            let start = moment_estimate(fam, &observed)?;
            let f = |p: [f64; 2]| match ComponentModel::new(fam.clone(), p[0], p[1].exp()) {
                Ok(m) => censored_loglik(&m, &rows),
                Err(_) => f64::NEG_INFINITY,
            };
            let (p, it) = maximize_2d(&f, [start.mu_hat, start.sigma_hat.ln()], MLE_MAX_ITER)?;
            (ComponentModel::new(fam.clone(), p[0], p[1].exp())?, it)
        }
    };
    let log_likelihood = censored_loglik(&model, &rows);
    Ok(MleFit { model, iterations, log_likelihood })
}

/// Weibull MLE by profiling the shape `beta = 1 / sigma`: the root of
/// `sum w x / sum w - 1 / beta - mean(failure logs)` with
/// `w = exp(beta x)` over all rows, found by safeguarded Newton.
fn weibull_profile_mle(logs: &[f64], censored: &[bool]) -> Result<(f64, f64, usize)> {
    let fail_logs: Vec<f64> = logs.iter().zip(censored).filter(|(_, c)| !**c).map(|(x, _)| *x).collect();
    let d = fail_logs.len() as f64;
    let xbar_f = fail_logs.iter().sum::<f64>() / d;
    let xmax = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let score = |beta: f64| -> (f64, f64, f64) {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &x in logs {
            let y = x - xmax;
            let w = (beta * y).exp();
            s0 += w;
            s1 += w * y;
            s2 += w * y * y;
        }
        let m1 = s1 / s0;
        let var = (s2 / s0 - m1 * m1).max(0.0);
        (xmax + m1 - 1.0 / beta - xbar_f, var + 1.0 / (beta * beta), s0)
    };

    let (_, s) = log_mean_sd(fail_logs.iter().cloned());
    let mut beta = if s > 0.0 && s.is_finite() { crate::distributions::WEIBULL_KAPPA.1 / s } else { 1.0 };
    let mut lo = beta;
    let mut hi = beta;
    let mut guard = 0;
    while score(lo).0 > 0.0 {
        lo *= 0.5;
        guard += 1;
        if guard > 200 {
            return Err(Error::NonConvergence { what: "Weibull shape bracketing", iterations: guard });
        }
    }
    while score(hi).0 < 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 || !hi.is_finite() {
            return Err(Error::DegenerateSample);
        }
    }
    for it in 1..=MLE_MAX_ITER {
        let (g, dg, _) = score(beta);
        if g < 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let mut next = beta - g / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - beta).abs() <= MLE_TOL * beta;
        beta = next;
        if done {
            let (_, _, s0) = score(beta);
            let mu = xmax + (s0 / d).ln() / beta;
            return Ok((mu, 1.0 / beta, it));
        }
    }
    Err(Error::NonConvergence { what: "Weibull shape Newton iteration", iterations: MLE_MAX_ITER })
}

/// Symmetric information matrix for one component, in `(mu, sigma)` or,
/// for the exponential family, the 1x1 matrix in `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Information {
    pub dim: usize,
    pub matrix: [[f64; 2]; 2],
}

impl Information {
    pub fn scalar(v: f64) -> Self {
        Information { dim: 1, matrix: [[v, 0.0], [0.0, 0.0]] }
    }

    pub fn inverse(&self) -> Option<[[f64; 2]; 2]> {
        let m = self.matrix;
        if self.dim == 1 {
            return (m[0][0] > 0.0 && m[0][0].is_finite()).then(|| [[1.0 / m[0][0], 0.0], [0.0, 0.0]]);
        }
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let scale = m[0][0].abs() * m[1][1].abs();
        if !(det > 1e-14 * scale) || !det.is_finite() {
            return None;
        }
        Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
    }

    /// `g' I^{-1} g`.
    pub fn inverse_quadratic_form(&self, g: [f64; 2]) -> Option<f64> {
        let inv = self.inverse()?;
        Some(g[0] * (inv[0][0] * g[0] + inv[0][1] * g[1]) + g[1] * (inv[1][0] * g[0] + inv[1][1] * g[1]))
    }
}

/// Expected information of `n` complete observations.
pub fn fisher_information(model: &ComponentModel, n: usize) -> Result<Information> {
    let nf = n as f64;
    let s2 = model.sigma() * model.sigma();
    let per_obs = match model.family() {
        LifetimeFamily::Exponential => {
            let lambda = model.rate().unwrap();
            return Ok(Information::scalar(nf / (lambda * lambda)));
        }
        LifetimeFamily::LogNormal => [[1.0, 0.0], [0.0, 2.0]],
        LifetimeFamily::Weibull => {
            let c = 1.0 - EULER_GAMMA;
            [[1.0, c], [c, PI * PI / 6.0 + c * c]]
        }
        fam @ LifetimeFamily::Generic(_) => standardized_information_quadrature(fam),
    };
    let info = Information {
        dim: 2,
        matrix: [
            [nf * per_obs[0][0] / s2, nf * per_obs[0][1] / s2],
            [nf * per_obs[1][0] / s2, nf * per_obs[1][1] / s2],
        ],
    };
    if info.inverse().is_none() {
        return Err(Error::SingularInformation(0));
    }
    Ok(info)
}

/// Per-observation information of the standardized law (`sigma = 1`) as
/// expectations of score products, integrated over the probability scale.
pub fn standardized_information_quadrature(family: &LifetimeFamily) -> [[f64; 2]; 2] {
    let dlogpdf = |w: f64| {
        let h = 1e-5 * w.abs().max(1.0);
        (family.standardized_pdf(w + h).ln() - family.standardized_pdf(w - h).ln()) / (2.0 * h)
    };
    let integrand = |which: usize| {
        move |p: f64| {
            if p <= 0.0 || p >= 1.0 {
                return 0.0;
            }
            let w = family.quantile_unchecked(p);
            let l = dlogpdf(w);
            let a = -l;
            let b = -(1.0 + w * l);
            match which {
                0 => a * a,
                1 => a * b,
                _ => b * b,
            }
        }
    };
    let eps = 1e-13;
    let i00 = adaptive_simpson(&integrand(0), eps, 1.0 - eps, 1e-8);
    let i01 = adaptive_simpson(&integrand(1), eps, 1.0 - eps, 1e-8);
    let i11 = adaptive_simpson(&integrand(2), eps, 1.0 - eps, 1e-8);
    [[i00, i01], [i01, i11]]
}

/// Gradient of `r(t)` with respect to `(mu, sigma)`, or `lambda` for the
/// exponential family (second entry zero).
pub fn reliability_gradient(model: &ComponentModel, t: f64) -> [f64; 2] {
    match model.rate() {
        Some(lambda) => [-t * (-lambda * t).exp(), 0.0],
        None => {
            let w = model.standardize(t);
            let f = model.family().standardized_pdf(w);
            [f / model.sigma(), f * w / model.sigma()]
        }
    }
}

/// Which closed form the delta limit takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaForm {
    /// `R_hat - z_{1-alpha} * se`.
    #[default]
    Standard,
    /// `2 R_hat - z_{1-alpha} * se`, kept for comparison experiments.
    Doubled,
}

/// Fitted delta-method ingredients at one mission time.
#[derive(Debug, Clone)]
pub struct DeltaFit {
    pub models: Vec<ComponentModel>,
    pub informations: Vec<Information>,
}

impl DeltaFit {
    pub fn new(families: &[LifetimeFamily], datasets: &[CensoredDataset]) -> Result<Self> {
        if families.len() != datasets.len() {
            return Err(Error::LengthMismatch { expected: families.len(), got: datasets.len() });
        }
        let mut models = Vec::with_capacity(families.len());
        let mut informations = Vec::with_capacity(families.len());
        for (i, (fam, data)) in families.iter().zip(datasets).enumerate() {
            let fit = mle_fit(fam, &data.times(), Some(&data.censored_flags()))?;
            let info = if data.censored_count() == 0 {
                fisher_information(&fit.model, data.len())
            } else {
                observed_information(&fit.model, data)
            }
            .map_err(|e| match e {
                Error::SingularInformation(_) => Error::SingularInformation(i),
                e => e,
            })?;
            models.push(fit.model);
            informations.push(info);
        }
        Ok(DeltaFit { models, informations })
    }

    /// `(R_hat, se)` at time `t`.
    pub fn estimate(&self, structure: &StructureNode, t: f64) -> Result<(f64, f64)> {
        let r: Vec<f64> = self.models.iter().map(|m| m.reliability(t)).collect::<Result<_>>()?;
        let r_hat = structure.eval_reliability(&r)?;
        let partials = structure.structure_partials(&r)?;
        let mut var = 0.0;
        for (i, model) in self.models.iter().enumerate() {
            let g = reliability_gradient(model, t);
            let g = [partials[i] * g[0], partials[i] * g[1]];
            var += self.informations[i]
                .inverse_quadratic_form(g)
                .ok_or(Error::SingularInformation(i))?;
        }
        Ok((r_hat, var.max(0.0).sqrt()))
    }

    pub fn lcl(&self, structure: &StructureNode, t: f64, alpha: f64, form: DeltaForm) -> Result<LclResult> {
        let (r_hat, se) = self.estimate(structure, t)?;
        let z = normal_quantile(1.0 - alpha);
        let raw = match form {
            DeltaForm::Standard => r_hat - z * se,
            DeltaForm::Doubled => 2.0 * r_hat - z * se,
        };
        Ok(LclResult::from_raw(Method::Delta, raw, r_hat, alpha, t))
    }
}

/// Delta-method LCL from per-component MLEs. Censored rows enter through
/// the censored likelihood and its observed information.
pub fn delta_lcl(
    structure: &StructureNode,
    families: &[LifetimeFamily],
    datasets: &[CensoredDataset],
    t: f64,
    alpha: f64,
) -> Result<LclResult> {
    crate::bootstrap::check_alpha(alpha, 0.5)?;
    if structure.component_count() != families.len() {
        return Err(Error::LengthMismatch { expected: structure.component_count(), got: families.len() });
    }
    DeltaFit::new(families, datasets)?.lcl(structure, t, alpha, DeltaForm::Standard)
}
