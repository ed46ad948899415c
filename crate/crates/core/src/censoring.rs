//! Type-II right censoring, completion of censored samples by imputation,
//! and the censored likelihood used by the delta baseline.
//!
//! The imputation is a stand-in: a censored MLE fit followed by replacing
//! each censored time with the conditional mean log-lifetime given survival
//! past the censoring time (or, optionally, equally spaced conditional
//! quantiles).

use serde::{Deserialize, Serialize};

use crate::distributions::{normal_pdf, ComponentModel, LifetimeFamily};
use crate::error::{Error, Result};
use crate::estimators::{mle_fit, Information};
use crate::numeric::{adaptive_simpson, gradient_hessian, scaled_exp_integral};

/// Lifetime rows `(x, censored)`. Complete data has no censored rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredDataset {
    rows: Vec<(f64, bool)>,
}

impl CensoredDataset {
    pub fn complete(times: Vec<f64>) -> Result<Self> {
        let n = times.len();
        Self::from_parts(times, vec![false; n])
    }

    pub fn from_parts(times: Vec<f64>, censored: Vec<bool>) -> Result<Self> {
        if times.len() != censored.len() {
            return Err(Error::LengthMismatch { expected: times.len(), got: censored.len() });
        }
        if let Some(&bad) = times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter(format!("lifetimes must be positive and finite, got {bad}")));
        }
        Ok(CensoredDataset { rows: times.into_iter().zip(censored).collect() })
    }

    pub fn rows(&self) -> &[(f64, bool)] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.0).collect()
    }

    pub fn censored_flags(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.1).collect()
    }

    pub fn censored_count(&self) -> usize {
        self.rows.iter().filter(|r| r.1).count()
    }

    /// Number of observed failures.
    pub fn n_tilde(&self) -> usize {
        self.len() - self.censored_count()
    }
}

/// Keeps the `n_tilde` smallest times as failures and censors the rest at
/// the `n_tilde`-th order statistic.
pub fn type2_censor(times: &[f64], n_tilde: usize) -> Result<CensoredDataset> {
    if n_tilde < 1 || n_tilde > times.len() {
        return Err(Error::InvalidParameter(format!(
            "number of observed failures {n_tilde} not in 1..={}",
            times.len()
        )));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let cut = sorted[n_tilde - 1];
    let flags = (0..sorted.len()).map(|i| i >= n_tilde).collect();
    for v in sorted.iter_mut().skip(n_tilde) {
        *v = cut;
    }
    CensoredDataset::from_parts(sorted, flags)
}

/// Observed failures for a censoring fraction, `ceil((1 - fraction) n)`.
pub fn observed_failures(n: usize, censoring_fraction: f64) -> usize {
    crate::stats::ceil_rank(n, 1.0 - censoring_fraction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImputeMode {
    /// Conditional mean of the log-lifetime beyond the censoring time.
    #[default]
    ConditionalMean,
    /// Equally spaced conditional quantiles across the censored rows.
    ConditionalQuantile,
}

/// Completes a censored sample. Returns one time per row, in row order;
/// observed rows are copied unchanged.
pub fn impute(family: &LifetimeFamily, data: &CensoredDataset, mode: ImputeMode) -> Result<Vec<f64>> {
    if data.censored_count() == 0 {
        return Ok(data.times());
    }
    let min = family.min_sample();
    if data.n_tilde() < min.max(2) && family.dimension() == 2 {
        return Err(Error::InsufficientFailures { got: data.n_tilde(), min: 2 });
    }
    let fit = mle_fit(family, &data.times(), Some(&data.censored_flags()))?;
    let model = &fit.model;

    let mut out = data.times();
    match mode {
        ImputeMode::ConditionalMean => {
            for (i, &(x, cens)) in data.rows().iter().enumerate() {
                if cens {
                    out[i] = conditional_mean_time(model, x);
                }
            }
        }
        ImputeMode::ConditionalQuantile => {
            // group rows sharing a censoring time
            let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.rows()[i].1).collect();
            idx.sort_by(|&a, &b| data.rows()[a].0.total_cmp(&data.rows()[b].0).then(a.cmp(&b)));
            let mut start = 0;
            while start < idx.len() {
                let x = data.rows()[idx[start]].0;
                let end = idx[start..].iter().position(|&i| data.rows()[i].0 != x).map_or(idx.len(), |p| start + p);
                let m = end - start;
                for (k, &row) in idx[start..end].iter().enumerate() {
                    let frac = 1.0 - (k + 1) as f64 / (m + 1) as f64;
                    out[row] = conditional_quantile_time(model, x, frac);
                }
                start = end;
            }
        }
    }
    Ok(out)
}

/// `exp(E[log T | T > x])`; for the exponential family `x + 1 / lambda`.
pub fn conditional_mean_time(model: &ComponentModel, x: f64) -> f64 {
    if let Some(lambda) = model.rate() {
        return x + 1.0 / lambda;
    }
    let a = model.standardize(x);
    let fam = model.family();
    let tail_mean = match fam {
        LifetimeFamily::Weibull => {
            // with V = e^W ~ Exp(1): E[W | W > a] = a + e^{v} E1(v), v = e^a
            a + scaled_exp_integral(a.exp())
        }
        LifetimeFamily::LogNormal => a + mills_excess(a),
        _ => {
            let pa = fam.standardized_cdf(a);
            let num = adaptive_simpson(&|p: f64| if p >= 1.0 { 0.0 } else { fam.quantile_unchecked(p) }, pa, 1.0 - 1e-15, 1e-12);
            num / (1.0 - pa)
        }
    };
    let w = tail_mean.max(a + f64::EPSILON * a.abs().max(1.0));
    (model.mu() + model.sigma() * w).exp().max(x * (1.0 + f64::EPSILON))
}

/// `phi(a) / (1 - Phi(a)) - a`, i.e. `E[Z | Z > a] - a`, stable for large `a`.
fn mills_excess(a: f64) -> f64 {
    if a < 5.0 {
        normal_pdf(a) / crate::distributions::normal_sf(a) - a
    } else {
        // continued fraction for the Mills ratio R(a) = sf / pdf
        let mut f = a;
        for k in (1..60).rev() {
            f = a + k as f64 / f;
        }
        let ratio = 1.0 / f;
        1.0 / ratio - a
    }
}

/// Time at which the conditional survival beyond `x` equals `frac`.
fn conditional_quantile_time(model: &ComponentModel, x: f64, frac: f64) -> f64 {
    if let Some(lambda) = model.rate() {
        return x - frac.ln() / lambda;
    }
    let a = model.standardize(x);
    let q = model.family().standardized_sf(a) * frac;
    let w = model.family().upper_quantile(q);
    (model.mu() + model.sigma() * w).exp().max(x * (1.0 + f64::EPSILON))
}

/// Censored log-likelihood: log densities of failures plus log survival of
/// censored rows.
pub fn censored_loglik(model: &ComponentModel, data: &CensoredDataset) -> f64 {
    let fam = model.family();
    data.rows()
        .iter()
        .map(|&(x, cens)| match (model.rate(), cens) {
            (Some(lambda), false) => lambda.ln() - lambda * x,
            (Some(lambda), true) => -lambda * x,
            (None, false) => fam.standardized_pdf(model.standardize(x)).ln() - model.sigma().ln() - x.ln(),
            (None, true) => fam.standardized_sf(model.standardize(x)).ln(),
        })
        .sum()
}

/// Observed information (negative Hessian of the censored log-likelihood,
/// central differences with relative step 1e-5).
pub fn observed_information(model: &ComponentModel, data: &CensoredDataset) -> Result<Information> {
    if let Some(lambda) = model.rate() {
        let d = data.n_tilde() as f64;
        return Ok(Information::scalar(d / (lambda * lambda)));
    }
    let fam = model.family().clone();
    let f = |p: [f64; 2]| match ComponentModel::new(fam.clone(), p[0], p[1]) {
        Ok(m) => censored_loglik(&m, data),
        Err(_) => f64::NAN,
    };
    let (_, h) = gradient_hessian(&f, [model.mu(), model.sigma()], 1e-5);
    let info = Information { dim: 2, matrix: [[-h[0][0], -h[0][1]], [-h[1][0], -h[1][1]]] };
    if info.inverse().is_none() || info.matrix[0][0] <= 0.0 {
        return Err(Error::SingularInformation(0));
    }
    Ok(info)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{normal_sf, sample_lifetimes};
    use crate::rng::SeedStream;

    #[test]
    fn type2_examples() {
        let d = type2_censor(&[3.0, 1.0, 2.0], 2).unwrap();
        assert_eq!(d.rows(), &[(1.0, false), (2.0, false), (2.0, true)]);
        let full = type2_censor(&[3.0, 1.0, 2.0], 3).unwrap();
        assert_eq!(full.censored_count(), 0);
        let times: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let ten = type2_censor(&times, observed_failures(10, 0.3)).unwrap();
        assert_eq!(observed_failures(10, 0.3), 7);
        assert_eq!(ten.censored_count(), 3);
        assert!(type2_censor(&times, 0).is_err());
        assert!(type2_censor(&times, 11).is_err());
    }

    #[test]
    fn observed_failures_ceiling() {
        assert_eq!(observed_failures(20, 0.3), 14);
        assert_eq!(observed_failures(5, 0.3), 4);
        assert_eq!(observed_failures(50, 0.3), 35);
    }

    #[test]
    fn impute_without_censoring_is_identity() {
        let d = CensoredDataset::complete(vec![2.0, 1.0, 3.0]).unwrap();
        assert_eq!(impute(&LifetimeFamily::Weibull, &d, ImputeMode::ConditionalMean).unwrap(), vec![2.0, 1.0, 3.0]);
    }

    #[test]
    fn exponential_imputation_is_memoryless() {
        let d = type2_censor(&[0.5, 1.0, 1.5, 2.0, 7.0], 3).unwrap();
        let lambda = mle_fit(&LifetimeFamily::Exponential, &d.times(), Some(&d.censored_flags()))
            .unwrap()
            .model
            .rate()
            .unwrap();
        // d / T with T = 0.5 + 1 + 1.5 + 1.5 + 1.5
        assert!((lambda - 3.0 / 6.0).abs() < 1e-15);
        let out = impute(&LifetimeFamily::Exponential, &d, ImputeMode::ConditionalMean).unwrap();
        assert!((out[3] - (1.5 + 1.0 / lambda)).abs() < 1e-12);
        assert!((out[4] - (1.5 + 1.0 / lambda)).abs() < 1e-12);
    }

    #[test]
    fn lognormal_conditional_mean_matches_quadrature() {
        let model = ComponentModel::new(LifetimeFamily::LogNormal, 0.4, 0.8).unwrap();
        for &x in &[0.5, 1.5, 4.0, 12.0] {
            let a = model.standardize(x);
            // oracle: composite Simpson on [a, a + 40] of z phi(z), divided by sf(a)
            let steps = 400_000;
            let h = 40.0 / steps as f64;
            let mut acc = 0.0;
            for k in 0..=steps {
                let z = a + k as f64 * h;
                let w = if k == 0 || k == steps { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * z * normal_pdf(z);
            }
            let expected_log = 0.4 + 0.8 * (acc * h / 3.0 / normal_sf(a));
            let got = conditional_mean_time(&model, x).ln();
            assert!((got - expected_log).abs() < 1e-8, "x={x}: {got} vs {expected_log}");
        }
    }

    #[test]
    fn weibull_conditional_mean_matches_quadrature() {
        let model = ComponentModel::new(LifetimeFamily::Weibull, 0.2, 0.6).unwrap();
        for &x in &[0.3, 1.0, 2.5] {
            let a = model.standardize(x);
            let steps = 400_000;
            let h = 30.0 / steps as f64;
            let mut acc = 0.0;
            for k in 0..=steps {
                let z = a + k as f64 * h;
                let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
                acc += w * z * (z - z.exp()).exp();
            }
            let sf = (-a.exp()).exp();
            let expected_log = 0.2 + 0.6 * (acc * h / sf);
            let got = conditional_mean_time(&model, x).ln();
            assert!((got - expected_log).abs() < 1e-7, "x={x}: {got} vs {expected_log}");
        }
    }

    #[test]
    fn imputed_values_exceed_censoring_time() {
        let truth = ComponentModel::new(LifetimeFamily::Weibull, 0.0, 1.0).unwrap();
        for seed in 0..50 {
            let mut rng = SeedStream::new(seed).rng();
            let times = sample_lifetimes(&truth, 20, &mut rng).unwrap();
            let d = type2_censor(&times, 14).unwrap();
            for fam in [LifetimeFamily::Weibull, LifetimeFamily::LogNormal, LifetimeFamily::Exponential] {
                for mode in [ImputeMode::ConditionalMean, ImputeMode::ConditionalQuantile] {
                    let out = impute(&fam, &d, mode).unwrap();
                    for (v, &(x, c)) in out.iter().zip(d.rows()) {
                        if c {
                            assert!(*v > x, "{fam:?} {mode:?}");
                        } else {
                            assert_eq!(*v, x);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn loglik_of_complete_data_is_sum_of_log_densities() {
        let m = ComponentModel::new(LifetimeFamily::Weibull, 0.5, 1.5).unwrap();
        let times = vec![0.4, 1.3, 2.2, 5.0];
        let d = CensoredDataset::complete(times.clone()).unwrap();
        let direct: f64 = times.iter().map(|&t| m.density(t).ln()).sum();
        assert!((censored_loglik(&m, &d) - direct).abs() < 1e-12);
    }

    #[test]
    fn weibull_censored_mle_recovers_parameters() {
        let truth = ComponentModel::new(LifetimeFamily::Weibull, 1.0, 0.5).unwrap();
        let mut rng = SeedStream::new(5).rng();
        let times = sample_lifetimes(&truth, 10_000, &mut rng).unwrap();
        let d = type2_censor(&times, 7000).unwrap();
        let fit = mle_fit(&LifetimeFamily::Weibull, &d.times(), Some(&d.censored_flags())).unwrap();
        assert!((fit.model.mu() - 1.0).abs() < 0.03);
        assert!((fit.model.sigma() - 0.5).abs() < 0.03);
    }

    #[test]
    fn lognormal_censored_mle_recovers_parameters() {
        let truth = ComponentModel::new(LifetimeFamily::LogNormal, 0.5, 0.7).unwrap();
        let mut rng = SeedStream::new(6).rng();
        let times = sample_lifetimes(&truth, 10_000, &mut rng).unwrap();
        let d = type2_censor(&times, 7000).unwrap();
        let fit = mle_fit(&LifetimeFamily::LogNormal, &d.times(), Some(&d.censored_flags())).unwrap();
        assert!((fit.model.mu() - 0.5).abs() < 0.03);
        assert!((fit.model.sigma() - 0.7).abs() < 0.03);
    }

    #[test]
    fn uncensored_mle_agrees_across_solvers() {
        // the numeric maximizer on complete lognormal data vs the closed form
        let truth = ComponentModel::new(LifetimeFamily::LogNormal, 0.5, 0.7).unwrap();
        let mut rng = SeedStream::new(8).rng();
        let times = sample_lifetimes(&truth, 30, &mut rng).unwrap();
        let closed = mle_fit(&LifetimeFamily::LogNormal, &times, None).unwrap().model;
        // a single censored row at the maximum time with a huge value is
        // essentially uncensored information; compare on the same rows instead
        let d = CensoredDataset::complete(times.clone()).unwrap();
        let f = |p: [f64; 2]| {
            censored_loglik(&ComponentModel::new(LifetimeFamily::LogNormal, p[0], p[1].exp()).unwrap(), &d)
        };
        let (p, _) = crate::numeric::maximize_2d(&f, [0.0, 0.0], 100).unwrap();
        assert!((p[0] - closed.mu()).abs() < 1e-6);
        assert!((p[1].exp() - closed.sigma()).abs() < 1e-6);
    }

    #[test]
    fn observed_information_matches_expected_at_large_n() {
        let truth = ComponentModel::new(LifetimeFamily::Weibull, 0.0, 1.0).unwrap();
        let mut rng = SeedStream::new(9).rng();
        let times = sample_lifetimes(&truth, 20_000, &mut rng).unwrap();
        let d = CensoredDataset::complete(times).unwrap();
        let fit = mle_fit(&LifetimeFamily::Weibull, &d.times(), None).unwrap();
        let obs = observed_information(&fit.model, &d).unwrap().matrix;
        let exp = crate::estimators::fisher_information(&fit.model, d.len()).unwrap().matrix;
        for i in 0..2 {
            for j in 0..2 {
                assert!((obs[i][j] - exp[i][j]).abs() < 0.05 * exp[i][i].abs(), "{obs:?} vs {exp:?}");
            }
        }
    }
}
