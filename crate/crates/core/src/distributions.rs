//! Log-location-scale lifetime families.
//!
//! A lifetime `T` belongs to the family when `X = log T` has CDF
//! `F((x - mu) / sigma)` for a fixed standardized law `F`. Reliability at
//! time `t` is `1 - F((log t - mu) / sigma)`.
//!
//! Tail-sensitive quantities are computed in survival space: the
//! standardized survival function and the upper quantile `F^{-1}(1 - q)`
//! are evaluated directly rather than through `1 - p`, which keeps full
//! relative precision for reliabilities close to one.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Exp1, Open01, StandardNormal};
use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Population mean and standard deviation of the standard smallest
/// extreme value law `F_e(x) = 1 - exp(-e^x)`.
pub const WEIBULL_KAPPA: (f64, f64) = (-EULER_GAMMA, PI / 2.449_489_742_783_178);

pub const LOGNORMAL_KAPPA: (f64, f64) = (0.0, 1.0);

/// A caller-supplied standardized law for the `Generic` family.
pub trait StandardizedLaw: Send + Sync {
    fn name(&self) -> &str;
    fn cdf(&self, x: f64) -> f64;
    fn pdf(&self, x: f64) -> f64;
    fn quantile(&self, p: f64) -> f64;
    /// `(kappa1, kappa2)`: population mean and standard deviation.
    fn moments(&self) -> (f64, f64);

    fn sf(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    fn upper_quantile(&self, q: f64) -> f64 {
        self.quantile(1.0 - q)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.quantile(u)
    }
}

#[derive(Clone)]
pub enum LifetimeFamily {
    Weibull,
    LogNormal,
    Exponential,
    Generic(Arc<dyn StandardizedLaw>),
}

impl fmt::Debug for LifetimeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LifetimeFamily::Generic(law) => write!(f, "Generic({})", law.name()),
            other => f.write_str(other.name()),
        }
    }
}

impl PartialEq for LifetimeFamily {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (LifetimeFamily::Generic(a), LifetimeFamily::Generic(b)) => Arc::ptr_eq(a, b),
            (a, b) => std::mem::discriminant(a) == std::mem::discriminant(b),
        }
    }
}

/// Family names accepted in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Weibull,
    Lognormal,
    Exponential,
}

impl From<FamilyName> for LifetimeFamily {
    fn from(n: FamilyName) -> Self {
        match n {
            FamilyName::Weibull => LifetimeFamily::Weibull,
            FamilyName::Lognormal => LifetimeFamily::LogNormal,
            FamilyName::Exponential => LifetimeFamily::Exponential,
        }
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

impl LifetimeFamily {
    pub fn name(&self) -> &str {
        match self {
            LifetimeFamily::Weibull => "weibull",
            LifetimeFamily::LogNormal => "lognormal",
            LifetimeFamily::Exponential => "exponential",
            LifetimeFamily::Generic(law) => law.name(),
        }
    }

    /// Number of free parameters (1 for the exponential rate).
    pub fn dimension(&self) -> usize {
        match self {
            LifetimeFamily::Exponential => 1,
            _ => 2,
        }
    }

    /// Smallest sample size the moment estimator accepts.
    pub fn min_sample(&self) -> usize {
        self.dimension()
    }

    /// Standardized CDF. The exponential family shares the Weibull law
    /// (it is the `sigma = 1` slice).
    pub fn standardized_cdf(&self, x: f64) -> f64 {
        match self {
            LifetimeFamily::Weibull | LifetimeFamily::Exponential => -(-x.exp()).exp_m1(),
            LifetimeFamily::LogNormal => normal_cdf(x),
            LifetimeFamily::Generic(law) => law.cdf(x),
        }
    }

    pub fn standardized_sf(&self, x: f64) -> f64 {
        match self {
            LifetimeFamily::Weibull | LifetimeFamily::Exponential => (-x.exp()).exp(),
            LifetimeFamily::LogNormal => normal_sf(x),
            LifetimeFamily::Generic(law) => law.sf(x),
        }
    }

    pub fn standardized_pdf(&self, x: f64) -> f64 {
        match self {
            LifetimeFamily::Weibull | LifetimeFamily::Exponential => (x - x.exp()).exp(),
            LifetimeFamily::LogNormal => normal_pdf(x),
            LifetimeFamily::Generic(law) => law.pdf(x),
        }
    }

    /// `F^{-1}(p)` for `p` in `(0, 1)`.
    pub fn standardized_quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!("quantile level {p} not in (0, 1)")));
        }
        Ok(self.quantile_unchecked(p))
    }

    pub(crate) fn quantile_unchecked(&self, p: f64) -> f64 {
        match self {
            LifetimeFamily::Weibull | LifetimeFamily::Exponential => (-(-p).ln_1p()).ln(),
            LifetimeFamily::LogNormal => normal_quantile(p),
            LifetimeFamily::Generic(law) => law.quantile(p),
        }
    }

    /// `F^{-1}(1 - q)`, evaluated without forming `1 - q`.
    #[inline]
    pub fn upper_quantile(&self, q: f64) -> f64 {
        match self {
            LifetimeFamily::Weibull | LifetimeFamily::Exponential => (-q.ln()).ln(),
            // 1 - q is exact for q >= 1/2, so the upper half keeps full precision
            LifetimeFamily::LogNormal if q > 0.5 => normal_quantile(1.0 - q),
            LifetimeFamily::LogNormal => -normal_quantile(q),
            LifetimeFamily::Generic(law) => law.upper_quantile(q),
        }
    }

    /// `(kappa1, kappa2)`: mean and standard deviation of the standardized law.
    pub fn population_moments(&self) -> (f64, f64) {
        match self {
            LifetimeFamily::Weibull | LifetimeFamily::Exponential => WEIBULL_KAPPA,
            LifetimeFamily::LogNormal => LOGNORMAL_KAPPA,
            LifetimeFamily::Generic(law) => law.moments(),
        }
    }

    /// One draw from the standardized law.
    #[inline]
    pub fn sample_standardized<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LifetimeFamily::Weibull | LifetimeFamily::Exponential => {
                let e: f64 = rng.sample(Exp1);
                e.ln()
            }
            LifetimeFamily::LogNormal => rng.sample(StandardNormal),
            LifetimeFamily::Generic(law) => {
                let mut adapter = DynRng(rng);
                law.sample(&mut adapter)
            }
        }
    }
}

struct DynRng<'a, R: Rng + ?Sized>(&'a mut R);

impl<R: Rng + ?Sized> RngCore for DynRng<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// A component lifetime model. Exponential models are stored on the
/// location-scale slice `mu = -log(lambda)`, `sigma = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentModel {
    family: LifetimeFamily,
    mu: f64,
    sigma: f64,
}

impl ComponentModel {
    pub fn new(family: LifetimeFamily, mu: f64, sigma: f64) -> Result<Self> {
        if family == LifetimeFamily::Exponential {
            return Err(Error::InvalidParameter(
                "exponential models are built with ComponentModel::exponential".into(),
            ));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {sigma}")));
        }
        if !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("location must be finite, got {mu}")));
        }
        Ok(ComponentModel { family, mu, sigma })
    }

    pub fn exponential(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("rate must be positive, got {lambda}")));
        }
        Ok(ComponentModel { family: LifetimeFamily::Exponential, mu: -lambda.ln(), sigma: 1.0 })
    }

    pub fn family(&self) -> &LifetimeFamily {
        &self.family
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Exponential rate, when the model is exponential.
    pub fn rate(&self) -> Option<f64> {
        (self.family == LifetimeFamily::Exponential).then(|| (-self.mu).exp())
    }

    /// Standardized log-time `(log t - mu) / sigma`.
    pub fn standardize(&self, t: f64) -> f64 {
        (t.ln() - self.mu) / self.sigma
    }

    pub fn reliability(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("time must be positive, got {t}")));
        }
        Ok(self.reliability_unchecked(t))
    }

    pub(crate) fn reliability_unchecked(&self, t: f64) -> f64 {
        match &self.family {
            LifetimeFamily::Exponential => (-(-self.mu).exp() * t).exp(),
            fam => fam.standardized_sf(self.standardize(t)),
        }
    }

    /// Lifetime density `g(t)`.
    pub fn density(&self, t: f64) -> f64 {
        self.family.standardized_pdf(self.standardize(t)) / (self.sigma * t)
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.family {
            LifetimeFamily::Exponential => {
                let e: f64 = rng.sample(Exp1);
                e / (-self.mu).exp()
            }
            fam => (self.mu + self.sigma * fam.sample_standardized(rng)).exp(),
        }
    }
}

/// Component reliability `1 - F((log t - mu) / sigma)`.
pub fn component_reliability(model: &ComponentModel, t: f64) -> Result<f64> {
    model.reliability(t)
}

/// `n` independent lifetimes from `model`.
pub fn sample_lifetimes<R: Rng + ?Sized>(model: &ComponentModel, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    Ok((0..n).map(|_| model.sample_one(rng)).collect())
}
