//! Auxiliary statistics and the transformed-resample map.
//!
//! For a log-location-scale component the moment estimate of reliability
//! depends on the unknown parameters only through the true reliability `r`:
//!
//! ```text
//! r_hat  ~  1 - F[ (F^{-1}(1 - r) - zbar) * kappa2 / m + kappa1 ]
//! ```
//!
//! where `(zbar, m)` are the sample mean and SD of `n` standardized draws.
//! Drawing `(zbar, m)` therefore replaces "simulate a dataset and
//! re-estimate", at O(1) cost per resample for the log-normal and
//! exponential families.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::distributions::LifetimeFamily;
use crate::error::{Error, Result};
use crate::numeric::exp_in_place;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxStat {
    pub z_bar: f64,
    pub m: f64,
    pub n: usize,
}

/// How log-normal auxiliary pairs are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuxMode {
    /// Independent `zbar ~ N(0, 1/n)` and `m^2 ~ chi2(n-1)/(n-1)`.
    #[default]
    Exact,
    /// `m = sqrt((n-1)/U)`, `zbar = T m` with `T ~ t(n-1)`, `U ~ chi2(n-1)`,
    /// reproduced for comparison runs only.
    StudentT,
}

/// Reusable sampler for one `(family, n)` pair.
#[derive(Debug, Clone)]
pub struct AuxSampler {
    family: LifetimeFamily,
    n: usize,
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Standardized,
    NormalExact { chi: ChiSquared<f64> },
    NormalLiteral { chi: ChiSquared<f64>, t: StudentT<f64> },
    Gamma(Gamma<f64>),
}

impl AuxSampler {
    pub fn new(family: &LifetimeFamily, n: usize, mode: AuxMode) -> Result<Self> {
        let min = family.min_sample();
        if n < min {
            return Err(Error::SampleTooSmall { got: n, min });
        }
        let df = (n as f64) - 1.0;
        let kind = match family {
            LifetimeFamily::Exponential => SamplerKind::Gamma(
                Gamma::new(n as f64, 1.0 / n as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?,
            ),
            LifetimeFamily::LogNormal => {
                let chi = ChiSquared::new(df).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                match mode {
                    AuxMode::Exact => SamplerKind::NormalExact { chi },
                    AuxMode::StudentT => SamplerKind::NormalLiteral {
                        chi,
                        t: StudentT::new(df).map_err(|e| Error::InvalidParameter(e.to_string()))?,
                    },
                }
            }
            _ => SamplerKind::Standardized,
        };
        Ok(AuxSampler { family: family.clone(), n, kind })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> AuxStat {
        let n = self.n;
        let nf = n as f64;
        let (z_bar, m) = match &self.kind {
            SamplerKind::Gamma(g) => (0.0, g.sample(rng)),
            SamplerKind::NormalExact { chi } => {
                let z: f64 = rng.sample(StandardNormal);
                (z / nf.sqrt(), (chi.sample(rng) / (nf - 1.0)).sqrt())
            }
            SamplerKind::NormalLiteral { chi, t } => {
                let tv = t.sample(rng);
                let u = chi.sample(rng);
                let m = ((nf - 1.0) / u).sqrt();
                (tv * m, m)
            }
            SamplerKind::Standardized => {
                let mut mean = 0.0;
                let mut m2 = 0.0;
                for k in 1..=n {
                    let x = self.family.sample_standardized(rng);
                    let d = x - mean;
                    mean += d / k as f64;
                    m2 += d * (x - mean);
                }
                (mean, (m2 / (nf - 1.0)).sqrt())
            }
        };
        AuxStat { z_bar, m, n }
    }

    pub fn draw_many<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<AuxStat> {
        (0..count).map(|_| self.draw(rng)).collect()
    }
}

/// One auxiliary pair for a component of the given family and sample size.
pub fn gen_aux<R: Rng + ?Sized>(family: &LifetimeFamily, n: usize, rng: &mut R) -> Result<AuxStat> {
    Ok(AuxSampler::new(family, n, AuxMode::Exact)?.draw(rng))
}

/// Maps a reliability and an auxiliary pair to a resampled reliability.
/// Undefined on the boundary `r in {0, 1}`.
pub fn transform_reliability(family: &LifetimeFamily, r: f64, aux: &AuxStat) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::ProbabilityOutOfRange(r));
    }
    if r == 0.0 || r == 1.0 {
        return Err(Error::Boundary(r));
    }
    if !(aux.m > 0.0) {
        return Err(Error::InvalidParameter(format!("auxiliary SD must be positive, got {}", aux.m)));
    }
    let kernel = Kernel::new(family);
    Ok(kernel.apply(kernel.pre(r), &kernel.prepare(aux)))
}

/// An auxiliary pair folded into `y = q * scale + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparedAux {
    scale: f64,
    offset: f64,
}

/// Many prepared pairs stored column-wise for the slice kernels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuxSet {
    scale: Vec<f64>,
    offset: Vec<f64>,
}

impl AuxSet {
    pub fn len(&self) -> usize {
        self.scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scale.is_empty()
    }

    pub fn get(&self, l: usize) -> PreparedAux {
        PreparedAux { scale: self.scale[l], offset: self.offset[l] }
    }

    pub fn set(&mut self, l: usize, p: PreparedAux) {
        self.scale[l] = p.scale;
        self.offset[l] = p.offset;
    }
}

impl FromIterator<PreparedAux> for AuxSet {
    fn from_iter<I: IntoIterator<Item = PreparedAux>>(iter: I) -> Self {
        let (scale, offset) = iter.into_iter().map(|p| (p.scale, p.offset)).unzip();
        AuxSet { scale, offset }
    }
}

/// Per-family evaluation of the transform, split into a part that depends
/// only on the input reliability (`pre`) and a part applied per auxiliary
/// pair (`apply`), so nested loops evaluate each piece once.
///
/// With `q = pre(r)` the transform is `sf(q * scale + offset)` where
/// `scale = kappa2 / m` and `offset = kappa1 - zbar * scale`; for the
/// exponential family `q = log r` and the result is `exp(q / m)`.
#[derive(Debug, Clone)]
pub struct Kernel {
    family: LifetimeFamily,
    kappa1: f64,
    kappa2: f64,
}

impl Kernel {
    pub fn new(family: &LifetimeFamily) -> Self {
        let (kappa1, kappa2) = family.population_moments();
        Kernel { family: family.clone(), kappa1, kappa2 }
    }

    pub fn prepare(&self, aux: &AuxStat) -> PreparedAux {
        match self.family {
            LifetimeFamily::Exponential => PreparedAux { scale: 1.0 / aux.m, offset: 0.0 },
            _ => {
                let scale = self.kappa2 / aux.m;
                PreparedAux { scale, offset: self.kappa1 - aux.z_bar * scale }
            }
        }
    }

    /// `log r` for the exponential family, else `F^{-1}(1 - r)`.
    #[inline]
    pub fn pre(&self, r: f64) -> f64 {
        match self.family {
            LifetimeFamily::Exponential => r.ln(),
            LifetimeFamily::Weibull => (-r.ln()).ln(),
            _ => self.family.upper_quantile(r),
        }
    }

    #[inline]
    pub fn apply(&self, q: f64, aux: &PreparedAux) -> f64 {
        match self.family {
            LifetimeFamily::Exponential => (q * aux.scale).exp(),
            LifetimeFamily::Weibull => (-(q * aux.scale + aux.offset).exp()).exp(),
            _ => self.family.standardized_sf(q * aux.scale + aux.offset),
        }
    }

    /// Transform with the boundary treated as a fixed point. Returns the
    /// value and whether the boundary shortcut was taken.
    #[inline]
    pub fn transform_or_fixed(&self, r: f64, aux: &PreparedAux) -> (f64, bool) {
        if r <= 0.0 || r >= 1.0 {
            (r.clamp(0.0, 1.0), true)
        } else {
            (self.apply(self.pre(r), aux), false)
        }
    }

    /// Whether [`Kernel::add_hazard`] is available.
    pub fn has_hazard_form(&self) -> bool {
        matches!(self.family, LifetimeFamily::Weibull | LifetimeFamily::Exponential)
    }

    /// `out[l] = apply(q, set[l])`.
    pub fn fill_reliability(&self, q: f64, set: &AuxSet, out: &mut [f64]) {
        match self.family {
            LifetimeFamily::Exponential => {
                for (o, &a) in out.iter_mut().zip(&set.scale) {
                    *o = q * a;
                }
                exp_in_place(out);
            }
            LifetimeFamily::Weibull => {
                for ((o, &a), &b) in out.iter_mut().zip(&set.scale).zip(&set.offset) {
                    *o = q * a + b;
                }
                exp_in_place(out);
                for o in out.iter_mut() {
                    *o = -*o;
                }
                exp_in_place(out);
            }
            _ => {
                for ((o, &a), &b) in out.iter_mut().zip(&set.scale).zip(&set.offset) {
                    *o = self.family.standardized_sf(q * a + b);
                }
            }
        }
    }

    /// `acc[l] += -log apply(q, set[l])`, the cumulative hazard, for the
    /// Weibull and exponential families. `tmp` is scratch of the same length.
    pub fn add_hazard(&self, q: f64, set: &AuxSet, acc: &mut [f64], tmp: &mut [f64]) {
        match self.family {
            LifetimeFamily::Exponential => {
                for (h, &a) in acc.iter_mut().zip(&set.scale) {
                    *h -= q * a;
                }
            }
            LifetimeFamily::Weibull => {
                for ((o, &a), &b) in tmp.iter_mut().zip(&set.scale).zip(&set.offset) {
                    *o = q * a + b;
                }
                exp_in_place(tmp);
                for (h, &v) in acc.iter_mut().zip(tmp.iter()) {
                    *h += v;
                }
            }
            _ => panic!("no hazard form for the {} family", self.family.name()),
        }
    }
}
