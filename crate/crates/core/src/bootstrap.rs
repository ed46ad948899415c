//! Bootstrap lower confidence limits for system reliability.
//!
//! All bootstrap paths start from component moment estimates. The
//! percentile (BP), basic (BB) and transformed double bootstrap (DBPT)
//! limits draw resampled reliabilities through the auxiliary-statistic
//! transform; the conventional double bootstrap (DBP) resamples whole
//! datasets and is kept as a slow reference implementation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{sample_lifetimes, LifetimeFamily};
use crate::error::{Error, Result};
use crate::estimators::{moment_estimate, MomentEstimate};
use crate::resampling::{AuxMode, AuxSampler, AuxSet, Kernel};
use crate::rng::{tag, SeedStream};
use crate::stats::{ceil_rank, kth_smallest};
use crate::structures::{CompiledStructure, StructureNode};

/// Default first-layer resample count.
pub const DEFAULT_B: usize = 1000;
/// Default second-layer resample count.
pub const DEFAULT_C: usize = 500;
pub const DEFAULT_ALPHA: f64 = 0.1;

// Below this many inner evaluations the j-loop stays sequential.
const PAR_THRESHOLD: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Delta,
    Bp,
    Bb,
    Dbpt,
    DbpOracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Delta => "delta",
            Method::Bp => "bp",
            Method::Bb => "bb",
            Method::Dbpt => "dbpt",
            Method::DbpOracle => "dbp-oracle",
        }
    }

    /// Whether the limit is built to stay inside `[0, 1]`.
    pub fn is_range_preserving(self) -> bool {
        matches!(self, Method::Bp | Method::Dbpt | Method::DbpOracle)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "delta" => Ok(Method::Delta),
            "bp" => Ok(Method::Bp),
            "bb" => Ok(Method::Bb),
            "dbpt" => Ok(Method::Dbpt),
            "dbp" | "dbp-oracle" | "dbp_oracle" => Ok(Method::DbpOracle),
            other => Err(Error::Input(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Resampled reliabilities that sat exactly on 0 or 1 and were passed
    /// through unchanged.
    pub boundary_transforms: usize,
    /// Second-layer values tied with the point estimate (counted as covered).
    pub ties: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LclResult {
    pub method: Method,
    /// The reported limit. Range-preserving methods always land in `[0, 1]`;
    /// BB and delta report the raw value.
    pub lcl: f64,
    pub raw_value: f64,
    /// `raw_value` clamped to `[0, 1]`.
    pub clamped: f64,
    pub fell_outside: bool,
    pub r_hat: f64,
    pub alpha: f64,
    pub t: f64,
    #[serde(rename = "B")]
    pub b: Option<usize>,
    #[serde(rename = "C")]
    pub c: Option<usize>,
    pub diagnostics: Diagnostics,
}

impl LclResult {
    pub fn from_raw(method: Method, raw: f64, r_hat: f64, alpha: f64, t: f64) -> Self {
        LclResult {
            method,
            lcl: raw,
            raw_value: raw,
            clamped: raw.clamp(0.0, 1.0),
            fell_outside: !(0.0..=1.0).contains(&raw),
            r_hat,
            alpha,
            t,
            b: None,
            c: None,
            diagnostics: Diagnostics::default(),
        }
    }

    fn with_sizes(mut self, b: usize, c: Option<usize>) -> Self {
        self.b = Some(b);
        self.c = c;
        self
    }

    fn with_diagnostics(mut self, d: Diagnostics) -> Self {
        self.diagnostics = d;
        self
    }
}

/// `alpha` must lie in `(0, max)`.
pub fn check_alpha(alpha: f64, max: f64) -> Result<()> {
    if alpha > 0.0 && alpha < max {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must be in (0, {max}), got {alpha}")))
    }
}

/// Resample counts and level for a bootstrap limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapParams {
    pub alpha: f64,
    pub b: usize,
    pub c: usize,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        BootstrapParams { alpha: DEFAULT_ALPHA, b: DEFAULT_B, c: DEFAULT_C }
    }
}

impl BootstrapParams {
    pub fn new(alpha: f64, b: usize, c: usize) -> Self {
        BootstrapParams { alpha, b, c }
    }

    pub fn validate(&self, needs_c: bool) -> Result<()> {
        check_alpha(self.alpha, 1.0)?;
        let min_b = (1.0 / self.alpha - 1e-9).ceil() as usize;
        if self.b < min_b {
            return Err(Error::InvalidParameter(format!(
                "B = {} is too small for alpha = {} (need at least {min_b})",
                self.b, self.alpha
            )));
        }
        if needs_c && self.c == 0 {
            return Err(Error::InvalidParameter("C must be at least 1".into()));
        }
        Ok(())
    }
}

/// Component moment estimates plus the structure they feed.
#[derive(Debug, Clone)]
pub struct FittedSystem {
    pub structure: StructureNode,
    pub estimates: Vec<MomentEstimate>,
}

impl FittedSystem {
    pub fn fit(structure: &StructureNode, families: &[LifetimeFamily], datasets: &[Vec<f64>]) -> Result<Self> {
        structure.validate()?;
        let s = structure.component_count();
        if families.len() != s {
            return Err(Error::LengthMismatch { expected: s, got: families.len() });
        }
        if datasets.len() != s {
            return Err(Error::LengthMismatch { expected: s, got: datasets.len() });
        }
        let estimates = families
            .iter()
            .zip(datasets)
            .map(|(f, d)| moment_estimate(f, d))
            .collect::<Result<Vec<_>>>()?;
        Ok(FittedSystem { structure: structure.clone(), estimates })
    }

    pub fn families(&self) -> Vec<LifetimeFamily> {
        self.estimates.iter().map(|e| e.family.clone()).collect()
    }

    pub fn sample_sizes(&self) -> Vec<usize> {
        self.estimates.iter().map(|e| e.n).collect()
    }

    /// Component reliability estimates at `t`.
    pub fn component_reliabilities(&self, t: f64) -> Result<Vec<f64>> {
        self.estimates.iter().map(|e| e.reliability_at(t)).collect()
    }

    pub fn r_hat(&self, t: f64) -> Result<f64> {
        Ok(self.structure.eval(&self.component_reliabilities(t)?))
    }
}

/// Auxiliary pairs for both bootstrap layers, generated once per fitted
/// system and reusable across mission times (common random numbers).
#[derive(Debug, Clone)]
pub struct AuxTables {
    kernels: Vec<Kernel>,
    /// `first[i]` holds the B first-layer pairs of component `i`.
    first: Vec<AuxSet>,
    /// `second[i]` holds the C second-layer pairs, shared by every
    /// first-layer index.
    second: Vec<AuxSet>,
    seed: u64,
}

impl AuxTables {
    pub fn generate(
        families: &[LifetimeFamily],
        sizes: &[usize],
        b: usize,
        c: usize,
        mode: AuxMode,
        stream: &SeedStream,
    ) -> Result<Self> {
        let mut kernels = Vec::with_capacity(families.len());
        let mut first = Vec::with_capacity(families.len());
        let mut second = Vec::with_capacity(families.len());
        for (i, (fam, &n)) in families.iter().zip(sizes).enumerate() {
            let sampler = AuxSampler::new(fam, n, mode)?;
            let kernel = Kernel::new(fam);
            let mut rng = stream.path(&[tag::FIRST_LAYER, i as u64]).rng();
            first.push((0..b).map(|_| kernel.prepare(&sampler.draw(&mut rng))).collect());
            let mut rng = stream.path(&[tag::SECOND_LAYER, i as u64]).rng();
            second.push((0..c).map(|_| kernel.prepare(&sampler.draw(&mut rng))).collect());
            kernels.push(kernel);
        }
        Ok(AuxTables { kernels, first, second, seed: stream.key() })
    }

    pub fn for_system(system: &FittedSystem, params: &BootstrapParams, mode: AuxMode, stream: &SeedStream) -> Result<Self> {
        Self::generate(&system.families(), &system.sample_sizes(), params.b, params.c, mode, stream)
    }

    pub fn b(&self) -> usize {
        self.first.first().map_or(0, AuxSet::len)
    }

    pub fn c(&self) -> usize {
        self.second.first().map_or(0, AuxSet::len)
    }

    /// First-layer component reliabilities `r*[j][i]` and system values `R*[j]`.
    fn first_layer(&self, structure: &StructureNode, r_hat: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>, usize) {
        let s = self.kernels.len();
        let b = self.b();
        let mut boundary = 0;
        let q: Vec<f64> = (0..s)
            .map(|i| if r_hat[i] > 0.0 && r_hat[i] < 1.0 { self.kernels[i].pre(r_hat[i]) } else { f64::NAN })
            .collect();
        let mut comps = Vec::with_capacity(b);
        let mut sys = Vec::with_capacity(b);
        for j in 0..b {
            let row: Vec<f64> = (0..s)
                .map(|i| {
                    if q[i].is_nan() {
                        boundary += 1;
                        r_hat[i]
                    } else {
                        self.kernels[i].apply(q[i], &self.first[i].get(j))
                    }
                })
                .collect();
            sys.push(structure.eval(&row));
            comps.push(row);
        }
        (comps, sys, boundary)
    }
}

/// Resampled system reliabilities `R*_j` for one mission time.
pub fn first_layer_system(structure: &StructureNode, tables: &AuxTables, r_hat: &[f64]) -> (Vec<f64>, usize) {
    let (_, sys, boundary) = tables.first_layer(structure, r_hat);
    (sys, boundary)
}

fn bootstrap_stream(stream: &SeedStream) -> SeedStream {
    stream.child(tag::BOOTSTRAP)
}

/// Percentile limit from precomputed tables: the `ceil(B alpha)`-th
/// smallest `R*_j`.
pub fn bp_from_tables(system: &FittedSystem, tables: &AuxTables, t: f64, alpha: f64) -> Result<LclResult> {
    let r = system.component_reliabilities(t)?;
    let r_hat = system.structure.eval(&r);
    let (mut sys, boundary) = first_layer_system(&system.structure, tables, &r);
    let k = ceil_rank(sys.len(), alpha);
    let v = kth_smallest(&mut sys, k);
    Ok(LclResult::from_raw(Method::Bp, v, r_hat, alpha, t)
        .with_sizes(tables.b(), None)
        .with_diagnostics(Diagnostics { boundary_transforms: boundary, ties: 0, seed: Some(tables.seed) }))
}

/// Basic limit from precomputed tables: `2 R_hat - R*_(ceil(B (1 - alpha)))`.
pub fn bb_from_tables(system: &FittedSystem, tables: &AuxTables, t: f64, alpha: f64) -> Result<LclResult> {
    let r = system.component_reliabilities(t)?;
    let r_hat = system.structure.eval(&r);
    let (mut sys, boundary) = first_layer_system(&system.structure, tables, &r);
    let k = ceil_rank(sys.len(), 1.0 - alpha);
    let upper = kth_smallest(&mut sys, k);
    Ok(LclResult::from_raw(Method::Bb, 2.0 * r_hat - upper, r_hat, alpha, t)
        .with_sizes(tables.b(), None)
        .with_diagnostics(Diagnostics { boundary_transforms: boundary, ties: 0, seed: Some(tables.seed) }))
}

/// `ceil(B * count / C)` in exact integer arithmetic, clamped to `[1, B]`.
fn recalibrated_rank(b: usize, count: usize, c: usize) -> usize {
    ((b * count + c - 1) / c).clamp(1, b)
}

/// Transformed double bootstrap from precomputed tables.
///
/// For each first-layer index `j` the shared second-layer pairs are pushed
/// through the transform a second time, `u_j` is the fraction of
/// `R**_{j,l} <= R_hat`, and the percentile level is recalibrated to the
/// `ceil(B alpha)`-th smallest `u_j`.
pub fn dbpt_from_tables(system: &FittedSystem, tables: &AuxTables, t: f64, alpha: f64) -> Result<LclResult> {
    let r = system.component_reliabilities(t)?;
    let r_hat = system.structure.eval(&r);
    let structure = &system.structure;
    let (comps, mut sys, mut boundary) = tables.first_layer(structure, &r);
    let (b, c, s) = (tables.b(), tables.c(), tables.kernels.len());

    let compiled = CompiledStructure::new(structure);
    // Plain series of Weibull/exponential components: compare cumulative
    // hazards, -log R** >= -log R_hat, and skip one exponential per term.
    let hazard_leaves = compiled
        .series_leaves()
        .filter(|ids| ids.iter().all(|&i| tables.kernels[i].has_hazard_form()));
    let h_hat = -r_hat.ln();

    struct Scratch {
        buf: Vec<f64>,
        tmp: Vec<f64>,
        r: Vec<f64>,
        stack: Vec<f64>,
    }
    let scratch = || Scratch { buf: vec![0.0; c * s], tmp: vec![0.0; c], r: vec![0.0; s], stack: Vec::new() };

    // (count of R** <= R_hat, ties, boundary pass-throughs) for one j
    let inner = |sc: &mut Scratch, row: &Vec<f64>| -> (usize, usize, usize) {
        let mut bnd = 0;
        let mut count = 0;
        let mut ties = 0;
        if let Some(ids) = hazard_leaves {
            let acc = &mut sc.buf[..c];
            acc.fill(0.0);
            for &i in ids {
                let ri = row[i];
                if ri > 0.0 && ri < 1.0 {
                    let kernel = &tables.kernels[i];
                    kernel.add_hazard(kernel.pre(ri), &tables.second[i], acc, &mut sc.tmp);
                } else {
                    bnd += c;
                    let h = -ri.ln();
                    acc.iter_mut().for_each(|a| *a += h);
                }
            }
            for &h in acc.iter() {
                if h >= h_hat {
                    count += 1;
                    ties += usize::from(h == h_hat);
                }
            }
        } else {
            for i in 0..s {
                let ri = row[i];
                let out = &mut sc.buf[i * c..(i + 1) * c];
                if ri > 0.0 && ri < 1.0 {
                    let kernel = &tables.kernels[i];
                    kernel.fill_reliability(kernel.pre(ri), &tables.second[i], out);
                } else {
                    bnd += c;
                    out.fill(ri);
                }
            }
            for l in 0..c {
                for i in 0..s {
                    sc.r[i] = sc.buf[i * c + l];
                }
                let v = compiled.eval(&sc.r, &mut sc.stack);
                if v <= r_hat {
                    count += 1;
                    ties += usize::from(v == r_hat);
                }
            }
        }
        (count, ties, bnd)
    };

    let counts: Vec<(usize, usize, usize)> = if b * c * s >= PAR_THRESHOLD {
        comps.par_iter().map_init(scratch, inner).collect()
    } else {
        let mut sc = scratch();
        comps.iter().map(|row| inner(&mut sc, row)).collect()
    };
    let mut u: Vec<usize> = counts.iter().map(|x| x.0).collect();
    let ties = counts.iter().map(|x| x.1).sum();
    boundary += counts.iter().map(|x| x.2).sum::<usize>();

    let k = ceil_rank(b, alpha);
    let u_k = kth_smallest_usize(&mut u, k);
    let k_prime = recalibrated_rank(b, u_k, c);
    let v = kth_smallest(&mut sys, k_prime);
    Ok(LclResult::from_raw(Method::Dbpt, v, r_hat, alpha, t)
        .with_sizes(b, Some(c))
        .with_diagnostics(Diagnostics { boundary_transforms: boundary, ties, seed: Some(tables.seed) }))
}

fn kth_smallest_usize(xs: &mut [usize], k: usize) -> usize {
    *xs.select_nth_unstable(k - 1).1
}

fn fit_and_tables(
    structure: &StructureNode,
    families: &[LifetimeFamily],
    datasets: &[Vec<f64>],
    params: &BootstrapParams,
    needs_c: bool,
    stream: &SeedStream,
) -> Result<(FittedSystem, AuxTables)> {
    params.validate(needs_c)?;
    let system = FittedSystem::fit(structure, families, datasets)?;
    let p = if needs_c { *params } else { BootstrapParams { c: 0, ..*params } };
    let tables = AuxTables::for_system(&system, &p, AuxMode::Exact, &bootstrap_stream(stream))?;
    Ok((system, tables))
}

/// Percentile bootstrap LCL of system reliability at `t`.
pub fn bp_lcl(
    structure: &StructureNode,
    families: &[LifetimeFamily],
    datasets: &[Vec<f64>],
    t: f64,
    params: &BootstrapParams,
    stream: &SeedStream,
) -> Result<LclResult> {
    let (system, tables) = fit_and_tables(structure, families, datasets, params, false, stream)?;
    bp_from_tables(&system, &tables, t, params.alpha)
}

/// Basic bootstrap LCL; may leave `[0, 1]`.
pub fn bb_lcl(
    structure: &StructureNode,
    families: &[LifetimeFamily],
    datasets: &[Vec<f64>],
    t: f64,
    params: &BootstrapParams,
    stream: &SeedStream,
) -> Result<LclResult> {
    let (system, tables) = fit_and_tables(structure, families, datasets, params, false, stream)?;
    bb_from_tables(&system, &tables, t, params.alpha)
}

/// Double bootstrap percentile LCL with transformed resamples.
pub fn dbpt_lcl(
    structure: &StructureNode,
    families: &[LifetimeFamily],
    datasets: &[Vec<f64>],
    t: f64,
    params: &BootstrapParams,
    stream: &SeedStream,
) -> Result<LclResult> {
    let (system, tables) = fit_and_tables(structure, families, datasets, params, true, stream)?;
    dbpt_from_tables(&system, &tables, t, params.alpha)
}

/// Conventional double bootstrap: every resample is a simulated dataset
/// that is re-estimated. Cost grows with the sample sizes; intended as a
/// reference for the transformed version.
pub fn dbp_lcl_oracle(
    structure: &StructureNode,
    families: &[LifetimeFamily],
    datasets: &[Vec<f64>],
    t: f64,
    params: &BootstrapParams,
    stream: &SeedStream,
) -> Result<LclResult> {
    params.validate(true)?;
    let system = FittedSystem::fit(structure, families, datasets)?;
    let r_hat = system.r_hat(t)?;
    let (b, c, alpha) = (params.b, params.c, params.alpha);
    let root = stream.child(tag::RESAMPLE);
    let models: Vec<_> = system.estimates.iter().map(|e| e.model()).collect();

    // Returns (R*_j, count of R**_{j,l} <= R_hat, ties).
    let one = |j: usize| -> Result<(f64, usize, usize)> {
        let mut rng = root.child(j as u64).rng();
        let refit: Vec<MomentEstimate> = models
            .iter()
            .zip(&system.estimates)
            .map(|(m, e)| moment_estimate(m.family(), &sample_lifetimes(m, e.n, &mut rng)?))
            .collect::<Result<_>>()?;
        let r_star: Vec<f64> = refit.iter().map(|e| e.reliability_at(t)).collect::<Result<_>>()?;
        let sys_star = structure.eval(&r_star);
        let inner_models: Vec<_> = refit.iter().map(|e| e.model()).collect();
        let mut count = 0;
        let mut ties = 0;
        let mut rr = vec![0.0; inner_models.len()];
        for _ in 0..c {
            for (i, (m, e)) in inner_models.iter().zip(&refit).enumerate() {
                let data = sample_lifetimes(m, e.n, &mut rng)?;
                rr[i] = moment_estimate(m.family(), &data)?.reliability_at(t)?;
            }
            let v = structure.eval(&rr);
            if v <= r_hat {
                count += 1;
                if v == r_hat {
                    ties += 1;
                }
            }
        }
        Ok((sys_star, count, ties))
    };

    let rows: Vec<(f64, usize, usize)> = (0..b).into_par_iter().map(one).collect::<Result<_>>()?;
    let mut sys: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut u: Vec<usize> = rows.iter().map(|r| r.1).collect();
    let ties = rows.iter().map(|r| r.2).sum();
    let k = ceil_rank(b, alpha);
    let k_prime = recalibrated_rank(b, kth_smallest_usize(&mut u, k), c);
    let v = kth_smallest(&mut sys, k_prime);
    Ok(LclResult::from_raw(Method::DbpOracle, v, r_hat, alpha, t)
        .with_sizes(b, Some(c))
        .with_diagnostics(Diagnostics { boundary_transforms: 0, ties, seed: Some(root.key()) }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ComponentModel;
    use crate::structures::parse_structure;

    fn exp_data(lambda: f64, n: usize, seed: u64) -> Vec<f64> {
        let m = ComponentModel::exponential(lambda).unwrap();
        sample_lifetimes(&m, n, &mut SeedStream::new(seed).rng()).unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Delta, Method::Bp, Method::Bb, Method::Dbpt, Method::DbpOracle] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("bca".parse::<Method>().is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(BootstrapParams::new(0.1, 10, 1).validate(true).is_ok());
        assert!(BootstrapParams::new(0.1, 9, 1).validate(true).is_err());
        assert!(BootstrapParams::new(0.1, 10, 0).validate(true).is_err());
        assert!(BootstrapParams::new(0.1, 10, 0).validate(false).is_ok());
        assert!(BootstrapParams::new(0.0, 10, 1).validate(false).is_err());
        assert!(BootstrapParams::new(1.0, 10, 1).validate(false).is_err());
    }

    #[test]
    fn recalibrated_rank_is_exact_ceiling() {
        assert_eq!(recalibrated_rank(1000, 0, 500), 1);
        assert_eq!(recalibrated_rank(1000, 50, 500), 100);
        assert_eq!(recalibrated_rank(1000, 51, 500), 102);
        assert_eq!(recalibrated_rank(10, 1, 3), 4);
        assert_eq!(recalibrated_rank(10, 3, 3), 10);
    }

    #[test]
    fn bp_with_ten_resamples_is_the_minimum() {
        let s = parse_structure("c1").unwrap();
        let fam = [LifetimeFamily::Exponential];
        let data = [exp_data(1.0, 8, 1)];
        let stream = SeedStream::new(9);
        let params = BootstrapParams::new(0.1, 10, 0);
        let res = bp_lcl(&s, &fam, &data, 0.1, &params, &stream).unwrap();
        let system = FittedSystem::fit(&s, &fam, &data).unwrap();
        let tables = AuxTables::for_system(&system, &params, AuxMode::Exact, &bootstrap_stream(&stream)).unwrap();
        let (sys, _) = first_layer_system(&s, &tables, &system.component_reliabilities(0.1).unwrap());
        let min = sys.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(res.lcl, min);
        assert_eq!(res.b, Some(10));
    }

    #[test]
    fn bb_arithmetic_and_degenerate_case() {
        // boundary r_hat = 1 keeps every resample at R_hat, so BB = R_hat
        let s = parse_structure("c1").unwrap();
        let fam = [LifetimeFamily::Exponential];
        let data = [exp_data(1.0, 8, 2)];
        let system = FittedSystem::fit(&s, &fam, &data).unwrap();
        let params = BootstrapParams::new(0.1, 20, 0);
        let tables = AuxTables::for_system(&system, &params, AuxMode::Exact, &SeedStream::new(1)).unwrap();
        let res = bb_from_tables(&system, &tables, 1e-320, 0.1).unwrap();
        assert_eq!(res.r_hat, 1.0);
        assert_eq!(res.lcl, 1.0);
        assert_eq!(res.diagnostics.boundary_transforms, 20);
        let r = LclResult::from_raw(Method::Bb, 2.0 * 0.99 - 0.999, 0.99, 0.1, 1.0);
        assert!((r.raw_value - 0.981).abs() < 1e-12);
        let r = LclResult::from_raw(Method::Bb, 1.003, 0.999, 0.1, 1.0);
        assert!(r.fell_outside);
        assert_eq!(r.clamped, 1.0);
    }

    #[test]
    fn dbpt_with_one_inner_resample_above_r_hat_returns_minimum() {
        // Hand-built tables: the single second-layer pair maps every value up.
        let s = parse_structure("c1").unwrap();
        let fam = [LifetimeFamily::Exponential];
        let data = [exp_data(1.0, 10, 3)];
        let system = FittedSystem::fit(&s, &fam, &data).unwrap();
        let params = BootstrapParams::new(0.1, 50, 1);
        let mut tables = AuxTables::for_system(&system, &params, AuxMode::Exact, &SeedStream::new(5)).unwrap();
        let kernel = Kernel::new(&LifetimeFamily::Exponential);
        tables.second[0].set(0, kernel.prepare(&crate::resampling::AuxStat { z_bar: 0.0, m: 1e6, n: 10 }));
        let res = dbpt_from_tables(&system, &tables, 0.5, 0.1).unwrap();
        let (sys, _) = first_layer_system(&s, &tables, &system.component_reliabilities(0.5).unwrap());
        let min = sys.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(res.lcl, min);
    }

    #[test]
    fn range_preserving_methods_stay_in_unit_interval() {
        let s = parse_structure("series(c1, parallel(c2, c3))").unwrap();
        let fam = vec![LifetimeFamily::Weibull; 3];
        let data: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                let m = ComponentModel::new(LifetimeFamily::Weibull, 1.0, 0.5).unwrap();
                sample_lifetimes(&m, 6, &mut SeedStream::new(40 + i).rng()).unwrap()
            })
            .collect();
        let params = BootstrapParams::new(0.1, 100, 50);
        for t in [1e-3, 0.5, 2.7, 10.0, 1e3] {
            for f in [bp_lcl, dbpt_lcl] {
                let r = f(&s, &fam, &data, t, &params, &SeedStream::new(3)).unwrap();
                assert!((0.0..=1.0).contains(&r.lcl) && !r.fell_outside, "{r:?}");
            }
        }
    }

    #[test]
    fn dbpt_is_deterministic_across_pool_sizes() {
        let s = parse_structure("series(c1, c2)").unwrap();
        let fam = vec![LifetimeFamily::LogNormal; 2];
        let data: Vec<Vec<f64>> = (0..2)
            .map(|i| {
                let m = ComponentModel::new(LifetimeFamily::LogNormal, 2.0, 0.8).unwrap();
                sample_lifetimes(&m, 12, &mut SeedStream::new(i).rng()).unwrap()
            })
            .collect();
        let params = BootstrapParams::new(0.1, 300, 200);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| dbpt_lcl(&s, &fam, &data, 3.0, &params, &SeedStream::new(77)).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn series_fast_path_matches_general_evaluation() {
        // koutofn(2; c1, c2) is the same structure function as series(c1, c2)
        // but goes through the general evaluator
        let fam = vec![LifetimeFamily::Weibull, LifetimeFamily::Exponential];
        let models = [ComponentModel::new(LifetimeFamily::Weibull, 1.0, 0.6).unwrap(), ComponentModel::exponential(0.2).unwrap()];
        let data: Vec<Vec<f64>> = models
            .iter()
            .enumerate()
            .map(|(i, m)| sample_lifetimes(m, 9, &mut SeedStream::new(60 + i as u64).rng()).unwrap())
            .collect();
        let params = BootstrapParams::new(0.1, 400, 300);
        let series = parse_structure("series(c1, c2)").unwrap();
        let kofn = parse_structure("koutofn(2; c1, c2)").unwrap();
        for t in [0.3, 1.0, 2.5] {
            let a = dbpt_lcl(&series, &fam, &data, t, &params, &SeedStream::new(4)).unwrap();
            let b = dbpt_lcl(&kofn, &fam, &data, t, &params, &SeedStream::new(4)).unwrap();
            assert!((a.lcl - b.lcl).abs() < 1e-12, "{a:?} {b:?}");
        }
    }

    #[test]
    fn bp_is_monotone_in_t_with_shared_tables() {
        let s = parse_structure("koutofn(2; c1, c2, c3)").unwrap();
        let fam = vec![LifetimeFamily::Weibull, LifetimeFamily::LogNormal, LifetimeFamily::Exponential];
        let models = [
            ComponentModel::new(LifetimeFamily::Weibull, 1.0, 0.7).unwrap(),
            ComponentModel::new(LifetimeFamily::LogNormal, 0.5, 1.0).unwrap(),
            ComponentModel::exponential(0.3).unwrap(),
        ];
        let data: Vec<Vec<f64>> = models
            .iter()
            .enumerate()
            .map(|(i, m)| sample_lifetimes(m, 7, &mut SeedStream::new(100 + i as u64).rng()).unwrap())
            .collect();
        let system = FittedSystem::fit(&s, &fam, &data).unwrap();
        let params = BootstrapParams::new(0.1, 200, 0);
        let tables = AuxTables::for_system(&system, &params, AuxMode::Exact, &SeedStream::new(8)).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..60 {
            let t = 0.05 * 1.12f64.powi(k);
            let v = bp_from_tables(&system, &tables, t, 0.1).unwrap().lcl;
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn oracle_rejects_zero_inner_resamples() {
        let s = parse_structure("c1").unwrap();
        let fam = [LifetimeFamily::Exponential];
        let data = [exp_data(1.0, 8, 2)];
        let err = dbp_lcl_oracle(&s, &fam, &data, 0.5, &BootstrapParams::new(0.1, 10, 0), &SeedStream::new(0));
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }
}
