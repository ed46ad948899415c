//! Monte Carlo coverage studies.
//!
//! A study simulates component datasets from known models, computes each
//! requested LCL at the mission time and records whether it covers the true
//! system reliability. Optional diagnostics: Type-II censoring with
//! imputation, bend-back scans over a time grid, and a runtime probe
//! comparing the transformed and conventional double bootstraps.
//!
//! Every random draw comes from a seed path
//! `(master, n, replication, purpose, component)`, so reports are
//! bit-identical whatever the worker count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    bb_from_tables, bp_from_tables, dbp_lcl_oracle, dbpt_from_tables, AuxTables, BootstrapParams, FittedSystem,
    LclResult, Method, DEFAULT_ALPHA, DEFAULT_B, DEFAULT_C,
};
use crate::censoring::{impute, observed_failures, type2_censor, CensoredDataset, ImputeMode};
use crate::distributions::{sample_lifetimes, ComponentModel, FamilyName, LifetimeFamily};
use crate::error::{Error, Result};
use crate::estimators::{DeltaFit, DeltaForm};
use crate::resampling::AuxMode;
use crate::rng::{tag, SeedStream};
use crate::stats::{lcl_quantile, median};
use crate::structures::StructureNode;

/// Slack below which a rise of the LCL curve is not counted as bend-back.
pub const BEND_BACK_SLACK: f64 = 1e-12;

/// True model of one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ComponentSpec {
    Weibull { mu: f64, sigma: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Exponential { lambda: f64 },
}

impl ComponentSpec {
    pub fn model(&self) -> Result<ComponentModel> {
        match *self {
            ComponentSpec::Weibull { mu, sigma } => ComponentModel::new(LifetimeFamily::Weibull, mu, sigma),
            ComponentSpec::Lognormal { mu, sigma } => ComponentModel::new(LifetimeFamily::LogNormal, mu, sigma),
            ComponentSpec::Exponential { lambda } => ComponentModel::exponential(lambda),
        }
    }

    fn from_model(m: &ComponentModel) -> Self {
        match m.family() {
            LifetimeFamily::LogNormal => ComponentSpec::Lognormal { mu: m.mu(), sigma: m.sigma() },
            LifetimeFamily::Exponential => ComponentSpec::Exponential { lambda: m.rate().unwrap_or(f64::NAN) },
            _ => ComponentSpec::Weibull { mu: m.mu(), sigma: m.sigma() },
        }
    }
}

/// Identical components whose location is solved so that the system hits
/// `reliability` at the mission time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityTarget {
    pub reliability: f64,
    pub family: FamilyName,
    #[serde(default = "one")]
    pub sigma: f64,
}

fn one() -> f64 {
    1.0
}

/// Log-spaced grid `t * [low, high]` used for bend-back scans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_low")]
    pub low: f64,
    #[serde(default = "default_high")]
    pub high: f64,
}

fn default_points() -> usize {
    50
}
fn default_low() -> f64 {
    0.1
}
fn default_high() -> f64 {
    10.0
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { points: default_points(), low: default_low(), high: default_high() }
    }
}

impl GridSpec {
    pub fn grid(&self, t: f64) -> Result<Vec<f64>> {
        if self.points < 2 || !(self.low > 0.0 && self.high > self.low) {
            return Err(Error::InvalidParameter(format!("invalid time grid {self:?}")));
        }
        let (a, b) = (self.low.ln(), self.high.ln());
        let step = (b - a) / (self.points - 1) as f64;
        Ok((0..self.points).map(|k| t * (a + step * k as f64).exp()).collect())
    }
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_b() -> usize {
    DEFAULT_B
}
fn default_c() -> usize {
    DEFAULT_C
}
fn default_quantile() -> f64 {
    0.9
}
fn default_time() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default)]
    pub name: String,
    pub structure: String,
    /// Explicit component models; mutually exclusive with `target`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<ComponentSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<ReliabilityTarget>,
    #[serde(default = "default_time")]
    pub mission_time: f64,
    pub sample_sizes: Vec<usize>,
    pub methods: Vec<Method>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(rename = "B", default = "default_b")]
    pub b: usize,
    #[serde(rename = "C", default = "default_c")]
    pub c: usize,
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censoring_fraction: Option<f64>,
    #[serde(default)]
    pub impute: ImputeMode,
    #[serde(default)]
    pub aux_mode: AuxMode,
    #[serde(default)]
    pub seed: u64,
    /// When present, every replication also scans the LCL curve for
    /// bend-back on this grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bend_back: Option<GridSpec>,
    #[serde(default = "default_quantile")]
    pub quantile: f64,
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("study config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::InvalidParameter("replications must be at least 1".into()));
        }
        if self.sample_sizes.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidParameter("sample_sizes and methods must be non-empty".into()));
        }
        if !(self.mission_time > 0.0 && self.mission_time.is_finite()) {
            return Err(Error::InvalidParameter(format!("mission time must be positive, got {}", self.mission_time)));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(Error::InvalidParameter(format!("quantile {} not in (0, 1)", self.quantile)));
        }
        if let Some(f) = self.censoring_fraction {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::InvalidParameter(format!("censoring fraction {f} not in [0, 1)")));
            }
        }
        if let Some(g) = &self.bend_back {
            g.grid(self.mission_time)?;
        }
        let needs_c = self.methods.iter().any(|m| matches!(m, Method::Dbpt | Method::DbpOracle));
        if self.methods.iter().any(|m| *m != Method::Delta) {
            BootstrapParams::new(self.alpha, self.b, self.c).validate(needs_c)?;
        } else {
            crate::bootstrap::check_alpha(self.alpha, 0.5)?;
        }
        Ok(())
    }

    fn params(&self) -> BootstrapParams {
        BootstrapParams::new(self.alpha, self.b, self.c)
    }
}

/// Study inputs after parsing and solving for component parameters.
#[derive(Debug, Clone)]
pub struct ResolvedStudy {
    pub structure: StructureNode,
    pub models: Vec<ComponentModel>,
    pub true_reliability: f64,
    pub solved: bool,
}

/// Location `mu` putting identical components on the target system
/// reliability at `t`, by bisection.
pub fn solve_target(structure: &StructureNode, target: &ReliabilityTarget, t: f64) -> Result<Vec<ComponentModel>> {
    if !(target.reliability > 0.0 && target.reliability < 1.0) {
        return Err(Error::ProbabilityOutOfRange(target.reliability));
    }
    let s = structure.component_count();
    let family = LifetimeFamily::from(target.family);
    let build = |mu: f64| -> Result<ComponentModel> {
        match family {
            LifetimeFamily::Exponential => ComponentModel::exponential((-mu).exp()),
            _ => ComponentModel::new(family.clone(), mu, target.sigma),
        }
    };
    let system_at = |mu: f64| -> Result<f64> {
        let r = build(mu)?.reliability(t)?;
        Ok(structure.eval(&vec![r; s]))
    };
    let (mut lo, mut hi) = (t.ln() - 60.0, t.ln() + 60.0);
    if system_at(lo)? > target.reliability || system_at(hi)? < target.reliability {
        return Err(Error::InvalidParameter(format!("target reliability {} is not reachable", target.reliability)));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if system_at(mid)? < target.reliability {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * mid.abs().max(1.0) {
            break;
        }
    }
    let m = build(0.5 * (lo + hi))?;
    Ok(vec![m; s])
}

pub fn resolve(config: &StudyConfig) -> Result<ResolvedStudy> {
    config.validate()?;
    let structure = StructureNode::parse(&config.structure)?;
    let s = structure.component_count();
    let (models, solved) = match (&config.components, &config.target) {
        (Some(specs), None) => {
            if specs.len() != s {
                return Err(Error::LengthMismatch { expected: s, got: specs.len() });
            }
            (specs.iter().map(ComponentSpec::model).collect::<Result<Vec<_>>>()?, false)
        }
        (None, Some(target)) => (solve_target(&structure, target, config.mission_time)?, true),
        _ => return Err(Error::InvalidParameter("give exactly one of `components` and `target`".into())),
    };
    let r: Vec<f64> = models.iter().map(|m| m.reliability(config.mission_time)).collect::<Result<_>>()?;
    let true_reliability = structure.eval_reliability(&r)?;
    Ok(ResolvedStudy { structure, models, true_reliability, solved })
}

/// Counts grid-adjacent rises `curve[k+1] > curve[k] + 1e-12`.
pub fn detect_bend_back(curve: &[f64]) -> usize {
    curve.windows(2).filter(|w| w[1] > w[0] + BEND_BACK_SLACK).count()
}

/// One replication's data in the forms the methods consume.
#[derive(Debug, Clone)]
pub struct ReplicationData {
    /// Failure times; censored rows replaced by imputed values.
    pub complete: Vec<Vec<f64>>,
    /// Raw (possibly censored) samples, used by the delta method.
    pub censored: Vec<CensoredDataset>,
}

impl ReplicationData {
    pub fn simulate(
        models: &[ComponentModel],
        n: usize,
        censoring_fraction: Option<f64>,
        impute_mode: ImputeMode,
        stream: &SeedStream,
    ) -> Result<Self> {
        let mut complete = Vec::with_capacity(models.len());
        let mut censored = Vec::with_capacity(models.len());
        for (i, m) in models.iter().enumerate() {
            let times = sample_lifetimes(m, n, &mut stream.path(&[tag::DATA, i as u64]).rng())?;
            match censoring_fraction {
                Some(f) if f > 0.0 => {
                    let data = type2_censor(&times, observed_failures(n, f))?;
                    complete.push(impute(m.family(), &data, impute_mode)?);
                    censored.push(data);
                }
                _ => {
                    censored.push(CensoredDataset::complete(times.clone())?);
                    complete.push(times);
                }
            }
        }
        Ok(ReplicationData { complete, censored })
    }
}

/// Evaluates one method's LCL at every time in `times`, sharing all random
/// numbers across the times.
pub fn lcl_curve(
    method: Method,
    structure: &StructureNode,
    families: &[LifetimeFamily],
    data: &ReplicationData,
    times: &[f64],
    params: &BootstrapParams,
    aux_mode: AuxMode,
    stream: &SeedStream,
) -> Result<Vec<LclResult>> {
    match method {
        Method::Delta => {
            crate::bootstrap::check_alpha(params.alpha, 0.5)?;
            let fit = DeltaFit::new(families, &data.censored)?;
            times.iter().map(|&t| fit.lcl(structure, t, params.alpha, DeltaForm::Standard)).collect()
        }
        Method::DbpOracle => times
            .iter()
            .map(|&t| dbp_lcl_oracle(structure, families, &data.complete, t, params, stream))
            .collect(),
        _ => {
            let needs_c = method == Method::Dbpt;
            params.validate(needs_c)?;
            let system = FittedSystem::fit(structure, families, &data.complete)?;
            let p = if needs_c { *params } else { BootstrapParams { c: 0, ..*params } };
            let tables = AuxTables::for_system(&system, &p, aux_mode, &stream.child(tag::BOOTSTRAP))?;
            times
                .iter()
                .map(|&t| match method {
                    Method::Bp => bp_from_tables(&system, &tables, t, params.alpha),
                    Method::Bb => bb_from_tables(&system, &tables, t, params.alpha),
                    _ => dbpt_from_tables(&system, &tables, t, params.alpha),
                })
                .collect()
        }
    }
}

/// Per-replication outcome for one method.
#[derive(Debug, Clone)]
struct Outcome {
    lcl: f64,
    fell_outside: bool,
    bend_back: Option<usize>,
    curve_outside: Option<bool>,
    millis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub method: Method,
    pub n: usize,
    pub replications: usize,
    /// Replications where the method produced a limit.
    pub successes: usize,
    pub coverage: f64,
    pub coverage_se: f64,
    /// `quantile`-level empirical quantile of the LCLs.
    pub q_lcl: f64,
    pub mean_lcl: f64,
    pub fell_outside: usize,
    /// Datasets whose LCL curve rose somewhere on the grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bend_back: Option<usize>,
    /// Datasets whose LCL curve left `[0, 1]` somewhere on the grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_fell_outside: Option<usize>,
    pub failures: usize,
    /// Wall-clock medians vary from run to run and stay out of the JSON
    /// report so that it is reproducible byte for byte.
    #[serde(skip)]
    pub median_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub name: String,
    pub structure: String,
    pub mission_time: f64,
    pub true_reliability: f64,
    /// Component parameters; solved from the reliability target when
    /// `parameters_solved` is set.
    pub components: Vec<ComponentSpec>,
    pub parameters_solved: bool,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub quantile: f64,
    pub seed: u64,
    pub rows: Vec<CoverageRow>,
}

impl CoverageReport {
    pub fn row(&self, method: Method, n: usize) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.method == method && r.n == n)
    }

    pub const CSV_HEADER: [&'static str; 9] =
        ["method", "n", "coverage", "coverage_se", "q90_lcl", "fell_outside", "bend_back", "failures", "median_ms"];
}

fn run_replication(
    config: &StudyConfig,
    study: &ResolvedStudy,
    families: &[LifetimeFamily],
    n: usize,
    rep: usize,
    grid: Option<&[f64]>,
) -> Vec<Result<Outcome>> {
    let stream = SeedStream::new(config.seed).path(&[n as u64, rep as u64]);
    let data = match ReplicationData::simulate(&study.models, n, config.censoring_fraction, config.impute, &stream) {
        Ok(d) => d,
        Err(e) => return config.methods.iter().map(|_| Err(Error::Input(e.to_string()))).collect(),
    };
    let params = config.params();
    let t = config.mission_time;
    config
        .methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let at_t = lcl_curve(method, &study.structure, families, &data, &[t], &params, config.aux_mode, &stream)?;
            let millis = start.elapsed().as_secs_f64() * 1e3;
            let res = &at_t[0];
            let (bend_back, curve_outside) = match grid {
                Some(g) => {
                    let curve = lcl_curve(method, &study.structure, families, &data, g, &params, config.aux_mode, &stream)?;
                    let values: Vec<f64> = curve.iter().map(|r| r.lcl).collect();
                    (Some(detect_bend_back(&values)), Some(curve.iter().any(|r| r.fell_outside)))
                }
                None => (None, None),
            };
            Ok(Outcome { lcl: res.lcl, fell_outside: res.fell_outside, bend_back, curve_outside, millis })
        })
        .collect()
}

fn aggregate(method: Method, n: usize, truth: f64, quantile: f64, outcomes: &[&Result<Outcome>]) -> CoverageRow {
    let ok: Vec<&Outcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let successes = ok.len();
    let covered = ok.iter().filter(|o| truth >= o.lcl).count();
    let coverage = if successes > 0 { covered as f64 / successes as f64 } else { f64::NAN };
    let lcls: Vec<f64> = ok.iter().map(|o| o.lcl).collect();
    let times: Vec<f64> = ok.iter().map(|o| o.millis).collect();
    let scanned = ok.iter().all(|o| o.bend_back.is_some()) && successes > 0;
    CoverageRow {
        method,
        n,
        replications: outcomes.len(),
        successes,
        coverage,
        coverage_se: (coverage * (1.0 - coverage) / successes as f64).sqrt(),
        q_lcl: lcl_quantile(&lcls, quantile).unwrap_or(f64::NAN),
        mean_lcl: if successes > 0 { lcls.iter().sum::<f64>() / successes as f64 } else { f64::NAN },
        fell_outside: ok.iter().filter(|o| o.fell_outside).count(),
        bend_back: scanned.then(|| ok.iter().filter(|o| o.bend_back.unwrap_or(0) > 0).count()),
        curve_fell_outside: scanned.then(|| ok.iter().filter(|o| o.curve_outside == Some(true)).count()),
        failures: outcomes.len() - successes,
        median_ms: median(&times),
    }
}

/// Runs the study on the current rayon pool.
pub fn run_coverage_study(config: &StudyConfig) -> Result<CoverageReport> {
    let study = resolve(config)?;
    let families: Vec<LifetimeFamily> = study.models.iter().map(|m| m.family().clone()).collect();
    let grid = config.bend_back.map(|g| g.grid(config.mission_time)).transpose()?;

    let mut rows = Vec::new();
    for &n in &config.sample_sizes {
        let min = families.iter().map(|f| f.min_sample()).max().unwrap_or(1);
        if n < min {
            return Err(Error::SampleTooSmall { got: n, min });
        }
        let per_rep: Vec<Vec<Result<Outcome>>> = (0..config.replications)
            .into_par_iter()
            .map(|rep| run_replication(config, &study, &families, n, rep, grid.as_deref()))
            .collect();
        for (k, &method) in config.methods.iter().enumerate() {
            let col: Vec<&Result<Outcome>> = per_rep.iter().map(|r| &r[k]).collect();
            rows.push(aggregate(method, n, study.true_reliability, config.quantile, &col));
        }
    }
    Ok(CoverageReport {
        name: config.name.clone(),
        structure: study.structure.to_string(),
        mission_time: config.mission_time,
        true_reliability: study.true_reliability,
        components: study.models.iter().map(ComponentSpec::from_model).collect(),
        parameters_solved: study.solved,
        alpha: config.alpha,
        b: config.b,
        c: config.c,
        quantile: config.quantile,
        seed: config.seed,
        rows,
    })
}

/// Runs the study on a dedicated pool of `threads` workers.
pub fn run_coverage_study_with_threads(config: &StudyConfig, threads: usize) -> Result<CoverageReport> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
        .install(|| run_coverage_study(config))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub structure: String,
    pub family: FamilyName,
    pub sample_sizes: Vec<usize>,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "C")]
    pub c: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Timed repetitions per method and size; one extra warm-up run is
    /// discarded.
    #[serde(default = "default_probe_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_probe_reps() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub n: usize,
    pub dbpt_ms: f64,
    pub oracle_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    /// Log-log slope of median time against `n`.
    pub dbpt_slope: f64,
    pub oracle_slope: f64,
    /// Oracle time over DBPT time at the largest `n`.
    pub speedup_at_largest_n: f64,
}

/// Times `dbpt_lcl` against the conventional double bootstrap across
/// sample sizes.
pub fn runtime_scaling_probe(config: &ProbeConfig) -> Result<ProbeReport> {
    if config.sample_sizes.len() < 3 {
        return Err(Error::InvalidParameter("the probe needs at least three sample sizes".into()));
    }
    let structure = StructureNode::parse(&config.structure)?;
    let s = structure.component_count();
    let family = LifetimeFamily::from(config.family);
    let model = match family {
        LifetimeFamily::Exponential => ComponentModel::exponential(0.1)?,
        _ => ComponentModel::new(family.clone(), 2.0, 0.5)?,
    };
    let families = vec![family; s];
    let params = BootstrapParams::new(config.alpha, config.b, config.c);
    params.validate(true)?;
    let t = (2.0f64).exp() * 0.3;
    let root = SeedStream::new(config.seed);

    let mut rows = Vec::new();
    for &n in &config.sample_sizes {
        let mut dbpt = Vec::new();
        let mut oracle = Vec::new();
        for rep in 0..=config.repetitions {
            let stream = root.path(&[n as u64, rep as u64]);
            let data: Vec<Vec<f64>> = (0..s)
                .map(|i| sample_lifetimes(&model, n, &mut stream.path(&[tag::DATA, i as u64]).rng()))
                .collect::<Result<_>>()?;
            let start = Instant::now();
            crate::bootstrap::dbpt_lcl(&structure, &families, &data, t, &params, &stream)?;
            let a = start.elapsed().as_secs_f64() * 1e3;
            let start = Instant::now();
            dbp_lcl_oracle(&structure, &families, &data, t, &params, &stream)?;
            let b = start.elapsed().as_secs_f64() * 1e3;
            if rep > 0 {
                dbpt.push(a);
                oracle.push(b);
            }
        }
        rows.push(ProbeRow { n, dbpt_ms: median(&dbpt), oracle_ms: median(&oracle) });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let dt: Vec<f64> = rows.iter().map(|r| r.dbpt_ms).collect();
    let ot: Vec<f64> = rows.iter().map(|r| r.oracle_ms).collect();
    let last = rows.last().expect("at least three rows");
    Ok(ProbeReport {
        dbpt_slope: crate::stats::loglog_slope(&ns, &dt),
        oracle_slope: crate::stats::loglog_slope(&ns, &ot),
        speedup_at_largest_n: last.oracle_ms / last.dbpt_ms,
        rows,
    })
}
