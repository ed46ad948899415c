//! Command-line front end.
//!
//! ```text
//! relbound lcl --request req.json [--method dbpt] [--seed 42]
//! relbound simulate --config study.json --out results/
//! relbound bendback-scan --request req.json [--points 50 --low 0.1 --high 10]
//! relbound perf-probe [--config probe.json]
//! ```
//!
//! Results go to stdout as JSON with every float written to 17 significant
//! digits. Errors go to stderr with exit code 2 (input), 3 (estimation) or
//! 4 (invalid parameter).

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    bb_lcl, bp_lcl, dbp_lcl_oracle, dbpt_lcl, BootstrapParams, LclResult, Method, DEFAULT_ALPHA, DEFAULT_B, DEFAULT_C,
};
use crate::censoring::{impute, CensoredDataset, ImputeMode};
use crate::distributions::{FamilyName, LifetimeFamily};
use crate::error::{Error, Result};
use crate::estimators::{delta_lcl, mle_fit, moment_estimate, DeltaForm, DeltaFit};
use crate::resampling::AuxMode;
use crate::rng::SeedStream;
use crate::simulation::{
    detect_bend_back, lcl_curve, run_coverage_study, runtime_scaling_probe, CoverageReport, GridSpec, ProbeConfig,
    ReplicationData, StudyConfig,
};
use crate::structures::StructureNode;

#[derive(Debug, Parser)]
#[command(name = "relbound", version, about = "Lower confidence limits for system reliability")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "RELBOUND_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute one LCL from component data.
    Lcl(LclArgs),
    /// Run a Monte Carlo coverage study.
    Simulate(SimulateArgs),
    /// Evaluate an LCL curve over a time grid and count bend-back violations.
    BendbackScan(ScanArgs),
    /// Time DBPT against the conventional double bootstrap across sample sizes.
    PerfProbe(ProbeArgs),
}

#[derive(Debug, Args)]
pub struct LclArgs {
    /// Request file (JSON).
    #[arg(long)]
    pub request: PathBuf,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "B")]
    pub b: Option<usize>,
    #[arg(long = "C")]
    pub c: Option<usize>,
    /// Mission time.
    #[arg(long)]
    pub t: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for report.csv, report.json and config_echo.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub lcl: LclArgs,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    /// Grid start as a multiple of the mission time.
    #[arg(long, default_value_t = 0.1)]
    pub low: f64,
    /// Grid end as a multiple of the mission time.
    #[arg(long, default_value_t = 10.0)]
    pub high: f64,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Probe configuration (JSON); flags below are used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "series(c1,c2,c3)")]
    pub structure: String,
    #[arg(long, value_enum, default_value = "lognormal")]
    pub family: FamilyArg,
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
    pub n: Vec<usize>,
    #[arg(long = "B", default_value_t = 200)]
    pub b: usize,
    #[arg(long = "C", default_value_t = 200)]
    pub c: usize,
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum FamilyArg {
    Weibull,
    Lognormal,
    Exponential,
}

impl From<FamilyArg> for FamilyName {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Weibull => FamilyName::Weibull,
            FamilyArg::Lognormal => FamilyName::Lognormal,
            FamilyArg::Exponential => FamilyName::Exponential,
        }
    }
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_method() -> Method {
    Method::Dbpt
}

/// One component entry of an LCL request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentInput {
    /// `c1`, `c2`, ...; entries may then appear in any order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub family: FamilyName,
    /// CSV with a header row, times in the `time` column (or the first
    /// column) and an optional 0/1 `censored` column. Relative paths are
    /// resolved against the request file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censored: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LclRequest {
    pub structure: String,
    pub components: Vec<ComponentInput>,
    pub t: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<usize>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub impute: ImputeMode,
}

impl LclRequest {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("request: {e}")))
    }

    fn apply(&mut self, args: &LclArgs) {
        if let Some(m) = args.method {
            self.method = m;
        }
        if let Some(s) = args.seed {
            self.seed = Some(s);
        }
        if let Some(a) = args.alpha {
            self.alpha = a;
        }
        if let Some(b) = args.b {
            self.b = Some(b);
        }
        if let Some(c) = args.c {
            self.c = Some(c);
        }
        if let Some(t) = args.t {
            self.t = t;
        }
    }

    fn params(&self) -> BootstrapParams {
        BootstrapParams::new(self.alpha, self.b.unwrap_or(DEFAULT_B), self.c.unwrap_or(DEFAULT_C))
    }
}

/// Reads a one-column (or `time`/`censored`) CSV of lifetimes.
pub fn read_lifetimes_csv(path: &Path) -> Result<CensoredDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let time_col = headers.iter().position(|h| h.eq_ignore_ascii_case("time")).unwrap_or(0);
    let cens_col = headers.iter().position(|h| h.eq_ignore_ascii_case("censored"));
    let mut times = Vec::new();
    let mut flags = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let bad = |what: &str| Error::Input(format!("{}: row {}: invalid {what}", path.display(), row + 2));
        let t: f64 = record.get(time_col).ok_or_else(|| bad("time"))?.parse().map_err(|_| bad("time"))?;
        times.push(t);
        if let Some(c) = cens_col {
            flags.push(match record.get(c).unwrap_or("") {
                "0" | "false" | "" => false,
                "1" | "true" => true,
                _ => return Err(bad("censored flag")),
            });
        }
    }
    if cens_col.is_some() {
        CensoredDataset::from_parts(times, flags)
    } else {
        CensoredDataset::complete(times)
    }
}

fn component_index(id: &str) -> Option<usize> {
    id.strip_prefix('c')?.parse::<usize>().ok().filter(|&k| k >= 1).map(|k| k - 1)
}

/// Loaded request inputs in structure order.
#[derive(Debug, Clone)]
pub struct LoadedRequest {
    pub structure: StructureNode,
    pub families: Vec<LifetimeFamily>,
    pub data: ReplicationData,
}

pub fn load_request(req: &LclRequest, base_dir: &Path) -> Result<LoadedRequest> {
    let structure = StructureNode::parse(&req.structure)?;
    let s = structure.component_count();
    if req.components.len() != s {
        return Err(Error::Input(format!("structure references {s} components, request lists {}", req.components.len())));
    }
    let mut slots: Vec<Option<(LifetimeFamily, CensoredDataset)>> = vec![None; s];
    for (pos, comp) in req.components.iter().enumerate() {
        let idx = match &comp.id {
            Some(id) => component_index(id)
                .filter(|&i| i < s)
                .ok_or_else(|| Error::Input(format!("component id `{id}` does not match the structure")))?,
            None => pos,
        };
        if slots[idx].is_some() {
            return Err(Error::Input(format!("component c{} listed twice", idx + 1)));
        }
        let data = match (&comp.data_file, &comp.times) {
            (Some(file), None) => {
                if comp.censored.is_some() {
                    return Err(Error::Input("censored flags for a data file belong in its `censored` column".into()));
                }
                read_lifetimes_csv(&base_dir.join(file))?
            }
            (None, Some(times)) => match &comp.censored {
                Some(flags) => CensoredDataset::from_parts(times.clone(), flags.clone())?,
                None => CensoredDataset::complete(times.clone())?,
            },
            _ => return Err(Error::Input(format!("component c{} needs exactly one of data_file and times", idx + 1))),
        };
        slots[idx] = Some((LifetimeFamily::from(comp.family), data));
    }
    let mut families = Vec::with_capacity(s);
    let mut censored = Vec::with_capacity(s);
    let mut complete = Vec::with_capacity(s);
    for slot in slots {
        let (family, data) = slot.expect("every slot filled: counts match and ids are unique");
        complete.push(if data.censored_count() > 0 { impute(&family, &data, req.impute)? } else { data.times() });
        families.push(family);
        censored.push(data);
    }
    Ok(LoadedRequest { structure, families, data: ReplicationData { complete, censored } })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentEstimate {
    pub id: String,
    pub family: String,
    /// `moment` for the bootstrap methods, `mle` for delta.
    pub estimator: String,
    pub n: usize,
    pub censored: usize,
    pub mu: f64,
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub reliability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LclOutput {
    pub method: Method,
    pub lcl: f64,
    pub raw_value: f64,
    pub fell_outside: bool,
    pub r_hat: f64,
    pub t: f64,
    pub alpha: f64,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub b: Option<usize>,
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
    pub per_component_estimates: Vec<ComponentEstimate>,
    pub seed: u64,
}

fn estimates(req: &LclRequest, loaded: &LoadedRequest) -> Result<Vec<ComponentEstimate>> {
    let mut out = Vec::new();
    for (i, family) in loaded.families.iter().enumerate() {
        let cens = &loaded.data.censored[i];
        let (estimator, model) = if req.method == Method::Delta {
            let flags = cens.censored_flags();
            ("mle", mle_fit(family, &cens.times(), Some(&flags))?.model)
        } else {
            ("moment", moment_estimate(family, &loaded.data.complete[i])?.model())
        };
        out.push(ComponentEstimate {
            id: format!("c{}", i + 1),
            family: family.name().to_string(),
            estimator: estimator.to_string(),
            n: cens.len(),
            censored: cens.censored_count(),
            mu: model.mu(),
            sigma: model.sigma(),
            lambda: model.rate(),
            reliability: model.reliability(req.t)?,
        });
    }
    Ok(out)
}

/// Computes the LCL a request asks for.
pub fn compute_lcl(req: &LclRequest, base_dir: &Path) -> Result<LclOutput> {
    let loaded = load_request(req, base_dir)?;
    let seed = req.seed.unwrap_or(0);
    let stream = SeedStream::new(seed);
    let params = req.params();
    let (st, fam, data) = (&loaded.structure, &loaded.families, &loaded.data.complete);
    let res: LclResult = match req.method {
        Method::Delta => delta_lcl(st, fam, &loaded.data.censored, req.t, req.alpha)?,
        Method::Bp => bp_lcl(st, fam, data, req.t, &params, &stream)?,
        Method::Bb => bb_lcl(st, fam, data, req.t, &params, &stream)?,
        Method::Dbpt => dbpt_lcl(st, fam, data, req.t, &params, &stream)?,
        Method::DbpOracle => dbp_lcl_oracle(st, fam, data, req.t, &params, &stream)?,
    };
    Ok(LclOutput {
        method: res.method,
        lcl: res.lcl,
        raw_value: res.raw_value,
        fell_outside: res.fell_outside,
        r_hat: res.r_hat,
        t: res.t,
        alpha: res.alpha,
        b: res.b,
        c: res.c,
        per_component_estimates: estimates(req, &loaded)?,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOutput {
    pub method: Method,
    pub seed: u64,
    pub t: Vec<f64>,
    pub lcl: Vec<f64>,
    pub raw_value: Vec<f64>,
    pub r_hat: Vec<f64>,
    pub violations: usize,
    pub fell_outside: usize,
}

pub fn bendback_scan(req: &LclRequest, base_dir: &Path, grid: &GridSpec) -> Result<ScanOutput> {
    let loaded = load_request(req, base_dir)?;
    let times = grid.grid(req.t)?;
    let seed = req.seed.unwrap_or(0);
    let curve = if req.method == Method::Delta {
        crate::bootstrap::check_alpha(req.alpha, 0.5)?;
        let fit = DeltaFit::new(&loaded.families, &loaded.data.censored)?;
        times.iter().map(|&t| fit.lcl(&loaded.structure, t, req.alpha, DeltaForm::Standard)).collect::<Result<Vec<_>>>()?
    } else {
        lcl_curve(
            req.method,
            &loaded.structure,
            &loaded.families,
            &loaded.data,
            &times,
            &req.params(),
            AuxMode::Exact,
            &SeedStream::new(seed),
        )?
    };
    let lcl: Vec<f64> = curve.iter().map(|r| r.lcl).collect();
    Ok(ScanOutput {
        method: req.method,
        seed,
        violations: detect_bend_back(&lcl),
        fell_outside: curve.iter().filter(|r| r.fell_outside).count(),
        raw_value: curve.iter().map(|r| r.raw_value).collect(),
        r_hat: curve.iter().map(|r| r.r_hat).collect(),
        lcl,
        t: times,
    })
}

/// `serde_json` formatter writing floats with 17 significant digits.
#[derive(Debug, Default)]
struct FullPrecision(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// 17 significant digits, scientific notation (`9.0000000000000002e-1`).
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

/// Pretty JSON with full-precision floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn report_csv(report: &CoverageReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CoverageReport::CSV_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.method.name().to_string(),
            r.n.to_string(),
            format_f64(r.coverage),
            format_f64(r.coverage_se),
            format_f64(r.q_lcl),
            r.fell_outside.to_string(),
            r.bend_back.map(|b| b.to_string()).unwrap_or_default(),
            r.failures.to_string(),
            format_f64(r.median_ms),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writes UTF-8"))
}

fn summary_table(report: &CoverageReport) -> String {
    let mut s = format!(
        "{}  structure={}  t={}  R={:.6}  B={} C={}\n",
        if report.name.is_empty() { "study" } else { &report.name },
        report.structure,
        report.mission_time,
        report.true_reliability,
        report.b,
        report.c
    );
    s.push_str(&format!(
        "{:<11}{:>6}{:>10}{:>9}{:>10}{:>9}{:>10}{:>9}{:>11}\n",
        "method", "n", "coverage", "se", "q90_lcl", "outside", "bendback", "failed", "median_ms"
    ));
    for r in &report.rows {
        s.push_str(&format!(
            "{:<11}{:>6}{:>10.4}{:>9.4}{:>10.4}{:>9}{:>10}{:>9}{:>11.3}\n",
            r.method.name(),
            r.n,
            r.coverage,
            r.coverage_se,
            r.q_lcl,
            r.fell_outside,
            r.bend_back.map(|b| b.to_string()).unwrap_or_else(|| "-".into()),
            r.failures,
            r.median_ms
        ));
    }
    s
}

/// Writes every file to a temporary name first and renames once all
/// writes succeeded, so a failure never leaves partial outputs.
pub fn write_atomically(dir: &Path, files: &[(&str, String)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut staged = Vec::new();
    for (name, contents) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, contents) {
            staged.iter().for_each(|(t, _): &(PathBuf, PathBuf)| {
                let _ = fs::remove_file(t);
            });
            let _ = fs::remove_file(&tmp);
            return Err(e.into());
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dst) in staged {
        fs::rename(tmp, dst)?;
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn read_request(args: &LclArgs) -> Result<LclRequest> {
    let mut req = LclRequest::from_json(&read_text(&args.request)?)?;
    req.apply(args);
    Ok(req)
}

/// Runs the simulate command and returns the summary table.
pub fn simulate(args: &SimulateArgs) -> Result<String> {
    let mut config = StudyConfig::from_json(&read_text(&args.config)?)?;
    if let Some(r) = args.replications {
        config.replications = r;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    let report = run_coverage_study(&config)?;
    write_atomically(
        &args.out,
        &[
            ("report.csv", report_csv(&report)?),
            ("report.json", to_json(&report)?),
            ("config_echo.json", to_json(&config)?),
        ],
    )?;
    Ok(summary_table(&report))
}

fn probe_config(args: &ProbeArgs) -> Result<ProbeConfig> {
    match &args.config {
        Some(path) => serde_json::from_str(&read_text(path)?).map_err(|e| Error::Input(format!("probe config: {e}"))),
        None => Ok(ProbeConfig {
            structure: args.structure.clone(),
            family: args.family.into(),
            sample_sizes: args.n.clone(),
            b: args.b,
            c: args.c,
            alpha: DEFAULT_ALPHA,
            repetitions: args.repetitions,
            seed: args.seed,
        }),
    }
}

fn dispatch(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Lcl(args) => {
            let req = read_request(args)?;
            to_json(&compute_lcl(&req, &base_dir(&args.request))?)
        }
        Command::Simulate(args) => simulate(args),
        Command::BendbackScan(args) => {
            let req = read_request(&args.lcl)?;
            let grid = GridSpec { points: args.points, low: args.low, high: args.high };
            to_json(&bendback_scan(&req, &base_dir(&args.lcl.request), &grid)?)
        }
        Command::PerfProbe(args) => to_json(&runtime_scaling_probe(&probe_config(args)?)?),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| dispatch(&cli))),
        None => dispatch(&cli),
    };
    match result {
        Ok(text) => {
            let mut out = io::stdout().lock();
            if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
                return 2;
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(format_f64(0.9), "9.0000000000000002e-1");
        assert_eq!(format_f64(1.0), "1.0000000000000000e0");
        assert_eq!(format_f64(f64::NAN), "null");
        for v in [0.1, 1.0 / 3.0, 1e-300, 123456.789] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
        let text = to_json(&serde_json::json!({"a": 0.5, "b": [1.5]})).unwrap();
        assert!(text.contains("5.0000000000000000e-1"), "{text}");
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["b"][0], 1.5);
    }

    #[test]
    fn component_ids() {
        assert_eq!(component_index("c1"), Some(0));
        assert_eq!(component_index("c12"), Some(11));
        assert_eq!(component_index("c0"), None);
        assert_eq!(component_index("x1"), None);
    }

    fn inline_request(method: &str) -> LclRequest {
        LclRequest::from_json(&format!(
            r#"{{
                "structure": "series(c1,c2)",
                "components": [
                    {{"id": "c2", "family": "weibull", "times": [3.1, 4.7, 2.2, 6.3, 5.0, 3.9]}},
                    {{"id": "c1", "family": "exponential", "times": [12.0, 30.5, 8.2, 19.9, 44.1, 25.0]}}
                ],
                "t": 1.0, "method": "{method}", "B": 10, "C": 5, "seed": 42
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn ids_reorder_components() {
        let loaded = load_request(&inline_request("bp"), Path::new(".")).unwrap();
        assert_eq!(loaded.families[0], LifetimeFamily::Exponential);
        assert_eq!(loaded.data.complete[1][0], 3.1);
    }

    #[test]
    fn request_errors_map_to_exit_codes() {
        let mut req = inline_request("bp");
        req.components[0].id = Some("c7".into());
        assert_eq!(compute_lcl(&req, Path::new(".")).unwrap_err().exit_code(), 2);
        let mut req = inline_request("bp");
        req.alpha = 0.01;
        assert_eq!(compute_lcl(&req, Path::new(".")).unwrap_err().exit_code(), 4);
        let mut req = inline_request("bp");
        req.components[0].times = Some(vec![1.0]);
        assert_eq!(compute_lcl(&req, Path::new(".")).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn bp_with_ten_resamples_is_the_minimum() {
        use crate::bootstrap::{first_layer_system, AuxTables, FittedSystem};
        use crate::rng::tag;
        let req = inline_request("bp");
        let out = compute_lcl(&req, Path::new(".")).unwrap();
        assert_eq!(out.b, Some(10));
        assert_eq!(out.per_component_estimates[0].estimator, "moment");

        let loaded = load_request(&req, Path::new(".")).unwrap();
        let system = FittedSystem::fit(&loaded.structure, &loaded.families, &loaded.data.complete).unwrap();
        let params = BootstrapParams::new(0.1, 10, 0);
        let stream = SeedStream::new(42).child(tag::BOOTSTRAP);
        let tables = AuxTables::for_system(&system, &params, AuxMode::Exact, &stream).unwrap();
        let (sys, _) = first_layer_system(&loaded.structure, &tables, &system.component_reliabilities(1.0).unwrap());
        assert_eq!(sys.len(), 10);
        assert_eq!(out.lcl, sys.iter().cloned().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn atomic_write_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        write_atomically(dir.path(), &[("a.txt", "1".into()), ("b.txt", "2".into())]).unwrap();
        let mut names: Vec<String> =
            fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        names.sort();
        assert_eq!(names, ["a.txt", "b.txt"]);
    }

    #[test]
    fn csv_reader_accepts_censored_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        fs::write(&path, "time,censored\n1.5,0\n2.5,0\n3.0,1\n").unwrap();
        let d = read_lifetimes_csv(&path).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.censored_count(), 1);
        fs::write(&path, "hours\n1.5\n2.5\n").unwrap();
        assert_eq!(read_lifetimes_csv(&path).unwrap().censored_count(), 0);
        fs::write(&path, "time\nabc\n").unwrap();
        assert_eq!(read_lifetimes_csv(&path).unwrap_err().exit_code(), 2);
    }
}
