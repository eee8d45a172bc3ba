//! Batch front end: configuration, pipelines and CSV output.
//!
//! Configuration comes from an optional `key=value` file (`#` starts a
//! comment line) overlaid by command-line flags of the same names. The seed
//! falls back to `ANTIMC_SEED` when neither provides one.
//!
//! Exit codes: 0 success, 2 invalid configuration or matrix file, 3 numeric
//! failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::anneal::{self, AnnealSchedule, AnnealState};
use crate::error::{Error, Result};
use crate::estimate::{self, EstimateReport};
use crate::lie::{algebra_dim, Orientation, Rotation};
use crate::payoff::{
    asian_payoff, covswap_payoff, monthly_times, AsianSpec, CovSwapSpec, PayoffModel,
};
use crate::sampling::{GaussianStream, GENERATOR_ID};

pub const SEED_ENV: &str = "ANTIMC_SEED";
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_ITERS: u64 = 10_000;
pub const DEFAULT_PILOT: usize = 10_000;
pub const DEFAULT_TRACE_EVERY: u64 = 100;

/// Draw counts implied by the target standard errors (0.01 for the Asian
/// call, 0.001 for the covariance swap).
pub const TABLE1_N: u64 = 172_500;
pub const TABLE2_N: u64 = 81_000;

const STREAM_LAYOUT: &str = "root(seed,0).split(4)=[pilot,anneal-xi,anneal-zeta,pricing]";

#[derive(Debug, Parser)]
#[command(
    name = "antimc",
    version,
    about = "Optimal antithetic Monte Carlo pricing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Price with the configured method and write one CSV row.
    Price(ConfigArgs),
    /// Anneal an antithetic matrix and write its trace.
    Anneal(ConfigArgs),
    /// Covariance diagnostics of (f(ξ), f(Aξ)) for the initial matrix.
    Probe(ConfigArgs),
    /// Asian call: crude, −Id and annealed antithetic rows.
    #[command(name = "reproduce-table1")]
    ReproduceTable1(ConfigArgs),
    /// Covariance swap: crude, −Id and annealed antithetic rows.
    #[command(name = "reproduce-table2")]
    ReproduceTable2(ConfigArgs),
    /// Write the initial matrix (identity or minus-identity) to a file.
    ExportMatrix(ConfigArgs),
    /// Validate a matrix file and print its dimension and orientation.
    ImportMatrix { path: PathBuf },
}

/// Flags mirroring the configuration keys. Every value is kept as text and
/// parsed together with the file entries so errors name the key.
#[derive(Debug, Args, Default, Clone)]
pub struct ConfigArgs {
    /// key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// asian | covswap
    #[arg(long)]
    pub payoff: Option<String>,
    /// crude | static | dynamic | anneal
    #[arg(long)]
    pub method: Option<String>,
    /// minus-identity | identity | path to a matrix file
    #[arg(long = "antithetic-init")]
    pub antithetic_init: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    /// Positive number or "pilot".
    #[arg(long)]
    pub heat: Option<String>,
    #[arg(long)]
    pub iters: Option<String>,
    /// power | loglog
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    /// true | false
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long = "pilot-n")]
    pub pilot_n: Option<String>,
    #[arg(long = "trace-every")]
    pub trace_every: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub spot: Option<String>,
    #[arg(long)]
    pub strike: Option<String>,
    #[arg(long)]
    pub rate: Option<String>,
    #[arg(long)]
    pub vol: Option<String>,
    #[arg(long)]
    pub vol1: Option<String>,
    #[arg(long)]
    pub vol2: Option<String>,
    #[arg(long)]
    pub dividend: Option<String>,
    #[arg(long)]
    pub scale: Option<String>,
    #[arg(long)]
    pub months: Option<String>,
    /// Comma-separated fixing times in years.
    #[arg(long)]
    pub times: Option<String>,
    /// Output CSV path (stdout when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Where to write the final matrix (anneal, dynamic, export-matrix).
    #[arg(long = "matrix-out")]
    pub matrix_out: Option<PathBuf>,
    /// Worker threads for crude and static pricing.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Fill the elapsed_s column.
    #[arg(long)]
    pub timing: bool,
}

impl ConfigArgs {
    fn flag_entries(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("payoff", &self.payoff),
            ("method", &self.method),
            ("antithetic_init", &self.antithetic_init),
            ("n", &self.n),
            ("gamma", &self.gamma),
            ("heat", &self.heat),
            ("iters", &self.iters),
            ("variant", &self.variant),
            ("b", &self.b),
            ("noise", &self.noise),
            ("pilot_n", &self.pilot_n),
            ("trace_every", &self.trace_every),
            ("seed", &self.seed),
            ("spot", &self.spot),
            ("strike", &self.strike),
            ("rate", &self.rate),
            ("vol", &self.vol),
            ("vol1", &self.vol1),
            ("vol2", &self.vol2),
            ("dividend", &self.dividend),
            ("scale", &self.scale),
            ("months", &self.months),
            ("times", &self.times),
        ]
    }

    /// File entries overlaid by flags.
    pub fn entries(&self) -> Result<BTreeMap<String, String>> {
        let mut map = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Error::config("config", format!("cannot read {}: {e}", path.display()))
                })?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        for (key, value) in self.flag_entries() {
            if let Some(v) = value {
                map.insert(key.to_string(), v.clone());
            }
        }
        Ok(map)
    }
}

const KNOWN_KEYS: &[&str] = &[
    "payoff",
    "method",
    "antithetic_init",
    "n",
    "gamma",
    "heat",
    "iters",
    "variant",
    "b",
    "noise",
    "pilot_n",
    "trace_every",
    "seed",
    "spot",
    "strike",
    "rate",
    "vol",
    "vol1",
    "vol2",
    "dividend",
    "scale",
    "months",
    "times",
];

/// Parses `key=value` lines; blank lines and lines starting with `#` are
/// skipped. Dashes in keys are read as underscores.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::config("config", format!("line {}: expected key=value", lineno + 1))
        })?;
        let key = k.trim().replace('-', "_");
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::config(
                key,
                format!("unknown key on line {}", lineno + 1),
            ));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffKind {
    Asian,
    CovSwap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Crude,
    Static,
    Dynamic,
    Anneal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    MinusIdentity,
    Identity,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Heat {
    Pilot,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Power,
    LogLog,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub payoff: PayoffKind,
    pub asian: AsianSpec,
    pub covswap: CovSwapSpec,
    pub method: Method,
    pub init: Init,
    pub n: u64,
    pub gamma: f64,
    pub heat: Heat,
    pub iters: u64,
    pub variant: Variant,
    pub b: f64,
    pub noise: bool,
    pub pilot_n: usize,
    pub trace_every: u64,
    pub seed: u64,
}

fn num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::config(key, format!("cannot parse `{v}`"))),
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, "must be positive"))
    }
}

fn fixing_times(map: &BTreeMap<String, String>) -> Result<Option<Vec<f64>>> {
    if let Some(t) = map.get("times") {
        let times = t
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::config("times", format!("cannot parse `{}`", s.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(Some(times));
    }
    if map.contains_key("months") {
        let m: usize = num(map, "months", 12)?;
        if m == 0 {
            return Err(Error::config("months", "must be at least 1"));
        }
        return Ok(Some(monthly_times(m)));
    }
    Ok(None)
}

impl RunConfig {
    /// Resolves a key map; `payoff` defaults to `default_payoff` and `n` to
    /// the draw count implied by that payoff's target error.
    pub fn from_map(map: &BTreeMap<String, String>, default_payoff: PayoffKind) -> Result<Self> {
        let payoff = match map.get("payoff").map(String::as_str) {
            None => default_payoff,
            Some("asian") => PayoffKind::Asian,
            Some("covswap") => PayoffKind::CovSwap,
            Some(other) => {
                return Err(Error::config("payoff", format!("unknown payoff `{other}`")))
            }
        };
        let method = match map.get("method").map(String::as_str) {
            None | Some("crude") => Method::Crude,
            Some("static") => Method::Static,
            Some("dynamic") => Method::Dynamic,
            Some("anneal") => Method::Anneal,
            Some(other) => {
                return Err(Error::config("method", format!("unknown method `{other}`")))
            }
        };
        let init = match map.get("antithetic_init").map(String::as_str) {
            None | Some("minus-identity") => Init::MinusIdentity,
            Some("identity") => Init::Identity,
            Some("") => return Err(Error::config("antithetic_init", "empty value")),
            Some(path) => Init::File(PathBuf::from(path)),
        };
        let heat = match map.get("heat").map(String::as_str) {
            None | Some("pilot") => Heat::Pilot,
            Some(v) => Heat::Fixed(positive(
                "heat",
                v.parse()
                    .map_err(|_| Error::config("heat", format!("cannot parse `{v}`")))?,
            )?),
        };
        let variant = match map.get("variant").map(String::as_str) {
            None | Some("power") => Variant::Power,
            Some("loglog") | Some("log-log") => Variant::LogLog,
            Some(other) => {
                return Err(Error::config(
                    "variant",
                    format!("unknown variant `{other}`"),
                ))
            }
        };
        let noise = match map.get("noise").map(String::as_str) {
            None | Some("true") | Some("on") | Some("1") => true,
            Some("false") | Some("off") | Some("0") => false,
            Some(other) => {
                return Err(Error::config(
                    "noise",
                    format!("expected true or false, got `{other}`"),
                ))
            }
        };
        let seed = match map.get("seed") {
            Some(s) => s
                .parse()
                .map_err(|_| Error::config("seed", format!("cannot parse `{s}`")))?,
            None => match std::env::var(SEED_ENV) {
                Ok(s) => s
                    .trim()
                    .parse()
                    .map_err(|_| Error::config("seed", format!("cannot parse {SEED_ENV}=`{s}`")))?,
                Err(_) => DEFAULT_SEED,
            },
        };

        let times = fixing_times(map)?;
        let mut asian = AsianSpec::benchmark();
        asian.spot = num(map, "spot", asian.spot)?;
        asian.strike = num(map, "strike", asian.strike)?;
        asian.rate = num(map, "rate", asian.rate)?;
        asian.vol = num(map, "vol", asian.vol)?;
        let mut covswap = CovSwapSpec::benchmark();
        covswap.vol1 = num(map, "vol1", covswap.vol1)?;
        covswap.vol2 = num(map, "vol2", covswap.vol2)?;
        covswap.rate = num(map, "rate", covswap.rate)?;
        covswap.dividend = num(map, "dividend", covswap.dividend)?;
        if let Some(t) = times {
            covswap.scale = 100.0 * t.len() as f64;
            asian.times = t.clone();
            covswap.times = t;
        }
        covswap.scale = num(map, "scale", covswap.scale)?;
        match payoff {
            PayoffKind::Asian => asian.validate()?,
            PayoffKind::CovSwap => covswap.validate()?,
        }

        let default_n = match payoff {
            PayoffKind::Asian => TABLE1_N,
            PayoffKind::CovSwap => TABLE2_N,
        };
        let n: u64 = num(map, "n", default_n)?;
        if n < 2 {
            return Err(Error::config("n", "must be at least 2"));
        }
        let gamma = num(map, "gamma", 0.5)?;
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::config("gamma", "must lie in (0, 1)"));
        }
        let iters: u64 = num(map, "iters", DEFAULT_ITERS)?;
        if iters == 0 {
            return Err(Error::config("iters", "must be at least 1"));
        }
        let b = positive("b", num(map, "b", 1.0)?)?;
        let pilot_n: usize = num(map, "pilot_n", DEFAULT_PILOT)?;
        if pilot_n < 100 {
            return Err(Error::config("pilot_n", "must be at least 100"));
        }
        let trace_every = num(map, "trace_every", DEFAULT_TRACE_EVERY)?;
        Ok(Self {
            payoff,
            asian,
            covswap,
            method,
            init,
            n,
            gamma,
            heat,
            iters,
            variant,
            b,
            noise,
            pilot_n,
            trace_every,
            seed,
        })
    }

    pub fn payoff_model(&self) -> Result<Box<dyn PayoffModel>> {
        Ok(match self.payoff {
            PayoffKind::Asian => Box::new(asian_payoff(self.asian.clone())?),
            PayoffKind::CovSwap => Box::new(covswap_payoff(self.covswap.clone())?),
        })
    }

    pub fn initial_matrix(&self, dim: usize) -> Result<Rotation> {
        match &self.init {
            Init::MinusIdentity => Ok(Rotation::minus_identity(dim)),
            Init::Identity => Ok(Rotation::identity(dim)),
            Init::File(path) => {
                let a = read_matrix(path)?;
                if a.dim() != dim {
                    return Err(Error::config(
                        "antithetic_init",
                        format!("matrix has dimension {}, payoff needs {dim}", a.dim()),
                    ));
                }
                Ok(a)
            }
        }
    }

    pub fn schedule(&self, heat: f64) -> Result<AnnealSchedule> {
        let s = match self.variant {
            Variant::Power => AnnealSchedule::power(self.gamma, heat)?,
            Variant::LogLog => AnnealSchedule::log_log(self.b, heat)?,
        };
        Ok(if self.noise { s } else { s.without_noise() })
    }

    /// Canonical text hashed into the run header; it covers every value
    /// that can change the output rows.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let times = |t: &[f64]| {
            t.iter()
                .map(|v| format!("{v:e}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        match self.payoff {
            PayoffKind::Asian => {
                let a = &self.asian;
                let _ = writeln!(s, "payoff=asian");
                let _ = writeln!(
                    s,
                    "spot={:e}\nstrike={:e}\nrate={:e}\nvol={:e}",
                    a.spot, a.strike, a.rate, a.vol
                );
                let _ = writeln!(s, "times={}", times(&a.times));
            }
            PayoffKind::CovSwap => {
                let c = &self.covswap;
                let _ = writeln!(s, "payoff=covswap");
                let _ = writeln!(
                    s,
                    "vol1={:e}\nvol2={:e}\nrate={:e}\ndividend={:e}\nscale={:e}",
                    c.vol1, c.vol2, c.rate, c.dividend, c.scale
                );
                let _ = writeln!(s, "times={}", times(&c.times));
            }
        }
        let init = match &self.init {
            Init::MinusIdentity => "minus-identity".to_string(),
            Init::Identity => "identity".to_string(),
            Init::File(p) => format!("file:{}", p.display()),
        };
        let heat = match self.heat {
            Heat::Pilot => "pilot".to_string(),
            Heat::Fixed(h) => format!("{h:e}"),
        };
        let _ = writeln!(
            s,
            "method={:?}\nantithetic_init={init}\nn={}\ngamma={:e}\nheat={heat}\niters={}\nvariant={:?}\nb={:e}\nnoise={}\npilot_n={}\ntrace_every={}\nseed={}",
            self.method, self.n, self.gamma, self.iters, self.variant, self.b, self.noise, self.pilot_n, self.trace_every, self.seed
        );
        s
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// The four substreams every pipeline draws from.
pub struct Streams {
    pub pilot: GaussianStream,
    pub xi: GaussianStream,
    pub zeta: GaussianStream,
    pub pricing: GaussianStream,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        let [pilot, xi, zeta, pricing] = GaussianStream::new(seed, 0).split_n::<4>();
        Self {
            pilot,
            xi,
            zeta,
            pricing,
        }
    }
}

fn resolve_heat(
    cfg: &RunConfig,
    payoff: &dyn PayoffModel,
    pilot: &mut GaussianStream,
) -> Result<f64> {
    match cfg.heat {
        Heat::Fixed(h) => Ok(h),
        Heat::Pilot => anneal::heat_from_pilot(payoff, cfg.pilot_n, pilot),
    }
}

fn header(cfg: &RunConfig, schedule: Option<&AnnealSchedule>, extra: &[(&str, String)]) -> String {
    let mut h = String::new();
    let _ = writeln!(h, "# antimc {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(h, "# seed={}", cfg.seed);
    let _ = writeln!(h, "# config_sha256={}", cfg.hash());
    let _ = writeln!(h, "# streams={STREAM_LAYOUT}");
    let _ = writeln!(h, "# generator={GENERATOR_ID}");
    if let Some(s) = schedule {
        let _ = writeln!(h, "# schedule={} iters={}", s.describe(), cfg.iters);
    }
    let _ = writeln!(h, "# n={}", cfg.n);
    for (k, v) in extra {
        let _ = writeln!(h, "# {k}={v}");
    }
    h
}

fn labelled(mut r: EstimateReport, label: &str) -> EstimateReport {
    r.label = label.to_string();
    r
}

fn report_csv(head: String, rows: &[EstimateReport], timing: bool) -> String {
    let mut out = head;
    out.push_str(EstimateReport::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row(timing));
        out.push('\n');
    }
    out
}

fn maybe_write_matrix(path: &Option<PathBuf>, a: &Rotation) -> Result<()> {
    match path {
        Some(p) => write_matrix(a, p),
        None => Ok(()),
    }
}

/// `price`: one row with the configured method.
pub fn price(
    cfg: &RunConfig,
    threads: usize,
    timing: bool,
    matrix_out: &Option<PathBuf>,
) -> Result<String> {
    let payoff = cfg.payoff_model()?;
    let p = payoff.as_ref();
    let mut st = Streams::new(cfg.seed);
    let label = p.label().to_string();
    let (report, schedule) = match cfg.method {
        Method::Crude => (
            estimate::crude_mc_threads(p, cfg.n, &mut st.pricing, threads)?,
            None,
        ),
        Method::Static => {
            let a = cfg.initial_matrix(p.dim())?;
            (
                estimate::static_antithetic_threads(p, &a, cfg.n, &mut st.pricing, threads)?,
                None,
            )
        }
        Method::Dynamic => {
            let a0 = cfg.initial_matrix(p.dim())?;
            let heat = resolve_heat(cfg, p, &mut st.pilot)?;
            let schedule = cfg.schedule(heat)?;
            let out = estimate::dynamic_antithetic(
                p,
                &schedule,
                a0,
                cfg.n,
                &mut st.pricing,
                &mut st.zeta,
            )?;
            maybe_write_matrix(matrix_out, &out.a_final)?;
            (out.report, Some(schedule))
        }
        Method::Anneal => {
            let a0 = cfg.initial_matrix(p.dim())?;
            let heat = resolve_heat(cfg, p, &mut st.pilot)?;
            let schedule = cfg.schedule(heat)?;
            let out = anneal::run(p, &schedule, a0, cfg.iters, &mut st.xi, &mut st.zeta)?;
            maybe_write_matrix(matrix_out, &out.a_star)?;
            (
                estimate::static_antithetic_threads(
                    p,
                    &out.a_star,
                    cfg.n,
                    &mut st.pricing,
                    threads,
                )?,
                Some(schedule),
            )
        }
    };
    let report = labelled(report, &label);
    Ok(report_csv(
        header(cfg, schedule.as_ref(), &[]),
        &[report],
        timing,
    ))
}

/// `anneal`: trace rows `n,y_norm,step_norm,window_cov` plus a summary.
pub fn anneal_trace(cfg: &RunConfig, matrix_out: &Option<PathBuf>) -> Result<String> {
    let payoff = cfg.payoff_model()?;
    let p = payoff.as_ref();
    let mut st = Streams::new(cfg.seed);
    let a0 = cfg.initial_matrix(p.dim())?;
    let heat = resolve_heat(cfg, p, &mut st.pilot)?;
    let schedule = cfg.schedule(heat)?;
    let mut state = AnnealState::with_window(a0, anneal::DEFAULT_WINDOW, cfg.trace_every);
    anneal::run_from(
        &mut state,
        p,
        &schedule,
        cfg.iters,
        &mut st.xi,
        &mut st.zeta,
    )?;
    maybe_write_matrix(matrix_out, state.rotation())?;
    let d = &state.diagnostics;
    let extra = [
        ("rejections", d.rejections.to_string()),
        ("penalty_activations", d.penalty_activations.to_string()),
        ("reorthogonalizations", d.reorthogonalizations.to_string()),
        ("final_y_norm", format!("{:.17e}", state.y().norm())),
        ("window_cov", format!("{:.17e}", d.window.covariance())),
    ];
    let mut out = header(cfg, Some(&schedule), &extra);
    out.push_str("n,y_norm,step_norm,window_cov\n");
    for t in &d.trace {
        let _ = writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e}",
            t.n, t.y_norm, t.step_norm, t.window_cov
        );
    }
    Ok(out)
}

/// `probe`: covariance diagnostics for the initial matrix.
pub fn probe(cfg: &RunConfig) -> Result<String> {
    let payoff = cfg.payoff_model()?;
    let p = payoff.as_ref();
    let mut st = Streams::new(cfg.seed);
    let a = cfg.initial_matrix(p.dim())?;
    let pr = estimate::covariance_probe(p, &a, cfg.n, &mut st.pricing)?;
    let mut out = header(cfg, None, &[]);
    out.push_str("cov,var,corr,var_xi,var_axi,antithetic_variance,n\n");
    let _ = writeln!(
        out,
        "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
        pr.cov,
        pr.var,
        pr.corr,
        pr.var_xi,
        pr.var_axi,
        pr.antithetic_variance(),
        pr.n
    );
    Ok(out)
}

/// Rows of a table reproduction run.
#[derive(Debug, Clone)]
pub struct TableRun {
    pub crude: EstimateReport,
    pub minus_identity: EstimateReport,
    pub annealed: EstimateReport,
    pub a_star: Rotation,
    pub schedule: AnnealSchedule,
}

/// Crude, −Id and annealed antithetic on the same pricing draws.
pub fn run_table(cfg: &RunConfig, threads: usize) -> Result<TableRun> {
    let payoff = cfg.payoff_model()?;
    let p = payoff.as_ref();
    let mut st = Streams::new(cfg.seed);
    let minus = Rotation::minus_identity(p.dim());
    let crude = estimate::crude_mc_threads(p, cfg.n, &mut st.pricing.clone(), threads)?;
    let minus_identity =
        estimate::static_antithetic_threads(p, &minus, cfg.n, &mut st.pricing.clone(), threads)?;
    let a0 = cfg.initial_matrix(p.dim())?;
    let heat = resolve_heat(cfg, p, &mut st.pilot)?;
    let schedule = cfg.schedule(heat)?;
    let out = anneal::run(p, &schedule, a0, cfg.iters, &mut st.xi, &mut st.zeta)?;
    let annealed =
        estimate::static_antithetic_threads(p, &out.a_star, cfg.n, &mut st.pricing, threads)?;
    Ok(TableRun {
        crude: labelled(crude, "crude"),
        minus_identity: labelled(minus_identity, "antithetic-minus-identity"),
        annealed: labelled(annealed, "antithetic-a-star"),
        a_star: out.a_star,
        schedule,
    })
}

pub fn reproduce_table(
    cfg: &RunConfig,
    threads: usize,
    timing: bool,
    matrix_out: &Option<PathBuf>,
) -> Result<String> {
    let t = run_table(cfg, threads)?;
    maybe_write_matrix(matrix_out, &t.a_star)?;
    let payoff = match cfg.payoff {
        PayoffKind::Asian => "asian",
        PayoffKind::CovSwap => "covswap",
    };
    let head = header(cfg, Some(&t.schedule), &[("payoff", payoff.to_string())]);
    Ok(report_csv(
        head,
        &[t.crude, t.minus_identity, t.annealed],
        timing,
    ))
}

/// Writes `N` on the first line, then `N` rows of 17-significant-digit
/// entries.
pub fn write_matrix(a: &Rotation, path: &Path) -> Result<()> {
    fs::write(path, format_matrix(a)).map_err(|e| {
        Error::config(
            "matrix_out",
            format!("cannot write {}: {e}", path.display()),
        )
    })
}

pub fn format_matrix(a: &Rotation) -> String {
    let m = a.matrix();
    let mut s = format!("{}\n", m.nrows());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:.16e}", m[(i, j)]))
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn read_matrix(path: &Path) -> Result<Rotation> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config("matrix", format!("cannot read {}: {e}", path.display())))?;
    parse_matrix(&text)
}

/// Parses the matrix file format and validates orthogonality.
pub fn parse_matrix(text: &str) -> Result<Rotation> {
    let bad = |msg: String| Error::config("matrix", msg);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines
        .next()
        .ok_or_else(|| bad("empty matrix file".into()))?;
    let n: usize = first.trim().parse().map_err(|_| {
        bad(format!(
            "first line must be the dimension, got `{}`",
            first.trim()
        ))
    })?;
    if n == 0 {
        return Err(bad("dimension must be positive".into()));
    }
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| bad(format!("expected {n} rows, found {i}")))?;
        let row = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| bad(format!("row {}: cannot parse `{t}`", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != n {
            return Err(bad(format!(
                "row {} has {} entries, expected {n}",
                i + 1,
                row.len()
            )));
        }
        entries.extend(row);
    }
    if lines.next().is_some() {
        return Err(bad(format!("more than {n} rows")));
    }
    Rotation::new(DMatrix::from_row_slice(n, n, &entries)).map_err(|e| bad(e.to_string()))
}

fn import_summary(path: &Path) -> Result<String> {
    let a = read_matrix(path)?;
    let orientation = match a.orientation() {
        Orientation::Positive => "positive",
        Orientation::Negative => "negative",
    };
    Ok(format!(
        "dim,orientation,orthogonality_defect,algebra_dim\n{},{orientation},{:e},{}\n",
        a.dim(),
        a.orthogonality_defect(),
        algebra_dim(a.dim())
    ))
}

fn emit(text: &str, output: &Option<PathBuf>) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text)
            .map_err(|e| Error::config("output", format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_payoff(args: &ConfigArgs, kind: PayoffKind) -> Result<RunConfig> {
    let mut map = args.entries()?;
    let name = match kind {
        PayoffKind::Asian => "asian",
        PayoffKind::CovSwap => "covswap",
    };
    if let Some(p) = map.get("payoff") {
        if p != name {
            return Err(Error::config(
                "payoff",
                format!("this table uses the {name} payoff"),
            ));
        }
    }
    map.insert("payoff".into(), name.into());
    RunConfig::from_map(&map, kind)
}

/// Executes a parsed command; the returned text is what was emitted.
pub fn execute(command: &Command) -> Result<String> {
    let (text, output) = match command {
        Command::Price(a) => {
            let cfg = RunConfig::from_map(&a.entries()?, PayoffKind::Asian)?;
            (price(&cfg, a.threads, a.timing, &a.matrix_out)?, &a.output)
        }
        Command::Anneal(a) => {
            let cfg = RunConfig::from_map(&a.entries()?, PayoffKind::Asian)?;
            (anneal_trace(&cfg, &a.matrix_out)?, &a.output)
        }
        Command::Probe(a) => {
            let cfg = RunConfig::from_map(&a.entries()?, PayoffKind::Asian)?;
            (probe(&cfg)?, &a.output)
        }
        Command::ReproduceTable1(a) => {
            let cfg = with_payoff(a, PayoffKind::Asian)?;
            (
                reproduce_table(&cfg, a.threads, a.timing, &a.matrix_out)?,
                &a.output,
            )
        }
        Command::ReproduceTable2(a) => {
            let cfg = with_payoff(a, PayoffKind::CovSwap)?;
            (
                reproduce_table(&cfg, a.threads, a.timing, &a.matrix_out)?,
                &a.output,
            )
        }
        Command::ExportMatrix(a) => {
            let cfg = RunConfig::from_map(&a.entries()?, PayoffKind::Asian)?;
            let dim = cfg.payoff_model()?.dim();
            let m = cfg.initial_matrix(dim)?;
            let text = format_matrix(&m);
            match &a.matrix_out {
                Some(p) => write_matrix(&m, p)?,
                None => emit(&text, &a.output)?,
            }
            return Ok(text);
        }
        Command::ImportMatrix { path } => (import_summary(path)?, &None),
    };
    emit(&text, output)?;
    Ok(text)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric(_) => 3,
        Error::Config { .. } | Error::Domain(_) => 2,
    }
}

/// Binary entry point; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("antimc: {e}");
            exit_code(&e)
        }
    }
}
