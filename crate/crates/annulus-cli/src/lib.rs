//! Command-line front-end for the `annulus` library.

pub mod checks;
pub mod plot;

use annulus::arcs::ArcQuadrature;
use annulus::gff::sample_field;
use annulus::gmc::{expected_boundary_mass, lattice_expected_masses, sample_total_masses, MassSummary};
use annulus::greens::{c_weight, green_metric, regularization_constants};
use annulus::lattice::{Lattice, LatticeSpec};
use annulus::lqft::{Insertion, InsertionSet, LatticeModel, LqftParams, Regions};
use annulus::mcstats::{RngStream, GENERATOR_ID};
use annulus::moduli::{geometric_grid, integrate_z_lqg, lqg_integrand, node_stream, JointLaw, ModuliConfig, TAIL_FIT_SPAN};
use annulus::{Annulus, GreenSeriesConfig, MetricSpec, Point};
use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use plot::{emit_plot_data, PlotFormat, PlotPoint, Series};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "annulus", version, about = "Liouville field theory on the annulus")]
pub struct Cli {
    /// Master seed; every Monte-Carlo stream is derived from it.
    #[arg(long, global = true, env = "ANNULUS_SEED", default_value_t = 7)]
    pub seed: u64,
    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// JSON file whose keys override the command flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Green's function evaluation and identity checks.
    #[command(subcommand)]
    Green(GreenCmd),
    /// Gaussian free field samples.
    #[command(subcommand)]
    Gff(GffCmd),
    /// Gaussian multiplicative chaos masses.
    #[command(subcommand)]
    Gmc(GmcCmd),
    /// Liouville partition functions, Weyl anomaly, KPZ and the volume law.
    #[command(subcommand)]
    Lqft(LqftCmd),
    /// Moduli integrand, its integral and the joint law.
    #[command(subcommand)]
    Moduli(ModuliCmd),
    /// Run the full invariant suite.
    CheckAll(CheckAllArgs),
}

#[derive(Debug, Subcommand)]
pub enum GreenCmd {
    Eval(GreenEvalArgs),
    Check(GreenCheckArgs),
}

#[derive(Debug, Subcommand)]
pub enum GffCmd {
    Sample(GffSampleArgs),
}

#[derive(Debug, Subcommand)]
pub enum GmcCmd {
    Mass(GmcMassArgs),
}

#[derive(Debug, Subcommand)]
pub enum LqftCmd {
    Partition(PartitionArgs),
    Weyl(WeylArgs),
    Kpz(KpzArgs),
    VolumeLaw(VolumeLawArgs),
}

#[derive(Debug, Subcommand)]
pub enum ModuliCmd {
    Integrand(IntegrandArgs),
    Integrate(IntegrateArgs),
    Sample(ModuliSampleArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GreenEvalArgs {
    #[arg(long, default_value_t = 2.0)]
    pub tau: f64,
    /// First point as `r,theta`.
    #[arg(long)]
    pub z: String,
    /// Second point as `r,theta`.
    #[arg(long)]
    pub w: String,
    /// `flat`, `cylinder-pullback`, `constant:c` or `radial-power:p`.
    #[arg(long, default_value = "flat")]
    pub metric: String,
    #[arg(long, default_value_t = 64)]
    pub n_modes: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tail_tolerance: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GreenCheckArgs {
    #[arg(long, default_value_t = 2.0)]
    pub tau: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GffSampleArgs {
    #[arg(long, default_value_t = 2.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 9)]
    pub n_radial: usize,
    #[arg(long, default_value_t = 64)]
    pub n_angular: usize,
    #[arg(long, default_value_t = 63)]
    pub n_modes: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GmcMassArgs {
    #[arg(long, default_value_t = 2.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 8)]
    pub n_radial: usize,
    #[arg(long, default_value_t = 64)]
    pub n_angular: usize,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Bulk cells closer than this to the boundary are skipped.
    #[arg(long, default_value_t = 0.0)]
    pub boundary_layer: f64,
    #[arg(long, default_value = "flat")]
    pub metric: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PartitionArgs {
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu_boundary: f64,
    #[arg(long, default_value_t = 2.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 16)]
    pub n_radial: usize,
    #[arg(long, default_value_t = 64)]
    pub n_angular: usize,
    /// Bulk insertion `r,theta,alpha`; repeatable.
    #[arg(long)]
    pub bulk: Vec<String>,
    /// Boundary insertion `r,theta,beta`; repeatable.
    #[arg(long)]
    pub boundary: Vec<String>,
    #[arg(long, default_value = "flat")]
    pub metric: String,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct WeylArgs {
    #[arg(long, default_value = "constant:0.3")]
    pub metric: String,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct KpzArgs {
    #[arg(long, default_value_t = 2.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 512)]
    pub n_angular: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VolumeLawArgs {
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModuliArgs {
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu_boundary: f64,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon0: f64,
    #[arg(long, default_value_t = 32)]
    pub n_angular: usize,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Geometric τ grid: first node, last node and node count.
    #[arg(long, default_value_t = 1.05)]
    pub tau_min: f64,
    #[arg(long, default_value_t = 50.0)]
    pub tau_max: f64,
    #[arg(long, default_value_t = 24)]
    pub nodes: usize,
}

impl ModuliArgs {
    fn config(&self) -> ModuliConfig {
        ModuliConfig { epsilon0: self.epsilon0, n_angular: self.n_angular, samples: self.samples, ..ModuliConfig::default() }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IntegrandArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub moduli: ModuliArgs,
    /// Also write the curve to this `.csv` or `.svg` file.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IntegrateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub moduli: ModuliArgs,
    /// Tail fit uses nodes with τ ≥ τ_max/span.
    #[arg(long, default_value_t = TAIL_FIT_SPAN)]
    pub span: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModuliSampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub moduli: ModuliArgs,
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    /// Also write a histogram of the sampled τ to this `.csv` or `.svg` file.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CheckAllArgs {}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numeric(annulus::Error),
    Io(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Numeric(_) => EXIT_NUMERIC,
            Self::Io(_) => EXIT_IO,
        }
    }
}

impl From<annulus::Error> for Failure {
    fn from(e: annulus::Error) -> Self {
        match e {
            annulus::Error::Usage(m) => Self::Usage(m),
            e => Self::Numeric(e),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Command output before serialization.
struct Output {
    result: Value,
    streams: Vec<Value>,
    csv: Option<String>,
    passed: bool,
}

impl Output {
    fn new(result: Value) -> Self {
        Self { result, streams: Vec::new(), csv: None, passed: true }
    }

    fn stream(mut self, purpose: &str, s: &RngStream) -> Self {
        self.streams.push(json!({ "purpose": purpose, "master_seed": s.master_seed, "stream_id": s.stream_id }));
        self
    }
}

fn parse_point(s: &str) -> Outcome<Point> {
    let v = parse_numbers(s, 2)?;
    Ok(Point::new(v[0], v[1]))
}

fn parse_numbers(s: &str, n: usize) -> Outcome<Vec<f64>> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| usage(format!("cannot parse `{s}`")))?;
    if v.len() != n {
        return Err(usage(format!("`{s}` needs {n} comma-separated numbers")));
    }
    Ok(v)
}

fn parse_insertions(list: &[String]) -> Outcome<Vec<Insertion>> {
    list.iter()
        .map(|s| {
            let v = parse_numbers(s, 3)?;
            Ok(Insertion { point: Point::new(v[0], v[1]), weight: v[2] })
        })
        .collect()
}

/// Applies the config-file overrides to a flag record.
fn resolve<T: Serialize + DeserializeOwned>(args: &T, overrides: &Option<Value>) -> Outcome<T> {
    let Some(Value::Object(o)) = overrides else { return to_value(args).and_then(from_value) };
    let mut v = to_value(args)?;
    if let Value::Object(m) = &mut v {
        for (k, x) in o {
            if ["seed", "format", "output"].contains(&k.as_str()) {
                continue;
            }
            if !m.contains_key(k) {
                return Err(usage(format!("unknown config key `{k}`")));
            }
            m.insert(k.clone(), x.clone());
        }
    }
    from_value(v)
}

fn to_value<T: Serialize>(t: &T) -> Outcome<Value> {
    serde_json::to_value(t).map_err(|e| usage(e.to_string()))
}

fn from_value<T: DeserializeOwned>(v: Value) -> Outcome<T> {
    serde_json::from_value(v).map_err(|e| usage(format!("bad config: {e}")))
}

fn write_plot(series: &Series, path: &Path) -> Outcome<()> {
    let format = PlotFormat::from_path(path).map_err(|e| usage(e.to_string()))?;
    emit_plot_data(series, path, format).map_err(Failure::Io)
}

fn green_eval(a: &GreenEvalArgs) -> Outcome<Output> {
    let cfg = GreenSeriesConfig::new(a.n_modes, a.tail_tolerance)?;
    let m = MetricSpec::parse(&a.metric)?;
    let (z, w) = (parse_point(&a.z)?, parse_point(&a.w)?);
    let g = green_metric(&z, &w, &m, a.tau, &cfg)?;
    let rc = regularization_constants(&z, a.tau, &cfg)?;
    Ok(Output::new(json!({
        "green": g,
        "c_weight_z": c_weight(&z, &m, a.tau).ok(),
        "regularization_z": { "g_p": rc.g_p, "h": rc.h, "h_boundary": rc.h_boundary },
    })))
}

fn green_check(a: &GreenCheckArgs, seed: u64) -> Outcome<Output> {
    let s = RngStream::new(seed, 1);
    let m = checks::green_identities(a.tau, &mut s.rng())?;
    let tol = [("symmetry", 1e-10), ("boundary_integral", 1e-8), ("normal_derivative", 1e-6), ("green_riemann", 1e-4), ("representation", 1e-8)];
    let report: Vec<Value> = tol.iter().map(|(k, t)| json!({ "invariant": k, "deviation": m[*k], "tolerance": t, "passed": m[*k] <= *t })).collect();
    let passed = report.iter().all(|r| r["passed"] == json!(true));
    let mut out = Output::new(json!({ "passed": passed, "invariants": report })).stream("random point pairs", &s);
    out.passed = passed;
    Ok(out)
}

fn gff_sample(a: &GffSampleArgs, seed: u64) -> Outcome<Output> {
    let s = RngStream::new(seed, 1);
    let geom = Annulus::standard(a.tau)?;
    let f = sample_field(&geom, a.n_radial, a.n_angular, a.n_modes, &s)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["r", "theta", "value"]).map_err(|e| Failure::Io(e.into()))?;
    for (r, row) in f.radial_nodes.iter().zip(&f.values) {
        for (t, v) in f.angular_nodes.iter().zip(row) {
            w.write_record([plot::num(*r), plot::num(*t), plot::num(*v)]).map_err(|e| Failure::Io(e.into()))?;
        }
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| Failure::Io(anyhow::anyhow!("{e}")))?).map_err(|e| Failure::Io(e.into()))?;
    let mut out = Output::new(json!({ "boundary_average": f.boundary_average(), "sample": f })).stream("field draw", &s);
    out.csv = Some(csv);
    Ok(out)
}

fn gmc_mass(a: &GmcMassArgs, seed: u64) -> Outcome<Output> {
    let m = MetricSpec::parse(&a.metric)?;
    let lat = Lattice::build(a.tau, a.epsilon, &m, &LatticeSpec::uniform(a.n_radial, a.n_angular), &GreenSeriesConfig::default(), &ArcQuadrature::default())?;
    let s = RngStream::new(seed, 1);
    let (bulk, bdry) = sample_total_masses(&lat, a.gamma, a.samples, a.boundary_layer, &s)?;
    let (eb, ed) = lattice_expected_masses(&lat, a.gamma, a.boundary_layer);
    let exact = if m.is_flat() { Some(expected_boundary_mass(a.gamma, a.tau, 64)?) } else { None };
    Ok(Output::new(json!({
        "bulk": MassSummary::from_samples(&bulk, seed),
        "boundary": MassSummary::from_samples(&bdry, seed),
        "lattice_expected_bulk": eb,
        "lattice_expected_boundary": ed,
        "limit_expected_boundary": exact,
    }))
    .stream("lattice field draws", &s))
}

fn partition(a: &PartitionArgs, seed: u64) -> Outcome<Output> {
    let p = LqftParams::new(a.gamma, a.mu, a.mu_boundary)?;
    let ins = InsertionSet::new(parse_insertions(&a.bulk)?, parse_insertions(&a.boundary)?, a.tau)?;
    let m = MetricSpec::parse(&a.metric)?;
    let (cfg, q) = (GreenSeriesConfig::default(), ArcQuadrature::default());
    let lat = Lattice::build(a.tau, a.epsilon, &m, &LatticeSpec::uniform(a.n_radial, a.n_angular), &cfg, &q)?;
    let s = RngStream::new(seed, 1);
    let est = LatticeModel::new(&lat, &p, &ins, &m, &cfg, &q)?.estimate(a.samples, &s)?;
    Ok(Output::new(serde_json::to_value(est).map_err(|e| Failure::Io(e.into()))?).stream("lattice field draws", &s))
}

fn weyl(a: &WeylArgs, seed: u64) -> Outcome<Output> {
    let (r, f) = checks::weyl_check(&a.metric, a.samples, seed, 1)?;
    let z = (r.value - f).abs() / r.stderr;
    let mut out = Output::new(json!({ "ratio": r, "analytic_factor": f, "z": z, "passed": z <= 3.0 }))
        .stream("metric e^phi g", &RngStream::new(seed, 1))
        .stream("flat metric", &RngStream::new(seed, 2));
    out.passed = z <= 3.0;
    Ok(out)
}

fn kpz(a: &KpzArgs, seed: u64) -> Outcome<Output> {
    let (cfg, q) = (GreenSeriesConfig::default(), ArcQuadrature::default());
    let p = LqftParams::new(1.0, 0.0, 1.0)?;
    let lat = Lattice::build(a.tau, a.epsilon, &MetricSpec::Flat, &LatticeSpec::boundary_only(a.n_angular), &cfg, &q)?;
    let inner = InsertionSet::single_boundary(Point::new(1.0, 0.0), a.beta, a.tau)?;
    let outer = InsertionSet::single_boundary(lat.point(1, 0), a.beta, a.tau)?;
    let (s1, s2) = (RngStream::new(seed, 1), RngStream::new(seed, 2));
    let x = LatticeModel::new(&lat, &p, &inner, &MetricSpec::Flat, &cfg, &q)?.estimate(a.samples, &s1)?.estimate;
    let y = LatticeModel::new(&lat, &p, &outer, &MetricSpec::Flat, &cfg, &q)?.estimate(a.samples, &s2)?.estimate;
    let k = annulus::lqft::kpz_prefactor(&annulus::Automorphism::inversion(), &inner, &p, a.tau)?;
    let r = y.ratio(&x);
    let z = (r.value - k).abs() / r.stderr;
    let mut out = Output::new(json!({ "inner": x, "outer": y, "ratio": r, "inversion_prefactor": k, "z": z, "passed": z <= 3.0 }))
        .stream("inner insertion", &s1)
        .stream("outer insertion", &s2);
    out.passed = z <= 3.0;
    Ok(out)
}

fn volume_law(a: &VolumeLawArgs, seed: u64) -> Outcome<Output> {
    let (t, shape) = checks::volume_law(a.gamma, a.mu, a.alpha, a.tau, a.samples, seed, 1)?;
    let mut out = Output::new(json!({ "gamma_shape": shape, "gamma_rate": a.mu, "ks": t, "passed": t.passes }))
        .stream("field pool", &RngStream::new(seed, 1))
        .stream("resampling", &RngStream::new(seed, 2));
    out.passed = t.passes;
    Ok(out)
}

fn moduli_grid(a: &ModuliArgs) -> Outcome<(LqftParams, Vec<f64>)> {
    Ok((LqftParams::new(a.gamma, a.mu, a.mu_boundary)?, geometric_grid(a.tau_min, a.tau_max, a.nodes)?))
}

fn node_streams(out: Output, seed: u64) -> Output {
    let mut out = out;
    out.streams.push(json!({ "purpose": "one stream per τ node", "master_seed": seed, "stream_id": "bits of τ as f64" }));
    out
}

fn integrand(a: &IntegrandArgs, seed: u64) -> Outcome<Output> {
    let (p, grid) = moduli_grid(&a.moduli)?;
    let cfg = a.moduli.config();
    let nodes = grid.iter().map(|&t| lqg_integrand(t, &p, &cfg, &node_stream(seed, t))).collect::<annulus::Result<Vec<_>>>()?;
    let series = Series {
        x_label: "tau".into(),
        y_label: "integrand".into(),
        points: nodes.iter().map(|n| PlotPoint { x: n.tau, y: n.value.value, stderr: n.value.stderr }).collect(),
    };
    if let Some(path) = &a.plot {
        write_plot(&series, path)?;
    }
    let mut out = node_streams(Output::new(json!({ "nodes": nodes })), seed);
    out.csv = Some(plot::to_csv(&series).map_err(|e| Failure::Numeric(annulus::Error::Numeric(e.to_string())))?);
    Ok(out)
}

fn integrate(a: &IntegrateArgs, seed: u64) -> Outcome<Output> {
    let (p, grid) = moduli_grid(&a.moduli)?;
    let r = integrate_z_lqg(&p, &grid, a.span, &a.moduli.config(), seed)?;
    Ok(node_streams(Output::new(serde_json::to_value(r).map_err(|e| Failure::Io(e.into()))?), seed))
}

fn moduli_sample(a: &ModuliSampleArgs, seed: u64) -> Outcome<Output> {
    let (p, grid) = moduli_grid(&a.moduli)?;
    let law = JointLaw::build(&p, &grid, &Regions::default(), &a.moduli.config(), seed)?;
    let s = RngStream::new(seed, 1);
    let draws = law.sample(a.draws, &mut s.rng())?;
    if let Some(path) = &a.plot {
        let (lo, hi) = law.tau_range();
        let bins = 20;
        let edges: Vec<f64> = (0..=bins).map(|k| lo * (hi / lo).powf(k as f64 / bins as f64)).collect();
        let points = edges
            .windows(2)
            .map(|w| {
                let c = draws.iter().filter(|d| d.tau >= w[0] && d.tau < w[1]).count() as f64;
                PlotPoint { x: (w[0] * w[1]).sqrt(), y: c / a.draws as f64, stderr: (c.max(1.0)).sqrt() / a.draws as f64 }
            })
            .collect();
        write_plot(&Series { x_label: "tau".into(), y_label: "fraction of draws".into(), points }, path)?;
    }
    let mut out = node_streams(Output::new(json!({ "tau_range": law.tau_range(), "nodes": law.nodes, "draws": draws })), seed);
    out.streams.push(json!({ "purpose": "joint draws", "master_seed": s.master_seed, "stream_id": s.stream_id }));
    Ok(out)
}

fn check_all(seed: u64) -> Outcome<Output> {
    let reports = checks::run_all(seed);
    let passed = reports.iter().all(|r| r.passed);
    let mut out = Output::new(json!({ "passed": passed, "criteria": reports }));
    out.streams.push(json!({ "purpose": "criterion k, sub-task j", "master_seed": seed, "stream_id": "1000·k + j" }));
    out.passed = passed;
    Ok(out)
}

/// Dispatches a parsed command; returns the resolved config and the output.
fn dispatch(cli: &Cli, overrides: &Option<Value>) -> Outcome<(String, Value, Output)> {
    let seed = match overrides.as_ref().and_then(|o| o.get("seed")) {
        Some(v) => v.as_u64().ok_or_else(|| usage("config seed must be an unsigned integer"))?,
        None => cli.seed,
    };
    macro_rules! go {
        ($name:expr, $args:expr, $f:expr) => {{
            let a = resolve($args, overrides)?;
            let out = $f(&a, seed)?;
            ($name.to_string(), to_value(&a)?, out)
        }};
    }
    let r = match &cli.command {
        Command::Green(GreenCmd::Eval(a)) => go!("green eval", a, |a: &GreenEvalArgs, _| green_eval(a)),
        Command::Green(GreenCmd::Check(a)) => go!("green check", a, green_check),
        Command::Gff(GffCmd::Sample(a)) => go!("gff sample", a, gff_sample),
        Command::Gmc(GmcCmd::Mass(a)) => go!("gmc mass", a, gmc_mass),
        Command::Lqft(LqftCmd::Partition(a)) => go!("lqft partition", a, partition),
        Command::Lqft(LqftCmd::Weyl(a)) => go!("lqft weyl", a, weyl),
        Command::Lqft(LqftCmd::Kpz(a)) => go!("lqft kpz", a, kpz),
        Command::Lqft(LqftCmd::VolumeLaw(a)) => go!("lqft volume-law", a, volume_law),
        Command::Moduli(ModuliCmd::Integrand(a)) => go!("moduli integrand", a, integrand),
        Command::Moduli(ModuliCmd::Integrate(a)) => go!("moduli integrate", a, integrate),
        Command::Moduli(ModuliCmd::Sample(a)) => go!("moduli sample", a, moduli_sample),
        Command::CheckAll(a) => go!("check-all", a, |_: &CheckAllArgs, s| check_all(s)),
    };
    Ok(r)
}

fn load_overrides(path: &Option<PathBuf>) -> Outcome<Option<Value>> {
    let Some(p) = path else { return Ok(None) };
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(Failure::Io)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| usage(format!("config file: {e}")))?;
    if !v.is_object() {
        return Err(usage("config file must hold a JSON object"));
    }
    Ok(Some(v))
}

fn render(cli: &Cli, seed: u64, command: &str, config: Value, out: &Output) -> Outcome<String> {
    match cli.format {
        Format::Csv => out.csv.clone().ok_or_else(|| usage(format!("`{command}` has no CSV output; use --format json"))),
        Format::Json => {
            let doc = json!({
                "command": command,
                "config": { "seed": seed, "format": cli.format, "output": cli.output, "command": config },
                "seed": seed,
                "generator": GENERATOR_ID,
                "streams": out.streams,
                "result": out.result,
            });
            let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Io(e.into()))?;
            s.push('\n');
            Ok(s)
        }
    }
}

fn emit(cli: &Cli, text: &str) -> Outcome<()> {
    match &cli.output {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())).map_err(Failure::Io),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes()).context("writing stdout").map_err(Failure::Io)
        }
    }
}

fn diagnostic(f: &Failure) -> String {
    let (kind, msg) = match f {
        Failure::Usage(m) => ("usage", m.clone()),
        Failure::Numeric(e) => ("numeric", e.to_string()),
        Failure::Io(e) => ("io", format!("{e:#}")),
    };
    let mut s = serde_json::to_string_pretty(&json!({ "error": kind, "message": msg, "exit_code": f.code(), "generator": GENERATOR_ID })).unwrap_or_default();
    s.push('\n');
    s
}

/// Runs one command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = (|| -> Outcome<bool> {
        let overrides = load_overrides(&cli.config)?;
        let (command, config, out) = dispatch(&cli, &overrides)?;
        let seed = config_seed(&cli, &overrides);
        let text = render(&cli, seed, &command, config, &out)?;
        emit(&cli, &text)?;
        Ok(out.passed)
    })();
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(f) => {
            print!("{}", diagnostic(&f));
            f.code()
        }
    }
}

fn config_seed(cli: &Cli, overrides: &Option<Value>) -> u64 {
    overrides.as_ref().and_then(|o| o.get("seed")).and_then(Value::as_u64).unwrap_or(cli.seed)
}
