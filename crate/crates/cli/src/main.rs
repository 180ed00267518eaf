//! `vlp`: simulate drone flights under an FDMA light testbed, run the position
//! solvers over sensor logs, and compare them.

mod manifest;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use vlp_core::eval::{compare_methods, run_method, write_estimate_trace, EvalConfig};
use vlp_core::fusion::write_height_trace;
use vlp_core::localization::Method;
use vlp_core::sensors::{read_log, write_log, SensorFrame};
use vlp_core::sim::{run_flight, FlightPlan, FlightSpec, SimConfig};

use manifest::{config_from_manifest, write_atomic, Manifest};

#[derive(Parser)]
#[command(name = "vlp", version, about = "Visible-light drone positioning: simulate, localize, compare")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate flights and write one sensor-log CSV per flight plus a manifest.
    Simulate(SimulateArgs),
    /// Run one solver over a sensor log and write its estimate trace.
    Localize(LocalizeArgs),
    /// Run several solvers over a set of logs and print the comparison table.
    Compare(CompareArgs),
    /// Print the built-in configuration as TOML.
    DefaultConfig,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration, or a manifest written by an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FusionArgs {
    /// Drift-correction blend weight for the VLP height, in [0, 1].
    #[arg(long)]
    epsilon: Option<f64>,
    /// Apply the drift correction on every k-th frame only.
    #[arg(long)]
    stride_k: Option<usize>,
    /// Fuse barometer and accelerometer without any VLP correction.
    #[arg(long)]
    no_drift_correction: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Flight to simulate, by name or by kind (circle, hover, lift_land). Repeatable;
    /// all configured flights by default.
    #[arg(long)]
    flight: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LocalizeArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    fusion: FusionArgs,
    /// Sensor-log CSV.
    #[arg(long)]
    log: PathBuf,
    /// firefly, indirect-h or pso-3d.
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Output directory; the trace goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    fusion: FusionArgs,
    /// Glob matching the sensor logs, e.g. `runs/*.csv`.
    #[arg(long)]
    logs: String,
    /// Comma-separated solvers; all three by default.
    #[arg(long = "method", alias = "methods", value_parser = parse_method, value_delimiter = ',')]
    methods: Vec<Method>,
    /// Output directory for the CSV table, per-flight traces and manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: vlp_core::Error| e.to_string())
}

/// A failure with a fixed exit code; the message describes what went wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Failure {
    Usage(String),
    Solver(String),
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Solver(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Failure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(f) = err.downcast_ref::<Failure>() {
        return match f {
            Failure::Usage(_) => 2,
            Failure::Solver(_) => 4,
        };
    }
    match err.chain().find_map(|c| c.downcast_ref::<vlp_core::Error>()) {
        Some(vlp_core::Error::Parse { .. } | vlp_core::Error::Csv(_)) => 3,
        Some(vlp_core::Error::Io(_)) | None => 1,
        Some(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Localize(args) => localize(args),
        Command::Compare(args) => compare(args),
        Command::DefaultConfig => SimConfig::default().to_toml_string().map(|s| print!("{s}")).map_err(Into::into),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Loads the configuration (or the defaults) and applies the seed override.
fn load_config(args: &ConfigArgs) -> Result<SimConfig> {
    let mut cfg = match &args.config {
        None => SimConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| usage(format!("reading config {}", path.display())))?;
            let parsed = if text.contains("[provenance]") {
                config_from_manifest(&text)
            } else {
                SimConfig::from_toml_str(&text).map_err(Into::into)
            };
            parsed.with_context(|| usage(format!("config {}", path.display())))?
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn apply_fusion(cfg: &mut SimConfig, args: &FusionArgs) -> Result<()> {
    if let Some(e) = args.epsilon {
        cfg.fusion.epsilon = e;
    }
    if let Some(k) = args.stride_k {
        cfg.fusion.stride_k = k;
    }
    if args.no_drift_correction {
        cfg.fusion.drift_correction = false;
    }
    cfg.fusion.drift().context(usage("fusion settings"))?;
    Ok(())
}

/// Solver settings for logs recorded at `frame_rate`.
fn eval_config(cfg: &SimConfig, frame_rate: f64) -> Result<EvalConfig> {
    let build = || -> vlp_core::Result<EvalConfig> {
        Ok(EvalConfig {
            filter: cfg.fusion.filter(frame_rate)?,
            drift: cfg.fusion.drift()?,
            indirect_h: cfg.indirect_h.build()?,
            pso: cfg.pso.build()?,
            seed: cfg.seed,
            ..EvalConfig::new(cfg.testbed()?)
        })
    };
    Ok(build()?)
}

fn frame_rate(frames: &[SensorFrame]) -> f64 {
    match (frames.first(), frames.last()) {
        (Some(a), Some(b)) if frames.len() > 1 && b.timestamp > a.timestamp => {
            (frames.len() - 1) as f64 / (b.timestamp - a.timestamp)
        }
        _ => FlightPlan::default().frame_rate,
    }
}

fn read_log_file(path: &Path) -> Result<(Vec<u8>, Vec<SensorFrame>)> {
    let bytes = fs::read(path).with_context(|| usage(format!("reading log {}", path.display())))?;
    let frames = read_log(bytes.as_slice()).with_context(|| format!("log {}", path.display()))?;
    if frames.is_empty() {
        return Err(usage(format!("log {} has no frames", path.display())).into());
    }
    Ok((bytes, frames))
}

/// The invocation as `vlp <args>`, independent of where the binary lives.
fn command_line() -> String {
    std::iter::once("vlp".to_owned()).chain(std::env::args().skip(1)).collect::<Vec<_>>().join(" ")
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> vlp_core::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

/// Flights selected by `--flight`: configured names first, then a default plan of
/// the named kind.
fn select_flights(cfg: &SimConfig, wanted: &[String]) -> Result<Vec<FlightSpec>> {
    if wanted.is_empty() {
        return Ok(cfg.flights.clone());
    }
    wanted
        .iter()
        .map(|w| {
            if let Some(f) = cfg.flights.iter().find(|f| &f.name == w) {
                return Ok(f.clone());
            }
            if matches!(w.as_str(), "circle" | "hover" | "lift_land") {
                return Ok(FlightSpec { name: w.clone(), kind: w.clone(), ..FlightSpec::default() });
            }
            let names: Vec<_> = cfg.flights.iter().map(|f| f.name.as_str()).collect();
            Err(usage(format!("no flight `{w}`; configured flights: {}", names.join(", "))).into())
        })
        .collect()
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    // The manifest's config lists exactly the flights written, in seed order.
    cfg.flights = select_flights(&cfg, &args.flight)?;
    let testbed = cfg.testbed().context(usage("testbed"))?;
    let models = cfg.sensor_models().context(usage("sensor models"))?;

    let mut manifest = Manifest::new(&command_line(), cfg.seed, &cfg, args.config.config.as_deref());
    for (i, spec) in cfg.flights.iter().enumerate() {
        let plan = spec.build().context(usage("flight plan"))?;
        let log = run_flight(&testbed, &plan, &models, cfg.seed.wrapping_add(i as u64))
            .with_context(|| usage(format!("flight `{}`", spec.name)))?;
        let bytes = csv_bytes(|buf| write_log(buf, &log))?;
        manifest.output(&args.out, &format!("{}.csv", spec.name), &bytes)?;
        eprintln!("{}: {} frames", spec.name, log.len());
    }
    manifest.write(&args.out, "manifest.toml")
}

fn localize(args: LocalizeArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    apply_fusion(&mut cfg, &args.fusion)?;
    let (bytes, frames) = read_log_file(&args.log)?;
    let ecfg = eval_config(&cfg, frame_rate(&frames)).context(usage("solver settings"))?;
    let run = run_method(&frames, args.method, &ecfg, 0)?;
    let failed = run.failures();
    eprintln!("{}: {} of {} frames localized", args.method, frames.len() - failed, frames.len());
    let trace = csv_bytes(|buf| write_estimate_trace(buf, &run, &frames))?;

    match &args.out {
        None => print!("{}", String::from_utf8_lossy(&trace)),
        Some(dir) => {
            let stem = args.log.file_stem().map_or("log".into(), |s| s.to_string_lossy().into_owned());
            let mut manifest = Manifest::new(&command_line(), cfg.seed, &cfg, args.config.config.as_deref());
            manifest.input(&args.log, &bytes);
            manifest.output(dir, &format!("{stem}.{}.csv", args.method), &trace)?;
            if let Some(heights) = &run.heights {
                let h = csv_bytes(|buf| write_height_trace(buf, &frames, heights))?;
                manifest.output(dir, &format!("{stem}.height.csv"), &h)?;
            }
            manifest.write(dir, &format!("{stem}.{}.manifest.toml", args.method))?;
        }
    }
    if failed == frames.len() {
        return Err(Failure::Solver(format!("{} failed on every frame of {}", args.method, args.log.display())).into());
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    apply_fusion(&mut cfg, &args.fusion)?;
    let methods = if args.methods.is_empty() { Method::ALL.to_vec() } else { args.methods.clone() };

    let mut paths: Vec<PathBuf> = glob::glob(&args.logs)
        .map_err(|e| usage(format!("bad glob `{}`: {e}", args.logs)))?
        .collect::<Result<_, _>>()
        .context("listing logs")?;
    paths.sort();
    if paths.is_empty() {
        return Err(usage(format!("no logs match `{}`", args.logs)).into());
    }
    let mut inputs = Vec::with_capacity(paths.len());
    let mut logs = Vec::with_capacity(paths.len());
    for p in &paths {
        let (bytes, frames) = read_log_file(p)?;
        inputs.push(bytes);
        logs.push(frames);
    }

    let ecfg = eval_config(&cfg, frame_rate(&logs[0])).context(usage("solver settings"))?;
    let cmp = compare_methods(&logs, &methods, &ecfg)?;
    print!("{}", cmp.to_text());

    if let Some(dir) = &args.out {
        let mut manifest = Manifest::new(&command_line(), cfg.seed, &cfg, args.config.config.as_deref());
        for (p, bytes) in paths.iter().zip(&inputs) {
            manifest.input(p, bytes);
        }
        manifest.output(dir, "comparison.csv", &csv_bytes(|buf| cmp.write_csv(buf))?)?;
        write_atomic(&dir.join("comparison.txt"), cmp.to_text().as_bytes())?;
        for ((p, frames), runs) in paths.iter().zip(&logs).zip(&cmp.runs) {
            let stem = p.file_stem().map_or("log".into(), |s| s.to_string_lossy().into_owned());
            for run in runs {
                let trace = csv_bytes(|buf| write_estimate_trace(buf, run, frames))?;
                manifest.output(dir, &format!("{stem}.{}.csv", run.method), &trace)?;
            }
        }
        manifest.write(dir, "manifest.toml")?;
    }
    if cmp.summaries.iter().all(|s| s.stats.is_none()) {
        return Err(Failure::Solver("every solver failed on every frame".into()).into());
    }
    Ok(())
}
