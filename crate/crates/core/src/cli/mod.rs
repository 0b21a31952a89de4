//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 scenario, 3 numerical failure during
//! integration, 4 unexpected verification failure. Diagnostics go to stderr
//! prefixed `error[CODE]:`.

pub mod models;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::evolution::export::{trajectory_csv, Quantity};
use crate::evolution::{integrate, EvolutionBundle};
use crate::model::Scenario;
use crate::representations::{to_heisenberg, to_heisenberg_like, TaggedOperator};
use crate::verify::{run_suite, SuiteOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SCENARIO: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

/// Prefix selecting a built-in model instead of a scenario file.
pub const DEMO_PREFIX: &str = "demo:";

#[derive(Debug, Parser)]
#[command(name = "metricbundle", version, about = "Non-Hermitian dynamics with an evolving metric")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a scenario and export the trajectory.
    Evolve(EvolveArgs),
    /// Integrate (or load) a trajectory and run the identity suite.
    Verify(VerifyArgs),
    /// Eigenvalues of an observable in the S, H and HL pictures.
    Spectrum(SpectrumArgs),
    /// Print a built-in scenario as JSON; lists the models without a name.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario file, or `demo:NAME` for a built-in model.
    scenario: String,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    t1: Option<f64>,
    /// Built-in model parameter, `key=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct EvolveArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Defaults to json for `.json` outputs and csv otherwise.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Extra CSV columns: norm, psi, G, U_R, U_L, E.
    #[arg(long, value_delimiter = ',')]
    extra: Vec<String>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// JSON report destination; the table is always printed.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// `json` prints the report instead of the table.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, default_value_t = 10)]
    node_stride: usize,
    #[arg(long, default_value_t = 1.0)]
    tolerance_scale: f64,
    /// Verify a trajectory written by `evolve --format json` instead of
    /// integrating.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    observable: String,
    /// Times (snapped to the nearest node); defaults to t0 and t1.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    times: Vec<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DemoArgs {
    name: Option<String>,
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

fn init_logging() {
    let level = match std::env::var("METRICBUNDLE_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Warn,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if code == EXIT_OK {
                print!("{e}");
            } else {
                eprintln!("error[{EXIT_USAGE}]: {}", e.to_string().trim_start_matches("error: ").trim_end());
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Evolve(a) => evolve(a),
        Command::Verify(a) => verify(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Demo(a) => demo(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error[{}]: {}", f.code, f.message);
            f.code
        }
    }
}

/// Loads a scenario file or `demo:NAME` and applies CLI overrides.
pub fn load_scenario(
    spec: &str,
    params: &[(String, f64)],
    t0: Option<f64>,
    t1: Option<f64>,
    step: Option<f64>,
) -> Result<Scenario, String> {
    let scenario = if let Some(name) = spec.strip_prefix(DEMO_PREFIX) {
        models::builtin(name, params).map_err(|e| e.to_string())?
    } else {
        if !params.is_empty() {
            return Err("--param applies only to demo: scenarios".to_string());
        }
        let text = fs::read_to_string(spec).map_err(|e| format!("{spec}: {e}"))?;
        Scenario::from_json_str(&text).map_err(|e| format!("{spec}: {e}"))?
    };
    scenario.with_overrides(t0, t1, step).map_err(|e| e.to_string())
}

fn load(a: &ScenarioArgs) -> Result<Scenario, Failure> {
    load_scenario(&a.scenario, &a.params, a.t0, a.t1, a.step).map_err(|m| Failure::new(EXIT_SCENARIO, m))
}

fn run_integration(s: &Scenario) -> Result<EvolutionBundle, Failure> {
    log::info!("integrating {} intervals", s.integrator.intervals(s.t0, s.t1));
    integrate(s).map_err(|e| Failure::new(EXIT_NUMERICAL, e.to_string()))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn evolve(a: EvolveArgs) -> Result<(), Failure> {
    let mut extras = Vec::new();
    for name in &a.extra {
        extras.push(
            Quantity::parse(name).ok_or_else(|| Failure::new(EXIT_USAGE, format!("unknown extra column `{name}`")))?,
        );
    }
    let scenario = load(&a.scenario)?;
    let bundle = run_integration(&scenario)?;
    let format = a.format.unwrap_or(match a.output.as_ref().and_then(|p| p.extension()) {
        Some(ext) if ext == "json" => Format::Json,
        _ => Format::Csv,
    });
    let text = match format {
        Format::Json => bundle.to_json() + "\n",
        Format::Csv => {
            trajectory_csv(&bundle, &scenario, &extras).map_err(|e| Failure::new(EXIT_NUMERICAL, e.to_string()))?
        }
    };
    emit(a.output.as_deref(), &text)
}

fn load_trajectory(path: &Path, scenario: &Scenario) -> Result<EvolutionBundle, Failure> {
    let fail = |m: String| Failure::new(EXIT_SCENARIO, format!("{}: {m}", path.display()));
    let text = fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    let bundle = EvolutionBundle::from_json(&text).map_err(|e| fail(e.to_string()))?;
    if bundle.dim() != scenario.dim() {
        return Err(fail(format!("trajectory dimension {} differs from scenario {}", bundle.dim(), scenario.dim())));
    }
    let (first, last) = (bundle.grid[0], bundle.grid[bundle.len() - 1]);
    if first != scenario.t0 || last != scenario.t1 {
        return Err(fail(format!(
            "trajectory spans [{first}, {last}] but scenario spans [{}, {}]",
            scenario.t0, scenario.t1
        )));
    }
    Ok(bundle)
}

fn verify(a: VerifyArgs) -> Result<(), Failure> {
    if a.node_stride == 0 {
        return Err(Failure::new(EXIT_USAGE, "--node-stride must be at least 1"));
    }
    if !(a.tolerance_scale > 0.0 && a.tolerance_scale.is_finite()) {
        return Err(Failure::new(EXIT_USAGE, "--tolerance-scale must be positive"));
    }
    let scenario = load(&a.scenario)?;
    let bundle = match &a.trajectory {
        Some(p) => load_trajectory(p, &scenario)?,
        None => run_integration(&scenario)?,
    };
    let opts = SuiteOptions { node_stride: a.node_stride, tolerance_scale: a.tolerance_scale };
    let report = run_suite(&bundle, &scenario, &opts);
    let json = report.to_json() + "\n";
    if let Some(p) = &a.output {
        emit(Some(p), &json)?;
    }
    match a.format {
        Some(Format::Json) if a.output.is_none() => print!("{json}"),
        _ => print!("{}", report.table()),
    }
    if report.summary.unexpected_failures > 0 {
        let names: Vec<String> = report
            .checks
            .iter()
            .filter(|c| c.unexpected_failure())
            .map(|c| match &c.observable {
                Some(o) => format!("{}[{o}]", c.name),
                None => c.name.clone(),
            })
            .collect();
        return Err(Failure::new(
            EXIT_VERIFICATION,
            format!("{} unexpected check failure(s): {}", names.len(), names.join(", ")),
        ));
    }
    Ok(())
}

fn spectrum(a: SpectrumArgs) -> Result<(), Failure> {
    let scenario = load(&a.scenario)?;
    let obs = scenario.observables.get(&a.observable).ok_or_else(|| {
        let known: Vec<&str> = scenario.observables.keys().map(String::as_str).collect();
        Failure::new(EXIT_USAGE, format!("unknown observable `{}` (known: {})", a.observable, known.join(", ")))
    })?;
    let times = if a.times.is_empty() { vec![scenario.t0, scenario.t1] } else { a.times.clone() };
    if let Some(t) = times.iter().find(|&&t| !(t >= scenario.t0 && t <= scenario.t1)) {
        return Err(Failure::new(EXIT_USAGE, format!("time {t} outside [{}, {}]", scenario.t0, scenario.t1)));
    }
    let bundle = run_integration(&scenario)?;
    let dim = scenario.dim();
    let num = |e: String| Failure::new(EXIT_NUMERICAL, e);

    let mut out = String::from("t,picture");
    for i in 0..dim {
        let _ = write!(out, ",eig_{i}_re,eig_{i}_im");
    }
    out.push('\n');
    for t in times {
        let k = bundle.nearest_node(t);
        let tk = bundle.grid[k];
        let o_s = TaggedOperator::schrodinger(obs.at(tk).map_err(|e| num(e.to_string()))?, tk);
        let o_h = to_heisenberg(&o_s, &bundle, k).map_err(|e| num(e.to_string()))?;
        let o_hl = to_heisenberg_like(&o_s, &bundle, k, &scenario.numeric).map_err(|e| num(e.to_string()))?;
        for (label, op) in [("S", &o_s), ("H", &o_h), ("HL", &o_hl)] {
            let mut ev = op.matrix.eigenvalues().map_err(|e| num(e.to_string()))?;
            crate::matops::sort_spectrum(&mut ev);
            let _ = write!(out, "{tk},{label}");
            for z in ev {
                let _ = write!(out, ",{},{}", z.re, z.im);
            }
            out.push('\n');
        }
    }
    emit(a.output.as_deref(), &out)
}

fn demo(a: DemoArgs) -> Result<(), Failure> {
    match a.name {
        None => emit(a.output.as_deref(), &(models::MODEL_NAMES.join("\n") + "\n")),
        Some(name) => {
            let s = models::builtin(&name, &a.params).map_err(|e| Failure::new(EXIT_SCENARIO, e.to_string()))?;
            emit(a.output.as_deref(), &(s.to_json() + "\n"))
        }
    }
}
