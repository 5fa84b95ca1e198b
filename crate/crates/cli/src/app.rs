//! Argument parsing and the compute / verify runs behind each subcommand.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use ssf_core::models::{DeltaPath, OdeTolerance, RobinCondition};
use ssf_core::ssf::{linspace, ssf_counting_oracle, ssf_for_pair, SsfGrid};
use ssf_core::verify::{self, Faults, Subject, VerifyConfig};
use ssf_core::{nevlog, opcore, EpsilonSchedule, Execution, SsfError};

use crate::descriptor::{DeltaDescriptor, Descriptor, PathChoice};
use crate::output::{self, Table};

/// Exit status of a successful run whose verification failed.
pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "ssf", version, about = "Spectral shift functions from boundary-value logarithms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// ξ of a finite-rank pair {A, A + G T G*}.
    Matrix(RunArgs),
    /// ξ of two Robin realizations on an interval.
    Robin(RunArgs),
    /// ξ of a point interaction on the line.
    Delta(DeltaArgs),
    /// ξ of a compactly supported potential on the line.
    Decouple(RunArgs),
    /// Run the verification suites on any descriptor.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Descriptor file (JSON with a `kind` field).
    pub input: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct DeltaArgs {
    /// Descriptor file; `--alpha` may be given instead.
    pub input: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "input")]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub comparison_c: Option<f64>,
    #[arg(long, value_enum)]
    pub path: Option<PathArg>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub input: PathBuf,
    /// Seed of the random unitaries in the basis-invariance suite.
    #[arg(long, default_value_t = 0)]
    pub basis_seed: u64,
    #[arg(long, default_value_t = 20)]
    pub unitaries: usize,
    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<FaultArg>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PathArg {
    Direct,
    Comparison,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    WeylSign,
    LogBranch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub grid_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid_max: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    pub eps_start: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eps_ratio: f64,
    #[arg(long, default_value_t = 3)]
    pub eps_count: usize,
    /// Odd resolvent power m of the trace formula, recorded with the grid.
    #[arg(long, default_value_t = 1)]
    pub power: u32,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Also write an SVG plot next to `--out`.
    #[arg(long)]
    pub plot: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Evaluate grid points on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: format!("input error: {}", message.into()) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<SsfError> for CliError {
    fn from(e: SsfError) -> Self {
        if e.is_input_error() {
            Self::input(e.to_string())
        } else {
            Self { code: EXIT_NUMERICAL, message: format!("numerical error: {e}") }
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Validated run settings shared by every subcommand.
struct Settings {
    grid: Vec<f64>,
    schedule: EpsilonSchedule,
    power: u32,
    format: Format,
    plot: bool,
    out: Option<PathBuf>,
    exec: Execution,
}

impl Settings {
    fn new(common: &CommonArgs, default: (f64, f64, usize)) -> CliResult<Self> {
        let lo = common.grid_min.unwrap_or(default.0);
        let hi = common.grid_max.unwrap_or(default.1);
        let points = common.grid_points.unwrap_or(default.2);
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(CliError::input(format!("grid_min < grid_max required, got {lo} and {hi}")));
        }
        if points < 2 {
            return Err(CliError::input(format!("grid_points >= 2 required, got {points}")));
        }
        if common.power.is_multiple_of(2) {
            return Err(CliError::input(format!("power must be odd and positive, got {}", common.power)));
        }
        if common.eps_count == 0 {
            return Err(CliError::input("eps_count must be positive"));
        }
        if !(common.eps_start > 0.0 && common.eps_start.is_finite()) {
            return Err(CliError::input(format!("eps_start must be positive, got {}", common.eps_start)));
        }
        let geometric = EpsilonSchedule::geometric(common.eps_start, common.eps_ratio, common.eps_count)?;
        let values = geometric.values().iter().map(|&e| output::round12(e)).collect();
        let schedule = EpsilonSchedule::new(values, geometric.extrapolation_order())?;
        if common.plot && common.out.is_none() {
            return Err(CliError::input("--plot needs --out to place the SVG"));
        }
        if common.plot && common.out.as_deref().and_then(Path::extension).is_some_and(|e| e == "svg") {
            return Err(CliError::input("--out must not end in .svg when --plot is set"));
        }
        Ok(Self {
            grid: linspace(lo, hi, points),
            schedule,
            power: common.power,
            format: common.format,
            plot: common.plot,
            out: common.out.clone(),
            exec: if common.sequential { Execution::Sequential } else { Execution::Parallel },
        })
    }

    fn metadata(&self, subcommand: &str, kind: &str, hash: &str) -> Value {
        json!({
            "tool": "ssf",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": subcommand,
            "kind": kind,
            "descriptor_sha256": hash,
            "grid": {"min": self.grid[0], "max": self.grid[self.grid.len() - 1], "points": self.grid.len()},
            "power": self.power,
            "eps_schedule": {
                "values": self.schedule.values(),
                "extrapolation_order": self.schedule.extrapolation_order(),
            },
        })
    }
}

fn tolerances() -> Value {
    let ode = OdeTolerance::default();
    json!({
        "hermitian_symmetry": opcore::SYMMETRY_TOL,
        "dissipative": nevlog::DISSIPATIVE_TOL,
        "branch_cut": nevlog::CUT_TOL,
        "singular_value": nevlog::SINGULAR_TOL,
        "ode_rel": ode.rel,
        "ode_abs": ode.abs,
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Loaded {
    descriptor: Descriptor,
    hash: String,
}

fn load(path: &Path) -> CliResult<Loaded> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| CliError::input(format!("{} is not UTF-8", path.display())))?;
    let descriptor = Descriptor::parse(text).map_err(CliError::input)?;
    Ok(Loaded { descriptor, hash: sha256_hex(&bytes) })
}

fn expect_kind(loaded: &Loaded, kind: &str) -> CliResult<()> {
    if loaded.descriptor.kind() != kind {
        return Err(CliError::input(format!(
            "descriptor kind '{}' does not match subcommand (expected '{kind}')",
            loaded.descriptor.kind()
        )));
    }
    Ok(())
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Default grid for a descriptor: its interesting spectral range.
fn default_grid(d: &Descriptor) -> CliResult<(f64, f64, usize)> {
    Ok(match d {
        Descriptor::Pair(p) => {
            let (lo, hi) = p.build()?.spectral_hull();
            (lo - 1.0, hi + 1.0, 301)
        }
        Descriptor::Delta(dd) => {
            let lo = if dd.alpha > 0.0 { -dd.alpha * dd.alpha / 4.0 - 1.0 } else { -1.0 };
            (lo, 25.0, 261)
        }
        Descriptor::Robin(r) => {
            let model = r.build()?;
            let mut lo = 0.0f64;
            for cond in [RobinCondition::Beta0, RobinCondition::Beta1] {
                if let Some(&first) = model.eigenvalues(cond, 50.0)?.first() {
                    lo = lo.min(first);
                }
            }
            (lo - 1.0, 50.0, 256)
        }
        Descriptor::Decouple(v) => (v.build()?.potential().min().min(0.0) - 1.0, 30.0, 311),
    })
}

struct Computed {
    grid: SsfGrid,
    oracle: Option<Vec<f64>>,
    extra: Value,
}

fn compute(d: &Descriptor, s: &Settings) -> CliResult<Computed> {
    let grid = &s.grid;
    Ok(match d {
        Descriptor::Pair(p) => {
            let pair = p.build()?;
            let ssf = ssf_for_pair(&pair, grid, &s.schedule, s.exec)?;
            let oracle = grid.iter().map(|&l| ssf_counting_oracle(pair.a_op(), pair.b_op(), l) as f64).collect();
            let route = if pair.is_t_positive() { "weyl" } else { "comparison" };
            Computed { grid: ssf, oracle: Some(oracle), extra: json!({"route": route}) }
        }
        Descriptor::Robin(r) => {
            let model = r.build()?;
            let ssf = model.ssf_with(grid, &s.schedule, s.exec)?;
            let oracle = grid.iter().map(|&l| Ok(model.counting_difference(l)? as f64)).collect::<Result<_, SsfError>>()?;
            Computed { grid: ssf, oracle: Some(oracle), extra: json!({}) }
        }
        Descriptor::Delta(dd) => {
            let model = dd.build()?;
            let path = dd.path();
            let ssf = model.ssf_with(grid, &s.schedule, path, s.exec)?;
            let oracle = grid.iter().map(|&l| model.closed_form(l)).collect();
            let path_name = if path == DeltaPath::Direct { "direct" } else { "comparison" };
            Computed {
                grid: ssf,
                oracle: Some(oracle),
                extra: json!({"path": path_name, "comparison_c": model.comparison_c()}),
            }
        }
        Descriptor::Decouple(v) => {
            let model = v.build()?;
            Computed { grid: model.ssf_with(grid, &s.schedule, s.exec)?, oracle: None, extra: json!({}) }
        }
    })
}

fn run_compute(subcommand: &str, loaded: Loaded, common: &CommonArgs) -> CliResult<u8> {
    let settings = Settings::new(common, default_grid(&loaded.descriptor)?)?;
    let computed = compute(&loaded.descriptor, &settings)?;
    let ssf = computed.grid.with_power(settings.power)?;
    let mut table = Table::new(ssf.lambda(), ssf.xi());
    if let Some(oracle) = computed.oracle {
        table = table.with_oracle(oracle);
    }
    let text = match settings.format {
        Format::Csv => table.to_csv(),
        Format::Json => {
            let mut meta = settings.metadata(subcommand, loaded.descriptor.kind(), &loaded.hash);
            meta["tolerances"] = tolerances();
            meta["basis_seed"] = json!(ssf.basis_seed());
            meta["unresolved"] = json!(ssf.unresolved());
            meta["model"] = computed.extra;
            table.to_json(meta)
        }
    };
    write_output(settings.out.as_deref(), &text)?;
    if settings.plot {
        let out = settings.out.as_ref().expect("checked in Settings::new");
        let title = format!("spectral shift function ({})", loaded.descriptor.kind());
        let svg = output::svg_plot(ssf.lambda(), ssf.xi(), &title);
        write_output(Some(&out.with_extension("svg")), &svg)?;
    }
    Ok(0)
}

fn delta_from_flags(args: &DeltaArgs) -> CliResult<Loaded> {
    let alpha = args.alpha.ok_or_else(|| CliError::input("delta needs a descriptor file or --alpha"))?;
    let dd = DeltaDescriptor { alpha, comparison_c: args.comparison_c, path: None };
    let canonical = json!({"kind": "delta", "alpha": alpha, "comparison_c": args.comparison_c});
    Ok(Loaded { descriptor: Descriptor::Delta(dd), hash: sha256_hex(canonical.to_string().as_bytes()) })
}

fn run_verify(args: &VerifyArgs) -> CliResult<u8> {
    let loaded = load(&args.input)?;
    if args.common.plot {
        return Err(CliError::input("--plot applies to compute subcommands only"));
    }
    let settings = Settings::new(&args.common, default_grid(&loaded.descriptor)?)?;
    let faults = Faults {
        flip_weyl_sign: args.inject_fault == Some(FaultArg::WeylSign),
        corrupt_log_branch: args.inject_fault == Some(FaultArg::LogBranch),
    };
    let cfg = VerifyConfig {
        grid: settings.grid.clone(),
        schedule: settings.schedule.clone(),
        basis_seed: args.basis_seed,
        unitaries: args.unitaries,
        exec: settings.exec,
    };
    let report = match &loaded.descriptor {
        Descriptor::Pair(p) => {
            let pair = p.build()?;
            let subject = Subject::pair(&pair)?;
            verify::verify(&subject, &cfg, faults)?
        }
        Descriptor::Robin(r) => {
            let model = r.build()?;
            let subject = Subject::robin(&model);
            verify::verify(&subject, &cfg, faults)?
        }
        Descriptor::Delta(dd) => {
            let model = dd.build()?;
            let subject = Subject::delta(&model, dd.path())?;
            verify::verify(&subject, &cfg, faults)?
        }
        Descriptor::Decouple(v) => {
            let model = v.build()?;
            let subject = Subject::decouple(&model);
            verify::verify(&subject, &cfg, faults)?
        }
    };
    let text = match settings.format {
        Format::Csv => output::report_csv(&report),
        Format::Json => {
            let mut meta = settings.metadata("verify", loaded.descriptor.kind(), &loaded.hash);
            meta["tolerances"] = tolerances();
            meta["basis_seed"] = json!(args.basis_seed);
            meta["unitaries"] = json!(args.unitaries);
            if let Some(f) = args.inject_fault {
                meta["injected_fault"] = json!(format!("{f:?}"));
            }
            output::report_json(&report, meta)
        }
    };
    write_output(settings.out.as_deref(), &text)?;
    for s in &report.suites {
        let status = match &s.status {
            verify::SuiteStatus::Pass => "pass".to_string(),
            verify::SuiteStatus::Fail => "FAIL".to_string(),
            verify::SuiteStatus::Skipped(why) => why.clone(),
        };
        eprintln!("{:<20} {status}", s.name);
    }
    Ok(if report.passed() { 0 } else { EXIT_VERIFY_FAILED })
}

/// Runs one invocation and returns its exit status.
pub fn run(cli: &Cli) -> CliResult<u8> {
    match &cli.command {
        Command::Matrix(a) => {
            let loaded = load(&a.input)?;
            expect_kind(&loaded, "pair")?;
            run_compute("matrix", loaded, &a.common)
        }
        Command::Robin(a) => {
            let loaded = load(&a.input)?;
            expect_kind(&loaded, "robin")?;
            run_compute("robin", loaded, &a.common)
        }
        Command::Decouple(a) => {
            let loaded = load(&a.input)?;
            expect_kind(&loaded, "decouple")?;
            run_compute("decouple", loaded, &a.common)
        }
        Command::Delta(a) => {
            let mut loaded = match &a.input {
                Some(p) => load(p)?,
                None => delta_from_flags(a)?,
            };
            expect_kind(&loaded, "delta")?;
            if let (Some(p), Descriptor::Delta(dd)) = (a.path, &mut loaded.descriptor) {
                dd.path = Some(match p {
                    PathArg::Direct => PathChoice::Direct,
                    PathArg::Comparison => PathChoice::Comparison,
                });
            }
            run_compute("delta", loaded, &a.common)
        }
        Command::Verify(a) => run_verify(a),
    }
}
