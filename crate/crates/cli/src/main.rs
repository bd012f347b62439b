//! `ab-disk`: spectra of the half-integer Aharonov–Bohm operator on the unit
//! disk, computed through mixed Dirichlet–Neumann problems on the half disk.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use abdisk::eigensolve::DEFAULT_SEED;
use abdisk::mesh::build_half_disk_mesh;
use abdisk::specfun::{bessel_zeros, BesselOrder};
use abdisk::spectra::{
    ab_spectrum_with, default_grid, mixed_pencil, mixed_spectrum, sweep_with, MeshLevel,
    MixedProblemSpec, SolveSettings, Variant, DEFAULT_LEVELS,
};
use abdisk::verify::{run_suite, Suite, VerifyConfig, SOLVER_TOL};

use config::{parse_grid, parse_levels, ConfigFile};
use output::{Format, Output};

/// Bad arguments or configuration; reported with exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(
    name = "ab-disk",
    version,
    about = "Aharonov-Bohm eigenvalues on the unit disk"
)]
struct Cli {
    /// `key = value` file; flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Zeros z of J with order twice-order/2 and the eigenvalues z².
    BesselZeros(BesselArgs),
    /// Extrapolated eigenvalues of one mixed problem or of the merged AB spectrum.
    Spectrum(SpectrumArgs),
    /// Lowest two AB eigenvalues over a grid of pole positions.
    Sweep(SweepArgs),
    /// Run verification suites and report each criterion.
    Verify(VerifyArgs),
    /// Write a half-disk mesh in the text dump format.
    MeshDump(MeshArgs),
    /// Write the lower triangle of a stiffness or mass matrix as COO triplets.
    MatrixDump(MatrixArgs),
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SolveArgs {
    /// Extrapolation levels as `base:grade` pairs, coarsest first.
    #[arg(long)]
    levels: Option<String>,
    /// Relative eigen-residual tolerance of the iterative solver.
    #[arg(long)]
    tol: Option<f64>,
    /// Seed for the solver start block (decimal or 0x hex).
    #[arg(long)]
    seed: Option<String>,
}

#[derive(Args, Debug)]
struct BesselArgs {
    #[arg(long)]
    twice_order: Option<u32>,
    #[arg(long)]
    count: Option<usize>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    /// Sorted union of the DN and ND spectra.
    #[arg(long, conflicts_with = "variant")]
    merged: bool,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    solve: SolveArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma list or `start:stop:step`; defaults to 0..0.9 in steps of 0.1.
    #[arg(long)]
    t_grid: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    solve: SolveArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Option<SuiteArg>,
    /// Cheaper meshes with widened tolerances.
    #[arg(long)]
    coarse: bool,
}

#[derive(Args, Debug)]
struct MeshArgs {
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long)]
    base_level: Option<u32>,
    #[arg(long)]
    grade_rounds: Option<u32>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MatrixArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_enum, default_value = "stiffness")]
    which: Which,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum VariantArg {
    Dn,
    Nd,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Dn => Variant::DN,
            VariantArg::Nd => Variant::ND,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SuiteArg {
    All,
    Specfun,
    Fem,
    Spectra,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Which {
    Stiffness,
    Mass,
}

/// Flag value, else config entry, else default.
fn pick<T: std::str::FromStr>(flag: Option<T>, cfg: &ConfigFile, key: &str, default: T) -> Result<T>
where
    T::Err: fmt::Display,
{
    match flag {
        Some(v) => Ok(v),
        None => Ok(cfg
            .get(key)
            .map_err(|e| usage(e.to_string()))?
            .unwrap_or(default)),
    }
}

fn pick_opt<T: std::str::FromStr>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key).map_err(|e| usage(e.to_string())),
    }
}

fn parse_variant(s: &str) -> Result<Variant> {
    match s.to_ascii_lowercase().as_str() {
        "dn" => Ok(Variant::DN),
        "nd" => Ok(Variant::ND),
        _ => Err(usage(format!("variant must be dn or nd, got `{s}`"))),
    }
}

fn parse_seed(s: &str) -> Result<u64> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|_| usage(format!("seed `{s}` is not an unsigned integer")))
}

fn resolve_variant(flag: Option<VariantArg>, cfg: &ConfigFile) -> Result<Option<Variant>> {
    match (flag, cfg.raw("variant")) {
        (Some(v), _) => Ok(Some(v.into())),
        (None, Some(s)) => parse_variant(s).map(Some),
        (None, None) => Ok(None),
    }
}

fn resolve_format(args: &OutputArgs, cfg: &ConfigFile) -> Result<Format> {
    match (args.format, cfg.raw("format")) {
        (Some(f), _) => Ok(f),
        (None, Some(s)) => Format::from_str(s, true).map_err(usage),
        (None, None) => Ok(Format::Csv),
    }
}

fn resolve_output(args: &OutputArgs, cfg: &ConfigFile) -> Result<Output> {
    let path = args
        .output
        .clone()
        .or_else(|| cfg.raw("output").map(PathBuf::from));
    Ok(Output::new(resolve_format(args, cfg)?, path))
}

fn resolve_levels(flag: &Option<String>, cfg: &ConfigFile) -> Result<Vec<MeshLevel>> {
    let levels = match flag.as_deref().or(cfg.raw("levels")) {
        Some(s) => parse_levels(s).map_err(|e| usage(e.to_string()))?,
        None => DEFAULT_LEVELS.to_vec(),
    };
    if levels.len() < 2 {
        return Err(usage("at least two extrapolation levels are required"));
    }
    if levels.iter().any(|&(b, g)| !(1..=8).contains(&b) || g > 12) {
        return Err(usage("mesh levels need base in 1..=8 and grade in 0..=12"));
    }
    Ok(levels)
}

fn resolve_settings(args: &SolveArgs, cfg: &ConfigFile) -> Result<SolveSettings> {
    let tol = pick(args.tol, cfg, "tol", SOLVER_TOL)?;
    if !(tol > 0.0 && tol < 1e-2) {
        return Err(usage(format!("tol = {tol} must lie in (0, 1e-2)")));
    }
    let seed = match args.seed.as_deref().or(cfg.raw("seed")) {
        Some(s) => parse_seed(s)?,
        None => DEFAULT_SEED,
    };
    Ok(SolveSettings { tol, seed })
}

fn check_k(k: usize, min: usize) -> Result<usize> {
    if k < min || k > 8 {
        return Err(usage(format!("k = {k} must lie in {min}..=8")));
    }
    Ok(k)
}

fn cmd_bessel_zeros(args: &BesselArgs, cfg: &ConfigFile) -> Result<ExitCode> {
    let twice = pick(args.twice_order, cfg, "twice_order", 1)?;
    let count = pick(args.count, cfg, "count", 5)?;
    let order = BesselOrder::new(twice).map_err(|e| usage(e.to_string()))?;
    if count == 0 {
        return Err(usage("count must be positive"));
    }
    let table = bessel_zeros(order, count).map_err(|e| usage(e.to_string()))?;
    resolve_output(&args.out, cfg)?.bessel(twice, &table.zeros)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_spectrum(args: &SpectrumArgs, cfg: &ConfigFile) -> Result<ExitCode> {
    let t = pick_opt(args.t, cfg, "t")?.ok_or_else(|| usage("spectrum needs --t"))?;
    let merged = args.merged || (args.variant.is_none() && pick(None, cfg, "merged", false)?);
    let variant = resolve_variant(args.variant, cfg)?;
    let k = check_k(pick(args.k, cfg, "k", 4)?, 1)?;
    let levels = resolve_levels(&args.solve.levels, cfg)?;
    let settings = resolve_settings(&args.solve, cfg)?;
    let out = resolve_output(&args.out, cfg)?;
    if merged {
        if !(t.abs() < 1.0) {
            return Err(usage(format!("merged spectrum needs |t| < 1, got {t}")));
        }
        let ab = ab_spectrum_with(t, k, &levels, settings)?;
        out.merged_spectrum(&ab, &levels)?;
    } else {
        let variant = variant.ok_or_else(|| usage("spectrum needs --merged or --variant"))?;
        if !(t.abs() <= 1.0) {
            return Err(usage(format!("pole position needs |t| <= 1, got {t}")));
        }
        let spec = MixedProblemSpec::new(t, variant, k)
            .with_levels(&levels)
            .with_settings(settings);
        out.single_spectrum(&mixed_spectrum(&spec)?, &levels)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: &SweepArgs, cfg: &ConfigFile) -> Result<ExitCode> {
    let grid = match args.t_grid.as_deref().or(cfg.raw("t_grid")) {
        Some(s) => parse_grid(s).map_err(|e| usage(e.to_string()))?,
        None => default_grid(),
    };
    if grid.is_empty()
        || grid.iter().any(|t| !(0.0..=0.95).contains(t))
        || grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(usage(
            "t grid must be non-empty, ascending and inside [0, 0.95]",
        ));
    }
    let k = check_k(pick(args.k, cfg, "k", 2)?, 2)?;
    let levels = resolve_levels(&args.solve.levels, cfg)?;
    let settings = resolve_settings(&args.solve, cfg)?;
    let out = resolve_output(&args.out, cfg)?;
    let result = sweep_with(&grid, k, &levels, settings)?;
    out.sweep(&result)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &VerifyArgs, cfg: &ConfigFile) -> Result<ExitCode> {
    let suite = match (args.suite, cfg.raw("suite")) {
        (Some(s), _) => match s {
            SuiteArg::All => Suite::All,
            SuiteArg::Specfun => Suite::Specfun,
            SuiteArg::Fem => Suite::Fem,
            SuiteArg::Spectra => Suite::Spectra,
        },
        (None, Some(s)) => Suite::parse(s).ok_or_else(|| usage(format!("unknown suite `{s}`")))?,
        (None, None) => Suite::All,
    };
    let coarse = args.coarse || pick(None, cfg, "coarse", false)?;
    let config = if coarse {
        VerifyConfig::coarse()
    } else {
        VerifyConfig::default()
    };
    let reports = run_suite(suite, config);
    let mut failed = 0;
    for r in &reports {
        println!("{r}");
        if !r.pass() {
            failed += 1;
        }
    }
    println!(
        "{} of {} criteria passed",
        reports.len() - failed,
        reports.len()
    );
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn resolve_mesh(args: &MeshArgs, cfg: &ConfigFile) -> Result<(f64, u32, u32)> {
    let t = pick(args.t, cfg, "t", 0.0)?;
    let base = pick(args.base_level, cfg, "base_level", 4)?;
    let grade = pick(args.grade_rounds, cfg, "grade_rounds", 4)?;
    if !(t.abs() <= 1.0) || !(1..=8).contains(&base) || grade > 12 {
        return Err(usage(
            "mesh needs |t| <= 1, base level in 1..=8 and grade rounds in 0..=12",
        ));
    }
    Ok((t, base, grade))
}

fn cmd_mesh_dump(args: &MeshArgs, cfg: &ConfigFile) -> Result<ExitCode> {
    let (t, base, grade) = resolve_mesh(args, cfg)?;
    let mesh = build_half_disk_mesh(t, base, grade)?;
    let mut buf = Vec::new();
    mesh.write_dump(&mut buf)?;
    output::write_bytes(args.output.as_deref(), &buf)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_matrix_dump(args: &MatrixArgs, cfg: &ConfigFile) -> Result<ExitCode> {
    let (t, base, grade) = resolve_mesh(&args.mesh, cfg)?;
    let variant = resolve_variant(args.variant, cfg)?.unwrap_or(Variant::DN);
    let mesh = build_half_disk_mesh(t, base, grade)?;
    let (dofs, stiffness, mass) = mixed_pencil(&mesh, variant)?;
    let matrix = match args.which {
        Which::Stiffness => stiffness,
        Which::Mass => mass,
    };
    debug_assert_eq!(matrix.dim(), dofs.n_free());
    let mut buf = Vec::new();
    matrix.write_lower_coo(&mut buf)?;
    output::write_bytes(args.mesh.output.as_deref(), &buf)?;
    Ok(ExitCode::SUCCESS)
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("AB_DISK_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        usage(format!(
            "AB_DISK_THREADS = `{raw}` is not a positive integer"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")
}

fn run(cli: Cli) -> Result<ExitCode> {
    configure_threads()?;
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path).map_err(|e| usage(format!("{e:#}")))?,
        None => ConfigFile::default(),
    };
    match &cli.command {
        Command::BesselZeros(a) => cmd_bessel_zeros(a, &cfg),
        Command::Spectrum(a) => cmd_spectrum(a, &cfg),
        Command::Sweep(a) => cmd_sweep(a, &cfg),
        Command::Verify(a) => cmd_verify(a, &cfg),
        Command::MeshDump(a) => cmd_mesh_dump(a, &cfg),
        Command::MatrixDump(a) => cmd_matrix_dump(a, &cfg),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<abdisk::Error>() {
        Some(abdisk::Error::Domain(_) | abdisk::Error::UnsupportedOrder { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    // clap exits with code 2 on parse errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
