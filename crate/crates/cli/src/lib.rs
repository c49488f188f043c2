//! Command-line driver: packing generation, lattice and structural sums,
//! conductivity and anisotropy reports, symbolic expansion, the oracle
//! comparison and the multi-sample structural-sum table.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for rejected input and
//! 3 for failed computations. `EFFCOND_THREADS` sets the worker count.

pub mod error;
pub mod manifest;
pub mod table1;
pub mod verify;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use effcond::conductivity::{anisotropy_key_values, fmt, Anisotropy};
use effcond::geometry::{generate_rsa_with, read_packing, write_packing, RsaOptions, SphereConfiguration};
use effcond::lattice_sums::coulombic_table;
use effcond::{ConductivityReport, Contrast, EisensteinEvaluator, StructuralSums};
use effcond_symbolic::{procedure_u, render, Format, Naming};

pub use error::{CliError, EXIT_COMPUTATION, EXIT_USAGE, EXIT_VALIDATION};
use manifest::{write_document, RunManifest, Sink};
use table1::{seed_prefix, Row};

/// Environment variable holding the worker thread count.
pub const THREADS_VAR: &str = "EFFCOND_THREADS";
/// Lattice truncation radius used by default.
pub const DEFAULT_RMAX: u32 = 250;
/// Lattice truncation radius selected by `--fast`.
pub const FAST_RMAX: u32 = 60;
/// Highest polynomial degree of the periodic kernels used by default.
pub const DEFAULT_DMAX: u32 = 8;

#[derive(Debug, Parser)]
#[command(
    name = "effcond",
    version,
    about = "Effective conductivity of periodic sphere suspensions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an RSA packing in the unit cell.
    Generate(GenerateArgs),
    /// Compute the Coulombic lattice sums L4, L6, L8 and L10.
    LatticeSums(LatticeArgs),
    /// Compute the structural and convolution sums of a packing.
    StructuralSums(SumsArgs),
    /// Compute the effective conductivity tensor of a packing.
    Conductivity(ConductivityArgs),
    /// Compute the second-order tensor, its deviator and kappa.
    Anisotropy(SumsArgs),
    /// Print the analytic approximation u(q).
    Expand(ExpandArgs),
    /// Compare the symbolic series with the numeric fixed-point solver.
    VerifySymbolic(VerifyArgs),
    /// Structural sums over several RSA samples and their means.
    #[command(name = "reproduce-table1")]
    ReproduceTable1(Table1Args),
}

#[derive(Debug, Args)]
struct Truncation {
    /// Lattice truncation radius.
    #[arg(long, default_value_t = DEFAULT_RMAX, conflicts_with = "fast")]
    rmax: u32,
    /// Use the reduced truncation radius.
    #[arg(long)]
    fast: bool,
}

impl Truncation {
    fn rmax(&self) -> u32 {
        if self.fast {
            FAST_RMAX
        } else {
            self.rmax
        }
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Number of spheres.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Volume fraction.
    #[arg(long, default_value_t = 0.3)]
    f: f64,
    /// Random seed.
    #[arg(long)]
    seed: u64,
    /// Output packing file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LatticeArgs {
    #[command(flatten)]
    truncation: Truncation,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SumsArgs {
    /// Packing file.
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    truncation: Truncation,
    /// Highest polynomial degree of the kernels: 2, 4, 6 or 8.
    #[arg(long, default_value_t = DEFAULT_DMAX)]
    dmax: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConductivityArgs {
    #[command(flatten)]
    sums: SumsArgs,
    /// Contrast parameter, 1 for perfectly conducting spheres.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    beta: f64,
}

#[derive(Debug, Args)]
struct ExpandArgs {
    /// Truncation order q, from 1 to 6.
    #[arg(long)]
    order: u32,
    /// Field axis j, from 1 to 3.
    #[arg(long, default_value_t = 1)]
    axis: usize,
    /// Output syntax: text or sexpr.
    #[arg(long, default_value = "text")]
    format: Format,
    /// Print each monomial separately instead of pairing coordinate differences.
    #[arg(long)]
    ungrouped: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Number of spheres, at most 10.
    #[arg(long)]
    n: usize,
    /// Sphere radius, at most 0.1 times the smallest center distance.
    #[arg(long)]
    r0: f64,
    /// Seed for the cluster centers.
    #[arg(long)]
    seed: u64,
    /// Field axis j, from 1 to 3.
    #[arg(long, default_value_t = 1)]
    axis: usize,
}

#[derive(Debug, Args)]
struct Table1Args {
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_values_t = 1u64..=10)]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0.3)]
    f: f64,
    #[command(flatten)]
    truncation: Truncation,
    #[arg(long, default_value_t = DEFAULT_DMAX)]
    dmax: u32,
    /// Directory receiving `table1.txt`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match configure_threads().and_then(|()| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("effcond: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Validation(format!("{THREADS_VAR}={value:?} is not a positive integer")))?;
    // A global pool may already exist when the library is driven twice in
    // one process; the first configuration then stays in effect.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate(a) => generate(&a),
        Command::LatticeSums(a) => lattice_sums(&a),
        Command::StructuralSums(a) => structural_sums(&a),
        Command::Conductivity(a) => conductivity(&a),
        Command::Anisotropy(a) => anisotropy(&a),
        Command::Expand(a) => expand(&a),
        Command::VerifySymbolic(a) => verify_symbolic(&a),
        Command::ReproduceTable1(a) => reproduce_table1(&a),
    }
}

fn axis_index(axis: usize) -> Result<usize, CliError> {
    if (1..=3).contains(&axis) {
        Ok(axis - 1)
    } else {
        Err(CliError::Validation(format!("axis {axis} outside 1..=3")))
    }
}

fn evaluator(rmax: u32, dmax: u32) -> Result<EisensteinEvaluator, CliError> {
    Ok(EisensteinEvaluator::new(coulombic_table(rmax)?, dmax)?)
}

fn sums_manifest(command: &str, a: &SumsArgs) -> RunManifest {
    RunManifest::new(command)
        .param("rmax", a.truncation.rmax())
        .param("dmax", a.dmax)
        .input(&a.input)
        .output(a.out.as_deref())
}

fn load(a: &SumsArgs) -> Result<(SphereConfiguration, EisensteinEvaluator), CliError> {
    let config = read_packing(&a.input)?;
    Ok((config, evaluator(a.truncation.rmax(), a.dmax)?))
}

fn generate(a: &GenerateArgs) -> Result<(), CliError> {
    let manifest = RunManifest::new("generate")
        .param("n", a.n)
        .param("f", a.f)
        .param("seed", a.seed)
        .output(a.out.as_deref());
    let packing = generate_rsa_with(a.n, a.f, a.seed, &RsaOptions::default())?;
    let config = &packing.configuration;
    let summary = vec![
        ("n".to_string(), config.len().to_string()),
        ("r0".to_string(), fmt(config.radius())),
        ("f".to_string(), fmt(config.concentration())),
        ("attempts".to_string(), packing.attempts.to_string()),
    ];
    match &a.out {
        Some(path) => {
            let mut comments = manifest.header();
            comments.push(manifest.footer());
            write_packing(config, path, &comments)?;
            let mut stdout = Sink::open(None)?;
            stdout.header(&manifest)?;
            for (k, v) in &summary {
                stdout.pair(k, v)?;
            }
            stdout.footer(&manifest)?;
        }
        None => {
            let mut comments = manifest.header();
            comments.extend(summary.iter().map(|(k, v)| format!("{k}={v}")));
            comments.push(manifest.footer());
            print!("{}", effcond::geometry::format_packing(config, &comments));
        }
    }
    Ok(())
}

fn lattice_sums(a: &LatticeArgs) -> Result<(), CliError> {
    let rmax = a.truncation.rmax();
    let manifest = RunManifest::new("lattice-sums")
        .param("rmax", rmax)
        .output(a.out.as_deref());
    let table = coulombic_table(rmax)?;
    let body = vec![
        ("L4".to_string(), fmt(table.l4)),
        ("L6".to_string(), fmt(table.l6)),
        ("L8".to_string(), fmt(table.l8)),
        ("L10".to_string(), fmt(table.l10)),
        ("rmax".to_string(), table.rmax.to_string()),
    ];
    Ok(write_document(&manifest, &body)?)
}

fn structural_sums(a: &SumsArgs) -> Result<(), CliError> {
    let manifest = sums_manifest("structural-sums", a);
    let (config, eval) = load(a)?;
    let sums = StructuralSums::compute(&config, &eval);
    let body: Vec<(String, String)> = sums
        .key_values()
        .into_iter()
        .map(|(k, v)| {
            if k == "n" {
                (k, config.len().to_string())
            } else {
                (k, fmt(v))
            }
        })
        .collect();
    Ok(write_document(&manifest, &body)?)
}

fn conductivity(a: &ConductivityArgs) -> Result<(), CliError> {
    let manifest = sums_manifest("conductivity", &a.sums).param("beta", a.beta);
    let contrast = Contrast::from_beta(a.beta)?;
    let (config, eval) = load(&a.sums)?;
    let sums = StructuralSums::compute(&config, &eval);
    let report = ConductivityReport::new(&sums, config.concentration(), contrast)?;
    let mut body = vec![("n".to_string(), config.len().to_string())];
    body.extend(report.key_values());
    Ok(write_document(&manifest, &body)?)
}

fn anisotropy(a: &SumsArgs) -> Result<(), CliError> {
    let manifest = sums_manifest("anisotropy", a);
    let (config, eval) = load(a)?;
    let result = Anisotropy::from_sums(&StructuralSums::compute(&config, &eval));
    let mut body = vec![("n".to_string(), config.len().to_string())];
    body.extend(anisotropy_key_values(&result));
    Ok(write_document(&manifest, &body)?)
}

fn expand(a: &ExpandArgs) -> Result<(), CliError> {
    let axis = axis_index(a.axis)?;
    let manifest = RunManifest::new("expand")
        .param("order", a.order)
        .param("axis", a.axis)
        .param("format", if a.format == Format::Text { "text" } else { "sexpr" })
        .param("grouped", !a.ungrouped);
    let out = procedure_u(a.order, axis)?;
    let naming = Naming {
        anchor: Some(out.anchor),
    };
    let (solution, constant) = if a.ungrouped {
        (out.solution.clone(), out.constant.clone())
    } else {
        (
            out.solution_form.to_grouped_expr(axis),
            out.constant_form.to_grouped_expr(axis),
        )
    };
    let body = vec![
        ("solution".to_string(), render(&solution, a.format, naming)),
        ("constant".to_string(), render(&constant, a.format, naming)),
    ];
    Ok(write_document(&manifest, &body)?)
}

fn verify_symbolic(a: &VerifyArgs) -> Result<(), CliError> {
    let axis = axis_index(a.axis)?;
    let manifest = RunManifest::new("verify-symbolic")
        .param("n", a.n)
        .param("r0", a.r0)
        .param("seed", a.seed)
        .param("axis", a.axis);
    let cluster = verify::validated_cluster(a.n, a.r0, a.seed)?;
    let body = verify::report(&cluster, axis)?;
    Ok(write_document(&manifest, &body)?)
}

fn reproduce_table1(a: &Table1Args) -> Result<(), CliError> {
    if a.seeds.is_empty() {
        return Err(CliError::Validation("at least one seed is required".into()));
    }
    let out_path = a.out_dir.as_ref().map(|d| d.join("table1.txt"));
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))?;
    }
    let seeds: Vec<String> = a.seeds.iter().map(u64::to_string).collect();
    let manifest = RunManifest::new("reproduce-table1")
        .param("seeds", seeds.join(","))
        .param("n", a.n)
        .param("f", a.f)
        .param("rmax", a.truncation.rmax())
        .param("dmax", a.dmax)
        .output(out_path.as_deref());
    let eval = evaluator(a.truncation.rmax(), a.dmax)?;
    let mut sink = Sink::open(out_path.as_deref().map(Path::new))?;
    sink.header(&manifest)?;
    let mut rows = Vec::with_capacity(a.seeds.len());
    for &seed in &a.seeds {
        let row = Row::for_seed(seed, a.n, a.f, &eval)?;
        for (k, v) in row.key_values(&seed_prefix(seed)) {
            sink.pair(&k, &v)?;
        }
        rows.push(row);
    }
    let mean = Row::mean(&rows).expect("seed list is not empty");
    for (k, v) in mean.key_values("mean") {
        sink.pair(&k, &v)?;
    }
    let e11: Vec<f64> = rows.iter().map(|r| r.e11).collect();
    sink.pair("min.e11", &fmt(e11.iter().copied().fold(f64::INFINITY, f64::min)))?;
    sink.pair("max.e11", &fmt(e11.iter().copied().fold(f64::NEG_INFINITY, f64::max)))?;
    sink.footer(&manifest)?;
    Ok(())
}
