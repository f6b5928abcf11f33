mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;

use tpm_core::basins;
use tpm_core::eigen2d;
use tpm_core::experiments::{self, MbRow, MbTable};
use tpm_core::frames::{self, Frame, FrameJson};
use tpm_core::power::{self, RunOptions};
use tpm_core::robustness;
use tpm_core::tensor::{SymTensor, SymTensorJson};

use crate::io::{emit, parse_range, parse_vector, read_json, to_json, write_atomic, CliError, CliResult};

const DEFAULTS_NOTE: &str = "The defaults --iters 100 and --tol 1e-10 are the iteration budget and \
stopping tolerance of the convergence-grid experiment (`tpm table1`); every tick and cross of \
that grid is defined with respect to them.";

#[derive(Parser)]
#[command(name = "tpm", version, about = "Tensor power method experiments on symmetric tensors")]
#[command(after_help = "Exit status: 0 on success, 1 on invalid input, 2 on numeric failure.\n\
TPM_THREADS caps the number of worker threads.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Built-in frames and frame files.
    #[command(subcommand)]
    Frames(FramesCommand),
    /// Run the power method from one starting vector.
    #[command(after_help = DEFAULTS_NOTE)]
    Run(RunArgs),
    /// Spectral radius of the power-map Jacobian at an eigenvector, with analytic bounds.
    Certify(CertifyArgs),
    /// All complex eigenpairs of a tensor on C^2.
    Eigen2d(Eigen2dArgs),
    /// Render basins of attraction on the unit disk as a PPM image.
    Basins(BasinsArgs),
    /// Convergence grid over regular simplex frames.
    #[command(after_help = DEFAULTS_NOTE)]
    Table1(Table1Args),
    /// Eigenpair tables of the Mercedes-Benz tensor.
    Mbtables(MbtablesArgs),
    /// Recover frame vectors from a noisy all-ones tensor.
    Perturb(PerturbArgs),
}

#[derive(Subcommand)]
enum FramesCommand {
    /// List the built-in frames.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Check a frame file for unit norms, equiangularity and tightness.
    Validate {
        file: PathBuf,
        #[arg(long, default_value_t = frames::DEFAULT_FRAME_TOL)]
        tol: f64,
    },
}

/// A tensor from a file or the all-ones tensor on a named frame.
#[derive(Args)]
struct TensorSource {
    /// Tensor JSON file {n, r, d, lambdas, V}.
    #[arg(long, conflicts_with_all = ["frame", "d"])]
    tensor: Option<PathBuf>,
    /// Built-in frame name (see `tpm frames list`).
    #[arg(long, requires = "d")]
    frame: Option<String>,
    /// Tensor order, with --frame.
    #[arg(long)]
    d: Option<usize>,
}

impl TensorSource {
    fn load(&self) -> CliResult<(SymTensor, Option<Frame>)> {
        match (&self.tensor, &self.frame, self.d) {
            (Some(path), _, _) => Ok((load_tensor(path)?, None)),
            (None, Some(name), Some(d)) => {
                let frame = frames::by_name(name)?;
                Ok((SymTensor::all_ones(frame.factors.clone(), d)?, Some(frame)))
            }
            _ => Err(CliError::Args("give --tensor FILE or --frame NAME --d D".into())),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: TensorSource,
    /// Starting vector, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    x0: String,
    /// Maximum iterations.
    #[arg(long, default_value_t = 100)]
    iters: usize,
    /// Stop once consecutive iterates agree up to sign within this distance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Write the trajectory as CSV (k, x components, displacement).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    source: TensorSource,
    /// Eigenvector, comma separated.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "vector_index")]
    vector: Option<String>,
    /// 1-based generator index, with --frame.
    #[arg(long)]
    vector_index: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

fn format_for(explicit: Option<Format>, out: Option<&Path>) -> Format {
    explicit.unwrap_or_else(|| match out.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        Some("csv") => Format::Csv,
        _ => Format::Table,
    })
}

#[derive(Args)]
struct Eigen2dArgs {
    #[command(flatten)]
    source: TensorSource,
    /// Output format; defaults to the --out extension, else table.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BasinsArgs {
    /// Tensor order.
    #[arg(long)]
    d: usize,
    /// Image side length in pixels.
    #[arg(long, default_value_t = 512)]
    res: usize,
    /// PPM output path; a JSON sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Planar frame.
    #[arg(long, default_value = "mb")]
    frame: String,
    /// Iterations per pixel.
    #[arg(long, default_value_t = basins::DEFAULT_RENDER_ITERS)]
    iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args)]
struct Table1Args {
    /// Random starts per cell.
    #[arg(long, default_value_t = experiments::TABLE1_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = experiments::TABLE1_SEED)]
    seed: u64,
    /// Maximum iterations per start.
    #[arg(long, default_value_t = 100)]
    iters: usize,
    /// Convergence tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Dimensions, e.g. 2..10.
    #[arg(long, default_value = "2..10")]
    n: String,
    /// Orders, e.g. 2..10.
    #[arg(long, default_value = "2..10")]
    d: String,
    /// CSV output (n, d, trials, successes, verdict); the grid is printed either way.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MbtablesArgs {
    /// Orders, e.g. 3..10.
    #[arg(long, default_value = "3..10")]
    d: String,
    /// Output format; defaults to the --out extension, else table.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(long, default_value = "mb")]
    frame: String,
    #[arg(long)]
    d: usize,
    /// Frobenius norm of the added symmetric noise.
    #[arg(long)]
    noise: f64,
    /// Random starting vectors.
    #[arg(long, default_value_t = 100)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_tensor(path: &Path) -> CliResult<SymTensor> {
    let json: SymTensorJson = read_json(path)?;
    Ok(SymTensor::try_from(json)?)
}

fn frames_list(json: bool) -> CliResult<()> {
    let catalog = frames::catalog();
    if json {
        let list: Vec<FrameJson> = catalog.iter().map(FrameJson::from).collect();
        return emit(None, &to_json(&list));
    }
    println!("{:<12} {:>3} {:>3} {:>12}  etf", "name", "n", "r", "alpha");
    for f in &catalog {
        println!("{:<12} {:>3} {:>3} {:>12.9}  {}", f.name, f.dim(), f.len(), f.alpha, if f.is_etf { "yes" } else { "no" });
    }
    Ok(())
}

#[derive(Serialize)]
struct FrameReport {
    name: Option<String>,
    n: usize,
    r: usize,
    alpha: f64,
    welch_bound: Option<f64>,
    is_etf: bool,
    coherence_spread: f64,
    etf_residual: f64,
    kernel_dimension: usize,
}

fn frames_validate(file: &Path, tol: f64) -> CliResult<()> {
    let json: FrameJson = read_json(file)?;
    let v = json.matrix()?;
    let frame = frames::validate_frame(&v, tol)?;
    let report = FrameReport {
        name: json.name,
        n: frame.dim(),
        r: frame.len(),
        alpha: frame.alpha,
        welch_bound: frames::welch_bound(frame.dim(), frame.len()).ok(),
        is_etf: frame.is_etf,
        coherence_spread: frames::coherence_spread(&v),
        etf_residual: frames::etf_residual(&v),
        kernel_dimension: frames::kernel_basis(&v, frames::DEFAULT_KERNEL_TOL).len(),
    };
    emit(None, &to_json(&report))
}

fn run(args: &RunArgs) -> CliResult<()> {
    let (t, frame) = args.source.load()?;
    let x0 = DVector::from_vec(parse_vector(&args.x0).map_err(CliError::Args)?);
    let opts = RunOptions { max_iter: args.iters, tol: args.tol, record: args.trace.is_some() };
    let reference = frame.as_ref().map(|f| &f.factors).unwrap_or(t.factors());
    let mut result = power::run(&t, &x0, opts, Some(reference))?;
    if let Some(path) = &args.trace {
        let trajectory = result.trajectory.take().unwrap_or_default();
        let mut csv = String::from("k");
        for i in 0..t.dim() {
            csv.push_str(&format!(",x{}", i + 1));
        }
        csv.push_str(",displacement\n");
        for p in &trajectory {
            csv.push_str(&p.k.to_string());
            for x in &p.x {
                csv.push_str(&format!(",{x:e}"));
            }
            match p.displacement {
                Some(d) => csv.push_str(&format!(",{d:e}\n")),
                None => csv.push_str(",\n"),
            }
        }
        write_atomic(path, csv.as_bytes())?;
    }
    emit(args.out.as_deref(), &to_json(&result))
}

fn certify(args: &CertifyArgs) -> CliResult<()> {
    let (t, frame) = args.source.load()?;
    let v = match (&args.vector, args.vector_index) {
        (Some(s), _) => DVector::from_vec(parse_vector(s).map_err(CliError::Args)?),
        (None, Some(k)) => {
            if k == 0 || k > t.rank() {
                return Err(CliError::Args(format!("--vector-index must lie in 1..={}", t.rank())));
            }
            match &frame {
                Some(f) => f.column(k - 1),
                None => t.factors().column(k - 1).into_owned(),
            }
        }
        (None, None) => return Err(CliError::Args("give --vector or --vector-index".into())),
    };
    let cert = robustness::certify(&t, &v, frame.as_ref())?;
    emit(args.out.as_deref(), &to_json(&cert))
}

fn as_table(d: usize, e: &eigen2d::Eigen2d) -> MbTable {
    MbTable { d, degenerate: false, rows: e.pairs.iter().map(MbRow::from).collect(), total_multiplicity: Some(e.total) }
}

fn eigen2d_cmd(args: &Eigen2dArgs) -> CliResult<()> {
    let (t, _) = args.source.load()?;
    let e = eigen2d::all_eigenpairs_2d(&t)?;
    let text = match format_for(args.format, args.out.as_deref()) {
        Format::Json => to_json(&e),
        Format::Csv => experiments::mb_tables_csv(&[as_table(t.order(), &e)]),
        Format::Table => experiments::render_mb_tables(&[as_table(t.order(), &e)]),
    };
    emit(args.out.as_deref(), &text)
}

fn basins_cmd(args: &BasinsArgs) -> CliResult<()> {
    let frame = frames::by_name(&args.frame)?;
    let t = SymTensor::all_ones(frame.factors.clone(), args.d)?;
    let grid = basins::render_basins(&t, &frame, args.res, args.iters, args.tol)?;
    write_atomic(&args.out, &grid.to_ppm())?;
    let sidecar = args.out.with_extension("json");
    write_atomic(&sidecar, to_json(&grid.sidecar(frame.len())).as_bytes())?;
    let counts = grid.counts(frame.len());
    eprintln!(
        "wrote {} and {} (frame labels {:?}, other {}, none {})",
        args.out.display(),
        sidecar.display(),
        counts.frame,
        counts.other,
        counts.none
    );
    Ok(())
}

fn table1(args: &Table1Args) -> CliResult<()> {
    let (n_lo, n_hi) = parse_range(&args.n).map_err(CliError::Args)?;
    let (d_lo, d_hi) = parse_range(&args.d).map_err(CliError::Args)?;
    let grid = experiments::convergence_table(n_lo..=n_hi, d_lo..=d_hi, args.trials, args.seed, args.iters, args.tol)?;
    match &args.out {
        Some(path) => {
            write_atomic(path, grid.to_csv().as_bytes())?;
            print!("{}", grid.render());
        }
        None => print!("{}{}", grid.render(), grid.to_csv()),
    }
    Ok(())
}

fn mbtables(args: &MbtablesArgs) -> CliResult<()> {
    let (lo, hi) = parse_range(&args.d).map_err(CliError::Args)?;
    let tables = experiments::mb_tables(lo..=hi)?;
    let text = match format_for(args.format, args.out.as_deref()) {
        Format::Json => to_json(&tables),
        Format::Csv => experiments::mb_tables_csv(&tables),
        Format::Table => experiments::render_mb_tables(&tables),
    };
    emit(args.out.as_deref(), &text)
}

fn perturb(args: &PerturbArgs) -> CliResult<()> {
    let frame = frames::by_name(&args.frame)?;
    let report = experiments::perturbation_study(&frame, args.d, args.noise, args.starts, args.seed)?;
    emit(args.out.as_deref(), &to_json(&report))
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("TPM_THREADS") else { return Ok(()) };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Args(format!("TPM_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Args(format!("cannot size thread pool: {e}")))
}

fn dispatch(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Frames(FramesCommand::List { json }) => frames_list(json),
        Command::Frames(FramesCommand::Validate { file, tol }) => frames_validate(&file, tol),
        Command::Run(a) => run(&a),
        Command::Certify(a) => certify(&a),
        Command::Eigen2d(a) => eigen2d_cmd(&a),
        Command::Basins(a) => basins_cmd(&a),
        Command::Table1(a) => table1(&a),
        Command::Mbtables(a) => mbtables(&a),
        Command::Perturb(a) => perturb(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
