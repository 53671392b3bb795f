use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::debug;
use posgraph::bench_circuits::Family;
use posgraph::circuit::to_qasm;
use posgraph_cli::bench::{run_manifest, Manifest};
use posgraph_cli::check::{diff, replay};
use posgraph_cli::compile::{load_arch, load_durations, run, write_atomic};
use posgraph_cli::{Artifact, CircuitInput, RunError, RunOptions, Router};

/// Qubit routing on position graphs.
///
/// Log verbosity follows the POSGRAPH_LOG environment variable (error, warn, info, debug).
#[derive(Parser)]
#[command(name = "posgraph", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile one circuit and write `artifact.json` and `report.json`.
    Compile(CompileArgs),
    /// Replay an artifact against its circuit and architecture, or diff two artifacts.
    Verify(VerifyArgs),
    /// Run a benchmark manifest.
    Bench(BenchArgs),
    /// Write a benchmark circuit as OpenQASM 2.
    Gen(GenArgs),
}

#[derive(Args)]
struct CompileArgs {
    /// OpenQASM 2 input.
    #[arg(long)]
    circuit: PathBuf,
    /// `grid:RxC:k`, `coupling:@file` or `file:@file`.
    #[arg(long)]
    arch: String,
    #[arg(long, value_enum)]
    router: Router,
    /// Layout passes for the swap routers.
    #[arg(long, default_value_t = 2)]
    passes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Durations JSON in microseconds, as `@file`.
    #[arg(long)]
    durations: Option<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Artifact to replay; needs `--circuit` and `--arch`.
    #[arg(long, conflicts_with = "diff", requires_all = ["circuit", "arch"])]
    replay: Option<PathBuf>,
    /// Two artifacts whose placements and op sequences must match.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    diff: Option<Vec<PathBuf>>,
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long)]
    arch: Option<String>,
    /// Also check op durations against this file, as `@file`.
    #[arg(long)]
    durations: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Manifest JSON; relative paths inside it resolve against its directory.
    manifest: PathBuf,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    qudits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_artifact(path: &Path) -> Result<Artifact, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

fn compile(args: CompileArgs) -> Result<(), RunError> {
    let circuit = CircuitInput::from_file(&args.circuit)?;
    let (_, graph) = load_arch(&args.arch)?;
    let durations = args.durations.as_deref().map(load_durations).transpose()?;
    let options = RunOptions {
        router: args.router,
        layout_passes: args.passes,
        seed: args.seed,
        durations: durations.unwrap_or_default(),
    };
    let (artifact, report) = run(&circuit, &args.arch, &graph, &options)?;
    debug!("{} routed in {:.3} s", circuit.name, report.wall_clock_s);
    let io = |e: std::io::Error| RunError::Config(format!("{}: {e}", args.out.display()));
    std::fs::create_dir_all(&args.out).map_err(io)?;
    write_atomic(&args.out.join("artifact.json"), &artifact.to_json()).map_err(io)?;
    let report = serde_json::to_string_pretty(&report).expect("reports serialize") + "\n";
    write_atomic(&args.out.join("report.json"), &report).map_err(io)?;
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<ExitCode, RunError> {
    let outcome = if let Some(path) = &args.replay {
        let artifact = read_artifact(path)?;
        let circuit = CircuitInput::from_file(args.circuit.as_deref().expect("required by clap"))?;
        let (_, graph) = load_arch(args.arch.as_deref().expect("required by clap"))?;
        let durations = args.durations.as_deref().map(load_durations).transpose()?;
        replay(&graph, &circuit.dag, &artifact, durations.as_ref())
    } else if let Some(paths) = &args.diff {
        diff(&read_artifact(&paths[0])?, &read_artifact(&paths[1])?)
    } else {
        return Err(RunError::Config("verify needs --replay or --diff".into()));
    };
    match outcome {
        Ok(()) => Ok(ExitCode::SUCCESS),
        Err(v) => {
            eprintln!("violation at {v}");
            Ok(ExitCode::from(1))
        }
    }
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.manifest)?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let summary = run_manifest(&manifest, base, &args.out)?;
    let failed = summary.rows.iter().filter(|r| r.failures > 0).count();
    eprintln!(
        "{} rows, {failed} with failures, {} fits; tables in {}",
        summary.rows.len(),
        summary.fits.len(),
        args.out.display()
    );
    for fit in &summary.fits {
        eprintln!("{}: t = {:.3e} x^{:.3} over {} sizes", fit.router, fit.a, fit.b, fit.sizes);
    }
    Ok(())
}

fn gen(args: GenArgs) -> std::io::Result<()> {
    let text = to_qasm(&args.family.generate(args.qudits, args.seed));
    match args.out {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("POSGRAPH_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compile(args) => compile(args).map(|()| ExitCode::SUCCESS),
        Command::Verify(args) => verify(args),
        Command::Bench(args) => bench(args)
            .map(|()| ExitCode::SUCCESS)
            .map_err(|e| RunError::Config(format!("{e:#}"))),
        Command::Gen(args) => gen(args)
            .map(|()| ExitCode::SUCCESS)
            .map_err(|e| RunError::Config(e.to_string())),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
