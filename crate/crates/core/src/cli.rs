use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use regacd::bench::{build_scene, reference_rate, run_bench_with, BenchParams};
use regacd::mesh::{load_mesh, LoadOptions, MeshFormat, TriangleMesh};
use regacd::metrics::{error_samples_for, evaluate_regions, evaluation_regions, ErrorSampleParams, DEFAULT_SAMPLES};
use regacd::pipeline::{interactive_decomposition, read_decomposition, write_decomposition, PipelineParams};
use regacd::{Error, Result};

/// Region-aware approximate convex decomposition.
#[derive(Debug, Parser)]
#[command(name = "regacd", version)]
pub struct Cli {
    /// Worker threads for decomposition and evaluation (default: all cores).
    #[arg(long, global = true, env = "REGACD_THREADS")]
    pub threads: Option<usize>,
    /// Print errors to stderr as JSON objects `{"error", "detail"}`.
    #[arg(long, global = true)]
    pub json_errors: bool,
    /// More log output; repeat for debug logs.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose a mesh and write part OBJ files plus manifest.json.
    Decompose(DecomposeArgs),
    /// Per-region symmetric Hausdorff errors of a decomposition, as JSON.
    Evaluate(EvaluateArgs),
    /// Collision-query throughput of a decomposition, as JSON.
    Bench(BenchArgs),
    /// Run the HTTP job service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    /// OBJ or STL file.
    pub mesh: PathBuf,
    /// Input format; guessed from the extension by default.
    #[arg(long, default_value = "auto")]
    pub format: MeshFormat,
    /// Accept a mesh that is not watertight.
    #[arg(long)]
    pub force: bool,
}

impl MeshArgs {
    fn load(&self) -> Result<TriangleMesh> {
        load_mesh(&self.mesh, self.format, LoadOptions { force: self.force })
    }
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    /// Regions file; no regions when omitted.
    #[arg(long)]
    pub regions: Option<PathBuf>,
    /// Tolerance outside every region (overrides the regions file).
    #[arg(long)]
    pub remainder_eps: Option<f64>,
    /// Merge volume tolerance (overrides the regions file).
    #[arg(long)]
    pub merge_tau: Option<f64>,
    /// Seed (overrides the regions file; 0 when neither sets it).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    /// Decomposition directory or manifest.json.
    #[arg(long)]
    pub parts: PathBuf,
    /// Regions file; the decomposition's own regions when omitted.
    #[arg(long)]
    pub regions: Option<PathBuf>,
    /// Samples per region and direction.
    #[arg(short = 'n', long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write coloured error samples (`.json` or `.ply`).
    #[arg(long)]
    pub samples_out: Option<PathBuf>,
    /// Sample the approximation instead of the original for `--samples-out`.
    #[arg(long)]
    pub on_approx: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Decomposition directory or manifest.json.
    #[arg(long)]
    pub parts: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Parallel narrow phase; timings are not comparable with the default.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "REGACD_HOST", default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = "REGACD_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "REGACD_DATA_DIR", default_value = "regacd-data")]
    pub data_dir: PathBuf,
    /// Decomposition jobs allowed to run at once.
    #[arg(long, env = "REGACD_MAX_JOBS", default_value_t = 2)]
    pub max_jobs: usize,
    /// Allowed CORS origin (default: any).
    #[arg(long, env = "REGACD_CORS_ORIGIN")]
    pub cors_origin: Option<String>,
}

fn read_params(path: Option<&Path>) -> Result<PipelineParams> {
    match path {
        None => Ok(PipelineParams::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            PipelineParams::from_json(&text)
        }
    }
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

fn decompose(args: &DecomposeArgs, threads: Option<usize>) -> Result<()> {
    let mesh = args.mesh.load()?;
    let mut params = read_params(args.regions.as_deref())?;
    if let Some(eps) = args.remainder_eps {
        params.remainder_tolerance = eps;
    }
    if let Some(tau) = args.merge_tau {
        params.merge_tolerance = tau;
    }
    if let Some(seed) = args.seed {
        params.seed = seed;
    }
    params.threads = threads;
    let decomp = interactive_decomposition(&mesh, &params)?;
    for w in &decomp.warnings {
        log::warn!("{w}");
    }
    let manifest = write_decomposition(&decomp, &args.output)?;
    print_json(&json!({
        "manifest": manifest,
        "parts": decomp.parts.len(),
        "exact_meshes": decomp.exact_meshes.len(),
        "fingerprint": decomp.fingerprint(),
        "warnings": decomp.warnings,
    }));
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    if args.samples == 0 {
        return Err(Error::InvalidParams("-n must be at least 1".into()));
    }
    let mesh = args.mesh.load()?;
    let decomp = read_decomposition(&args.parts)?;
    let regions = match &args.regions {
        Some(p) => read_params(Some(p))?.regions,
        None => evaluation_regions(&mesh, &decomp)?,
    };
    let report = evaluate_regions(&mesh, &decomp, &regions, args.samples, args.seed)?;
    if let Some(out) = &args.samples_out {
        let params = ErrorSampleParams {
            n: args.samples,
            filter_boxes: regions.iter().map(|r| r.aabb()).collect::<Result<_>>()?,
            on_approx: args.on_approx,
            seed: args.seed,
            ..Default::default()
        };
        let set = error_samples_for(&mesh, &decomp, &params)?;
        let text = if out.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply")) { set.to_ply() } else { set.to_json() };
        std::fs::write(out, text).map_err(|e| Error::io(out, e))?;
    }
    print_json(&report);
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<()> {
    let decomp = read_decomposition(&args.parts)?;
    let scene = build_scene(&decomp, args.seed)?;
    let params = BenchParams { parallel: args.parallel, ..Default::default() };
    let report = run_bench_with(&scene, args.steps, args.seed, &params, reference_rate())?;
    eprintln!("{}", report.summary());
    print_json(&report);
    Ok(())
}

#[cfg(feature = "service")]
fn serve(args: &ServeArgs) -> Result<()> {
    use regacd::service::{serve, ServiceConfig};
    let config = ServiceConfig {
        host: args.host.clone(),
        port: args.port,
        data_dir: args.data_dir.clone(),
        max_jobs: args.max_jobs,
        cors_origin: args.cors_origin.clone(),
        ..Default::default()
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io(&args.data_dir, e))?;
    rt.block_on(serve(config))
}

#[cfg(not(feature = "service"))]
fn serve(_: &ServeArgs) -> Result<()> {
    Err(Error::InvalidParams("built without the `service` feature".into()))
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let result = (|| {
        if let Some(n) = cli.threads {
            if n == 0 {
                return Err(Error::InvalidParams("--threads must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::InvalidParams(e.to_string()))?;
        }
        match &cli.command {
            Command::Decompose(a) => decompose(a, cli.threads),
            Command::Evaluate(a) => evaluate(a),
            Command::Bench(a) => bench(a),
            Command::Serve(a) => serve(a),
        }
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            if cli.json_errors {
                eprintln!("{}", json!({ "error": e.kind(), "detail": e.to_string() }));
            } else {
                eprintln!("error: {e}");
            }
            if e.is_validation() || matches!(e, Error::NoSamplesInRegion(_)) {
                2
            } else {
                1
            }
        }
    }
}
