//! `statmatch` command-line tool.
//!
//! Exit status: 0 success, 1 fatal error, 2 some items skipped, 64 usage error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use statmatch::histmatch::{compute_cdf, IMAGE_BINS};
use statmatch::pipeline::{
    build_plan, execute_plan, plan_from_pairs, read_manifest, summary_line, write_failures,
    DatasetRef, ExecuteOptions, Method, GENERATOR_NAME,
};
use statmatch::stats::{compute_stats, DEFAULT_EPSILON};
use statmatch::{fdm_tensor, FeatureTensor, Image};

const EXIT_OK: u8 = 0;
const EXIT_FATAL: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "statmatch", version, about = "Match image and feature statistics between domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Adapt source images towards target images and write PNGs.
    Transform(TransformArgs),
    /// Print mean, covariance, eigenvalues and histograms of an image as JSON.
    Stats {
        image: PathBuf,
    },
    /// Feature distribution matching on FMT1 tensors.
    FdmTensor(TensorArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Fdm,
    Hm,
    FdmOrHm,
    FdmThenHm,
}

#[derive(Args, Debug)]
struct TransformArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Source image or directory.
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    source: Option<PathBuf>,
    /// Target image or directory.
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    target: Option<PathBuf>,
    /// Fixed `source_path,target_path` pairs instead of random pairing.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    clamp: bool,
    /// Worker threads; defaults to the number of logical CPUs.
    #[arg(long)]
    jobs: Option<usize>,
    /// Probability of choosing FDM for `fdm-or-hm`.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Histogram bins; 8-bit images always use 256.
    #[arg(long, default_value_t = IMAGE_BINS)]
    bins: usize,
    /// Write the pairing plan to this file.
    #[arg(long)]
    dump_plan: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TensorArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::from(EXIT_OK);
        }
        Err(e) => return usage(first_line(&e.to_string())),
    };
    let status = match cli.command {
        Command::Transform(args) => cmd_transform(args),
        Command::Stats { image } => cmd_stats(image),
        Command::FdmTensor(args) => cmd_fdm_tensor(args),
    };
    ExitCode::from(status)
}

fn first_line(msg: &str) -> &str {
    msg.lines().find(|l| !l.trim().is_empty()).unwrap_or(msg)
}

fn usage(msg: &str) -> ExitCode {
    eprintln!("usage error: {}", msg.trim_start_matches("error: "));
    ExitCode::from(EXIT_USAGE)
}

fn fatal(msg: impl std::fmt::Display) -> u8 {
    eprintln!("error: {msg}");
    EXIT_FATAL
}

fn check_epsilon(epsilon: f64) -> Result<(), String> {
    if epsilon.is_finite() && epsilon >= 0.0 {
        Ok(())
    } else {
        Err(format!("--epsilon must be a finite value >= 0, got {epsilon}"))
    }
}

fn validate_transform(args: &TransformArgs) -> Result<(Method, usize), String> {
    check_epsilon(args.epsilon)?;
    if !(0.0..=1.0).contains(&args.p) {
        return Err(format!("--p must lie in [0, 1], got {}", args.p));
    }
    if args.bins != IMAGE_BINS {
        return Err(format!("--bins must be {IMAGE_BINS} for 8-bit images, got {}", args.bins));
    }
    let jobs = match args.jobs {
        Some(0) => return Err("--jobs must be positive".into()),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let method = match args.method {
        MethodArg::Fdm => Method::Fdm,
        MethodArg::Hm => Method::Hm,
        MethodArg::FdmOrHm => Method::FdmOrHm(args.p),
        MethodArg::FdmThenHm => Method::FdmThenHm,
    };
    Ok((method, jobs))
}

fn cmd_transform(args: TransformArgs) -> u8 {
    let (method, jobs) = match validate_transform(&args) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("usage error: {msg}");
            return EXIT_USAGE;
        }
    };

    let plan = match (&args.manifest, &args.source, &args.target) {
        (Some(manifest), _, _) => {
            read_manifest(manifest).and_then(|pairs| plan_from_pairs(pairs, method, args.seed))
        }
        (None, Some(source), Some(target)) => DatasetRef::discover(source).and_then(|s| {
            DatasetRef::discover(target).and_then(|t| build_plan(&s, &t, method, args.seed))
        }),
        _ => unreachable!("clap enforces --source/--target or --manifest"),
    };
    let plan = match plan {
        Ok(plan) => plan,
        Err(e) => return fatal(e),
    };

    println!(
        "seed={} generator={} method={} p={}",
        plan.seed,
        GENERATOR_NAME,
        method,
        method.fdm_probability()
    );
    if let Some(path) = &args.dump_plan {
        if let Err(e) = plan.write_dump(path) {
            return fatal(e);
        }
    }

    let options = ExecuteOptions {
        epsilon: args.epsilon,
        clamp: args.clamp,
        jobs,
    };
    let report = match execute_plan(&plan, options, &args.out) {
        Ok(report) => report,
        Err(e) => return fatal(e),
    };
    println!("{}", summary_line(&report));
    if report.failure_count() > 0 {
        let _ = write_failures(&report, std::io::stderr().lock());
        return EXIT_PARTIAL;
    }
    EXIT_OK
}

fn cmd_stats(path: PathBuf) -> u8 {
    let image = match Image::load(&path) {
        Ok(img) => img,
        Err(e) => return fatal(e),
    };
    let stats = match image
        .to_feature_matrix()
        .and_then(|f| compute_stats(&f, DEFAULT_EPSILON))
    {
        Ok(s) => s,
        Err(e) => return fatal(e),
    };
    let histograms = match (0..image.channels())
        .map(|c| compute_cdf(image.channel_plane(c), IMAGE_BINS).map(|h| h.histogram().to_vec()))
        .collect::<Result<Vec<_>, _>>()
    {
        Ok(h) => h,
        Err(e) => return fatal(e),
    };
    let out = json!({
        "path": path.display().to_string(),
        "height": image.height(),
        "width": image.width(),
        "channels": image.channels(),
        "pixel_count": image.pixel_count(),
        "mean": stats.mean,
        "covariance": stats.covariance.to_rows(),
        "eigenvalues": stats.eigen.raw_eigenvalues,
        "eigenvectors": stats.eigen.eigenvectors.to_rows(),
        "histograms": histograms,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("stats serialize"));
    EXIT_OK
}

fn cmd_fdm_tensor(args: TensorArgs) -> u8 {
    if let Err(msg) = check_epsilon(args.epsilon) {
        eprintln!("usage error: {msg}");
        return EXIT_USAGE;
    }
    let start = Instant::now();
    let load = |p: &PathBuf| {
        FeatureTensor::read_fmt1(p).map_err(|e| format!("{}: {e}", p.display()))
    };
    let result = load(&args.source)
        .and_then(|s| Ok((s, load(&args.target)?)))
        .and_then(|(s, t)| fdm_tensor(&s, &t, args.epsilon).map_err(|e| e.to_string()))
        .and_then(|out| {
            out.write_fmt1(&args.out)
                .map(|()| out)
                .map_err(|e| e.to_string())
        });
    match result {
        Ok(out) => {
            println!(
                "shape={:?} epsilon={} wall_time={:.3}s",
                out.shape(),
                args.epsilon,
                start.elapsed().as_secs_f64()
            );
            EXIT_OK
        }
        Err(msg) => fatal(msg),
    }
}
