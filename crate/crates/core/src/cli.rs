//! Command-line front end: `synth`, `run`, `certify`, `bench`.
//!
//! Exit codes: 0 success, 1 numerical failure (certification failed or the
//! iteration collapsed), 2 usage or validation errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{default_sizes, run_scaling_benchmark, BenchSettings};
use crate::conv::{KernelNormalization, KernelParams};
use crate::engine::{run, Projection, RunInputs, SfsegConfig};
use crate::error::{Error, Result};
use crate::metrics::{jaccard, write_trace_csv, BinaryMask};
use crate::oracle::{build_engine_operator, certify, reference_eigenvector, CertifyOptions};
use crate::synth::{generate, SynthSpec};
use crate::volume::{load_volume, save_volume, FeatureSet, FeatureVolume, Role, VolumeShape};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "sfseg",
    version,
    about = "Spectral filtering segmentation of space-time volumes"
)]
struct Cli {
    /// Worker threads (default: hardware parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic instance from a JSON spec.
    Synth(SynthArgs),
    /// Run the convolutional power iteration.
    Run(RunArgs),
    /// Check the engine against the explicit-matrix oracle.
    Certify(CertifyArgs),
    /// Time matrix power iteration against the engine.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the spec.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_triple<T: std::str::FromStr>(s: &str) -> std::result::Result<[T; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!(
            "expected three comma-separated values t,y,x, got {s:?}"
        ));
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(p.parse::<T>().map_err(|_| format!("cannot parse {p:?}"))?);
    }
    out.try_into().map_err(|_| unreachable!())
}

fn parse_radii(s: &str) -> std::result::Result<[usize; 3], String> {
    parse_triple(s)
}

fn parse_sigmas(s: &str) -> std::result::Result<[f64; 3], String> {
    parse_triple(s)
}

fn parse_shape(s: &str) -> std::result::Result<VolumeShape, String> {
    let dims: Vec<&str> = s.split('x').collect();
    if dims.len() != 3 {
        return Err(format!("expected FRAMESxHEIGHTxWIDTH, got {s:?}"));
    }
    let d: Vec<usize> = dims
        .iter()
        .map(|p| p.parse().map_err(|_| format!("bad dimension {p:?}")))
        .collect::<std::result::Result<_, _>>()?;
    VolumeShape::new(d[0], d[1], d[2]).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
struct FeatureArgs {
    /// Unary map (SFSV).
    #[arg(long = "s")]
    unary: PathBuf,
    /// Pairwise channel (SFSV); repeat for several channels.
    #[arg(long = "f", required = true, num_args = 1..)]
    pairwise: Vec<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    #[arg(long, value_parser = parse_radii, default_value = "1,3,3")]
    kernel_radii: [usize; 3],
    #[arg(long, value_parser = parse_sigmas, default_value = "0.5,1.5,1.5")]
    kernel_sigmas: [f64; 3],
    /// Keep pairwise channels as given even when affinities go negative.
    #[arg(long)]
    allow_negative_affinity: bool,
}

impl FeatureArgs {
    fn config(&self) -> SfsegConfig {
        SfsegConfig {
            alpha: self.alpha,
            p: self.p,
            kernel: KernelParams {
                sigmas: self.kernel_sigmas,
                radii: self.kernel_radii,
            },
            temporal_window: self.kernel_radii[0],
            allow_negative_affinity: self.allow_negative_affinity,
            ..SfsegConfig::default()
        }
    }

    fn load(&self) -> Result<FeatureSet> {
        let unary = load_volume(&self.unary)?;
        let pairwise = self
            .pairwise
            .iter()
            .map(load_volume)
            .collect::<Result<Vec<_>>>()?;
        let set = FeatureSet::new(unary, pairwise)?;
        if self.allow_negative_affinity || set.pairwise_in_unit_range() {
            return Ok(set);
        }
        eprintln!("note: rescaling pairwise channels into [0, 1]");
        set.with_unit_pairwise()
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    features: FeatureArgs,
    /// Initial solution (defaults to the unary map).
    #[arg(long)]
    x0: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    iters: usize,
    #[arg(long, default_value_t = 3)]
    binarize_start: usize,
    #[arg(long)]
    temporal_window: Option<usize>,
    /// Sigmoid centre as a fraction of the current max.
    #[arg(long, default_value_t = 0.5)]
    threshold_frac: f64,
    #[arg(long, value_enum, default_value_t = ProjectionArg::Relative)]
    projection: ProjectionArg,
    #[arg(long, default_value_t = 0.5)]
    final_threshold: f64,
    #[arg(long)]
    out: PathBuf,
    /// Write the per-iteration `iter,angle_deg,iou` table here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Ground-truth mask (SFSV, 0/1).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Reference eigenvector (SFSV) for angle tracking.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProjectionArg {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OracleNormalization {
    UnitSum,
    Peak,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[command(flatten)]
    features: FeatureArgs,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 1.0)]
    max_angle: f64,
    #[arg(long, default_value_t = 500)]
    engine_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Kernel scaling on the oracle side; `peak` is a deliberate mismatch.
    #[arg(long, value_enum, default_value_t = OracleNormalization::UnitSum)]
    oracle_normalization: OracleNormalization,
    /// Save the oracle's dominant eigenvector (SFSV) for `run --reference`.
    #[arg(long)]
    reference_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma-separated FRAMESxHEIGHTxWIDTH sizes.
    #[arg(long, value_delimiter = ',', value_parser = parse_shape)]
    sizes: Vec<VolumeShape>,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    /// Only time the convolutional engine.
    #[arg(long)]
    conv_only: bool,
    #[arg(long)]
    out: PathBuf,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_synth(args: &SynthArgs) -> Result<i32> {
    let text = fs::read_to_string(&args.spec).map_err(|e| Error::io(&args.spec, e))?;
    let mut spec: SynthSpec = serde_json::from_str(&text)
        .map_err(|e| Error::Spec(format!("{}: {e}", args.spec.display())))?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let inst = generate(&spec)?;
    create_dir(&args.out)?;
    save_volume(inst.features.unary(), args.out.join("S.sfsv"))?;
    for (c, f) in inst.features.pairwise().iter().enumerate() {
        save_volume(f, args.out.join(format!("F_{}.sfsv", c + 1)))?;
    }
    save_volume(&inst.ground_truth.to_volume(), args.out.join("gt.sfsv"))?;
    let sidecar = args.out.join("spec.json");
    let json = serde_json::to_string_pretty(&spec).expect("spec serializes");
    fs::write(&sidecar, json + "\n").map_err(|e| Error::io(&sidecar, e))?;
    println!("wrote {} instance to {}", spec.shape, args.out.display());
    Ok(EXIT_OK)
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    let features = args.features.load()?;
    let mut cfg = args.features.config();
    cfg.iterations = args.iters;
    cfg.binarize_start = args.binarize_start;
    cfg.threshold_frac = args.threshold_frac;
    cfg.final_threshold = args.final_threshold;
    cfg.projection = match args.projection {
        ProjectionArg::Relative => Projection::Relative,
        ProjectionArg::Absolute => Projection::Absolute,
    };
    if let Some(w) = args.temporal_window {
        cfg.temporal_window = w;
    }
    let x0 = args.x0.as_ref().map(load_volume).transpose()?;
    let reference = args.reference.as_ref().map(load_volume).transpose()?;
    let gt = args
        .gt
        .as_ref()
        .map(|p| load_volume(p).map(|v| BinaryMask::from_volume(&v)))
        .transpose()?;
    let out = run(
        &features,
        &cfg,
        RunInputs {
            x0: x0.as_ref(),
            reference: reference.as_ref(),
            ground_truth: gt.as_ref(),
            transform: None,
        },
    )?;
    create_dir(&args.out)?;
    save_volume(&out.soft, args.out.join("soft.sfsv"))?;
    save_volume(&out.mask.to_volume(), args.out.join("mask.sfsv"))?;
    if let Some(path) = &args.trace {
        write_trace_csv(&out.trace.rows(), path)?;
    }
    print!(
        "{} iterations, {} foreground voxels",
        cfg.iterations,
        out.mask.count()
    );
    if let Some(gt) = &gt {
        print!(", IoU {:.4}", jaccard(&out.mask, gt)?);
    }
    println!();
    Ok(EXIT_OK)
}

fn cmd_certify(args: &CertifyArgs) -> Result<i32> {
    let features = args.features.load()?;
    let cfg = args.features.config();
    cfg.validate()?;
    let opts = CertifyOptions {
        tol: args.tol,
        max_angle_deg: args.max_angle,
        engine_iters: args.engine_iters,
        seed: args.seed,
        oracle_normalization: match args.oracle_normalization {
            OracleNormalization::UnitSum => KernelNormalization::UnitSum,
            OracleNormalization::Peak => KernelNormalization::Peak,
        },
        ..CertifyOptions::default()
    };
    let report = certify(&features, &cfg, &opts)?;
    let verdict = |ok| if ok { "PASS" } else { "FAIL" };
    println!(
        "matvec: max |conv step - M x| = {:.3e} (tol {:.1e}) {}",
        report.max_matvec_diff,
        opts.tol,
        verdict(report.matvec_pass)
    );
    println!(
        "eigenvector: angle after {} engine iterations = {:.4} deg (limit {} deg, oracle {} iterations) {}",
        opts.engine_iters,
        report.angle_deg,
        opts.max_angle_deg,
        report.oracle_iters,
        verdict(report.angle_pass)
    );
    println!("{} ({} nodes)", verdict(report.pass()), report.nodes);
    if let Some(path) = &args.reference_out {
        let m = build_engine_operator(&features, &cfg)?;
        let eig = reference_eigenvector(&m, &features.unary().to_f64())?;
        save_volume(
            &FeatureVolume::from_f64(features.shape(), &eig.eigvec, Role::Generic)?,
            path,
        )?;
    }
    Ok(if report.pass() {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    })
}

fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let sizes = if args.sizes.is_empty() {
        default_sizes()
    } else {
        args.sizes.clone()
    };
    let settings = BenchSettings {
        iters: args.iters,
        warmup: args.warmup,
        repeats: args.repeats,
        oracle_modes: !args.conv_only,
        ..BenchSettings::default()
    };
    let report = run_scaling_benchmark(&sizes, &settings, &SfsegConfig::default())?;
    for n in &report.notices {
        eprintln!("{n}");
    }
    fs::write(&args.out, report.to_csv()).map_err(|e| Error::io(&args.out, e))?;
    println!(
        "wrote {} records to {}",
        report.records.len(),
        args.out.display()
    );
    Ok(EXIT_OK)
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Degenerate(_) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (program name first), runs the subcommand, returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_USAGE;
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Run(a) => cmd_run(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Bench(a) => cmd_bench(a),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triples_parse() {
        assert_eq!(parse_radii("1,3,3").unwrap(), [1, 3, 3]);
        assert_eq!(parse_sigmas("0.5, 1.5,2").unwrap(), [0.5, 1.5, 2.0]);
        assert!(parse_radii("1,3").is_err());
        assert!(parse_radii("a,b,c").is_err());
    }

    #[test]
    fn shapes_parse() {
        assert_eq!(
            parse_shape("10x20x30").unwrap(),
            VolumeShape::new(10, 20, 30).unwrap()
        );
        assert!(parse_shape("10x20").is_err());
        assert!(parse_shape("0x1x1").is_err());
    }

    #[test]
    fn missing_pairwise_is_usage_error() {
        let code = main_with_args(["sfseg", "run", "--s", "a.sfsv", "--out", "o"]);
        assert_eq!(code, EXIT_USAGE);
    }
}
