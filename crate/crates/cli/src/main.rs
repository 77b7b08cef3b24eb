//! Command-line front end: mesh fitting, the planar toy study, splitting,
//! metrics, gradient checks and encoder training.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use meshfit::driver::{
    default_encoder, fit_mesh, gradient_suite, mean_iou, toy_sweep, write_toy_csv, FitConfig,
    GradLoss, SplitStrategy, ToyConfig,
};
use meshfit::graphnet::{
    evaluate_nearest_centroid, toy_shape_dataset, train_toy_encoder, TrainConfig,
};
use meshfit::mesh::{load_obj, save_obj};
use meshfit::metrics::{f1_meshes, write_metric_rows, MetricConfig, MetricRow};
use meshfit::rng::derive_seed;
use meshfit::{
    split_adaptive, split_uniform, EncoderParams, Error, LatentReference, LossWeights, Primitive,
    SplitConfig, SurfaceMode,
};

#[derive(Parser, Debug)]
#[command(
    name = "meshfit",
    version,
    about = "Fit triangle meshes to target surfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Deform an initial mesh toward a target over split-separated stages.
    Fit(FitArgs),
    /// Square-to-triangle loss study; writes one IoU row per run.
    Toy2d(ToyArgs),
    /// Split the faces of a mesh.
    Split(SplitArgs),
    /// F1 surface score of a prediction against a target.
    Metrics(MetricArgs),
    /// Compare analytic gradients with central differences.
    Gradcheck(GradArgs),
    /// Train the surrogate encoder used by the latent loss.
    TrainEncoder(TrainArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitKind {
    Adaptive,
    Uniform,
    Never,
}

#[derive(clap::Args, Debug)]
struct FitArgs {
    /// Starting mesh; a level-2 icosphere when omitted.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value_t = 3)]
    stages: usize,
    /// Iterations per stage.
    #[arg(long, default_value_t = 400)]
    iters: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Curvature threshold in degrees for adaptive splits.
    #[arg(long, default_value_t = 70.0)]
    alpha: f64,
    /// Loss weights as g1,g2,g3,g4 (latent, surface, edge, laplacian).
    #[arg(long, default_value = "0.001,1,0.3,1")]
    gammas: LossWeights,
    #[arg(long, default_value_t = 2500)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Surface loss before the switch-over (ptp turns into pts after it).
    #[arg(long, default_value = "ptp")]
    mode: SurfaceMode,
    /// Iteration within each stage where the refinement phase starts.
    #[arg(long, default_value_t = 300)]
    switch_iter: usize,
    #[arg(long, value_enum, default_value = "adaptive")]
    split: SplitKind,
    /// Encoder JSON for the latent term; one is trained when omitted.
    #[arg(long)]
    encoder: Option<PathBuf>,
    /// Rescale the target into the unit cube first.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value = "fit_out")]
    out_dir: PathBuf,
}

#[derive(clap::Args, Debug)]
struct ToyArgs {
    #[arg(long, value_delimiter = ',', default_value = "vtp,ptp,pts")]
    loss: Vec<SurfaceMode>,
    /// Sample counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "50")]
    points: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Number of seeds, run as 0..seeds.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 512)]
    resolution: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct SplitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 70.0)]
    alpha: f64,
    /// Split every face instead of the curved ones.
    #[arg(long)]
    uniform: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct MetricArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Threshold on squared distance.
    #[arg(long, default_value_t = 1e-4)]
    tau: f64,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct GradArgs {
    /// vtp, ptp, pts, edge, laplacian, latent or all.
    #[arg(long, default_value = "all")]
    loss: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    tie_eps: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Meshes per family in the training set.
    #[arg(long, default_value_t = 20)]
    per_family: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Toy2d(a) => toy(a),
        Command::Split(a) => split(a),
        Command::Metrics(a) => metrics(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::TrainEncoder(a) => train(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(Error::Divergence { trace_csv, .. }) = e.downcast_ref::<Error>() {
                eprint!("{trace_csv}");
            }
            ExitCode::FAILURE
        }
    }
}

/// Writes to `path`, or stdout when none is given.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn fit(a: FitArgs) -> Result<ExitCode> {
    let init = match &a.init {
        Some(p) => load_obj::<f64>(p)?,
        None => Primitive::IcoSphere { subdiv: 2 }.build(),
    };
    let mut target = load_obj::<f64>(&a.target)?;
    if a.normalize {
        target = target.normalized_to_unit_cube();
    }
    let cfg = FitConfig {
        stages: a.stages,
        iters_per_stage: a.iters,
        lr: a.lr,
        weights: a.gammas,
        mode: a.mode,
        switch_iter: Some(a.switch_iter),
        samples: a.samples,
        split: match a.split {
            SplitKind::Adaptive => SplitStrategy::Adaptive(SplitConfig::new(a.alpha)?),
            SplitKind::Uniform => SplitStrategy::Uniform,
            SplitKind::Never => SplitStrategy::Never,
        },
        seed: a.seed,
        ..FitConfig::default()
    };
    cfg.validate()?;
    let reference = if cfg.weights.gamma1 > 0.0 {
        let encoder = match &a.encoder {
            Some(p) => EncoderParams::<f64>::load(p)?,
            None => {
                let (enc, acc) = default_encoder::<f64>(a.seed)?;
                eprintln!("trained encoder, held-out accuracy {acc:.3}");
                enc
            }
        };
        Some(LatentReference::new(encoder, &target)?)
    } else {
        None
    };
    let trace = fit_mesh(&init, &target, &cfg, reference.as_ref())?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    save_obj(&trace.final_mesh, a.out_dir.join("final.obj"))?;
    trace.save_csv(a.out_dir.join("trace.csv"))?;
    trace.write_split_csv(output(Some(&a.out_dir.join("splits.csv")))?)?;
    println!(
        "f1 {:.3} vertices {} faces {}",
        trace.final_f1,
        trace.final_mesh.num_vertices(),
        trace.final_mesh.num_faces()
    );
    Ok(ExitCode::SUCCESS)
}

fn toy(a: ToyArgs) -> Result<ExitCode> {
    let base = ToyConfig {
        iters: a.iters,
        lr: a.lr,
        raster_resolution: a.resolution,
        ..ToyConfig::default()
    };
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let rows = toy_sweep(&a.loss, &a.points, &seeds, &base)?;
    write_toy_csv(&rows, output(a.out.as_deref())?)?;
    for &l in &a.loss {
        for &n in &a.points {
            if let Some(m) = mean_iou(&rows, l, n) {
                eprintln!("{l} n={n} mean iou {m:.4}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn split(a: SplitArgs) -> Result<ExitCode> {
    let mesh = load_obj::<f64>(&a.input)?;
    let (out, report) = if a.uniform {
        split_uniform(&mesh)?
    } else {
        split_adaptive(&mesh, &SplitConfig::new(a.alpha)?)?
    };
    save_obj(&out, &a.out)?;
    if let Some(p) = &a.report {
        report.write_csv(output(Some(p))?)?;
    }
    eprintln!(
        "split {} of {} faces: {} -> {} vertices",
        report.num_split(),
        report.faces_before,
        report.vertices_before,
        report.vertices_after
    );
    Ok(ExitCode::SUCCESS)
}

fn metrics(a: MetricArgs) -> Result<ExitCode> {
    let pred = load_obj::<f64>(&a.pred)?;
    let target = load_obj::<f64>(&a.target)?;
    let cfg = MetricConfig {
        tau: a.tau,
        n_eval: a.samples,
        ..MetricConfig::default()
    };
    cfg.validate()?;
    let score = f1_meshes::<f64>(&pred, &target, &cfg, a.seed)?;
    let config = format!("tau={};samples={};seed={}", a.tau, a.samples, a.seed);
    let rows: Vec<MetricRow> = [
        ("precision", score.precision),
        ("recall", score.recall),
        ("f1", score.f1),
    ]
    .into_iter()
    .map(|(metric, value)| MetricRow {
        metric: metric.into(),
        value,
        config: config.clone(),
    })
    .collect();
    write_metric_rows(&rows, output(a.out.as_deref())?)?;
    Ok(ExitCode::SUCCESS)
}

fn gradcheck(a: GradArgs) -> Result<ExitCode> {
    let losses: Vec<GradLoss> = if a.loss == "all" {
        GradLoss::ALL.to_vec()
    } else {
        vec![a.loss.parse()?]
    };
    let mut out = csv::Writer::from_writer(output(a.out.as_deref())?);
    let mut all_passed = true;
    for (i, &loss) in losses.iter().enumerate() {
        let report = gradient_suite(loss, a.trials, derive_seed(a.seed, i as u64), a.tie_eps)?;
        all_passed &= report.passed == report.trials;
        out.serialize(&report)?;
    }
    out.flush()?;
    // a failed check is a result, not an error, but scripts should see it
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn train(a: TrainArgs) -> Result<ExitCode> {
    let train = toy_shape_dataset::<f64>(a.per_family, derive_seed(a.seed, 0x5452));
    let test = toy_shape_dataset::<f64>((a.per_family / 2).max(1), derive_seed(a.seed, 0x5445));
    let cfg = TrainConfig {
        steps: a.steps,
        lr: a.lr,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let outcome = train_toy_encoder(&train, &cfg)?;
    let acc = evaluate_nearest_centroid(&outcome.encoder, &train, &test)?;
    outcome.encoder.save(&a.out)?;
    println!(
        "train accuracy {:.3} held-out accuracy {acc:.3} final loss {:.5}",
        outcome.train_accuracy,
        outcome.losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(ExitCode::SUCCESS)
}
