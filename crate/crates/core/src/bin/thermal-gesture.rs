//! Command-line workflows over the thermal gesture library.

use std::fmt::Display;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;

use thermal_gesture::classifier::GestureClass;
use thermal_gesture::mmv::{load_checkpoint, save_checkpoint, MmvNetwork};
use thermal_gesture::pipeline::{
    evaluate, process_stream, protocol_split, CostAssumptions, CostReport, MmvDetector,
    PipelineConfig,
};
use thermal_gesture::rpca::pcp;
use thermal_gesture::synth::{detection_samples, SceneGenerator};
use thermal_gesture::thermal_io::{
    convert_raw, load_acquisition, load_dataset, save_acquisition, Acquisition, Daypart, SENSOR_FPS,
};
use thermal_gesture::tracker::extract_centroid;
use thermal_gesture::train::{
    recorded_detection_samples, split_train_val, train_detector, write_history_csv, TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "thermal-gesture",
    version,
    about = "Gesture recognition on 24x32 thermal streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert raw frame dumps into canonical acquisition files.
    Convert(ConvertArgs),
    /// Train the MMV wake-up detector and write a checkpoint plus training history.
    TrainDetector(TrainArgs),
    /// Score the full pipeline on a dataset and write an evaluation report.
    Eval(EvalArgs),
    /// Process one acquisition and print the recognized gestures.
    Run(RunArgs),
    /// Decompose one window into low-rank and sparse parts and write both as CSV.
    RpcaDemo(RpcaDemoArgs),
    /// Print parameter memory and compute estimates.
    CostReport(CostArgs),
}

/// Pipeline hyper-parameters; defaults are the reference operating point.
#[derive(Args)]
struct PipelineArgs {
    /// Frames per window.
    #[arg(long, default_value_t = PipelineConfig::default().n_c)]
    n_c: usize,
    #[arg(long, default_value_t = PipelineConfig::default().frame_height)]
    frame_height: usize,
    #[arg(long, default_value_t = PipelineConfig::default().frame_width)]
    frame_width: usize,
    /// Track length.
    #[arg(long, default_value_t = PipelineConfig::default().track_len)]
    track_len: usize,
    /// Low-pass decay of the tracker.
    #[arg(long, default_value_t = PipelineConfig::default().beta)]
    beta: f64,
    /// Spike threshold on normalized frame differences.
    #[arg(long, default_value_t = PipelineConfig::default().theta_s)]
    theta_s: f64,
    #[arg(long, default_value_t = PipelineConfig::default().theta_c1)]
    theta_c1: f64,
    #[arg(long, default_value_t = PipelineConfig::default().theta_c2)]
    theta_c2: f64,
    /// R-PCA sparsity weight.
    #[arg(long, default_value_t = PipelineConfig::default().lambda)]
    lambda: f64,
    #[arg(long, default_value_t = PipelineConfig::default().theta_blob)]
    theta_blob: f64,
    /// Quiet windows that end a track or a wake episode.
    #[arg(long, default_value_t = PipelineConfig::default().n_gap)]
    n_gap: usize,
    #[arg(long, default_value_t = PipelineConfig::default().rpca_max_iter)]
    rpca_max_iter: usize,
    #[arg(long, default_value_t = PipelineConfig::default().rpca_tol)]
    rpca_tol: f64,
}

impl PipelineArgs {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            n_c: self.n_c,
            frame_height: self.frame_height,
            frame_width: self.frame_width,
            track_len: self.track_len,
            beta: self.beta,
            theta_s: self.theta_s,
            theta_c1: self.theta_c1,
            theta_c2: self.theta_c2,
            lambda: self.lambda,
            theta_blob: self.theta_blob,
            n_gap: self.n_gap,
            rpca_max_iter: self.rpca_max_iter,
            rpca_tol: self.rpca_tol,
        }
    }
}

#[derive(Args)]
struct ConvertArgs {
    /// Raw files or directories of raw files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, short)]
    out_dir: PathBuf,
    /// Acquisition name; defaults to the file stem. Only valid with a single input file.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = TrainConfig::default().neurons)]
    neurons: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().binarize_start)]
    binarize_start: usize,
    #[arg(long, default_value_t = TrainConfig::default().binarize_end)]
    binarize_end: usize,
    /// Ternarization threshold.
    #[arg(long, default_value_t = TrainConfig::default().tau_b)]
    tau_b: f64,
    #[arg(long, default_value_t = TrainConfig::default().split_fraction)]
    split_fraction: f64,
    #[arg(long, default_value_t = TrainConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = PipelineConfig::default().n_c)]
    n_c: usize,
    #[arg(long, default_value_t = PipelineConfig::default().theta_s)]
    theta_s: f64,
    /// Directory of canonical acquisitions; trains on the morning idle and multi-gesture recordings.
    #[arg(long, conflicts_with = "synthetic")]
    dataset: Option<PathBuf>,
    /// Number of synthetic windows to generate when no dataset is given.
    #[arg(long, default_value_t = 500)]
    synthetic: usize,
    /// Use every n-th window of recorded acquisitions.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, short, default_value = "detector.mmv")]
    out: PathBuf,
    /// Per-epoch history CSV; defaults to the checkpoint path with a `.history.csv` suffix.
    #[arg(long)]
    history: Option<PathBuf>,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            neurons: self.neurons,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            binarize_start: self.binarize_start,
            binarize_end: self.binarize_end,
            tau_b: self.tau_b,
            split_fraction: self.split_fraction,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Text,
    Csv,
    Jsonl,
}

#[derive(Args)]
struct EvalArgs {
    /// Detector checkpoint.
    #[arg(long)]
    detector: PathBuf,
    /// Directory of canonical acquisitions; the detector's training recordings are held out.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Synthetic sequences per class when no dataset is given.
    #[arg(long, default_value_t = 50)]
    synthetic: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Score every acquisition, including the detector's training recordings.
    #[arg(long)]
    include_training: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Report destination; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct RunArgs {
    /// Canonical acquisition file.
    acquisition: PathBuf,
    #[arg(long)]
    detector: PathBuf,
    /// Write each event's track as CSV into this directory.
    #[arg(long)]
    tracks_dir: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct RpcaDemoArgs {
    /// Canonical acquisition file; a synthetic circle is used when absent.
    #[arg(long)]
    acquisition: Option<PathBuf>,
    /// Index of the window's newest frame; defaults to the middle of the acquisition.
    #[arg(long)]
    frame: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, short, default_value = ".")]
    out_dir: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct CostArgs {
    /// Trained checkpoints to report on.
    #[arg(long)]
    detector: Vec<PathBuf>,
    /// Network sizes to report with every synapse connected (an upper bound).
    #[arg(long, value_delimiter = ',')]
    neurons: Vec<usize>,
    /// Gestures per second.
    #[arg(long, default_value_t = 1.0 / 60.0)]
    gesture_rate: f64,
    #[arg(long, default_value_t = f64::from(SENSOR_FPS))]
    frame_rate: f64,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

enum CliError {
    Usage(String),
    Data(String),
}

// Any library or i/o failure is a data error.
impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Data(e.to_string())
    }
}

fn with_path<E: Display>(path: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

type Res = Result<(), CliError>;

fn log_config(command: &str, cfg: &impl Serialize) {
    log::info!(
        "{command} config {}",
        serde_json::to_string(cfg).unwrap_or_default()
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let res = match cli.command {
        Command::Convert(a) => convert(a),
        Command::TrainDetector(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Run(a) => run_cmd(a),
        Command::RpcaDemo(a) => rpca_demo(a),
        Command::CostReport(a) => cost_report(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn convert(a: ConvertArgs) -> Res {
    let mut files = Vec::new();
    for p in &a.inputs {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = fs::read_dir(p)
                .map_err(with_path(p))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    if a.name.is_some() && files.len() != 1 {
        return Err(CliError::Usage(
            "--name needs exactly one input file".into(),
        ));
    }
    log::info!(
        "convert config {{\"inputs\":{},\"out_dir\":{:?},\"name\":{:?}}}",
        files.len(),
        a.out_dir,
        a.name
    );
    fs::create_dir_all(&a.out_dir).map_err(with_path(&a.out_dir))?;
    for f in &files {
        let stem = f
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("acquisition");
        let name = a.name.clone().unwrap_or_else(|| stem.to_string());
        let acq = convert_raw(File::open(f).map_err(with_path(f))?, &name).map_err(with_path(f))?;
        let dest = a.out_dir.join(format!("{name}.csv"));
        save_acquisition(&acq, &dest).map_err(with_path(&dest))?;
        println!(
            "{} -> {} ({} frames)",
            f.display(),
            dest.display(),
            acq.len()
        );
    }
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Res {
    let cfg = a.config();
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        train: &'a TrainConfig,
        n_c: usize,
        theta_s: f64,
        dataset: &'a Option<PathBuf>,
        synthetic: usize,
        stride: usize,
    }
    log_config(
        "train-detector",
        &Resolved {
            train: &cfg,
            n_c: a.n_c,
            theta_s: a.theta_s,
            dataset: &a.dataset,
            synthetic: a.synthetic,
            stride: a.stride,
        },
    );
    let samples = match &a.dataset {
        Some(dir) => {
            let (train_acqs, _) = protocol_split(load_dataset(dir).map_err(with_path(dir))?);
            if train_acqs.is_empty() {
                return Err(CliError::Data(format!(
                    "{}: no morning idle or multi-gesture recordings",
                    dir.display()
                )));
            }
            recorded_detection_samples(&train_acqs, a.n_c, a.theta_s, a.stride)?
        }
        None => detection_samples(cfg.seed, a.synthetic, a.n_c, a.theta_s)?,
    };
    let (train, val) = split_train_val(samples, cfg.split_fraction, cfg.seed)?;
    log::info!(
        "{} training and {} validation windows",
        train.len(),
        val.len()
    );
    let t0 = Instant::now();
    let outcome = train_detector(&train, &val, &cfg)?;
    save_checkpoint(&outcome.network, &a.out).map_err(with_path(&a.out))?;
    let history = a
        .history
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.history.csv", a.out.display())));
    let out = File::create(&history).map_err(with_path(&history))?;
    write_history_csv(&outcome.history, BufWriter::new(out)).map_err(with_path(&history))?;
    println!(
        "C={} val_acc={:.4} best_epoch={} connected={} time={:.1?}",
        outcome.network.neurons(),
        outcome.best_val_acc,
        outcome.best_epoch,
        outcome.network.connectivity().connected(),
        t0.elapsed()
    );
    println!(
        "checkpoint {}, history {}",
        a.out.display(),
        history.display()
    );
    Ok(())
}

fn load_detector(path: &Path, cfg: &PipelineConfig) -> Result<MmvDetector, CliError> {
    let net = load_checkpoint(path).map_err(with_path(path))?;
    cfg.check_detector(&net).map_err(with_path(path))?;
    Ok(MmvDetector {
        net,
        theta_s: cfg.theta_s,
    })
}

fn checked(p: &PipelineArgs) -> Result<PipelineConfig, CliError> {
    let cfg = p.config();
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(with_path(p))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn eval_cmd(a: EvalArgs) -> Res {
    let cfg = checked(&a.pipeline)?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        pipeline: &'a PipelineConfig,
        detector: &'a Path,
        dataset: &'a Option<PathBuf>,
        synthetic: usize,
        seed: u64,
        include_training: bool,
        format: Format,
    }
    log_config(
        "eval",
        &Resolved {
            pipeline: &cfg,
            detector: &a.detector,
            dataset: &a.dataset,
            synthetic: a.synthetic,
            seed: a.seed,
            include_training: a.include_training,
            format: a.format,
        },
    );
    let detector = load_detector(&a.detector, &cfg)?;
    let dataset = match &a.dataset {
        Some(dir) => {
            let all = load_dataset(dir).map_err(with_path(dir))?;
            if a.include_training {
                all
            } else {
                protocol_split(all).1
            }
        }
        None => SceneGenerator::new(a.seed).suite(a.synthetic),
    };
    let cost = CostReport::new(&detector.net, &CostAssumptions::from_config(&cfg));
    let report = evaluate(&dataset, &cfg, &detector)?.with_cost(cost);
    let mut out = output(&a.out)?;
    match a.format {
        Format::Text => write!(out, "{report}")?,
        Format::Csv => report.write_csv(&mut out)?,
        Format::Jsonl => report.write_json_lines(&mut out)?,
    }
    out.flush()?;
    if a.out.is_some() {
        println!(
            "accuracy {:.4} over {} acquisitions",
            report.accuracy, report.samples
        );
    }
    Ok(())
}

fn run_cmd(a: RunArgs) -> Res {
    let cfg = checked(&a.pipeline)?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        pipeline: &'a PipelineConfig,
        acquisition: &'a Path,
        detector: &'a Path,
    }
    log_config(
        "run",
        &Resolved {
            pipeline: &cfg,
            acquisition: &a.acquisition,
            detector: &a.detector,
        },
    );
    let acq = load_acquisition(&a.acquisition).map_err(with_path(&a.acquisition))?;
    let detector = load_detector(&a.detector, &cfg)?;
    let (events, stats) = process_stream(acq.frames(), &cfg, &detector)?;
    println!("start,end,gesture,points");
    for e in &events {
        println!(
            "{},{},{},{}",
            e.start_index,
            e.end_index,
            e.predicted,
            e.track.len()
        );
    }
    log::info!(
        "{}: {} windows, {} detections, {} R-PCA calls, {} events",
        acq.name,
        stats.windows,
        stats.detections,
        stats.rpca_calls,
        stats.events
    );
    if let Some(dir) = &a.tracks_dir {
        fs::create_dir_all(dir).map_err(with_path(dir))?;
        for (i, e) in events.iter().enumerate() {
            let p = dir.join(format!("{}-event{i}.csv", acq.name));
            let f = File::create(&p).map_err(with_path(&p))?;
            e.track
                .write_csv(BufWriter::new(f))
                .map_err(with_path(&p))?;
        }
    }
    Ok(())
}

fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Res {
    let mut out = BufWriter::new(File::create(path).map_err(with_path(path))?);
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:.6}")).collect();
        writeln!(out, "{}", row.join(",")).map_err(with_path(path))?;
    }
    out.flush().map_err(with_path(path))?;
    Ok(())
}

fn rpca_demo(a: RpcaDemoArgs) -> Res {
    let cfg = checked(&a.pipeline)?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        pipeline: &'a PipelineConfig,
        acquisition: &'a Option<PathBuf>,
        frame: Option<usize>,
        seed: u64,
    }
    log_config(
        "rpca-demo",
        &Resolved {
            pipeline: &cfg,
            acquisition: &a.acquisition,
            frame: a.frame,
            seed: a.seed,
        },
    );
    let acq: Acquisition = match &a.acquisition {
        Some(p) => load_acquisition(p).map_err(with_path(p))?,
        None => SceneGenerator::new(a.seed).sequence(GestureClass::CirCw, Daypart::Morning),
    };
    let k = a.frame.unwrap_or(acq.len() / 2);
    let window = acq.window_at(k, cfg.n_c)?.normalize();
    let m = DMatrix::from_row_slice(window.rows(), window.cols(), window.data());
    let res = pcp(&m, &cfg.rpca())?;
    fs::create_dir_all(&a.out_dir).map_err(with_path(&a.out_dir))?;
    write_matrix(&a.out_dir.join("low_rank.csv"), &res.low_rank)?;
    write_matrix(&a.out_dir.join("sparse.csv"), &res.sparse)?;
    let last: Vec<f64> = res.sparse.row(window.rows() - 1).iter().copied().collect();
    println!(
        "{} frame {k}: {} iterations, converged {}, residual {:.3e}",
        acq.name, res.iterations, res.converged, res.residual
    );
    match extract_centroid(&last, cfg.shape(), cfg.theta_blob) {
        Some(c) => println!("centroid x={:.2} y={:.2}", c.x, c.y),
        None => println!("no blob in the newest frame"),
    }
    println!(
        "wrote low_rank.csv and sparse.csv to {}",
        a.out_dir.display()
    );
    Ok(())
}

fn cost_report(a: CostArgs) -> Res {
    let cfg = checked(&a.pipeline)?;
    if !(a.gesture_rate >= 0.0 && a.frame_rate > 0.0) {
        return Err(CliError::Usage(
            "rates must be non-negative, frame rate positive".into(),
        ));
    }
    let assumptions = CostAssumptions {
        frame_rate: a.frame_rate,
        gesture_rate: a.gesture_rate,
        ..CostAssumptions::from_config(&cfg)
    };
    let sizes = if a.neurons.is_empty() && a.detector.is_empty() {
        vec![125, 250, 500]
    } else {
        a.neurons.clone()
    };
    #[derive(Serialize)]
    struct Resolved<'a> {
        assumptions: &'a CostAssumptions,
        detectors: &'a [PathBuf],
        neurons: &'a [usize],
    }
    log_config(
        "cost-report",
        &Resolved {
            assumptions: &assumptions,
            detectors: &a.detector,
            neurons: &sizes,
        },
    );
    let mut reports: Vec<(String, CostReport)> = Vec::new();
    for p in &a.detector {
        let net: MmvNetwork = load_checkpoint(p).map_err(with_path(p))?;
        reports.push((p.display().to_string(), CostReport::new(&net, &assumptions)));
    }
    let inputs = cfg.frame_width;
    for &c in &sizes {
        let dense = inputs * c + c * c;
        reports.push((
            format!("dense C={c}"),
            CostReport::for_size(c, inputs, 2, dense, &assumptions),
        ));
    }
    println!(
        "{:<24} {:>7} {:>10} {:>12} {:>14} {:>12} {:>12} {:>12}",
        "network",
        "C",
        "synapses",
        "packed B",
        "unpacked B",
        "MMV ops/s",
        "R-PCA ops/s",
        "total ops/s"
    );
    for (label, r) in &reports {
        println!(
            "{:<24} {:>7} {:>10} {:>12} {:>14} {:>12.4e} {:>12.4e} {:>12.4e}",
            label,
            r.neurons,
            r.connected_synapses,
            r.params.packed_bytes,
            r.params.unpacked_bytes,
            r.mmv_flops,
            r.rpca_flops,
            r.avg_flops
        );
    }
    let f = &reports[0].1;
    println!(
        "SVD ops per iteration {}, R-PCA ops per gesture {} ({} windows x {} iterations)",
        f.flops_svd, f.rpca_ops_per_gesture, assumptions.windows_per_gesture, assumptions.max_iter
    );
    Ok(())
}
