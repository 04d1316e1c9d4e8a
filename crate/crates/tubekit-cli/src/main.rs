//! `tubekit` command-line front end.
//!
//! Subcommands: `synth`, `train-toy`, `infer`, `link`, `trim`, `eval`,
//! `pipeline`. All read/write the line-delimited JSON formats documented in
//! the formats module; format violations exit nonzero with a machine-
//! readable JSON record on stderr.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tubekit::link::{extract_paths, fuse_streams, path_score, ScoredPath};
use tubekit::metrics::{default_thresholds, report_from_bests, tube_overlap};
use tubekit::net::Checkpoint;
use tubekit::trim::trim;
use tubekit::VideoDetections;
use tubekit_cli::config::PipelineConfig;
use tubekit_cli::formats::{self, FormatError};
use tubekit_cli::infer::{infer_recurrent, infer_static};
use tubekit_cli::pipeline::{run_pipeline, PipelineOptions};
use tubekit_cli::synth::{generate_synthetic, sample_specs, DatasetParams};
use tubekit_cli::train::{train_recurrent, train_static, HeadKind, TrainVideo};

#[derive(Parser)]
#[command(
    name = "tubekit",
    version,
    about = "Spatio-temporal action proposals: synthesize, train, link, trim, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct Common {
    /// JSON config file; missing fields take the documented defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long)]
    out: PathBuf,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig, FormatError> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (features, oracle detections, ground
    /// truth and the sampled specs) into the output directory.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Number of videos.
        #[arg(long, default_value_t = 100)]
        videos: usize,
        /// Frames per video.
        #[arg(long, default_value_t = 50)]
        frames: usize,
        /// Rendered frame side length (features are side*side grayscale).
        #[arg(long, default_value_t = 16)]
        feature_side: usize,
        /// Fraction of videos whose action covers only part of the video.
        #[arg(long, default_value_t = 0.25)]
        untrimmed_fraction: f64,
        /// Noise amplitude for pixels, scores and box jitter.
        #[arg(long, default_value_t = 0.02)]
        noise: f64,
    },
    /// Train a toy regression head on synthetic features and ground truth.
    TrainToy {
        #[command(flatten)]
        common: Common,
        /// Features file (JSONL) produced by `synth`.
        #[arg(long)]
        features: PathBuf,
        /// Ground-truth file (JSONL) produced by `synth`.
        #[arg(long)]
        gt: PathBuf,
        /// Head architecture.
        #[arg(long, value_enum, default_value_t = HeadArg::Static)]
        head: HeadArg,
        /// Hidden size for the recurrent heads.
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        /// Augment with horizontally mirrored copies of every video.
        #[arg(long)]
        mirror: bool,
    },
    /// Run a trained model over features, writing per-frame detections.
    Infer {
        #[command(flatten)]
        common: Common,
        /// Model checkpoint written by `train-toy`.
        #[arg(long)]
        model: PathBuf,
        /// Features file (JSONL).
        #[arg(long)]
        features: PathBuf,
    },
    /// Link detections into video-spanning paths.
    Link {
        #[command(flatten)]
        common: Common,
        /// Detections file (JSONL).
        #[arg(long)]
        detections: PathBuf,
        /// Optional second detection stream, fused per frame before linking.
        #[arg(long)]
        fuse: Option<PathBuf>,
    },
    /// Trim linked paths into action segments.
    Trim {
        #[command(flatten)]
        common: Common,
        /// Paths file (JSONL, proposal format) produced by `link`.
        #[arg(long)]
        paths: PathBuf,
    },
    /// Score proposals against ground truth.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Proposals file (JSONL).
        #[arg(long)]
        proposals: PathBuf,
        /// Ground-truth file (JSONL).
        #[arg(long)]
        gt: PathBuf,
    },
    /// Full pipeline: (infer) -> (fuse) -> link -> trim -> eval, writing
    /// proposals.jsonl and report.json into the output directory.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Detections file; mutually exclusive with --model/--features.
        #[arg(long, conflicts_with_all = ["model", "features"])]
        detections: Option<PathBuf>,
        /// Model checkpoint to infer detections from.
        #[arg(long, requires = "features")]
        model: Option<PathBuf>,
        /// Features file for --model.
        #[arg(long, requires = "model")]
        features: Option<PathBuf>,
        /// Optional second detection stream, fused per frame before linking.
        #[arg(long)]
        fuse: Option<PathBuf>,
        /// Ground-truth file (JSONL).
        #[arg(long)]
        gt: PathBuf,
        /// Skip trimming (ablation).
        #[arg(long)]
        no_trim: bool,
        /// Worker threads for per-video processing.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum HeadArg {
    Static,
    Lstm,
    Rnn,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_stderr_record());
            ExitCode::FAILURE
        }
    }
}

enum CliError {
    Format(FormatError),
    Other(anyhow::Error),
}

impl CliError {
    fn to_stderr_record(&self) -> String {
        match self {
            CliError::Format(err) => err.to_json(),
            CliError::Other(err) => {
                serde_json::json!({ "error": "run", "message": err.to_string() }).to_string()
            }
        }
    }
}

impl From<FormatError> for CliError {
    fn from(err: FormatError) -> Self {
        CliError::Format(err)
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Other(err)
    }
}

fn anyerr(err: impl std::error::Error + Send + Sync + 'static) -> CliError {
    CliError::Other(anyhow::Error::new(err))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth {
            common,
            videos,
            frames,
            feature_side,
            untrimmed_fraction,
            noise,
        } => {
            let config = common.config()?;
            let params = DatasetParams {
                videos,
                frames,
                feature_side,
                untrimmed_fraction,
                noise,
                seed: config.seed,
                ..DatasetParams::default()
            };
            cmd_synth(&common.out, &params)
        }
        Command::TrainToy {
            common,
            features,
            gt,
            head,
            hidden,
            mirror,
        } => cmd_train_toy(&common, &features, &gt, head, hidden, mirror),
        Command::Infer {
            common,
            model,
            features,
        } => cmd_infer(&common.out, &model, &features),
        Command::Link {
            common,
            detections,
            fuse,
        } => cmd_link(&common, &detections, fuse.as_deref()),
        Command::Trim { common, paths } => cmd_trim(&common, &paths),
        Command::Eval {
            common,
            proposals,
            gt,
        } => cmd_eval(&common.out, &proposals, &gt),
        Command::Pipeline {
            common,
            detections,
            model,
            features,
            fuse,
            gt,
            no_trim,
            threads,
        } => cmd_pipeline(
            &common,
            detections.as_deref(),
            model.as_deref(),
            features.as_deref(),
            fuse.as_deref(),
            &gt,
            no_trim,
            threads,
        ),
    }
}

fn cmd_synth(out: &Path, params: &DatasetParams) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| FormatError::io(out.display().to_string(), e))?;
    let specs = sample_specs(params);

    let mut features = BTreeMap::new();
    let mut detections = Vec::new();
    let mut gts = Vec::new();
    for spec in &specs {
        let video = generate_synthetic(spec).map_err(anyerr)?;
        features.insert(spec.video_id.clone(), video.features);
        gts.push((spec.video_id.clone(), video.gt));
        detections.push(video.detections);
    }

    formats::write_features(out.join("features.jsonl"), &features)?;
    formats::write_detections(out.join("detections.jsonl"), &detections)?;
    formats::write_gts(out.join("gt.jsonl"), &gts)?;
    let spec_lines: Vec<String> = specs
        .iter()
        .map(|s| serde_json::to_string(s).expect("specs serialize"))
        .collect();
    std::fs::write(out.join("specs.jsonl"), spec_lines.join("\n") + "\n")
        .map_err(|e| FormatError::io(out.display().to_string(), e))?;
    println!(
        "wrote {} videos ({} frames each) to {}",
        specs.len(),
        params.frames,
        out.display()
    );
    Ok(())
}

/// Builds per-video training inputs by joining features with ground truth.
fn join_training_set(
    features: BTreeMap<String, Vec<Vec<f64>>>,
    gts: &[(String, tubekit::GroundTruthTube)],
) -> Vec<TrainVideo> {
    let by_video: BTreeMap<&str, &tubekit::GroundTruthTube> =
        gts.iter().map(|(id, g)| (id.as_str(), g)).collect();
    features
        .into_iter()
        .map(|(video_id, frames)| {
            let gt = by_video.get(video_id.as_str());
            let targets = (0..frames.len())
                .map(|t| gt.and_then(|g| g.box_at(t).copied()))
                .collect();
            TrainVideo {
                features: frames,
                targets,
            }
        })
        .collect()
}

fn cmd_train_toy(
    common: &Common,
    features: &Path,
    gt: &Path,
    head: HeadArg,
    hidden: usize,
    mirror: bool,
) -> Result<(), CliError> {
    let config = common.config()?;
    let feature_map = formats::read_features(features)?;
    let gts = formats::read_gts(gt)?;
    let mut videos = join_training_set(feature_map, &gts);
    if mirror {
        videos = tubekit_cli::train::with_mirror_augmentation(videos).map_err(anyerr)?;
    }

    let checkpoint = match head {
        HeadArg::Static => {
            let outcome = train_static(&config, &videos).map_err(anyerr)?;
            log_losses(&outcome.epoch_losses);
            Checkpoint::for_static(&outcome.head, config.seed)
        }
        HeadArg::Lstm => {
            let outcome =
                train_recurrent(&config, &videos, HeadKind::Lstm, hidden).map_err(anyerr)?;
            log_losses(&outcome.epoch_losses);
            Checkpoint::for_recurrent(&outcome.head, config.seed)
        }
        HeadArg::Rnn => {
            let outcome =
                train_recurrent(&config, &videos, HeadKind::Rnn, hidden).map_err(anyerr)?;
            log_losses(&outcome.epoch_losses);
            Checkpoint::for_recurrent(&outcome.head, config.seed)
        }
    };
    checkpoint.save(&common.out).map_err(anyerr)?;
    println!("checkpoint written to {}", common.out.display());
    Ok(())
}

fn log_losses(losses: &[f64]) {
    for (epoch, loss) in losses.iter().enumerate() {
        if epoch % 10 == 0 || epoch + 1 == losses.len() {
            println!("epoch {epoch:>4}: mean loss {loss:.6}");
        }
    }
}

/// Runs a checkpointed head of either kind over every video's features.
fn infer_all(
    model: &Path,
    features: &Path,
) -> Result<Vec<VideoDetections>, CliError> {
    let checkpoint = Checkpoint::load(model).map_err(anyerr)?;
    let feature_map = formats::read_features(features)?;
    let mut videos = Vec::with_capacity(feature_map.len());
    match checkpoint.head {
        tubekit::net::HeadSpec::Static { .. } => {
            let head = checkpoint.into_static_head().map_err(anyerr)?;
            for (video_id, frames) in &feature_map {
                videos.push(infer_static(&head, video_id, frames).map_err(anyerr)?);
            }
        }
        _ => {
            let head = checkpoint.into_recurrent_head().map_err(anyerr)?;
            for (video_id, frames) in &feature_map {
                videos.push(infer_recurrent(&head, video_id, frames).map_err(anyerr)?);
            }
        }
    }
    Ok(videos)
}

fn cmd_infer(out: &Path, model: &Path, features: &Path) -> Result<(), CliError> {
    let videos = infer_all(model, features)?;
    formats::write_detections(out, &videos)?;
    println!("wrote detections for {} videos to {}", videos.len(), out.display());
    Ok(())
}

/// Fuses a second detection stream into matching videos, per frame.
fn fuse_into(
    videos: Vec<VideoDetections>,
    fuse: Option<&Path>,
) -> Result<Vec<VideoDetections>, CliError> {
    let Some(other) = fuse else {
        return Ok(videos);
    };
    let second = formats::read_detections(other)?;
    let by_video: BTreeMap<&str, &VideoDetections> =
        second.iter().map(|v| (v.video_id(), v)).collect();
    videos
        .into_iter()
        .map(|video| match by_video.get(video.video_id()) {
            Some(extra) => fuse_streams(&video, extra).map_err(anyerr),
            None => Ok(video),
        })
        .collect()
}

/// Reads detections, optionally fusing a second stream per video.
fn load_detections(
    detections: &Path,
    fuse: Option<&Path>,
) -> Result<Vec<VideoDetections>, CliError> {
    fuse_into(formats::read_detections(detections)?, fuse)
}

fn cmd_link(common: &Common, detections: &Path, fuse: Option<&Path>) -> Result<(), CliError> {
    let config = common.config()?;
    let videos = load_detections(detections, fuse)?;
    let link_config = config.link_config();

    let mut out = Vec::new();
    for video in &videos {
        for scored in extract_paths(video, &link_config) {
            out.push((video.video_id().to_string(), scored));
        }
    }
    formats::write_proposals(&common.out, &out)?;
    println!("wrote {} paths to {}", out.len(), common.out.display());
    Ok(())
}

fn cmd_trim(common: &Common, paths: &Path) -> Result<(), CliError> {
    let config = common.config()?;
    let trim_config = config.trim_config();
    let lambda0 = config.lambda0;

    let linked = formats::read_proposals(paths)?;
    let mut out = Vec::new();
    for (video_id, scored) in linked {
        let outcome = trim(&scored.path, &trim_config).map_err(anyerr)?;
        for segment in outcome.segments {
            let score = path_score(&segment, lambda0);
            out.push((
                video_id.clone(),
                ScoredPath {
                    path: segment,
                    score,
                },
            ));
        }
    }
    formats::write_proposals(&common.out, &out)?;
    println!("wrote {} trimmed segments to {}", out.len(), common.out.display());
    Ok(())
}

fn cmd_eval(out: &Path, proposals: &Path, gt: &Path) -> Result<(), CliError> {
    let proposals = formats::read_proposals(proposals)?;
    let gts = formats::read_gts(gt)?;
    if gts.is_empty() {
        return Err(CliError::Other(anyhow::anyhow!(
            "ground-truth file contains no tubes"
        )));
    }

    let mut by_video: BTreeMap<&str, Vec<&ScoredPath>> = BTreeMap::new();
    for (video_id, sp) in &proposals {
        by_video.entry(video_id.as_str()).or_default().push(sp);
    }
    let bests: Vec<(String, Option<f64>)> = gts
        .iter()
        .map(|(video_id, gt)| {
            let best = by_video.get(video_id.as_str()).and_then(|paths| {
                paths
                    .iter()
                    .map(|sp| tube_overlap(&sp.path, gt))
                    .fold(None, |acc: Option<f64>, ov| {
                        Some(acc.map_or(ov, |b| b.max(ov)))
                    })
            });
            (gt.class_label().to_string(), best)
        })
        .collect();
    let report = report_from_bests(&bests, &default_thresholds()).map_err(anyerr)?;
    formats::write_report(out, &report)?;
    println!(
        "abo {:.4} mabo {:.4} recall@0.5 {:.4} -> {}",
        report.abo,
        report.mabo,
        report.recall_at_0_5,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_pipeline(
    common: &Common,
    detections: Option<&Path>,
    model: Option<&Path>,
    features: Option<&Path>,
    fuse: Option<&Path>,
    gt: &Path,
    no_trim: bool,
    threads: usize,
) -> Result<(), CliError> {
    let config = common.config()?;
    let videos = match (detections, model, features) {
        (Some(path), _, _) => load_detections(path, fuse)?,
        (None, Some(model), Some(features)) => fuse_into(infer_all(model, features)?, fuse)?,
        _ => {
            return Err(CliError::Other(anyhow::anyhow!(
                "pipeline needs either --detections or --model with --features"
            )))
        }
    };

    let gts = formats::read_gts(gt)?;
    let options = PipelineOptions {
        trim_enabled: !no_trim,
        threads,
    };
    let output = run_pipeline(&config, &options, videos, &gts).map_err(anyerr)?;

    std::fs::create_dir_all(&common.out)
        .map_err(|e| FormatError::io(common.out.display().to_string(), e))?;
    let flat: Vec<(String, ScoredPath)> = output
        .proposals
        .iter()
        .flat_map(|(id, paths)| paths.iter().map(move |p| (id.clone(), p.clone())))
        .collect();
    formats::write_proposals(common.out.join("proposals.jsonl"), &flat)?;
    formats::write_report(common.out.join("report.json"), &output.report)?;
    for warning in &output.warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "proposals {} abo {:.4} mabo {:.4} recall@0.5 {:.4} -> {}",
        flat.len(),
        output.report.abo,
        output.report.mabo,
        output.report.recall_at_0_5,
        common.out.display()
    );
    Ok(())
}
