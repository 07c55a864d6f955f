//! Command-line interface.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rflabel_core::emulation::{EmulationMode, EmulationSpec};
use rflabel_core::localization::{calibrate_gamma, ErrorConfig, LocalizationFix, BUILTIN_CONFIGS};
use rflabel_core::pipeline::{occlusion_scores, OcclusionScores, PipelineConfig};
use rflabel_core::quality::{
    filter_labels, log_average_miss_rate, quality_report, FilterCriteria, FilterReport,
    OcclusionEvent, QualityReport,
};
use rflabel_core::scene::{ImageSize, Scene, SceneConfig};
use rflabel_core::stats::Summary;
use serde::{Deserialize, Serialize};

use crate::annotations::AnnotationFile;
use crate::coco::{from_coco, to_coco, CocoFile};
use crate::config::{load_error_config, load_pipeline_config, load_scene};
use crate::error::{CliError, Result};
use crate::io::{read_json, write_atomic, write_json};
use crate::manifest::RunManifest;
use crate::tables::{read_csv, write_csv, FixRow, RangingRow};
use crate::{plot, run};

#[derive(Debug, Parser)]
#[command(
    name = "rflabel",
    version,
    about = "Simulate, emulate and evaluate RF-generated pedestrian labels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run ranging, localization and labeling over a scene.
    Simulate(SimulateArgs),
    /// Inject RF-style localization error into existing annotations.
    Emulate(EmulateArgs),
    /// Fit gamma error models to (median, p95) targets.
    Calibrate(CalibrateArgs),
    /// Remove RF labels flagged by occlusion events, low confidence or implausible speed.
    Filter(FilterArgs),
    /// Compare RF labels against ground truth.
    Report(ReportArgs),
    /// Convert between annotation JSON and COCO.
    Convert(ConvertArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    /// Scene JSON file; overrides --template.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Built-in scene template.
    #[arg(long, default_value = "street")]
    pub template: String,
}

impl SceneArgs {
    fn load(&self, seed: u64) -> Result<Scene> {
        load_scene(self.scene.as_deref(), &self.template, seed)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Built-in configuration (S0..S3) or a pipeline/error configuration file.
    #[arg(long, default_value = "S0")]
    pub config: String,
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Disable ranging noise (NLoS excess path remains).
    #[arg(long)]
    pub no_noise: bool,
    /// Write every beacon instead of one mean row per transmitter and burst.
    #[arg(long)]
    pub beacon_log: bool,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Angular,
    Depth,
    Both,
}

impl From<ModeArg> for EmulationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Angular => EmulationMode::AngularOnly,
            ModeArg::Depth => EmulationMode::DepthOnly,
            ModeArg::Both => EmulationMode::Both,
        }
    }
}

#[derive(Debug, Args)]
pub struct EmulateArgs {
    /// Annotation JSON to perturb.
    #[arg(long)]
    pub input: PathBuf,
    /// Supplies the camera models, matched by camera id.
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long, default_value = "S0")]
    pub config: String,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModeArg,
    /// Probability that a label survives (RF coverage).
    #[arg(long, default_value_t = 1.0)]
    pub coverage: f64,
    /// Use the mean body height for every label.
    #[arg(long)]
    pub no_height_variation: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Built-in configurations to calibrate; all four when no target is given.
    #[arg(long = "config")]
    pub configs: Vec<String>,
    /// Custom median error (m).
    #[arg(long, requires = "p95")]
    pub median: Option<f64>,
    /// Custom 95th-percentile error (m).
    #[arg(long, requires = "median")]
    pub p95: Option<f64>,
    #[arg(long, default_value = "custom")]
    pub name: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// RF annotation JSON.
    #[arg(long)]
    pub labels: PathBuf,
    /// Fixes CSV.
    #[arg(long)]
    pub fixes: PathBuf,
    /// Occlusion events JSON.
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long)]
    pub min_confidence: Option<f64>,
    #[arg(long)]
    pub max_speed: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub rf: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub match_iou: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Coco,
    Native,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub to: Format,
    /// Output file.
    #[arg(long)]
    pub out: PathBuf,
    /// Scene supplying image sizes for COCO output.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub template: Option<String>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Emulate(a) => emulate(&a),
        Command::Calibrate(a) => calibrate(&a),
        Command::Filter(a) => filter(&a),
        Command::Report(a) => report(&a),
        Command::Convert(a) => convert(&a),
    }
}

fn finish(mut manifest: RunManifest, out: &Path, written: &[&str], started: Instant) -> Result<()> {
    manifest.outputs = written.iter().map(|f| out.join(f)).collect();
    manifest.elapsed_s = started.elapsed().as_secs_f64();
    write_json(&out.join("manifest.json"), &manifest)
}

#[derive(Serialize)]
struct SimulationInputs<'a> {
    scene: &'a SceneConfig,
    pipeline: &'a PipelineConfig,
}

/// Everything `simulate` reports besides the label files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub quality: QualityReport,
    pub filter: FilterReport,
    /// Log-average miss rate of the RF labels, scored by fix confidence.
    pub log_average_miss_rate: f64,
    pub fix_error: Summary,
    pub failed_bursts: usize,
    pub skipped_links: usize,
    pub events: usize,
    pub occlusion: OcclusionScores,
}

pub const SIMULATE_OUTPUTS: [&str; 9] = [
    "ranging.csv",
    "fixes.csv",
    "ground_truth.json",
    "rf_labels.json",
    "filtered_labels.json",
    "events.json",
    "quality_report.json",
    "fix_error_cdf.svg",
    "manifest.json",
];

fn fix_errors(scene: &Scene, fixes: &[LocalizationFix]) -> Vec<f64> {
    fixes
        .iter()
        .filter_map(|f| {
            let truth = scene
                .target_by_device(&f.target_id)?
                .position_at(f.timestamp)
                .ok()?;
            Some(f.position.distance(truth))
        })
        .collect()
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let started = Instant::now();
    let scene = a.scene.load(a.seed)?;
    let mut config = load_pipeline_config(&a.config)?;
    if a.no_noise {
        config.ranging = config.ranging.noiseless();
    }
    config.keep_beacons |= a.beacon_log;
    info!(
        "simulating {} targets with {} for {} s",
        scene.targets.len(),
        config.error.name,
        scene.duration
    );
    let out = run::simulate(&scene, &config, a.seed, a.workers)?;
    if out.failed_bursts > 0 {
        warn!("{} bursts produced no fix", out.failed_bursts);
    }

    let errors = fix_errors(&scene, &out.fixes);
    let summary = SimulationSummary {
        quality: out.report.clone(),
        filter: out.filter_report,
        log_average_miss_rate: log_average_miss_rate(
            &out.rf_labels,
            &out.ground_truth,
            config.match_iou,
        )?,
        fix_error: Summary::of(&errors),
        failed_bursts: out.failed_bursts,
        skipped_links: out.skipped_links,
        events: out.events.len(),
        occlusion: occlusion_scores(&scene, &config, &out, a.seed)?,
    };
    let dir = &a.out;
    write_csv(
        &dir.join("ranging.csv"),
        out.samples.iter().map(RangingRow::from),
    )?;
    write_csv(&dir.join("fixes.csv"), out.fixes.iter().map(FixRow::from))?;
    write_json(
        &dir.join("ground_truth.json"),
        &AnnotationFile::from_frames(&out.ground_truth),
    )?;
    write_json(
        &dir.join("rf_labels.json"),
        &AnnotationFile::from_frames(&out.rf_labels),
    )?;
    write_json(
        &dir.join("filtered_labels.json"),
        &AnnotationFile::from_frames(&out.filtered_labels),
    )?;
    write_json(&dir.join("events.json"), &out.events)?;
    write_json(&dir.join("quality_report.json"), &summary)?;
    write_atomic(
        &dir.join("fix_error_cdf.svg"),
        plot::cdf("Localization error", "error (m)", &errors).as_bytes(),
    )?;
    info!(
        "mean IoU {:.3}, precision {:.3}, recall {:.3}, {} events",
        summary.quality.mean_iou,
        summary.quality.label_precision,
        summary.quality.label_recall,
        summary.events
    );

    let mut manifest = RunManifest::new(
        "simulate",
        &SimulationInputs {
            scene: scene.config(),
            pipeline: &config,
        },
        Some(a.seed),
    );
    manifest.workers = a.workers;
    manifest.inputs = a.scene.scene.iter().cloned().collect();
    finish(manifest, dir, &SIMULATE_OUTPUTS[..8], started)
}

fn emulate(a: &EmulateArgs) -> Result<()> {
    let started = Instant::now();
    let input: AnnotationFile = read_json(&a.input)?;
    let scene = a.scene.load(a.seed)?;
    let spec = EmulationSpec {
        coverage_p: a.coverage,
        mode: a.mode.into(),
        height_variation_enabled: !a.no_height_variation,
        seed: a.seed,
        ..EmulationSpec::new(load_error_config(&a.config)?)
    };
    if a.coverage == 0.0 {
        warn!("coverage is 0: every label will be dropped");
    }
    let frames = input.into_frames();
    let (out, report) = run::emulate(&frames, &scene.cameras, &spec, a.workers)?;
    if report.skipped_clipped > 0 {
        warn!(
            "{} clipped labels passed through unchanged",
            report.skipped_clipped
        );
    }
    let dir = &a.out;
    write_json(
        &dir.join("annotations.json"),
        &AnnotationFile::from_frames(&out),
    )?;
    write_json(&dir.join("emulation_report.json"), &report)?;
    info!(
        "{} of {} labels emitted, mean IoU {:.3}",
        report.output_labels, report.input_labels, report.iou.mean
    );

    let mut manifest = RunManifest::new("emulate", &spec, Some(a.seed));
    manifest.workers = a.workers;
    manifest.inputs = vec![a.input.clone()];
    finish(
        manifest,
        dir,
        &["annotations.json", "emulation_report.json"],
        started,
    )
}

fn calibrate(a: &CalibrateArgs) -> Result<()> {
    let started = Instant::now();
    let mut targets: Vec<ErrorConfig> = Vec::new();
    for name in &a.configs {
        targets.push(
            ErrorConfig::builtin(name)
                .ok_or_else(|| CliError::config(format!("unknown configuration `{name}`")))?,
        );
    }
    if let (Some(median), Some(p95)) = (a.median, a.p95) {
        targets.push(ErrorConfig::custom(a.name.clone(), median, p95));
    }
    if targets.is_empty() {
        targets = BUILTIN_CONFIGS
            .iter()
            .filter_map(|c| ErrorConfig::builtin(c.0))
            .collect();
    }
    let mut written = Vec::new();
    for mut t in targets {
        let (k, theta) = calibrate_gamma(t.target_median, t.target_p95)?;
        t.gamma_shape = Some(k);
        t.gamma_scale = Some(theta);
        info!("{}: shape {k:.4}, scale {theta:.5} m", t.name);
        let file = format!("{}.json", t.name);
        write_json(&a.out.join(&file), &t)?;
        written.push(file);
    }
    let manifest = RunManifest::new("calibrate", &written, None);
    let names: Vec<&str> = written.iter().map(String::as_str).collect();
    finish(manifest, &a.out, &names, started)
}

#[derive(Serialize)]
struct FilterInputs<'a> {
    criteria: &'a FilterCriteria,
}

fn filter(a: &FilterArgs) -> Result<()> {
    let started = Instant::now();
    let frames = read_json::<AnnotationFile>(&a.labels)?.into_frames();
    let fixes: Vec<LocalizationFix> = read_csv::<FixRow>(&a.fixes)?
        .into_iter()
        .map(Into::into)
        .collect();
    let events: Vec<OcclusionEvent> = match &a.events {
        Some(p) => read_json(p)?,
        None => Vec::new(),
    };
    let mut criteria = FilterCriteria {
        events,
        ..FilterCriteria::default()
    };
    if let Some(c) = a.min_confidence {
        criteria.min_confidence = c;
    }
    if let Some(v) = a.max_speed {
        criteria.max_speed = v;
    }
    let (kept, report) = filter_labels(frames, &fixes, &criteria);
    info!(
        "kept {} of {}: {} occlusion, {} low confidence, {} speed",
        report.kept,
        report.input_labels,
        report.removed_occlusion,
        report.removed_low_confidence,
        report.removed_speed
    );
    write_json(
        &a.out.join("filtered_labels.json"),
        &AnnotationFile::from_frames(&kept),
    )?;
    write_json(&a.out.join("filter_report.json"), &report)?;
    let mut manifest = RunManifest::new(
        "filter",
        &FilterInputs {
            criteria: &criteria,
        },
        None,
    );
    manifest.inputs = [
        Some(a.labels.clone()),
        Some(a.fixes.clone()),
        a.events.clone(),
    ]
    .into_iter()
    .flatten()
    .collect();
    finish(
        manifest,
        &a.out,
        &["filtered_labels.json", "filter_report.json"],
        started,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOutput {
    #[serde(flatten)]
    pub quality: QualityReport,
    pub log_average_miss_rate: f64,
}

fn report(a: &ReportArgs) -> Result<()> {
    let started = Instant::now();
    let rf = read_json::<AnnotationFile>(&a.rf)?.into_frames();
    let gt = read_json::<AnnotationFile>(&a.gt)?.into_frames();
    let quality = quality_report(&rf, &gt, a.match_iou)?;
    let lamr = log_average_miss_rate(&rf, &gt, a.match_iou)?;
    info!(
        "mean IoU {:.3}, precision {:.3}, recall {:.3}, LAMR {:.3}",
        quality.mean_iou, quality.label_precision, quality.label_recall, lamr
    );
    write_atomic(
        &a.out.join("iou_histogram.svg"),
        plot::histogram("IoU of scored labels", "IoU", &quality.iou_histogram, 1.0).as_bytes(),
    )?;
    write_json(
        &a.out.join("quality_report.json"),
        &ReportOutput {
            quality,
            log_average_miss_rate: lamr,
        },
    )?;
    let mut manifest = RunManifest::new("report", &a.match_iou, None);
    manifest.inputs = vec![a.rf.clone(), a.gt.clone()];
    finish(
        manifest,
        &a.out,
        &["quality_report.json", "iou_histogram.svg"],
        started,
    )
}

fn convert(a: &ConvertArgs) -> Result<()> {
    match a.to {
        Format::Coco => {
            let file: AnnotationFile = read_json(&a.input)?;
            let mut sizes: BTreeMap<String, ImageSize> = BTreeMap::new();
            if a.scene.is_some() || a.template.is_some() {
                let scene = load_scene(
                    a.scene.as_deref(),
                    a.template.as_deref().unwrap_or("street"),
                    0,
                )?;
                sizes.extend(scene.cameras.iter().map(|c| (c.id.clone(), c.image_size)));
            }
            write_json(&a.out, &to_coco(&file, &sizes))
        }
        Format::Native => {
            let coco: CocoFile = read_json(&a.input)?;
            write_json(&a.out, &from_coco(&coco)?)
        }
    }
}
