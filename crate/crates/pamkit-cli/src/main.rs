//! `pamkit` command-line frontend.
//!
//! Every subcommand is a thin file-in/file-out wrapper over the
//! library: `pipeline` chains detection, featurization, and
//! classification over many recordings; the rest expose one module
//! each. Exit codes: 0 success, 1 usage error, 2 data error, 3
//! partial failure (some pipeline inputs failed, some succeeded).

// `!(x > 0.0)` rejects NaN along with out-of-range values; the
// suggested `x <= 0.0` would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::error::Error as StdError;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pamkit::audio::{self, ChannelPolicy};
use pamkit::config;
use pamkit::detect::{
    self, bled_detect, window_classifier_detect, BledConfig, SoundEvent, WindowClassifierConfig,
};
use pamkit::dsp::{self, MfccConfig, SpectrogramConfig};
use pamkit::eval::{self, RocPoint, DEFAULT_ROC_THRESHOLDS};
use pamkit::learn::{
    self, assemble_dataset, confusion_matrix, load_model, save_model, split_train_test, train_gmm,
    train_lda, train_mlp, train_svm, FeatureMode, LabeledDataset, ModelParameters, TrainedModel,
};
use pamkit::pipeline::{self, default_workers, DetectorKind, PipelineConfig, PipelineError};
use pamkit::render::{self, ImageFormat, ImageSpec, ScatterPoint};
use pamkit::spatial;

#[derive(Parser)]
#[command(name = "pamkit", version, about = "Passive acoustic monitoring toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect, classify, and export sound events across many recordings.
    Pipeline(PipelineArgs),
    /// Extract MFCC feature vectors from labeled clips into a CSV table.
    Featurize(FeaturizeArgs),
    /// Train a classifier on labeled clips and save it as JSON.
    Train(TrainArgs),
    /// Classify whole clips with a saved model.
    Classify(ClassifyArgs),
    /// Run a detector over recordings and write an event CSV.
    Detect(DetectArgs),
    /// Score detections against annotations (recall, FP/hour).
    Eval(EvalArgs),
    /// Compute a ROC curve from scored candidates.
    Roc(RocArgs),
    /// Interpolate per-site call counts onto a density grid.
    Density(DensityArgs),
    /// Render spectrograms, overlays, scatter plots, ROC curves, heatmaps.
    #[command(subcommand)]
    Render(RenderCommand),
}

/// Errors surfaced to the shell: usage problems exit 1, data problems
/// (unreadable, malformed, or inconsistent inputs) exit 2.
enum CliError {
    Usage(String),
    Data(String),
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
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Pipeline(args) => cmd_pipeline(args),
        Command::Featurize(args) => cmd_featurize(args).map(|()| 0),
        Command::Train(args) => cmd_train(args).map(|()| 0),
        Command::Classify(args) => cmd_classify(args).map(|()| 0),
        Command::Detect(args) => cmd_detect(args).map(|()| 0),
        Command::Eval(args) => cmd_eval(args).map(|()| 0),
        Command::Roc(args) => cmd_roc(args).map(|()| 0),
        Command::Density(args) => cmd_density(args).map(|()| 0),
        Command::Render(cmd) => cmd_render(cmd).map(|()| 0),
    }
}

/// Formats an error with its full source chain, so CSV line numbers
/// and file paths buried in wrapped errors reach the user.
fn chain(e: &dyn StdError) -> String {
    let mut msg = e.to_string();
    let mut cur = e.source();
    while let Some(src) = cur {
        let _ = write!(msg, ": {src}");
        cur = src.source();
    }
    msg
}

trait OrData<T> {
    fn or_data(self) -> Result<T, CliError>;
}

impl<T, E: StdError> OrData<T> for Result<T, E> {
    fn or_data(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Data(chain(&e)))
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| CliError::Data(format!("writing {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Data(format!("writing to stdout: {e}"))),
    }
}

fn warn_skipped(skipped: &[(PathBuf, String)]) {
    for (path, reason) in skipped {
        eprintln!("warning: skipped {}: {reason}", path.display());
    }
}

// ---------------------------------------------------------------- shared args

#[derive(Args)]
struct MfccArgs {
    /// Mel filterbank size.
    #[arg(long, default_value_t = 26)]
    n_filters: usize,
    /// Cepstral coefficients kept per window.
    #[arg(long, default_value_t = 12)]
    n_cep: usize,
    /// Low edge of the analysis band in Hz.
    #[arg(long, default_value_t = 400.0)]
    fmin: f64,
    /// High edge of the analysis band in Hz.
    #[arg(long, default_value_t = 1500.0)]
    fmax: f64,
    /// Analysis window length in seconds.
    #[arg(long, default_value_t = 0.25)]
    win_s: f64,
    /// Drop delta coefficients from fixed-length vectors.
    #[arg(long)]
    no_deltas: bool,
    /// Window count clips are resampled to for fixed-length vectors.
    #[arg(long, default_value_t = 9)]
    fixed_windows: usize,
}

impl MfccArgs {
    fn to_config(&self) -> Result<MfccConfig, CliError> {
        if self.n_filters == 0 || self.n_cep == 0 || self.fixed_windows == 0 {
            return Err(CliError::Usage(
                "--n-filters, --n-cep, and --fixed-windows must be positive".into(),
            ));
        }
        if self.n_cep > self.n_filters {
            return Err(CliError::Usage(format!(
                "--n-cep {} exceeds --n-filters {}",
                self.n_cep, self.n_filters
            )));
        }
        if !(self.fmin >= 0.0 && self.fmax > self.fmin) {
            return Err(CliError::Usage(format!(
                "band {}..{} Hz is not a valid frequency range",
                self.fmin, self.fmax
            )));
        }
        if !(self.win_s > 0.0) {
            return Err(CliError::Usage("--win-s must be positive".into()));
        }
        Ok(MfccConfig {
            n_filters: self.n_filters,
            n_cep: self.n_cep,
            fmin_hz: self.fmin,
            fmax_hz: self.fmax,
            win_s: self.win_s,
            include_deltas: !self.no_deltas,
            n_fixed_windows: self.fixed_windows,
        })
    }
}

#[derive(Args)]
struct TrainHyperArgs {
    /// Gaussian components per class (GMM).
    #[arg(long, default_value_t = 2)]
    k_components: usize,
    /// L2 regularization strength (SVM).
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    /// Training epochs (SVM, MLP).
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Hidden layer width (MLP).
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    /// Gradient step size (MLP).
    #[arg(long, default_value_t = 0.3)]
    learning_rate: f64,
    /// Covariance shrinkage toward the identity (LDA), in [0, 1].
    #[arg(long, default_value_t = 0.1)]
    shrinkage: f64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModelKindArg {
    Gmm,
    Svm,
    Mlp,
    Lda,
}

impl FromStr for ModelKindArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gmm" => Ok(Self::Gmm),
            "svm" => Ok(Self::Svm),
            "mlp" => Ok(Self::Mlp),
            "lda" => Ok(Self::Lda),
            other => Err(format!(
                "unknown model kind '{other}' (expected gmm, svm, mlp, or lda)"
            )),
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    /// One fixed-length vector per clip.
    Fixed,
    /// One vector per analysis window.
    Frames,
}

impl From<ModeArg> for FeatureMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Fixed => FeatureMode::Fixed,
            ModeArg::Frames => FeatureMode::Frames,
        }
    }
}

fn train_model(
    kind: ModelKindArg,
    ds: &LabeledDataset,
    hp: &TrainHyperArgs,
    seed: u64,
) -> Result<TrainedModel, CliError> {
    match kind {
        ModelKindArg::Gmm => train_gmm(ds, hp.k_components, seed).or_data(),
        ModelKindArg::Svm => train_svm(ds, hp.lambda, hp.epochs, seed).or_data(),
        ModelKindArg::Mlp => train_mlp(ds, hp.hidden, hp.epochs, hp.learning_rate, seed).or_data(),
        ModelKindArg::Lda => train_lda(ds, hp.shrinkage).or_data(),
    }
}

/// Exactly one of `--manifest` and `--tree` names the labeled clips.
fn dataset_source(manifest: Option<&Path>, tree: Option<&Path>) -> Result<PathBuf, CliError> {
    match (manifest, tree) {
        (Some(m), None) => Ok(m.to_path_buf()),
        (None, Some(t)) => Ok(t.to_path_buf()),
        _ => Err(CliError::Usage(
            "provide exactly one of --manifest and --tree".into(),
        )),
    }
}

// ------------------------------------------------------------------ featurize

#[derive(Args)]
struct FeaturizeArgs {
    /// CSV of `path,label` rows naming labeled clips.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory whose subdirectories are class names holding clips.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Featurization mode.
    #[arg(long, value_enum, default_value_t = ModeArg::Fixed)]
    mode: ModeArg,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    mfcc: MfccArgs,
}

fn cmd_featurize(args: FeaturizeArgs) -> Result<(), CliError> {
    let source = dataset_source(args.manifest.as_deref(), args.tree.as_deref())?;
    let cfg = args.mfcc.to_config()?;
    let report = assemble_dataset(&source, &cfg, args.mode.into()).or_data()?;
    warn_skipped(&report.skipped);
    let mut buf = Vec::new();
    learn::write_dataset_csv(&report.dataset, &mut buf).or_data()?;
    write_output(args.out.as_deref(), &buf)
}

// ---------------------------------------------------------------------- train

#[derive(Args)]
struct TrainArgs {
    /// CSV of `path,label` rows naming labeled clips.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory whose subdirectories are class names holding clips.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Classifier family to train.
    #[arg(long, value_enum)]
    model_kind: ModelKindArg,
    /// Where the trained model JSON is written.
    #[arg(long)]
    out: PathBuf,
    /// Featurization mode the model will expect at classify time.
    #[arg(long, value_enum, default_value_t = ModeArg::Fixed)]
    mode: ModeArg,
    /// Hold out this fraction for a confusion matrix, in (0, 1).
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Seed for shuffling and weight initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    mfcc: MfccArgs,
    #[command(flatten)]
    hyper: TrainHyperArgs,
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let source = dataset_source(args.manifest.as_deref(), args.tree.as_deref())?;
    let cfg = args.mfcc.to_config()?;
    if let Some(f) = args.train_fraction {
        if !(f > 0.0 && f < 1.0) {
            return Err(CliError::Usage(format!(
                "--train-fraction {f} must lie strictly between 0 and 1"
            )));
        }
    }
    let report = assemble_dataset(&source, &cfg, args.mode.into()).or_data()?;
    warn_skipped(&report.skipped);

    let model = match args.train_fraction {
        Some(f) => {
            let (train, test) = split_train_test(&report.dataset, f, args.seed).or_data()?;
            let model = train_model(args.model_kind, &train, &args.hyper, args.seed)?;
            let cm = confusion_matrix(&model, &test).or_data()?;
            print_confusion(&cm);
            model
        }
        None => train_model(args.model_kind, &report.dataset, &args.hyper, args.seed)?,
    };

    save_model(&model, &args.out).or_data()?;
    println!(
        "trained {} on {} vectors ({} classes), saved to {}",
        model.kind(),
        report.dataset.vectors.len(),
        model.classes.len(),
        args.out.display()
    );
    Ok(())
}

/// Rows are true classes, columns predicted, matching the class order.
fn print_confusion(cm: &learn::ConfusionMatrix) {
    let width = cm
        .classes
        .iter()
        .map(|c| c.len())
        .max()
        .unwrap_or(0)
        .max(5);
    print!("{:width$}", "");
    for c in &cm.classes {
        print!(" {c:>width$}");
    }
    println!();
    for (i, c) in cm.classes.iter().enumerate() {
        print!("{c:>width$}");
        for n in &cm.counts[i] {
            print!(" {n:>width$}");
        }
        println!();
    }
    println!("percent correct: {:.1}%", cm.percent_correct());
}

// ------------------------------------------------------------------- classify

#[derive(Args)]
struct ClassifyArgs {
    /// Trained model JSON.
    #[arg(long)]
    model: PathBuf,
    /// WAV clips to classify.
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,
}

fn cmd_classify(args: ClassifyArgs) -> Result<(), CliError> {
    let model = load_model(&args.model).or_data()?;
    if model.feature_config.mode != FeatureMode::Fixed {
        return Err(CliError::Data(format!(
            "model {} featurizes per window; classify needs a fixed-mode model",
            args.model.display()
        )));
    }
    let mut wtr = csv::Writer::from_writer(std::io::stdout());
    wtr.write_record(["source", "label", "probability"]).or_data()?;
    for input in &args.inputs {
        let clip = audio::decode_wav(input, ChannelPolicy::FirstChannel).or_data()?;
        let v = dsp::mfcc_fixed(&clip, &model.feature_config.mfcc).or_data()?;
        let (label, prob) = learn::classify(&model, &v).or_data()?;
        wtr.write_record([
            input.display().to_string(),
            label,
            prob.to_string(),
        ])
        .or_data()?;
    }
    wtr.flush().or_data()?;
    Ok(())
}

// --------------------------------------------------------------------- detect

#[derive(Args)]
struct DetectArgs {
    /// WAV recordings to scan.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Detector: energy or window_classifier.
    #[arg(long, default_value = "energy")]
    method: String,
    /// Noise-floor quantile for the energy threshold, in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    quantile: f64,
    /// Shortest reported event in seconds.
    #[arg(long, default_value_t = 6.0)]
    min_dur: f64,
    /// Low edge of the detection band in Hz.
    #[arg(long, default_value_t = 400.0)]
    fmin: f64,
    /// High edge of the detection band in Hz.
    #[arg(long, default_value_t = 1500.0)]
    fmax: f64,
    /// Sub-threshold windows bridged inside an event.
    #[arg(long, default_value_t = 0)]
    max_gap: usize,
    /// Frames-mode model JSON (window_classifier only).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Class the window classifier listens for.
    #[arg(long)]
    target_class: Option<String>,
    /// Window probability threshold, in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    prob_threshold: f64,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_detect(args: DetectArgs) -> Result<(), CliError> {
    let method: DetectorKind = args
        .method
        .parse()
        .map_err(|e: String| CliError::Usage(e))?;
    if !(0.0..=1.0).contains(&args.quantile) {
        return Err(CliError::Usage(format!(
            "--quantile {} must lie in [0, 1]",
            args.quantile
        )));
    }
    if !(args.min_dur > 0.0) {
        return Err(CliError::Usage("--min-dur must be positive".into()));
    }
    if !(args.fmin >= 0.0 && args.fmax > args.fmin) {
        return Err(CliError::Usage(format!(
            "band {}..{} Hz is not a valid frequency range",
            args.fmin, args.fmax
        )));
    }
    if !(0.0..=1.0).contains(&args.prob_threshold) {
        return Err(CliError::Usage(format!(
            "--prob-threshold {} must lie in [0, 1]",
            args.prob_threshold
        )));
    }

    let mut events = Vec::new();
    match method {
        DetectorKind::Energy => {
            let cfg = BledConfig {
                spectrogram: SpectrogramConfig::default(),
                fmin_hz: args.fmin,
                fmax_hz: args.fmax,
                quantile: args.quantile,
                min_duration_s: args.min_dur,
                max_gap_windows: args.max_gap,
            };
            for input in &args.inputs {
                let clip = audio::decode_wav(input, ChannelPolicy::FirstChannel).or_data()?;
                events.extend(bled_detect(&clip, &cfg).or_data()?);
            }
        }
        DetectorKind::WindowClassifier => {
            let model_path = args.model.as_ref().ok_or_else(|| {
                CliError::Usage("--method window_classifier requires --model".into())
            })?;
            let target = args.target_class.clone().ok_or_else(|| {
                CliError::Usage("--method window_classifier requires --target-class".into())
            })?;
            let model = load_model(model_path).or_data()?;
            let cfg = WindowClassifierConfig {
                mfcc: model.feature_config.mfcc,
                target_class: target,
                prob_threshold: args.prob_threshold,
                min_duration_s: args.min_dur,
            };
            for input in &args.inputs {
                let clip = audio::decode_wav(input, ChannelPolicy::FirstChannel).or_data()?;
                events.extend(window_classifier_detect(&clip, &model, &cfg).or_data()?);
            }
        }
    }

    let mut buf = Vec::new();
    detect::write_events_csv(&events, &mut buf).or_data()?;
    write_output(args.out.as_deref(), &buf)?;
    eprintln!("{} events", events.len());
    Ok(())
}

// ----------------------------------------------------------------------- eval

#[derive(Args)]
struct EvalArgs {
    /// Detector output CSV.
    #[arg(long)]
    detections: PathBuf,
    /// Human annotation CSV.
    #[arg(long)]
    annotations: PathBuf,
    /// Audited recording time behind the annotations, in hours.
    #[arg(long)]
    audited_hours: f64,
    /// Seconds of overlap required to count a match.
    #[arg(long, default_value_t = 1.0)]
    min_overlap: f64,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report as readable text instead of CSV.
    #[arg(long)]
    text: bool,
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    if !(args.audited_hours > 0.0) {
        return Err(CliError::Usage("--audited-hours must be positive".into()));
    }
    if !(args.min_overlap > 0.0) {
        return Err(CliError::Usage("--min-overlap must be positive".into()));
    }
    let detections = detect::read_events_csv(&args.detections).or_data()?;
    let annotations = eval::read_annotations_csv(&args.annotations).or_data()?;
    let outcome = eval::match_events_canonical(&detections, &annotations, args.min_overlap);
    let report = eval::recall_and_fp_rate(&outcome, &annotations, args.audited_hours);
    let rendered = if args.text {
        eval::report_to_text(&report)
    } else {
        eval::report_to_csv(&report)
    };
    write_output(args.out.as_deref(), rendered.as_bytes())
}

// ------------------------------------------------------------------------ roc

#[derive(Args)]
struct RocArgs {
    /// CSV of `score,is_call` rows.
    #[arg(long)]
    scores: PathBuf,
    /// Comma-separated probability thresholds, each in [0, 1].
    #[arg(long)]
    thresholds: Option<String>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_thresholds(raw: Option<&str>) -> Result<Vec<f64>, CliError> {
    let Some(raw) = raw else {
        return Ok(DEFAULT_ROC_THRESHOLDS.to_vec());
    };
    let mut out = Vec::new();
    for piece in raw.split(',') {
        let t: f64 = piece
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("threshold '{piece}' is not a number")))?;
        if !(0.0..=1.0).contains(&t) {
            return Err(CliError::Usage(format!(
                "threshold {t} must lie in [0, 1]"
            )));
        }
        out.push(t);
    }
    Ok(out)
}

fn roc_from_files(scores: &Path, thresholds: Option<&str>) -> Result<Vec<RocPoint>, CliError> {
    let scored = eval::read_scores_csv(scores).or_data()?;
    let thresholds = parse_thresholds(thresholds)?;
    eval::roc_curve(&scored, &thresholds).or_data()
}

fn cmd_roc(args: RocArgs) -> Result<(), CliError> {
    let points = roc_from_files(&args.scores, args.thresholds.as_deref())?;
    let mut buf = Vec::new();
    eval::write_roc_csv(&points, &mut buf).or_data()?;
    write_output(args.out.as_deref(), &buf)
}

// -------------------------------------------------------------------- density

#[derive(Args)]
struct DensityArgs {
    /// Event CSV whose per-site counts feed the interpolation.
    #[arg(long)]
    events: PathBuf,
    /// CSV of `site,x_m,y_m` recorder positions.
    #[arg(long)]
    sites: PathBuf,
    /// `source = site` lines mapping event sources to recorder sites.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Grid cell edge in meters.
    #[arg(long, default_value_t = 100.0)]
    cell_m: f64,
    /// Inverse-distance weighting exponent.
    #[arg(long, default_value_t = 2.0)]
    power: f64,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct DensityProducts {
    grid: spatial::DensityGrid,
    sites: Vec<spatial::RecorderSite>,
}

fn density_from_files(args: &DensityArgs) -> Result<DensityProducts, CliError> {
    if !(args.cell_m > 0.0) {
        return Err(CliError::Usage("--cell-m must be positive".into()));
    }
    if !(args.power > 0.0) {
        return Err(CliError::Usage("--power must be positive".into()));
    }
    let events = detect::read_events_csv(&args.events).or_data()?;
    let sites = spatial::read_sites_csv(&args.sites).or_data()?;
    let site_of_source: BTreeMap<String, String> = match &args.map {
        Some(path) => config::read_config(path).or_data()?.into_iter().collect(),
        None => events
            .iter()
            .map(|e| (e.source.clone(), e.source.clone()))
            .collect(),
    };
    let counted = spatial::counts_from_events(&events, &sites, &site_of_source).or_data()?;
    let spec = spatial::GridSpec::covering(&counted, args.cell_m).or_data()?;
    let grid = spatial::idw_interpolate(&counted, &spec, args.power).or_data()?;
    Ok(DensityProducts {
        grid,
        sites: counted,
    })
}

fn cmd_density(args: DensityArgs) -> Result<(), CliError> {
    let products = density_from_files(&args)?;
    let mut buf = Vec::new();
    spatial::write_grid_csv(&products.grid, &mut buf).or_data()?;
    write_output(args.out.as_deref(), &buf)
}

// --------------------------------------------------------------------- render

#[derive(Subcommand)]
enum RenderCommand {
    /// Grayscale spectrogram of a recording span.
    Spectrogram(RenderSpectrogramArgs),
    /// Spectrogram with detected events outlined.
    Overlay(RenderOverlayArgs),
    /// 2-D class scatter of a labeled dataset (PCA or LDA axes).
    Scatter(RenderScatterArgs),
    /// ROC curve plot.
    Roc(RenderRocArgs),
    /// Call-density heatmap with recorder sites.
    Heatmap(RenderHeatmapArgs),
}

fn cmd_render(cmd: RenderCommand) -> Result<(), CliError> {
    match cmd {
        RenderCommand::Spectrogram(args) => cmd_render_spectrogram(args),
        RenderCommand::Overlay(args) => cmd_render_overlay(args),
        RenderCommand::Scatter(args) => cmd_render_scatter(args),
        RenderCommand::Roc(args) => cmd_render_roc(args),
        RenderCommand::Heatmap(args) => cmd_render_heatmap(args),
    }
}

#[derive(Args)]
struct ImageArgs {
    /// Image width in pixels.
    #[arg(long, default_value_t = 640)]
    width: usize,
    /// Image height in pixels.
    #[arg(long, default_value_t = 480)]
    height: usize,
    /// Power floor in dB below peak mapped to black.
    #[arg(long, default_value_t = -80.0, allow_hyphen_values = true)]
    db_floor: f64,
}

impl ImageArgs {
    fn to_spec(&self, format: ImageFormat) -> Result<ImageSpec, CliError> {
        if !(self.db_floor < 0.0) {
            return Err(CliError::Usage(format!(
                "--db-floor {} must be negative",
                self.db_floor
            )));
        }
        let spec = ImageSpec {
            width_px: self.width,
            height_px: self.height,
            db_floor: self.db_floor,
            format,
        };
        spec.check().or_data()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct RenderSpectrogramArgs {
    /// WAV recording to render.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output image path (.pgm or .svg).
    #[arg(long)]
    out: PathBuf,
    /// Span start within the recording, in seconds.
    #[arg(long, default_value_t = 0.0)]
    start: f64,
    /// Span length in seconds; the whole remainder when absent.
    #[arg(long)]
    dur: Option<f64>,
    /// Emit SVG instead of PGM.
    #[arg(long)]
    svg: bool,
    #[command(flatten)]
    image: ImageArgs,
}

fn decode_span(input: &Path, start: f64, dur: Option<f64>) -> Result<audio::AudioClip, CliError> {
    if !(start >= 0.0) {
        return Err(CliError::Usage("--start must be nonnegative".into()));
    }
    let info = audio::wav_info(input).or_data()?;
    let dur = match dur {
        Some(d) if d > 0.0 => d,
        Some(d) => {
            return Err(CliError::Usage(format!("--dur {d} must be positive")));
        }
        None => (info.duration_s() - start).max(1e-9),
    };
    audio::decode_wav_span(input, ChannelPolicy::FirstChannel, start, dur).or_data()
}

fn cmd_render_spectrogram(args: RenderSpectrogramArgs) -> Result<(), CliError> {
    let format = if args.svg { ImageFormat::Svg } else { ImageFormat::Pgm };
    let img = args.image.to_spec(format)?;
    let clip = decode_span(&args.input, args.start, args.dur)?;
    let spec = dsp::spectrogram(&clip, &SpectrogramConfig::default()).or_data()?;
    let bytes = render::render_spectrogram(&spec, &img).or_data()?;
    std::fs::write(&args.out, bytes)
        .map_err(|e| CliError::Data(format!("writing {}: {e}", args.out.display())))
}

#[derive(Args)]
struct RenderOverlayArgs {
    /// WAV recording to render.
    #[arg(long = "in")]
    input: PathBuf,
    /// Event CSV; rows from other sources are ignored.
    #[arg(long)]
    events: PathBuf,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
    /// Span start within the recording, in seconds.
    #[arg(long, default_value_t = 0.0)]
    start: f64,
    /// Span length in seconds; the whole remainder when absent.
    #[arg(long)]
    dur: Option<f64>,
    /// Low edge of the outlined band in Hz.
    #[arg(long, default_value_t = 400.0)]
    fmin: f64,
    /// High edge of the outlined band in Hz.
    #[arg(long, default_value_t = 1500.0)]
    fmax: f64,
    #[command(flatten)]
    image: ImageArgs,
}

fn cmd_render_overlay(args: RenderOverlayArgs) -> Result<(), CliError> {
    if !(args.fmin >= 0.0 && args.fmax > args.fmin) {
        return Err(CliError::Usage(format!(
            "band {}..{} Hz is not a valid frequency range",
            args.fmin, args.fmax
        )));
    }
    let img = args.image.to_spec(ImageFormat::Svg)?;
    let clip = decode_span(&args.input, args.start, args.dur)?;
    let spec = dsp::spectrogram(&clip, &SpectrogramConfig::default()).or_data()?;
    let all = detect::read_events_csv(&args.events).or_data()?;
    let span_start = spec.start_offset_s;
    let span_end = span_start + spec.span_s();
    let source = args.input.display().to_string();
    let events: Vec<SoundEvent> = all
        .into_iter()
        .filter(|e| {
            e.source == source && e.start_s >= span_start - 1e-9 && e.end_s <= span_end + 1e-9
        })
        .collect();
    let bytes =
        render::render_events_overlay(&spec, &events, (args.fmin, args.fmax), &img).or_data()?;
    std::fs::write(&args.out, bytes)
        .map_err(|e| CliError::Data(format!("writing {}: {e}", args.out.display())))
}

#[derive(Copy, Clone, ValueEnum)]
enum ScatterMethod {
    Pca,
    Lda,
}

#[derive(Args)]
struct RenderScatterArgs {
    /// CSV of `path,label` rows naming labeled clips.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory whose subdirectories are class names holding clips.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Projection axes: pca or lda.
    #[arg(long, value_enum, default_value_t = ScatterMethod::Lda)]
    method: ScatterMethod,
    /// Covariance shrinkage toward the identity (LDA), in [0, 1].
    #[arg(long, default_value_t = 0.1)]
    shrinkage: f64,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    mfcc: MfccArgs,
}

fn cmd_render_scatter(args: RenderScatterArgs) -> Result<(), CliError> {
    let source = dataset_source(args.manifest.as_deref(), args.tree.as_deref())?;
    let cfg = args.mfcc.to_config()?;
    let report = assemble_dataset(&source, &cfg, FeatureMode::Fixed).or_data()?;
    warn_skipped(&report.skipped);
    let ds = &report.dataset;

    let (coords, x_label, y_label): (Vec<(f64, f64)>, String, String) = match args.method {
        ScatterMethod::Pca => {
            let p = learn::pca(ds, 2).or_data()?;
            let coords = ds
                .vectors
                .iter()
                .map(|v| {
                    let proj = p.project(&v.values);
                    (proj[0], proj.get(1).copied().unwrap_or(0.0))
                })
                .collect();
            let pct = |i: usize| p.explained_variance.get(i).copied().unwrap_or(0.0) * 100.0;
            (
                coords,
                format!("PC 1 ({:.1}%)", pct(0)),
                format!("PC 2 ({:.1}%)", pct(1)),
            )
        }
        ScatterMethod::Lda => {
            let model = train_lda(ds, args.shrinkage).or_data()?;
            let ModelParameters::Lda(p) = &model.params else {
                unreachable!("train_lda returns LDA parameters");
            };
            let coords = ds
                .vectors
                .iter()
                .map(|v| {
                    let proj = p.project(&v.values);
                    (proj[0], proj.get(1).copied().unwrap_or(0.0))
                })
                .collect();
            (coords, "LD 1".into(), "LD 2".into())
        }
    };

    let points: Vec<ScatterPoint> = coords
        .into_iter()
        .zip(&ds.vectors)
        .map(|((x, y), v)| ScatterPoint {
            x,
            y,
            class: v.label.clone().unwrap_or_else(|| "unlabeled".into()),
        })
        .collect();
    let bytes = render::render_scatter(&points, &x_label, &y_label).or_data()?;
    std::fs::write(&args.out, bytes)
        .map_err(|e| CliError::Data(format!("writing {}: {e}", args.out.display())))
}

#[derive(Args)]
struct RenderRocArgs {
    /// CSV of `score,is_call` rows.
    #[arg(long)]
    scores: PathBuf,
    /// Comma-separated probability thresholds, each in [0, 1].
    #[arg(long)]
    thresholds: Option<String>,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_render_roc(args: RenderRocArgs) -> Result<(), CliError> {
    let points = roc_from_files(&args.scores, args.thresholds.as_deref())?;
    let bytes = render::render_roc(&points).or_data()?;
    std::fs::write(&args.out, bytes)
        .map_err(|e| CliError::Data(format!("writing {}: {e}", args.out.display())))
}

#[derive(Args)]
struct RenderHeatmapArgs {
    #[command(flatten)]
    density: DensityArgs,
}

fn cmd_render_heatmap(args: RenderHeatmapArgs) -> Result<(), CliError> {
    let out = args
        .density
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("--out is required for heatmap rendering".into()))?;
    let products = density_from_files(&args.density)?;
    let bytes = render::render_heatmap(&products.grid, &products.sites).or_data()?;
    std::fs::write(&out, bytes)
        .map_err(|e| CliError::Data(format!("writing {}: {e}", out.display())))
}

// ------------------------------------------------------------------- pipeline

#[derive(Args)]
struct PipelineArgs {
    /// WAV recordings to process.
    #[arg(required = true)]
    recordings: Vec<PathBuf>,
    /// `key = value` config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Detector: energy or window_classifier.
    #[arg(long)]
    detector: Option<String>,
    /// Trained event-classifier JSON (fixed mode).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Train the event classifier from this `path,label` manifest.
    #[arg(long)]
    train_manifest: Option<PathBuf>,
    /// Classifier family when training from a manifest.
    #[arg(long)]
    model_kind: Option<ModelKindArg>,
    /// Frames-mode model JSON for the window-classifier detector.
    #[arg(long)]
    window_model: Option<PathBuf>,
    /// Only events classified as this class are kept.
    #[arg(long)]
    target_class: Option<String>,
    /// Events below this classified probability are dropped.
    #[arg(long)]
    prob_threshold: Option<f64>,
    /// Window probability threshold for the window-classifier detector.
    #[arg(long)]
    window_prob_threshold: Option<f64>,
    /// Noise-floor quantile for the energy threshold, in [0, 1].
    #[arg(long)]
    quantile: Option<f64>,
    /// Low edge of the detection band in Hz.
    #[arg(long)]
    fmin: Option<f64>,
    /// High edge of the detection band in Hz.
    #[arg(long)]
    fmax: Option<f64>,
    /// Shortest reported event in seconds.
    #[arg(long)]
    min_dur: Option<f64>,
    /// Sub-threshold windows bridged inside an event.
    #[arg(long)]
    max_gap: Option<usize>,
    /// Output directory for events.csv, summary.json, and extras.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cut a WAV clip per kept event.
    #[arg(long)]
    emit_clips: bool,
    /// Write the feature vector per kept event to features.csv.
    #[arg(long)]
    emit_feature_table: bool,
    /// Segment length for bounded-memory processing, in seconds.
    #[arg(long)]
    segment_s: Option<f64>,
    /// Worker-pool width; defaults from PAMKIT_WORKERS.
    #[arg(long)]
    workers: Option<usize>,
    /// Seed recorded in the run summary and used when training.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Resolves each setting as flag, then config-file entry, then default.
struct Resolver {
    map: BTreeMap<String, String>,
}

impl Resolver {
    fn value<T: FromStr + Clone>(
        &self,
        key: &str,
        flag: Option<&T>,
        default: T,
    ) -> Result<T, CliError> {
        Ok(self.optional(key, flag)?.unwrap_or(default))
    }

    fn optional<T: FromStr + Clone>(
        &self,
        key: &str,
        flag: Option<&T>,
    ) -> Result<Option<T>, CliError> {
        if let Some(v) = flag {
            return Ok(Some(v.clone()));
        }
        match self.map.get(key) {
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                CliError::Usage(format!("config key '{key}' has unusable value '{raw}'"))
            }),
            None => Ok(None),
        }
    }

    /// Boolean switches: the flag can only turn the setting on, the
    /// config file supplies true/false otherwise.
    fn switch(&self, key: &str, set: bool) -> Result<bool, CliError> {
        if set {
            return Ok(true);
        }
        self.value(key, None, false)
    }
}

fn cmd_pipeline(args: PipelineArgs) -> Result<u8, CliError> {
    let map = match &args.config {
        Some(path) => config::read_config(path).or_data()?,
        None => BTreeMap::new(),
    };
    let r = Resolver { map };

    let detector_raw = r.value("detector", args.detector.as_ref(), "energy".to_string())?;
    let detector: DetectorKind = detector_raw
        .parse()
        .map_err(|e: String| CliError::Usage(e))?;
    let target_class = r
        .optional("target_class", args.target_class.as_ref())?
        .ok_or_else(|| CliError::Usage("--target-class is required".into()))?;

    let model_path = r.optional("model", args.model.as_ref())?;
    let train_manifest = r.optional("train_manifest", args.train_manifest.as_ref())?;
    let model = match (&model_path, &train_manifest) {
        (Some(path), None) => load_model(path).or_data()?,
        (None, Some(manifest)) => {
            let kind = match args.model_kind {
                Some(k) => k,
                None => match r.map.get("model_kind") {
                    Some(raw) => raw
                        .parse()
                        .map_err(|e: String| CliError::Usage(format!("config key 'model_kind': {e}")))?,
                    None => ModelKindArg::Gmm,
                },
            };
            let report =
                assemble_dataset(manifest, &MfccConfig::default(), FeatureMode::Fixed).or_data()?;
            warn_skipped(&report.skipped);
            let hyper = TrainHyperArgs {
                k_components: 2,
                lambda: 1e-3,
                epochs: 200,
                hidden: 16,
                learning_rate: 0.3,
                shrinkage: 0.1,
            };
            train_model(kind, &report.dataset, &hyper, args.seed)?
        }
        _ => {
            return Err(CliError::Usage(
                "provide exactly one of --model and --train-manifest".into(),
            ));
        }
    };

    let mut cfg = PipelineConfig::new(
        model,
        target_class,
        r.value("out", args.out.as_ref(), PathBuf::from("pamkit-out"))?,
    );
    cfg.detector = detector;
    cfg.seed = args.seed;

    if let Some(path) = r.optional("window_model", args.window_model.as_ref())? {
        let wm = load_model(&path).or_data()?;
        cfg.window.mfcc = wm.feature_config.mfcc;
        cfg.window_model = Some(wm);
    }

    cfg.bled.quantile = r.value("quantile", args.quantile.as_ref(), cfg.bled.quantile)?;
    cfg.bled.fmin_hz = r.value("fmin", args.fmin.as_ref(), cfg.bled.fmin_hz)?;
    cfg.bled.fmax_hz = r.value("fmax", args.fmax.as_ref(), cfg.bled.fmax_hz)?;
    cfg.bled.min_duration_s = r.value("min_dur", args.min_dur.as_ref(), cfg.bled.min_duration_s)?;
    cfg.bled.max_gap_windows = r.value("max_gap", args.max_gap.as_ref(), cfg.bled.max_gap_windows)?;
    cfg.window.min_duration_s = cfg.bled.min_duration_s;
    cfg.window.prob_threshold = r.value(
        "window_prob_threshold",
        args.window_prob_threshold.as_ref(),
        cfg.window.prob_threshold,
    )?;
    cfg.prob_threshold = r.value(
        "prob_threshold",
        args.prob_threshold.as_ref(),
        cfg.prob_threshold,
    )?;
    cfg.emit_clips = r.switch("emit_clips", args.emit_clips)?;
    cfg.emit_feature_table = r.switch("emit_feature_table", args.emit_feature_table)?;
    cfg.segment_s = r.value("segment_s", args.segment_s.as_ref(), cfg.segment_s)?;
    cfg.workers = r.value("workers", args.workers.as_ref(), default_workers())?;

    if !(0.0..=1.0).contains(&cfg.bled.quantile) {
        return Err(CliError::Usage(format!(
            "quantile {} must lie in [0, 1]",
            cfg.bled.quantile
        )));
    }
    if !(cfg.bled.fmin_hz >= 0.0 && cfg.bled.fmax_hz > cfg.bled.fmin_hz) {
        return Err(CliError::Usage(format!(
            "band {}..{} Hz is not a valid frequency range",
            cfg.bled.fmin_hz, cfg.bled.fmax_hz
        )));
    }
    if !(cfg.bled.min_duration_s > 0.0) {
        return Err(CliError::Usage("min_dur must be positive".into()));
    }
    for (name, v) in [
        ("prob_threshold", cfg.prob_threshold),
        ("window_prob_threshold", cfg.window.prob_threshold),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::Usage(format!("{name} {v} must lie in [0, 1]")));
        }
    }
    if !(cfg.segment_s > 0.0) {
        return Err(CliError::Usage("segment_s must be positive".into()));
    }
    if cfg.workers == 0 {
        return Err(CliError::Usage("workers must be at least 1".into()));
    }

    let summary = match pipeline::run_pipeline(&args.recordings, &cfg) {
        Ok(summary) => summary,
        Err(PipelineError::NoRecordings) => {
            return Err(CliError::Usage("no recordings given".into()));
        }
        Err(e @ (PipelineError::MissingWindowModel | PipelineError::SegmentTooShort { .. })) => {
            return Err(CliError::Usage(chain(&e)));
        }
        Err(e) => return Err(CliError::Data(chain(&e))),
    };

    println!(
        "{} events across {} recordings ({} failed), outputs in {}",
        summary.total_events,
        summary.recordings.len(),
        summary.failed,
        cfg.output_dir.display()
    );
    for rec in &summary.recordings {
        if let Some(err) = &rec.error {
            eprintln!("failed: {}: {err}", rec.path);
        }
    }
    Ok(if summary.failed > 0 { 3 } else { 0 })
}
