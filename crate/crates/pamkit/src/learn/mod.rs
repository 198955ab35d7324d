//! Labeled-dataset assembly, train/test splitting, four trainable
//! classifiers (diagonal Gaussian mixtures, a linear SVM with Platt
//! calibration, a single-hidden-layer MLP, and shrinkage LDA), PCA,
//! confusion matrices, and versioned model persistence.
//!
//! Training is single-threaded and fully deterministic: every
//! stochastic step derives its stream from the run seed plus a stage
//! tag. Trained models are immutable and safe to share across threads
//! for concurrent [`classify`] calls.

mod gmm;
mod lda;
mod mlp;
mod pca;
mod svm;

pub use gmm::{train_gmm, GmmClassModel, GmmParams};
pub use lda::{train_lda, LdaParams};
pub use mlp::{mlp_loss_and_gradient, train_mlp, MlpParams, MlpWeights};
pub use pca::{pca, PcaResult};
pub use svm::{train_svm, SvmParams};

use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{decode_wav, ChannelPolicy};
use crate::dsp::{mfcc_fixed, mfcc_frames, FeatureVector, MfccConfig};

/// Current on-disk model schema. Bumped whenever the JSON layout
/// changes incompatibly.
pub const MODEL_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("vectors of mixed lengths: expected {expected}, found {found}")]
    MixedVectorLengths { expected: usize, found: usize },
    #[error("dataset vector is missing a label")]
    UnlabeledVector,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("need at least 2 classes, found {found}")]
    TooFewClasses { found: usize },
    #[error("class '{class}' has {n} samples, need at least {needed}")]
    ClassTooSmall { class: String, n: usize, needed: usize },
    #[error("class '{class}' is degenerate: all vectors identical")]
    DegenerateClass { class: String },
    #[error("SVM training requires exactly 2 classes, found {found}")]
    NotBinary { found: usize },
    #[error("pooled covariance is singular; raise shrinkage above zero")]
    SingularCovariance,
    #[error("requested {requested} components, at most {max} available")]
    TooManyComponents { requested: usize, max: usize },
    #[error("feature vector length {found} does not match the model's expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("dataset classes do not match the model's classes")]
    ClassMismatch,
    #[error("feature config mismatch: {reason}")]
    FeatureConfigMismatch { reason: String },
    #[error("model schema version {found} is not supported (expected {MODEL_SCHEMA_VERSION})")]
    SchemaVersionMismatch { found: u64 },
    #[error("corrupt model file: {reason}")]
    CorruptModel { reason: String },
    #[error("{path}:{line}: malformed CSV: {reason}")]
    MalformedCsv {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Which MFCC extraction mode produced a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// One fixed-length vector per clip ([`mfcc_fixed`]).
    Fixed,
    /// One vector of `n_cep` coefficients per window ([`mfcc_frames`]).
    Frames,
}

impl std::fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureMode::Fixed => "fixed",
            FeatureMode::Frames => "frames",
        })
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(FeatureMode::Fixed),
            "frames" => Ok(FeatureMode::Frames),
            other => Err(format!("unknown feature mode '{other}', expected fixed or frames")),
        }
    }
}

/// Exact featurization recipe a dataset or model was built with.
/// Stored alongside trained parameters so a model is never applied to
/// features extracted differently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureFingerprint {
    pub mode: FeatureMode,
    pub mfcc: MfccConfig,
}

/// Feature vectors with labels, the distinct class names, and the
/// featurization fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub vectors: Vec<FeatureVector>,
    /// Distinct labels in sorted order.
    pub classes: Vec<String>,
    pub feature_config: FeatureFingerprint,
}

impl LabeledDataset {
    /// Builds a dataset from labeled vectors, deriving the class list.
    pub fn from_vectors(
        vectors: Vec<FeatureVector>,
        feature_config: FeatureFingerprint,
    ) -> Result<Self, LearnError> {
        if vectors.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        let expected = vectors[0].len();
        let mut classes: Vec<String> = Vec::new();
        for v in &vectors {
            if v.len() != expected {
                return Err(LearnError::MixedVectorLengths {
                    expected,
                    found: v.len(),
                });
            }
            let label = v.label.as_ref().ok_or(LearnError::UnlabeledVector)?;
            if !classes.contains(label) {
                classes.push(label.clone());
            }
        }
        classes.sort();
        Ok(LabeledDataset {
            vectors,
            classes,
            feature_config,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.vectors.first().map_or(0, FeatureVector::len)
    }

    /// Label of each vector as an index into `classes`.
    pub fn label_indices(&self) -> Vec<usize> {
        self.vectors
            .iter()
            .map(|v| {
                let label = v.label.as_deref().expect("dataset vectors are labeled");
                self.classes.iter().position(|c| c == label).expect("label in classes")
            })
            .collect()
    }

    /// Indices of the vectors belonging to `class`.
    fn class_rows(&self, class: &str) -> Vec<usize> {
        self.vectors
            .iter()
            .enumerate()
            .filter(|(_, v)| v.label.as_deref() == Some(class))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Dataset assembly result: the dataset plus any clips that were
/// skipped because they could not be decoded or featurized.
#[derive(Debug)]
pub struct AssembleReport {
    pub dataset: LabeledDataset,
    pub skipped: Vec<(PathBuf, String)>,
}

/// Rows of a `path,label` manifest.
pub type ManifestRows = Vec<(PathBuf, String)>;

/// Parses manifest CSV text with a `path,label` header. Relative
/// paths are returned as written; [`read_manifest`] resolves them.
pub fn parse_manifest_text(text: &str, origin: &Path) -> Result<ManifestRows, LearnError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    {
        let headers = reader.headers().map_err(|e| csv_error(origin, &e))?;
        if headers.len() < 2 || &headers[0] != "path" || &headers[1] != "label" {
            return Err(LearnError::MalformedCsv {
                path: origin.to_path_buf(),
                line: 1,
                reason: "expected header 'path,label'".into(),
            });
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(origin, &e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 2 || record[0].is_empty() || record[1].is_empty() {
            return Err(LearnError::MalformedCsv {
                path: origin.to_path_buf(),
                line,
                reason: "expected 'path,label'".into(),
            });
        }
        rows.push((PathBuf::from(&record[0]), record[1].to_string()));
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: &csv::Error) -> LearnError {
    let line = match e.position() {
        Some(p) => p.line(),
        None => 0,
    };
    LearnError::MalformedCsv {
        path: path.to_path_buf(),
        line,
        reason: e.to_string(),
    }
}

/// Reads a `path,label` manifest; relative clip paths are resolved
/// against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<ManifestRows, LearnError> {
    let text = std::fs::read_to_string(path).map_err(|e| LearnError::IoFailure {
        path: path.to_path_buf(),
        source: e,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let rows = parse_manifest_text(&text, path)?;
    Ok(rows
        .into_iter()
        .map(|(p, label)| {
            let resolved = if p.is_absolute() { p } else { base.join(p) };
            (resolved, label)
        })
        .collect())
}

/// Collects `(clip, label)` pairs from a directory laid out as
/// `<root>/<label>/*.wav`, sorted for determinism.
fn scan_labeled_tree(root: &Path) -> Result<ManifestRows, LearnError> {
    let io_err = |e: io::Error| LearnError::IoFailure {
        path: root.to_path_buf(),
        source: e,
    };
    let mut rows = Vec::new();
    let mut label_dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(io_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    label_dirs.sort();
    for dir in label_dirs {
        let label = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut wavs: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
            .collect();
        wavs.sort();
        for wav in wavs {
            rows.push((wav, label.clone()));
        }
    }
    Ok(rows)
}

/// Builds a labeled dataset from a manifest CSV or a labeled
/// directory tree. Clips that cannot be decoded or featurized are
/// skipped and reported, not fatal.
///
/// In [`FeatureMode::Fixed`] each clip yields one vector; in
/// [`FeatureMode::Frames`] every analysis window yields one vector
/// carrying the clip's label.
pub fn assemble_dataset(
    source: &Path,
    cfg: &MfccConfig,
    mode: FeatureMode,
) -> Result<AssembleReport, LearnError> {
    let mut rows = if source.is_dir() {
        scan_labeled_tree(source)?
    } else {
        read_manifest(source)?
    };
    rows.sort();

    let mut vectors = Vec::new();
    let mut skipped = Vec::new();
    for (path, label) in rows {
        let clip = match decode_wav(&path, ChannelPolicy::FirstChannel) {
            Ok(c) => c,
            Err(e) => {
                skipped.push((path, e.to_string()));
                continue;
            }
        };
        match mode {
            FeatureMode::Fixed => match mfcc_fixed(&clip, cfg) {
                Ok(mut v) => {
                    v.label = Some(label);
                    vectors.push(v);
                }
                Err(e) => skipped.push((path, e.to_string())),
            },
            FeatureMode::Frames => match mfcc_frames(&clip, cfg) {
                Ok(frames) => {
                    for row in frames.coefficients {
                        vectors.push(FeatureVector {
                            values: row,
                            label: Some(label.clone()),
                        });
                    }
                }
                Err(e) => skipped.push((path, e.to_string())),
            },
        }
    }

    let dataset = LabeledDataset::from_vectors(
        vectors,
        FeatureFingerprint { mode, mfcc: *cfg },
    )?;
    Ok(AssembleReport { dataset, skipped })
}

/// Stratified train/test split: per class, `ceil(fraction * n)`
/// shuffled samples go to train and the rest to test. Both splits
/// keep the parent's class list, and the same seed reproduces the
/// same split.
pub fn split_train_test(
    ds: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset), LearnError> {
    assert!(
        train_fraction > 0.0 && train_fraction < 1.0,
        "train_fraction must lie strictly between 0 and 1"
    );
    use rand::seq::SliceRandom;
    let mut rng = crate::rng::derive_rng(seed, "split");

    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for class in &ds.classes {
        let mut rows = ds.class_rows(class);
        if rows.len() < 2 {
            return Err(LearnError::ClassTooSmall {
                class: class.clone(),
                n: rows.len(),
                needed: 2,
            });
        }
        rows.shuffle(&mut rng);
        let n_train = (train_fraction * rows.len() as f64).ceil() as usize;
        train_idx.extend_from_slice(&rows[..n_train]);
        test_idx.extend_from_slice(&rows[n_train..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let pick = |idx: &[usize]| LabeledDataset {
        vectors: idx.iter().map(|&i| ds.vectors[i].clone()).collect(),
        classes: ds.classes.clone(),
        feature_config: ds.feature_config,
    };
    Ok((pick(&train_idx), pick(&test_idx)))
}

/// Per-dimension standardization fitted on training data. Dimensions
/// whose standard deviation is numerically zero are dropped so they
/// cannot poison the scaled space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    /// Length of the raw input vectors.
    pub input_len: usize,
    /// Raw dimensions that survived the zero-variance filter.
    pub kept_dims: Vec<usize>,
    /// Mean of each kept dimension.
    pub mean: Vec<f64>,
    /// Standard deviation of each kept dimension.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[&[f64]]) -> Standardizer {
        assert!(!rows.is_empty(), "cannot standardize an empty dataset");
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for row in rows {
            for (m, &x) in mean.iter_mut().zip(*row) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for row in rows {
            for ((v, &x), m) in var.iter_mut().zip(*row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let mut kept_dims = Vec::new();
        let mut kept_mean = Vec::new();
        let mut kept_std = Vec::new();
        for j in 0..d {
            let std = (var[j] / n).sqrt();
            if std > 1e-9 * (1.0 + mean[j].abs()) {
                kept_dims.push(j);
                kept_mean.push(mean[j]);
                kept_std.push(std);
            }
        }
        Standardizer {
            input_len: d,
            kept_dims,
            mean: kept_mean,
            std: kept_std,
        }
    }

    /// Number of dimensions dropped for having no variance.
    pub fn dropped_dims(&self) -> usize {
        self.input_len - self.kept_dims.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.kept_dims
            .iter()
            .enumerate()
            .map(|(i, &j)| (v[j] - self.mean[i]) / self.std[i])
            .collect()
    }
}

/// Classifier family of a [`TrainedModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gmm,
    Svm,
    Mlp,
    Lda,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Gmm => "gmm",
            ModelKind::Svm => "svm",
            ModelKind::Mlp => "mlp",
            ModelKind::Lda => "lda",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gmm" => Ok(ModelKind::Gmm),
            "svm" => Ok(ModelKind::Svm),
            "mlp" => Ok(ModelKind::Mlp),
            "lda" => Ok(ModelKind::Lda),
            other => Err(format!("unknown model kind '{other}', expected gmm, svm, mlp, or lda")),
        }
    }
}

/// Kind-specific trained parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "lowercase")]
pub enum ModelParameters {
    Gmm(GmmParams),
    Svm(SvmParams),
    Mlp(MlpParams),
    Lda(LdaParams),
}

/// A persisted classifier bundled with the featurization recipe it
/// was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub classes: Vec<String>,
    pub feature_config: FeatureFingerprint,
    pub training_seed: u64,
    #[serde(flatten)]
    pub params: ModelParameters,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParameters::Gmm(_) => ModelKind::Gmm,
            ModelParameters::Svm(_) => ModelKind::Svm,
            ModelParameters::Mlp(_) => ModelKind::Mlp,
            ModelParameters::Lda(_) => ModelKind::Lda,
        }
    }

    /// Raw feature vector length the model expects.
    pub fn input_len(&self) -> usize {
        match &self.params {
            ModelParameters::Gmm(p) => p.input_len(),
            ModelParameters::Svm(p) => p.standardizer.input_len,
            ModelParameters::Mlp(p) => p.standardizer.input_len,
            ModelParameters::Lda(p) => p.input_len,
        }
    }
}

/// Probability of each class for one input, in class order. The
/// probabilities are nonnegative and sum to 1.
pub fn classify_scores(model: &TrainedModel, v: &FeatureVector) -> Result<Vec<f64>, LearnError> {
    if v.len() != model.input_len() {
        return Err(LearnError::LengthMismatch {
            expected: model.input_len(),
            found: v.len(),
        });
    }
    let scores = match &model.params {
        ModelParameters::Gmm(p) => p.class_probabilities(&v.values),
        ModelParameters::Svm(p) => {
            let p1 = p.probability_of_second_class(&v.values);
            vec![1.0 - p1, p1]
        }
        ModelParameters::Mlp(p) => p.class_probabilities(&v.values),
        ModelParameters::Lda(p) => p.class_probabilities(&v.values),
    };
    Ok(scores)
}

/// Predicts the class of one feature vector, returning the class name
/// and the probability assigned to it. Ties break toward class order.
pub fn classify(model: &TrainedModel, v: &FeatureVector) -> Result<(String, f64), LearnError> {
    let scores = classify_scores(model, v)?;
    // SVM decision semantics: second class wins exactly when its
    // calibrated probability reaches 0.5.
    if let ModelParameters::Svm(_) = &model.params {
        let p1 = scores[1];
        return Ok(if p1 >= 0.5 {
            (model.classes[1].clone(), p1)
        } else {
            (model.classes[0].clone(), 1.0 - p1)
        });
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok((model.classes[best].clone(), scores[best]))
}

/// Predicted-versus-actual counts: `counts[predicted][actual]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Percentage of evaluated samples on the diagonal, in [0, 100].
    pub fn percent_correct(&self) -> f64 {
        let correct: usize = (0..self.classes.len()).map(|i| self.counts[i][i]).sum();
        100.0 * correct as f64 / self.total() as f64
    }
}

/// Classifies every vector of `test` and tallies predicted versus
/// actual counts.
pub fn confusion_matrix(model: &TrainedModel, test: &LabeledDataset) -> Result<ConfusionMatrix, LearnError> {
    if test.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    if test.classes != model.classes {
        return Err(LearnError::ClassMismatch);
    }
    let c = model.classes.len();
    let mut counts = vec![vec![0usize; c]; c];
    let actuals = test.label_indices();
    for (v, &actual) in test.vectors.iter().zip(&actuals) {
        let (predicted, _) = classify(model, v)?;
        let pred_idx = model.classes.iter().position(|x| *x == predicted).unwrap();
        counts[pred_idx][actual] += 1;
    }
    Ok(ConfusionMatrix {
        classes: model.classes.clone(),
        counts,
    })
}

#[derive(Serialize)]
struct VersionedModelRef<'a> {
    schema_version: u64,
    #[serde(flatten)]
    model: &'a TrainedModel,
}

/// Serializes a model to its versioned JSON document.
pub fn model_to_json(model: &TrainedModel) -> String {
    serde_json::to_string_pretty(&VersionedModelRef {
        schema_version: MODEL_SCHEMA_VERSION,
        model,
    })
    .expect("model serialization cannot fail")
}

/// Parses a versioned model document. The schema version is checked
/// before anything else so version skew is reported as such rather
/// than as arbitrary field errors.
pub fn model_from_json(text: &str) -> Result<TrainedModel, LearnError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| LearnError::CorruptModel {
        reason: e.to_string(),
    })?;
    let version = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| LearnError::CorruptModel {
            reason: "missing schema_version".into(),
        })?;
    if version != MODEL_SCHEMA_VERSION {
        return Err(LearnError::SchemaVersionMismatch { found: version });
    }
    serde_json::from_value(value).map_err(|e| LearnError::CorruptModel {
        reason: e.to_string(),
    })
}

/// Writes a model as versioned JSON.
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), LearnError> {
    std::fs::write(path, model_to_json(model)).map_err(|e| LearnError::IoFailure {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Loads a model written by [`save_model`].
pub fn load_model(path: &Path) -> Result<TrainedModel, LearnError> {
    let text = std::fs::read_to_string(path).map_err(|e| LearnError::IoFailure {
        path: path.to_path_buf(),
        source: e,
    })?;
    model_from_json(&text)
}

/// Writes a dataset as CSV: one row per vector, feature columns
/// `f0..f{d-1}` followed by the label.
pub fn write_dataset_csv(ds: &LabeledDataset, out: &mut dyn io::Write) -> io::Result<()> {
    let d = ds.n_features();
    let mut header: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    writeln!(out, "{}", header.join(","))?;
    for v in &ds.vectors {
        let mut row: Vec<String> = v.values.iter().map(f64::to_string).collect();
        row.push(v.label.clone().unwrap_or_default());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Numerically stable `log(sum(exp(xs)))`.
pub(crate) fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Softmax over raw scores; output sums to 1.
pub(crate) fn softmax(xs: &[f64]) -> Vec<f64> {
    let lse = logsumexp(xs);
    xs.iter().map(|x| (x - lse).exp()).collect()
}

/// Log-density of a diagonal Gaussian at `x`.
pub(crate) fn log_diag_gaussian(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        let d = x[i] - mean[i];
        acc += (std::f64::consts::TAU * var[i]).ln() + d * d / var[i];
    }
    -0.5 * acc
}
