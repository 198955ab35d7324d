//! End-to-end detection runs: decode recordings in bounded segments,
//! detect candidate events, classify each whole event, keep confident
//! target-class hits, and write the combined outputs.
//!
//! Long recordings are processed in segments of `segment_s` seconds so
//! a two-hour file never needs a full-length feature matrix in memory.
//! Consecutive segments overlap by the detector's minimum event
//! duration and every segment start snaps down onto the detector's
//! hop grid, so analysis frames in the overlap line up sample-exactly
//! with a whole-file run. An event belongs to the earliest segment
//! whose ownership interval `[segment start, next segment start)`
//! contains the event start, which keeps events from being split or
//! double-counted at segment boundaries.

use std::collections::VecDeque;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{
    decode_wav_span, encode_wav, event_clip_filename, slice_clip, wav_info, ChannelPolicy,
};
use crate::detect::{
    bled_detect, window_classifier_detect, write_events_file, BledConfig, DetectError,
    SoundEvent, WindowClassifierConfig,
};
use crate::dsp::mfcc_fixed;
use crate::learn::{classify, FeatureMode, LearnError, TrainedModel};

/// Default segment length: two hours, the usual recorder file size.
pub const DEFAULT_SEGMENT_S: f64 = 7200.0;

/// Environment variable supplying the default worker-pool width.
pub const WORKERS_ENV: &str = "PAMKIT_WORKERS";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no recordings to process")]
    NoRecordings,
    #[error("the window-classifier detector needs a frames-mode window model")]
    MissingWindowModel,
    #[error(
        "segment_s = {segment_s} s is too short; it must exceed twice the detector's min_duration_s ({min_s} s)"
    )]
    SegmentTooShort { segment_s: f64, min_s: f64 },
    #[error("all {count} recordings failed; first error: {first}")]
    AllFailed { count: usize, first: String },
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error("failed to write {path}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Which detector proposes candidate events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Energy,
    WindowClassifier,
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorKind::Energy => "energy",
            DetectorKind::WindowClassifier => "window_classifier",
        })
    }
}

impl FromStr for DetectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "energy" => Ok(DetectorKind::Energy),
            "window_classifier" => Ok(DetectorKind::WindowClassifier),
            other => Err(format!(
                "unknown detector '{other}', expected 'energy' or 'window_classifier'"
            )),
        }
    }
}

/// Everything one detection run needs besides the recording list.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub detector: DetectorKind,
    /// Classifies whole candidate events; must be a fixed-mode model.
    pub model: TrainedModel,
    /// Frames-mode model driving the window-classifier detector.
    pub window_model: Option<TrainedModel>,
    /// Events are kept only when classified as this class.
    pub target_class: String,
    pub bled: BledConfig,
    pub window: WindowClassifierConfig,
    /// Events below this classified probability are dropped.
    pub prob_threshold: f64,
    pub output_dir: PathBuf,
    pub emit_clips: bool,
    pub emit_feature_table: bool,
    pub segment_s: f64,
    /// Worker-pool width; at least 1.
    pub workers: usize,
    /// Recorded in the run summary so reruns can be reproduced.
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(model: TrainedModel, target_class: impl Into<String>, output_dir: impl Into<PathBuf>) -> Self {
        let target_class = target_class.into();
        PipelineConfig {
            detector: DetectorKind::Energy,
            model,
            window_model: None,
            window: WindowClassifierConfig::new(target_class.clone()),
            target_class,
            bled: BledConfig::default(),
            prob_threshold: 0.5,
            output_dir: output_dir.into(),
            emit_clips: false,
            emit_feature_table: false,
            segment_s: DEFAULT_SEGMENT_S,
            workers: default_workers(),
            seed: 0,
        }
    }

    /// Overlap between consecutive segments: the shortest event the
    /// chosen detector can emit.
    pub fn overlap_s(&self) -> f64 {
        match self.detector {
            DetectorKind::Energy => self.bled.min_duration_s,
            DetectorKind::WindowClassifier => self.window.min_duration_s,
        }
    }

    fn check(&self) -> Result<(), PipelineError> {
        assert!(
            (0.0..=1.0).contains(&self.prob_threshold),
            "prob_threshold must lie in [0, 1]"
        );
        assert!(self.workers >= 1, "workers must be at least 1");
        if self.model.feature_config.mode != FeatureMode::Fixed {
            return Err(LearnError::FeatureConfigMismatch {
                reason: format!(
                    "the event classifier must be a fixed-mode model, got {}",
                    self.model.feature_config.mode
                ),
            }
            .into());
        }
        if self.detector == DetectorKind::WindowClassifier && self.window_model.is_none() {
            return Err(PipelineError::MissingWindowModel);
        }
        let min_s = self.overlap_s();
        if self.segment_s <= 2.0 * min_s {
            return Err(PipelineError::SegmentTooShort {
                segment_s: self.segment_s,
                min_s,
            });
        }
        Ok(())
    }
}

fn workers_from(raw: Option<&str>) -> usize {
    raw.and_then(|v| v.parse().ok()).filter(|&n| n >= 1).unwrap_or(1)
}

/// Worker-pool width from the environment, defaulting to 1.
pub fn default_workers() -> usize {
    workers_from(std::env::var(WORKERS_ENV).ok().as_deref())
}

/// Per-recording entry in the run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingSummary {
    pub path: String,
    /// `ok` or `failed`.
    pub status: String,
    pub events: usize,
    /// Seconds of audio in the recording; 0 when it never decoded.
    pub audited_s: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Machine-readable account of one pipeline run, also written as
/// `summary.json` next to the event table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub detector: String,
    pub target_class: String,
    pub prob_threshold: f64,
    pub seed: u64,
    pub succeeded: usize,
    pub failed: usize,
    pub total_events: usize,
    pub recordings: Vec<RecordingSummary>,
}

struct FileRun {
    /// Kept events paired with the feature vector that classified them.
    events: Vec<(SoundEvent, Vec<f64>)>,
    audited_s: f64,
}

/// Detects, classifies, and filters one recording segment by segment.
/// Failures are reported as strings so one bad file cannot abort the
/// whole run.
fn process_recording(path: &Path, cfg: &PipelineConfig) -> Result<FileRun, String> {
    let err = |e: &dyn fmt::Display| e.to_string();
    let info = wav_info(path).map_err(|e| err(&e))?;
    let rate = f64::from(info.sample_rate_hz);
    let duration = info.duration_s();
    let hop_n = match cfg.detector {
        DetectorKind::Energy => cfg.bled.spectrogram.hop_samples() as u64,
        DetectorKind::WindowClassifier => (cfg.window.mfcc.win_s * rate).round().max(1.0) as u64,
    };
    let snap_down = |sec: f64| -> f64 {
        let frame = (sec * rate).round().max(0.0) as u64;
        (frame / hop_n * hop_n) as f64 / rate
    };
    let overlap_s = cfg.overlap_s();
    let clips_dir = cfg.output_dir.join("clips");

    let mut kept = Vec::new();
    let mut t = 0.0;
    loop {
        let segment = decode_wav_span(path, ChannelPolicy::FirstChannel, t, cfg.segment_s)
            .map_err(|e| err(&e))?;
        let detected = match cfg.detector {
            DetectorKind::Energy => bled_detect(&segment, &cfg.bled).map_err(|e| err(&e))?,
            DetectorKind::WindowClassifier => {
                let model = cfg.window_model.as_ref().expect("presence checked before the run");
                window_classifier_detect(&segment, model, &cfg.window).map_err(|e| err(&e))?
            }
        };
        let last_segment = t + cfg.segment_s >= duration - 1e-9;
        let t_next = snap_down(t + cfg.segment_s - overlap_s);
        for mut event in detected {
            if !last_segment && event.start_s >= t_next - 1e-9 {
                continue;
            }
            let rel_start = (event.start_s - segment.offset_s).max(0.0);
            let rel_end = (event.end_s - segment.offset_s).min(segment.duration_s());
            let piece = slice_clip(&segment, rel_start, rel_end).map_err(|e| err(&e))?;
            let features = mfcc_fixed(&piece, &cfg.model.feature_config.mfcc).map_err(|e| err(&e))?;
            let (class, prob) = classify(&cfg.model, &features).map_err(|e| err(&e))?;
            if class != cfg.target_class || prob < cfg.prob_threshold {
                continue;
            }
            event.label = Some(class);
            event.probability = Some(prob);
            if cfg.emit_clips {
                let name = event_clip_filename(path, event.start_s, event.end_s, &cfg.target_class);
                encode_wav(&piece, &clips_dir.join(name)).map_err(|e| err(&e))?;
            }
            kept.push((event, features.values));
        }
        if last_segment {
            break;
        }
        if t_next <= t {
            return Err(format!(
                "segment advance stalled at {t} s; segment_s is too short for the detector hop"
            ));
        }
        t = t_next;
    }
    Ok(FileRun {
        events: kept,
        audited_s: duration,
    })
}

fn write_feature_table(rows: &[(SoundEvent, Vec<f64>)], dim: usize, path: &Path) -> Result<(), PipelineError> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut header: Vec<String> = (0..dim).map(|i| format!("f{i}")).collect();
        header.push("label".into());
        let io_err = |e: csv::Error| PipelineError::IoFailure {
            path: path.to_path_buf(),
            source: e.into(),
        };
        w.write_record(&header).map_err(io_err)?;
        for (event, values) in rows {
            let mut record: Vec<String> = values.iter().map(f64::to_string).collect();
            record.push(event.label.clone().unwrap_or_default());
            w.write_record(&record).map_err(io_err)?;
        }
        w.flush().map_err(|e| PipelineError::IoFailure {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, buf).map_err(|source| PipelineError::IoFailure {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs detection plus classification over every recording and writes
/// `events.csv`, `summary.json`, and optionally `features.csv` and a
/// `clips/` directory under the configured output directory.
///
/// Recordings are distributed over a worker pool; outputs do not
/// depend on the pool width because events merge in `(source,
/// start_s)` order and the summary lists recordings in input order.
/// Individual failures are collected in the summary; the run errors
/// only when nothing was given or every recording failed.
pub fn run_pipeline(recordings: &[PathBuf], cfg: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    if recordings.is_empty() {
        return Err(PipelineError::NoRecordings);
    }
    cfg.check()?;
    let dir_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::IoFailure { path, source }
    };
    fs::create_dir_all(&cfg.output_dir).map_err(dir_err(&cfg.output_dir))?;
    if cfg.emit_clips {
        let clips = cfg.output_dir.join("clips");
        fs::create_dir_all(&clips).map_err(dir_err(&clips))?;
    }

    let queue: Mutex<VecDeque<usize>> = Mutex::new((0..recordings.len()).collect());
    let results: Vec<Mutex<Option<Result<FileRun, String>>>> =
        recordings.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..cfg.workers.min(recordings.len()) {
            scope.spawn(|| loop {
                let next = queue.lock().expect("queue lock").pop_front();
                let Some(idx) = next else { break };
                let run = process_recording(&recordings[idx], cfg);
                *results[idx].lock().expect("result lock") = Some(run);
            });
        }
    });

    let mut rows = Vec::with_capacity(recordings.len());
    let mut merged: Vec<(SoundEvent, Vec<f64>)> = Vec::new();
    let (mut succeeded, mut failed) = (0, 0);
    let mut first_error = None;
    for (idx, path) in recordings.iter().enumerate() {
        let result = results[idx]
            .lock()
            .expect("result lock")
            .take()
            .expect("every queued recording stores a result");
        let path = path.display().to_string();
        match result {
            Ok(run) => {
                succeeded += 1;
                rows.push(RecordingSummary {
                    path,
                    status: "ok".into(),
                    events: run.events.len(),
                    audited_s: run.audited_s,
                    error: None,
                });
                merged.extend(run.events);
            }
            Err(message) => {
                failed += 1;
                if first_error.is_none() {
                    first_error = Some(message.clone());
                }
                rows.push(RecordingSummary {
                    path,
                    status: "failed".into(),
                    events: 0,
                    audited_s: 0.0,
                    error: Some(message),
                });
            }
        }
    }
    merged.sort_by(|a, b| {
        a.0.source
            .cmp(&b.0.source)
            .then(a.0.start_s.total_cmp(&b.0.start_s))
            .then(a.0.end_s.total_cmp(&b.0.end_s))
    });

    let events: Vec<SoundEvent> = merged.iter().map(|(e, _)| e.clone()).collect();
    write_events_file(&events, &cfg.output_dir.join("events.csv"))?;
    if cfg.emit_feature_table {
        write_feature_table(&merged, cfg.model.input_len(), &cfg.output_dir.join("features.csv"))?;
    }

    let summary = RunSummary {
        detector: cfg.detector.to_string(),
        target_class: cfg.target_class.clone(),
        prob_threshold: cfg.prob_threshold,
        seed: cfg.seed,
        succeeded,
        failed,
        total_events: events.len(),
        recordings: rows,
    };
    let summary_path = cfg.output_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    fs::write(&summary_path, json).map_err(dir_err(&summary_path))?;

    if failed == recordings.len() {
        return Err(PipelineError::AllFailed {
            count: failed,
            first: first_error.unwrap_or_default(),
        });
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::AudioClip;
    use crate::learn::{train_gmm, train_mlp, FeatureFingerprint, LabeledDataset};
    use std::f64::consts::TAU;

    const RATE: u32 = 16_000;

    /// An 800 Hz floor whose period divides the 0.1 s analysis frame
    /// exactly, plus 1000 Hz tones over the given `(start_s, dur_s)`
    /// spans. Every tone-free frame has identical band energy, so the
    /// median threshold sits exactly on the floor and detection is
    /// deterministic.
    fn steady_floor_signal(total_s: f64, spans: &[(f64, f64)]) -> Vec<f64> {
        let n = (total_s * f64::from(RATE)) as usize;
        let mut samples: Vec<f64> = (0..n)
            .map(|i| 0.001 * (TAU * 800.0 * i as f64 / f64::from(RATE)).sin())
            .collect();
        for &(at, dur) in spans {
            let t0 = (at * f64::from(RATE)) as usize;
            let t1 = ((at + dur) * f64::from(RATE)) as usize;
            for (i, s) in samples[t0..t1].iter_mut().enumerate() {
                *s += 0.5 * (TAU * 1000.0 * i as f64 / f64::from(RATE)).sin();
            }
        }
        samples
    }

    fn write_recording(dir: &Path, name: &str, total_s: f64, spans: &[(f64, f64)]) -> PathBuf {
        let clip = AudioClip {
            samples: steady_floor_signal(total_s, spans),
            sample_rate_hz: RATE,
            source_path: None,
            offset_s: 0.0,
        };
        let path = dir.join(name);
        encode_wav(&clip, &path).unwrap();
        path
    }

    fn memory_clip(samples: Vec<f64>) -> AudioClip {
        AudioClip {
            samples,
            sample_rate_hz: RATE,
            source_path: None,
            offset_s: 0.0,
        }
    }

    /// Labeled fixed-mode vectors from synthetic tone and floor clips
    /// of varied durations.
    fn training_dataset() -> LabeledDataset {
        let cfg = crate::dsp::MfccConfig::default();
        let mut vectors = Vec::new();
        for i in 0..8 {
            let dur = 6.0 + 0.25 * i as f64;
            let tone = memory_clip(steady_floor_signal(dur, &[(0.0, dur)]));
            let mut v = mfcc_fixed(&tone, &cfg).unwrap();
            v.label = Some("gibbon".into());
            vectors.push(v);
            let floor = memory_clip(steady_floor_signal(dur, &[]));
            let mut v = mfcc_fixed(&floor, &cfg).unwrap();
            v.label = Some("noise".into());
            vectors.push(v);
        }
        LabeledDataset::from_vectors(
            vectors,
            FeatureFingerprint {
                mode: FeatureMode::Fixed,
                mfcc: cfg,
            },
        )
        .unwrap()
    }

    fn gmm_model() -> TrainedModel {
        train_gmm(&training_dataset(), 1, 7).unwrap()
    }

    fn base_config(model: TrainedModel, out: &Path) -> PipelineConfig {
        let mut cfg = PipelineConfig::new(model, "gibbon", out);
        cfg.workers = 1;
        cfg
    }

    fn read_csv(path: &Path) -> String {
        std::fs::read_to_string(path).unwrap()
    }

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("pamkit-pipeline-{tag}-{}", std::process::id()));
        if dir.exists() {
            std::fs::remove_dir_all(&dir).unwrap();
        }
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn pipeline_keeps_confident_target_events_and_emits_all_outputs() {
        let dir = temp_dir("outputs");
        let rec = write_recording(&dir, "rec.wav", 60.0, &[(10.0, 8.0), (35.0, 8.0)]);
        let mut cfg = base_config(gmm_model(), &dir.join("out"));
        cfg.emit_clips = true;
        cfg.emit_feature_table = true;
        let summary = run_pipeline(&[rec], &cfg).unwrap();

        assert_eq!(summary.succeeded, 1);
        assert_eq!(summary.failed, 0);
        assert_eq!(summary.total_events, 2);
        assert_eq!(summary.recordings[0].events, 2);
        assert_eq!(summary.recordings[0].status, "ok");

        let events = crate::detect::read_events_csv(&cfg.output_dir.join("events.csv")).unwrap();
        assert_eq!(events.len(), 2);
        for (event, expected_start) in events.iter().zip([10.0, 35.0]) {
            assert_eq!(event.label.as_deref(), Some("gibbon"));
            assert!(event.probability.unwrap() >= 0.5);
            assert!((event.start_s - expected_start).abs() <= 0.1 + 1e-9);
        }

        let features = read_csv(&cfg.output_dir.join("features.csv"));
        assert_eq!(features.lines().count(), 3, "header plus one row per event");
        assert!(features.lines().next().unwrap().starts_with("f0,"));

        let clips: Vec<_> = std::fs::read_dir(cfg.output_dir.join("clips"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        assert_eq!(clips.len(), 2);
        for clip in clips {
            let decoded = crate::audio::decode_wav(&clip, ChannelPolicy::FirstChannel).unwrap();
            assert!(decoded.duration_s() >= 6.0);
        }

        let written: RunSummary =
            serde_json::from_str(&read_csv(&cfg.output_dir.join("summary.json"))).unwrap();
        assert_eq!(written, summary);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn segmented_and_whole_runs_write_identical_tables() {
        let dir = temp_dir("segments");
        let rec = write_recording(&dir, "long.wav", 90.0, &[(20.0, 8.0), (50.0, 8.0)]);
        let model = gmm_model();

        let mut whole = base_config(model.clone(), &dir.join("whole"));
        whole.emit_feature_table = true;
        run_pipeline(std::slice::from_ref(&rec), &whole).unwrap();

        let mut segmented = base_config(model, &dir.join("segmented"));
        segmented.emit_feature_table = true;
        segmented.segment_s = 30.0;
        run_pipeline(&[rec], &segmented).unwrap();

        assert_eq!(
            read_csv(&whole.output_dir.join("events.csv")),
            read_csv(&segmented.output_dir.join("events.csv"))
        );
        assert_eq!(
            read_csv(&whole.output_dir.join("features.csv")),
            read_csv(&segmented.output_dir.join("features.csv"))
        );
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn worker_pool_width_never_changes_the_outputs() {
        let dir = temp_dir("workers");
        let recs = vec![
            write_recording(&dir, "b.wav", 40.0, &[(12.0, 8.0)]),
            write_recording(&dir, "a.wav", 40.0, &[(25.0, 8.0)]),
            write_recording(&dir, "c.wav", 40.0, &[]),
        ];
        let model = gmm_model();

        let mut solo = base_config(model.clone(), &dir.join("solo"));
        solo.workers = 1;
        let solo_summary = run_pipeline(&recs, &solo).unwrap();

        let mut pooled = base_config(model, &dir.join("pooled"));
        pooled.workers = 3;
        let pooled_summary = run_pipeline(&recs, &pooled).unwrap();

        assert_eq!(solo_summary, pooled_summary);
        assert_eq!(
            read_csv(&solo.output_dir.join("events.csv")),
            read_csv(&pooled.output_dir.join("events.csv"))
        );
        assert_eq!(solo_summary.recordings[2].events, 0, "silent file yields no events");
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn a_threshold_above_every_probability_keeps_nothing() {
        let dir = temp_dir("threshold");
        let rec = write_recording(&dir, "rec.wav", 40.0, &[(12.0, 8.0)]);
        let model = train_mlp(&training_dataset(), 8, 40, 0.2, 11).unwrap();

        let mut open = base_config(model.clone(), &dir.join("open"));
        open.prob_threshold = 0.0;
        let with_events = run_pipeline(std::slice::from_ref(&rec), &open).unwrap();
        assert_eq!(with_events.total_events, 1);
        let events = crate::detect::read_events_csv(&open.output_dir.join("events.csv")).unwrap();
        let max_prob = events[0].probability.unwrap();
        assert!(max_prob < 1.0, "softmax output stays strictly below 1");

        let mut strict = base_config(model, &dir.join("strict"));
        strict.prob_threshold = max_prob + (1.0 - max_prob) / 2.0;
        let empty = run_pipeline(&[rec], &strict).unwrap();
        assert_eq!(empty.total_events, 0);
        assert_eq!(read_csv(&strict.output_dir.join("events.csv")).lines().count(), 1);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn per_file_failures_are_partial_until_everything_fails() {
        let dir = temp_dir("failures");
        let good = write_recording(&dir, "good.wav", 40.0, &[(12.0, 8.0)]);
        let missing = dir.join("missing.wav");
        let cfg = base_config(gmm_model(), &dir.join("out"));

        let summary = run_pipeline(&[good, missing.clone()], &cfg).unwrap();
        assert_eq!(summary.succeeded, 1);
        assert_eq!(summary.failed, 1);
        assert_eq!(summary.recordings[1].status, "failed");
        assert!(summary.recordings[1].error.is_some());

        match run_pipeline(&[missing.clone(), missing], &cfg) {
            Err(PipelineError::AllFailed { count, .. }) => assert_eq!(count, 2),
            other => panic!("expected AllFailed, got {other:?}"),
        }
        match run_pipeline(&[], &cfg) {
            Err(PipelineError::NoRecordings) => {}
            other => panic!("expected NoRecordings, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn config_validation_rejects_bad_setups() {
        let dir = temp_dir("validation");
        let rec = write_recording(&dir, "rec.wav", 20.0, &[]);
        let model = gmm_model();

        let mut needs_window = base_config(model.clone(), &dir.join("o1"));
        needs_window.detector = DetectorKind::WindowClassifier;
        match run_pipeline(std::slice::from_ref(&rec), &needs_window) {
            Err(PipelineError::MissingWindowModel) => {}
            other => panic!("expected MissingWindowModel, got {other:?}"),
        }

        let mut short = base_config(model, &dir.join("o2"));
        short.segment_s = 10.0;
        match run_pipeline(&[rec], &short) {
            Err(PipelineError::SegmentTooShort { segment_s, .. }) => assert_eq!(segment_s, 10.0),
            other => panic!("expected SegmentTooShort, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn worker_count_parses_from_the_environment_value() {
        assert_eq!(workers_from(None), 1);
        assert_eq!(workers_from(Some("4")), 4);
        assert_eq!(workers_from(Some("0")), 1);
        assert_eq!(workers_from(Some("not a number")), 1);
    }

    #[test]
    fn detector_kind_round_trips_through_strings() {
        for kind in [DetectorKind::Energy, DetectorKind::WindowClassifier] {
            assert_eq!(kind.to_string().parse::<DetectorKind>().unwrap(), kind);
        }
        assert!("sonar".parse::<DetectorKind>().is_err());
    }
}
