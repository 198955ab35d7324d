//! Candidate sound-event detection: band-limited energy with an
//! adaptive quantile threshold, and a sliding-window classifier
//! detector, plus the events CSV format both emit.
//!
//! Detectors hold only immutable configuration and model references,
//! so one instance can serve many threads scanning different clips.

use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioClip;
use crate::dsp::{mfcc_frames, quantile_type7, spectrogram, DspError, FeatureVector, MfccConfig, Spectrogram, SpectrogramConfig};
use crate::learn::{classify, FeatureMode, LearnError, TrainedModel};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("band {fmin_hz}..{fmax_hz} Hz does not fit the spectrogram's 0..{max_hz} Hz range")]
    BandOutOfRange {
        fmin_hz: f64,
        fmax_hz: f64,
        max_hz: f64,
    },
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("{path}:{line}: malformed events CSV: {reason}")]
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

/// One detected (and possibly classified) span of sound in a
/// recording. Times are seconds from the start of the source file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundEvent {
    pub source: String,
    pub start_s: f64,
    pub end_s: f64,
    /// Class name, absent until a classifier has labeled the event.
    pub label: Option<String>,
    /// Classifier probability for `label`, in [0, 1].
    pub probability: Option<f64>,
    /// Raw detector score: peak band energy or peak window
    /// probability, depending on the detector.
    pub peak_score: Option<f64>,
}

impl SoundEvent {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Band-limited energy detector settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BledConfig {
    pub spectrogram: SpectrogramConfig,
    /// Analysis band, inclusive on both edges.
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    /// Quantile of the band-energy series used as the threshold.
    pub quantile: f64,
    /// Shortest run that counts as an event.
    pub min_duration_s: f64,
    /// How many consecutive sub-threshold frames may sit inside a
    /// run before it is split in two. 0 keeps only unbroken runs.
    pub max_gap_windows: usize,
}

impl Default for BledConfig {
    fn default() -> Self {
        BledConfig {
            spectrogram: SpectrogramConfig::default(),
            fmin_hz: 400.0,
            fmax_hz: 1500.0,
            quantile: 0.5,
            min_duration_s: 6.0,
            max_gap_windows: 0,
        }
    }
}

impl BledConfig {
    pub fn check(&self) {
        self.spectrogram.check();
        assert!(
            self.fmin_hz >= 0.0 && self.fmin_hz < self.fmax_hz,
            "band edges must satisfy 0 <= fmin < fmax"
        );
        assert!((0.0..=1.0).contains(&self.quantile), "quantile must lie in [0, 1]");
        assert!(self.min_duration_s > 0.0, "min_duration_s must be positive");
    }
}

/// Sliding-window classifier detector settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowClassifierConfig {
    pub mfcc: MfccConfig,
    /// Class whose windows form events.
    pub target_class: String,
    /// Windows below this probability do not count.
    pub prob_threshold: f64,
    pub min_duration_s: f64,
}

impl WindowClassifierConfig {
    pub fn new(target_class: impl Into<String>) -> Self {
        WindowClassifierConfig {
            mfcc: MfccConfig::default(),
            target_class: target_class.into(),
            prob_threshold: 0.5,
            min_duration_s: 6.0,
        }
    }
}

/// Sums spectrogram power per frame over the bins whose center
/// frequency lies in `[fmin_hz, fmax_hz]` (inclusive).
pub fn band_energy_series(spec: &Spectrogram, fmin_hz: f64, fmax_hz: f64) -> Result<Vec<f64>, DetectError> {
    let max_hz = (spec.n_bins().saturating_sub(1)) as f64 * spec.bin_hz;
    let band_err = DetectError::BandOutOfRange {
        fmin_hz,
        fmax_hz,
        max_hz,
    };
    if !(fmin_hz >= 0.0 && fmin_hz < fmax_hz && fmax_hz <= max_hz) {
        return Err(band_err);
    }
    let lo = (fmin_hz / spec.bin_hz).ceil() as usize;
    let hi = (fmax_hz / spec.bin_hz).floor() as usize;
    if lo > hi {
        return Err(band_err);
    }
    Ok(spec
        .power
        .iter()
        .map(|frame| frame[lo..=hi].iter().sum())
        .collect())
}

/// A maximal run of above-threshold frames, with up to `max_gap`
/// below-threshold frames tolerated between them. Returns inclusive
/// `(first, last)` frame index pairs.
fn threshold_runs(above: &[bool], max_gap: usize) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    for (i, &hit) in above.iter().enumerate() {
        if !hit {
            continue;
        }
        current = match current {
            Some((first, last)) if i - last - 1 <= max_gap => Some((first, i)),
            Some(done) => {
                runs.push(done);
                Some((i, i))
            }
            None => Some((i, i)),
        };
    }
    if let Some(done) = current {
        runs.push(done);
    }
    runs
}

/// Band-limited energy detection: frames whose in-band energy
/// strictly exceeds the series' `quantile` value form runs, and runs
/// lasting at least `min_duration_s` become events.
///
/// The strict inequality means a constant-energy clip (silence) can
/// never produce an event, and makes the detector invariant under
/// global amplitude scaling.
pub fn bled_detect(clip: &AudioClip, cfg: &BledConfig) -> Result<Vec<SoundEvent>, DetectError> {
    cfg.check();
    let spec = spectrogram(clip, &cfg.spectrogram)?;
    let energy = band_energy_series(&spec, cfg.fmin_hz, cfg.fmax_hz)?;
    let threshold = quantile_type7(&energy, cfg.quantile)?;

    let above: Vec<bool> = energy.iter().map(|&e| e > threshold).collect();
    let source = clip.source_string();
    let mut events = Vec::new();
    for (first, last) in threshold_runs(&above, cfg.max_gap_windows) {
        let start_s = spec.frame_start_s(first);
        let end_s = spec.frame_start_s(last) + spec.frame_duration_s;
        if end_s - start_s < cfg.min_duration_s {
            continue;
        }
        let peak = energy[first..=last].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        events.push(SoundEvent {
            source: source.clone(),
            start_s,
            end_s,
            label: None,
            probability: None,
            peak_score: Some(peak),
        });
    }
    Ok(events)
}

/// Verifies that a model was trained on frame-mode features whose
/// extraction settings match `cfg`.
fn check_window_model(model: &TrainedModel, cfg: &MfccConfig) -> Result<(), DetectError> {
    let mismatch = |reason: String| DetectError::Learn(LearnError::FeatureConfigMismatch { reason });
    let fp = &model.feature_config;
    if fp.mode != FeatureMode::Frames {
        return Err(mismatch(format!(
            "model was trained on {}-mode features, the window detector needs frames mode",
            fp.mode
        )));
    }
    let m = &fp.mfcc;
    let fields = [
        ("n_filters", m.n_filters as f64, cfg.n_filters as f64),
        ("n_cep", m.n_cep as f64, cfg.n_cep as f64),
        ("fmin_hz", m.fmin_hz, cfg.fmin_hz),
        ("fmax_hz", m.fmax_hz, cfg.fmax_hz),
        ("win_s", m.win_s, cfg.win_s),
    ];
    for (name, model_v, cfg_v) in fields {
        if model_v != cfg_v {
            return Err(mismatch(format!(
                "model {name} = {model_v} but detector asks for {cfg_v}"
            )));
        }
    }
    Ok(())
}

/// Classifies every analysis window and turns maximal runs of
/// confident target-class windows into events. An event's
/// `probability` is the mean over its windows and `peak_score` the
/// maximum.
pub fn window_classifier_detect(
    clip: &AudioClip,
    model: &TrainedModel,
    cfg: &WindowClassifierConfig,
) -> Result<Vec<SoundEvent>, DetectError> {
    assert!(
        (0.0..=1.0).contains(&cfg.prob_threshold),
        "prob_threshold must lie in [0, 1]"
    );
    assert!(cfg.min_duration_s > 0.0, "min_duration_s must be positive");
    check_window_model(model, &cfg.mfcc)?;

    let frames = mfcc_frames(clip, &cfg.mfcc)?;
    let mut probs = Vec::with_capacity(frames.coefficients.len());
    let mut above = Vec::with_capacity(frames.coefficients.len());
    for row in &frames.coefficients {
        let v = FeatureVector {
            values: row.clone(),
            label: None,
        };
        let (class, prob) = classify(model, &v)?;
        above.push(class == cfg.target_class && prob >= cfg.prob_threshold);
        probs.push(prob);
    }

    let source = clip.source_string();
    let mut events = Vec::new();
    for (first, last) in threshold_runs(&above, 0) {
        let start_s = frames.frame_times_s[first];
        let end_s = frames.frame_times_s[last] + frames.frame_duration_s;
        if end_s - start_s < cfg.min_duration_s {
            continue;
        }
        let member = &probs[first..=last];
        let mean = member.iter().sum::<f64>() / member.len() as f64;
        let peak = member.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        events.push(SoundEvent {
            source: source.clone(),
            start_s,
            end_s,
            label: Some(cfg.target_class.clone()),
            probability: Some(mean),
            peak_score: Some(peak),
        });
    }
    Ok(events)
}

/// Writes the events table: header
/// `source,start_s,end_s,label,probability,peak_score`, seconds with
/// three decimals, optional fields left empty.
pub fn write_events_csv(events: &[SoundEvent], out: &mut dyn io::Write) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["source", "start_s", "end_s", "label", "probability", "peak_score"])?;
    for e in events {
        w.write_record([
            e.source.as_str(),
            &format!("{:.3}", e.start_s),
            &format!("{:.3}", e.end_s),
            e.label.as_deref().unwrap_or(""),
            &e.probability.map(|p| p.to_string()).unwrap_or_default(),
            &e.peak_score.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()
}

/// Parses events CSV text. `origin` names the source in errors.
pub fn parse_events_text(text: &str, origin: &Path) -> Result<Vec<SoundEvent>, DetectError> {
    let malformed = |line: u64, reason: String| DetectError::MalformedCsv {
        path: origin.to_path_buf(),
        line,
        reason,
    };
    let csv_err = |e: &csv::Error| {
        let line = e.position().map_or(0, |p| p.line());
        malformed(line, e.to_string())
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    {
        let headers = reader.headers().map_err(|e| csv_err(&e))?;
        let expected = ["source", "start_s", "end_s", "label", "probability", "peak_score"];
        if headers.iter().ne(expected) {
            return Err(malformed(1, format!("expected header '{}'", expected.join(","))));
        }
    }

    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 6 {
            return Err(malformed(line, format!("expected 6 fields, found {}", record.len())));
        }
        let number = |field: &str, name: &str| -> Result<f64, DetectError> {
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(line, format!("bad {name} '{field}'")))
        };
        let optional = |field: &str, name: &str| -> Result<Option<f64>, DetectError> {
            if field.is_empty() {
                Ok(None)
            } else {
                number(field, name).map(Some)
            }
        };
        let start_s = number(&record[1], "start_s")?;
        let end_s = number(&record[2], "end_s")?;
        if start_s >= end_s {
            return Err(malformed(line, format!("start_s {start_s} is not before end_s {end_s}")));
        }
        let probability = optional(&record[4], "probability")?;
        if let Some(p) = probability {
            if !(0.0..=1.0).contains(&p) {
                return Err(malformed(line, format!("probability {p} outside [0, 1]")));
            }
        }
        events.push(SoundEvent {
            source: record[0].to_string(),
            start_s,
            end_s,
            label: if record[3].is_empty() { None } else { Some(record[3].to_string()) },
            probability,
            peak_score: optional(&record[5], "peak_score")?,
        });
    }
    Ok(events)
}

/// Reads an events CSV file written by [`write_events_csv`].
pub fn read_events_csv(path: &Path) -> Result<Vec<SoundEvent>, DetectError> {
    let text = std::fs::read_to_string(path).map_err(|e| DetectError::IoFailure {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_events_text(&text, path)
}

/// Writes events to a file.
pub fn write_events_file(events: &[SoundEvent], path: &Path) -> Result<(), DetectError> {
    let mut buf = Vec::new();
    write_events_csv(events, &mut buf).map_err(|e| DetectError::IoFailure {
        path: path.to_path_buf(),
        source: e,
    })?;
    std::fs::write(path, buf).map_err(|e| DetectError::IoFailure {
        path: path.to_path_buf(),
        source: e,
    })
}
