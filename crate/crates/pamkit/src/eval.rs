//! Scoring detector output against human annotations: greedy
//! one-to-one event matching, recall and false positives per hour
//! with a per-quality breakdown, and ROC curves over probability
//! thresholds.

use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::SoundEvent;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{what} not sorted by (source, start_s) at index {index}; sort first or use the canonical matcher")]
    UnsortedInput { what: &'static str, index: usize },
    #[error("empty input")]
    EmptyInput,
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

/// Annotator's confidence grade for a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    High,
    Low,
}

impl std::fmt::Display for Quality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Quality::High => "high",
            Quality::Low => "low",
        })
    }
}

impl std::str::FromStr for Quality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "high" => Ok(Quality::High),
            "low" => Ok(Quality::Low),
            other => Err(format!("unknown quality '{other}', expected high or low")),
        }
    }
}

/// One human-marked call in a recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub source: String,
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
    pub quality: Option<Quality>,
}

/// Outcome of matching detections to annotations. Indices refer to
/// the caller's input slices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    /// `(detection index, annotation index)` pairs, one per true
    /// positive.
    pub pairs: Vec<(usize, usize)>,
    /// Detections that matched nothing: the false positives.
    pub unmatched_detections: Vec<usize>,
    /// Annotations no detection covered: the false negatives.
    pub unmatched_annotations: Vec<usize>,
}

impl MatchOutcome {
    pub fn true_positives(&self) -> usize {
        self.pairs.len()
    }

    pub fn false_positives(&self) -> usize {
        self.unmatched_detections.len()
    }

    pub fn false_negatives(&self) -> usize {
        self.unmatched_annotations.len()
    }
}

/// Recall restricted to annotations of one quality grade.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityRecall {
    pub quality: Quality,
    pub total: usize,
    pub matched: usize,
    /// Absent when no annotation carries this grade.
    pub recall: Option<f64>,
}

/// Detector scorecard over an audited span of audio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Candidate events classified as non-target; zero when scoring
    /// a plain detector run (every emitted event claims the target).
    pub true_negatives: usize,
    /// `tp / (tp + fn)`; absent when there are no annotations.
    pub recall: Option<f64>,
    pub fp_per_hour: f64,
    pub audited_hours: f64,
    pub per_quality: Vec<QualityRecall>,
}

fn overlap_s(d: &SoundEvent, a: &Annotation) -> f64 {
    d.end_s.min(a.end_s) - d.start_s.max(a.start_s)
}

fn check_sorted<T>(items: &[T], what: &'static str, key: impl Fn(&T) -> (&str, f64)) -> Result<(), EvalError> {
    for (i, pair) in items.windows(2).enumerate() {
        let (s0, t0) = key(&pair[0]);
        let (s1, t1) = key(&pair[1]);
        if s0 > s1 || (s0 == s1 && t0 > t1) {
            return Err(EvalError::UnsortedInput { what, index: i + 1 });
        }
    }
    Ok(())
}

/// Core greedy matcher over index permutations sorted by
/// (source, start).
fn match_sorted_indices(
    detections: &[SoundEvent],
    annotations: &[Annotation],
    det_order: &[usize],
    ann_order: &[usize],
    min_overlap_s: f64,
) -> MatchOutcome {
    let mut ann_taken = vec![false; annotations.len()];
    let mut pairs = Vec::new();
    let mut unmatched_detections = Vec::new();

    for &di in det_order {
        let d = &detections[di];
        let hit = ann_order.iter().copied().find(|&ai| {
            !ann_taken[ai]
                && annotations[ai].source == d.source
                && overlap_s(d, &annotations[ai]) >= min_overlap_s
        });
        match hit {
            Some(ai) => {
                ann_taken[ai] = true;
                pairs.push((di, ai));
            }
            None => unmatched_detections.push(di),
        }
    }

    let unmatched_annotations = (0..annotations.len()).filter(|&ai| !ann_taken[ai]).collect();
    MatchOutcome {
        pairs,
        unmatched_detections,
        unmatched_annotations,
    }
}

/// Greedily pairs detections with annotations, walking detections in
/// start order and giving each the earliest unmatched annotation from
/// the same source that it overlaps by at least `min_overlap_s`
/// seconds. Each annotation matches at most once.
///
/// Both slices must already be sorted by (source, start_s);
/// [`match_events_canonical`] sorts for you.
pub fn match_events(
    detections: &[SoundEvent],
    annotations: &[Annotation],
    min_overlap_s: f64,
) -> Result<MatchOutcome, EvalError> {
    assert!(min_overlap_s > 0.0, "min_overlap_s must be positive");
    check_sorted(detections, "detections", |d| (d.source.as_str(), d.start_s))?;
    check_sorted(annotations, "annotations", |a| (a.source.as_str(), a.start_s))?;
    let det_order: Vec<usize> = (0..detections.len()).collect();
    let ann_order: Vec<usize> = (0..annotations.len()).collect();
    Ok(match_sorted_indices(
        detections,
        annotations,
        &det_order,
        &ann_order,
        min_overlap_s,
    ))
}

/// [`match_events`] on arbitrarily ordered input: sorts index
/// permutations first, so the outcome is insensitive to input order.
/// Returned indices still refer to the caller's original slices.
pub fn match_events_canonical(
    detections: &[SoundEvent],
    annotations: &[Annotation],
    min_overlap_s: f64,
) -> MatchOutcome {
    assert!(min_overlap_s > 0.0, "min_overlap_s must be positive");
    let mut det_order: Vec<usize> = (0..detections.len()).collect();
    det_order.sort_by(|&a, &b| {
        let da = &detections[a];
        let db = &detections[b];
        da.source
            .cmp(&db.source)
            .then(da.start_s.total_cmp(&db.start_s))
            .then(da.end_s.total_cmp(&db.end_s))
    });
    let mut ann_order: Vec<usize> = (0..annotations.len()).collect();
    ann_order.sort_by(|&a, &b| {
        let aa = &annotations[a];
        let ab = &annotations[b];
        aa.source
            .cmp(&ab.source)
            .then(aa.start_s.total_cmp(&ab.start_s))
            .then(aa.end_s.total_cmp(&ab.end_s))
    });
    let mut outcome = match_sorted_indices(detections, annotations, &det_order, &ann_order, min_overlap_s);
    outcome.pairs.sort_unstable();
    outcome.unmatched_detections.sort_unstable();
    outcome.unmatched_annotations.sort_unstable();
    outcome
}

/// Default absolute-overlap threshold for calling a detection a hit.
pub const DEFAULT_MIN_OVERLAP_S: f64 = 1.0;

/// Builds the scorecard for a matching. Recall is left absent rather
/// than reported as zero when there are no annotations; the
/// per-quality rows cover only annotations that carry a grade.
pub fn recall_and_fp_rate(
    outcome: &MatchOutcome,
    annotations: &[Annotation],
    audited_hours: f64,
) -> EvalReport {
    assert!(audited_hours > 0.0, "audited_hours must be positive");
    let tp = outcome.true_positives();
    let fp = outcome.false_positives();
    let fn_count = outcome.false_negatives();

    let recall = if tp + fn_count > 0 {
        Some(tp as f64 / (tp + fn_count) as f64)
    } else {
        None
    };

    let mut per_quality = Vec::new();
    for quality in [Quality::High, Quality::Low] {
        let total = annotations
            .iter()
            .filter(|a| a.quality == Some(quality))
            .count();
        let matched = outcome
            .pairs
            .iter()
            .filter(|&&(_, ai)| annotations[ai].quality == Some(quality))
            .count();
        per_quality.push(QualityRecall {
            quality,
            total,
            matched,
            recall: if total > 0 {
                Some(matched as f64 / total as f64)
            } else {
                None
            },
        });
    }

    EvalReport {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_count,
        true_negatives: 0,
        recall,
        fp_per_hour: fp as f64 / audited_hours,
        audited_hours,
        per_quality,
    }
}

/// One operating point of a ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// Probability thresholds swept by default.
pub const DEFAULT_ROC_THRESHOLDS: [f64; 6] = [0.0, 0.5, 0.75, 0.85, 0.95, 0.99];

/// Sweeps thresholds over `(probability, is_target)` pairs: at each
/// threshold `t` an item is predicted positive iff its probability is
/// at least `t`. A rate whose denominator is zero (no targets, or no
/// non-targets) is reported as 0. Points come back sorted by
/// threshold.
pub fn roc_curve(scored: &[(f64, bool)], thresholds: &[f64]) -> Result<Vec<RocPoint>, EvalError> {
    if scored.is_empty() || thresholds.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    for &(p, _) in scored {
        assert!((0.0..=1.0).contains(&p), "probability {p} outside [0, 1]");
    }

    let n_target = scored.iter().filter(|&&(_, t)| t).count();
    let n_other = scored.len() - n_target;
    let mut points: Vec<RocPoint> = thresholds
        .iter()
        .map(|&threshold| {
            let tp = scored.iter().filter(|&&(p, t)| t && p >= threshold).count();
            let fp = scored.iter().filter(|&&(p, t)| !t && p >= threshold).count();
            let rate = |num: usize, denom: usize| {
                if denom == 0 {
                    0.0
                } else {
                    num as f64 / denom as f64
                }
            };
            RocPoint {
                threshold,
                tpr: rate(tp, n_target),
                fpr: rate(fp, n_other),
            }
        })
        .collect();
    points.sort_by(|a, b| a.threshold.total_cmp(&b.threshold));
    Ok(points)
}

/// Parses annotations CSV with header
/// `source,start_s,end_s,label,quality`; the quality column may be
/// empty.
pub fn parse_annotations_text(text: &str, origin: &Path) -> Result<Vec<Annotation>, EvalError> {
    let malformed = |line: u64, reason: String| EvalError::MalformedCsv {
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
        let expected = ["source", "start_s", "end_s", "label", "quality"];
        if headers.iter().ne(expected) {
            return Err(malformed(1, format!("expected header '{}'", expected.join(","))));
        }
    }

    let mut annotations = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 5 {
            return Err(malformed(line, format!("expected 5 fields, found {}", record.len())));
        }
        let number = |field: &str, name: &str| -> Result<f64, EvalError> {
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(line, format!("bad {name} '{field}'")))
        };
        let start_s = number(&record[1], "start_s")?;
        let end_s = number(&record[2], "end_s")?;
        if start_s >= end_s {
            return Err(malformed(line, format!("start_s {start_s} is not before end_s {end_s}")));
        }
        if record[3].is_empty() {
            return Err(malformed(line, "empty label".into()));
        }
        let quality = if record[4].is_empty() {
            None
        } else {
            Some(record[4].parse::<Quality>().map_err(|e| malformed(line, e))?)
        };
        annotations.push(Annotation {
            source: record[0].to_string(),
            start_s,
            end_s,
            label: record[3].to_string(),
            quality,
        });
    }
    Ok(annotations)
}

/// Reads an annotations CSV file.
pub fn read_annotations_csv(path: &Path) -> Result<Vec<Annotation>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::IoFailure {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_annotations_text(&text, path)
}

/// Writes annotations in the same CSV layout the parser accepts.
pub fn write_annotations_csv(annotations: &[Annotation], out: &mut dyn io::Write) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["source", "start_s", "end_s", "label", "quality"])?;
    for a in annotations {
        w.write_record([
            a.source.as_str(),
            &format!("{:.3}", a.start_s),
            &format!("{:.3}", a.end_s),
            a.label.as_str(),
            &a.quality.map(|q| q.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()
}

/// Parses scored-event CSV with header `probability,is_target`;
/// `is_target` accepts true/false or 1/0.
pub fn parse_scores_text(text: &str, origin: &Path) -> Result<Vec<(f64, bool)>, EvalError> {
    let malformed = |line: u64, reason: String| EvalError::MalformedCsv {
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
        if headers.iter().ne(["probability", "is_target"]) {
            return Err(malformed(1, "expected header 'probability,is_target'".into()));
        }
    }

    let mut scored = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(malformed(line, format!("expected 2 fields, found {}", record.len())));
        }
        let p: f64 = record[0]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && (0.0..=1.0).contains(v))
            .ok_or_else(|| malformed(line, format!("bad probability '{}'", &record[0])))?;
        let is_target = match &record[1] {
            "true" | "1" => true,
            "false" | "0" => false,
            other => return Err(malformed(line, format!("bad is_target '{other}'"))),
        };
        scored.push((p, is_target));
    }
    Ok(scored)
}

/// Reads a scores CSV file.
pub fn read_scores_csv(path: &Path) -> Result<Vec<(f64, bool)>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::IoFailure {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_scores_text(&text, path)
}

/// Writes ROC points as `threshold,tpr,fpr`.
pub fn write_roc_csv(points: &[RocPoint], out: &mut dyn io::Write) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "tpr", "fpr"])?;
    for p in points {
        w.write_record([p.threshold.to_string(), p.tpr.to_string(), p.fpr.to_string()])?;
    }
    w.flush()
}

/// Report as `metric,value` CSV rows.
pub fn report_to_csv(report: &EvalReport) -> String {
    let mut lines = vec![
        "metric,value".to_string(),
        format!("true_positives,{}", report.true_positives),
        format!("false_positives,{}", report.false_positives),
        format!("false_negatives,{}", report.false_negatives),
        format!("true_negatives,{}", report.true_negatives),
        format!("recall,{}", report.recall.map(|r| r.to_string()).unwrap_or_default()),
        format!("fp_per_hour,{}", report.fp_per_hour),
        format!("audited_hours,{}", report.audited_hours),
    ];
    for q in &report.per_quality {
        lines.push(format!(
            "recall_{},{}",
            q.quality,
            q.recall.map(|r| r.to_string()).unwrap_or_default()
        ));
    }
    lines.push(String::new());
    lines.join("\n")
}

/// Report as readable text.
pub fn report_to_text(report: &EvalReport) -> String {
    let mut out = String::new();
    use std::fmt::Write;
    let _ = writeln!(
        out,
        "true positives:  {}\nfalse positives: {}\nfalse negatives: {}\ntrue negatives:  {}",
        report.true_positives, report.false_positives, report.false_negatives, report.true_negatives
    );
    match report.recall {
        Some(r) => {
            let _ = writeln!(out, "recall:          {:.3}", r);
        }
        None => {
            let _ = writeln!(out, "recall:          n/a (no annotations)");
        }
    }
    let _ = writeln!(
        out,
        "false positives per hour: {:.3} over {:.2} h",
        report.fp_per_hour, report.audited_hours
    );
    for q in &report.per_quality {
        match q.recall {
            Some(r) => {
                let _ = writeln!(out, "recall ({} quality): {:.3} ({}/{})", q.quality, r, q.matched, q.total);
            }
            None => {
                let _ = writeln!(out, "recall ({} quality): n/a (0 annotations)", q.quality);
            }
        }
    }
    out
}
