//! RIFF/WAV decoding and encoding for 16-bit PCM recordings, plus
//! time-interval slicing of decoded clips.
//!
//! Only integer PCM at 16 bits per sample is accepted; anything else
//! is a hard error rather than a silent conversion. The reader
//! tolerates extra chunks before `data` and can decode a bounded time
//! span of a file without loading the rest, which is how long
//! recordings are processed segment by segment.

use std::fs::File;
use std::io::{self, BufReader, Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use thiserror::Error;

/// How to treat files with more than one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelPolicy {
    /// Keep the first channel and discard the rest.
    FirstChannel,
    /// Refuse multichannel files.
    RejectMultichannel,
}

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("not a RIFF/WAVE file: {reason}")]
    NotRiff { reason: String },
    #[error("unsupported encoding: {reason}")]
    UnsupportedEncoding { reason: String },
    #[error("multichannel audio rejected: {channels} channels")]
    MultichannelRejected { channels: u16 },
    #[error("truncated data: {reason}")]
    TruncatedData { reason: String },
    #[error("range {start_s:.3}..{end_s:.3} s is outside the clip (duration {duration_s:.3} s)")]
    OutOfRange {
        start_s: f64,
        end_s: f64,
        duration_s: f64,
    },
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl AudioError {
    /// Fills in the file path on i/o errors raised below the level
    /// where the path is known.
    fn at(self, path: &Path) -> Self {
        match self {
            AudioError::IoFailure { source, .. } => AudioError::IoFailure {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        }
    }
}

fn io_error(e: io::Error) -> AudioError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        AudioError::TruncatedData {
            reason: "unexpected end of file".into(),
        }
    } else {
        AudioError::IoFailure {
            path: PathBuf::new(),
            source: e,
        }
    }
}

/// Decoded mono audio. Samples are 16-bit PCM scaled by `1/32768`, so
/// every value lies in `[-1, 1)` after decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
    /// File this clip came from, when known.
    pub source_path: Option<PathBuf>,
    /// Position of `samples[0]` within the source file, in seconds.
    pub offset_s: f64,
}

impl AudioClip {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    /// Source path formatted for event tables; empty when unknown.
    pub fn source_string(&self) -> String {
        self.source_path
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default()
    }
}

/// Header facts needed to locate and interpret the sample payload.
#[derive(Debug, Clone, Copy)]
pub struct WavInfo {
    pub sample_rate_hz: u32,
    pub channels: u16,
    /// Sample frames in the data chunk (samples per channel).
    pub n_frames: u64,
    data_start: u64,
}

impl WavInfo {
    pub fn duration_s(&self) -> f64 {
        self.n_frames as f64 / f64::from(self.sample_rate_hz)
    }
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16, AudioError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b).map_err(io_error)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, AudioError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(io_error)?;
    Ok(u32::from_le_bytes(b))
}

/// Walks the chunk list and returns the validated header. Leaves the
/// reader positioned arbitrarily; callers seek using the offsets in
/// the result.
fn parse_header<R: Read + Seek>(r: &mut R) -> Result<WavInfo, AudioError> {
    let end = r.seek(SeekFrom::End(0)).map_err(io_error)?;
    r.seek(SeekFrom::Start(0)).map_err(io_error)?;

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| AudioError::NotRiff {
        reason: "file shorter than a RIFF header".into(),
    })?;
    if &magic != b"RIFF" {
        return Err(AudioError::NotRiff {
            reason: "missing RIFF magic".into(),
        });
    }
    read_u32(r)?;
    r.read_exact(&mut magic).map_err(io_error)?;
    if &magic != b"WAVE" {
        return Err(AudioError::NotRiff {
            reason: "missing WAVE form type".into(),
        });
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    loop {
        let mut id = [0u8; 4];
        if let Err(e) = r.read_exact(&mut id) {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                return Err(AudioError::TruncatedData {
                    reason: "no data chunk".into(),
                });
            }
            return Err(io_error(e));
        }
        let size = u64::from(read_u32(r)?);
        let pos = r.stream_position().map_err(io_error)?;

        match &id {
            b"fmt " => {
                if size < 16 {
                    return Err(AudioError::UnsupportedEncoding {
                        reason: format!("fmt chunk of {size} bytes, need at least 16"),
                    });
                }
                let audio_format = read_u16(r)?;
                let channels = read_u16(r)?;
                let sample_rate = read_u32(r)?;
                read_u32(r)?; // byte rate
                let block_align = read_u16(r)?;
                let bits = read_u16(r)?;
                if audio_format != 1 {
                    return Err(AudioError::UnsupportedEncoding {
                        reason: format!("audio format {audio_format}, only PCM (1) is supported"),
                    });
                }
                if bits != 16 {
                    return Err(AudioError::UnsupportedEncoding {
                        reason: format!("{bits} bits per sample, only 16 is supported"),
                    });
                }
                if channels == 0 {
                    return Err(AudioError::UnsupportedEncoding {
                        reason: "zero channels".into(),
                    });
                }
                if sample_rate == 0 {
                    return Err(AudioError::UnsupportedEncoding {
                        reason: "zero sample rate".into(),
                    });
                }
                if u64::from(block_align) != u64::from(channels) * 2 {
                    return Err(AudioError::UnsupportedEncoding {
                        reason: format!(
                            "block alignment {block_align} does not match {channels} channels of 16-bit samples"
                        ),
                    });
                }
                fmt = Some((audio_format, channels, sample_rate, block_align));
            }
            b"data" => {
                let (_, channels, sample_rate, block_align) =
                    fmt.ok_or_else(|| AudioError::UnsupportedEncoding {
                        reason: "data chunk precedes fmt chunk".into(),
                    })?;
                if pos + size > end {
                    return Err(AudioError::TruncatedData {
                        reason: format!(
                            "data chunk claims {size} bytes but only {} remain",
                            end.saturating_sub(pos)
                        ),
                    });
                }
                if size == 0 {
                    return Err(AudioError::TruncatedData {
                        reason: "empty data chunk".into(),
                    });
                }
                if size % u64::from(block_align) != 0 {
                    return Err(AudioError::TruncatedData {
                        reason: format!("data chunk of {size} bytes ends mid sample frame"),
                    });
                }
                return Ok(WavInfo {
                    sample_rate_hz: sample_rate,
                    channels,
                    n_frames: size / u64::from(block_align),
                    data_start: pos,
                });
            }
            _ => {}
        }

        // Chunks are word-aligned: a chunk with odd size is followed
        // by one pad byte that is not counted in the size field.
        let advance = size + (size & 1);
        let next = pos.checked_add(advance).ok_or_else(|| AudioError::NotRiff {
            reason: "chunk size overflows the file".into(),
        })?;
        if next > end {
            return Err(AudioError::TruncatedData {
                reason: "chunk ends past end of file".into(),
            });
        }
        r.seek(SeekFrom::Start(next)).map_err(io_error)?;
    }
}

/// Reads `n_frames` sample frames starting at frame `start_frame` and
/// keeps the first channel of each frame.
fn read_samples<R: Read + Seek>(
    r: &mut R,
    info: &WavInfo,
    start_frame: u64,
    n_frames: u64,
) -> Result<Vec<f64>, AudioError> {
    let frame_bytes = u64::from(info.channels) * 2;
    r.seek(SeekFrom::Start(info.data_start + start_frame * frame_bytes))
        .map_err(io_error)?;
    let mut raw = vec![0u8; (n_frames * frame_bytes) as usize];
    r.read_exact(&mut raw).map_err(io_error)?;
    let step = frame_bytes as usize;
    let mut samples = Vec::with_capacity(n_frames as usize);
    for frame in raw.chunks_exact(step) {
        let v = i16::from_le_bytes([frame[0], frame[1]]);
        samples.push(f64::from(v) / 32768.0);
    }
    Ok(samples)
}

fn check_policy(info: &WavInfo, policy: ChannelPolicy) -> Result<(), AudioError> {
    if info.channels > 1 && policy == ChannelPolicy::RejectMultichannel {
        return Err(AudioError::MultichannelRejected {
            channels: info.channels,
        });
    }
    Ok(())
}

/// Decodes a whole WAV file into memory.
pub fn decode_wav(path: &Path, policy: ChannelPolicy) -> Result<AudioClip, AudioError> {
    let file = File::open(path).map_err(|e| AudioError::IoFailure {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut reader = BufReader::new(file);
    let info = parse_header(&mut reader).map_err(|e| e.at(path))?;
    check_policy(&info, policy)?;
    let samples = read_samples(&mut reader, &info, 0, info.n_frames).map_err(|e| e.at(path))?;
    Ok(AudioClip {
        samples,
        sample_rate_hz: info.sample_rate_hz,
        source_path: Some(path.to_path_buf()),
        offset_s: 0.0,
    })
}

/// Decodes a WAV image held in memory; used by tests and fuzzing.
pub fn decode_wav_bytes(bytes: &[u8], policy: ChannelPolicy) -> Result<AudioClip, AudioError> {
    let mut cursor = io::Cursor::new(bytes);
    let info = parse_header(&mut cursor)?;
    check_policy(&info, policy)?;
    let samples = read_samples(&mut cursor, &info, 0, info.n_frames)?;
    Ok(AudioClip {
        samples,
        sample_rate_hz: info.sample_rate_hz,
        source_path: None,
        offset_s: 0.0,
    })
}

/// Reads only the WAV header, without decoding samples.
pub fn wav_info(path: &Path) -> Result<WavInfo, AudioError> {
    let file = File::open(path).map_err(|e| AudioError::IoFailure {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut reader = BufReader::new(file);
    parse_header(&mut reader).map_err(|e| e.at(path))
}

/// Decodes at most `max_dur_s` seconds starting at `start_s`, without
/// reading the rest of the file. The clip's `offset_s` records where
/// the decoded span begins; the span is clamped to the end of file.
pub fn decode_wav_span(
    path: &Path,
    policy: ChannelPolicy,
    start_s: f64,
    max_dur_s: f64,
) -> Result<AudioClip, AudioError> {
    assert!(start_s >= 0.0 && max_dur_s > 0.0, "span must be nonnegative and nonempty");
    let file = File::open(path).map_err(|e| AudioError::IoFailure {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut reader = BufReader::new(file);
    let info = parse_header(&mut reader).map_err(|e| e.at(path))?;
    check_policy(&info, policy)?;

    let rate = f64::from(info.sample_rate_hz);
    let start_frame = (start_s * rate).round() as u64;
    if start_frame >= info.n_frames {
        return Err(AudioError::OutOfRange {
            start_s,
            end_s: start_s + max_dur_s,
            duration_s: info.duration_s(),
        });
    }
    let want = (max_dur_s * rate).round() as u64;
    let n = want.min(info.n_frames - start_frame);
    let samples = read_samples(&mut reader, &info, start_frame, n).map_err(|e| e.at(path))?;
    Ok(AudioClip {
        samples,
        sample_rate_hz: info.sample_rate_hz,
        source_path: Some(path.to_path_buf()),
        offset_s: start_frame as f64 / rate,
    })
}

/// Extracts the samples between `start_s` and `end_s`.
///
/// The result's `offset_s` is shifted by `start_s` so event times stay
/// absolute; sample values are bit-identical to the source range.
pub fn slice_clip(clip: &AudioClip, start_s: f64, end_s: f64) -> Result<AudioClip, AudioError> {
    let duration = clip.duration_s();
    if !(0.0 <= start_s && start_s < end_s && end_s <= duration) {
        return Err(AudioError::OutOfRange {
            start_s,
            end_s,
            duration_s: duration,
        });
    }
    let rate = f64::from(clip.sample_rate_hz);
    let start_idx = (start_s * rate).round() as usize;
    let count = ((end_s - start_s) * rate).round() as usize;
    let count = count.min(clip.samples.len() - start_idx);
    Ok(AudioClip {
        samples: clip.samples[start_idx..start_idx + count].to_vec(),
        sample_rate_hz: clip.sample_rate_hz,
        source_path: clip.source_path.clone(),
        offset_s: clip.offset_s + start_s,
    })
}

/// Quantizes one sample to 16-bit PCM: scale by 32768, round half away
/// from zero, clamp to `[-32768, 32767]`.
pub fn quantize_sample(v: f64) -> i16 {
    (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Encodes a clip as a mono 16-bit PCM WAV image.
pub fn encode_wav_bytes(clip: &AudioClip) -> Vec<u8> {
    let data_bytes = 2 * clip.samples.len() as u32;
    let mut out = Vec::with_capacity(44 + data_bytes as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_bytes).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_bytes.to_le_bytes());
    for &s in &clip.samples {
        out.extend_from_slice(&quantize_sample(s).to_le_bytes());
    }
    out
}

/// Writes a clip to disk as mono 16-bit PCM WAV.
pub fn encode_wav(clip: &AudioClip, path: &Path) -> Result<(), AudioError> {
    std::fs::write(path, encode_wav_bytes(clip)).map_err(|e| AudioError::IoFailure {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Deterministic, sortable filename for an event clip:
/// `<source-stem>_<start>_<end>_<label>.wav` with times fixed to three
/// decimals.
pub fn event_clip_filename(source: &Path, start_s: f64, end_s: f64, label: &str) -> String {
    let stem = source
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "clip".to_string());
    format!("{stem}_{start_s:.3}_{end_s:.3}_{label}.wav")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use proptest::prelude::*;
    use rand::Rng;

    /// Hand-rolled WAV image builder, independent of `encode_wav_bytes`.
    fn build_wav(channels: u16, bits: u16, rate: u32, frames: &[Vec<i16>], junk_chunk: bool) -> Vec<u8> {
        let block_align = channels * (bits / 8);
        let data: Vec<u8> = frames
            .iter()
            .flat_map(|f| f.iter().flat_map(|s| s.to_le_bytes()))
            .collect();
        let mut body = Vec::new();
        body.extend_from_slice(b"WAVE");
        if junk_chunk {
            body.extend_from_slice(b"LIST");
            body.extend_from_slice(&5u32.to_le_bytes());
            body.extend_from_slice(b"INFOx");
            body.push(0); // pad byte for the odd-sized chunk
        }
        body.extend_from_slice(b"fmt ");
        body.extend_from_slice(&16u32.to_le_bytes());
        body.extend_from_slice(&1u16.to_le_bytes());
        body.extend_from_slice(&channels.to_le_bytes());
        body.extend_from_slice(&rate.to_le_bytes());
        body.extend_from_slice(&(rate * u32::from(block_align)).to_le_bytes());
        body.extend_from_slice(&block_align.to_le_bytes());
        body.extend_from_slice(&bits.to_le_bytes());
        body.extend_from_slice(b"data");
        body.extend_from_slice(&(data.len() as u32).to_le_bytes());
        body.extend_from_slice(&data);
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&body);
        out
    }

    fn mono_frames(samples: &[i16]) -> Vec<Vec<i16>> {
        samples.iter().map(|&s| vec![s]).collect()
    }

    #[test]
    fn decodes_one_second_of_silence() {
        let bytes = build_wav(1, 16, 16_000, &mono_frames(&vec![0; 16_000]), false);
        let clip = decode_wav_bytes(&bytes, ChannelPolicy::RejectMultichannel).unwrap();
        assert_eq!(clip.samples.len(), 16_000);
        assert_eq!(clip.sample_rate_hz, 16_000);
        assert!(clip.samples.iter().all(|&s| s == 0.0));
        assert_eq!(clip.duration_s(), 1.0);
    }

    #[test]
    fn decoding_scales_by_32768() {
        let bytes = build_wav(1, 16, 16_000, &mono_frames(&[32767, -32768, 16384]), false);
        let clip = decode_wav_bytes(&bytes, ChannelPolicy::RejectMultichannel).unwrap();
        assert_eq!(clip.samples[0], 32767.0 / 32768.0);
        assert_eq!(clip.samples[1], -1.0);
        assert_eq!(clip.samples[2], 0.5);
    }

    #[test]
    fn rejects_non_16_bit() {
        let bytes = build_wav(1, 8, 16_000, &mono_frames(&[0, 0]), false);
        assert!(matches!(
            decode_wav_bytes(&bytes, ChannelPolicy::RejectMultichannel),
            Err(AudioError::UnsupportedEncoding { .. })
        ));
    }

    #[test]
    fn rejects_non_pcm_format() {
        let mut bytes = build_wav(1, 16, 16_000, &mono_frames(&[0, 0]), false);
        bytes[20] = 3; // IEEE float format tag
        assert!(matches!(
            decode_wav_bytes(&bytes, ChannelPolicy::RejectMultichannel),
            Err(AudioError::UnsupportedEncoding { .. })
        ));
    }

    #[test]
    fn channel_policy_controls_stereo_handling() {
        let frames = vec![vec![100, -7], vec![200, -7], vec![300, -7]];
        let bytes = build_wav(2, 16, 16_000, &frames, false);
        assert!(matches!(
            decode_wav_bytes(&bytes, ChannelPolicy::RejectMultichannel),
            Err(AudioError::MultichannelRejected { channels: 2 })
        ));
        let clip = decode_wav_bytes(&bytes, ChannelPolicy::FirstChannel).unwrap();
        let expected: Vec<f64> = [100, 200, 300].iter().map(|&v| f64::from(v) / 32768.0).collect();
        assert_eq!(clip.samples, expected);
    }

    #[test]
    fn tolerates_extra_chunks_before_data() {
        let bytes = build_wav(1, 16, 8_000, &mono_frames(&[1, 2, 3]), true);
        let clip = decode_wav_bytes(&bytes, ChannelPolicy::RejectMultichannel).unwrap();
        assert_eq!(clip.samples.len(), 3);
        assert_eq!(clip.sample_rate_hz, 8_000);
    }

    #[test]
    fn rejects_truncated_payload() {
        let mut bytes = build_wav(1, 16, 16_000, &mono_frames(&[1, 2, 3, 4]), false);
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(
            decode_wav_bytes(&bytes, ChannelPolicy::RejectMultichannel),
            Err(AudioError::TruncatedData { .. })
        ));
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            decode_wav_bytes(b"not audio at all", ChannelPolicy::RejectMultichannel),
            Err(AudioError::NotRiff { .. })
        ));
        assert!(matches!(
            decode_wav_bytes(b"", ChannelPolicy::RejectMultichannel),
            Err(AudioError::NotRiff { .. })
        ));
    }

    #[test]
    fn quantizer_matches_documented_rules() {
        assert_eq!(quantize_sample(0.5), 16384);
        assert_eq!(quantize_sample(1.0), 32767);
        assert_eq!(quantize_sample(-1.0), -32768);
        assert_eq!(quantize_sample(0.0), 0);
        assert_eq!(quantize_sample(32767.0 / 32768.0), 32767);
        // Half away from zero in both directions.
        assert_eq!(quantize_sample(1.5 / 32768.0), 2);
        assert_eq!(quantize_sample(-1.5 / 32768.0), -2);
    }

    #[test]
    fn encode_decode_round_trips_payload() {
        let clip = AudioClip {
            samples: vec![0.0, 0.5, -0.25, 32767.0 / 32768.0, -1.0],
            sample_rate_hz: 16_000,
            source_path: None,
            offset_s: 0.0,
        };
        let decoded = decode_wav_bytes(&encode_wav_bytes(&clip), ChannelPolicy::RejectMultichannel).unwrap();
        assert_eq!(decoded.samples, clip.samples);
        assert_eq!(decoded.sample_rate_hz, 16_000);
    }

    #[test]
    fn slice_identity() {
        let clip = AudioClip {
            samples: (0..1600).map(|i| f64::from(i as i16) / 32768.0).collect(),
            sample_rate_hz: 16_000,
            source_path: None,
            offset_s: 0.0,
        };
        let whole = slice_clip(&clip, 0.0, clip.duration_s()).unwrap();
        assert_eq!(whole.samples, clip.samples);
    }

    #[test]
    fn slice_index_arithmetic() {
        let clip = AudioClip {
            samples: (0..160_000).map(|i| f64::from((i % 3000) as i16) / 32768.0).collect(),
            sample_rate_hz: 16_000,
            source_path: None,
            offset_s: 0.0,
        };
        let cut = slice_clip(&clip, 2.0, 3.0).unwrap();
        assert_eq!(cut.samples.len(), 16_000);
        assert_eq!(cut.samples[0], clip.samples[32_000]);
        assert_eq!(cut.offset_s, 2.0);
    }

    #[test]
    fn slice_rejects_inverted_range() {
        let clip = AudioClip {
            samples: vec![0.0; 160_000],
            sample_rate_hz: 16_000,
            source_path: None,
            offset_s: 0.0,
        };
        assert!(matches!(
            slice_clip(&clip, 5.0, 4.0),
            Err(AudioError::OutOfRange { .. })
        ));
        assert!(matches!(
            slice_clip(&clip, 0.0, 11.0),
            Err(AudioError::OutOfRange { .. })
        ));
    }

    #[test]
    fn span_decode_matches_full_decode() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("span.wav");
        let mut rng = derive_rng(3, "audio-span");
        let clip = AudioClip {
            samples: (0..48_000).map(|_| f64::from(rng.gen_range(-2000i16..2000)) / 32768.0).collect(),
            sample_rate_hz: 16_000,
            source_path: None,
            offset_s: 0.0,
        };
        encode_wav(&clip, &path).unwrap();

        let full = decode_wav(&path, ChannelPolicy::RejectMultichannel).unwrap();
        let span = decode_wav_span(&path, ChannelPolicy::RejectMultichannel, 1.0, 1.0).unwrap();
        assert_eq!(span.samples, full.samples[16_000..32_000].to_vec());
        assert_eq!(span.offset_s, 1.0);

        let tail = decode_wav_span(&path, ChannelPolicy::RejectMultichannel, 2.5, 10.0).unwrap();
        assert_eq!(tail.samples.len(), 8_000);

        assert!(matches!(
            decode_wav_span(&path, ChannelPolicy::RejectMultichannel, 10.0, 1.0),
            Err(AudioError::OutOfRange { .. })
        ));
    }

    #[test]
    fn wav_info_reports_header_facts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("info.wav");
        let clip = AudioClip {
            samples: vec![0.1; 32_000],
            sample_rate_hz: 16_000,
            source_path: None,
            offset_s: 0.0,
        };
        encode_wav(&clip, &path).unwrap();
        let info = wav_info(&path).unwrap();
        assert_eq!(info.sample_rate_hz, 16_000);
        assert_eq!(info.channels, 1);
        assert_eq!(info.n_frames, 32_000);
        assert_eq!(info.duration_s(), 2.0);
    }

    #[test]
    fn clip_filenames_are_fixed_precision() {
        let name = event_clip_filename(Path::new("/data/rec01.wav"), 1.0, 2.5, "gibbon");
        assert_eq!(name, "rec01_1.000_2.500_gibbon.wav");
        let name = event_clip_filename(Path::new("rec02.wav"), 12.3456, 18.0004, "noise");
        assert_eq!(name, "rec02_12.346_18.000_noise.wav");
    }

    proptest! {
        #[test]
        fn decode_encode_decode_is_identity(raw in proptest::collection::vec(any::<i16>(), 1..2048)) {
            let bytes = build_wav(1, 16, 16_000, &mono_frames(&raw), false);
            let first = decode_wav_bytes(&bytes, ChannelPolicy::RejectMultichannel).unwrap();
            let second =
                decode_wav_bytes(&encode_wav_bytes(&first), ChannelPolicy::RejectMultichannel).unwrap();
            prop_assert_eq!(&first.samples, &second.samples);
        }

        #[test]
        fn slice_composes_on_grid_aligned_times(
            a in 0usize..100,
            len1 in 10usize..200,
            x in 0usize..9,
            len2 in 1usize..10,
        ) {
            let rate = 1000u32;
            let clip = AudioClip {
                samples: (0..400u32).map(|i| f64::from(i % 97) / 128.0).collect(),
                sample_rate_hz: rate,
                source_path: None,
                offset_s: 0.0,
            };
            let to_s = |n: usize| n as f64 / f64::from(rate);
            prop_assume!(a + len1 <= clip.samples.len());
            prop_assume!(x + len2 <= len1);

            let outer = slice_clip(&clip, to_s(a), to_s(a + len1)).unwrap();
            let nested = slice_clip(&outer, to_s(x), to_s(x + len2)).unwrap();
            let direct = slice_clip(&clip, to_s(a + x), to_s(a + x + len2)).unwrap();
            prop_assert_eq!(nested.samples, direct.samples);
            prop_assert!((nested.offset_s - direct.offset_s).abs() < 1e-12);
        }
    }
}
