//! Signal-processing primitives: window functions, a radix-2 FFT,
//! power spectrograms, mel filterbanks, MFCC extraction in two modes,
//! and the type-7 quantile estimator used for adaptive thresholds.
//!
//! All operations here are pure functions of their inputs and are safe
//! to run in parallel over frames or files.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioClip;

/// Floor applied to mel filterbank energies before the log, so silent
/// windows produce finite cepstra instead of negative infinity.
pub const LOG_ENERGY_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("FFT length {len} is not a power of two")]
    NonPowerOfTwoLength { len: usize },
    #[error("clip too short: {samples} samples, need at least {needed}")]
    ClipTooShort { samples: usize, needed: usize },
    #[error("band {fmin_hz}..{fmax_hz} Hz covers {bins} spectrum bins, need at least {needed}")]
    BandTooNarrow {
        fmin_hz: f64,
        fmax_hz: f64,
        bins: usize,
        needed: usize,
    },
    #[error("empty input")]
    EmptyInput,
    #[error("clip has no samples")]
    EmptyClip,
}

/// Analysis window shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hamming,
    Hanning,
    Rectangular,
}

impl std::fmt::Display for WindowKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            WindowKind::Hamming => "hamming",
            WindowKind::Hanning => "hanning",
            WindowKind::Rectangular => "rectangular",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for WindowKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hamming" => Ok(WindowKind::Hamming),
            "hanning" => Ok(WindowKind::Hanning),
            "rectangular" => Ok(WindowKind::Rectangular),
            other => Err(format!("unknown window kind '{other}', expected hamming, hanning, or rectangular")),
        }
    }
}

/// Short-time analysis parameters for [`spectrogram`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramConfig {
    /// Samples per analysis window.
    pub window_samples: usize,
    /// Fraction of the window shared by consecutive frames, in `[0, 1)`.
    pub overlap_fraction: f64,
    /// DFT length; a power of two at least `window_samples`.
    pub dft_size: usize,
    pub window_kind: WindowKind,
}

impl Default for SpectrogramConfig {
    /// 1600-sample (100 ms at 16 kHz) Hamming window, no overlap,
    /// 2048-point DFT.
    fn default() -> Self {
        SpectrogramConfig {
            window_samples: 1600,
            overlap_fraction: 0.0,
            dft_size: 2048,
            window_kind: WindowKind::Hamming,
        }
    }
}

impl SpectrogramConfig {
    /// Panics when a field violates the documented invariants; called
    /// by every operation that consumes the config.
    pub fn check(&self) {
        assert!(self.window_samples >= 2, "window_samples must be at least 2");
        assert!(
            (0.0..1.0).contains(&self.overlap_fraction),
            "overlap_fraction must lie in [0, 1)"
        );
        assert!(
            self.dft_size >= self.window_samples,
            "dft_size {} is smaller than window_samples {}",
            self.dft_size,
            self.window_samples
        );
    }

    /// Frame advance in samples implied by the overlap fraction.
    pub fn hop_samples(&self) -> usize {
        let hop = (self.window_samples as f64 * (1.0 - self.overlap_fraction)).round();
        (hop as usize).max(1)
    }
}

/// Time-frequency power matrix produced by [`spectrogram`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// `power[frame][bin]`, each entry `|X[k]|^2 >= 0`.
    pub power: Vec<Vec<f64>>,
    /// Seconds of signal inside one analysis window.
    pub frame_duration_s: f64,
    /// Seconds between consecutive frame starts.
    pub hop_s: f64,
    /// Frequency step between adjacent bins.
    pub bin_hz: f64,
    /// Absolute time of the first frame's first sample.
    pub start_offset_s: f64,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.power.len()
    }

    pub fn n_bins(&self) -> usize {
        self.power.first().map_or(0, Vec::len)
    }

    /// Absolute start time of frame `idx`.
    pub fn frame_start_s(&self, idx: usize) -> f64 {
        self.start_offset_s + idx as f64 * self.hop_s
    }

    /// Total time span covered by the frames, from the start of the
    /// first to the end of the last.
    pub fn span_s(&self) -> f64 {
        if self.power.is_empty() {
            0.0
        } else {
            (self.n_frames() - 1) as f64 * self.hop_s + self.frame_duration_s
        }
    }
}

/// MFCC extraction parameters shared by both extraction modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    /// Number of triangular mel filters.
    pub n_filters: usize,
    /// Cepstral coefficients kept per window (`n_cep <= n_filters`).
    pub n_cep: usize,
    /// Lower edge of the analysis band in Hz.
    pub fmin_hz: f64,
    /// Upper edge of the analysis band in Hz; at most Nyquist.
    pub fmax_hz: f64,
    /// Window length in seconds for [`mfcc_frames`].
    pub win_s: f64,
    /// Append first-difference deltas in [`mfcc_fixed`].
    pub include_deltas: bool,
    /// Number of equal-duration windows in [`mfcc_fixed`].
    pub n_fixed_windows: usize,
}

impl Default for MfccConfig {
    /// 26 filters, 12 coefficients, 400..1500 Hz, 0.25 s windows,
    /// 9 fixed windows with deltas.
    fn default() -> Self {
        MfccConfig {
            n_filters: 26,
            n_cep: 12,
            fmin_hz: 400.0,
            fmax_hz: 1500.0,
            win_s: 0.25,
            include_deltas: true,
            n_fixed_windows: 9,
        }
    }
}

impl MfccConfig {
    fn check(&self, sample_rate_hz: u32) {
        assert!(self.n_filters >= 1, "n_filters must be positive");
        assert!(
            self.n_cep >= 1 && self.n_cep <= self.n_filters,
            "n_cep must lie in 1..=n_filters"
        );
        let nyquist = f64::from(sample_rate_hz) / 2.0;
        assert!(
            self.fmin_hz >= 0.0 && self.fmin_hz < self.fmax_hz && self.fmax_hz <= nyquist,
            "band must satisfy 0 <= fmin < fmax <= Nyquist ({nyquist} Hz)"
        );
        assert!(self.win_s > 0.0, "win_s must be positive");
        assert!(self.n_fixed_windows >= 1, "n_fixed_windows must be positive");
    }

    /// Length of the vector produced by [`mfcc_fixed`] under this
    /// config: one block of `n_cep` statics per window, one block of
    /// deltas per window transition when enabled, plus the duration.
    pub fn fixed_vector_len(&self) -> usize {
        let statics = self.n_fixed_windows * self.n_cep;
        let deltas = if self.include_deltas {
            (self.n_fixed_windows - 1) * self.n_cep
        } else {
            0
        };
        statics + deltas + 1
    }
}

/// Fixed-length feature vector consumed by the classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: Option<String>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Evaluates a window function of the given kind and length.
///
/// All coefficients lie in `[0, 1]` and the window is symmetric.
/// Lengths below 2 are a programming error.
pub fn window_function(kind: WindowKind, n: usize) -> Vec<f64> {
    assert!(n >= 2, "window length must be at least 2");
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| {
            let phase = std::f64::consts::TAU * i as f64 / denom;
            match kind {
                WindowKind::Hamming => 0.54 - 0.46 * phase.cos(),
                WindowKind::Hanning => 0.5 - 0.5 * phase.cos(),
                WindowKind::Rectangular => 1.0,
            }
        })
        .collect()
}

/// Radix-2 FFT. The forward transform is unnormalized,
/// `X[k] = sum_n x[n] exp(-2 pi i k n / N)`; the inverse divides by `N`
/// so `fft(fft(x), inverse=true)` returns `x`.
pub fn fft(signal: &[Complex64], inverse: bool) -> Result<Vec<Complex64>, DspError> {
    let n = signal.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(DspError::NonPowerOfTwoLength { len: n });
    }
    let mut data = signal.to_vec();
    if n == 1 {
        return Ok(data);
    }

    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }

    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let step = Complex64::from_polar(1.0, sign * std::f64::consts::TAU / len as f64);
        for start in (0..n).step_by(len) {
            let mut w = Complex64::new(1.0, 0.0);
            for k in start..start + len / 2 {
                let a = data[k];
                let b = data[k + len / 2] * w;
                data[k] = a + b;
                data[k + len / 2] = a - b;
                w *= step;
            }
        }
        len <<= 1;
    }

    if inverse {
        let scale = 1.0 / n as f64;
        for v in &mut data {
            *v *= scale;
        }
    }
    Ok(data)
}

/// Windows, zero-pads, and transforms one frame of real samples,
/// returning the one-sided power spectrum over bins `0..=dft_size/2`.
fn frame_power(samples: &[f64], window: Option<&[f64]>, dft_size: usize) -> Result<Vec<f64>, DspError> {
    let mut frame = vec![Complex64::new(0.0, 0.0); dft_size];
    match window {
        Some(w) => {
            for (slot, (&s, &c)) in frame.iter_mut().zip(samples.iter().zip(w)) {
                slot.re = s * c;
            }
        }
        None => {
            for (slot, &s) in frame.iter_mut().zip(samples) {
                slot.re = s;
            }
        }
    }
    let spectrum = fft(&frame, false)?;
    Ok(spectrum[..dft_size / 2 + 1].iter().map(Complex64::norm_sqr).collect())
}

/// Computes a power spectrogram over non-overlapping or overlapping
/// windows. Trailing samples that do not fill a window are dropped.
pub fn spectrogram(clip: &AudioClip, cfg: &SpectrogramConfig) -> Result<Spectrogram, DspError> {
    cfg.check();
    if !cfg.dft_size.is_power_of_two() {
        return Err(DspError::NonPowerOfTwoLength { len: cfg.dft_size });
    }
    let n = clip.samples.len();
    if n < cfg.window_samples {
        return Err(DspError::ClipTooShort {
            samples: n,
            needed: cfg.window_samples,
        });
    }

    let hop = cfg.hop_samples();
    let window = window_function(cfg.window_kind, cfg.window_samples);
    let n_frames = (n - cfg.window_samples) / hop + 1;
    let mut power = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let start = f * hop;
        let frame = &clip.samples[start..start + cfg.window_samples];
        power.push(frame_power(frame, Some(&window), cfg.dft_size)?);
    }

    let rate = f64::from(clip.sample_rate_hz);
    Ok(Spectrogram {
        power,
        frame_duration_s: cfg.window_samples as f64 / rate,
        hop_s: hop as f64 / rate,
        bin_hz: rate / cfg.dft_size as f64,
        start_offset_s: clip.offset_s,
    })
}

/// Hz to mel, `2595 log10(1 + f / 700)`.
pub fn mel_scale(f_hz: f64) -> f64 {
    assert!(f_hz >= 0.0, "frequency must be nonnegative");
    2595.0 * (1.0 + f_hz / 700.0).log10()
}

/// Mel to Hz; exact inverse of [`mel_scale`].
pub fn inv_mel_scale(mel: f64) -> f64 {
    700.0 * (10.0_f64.powf(mel / 2595.0) - 1.0)
}

/// Builds a triangular mel filterbank as a `[n_filters][n_bins]`
/// weight matrix over the one-sided spectrum of a `dft_size` DFT.
///
/// Filter peaks sit at `n_filters + 2` points equally spaced in mel
/// between `fmin_hz` and `fmax_hz`; each filter rises linearly in Hz
/// from the previous peak and falls to the next.
pub fn mel_filterbank(
    n_filters: usize,
    fmin_hz: f64,
    fmax_hz: f64,
    dft_size: usize,
    sample_rate_hz: u32,
) -> Result<Vec<Vec<f64>>, DspError> {
    assert!(n_filters >= 1, "n_filters must be positive");
    let nyquist = f64::from(sample_rate_hz) / 2.0;
    assert!(
        fmin_hz >= 0.0 && fmin_hz < fmax_hz && fmax_hz <= nyquist,
        "band must satisfy 0 <= fmin < fmax <= Nyquist ({nyquist} Hz)"
    );

    let n_bins = dft_size / 2 + 1;
    let bin_hz = f64::from(sample_rate_hz) / dft_size as f64;
    let in_band = (0..n_bins)
        .filter(|&k| {
            let f = k as f64 * bin_hz;
            f >= fmin_hz && f <= fmax_hz
        })
        .count();
    let needed = n_filters + 2;
    if in_band < needed {
        return Err(DspError::BandTooNarrow {
            fmin_hz,
            fmax_hz,
            bins: in_band,
            needed,
        });
    }

    let mel_lo = mel_scale(fmin_hz);
    let mel_hi = mel_scale(fmax_hz);
    let peaks_hz: Vec<f64> = (0..n_filters + 2)
        .map(|i| inv_mel_scale(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_filters + 1) as f64))
        .collect();

    let mut bank = vec![vec![0.0; n_bins]; n_filters];
    for (m, filter) in bank.iter_mut().enumerate() {
        let (lo, mid, hi) = (peaks_hz[m], peaks_hz[m + 1], peaks_hz[m + 2]);
        for (k, w) in filter.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            *w = if f >= lo && f <= mid {
                (f - lo) / (mid - lo)
            } else if f > mid && f <= hi {
                (hi - f) / (hi - mid)
            } else {
                0.0
            };
        }
    }
    Ok(bank)
}

/// Orthonormal DCT-II. For constant input `v` the first coefficient is
/// `sqrt(M) * v` and all others are zero; applying [`dct_iii_orthonormal`]
/// afterwards reconstructs the input.
pub fn dct_ii_orthonormal(input: &[f64]) -> Vec<f64> {
    let m = input.len();
    assert!(m >= 1, "DCT input must be nonempty");
    let scale0 = (1.0 / m as f64).sqrt();
    let scale = (2.0 / m as f64).sqrt();
    (0..m)
        .map(|k| {
            let sum: f64 = input
                .iter()
                .enumerate()
                .map(|(n, &x)| {
                    x * (std::f64::consts::PI * k as f64 * (2 * n + 1) as f64 / (2 * m) as f64).cos()
                })
                .sum();
            if k == 0 {
                scale0 * sum
            } else {
                scale * sum
            }
        })
        .collect()
}

/// Inverse of [`dct_ii_orthonormal`] (the orthonormal DCT-III).
pub fn dct_iii_orthonormal(coeffs: &[f64]) -> Vec<f64> {
    let m = coeffs.len();
    assert!(m >= 1, "DCT input must be nonempty");
    let scale0 = (1.0 / m as f64).sqrt();
    let scale = (2.0 / m as f64).sqrt();
    (0..m)
        .map(|n| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| {
                    let basis =
                        (std::f64::consts::PI * k as f64 * (2 * n + 1) as f64 / (2 * m) as f64).cos();
                    let a = if k == 0 { scale0 } else { scale };
                    a * c * basis
                })
                .sum()
        })
        .collect()
}

/// MFCCs for one window of raw samples: zero-pad to `dft_size`, take
/// the power spectrum, weight by the filterbank, log with the energy
/// floor, DCT, and keep the first `n_cep` coefficients.
fn window_mfcc(
    samples: &[f64],
    bank: &[Vec<f64>],
    dft_size: usize,
    n_cep: usize,
) -> Result<Vec<f64>, DspError> {
    let power = frame_power(samples, None, dft_size)?;
    let log_energies: Vec<f64> = bank
        .iter()
        .map(|filter| {
            let e: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
            e.max(LOG_ENERGY_FLOOR).ln()
        })
        .collect();
    let mut ceps = dct_ii_orthonormal(&log_energies);
    ceps.truncate(n_cep);
    Ok(ceps)
}

/// MFCC matrix over consecutive non-overlapping windows of
/// [`MfccConfig::win_s`] seconds, plus per-frame start times.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccFrames {
    /// `coefficients[frame][cep]`.
    pub coefficients: Vec<Vec<f64>>,
    /// Absolute start time of each frame.
    pub frame_times_s: Vec<f64>,
    /// Seconds of signal per frame.
    pub frame_duration_s: f64,
}

/// Computes MFCCs over consecutive non-overlapping windows; trailing
/// samples that do not fill a window are dropped.
pub fn mfcc_frames(clip: &AudioClip, cfg: &MfccConfig) -> Result<MfccFrames, DspError> {
    cfg.check(clip.sample_rate_hz);
    let rate = f64::from(clip.sample_rate_hz);
    let win = (cfg.win_s * rate).round() as usize;
    let win = win.max(2);
    let n = clip.samples.len();
    if n < win {
        return Err(DspError::ClipTooShort {
            samples: n,
            needed: win,
        });
    }

    let dft_size = win.next_power_of_two();
    let bank = mel_filterbank(cfg.n_filters, cfg.fmin_hz, cfg.fmax_hz, dft_size, clip.sample_rate_hz)?;
    let n_frames = n / win;
    let mut coefficients = Vec::with_capacity(n_frames);
    let mut frame_times_s = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let start = f * win;
        coefficients.push(window_mfcc(
            &clip.samples[start..start + win],
            &bank,
            dft_size,
            cfg.n_cep,
        )?);
        frame_times_s.push(clip.offset_s + start as f64 / rate);
    }
    Ok(MfccFrames {
        coefficients,
        frame_times_s,
        frame_duration_s: win as f64 / rate,
    })
}

/// Summarizes a whole clip as one fixed-length vector: the clip is cut
/// into [`MfccConfig::n_fixed_windows`] equal-duration windows, each
/// yields `n_cep` coefficients, first differences between consecutive
/// windows are appended when `include_deltas` is set, and the clip
/// duration in seconds is the final element.
///
/// The vector length is [`MfccConfig::fixed_vector_len`]; the defaults
/// give `9 * 12 + 8 * 12 + 1 = 205`.
pub fn mfcc_fixed(clip: &AudioClip, cfg: &MfccConfig) -> Result<FeatureVector, DspError> {
    cfg.check(clip.sample_rate_hz);
    let n = clip.samples.len();
    if n == 0 {
        return Err(DspError::EmptyClip);
    }
    let w = cfg.n_fixed_windows;
    if n < w {
        return Err(DspError::ClipTooShort { samples: n, needed: w });
    }

    let bounds: Vec<usize> = (0..=w)
        .map(|i| (i as f64 * n as f64 / w as f64).round() as usize)
        .collect();
    let longest = bounds.windows(2).map(|b| b[1] - b[0]).max().unwrap();
    let dft_size = longest.next_power_of_two().max(2);
    let bank = mel_filterbank(cfg.n_filters, cfg.fmin_hz, cfg.fmax_hz, dft_size, clip.sample_rate_hz)?;

    let mut statics = Vec::with_capacity(w);
    for i in 0..w {
        let seg = &clip.samples[bounds[i]..bounds[i + 1]];
        statics.push(window_mfcc(seg, &bank, dft_size, cfg.n_cep)?);
    }

    let mut values = Vec::with_capacity(cfg.fixed_vector_len());
    for s in &statics {
        values.extend_from_slice(s);
    }
    if cfg.include_deltas {
        for t in 0..w - 1 {
            for (next, cur) in statics[t + 1].iter().zip(&statics[t]) {
                values.push(next - cur);
            }
        }
    }
    values.push(clip.duration_s());
    Ok(FeatureVector { values, label: None })
}

/// Linear-interpolation quantile (R type 7): with the values sorted
/// ascending and `h = (n - 1) q`, returns
/// `x[floor(h)] + (h - floor(h)) * (x[floor(h) + 1] - x[floor(h)])`.
pub fn quantile_type7(values: &[f64], q: f64) -> Result<f64, DspError> {
    if values.is_empty() {
        return Err(DspError::EmptyInput);
    }
    assert!((0.0..=1.0).contains(&q), "quantile must lie in [0, 1]");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 {
        Ok(sorted[lo])
    } else {
        Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
    }
}
