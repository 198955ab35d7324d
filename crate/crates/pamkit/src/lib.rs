//! Passive acoustic monitoring toolkit.
//!
//! `pamkit` finds candidate sound events in long field recordings,
//! extracts MFCC features, trains and applies classifiers (Gaussian
//! mixtures, a linear SVM, a small MLP, and LDA), scores detector
//! output against human annotations, and interpolates call counts
//! across a recorder array into a density surface.
//!
//! The crate is organized around a file-in, file-out workflow:
//!
//! * [`audio`] decodes, slices, and encodes 16-bit PCM WAV files.
//! * [`dsp`] holds the signal-processing primitives (FFT, spectrogram,
//!   mel filterbank, MFCC, quantile estimator).
//! * [`detect`] turns recordings into [`detect::SoundEvent`] lists.
//! * [`learn`] assembles labeled datasets and trains classifiers.
//! * [`eval`] matches detections against annotations and computes
//!   recall, false positives per hour, and ROC curves.
//! * [`spatial`] interpolates per-site call counts onto a grid.
//! * [`render`] writes PGM and SVG images of the above.
//! * [`pipeline`] chains detection, featurization, and classification
//!   over many recordings with bounded memory.

pub mod audio;
pub mod config;
pub mod detect;
pub mod dsp;
pub mod eval;
pub mod learn;
pub mod pipeline;
pub mod render;
pub mod rng;
pub mod spatial;

pub use audio::AudioClip;
pub use detect::SoundEvent;
pub use dsp::{FeatureVector, MfccConfig, Spectrogram, SpectrogramConfig};
pub use learn::{LabeledDataset, TrainedModel};

