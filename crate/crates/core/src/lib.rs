//! Four-class rhythm classification for short single-lead ECG recordings.
//!
//! The pipeline classifies a 9-60 second single-channel ECG as normal sinus
//! rhythm (`N`), atrial fibrillation (`A`), other rhythm (`O`), or noise (`~`):
//!
//! 1. Baseline wander removal and QRS detection ([`signal`], [`qrs`]).
//! 2. A template-matching signal quality gate; low-quality records are
//!    classified as noise without further processing ([`sqi`]).
//! 3. QRS-aligned spectrogram segments classified by a densely connected
//!    convolutional network with row-wise batch normalization
//!    ([`spectrogram`], [`nn`]).
//! 4. When the network cannot separate `N` from `O`, a 437-feature
//!    AdaBoost-abstain post-classifier casts the final vote
//!    ([`features`], [`ensemble`]).
//!
//! [`pipeline`] wires the stages together; [`io`] provides the record file
//! format, label files, and a synthetic ECG generator used by the tests and
//! the CLI.

pub mod ensemble;
pub mod error;
pub mod features;
pub mod io;
pub mod nn;
pub mod pipeline;
pub mod qrs;
pub mod signal;
pub mod spectrogram;
pub mod sqi;

pub use error::Error;
pub use features::FeatureVector;
pub use io::record::EcgRecord;
pub use nn::{Model, ModelKind};
pub use pipeline::{PipelineConfig, RhythmLabel};
pub use qrs::{Detector, QrsAnnotation};
pub use spectrogram::{SpectroSegment, Spectrogram};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
