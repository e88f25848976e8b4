//! Core library for continuous retrospective affect annotation.
//!
//! - [`timeline`]: frame-accurate timecodes and the bounded rating scale.
//! - [`annotation`]: the one-step slider, timecoded rating logs, and their
//!   canonical JSON form.
//! - [`analysis`]: IR/CIR curves for a dyad and event detection over them.
//! - [`export`]: CSV / JSON tables for plotting.

pub mod analysis;
pub mod annotation;
pub mod export;
pub mod timeline;

pub use analysis::{analyze_session, AnalysisReport, DetectorConfig};
pub use annotation::{AnnotationLog, AnnotationRecord, Cause, LogError, LogHeader, SamplingPolicy};
pub use timeline::{FrameRate, Rating, RatingScale, Timecode};
