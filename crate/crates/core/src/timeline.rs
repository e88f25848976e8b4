//! Frame-accurate timecodes and the bounded rating scale.
//!
//! A [`Timecode`] is a non-drop-frame position `HH:MM:SS:FF` at an integer
//! frame rate. Internally it is a frame count, so arithmetic and ordering are
//! exact; the wire form zero-pads every field to two digits (hours and frames
//! widen when needed).

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimelineError {
    #[error("frame rate must be at least 1 fps")]
    ZeroFrameRate,
    #[error("malformed timecode {0:?}, expected HH:MM:SS:FF")]
    Malformed(String),
    #[error("{field} component {value} out of range in {text:?}")]
    OutOfRange {
        field: &'static str,
        value: u64,
        text: String,
    },
    #[error("time must be a finite non-negative number of seconds, got {0}")]
    NegativeTime(f64),
    #[error("invalid rating scale: min {min} and max {max} must satisfy min < 0 < max")]
    InvalidScale { min: i32, max: i32 },
    #[error("rating {value} outside scale [{min}, {max}]")]
    RatingOutOfScale { value: i64, min: i32, max: i32 },
}

/// Integer frames per second of the annotated media.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct FrameRate(u32);

impl FrameRate {
    pub const DEFAULT: FrameRate = FrameRate(30);

    pub fn new(frames_per_second: u32) -> Result<Self, TimelineError> {
        if frames_per_second == 0 {
            return Err(TimelineError::ZeroFrameRate);
        }
        Ok(FrameRate(frames_per_second))
    }

    pub fn fps(self) -> u32 {
        self.0
    }

    /// Digits used for the frame field on the wire (at least two).
    fn frame_width(self) -> usize {
        (self.0 - 1).to_string().len().max(2)
    }
}

impl Default for FrameRate {
    fn default() -> Self {
        FrameRate::DEFAULT
    }
}

impl TryFrom<u32> for FrameRate {
    type Error = TimelineError;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        FrameRate::new(value)
    }
}

impl From<FrameRate> for u32 {
    fn from(rate: FrameRate) -> u32 {
        rate.0
    }
}

impl fmt::Display for FrameRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} fps", self.0)
    }
}

/// A media position, stored as whole frames since zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Timecode {
    frames: u64,
    rate: FrameRate,
}

impl Timecode {
    pub fn zero(rate: FrameRate) -> Self {
        Timecode { frames: 0, rate }
    }

    pub fn from_frames(frames: u64, rate: FrameRate) -> Self {
        Timecode { frames, rate }
    }

    pub fn from_parts(
        hours: u64,
        minutes: u64,
        seconds: u64,
        frame: u64,
        rate: FrameRate,
    ) -> Result<Self, TimelineError> {
        let text = || format!("{hours:02}:{minutes:02}:{seconds:02}:{frame:02}");
        if minutes >= 60 {
            return Err(TimelineError::OutOfRange {
                field: "minute",
                value: minutes,
                text: text(),
            });
        }
        if seconds >= 60 {
            return Err(TimelineError::OutOfRange {
                field: "second",
                value: seconds,
                text: text(),
            });
        }
        if frame >= u64::from(rate.fps()) {
            return Err(TimelineError::OutOfRange {
                field: "frame",
                value: frame,
                text: text(),
            });
        }
        let whole_seconds = hours
            .checked_mul(3600)
            .and_then(|h| h.checked_add(minutes * 60 + seconds))
            .ok_or_else(|| TimelineError::Malformed(text()))?;
        let frames = whole_seconds
            .checked_mul(u64::from(rate.fps()))
            .and_then(|f| f.checked_add(frame))
            .ok_or_else(|| TimelineError::Malformed(text()))?;
        Ok(Timecode { frames, rate })
    }

    /// Parses the `HH:MM:SS:FF` wire form.
    ///
    /// Minutes and seconds are exactly two digits; hours take two or more;
    /// the frame field is exactly as wide as [`Timecode::to_string`] writes it
    /// for this frame rate.
    pub fn parse(text: &str, rate: FrameRate) -> Result<Self, TimelineError> {
        let malformed = || TimelineError::Malformed(text.to_owned());
        let mut parts = text.split(':');
        let (Some(h), Some(m), Some(s), Some(f), None) = (
            parts.next(),
            parts.next(),
            parts.next(),
            parts.next(),
            parts.next(),
        ) else {
            return Err(malformed());
        };
        let digits = |field: &str, width: Option<usize>| -> Result<u64, TimelineError> {
            let width_ok = match width {
                Some(w) => field.len() == w,
                None => field.len() >= 2,
            };
            if !width_ok || !field.bytes().all(|b| b.is_ascii_digit()) {
                return Err(malformed());
            }
            field.parse::<u64>().map_err(|_| malformed())
        };
        let hours = digits(h, None)?;
        let minutes = digits(m, Some(2))?;
        let seconds = digits(s, Some(2))?;
        let frame = digits(f, Some(rate.frame_width()))?;
        Timecode::from_parts(hours, minutes, seconds, frame, rate).map_err(|e| match e {
            TimelineError::OutOfRange { field, value, .. } => TimelineError::OutOfRange {
                field,
                value,
                text: text.to_owned(),
            },
            other => other,
        })
    }

    /// The last frame boundary at or before `seconds`.
    ///
    /// Products that land within float noise of the next frame boundary
    /// (e.g. `0.7 * 30 = 20.999…`) count as that boundary.
    pub fn from_seconds(seconds: f64, rate: FrameRate) -> Result<Self, TimelineError> {
        if !seconds.is_finite() || seconds < 0.0 {
            return Err(TimelineError::NegativeTime(seconds));
        }
        let exact = seconds * f64::from(rate.fps());
        let mut frames = exact.floor();
        if (frames + 1.0) - exact <= exact.max(1.0) * 4.0 * f64::EPSILON {
            frames += 1.0;
        }
        Ok(Timecode {
            frames: frames as u64,
            rate,
        })
    }

    pub fn frames(self) -> u64 {
        self.frames
    }

    pub fn frame_rate(self) -> FrameRate {
        self.rate
    }

    pub fn hours(self) -> u64 {
        self.whole_seconds() / 3600
    }

    pub fn minutes(self) -> u64 {
        self.whole_seconds() / 60 % 60
    }

    pub fn seconds(self) -> u64 {
        self.whole_seconds() % 60
    }

    pub fn frame(self) -> u64 {
        self.frames % u64::from(self.rate.fps())
    }

    fn whole_seconds(self) -> u64 {
        self.frames / u64::from(self.rate.fps())
    }

    pub fn total_seconds(self) -> f64 {
        self.whole_seconds() as f64 + self.frame() as f64 / f64::from(self.rate.fps())
    }

    /// Same instant re-expressed at another rate, floored to its frame grid.
    pub fn rescale(self, rate: FrameRate) -> Timecode {
        let frames =
            u128::from(self.frames) * u128::from(rate.fps()) / u128::from(self.rate.fps());
        Timecode {
            frames: frames as u64,
            rate,
        }
    }
}

impl Ord for Timecode {
    /// Orders by elapsed time; equal instants at different rates fall back
    /// to frame rate so the order stays total and consistent with `Eq`.
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = u128::from(self.frames) * u128::from(other.rate.fps());
        let rhs = u128::from(other.frames) * u128::from(self.rate.fps());
        lhs.cmp(&rhs).then(self.rate.cmp(&other.rate))
    }
}

impl PartialOrd for Timecode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for Timecode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl fmt::Display for Timecode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:02}:{:02}:{:02}:{:0width$}",
            self.hours(),
            self.minutes(),
            self.seconds(),
            self.frame(),
            width = self.rate.frame_width()
        )
    }
}

/// Display text for the two ends and the midpoint of the slider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleLabels {
    pub min: String,
    pub neutral: String,
    pub max: String,
}

impl Default for ScaleLabels {
    fn default() -> Self {
        ScaleLabels {
            min: "Disagreeable".into(),
            neutral: "Neutral".into(),
            max: "Agreeable".into(),
        }
    }
}

/// Inclusive integer bounds of the slider, with zero strictly inside.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawScale")]
pub struct RatingScale {
    min: i32,
    max: i32,
    #[serde(default, skip_serializing_if = "is_default_labels")]
    labels: ScaleLabels,
}

fn is_default_labels(labels: &ScaleLabels) -> bool {
    *labels == ScaleLabels::default()
}

#[derive(Deserialize)]
struct RawScale {
    min: i32,
    max: i32,
    #[serde(default)]
    labels: ScaleLabels,
}

impl TryFrom<RawScale> for RatingScale {
    type Error = TimelineError;

    fn try_from(raw: RawScale) -> Result<Self, Self::Error> {
        RatingScale::new(raw.min, raw.max).map(|s| s.with_labels(raw.labels))
    }
}

impl Default for RatingScale {
    fn default() -> Self {
        RatingScale {
            min: -7,
            max: 7,
            labels: ScaleLabels::default(),
        }
    }
}

impl RatingScale {
    pub fn new(min: i32, max: i32) -> Result<Self, TimelineError> {
        if !(min < 0 && max > 0) {
            return Err(TimelineError::InvalidScale { min, max });
        }
        Ok(RatingScale {
            min,
            max,
            labels: ScaleLabels::default(),
        })
    }

    pub fn with_labels(mut self, labels: ScaleLabels) -> Self {
        self.labels = labels;
        self
    }

    pub fn min(&self) -> i32 {
        self.min
    }

    pub fn max(&self) -> i32 {
        self.max
    }

    pub fn labels(&self) -> &ScaleLabels {
        &self.labels
    }

    pub fn point_count(&self) -> u32 {
        (i64::from(self.max) - i64::from(self.min) + 1) as u32
    }

    pub fn contains(&self, value: i64) -> bool {
        i64::from(self.min) <= value && value <= i64::from(self.max)
    }

    pub fn clamp(&self, value: i64) -> Rating {
        Rating(value.clamp(i64::from(self.min), i64::from(self.max)) as i32)
    }

    pub fn rating(&self, value: i64) -> Result<Rating, TimelineError> {
        if self.contains(value) {
            Ok(Rating(value as i32))
        } else {
            Err(TimelineError::RatingOutOfScale {
                value,
                min: self.min,
                max: self.max,
            })
        }
    }

    pub fn neutral(&self) -> Rating {
        Rating(0)
    }
}

/// A slider position. Only [`RatingScale`] constructs one, so a `Rating`
/// is always within the bounds of the scale that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Rating(i32);

impl Rating {
    pub fn value(self) -> i32 {
        self.0
    }
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.0)
    }
}
