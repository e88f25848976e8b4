//! Annotation logs: timecoded rating records and the invariants every
//! accepted log satisfies.
//!
//! A log is valid when
//! - every rating lies within the header's scale,
//! - timecodes are non-decreasing and use the header's frame rate,
//! - the first record (if any) sits at `00:00:00:00`,
//! - consecutive ratings differ by at most one point,
//! - a `change` record differs from its predecessor by exactly one point.

mod format;
mod slider;

pub use format::{
    import_legacy, parse_any, parse_batch, serialize_batch, LegacyDefaults, SourceFormat,
};
pub use slider::{Annotator, AnnotatorEvent, Direction, SliderState, StepOutcome};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeline::{FrameRate, Rating, RatingScale, Timecode, TimelineError};

pub const LOG_VERSION: &str = "1";

/// Why a record was written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cause {
    /// Periodic sample on the media clock.
    Interval,
    /// The slider moved.
    Change,
}

impl Cause {
    pub fn as_str(self) -> &'static str {
        match self {
            Cause::Interval => "interval",
            Cause::Change => "change",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct AnnotationRecord {
    pub rating: Rating,
    pub timecode: Timecode,
    pub cause: Cause,
}

/// How often the media clock produces interval records, and whether slider
/// moves are logged as they happen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolicy")]
pub struct SamplingPolicy {
    interval_seconds: f64,
    log_on_change: bool,
}

#[derive(Deserialize)]
struct RawPolicy {
    #[serde(default = "default_interval")]
    interval_seconds: f64,
    #[serde(default = "default_true")]
    log_on_change: bool,
}

fn default_interval() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl TryFrom<RawPolicy> for SamplingPolicy {
    type Error = LogError;

    fn try_from(raw: RawPolicy) -> Result<Self, Self::Error> {
        SamplingPolicy::new(raw.interval_seconds, raw.log_on_change)
    }
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        SamplingPolicy {
            interval_seconds: 1.0,
            log_on_change: true,
        }
    }
}

impl SamplingPolicy {
    pub fn new(interval_seconds: f64, log_on_change: bool) -> Result<Self, LogError> {
        if !(interval_seconds.is_finite() && interval_seconds > 0.0) {
            return Err(LogError::Header(format!(
                "interval_seconds must be positive, got {interval_seconds}"
            )));
        }
        Ok(SamplingPolicy {
            interval_seconds,
            log_on_change,
        })
    }

    pub fn interval_seconds(&self) -> f64 {
        self.interval_seconds
    }

    pub fn log_on_change(&self) -> bool {
        self.log_on_change
    }
}

/// Everything in a log except its records.
#[derive(Debug, Clone, PartialEq)]
pub struct LogHeader {
    pub session_id: String,
    pub participant_id: String,
    pub frame_rate: FrameRate,
    pub scale: RatingScale,
    pub interval_seconds: f64,
}

impl Default for LogHeader {
    fn default() -> Self {
        LogHeader {
            session_id: String::new(),
            participant_id: String::new(),
            frame_rate: FrameRate::DEFAULT,
            scale: RatingScale::default(),
            interval_seconds: 1.0,
        }
    }
}

/// A single invariant breach, located by record index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    BadTimecode { index: usize, message: String },
    FrameRateMismatch { index: usize, found: FrameRate },
    RatingOutOfScale { index: usize, value: i64 },
    FirstRecordNotAtZero { timecode: String },
    Unsorted { index: usize },
    Continuity { index: usize, from: i64, to: i64 },
    ChangeWithoutDelta { index: usize },
}

impl Violation {
    pub fn index(&self) -> usize {
        match *self {
            Violation::BadTimecode { index, .. }
            | Violation::FrameRateMismatch { index, .. }
            | Violation::RatingOutOfScale { index, .. }
            | Violation::Unsorted { index }
            | Violation::Continuity { index, .. }
            | Violation::ChangeWithoutDelta { index } => index,
            Violation::FirstRecordNotAtZero { .. } => 0,
        }
    }

    /// Same violation, re-indexed by `offset` (used when checking a batch
    /// that continues an existing log).
    pub fn shifted(mut self, offset: isize) -> Self {
        let shift = |i: &mut usize| *i = (*i as isize + offset) as usize;
        match &mut self {
            Violation::BadTimecode { index, .. }
            | Violation::FrameRateMismatch { index, .. }
            | Violation::RatingOutOfScale { index, .. }
            | Violation::Unsorted { index }
            | Violation::Continuity { index, .. }
            | Violation::ChangeWithoutDelta { index } => shift(index),
            Violation::FirstRecordNotAtZero { .. } => {}
        }
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadTimecode { index, message } => {
                write!(f, "bad timecode at record {index}: {message}")
            }
            Violation::FrameRateMismatch { index, found } => {
                write!(f, "frame rate mismatch at record {index}: {found}")
            }
            Violation::RatingOutOfScale { index, value } => {
                write!(f, "rating out of scale at record {index}: {value}")
            }
            Violation::FirstRecordNotAtZero { timecode } => {
                write!(f, "first record must be at 00:00:00:00, found {timecode}")
            }
            Violation::Unsorted { index } => {
                write!(f, "timecode goes backwards at record {index}")
            }
            Violation::Continuity { index, from, to } => {
                write!(f, "continuity violation at record {index}: rating {from} -> {to}")
            }
            Violation::ChangeWithoutDelta { index } => {
                write!(f, "change record without a rating change at record {index}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LogError {
    #[error("malformed log document: {0}")]
    Malformed(String),
    #[error("invalid log header: {0}")]
    Header(String),
    #[error("{}", describe_violations(.0))]
    Invalid(Vec<Violation>),
}

fn describe_violations(violations: &[Violation]) -> String {
    match violations {
        [] => "invalid log".to_owned(),
        [only] => only.to_string(),
        [first, rest @ ..] => format!("{first} (and {} more)", rest.len()),
    }
}

impl LogError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            LogError::Invalid(v) => v,
            _ => &[],
        }
    }
}

impl From<TimelineError> for LogError {
    fn from(e: TimelineError) -> Self {
        LogError::Header(e.to_string())
    }
}

/// Errors from the live recording operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("continuity violation: rating {from} -> {to}")]
    Continuity { from: i32, to: i32 },
    #[error("playhead {playhead} is before the last record at {last}")]
    PlayheadRegression { last: Timecode, playhead: Timecode },
    #[error("log has no initial record")]
    NoInitialRecord,
}

/// Result of [`AnnotationLog::record_tick`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickOutcome {
    /// Number of interval records written (more than one only when the
    /// rating moved several points since the last record).
    Appended(usize),
    NotDue,
    /// Playhead is behind the log; nothing written.
    Regressed { last: Timecode, playhead: Timecode },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeOutcome {
    Appended,
    Unchanged,
}

/// Incremental validator; feed records in order.
pub(crate) struct RecordChecker<'a> {
    scale: &'a RatingScale,
    rate: FrameRate,
    prev: Option<(i64, Timecode)>,
}

impl<'a> RecordChecker<'a> {
    pub(crate) fn new(header: &'a LogHeader) -> Self {
        RecordChecker {
            scale: &header.scale,
            rate: header.frame_rate,
            prev: None,
        }
    }

    pub(crate) fn after(header: &'a LogHeader, last: Option<&AnnotationRecord>) -> Self {
        let mut checker = RecordChecker::new(header);
        checker.prev = last.map(|r| (i64::from(r.rating.value()), r.timecode));
        checker
    }

    /// Checks one record and returns the first invariant it breaks.
    pub(crate) fn check(
        &mut self,
        index: usize,
        rating: i64,
        timecode: Timecode,
        cause: Cause,
    ) -> Option<Violation> {
        let prev = self.prev.replace((rating, timecode));
        if timecode.frame_rate() != self.rate {
            return Some(Violation::FrameRateMismatch {
                index,
                found: timecode.frame_rate(),
            });
        }
        if !self.scale.contains(rating) {
            return Some(Violation::RatingOutOfScale { index, value: rating });
        }
        let Some((prev_rating, prev_tc)) = prev else {
            if timecode.frames() != 0 {
                return Some(Violation::FirstRecordNotAtZero {
                    timecode: timecode.to_string(),
                });
            }
            return None;
        };
        if timecode < prev_tc {
            return Some(Violation::Unsorted { index });
        }
        let delta = (rating - prev_rating).abs();
        if delta > 1 {
            return Some(Violation::Continuity {
                index,
                from: prev_rating,
                to: rating,
            });
        }
        if cause == Cause::Change && delta == 0 {
            return Some(Violation::ChangeWithoutDelta { index });
        }
        None
    }
}

/// One annotator's ratings over one media file.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationLog {
    header: LogHeader,
    records: Vec<AnnotationRecord>,
}

impl AnnotationLog {
    /// A header-only log with no records.
    pub fn empty(header: LogHeader) -> Self {
        AnnotationLog {
            header,
            records: Vec::new(),
        }
    }

    /// A log holding the initial neutral record at timecode zero.
    pub fn start(header: LogHeader) -> Self {
        let initial = AnnotationRecord {
            rating: header.scale.neutral(),
            timecode: Timecode::zero(header.frame_rate),
            cause: Cause::Interval,
        };
        AnnotationLog {
            header,
            records: vec![initial],
        }
    }

    pub fn from_records(
        header: LogHeader,
        records: Vec<AnnotationRecord>,
    ) -> Result<Self, LogError> {
        let log = AnnotationLog { header, records };
        let violations = log.violations();
        if violations.is_empty() {
            Ok(log)
        } else {
            Err(LogError::Invalid(violations))
        }
    }

    pub fn header(&self) -> &LogHeader {
        &self.header
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&AnnotationRecord> {
        self.records.last()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn set_participant_id(&mut self, participant_id: impl Into<String>) {
        self.header.participant_id = participant_id.into();
    }

    pub fn set_session_id(&mut self, session_id: impl Into<String>) {
        self.header.session_id = session_id.into();
    }

    /// Every invariant breach, in record order.
    pub fn violations(&self) -> Vec<Violation> {
        let mut checker = RecordChecker::new(&self.header);
        self.records
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                checker.check(i, i64::from(r.rating.value()), r.timecode, r.cause)
            })
            .collect()
    }

    /// Checks `batch` as a continuation of this log without modifying it.
    /// Violation indices are positions within `batch`.
    pub fn check_continuation(&self, batch: &[AnnotationRecord]) -> Vec<Violation> {
        let mut checker = RecordChecker::after(&self.header, self.records.last());
        batch
            .iter()
            .enumerate()
            .filter_map(|(i, r)| checker.check(i, i64::from(r.rating.value()), r.timecode, r.cause))
            .collect()
    }

    /// Appends `batch` if it validly continues the log; all or nothing.
    pub fn extend_checked(&mut self, batch: &[AnnotationRecord]) -> Result<(), LogError> {
        let violations = self.check_continuation(batch);
        if !violations.is_empty() {
            return Err(LogError::Invalid(violations));
        }
        self.records.extend_from_slice(batch);
        Ok(())
    }

    fn last_interval(&self) -> Option<&AnnotationRecord> {
        self.records.iter().rev().find(|r| r.cause == Cause::Interval)
    }

    /// Writes an interval record once the playhead is at least one interval
    /// past the last interval record.
    ///
    /// If the slider moved more than one point since the last record (only
    /// possible when change logging is off), intermediate values are written
    /// at the same timecode so the log stays continuous.
    pub fn record_tick(&mut self, state: &SliderState, policy: &SamplingPolicy) -> TickOutcome {
        let playhead = state.playhead();
        if let Some(last) = self.records.last() {
            if playhead < last.timecode {
                return TickOutcome::Regressed {
                    last: last.timecode,
                    playhead,
                };
            }
        }
        if let Some(prev) = self.last_interval() {
            let elapsed = (playhead.frames() - prev.timecode.frames()) as f64
                / f64::from(self.header.frame_rate.fps());
            if elapsed + 1e-9 < policy.interval_seconds() {
                return TickOutcome::NotDue;
            }
        }
        let target = state.current().value();
        let mut written = 0;
        if let Some(last) = self.records.last() {
            let mut walk = last.rating.value();
            while (target - walk).abs() > 1 {
                walk += (target - walk).signum();
                self.records.push(AnnotationRecord {
                    rating: self.header.scale.clamp(i64::from(walk)),
                    timecode: playhead,
                    cause: Cause::Interval,
                });
                written += 1;
            }
        }
        self.records.push(AnnotationRecord {
            rating: state.current(),
            timecode: playhead,
            cause: Cause::Interval,
        });
        TickOutcome::Appended(written + 1)
    }

    /// Writes a change record for a one-point slider move.
    pub fn record_change(&mut self, state: &SliderState) -> Result<ChangeOutcome, RecordError> {
        let last = self.records.last().ok_or(RecordError::NoInitialRecord)?;
        let (from, to) = (last.rating.value(), state.current().value());
        if from == to {
            return Ok(ChangeOutcome::Unchanged);
        }
        if (to - from).abs() != 1 {
            return Err(RecordError::Continuity { from, to });
        }
        if state.playhead() < last.timecode {
            return Err(RecordError::PlayheadRegression {
                last: last.timecode,
                playhead: state.playhead(),
            });
        }
        self.records.push(AnnotationRecord {
            rating: state.current(),
            timecode: state.playhead(),
            cause: Cause::Change,
        });
        Ok(ChangeOutcome::Appended)
    }

    /// Canonical JSON bytes; see [`AnnotationLog::parse`].
    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        format::serialize(self)
    }

    /// Parses and fully validates a canonical log document.
    pub fn parse(data: &[u8]) -> Result<Self, LogError> {
        format::parse_canonical(data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> LogHeader {
        LogHeader {
            session_id: "s".into(),
            participant_id: "P01".into(),
            ..LogHeader::default()
        }
    }

    fn tc(text: &str) -> Timecode {
        Timecode::parse(text, FrameRate::DEFAULT).unwrap()
    }

    fn rec(scale: &RatingScale, value: i64, at: &str, cause: Cause) -> AnnotationRecord {
        AnnotationRecord {
            rating: scale.rating(value).unwrap(),
            timecode: tc(at),
            cause,
        }
    }

    fn playing_at(log: &AnnotationLog, value: i64, seconds: f64) -> SliderState {
        let scale = &log.header().scale;
        SliderState::new(scale.clone(), FrameRate::DEFAULT)
            .toggle_playback()
            .with_rating(scale.clamp(value))
            .seek(Timecode::from_seconds(seconds, FrameRate::DEFAULT).unwrap())
    }

    #[test]
    fn tick_appends_after_full_interval() {
        let policy = SamplingPolicy::default();
        let mut log = AnnotationLog::start(header());
        for s in 1..=3 {
            log.record_tick(&playing_at(&log, 0, f64::from(s)), &policy);
        }
        assert_eq!(log.records().len(), 4);

        let state = playing_at(&log, 0, 4.0);
        assert_eq!(log.record_tick(&state, &policy), TickOutcome::Appended(1));
        assert_eq!(log.last().unwrap().timecode.to_string(), "00:00:04:00");
        assert_eq!(log.last().unwrap().cause, Cause::Interval);
    }

    #[test]
    fn tick_not_due_within_interval() {
        let policy = SamplingPolicy::default();
        let mut log = AnnotationLog::start(header());
        log.record_tick(&playing_at(&log, 0, 3.0), &policy);
        let before = log.clone();
        assert_eq!(log.record_tick(&playing_at(&log, 0, 3.5), &policy), TickOutcome::NotDue);
        assert_eq!(log, before);
    }

    #[test]
    fn tick_regression_leaves_log_unchanged() {
        let policy = SamplingPolicy::default();
        let mut log = AnnotationLog::start(header());
        log.record_tick(&playing_at(&log, 0, 3.0), &policy);
        let before = log.clone();
        let outcome = log.record_tick(&playing_at(&log, 0, 2.0), &policy);
        assert!(matches!(outcome, TickOutcome::Regressed { .. }));
        assert_eq!(log, before);
    }

    #[test]
    fn tick_is_idempotent_without_advance() {
        let policy = SamplingPolicy::default();
        let mut log = AnnotationLog::start(header());
        let state = playing_at(&log, 0, 5.0);
        log.record_tick(&state, &policy);
        let len = log.records().len();
        assert_eq!(log.record_tick(&state, &policy), TickOutcome::NotDue);
        assert_eq!(log.records().len(), len);
    }

    #[test]
    fn tick_walks_through_skipped_values() {
        let policy = SamplingPolicy::new(1.0, false).unwrap();
        let mut log = AnnotationLog::start(header());
        let outcome = log.record_tick(&playing_at(&log, 3, 1.0), &policy);
        assert_eq!(outcome, TickOutcome::Appended(3));
        let ratings: Vec<i32> = log.records().iter().map(|r| r.rating.value()).collect();
        assert_eq!(ratings, [0, 1, 2, 3]);
        assert!(log.violations().is_empty());
    }

    #[test]
    fn change_examples() {
        let mut log = AnnotationLog::start(header());
        let state = playing_at(&log, 1, 2.4);
        assert_eq!(log.record_change(&state), Ok(ChangeOutcome::Appended));
        let last = *log.last().unwrap();
        assert_eq!(last.rating.value(), 1);
        assert_eq!(last.timecode.to_string(), "00:00:02:12");
        assert_eq!(last.cause, Cause::Change);

        let mut log = AnnotationLog::start(header());
        let jump = playing_at(&log, 2, 1.0);
        assert_eq!(log.record_change(&jump), Err(RecordError::Continuity { from: 0, to: 2 }));
        assert_eq!(log.records().len(), 1);
    }

    #[test]
    fn change_without_delta_is_noop() {
        let scale = RatingScale::default();
        let mut log = AnnotationLog::from_records(
            header(),
            (0..=7)
                .map(|k| rec(&scale, -k, &format!("00:00:{k:02}:00"), if k == 0 { Cause::Interval } else { Cause::Change }))
                .collect(),
        )
        .unwrap();
        let len = log.records().len();
        assert_eq!(log.record_change(&playing_at(&log, -7, 9.0)), Ok(ChangeOutcome::Unchanged));
        assert_eq!(log.records().len(), len);
    }

    #[test]
    fn change_on_empty_log_is_error() {
        let mut log = AnnotationLog::empty(header());
        let state = playing_at(&log, 1, 1.0);
        assert_eq!(log.record_change(&state), Err(RecordError::NoInitialRecord));
    }

    #[test]
    fn validator_reports_each_violation_kind() {
        let scale = RatingScale::default();
        let h = header();
        let cases: Vec<(Vec<AnnotationRecord>, Violation)> = vec![
            (
                vec![rec(&scale, 0, "00:00:00:00", Cause::Interval), rec(&scale, 2, "00:00:01:00", Cause::Change)],
                Violation::Continuity { index: 1, from: 0, to: 2 },
            ),
            (
                vec![
                    rec(&scale, 0, "00:00:00:00", Cause::Interval),
                    rec(&scale, 0, "00:00:02:00", Cause::Interval),
                    rec(&scale, 1, "00:00:01:00", Cause::Change),
                ],
                Violation::Unsorted { index: 2 },
            ),
            (
                vec![rec(&scale, 0, "00:00:00:00", Cause::Interval), rec(&scale, 0, "00:00:01:00", Cause::Change)],
                Violation::ChangeWithoutDelta { index: 1 },
            ),
            (
                vec![rec(&scale, 0, "00:00:01:00", Cause::Interval)],
                Violation::FirstRecordNotAtZero { timecode: "00:00:01:00".into() },
            ),
        ];
        for (records, expected) in cases {
            let err = AnnotationLog::from_records(h.clone(), records).unwrap_err();
            assert_eq!(err.violations()[0], expected);
        }
    }

    #[test]
    fn continuation_indices_are_batch_relative() {
        let scale = RatingScale::default();
        let log = AnnotationLog::start(header());
        let batch = [
            rec(&scale, 1, "00:00:01:00", Cause::Change),
            rec(&scale, 3, "00:00:02:00", Cause::Change),
        ];
        assert_eq!(
            log.check_continuation(&batch),
            vec![Violation::Continuity { index: 1, from: 1, to: 3 }]
        );
    }
}
