//! Canonical JSON encoding of annotation logs, and the importer for the
//! older `{"<rating>": "<HH:MM:SS:FF>"}` pair form.
//!
//! The canonical writer fixes key order and layout so equal logs always
//! produce identical bytes:
//!
//! ```text
//! {
//!   "version": "1",
//!   "session_id": "…",
//!   "participant_id": "…",
//!   "frame_rate": 30,
//!   "scale": {"min": -7, "max": 7},
//!   "interval_seconds": 1.0,
//!   "annotations": [
//!     {"rating": 0, "timecode": "00:00:00:00", "cause": "interval"}
//!   ]
//! }
//! ```

use std::fmt;

use serde::de::{self, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::Deserialize;

use super::{
    AnnotationLog, AnnotationRecord, Cause, LogError, LogHeader, RecordChecker, Violation,
    LOG_VERSION,
};
use crate::timeline::{FrameRate, RatingScale, Timecode};

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization cannot fail")
}

pub(super) fn serialize(log: &AnnotationLog) -> Vec<u8> {
    let h = log.header();
    let mut out = String::with_capacity(256 + log.records().len() * 64);
    out.push_str("{\n");
    out.push_str(&format!("  \"version\": {},\n", json_string(LOG_VERSION)));
    out.push_str(&format!("  \"session_id\": {},\n", json_string(&h.session_id)));
    out.push_str(&format!(
        "  \"participant_id\": {},\n",
        json_string(&h.participant_id)
    ));
    out.push_str(&format!("  \"frame_rate\": {},\n", h.frame_rate.fps()));
    out.push_str(&format!(
        "  \"scale\": {{\"min\": {}, \"max\": {}}},\n",
        h.scale.min(),
        h.scale.max()
    ));
    out.push_str(&format!(
        "  \"interval_seconds\": {},\n",
        serde_json::to_string(&h.interval_seconds).expect("finite interval")
    ));
    if log.records().is_empty() {
        out.push_str("  \"annotations\": []\n");
    } else {
        out.push_str("  \"annotations\": [\n");
        let last = log.records().len() - 1;
        for (i, r) in log.records().iter().enumerate() {
            out.push_str(&format!(
                "    {{\"rating\": {}, \"timecode\": \"{}\", \"cause\": \"{}\"}}{}\n",
                r.rating.value(),
                r.timecode,
                r.cause.as_str(),
                if i == last { "" } else { "," }
            ));
        }
        out.push_str("  ]\n");
    }
    out.push_str("}\n");
    out.into_bytes()
}

#[derive(Deserialize)]
struct RawScale {
    min: i32,
    max: i32,
}

#[derive(Deserialize)]
struct RawRecord {
    rating: i64,
    timecode: String,
    cause: Cause,
}

#[derive(Deserialize)]
struct RawLog {
    version: String,
    session_id: String,
    participant_id: String,
    frame_rate: u32,
    scale: RawScale,
    interval_seconds: f64,
    annotations: Vec<RawRecord>,
}

pub(super) fn parse_canonical(data: &[u8]) -> Result<AnnotationLog, LogError> {
    let raw: RawLog =
        serde_json::from_slice(data).map_err(|e| LogError::Malformed(e.to_string()))?;
    if raw.version != LOG_VERSION {
        return Err(LogError::Header(format!(
            "unsupported version {:?}",
            raw.version
        )));
    }
    if !(raw.interval_seconds.is_finite() && raw.interval_seconds > 0.0) {
        return Err(LogError::Header(format!(
            "interval_seconds must be positive, got {}",
            raw.interval_seconds
        )));
    }
    let header = LogHeader {
        session_id: raw.session_id,
        participant_id: raw.participant_id,
        frame_rate: FrameRate::new(raw.frame_rate)?,
        scale: RatingScale::new(raw.scale.min, raw.scale.max)?,
        interval_seconds: raw.interval_seconds,
    };
    let entries = raw
        .annotations
        .into_iter()
        .map(|r| (r.rating, r.timecode, Some(r.cause)));
    build(header, entries)
}

#[derive(Deserialize)]
struct RawBatch {
    annotations: Vec<RawRecord>,
}

/// Parses a `{"annotations": [...]}` batch using `header`'s frame rate and
/// scale. Ordering and continuity are checked when the batch is appended.
pub fn parse_batch(data: &[u8], header: &LogHeader) -> Result<Vec<AnnotationRecord>, LogError> {
    let raw: RawBatch =
        serde_json::from_slice(data).map_err(|e| LogError::Malformed(e.to_string()))?;
    let mut violations = Vec::new();
    let mut records = Vec::with_capacity(raw.annotations.len());
    for (index, r) in raw.annotations.into_iter().enumerate() {
        let timecode = match Timecode::parse(&r.timecode, header.frame_rate) {
            Ok(tc) => tc,
            Err(e) => {
                violations.push(Violation::BadTimecode { index, message: e.to_string() });
                continue;
            }
        };
        let Ok(rating) = header.scale.rating(r.rating) else {
            violations.push(Violation::RatingOutOfScale { index, value: r.rating });
            continue;
        };
        records.push(AnnotationRecord { rating, timecode, cause: r.cause });
    }
    if violations.is_empty() {
        Ok(records)
    } else {
        Err(LogError::Invalid(violations))
    }
}

/// Single-line `{"annotations": [...]}` form of `records`.
pub fn serialize_batch(records: &[AnnotationRecord]) -> Vec<u8> {
    #[derive(serde::Serialize)]
    struct Batch<'a> {
        annotations: &'a [AnnotationRecord],
    }
    serde_json::to_vec(&Batch { annotations: records }).expect("records serialize")
}

/// Validates raw entries against `header`; a `None` cause is inferred.
fn build(
    header: LogHeader,
    entries: impl IntoIterator<Item = (i64, String, Option<Cause>)>,
) -> Result<AnnotationLog, LogError> {
    let mut violations = Vec::new();
    let mut records = Vec::new();
    {
        let mut checker = RecordChecker::new(&header);
        let mut prev_rating: Option<i64> = None;
        for (index, (rating, timecode, cause)) in entries.into_iter().enumerate() {
            let cause = cause.unwrap_or(match prev_rating {
                Some(prev) if prev != rating => Cause::Change,
                _ => Cause::Interval,
            });
            prev_rating = Some(rating);
            let timecode = match Timecode::parse(&timecode, header.frame_rate) {
                Ok(tc) => tc,
                Err(e) => {
                    violations.push(Violation::BadTimecode {
                        index,
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            if let Some(v) = checker.check(index, rating, timecode, cause) {
                violations.push(v);
                continue;
            }
            records.push(AnnotationRecord {
                rating: header
                    .scale
                    .rating(rating)
                    .expect("checker verified the bounds"),
                timecode,
                cause,
            });
        }
    }
    if violations.is_empty() {
        Ok(AnnotationLog { header, records })
    } else {
        Err(LogError::Invalid(violations))
    }
}

/// Header values for imports that carry none.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LegacyDefaults {
    pub header: LogHeader,
}

/// `(rating key, timecode)` pairs in document order, duplicates kept.
struct LegacyPairs(Vec<(String, String)>);

struct SinglePair(String, String);

impl<'de> Deserialize<'de> for SinglePair {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PairVisitor;

        impl<'de> Visitor<'de> for PairVisitor {
            type Value = SinglePair;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object with exactly one \"<rating>\": \"<timecode>\" entry")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<SinglePair, A::Error> {
                let Some((k, v)) = map.next_entry::<String, String>()? else {
                    return Err(de::Error::invalid_length(0, &self));
                };
                if map.next_key::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(2, &self));
                }
                Ok(SinglePair(k, v))
            }
        }

        deserializer.deserialize_map(PairVisitor)
    }
}

impl<'de> Deserialize<'de> for LegacyPairs {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PairsVisitor;

        impl<'de> Visitor<'de> for PairsVisitor {
            type Value = LegacyPairs;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an array of single-entry rating objects, or one object of rating entries")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<LegacyPairs, A::Error> {
                let mut pairs = Vec::new();
                while let Some(SinglePair(k, v)) = seq.next_element()? {
                    pairs.push((k, v));
                }
                Ok(LegacyPairs(pairs))
            }

            // The literal object form repeats keys; keep every entry.
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<LegacyPairs, A::Error> {
                let mut pairs = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, String>()? {
                    pairs.push((k, v));
                }
                Ok(LegacyPairs(pairs))
            }
        }

        deserializer.deserialize_any(PairsVisitor)
    }
}

/// Imports the pair form. Causes are inferred: `change` where the rating
/// differs from the previous record, `interval` otherwise.
pub fn import_legacy(data: &[u8], defaults: &LegacyDefaults) -> Result<AnnotationLog, LogError> {
    let LegacyPairs(pairs) =
        serde_json::from_slice(data).map_err(|e| LogError::Malformed(e.to_string()))?;
    let mut entries = Vec::with_capacity(pairs.len());
    for (index, (key, timecode)) in pairs.into_iter().enumerate() {
        let rating = key.trim().parse::<i64>().map_err(|_| {
            LogError::Malformed(format!("record {index}: rating key {key:?} is not an integer"))
        })?;
        entries.push((rating, timecode, None));
    }
    build(defaults.header.clone(), entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    Canonical,
    LegacyPairs,
}

/// Accepts either encoding. A document that is neither reports the
/// canonical parser's error.
pub fn parse_any(
    data: &[u8],
    defaults: &LegacyDefaults,
) -> Result<(AnnotationLog, SourceFormat), LogError> {
    let starts_with_array = data
        .iter()
        .find(|b| !b.is_ascii_whitespace())
        .is_some_and(|&b| b == b'[');
    if starts_with_array {
        return import_legacy(data, defaults).map(|log| (log, SourceFormat::LegacyPairs));
    }
    match parse_canonical(data) {
        Ok(log) => Ok((log, SourceFormat::Canonical)),
        Err(canonical_err @ LogError::Malformed(_)) => match import_legacy(data, defaults) {
            Ok(log) => Ok((log, SourceFormat::LegacyPairs)),
            Err(LogError::Malformed(_)) => Err(canonical_err),
            Err(other) => Err(other),
        },
        Err(other) => Err(other),
    }
}
