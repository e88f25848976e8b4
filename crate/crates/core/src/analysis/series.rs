use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::annotation::AnnotationLog;

/// Tolerance for snapping real-valued grid arithmetic onto whole steps.
const GRID_EPS: f64 = 1e-9;

/// An interpersonal-rating (IR) curve on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingSeries {
    pub start_time: f64,
    pub step: f64,
    pub values: Vec<i32>,
}

/// Running sum of an IR curve (the CIR curve), on the same grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirSeries {
    pub start_time: f64,
    pub step: f64,
    pub values: Vec<i64>,
}

impl RatingSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.start_time + index as f64 * self.step
    }

    pub fn end_time(&self) -> f64 {
        self.time_at(self.values.len().saturating_sub(1))
    }

    fn slice(&self, from: usize, len: usize) -> RatingSeries {
        RatingSeries {
            start_time: self.time_at(from),
            step: self.step,
            values: self.values[from..from + len].to_vec(),
        }
    }
}

impl CirSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.start_time + index as f64 * self.step
    }

    /// First differences; the inverse of [`cumulative`].
    pub fn differences(&self) -> Vec<i64> {
        let mut prev = 0;
        self.values
            .iter()
            .map(|&v| {
                let d = v - prev;
                prev = v;
                d
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub series: RatingSeries,
    /// Records after `duration` were dropped.
    pub truncated: bool,
}

/// Zero-order hold onto the grid `0, step, 2·step, …` up to `duration`:
/// each grid point takes the rating of the last record at or before it.
pub fn resample(log: &AnnotationLog, step: f64, duration: f64) -> Result<Resampled, AnalysisError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(AnalysisError::InvalidStep(step));
    }
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(AnalysisError::InvalidDuration(duration));
    }
    let records = log.records();
    if records.is_empty() {
        return Err(AnalysisError::EmptyLog);
    }
    let fps = f64::from(log.header().frame_rate.fps());
    let points = (duration / step + GRID_EPS).floor() as usize + 1;

    let mut values = Vec::with_capacity(points);
    let mut held = 0usize;
    for k in 0..points {
        // Last frame whose timestamp is still <= k·step.
        let limit = (k as f64 * step * fps + GRID_EPS).floor() as u64;
        while held + 1 < records.len() && records[held + 1].timecode.frames() <= limit {
            held += 1;
        }
        values.push(records[held].rating.value());
    }
    let truncated = records
        .last()
        .is_some_and(|r| r.timecode.total_seconds() > duration + GRID_EPS);
    Ok(Resampled {
        series: RatingSeries {
            start_time: 0.0,
            step,
            values,
        },
        truncated,
    })
}

/// Exact integer prefix sums of `ir`.
pub fn cumulative(ir: &RatingSeries) -> CirSeries {
    let values = ir
        .values
        .iter()
        .scan(0i64, |acc, &v| {
            *acc += i64::from(v);
            Some(*acc)
        })
        .collect();
    CirSeries {
        start_time: ir.start_time,
        step: ir.step,
        values,
    }
}

/// Two IR curves restricted to their common time range.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadSeries {
    a: RatingSeries,
    b: RatingSeries,
}

impl DyadSeries {
    pub fn align(a: &RatingSeries, b: &RatingSeries) -> Result<Self, AnalysisError> {
        if a.is_empty() || b.is_empty() {
            return Err(AnalysisError::EmptyOverlap);
        }
        if (a.step - b.step).abs() > GRID_EPS * a.step.max(b.step) {
            return Err(AnalysisError::Misaligned("series use different steps".into()));
        }
        let step = a.step;
        let offset = (b.start_time - a.start_time) / step;
        if (offset - offset.round()).abs() > 1e-6 {
            return Err(AnalysisError::Misaligned(
                "series start times are not on a common grid".into(),
            ));
        }
        let offset = offset.round() as i64;
        // Indices of the overlap in a's coordinates.
        let lo = offset.max(0);
        let hi = (a.len() as i64).min(offset + b.len() as i64);
        if hi <= lo {
            return Err(AnalysisError::EmptyOverlap);
        }
        let len = (hi - lo) as usize;
        Ok(DyadSeries {
            a: a.slice(lo as usize, len),
            b: b.slice((lo - offset) as usize, len),
        })
    }

    pub fn a(&self) -> &RatingSeries {
        &self.a
    }

    pub fn b(&self) -> &RatingSeries {
        &self.b
    }
}
