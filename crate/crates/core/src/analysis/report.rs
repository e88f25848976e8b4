use serde::{Deserialize, Serialize};

use super::{
    cumulative, detect_crossings, detect_drop_rebound, detect_joint_plateaus,
    detect_opposing_trends, resample, synchrony_score, AnalysisError, CirSeries, DetectedEvent,
    DetectorConfig, DyadSeries, RatingSeries,
};
use crate::annotation::AnnotationLog;

pub const REPORT_VERSION: &str = "1";

/// One participant's curves on the shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantCurves {
    pub participant_id: String,
    pub ir: Vec<i32>,
    pub cir: Vec<i64>,
}

/// Everything computed for one dyad. Carries participant identifiers but
/// never session or access tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub version: String,
    pub frame_rate: u32,
    pub start_time: f64,
    pub step: f64,
    pub config: DetectorConfig,
    pub a: ParticipantCurves,
    pub b: ParticipantCurves,
    /// Windowed IR correlation; `null` where either window is constant.
    pub synchrony: Vec<Option<f64>>,
    pub events: Vec<DetectedEvent>,
    pub warnings: Vec<String>,
}

impl AnalysisReport {
    pub fn len(&self) -> usize {
        self.a.ir.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.ir.is_empty()
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.start_time + index as f64 * self.step
    }

    pub fn ir_series(&self, who: super::Participant) -> RatingSeries {
        let curves = match who {
            super::Participant::A => &self.a,
            super::Participant::B => &self.b,
        };
        RatingSeries {
            start_time: self.start_time,
            step: self.step,
            values: curves.ir.clone(),
        }
    }

    /// Plain-text event table: a count line, then one row per event in
    /// report order.
    pub fn summary_table(&self) -> String {
        let span = self.time_at(self.len().saturating_sub(1)) - self.start_time;
        let mut out = format!(
            "{} events over {} points ({span} s)\n",
            self.events.len(),
            self.len()
        );
        if !self.events.is_empty() {
            out.push_str(&format!("{:<18} {:>10} {:>10}\n", "kind", "start", "end"));
            for e in &self.events {
                out.push_str(&format!("{:<18} {:>10.3} {:>10.3}\n", e.kind().as_str(), e.start, e.end));
            }
        }
        out
    }

    /// Pretty-printed JSON with a trailing newline; field order is fixed by
    /// the struct layout so equal reports give equal bytes.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report is always serializable");
        out.push(b'\n');
        out
    }

    pub fn from_json(data: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(data)
    }
}

fn log_duration(log: &AnnotationLog) -> f64 {
    log.last().map_or(0.0, |r| r.timecode.total_seconds())
}

/// Resamples both logs, builds IR/CIR curves on their overlap and runs every
/// detector. `duration` bounds both logs; without it each log ends at its
/// last record.
pub fn analyze_session(
    log_a: &AnnotationLog,
    log_b: &AnnotationLog,
    cfg: &DetectorConfig,
    duration: Option<f64>,
) -> Result<AnalysisReport, AnalysisError> {
    cfg.validate()?;
    let (rate_a, rate_b) = (log_a.header().frame_rate, log_b.header().frame_rate);
    if rate_a != rate_b {
        return Err(AnalysisError::FrameRateMismatch(rate_a.fps(), rate_b.fps()));
    }
    let mut warnings = Vec::new();
    let mut series = |log: &AnnotationLog, who: &str| -> Result<RatingSeries, AnalysisError> {
        let out = resample(log, cfg.step_seconds, duration.unwrap_or_else(|| log_duration(log)))?;
        if out.truncated {
            warnings.push(format!("log {who} has records past the analysis duration"));
        }
        Ok(out.series)
    };
    let ir_a = series(log_a, "a")?;
    let ir_b = series(log_b, "b")?;
    let dyad = DyadSeries::align(&ir_a, &ir_b)?;
    let (ir_a, ir_b) = (dyad.a(), dyad.b());
    if ir_a.len() < 2 {
        return Err(AnalysisError::SeriesTooShort(ir_a.len()));
    }
    let cir_a: CirSeries = cumulative(ir_a);
    let cir_b: CirSeries = cumulative(ir_b);

    let sync = synchrony_score(ir_a, ir_b, cfg)?;
    let mut events = detect_crossings(&cir_a, &cir_b)?;
    events.extend(detect_drop_rebound(&cir_a, &cir_b, cfg)?);
    events.extend(detect_opposing_trends(&cir_a, &cir_b, cfg)?);
    events.extend(detect_joint_plateaus(&cir_a, &cir_b, cfg)?);
    events.extend(sync.events);
    events.sort_by(|x, y| x.report_order(y));

    Ok(AnalysisReport {
        version: REPORT_VERSION.to_owned(),
        frame_rate: rate_a.fps(),
        start_time: ir_a.start_time,
        step: ir_a.step,
        config: cfg.clone(),
        a: ParticipantCurves {
            participant_id: log_a.header().participant_id.clone(),
            ir: ir_a.values.clone(),
            cir: cir_a.values,
        },
        b: ParticipantCurves {
            participant_id: log_b.header().participant_id.clone(),
            ir: ir_b.values.clone(),
            cir: cir_b.values,
        },
        synchrony: sync.scores,
        events,
        warnings,
    })
}
