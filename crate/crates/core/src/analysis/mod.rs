//! IR/CIR curves for a dyad and the event detectors that run over them.
//!
//! Every detector works on the uniform grid produced by [`resample`]. Slopes
//! and correlations use centered windows of `window_seconds` that shrink at
//! the ends of the series instead of being dropped.

mod events;
mod report;
mod series;
mod slope;
mod synchrony;

pub use events::{
    detect_crossings, detect_drop_rebound, detect_joint_plateaus, detect_opposing_trends,
    detect_plateaus, DetectedEvent, EventDetail, EventKind, Participant,
};
pub use report::{analyze_session, AnalysisReport, ParticipantCurves, REPORT_VERSION};
pub use series::{cumulative, resample, CirSeries, DyadSeries, RatingSeries, Resampled};
pub use slope::windowed_slope;
pub use synchrony::{pearson, synchrony_score, windowed_correlation, SynchronyTrack};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("log has no records")]
    EmptyLog,
    #[error("grid step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("duration must be non-negative, got {0}")]
    InvalidDuration(f64),
    #[error("series needs at least 2 points, has {0}")]
    SeriesTooShort(usize),
    #[error("series are not aligned: {0}")]
    Misaligned(String),
    #[error("series do not overlap")]
    EmptyOverlap,
    #[error("logs use different frame rates ({0} vs {1})")]
    FrameRateMismatch(u32, u32),
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
}

/// Detector thresholds. Slopes are in CIR units per second, which equals
/// the mean IR rating over the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub step_seconds: f64,
    pub window_seconds: f64,
    pub slope_threshold: f64,
    pub plateau_epsilon: f64,
    pub sync_correlation_threshold: f64,
    pub opposition_correlation_threshold: f64,
    pub rebound_max_lag: f64,
    pub opposing_slope_ratio_tolerance: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            step_seconds: 1.0,
            window_seconds: 15.0,
            slope_threshold: 0.5,
            plateau_epsilon: 0.1,
            sync_correlation_threshold: 0.7,
            opposition_correlation_threshold: -0.7,
            rebound_max_lag: 10.0,
            opposing_slope_ratio_tolerance: 0.5,
        }
    }
}

/// Partial settings layered over a [`DetectorConfig`]; field names match
/// the CLI flags and the analysis query string.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorOverrides {
    pub window: Option<f64>,
    pub slope: Option<f64>,
    pub plateau_eps: Option<f64>,
    pub sync: Option<f64>,
    pub opposition: Option<f64>,
    pub lag: Option<f64>,
    pub ratio_tol: Option<f64>,
    pub step: Option<f64>,
}

impl DetectorOverrides {
    pub fn apply(&self, base: &DetectorConfig) -> DetectorConfig {
        let mut cfg = base.clone();
        let pairs = [
            (self.window, &mut cfg.window_seconds),
            (self.slope, &mut cfg.slope_threshold),
            (self.plateau_eps, &mut cfg.plateau_epsilon),
            (self.sync, &mut cfg.sync_correlation_threshold),
            (self.opposition, &mut cfg.opposition_correlation_threshold),
            (self.lag, &mut cfg.rebound_max_lag),
            (self.ratio_tol, &mut cfg.opposing_slope_ratio_tolerance),
            (self.step, &mut cfg.step_seconds),
        ];
        for (value, slot) in pairs {
            if let Some(v) = value {
                *slot = v;
            }
        }
        cfg
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |msg: String| Err(AnalysisError::InvalidConfig(msg));
        let finite = [
            self.step_seconds,
            self.window_seconds,
            self.slope_threshold,
            self.plateau_epsilon,
            self.sync_correlation_threshold,
            self.opposition_correlation_threshold,
            self.rebound_max_lag,
            self.opposing_slope_ratio_tolerance,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all thresholds must be finite".into());
        }
        if self.step_seconds <= 0.0 {
            return bad(format!("step_seconds must be positive, got {}", self.step_seconds));
        }
        if self.window_seconds < 2.0 * self.step_seconds {
            return bad(format!(
                "window_seconds ({}) must be at least twice the step ({})",
                self.window_seconds, self.step_seconds
            ));
        }
        if self.slope_threshold <= 0.0 {
            return bad("slope_threshold must be positive".into());
        }
        if self.plateau_epsilon < 0.0 {
            return bad("plateau_epsilon must be non-negative".into());
        }
        for (name, v) in [
            ("sync_correlation_threshold", self.sync_correlation_threshold),
            ("opposition_correlation_threshold", self.opposition_correlation_threshold),
        ] {
            if !(-1.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [-1, 1], got {v}"));
            }
        }
        if self.rebound_max_lag < 0.0 || self.opposing_slope_ratio_tolerance < 0.0 {
            return bad("lag and ratio tolerance must be non-negative".into());
        }
        Ok(())
    }

    /// Half-width of the centered window, in grid points.
    pub(crate) fn half_window(&self, step: f64) -> usize {
        half_window(self.window_seconds, step)
    }
}

pub(crate) fn half_window(window_seconds: f64, step: f64) -> usize {
    ((window_seconds / step) / 2.0 + 1e-9).floor().max(1.0) as usize
}

/// Centered window `[k − half, k + half]`, clipped to `0..len`.
pub(crate) fn window_bounds(k: usize, half: usize, len: usize) -> (usize, usize) {
    (k.saturating_sub(half), (k + half).min(len - 1))
}

/// Maximal runs of `true`, as inclusive index pairs.
pub(crate) fn runs(mask: impl IntoIterator<Item = bool>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open = None;
    let mut len = 0;
    for (i, m) in mask.into_iter().enumerate() {
        match (m, open) {
            (true, None) => open = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                open = None;
            }
            _ => {}
        }
        len = i + 1;
    }
    if let Some(s) = open {
        out.push((s, len - 1));
    }
    out
}
