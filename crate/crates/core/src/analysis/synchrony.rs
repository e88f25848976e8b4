use serde::{Deserialize, Serialize};

use super::events::{DetectedEvent, EventDetail};
use super::{half_window, runs, window_bounds, AnalysisError, DetectorConfig, RatingSeries};

/// Pearson correlation of two integer sequences, or `None` when either is
/// constant (zero variance).
///
/// Sums are accumulated exactly in integers, so the only rounding happens in
/// the final division.
pub fn pearson(x: &[i32], y: &[i32]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "pearson inputs must have equal length");
    let n = x.len() as i128;
    if n < 2 {
        return None;
    }
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0i128, 0i128, 0i128, 0i128, 0i128);
    for (&a, &b) in x.iter().zip(y) {
        let (a, b) = (i128::from(a), i128::from(b));
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    let var_x = n * sxx - sx * sx;
    let var_y = n * syy - sy * sy;
    if var_x == 0 || var_y == 0 {
        return None;
    }
    let cov = n * sxy - sx * sy;
    let r = cov as f64 / ((var_x * var_y) as f64).sqrt();
    Some(r.clamp(-1.0, 1.0))
}

/// Pearson correlation over a centered window at each grid point.
pub fn windowed_correlation(
    a: &RatingSeries,
    b: &RatingSeries,
    window_seconds: f64,
) -> Result<Vec<Option<f64>>, AnalysisError> {
    if a.len() != b.len() || a.start_time != b.start_time || a.step != b.step {
        return Err(AnalysisError::Misaligned("IR series differ in grid".into()));
    }
    if a.is_empty() {
        return Err(AnalysisError::SeriesTooShort(0));
    }
    if window_seconds.is_nan() || window_seconds < 2.0 * a.step {
        return Err(AnalysisError::InvalidConfig(format!(
            "window {window_seconds} s is shorter than two steps"
        )));
    }
    let half = half_window(window_seconds, a.step);
    Ok((0..a.len())
        .map(|k| {
            let (lo, hi) = window_bounds(k, half, a.len());
            pearson(&a.values[lo..=hi], &b.values[lo..=hi])
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynchronyTrack {
    /// `None` where either window is constant.
    pub scores: Vec<Option<f64>>,
    pub events: Vec<DetectedEvent>,
}

/// Windowed IR correlation plus the intervals where it stays at or beyond
/// the synchrony / opposition thresholds.
pub fn synchrony_score(
    a: &RatingSeries,
    b: &RatingSeries,
    cfg: &DetectorConfig,
) -> Result<SynchronyTrack, AnalysisError> {
    let scores = windowed_correlation(a, b, cfg.window_seconds)?;
    let mut events = Vec::new();
    for synchrony in [true, false] {
        let hit = |r: f64| {
            if synchrony {
                r >= cfg.sync_correlation_threshold
            } else {
                r <= cfg.opposition_correlation_threshold
            }
        };
        let mask = scores.iter().map(|s| s.is_some_and(hit));
        for (s, e) in runs(mask) {
            if e == s {
                continue;
            }
            let window: Vec<f64> = scores[s..=e].iter().flatten().copied().collect();
            let mean = window.iter().sum::<f64>() / window.len() as f64;
            let detail = if synchrony {
                EventDetail::SynchronyWindow {
                    mean_correlation: mean,
                    peak_correlation: window.iter().copied().fold(f64::MIN, f64::max),
                }
            } else {
                EventDetail::OppositionWindow {
                    mean_correlation: mean,
                    peak_correlation: window.iter().copied().fold(f64::MAX, f64::min),
                }
            };
            events.push(DetectedEvent {
                start: a.time_at(s),
                end: a.time_at(e),
                detail,
            });
        }
    }
    Ok(SynchronyTrack { scores, events })
}
