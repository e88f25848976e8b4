use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::slope::slopes;
use super::{runs, AnalysisError, CirSeries, DetectorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Participant {
    A,
    B,
}

/// Event classes, in the order used to break ties between events that
/// start at the same time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Crossing,
    DropRebound,
    OpposingTrends,
    Plateau,
    SynchronyWindow,
    OppositionWindow,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Crossing => "crossing",
            EventKind::DropRebound => "drop_rebound",
            EventKind::OpposingTrends => "opposing_trends",
            EventKind::Plateau => "plateau",
            EventKind::SynchronyWindow => "synchrony_window",
            EventKind::OppositionWindow => "opposition_window",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventDetail {
    Crossing {
        time: f64,
        /// The curves touch (difference exactly zero) rather than cross
        /// between grid points.
        degenerate: bool,
        leader_before: Option<Participant>,
        leader_after: Option<Participant>,
    },
    DropRebound {
        depth_a: i64,
        depth_b: i64,
        /// Rebound onset of `b` minus rebound onset of `a`, seconds.
        rebound_lag: f64,
    },
    OpposingTrends {
        rising: Participant,
        mean_slope_a: f64,
        mean_slope_b: f64,
    },
    Plateau {
        participants: Vec<Participant>,
        max_abs_slope: f64,
    },
    SynchronyWindow {
        mean_correlation: f64,
        peak_correlation: f64,
    },
    OppositionWindow {
        mean_correlation: f64,
        peak_correlation: f64,
    },
}

impl EventDetail {
    pub fn kind(&self) -> EventKind {
        match self {
            EventDetail::Crossing { .. } => EventKind::Crossing,
            EventDetail::DropRebound { .. } => EventKind::DropRebound,
            EventDetail::OpposingTrends { .. } => EventKind::OpposingTrends,
            EventDetail::Plateau { .. } => EventKind::Plateau,
            EventDetail::SynchronyWindow { .. } => EventKind::SynchronyWindow,
            EventDetail::OppositionWindow { .. } => EventKind::OppositionWindow,
        }
    }
}

/// A typed interval on the analysis grid, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedEvent {
    pub start: f64,
    pub end: f64,
    #[serde(flatten)]
    pub detail: EventDetail,
}

impl DetectedEvent {
    pub fn kind(&self) -> EventKind {
        self.detail.kind()
    }

    /// Report order: start time, then kind, then end time.
    pub fn report_order(&self, other: &Self) -> Ordering {
        self.start
            .total_cmp(&other.start)
            .then(self.kind().cmp(&other.kind()))
            .then(self.end.total_cmp(&other.end))
    }
}

fn check_aligned(a: &CirSeries, b: &CirSeries) -> Result<(), AnalysisError> {
    if a.len() != b.len() || a.start_time != b.start_time || a.step != b.step {
        return Err(AnalysisError::Misaligned(format!(
            "{} points from {} s vs {} points from {} s",
            a.len(),
            a.start_time,
            b.len(),
            b.start_time
        )));
    }
    Ok(())
}

fn cir_slopes(series: &CirSeries, cfg: &DetectorConfig) -> Result<Vec<f64>, AnalysisError> {
    if series.len() < 2 {
        return Err(AnalysisError::SeriesTooShort(series.len()));
    }
    let values: Vec<f64> = series.values.iter().map(|&v| v as f64).collect();
    Ok(slopes(&values, series.step, cfg.half_window(series.step)))
}

fn leader(d: i64) -> Option<Participant> {
    match d.cmp(&0) {
        Ordering::Greater => Some(Participant::A),
        Ordering::Less => Some(Participant::B),
        Ordering::Equal => None,
    }
}

/// One event per strict sign change of `a − b`, placed by linear
/// interpolation between the bracketing grid points. A run of exact zeros
/// yields a single degenerate event at its first point.
pub fn detect_crossings(a: &CirSeries, b: &CirSeries) -> Result<Vec<DetectedEvent>, AnalysisError> {
    check_aligned(a, b)?;
    let diff: Vec<i64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    let mut events = Vec::new();
    let mut k = 0;
    while k < diff.len() {
        if diff[k] == 0 {
            let mut end = k;
            while end + 1 < diff.len() && diff[end + 1] == 0 {
                end += 1;
            }
            let t = a.time_at(k);
            events.push(DetectedEvent {
                start: t,
                end: t,
                detail: EventDetail::Crossing {
                    time: t,
                    degenerate: true,
                    leader_before: k.checked_sub(1).and_then(|p| leader(diff[p])),
                    leader_after: diff.get(end + 1).and_then(|&d| leader(d)),
                },
            });
            k = end + 1;
            continue;
        }
        if let Some(&next) = diff.get(k + 1) {
            if next != 0 && (next > 0) != (diff[k] > 0) {
                let frac = diff[k] as f64 / (diff[k] - next) as f64;
                let t = a.time_at(k) + frac * a.step;
                events.push(DetectedEvent {
                    start: t,
                    end: t,
                    detail: EventDetail::Crossing {
                        time: t,
                        degenerate: false,
                        leader_before: leader(diff[k]),
                        leader_after: leader(next),
                    },
                });
            }
        }
        k += 1;
    }
    Ok(events)
}

/// A drop run followed by a rebound run in one series (grid indices).
#[derive(Debug, Clone, Copy)]
struct Dip {
    drop_start: usize,
    rebound_start: usize,
    rebound_end: usize,
}

fn dips(slope: &[f64], cfg: &DetectorConfig, step: f64) -> Vec<Dip> {
    let drops = runs(slope.iter().map(|&s| s <= -cfg.slope_threshold));
    let rises = runs(slope.iter().map(|&s| s >= cfg.slope_threshold));
    let max_gap = cfg.rebound_max_lag;
    let mut out = Vec::new();
    for (i, &(d_start, d_end)) in drops.iter().enumerate() {
        let Some(&(r_start, r_end)) = rises.iter().find(|r| r.0 > d_end) else {
            continue;
        };
        // Another drop before the rise means this drop never rebounded.
        if drops.get(i + 1).is_some_and(|next| next.0 < r_start) {
            continue;
        }
        if (r_start - d_end) as f64 * step > max_gap {
            continue;
        }
        out.push(Dip {
            drop_start: d_start,
            rebound_start: r_start,
            rebound_end: r_end,
        });
    }
    out
}

fn dip_depth(series: &CirSeries, dip: &Dip) -> i64 {
    let top = series.values[dip.drop_start];
    let bottom = series.values[dip.drop_start..=dip.rebound_end]
        .iter()
        .copied()
        .min()
        .unwrap_or(top);
    top - bottom
}

/// Both curves fall then recover, with drop onsets and rebound onsets each
/// within `rebound_max_lag` of the other participant's.
pub fn detect_drop_rebound(
    a: &CirSeries,
    b: &CirSeries,
    cfg: &DetectorConfig,
) -> Result<Vec<DetectedEvent>, AnalysisError> {
    check_aligned(a, b)?;
    let step = a.step;
    let dips_a = dips(&cir_slopes(a, cfg)?, cfg, step);
    let dips_b = dips(&cir_slopes(b, cfg)?, cfg, step);
    let lag = |x: usize, y: usize| (x as f64 - y as f64).abs() * step;

    let mut used = vec![false; dips_b.len()];
    let mut events = Vec::new();
    for da in &dips_a {
        let matched = dips_b.iter().enumerate().find(|(j, db)| {
            !used[*j]
                && lag(da.drop_start, db.drop_start) <= cfg.rebound_max_lag
                && lag(da.rebound_start, db.rebound_start) <= cfg.rebound_max_lag
        });
        let Some((j, db)) = matched else { continue };
        used[j] = true;
        events.push(DetectedEvent {
            start: a.time_at(da.drop_start.min(db.drop_start)),
            end: a.time_at(da.rebound_end.max(db.rebound_end)),
            detail: EventDetail::DropRebound {
                depth_a: dip_depth(a, da),
                depth_b: dip_depth(b, db),
                rebound_lag: (db.rebound_start as f64 - da.rebound_start as f64) * step,
            },
        });
    }
    Ok(events)
}

/// Maximal intervals where one curve rises and the other falls at similar
/// rates.
pub fn detect_opposing_trends(
    a: &CirSeries,
    b: &CirSeries,
    cfg: &DetectorConfig,
) -> Result<Vec<DetectedEvent>, AnalysisError> {
    check_aligned(a, b)?;
    let sa = cir_slopes(a, cfg)?;
    let sb = cir_slopes(b, cfg)?;
    let thr = cfg.slope_threshold;
    let rising: Vec<Option<Participant>> = sa
        .iter()
        .zip(&sb)
        .map(|(&x, &y)| {
            let who = if x >= thr && y <= -thr {
                Participant::A
            } else if x <= -thr && y >= thr {
                Participant::B
            } else {
                return None;
            };
            let (mx, my) = (x.abs(), y.abs());
            ((mx - my).abs() / mx.max(my) <= cfg.opposing_slope_ratio_tolerance).then_some(who)
        })
        .collect();

    let mut events = Vec::new();
    for who in [Participant::A, Participant::B] {
        for (s, e) in runs(rising.iter().map(|r| *r == Some(who))) {
            if e == s {
                continue;
            }
            let n = (e - s + 1) as f64;
            events.push(DetectedEvent {
                start: a.time_at(s),
                end: a.time_at(e),
                detail: EventDetail::OpposingTrends {
                    rising: who,
                    mean_slope_a: sa[s..=e].iter().sum::<f64>() / n,
                    mean_slope_b: sb[s..=e].iter().sum::<f64>() / n,
                },
            });
        }
    }
    events.sort_by(|x, y| x.report_order(y));
    Ok(events)
}

fn plateau_events(
    flat: &[bool],
    max_abs: impl Fn(usize, usize) -> f64,
    series: &CirSeries,
    cfg: &DetectorConfig,
    participants: Vec<Participant>,
) -> Vec<DetectedEvent> {
    runs(flat.iter().copied())
        .into_iter()
        .filter(|&(s, e)| (e - s) as f64 * series.step + 1e-9 >= cfg.window_seconds)
        .map(|(s, e)| DetectedEvent {
            start: series.time_at(s),
            end: series.time_at(e),
            detail: EventDetail::Plateau {
                participants: participants.clone(),
                max_abs_slope: max_abs(s, e),
            },
        })
        .collect()
}

fn max_abs_in(slope: &[f64], s: usize, e: usize) -> f64 {
    slope[s..=e].iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Maximal intervals at least `window_seconds` long where the windowed
/// slope stays within `±plateau_epsilon`. The returned events name no
/// participant; see [`detect_joint_plateaus`] for the dyad form.
pub fn detect_plateaus(
    series: &CirSeries,
    cfg: &DetectorConfig,
) -> Result<Vec<DetectedEvent>, AnalysisError> {
    let slope = cir_slopes(series, cfg)?;
    let flat: Vec<bool> = slope.iter().map(|s| s.abs() <= cfg.plateau_epsilon).collect();
    Ok(plateau_events(
        &flat,
        |s, e| max_abs_in(&slope, s, e),
        series,
        cfg,
        Vec::new(),
    ))
}

/// Intervals where both curves plateau at the same time.
pub fn detect_joint_plateaus(
    a: &CirSeries,
    b: &CirSeries,
    cfg: &DetectorConfig,
) -> Result<Vec<DetectedEvent>, AnalysisError> {
    check_aligned(a, b)?;
    let sa = cir_slopes(a, cfg)?;
    let sb = cir_slopes(b, cfg)?;
    let eps = cfg.plateau_epsilon;
    let flat: Vec<bool> = sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| x.abs() <= eps && y.abs() <= eps)
        .collect();
    Ok(plateau_events(
        &flat,
        |s, e| max_abs_in(&sa, s, e).max(max_abs_in(&sb, s, e)),
        a,
        cfg,
        vec![Participant::A, Participant::B],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cir(values: Vec<i64>) -> CirSeries {
        CirSeries { start_time: 0.0, step: 1.0, values }
    }

    fn crossing_times(events: &[DetectedEvent]) -> Vec<(f64, bool)> {
        events
            .iter()
            .map(|e| match e.detail {
                EventDetail::Crossing { time, degenerate, .. } => (time, degenerate),
                _ => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn simple_crossing_interpolates() {
        let a = cir(vec![0, 1, 2, 3]);
        let b = cir(vec![3, 2, 1, 0]);
        let ev = detect_crossings(&a, &b).unwrap();
        assert_eq!(crossing_times(&ev), [(1.5, false)]);
        assert_eq!(crossing_times(&detect_crossings(&b, &a).unwrap()), [(1.5, false)]);
    }

    #[test]
    fn identical_curves_one_degenerate_event() {
        let a = cir(vec![0, 1, 3, 3, 2]);
        let ev = detect_crossings(&a, &a).unwrap();
        assert_eq!(crossing_times(&ev), [(0.0, true)]);
    }

    #[test]
    fn touching_zero_is_degenerate() {
        let a = cir(vec![0, 1, 2, 1, 0]);
        let b = cir(vec![2, 2, 2, 2, 2]);
        let ev = detect_crossings(&a, &b).unwrap();
        assert_eq!(crossing_times(&ev), [(2.0, true)]);
        let EventDetail::Crossing { leader_before, leader_after, .. } = ev[0].detail else {
            unreachable!()
        };
        assert_eq!((leader_before, leader_after), (Some(Participant::B), Some(Participant::B)));
    }

    #[test]
    fn misaligned_pair_rejected() {
        assert!(detect_crossings(&cir(vec![0, 1]), &cir(vec![0])).is_err());
    }

    #[test]
    fn constant_pair_has_no_dips() {
        let z = cir(vec![0; 60]);
        assert!(detect_drop_rebound(&z, &z, &DetectorConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn same_sign_lines_not_opposing() {
        let up = cir((0..60).collect());
        assert!(detect_opposing_trends(&up, &up, &DetectorConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn opposing_lines_span_whole_range() {
        let up = cir((0..=60).collect());
        let down = cir((0..=60).map(|v| -v).collect());
        let ev = detect_opposing_trends(&up, &down, &DetectorConfig::default()).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].start, ev[0].end), (0.0, 60.0));
        assert!(matches!(ev[0].detail, EventDetail::OpposingTrends { rising: Participant::A, .. }));
    }

    #[test]
    fn constant_series_single_full_plateau() {
        let ev = detect_plateaus(&cir(vec![4; 40]), &DetectorConfig::default()).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].start, ev[0].end), (0.0, 39.0));
    }

    #[test]
    fn rising_line_not_a_plateau() {
        let ev = detect_plateaus(&cir((0..40).collect()), &DetectorConfig::default()).unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn event_json_is_tagged() {
        let ev = DetectedEvent {
            start: 1.0,
            end: 2.0,
            detail: EventDetail::Plateau { participants: vec![Participant::A], max_abs_slope: 0.0 },
        };
        let json = serde_json::to_string(&ev).unwrap();
        assert_eq!(
            json,
            r#"{"start":1.0,"end":2.0,"kind":"plateau","participants":["a"],"max_abs_slope":0.0}"#
        );
        assert_eq!(serde_json::from_str::<DetectedEvent>(&json).unwrap(), ev);
    }
}
