//! Generators and reference implementations shared by the integration and
//! acceptance suites. Nothing here calls into the code paths it checks.
#![allow(dead_code)]

use corae_core::analysis::{CirSeries, RatingSeries};
use corae_core::annotation::{Annotator, Direction};
use corae_core::{AnnotationLog, FrameRate, LogHeader, SamplingPolicy, Timecode};
use rand::Rng;

/// A log produced by random play / pause / arrow / clock operations, at
/// most `max_seconds` long.
pub fn random_log<R: Rng>(rng: &mut R, max_seconds: u64, rate: FrameRate) -> AnnotationLog {
    let header = LogHeader {
        session_id: "s".into(),
        participant_id: format!("P{:02}", rng.gen_range(0..100)),
        frame_rate: rate,
        ..LogHeader::default()
    };
    let policy = SamplingPolicy::new(1.0, rng.gen_bool(0.9)).unwrap();
    let mut annotator = Annotator::new(header, policy);
    annotator.toggle_playback();
    let limit = max_seconds * u64::from(rate.fps());
    let target = rng.gen_range(0..=limit);
    loop {
        let now = annotator.state().playhead().frames();
        match rng.gen_range(0..20) {
            0 => annotator.toggle_playback(),
            1..=8 => {
                let dir = if rng.gen_bool(0.5) { Direction::Left } else { Direction::Right };
                annotator.press(dir).unwrap();
            }
            _ => {
                let next = (now + rng.gen_range(1..=3 * u64::from(rate.fps()))).min(target);
                annotator.advance_to(Timecode::from_frames(next, rate));
                if next == target {
                    break;
                }
            }
        }
    }
    annotator.into_log()
}

/// Rescans the records from the start for every grid point.
pub fn brute_force_resample(log: &AnnotationLog, step: f64, duration: f64) -> Vec<i32> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * step;
        if t > duration + 1e-9 {
            break;
        }
        let mut value = None;
        for r in log.records() {
            if r.timecode.total_seconds() > t + 1e-9 {
                break;
            }
            value = Some(r.rating.value());
        }
        out.push(value.expect("first record sits at zero"));
        k += 1;
    }
    out
}

/// Ordinary least squares slope via the normal-equation closed form.
pub fn closed_form_slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let st: f64 = ts.iter().sum();
    let sy: f64 = ys.iter().sum();
    let stt: f64 = ts.iter().map(|t| t * t).sum();
    let sty: f64 = ts.iter().zip(ys).map(|(t, y)| t * y).sum();
    (n * sty - st * sy) / (n * stt - st * st)
}

/// Textbook two-pass Pearson correlation in floating point.
pub fn two_pass_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Counts crossing events by looking at every adjacent pair and every zero.
pub fn scan_crossing_count(d: &[i64]) -> usize {
    let mut count = 0;
    for i in 0..d.len() {
        if d[i] == 0 && (i == 0 || d[i - 1] != 0) {
            count += 1;
        }
        if i + 1 < d.len() && d[i] != 0 && d[i + 1] != 0 && d[i].signum() != d[i + 1].signum() {
            count += 1;
        }
    }
    count
}

/// Piecewise-constant IR from `(points, value)` segments.
pub fn piecewise_ir(segments: &[(usize, i32)]) -> RatingSeries {
    let values = segments
        .iter()
        .flat_map(|&(n, v)| std::iter::repeat_n(v, n))
        .collect();
    RatingSeries { start_time: 0.0, step: 1.0, values }
}

pub fn prefix_sums(ir: &RatingSeries) -> CirSeries {
    let mut acc = 0i64;
    let values = ir
        .values
        .iter()
        .map(|&v| {
            acc += i64::from(v);
            acc
        })
        .collect();
    CirSeries { start_time: ir.start_time, step: ir.step, values }
}

/// IR that dips for `depth_len` points at -2 then recovers at +2, starting
/// at `onset`, inside `total` points of zeros.
pub fn v_shape(onset: usize, depth_len: usize, total: usize) -> RatingSeries {
    piecewise_ir(&[
        (onset, 0),
        (depth_len, -2),
        (depth_len, 2),
        (total - onset - 2 * depth_len, 0),
    ])
}

/// Triangle wave `0,1,2,1,0,-1,-2,-1,…` over `[from, from + len)`, zero
/// elsewhere.
pub fn wave_window(from: usize, len: usize, total: usize, sign: i32) -> RatingSeries {
    const WAVE: [i32; 8] = [0, 1, 2, 1, 0, -1, -2, -1];
    let values = (0..total)
        .map(|k| {
            if (from..from + len).contains(&k) {
                sign * WAVE[(k - from) % WAVE.len()]
            } else {
                0
            }
        })
        .collect();
    RatingSeries { start_time: 0.0, step: 1.0, values }
}

pub fn within(actual: f64, expected: f64, tolerance: f64) -> bool {
    (actual - expected).abs() <= tolerance
}
