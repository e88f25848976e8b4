use super::{half_window, window_bounds, AnalysisError, CirSeries};

/// Least-squares slope (value per second) over a centered window at every
/// grid point. Windows are clipped at the series ends.
pub fn windowed_slope(series: &CirSeries, window_seconds: f64) -> Result<Vec<f64>, AnalysisError> {
    if series.len() < 2 {
        return Err(AnalysisError::SeriesTooShort(series.len()));
    }
    if window_seconds.is_nan() || window_seconds < 2.0 * series.step {
        return Err(AnalysisError::InvalidConfig(format!(
            "window {window_seconds} s is shorter than two steps"
        )));
    }
    let values: Vec<f64> = series.values.iter().map(|&v| v as f64).collect();
    Ok(slopes(&values, series.step, half_window(window_seconds, series.step)))
}

pub(crate) fn slopes(values: &[f64], step: f64, half: usize) -> Vec<f64> {
    (0..values.len())
        .map(|k| {
            let (lo, hi) = window_bounds(k, half, values.len());
            fit_slope(&values[lo..=hi], step)
        })
        .collect()
}

/// Slope of `ys` against `0, step, 2·step, …`, centered to keep the sums
/// small.
fn fit_slope(ys: &[f64], step: f64) -> f64 {
    let n = ys.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &y) in ys.iter().enumerate() {
        let dt = i as f64 - t_mean;
        num += dt * (y - y_mean);
        den += dt * dt;
    }
    num / den / step
}
