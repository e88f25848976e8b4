//! Plot-ready exports of an [`AnalysisReport`]: aligned IR/CIR columns plus
//! an events sidecar.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnalysisReport, DetectedEvent};

pub const SERIES_CSV: &str = "series.csv";
pub const EVENTS_CSV: &str = "events.csv";
pub const SERIES_JSON: &str = "series.json";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("unknown export format {0:?} (expected csv or series-json)")]
    UnknownFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    SeriesJson,
}

impl FromStr for ExportFormat {
    type Err = ExportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "series-json" => Ok(ExportFormat::SeriesJson),
            other => Err(ExportError::UnknownFormat(other.to_owned())),
        }
    }
}

/// One aligned row of the series table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub ir_a: i32,
    pub ir_b: i32,
    pub cir_a: i64,
    pub cir_b: i64,
}

pub fn series_rows(report: &AnalysisReport) -> Vec<SeriesRow> {
    (0..report.len())
        .map(|k| SeriesRow {
            t: report.time_at(k),
            ir_a: report.a.ir[k],
            ir_b: report.b.ir[k],
            cir_a: report.a.cir[k],
            cir_b: report.b.cir[k],
        })
        .collect()
}

/// Header `t,ir_a,ir_b,cir_a,cir_b`, one row per grid point.
pub fn write_series_csv<W: Write>(report: &AnalysisReport, out: W) -> Result<(), ExportError> {
    let mut writer = csv::Writer::from_writer(out);
    for row in series_rows(report) {
        writer.serialize(row)?;
    }
    if report.is_empty() {
        writer.write_record(["t", "ir_a", "ir_b", "cir_a", "cir_b"])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_series_csv<R: Read>(input: R) -> Result<Vec<SeriesRow>, ExportError> {
    let mut reader = csv::Reader::from_reader(input);
    let rows = reader.deserialize().collect::<Result<Vec<SeriesRow>, _>>()?;
    Ok(rows)
}

/// Header `kind,start,end,detail`; `detail` holds the event's JSON.
pub fn write_events_csv<W: Write>(events: &[DetectedEvent], out: W) -> Result<(), ExportError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["kind", "start", "end", "detail"])?;
    for event in events {
        let detail = serde_json::to_string(&event.detail).expect("event detail serializes");
        writer.write_record([
            event.kind().as_str(),
            &event.start.to_string(),
            &event.end.to_string(),
            &detail,
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SeriesColumns<'a> {
    t: Vec<f64>,
    ir_a: &'a [i32],
    ir_b: &'a [i32],
    cir_a: &'a [i64],
    cir_b: &'a [i64],
    events: &'a [DetectedEvent],
}

pub fn series_json(report: &AnalysisReport) -> Vec<u8> {
    let columns = SeriesColumns {
        t: (0..report.len()).map(|k| report.time_at(k)).collect(),
        ir_a: &report.a.ir,
        ir_b: &report.b.ir,
        cir_a: &report.a.cir,
        cir_b: &report.b.cir,
        events: &report.events,
    };
    let mut out = serde_json::to_vec_pretty(&columns).expect("columns serialize");
    out.push(b'\n');
    out
}

/// Writes the export files for `format` into `dir` (created if missing)
/// and returns their paths.
pub fn export_report(
    report: &AnalysisReport,
    format: ExportFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>, ExportError> {
    fs::create_dir_all(dir)?;
    match format {
        ExportFormat::Csv => {
            let series = dir.join(SERIES_CSV);
            let events = dir.join(EVENTS_CSV);
            write_series_csv(report, fs::File::create(&series)?)?;
            write_events_csv(&report.events, fs::File::create(&events)?)?;
            Ok(vec![series, events])
        }
        ExportFormat::SeriesJson => {
            let path = dir.join(SERIES_JSON);
            fs::write(&path, series_json(report))?;
            Ok(vec![path])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{DetectorConfig, EventDetail, ParticipantCurves, REPORT_VERSION};

    fn report() -> AnalysisReport {
        AnalysisReport {
            version: REPORT_VERSION.into(),
            frame_rate: 30,
            start_time: 0.0,
            step: 1.0,
            config: DetectorConfig::default(),
            a: ParticipantCurves { participant_id: "A".into(), ir: vec![1, 1, -2, 0], cir: vec![1, 2, 0, 0] },
            b: ParticipantCurves { participant_id: "B".into(), ir: vec![0, -1, 0, 1], cir: vec![0, -1, -1, 0] },
            synchrony: vec![None; 4],
            events: vec![DetectedEvent {
                start: 3.0,
                end: 3.0,
                detail: EventDetail::Crossing { time: 3.0, degenerate: true, leader_before: None, leader_after: None },
            }],
            warnings: vec![],
        }
    }

    #[test]
    fn four_points_five_lines() {
        let mut buf = Vec::new();
        write_series_csv(&report(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(text.lines().next(), Some("t,ir_a,ir_b,cir_a,cir_b"));
        assert_eq!(text.lines().nth(3), Some("2.0,-2,0,0,-1"));
        let rows = read_series_csv(buf.as_slice()).unwrap();
        assert_eq!(rows, series_rows(&report()));
    }

    #[test]
    fn events_sidecar_rows_match_events() {
        let mut buf = Vec::new();
        write_events_csv(&report().events, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + report().events.len());
        assert!(text.lines().nth(1).unwrap().starts_with("crossing,3,3,"));
    }

    #[test]
    fn unknown_format() {
        assert!(matches!("png".parse::<ExportFormat>(), Err(ExportError::UnknownFormat(_))));
        assert_eq!("series-json".parse::<ExportFormat>().unwrap(), ExportFormat::SeriesJson);
    }
}
