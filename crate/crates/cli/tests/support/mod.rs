//! Helpers shared by the CLI integration and acceptance suites.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use corae_core::{AnnotationLog, AnnotationRecord, Cause, FrameRate, LogHeader, RatingScale, Timecode};

pub fn corae() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corae"))
}

pub fn run(args: &[&str]) -> Output {
    corae().args(args).env("CORAE_LOG", "warn").output().expect("corae runs")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// A log whose 1 Hz resample is exactly `ir`. Each second gets one
/// interval record, preceded by the one-point change records needed to
/// get there.
pub fn log_from_ir(participant: &str, ir: &[i32]) -> AnnotationLog {
    let header = LogHeader { participant_id: participant.into(), session_id: "S".into(), ..LogHeader::default() };
    let scale = RatingScale::default();
    let mut records = Vec::new();
    let mut prev = 0;
    for (k, &target) in ir.iter().enumerate() {
        let tc = Timecode::from_frames(k as u64 * 30, FrameRate::DEFAULT);
        while prev != target {
            prev += (target - prev).signum();
            records.push(AnnotationRecord { rating: scale.rating(prev.into()).unwrap(), timecode: tc, cause: Cause::Change });
        }
        records.push(AnnotationRecord { rating: scale.rating(target.into()).unwrap(), timecode: tc, cause: Cause::Interval });
    }
    AnnotationLog::from_records(header, records).unwrap()
}

/// Zeros, a gentle dip to -2, a recovery at +2, then zeros again:
/// `onset` seconds of calm first, `total` points overall.
pub fn v_ir(onset: usize, total: usize) -> Vec<i32> {
    let mut ir = vec![0; onset];
    ir.extend([-1]);
    ir.extend([-2; 19]);
    ir.extend([-1, 0, 1]);
    ir.extend([2; 19]);
    ir.extend([1]);
    ir.resize(total, 0);
    ir
}
