mod support;

use std::fs;

use corae_core::annotation::{import_legacy, LegacyDefaults};
use corae_core::export::{export_report, ExportFormat};
use corae_core::{analyze_session, AnalysisReport, AnnotationLog, DetectorConfig, LogHeader};
use support::*;

fn stdout(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &std::process::Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn validate_reports_continuity_violation_index() {
    let ok = run(&["validate", fixture("extremes.json").to_str().unwrap()]);
    assert_eq!(code(&ok), 0);
    let bad = run(&["validate", fixture("jump.json").to_str().unwrap()]);
    assert_eq!(code(&bad), 1);
    assert!(stdout(&bad).contains("continuity violation at record 1"));
    let legacy = run(&["validate", fixture("walk_legacy.json").to_str().unwrap()]);
    assert_eq!(code(&legacy), 0);
    assert!(stdout(&legacy).starts_with("notice: legacy pair format"));
    assert_eq!(code(&run(&["validate", "/nonexistent/log.json"])), 3);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["analyze", "only-one.json"])), 2);
    assert_eq!(code(&run(&["export", "r.json", "--format", "png", "-o", "x"])), 2);
    let legacy = fixture("walk_legacy.json");
    assert_eq!(code(&run(&["validate", legacy.to_str().unwrap(), "--fps", "0"])), 2);
}

#[test]
fn import_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let legacy = fixture("walk_legacy.json");
    let o = run(&[
        "import",
        legacy.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--session-id",
        "S1",
        "--participant-id",
        "P01",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let header = LogHeader { session_id: "S1".into(), participant_id: "P01".into(), ..LogHeader::default() };
    let lib = import_legacy(&fs::read(&legacy).unwrap(), &LegacyDefaults { header }).unwrap();
    assert_eq!(fs::read(&out).unwrap(), lib.to_canonical_bytes());
    assert_eq!(fs::read(&out).unwrap(), fs::read(fixture("walk_canonical.json")).unwrap());

    let jump = fixture("jump.json");
    assert_eq!(code(&run(&["import", jump.to_str().unwrap(), "-o", out.to_str().unwrap()])), 1);
}

#[test]
fn analyze_and_export_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let a = log_from_ir("A", &v_ir(30, 150));
    let b = log_from_ir("B", &v_ir(35, 150));
    let (pa, pb) = (dir.path().join("a.json"), dir.path().join("b.json"));
    fs::write(&pa, a.to_canonical_bytes()).unwrap();
    fs::write(&pb, b.to_canonical_bytes()).unwrap();
    let report_path = dir.path().join("report.json");

    let o = run(&["analyze", pa.to_str().unwrap(), pb.to_str().unwrap(), "-o", report_path.to_str().unwrap(), "--window", "15"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let lib = analyze_session(&a, &b, &DetectorConfig::default(), None).unwrap();
    assert_eq!(fs::read(&report_path).unwrap(), lib.to_json_bytes());
    assert_eq!(stdout(&o), lib.summary_table());
    let drops = stdout(&o).lines().filter(|l| l.starts_with("drop_rebound")).count();
    assert_eq!(drops, 1, "{}", stdout(&o));

    for (format, flag) in [(ExportFormat::Csv, "csv"), (ExportFormat::SeriesJson, "series-json")] {
        let cli_dir = dir.path().join(format!("cli-{flag}"));
        let lib_dir = dir.path().join(format!("lib-{flag}"));
        let o = run(&["export", report_path.to_str().unwrap(), "--format", flag, "-o", cli_dir.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        for path in export_report(&lib, format, &lib_dir).unwrap() {
            let name = path.file_name().unwrap();
            assert_eq!(fs::read(cli_dir.join(name)).unwrap(), fs::read(&path).unwrap());
        }
    }
}

#[test]
fn zero_logs_give_plateau_and_degenerate_crossing() {
    let dir = tempfile::tempdir().unwrap();
    let zero = log_from_ir("Z", &[0; 61]);
    let p = dir.path().join("z.json");
    fs::write(&p, zero.to_canonical_bytes()).unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["analyze", p.to_str().unwrap(), p.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let report = AnalysisReport::from_json(&fs::read(&out).unwrap()).unwrap();
    let kinds: Vec<&str> = report.events.iter().map(|e| e.kind().as_str()).collect();
    assert_eq!(kinds, ["crossing", "plateau"]);
    assert_eq!((report.events[1].start, report.events[1].end), (0.0, 60.0));
}

#[test]
fn analyze_failures() {
    let dir = tempfile::tempdir().unwrap();
    let good = fixture("extremes.json");
    let out = dir.path().join("r.json");
    let bad = run(&["analyze", good.to_str().unwrap(), fixture("jump.json").to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&bad), 1);
    let missing = run(&["analyze", good.to_str().unwrap(), "/nonexistent.json", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&missing), 3);
    let bad_cfg = run(&["analyze", good.to_str().unwrap(), good.to_str().unwrap(), "-o", out.to_str().unwrap(), "--window", "1"]);
    assert_eq!(code(&bad_cfg), 1);
    let unwritable = run(&["analyze", good.to_str().unwrap(), good.to_str().unwrap(), "-o", "/nonexistent/dir/r.json"]);
    assert_eq!(code(&unwritable), 3);

    let mut rate25 = AnnotationLog::parse(&fs::read(&good).unwrap()).unwrap().header().clone();
    rate25.frame_rate = corae_core::FrameRate::new(25).unwrap();
    let p25 = dir.path().join("25.json");
    fs::write(&p25, AnnotationLog::start(rate25).to_canonical_bytes()).unwrap();
    let mismatch = run(&["analyze", good.to_str().unwrap(), p25.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&mismatch), 1);
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("frame rate"));

    fs::write(&out, b"{}").unwrap();
    assert_eq!(code(&run(&["export", out.to_str().unwrap(), "-o", dir.path().to_str().unwrap()])), 1);
}
