//! `corae` subcommands. Each one reads its inputs, calls the library and
//! writes the result; exit codes come from [`CliError::exit_code`].

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use corae_core::analysis::DetectorOverrides;
use corae_core::annotation::{import_legacy, parse_any, LegacyDefaults, SourceFormat};
use corae_core::export::{export_report, ExportError, ExportFormat};
use corae_core::{
    analyze_session, AnalysisReport, AnnotationLog, DetectorConfig, FrameRate, LogError, LogHeader,
    RatingScale,
};
use corae_service::{ServiceConfig, Server};
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => EXIT_IO,
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Usage(_) => EXIT_USAGE,
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn stdout_err(source: io::Error) -> CliError {
    CliError::Io { path: PathBuf::from("<stdout>"), source }
}

#[derive(Debug, Parser)]
#[command(name = "corae", version, about = "Continuous retrospective affect annotation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the annotation session service.
    Serve {
        /// TOML config file; `CORAE_*` environment variables override it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check a log file and list every violation.
    Validate {
        log: PathBuf,
        #[command(flatten)]
        legacy: LegacyArgs,
    },
    /// Convert a legacy pair-format file into a canonical log.
    Import {
        legacy: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        defaults: LegacyArgs,
    },
    /// Compute IR/CIR curves and events for two logs.
    Analyze {
        a: PathBuf,
        b: PathBuf,
        #[arg(short, long, default_value = "report.json")]
        output: PathBuf,
        /// Analyze this many seconds instead of each log's own length.
        #[arg(long)]
        duration: Option<f64>,
        #[command(flatten)]
        detector: DetectorArgs,
        #[command(flatten)]
        legacy: LegacyArgs,
    },
    /// Write plot-ready tables from an analysis report.
    Export {
        report: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(short, long)]
        output: PathBuf,
    },
}

/// Header values for legacy files, which carry none.
#[derive(Debug, Clone, Args)]
pub struct LegacyArgs {
    #[arg(long, default_value_t = 30)]
    pub fps: u32,
    #[arg(long, default_value = "")]
    pub session_id: String,
    #[arg(long, default_value = "")]
    pub participant_id: String,
    #[arg(long, default_value_t = -7, allow_negative_numbers = true)]
    pub scale_min: i32,
    #[arg(long, default_value_t = 7)]
    pub scale_max: i32,
}

impl LegacyArgs {
    pub fn defaults(&self) -> Result<LegacyDefaults, CliError> {
        let usage = |e: &dyn std::fmt::Display| CliError::Usage(e.to_string());
        Ok(LegacyDefaults {
            header: LogHeader {
                session_id: self.session_id.clone(),
                participant_id: self.participant_id.clone(),
                frame_rate: FrameRate::new(self.fps).map_err(|e| usage(&e))?,
                scale: RatingScale::new(self.scale_min, self.scale_max).map_err(|e| usage(&e))?,
                interval_seconds: 1.0,
            },
        })
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct DetectorArgs {
    /// Window length in seconds.
    #[arg(long)]
    pub window: Option<f64>,
    /// Slope threshold, CIR units per second.
    #[arg(long)]
    pub slope: Option<f64>,
    #[arg(long)]
    pub plateau_eps: Option<f64>,
    #[arg(long)]
    pub sync: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub opposition: Option<f64>,
    /// Maximum drop / rebound onset lag, seconds.
    #[arg(long)]
    pub lag: Option<f64>,
    #[arg(long)]
    pub ratio_tol: Option<f64>,
    /// Grid step in seconds.
    #[arg(long)]
    pub step: Option<f64>,
}

impl DetectorArgs {
    pub fn config(&self) -> DetectorConfig {
        DetectorOverrides {
            window: self.window,
            slope: self.slope,
            plateau_eps: self.plateau_eps,
            sync: self.sync,
            opposition: self.opposition,
            lag: self.lag,
            ratio_tol: self.ratio_tol,
            step: self.step,
        }
        .apply(&DetectorConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    SeriesJson,
}

impl From<Format> for ExportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ExportFormat::Csv,
            Format::SeriesJson => ExportFormat::SeriesJson,
        }
    }
}

fn load_log(path: &Path, legacy: &LegacyArgs) -> Result<(AnnotationLog, SourceFormat), CliError> {
    let data = read(path)?;
    parse_any(&data, &legacy.defaults()?)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn list_violations(e: &LogError, out: &mut dyn Write) -> io::Result<()> {
    match e {
        LogError::Invalid(violations) => {
            for v in violations {
                writeln!(out, "{v}")?;
            }
            Ok(())
        }
        other => writeln!(out, "{other}"),
    }
}

pub fn validate(path: &Path, legacy: &LegacyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let data = read(path)?;
    match parse_any(&data, &legacy.defaults()?) {
        Ok((log, format)) => {
            if format == SourceFormat::LegacyPairs {
                writeln!(out, "notice: legacy pair format; imported with causes inferred")
                    .map_err(stdout_err)?;
            }
            writeln!(
                out,
                "ok: {} records, {} fps, last at {}",
                log.records().len(),
                log.header().frame_rate.fps(),
                log.last().map_or_else(|| "-".to_owned(), |r| r.timecode.to_string())
            )
            .map_err(stdout_err)?;
            Ok(())
        }
        Err(e) => {
            list_violations(&e, out).map_err(stdout_err)?;
            let n = e.violations().len().max(1);
            Err(CliError::Invalid(format!("{}: {n} problem(s)", path.display())))
        }
    }
}

pub fn import(input: &Path, output: &Path, defaults: &LegacyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let data = read(input)?;
    let log = import_legacy(&data, &defaults.defaults()?)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", input.display())))?;
    write(output, &log.to_canonical_bytes())?;
    writeln!(out, "wrote {} records to {}", log.records().len(), output.display())
        .map_err(stdout_err)
}

pub fn analyze(
    a: &Path,
    b: &Path,
    output: &Path,
    duration: Option<f64>,
    cfg: &DetectorConfig,
    legacy: &LegacyArgs,
    out: &mut dyn Write,
) -> Result<AnalysisReport, CliError> {
    let (log_a, _) = load_log(a, legacy)?;
    let (log_b, _) = load_log(b, legacy)?;
    let report = analyze_session(&log_a, &log_b, cfg, duration)
        .map_err(|e| CliError::Invalid(format!("analysis failed: {e}")))?;
    write(output, &report.to_json_bytes())?;
    for w in &report.warnings {
        writeln!(out, "warning: {w}").map_err(stdout_err)?;
    }
    out.write_all(report.summary_table().as_bytes()).map_err(stdout_err)?;
    Ok(report)
}

pub fn export(report: &Path, format: Format, dir: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let data = read(report)?;
    let report = AnalysisReport::from_json(&data)
        .map_err(|e| CliError::Invalid(format!("{}: not an analysis report: {e}", report.display())))?;
    let paths = export_report(&report, format.into(), dir).map_err(|e| match e {
        ExportError::Io(source) => CliError::Io { path: dir.to_owned(), source },
        ExportError::UnknownFormat(f) => CliError::Usage(format!("unknown format {f}")),
        ExportError::Csv(e) => CliError::Io { path: dir.to_owned(), source: e.into() },
    })?;
    for p in paths {
        writeln!(out, "wrote {}", p.display()).map_err(stdout_err)?;
    }
    Ok(())
}

pub fn serve(config: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = ServiceConfig::load(config).map_err(|e| match e {
        corae_service::ConfigError::Read { path, source } => CliError::Io { path, source },
        other => CliError::Invalid(other.to_string()),
    })?;
    let runtime = tokio::runtime::Runtime::new().map_err(stdout_err)?;
    runtime.block_on(async {
        let server = Server::bind(&cfg).await.map_err(serve_error)?;
        let addr = server.local_addr().map_err(stdout_err)?;
        writeln!(out, "listening on http://{addr}").map_err(stdout_err)?;
        out.flush().map_err(stdout_err)?;
        server.run().await.map_err(serve_error)
    })
}

fn serve_error(e: corae_service::ServeError) -> CliError {
    use corae_service::ServeError as E;
    match e {
        E::Bind { addr, source } => CliError::Io { path: PathBuf::from(addr.to_string()), source },
        E::Io(source) => CliError::Io { path: PathBuf::from("<server>"), source },
        other => CliError::Invalid(other.to_string()),
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Serve { config } => serve(config.as_deref(), out),
        Command::Validate { log, legacy } => validate(&log, &legacy, out),
        Command::Import { legacy, output, defaults } => import(&legacy, &output, &defaults, out),
        Command::Analyze { a, b, output, duration, detector, legacy } => {
            analyze(&a, &b, &output, duration, &detector.config(), &legacy, out).map(|_| ())
        }
        Command::Export { report, format, output } => export(&report, format, &output, out),
    }
}
