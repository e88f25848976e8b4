//! Durable session storage.
//!
//! [`FileStore`] keeps one directory per session:
//!
//! ```text
//! sessions/<session_id>/
//!   manifest.json        immutable session settings and slot tokens
//!   slot-<i>.json        participant id and completion flag
//!   slot-<i>.journal     one `{"annotations": [...]}` line per acked batch
//!   slot-<i>.log.json    canonical log, written when the slot completes
//! ```
//!
//! A batch is fsynced before it is acknowledged. On load, a final journal
//! line without its newline is a write that never completed; it is dropped
//! and the file is truncated back to the last whole line.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use corae_core::annotation::{parse_batch, serialize_batch};
use corae_core::{AnnotationRecord, FrameRate, LogHeader, RatingScale, SamplingPolicy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("session {0} already exists")]
    AlreadyExists(String),
    #[error("corrupt store file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("storage I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_owned(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaRef {
    /// Resolved absolute path of the media file.
    pub path: PathBuf,
    pub frame_rate: FrameRate,
    pub duration_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub session_id: String,
    /// Public id under `/media/`, distinct from the session id.
    pub media_id: String,
    pub media: MediaRef,
    pub scale: RatingScale,
    pub policy: SamplingPolicy,
    pub max_media_seconds: f64,
    /// One token per participant slot, in slot order.
    pub tokens: Vec<String>,
}

impl SessionManifest {
    /// Header for logs recorded by `participant_id` in this session.
    pub fn log_header(&self, participant_id: &str) -> LogHeader {
        LogHeader {
            session_id: self.session_id.clone(),
            participant_id: participant_id.to_owned(),
            frame_rate: self.media.frame_rate,
            scale: self.scale.clone(),
            interval_seconds: self.policy.interval_seconds(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotMeta {
    pub participant_id: Option<String>,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredSlot {
    pub meta: SlotMeta,
    /// Journal contents, in append order.
    pub records: Vec<AnnotationRecord>,
    pub sealed: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredSession {
    pub manifest: SessionManifest,
    pub slots: Vec<StoredSlot>,
}

/// Persistence backend for the session service.
pub trait Store: Send + Sync {
    /// Persists a new session with empty slots.
    fn create_session(&self, manifest: &SessionManifest) -> Result<(), StoreError>;
    fn save_slot(&self, session_id: &str, slot: usize, meta: &SlotMeta) -> Result<(), StoreError>;
    /// Durably appends one batch; returns only once it is on disk.
    fn append_batch(
        &self,
        session_id: &str,
        slot: usize,
        records: &[AnnotationRecord],
    ) -> Result<(), StoreError>;
    fn write_sealed(&self, session_id: &str, slot: usize, bytes: &[u8]) -> Result<(), StoreError>;
    /// Every stored session, in no particular order.
    fn load_all(&self) -> Result<Vec<StoredSession>, StoreError>;
}

pub struct FileStore {
    root: PathBuf,
}

impl FileStore {
    pub fn open(data_dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = data_dir.into().join("sessions");
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(FileStore { root })
    }

    fn session_dir(&self, session_id: &str) -> PathBuf {
        self.root.join(session_id)
    }

    fn slot_path(&self, session_id: &str, slot: usize, suffix: &str) -> PathBuf {
        self.session_dir(session_id).join(format!("slot-{slot}{suffix}"))
    }

    fn load_session(&self, dir: &Path) -> Result<StoredSession, StoreError> {
        let manifest_path = dir.join("manifest.json");
        let manifest: SessionManifest = read_json(&manifest_path)?;
        let header = manifest.log_header("");
        let mut slots = Vec::with_capacity(manifest.tokens.len());
        for slot in 0..manifest.tokens.len() {
            let meta_path = self.slot_path(&manifest.session_id, slot, ".json");
            let meta: SlotMeta = read_json(&meta_path)?;
            let journal = self.slot_path(&manifest.session_id, slot, ".journal");
            let records = replay_journal(&journal, &header)?;
            let sealed_path = self.slot_path(&manifest.session_id, slot, ".log.json");
            let sealed = match fs::read(&sealed_path) {
                Ok(bytes) => Some(bytes),
                Err(e) if e.kind() == io::ErrorKind::NotFound => None,
                Err(e) => return Err(io_err(&sealed_path)(e)),
            };
            slots.push(StoredSlot { meta, records, sealed });
        }
        Ok(StoredSession { manifest, slots })
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

fn sync_dir(dir: &Path) -> Result<(), StoreError> {
    File::open(dir).and_then(|d| d.sync_all()).map_err(io_err(dir))
}

/// Write-to-temp, fsync, rename, fsync the directory.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))?;
    sync_dir(path.parent().expect("store paths have a parent"))
}

fn replay_journal(path: &Path, header: &LogHeader) -> Result<Vec<AnnotationRecord>, StoreError> {
    let data = match fs::read(path) {
        Ok(d) => d,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let complete = data.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let mut records = Vec::new();
    for (n, line) in data[..complete].split(|&b| b == b'\n').enumerate() {
        if line.is_empty() {
            continue;
        }
        let batch = parse_batch(line, header).map_err(|e| StoreError::Corrupt {
            path: path.to_owned(),
            message: format!("line {}: {e}", n + 1),
        })?;
        records.extend(batch);
    }
    if complete < data.len() {
        tracing::warn!(path = %path.display(), bytes = data.len() - complete, "dropping torn journal tail");
        let f = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
        f.set_len(complete as u64).map_err(io_err(path))?;
        f.sync_all().map_err(io_err(path))?;
    }
    Ok(records)
}

impl Store for FileStore {
    fn create_session(&self, manifest: &SessionManifest) -> Result<(), StoreError> {
        let dir = self.session_dir(&manifest.session_id);
        match fs::create_dir(&dir) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                return Err(StoreError::AlreadyExists(manifest.session_id.clone()))
            }
            Err(e) => return Err(io_err(&dir)(e)),
        }
        for slot in 0..manifest.tokens.len() {
            self.save_slot(&manifest.session_id, slot, &SlotMeta::default())?;
        }
        let bytes = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
        write_atomic(&dir.join("manifest.json"), &bytes)?;
        sync_dir(&self.root)
    }

    fn save_slot(&self, session_id: &str, slot: usize, meta: &SlotMeta) -> Result<(), StoreError> {
        let bytes = serde_json::to_vec(meta).expect("slot meta serializes");
        write_atomic(&self.slot_path(session_id, slot, ".json"), &bytes)
    }

    fn append_batch(
        &self,
        session_id: &str,
        slot: usize,
        records: &[AnnotationRecord],
    ) -> Result<(), StoreError> {
        let path = self.slot_path(session_id, slot, ".journal");
        let mut line = serialize_batch(records);
        line.push(b'\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let before = f.metadata().map_err(io_err(&path))?.len();
        if let Err(e) = f.write_all(&line).and_then(|()| f.sync_all()) {
            // Never leave a partial line in front of later batches.
            let _ = f.set_len(before);
            return Err(io_err(&path)(e));
        }
        Ok(())
    }

    fn write_sealed(&self, session_id: &str, slot: usize, bytes: &[u8]) -> Result<(), StoreError> {
        write_atomic(&self.slot_path(session_id, slot, ".log.json"), bytes)
    }

    fn load_all(&self) -> Result<Vec<StoredSession>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(io_err(&self.root))? {
            let entry = entry.map_err(io_err(&self.root))?;
            let dir = entry.path();
            if !dir.join("manifest.json").is_file() {
                // Creation was interrupted before the manifest landed.
                continue;
            }
            out.push(self.load_session(&dir)?);
        }
        Ok(out)
    }
}
