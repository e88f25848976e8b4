//! Session lifecycle: creation, identifier registration, batched ingestion,
//! completion, file uploads and cached analysis.
//!
//! All methods are synchronous and may block on disk I/O. Appends to one
//! participant slot are serialized by that slot's mutex; different slots
//! and sessions proceed independently.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use corae_core::analysis::AnalysisError;
use corae_core::annotation::{parse_any, parse_batch, LegacyDefaults, SourceFormat, Violation};
use corae_core::{
    analyze_session, AnnotationLog, AnnotationRecord, DetectorConfig, FrameRate, LogError,
    RatingScale, SamplingPolicy,
};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{MediaRef, SessionManifest, SlotMeta, Store, StoreError, StoredSession};
use crate::token;

pub const MAX_PARTICIPANTS: usize = 16;
pub const MAX_IDENTIFIER_LEN: usize = 128;
const ID_ATTEMPTS: usize = 8;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown participant token")]
    UnknownToken,
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session is sealed and accepts no further annotations")]
    SessionSealed,
    #[error("this participant has already completed annotation")]
    SlotCompleted,
    #[error("a participant identifier must be registered before annotating")]
    IdentifierRequired,
    #[error("participant identifier is already set to {0:?}")]
    IdentifierConflict(String),
    #[error("invalid participant identifier: {0}")]
    InvalidIdentifier(String),
    #[error("stale batch; resume after the acknowledged position")]
    Stale(Ack),
    #[error("record {index} at {timecode} lies past the end of the media ({duration} s)")]
    BeyondMedia {
        index: usize,
        timecode: String,
        duration: f64,
    },
    #[error("cannot complete an empty log")]
    EmptyLog,
    #[error("session is not sealed yet")]
    NotSealed,
    #[error("analysis needs at least 2 logs, found {0}")]
    TooFewLogs(usize),
    #[error("no free participant slot for this upload")]
    NoFreeSlot,
    #[error("participant slot {0} already holds annotations")]
    SlotOccupied(usize),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("media: {0}")]
    Media(String),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Settings applied to sessions that do not override them.
#[derive(Debug, Clone)]
pub struct ServiceDefaults {
    pub media_dir: PathBuf,
    pub scale: RatingScale,
    pub policy: SamplingPolicy,
    pub max_media_seconds: f64,
    pub detector: DetectorConfig,
}

impl Default for ServiceDefaults {
    fn default() -> Self {
        ServiceDefaults {
            media_dir: PathBuf::from("media"),
            scale: RatingScale::default(),
            policy: SamplingPolicy::default(),
            max_media_seconds: 600.0,
            detector: DetectorConfig::default(),
        }
    }
}

fn default_participants() -> usize {
    2
}

#[derive(Debug, Clone, Deserialize)]
pub struct CreateSession {
    /// Absolute, or relative to the media directory.
    pub media_path: PathBuf,
    pub frame_rate: FrameRate,
    pub duration_seconds: f64,
    #[serde(default)]
    pub scale: Option<RatingScale>,
    #[serde(default)]
    pub policy: Option<SamplingPolicy>,
    #[serde(default = "default_participants")]
    pub participants: usize,
    #[serde(default)]
    pub max_media_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
    pub media_id: String,
    pub tokens: Vec<String>,
    /// Dashboard paths, one per participant: `/a/{token}`.
    pub urls: Vec<String>,
}

/// Where the stored log ends, for client resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub last_timecode: Option<String>,
    pub records: usize,
    /// The batch was already stored; nothing was written.
    pub duplicate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    Created,
    Annotating,
    Sealed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorInfo {
    pub slot: usize,
    pub participant_id: Option<String>,
    pub completed: bool,
    pub media_url: String,
    pub frame_rate: FrameRate,
    pub duration_seconds: f64,
    pub scale: RatingScale,
    pub policy: SamplingPolicy,
    pub ack: Ack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotStatus {
    pub participant_id: Option<String>,
    pub completed: bool,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub session_id: String,
    pub state: SessionState,
    pub slots: Vec<SlotStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadReceipt {
    pub slot: usize,
    pub participant_id: String,
    pub records: usize,
    pub legacy: bool,
}

struct Slot {
    participant_id: Option<String>,
    log: AnnotationLog,
    completed: bool,
    sealed: Option<Vec<u8>>,
}

impl Slot {
    fn ack(&self, duplicate: bool) -> Ack {
        Ack {
            last_timecode: self.log.last().map(|r| r.timecode.to_string()),
            records: self.log.records().len(),
            duplicate,
        }
    }

    fn is_fresh(&self) -> bool {
        self.participant_id.is_none() && self.log.is_empty()
    }
}

struct Session {
    manifest: SessionManifest,
    slots: Vec<Mutex<Slot>>,
    completed: AtomicUsize,
}

impl Session {
    fn sealed(&self) -> bool {
        self.completed.load(Ordering::Acquire) == self.slots.len()
    }

    fn closed_error(&self) -> ServiceError {
        if self.sealed() {
            ServiceError::SessionSealed
        } else {
            ServiceError::SlotCompleted
        }
    }

    fn info(&self, slot: usize, s: &Slot) -> AnnotatorInfo {
        AnnotatorInfo {
            slot,
            participant_id: s.participant_id.clone(),
            completed: s.completed,
            media_url: format!("/media/{}", self.manifest.media_id),
            frame_rate: self.manifest.media.frame_rate,
            duration_seconds: self.manifest.media.duration_seconds,
            scale: self.manifest.scale.clone(),
            policy: self.manifest.policy,
            ack: s.ack(false),
        }
    }

    fn check_within_media(&self, records: &[AnnotationRecord], offset: usize) -> Result<(), ServiceError> {
        let duration = self.manifest.media.duration_seconds;
        match records.iter().position(|r| r.timecode.total_seconds() > duration + 1e-9) {
            Some(i) => Err(ServiceError::BeyondMedia {
                index: offset + i,
                timecode: records[i].timecode.to_string(),
                duration,
            }),
            None => Ok(()),
        }
    }
}

/// Number of leading batch records already present as the stored tail.
/// Optional position field of an annotations batch.
#[derive(Deserialize)]
struct BatchOffset {
    #[serde(default)]
    offset: Option<usize>,
}

fn validate_identifier(raw: &str) -> Result<String, ServiceError> {
    let id = raw.trim();
    if id.is_empty() {
        return Err(ServiceError::InvalidIdentifier("must not be empty".into()));
    }
    if id.chars().count() > MAX_IDENTIFIER_LEN {
        return Err(ServiceError::InvalidIdentifier(format!(
            "longer than {MAX_IDENTIFIER_LEN} characters"
        )));
    }
    if id.chars().any(char::is_control) {
        return Err(ServiceError::InvalidIdentifier("contains control characters".into()));
    }
    Ok(id.to_owned())
}

/// Encoded reports keyed by session id and detector config JSON.
type ReportCache = HashMap<(String, String), Arc<Vec<u8>>>;

pub struct SessionService {
    store: Box<dyn Store>,
    defaults: ServiceDefaults,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    tokens: RwLock<HashMap<String, (Arc<Session>, usize)>>,
    media: RwLock<HashMap<String, PathBuf>>,
    analysis_cache: Mutex<ReportCache>,
}

impl SessionService {
    /// Loads every stored session, replaying and re-validating journals.
    pub fn open(store: Box<dyn Store>, defaults: ServiceDefaults) -> Result<Self, ServiceError> {
        let service = SessionService {
            store,
            defaults,
            sessions: RwLock::new(HashMap::new()),
            tokens: RwLock::new(HashMap::new()),
            media: RwLock::new(HashMap::new()),
            analysis_cache: Mutex::new(HashMap::new()),
        };
        for stored in service.store.load_all()? {
            let session = Arc::new(service.restore(stored)?);
            service.index(&session);
        }
        Ok(service)
    }

    pub fn defaults(&self) -> &ServiceDefaults {
        &self.defaults
    }

    fn restore(&self, stored: StoredSession) -> Result<Session, ServiceError> {
        let manifest = stored.manifest;
        let mut slots = Vec::with_capacity(stored.slots.len());
        let mut completed = 0;
        for (i, s) in stored.slots.into_iter().enumerate() {
            let pid = s.meta.participant_id.clone().unwrap_or_default();
            let mut log = AnnotationLog::empty(manifest.log_header(&pid));
            log.extend_checked(&s.records).map_err(|e| StoreError::Corrupt {
                path: PathBuf::from(format!("{}/slot-{i}.journal", manifest.session_id)),
                message: e.to_string(),
            })?;
            let sealed = if s.meta.completed {
                completed += 1;
                let bytes = log.to_canonical_bytes();
                if s.sealed.as_deref() != Some(&bytes[..]) {
                    self.store.write_sealed(&manifest.session_id, i, &bytes)?;
                }
                Some(bytes)
            } else {
                None
            };
            slots.push(Mutex::new(Slot {
                participant_id: s.meta.participant_id,
                log,
                completed: s.meta.completed,
                sealed,
            }));
        }
        Ok(Session { manifest, slots, completed: AtomicUsize::new(completed) })
    }

    fn index(&self, session: &Arc<Session>) {
        let mut tokens = self.tokens.write();
        for (i, t) in session.manifest.tokens.iter().enumerate() {
            tokens.insert(t.clone(), (Arc::clone(session), i));
        }
        self.media
            .write()
            .insert(session.manifest.media_id.clone(), session.manifest.media.path.clone());
        self.sessions
            .write()
            .insert(session.manifest.session_id.clone(), Arc::clone(session));
    }

    fn resolve_media(&self, requested: &Path) -> Result<PathBuf, ServiceError> {
        let root = fs::canonicalize(&self.defaults.media_dir).map_err(|e| {
            ServiceError::Media(format!("media directory {}: {e}", self.defaults.media_dir.display()))
        })?;
        let candidate = if requested.is_absolute() {
            requested.to_owned()
        } else {
            root.join(requested)
        };
        let resolved = fs::canonicalize(&candidate)
            .map_err(|e| ServiceError::Media(format!("{}: {e}", candidate.display())))?;
        if !resolved.starts_with(&root) {
            return Err(ServiceError::Media(format!(
                "{} is outside the media directory",
                requested.display()
            )));
        }
        fs::File::open(&resolved)
            .and_then(|f| f.metadata())
            .map_err(|e| ServiceError::Media(format!("{}: {e}", resolved.display())))
            .and_then(|m| {
                if m.is_file() {
                    Ok(resolved.clone())
                } else {
                    Err(ServiceError::Media(format!("{} is not a file", resolved.display())))
                }
            })
    }

    pub fn create_session(&self, req: CreateSession) -> Result<CreatedSession, ServiceError> {
        if !(1..=MAX_PARTICIPANTS).contains(&req.participants) {
            return Err(ServiceError::InvalidRequest(format!(
                "participants must be between 1 and {MAX_PARTICIPANTS}"
            )));
        }
        let max = req.max_media_seconds.unwrap_or(self.defaults.max_media_seconds);
        if !(max.is_finite() && max > 0.0) {
            return Err(ServiceError::InvalidRequest("max_media_seconds must be positive".into()));
        }
        let d = req.duration_seconds;
        if !(d.is_finite() && d > 0.0) {
            return Err(ServiceError::Media(format!("duration must be positive, got {d}")));
        }
        if d > max {
            return Err(ServiceError::Media(format!("duration {d} s exceeds the {max} s limit")));
        }
        let path = self.resolve_media(&req.media_path)?;

        let mut tokens_guard = self.tokens.write();
        let mut tokens: Vec<String> = Vec::with_capacity(req.participants);
        while tokens.len() < req.participants {
            let t = token::participant_token();
            if !tokens_guard.contains_key(&t) && !tokens.contains(&t) {
                tokens.push(t);
            }
        }
        let mut manifest = SessionManifest {
            session_id: String::new(),
            media_id: String::new(),
            media: MediaRef { path, frame_rate: req.frame_rate, duration_seconds: d },
            scale: req.scale.unwrap_or_else(|| self.defaults.scale.clone()),
            policy: req.policy.unwrap_or(self.defaults.policy),
            max_media_seconds: max,
            tokens,
        };
        let mut attempts = 0;
        loop {
            attempts += 1;
            manifest.session_id = token::opaque_id();
            manifest.media_id = token::opaque_id();
            if self.sessions.read().contains_key(&manifest.session_id)
                || self.media.read().contains_key(&manifest.media_id)
            {
                continue;
            }
            match self.store.create_session(&manifest) {
                Ok(()) => break,
                Err(StoreError::AlreadyExists(_)) if attempts < ID_ATTEMPTS => continue,
                Err(e) => return Err(e.into()),
            }
        }
        let slots = (0..manifest.tokens.len())
            .map(|_| {
                Mutex::new(Slot {
                    participant_id: None,
                    log: AnnotationLog::empty(manifest.log_header("")),
                    completed: false,
                    sealed: None,
                })
            })
            .collect();
        let session = Arc::new(Session { manifest, slots, completed: AtomicUsize::new(0) });
        for (i, t) in session.manifest.tokens.iter().enumerate() {
            tokens_guard.insert(t.clone(), (Arc::clone(&session), i));
        }
        drop(tokens_guard);
        self.index(&session);
        let m = &session.manifest;
        tracing::info!(session = %m.session_id, participants = m.tokens.len(), "session created");
        Ok(CreatedSession {
            session_id: m.session_id.clone(),
            media_id: m.media_id.clone(),
            urls: m.tokens.iter().map(|t| format!("/a/{t}")).collect(),
            tokens: m.tokens.clone(),
        })
    }

    fn lookup(&self, token: &str) -> Result<(Arc<Session>, usize), ServiceError> {
        if !token::is_well_formed(token) {
            return Err(ServiceError::UnknownToken);
        }
        self.tokens.read().get(token).cloned().ok_or(ServiceError::UnknownToken)
    }

    fn session(&self, session_id: &str) -> Result<Arc<Session>, ServiceError> {
        self.sessions
            .read()
            .get(session_id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(session_id.to_owned()))
    }

    pub fn annotator_info(&self, token: &str) -> Result<AnnotatorInfo, ServiceError> {
        let (session, i) = self.lookup(token)?;
        let slot = session.slots[i].lock();
        Ok(session.info(i, &slot))
    }

    /// Stores the participant identifier. Resubmitting the same value is a
    /// no-op; a different value is refused once annotation has started.
    pub fn register_identifier(&self, token: &str, participant_id: &str) -> Result<AnnotatorInfo, ServiceError> {
        let (session, i) = self.lookup(token)?;
        let id = validate_identifier(participant_id)?;
        let mut slot = session.slots[i].lock();
        if slot.completed {
            return Err(session.closed_error());
        }
        if slot.participant_id.as_deref() == Some(id.as_str()) {
            return Ok(session.info(i, &slot));
        }
        if let (Some(existing), false) = (&slot.participant_id, slot.log.is_empty()) {
            return Err(ServiceError::IdentifierConflict(existing.clone()));
        }
        let meta = SlotMeta { participant_id: Some(id.clone()), completed: false };
        self.store.save_slot(&session.manifest.session_id, i, &meta)?;
        slot.log.set_participant_id(id.clone());
        slot.participant_id = Some(id);
        Ok(session.info(i, &slot))
    }

    /// Parses a `{"annotations": [...]}` body with the session's frame rate
    /// and scale, then appends it.
    pub fn append_json(&self, token: &str, data: &[u8]) -> Result<Ack, ServiceError> {
        let (session, _) = self.lookup(token)?;
        let batch = parse_batch(data, &session.manifest.log_header(""))?;
        let BatchOffset { offset } =
            serde_json::from_slice(data).map_err(|e| ServiceError::InvalidRequest(e.to_string()))?;
        self.append(token, &batch, offset)
    }

    /// Appends a batch that continues the stored log.
    ///
    /// `offset` is the index the batch's first record has in the log. With
    /// it, records already stored are skipped exactly and a batch that is
    /// wholly stored is acknowledged as a duplicate. Without it, only a
    /// batch equal to the stored tail counts as a replay.
    pub fn append(&self, token: &str, batch: &[AnnotationRecord], offset: Option<usize>) -> Result<Ack, ServiceError> {
        let (session, i) = self.lookup(token)?;
        let mut slot = session.slots[i].lock();
        if slot.completed {
            return Err(session.closed_error());
        }
        if slot.participant_id.is_none() {
            return Err(ServiceError::IdentifierRequired);
        }
        if batch.is_empty() {
            return Ok(slot.ack(false));
        }
        let stored = slot.log.records();
        let overlap = match offset {
            Some(offset) => {
                if offset > stored.len() {
                    return Err(ServiceError::Stale(slot.ack(false)));
                }
                let overlap = (stored.len() - offset).min(batch.len());
                if stored[offset..offset + overlap] != batch[..overlap] {
                    return Err(ServiceError::Stale(slot.ack(false)));
                }
                overlap
            }
            None if stored.ends_with(batch) => batch.len(),
            None => 0,
        };
        if overlap == batch.len() {
            return Ok(slot.ack(true));
        }
        let fresh = &batch[overlap..];
        if let (Some(last), Some(first)) = (slot.log.last(), fresh.first()) {
            if first.timecode < last.timecode {
                return Err(ServiceError::Stale(slot.ack(false)));
            }
        }
        let violations: Vec<Violation> = slot
            .log
            .check_continuation(fresh)
            .into_iter()
            .map(|v| v.shifted(overlap as isize))
            .collect();
        if !violations.is_empty() {
            return Err(LogError::Invalid(violations).into());
        }
        session.check_within_media(fresh, overlap)?;
        self.store.append_batch(&session.manifest.session_id, i, fresh)?;
        slot.log
            .extend_checked(fresh)
            .expect("batch was checked against the same log");
        Ok(slot.ack(false))
    }

    /// Seals the slot's log and returns its canonical bytes. Repeated calls
    /// return the same bytes.
    pub fn complete(&self, token: &str) -> Result<Vec<u8>, ServiceError> {
        let (session, i) = self.lookup(token)?;
        let mut slot = session.slots[i].lock();
        if let Some(bytes) = &slot.sealed {
            return Ok(bytes.clone());
        }
        if slot.log.is_empty() {
            return Err(ServiceError::EmptyLog);
        }
        let bytes = slot.log.to_canonical_bytes();
        self.seal(&session, i, &mut slot, bytes.clone())?;
        Ok(bytes)
    }

    fn seal(&self, session: &Session, i: usize, slot: &mut Slot, bytes: Vec<u8>) -> Result<(), ServiceError> {
        let id = &session.manifest.session_id;
        self.store.write_sealed(id, i, &bytes)?;
        let meta = SlotMeta { participant_id: slot.participant_id.clone(), completed: true };
        self.store.save_slot(id, i, &meta)?;
        slot.completed = true;
        slot.sealed = Some(bytes);
        if session.completed.fetch_add(1, Ordering::AcqRel) + 1 == session.slots.len() {
            tracing::info!(session = %id, "session sealed");
        }
        Ok(())
    }

    /// Canonical bytes of the slot's log as stored so far.
    pub fn log_bytes(&self, token: &str) -> Result<Vec<u8>, ServiceError> {
        let (session, i) = self.lookup(token)?;
        let slot = session.slots[i].lock();
        Ok(slot.sealed.clone().unwrap_or_else(|| slot.log.to_canonical_bytes()))
    }

    /// Accepts a whole log file (canonical or legacy pairs) for one slot
    /// and completes that slot.
    ///
    /// The slot is `slot` if given; otherwise the slot registered under the
    /// log's participant id, otherwise the first untouched slot.
    pub fn upload(&self, session_id: &str, data: &[u8], slot: Option<usize>) -> Result<UploadReceipt, ServiceError> {
        let session = self.session(session_id)?;
        let m = &session.manifest;
        let defaults = LegacyDefaults { header: m.log_header("") };
        let (log, format) = parse_any(data, &defaults)?;
        if log.header().frame_rate != m.media.frame_rate {
            return Err(ServiceError::InvalidRequest(format!(
                "log frame rate {} does not match the session ({})",
                log.header().frame_rate.fps(),
                m.media.frame_rate.fps()
            )));
        }
        let (scale, want) = (&log.header().scale, &m.scale);
        if (scale.min(), scale.max()) != (want.min(), want.max()) {
            return Err(ServiceError::InvalidRequest(format!(
                "log scale {}..{} does not match the session ({}..{})",
                scale.min(),
                scale.max(),
                want.min(),
                want.max()
            )));
        }
        if log.is_empty() {
            return Err(ServiceError::EmptyLog);
        }
        session.check_within_media(log.records(), 0)?;
        let uploaded_id = log.header().participant_id.trim().to_owned();

        let index = match slot {
            Some(i) if i < session.slots.len() => i,
            Some(i) => return Err(ServiceError::InvalidRequest(format!("no participant slot {i}"))),
            None => (!uploaded_id.is_empty())
                .then(|| {
                    session.slots.iter().position(|s| {
                        s.lock().participant_id.as_deref() == Some(uploaded_id.as_str())
                    })
                })
                .flatten()
                .or_else(|| session.slots.iter().position(|s| s.lock().is_fresh()))
                .ok_or(ServiceError::NoFreeSlot)?,
        };

        let mut s = session.slots[index].lock();
        if s.completed {
            return Err(session.closed_error());
        }
        if !s.log.is_empty() {
            return Err(ServiceError::SlotOccupied(index));
        }
        let participant_id = match (&s.participant_id, uploaded_id.is_empty()) {
            (Some(existing), true) => existing.clone(),
            (Some(existing), false) if *existing != uploaded_id => {
                return Err(ServiceError::IdentifierConflict(existing.clone()))
            }
            (_, false) => validate_identifier(&uploaded_id)?,
            (None, true) => {
                return Err(ServiceError::InvalidIdentifier(
                    "the uploaded log names no participant and the slot has none".into(),
                ))
            }
        };
        let stored = AnnotationLog::from_records(m.log_header(&participant_id), log.records().to_vec())?;
        self.store.append_batch(&m.session_id, index, stored.records())?;
        s.participant_id = Some(participant_id.clone());
        let bytes = stored.to_canonical_bytes();
        let records = stored.records().len();
        s.log = stored;
        self.seal(&session, index, &mut s, bytes)?;
        Ok(UploadReceipt {
            slot: index,
            participant_id,
            records,
            legacy: format == SourceFormat::LegacyPairs,
        })
    }

    pub fn status(&self, session_id: &str) -> Result<SessionStatus, ServiceError> {
        let session = self.session(session_id)?;
        let slots: Vec<SlotStatus> = session
            .slots
            .iter()
            .map(|s| {
                let s = s.lock();
                SlotStatus {
                    participant_id: s.participant_id.clone(),
                    completed: s.completed,
                    records: s.log.records().len(),
                }
            })
            .collect();
        let state = if session.sealed() {
            SessionState::Sealed
        } else if slots.iter().any(|s| s.participant_id.is_some() || s.records > 0) {
            SessionState::Annotating
        } else {
            SessionState::Created
        };
        Ok(SessionStatus { session_id: session_id.to_owned(), state, slots })
    }

    /// Analysis report bytes for the first two logs of a sealed session,
    /// cached per (session, config).
    pub fn analysis(&self, session_id: &str, cfg: &DetectorConfig) -> Result<Arc<Vec<u8>>, ServiceError> {
        let session = self.session(session_id)?;
        if !session.sealed() {
            return Err(ServiceError::NotSealed);
        }
        cfg.validate()?;
        let key = (
            session_id.to_owned(),
            serde_json::to_string(cfg).expect("config serializes"),
        );
        if let Some(hit) = self.analysis_cache.lock().get(&key) {
            return Ok(Arc::clone(hit));
        }
        let logs: Vec<AnnotationLog> = session
            .slots
            .iter()
            .map(|s| s.lock().log.clone())
            .filter(|l| !l.is_empty())
            .collect();
        if logs.len() < 2 {
            return Err(ServiceError::TooFewLogs(logs.len()));
        }
        let duration = Some(session.manifest.media.duration_seconds);
        let report = analyze_session(&logs[0], &logs[1], cfg, duration)?;
        let bytes = Arc::new(report.to_json_bytes());
        self.analysis_cache.lock().insert(key, Arc::clone(&bytes));
        Ok(bytes)
    }

    pub fn media_path(&self, media_id: &str) -> Option<PathBuf> {
        self.media.read().get(media_id).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifiers_are_trimmed_and_bounded() {
        assert_eq!(validate_identifier("  P01 ").unwrap(), "P01");
        assert!(validate_identifier("   ").is_err());
        assert!(validate_identifier("a\u{7}b").is_err());
        assert!(validate_identifier(&"x".repeat(MAX_IDENTIFIER_LEN + 1)).is_err());
    }
}
