//! Hosts annotation sessions: per-participant capability URLs, durable
//! batched ingestion of rating logs, file uploads, media serving and
//! analysis over HTTP.

pub mod config;
pub mod http;
pub mod service;
pub mod store;
pub mod token;

pub use config::{ConfigError, ServiceConfig};
pub use http::{router, ServeError, Server};
pub use service::{
    Ack, AnnotatorInfo, CreateSession, CreatedSession, ServiceDefaults, ServiceError,
    SessionService, SessionState, SessionStatus, UploadReceipt,
};
pub use store::{FileStore, Store, StoreError};
