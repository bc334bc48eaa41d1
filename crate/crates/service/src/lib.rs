//! The `warp` service: repair sessions, their persistence, the HTTP/event
//! API the dashboard consumes, watch mode and configuration.
//!
//! A [`Service`] owns one [`warp_core::Pipeline`] and any number of
//! [`Session`]s. Each session wraps one build command in one directory and
//! moves through [`Status`]; every status change and every pipeline stage is
//! broadcast as a [`ServiceEvent`].

pub mod api;
pub mod config;
pub mod service;
pub mod session;
pub mod store;
pub mod watch;

pub use api::{router, ServeError, Server};
pub use config::{Config, ConfigError};
pub use service::{ApplyReport, EventKind, EvidenceView, Service, ServiceError, ServiceEvent, SessionSummary};
pub use session::{Session, SessionError, Status};
