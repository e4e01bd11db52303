//! Human revision of projected annotations: a decision journal, the
//! materialized corpus it implies, revision statistics, and an HTTP API.

pub mod decision;
pub mod journal;
pub mod server;
pub mod state;
pub mod stats;

pub use decision::{Action, Decision};
pub use journal::{Journal, JournalError};
pub use server::{router, serve, serve_blocking, ReviewService, ServeError, ServiceConfig};
pub use state::{ReviewError, ReviewState, RevisionReport};
pub use stats::{RevisionCounts, RevisionStats};
