//! Model-assisted material annotation: prompts, response parsing, validation
//! against the permitted material-model combinations, and review sessions.

pub mod catalogs;
pub mod chat;
mod description;
pub mod parse;
pub mod prompts;
pub mod session;
pub mod validate;

pub use description::{ObjectDescription, PartDescription};
pub use session::{AnnotationSession, Decision, PartComment, ReviewEvent, ReviewState, Verdict};
pub use validate::{validate_proposal, ValidationMode};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnnotateError {
    #[error("cannot build prompt: {0}")]
    Prompt(String),
    #[error("invalid object description: {}", .0.join("; "))]
    InvalidDescription(Vec<String>),
    #[error("event {event:?} is not allowed in state {from:?}")]
    InvalidTransition {
        from: ReviewState,
        event: ReviewEvent,
    },
    #[error("{0}")]
    Conflict(String),
    #[error("invalid verdict: {0}")]
    Verdict(String),
    #[error("invalid override: {}", .0.join("; "))]
    InvalidOverride(Vec<String>),
    #[error(transparent)]
    Chat(#[from] chat::ChatError),
}
