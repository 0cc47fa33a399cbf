//! Phishing-awareness balloon shooter.
//!
//! Players aim at balloons to reveal a URL or email and shoot only the
//! legitimate ones. This crate holds everything except the rendering client:
//!
//! - [`model`]: URL/email decomposition and the deception-trick taxonomy.
//! - [`corpus`]: seeded synthesis of labelled items, a heuristic trick
//!   detector, and per-trick explanations.
//! - [`session`]: the event-sourced game state machine (tutorial, quiz, three
//!   stages, review).
//! - [`assessment`]: knowledge metrics, self-efficacy scales and the
//!   hypothesis statistics computed over session logs.
//! - [`simulation`]: bot players that drive sessions end to end.

pub mod assessment;
pub mod corpus;
pub mod model;
pub mod rng;
pub mod session;
pub mod simulation;

pub use model::{
    parse_url, serialize_url, EmailAddress, EmailItem, ItemId, ItemKind, Payload, PhishItem,
    TrickTag, UrlParts, Verdict,
};
