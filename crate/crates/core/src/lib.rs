//! Gameplay telemetry analytics.
//!
//! Reconstructs synchronized keyboard/mouse/gaze timelines from per-session
//! logs, extracts nine biometric features over rolling windows, tests them
//! with the Mann–Whitney U test, and classifies professional vs.
//! non-professional players with an extremely randomized trees ensemble.
//! A seeded synthetic-cohort generator drives the whole pipeline without
//! human-subject data.

pub mod cli;
pub mod error;
pub mod features;
pub mod heatmap;
pub mod stats;
pub mod synthgen;
pub mod telemetry;
pub mod trees;

mod fmt;
mod fsio;
mod seed;

pub use error::{Error, Result};
