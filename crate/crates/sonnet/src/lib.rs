//! Social bite-timing prediction for robot-assisted feeding.
//!
//! This crate covers the full path from raw commensal-dining annotations to a
//! replayed feeding decision:
//!
//! * [`data`] — the annotation data model (who did what, when, at which seat),
//!   a CSV parser/validator, and a synthetic session generator for testing
//!   pipelines without recorded data.
//! * [`features`] — audio/video alignment, microphone-array speaking status,
//!   bite history features, and fixed-length labeled window extraction.
//! * [`model`] — small hand-rolled neural networks over those windows: a
//!   multi-channel social CNN with cross-diner interleaving, a dilated causal
//!   TCN baseline, a linear hinge-loss baseline, and a constant baseline.
//! * [`train`] — training loop (Adam + early stopping), binary classification
//!   metrics, leave-one-session-out cross-validation, and feature ablations.
//! * [`replay`] — an offline decision-engine simulator that replays a session
//!   under a feeding strategy (learned, fixed interval, or mouth-open).
//! * [`stats`] — descriptive statistics and report/plot emission.
//!
//! Every capability has a runnable example; start with
//! `cargo run --example synthesize` and `cargo run --example train_sonnet`.
//! A thin `sonnet` binary exposes the same operations as subcommands for
//! shell-driven use; see the crate README for the command map.
//!
//! All randomness is drawn from explicitly seeded ChaCha streams: every
//! operation in this crate is bit-reproducible for a given seed and
//! configuration, regardless of thread count.

pub mod cli;
pub mod config;
pub mod data;
pub mod features;
pub mod model;
pub mod replay;
pub mod stats;
pub mod train;
