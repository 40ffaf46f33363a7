//! Annotation data model for triadic commensal dining sessions.
//!
//! A session records three diners seated around a table. For each seat we
//! keep a time-sorted list of [`AnnotationEvent`]s (bite mechanics, drinking,
//! napkin use, disruptions) plus per-frame perception features
//! ([`FrameFeatures`] / [`FeatureStream`]). Sessions arrive either from disk
//! (see [`parse`]) or from the deterministic synthetic generator ([`synth`]).
//!
//! Schema checks that go beyond what the parser can see (event ordering,
//! bite-sequence pairing, duration conventions) live in [`validate`].

mod parse;
mod synth;
mod types;
mod validate;

pub use parse::{
    parse_annotations, parse_feature_streams, parse_sessions, write_annotations,
    write_feature_streams, ParseError,
};
pub use synth::{
    generate_synthetic_session, synthetic_batch, InvalidConfig, LabelCoupling, SyntheticConfig,
    SyntheticSession,
};
pub use types::{
    AnnotationEvent, BiteFeatures, EventKind, EventValue, FeatureStream, FrameFeatures, Seat,
    SessionAnnotations, GAZE_HEAD_DIMS, POSE_DIMS,
};
pub use validate::{validate_session, RuleKind, ValidationReport, Violation};
