//! Schema validation beyond single-row checks.
//!
//! The parser guarantees each row is well-formed in isolation; this module
//! checks the rules that span events: canonical ordering, the
//! one-lift-per-handover pairing of bite sequences, the 400 ms convention
//! for `*_entered`/`*_lifted` marks, and disruption overlap. Violations are
//! reported, never repaired — callers decide whether to drop, fix, or refuse
//! a session.

use super::types::{AnnotationEvent, EventKind, EventValue, Seat, SessionAnnotations};
use std::fmt;

/// Longest allowed `*_entered` / `*_lifted` mark, by annotation convention.
pub const INSTANTANEOUS_MARK_MAX_MS: u64 = 400;

/// Which rule a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleKind {
    /// Session has no events at all.
    EmptySession,
    /// Session duration is not positive.
    ZeroDuration,
    /// A seat's events are not in canonical order.
    UnsortedEvents,
    /// Event with `end_ms <= start_ms` (possible only in hand-built data).
    NonPositiveSpan,
    /// Event value outside the legal set for its kind.
    IllegalValue,
    /// An `*_entered`/`*_lifted` mark longer than 400 ms.
    OverlongMark,
    /// An event ends after the declared session duration.
    ExceedsSessionDuration,
    /// A `food_to_mouth` with no `food_lifted` since the previous handover.
    MissingLiftBeforeHandover,
    /// More than one `food_lifted` since the previous handover.
    DuplicateLiftBeforeHandover,
    /// The paired lift and handover disagree on the implement.
    LiftHandoverValueMismatch,
    /// Event overlaps a disruption interval.
    OverlapsDisruption,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RuleKind::EmptySession => "empty_session",
            RuleKind::ZeroDuration => "zero_duration",
            RuleKind::UnsortedEvents => "unsorted_events",
            RuleKind::NonPositiveSpan => "non_positive_span",
            RuleKind::IllegalValue => "illegal_value",
            RuleKind::OverlongMark => "overlong_mark",
            RuleKind::ExceedsSessionDuration => "exceeds_session_duration",
            RuleKind::MissingLiftBeforeHandover => "missing_lift_before_handover",
            RuleKind::DuplicateLiftBeforeHandover => "duplicate_lift_before_handover",
            RuleKind::LiftHandoverValueMismatch => "lift_handover_value_mismatch",
            RuleKind::OverlapsDisruption => "overlaps_disruption",
        };
        f.write_str(name)
    }
}

/// One broken rule, pointing at the events involved.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: RuleKind,
    /// Seat whose event list the indices refer to; `None` for session-level
    /// violations.
    pub seat: Option<Seat>,
    /// Indices into the seat's stored event list.
    pub indices: Vec<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.seat {
            Some(seat) => write!(f, "[{}] seat {}: {}", self.rule, seat, self.message),
            None => write!(f, "[{}] {}", self.rule, self.message),
        }
    }
}

/// Everything wrong with one session.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub session_id: String,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    /// True exactly when the session satisfies every schema rule.
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    /// How many violations break `rule`.
    pub fn count_of(&self, rule: RuleKind) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_clean() {
            return write!(f, "session {}: clean", self.session_id);
        }
        writeln!(f, "session {}: {} violation(s)", self.session_id, self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Checks every schema rule and reports all violations found.
///
/// The report is empty if and only if the session is schema-clean. Sessions
/// that begin mid-bite are tolerated: a seat's first `food_to_mouth` with no
/// prior `food_lifted` anywhere is the recording-boundary case, not an
/// error. Lifts never followed by a handover (recording ends mid-bite) are
/// likewise fine.
pub fn validate_session(session: &SessionAnnotations) -> ValidationReport {
    let mut violations = Vec::new();

    if session.total_events() == 0 {
        violations.push(Violation {
            rule: RuleKind::EmptySession,
            seat: None,
            indices: vec![],
            message: "session has no events".to_string(),
        });
    }
    if session.duration_ms == 0 {
        violations.push(Violation {
            rule: RuleKind::ZeroDuration,
            seat: None,
            indices: vec![],
            message: "session duration is not positive".to_string(),
        });
    }

    let disruptions = session.disruption_intervals();

    for seat in Seat::all() {
        let events = session.events_for(seat);
        check_order(seat, events, &mut violations);
        for (i, e) in events.iter().enumerate() {
            check_event(seat, i, e, session.duration_ms, &disruptions, &mut violations);
        }
        check_bite_pairing(seat, events, &mut violations);
    }

    ValidationReport { session_id: session.session_id.clone(), violations }
}

fn check_order(seat: Seat, events: &[AnnotationEvent], out: &mut Vec<Violation>) {
    for (i, pair) in events.windows(2).enumerate() {
        if pair[0].sort_key() > pair[1].sort_key() {
            out.push(Violation {
                rule: RuleKind::UnsortedEvents,
                seat: Some(seat),
                indices: vec![i, i + 1],
                message: format!(
                    "event {} ({} @{}ms) stored after event {} ({} @{}ms)",
                    i,
                    pair[0].kind,
                    pair[0].start_ms,
                    i + 1,
                    pair[1].kind,
                    pair[1].start_ms
                ),
            });
        }
    }
}

fn check_event(
    seat: Seat,
    index: usize,
    e: &AnnotationEvent,
    duration_ms: u64,
    disruptions: &[(u64, u64)],
    out: &mut Vec<Violation>,
) {
    if e.end_ms <= e.start_ms {
        out.push(Violation {
            rule: RuleKind::NonPositiveSpan,
            seat: Some(seat),
            indices: vec![index],
            message: format!("{} spans {}..{} ms", e.kind, e.start_ms, e.end_ms),
        });
    }
    if !e.kind.legal_values().contains(&e.value) {
        out.push(Violation {
            rule: RuleKind::IllegalValue,
            seat: Some(seat),
            indices: vec![index],
            message: format!("{} carries illegal value {}", e.kind, e.value),
        });
    }
    if e.kind.is_instantaneous_mark() && e.duration_ms() > INSTANTANEOUS_MARK_MAX_MS {
        out.push(Violation {
            rule: RuleKind::OverlongMark,
            seat: Some(seat),
            indices: vec![index],
            message: format!(
                "{} lasts {} ms (limit {} ms)",
                e.kind,
                e.duration_ms(),
                INSTANTANEOUS_MARK_MAX_MS
            ),
        });
    }
    if duration_ms > 0 && e.end_ms > duration_ms {
        out.push(Violation {
            rule: RuleKind::ExceedsSessionDuration,
            seat: Some(seat),
            indices: vec![index],
            message: format!("{} ends at {} ms, after session end {} ms", e.kind, e.end_ms, duration_ms),
        });
    }
    if e.kind != EventKind::Disruption
        && disruptions.iter().any(|&(s, t)| e.overlaps(s, t))
    {
        out.push(Violation {
            rule: RuleKind::OverlapsDisruption,
            seat: Some(seat),
            indices: vec![index],
            message: format!("{} at {}..{} ms overlaps a disruption", e.kind, e.start_ms, e.end_ms),
        });
    }
}

/// Every `food_to_mouth` must be preceded by exactly one `food_lifted` since
/// the previous `food_to_mouth` (none before the first handover means the
/// recording started mid-bite and is tolerated).
fn check_bite_pairing(seat: Seat, events: &[AnnotationEvent], out: &mut Vec<Violation>) {
    let mut lifts: Vec<(usize, &AnnotationEvent)> = Vec::new();
    let mut handovers: Vec<(usize, &AnnotationEvent)> = Vec::new();
    for (i, e) in events.iter().enumerate() {
        match e.kind {
            EventKind::FoodLifted => lifts.push((i, e)),
            EventKind::FoodToMouth => handovers.push((i, e)),
            _ => {}
        }
    }
    lifts.sort_by_key(|(_, e)| e.sort_key());
    handovers.sort_by_key(|(_, e)| e.sort_key());

    let mut prev_start: Option<u64> = None;
    for (nth, &(hi, handover)) in handovers.iter().enumerate() {
        let window: Vec<&(usize, &AnnotationEvent)> = lifts
            .iter()
            .filter(|(_, l)| {
                l.start_ms < handover.start_ms
                    && prev_start.is_none_or(|p| l.start_ms > p)
            })
            .collect();
        match window.len() {
            0 => {
                if nth > 0 {
                    out.push(Violation {
                        rule: RuleKind::MissingLiftBeforeHandover,
                        seat: Some(seat),
                        indices: vec![hi],
                        message: format!(
                            "food_to_mouth at {} ms has no food_lifted since the previous handover",
                            handover.start_ms
                        ),
                    });
                }
            }
            1 => {
                let &(li, lift) = window[0];
                if lift.value != handover.value
                    && lift.value != EventValue::None
                    && handover.value != EventValue::None
                {
                    out.push(Violation {
                        rule: RuleKind::LiftHandoverValueMismatch,
                        seat: Some(seat),
                        indices: vec![li, hi],
                        message: format!(
                            "food_lifted ({}) and food_to_mouth ({}) disagree on the implement",
                            lift.value, handover.value
                        ),
                    });
                }
            }
            n => {
                let mut indices: Vec<usize> = window.iter().map(|(i, _)| *i).collect();
                indices.push(hi);
                out.push(Violation {
                    rule: RuleKind::DuplicateLiftBeforeHandover,
                    seat: Some(seat),
                    indices,
                    message: format!(
                        "{n} food_lifted events precede the food_to_mouth at {} ms",
                        handover.start_ms
                    ),
                });
            }
        }
        prev_start = Some(handover.start_ms);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seat1() -> Seat {
        Seat::new(1).unwrap()
    }

    fn session_with(events: Vec<AnnotationEvent>) -> SessionAnnotations {
        let mut s = SessionAnnotations::new("t", 100_000);
        s.events[0] = events;
        s.sort_events();
        s
    }

    fn lift(start: u64) -> AnnotationEvent {
        AnnotationEvent::new(EventKind::FoodLifted, EventValue::Fork, start, start + 400)
    }

    fn handover(start: u64) -> AnnotationEvent {
        AnnotationEvent::new(EventKind::FoodToMouth, EventValue::Fork, start, start + 800)
    }

    #[test]
    fn clean_bite_sequence_passes() {
        let s = session_with(vec![lift(1_000), handover(2_000), lift(10_000), handover(11_000)]);
        let report = validate_session(&s);
        assert!(report.is_clean(), "unexpected violations: {report}");
    }

    #[test]
    fn empty_session_is_flagged() {
        let s = SessionAnnotations::new("t", 0);
        let report = validate_session(&s);
        assert_eq!(report.count_of(RuleKind::EmptySession), 1);
        assert_eq!(report.count_of(RuleKind::ZeroDuration), 1);
    }

    #[test]
    fn first_handover_without_lift_is_boundary_not_error() {
        let s = session_with(vec![handover(2_000), lift(10_000), handover(11_000)]);
        assert!(validate_session(&s).is_clean());
    }

    #[test]
    fn later_handover_without_lift_is_flagged() {
        let s = session_with(vec![lift(1_000), handover(2_000), handover(11_000)]);
        let report = validate_session(&s);
        assert_eq!(report.count_of(RuleKind::MissingLiftBeforeHandover), 1);
        let v = report
            .violations
            .iter()
            .find(|v| v.rule == RuleKind::MissingLiftBeforeHandover)
            .unwrap();
        assert_eq!(v.seat, Some(seat1()));
        assert_eq!(v.indices, vec![2]);
    }

    #[test]
    fn two_lifts_before_one_handover_are_flagged() {
        let s = session_with(vec![lift(1_000), lift(3_000), handover(5_000)]);
        let report = validate_session(&s);
        assert_eq!(report.count_of(RuleKind::DuplicateLiftBeforeHandover), 1);
        let v = &report.violations[0];
        assert_eq!(v.indices, vec![0, 1, 2]);
    }

    #[test]
    fn trailing_lift_without_handover_is_tolerated() {
        let s = session_with(vec![lift(1_000), handover(2_000), lift(50_000)]);
        assert!(validate_session(&s).is_clean());
    }

    #[test]
    fn overlong_mark_is_flagged_but_long_handover_is_fine() {
        let s = session_with(vec![
            AnnotationEvent::new(EventKind::FoodLifted, EventValue::Fork, 1_000, 1_800),
            AnnotationEvent::new(EventKind::FoodToMouth, EventValue::Fork, 2_000, 9_000),
        ]);
        let report = validate_session(&s);
        assert_eq!(report.count_of(RuleKind::OverlongMark), 1);
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn value_mismatch_between_lift_and_handover_is_flagged() {
        let s = session_with(vec![
            AnnotationEvent::new(EventKind::FoodLifted, EventValue::Spoon, 1_000, 1_400),
            handover(2_000),
        ]);
        let report = validate_session(&s);
        assert_eq!(report.count_of(RuleKind::LiftHandoverValueMismatch), 1);
    }

    #[test]
    fn unqualified_lift_pairs_with_any_handover() {
        let s = session_with(vec![
            AnnotationEvent::new(EventKind::FoodLifted, EventValue::None, 1_000, 1_400),
            handover(2_000),
        ]);
        assert!(validate_session(&s).is_clean());
    }

    #[test]
    fn events_overlapping_disruption_are_flagged() {
        let mut s = session_with(vec![lift(1_000), handover(2_000)]);
        s.events[1].push(AnnotationEvent::new(
            EventKind::Disruption,
            EventValue::LightOff,
            1_200,
            1_600,
        ));
        let report = validate_session(&s);
        assert_eq!(report.count_of(RuleKind::OverlapsDisruption), 1);
        let v = report.violations.iter().find(|v| v.rule == RuleKind::OverlapsDisruption).unwrap();
        assert_eq!(v.seat, Some(seat1()));
        assert_eq!(v.indices, vec![0]);
    }

    #[test]
    fn unsorted_events_are_flagged() {
        let mut s = SessionAnnotations::new("t", 100_000);
        s.events[0] = vec![handover(5_000), lift(1_000)];
        let report = validate_session(&s);
        assert_eq!(report.count_of(RuleKind::UnsortedEvents), 1);
    }

    #[test]
    fn clean_report_displays_compactly() {
        let s = session_with(vec![lift(1_000), handover(2_000)]);
        let report = validate_session(&s);
        assert_eq!(format!("{report}"), "session t: clean");
    }
}
