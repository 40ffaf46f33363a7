//! Core annotation and feature types.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Number of body/face keypoint coordinates tracked per frame.
pub const POSE_DIMS: usize = 168;
/// Number of gaze/head orientation angles tracked per frame.
pub const GAZE_HEAD_DIMS: usize = 4;

/// One of the three seats around the table, numbered 1..=3.
///
/// Seat 1 is the feeding-system user in synthetic sessions by default; seats
/// are purely positional otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seat(u8);

impl Seat {
    /// Builds a seat from its 1-based number; `None` unless `n` is 1, 2 or 3.
    pub fn new(n: u8) -> Option<Self> {
        (1..=3).contains(&n).then_some(Seat(n))
    }

    /// 1-based seat number.
    pub fn number(self) -> u8 {
        self.0
    }

    /// 0-based index, for indexing per-seat arrays.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    /// All three seats in order.
    pub fn all() -> [Seat; 3] {
        [Seat(1), Seat(2), Seat(3)]
    }

    /// The other two seats, in ascending order.
    pub fn others(self) -> [Seat; 2] {
        match self.0 {
            1 => [Seat(2), Seat(3)],
            2 => [Seat(1), Seat(3)],
            _ => [Seat(1), Seat(2)],
        }
    }
}

impl fmt::Display for Seat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// What an annotation event describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Mouth visibly open to receive food.
    MouthOpen,
    /// Utensil or hand enters the plate/bowl.
    FoodEntered,
    /// Food leaves the plate on the utensil or in hand.
    FoodLifted,
    /// Food is brought to the mouth.
    FoodToMouth,
    DrinkEntered,
    DrinkLifted,
    DrinkToMouth,
    NapkinEntered,
    NapkinLifted,
    NapkinToMouth,
    /// Recording-level interruption; events overlapping one are suspect.
    Disruption,
}

impl EventKind {
    /// Stable lowercase identifier used in files.
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::MouthOpen => "mouth_open",
            EventKind::FoodEntered => "food_entered",
            EventKind::FoodLifted => "food_lifted",
            EventKind::FoodToMouth => "food_to_mouth",
            EventKind::DrinkEntered => "drink_entered",
            EventKind::DrinkLifted => "drink_lifted",
            EventKind::DrinkToMouth => "drink_to_mouth",
            EventKind::NapkinEntered => "napkin_entered",
            EventKind::NapkinLifted => "napkin_lifted",
            EventKind::NapkinToMouth => "napkin_to_mouth",
            EventKind::Disruption => "disruption",
        }
    }

    /// Inverse of [`EventKind::as_str`].
    pub fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "mouth_open" => EventKind::MouthOpen,
            "food_entered" => EventKind::FoodEntered,
            "food_lifted" => EventKind::FoodLifted,
            "food_to_mouth" => EventKind::FoodToMouth,
            "drink_entered" => EventKind::DrinkEntered,
            "drink_lifted" => EventKind::DrinkLifted,
            "drink_to_mouth" => EventKind::DrinkToMouth,
            "napkin_entered" => EventKind::NapkinEntered,
            "napkin_lifted" => EventKind::NapkinLifted,
            "napkin_to_mouth" => EventKind::NapkinToMouth,
            "disruption" => EventKind::Disruption,
            _ => return None,
        })
    }

    /// Every kind, in file-schema order.
    pub fn all() -> [EventKind; 11] {
        [
            EventKind::MouthOpen,
            EventKind::FoodEntered,
            EventKind::FoodLifted,
            EventKind::FoodToMouth,
            EventKind::DrinkEntered,
            EventKind::DrinkLifted,
            EventKind::DrinkToMouth,
            EventKind::NapkinEntered,
            EventKind::NapkinLifted,
            EventKind::NapkinToMouth,
            EventKind::Disruption,
        ]
    }

    /// Values an event of this kind may carry.
    ///
    /// `entered`/`lifted` marks for food require a concrete implement (a lift
    /// is always *of* something), while `food_to_mouth` and `food_lifted`
    /// admit `none` for bites where no implement is discernible. Drink marks
    /// always name the vessel, napkin marks carry no value, and disruptions
    /// name their cause.
    pub fn legal_values(self) -> &'static [EventValue] {
        use EventValue::*;
        match self {
            EventKind::MouthOpen | EventKind::NapkinEntered | EventKind::NapkinLifted
            | EventKind::NapkinToMouth => &[None],
            EventKind::FoodEntered => &[Fork, Knife, Spoon, Chopsticks, Hand],
            EventKind::FoodLifted | EventKind::FoodToMouth => {
                &[Fork, Knife, Spoon, Chopsticks, Hand, None]
            }
            EventKind::DrinkEntered | EventKind::DrinkLifted | EventKind::DrinkToMouth => {
                &[Cup, Bottle]
            }
            EventKind::Disruption => &[LightOff, ParticipantLeft],
        }
    }

    /// Whether this kind is an `*_entered` or `*_lifted` mark, which by
    /// annotation convention lasts at most 400 ms.
    pub fn is_instantaneous_mark(self) -> bool {
        matches!(
            self,
            EventKind::FoodEntered
                | EventKind::FoodLifted
                | EventKind::DrinkEntered
                | EventKind::DrinkLifted
                | EventKind::NapkinEntered
                | EventKind::NapkinLifted
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Qualifier attached to an event (implement, vessel, or disruption cause).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventValue {
    Fork,
    Knife,
    Spoon,
    Chopsticks,
    Hand,
    Cup,
    Bottle,
    LightOff,
    ParticipantLeft,
    /// No qualifier applies.
    None,
}

impl EventValue {
    pub fn as_str(self) -> &'static str {
        match self {
            EventValue::Fork => "fork",
            EventValue::Knife => "knife",
            EventValue::Spoon => "spoon",
            EventValue::Chopsticks => "chopsticks",
            EventValue::Hand => "hand",
            EventValue::Cup => "cup",
            EventValue::Bottle => "bottle",
            EventValue::LightOff => "light_off",
            EventValue::ParticipantLeft => "participant_left",
            EventValue::None => "none",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "fork" => EventValue::Fork,
            "knife" => EventValue::Knife,
            "spoon" => EventValue::Spoon,
            "chopsticks" => EventValue::Chopsticks,
            "hand" => EventValue::Hand,
            "cup" => EventValue::Cup,
            "bottle" => EventValue::Bottle,
            "light_off" => EventValue::LightOff,
            "participant_left" => EventValue::ParticipantLeft,
            "none" => EventValue::None,
            _ => return None,
        })
    }
}

impl fmt::Display for EventValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single annotated interval on one seat's timeline.
///
/// Timestamps are milliseconds from session start; `end_ms` is exclusive and
/// must be strictly greater than `start_ms` (the parser rejects anything
/// else, and [`validate_session`](super::validate_session) re-checks
/// hand-built events).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationEvent {
    pub kind: EventKind,
    pub value: EventValue,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl AnnotationEvent {
    pub fn new(kind: EventKind, value: EventValue, start_ms: u64, end_ms: u64) -> Self {
        AnnotationEvent { kind, value, start_ms, end_ms }
    }

    pub fn duration_ms(&self) -> u64 {
        self.end_ms.saturating_sub(self.start_ms)
    }

    /// True when the closed-open intervals `[start, end)` intersect.
    pub fn overlaps(&self, start_ms: u64, end_ms: u64) -> bool {
        self.start_ms < end_ms && start_ms < self.end_ms
    }

    /// Total order used for storage: by onset, then extent, then kind/value.
    pub fn sort_key(&self) -> (u64, u64, EventKind, EventValue) {
        (self.start_ms, self.end_ms, self.kind, self.value)
    }
}

/// All annotations of one recorded (or synthesized) session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionAnnotations {
    pub session_id: String,
    /// Session length in milliseconds.
    pub duration_ms: u64,
    /// Mounting angle of each seat on the microphone-array circle, degrees.
    pub seat_angles_deg: [f64; 3],
    /// Per-seat event lists, index 0 = seat 1. Kept sorted by
    /// [`AnnotationEvent::sort_key`].
    pub events: [Vec<AnnotationEvent>; 3],
}

/// Default seat placement: three diners evenly spaced around the array.
pub(crate) const DEFAULT_SEAT_ANGLES: [f64; 3] = [90.0, 210.0, 330.0];

impl SessionAnnotations {
    /// An empty session shell with default seat geometry.
    pub fn new(session_id: impl Into<String>, duration_ms: u64) -> Self {
        SessionAnnotations {
            session_id: session_id.into(),
            duration_ms,
            seat_angles_deg: DEFAULT_SEAT_ANGLES,
            events: [Vec::new(), Vec::new(), Vec::new()],
        }
    }

    pub fn events_for(&self, seat: Seat) -> &[AnnotationEvent] {
        &self.events[seat.index()]
    }

    /// Sorts every seat's events into canonical order.
    pub fn sort_events(&mut self) {
        for list in &mut self.events {
            list.sort_by_key(AnnotationEvent::sort_key);
        }
    }

    pub fn total_events(&self) -> usize {
        self.events.iter().map(Vec::len).sum()
    }

    /// Events of one kind on one seat, in stored order.
    pub fn events_of_kind(&self, seat: Seat, kind: EventKind) -> Vec<&AnnotationEvent> {
        self.events[seat.index()].iter().filter(|e| e.kind == kind).collect()
    }

    /// Disruption intervals pooled across seats (they affect the whole
    /// recording), sorted by onset.
    pub fn disruption_intervals(&self) -> Vec<(u64, u64)> {
        let mut spans: Vec<(u64, u64)> = self
            .events
            .iter()
            .flatten()
            .filter(|e| e.kind == EventKind::Disruption)
            .map(|e| (e.start_ms, e.end_ms))
            .collect();
        spans.sort_unstable();
        spans
    }
}

/// Bite-history features for the feeding-system user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiteFeatures {
    /// Seconds since the user's previous bite lift (time from session start
    /// when no bite has happened yet).
    pub time_since_s: f64,
    /// Bites taken so far.
    pub count: u32,
}

/// Per-frame perception features for one diner.
///
/// `pose` holds [`POSE_DIMS`] keypoint coordinates and `gaze_head` holds
/// [`GAZE_HEAD_DIMS`] Euler angles (gaze pitch/yaw, head pitch/yaw). When the
/// detector lost the face or body on a frame the corresponding group is
/// all-zero and its validity flag is false; downstream code must consult the
/// flags rather than trust zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    /// Frame timestamp, milliseconds from session start.
    pub t_ms: u64,
    pub pose: Vec<f64>,
    pub gaze_head: [f64; GAZE_HEAD_DIMS],
    /// 1 when this diner is speaking on this frame, else 0.
    pub speaking: u8,
    pub pose_valid: bool,
    pub gaze_head_valid: bool,
    /// Present only on the feeding-system user's stream.
    pub bite: Option<BiteFeatures>,
}

impl FrameFeatures {
    /// A silent, zero-pose frame at `t_ms` with valid detections.
    pub fn zeroed(t_ms: u64) -> Self {
        FrameFeatures {
            t_ms,
            pose: vec![0.0; POSE_DIMS],
            gaze_head: [0.0; GAZE_HEAD_DIMS],
            speaking: 0,
            pose_valid: true,
            gaze_head_valid: true,
            bite: None,
        }
    }
}

/// Time-ordered frame features for one seat at a fixed frame rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStream {
    pub seat: Seat,
    /// Nominal frames per second; frame timestamps may jitter by up to one
    /// frame period around the implied grid.
    pub fps: u32,
    pub frames: Vec<FrameFeatures>,
}

impl FeatureStream {
    pub fn new(seat: Seat, fps: u32) -> Self {
        FeatureStream { seat, fps, frames: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Index of the last frame strictly before `t_ms`, if any.
    pub fn last_frame_before(&self, t_ms: u64) -> Option<usize> {
        match self.frames.partition_point(|f| f.t_ms < t_ms) {
            0 => None,
            n => Some(n - 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seat_rejects_out_of_range_numbers() {
        assert!(Seat::new(0).is_none());
        assert!(Seat::new(4).is_none());
        for n in 1..=3 {
            assert_eq!(Seat::new(n).unwrap().number(), n);
        }
    }

    #[test]
    fn seat_others_excludes_self() {
        for seat in Seat::all() {
            let others = seat.others();
            assert_eq!(others.len(), 2);
            assert!(!others.contains(&seat));
            assert!(others[0] < others[1]);
        }
    }

    #[test]
    fn kind_string_round_trip() {
        for kind in EventKind::all() {
            assert_eq!(EventKind::from_str(kind.as_str()), Some(kind));
        }
        assert_eq!(EventKind::from_str("coffee_break"), None);
    }

    #[test]
    fn value_string_round_trip() {
        let values = [
            EventValue::Fork,
            EventValue::Knife,
            EventValue::Spoon,
            EventValue::Chopsticks,
            EventValue::Hand,
            EventValue::Cup,
            EventValue::Bottle,
            EventValue::LightOff,
            EventValue::ParticipantLeft,
            EventValue::None,
        ];
        for value in values {
            assert_eq!(EventValue::from_str(value.as_str()), Some(value));
        }
    }

    #[test]
    fn legal_values_match_kind_family() {
        assert!(EventKind::MouthOpen.legal_values().contains(&EventValue::None));
        assert!(!EventKind::FoodEntered.legal_values().contains(&EventValue::None));
        assert!(EventKind::FoodLifted.legal_values().contains(&EventValue::None));
        assert!(EventKind::DrinkToMouth.legal_values().contains(&EventValue::Bottle));
        assert!(!EventKind::DrinkToMouth.legal_values().contains(&EventValue::Fork));
        assert_eq!(EventKind::NapkinLifted.legal_values(), &[EventValue::None]);
    }

    #[test]
    fn overlap_is_half_open() {
        let e = AnnotationEvent::new(EventKind::MouthOpen, EventValue::None, 100, 200);
        assert!(e.overlaps(150, 160));
        assert!(e.overlaps(0, 101));
        assert!(!e.overlaps(200, 300), "end is exclusive");
        assert!(!e.overlaps(0, 100), "start is inclusive");
    }

    #[test]
    fn last_frame_before_is_strict() {
        let mut stream = FeatureStream::new(Seat::new(1).unwrap(), 15);
        for i in 0..5u64 {
            stream.frames.push(FrameFeatures::zeroed(i * 100));
        }
        assert_eq!(stream.last_frame_before(0), None);
        assert_eq!(stream.last_frame_before(100), Some(0));
        assert_eq!(stream.last_frame_before(101), Some(1));
        assert_eq!(stream.last_frame_before(10_000), Some(4));
    }
}
