//! Fixed-length labeled windows for bite-timing models.
//!
//! A window is the last `k` seconds of features before an *anchor* instant,
//! one channel matrix per diner, shape `(rows, frames)` with one column per
//! video frame. Rows are laid out as pose keypoints, then gaze/head angles,
//! then the speaking flag; the user's matrix additionally carries the tiled
//! bite-history block (see [`scale_bite_features`]).
//!
//! * **Positive** windows end at the onset of one of the user's
//!   `food_lifted` marks: the window sees everything up to, but not
//!   including, the bite it predicts. The bite-history rows are computed
//!   from annotations, so the label lift itself never leaks into them.
//! * **Negative** windows are centered on the midpoint between consecutive
//!   lifts; their anchor is the window *end*, `k/2` past the midpoint, so
//!   both labels share one extraction rule ("the `T` frames strictly before
//!   the anchor").
//!
//! Candidates are dropped — never silently, always into the
//! [`DropReport`] — when history is too short, frames are missing around the
//! span, the span crosses a disruption, or (negatives only) the span comes
//! too close to a positive anchor.

use super::bite::{bite_features_at, scale_bite_features};
use crate::data::{
    EventKind, FeatureStream, Seat, SessionAnnotations, SyntheticSession, GAZE_HEAD_DIMS,
    POSE_DIMS,
};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;
use thiserror::Error;

/// Geometry of extracted windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Window length in seconds.
    pub k_seconds: f64,
    /// Video frame rate the streams are expected to run at.
    pub fps: u32,
    /// Tiling factor for the user's two bite-history features.
    pub gamma: usize,
    /// Negatives whose span comes within this many seconds of a positive
    /// anchor are dropped; 0 keeps every midpoint negative that does not
    /// contain a lift outright.
    pub min_gap_to_positive_s: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec { k_seconds: 6.0, fps: 15, gamma: 100, min_gap_to_positive_s: 0.0 }
    }
}

impl WindowSpec {
    /// Frames per window, `k * fps`.
    pub fn frames_per_window(&self) -> usize {
        (self.k_seconds * f64::from(self.fps)).round() as usize
    }

    /// Window length in milliseconds.
    pub fn span_ms(&self) -> u64 {
        (self.k_seconds * 1000.0).round() as u64
    }

    /// Rows of the user channel: pose, gaze/head, speaking, tiled bite.
    pub fn user_rows(&self) -> usize {
        POSE_DIMS + GAZE_HEAD_DIMS + 1 + 2 * self.gamma
    }

    /// Rows of a co-diner channel: pose, gaze/head, speaking.
    pub fn codiner_rows(&self) -> usize {
        POSE_DIMS + GAZE_HEAD_DIMS + 1
    }

    fn validate(&self) -> Result<(), WindowError> {
        if !(self.k_seconds > 0.0) || self.fps == 0 {
            return Err(WindowError::InvalidSpec(
                "k_seconds and fps must be positive".to_string(),
            ));
        }
        if self.frames_per_window() < 2 {
            return Err(WindowError::InvalidSpec("window must span at least 2 frames".to_string()));
        }
        if !(self.min_gap_to_positive_s >= 0.0) {
            return Err(WindowError::InvalidSpec(
                "min_gap_to_positive_s must be non-negative".to_string(),
            ));
        }
        Ok(())
    }
}

/// Row ranges inside a channel matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLayout {
    pub pose: Range<usize>,
    pub gaze_head: Range<usize>,
    pub speaking: usize,
    /// Tiled bite block; present only on the user channel.
    pub bite: Option<Range<usize>>,
}

impl ChannelLayout {
    pub fn user(gamma: usize) -> Self {
        let base = POSE_DIMS + GAZE_HEAD_DIMS + 1;
        ChannelLayout {
            pose: 0..POSE_DIMS,
            gaze_head: POSE_DIMS..POSE_DIMS + GAZE_HEAD_DIMS,
            speaking: POSE_DIMS + GAZE_HEAD_DIMS,
            bite: (gamma > 0).then_some(base..base + 2 * gamma),
        }
    }

    pub fn codiner() -> Self {
        ChannelLayout { bite: None, ..ChannelLayout::user(0) }
    }

    pub fn rows(&self) -> usize {
        self.bite.as_ref().map_or(self.speaking + 1, |b| b.end)
    }
}

/// One extracted window: per-diner channel matrices plus the label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub session_id: String,
    /// Exclusive window end, milliseconds. For positives this is the lift
    /// onset being predicted.
    pub anchor_ms: u64,
    /// True for pre-bite windows, false for midpoint negatives.
    pub label: bool,
    /// User channel, `(user_rows, frames)`.
    pub user: Array2<f64>,
    /// First co-diner channel (lower seat number), `(codiner_rows, frames)`.
    pub codiner_a: Array2<f64>,
    /// Second co-diner channel, `(codiner_rows, frames)`.
    pub codiner_b: Array2<f64>,
}

/// Why a candidate window was not extracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Fewer than a full window of frames before the anchor.
    ShortHistory,
    /// Enough frames, but they stretch further back than the span allows
    /// (holes in the stream).
    SparseFrames,
    /// Span overlaps a disruption interval.
    CrossesDisruption,
    /// Negative span too close to (or containing) a positive anchor.
    NearPositive,
}

/// A dropped candidate and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub session_id: String,
    pub anchor_ms: u64,
    pub label: bool,
    pub reason: DropReason,
}

/// Every candidate that failed extraction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DropReport {
    pub records: Vec<DropRecord>,
}

impl DropReport {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count_of(&self, reason: DropReason) -> usize {
        self.records.iter().filter(|r| r.reason == reason).count()
    }
}

/// Extracted windows plus full bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub spec: WindowSpec,
    pub user_seat: Seat,
    pub windows: Vec<LabeledWindow>,
    pub drops: DropReport,
}

impl WindowSet {
    pub fn positives(&self) -> usize {
        self.windows.iter().filter(|w| w.label).count()
    }

    pub fn negatives(&self) -> usize {
        self.windows.len() - self.positives()
    }

    /// Distinct session ids present, sorted.
    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.windows.iter().map(|w| w.session_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Appends another set extracted under the same spec and user seat.
    pub fn merge(&mut self, other: WindowSet) -> Result<(), WindowError> {
        if other.spec != self.spec || other.user_seat != self.user_seat {
            return Err(WindowError::Mismatch(
                "cannot merge window sets with different specs or user seats".to_string(),
            ));
        }
        self.windows.extend(other.windows);
        self.drops.records.extend(other.drops.records);
        Ok(())
    }
}

/// Window extraction and archive failures.
#[derive(Debug, Error)]
pub enum WindowError {
    #[error("invalid window spec: {0}")]
    InvalidSpec(String),
    #[error("no feature stream for seat {0}")]
    MissingSeat(Seat),
    #[error("{0}")]
    Mismatch(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed window archive: {0}")]
    Corrupt(String),
}

/// Extracts labeled windows for one session.
///
/// `streams` must contain one stream per seat. Positive anchors are the
/// user's `food_lifted` onsets; negative anchors sit `k/2` past the midpoint
/// of each consecutive lift pair. See the module docs for the drop rules;
/// nothing is dropped silently.
pub fn extract_windows(
    annotations: &SessionAnnotations,
    streams: &[FeatureStream],
    user_seat: Seat,
    spec: &WindowSpec,
) -> Result<WindowSet, WindowError> {
    spec.validate()?;
    let stream_for = |seat: Seat| -> Result<&FeatureStream, WindowError> {
        streams
            .iter()
            .find(|s| s.seat == seat)
            .ok_or(WindowError::MissingSeat(seat))
    };
    let user_stream = stream_for(user_seat)?;
    let [seat_a, seat_b] = user_seat.others();
    let stream_a = stream_for(seat_a)?;
    let stream_b = stream_for(seat_b)?;

    let lifts: Vec<u64> = annotations
        .events_of_kind(user_seat, EventKind::FoodLifted)
        .iter()
        .map(|e| e.start_ms)
        .collect();
    let disruptions = annotations.disruption_intervals();

    let span_ms = spec.span_ms();
    let half_span_ms = span_ms / 2;
    let frames = spec.frames_per_window();
    // Allow up to two frame periods of jitter/rounding in the span check.
    let max_span_ms = span_ms + 2 * (1000 + u64::from(spec.fps) - 1) / u64::from(spec.fps);

    let mut candidates: Vec<(u64, bool)> = lifts.iter().map(|&l| (l, true)).collect();
    for pair in lifts.windows(2) {
        let mid = (pair[0] + pair[1]) / 2;
        candidates.push((mid + half_span_ms, false));
    }
    candidates.sort_by_key(|&(anchor, label)| (anchor, label));

    let near_gap_ms = (spec.min_gap_to_positive_s * 1000.0).round() as u64;
    let mut windows = Vec::new();
    let mut drops = DropReport::default();
    let mut drop = |anchor_ms: u64, label: bool, reason: DropReason| {
        drops.records.push(DropRecord {
            session_id: annotations.session_id.clone(),
            anchor_ms,
            label,
            reason,
        });
    };

    'candidates: for (anchor, label) in candidates {
        let win_start = anchor.saturating_sub(span_ms);

        for stream in [user_stream, stream_a, stream_b] {
            let end = stream.frames.partition_point(|f| f.t_ms < anchor);
            if end < frames {
                drop(anchor, label, DropReason::ShortHistory);
                continue 'candidates;
            }
            if anchor - stream.frames[end - frames].t_ms > max_span_ms {
                drop(anchor, label, DropReason::SparseFrames);
                continue 'candidates;
            }
        }

        if disruptions.iter().any(|&(s, e)| win_start < e && s < anchor) {
            drop(anchor, label, DropReason::CrossesDisruption);
            continue;
        }

        if !label {
            let lo = win_start.saturating_sub(near_gap_ms);
            let hi = anchor + near_gap_ms;
            if lifts.iter().any(|&l| lo < l && l < hi) {
                drop(anchor, label, DropReason::NearPositive);
                continue;
            }
        }

        windows.push(LabeledWindow {
            session_id: annotations.session_id.clone(),
            anchor_ms: anchor,
            label,
            user: fill_channel(user_stream, anchor, frames, spec.gamma, Some(&lifts)),
            codiner_a: fill_channel(stream_a, anchor, frames, 0, None),
            codiner_b: fill_channel(stream_b, anchor, frames, 0, None),
        });
    }

    Ok(WindowSet { spec: *spec, user_seat, windows, drops })
}

/// Convenience wrapper for generator output.
pub fn extract_windows_from_synthetic(
    session: &SyntheticSession,
    spec: &WindowSpec,
) -> Result<WindowSet, WindowError> {
    extract_windows(&session.annotations, &session.streams, session.user_seat, spec)
}

/// Builds the three channel matrices for one window ending at `anchor_ms`
/// (exclusive), with the user's bite features computed from the supplied
/// event onsets instead of the annotation record. This is how the replay
/// simulator scores live windows: perception rows come from the recorded
/// streams, bite rows from the simulated feed clock.
///
/// Returns `Ok(None)` while any stream holds fewer than a full window of
/// frames before the anchor (the buffer is still filling).
pub fn build_window_channels(
    streams: &[FeatureStream],
    user_seat: Seat,
    anchor_ms: u64,
    spec: &WindowSpec,
    bite_events_ms: &[u64],
) -> Result<Option<[Array2<f64>; 3]>, WindowError> {
    spec.validate()?;
    let stream_for = |seat: Seat| -> Result<&FeatureStream, WindowError> {
        streams
            .iter()
            .find(|s| s.seat == seat)
            .ok_or(WindowError::MissingSeat(seat))
    };
    let user_stream = stream_for(user_seat)?;
    let [seat_a, seat_b] = user_seat.others();
    let stream_a = stream_for(seat_a)?;
    let stream_b = stream_for(seat_b)?;

    let frames = spec.frames_per_window();
    for stream in [user_stream, stream_a, stream_b] {
        if stream.frames.partition_point(|f| f.t_ms < anchor_ms) < frames {
            return Ok(None);
        }
    }
    Ok(Some([
        fill_channel(user_stream, anchor_ms, frames, spec.gamma, Some(bite_events_ms)),
        fill_channel(stream_a, anchor_ms, frames, 0, None),
        fill_channel(stream_b, anchor_ms, frames, 0, None),
    ]))
}

fn fill_channel(
    stream: &FeatureStream,
    anchor_ms: u64,
    frames: usize,
    gamma: usize,
    lifts: Option<&[u64]>,
) -> Array2<f64> {
    let layout = if lifts.is_some() { ChannelLayout::user(gamma) } else { ChannelLayout::codiner() };
    let end = stream.frames.partition_point(|f| f.t_ms < anchor_ms);
    let slice = &stream.frames[end - frames..end];

    let mut m = Array2::zeros((layout.rows(), frames));
    for (col, frame) in slice.iter().enumerate() {
        for (i, &v) in frame.pose.iter().enumerate() {
            m[(layout.pose.start + i, col)] = v;
        }
        for (i, &v) in frame.gaze_head.iter().enumerate() {
            m[(layout.gaze_head.start + i, col)] = v;
        }
        m[(layout.speaking, col)] = f64::from(frame.speaking);
        if let (Some(bite_rows), Some(lifts)) = (&layout.bite, lifts) {
            let tiled = scale_bite_features(bite_features_at(lifts, frame.t_ms), gamma);
            for (i, &v) in tiled.iter().enumerate() {
                m[(bite_rows.start + i, col)] = v;
            }
        }
    }
    m
}

const ARCHIVE_MAGIC: &[u8; 4] = b"SNNW";
const ARCHIVE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ArchiveHeader {
    spec: WindowSpec,
    user_seat: Seat,
    user_rows: usize,
    codiner_rows: usize,
    frames: usize,
    windows: Vec<WindowMeta>,
    drops: DropReport,
}

#[derive(Serialize, Deserialize)]
struct WindowMeta {
    session_id: String,
    anchor_ms: u64,
    label: bool,
}

/// Writes a window set to the binary archive format: magic + version, a
/// JSON header (spec, per-window metadata, drop report), then raw
/// little-endian `f64` matrices. Floats survive bit for bit.
pub fn write_window_archive(path: &Path, set: &WindowSet) -> Result<(), WindowError> {
    let header = ArchiveHeader {
        spec: set.spec,
        user_seat: set.user_seat,
        user_rows: set.spec.user_rows(),
        codiner_rows: set.spec.codiner_rows(),
        frames: set.spec.frames_per_window(),
        windows: set
            .windows
            .iter()
            .map(|w| WindowMeta {
                session_id: w.session_id.clone(),
                anchor_ms: w.anchor_ms,
                label: w.label,
            })
            .collect(),
        drops: set.drops.clone(),
    };
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| WindowError::Corrupt(e.to_string()))?;

    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(ARCHIVE_MAGIC)?;
    out.write_u32::<LittleEndian>(ARCHIVE_VERSION)?;
    out.write_u64::<LittleEndian>(header_bytes.len() as u64)?;
    out.write_all(&header_bytes)?;
    for w in &set.windows {
        for m in [&w.user, &w.codiner_a, &w.codiner_b] {
            for &v in m.iter() {
                out.write_f64::<LittleEndian>(v)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads an archive written by [`write_window_archive`].
pub fn read_window_archive(path: &Path) -> Result<WindowSet, WindowError> {
    let mut input = std::io::BufReader::new(std::fs::File::open(path)?);

    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != ARCHIVE_MAGIC {
        return Err(WindowError::Corrupt("bad magic".to_string()));
    }
    let version = input.read_u32::<LittleEndian>()?;
    if version != ARCHIVE_VERSION {
        return Err(WindowError::Corrupt(format!("unsupported version {version}")));
    }
    let header_len = input.read_u64::<LittleEndian>()? as usize;
    let mut header_bytes = vec![0u8; header_len];
    input.read_exact(&mut header_bytes)?;
    let header: ArchiveHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| WindowError::Corrupt(format!("header: {e}")))?;

    if header.user_rows != header.spec.user_rows()
        || header.codiner_rows != header.spec.codiner_rows()
        || header.frames != header.spec.frames_per_window()
    {
        return Err(WindowError::Corrupt("header dimensions disagree with spec".to_string()));
    }

    let read_matrix = |input: &mut dyn Read, rows: usize, cols: usize| -> Result<Array2<f64>, WindowError> {
        let mut buf = vec![0.0f64; rows * cols];
        input
            .read_f64_into::<LittleEndian>(&mut buf)
            .map_err(|_| WindowError::Corrupt("payload truncated".to_string()))?;
        Array2::from_shape_vec((rows, cols), buf)
            .map_err(|e| WindowError::Corrupt(e.to_string()))
    };

    let mut windows = Vec::with_capacity(header.windows.len());
    for meta in &header.windows {
        windows.push(LabeledWindow {
            session_id: meta.session_id.clone(),
            anchor_ms: meta.anchor_ms,
            label: meta.label,
            user: read_matrix(&mut input, header.user_rows, header.frames)?,
            codiner_a: read_matrix(&mut input, header.codiner_rows, header.frames)?,
            codiner_b: read_matrix(&mut input, header.codiner_rows, header.frames)?,
        });
    }
    let mut trailing = Vec::new();
    input.read_to_end(&mut trailing)?;
    if !trailing.is_empty() {
        return Err(WindowError::Corrupt(format!("{} trailing bytes", trailing.len())));
    }

    Ok(WindowSet {
        spec: header.spec,
        user_seat: header.user_seat,
        windows,
        drops: header.drops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{
        AnnotationEvent, EventValue, FrameFeatures, SessionAnnotations, SyntheticConfig,
    };
    use tempfile::tempdir;

    fn seat(n: u8) -> Seat {
        Seat::new(n).unwrap()
    }

    /// 5 fps streams with distinctive values per seat and frame.
    fn toy_streams(duration_ms: u64) -> Vec<FeatureStream> {
        Seat::all()
            .into_iter()
            .map(|s| {
                let mut stream = FeatureStream::new(s, 5);
                let mut t = 0;
                while t < duration_ms {
                    let mut frame = FrameFeatures::zeroed(t);
                    frame.pose[0] = f64::from(s.number()) * 1000.0 + t as f64 / 100.0;
                    frame.gaze_head[3] = -(t as f64) / 1000.0;
                    frame.speaking = u8::from((t / 200) % 3 == 0);
                    stream.frames.push(frame);
                    t += 200;
                }
                stream
            })
            .collect()
    }

    fn toy_session(lifts_ms: &[u64]) -> SessionAnnotations {
        let mut s = SessionAnnotations::new("toy", 120_000);
        for &l in lifts_ms {
            s.events[0].push(AnnotationEvent::new(EventKind::FoodLifted, EventValue::Fork, l, l + 400));
            s.events[0].push(AnnotationEvent::new(
                EventKind::FoodToMouth,
                EventValue::Fork,
                l + 1_000,
                l + 1_800,
            ));
        }
        s.sort_events();
        s
    }

    fn toy_spec() -> WindowSpec {
        WindowSpec { k_seconds: 2.0, fps: 5, gamma: 1, min_gap_to_positive_s: 0.0 }
    }

    #[test]
    fn default_geometry_matches_six_seconds_at_fifteen_fps() {
        let spec = WindowSpec::default();
        assert_eq!(spec.frames_per_window(), 90);
        assert_eq!(spec.user_rows(), 373);
        assert_eq!(spec.codiner_rows(), 173);
    }

    #[test]
    fn positive_window_holds_the_frames_strictly_before_the_lift() {
        let session = toy_session(&[10_000]);
        let streams = toy_streams(30_000);
        let set = extract_windows(&session, &streams, seat(1), &toy_spec()).unwrap();
        assert_eq!(set.windows.len(), 1);
        let w = &set.windows[0];
        assert!(w.label);
        assert_eq!(w.anchor_ms, 10_000);
        assert_eq!(w.user.dim(), (175, 10));
        assert_eq!(w.codiner_a.dim(), (173, 10));

        // Frames at 8000, 8200, ..., 9800 ms; pose row 0 encodes seat+time.
        for (col, t) in (8_000..10_000).step_by(200).enumerate() {
            assert_eq!(w.user[(0, col)], 1_000.0 + t as f64 / 100.0, "user col {col}");
            assert_eq!(w.codiner_a[(0, col)], 2_000.0 + t as f64 / 100.0);
            assert_eq!(w.codiner_b[(0, col)], 3_000.0 + t as f64 / 100.0);
            assert_eq!(w.user[(168 + 3, col)], -(t as f64) / 1000.0, "gaze row");
            assert_eq!(w.user[(172, col)], f64::from(u8::from((t / 200) % 3 == 0)));
        }
    }

    #[test]
    fn bite_rows_track_history_without_seeing_the_label_lift() {
        let session = toy_session(&[4_000, 10_000]);
        let streams = toy_streams(30_000);
        let set = extract_windows(&session, &streams, seat(1), &toy_spec()).unwrap();
        let w = set.windows.iter().find(|w| w.anchor_ms == 10_000).unwrap();
        // Window frames 8000..9800: one bite (at 4000 ms) has happened.
        for (col, t) in (8_000..10_000).step_by(200).enumerate() {
            assert_eq!(w.user[(173, col)], (t - 4_000) as f64 / 1000.0, "time-since col {col}");
            assert_eq!(w.user[(174, col)], 1.0, "count col {col}");
        }
    }

    #[test]
    fn negative_anchor_sits_half_a_window_past_the_midpoint() {
        let session = toy_session(&[10_000, 20_000]);
        let streams = toy_streams(30_000);
        let set = extract_windows(&session, &streams, seat(1), &toy_spec()).unwrap();
        let negatives: Vec<&LabeledWindow> = set.windows.iter().filter(|w| !w.label).collect();
        assert_eq!(negatives.len(), 1);
        // Midpoint 15_000, span 2_000 → anchor 16_000, window [14_000, 16_000).
        assert_eq!(negatives[0].anchor_ms, 16_000);
    }

    #[test]
    fn too_little_history_is_dropped_and_reported() {
        let session = toy_session(&[1_000, 10_000]);
        let streams = toy_streams(30_000);
        let set = extract_windows(&session, &streams, seat(1), &toy_spec()).unwrap();
        assert_eq!(set.positives(), 1, "only the 10 s lift has 2 s of history");
        assert_eq!(set.drops.count_of(DropReason::ShortHistory), 1);
        let dropped = &set.drops.records[0];
        assert_eq!((dropped.anchor_ms, dropped.label), (1_000, true));
    }

    #[test]
    fn gaps_in_the_stream_drop_the_window_as_sparse() {
        let session = toy_session(&[10_000]);
        let mut streams = toy_streams(30_000);
        // Remove frames 8600..9400 from the user stream: still >= 10 frames
        // before the anchor, but the 10th-from-last sits too far back.
        streams[0].frames.retain(|f| !(8_600..9_400).contains(&f.t_ms));
        let set = extract_windows(&session, &streams, seat(1), &toy_spec()).unwrap();
        assert_eq!(set.windows.len(), 0);
        assert_eq!(set.drops.count_of(DropReason::SparseFrames), 1);
    }

    #[test]
    fn windows_crossing_disruptions_are_dropped() {
        let mut session = toy_session(&[10_000, 20_000]);
        session.events[1].push(AnnotationEvent::new(
            EventKind::Disruption,
            EventValue::ParticipantLeft,
            9_000,
            9_500,
        ));
        session.sort_events();
        let streams = toy_streams(30_000);
        let set = extract_windows(&session, &streams, seat(1), &toy_spec()).unwrap();
        assert_eq!(set.drops.count_of(DropReason::CrossesDisruption), 1);
        assert!(set.windows.iter().all(|w| w.anchor_ms != 10_000));
        // The negative window [14_000, 16_000) is unaffected.
        assert_eq!(set.negatives(), 1);
    }

    #[test]
    fn negative_containing_a_lift_is_dropped_even_without_margin() {
        // Lifts 1.5 s apart with a 2 s window: the midpoint span contains
        // both lifts.
        let session = toy_session(&[10_000, 11_500]);
        let streams = toy_streams(30_000);
        let set = extract_windows(&session, &streams, seat(1), &toy_spec()).unwrap();
        assert_eq!(set.negatives(), 0);
        assert_eq!(set.drops.count_of(DropReason::NearPositive), 1);
    }

    #[test]
    fn margin_widens_the_near_positive_exclusion() {
        let session = toy_session(&[10_000, 16_000]);
        let streams = toy_streams(30_000);

        let keep = extract_windows(&session, &streams, seat(1), &toy_spec()).unwrap();
        assert_eq!(keep.negatives(), 1, "bare midpoint negative survives without margin");

        let spec = WindowSpec { min_gap_to_positive_s: 3.0, ..toy_spec() };
        let dropped = extract_windows(&session, &streams, seat(1), &spec).unwrap();
        assert_eq!(dropped.negatives(), 0);
        assert_eq!(dropped.drops.count_of(DropReason::NearPositive), 1);
    }

    #[test]
    fn missing_seat_stream_is_an_error() {
        let session = toy_session(&[10_000]);
        let mut streams = toy_streams(30_000);
        streams.remove(1);
        match extract_windows(&session, &streams, seat(1), &toy_spec()) {
            Err(WindowError::MissingSeat(s)) => assert_eq!(s.number(), 2),
            other => panic!("expected MissingSeat, got {other:?}"),
        }
    }

    #[test]
    fn extraction_matches_a_brute_force_reimplementation_on_synthetic_data() {
        let cfg = SyntheticConfig { seed: 31, duration_s: 240.0, ..SyntheticConfig::default() };
        let session = crate::data::generate_synthetic_session(&cfg).unwrap();
        let spec = WindowSpec { gamma: 2, ..WindowSpec::default() };
        let set = extract_windows_from_synthetic(&session, &spec).unwrap();

        // Brute force: enumerate anchors independently.
        let lifts: Vec<u64> = session
            .annotations
            .events_of_kind(session.user_seat, EventKind::FoodLifted)
            .iter()
            .map(|e| e.start_ms)
            .collect();
        let mut expected: Vec<(u64, bool)> = Vec::new();
        for &l in &lifts {
            expected.push((l, true));
        }
        for pair in lifts.windows(2) {
            expected.push(((pair[0] + pair[1]) / 2 + 3_000, false));
        }
        let user = &session.streams[session.user_seat.index()];
        expected.retain(|&(anchor, _)| {
            let n_before = user.frames.iter().filter(|f| f.t_ms < anchor).count();
            n_before >= 90
        });
        expected.sort_by_key(|&(a, l)| (a, l));

        let got: Vec<(u64, bool)> = set.windows.iter().map(|w| (w.anchor_ms, w.label)).collect();
        assert_eq!(got, expected);
        assert_eq!(set.windows.len() + set.drops.len(), lifts.len() * 2 - 1);

        // Spot-check one positive's last bite-history column against the
        // annotation-derived truth.
        let w = set.windows.iter().find(|w| w.label).unwrap();
        let frames = spec.frames_per_window();
        let prior: Vec<u64> = lifts.iter().copied().filter(|&l| l < w.anchor_ms).collect();
        let last_frame_t = user.frames[user.frames.partition_point(|f| f.t_ms < w.anchor_ms) - 1].t_ms;
        let truth = bite_features_at(&prior, last_frame_t);
        assert_eq!(w.user[(173, frames - 1)], truth.time_since_s);
        assert_eq!(w.user[(174, frames - 1)], f64::from(truth.count));
    }

    #[test]
    fn archive_round_trip_is_bit_exact() {
        let session = toy_session(&[10_000, 20_000, 33_000]);
        let streams = toy_streams(60_000);
        let set = extract_windows(&session, &streams, seat(1), &toy_spec()).unwrap();
        assert!(set.windows.len() >= 4);

        let dir = tempdir().unwrap();
        let path = dir.path().join("windows.snnw");
        write_window_archive(&path, &set).unwrap();
        let back = read_window_archive(&path).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn truncated_archives_are_rejected() {
        let session = toy_session(&[10_000]);
        let streams = toy_streams(30_000);
        let set = extract_windows(&session, &streams, seat(1), &toy_spec()).unwrap();

        let dir = tempdir().unwrap();
        let path = dir.path().join("windows.snnw");
        write_window_archive(&path, &set).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(read_window_archive(&path), Err(WindowError::Corrupt(_))));

        let mut garbled = bytes.clone();
        garbled[0] = b'X';
        std::fs::write(&path, &garbled).unwrap();
        match read_window_archive(&path) {
            Err(WindowError::Corrupt(msg)) => assert!(msg.contains("magic")),
            other => panic!("expected Corrupt, got {other:?}"),
        }
    }

    #[test]
    fn merge_requires_matching_spec() {
        let session = toy_session(&[10_000]);
        let streams = toy_streams(30_000);
        let mut a = extract_windows(&session, &streams, seat(1), &toy_spec()).unwrap();
        let b = extract_windows(&session, &streams, seat(1), &toy_spec()).unwrap();
        let n = a.windows.len();
        a.merge(b).unwrap();
        assert_eq!(a.windows.len(), 2 * n);

        let other_spec = WindowSpec { gamma: 2, ..toy_spec() };
        let c = extract_windows(&session, &streams, seat(1), &other_spec).unwrap();
        assert!(matches!(a.merge(c), Err(WindowError::Mismatch(_))));
    }
}
