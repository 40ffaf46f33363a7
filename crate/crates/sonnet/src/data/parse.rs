//! Reading and writing annotation and feature-stream CSV files.
//!
//! # Annotation files
//!
//! Flat CSV with header `session_id,seat,kind,value,start_ms,end_ms`, one row
//! per event. `value` is `none` when no qualifier applies. A file may hold
//! one session or several (rows carry the session id).
//!
//! Because event rows alone cannot express a session's total length or its
//! seat geometry, the writer prepends one comment line per session:
//!
//! ```text
//! # session=lunch_07 duration_ms=1803000 seat_angles=90,210,330
//! ```
//!
//! Comment lines are optional on input: files from other tools parse fine,
//! with duration falling back to the latest event end and seat angles to the
//! default even spacing. Unknown `key=value` pairs in comments are ignored.
//!
//! Parsing is order-insensitive: rows may appear in any order and always
//! produce the same [`SessionAnnotations`], because events are sorted into
//! canonical order and sessions are returned sorted by id.
//!
//! # Feature-stream files
//!
//! One file per session with header
//! `seat,t_ms,s,d1..d4,o1..o168[,b_time,b_count]`: one row per frame per
//! seat, `s` the speaking flag, `d*` gaze/head angles, `o*` keypoint
//! coordinates, and the optional trailing pair the user's bite-history
//! features (empty on co-diner rows). An all-zero `d*` or `o*` group encodes
//! a missed detection and is loaded with the corresponding validity flag
//! cleared.

use super::types::{
    AnnotationEvent, BiteFeatures, EventKind, EventValue, FeatureStream, FrameFeatures, Seat,
    SessionAnnotations, DEFAULT_SEAT_ANGLES, GAZE_HEAD_DIMS, POSE_DIMS,
};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use thiserror::Error;

/// Why a file failed to load.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// Structurally broken row: wrong field count, unparseable number,
    /// unknown kind/value token, or a bad seat number.
    #[error("line {line}: malformed row: {message}")]
    MalformedRow { line: u64, message: String },
    /// The value token exists but is not legal for the row's kind
    /// (e.g. `mouth_open` with value `fork`).
    #[error("line {line}: value `{value}` is not legal for kind `{kind}`")]
    IllegalValueForKind { line: u64, kind: EventKind, value: EventValue },
    /// Event with `end_ms <= start_ms`.
    #[error("line {line}: non-positive duration ({start_ms}..{end_ms})")]
    NonPositiveDuration { line: u64, start_ms: u64, end_ms: u64 },
    /// Stream-level inconsistency that no single row can be blamed for.
    #[error("inconsistent feature stream: {message}")]
    Stream { message: String },
}

const ANNOTATION_HEADER: [&str; 6] = ["session_id", "seat", "kind", "value", "start_ms", "end_ms"];

/// Per-session metadata recovered from comment lines.
#[derive(Debug, Default, Clone)]
struct SessionMeta {
    duration_ms: Option<u64>,
    seat_angles_deg: Option<[f64; 3]>,
}

fn parse_meta_comments(text: &str) -> BTreeMap<String, SessionMeta> {
    let mut metas: BTreeMap<String, SessionMeta> = BTreeMap::new();
    for line in text.lines() {
        let Some(body) = line.trim_start().strip_prefix('#') else { continue };
        let mut session: Option<&str> = None;
        let mut meta = SessionMeta::default();
        for token in body.split_whitespace() {
            let Some((key, value)) = token.split_once('=') else { continue };
            match key {
                "session" => session = Some(value),
                "duration_ms" => meta.duration_ms = value.parse().ok(),
                "seat_angles" => {
                    let parts: Vec<f64> =
                        value.split(',').filter_map(|p| p.parse().ok()).collect();
                    if parts.len() == 3 {
                        meta.seat_angles_deg = Some([parts[0], parts[1], parts[2]]);
                    }
                }
                _ => {}
            }
        }
        if let Some(id) = session {
            metas.insert(id.to_string(), meta);
        }
    }
    metas
}

fn malformed(line: u64, message: impl Into<String>) -> ParseError {
    ParseError::MalformedRow { line, message: message.into() }
}

fn parse_u64_field(line: u64, name: &str, raw: &str) -> Result<u64, ParseError> {
    raw.trim()
        .parse()
        .map_err(|_| malformed(line, format!("field `{name}` is not a non-negative integer: `{raw}`")))
}

/// Parses every session found in an annotation CSV, sorted by session id.
///
/// Events are validated row-by-row for schema legality (known kind, value
/// legal for the kind, positive duration); cross-event rules are the
/// validator's job, not the parser's.
pub fn parse_sessions(path: &Path) -> Result<Vec<SessionAnnotations>, ParseError> {
    let text = fs::read_to_string(path)?;
    let metas = parse_meta_comments(&text);

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    {
        let headers = reader
            .headers()
            .map_err(|e| malformed(1, format!("unreadable header: {e}")))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != ANNOTATION_HEADER {
            return Err(malformed(
                1,
                format!("expected header `{}`, got `{}`", ANNOTATION_HEADER.join(","), got.join(",")),
            ));
        }
    }

    let mut sessions: BTreeMap<String, SessionAnnotations> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, csv::Position::line);
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        if record.len() != ANNOTATION_HEADER.len() {
            return Err(malformed(
                line,
                format!("expected {} fields, got {}", ANNOTATION_HEADER.len(), record.len()),
            ));
        }

        let session_id = record[0].to_string();
        if session_id.is_empty() {
            return Err(malformed(line, "empty session_id"));
        }
        let seat_num: u8 = record[1]
            .parse()
            .map_err(|_| malformed(line, format!("seat is not an integer: `{}`", &record[1])))?;
        let seat = Seat::new(seat_num)
            .ok_or_else(|| malformed(line, format!("seat must be 1..=3, got {seat_num}")))?;
        let kind = EventKind::from_str(&record[2])
            .ok_or_else(|| malformed(line, format!("unknown event kind `{}`", &record[2])))?;
        let value = EventValue::from_str(&record[3])
            .ok_or_else(|| malformed(line, format!("unknown event value `{}`", &record[3])))?;
        if !kind.legal_values().contains(&value) {
            return Err(ParseError::IllegalValueForKind { line, kind, value });
        }
        let start_ms = parse_u64_field(line, "start_ms", &record[4])?;
        let end_ms = parse_u64_field(line, "end_ms", &record[5])?;
        if end_ms <= start_ms {
            return Err(ParseError::NonPositiveDuration { line, start_ms, end_ms });
        }

        sessions
            .entry(session_id.clone())
            .or_insert_with(|| SessionAnnotations::new(session_id, 0))
            .events[seat.index()]
            .push(AnnotationEvent::new(kind, value, start_ms, end_ms));
    }

    // Sessions announced only by a comment line still materialize (empty).
    for id in metas.keys() {
        sessions
            .entry(id.clone())
            .or_insert_with(|| SessionAnnotations::new(id.clone(), 0));
    }

    let mut out: Vec<SessionAnnotations> = sessions.into_values().collect();
    for session in &mut out {
        session.sort_events();
        let meta = metas.get(&session.session_id).cloned().unwrap_or_default();
        let latest_end = session.events.iter().flatten().map(|e| e.end_ms).max().unwrap_or(0);
        session.duration_ms = meta.duration_ms.unwrap_or(latest_end);
        session.seat_angles_deg = meta.seat_angles_deg.unwrap_or(DEFAULT_SEAT_ANGLES);
    }
    Ok(out)
}

/// Parses an annotation CSV expected to hold exactly one session.
///
/// A header-only file yields an event-free session named after the file stem
/// (the validator will flag its emptiness); a file with several session ids
/// is rejected as malformed.
pub fn parse_annotations(path: &Path) -> Result<SessionAnnotations, ParseError> {
    let mut sessions = parse_sessions(path)?;
    match sessions.len() {
        0 => {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "session".to_string());
            Ok(SessionAnnotations::new(stem, 0))
        }
        1 => Ok(sessions.pop().expect("len checked")),
        n => Err(ParseError::Stream {
            message: format!("expected a single session in file, found {n}"),
        }),
    }
}

/// Writes sessions to one annotation CSV, canonically ordered, with one
/// metadata comment line per session. `parse_sessions` inverts this exactly.
pub fn write_annotations(path: &Path, sessions: &[SessionAnnotations]) -> Result<(), ParseError> {
    let mut out = String::new();
    for session in sessions {
        let [a, b, c] = session.seat_angles_deg;
        out.push_str(&format!(
            "# session={} duration_ms={} seat_angles={},{},{}\n",
            session.session_id, session.duration_ms, a, b, c
        ));
    }
    out.push_str(&ANNOTATION_HEADER.join(","));
    out.push('\n');

    let mut ordered: Vec<&SessionAnnotations> = sessions.iter().collect();
    ordered.sort_by(|x, y| x.session_id.cmp(&y.session_id));
    for session in ordered {
        let mut rows: Vec<(Seat, &AnnotationEvent)> = Vec::new();
        for seat in Seat::all() {
            rows.extend(session.events_for(seat).iter().map(|e| (seat, e)));
        }
        rows.sort_by_key(|(seat, e)| (*seat, e.sort_key()));
        for (seat, e) in rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                session.session_id, seat, e.kind, e.value, e.start_ms, e.end_ms
            ));
        }
    }

    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

fn stream_header(with_bite: bool) -> Vec<String> {
    let mut header = vec!["seat".to_string(), "t_ms".to_string(), "s".to_string()];
    header.extend((1..=GAZE_HEAD_DIMS).map(|i| format!("d{i}")));
    header.extend((1..=POSE_DIMS).map(|i| format!("o{i}")));
    if with_bite {
        header.push("b_time".to_string());
        header.push("b_count".to_string());
    }
    header
}

/// Writes per-seat feature streams for one session to a CSV file.
///
/// Bite columns appear only when at least one stream carries bite features.
/// Missed detections are stored as all-zero groups, matching how they are
/// read back.
pub fn write_feature_streams(path: &Path, streams: &[FeatureStream]) -> Result<(), ParseError> {
    if let Some(first) = streams.first() {
        if streams.iter().any(|s| s.fps != first.fps) {
            return Err(ParseError::Stream {
                message: "streams in one file must share a frame rate".to_string(),
            });
        }
    }
    let with_bite = streams.iter().any(|s| s.frames.iter().any(|f| f.bite.is_some()));

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(stream_header(with_bite))
        .map_err(|e| ParseError::Stream { message: e.to_string() })?;

    let mut ordered: Vec<&FeatureStream> = streams.iter().collect();
    ordered.sort_by_key(|s| s.seat);
    for stream in ordered {
        for frame in &stream.frames {
            let mut record: Vec<String> = Vec::with_capacity(5 + POSE_DIMS + GAZE_HEAD_DIMS);
            record.push(stream.seat.to_string());
            record.push(frame.t_ms.to_string());
            record.push(frame.speaking.to_string());
            for i in 0..GAZE_HEAD_DIMS {
                let v = if frame.gaze_head_valid { frame.gaze_head[i] } else { 0.0 };
                record.push(v.to_string());
            }
            for i in 0..POSE_DIMS {
                let v = if frame.pose_valid { frame.pose[i] } else { 0.0 };
                record.push(v.to_string());
            }
            if with_bite {
                match frame.bite {
                    Some(b) => {
                        record.push(b.time_since_s.to_string());
                        record.push(b.count.to_string());
                    }
                    None => {
                        record.push(String::new());
                        record.push(String::new());
                    }
                }
            }
            writer
                .write_record(&record)
                .map_err(|e| ParseError::Stream { message: e.to_string() })?;
        }
    }

    let bytes = writer.into_inner().map_err(|e| ParseError::Stream { message: e.to_string() })?;
    let fps_line = streams.first().map(|s| format!("# fps={}\n", s.fps)).unwrap_or_default();
    let mut file = fs::File::create(path)?;
    file.write_all(fps_line.as_bytes())?;
    file.write_all(&bytes)?;
    Ok(())
}

fn parse_f64_field(line: u64, name: &str, raw: &str) -> Result<f64, ParseError> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| malformed(line, format!("field `{name}` is not a number: `{raw}`")))?;
    if !v.is_finite() {
        return Err(malformed(line, format!("field `{name}` is not finite: `{raw}`")));
    }
    Ok(v)
}

/// Reads per-seat feature streams written by [`write_feature_streams`],
/// sorted by seat with frames in time order.
///
/// The frame rate comes from a `# fps=N` comment when present and is
/// otherwise inferred from the median frame spacing. Per-seat timestamps
/// must be unique, and bite counts must be non-decreasing in time.
pub fn parse_feature_streams(path: &Path) -> Result<Vec<FeatureStream>, ParseError> {
    let text = fs::read_to_string(path)?;
    let fps_comment: Option<u32> = text.lines().find_map(|line| {
        let body = line.trim_start().strip_prefix('#')?;
        body.split_whitespace()
            .find_map(|tok| tok.strip_prefix("fps=").and_then(|v| v.parse().ok()))
    });

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let with_bite = {
        let headers = reader
            .headers()
            .map_err(|e| malformed(1, format!("unreadable header: {e}")))?;
        let got: Vec<&str> = headers.iter().collect();
        let plain = stream_header(false);
        let bited = stream_header(true);
        if got == plain.iter().map(String::as_str).collect::<Vec<_>>() {
            false
        } else if got == bited.iter().map(String::as_str).collect::<Vec<_>>() {
            true
        } else {
            return Err(malformed(1, "unrecognized feature stream header"));
        }
    };

    let mut per_seat: BTreeMap<Seat, Vec<FrameFeatures>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, csv::Position::line);
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        let expected = stream_header(with_bite).len();
        if record.len() != expected {
            return Err(malformed(
                line,
                format!("expected {expected} fields, got {}", record.len()),
            ));
        }

        let seat_num: u8 = record[0]
            .parse()
            .map_err(|_| malformed(line, format!("seat is not an integer: `{}`", &record[0])))?;
        let seat = Seat::new(seat_num)
            .ok_or_else(|| malformed(line, format!("seat must be 1..=3, got {seat_num}")))?;
        let t_ms = parse_u64_field(line, "t_ms", &record[1])?;
        let speaking: u8 = match record[2].trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(malformed(line, format!("field `s` must be 0 or 1, got `{other}`"))),
        };

        let mut gaze_head = [0.0; GAZE_HEAD_DIMS];
        for (i, g) in gaze_head.iter_mut().enumerate() {
            *g = parse_f64_field(line, &format!("d{}", i + 1), &record[3 + i])?;
        }
        let mut pose = vec![0.0; POSE_DIMS];
        for (i, p) in pose.iter_mut().enumerate() {
            *p = parse_f64_field(line, &format!("o{}", i + 1), &record[3 + GAZE_HEAD_DIMS + i])?;
        }

        let bite = if with_bite {
            let time_raw = record[3 + GAZE_HEAD_DIMS + POSE_DIMS].trim();
            let count_raw = record[4 + GAZE_HEAD_DIMS + POSE_DIMS].trim();
            match (time_raw.is_empty(), count_raw.is_empty()) {
                (true, true) => None,
                (false, false) => Some(BiteFeatures {
                    time_since_s: parse_f64_field(line, "b_time", time_raw)?,
                    count: count_raw.parse().map_err(|_| {
                        malformed(line, format!("field `b_count` is not an integer: `{count_raw}`"))
                    })?,
                }),
                _ => return Err(malformed(line, "bite fields must be both present or both empty")),
            }
        } else {
            None
        };

        let gaze_head_valid = gaze_head.iter().any(|&v| v != 0.0);
        let pose_valid = pose.iter().any(|&v| v != 0.0);
        per_seat.entry(seat).or_default().push(FrameFeatures {
            t_ms,
            pose,
            gaze_head,
            speaking,
            pose_valid,
            gaze_head_valid,
            bite,
        });
    }

    let mut streams = Vec::new();
    for (seat, mut frames) in per_seat {
        frames.sort_by_key(|f| f.t_ms);
        for pair in frames.windows(2) {
            if pair[0].t_ms == pair[1].t_ms {
                return Err(ParseError::Stream {
                    message: format!("seat {seat}: duplicate frame timestamp {} ms", pair[0].t_ms),
                });
            }
            if let (Some(a), Some(b)) = (pair[0].bite, pair[1].bite) {
                if b.count < a.count {
                    return Err(ParseError::Stream {
                        message: format!("seat {seat}: bite count decreases at {} ms", pair[1].t_ms),
                    });
                }
            }
        }
        let fps = fps_comment.unwrap_or_else(|| infer_fps(&frames));
        streams.push(FeatureStream { seat, fps, frames });
    }
    Ok(streams)
}

fn infer_fps(frames: &[FrameFeatures]) -> u32 {
    let mut gaps: Vec<u64> = frames.windows(2).map(|p| p[1].t_ms - p[0].t_ms).collect();
    if gaps.is_empty() {
        return 15;
    }
    gaps.sort_unstable();
    let median = gaps[gaps.len() / 2];
    if median == 0 {
        return 15;
    }
    (1000.0 / median as f64).round().max(1.0) as u32
}
