//! Aligning the microphone-array track to the video frame grid, and audio
//! track file I/O.
//!
//! Audio and video run on independent clocks and rates. Every video frame is
//! paired with the audio frame nearest in time; when the video rate exceeds
//! the audio rate the same audio frame is reused for several video frames,
//! and when ties occur the earlier audio frame wins. Alignment never invents
//! data: each output refers to a real input audio frame by index.
//!
//! Audio tracks are stored as CSV with header `t_ms,voice_active,doa_deg`,
//! one row per audio frame, `voice_active` written as `0`/`1`.

use super::AudioFrame;
use crate::data::ParseError;
use std::io::Write as _;
use std::path::Path;

/// One video-grid timestamp paired with its nearest audio observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedFrame {
    /// The video frame's timestamp, milliseconds.
    pub t_ms: u64,
    /// Index into the audio slice this frame was paired with.
    pub audio_index: usize,
    pub voice_active: bool,
    pub doa_deg: f64,
}

/// Pairs every video timestamp with the nearest audio frame.
///
/// `audio` must be sorted by timestamp. Returns one [`AlignedFrame`] per
/// entry of `video_t_ms`, or an empty vector when there is no audio at all.
/// Equidistant candidates resolve to the earlier audio frame.
pub fn align_audio_to_video(audio: &[AudioFrame], video_t_ms: &[u64]) -> Vec<AlignedFrame> {
    if audio.is_empty() {
        return Vec::new();
    }
    debug_assert!(
        audio.windows(2).all(|p| p[0].t_ms <= p[1].t_ms),
        "audio track must be time-sorted"
    );

    video_t_ms
        .iter()
        .map(|&t| {
            // First audio frame at or after t; the nearest is it or its
            // predecessor.
            let after = audio.partition_point(|a| a.t_ms < t);
            let index = if after == 0 {
                0
            } else if after == audio.len() {
                audio.len() - 1
            } else {
                let before_gap = t - audio[after - 1].t_ms;
                let after_gap = audio[after].t_ms - t;
                if before_gap <= after_gap {
                    after - 1
                } else {
                    after
                }
            };
            let a = &audio[index];
            AlignedFrame { t_ms: t, audio_index: index, voice_active: a.voice_active, doa_deg: a.doa_deg }
        })
        .collect()
}

const AUDIO_HEADER: &str = "t_ms,voice_active,doa_deg";

/// Writes an audio track to CSV. [`parse_audio_track`] inverts this exactly
/// (direction angles round-trip bit for bit).
pub fn write_audio_track(path: &Path, audio: &[AudioFrame]) -> Result<(), ParseError> {
    let mut out = String::from(AUDIO_HEADER);
    out.push('\n');
    for a in audio {
        out.push_str(&format!("{},{},{}\n", a.t_ms, u8::from(a.voice_active), a.doa_deg));
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads an audio track written by [`write_audio_track`].
pub fn parse_audio_track(path: &Path) -> Result<Vec<AudioFrame>, ParseError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == AUDIO_HEADER => {}
        _ => {
            return Err(ParseError::Stream {
                message: format!("audio track must start with header `{AUDIO_HEADER}`"),
            })
        }
    }
    let mut audio = Vec::new();
    for (i, line) in lines {
        let line_no = i as u64 + 1;
        let malformed = |message: String| ParseError::MalformedRow { line: line_no, message };
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(malformed(format!("expected 3 fields, found {}", fields.len())));
        }
        let t_ms = fields[0].parse::<u64>().map_err(|e| malformed(format!("t_ms: {e}")))?;
        let voice_active = match fields[1] {
            "0" => false,
            "1" => true,
            other => return Err(malformed(format!("voice_active must be 0 or 1, got `{other}`"))),
        };
        let doa_deg =
            fields[2].parse::<f64>().map_err(|e| malformed(format!("doa_deg: {e}")))?;
        audio.push(AudioFrame { t_ms, voice_active, doa_deg });
    }
    if !audio.windows(2).all(|p| p[0].t_ms <= p[1].t_ms) {
        return Err(ParseError::Stream { message: "audio rows must be time-sorted".to_string() });
    }
    Ok(audio)
}
