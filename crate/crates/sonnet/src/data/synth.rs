//! Deterministic synthetic dining sessions.
//!
//! The generator fabricates a triadic meal end to end: per-seat conversation
//! turns, bite sequences with full `entered → lifted → to_mouth` event
//! chains (plus `mouth_open`, drinks, napkin use), per-frame pose/gaze
//! features, and optionally a microphone-array track. Output always passes
//! [`validate_session`](super::validate_session) when disruptions are off.
//!
//! The interesting knob is [`LabelCoupling`]: it controls *why* the
//! feeding-system user bites, which in turn controls which feature channels
//! can predict those bites.
//!
//! * [`LabelCoupling::CoDiner`] — the user bites a fixed lead time after
//!   both co-diners start speaking at once. Bite timing is then fully
//!   readable from co-diner channels alone.
//! * [`LabelCoupling::UserPrivate`] — bites follow their own random point
//!   process, but a short gesture burst appears in the user's own gaze/head
//!   channel shortly before each bite. Only channels from the user's seat
//!   carry the signal.
//! * [`LabelCoupling::Both`] — co-diner triggering *and* the private
//!   pre-bite gesture.
//! * [`LabelCoupling::None`] — bites are unpredictable from features.
//!
//! Everything is drawn from per-purpose ChaCha streams derived from one
//! seed, so a config reproduces its session bit for bit.

use super::types::{
    AnnotationEvent, EventKind, EventValue, FeatureStream, FrameFeatures, Seat, SessionAnnotations,
};
use crate::features::AudioFrame;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What, if anything, the user's bite times can be predicted from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelCoupling {
    /// Bites are an autonomous random process; features carry no signal.
    None,
    /// Bites follow joint co-diner speech onsets after a fixed lead.
    CoDiner,
    /// Bites are random but telegraphed by a gesture in the user's own
    /// gaze/head channel.
    UserPrivate,
    /// Co-diner triggering plus the user's private gesture.
    Both,
}

/// Configuration for [`generate_synthetic_session`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Seed that fully determines the session.
    pub seed: u64,
    /// Session id; defaults to a seed-derived name.
    pub session_id: Option<String>,
    pub duration_s: f64,
    pub fps: u32,
    pub coupling: LabelCoupling,
    /// Which seat the feeding-system user occupies.
    pub user_seat: Seat,
    /// Mean gap between a seat's bites, seconds.
    pub mean_bite_gap_s: f64,
    /// Hard minimum gap between bites (chewing/refractory), seconds.
    pub min_bite_gap_s: f64,
    /// Mean length of one speaking turn, seconds.
    pub mean_talk_s: f64,
    /// Mean silence between a seat's speaking turns, seconds.
    pub mean_silence_s: f64,
    /// How long before the bite its cue fires (joint-speech onset or
    /// gesture start), seconds.
    pub cue_lead_s: f64,
    pub drink_rate_per_min: f64,
    pub napkin_rate_per_min: f64,
    /// Per-frame probability that the pose or gaze detector misses.
    pub detector_miss_rate: f64,
    /// Standard deviation of per-frame pose jitter.
    pub pose_noise: f64,
    /// Emit a microphone-array track alongside the video-rate streams.
    pub emit_audio: bool,
    /// Audio track rate, frames per second.
    pub audio_hz: u32,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 7,
            session_id: None,
            duration_s: 300.0,
            fps: 15,
            coupling: LabelCoupling::CoDiner,
            user_seat: Seat::new(1).expect("static seat"),
            mean_bite_gap_s: 30.0,
            min_bite_gap_s: 8.0,
            mean_talk_s: 3.0,
            mean_silence_s: 12.0,
            cue_lead_s: 2.0,
            drink_rate_per_min: 0.15,
            napkin_rate_per_min: 0.08,
            detector_miss_rate: 0.02,
            pose_noise: 0.05,
            emit_audio: false,
            audio_hz: 50,
        }
    }
}

/// A fully fabricated session: annotations, per-seat feature streams, and
/// (optionally) the raw microphone-array track.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSession {
    pub annotations: SessionAnnotations,
    /// Streams for seats 1..=3 in order; the user's stream carries bite
    /// features, co-diner streams do not.
    pub streams: Vec<FeatureStream>,
    pub audio: Option<Vec<AudioFrame>>,
    pub user_seat: Seat,
}

/// Rejected [`SyntheticConfig`].
#[derive(Debug, Error)]
#[error("invalid synthetic config: {0}")]
pub struct InvalidConfig(pub String);

const MARK_MS: u64 = 400;
const TALK_MIN_S: f64 = 0.6;
const SILENCE_MIN_S: f64 = 0.5;
const GESTURE_AMP: f64 = 3.0;
const GESTURE_DUR_S: f64 = 1.0;

fn check(cfg: &SyntheticConfig) -> Result<(), InvalidConfig> {
    let mut problems = Vec::new();
    if !(cfg.duration_s > 10.0) {
        problems.push("duration_s must exceed 10".to_string());
    }
    if cfg.fps == 0 {
        problems.push("fps must be positive".to_string());
    }
    if cfg.audio_hz == 0 {
        problems.push("audio_hz must be positive".to_string());
    }
    if !(cfg.mean_bite_gap_s > cfg.min_bite_gap_s) {
        problems.push("mean_bite_gap_s must exceed min_bite_gap_s".to_string());
    }
    if !(cfg.min_bite_gap_s >= 2.0) {
        problems.push("min_bite_gap_s must be at least 2".to_string());
    }
    if !(cfg.mean_talk_s > 0.0) || !(cfg.mean_silence_s > 0.0) {
        problems.push("speech turn means must be positive".to_string());
    }
    if !(cfg.cue_lead_s >= 1.0) {
        problems.push("cue_lead_s must be at least 1".to_string());
    }
    if !(cfg.drink_rate_per_min >= 0.0) || !(cfg.napkin_rate_per_min >= 0.0) {
        problems.push("activity rates must be non-negative".to_string());
    }
    if !(0.0..1.0).contains(&cfg.detector_miss_rate) {
        problems.push("detector_miss_rate must be in [0, 1)".to_string());
    }
    if !(cfg.pose_noise >= 0.0) {
        problems.push("pose_noise must be non-negative".to_string());
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(InvalidConfig(problems.join("; ")))
    }
}

/// Cheap splittable seed derivation (splitmix64 finalizer).
fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

fn exp_s(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    Exp::new(1.0 / mean).expect("positive rate").sample(rng)
}

fn ms(t_s: f64) -> u64 {
    (t_s * 1000.0).round().max(0.0) as u64
}

/// Speaking turns for one seat as `[start, end)` second intervals.
fn sample_talk_intervals(rng: &mut ChaCha8Rng, cfg: &SyntheticConfig) -> Vec<(f64, f64)> {
    let mut intervals = Vec::new();
    let mut t = 0.0;
    loop {
        t += SILENCE_MIN_S + exp_s(rng, cfg.mean_silence_s);
        if t >= cfg.duration_s {
            break;
        }
        let talk = TALK_MIN_S + exp_s(rng, cfg.mean_talk_s);
        let end = (t + talk).min(cfg.duration_s);
        intervals.push((t, end));
        t = end;
    }
    intervals
}

/// Onsets (seconds) at which both given seats are speaking simultaneously.
fn joint_onsets(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<f64> {
    let mut onsets = Vec::new();
    for &(sa, ea) in a {
        for &(sb, eb) in b {
            let start = sa.max(sb);
            let end = ea.min(eb);
            if start < end {
                onsets.push(start);
            }
        }
    }
    onsets.sort_by(|x, y| x.partial_cmp(y).expect("finite onsets"));
    onsets
}

/// Bite-lift times from a refractory point process: gaps are
/// `min_gap + Exp(mean_gap - min_gap)`, keeping the requested mean.
pub(crate) fn sample_lift_times(
    rng: &mut ChaCha8Rng,
    duration_s: f64,
    mean_gap_s: f64,
    min_gap_s: f64,
) -> Vec<f64> {
    let mut lifts = Vec::new();
    let mut t = 0.0;
    loop {
        t += min_gap_s + exp_s(rng, mean_gap_s - min_gap_s);
        if t >= duration_s - 1.5 {
            break;
        }
        lifts.push(t);
    }
    lifts
}

/// Lift times slaved to cue onsets: each onset past the refractory gap
/// produces a lift `cue_lead_s` later.
fn triggered_lift_times(onsets: &[f64], cfg: &SyntheticConfig) -> Vec<f64> {
    let mut lifts: Vec<f64> = Vec::new();
    for &onset in onsets {
        let t = onset + cfg.cue_lead_s;
        if t >= cfg.duration_s - 1.5 {
            continue;
        }
        if lifts.last().is_none_or(|&prev| t - prev >= cfg.min_bite_gap_s) {
            lifts.push(t);
        }
    }
    lifts
}

/// Expands lift times into full annotation chains on one seat.
fn push_bite_chains(
    events: &mut Vec<AnnotationEvent>,
    rng: &mut ChaCha8Rng,
    lifts: &[f64],
    utensil: EventValue,
    duration_s: f64,
) {
    for (i, &t_l) in lifts.iter().enumerate() {
        let next = lifts.get(i + 1).copied().unwrap_or(f64::INFINITY);

        let entered_gap = 0.5 + exp_s(rng, 3.5);
        let entered_start = (t_l - entered_gap).min(t_l - 0.45);
        if entered_start >= 0.0 {
            let s = ms(entered_start);
            events.push(AnnotationEvent::new(EventKind::FoodEntered, utensil, s, s + MARK_MS));
        }

        let lift_ms = ms(t_l);
        events.push(AnnotationEvent::new(EventKind::FoodLifted, utensil, lift_ms, lift_ms + MARK_MS));

        let mut tm_start = t_l + 0.7 + exp_s(rng, 1.1);
        let tm_extent = 0.4 + exp_s(rng, 0.5);
        let mo_extent = 0.5 + exp_s(rng, 0.6);
        tm_start = tm_start.min(next - 1.0).max(t_l + 0.45);
        let tm_end = (tm_start + tm_extent).min(next - 0.3);
        if tm_end > duration_s || tm_end <= tm_start {
            continue; // recording ends mid-bite; legal boundary shape
        }
        events.push(AnnotationEvent::new(
            EventKind::FoodToMouth,
            utensil,
            ms(tm_start),
            ms(tm_end).max(ms(tm_start) + 1),
        ));

        let mo_start = (tm_start - 0.3).max(t_l + 0.45);
        let mo_end = (mo_start + mo_extent).min(duration_s);
        if mo_end - mo_start >= 0.2 {
            events.push(AnnotationEvent::new(
                EventKind::MouthOpen,
                EventValue::None,
                ms(mo_start),
                ms(mo_end).max(ms(mo_start) + 1),
            ));
        }
    }
}

/// Sparse secondary activity (drinks or napkin use) on one seat.
fn push_side_chains(
    events: &mut Vec<AnnotationEvent>,
    rng: &mut ChaCha8Rng,
    rate_per_min: f64,
    duration_s: f64,
    kinds: [EventKind; 3],
    value: EventValue,
    hold_s: f64,
) {
    if rate_per_min <= 0.0 {
        return;
    }
    let mean_gap = 60.0 / rate_per_min;
    let mut t = 0.0;
    loop {
        t += 20.0 + exp_s(rng, mean_gap);
        if t >= duration_s - 6.0 {
            break;
        }
        let s0 = ms(t);
        events.push(AnnotationEvent::new(kinds[0], value, s0, s0 + MARK_MS));
        let s1 = ms(t + 0.6);
        events.push(AnnotationEvent::new(kinds[1], value, s1, s1 + MARK_MS));
        let s2 = ms(t + 1.6);
        let e2 = ms(t + 1.6 + hold_s + exp_s(rng, 1.0));
        events.push(AnnotationEvent::new(kinds[2], value, s2, e2.max(s2 + 1)));
    }
}

fn pick_utensil(rng: &mut ChaCha8Rng) -> EventValue {
    let r: f64 = rng.random();
    if r < 0.5 {
        EventValue::Fork
    } else if r < 0.8 {
        EventValue::Spoon
    } else if r < 0.9 {
        EventValue::Chopsticks
    } else {
        EventValue::Hand
    }
}

/// Generates one fully deterministic synthetic session.
pub fn generate_synthetic_session(cfg: &SyntheticConfig) -> Result<SyntheticSession, InvalidConfig> {
    check(cfg)?;
    let session_id = cfg
        .session_id
        .clone()
        .unwrap_or_else(|| format!("syn_{:016x}", cfg.seed));

    // Conversation first: co-diner coupling derives bite times from it.
    let mut rng_talk = rng_for(cfg.seed, 1);
    let talk: Vec<Vec<(f64, f64)>> =
        (0..3).map(|_| sample_talk_intervals(&mut rng_talk, cfg)).collect();

    let [co_a, co_b] = cfg.user_seat.others();
    let onsets = joint_onsets(&talk[co_a.index()], &talk[co_b.index()]);

    let mut rng_bites = rng_for(cfg.seed, 2);
    let mut lift_times: Vec<Vec<f64>> = Vec::new();
    for seat in Seat::all() {
        let own_process = sample_lift_times(
            &mut rng_bites,
            cfg.duration_s,
            cfg.mean_bite_gap_s,
            cfg.min_bite_gap_s,
        );
        let lifts = if seat == cfg.user_seat {
            match cfg.coupling {
                LabelCoupling::CoDiner | LabelCoupling::Both => triggered_lift_times(&onsets, cfg),
                LabelCoupling::UserPrivate | LabelCoupling::None => own_process,
            }
        } else {
            own_process
        };
        lift_times.push(lifts);
    }

    let mut annotations = SessionAnnotations::new(session_id, ms(cfg.duration_s));
    let mut rng_chains = rng_for(cfg.seed, 3);
    for seat in Seat::all() {
        let utensil = pick_utensil(&mut rng_chains);
        let events = &mut annotations.events[seat.index()];
        push_bite_chains(events, &mut rng_chains, &lift_times[seat.index()], utensil, cfg.duration_s);
        let vessel = if rng_chains.random::<f64>() < 0.7 { EventValue::Cup } else { EventValue::Bottle };
        push_side_chains(
            events,
            &mut rng_chains,
            cfg.drink_rate_per_min,
            cfg.duration_s,
            [EventKind::DrinkEntered, EventKind::DrinkLifted, EventKind::DrinkToMouth],
            vessel,
            1.5,
        );
        push_side_chains(
            events,
            &mut rng_chains,
            cfg.napkin_rate_per_min,
            cfg.duration_s,
            [EventKind::NapkinEntered, EventKind::NapkinLifted, EventKind::NapkinToMouth],
            EventValue::None,
            0.8,
        );
    }
    annotations.sort_events();

    // Gesture cue windows in the user's gaze/head channel.
    let gesture_windows: Vec<(f64, f64)> = match cfg.coupling {
        LabelCoupling::UserPrivate | LabelCoupling::Both => lift_times[cfg.user_seat.index()]
            .iter()
            .map(|&t| (t - cfg.cue_lead_s, t - cfg.cue_lead_s + GESTURE_DUR_S))
            .collect(),
        _ => Vec::new(),
    };

    let mut rng_features = rng_for(cfg.seed, 4);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n_frames = (cfg.duration_s * cfg.fps as f64).floor() as u64;
    let user_lifts_ms: Vec<u64> = lift_times[cfg.user_seat.index()].iter().map(|&t| ms(t)).collect();

    let mut streams = Vec::new();
    for seat in Seat::all() {
        let base_pose: Vec<f64> =
            (0..crate::data::POSE_DIMS).map(|_| rng_features.random_range(-1.0..1.0)).collect();
        let base_gaze: [f64; crate::data::GAZE_HEAD_DIMS] =
            std::array::from_fn(|_| rng_features.random_range(-0.5..0.5));

        let mut stream = FeatureStream::new(seat, cfg.fps);
        let mut talk_cursor = 0usize;
        let seat_talk = &talk[seat.index()];
        for i in 0..n_frames {
            let t_ms_v = (i * 1000 + cfg.fps as u64 / 2) / cfg.fps as u64;
            let t_s = t_ms_v as f64 / 1000.0;

            while talk_cursor < seat_talk.len() && seat_talk[talk_cursor].1 <= t_s {
                talk_cursor += 1;
            }
            let speaking = u8::from(
                talk_cursor < seat_talk.len()
                    && seat_talk[talk_cursor].0 <= t_s
                    && t_s < seat_talk[talk_cursor].1,
            );

            let pose: Vec<f64> = base_pose
                .iter()
                .map(|&b| b + cfg.pose_noise * normal.sample(&mut rng_features))
                .collect();
            let mut gaze_head: [f64; crate::data::GAZE_HEAD_DIMS] =
                std::array::from_fn(|k| base_gaze[k] + 0.1 * normal.sample(&mut rng_features));
            if seat == cfg.user_seat
                && gesture_windows.iter().any(|&(s, e)| s <= t_s && t_s < e)
            {
                gaze_head[0] += GESTURE_AMP;
            }

            let pose_valid = rng_features.random::<f64>() >= cfg.detector_miss_rate;
            let gaze_head_valid = rng_features.random::<f64>() >= cfg.detector_miss_rate;

            let bite = (seat == cfg.user_seat)
                .then(|| crate::features::bite_features_at(&user_lifts_ms, t_ms_v));

            stream.frames.push(FrameFeatures {
                t_ms: t_ms_v,
                pose: if pose_valid { pose } else { vec![0.0; crate::data::POSE_DIMS] },
                gaze_head: if gaze_head_valid {
                    gaze_head
                } else {
                    [0.0; crate::data::GAZE_HEAD_DIMS]
                },
                speaking,
                pose_valid,
                gaze_head_valid,
                bite,
            });
        }
        streams.push(stream);
    }

    let audio = cfg.emit_audio.then(|| {
        let mut rng_audio = rng_for(cfg.seed, 5);
        let doa_noise = Normal::new(0.0, 4.0).expect("doa noise");
        let offset: u64 = rng_audio.random_range(0..16);
        let n_audio = (cfg.duration_s * cfg.audio_hz as f64).floor() as u64;
        let mut frames = Vec::with_capacity(n_audio as usize);
        for j in 0..n_audio {
            let t_ms_v = (j * 1000 + cfg.audio_hz as u64 / 2) / cfg.audio_hz as u64 + offset;
            let t_s = t_ms_v as f64 / 1000.0;

            // Dominant talker: the most recent onset among active turns.
            let mut dominant: Option<(f64, Seat)> = None;
            for seat in Seat::all() {
                for &(s, e) in &talk[seat.index()] {
                    if s <= t_s && t_s < e && dominant.is_none_or(|(onset, _)| s > onset) {
                        dominant = Some((s, seat));
                    }
                }
            }
            let mut voice_active = dominant.is_some();
            if rng_audio.random::<f64>() < 0.01 {
                voice_active = !voice_active;
            }
            let doa_deg = match (voice_active, dominant) {
                (true, Some((_, seat))) => {
                    let angle = annotations.seat_angles_deg[seat.index()]
                        + doa_noise.sample(&mut rng_audio);
                    angle.rem_euclid(360.0)
                }
                (true, None) => rng_audio.random_range(0.0..360.0),
                (false, _) => 0.0,
            };
            frames.push(AudioFrame { t_ms: t_ms_v, voice_active, doa_deg });
        }
        frames
    });

    Ok(SyntheticSession { annotations, streams, audio, user_seat: cfg.user_seat })
}

/// Generates `n` sessions with ids and seeds derived from `cfg.seed`.
pub fn synthetic_batch(cfg: &SyntheticConfig, n: usize) -> Result<Vec<SyntheticSession>, InvalidConfig> {
    (0..n)
        .map(|i| {
            let mut one = cfg.clone();
            one.seed = derive_seed(cfg.seed, 0x5E55_1000 + i as u64);
            one.session_id = Some(format!(
                "{}_{i:02}",
                cfg.session_id.as_deref().unwrap_or("syn")
            ));
            generate_synthetic_session(&one)
        })
        .collect()
}
