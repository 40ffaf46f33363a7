//! Offline replay of bite-timing strategies over a recorded session.
//!
//! Three strategies share one deterministic event loop:
//!
//! * **learned** — every `sample_period_s`, score the trailing
//!   `window_k_s` of features with a trained model and trigger a feed when
//!   the score reaches the threshold. The user's bite-history features come
//!   from the *simulated* feed clock (the robot knows when it fed), with
//!   the time-since-bite rescaled by `time_rescale_factor` to bridge the
//!   gap between self-feeding training data and slower robot feeding.
//! * **fixed_interval** — trigger `fixed_wait_s` after the previous trial
//!   completed. The default wait derives from observed human timing:
//!   9.9 s enter-to-lift, slowed 5× for the robot, minus the 5 s the robot
//!   already spends acquiring food — 44.5 s.
//! * **mouth_open** — prompt the user at each trial start and trigger at
//!   the first annotated mouth-open at or after the prompt.
//!
//! Every strategy then holds for a transfer period before the next trial;
//! model sampling is suppressed while a transfer is in flight. Identical
//! inputs produce byte-identical decision logs.

use crate::data::{BiteFeatures, EventKind, FeatureStream, Seat, SessionAnnotations};
use crate::features::{build_window_channels, ChannelLayout, WindowSpec};
use crate::model::{BiteModel, ModelError, WindowBatch};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use thiserror::Error;

/// Log schema version stamped on every record.
const LOG_SCHEMA_VERSION: u32 = 1;

/// Which bite-timing policy to replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Learned,
    FixedInterval,
    MouthOpen,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Learned => "learned",
            Strategy::FixedInterval => "fixed_interval",
            Strategy::MouthOpen => "mouth_open",
        }
    }

    pub fn all() -> [Strategy; 3] {
        [Strategy::Learned, Strategy::FixedInterval, Strategy::MouthOpen]
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = ReplayError;

    fn from_str(s: &str) -> Result<Self, ReplayError> {
        Strategy::all()
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ReplayError::InvalidConfig(format!("unknown strategy `{s}`")))
    }
}

/// Human/robot timing constants behind the fixed-interval schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotTimingParams {
    /// Observed human food-entered → food-lifted time, seconds.
    pub human_enter_to_lift_s: f64,
    /// How much slower the robot moves than a person feeding themselves.
    pub robot_speed_factor: f64,
    /// Robot time already spent acquiring food before the wait starts.
    pub acquisition_to_wait_s: f64,
}

impl Default for RobotTimingParams {
    fn default() -> Self {
        RobotTimingParams {
            human_enter_to_lift_s: 9.9,
            robot_speed_factor: 5.0,
            acquisition_to_wait_s: 5.0,
        }
    }
}

/// Wait between trials for the fixed-interval strategy:
/// `human_enter_to_lift_s * robot_speed_factor - acquisition_to_wait_s`.
pub fn fixed_interval_wait(p: &RobotTimingParams) -> Result<f64, ReplayError> {
    if !(p.human_enter_to_lift_s > 0.0 && p.robot_speed_factor > 0.0)
        || !p.acquisition_to_wait_s.is_finite()
        || p.acquisition_to_wait_s < 0.0
    {
        return Err(ReplayError::InvalidConfig("timing params must be positive".into()));
    }
    let wait = p.human_enter_to_lift_s * p.robot_speed_factor - p.acquisition_to_wait_s;
    if wait <= 0.0 {
        return Err(ReplayError::NonPositiveResult { value: wait });
    }
    Ok(wait)
}

/// Rescales the time-since-bite component; the bite count is untouched.
/// Applied inside the learned strategy only: the model was trained on
/// people feeding themselves at their own pace, and the robot feeds slower
/// by roughly this factor.
pub fn rescale_time_since_bite(b: BiteFeatures, factor: f64) -> BiteFeatures {
    assert!(factor > 0.0, "rescale factor must be positive");
    BiteFeatures { time_since_s: b.time_since_s / factor, count: b.count }
}

/// Replay configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    /// Seconds between model evaluations (learned strategy).
    pub sample_period_s: f64,
    /// Trailing feature window the model sees, seconds.
    pub window_k_s: f64,
    /// Frame rate the replayed streams must run at.
    pub fps: u32,
    /// Wait after trial completion (fixed-interval strategy).
    pub fixed_wait_s: f64,
    /// Divisor applied to time-since-bite in learned replay.
    pub time_rescale_factor: f64,
    /// What the mouth-open strategy says at each trial start.
    pub prompt_text: String,
    /// Feed when the learned score reaches this.
    pub threshold: f64,
    /// Bite transfer duration appended to every trial, seconds.
    pub transfer_s: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            strategy: Strategy::FixedInterval,
            sample_period_s: 3.0,
            window_k_s: 6.0,
            fps: 15,
            fixed_wait_s: fixed_interval_wait(&RobotTimingParams::default())
                .expect("default timing params are valid"),
            time_rescale_factor: 5.0,
            prompt_text: "Time for a bite — please open your mouth.".into(),
            threshold: 0.5,
            transfer_s: 9.0,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), ReplayError> {
        let mut problems = Vec::new();
        if !(self.sample_period_s > 0.0) {
            problems.push("sample period must be positive");
        }
        if !(self.window_k_s > 0.0) {
            problems.push("window length must be positive");
        }
        if self.sample_period_s > self.window_k_s {
            problems.push("sample period must not exceed the window length");
        }
        if self.fps == 0 {
            problems.push("fps must be positive");
        }
        if !(self.fixed_wait_s > 0.0) {
            problems.push("fixed wait must be positive");
        }
        if !(self.time_rescale_factor > 0.0) {
            problems.push("time rescale factor must be positive");
        }
        if !self.threshold.is_finite() {
            problems.push("threshold must be finite");
        }
        if !(self.transfer_s >= 0.0) {
            problems.push("transfer duration must be non-negative");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ReplayError::InvalidConfig(problems.join("; ")))
        }
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("the learned strategy needs a trained model")]
    MissingModel,
    #[error("the mouth-open strategy needs mouth_open annotations for the user seat")]
    MissingMouthEvents,
    #[error("fixed-interval wait came out non-positive ({value})")]
    NonPositiveResult { value: f64 },
    #[error("invalid replay config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("window assembly failed: {0}")]
    Window(#[from] crate::features::WindowError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One record in the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    /// Simulated time, milliseconds from session start.
    pub t_ms: u64,
    #[serde(flatten)]
    pub kind: LogEventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEventKind {
    /// A learned-model evaluation.
    Sample { score: f64 },
    /// The mouth-open strategy spoke to the user.
    Prompt { text: String },
    /// The strategy decided to feed.
    FeedTrigger {
        cause: Strategy,
        #[serde(skip_serializing_if = "Option::is_none")]
        score: Option<f64>,
    },
    /// Bite transfer finished; the user's bite clock resets here.
    FeedComplete,
}

/// Time-ordered decisions from one replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLog {
    pub session_id: String,
    pub strategy: Strategy,
    /// Session horizon actually replayed, milliseconds.
    pub duration_ms: u64,
    pub events: Vec<LogEvent>,
}

/// Row-level summary of one replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub session_id: String,
    pub strategy: Strategy,
    pub feeds: usize,
    pub samples: usize,
    pub prompts: usize,
    /// Mean trigger-to-trigger gap, seconds.
    pub mean_inter_feed_s: Option<f64>,
    pub duration_s: f64,
}

impl DecisionLog {
    /// Feed trigger timestamps, milliseconds.
    pub fn feed_triggers_ms(&self) -> Vec<u64> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, LogEventKind::FeedTrigger { .. }))
            .map(|e| e.t_ms)
            .collect()
    }

    pub fn summary(&self) -> ReplaySummary {
        let triggers = self.feed_triggers_ms();
        let mean = (triggers.len() >= 2).then(|| {
            let gaps: f64 = triggers.windows(2).map(|w| (w[1] - w[0]) as f64 / 1000.0).sum();
            gaps / (triggers.len() - 1) as f64
        });
        ReplaySummary {
            session_id: self.session_id.clone(),
            strategy: self.strategy,
            feeds: triggers.len(),
            samples: self
                .events
                .iter()
                .filter(|e| matches!(e.kind, LogEventKind::Sample { .. }))
                .count(),
            prompts: self
                .events
                .iter()
                .filter(|e| matches!(e.kind, LogEventKind::Prompt { .. }))
                .count(),
            mean_inter_feed_s: mean,
            duration_s: self.duration_ms as f64 / 1000.0,
        }
    }

    /// One JSON object per line; every record carries the schema version.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), ReplayError> {
        #[derive(Serialize)]
        struct Header<'a> {
            v: u32,
            kind: &'a str,
            session_id: &'a str,
            strategy: Strategy,
            duration_ms: u64,
        }
        #[derive(Serialize)]
        struct Row<'a> {
            v: u32,
            t_ms: u64,
            #[serde(flatten)]
            kind: &'a LogEventKind,
        }
        let header = Header {
            v: LOG_SCHEMA_VERSION,
            kind: "replay_header",
            session_id: &self.session_id,
            strategy: self.strategy,
            duration_ms: self.duration_ms,
        };
        serde_json::to_writer(&mut w, &header).map_err(io_from_json)?;
        writeln!(w)?;
        for e in &self.events {
            let row = Row { v: LOG_SCHEMA_VERSION, t_ms: e.t_ms, kind: &e.kind };
            serde_json::to_writer(&mut w, &row).map_err(io_from_json)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

fn io_from_json(e: serde_json::Error) -> ReplayError {
    ReplayError::Io(std::io::Error::other(e))
}

/// CSV with one row per replay summary.
pub fn write_summary_csv<W: Write>(
    summaries: &[ReplaySummary],
    mut w: W,
) -> Result<(), ReplayError> {
    writeln!(
        w,
        "session_id,strategy,feeds,samples,prompts,mean_inter_feed_s,duration_s"
    )?;
    for s in summaries {
        writeln!(
            w,
            "{},{},{},{},{},{},{:.3}",
            s.session_id,
            s.strategy,
            s.feeds,
            s.samples,
            s.prompts,
            s.mean_inter_feed_s.map_or(String::new(), |v| format!("{v:.3}")),
            s.duration_s
        )?;
    }
    Ok(())
}

fn ms(t_s: f64) -> u64 {
    (t_s * 1000.0).round() as u64
}

/// Replays one strategy over a session.
///
/// `streams` must cover all three seats at `cfg.fps`. The learned strategy
/// requires `model`; its window geometry (frames and bite tiling) must
/// match the model's spec.
pub fn run_strategy(
    annotations: &SessionAnnotations,
    streams: &[FeatureStream],
    user_seat: Seat,
    model: Option<&dyn BiteModel>,
    cfg: &StrategyConfig,
) -> Result<DecisionLog, ReplayError> {
    cfg.validate()?;
    let duration_ms = annotations.duration_ms;
    let mut log = DecisionLog {
        session_id: annotations.session_id.clone(),
        strategy: cfg.strategy,
        duration_ms,
        events: Vec::new(),
    };

    match cfg.strategy {
        Strategy::FixedInterval => replay_fixed(&mut log, cfg),
        Strategy::MouthOpen => replay_mouth_open(&mut log, annotations, user_seat, cfg)?,
        Strategy::Learned => {
            let model = model.ok_or(ReplayError::MissingModel)?;
            replay_learned(&mut log, streams, user_seat, model, cfg)?;
        }
    }
    debug_assert!(
        log.events.windows(2).all(|w| w[0].t_ms <= w[1].t_ms),
        "log must be time-ordered"
    );
    Ok(log)
}

fn replay_fixed(log: &mut DecisionLog, cfg: &StrategyConfig) {
    let horizon = log.duration_ms as f64 / 1000.0;
    let mut completion = 0.0f64;
    loop {
        let trigger = completion + cfg.fixed_wait_s;
        if trigger > horizon {
            break;
        }
        log.events.push(LogEvent {
            t_ms: ms(trigger),
            kind: LogEventKind::FeedTrigger { cause: Strategy::FixedInterval, score: None },
        });
        completion = trigger + cfg.transfer_s;
        if completion > horizon {
            break;
        }
        log.events.push(LogEvent { t_ms: ms(completion), kind: LogEventKind::FeedComplete });
    }
}

fn replay_mouth_open(
    log: &mut DecisionLog,
    annotations: &SessionAnnotations,
    user_seat: Seat,
    cfg: &StrategyConfig,
) -> Result<(), ReplayError> {
    let mouth_events: Vec<u64> = annotations
        .events_of_kind(user_seat, EventKind::MouthOpen)
        .iter()
        .map(|e| e.start_ms)
        .collect();
    if mouth_events.is_empty() {
        return Err(ReplayError::MissingMouthEvents);
    }
    let horizon = log.duration_ms;
    let mut prompt_at = 0u64;
    let mut next_idx = 0usize;
    loop {
        if prompt_at > horizon {
            break;
        }
        log.events.push(LogEvent {
            t_ms: prompt_at,
            kind: LogEventKind::Prompt { text: cfg.prompt_text.clone() },
        });
        // First unconsumed mouth-open at or after the prompt; each
        // annotated opening triggers at most one feed.
        while next_idx < mouth_events.len() && mouth_events[next_idx] < prompt_at {
            next_idx += 1;
        }
        let Some(&trigger) = mouth_events.get(next_idx).filter(|&&t| t <= horizon) else {
            break;
        };
        next_idx += 1;
        log.events.push(LogEvent {
            t_ms: trigger,
            kind: LogEventKind::FeedTrigger { cause: Strategy::MouthOpen, score: None },
        });
        let completion = trigger + ms(cfg.transfer_s);
        if completion > horizon {
            break;
        }
        log.events.push(LogEvent { t_ms: completion, kind: LogEventKind::FeedComplete });
        prompt_at = completion;
    }
    Ok(())
}

/// Divides the time rows of the user's tiled bite block in place.
/// Rows alternate time/count within the bite range, so the even offsets
/// are the time-since-bite copies.
fn rescale_user_bite_rows(user: &mut ndarray::Array2<f64>, gamma: usize, factor: f64) {
    let Some(bite) = ChannelLayout::user(gamma).bite else { return };
    for (offset, row) in bite.enumerate() {
        if offset % 2 == 0 {
            user.row_mut(row).mapv_inplace(|v| v / factor);
        }
    }
}

fn replay_learned(
    log: &mut DecisionLog,
    streams: &[FeatureStream],
    user_seat: Seat,
    model: &dyn BiteModel,
    cfg: &StrategyConfig,
) -> Result<(), ReplayError> {
    let spec = model.spec();
    let gamma = spec.bite_rows / 2;
    let window_spec = WindowSpec {
        k_seconds: cfg.window_k_s,
        fps: cfg.fps,
        gamma,
        min_gap_to_positive_s: 0.0,
    };
    if window_spec.frames_per_window() != spec.frames {
        return Err(ReplayError::InvalidConfig(format!(
            "model expects {} frames per window but {:.1} s at {} fps gives {}",
            spec.frames,
            cfg.window_k_s,
            cfg.fps,
            window_spec.frames_per_window()
        )));
    }
    for s in streams {
        if s.fps != cfg.fps {
            return Err(ReplayError::InvalidConfig(format!(
                "stream for seat {} runs at {} fps, config says {}",
                s.seat.number(),
                s.fps,
                cfg.fps
            )));
        }
    }

    let horizon = log.duration_ms as f64 / 1000.0;
    let mut completions_ms: Vec<u64> = Vec::new();
    let mut busy_until = f64::NEG_INFINITY;
    let mut n = 1u64;
    loop {
        let t = n as f64 * cfg.sample_period_s;
        n += 1;
        if t > horizon {
            break;
        }
        // No evaluation before the buffer holds a full window, and none
        // while a transfer is in flight.
        if t < cfg.window_k_s || t < busy_until {
            continue;
        }
        let anchor_ms = ms(t);
        let Some([mut user, codiner_a, codiner_b]) =
            build_window_channels(streams, user_seat, anchor_ms, &window_spec, &completions_ms)?
        else {
            continue;
        };
        rescale_user_bite_rows(&mut user, gamma, cfg.time_rescale_factor);

        let batch = WindowBatch {
            user: user.insert_axis(ndarray::Axis(0)),
            codiner_a: codiner_a.insert_axis(ndarray::Axis(0)),
            codiner_b: codiner_b.insert_axis(ndarray::Axis(0)),
            bite_rows: spec.bite_rows,
        };
        let score = model.predict(&batch)?[0];
        log.events.push(LogEvent { t_ms: anchor_ms, kind: LogEventKind::Sample { score } });
        if score >= cfg.threshold {
            log.events.push(LogEvent {
                t_ms: anchor_ms,
                kind: LogEventKind::FeedTrigger {
                    cause: Strategy::Learned,
                    score: Some(score),
                },
            });
            let completion = t + cfg.transfer_s;
            busy_until = completion;
            if completion <= horizon {
                log.events
                    .push(LogEvent { t_ms: ms(completion), kind: LogEventKind::FeedComplete });
                completions_ms.push(ms(completion));
            }
        }
    }
    Ok(())
}
