//! One flat run configuration shared by every command.
//!
//! Values resolve with precedence **flag > file > default**: a TOML file
//! (`--config`) overrides the built-in defaults, and individual CLI flags
//! override the file. The output directory additionally falls back to the
//! `SONNET_OUT` environment variable when neither flag nor file names one.
//! Every run echoes its fully resolved configuration next to its artifacts,
//! so a run directory is self-describing.
//!
//! The single `seed` fans out to every stochastic component (synthesis,
//! weight init, epoch shuffling, fold seeding) through per-purpose derived
//! streams, so one integer pins an entire run.

use crate::data::{LabelCoupling, Seat, SyntheticConfig};
use crate::features::WindowSpec;
use crate::model::ModelKind;
use crate::replay::{Strategy, StrategyConfig};
use crate::train::TrainConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config file does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Every tunable of a run, with a documented default for each field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Annotation CSV to read (commands that need one). Default: none.
    pub annotations: Option<PathBuf>,
    /// Feature-stream CSV to read (commands that need one). Default: none.
    pub features: Option<PathBuf>,
    /// Output directory. Default: none here; resolution falls back to
    /// `$SONNET_OUT`, then `./runs`.
    pub out: Option<PathBuf>,

    /// Window length in seconds. Default 6.
    pub k_seconds: f64,
    /// Video frame rate. Default 15.
    pub fps: u32,
    /// Tiling factor for the user's two bite-history features. Default 100.
    pub gamma: usize,
    /// Negatives closer than this to a positive anchor are dropped.
    /// Default 0 (midpoint negatives only).
    pub min_gap_to_positive_s: f64,
    /// Seat of the feeding-system user, 1–3. Default 1.
    pub user_seat: u8,

    /// Adam/SGD learning rate. Default 1e-4.
    pub learning_rate: f64,
    /// Minibatch size. Default 128.
    pub batch_size: usize,
    /// Epoch cap. Default 200.
    pub max_epochs: usize,
    /// Early-stopping patience in epochs without validation improvement.
    /// Default 10.
    pub patience: usize,

    /// Model to train/evaluate. Default `triplet_sonnet`.
    pub model: ModelKind,

    /// Replay strategy. Default `fixed_interval`.
    pub strategy: Strategy,
    /// Seconds between learned-strategy evaluations. Default 3.
    pub sample_period_s: f64,
    /// Wait after each trial for the fixed-interval strategy. Default 44.5
    /// (9.9 s human enter-to-lift × 5 robot slowdown − 5 s acquisition).
    pub fixed_wait_s: f64,
    /// Bite-transfer duration appended to every trial. Default 9.
    pub transfer_s: f64,
    /// Divisor for time-since-bite in learned replay. Default 5.
    pub time_rescale_factor: f64,
    /// Learned-strategy trigger threshold. Default 0.5.
    pub threshold: f64,
    /// Mouth-open strategy prompt. Default a short request to open up.
    pub prompt_text: String,

    /// Synthetic sessions to generate. Default 3.
    pub sessions: usize,
    /// Synthetic session length in seconds. Default 300.
    pub duration_s: f64,
    /// What the synthetic user's bites are predictable from.
    /// Default `co_diner`.
    pub coupling: LabelCoupling,

    /// Master seed for every stochastic component. Default 7.
    pub seed: u64,
    /// Worker threads for parallel sections; default: one per core.
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let strategy_defaults = StrategyConfig::default();
        let window_defaults = WindowSpec::default();
        let train_defaults = TrainConfig::default();
        RunConfig {
            annotations: None,
            features: None,
            out: None,
            k_seconds: window_defaults.k_seconds,
            fps: window_defaults.fps,
            gamma: window_defaults.gamma,
            min_gap_to_positive_s: window_defaults.min_gap_to_positive_s,
            user_seat: 1,
            learning_rate: train_defaults.learning_rate,
            batch_size: train_defaults.batch_size,
            max_epochs: train_defaults.max_epochs,
            patience: train_defaults.patience,
            model: ModelKind::TripletSonnet,
            strategy: strategy_defaults.strategy,
            sample_period_s: strategy_defaults.sample_period_s,
            fixed_wait_s: strategy_defaults.fixed_wait_s,
            transfer_s: strategy_defaults.transfer_s,
            time_rescale_factor: strategy_defaults.time_rescale_factor,
            threshold: strategy_defaults.threshold,
            prompt_text: strategy_defaults.prompt_text,
            sessions: 3,
            duration_s: 300.0,
            coupling: LabelCoupling::CoDiner,
            seed: 7,
            jobs: None,
        }
    }
}

/// CLI flags that override file/default values; `None` means "not given".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub model: Option<ModelKind>,
    pub gamma: Option<usize>,
    pub k_seconds: Option<f64>,
    pub fps: Option<u32>,
    pub strategy: Option<Strategy>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    /// Loads a config file, or the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<RunConfig, ConfigError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                Ok(toml::from_str(&text)?)
            }
        }
    }

    /// Applies CLI flags on top (flag > file > default).
    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = &o.$field {
                    self.$field = Some(v.clone());
                }
            };
            ($field:ident, copy) => {
                if let Some(v) = o.$field {
                    self.$field = v;
                }
            };
        }
        take!(out);
        take!(seed, copy);
        take!(model, copy);
        take!(gamma, copy);
        take!(k_seconds, copy);
        take!(fps, copy);
        take!(strategy, copy);
        if o.jobs.is_some() {
            self.jobs = o.jobs;
        }
    }

    /// The output directory: explicit value, else `$SONNET_OUT`, else
    /// `./runs`. Stores the resolution so the config echo shows it.
    pub fn resolve_out(&mut self) -> PathBuf {
        let out = self
            .out
            .clone()
            .or_else(|| std::env::var_os("SONNET_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"));
        self.out = Some(out.clone());
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        if Seat::new(self.user_seat).is_none() {
            problems.push(format!("user_seat must be 1, 2 or 3, got {}", self.user_seat));
        }
        if !(self.k_seconds > 0.0) {
            problems.push("k_seconds must be positive".into());
        }
        if self.fps == 0 {
            problems.push("fps must be positive".into());
        }
        if self.gamma == 0 {
            problems.push("gamma must be positive".into());
        }
        if self.sessions == 0 {
            problems.push("sessions must be positive".into());
        }
        if !(self.duration_s > 0.0) {
            problems.push("duration_s must be positive".into());
        }
        if !(self.learning_rate > 0.0) {
            problems.push("learning_rate must be positive".into());
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be positive".into());
        }
        if self.max_epochs == 0 {
            problems.push("max_epochs must be positive".into());
        }
        if problems.is_empty() {
            self.strategy_config()
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))
        } else {
            Err(ConfigError::Invalid(problems.join("; ")))
        }
    }

    pub fn user_seat(&self) -> Seat {
        Seat::new(self.user_seat).expect("validated")
    }

    pub fn window_spec(&self) -> WindowSpec {
        WindowSpec {
            k_seconds: self.k_seconds,
            fps: self.fps,
            gamma: self.gamma,
            min_gap_to_positive_s: self.min_gap_to_positive_s,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            shuffle_seed: self.seed,
        }
    }

    pub fn strategy_config(&self) -> StrategyConfig {
        StrategyConfig {
            strategy: self.strategy,
            sample_period_s: self.sample_period_s,
            window_k_s: self.k_seconds,
            fps: self.fps,
            fixed_wait_s: self.fixed_wait_s,
            time_rescale_factor: self.time_rescale_factor,
            prompt_text: self.prompt_text.clone(),
            threshold: self.threshold,
            transfer_s: self.transfer_s,
        }
    }

    /// Synthesis settings for the `index`-th session of a batch, each with
    /// its own derived seed and a stable zero-padded name.
    pub fn synthetic_config(&self, index: usize) -> SyntheticConfig {
        SyntheticConfig {
            seed: crate::train::derive_seed(self.seed, index as u64),
            session_id: Some(format!("synth_{index:02}")),
            duration_s: self.duration_s,
            fps: self.fps,
            coupling: self.coupling,
            user_seat: self.user_seat(),
            emit_audio: true,
            ..SyntheticConfig::default()
        }
    }

    /// The resolved configuration as TOML, for the per-run echo file.
    pub fn echo_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
