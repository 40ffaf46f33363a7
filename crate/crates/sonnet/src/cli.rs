//! Command-line front end: one subcommand per pipeline stage.
//!
//! `ingest → synth → features → windows → train → loso/ablate → simulate`
//! mirrors the data path; `metrics`, `stats`, and `report` are standalone
//! readers. Every command reads a [`RunConfig`] (defaults, optionally a
//! `--config` TOML file, then flag overrides), resolves one output
//! directory, and writes an echo of the fully resolved configuration next
//! to its artifacts, so runs are reproducible from the run directory alone.
//!
//! Commands are deterministic: identical inputs, configuration, and seed
//! produce byte-identical output trees, regardless of `--jobs`.

use crate::config::{ConfigError, Overrides, RunConfig};
use crate::data::{
    parse_annotations, parse_feature_streams, parse_sessions, validate_session,
    write_annotations, write_feature_streams, FeatureStream, ParseError, SessionAnnotations,
    SyntheticSession,
};
use crate::features::{
    compute_speaking_status, extract_windows, parse_audio_track, read_window_archive,
    write_audio_track, write_window_archive, AudioFrame, LabeledWindow, SpeakingConfig,
    WindowError, WindowSet,
};
use crate::model::{
    build_model, load_checkpoint, save_checkpoint, CheckpointMeta, ModelError, ModelKind,
    ModelSpec,
};
use crate::replay::{run_strategy, write_summary_csv, ReplayError, Strategy};
use crate::stats::{annotation_stats, emit_report, ReportFormat, StatsError, StatsReport};
use crate::train::{
    derive_seed, evaluate, run_ablation, run_loso, train_model, write_ablation_csv, FeatureMask,
    TrainError,
};
use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Social bite-timing toolkit: synthesize or ingest commensal-dining
/// sessions, build features and windows, train and cross-validate models,
/// replay feeding strategies, and report corpus statistics.
#[derive(Debug, Parser)]
#[command(name = "sonnet", version, max_term_width = 100)]
pub struct Cli {
    #[command(flatten)]
    pub globals: GlobalFlags,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags accepted by every subcommand; each overrides the config file.
#[derive(Debug, Args)]
pub struct GlobalFlags {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed for all randomness.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory (falls back to $SONNET_OUT, then ./runs).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Model kind: triplet_sonnet, couplet_sonnet, triplet_tcn,
    /// couplet_tcn, linear, always_feed.
    #[arg(long, global = true, value_name = "NAME")]
    pub model: Option<ModelKind>,
    /// Bite-feature tiling factor.
    #[arg(long, global = true, value_name = "N")]
    pub gamma: Option<usize>,
    /// Window length in seconds.
    #[arg(long = "k-seconds", global = true, value_name = "F")]
    pub k_seconds: Option<f64>,
    /// Video frame rate.
    #[arg(long, global = true, value_name = "N")]
    pub fps: Option<u32>,
    /// Replay strategy: learned, fixed_interval, mouth_open.
    #[arg(long, global = true, value_name = "NAME")]
    pub strategy: Option<Strategy>,
    /// Worker threads for parallel sections (results are identical at any
    /// value).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate annotation CSV files; write a violation report
    /// and a canonicalized copy of the sessions.
    Ingest {
        /// Annotation CSV files (each may hold several sessions).
        #[arg(required = true, value_name = "FILE")]
        paths: Vec<PathBuf>,
    },
    /// Generate synthetic dining sessions (annotations, feature streams,
    /// audio track) under out/synth/<session_id>/.
    Synth {
        /// How many sessions (default from config: 3).
        #[arg(long, value_name = "N")]
        sessions: Option<usize>,
        /// Session length in seconds (default from config: 300).
        #[arg(long, value_name = "F")]
        duration_s: Option<f64>,
        /// Bite predictability: none, co_diner, user_private, both.
        #[arg(long, value_name = "NAME")]
        coupling: Option<String>,
    },
    /// Recompute per-frame speaking status from a session's audio track
    /// (microphone-array clustering) and write updated feature streams.
    Features {
        /// Session directories holding annotations.csv, features.csv and
        /// (optionally) audio.csv.
        #[arg(required = true, value_name = "DIR")]
        inputs: Vec<PathBuf>,
    },
    /// Extract labeled windows from session directories into archives.
    Windows {
        /// Session directories holding annotations.csv and features.csv.
        #[arg(required = true, value_name = "DIR")]
        inputs: Vec<PathBuf>,
    },
    /// Train one model on window archives; save a checkpoint and the
    /// training history.
    Train {
        /// Window archives (.win) to train on.
        #[arg(required = true, value_name = "FILE")]
        windows: Vec<PathBuf>,
    },
    /// Leave-one-session-out cross-validation over window archives (one
    /// archive per session).
    Loso {
        /// One window archive per session.
        #[arg(required = true, num_args = 2.., value_name = "FILE")]
        windows: Vec<PathBuf>,
    },
    /// Feature-knockout study: cross-validate the model with each feature
    /// family removed in turn.
    Ablate {
        /// One window archive per session.
        #[arg(required = true, num_args = 2.., value_name = "FILE")]
        windows: Vec<PathBuf>,
    },
    /// Score a predictions CSV (columns score,label) against the decision
    /// threshold.
    Metrics {
        /// CSV with header `score,label`.
        #[arg(value_name = "FILE")]
        predictions: PathBuf,
    },
    /// Replay a feeding strategy over a session and write the decision log.
    Simulate {
        /// Session directory (annotations.csv + features.csv); a synthetic
        /// session is generated when omitted.
        #[arg(long, value_name = "DIR")]
        input: Option<PathBuf>,
        /// Trained model checkpoint (required for --strategy learned).
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
    },
    /// Compute corpus statistics (counts, durations, gaps, eating rates)
    /// and write them as JSON.
    Stats {
        /// Annotation CSV files; default: the config's `annotations` path.
        #[arg(value_name = "FILE")]
        annotations: Vec<PathBuf>,
    },
    /// Emit report tables (CSV) and rate-curve plots (SVG) from statistics.
    Report {
        /// stats.json produced by the stats command.
        #[arg(long, value_name = "FILE", conflicts_with = "annotations")]
        from_stats: Option<PathBuf>,
        /// Annotation CSV files to compute statistics from directly.
        #[arg(value_name = "FILE")]
        annotations: Vec<PathBuf>,
        /// csv, svg, or all.
        #[arg(long, default_value = "all", value_name = "NAME")]
        format: String,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: ParseError },
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Parse(_) | CliError::Input { .. } => "parse",
            CliError::Window(_) => "window",
            CliError::Model(_) => "model",
            CliError::Train(_) => "train",
            CliError::Replay(_) => "replay",
            CliError::Stats(_) => "stats",
            CliError::Io(_) => "io",
            CliError::Invalid(_) => "invalid",
        }
    }

    /// One-line JSON error record for scripting (written to stderr by the
    /// binary before it exits nonzero).
    pub fn record(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
            .to_string()
    }
}

/// Parses flags, resolves the configuration, and dispatches. The binary is
/// a thin wrapper around this.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.globals.config.as_deref())?;
    cfg.apply(&Overrides {
        seed: cli.globals.seed,
        out: cli.globals.out.clone(),
        model: cli.globals.model,
        gamma: cli.globals.gamma,
        k_seconds: cli.globals.k_seconds,
        fps: cli.globals.fps,
        strategy: cli.globals.strategy,
        jobs: cli.globals.jobs,
    });
    cfg.validate()?;
    let out_root = cfg.resolve_out();
    if let Some(jobs) = cfg.jobs {
        // Only the first pool wins in-process; results don't depend on it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }

    match &cli.command {
        Command::Ingest { paths } => cmd_ingest(&cfg, &out_root, paths),
        Command::Synth { sessions, duration_s, coupling } => {
            let mut cfg = cfg;
            if let Some(n) = sessions {
                cfg.sessions = *n;
            }
            if let Some(d) = duration_s {
                cfg.duration_s = *d;
            }
            if let Some(c) = coupling {
                cfg.coupling = parse_coupling(c)?;
            }
            cfg.validate()?;
            cmd_synth(&cfg, &out_root)
        }
        Command::Features { inputs } => cmd_features(&cfg, &out_root, inputs),
        Command::Windows { inputs } => cmd_windows(&cfg, &out_root, inputs),
        Command::Train { windows } => cmd_train(&cfg, &out_root, windows),
        Command::Loso { windows } => cmd_loso(&cfg, &out_root, windows),
        Command::Ablate { windows } => cmd_ablate(&cfg, &out_root, windows),
        Command::Metrics { predictions } => cmd_metrics(&cfg, &out_root, predictions),
        Command::Simulate { input, checkpoint } => {
            cmd_simulate(&cfg, &out_root, input.as_deref(), checkpoint.as_deref())
        }
        Command::Stats { annotations } => cmd_stats(&cfg, &out_root, annotations),
        Command::Report { from_stats, annotations, format } => {
            cmd_report(&cfg, &out_root, from_stats.as_deref(), annotations, format)
        }
    }
}

fn parse_coupling(s: &str) -> Result<crate::data::LabelCoupling, CliError> {
    use crate::data::LabelCoupling::*;
    match s {
        "none" => Ok(None),
        "co_diner" => Ok(CoDiner),
        "user_private" => Ok(UserPrivate),
        "both" => Ok(Both),
        other => Err(CliError::Invalid(format!(
            "unknown coupling `{other}` (expected none, co_diner, user_private, both)"
        ))),
    }
}

/// Attaches the offending file's path to a read failure.
fn in_file<T>(path: &Path, result: Result<T, ParseError>) -> Result<T, CliError> {
    result.map_err(|source| CliError::Input { path: path.to_path_buf(), source })
}

/// Creates `root/name`, writes the resolved-config echo into it, and
/// returns it.
fn prepare_out(root: &Path, name: &str, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = root.join(name);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config_echo.toml"), cfg.echo_toml())?;
    Ok(dir)
}

fn cmd_ingest(cfg: &RunConfig, out_root: &Path, paths: &[PathBuf]) -> Result<(), CliError> {
    let dir = prepare_out(out_root, "ingest", cfg)?;
    let mut sessions: Vec<SessionAnnotations> = Vec::new();
    for path in paths {
        sessions.extend(in_file(path, parse_sessions(path))?);
    }
    sessions.sort_by(|a, b| a.session_id.cmp(&b.session_id));

    let mut summary = String::from("session_id,events,violations\n");
    let mut detail = String::from("session_id,rule,detail\n");
    let mut total_violations = 0usize;
    for session in &sessions {
        let report = validate_session(session);
        total_violations += report.violations.len();
        let _ = writeln!(
            summary,
            "{},{},{}",
            session.session_id,
            session.total_events(),
            report.violations.len()
        );
        for v in &report.violations {
            let text = v.to_string().replace(',', ";");
            let _ = writeln!(detail, "{},{},{}", session.session_id, v.rule, text);
        }
        println!(
            "{}: {} events, {} violation(s)",
            session.session_id,
            session.total_events(),
            report.violations.len()
        );
    }
    std::fs::write(dir.join("validation.csv"), summary)?;
    std::fs::write(dir.join("violations.csv"), detail)?;
    write_annotations(&dir.join("sessions.csv"), &sessions)?;
    println!(
        "ingested {} session(s), {} violation(s) → {}",
        sessions.len(),
        total_violations,
        dir.display()
    );
    Ok(())
}

fn write_session_dir(dir: &Path, session: &SyntheticSession) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    write_annotations(&dir.join("annotations.csv"), &[session.annotations.clone()])?;
    write_feature_streams(&dir.join("features.csv"), &session.streams)?;
    if let Some(audio) = &session.audio {
        write_audio_track(&dir.join("audio.csv"), audio)?;
    }
    Ok(())
}

fn cmd_synth(cfg: &RunConfig, out_root: &Path) -> Result<(), CliError> {
    let dir = prepare_out(out_root, "synth", cfg)?;
    let mut manifest = String::from("session_id,seed,duration_s,events,frames\n");
    for i in 0..cfg.sessions {
        let synth_cfg = cfg.synthetic_config(i);
        let session = crate::data::generate_synthetic_session(&synth_cfg)
            .map_err(|e| CliError::Invalid(e.to_string()))?;
        let id = session.annotations.session_id.clone();
        write_session_dir(&dir.join(&id), &session)?;
        let frames = session.streams.first().map_or(0, |s| s.frames.len());
        let _ = writeln!(
            manifest,
            "{id},{},{},{},{frames}",
            synth_cfg.seed,
            cfg.duration_s,
            session.annotations.total_events()
        );
        println!(
            "{id}: {} events, {frames} frames/seat → {}",
            session.annotations.total_events(),
            dir.join(&id).display()
        );
    }
    std::fs::write(dir.join("manifest.csv"), manifest)?;
    Ok(())
}

/// Reads `annotations.csv` + `features.csv` (+ optional `audio.csv`) from a
/// session directory.
fn load_session_dir(
    dir: &Path,
) -> Result<(SessionAnnotations, Vec<FeatureStream>, Option<Vec<AudioFrame>>), CliError> {
    let ann_path = dir.join("annotations.csv");
    let annotations = in_file(&ann_path, parse_annotations(&ann_path))?;
    let feat_path = dir.join("features.csv");
    let streams = in_file(&feat_path, parse_feature_streams(&feat_path))?;
    let audio_path = dir.join("audio.csv");
    let audio = audio_path
        .exists()
        .then(|| in_file(&audio_path, parse_audio_track(&audio_path)))
        .transpose()?;
    Ok((annotations, streams, audio))
}

fn cmd_features(cfg: &RunConfig, out_root: &Path, inputs: &[PathBuf]) -> Result<(), CliError> {
    let dir = prepare_out(out_root, "features", cfg)?;
    for input in inputs {
        let (annotations, mut streams, audio) = load_session_dir(input)?;
        let id = annotations.session_id.clone();
        match audio {
            Some(audio) if !audio.is_empty() => {
                let video_t: Vec<u64> = streams
                    .first()
                    .map(|s| s.frames.iter().map(|f| f.t_ms).collect())
                    .unwrap_or_default();
                let speaking_cfg = SpeakingConfig {
                    seed: derive_seed(cfg.seed, 0xD0A),
                    ..SpeakingConfig::default()
                };
                let status = compute_speaking_status(
                    &audio,
                    &video_t,
                    annotations.seat_angles_deg,
                    &speaking_cfg,
                );
                let before: Vec<Vec<u8>> =
                    streams.iter().map(|s| s.frames.iter().map(|f| f.speaking).collect()).collect();
                crate::features::apply_speaking_status(&mut streams, &status);
                let mut agree = 0usize;
                let mut total = 0usize;
                for (s, old) in streams.iter().zip(&before) {
                    for (f, o) in s.frames.iter().zip(old) {
                        total += 1;
                        agree += usize::from(f.speaking == *o);
                    }
                }
                println!(
                    "{id}: speaking recomputed from {} audio frames ({} centroids), {:.1}% \
                     agreement with prior flags",
                    audio.len(),
                    status.centroids_deg.len(),
                    100.0 * agree as f64 / total.max(1) as f64
                );
            }
            _ => println!("{id}: no audio track, speaking flags left as-is"),
        }
        let session_dir = dir.join(&id);
        std::fs::create_dir_all(&session_dir)?;
        write_annotations(&session_dir.join("annotations.csv"), &[annotations])?;
        write_feature_streams(&session_dir.join("features.csv"), &streams)?;
    }
    println!("features → {}", dir.display());
    Ok(())
}

fn cmd_windows(cfg: &RunConfig, out_root: &Path, inputs: &[PathBuf]) -> Result<(), CliError> {
    let dir = prepare_out(out_root, "windows", cfg)?;
    let spec = cfg.window_spec();
    let mut summary = String::from("session_id,windows,positives,negatives,drops\n");
    for input in inputs {
        let (annotations, streams, _) = load_session_dir(input)?;
        let id = annotations.session_id.clone();
        let set = extract_windows(&annotations, &streams, cfg.user_seat(), &spec)?;
        let _ = writeln!(
            summary,
            "{id},{},{},{},{}",
            set.windows.len(),
            set.positives(),
            set.negatives(),
            set.drops.len()
        );
        println!(
            "{id}: {} windows ({} positive, {} negative), {} dropped",
            set.windows.len(),
            set.positives(),
            set.negatives(),
            set.drops.len()
        );
        write_window_archive(&dir.join(format!("{id}.win")), &set)?;
    }
    std::fs::write(dir.join("summary.csv"), summary)?;
    println!("windows → {}", dir.display());
    Ok(())
}

fn read_archives(paths: &[PathBuf]) -> Result<Vec<WindowSet>, CliError> {
    paths
        .iter()
        .map(|p| {
            let set = read_window_archive(p)?;
            if set.windows.is_empty() {
                return Err(CliError::Invalid(format!(
                    "{} holds no windows (session too short for the window spec?)",
                    p.display()
                )));
            }
            Ok(set)
        })
        .collect()
}

/// Last fifth of each session's windows (anchor order) becomes validation.
fn split_train_val(windows: &[LabeledWindow]) -> (Vec<&LabeledWindow>, Vec<&LabeledWindow>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut i = 0;
    while i < windows.len() {
        let session = &windows[i].session_id;
        let j = windows[i..]
            .iter()
            .position(|w| &w.session_id != session)
            .map_or(windows.len(), |p| i + p);
        let (t, v) = crate::train::session_val_split(&windows[i..j]);
        train.extend(t);
        val.extend(v);
        i = j;
    }
    (train, val)
}

fn cmd_train(cfg: &RunConfig, out_root: &Path, paths: &[PathBuf]) -> Result<(), CliError> {
    let dir = prepare_out(out_root, "train", cfg)?;
    let mut sets = read_archives(paths)?;
    let mut merged = sets.remove(0);
    for set in sets {
        merged.merge(set)?;
    }
    let (train, val) = split_train_val(&merged.windows);
    let spec = ModelSpec::for_windows(cfg.model, &merged.spec, derive_seed(cfg.seed, 0x1217));
    let mut model = build_model(&spec)?;
    println!(
        "training {} on {} windows ({} validation), {} parameters",
        cfg.model,
        train.len(),
        val.len(),
        model.param_count()
    );
    let report = train_model(model.as_mut(), &train, &val, &cfg.train_config())?;

    let mut history = String::from("epoch,train_loss,val_loss\n");
    for r in &report.history {
        let _ = writeln!(
            history,
            "{},{},{}",
            r.epoch,
            r.train_loss,
            r.val_loss.map_or(String::new(), |v| v.to_string())
        );
    }
    std::fs::write(dir.join("history.csv"), history)?;
    let meta = CheckpointMeta {
        epochs_trained: report.best_epoch.max(report.history.len().min(1)),
        best_val_loss: report.best_val_loss,
        train_seed: cfg.seed,
        note: format!("{} trained via cli", cfg.model),
    };
    let ckpt = dir.join("model.json");
    save_checkpoint(&ckpt, model.as_ref(), &meta)?;

    let fit = evaluate(model.as_ref(), &train)?;
    println!(
        "{} epochs ({}), best epoch {}; train-set fit: {}",
        report.history.len(),
        if report.stopped_early { "stopped early" } else { "ran to horizon" },
        report.best_epoch,
        fit.summary()
    );
    println!("checkpoint → {}", ckpt.display());
    Ok(())
}

fn cmd_loso(cfg: &RunConfig, out_root: &Path, paths: &[PathBuf]) -> Result<(), CliError> {
    let dir = prepare_out(out_root, "loso", cfg)?;
    let sets = read_archives(paths)?;
    let template = ModelSpec::for_windows(cfg.model, &sets[0].spec, 0);
    let report = run_loso(&sets, &template, &cfg.train_config(), cfg.seed)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    std::fs::write(dir.join("cv_report.csv"), &csv)?;
    for fold in &report.folds {
        println!("held out {}: {}", fold.held_out, fold.summary);
    }
    println!("{} folds, mean: {}", report.folds.len(), report.mean());
    println!("cv report → {}", dir.join("cv_report.csv").display());
    Ok(())
}

fn cmd_ablate(cfg: &RunConfig, out_root: &Path, paths: &[PathBuf]) -> Result<(), CliError> {
    let dir = prepare_out(out_root, "ablate", cfg)?;
    let sets = read_archives(paths)?;
    let masks = FeatureMask::standard_knockouts();
    let rows = run_ablation(&sets, cfg.model, &masks, &cfg.train_config(), cfg.seed)?;
    let mut csv = Vec::new();
    write_ablation_csv(&rows, &mut csv)?;
    std::fs::write(dir.join("ablation.csv"), &csv)?;
    for row in &rows {
        println!("{:<28} {}", row.label, row.report.mean());
    }
    println!("ablation → {}", dir.join("ablation.csv").display());
    Ok(())
}

fn cmd_metrics(cfg: &RunConfig, out_root: &Path, predictions: &Path) -> Result<(), CliError> {
    let dir = prepare_out(out_root, "metrics", cfg)?;
    let text = std::fs::read_to_string(predictions)?;
    let mut lines = text.lines();
    let header: Vec<&str> =
        lines.next().map(|h| h.split(',').map(str::trim).collect()).unwrap_or_default();
    let score_col = header.iter().position(|&c| c == "score");
    let label_col = header.iter().position(|&c| c == "label");
    let (Some(si), Some(li)) = (score_col, label_col) else {
        return Err(CliError::Invalid(
            "predictions file needs a header with `score` and `label` columns".into(),
        ));
    };
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |idx: usize, what: &str| -> Result<f64, CliError> {
            fields
                .get(idx)
                .and_then(|f| f.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::Invalid(format!("line {}: bad {what}", i + 2)))
        };
        scores.push(parse(si, "score")?);
        labels.push(parse(li, "label")?);
    }
    let confusion = crate::train::Confusion::from_scores(
        &ndarray::Array1::from_vec(scores),
        &ndarray::Array1::from_vec(labels),
    );
    let s = confusion.summary();
    let mut out = String::from("metric,value\n");
    for (name, value) in [
        ("tp", confusion.true_pos as f64),
        ("fp", confusion.false_pos as f64),
        ("tn", confusion.true_neg as f64),
        ("fn", confusion.false_neg as f64),
        ("accuracy", s.accuracy),
        ("precision", s.precision),
        ("recall", s.recall),
        ("f1", s.f1),
        ("mcc", s.mcc),
        ("nmcc", s.nmcc),
    ] {
        let _ = writeln!(out, "{name},{value}");
    }
    std::fs::write(dir.join("metrics.csv"), out)?;
    println!("{s}");
    println!("metrics → {}", dir.join("metrics.csv").display());
    Ok(())
}

fn cmd_simulate(
    cfg: &RunConfig,
    out_root: &Path,
    input: Option<&Path>,
    checkpoint: Option<&Path>,
) -> Result<(), CliError> {
    let dir = prepare_out(out_root, "simulate", cfg)?;
    let (annotations, streams) = match input {
        Some(path) => {
            let (a, s, _) = load_session_dir(path)?;
            (a, s)
        }
        None => {
            let session = crate::data::generate_synthetic_session(&cfg.synthetic_config(0))
                .map_err(|e| CliError::Invalid(e.to_string()))?;
            println!("no --input given; replaying synthetic session {}", {
                &session.annotations.session_id
            });
            (session.annotations, session.streams)
        }
    };
    let model = checkpoint.map(load_checkpoint).transpose()?.map(|(m, _)| m);
    let strategy_cfg = cfg.strategy_config();
    let log = run_strategy(
        &annotations,
        &streams,
        cfg.user_seat(),
        model.as_deref(),
        &strategy_cfg,
    )?;
    let name = format!("{}_{}", log.session_id, log.strategy);
    let mut jsonl = Vec::new();
    log.write_jsonl(&mut jsonl)?;
    std::fs::write(dir.join(format!("{name}.jsonl")), &jsonl)?;
    let summary = log.summary();
    let mut csv = Vec::new();
    write_summary_csv(std::slice::from_ref(&summary), &mut csv)?;
    std::fs::write(dir.join(format!("{name}_summary.csv")), &csv)?;
    println!(
        "{}: {} feeds over {:.0} s{}",
        log.strategy,
        summary.feeds,
        summary.duration_s,
        summary
            .mean_inter_feed_s
            .map_or(String::new(), |m| format!(", mean inter-feed {m:.1} s"))
    );
    println!("decision log → {}", dir.join(format!("{name}.jsonl")).display());
    Ok(())
}

fn load_stats_sessions(
    cfg: &RunConfig,
    annotations: &[PathBuf],
) -> Result<Vec<SessionAnnotations>, CliError> {
    let mut paths: Vec<PathBuf> = annotations.to_vec();
    if paths.is_empty() {
        if let Some(p) = &cfg.annotations {
            paths.push(p.clone());
        }
    }
    if paths.is_empty() {
        return Err(CliError::Invalid(
            "no annotation files given (pass paths or set `annotations` in the config)".into(),
        ));
    }
    let mut sessions = Vec::new();
    for p in &paths {
        sessions.extend(in_file(p, parse_sessions(p))?);
    }
    sessions.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    Ok(sessions)
}

fn cmd_stats(cfg: &RunConfig, out_root: &Path, annotations: &[PathBuf]) -> Result<(), CliError> {
    let dir = prepare_out(out_root, "stats", cfg)?;
    let sessions = load_stats_sessions(cfg, annotations)?;
    let report = annotation_stats(&sessions);
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Invalid(format!("stats serialization failed: {e}")))?;
    std::fs::write(dir.join("stats.json"), json)?;

    println!("{} session(s), {} events", report.sessions, report.total_events());
    for (kind, b) in &report.counts {
        match report.durations.get(kind) {
            Some(d) => println!("  {kind:<16} {:>5}  duration {d}", b.total),
            None => println!("  {kind:<16} {:>5}", b.total),
        }
    }
    for row in report.same_kind_gaps.iter().chain(&report.transition_gaps) {
        if let Some(s) = row.stats {
            println!("  gap {} → {}: {s}", row.from, row.to);
        }
    }
    println!("stats → {}", dir.join("stats.json").display());
    Ok(())
}

fn cmd_report(
    cfg: &RunConfig,
    out_root: &Path,
    from_stats: Option<&Path>,
    annotations: &[PathBuf],
    format: &str,
) -> Result<(), CliError> {
    let dir = prepare_out(out_root, "report", cfg)?;
    let format: ReportFormat = format.parse()?;
    let report: StatsReport = match from_stats {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Invalid(format!("{} is not a stats file: {e}", path.display())))?
        }
        None => annotation_stats(&load_stats_sessions(cfg, annotations)?),
    };
    let written = emit_report(&report, &dir, format)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
