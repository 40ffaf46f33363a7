//! Descriptive statistics over annotated sessions, and report emission.
//!
//! Three questions this module answers about a corpus:
//!
//! * what was annotated — per-kind/per-value event counts and, for the
//!   kinds whose extent is meaningful (`*_to_mouth` and `mouth_open`;
//!   `*_entered`/`*_lifted` are instantaneous marks), duration mean ± std;
//! * how actions space out in time — start-to-start gaps between
//!   consecutive same-kind events and between paired events of a
//!   transition (entered → lifted → to-mouth chains);
//! * how eating rate evolves — minute-binned `food_to_mouth` counts per
//!   diner, optionally normalized by that diner's total so the curve sums
//!   to one.
//!
//! Conventions, since the source tables don't pin them: standard
//! deviations are population (divide by N); gaps are start-to-start; a gap
//! whose span overlaps a recording disruption is excluded, as is any rate
//! bin overlapping one. All maps iterate in a fixed order, so reports are
//! deterministic.

use crate::data::{EventKind, EventValue, Seat, SessionAnnotations};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("session `{0}` has no events of the requested kind")]
    NoEvents(String),
    #[error("unknown event kind `{0}`")]
    UnknownKind(String),
    #[error("unknown report format `{0}` (expected csv, svg, or all)")]
    UnknownFormat(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Mean ± population standard deviation over a sample of seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondsStats {
    pub count: usize,
    pub mean_s: f64,
    pub std_s: f64,
}

impl SecondsStats {
    /// `None` when the sample is empty — callers report that as "absent"
    /// rather than inventing a zero.
    pub fn from_values(values: &[f64]) -> Option<SecondsStats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(SecondsStats { count: values.len(), mean_s: mean, std_s: var.sqrt() })
    }
}

impl fmt::Display for SecondsStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} ± {:.2} s (n={})", self.mean_s, self.std_s, self.count)
    }
}

/// Event counts for one kind, total and split by value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KindBreakdown {
    pub total: usize,
    pub by_value: BTreeMap<EventValue, usize>,
}

/// Duration statistics for one (kind, value) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueDuration {
    pub kind: EventKind,
    pub value: EventValue,
    pub stats: SecondsStats,
}

/// Start-to-start gap statistics between two kinds (equal kinds mean
/// consecutive same-kind events). `stats` is `None` when fewer than one
/// gap exists in the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub from: EventKind,
    pub to: EventKind,
    pub stats: Option<SecondsStats>,
}

/// Minute-binned `food_to_mouth` counts for one diner in one session.
///
/// `per_minute[i]` covers `[60i, 60(i+1))` seconds; `None` marks a bin
/// overlapping a recording disruption, whose contents are untrustworthy.
/// `total_events` counts every event, including any in masked bins, and is
/// the normalizer for the normalized variant — so a normalized curve sums
/// to at most 1, and to exactly 1 when nothing is masked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub session_id: String,
    pub seat: Seat,
    pub normalized: bool,
    pub per_minute: Vec<Option<f64>>,
    pub total_events: usize,
}

impl RateCurve {
    /// Sum over unmasked bins.
    pub fn sum(&self) -> f64 {
        self.per_minute.iter().flatten().sum()
    }
}

/// Corpus-level descriptive statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub sessions: usize,
    pub counts: BTreeMap<EventKind, KindBreakdown>,
    /// Kind-level duration stats, present only for kinds with meaningful
    /// extent (`*_to_mouth`, `mouth_open`) that actually occur.
    pub durations: BTreeMap<EventKind, SecondsStats>,
    /// Same stats split by event value, same kind restriction.
    pub durations_by_value: Vec<ValueDuration>,
    /// Consecutive same-kind gaps for every kind present in the corpus.
    pub same_kind_gaps: Vec<GapRow>,
    /// Gaps across the paired `entered → lifted → to_mouth` transitions.
    pub transition_gaps: Vec<GapRow>,
    /// One raw curve per (session, diner) with at least one eating action.
    pub rate_curves: Vec<RateCurve>,
    pub normalized_curves: Vec<RateCurve>,
}

impl StatsReport {
    pub fn total_events(&self) -> usize {
        self.counts.values().map(|b| b.total).sum()
    }
}

/// Kinds whose annotated extent is a real duration rather than a ≤ 400 ms
/// mark. Disruptions also have extent but describe the recording, not a
/// diner action, so they are not part of duration tables.
fn has_meaningful_duration(kind: EventKind) -> bool {
    matches!(
        kind,
        EventKind::MouthOpen
            | EventKind::FoodToMouth
            | EventKind::DrinkToMouth
            | EventKind::NapkinToMouth
    )
}

/// The one-to-one action chains whose transition gaps get reported.
const TRANSITIONS: [(EventKind, EventKind); 6] = [
    (EventKind::FoodEntered, EventKind::FoodLifted),
    (EventKind::FoodLifted, EventKind::FoodToMouth),
    (EventKind::DrinkEntered, EventKind::DrinkLifted),
    (EventKind::DrinkLifted, EventKind::DrinkToMouth),
    (EventKind::NapkinEntered, EventKind::NapkinLifted),
    (EventKind::NapkinLifted, EventKind::NapkinToMouth),
];

fn spans_overlap(a_start: u64, a_end: u64, spans: &[(u64, u64)]) -> bool {
    spans.iter().any(|&(s, e)| s < a_end && a_start < e)
}

/// Start-to-start gaps in seconds between consecutive `kind` events on one
/// seat, skipping pairs separated by a disruption.
fn same_kind_gaps_for(
    session: &SessionAnnotations,
    seat: Seat,
    kind: EventKind,
    disruptions: &[(u64, u64)],
    out: &mut Vec<f64>,
) {
    let events = session.events_of_kind(seat, kind);
    for pair in events.windows(2) {
        let (a, b) = (pair[0].start_ms, pair[1].start_ms);
        if !spans_overlap(a, b, disruptions) {
            out.push((b - a) as f64 / 1000.0);
        }
    }
}

/// Start-to-start gaps across a transition on one seat. Each `to` event
/// pairs with the most recent unconsumed `from` event at or before it;
/// a `from` superseded by a later `from` before any `to` arrives never
/// pairs. On schema-clean sessions the kinds alternate, so this is exactly
/// the annotation schema's one-to-one pairing.
fn transition_gaps_for(
    session: &SessionAnnotations,
    seat: Seat,
    from: EventKind,
    to: EventKind,
    disruptions: &[(u64, u64)],
    out: &mut Vec<f64>,
) {
    let mut pending: Option<u64> = None;
    for e in session.events_for(seat) {
        if e.kind == from {
            pending = Some(e.start_ms);
        } else if e.kind == to {
            if let Some(f) = pending.take() {
                if f <= e.start_ms && !spans_overlap(f, e.start_ms, disruptions) {
                    out.push((e.start_ms - f) as f64 / 1000.0);
                }
            }
        }
    }
}

/// Pooled gap statistics between two kinds across sessions and seats.
/// Equal kinds measure consecutive same-kind events; different kinds
/// measure the paired transition. `None` when no gap exists.
pub fn gap_stats(
    sessions: &[SessionAnnotations],
    from: EventKind,
    to: EventKind,
) -> Option<SecondsStats> {
    let mut gaps = Vec::new();
    for session in sessions {
        let disruptions = session.disruption_intervals();
        for seat in Seat::all() {
            if from == to {
                same_kind_gaps_for(session, seat, from, &disruptions, &mut gaps);
            } else {
                transition_gaps_for(session, seat, from, to, &disruptions, &mut gaps);
            }
        }
    }
    SecondsStats::from_values(&gaps)
}

/// Minute-binned eating-action curve for one diner.
///
/// Errors with [`StatsError::NoEvents`] when the diner has no
/// `food_to_mouth` events (an all-zero curve would be indistinguishable
/// from a diner who wasn't eating on camera).
pub fn eating_rate(
    session: &SessionAnnotations,
    seat: Seat,
    normalize: bool,
) -> Result<RateCurve, StatsError> {
    let events = session.events_of_kind(seat, EventKind::FoodToMouth);
    if events.is_empty() {
        return Err(StatsError::NoEvents(session.session_id.clone()));
    }
    let n_bins = (session.duration_ms.div_ceil(60_000)).max(1) as usize;
    let mut counts = vec![0usize; n_bins];
    for e in &events {
        let bin = ((e.start_ms / 60_000) as usize).min(n_bins - 1);
        counts[bin] += 1;
    }
    let disruptions = session.disruption_intervals();
    let total = events.len();
    let scale = if normalize { total as f64 } else { 1.0 };
    let per_minute = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let bin_start = i as u64 * 60_000;
            let bin_end = ((i as u64 + 1) * 60_000).min(session.duration_ms);
            if spans_overlap(bin_start, bin_end, &disruptions) {
                None
            } else {
                Some(c as f64 / scale)
            }
        })
        .collect();
    Ok(RateCurve {
        session_id: session.session_id.clone(),
        seat,
        normalized: normalize,
        per_minute,
        total_events: total,
    })
}

/// Computes the full descriptive report over a corpus.
pub fn annotation_stats(sessions: &[SessionAnnotations]) -> StatsReport {
    let mut counts: BTreeMap<EventKind, KindBreakdown> = BTreeMap::new();
    let mut duration_samples: BTreeMap<EventKind, Vec<f64>> = BTreeMap::new();
    let mut value_duration_samples: BTreeMap<(EventKind, EventValue), Vec<f64>> = BTreeMap::new();

    for session in sessions {
        for seat in Seat::all() {
            for e in session.events_for(seat) {
                let entry = counts.entry(e.kind).or_default();
                entry.total += 1;
                *entry.by_value.entry(e.value).or_insert(0) += 1;
                if has_meaningful_duration(e.kind) {
                    let secs = e.duration_ms() as f64 / 1000.0;
                    duration_samples.entry(e.kind).or_default().push(secs);
                    value_duration_samples.entry((e.kind, e.value)).or_default().push(secs);
                }
            }
        }
    }

    let durations = duration_samples
        .iter()
        .filter_map(|(&k, v)| SecondsStats::from_values(v).map(|s| (k, s)))
        .collect();
    let durations_by_value = value_duration_samples
        .iter()
        .filter_map(|(&(kind, value), v)| {
            SecondsStats::from_values(v).map(|stats| ValueDuration { kind, value, stats })
        })
        .collect();

    let same_kind_gaps = EventKind::all()
        .into_iter()
        .filter(|k| counts.contains_key(k))
        .map(|k| GapRow { from: k, to: k, stats: gap_stats(sessions, k, k) })
        .collect();
    let transition_gaps = TRANSITIONS
        .into_iter()
        .filter(|(from, _)| counts.contains_key(from))
        .map(|(from, to)| GapRow { from, to, stats: gap_stats(sessions, from, to) })
        .collect();

    let mut rate_curves = Vec::new();
    let mut normalized_curves = Vec::new();
    for session in sessions {
        for seat in Seat::all() {
            if let Ok(curve) = eating_rate(session, seat, false) {
                rate_curves.push(curve);
                normalized_curves.push(
                    eating_rate(session, seat, true).expect("same events, same outcome"),
                );
            }
        }
    }

    StatsReport {
        sessions: sessions.len(),
        counts,
        durations,
        durations_by_value,
        same_kind_gaps,
        transition_gaps,
        rate_curves,
        normalized_curves,
    }
}

/// Which artifacts [`emit_report`] writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// The four CSV tables.
    Csv,
    /// The rate-curve plot only.
    Svg,
    /// Everything.
    All,
}

impl FromStr for ReportFormat {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, StatsError> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "svg" => Ok(ReportFormat::Svg),
            "all" => Ok(ReportFormat::All),
            other => Err(StatsError::UnknownFormat(other.to_string())),
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_counts_csv(report: &StatsReport, w: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "kind,value,count")?;
    for (kind, breakdown) in &report.counts {
        writeln!(w, "{kind},(all),{}", breakdown.total)?;
        for (value, n) in &breakdown.by_value {
            writeln!(w, "{kind},{value},{n}")?;
        }
    }
    Ok(())
}

fn write_durations_csv(report: &StatsReport, w: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "kind,value,count,mean_s,std_s")?;
    for (kind, s) in &report.durations {
        writeln!(w, "{kind},(all),{},{},{}", s.count, s.mean_s, s.std_s)?;
    }
    for d in &report.durations_by_value {
        writeln!(
            w,
            "{},{},{},{},{}",
            d.kind, d.value, d.stats.count, d.stats.mean_s, d.stats.std_s
        )?;
    }
    Ok(())
}

fn write_gaps_csv(report: &StatsReport, w: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "from,to,count,mean_s,std_s")?;
    for row in report.same_kind_gaps.iter().chain(&report.transition_gaps) {
        match row.stats {
            Some(s) => writeln!(w, "{},{},{},{},{}", row.from, row.to, s.count, s.mean_s, s.std_s)?,
            None => writeln!(w, "{},{},0,,", row.from, row.to)?,
        }
    }
    Ok(())
}

fn write_rate_csv(report: &StatsReport, w: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "session_id,seat,normalized,minute,events_per_minute")?;
    for curve in report.rate_curves.iter().chain(&report.normalized_curves) {
        for (minute, v) in curve.per_minute.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                curve.session_id,
                curve.seat,
                curve.normalized,
                minute,
                fmt_opt(*v)
            )?;
        }
    }
    Ok(())
}

const SVG_PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

/// Renders the raw rate curves as an SVG line chart. Pure function of the
/// report, so the output bytes are deterministic; masked bins break the
/// polyline. Returns the document text.
pub fn render_rate_svg(report: &StatsReport) -> String {
    let (w, h, ml, mb) = (800.0, 300.0, 50.0, 30.0);
    let plot_w = w - ml - 10.0;
    let plot_h = h - mb - 10.0;
    let max_minutes = report.rate_curves.iter().map(|c| c.per_minute.len()).max().unwrap_or(1);
    let max_rate = report
        .rate_curves
        .iter()
        .flat_map(|c| c.per_minute.iter().flatten())
        .fold(1.0f64, |a, &b| a.max(b));

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n  <g font-family=\"sans-serif\" \
         font-size=\"12\">\n    <text x=\"{}\" y=\"{}\">minute</text>\n    <text x=\"12\" \
         y=\"{}\" transform=\"rotate(-90 12 {})\">actions/min</text>\n  </g>\n",
        ml + plot_w / 2.0,
        h - 6.0,
        10.0 + plot_h / 2.0,
        10.0 + plot_h / 2.0,
    ));
    svg.push_str(&format!(
        "  <line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n  <line \
         x1=\"{ml}\" y1=\"10\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        10.0 + plot_h,
        ml + plot_w,
        10.0 + plot_h,
        10.0 + plot_h,
    ));
    let x_of = |minute: usize| ml + plot_w * minute as f64 / (max_minutes.max(2) - 1) as f64;
    let y_of = |rate: f64| 10.0 + plot_h * (1.0 - rate / max_rate);
    for (i, curve) in report.rate_curves.iter().enumerate() {
        let color = SVG_PALETTE[i % SVG_PALETTE.len()];
        let mut segment: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, svg: &mut String| {
            if seg.len() >= 2 {
                svg.push_str(&format!(
                    "  <polyline fill=\"none\" stroke=\"{color}\" points=\"{}\"><title>{} seat \
                     {}</title></polyline>\n",
                    seg.join(" "),
                    curve.session_id,
                    curve.seat
                ));
            }
            seg.clear();
        };
        for (minute, v) in curve.per_minute.iter().enumerate() {
            match v {
                Some(rate) => segment.push(format!("{:.2},{:.2}", x_of(minute), y_of(*rate))),
                None => flush(&mut segment, &mut svg),
            }
        }
        flush(&mut segment, &mut svg);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes the report artifacts under `dir` with stable names:
/// `annotation_counts.csv`, `annotation_durations.csv`, `gap_stats.csv`,
/// `eating_rate.csv`, and `eating_rate.svg`. Returns the paths written.
pub fn emit_report(
    report: &StatsReport,
    dir: &Path,
    format: ReportFormat,
) -> Result<Vec<PathBuf>, StatsError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, body: String| -> Result<(), StatsError> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    if format != ReportFormat::Svg {
        let mut buf = Vec::new();
        write_counts_csv(report, &mut buf)?;
        emit("annotation_counts.csv", String::from_utf8(buf).expect("ascii"))?;
        let mut buf = Vec::new();
        write_durations_csv(report, &mut buf)?;
        emit("annotation_durations.csv", String::from_utf8(buf).expect("ascii"))?;
        let mut buf = Vec::new();
        write_gaps_csv(report, &mut buf)?;
        emit("gap_stats.csv", String::from_utf8(buf).expect("ascii"))?;
        let mut buf = Vec::new();
        write_rate_csv(report, &mut buf)?;
        emit("eating_rate.csv", String::from_utf8(buf).expect("ascii"))?;
    }
    if format != ReportFormat::Csv {
        emit("eating_rate.svg", render_rate_svg(report))?;
    }
    Ok(written)
}
