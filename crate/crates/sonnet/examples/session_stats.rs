//! Corpus analytics: event counts, action durations, gap structure, and
//! per-minute eating-rate curves, plus the CSV/SVG report bundle.
//!
//! ```sh
//! cargo run --example session_stats
//! ```

use sonnet::data::{generate_synthetic_session, LabelCoupling, SyntheticConfig};
use sonnet::stats::{annotation_stats, eating_rate, emit_report, gap_stats, ReportFormat};
use sonnet::train::derive_seed;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut sessions = Vec::new();
    for i in 0..3u64 {
        let s = generate_synthetic_session(&SyntheticConfig {
            seed: derive_seed(31, i),
            session_id: Some(format!("lunch_{i:02}")),
            duration_s: 300.0,
            coupling: LabelCoupling::CoDiner,
            ..SyntheticConfig::default()
        })?;
        sessions.push(s.annotations);
    }

    let report = annotation_stats(&sessions);
    println!("{} sessions, {} events\n", report.sessions, report.total_events());

    println!("counts and durations by kind:");
    for (kind, breakdown) in &report.counts {
        match report.durations.get(kind) {
            Some(d) => println!("  {kind:<16} {:>4}   {d}", breakdown.total),
            None => println!("  {kind:<16} {:>4}", breakdown.total),
        }
    }

    // How long after food enters the scene does the diner lift it? How
    // long from lift to mouth? These gaps are what a feeding robot must
    // reproduce to feel natural.
    println!("\naction-to-action gaps:");
    for row in report.same_kind_gaps.iter().chain(&report.transition_gaps) {
        if let Some(stats) = row.stats {
            println!("  {} → {}: {stats}", row.from, row.to);
        }
    }

    // gap_stats answers one-off questions directly.
    use sonnet::data::EventKind::{FoodEntered, FoodLifted};
    if let Some(g) = gap_stats(&sessions, FoodEntered, FoodLifted) {
        println!("\nfood_entered → food_lifted, computed directly: {g}");
    }

    // Eating-rate curves: bites per minute, one curve per diner. Bins that
    // overlap a disruption are masked rather than reported as zero.
    println!("\neating rate, session lunch_00, seat 1 (bites per minute):");
    let curve = eating_rate(&sessions[0], sonnet::data::Seat::new(1).unwrap(), false)?;
    for (minute, rate) in curve.per_minute.iter().enumerate() {
        match rate {
            Some(r) => println!("  minute {minute}: {r:.0}"),
            None => println!("  minute {minute}: (disrupted)"),
        }
    }

    // The report bundle writes the same numbers as CSV plus an SVG plot.
    let dir = tempfile::tempdir()?;
    let written = emit_report(&report, dir.path(), ReportFormat::All)?;
    println!("\nreport bundle:");
    for path in &written {
        let bytes = std::fs::metadata(path)?.len();
        println!("  {} ({bytes} bytes)", path.file_name().unwrap().to_string_lossy());
    }
    Ok(())
}
