//! Annotation model basics: build a session in code, round-trip it
//! through the CSV format, and see what the schema validator catches.
//!
//! ```sh
//! cargo run --example parse_validate
//! ```

use sonnet::data::{
    parse_sessions, validate_session, write_annotations, AnnotationEvent, EventKind, EventValue,
    SessionAnnotations,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A 2-minute meal for the diner in seat 1: one fork bite (enter → lift
    // → to-mouth), then two mouth-open moments.
    let mut session = SessionAnnotations::new("demo_meal", 120_000);
    session.events[0] = vec![
        AnnotationEvent::new(EventKind::FoodEntered, EventValue::Fork, 10_000, 10_400),
        AnnotationEvent::new(EventKind::FoodLifted, EventValue::Fork, 12_000, 12_400),
        AnnotationEvent::new(EventKind::FoodToMouth, EventValue::Fork, 13_500, 14_300),
        AnnotationEvent::new(EventKind::MouthOpen, EventValue::None, 20_000, 20_500),
        AnnotationEvent::new(EventKind::MouthOpen, EventValue::None, 60_000, 60_700),
    ];

    let report = validate_session(&session);
    println!("clean session: {} violation(s)", report.violations.len());
    assert!(report.is_clean());

    // Round trip: CSV out, CSV in, equal again.
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("annotations.csv");
    write_annotations(&path, &[session.clone()])?;
    println!("\n--- {} ---", path.display());
    print!("{}", std::fs::read_to_string(&path)?);

    let parsed = parse_sessions(&path)?;
    assert_eq!(parsed.len(), 1);
    assert_eq!(parsed[0], session);
    println!("--- parses back to an identical session ---\n");

    // Now break the rules on purpose. The validator reports every problem
    // it finds, not just the first.
    let mut broken = SessionAnnotations::new("broken_meal", 60_000);
    broken.events[0] = vec![
        // Lifted a fork, but a spoon arrives at the mouth.
        AnnotationEvent::new(EventKind::FoodLifted, EventValue::Fork, 4_000, 4_300),
        AnnotationEvent::new(EventKind::FoodToMouth, EventValue::Spoon, 5_000, 5_900),
        // Instantaneous marks must be annotated as short ticks, not spans.
        AnnotationEvent::new(EventKind::FoodEntered, EventValue::Spoon, 10_000, 13_000),
        // Runs past the end of the session.
        AnnotationEvent::new(EventKind::MouthOpen, EventValue::None, 59_500, 61_000),
    ];
    let report = validate_session(&broken);
    println!("broken session: {} violation(s)", report.violations.len());
    for violation in &report.violations {
        println!("  {violation}");
    }
    assert_eq!(report.violations.len(), 3);
    Ok(())
}
