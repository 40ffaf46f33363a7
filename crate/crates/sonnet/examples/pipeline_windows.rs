//! The feature pipeline, stage by stage: align an audio track to video
//! frames, recover per-seat speaking status from microphone directions,
//! compute bite-history features, and extract labeled training windows.
//!
//! ```sh
//! cargo run --example pipeline_windows
//! ```

use sonnet::data::{generate_synthetic_session, EventKind, LabelCoupling, SyntheticConfig};
use sonnet::features::{
    align_audio_to_video, apply_speaking_status, bite_features_at, compute_speaking_status,
    extract_windows, scale_bite_features, SpeakingConfig, WindowSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let session = generate_synthetic_session(&SyntheticConfig {
        seed: 1234,
        duration_s: 300.0,
        coupling: LabelCoupling::CoDiner,
        emit_audio: true,
        ..SyntheticConfig::default()
    })?;
    let audio = session.audio.as_ref().expect("emit_audio was set");
    let mut streams = session.streams.clone();
    let annotations = &session.annotations;

    // Stage 1 — alignment. Audio runs faster than video; each video frame
    // adopts the audio frame nearest in time.
    let video_t: Vec<u64> = streams[0].frames.iter().map(|f| f.t_ms).collect();
    let aligned = align_audio_to_video(audio, &video_t);
    println!(
        "aligned {} audio frames onto {} video frames",
        audio.len(),
        aligned.len()
    );

    // Stage 2 — who is speaking? Cluster voiced direction-of-arrival
    // angles (k-means, restarted) and map each cluster to the nearest
    // seat. No audio content is used, only direction.
    let status = compute_speaking_status(
        audio,
        &video_t,
        annotations.seat_angles_deg,
        &SpeakingConfig::default(),
    );
    println!("fitted speaking centroids (degrees):");
    for (angle, seat) in status.centroids_deg.iter().zip(&status.centroid_seats) {
        println!("  {angle:7.2}° → seat {seat}");
    }
    apply_speaking_status(&mut streams, &status);

    // Stage 3 — bite history. At any instant the user's feeding state is
    // (seconds since the last bite lift, bites so far); tiling it gamma
    // times keeps two scalars from being drowned out by the 168-row pose
    // block when the channels are stacked.
    let user_lifts: Vec<u64> = annotations
        .events_for(session.user_seat)
        .iter()
        .filter(|e| e.kind == EventKind::FoodLifted)
        .map(|e| e.start_ms)
        .collect();
    let t = 150_000;
    let raw = bite_features_at(&user_lifts, t);
    let tiled = scale_bite_features(raw, 2);
    println!(
        "\nat t = {:.0} s: {:.1} s since last bite, {} bites so far (tiled ×2: {:.1})",
        t as f64 / 1000.0,
        raw.time_since_s,
        raw.count,
        tiled
    );

    // Stage 4 — windows. Every mouth-open onset anchors a positive window;
    // matched negatives come from quiet stretches. Each window carries one
    // channel per diner.
    let spec = WindowSpec::default();
    let set = extract_windows(annotations, &streams, session.user_seat, &spec)?;
    println!(
        "\nextracted {} windows ({} positive / {} negative), {} candidates dropped",
        set.windows.len(),
        set.positives(),
        set.negatives(),
        set.drops.len()
    );
    let w = &set.windows[0];
    println!(
        "first window: anchor {:.1} s, label {}, user channel {}×{}, co-diner channels {}×{}",
        w.anchor_ms as f64 / 1000.0,
        w.label,
        w.user.nrows(),
        w.user.ncols(),
        w.codiner_a.nrows(),
        w.codiner_a.ncols(),
    );
    Ok(())
}
