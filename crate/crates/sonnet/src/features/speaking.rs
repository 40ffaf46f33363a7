//! Per-seat speaking status from the microphone array.
//!
//! The array reports a direction of arrival (DOA) whenever the
//! voice-activity detector fires. Speaker diarization here is deliberately
//! light: cluster the DOAs of voice-active frames into three circular
//! clusters (one per seat), map each cluster to the circularly nearest seat
//! angle, and mark that seat as speaking on every video frame whose aligned
//! audio frame fell in the cluster.
//!
//! All angle arithmetic is circular: 359° and 1° are 2° apart, and cluster
//! means are computed on the unit circle, never as plain averages.

use super::align::align_audio_to_video;
use super::AudioFrame;
use crate::data::Seat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Tuning for [`compute_speaking_status`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeakingConfig {
    /// Independent k-means restarts; the lowest-inertia run wins.
    pub restarts: usize,
    /// Iteration cap per restart.
    pub max_iters: usize,
    /// Seed for centroid initialization.
    pub seed: u64,
}

impl Default for SpeakingConfig {
    fn default() -> Self {
        SpeakingConfig { restarts: 10, max_iters: 100, seed: 0 }
    }
}

/// Result of diarization: per-seat speaking flags on the video grid, plus
/// the fitted clusters for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakingStatus {
    /// `per_seat[s][i]` is 1 when seat `s+1` speaks on video frame `i`.
    pub per_seat: [Vec<u8>; 3],
    /// Fitted cluster centers, degrees.
    pub centroids_deg: Vec<f64>,
    /// Seat each centroid was mapped to.
    pub centroid_seats: Vec<Seat>,
}

/// Smallest angular separation between two directions, in `[0, 180]`.
pub fn circular_distance_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Circular mean of directions; `None` when the resultant vector vanishes.
fn circular_mean_deg(angles: &[f64]) -> Option<f64> {
    let (mut x, mut y) = (0.0, 0.0);
    for &a in angles {
        let r = a.to_radians();
        x += r.cos();
        y += r.sin();
    }
    let norm = (x * x + y * y).sqrt();
    if norm < 1e-9 {
        return None;
    }
    Some(y.atan2(x).to_degrees().rem_euclid(360.0))
}

/// The seat whose mounting angle is circularly nearest to `angle_deg`;
/// exact ties go to the lower seat number.
pub(crate) fn nearest_seat(angle_deg: f64, seat_angles_deg: [f64; 3]) -> Seat {
    let mut best = Seat::all()[0];
    let mut best_dist = f64::INFINITY;
    for seat in Seat::all() {
        let d = circular_distance_deg(angle_deg, seat_angles_deg[seat.index()]);
        if d < best_dist {
            best = seat;
            best_dist = d;
        }
    }
    best
}

/// One circular k-means run from given initial centroids. Returns
/// `(centroids, inertia)` where inertia sums squared circular distances.
fn kmeans_once(
    doas: &[f64],
    mut centroids: Vec<f64>,
    max_iters: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64) {
    let k = centroids.len();
    let mut assignment = vec![0usize; doas.len()];
    for _ in 0..max_iters {
        let mut changed = false;
        for (i, &doa) in doas.iter().enumerate() {
            let mut best = 0usize;
            let mut best_dist = f64::INFINITY;
            for (c, &center) in centroids.iter().enumerate() {
                let d = circular_distance_deg(doa, center);
                if d < best_dist {
                    best = c;
                    best_dist = d;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        for c in 0..k {
            let members: Vec<f64> = doas
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == c)
                .map(|(&d, _)| d)
                .collect();
            centroids[c] = match circular_mean_deg(&members) {
                Some(m) => m,
                // Empty or perfectly balanced cluster: reseed it.
                None => doas[rng.random_range(0..doas.len())],
            };
        }
        if !changed {
            break;
        }
    }
    let inertia = doas
        .iter()
        .zip(&assignment)
        .map(|(&d, &a)| circular_distance_deg(d, centroids[a]).powi(2))
        .sum();
    (centroids, inertia)
}

/// Diarizes the audio track into per-seat speaking flags on the video grid.
///
/// Voice-active audio frames are clustered by DOA (circular k-means, k = 3,
/// seeded restarts); each centroid maps to the circularly nearest seat
/// angle, lower seat number on ties. If the active DOAs are too degenerate
/// to support three clusters (fewer than three distinct directions), each
/// frame falls back to direct nearest-seat assignment — the result is still
/// fully defined.
///
/// Returns flags for each video timestamp in `video_t_ms`.
pub fn compute_speaking_status(
    audio: &[AudioFrame],
    video_t_ms: &[u64],
    seat_angles_deg: [f64; 3],
    cfg: &SpeakingConfig,
) -> SpeakingStatus {
    let n = video_t_ms.len();
    let mut per_seat = [vec![0u8; n], vec![0u8; n], vec![0u8; n]];

    let active_doas: Vec<f64> = audio
        .iter()
        .filter(|a| a.voice_active)
        .map(|a| a.doa_deg.rem_euclid(360.0))
        .collect();

    let mut distinct: Vec<u64> = active_doas.iter().map(|d| d.to_bits()).collect();
    distinct.sort_unstable();
    distinct.dedup();

    let (centroids, centroid_seats) = if distinct.len() < 3 {
        // Not enough structure for k-means; classify frames directly.
        (Vec::new(), Vec::new())
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut best: Option<(Vec<f64>, f64)> = None;
        for _ in 0..cfg.restarts.max(1) {
            let init: Vec<f64> = (0..3)
                .map(|_| active_doas[rng.random_range(0..active_doas.len())])
                .collect();
            let (centroids, inertia) = kmeans_once(&active_doas, init, cfg.max_iters, &mut rng);
            if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
                best = Some((centroids, inertia));
            }
        }
        let (centroids, _) = best.expect("at least one restart");
        let seats = centroids.iter().map(|&c| nearest_seat(c, seat_angles_deg)).collect();
        (centroids, seats)
    };

    for frame in align_audio_to_video(audio, video_t_ms) {
        if !frame.voice_active {
            continue;
        }
        let seat = if centroids.is_empty() {
            nearest_seat(frame.doa_deg, seat_angles_deg)
        } else {
            let cluster = centroids
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    circular_distance_deg(frame.doa_deg, **a)
                        .partial_cmp(&circular_distance_deg(frame.doa_deg, **b))
                        .expect("finite distances")
                })
                .map(|(i, _)| i)
                .expect("non-empty centroids");
            centroid_seats[cluster]
        };
        let video_index = video_t_ms.partition_point(|&t| t < frame.t_ms);
        if video_index < n && video_t_ms[video_index] == frame.t_ms {
            per_seat[seat.index()][video_index] = 1;
        }
    }

    SpeakingStatus { per_seat, centroids_deg: centroids, centroid_seats }
}

/// Overwrites the `speaking` flag of each stream from diarization output.
///
/// Streams and `status` must refer to the same video grid (one flag per
/// frame, same order).
pub fn apply_speaking_status(streams: &mut [crate::data::FeatureStream], status: &SpeakingStatus) {
    for stream in streams {
        let flags = &status.per_seat[stream.seat.index()];
        for (frame, &flag) in stream.frames.iter_mut().zip(flags) {
            frame.speaking = flag;
        }
    }
}

/// Minimal energy-threshold voice-activity detector for raw waveforms.
///
/// Splits the signal into fixed-length frames and marks a frame active when
/// its root-mean-square energy exceeds the threshold. This is a testing and
/// ingest convenience, not a serious VAD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyVad {
    /// Samples per analysis frame.
    pub frame_len: usize,
    /// RMS threshold above which a frame counts as voiced.
    pub threshold: f64,
}

impl EnergyVad {
    pub fn new(frame_len: usize, threshold: f64) -> Self {
        EnergyVad { frame_len, threshold }
    }

    /// Per-frame activity for `samples`; the trailing partial frame, if any,
    /// is evaluated over the samples it has.
    pub fn detect(&self, samples: &[f64]) -> Vec<bool> {
        samples
            .chunks(self.frame_len.max(1))
            .map(|chunk| {
                let energy = chunk.iter().map(|s| s * s).sum::<f64>() / chunk.len() as f64;
                energy.sqrt() > self.threshold
            })
            .collect()
    }
}
