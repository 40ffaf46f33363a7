//! Bite-history features for the feeding-system user.
//!
//! Two numbers summarize eating history at any instant: seconds since the
//! user's last bite (time from session start before the first bite) and the
//! number of bites taken so far. A bite "happens" at the onset of its
//! `food_lifted` mark. Because two numbers are easily drowned out next to
//! hundreds of perception channels, they are tiled `gamma` times when
//! assembled into model inputs.

use crate::data::BiteFeatures;
use ndarray::Array1;

/// Bite history at time `t_ms`, given the user's lift-onset times (sorted,
/// milliseconds). Lifts at exactly `t_ms` count as already taken.
pub fn bite_features_at(lift_starts_ms: &[u64], t_ms: u64) -> BiteFeatures {
    debug_assert!(
        lift_starts_ms.windows(2).all(|p| p[0] <= p[1]),
        "lift onsets must be sorted"
    );
    let taken = lift_starts_ms.partition_point(|&l| l <= t_ms);
    let since_ms = match taken {
        0 => t_ms,
        n => t_ms - lift_starts_ms[n - 1],
    };
    BiteFeatures { time_since_s: since_ms as f64 / 1000.0, count: taken as u32 }
}

/// The raw two-element bite vector `[seconds_since, count]`.
pub fn user_bite_vector(b: BiteFeatures) -> [f64; 2] {
    [b.time_since_s, f64::from(b.count)]
}

/// Tiles the two bite features `gamma` times into a `2 * gamma` vector:
/// `[t, c, t, c, ...]`. Every aligned pair equals the input; `gamma = 0`
/// yields an empty vector.
pub fn scale_bite_features(b: BiteFeatures, gamma: usize) -> Array1<f64> {
    let [t, c] = user_bite_vector(b);
    Array1::from_shape_fn(2 * gamma, |i| if i % 2 == 0 { t } else { c })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn before_the_first_bite_the_clock_counts_from_session_start() {
        let b = bite_features_at(&[10_000, 30_000], 4_000);
        assert_eq!(b.count, 0);
        assert_eq!(b.time_since_s, 4.0);
    }

    #[test]
    fn clock_resets_at_each_lift_onset() {
        let lifts = [10_000, 30_000, 31_000];
        assert_eq!(bite_features_at(&lifts, 10_000), BiteFeatures { time_since_s: 0.0, count: 1 });
        assert_eq!(bite_features_at(&lifts, 29_999), BiteFeatures { time_since_s: 19.999, count: 1 });
        assert_eq!(bite_features_at(&lifts, 31_500), BiteFeatures { time_since_s: 0.5, count: 3 });
    }

    #[test]
    fn no_lifts_means_count_zero_forever() {
        let b = bite_features_at(&[], 123_456);
        assert_eq!(b.count, 0);
        assert_eq!(b.time_since_s, 123.456);
    }

    #[test]
    fn tiling_repeats_the_pair_exactly() {
        let b = BiteFeatures { time_since_s: 7.25, count: 3 };
        let scaled = scale_bite_features(b, 100);
        assert_eq!(scaled.len(), 200);
        for i in 0..100 {
            assert_eq!(scaled[2 * i], 7.25, "pair {i}");
            assert_eq!(scaled[2 * i + 1], 3.0, "pair {i}");
        }
    }

    #[test]
    fn gamma_zero_tiles_to_nothing() {
        let b = BiteFeatures { time_since_s: 1.0, count: 1 };
        assert_eq!(scale_bite_features(b, 0).len(), 0);
    }
}
