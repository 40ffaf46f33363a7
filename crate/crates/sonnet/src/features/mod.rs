//! Feature pipeline: audio/video alignment, speaking status from the
//! microphone array, bite-history features, and labeled window extraction.

mod align;
mod bite;
mod speaking;
mod window;

pub use align::{align_audio_to_video, parse_audio_track, write_audio_track, AlignedFrame};
pub use bite::{bite_features_at, scale_bite_features, user_bite_vector};
pub use speaking::{
    apply_speaking_status, circular_distance_deg, compute_speaking_status, EnergyVad,
    SpeakingConfig, SpeakingStatus,
};
pub use window::{
    build_window_channels, extract_windows, extract_windows_from_synthetic, read_window_archive,
    write_window_archive,
    ChannelLayout, DropReason, DropRecord, DropReport, LabeledWindow, WindowError, WindowSet,
    WindowSpec,
};

use serde::{Deserialize, Serialize};

/// One microphone-array observation: a voice-activity decision plus the
/// dominant direction of arrival.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AudioFrame {
    /// Timestamp, milliseconds from session start; the audio clock is not
    /// assumed to share the video grid.
    pub t_ms: u64,
    /// True when the voice-activity detector fired on this frame.
    pub voice_active: bool,
    /// Direction of arrival in degrees, `[0, 360)`. Meaningless when
    /// `voice_active` is false.
    pub doa_deg: f64,
}
