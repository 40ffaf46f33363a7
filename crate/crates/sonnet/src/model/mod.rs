//! Bite-timing models over labeled windows.
//!
//! Four model families share one interface ([`BiteModel`]):
//!
//! * [`SonnetModel`] — a multi-channel temporal CNN with one convolution
//!   stack per diner and *interleaving tunnels* that exchange activations
//!   between diners after every block. The triplet variant watches all three
//!   diners; the couplet variant drops the user's perception channel and
//!   re-injects only the bite-history vector at the flattened stage.
//! * [`TcnModel`] — a causal dilated temporal convolutional network over the
//!   per-frame concatenation of all input channels; the standard
//!   sequence-model baseline.
//! * [`LinearModel`] — a hinge-loss linear classifier on the flattened
//!   window.
//! * [`AlwaysFeed`] — predicts a bite for every window; the floor any
//!   learned model must beat.
//!
//! All arithmetic is `f64` and hand-written (forward and backward), so
//! gradients are exactly reproducible and checkable against finite
//! differences. Training-mode forward uses batch statistics in the
//! normalization layers; evaluation uses frozen running statistics and is a
//! pure function of the inputs.

pub mod adam;
mod baseline;
mod checkpoint;
pub mod layers;
mod sonnet_net;
mod tcn;

pub use adam::{Adam, Optimizer, Sgd};
pub use baseline::{AlwaysFeed, LinearModel};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use sonnet_net::SonnetModel;
pub use tcn::TcnModel;

use crate::features::{LabeledWindow, WindowSpec};
use ndarray::{Array1, Array3, Axis};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Which model family and channel arrangement to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    TripletSonnet,
    CoupletSonnet,
    TripletTcn,
    CoupletTcn,
    Linear,
    AlwaysFeed,
}

impl ModelKind {
    pub fn all() -> [ModelKind; 6] {
        [
            ModelKind::TripletSonnet,
            ModelKind::CoupletSonnet,
            ModelKind::TripletTcn,
            ModelKind::CoupletTcn,
            ModelKind::Linear,
            ModelKind::AlwaysFeed,
        ]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::TripletSonnet => "triplet_sonnet",
            ModelKind::CoupletSonnet => "couplet_sonnet",
            ModelKind::TripletTcn => "triplet_tcn",
            ModelKind::CoupletTcn => "couplet_tcn",
            ModelKind::Linear => "linear",
            ModelKind::AlwaysFeed => "always_feed",
        }
    }

    /// True for the variants that never see the user's perception channels.
    pub fn is_couplet(self) -> bool {
        matches!(self, ModelKind::CoupletSonnet | ModelKind::CoupletTcn)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, ModelError> {
        ModelKind::all()
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ModelError::UnknownKind(s.to_string()))
    }
}

/// Hyper-parameters of the per-diner CNN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SonnetHyper {
    /// Output channels of the three blocks.
    pub filters: [usize; 3],
    pub kernel: usize,
    /// Width of the penultimate dense layer.
    pub hidden: usize,
}

impl Default for SonnetHyper {
    fn default() -> Self {
        SonnetHyper { filters: [32, 48, 64], kernel: 5, hidden: 128 }
    }
}

/// Hyper-parameters of the TCN baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcnHyper {
    /// Filters per convolution.
    pub filters: usize,
    pub kernel: usize,
    /// One residual block per dilation, in order.
    pub dilations: Vec<usize>,
    pub hidden: usize,
}

impl Default for TcnHyper {
    fn default() -> Self {
        TcnHyper { filters: 50, kernel: 9, dilations: vec![1, 2, 4, 8], hidden: 128 }
    }
}

/// Everything needed to build (and rebuild) a model deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Frames per window.
    pub frames: usize,
    /// Rows of the user channel, bite block included.
    pub user_rows: usize,
    /// Rows of each co-diner channel.
    pub codiner_rows: usize,
    /// Length of the tiled bite block at the tail of the user channel
    /// (`2 * gamma`; 0 when bite features are ablated).
    pub bite_rows: usize,
    pub sonnet: SonnetHyper,
    pub tcn: TcnHyper,
    /// Seed for weight initialization.
    pub init_seed: u64,
}

impl ModelSpec {
    /// Spec for windows extracted under `window_spec`.
    ///
    /// The couplet TCN defaults to 40 filters (instead of 50) so that both
    /// TCN variants stay parameter-matched with their CNN counterparts.
    pub fn for_windows(kind: ModelKind, window_spec: &WindowSpec, init_seed: u64) -> Self {
        let mut tcn = TcnHyper::default();
        if kind == ModelKind::CoupletTcn {
            tcn.filters = 40;
        }
        ModelSpec {
            kind,
            frames: window_spec.frames_per_window(),
            user_rows: window_spec.user_rows(),
            codiner_rows: window_spec.codiner_rows(),
            bite_rows: 2 * window_spec.gamma,
            sonnet: SonnetHyper::default(),
            tcn,
            init_seed,
        }
    }

    /// Rows of the user channel that are perception features (not bite).
    pub fn user_perception_rows(&self) -> usize {
        self.user_rows - self.bite_rows
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.frames < 2 {
            return Err(ModelError::InvalidSpec("window must span at least 2 frames".into()));
        }
        if self.bite_rows > self.user_rows {
            return Err(ModelError::InvalidSpec("bite block larger than user channel".into()));
        }
        if self.bite_rows % 2 != 0 {
            return Err(ModelError::InvalidSpec("bite block length must be even".into()));
        }
        match self.kind {
            ModelKind::TripletSonnet | ModelKind::CoupletSonnet => {
                if self.sonnet.filters.contains(&0) || self.sonnet.kernel == 0 {
                    return Err(ModelError::InvalidSpec("zero-sized CNN hyper-parameter".into()));
                }
                if self.frames / 8 == 0 {
                    return Err(ModelError::InvalidSpec(
                        "window too short for three pooling stages".into(),
                    ));
                }
            }
            ModelKind::TripletTcn | ModelKind::CoupletTcn => {
                if self.tcn.filters == 0 || self.tcn.kernel == 0 || self.tcn.dilations.is_empty() {
                    return Err(ModelError::InvalidSpec("zero-sized TCN hyper-parameter".into()));
                }
            }
            ModelKind::Linear | ModelKind::AlwaysFeed => {}
        }
        Ok(())
    }
}

/// Model-facing view of a set of windows: one tensor per diner channel,
/// shape `(batch, rows, frames)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    pub user: Array3<f64>,
    pub codiner_a: Array3<f64>,
    pub codiner_b: Array3<f64>,
    /// Length of the bite block at the tail of `user`'s rows.
    pub bite_rows: usize,
}

impl WindowBatch {
    pub fn len(&self) -> usize {
        self.user.dim().0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The tiled bite vector of the final frame, `(batch, bite_rows)` —
    /// the couplet models' only view of the user.
    pub fn bite_last_frame(&self) -> ndarray::Array2<f64> {
        let (_, rows, frames) = self.user.dim();
        self.user
            .slice(ndarray::s![.., rows - self.bite_rows.., frames - 1])
            .to_owned()
    }

    /// Bite block as a time series, `(batch, bite_rows, frames)`.
    pub fn bite_series(&self) -> Array3<f64> {
        let rows = self.user.dim().1;
        self.user.slice(ndarray::s![.., rows - self.bite_rows.., ..]).to_owned()
    }

    /// User perception rows (pose/gaze/speaking) without the bite block.
    pub fn user_perception(&self) -> Array3<f64> {
        let rows = self.user.dim().1;
        self.user.slice(ndarray::s![.., ..rows - self.bite_rows, ..]).to_owned()
    }
}

/// Packs windows into a batch plus its 0/1 target vector.
///
/// All windows must share one geometry (guaranteed within a `WindowSet`).
pub fn assemble_batch(windows: &[&LabeledWindow], bite_rows: usize) -> (WindowBatch, Array1<f64>) {
    assert!(!windows.is_empty(), "cannot assemble an empty batch");
    let (user_rows, frames) = windows[0].user.dim();
    let codiner_rows = windows[0].codiner_a.dim().0;
    let n = windows.len();

    let mut user = Array3::zeros((n, user_rows, frames));
    let mut codiner_a = Array3::zeros((n, codiner_rows, frames));
    let mut codiner_b = Array3::zeros((n, codiner_rows, frames));
    let mut labels = Array1::zeros(n);
    for (i, w) in windows.iter().enumerate() {
        user.index_axis_mut(Axis(0), i).assign(&w.user);
        codiner_a.index_axis_mut(Axis(0), i).assign(&w.codiner_a);
        codiner_b.index_axis_mut(Axis(0), i).assign(&w.codiner_b);
        labels[i] = f64::from(u8::from(w.label));
    }
    (WindowBatch { user, codiner_a, codiner_b, bite_rows }, labels)
}

/// Model failures: shape disagreements, unknown names, bad state.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("unknown model kind `{0}`")]
    UnknownKind(String),
    #[error("batch shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("checkpoint state mismatch: {0}")]
    StateMismatch(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Corrupt(String),
}

/// Common interface of every bite-timing model.
pub trait BiteModel {
    fn spec(&self) -> &ModelSpec;

    /// Evaluation-mode scores in `[0, 1]`, one per window. Pure: same batch,
    /// same scores, bit for bit.
    fn predict(&self, batch: &WindowBatch) -> Result<Array1<f64>, ModelError>;

    /// One training-mode forward/backward pass. Parameter gradients are left
    /// in the layers for an optimizer to consume; returns the mean loss.
    fn train_batch(&mut self, batch: &WindowBatch, targets: &Array1<f64>)
        -> Result<f64, ModelError>;

    /// Visits every trainable parameter slice alongside its gradient slice,
    /// in a stable order. Optimizers own nothing else.
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &mut [f64]));

    /// Full state (trainable parameters plus normalization statistics) as
    /// named vectors, for checkpointing.
    fn state(&self) -> Vec<(String, Vec<f64>)>;

    /// Restores state captured by [`BiteModel::state`].
    fn load_state(&mut self, state: &[(String, Vec<f64>)]) -> Result<(), ModelError>;

    /// Number of trainable parameters.
    fn param_count(&self) -> usize;
}

/// Builds a freshly initialized model for `spec`.
pub fn build_model(spec: &ModelSpec) -> Result<Box<dyn BiteModel>, ModelError> {
    spec.validate()?;
    Ok(match spec.kind {
        ModelKind::TripletSonnet | ModelKind::CoupletSonnet => {
            Box::new(SonnetModel::new(spec.clone()))
        }
        ModelKind::TripletTcn | ModelKind::CoupletTcn => Box::new(TcnModel::new(spec.clone())),
        ModelKind::Linear => Box::new(LinearModel::new(spec.clone())),
        ModelKind::AlwaysFeed => Box::new(AlwaysFeed::new(spec.clone())),
    })
}

/// Verifies a batch's shapes against a spec (helper for implementations).
fn check_batch(spec: &ModelSpec, batch: &WindowBatch) -> Result<(), ModelError> {
    let (_, ur, uf) = batch.user.dim();
    let (_, ar, af) = batch.codiner_a.dim();
    let (_, br, bf) = batch.codiner_b.dim();
    let ok = ur == spec.user_rows
        && ar == spec.codiner_rows
        && br == spec.codiner_rows
        && uf == spec.frames
        && af == spec.frames
        && bf == spec.frames
        && batch.bite_rows == spec.bite_rows;
    if ok {
        Ok(())
    } else {
        Err(ModelError::ShapeMismatch {
            expected: format!(
                "user ({}, {}), codiners ({}, {}), bite {}",
                spec.user_rows, spec.frames, spec.codiner_rows, spec.frames, spec.bite_rows
            ),
            got: format!("user ({ur}, {uf}), codiners ({ar}, {af})/({br}, {bf}), bite {}", batch.bite_rows),
        })
    }
}
