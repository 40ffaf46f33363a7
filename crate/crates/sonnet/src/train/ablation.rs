//! Feature-group knockouts.
//!
//! An ablation *removes* a feature group's rows from every channel matrix —
//! it does not zero them — so the trained model's input is genuinely
//! narrower and cannot touch the withheld signal. Groups: body pose,
//! gaze/head direction, speaking status, and the user's bite history.

use super::loso::{run_loso, CvReport};
use super::{TrainConfig, TrainError};
use crate::features::{ChannelLayout, LabeledWindow, WindowSet, WindowSpec};
use crate::model::{ModelError, ModelKind, ModelSpec};
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

/// Which feature groups stay in the windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub pose: bool,
    pub gaze_head: bool,
    pub speaking: bool,
    pub bite: bool,
}

impl Default for FeatureMask {
    fn default() -> Self {
        FeatureMask::full()
    }
}

impl FeatureMask {
    pub fn full() -> Self {
        FeatureMask { pose: true, gaze_head: true, speaking: true, bite: true }
    }

    pub fn without_pose() -> Self {
        FeatureMask { pose: false, ..Self::full() }
    }

    pub fn without_gaze_head() -> Self {
        FeatureMask { gaze_head: false, ..Self::full() }
    }

    pub fn without_speaking() -> Self {
        FeatureMask { speaking: false, ..Self::full() }
    }

    pub fn without_bite() -> Self {
        FeatureMask { bite: false, ..Self::full() }
    }

    /// The five standard table rows: everything, then each group removed.
    pub fn standard_knockouts() -> Vec<FeatureMask> {
        vec![
            Self::full(),
            Self::without_pose(),
            Self::without_gaze_head(),
            Self::without_speaking(),
            Self::without_bite(),
        ]
    }

    /// "full", or "-" + the removed group names, e.g. `-pose-bite`.
    pub fn label(&self) -> String {
        let mut out = String::new();
        for (kept, name) in [
            (self.pose, "pose"),
            (self.gaze_head, "gaze_head"),
            (self.speaking, "speaking"),
            (self.bite, "bite"),
        ] {
            if !kept {
                out.push('-');
                out.push_str(name);
            }
        }
        if out.is_empty() {
            "full".into()
        } else {
            out
        }
    }

    /// Row indices kept in the user channel for tiling factor `gamma`.
    pub fn user_row_indices(&self, gamma: usize) -> Vec<usize> {
        let layout = ChannelLayout::user(gamma);
        let mut rows = self.perception_rows(&layout);
        if self.bite {
            if let Some(bite) = layout.bite {
                rows.extend(bite);
            }
        }
        rows
    }

    /// Row indices kept in a co-diner channel.
    pub fn codiner_row_indices(&self) -> Vec<usize> {
        self.perception_rows(&ChannelLayout::codiner())
    }

    fn perception_rows(&self, layout: &ChannelLayout) -> Vec<usize> {
        let mut rows = Vec::new();
        if self.pose {
            rows.extend(layout.pose.clone());
        }
        if self.gaze_head {
            rows.extend(layout.gaze_head.clone());
        }
        if self.speaking {
            rows.push(layout.speaking);
        }
        rows
    }
}

fn select_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    m.select(Axis(0), rows)
}

/// Applies the mask to every window, dropping the withheld rows.
///
/// The returned set keeps the original extraction spec (it still describes
/// window timing); only the channel matrices are narrower. Masked sets are
/// meant for in-memory training, not for re-archiving.
pub fn mask_windows(set: &WindowSet, mask: &FeatureMask) -> WindowSet {
    let user_rows = mask.user_row_indices(set.spec.gamma);
    let codiner_rows = mask.codiner_row_indices();
    let windows = set
        .windows
        .iter()
        .map(|w| LabeledWindow {
            session_id: w.session_id.clone(),
            anchor_ms: w.anchor_ms,
            label: w.label,
            user: select_rows(&w.user, &user_rows),
            codiner_a: select_rows(&w.codiner_a, &codiner_rows),
            codiner_b: select_rows(&w.codiner_b, &codiner_rows),
        })
        .collect();
    WindowSet {
        spec: set.spec.clone(),
        user_seat: set.user_seat,
        windows,
        drops: set.drops.clone(),
    }
}

/// Model spec matching mask-narrowed windows.
pub fn masked_model_spec(
    kind: ModelKind,
    window_spec: &WindowSpec,
    mask: &FeatureMask,
    init_seed: u64,
) -> Result<ModelSpec, ModelError> {
    let codiner_rows = mask.codiner_row_indices().len();
    if codiner_rows == 0 {
        return Err(ModelError::InvalidSpec(
            "mask removes every perception feature; nothing left to model".into(),
        ));
    }
    let mut spec = ModelSpec::for_windows(kind, window_spec, init_seed);
    spec.user_rows = mask.user_row_indices(window_spec.gamma).len();
    spec.codiner_rows = codiner_rows;
    spec.bite_rows = if mask.bite { 2 * window_spec.gamma } else { 0 };
    spec.validate()?;
    Ok(spec)
}

/// One knockout's cross-validated outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mask: FeatureMask,
    pub label: String,
    pub report: CvReport,
}

/// Cross-validates `kind` under each mask. Every row reuses the same
/// sessions and run seed, so rows differ only by the withheld features.
pub fn run_ablation(
    sets: &[WindowSet],
    kind: ModelKind,
    masks: &[FeatureMask],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<AblationRow>, TrainError> {
    assert!(!sets.is_empty(), "ablation needs at least one session");
    let window_spec = &sets[0].spec;
    let mut rows = Vec::with_capacity(masks.len());
    for mask in masks {
        let template = masked_model_spec(kind, window_spec, mask, seed)?;
        let masked: Vec<WindowSet> = sets.iter().map(|s| mask_windows(s, mask)).collect();
        let report = run_loso(&masked, &template, cfg, seed)?;
        rows.push(AblationRow { mask: *mask, label: mask.label(), report });
    }
    Ok(rows)
}

/// Writes the knockout table as CSV: one row per mask, mean metrics.
pub fn write_ablation_csv<W: std::io::Write>(
    rows: &[AblationRow],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "mask,kind,folds,accuracy,precision,recall,f1,mcc,nmcc")?;
    for row in rows {
        let m = row.report.mean();
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            row.label,
            row.report.kind,
            row.report.folds.len(),
            m.accuracy,
            m.precision,
            m.recall,
            m.f1,
            m.mcc,
            m.nmcc
        )?;
    }
    Ok(())
}
