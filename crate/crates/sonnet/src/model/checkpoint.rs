//! Model checkpoints: JSON files holding the spec, full state (weights and
//! normalization statistics), and training metadata. Values survive the
//! round trip bit-for-bit — JSON floats are written with shortest-exact
//! formatting — so a reloaded model predicts identically.

use super::{build_model, BiteModel, ModelError, ModelSpec};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

const CHECKPOINT_VERSION: u32 = 1;

/// Training provenance carried alongside the weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Epochs completed before the checkpoint (after best-epoch restore,
    /// the epoch the restored weights came from).
    pub epochs_trained: usize,
    pub best_val_loss: Option<f64>,
    /// Seed the training run was launched with.
    pub train_seed: u64,
    pub note: String,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    spec: ModelSpec,
    meta: CheckpointMeta,
    state: Vec<(String, Vec<f64>)>,
}

pub fn save_checkpoint(
    path: &Path,
    model: &dyn BiteModel,
    meta: &CheckpointMeta,
) -> Result<(), ModelError> {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        spec: model.spec().clone(),
        meta: meta.clone(),
        state: model.state(),
    };
    let writer = BufWriter::new(File::create(path)?);
    serde_json::to_writer(writer, &file).map_err(|e| ModelError::Corrupt(e.to_string()))
}

pub fn load_checkpoint(path: &Path) -> Result<(Box<dyn BiteModel>, CheckpointMeta), ModelError> {
    let reader = BufReader::new(File::open(path)?);
    let file: CheckpointFile =
        serde_json::from_reader(reader).map_err(|e| ModelError::Corrupt(e.to_string()))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(ModelError::Corrupt(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            file.version
        )));
    }
    let mut model = build_model(&file.spec)?;
    model.load_state(&file.state)?;
    Ok((model, file.meta))
}

#[cfg(test)]
mod tests {
    use super::super::tests::{tiny_batch, tiny_window_spec};
    use super::super::{build_model, Adam, ModelKind, ModelSpec};
    use super::*;

    fn trained_tiny_model() -> (Box<dyn BiteModel>, crate::model::WindowBatch) {
        let (batch, labels) = tiny_batch(50);
        let mut spec = ModelSpec::for_windows(ModelKind::CoupletSonnet, &tiny_window_spec(), 13);
        spec.sonnet.filters = [3, 4, 4];
        spec.sonnet.hidden = 6;
        let mut model = build_model(&spec).unwrap();
        let mut adam = Adam::new(1e-3);
        for _ in 0..3 {
            model.train_batch(&batch, &labels).unwrap();
            adam.step(model.as_mut());
        }
        (model, batch)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (model, batch) = trained_tiny_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let meta = CheckpointMeta {
            epochs_trained: 3,
            best_val_loss: Some(0.661234567890123),
            train_seed: 42,
            note: "unit test".into(),
        };
        save_checkpoint(&path, model.as_ref(), &meta).unwrap();

        let (loaded, meta2) = load_checkpoint(&path).unwrap();
        assert_eq!(meta2, meta);
        assert_eq!(loaded.spec(), model.spec());
        assert_eq!(loaded.predict(&batch).unwrap(), model.predict(&batch).unwrap());
    }

    #[test]
    fn corrupt_and_wrong_version_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(&path, b"{ not json").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(ModelError::Corrupt(_))));

        let (model, _) = trained_tiny_model();
        save_checkpoint(&path, model.as_ref(), &CheckpointMeta::default()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace("\"version\":1", "\"version\":9")).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(ModelError::Corrupt(_))));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            load_checkpoint(Path::new("/nonexistent/model.json")),
            Err(ModelError::Io(_))
        ));
    }
}
