//! Train the multi-channel social CNN on synthetic windows and watch the
//! losses fall. Uses a scaled-down network and short windows so the run
//! finishes in seconds; the architecture is exactly the full-size one.
//!
//! ```sh
//! cargo run --release --example train_sonnet
//! ```

use sonnet::data::{LabelCoupling, SyntheticConfig};
use sonnet::features::{extract_windows_from_synthetic, WindowSpec};
use sonnet::model::{build_model, load_checkpoint, save_checkpoint, CheckpointMeta, ModelKind, ModelSpec, SonnetHyper};
use sonnet::train::{evaluate, session_val_split, train_model, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Short windows keep each forward pass small.
    let spec = WindowSpec { k_seconds: 2.0, fps: 8, gamma: 4, min_gap_to_positive_s: 0.0 };

    // A handful of sessions where the user's bites follow the co-diners'
    // behavior — the social signal the network is built to pick up.
    let mut windows = Vec::new();
    for i in 0..4u64 {
        let session = sonnet::data::generate_synthetic_session(&SyntheticConfig {
            seed: sonnet::train::derive_seed(99, i),
            session_id: Some(format!("train_{i:02}")),
            duration_s: 300.0,
            coupling: LabelCoupling::CoDiner,
            ..SyntheticConfig::default()
        })?;
        let set = extract_windows_from_synthetic(&session, &spec)?;
        windows.extend(set.windows);
    }
    let (train, val) = session_val_split(&windows);
    println!("{} training windows, {} validation windows", train.len(), val.len());

    let mut model_spec = ModelSpec::for_windows(ModelKind::TripletSonnet, &spec, 2024);
    model_spec.sonnet = SonnetHyper { filters: [8, 12, 16], kernel: 5, hidden: 32 };
    let mut model = build_model(&model_spec)?;
    println!("triplet CNN, {} parameters", model.param_count());

    let cfg = TrainConfig {
        learning_rate: 1e-3,
        batch_size: 32,
        max_epochs: 30,
        patience: 6,
        shuffle_seed: 7,
    };
    let report = train_model(model.as_mut(), &train, &val, &cfg)?;
    for record in &report.history {
        match record.val_loss {
            Some(v) => println!(
                "epoch {:>2}: train loss {:.4}, val loss {:.4}",
                record.epoch, record.train_loss, v
            ),
            None => println!("epoch {:>2}: train loss {:.4}", record.epoch, record.train_loss),
        }
    }
    println!(
        "best epoch {} (val loss {:.4}){}",
        report.best_epoch,
        report.best_val_loss.unwrap_or(f64::NAN),
        if report.stopped_early { ", stopped early" } else { "" }
    );

    let confusion = evaluate(model.as_ref(), &val)?;
    println!("validation: {}", confusion.summary());

    // Checkpoints restore bit-identically: same spec, same weights.
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.json");
    let meta = CheckpointMeta {
        epochs_trained: report.history.len(),
        best_val_loss: report.best_val_loss,
        train_seed: 7,
        note: "example checkpoint".into(),
    };
    save_checkpoint(&path, model.as_ref(), &meta)?;
    let (restored, meta_back) = load_checkpoint(&path)?;
    let again = evaluate(restored.as_ref(), &val)?;
    assert_eq!(again, confusion, "restored model scores identically");
    println!("checkpoint round trip ok ({} epochs recorded)", meta_back.epochs_trained);
    Ok(())
}
