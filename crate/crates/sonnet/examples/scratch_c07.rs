//! Scratch diagnostics for the learnability-separation tuning loop.
//! Not part of the curated examples; delete before release.

use sonnet::data::{generate_synthetic_session, LabelCoupling, SyntheticConfig};
use sonnet::features::{extract_windows, WindowSet, WindowSpec};
use sonnet::model::{build_model, ModelKind, ModelSpec, SonnetHyper, TcnHyper};
use sonnet::train::{evaluate, train_model, TrainConfig};
use std::time::Instant;

fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy)]
struct Gen {
    duration_s: f64,
    mean_talk_s: f64,
    mean_silence_s: f64,
    min_bite_gap_s: f64,
    mean_bite_gap_s: f64,
    detector_miss_rate: f64,
}

fn sets(coupling: LabelCoupling, spec: &WindowSpec, seed: u64, g: Gen) -> Vec<WindowSet> {
    (0..6u64)
        .map(|i| {
            let session = generate_synthetic_session(&SyntheticConfig {
                seed: derive_seed(seed, i),
                session_id: Some(format!("learn_{i:02}")),
                duration_s: g.duration_s,
                fps: spec.fps,
                coupling,
                mean_talk_s: g.mean_talk_s,
                mean_silence_s: g.mean_silence_s,
                min_bite_gap_s: g.min_bite_gap_s,
                mean_bite_gap_s: g.mean_bite_gap_s,
                detector_miss_rate: g.detector_miss_rate,
                ..SyntheticConfig::default()
            })
            .unwrap();
            extract_windows(&session.annotations, &session.streams, session.user_seat, spec)
                .unwrap()
        })
        .collect()
}

fn fold0(
    name: &str,
    all: &[WindowSet],
    kind: ModelKind,
    window_spec: &WindowSpec,
    sonnet: SonnetHyper,
    tcn: TcnHyper,
    cfg: &TrainConfig,
) {
    let t0 = Instant::now();
    // Mirror run_loso's fold 0 with outer seed 71: per-session val fifths,
    // fold-derived init and shuffle seeds.
    let mut spec = ModelSpec::for_windows(kind, window_spec, derive_seed(71, 0));
    spec.sonnet = sonnet;
    spec.tcn = tcn;
    let cfg = TrainConfig { shuffle_seed: derive_seed(71, 1), ..cfg.clone() };

    let mut tr: Vec<&sonnet::features::LabeledWindow> = Vec::new();
    let mut va: Vec<&sonnet::features::LabeledWindow> = Vec::new();
    for set in &all[1..] {
        let (t, v) = sonnet::train::session_val_split(&set.windows);
        tr.extend(t);
        va.extend(v);
    }
    let tr = tr;
    let held_out: Vec<_> = all[0].windows.iter().collect();

    let mut model = build_model(&spec).unwrap();
    let report = train_model(model.as_mut(), &tr, &va, &cfg).unwrap();
    let train_eval = evaluate(model.as_ref(), tr).unwrap();
    let held_eval = evaluate(model.as_ref(), &held_out).unwrap();
    println!(
        "{name}: {} train w, epochs {} (best {:?}), train nMCC {:.3}, held nMCC {:.3} \
         (tp {} fp {} tn {} fn {}), {:.1?}",
        tr.len(),
        report.history.len(),
        report.best_epoch,
        train_eval.nmcc(),
        held_eval.nmcc(),
        held_eval.true_pos,
        held_eval.false_pos,
        held_eval.true_neg,
        held_eval.false_neg,
        t0.elapsed()
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(String::as_str).unwrap_or("a");

    let window_spec = WindowSpec { k_seconds: 4.0, fps: 8, gamma: 4, min_gap_to_positive_s: 0.0 };
    let dense = Gen {
        duration_s: 600.0,
        mean_talk_s: 4.0,
        mean_silence_s: 6.0,
        min_bite_gap_s: 6.0,
        mean_bite_gap_s: 30.0,
        detector_miss_rate: 0.0,
    };
    let son = SonnetHyper { filters: [8, 12, 16], kernel: 5, hidden: 32 };
    let tcn = TcnHyper { filters: 16, kernel: 9, dilations: vec![1, 2, 4], hidden: 32 };

    if which == "a" {
        // Arm 1: dense talk, long sessions, negatives clear of lifts, fps 4.
        let g = Gen { duration_s: 900.0, ..dense };
        for (label, filters, hidden, lr, epochs, patience) in [
            ("d900/fps4/[8,12,16]/h32", [8, 12, 16], 32, 1e-3, 150, 30),
            ("d900/fps4/[12,16,20]/h32", [12, 16, 20], 32, 1e-3, 120, 25),
        ] {
            let ws = WindowSpec {
                k_seconds: 4.0,
                fps: 4,
                gamma: 4,
                min_gap_to_positive_s: 2.0,
            };
            let social = sets(LabelCoupling::CoDiner, &ws, 0xC0D1, g);
            let total: usize = social.iter().map(|s| s.windows.len()).sum();
            println!("  total windows {total}");
            let son_small = SonnetHyper { filters, kernel: 5, hidden };
            let cfg = TrainConfig {
                learning_rate: lr,
                batch_size: 32,
                max_epochs: epochs,
                patience,
                shuffle_seed: 0,
            };
            fold0(label, &social, ModelKind::CoupletSonnet, &ws, son_small, tcn.clone(), &cfg);
        }
    } else if which == "b" {
        // Arm 2: UserPrivate. Couplets must stay <= 0.6, triplet >= 0.85.
        let private = sets(LabelCoupling::UserPrivate, &window_spec, 0x9817, dense);
        for s in &private {
            println!("  {} pos / {} neg", s.positives(), s.negatives());
        }
        let cfg = TrainConfig {
            learning_rate: 2e-3,
            batch_size: 32,
            max_epochs: 100,
            patience: 20,
            shuffle_seed: 0,
        };
        fold0("couplet_sonnet", &private, ModelKind::CoupletSonnet, &window_spec, son.clone(), tcn.clone(), &cfg);
        fold0("couplet_tcn", &private, ModelKind::CoupletTcn, &window_spec, son.clone(), tcn.clone(), &cfg);
        fold0("triplet_sonnet", &private, ModelKind::TripletSonnet, &window_spec, son.clone(), tcn.clone(), &cfg);
    }
}
