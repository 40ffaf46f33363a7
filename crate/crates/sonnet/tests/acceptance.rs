//! Release gate: every core guarantee of the crate, checked end to end at
//! its stated tolerance. Each test prints one `criterion N: PASS` line;
//! a failed assertion is the corresponding FAIL line.
//!
//! Criteria 1–10 run on synthetic data and finish quickly. The last two
//! checks against the Human-Human Commensality Dataset (HHCD) activate
//! only when `HHCD_DIR` points at the dataset (one directory per session,
//! each holding `annotations.csv` and, for criterion 11, `features.csv`);
//! criterion 11 is `#[ignore]`d because it trains full-size models for
//! hours.

use ndarray::{Array1, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sonnet::data::{
    generate_synthetic_session, AnnotationEvent, EventKind, EventValue, FeatureStream,
    LabelCoupling, SessionAnnotations, Seat, SyntheticConfig,
};
use sonnet::features::{extract_windows, WindowSet, WindowSpec};
use sonnet::model::{
    build_model, Adam, BiteModel, ModelKind, ModelSpec, SonnetHyper, SonnetModel, TcnHyper,
    WindowBatch,
};
use sonnet::replay::{fixed_interval_wait, run_strategy, RobotTimingParams, Strategy, StrategyConfig};
use sonnet::stats::{annotation_stats, eating_rate, gap_stats};
use sonnet::train::{derive_seed, run_loso, Confusion, TrainConfig};
use std::time::{Duration, Instant};

fn assert_within(elapsed: Duration, limit: Duration, what: &str) {
    assert!(
        elapsed <= limit,
        "{what} took {elapsed:.2?}, over the {limit:.2?} budget"
    );
}

// --- criterion 1 -----------------------------------------------------------

/// Brute-force confusion counting, written independently of the library:
/// integer tallies, the same ≥ 0.5 decision rule, 0 on empty denominators.
fn oracle_metrics(scores: &[f64], labels: &[f64]) -> (f64, f64, f64, f64, f64) {
    let (mut tp, mut fp, mut tn, mut fne) = (0u64, 0u64, 0u64, 0u64);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= 0.5, y >= 0.5) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fne += 1,
        }
    }
    let n = (tp + fp + tn + fne) as f64;
    let accuracy = if n == 0.0 { 0.0 } else { (tp + tn) as f64 / n };
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fne == 0 { 0.0 } else { tp as f64 / (tp + fne) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let (tpf, fpf, tnf, fnf) = (tp as f64, fp as f64, tn as f64, fne as f64);
    let denom = ((tpf + fpf) * (tpf + fnf) * (tnf + fpf) * (tnf + fnf)).sqrt();
    let mcc = if denom == 0.0 { 0.0 } else { (tpf * tnf - fpf * fnf) / denom };
    (accuracy, precision, recall, f1, mcc)
}

#[test]
fn c01_metrics_match_a_bruteforce_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC1);
    let mut always_feed_checked = 0usize;

    for case in 0..1000 {
        let len = rng.random_range(1..=500);
        let base_rate: f64 = rng.random();
        let scores: Vec<f64> = (0..len).map(|_| rng.random()).collect();
        let labels: Vec<f64> =
            (0..len).map(|_| f64::from(rng.random::<f64>() < base_rate)).collect();

        let lib = Confusion::from_scores(
            &Array1::from_vec(scores.clone()),
            &Array1::from_vec(labels.clone()),
        )
        .summary();
        let (acc, prec, rec, f1, mcc) = oracle_metrics(&scores, &labels);

        assert_eq!(lib.accuracy, acc, "case {case}: accuracy");
        assert_eq!(lib.precision, prec, "case {case}: precision");
        assert_eq!(lib.recall, rec, "case {case}: recall");
        assert_eq!(lib.f1, f1, "case {case}: F1");
        assert!((lib.mcc - mcc).abs() <= 1e-12, "case {case}: mcc {} vs {mcc}", lib.mcc);
        assert!(
            (lib.nmcc - (mcc + 1.0) / 2.0).abs() <= 1e-12,
            "case {case}: nmcc {} vs {}",
            lib.nmcc,
            (mcc + 1.0) / 2.0
        );

        // The always-feed baseline scores every window 1.0; on any labels
        // with both classes present its normalized MCC is exactly 0.5.
        if labels.iter().any(|&y| y == 1.0) && labels.iter().any(|&y| y == 0.0) {
            let ones = Array1::ones(labels.len());
            let nmcc = Confusion::from_scores(&ones, &Array1::from_vec(labels.clone())).nmcc();
            assert_eq!(nmcc, 0.5, "case {case}: always-feed nMCC must be exactly 0.5");
            always_feed_checked += 1;
        }
    }
    assert!(always_feed_checked > 500, "mixed-class vectors should dominate the sample");

    // And the baseline model itself emits those all-ones scores.
    let spec = ModelSpec::for_windows(
        ModelKind::AlwaysFeed,
        &WindowSpec { k_seconds: 1.0, fps: 4, gamma: 1, min_gap_to_positive_s: 0.0 },
        0,
    );
    let model = build_model(&spec).unwrap();
    let batch = WindowBatch {
        user: Array3::zeros((3, spec.user_rows, spec.frames)),
        codiner_a: Array3::zeros((3, spec.codiner_rows, spec.frames)),
        codiner_b: Array3::zeros((3, spec.codiner_rows, spec.frames)),
        bite_rows: spec.bite_rows,
    };
    assert_eq!(model.predict(&batch).unwrap().to_vec(), vec![1.0; 3]);

    assert_within(start.elapsed(), Duration::from_secs(10), "criterion 1");
    println!(
        "criterion 1: PASS — 1000 random vectors match the oracle ({always_feed_checked} \
         always-feed checks), in {:.2?}",
        start.elapsed()
    );
}

// --- criterion 2 -----------------------------------------------------------

#[test]
fn c02_fixed_interval_wait_matches_hand_derivation() {
    let wait = fixed_interval_wait(&RobotTimingParams {
        human_enter_to_lift_s: 9.9,
        robot_speed_factor: 5.0,
        acquisition_to_wait_s: 5.0,
    })
    .unwrap();
    assert_eq!(wait, 44.5, "9.9 × 5 − 5 must equal 44.5 exactly");
    assert_eq!(fixed_interval_wait(&RobotTimingParams::default()).unwrap(), 44.5);
    println!("criterion 2: PASS — fixed-interval wait(9.9, 5, 5) = 44.5 exactly");
}

// --- criterion 3 -----------------------------------------------------------

/// Window extraction re-derived from its definitions with plain loops:
/// positives end at each of the user's food-lifted onsets, negatives end
/// half a window past the midpoint between consecutive lifts, and a
/// candidate survives only with a full window of sufficiently dense
/// frames on every channel, no disruption overlap, and (negatives) no
/// lift within the guard distance.
fn oracle_anchors(
    annotations: &SessionAnnotations,
    streams: &[FeatureStream],
    user_seat: Seat,
    spec: &WindowSpec,
) -> Vec<(u64, bool)> {
    let mut lifts: Vec<u64> = annotations
        .events_for(user_seat)
        .iter()
        .filter(|e| e.kind == EventKind::FoodLifted)
        .map(|e| e.start_ms)
        .collect();
    lifts.sort_unstable();

    let span_ms = (spec.k_seconds * 1000.0).round() as u64;
    let frames = (spec.k_seconds * f64::from(spec.fps)).round() as usize;
    let max_span_ms = span_ms + 2 * (1000_u64).div_ceil(u64::from(spec.fps));
    let gap_ms = (spec.min_gap_to_positive_s * 1000.0).round() as u64;

    let mut disruptions = Vec::new();
    for seat in Seat::all() {
        for e in annotations.events_for(seat) {
            if e.kind == EventKind::Disruption {
                disruptions.push((e.start_ms, e.end_ms));
            }
        }
    }

    let mut candidates: Vec<(u64, bool)> = lifts.iter().map(|&l| (l, true)).collect();
    for pair in lifts.windows(2) {
        candidates.push(((pair[0] + pair[1]) / 2 + span_ms / 2, false));
    }

    let mut kept = Vec::new();
    'next: for (anchor, label) in candidates {
        let win_start = anchor.saturating_sub(span_ms);
        for stream in streams {
            // All frame times strictly before the anchor, by linear scan.
            let before: Vec<u64> =
                stream.frames.iter().map(|f| f.t_ms).filter(|&t| t < anchor).collect();
            if before.len() < frames {
                continue 'next;
            }
            if anchor - before[before.len() - frames] > max_span_ms {
                continue 'next;
            }
        }
        if disruptions.iter().any(|&(s, e)| win_start < e && s < anchor) {
            continue;
        }
        if !label {
            let lo = win_start.saturating_sub(gap_ms);
            let hi = anchor + gap_ms;
            if lifts.iter().any(|&l| lo < l && l < hi) {
                continue;
            }
        }
        kept.push((anchor, label));
    }
    kept.sort_unstable();
    kept
}

#[test]
fn c03_window_extraction_matches_a_bruteforce_oracle() {
    let start = Instant::now();
    let couplings = [
        LabelCoupling::None,
        LabelCoupling::CoDiner,
        LabelCoupling::UserPrivate,
        LabelCoupling::Both,
    ];
    let specs = [
        WindowSpec::default(),
        WindowSpec { k_seconds: 4.0, fps: 10, gamma: 2, min_gap_to_positive_s: 2.0 },
        WindowSpec { k_seconds: 3.0, fps: 12, gamma: 1, min_gap_to_positive_s: 0.5 },
    ];

    let mut total_windows = 0usize;
    for i in 0..50u64 {
        let spec = specs[(i % 3) as usize];
        let cfg = SyntheticConfig {
            seed: derive_seed(0xACC3, i),
            session_id: Some(format!("oracle_{i:02}")),
            duration_s: 180.0 + (i % 5) as f64 * 60.0,
            fps: spec.fps,
            coupling: couplings[(i % 4) as usize],
            ..SyntheticConfig::default()
        };
        let mut session = generate_synthetic_session(&cfg).unwrap();

        // Exercise the drop paths too: some sessions get a disruption
        // spliced in, others lose a stretch of co-diner frames.
        if i % 4 == 1 {
            let mid = session.annotations.duration_ms / 2;
            session.annotations.events[1].push(AnnotationEvent::new(
                EventKind::Disruption,
                EventValue::LightOff,
                mid,
                mid + 8_000,
            ));
            session.annotations.sort_events();
        }
        if i % 4 == 3 {
            let hole = session.annotations.duration_ms / 3;
            session.streams[2].frames.retain(|f| f.t_ms < hole || f.t_ms >= hole + 3_000);
        }

        let set =
            extract_windows(&session.annotations, &session.streams, session.user_seat, &spec)
                .unwrap();
        let mut got: Vec<(u64, bool)> =
            set.windows.iter().map(|w| (w.anchor_ms, w.label)).collect();
        got.sort_unstable();

        let want = oracle_anchors(&session.annotations, &session.streams, session.user_seat, &spec);
        assert_eq!(
            got, want,
            "session {i}: extracted anchors diverge from the brute-force oracle"
        );
        let want_pos = want.iter().filter(|&&(_, l)| l).count();
        assert_eq!(set.positives(), want_pos, "session {i}: positive count");
        assert_eq!(set.negatives(), want.len() - want_pos, "session {i}: negative count");
        total_windows += want.len();
    }
    assert!(total_windows > 200, "oracle corpus too small to be meaningful: {total_windows}");

    assert_within(start.elapsed(), Duration::from_secs(30), "criterion 3");
    println!(
        "criterion 3: PASS — anchors and counts match on 50 sessions ({total_windows} windows) \
         in {:.2?}",
        start.elapsed()
    );
}

// --- criterion 4 -----------------------------------------------------------

fn random_batch(spec: &ModelSpec, n: usize, rng: &mut ChaCha8Rng) -> WindowBatch {
    let mut fill = |rows: usize| {
        Array3::from_shape_simple_fn((n, rows, spec.frames), || rng.random_range(-1.0..1.0))
    };
    let user = fill(spec.user_rows);
    let codiner_a = fill(spec.codiner_rows);
    let codiner_b = fill(spec.codiner_rows);
    WindowBatch { user, codiner_a, codiner_b, bite_rows: spec.bite_rows }
}

#[test]
fn c04_couplet_models_are_blind_to_user_perception_rows() {
    let start = Instant::now();
    let window_spec = WindowSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC4);

    for kind in [ModelKind::CoupletSonnet, ModelKind::CoupletTcn] {
        let spec = ModelSpec::for_windows(kind, &window_spec, 41);
        let model = build_model(&spec).unwrap();
        let batch = random_batch(&spec, 100, &mut rng);
        let baseline = model.predict(&batch).unwrap();

        // Perturb every user pose/gaze/speaking row; the bite block at the
        // tail is a legitimate couplet input and stays put.
        let mut perturbed = batch.clone();
        let perception = spec.user_rows - spec.bite_rows;
        for v in perturbed.user.slice_mut(ndarray::s![.., ..perception, ..]) {
            *v += rng.random_range(-1.0..1.0);
        }
        let after = model.predict(&perturbed).unwrap();
        assert_eq!(
            baseline.to_vec(),
            after.to_vec(),
            "{kind}: user perception rows must not reach the score at all"
        );

        // Sanity: the same perturbation on a channel the model *does* see
        // moves the scores, so the blindness check is not vacuous.
        let mut codiner_moved = batch.clone();
        for v in codiner_moved.codiner_a.iter_mut() {
            *v += rng.random_range(-1.0..1.0);
        }
        let moved = model.predict(&codiner_moved).unwrap();
        assert_ne!(
            baseline.to_vec(),
            moved.to_vec(),
            "{kind}: co-diner perturbation should change scores"
        );
    }

    assert_within(start.elapsed(), Duration::from_secs(60), "criterion 4");
    println!(
        "criterion 4: PASS — 100-window user-channel perturbations change couplet scores by \
         exactly 0, in {:.2?}",
        start.elapsed()
    );
}

// --- criterion 5 -----------------------------------------------------------

#[test]
fn c05_interleaving_tunnels_mix_codiner_input_into_the_user_channel() {
    let start = Instant::now();
    let window_spec = WindowSpec { k_seconds: 2.0, fps: 8, gamma: 2, min_gap_to_positive_s: 0.0 };
    let mut spec = ModelSpec::for_windows(ModelKind::TripletSonnet, &window_spec, 51);
    spec.sonnet = SonnetHyper { filters: [6, 8, 10], kernel: 5, hidden: 16 };

    let mut rng = ChaCha8Rng::seed_from_u64(0xACC5);
    let mut model = SonnetModel::new(spec.clone());

    // One gradient step so no weight sits at an initialization artifact.
    let batch = random_batch(&spec, 8, &mut rng);
    let targets = Array1::from_shape_fn(8, |_| f64::from(rng.random::<bool>()));
    model.train_batch(&batch, &targets).unwrap();
    Adam::new(1e-3).step(&mut model);

    let mut mixed = 0usize;
    for _ in 0..100 {
        let single = random_batch(&spec, 1, &mut rng);
        let (_, blocks) = model.forward_eval(&single);

        // Perturb only the first co-diner's input.
        let mut poked = single.clone();
        for v in poked.codiner_a.iter_mut() {
            *v += rng.random_range(-0.5..0.5);
        }
        let (_, blocks_poked) = model.forward_eval(&poked);

        // The user tower's convolution never sees that channel, so any
        // change in the user channel's first-block output went through the
        // interleaving tunnel.
        let max_change = blocks[0][0]
            .iter()
            .zip(blocks_poked[0][0].iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if max_change > 0.0 {
            mixed += 1;
        }
    }
    assert!(mixed >= 99, "tunnel mixing reached the user channel in only {mixed}/100 trials");

    assert_within(start.elapsed(), Duration::from_secs(120), "criterion 5");
    println!(
        "criterion 5: PASS — co-diner perturbations reach the user channel in {mixed}/100 \
         trials, in {:.2?}",
        start.elapsed()
    );
}

// --- criterion 6 -----------------------------------------------------------

#[test]
fn c06_analytic_gradients_match_central_finite_differences() {
    let start = Instant::now();
    let window_spec = WindowSpec { k_seconds: 1.0, fps: 8, gamma: 1, min_gap_to_positive_s: 0.0 };
    let mut spec = ModelSpec::for_windows(ModelKind::TripletSonnet, &window_spec, 61);
    spec.sonnet = SonnetHyper { filters: [3, 3, 4], kernel: 5, hidden: 5 };

    let mut rng = ChaCha8Rng::seed_from_u64(0xACC6);
    let batch = random_batch(&spec, 4, &mut rng);
    let targets = Array1::from_shape_fn(4, |_| f64::from(rng.random::<bool>()));

    // Analytic gradients at the freshly initialized parameter point.
    let mut model = build_model(&spec).unwrap();
    model.train_batch(&batch, &targets).unwrap();
    let mut analytic: Vec<(usize, usize, f64)> = Vec::new();
    let mut tensor = 0usize;
    model.visit_params(&mut |p, g| {
        for idx in [0, p.len() / 2, p.len() - 1] {
            analytic.push((tensor, idx, g[idx]));
        }
        tensor += 1;
    });
    let tensors = tensor;

    // Central differences on a probe built from the same seed (identical
    // initial parameters). Batch-statistic normalization keeps the
    // training-mode loss a pure function of the parameters, so reusing one
    // probe across evaluations is sound.
    let mut probe = build_model(&spec).unwrap();
    let h = 1e-5;
    let mut loss_with_offset = |tensor: usize, idx: usize, delta: f64| -> f64 {
        let mut at = 0usize;
        probe.visit_params(&mut |p, _| {
            if at == tensor {
                p[idx] += delta;
            }
            at += 1;
        });
        let loss = probe.train_batch(&batch, &targets).unwrap();
        let mut at = 0usize;
        probe.visit_params(&mut |p, _| {
            if at == tensor {
                p[idx] -= delta;
            }
            at += 1;
        });
        loss
    };

    let mut worst = 0.0_f64;
    for &(tensor, idx, grad) in &analytic {
        let plus = loss_with_offset(tensor, idx, h);
        let minus = loss_with_offset(tensor, idx, -h);
        let numeric = (plus - minus) / (2.0 * h);
        let rel = (grad - numeric).abs() / grad.abs().max(numeric.abs()).max(1e-4);
        worst = worst.max(rel);
        assert!(
            rel < 1e-3,
            "tensor {tensor}[{idx}]: analytic {grad:.6e} vs numeric {numeric:.6e} (rel {rel:.2e})"
        );
    }

    assert_within(start.elapsed(), Duration::from_secs(120), "criterion 6");
    println!(
        "criterion 6: PASS — {} sampled gradients across {tensors} tensors match finite \
         differences (worst rel err {worst:.2e}) in {:.2?}",
        analytic.len(),
        start.elapsed()
    );
}

// --- criterion 7 -----------------------------------------------------------

fn learnability_sets(coupling: LabelCoupling, spec: &WindowSpec, seed: u64) -> Vec<WindowSet> {
    (0..6u64)
        .map(|i| {
            let session = generate_synthetic_session(&SyntheticConfig {
                seed: derive_seed(seed, i),
                session_id: Some(format!("learn_{i:02}")),
                duration_s: 420.0,
                fps: spec.fps,
                coupling,
                ..SyntheticConfig::default()
            })
            .unwrap();
            extract_windows(&session.annotations, &session.streams, session.user_seat, spec)
                .unwrap()
        })
        .collect()
}

fn reduced_spec(kind: ModelKind, window_spec: &WindowSpec) -> ModelSpec {
    let mut spec = ModelSpec::for_windows(kind, window_spec, 0);
    spec.sonnet = SonnetHyper { filters: [8, 12, 16], kernel: 5, hidden: 32 };
    spec.tcn = TcnHyper { filters: 16, kernel: 9, dilations: vec![1, 2, 4], hidden: 32 };
    spec
}

#[test]
fn c07_learnability_separates_social_from_private_cues() {
    let start = Instant::now();
    // Four seconds of context at 8 fps: long enough to contain the social
    // cue that precedes each bite, small enough to train in seconds.
    let window_spec = WindowSpec { k_seconds: 4.0, fps: 8, gamma: 4, min_gap_to_positive_s: 0.0 };
    let train_cfg = TrainConfig {
        learning_rate: 1e-3,
        batch_size: 32,
        max_epochs: 60,
        patience: 12,
        shuffle_seed: 0,
    };

    // Bites cued by the co-diners' joint speech: visible to couplet models.
    let social = learnability_sets(LabelCoupling::CoDiner, &window_spec, 0xC0D1);
    let couplet_social = run_loso(
        &social,
        &reduced_spec(ModelKind::CoupletSonnet, &window_spec),
        &train_cfg,
        71,
    )
    .unwrap()
    .mean();
    assert!(
        couplet_social.nmcc >= 0.9,
        "couplet CNN should read co-diner-cued bites: nMCC {:.3} < 0.9",
        couplet_social.nmcc
    );

    // Bites telegraphed only in the user's own channel: invisible to
    // couplets, readable by the triplet.
    let private = learnability_sets(LabelCoupling::UserPrivate, &window_spec, 0x9817);
    let mut private_nmcc = std::collections::HashMap::new();
    for kind in [ModelKind::CoupletSonnet, ModelKind::CoupletTcn, ModelKind::TripletSonnet] {
        let mean = run_loso(&private, &reduced_spec(kind, &window_spec), &train_cfg, 72)
            .unwrap()
            .mean();
        private_nmcc.insert(kind, mean.nmcc);
    }
    assert!(
        private_nmcc[&ModelKind::CoupletSonnet] <= 0.6,
        "couplet CNN cannot see user-private cues: nMCC {:.3} > 0.6",
        private_nmcc[&ModelKind::CoupletSonnet]
    );
    assert!(
        private_nmcc[&ModelKind::CoupletTcn] <= 0.6,
        "couplet TCN cannot see user-private cues: nMCC {:.3} > 0.6",
        private_nmcc[&ModelKind::CoupletTcn]
    );
    assert!(
        private_nmcc[&ModelKind::TripletSonnet] >= 0.85,
        "triplet CNN should read user-private cues: nMCC {:.3} < 0.85",
        private_nmcc[&ModelKind::TripletSonnet]
    );

    assert_within(start.elapsed(), Duration::from_secs(900), "criterion 7");
    println!(
        "criterion 7: PASS — social cues: couplet nMCC {:.3}; private cues: couplet {:.3}/{:.3}, \
         triplet {:.3}; in {:.2?}",
        couplet_social.nmcc,
        private_nmcc[&ModelKind::CoupletSonnet],
        private_nmcc[&ModelKind::CoupletTcn],
        private_nmcc[&ModelKind::TripletSonnet],
        start.elapsed()
    );
}

// --- criterion 8 -----------------------------------------------------------

#[test]
fn c08_default_cnn_parameter_count_is_matched_to_the_tcn() {
    let window_spec = WindowSpec::default();
    let sonnet_params = build_model(&ModelSpec::for_windows(
        ModelKind::TripletSonnet,
        &window_spec,
        0,
    ))
    .unwrap()
    .param_count();
    let tcn = ModelSpec::for_windows(ModelKind::TripletTcn, &window_spec, 0);
    assert_eq!(tcn.tcn.filters, 50, "the triplet TCN defaults to 50 filters");
    let tcn_params = build_model(&tcn).unwrap().param_count();

    let ratio = (sonnet_params as f64 - tcn_params as f64).abs() / tcn_params as f64;
    assert!(
        ratio <= 0.15,
        "parameter counts diverge: CNN {sonnet_params} vs TCN {tcn_params} ({:.1}%)",
        100.0 * ratio
    );
    println!(
        "criterion 8: PASS — CNN {sonnet_params} vs TCN {tcn_params} parameters \
         ({:.2}% apart)",
        100.0 * ratio
    );
}

// --- criterion 9 -----------------------------------------------------------

#[test]
fn c09_fixed_interval_replay_schedule_and_byte_determinism() {
    let start = Instant::now();
    let cfg = StrategyConfig {
        strategy: Strategy::FixedInterval,
        transfer_s: 0.0,
        ..StrategyConfig::default()
    };

    let run_once = || {
        let session = generate_synthetic_session(&SyntheticConfig {
            seed: 0xACC9,
            session_id: Some("replay_200s".into()),
            duration_s: 200.0,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let log = run_strategy(
            &session.annotations,
            &session.streams,
            session.user_seat,
            None,
            &cfg,
        )
        .unwrap();
        let mut bytes = Vec::new();
        log.write_jsonl(&mut bytes).unwrap();
        (log.feed_triggers_ms(), bytes)
    };

    let (triggers, bytes_first) = run_once();
    assert_eq!(
        triggers,
        vec![44_500, 89_000, 133_500, 178_000],
        "200 s at a 44.5 s wait and zero transfer must feed at 44.5/89/133.5/178"
    );
    let (_, bytes_second) = run_once();
    assert_eq!(bytes_first, bytes_second, "decision logs must be byte-identical across runs");

    assert_within(start.elapsed(), Duration::from_secs(5), "criterion 9");
    println!(
        "criterion 9: PASS — schedule {{44.5, 89.0, 133.5, 178.0}} s, {} byte log reproduced \
         exactly, in {:.2?}",
        bytes_first.len(),
        start.elapsed()
    );
}

// --- criterion 10 ----------------------------------------------------------

/// Five hand-checkable events: one full fork bite and two mouth-opens.
fn toy_session() -> SessionAnnotations {
    let mut s = SessionAnnotations::new("toy", 120_000);
    s.events[0] = vec![
        AnnotationEvent::new(EventKind::FoodEntered, EventValue::Fork, 10_000, 10_400),
        AnnotationEvent::new(EventKind::FoodLifted, EventValue::Fork, 12_000, 12_400),
        AnnotationEvent::new(EventKind::FoodToMouth, EventValue::Fork, 13_500, 14_300),
        AnnotationEvent::new(EventKind::MouthOpen, EventValue::None, 20_000, 20_500),
        AnnotationEvent::new(EventKind::MouthOpen, EventValue::None, 60_000, 60_700),
    ];
    s
}

#[test]
fn c10_analytics_match_hand_computed_values() {
    let start = Instant::now();
    let sessions = [toy_session()];
    let report = annotation_stats(&sessions);

    // Counts, straight off the event list.
    assert_eq!(report.total_events(), 5);
    assert_eq!(report.counts[&EventKind::MouthOpen].total, 2);
    assert_eq!(report.counts[&EventKind::FoodEntered].by_value[&EventValue::Fork], 1);

    // Durations: mouth_open spans 0.5 s and 0.7 s; food_to_mouth 0.8 s.
    let mouth = report.durations[&EventKind::MouthOpen];
    assert_eq!(mouth.count, 2);
    assert_eq!(mouth.mean_s, (0.5 + 0.7) / 2.0);
    assert_eq!(
        mouth.std_s,
        (((0.5 - 0.6_f64).powi(2) + (0.7 - 0.6_f64).powi(2)) / 2.0).sqrt()
    );
    let handover = report.durations[&EventKind::FoodToMouth];
    assert_eq!((handover.count, handover.mean_s, handover.std_s), (1, 0.8, 0.0));
    // Instantaneous marks carry no meaningful extent.
    assert!(!report.durations.contains_key(&EventKind::FoodEntered));
    assert!(!report.durations.contains_key(&EventKind::FoodLifted));

    // Gaps: 10.0 → 12.0 → 13.5 s starts, mouth-opens at 20.0 and 60.0 s.
    let enter_to_lift =
        gap_stats(&sessions, EventKind::FoodEntered, EventKind::FoodLifted).unwrap();
    assert_eq!((enter_to_lift.count, enter_to_lift.mean_s, enter_to_lift.std_s), (1, 2.0, 0.0));
    let lift_to_mouth =
        gap_stats(&sessions, EventKind::FoodLifted, EventKind::FoodToMouth).unwrap();
    assert_eq!((lift_to_mouth.count, lift_to_mouth.mean_s, lift_to_mouth.std_s), (1, 1.5, 0.0));
    let open_to_open = gap_stats(&sessions, EventKind::MouthOpen, EventKind::MouthOpen).unwrap();
    assert_eq!((open_to_open.count, open_to_open.mean_s, open_to_open.std_s), (1, 40.0, 0.0));

    // Eating rate: one bite in minute 0 of a 2-minute session.
    let seat = Seat::new(1).unwrap();
    let curve = eating_rate(&sessions[0], seat, false).unwrap();
    assert_eq!(curve.per_minute, vec![Some(1.0), Some(0.0)]);
    let normalized = eating_rate(&sessions[0], seat, true).unwrap();
    assert_eq!(normalized.per_minute, vec![Some(1.0), Some(0.0)]);
    assert_eq!(normalized.sum(), 1.0);

    assert_within(start.elapsed(), Duration::from_secs(1), "criterion 10 (toy)");

    // Real-dataset spot check, active only when the corpus is on disk.
    match hhcd_sessions() {
        Some(sessions) => {
            let report = annotation_stats(&sessions);
            let bite = report.durations[&EventKind::FoodToMouth];
            assert!(
                (bite.mean_s - 0.9).abs() <= 0.05,
                "HHCD food_to_mouth duration mean {:.3} s should be 0.9 ± 0.05",
                bite.mean_s
            );
            let lift_gap =
                gap_stats(&sessions, EventKind::FoodLifted, EventKind::FoodToMouth).unwrap();
            assert!(
                (lift_gap.mean_s - 1.8).abs() <= 0.1,
                "HHCD lift→mouth gap mean {:.3} s should be 1.8 ± 0.1",
                lift_gap.mean_s
            );
            println!(
                "criterion 10: PASS — toy values exact; HHCD bite duration {:.3} s, lift→mouth \
                 {:.3} s",
                bite.mean_s, lift_gap.mean_s
            );
        }
        None => println!(
            "criterion 10: PASS — toy values exact (HHCD spot check skipped: set HHCD_DIR to \
             enable)"
        ),
    }
}

// --- criterion 11 ----------------------------------------------------------

fn hhcd_sessions() -> Option<Vec<SessionAnnotations>> {
    let root = std::env::var_os("HHCD_DIR")?;
    let mut sessions = Vec::new();
    let mut dirs: Vec<_> = std::fs::read_dir(root)
        .expect("HHCD_DIR must be a readable directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    for dir in dirs {
        sessions.extend(
            sonnet::data::parse_sessions(&dir.join("annotations.csv"))
                .expect("HHCD session must hold annotations.csv"),
        );
    }
    Some(sessions)
}

/// Full-size leave-one-session-out comparison on the real dataset. Takes
/// hours: run explicitly with
/// `HHCD_DIR=/path/to/hhcd cargo test --test acceptance -- --ignored`.
#[test]
#[ignore = "requires HHCD_DIR and hours of training"]
fn c11_real_dataset_loso_reproduces_reported_orderings() {
    let root = std::env::var_os("HHCD_DIR").expect(
        "set HHCD_DIR to the dataset root (one directory per session with annotations.csv and \
         features.csv)",
    );
    let spec = WindowSpec::default();
    let mut dirs: Vec<_> = std::fs::read_dir(&root)
        .expect("HHCD_DIR must be a readable directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();

    let mut sets = Vec::new();
    for dir in &dirs {
        let annotations = sonnet::data::parse_annotations(&dir.join("annotations.csv")).unwrap();
        let streams = sonnet::data::parse_feature_streams(&dir.join("features.csv")).unwrap();
        let user_seat = Seat::new(1).unwrap();
        sets.push(extract_windows(&annotations, &streams, user_seat, &spec).unwrap());
    }
    assert_eq!(sets.len(), 29, "the full corpus holds 29 sessions");

    let cfg = TrainConfig::default();
    let mut nmcc = std::collections::HashMap::new();
    for kind in [
        ModelKind::TripletSonnet,
        ModelKind::TripletTcn,
        ModelKind::CoupletSonnet,
        ModelKind::CoupletTcn,
    ] {
        let template = ModelSpec::for_windows(kind, &spec, 0);
        let report = run_loso(&sets, &template, &cfg, 2024).unwrap();
        nmcc.insert(kind, report.mean().nmcc);
    }

    assert!(
        nmcc[&ModelKind::TripletSonnet] > nmcc[&ModelKind::TripletTcn],
        "triplet CNN ({:.3}) should beat triplet TCN ({:.3})",
        nmcc[&ModelKind::TripletSonnet],
        nmcc[&ModelKind::TripletTcn]
    );
    assert!(
        nmcc[&ModelKind::CoupletSonnet] > nmcc[&ModelKind::CoupletTcn],
        "couplet CNN ({:.3}) should beat couplet TCN ({:.3})",
        nmcc[&ModelKind::CoupletSonnet],
        nmcc[&ModelKind::CoupletTcn]
    );
    assert!(
        (nmcc[&ModelKind::TripletSonnet] - 0.77).abs() <= 0.05,
        "triplet CNN nMCC {:.3} should land at 0.77 ± 0.05",
        nmcc[&ModelKind::TripletSonnet]
    );
    assert!(
        (nmcc[&ModelKind::CoupletSonnet] - 0.66).abs() <= 0.05,
        "couplet CNN nMCC {:.3} should land at 0.66 ± 0.05",
        nmcc[&ModelKind::CoupletSonnet]
    );
    println!(
        "criterion 11: PASS — triplet {:.3} > {:.3}, couplet {:.3} > {:.3}",
        nmcc[&ModelKind::TripletSonnet],
        nmcc[&ModelKind::TripletTcn],
        nmcc[&ModelKind::CoupletSonnet],
        nmcc[&ModelKind::CoupletTcn]
    );
}
