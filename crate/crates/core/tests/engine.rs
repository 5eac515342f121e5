use lambdagnn_core::gnn::{dense_oracle_backward, dense_oracle_forward};
use lambdagnn_core::graph::{build_graph, symmetrize, Graph};
use lambdagnn_core::pipeline::*;
use lambdagnn_core::synth::synth_sbm;
use lambdagnn_core::tensor::{Matrix, OptimizerKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_data(n: usize, avg_degree: f64, feats: usize, classes: usize, seed: u64) -> TrainingData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = avg_degree / n as f64;
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let g = build_graph(&symmetrize(&edges).unwrap(), n).unwrap();
    let x = Matrix::from_fn(n, feats, |_, _| rng.random_range(-1.0f32..1.0));
    let labels = (0..n)
        .map(|_| rng.random_range(0..classes as u32))
        .collect();
    TrainingData::new(g, x, labels, classes).unwrap()
}

fn one_epoch(partitions: usize, intervals: usize, seed: u64) -> EngineConfig {
    EngineConfig {
        hidden: vec![8],
        partitions,
        intervals,
        seed,
        max_epochs: 1,
        capture_epoch: Some(0),
        ..Default::default()
    }
}

fn oracle(
    g: &Graph,
    data: &TrainingData,
    seed: u64,
    dims: &[usize],
) -> (Matrix<f64>, Vec<Matrix<f64>>) {
    let w: Vec<Matrix<f64>> = initial_weights(dims, seed)
        .unwrap()
        .iter()
        .map(|m| m.cast())
        .collect();
    let fwd = dense_oracle_forward(g, &data.features.cast(), &w).unwrap();
    let bwd = dense_oracle_backward(g, &fwd, &w, &data.labels, &data.train_mask).unwrap();
    (fwd.logits().clone(), bwd.weight_grads)
}

#[test]
fn pipe_forward_and_gradients_match_dense() {
    let shapes = [(1, 1), (1, 8), (2, 3), (3, 2), (4, 5), (2, 8)];
    for (i, &(parts, ivs)) in shapes.iter().enumerate() {
        let data = random_data(60 + 37 * i, 4.0, 6, 3, i as u64);
        let cfg = one_epoch(parts, ivs, 100 + i as u64);
        let report = run_epochs(&data, &cfg).unwrap();
        let cap = report.captured.unwrap();
        let (logits, grads) = oracle(&data.graph, &data, cfg.seed, &cfg.dims(6, 3));
        let err = cap.logits.relative_error(&logits);
        assert!(err <= 1e-5, "{parts}x{ivs}: logits rel err {err}");
        for (l, (a, b)) in cap.weight_grads.iter().zip(&grads).enumerate() {
            let err = a.relative_error(b);
            assert!(err <= 1e-5, "{parts}x{ivs}: layer {l} grad rel err {err}");
        }
    }
}

#[test]
fn fusion_and_remat_change_no_numbers() {
    let data = random_data(90, 5.0, 5, 4, 3);
    let base = run_epochs(&data, &one_epoch(2, 3, 9))
        .unwrap()
        .captured
        .unwrap();
    for (fuse, remat, ae) in [
        (true, false, false),
        (false, true, false),
        (true, true, true),
    ] {
        let cfg = EngineConfig {
            fuse,
            remat,
            apply_edge: ae,
            ..one_epoch(2, 3, 9)
        };
        let cap = run_epochs(&data, &cfg).unwrap().captured.unwrap();
        assert_eq!(cap, base, "fuse={fuse} remat={remat} ae={ae}");
    }
}

#[test]
fn apply_edge_runs_once_per_interval_layer_direction() {
    let data = random_data(40, 3.0, 4, 2, 5);
    let cfg = EngineConfig {
        apply_edge: true,
        hidden: vec![6, 6],
        intervals: 2,
        max_epochs: 2,
        ..Default::default()
    };
    let r = run_epochs(&data, &cfg).unwrap();
    // Forward AE on every layer, backward on every layer but the first.
    assert_eq!(r.apply_edge_executions, 2 * 2 * (3 + 2));
}

#[test]
fn deeper_models_match_dense() {
    let data = random_data(70, 4.0, 5, 3, 21);
    let cfg = EngineConfig {
        hidden: vec![7, 6],
        ..one_epoch(3, 2, 4)
    };
    let cap = run_epochs(&data, &cfg).unwrap().captured.unwrap();
    let (logits, grads) = oracle(&data.graph, &data, 4, &cfg.dims(5, 3));
    assert!(cap.logits.relative_error(&logits) <= 1e-5);
    for (a, b) in cap.weight_grads.iter().zip(&grads) {
        assert!(a.relative_error(b) <= 1e-5);
    }
}

#[test]
fn staleness_and_mixing_audits_hold() {
    let data = TrainingData::from_dataset(synth_sbm(4, 30, 0.2, 0.02, 1).unwrap()).unwrap();
    for s in [0, 1, 3] {
        let cfg = EngineConfig {
            mode: PipelineMode::Async { staleness: s },
            partitions: 2,
            intervals: 3,
            max_epochs: 15,
            record_mixing: true,
            ..Default::default()
        };
        let r = run_epochs(&data, &cfg).unwrap();
        assert!(r.min_staleness().unwrap() >= 0);
        assert!(r.max_staleness().unwrap() <= s as i64);
        assert!(r.max_epoch_gap <= s);
        assert!(r.mixing.rows_checked > 0);
        assert_eq!(r.mixing.mismatched, 0);
        assert_eq!(r.mixing.out_of_window, 0);
    }
}

#[test]
fn weight_versions_are_stashed_per_interval_epoch() {
    let data = TrainingData::from_dataset(synth_sbm(3, 40, 0.2, 0.02, 2).unwrap()).unwrap();
    let cfg = EngineConfig {
        mode: PipelineMode::Async { staleness: 2 },
        hidden: vec![8, 8],
        partitions: 2,
        intervals: 4,
        max_epochs: 10,
        ..Default::default()
    };
    let r = run_epochs(&data, &cfg).unwrap();
    assert!(r.broadcasts.iter().any(|b| b.in_flight_stashes > 0));
    for a in &r.weight_audit {
        assert_eq!(a.forward_version, a.backward_version, "{a:?}");
    }
}

#[test]
fn pipe_sees_only_current_epoch_values() {
    let data = random_data(80, 4.0, 4, 2, 8);
    let cfg = EngineConfig {
        partitions: 2,
        max_epochs: 6,
        ..Default::default()
    };
    let r = run_epochs(&data, &cfg).unwrap();
    assert_eq!(r.max_staleness(), Some(0));
    assert_eq!(r.min_staleness(), Some(0));
    assert_eq!(r.max_epoch_gap, 0);
    assert_eq!(r.epochs.len(), 6);
    assert_eq!(r.status, RunStatus::MaxEpochs);
}

#[test]
fn identical_configs_give_identical_reports() {
    let data = TrainingData::from_dataset(synth_sbm(4, 25, 0.2, 0.02, 4).unwrap()).unwrap();
    let cfg = EngineConfig {
        mode: PipelineMode::Async { staleness: 1 },
        partitions: 2,
        max_epochs: 8,
        optimizer: OptimizerKind::Sgd,
        ..Default::default()
    };
    let a = run_epochs(&data, &cfg).unwrap();
    let b = run_epochs(&data, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn training_reaches_target_on_separable_blocks() {
    let data = TrainingData::from_dataset(synth_sbm(4, 50, 0.15, 0.005, 6).unwrap()).unwrap();
    let cfg = EngineConfig {
        partitions: 2,
        max_epochs: 200,
        target_accuracy: Some(0.9),
        target_metric: TargetMetric::Train,
        ..Default::default()
    };
    let r = run_epochs(&data, &cfg).unwrap();
    assert_eq!(r.status, RunStatus::TargetReached);
    assert!(r
        .epochs
        .windows(2)
        .all(|w| w[1].completed_at_us > w[0].completed_at_us));
}

#[test]
fn plateau_patience_stops_early() {
    let data = random_data(50, 3.0, 4, 2, 12);
    let cfg = EngineConfig {
        max_epochs: 500,
        learning_rate: 1e-9,
        plateau_patience: Some(3),
        ..Default::default()
    };
    let r = run_epochs(&data, &cfg).unwrap();
    assert_eq!(r.status, RunStatus::Converged);
    assert_eq!(r.epochs.len(), 4);
}

#[test]
fn bad_configs_are_rejected() {
    let data = random_data(10, 2.0, 3, 2, 0);
    for cfg in [
        EngineConfig {
            partitions: 0,
            ..Default::default()
        },
        EngineConfig {
            intervals: 20,
            ..Default::default()
        },
        EngineConfig {
            hidden: vec![0],
            ..Default::default()
        },
        EngineConfig {
            assignment: Some(vec![0; 3]),
            ..Default::default()
        },
    ] {
        assert!(run_epochs(&data, &cfg).is_err());
    }
}
