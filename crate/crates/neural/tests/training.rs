use std::collections::BTreeMap;

use cvbench_neural::{
    evaluate_mse, train, Architecture, Checkpoint, Dataset, Network, Tensor, TrainConfig, OUTPUT_DIM,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative-motion samples of pedestrians walking at constant velocity:
/// seven equal input displacements, twelve equal target displacements.
fn constant_velocity(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let speed = rng.random_range(0.0..0.6);
        let heading = rng.random_range(0.0..std::f64::consts::TAU);
        let (dx, dy) = (speed * heading.cos(), speed * heading.sin());
        xs.push([dx, dy].repeat(7));
        ys.push([dx, dy].repeat(12));
    }
    Dataset::new(Tensor::from_rows(&xs).unwrap(), Tensor::from_rows(&ys).unwrap()).unwrap()
}

#[test]
fn learns_constant_velocity_data() {
    let train_set = constant_velocity(6000, 1);
    let val = constant_velocity(600, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut net = Network::new(Architecture::feed_forward(14), &mut rng);
    let history = train(&mut net, &train_set, Some(&val), &TrainConfig::default(), &mut rng).unwrap();
    assert_eq!(history.train_loss.len(), 35);
    assert_eq!(history.validation_loss.len(), 35);
    let final_val = *history.validation_loss.last().unwrap();
    assert!(final_val < 1e-4, "validation MSE {final_val:e}");
    assert!(history.final_train_loss().unwrap() < history.initial_train_loss);
    assert!((evaluate_mse(&net, &val).unwrap() - final_val).abs() < 1e-15);
}

#[test]
fn identical_seed_gives_identical_parameters() {
    let data = constant_velocity(300, 4);
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut net = Network::new(Architecture::recurrent_encoder(7, 0), &mut rng);
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let history = train(&mut net, &data, None, &cfg, &mut rng).unwrap();
        (net, history)
    };
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
}

#[test]
fn empty_training_set_is_a_config_error() {
    let empty = Dataset::new(Tensor::zeros(0, 14), Tensor::zeros(0, OUTPUT_DIM)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut net = Network::new(Architecture::feed_forward(14), &mut rng);
    let err = train(&mut net, &empty, None, &TrainConfig::default(), &mut rng).unwrap_err();
    assert!(matches!(err, cvbench_neural::NeuralError::Config(_)));
}

#[test]
fn invalid_train_config_is_rejected() {
    for cfg in [
        TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        },
        TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        },
    ] {
        assert!(cfg.validate().is_err());
    }
}

#[test]
fn checkpoint_reload_reproduces_predictions_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let net = Network::new(Architecture::recurrent_encoder(7, 4), &mut rng);
    let mut meta = BTreeMap::new();
    meta.insert("representation".to_string(), "relative".to_string());
    let ckpt = Checkpoint::new(&net, TrainConfig::default(), 123, meta);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    ckpt.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded, ckpt);
    let reloaded = loaded.network().unwrap();
    let x = Tensor::filled(3, 18, 0.3);
    assert_eq!(reloaded.forward(&x).unwrap(), net.forward(&x).unwrap());

    let bad = ckpt.to_json().unwrap().replace("\"version\": 1", "\"version\": 7");
    assert!(Checkpoint::from_json(&bad).is_err());
}
