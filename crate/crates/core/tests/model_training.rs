//! Training determinism and convergence on a separable toy problem.

use pcadv::geometry::{normalize_unit_sphere, Point3, PointCloud};
use pcadv::model::{train, ModelConfig, PointClassifier, TrainConfig};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Two shape classes: segments elongated along x vs along y.
fn toy_dataset(per_class: usize, seed: u64) -> Vec<(PointCloud, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for label in 0..2usize {
        for _ in 0..per_class {
            let points: Vec<Point3> = (0..24)
                .map(|_| {
                    let along = rng.random_range(-1.0..1.0);
                    let off1 = rng.random_range(-0.05..0.05);
                    let off2 = rng.random_range(-0.05..0.05);
                    if label == 0 {
                        Point3::new(along, off1, off2)
                    } else {
                        Point3::new(off1, along, off2)
                    }
                })
                .collect();
            let cloud = normalize_unit_sphere(&PointCloud::new(points).unwrap()).unwrap();
            samples.push((cloud.with_label(label), label));
        }
    }
    samples
}

fn small_config() -> ModelConfig {
    ModelConfig { per_point_dims: vec![8, 16], head_dims: vec![8], num_classes: 2 }
}

#[test]
fn separable_toy_trains_to_high_accuracy() {
    let samples = toy_dataset(40, 5);
    let model = PointClassifier::init(&small_config(), 11).unwrap();
    let config = TrainConfig { epochs: 40, batch_size: 16, learning_rate: 0.05, momentum: 0.9, seed: 3 };
    let (_, report) = train(model, &samples, &config).unwrap();
    assert!(
        report.train_accuracy >= 0.99,
        "train accuracy {} below 0.99",
        report.train_accuracy
    );
}

#[test]
fn zero_epochs_leaves_parameters_unchanged() {
    let samples = toy_dataset(4, 5);
    let model = PointClassifier::init(&small_config(), 11).unwrap();
    let before = model.clone();
    let config = TrainConfig { epochs: 0, ..TrainConfig::default() };
    let (after, report) = train(model, &samples, &config).unwrap();
    assert_eq!(report.epochs_run, 0);
    for (a, b) in before.per_point.iter().chain(&before.head).zip(after.per_point.iter().chain(&after.head)) {
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.biases, b.biases);
    }
}

#[test]
fn same_seed_reproduces_parameters_bitwise() {
    let samples = toy_dataset(10, 5);
    let config = TrainConfig { epochs: 5, batch_size: 8, learning_rate: 0.05, momentum: 0.9, seed: 9 };
    let run = || {
        let model = PointClassifier::init(&small_config(), 11).unwrap();
        train(model, &samples, &config).unwrap().0
    };
    let (a, b) = (run(), run());
    for (la, lb) in a.per_point.iter().chain(&a.head).zip(b.per_point.iter().chain(&b.head)) {
        assert_eq!(la.weights, lb.weights);
        assert_eq!(la.biases, lb.biases);
    }
}

#[test]
fn empty_dataset_is_rejected() {
    let model = PointClassifier::init(&small_config(), 11).unwrap();
    assert!(train(model, &[], &TrainConfig::default()).is_err());
}
