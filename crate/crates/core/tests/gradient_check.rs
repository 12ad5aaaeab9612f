//! Analytic input gradients against a central finite-difference oracle.

use pcadv::geometry::{Point3, PointCloud};
use pcadv::model::{ModelConfig, PointClassifier};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-4;
const REL_TOL: f64 = 1e-4;
const ABS_FLOOR: f64 = 1e-6;
const ABS_TOL: f64 = 1e-7;

fn random_triple(rng: &mut ChaCha8Rng) -> (PointClassifier, PointCloud, usize) {
    let num_classes = rng.random_range(3..=6);
    let config = ModelConfig {
        per_point_dims: vec![rng.random_range(6..=10), rng.random_range(10..=16)],
        head_dims: vec![rng.random_range(8..=12)],
        num_classes,
    };
    let model = PointClassifier::init(&config, rng.random()).unwrap();
    let n = rng.random_range(5..=12);
    let points = (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    let cloud = PointCloud::new(points).unwrap();
    let label = rng.random_range(0..num_classes);
    (model, cloud, label)
}

fn finite_difference(model: &PointClassifier, cloud: &PointCloud, label: usize, i: usize, axis: usize) -> f64 {
    let mut plus = cloud.clone();
    let mut minus = cloud.clone();
    let bump = |p: &mut Point3, sign: f64| match axis {
        0 => p.x += sign * FD_STEP,
        1 => p.y += sign * FD_STEP,
        _ => p.z += sign * FD_STEP,
    };
    bump(&mut plus.points[i], 1.0);
    bump(&mut minus.points[i], -1.0);
    let f_plus = model.objective(&plus, label).unwrap();
    let f_minus = model.objective(&minus, label).unwrap();
    (f_plus - f_minus) / (2.0 * FD_STEP)
}

/// Runs the oracle over `triples` random instances; returns coordinate
/// mismatches as (triple, point, axis, analytic, numeric).
fn run_check(seed: u64, triples: usize) -> Vec<(usize, usize, usize, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    for t in 0..triples {
        let (model, cloud, label) = random_triple(&mut rng);
        let analytic = model.input_gradient(&cloud, label).unwrap();
        for i in 0..cloud.len() {
            let got = analytic[i].to_array();
            for axis in 0..3 {
                let numeric = finite_difference(&model, &cloud, label, i, axis);
                let a = got[axis];
                let ok = if a.abs() < ABS_FLOOR {
                    (a - numeric).abs() < ABS_TOL
                } else {
                    ((a - numeric) / a).abs() < REL_TOL
                };
                if !ok {
                    violations.push((t, i, axis, a, numeric));
                }
            }
        }
    }
    violations
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let violations = run_check(2024, 50);
    assert!(
        violations.is_empty(),
        "{} coordinate mismatches, first: {:?}",
        violations.len(),
        violations.first()
    );
}

#[test]
fn gradient_ascent_step_increases_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20 {
        let (model, cloud, label) = random_triple(&mut rng);
        let grads = model.input_gradient(&cloud, label).unwrap();
        let norm = grads.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
        if norm < 1e-9 {
            continue;
        }
        let step = 1e-5 / norm;
        let moved = PointCloud::new(
            cloud.points.iter().zip(&grads).map(|(&p, &g)| p + g * step).collect(),
        )
        .unwrap();
        let before = model.objective(&cloud, label).unwrap();
        let after = model.objective(&moved, label).unwrap();
        assert!(after > before, "objective did not increase: {before} -> {after}");
    }
}
