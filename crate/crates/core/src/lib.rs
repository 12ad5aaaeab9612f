//! Constrained point-addition adversarial attacks on 3D point-cloud classifiers.
//!
//! The library builds adversarial samples `X* = X ∪ δ` by adding at most `n`
//! points to an original cloud `X`, keeping the Hausdorff distance between
//! `X*` and `X` below a hard boundary `ε`. The attack family covers a
//! constant-step PGD baseline, a variable step-size attack (linear step-size
//! decay), a variable boundary attack (linear `ε*` decay), and their
//! combination, all driven by exact input gradients of a small PointNet-style
//! classifier.
//!
//! Module map:
//! - [`geometry`]: points, clouds, normalization, nearest neighbors,
//!   Hausdorff distance, and boundary projection.
//! - [`model`]: the differentiable classifier, its objective, input
//!   gradients, training, and weight serialization.
//! - [`attack`]: attack configuration, step-size/boundary schedules, the
//!   step loop, and a generic step-size scheduling wrapper.
//! - [`defense`]: statistical outlier removal and salient point removal,
//!   plus defended re-evaluation of attack results.
//! - [`data`]: synthetic shape dataset generation and XYZ/OFF ingestion.
//! - [`harness`]: sweep orchestration, success-rate reports, and PLY export.

pub mod attack;
pub mod data;
pub mod defense;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod model;

pub use error::{Error, Result};
