//! The point-addition attack family.
//!
//! All variants share one loop: initialize the added set `δ` from the
//! highest-gradient original points, then repeatedly move `δ` along the
//! objective gradient (or randomly where the gradient vanishes) and project
//! every point back into the `ε*` neighborhood of its nearest original
//! neighbor. Variants differ only in how the step size `α` and the working
//! boundary `ε*` evolve:
//!
//! - `PGD`: constant `α`, constant `ε* = ε`.
//! - `VSA`: `α` decays linearly from `α_init` to `α_final`; `ε* = ε`.
//! - `VBA`: constant `α`; `ε*` decays linearly from `ε_init` to `ε`.
//! - `VBA+VSA`: both schedules active.
//!
//! Each step advances the schedules and then applies the advanced values,
//! so after every step the delta satisfies the state's own `ε*` boundary,
//! and the final step projects with exactly `ε`.

mod schedule;

pub use schedule::{schedule_value, wrap_with_schedule, ScheduledStepper, StepSchedule};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, DeltaSet, Point3, PointCloud};
use crate::model::{BaseFeatures, DeltaEval, PointClassifier};

/// Gradient-norm threshold separating "zero-gradient" points (which step in
/// a random direction) from gradient-following points.
pub const ZERO_GRAD_THRESHOLD: f64 = 1e-12;

/// Tolerance on normalization of clouds handed to [`run_attack`].
const NORMALIZED_TOL: f64 = 1e-6;

/// Attack variant selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Pgd,
    Vsa,
    Vba,
    VbaVsa,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Pgd => "PGD",
            Variant::Vsa => "VSA",
            Variant::Vba => "VBA",
            Variant::VbaVsa => "VBA+VSA",
        }
    }

    fn schedules_alpha(self) -> bool {
        matches!(self, Variant::Vsa | Variant::VbaVsa)
    }

    fn schedules_epsilon(self) -> bool {
        matches!(self, Variant::Vba | Variant::VbaVsa)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the gradient step is normalized in the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GradNormalization {
    /// Divide by the single L2 norm of the stacked gradient over all
    /// gradient-following points; the aggregate step length is `α`.
    #[default]
    Global,
    /// Divide each point's gradient by its own norm; every point moves `α`.
    PerPoint,
}

/// How random directions are drawn for zero-gradient points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RandomDirection {
    /// One independent unit vector per zero-gradient point per step.
    #[default]
    PerPoint,
    /// A single unit vector per step shared by all zero-gradient points.
    Shared,
}

/// Full attack parameterization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Hausdorff boundary `ε`.
    pub epsilon: f64,
    /// Maximum number of added points.
    pub n: usize,
    /// Step budget `M`. Zero is allowed and leaves the initialization as is.
    pub steps: usize,
    pub alpha_init: f64,
    pub alpha_final: f64,
    /// Starting boundary `ε_init`; equals `ε` for non-VBA variants.
    pub epsilon_init: f64,
    pub variant: Variant,
    pub seed: u64,
    #[serde(default)]
    pub grad_normalization: GradNormalization,
    #[serde(default)]
    pub random_direction: RandomDirection,
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if !(self.alpha_init > 0.0 && self.alpha_final > 0.0) {
            return Err(Error::InvalidConfig("step sizes must be > 0".into()));
        }
        if self.variant.schedules_alpha() && self.alpha_final > self.alpha_init {
            return Err(Error::InvalidConfig(format!(
                "alpha_final {} exceeds alpha_init {} for {}",
                self.alpha_final, self.alpha_init, self.variant
            )));
        }
        if !self.variant.schedules_alpha() && self.alpha_init != self.alpha_final {
            return Err(Error::InvalidConfig(format!(
                "{} uses a constant step size; alpha_init must equal alpha_final",
                self.variant
            )));
        }
        if self.variant.schedules_epsilon() {
            if self.epsilon_init < self.epsilon {
                return Err(Error::InvalidConfig(format!(
                    "epsilon_init {} below epsilon {} for {}",
                    self.epsilon_init, self.epsilon, self.variant
                )));
            }
        } else if self.epsilon_init != self.epsilon {
            return Err(Error::InvalidConfig(format!(
                "{} uses a fixed boundary; epsilon_init must equal epsilon",
                self.variant
            )));
        }
        Ok(())
    }

    /// Step-size schedule on `[0, M]`.
    pub fn alpha_schedule(&self) -> StepSchedule {
        StepSchedule::Linear { start: self.alpha_init, end: self.alpha_final }
    }

    /// Boundary schedule on `[0, M]`.
    pub fn epsilon_schedule(&self) -> StepSchedule {
        StepSchedule::Linear { start: self.epsilon_init, end: self.epsilon }
    }
}

/// Paper defaults for each variant: `M = 500`; VSA uses
/// `α_init = 0.1, α_final = min(0.5/n, ε/2)`; VBA and PGD use the constant
/// `α = min(1/n, ε)`; VBA-family starts the boundary at `2ε`.
pub fn default_hyperparams(epsilon: f64, n: usize, variant: Variant) -> Result<AttackConfig> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be > 0, got {epsilon}")));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let scheduled_alpha_final = (0.5 / n as f64).min(epsilon / 2.0);
    let constant_alpha = (1.0 / n as f64).min(epsilon);
    let (alpha_init, alpha_final) = if variant.schedules_alpha() {
        (0.1, scheduled_alpha_final)
    } else {
        (constant_alpha, constant_alpha)
    };
    let epsilon_init = if variant.schedules_epsilon() { 2.0 * epsilon } else { epsilon };
    let config = AttackConfig {
        epsilon,
        n,
        steps: 500,
        alpha_init,
        alpha_final,
        epsilon_init,
        variant,
        seed: 0,
        grad_normalization: GradNormalization::default(),
        random_direction: RandomDirection::default(),
    };
    config.validate()?;
    Ok(config)
}

/// Attack loop state after `step_index` steps. `alpha_current` and
/// `epsilon_current` are the schedule values governing the current delta;
/// the delta always satisfies the `epsilon_current` boundary within 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub delta: DeltaSet,
    pub step_index: usize,
    pub alpha_current: f64,
    pub epsilon_current: f64,
}

/// Outcome of a full attack run.
#[derive(Debug, Clone)]
pub struct AttackResult {
    /// `X ∪ δ`: the original points first (bit-identical to the input),
    /// then the added points.
    pub adversarial: PointCloud,
    /// Whether the final prediction differs from the true label.
    pub success: bool,
    /// Objective after initialization and after each step; entry `i` is the
    /// value at the delta of step `i`, so the last entry measures the
    /// returned sample.
    pub objective_trace: Vec<f64>,
    /// Independently recomputed `D_H(X ∪ δ, X)`.
    pub final_hausdorff: f64,
    pub steps_used: usize,
    /// First step index (0 = at initialization) whose prediction differed
    /// from the label, if any.
    pub first_success_step: Option<usize>,
    pub final_prediction: usize,
}

/// Copies the `n` original points with the largest input-gradient norms
/// (ties to the lowest index). The original cloud is not modified; each
/// copy's provenance starts at its source index.
pub fn init_delta(
    model: &PointClassifier,
    cloud: &PointCloud,
    label: usize,
    n: usize,
) -> Result<DeltaSet> {
    if n > cloud.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot initialize {n} added points from a {}-point cloud",
            cloud.len()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let grads = model.input_gradient(cloud, label)?;
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.sort_by(|&a, &b| {
        grads[b]
            .norm_squared()
            .partial_cmp(&grads[a].norm_squared())
            .expect("finite gradient norms")
            .then(a.cmp(&b))
    });
    order.truncate(n);
    Ok(DeltaSet {
        points: order.iter().map(|&i| cloud.points[i]).collect(),
        nn_index: order,
    })
}

/// One in-progress attack: the model, the fixed original cloud with cached
/// pooled features, and the RNG stream for random-direction steps.
pub struct AttackSession<'a> {
    model: &'a PointClassifier,
    cloud: &'a PointCloud,
    label: usize,
    config: AttackConfig,
    base: BaseFeatures,
    rng: ChaCha8Rng,
}

impl<'a> AttackSession<'a> {
    /// Validates the configuration, the label, and that the cloud is
    /// normalized, then caches the cloud's pooled features.
    pub fn new(
        model: &'a PointClassifier,
        cloud: &'a PointCloud,
        label: usize,
        config: AttackConfig,
    ) -> Result<Self> {
        config.validate()?;
        if label >= model.num_classes {
            return Err(Error::InvalidLabel { label, num_classes: model.num_classes });
        }
        if !cloud.is_normalized(NORMALIZED_TOL) {
            return Err(Error::InvalidConfig(
                "attack input cloud must be unit-sphere normalized".into(),
            ));
        }
        let base = model.base_features(cloud)?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self { model, cloud, label, config, base, rng })
    }

    pub fn config(&self) -> &AttackConfig {
        &self.config
    }

    /// Gradient-initialized delta with schedules at step 0.
    pub fn initial_state(&self) -> Result<StepState> {
        Ok(StepState {
            delta: init_delta(self.model, self.cloud, self.label, self.config.n)?,
            step_index: 0,
            alpha_current: self.config.alpha_init,
            epsilon_current: self.config.epsilon_init,
        })
    }

    /// Objective, logits, prediction, and per-point gradients at `X ∪ δ`.
    pub fn evaluate(&self, delta: &[Point3]) -> Result<DeltaEval> {
        self.model.delta_eval(&self.base, delta, self.label)
    }

    /// Advances the state by one step: schedules move to `step_index + 1`,
    /// gradient-following points step along the normalized gradient,
    /// zero-gradient points step in a random direction, and every point is
    /// projected back within the advanced `ε*` boundary.
    pub fn attack_step(&mut self, state: &StepState) -> Result<StepState> {
        let eval = self.evaluate(&state.delta.points)?;
        self.step_from_eval(state, &eval, None)
    }

    /// [`attack_step`](Self::attack_step) with an externally supplied step
    /// size (used by the scheduling wrapper).
    pub fn attack_step_with_alpha(&mut self, state: &StepState, alpha: f64) -> Result<StepState> {
        let eval = self.evaluate(&state.delta.points)?;
        self.step_from_eval(state, &eval, Some(alpha))
    }

    fn step_from_eval(
        &mut self,
        state: &StepState,
        eval: &DeltaEval,
        alpha_override: Option<f64>,
    ) -> Result<StepState> {
        let total = self.config.steps.max(1);
        let next_index = state.step_index + 1;
        let sample_at = next_index.min(total);
        let alpha = alpha_override
            .unwrap_or_else(|| self.config.alpha_schedule().value(sample_at, total));
        let eps_star = self.config.epsilon_schedule().value(sample_at, total);

        let norms: Vec<f64> = eval.delta_grads.iter().map(|g| g.norm()).collect();
        let global_norm = norms
            .iter()
            .zip(&eval.delta_grads)
            .filter(|(&n, _)| n >= ZERO_GRAD_THRESHOLD)
            .map(|(_, g)| g.norm_squared())
            .sum::<f64>()
            .sqrt();

        let shared_dir = match self.config.random_direction {
            RandomDirection::Shared if norms.iter().any(|&n| n < ZERO_GRAD_THRESHOLD) => {
                Some(self.random_unit())
            }
            _ => None,
        };

        let mut points = Vec::with_capacity(state.delta.len());
        let mut nn_index = Vec::with_capacity(state.delta.len());
        for (j, &p) in state.delta.points.iter().enumerate() {
            let moved = if norms[j] < ZERO_GRAD_THRESHOLD {
                let dir = shared_dir.unwrap_or_else(|| self.random_unit());
                p + dir * alpha
            } else {
                let denom = match self.config.grad_normalization {
                    GradNormalization::Global => global_norm,
                    GradNormalization::PerPoint => norms[j],
                };
                p + eval.delta_grads[j] * (alpha / denom)
            };
            let (projected, nn) = geometry::project_with_neighbor(moved, self.cloud, eps_star)?;
            points.push(projected);
            nn_index.push(nn);
        }

        Ok(StepState {
            delta: DeltaSet { points, nn_index },
            step_index: next_index,
            alpha_current: alpha,
            epsilon_current: eps_star,
        })
    }

    fn random_unit(&mut self) -> Point3 {
        loop {
            let v = Point3::new(
                StandardNormal.sample(&mut self.rng),
                StandardNormal.sample(&mut self.rng),
                StandardNormal.sample(&mut self.rng),
            );
            let n = v.norm();
            if n > 1e-12 {
                return v * (1.0 / n);
            }
        }
    }

    fn finish(&self, state: StepState, last_eval: DeltaEval, trace: Vec<f64>, first_success: Option<usize>) -> Result<AttackResult> {
        let mut points = self.cloud.points.clone();
        points.extend_from_slice(&state.delta.points);
        let adversarial = PointCloud { points, label: self.cloud.label };
        let final_hausdorff = geometry::hausdorff_distance(&adversarial, self.cloud)?;
        if final_hausdorff > self.config.epsilon + 1e-9 {
            return Err(Error::ConstraintViolation(format!(
                "final Hausdorff distance {final_hausdorff} exceeds epsilon {}",
                self.config.epsilon
            )));
        }
        if state.delta.len() > self.config.n {
            return Err(Error::ConstraintViolation(format!(
                "delta cardinality {} exceeds n {}",
                state.delta.len(),
                self.config.n
            )));
        }
        Ok(AttackResult {
            adversarial,
            success: last_eval.prediction != self.label,
            objective_trace: trace,
            final_hausdorff,
            steps_used: state.step_index,
            first_success_step: first_success,
            final_prediction: last_eval.prediction,
        })
    }
}

/// Runs the configured variant for its full step budget and reports the
/// adversarial sample. Deterministic given the config (including seed).
pub fn run_attack(
    model: &PointClassifier,
    cloud: &PointCloud,
    label: usize,
    config: &AttackConfig,
) -> Result<AttackResult> {
    let mut session = AttackSession::new(model, cloud, label, config.clone())?;
    let mut state = session.initial_state()?;
    let mut eval = session.evaluate(&state.delta.points)?;
    let mut trace = Vec::with_capacity(config.steps + 1);
    trace.push(eval.objective);
    let mut first_success = (eval.prediction != label).then_some(0);
    for step in 1..=config.steps {
        state = session.step_from_eval(&state, &eval, None)?;
        eval = session.evaluate(&state.delta.points)?;
        trace.push(eval.objective);
        if first_success.is_none() && eval.prediction != label {
            first_success = Some(step);
        }
    }
    session.finish(state, eval, trace, first_success)
}

/// Runs an attack whose step size is supplied by `schedule` through the
/// generic wrapper, leaving everything else (boundary schedule, random
/// steps, projection) to the variant configuration.
pub fn run_attack_with_schedule(
    model: &PointClassifier,
    cloud: &PointCloud,
    label: usize,
    config: &AttackConfig,
    schedule: StepSchedule,
) -> Result<AttackResult> {
    let mut session = AttackSession::new(model, cloud, label, config.clone())?;
    let mut state = session.initial_state()?;
    let mut eval = session.evaluate(&state.delta.points)?;
    let mut trace = Vec::with_capacity(config.steps + 1);
    trace.push(eval.objective);
    let mut first_success = (eval.prediction != label).then_some(0);

    {
        let session_cell = std::cell::RefCell::new(&mut session);
        let mut stepper = wrap_with_schedule(
            |st: &mut StepState, alpha| -> Result<()> {
                let next = session_cell.borrow_mut().attack_step_with_alpha(st, alpha)?;
                *st = next;
                Ok(())
            },
            schedule,
            config.steps.max(1),
        );
        for step in 1..=config.steps {
            stepper.step(&mut state)?;
            let e = session_cell.borrow().evaluate(&state.delta.points)?;
            trace.push(e.objective);
            if first_success.is_none() && e.prediction != label {
                first_success = Some(step);
            }
            eval = e;
        }
    }
    session.finish(state, eval, trace, first_success)
}
