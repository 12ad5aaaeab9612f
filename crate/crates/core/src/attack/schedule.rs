//! Step-size and boundary schedules, plus a generic wrapper that retrofits
//! scheduling onto any iterative attack step.

use serde::{Deserialize, Serialize};

/// Linear interpolation from `start` at step 0 to `end` at step
/// `total_steps`, with exact endpoints.
pub fn schedule_value(start: f64, end: f64, step_index: usize, total_steps: usize) -> f64 {
    assert!(total_steps >= 1, "schedule needs at least one step");
    assert!(step_index <= total_steps, "step index {step_index} beyond {total_steps}");
    if step_index == 0 {
        start
    } else if step_index == total_steps {
        end
    } else {
        start + (step_index as f64 / total_steps as f64) * (end - start)
    }
}

/// Step-size schedule for iterative attacks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSchedule {
    /// Fixed step size.
    Constant(f64),
    /// Linear decay (or growth) from `start` at step 0 to `end` at the final
    /// step.
    Linear { start: f64, end: f64 },
    /// `start` halved after every step: start, start/2, start/4, ...
    Halving { start: f64 },
}

impl StepSchedule {
    /// Value used at `step_index` of a `total_steps`-step run.
    pub fn value(&self, step_index: usize, total_steps: usize) -> f64 {
        match *self {
            StepSchedule::Constant(v) => v,
            StepSchedule::Linear { start, end } => schedule_value(start, end, step_index, total_steps),
            StepSchedule::Halving { start } => start / (1u64 << step_index.min(63)) as f64,
        }
    }
}

/// Any iterative attack step parameterized by a step size, wrapped so its
/// step size follows `schedule`.
///
/// With a constant schedule the wrapped stepper is behaviorally identical
/// to calling the raw step function with that step size. For halving
/// schedules that restart per outer iteration, call
/// [`ScheduledStepper::reset_schedule`] at the restart point.
pub struct ScheduledStepper<S, E, F: FnMut(&mut S, f64) -> Result<(), E>> {
    step_fn: F,
    schedule: StepSchedule,
    total_steps: usize,
    step_index: usize,
    _state: std::marker::PhantomData<S>,
}

/// Wraps `step_fn` so each invocation receives the scheduled step size.
pub fn wrap_with_schedule<S, E, F: FnMut(&mut S, f64) -> Result<(), E>>(
    step_fn: F,
    schedule: StepSchedule,
    total_steps: usize,
) -> ScheduledStepper<S, E, F> {
    ScheduledStepper { step_fn, schedule, total_steps, step_index: 0, _state: std::marker::PhantomData }
}

impl<S, E, F: FnMut(&mut S, f64) -> Result<(), E>> ScheduledStepper<S, E, F> {
    /// Advances the wrapped attack by one step.
    pub fn step(&mut self, state: &mut S) -> Result<(), E> {
        let size = self.next_step_size();
        (self.step_fn)(state, size)?;
        self.step_index += 1;
        Ok(())
    }

    /// Step size the next call to [`step`](Self::step) will use.
    pub fn next_step_size(&self) -> f64 {
        match self.schedule {
            // Linear schedules reach their endpoint at the final step.
            StepSchedule::Linear { .. } => {
                self.schedule.value((self.step_index + 1).min(self.total_steps), self.total_steps)
            }
            _ => self.schedule.value(self.step_index, self.total_steps),
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.step_index
    }

    /// Restarts the schedule without touching the attack state.
    pub fn reset_schedule(&mut self) {
        self.step_index = 0;
    }
}
