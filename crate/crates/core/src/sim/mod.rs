//! Discrete-time stochastic epidemic on a class enrollment.
//!
//! One step is one class meeting. Every infectious student meets all three
//! of their classes and infects each susceptible classmate independently
//! with probability `p` per shared class; afterwards each infectious student
//! enters quarantine with probability `quarantine_prob` and is removed for
//! good. Students infected during a step become infectious at the next one.
//! Two steps make one week.

mod engine;
mod enrollment;
mod ensemble;

pub use engine::{run, run_with, step, SimState, Status, Trace};
pub use enrollment::{sample_enrollment, Enrollment};
pub use ensemble::{ensemble, ensemble_traces, percentile, EnsembleStats, MAJOR_OUTBREAK_THRESHOLD};

use thiserror::Error;

use crate::classes::ClassSchedule;

pub const STEPS_PER_WEEK: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("cannot enroll students three distinct classes each: class of size {class_size} is too large")]
    Infeasible { class_size: u32 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<SimError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitialInfection {
    /// One student chosen uniformly at random.
    RandomStudent,
    Student(u32),
    /// One student chosen uniformly from the roster of this class.
    RandomInClass(u32),
    /// Every student infected at step 0.
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub schedule: ClassSchedule,
    pub p: f64,
    pub quarantine_prob: f64,
    pub initial: InitialInfection,
    pub max_steps: u32,
    pub seed: u64,
    /// Sample one enrollment for the whole ensemble instead of one per run.
    pub freeze_enrollment: bool,
}

impl SimConfig {
    /// The campus model with `p` and the 0.5 daily quarantine probability.
    pub fn new(schedule: ClassSchedule, p: f64, seed: u64) -> Self {
        Self {
            schedule,
            p,
            quarantine_prob: 0.5,
            initial: InitialInfection::RandomStudent,
            max_steps: 1000,
            seed,
            freeze_enrollment: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(SimError::InvalidConfig(format!(
                "p = {} is not a probability",
                self.p
            )));
        }
        if !(0.0..=1.0).contains(&self.quarantine_prob) {
            return Err(SimError::InvalidConfig(format!(
                "quarantine probability {} is not a probability",
                self.quarantine_prob
            )));
        }
        if self.max_steps == 0 {
            return Err(SimError::InvalidConfig("max_steps must be at least 1".into()));
        }
        match self.initial {
            InitialInfection::Student(s) if u64::from(s) >= self.schedule.num_students() => Err(
                SimError::InvalidConfig(format!("initial student {s} does not exist")),
            ),
            InitialInfection::RandomInClass(c) if c as usize >= self.schedule.len() => Err(
                SimError::InvalidConfig(format!("initial class {c} does not exist")),
            ),
            _ => Ok(()),
        }
    }
}
