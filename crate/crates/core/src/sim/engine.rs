use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Enrollment, InitialInfection, SimConfig, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Susceptible,
    Infectious,
    Quarantined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    status: Vec<Status>,
    /// Sorted indices of infectious students.
    infectious: Vec<u32>,
    cumulative: u32,
}

impl SimState {
    pub fn new(num_students: usize, initially_infected: &[u32]) -> Self {
        let mut status = vec![Status::Susceptible; num_students];
        let mut infectious = initially_infected.to_vec();
        infectious.sort_unstable();
        infectious.dedup();
        for &s in &infectious {
            status[s as usize] = Status::Infectious;
        }
        let cumulative = infectious.len() as u32;
        Self {
            status,
            infectious,
            cumulative,
        }
    }

    pub fn status(&self) -> &[Status] {
        &self.status
    }

    pub fn num_infectious(&self) -> u32 {
        self.infectious.len() as u32
    }

    pub fn cumulative(&self) -> u32 {
        self.cumulative
    }

    pub fn num_susceptible(&self) -> u32 {
        self.status.len() as u32 - self.cumulative
    }
}

/// Advances one class meeting: infections, then quarantine.
pub fn step<R: Rng + ?Sized>(state: &mut SimState, enrollment: &Enrollment, config: &SimConfig, rng: &mut R) {
    let mut load = vec![0u32; enrollment.num_classes()];
    for &s in &state.infectious {
        for &c in enrollment.classes_of(s as usize) {
            load[c as usize] += 1;
        }
    }

    let escape = 1.0 - config.p;
    let mut newly = Vec::new();
    if config.p > 0.0 {
        for s in 0..state.status.len() {
            if state.status[s] != Status::Susceptible {
                continue;
            }
            let exposures: u32 = enrollment.classes_of(s).iter().map(|&c| load[c as usize]).sum();
            if exposures == 0 {
                continue;
            }
            let p_infect = 1.0 - escape.powi(exposures as i32);
            if rng.gen::<f64>() < p_infect {
                newly.push(s as u32);
            }
        }
    }

    let mut still = Vec::with_capacity(state.infectious.len() + newly.len());
    for &s in &state.infectious {
        if rng.gen::<f64>() < config.quarantine_prob {
            state.status[s as usize] = Status::Quarantined;
        } else {
            still.push(s);
        }
    }
    for &s in &newly {
        state.status[s as usize] = Status::Infectious;
    }
    state.cumulative += newly.len() as u32;
    still.extend(newly);
    still.sort_unstable();
    state.infectious = still;
}

/// One simulated outbreak. Index `t` of the per-step vectors is the state
/// after `t` steps; index 0 is the initial state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub infectious: Vec<u32>,
    pub cumulative: Vec<u32>,
    pub final_size: u32,
    /// First step with no infectious students, or `max_steps`.
    pub extinction_step: u32,
}

impl Trace {
    /// The step with the most infectious students (earliest on ties).
    pub fn peak(&self) -> (u32, u32) {
        let mut best = (0, self.infectious[0]);
        for (t, &i) in self.infectious.iter().enumerate() {
            if i > best.1 {
                best = (t as u32, i);
            }
        }
        best
    }

    pub fn cumulative_at(&self, t: usize) -> u32 {
        *self.cumulative.get(t).unwrap_or(&self.final_size)
    }
}

/// Runs `config` with its own seed, sampling a fresh enrollment.
pub fn run(config: &SimConfig) -> Result<Trace, SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let enrollment = Enrollment::sample(&config.schedule, &mut rng)?;
    run_with(&enrollment, config, &mut rng)
}

/// Runs on a given enrollment, drawing the initial case and all events from
/// `rng`.
pub fn run_with<R: Rng + ?Sized>(
    enrollment: &Enrollment,
    config: &SimConfig,
    rng: &mut R,
) -> Result<Trace, SimError> {
    config.validate()?;
    let n = enrollment.num_students();
    let initial: Vec<u32> = match config.initial {
        InitialInfection::RandomStudent => vec![rng.gen_range(0..n as u32)],
        InitialInfection::Student(s) => vec![s],
        InitialInfection::RandomInClass(c) => {
            let roster = enrollment.roster(c as usize);
            vec![roster[rng.gen_range(0..roster.len())]]
        }
        InitialInfection::All => (0..n as u32).collect(),
    };
    let mut state = SimState::new(n, &initial);
    let mut infectious = vec![state.num_infectious()];
    let mut cumulative = vec![state.cumulative()];
    let mut t = 0;
    while state.num_infectious() > 0 && t < config.max_steps {
        step(&mut state, enrollment, config, rng);
        t += 1;
        infectious.push(state.num_infectious());
        cumulative.push(state.cumulative());
    }
    Ok(Trace {
        infectious,
        cumulative,
        final_size: state.cumulative(),
        extinction_step: t,
    })
}
