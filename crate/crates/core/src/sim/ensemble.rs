use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{run_with, Enrollment, SimConfig, SimError, Trace};

/// Outbreaks with more total infections than this are "major".
pub const MAJOR_OUTBREAK_THRESHOLD: u32 = 20;

/// Stream reserved for sampling a frozen enrollment.
const FROZEN_ENROLLMENT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub runs: usize,
    /// Per-step quartiles of cumulative infections over all runs; a finished
    /// run contributes its final size.
    pub p25: Vec<f64>,
    pub p50: Vec<f64>,
    pub p75: Vec<f64>,
    /// Fraction of runs where the index case infected nobody.
    pub p_no_community_infection: f64,
    /// Fraction of runs with at most 20 total infections.
    pub p_no_major_outbreak: f64,
    /// Final sizes in run order.
    pub final_sizes: Vec<u32>,
    /// Count of major outbreaks by final size.
    pub major_final_size_histogram: BTreeMap<u32, u32>,
    /// Per-run peak of the currently infectious count.
    pub peak_infectious: Vec<u32>,
    /// Per-run step of that peak.
    pub peak_step: Vec<u32>,
}

impl EnsembleStats {
    pub fn from_traces(traces: &[Trace]) -> Self {
        let runs = traces.len();
        let horizon = traces.iter().map(|t| t.cumulative.len()).max().unwrap_or(0);
        let mut p25 = Vec::with_capacity(horizon);
        let mut p50 = Vec::with_capacity(horizon);
        let mut p75 = Vec::with_capacity(horizon);
        let mut column = vec![0u32; runs];
        for t in 0..horizon {
            for (slot, trace) in column.iter_mut().zip(traces) {
                *slot = trace.cumulative_at(t);
            }
            column.sort_unstable();
            p25.push(percentile(&column, 25.0));
            p50.push(percentile(&column, 50.0));
            p75.push(percentile(&column, 75.0));
        }
        let final_sizes: Vec<u32> = traces.iter().map(|t| t.final_size).collect();
        let frac = |pred: &dyn Fn(u32) -> bool| {
            final_sizes.iter().filter(|&&s| pred(s)).count() as f64 / runs.max(1) as f64
        };
        let mut histogram = BTreeMap::new();
        for &s in final_sizes.iter().filter(|&&s| s > MAJOR_OUTBREAK_THRESHOLD) {
            *histogram.entry(s).or_insert(0) += 1;
        }
        let (peak_step, peak_infectious) = traces.iter().map(Trace::peak).unzip();
        Self {
            runs,
            p25,
            p50,
            p75,
            p_no_community_infection: frac(&|s| s == 1),
            p_no_major_outbreak: frac(&|s| s <= MAJOR_OUTBREAK_THRESHOLD),
            final_sizes,
            major_final_size_histogram: histogram,
            peak_infectious,
            peak_step,
        }
    }

    /// Quartiles `(p25, p50, p75)` of the final size.
    pub fn final_size_quartiles(&self) -> (f64, f64, f64) {
        let mut sorted = self.final_sizes.clone();
        sorted.sort_unstable();
        (
            percentile(&sorted, 25.0),
            percentile(&sorted, 50.0),
            percentile(&sorted, 75.0),
        )
    }

    /// Runs whose final size exceeds [`MAJOR_OUTBREAK_THRESHOLD`].
    pub fn major_runs(&self) -> impl Iterator<Item = usize> + '_ {
        self.final_sizes
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > MAJOR_OUTBREAK_THRESHOLD)
            .map(|(i, _)| i)
    }
}

/// Linear-interpolation percentile of sorted data (`q` in percent).
pub fn percentile(sorted: &[u32], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => f64::from(sorted[0]),
        n => {
            let pos = q / 100.0 * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            f64::from(sorted[lo]) + (f64::from(sorted[hi]) - f64::from(sorted[lo])) * frac
        }
    }
}

fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `runs` independent outbreaks in parallel. Run `r` draws from stream
/// `r` of the master seed, so results do not depend on the thread count.
pub fn ensemble(config: &SimConfig, runs: usize) -> Result<EnsembleStats, SimError> {
    ensemble_traces(config, runs).map(|t| EnsembleStats::from_traces(&t))
}

pub fn ensemble_traces(config: &SimConfig, runs: usize) -> Result<Vec<Trace>, SimError> {
    config.validate()?;
    if runs == 0 {
        return Err(SimError::InvalidConfig("runs must be at least 1".into()));
    }
    let frozen = if config.freeze_enrollment {
        let mut rng = run_rng(config.seed, FROZEN_ENROLLMENT_STREAM);
        Some(Enrollment::sample(&config.schedule, &mut rng)?)
    } else {
        None
    };
    (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = run_rng(config.seed, r as u64);
            let result = match &frozen {
                Some(e) => run_with(e, config, &mut rng),
                None => Enrollment::sample(&config.schedule, &mut rng)
                    .and_then(|e| run_with(&e, config, &mut rng)),
            };
            result.map_err(|source| SimError::Run {
                run: r,
                source: Box::new(source),
            })
        })
        .collect()
}
