//! Household-model analysis of dorms.
//!
//! A dorm is a household: students infect dorm-mates with probability `p_D`
//! and anyone on campus with probability `p_G`. Within-dorm spread is a
//! branching process with offspring mean `lambda`; each student it reaches
//! seeds Poisson(`N p_G`) infections elsewhere. The large-epidemic
//! probability `zeta` is the largest root of
//! `1 - zeta = G_D(exp(-N p_G zeta))`, with `G_D` the within-dorm size pgf.

use rayon::prelude::*;
use thiserror::Error;

use crate::pgf::{self, FixedPointConfig, Pgf, PgfError, TabulatedPgf};

/// Students per dorm used when a sweep is specified only by rates.
pub const DEFAULT_DORM_POPULATION: u32 = 120;
/// Dorms on campus used when a sweep is specified only by rates.
pub const DEFAULT_NUM_DORMS: u32 = 50;

const ROOT_SCAN_STEP: f64 = 1e-4;
const ROOT_BISECT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DormError {
    #[error("invalid dorm parameters: {0}")]
    InvalidParams(String),
    #[error("within-dorm spread is supercritical (lambda = {0}); mean progeny is infinite")]
    Supercritical(f64),
    #[error(transparent)]
    Pgf(#[from] PgfError),
}

fn check_probability(name: &str, p: f64) -> Result<(), DormError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(DormError::InvalidParams(format!(
            "{name} = {p} is not a probability"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleDormParams {
    num_dorms: u32,
    rooms_per_dorm: u32,
    p_dorm: f64,
    p_global: f64,
}

impl SingleDormParams {
    pub fn new(num_dorms: u32, rooms_per_dorm: u32, p_dorm: f64, p_global: f64) -> Result<Self, DormError> {
        if num_dorms == 0 || rooms_per_dorm == 0 {
            return Err(DormError::InvalidParams(
                "dorm and room counts must be positive".into(),
            ));
        }
        check_probability("p_D", p_dorm)?;
        check_probability("p_G", p_global)?;
        Ok(Self {
            num_dorms,
            rooms_per_dorm,
            p_dorm,
            p_global,
        })
    }

    /// Parameters on the default campus (50 dorms of 120) with the given
    /// `n p_D` and `N p_G`.
    pub fn from_rates(local: f64, global_mean: f64) -> Result<Self, DormError> {
        let n = DEFAULT_DORM_POPULATION;
        let pop = f64::from(n * DEFAULT_NUM_DORMS);
        Self::new(DEFAULT_NUM_DORMS, n, local / f64::from(n), global_mean / pop)
    }

    pub fn num_dorms(&self) -> u32 {
        self.num_dorms
    }

    pub fn rooms_per_dorm(&self) -> u32 {
        self.rooms_per_dorm
    }

    pub fn p_dorm(&self) -> f64 {
        self.p_dorm
    }

    pub fn p_global(&self) -> f64 {
        self.p_global
    }

    /// Campus population `N = m n`.
    pub fn population(&self) -> u64 {
        u64::from(self.num_dorms) * u64::from(self.rooms_per_dorm)
    }

    /// `lambda_1 = n p_D`.
    pub fn lambda(&self) -> f64 {
        f64::from(self.rooms_per_dorm) * self.p_dorm
    }

    /// `N p_G`, the mean number of global infections per student.
    pub fn global_mean(&self) -> f64 {
        self.population() as f64 * self.p_global
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDormParams {
    num_dorms: u32,
    double_rooms_per_dorm: u32,
    p_roommate: f64,
    p_dorm: f64,
    p_global: f64,
}

impl DoubleDormParams {
    pub fn new(
        num_dorms: u32,
        double_rooms_per_dorm: u32,
        p_roommate: f64,
        p_dorm: f64,
        p_global: f64,
    ) -> Result<Self, DormError> {
        if num_dorms == 0 || double_rooms_per_dorm == 0 {
            return Err(DormError::InvalidParams(
                "dorm and room counts must be positive".into(),
            ));
        }
        check_probability("p_L", p_roommate)?;
        check_probability("p_D", p_dorm)?;
        check_probability("p_G", p_global)?;
        Ok(Self {
            num_dorms,
            double_rooms_per_dorm,
            p_roommate,
            p_dorm,
            p_global,
        })
    }

    /// Parameters on the default campus with the given `2 n1 p_D`, `p_L` and
    /// `N p_G`; dorm population matches [`SingleDormParams::from_rates`].
    pub fn from_rates(local: f64, p_roommate: f64, global_mean: f64) -> Result<Self, DormError> {
        let n1 = DEFAULT_DORM_POPULATION / 2;
        let pop = f64::from(DEFAULT_DORM_POPULATION * DEFAULT_NUM_DORMS);
        Self::new(
            DEFAULT_NUM_DORMS,
            n1,
            p_roommate,
            local / f64::from(2 * n1),
            global_mean / pop,
        )
    }

    pub fn num_dorms(&self) -> u32 {
        self.num_dorms
    }

    pub fn double_rooms_per_dorm(&self) -> u32 {
        self.double_rooms_per_dorm
    }

    pub fn p_roommate(&self) -> f64 {
        self.p_roommate
    }

    pub fn p_dorm(&self) -> f64 {
        self.p_dorm
    }

    pub fn p_global(&self) -> f64 {
        self.p_global
    }

    /// `N = 2 m1 n1`.
    pub fn population(&self) -> u64 {
        2 * u64::from(self.num_dorms) * u64::from(self.double_rooms_per_dorm)
    }

    /// `2 n1 p_D`, the Poisson rate of one student's dorm-wide contacts.
    pub fn local_rate(&self) -> f64 {
        2.0 * f64::from(self.double_rooms_per_dorm) * self.p_dorm
    }

    /// `lambda_2 = (1 + p_L) 2 n1 p_D`.
    pub fn lambda(&self) -> f64 {
        (1.0 + self.p_roommate) * self.local_rate()
    }

    pub fn global_mean(&self) -> f64 {
        self.population() as f64 * self.p_global
    }

    /// The single-room campus with the same dorm population and rates.
    pub fn as_single(&self) -> SingleDormParams {
        SingleDormParams {
            num_dorms: self.num_dorms,
            rooms_per_dorm: 2 * self.double_rooms_per_dorm,
            p_dorm: self.p_dorm,
            p_global: self.p_global,
        }
    }

    /// Offspring pgf of one within-dorm generation.
    pub fn offspring_pgf(&self) -> Pgf {
        let a = self.local_rate();
        Pgf::TwoPoissonMixture {
            weight: self.p_roommate,
            lambda_pair: (2.0 * a, a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DormAnalysis {
    pub lambda: f64,
    /// Mean within-dorm progeny; `None` when `lambda >= 1`.
    pub mu: Option<f64>,
    pub r0: Option<f64>,
    pub zeta: f64,
}

fn mean_progeny(lambda: f64) -> Result<f64, DormError> {
    if lambda >= 1.0 {
        Err(DormError::Supercritical(lambda))
    } else {
        Ok(1.0 / (1.0 - lambda))
    }
}

/// Mean total within-dorm progeny, `1 / (1 - lambda_1)`.
pub fn mu_single(params: &SingleDormParams) -> Result<f64, DormError> {
    mean_progeny(params.lambda())
}

/// `R0 = N p_G / (1 - n p_D)`.
pub fn r0_single(params: &SingleDormParams) -> Result<f64, DormError> {
    Ok(mu_single(params)? * params.global_mean())
}

/// Within-dorm epidemic size pgf for single rooms, in closed form
/// `-W0(z * (-lambda e^-lambda)) / lambda`.
///
/// The principal branch also gives the defective pgf when `lambda > 1`.
pub fn gd_single(z: f64, params: &SingleDormParams) -> Result<f64, DormError> {
    if !(0.0..=1.0).contains(&z) {
        return Err(PgfError::ArgumentOutOfRange(z).into());
    }
    Ok(borel_pgf(params.lambda(), z)?)
}

fn borel_pgf(lambda: f64, z: f64) -> Result<f64, PgfError> {
    if lambda == 0.0 {
        return Ok(z);
    }
    let w = pgf::lambert_w0(z * (-lambda * (-lambda).exp()))?;
    Ok((-w / lambda).clamp(0.0, 1.0))
}

/// Large-epidemic probability for single-room dorms.
pub fn zeta_single(params: &SingleDormParams) -> Result<f64, DormError> {
    let lambda = params.lambda();
    let global = params.global_mean();
    largest_root(|zeta| Ok(1.0 - zeta - borel_pgf(lambda, (-global * zeta).exp())?))
}

/// `DormAnalysis` for a single-room campus.
pub fn analyze_single(params: &SingleDormParams) -> Result<DormAnalysis, DormError> {
    Ok(DormAnalysis {
        lambda: params.lambda(),
        mu: mu_single(params).ok(),
        r0: r0_single(params).ok(),
        zeta: zeta_single(params)?,
    })
}

pub fn mu_double(params: &DoubleDormParams) -> Result<f64, DormError> {
    mean_progeny(params.lambda())
}

/// `R0 = N p_G / (1 - (1 + p_L) 2 n1 p_D)`.
pub fn r0_double(params: &DoubleDormParams) -> Result<f64, DormError> {
    Ok(mu_double(params)? * params.global_mean())
}

/// Offspring pgf for double rooms:
/// `p_L exp(2 n1 p_D (z-1))^2 + (1 - p_L) exp(2 n1 p_D (z-1))`.
pub fn g2b(z: f64, params: &DoubleDormParams) -> Result<f64, DormError> {
    Ok(params.offspring_pgf().eval(z)?)
}

/// Within-dorm epidemic size pgf for double rooms at one argument.
pub fn gd_double(z: f64, params: &DoubleDormParams, cfg: &FixedPointConfig) -> Result<f64, DormError> {
    Ok(pgf::solve_pgf_recursion_at(&params.offspring_pgf(), z, cfg)?)
}

/// Within-dorm epidemic size pgf for double rooms on the grid of `cfg`.
pub fn gd_double_curve(params: &DoubleDormParams, cfg: &FixedPointConfig) -> Result<TabulatedPgf, DormError> {
    Ok(pgf::solve_pgf_recursion(&params.offspring_pgf(), cfg)?)
}

/// Large-epidemic probability for double-room dorms.
pub fn zeta_double(params: &DoubleDormParams, cfg: &FixedPointConfig) -> Result<f64, DormError> {
    let base = params.offspring_pgf();
    let global = params.global_mean();
    largest_root(|zeta| Ok(1.0 - zeta - pgf::solve_pgf_recursion_at(&base, (-global * zeta).exp(), cfg)?))
}

pub fn analyze_double(params: &DoubleDormParams, cfg: &FixedPointConfig) -> Result<DormAnalysis, DormError> {
    Ok(DormAnalysis {
        lambda: params.lambda(),
        mu: mu_double(params).ok(),
        r0: r0_double(params).ok(),
        zeta: zeta_double(params, cfg)?,
    })
}

/// The `2 n1 p_D` at which `lambda_2 = 1`.
pub fn critical_pd_double(p_roommate: f64) -> f64 {
    1.0 / (1.0 + p_roommate)
}

/// Largest root in `[0, 1]` of `f`, where `f(1) <= 0`. Scans down from 1 for
/// the first sign change, then bisects. Returns 0 when no positive root
/// is found at scan resolution.
fn largest_root<F>(f: F) -> Result<f64, DormError>
where
    F: Fn(f64) -> Result<f64, DormError>,
{
    let steps = (1.0 / ROOT_SCAN_STEP).round() as usize;
    let mut upper = 1.0;
    let mut f_upper = f(upper)?;
    if f_upper >= 0.0 {
        return Ok(1.0);
    }
    for k in 1..=steps {
        let lower = 1.0 - k as f64 * ROOT_SCAN_STEP;
        let lower = if k == steps { 0.0 } else { lower };
        let f_lower = f(lower)?;
        if lower == 0.0 && f_lower <= 1e-12 {
            // zeta = 0 is always a root; accept it up to rounding in G_D(1).
            return Ok(0.0);
        }
        if f_lower >= 0.0 {
            return bisect(&f, lower, upper, f_upper);
        }
        upper = lower;
        f_upper = f_lower;
    }
    Ok(0.0)
}

fn bisect<F>(f: &F, mut lo: f64, mut hi: f64, f_hi: f64) -> Result<f64, DormError>
where
    F: Fn(f64) -> Result<f64, DormError>,
{
    debug_assert!(f_hi < 0.0);
    while hi - lo > ROOT_BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RoomVariant {
    Single,
    Double,
}

impl RoomVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            RoomVariant::Single => "single",
            RoomVariant::Double => "double",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variant: RoomVariant,
    /// `n p_D` (single) or `2 n1 p_D` (double).
    pub local: f64,
    pub p_roommate: f64,
    pub global_mean: f64,
    pub zeta: Result<f64, DormError>,
}

/// `zeta` over the grid `local_values x global_means`, sorted by
/// `(local index, global index)`. Rows are computed in parallel; a failing
/// row carries its error without aborting the sweep.
pub fn sweep_zeta(
    variant: RoomVariant,
    local_values: &[f64],
    p_roommate: f64,
    global_means: &[f64],
    cfg: &FixedPointConfig,
) -> Vec<SweepRow> {
    let cells: Vec<(f64, f64)> = local_values
        .iter()
        .flat_map(|&l| global_means.iter().map(move |&g| (l, g)))
        .collect();
    cells
        .par_iter()
        .map(|&(local, global_mean)| {
            let zeta = match variant {
                RoomVariant::Single => {
                    SingleDormParams::from_rates(local, global_mean).and_then(|p| zeta_single(&p))
                }
                RoomVariant::Double => DoubleDormParams::from_rates(local, p_roommate, global_mean)
                    .and_then(|p| zeta_double(&p, cfg)),
            };
            SweepRow {
                variant,
                local,
                p_roommate: if variant == RoomVariant::Double {
                    p_roommate
                } else {
                    0.0
                },
                global_mean,
                zeta,
            }
        })
        .collect()
}
