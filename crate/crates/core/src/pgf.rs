//! Probability generating functions and the fixed-point machinery shared by
//! the dorm models.
//!
//! A dorm's within-dorm epidemic size has a pgf `G` satisfying
//! `G(z) = z * base(G(z))`, where `base` is the offspring pgf of one
//! generation. [`solve_pgf_recursion`] iterates `h_l(z) = z * base(h_{l-1}(z))`
//! from `h_0(z) = z`; the iterates decrease monotonically to `G`.

use std::f64::consts::E;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PgfError {
    #[error("pgf argument {0} is outside [0, 1]")]
    ArgumentOutOfRange(f64),
    #[error("invalid pgf parameter: {0}")]
    InvalidParameter(String),
    #[error("lambert W argument {0} is below the branch point -1/e")]
    BelowBranchPoint(f64),
    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

/// A probability generating function evaluatable on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Pgf {
    /// `exp(lambda (z - 1))`.
    Poisson {
        lambda: f64,
    },
    /// `weight * exp(l0 (z - 1)) + (1 - weight) * exp(l1 (z - 1))`.
    TwoPoissonMixture {
        weight: f64,
        lambda_pair: (f64, f64),
    },
    Tabulated(TabulatedPgf),
}

impl Pgf {
    pub fn poisson(lambda: f64) -> Result<Self, PgfError> {
        check_rate(lambda)?;
        Ok(Pgf::Poisson { lambda })
    }

    pub fn two_poisson_mixture(weight: f64, lambda_pair: (f64, f64)) -> Result<Self, PgfError> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(PgfError::InvalidParameter(format!(
                "mixture weight {weight} outside [0, 1]"
            )));
        }
        check_rate(lambda_pair.0)?;
        check_rate(lambda_pair.1)?;
        Ok(Pgf::TwoPoissonMixture { weight, lambda_pair })
    }

    pub fn eval(&self, z: f64) -> Result<f64, PgfError> {
        check_argument(z)?;
        Ok(self.eval_unchecked(z))
    }

    /// Evaluation without the domain check, for inner solver loops.
    pub(crate) fn eval_unchecked(&self, z: f64) -> f64 {
        match self {
            Pgf::Poisson { lambda } => (lambda * (z - 1.0)).exp(),
            Pgf::TwoPoissonMixture {
                weight,
                lambda_pair: (l0, l1),
            } => weight * (l0 * (z - 1.0)).exp() + (1.0 - weight) * (l1 * (z - 1.0)).exp(),
            Pgf::Tabulated(t) => t.eval_unchecked(z),
        }
    }

    /// Offspring mean, `G'(1)`. Tabulated pgfs use the last grid segment.
    pub fn mean(&self) -> f64 {
        match self {
            Pgf::Poisson { lambda } => *lambda,
            Pgf::TwoPoissonMixture {
                weight,
                lambda_pair: (l0, l1),
            } => weight * l0 + (1.0 - weight) * l1,
            Pgf::Tabulated(t) => {
                let n = t.grid.len();
                (t.values[n - 1] - t.values[n - 2]) / (t.grid[n - 1] - t.grid[n - 2])
            }
        }
    }

    fn is_degenerate_at_zero(&self) -> bool {
        match self {
            Pgf::Poisson { lambda } => *lambda == 0.0,
            Pgf::TwoPoissonMixture {
                lambda_pair: (l0, l1),
                ..
            } => *l0 == 0.0 && *l1 == 0.0,
            Pgf::Tabulated(_) => false,
        }
    }
}

fn check_argument(z: f64) -> Result<(), PgfError> {
    if (0.0..=1.0).contains(&z) {
        Ok(())
    } else {
        Err(PgfError::ArgumentOutOfRange(z))
    }
}

fn check_rate(lambda: f64) -> Result<(), PgfError> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(PgfError::InvalidParameter(format!(
            "poisson rate {lambda} must be finite and nonnegative"
        )))
    }
}

/// `exp(lambda (z - 1))`, the pgf of Poisson(lambda).
pub fn poisson_pgf_eval(lambda: f64, z: f64) -> Result<f64, PgfError> {
    Pgf::poisson(lambda)?.eval(z)
}

/// A pgf sampled on an ordered grid of `[0, 1]`, linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPgf {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedPgf {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self, PgfError> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(PgfError::InvalidParameter(
                "tabulated pgf needs at least two grid points and one value per point".into(),
            ));
        }
        if grid[0] != 0.0 || grid[grid.len() - 1] != 1.0 {
            return Err(PgfError::InvalidParameter(
                "tabulated grid must include both endpoints 0 and 1".into(),
            ));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PgfError::InvalidParameter(
                "tabulated grid must be strictly increasing".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, z: f64) -> Result<f64, PgfError> {
        check_argument(z)?;
        Ok(self.eval_unchecked(z))
    }

    fn eval_unchecked(&self, z: f64) -> f64 {
        // Index of the first grid point strictly greater than z.
        let hi = self.grid.partition_point(|&g| g <= z);
        if hi == 0 {
            return self.values[0];
        }
        if hi == self.grid.len() {
            return self.values[hi - 1];
        }
        let (z0, z1) = (self.grid[hi - 1], self.grid[hi]);
        let (v0, v1) = (self.values[hi - 1], self.values[hi]);
        v0 + (v1 - v0) * (z - z0) / (z1 - z0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    /// Sup-norm change between iterates at which iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Number of uniformly spaced z-points in `[0, 1]`, endpoints included.
    pub grid_size: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 10_000,
            grid_size: 1001,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<(), PgfError> {
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(PgfError::InvalidParameter("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(PgfError::InvalidParameter(
                "max_iterations must be positive".into(),
            ));
        }
        if self.grid_size < 2 {
            return Err(PgfError::InvalidParameter(
                "grid must contain at least the two endpoints".into(),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let last = (self.grid_size - 1) as f64;
        (0..self.grid_size).map(|i| i as f64 / last).collect()
    }
}

/// Principal branch `W0` of the Lambert W function: the `w >= -1` solving
/// `w e^w = x`, for `x >= -1/e`.
pub fn lambert_w0(x: f64) -> Result<f64, PgfError> {
    const BRANCH: f64 = -1.0 / E;
    if x.is_nan() || x < BRANCH {
        // Allow rounding in callers that compute -1/e themselves.
        if x >= BRANCH - 4.0 * f64::EPSILON {
            return Ok(-1.0);
        }
        return Err(PgfError::BelowBranchPoint(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let mut w = initial_guess(x);
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        // At the branch point the Halley denominator vanishes.
        if wp1.abs() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        let next = (w - step).max(-1.0);
        if (next - w).abs() <= 4.0 * f64::EPSILON * (1.0 + next.abs()) {
            w = next;
            break;
        }
        w = next;
    }
    Ok(w)
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.25 {
        // Series in p = sqrt(2 (e x + 1)) about the branch point.
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        (1.0 + x).ln() * 0.75
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}

/// The successive iterates `h_l` of `h_l(z) = z * base(h_{l-1}(z))` on a set
/// of z-points, starting from `h_0(z) = z`. Yields `h_1, h_2, ...`.
pub struct PgfIterates<'a> {
    base: &'a Pgf,
    points: &'a [f64],
    current: Vec<f64>,
}

impl<'a> PgfIterates<'a> {
    pub fn new(base: &'a Pgf, points: &'a [f64]) -> Self {
        Self {
            base,
            points,
            current: points.to_vec(),
        }
    }
}

impl Iterator for PgfIterates<'_> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        for (h, &z) in self.current.iter_mut().zip(self.points) {
            *h = z * self.base.eval_unchecked(*h);
        }
        Some(self.current.clone())
    }
}

/// Solves `G(z) = z * base(G(z))` on the uniform grid of `cfg`.
///
/// For a supercritical `base` (mean above one) the total progeny is infinite
/// with positive probability and `G(1)` is the extinction probability, so the
/// endpoint is filled with the smallest root of `s = base(s)` rather than the
/// trivial fixed point 1.
pub fn solve_pgf_recursion(base: &Pgf, cfg: &FixedPointConfig) -> Result<TabulatedPgf, PgfError> {
    cfg.validate()?;
    let grid = cfg.grid();
    let values = solve_at_points(base, &grid, cfg)?;
    TabulatedPgf::new(grid, values)
}

/// Pointwise variant of [`solve_pgf_recursion`]: the same iteration run at a
/// single argument, with no interpolation error.
pub fn solve_pgf_recursion_at(base: &Pgf, z: f64, cfg: &FixedPointConfig) -> Result<f64, PgfError> {
    check_argument(z)?;
    cfg.validate()?;
    Ok(solve_at_points(base, &[z], cfg)?[0])
}

fn solve_at_points(base: &Pgf, points: &[f64], cfg: &FixedPointConfig) -> Result<Vec<f64>, PgfError> {
    if base.is_degenerate_at_zero() {
        return Ok(points.to_vec());
    }
    let supercritical = base.mean() > 1.0;
    let mut current = points.to_vec();
    let mut converged = false;
    let mut change = f64::INFINITY;
    for next in PgfIterates::new(base, points).take(cfg.max_iterations) {
        change = next
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        debug_assert!(next.iter().zip(&current).all(|(a, b)| *a <= *b + 1e-15));
        current = next;
        if change < cfg.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(PgfError::NonConvergence {
            iterations: cfg.max_iterations,
            residual: change,
        });
    }
    if supercritical {
        let extinction = smallest_fixed_point(base, cfg)?;
        for (h, &z) in current.iter_mut().zip(points) {
            if z == 1.0 {
                *h = extinction;
            }
        }
    }
    Ok(current)
}

/// Smallest root of `s = base(s)` in `[0, 1]`, by iteration from 0.
pub fn smallest_fixed_point(base: &Pgf, cfg: &FixedPointConfig) -> Result<f64, PgfError> {
    let mut s = 0.0;
    let mut change = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let next = base.eval_unchecked(s);
        change = (next - s).abs();
        s = next;
        if change < cfg.tolerance {
            return Ok(s);
        }
    }
    Err(PgfError::NonConvergence {
        iterations: cfg.max_iterations,
        residual: change,
    })
}
