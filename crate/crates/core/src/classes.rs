//! Class-schedule next-generation matrices and online-class cutoffs.
//!
//! Every student takes three classes. An infected student in class `i`
//! infects each classmate with probability `p` and is also present, through
//! the two other classes they take, in class `j` with probability
//! `2 c_j / (S - c_i)`. The mean matrix therefore is
//!
//! ```text
//! m[i][i] = c_i - 1
//! m[i][j] = 2 c_j (c_j - 1) / (S - c_i)      (i != j)
//! ```
//!
//! stored without the factor `p`; `R0 = p * rho(m)`.

use rayon::prelude::*;
use thiserror::Error;

const POWER_MAX_ITERATIONS: usize = 100_000;
const POWER_REL_TOL: f64 = 1e-12;
/// Slack on `R0 <= 1` when deciding a cutoff is safe.
const SAFE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("reduction needs exactly two distinct class sizes, found {0}")]
    Shape(usize),
    #[error("power iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
}

/// Class sizes `c_1..c_m`; every student fills three seats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSchedule {
    sizes: Vec<u32>,
}

impl ClassSchedule {
    pub fn new(sizes: Vec<u32>) -> Result<Self, ClassError> {
        if sizes.len() < 2 {
            return Err(ClassError::InvalidSchedule(format!(
                "need at least two classes, got {}",
                sizes.len()
            )));
        }
        if let Some(pos) = sizes.iter().position(|&c| c == 0) {
            return Err(ClassError::InvalidSchedule(format!("class {pos} has size 0")));
        }
        let seats: u64 = sizes.iter().map(|&c| u64::from(c)).sum();
        if !seats.is_multiple_of(3) {
            return Err(ClassError::InvalidSchedule(format!(
                "total seats {seats} is not divisible by 3"
            )));
        }
        Ok(Self { sizes })
    }

    /// 100 classes of 30.
    pub fn scenario1() -> Self {
        Self { sizes: vec![30; 100] }
    }

    /// 25 classes of 60 followed by 75 classes of 20.
    pub fn scenario2() -> Self {
        let mut sizes = vec![60; 25];
        sizes.extend(std::iter::repeat_n(20, 75));
        Self { sizes }
    }

    /// One class of each size 10, 11, ..., 120.
    pub fn range_10_to_120() -> Self {
        Self {
            sizes: (10..=120).collect(),
        }
    }

    pub fn sizes(&self) -> &[u32] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn total_seats(&self) -> u64 {
        self.sizes.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn num_students(&self) -> u64 {
        self.total_seats() / 3
    }

    pub fn min_size(&self) -> u32 {
        *self.sizes.iter().min().expect("schedule is nonempty")
    }

    pub fn max_size(&self) -> u32 {
        *self.sizes.iter().max().expect("schedule is nonempty")
    }
}

/// Dense row-major nonnegative matrix of expected infections per unit `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanMatrix {
    dim: usize,
    entries: Vec<f64>,
    sizes: Vec<u32>,
}

impl MeanMatrix {
    /// Builds a matrix from explicit rows. `sizes` labels the classes for
    /// cutoffs.
    pub fn from_rows(rows: Vec<Vec<f64>>, sizes: Vec<u32>) -> Result<Self, ClassError> {
        let dim = rows.len();
        if sizes.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(ClassError::InvalidSchedule(
                "matrix must be square and labelled".into(),
            ));
        }
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        if entries.iter().any(|&x| x.is_nan() || x < 0.0) {
            return Err(ClassError::InvalidSchedule(
                "matrix entries must be nonnegative".into(),
            ));
        }
        Ok(Self { dim, entries, sizes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn sizes(&self) -> &[u32] {
        &self.sizes
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).iter().sum()).collect()
    }

    fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

pub fn build_mean_matrix(schedule: &ClassSchedule) -> MeanMatrix {
    let seats = schedule.total_seats() as f64;
    let sizes = schedule.sizes();
    let dim = sizes.len();
    let mut entries = Vec::with_capacity(dim * dim);
    for (i, &ci) in sizes.iter().enumerate() {
        let ci = f64::from(ci);
        entries.extend(sizes.iter().enumerate().map(|(j, &cj)| {
            let cj = f64::from(cj);
            if i == j {
                cj - 1.0
            } else {
                2.0 * cj * (cj - 1.0) / (seats - ci)
            }
        }));
    }
    MeanMatrix {
        dim,
        entries,
        sizes: sizes.to_vec(),
    }
}

/// Largest class size kept in person; larger classes move online.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CutoffPolicy {
    pub k: u32,
}

/// Zeroes the column of every class with size above `policy.k`.
pub fn apply_cutoff(matrix: &MeanMatrix, policy: CutoffPolicy) -> MeanMatrix {
    let mut out = matrix.clone();
    let online: Vec<usize> = (0..matrix.dim).filter(|&j| matrix.sizes[j] > policy.k).collect();
    for i in 0..out.dim {
        for &j in &online {
            out.entries[i * out.dim + j] = 0.0;
        }
    }
    out
}

/// Spectral radius of a nonnegative matrix.
///
/// Power iteration on `M + I`, started from the all-ones vector. The shift
/// keeps the Perron root strictly dominant when cutoffs make `M` reducible.
pub fn spectral_radius(matrix: &MeanMatrix) -> Result<f64, ClassError> {
    let n = matrix.dim;
    if matrix.entries.iter().all(|&v| v == 0.0) {
        // Everything moved online; avoid returning shift round-off.
        return Ok(0.0);
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut y = vec![0.0; n];
    let mut previous = f64::NAN;
    for _ in 0..POWER_MAX_ITERATIONS {
        matrix.mul_vec(&x, &mut y);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += xi;
        }
        // Rayleigh quotient of the shifted matrix; x has unit norm.
        let quotient: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        if (quotient - previous).abs() <= POWER_REL_TOL * quotient.abs() {
            return Ok((quotient - 1.0).max(0.0));
        }
        previous = quotient;
    }
    Err(ClassError::NonConvergence {
        iterations: POWER_MAX_ITERATIONS,
    })
}

/// Lumps a two-size schedule into the 2x2 matrix acting on class types,
/// ordered by first appearance in the schedule.
pub fn reduced_two_block(schedule: &ClassSchedule) -> Result<[[f64; 2]; 2], ClassError> {
    let mut distinct: Vec<u32> = Vec::new();
    for &c in schedule.sizes() {
        if !distinct.contains(&c) {
            distinct.push(c);
        }
    }
    if distinct.len() != 2 {
        return Err(ClassError::Shape(distinct.len()));
    }
    let seats = schedule.total_seats() as f64;
    let count = |size: u32| schedule.sizes().iter().filter(|&&c| c == size).count() as f64;
    let (a, b) = (distinct[0], distinct[1]);
    let (na, nb) = (count(a), count(b));
    let (a, b) = (f64::from(a), f64::from(b));
    let cross = |from: f64, to: f64| 2.0 * to * (to - 1.0) / (seats - from);
    Ok([
        [(a - 1.0) + (na - 1.0) * cross(a, a), nb * cross(a, b)],
        [na * cross(b, a), (b - 1.0) + (nb - 1.0) * cross(b, b)],
    ])
}

/// Eigenvalues of a real 2x2 matrix with real spectrum, larger first.
pub fn eigenvalues_2x2(m: &[[f64; 2]; 2]) -> (f64, f64) {
    let trace = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (trace * trace - 4.0 * det).max(0.0).sqrt();
    ((trace + disc) / 2.0, (trace - disc) / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffRow {
    pub p: f64,
    pub k: u32,
    pub r0: Result<f64, ClassError>,
}

/// `R0 = p * rho(cutoff(M, k))` for every `(p, k)`, ordered by `p` index then
/// `k` index.
pub fn cutoff_sweep(schedule: &ClassSchedule, p_values: &[f64], k_values: &[u32]) -> Vec<CutoffRow> {
    let matrix = build_mean_matrix(schedule);
    let radii: Vec<Result<f64, ClassError>> = k_values
        .par_iter()
        .map(|&k| spectral_radius(&apply_cutoff(&matrix, CutoffPolicy { k })))
        .collect();
    p_values
        .iter()
        .flat_map(|&p| {
            k_values.iter().zip(&radii).map(move |(&k, rho)| CutoffRow {
                p,
                k,
                r0: rho.clone().map(|r| p * r),
            })
        })
        .collect()
}

/// Largest `k` with `p * rho(cutoff(M, k)) <= 1`. Never smaller than
/// `min(c) - 1`, where every class is online.
pub fn max_safe_cutoff(schedule: &ClassSchedule, p: f64) -> Result<u32, ClassError> {
    let matrix = build_mean_matrix(schedule);
    let mut sizes: Vec<u32> = schedule.sizes().to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    let safe = |k: u32| -> Result<bool, ClassError> {
        let rho = spectral_radius(&apply_cutoff(&matrix, CutoffPolicy { k }))?;
        Ok(p * rho <= 1.0 + SAFE_TOLERANCE)
    };
    // rho only changes at class sizes and is nondecreasing in k, so binary
    // search over the distinct sizes for the last safe one.
    let (mut lo, mut hi) = (0usize, sizes.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if safe(sizes[mid])? {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    Ok(if lo == sizes.len() {
        sizes[sizes.len() - 1]
    } else {
        sizes[lo] - 1
    })
}
