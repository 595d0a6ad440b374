use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SimError;
use crate::classes::ClassSchedule;

const MAX_REPAIR_SWAPS: u64 = 1_000_000;

/// Each student's three distinct classes, plus the per-class rosters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enrollment {
    classes: Vec<[u32; 3]>,
    rosters: Vec<Vec<u32>>,
}

impl Enrollment {
    /// Configuration-model assignment: shuffle the multiset of seats, deal
    /// three per student, then swap seats between students until nobody
    /// holds two seats in the same class.
    pub fn sample<R: Rng + ?Sized>(schedule: &ClassSchedule, rng: &mut R) -> Result<Self, SimError> {
        let students = schedule.num_students();
        if let Some(&size) = schedule.sizes().iter().find(|&&c| u64::from(c) > students) {
            return Err(SimError::Infeasible { class_size: size });
        }
        let mut seats: Vec<u32> = schedule
            .sizes()
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i as u32, c as usize))
            .collect();
        seats.shuffle(rng);
        repair(&mut seats, rng).map_err(|()| SimError::Infeasible {
            class_size: schedule.max_size(),
        })?;

        let classes: Vec<[u32; 3]> = seats.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let mut rosters = vec![Vec::new(); schedule.len()];
        for (s, cs) in classes.iter().enumerate() {
            for &c in cs {
                rosters[c as usize].push(s as u32);
            }
        }
        Ok(Self { classes, rosters })
    }

    pub fn num_students(&self) -> usize {
        self.classes.len()
    }

    pub fn classes_of(&self, student: usize) -> &[u32; 3] {
        &self.classes[student]
    }

    pub fn roster(&self, class: usize) -> &[u32] {
        &self.rosters[class]
    }

    pub fn num_classes(&self) -> usize {
        self.rosters.len()
    }
}

/// Deterministic [`Enrollment::sample`] from a seed.
pub fn sample_enrollment(schedule: &ClassSchedule, seed: u64) -> Result<Enrollment, SimError> {
    Enrollment::sample(schedule, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn duplicates(seats: &[u32], student: usize) -> u32 {
    let s = &seats[3 * student..3 * student + 3];
    u32::from(s[0] == s[1]) + u32::from(s[0] == s[2]) + u32::from(s[1] == s[2])
}

/// Random pairwise swaps that never increase the duplicate count of the two
/// students involved. Errs after `MAX_REPAIR_SWAPS` attempts.
fn repair<R: Rng + ?Sized>(seats: &mut [u32], rng: &mut R) -> Result<(), ()> {
    let students = seats.len() / 3;
    let mut bad: Vec<usize> = (0..students).filter(|&s| duplicates(seats, s) > 0).collect();
    let mut attempts = 0u64;
    while let Some(&s) = bad.last() {
        if duplicates(seats, s) == 0 {
            bad.pop();
            continue;
        }
        attempts += 1;
        if attempts > MAX_REPAIR_SWAPS {
            return Err(());
        }
        let base = 3 * s;
        let a = if seats[base] == seats[base + 1] || seats[base] == seats[base + 2] {
            base
        } else {
            base + 1
        };
        let b = rng.gen_range(0..seats.len());
        let t = b / 3;
        if t == s || seats[a] == seats[b] {
            continue;
        }
        let before = duplicates(seats, s) + duplicates(seats, t);
        seats.swap(a, b);
        let after = duplicates(seats, s) + duplicates(seats, t);
        if after > before {
            seats.swap(a, b);
        } else if duplicates(seats, t) > 0 {
            bad.push(t);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_valid(e: &Enrollment, schedule: &ClassSchedule) {
        assert_eq!(e.num_students() as u64, schedule.num_students());
        for s in 0..e.num_students() {
            let c = e.classes_of(s);
            assert!(c[0] != c[1] && c[0] != c[2] && c[1] != c[2]);
        }
        for (i, &size) in schedule.sizes().iter().enumerate() {
            assert_eq!(e.roster(i).len(), size as usize);
        }
    }

    #[test]
    fn scenario1_rosters() {
        let s = ClassSchedule::scenario1();
        let e = sample_enrollment(&s, 11).unwrap();
        assert_eq!(e.num_students(), 1000);
        check_valid(&e, &s);
    }

    #[test]
    fn forced_assignment() {
        let s = ClassSchedule::new(vec![3, 3, 3]).unwrap();
        for seed in 0..50 {
            let e = sample_enrollment(&s, seed).unwrap();
            check_valid(&e, &s);
            for st in 0..3 {
                let mut c = *e.classes_of(st);
                c.sort_unstable();
                assert_eq!(c, [0, 1, 2]);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let s = ClassSchedule::scenario2();
        assert_eq!(
            sample_enrollment(&s, 5).unwrap(),
            sample_enrollment(&s, 5).unwrap()
        );
        assert_ne!(
            sample_enrollment(&s, 5).unwrap(),
            sample_enrollment(&s, 6).unwrap()
        );
    }

    #[test]
    fn oversized_class_is_infeasible() {
        // 4 students cannot fill a class of 5.
        let s = ClassSchedule::new(vec![5, 4, 3]).unwrap();
        assert_eq!(
            sample_enrollment(&s, 1).unwrap_err(),
            SimError::Infeasible { class_size: 5 }
        );
    }

    #[test]
    fn tight_but_feasible_schedule() {
        // Two classes must contain every student.
        let s = ClassSchedule::new(vec![10, 10, 4, 3, 3]).unwrap();
        for seed in 0..20 {
            check_valid(&sample_enrollment(&s, seed).unwrap(), &s);
        }
    }
}
