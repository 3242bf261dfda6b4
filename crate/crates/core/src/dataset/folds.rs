use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::manifest::Sample;
use crate::error::{Error, Result};

pub const FOLD_COUNT: usize = 4;

/// Person-disjoint partition into cross-validation groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldPlan {
    groups: Vec<Vec<u32>>,
}

/// Shuffles the distinct persons with `seed` and deals them round-robin into
/// four groups, so group sizes differ by at most one.
pub fn make_folds(persons: &[u32], seed: u64) -> Result<FoldPlan> {
    let mut unique: Vec<u32> = persons.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if unique.len() < FOLD_COUNT {
        return Err(Error::invalid(format!(
            "{} persons cannot form {FOLD_COUNT} person-disjoint groups",
            unique.len()
        )));
    }
    unique.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut groups = vec![Vec::new(); FOLD_COUNT];
    for (i, p) in unique.into_iter().enumerate() {
        groups[i % FOLD_COUNT].push(p);
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    Ok(FoldPlan { groups })
}

impl FoldPlan {
    pub fn groups(&self) -> &[Vec<u32>] {
        &self.groups
    }

    pub fn group_of(&self, person: u32) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&person))
    }

    /// Indices of `samples` used for training and testing when group `fold`
    /// is held out. Samples of persons outside the plan are an error.
    pub fn split(&self, samples: &[Sample], fold: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        if fold >= self.groups.len() {
            return Err(Error::invalid(format!("fold {fold} out of range")));
        }
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (i, s) in samples.iter().enumerate() {
            match self.group_of(s.person) {
                Some(g) if g == fold => test.push(i),
                Some(_) => train.push(i),
                None => return Err(Error::invalid(format!("person {} is not in the fold plan", s.person))),
            }
        }
        Ok((train, test))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourteen_persons() {
        let persons: Vec<u32> = (1..=14).collect();
        let plan = make_folds(&persons, 3).unwrap();
        let mut sizes: Vec<usize> = plan.groups().iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, [3, 3, 4, 4]);
        let mut all: Vec<u32> = plan.groups().concat();
        all.sort_unstable();
        assert_eq!(all, persons);
        assert_eq!(plan, make_folds(&persons, 3).unwrap());
        assert_ne!(plan, make_folds(&persons, 4).unwrap());
    }

    #[test]
    fn too_few_persons() {
        assert!(make_folds(&[1, 2, 3, 3, 2], 0).is_err());
        assert!(make_folds(&[1, 2, 3, 4], 0).is_ok());
    }

    #[test]
    fn split_is_person_disjoint() {
        let samples: Vec<Sample> = (0..40)
            .map(|i| Sample {
                person: 1 + i % 8,
                gesture: (i % 10) as usize,
                repetition: 1,
                depth_path: "x".into(),
                rotation_deg: 0,
            })
            .collect();
        let plan = make_folds(&(1..=8).collect::<Vec<_>>(), 0).unwrap();
        for fold in 0..FOLD_COUNT {
            let (train, test) = plan.split(&samples, fold).unwrap();
            assert_eq!(train.len() + test.len(), samples.len());
            for &t in &test {
                assert!(train.iter().all(|&r| samples[r].person != samples[t].person));
            }
        }
        assert!(plan.split(&samples, 4).is_err());
    }
}
