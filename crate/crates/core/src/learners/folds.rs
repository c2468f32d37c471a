use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, shuffle, stream_rng, tag};

/// Partition of `0..n` into `J` validation folds. Fold indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    folds: usize,
    fold_of: Vec<usize>,
}

impl FoldAssignment {
    /// Builds an assignment from explicit fold labels in `0..folds`.
    pub fn from_labels(folds: usize, fold_of: Vec<usize>) -> Result<Self> {
        if folds < 1 || fold_of.iter().any(|&f| f >= folds) {
            return Err(Error::InvalidArgument("fold label out of range".into()));
        }
        Ok(Self { folds, fold_of })
    }

    pub fn num_folds(&self) -> usize {
        self.folds
    }

    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn fold_of(&self, unit: usize) -> usize {
        self.fold_of[unit]
    }

    pub fn labels(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn validation(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn training(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

/// Stratified random partition. Each stratum is shuffled and dealt
/// round-robin across folds, continuing the deal from one stratum to the
/// next, so fold sizes differ by at most one overall and per stratum.
/// Strata smaller than `J` are pooled and dealt together.
pub fn make_folds(n: usize, folds: usize, strata: Option<&[u64]>, seed: u64) -> Result<FoldAssignment> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    if folds > n {
        return Err(Error::InvalidArgument(format!("{folds} folds for {n} units")));
    }
    if let Some(s) = strata {
        if s.len() != n {
            return Err(Error::InvalidArgument(format!("{} stratum labels for {n} units", s.len())));
        }
    }
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        groups.entry(strata.map_or(0, |s| s[i])).or_default().push(i);
    }
    let mut ordered: Vec<Vec<usize>> = Vec::new();
    let mut pooled: Vec<usize> = Vec::new();
    for (label, members) in groups {
        if members.len() < folds && strata.is_some() {
            log::warn!("stratum {label} has {} units, fewer than {folds} folds; assigning it unstratified", members.len());
            pooled.extend(members);
        } else {
            ordered.push(members);
        }
    }
    if !pooled.is_empty() {
        ordered.push(pooled);
    }
    let mut rng = stream_rng(derive_seed(seed, tag::FOLDS), 0);
    let mut fold_of = vec![0; n];
    let mut position = 0;
    for mut members in ordered {
        shuffle(&mut rng, &mut members);
        for i in members {
            fold_of[i] = position % folds;
            position += 1;
        }
    }
    Ok(FoldAssignment { folds, fold_of })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_and_leave_one_out() {
        let f = make_folds(10, 5, None, 1).unwrap();
        let mut seen = vec![false; 10];
        for k in 0..5 {
            let v = f.validation(k);
            assert_eq!(v.len(), 2);
            for i in v {
                assert!(!seen[i]);
                seen[i] = true;
            }
            assert_eq!(f.training(k).len(), 8);
        }
        assert!(seen.iter().all(|&s| s));
        let loo = make_folds(10, 10, None, 1).unwrap();
        assert!((0..10).all(|k| loo.validation(k).len() == 1));
    }

    #[test]
    fn stratified_events_are_balanced() {
        let strata: Vec<u64> = (0..100).map(|i| u64::from(i % 10 < 3)).collect();
        let f = make_folds(100, 10, Some(&strata), 4).unwrap();
        for k in 0..10 {
            let v = f.validation(k);
            assert_eq!(v.len(), 10);
            assert_eq!(v.iter().filter(|&&i| strata[i] == 1).count(), 3);
        }
    }

    #[test]
    fn invalid_fold_counts() {
        assert!(make_folds(5, 6, None, 0).is_err());
        assert!(make_folds(5, 1, None, 0).is_err());
    }

    #[test]
    fn small_strata_are_pooled() {
        let strata = [0, 0, 0, 0, 0, 0, 1, 2];
        let f = make_folds(8, 4, Some(&strata), 0).unwrap();
        assert!((0..4).all(|k| f.validation(k).len() == 2));
    }
}
