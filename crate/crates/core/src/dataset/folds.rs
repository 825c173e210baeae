use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AudioRecord, FoldRole, Gender, Task};
use crate::error::{Error, Result};

const DIGIT_SPLITS: usize = 5;
const GENDER_SPLITS: usize = 4;
const GENDER_PER_SEX: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub speakers: Vec<u32>,
}

/// Speaker-disjoint splits for one task. Rotation `k` tests on split `k`,
/// validates on split `k + 1` (cyclically) and trains on the rest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub task: Task,
    pub seed: u64,
    pub splits: Vec<Split>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rotation {
    pub train: Vec<usize>,
    pub validation: usize,
    pub test: usize,
}

impl FoldPlan {
    pub fn rotations(&self) -> usize {
        self.splits.len()
    }

    pub fn rotation(&self, k: usize) -> Result<Rotation> {
        let n = self.splits.len();
        if k >= n {
            return Err(Error::InvalidArgument(format!("rotation {k} of {n}")));
        }
        let validation = (k + 1) % n;
        Ok(Rotation {
            train: (0..n).filter(|&i| i != k && i != validation).collect(),
            validation,
            test: k,
        })
    }

    pub fn split_of(&self, speaker: u32) -> Option<usize> {
        self.splits.iter().position(|s| s.speakers.contains(&speaker))
    }

    pub fn role_of(&self, speaker: u32, rotation: usize) -> Result<Option<FoldRole>> {
        let rot = self.rotation(rotation)?;
        Ok(self.split_of(speaker).map(|s| {
            if s == rot.test {
                FoldRole::Test
            } else if s == rot.validation {
                FoldRole::Validation
            } else {
                FoldRole::Train
            }
        }))
    }

    /// Sets each record's split tag, dropping records of speakers the plan
    /// does not use (such as unsampled male speakers).
    pub fn assign(&self, records: &[AudioRecord]) -> Vec<AudioRecord> {
        records
            .iter()
            .filter_map(|r| {
                self.split_of(r.speaker).map(|s| AudioRecord {
                    fold: Some(s),
                    ..r.clone()
                })
            })
            .collect()
    }

    /// Records of `rotation` having `role`, in input order.
    pub fn select<'a>(
        &self,
        records: &'a [AudioRecord],
        rotation: usize,
        role: FoldRole,
    ) -> Result<Vec<&'a AudioRecord>> {
        let mut out = Vec::new();
        for r in records {
            if self.role_of(r.speaker, rotation)? == Some(role) {
                out.push(r);
            }
        }
        Ok(out)
    }

    /// Checks that no speaker occurs in two splits.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (i, s) in self.splits.iter().enumerate() {
            for &sp in &s.speakers {
                if !seen.insert(sp) {
                    return Err(Error::Data(format!("speaker {sp} repeated (split {i})")));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("fold plans always serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: FoldPlan = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        plan.check_disjoint()?;
        Ok(plan)
    }
}

/// Builds the cross-validation plan from the speakers present in `records`.
///
/// Digit task: all speakers are shuffled and dealt into five equal splits.
/// Gender task: twelve female and twelve male speakers are drawn, and each
/// of the four splits receives three of each.
pub fn make_folds(records: &[AudioRecord], task: Task, seed: u64) -> Result<FoldPlan> {
    let mut genders: BTreeMap<u32, Gender> = BTreeMap::new();
    for r in records {
        if let Some(&g) = genders.get(&r.speaker) {
            if g != r.gender {
                return Err(Error::Data(format!("speaker {} has conflicting genders", r.speaker)));
            }
        }
        genders.insert(r.speaker, r.gender);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let splits = match task {
        Task::Digit => {
            let n = genders.len();
            if n < DIGIT_SPLITS || !n.is_multiple_of(DIGIT_SPLITS) {
                return Err(Error::Data(format!(
                    "digit folds need a positive multiple of {DIGIT_SPLITS} speakers, found {n}"
                )));
            }
            let mut speakers: Vec<u32> = genders.keys().copied().collect();
            speakers.shuffle(&mut rng);
            speakers
                .chunks(n / DIGIT_SPLITS)
                .map(|c| sorted_split(c.to_vec()))
                .collect()
        }
        Task::Gender => {
            let mut pick = |g: Gender| -> Result<Vec<u32>> {
                let mut pool: Vec<u32> =
                    genders.iter().filter(|(_, &v)| v == g).map(|(&s, _)| s).collect();
                if pool.len() < GENDER_PER_SEX {
                    return Err(Error::Data(format!(
                        "gender folds need {GENDER_PER_SEX} {g:?} speakers, found {}",
                        pool.len()
                    )));
                }
                pool.shuffle(&mut rng);
                pool.truncate(GENDER_PER_SEX);
                Ok(pool)
            };
            let female = pick(Gender::Female)?;
            let male = pick(Gender::Male)?;
            let per = GENDER_PER_SEX / GENDER_SPLITS;
            (0..GENDER_SPLITS)
                .map(|k| {
                    let mut s = female[k * per..(k + 1) * per].to_vec();
                    s.extend_from_slice(&male[k * per..(k + 1) * per]);
                    sorted_split(s)
                })
                .collect()
        }
    };
    let plan = FoldPlan { task, seed, splits };
    plan.check_disjoint()?;
    Ok(plan)
}

fn sorted_split(mut speakers: Vec<u32>) -> Split {
    speakers.sort_unstable();
    Split { speakers }
}
