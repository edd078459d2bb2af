//! The two pre-calculated recommendation sets a study compares.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::BenchmarkDataset;
use crate::ids::{ItemId, UserId};

/// One row of a recommendations file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecEntry {
    pub algorithm: String,
    pub user: UserId,
    pub rank: u32,
    pub item: ItemId,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecsError {
    #[error("expected exactly two algorithm labels, found {found:?}")]
    NotExactlyTwoAlgorithms { found: Vec<String> },
    #[error("ranks for user {user} under '{label}' are not contiguous from 1")]
    RankGap { label: String, user: UserId },
    #[error("user {user} has a duplicate item under '{label}'")]
    DuplicateItem { label: String, user: UserId },
    #[error("line {line}: user {user} is not in the dataset")]
    UnknownUser { line: usize, user: UserId },
    #[error("users {missing:?} have no recommendations under '{label}'")]
    UserCoverageMismatch { label: String, missing: Vec<UserId> },
}

/// Two labeled maps of user -> ranked item list. Label 0 is the label that
/// appears first in the source file.
#[derive(Clone, Debug, PartialEq)]
pub struct RecommendationSets {
    labels: [String; 2],
    lists: [BTreeMap<UserId, Vec<ItemId>>; 2],
}

impl RecommendationSets {
    /// Validates rows given as `(line number, entry)` pairs against `dataset`.
    pub fn from_rows<I>(rows: I, dataset: &BenchmarkDataset) -> Result<Self, RecsError>
    where
        I: IntoIterator<Item = (usize, RecEntry)>,
    {
        let mut labels: Vec<String> = Vec::new();
        let mut grouped: Vec<BTreeMap<UserId, Vec<(u32, ItemId)>>> = Vec::new();
        let mut unknown: Option<(usize, UserId)> = None;

        for (line, row) in rows {
            if unknown.is_none() && dataset.user(row.user).is_none() {
                unknown = Some((line, row.user));
            }
            let idx = match labels.iter().position(|l| *l == row.algorithm) {
                Some(idx) => idx,
                None => {
                    labels.push(row.algorithm.clone());
                    grouped.push(BTreeMap::new());
                    labels.len() - 1
                }
            };
            grouped[idx]
                .entry(row.user)
                .or_default()
                .push((row.rank, row.item));
        }

        if labels.len() != 2 {
            return Err(RecsError::NotExactlyTwoAlgorithms { found: labels });
        }
        if let Some((line, user)) = unknown {
            return Err(RecsError::UnknownUser { line, user });
        }

        let mut lists: [BTreeMap<UserId, Vec<ItemId>>; 2] = [BTreeMap::new(), BTreeMap::new()];
        for (idx, by_user) in grouped.into_iter().enumerate() {
            for (user, mut ranked) in by_user {
                ranked.sort_by_key(|e| e.0);
                let contiguous = ranked
                    .iter()
                    .enumerate()
                    .all(|(pos, e)| e.0 as usize == pos + 1);
                if !contiguous {
                    return Err(RecsError::RankGap {
                        label: labels[idx].clone(),
                        user,
                    });
                }
                let mut seen: Vec<ItemId> = ranked.iter().map(|e| e.1).collect();
                seen.sort_unstable();
                if seen.windows(2).any(|w| w[0] == w[1]) {
                    return Err(RecsError::DuplicateItem {
                        label: labels[idx].clone(),
                        user,
                    });
                }
                lists[idx].insert(user, ranked.into_iter().map(|e| e.1).collect());
            }
        }

        for (this, other) in [(0, 1), (1, 0)] {
            let missing: Vec<UserId> = lists[other]
                .keys()
                .filter(|u| !lists[this].contains_key(u))
                .copied()
                .collect();
            if !missing.is_empty() {
                return Err(RecsError::UserCoverageMismatch {
                    label: labels[this].clone(),
                    missing,
                });
            }
        }

        let [a, b]: [String; 2] = labels.try_into().expect("two labels");
        Ok(RecommendationSets {
            labels: [a, b],
            lists,
        })
    }

    pub fn labels(&self) -> [&str; 2] {
        [&self.labels[0], &self.labels[1]]
    }

    /// Ranked list for `user` under label index 0 or 1.
    pub fn list(&self, label: usize, user: UserId) -> Option<&[ItemId]> {
        self.lists.get(label)?.get(&user).map(Vec::as_slice)
    }

    /// Covered users in ascending order (identical for both labels).
    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.lists[0].keys().copied()
    }

    pub fn user_count(&self) -> usize {
        self.lists[0].len()
    }

    pub fn covers(&self, user: UserId) -> bool {
        self.lists[0].contains_key(&user)
    }

    /// Rows in canonical order: label, user, rank.
    pub fn to_rows(&self) -> Vec<RecEntry> {
        let mut rows = Vec::new();
        for (label, lists) in self.labels.iter().zip(&self.lists) {
            for (&user, items) in lists {
                for (pos, &item) in items.iter().enumerate() {
                    rows.push(RecEntry {
                        algorithm: label.clone(),
                        user,
                        rank: pos as u32 + 1,
                        item,
                    });
                }
            }
        }
        rows
    }
}
