//! Indexed, immutable benchmark datasets of explicit ratings.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ItemId, UserId};
use crate::scale::RatingScale;
use crate::stats::quantile_sorted;

/// One explicit rating row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub user: UserId,
    pub item: ItemId,
    pub value: f64,
    /// Seconds since epoch. Kept only so the ratings can be written back out.
    pub timestamp: Option<i64>,
}

/// Catalog metadata for an item.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: ItemId,
    pub title: String,
    pub genres: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("user {user} rated item {item} more than once")]
    DuplicatePair { user: UserId, item: ItemId },
    #[error("rating {value} by user {user} for item {item} is outside the rating scale")]
    OutOfScaleRating {
        user: UserId,
        item: ItemId,
        value: f64,
    },
    #[error("item {0} appears twice in the catalog")]
    DuplicateItem(ItemId),
    #[error(transparent)]
    Scale(#[from] crate::scale::ScaleError),
}

/// A user's ratings, sorted by item id.
#[derive(Clone, Debug, PartialEq)]
pub struct UserRecord {
    id: UserId,
    items: Vec<ItemId>,
    values: Vec<f64>,
    timestamps: Vec<Option<i64>>,
}

impl UserRecord {
    pub fn id(&self) -> UserId {
        self.id
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn rating(&self, item: ItemId) -> Option<f64> {
        self.items
            .binary_search(&item)
            .ok()
            .map(|idx| self.values[idx])
    }

    pub fn has_rated(&self, item: ItemId) -> bool {
        self.items.binary_search(&item).is_ok()
    }

    /// `(item, value)` pairs in ascending item order.
    pub fn entries(&self) -> impl Iterator<Item = (ItemId, f64)> + '_ {
        self.items.iter().copied().zip(self.values.iter().copied())
    }

    pub fn ratings(&self) -> impl Iterator<Item = Rating> + '_ {
        self.items
            .iter()
            .zip(&self.values)
            .zip(&self.timestamps)
            .map(move |((&item, &value), &timestamp)| Rating {
                user: self.id,
                item,
                value,
                timestamp,
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
struct ItemEntry {
    id: ItemId,
    meta: Option<Item>,
    /// `(dense user index, value)` in ascending user order.
    raters: Vec<(u32, f64)>,
    /// Distinct rating values with their counts, ascending by value.
    distribution: Vec<(f64, u32)>,
}

/// Immutable store of users, items and ratings with user-major and
/// item-major indexes.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkDataset {
    scale: RatingScale,
    users: Vec<UserRecord>,
    user_index: BTreeMap<UserId, usize>,
    items: Vec<ItemEntry>,
    item_index: BTreeMap<ItemId, usize>,
    rating_count: usize,
    metadata_incomplete: bool,
}

/// Headline counts of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub density: f64,
    pub metadata_incomplete: bool,
    /// Rating-count quantiles over items with at least one rating.
    pub popularity: PopularityQuantiles,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopularityQuantiles {
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
}

impl BenchmarkDataset {
    /// Builds both indexes. Items that are rated but missing from `items`
    /// are kept and flag the dataset as metadata-incomplete.
    pub fn build(
        ratings: Vec<Rating>,
        items: Vec<Item>,
        scale: RatingScale,
    ) -> Result<Self, DatasetError> {
        scale.validate()?;

        let mut catalog: BTreeMap<ItemId, Item> = BTreeMap::new();
        for item in items {
            let id = item.id;
            if catalog.insert(id, item).is_some() {
                return Err(DatasetError::DuplicateItem(id));
            }
        }

        let mut by_user: BTreeMap<UserId, Vec<(ItemId, f64, Option<i64>)>> = BTreeMap::new();
        for r in &ratings {
            if !scale.contains(r.value) {
                return Err(DatasetError::OutOfScaleRating {
                    user: r.user,
                    item: r.item,
                    value: r.value,
                });
            }
            by_user
                .entry(r.user)
                .or_default()
                .push((r.item, r.value, r.timestamp));
        }

        let mut users = Vec::with_capacity(by_user.len());
        let mut user_index = BTreeMap::new();
        for (idx, (id, mut rows)) in by_user.into_iter().enumerate() {
            rows.sort_by_key(|row| row.0);
            if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(DatasetError::DuplicatePair {
                    user: id,
                    item: w[0].0,
                });
            }
            user_index.insert(id, idx);
            users.push(UserRecord {
                id,
                items: rows.iter().map(|r| r.0).collect(),
                values: rows.iter().map(|r| r.1).collect(),
                timestamps: rows.iter().map(|r| r.2).collect(),
            });
        }

        let mut item_ids: BTreeSet<ItemId> = catalog.keys().copied().collect();
        let mut metadata_incomplete = false;
        for r in &ratings {
            if !catalog.contains_key(&r.item) {
                metadata_incomplete = true;
            }
            item_ids.insert(r.item);
        }

        let mut entries: Vec<ItemEntry> = item_ids
            .iter()
            .map(|&id| ItemEntry {
                id,
                meta: catalog.remove(&id),
                raters: Vec::new(),
                distribution: Vec::new(),
            })
            .collect();
        let item_index: BTreeMap<ItemId, usize> =
            item_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

        // Users are visited in ascending order, so each raters list ends up sorted.
        for (uidx, user) in users.iter().enumerate() {
            for (item, value) in user.entries() {
                entries[item_index[&item]].raters.push((uidx as u32, value));
            }
        }
        for entry in &mut entries {
            let mut values: Vec<f64> = entry.raters.iter().map(|r| r.1).collect();
            values.sort_by(f64::total_cmp);
            for v in values {
                match entry.distribution.last_mut() {
                    Some((last, count)) if *last == v => *count += 1,
                    _ => entry.distribution.push((v, 1)),
                }
            }
        }

        Ok(BenchmarkDataset {
            scale,
            users,
            user_index,
            items: entries,
            item_index,
            rating_count: ratings.len(),
            metadata_incomplete,
        })
    }

    pub fn scale(&self) -> RatingScale {
        self.scale
    }

    /// Users in ascending id order.
    pub fn users(&self) -> &[UserRecord] {
        &self.users
    }

    pub fn user(&self, id: UserId) -> Option<&UserRecord> {
        self.user_index.get(&id).map(|&idx| &self.users[idx])
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    /// Distinct items across the catalog and the ratings.
    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn rating_count(&self) -> usize {
        self.rating_count
    }

    pub fn is_metadata_incomplete(&self) -> bool {
        self.metadata_incomplete
    }

    /// All item ids in ascending order.
    pub fn item_ids(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.items.iter().map(|e| e.id)
    }

    pub fn contains_item(&self, id: ItemId) -> bool {
        self.item_index.contains_key(&id)
    }

    pub fn item(&self, id: ItemId) -> Option<&Item> {
        self.entry(id).and_then(|e| e.meta.as_ref())
    }

    /// Title for display, falling back to `Item #<id>` without metadata.
    pub fn display_title(&self, id: ItemId) -> String {
        match self.item(id) {
            Some(item) => item.title.clone(),
            None => format!("Item #{id}"),
        }
    }

    /// Number of ratings the item received; 0 for unknown items.
    pub fn popularity(&self, id: ItemId) -> u32 {
        self.entry(id).map_or(0, |e| e.raters.len() as u32)
    }

    /// Distinct rating values with their counts, ascending by value.
    pub fn rating_distribution(&self, id: ItemId) -> &[(f64, u32)] {
        self.entry(id).map_or(&[], |e| e.distribution.as_slice())
    }

    /// Item ids sorted by descending rating count, ties by ascending id.
    pub fn popularity_order(&self) -> Vec<ItemId> {
        let mut order: Vec<(u32, ItemId)> = self
            .items
            .iter()
            .map(|e| (e.raters.len() as u32, e.id))
            .collect();
        order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        order.into_iter().map(|(_, id)| id).collect()
    }

    /// Every rating, user-major then by item.
    pub fn ratings(&self) -> impl Iterator<Item = Rating> + '_ {
        self.users.iter().flat_map(|u| u.ratings())
    }

    pub fn stats(&self) -> DatasetStats {
        let mut counts: Vec<f64> = self
            .items
            .iter()
            .filter(|e| !e.raters.is_empty())
            .map(|e| e.raters.len() as f64)
            .collect();
        counts.sort_by(f64::total_cmp);
        let q = |p| quantile_sorted(&counts, p).unwrap_or(0.0);
        let cells = self.users.len() as f64 * self.items.len() as f64;
        DatasetStats {
            users: self.users.len(),
            items: self.items.len(),
            ratings: self.rating_count,
            density: if cells > 0.0 {
                self.rating_count as f64 / cells
            } else {
                0.0
            },
            metadata_incomplete: self.metadata_incomplete,
            popularity: PopularityQuantiles {
                min: q(0.0),
                p25: q(0.25),
                median: q(0.5),
                p75: q(0.75),
                max: q(1.0),
            },
        }
    }

    fn entry(&self, id: ItemId) -> Option<&ItemEntry> {
        self.item_index.get(&id).map(|&idx| &self.items[idx])
    }

    pub(crate) fn item_position(&self, id: ItemId) -> Option<usize> {
        self.item_index.get(&id).copied()
    }

    /// `(dense user index, value)` for the item at a dense position.
    pub(crate) fn raters_at(&self, position: usize) -> &[(u32, f64)] {
        &self.items[position].raters
    }

    /// Orders two items by descending rating count, then ascending id.
    pub(crate) fn cmp_popularity(&self, a: ItemId, b: ItemId) -> Ordering {
        self.popularity(b)
            .cmp(&self.popularity(a))
            .then(a.cmp(&b))
    }
}
