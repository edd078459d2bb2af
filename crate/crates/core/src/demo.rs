//! Toy recommendation generators for demos and tests.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::BenchmarkDataset;
use crate::ids::{ItemId, UserId};
use crate::recsets::RecEntry;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemoGenerator {
    /// The most popular items the user has not rated.
    TopPopularity,
    /// A seeded uniform sample of the items the user has not rated.
    RandomUnseen { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DemoError {
    #[error("list length must be at least 1")]
    ZeroLength,
    #[error("user {user} has only {available} unrated items, {requested} requested")]
    NotEnoughItems {
        user: UserId,
        available: usize,
        requested: usize,
    },
}

/// Rows for every dataset user under `label`.
pub fn generate_demo_recommendations(
    dataset: &BenchmarkDataset,
    generator: DemoGenerator,
    n: usize,
    label: &str,
) -> Result<Vec<RecEntry>, DemoError> {
    if n == 0 {
        return Err(DemoError::ZeroLength);
    }
    let by_popularity = dataset.popularity_order();
    let all_items: Vec<ItemId> = dataset.item_ids().collect();
    let mut rows = Vec::with_capacity(dataset.user_count() * n);

    for user in dataset.users() {
        let available = dataset.item_count() - user.len();
        if available < n {
            return Err(DemoError::NotEnoughItems {
                user: user.id(),
                available,
                requested: n,
            });
        }
        let picked: Vec<ItemId> = match generator {
            DemoGenerator::TopPopularity => by_popularity
                .iter()
                .copied()
                .filter(|&i| !user.has_rated(i))
                .take(n)
                .collect(),
            DemoGenerator::RandomUnseen { seed } => {
                let mut unseen: Vec<ItemId> = all_items
                    .iter()
                    .copied()
                    .filter(|&i| !user.has_rated(i))
                    .collect();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(user.id().0 as u64);
                let (chosen, _) = unseen.partial_shuffle(&mut rng, n);
                chosen.to_vec()
            }
        };
        rows.extend(picked.into_iter().enumerate().map(|(pos, item)| RecEntry {
            algorithm: String::from(label),
            user: user.id(),
            rank: pos as u32 + 1,
            item,
        }));
    }
    Ok(rows)
}
