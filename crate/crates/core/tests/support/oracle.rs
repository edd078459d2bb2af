//! Exhaustive-scan reference for the mapping, written without the
//! item-major index used by `map_to_user`.
//!
//! Scores accumulate over co-rated items in ascending item order, the same
//! summation order the implementation documents, so results are comparable
//! bit for bit.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recstudy_core::{
    BenchmarkDataset, CandidateFilter, Item, ItemId, MappingConfig, PreferenceVector, Rating,
    RatingScale, RecommendationSets, SimilarityMeasure, UserId, UserRecord,
};

pub fn oracle_score(
    v: &PreferenceVector,
    user: &UserRecord,
    measure: SimilarityMeasure,
    scale: RatingScale,
) -> Option<(f64, usize)> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (item, value) in v.entries() {
        if let Some(r) = user.rating(item) {
            a.push(value);
            b.push(r);
        }
    }
    let n = a.len();
    if n == 0 {
        return None;
    }
    let score = match measure {
        SimilarityMeasure::CosineOverOverlap => {
            let mut dot = 0.0;
            let mut na = 0.0;
            let mut nb = 0.0;
            for i in 0..n {
                dot += a[i] * b[i];
                na += a[i] * a[i];
                nb += b[i] * b[i];
            }
            if na * nb == 0.0 {
                return None;
            }
            (dot / (na * nb).sqrt()).clamp(-1.0, 1.0)
        }
        SimilarityMeasure::PearsonOverOverlap => {
            if n < 2 {
                return None;
            }
            let ma = a.iter().sum::<f64>() / n as f64;
            let mb = b.iter().sum::<f64>() / n as f64;
            let mut cov = 0.0;
            let mut va = 0.0;
            let mut vb = 0.0;
            for i in 0..n {
                cov += (a[i] - ma) * (b[i] - mb);
                va += (a[i] - ma) * (a[i] - ma);
                vb += (b[i] - mb) * (b[i] - mb);
            }
            if (va * vb).sqrt() == 0.0 {
                return None;
            }
            (cov / (va * vb).sqrt()).clamp(-1.0, 1.0)
        }
        SimilarityMeasure::InverseMeanAbsDiff => {
            let mut total = 0.0;
            for i in 0..n {
                total += (a[i] - b[i]).abs();
            }
            (1.0 - (total / n as f64) / (scale.max - scale.min)).clamp(0.0, 1.0)
        }
    };
    Some((score, n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub score: f64,
    pub overlap: usize,
    pub tie_set: Vec<UserId>,
}

pub fn oracle_map(
    v: &PreferenceVector,
    dataset: &BenchmarkDataset,
    recsets: Option<&RecommendationSets>,
    config: &MappingConfig,
) -> Option<OracleResult> {
    let mut scored: Vec<(UserId, f64, usize)> = Vec::new();
    for user in dataset.users() {
        if config.candidate_filter == CandidateFilter::UsersWithRecommendations
            && !recsets.is_some_and(|r| r.covers(user.id()))
        {
            continue;
        }
        if let Some((s, n)) = oracle_score(v, user, config.measure, dataset.scale()) {
            if n >= config.min_overlap {
                scored.push((user.id(), s, n));
            }
        }
    }
    let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let mut ties: Vec<(UserId, usize)> = scored
        .iter()
        .filter(|s| s.1 == best)
        .map(|s| (s.0, s.2))
        .collect();
    ties.sort();
    let first = ties.first()?;
    Some(OracleResult {
        score: best,
        overlap: first.1,
        tie_set: ties.iter().map(|t| t.0).collect(),
    })
}

/// Random dataset on the half-star scale. A share of users are copies or
/// coarse variants of others so that exact score ties occur.
pub fn random_dataset(seed: u64, max_users: usize, max_items: usize) -> BenchmarkDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_users = rng.random_range(2..=max_users);
    let n_items = rng.random_range(5..=max_items);
    let scale = RatingScale::HALF_STARS;
    let points = scale.points();
    let density: f64 = rng.random_range(0.05..0.5);
    let mut profiles: Vec<Vec<(u32, f64)>> = Vec::new();
    for _ in 0..n_users {
        if !profiles.is_empty() && rng.random_bool(0.1) {
            let src = profiles[rng.random_range(0..profiles.len())].clone();
            profiles.push(src);
            continue;
        }
        let mut p = Vec::new();
        for item in 1..=n_items as u32 {
            if rng.random_bool(density) {
                let coarse = rng.random_bool(0.5);
                let value = if coarse {
                    [1.0, 3.0, 5.0][rng.random_range(0..3)]
                } else {
                    points[rng.random_range(0..points.len())]
                };
                p.push((item, value));
            }
        }
        if p.is_empty() {
            p.push((rng.random_range(1..=n_items as u32), 3.0));
        }
        profiles.push(p);
    }
    let ratings = profiles
        .iter()
        .enumerate()
        .flat_map(|(u, p)| {
            p.iter().map(move |&(item, value)| Rating {
                user: UserId(u as u32 + 1),
                item: ItemId(item),
                value,
                timestamp: None,
            })
        })
        .collect();
    let items = (1..=n_items as u32)
        .map(|i| Item {
            id: ItemId(i),
            title: format!("Item {i}"),
            genres: Default::default(),
        })
        .collect();
    BenchmarkDataset::build(ratings, items, scale).unwrap()
}

/// A random preference vector over the first items of the dataset.
pub fn random_vector(seed: u64, dataset: &BenchmarkDataset, max_len: usize) -> PreferenceVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<ItemId> = dataset.item_ids().collect();
    let points = dataset.scale().points();
    let len = rng.random_range(1..=max_len.min(ids.len()));
    (0..len)
        .map(|_| {
            let item = ids[rng.random_range(0..ids.len())];
            (item, points[rng.random_range(0..points.len())])
        })
        .collect()
}
