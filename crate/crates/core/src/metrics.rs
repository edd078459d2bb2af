//! Objective list metrics and Likert agreement summaries.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::BenchmarkDataset;
use crate::ids::{ItemId, UserId};
use crate::recsets::RecommendationSets;
use crate::stats::quantile_sorted;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("item {0} has no catalog metadata")]
    UnknownItem(ItemId),
}

/// Mean pairwise Jaccard distance between the genre sets of a list.
/// Lists shorter than two items score 0; two empty genre sets are at distance 0.
pub fn intra_list_diversity(
    items: &[ItemId],
    dataset: &BenchmarkDataset,
) -> Result<f64, MetricsError> {
    let genres = items
        .iter()
        .map(|&id| {
            dataset
                .item(id)
                .map(|item| &item.genres)
                .ok_or(MetricsError::UnknownItem(id))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if genres.len() < 2 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..genres.len() {
        for j in (i + 1)..genres.len() {
            let union = genres[i].union(genres[j]).count();
            if union > 0 {
                let inter = genres[i].intersection(genres[j]).count();
                total += 1.0 - inter as f64 / union as f64;
            }
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Mean popularity self-information, `-log2((count + 1) / (ratings + items))`.
pub fn mean_novelty(items: &[ItemId], dataset: &BenchmarkDataset) -> f64 {
    if items.is_empty() {
        return 0.0;
    }
    let denom = (dataset.rating_count() + dataset.item_count()) as f64;
    let total: f64 = items
        .iter()
        .map(|&id| -libm::log2((dataset.popularity(id) as f64 + 1.0) / denom))
        .sum();
    total / items.len() as f64
}

/// Three aggregations of a set of Likert agreement answers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Share of answers in the two highest points of the scale.
    pub top2_box: f64,
}

pub fn agreement_summary(answers: &[u8], points: u8) -> Option<AgreementSummary> {
    if answers.is_empty() {
        return None;
    }
    let mut sorted: Vec<f64> = answers.iter().map(|&a| a as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let top = answers
        .iter()
        .filter(|&&a| a >= points.saturating_sub(1))
        .count();
    Some(AgreementSummary {
        count: answers.len(),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        median: quantile_sorted(&sorted, 0.5)?,
        top2_box: top as f64 / answers.len() as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ListMetrics {
    pub label: String,
    pub user: UserId,
    pub length: usize,
    pub diversity: f64,
    pub novelty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelAggregate {
    pub label: String,
    pub users: usize,
    pub mean_diversity: f64,
    pub mean_novelty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ListMetricsReport {
    /// Ordered by label index, then user id.
    pub lists: Vec<ListMetrics>,
    pub aggregates: Vec<LabelAggregate>,
}

/// Diversity and novelty of every list in both recommendation sets.
pub fn list_metrics(
    dataset: &BenchmarkDataset,
    recsets: &RecommendationSets,
) -> Result<ListMetricsReport, MetricsError> {
    let mut lists = Vec::new();
    let mut aggregates = Vec::new();
    for (idx, label) in recsets.labels().iter().enumerate() {
        let (mut div, mut nov, mut n) = (0.0, 0.0, 0usize);
        for user in recsets.users() {
            let items = recsets.list(idx, user).unwrap_or_default();
            let m = ListMetrics {
                label: (*label).into(),
                user,
                length: items.len(),
                diversity: intra_list_diversity(items, dataset)?,
                novelty: mean_novelty(items, dataset),
            };
            div += m.diversity;
            nov += m.novelty;
            n += 1;
            lists.push(m);
        }
        let mean = |total: f64| if n == 0 { 0.0 } else { total / n as f64 };
        aggregates.push(LabelAggregate {
            label: (*label).into(),
            users: n,
            mean_diversity: mean(div),
            mean_novelty: mean(nov),
        });
    }
    Ok(ListMetricsReport { lists, aggregates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Item, Rating};
    use crate::ids::UserId;
    use crate::scale::RatingScale;
    use alloc::string::ToString;
    use alloc::vec;

    fn catalog(genres: &[&[&str]]) -> BenchmarkDataset {
        let items = genres
            .iter()
            .enumerate()
            .map(|(i, g)| Item {
                id: ItemId(i as u32 + 1),
                title: "t".to_string(),
                genres: g.iter().map(|s| s.to_string()).collect(),
            })
            .collect();
        BenchmarkDataset::build(vec![], items, RatingScale::HALF_STARS).unwrap()
    }

    fn ids(n: &[u32]) -> Vec<ItemId> {
        n.iter().map(|&i| ItemId(i)).collect()
    }

    #[test]
    fn ild_fixtures() {
        let ds = catalog(&[&["A"], &["A"], &["B"], &[], &[]]);
        assert_eq!(intra_list_diversity(&ids(&[1, 2]), &ds), Ok(0.0));
        assert_eq!(intra_list_diversity(&ids(&[1, 3]), &ds), Ok(1.0));
        let three = intra_list_diversity(&ids(&[1, 2, 3]), &ds).unwrap();
        assert!((three - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(intra_list_diversity(&ids(&[4, 5]), &ds), Ok(0.0));
        assert_eq!(intra_list_diversity(&ids(&[1]), &ds), Ok(0.0));
        assert_eq!(
            intra_list_diversity(&ids(&[1, 42]), &ds),
            Err(MetricsError::UnknownItem(ItemId(42)))
        );
    }

    #[test]
    fn novelty_of_half_share_is_one_bit() {
        // Item 1 rated twice, item 2 once, item 3 never: (2 + 1) / (3 + 3) = 1/2.
        let rating = |u, i| Rating {
            user: UserId(u),
            item: ItemId(i),
            value: 3.0,
            timestamp: None,
        };
        let mut ds_items = Vec::new();
        for i in 1..=3 {
            ds_items.push(Item {
                id: ItemId(i),
                title: "t".to_string(),
                genres: Default::default(),
            });
        }
        let ds = BenchmarkDataset::build(
            vec![rating(1, 1), rating(2, 1), rating(1, 2)],
            ds_items,
            RatingScale::HALF_STARS,
        )
        .unwrap();
        assert_eq!(mean_novelty(&ids(&[1]), &ds), 1.0);
        assert!(mean_novelty(&ids(&[1]), &ds) < mean_novelty(&ids(&[3]), &ds));
    }

    #[test]
    fn agreement_three_ways() {
        let s = agreement_summary(&[7, 6, 2, 4], 7).unwrap();
        assert_eq!(s.mean, 4.75);
        assert_eq!(s.median, 5.0);
        assert_eq!(s.top2_box, 0.5);
        assert!(agreement_summary(&[], 7).is_none());
    }
}
