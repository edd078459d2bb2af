//! Choosing the items a participant is asked to rate, and building the
//! questionnaires of each study phase.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BenchmarkDataset, UserRecord};
use crate::ids::ItemId;
use crate::scale::RatingScale;

/// Number of points on every Likert question.
pub const LIKERT_POINTS: u8 = 7;
pub const LIKERT_ANCHORS: [&str; 2] = ["strongly disagree", "strongly agree"];
/// Blinded labels under which the two recommendation lists are shown.
pub const LIST_LABELS: [&str; 2] = ["List A", "List B"];
pub const AGREE_STATEMENT: &str = "This matches my taste";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Top-k by rating count.
    Popularity,
    /// Top-k by rating count times the Shannon entropy of the item's ratings.
    PopularityEntropy,
    /// Uniform sample without replacement.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElicitationError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the {available} items in the dataset")]
    KTooLarge { k: usize, available: usize },
    #[error("at least one comparison dimension is required")]
    EmptyDimensions,
    #[error("comparison dimension '{0}' is listed more than once")]
    DuplicateDimension(String),
    #[error("item {0} is not in the dataset")]
    UnknownItem(ItemId),
    #[error("item {0} is listed more than once")]
    DuplicateItem(ItemId),
    #[error("the mapped user has no ratings")]
    NoRatings,
}

/// Items the initial questionnaire asks about, in question order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElicitationItemSet {
    pub items: Vec<ItemId>,
    pub strategy: SelectionStrategy,
}

impl ElicitationItemSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.items.contains(&item)
    }

    pub fn validate(&self, dataset: &BenchmarkDataset) -> Result<(), ElicitationError> {
        let mut seen = BTreeSet::new();
        for &item in &self.items {
            if !dataset.contains_item(item) {
                return Err(ElicitationError::UnknownItem(item));
            }
            if !seen.insert(item) {
                return Err(ElicitationError::DuplicateItem(item));
            }
        }
        Ok(())
    }
}

/// Shannon entropy in bits of a value -> count distribution.
pub fn rating_entropy(distribution: &[(f64, u32)]) -> f64 {
    let total: u32 = distribution.iter().map(|d| d.1).sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    distribution
        .iter()
        .filter(|d| d.1 > 0)
        .map(|d| {
            let p = d.1 as f64 / total;
            -p * libm::log2(p)
        })
        .sum()
}

pub fn select_items(
    dataset: &BenchmarkDataset,
    k: usize,
    strategy: SelectionStrategy,
) -> Result<ElicitationItemSet, ElicitationError> {
    if k == 0 {
        return Err(ElicitationError::ZeroK);
    }
    let available = dataset.item_count();
    if k > available {
        return Err(ElicitationError::KTooLarge { k, available });
    }

    let items = match strategy {
        SelectionStrategy::Popularity => {
            let mut order = dataset.popularity_order();
            order.truncate(k);
            order
        }
        SelectionStrategy::PopularityEntropy => {
            let mut scored: Vec<(f64, ItemId)> = dataset
                .item_ids()
                .map(|id| {
                    let count = dataset.popularity(id) as f64;
                    (count * rating_entropy(dataset.rating_distribution(id)), id)
                })
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            scored.into_iter().take(k).map(|(_, id)| id).collect()
        }
        SelectionStrategy::Random { seed } => {
            let mut ids: Vec<ItemId> = dataset.item_ids().collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (chosen, _) = ids.partial_shuffle(&mut rng, k);
            chosen.to_vec()
        }
    };

    Ok(ElicitationItemSet { items, strategy })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Initial,
    Final,
    Validation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum QuestionKind {
    RateItem {
        item: ItemId,
        scale: RatingScale,
        skippable: bool,
    },
    LikertCompare {
        dimension: String,
        points: u8,
        anchors: [String; 2],
    },
    LikertAgree {
        item: ItemId,
        statement: String,
        points: u8,
        anchors: [String; 2],
    },
    PickList {
        choices: [String; 2],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    #[serde(flatten)]
    pub kind: QuestionKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Questionnaire {
    pub phase: Phase,
    pub questions: Vec<Question>,
}

fn anchors() -> [String; 2] {
    LIKERT_ANCHORS.map(|s| s.to_string())
}

impl Questionnaire {
    pub fn question(&self, id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.id == id)
    }

    /// Checks the phase-specific shape of the question list.
    pub fn is_well_formed(&self, scale: RatingScale) -> bool {
        let likert_ok = |points: u8| points == 5 || points == 7;
        match self.phase {
            Phase::Initial => self.questions.iter().all(|q| {
                matches!(q.kind, QuestionKind::RateItem { scale: s, .. } if s == scale)
            }),
            Phase::Final => {
                let picks = self
                    .questions
                    .iter()
                    .filter(|q| matches!(q.kind, QuestionKind::PickList { .. }))
                    .count();
                let compares_ok = self.questions.iter().all(|q| match &q.kind {
                    QuestionKind::LikertCompare { points, .. } => likert_ok(*points),
                    QuestionKind::PickList { .. } => true,
                    _ => false,
                });
                picks == 1 && compares_ok
            }
            Phase::Validation => self.questions.iter().all(|q| {
                matches!(q.kind, QuestionKind::LikertAgree { points, .. } if likert_ok(points))
            }),
        }
    }
}

pub fn rate_question_id(item: ItemId) -> String {
    format!("rate-{item}")
}

/// One skippable rating question per item, in item-set order.
pub fn build_initial_questionnaire(
    item_set: &ElicitationItemSet,
    dataset: &BenchmarkDataset,
) -> Result<Questionnaire, ElicitationError> {
    item_set.validate(dataset)?;
    let scale = dataset.scale();
    let questions = item_set
        .items
        .iter()
        .map(|&item| Question {
            id: rate_question_id(item),
            text: format!("How would you rate \"{}\"?", dataset.display_title(item)),
            kind: QuestionKind::RateItem {
                item,
                scale,
                skippable: true,
            },
        })
        .collect();
    Ok(Questionnaire {
        phase: Phase::Initial,
        questions,
    })
}

pub const OVERALL_QUESTION_ID: &str = "overall";

/// One 7-point comparison per dimension plus a forced overall choice.
pub fn build_final_questionnaire(dimensions: &[String]) -> Result<Questionnaire, ElicitationError> {
    if dimensions.is_empty() {
        return Err(ElicitationError::EmptyDimensions);
    }
    let mut seen = BTreeSet::new();
    let mut questions = Vec::with_capacity(dimensions.len() + 1);
    for dim in dimensions {
        let dim = dim.trim();
        if dim.is_empty() {
            return Err(ElicitationError::EmptyDimensions);
        }
        if !seen.insert(dim.to_string()) {
            return Err(ElicitationError::DuplicateDimension(dim.to_string()));
        }
        questions.push(Question {
            id: format!("compare-{dim}"),
            text: format!("{} is more {dim} than {}", LIST_LABELS[0], LIST_LABELS[1]),
            kind: QuestionKind::LikertCompare {
                dimension: dim.to_string(),
                points: LIKERT_POINTS,
                anchors: anchors(),
            },
        });
    }
    questions.push(Question {
        id: OVERALL_QUESTION_ID.to_string(),
        text: "Overall, which list do you prefer?".to_string(),
        kind: QuestionKind::PickList {
            choices: LIST_LABELS.map(|s| s.to_string()),
        },
    });
    Ok(Questionnaire {
        phase: Phase::Final,
        questions,
    })
}

/// Agreement questions about the mapped user's `n` highest-rated items.
/// Ties are broken by popularity, then ascending item id.
pub fn build_validation_questionnaire(
    dataset: &BenchmarkDataset,
    user: &UserRecord,
    n: usize,
) -> Result<Questionnaire, ElicitationError> {
    if user.is_empty() {
        return Err(ElicitationError::NoRatings);
    }
    let mut ranked: Vec<(ItemId, f64)> = user.entries().collect();
    ranked.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| dataset.cmp_popularity(a.0, b.0))
    });
    let questions = ranked
        .into_iter()
        .take(n)
        .map(|(item, _)| Question {
            id: format!("agree-{item}"),
            text: format!("\"{}\": {AGREE_STATEMENT}", dataset.display_title(item)),
            kind: QuestionKind::LikertAgree {
                item,
                statement: AGREE_STATEMENT.to_string(),
                points: LIKERT_POINTS,
                anchors: anchors(),
            },
        })
        .collect();
    Ok(Questionnaire {
        phase: Phase::Validation,
        questions,
    })
}
