//! Self-mapping simulations over a benchmark dataset.
//!
//! Sampled dataset users fill in the initial questionnaire from their own
//! ratings (optionally perturbed), the answers are mapped back into the
//! same dataset, and a mapping counts as correct when it recovers the
//! source user. Each user draws noise from its own ChaCha stream, so
//! results do not depend on evaluation order.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BenchmarkDataset, UserRecord};
use crate::elicitation::{select_items, ElicitationError, SelectionStrategy};
use crate::ids::{ItemId, UserId};
use crate::mapping::{
    data_layer_score, map_to_user, CandidateFilter, MappingConfig, MappingError, PreferenceVector,
    SimilarityMeasure,
};
use crate::recsets::RecommendationSets;
use crate::scale::RatingScale;
use crate::stats::{Histogram, ScoreSummary};

/// Stream reserved for drawing the user sample; user streams use the user id.
const SAMPLE_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    #[default]
    None,
    /// Adds N(0, sigma) to each answer, then clips and rounds to the scale.
    Gaussian { sigma: f64 },
    /// Omits each answer independently with the given probability.
    DropAnswers { probability: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), SimulationError> {
        match *self {
            NoiseModel::Gaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(SimulationError::InvalidNoise)
            }
            NoiseModel::DropAnswers { probability } if !(0.0..1.0).contains(&probability) => {
                Err(SimulationError::InvalidNoise)
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Correct only when the tie-broken proxy is the source user.
    StrictArgmax,
    /// Correct when the source user is anywhere in the tie set.
    #[default]
    TieInclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserSample {
    /// Seeded sample without replacement; the whole pool if larger than it.
    Size(usize),
    Explicit(Vec<UserId>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElicitationConfig {
    pub strategy: SelectionStrategy,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub sample: UserSample,
    pub elicitation: ElicitationConfig,
    pub mapping: MappingConfig,
    pub noise: NoiseModel,
    pub seed: u64,
    pub tie_policy: TiePolicy,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("the user sample is empty")]
    EmptySample,
    #[error("user {0} is not in the dataset")]
    UnknownUser(UserId),
    #[error("noise parameters out of range")]
    InvalidNoise,
    #[error(transparent)]
    Elicitation(#[from] ElicitationError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
}

/// Outcome for one simulated participant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedUser {
    pub user: UserId,
    pub answered: usize,
    pub responses: PreferenceVector,
    /// Fewer than `min_overlap` answers; excluded from accuracy.
    pub skipped: bool,
    pub mapped_user: Option<UserId>,
    pub score: Option<f64>,
    pub overlap: Option<usize>,
    pub tie_count: Option<usize>,
    pub correct_strict: bool,
    pub correct_tie_inclusive: bool,
    /// Correctness under the configured tie policy.
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub sampled: usize,
    pub skipped: usize,
    pub evaluated: usize,
    pub unmapped: usize,
    pub correct: usize,
    /// `correct / evaluated` under the configured policy.
    pub accuracy: Option<f64>,
    pub strict_accuracy: Option<f64>,
    pub tie_inclusive_accuracy: Option<f64>,
    pub mean_tie_size: Option<f64>,
    pub score: Option<ScoreSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub elicitation_items: Vec<ItemId>,
    /// Ascending by user id.
    pub users: Vec<SimulatedUser>,
    pub summary: SimulationSummary,
}

/// Answers the elicitation items from `user`'s own ratings. Unrated items
/// are skipped.
pub fn simulate_responses(
    user: &UserRecord,
    items: &[ItemId],
    noise: NoiseModel,
    scale: RatingScale,
    seed: u64,
) -> PreferenceVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(user.id().0 as u64);
    let gaussian = match noise {
        NoiseModel::Gaussian { sigma } if sigma > 0.0 => Normal::new(0.0, sigma).ok(),
        _ => None,
    };

    let mut v = PreferenceVector::new();
    for &item in items {
        let Some(rating) = user.rating(item) else {
            continue;
        };
        let answer = match noise {
            NoiseModel::None => Some(rating),
            NoiseModel::Gaussian { .. } => match &gaussian {
                Some(normal) => Some(scale.snap(rating + normal.sample(&mut rng))),
                None => Some(rating),
            },
            NoiseModel::DropAnswers { probability } => {
                (rng.random::<f64>() >= probability).then_some(rating)
            }
        };
        if let Some(value) = answer {
            v.insert(item, value);
        }
    }
    v
}

fn draw_sample(
    dataset: &BenchmarkDataset,
    recsets: Option<&RecommendationSets>,
    config: &SimulationConfig,
) -> Result<Vec<UserId>, SimulationError> {
    let mut users = match &config.sample {
        UserSample::Explicit(ids) => {
            if let Some(&missing) = ids.iter().find(|&&id| dataset.user(id).is_none()) {
                return Err(SimulationError::UnknownUser(missing));
            }
            let mut ids = ids.clone();
            ids.sort_unstable();
            ids.dedup();
            ids
        }
        UserSample::Size(n) => {
            let mut pool: Vec<UserId> = dataset.users().iter().map(|u| u.id()).collect();
            if config.mapping.candidate_filter == CandidateFilter::UsersWithRecommendations {
                let sets = recsets.ok_or(MappingError::MissingRecommendations)?;
                pool.retain(|&u| sets.covers(u));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(SAMPLE_STREAM);
            let n = (*n).min(pool.len());
            let (chosen, _) = pool.partial_shuffle(&mut rng, n);
            let mut chosen = chosen.to_vec();
            chosen.sort_unstable();
            chosen
        }
    };
    users.dedup();
    if users.is_empty() {
        return Err(SimulationError::EmptySample);
    }
    Ok(users)
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Runs the recommendation-layer experiment. Simulated users stay in the
/// candidate pool they are mapped into.
pub fn run_recommendation_layer(
    dataset: &BenchmarkDataset,
    recsets: Option<&RecommendationSets>,
    config: &SimulationConfig,
) -> Result<SimulationReport, SimulationError> {
    config.noise.validate()?;
    config.mapping.validate()?;
    let item_set = select_items(dataset, config.elicitation.k, config.elicitation.strategy)?;
    let sample = draw_sample(dataset, recsets, config)?;

    let mut users = Vec::with_capacity(sample.len());
    for id in sample {
        let record = dataset.user(id).expect("sampled from dataset");
        let responses =
            simulate_responses(record, &item_set.items, config.noise, dataset.scale(), config.seed);
        let answered = responses.len();
        let mut out = SimulatedUser {
            user: id,
            answered,
            responses,
            skipped: answered < config.mapping.min_overlap,
            mapped_user: None,
            score: None,
            overlap: None,
            tie_count: None,
            correct_strict: false,
            correct_tie_inclusive: false,
            correct: false,
        };
        if !out.skipped {
            match map_to_user(&out.responses, dataset, recsets, &config.mapping) {
                Ok(m) => {
                    out.correct_strict = m.mapped_user == id;
                    out.correct_tie_inclusive = m.tie_set.binary_search(&id).is_ok();
                    out.mapped_user = Some(m.mapped_user);
                    out.score = Some(m.score);
                    out.overlap = Some(m.overlap);
                    out.tie_count = Some(m.tie_set.len());
                }
                Err(MappingError::NoCandidate) => {}
                Err(e) => return Err(e.into()),
            }
            out.correct = match config.tie_policy {
                TiePolicy::StrictArgmax => out.correct_strict,
                TiePolicy::TieInclusive => out.correct_tie_inclusive,
            };
        }
        users.push(out);
    }

    let summary = summarize(&users);
    Ok(SimulationReport {
        config: config.clone(),
        elicitation_items: item_set.items,
        users,
        summary,
    })
}

fn summarize(users: &[SimulatedUser]) -> SimulationSummary {
    let evaluated: Vec<&SimulatedUser> = users.iter().filter(|u| !u.skipped).collect();
    let n = evaluated.len();
    let strict = evaluated.iter().filter(|u| u.correct_strict).count();
    let inclusive = evaluated.iter().filter(|u| u.correct_tie_inclusive).count();
    let correct = evaluated.iter().filter(|u| u.correct).count();
    let scores: Vec<f64> = evaluated.iter().filter_map(|u| u.score).collect();
    let ties: Vec<usize> = evaluated.iter().filter_map(|u| u.tie_count).collect();
    SimulationSummary {
        sampled: users.len(),
        skipped: users.len() - n,
        evaluated: n,
        unmapped: evaluated.iter().filter(|u| u.mapped_user.is_none()).count(),
        correct,
        accuracy: ratio(correct, n),
        strict_accuracy: ratio(strict, n),
        tie_inclusive_accuracy: ratio(inclusive, n),
        mean_tie_size: ratio(ties.iter().sum(), ties.len()),
        score: ScoreSummary::from_values(&scores),
    }
}

/// A preference vector together with the user it was mapped onto.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappedRecord {
    pub label: String,
    pub preference: PreferenceVector,
    pub mapped_user: UserId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordScore {
    pub label: String,
    pub mapped_user: UserId,
    pub score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataLayerReport {
    pub measure: SimilarityMeasure,
    pub records: usize,
    pub scored: usize,
    /// Records without co-rated items or with an undefined score.
    pub unscored: Vec<String>,
    /// Records whose mapped user is not in the dataset.
    pub unresolved: Vec<String>,
    pub summary: Option<ScoreSummary>,
    pub histogram: Histogram,
    pub per_record: Vec<RecordScore>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataLayerError {
    #[error("no mapped records to score")]
    NoRecords,
}

pub const HISTOGRAM_BINS: usize = 10;

/// Scores every record against its mapped user with `measure`.
pub fn run_data_layer(
    dataset: &BenchmarkDataset,
    records: &[MappedRecord],
    measure: SimilarityMeasure,
) -> Result<DataLayerReport, DataLayerError> {
    if records.is_empty() {
        return Err(DataLayerError::NoRecords);
    }
    let mut per_record = Vec::with_capacity(records.len());
    let mut unscored = Vec::new();
    let mut unresolved = Vec::new();
    let mut scores = Vec::new();
    for rec in records {
        let score = match dataset.user(rec.mapped_user) {
            None => {
                unresolved.push(rec.label.clone());
                None
            }
            Some(user) => match data_layer_score(&rec.preference, user, measure, dataset.scale()) {
                Ok(s) => {
                    scores.push(s);
                    Some(s)
                }
                Err(_) => {
                    unscored.push(rec.label.clone());
                    None
                }
            },
        };
        per_record.push(RecordScore {
            label: rec.label.clone(),
            mapped_user: rec.mapped_user,
            score,
        });
    }
    let (lo, hi) = measure.range();
    Ok(DataLayerReport {
        measure,
        records: records.len(),
        scored: scores.len(),
        unscored,
        unresolved,
        summary: ScoreSummary::from_values(&scores),
        histogram: Histogram::new(lo, hi, HISTOGRAM_BINS, &scores),
        per_record,
    })
}

impl SimulationReport {
    /// Mapped users as data-layer records labeled by source user id.
    pub fn mapped_records(&self) -> Vec<MappedRecord> {
        self.users
            .iter()
            .filter_map(|u| {
                u.mapped_user.map(|mapped| MappedRecord {
                    label: alloc::format!("user-{}", u.user),
                    preference: u.responses.clone(),
                    mapped_user: mapped,
                })
            })
            .collect()
    }
}
