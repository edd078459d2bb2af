//! Mapping questionnaire responses onto a benchmark dataset user.
//!
//! A participant's answers form a sparse [`PreferenceVector`]. Every
//! candidate user is scored on the items both have rated (the overlap), and
//! the best-scoring user becomes the participant's proxy. All measures use
//! the same arithmetic whether called through [`similarity`] or through
//! [`map_to_user`]: terms are accumulated over the overlap in ascending
//! item order, so equal restrictions always produce bit-identical scores.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BenchmarkDataset, UserRecord};
use crate::ids::{ItemId, UserId};
use crate::recsets::RecommendationSets;
use crate::scale::RatingScale;

/// Sparse item -> rating map derived from answered rating questions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PreferenceVector(BTreeMap<ItemId, f64>);

impl PreferenceVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, item: ItemId, value: f64) {
        self.0.insert(item, value);
    }

    pub fn get(&self, item: ItemId) -> Option<f64> {
        self.0.get(&item).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(item, value)` pairs in ascending item order.
    pub fn entries(&self) -> impl Iterator<Item = (ItemId, f64)> + '_ {
        self.0.iter().map(|(&k, &v)| (k, v))
    }
}

impl FromIterator<(ItemId, f64)> for PreferenceVector {
    fn from_iter<T: IntoIterator<Item = (ItemId, f64)>>(iter: T) -> Self {
        PreferenceVector(iter.into_iter().collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMeasure {
    #[default]
    CosineOverOverlap,
    PearsonOverOverlap,
    InverseMeanAbsDiff,
}

impl SimilarityMeasure {
    pub const ALL: [SimilarityMeasure; 3] = [
        SimilarityMeasure::CosineOverOverlap,
        SimilarityMeasure::PearsonOverOverlap,
        SimilarityMeasure::InverseMeanAbsDiff,
    ];

    /// Closed interval the measure's scores lie in.
    pub fn range(self) -> (f64, f64) {
        match self {
            SimilarityMeasure::PearsonOverOverlap => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateFilter {
    AllUsers,
    /// Only users covered by the study's recommendation files.
    #[default]
    UsersWithRecommendations,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MappingConfig {
    pub measure: SimilarityMeasure,
    pub min_overlap: usize,
    pub candidate_filter: CandidateFilter,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig {
            measure: SimilarityMeasure::CosineOverOverlap,
            min_overlap: 3,
            candidate_filter: CandidateFilter::UsersWithRecommendations,
        }
    }
}

impl MappingConfig {
    pub fn validate(&self) -> Result<(), MappingError> {
        if self.min_overlap == 0 {
            return Err(MappingError::InvalidConfig);
        }
        Ok(())
    }
}

/// The proxy user chosen for a preference vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingResult {
    pub mapped_user: UserId,
    pub score: f64,
    /// Co-rated items between the vector and the mapped user.
    pub overlap: usize,
    /// Every candidate achieving `score`, ascending. `mapped_user` is the first.
    pub tie_set: Vec<UserId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SimilarityError {
    #[error("no co-rated items")]
    NoOverlap,
    #[error("similarity is undefined on this overlap")]
    Undefined,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MappingError {
    #[error("every rating question was skipped")]
    AllSkipped,
    #[error("rating {value} for item {item} is outside the rating scale")]
    OutOfScale { item: ItemId, value: f64 },
    #[error("no candidate user passes the overlap and definedness filters")]
    NoCandidate,
    #[error("candidate filter requires recommendation sets")]
    MissingRecommendations,
    #[error("min_overlap must be at least 1")]
    InvalidConfig,
}

/// Builds a preference vector from `(item, answer)` pairs, where `None`
/// marks a skipped question.
pub fn preference_vector<I>(answers: I, scale: RatingScale) -> Result<PreferenceVector, MappingError>
where
    I: IntoIterator<Item = (ItemId, Option<f64>)>,
{
    let mut v = PreferenceVector::new();
    for (item, answer) in answers {
        if let Some(value) = answer {
            if !scale.contains(value) {
                return Err(MappingError::OutOfScale { item, value });
            }
            v.insert(item, value);
        }
    }
    if v.is_empty() {
        return Err(MappingError::AllSkipped);
    }
    Ok(v)
}

/// Scores `(a, b)` value pairs taken over the overlap in ascending item order.
pub fn score_pairs(
    pairs: &[(f64, f64)],
    measure: SimilarityMeasure,
    scale: RatingScale,
) -> Result<f64, SimilarityError> {
    if pairs.is_empty() {
        return Err(SimilarityError::NoOverlap);
    }
    match measure {
        SimilarityMeasure::CosineOverOverlap => {
            let mut dot = 0.0;
            let mut aa = 0.0;
            let mut bb = 0.0;
            for &(a, b) in pairs {
                dot += a * b;
                aa += a * a;
                bb += b * b;
            }
            let denom = libm::sqrt(aa * bb);
            if denom == 0.0 {
                return Err(SimilarityError::Undefined);
            }
            Ok((dot / denom).clamp(-1.0, 1.0))
        }
        SimilarityMeasure::PearsonOverOverlap => {
            if pairs.len() < 2 {
                return Err(SimilarityError::Undefined);
            }
            let n = pairs.len() as f64;
            let (mut sa, mut sb) = (0.0, 0.0);
            for &(a, b) in pairs {
                sa += a;
                sb += b;
            }
            let (ma, mb) = (sa / n, sb / n);
            let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
            for &(a, b) in pairs {
                let (da, db) = (a - ma, b - mb);
                cov += da * db;
                va += da * da;
                vb += db * db;
            }
            let denom = libm::sqrt(va * vb);
            if denom == 0.0 {
                return Err(SimilarityError::Undefined);
            }
            Ok((cov / denom).clamp(-1.0, 1.0))
        }
        SimilarityMeasure::InverseMeanAbsDiff => {
            let mut total = 0.0;
            for &(a, b) in pairs {
                total += libm::fabs(a - b);
            }
            let mad = total / pairs.len() as f64;
            Ok((1.0 - mad / scale.range()).clamp(0.0, 1.0))
        }
    }
}

/// Co-rated value pairs of two item-ascending rating sequences.
fn overlap_pairs<A, B>(a: A, b: B) -> Vec<(f64, f64)>
where
    A: IntoIterator<Item = (ItemId, f64)>,
    B: IntoIterator<Item = (ItemId, f64)>,
{
    let mut out = Vec::new();
    let mut b = b.into_iter().peekable();
    for (item, av) in a {
        while let Some(&(bi, _)) = b.peek() {
            if bi < item {
                b.next();
            } else {
                break;
            }
        }
        if let Some(&(bi, bv)) = b.peek() {
            if bi == item {
                out.push((av, bv));
                b.next();
            }
        }
    }
    out
}

/// Similarity of two rating maps, each given in ascending item order,
/// computed over their co-rated items only.
pub fn similarity<A, B>(
    a: A,
    b: B,
    measure: SimilarityMeasure,
    scale: RatingScale,
) -> Result<f64, SimilarityError>
where
    A: IntoIterator<Item = (ItemId, f64)>,
    B: IntoIterator<Item = (ItemId, f64)>,
{
    score_pairs(&overlap_pairs(a, b), measure, scale)
}

/// Scores a preference vector against the user it was mapped onto. The
/// measure may differ from the one used for the mapping.
pub fn data_layer_score(
    v: &PreferenceVector,
    user: &UserRecord,
    measure: SimilarityMeasure,
    scale: RatingScale,
) -> Result<f64, SimilarityError> {
    similarity(v.entries(), user.entries(), measure, scale)
}

/// Finds the candidate user whose ratings are most similar to `v`.
///
/// Candidates need at least `min_overlap` co-rated items and a defined
/// score. Ties resolve to the smallest user id; the full tie set is kept.
pub fn map_to_user(
    v: &PreferenceVector,
    dataset: &BenchmarkDataset,
    recsets: Option<&RecommendationSets>,
    config: &MappingConfig,
) -> Result<MappingResult, MappingError> {
    config.validate()?;
    if v.is_empty() {
        return Err(MappingError::AllSkipped);
    }
    let recsets = match config.candidate_filter {
        CandidateFilter::AllUsers => None,
        CandidateFilter::UsersWithRecommendations => {
            Some(recsets.ok_or(MappingError::MissingRecommendations)?)
        }
    };

    // Walk the item-major index once to count overlaps, then again to lay
    // each user's pairs out contiguously in ascending item order.
    let positions: Vec<(usize, f64)> = v
        .entries()
        .filter_map(|(item, value)| dataset.item_position(item).map(|p| (p, value)))
        .collect();
    let users = dataset.users();
    let mut counts = vec![0u32; users.len() + 1];
    for &(pos, _) in &positions {
        for &(uidx, _) in dataset.raters_at(pos) {
            counts[uidx as usize + 1] += 1;
        }
    }
    for i in 1..counts.len() {
        counts[i] += counts[i - 1];
    }
    let offsets = counts;
    let mut cursor: Vec<u32> = offsets[..users.len()].to_vec();
    let mut pairs = vec![(0.0, 0.0); offsets[users.len()] as usize];
    for &(pos, value) in &positions {
        for &(uidx, rating) in dataset.raters_at(pos) {
            let slot = &mut cursor[uidx as usize];
            pairs[*slot as usize] = (value, rating);
            *slot += 1;
        }
    }

    let mut best: Option<(f64, usize)> = None;
    let mut ties: Vec<UserId> = Vec::new();
    for (uidx, user) in users.iter().enumerate() {
        let span = &pairs[offsets[uidx] as usize..offsets[uidx + 1] as usize];
        if span.len() < config.min_overlap {
            continue;
        }
        if let Some(sets) = recsets {
            if !sets.covers(user.id()) {
                continue;
            }
        }
        let Ok(score) = score_pairs(span, config.measure, dataset.scale()) else {
            continue;
        };
        match best {
            Some((top, _)) if score < top => {}
            Some((top, _)) if score == top => ties.push(user.id()),
            _ => {
                best = Some((score, span.len()));
                ties.clear();
                ties.push(user.id());
            }
        }
    }

    let (score, overlap) = best.ok_or(MappingError::NoCandidate)?;
    Ok(MappingResult {
        mapped_user: ties[0],
        score,
        overlap,
        tie_set: ties,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Rating;

    const SCALE: RatingScale = RatingScale::HALF_STARS;

    fn pv(pairs: &[(u32, f64)]) -> PreferenceVector {
        pairs.iter().map(|&(i, v)| (ItemId(i), v)).collect()
    }

    fn sim(a: &[(u32, f64)], b: &[(u32, f64)], m: SimilarityMeasure) -> Result<f64, SimilarityError> {
        similarity(pv(a).entries(), pv(b).entries(), m, SCALE)
    }

    fn dataset(rows: &[(u32, u32, f64)]) -> BenchmarkDataset {
        let ratings = rows
            .iter()
            .map(|&(u, i, v)| Rating {
                user: UserId(u),
                item: ItemId(i),
                value: v,
                timestamp: None,
            })
            .collect();
        BenchmarkDataset::build(ratings, Vec::new(), SCALE).unwrap()
    }

    #[test]
    fn preference_vector_drops_skips() {
        let v = preference_vector(
            [(ItemId(1), Some(5.0)), (ItemId(2), None), (ItemId(3), Some(2.0))],
            SCALE,
        )
        .unwrap();
        assert_eq!(v, pv(&[(1, 5.0), (3, 2.0)]));
        assert_eq!(
            preference_vector([(ItemId(1), None)], SCALE),
            Err(MappingError::AllSkipped)
        );
        assert_eq!(preference_vector([(ItemId(7), Some(4.0))], SCALE).unwrap(), pv(&[(7, 4.0)]));
    }

    #[test]
    fn cosine_fixtures() {
        let m = SimilarityMeasure::CosineOverOverlap;
        assert_eq!(sim(&[(1, 5.0), (2, 3.0)], &[(1, 5.0), (2, 3.0), (3, 4.0)], m), Ok(1.0));
        let s = sim(&[(1, 5.0), (2, 1.0)], &[(1, 1.0), (2, 5.0)], m).unwrap();
        assert!((s - 10.0 / 26.0).abs() < 1e-12);
        assert_eq!(sim(&[(1, 5.0)], &[(2, 3.0)], m), Err(SimilarityError::NoOverlap));
    }

    #[test]
    fn imad_fixture() {
        let s = sim(
            &[(1, 5.0), (2, 1.0)],
            &[(1, 1.0), (2, 5.0)],
            SimilarityMeasure::InverseMeanAbsDiff,
        )
        .unwrap();
        assert!((s - (1.0 - 4.0 / 4.5)).abs() < 1e-12);
    }

    #[test]
    fn pearson_degenerate_cases() {
        let m = SimilarityMeasure::PearsonOverOverlap;
        assert_eq!(sim(&[(1, 5.0)], &[(1, 4.0)], m), Err(SimilarityError::Undefined));
        assert_eq!(
            sim(&[(1, 5.0), (2, 5.0)], &[(1, 4.0), (2, 1.0)], m),
            Err(SimilarityError::Undefined)
        );
        let s = sim(&[(1, 5.0), (2, 1.0)], &[(1, 1.0), (2, 5.0)], m).unwrap();
        assert_eq!(s, -1.0);
    }

    #[test]
    fn singleton_candidate_wins_regardless_of_score() {
        let ds = dataset(&[(1, 1, 1.0), (1, 2, 5.0), (1, 3, 1.0)]);
        let config = MappingConfig {
            candidate_filter: CandidateFilter::AllUsers,
            ..MappingConfig::default()
        };
        let r = map_to_user(&pv(&[(1, 5.0), (2, 1.0), (3, 5.0)]), &ds, None, &config).unwrap();
        assert_eq!(r.mapped_user, UserId(1));
        assert_eq!(r.overlap, 3);
        assert_eq!(r.tie_set, [UserId(1)]);
    }

    #[test]
    fn min_overlap_filters_and_ties_resolve_to_min_id() {
        let ds = dataset(&[
            (5, 1, 4.0),
            (5, 2, 2.0),
            (3, 1, 4.0),
            (3, 2, 2.0),
            (9, 1, 4.0),
        ]);
        let config = MappingConfig {
            min_overlap: 2,
            candidate_filter: CandidateFilter::AllUsers,
            ..MappingConfig::default()
        };
        let r = map_to_user(&pv(&[(1, 4.0), (2, 2.0)]), &ds, None, &config).unwrap();
        assert_eq!(r.mapped_user, UserId(3));
        assert_eq!(r.tie_set, [UserId(3), UserId(5)]);
        assert_eq!(r.score, 1.0);

        let strict = MappingConfig {
            min_overlap: 3,
            ..config
        };
        assert_eq!(
            map_to_user(&pv(&[(1, 4.0), (2, 2.0)]), &ds, None, &strict),
            Err(MappingError::NoCandidate)
        );
    }

    #[test]
    fn recommendations_required_by_default_filter() {
        let ds = dataset(&[(1, 1, 4.0)]);
        assert_eq!(
            map_to_user(&pv(&[(1, 4.0)]), &ds, None, &MappingConfig::default()),
            Err(MappingError::MissingRecommendations)
        );
    }

    #[test]
    fn zero_min_overlap_is_invalid() {
        let ds = dataset(&[(1, 1, 4.0)]);
        let config = MappingConfig {
            min_overlap: 0,
            candidate_filter: CandidateFilter::AllUsers,
            ..MappingConfig::default()
        };
        assert_eq!(
            map_to_user(&pv(&[(1, 4.0)]), &ds, None, &config),
            Err(MappingError::InvalidConfig)
        );
    }

    #[test]
    fn data_layer_scores_with_other_measure() {
        let ds = dataset(&[(1, 1, 5.0), (1, 2, 3.0), (2, 1, 1.0), (2, 2, 5.0)]);
        let imad = SimilarityMeasure::InverseMeanAbsDiff;
        let user1 = ds.user(UserId(1)).unwrap();
        assert_eq!(data_layer_score(&pv(&[(1, 5.0)]), user1, imad, SCALE), Ok(1.0));
        let user2 = ds.user(UserId(2)).unwrap();
        let s = data_layer_score(&pv(&[(1, 5.0), (2, 1.0)]), user2, imad, SCALE).unwrap();
        assert!((s - 0.111_111_111_111_111_1).abs() < 1e-9);
        assert_eq!(
            data_layer_score(&pv(&[(9, 5.0)]), user2, imad, SCALE),
            Err(SimilarityError::NoOverlap)
        );
    }
}
