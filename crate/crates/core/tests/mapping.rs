mod support;

use proptest::prelude::*;
use recstudy_core::mapping::data_layer_score;
use recstudy_core::{
    map_to_user, similarity, BenchmarkDataset, CandidateFilter, ItemId, MappingConfig,
    MappingError, PreferenceVector, Rating, RatingScale, SimilarityMeasure,
};
use support::oracle::{oracle_map, random_dataset, random_vector};

fn all_users(measure: SimilarityMeasure, min_overlap: usize) -> MappingConfig {
    MappingConfig {
        measure,
        min_overlap,
        candidate_filter: CandidateFilter::AllUsers,
    }
}

#[test]
fn matches_exhaustive_scan_on_100_user_dataset() {
    let mut checked = 0;
    for seed in 0..40u64 {
        let ds = random_dataset(seed, 100, 60);
        for vseed in 0..10u64 {
            let v = random_vector(seed * 1000 + vseed, &ds, 15);
            for measure in SimilarityMeasure::ALL {
                for min_overlap in [1, 2, 3] {
                    let config = all_users(measure, min_overlap);
                    let got = map_to_user(&v, &ds, None, &config);
                    let want = oracle_map(&v, &ds, None, &config);
                    match (got, want) {
                        (Ok(r), Some(o)) => {
                            assert_eq!(r.score.to_bits(), o.score.to_bits());
                            assert_eq!(r.tie_set, o.tie_set);
                            assert_eq!(r.overlap, o.overlap);
                            assert_eq!(r.mapped_user, o.tie_set[0]);
                            checked += 1;
                        }
                        (Err(MappingError::NoCandidate), None) => {}
                        (got, want) => panic!("seed {seed}: {got:?} vs {want:?}"),
                    }
                }
            }
        }
    }
    assert!(checked > 1000, "only {checked} mapped cases");
}

#[test]
fn copied_vector_maps_with_score_one() {
    let ds = random_dataset(3, 80, 40);
    for user in ds.users().iter().filter(|u| u.len() >= 3) {
        let v: PreferenceVector = user.entries().take(6).collect();
        let r = map_to_user(&v, &ds, None, &all_users(SimilarityMeasure::CosineOverOverlap, 3))
            .unwrap();
        assert_eq!(r.score, 1.0);
        assert!(r.tie_set.contains(&user.id()));
    }
}

/// Cosine is scale-invariant; power-of-two factors keep the arithmetic exact.
#[test]
fn cosine_tie_set_invariant_under_positive_scaling() {
    for seed in 0..20u64 {
        let ds = random_dataset(seed, 60, 30);
        for factor in [0.25, 2.0, 4.0] {
            let scaled_ratings: Vec<Rating> = ds
                .ratings()
                .map(|r| Rating {
                    value: r.value * factor,
                    ..r
                })
                .collect();
            let s = ds.scale();
            let scaled_scale = RatingScale::new(s.min * factor, s.max * factor, s.step * factor).unwrap();
            let scaled = BenchmarkDataset::build(scaled_ratings, vec![], scaled_scale).unwrap();
            let v = random_vector(seed + 77, &ds, 10);
            let sv: PreferenceVector = v.entries().map(|(i, x)| (i, x * factor)).collect();
            let config = all_users(SimilarityMeasure::CosineOverOverlap, 2);
            let a = map_to_user(&v, &ds, None, &config).map(|r| r.tie_set);
            let b = map_to_user(&sv, &scaled, None, &config).map(|r| r.tie_set);
            assert_eq!(a, b);
        }
    }
}

#[test]
fn mapping_is_deterministic() {
    let ds = random_dataset(9, 150, 80);
    let v = random_vector(10, &ds, 20);
    let config = all_users(SimilarityMeasure::InverseMeanAbsDiff, 2);
    let first = map_to_user(&v, &ds, None, &config);
    for _ in 0..5 {
        assert_eq!(map_to_user(&v, &ds, None, &config), first);
    }
}

fn rating_map() -> impl Strategy<Value = Vec<(u32, f64)>> {
    prop::collection::btree_map(0u32..30, 1u32..=10, 0..20)
        .prop_map(|m| m.into_iter().map(|(k, v)| (k, v as f64 * 0.5)).collect())
}

fn to_vec(pairs: &[(u32, f64)]) -> PreferenceVector {
    pairs.iter().map(|&(i, v)| (ItemId(i), v)).collect()
}

proptest! {
    #[test]
    fn similarity_is_symmetric(a in rating_map(), b in rating_map()) {
        let (va, vb) = (to_vec(&a), to_vec(&b));
        for m in SimilarityMeasure::ALL {
            let ab = similarity(va.entries(), vb.entries(), m, RatingScale::HALF_STARS);
            let ba = similarity(vb.entries(), va.entries(), m, RatingScale::HALF_STARS);
            prop_assert_eq!(ab, ba);
        }
    }

    #[test]
    fn similarity_ranges(a in rating_map(), b in rating_map()) {
        let (va, vb) = (to_vec(&a), to_vec(&b));
        let scale = RatingScale::HALF_STARS;
        if let Ok(c) = similarity(va.entries(), vb.entries(), SimilarityMeasure::CosineOverOverlap, scale) {
            prop_assert!(c > 0.0 && c <= 1.0);
        }
        if let Ok(p) = similarity(va.entries(), vb.entries(), SimilarityMeasure::PearsonOverOverlap, scale) {
            prop_assert!((-1.0..=1.0).contains(&p));
        }
        if let Ok(d) = similarity(va.entries(), vb.entries(), SimilarityMeasure::InverseMeanAbsDiff, scale) {
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }

    /// A vector copied from a user's ratings scores at least as high against
    /// that user as against anyone else, for cosine and IMAD.
    #[test]
    fn self_mapping_is_optimal(seed in 0u64..500, pick in 0usize..1000, take in 3usize..12) {
        let ds = random_dataset(seed, 60, 40);
        let eligible: Vec<_> = ds.users().iter().filter(|u| u.len() >= 3).collect();
        prop_assume!(!eligible.is_empty());
        let user = eligible[pick % eligible.len()];
        let v: PreferenceVector = user.entries().take(take).collect();
        for m in [SimilarityMeasure::CosineOverOverlap, SimilarityMeasure::InverseMeanAbsDiff] {
            let own = data_layer_score(&v, user, m, ds.scale()).unwrap();
            for other in ds.users() {
                if let Ok(s) = data_layer_score(&v, other, m, ds.scale()) {
                    prop_assert!(s <= own);
                }
            }
            let r = map_to_user(&v, &ds, None, &all_users(m, 3)).unwrap();
            prop_assert!(r.tie_set.contains(&user.id()));
        }
    }
}

#[test]
fn hand_computed_fixtures() {
    let v = to_vec(&[(1, 5.0), (2, 1.0)]);
    let u = to_vec(&[(1, 1.0), (2, 5.0)]);
    let scale = RatingScale::HALF_STARS;
    let cos = similarity(v.entries(), u.entries(), SimilarityMeasure::CosineOverOverlap, scale).unwrap();
    assert!((cos - 10.0 / 26.0).abs() < 1e-9);
    assert!((cos - 0.384_615_384_6).abs() < 1e-9);
    let imad = similarity(v.entries(), u.entries(), SimilarityMeasure::InverseMeanAbsDiff, scale).unwrap();
    assert!((imad - 1.0 / 9.0).abs() < 1e-9);
}
