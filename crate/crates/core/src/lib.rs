//! Core primitives for running recommender user studies on top of a
//! historic benchmark dataset.
//!
//! A study participant answers an initial rating questionnaire; the answers
//! become a sparse [`PreferenceVector`], which [`map_to_user`] assigns to the
//! most similar user of a [`BenchmarkDataset`]. The recommendations that were
//! pre-computed for that proxy user are then shown to the participant. The
//! [`simulation`] module measures how well the mapping preserves
//! preferences by letting dataset users answer the questionnaire themselves.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, persistence
//! and the network service live in the `recstudy` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod dataset;
pub mod demo;
pub mod elicitation;
pub mod mapping;
pub mod metrics;
pub mod recsets;
pub mod scale;
pub mod simulation;
pub mod stats;

mod ids;

pub use dataset::{BenchmarkDataset, DatasetError, DatasetStats, Item, Rating, UserRecord};
pub use elicitation::{
    ElicitationError, ElicitationItemSet, Phase, Question, QuestionKind, Questionnaire,
    SelectionStrategy,
};
pub use ids::{ItemId, UserId};
pub use mapping::{
    map_to_user, preference_vector, similarity, CandidateFilter, MappingConfig, MappingError,
    MappingResult, PreferenceVector, SimilarityError, SimilarityMeasure,
};
pub use recsets::{RecEntry, RecommendationSets, RecsError};
pub use scale::RatingScale;
