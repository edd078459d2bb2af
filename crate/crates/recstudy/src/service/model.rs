//! Persistent records of the study service.

use std::collections::BTreeSet;
use std::path::PathBuf;

use recstudy_core::elicitation::build_final_questionnaire;
use recstudy_core::{DatasetStats, ElicitationItemSet, MappingConfig, MappingResult, Phase, SelectionStrategy};
use serde::{Deserialize, Serialize};

use crate::formats::DatasetRef;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMode {
    /// Participants compare the two recommendation lists.
    #[default]
    Comparison,
    /// Participants judge the mapped user's own top-rated items.
    MappingValidation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    #[default]
    Popularity,
    PopularityEntropy,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElicitationSpec {
    #[serde(default)]
    pub strategy: StrategyName,
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ElicitationSpec {
    pub fn strategy(&self) -> SelectionStrategy {
        match self.strategy {
            StrategyName::Popularity => SelectionStrategy::Popularity,
            StrategyName::PopularityEntropy => SelectionStrategy::PopularityEntropy,
            StrategyName::Random => SelectionStrategy::Random { seed: self.seed },
        }
    }
}

fn default_validation_n() -> usize {
    10
}

/// Everything a researcher provides when creating a study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub title: String,
    #[serde(default)]
    pub description: String,
    pub dataset: DatasetRef,
    #[serde(default)]
    pub mapping: MappingConfig,
    pub elicitation: ElicitationSpec,
    #[serde(default)]
    pub dimensions: Vec<String>,
    pub recommendations: PathBuf,
    pub participants: Vec<String>,
    #[serde(default)]
    pub mode: StudyMode,
    #[serde(default = "default_validation_n")]
    pub validation_n: usize,
}

/// Loose syntactic check: one `@`, non-empty local part, dotted domain.
pub fn is_valid_email(email: &str) -> bool {
    let Some((local, domain)) = email.split_once('@') else {
        return false;
    };
    !local.is_empty()
        && !domain.contains('@')
        && domain.contains('.')
        && !domain.starts_with('.')
        && !domain.ends_with('.')
        && !email.chars().any(|c| c.is_whitespace() || c.is_control())
}

impl StudySpec {
    /// Checks the spec and returns it with trimmed, deduplicated emails,
    /// plus a warning per dropped duplicate.
    pub fn normalized(&self) -> Result<(StudySpec, Vec<String>), String> {
        if self.title.trim().is_empty() {
            return Err("title must not be empty".into());
        }
        if self.participants.is_empty() {
            return Err("at least one participant email is required".into());
        }
        self.mapping.validate().map_err(|e| e.to_string())?;
        match self.mode {
            StudyMode::Comparison => {
                build_final_questionnaire(&self.dimensions).map_err(|e| e.to_string())?;
            }
            StudyMode::MappingValidation if self.validation_n == 0 => {
                return Err("validation_n must be at least 1".into());
            }
            StudyMode::MappingValidation => {}
        }

        let mut warnings = Vec::new();
        let mut seen = BTreeSet::new();
        let mut participants = Vec::new();
        for raw in &self.participants {
            let email = raw.trim();
            if !is_valid_email(email) {
                return Err(format!("invalid email address '{email}'"));
            }
            if seen.insert(email.to_ascii_lowercase()) {
                participants.push(email.to_string());
            } else {
                warnings.push(format!("duplicate participant '{email}' ignored"));
            }
        }
        let mut spec = self.clone();
        spec.participants = participants;
        spec.dimensions = self.dimensions.iter().map(|d| d.trim().to_string()).collect();
        Ok((spec, warnings))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyStatus {
    Draft,
    Running,
    Closed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub id: String,
    pub spec: StudySpec,
    pub status: StudyStatus,
    pub created_at: u64,
    pub started_at: Option<u64>,
    pub closed_at: Option<u64>,
    /// Frozen at creation time.
    pub item_set: ElicitationItemSet,
    /// Recommendation labels in file order; index 0 is "algorithm 1".
    pub labels: [String; 2],
    pub dataset_stats: DatasetStats,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Invited,
    InitialPhase,
    Mapped,
    FinalPhase,
    Done,
    Void,
}

impl SessionState {
    pub const ALL: [SessionState; 6] = [
        SessionState::Invited,
        SessionState::InitialPhase,
        SessionState::Mapped,
        SessionState::FinalPhase,
        SessionState::Done,
        SessionState::Void,
    ];

    fn rank(self) -> Option<u8> {
        match self {
            SessionState::Invited => Some(0),
            SessionState::InitialPhase => Some(1),
            SessionState::Mapped => Some(2),
            SessionState::FinalPhase => Some(3),
            SessionState::Done => Some(4),
            SessionState::Void => None,
        }
    }

    /// The declared transition graph: forward along the main line, or from
    /// the initial phase into `Void`.
    pub fn can_become(self, next: SessionState) -> bool {
        match (self.rank(), next.rank()) {
            (Some(a), Some(b)) => b > a,
            (_, None) => self == SessionState::InitialPhase,
            (None, Some(_)) => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoidReason {
    AllSkipped,
    NoCandidate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub token: String,
    pub study_id: String,
    /// Position in the study's participant list.
    pub ordinal: usize,
    pub email: String,
    pub state: SessionState,
    pub void_reason: Option<VoidReason>,
    pub mapping: Option<MappingResult>,
    /// Index of the recommendation set rendered as "List A".
    pub list_a: Option<usize>,
    pub dispatch_error: Option<String>,
    pub invited_at: u64,
    pub updated_at: u64,
}

/// A single answer. Serialized as `{"rating": 4.0}`, `"skip"`,
/// `{"likert": 5}` or `{"pick": "List A"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerValue {
    Rating(f64),
    Skip,
    Likert(u8),
    Pick(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub question_id: String,
    pub answer: AnswerValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub token: String,
    pub phase: Phase,
    pub answers: Vec<Answer>,
    pub submitted_at: u64,
}
