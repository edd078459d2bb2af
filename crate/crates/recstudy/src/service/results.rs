//! The researcher-facing export of a closed study.

use std::io::Write;

use recstudy_core::{DatasetStats, ItemId, Phase, UserId};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{
    Answer, AnswerValue, ResponseRecord, Session, SessionState, Study, StudySpec, VoidReason,
};
use crate::formats::format_rating;

pub const RESULTS_SCHEMA: &str = "recstudy.results/1";

/// Salted, case-insensitive email pseudonym.
pub fn email_hash(salt: &str, email: &str) -> String {
    let mut h = Sha256::new();
    h.update(salt.as_bytes());
    h.update(b":");
    h.update(email.trim().to_ascii_lowercase().as_bytes());
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingSummary {
    pub mapped_user: UserId,
    pub score: f64,
    pub overlap: usize,
    pub tie_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseResponses {
    pub phase: Phase,
    pub submitted_at: u64,
    pub answers: Vec<Answer>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantResult {
    pub participant: usize,
    pub email_hash: String,
    pub state: SessionState,
    pub void_reason: Option<VoidReason>,
    pub mapping: Option<MappingSummary>,
    /// Labels shown as "List A" and "List B", when the lists were shown.
    pub list_a: Option<String>,
    pub list_b: Option<String>,
    pub dispatch_error: Option<String>,
    pub invited_at: u64,
    pub updated_at: u64,
    pub responses: Vec<PhaseResponses>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResults {
    pub schema: String,
    pub study_id: String,
    /// The study spec with participant emails replaced by their hashes.
    pub spec: StudySpec,
    pub labels: [String; 2],
    pub dataset: DatasetStats,
    pub elicitation_items: Vec<ItemId>,
    pub created_at: u64,
    pub started_at: Option<u64>,
    pub closed_at: Option<u64>,
    pub warnings: Vec<String>,
    pub participants: Vec<ParticipantResult>,
}

impl StudyResults {
    /// `sessions` in participant order, `responses` for those sessions.
    pub fn assemble(
        study: &Study,
        sessions: &[&Session],
        responses: &[&ResponseRecord],
        salt: &str,
    ) -> StudyResults {
        let mut spec = study.spec.clone();
        spec.participants = spec.participants.iter().map(|e| email_hash(salt, e)).collect();
        let participants = sessions
            .iter()
            .map(|s| {
                let mut own: Vec<&ResponseRecord> =
                    responses.iter().copied().filter(|r| r.token == s.token).collect();
                own.sort_by_key(|r| r.phase);
                let label = |idx: usize| study.labels[idx].clone();
                ParticipantResult {
                    participant: s.ordinal,
                    email_hash: email_hash(salt, &s.email),
                    state: s.state,
                    void_reason: s.void_reason,
                    mapping: s.mapping.as_ref().map(|m| MappingSummary {
                        mapped_user: m.mapped_user,
                        score: m.score,
                        overlap: m.overlap,
                        tie_count: m.tie_set.len(),
                    }),
                    list_a: s.list_a.map(label),
                    list_b: s.list_a.map(|a| label(1 - a)),
                    dispatch_error: s.dispatch_error.clone(),
                    invited_at: s.invited_at,
                    updated_at: s.updated_at,
                    responses: own
                        .into_iter()
                        .map(|r| PhaseResponses {
                            phase: r.phase,
                            submitted_at: r.submitted_at,
                            answers: r.answers.clone(),
                        })
                        .collect(),
                }
            })
            .collect();
        StudyResults {
            schema: RESULTS_SCHEMA.to_string(),
            study_id: study.id.clone(),
            spec,
            labels: study.labels.clone(),
            dataset: study.dataset_stats.clone(),
            elicitation_items: study.item_set.items.clone(),
            created_at: study.created_at,
            started_at: study.started_at,
            closed_at: study.closed_at,
            warnings: study.warnings.clone(),
            participants,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<StudyResults> {
        serde_json::from_str(text)
    }

    /// One row per (participant, answered question). Participants that are
    /// void or never submitted anything get a single status row.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(CSV_HEADER)?;
        for p in &self.participants {
            let mapping = |f: fn(&MappingSummary) -> String| {
                p.mapping.as_ref().map(f).unwrap_or_default()
            };
            let fixed = [
                p.participant.to_string(),
                p.email_hash.clone(),
                enum_name(&p.state),
                p.void_reason.as_ref().map(enum_name).unwrap_or_default(),
                mapping(|m| m.mapped_user.to_string()),
                mapping(|m| m.score.to_string()),
                mapping(|m| m.overlap.to_string()),
                mapping(|m| m.tie_count.to_string()),
                p.list_a.clone().unwrap_or_default(),
                p.list_b.clone().unwrap_or_default(),
            ];
            let answered = p.responses.iter().any(|r| !r.answers.is_empty());
            if p.state == SessionState::Void || !answered {
                w.write_record(fixed.iter().map(String::as_str).chain(["", "", "", ""]))?;
                continue;
            }
            for r in &p.responses {
                for a in &r.answers {
                    let row = [
                        enum_name(&r.phase),
                        a.question_id.clone(),
                        answer_text(&a.answer),
                        r.submitted_at.to_string(),
                    ];
                    w.write_record(fixed.iter().chain(row.iter()))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory csv");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

pub const CSV_HEADER: [&str; 14] = [
    "participant",
    "email_hash",
    "state",
    "void_reason",
    "mapped_user",
    "score",
    "overlap",
    "tie_count",
    "list_a",
    "list_b",
    "phase",
    "question_id",
    "answer",
    "submitted_at",
];

fn enum_name<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

pub fn answer_text(answer: &AnswerValue) -> String {
    match answer {
        AnswerValue::Rating(v) => format_rating(*v),
        AnswerValue::Skip => "skip".to_string(),
        AnswerValue::Likert(n) => n.to_string(),
        AnswerValue::Pick(label) => label.clone(),
    }
}
