//! Study lifecycle, participant sessions and results export.
//!
//! Locking order is study state, then the session table, then one session.
//! Session operations hold the study state for reading, so closing or
//! starting a study never interleaves with a half-applied submission.
//! Every change is committed to the store before it becomes visible in
//! memory.

pub mod dispatch;
pub mod model;
pub mod results;
pub mod store;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use recstudy_core::elicitation::{
    build_final_questionnaire, build_initial_questionnaire, build_validation_questionnaire,
    select_items,
};
use recstudy_core::{
    map_to_user, preference_vector, BenchmarkDataset, CandidateFilter, ElicitationError, ItemId,
    MappingError, Phase, QuestionKind, Questionnaire, RecommendationSets,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::{load_recommendation_file, FormatError};
use dispatch::{Dispatcher, Invitation};
use model::{
    Answer, AnswerValue, ResponseRecord, Session, SessionState, Study, StudyMode, StudySpec,
    StudyStatus, VoidReason,
};
use results::StudyResults;
use store::{Record, Snapshot, Store, StoreError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid study spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Ingest(#[from] FormatError),
    #[error(transparent)]
    Elicitation(#[from] ElicitationError),
    #[error("unknown study '{0}'")]
    UnknownStudy(String),
    #[error("unknown session token")]
    UnknownToken,
    #[error("cannot {action} a study that is {from:?}")]
    InvalidTransition { from: StudyStatus, action: &'static str },
    #[error("study is not running")]
    StudyNotRunning,
    #[error("study is not closed")]
    StudyNotClosed,
    #[error("session is void: {0:?}")]
    SessionVoid(VoidReason),
    #[error("session is in state {0:?}, which does not accept this submission")]
    PhaseMismatch(SessionState),
    #[error("unknown question '{0}'")]
    UnknownQuestion(String),
    #[error("invalid answer to '{question}': {reason}")]
    InvalidAnswer { question: String, reason: String },
    #[error("unanswered questions: {0:?}")]
    IncompleteAnswers(Vec<String>),
    #[error("study data for '{0}' is not loaded")]
    StudyDataUnavailable(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl ServiceError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::InvalidSpec(_) => "invalid_spec",
            ServiceError::Ingest(e) => match e.root() {
                FormatError::Recommendations(_) => "invalid_recommendations",
                FormatError::Io { .. } => "file_not_readable",
                _ => "invalid_dataset",
            },
            ServiceError::Elicitation(_) => "invalid_elicitation",
            ServiceError::UnknownStudy(_) => "unknown_study",
            ServiceError::UnknownToken => "unknown_token",
            ServiceError::InvalidTransition { .. } => "invalid_transition",
            ServiceError::StudyNotRunning => "study_not_running",
            ServiceError::StudyNotClosed => "study_not_closed",
            ServiceError::SessionVoid(_) => "session_void",
            ServiceError::PhaseMismatch(_) => "phase_mismatch",
            ServiceError::UnknownQuestion(_) => "unknown_question",
            ServiceError::InvalidAnswer { .. } => "invalid_answer",
            ServiceError::IncompleteAnswers(_) => "incomplete_answers",
            ServiceError::StudyDataUnavailable(_) => "study_data_unavailable",
            ServiceError::Store(_) => "store_failure",
        }
    }

    /// True when the caller, not the deployment, is at fault.
    pub fn is_caller_fault(&self) -> bool {
        !matches!(
            self,
            ServiceError::Store(_) | ServiceError::StudyDataUnavailable(_)
        )
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Clone, Debug)]
pub struct ServiceOptions {
    /// Public URL prefix of invitation links.
    pub base_url: String,
    pub hash_salt: String,
    /// Seeds tokens and presentation orders. `None` draws from the OS.
    pub seed: Option<u64>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        ServiceOptions {
            base_url: "http://127.0.0.1:8080".to_string(),
            hash_salt: String::new(),
            seed: None,
        }
    }
}

/// Immutable material a running study needs to serve sessions.
struct StudyData {
    dataset: BenchmarkDataset,
    recsets: RecommendationSets,
    initial: Questionnaire,
    final_: Option<Questionnaire>,
}

struct SessionEntry {
    session: Session,
    responses: BTreeMap<Phase, ResponseRecord>,
}

struct StudyEntry {
    study: RwLock<Study>,
    data: Option<Arc<StudyData>>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<SessionEntry>>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub id: String,
    pub title: String,
    pub status: StudyStatus,
    pub mode: StudyMode,
    pub created_at: u64,
    pub participants: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyStatusView {
    pub id: String,
    pub title: String,
    pub description: String,
    pub status: StudyStatus,
    pub mode: StudyMode,
    pub created_at: u64,
    pub started_at: Option<u64>,
    pub closed_at: Option<u64>,
    pub participants: usize,
    pub elicitation_items: usize,
    pub labels: [String; 2],
    pub warnings: Vec<String>,
    /// Sessions per state; every state is listed.
    pub progress: BTreeMap<SessionState, usize>,
    pub dispatch_failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreatedStudy {
    pub study_id: String,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub dispatched: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderedItem {
    pub item: ItemId,
    pub title: String,
    pub genres: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderedList {
    pub label: String,
    pub items: Vec<RenderedItem>,
}

/// What a participant sees for their current phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub study_title: String,
    pub study_description: String,
    pub state: SessionState,
    pub questionnaire: Option<Questionnaire>,
    /// Both lists in display order, in comparison mode only.
    pub lists: Vec<RenderedList>,
}

/// Response to an initial submission. The mapped user is never included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialOutcome {
    pub state: SessionState,
    pub void_reason: Option<VoidReason>,
    pub answered: usize,
    pub overlap: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalOutcome {
    pub state: SessionState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Json,
    Csv,
}

pub struct StudyService {
    store: Arc<dyn Store>,
    dispatcher: Arc<dyn Dispatcher>,
    options: ServiceOptions,
    rng: Mutex<ChaCha20Rng>,
    studies: RwLock<BTreeMap<String, Arc<StudyEntry>>>,
    tokens: RwLock<HashMap<String, String>>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn load_study_data(study: &Study) -> Result<StudyData> {
    let dataset = study.spec.dataset.load()?;
    let recsets = load_recommendation_file(&study.spec.recommendations, &dataset)?;
    load_data_from(study, dataset, recsets)
}

impl StudyService {
    /// Opens a service over `store`, restoring whatever it holds.
    ///
    /// Studies that are not closed have their dataset and recommendation
    /// files reloaded; a study whose files have gone missing stays visible
    /// but rejects session operations.
    pub fn open(
        store: Arc<dyn Store>,
        dispatcher: Arc<dyn Dispatcher>,
        options: ServiceOptions,
    ) -> Result<Self> {
        let rng = match options.seed {
            Some(seed) => ChaCha20Rng::seed_from_u64(seed),
            None => ChaCha20Rng::from_os_rng(),
        };
        let service = StudyService {
            store,
            dispatcher,
            options,
            rng: Mutex::new(rng),
            studies: RwLock::default(),
            tokens: RwLock::default(),
        };
        let snapshot = service.store.load()?;
        service.restore(snapshot);
        Ok(service)
    }

    fn restore(&self, snapshot: Snapshot) {
        let mut by_study: BTreeMap<String, BTreeMap<String, SessionEntry>> = BTreeMap::new();
        let mut responses: HashMap<String, Vec<ResponseRecord>> = HashMap::new();
        for r in snapshot.responses {
            responses.entry(r.token.clone()).or_default().push(r);
        }
        let mut tokens = self.tokens.write().unwrap();
        for s in snapshot.sessions {
            let resp = responses
                .remove(&s.token)
                .unwrap_or_default()
                .into_iter()
                .map(|r| (r.phase, r))
                .collect();
            tokens.insert(s.token.clone(), s.study_id.clone());
            by_study.entry(s.study_id.clone()).or_default().insert(
                s.token.clone(),
                SessionEntry {
                    session: s,
                    responses: resp,
                },
            );
        }
        let mut studies = self.studies.write().unwrap();
        for study in snapshot.studies {
            let data = if study.status == StudyStatus::Closed {
                None
            } else {
                match load_study_data(&study) {
                    Ok(d) => Some(Arc::new(d)),
                    Err(e) => {
                        tracing::error!(study = %study.id, error = %e, "study data could not be reloaded");
                        None
                    }
                }
            };
            let sessions = by_study
                .remove(&study.id)
                .unwrap_or_default()
                .into_iter()
                .map(|(k, v)| (k, Arc::new(Mutex::new(v))))
                .collect();
            studies.insert(
                study.id.clone(),
                Arc::new(StudyEntry {
                    study: RwLock::new(study),
                    data,
                    sessions: RwLock::new(sessions),
                }),
            );
        }
    }

    pub fn options(&self) -> &ServiceOptions {
        &self.options
    }

    fn random_hex(&self, bytes: usize) -> String {
        let mut buf = vec![0u8; bytes];
        self.rng.lock().unwrap().fill_bytes(&mut buf);
        hex::encode(buf)
    }

    fn entry(&self, study_id: &str) -> Result<Arc<StudyEntry>> {
        self.studies
            .read()
            .unwrap()
            .get(study_id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownStudy(study_id.to_string()))
    }

    fn session_entry(&self, token: &str) -> Result<(Arc<StudyEntry>, Arc<Mutex<SessionEntry>>)> {
        let study_id = self
            .tokens
            .read()
            .unwrap()
            .get(token)
            .cloned()
            .ok_or(ServiceError::UnknownToken)?;
        let entry = self.entry(&study_id)?;
        let session = entry
            .sessions
            .read()
            .unwrap()
            .get(token)
            .cloned()
            .ok_or(ServiceError::UnknownToken)?;
        Ok((entry, session))
    }

    /// Validates `spec` against its files and stores a draft study with a
    /// frozen elicitation item set.
    pub fn create_study(&self, spec: StudySpec) -> Result<CreatedStudy> {
        let (spec, warnings) = spec.normalized().map_err(ServiceError::InvalidSpec)?;
        let dataset = spec.dataset.load()?;
        let recsets = load_recommendation_file(&spec.recommendations, &dataset)?;
        if spec.mode == StudyMode::Comparison
            && spec.mapping.candidate_filter == CandidateFilter::AllUsers
            && recsets.user_count() < dataset.user_count()
        {
            return Err(ServiceError::InvalidSpec(
                "comparison mode with candidate_filter all_users needs recommendations for every dataset user"
                    .into(),
            ));
        }
        let item_set = select_items(&dataset, spec.elicitation.k, spec.elicitation.strategy())?;
        let mut warnings = warnings;
        if dataset.is_metadata_incomplete() {
            warnings.push("dataset has rated items without metadata; they render by id".into());
        }
        let labels = recsets.labels().map(str::to_string);
        let mut studies = self.studies.write().unwrap();
        let id = loop {
            let id = format!("st-{}", self.random_hex(6));
            if !studies.contains_key(&id) {
                break id;
            }
        };
        let study = Study {
            id: id.clone(),
            status: StudyStatus::Draft,
            created_at: now(),
            started_at: None,
            closed_at: None,
            labels,
            dataset_stats: dataset.stats(),
            warnings: warnings.clone(),
            item_set,
            spec,
        };
        let data = load_data_from(&study, dataset, recsets)?;
        self.store.commit(&[Record::Study(study.clone())])?;
        studies.insert(
            id.clone(),
            Arc::new(StudyEntry {
                study: RwLock::new(study),
                data: Some(Arc::new(data)),
                sessions: RwLock::default(),
            }),
        );
        Ok(CreatedStudy {
            study_id: id,
            warnings,
        })
    }

    /// Opens sessions for every participant and sends the invitations.
    /// Returns how many invitations were handed off without error.
    pub fn start_study(&self, study_id: &str) -> Result<StartOutcome> {
        let entry = self.entry(study_id)?;
        let invitations = {
            let mut study = entry.study.write().unwrap();
            if study.status != StudyStatus::Draft {
                return Err(ServiceError::InvalidTransition {
                    from: study.status,
                    action: "start",
                });
            }
            if entry.data.is_none() {
                return Err(ServiceError::StudyDataUnavailable(study.id.clone()));
            }
            let t = now();
            let mut tokens = self.tokens.write().unwrap();
            let mut sessions = Vec::with_capacity(study.spec.participants.len());
            let mut fresh = BTreeSet::new();
            for (ordinal, email) in study.spec.participants.iter().enumerate() {
                let token = loop {
                    let token = self.random_hex(16);
                    if !tokens.contains_key(&token) && fresh.insert(token.clone()) {
                        break token;
                    }
                };
                sessions.push(Session {
                    token,
                    study_id: study.id.clone(),
                    ordinal,
                    email: email.clone(),
                    state: SessionState::Invited,
                    void_reason: None,
                    mapping: None,
                    list_a: None,
                    dispatch_error: None,
                    invited_at: t,
                    updated_at: t,
                });
            }
            let mut next = study.clone();
            next.status = StudyStatus::Running;
            next.started_at = Some(t);
            let mut records = vec![Record::Study(next.clone())];
            records.extend(sessions.iter().cloned().map(Record::Session));
            self.store.commit(&records)?;

            *study = next;
            let mut table = entry.sessions.write().unwrap();
            for s in &sessions {
                tokens.insert(s.token.clone(), s.study_id.clone());
                table.insert(
                    s.token.clone(),
                    Arc::new(Mutex::new(SessionEntry {
                        session: s.clone(),
                        responses: BTreeMap::new(),
                    })),
                );
            }
            sessions
                .iter()
                .map(|s| {
                    Invitation::new(
                        &self.options.base_url,
                        &study.id,
                        &study.spec.title,
                        &s.email,
                        &s.token,
                    )
                })
                .collect::<Vec<_>>()
        };

        let mut outcome = StartOutcome {
            dispatched: 0,
            failed: 0,
        };
        for inv in invitations {
            match self.dispatcher.dispatch(&inv) {
                Ok(()) => outcome.dispatched += 1,
                Err(err) => {
                    outcome.failed += 1;
                    tracing::warn!(study = study_id, error = %err, "invitation failed");
                    let session = entry.sessions.read().unwrap().get(&inv.token).cloned();
                    if let Some(session) = session {
                        let mut s = session.lock().unwrap();
                        let mut next = s.session.clone();
                        next.dispatch_error = Some(err);
                        self.store.commit(&[Record::Session(next.clone())])?;
                        s.session = next;
                    }
                }
            }
        }
        Ok(outcome)
    }

    pub fn close_study(&self, study_id: &str) -> Result<StudyStatus> {
        let entry = self.entry(study_id)?;
        let mut study = entry.study.write().unwrap();
        if study.status != StudyStatus::Running {
            return Err(ServiceError::InvalidTransition {
                from: study.status,
                action: "close",
            });
        }
        let mut next = study.clone();
        next.status = StudyStatus::Closed;
        next.closed_at = Some(now());
        self.store.commit(&[Record::Study(next.clone())])?;
        *study = next;
        Ok(study.status)
    }

    pub fn list_studies(&self) -> Vec<StudySummary> {
        let studies: Vec<_> = self.studies.read().unwrap().values().cloned().collect();
        let mut out: Vec<StudySummary> = studies
            .iter()
            .map(|e| {
                let s = e.study.read().unwrap();
                StudySummary {
                    id: s.id.clone(),
                    title: s.spec.title.clone(),
                    status: s.status,
                    mode: s.spec.mode,
                    created_at: s.created_at,
                    participants: s.spec.participants.len(),
                }
            })
            .collect();
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        out
    }

    pub fn study_status(&self, study_id: &str) -> Result<StudyStatusView> {
        let entry = self.entry(study_id)?;
        let study = entry.study.read().unwrap();
        let mut progress: BTreeMap<SessionState, usize> =
            SessionState::ALL.iter().map(|&s| (s, 0)).collect();
        let mut dispatch_failures = 0;
        for session in entry.sessions.read().unwrap().values() {
            let s = session.lock().unwrap();
            *progress.entry(s.session.state).or_default() += 1;
            dispatch_failures += s.session.dispatch_error.is_some() as usize;
        }
        Ok(StudyStatusView {
            id: study.id.clone(),
            title: study.spec.title.clone(),
            description: study.spec.description.clone(),
            status: study.status,
            mode: study.spec.mode,
            created_at: study.created_at,
            started_at: study.started_at,
            closed_at: study.closed_at,
            participants: study.spec.participants.len(),
            elicitation_items: study.item_set.len(),
            labels: study.labels.clone(),
            warnings: study.warnings.clone(),
            progress,
            dispatch_failures,
        })
    }

    /// The session's current questionnaire. The first fetch of an invited
    /// session opens the initial phase; the first fetch after mapping
    /// opens the final phase.
    pub fn get_questionnaire(&self, token: &str) -> Result<SessionView> {
        let (entry, session) = self.session_entry(token)?;
        let study = entry.study.read().unwrap();
        if study.status != StudyStatus::Running {
            return Err(ServiceError::StudyNotRunning);
        }
        let data = entry
            .data
            .clone()
            .ok_or_else(|| ServiceError::StudyDataUnavailable(study.id.clone()))?;
        let mut s = session.lock().unwrap();
        let advance = match s.session.state {
            SessionState::Invited => Some(SessionState::InitialPhase),
            SessionState::Mapped => Some(SessionState::FinalPhase),
            _ => None,
        };
        if let Some(state) = advance {
            let mut next = s.session.clone();
            next.state = state;
            next.updated_at = now();
            self.store.commit(&[Record::Session(next.clone())])?;
            s.session = next;
        }

        let mut view = SessionView {
            study_title: study.spec.title.clone(),
            study_description: study.spec.description.clone(),
            state: s.session.state,
            questionnaire: None,
            lists: Vec::new(),
        };
        match s.session.state {
            SessionState::InitialPhase => view.questionnaire = Some(data.initial.clone()),
            SessionState::FinalPhase => {
                view.questionnaire = Some(final_questionnaire(&study, &data, &s.session)?);
                if study.spec.mode == StudyMode::Comparison {
                    view.lists = render_lists(&data, &s.session);
                }
            }
            SessionState::Done => {}
            SessionState::Void => {
                return Err(ServiceError::SessionVoid(
                    s.session.void_reason.unwrap_or(VoidReason::AllSkipped),
                ))
            }
            SessionState::Invited | SessionState::Mapped => unreachable!("advanced above"),
        }
        Ok(view)
    }

    /// Maps the initial answers to a dataset user. Questions left out of
    /// `answers` count as skipped.
    pub fn submit_initial(&self, token: &str, answers: Vec<Answer>) -> Result<InitialOutcome> {
        let (entry, session) = self.session_entry(token)?;
        let study = entry.study.read().unwrap();
        if study.status != StudyStatus::Running {
            return Err(ServiceError::StudyNotRunning);
        }
        let data = entry
            .data
            .clone()
            .ok_or_else(|| ServiceError::StudyDataUnavailable(study.id.clone()))?;
        let mut s = session.lock().unwrap();
        match s.session.state {
            SessionState::InitialPhase => {}
            SessionState::Void => {
                return Err(ServiceError::SessionVoid(
                    s.session.void_reason.unwrap_or(VoidReason::AllSkipped),
                ))
            }
            other => return Err(ServiceError::PhaseMismatch(other)),
        }
        let scale = data.dataset.scale();
        let mut given: BTreeMap<ItemId, Option<f64>> = BTreeMap::new();
        for a in &answers {
            let question = data
                .initial
                .question(&a.question_id)
                .ok_or_else(|| ServiceError::UnknownQuestion(a.question_id.clone()))?;
            let QuestionKind::RateItem { item, .. } = question.kind else {
                unreachable!("initial questionnaires only hold rating questions");
            };
            let invalid = |reason: &str| ServiceError::InvalidAnswer {
                question: a.question_id.clone(),
                reason: reason.to_string(),
            };
            let value = match a.answer {
                AnswerValue::Skip => None,
                AnswerValue::Rating(v) if scale.contains(v) && scale.is_on_step(v) => Some(v),
                AnswerValue::Rating(_) => return Err(invalid("rating is not a point of the scale")),
                _ => return Err(invalid("expected a rating or skip")),
            };
            if given.insert(item, value).is_some() {
                return Err(invalid("answered more than once"));
            }
        }

        let answered = given.values().filter(|v| v.is_some()).count();
        let mapped = preference_vector(given, scale).and_then(|v| {
            map_to_user(&v, &data.dataset, Some(&data.recsets), &study.spec.mapping)
        });
        let mut next = s.session.clone();
        next.updated_at = now();
        match mapped {
            Ok(result) => {
                next.state = SessionState::Mapped;
                if study.spec.mode == StudyMode::Comparison {
                    next.list_a = Some(self.rng.lock().unwrap().random_bool(0.5) as usize);
                }
                next.mapping = Some(result);
            }
            Err(MappingError::AllSkipped) => {
                next.state = SessionState::Void;
                next.void_reason = Some(VoidReason::AllSkipped);
            }
            Err(MappingError::NoCandidate) => {
                next.state = SessionState::Void;
                next.void_reason = Some(VoidReason::NoCandidate);
            }
            Err(e) => {
                return Err(ServiceError::InvalidSpec(format!("mapping failed: {e}")));
            }
        }
        let response = ResponseRecord {
            token: token.to_string(),
            phase: Phase::Initial,
            answers,
            submitted_at: next.updated_at,
        };
        self.store.commit(&[
            Record::Session(next.clone()),
            Record::Response(response.clone()),
        ])?;
        s.responses.insert(Phase::Initial, response);
        s.session = next;
        Ok(InitialOutcome {
            state: s.session.state,
            void_reason: s.session.void_reason,
            answered,
            overlap: s.session.mapping.as_ref().map(|m| m.overlap),
        })
    }

    /// Records the complete final or validation answers and finishes the
    /// session.
    pub fn submit_final(&self, token: &str, answers: Vec<Answer>) -> Result<FinalOutcome> {
        let (entry, session) = self.session_entry(token)?;
        let study = entry.study.read().unwrap();
        if study.status != StudyStatus::Running {
            return Err(ServiceError::StudyNotRunning);
        }
        let data = entry
            .data
            .clone()
            .ok_or_else(|| ServiceError::StudyDataUnavailable(study.id.clone()))?;
        let mut s = session.lock().unwrap();
        match s.session.state {
            SessionState::Mapped | SessionState::FinalPhase => {}
            SessionState::Void => {
                return Err(ServiceError::SessionVoid(
                    s.session.void_reason.unwrap_or(VoidReason::AllSkipped),
                ))
            }
            other => return Err(ServiceError::PhaseMismatch(other)),
        }
        let questionnaire = final_questionnaire(&study, &data, &s.session)?;
        check_final_answers(&questionnaire, &answers)?;

        let mut next = s.session.clone();
        next.state = SessionState::Done;
        next.updated_at = now();
        let response = ResponseRecord {
            token: token.to_string(),
            phase: questionnaire.phase,
            answers,
            submitted_at: next.updated_at,
        };
        self.store.commit(&[
            Record::Session(next.clone()),
            Record::Response(response.clone()),
        ])?;
        s.responses.insert(questionnaire.phase, response);
        s.session = next;
        Ok(FinalOutcome {
            state: SessionState::Done,
        })
    }

    /// Results of a closed study.
    pub fn results(&self, study_id: &str) -> Result<StudyResults> {
        let entry = self.entry(study_id)?;
        let study = entry.study.read().unwrap();
        if study.status != StudyStatus::Closed {
            return Err(ServiceError::StudyNotClosed);
        }
        let guards: Vec<_> = entry.sessions.read().unwrap().values().cloned().collect();
        let locked: Vec<_> = guards.iter().map(|g| g.lock().unwrap()).collect();
        let mut sessions: Vec<&Session> = locked.iter().map(|g| &g.session).collect();
        sessions.sort_by_key(|s| s.ordinal);
        let responses: Vec<&ResponseRecord> =
            locked.iter().flat_map(|g| g.responses.values()).collect();
        Ok(StudyResults::assemble(
            &study,
            &sessions,
            &responses,
            &self.options.hash_salt,
        ))
    }

    pub fn export_results(&self, study_id: &str, format: ExportFormat) -> Result<String> {
        let results = self.results(study_id)?;
        Ok(match format {
            ExportFormat::Json => results.to_json(),
            ExportFormat::Csv => results.to_csv(),
        })
    }

    /// Every session of a study, in participant order.
    pub fn sessions(&self, study_id: &str) -> Result<Vec<Session>> {
        let entry = self.entry(study_id)?;
        let table = entry.sessions.read().unwrap();
        let mut out: Vec<Session> = table.values().map(|s| s.lock().unwrap().session.clone()).collect();
        out.sort_by_key(|s| s.ordinal);
        Ok(out)
    }
}

fn load_data_from(
    study: &Study,
    dataset: BenchmarkDataset,
    recsets: RecommendationSets,
) -> Result<StudyData> {
    let initial = build_initial_questionnaire(&study.item_set, &dataset)?;
    let final_ = match study.spec.mode {
        StudyMode::Comparison => Some(build_final_questionnaire(&study.spec.dimensions)?),
        StudyMode::MappingValidation => None,
    };
    Ok(StudyData {
        dataset,
        recsets,
        initial,
        final_,
    })
}

fn final_questionnaire(study: &Study, data: &StudyData, session: &Session) -> Result<Questionnaire> {
    match &data.final_ {
        Some(q) => Ok(q.clone()),
        None => {
            let mapped = session
                .mapping
                .as_ref()
                .expect("mapped sessions carry a mapping")
                .mapped_user;
            let user = data
                .dataset
                .user(mapped)
                .expect("mapped user is a dataset user");
            Ok(build_validation_questionnaire(
                &data.dataset,
                user,
                study.spec.validation_n,
            )?)
        }
    }
}

fn render_lists(data: &StudyData, session: &Session) -> Vec<RenderedList> {
    let (Some(mapping), Some(a)) = (&session.mapping, session.list_a) else {
        return Vec::new();
    };
    [a, 1 - a]
        .iter()
        .zip(recstudy_core::elicitation::LIST_LABELS)
        .map(|(&idx, label)| RenderedList {
            label: label.to_string(),
            items: data
                .recsets
                .list(idx, mapping.mapped_user)
                .unwrap_or_default()
                .iter()
                .map(|&item| RenderedItem {
                    item,
                    title: data.dataset.display_title(item),
                    genres: data
                        .dataset
                        .item(item)
                        .map(|i| i.genres.iter().cloned().collect())
                        .unwrap_or_default(),
                })
                .collect(),
        })
        .collect()
}

fn check_final_answers(questionnaire: &Questionnaire, answers: &[Answer]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for a in answers {
        let q = questionnaire
            .question(&a.question_id)
            .ok_or_else(|| ServiceError::UnknownQuestion(a.question_id.clone()))?;
        let invalid = |reason: String| ServiceError::InvalidAnswer {
            question: a.question_id.clone(),
            reason,
        };
        match (&q.kind, &a.answer) {
            (
                QuestionKind::LikertCompare { points, .. } | QuestionKind::LikertAgree { points, .. },
                AnswerValue::Likert(n),
            ) => {
                if *n < 1 || n > points {
                    return Err(invalid(format!("expected 1 to {points}")));
                }
            }
            (QuestionKind::PickList { choices }, AnswerValue::Pick(label)) => {
                if !choices.contains(label) {
                    return Err(invalid(format!("expected one of {choices:?}")));
                }
            }
            _ => return Err(invalid("answer type does not fit the question".into())),
        }
        if !seen.insert(a.question_id.as_str()) {
            return Err(invalid("answered more than once".into()));
        }
    }
    let missing: Vec<String> = questionnaire
        .questions
        .iter()
        .filter(|q| !seen.contains(q.id.as_str()))
        .map(|q| q.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(ServiceError::IncompleteAnswers(missing));
    }
    Ok(())
}
