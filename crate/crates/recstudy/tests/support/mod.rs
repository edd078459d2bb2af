//! Toy study fixtures shared by the integration tests.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use recstudy::formats::DatasetRef;
use recstudy::service::dispatch::{Dispatcher, MemorySink};
use recstudy::service::model::{
    Answer, AnswerValue, ElicitationSpec, StrategyName, StudyMode, StudySpec,
};
use recstudy::service::store::{MemoryStore, Store};
use recstudy::service::{ServiceOptions, StudyService};
use recstudy_core::{MappingConfig, Question, QuestionKind, Questionnaire, RatingScale};

/// Four users over six items with pairwise-distinct profiles.
pub const TOY_RATINGS: &[(u32, u32, f64)] = &[
    (1, 1, 5.0),
    (1, 2, 4.0),
    (1, 3, 1.0),
    (1, 4, 2.0),
    (2, 1, 1.0),
    (2, 2, 2.0),
    (2, 3, 5.0),
    (2, 5, 4.0),
    (3, 1, 3.0),
    (3, 2, 5.0),
    (3, 4, 4.5),
    (3, 6, 2.0),
    (4, 2, 1.5),
    (4, 3, 3.0),
    (4, 5, 5.0),
    (4, 6, 4.0),
];

pub const TOY_ITEMS: &str = "movieId,title,genres\n\
1,Toy Story (1995),Adventure|Animation|Children\n\
2,Jumanji (1995),Adventure|Children|Fantasy\n\
3,\"Heat, The (1995)\",Action|Crime|Thriller\n\
4,Sabrina (1995),Comedy|Romance\n\
5,GoldenEye (1995),Action|Adventure|Thriller\n\
6,Casino (1995),Crime|Drama\n";

pub fn ratings_csv(rows: &[(u32, u32, f64)]) -> String {
    let mut s = String::from("userId,movieId,rating,timestamp\n");
    for (i, (u, it, v)) in rows.iter().enumerate() {
        writeln!(s, "{u},{it},{v:.1},{}", 1_000_000 + i).unwrap();
    }
    s
}

/// Two lists per user: items the user has not rated, in two orders.
pub fn recs_csv(rows: &[(u32, u32, f64)], labels: [&str; 2]) -> String {
    let mut users: Vec<u32> = rows.iter().map(|r| r.0).collect();
    users.sort();
    users.dedup();
    let mut items: Vec<u32> = rows.iter().map(|r| r.1).collect();
    items.sort();
    items.dedup();
    let mut s = String::from("algorithm,userId,rank,itemId\n");
    for (idx, label) in labels.iter().enumerate() {
        for &u in &users {
            let mut unseen: Vec<u32> = items
                .iter()
                .copied()
                .filter(|&i| !rows.iter().any(|r| r.0 == u && r.1 == i))
                .collect();
            if unseen.is_empty() {
                unseen = items.clone();
            }
            if idx == 1 {
                unseen.reverse();
            }
            for (rank, item) in unseen.iter().enumerate() {
                writeln!(s, "{label},{u},{},{item}", rank + 1).unwrap();
            }
        }
    }
    s
}

/// Files of a toy study in a temporary directory.
pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub dataset: DatasetRef,
    pub recs: PathBuf,
}

impl Fixture {
    pub fn new() -> Self {
        Self::with_ratings(TOY_RATINGS)
    }

    pub fn with_ratings(rows: &[(u32, u32, f64)]) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("ratings.csv"), ratings_csv(rows)).unwrap();
        std::fs::write(dir.path().join("movies.csv"), TOY_ITEMS).unwrap();
        let recs = dir.path().join("recs.csv");
        std::fs::write(&recs, recs_csv(rows, ["alpha", "beta"])).unwrap();
        Fixture {
            dataset: DatasetRef::from_path(dir.path(), RatingScale::HALF_STARS),
            recs,
            dir,
        }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn spec(&self, participants: &[&str]) -> StudySpec {
        StudySpec {
            title: "Toy study".into(),
            description: "Compare two lists".into(),
            dataset: self.dataset.clone(),
            mapping: MappingConfig {
                min_overlap: 1,
                ..MappingConfig::default()
            },
            elicitation: ElicitationSpec {
                strategy: StrategyName::Popularity,
                k: 6,
                seed: 0,
            },
            dimensions: vec!["novelty".into(), "diversity".into(), "serendipity".into()],
            recommendations: self.recs.clone(),
            participants: participants.iter().map(|s| s.to_string()).collect(),
            mode: StudyMode::Comparison,
            validation_n: 10,
        }
    }
}

pub fn emails(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}@lab.example.org")).collect()
}

pub struct Deployment {
    pub service: Arc<StudyService>,
    pub store: Arc<dyn Store>,
    pub sink: Arc<MemorySink>,
}

pub fn options(seed: u64) -> ServiceOptions {
    ServiceOptions {
        base_url: "http://study.test".into(),
        hash_salt: "test-salt".into(),
        seed: Some(seed),
    }
}

pub fn deploy_with(sink: MemorySink, seed: u64) -> Deployment {
    let store: Arc<dyn Store> = Arc::new(MemoryStore::new());
    let sink = Arc::new(sink);
    let dispatcher: Arc<dyn Dispatcher> = sink.clone();
    let service = StudyService::open(store.clone(), dispatcher, options(seed)).unwrap();
    Deployment {
        service: Arc::new(service),
        store,
        sink,
    }
}

pub fn deploy(seed: u64) -> Deployment {
    deploy_with(MemorySink::new(), seed)
}

pub fn answer(question_id: &str, answer: AnswerValue) -> Answer {
    Answer {
        question_id: question_id.to_string(),
        answer,
    }
}

/// Answers every rating question with `rating(item)`, skipping on `None`.
pub fn initial_answers(q: &Questionnaire, rating: impl Fn(u32) -> Option<f64>) -> Vec<Answer> {
    q.questions
        .iter()
        .map(|question| {
            let QuestionKind::RateItem { item, .. } = question.kind else {
                panic!("initial questionnaire holds a non-rating question");
            };
            let value = rating(item.0).map_or(AnswerValue::Skip, AnswerValue::Rating);
            answer(&question.id, value)
        })
        .collect()
}

/// Answers the ratings user `user` gave in `rows`.
pub fn answers_as_user(q: &Questionnaire, rows: &[(u32, u32, f64)], user: u32) -> Vec<Answer> {
    initial_answers(q, |item| {
        rows.iter()
            .find(|r| r.0 == user && r.1 == item)
            .map(|r| r.2)
    })
}

/// A complete, valid answer to a final or validation questionnaire.
pub fn complete_final(q: &Questionnaire, likert: u8, pick: usize) -> Vec<Answer> {
    q.questions.iter().map(|question| final_answer(question, likert, pick)).collect()
}

pub fn final_answer(question: &Question, likert: u8, pick: usize) -> Answer {
    let value = match &question.kind {
        QuestionKind::PickList { choices } => AnswerValue::Pick(choices[pick].clone()),
        _ => AnswerValue::Likert(likert),
    };
    answer(&question.id, value)
}

/// `data/ml-100k` at the workspace root, as written by
/// `scripts/fetch_ml100k.py`.
pub fn ml100k_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k")
}

pub fn ml100k_ref() -> DatasetRef {
    let dir = ml100k_dir();
    assert!(
        dir.join("ratings.csv").exists(),
        "ML-100K not found at {}; run `python3 scripts/fetch_ml100k.py` first",
        dir.display()
    );
    DatasetRef::from_path(&dir, RatingScale::FIVE_STARS)
}

/// Serves `service` on an ephemeral local port; returns the base URL.
pub async fn spawn_server(service: Arc<StudyService>, static_dir: Option<PathBuf>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = recstudy::http::router(service, static_dir);
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}
