mod support;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use recstudy::service::dispatch::{Dispatcher, MemorySink};
use recstudy::service::model::SessionState;
use recstudy::service::store::{RedbStore, Snapshot, Store};
use recstudy::service::StudyService;
use support::*;

fn done_responses(snap: &Snapshot) -> BTreeMap<String, Vec<String>> {
    snap.sessions
        .iter()
        .filter(|s| s.state == SessionState::Done)
        .map(|s| {
            let mut own: Vec<String> = snap
                .responses
                .iter()
                .filter(|r| r.token == s.token)
                .map(|r| serde_json::to_string(r).unwrap())
                .collect();
            own.sort();
            (s.token.clone(), own)
        })
        .collect()
}

fn open(path: &Path) -> (Arc<dyn Store>, StudyService) {
    let store: Arc<dyn Store> = Arc::new(RedbStore::open(path).unwrap());
    let sink: Arc<dyn Dispatcher> = Arc::new(MemorySink::new());
    let service = StudyService::open(store.clone(), sink, options(11)).unwrap();
    (store, service)
}

#[test]
fn redb_round_trips_records() {
    let fx = Fixture::new();
    let db = fx.path().join("store.redb");
    let (store, service) = open(&db);
    let id = service.create_study(fx.spec(&["a@lab.org"])).unwrap().study_id;
    service.start_study(&id).unwrap();
    let before = store.load().unwrap();
    drop(service);
    drop(store);
    let (store, service) = open(&db);
    assert_eq!(store.load().unwrap(), before);
    assert_eq!(service.sessions(&id).unwrap().len(), 1);
}

/// Copies the database file after every committed operation, then reopens
/// each copy as if the process had been killed there.
#[test]
fn done_sessions_survive_restart_at_every_checkpoint() {
    let fx = Fixture::new();
    let db = fx.path().join("live.redb");
    let (store, service) = open(&db);
    let id = service.create_study(fx.spec(&emails(6).iter().map(String::as_str).collect::<Vec<_>>())).unwrap().study_id;
    service.start_study(&id).unwrap();
    let tokens: Vec<String> = service.sessions(&id).unwrap().into_iter().map(|s| s.token).collect();

    let mut checkpoints = Vec::new();
    let mut snap = |label: &str| {
        let copy = fx.path().join(format!("cp-{}-{label}.redb", checkpoints.len()));
        std::fs::copy(&db, &copy).unwrap();
        checkpoints.push((copy, store.load().unwrap()));
    };
    for (i, t) in tokens.iter().enumerate() {
        let q = service.get_questionnaire(t).unwrap().questionnaire.unwrap();
        snap("fetch");
        service
            .submit_initial(t, answers_as_user(&q, TOY_RATINGS, (i % 4) as u32 + 1))
            .unwrap();
        snap("initial");
        if i % 3 != 2 {
            let q = service.get_questionnaire(t).unwrap().questionnaire.unwrap();
            service.submit_final(t, complete_final(&q, 1 + i as u8, i % 2)).unwrap();
            snap("final");
        }
    }
    service.close_study(&id).unwrap();
    snap("close");
    drop(service);

    let mut saw_done = 0;
    for (copy, expected) in &checkpoints {
        let (reopened, restarted) = open(copy);
        let loaded = reopened.load().unwrap();
        assert_eq!(&loaded, expected, "store contents differ at {}", copy.display());
        let done = done_responses(expected);
        assert_eq!(done_responses(&loaded), done);
        for s in restarted.sessions(&id).unwrap() {
            if done.contains_key(&s.token) {
                assert_eq!(s.state, SessionState::Done);
            }
        }
        saw_done = saw_done.max(done.len());
    }
    assert_eq!(saw_done, 4);
}
